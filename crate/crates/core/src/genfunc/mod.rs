//! Low-regularity coefficients, their mollified nets, and norm scales.

pub mod expr;
pub mod mollifier;
pub mod net;
pub mod norms;
pub mod table;

pub use expr::{Expr, PiecewiseExpr, Poly, Region, SpaceTimeBox};
pub use mollifier::{default_sweep, Mollifier, Rescaling};
pub use net::{net_arithmetic, CoefficientNet, NetOp, Provenance, Shape};
pub use norms::{compute_norm, Compact, NormKind, NormRequest, SampleGrid, SampledField};
