use thiserror::Error;

/// A sample location `(ε, t, x)` attached to pointwise failures.
#[derive(Debug, Clone, PartialEq)]
pub struct Location {
    pub eps: f64,
    pub t: f64,
    pub x: Vec<f64>,
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "eps={:e}, t={}, x=(", self.eps, self.t)?;
        for (i, v) in self.x.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite matrix entry")]
    NonFinite,

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e} <= floor {floor:e})")]
    NotSpd { min_eigenvalue: f64, floor: f64 },

    #[error("coefficient R is not positive definite at {location}: smallest eigenvalue {min_eigenvalue:e}")]
    NotSpdAt {
        location: Location,
        min_eigenvalue: f64,
    },

    #[error("matrix is singular (eigenvalue {eigenvalue:e} below floor {floor:e})")]
    Singular { eigenvalue: f64, floor: f64 },

    #[error("principal part is not Lorentzian at {location}")]
    NotLorentzian { location: Location },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("expression error at column {column}: {message}")]
    Expr { column: usize, message: String },

    #[error("regions {first} and {second} overlap")]
    Overlap { first: usize, second: usize },

    #[error("regions leave a gap around {0:?}")]
    Gap(Vec<f64>),

    #[error("{0}")]
    Spec(String),

    #[error("system is not of wave type: {0}")]
    Structure(String),

    #[error("CFL violation: tau={tau:e} exceeds bound {bound:e}")]
    Cfl { tau: f64, bound: f64 },

    #[error("numerical blow-up at step {step} (t={t}): max |w| = {max_abs:e}")]
    BlowUp { step: usize, t: f64, max_abs: f64 },

    #[error("norm request: {0}")]
    Norm(String),

    #[error("fit: {0}")]
    Fit(String),

    #[error("at eps={eps:e}: {source}")]
    AtEps {
        eps: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("raw metric outside the Geroch-Traschen surrogate class: {0}")]
    NotGerochTraschen(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at_eps(self, eps: f64) -> Self {
        match self {
            Error::AtEps { .. } => self,
            other => Error::AtEps {
                eps,
                source: Box::new(other),
            },
        }
    }

    /// Innermost error, unwrapping `AtEps` context.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtEps { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_blow_up(&self) -> bool {
        matches!(self.root(), Error::BlowUp { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
