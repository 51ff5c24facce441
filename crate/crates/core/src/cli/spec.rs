//! Problem-spec documents (TOML).
//!
//! ```toml
//! dimension = 1
//! horizon = 1.0
//! mollifier = "log"
//!
//! [domain]
//! lower = [-2.0]
//! upper = [2.0]
//! padding = 2.0
//!
//! [coefficients]
//! R = "1 + H(x)"
//!
//! [initial]
//! u0 = "exp(-16*(x + 1)^2)"
//! ```
//!
//! Scalar coefficients are expression strings, vectors are arrays of
//! strings and matrices arrays of rows. An `[acoustic]` section with the
//! wave speed `c` replaces `R` and `g` in one dimension.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::asymptotics::pipeline::RawMetric;
use crate::asymptotics::{ModeratenessConfig, SweepConfig};
use crate::error::{Error, Result};
use crate::genfunc::{CoefficientNet, Expr, PiecewiseExpr, Rescaling, SpaceTimeBox};
use crate::solver::GridSpec;
use crate::transform::{coefficient_net, Domain, ValidationSample, WaveProblem};

/// Names accepted in the `[mollifiers]` table.
const MOLLIFIED_NAMES: [&str; 9] = ["R", "g", "a", "b", "c", "f", "u0", "u1", "speed"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Scalar(String),
    Vector(Vec<String>),
    Matrix(Vec<Vec<String>>),
}

impl Entry {
    fn zero() -> Self {
        Entry::Scalar("0".into())
    }

    fn sources(&self) -> Vec<&str> {
        match self {
            Entry::Scalar(s) => vec![s.as_str()],
            Entry::Vector(v) => v.iter().map(String::as_str).collect(),
            Entry::Matrix(m) => m.iter().flatten().map(String::as_str).collect(),
        }
    }

    /// Row-major `rows × cols` entries; scalars fill `1 × 1` and a length-n
    /// vector a column.
    fn grid(&self, name: &str, rows: usize, cols: usize) -> Result<Vec<Vec<&str>>> {
        let out: Vec<Vec<&str>> = match self {
            Entry::Scalar(s) => vec![vec![s.as_str()]],
            Entry::Vector(v) if cols == 1 => v.iter().map(|s| vec![s.as_str()]).collect(),
            Entry::Vector(v) => vec![v.iter().map(String::as_str).collect()],
            Entry::Matrix(m) => m.iter().map(|r| r.iter().map(String::as_str).collect()).collect(),
        };
        if out.len() != rows || out.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape(format!("'{name}' must be {rows}x{cols}")));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default)]
    pub padding: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<Entry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<Entry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Entry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Entry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<Entry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<Entry>,
}

/// `u_tt = c² u_xx` with wave speed `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcousticSpec {
    pub c: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSpec {
    pub u0: String,
    pub u1: String,
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec {
            u0: "0".into(),
            u1: "0".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquivalenceSpec {
    pub h: Vec<f64>,
    pub eps: f64,
    /// Known solution `u(t, x)` for the absolute error.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    /// Smallest accepted observed order.
    pub min_order: f64,
}

impl Default for EquivalenceSpec {
    fn default() -> Self {
        EquivalenceSpec {
            h: vec![0.02, 0.01, 0.005],
            eps: 2f64.powi(-4),
            exact: None,
            min_order: 1.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    System,
    Wave,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// ε values for `transform` and `solve`.
    pub eps: Vec<f64>,
    pub solver: SolverChoice,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            eps: vec![2f64.powi(-4), 2f64.powi(-10)],
            solver: SolverChoice::System,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub dimension: usize,
    pub horizon: f64,
    #[serde(default = "default_rescaling")]
    pub mollifier: Rescaling,
    pub domain: DomainSpec,
    #[serde(default)]
    pub coefficients: CoefficientSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acoustic: Option<AcousticSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub mollifiers: BTreeMap<String, Rescaling>,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub moderateness: ModeratenessConfig,
    #[serde(default)]
    pub equivalence: EquivalenceSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

fn default_rescaling() -> Rescaling {
    Rescaling::Model
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    let msg = e.message().trim().to_string();
    match e.span() {
        Some(span) => {
            let (line, col) = line_col(text, span.start);
            Error::Spec(format!("line {line}, column {col}: {msg}"))
        }
        None => Error::Spec(msg),
    }
}

fn missing_keys(table: &toml::Table) -> Vec<&'static str> {
    let mut missing = Vec::new();
    for key in ["dimension", "horizon"] {
        if !table.contains_key(key) {
            missing.push(key);
        }
    }
    match table.get("domain").and_then(|d| d.as_table()) {
        Some(d) => {
            for (key, name) in [("lower", "domain.lower"), ("upper", "domain.upper")] {
                if !d.contains_key(key) {
                    missing.push(name);
                }
            }
        }
        None => missing.extend(["domain.lower", "domain.upper"]),
    }
    let has_r = table
        .get("coefficients")
        .and_then(|c| c.as_table())
        .is_some_and(|c| c.contains_key("R"));
    if !has_r && !table.contains_key("acoustic") {
        missing.push("coefficients.R");
    }
    missing
}

/// Parses and validates a spec document. Every expression is parsed and
/// lowered on the domain, so syntax errors and overlapping regions are
/// reported here with their position in `text`.
pub fn parse_spec(text: &str) -> Result<ProblemSpec> {
    let table: toml::Table = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
    let missing = missing_keys(&table);
    if !missing.is_empty() {
        return Err(Error::Spec(format!("missing keys: {}", missing.join(", "))));
    }
    let spec: ProblemSpec = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
    spec.validate_in(Some(text))?;
    Ok(spec)
}

impl ProblemSpec {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Spec(format!("cannot serialize spec: {e}")))
    }

    pub fn domain(&self) -> Result<Domain> {
        let d = Domain::new(self.domain.lower.clone(), self.domain.upper.clone(), self.domain.padding)?;
        if d.dim() != self.dimension {
            return Err(Error::Config(format!(
                "dimension is {} but the domain box has {} axes",
                self.dimension,
                d.dim()
            )));
        }
        Ok(d)
    }

    /// Every named expression of the spec.
    fn expressions(&self) -> Vec<(String, &str)> {
        let mut out = Vec::new();
        let c = &self.coefficients;
        for (name, e) in [("R", &c.r), ("g", &c.g), ("a", &c.a), ("b", &c.b), ("c", &c.c), ("f", &c.f)] {
            if let Some(e) = e {
                out.extend(e.sources().into_iter().map(|s| (format!("coefficients.{name}"), s)));
            }
        }
        if let Some(ac) = &self.acoustic {
            out.push(("acoustic.c".into(), ac.c.as_str()));
        }
        out.push(("initial.u0".into(), self.initial.u0.as_str()));
        out.push(("initial.u1".into(), self.initial.u1.as_str()));
        if let Some(e) = &self.equivalence.exact {
            out.push(("equivalence.exact".into(), e.as_str()));
        }
        out
    }

    fn validate_in(&self, text: Option<&str>) -> Result<()> {
        let domain = self.domain()?;
        if !(self.horizon > 0.0) {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if self.acoustic.is_some() {
            if self.dimension != 1 {
                return Err(Error::Config("the acoustic form is one-dimensional".into()));
            }
            if self.coefficients.r.is_some() || self.coefficients.g.is_some() {
                return Err(Error::Config("give either acoustic.c or coefficients.R/g, not both".into()));
            }
        } else if self.coefficients.r.is_none() {
            return Err(Error::Spec("missing keys: coefficients.R".into()));
        }
        if let Some(bad) = self.mollifiers.keys().find(|k| !MOLLIFIED_NAMES.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown mollifier target '{bad}'")));
        }
        let bx = SpaceTimeBox::new(self.horizon, &domain.lower, &domain.upper);
        for (field, src) in self.expressions() {
            let located = |e: Error| locate(text, &field, src, e);
            let expr = Expr::parse(src).map_err(located)?;
            if !expr.is_smooth() {
                PiecewiseExpr::from_expr(&expr, self.dimension, bx.clone()).map_err(located)?;
            }
        }
        Ok(())
    }

    fn rescaling_for(&self, name: &str, force: Option<Rescaling>) -> Rescaling {
        force.or_else(|| self.mollifiers.get(name).copied()).unwrap_or(self.mollifier)
    }

    /// The mollified wave problem; `force` overrides every mollifier choice.
    pub fn problem(&self, force: Option<Rescaling>) -> Result<WaveProblem> {
        self.validate_in(None)?;
        let domain = self.domain()?;
        let n = self.dimension;
        let t = self.horizon;
        let net = |name: &str, key: &str, src: &str| -> Result<CoefficientNet> {
            let expr = Expr::parse(src).map_err(|e| locate(None, key, src, e))?;
            coefficient_net(name, &expr, &domain, t, self.rescaling_for(key, force))
        };
        let tensor = |key: &str, entry: &Entry, rows: usize, cols: usize| -> Result<CoefficientNet> {
            let cells = entry.grid(key, rows, cols)?;
            if rows * cols == 1 {
                return net(key, key, cells[0][0]);
            }
            let mut entries = Vec::with_capacity(rows * cols);
            for (i, row) in cells.iter().enumerate() {
                for (j, src) in row.iter().enumerate() {
                    let label = if cols == 1 { format!("{key}{}", i + 1) } else { format!("{key}{}{}", i + 1, j + 1) };
                    entries.push(net(&label, key, src)?);
                }
            }
            CoefficientNet::from_entries(key, rows, cols, entries)
        };
        let c = &self.coefficients;
        let zero = Entry::zero();
        let zeros = |e: &Option<Entry>| e.clone().unwrap_or_else(|| if n == 1 { zero.clone() } else { Entry::Vector(vec!["0".into(); n]) });

        let (r, g) = match &self.acoustic {
            Some(ac) => {
                let speed = net("c", "speed", &ac.c)?;
                (speed.mul(&speed)?, CoefficientNet::scalar_constant("g", 1, 0.0))
            }
            None => {
                let entry = c.r.as_ref().expect("validated");
                check_symmetric(entry, n)?;
                (tensor("R", entry, n, n)?, tensor("g", &zeros(&c.g), n, 1)?)
            }
        };
        let scalar = |key: &str, e: &Option<Entry>| tensor(key, e.as_ref().unwrap_or(&zero), 1, 1);
        let p = WaveProblem {
            domain: domain.clone(),
            horizon: t,
            r: r.with_name("R").assume_spd()?,
            g: g.with_name("g"),
            a: scalar("a", &c.a)?,
            b: tensor("b", &zeros(&c.b), n, 1)?.with_name("b"),
            c: scalar("c", &c.c)?,
            f: scalar("f", &c.f)?,
            u0: net("u0", "u0", &self.initial.u0)?,
            u1: net("u1", "u1", &self.initial.u1)?,
        };
        p.validate(&ValidationSample::default_for(&domain, t))?;
        Ok(p)
    }

    /// The raw metric of a problem without lower-order terms.
    pub fn raw_metric(&self) -> Result<RawMetric> {
        self.validate_in(None)?;
        let c = &self.coefficients;
        if [&c.a, &c.b, &c.c, &c.f].iter().any(|e| e.as_ref().is_some_and(|e| e.sources().iter().any(|s| s.trim() != "0"))) {
            return Err(Error::Config("the metric pipeline needs a = b = c = f = 0".into()));
        }
        let n = self.dimension;
        let parse = |s: &str| Expr::parse(s);
        let (r, g) = match &self.acoustic {
            Some(ac) => (vec![vec![parse(&format!("({})^2", ac.c))?]], vec![parse("0")?]),
            None => {
                let entry = c.r.as_ref().expect("validated");
                check_symmetric(entry, n)?;
                let r = entry
                    .grid("R", n, n)?
                    .iter()
                    .map(|row| row.iter().map(|s| parse(s)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                let g_entry = c.g.clone().unwrap_or_else(|| Entry::Vector(vec!["0".into(); n]));
                let g = g_entry.grid("g", n, 1)?.iter().map(|row| parse(row[0])).collect::<Result<Vec<_>>>()?;
                (r, g)
            }
        };
        Ok(RawMetric {
            domain: self.domain()?,
            horizon: self.horizon,
            g,
            r,
            u0: parse(&self.initial.u0)?,
            u1: parse(&self.initial.u1)?,
        })
    }
}

fn check_symmetric(entry: &Entry, n: usize) -> Result<()> {
    let cells = entry.grid("R", n, n)?;
    for i in 0..n {
        for j in 0..i {
            if Expr::parse(cells[i][j])? != Expr::parse(cells[j][i])? {
                return Err(Error::Config(format!("R is not symmetric: entries ({}, {}) and ({}, {}) differ", i + 1, j + 1, j + 1, i + 1)));
            }
        }
    }
    Ok(())
}

/// Prefixes an expression error with its field and, when the document is
/// at hand, the line and column of the offending character.
fn locate(text: Option<&str>, field: &str, src: &str, e: Error) -> Error {
    let column = match &e {
        Error::Expr { column, .. } => *column,
        _ => 1,
    };
    let pos = text.and_then(|t| {
        let quoted = [format!("\"{src}\""), format!("'{src}'")];
        quoted.iter().find_map(|q| t.find(q.as_str())).map(|off| line_col(t, off + column))
    });
    match pos {
        Some((line, col)) => Error::Spec(format!("{field}: line {line}, column {col}: {e}")),
        None => Error::Spec(format!("{field}: {e}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::builtins;

    #[test]
    fn builtins_parse_and_round_trip() {
        for name in builtins::NAMES {
            let spec = parse_spec(builtins::text(name).unwrap()).unwrap();
            let again = parse_spec(&spec.to_toml().unwrap()).unwrap();
            assert_eq!(spec, again, "{name}");
        }
    }

    #[test]
    fn acoustic_speed() {
        let spec = parse_spec(builtins::text("acoustic").unwrap()).unwrap();
        assert_eq!(spec.dimension, 1);
        assert_eq!(spec.acoustic.as_ref().unwrap().c, "1 + H(x)");
        let p = spec.problem(None).unwrap();
        let s = p.s().unwrap();
        assert!((s.eval_scalar(0.01, 0.0, &[1.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!((s.eval_scalar(0.01, 0.0, &[-1.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_document_lists_missing_keys() {
        let msg = parse_spec("").unwrap_err().to_string();
        for key in ["dimension", "horizon", "domain.lower", "domain.upper", "coefficients.R"] {
            assert!(msg.contains(key), "{msg}");
        }
    }

    const BASE: &str = "dimension = 1\nhorizon = 1.0\n[domain]\nlower = [-1.0]\nupper = [1.0]\n";

    #[test]
    fn overlapping_regions_name_both() {
        let text = format!("{BASE}[coefficients]\nR = \"piecewise {{ x < 0.5 : 1; x >= 0 : 2 }}\"\n");
        let msg = parse_spec(&text).unwrap_err().to_string();
        assert!(msg.contains("regions 1 and 2 overlap"), "{msg}");
        assert!(msg.contains("line 7"), "{msg}");
    }

    #[test]
    fn expression_errors_carry_position() {
        let text = format!("{BASE}[coefficients]\nR = \"1 + * x\"\n");
        let msg = parse_spec(&text).unwrap_err().to_string();
        assert!(msg.starts_with("coefficients.R: line 7, column"), "{msg}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{BASE}colour = 3\n[coefficients]\nR = \"1\"\n");
        let msg = parse_spec(&text).unwrap_err().to_string();
        assert!(msg.contains("line 6") && msg.contains("colour"), "{msg}");
        let text = format!("{BASE}[coefficients]\nR = \"1\"\n[grid]\nhh = 0.1\n");
        assert!(parse_spec(&text).is_err());
    }

    #[test]
    fn matrix_entries() {
        let text = "dimension = 2\nhorizon = 1.0\n[domain]\nlower = [0.0, 0.0]\nupper = [1.0, 1.0]\npadding = 0.5\n\
                    [coefficients]\nR = [[\"2\", \"0.5\"], [\"0.5\", \"1 + H(x - 0.5)\"]]\ng = [\"0\", \"0.1\"]\n";
        let p = parse_spec(text).unwrap().problem(None).unwrap();
        let r = p.r.eval(0.01, 0.0, &[0.2, 0.7]).unwrap();
        assert_eq!(r[(0, 1)], 0.5);
        assert!((r[(1, 1)] - 1.0).abs() < 1e-12);
        let bad = text.replace("[\"0.5\", \"1 + H", "[\"0.4\", \"1 + H");
        assert!(parse_spec(&bad).unwrap().problem(None).is_err());
    }

    #[test]
    fn mollifier_override_order() {
        let mut spec = parse_spec(builtins::text("gt-1d").unwrap()).unwrap();
        assert_eq!(spec.rescaling_for("R", None), Rescaling::Log);
        spec.mollifiers.insert("R".into(), Rescaling::Model);
        assert_eq!(spec.rescaling_for("R", None), Rescaling::Model);
        assert_eq!(spec.rescaling_for("R", Some(Rescaling::Log)), Rescaling::Log);
    }
}
