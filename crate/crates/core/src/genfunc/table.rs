//! Plain-text table format for sampled fields.
//!
//! ```text
//! # wavesys-table v1 eps=6.25e-2 dim=1 ncomp=1 ntimes=1 shape=5 columns=t,x1,v0
//! 0.0000000000000000e0 -1.0000000000000000e0 0.0000000000000000e0
//! ...
//! ```

use std::io::{BufRead, Write};

use super::norms::{SampleGrid, SampledField};
use crate::error::{Error, Result};

const MAGIC: &str = "# wavesys-table v1";

/// Formats with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_table(w: &mut impl Write, field: &SampledField, eps: f64) -> Result<()> {
    let g = &field.grid;
    let shape: Vec<String> = g.axes.iter().map(|a| a.len().to_string()).collect();
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=g.dim()).map(|k| format!("x{k}")));
    cols.extend((0..field.ncomp).map(|c| format!("v{c}")));
    writeln!(
        w,
        "{MAGIC} eps={} dim={} ncomp={} ntimes={} shape={} columns={}",
        fmt_f64(eps),
        g.dim(),
        field.ncomp,
        g.times.len(),
        shape.join("x"),
        cols.join(",")
    )?;
    let mut line = String::new();
    for i in 0..g.num_points() {
        let (t, x) = g.point(i);
        line.clear();
        line.push_str(&fmt_f64(t));
        for v in x.iter().chain(&field.values[i * field.ncomp..(i + 1) * field.ncomp]) {
            line.push(' ');
            line.push_str(&fmt_f64(*v));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Reads a table back; returns the field and its ε.
pub fn read_table(r: impl BufRead) -> Result<(SampledField, f64)> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Spec("empty table".into()))??;
    let rest = header
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::Spec("missing table header".into()))?;
    let mut eps = None;
    let mut dim = None;
    let mut ncomp = None;
    let mut ntimes = None;
    let mut shape: Option<Vec<usize>> = None;
    for kv in rest.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Spec(format!("bad header field '{kv}'")))?;
        let bad = || Error::Spec(format!("bad header value '{kv}'"));
        match k {
            "eps" => eps = Some(v.parse::<f64>().map_err(|_| bad())?),
            "dim" => dim = Some(v.parse::<usize>().map_err(|_| bad())?),
            "ncomp" => ncomp = Some(v.parse::<usize>().map_err(|_| bad())?),
            "ntimes" => ntimes = Some(v.parse::<usize>().map_err(|_| bad())?),
            "shape" => {
                shape = Some(
                    v.split('x')
                        .map(|s| s.parse::<usize>().map_err(|_| bad()))
                        .collect::<Result<_>>()?,
                )
            }
            "columns" => {}
            _ => return Err(Error::Spec(format!("unknown header field '{k}'"))),
        }
    }
    let missing = |n: &str| Error::Spec(format!("table header lacks '{n}'"));
    let (eps, dim, ncomp, ntimes, shape) = (
        eps.ok_or_else(|| missing("eps"))?,
        dim.ok_or_else(|| missing("dim"))?,
        ncomp.ok_or_else(|| missing("ncomp"))?,
        ntimes.ok_or_else(|| missing("ntimes"))?,
        shape.ok_or_else(|| missing("shape"))?,
    );
    if shape.len() != dim {
        return Err(Error::Spec("shape does not match dim".into()));
    }
    let ns: usize = shape.iter().product();
    let mut times = Vec::with_capacity(ntimes);
    let mut axes: Vec<Vec<f64>> = shape.iter().map(|&n| Vec::with_capacity(n)).collect();
    let mut values = Vec::with_capacity(ntimes * ns * ncomp);
    let mut row = 0usize;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Spec(format!("bad number on data row {}", row + 1)))?;
        if nums.len() != 1 + dim + ncomp {
            return Err(Error::Spec(format!("data row {} has {} columns", row + 1, nums.len())));
        }
        if row % ns == 0 {
            times.push(nums[0]);
        }
        // the first time level fixes the axes
        if row < ns {
            let mut rem = row;
            for k in (0..dim).rev() {
                let i = rem % shape[k];
                rem /= shape[k];
                if axes[k].len() == i {
                    axes[k].push(nums[1 + k]);
                }
            }
        }
        values.extend_from_slice(&nums[1 + dim..]);
        row += 1;
    }
    if row != ntimes * ns {
        return Err(Error::Spec(format!("expected {} data rows, found {row}", ntimes * ns)));
    }
    let field = SampledField::new(SampleGrid { times, axes }, ncomp, values)?;
    Ok((field, eps))
}
