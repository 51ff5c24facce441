//! Run reports, CSV tables and text summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::asymptotics::{ConditionReport, SweepSeries};
use crate::error::{Error, Result};
use crate::genfunc::table::fmt_f64;

/// Header of every series CSV.
pub const CSV_HEADER: [&str; 4] = ["epsilon", "norm_kind", "K_id", "value"];

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub spec: Option<String>,
    pub seed: u64,
    /// `None` for subcommands without a verdict.
    pub verdict: Option<bool>,
    pub exit_code: i32,
    pub error: Option<String>,
    pub timings_ms: BTreeMap<String, f64>,
    /// Emitted files, relative to the output directory.
    pub files: Vec<String>,
    pub summary: serde_json::Value,
}

/// Rows `epsilon,norm_kind,K_id,value` for each series in order.
pub fn series_csv(series: &[SweepSeries]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Spec(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for s in series {
        for (e, v) in s.eps.iter().zip(&s.values) {
            w.write_record([fmt_f64(*e), s.norm_kind.clone(), s.k_id.clone(), fmt_f64(*v)])
                .map_err(csv_err)?;
        }
    }
    w.into_inner().map_err(|e| Error::Spec(format!("csv: {e}")))
}

/// File-name friendly form of a net name.
pub fn file_stem(name: &str) -> String {
    let name = name.replace("^-1", "_inv").replace('\'', "_prime");
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

pub fn series_line(s: &SweepSeries) -> String {
    let mut line = format!("{} {} {} class={}", s.subject, s.norm_kind, s.k_id, s.classification);
    if let Some(fit) = &s.fit {
        let _ = write!(line, " p={:.4} q={:.4}", fit.p, fit.q);
    }
    if !s.flagged_eps.is_empty() {
        let _ = write!(line, " flagged={:?}", s.flagged_eps);
    }
    if let Some(e) = &s.error {
        let _ = write!(line, " error=\"{e}\"");
    }
    line
}

pub fn conditions_text(title: &str, rep: &ConditionReport) -> String {
    let mut out = format!("# {title}\naggregate: {}\n", if rep.aggregate { "pass" } else { "fail" });
    for h in &rep.hypotheses {
        let _ = writeln!(
            out,
            "{} requires {}: {} [{}]",
            h.hypothesis,
            h.requirement,
            series_line(&h.series),
            if h.pass { "pass" } else { "fail" }
        );
    }
    out
}

/// One CSV per net, in order of first appearance.
pub fn conditions_csv(prefix: &str, rep: &ConditionReport) -> Result<Vec<(String, Vec<u8>)>> {
    let mut order: Vec<&str> = Vec::new();
    for h in &rep.hypotheses {
        if !order.contains(&h.net.as_str()) {
            order.push(&h.net);
        }
    }
    order
        .into_iter()
        .map(|net| {
            let series: Vec<SweepSeries> = rep.for_net(net).map(|h| h.series.clone()).collect();
            Ok((format!("{prefix}_{}.csv", file_stem(net)), series_csv(&series)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::ClassifyConfig;

    #[test]
    fn csv_layout() {
        let eps = [0.5, 0.25];
        let s = SweepSeries::build("S", "sup", "K1", &eps, vec![Ok(1.0), Ok(0.1)], &ClassifyConfig::default());
        let text = String::from_utf8(series_csv(&[s]).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "epsilon,norm_kind,K_id,value");
        assert_eq!(lines[1], "5.0000000000000000e-1,sup,K1,1.0000000000000000e0");
        assert_eq!(lines[2], "2.5000000000000000e-1,sup,K1,1.0000000000000001e-1");
    }

    #[test]
    fn stems() {
        assert_eq!(file_stem("S^-1"), "S_inv");
        assert_eq!(file_stem("g'"), "g_prime");
        assert_eq!(file_stem("sym(B)"), "sym_B_");
    }
}
