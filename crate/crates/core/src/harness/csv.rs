use std::io::{self, Write};

use super::{CompareRow, PipelineRow};

pub const PIPELINE_HEADER: &str =
    "replication,seed,function,d,M,rho_bound,condition_met,ess,estimate,se,truth,acceptance,evaluations";

pub const COMPARE_HEADER: &str =
    "replication,seed,method,function,d,evaluations,estimate,se,ess,truth,abs_error,mode_fractions";

/// Seventeen significant digits in scientific notation.
pub(crate) fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn text(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_pipeline_csv<W: Write>(rows: &[PipelineRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{PIPELINE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.replication,
            r.seed,
            text(&r.function),
            r.d,
            real(r.m),
            real(r.rho_bound),
            r.condition_met,
            real(r.ess),
            real(r.estimate),
            real(r.se),
            real(r.truth),
            real(r.acceptance),
            r.evaluations
        )?;
    }
    Ok(())
}

pub fn write_compare_csv<W: Write>(rows: &[CompareRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{COMPARE_HEADER}")?;
    for r in rows {
        let modes: Vec<String> = r.mode_fractions.iter().map(|&v| real(v)).collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.replication,
            r.seed,
            r.method.as_str(),
            text(&r.function),
            r.d,
            r.evaluations,
            real(r.estimate),
            real(r.se),
            real(r.ess),
            real(r.truth),
            real(r.abs_error),
            modes.join(";")
        )?;
    }
    Ok(())
}
