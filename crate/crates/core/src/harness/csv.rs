//! CSV persistence with a fixed schema and fixed float formatting, so equal
//! configs produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::RiskReport;
use crate::error::{Error, Result};

/// Column order of `simulate` / `sweep` output.
pub const CSV_HEADER: &str = "n,p,s,sigma,mu_inf,estimator,lambda_scale,reps,seed,mse,se,\
oracle_exact,naive_exact,ght_bound,lower_thm2,lower_thm3,condition_ok,support_err";

/// Fixed-format float: 17 significant digits, scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Render one CSV row per estimator of a report, in config order.
pub fn report_rows(report: &RiskReport) -> Vec<String> {
    report
        .estimators
        .iter()
        .map(|est| {
            format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                report.n,
                report.p,
                report.s,
                fmt_f64(report.sigma),
                fmt_f64(report.mu_inf),
                est.name,
                fmt_opt(est.lambda_scale),
                report.reps,
                report.seed,
                fmt_f64(est.mse),
                fmt_f64(est.se),
                fmt_f64(report.bounds.oracle_exact),
                fmt_f64(report.bounds.naive_exact),
                fmt_f64(report.bounds.ght_bound.value),
                fmt_f64(report.bounds.lower_thm2.value),
                fmt_f64(report.bounds.lower_thm3.value),
                report.bounds.ght_bound.condition_ok,
                fmt_opt(est.support_err),
            )
        })
        .collect()
}

/// Line-buffered CSV writer; every appended row is flushed, so partial
/// sweeps leave a readable file.
pub struct CsvWriter {
    out: BufWriter<File>,
}

impl CsvWriter {
    /// Create (truncate) the file and write the header.
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::create(path.as_ref()).map_err(|e| {
            Error::InvalidInput(format!("cannot create {}: {e}", path.as_ref().display()))
        })?;
        let mut writer = CsvWriter {
            out: BufWriter::new(file),
        };
        writer.write_line(CSV_HEADER)?;
        Ok(writer)
    }

    fn write_line(&mut self, line: &str) -> Result<()> {
        writeln!(self.out, "{line}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::InvalidInput(format!("write failed: {e}")))
    }

    /// Append one row per estimator and flush.
    pub fn append_report(&mut self, report: &RiskReport) -> Result<()> {
        for row in report_rows(report) {
            self.write_line(&row)?;
        }
        Ok(())
    }
}
