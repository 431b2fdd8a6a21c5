use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "t,q_droo,q_oracle,q_hat,k_star,K_t,loss,wall_us";

/// One CSV line. Absent values are written as empty fields.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub t: u64,
    pub q_droo: f64,
    pub q_oracle: Option<f64>,
    /// `q_droo / q_oracle`, present when the oracle rate is positive.
    pub q_hat: Option<f64>,
    pub k_star: usize,
    pub k_t: usize,
    pub loss: Option<f64>,
    pub wall_us: u64,
}

impl MetricsRow {
    pub fn normalized(q_droo: f64, q_oracle: Option<f64>) -> Option<f64> {
        q_oracle.filter(|q| *q > 0.0).map(|q| q_droo / q)
    }

    fn write_line(&self, out: &mut String) {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            self.t,
            self.q_droo,
            opt(self.q_oracle),
            opt(self.q_hat),
            self.k_star,
            self.k_t,
            opt(self.loss),
            self.wall_us
        );
    }
}

pub fn rows_to_csv(rows: &[MetricsRow]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        r.write_line(&mut s);
    }
    s
}

pub fn write_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(rows_to_csv(rows).as_bytes()).map_err(|e| Error::io(path, e))
}

/// Parses a file written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Config(format!("{}: unexpected CSV header", path.display())));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::Config(format!("{}:{}: malformed row", path.display(), i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad());
            }
            let opt = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| bad())
                }
            };
            Ok(MetricsRow {
                t: f[0].parse().map_err(|_| bad())?,
                q_droo: f[1].parse().map_err(|_| bad())?,
                q_oracle: opt(f[2])?,
                q_hat: opt(f[3])?,
                k_star: f[4].parse().map_err(|_| bad())?,
                k_t: f[5].parse().map_err(|_| bad())?,
                loss: opt(f[6])?,
                wall_us: f[7].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Trailing mean over the last `min(window, t)` samples.
pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least 1");
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for (i, &v) in series.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= series[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}
