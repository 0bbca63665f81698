//! Monte Carlo summary statistics.

use serde::{Deserialize, Serialize};

/// Type-7 empirical quantile (linear interpolation between order statistics).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of an empty sample");
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub name: String,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
    /// Sample skewness `m3 / m2^1.5`; `None` for a constant column.
    pub skewness: Option<f64>,
    /// Non-excess sample kurtosis `m4 / m2^2` (3 for a normal sample);
    /// `None` for a constant column.
    pub kurtosis: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub method: String,
    /// Replications that produced estimates.
    pub n: usize,
    /// Replications whose estimation failed and were excluded.
    pub failures: usize,
    /// Included replications whose outer search hit its budget.
    pub non_converged: usize,
    pub columns: Vec<ColumnSummary>,
}

impl McSummary {
    pub fn column(&self, name: &str) -> Option<&ColumnSummary> {
        self.columns.iter().find(|c| c.name == name)
    }
}

pub fn summarize_column(name: &str, xs: &[f64]) -> ColumnSummary {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let moment = |k: i32| xs.iter().map(|x| (x - mean).powi(k)).sum::<f64>() / n;
    let m2 = moment(2);
    let degenerate = m2 <= f64::EPSILON * f64::EPSILON * mean * mean || m2 == 0.0;
    let (skewness, kurtosis) = if degenerate {
        (None, None)
    } else {
        (Some(moment(3) / m2.powf(1.5)), Some(moment(4) / (m2 * m2)))
    };
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    ColumnSummary {
        name: name.to_string(),
        mean,
        q025: quantile(&sorted, 0.025),
        q975: quantile(&sorted, 0.975),
        skewness,
        kurtosis,
    }
}

/// Column-wise summary of an `R x k` matrix of estimates.
pub fn summarize(method: &str, names: &[String], rows: &[Vec<f64>]) -> McSummary {
    let columns = if rows.is_empty() {
        Vec::new()
    } else {
        names
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
                summarize_column(name, &col)
            })
            .collect()
    };
    McSummary {
        method: method.to_string(),
        n: rows.len(),
        failures: 0,
        non_converged: 0,
        columns,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.2}"))
}

fn fmt_num(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

/// Plain-text table with one block of rows per method, parameters as columns.
pub fn side_by_side(summaries: &[McSummary], truth: &[f64]) -> String {
    let Some(first) = summaries.first() else {
        return String::new();
    };
    let names: Vec<&str> = first.columns.iter().map(|c| c.name.as_str()).collect();
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut head = vec![String::new()];
    head.extend(names.iter().map(|s| s.to_string()));
    rows.push(head);
    if truth.len() == names.len() {
        let mut r = vec!["true".to_string()];
        r.extend(truth.iter().map(|v| fmt_num(*v)));
        rows.push(r);
    }
    for s in summaries {
        let label = format!("{} (n={}, failed={})", s.method, s.n, s.failures);
        let mut mean = vec![format!("mean {label}")];
        let mut ci = vec![format!("95% {}", s.method)];
        let mut sk = vec![format!("skewness {}", s.method)];
        let mut ku = vec![format!("kurtosis {}", s.method)];
        for c in &s.columns {
            mean.push(fmt_num(c.mean));
            ci.push(format!("[{}, {}]", fmt_num(c.q025), fmt_num(c.q975)));
            sk.push(fmt_opt(c.skewness));
            ku.push(fmt_opt(c.kurtosis));
        }
        rows.extend([mean, ci, sk, ku]);
    }
    let ncol = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..ncol)
        .map(|k| rows.iter().filter_map(|r| r.get(k)).map(String::len).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in &rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(k, c)| format!("{c:<w$}", w = widths[k]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
