use std::fmt::Write as _;
use std::path::Path;

use super::experiment::RegretCurve;
use crate::error::Result;

pub const CSV_HEADER: &str = "strategy,T,mean_regret,stderr,misid_freq,bounds";

/// Ten significant digits; plain decimal for moderate magnitudes,
/// scientific otherwise.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..10).contains(&exp) {
        format!("{:.*}", (9 - exp).max(0) as usize, x)
    } else {
        format!("{x:.9e}")
    }
}

/// One row per (strategy, checkpoint). Bounds are `name=value` pairs joined
/// with `;`; a missing standard error is written as `NA`.
pub fn write_csv(curves: &[RegretCurve]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for curve in curves {
        for p in &curve.points {
            let bounds = p
                .bounds
                .iter()
                .map(|(name, v)| format!("{name}={}", format_float(*v)))
                .collect::<Vec<_>>()
                .join(";");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                curve.strategy,
                p.budget,
                format_float(p.mean_regret),
                p.std_err.map_or_else(|| "NA".to_string(), format_float),
                format_float(p.misid_freq),
                bounds
            );
        }
    }
    out
}

pub fn emit_csv(curves: &[RegretCurve], path: &Path) -> Result<()> {
    std::fs::write(path, write_csv(curves))?;
    Ok(())
}

/// Long format, one value per row: `strategy,T,series,value`. Bound
/// overlays appear under strategy `bound`, once per budget.
pub fn write_plot_data(curves: &[RegretCurve]) -> String {
    let mut out = String::from("strategy,T,series,value\n");
    for curve in curves {
        for p in &curve.points {
            let _ = writeln!(
                out,
                "{},{},mean_regret,{}",
                curve.strategy,
                p.budget,
                format_float(p.mean_regret)
            );
            if let Some(se) = p.std_err {
                let _ = writeln!(
                    out,
                    "{},{},stderr,{}",
                    curve.strategy,
                    p.budget,
                    format_float(se)
                );
            }
            let _ = writeln!(
                out,
                "{},{},misid_freq,{}",
                curve.strategy,
                p.budget,
                format_float(p.misid_freq)
            );
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    for p in curves.iter().flat_map(|c| &c.points) {
        if seen.insert(p.budget) {
            for (name, v) in &p.bounds {
                let _ = writeln!(out, "bound,{},{name},{}", p.budget, format_float(*v));
            }
        }
    }
    out
}

pub fn emit_plot_data(curves: &[RegretCurve], path: &Path) -> Result<()> {
    std::fs::write(path, write_plot_data(curves))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::CheckpointStats;

    fn curve(name: &str, budgets: &[usize]) -> RegretCurve {
        RegretCurve {
            strategy: name.to_string(),
            points: budgets
                .iter()
                .map(|&t| CheckpointStats {
                    budget: t,
                    mean_regret: 0.01,
                    std_err: None,
                    misid_freq: 0.05,
                    recommend_counts: vec![19, 1],
                    bounds: vec![
                        ("bubeck_lower".into(), 0.05),
                        ("rs_aipw_upper".into(), 1.0 / 3.0),
                    ],
                })
                .collect(),
        }
    }

    #[test]
    fn float_format() {
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(1.0 / 3.0), "0.3333333333");
        assert_eq!(format_float(12.5), "12.50000000");
        assert_eq!(format_float(-0.001234), "-0.001234000000");
        assert_eq!(format_float(1.5e-9), "1.500000000e-9");
    }

    #[test]
    fn rows_and_header() {
        let text = write_csv(&[curve("a", &[10, 20, 30]), curve("b", &[10, 20, 30])]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "a,10,0.01000000000,NA,0.05000000000,bubeck_lower=0.05000000000;rs_aipw_upper=0.3333333333");
        assert!(!text.contains('\r'));
        assert_eq!(write_csv(&[]), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        emit_csv(&[curve("a", &[5])], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 2);
        assert!(emit_csv(&[], &dir.path().join("missing/out.csv")).is_err());
        let plot = write_plot_data(&[curve("a", &[5, 6]), curve("b", &[5, 6])]);
        assert_eq!(plot.lines().filter(|l| l.starts_with("bound,")).count(), 4);
        assert_eq!(
            plot.lines().filter(|l| l.contains("mean_regret")).count(),
            4
        );
    }
}
