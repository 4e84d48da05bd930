use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use lwrdue::io::{self, DueSummary};
use lwrdue::PathId;

use crate::{Failure, ReportArgs};

const QUANTILES: [(&str, f64); 5] = [("min", 0.0), ("p25", 0.25), ("p50", 0.5), ("p75", 0.75), ("max", 1.0)];

/// Linear interpolation between order statistics of an ascending slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn stats_row(name: &str, mut values: Vec<f64>) -> Vec<(String, f64)> {
    values.retain(|v| v.is_finite());
    values.sort_by(f64::total_cmp);
    QUANTILES
        .iter()
        .map(|&(label, q)| {
            let v = if values.is_empty() { f64::NAN } else { quantile(&values, q) };
            (format!("{name}.{label}"), v)
        })
        .collect()
}

fn read_summary(dir: &Path) -> Result<DueSummary, Failure> {
    let path = dir.join("summary.json");
    let text = fs::read_to_string(&path).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
}

pub fn run(args: ReportArgs) -> Result<(), Failure> {
    let dir = &args.input;
    let gaps_path = dir.join("od_gaps.csv");
    if !gaps_path.is_file() {
        return Err(Failure::parse(format!(
            "{}: not a completed due run (od_gaps.csv missing)",
            dir.display()
        )));
    }
    let gaps = io::read_od_gaps(&gaps_path).map_err(Failure::parse)?;
    let summary = read_summary(dir)?;
    let out = args.out.clone().unwrap_or_else(|| dir.clone());
    fs::create_dir_all(&out).map_err(|e| Failure::runtime(format!("{}: {e}", out.display())))?;

    println!("{} after {} iterations, {} O-D pairs", summary.status, summary.iterations_used, gaps.len());
    let rows = [
        ("gap_s", gaps.iter().map(|g| g.gap_s).collect::<Vec<_>>()),
        ("relative_gap", gaps.iter().map(|g| g.relative_gap).collect()),
    ];
    let mut csv = String::from("statistic,min,p25,p50,p75,max\n");
    println!("{:<14}{:>12}{:>12}{:>12}{:>12}{:>12}", "statistic", "min", "p25", "p50", "p75", "max");
    for (name, values) in rows {
        let stats = stats_row(name, values);
        let _ = write!(csv, "{name}");
        print!("{name:<14}");
        for (_, v) in &stats {
            let _ = write!(csv, ",{v}");
            print!("{v:>12.6}");
        }
        csv.push('\n');
        println!();
    }
    let stats_path = out.join("gap_stats.csv");
    fs::write(&stats_path, csv).map_err(|e| Failure::runtime(format!("{}: {e}", stats_path.display())))?;

    if !args.paths.is_empty() {
        let (ids, h) = io::read_matrix_csv(&dir.join("h_final.csv")).map_err(Failure::parse)?;
        let (delay_ids, psi) = io::read_matrix_csv(&dir.join("eff_delay.csv")).map_err(Failure::parse)?;
        let times: Vec<f64> = (0..h.ncols()).map(|k| summary.t0_s + k as f64 * summary.dt_s).collect();
        for &id in &args.paths {
            let id = PathId(id);
            let row = ids.iter().position(|&p| p == id);
            let delay_row = delay_ids.iter().position(|&p| p == id);
            let (Some(r), Some(d)) = (row, delay_row) else {
                return Err(Failure::invalid(format!("path {id} is not in this run")));
            };
            let path = out.join(format!("path_{id}_curve.csv"));
            io::write_path_curves(&path, &times, &h.row(r).to_vec(), &psi.row(d).to_vec()).map_err(Failure::runtime)?;
            println!("wrote {}", path.display());
        }
    }
    io::write_plot_script(&out).map_err(Failure::runtime)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert_eq!(quantile(&[0.0, 10.0], 0.25), 2.5);
        assert_eq!(quantile(&[7.0], 0.75), 7.0);
    }

    #[test]
    fn stats_skip_non_finite() {
        let row = stats_row("x", vec![3.0, f64::NAN, 1.0]);
        assert_eq!(row[0], ("x.min".to_string(), 1.0));
        assert_eq!(row[4].1, 3.0);
    }
}
