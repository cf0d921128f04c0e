use super::metrics::{convergence_epoch, CsvTable};
use super::HarnessError;
use std::fmt::Write as _;
use std::path::Path;

/// Efficiency comparison of a variant run against a baseline run.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub baseline_convergence: Option<usize>,
    pub variant_convergence: Option<usize>,
    pub convergence_ratio: Option<f64>,
    pub baseline_per_epoch_s: Option<f64>,
    pub variant_per_epoch_s: Option<f64>,
    pub per_epoch_time_ratio: Option<f64>,
    /// Time to convergence = convergence epochs × mean per-epoch seconds.
    pub total_time_ratio: Option<f64>,
    pub baseline_final_sum_rate: f64,
    pub variant_final_sum_rate: f64,
    pub final_sum_rate_delta: f64,
}

struct RunSummary {
    convergence: Option<usize>,
    per_epoch_s: Option<f64>,
    final_sum_rate: f64,
}

fn summarize(metrics_path: &Path, window: usize) -> Result<RunSummary, HarnessError> {
    let table = CsvTable::read(metrics_path)?;
    let sum_rates = table.numeric_column("sum_rate")?;
    if sum_rates.is_empty() {
        return Err(HarnessError::EmptyCsv(metrics_path.display().to_string()));
    }
    let plateau_len = (sum_rates.len() / 5).max(1);
    let final_sum_rate =
        sum_rates[sum_rates.len() - plateau_len..].iter().sum::<f64>() / plateau_len as f64;
    let timing_path = metrics_path.parent().unwrap_or(Path::new(".")).join("timing.csv");
    let per_epoch_s = if timing_path.exists() {
        let timing = CsvTable::read(&timing_path)?;
        let secs = timing.numeric_column("epoch_seconds")?;
        (!secs.is_empty()).then(|| secs.iter().sum::<f64>() / secs.len() as f64)
    } else {
        None
    };
    Ok(RunSummary {
        convergence: convergence_epoch(&sum_rates, window),
        per_epoch_s,
        final_sum_rate,
    })
}

fn ratio(variant: Option<f64>, baseline: Option<f64>) -> Option<f64> {
    match (variant, baseline) {
        (Some(v), Some(b)) if b != 0.0 => Some(v / b),
        _ => None,
    }
}

/// Compares two runs by their metric CSVs (timing sidecars are picked up
/// from the same directories when present). Non-converged runs yield `N/A`
/// ratios.
pub fn compare_runs(
    baseline: &Path,
    variant: &Path,
    window: usize,
) -> Result<ComparisonReport, HarnessError> {
    let b = summarize(baseline, window)?;
    let v = summarize(variant, window)?;
    let b_conv = b.convergence.map(|e| e as f64);
    let v_conv = v.convergence.map(|e| e as f64);
    let total_b = match (b_conv, b.per_epoch_s) {
        (Some(e), Some(s)) => Some(e * s),
        _ => None,
    };
    let total_v = match (v_conv, v.per_epoch_s) {
        (Some(e), Some(s)) => Some(e * s),
        _ => None,
    };
    Ok(ComparisonReport {
        baseline_convergence: b.convergence,
        variant_convergence: v.convergence,
        convergence_ratio: ratio(v_conv, b_conv),
        baseline_per_epoch_s: b.per_epoch_s,
        variant_per_epoch_s: v.per_epoch_s,
        per_epoch_time_ratio: ratio(v.per_epoch_s, b.per_epoch_s),
        total_time_ratio: ratio(total_v, total_b),
        baseline_final_sum_rate: b.final_sum_rate,
        variant_final_sum_rate: v.final_sum_rate,
        final_sum_rate_delta: v.final_sum_rate - b.final_sum_rate,
    })
}

fn opt_num<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "N/A".to_string(), |x| x.to_string())
}

fn opt_f(v: Option<f64>) -> String {
    v.map_or_else(|| "N/A".to_string(), |x| format!("{x:.4}"))
}

/// Renders the comparison as a small markdown report.
pub fn render_markdown(report: &ComparisonReport, baseline: &Path, variant: &Path) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Run comparison\n");
    let _ = writeln!(out, "- baseline: `{}`", baseline.display());
    let _ = writeln!(out, "- variant:  `{}`\n", variant.display());
    let _ = writeln!(out, "| metric | baseline | variant | ratio (variant/baseline) |");
    let _ = writeln!(out, "|---|---|---|---|");
    let _ = writeln!(
        out,
        "| convergence epoch | {} | {} | {} |",
        opt_num(report.baseline_convergence),
        opt_num(report.variant_convergence),
        opt_f(report.convergence_ratio)
    );
    let _ = writeln!(
        out,
        "| seconds per epoch | {} | {} | {} |",
        opt_f(report.baseline_per_epoch_s),
        opt_f(report.variant_per_epoch_s),
        opt_f(report.per_epoch_time_ratio)
    );
    let _ = writeln!(
        out,
        "| seconds to convergence | {} | {} | {} |",
        opt_f(report
            .baseline_convergence
            .and_then(|e| report.baseline_per_epoch_s.map(|s| e as f64 * s))),
        opt_f(report
            .variant_convergence
            .and_then(|e| report.variant_per_epoch_s.map(|s| e as f64 * s))),
        opt_f(report.total_time_ratio)
    );
    let _ = writeln!(
        out,
        "| final sum rate (last 20%) | {:.4} | {:.4} | delta {:+.4} |",
        report.baseline_final_sum_rate, report.variant_final_sum_rate, report.final_sum_rate_delta
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::metrics::{metrics_csv, MetricRecord};
    use std::path::PathBuf;

    fn write_run(dir: &Path, name: &str, sum_rates: &[f64], epoch_s: f64) -> PathBuf {
        let sub = dir.join(name);
        std::fs::create_dir_all(&sub).unwrap();
        let records: Vec<MetricRecord> = sum_rates
            .iter()
            .enumerate()
            .map(|(i, &sr)| MetricRecord {
                epoch: i + 1,
                sum_rate: sr,
                reward: sr,
                ma_reward: sr,
                updated: true,
                chi: 0.0,
                actor_grad_w: vec![0.0],
                actor_grad_b: vec![0.0],
                critic_grad_w: vec![0.0],
                critic_grad_b: vec![0.0],
                epoch_seconds: epoch_s,
                cumulative_seconds: epoch_s * (i + 1) as f64,
            })
            .collect();
        let metrics = sub.join("metrics.csv");
        std::fs::write(&metrics, metrics_csv(&records, 1, 1)).unwrap();
        std::fs::write(
            sub.join("timing.csv"),
            crate::harness::metrics::timing_csv(&records),
        )
        .unwrap();
        metrics
    }

    fn ramp(converge_at: usize, total: usize) -> Vec<f64> {
        (0..total)
            .map(|e| if e < converge_at { 10.0 * e as f64 / converge_at as f64 } else { 10.0 })
            .collect()
    }

    #[test]
    fn identical_runs_have_unit_ratios() {
        let dir = tempfile::tempdir().unwrap();
        let a = write_run(dir.path(), "a", &ramp(40, 200), 0.5);
        let b = write_run(dir.path(), "b", &ramp(40, 200), 0.5);
        let report = compare_runs(&a, &b, 10).unwrap();
        assert_eq!(report.convergence_ratio, Some(1.0));
        assert_eq!(report.per_epoch_time_ratio, Some(1.0));
        assert_eq!(report.total_time_ratio, Some(1.0));
        assert_eq!(report.final_sum_rate_delta, 0.0);
    }

    #[test]
    fn half_epochs_at_1_5x_per_epoch_gives_0_75_total() {
        let dir = tempfile::tempdir().unwrap();
        let baseline = write_run(dir.path(), "base", &ramp(80, 400), 1.0);
        let variant = write_run(dir.path(), "var", &ramp(40, 400), 1.5);
        let report = compare_runs(&baseline, &variant, 10).unwrap();
        let conv_ratio = report.convergence_ratio.unwrap();
        assert!((conv_ratio - 0.5).abs() < 0.05, "convergence ratio {conv_ratio}");
        assert_eq!(report.per_epoch_time_ratio, Some(1.5));
        let total = report.total_time_ratio.unwrap();
        assert!((total - 0.75).abs() < 0.08, "total ratio {total}");
    }

    #[test]
    fn short_run_reports_na_ratios() {
        let dir = tempfile::tempdir().unwrap();
        // fewer epochs than the detector window: never converges
        let a = write_run(dir.path(), "a", &[1.0, 2.0, 3.0], 0.1);
        let b = write_run(dir.path(), "b", &ramp(40, 200), 0.1);
        let report = compare_runs(&a, &b, 10).unwrap();
        assert!(report.baseline_convergence.is_none());
        assert_eq!(report.convergence_ratio, None);
        let md = render_markdown(&report, Path::new("a"), Path::new("b"));
        assert!(md.contains("N/A"));
    }
}
