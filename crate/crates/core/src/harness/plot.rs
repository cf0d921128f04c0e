use super::metrics::{trailing_mean, CsvTable};
use super::HarnessError;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];
const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 180.0;
const MARGIN_T: f64 = 46.0;
const MARGIN_B: f64 = 52.0;

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn from_series(series: &[(String, Vec<(f64, f64)>)]) -> Self {
        let mut f = Frame { x_min: f64::MAX, x_max: f64::MIN, y_min: f64::MAX, y_max: f64::MIN };
        for (_, pts) in series {
            for (x, y) in pts {
                f.x_min = f.x_min.min(*x);
                f.x_max = f.x_max.max(*x);
                f.y_min = f.y_min.min(*y);
                f.y_max = f.y_max.max(*y);
            }
        }
        if f.x_min > f.x_max {
            f = Frame { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 };
        }
        if (f.y_max - f.y_min).abs() < 1e-12 {
            f.y_min -= 0.5;
            f.y_max += 0.5;
        }
        if (f.x_max - f.x_min).abs() < 1e-12 {
            f.x_max += 1.0;
        }
        f
    }

    fn sx(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn sy(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B
            - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn svg_open(out: &mut String, height: f64) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" \
         viewBox=\"0 0 {WIDTH} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{WIDTH}\" height=\"{height}\" fill=\"white\"/>\n"
    );
}

fn axes(out: &mut String, frame: &Frame, title: &str, x_label: &str, y_label: &str, y_off: f64) {
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = y_off + HEIGHT - MARGIN_B;
    let y1 = y_off + MARGIN_T;
    let _ = write!(
        out,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"15\">{title}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>\n\
         <text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{y_label}</text>\n",
        (x0 + x1) / 2.0,
        y1 - 18.0,
        (x0 + x1) / 2.0,
        y0 + 36.0,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
    );
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let xv = frame.x_min + frac * (frame.x_max - frame.x_min);
        let yv = frame.y_min + frac * (frame.y_max - frame.y_min);
        let xs = frame.sx(xv);
        let ys = y_off + frame.sy(yv);
        let _ = write!(
            out,
            "<line x1=\"{xs}\" y1=\"{y0}\" x2=\"{xs}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{xs}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
             <line x1=\"{}\" y1=\"{ys}\" x2=\"{x0}\" y2=\"{ys}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            y0 + 4.0,
            y0 + 18.0,
            fmt(xv),
            x0 - 4.0,
            x0 - 8.0,
            ys + 4.0,
            fmt(yv),
        );
    }
}

fn legend(out: &mut String, labels: &[String], y_off: f64) {
    for (i, label) in labels.iter().enumerate() {
        let y = y_off + MARGIN_T + 16.0 * i as f64;
        let x = WIDTH - MARGIN_R + 12.0;
        let _ = write!(
            out,
            "<rect x=\"{x}\" y=\"{}\" width=\"12\" height=\"4\" fill=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\">{label}</text>\n",
            y - 2.0,
            color(i),
            x + 18.0,
            y + 4.0
        );
    }
}

fn polyline(out: &mut String, frame: &Frame, pts: &[(f64, f64)], stroke: &str, width: f64, opacity: f64, y_off: f64) {
    if pts.is_empty() {
        return;
    }
    let mut path = String::new();
    for (x, y) in pts {
        let _ = write!(path, "{},{} ", fmt(frame.sx(*x)), fmt(y_off + frame.sy(*y)));
    }
    let _ = write!(
        out,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{width}\" stroke-opacity=\"{opacity}\"/>\n",
        path.trim_end()
    );
}

/// Multi-series line chart; `faint` series render thin and translucent
/// (used for raw curves underneath their smoothed overlays).
fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
    faint: &[(String, Vec<(f64, f64)>)],
) -> String {
    let mut all: Vec<(String, Vec<(f64, f64)>)> = series.to_vec();
    all.extend(faint.iter().cloned());
    let frame = Frame::from_series(&all);
    let mut out = String::new();
    svg_open(&mut out, HEIGHT);
    axes(&mut out, &frame, title, x_label, y_label, 0.0);
    for (i, (_, pts)) in faint.iter().enumerate() {
        polyline(&mut out, &frame, pts, color(i), 1.0, 0.3, 0.0);
    }
    for (i, (_, pts)) in series.iter().enumerate() {
        polyline(&mut out, &frame, pts, color(i), 2.0, 1.0, 0.0);
    }
    legend(&mut out, &series.iter().map(|(l, _)| l.clone()).collect::<Vec<_>>(), 0.0);
    out.push_str("</svg>\n");
    out
}

/// Two stacked panels of grouped bars (one bar per series within each
/// group).
fn grouped_bar_panels(
    panels: &[(String, Vec<String>, Vec<(String, Vec<f64>)>)],
) -> String {
    let mut out = String::new();
    let total_height = HEIGHT * panels.len() as f64;
    svg_open(&mut out, total_height);
    for (p, (title, groups, series)) in panels.iter().enumerate() {
        let y_off = HEIGHT * p as f64;
        let y_max = series
            .iter()
            .flat_map(|(_, vals)| vals.iter())
            .fold(0.0f64, |acc, v| acc.max(*v));
        let frame = Frame {
            x_min: 0.0,
            x_max: groups.len() as f64,
            y_min: 0.0,
            y_max: if y_max > 0.0 { y_max * 1.05 } else { 1.0 },
        };
        axes(&mut out, &frame, title, "", "sum of |gradient|", y_off);
        let slot = (WIDTH - MARGIN_L - MARGIN_R) / groups.len().max(1) as f64;
        let bar = slot * 0.8 / series.len().max(1) as f64;
        for (s, (_, vals)) in series.iter().enumerate() {
            for (g, v) in vals.iter().enumerate() {
                let x = MARGIN_L + slot * g as f64 + slot * 0.1 + bar * s as f64;
                let y = y_off + frame.sy(*v);
                let h = y_off + frame.sy(0.0) - y;
                let _ = write!(
                    out,
                    "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
                    fmt(x),
                    fmt(y),
                    fmt(bar),
                    fmt(h.max(0.0)),
                    color(s)
                );
            }
        }
        for (g, label) in groups.iter().enumerate() {
            let x = MARGIN_L + slot * (g as f64 + 0.5);
            let _ = write!(
                out,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{label}</text>\n",
                fmt(x),
                fmt(y_off + HEIGHT - MARGIN_B + 18.0)
            );
        }
        legend(&mut out, &series.iter().map(|(l, _)| l.clone()).collect::<Vec<_>>(), y_off);
    }
    out.push_str("</svg>\n");
    out
}

struct RunData {
    label: String,
    table: CsvTable,
    timing: Option<CsvTable>,
}

fn run_label(path: &Path, used: &mut Vec<String>) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
    let mut label = if stem == "metrics" {
        path.parent()
            .and_then(|p| p.file_name())
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or(stem)
    } else {
        stem
    };
    while used.contains(&label) {
        label.push('\'');
    }
    used.push(label.clone());
    label
}

/// Renders the four plot families from one or more metric CSVs:
/// smoothed sum-rate curves (raw overlay), moving-average reward curves,
/// per-layer gradient weight/bias bars, and wall-clock bars. All inputs are
/// validated before any file is written; output bytes are deterministic
/// given the inputs.
pub fn emit_plots(
    csv_paths: &[PathBuf],
    out_dir: &Path,
    ma_window: usize,
) -> Result<Vec<PathBuf>, HarnessError> {
    if csv_paths.is_empty() {
        return Err(HarnessError::Config {
            key: "plot".into(),
            reason: "no input CSVs given".into(),
        });
    }
    let mut runs = Vec::new();
    let mut used_labels = Vec::new();
    for path in csv_paths {
        let table = CsvTable::read(path)?;
        for required in ["epoch", "sum_rate", "reward", "ma_reward"] {
            table.column_index(required)?;
        }
        table.numeric_column("sum_rate")?;
        let timing_path = path.parent().unwrap_or(Path::new(".")).join("timing.csv");
        let timing = if timing_path.exists() { Some(CsvTable::read(&timing_path)?) } else { None };
        runs.push(RunData { label: run_label(path, &mut used_labels), table, timing });
    }

    let mut smoothed_sum = Vec::new();
    let mut raw_sum = Vec::new();
    let mut ma_curves = Vec::new();
    for run in &runs {
        let epochs = run.table.numeric_column("epoch")?;
        let rates = run.table.numeric_column("sum_rate")?;
        let ma: Vec<(f64, f64)> = epochs
            .iter()
            .zip(run.table.numeric_column("ma_reward")?)
            .map(|(e, v)| (*e, v))
            .collect();
        let smoothed: Vec<(f64, f64)> = (0..rates.len())
            .map(|i| (epochs[i], trailing_mean(&rates, i, ma_window)))
            .collect();
        raw_sum.push((run.label.clone(), epochs.iter().copied().zip(rates).collect()));
        smoothed_sum.push((run.label.clone(), smoothed));
        ma_curves.push((run.label.clone(), ma));
    }

    // per-layer mean |gradient| bars
    let grad_groups_w = runs[0].table.columns_with_prefix("actor_grad_w_");
    let grad_groups_b = runs[0].table.columns_with_prefix("actor_grad_b_");
    let layer_labels: Vec<String> =
        (1..=grad_groups_w.len()).map(|i| format!("layer {i}")).collect();
    let mut weight_series = Vec::new();
    let mut bias_series = Vec::new();
    for run in &runs {
        let mut w_vals = Vec::new();
        for col in &grad_groups_w {
            let vals = run.table.numeric_column(col)?;
            w_vals.push(vals.iter().sum::<f64>() / vals.len() as f64);
        }
        let mut b_vals = Vec::new();
        for col in &grad_groups_b {
            let vals = run.table.numeric_column(col)?;
            b_vals.push(vals.iter().sum::<f64>() / vals.len() as f64);
        }
        weight_series.push((run.label.clone(), w_vals));
        bias_series.push((run.label.clone(), b_vals));
    }

    // wall-clock bars need every run's timing sidecar
    let mut total_seconds = Vec::new();
    let mut per_epoch_seconds = Vec::new();
    for run in &runs {
        let timing = run.timing.as_ref().ok_or_else(|| HarnessError::Csv {
            path: run.label.clone(),
            reason: "missing timing.csv sidecar next to the metric CSV".into(),
        })?;
        let cumulative = timing.numeric_column("cumulative_seconds")?;
        let epoch_s = timing.numeric_column("epoch_seconds")?;
        total_seconds.push(cumulative.last().copied().unwrap_or(0.0));
        per_epoch_seconds.push(epoch_s.iter().sum::<f64>() / epoch_s.len().max(1) as f64);
    }

    std::fs::create_dir_all(out_dir)?;
    let run_labels: Vec<String> = runs.iter().map(|r| r.label.clone()).collect();
    let files = [
        (
            "sum_rate.svg",
            line_chart(
                &format!("Sum rate (window {ma_window} smoothing)"),
                "epoch",
                "bits/s/Hz",
                &smoothed_sum,
                &raw_sum,
            ),
        ),
        (
            "ma_reward.svg",
            line_chart("Moving-average reward", "epoch", "reward", &ma_curves, &[]),
        ),
        (
            "gradients.svg",
            grouped_bar_panels(&[
                ("Per-layer gradient weight sums".into(), layer_labels.clone(), weight_series),
                ("Per-layer gradient bias sums".into(), layer_labels, bias_series),
            ]),
        ),
        (
            "time.svg",
            grouped_bar_panels(&[
                (
                    "Total wall-clock seconds".into(),
                    run_labels.clone(),
                    vec![("total".into(), total_seconds)],
                ),
                (
                    "Wall-clock seconds per epoch".into(),
                    run_labels,
                    vec![("per epoch".into(), per_epoch_seconds)],
                ),
            ]),
        ),
    ];
    let mut written = Vec::new();
    for (name, content) in files {
        let path = out_dir.join(name);
        std::fs::write(&path, content)?;
        written.push(path);
    }
    Ok(written)
}
