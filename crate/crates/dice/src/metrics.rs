//! Metric export: per-run CSV, cross-seed summaries, normalized scores and
//! an SVG return plot.
//!
//! Per-run CSV columns, one row per evaluation point:
//!
//! | column | meaning |
//! |---|---|
//! | `step` | environment-step boundary of the evaluation |
//! | `mean_return`, `median_return` | raw returns of the greedy policy |
//! | `entropy` | mean behavior entropy per step since the previous row |
//! | `tau_p10`, `tau_p50`, `tau_p90` | episode temperature percentiles since the previous row |
//! | `learner_steps` | learner updates so far |
//! | `mean_shaped_return`, `median_shaped_return` | shaped returns of the greedy policy |
//! | `best_tau_return` | mean raw return at the ensemble's best temperature |
//!
//! Summary CSV columns: `step`, `seeds`, then `<metric>_mean` and
//! `<metric>_median` across seeds for `mean_return`, `median_return`,
//! `entropy`, `tau_p50` and `score`, where `score` is the normalized score of
//! `mean_return`. Empty cells are missing values.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use dice_core::{stats, Error};

use crate::runtime::{EvalPoint, TrainingReport};

pub const RUN_HEADER: &str = "step,mean_return,median_return,entropy,tau_p10,tau_p50,tau_p90,learner_steps,mean_shaped_return,median_shaped_return,best_tau_return";

pub const SUMMARY_METRICS: [&str; 5] = ["mean_return", "median_return", "entropy", "tau_p50", "score"];

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn run_csv(report: &TrainingReport) -> String {
    let mut out = format!("{RUN_HEADER}\n");
    for p in &report.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            p.step,
            p.mean_return,
            p.median_return,
            cell(p.entropy),
            cell(p.tau_p10),
            cell(p.tau_p50),
            cell(p.tau_p90),
            p.learner_steps,
            p.mean_shaped_return,
            p.median_shaped_return,
            cell(p.best_tau_return),
        );
    }
    out
}

/// `100 (g - g_random) / (g_ref - g_random)`.
pub fn normalized_score(g: f64, g_random: f64, g_ref: f64) -> dice_core::Result<f64> {
    if g_ref == g_random {
        return Err(Error::InvalidArgument("reference and random returns coincide".into()));
    }
    Ok(100.0 * (g - g_random) / (g_ref - g_random))
}

/// Mean and median across seeds of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub median: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Option<Self> {
        Some(Self { mean: stats::mean(values)?, median: stats::median(values)? })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub step: u64,
    pub seeds: usize,
    /// One entry per name in [`SUMMARY_METRICS`].
    pub metrics: Vec<Option<Aggregate>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

/// Raw returns of a uniformly random and of a reference policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreReference {
    pub random: f64,
    pub reference: f64,
}

fn metric(p: &EvalPoint, name: &str, refs: Option<ScoreReference>) -> Option<f64> {
    match name {
        "mean_return" => Some(p.mean_return),
        "median_return" => Some(p.median_return),
        "entropy" => p.entropy,
        "tau_p50" => p.tau_p50,
        "score" => refs.and_then(|r| normalized_score(p.mean_return, r.random, r.reference).ok()),
        _ => None,
    }
}

/// Groups evaluation points by step and aggregates each metric over the
/// seeds that have a value there.
pub fn summarize(reports: &[TrainingReport], refs: Option<ScoreReference>) -> Summary {
    let mut by_step: BTreeMap<u64, Vec<&EvalPoint>> = BTreeMap::new();
    for r in reports {
        for p in &r.points {
            by_step.entry(p.step).or_default().push(p);
        }
    }
    let rows = by_step
        .into_iter()
        .map(|(step, points)| SummaryRow {
            step,
            seeds: points.len(),
            metrics: SUMMARY_METRICS
                .iter()
                .map(|name| {
                    let vals: Vec<f64> = points.iter().filter_map(|p| metric(p, name, refs)).collect();
                    Aggregate::of(&vals)
                })
                .collect(),
        })
        .collect();
    Summary { rows }
}

pub fn summary_csv(summary: &Summary) -> String {
    let mut out = String::from("step,seeds");
    for m in SUMMARY_METRICS {
        let _ = write!(out, ",{m}_mean,{m}_median");
    }
    out.push('\n');
    for row in &summary.rows {
        let _ = write!(out, "{},{}", row.step, row.seeds);
        for agg in &row.metrics {
            let _ = write!(out, ",{},{}", cell(agg.map(|a| a.mean)), cell(agg.map(|a| a.median)));
        }
        out.push('\n');
    }
    out
}

/// Greedy mean return against environment steps: one thin line per seed and
/// a thick line for the across-seed mean.
pub fn returns_svg(reports: &[TrainingReport], title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    let all: Vec<&EvalPoint> = reports.iter().flat_map(|r| &r.points).collect();
    let x_max = all.iter().map(|p| p.step).max().unwrap_or(0).max(1) as f64;
    let (mut y_min, mut y_max) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.mean_return), hi.max(p.mean_return)));
    if !y_min.is_finite() {
        (y_min, y_max) = (0.0, 1.0);
    }
    if y_max - y_min < 1e-12 {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let sx = |x: f64| M + (W - 2.0 * M) * x / x_max;
    let sy = |y: f64| H - M - (H - 2.0 * M) * (y - y_min) / (y_max - y_min);
    let path = |pts: &[(f64, f64)]| {
        pts.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect::<Vec<_>>().join(" ")
    };
    let escape = |s: &str| s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<polyline points="{M},{} {M},{} {},{}" fill="none" stroke="black"/>"#,
        M,
        H - M,
        W - M,
        H - M
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">environment steps (max {})</text>"#, W / 2.0, H - 12.0, x_max);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="11">{y_max:.3}</text>"#, M - 4.0, M + 4.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="11">{y_min:.3}</text>"#, M - 4.0, H - M);
    for r in reports {
        let pts: Vec<(f64, f64)> = r.points.iter().map(|p| (p.step as f64, p.mean_return)).collect();
        let _ = writeln!(out, r##"<polyline points="{}" fill="none" stroke="#999999" stroke-width="1"/>"##, path(&pts));
    }
    let summary = summarize(reports, None);
    let mean: Vec<(f64, f64)> =
        summary.rows.iter().filter_map(|row| row.metrics[0].map(|a| (row.step as f64, a.mean))).collect();
    let _ = writeln!(out, r##"<polyline points="{}" fill="none" stroke="#1f5fbf" stroke-width="2.5"/>"##, path(&mean));
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use dice_core::learner::AgentParams;

    fn point(step: u64, ret: f64) -> EvalPoint {
        EvalPoint {
            step,
            learner_steps: step / 10,
            mean_return: ret,
            median_return: ret,
            mean_shaped_return: ret,
            median_shaped_return: ret,
            entropy: None,
            tau_p10: None,
            tau_p50: Some(1.0),
            tau_p90: None,
            best_tau_return: None,
        }
    }

    fn report(returns: &[f64]) -> TrainingReport {
        TrainingReport {
            points: returns.iter().enumerate().map(|(i, r)| point(100 * i as u64, *r)).collect(),
            env_steps: 100 * (returns.len() as u64 - 1),
            learner_steps: 0,
            episodes: 0,
            wall_clock_secs: None,
            final_params: AgentParams::zeros(1, 1),
            final_ensemble: None,
        }
    }

    #[test]
    fn normalized_score_examples() {
        assert_eq!(normalized_score(3.0, 3.0, 7.0).unwrap(), 0.0);
        assert_eq!(normalized_score(7.0, 3.0, 7.0).unwrap(), 100.0);
        assert_eq!(normalized_score(50.0, 0.0, 100.0).unwrap(), 50.0);
        assert!(normalized_score(1.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn single_seed_summary_is_that_seed() {
        let s = summarize(&[report(&[1.0, 4.0])], None);
        let a = s.rows[1].metrics[0].unwrap();
        assert_eq!((a.mean, a.median), (4.0, 4.0));
        assert_eq!(s.rows[1].seeds, 1);
    }

    #[test]
    fn summary_mean_and_median() {
        let reports = [report(&[0.0, 1.0]), report(&[0.0, 2.0]), report(&[0.0, 3.0])];
        let a = summarize(&reports, None).rows[1].metrics[0].unwrap();
        assert_eq!((a.mean, a.median), (2.0, 2.0));
        let reports = [report(&[0.0, 1.0]), report(&[0.0, 2.0]), report(&[0.0, 100.0])];
        let a = summarize(&reports, None).rows[1].metrics[0].unwrap();
        assert!((a.mean - 103.0 / 3.0).abs() < 1e-12);
        assert_eq!(a.median, 2.0);
    }

    #[test]
    fn scores_use_the_references() {
        let refs = ScoreReference { random: 0.0, reference: 10.0 };
        let s = summarize(&[report(&[0.0, 5.0])], Some(refs));
        assert_eq!(s.rows[1].metrics[4].unwrap().mean, 50.0);
        assert!(summarize(&[report(&[0.0])], None).rows[0].metrics[4].is_none());
    }

    #[test]
    fn csv_shapes() {
        let r = report(&[1.5, 2.0]);
        let csv = run_csv(&r);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], RUN_HEADER);
        assert_eq!(lines[1], "0,1.5,1.5,,,1,,0,1.5,1.5,");
        let cols = RUN_HEADER.split(',').count();
        assert!(lines.iter().all(|l| l.split(',').count() == cols));
        let summary = summary_csv(&summarize(&[r], None));
        let header_cols = summary.lines().next().unwrap().split(',').count();
        assert_eq!(header_cols, 2 + 2 * SUMMARY_METRICS.len());
        assert!(summary.lines().all(|l| l.split(',').count() == header_cols));
    }

    #[test]
    fn svg_is_well_formed() {
        let svg = returns_svg(&[report(&[0.0, 1.0, 0.5]), report(&[0.2, 0.2, 0.2])], "a <b> & c");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt;b&gt; &amp; c"));
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(!svg.contains("NaN"));
    }
}
