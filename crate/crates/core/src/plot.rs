//! Static SVG line charts of running Acc / AAA per task.
//!
//! Output is a pure function of the input results: fixed canvas, fixed
//! axis range `[0, 1]`, fixed palette and fixed number formatting.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::harness::{write_new, RunResult};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotMetric {
    Acc,
    Aaa,
}

impl PlotMetric {
    pub const ALL: [PlotMetric; 2] = [PlotMetric::Acc, PlotMetric::Aaa];

    pub fn name(self) -> &'static str {
        match self {
            PlotMetric::Acc => "acc",
            PlotMetric::Aaa => "aaa",
        }
    }

    fn title(self) -> &'static str {
        match self {
            PlotMetric::Acc => "Accuracy on seen tasks",
            PlotMetric::Aaa => "Average anytime accuracy",
        }
    }

    fn curve(self, r: &RunResult) -> &[f64] {
        match self {
            PlotMetric::Acc => &r.running_acc,
            PlotMetric::Aaa => &r.running_aaa,
        }
    }
}

/// One line: a label and the per-task values (mean over the grouped seeds).
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub runs: usize,
    pub values: Vec<f64>,
}

/// Groups results by label in first-seen order and averages their curves.
pub fn series(results: &[RunResult], metric: PlotMetric) -> Vec<Series> {
    let mut out: Vec<(Series, Vec<f64>)> = Vec::new();
    for r in results {
        let label = r.label();
        let curve = metric.curve(r);
        match out.iter_mut().find(|(s, _)| s.label == label) {
            Some((s, sum)) => {
                s.runs += 1;
                if curve.len() > sum.len() {
                    sum.resize(curve.len(), 0.0);
                }
                sum.iter_mut().zip(curve).for_each(|(a, b)| *a += b);
            }
            None => out.push((
                Series {
                    label,
                    runs: 1,
                    values: Vec::new(),
                },
                curve.to_vec(),
            )),
        }
    }
    out.into_iter()
        .map(|(mut s, sum)| {
            s.values = sum.iter().map(|v| v / s.runs as f64).collect();
            s
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders one metric as an SVG document.
pub fn render_svg(lines: &[Series], metric: PlotMetric) -> String {
    let n = lines.iter().map(|s| s.values.len()).max().unwrap_or(1).max(1);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let x = |i: usize| {
        if n == 1 {
            LEFT + pw / 2.0
        } else {
            LEFT + pw * i as f64 / (n - 1) as f64
        }
    };
    let y = |v: f64| TOP + ph * (1.0 - v.clamp(0.0, 1.0));
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    s.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        LEFT + pw / 2.0,
        metric.title()
    ));
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        s.push_str(&format!(
            "<line x1=\"{LEFT:.2}\" y1=\"{0:.2}\" x2=\"{1:.2}\" y2=\"{0:.2}\" stroke=\"#dddddd\"/>\n<text x=\"{2:.2}\" y=\"{3:.2}\" text-anchor=\"end\">{v:.2}</text>\n",
            y(v),
            LEFT + pw,
            LEFT - 6.0,
            y(v) + 4.0
        ));
    }
    for i in 0..n {
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
            x(i),
            TOP + ph + 18.0,
            i + 1
        ));
    }
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">task</text>\n",
        LEFT + pw / 2.0,
        HEIGHT - 10.0
    ));
    s.push_str(&format!(
        "<rect x=\"{LEFT:.2}\" y=\"{TOP:.2}\" width=\"{pw:.2}\" height=\"{ph:.2}\" fill=\"none\" stroke=\"#333333\"/>\n"
    ));
    for (li, line) in lines.iter().enumerate() {
        let color = PALETTE[li % PALETTE.len()];
        let pts: Vec<String> = line
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(v)))
            .collect();
        s.push_str(&format!(
            "<polyline class=\"series\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        for p in &pts {
            let (px, py) = p.split_once(',').expect("formatted pair");
            s.push_str(&format!("<circle cx=\"{px}\" cy=\"{py}\" r=\"3\" fill=\"{color}\"/>\n"));
        }
        let ly = TOP + 14.0 + 18.0 * li as f64;
        let lx = LEFT + pw + 12.0;
        s.push_str(&format!(
            "<g class=\"legend\"><line x1=\"{lx:.2}\" y1=\"{0:.2}\" x2=\"{1:.2}\" y2=\"{0:.2}\" stroke=\"{color}\" stroke-width=\"2\"/><text x=\"{2:.2}\" y=\"{3:.2}\" font-size=\"10\">{4}</text></g>\n",
            ly,
            lx + 16.0,
            lx + 20.0,
            ly + 4.0,
            escape(&line.label)
        ));
    }
    s.push_str("</svg>\n");
    s
}

/// Header of the CSV that backs the charts.
pub const PLOT_CSV_HEADER: &str = "metric,series,runs,task,value";

pub fn plot_csv(results: &[RunResult]) -> String {
    let mut out = String::from(PLOT_CSV_HEADER);
    out.push('\n');
    for metric in PlotMetric::ALL {
        for s in series(results, metric) {
            for (i, v) in s.values.iter().enumerate() {
                out.push_str(&format!(
                    "{},\"{}\",{},{},{}\n",
                    metric.name(),
                    s.label.replace('"', "'"),
                    s.runs,
                    i + 1,
                    v
                ));
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct PlotOutput {
    pub svgs: Vec<PathBuf>,
    pub csv: PathBuf,
}

/// Writes `plot-<metric>-<hash>.svg` for each metric and `plot-<hash>.csv`.
pub fn write_plots(results: &[RunResult], out: &Path) -> Result<PlotOutput> {
    let csv = plot_csv(results);
    let tag = &hex::encode(Sha256::digest(csv.as_bytes()))[..12];
    let svgs = PlotMetric::ALL
        .into_iter()
        .map(|m| {
            write_new(
                out,
                &format!("plot-{}-{tag}", m.name()),
                "svg",
                &render_svg(&series(results, m), m),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let csv = write_new(out, &format!("plot-{tag}"), "csv", &csv)?;
    Ok(PlotOutput { svgs, csv })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyline_per_series() {
        let lines = vec![
            Series {
                label: "a".into(),
                runs: 1,
                values: vec![0.5, 0.75, 1.0],
            },
            Series {
                label: "b<c".into(),
                runs: 2,
                values: vec![0.2, 0.1, 0.0],
            },
        ];
        let svg = render_svg(&lines, PlotMetric::Acc);
        assert_eq!(svg.matches("class=\"series\"").count(), 2);
        assert_eq!(svg.matches("class=\"legend\"").count(), 2);
        assert!(svg.contains("b&lt;c"));
        assert_eq!(svg, render_svg(&lines, PlotMetric::Acc));
    }
}
