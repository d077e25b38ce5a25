//! Brownian ReLU curves over an x grid, as long-format CSV and an SVG plot.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use brelu_core::activation::{forward, ActivationKind, InputGradMode, Sampling, DEFAULT_EPSILON};
use brelu_core::numerics::RngStream;
use brelu_core::Matrix;

use crate::error::{LabError, Result};
use crate::report::write_file;

pub const PATHS_HEADER: [&str; 4] = ["alpha", "M", "x", "f"];

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub alpha: f64,
    pub paths: u32,
    pub x: Vec<f64>,
    pub f: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathsFigure {
    pub curves: Vec<Curve>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathsSpec {
    pub alphas: Vec<f64>,
    pub paths: Vec<u32>,
    pub xmin: f64,
    pub xmax: f64,
    pub points: usize,
    pub seed: u64,
    pub sampling: Sampling,
}

impl PathsSpec {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.paths.is_empty() {
            return Err(LabError::config("paths needs at least one alpha and one M"));
        }
        if self.paths.contains(&0) {
            return Err(LabError::config("M values must be >= 1"));
        }
        if !(self.xmin.is_finite() && self.xmax.is_finite() && self.xmin < self.xmax) {
            return Err(LabError::config(format!(
                "invalid x range [{}, {}]",
                self.xmin, self.xmax
            )));
        }
        if self.xmin >= 0.0 {
            return Err(LabError::config("x range must include negative values"));
        }
        if self.points < 2 {
            return Err(LabError::config("need at least 2 grid points"));
        }
        if self.alphas.iter().any(|a| !a.is_finite()) {
            return Err(LabError::config("alpha values must be finite"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let step = (self.xmax - self.xmin) / (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                if k + 1 == self.points {
                    self.xmax
                } else {
                    self.xmin + step * k as f64
                }
            })
            .collect()
    }
}

/// Tabulates every (alpha, M) curve. All curves read the same noise stream,
/// so curves differ only through alpha and M.
pub fn emit_paths_figure(spec: &PathsSpec) -> Result<PathsFigure> {
    spec.validate()?;
    let x = spec.grid();
    let input = Matrix::column(&x);
    let rng = RngStream::new(spec.seed, 0);
    let mut curves = Vec::new();
    for &alpha in &spec.alphas {
        for &paths in &spec.paths {
            let kind = ActivationKind::Brownian {
                paths,
                epsilon: DEFAULT_EPSILON,
                sampling: spec.sampling,
                input_grad: InputGradMode::Pathwise,
            };
            let (f, _) = forward(&kind, &input, alpha, &rng)?;
            curves.push(Curve {
                alpha,
                paths,
                x: x.clone(),
                f: f.into_data(),
            });
        }
    }
    Ok(PathsFigure { curves })
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 56.0;
const LEGEND: f64 = 150.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

impl PathsFigure {
    pub fn to_csv(&self) -> String {
        let mut out = PATHS_HEADER.join(",");
        out.push('\n');
        for c in &self.curves {
            for (x, f) in c.x.iter().zip(&c.f) {
                let _ = writeln!(out, "{},{},{},{}", c.alpha, c.paths, x, f);
            }
        }
        out
    }

    pub fn to_svg(&self) -> String {
        let points = self.curves.iter().flat_map(|c| c.x.iter().zip(&c.f));
        let (mut x0, mut x1, mut y0, mut y1) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for (&x, &y) in points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !(y1 > y0) {
            y0 -= 1.0;
            y1 += 1.0;
        }
        let plot_w = WIDTH - 2.0 * MARGIN - LEGEND;
        let plot_h = HEIGHT - 2.0 * MARGIN;
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * plot_w;
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * plot_h;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        // frame and zero axes
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
        );
        if x0 < 0.0 && x1 > 0.0 {
            let _ = writeln!(
                s,
                r##"<line x1="{0:.2}" y1="{MARGIN}" x2="{0:.2}" y2="{1:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
                sx(0.0),
                HEIGHT - MARGIN
            );
        }
        if y0 < 0.0 && y1 > 0.0 {
            let _ = writeln!(
                s,
                r##"<line x1="{MARGIN}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
                sy(0.0),
                MARGIN + plot_w
            );
        }
        for (v, anchor) in [(x0, "start"), (x1, "end")] {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="{anchor}">{v:.2}</text>"#,
                sx(v),
                HEIGHT - MARGIN + 18.0
            );
        }
        for v in [y0, y1] {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
                MARGIN - 6.0,
                sy(v) + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">x</text>"#,
            MARGIN + plot_w / 2.0,
            HEIGHT - 12.0
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">f(x)</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0
        );

        for (k, c) in self.curves.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let pts: Vec<String> =
                c.x.iter()
                    .zip(&c.f)
                    .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                    .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
            let ly = MARGIN + 10.0 + 18.0 * k as f64;
            let lx = WIDTH - MARGIN - LEGEND + 16.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
                lx + 20.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}">&#945;={}, M={}</text>"#,
                lx + 26.0,
                ly + 4.0,
                c.alpha,
                c.paths
            );
        }
        s.push_str("</svg>\n");
        s
    }

    /// Writes `paths.csv` and `paths.svg` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
        let csv = dir.join("paths.csv");
        let svg = dir.join("paths.svg");
        write_file(&csv, &self.to_csv())?;
        write_file(&svg, &self.to_svg())?;
        Ok((csv, svg))
    }
}
