use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const COORDS_FILE: &str = "coords.csv";
pub const SVG_FILE: &str = "scatter.svg";

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const PLOT_LEFT: f64 = 50.0;
const PLOT_TOP: f64 = 40.0;
const PLOT_RIGHT: f64 = 610.0;
const PLOT_BOTTOM: f64 = 560.0;
const LEGEND_X: f64 = 630.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];
const FALLBACK_COLOR: &str = "#444444";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Store,
    Test,
}

impl Split {
    fn as_str(self) -> &'static str {
        match self {
            Split::Store => "store",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub category: String,
    pub split: Split,
}

fn color(categories: &[String], category: &str) -> &'static str {
    categories
        .iter()
        .position(|c| c == category)
        .map(|i| PALETTE[i % PALETTE.len()])
        .unwrap_or(FALLBACK_COLOR)
}

fn marker(out: &mut String, split: Split, x: f64, y: f64, fill: &str) {
    match split {
        Split::Store => {
            let _ = writeln!(
                out,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{fill}" fill-opacity="0.75"/>"#
            );
        }
        Split::Test => {
            let _ = writeln!(
                out,
                r#"<path d="M{:.2} {:.2} L{:.2} {:.2} L{:.2} {:.2} Z" fill="{fill}" fill-opacity="0.75" stroke="black" stroke-width="0.4"/>"#,
                x,
                y - 4.5,
                x - 4.0,
                y + 3.0,
                x + 4.0,
                y + 3.0
            );
        }
    }
}

/// 800x600 scatter with a legend. Colours follow `categories` order;
/// store points are circles, test points triangles.
pub fn scatter_svg(points: &[ScatterPoint], categories: &[String]) -> String {
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for p in points {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
    }
    let span = |lo: f64, hi: f64| if hi - lo > 1e-12 { hi - lo } else { 1.0 };
    let (sx, sy) = (span(x0, x1), span(y0, y1));
    let px = |x: f64| PLOT_LEFT + (x - x0) / sx * (PLOT_RIGHT - PLOT_LEFT);
    let py = |y: f64| PLOT_BOTTOM - (y - y0) / sy * (PLOT_BOTTOM - PLOT_TOP);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r##"<rect x="{PLOT_LEFT}" y="{PLOT_TOP}" width="{}" height="{}" fill="none" stroke="#999999"/>"##,
        PLOT_RIGHT - PLOT_LEFT,
        PLOT_BOTTOM - PLOT_TOP
    );
    let _ = writeln!(
        out,
        r#"<text x="{PLOT_LEFT}" y="25" font-size="14">Embedding PCA projection</text>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="590" text-anchor="middle">PC1</text>"#,
        (PLOT_LEFT + PLOT_RIGHT) / 2.0
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">PC2</text>"#,
        (PLOT_TOP + PLOT_BOTTOM) / 2.0
    );
    for p in points {
        marker(
            &mut out,
            p.split,
            px(p.x),
            py(p.y),
            color(categories, &p.category),
        );
    }

    let mut y = PLOT_TOP + 10.0;
    for c in categories {
        let _ = writeln!(
            out,
            r#"<rect x="{LEGEND_X}" y="{:.2}" width="12" height="12" fill="{}"/>"#,
            y - 10.0,
            color(categories, c)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{y:.2}">{}</text>"#,
            LEGEND_X + 18.0,
            escape(c)
        );
        y += 20.0;
    }
    y += 10.0;
    for split in [Split::Store, Split::Test] {
        marker(&mut out, split, LEGEND_X + 6.0, y - 4.0, FALLBACK_COLOR);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{y:.2}">{}</text>"#,
            LEGEND_X + 18.0,
            split.as_str()
        );
        y += 20.0;
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Write `coords.csv` (`id,x,y,category,split`) and `scatter.svg`.
pub fn scatter_emit(points: &[ScatterPoint], categories: &[String], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["id", "x", "y", "category", "split"])
        .map_err(csv_err)?;
    for p in points {
        w.write_record([
            p.id.clone(),
            p.x.to_string(),
            p.y.to_string(),
            p.category.clone(),
            p.split.as_str().to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    fs::write(dir.join(COORDS_FILE), bytes)?;
    fs::write(dir.join(SVG_FILE), scatter_svg(points, categories))?;
    Ok(())
}
