//! Bare-bones line plots: SVG with axes and labels, PNG as a raster of the
//! same curves without text.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use image::{Rgb, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotFormat {
    None,
    Svg,
    Png,
}

pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

pub struct Figure<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series<'a>>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 50.0); // left, right, top, bottom
const COLORS: [(u8, u8, u8); 4] = [(31, 119, 180), (214, 39, 40), (44, 160, 44), (148, 103, 189)];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    log_x: bool,
    log_y: bool,
}

impl Frame {
    fn of(fig: &Figure) -> Option<Frame> {
        let tx = |v: f64| if fig.log_x { v.log10() } else { v };
        let ty = |v: f64| if fig.log_y { v.log10() } else { v };
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &fig.series {
            for (&a, &b) in s.x.iter().zip(s.y) {
                let (a, b) = (tx(a), ty(b));
                if a.is_finite() && b.is_finite() {
                    x = (x.0.min(a), x.1.max(a));
                    y = (y.0.min(b), y.1.max(b));
                }
            }
        }
        if !x.0.is_finite() {
            return None;
        }
        if x.1 == x.0 {
            x = (x.0 - 0.5, x.1 + 0.5);
        }
        if y.1 == y.0 {
            y = (y.0 - 0.5, y.1 + 0.5);
        }
        let pad = 0.05 * (y.1 - y.0);
        Some(Frame {
            x,
            y: (y.0 - pad, y.1 + pad),
            log_x: fig.log_x,
            log_y: fig.log_y,
        })
    }

    fn map(&self, a: f64, b: f64) -> Option<(f64, f64)> {
        let a = if self.log_x { a.log10() } else { a };
        let b = if self.log_y { b.log10() } else { b };
        if !(a.is_finite() && b.is_finite()) {
            return None;
        }
        let (l, r, t, bo) = MARGIN;
        let px = l + (a - self.x.0) / (self.x.1 - self.x.0) * (W - l - r);
        let py = H - bo - (b - self.y.0) / (self.y.1 - self.y.0) * (H - t - bo);
        Some((px, py))
    }
}

fn tick_label(v: f64, log: bool) -> String {
    let v = if log { 10f64.powf(v) } else { v };
    format!("{v:.3e}")
}

pub fn svg(fig: &Figure) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (l, r, t, b) = MARGIN;
    let _ = writeln!(
        s,
        r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - l - r,
        H - t - b
    );
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, esc(fig.title));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 10.0, esc(fig.x_label));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        esc(fig.y_label)
    );
    if let Some(fr) = Frame::of(fig) {
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let xv = fr.x.0 + f * (fr.x.1 - fr.x.0);
            let yv = fr.y.0 + f * (fr.y.1 - fr.y.0);
            let px = l + f * (W - l - r);
            let py = H - b - f * (H - t - b);
            let _ = writeln!(s, r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, H - b + 14.0, tick_label(xv, fr.log_x));
            let _ = writeln!(s, r#"<text x="{:.1}" y="{py:.1}" text-anchor="end">{}</text>"#, l - 4.0, tick_label(yv, fr.log_y));
        }
        for (i, se) in fig.series.iter().enumerate() {
            let (cr, cg, cb) = COLORS[i % COLORS.len()];
            let pts: Vec<String> = se
                .x
                .iter()
                .zip(se.y)
                .filter_map(|(&a, &v)| fr.map(a, v))
                .map(|(px, py)| format!("{px:.2},{py:.2}"))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="rgb({cr},{cg},{cb})" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" fill="rgb({cr},{cg},{cb})">{}</text>"#,
                l + 8.0,
                t + 14.0 * (i as f64 + 1.0),
                esc(se.label)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn png(fig: &Figure) -> RgbImage {
    let mut img = RgbImage::from_pixel(W as u32, H as u32, Rgb([255, 255, 255]));
    let (l, r, t, b) = MARGIN;
    let black = Rgb([0, 0, 0]);
    let corners = [(l, t), (W - r, t), (W - r, H - b), (l, H - b), (l, t)];
    for w in corners.windows(2) {
        line(&mut img, w[0], w[1], black);
    }
    if let Some(fr) = Frame::of(fig) {
        for (i, se) in fig.series.iter().enumerate() {
            let (cr, cg, cb) = COLORS[i % COLORS.len()];
            let pts: Vec<(f64, f64)> = se.x.iter().zip(se.y).filter_map(|(&a, &v)| fr.map(a, v)).collect();
            for w in pts.windows(2) {
                line(&mut img, w[0], w[1], Rgb([cr, cg, cb]));
            }
        }
    }
    img
}

fn line(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), c: Rgb<u8>) {
    let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
    for k in 0..=steps {
        let f = k as f64 / steps as f64;
        let x = (a.0 + f * (b.0 - a.0)).round();
        let y = (a.1 + f * (b.1 - a.1)).round();
        if x >= 0.0 && y >= 0.0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, c);
        }
    }
}

/// Writes `<stem>.svg` or `<stem>.png` under `dir`; no-op for `None`.
pub fn emit(fig: &Figure, format: PlotFormat, dir: &Path, stem: &str) -> Result<()> {
    match format {
        PlotFormat::None => Ok(()),
        PlotFormat::Svg => {
            let p = dir.join(format!("{stem}.svg"));
            std::fs::write(&p, svg(fig)).with_context(|| format!("writing {}", p.display()))
        }
        PlotFormat::Png => {
            let p = dir.join(format!("{stem}.png"));
            png(fig)
                .save(&p)
                .with_context(|| format!("writing {}", p.display()))
        }
    }
}
