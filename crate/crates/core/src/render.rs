//! Deterministic SVG plots and a PGM heatmap.
//!
//! Coordinates are printed with six decimals, so identical inputs give
//! identical bytes.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::Permutation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderKind {
    Heatmap,
    Spectrum,
    Columns,
    Power,
}

impl FromStr for RenderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heatmap" => Ok(RenderKind::Heatmap),
            "spectrum" => Ok(RenderKind::Spectrum),
            "columns" => Ok(RenderKind::Columns),
            "power" => Ok(RenderKind::Power),
            other => Err(Error::Parameter(format!(
                "unknown render kind {other:?} (heatmap, spectrum, columns, power)"
            ))),
        }
    }
}

/// Heatmap gray scale: `Auto` maps 0 to white and each column's maximum to black.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ColorScale {
    #[default]
    Auto,
    Range { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RenderSpec {
    pub scale: ColorScale,
    pub permutation: Option<Permutation>,
    /// Dashed squares drawn over the heatmap as `(first position, length)`.
    pub blocks: Vec<(usize, usize)>,
}

fn f(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn header(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = f(width),
        h = f(height)
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#, f(width), f(height));
}

fn permuted_matrix(m: &DMatrix<f64>, spec: &RenderSpec) -> Result<DMatrix<f64>> {
    if m.is_empty() {
        return Err(Error::Shape("cannot render an empty matrix".into()));
    }
    match &spec.permutation {
        Some(p) if m.is_square() => {
            check(p, m.nrows())?;
            Ok(p.permute_matrix(m))
        }
        Some(p) => {
            check(p, m.nrows())?;
            Ok(p.permute_rows(m))
        }
        None => Ok(m.clone()),
    }
}

fn check(p: &Permutation, n: usize) -> Result<()> {
    if p.len() != n {
        return Err(Error::Shape(format!("permutation of length {} for {n} rows", p.len())));
    }
    Ok(())
}

/// Gray level in 0..=255 (255 white).
fn gray_levels(m: &DMatrix<f64>, scale: ColorScale) -> DMatrix<u8> {
    let col_max: Vec<f64> = m.column_iter().map(|c| c.iter().fold(0.0f64, |a, &b| a.max(b))).collect();
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        let t = match scale {
            ColorScale::Auto => {
                if col_max[j] > 0.0 {
                    m[(i, j)] / col_max[j]
                } else {
                    0.0
                }
            }
            ColorScale::Range { min, max } => {
                if max > min {
                    (m[(i, j)] - min) / (max - min)
                } else {
                    0.0
                }
            }
        };
        (255.0 * (1.0 - t.clamp(0.0, 1.0))).round() as u8
    })
}

pub fn heatmap_svg(m: &DMatrix<f64>, spec: &RenderSpec) -> Result<String> {
    let m = permuted_matrix(m, spec)?;
    let gray = gray_levels(&m, spec.scale);
    let cell = (600.0 / m.nrows().max(m.ncols()) as f64).clamp(2.0, 40.0);
    let mut out = String::new();
    header(&mut out, cell * m.ncols() as f64, cell * m.nrows() as f64);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let g = gray[(i, j)];
            if g == 255 {
                continue;
            }
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{c}" height="{c}" fill="rgb({g},{g},{g})"/>"#,
                f(cell * j as f64),
                f(cell * i as f64),
                c = f(cell)
            );
        }
    }
    for &(start, len) in &spec.blocks {
        let _ = writeln!(
            out,
            r#"<rect x="{p}" y="{p}" width="{s}" height="{s}" fill="none" stroke="red" stroke-width="1.5" stroke-dasharray="4,3"/>"#,
            p = f(cell * start as f64),
            s = f(cell * len as f64)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Binary PGM (P5), one pixel per entry.
pub fn heatmap_pgm(m: &DMatrix<f64>, spec: &RenderSpec) -> Result<Vec<u8>> {
    let m = permuted_matrix(m, spec)?;
    let gray = gray_levels(&m, spec.scale);
    let mut out = format!("P5\n{} {}\n255\n", m.ncols(), m.nrows()).into_bytes();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(gray[(i, j)]);
        }
    }
    Ok(out)
}

const PLOT: f64 = 400.0;
const MARGIN: f64 = 30.0;

/// Eigenvalues in the complex plane with the unit circle.
pub fn spectrum_svg(eigs: &[Complex64]) -> Result<String> {
    if eigs.is_empty() {
        return Err(Error::Shape("cannot render an empty spectrum".into()));
    }
    let size = PLOT + 2.0 * MARGIN;
    let scale = PLOT / 2.2;
    let c = size / 2.0;
    let mut out = String::new();
    header(&mut out, size, size);
    let _ = writeln!(
        out,
        r#"<line x1="{}" y1="{c}" x2="{}" y2="{c}" stroke="gray" stroke-width="0.5"/>"#,
        f(MARGIN),
        f(size - MARGIN),
        c = f(c)
    );
    let _ = writeln!(
        out,
        r#"<line x1="{c}" y1="{}" x2="{c}" y2="{}" stroke="gray" stroke-width="0.5"/>"#,
        f(MARGIN),
        f(size - MARGIN),
        c = f(c)
    );
    let _ = writeln!(
        out,
        r#"<circle cx="{c}" cy="{c}" r="{}" fill="none" stroke="black" stroke-width="1"/>"#,
        f(scale),
        c = f(c)
    );
    for z in eigs {
        let _ = writeln!(
            out,
            r#"<circle cx="{}" cy="{}" r="3" fill="black"/>"#,
            f(c + scale * z.re),
            f(c - scale * z.im)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn value_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (lo, hi) = (lo.min(0.0), hi.max(0.0));
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

/// One polyline per column over (optionally permuted) person index.
pub fn columns_svg(m: &DMatrix<f64>, spec: &RenderSpec) -> Result<String> {
    if m.is_empty() {
        return Err(Error::Shape("cannot render an empty matrix".into()));
    }
    let m = match &spec.permutation {
        Some(p) => {
            check(p, m.nrows())?;
            p.permute_rows(m)
        }
        None => m.clone(),
    };
    let (lo, hi) = value_range(m.iter().copied());
    let width = 2.0 * PLOT;
    let (w, h) = (width + 2.0 * MARGIN, PLOT + 2.0 * MARGIN);
    let x = |i: usize| MARGIN + width * (i as f64 + 0.5) / m.nrows() as f64;
    let y = |v: f64| MARGIN + PLOT * (hi - v) / (hi - lo);
    let mut out = String::new();
    header(&mut out, w, h);
    let _ = writeln!(
        out,
        r#"<line x1="{}" y1="{y0}" x2="{}" y2="{y0}" stroke="gray" stroke-width="0.5"/>"#,
        f(MARGIN),
        f(w - MARGIN),
        y0 = f(y(0.0))
    );
    for (k, col) in m.column_iter().enumerate() {
        let points: Vec<String> = col.iter().enumerate().map(|(i, &v)| format!("{},{}", f(x(i)), f(y(v)))).collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            points.join(" "),
            PALETTE[k % PALETTE.len()]
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Bars of a per-person quantity (power, or any vector).
pub fn power_svg(values: &DVector<f64>, spec: &RenderSpec) -> Result<String> {
    if values.is_empty() {
        return Err(Error::Shape("cannot render an empty vector".into()));
    }
    let values = match &spec.permutation {
        Some(p) => {
            check(p, values.len())?;
            p.permute_vector(values)
        }
        None => values.clone(),
    };
    let (lo, hi) = value_range(values.iter().copied());
    let width = 2.0 * PLOT;
    let (w, h) = (width + 2.0 * MARGIN, PLOT + 2.0 * MARGIN);
    let bar = width / values.len() as f64;
    let y = |v: f64| MARGIN + PLOT * (hi - v) / (hi - lo);
    let mut out = String::new();
    header(&mut out, w, h);
    for (i, &v) in values.iter().enumerate() {
        let (top, bottom) = (y(v.max(0.0)), y(v.min(0.0)));
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="black"/>"#,
            f(MARGIN + bar * i as f64 + 0.1 * bar),
            f(top),
            f(0.8 * bar),
            f(bottom - top)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_is_black() {
        let svg = heatmap_svg(&DMatrix::from_element(1, 1, 1.0), &RenderSpec::default()).unwrap();
        assert!(svg.contains(r#"fill="rgb(0,0,0)""#));
        assert_eq!(svg.matches("<rect").count(), 2);
        let pgm = heatmap_pgm(&DMatrix::from_element(1, 1, 1.0), &RenderSpec::default()).unwrap();
        assert_eq!(pgm, b"P5\n1 1\n255\n\x00");
    }

    #[test]
    fn zero_is_white_and_scale_is_per_column() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.5, 1.0]);
        let g = gray_levels(&m, ColorScale::Auto);
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[255, 0, 0, 128]));
        let g = gray_levels(&m, ColorScale::Range { min: 0.0, max: 4.0 });
        assert_eq!(g[(0, 1)], 128);
    }

    #[test]
    fn empty_inputs_fail() {
        assert!(heatmap_svg(&DMatrix::zeros(0, 0), &RenderSpec::default()).is_err());
        assert!(spectrum_svg(&[]).is_err());
    }

    #[test]
    fn spectrum_points() {
        let svg = spectrum_svg(&[Complex64::new(1.0, 0.0), Complex64::new(0.8, 0.0)]).unwrap();
        let scale = PLOT / 2.2;
        let c = (PLOT + 2.0 * MARGIN) / 2.0;
        assert!(svg.contains(&format!(r#"cx="{}" cy="{}""#, f(c + scale), f(c))));
        assert!(svg.contains(&format!(r#"cx="{}" cy="{}""#, f(c + 0.8 * scale), f(c))));
    }

    #[test]
    fn kinds_parse() {
        assert_eq!("power".parse::<RenderKind>().unwrap(), RenderKind::Power);
        assert!("pie".parse::<RenderKind>().is_err());
    }
}
