//! Matrix CSV files, society directories and JSON artifacts.
//!
//! Matrices are written one row per line, comma separated, no header, with
//! Rust's shortest round-trip float formatting. Every JSON artifact carries
//! `schema_version`; person and family indices in files are 1-based.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::Planted;
use crate::model::{FamilyStructure, GroundTruth, Permutation, PoliticsMatrix, Society};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "society.json";

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Parses CSV text; `origin` only labels errors.
pub fn parse_matrix_csv(text: &str, origin: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let parse_err = |line: u64, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(rows as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(parse_err(line, format!("expected {c} columns, found {}", record.len())));
            }
            _ => {}
        }
        for (k, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, format!("column {}: not a number: {cell:?}", k + 1)))?;
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| parse_err(1, "empty matrix file".into()))?;
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_text(path, &matrix_to_csv(m))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_csv(&text, path)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

/// Rows of a matrix as nested vectors, for JSON.
pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Shape("ragged nested matrix".into()));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), cols, &flat))
}

fn check_schema(path: &Path, version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("unsupported schema_version {version}, expected {SCHEMA_VERSION}"),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocietyFiles {
    pub a: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_hat: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_star: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocietyManifest {
    pub schema_version: u32,
    pub n: usize,
    pub q: Option<usize>,
    /// Family sizes in planted (normal form) order.
    pub family_sizes: Option<Vec<usize>>,
    pub low_class_count: Option<usize>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub gamma_min: Option<f64>,
    pub low_alpha: Option<f64>,
    pub coupling_alpha: Option<f64>,
    pub min_cyber_gap: Option<f64>,
    pub coupling_draws: Option<usize>,
    /// `permutation[k]` is the normal-form index (1-based) of stored person `k+1`.
    pub permutation: Vec<usize>,
    /// 1-based family per stored person, 0 for the low class.
    pub family_labels: Option<Vec<usize>>,
    pub files: SocietyFiles,
    pub generator: String,
}

fn generator_tag() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

/// Writes `A.csv`, the ground-truth matrices when present, and the manifest.
pub fn write_society(dir: &Path, society: &Society, planted: Option<&Planted>) -> Result<SocietyManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_matrix(&dir.join("A.csv"), society.a.matrix())?;
    let mut files = SocietyFiles {
        a: "A.csv".into(),
        a_hat: None,
        b: None,
        j: None,
        w_star: None,
    };
    let gt = society.ground_truth.as_ref();
    if let Some(gt) = gt {
        write_matrix(&dir.join("a_hat.csv"), gt.a_hat.matrix())?;
        write_matrix(&dir.join("b.csv"), &gt.b)?;
        write_matrix(&dir.join("j.csv"), &gt.j)?;
        write_matrix(&dir.join("w_star.csv"), &gt.w_star)?;
        files.a_hat = Some("a_hat.csv".into());
        files.b = Some("b.csv".into());
        files.j = Some("j.csv".into());
        files.w_star = Some("w_star.csv".into());
    }
    let params = planted.map(|p| &p.params);
    let manifest = SocietyManifest {
        schema_version: SCHEMA_VERSION,
        n: society.n(),
        q: gt.map(GroundTruth::q),
        family_sizes: params.map(|p| p.family_sizes.clone()),
        low_class_count: params.map(|p| p.low_class_count),
        epsilon: society.epsilon,
        seed: params.map(|p| p.seed),
        gamma_min: params.map(|p| p.gamma_min),
        low_alpha: params.map(|p| p.low_alpha),
        coupling_alpha: params.map(|p| p.coupling_alpha),
        min_cyber_gap: params.map(|p| p.min_cyber_gap),
        coupling_draws: planted.map(|p| p.coupling_draws),
        permutation: society.permutation.to_one_based(),
        family_labels: gt.map(|g| g.structure.labels()),
        files,
        generator: generator_tag(),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<SocietyManifest> {
    let path = dir.join(MANIFEST_FILE);
    let manifest: SocietyManifest = read_json(&path)?;
    check_schema(&path, manifest.schema_version)?;
    Ok(manifest)
}

/// Loads a society directory, rebuilding the ground truth from `Â` and the
/// stored family labels and checking it against the stored `J` and `W*`.
pub fn read_society(dir: &Path) -> Result<(Society, SocietyManifest)> {
    let manifest = read_manifest(dir)?;
    let file = |name: &str| -> PathBuf { dir.join(name) };
    let a = read_matrix(&file(&manifest.files.a))?;
    if a.nrows() != manifest.n || a.ncols() != manifest.n {
        return Err(Error::Shape(format!(
            "{} is {}x{}, manifest says n = {}",
            manifest.files.a,
            a.nrows(),
            a.ncols(),
            manifest.n
        )));
    }
    let a = PoliticsMatrix::new(a, false)?;
    let permutation = Permutation::from_one_based(&manifest.permutation)?;
    if permutation.len() != manifest.n {
        return Err(Error::Shape("manifest permutation length differs from n".into()));
    }

    let ground_truth = match (&manifest.files.a_hat, &manifest.family_labels, manifest.q) {
        (Some(a_hat_file), Some(labels), Some(q)) => {
            let a_hat = PoliticsMatrix::new(read_matrix(&file(a_hat_file))?, false)?;
            let structure = FamilyStructure::from_labels(labels, q)?;
            let mut gt = GroundTruth::derive(a_hat, structure)?;
            if let Some(b_file) = &manifest.files.b {
                let b = read_matrix(&file(b_file))?;
                if b.shape() != (manifest.n, manifest.n) {
                    return Err(Error::Shape(format!("{b_file} has the wrong shape")));
                }
                gt.b = b;
            }
            for (name, stored) in [(&manifest.files.j, &gt.j), (&manifest.files.w_star, &gt.w_star)] {
                if let Some(name) = name {
                    let m = read_matrix(&file(name))?;
                    let close = m.shape() == stored.shape()
                        && m.iter().zip(stored.iter()).all(|(x, y)| (x - y).abs() <= 1e-9);
                    if !close {
                        return Err(Error::Validation(format!(
                            "{name} disagrees with the ground truth derived from the stored dominated matrix"
                        )));
                    }
                }
            }
            Some(gt)
        }
        _ => None,
    };
    Ok((
        Society {
            a,
            epsilon: manifest.epsilon,
            permutation,
            ground_truth,
        },
        manifest,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let m = DMatrix::from_row_slice(2, 3, &[0.1, 1.0 / 3.0, -2.5e-17, 1e300, 0.0, 7.0]);
        let back = parse_matrix_csv(&matrix_to_csv(&m), Path::new("m.csv")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn ragged_rows_name_the_line() {
        let err = parse_matrix_csv("0.5,0.5\n1.0\n", Path::new("r.csv")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_cell_names_the_line() {
        let err = parse_matrix_csv("1,0\n0,1\nx,1\n", Path::new("r.csv")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(parse_matrix_csv("", Path::new("e.csv")).is_err());
    }

    #[test]
    fn nested_rows() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(from_rows(&rows(&m)).unwrap(), m);
        assert!(from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
