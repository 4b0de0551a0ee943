use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use crate::error::Result;
use crate::geometry::{DomainKind, GridDomain, NodeKind};
use crate::limit::SweepRow;

/// Writes `contents` to `path` through a temporary file in the same
/// directory and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Pretty JSON with a trailing newline. Floats use the shortest
/// representation that round-trips.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub const SWEEP_HEADER: &str = "p,q,alpha,beta,lambda,lambda_root_p,reference,rel_gap";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        let cells = [
            fmt_f64(r.p),
            fmt_f64(r.q),
            fmt_f64(r.alpha),
            fmt_f64(r.beta),
            fmt_f64(r.lambda),
            fmt_f64(r.lambda_root_p),
            fmt_opt(r.reference),
            fmt_opt(r.rel_gap),
        ];
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Row-major grid: one line per `i` (x index), one column per `j`. Cells
/// where `keep` is false are left empty.
pub fn grid_csv(f: &Array2<f64>, keep: impl Fn(usize, usize) -> bool) -> String {
    let (nx, ny) = f.dim();
    let mut s = String::with_capacity(nx * ny * 24);
    for i in 0..nx {
        for j in 0..ny {
            if j > 0 {
                s.push(',');
            }
            if keep(i, j) {
                let _ = write!(s, "{}", fmt_f64(f[[i, j]]));
            }
        }
        s.push('\n');
    }
    s
}

/// Describes the grid files written next to it.
#[derive(Debug, Clone, Serialize)]
pub struct GridSidecar {
    pub domain: DomainKind,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub x0: f64,
    pub y0: f64,
    pub layout: &'static str,
    /// One string per `i`, one character per `j`: `i` interior, `b`
    /// boundary, `o` outside.
    pub node_kinds: Vec<String>,
    pub files: Vec<String>,
    /// Per-file masks of defined cells, in the `node_kinds` layout with `1`
    /// for defined and `0` otherwise. Absent for plain fields.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub defined: Vec<DefinedMask>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DefinedMask {
    pub file: String,
    pub rows: Vec<String>,
}

impl GridSidecar {
    pub fn new(dom: &GridDomain, files: Vec<String>) -> Self {
        let node_kinds = dom
            .nodes()
            .outer_iter()
            .map(|row| {
                row.iter()
                    .map(|k| match k {
                        NodeKind::Interior => 'i',
                        NodeKind::Boundary => 'b',
                        NodeKind::Outside => 'o',
                    })
                    .collect()
            })
            .collect();
        Self {
            domain: dom.kind(),
            r: dom.r(),
            l: dom.l(),
            nx: dom.nx(),
            ny: dom.ny(),
            hx: dom.hx(),
            hy: dom.hy(),
            x0: dom.x(0),
            y0: dom.y(0),
            layout: "row i holds x_i; column j holds y_j",
            node_kinds,
            files,
            defined: Vec::new(),
        }
    }

    pub fn with_mask(mut self, file: &str, mask: &Array2<bool>) -> Self {
        let rows = mask
            .outer_iter()
            .map(|row| row.iter().map(|&d| if d { '1' } else { '0' }).collect())
            .collect();
        self.defined.push(DefinedMask {
            file: file.to_string(),
            rows,
        });
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 2f64.sqrt(), 1e-300, 6.02214076e23] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn empty_optional_cells() {
        let row = SweepRow {
            p: 4.0,
            q: 4.0,
            alpha: 2.0,
            beta: 2.0,
            lambda: 1.0,
            lambda_root_p: 1.0,
            reference: None,
            rel_gap: None,
            iterations: 1,
            converged: true,
            warm_started: false,
        };
        let csv = sweep_csv(&[row]);
        assert!(csv.lines().nth(1).unwrap().ends_with(",,"));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
