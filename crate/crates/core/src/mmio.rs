//! Matrix Market import/export.
//!
//! Symmetric coordinate files for the structural matrices (lower triangle
//! stored), dense array files for reduced-model exports, and a JSON sidecar
//! describing boundary DOFs and loads for imported models.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{LoadSet, LoadTerm, SecondOrderModel};

/// Asymmetry tolerance for imported general matrices.
const IMPORT_SYM_TOL: f64 = 1e-10;

/// Write a symmetric matrix in coordinate format (lower triangle).
pub fn write_symmetric(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    let mut nnz = 0usize;
    for j in 0..n {
        for i in j..n {
            if m[(i, j)] != 0.0 {
                nnz += 1;
            }
        }
    }
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix coordinate real symmetric\n");
    let _ = writeln!(out, "{n} {n} {nnz}");
    for j in 0..n {
        for i in j..n {
            let v = m[(i, j)];
            if v != 0.0 {
                let _ = writeln!(out, "{} {} {:.17e}", i + 1, j + 1, v);
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write a dense matrix in array format (column major).
pub fn write_array(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let _ = writeln!(out, "{:.17e}", m[(i, j)]);
        }
    }
    fs::write(path, out)?;
    Ok(())
}

struct Header {
    coordinate: bool,
    symmetric: bool,
    general: bool,
}

fn parse_header(line: &str, path: &Path) -> Result<Header> {
    let mut fields = line.split_whitespace();
    if fields.next() != Some("%%MatrixMarket") {
        return Err(Error::Parse(format!(
            "{}: missing %%MatrixMarket header",
            path.display()
        )));
    }
    if fields.next() != Some("matrix") {
        return Err(Error::Parse(format!(
            "{}: only 'matrix' objects are supported",
            path.display()
        )));
    }
    let format = fields.next().unwrap_or("");
    let field = fields.next().unwrap_or("");
    let symmetry = fields.next().unwrap_or("");
    if field != "real" {
        return Err(Error::Parse(format!(
            "{}: only real-valued matrices are supported",
            path.display()
        )));
    }
    Ok(Header {
        coordinate: format == "coordinate",
        symmetric: symmetry == "symmetric",
        general: symmetry == "general",
    })
}

/// Read a matrix from coordinate (sparse) or array (dense) format.
///
/// Symmetric coordinate files are mirrored on read; general files are
/// accepted as-is.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("{}: empty file", path.display())))??;
    let header = parse_header(&header_line, path)?;
    if !header.symmetric && !header.general {
        return Err(Error::Parse(format!(
            "{}: unsupported symmetry qualifier",
            path.display()
        )));
    }

    let mut data_lines = lines.filter_map(|l| match l {
        Ok(s) => {
            let t = s.trim().to_string();
            if t.is_empty() || t.starts_with('%') {
                None
            } else {
                Some(Ok(t))
            }
        }
        Err(e) => Some(Err(e)),
    });

    let size_line = data_lines
        .next()
        .ok_or_else(|| Error::Parse(format!("{}: missing size line", path.display())))??;
    let sizes: Vec<&str> = size_line.split_whitespace().collect();

    if header.coordinate {
        if sizes.len() != 3 {
            return Err(Error::Parse(format!(
                "{}: coordinate size line needs rows cols nnz",
                path.display()
            )));
        }
        let nrows: usize = sizes[0]
            .parse()
            .map_err(|_| Error::Parse(format!("{}: bad row count", path.display())))?;
        let ncols: usize = sizes[1]
            .parse()
            .map_err(|_| Error::Parse(format!("{}: bad column count", path.display())))?;
        let nnz: usize = sizes[2]
            .parse()
            .map_err(|_| Error::Parse(format!("{}: bad nonzero count", path.display())))?;
        let mut m = DMatrix::zeros(nrows, ncols);
        let mut seen = 0usize;
        for line in data_lines {
            let line = line?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Parse(format!(
                    "{}: malformed entry '{line}'",
                    path.display()
                )));
            }
            let i: usize = parts[0]
                .parse()
                .map_err(|_| Error::Parse(format!("{}: bad row index '{line}'", path.display())))?;
            let j: usize = parts[1].parse().map_err(|_| {
                Error::Parse(format!("{}: bad column index '{line}'", path.display()))
            })?;
            let v: f64 = parts[2]
                .parse()
                .map_err(|_| Error::Parse(format!("{}: bad value '{line}'", path.display())))?;
            if i < 1 || i > nrows || j < 1 || j > ncols {
                return Err(Error::Parse(format!(
                    "{}: index out of range in '{line}'",
                    path.display()
                )));
            }
            m[(i - 1, j - 1)] = v;
            if header.symmetric {
                m[(j - 1, i - 1)] = v;
            }
            seen += 1;
        }
        if seen != nnz {
            return Err(Error::Parse(format!(
                "{}: expected {nnz} entries, found {seen}",
                path.display()
            )));
        }
        Ok(m)
    } else {
        if sizes.len() != 2 {
            return Err(Error::Parse(format!(
                "{}: array size line needs rows cols",
                path.display()
            )));
        }
        let nrows: usize = sizes[0]
            .parse()
            .map_err(|_| Error::Parse(format!("{}: bad row count", path.display())))?;
        let ncols: usize = sizes[1]
            .parse()
            .map_err(|_| Error::Parse(format!("{}: bad column count", path.display())))?;
        let mut values = Vec::with_capacity(nrows * ncols);
        for line in data_lines {
            let line = line?;
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| {
                    Error::Parse(format!("{}: bad value '{tok}'", path.display()))
                })?;
                values.push(v);
            }
        }
        if values.len() != nrows * ncols {
            return Err(Error::Parse(format!(
                "{}: expected {} values, found {}",
                path.display(),
                nrows * ncols,
                values.len()
            )));
        }
        Ok(DMatrix::from_column_slice(nrows, ncols, &values))
    }
}

/// Load term description from the sidecar (entries are `[dof, value]`).
#[derive(Clone, Debug)]
pub enum SidecarLoad {
    Constant { entries: Vec<(usize, f64)> },
    Harmonic {
        entries: Vec<(usize, f64)>,
        omega: f64,
        phase: f64,
    },
}

/// Sidecar content: boundary DOFs plus optional loads.
#[derive(Clone, Debug, Default)]
pub struct Sidecar {
    pub boundary_dofs: Vec<usize>,
    pub loads: Vec<SidecarLoad>,
}

impl Sidecar {
    pub fn load_set(&self, n: usize) -> Result<LoadSet> {
        let mut set = LoadSet::none();
        let build = |entries: &[(usize, f64)]| -> Result<DVector<f64>> {
            let mut f = DVector::zeros(n);
            for &(dof, v) in entries {
                if dof >= n {
                    return Err(Error::InvalidSpec(format!(
                        "sidecar load dof {dof} out of range (n = {n})"
                    )));
                }
                f[dof] += v;
            }
            Ok(f)
        };
        for load in &self.loads {
            match load {
                SidecarLoad::Constant { entries } => {
                    set.push(LoadTerm::Constant(build(entries)?));
                }
                SidecarLoad::Harmonic {
                    entries,
                    omega,
                    phase,
                } => set.push(LoadTerm::Harmonic {
                    amplitude: build(entries)?,
                    omega: *omega,
                    phase: *phase,
                }),
            }
        }
        Ok(set)
    }
}

/// Import a model from Matrix Market files and a sidecar description.
///
/// Rejects matrices whose asymmetry exceeds `1e-10` relative and mass
/// matrices that are not positive definite (reporting the smallest
/// eigenvalue).
pub fn import_model(
    k_path: &Path,
    m_path: &Path,
    d_path: Option<&Path>,
    sidecar: &Sidecar,
) -> Result<SecondOrderModel> {
    let k = read_matrix(k_path)?;
    let m = read_matrix(m_path)?;
    let d = match d_path {
        Some(p) => read_matrix(p)?,
        None => DMatrix::zeros(k.nrows(), k.ncols()),
    };
    for (name, mat) in [("K", &k), ("M", &m), ("D", &d)] {
        let asym = linalg::asymmetry(mat);
        if asym > IMPORT_SYM_TOL {
            return Err(Error::InvalidSpec(format!(
                "imported {name} is asymmetric (relative asymmetry {asym:.3e} > {IMPORT_SYM_TOL:.1e})"
            )));
        }
    }
    let (m_eigs, _) = linalg::sym_eig(&m);
    if m_eigs[0] <= 0.0 {
        return Err(Error::InvalidSpec(format!(
            "imported M is not positive definite (smallest eigenvalue {:.6e})",
            m_eigs[0]
        )));
    }
    let (k_eigs, _) = linalg::sym_eig(&k);
    if k_eigs[0] < -1e-10 * k.norm() {
        return Err(Error::InvalidSpec(format!(
            "imported K is not positive semi-definite (smallest eigenvalue {:.6e})",
            k_eigs[0]
        )));
    }
    let mut model = SecondOrderModel::new(k, m, d, sidecar.boundary_dofs.clone())?;
    model.load = sidecar.load_set(model.n_dofs())?;
    Ok(model)
}
