//! Full-order second-order structural models.
//!
//! A [`SecondOrderModel`] holds the symmetric stiffness, mass and damping
//! matrices of a semi-discrete model `M q̈ + D q̇ + K q = f(t)` together with
//! the ordered list of boundary degrees of freedom that will later carry the
//! contact constraints. Models come from the built-in structured meshers
//! ([`MeshSpec`]) or from imported matrices.

mod bar;
mod hex;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Build specification for the structured meshers.
#[derive(Clone, Debug, PartialEq)]
pub enum MeshSpec {
    /// Uniform 1D bar with linear shape functions, unit cross-section area.
    Bar1d {
        n_elems: usize,
        /// Bar length (m).
        length: f64,
        /// Density (kg/m³).
        density: f64,
        /// Young's modulus (Pa).
        youngs_modulus: f64,
    },
    /// Structured grid of trilinear 8-node hexahedra.
    Hex8 {
        /// Element counts per direction (x, y, z).
        n: [usize; 3],
        /// Physical dimensions per direction (m).
        dims: [f64; 3],
        /// Density (kg/m³).
        density: f64,
        /// Young's modulus (Pa).
        youngs_modulus: f64,
        /// Poisson ratio.
        poisson: f64,
    },
}

impl MeshSpec {
    /// Assemble the full-order model for this mesh.
    pub fn assemble(&self) -> Result<SecondOrderModel> {
        match *self {
            MeshSpec::Bar1d {
                n_elems,
                length,
                density,
                youngs_modulus,
            } => bar::assemble_bar1d(n_elems, length, density, youngs_modulus),
            MeshSpec::Hex8 {
                n,
                dims,
                density,
                youngs_modulus,
                poisson,
            } => hex::assemble_hex8(n, dims, density, youngs_modulus, poisson),
        }
    }
}

/// One additive term of a time-dependent load.
#[derive(Clone, Debug, PartialEq)]
pub enum LoadTerm {
    /// Constant force vector.
    Constant(DVector<f64>),
    /// `amplitude · cos(omega t + phase)`.
    Harmonic {
        amplitude: DVector<f64>,
        omega: f64,
        phase: f64,
    },
    /// Harmonic force with linearly ramped instantaneous frequency
    /// `Ω(t) = omega_start + omega_rate · t`, i.e.
    /// `amplitude · cos(omega_start t + ½ omega_rate t²)`.
    SweptHarmonic {
        amplitude: DVector<f64>,
        omega_start: f64,
        omega_rate: f64,
    },
}

impl LoadTerm {
    fn dim(&self) -> usize {
        match self {
            LoadTerm::Constant(a) => a.len(),
            LoadTerm::Harmonic { amplitude, .. } => amplitude.len(),
            LoadTerm::SweptHarmonic { amplitude, .. } => amplitude.len(),
        }
    }

    fn add_into(&self, t: f64, out: &mut DVector<f64>) {
        match self {
            LoadTerm::Constant(a) => *out += a,
            LoadTerm::Harmonic {
                amplitude,
                omega,
                phase,
            } => {
                out.axpy((omega * t + phase).cos(), amplitude, 1.0);
            }
            LoadTerm::SweptHarmonic {
                amplitude,
                omega_start,
                omega_rate,
            } => {
                let phase = omega_start * t + 0.5 * omega_rate * t * t;
                out.axpy(phase.cos(), amplitude, 1.0);
            }
        }
    }
}

/// Sum of load terms; evaluates the external force vector `f(t)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadSet {
    pub terms: Vec<LoadTerm>,
}

impl LoadSet {
    pub fn none() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(f: DVector<f64>) -> Self {
        Self {
            terms: vec![LoadTerm::Constant(f)],
        }
    }

    pub fn push(&mut self, term: LoadTerm) {
        self.terms.push(term);
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Evaluate `f(t)` into a vector of dimension `n`.
    pub fn eval(&self, t: f64, n: usize) -> DVector<f64> {
        let mut out = DVector::zeros(n);
        for term in &self.terms {
            debug_assert_eq!(term.dim(), n, "load term dimension mismatch");
            term.add_into(t, &mut out);
        }
        out
    }

    /// Project every term amplitude onto a reduced basis: `f̃ = Rᵀ f`.
    pub fn reduced(&self, r: &DMatrix<f64>) -> LoadSet {
        let rt = r.transpose();
        let terms = self
            .terms
            .iter()
            .map(|term| match term {
                LoadTerm::Constant(a) => LoadTerm::Constant(&rt * a),
                LoadTerm::Harmonic {
                    amplitude,
                    omega,
                    phase,
                } => LoadTerm::Harmonic {
                    amplitude: &rt * amplitude,
                    omega: *omega,
                    phase: *phase,
                },
                LoadTerm::SweptHarmonic {
                    amplitude,
                    omega_start,
                    omega_rate,
                } => LoadTerm::SweptHarmonic {
                    amplitude: &rt * amplitude,
                    omega_start: *omega_start,
                    omega_rate: *omega_rate,
                },
            })
            .collect();
        LoadSet { terms }
    }

    /// Apply a congruence transform `f ← Qᵀ f` to every amplitude.
    pub fn transformed(&self, q: &DMatrix<f64>) -> LoadSet {
        self.reduced(q)
    }
}

/// Full-order second-order structural model with a designated contact
/// boundary.
#[derive(Clone, Debug)]
pub struct SecondOrderModel {
    /// Symmetric positive semi-definite stiffness matrix (N/m).
    pub k: DMatrix<f64>,
    /// Symmetric positive definite mass matrix (kg).
    pub m: DMatrix<f64>,
    /// Symmetric positive semi-definite damping matrix (N·s/m).
    pub d: DMatrix<f64>,
    /// Ordered indices of the boundary degrees of freedom.
    pub boundary_dofs: Vec<usize>,
    /// Node positions (m); empty for imported models.
    pub node_coords: Vec<[f64; 3]>,
    /// Per-DOF map `(node, axis)`; empty for imported models.
    pub dof_map: Vec<(usize, usize)>,
    /// External load.
    pub load: LoadSet,
}

impl SecondOrderModel {
    /// Wrap raw matrices; validates dimensions and boundary indices.
    pub fn new(
        k: DMatrix<f64>,
        m: DMatrix<f64>,
        d: DMatrix<f64>,
        boundary_dofs: Vec<usize>,
    ) -> Result<Self> {
        let n = k.nrows();
        if k.ncols() != n || m.nrows() != n || m.ncols() != n || d.nrows() != n || d.ncols() != n {
            return Err(Error::Dimension(
                "K, M, D must be square with matching dimensions".into(),
            ));
        }
        let mut seen = vec![false; n];
        for &b in &boundary_dofs {
            if b >= n {
                return Err(Error::InvalidSpec(format!(
                    "boundary dof {b} out of range (n_dofs = {n})"
                )));
            }
            if seen[b] {
                return Err(Error::InvalidSpec(format!("duplicate boundary dof {b}")));
            }
            seen[b] = true;
        }
        Ok(Self {
            k,
            m,
            d,
            boundary_dofs,
            node_coords: Vec::new(),
            dof_map: Vec::new(),
            load: LoadSet::none(),
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.k.nrows()
    }

    /// DOF indices that are not boundary, in ascending order.
    pub fn inner_dofs(&self) -> Vec<usize> {
        let mut is_b = vec![false; self.n_dofs()];
        for &b in &self.boundary_dofs {
            is_b[b] = true;
        }
        (0..self.n_dofs()).filter(|&i| !is_b[i]).collect()
    }

    /// Select DOFs by a predicate on `(node position, axis)`.
    ///
    /// Requires the model to carry mesh information.
    pub fn dofs_where(&self, pred: impl Fn(&[f64; 3], usize) -> bool) -> Vec<usize> {
        self.dof_map
            .iter()
            .enumerate()
            .filter(|(_, &(node, axis))| pred(&self.node_coords[node], axis))
            .map(|(dof, _)| dof)
            .collect()
    }

    /// Remove the given DOFs (homogeneous Dirichlet constraint).
    pub fn clamp_dofs(&self, clamped: &[usize]) -> Result<Self> {
        let n = self.n_dofs();
        let mut drop = vec![false; n];
        for &c in clamped {
            if c >= n {
                return Err(Error::InvalidSpec(format!("clamped dof {c} out of range")));
            }
            drop[c] = true;
        }
        let keep: Vec<usize> = (0..n).filter(|&i| !drop[i]).collect();
        let mut new_index = vec![usize::MAX; n];
        for (new, &old) in keep.iter().enumerate() {
            new_index[old] = new;
        }
        for &b in &self.boundary_dofs {
            if drop[b] {
                return Err(Error::InvalidSpec(format!(
                    "boundary dof {b} cannot be clamped"
                )));
            }
        }
        let slice = |v: &DVector<f64>| linalg::subvector(v, &keep);
        let terms = self
            .load
            .terms
            .iter()
            .map(|term| match term {
                LoadTerm::Constant(a) => LoadTerm::Constant(slice(a)),
                LoadTerm::Harmonic {
                    amplitude,
                    omega,
                    phase,
                } => LoadTerm::Harmonic {
                    amplitude: slice(amplitude),
                    omega: *omega,
                    phase: *phase,
                },
                LoadTerm::SweptHarmonic {
                    amplitude,
                    omega_start,
                    omega_rate,
                } => LoadTerm::SweptHarmonic {
                    amplitude: slice(amplitude),
                    omega_start: *omega_start,
                    omega_rate: *omega_rate,
                },
            })
            .collect();
        Ok(Self {
            k: linalg::submatrix(&self.k, &keep, &keep),
            m: linalg::submatrix(&self.m, &keep, &keep),
            d: linalg::submatrix(&self.d, &keep, &keep),
            boundary_dofs: self.boundary_dofs.iter().map(|&b| new_index[b]).collect(),
            node_coords: self.node_coords.clone(),
            dof_map: keep.iter().map(|&i| self.dof_map[i]).collect(),
            load: LoadSet { terms },
        })
    }

    /// Unit-translation vector in the given axis (1.0 on matching DOFs).
    pub fn translation_vector(&self, axis: usize) -> DVector<f64> {
        let n = self.n_dofs();
        if self.dof_map.is_empty() {
            // Imported 1D convention: every dof translates.
            DVector::from_element(n, 1.0)
        } else {
            DVector::from_fn(n, |i, _| if self.dof_map[i].1 == axis { 1.0 } else { 0.0 })
        }
    }

    /// Total translating mass in the given axis, `𝟙ᵀ M 𝟙`.
    pub fn total_mass(&self, axis: usize) -> f64 {
        let ones = self.translation_vector(axis);
        (&self.m * &ones).dot(&ones)
    }

    /// Consistent gravity load `f = −a_g · M · 𝟙_axis` for an imposed
    /// acceleration `a_g ≥ 0` acting against the axis direction.
    pub fn gravity_load(&self, a_g: f64, axis: usize) -> Result<DVector<f64>> {
        if a_g < 0.0 {
            return Err(Error::InvalidSpec("gravity acceleration must be >= 0".into()));
        }
        Ok(-(&self.m * self.translation_vector(axis)) * a_g)
    }

    /// Static solve `K q = f` (requires grounded, SPD stiffness).
    pub fn static_solve(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        let b = DMatrix::from_column_slice(f.len(), 1, f.as_slice());
        let x = linalg::solve_spd_refined(&self.k, &b, "stiffness matrix")?;
        Ok(x.column(0).into_owned())
    }

    /// Check the structural invariants: exact symmetry, `M` positive
    /// definite, `K` and `D` positive semi-definite within `tol·‖·‖`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        for (name, mat) in [("K", &self.k), ("M", &self.m), ("D", &self.d)] {
            let asym = linalg::asymmetry(mat);
            if asym > tol {
                return Err(Error::InvalidSpec(format!(
                    "{name} is not symmetric (relative asymmetry {asym:.3e})"
                )));
            }
        }
        let (m_eigs, _) = linalg::sym_eig(&self.m);
        if m_eigs[0] <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "M is not positive definite (smallest eigenvalue {:.6e})",
                m_eigs[0]
            )));
        }
        for (name, mat) in [("K", &self.k), ("D", &self.d)] {
            let (eigs, _) = linalg::sym_eig(mat);
            let floor = -tol * mat.norm();
            if eigs[0] < floor {
                return Err(Error::InvalidSpec(format!(
                    "{name} is not positive semi-definite (smallest eigenvalue {:.6e})",
                    eigs[0]
                )));
            }
        }
        Ok(())
    }
}

/// Modal damping matrix `D = Σ 2 ζ_k ω_k (M φ_k)(M φ_k)ᵀ` over the listed
/// `(mode index, ζ)` pairs of the generalized problem `(K, M)`.
///
/// Mode indices refer to the ascending-frequency order; near-rigid modes
/// (ω²  below `1e-8 · ω_max²`) are skipped so rigid motion stays undamped.
pub fn modal_damping_matrix(
    k: &DMatrix<f64>,
    m: &DMatrix<f64>,
    ratios: &[(usize, f64)],
) -> Result<DMatrix<f64>> {
    for &(_, zeta) in ratios {
        if zeta < 0.0 {
            return Err(Error::InvalidSpec("damping ratio must be >= 0".into()));
        }
    }
    let n = k.nrows();
    let (vals, phi) = linalg::generalized_sym_eig(k, m, "modal damping")?;
    let w2_max = vals[n - 1].max(0.0);
    let mut d = DMatrix::zeros(n, n);
    for &(idx, zeta) in ratios {
        if idx >= n {
            return Err(Error::InvalidSpec(format!(
                "mode index {idx} out of range (n = {n})"
            )));
        }
        let w2 = vals[idx];
        if w2 <= 1e-8 * w2_max {
            continue; // rigid mode
        }
        let omega = w2.sqrt();
        let mphi = m * phi.column(idx);
        d.ger(2.0 * zeta * omega, &mphi, &mphi, 1.0);
    }
    linalg::symmetrize(&mut d);
    Ok(d)
}

/// Convenience: a uniform ratio `ζ` on the first `n_modes` elastic modes.
pub fn uniform_modal_damping(
    k: &DMatrix<f64>,
    m: &DMatrix<f64>,
    zeta: f64,
    n_modes: usize,
) -> Result<DMatrix<f64>> {
    let ratios: Vec<(usize, f64)> = (0..n_modes.min(k.nrows())).map(|i| (i, zeta)).collect();
    modal_damping_matrix(k, m, &ratios)
}
