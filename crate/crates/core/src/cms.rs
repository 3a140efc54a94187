//! Component mode synthesis.
//!
//! Four reductions of a [`SecondOrderModel`] onto boundary coordinates plus a
//! truncated set of normal modes:
//!
//! * **MacNeal** — free-interface modes plus residual flexibility attachment
//!   modes; yields a singular reduced mass matrix `M̃ = blkdiag(0, I)` with a
//!   massless boundary.
//! * **Rubin** — same component-mode basis, Galerkin mass `M̃ = RᵀMR`
//!   (mass-carrying boundary).
//! * **Craig-Bampton** — static constraint modes plus fixed-interface modes.
//! * **Massless Craig-Bampton** — Craig-Bampton followed by an inertia
//!   decoupling transform and removal of the boundary mass.
//!
//! All four capture the static flexibility with respect to boundary loads
//! exactly. Reduced coordinates are ordered boundary first:
//! `q ≈ R [q_b; η]`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{LoadSet, SecondOrderModel};

/// Residual tolerance for accepting eigen solutions.
const EIG_RESIDUAL_TOL: f64 = 1e-10;

/// Mass-normalized normal modes with ascending natural frequencies.
#[derive(Clone, Debug)]
pub struct ModalBasis {
    /// Mode shapes as columns. For free-interface modes the rows span all
    /// DOFs of the parent model; for fixed-interface modes only the inner
    /// DOFs (ascending index order).
    pub phi: DMatrix<f64>,
    /// Natural angular frequencies (rad/s), ascending.
    pub omegas: Vec<f64>,
}

/// Constraint applied to the eigenproblem of [`solve_modes`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeConstraint {
    /// Free-interface normal modes of the full model.
    Free,
    /// Fixed-interface modes: boundary rows/columns removed first.
    FixedInterface,
}

/// Reduction method selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReductionMethod {
    MacNeal,
    Rubin,
    CraigBampton,
    MasslessCraigBampton,
}

impl ReductionMethod {
    pub fn is_massless(self) -> bool {
        matches!(
            self,
            ReductionMethod::MacNeal | ReductionMethod::MasslessCraigBampton
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ReductionMethod::MacNeal => "macneal",
            ReductionMethod::Rubin => "rubin",
            ReductionMethod::CraigBampton => "craig-bampton",
            ReductionMethod::MasslessCraigBampton => "massless-cb",
        }
    }
}

/// Reduced-order model `M̃ q̈̃ + D̃ q̇̃ + K̃ q̃ = f̃(t)` with boundary-first
/// coordinate ordering `q̃ = [q_b; η]`.
#[derive(Clone, Debug)]
pub struct ReducedModel {
    /// Component-mode matrix mapping reduced to full coordinates, in the
    /// parent model's DOF ordering: `q ≈ R q̃`.
    pub r: DMatrix<f64>,
    /// Reduced mass matrix.
    pub mtil: DMatrix<f64>,
    /// Reduced stiffness matrix.
    pub ktil: DMatrix<f64>,
    /// Reduced damping matrix.
    pub dtil: DMatrix<f64>,
    /// Number of boundary coordinates (leading block).
    pub n_boundary: usize,
    /// True when the boundary carries no inertia (`M̃ = blkdiag(0, I)`).
    pub massless: bool,
    /// Frequencies of the retained normal modes (rad/s).
    pub omegas_inner: Vec<f64>,
    /// Reduced external load `f̃(t) = Rᵀ f(t)`.
    pub load: LoadSet,
}

impl ReducedModel {
    pub fn n_red(&self) -> usize {
        self.ktil.nrows()
    }

    pub fn n_inner(&self) -> usize {
        self.n_red() - self.n_boundary
    }

    pub fn k_bb(&self) -> DMatrix<f64> {
        let b = self.n_boundary;
        self.ktil.view((0, 0), (b, b)).into_owned()
    }

    pub fn k_bi(&self) -> DMatrix<f64> {
        let b = self.n_boundary;
        self.ktil.view((0, b), (b, self.n_inner())).into_owned()
    }

    pub fn k_ii(&self) -> DMatrix<f64> {
        let b = self.n_boundary;
        let i = self.n_inner();
        self.ktil.view((b, b), (i, i)).into_owned()
    }

    pub fn m_ii(&self) -> DMatrix<f64> {
        let b = self.n_boundary;
        let i = self.n_inner();
        self.mtil.view((b, b), (i, i)).into_owned()
    }

    pub fn d_ii(&self) -> DMatrix<f64> {
        let b = self.n_boundary;
        let i = self.n_inner();
        self.dtil.view((b, b), (i, i)).into_owned()
    }

    /// Boundary block of `K̃⁻¹` (the reduced static boundary flexibility).
    pub fn boundary_flexibility(&self) -> Result<DMatrix<f64>> {
        let e = boundary_selector(self.n_red(), self.n_boundary);
        let x = linalg::solve_spd_refined(&self.ktil, &e, "reduced stiffness")?;
        Ok(x.view((0, 0), (self.n_boundary, self.n_boundary)).into_owned())
    }

    /// Natural frequencies of the mass-carrying reduced model, ascending.
    pub fn generalized_frequencies(&self) -> Result<Vec<f64>> {
        if self.massless {
            return Err(Error::InvalidSpec(
                "generalized frequencies of a massless model are not defined; \
                 use free_boundary_frequencies or clamped_boundary_frequencies"
                    .into(),
            ));
        }
        let (vals, _) = linalg::generalized_sym_eig(&self.ktil, &self.mtil, "reduced model")?;
        Ok(vals.iter().map(|&v| v.max(0.0).sqrt()).collect())
    }

    /// Frequencies with the boundary statically condensed out (free
    /// boundary, no contact force). For a massless model this is the
    /// spectrum governing free flight.
    pub fn free_boundary_frequencies(&self) -> Result<Vec<f64>> {
        let kbb = self.k_bb();
        let kbi = self.k_bi();
        let x = linalg::solve_spd_refined(&kbb, &kbi, "reduced boundary stiffness")?;
        let mut keff = self.k_ii() - kbi.transpose() * x;
        linalg::symmetrize(&mut keff);
        let (vals, _) = linalg::generalized_sym_eig(&keff, &self.m_ii(), "condensed model")?;
        Ok(vals.iter().map(|&v| v.max(0.0).sqrt()).collect())
    }

    /// Frequencies with the boundary clamped (`q_b = 0`), ascending.
    pub fn clamped_boundary_frequencies(&self) -> Result<Vec<f64>> {
        let (vals, _) = linalg::generalized_sym_eig(&self.k_ii(), &self.m_ii(), "clamped model")?;
        Ok(vals.iter().map(|&v| v.max(0.0).sqrt()).collect())
    }

    /// Apply a uniform modal damping ratio directly on the retained modal
    /// coordinates of a massless model: `D̃_ii = diag(2 ζ ω_k)`.
    ///
    /// The boundary carries no damping; the massless reductions receive
    /// damping this way because their inner coordinates are the retained
    /// normal-mode coordinates.
    pub fn set_inner_modal_damping(&mut self, zeta: f64) -> Result<()> {
        if zeta < 0.0 {
            return Err(Error::InvalidSpec("damping ratio must be >= 0".into()));
        }
        if !self.massless {
            return Err(Error::InvalidSpec(
                "direct modal damping is for massless models; mass-carrying models \
                 reduce a physical or modal damping matrix through RᵀDR"
                    .into(),
            ));
        }
        let n = self.n_red();
        let b = self.n_boundary;
        let mut d = DMatrix::zeros(n, n);
        for (j, &omega) in self.omegas_inner.iter().enumerate() {
            d[(b + j, b + j)] = 2.0 * zeta * omega;
        }
        self.dtil = d;
        Ok(())
    }

    /// Wrap a full model as a trivial "reduction" (permutation basis putting
    /// the boundary DOFs first). Useful to run the mass-carrying reference
    /// integrator on the unreduced model.
    pub fn from_full(model: &SecondOrderModel) -> Self {
        let n = model.n_dofs();
        let inner = model.inner_dofs();
        let order: Vec<usize> = model.boundary_dofs.iter().copied().chain(inner).collect();
        let mut r = DMatrix::zeros(n, n);
        for (col, &dof) in order.iter().enumerate() {
            r[(dof, col)] = 1.0;
        }
        let mtil = r.transpose() * &model.m * &r;
        let ktil = r.transpose() * &model.k * &r;
        let dtil = r.transpose() * &model.d * &r;
        ReducedModel {
            load: model.load.reduced(&r),
            r,
            mtil,
            ktil,
            dtil,
            n_boundary: model.boundary_dofs.len(),
            massless: false,
            omegas_inner: Vec::new(),
        }
    }
}

fn boundary_selector(n: usize, b: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(n, b);
    for j in 0..b {
        e[(j, j)] = 1.0;
    }
    e
}

/// Solve for the `n_mod` lowest normal modes of the model.
pub fn solve_modes(
    model: &SecondOrderModel,
    n_mod: usize,
    constraint: ModeConstraint,
) -> Result<ModalBasis> {
    let (k, m) = match constraint {
        ModeConstraint::Free => (model.k.clone(), model.m.clone()),
        ModeConstraint::FixedInterface => {
            let inner = model.inner_dofs();
            (
                linalg::submatrix(&model.k, &inner, &inner),
                linalg::submatrix(&model.m, &inner, &inner),
            )
        }
    };
    let n = k.nrows();
    if n_mod > n {
        return Err(Error::InvalidSpec(format!(
            "requested {n_mod} modes but only {n} DOFs are available"
        )));
    }
    let (vals, vecs) = linalg::generalized_sym_eig(&k, &m, "normal modes")?;
    let mut phi = DMatrix::zeros(n, n_mod);
    let mut omegas = Vec::with_capacity(n_mod);
    for j in 0..n_mod {
        let col = vecs.column(j).into_owned();
        let res = linalg::eigpair_residual(&k, &m, vals[j], &col);
        if res > EIG_RESIDUAL_TOL {
            return Err(Error::Numerical(format!(
                "eigen solve residual {res:.3e} exceeds {EIG_RESIDUAL_TOL:.1e} for mode {j}"
            )));
        }
        phi.set_column(j, &col);
        omegas.push(vals[j].max(0.0).sqrt());
    }
    Ok(ModalBasis { phi, omegas })
}

/// Residual flexibility attachment columns for a free-interface basis.
///
/// Returns `(F′_bb, F′_ib)` where `[F′_bb; F′_ib]` are the boundary columns
/// of `K⁻¹` minus the contribution `Φ diag(1/ω_k²) Φ_bᵀ` of the retained
/// modes. Requires an invertible (shifted, if necessary) stiffness matrix.
///
/// Evaluated as `K⁻¹ (E_b − M Φ Φ_bᵀ)`, which is algebraically identical
/// (`K⁻¹ M Φ = Φ diag(1/ω_k²)` for mass-normalized modes) but avoids the
/// subtractive cancellation of the textbook form when the retained modes
/// carry most of the boundary flexibility.
pub fn residual_flexibility(
    model: &SecondOrderModel,
    basis: &ModalBasis,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = model.n_dofs();
    let b_dofs = &model.boundary_dofs;
    let i_dofs = model.inner_dofs();
    let mut rhs = DMatrix::zeros(n, b_dofs.len());
    for (j, &bd) in b_dofs.iter().enumerate() {
        rhs[(bd, j)] = 1.0;
    }
    if !basis.omegas.is_empty() {
        for &omega in &basis.omegas {
            if omega <= 0.0 {
                return Err(Error::SingularMatrix(
                    "residual flexibility undefined with a zero-frequency mode; \
                     shift the stiffness first"
                        .into(),
                ));
            }
        }
        let phi_b = DMatrix::from_fn(b_dofs.len(), basis.omegas.len(), |i, j| {
            basis.phi[(b_dofs[i], j)]
        });
        rhs -= &model.m * &basis.phi * phi_b.transpose();
    }
    let fp = linalg::solve_spd_refined(&model.k, &rhs, "stiffness matrix")?;
    let fp_bb = DMatrix::from_fn(b_dofs.len(), b_dofs.len(), |i, j| fp[(b_dofs[i], j)]);
    let fp_ib = DMatrix::from_fn(i_dofs.len(), b_dofs.len(), |i, j| fp[(i_dofs[i], j)]);
    Ok((fp_bb, fp_ib))
}

struct MacnealParts {
    r: DMatrix<f64>,
    ktil: DMatrix<f64>,
    omegas: Vec<f64>,
}

/// Shared construction of the MacNeal/Rubin component-mode matrix and the
/// closed-form reduced stiffness.
fn macneal_parts(model: &SecondOrderModel, n_mod: usize) -> Result<MacnealParts> {
    let basis = solve_modes(model, n_mod, ModeConstraint::Free)?;
    let (fp_bb, fp_ib) = residual_flexibility(model, &basis)?;
    let b = model.boundary_dofs.len();
    let i_dofs = model.inner_dofs();

    let fp_bb_chol = linalg::cholesky(&fp_bb, "residual boundary flexibility").map_err(|_| {
        Error::Numerical(
            "residual boundary flexibility F'_bb is not positive definite; \
             the retained mode count is too large relative to the boundary size"
                .into(),
        )
    })?;
    let fp_bb_inv = {
        let mut inv = fp_bb_chol.solve(&DMatrix::identity(b, b));
        linalg::symmetrize(&mut inv);
        inv
    };

    let phi_b = DMatrix::from_fn(b, n_mod, |i, j| basis.phi[(model.boundary_dofs[i], j)]);
    let phi_i = DMatrix::from_fn(i_dofs.len(), n_mod, |i, j| basis.phi[(i_dofs[i], j)]);

    let attach = &fp_ib * &fp_bb_inv; // F'_ib (F'_bb)⁻¹
    let inner_modes = &phi_i - &attach * &phi_b;

    let n = model.n_dofs();
    let mut r = DMatrix::zeros(n, b + n_mod);
    for (j, &bd) in model.boundary_dofs.iter().enumerate() {
        r[(bd, j)] = 1.0;
    }
    for (row, &id) in i_dofs.iter().enumerate() {
        for j in 0..b {
            r[(id, j)] = attach[(row, j)];
        }
        for j in 0..n_mod {
            r[(id, b + j)] = inner_modes[(row, j)];
        }
    }

    // closed-form reduced stiffness (identical to RᵀKR)
    let kbi = -(&fp_bb_inv * &phi_b);
    let mut kii = DMatrix::zeros(n_mod, n_mod);
    for (j, &omega) in basis.omegas.iter().enumerate() {
        kii[(j, j)] = omega * omega;
    }
    kii += phi_b.transpose() * &fp_bb_inv * &phi_b;
    let mut ktil = DMatrix::zeros(b + n_mod, b + n_mod);
    ktil.view_mut((0, 0), (b, b)).copy_from(&fp_bb_inv);
    ktil.view_mut((0, b), (b, n_mod)).copy_from(&kbi);
    ktil.view_mut((b, 0), (n_mod, b)).copy_from(&kbi.transpose());
    ktil.view_mut((b, b), (n_mod, n_mod)).copy_from(&kii);
    linalg::symmetrize(&mut ktil);

    Ok(MacnealParts {
        r,
        ktil,
        omegas: basis.omegas,
    })
}

/// Zero the boundary rows/columns of a reduced damping matrix (the massless
/// reductions carry no boundary damping).
fn zero_boundary_damping(d: &mut DMatrix<f64>, b: usize) {
    let n = d.nrows();
    for i in 0..b {
        for j in 0..n {
            d[(i, j)] = 0.0;
            d[(j, i)] = 0.0;
        }
    }
}

/// MacNeal reduction: massless boundary, `M̃ = blkdiag(0, I)`.
pub fn reduce_macneal(model: &SecondOrderModel, n_mod: usize) -> Result<ReducedModel> {
    let parts = macneal_parts(model, n_mod)?;
    let b = model.boundary_dofs.len();
    let n_red = b + n_mod;
    let mut mtil = DMatrix::zeros(n_red, n_red);
    for j in 0..n_mod {
        mtil[(b + j, b + j)] = 1.0;
    }
    let mut dtil = parts.r.transpose() * &model.d * &parts.r;
    linalg::symmetrize(&mut dtil);
    zero_boundary_damping(&mut dtil, b);
    Ok(ReducedModel {
        load: model.load.reduced(&parts.r),
        mtil,
        ktil: parts.ktil,
        dtil,
        n_boundary: b,
        massless: true,
        omegas_inner: parts.omegas,
        r: parts.r,
    })
}

/// Rubin reduction: same component modes as MacNeal, Galerkin mass
/// `M̃ = RᵀMR` (mass-carrying boundary).
pub fn reduce_rubin(model: &SecondOrderModel, n_mod: usize) -> Result<ReducedModel> {
    let parts = macneal_parts(model, n_mod)?;
    let b = model.boundary_dofs.len();
    let mut mtil = parts.r.transpose() * &model.m * &parts.r;
    linalg::symmetrize(&mut mtil);
    let mut ktil = parts.r.transpose() * &model.k * &parts.r;
    linalg::symmetrize(&mut ktil);
    let mut dtil = parts.r.transpose() * &model.d * &parts.r;
    linalg::symmetrize(&mut dtil);
    Ok(ReducedModel {
        load: model.load.reduced(&parts.r),
        mtil,
        ktil,
        dtil,
        n_boundary: b,
        massless: false,
        omegas_inner: parts.omegas,
        r: parts.r,
    })
}

struct CraigBamptonParts {
    psi: DMatrix<f64>,
    theta: DMatrix<f64>,
    omegas: Vec<f64>,
}

fn craig_bampton_parts(model: &SecondOrderModel, n_mod: usize) -> Result<CraigBamptonParts> {
    let inner = model.inner_dofs();
    let k_ii = linalg::submatrix(&model.k, &inner, &inner);
    let k_ib = linalg::submatrix(&model.k, &inner, &model.boundary_dofs);
    let psi = -linalg::solve_spd_refined(&k_ii, &k_ib, "inner stiffness K_ii")?;
    let basis = solve_modes(model, n_mod, ModeConstraint::FixedInterface)?;
    Ok(CraigBamptonParts {
        psi,
        theta: basis.phi,
        omegas: basis.omegas,
    })
}

fn assemble_cb_basis(
    model: &SecondOrderModel,
    inner_static: &DMatrix<f64>,
    theta: &DMatrix<f64>,
) -> DMatrix<f64> {
    let b = model.boundary_dofs.len();
    let n_mod = theta.ncols();
    let inner = model.inner_dofs();
    let n = model.n_dofs();
    let mut r = DMatrix::zeros(n, b + n_mod);
    for (j, &bd) in model.boundary_dofs.iter().enumerate() {
        r[(bd, j)] = 1.0;
    }
    for (row, &id) in inner.iter().enumerate() {
        for j in 0..b {
            r[(id, j)] = inner_static[(row, j)];
        }
        for j in 0..n_mod {
            r[(id, b + j)] = theta[(row, j)];
        }
    }
    r
}

fn galerkin_reduce(
    model: &SecondOrderModel,
    r: DMatrix<f64>,
    n_boundary: usize,
    omegas: Vec<f64>,
) -> ReducedModel {
    let mut mtil = r.transpose() * &model.m * &r;
    linalg::symmetrize(&mut mtil);
    let mut ktil = r.transpose() * &model.k * &r;
    linalg::symmetrize(&mut ktil);
    let mut dtil = r.transpose() * &model.d * &r;
    linalg::symmetrize(&mut dtil);
    ReducedModel {
        load: model.load.reduced(&r),
        mtil,
        ktil,
        dtil,
        n_boundary,
        massless: false,
        omegas_inner: omegas,
        r,
    }
}

/// Standard Craig-Bampton reduction (mass-carrying boundary).
pub fn reduce_craig_bampton(model: &SecondOrderModel, n_mod: usize) -> Result<ReducedModel> {
    let parts = craig_bampton_parts(model, n_mod)?;
    let r = assemble_cb_basis(model, &parts.psi, &parts.theta);
    Ok(galerkin_reduce(
        model,
        r,
        model.boundary_dofs.len(),
        parts.omegas,
    ))
}

/// Craig-Bampton with the inertia-decoupling transform applied but the
/// boundary mass still present (`M̃ = blkdiag(M̃*_bb, I)`, `M̃_bi = 0`).
///
/// Spectrally equivalent to the standard Craig-Bampton model; removing the
/// boundary mass block turns it into [`reduce_massless_cb`].
pub fn massless_cb_intermediate(model: &SecondOrderModel, n_mod: usize) -> Result<ReducedModel> {
    let parts = craig_bampton_parts(model, n_mod)?;
    let inner = model.inner_dofs();
    let m_ii = linalg::submatrix(&model.m, &inner, &inner);
    let m_ib = linalg::submatrix(&model.m, &inner, &model.boundary_dofs);
    // alpha = Θᵀ (M_ib + M_ii Ψ): mode mixing that cancels the bi mass block
    let alpha = parts.theta.transpose() * (&m_ib + &m_ii * &parts.psi);
    let inner_static = &parts.psi - &parts.theta * &alpha;
    let r = assemble_cb_basis(model, &inner_static, &parts.theta);
    Ok(galerkin_reduce(
        model,
        r,
        model.boundary_dofs.len(),
        parts.omegas,
    ))
}

/// Massless Craig-Bampton reduction: decouple boundary/inner inertia, then
/// drop the boundary mass. `M̃ = blkdiag(0, I)` exactly.
pub fn reduce_massless_cb(model: &SecondOrderModel, n_mod: usize) -> Result<ReducedModel> {
    let mut red = massless_cb_intermediate(model, n_mod)?;
    let b = red.n_boundary;
    let n_red = red.n_red();
    let mut mtil = DMatrix::zeros(n_red, n_red);
    for j in b..n_red {
        mtil[(j, j)] = 1.0;
    }
    red.mtil = mtil;
    zero_boundary_damping(&mut red.dtil, b);
    red.massless = true;
    Ok(red)
}

/// Add artificial grounding stiffness `κ` on the boundary DOF diagonal.
///
/// Used to make a floating model invertible before a free-interface
/// reduction; [`reduce`] subtracts the same term from `K̃_bb` afterwards,
/// which cancels the shift exactly because the boundary rows of `R` are the
/// identity.
pub fn shift_for_rigid_modes(model: &SecondOrderModel, kappa: f64) -> SecondOrderModel {
    let mut shifted = model.clone();
    for &b in &model.boundary_dofs {
        shifted.k[(b, b)] += kappa;
    }
    shifted
}

/// Default grounding shift: `1e-3 · max diag(K)`.
pub fn default_shift(model: &SecondOrderModel) -> f64 {
    let mut d = 0.0f64;
    for i in 0..model.n_dofs() {
        d = d.max(model.k[(i, i)].abs());
    }
    1e-3 * d
}

/// Run a reduction, optionally through a boundary grounding shift.
pub fn reduce(
    model: &SecondOrderModel,
    method: ReductionMethod,
    n_mod: usize,
    shift: Option<f64>,
) -> Result<ReducedModel> {
    let run = |m: &SecondOrderModel| match method {
        ReductionMethod::MacNeal => reduce_macneal(m, n_mod),
        ReductionMethod::Rubin => reduce_rubin(m, n_mod),
        ReductionMethod::CraigBampton => reduce_craig_bampton(m, n_mod),
        ReductionMethod::MasslessCraigBampton => reduce_massless_cb(m, n_mod),
    };
    match shift {
        None => run(model),
        Some(kappa) => {
            let shifted = shift_for_rigid_modes(model, kappa);
            let mut red = run(&shifted)?;
            for j in 0..red.n_boundary {
                red.ktil[(j, j)] -= kappa;
            }
            Ok(red)
        }
    }
}

/// Congruence transform to gap coordinates.
///
/// Given the contact direction matrix `w_b` (rows over the model's boundary
/// DOFs in their stored order, one column per contact coordinate), builds the
/// regular boundary transform `q_b = S⁻ᵀ y` with `S = [W_b | V]` so that the
/// first `n_cc` new boundary coordinates are exactly the contact gap
/// coordinates (`W_b` becomes the identity on them). Returns the transformed
/// model and the full-space map `Q` with `q_original = Q q_new`.
///
/// The transformed model's boundary set is the contact coordinates; former
/// boundary directions not spanned by `W_b` become inner coordinates.
pub fn to_gap_coordinates(
    model: &SecondOrderModel,
    w_b: &DMatrix<f64>,
) -> Result<(SecondOrderModel, DMatrix<f64>)> {
    let b = model.boundary_dofs.len();
    let n_cc = w_b.ncols();
    if w_b.nrows() != b {
        return Err(Error::Dimension(format!(
            "W_b has {} rows but the model has {} boundary DOFs",
            w_b.nrows(),
            b
        )));
    }
    if n_cc > b {
        return Err(Error::InvalidKinematics(
            "more contact coordinates than boundary DOFs".into(),
        ));
    }

    // complete [W_b | V] to a basis of the boundary space, preferring
    // identity directions for V
    let mut s = DMatrix::zeros(b, b);
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(b);
    let mut n_cols = 0usize;
    let push_col = |s: &mut DMatrix<f64>,
                        ortho: &mut Vec<DVector<f64>>,
                        n_cols: &mut usize,
                        col: DVector<f64>|
     -> bool {
        let mut res = col.clone();
        for u in ortho.iter() {
            res -= u * u.dot(&res);
        }
        let norm = res.norm();
        if norm <= 1e-10 * col.norm().max(1.0) {
            return false;
        }
        s.set_column(*n_cols, &col);
        ortho.push(res / norm);
        *n_cols += 1;
        true
    };
    for j in 0..n_cc {
        let col = w_b.column(j).into_owned();
        if !push_col(&mut s, &mut ortho, &mut n_cols, col) {
            return Err(Error::InvalidKinematics(format!(
                "contact direction column {j} is linearly dependent"
            )));
        }
    }
    for j in 0..b {
        if n_cols == b {
            break;
        }
        let mut e = DVector::zeros(b);
        e[j] = 1.0;
        push_col(&mut s, &mut ortho, &mut n_cols, e);
    }
    if n_cols != b {
        return Err(Error::InvalidKinematics(
            "failed to complete the boundary transform basis".into(),
        ));
    }

    let s_inv_t = s
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidKinematics("boundary transform is singular".into()))?
        .transpose();

    // full-space map: identity on inner DOFs, S⁻ᵀ on the boundary block
    let n = model.n_dofs();
    let mut q = DMatrix::identity(n, n);
    for (bi, &ri) in model.boundary_dofs.iter().enumerate() {
        for (bj, &rj) in model.boundary_dofs.iter().enumerate() {
            q[(ri, rj)] = s_inv_t[(bi, bj)];
        }
    }

    let mut k = q.transpose() * &model.k * &q;
    linalg::symmetrize(&mut k);
    let mut m = q.transpose() * &model.m * &q;
    linalg::symmetrize(&mut m);
    let mut d = q.transpose() * &model.d * &q;
    linalg::symmetrize(&mut d);
    let transformed = SecondOrderModel {
        k,
        m,
        d,
        boundary_dofs: model.boundary_dofs[..n_cc].to_vec(),
        node_coords: model.node_coords.clone(),
        dof_map: model.dof_map.clone(),
        load: model.load.transformed(&q),
    };
    Ok((transformed, q))
}

/// Gap transform followed by a reduction; the returned basis maps reduced
/// coordinates back to the parent model's original DOFs.
pub fn build_reduced(
    model: &SecondOrderModel,
    w_b: &DMatrix<f64>,
    method: ReductionMethod,
    n_mod: usize,
    shift: Option<f64>,
) -> Result<ReducedModel> {
    let (gap_model, q) = to_gap_coordinates(model, w_b)?;
    let mut red = reduce(&gap_model, method, n_mod, shift)?;
    red.r = &q * &red.r;
    Ok(red)
}
