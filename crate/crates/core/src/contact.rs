//! Contact laws and solvers.
//!
//! Contacts are described in gap coordinates (the contact directions are the
//! leading boundary coordinates of the reduced model, see
//! [`crate::cms::to_gap_coordinates`]). Each contact has one normal
//! coordinate and, in frictional configurations, two tangential coordinates.
//! The admissible force set per contact is `ℝ₀⁺ × 𝒟(μ λ_n + μ λ_n⁰)`; the
//! set-valued contact laws are solved as a fixed point of
//! `x = proj_𝒞[x − ε_AL (G x + c)]` with simultaneous (Jacobi) updates.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::cms::ReducedModel;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::LoadSet;

/// Initial contact state of an interface.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContactMode {
    /// Initially open: activation predicted from normal gaps.
    Open,
    /// Preloaded: activation predicted from trial contact forces.
    Preloaded,
}

/// Per-contact parameters.
#[derive(Clone, Debug)]
pub struct ContactPoint {
    /// Coulomb friction coefficient (≥ 0).
    pub mu: f64,
    /// Normal preload λ⁰_n (≥ 0, zero for initially open contacts).
    pub preload_n: f64,
    pub mode: ContactMode,
    /// Normal restitution coefficient (mass-carrying integrator only).
    pub restitution_n: f64,
    /// Tangential restitution coefficient (mass-carrying integrator only).
    pub restitution_t: f64,
}

impl ContactPoint {
    pub fn open(mu: f64) -> Self {
        ContactPoint {
            mu,
            preload_n: 0.0,
            mode: ContactMode::Open,
            restitution_n: 0.0,
            restitution_t: 0.0,
        }
    }

    pub fn preloaded(mu: f64, preload_n: f64) -> Self {
        ContactPoint {
            mu,
            preload_n,
            mode: ContactMode::Preloaded,
            restitution_n: 0.0,
            restitution_t: 0.0,
        }
    }

    pub fn with_restitution(mut self, eps_n: f64, eps_t: f64) -> Self {
        self.restitution_n = eps_n;
        self.restitution_t = eps_t;
        self
    }
}

/// Normal gap offset `g₀(t)` per contact.
#[derive(Clone, Debug)]
pub enum NormalGap {
    /// Time-constant offsets, one per contact.
    Constant(Vec<f64>),
    /// `mean_j + amp_j · cos(omega t + phase)` per contact.
    Cosine {
        mean: Vec<f64>,
        amp: Vec<f64>,
        omega: f64,
        phase: f64,
    },
}

/// Prescribed relative interface motion: normal gap offsets and, for
/// frictional contacts, an imposed tangential sliding velocity (e.g. a
/// surface moving under the contact point).
#[derive(Clone, Debug)]
pub struct GapMotion {
    pub normal: NormalGap,
    /// Imposed tangential velocity `ġ₀_t` per contact; empty when
    /// frictionless.
    pub tangential_rate: Vec<[f64; 2]>,
}

impl GapMotion {
    pub fn constant(offsets: Vec<f64>) -> Self {
        GapMotion {
            normal: NormalGap::Constant(offsets),
            tangential_rate: Vec::new(),
        }
    }

    pub fn g0_normal(&self, t: f64, j: usize) -> f64 {
        match &self.normal {
            NormalGap::Constant(g) => g[j],
            NormalGap::Cosine {
                mean,
                amp,
                omega,
                phase,
            } => mean[j] + amp[j] * (omega * t + phase).cos(),
        }
    }

    pub fn g0dot_normal(&self, t: f64, j: usize) -> f64 {
        match &self.normal {
            NormalGap::Constant(_) => 0.0,
            NormalGap::Cosine {
                amp, omega, phase, ..
            } => -amp[j] * omega * (omega * t + phase).sin(),
        }
    }

    pub fn g0dot_tangential(&self, j: usize) -> [f64; 2] {
        self.tangential_rate.get(j).copied().unwrap_or([0.0, 0.0])
    }
}

/// Contact configuration for one model: per-contact laws plus the prescribed
/// interface motion.
#[derive(Clone, Debug)]
pub struct ContactConfig {
    pub points: Vec<ContactPoint>,
    /// Frictional configurations carry two tangential coordinates per
    /// contact in addition to the normal one.
    pub tangential: bool,
    pub gap: GapMotion,
}

impl ContactConfig {
    pub fn frictionless(points: Vec<ContactPoint>, gap: GapMotion) -> Result<Self> {
        let cfg = ContactConfig {
            points,
            tangential: false,
            gap,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn frictional(points: Vec<ContactPoint>, gap: GapMotion) -> Result<Self> {
        let cfg = ContactConfig {
            points,
            tangential: true,
            gap,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (j, p) in self.points.iter().enumerate() {
            if p.mu < 0.0 {
                return Err(Error::InvalidSpec(format!("contact {j}: mu must be >= 0")));
            }
            if p.preload_n < 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "contact {j}: normal preload must be >= 0"
                )));
            }
            if p.mode == ContactMode::Open && p.preload_n != 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "contact {j}: initially open contacts must have zero preload"
                )));
            }
        }
        match &self.gap.normal {
            NormalGap::Constant(g) => {
                if g.len() != self.points.len() {
                    return Err(Error::Dimension("gap offset count != contact count".into()));
                }
            }
            NormalGap::Cosine { mean, amp, .. } => {
                if mean.len() != self.points.len() || amp.len() != self.points.len() {
                    return Err(Error::Dimension("gap offset count != contact count".into()));
                }
            }
        }
        Ok(())
    }

    pub fn n_contacts(&self) -> usize {
        self.points.len()
    }

    /// Coordinates per contact: 1 (normal) or 3 (normal + 2 tangential).
    pub fn coords_per_contact(&self) -> usize {
        if self.tangential {
            3
        } else {
            1
        }
    }

    /// Total stacked contact coordinates; must equal the reduced model's
    /// boundary size.
    pub fn n_coords(&self) -> usize {
        self.n_contacts() * self.coords_per_contact()
    }

    /// Cone parameters for the listed contacts.
    pub fn cones(&self, contacts: &[usize]) -> Vec<Cone> {
        contacts
            .iter()
            .map(|&j| Cone {
                mu: self.points[j].mu,
                preload_n: self.points[j].preload_n,
            })
            .collect()
    }
}

/// Admissible-set parameters of one contact: `ℝ₀⁺ × 𝒟(μ x_n + μ preload_n)`.
#[derive(Clone, Copy, Debug)]
pub struct Cone {
    pub mu: f64,
    pub preload_n: f64,
}

/// Projection onto the half-line `ℝ₀⁺`.
#[inline]
pub fn proj_halfline(xi: f64) -> f64 {
    xi.max(0.0)
}

/// Inside-test slack making disk projections exactly idempotent: a freshly
/// scaled point can land an ulp outside the radius and must count as inside.
const DISK_EDGE_SLACK: f64 = 4.0 * f64::EPSILON;

/// Projection onto the planar disk of radius `r ≥ 0`.
pub fn proj_disk(xi: [f64; 2], r: f64) -> Result<[f64; 2]> {
    if r < 0.0 {
        return Err(Error::InvalidSpec("disk radius must be >= 0".into()));
    }
    let norm = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
    if norm <= r * (1.0 + DISK_EDGE_SLACK) {
        Ok(xi)
    } else {
        let s = r / norm;
        Ok([xi[0] * s, xi[1] * s])
    }
}

/// In-place projection of a stacked contact vector onto the admissible set.
///
/// `x` holds `cpc` coordinates per cone, `(n)` or `(n, t1, t2)`. The disk
/// radius uses the just-projected normal component.
pub fn project_admissible(x: &mut DVector<f64>, cones: &[Cone], cpc: usize) {
    debug_assert_eq!(x.len(), cones.len() * cpc);
    for (j, cone) in cones.iter().enumerate() {
        let o = j * cpc;
        let xn = proj_halfline(x[o]);
        x[o] = xn;
        if cpc == 3 {
            let r = cone.mu * (xn + cone.preload_n);
            let norm = (x[o + 1] * x[o + 1] + x[o + 2] * x[o + 2]).sqrt();
            if norm > r * (1.0 + DISK_EDGE_SLACK) {
                let s = if norm > 0.0 { r / norm } else { 0.0 };
                x[o + 1] *= s;
                x[o + 2] *= s;
            }
        }
    }
}

/// Stacked projection for an explicit contact configuration and active set.
pub fn proj_admissible(x: &DVector<f64>, cfg: &ContactConfig, active: &[usize]) -> DVector<f64> {
    let cones = cfg.cones(active);
    let mut out = x.clone();
    project_admissible(&mut out, &cones, cfg.coords_per_contact());
    out
}

/// Delassus system `−(G x + c) ∈ N_𝒞(x)` restricted to the active set.
#[derive(Clone, Debug)]
pub struct DelassusSystem {
    pub g: DMatrix<f64>,
    pub c: DVector<f64>,
    /// Contact indices forming the system, ascending.
    pub active_set: Vec<usize>,
    /// Coordinates per contact (1 or 3).
    pub coords_per_contact: usize,
}

/// Solver options for the augmented-Lagrangian projected Jacobi iteration.
#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Fixed step `ε_AL`; `None` selects `alpha / max_j G_jj`.
    pub eps_al: Option<f64>,
    /// Relative convergence tolerance on the iterate update.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            eps_al: None,
            tol: 1e-10,
            max_iter: 5000,
        }
    }
}

/// Default augmented-Lagrangian step: `α / max_j G_jj` with `α = 3` for
/// massless (static boundary) systems and `α = 1` for mass-carrying ones,
/// the massless solve being far less sensitive to the choice.
pub fn default_eps_al(g: &DMatrix<f64>, massless: bool) -> f64 {
    let mut dmax = 0.0f64;
    for i in 0..g.nrows() {
        dmax = dmax.max(g[(i, i)].abs());
    }
    let alpha = if massless { 3.0 } else { 1.0 };
    alpha / dmax.max(f64::MIN_POSITIVE)
}

/// Converged solution of an algebraic inclusion.
#[derive(Clone, Debug)]
pub struct InclusionSolution {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub eps_al: f64,
}

/// Solve `−(G x + c) ∈ N_𝒞(x)` by the projected Jacobi relaxation
/// `x ← proj_𝒞[x − ε_AL (G x + c)]` (simultaneous updates).
///
/// Converged when `‖x_new − x_old‖_∞ ≤ tol · max(1, ‖x_new‖_∞)`. Returns a
/// non-convergence error carrying the last residual; the caller may retry
/// with a smaller `ε_AL` (see [`solve_inclusion_auto`]).
#[allow(clippy::too_many_arguments)]
pub fn solve_inclusion(
    g: &DMatrix<f64>,
    c: &DVector<f64>,
    cones: &[Cone],
    cpc: usize,
    eps_al: f64,
    tol: f64,
    max_iter: usize,
    x0: Option<&DVector<f64>>,
) -> Result<InclusionSolution> {
    if eps_al <= 0.0 {
        return Err(Error::InvalidSpec("eps_al must be > 0".into()));
    }
    let n = c.len();
    debug_assert_eq!(g.nrows(), n);
    debug_assert_eq!(cones.len() * cpc, n);
    let mut x = match x0 {
        Some(x0) => {
            let mut x = x0.clone();
            project_admissible(&mut x, cones, cpc);
            x
        }
        None => DVector::zeros(n),
    };
    let mut residual = f64::INFINITY;
    let mut best = f64::INFINITY;
    for it in 1..=max_iter {
        let mut xn = &x - (g * &x + c) * eps_al;
        project_admissible(&mut xn, cones, cpc);
        residual = (&xn - &x).amax();
        // growing updates mean the relaxation step is too large; bail early
        // so the caller's retry with a smaller step stays cheap
        if !residual.is_finite() || (it > 10 && residual > 100.0 * best) {
            return Err(Error::NonConvergence {
                iterations: it,
                residual,
                context: "projected Jacobi iteration diverged".into(),
            });
        }
        best = best.min(residual);
        x = xn;
        if residual <= tol * x.amax().max(1.0) {
            return Ok(InclusionSolution {
                x,
                iterations: it,
                eps_al,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual,
        context: "projected Jacobi iteration".into(),
    })
}

/// [`solve_inclusion`] with automatic step-size fallback: on
/// non-convergence the step `ε_AL` is reduced by 4 up to three times.
pub fn solve_inclusion_auto(
    g: &DMatrix<f64>,
    c: &DVector<f64>,
    cones: &[Cone],
    cpc: usize,
    opts: &SolveOptions,
    massless: bool,
    x0: Option<&DVector<f64>>,
) -> Result<InclusionSolution> {
    let eps0 = opts.eps_al.unwrap_or_else(|| default_eps_al(g, massless));
    let mut last = None;
    for k in 0..4 {
        let eps = eps0 / 4f64.powi(k);
        match solve_inclusion(g, c, cones, cpc, eps, opts.tol, opts.max_iter, x0) {
            Ok(sol) => return Ok(sol),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap())
}

/// Key: bitmask over boundary coordinates marking the unknown set.
type PatternKey = Vec<u8>;

fn pattern_key(n: usize, unknown: &[usize]) -> PatternKey {
    let mut key = vec![0u8; n.div_ceil(8)];
    for &i in unknown {
        key[i / 8] |= 1 << (i % 8);
    }
    key
}

/// Bounded cache of boundary sub-inverses, keyed by the unknown-coordinate
/// pattern. FIFO eviction at 64 entries.
#[derive(Debug, Default)]
struct PatternCache {
    map: HashMap<PatternKey, DMatrix<f64>>,
    order: Vec<PatternKey>,
}

const PATTERN_CACHE_CAP: usize = 64;

impl PatternCache {
    fn get_or_insert(
        &mut self,
        key: PatternKey,
        build: impl FnOnce() -> Result<DMatrix<f64>>,
    ) -> Result<DMatrix<f64>> {
        if let Some(hit) = self.map.get(&key) {
            return Ok(hit.clone());
        }
        let value = build()?;
        if self.map.len() >= PATTERN_CACHE_CAP {
            if let Some(oldest) = self.order.first().cloned() {
                self.map.remove(&oldest);
                self.order.remove(0);
            }
        }
        self.map.insert(key.clone(), value.clone());
        self.order.push(key);
        Ok(value)
    }
}

/// Classification of the contacts for one step.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ActiveSet {
    /// Contacts solved through the inclusion.
    pub active: Vec<usize>,
    /// Inactive preloaded contacts, held closed/sticking bilaterally.
    pub stuck: Vec<usize>,
    /// Inactive open contacts (zero contact force).
    pub free: Vec<usize>,
}

/// Result of one boundary contact solve.
#[derive(Clone, Debug)]
pub struct BoundarySolution {
    /// Boundary displacements at the new time level.
    pub q_b: DVector<f64>,
    /// Stacked contact forces (zeros on inactive open contacts).
    pub lambda: DVector<f64>,
    /// Jacobi iterations spent (0 when the step was non-iterative).
    pub iterations: usize,
    /// Max-norm residual of the boundary force balance, relative to the
    /// force scale.
    pub residual: f64,
    pub active: ActiveSet,
}

/// Precomputed boundary elimination operators of a massless reduced model,
/// plus the active-set predictors and Delassus assembly.
pub struct MasslessBoundary {
    kbb: DMatrix<f64>,
    kbi: DMatrix<f64>,
    kbb_inv: DMatrix<f64>,
    load: LoadSet,
    n_red: usize,
    n_boundary: usize,
    cpc: usize,
    points: Vec<ContactPoint>,
    gap: GapMotion,
    /// Cross-interface coupling between open and preloaded contacts; when
    /// present the per-mode predictors are replaced by a conservative
    /// all-active classification.
    mixed_coupled: bool,
    cache: PatternCache,
}

impl MasslessBoundary {
    pub fn new(model: &ReducedModel, cfg: &ContactConfig) -> Result<Self> {
        if !model.massless {
            return Err(Error::InvalidSpec(
                "boundary contact elimination requires a massless reduced model".into(),
            ));
        }
        if cfg.n_coords() != model.n_boundary {
            return Err(Error::Dimension(format!(
                "contact configuration has {} coordinates but the model boundary has {}",
                cfg.n_coords(),
                model.n_boundary
            )));
        }
        cfg.validate()?;
        let kbb = model.k_bb();
        let chol = linalg::cholesky(&kbb, "boundary stiffness K_bb").map_err(|_| {
            Error::SingularMatrix(
                "boundary stiffness K̃_bb is singular: the boundary is not statically determinate"
                    .into(),
            )
        })?;
        let b = model.n_boundary;
        let mut kbb_inv = chol.solve(&DMatrix::identity(b, b));
        linalg::symmetrize(&mut kbb_inv);
        let cpc = cfg.coords_per_contact();
        let mixed_coupled = {
            let open: Vec<usize> = (0..cfg.n_contacts())
                .filter(|&j| cfg.points[j].mode == ContactMode::Open)
                .collect();
            let pre: Vec<usize> = (0..cfg.n_contacts())
                .filter(|&j| cfg.points[j].mode == ContactMode::Preloaded)
                .collect();
            let mut coupled = false;
            if !open.is_empty() && !pre.is_empty() {
                'outer: for &jo in &open {
                    for &jp in &pre {
                        for a in 0..cpc {
                            for bb in 0..cpc {
                                if kbb[(jo * cpc + a, jp * cpc + bb)] != 0.0 {
                                    coupled = true;
                                    break 'outer;
                                }
                            }
                        }
                    }
                }
            }
            coupled
        };
        Ok(MasslessBoundary {
            kbb,
            kbi: model.k_bi(),
            kbb_inv,
            load: model.load.clone(),
            n_red: model.n_red(),
            n_boundary: b,
            cpc,
            points: cfg.points.clone(),
            gap: cfg.gap.clone(),
            mixed_coupled,
            cache: PatternCache::default(),
        })
    }

    pub fn n_contacts(&self) -> usize {
        self.points.len()
    }

    fn normal_coord(&self, j: usize) -> usize {
        j * self.cpc
    }

    /// Boundary part of the external load at time `t`.
    pub fn boundary_force(&self, t: f64) -> DVector<f64> {
        let f = self.load.eval(t, self.n_red);
        f.rows(0, self.n_boundary).into_owned()
    }

    /// Force-free boundary position `s = K̃_bb⁻¹ (f_b − K̃_bi q_i)`.
    pub fn force_free_position(&self, q_i: &DVector<f64>, t: f64) -> DVector<f64> {
        let rhs = self.boundary_force(t) - &self.kbi * q_i;
        &self.kbb_inv * rhs
    }

    /// Gap prediction for initially open interfaces:
    /// `g^pre = g₀(t) + [K̃_bb⁻¹ (f_b − K̃_bi q_i)]_n`.
    pub fn predict_gaps(&self, q_i: &DVector<f64>, t: f64) -> DVector<f64> {
        let s = self.force_free_position(q_i, t);
        DVector::from_fn(self.n_contacts(), |j, _| {
            s[self.normal_coord(j)] + self.gap.g0_normal(t, j)
        })
    }

    /// Active set of initially open interfaces: predicted normal gap ≤ 0.
    pub fn predict_active_open(&self, q_i: &DVector<f64>, t: f64) -> Vec<usize> {
        let g_pre = self.predict_gaps(q_i, t);
        (0..self.n_contacts())
            .filter(|&j| g_pre[j] <= 0.0)
            .collect()
    }

    /// Force prediction for preloaded interfaces (sticking assumption):
    /// `λ^pre = K̃_bb q_b^{k−1} + K̃_bi q_i − f_b(t)`.
    pub fn predict_forces(
        &self,
        q_b_prev: &DVector<f64>,
        q_i: &DVector<f64>,
        t: f64,
    ) -> DVector<f64> {
        &self.kbb * q_b_prev + &self.kbi * q_i - self.boundary_force(t)
    }

    /// Active set of preloaded interfaces: normal unloading or tangential
    /// trial forces outside the Coulomb cone.
    pub fn predict_active_preloaded(
        &self,
        q_b_prev: &DVector<f64>,
        q_i: &DVector<f64>,
        t: f64,
    ) -> Vec<usize> {
        let lam = self.predict_forces(q_b_prev, q_i, t);
        (0..self.n_contacts())
            .filter(|&j| {
                let p = &self.points[j];
                let ln = lam[self.normal_coord(j)];
                if ln + p.preload_n <= 0.0 {
                    return true;
                }
                if self.cpc == 3 {
                    let t1 = lam[self.normal_coord(j) + 1];
                    let t2 = lam[self.normal_coord(j) + 2];
                    let lt = (t1 * t1 + t2 * t2).sqrt();
                    if lt >= p.mu * ln + p.mu * p.preload_n {
                        return true;
                    }
                }
                false
            })
            .collect()
    }

    /// Classify every contact for the step.
    pub fn classify(&self, q_b_prev: &DVector<f64>, q_i: &DVector<f64>, t: f64) -> ActiveSet {
        let n = self.n_contacts();
        if self.mixed_coupled {
            // coupled mixed-mode interfaces: conservative superset (the
            // inclusion resolves truly open contacts to zero force)
            return ActiveSet {
                active: (0..n).collect(),
                stuck: Vec::new(),
                free: Vec::new(),
            };
        }
        let open_active = self.predict_active_open(q_i, t);
        let pre_active = self.predict_active_preloaded(q_b_prev, q_i, t);
        let mut set = ActiveSet::default();
        for j in 0..n {
            match self.points[j].mode {
                ContactMode::Open => {
                    if open_active.contains(&j) {
                        set.active.push(j);
                    } else {
                        set.free.push(j);
                    }
                }
                ContactMode::Preloaded => {
                    if pre_active.contains(&j) {
                        set.active.push(j);
                    } else {
                        set.stuck.push(j);
                    }
                }
            }
        }
        set
    }

    fn contact_coords(&self, contacts: &[usize]) -> Vec<usize> {
        let mut coords = Vec::with_capacity(contacts.len() * self.cpc);
        for &j in contacts {
            for a in 0..self.cpc {
                coords.push(j * self.cpc + a);
            }
        }
        coords
    }

    fn kuu_inverse(&mut self, unknown: &[usize]) -> Result<DMatrix<f64>> {
        let key = pattern_key(self.n_boundary, unknown);
        let kbb = &self.kbb;
        let kbb_inv = &self.kbb_inv;
        let n_boundary = self.n_boundary;
        self.cache.get_or_insert(key, || {
            if unknown.len() == n_boundary {
                return Ok(kbb_inv.clone());
            }
            let kuu = linalg::submatrix(kbb, unknown, unknown);
            let chol = linalg::cholesky(&kuu, "boundary sub-stiffness")?;
            let mut inv = chol.solve(&DMatrix::identity(unknown.len(), unknown.len()));
            linalg::symmetrize(&mut inv);
            Ok(inv)
        })
    }

    /// Displacement-level boundary solve (frictionless stepping).
    ///
    /// Active contacts obey `0 ≤ g ⊥ λ_n ≥ 0` at `t`; stuck preloaded
    /// contacts are held at zero gap; open inactive contacts are force-free.
    pub fn solve_frictionless(
        &mut self,
        q_i: &DVector<f64>,
        t: f64,
        set: &ActiveSet,
        opts: &SolveOptions,
        warm: Option<&DVector<f64>>,
    ) -> Result<BoundarySolution> {
        if self.cpc != 1 {
            return Err(Error::InvalidSpec(
                "displacement-level solve supports frictionless (1 coordinate) contacts only"
                    .into(),
            ));
        }
        let gap = self.gap.clone();
        self.solve_partitioned(
            q_i,
            t,
            set,
            opts,
            warm,
            &|coord, _| -gap.g0_normal(t, coord),
            &|coord, x0_row| x0_row + gap.g0_normal(t, coord),
        )
    }

    /// Velocity-level boundary solve (frictional stepping).
    ///
    /// Normal rows enforce the end-of-step gap (complementarity scaled by
    /// `1/Δt`, which leaves the cone inclusion unchanged); tangential rows
    /// carry the Coulomb law on the slip velocity `γ_t = u_t + ġ₀_t`. Stuck
    /// preloaded contacts keep `q_b = q_b^{k−1}` (sticking).
    #[allow(clippy::too_many_arguments)]
    pub fn solve_frictional(
        &mut self,
        q_b_prev: &DVector<f64>,
        q_i: &DVector<f64>,
        t: f64,
        dt: f64,
        set: &ActiveSet,
        opts: &SolveOptions,
        warm: Option<&DVector<f64>>,
    ) -> Result<BoundarySolution> {
        let gap = self.gap.clone();
        let cpc = self.cpc;
        let prev = q_b_prev.clone();
        self.solve_partitioned(
            q_i,
            t,
            set,
            opts,
            warm,
            &|_, coord| prev[coord],
            &|coord, x0_row| {
                let j = coord / cpc;
                let a = coord % cpc;
                if a == 0 {
                    x0_row + gap.g0_normal(t, j)
                } else {
                    x0_row - prev[coord] + dt * gap.g0dot_tangential(j)[a - 1]
                }
            },
        )
    }

    /// Core partitioned boundary solve in stacked coordinates.
    ///
    /// `prescribed(j, coord)` gives the held value of a stuck contact's
    /// coordinate; `c_row(coord, x0_row)` maps the force-free position of an
    /// active coordinate to its constant term in the inclusion.
    fn solve_partitioned(
        &mut self,
        q_i: &DVector<f64>,
        t: f64,
        set: &ActiveSet,
        opts: &SolveOptions,
        warm: Option<&DVector<f64>>,
        prescribed: &dyn Fn(usize, usize) -> f64,
        c_row: &dyn Fn(usize, f64) -> f64,
    ) -> Result<BoundarySolution> {
        let b = self.n_boundary;
        let f_b = self.boundary_force(t);
        let kbi_qi = &self.kbi * q_i;

        let e_coords = self.contact_coords(&set.stuck);
        let mut unknown: Vec<usize> = Vec::with_capacity(b);
        {
            let mut is_e = vec![false; b];
            for &c in &e_coords {
                is_e[c] = true;
            }
            for c in 0..b {
                if !is_e[c] {
                    unknown.push(c);
                }
            }
        }
        let a_coords = self.contact_coords(&set.active);
        let a_pos: Vec<usize> = {
            let mut pos_of = vec![usize::MAX; b];
            for (p, &c) in unknown.iter().enumerate() {
                pos_of[c] = p;
            }
            a_coords.iter().map(|&c| pos_of[c]).collect()
        };

        let mut q_e = DVector::zeros(e_coords.len());
        for (row, &c) in e_coords.iter().enumerate() {
            q_e[row] = prescribed(c / self.cpc, c);
        }

        let mut rhs0 = DVector::from_fn(unknown.len(), |row, _| {
            let c = unknown[row];
            f_b[c] - kbi_qi[c]
        });
        if !e_coords.is_empty() {
            let kue = linalg::submatrix(&self.kbb, &unknown, &e_coords);
            rhs0 -= kue * &q_e;
        }

        let kuu_inv = self.kuu_inverse(&unknown)?;
        let x0 = &kuu_inv * &rhs0;

        let (lambda_a, iterations) = if a_coords.is_empty() {
            (DVector::zeros(0), 0)
        } else {
            let g = linalg::submatrix(&kuu_inv, &a_pos, &a_pos);
            let c = DVector::from_fn(a_coords.len(), |idx, _| {
                c_row(a_coords[idx], x0[a_pos[idx]])
            });
            let cones: Vec<Cone> = set
                .active
                .iter()
                .map(|&j| Cone {
                    mu: self.points[j].mu,
                    preload_n: self.points[j].preload_n,
                })
                .collect();
            let warm_a =
                warm.map(|w| DVector::from_fn(a_coords.len(), |row, _| w[a_coords[row]]));
            let sol = solve_inclusion_auto(&g, &c, &cones, self.cpc, opts, true, warm_a.as_ref())?;
            (sol.x, sol.iterations)
        };

        // q_U = K_UU⁻¹ (rhs0 + E_A λ_A)
        let mut rhs = rhs0;
        for (idx, &pos) in a_pos.iter().enumerate() {
            rhs[pos] += lambda_a[idx];
        }
        let q_u = &kuu_inv * rhs;

        let mut q_b = DVector::zeros(b);
        for (row, &c) in unknown.iter().enumerate() {
            q_b[c] = q_u[row];
        }
        for (row, &c) in e_coords.iter().enumerate() {
            q_b[c] = q_e[row];
        }

        let mut lambda = DVector::zeros(b);
        for (idx, &c) in a_coords.iter().enumerate() {
            lambda[c] = lambda_a[idx];
        }
        if !e_coords.is_empty() {
            // reaction forces holding the stuck contacts
            let balance = &self.kbb * &q_b + &kbi_qi - &f_b;
            for &c in &e_coords {
                lambda[c] = balance[c];
            }
        }

        let residual = self.balance_residual(&q_b, q_i, t, &lambda);
        Ok(BoundarySolution {
            q_b,
            lambda,
            iterations,
            residual,
            active: set.clone(),
        })
    }

    /// Max-norm residual of `K̃_bb q_b + K̃_bi q_i − λ − f_b`, relative to
    /// the force scale.
    pub fn balance_residual(
        &self,
        q_b: &DVector<f64>,
        q_i: &DVector<f64>,
        t: f64,
        lambda: &DVector<f64>,
    ) -> f64 {
        let f_b = self.boundary_force(t);
        let r = &self.kbb * q_b + &self.kbi * q_i - lambda - &f_b;
        let scale = f_b
            .amax()
            .max(lambda.amax())
            .max((&self.kbb * q_b).amax())
            .max(1e-30);
        r.amax() / scale
    }

    /// Assemble the frictionless Delassus system for an explicit active set
    /// (no stuck partition), without solving it.
    pub fn build_frictionless_system(
        &mut self,
        q_i: &DVector<f64>,
        t: f64,
        active: &[usize],
    ) -> Result<DelassusSystem> {
        if active.is_empty() {
            return Err(Error::InvalidSpec("active set is empty".into()));
        }
        let coords = self.contact_coords(active);
        let g = linalg::submatrix(&self.kbb_inv, &coords, &coords);
        let g_pre = self.predict_gaps(q_i, t);
        let c = DVector::from_fn(active.len(), |row, _| g_pre[active[row]]);
        Ok(DelassusSystem {
            g,
            c,
            active_set: active.to_vec(),
            coords_per_contact: 1,
        })
    }

    /// Assemble the frictional velocity-level Delassus system for an
    /// explicit active set, without solving it. Rows are scaled by `Δt`
    /// (cone-invariant), making `G` the boundary flexibility block.
    pub fn build_frictional_system(
        &mut self,
        q_b_prev: &DVector<f64>,
        q_i: &DVector<f64>,
        t: f64,
        dt: f64,
        active: &[usize],
    ) -> Result<DelassusSystem> {
        if active.is_empty() {
            return Err(Error::InvalidSpec("active set is empty".into()));
        }
        let coords = self.contact_coords(active);
        let g = linalg::submatrix(&self.kbb_inv, &coords, &coords);
        let s = self.force_free_position(q_i, t);
        let cpc = self.cpc;
        let c = DVector::from_fn(coords.len(), |row, _| {
            let coord = coords[row];
            let j = coord / cpc;
            let a = coord % cpc;
            if a == 0 {
                s[coord] + self.gap.g0_normal(t, j)
            } else {
                s[coord] - q_b_prev[coord] + dt * self.gap.g0dot_tangential(j)[a - 1]
            }
        });
        Ok(DelassusSystem {
            g,
            c,
            active_set: active.to_vec(),
            coords_per_contact: cpc,
        })
    }
}

/// Complementarity residuals of a frictionless solution: returns
/// `(min x, min (Gx+c), max |x·(Gx+c)|)`.
pub fn frictionless_residuals(
    g: &DMatrix<f64>,
    c: &DVector<f64>,
    x: &DVector<f64>,
) -> (f64, f64, f64) {
    let w = g * x + c;
    let mut min_x = f64::INFINITY;
    let mut min_w = f64::INFINITY;
    let mut max_prod = 0.0f64;
    for i in 0..x.len() {
        min_x = min_x.min(x[i]);
        min_w = min_w.min(w[i]);
        max_prod = max_prod.max((x[i] * w[i]).abs());
    }
    (min_x, min_w, max_prod)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cms::{self, ReductionMethod};
    use crate::model::{LoadSet, MeshSpec};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    #[test]
    fn halfline_projection_cases() {
        assert_eq!(proj_halfline(-1.0), 0.0);
        assert_eq!(proj_halfline(0.0), 0.0);
        assert_eq!(proj_halfline(2.5), 2.5);
    }

    #[test]
    fn disk_projection_cases() {
        assert_eq!(proj_disk([3.0, 4.0], 10.0).unwrap(), [3.0, 4.0]);
        let p = proj_disk([3.0, 4.0], 1.0).unwrap();
        assert_relative_eq!(p[0], 0.6, max_relative = 1e-15);
        assert_relative_eq!(p[1], 0.8, max_relative = 1e-15);
        assert_eq!(proj_disk([0.0, 0.0], 0.0).unwrap(), [0.0, 0.0]);
        assert!(proj_disk([1.0, 0.0], -0.1).is_err());
    }

    #[test]
    fn admissible_projection_cases() {
        // frictionless: negative normal components clipped
        let x = DVector::from_vec(vec![-2.0, 3.0]);
        let cones = vec![
            Cone { mu: 0.0, preload_n: 0.0 },
            Cone { mu: 0.0, preload_n: 0.0 },
        ];
        let mut y = x.clone();
        project_admissible(&mut y, &cones, 1);
        assert_eq!(y.as_slice(), &[0.0, 3.0]);

        // open contact with negative normal trial: whole force zeroed
        let cones = vec![Cone { mu: 0.5, preload_n: 0.0 }];
        let mut y = DVector::from_vec(vec![-2.0, 1.0, 0.0]);
        project_admissible(&mut y, &cones, 3);
        assert_eq!(y.as_slice(), &[0.0, 0.0, 0.0]);

        // disk radius from the just-projected normal force
        let mut y = DVector::from_vec(vec![4.0, 3.0, 4.0]);
        project_admissible(&mut y, &cones, 3);
        assert_relative_eq!(y[0], 4.0, max_relative = 1e-15);
        assert_relative_eq!(y[1], 1.2, max_relative = 1e-14);
        assert_relative_eq!(y[2], 1.6, max_relative = 1e-14);

        // mu = 0 with tangential coordinates: tangential output always zero
        let cones = vec![Cone { mu: 0.0, preload_n: 0.0 }];
        let mut y = DVector::from_vec(vec![4.0, 3.0, 4.0]);
        project_admissible(&mut y, &cones, 3);
        assert_eq!(y.as_slice(), &[4.0, 0.0, 0.0]);
    }

    #[test]
    fn scalar_lcp_by_hand() {
        // G = 2, c = -4: x >= 0, Gx + c >= 0, x (Gx + c) = 0 → x = 2
        let g = DMatrix::from_element(1, 1, 2.0);
        let c = DVector::from_element(1, -4.0);
        let cones = vec![Cone { mu: 0.0, preload_n: 0.0 }];
        let sol =
            solve_inclusion_auto(&g, &c, &cones, 1, &SolveOptions::default(), true, None).unwrap();
        assert_relative_eq!(sol.x[0], 2.0, max_relative = 1e-9);
    }

    #[test]
    fn separated_system_has_zero_force() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.5]);
        let c = DVector::from_vec(vec![0.5, 0.1]);
        let cones = vec![Cone { mu: 0.0, preload_n: 0.0 }; 2];
        let sol =
            solve_inclusion_auto(&g, &c, &cones, 1, &SolveOptions::default(), true, None).unwrap();
        assert!(sol.x.amax() <= 1e-12);
    }

    /// Brute-force frictionless LCP oracle: enumerate all active subsets.
    fn lcp_enumerate(g: &DMatrix<f64>, c: &DVector<f64>) -> Option<DVector<f64>> {
        let n = c.len();
        for mask in 0..(1usize << n) {
            let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let mut x = DVector::zeros(n);
            if !idx.is_empty() {
                let gs = crate::linalg::submatrix(g, &idx, &idx);
                let cs = DVector::from_fn(idx.len(), |r, _| -c[idx[r]]);
                let Some(xs) = gs.lu().solve(&cs) else { continue };
                for (r, &i) in idx.iter().enumerate() {
                    x[i] = xs[r];
                }
            }
            let w = g * &x + c;
            let feasible = (0..n).all(|i| x[i] >= -1e-10 && w[i] >= -1e-10);
            if feasible {
                return Some(x);
            }
        }
        None
    }

    fn random_spd(n: usize, rng: &mut impl rand::Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let q = a.qr().q();
        let mut lam = DMatrix::zeros(n, n);
        for i in 0..n {
            lam[(i, i)] = rng.random_range(0.5..2.0);
        }
        &q * lam * q.transpose()
    }

    #[test]
    fn three_contact_solver_matches_enumeration() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..50 {
            let n = 3;
            let g = random_spd(n, &mut rng);
            let c = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let cones = vec![Cone { mu: 0.0, preload_n: 0.0 }; n];
            let sol = solve_inclusion_auto(&g, &c, &cones, 1, &SolveOptions::default(), true, None)
                .unwrap();
            let oracle = lcp_enumerate(&g, &c).expect("oracle found no solution");
            assert!(
                (sol.x.clone() - oracle).amax() < 1e-8,
                "solver/oracle mismatch"
            );
        }
    }

    #[test]
    fn jacobi_iterates_are_permutation_equivariant() {
        // permuting the contact order permutes the converged solution
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.4, 0.1, 0.4, 1.8, 0.3, 0.1, 0.3, 2.2]);
        let c = DVector::from_vec(vec![-1.0, 0.5, -0.7]);
        let cones = vec![Cone { mu: 0.0, preload_n: 0.0 }; 3];
        let perm = [2usize, 0, 1];
        let gp = DMatrix::from_fn(3, 3, |i, j| g[(perm[i], perm[j])]);
        let cp = DVector::from_fn(3, |i, _| c[perm[i]]);
        let opts = SolveOptions::default();
        let sol = solve_inclusion_auto(&g, &c, &cones, 1, &opts, true, None).unwrap();
        let solp = solve_inclusion_auto(&gp, &cp, &cones, 1, &opts, true, None).unwrap();
        for i in 0..3 {
            assert_relative_eq!(solp.x[i], sol.x[perm[i]], max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    fn bar_reduced(f_b: f64) -> crate::cms::ReducedModel {
        let mut model = MeshSpec::Bar1d {
            n_elems: 60,
            length: 10.0,
            density: 1.0,
            youngs_modulus: 900.0,
        }
        .assemble()
        .unwrap()
        .clamp_dofs(&[60])
        .unwrap();
        if f_b != 0.0 {
            let mut f = DVector::zeros(model.n_dofs());
            f[0] = f_b;
            model.load = LoadSet::constant(f);
        }
        cms::reduce(&model, ReductionMethod::MasslessCraigBampton, 10, None).unwrap()
    }

    #[test]
    fn frictionless_system_open_gap() {
        // positive gap offset, no load: c > 0, prediction leaves it open
        let red = bar_reduced(0.0);
        let cfg = ContactConfig::frictionless(
            vec![ContactPoint::open(0.0)],
            GapMotion::constant(vec![0.25]),
        )
        .unwrap();
        let mut ops = MasslessBoundary::new(&red, &cfg).unwrap();
        let q_i = DVector::zeros(red.n_inner());
        let sys = ops.build_frictionless_system(&q_i, 0.0, &[0]).unwrap();
        assert!(sys.c[0] > 0.0);
        assert!(ops.predict_active_open(&q_i, 0.0).is_empty());
    }

    #[test]
    fn frictionless_pressed_bar_static_equilibrium() {
        // bar pressed onto the ground with boundary force -F: λ = F, q_b = 0
        let force = 3.5;
        let red = bar_reduced(-force);
        let cfg = ContactConfig::frictionless(
            vec![ContactPoint::open(0.0)],
            GapMotion::constant(vec![0.0]),
        )
        .unwrap();
        let mut ops = MasslessBoundary::new(&red, &cfg).unwrap();
        let q_i = DVector::zeros(red.n_inner());
        let set = ops.classify(&DVector::zeros(1), &q_i, 0.0);
        assert_eq!(set.active, vec![0]);
        let sol = ops
            .solve_frictionless(&q_i, 0.0, &set, &SolveOptions::default(), None)
            .unwrap();
        assert_relative_eq!(sol.lambda[0], force, max_relative = 1e-9);
        assert!(sol.q_b[0].abs() < 1e-12);
        assert!(sol.residual < 1e-9, "balance residual {}", sol.residual);
    }

    #[test]
    fn stuck_preloaded_contact_is_noniterative() {
        // preloaded contact under constant pressing force: prediction keeps
        // it inactive, the step is non-iterative, λ matches the prediction
        let mut model = MeshSpec::Bar1d {
            n_elems: 40,
            length: 10.0,
            density: 1.0,
            youngs_modulus: 900.0,
        }
        .assemble()
        .unwrap()
        .clamp_dofs(&[40])
        .unwrap();
        let mut f = DVector::zeros(model.n_dofs());
        f[0] = -2.0;
        model.load = LoadSet::constant(f);
        let red = cms::reduce(&model, ReductionMethod::MasslessCraigBampton, 8, None).unwrap();
        let cfg = ContactConfig::frictionless(
            vec![ContactPoint::preloaded(0.0, 1.0)],
            GapMotion::constant(vec![0.0]),
        )
        .unwrap();
        let mut ops = MasslessBoundary::new(&red, &cfg).unwrap();
        let q_i = DVector::zeros(red.n_inner());
        let q_b_prev = DVector::zeros(1);
        let lam_pre = ops.predict_forces(&q_b_prev, &q_i, 0.0);
        assert_relative_eq!(lam_pre[0], 2.0, max_relative = 1e-12);
        let set = ops.classify(&q_b_prev, &q_i, 0.0);
        assert!(set.active.is_empty());
        assert_eq!(set.stuck, vec![0]);
        let sol = ops
            .solve_frictionless(&q_i, 0.0, &set, &SolveOptions::default(), None)
            .unwrap();
        assert_eq!(sol.iterations, 0);
        assert_relative_eq!(sol.lambda[0], 2.0, max_relative = 1e-9);
        assert!(sol.residual < 1e-9);
    }

    #[test]
    fn preloaded_prediction_cases() {
        let red = bar_reduced(0.0);
        let cfg = ContactConfig::frictionless(
            vec![ContactPoint::preloaded(0.0, 0.5)],
            GapMotion::constant(vec![0.0]),
        )
        .unwrap();
        let ops = MasslessBoundary::new(&red, &cfg).unwrap();
        let q_i = DVector::zeros(red.n_inner());
        // zero motion, zero load, positive preload: stays stuck
        assert!(ops
            .predict_active_preloaded(&DVector::zeros(1), &q_i, 0.0)
            .is_empty());
        // normal pull (boundary displaced upward) stronger than the preload
        let q_pull = DVector::from_element(1, -0.1);
        let lam = ops.predict_forces(&q_pull, &q_i, 0.0);
        assert!(lam[0] + 0.5 <= 0.0);
        assert_eq!(ops.predict_active_preloaded(&q_pull, &q_i, 0.0), vec![0]);
    }

    /// Cantilever hex column with one frictional tip contact (normal -z).
    fn frictional_tip_model() -> crate::cms::ReducedModel {
        let mut model = MeshSpec::Hex8 {
            n: [1, 1, 2],
            dims: [0.02, 0.02, 0.1],
            density: 8000.0,
            youngs_modulus: 2.0e11,
            poisson: 0.3,
        }
        .assemble()
        .unwrap();
        let clamped = model.dofs_where(|p, _| p[2] < 1e-12);
        model = model.clamp_dofs(&clamped).unwrap();
        let tip = model.dofs_where(|p, _| (p[2] - 0.1).abs() < 1e-9);
        model.boundary_dofs = tip[..3].to_vec();
        let mut w = DMatrix::zeros(3, 3);
        w[(2, 0)] = -1.0; // normal opposes +z extension
        w[(0, 1)] = 1.0;
        w[(1, 2)] = 1.0;
        cms::build_reduced(&model, &w, ReductionMethod::MasslessCraigBampton, 6, None).unwrap()
    }

    #[test]
    fn tangential_trial_force_outside_cone_activates() {
        let red = frictional_tip_model();
        let cfg = ContactConfig::frictional(
            vec![ContactPoint::preloaded(0.3, 50.0)],
            GapMotion {
                normal: NormalGap::Constant(vec![0.0]),
                tangential_rate: vec![[0.0, 0.0]],
            },
        )
        .unwrap();
        let ops = MasslessBoundary::new(&red, &cfg).unwrap();
        let q_i = DVector::zeros(red.n_inner());
        let mut q_prev = DVector::zeros(3);
        assert!(ops.predict_active_preloaded(&q_prev, &q_i, 0.0).is_empty());
        // large tangential offset: trial force leaves the Coulomb cone
        q_prev[1] = 1.0e-3;
        assert_eq!(ops.predict_active_preloaded(&q_prev, &q_i, 0.0), vec![0]);
    }

    #[test]
    fn frictional_system_mu_zero_matches_frictionless_normal_rows() {
        let red = frictional_tip_model();
        let cfg = ContactConfig::frictional(
            vec![ContactPoint::open(0.0)],
            GapMotion {
                normal: NormalGap::Constant(vec![1e-5]),
                tangential_rate: vec![[0.0, 0.0]],
            },
        )
        .unwrap();
        let mut ops = MasslessBoundary::new(&red, &cfg).unwrap();
        let q_i = DVector::from_fn(red.n_inner(), |i, _| 1e-5 * (i as f64 + 1.0));
        let q_prev = DVector::zeros(3);
        let dt = 1e-5;
        let sys = ops
            .build_frictional_system(&q_prev, &q_i, 0.0, dt, &[0])
            .unwrap();
        // G is the boundary flexibility block: symmetric positive definite
        assert!(crate::linalg::asymmetry(&sys.g) < 1e-12);
        assert!(crate::linalg::cholesky(&sys.g, "G").is_ok());
        // the normal row reproduces the displacement-level prediction
        let g_pre = ops.predict_gaps(&q_i, 0.0);
        assert_relative_eq!(sys.c[0], g_pre[0], max_relative = 1e-12);
    }

    #[test]
    fn mixed_coupled_interfaces_use_conservative_classification() {
        // two contacts on the same (coupled) boundary with different modes
        let mut model = MeshSpec::Bar1d {
            n_elems: 30,
            length: 3.0,
            density: 2.0,
            youngs_modulus: 500.0,
        }
        .assemble()
        .unwrap()
        .clamp_dofs(&[30])
        .unwrap();
        model.boundary_dofs = vec![0, 1];
        let red = cms::reduce(&model, ReductionMethod::MasslessCraigBampton, 5, None).unwrap();
        let cfg = ContactConfig::frictionless(
            vec![ContactPoint::open(0.0), ContactPoint::preloaded(0.0, 1.0)],
            GapMotion::constant(vec![1.0, 0.0]),
        )
        .unwrap();
        let ops = MasslessBoundary::new(&red, &cfg).unwrap();
        let set = ops.classify(&DVector::zeros(2), &DVector::zeros(red.n_inner()), 0.0);
        assert_eq!(set.active, vec![0, 1]);
    }

    #[test]
    fn frictional_solver_satisfies_coulomb_cone() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let g = random_spd(3, &mut rng);
            let c = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
            let mu = rng.random_range(0.0..1.0);
            let preload = if rng.random_bool(0.5) {
                rng.random_range(0.0..1.0)
            } else {
                0.0
            };
            let cones = vec![Cone { mu, preload_n: preload }];
            let sol =
                solve_inclusion_auto(&g, &c, &cones, 3, &SolveOptions::default(), true, None)
                    .unwrap();
            let x = &sol.x;
            let w = &g * x + &c;
            let scale = c.amax().max(x.amax()).max(1.0);
            assert!(x[0] >= 0.0);
            assert!(w[0] >= -1e-8 * scale);
            assert!((x[0] * w[0]).abs() <= 1e-8 * scale * scale);
            let r = mu * (x[0] + preload);
            let lt = (x[1] * x[1] + x[2] * x[2]).sqrt();
            assert!(lt <= r + 1e-8 * scale);
            let gt = (w[1] * w[1] + w[2] * w[2]).sqrt();
            if lt < r - 1e-8 * scale {
                assert!(gt <= 1e-7 * scale, "sticking contact must not slip");
            } else if gt > 1e-9 * scale && lt > 1e-9 * scale {
                let cosang = -(w[1] * x[1] + w[2] * x[2]) / (gt * lt);
                assert!(cosang > 1.0 - 1e-6, "slip not anti-parallel: cos = {cosang}");
            }
        }
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(
            xn in -5.0f64..5.0,
            t1 in -5.0f64..5.0,
            t2 in -5.0f64..5.0,
            mu in 0.0f64..2.0,
            pre in 0.0f64..2.0,
        ) {
            let cones = vec![Cone { mu, preload_n: pre }];
            let mut x = DVector::from_vec(vec![xn, t1, t2]);
            project_admissible(&mut x, &cones, 3);
            let once = x.clone();
            project_admissible(&mut x, &cones, 3);
            prop_assert_eq!(x, once);
        }

        #[test]
        fn disk_projection_is_nonexpansive(
            a1 in -5.0f64..5.0, a2 in -5.0f64..5.0,
            b1 in -5.0f64..5.0, b2 in -5.0f64..5.0,
            r in 0.0f64..3.0,
        ) {
            let pa = proj_disk([a1, a2], r).unwrap();
            let pb = proj_disk([b1, b2], r).unwrap();
            let d_in = ((a1 - b1).powi(2) + (a2 - b2).powi(2)).sqrt();
            let d_out = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
            prop_assert!(d_out <= d_in + 1e-12);
        }

        #[test]
        fn converged_frictionless_solutions_satisfy_complementarity(
            seed in 0u64..200,
        ) {
            use rand::rngs::StdRng;
            use rand::{Rng, SeedableRng};
            let mut rng = StdRng::seed_from_u64(seed);
            let n = rng.random_range(1..=4usize);
            let g = random_spd(n, &mut rng);
            let c = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let cones = vec![Cone { mu: 0.0, preload_n: 0.0 }; n];
            let sol = solve_inclusion_auto(&g, &c, &cones, 1, &SolveOptions::default(), true, None)
                .unwrap();
            let (min_x, min_w, max_prod) = frictionless_residuals(&g, &c, &sol.x);
            let scale = c.amax().max(1.0);
            prop_assert!(min_x >= 0.0);
            prop_assert!(min_w >= -1e-8 * scale);
            prop_assert!(max_prod <= 1e-8 * scale * scale);
        }
    }
}
