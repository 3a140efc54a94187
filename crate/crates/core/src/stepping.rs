//! Time integration.
//!
//! Two families of steppers on the staggered (leapfrog) grid, where the
//! velocity time levels sit mid-way between the coordinate time levels:
//!
//! * [`LeapfrogStepper`] for massless-boundary reduced models. The boundary
//!   force balance is a static contact problem solved implicitly per step
//!   (displacement level when frictionless, velocity level with friction);
//!   the inner coordinates advance explicitly. Symplectic and
//!   time-reversible under fixed contact status, second-order accurate.
//! * [`MoreauStepper`]: the symmetric Moreau scheme for mass-carrying
//!   models, with contact percussions and Newton restitution. Serves as the
//!   conventional reference; it rejects massless models (their Delassus
//!   operator is singular).
//!
//! [`simulate`] drives either stepper and records a [`TimeSeries`].

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::cms::ReducedModel;
use crate::contact::{
    solve_inclusion_auto, Cone, ContactConfig, MasslessBoundary, SolveOptions,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::LoadSet;

/// State of a massless-boundary leapfrog integration.
#[derive(Clone, Debug)]
pub struct StaggeredState {
    /// Step index (the state describes time level `k`).
    pub k: usize,
    /// Time of level `k` (s).
    pub t: f64,
    /// Reduced coordinates `[q_b; q_i]` at level `k`; the boundary part is
    /// the result of the last contact solve.
    pub q: DVector<f64>,
    /// Inner velocities at the shifted level `k − ½` (boundary entries are
    /// kept as finite differences of `q_b` for diagnostics).
    pub u_half: DVector<f64>,
    /// Boundary displacements of the previous level (needed by the
    /// frictional stepping rule).
    pub q_b_prev: DVector<f64>,
    /// Contact forces of the last solved level.
    pub lambda: DVector<f64>,
}

/// State of a Moreau (mass-carrying) integration.
#[derive(Clone, Debug)]
pub struct MoreauState {
    pub k: usize,
    pub t: f64,
    /// Reduced coordinates at level `k`.
    pub q: DVector<f64>,
    /// Velocities at level `k − ½`.
    pub u_half: DVector<f64>,
    /// Contact percussions of the last step (N·s).
    pub dp: DVector<f64>,
}

/// Initial conditions `q(t₁)`, `u(t₁)` in reduced coordinates.
#[derive(Clone, Debug)]
pub struct InitialConditions {
    pub q: DVector<f64>,
    pub u: DVector<f64>,
}

/// Build the staggered initial state with the half-grid approximation
/// `u^{½} := u(t₁)` and `q_b⁰ := q_b(t₁)`; exact for rest or
/// constant-velocity starts.
pub fn initialize(ic: &InitialConditions, n_boundary: usize, t_start: f64) -> StaggeredState {
    StaggeredState {
        k: 1,
        t: t_start,
        q: ic.q.clone(),
        u_half: ic.u.clone(),
        q_b_prev: ic.q.rows(0, n_boundary).into_owned(),
        lambda: DVector::zeros(n_boundary),
    }
}

/// Everything recorded about one accepted time level.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub t: f64,
    /// Reduced coordinates at the level.
    pub q: DVector<f64>,
    /// Velocities at the level (trapezoidal average of the half levels;
    /// boundary entries are backward differences of `q_b`).
    pub u: DVector<f64>,
    /// Stacked contact forces (percussion rate `ΔP/Δt` for Moreau).
    pub lambda: DVector<f64>,
    pub n_active: usize,
    pub solver_iters: usize,
    /// Relative residual of the boundary force balance.
    pub residual: f64,
}

/// Inner-update operator `(M_ii/Δt + D_ii/2) u⁺ = (M_ii/Δt − D_ii/2) u⁻ + h`,
/// specialised for diagonal damping (the usual modal case, fully explicit).
enum InnerUpdate {
    Diagonal {
        s_plus: DVector<f64>,
        s_minus: DVector<f64>,
    },
    Dense {
        s_plus: Cholesky<f64, Dyn>,
        s_minus: DMatrix<f64>,
    },
}

impl InnerUpdate {
    fn new(m_ii: &DMatrix<f64>, d_ii: &DMatrix<f64>, dt: f64) -> Result<Self> {
        let n = m_ii.nrows();
        let diag_only = {
            let mut ok = true;
            'scan: for i in 0..n {
                for j in 0..n {
                    if i != j && (m_ii[(i, j)] != 0.0 || d_ii[(i, j)] != 0.0) {
                        ok = false;
                        break 'scan;
                    }
                }
            }
            ok
        };
        if diag_only {
            let mut s_plus = DVector::zeros(n);
            let mut s_minus = DVector::zeros(n);
            for i in 0..n {
                s_plus[i] = m_ii[(i, i)] / dt + 0.5 * d_ii[(i, i)];
                s_minus[i] = m_ii[(i, i)] / dt - 0.5 * d_ii[(i, i)];
                if s_plus[i] <= 0.0 {
                    return Err(Error::SingularMatrix(
                        "inner update operator is not positive".into(),
                    ));
                }
            }
            Ok(InnerUpdate::Diagonal { s_plus, s_minus })
        } else {
            let s_plus_mat = m_ii / dt + d_ii * 0.5;
            let s_minus = m_ii / dt - d_ii * 0.5;
            let chol = linalg::cholesky(&s_plus_mat, "inner update operator M/Δt + D/2")?;
            Ok(InnerUpdate::Dense {
                s_plus: chol,
                s_minus,
            })
        }
    }

    /// `u⁺` from `u⁻` and the stiffness/load term `h`.
    fn advance(&self, u_minus: &DVector<f64>, h: &DVector<f64>) -> DVector<f64> {
        match self {
            InnerUpdate::Diagonal { s_plus, s_minus } => DVector::from_fn(h.len(), |i, _| {
                (s_minus[i] * u_minus[i] + h[i]) / s_plus[i]
            }),
            InnerUpdate::Dense { s_plus, s_minus } => s_plus.solve(&(s_minus * u_minus + h)),
        }
    }
}

/// Leapfrog stepper for massless-boundary reduced models.
pub struct LeapfrogStepper {
    boundary: MasslessBoundary,
    kib: DMatrix<f64>,
    kii: DMatrix<f64>,
    inner: InnerUpdate,
    load: LoadSet,
    frictional: bool,
    pub solver: SolveOptions,
    dt: f64,
    n_boundary: usize,
    n_inner: usize,
    n_red: usize,
}

impl LeapfrogStepper {
    /// `frictional` selects the velocity-level stepping rule (required when
    /// the configuration carries tangential coordinates).
    pub fn new(
        model: &ReducedModel,
        cfg: &ContactConfig,
        frictional: bool,
        dt: f64,
        solver: SolveOptions,
    ) -> Result<Self> {
        if !model.massless {
            return Err(Error::InvalidSpec(
                "the leapfrog contact stepper requires a massless-boundary model".into(),
            ));
        }
        if dt <= 0.0 {
            return Err(Error::InvalidSpec("time step must be > 0".into()));
        }
        if !frictional {
            if cfg.tangential {
                return Err(Error::InvalidSpec(
                    "frictionless stepping cannot handle tangential coordinates".into(),
                ));
            }
            if cfg.points.iter().any(|p| p.mu != 0.0) {
                return Err(Error::InvalidSpec(
                    "frictionless stepping requires mu = 0 on every contact".into(),
                ));
            }
        }
        let boundary = MasslessBoundary::new(model, cfg)?;
        let inner = InnerUpdate::new(&model.m_ii(), &model.d_ii(), dt)?;
        Ok(LeapfrogStepper {
            boundary,
            kib: model.k_bi().transpose(),
            kii: model.k_ii(),
            inner,
            load: model.load.clone(),
            frictional,
            solver,
            dt,
            n_boundary: model.n_boundary,
            n_inner: model.n_inner(),
            n_red: model.n_red(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advance one step: solve the boundary contact problem at `state.t`,
    /// update the inner velocities and coordinates, shift the state to the
    /// next level. Returns the record of the solved level.
    pub fn step(&mut self, state: &mut StaggeredState) -> Result<StepRecord> {
        let b = self.n_boundary;
        let t = state.t;
        let q_i = state.q.rows(b, self.n_inner).into_owned();
        let u_minus = state.u_half.rows(b, self.n_inner).into_owned();

        let set = self.boundary.classify(&state.q_b_prev, &q_i, t);
        let sol = if self.frictional {
            self.boundary.solve_frictional(
                &state.q_b_prev,
                &q_i,
                t,
                self.dt,
                &set,
                &self.solver,
                Some(&state.lambda),
            )
        } else {
            self.boundary
                .solve_frictionless(&q_i, t, &set, &self.solver, Some(&state.lambda))
        }
        .map_err(|e| match e {
            Error::NonConvergence {
                iterations,
                residual,
                context,
            } => Error::NonConvergence {
                iterations,
                residual,
                context: format!("{context} (step {}, t = {:.6e})", state.k, t),
            },
            other => other,
        })?;

        // inner explicit update at t^k with the trapezoidal velocity average
        let f = self.load.eval(t, self.n_red);
        let f_i = f.rows(b, self.n_inner).into_owned();
        let h = &f_i - &self.kii * &q_i - &self.kib * &sol.q_b;
        let u_plus = self.inner.advance(&u_minus, &h);

        for j in 0..b {
            state.q[j] = sol.q_b[j];
        }
        let mut u_mid = DVector::zeros(self.n_red);
        for j in 0..b {
            u_mid[j] = (sol.q_b[j] - state.q_b_prev[j]) / self.dt;
        }
        for i in 0..self.n_inner {
            u_mid[b + i] = 0.5 * (u_minus[i] + u_plus[i]);
        }
        let record = StepRecord {
            t,
            q: state.q.clone(),
            u: u_mid,
            lambda: sol.lambda.clone(),
            n_active: sol.active.active.len(),
            solver_iters: sol.iterations,
            residual: sol.residual,
        };

        // shift to level k+1
        for i in 0..self.n_inner {
            state.q[b + i] += self.dt * u_plus[i];
            state.u_half[b + i] = u_plus[i];
        }
        for j in 0..b {
            state.u_half[j] = (sol.q_b[j] - state.q_b_prev[j]) / self.dt;
        }
        state.q_b_prev = sol.q_b;
        state.lambda = sol.lambda;
        state.t += self.dt;
        state.k += 1;
        Ok(record)
    }
}

/// Symmetric Moreau stepper for mass-carrying reduced models.
pub struct MoreauStepper {
    a_chol: Cholesky<f64, Dyn>,
    a_minus: DMatrix<f64>,
    ktil: DMatrix<f64>,
    /// Columns of `A⁻¹` at the boundary coordinates (`A = M + Δt/2 D`).
    x_cols: DMatrix<f64>,
    /// Delassus operator on all boundary coordinates, `Wᵀ A⁻¹ W`.
    g_full: DMatrix<f64>,
    load: LoadSet,
    cfg: ContactConfig,
    pub solver: SolveOptions,
    dt: f64,
    n_boundary: usize,
    n_red: usize,
}

impl MoreauStepper {
    pub fn new(
        model: &ReducedModel,
        cfg: &ContactConfig,
        dt: f64,
        solver: SolveOptions,
    ) -> Result<Self> {
        if model.massless {
            return Err(Error::InvalidSpec(
                "the Moreau stepper is not applicable to massless boundary models \
                 (singular Delassus operator); use the leapfrog contact stepper"
                    .into(),
            ));
        }
        if dt <= 0.0 {
            return Err(Error::InvalidSpec("time step must be > 0".into()));
        }
        if cfg.n_coords() != model.n_boundary {
            return Err(Error::Dimension(format!(
                "contact configuration has {} coordinates but the model boundary has {}",
                cfg.n_coords(),
                model.n_boundary
            )));
        }
        let a = &model.mtil + &model.dtil * (0.5 * dt);
        let a_chol = linalg::cholesky(&a, "M + Δt/2 D")?;
        let a_minus = &model.mtil - &model.dtil * (0.5 * dt);
        let b = model.n_boundary;
        let n = model.n_red();
        let mut e = DMatrix::zeros(n, b);
        for j in 0..b {
            e[(j, j)] = 1.0;
        }
        let x_cols = a_chol.solve(&e);
        let mut g_full = x_cols.rows(0, b).into_owned();
        linalg::symmetrize(&mut g_full);
        Ok(MoreauStepper {
            a_chol,
            a_minus,
            ktil: model.ktil.clone(),
            x_cols,
            g_full,
            load: model.load.clone(),
            cfg: cfg.clone(),
            solver,
            dt,
            n_boundary: b,
            n_red: n,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn g0dot_stack(&self, t: f64) -> DVector<f64> {
        let cpc = self.cfg.coords_per_contact();
        DVector::from_fn(self.n_boundary, |c, _| {
            let j = c / cpc;
            let a = c % cpc;
            if a == 0 {
                self.cfg.gap.g0dot_normal(t, j)
            } else {
                self.cfg.gap.g0dot_tangential(j)[a - 1]
            }
        })
    }

    /// Advance one step; returns the record of the solved level.
    pub fn step(&mut self, state: &mut MoreauState) -> Result<StepRecord> {
        let t = state.t;
        let b = self.n_boundary;
        let cpc = self.cfg.coords_per_contact();

        // active set from the normal gaps at t^k
        let active: Vec<usize> = (0..self.cfg.n_contacts())
            .filter(|&j| state.q[j * cpc] + self.cfg.gap.g0_normal(t, j) <= 0.0)
            .collect();

        let f = self.load.eval(t, self.n_red);
        let u_free = self
            .a_chol
            .solve(&(&self.a_minus * &state.u_half + (&f - &self.ktil * &state.q) * self.dt));

        let mut dp = DVector::zeros(b);
        let mut iterations = 0usize;
        let u_plus = if active.is_empty() {
            u_free
        } else {
            let coords: Vec<usize> = active
                .iter()
                .flat_map(|&j| (0..cpc).map(move |a| j * cpc + a))
                .collect();
            let g = linalg::submatrix(&self.g_full, &coords, &coords);
            let g0dot = self.g0dot_stack(t);
            let mut c = DVector::zeros(coords.len());
            for (row, &coord) in coords.iter().enumerate() {
                let j = coord / cpc;
                let a = coord % cpc;
                let eps = if a == 0 {
                    self.cfg.points[j].restitution_n
                } else {
                    self.cfg.points[j].restitution_t
                };
                let gamma_free = u_free[coord] + g0dot[coord];
                let gamma_minus = state.u_half[coord] + g0dot[coord];
                c[row] = gamma_free + eps * gamma_minus;
            }
            let cones: Vec<Cone> = self.cfg.cones(&active);
            let sol = solve_inclusion_auto(&g, &c, &cones, cpc, &self.solver, false, None)
                .map_err(|e| match e {
                    Error::NonConvergence {
                        iterations,
                        residual,
                        context,
                    } => Error::NonConvergence {
                        iterations,
                        residual,
                        context: format!("{context} (step {}, t = {:.6e})", state.k, t),
                    },
                    other => other,
                })?;
            iterations = sol.iterations;
            let mut u = u_free;
            for (row, &coord) in coords.iter().enumerate() {
                dp[coord] = sol.x[row];
                u += self.x_cols.column(coord) * sol.x[row];
            }
            u
        };

        let u_mid = (&state.u_half + &u_plus) * 0.5;
        let record = StepRecord {
            t,
            q: state.q.clone(),
            u: u_mid,
            lambda: &dp / self.dt,
            n_active: active.len(),
            solver_iters: iterations,
            residual: 0.0,
        };

        state.q += &u_plus * self.dt;
        state.u_half = u_plus;
        state.dp = dp;
        state.t += self.dt;
        state.k += 1;
        Ok(record)
    }
}

/// Integrator selector for [`simulate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrator {
    LeapfrogFrictionless,
    LeapfrogFrictional,
    Moreau,
}

/// Energy callback `(q, u) → (E_tot, E_rb, E_el)` evaluated per record.
pub type EnergyFn = Box<dyn Fn(&DVector<f64>, &DVector<f64>) -> (f64, f64, f64) + Send + Sync>;

/// Linear observation of the full displacement field, `value = rowᵀ q̃`.
#[derive(Clone, Debug)]
pub struct Probe {
    pub name: String,
    pub row: DVector<f64>,
}

impl Probe {
    /// Probe a full-model DOF through the reduction basis.
    pub fn full_dof(model: &ReducedModel, dof: usize, name: impl Into<String>) -> Self {
        Probe {
            name: name.into(),
            row: model.r.row(dof).transpose(),
        }
    }

    /// Probe a reduced coordinate directly.
    pub fn reduced_coord(n_red: usize, coord: usize, name: impl Into<String>) -> Self {
        let mut row = DVector::zeros(n_red);
        row[coord] = 1.0;
        Probe {
            name: name.into(),
            row,
        }
    }
}

/// Simulation options.
pub struct SimOptions {
    pub dt: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Record every `stride`-th accepted level (the first level is always
    /// recorded).
    pub stride: usize,
    /// Sub-stepped warm start: the first coarse interval is integrated with
    /// `n_warm` sub-steps to reduce the half-grid initialization error.
    pub n_warm: usize,
    pub solver: SolveOptions,
    pub probes: Vec<Probe>,
    pub energy: Option<EnergyFn>,
    /// Divergence guard: abort when `‖u‖_∞` exceeds this factor times the
    /// initial velocity scale (floored at 1).
    pub divergence_factor: f64,
}

impl SimOptions {
    pub fn new(dt: f64, t_start: f64, t_end: f64) -> Self {
        SimOptions {
            dt,
            t_start,
            t_end,
            stride: 1,
            n_warm: 0,
            solver: SolveOptions::default(),
            probes: Vec::new(),
            energy: None,
            divergence_factor: 1e8,
        }
    }
}

/// One stored output row.
#[derive(Clone, Debug)]
pub struct Record {
    pub t: f64,
    pub q_b: Vec<f64>,
    pub probes_q: Vec<f64>,
    pub probes_u: Vec<f64>,
    pub lambda: Vec<f64>,
    pub e_tot: f64,
    pub e_rb: f64,
    pub e_el: f64,
    pub n_active: usize,
    pub solver_iters: usize,
    pub residual: f64,
}

/// Recorded simulation output.
#[derive(Clone, Debug, Default)]
pub struct TimeSeries {
    pub records: Vec<Record>,
    pub n_boundary: usize,
    pub probe_names: Vec<String>,
    pub dt: f64,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Column of probe values by probe index.
    pub fn probe_q(&self, idx: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.probes_q[idx]).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }
}

enum AnyStepper {
    Leapfrog(LeapfrogStepper),
    Moreau(MoreauStepper),
}

enum AnyState {
    Leapfrog(StaggeredState),
    Moreau(MoreauState),
}

impl AnyStepper {
    fn step(&mut self, state: &mut AnyState) -> Result<StepRecord> {
        match (self, state) {
            (AnyStepper::Leapfrog(s), AnyState::Leapfrog(st)) => s.step(st),
            (AnyStepper::Moreau(s), AnyState::Moreau(st)) => s.step(st),
            _ => unreachable!("stepper/state mismatch"),
        }
    }
}

/// Run a full simulation and record the results.
///
/// The run covers `t ∈ [t_start, t_end]` on a uniform grid; records are
/// taken at every `stride`-th solved level, always including `t_start`. A
/// non-finite state or a velocity blow-up aborts with a divergence error
/// carrying the step index.
pub fn simulate(
    model: &ReducedModel,
    cfg: &ContactConfig,
    integrator: Integrator,
    opts: &SimOptions,
    ic: &InitialConditions,
) -> Result<TimeSeries> {
    if ic.q.len() != model.n_red() || ic.u.len() != model.n_red() {
        return Err(Error::Dimension(
            "initial conditions must match the reduced dimension".into(),
        ));
    }
    if opts.t_end < opts.t_start {
        return Err(Error::InvalidSpec("t_end must be >= t_start".into()));
    }
    let dt = opts.dt;
    let n_steps = ((opts.t_end - opts.t_start) / dt).round() as usize;

    let mut stepper = match integrator {
        Integrator::LeapfrogFrictionless => AnyStepper::Leapfrog(LeapfrogStepper::new(
            model,
            cfg,
            false,
            dt,
            opts.solver,
        )?),
        Integrator::LeapfrogFrictional => AnyStepper::Leapfrog(LeapfrogStepper::new(
            model,
            cfg,
            true,
            dt,
            opts.solver,
        )?),
        Integrator::Moreau => {
            AnyStepper::Moreau(MoreauStepper::new(model, cfg, dt, opts.solver)?)
        }
    };
    let mut state = match integrator {
        Integrator::Moreau => AnyState::Moreau(MoreauState {
            k: 1,
            t: opts.t_start,
            q: ic.q.clone(),
            u_half: ic.u.clone(),
            dp: DVector::zeros(model.n_boundary),
        }),
        _ => AnyState::Leapfrog(initialize(ic, model.n_boundary, opts.t_start)),
    };

    let u_scale = ic.u.amax().max(1.0);
    let u_limit = opts.divergence_factor * u_scale;

    let mut series = TimeSeries {
        records: Vec::with_capacity(n_steps / opts.stride.max(1) + 2),
        n_boundary: model.n_boundary,
        probe_names: opts.probes.iter().map(|p| p.name.clone()).collect(),
        dt,
    };

    // warm start: integrate the first coarse interval with fine sub-steps,
    // recording only the first level
    let mut k0 = 0usize;
    if opts.n_warm > 1 && n_steps > 0 {
        let fine = match integrator {
            Integrator::LeapfrogFrictionless => AnyStepper::Leapfrog(LeapfrogStepper::new(
                model,
                cfg,
                false,
                dt / opts.n_warm as f64,
                opts.solver,
            )?),
            Integrator::LeapfrogFrictional => AnyStepper::Leapfrog(LeapfrogStepper::new(
                model,
                cfg,
                true,
                dt / opts.n_warm as f64,
                opts.solver,
            )?),
            Integrator::Moreau => AnyStepper::Moreau(MoreauStepper::new(
                model,
                cfg,
                dt / opts.n_warm as f64,
                opts.solver,
            )?),
        };
        let mut fine = fine;
        // advance the coordinates to t_start + dt, keeping the velocity of
        // the middle of the interval so the state re-aligns with the coarse
        // staggered grid (u half a coarse step behind q)
        let mid = opts.n_warm.div_ceil(2);
        let mut u_mid: Option<DVector<f64>> = None;
        for s in 0..opts.n_warm {
            let rec = fine.step(&mut state)?;
            if s == 0 {
                push_record(&mut series, &rec, opts, model)?;
            }
            if s + 1 == mid {
                if let AnyState::Leapfrog(st) = &state {
                    u_mid = Some(st.u_half.clone());
                } else if let AnyState::Moreau(st) = &state {
                    u_mid = Some(st.u_half.clone());
                }
            }
        }
        match (&mut state, u_mid) {
            (AnyState::Leapfrog(st), Some(u)) => st.u_half = u,
            (AnyState::Moreau(st), Some(u)) => st.u_half = u,
            _ => {}
        }
        // continue on the coarse grid from t_start + dt
        k0 = 1;
    }

    for k in k0..=n_steps {
        let rec = stepper.step(&mut state).map_err(|e| attach_step(e, k))?;
        check_divergence(&rec, u_limit, k)?;
        if k % opts.stride.max(1) == 0 || k == n_steps {
            push_record(&mut series, &rec, opts, model)?;
        }
    }
    Ok(series)
}

fn attach_step(e: Error, k: usize) -> Error {
    match e {
        Error::NonConvergence {
            iterations,
            residual,
            context,
        } => Error::NonConvergence {
            iterations,
            residual,
            context: format!("{context} [step {k}]"),
        },
        other => other,
    }
}

fn check_divergence(rec: &StepRecord, u_limit: f64, step: usize) -> Result<()> {
    let finite = rec.q.iter().all(|v| v.is_finite()) && rec.u.iter().all(|v| v.is_finite());
    if !finite {
        return Err(Error::Divergence {
            step,
            time: rec.t,
            detail: "non-finite state entry".into(),
        });
    }
    let umax = rec.u.amax();
    if umax > u_limit {
        return Err(Error::Divergence {
            step,
            time: rec.t,
            detail: format!("velocity magnitude {umax:.3e} exceeds the stability guard"),
        });
    }
    Ok(())
}

fn push_record(
    series: &mut TimeSeries,
    rec: &StepRecord,
    opts: &SimOptions,
    model: &ReducedModel,
) -> Result<()> {
    let b = model.n_boundary;
    let (e_tot, e_rb, e_el) = match &opts.energy {
        Some(f) => f(&rec.q, &rec.u),
        None => (f64::NAN, f64::NAN, f64::NAN),
    };
    series.records.push(Record {
        t: rec.t,
        q_b: rec.q.rows(0, b).iter().copied().collect(),
        probes_q: opts.probes.iter().map(|p| p.row.dot(&rec.q)).collect(),
        probes_u: opts.probes.iter().map(|p| p.row.dot(&rec.u)).collect(),
        lambda: rec.lambda.iter().copied().collect(),
        e_tot,
        e_rb,
        e_el,
        n_active: rec.n_active,
        solver_iters: rec.solver_iters,
        residual: rec.residual,
    });
    Ok(())
}
