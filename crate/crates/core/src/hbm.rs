//! Harmonic balance with unilateral contact.
//!
//! Periodic steady states of a massless-boundary reduced model are sought
//! as truncated Fourier series. The contact forces are evaluated with an
//! alternating frequency-time scheme: the boundary residual is sampled over
//! one period, projected through a Dynamic Lagrangian expression
//! `λ̃(k) = proj_{ℝ₀⁺}(r̃_b(k) − ε_DL g̃(k))`, and transformed back. The
//! converged solution is insensitive to `ε_DL` over several orders of
//! magnitude. Only frictionless normal contact is supported here.

use nalgebra::{Complex, DMatrix, DVector};

use crate::cms::ReducedModel;
use crate::contact::{ContactConfig, NormalGap};
use crate::error::{Error, Result};

type C64 = Complex<f64>;

/// Truncated Fourier representation of a periodic solution.
///
/// Coefficients are stored for `h = 0..=h_max`; negative harmonics are
/// implied by conjugation, so reconstructed time signals are real by
/// construction.
#[derive(Clone, Debug)]
pub struct FourierSolution {
    /// Fundamental angular frequency (rad/s).
    pub omega: f64,
    pub h_max: usize,
    /// Samples per period used by the alternating frequency-time scheme.
    pub n_aft: usize,
    pub eps_dl: f64,
    /// Complex coefficients of all reduced coordinates, `h = 0..=h_max`.
    pub coeffs: Vec<DVector<C64>>,
    /// Contact force coefficients, `h = 0..=h_max`.
    pub lambda_hat: Vec<DVector<C64>>,
}

/// Periodic forcing: terms `amplitude · cos(h Ω t + phase)` tied to the
/// solve's fundamental frequency.
#[derive(Clone, Debug, Default)]
pub struct HbmLoad {
    pub terms: Vec<(usize, DVector<f64>, f64)>,
}

impl HbmLoad {
    pub fn constant(amplitude: DVector<f64>) -> Self {
        HbmLoad {
            terms: vec![(0, amplitude, 0.0)],
        }
    }

    pub fn fundamental(amplitude: DVector<f64>) -> Self {
        HbmLoad {
            terms: vec![(1, amplitude, 0.0)],
        }
    }

    /// Complex coefficient of harmonic `h` (dimension `n`).
    fn coeff(&self, h: usize, n: usize) -> DVector<C64> {
        let mut out = DVector::from_element(n, C64::new(0.0, 0.0));
        for (th, amp, phase) in &self.terms {
            if *th != h {
                continue;
            }
            if h == 0 {
                // A cos(phase) constant offset
                let scale = phase.cos();
                for i in 0..n {
                    out[i] += C64::new(amp[i] * scale, 0.0);
                }
            } else {
                // A cos(hΩt + φ) → coefficient A e^{iφ} / 2 at +h
                let c = C64::new(phase.cos(), phase.sin()) * C64::new(0.5, 0.0);
                for i in 0..n {
                    out[i] += c * amp[i];
                }
            }
        }
        out
    }

    fn stack_norm(&self, n: usize, h_max: usize) -> f64 {
        let mut s = 0.0;
        for h in 0..=h_max {
            s += self.coeff(h, n).norm_squared();
        }
        s.sqrt()
    }
}

/// Solver options.
#[derive(Clone, Copy, Debug)]
pub struct HbmOptions {
    /// Harmonic truncation order `H`.
    pub h_max: usize,
    /// Time samples per period (must be ≥ 2H+1).
    pub n_aft: usize,
    /// Dynamic Lagrangian parameter.
    pub eps_dl: f64,
    /// Relative residual tolerance of the Newton iteration.
    pub tol: f64,
    pub max_iter: usize,
    /// Forward-difference step, relative to the coordinate scale.
    pub fd_step: f64,
}

impl Default for HbmOptions {
    fn default() -> Self {
        HbmOptions {
            h_max: 20,
            n_aft: 4096,
            eps_dl: 1e5,
            tol: 1e-8,
            max_iter: 60,
            fd_step: 1e-7,
        }
    }
}

/// Reconstruct real time samples of complex coefficients over one period.
pub fn reconstruct_samples(coeffs: &[DVector<C64>], n_samples: usize) -> Vec<DVector<f64>> {
    let n = coeffs.first().map(|c| c.len()).unwrap_or(0);
    let mut out = vec![DVector::zeros(n); n_samples];
    for (k, sample) in out.iter_mut().enumerate() {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / n_samples as f64;
        for (h, c) in coeffs.iter().enumerate() {
            if h == 0 {
                for i in 0..n {
                    sample[i] += c[i].re;
                }
            } else {
                let (s, co) = (h as f64 * theta).sin_cos();
                for i in 0..n {
                    sample[i] += 2.0 * (c[i].re * co - c[i].im * s);
                }
            }
        }
    }
    out
}

/// Forward transform of real samples to coefficients `h = 0..=h_max`.
pub fn fourier_coefficients(samples: &[DVector<f64>], h_max: usize) -> Vec<DVector<C64>> {
    let n_samples = samples.len();
    let n = samples.first().map(|s| s.len()).unwrap_or(0);
    let mut out = vec![DVector::from_element(n, C64::new(0.0, 0.0)); h_max + 1];
    for (k, sample) in samples.iter().enumerate() {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / n_samples as f64;
        for (h, c) in out.iter_mut().enumerate() {
            let (s, co) = (h as f64 * theta).sin_cos();
            for i in 0..n {
                c[i] += C64::new(sample[i] * co, -sample[i] * s);
            }
        }
    }
    for c in &mut out {
        *c /= C64::new(n_samples as f64, 0.0);
    }
    out
}

/// Precomputed machinery for one (model, contact, load) triple.
pub struct HbmSystem<'a> {
    model: &'a ReducedModel,
    cfg: &'a ContactConfig,
    load: &'a HbmLoad,
    opts: HbmOptions,
    n_red: usize,
    n_b: usize,
}

impl<'a> HbmSystem<'a> {
    pub fn new(
        model: &'a ReducedModel,
        cfg: &'a ContactConfig,
        load: &'a HbmLoad,
        opts: HbmOptions,
    ) -> Result<Self> {
        if !model.massless {
            return Err(Error::InvalidSpec(
                "harmonic balance operates on massless-boundary reduced models".into(),
            ));
        }
        if cfg.tangential {
            return Err(Error::InvalidSpec(
                "harmonic balance supports frictionless normal contact only".into(),
            ));
        }
        if cfg.n_coords() != model.n_boundary {
            return Err(Error::Dimension(
                "contact configuration does not match the model boundary".into(),
            ));
        }
        if opts.n_aft < 2 * opts.h_max + 1 {
            return Err(Error::InvalidSpec(format!(
                "n_aft = {} aliases the truncation order H = {} (need n_aft >= 2H+1)",
                opts.n_aft, opts.h_max
            )));
        }
        Ok(HbmSystem {
            model,
            cfg,
            load,
            opts,
            n_red: model.n_red(),
            n_b: model.n_boundary,
        })
    }

    /// Dynamic stiffness of harmonic `h`:
    /// `S_h = K̃ + i h Ω D̃ − (h Ω)² M̃`.
    fn dynamic_stiffness(&self, omega: f64, h: usize) -> DMatrix<C64> {
        let w = h as f64 * omega;
        DMatrix::from_fn(self.n_red, self.n_red, |i, j| {
            C64::new(
                self.model.ktil[(i, j)] - w * w * self.model.mtil[(i, j)],
                w * self.model.dtil[(i, j)],
            )
        })
    }

    /// Gap offset coefficients `ĝ₀(h)` per contact.
    fn gap_coeff(&self, omega: f64, h: usize) -> Result<DVector<C64>> {
        let c = self.cfg.n_contacts();
        let mut out = DVector::from_element(c, C64::new(0.0, 0.0));
        match &self.cfg.gap.normal {
            NormalGap::Constant(g) => {
                if h == 0 {
                    for j in 0..c {
                        out[j] = C64::new(g[j], 0.0);
                    }
                }
            }
            NormalGap::Cosine {
                mean,
                amp,
                omega: w0,
                phase,
            } => {
                if h == 0 {
                    for j in 0..c {
                        out[j] = C64::new(mean[j], 0.0);
                    }
                } else {
                    let ratio = w0 / omega;
                    let hr = ratio.round();
                    if (ratio - hr).abs() > 1e-9 * ratio.abs().max(1.0) {
                        return Err(Error::InvalidSpec(
                            "gap oscillation frequency is not a harmonic of the fundamental"
                                .into(),
                        ));
                    }
                    if hr as usize == h {
                        let ph = C64::new(phase.cos(), phase.sin()) * C64::new(0.5, 0.0);
                        for j in 0..c {
                            out[j] = ph * amp[j];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Alternating frequency-time evaluation of the contact force
    /// coefficients for the current displacement estimate.
    pub fn aft_contact_forces(
        &self,
        omega: f64,
        coeffs: &[DVector<C64>],
    ) -> Result<Vec<DVector<C64>>> {
        self.aft_with_eps(omega, coeffs, self.opts.eps_dl)
    }

    fn aft_with_eps(
        &self,
        omega: f64,
        coeffs: &[DVector<C64>],
        eps: f64,
    ) -> Result<Vec<DVector<C64>>> {
        self.aft_scaled(omega, coeffs, eps, 1.0)
    }

    fn aft_scaled(
        &self,
        omega: f64,
        coeffs: &[DVector<C64>],
        eps: f64,
        fscale: f64,
    ) -> Result<Vec<DVector<C64>>> {
        let h_max = self.opts.h_max;
        let n_aft = self.opts.n_aft;
        let b = self.n_b;
        let kbb = self.model.k_bb();
        let kbi = self.model.k_bi();

        // boundary residual and gap coefficients per harmonic
        let mut r_hat: Vec<DVector<C64>> = Vec::with_capacity(h_max + 1);
        let mut g_hat: Vec<DVector<C64>> = Vec::with_capacity(h_max + 1);
        for (h, c) in coeffs.iter().enumerate() {
            let qb = c.rows(0, b).into_owned();
            let qi = c.rows(b, self.n_red - b).into_owned();
            let f = self.load.coeff(h, self.n_red) * C64::new(fscale, 0.0);
            let fb = f.rows(0, b).into_owned();
            let mut r = DVector::from_element(b, C64::new(0.0, 0.0));
            for i in 0..b {
                let mut acc = -fb[i];
                for j in 0..b {
                    acc += C64::new(kbb[(i, j)], 0.0) * qb[j];
                }
                for j in 0..(self.n_red - b) {
                    acc += C64::new(kbi[(i, j)], 0.0) * qi[j];
                }
                r[i] = acc;
            }
            r_hat.push(r);
            g_hat.push(qb + self.gap_coeff(omega, h)?);
        }

        // inverse transform, pointwise projection, forward transform
        let r_time = reconstruct_samples(&r_hat, n_aft);
        let g_time = reconstruct_samples(&g_hat, n_aft);
        let lam_time: Vec<DVector<f64>> = r_time
            .iter()
            .zip(&g_time)
            .map(|(r, g)| DVector::from_fn(b, |j, _| (r[j] - eps * g[j]).max(0.0)))
            .collect();
        Ok(fourier_coefficients(&lam_time, h_max))
    }

    /// Harmonic-balance residual per harmonic:
    /// `R_h = S_h q̂(h) − f̂(h) − [I; 0] λ̂(h)`.
    pub fn residual(&self, omega: f64, coeffs: &[DVector<C64>]) -> Result<Vec<DVector<C64>>> {
        self.residual_with_eps(omega, coeffs, self.opts.eps_dl)
    }

    fn residual_with_eps(
        &self,
        omega: f64,
        coeffs: &[DVector<C64>],
        eps: f64,
    ) -> Result<Vec<DVector<C64>>> {
        self.residual_scaled(omega, coeffs, eps, 1.0)
    }

    fn residual_scaled(
        &self,
        omega: f64,
        coeffs: &[DVector<C64>],
        eps: f64,
        fscale: f64,
    ) -> Result<Vec<DVector<C64>>> {
        let lambda = self.aft_scaled(omega, coeffs, eps, fscale)?;
        let mut out = Vec::with_capacity(coeffs.len());
        for (h, c) in coeffs.iter().enumerate() {
            let s = self.dynamic_stiffness(omega, h);
            let mut r = &s * c - self.load.coeff(h, self.n_red) * C64::new(fscale, 0.0);
            for j in 0..self.n_b {
                r[j] -= lambda[h][j];
            }
            out.push(r);
        }
        Ok(out)
    }

    /// Linear response (open contact, `λ̂ = 0`) used as a sweep seed.
    pub fn linear_solution(&self, omega: f64) -> Result<FourierSolution> {
        self.linear_scaled(omega, 1.0)
    }

    fn linear_scaled(&self, omega: f64, fscale: f64) -> Result<FourierSolution> {
        let h_max = self.opts.h_max;
        let mut coeffs = Vec::with_capacity(h_max + 1);
        for h in 0..=h_max {
            let s = self.dynamic_stiffness(omega, h);
            let f = self.load.coeff(h, self.n_red) * C64::new(fscale, 0.0);
            let q = s.lu().solve(&f).ok_or_else(|| {
                Error::SingularMatrix(format!("dynamic stiffness singular at harmonic {h}"))
            })?;
            coeffs.push(q);
        }
        let lambda_hat =
            vec![DVector::from_element(self.n_b, C64::new(0.0, 0.0)); h_max + 1];
        Ok(FourierSolution {
            omega,
            h_max,
            n_aft: self.opts.n_aft,
            eps_dl: self.opts.eps_dl,
            coeffs,
            lambda_hat,
        })
    }

    fn pack(&self, coeffs: &[DVector<C64>]) -> DVector<f64> {
        let n = self.n_red;
        let h_max = self.opts.h_max;
        let mut z = DVector::zeros(n * (2 * h_max + 1));
        for i in 0..n {
            z[i] = coeffs[0][i].re;
        }
        for h in 1..=h_max {
            let base = n + (h - 1) * 2 * n;
            for i in 0..n {
                z[base + i] = coeffs[h][i].re;
                z[base + n + i] = coeffs[h][i].im;
            }
        }
        z
    }

    fn unpack(&self, z: &DVector<f64>) -> Vec<DVector<C64>> {
        let n = self.n_red;
        let h_max = self.opts.h_max;
        let mut coeffs = Vec::with_capacity(h_max + 1);
        coeffs.push(DVector::from_fn(n, |i, _| C64::new(z[i], 0.0)));
        for h in 1..=h_max {
            let base = n + (h - 1) * 2 * n;
            coeffs.push(DVector::from_fn(n, |i, _| {
                C64::new(z[base + i], z[base + n + i])
            }));
        }
        coeffs
    }

    fn residual_packed_eps(&self, omega: f64, z: &DVector<f64>, eps: f64) -> Result<DVector<f64>> {
        self.residual_packed_scaled(omega, z, eps, 1.0)
    }

    fn residual_packed_scaled(
        &self,
        omega: f64,
        z: &DVector<f64>,
        eps: f64,
        fscale: f64,
    ) -> Result<DVector<f64>> {
        let coeffs = self.unpack(z);
        let res = self.residual_scaled(omega, &coeffs, eps, fscale)?;
        Ok(self.pack(&res))
    }

    /// Newton solve at a fixed frequency.
    ///
    /// The converged solution is independent of `ε_DL` (active samples are
    /// driven to exact zero gap), so the solve ramps the parameter up from
    /// the boundary-stiffness scale to the requested value, each stage
    /// seeding the next. This keeps the Newton iteration well conditioned
    /// even for very large `ε_DL`. The Jacobian is built by forward
    /// differences on the stacked real coordinates and reused while
    /// convergence is fast.
    pub fn solve_fixed_frequency(
        &self,
        omega: f64,
        guess: Option<&FourierSolution>,
    ) -> Result<(FourierSolution, usize)> {
        let seed = match guess {
            Some(g) => g.clone(),
            None => self.linear_solution(omega)?,
        };
        let z0 = self.pack(&seed.coeffs);
        let target = self.opts.eps_dl;

        // candidate continuation ladders: direct, then starting from
        // progressively softer fractions of the boundary stiffness scale
        // (the converged solution does not depend on ε_DL, so intermediate
        // stages only serve the Newton globalization)
        let kbb = self.model.k_bb();
        let mut kbb_scale = 0.0f64;
        for i in 0..self.n_b {
            kbb_scale = kbb_scale.max(kbb[(i, i)].abs());
        }
        let ladder_from = |start: f64| -> Vec<f64> {
            let mut stages = vec![target];
            let mut e = target;
            while e > 10.0 * start {
                e /= 10.0;
                stages.push(e);
            }
            if *stages.last().unwrap() > start * 1.01 && start < target {
                stages.push(start);
            }
            stages.reverse();
            stages
        };
        let mut starts = vec![target];
        for frac in [2.0, 0.2, 0.02, 2e-3, 2e-4] {
            let s = frac * kbb_scale;
            if s < target {
                starts.push(s);
            }
        }

        let mut total_iters = 0usize;
        let mut last_err = None;
        for &start in &starts {
            let stages = ladder_from(start.min(target));
            let mut z = z0.clone();
            let mut ok = true;
            for &eps in &stages {
                match self.newton_at(omega, eps, 1.0, &mut z) {
                    Ok(it) => total_iters += it,
                    Err(e) => {
                        last_err = Some(e);
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                return self.finish(omega, z, target, total_iters);
            }
        }

        // multi-valued resonance regions can defeat every cold start: track
        // the solution up an amplitude ramp as the last resort
        let stages = ladder_from((2.0 * kbb_scale).min(target));
        let mut z = self.pack(&self.linear_scaled(omega, 0.0625)?.coeffs);
        for fscale in [0.0625, 0.125, 0.25, 0.5, 1.0] {
            for &eps in &stages {
                match self.newton_at(omega, eps, fscale, &mut z) {
                    Ok(it) => total_iters += it,
                    Err(e) => {
                        return Err(last_err.unwrap_or(e));
                    }
                }
            }
        }
        self.finish(omega, z, target, total_iters)
    }

    fn finish(
        &self,
        omega: f64,
        z: DVector<f64>,
        eps: f64,
        iterations: usize,
    ) -> Result<(FourierSolution, usize)> {
        let coeffs = self.unpack(&z);
        let lambda_hat = self.aft_with_eps(omega, &coeffs, eps)?;
        Ok((
            FourierSolution {
                omega,
                h_max: self.opts.h_max,
                n_aft: self.opts.n_aft,
                eps_dl: eps,
                coeffs,
                lambda_hat,
            },
            iterations,
        ))
    }

    /// Semismooth Newton at one `ε_DL` stage; `z` is updated in place.
    ///
    /// The exact per-region Jacobian is cheap (masked trig sums), so it is
    /// rebuilt every iteration and full steps are taken: the residual is
    /// legitimately non-monotone while the active-sample pattern settles,
    /// so acceptance is guarded only against blow-ups, with a watchdog on
    /// stagnation of the best residual.
    fn newton_at(
        &self,
        omega: f64,
        eps: f64,
        fscale: f64,
        z: &mut DVector<f64>,
    ) -> Result<usize> {
        let scale = (self.load.stack_norm(self.n_red, self.opts.h_max) * fscale).max(1e-300);
        let mut r = self.residual_packed_scaled(omega, z, eps, fscale)?;
        let mut best = r.norm();
        let mut since_best = 0usize;
        for iter in 0..self.opts.max_iter {
            let rn = r.norm();
            if rn <= self.opts.tol * scale {
                return Ok(iter);
            }
            let jac = self.analytic_jacobian_scaled(omega, z, eps, fscale)?;
            let delta = jac
                .lu()
                .solve(&(-&r))
                .ok_or_else(|| Error::SingularMatrix("singular harmonic-balance Jacobian".into()))?;
            let mut alpha = 1.0f64;
            for _ in 0..10 {
                let z_try = &*z + &delta * alpha;
                let r_try = self.residual_packed_scaled(omega, &z_try, eps, fscale)?;
                let rn_try = r_try.norm();
                if rn_try.is_finite() && rn_try <= 1e4 * best.max(self.opts.tol * scale) {
                    *z = z_try;
                    r = r_try;
                    break;
                }
                alpha *= 0.5;
            }
            let rn_new = r.norm();
            if rn_new < 0.9 * best {
                best = rn_new;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best > 15 {
                    return Err(Error::NonConvergence {
                        iterations: iter + 1,
                        residual: rn_new / scale,
                        context: format!(
                            "harmonic balance Newton stalled at Ω = {omega:.6e} (ε_DL = {eps:.1e})"
                        ),
                    });
                }
            }
        }
        Err(Error::NonConvergence {
            iterations: self.opts.max_iter,
            residual: r.norm() / scale,
            context: format!("harmonic balance Newton at Ω = {omega:.6e} (ε_DL = {eps:.1e})"),
        })
    }

    /// Forward-difference Jacobian; retained as the independent reference
    /// for the analytic one.
    pub fn fd_jacobian(
        &self,
        omega: f64,
        z: &DVector<f64>,
        eps: f64,
    ) -> Result<DMatrix<f64>> {
        let dim = z.len();
        let r0 = self.residual_packed_eps(omega, z, eps)?;
        let z_scale = z.amax().max(1e-12);
        let mut jac = DMatrix::zeros(dim, dim);
        let mut z_pert = z.clone();
        for j in 0..dim {
            let h = self.opts.fd_step * z[j].abs().max(1e-3 * z_scale);
            z_pert[j] = z[j] + h;
            let r = self.residual_packed_eps(omega, &z_pert, eps)?;
            z_pert[j] = z[j];
            for i in 0..dim {
                jac[(i, j)] = (r[i] - r0[i]) / h;
            }
        }
        Ok(jac)
    }

    /// Row index of `(harmonic, coordinate)` in the packed real layout;
    /// `im` selects the imaginary row (h ≥ 1 only).
    fn row_index(&self, h: usize, coord: usize, im: bool) -> usize {
        let n = self.n_red;
        if h == 0 {
            coord
        } else {
            n + (h - 1) * 2 * n + if im { n } else { 0 } + coord
        }
    }

    /// Exact Jacobian of the packed residual.
    ///
    /// The residual is piecewise linear in the Fourier coefficients: the
    /// linear dynamic-stiffness blocks plus the contact contribution, whose
    /// derivative inside one active-sample pattern reduces to masked
    /// trigonometric sums of the pattern (the chain rule through the
    /// alternating frequency-time scheme).
    pub fn analytic_jacobian(
        &self,
        omega: f64,
        z: &DVector<f64>,
        eps: f64,
    ) -> Result<DMatrix<f64>> {
        self.analytic_jacobian_scaled(omega, z, eps, 1.0)
    }

    fn analytic_jacobian_scaled(
        &self,
        omega: f64,
        z: &DVector<f64>,
        eps: f64,
        fscale: f64,
    ) -> Result<DMatrix<f64>> {
        let n = self.n_red;
        let h_max = self.opts.h_max;
        let n_aft = self.opts.n_aft;
        let b = self.n_b;
        let dim = n * (2 * h_max + 1);
        let coeffs = self.unpack(z);

        // linear part: blocks diag over harmonics
        let mut jac = DMatrix::zeros(dim, dim);
        for h in 0..=h_max {
            let s = self.dynamic_stiffness(omega, h);
            for i in 0..n {
                for j in 0..n {
                    let sr = s[(i, j)].re;
                    let si = s[(i, j)].im;
                    if h == 0 {
                        jac[(i, j)] += sr;
                    } else {
                        let rr = self.row_index(h, i, false);
                        let ri = self.row_index(h, i, true);
                        let cr = self.row_index(h, j, false);
                        let ci = self.row_index(h, j, true);
                        // (Sr + i Si)(a + i b): Re = Sr a − Si b, Im = Si a + Sr b
                        jac[(rr, cr)] += sr;
                        jac[(rr, ci)] -= si;
                        jac[(ri, cr)] += si;
                        jac[(ri, ci)] += sr;
                    }
                }
            }
        }

        // contact part: active-sample masks of p̃ = r̃_b − ε g̃
        let kbb = self.model.k_bb();
        let kbi = self.model.k_bi();
        let mut p_hat: Vec<DVector<C64>> = Vec::with_capacity(h_max + 1);
        for (h, c) in coeffs.iter().enumerate() {
            let qb = c.rows(0, b).into_owned();
            let qi = c.rows(b, n - b).into_owned();
            let f = self.load.coeff(h, n) * C64::new(fscale, 0.0);
            let mut p = DVector::from_element(b, C64::new(0.0, 0.0));
            for i in 0..b {
                let mut acc = -f[i];
                for j in 0..b {
                    acc += C64::new(kbb[(i, j)], 0.0) * qb[j];
                }
                for j in 0..(n - b) {
                    acc += C64::new(kbi[(i, j)], 0.0) * qi[j];
                }
                acc -= C64::new(eps, 0.0) * qb[i];
                p[i] = acc;
            }
            // gap offset contributes a constant, still needed for the mask
            let g0 = self.gap_coeff(omega, h)?;
            for i in 0..b {
                p[i] -= C64::new(eps, 0.0) * g0[i];
            }
            p_hat.push(p);
        }
        let p_time = reconstruct_samples(&p_hat, n_aft);

        let inv_n = 1.0 / n_aft as f64;
        for jc in 0..b {
            // masked trig sums of the contact's active pattern
            let mut mc = vec![0.0f64; 2 * h_max + 1];
            let mut ms = vec![0.0f64; 2 * h_max + 1];
            for (k, p) in p_time.iter().enumerate() {
                if p[jc] <= 0.0 {
                    continue;
                }
                let theta = 2.0 * std::f64::consts::PI * k as f64 * inv_n;
                for (d, (c_acc, s_acc)) in mc.iter_mut().zip(ms.iter_mut()).enumerate() {
                    let (s, c) = (d as f64 * theta).sin_cos();
                    *c_acc += c * inv_n;
                    *s_acc += s * inv_n;
                }
            }
            // sensitivity row of p̃ w.r.t. the reduced coordinates
            let mut a_row = DVector::zeros(n);
            for m in 0..b {
                a_row[m] = kbb[(jc, m)];
            }
            for m in 0..(n - b) {
                a_row[b + m] = kbi[(jc, m)];
            }
            a_row[jc] -= eps;

            let mcd = |d: i64| mc[d.unsigned_abs() as usize];
            let msd = |d: i64| {
                let v = ms[d.unsigned_abs() as usize];
                if d < 0 {
                    -v
                } else {
                    v
                }
            };
            for h in 0..=h_max {
                for hp in 0..=h_max {
                    let dm = h as i64 - hp as i64;
                    let dp = (h + hp) as i64;
                    // λ̂ projections against the packed basis functions
                    let (t_cc, t_cs, t_sc, t_ss);
                    if hp == 0 {
                        t_cc = mcd(h as i64);
                        t_sc = -msd(h as i64);
                        t_cs = 0.0;
                        t_ss = 0.0;
                    } else {
                        t_cc = mcd(dm) + mcd(dp);
                        t_cs = msd(dm) - msd(dp);
                        t_sc = -(msd(dp) + msd(dm));
                        t_ss = mcd(dm) - mcd(dp);
                    }
                    for m in 0..n {
                        let a = a_row[m];
                        if a == 0.0 {
                            continue;
                        }
                        let rr = self.row_index(h, jc, false);
                        let cr = self.row_index(hp, m, false);
                        jac[(rr, cr)] -= a * t_cc;
                        if hp > 0 {
                            let ci = self.row_index(hp, m, true);
                            jac[(rr, ci)] -= a * t_cs;
                        }
                        if h > 0 {
                            let ri = self.row_index(h, jc, true);
                            jac[(ri, cr)] -= a * t_sc;
                            if hp > 0 {
                                let ci = self.row_index(hp, m, true);
                                jac[(ri, ci)] -= a * t_ss;
                            }
                        }
                    }
                }
            }
        }
        Ok(jac)
    }

    /// Complementarity diagnostics of a solution at the AFT samples:
    /// `(min λ̃, max λ̃, min g̃, max λ̃·g̃)`.
    ///
    /// `λ̃` is the time-domain projection itself (non-negative by
    /// construction); reconstructing it from the truncated coefficients
    /// would re-introduce Gibbs undershoot.
    pub fn sample_complementarity(&self, sol: &FourierSolution) -> Result<(f64, f64, f64, f64)> {
        let b = self.n_b;
        let kbb = self.model.k_bb();
        let kbi = self.model.k_bi();
        let mut g_hat = Vec::with_capacity(sol.coeffs.len());
        let mut r_hat = Vec::with_capacity(sol.coeffs.len());
        for (h, c) in sol.coeffs.iter().enumerate() {
            let qb = c.rows(0, b).into_owned();
            let qi = c.rows(b, self.n_red - b).into_owned();
            let f = self.load.coeff(h, self.n_red);
            let mut r = DVector::from_element(b, C64::new(0.0, 0.0));
            for i in 0..b {
                let mut acc = -f[i];
                for j in 0..b {
                    acc += C64::new(kbb[(i, j)], 0.0) * qb[j];
                }
                for j in 0..(self.n_red - b) {
                    acc += C64::new(kbi[(i, j)], 0.0) * qi[j];
                }
                r[i] = acc;
            }
            r_hat.push(r);
            g_hat.push(qb + self.gap_coeff(sol.omega, h)?);
        }
        let g_time = reconstruct_samples(&g_hat, sol.n_aft);
        let r_time = reconstruct_samples(&r_hat, sol.n_aft);
        let mut min_l = f64::INFINITY;
        let mut max_l = 0.0f64;
        let mut min_g = f64::INFINITY;
        let mut max_prod = 0.0f64;
        for (g, r) in g_time.iter().zip(&r_time) {
            for j in 0..b {
                let lam = (r[j] - sol.eps_dl * g[j]).max(0.0);
                min_l = min_l.min(lam);
                max_l = max_l.max(lam);
                min_g = min_g.min(g[j]);
                max_prod = max_prod.max((lam * g[j]).abs());
            }
        }
        Ok((min_l, max_l, min_g, max_prod))
    }
}

/// One output point of a frequency sweep.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub omega: f64,
    /// Converged solution, or `None` when the continuation lost the branch.
    pub solution: Option<FourierSolution>,
    pub iterations: usize,
}

/// Sweep policy: grid resolution and continuation bisection depth.
#[derive(Clone, Copy, Debug)]
pub struct SweepPolicy {
    pub n_points: usize,
    pub max_bisect: u32,
}

impl Default for SweepPolicy {
    fn default() -> Self {
        SweepPolicy {
            n_points: 40,
            max_bisect: 6,
        }
    }
}

/// Sequential continuation over `[omega_start, omega_end]`: each converged
/// solution seeds the next grid point; failures bisect the frequency step
/// down to a floor, then the point is recorded as a branch gap and the
/// sweep restarts from a linear seed. Overhanging branches are not traced
/// around.
pub fn sweep(
    system: &HbmSystem<'_>,
    omega_start: f64,
    omega_end: f64,
    policy: &SweepPolicy,
) -> Result<Vec<SweepPoint>> {
    if policy.n_points < 2 {
        return Err(Error::InvalidSpec("sweep needs at least two points".into()));
    }
    let n = policy.n_points;
    let step = (omega_end - omega_start) / (n - 1) as f64;
    let mut points = Vec::with_capacity(n);
    let mut prev: Option<FourierSolution> = None;
    for k in 0..n {
        let target = omega_start + step * k as f64;
        let mut seed = prev.clone();
        let mut solved = None;
        let mut iterations = 0usize;
        // direct attempt, then bisected continuation from the last success
        match system.solve_fixed_frequency(target, seed.as_ref()) {
            Ok((sol, it)) => {
                solved = Some(sol);
                iterations = it;
            }
            Err(_) => {
                if let Some(base) = prev.as_ref() {
                    let mut omega_cur = base.omega;
                    let mut sub = (target - omega_cur) / 2.0;
                    let floor = step.abs() / 2f64.powi(policy.max_bisect as i32);
                    let mut guard = 0usize;
                    while sub.abs() >= floor && guard < 4 * (1 << policy.max_bisect) {
                        guard += 1;
                        let omega_try = if (target - omega_cur).abs() <= sub.abs() {
                            target
                        } else {
                            omega_cur + sub
                        };
                        match system.solve_fixed_frequency(omega_try, seed.as_ref()) {
                            Ok((sol, it)) => {
                                omega_cur = omega_try;
                                seed = Some(sol);
                                iterations = it;
                                if omega_try == target {
                                    solved = seed.clone();
                                    break;
                                }
                            }
                            Err(_) => sub /= 2.0,
                        }
                    }
                }
            }
        }
        match solved {
            Some(sol) => {
                prev = Some(sol.clone());
                points.push(SweepPoint {
                    omega: target,
                    solution: Some(sol),
                    iterations,
                });
            }
            None => {
                // branch gap: restart the continuation from a linear seed
                prev = None;
                points.push(SweepPoint {
                    omega: target,
                    solution: None,
                    iterations: 0,
                });
            }
        }
    }
    Ok(points)
}

/// Displacement mean and first-harmonic magnitude of a probe row.
pub fn probe_harmonics(sol: &FourierSolution, probe_row: &DVector<f64>) -> (f64, f64) {
    let n = probe_row.len();
    let mean = (0..n).map(|i| probe_row[i] * sol.coeffs[0][i].re).sum::<f64>();
    let mut h1 = C64::new(0.0, 0.0);
    for i in 0..n {
        h1 += sol.coeffs[1][i] * probe_row[i];
    }
    (mean, 2.0 * h1.norm())
}
