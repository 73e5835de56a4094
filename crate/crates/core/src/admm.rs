//! The alternating direction solver.
//!
//! The restoration energy
//!
//! ```text
//! min_u  Σ α(u)|∇u| h² + Σ β(u)|∇²u| h² + fidelity(u)
//! ```
//!
//! is split with auxiliary variables `v = ∇u`, `w = ∇²u` (and `z = u` for
//! inpainting) and solved by cycling:
//!
//! 1. `u`-update — a single spectrally diagonalized linear solve,
//! 2. weight update — `α, β` re-estimated from the fresh iterate,
//! 3. `v`-update — pixelwise 2-vector shrinkage with threshold `α/(r1+γ)`,
//! 4. `w`-update — pixelwise 4-vector shrinkage with threshold `β/(r2+τ)`,
//! 5. `z`-update (inpainting only) — pointwise quadratic minimizer,
//! 6. dual ascent on the multipliers,
//!
//! with initialization `u⁰ = f`, `v⁰ = w⁰ = λ₁⁰ = λ₂⁰ = 0`, stopping when the
//! relative change `‖u^{k+1}−u^k‖₁ / ‖u^k‖₁` drops below the tolerance. The
//! proximal weights `μ, γ, τ` are kept in all formulas and default to zero.

use std::time::Instant;

use ndarray::Array2;

use crate::error::{Result, SatvError};
use crate::fft::Fft2;
use crate::grid::{div, div2, grad, hess, Hess4Field, ImageGrid, Vec2Field, DEFAULT_MESH};
use crate::metrics;
use crate::problems::{apply_blur, apply_blur_adjoint, update_z_inpaint, ProblemSpec};
use crate::spectral::{build_denominator, spectral_solve, SpectralDenominator};
use crate::weights::{WeightFields, WeightMode, WeightSource};

/// All solver tunables.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub lambda: f64,
    pub r1: f64,
    pub r2: f64,
    /// Proximal weight on `u - u^k`.
    pub mu: f64,
    /// Proximal weight on `v - v^k`.
    pub gamma: f64,
    /// Proximal weight on `w - w^k`.
    pub tau: f64,
    pub h: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub weight_mode: WeightMode,
    /// When false, `v` is pinned to `∇u` and the first multiplier stays 0
    /// (pure second-order model).
    pub enable_first: bool,
    /// When false, `w` is pinned to `∇²u` and the second multiplier stays 0
    /// (pure first-order model).
    pub enable_second: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 100.0,
            r1: 1.0,
            r2: 2.0,
            mu: 0.0,
            gamma: 0.0,
            tau: 0.0,
            h: DEFAULT_MESH,
            max_iter: 300,
            tol: 2e-3,
            weight_mode: WeightMode::Dynamic,
            enable_first: true,
            enable_second: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(SatvError::Config(format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            )));
        }
        for (name, v) in [
            ("r1", self.r1),
            ("r2", self.r2),
            ("mu", self.mu),
            ("gamma", self.gamma),
            ("tau", self.tau),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(SatvError::Config(format!(
                    "{name} must be nonnegative and finite, got {v}"
                )));
            }
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(SatvError::Config(format!("h must be positive, got {}", self.h)));
        }
        if self.max_iter == 0 {
            return Err(SatvError::Config("max_iter must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(SatvError::Config(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if !self.enable_first && !self.enable_second {
            return Err(SatvError::Config(
                "at least one of the first/second order terms must be enabled".into(),
            ));
        }
        if self.enable_first && self.r1 + self.gamma <= 0.0 {
            return Err(SatvError::Config(
                "r1 + gamma must be positive when the first-order term is enabled".into(),
            ));
        }
        if self.enable_second && self.r2 + self.tau <= 0.0 {
            return Err(SatvError::Config(
                "r2 + tau must be positive when the second-order term is enabled".into(),
            ));
        }
        Ok(())
    }
}

/// Vectorial soft shrinkage: the proximal map of `b·|x|` at `a`.
/// Returns 0 when `|a| ≤ b` (including `a = 0`), otherwise rescales `a`
/// to length `|a| − b`.
pub fn shrink<const N: usize>(a: [f64; N], b: f64) -> [f64; N] {
    // Negative thresholds are a caller bug; NaN is left to the solver's
    // per-iteration finiteness check.
    debug_assert!(!(b < 0.0));
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= b || norm == 0.0 {
        return [0.0; N];
    }
    let scale = (norm - b) / norm;
    a.map(|x| x * scale)
}

/// Flags marking relative quantities whose denominator norm was zero; the
/// stored value is then the raw numerator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DivisionGuards {
    pub l1: bool,
    pub l2: bool,
    pub ru: bool,
}

/// Per-iteration convergence diagnostics. The trace starts with a `k = 0`
/// record describing the initialization, where the relative changes
/// `L1, L2, Ru` are undefined (`None`); the constraint residuals and the
/// energy are always defined.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    /// Iteration counter; 0 is the initialization record.
    pub k: usize,
    /// `‖v − ∇u‖₁ / (M·N)`.
    pub r1_res: f64,
    /// `‖w − ∇²u‖₁ / (M·N)`.
    pub r2_res: f64,
    /// Relative change of the first multiplier (needs a previous iterate).
    pub l1: Option<f64>,
    /// Relative change of the second multiplier.
    pub l2: Option<f64>,
    /// Relative change of the iterate, the stopping quantity.
    pub ru: Option<f64>,
    /// Discrete energy at the current iterate and weights.
    pub energy: f64,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    /// Milliseconds since the solve started.
    pub wall_ms: f64,
    pub guards: DivisionGuards,
}

/// Final iterate plus the full per-iteration trace.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub u: ImageGrid,
    pub trace: Vec<TraceRecord>,
    /// True when the tolerance was met before the iteration cap.
    pub converged: bool,
}

/// Discrete restoration energy of an iterate under given weights.
/// Integrals are `h²`-weighted pixel sums; the fidelity term follows the
/// problem (squared misfit, blurred misfit, or misfit on known pixels only).
pub fn energy_of(
    u: &ImageGrid,
    f: &ImageGrid,
    problem: &ProblemSpec,
    weights: &WeightFields,
    lambda: f64,
) -> f64 {
    let h2 = u.mesh() * u.mesh();
    let gmag = grad(u).magnitude();
    let hmag = hess(u).magnitude();
    let first: f64 = weights
        .alpha
        .iter()
        .zip(gmag.iter())
        .map(|(a, g)| a * g)
        .sum();
    let second: f64 = weights
        .beta
        .iter()
        .zip(hmag.iter())
        .map(|(b, m)| b * m)
        .sum();
    let fidelity: f64 = match problem {
        ProblemSpec::Denoise => u
            .values()
            .iter()
            .zip(f.values().iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>(),
        ProblemSpec::Deblur { kernel } => {
            let ku = apply_blur(u, kernel).expect("kernel validated at solver construction");
            ku.values()
                .iter()
                .zip(f.values().iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        }
        ProblemSpec::Inpaint { mask, .. } => u
            .values()
            .iter()
            .zip(f.values().iter())
            .zip(mask.iter())
            .filter(|(_, &missing)| !missing)
            .map(|((a, b), _)| (a - b) * (a - b))
            .sum::<f64>(),
    };
    (first + second + fidelity / (2.0 * lambda)) * h2
}

/// Proxy saddle point used by the post-hoc Δ diagnostics: the final iterate
/// of a completed run together with its weight fields.
#[derive(Debug, Clone)]
pub struct SaddleProxy {
    pub v: Vec2Field,
    pub w: Hess4Field,
    pub alpha: Array2<f64>,
    pub beta: Array2<f64>,
}

/// One pair `(Δ₁ᵏ, Δ₂ᵏ)`:
/// `Δ₁ᵏ = ⟨(α(uᵏ)−α(ū)) sᵏ, vᵏ−v̄⟩` with `sᵏ = vᵏ/|vᵏ|` where `|vᵏ| > 0`
/// (zero otherwise), and the analogous 4-vector quantity for `Δ₂ᵏ`.
pub fn delta_pair(
    alpha_k: &Array2<f64>,
    beta_k: &Array2<f64>,
    v_k: &Vec2Field,
    w_k: &Hess4Field,
    saddle: &SaddleProxy,
) -> (f64, f64) {
    let mut d1 = 0.0;
    for (((&ak, &ab), (&v1, &v2)), (&s1, &s2)) in alpha_k
        .iter()
        .zip(saddle.alpha.iter())
        .zip(v_k.p1.iter().zip(v_k.p2.iter()))
        .zip(saddle.v.p1.iter().zip(saddle.v.p2.iter()))
    {
        let norm = v1.hypot(v2);
        if norm > 0.0 {
            let coeff = (ak - ab) / norm;
            d1 += coeff * (v1 * (v1 - s1) + v2 * (v2 - s2));
        }
    }
    let mut d2 = 0.0;
    let wk = [&w_k.w11, &w_k.w12, &w_k.w21, &w_k.w22];
    let ws = [&saddle.w.w11, &saddle.w.w12, &saddle.w.w21, &saddle.w.w22];
    let (m, n) = w_k.shape();
    for i in 0..m {
        for j in 0..n {
            let a: [f64; 4] = [wk[0][[i, j]], wk[1][[i, j]], wk[2][[i, j]], wk[3][[i, j]]];
            let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                let coeff = (beta_k[[i, j]] - saddle.beta[[i, j]]) / norm;
                let mut dot = 0.0;
                for c in 0..4 {
                    dot += a[c] * (a[c] - ws[c][[i, j]]);
                }
                d2 += coeff * dot;
            }
        }
    }
    (d1, d2)
}

/// The ADMM solver with step-level access for tests and diagnostics.
pub struct Solver {
    cfg: SolverConfig,
    problem: ProblemSpec,
    f: ImageGrid,
    reference: Option<ImageGrid>,
    fft: Fft2,
    den: SpectralDenominator,
    /// `f/λ` (denoise) or `K*f/λ` (deblur); inpainting rebuilds its fidelity
    /// term from `z` each sweep.
    fixed_fidelity: Option<Array2<f64>>,
    weights_src: WeightSource,
    weights: WeightFields,
    k: usize,
    u: ImageGrid,
    v: Vec2Field,
    w: Hess4Field,
    lam1: Vec2Field,
    lam2: Hess4Field,
    z: Option<ImageGrid>,
    lam3: Option<Array2<f64>>,
    last_ru_num: f64,
    last_ru_den: f64,
    started: Instant,
}

impl Solver {
    pub fn new(
        cfg: SolverConfig,
        problem: ProblemSpec,
        f: &ImageGrid,
        reference: Option<&ImageGrid>,
    ) -> Result<Self> {
        cfg.validate()?;
        let (m, n) = f.shape();
        if f.mesh() != cfg.h {
            return Err(SatvError::Config(format!(
                "input mesh {} does not match configured mesh {}",
                f.mesh(),
                cfg.h
            )));
        }
        if let Some(r) = reference {
            f.check_same_grid(r)?;
        }
        if let ProblemSpec::Inpaint { mask, .. } = &problem {
            if mask.dim() != (m, n) {
                return Err(SatvError::ShapeMismatch {
                    expected: (m, n),
                    got: mask.dim(),
                });
            }
        }
        // Observed values inside the inpainting domain are discarded: they are
        // replaced by the mean of the known pixels so that nothing downstream
        // can depend on them.
        let f = match &problem {
            ProblemSpec::Inpaint { mask, .. } => {
                let mut sum = 0.0;
                let mut count = 0usize;
                for (&v, &missing) in f.values().iter().zip(mask.iter()) {
                    if !missing {
                        sum += v;
                        count += 1;
                    }
                }
                let fill = sum / count as f64;
                let mut data = f.values().clone();
                ndarray::Zip::from(&mut data).and(mask).for_each(|v, &missing| {
                    if missing {
                        *v = fill;
                    }
                });
                ImageGrid::new(data, f.mesh())?
            }
            _ => f.clone(),
        };
        let fft = Fft2::new(m, n);
        let den = build_denominator(&cfg, &problem, m, n, &fft)?;
        let fixed_fidelity = match &problem {
            ProblemSpec::Denoise => Some(f.values() / cfg.lambda),
            ProblemSpec::Deblur { kernel } => {
                Some(apply_blur_adjoint(&f, kernel)?.values() / cfg.lambda)
            }
            ProblemSpec::Inpaint { .. } => None,
        };
        let (z, lam3) = match &problem {
            ProblemSpec::Inpaint { .. } => (Some(f.clone()), Some(Array2::zeros((m, n)))),
            _ => (None, None),
        };
        let u = f.clone();
        let mut weights_src = WeightSource::new(cfg.weight_mode.clone());
        let weights = weights_src.fields(&u, &f)?.clone();
        Ok(Self {
            cfg,
            problem,
            reference: reference.cloned(),
            fft,
            den,
            fixed_fidelity,
            weights_src,
            weights,
            k: 0,
            v: Vec2Field::zeros(m, n, f.mesh()),
            w: Hess4Field::zeros(m, n, f.mesh()),
            lam1: Vec2Field::zeros(m, n, f.mesh()),
            lam2: Hess4Field::zeros(m, n, f.mesh()),
            z,
            lam3,
            u,
            f,
            last_ru_num: f64::INFINITY,
            last_ru_den: 1.0,
            started: Instant::now(),
        })
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn u(&self) -> &ImageGrid {
        &self.u
    }

    pub fn v(&self) -> &Vec2Field {
        &self.v
    }

    pub fn w(&self) -> &Hess4Field {
        &self.w
    }

    pub fn lam1(&self) -> &Vec2Field {
        &self.lam1
    }

    pub fn lam2(&self) -> &Hess4Field {
        &self.lam2
    }

    pub fn weights(&self) -> &WeightFields {
        &self.weights
    }

    pub fn observed(&self) -> &ImageGrid {
        &self.f
    }

    /// True once the last completed iteration met the stopping tolerance.
    pub fn converged(&self) -> bool {
        self.last_ru_num <= self.cfg.tol * self.last_ru_den
    }

    /// Solves the `u`-subproblem for the current splitting variables.
    pub fn update_u(&mut self) -> Result<()> {
        let h = self.cfg.h;
        let t1 = Vec2Field {
            h,
            p1: &self.v.p1 * self.cfg.r1 - &self.lam1.p1,
            p2: &self.v.p2 * self.cfg.r1 - &self.lam1.p2,
        };
        let t2 = Hess4Field {
            h,
            w11: &self.w.w11 * self.cfg.r2 - &self.lam2.w11,
            w12: &self.w.w12 * self.cfg.r2 - &self.lam2.w12,
            w21: &self.w.w21 * self.cfg.r2 - &self.lam2.w21,
            w22: &self.w.w22 * self.cfg.r2 - &self.lam2.w22,
        };
        let mut rhs = match (&self.problem, &self.fixed_fidelity) {
            (ProblemSpec::Inpaint { r3, .. }, _) => {
                let z = self.z.as_ref().expect("inpaint state");
                let lam3 = self.lam3.as_ref().expect("inpaint state");
                z.values() * *r3 - lam3
            }
            (_, Some(fid)) => fid.clone(),
            _ => unreachable!("fixed fidelity exists for non-inpaint problems"),
        };
        rhs = rhs - div(&t1).values() + div2(&t2).values();
        if self.cfg.mu != 0.0 {
            rhs = rhs + self.u.values() * self.cfg.mu;
        }
        let rhs = ImageGrid::from_raw(rhs, h);
        self.u = spectral_solve(&rhs, &self.den, &self.fft);
        Ok(())
    }

    /// Re-estimates the weight fields from the fresh iterate.
    pub fn update_weights(&mut self) -> Result<()> {
        self.weights = self.weights_src.fields(&self.u, &self.f)?.clone();
        Ok(())
    }

    /// Pixelwise 2-vector shrinkage of `(r1 ∇u + λ1 + γ v)/(r1+γ)` with
    /// threshold `α/(r1+γ)`; pins `v = ∇u` when the first-order term is off.
    pub fn update_v(&mut self) {
        let gu = grad(&self.u);
        if !self.cfg.enable_first {
            self.v = gu;
            return;
        }
        let denom = self.cfg.r1 + self.cfg.gamma;
        let (m, n) = self.u.shape();
        let mut p1 = Array2::zeros((m, n));
        let mut p2 = Array2::zeros((m, n));
        for i in 0..m {
            for j in 0..n {
                let a1 = (self.cfg.r1 * gu.p1[[i, j]]
                    + self.lam1.p1[[i, j]]
                    + self.cfg.gamma * self.v.p1[[i, j]])
                    / denom;
                let a2 = (self.cfg.r1 * gu.p2[[i, j]]
                    + self.lam1.p2[[i, j]]
                    + self.cfg.gamma * self.v.p2[[i, j]])
                    / denom;
                let out = shrink([a1, a2], self.weights.alpha[[i, j]] / denom);
                p1[[i, j]] = out[0];
                p2[[i, j]] = out[1];
            }
        }
        self.v = Vec2Field { h: self.cfg.h, p1, p2 };
    }

    /// Pixelwise 4-vector shrinkage of `(r2 ∇²u + λ2 + τ w)/(r2+τ)` with
    /// threshold `β/(r2+τ)`; pins `w = ∇²u` when the second-order term is off.
    pub fn update_w(&mut self) {
        let hu = hess(&self.u);
        if !self.cfg.enable_second {
            self.w = hu;
            return;
        }
        let denom = self.cfg.r2 + self.cfg.tau;
        let (m, n) = self.u.shape();
        let mut out = Hess4Field::zeros(m, n, self.cfg.h);
        {
            let hu_c = [&hu.w11, &hu.w12, &hu.w21, &hu.w22];
            let l2_c = [&self.lam2.w11, &self.lam2.w12, &self.lam2.w21, &self.lam2.w22];
            let w_c = [&self.w.w11, &self.w.w12, &self.w.w21, &self.w.w22];
            let out_c: [&mut Array2<f64>; 4] = {
                let Hess4Field { w11, w12, w21, w22, .. } = &mut out;
                [w11, w12, w21, w22]
            };
            for i in 0..m {
                for j in 0..n {
                    let mut a = [0.0f64; 4];
                    for c in 0..4 {
                        a[c] = (self.cfg.r2 * hu_c[c][[i, j]]
                            + l2_c[c][[i, j]]
                            + self.cfg.tau * w_c[c][[i, j]])
                            / denom;
                    }
                    let s = shrink(a, self.weights.beta[[i, j]] / denom);
                    for c in 0..4 {
                        out_c[c][[i, j]] = s[c];
                    }
                }
            }
        }
        self.w = out;
    }

    /// Pointwise `z`-subproblem for inpainting; no-op otherwise.
    pub fn update_z(&mut self) {
        if let ProblemSpec::Inpaint { mask, r3 } = &self.problem {
            let z = update_z_inpaint(
                &self.u,
                &self.f,
                mask,
                self.cfg.lambda,
                *r3,
                self.lam3.as_ref().expect("inpaint state"),
            );
            self.z = Some(z);
        }
    }

    /// Dual ascent: `λ1 += r1(∇u − v)`, `λ2 += r2(∇²u − w)`, and
    /// `λ3 += r3(u − z)` for inpainting.
    pub fn update_multipliers(&mut self) {
        if self.cfg.enable_first && self.cfg.r1 != 0.0 {
            let gu = grad(&self.u);
            self.lam1.p1 = &self.lam1.p1 + &((&gu.p1 - &self.v.p1) * self.cfg.r1);
            self.lam1.p2 = &self.lam1.p2 + &((&gu.p2 - &self.v.p2) * self.cfg.r1);
        }
        if self.cfg.enable_second && self.cfg.r2 != 0.0 {
            let hu = hess(&self.u);
            self.lam2.w11 = &self.lam2.w11 + &((&hu.w11 - &self.w.w11) * self.cfg.r2);
            self.lam2.w12 = &self.lam2.w12 + &((&hu.w12 - &self.w.w12) * self.cfg.r2);
            self.lam2.w21 = &self.lam2.w21 + &((&hu.w21 - &self.w.w21) * self.cfg.r2);
            self.lam2.w22 = &self.lam2.w22 + &((&hu.w22 - &self.w.w22) * self.cfg.r2);
        }
        if let ProblemSpec::Inpaint { r3, .. } = &self.problem {
            let z = self.z.as_ref().expect("inpaint state");
            let lam3 = self.lam3.as_mut().expect("inpaint state");
            *lam3 = &*lam3 + &((self.u.values() - z.values()) * *r3);
        }
    }

    fn check_finite(&self) -> Result<()> {
        let k = self.k;
        if !self.u.is_finite() {
            return Err(SatvError::NonFinite { field: "u", iteration: k });
        }
        if !self.v.is_finite() {
            return Err(SatvError::NonFinite { field: "v", iteration: k });
        }
        if !self.w.is_finite() {
            return Err(SatvError::NonFinite { field: "w", iteration: k });
        }
        if !self.lam1.is_finite() {
            return Err(SatvError::NonFinite { field: "lambda1", iteration: k });
        }
        if !self.lam2.is_finite() {
            return Err(SatvError::NonFinite { field: "lambda2", iteration: k });
        }
        if let Some(z) = &self.z {
            if !z.is_finite() {
                return Err(SatvError::NonFinite { field: "z", iteration: k });
            }
        }
        if let Some(l3) = &self.lam3 {
            if !l3.iter().all(|v| v.is_finite()) {
                return Err(SatvError::NonFinite { field: "lambda3", iteration: k });
            }
        }
        Ok(())
    }

    /// Current discrete energy under the solver's weights.
    pub fn energy(&self) -> f64 {
        energy_of(&self.u, &self.f, &self.problem, &self.weights, self.cfg.lambda)
    }

    fn guarded_ratio(num: f64, den: f64, flag: &mut bool) -> f64 {
        if den == 0.0 {
            *flag = true;
            num
        } else {
            num / den
        }
    }

    fn residual_pair(&self) -> (f64, f64) {
        let (m, n) = self.u.shape();
        let area = (m * n) as f64;
        let gu = grad(&self.u);
        let hu = hess(&self.u);
        let r1_res = (&self.v.p1 - &gu.p1)
            .iter()
            .chain((&self.v.p2 - &gu.p2).iter())
            .map(|v| v.abs())
            .sum::<f64>()
            / area;
        let r2_res = {
            let d = [
                &self.w.w11 - &hu.w11,
                &self.w.w12 - &hu.w12,
                &self.w.w21 - &hu.w21,
                &self.w.w22 - &hu.w22,
            ];
            d.iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).sum::<f64>() / area
        };
        (r1_res, r2_res)
    }

    fn reference_quality(&self) -> (Option<f64>, Option<f64>) {
        match &self.reference {
            Some(r) => (
                metrics::psnr(r, &self.u).ok(),
                metrics::ssim(r, &self.u).ok(),
            ),
            None => (None, None),
        }
    }

    /// The `k = 0` record describing the initialization state.
    pub fn initial_record(&self) -> TraceRecord {
        let (r1_res, r2_res) = self.residual_pair();
        let (psnr, ssim) = self.reference_quality();
        TraceRecord {
            k: 0,
            r1_res,
            r2_res,
            l1: None,
            l2: None,
            ru: None,
            energy: self.energy(),
            delta1: None,
            delta2: None,
            psnr,
            ssim,
            wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
            guards: DivisionGuards::default(),
        }
    }

    /// Runs one full sweep and returns its diagnostics record.
    pub fn step(&mut self) -> Result<TraceRecord> {
        let u_prev = self.u.clone();
        let lam1_prev = self.lam1.clone();
        let lam2_prev = self.lam2.clone();

        self.update_u()?;
        self.update_weights()?;
        self.update_v();
        self.update_w();
        self.update_z();
        self.update_multipliers();
        self.k += 1;
        self.check_finite()?;

        let (r1_res, r2_res) = self.residual_pair();
        let mut guards = DivisionGuards::default();
        let l1_num = (&self.lam1.p1 - &lam1_prev.p1)
            .iter()
            .chain((&self.lam1.p2 - &lam1_prev.p2).iter())
            .map(|v| v.abs())
            .sum::<f64>();
        let l1 = Self::guarded_ratio(l1_num, lam1_prev.norm_l1(), &mut guards.l1);
        let l2_num: f64 = [
            &self.lam2.w11 - &lam2_prev.w11,
            &self.lam2.w12 - &lam2_prev.w12,
            &self.lam2.w21 - &lam2_prev.w21,
            &self.lam2.w22 - &lam2_prev.w22,
        ]
        .iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .sum();
        let l2 = Self::guarded_ratio(l2_num, lam2_prev.norm_l1(), &mut guards.l2);

        let ru_num = (self.u.values() - u_prev.values())
            .iter()
            .map(|v| v.abs())
            .sum::<f64>();
        let ru_den = u_prev.norm_l1();
        let ru = Self::guarded_ratio(ru_num, ru_den, &mut guards.ru);
        self.last_ru_num = ru_num;
        self.last_ru_den = ru_den;

        let (psnr, ssim) = self.reference_quality();

        Ok(TraceRecord {
            k: self.k,
            r1_res,
            r2_res,
            l1: Some(l1),
            l2: Some(l2),
            ru: Some(ru),
            energy: self.energy(),
            delta1: None,
            delta2: None,
            psnr,
            ssim,
            wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
            guards,
        })
    }

    /// Snapshot of the current iterate as a saddle proxy for Δ diagnostics.
    pub fn saddle_proxy(&self) -> SaddleProxy {
        SaddleProxy {
            v: self.v.clone(),
            w: self.w.clone(),
            alpha: self.weights.alpha.clone(),
            beta: self.weights.beta.clone(),
        }
    }

    fn drive(&mut self) -> Result<Vec<TraceRecord>> {
        let mut trace = vec![self.initial_record()];
        while self.k < self.cfg.max_iter {
            let rec = self.step()?;
            trace.push(rec);
            if self.converged() {
                break;
            }
        }
        Ok(trace)
    }
}

/// Executes the full solve: initialization, sweeps, stopping rule.
pub fn run(
    cfg: &SolverConfig,
    problem: &ProblemSpec,
    f: &ImageGrid,
    reference: Option<&ImageGrid>,
) -> Result<RunOutput> {
    let mut solver = Solver::new(cfg.clone(), problem.clone(), f, reference)?;
    let trace = solver.drive()?;
    let converged = solver.converged();
    Ok(RunOutput {
        u: solver.u,
        trace,
        converged,
    })
}

/// Runs the solve twice: the first pass supplies the final iterate as the
/// saddle proxy, the deterministic replay fills `Δ₁ᵏ, Δ₂ᵏ` into the trace.
pub fn run_with_deltas(
    cfg: &SolverConfig,
    problem: &ProblemSpec,
    f: &ImageGrid,
    reference: Option<&ImageGrid>,
) -> Result<RunOutput> {
    let mut first = Solver::new(cfg.clone(), problem.clone(), f, reference)?;
    let pass1 = first.drive()?;
    let saddle = first.saddle_proxy();
    let converged = first.converged();

    let mut second = Solver::new(cfg.clone(), problem.clone(), f, reference)?;
    let mut trace = Vec::with_capacity(pass1.len());
    trace.push(second.initial_record());
    for _ in 1..pass1.len() {
        let mut rec = second.step()?;
        let (d1, d2) = delta_pair(
            &second.weights.alpha,
            &second.weights.beta,
            &second.v,
            &second.w,
            &saddle,
        );
        rec.delta1 = Some(d1);
        rec.delta2 = Some(d2);
        trace.push(rec);
    }
    debug_assert_eq!(
        second.u.values(),
        first.u.values(),
        "deterministic replay must reproduce the first pass"
    );
    Ok(RunOutput {
        u: second.u,
        trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shrink_keeps_direction_and_cuts_magnitude() {
        let out = shrink([3.0, 4.0], 2.0);
        assert_abs_diff_eq!(out[0], 1.8, epsilon = 1e-14);
        assert_abs_diff_eq!(out[1], 2.4, epsilon = 1e-14);
        assert_eq!(shrink([0.0, 0.0, 0.0, 0.0], 5.0), [0.0; 4]);
        assert_eq!(shrink([1.5, -2.5], 0.0), [1.5, -2.5]);
        // 4-vector (1,1,1,1) has norm 2; threshold 0.5 leaves norm 1.5.
        let out = shrink([1.0; 4], 0.5);
        let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert_abs_diff_eq!(norm, 1.5, epsilon = 1e-14);
        for c in out {
            assert_abs_diff_eq!(c, 0.75, epsilon = 1e-14);
        }
    }

    #[test]
    fn shrink_below_threshold_returns_zero() {
        assert_eq!(shrink([0.3, -0.4], 0.5), [0.0, 0.0]);
        assert_eq!(shrink([0.3, -0.4], 0.6), [0.0, 0.0]);
    }

    #[test]
    fn shrink_is_the_prox_of_the_weighted_norm() {
        // Brute-force oracle: the prox value must not exceed the objective at
        // any sampled candidate.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..4 {
            let a = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let b = rng.random_range(0.0..4.0);
            let x = shrink(a, b);
            let objective = |p: [f64; 2]| {
                let norm = (p[0] * p[0] + p[1] * p[1]).sqrt();
                b * norm + 0.5 * ((p[0] - a[0]).powi(2) + (p[1] - a[1]).powi(2))
            };
            let best = objective(x);
            for _ in 0..100_000 {
                let cand = [
                    a[0] + rng.random_range(-10.0..10.0),
                    a[1] + rng.random_range(-10.0..10.0),
                ];
                assert!(objective(cand) + 1e-9 >= best);
            }
        }
    }

    #[test]
    fn constant_image_is_a_fixed_point() {
        let f = ImageGrid::constant(16, 16, 5.0, 88.0);
        let cfg = SolverConfig::default();
        let out = run(&cfg, &ProblemSpec::Denoise, &f, None).unwrap();
        assert!(out.converged);
        // Initialization record plus the single converged sweep.
        assert_eq!(out.trace.len(), 2);
        assert_eq!(out.trace[0].k, 0);
        assert!(out.trace[0].ru.is_none());
        let rec = &out.trace[1];
        assert_abs_diff_eq!(rec.r1_res, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rec.r2_res, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rec.ru.unwrap(), 0.0, epsilon = 1e-12);
        for (a, b) in out.u.values().iter().zip(f.values().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn fidelity_only_solve_returns_the_data() {
        // r1 = r2 = mu = 0 collapses the u-update to (1/lambda) u = f/lambda.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = ImageGrid::from_fn(12, 12, 5.0, |_, _| rng.random_range(0.0..255.0));
        let cfg = SolverConfig {
            r1: 0.0,
            r2: 0.0,
            gamma: 1.0, // keeps the v-subproblem well-posed with r1 = 0
            tau: 1.0,
            ..SolverConfig::default()
        };
        let mut solver = Solver::new(cfg, ProblemSpec::Denoise, &f, None).unwrap();
        solver.update_u().unwrap();
        for (a, b) in solver.u().values().iter().zip(f.values().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn consistent_splitting_keeps_u_equal_f() {
        // With v = grad f, w = hess f and zero multipliers, u = f solves the
        // normal equation identically.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = ImageGrid::from_fn(16, 16, 5.0, |_, _| rng.random_range(0.0..255.0));
        let cfg = SolverConfig::default();
        let mut solver = Solver::new(cfg, ProblemSpec::Denoise, &f, None).unwrap();
        solver.v = grad(&f);
        solver.w = hess(&f);
        solver.update_u().unwrap();
        let err = solver
            .u()
            .values()
            .iter()
            .zip(f.values().iter())
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        assert!(err < 1e-9 * 255.0, "max deviation {err}");
    }

    #[test]
    fn multiplier_update_examples() {
        let f = ImageGrid::constant(8, 8, 5.0, 10.0);
        let cfg = SolverConfig {
            r1: 2.0,
            ..SolverConfig::default()
        };
        let mut solver = Solver::new(cfg, ProblemSpec::Denoise, &f, None).unwrap();
        // Force a residual field grad(u) - v = (1, 0) by setting v off by 1.
        let gu = grad(solver.u());
        solver.v = Vec2Field {
            h: 5.0,
            p1: &gu.p1 - 1.0,
            p2: gu.p2.clone(),
        };
        solver.w = hess(solver.u());
        solver.update_multipliers();
        assert!(solver.lam1().p1.iter().all(|&v| v == 2.0));
        assert!(solver.lam1().p2.iter().all(|&v| v == 0.0));
        // Exactly satisfied constraints leave multipliers unchanged.
        solver.v = grad(solver.u());
        let before = solver.lam1().clone();
        solver.update_multipliers();
        assert_eq!(&before.p1, &solver.lam1().p1);
        // r1 = 0 freezes the first multiplier.
        let cfg0 = SolverConfig {
            r1: 0.0,
            gamma: 1.0,
            ..SolverConfig::default()
        };
        let mut s0 = Solver::new(cfg0, ProblemSpec::Denoise, &f, None).unwrap();
        s0.step().unwrap();
        assert!(s0.lam1().p1.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn division_guards_fire_on_the_first_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = ImageGrid::from_fn(12, 12, 5.0, |_, _| rng.random_range(0.0..255.0));
        let cfg = SolverConfig::default();
        let out = run(&cfg, &ProblemSpec::Denoise, &f, None).unwrap();
        // Multipliers start at zero, so the k = 1 relative change is reported
        // raw with its guard flag set.
        assert!(out.trace[1].guards.l1);
        assert!(out.trace[1].guards.l2);
        assert!(!out.trace[1].guards.ru);
        if out.trace.len() > 2 {
            assert!(!out.trace[2].guards.l1);
        }
    }

    #[test]
    fn energy_of_flat_zero_state_is_zero() {
        let f = ImageGrid::zeros(8, 8, 5.0);
        let w = WeightFields::from_image(&f);
        assert_eq!(energy_of(&f, &f, &ProblemSpec::Denoise, &w, 1.0), 0.0);
    }

    #[test]
    fn tiny_lambda_pins_the_solution_to_the_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let f = ImageGrid::from_fn(24, 24, 5.0, |_, _| rng.random_range(0.0..255.0));
        let cfg = SolverConfig {
            lambda: 1e-6,
            r1: 1.0,
            r2: 2.0,
            ..SolverConfig::default()
        };
        let out = run(&cfg, &ProblemSpec::Denoise, &f, None).unwrap();
        let dev = out
            .u
            .values()
            .iter()
            .zip(f.values().iter())
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        assert!(dev / 255.0 < 1e-3, "relative deviation {}", dev / 255.0);
    }

    #[test]
    fn constant_weight_deltas_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = ImageGrid::from_fn(16, 16, 5.0, |_, _| rng.random_range(0.0..255.0));
        let cfg = SolverConfig {
            weight_mode: WeightMode::Constant { alpha0: 3.0, beta0: 1.0 },
            max_iter: 12,
            tol: 1e-12,
            ..SolverConfig::default()
        };
        let out = run_with_deltas(&cfg, &ProblemSpec::Denoise, &f, None).unwrap();
        for rec in &out.trace[1..] {
            assert_eq!(rec.delta1, Some(0.0));
            assert_eq!(rec.delta2, Some(0.0));
        }
    }

    #[test]
    fn delta_at_the_proxy_itself_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = ImageGrid::from_fn(16, 16, 5.0, |_, _| rng.random_range(0.0..255.0));
        let cfg = SolverConfig {
            max_iter: 10,
            tol: 1e-14,
            ..SolverConfig::default()
        };
        let out = run_with_deltas(&cfg, &ProblemSpec::Denoise, &f, None).unwrap();
        let last = out.trace.last().unwrap();
        assert_eq!(last.delta1, Some(0.0));
        assert_eq!(last.delta2, Some(0.0));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = SolverConfig::default();
        assert!(SolverConfig { lambda: 0.0, ..base.clone() }.validate().is_err());
        assert!(SolverConfig { tol: 0.0, ..base.clone() }.validate().is_err());
        assert!(SolverConfig { r1: -1.0, ..base.clone() }.validate().is_err());
        assert!(SolverConfig {
            enable_first: false,
            enable_second: false,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            r1: 0.0,
            gamma: 0.0,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(base.validate().is_ok());
    }

    #[test]
    fn non_finite_state_aborts_with_a_named_iterate() {
        let f = ImageGrid::constant(8, 8, 5.0, 10.0);
        let mut solver = Solver::new(SolverConfig::default(), ProblemSpec::Denoise, &f, None).unwrap();
        // Poison a persistent multiplier; the next u-solve propagates it.
        solver.lam1.p1[[2, 3]] = f64::NAN;
        match solver.step() {
            Err(SatvError::NonFinite { field, iteration }) => {
                assert_eq!(field, "u");
                assert_eq!(iteration, 1);
            }
            other => panic!("expected a non-finite abort, got {other:?}"),
        }
    }

    #[test]
    fn mesh_mismatch_is_rejected() {
        let f = ImageGrid::constant(8, 8, 2.0, 1.0);
        let cfg = SolverConfig::default(); // h = 5
        assert!(Solver::new(cfg, ProblemSpec::Denoise, &f, None).is_err());
    }

    #[test]
    fn proximal_terms_keep_the_formulas_exact() {
        // Single-pixel check of the v-update closed form with gamma > 0.
        let f = ImageGrid::constant(8, 8, 5.0, 0.0);
        let cfg = SolverConfig {
            r1: 2.0,
            gamma: 1.0,
            mu: 0.5,
            tau: 0.25,
            weight_mode: WeightMode::Constant { alpha0: 1.5, beta0: 0.5 },
            ..SolverConfig::default()
        };
        let mut solver = Solver::new(cfg, ProblemSpec::Denoise, &f, None).unwrap();
        solver.update_weights().unwrap();
        solver.v = Vec2Field {
            h: 5.0,
            p1: Array2::from_elem((8, 8), 3.0),
            p2: Array2::from_elem((8, 8), 4.0),
        };
        solver.update_v();
        // grad u = 0, lam1 = 0: argument = gamma*v/(r1+gamma) = (1, 4/3),
        // norm 5/3, threshold alpha/(r1+gamma) = 0.5 => scale = (5/3-0.5)/(5/3).
        let scale = (5.0 / 3.0 - 0.5) / (5.0 / 3.0);
        for v in solver.v().p1.iter() {
            assert_abs_diff_eq!(*v, scale, epsilon = 1e-12);
        }
        for v in solver.v().p2.iter() {
            assert_abs_diff_eq!(*v, 4.0 / 3.0 * scale, epsilon = 1e-12);
        }
    }
}
