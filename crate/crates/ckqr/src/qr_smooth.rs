//! Convolution-smoothed quantile regression.
//!
//! The smoothed objective replaces the empirical residual distribution in the
//! check-function integral with its kernel-smoothed version; equivalently it
//! convolves the check loss with k_h. For Gaussian-type kernels the
//! per-observation convolution has the closed form
//!
//!   ℓ(e) = τ·e − e·K(−e/h) − h·G(−e/h),
//!
//! with K the integrated kernel and G(t) = ∫_{-∞}^t z k(z) dz, so objective,
//! gradient (1/n)Σ Xᵢ[K(−eᵢ/h) − τ] and Hessian (1/n)Σ XᵢXᵢ' k_h(eᵢ) are all
//! exact. Minimization is damped Newton with warm starts along τ and h grids.

use crate::bandwidth::{rule_of_thumb, BandwidthRule};
use crate::data::{dot, Dataset, FitResult};
use crate::error::{Error, Result};
use crate::fmt::fmt_sig;
use crate::kernels::Kernel;
use crate::linalg::Mat;
use crate::solver::{minimize, NewtonCfg, Objective};
use std::io::Write;

/// Kernel, bandwidth and quantile level for one smoothed fit.
#[derive(Debug, Clone)]
pub struct SmoothSpec {
    pub kernel: Kernel,
    pub h: f64,
    pub tau: f64,
}

impl SmoothSpec {
    /// Working quantile range is [0.01, 0.99].
    pub fn new(kernel: Kernel, h: f64, tau: f64) -> Result<SmoothSpec> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid(format!(
                "bandwidth must be positive and finite, got {h}"
            )));
        }
        if !(0.01..=0.99).contains(&tau) {
            return Err(Error::invalid(format!(
                "tau must lie in [0.01, 0.99], got {tau}"
            )));
        }
        Ok(SmoothSpec { kernel, h, tau })
    }

    /// Internal constructor for the exact-fit continuation ladder, which only
    /// needs tau in (0,1) and drives h below any user-facing range.
    pub(crate) fn unchecked(kernel: Kernel, h: f64, tau: f64) -> SmoothSpec {
        SmoothSpec { kernel, h, tau }
    }
}

/// Convolution of the check loss with k_h, evaluated at residual e.
#[inline]
pub(crate) fn conv_loss(kernel: &Kernel, tau: f64, h: f64, e: f64) -> f64 {
    let t = -e / h;
    tau * e - e * kernel.int_k(t) - h * kernel.int_zk(t)
}

pub(crate) struct SmoothProblem<'a> {
    pub data: &'a Dataset,
    pub spec: &'a SmoothSpec,
    pub weights: Option<&'a [f64]>,
}

impl<'a> SmoothProblem<'a> {
    #[inline]
    fn weight(&self, i: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[i])
    }
}

impl<'a> Objective for SmoothProblem<'a> {
    fn dim(&self) -> usize {
        self.data.d()
    }

    fn value(&self, b: &[f64]) -> f64 {
        let (tau, h) = (self.spec.tau, self.spec.h);
        let mut s = 0.0;
        for i in 0..self.data.n() {
            let e = self.data.y()[i] - dot(self.data.row(i), b);
            s += self.weight(i) * conv_loss(&self.spec.kernel, tau, h, e);
        }
        s / self.data.n() as f64
    }

    fn gradient(&self, b: &[f64]) -> Vec<f64> {
        let (tau, h) = (self.spec.tau, self.spec.h);
        let d = self.data.d();
        let mut g = vec![0.0; d];
        for i in 0..self.data.n() {
            let row = self.data.row(i);
            let e = self.data.y()[i] - dot(row, b);
            let c = self.weight(i) * (self.spec.kernel.int_k(-e / h) - tau);
            for j in 0..d {
                g[j] += c * row[j];
            }
        }
        for v in &mut g {
            *v /= self.data.n() as f64;
        }
        g
    }

    fn hessian(&self, b: &[f64]) -> Mat {
        let h = self.spec.h;
        let mut m = Mat::zeros(self.data.d());
        for i in 0..self.data.n() {
            let row = self.data.row(i);
            let e = self.data.y()[i] - dot(row, b);
            let w = self.weight(i) * self.spec.kernel.k(e / h) / h;
            if w != 0.0 {
                m.add_outer(row, w);
            }
        }
        m.scale(1.0 / self.data.n() as f64);
        m
    }
}

/// Smoothed objective (1/n) Σ ∫ ρ_τ(eᵢ + h z) k(z) dz in closed form.
pub fn smoothed_objective(data: &Dataset, spec: &SmoothSpec, b: &[f64]) -> f64 {
    SmoothProblem {
        data,
        spec,
        weights: None,
    }
    .value(b)
}

/// Analytic gradient (1/n) Σ Xᵢ [K(−eᵢ/h) − τ].
pub fn smoothed_gradient(data: &Dataset, spec: &SmoothSpec, b: &[f64]) -> Vec<f64> {
    SmoothProblem {
        data,
        spec,
        weights: None,
    }
    .gradient(b)
}

/// Analytic Hessian (1/n) Σ XᵢXᵢ' k_h(−eᵢ); symmetric by construction, and
/// possibly indefinite for kernels of order four and above.
pub fn smoothed_hessian(data: &Dataset, spec: &SmoothSpec, b: &[f64]) -> Mat {
    SmoothProblem {
        data,
        spec,
        weights: None,
    }
    .hessian(b)
}

/// Gradient convergence tolerance: 1e-10 relative to the covariate scale.
pub(crate) fn grad_tolerance(data: &Dataset) -> f64 {
    1e-10 * data.mean_row_norm().max(1.0)
}

/// Default initializer: least squares, with the intercept shifted by the
/// τ-quantile of the least-squares residuals.
pub(crate) fn default_init(data: &Dataset, tau: f64) -> Vec<f64> {
    let d = data.d();
    let n = data.n();
    let gram = data.gram();
    let mut xy = vec![0.0; d];
    for i in 0..n {
        let row = data.row(i);
        for j in 0..d {
            xy[j] += row[j] * data.y()[i];
        }
    }
    for v in &mut xy {
        *v /= n as f64;
    }
    let mut beta = match gram.cholesky() {
        Some(ch) => ch.solve(&xy),
        None => vec![0.0; d],
    };
    let resid = data.residuals(&beta);
    let q = quantile_type7(&resid, tau);
    if let Some((j, c)) = constant_column(data) {
        beta[j] += q / c;
    }
    beta
}

/// First column that is constant across rows, with its value.
fn constant_column(data: &Dataset) -> Option<(usize, f64)> {
    'cols: for j in 0..data.d() {
        let c = data.row(0)[j];
        for i in 1..data.n() {
            if (data.row(i)[j] - c).abs() > 1e-12 * (1.0 + c.abs()) {
                continue 'cols;
            }
        }
        if c.abs() > 1e-12 {
            return Some((j, c));
        }
    }
    None
}

/// Type-7 (linear interpolation) sample quantile.
pub(crate) fn quantile_type7(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n == 1 {
        return v[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < n {
        v[lo] * (1.0 - frac) + v[lo + 1] * frac
    } else {
        v[n - 1]
    }
}

/// Minimize the smoothed objective; damped Newton from `init` (or the
/// least-squares initializer). Errors with `NoConvergence` past the
/// iteration cap.
pub fn fit_smoothed(data: &Dataset, spec: &SmoothSpec, init: Option<&[f64]>) -> Result<FitResult> {
    fit_smoothed_weighted(data, spec, init, None)
}

pub(crate) fn fit_smoothed_weighted(
    data: &Dataset,
    spec: &SmoothSpec,
    init: Option<&[f64]>,
    weights: Option<&[f64]>,
) -> Result<FitResult> {
    let out = fit_smoothed_raw(data, spec, init, weights, 200);
    if !out.converged {
        return Err(Error::NoConvergence {
            iterations: out.iterations,
            grad_norm: out.grad_norm,
        });
    }
    Ok(FitResult {
        beta: out.beta,
        tau: spec.tau,
        h: spec.h,
        objective: out.objective,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
        converged: true,
        hessian: Some(out.hessian),
    })
}

/// Newton run without the convergence gate; the continuation ladder keeps
/// partial progress from rungs that stall.
pub(crate) fn fit_smoothed_raw(
    data: &Dataset,
    spec: &SmoothSpec,
    init: Option<&[f64]>,
    weights: Option<&[f64]>,
    max_iter: usize,
) -> crate::solver::NewtonOutcome {
    let init = match init {
        Some(b) => b.to_vec(),
        None => default_init(data, spec.tau),
    };
    let problem = SmoothProblem {
        data,
        spec,
        weights,
    };
    let cfg = NewtonCfg {
        grad_tol: grad_tolerance(data),
        max_iter,
    };
    minimize(&problem, init, &cfg)
}

/// Quantile-path derivative ∂β̂_h(τ)/∂τ = H⁻¹ X̄ at the fitted point.
/// Requires a converged fit whose Hessian clears the eigenvalue floor
/// 1e-10·trace/d.
pub fn quantile_path_derivative(
    data: &Dataset,
    _spec: &SmoothSpec,
    fit: &FitResult,
) -> Result<Vec<f64>> {
    let hess = fit.hessian.as_ref().ok_or(Error::SingularHessian)?;
    if !fit.converged {
        return Err(Error::invalid(
            "quantile path derivative needs a converged fit",
        ));
    }
    solve_spd_floored(hess, &data.x_mean())
}

/// Solve H v = rhs after checking the eigenvalue floor 1e-10·trace/d.
pub(crate) fn solve_spd_floored(hess: &Mat, rhs: &[f64]) -> Result<Vec<f64>> {
    let d = hess.dim();
    let floor = 1e-10 * hess.trace() / d as f64;
    if !(hess.min_eigenvalue() > floor && floor.is_finite()) {
        return Err(Error::SingularHessian);
    }
    hess.cholesky()
        .map(|ch| ch.solve(rhs))
        .ok_or(Error::SingularHessian)
}

/// Smoothed fits over a τ grid with warm starts, plus path derivatives.
#[derive(Debug, Clone)]
pub struct QuantileProcess {
    pub taus: Vec<f64>,
    /// β̂_h(τ_j); NaN-filled when that grid point failed
    pub betas: Vec<Vec<f64>>,
    /// β̂_h^{(1)}(τ_j); NaN-filled when unavailable
    pub dbetas: Vec<Vec<f64>>,
    pub h_used: Vec<f64>,
    pub converged: Vec<bool>,
    d: usize,
}

impl QuantileProcess {
    pub fn d(&self) -> usize {
        self.d
    }

    /// CSV columns: tau, h, beta_0..beta_{d-1}, dbeta_0..dbeta_{d-1}, converged.
    pub fn to_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        write!(w, "tau,h")?;
        for j in 0..self.d {
            write!(w, ",beta_{j}")?;
        }
        for j in 0..self.d {
            write!(w, ",dbeta_{j}")?;
        }
        writeln!(w, ",converged")?;
        for (j, &tau) in self.taus.iter().enumerate() {
            write!(w, "{},{}", fmt_sig(tau, 10), fmt_sig(self.h_used[j], 10))?;
            for v in &self.betas[j] {
                write!(w, ",{}", fmt_sig(*v, 10))?;
            }
            for v in &self.dbetas[j] {
                write!(w, ",{}", fmt_sig(*v, 10))?;
            }
            writeln!(w, ",{}", u8::from(self.converged[j]))?;
        }
        Ok(())
    }
}

/// Fit the process over a strictly increasing τ grid inside [0.01, 0.99],
/// warm-starting each fit from the previous solution. Individual grid-point
/// failures are recorded; the call fails once more than 20% of points fail.
pub fn fit_process(
    data: &Dataset,
    taus: &[f64],
    kernel: &Kernel,
    rule: &BandwidthRule,
) -> Result<QuantileProcess> {
    if taus.is_empty() {
        return Err(Error::invalid("empty tau grid"));
    }
    if taus.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("tau grid must be strictly increasing"));
    }
    if taus.iter().any(|&t| !(0.01..=0.99).contains(&t)) {
        return Err(Error::invalid("tau grid must lie in [0.01, 0.99]"));
    }
    let h = resolve_bandwidth(data, rule)?;
    let d = data.d();
    let mut proc = QuantileProcess {
        taus: taus.to_vec(),
        betas: Vec::with_capacity(taus.len()),
        dbetas: Vec::with_capacity(taus.len()),
        h_used: Vec::with_capacity(taus.len()),
        converged: Vec::with_capacity(taus.len()),
        d,
    };
    let mut warm: Option<Vec<f64>> = None;
    let mut failed = 0usize;
    for &tau in taus {
        let spec = SmoothSpec::new(kernel.clone(), h, tau)?;
        let fit = fit_smoothed(data, &spec, warm.as_deref());
        match fit {
            Ok(fit) => {
                let dbeta = quantile_path_derivative(data, &spec, &fit);
                let ok = dbeta.is_ok();
                proc.dbetas
                    .push(dbeta.unwrap_or_else(|_| vec![f64::NAN; d]));
                warm = Some(fit.beta.clone());
                proc.betas.push(fit.beta);
                proc.h_used.push(h);
                proc.converged.push(ok);
                if !ok {
                    failed += 1;
                }
            }
            Err(_) => {
                failed += 1;
                proc.betas.push(vec![f64::NAN; d]);
                proc.dbetas.push(vec![f64::NAN; d]);
                proc.h_used.push(h);
                proc.converged.push(false);
            }
        }
    }
    if failed * 5 > taus.len() {
        return Err(Error::ProcessFailed {
            failed,
            total: taus.len(),
        });
    }
    Ok(proc)
}

/// Resolve a bandwidth rule against a dataset. The rule of thumb consumes
/// exact-fit median-regression residuals.
pub fn resolve_bandwidth(data: &Dataset, rule: &BandwidthRule) -> Result<f64> {
    match rule {
        BandwidthRule::Fixed(h) => {
            if *h > 0.0 && h.is_finite() {
                Ok(*h)
            } else {
                Err(Error::invalid(format!(
                    "fixed bandwidth must be positive, got {h}"
                )))
            }
        }
        BandwidthRule::RuleOfThumb => {
            let fit = crate::qr_exact::fit_exact(data, 0.5)?;
            rule_of_thumb(&data.residuals(&fit.beta), data.n())
        }
        BandwidthRule::OptimalOracle => Err(Error::invalid(
            "oracle bandwidth needs a simulation design; use `mc`",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::all_kernels;
    use crate::quad::integrate_split;
    use crate::special::{norm_cdf, norm_pdf};
    use rand::Rng;

    fn intercept_only(y: Vec<f64>) -> Dataset {
        let n = y.len();
        Dataset::new(y, vec![1.0; n], 1).unwrap()
    }

    fn spec2(h: f64, tau: f64) -> SmoothSpec {
        SmoothSpec::new(Kernel::gaussian(2).unwrap(), h, tau).unwrap()
    }

    fn random_dataset(rng: &mut impl Rng, n: usize, d: usize) -> Dataset {
        loop {
            let mut x = Vec::with_capacity(n * d);
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                x.push(1.0);
                for _ in 1..d {
                    x.push(1.0 + 4.0 * rng.random::<f64>());
                }
                y.push(rng.random::<f64>() * 4.0 - 2.0);
            }
            if let Ok(ds) = Dataset::new(y, x, d) {
                return ds;
            }
        }
    }

    #[test]
    fn objective_single_zero_residual() {
        // one observation with zero residual: ℓ(0) = h φ(0)
        let ds = Dataset::new(vec![5.0, 5.0], vec![1.0, 1.0], 1).unwrap();
        for h in [0.3, 1.0, 2.5] {
            let v = smoothed_objective(&ds, &spec2(h, 0.37), &[5.0]);
            assert!((v - h * norm_pdf(0.0)).abs() < 1e-14, "h={h}");
        }
    }

    #[test]
    fn objective_symmetric_pair() {
        // y = (−1, 1), b = 0, τ = 0.5, h = 1: mean of ℓ(±1) with
        // ℓ(e) = τe − eΦ(−e) + φ(e); both give Φ(1) + φ(1) − 1/2.
        let ds = intercept_only(vec![-1.0, 1.0]);
        let v = smoothed_objective(&ds, &spec2(1.0, 0.5), &[0.0]);
        let expect = norm_cdf(1.0) + norm_pdf(1.0) - 0.5;
        assert!((v - expect).abs() < 1e-15, "{v} vs {expect}");
        assert!((v - 0.5833154705876863).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_quadrature() {
        // ∫ ρ_τ(e + h z) k(z) dz against the adaptive oracle, all kernels
        let mut rng = crate::rng::stream(11, 1, 0);
        for kernel in all_kernels() {
            for _ in 0..50 {
                let e = rng.random::<f64>() * 6.0 - 3.0;
                let tau = 0.05 + 0.9 * rng.random::<f64>();
                let h = 0.05 + rng.random::<f64>();
                let kink = -e / h;
                let oracle = integrate_split(
                    |z| {
                        let u = e + h * z;
                        let k = kernel.k(z);
                        u * (tau - f64::from(u < 0.0)) * k
                    },
                    -12.0,
                    12.0,
                    &[kink],
                    1e-11,
                );
                let closed = conv_loss(&kernel, tau, h, e);
                assert!(
                    (closed - oracle).abs() < 1e-9,
                    "{}: e={e}, tau={tau}, h={h}: {closed} vs {oracle}",
                    kernel.name()
                );
            }
        }
    }

    #[test]
    fn objective_approaches_check_loss() {
        let mut rng = crate::rng::stream(13, 1, 0);
        let ds = random_dataset(&mut rng, 40, 2);
        let b = vec![0.3, 0.5];
        let check = crate::qr_exact::check_objective(&ds, &b, 0.3).unwrap();
        for kernel in all_kernels() {
            let bound = kernel.abs_first_moment();
            for h in [0.5, 0.1, 1e-3, 1e-8, 1e-12] {
                let spec = SmoothSpec::unchecked(kernel.clone(), h, 0.3);
                let v = smoothed_objective(&ds, &spec, &b);
                assert!(
                    (v - check).abs() <= h * bound + 1e-14,
                    "{} h={h}: |{v} - {check}| > {}",
                    kernel.name(),
                    h * bound
                );
            }
        }
    }

    #[test]
    fn gradient_zero_at_perfect_fit() {
        // all residuals zero at τ = 1/2 makes every K(0) − τ term vanish
        let ds = Dataset::new(vec![2.0, 3.0, 4.0], vec![1.0, 1.0, 1.0, 2.0, 1.0, 3.0], 2).unwrap();
        for kernel in all_kernels() {
            let spec = SmoothSpec::new(kernel, 0.7, 0.5).unwrap();
            let g = smoothed_gradient(&ds, &spec, &[1.0, 1.0]);
            assert!(g.iter().all(|v| v.abs() < 1e-15), "{g:?}");
        }
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let mut rng = crate::rng::stream(17, 1, 0);
        for trial in 0..40 {
            let kernel = all_kernels().remove(trial % 4);
            let d = 1 + trial % 3;
            let ds = random_dataset(&mut rng, 30, d);
            let b: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let tau = 0.05 + 0.9 * rng.random::<f64>();
            let h = 0.1 + 0.9 * rng.random::<f64>();
            let spec = SmoothSpec::new(kernel, h, tau).unwrap();
            let g = smoothed_gradient(&ds, &spec, &b);
            let hess = smoothed_hessian(&ds, &spec, &b);
            let scale = ds.mean_row_norm();
            for j in 0..d {
                let mut bp = b.clone();
                let mut bm = b.clone();
                let step = 1e-6 * (1.0 + b[j].abs());
                bp[j] += step;
                bm[j] -= step;
                let fd = (smoothed_objective(&ds, &spec, &bp)
                    - smoothed_objective(&ds, &spec, &bm))
                    / (2.0 * step);
                assert!(
                    (fd - g[j]).abs() <= 1e-5 * scale.max(g[j].abs()),
                    "grad: {} vs {}",
                    g[j],
                    fd
                );
                let gp = smoothed_gradient(&ds, &spec, &bp);
                let gm = smoothed_gradient(&ds, &spec, &bm);
                for i in 0..d {
                    let fd2 = (gp[i] - gm[i]) / (2.0 * step);
                    assert!(
                        (fd2 - hess.get(i, j)).abs()
                            <= 1e-5 * (scale / h).max(hess.get(i, j).abs()),
                        "hess ({i},{j}): {} vs {}",
                        hess.get(i, j),
                        fd2
                    );
                }
            }
        }
    }

    #[test]
    fn hessian_closed_forms() {
        // intercept-only, all residuals zero: H = k(0)/h = 1/(h√(2π))
        let ds = intercept_only(vec![4.0, 4.0, 4.0]);
        let h = 0.37;
        let hess = smoothed_hessian(&ds, &spec2(h, 0.5), &[4.0]);
        assert!((hess.get(0, 0) - norm_pdf(0.0) / h).abs() < 1e-14);
        // symmetry is structural
        let mut rng = crate::rng::stream(23, 1, 0);
        let ds = random_dataset(&mut rng, 25, 3);
        let spec = SmoothSpec::new(Kernel::gaussian(4).unwrap(), 0.4, 0.3).unwrap();
        let hess = smoothed_hessian(&ds, &spec, &[0.1, 0.2, -0.3]);
        assert_eq!(hess.max_abs_asymmetry(), 0.0);
    }

    #[test]
    fn gaussian4_hessian_can_be_indefinite() {
        // residuals sitting where the order-4 kernel is negative
        let h = 1.0;
        let ds = intercept_only(vec![-2.0, 2.0]);
        let spec = SmoothSpec::new(Kernel::gaussian(4).unwrap(), h, 0.5).unwrap();
        let hess = smoothed_hessian(&ds, &spec, &[0.0]);
        assert!(hess.get(0, 0) < 0.0, "{}", hess.get(0, 0));
    }

    #[test]
    fn fit_symmetric_three_points() {
        let ds = intercept_only(vec![1.0, 2.0, 3.0]);
        for h in [0.1, 0.5, 2.0] {
            let fit = fit_smoothed(&ds, &spec2(h, 0.5), None).unwrap();
            assert!((fit.beta[0] - 2.0).abs() < 1e-9, "h={h}: {}", fit.beta[0]);
            assert!(fit.grad_norm <= grad_tolerance(&ds));
        }
    }

    #[test]
    fn first_order_condition_is_nadaraya() {
        // no-covariate fit solves F̂_h(β) = τ; compare against bisection
        let mut rng = crate::rng::stream(29, 1, 0);
        let y: Vec<f64> = (0..60).map(|_| rng.random::<f64>() * 3.0).collect();
        let ds = intercept_only(y.clone());
        for &tau in &[0.2, 0.5, 0.77] {
            let h = 0.4;
            let spec = spec2(h, tau);
            let fit = fit_smoothed(&ds, &spec, None).unwrap();
            let kernel = Kernel::gaussian(2).unwrap();
            let fhat = |t: f64| -> f64 {
                y.iter().map(|&yi| kernel.int_k((t - yi) / h)).sum::<f64>() / y.len() as f64
            };
            let (mut lo, mut hi) = (-5.0, 8.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if fhat(mid) < tau {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let root = 0.5 * (lo + hi);
            assert!(
                (fit.beta[0] - root).abs() < 1e-8,
                "tau={tau}: {} vs {root}",
                fit.beta[0]
            );
        }
    }

    #[test]
    fn scale_equivariance_with_scaled_bandwidth() {
        let mut rng = crate::rng::stream(31, 1, 0);
        let ds = random_dataset(&mut rng, 50, 2);
        let a = 3.5;
        let scaled = Dataset::new(
            ds.y().iter().map(|v| a * v).collect(),
            (0..ds.n()).flat_map(|i| ds.row(i).to_vec()).collect(),
            2,
        )
        .unwrap();
        for kernel in all_kernels() {
            let h = 0.5;
            let fit =
                fit_smoothed(&ds, &SmoothSpec::new(kernel.clone(), h, 0.3).unwrap(), None).unwrap();
            let fit_scaled =
                fit_smoothed(&scaled, &SmoothSpec::new(kernel, a * h, 0.3).unwrap(), None).unwrap();
            for j in 0..2 {
                assert!(
                    (fit_scaled.beta[j] - a * fit.beta[j]).abs()
                        < 1e-7 * (1.0 + a * fit.beta[j].abs()),
                    "{} vs {}",
                    fit_scaled.beta[j],
                    a * fit.beta[j]
                );
            }
        }
    }

    #[test]
    fn shift_equivariance() {
        let mut rng = crate::rng::stream(37, 1, 0);
        let ds = random_dataset(&mut rng, 50, 2);
        let c = [0.7, -1.3];
        let shifted = Dataset::new(
            (0..ds.n())
                .map(|i| ds.y()[i] + dot(ds.row(i), &c))
                .collect(),
            (0..ds.n()).flat_map(|i| ds.row(i).to_vec()).collect(),
            2,
        )
        .unwrap();
        let spec = spec2(0.4, 0.7);
        let fit = fit_smoothed(&ds, &spec, None).unwrap();
        let fit_shift = fit_smoothed(&shifted, &spec, None).unwrap();
        for j in 0..2 {
            assert!((fit_shift.beta[j] - fit.beta[j] - c[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn path_derivative_matches_finite_difference() {
        let mut rng = crate::rng::stream(41, 1, 0);
        let ds = random_dataset(&mut rng, 300, 2);
        let h = 0.5;
        let tau = 0.45;
        let spec = spec2(h, tau);
        let fit = fit_smoothed(&ds, &spec, None).unwrap();
        let dbeta = quantile_path_derivative(&ds, &spec, &fit).unwrap();
        let delta = 1e-4;
        let up = fit_smoothed(&ds, &spec2(h, tau + delta), Some(&fit.beta)).unwrap();
        let dn = fit_smoothed(&ds, &spec2(h, tau - delta), Some(&fit.beta)).unwrap();
        for j in 0..2 {
            let fd = (up.beta[j] - dn.beta[j]) / (2.0 * delta);
            assert!(
                (fd - dbeta[j]).abs() <= 1e-3 * fd.abs().max(1.0),
                "j={j}: {} vs {fd}",
                dbeta[j]
            );
        }
        // PD Hessian means the fitted quantile at x̄ rises with τ
        let xbar = ds.x_mean();
        assert!(dot(&xbar, &dbeta) > 0.0);
    }

    #[test]
    fn qdf_of_uniform_is_one() {
        let mut rng = crate::rng::stream(43, 1, 0);
        let y: Vec<f64> = (0..4000).map(|_| rng.random::<f64>()).collect();
        let ds = intercept_only(y);
        let spec = spec2(0.06, 0.5);
        let fit = fit_smoothed(&ds, &spec, None).unwrap();
        let dbeta = quantile_path_derivative(&ds, &spec, &fit).unwrap();
        assert!((dbeta[0] - 1.0).abs() < 0.15, "{}", dbeta[0]);
    }

    #[test]
    fn process_symmetry_and_consistency() {
        let y = vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
        let ds = intercept_only(y);
        let kernel = Kernel::gaussian(2).unwrap();
        let proc =
            fit_process(&ds, &[0.25, 0.5, 0.75], &kernel, &BandwidthRule::Fixed(0.8)).unwrap();
        assert!((proc.betas[1][0]).abs() < 1e-6);
        assert!((proc.betas[0][0] + proc.betas[2][0]).abs() < 1e-6);
        // single-τ grid equals a direct fit
        let single = fit_process(&ds, &[0.5], &kernel, &BandwidthRule::Fixed(0.8)).unwrap();
        let direct = fit_smoothed(&ds, &spec2(0.8, 0.5), None).unwrap();
        assert!((single.betas[0][0] - direct.beta[0]).abs() < 1e-12);
    }

    #[test]
    fn process_rejects_bad_grids() {
        let ds = intercept_only(vec![1.0, 2.0, 3.0]);
        let kernel = Kernel::gaussian(2).unwrap();
        assert!(fit_process(&ds, &[0.5, 0.4], &kernel, &BandwidthRule::Fixed(0.5)).is_err());
        assert!(fit_process(&ds, &[0.001, 0.5], &kernel, &BandwidthRule::Fixed(0.5)).is_err());
        assert!(fit_process(&ds, &[], &kernel, &BandwidthRule::Fixed(0.5)).is_err());
    }

    #[test]
    fn process_csv_shape() {
        let ds = intercept_only(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let kernel = Kernel::gaussian(2).unwrap();
        let proc = fit_process(&ds, &[0.3, 0.6], &kernel, &BandwidthRule::Fixed(0.7)).unwrap();
        let mut buf = Vec::new();
        proc.to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "tau,h,beta_0,dbeta_0,converged");
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn spec_validation() {
        let kernel = Kernel::gaussian(2).unwrap();
        assert!(SmoothSpec::new(kernel.clone(), 0.0, 0.5).is_err());
        assert!(SmoothSpec::new(kernel.clone(), f64::INFINITY, 0.5).is_err());
        assert!(SmoothSpec::new(kernel.clone(), 0.5, 0.995).is_err());
        assert!(SmoothSpec::new(kernel, 0.5, 0.5).is_ok());
    }
}
