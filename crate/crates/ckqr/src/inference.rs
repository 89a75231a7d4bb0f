//! Sandwich covariance Σ̂_h = D̂⁻¹ V̂ D̂⁻¹ for the smoothed estimator,
//! normal-quantile confidence intervals, the naive (τ(1−τ)E[XX']-based)
//! variance for comparison, and the theoretical variance expansion
//! Σ(τ) − c_k·h·D⁻¹(τ) as a test oracle.

use crate::data::{dot, Dataset, FitResult};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::linalg::Mat;
use crate::qr_smooth::SmoothSpec;
use crate::simlab::designs::Design;
use crate::special::norm_quantile;

/// Plug-in covariance pieces for one smoothed fit. `se` is per-coefficient:
/// √(Σ̂_kk / n).
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub d_hat: Mat,
    pub v_hat: Mat,
    pub sigma_hat: Mat,
    pub se: Vec<f64>,
}

/// Sandwich covariance at the fitted point: D̂ is the objective Hessian,
/// V̂ = (1/n) Σ XᵢXᵢ'[K(−eᵢ/h) − τ]². Fails with `SingularHessian` when D̂'s
/// smallest eigenvalue falls under 1e-10·trace/d.
pub fn covariance(
    data: &Dataset,
    spec: &SmoothSpec,
    fit: &FitResult,
) -> Result<CovarianceEstimate> {
    let mut v_hat = Mat::zeros(data.d());
    for i in 0..data.n() {
        let row = data.row(i);
        let e = data.y()[i] - dot(row, &fit.beta);
        let psi = spec.kernel.int_k(-e / spec.h) - spec.tau;
        v_hat.add_outer(row, psi * psi);
    }
    v_hat.scale(1.0 / data.n() as f64);
    sandwich(data, fit, v_hat)
}

/// Naive covariance τ(1−τ)·D̂⁻¹·(1/n)ΣXᵢXᵢ'·D̂⁻¹, for contrast with the
/// sandwich form that prices in the variance reduction from smoothing.
pub fn naive_covariance(
    data: &Dataset,
    spec: &SmoothSpec,
    fit: &FitResult,
) -> Result<CovarianceEstimate> {
    let mut v_hat = data.gram();
    v_hat.scale(spec.tau * (1.0 - spec.tau));
    sandwich(data, fit, v_hat)
}

/// Shared sandwich assembly from the fit's Hessian and a middle matrix.
pub(crate) fn sandwich(data: &Dataset, fit: &FitResult, v_hat: Mat) -> Result<CovarianceEstimate> {
    let d_hat = fit.hessian.as_ref().ok_or(Error::SingularHessian)?.clone();
    let d = d_hat.dim();
    let floor = 1e-10 * d_hat.trace() / d as f64;
    if !(d_hat.min_eigenvalue() > floor && floor.is_finite() && floor > 0.0) {
        return Err(Error::SingularHessian);
    }
    let d_inv = d_hat.inverse_spd().ok_or(Error::SingularHessian)?;
    let mut sigma_hat = d_inv.matmul(&v_hat).matmul(&d_inv);
    sigma_hat.symmetrize();
    let n = data.n() as f64;
    let se = (0..d)
        .map(|k| (sigma_hat.get(k, k).max(0.0) / n).sqrt())
        .collect();
    Ok(CovarianceEstimate {
        d_hat,
        v_hat,
        sigma_hat,
        se,
    })
}

/// Two-sided confidence interval for one coefficient.
#[derive(Debug, Clone, Copy)]
pub struct ConfidenceInterval {
    pub k: usize,
    pub level: f64,
    pub lo: f64,
    pub hi: f64,
}

/// β̂_k ± z_{α/2}·se_k with z from the normal quantile routine.
pub fn confidence_interval(
    fit: &FitResult,
    cov: &CovarianceEstimate,
    k: usize,
    level: f64,
) -> Result<ConfidenceInterval> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::invalid(format!(
            "level must lie in (0,1), got {level}"
        )));
    }
    if k >= fit.beta.len() {
        return Err(Error::invalid(format!(
            "coefficient index {k} out of range"
        )));
    }
    let z = normal_z(level);
    let half = z * cov.se[k];
    Ok(ConfidenceInterval {
        k,
        level,
        lo: fit.beta[k] - half,
        hi: fit.beta[k] + half,
    })
}

/// z_{α/2} for a two-sided interval at the given level.
pub fn normal_z(level: f64) -> f64 {
    norm_quantile(0.5 + 0.5 * level)
}

/// Theoretical covariance Σ(τ) − c_k·h·D⁻¹(τ) of the smoothed estimator on a
/// closed-form design; the h = 0 case is the unsmoothed covariance Σ(τ).
pub fn variance_expansion_oracle(
    design: &Design,
    tau: f64,
    kernel: &Kernel,
    h: f64,
) -> Result<Mat> {
    let mut sigma = design.sigma_matrix(tau)?;
    if h != 0.0 {
        let d_inv = design
            .d_matrix(tau)?
            .inverse_spd()
            .ok_or(Error::SingularHessian)?;
        let c = kernel.smoothing_constant() * h;
        for i in 0..sigma.dim() {
            for j in 0..sigma.dim() {
                sigma.add(i, j, -c * d_inv.get(i, j));
            }
        }
    }
    Ok(sigma)
}
