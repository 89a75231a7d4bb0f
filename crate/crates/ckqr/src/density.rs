//! Conditional quantile-density and pdf-curve estimation, plus the two-stage
//! sample-splitting efficient estimator.
//!
//! Under a linear quantile model the quantile density is q(τ|x) = x'β^{(1)}(τ),
//! estimated by x'·H⁻¹·X̄ from the smoothed fit's Hessian — no nonparametric
//! regression in x, so the covariate dimension never enters the rate. The pdf
//! curve maps a τ grid through τ ↦ (x'β̂(τ), 1/(x'β̂^{(1)}(τ))), tracing the
//! conditional density's graph. The efficient estimator fits the qdf on the
//! first m rows and reweights the check objective on the rest.

use crate::bandwidth::BandwidthRule;
use crate::data::{dot, Dataset, FitResult};
use crate::error::{Error, Result};
use crate::fmt::fmt_sig;
use crate::kernels::Kernel;
use crate::linalg::Mat;
use crate::qr_exact::fit_exact_weighted;
use crate::qr_smooth::{
    fit_process, fit_smoothed, quantile_path_derivative, resolve_bandwidth, solve_spd_floored,
    SmoothSpec,
};
use crate::rng::{stream, TAG_SPLIT};
use crate::simlab::designs::Design;
use rand::Rng;
use std::io::Write;

/// Conditional quantile density estimate q̂_h(τ|x) = x'·H⁻¹·X̄ at the fitted
/// point. A nonpositive value is possible off the covariate support; callers
/// flag rather than repair it.
pub fn qdf_estimate(data: &Dataset, _spec: &SmoothSpec, fit: &FitResult, x: &[f64]) -> Result<f64> {
    if x.len() != data.d() {
        return Err(Error::invalid("evaluation covariate has wrong length"));
    }
    let hess = fit.hessian.as_ref().ok_or(Error::SingularHessian)?;
    let dbeta = solve_spd_floored(hess, &data.x_mean())?;
    Ok(dot(x, &dbeta))
}

/// The pdf-curve estimate over a τ grid at a fixed covariate value.
#[derive(Debug, Clone)]
pub struct PdfCurve {
    pub taus: Vec<f64>,
    /// fitted quantiles x'β̂_h(τ)
    pub q_hat: Vec<f64>,
    /// density values 1/(x'β̂_h^{(1)}(τ)); kept as computed even when negative
    pub f_hat: Vec<f64>,
    /// true when the qdf was nonpositive or the grid point failed
    pub flagged: Vec<bool>,
    pub x: Vec<f64>,
}

impl PdfCurve {
    /// CSV columns: tau, q_hat, f_hat, flagged.
    pub fn to_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "tau,q_hat,f_hat,flagged")?;
        for j in 0..self.taus.len() {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_sig(self.taus[j], 10),
                fmt_sig(self.q_hat[j], 10),
                fmt_sig(self.f_hat[j], 10),
                u8::from(self.flagged[j])
            )?;
        }
        Ok(())
    }

    /// Riemann sum Σ f̂_j·(q̂_{j+1} − q̂_j); near τ_max − τ_min when the curve
    /// is clean, the discrete version of a density integrating to one.
    pub fn normalization_sum(&self) -> f64 {
        let mut s = 0.0;
        for j in 0..self.taus.len().saturating_sub(1) {
            s += self.f_hat[j] * (self.q_hat[j + 1] - self.q_hat[j]);
        }
        s
    }
}

/// Fit the quantile process and map it through the pdf-curve transform at x.
pub fn pdf_curve(
    data: &Dataset,
    kernel: &Kernel,
    rule: &BandwidthRule,
    taus: &[f64],
    x: &[f64],
) -> Result<PdfCurve> {
    if x.len() != data.d() {
        return Err(Error::invalid("evaluation covariate has wrong length"));
    }
    let proc = fit_process(data, taus, kernel, rule)?;
    let mut curve = PdfCurve {
        taus: taus.to_vec(),
        q_hat: Vec::with_capacity(taus.len()),
        f_hat: Vec::with_capacity(taus.len()),
        flagged: Vec::with_capacity(taus.len()),
        x: x.to_vec(),
    };
    for j in 0..taus.len() {
        let q = dot(x, &proc.betas[j]);
        let qdf = dot(x, &proc.dbetas[j]);
        curve.q_hat.push(q);
        curve.f_hat.push(1.0 / qdf);
        curve.flagged.push(!proc.converged[j] || !(qdf > 0.0));
    }
    Ok(curve)
}

/// Two-stage efficient fit: stage one estimates the conditional qdf on the
/// first m rows of a seeded shuffle, stage two minimizes the check objective
/// on the remaining rows weighted by 1/q̌_h(τ|Xᵢ).
#[derive(Debug, Clone)]
pub struct EfficientFit {
    pub beta: Vec<f64>,
    pub tau: f64,
    /// stage-one subsample size
    pub m: usize,
    /// clamped stage-one qdf values q̌_h(τ|Xᵢ) for the stage-two rows
    pub weights: Vec<f64>,
    pub clamped_count: usize,
    /// stage-one bandwidth
    pub h_stage1: f64,
    pub objective: f64,
    pub converged: bool,
}

impl EfficientFit {
    pub fn to_json(&self) -> String {
        let beta: Vec<String> = self.beta.iter().map(|b| fmt_sig(*b, 17)).collect();
        format!(
            "{{\"estimator\":\"efficient\",\"beta\":[{}],\"tau\":{},\"h\":{},\"m\":{},\"clamped_count\":{},\"objective\":{},\"converged\":{}}}",
            beta.join(","),
            fmt_sig(self.tau, 17),
            fmt_sig(self.h_stage1, 17),
            self.m,
            self.clamped_count,
            fmt_sig(self.objective, 17),
            self.converged
        )
    }
}

/// Weight clamp band, as multiples of the median stage-one qdf value.
const CLAMP_LO: f64 = 0.05;
const CLAMP_HI: f64 = 20.0;

/// Rows are shuffled by `seed` before splitting; the default split size is
/// ⌊n^{0.4}⌋, which is o(√n).
pub fn efficient_fit(
    data: &Dataset,
    tau: f64,
    kernel: &Kernel,
    rule: &BandwidthRule,
    m: Option<usize>,
    seed: u64,
) -> Result<EfficientFit> {
    let n = data.n();
    let d = data.d();
    let m = m.unwrap_or((n as f64).powf(0.4).floor() as usize);
    if m < 2 || m >= n {
        return Err(Error::invalid(format!("need 2 <= m < n, got m={m}, n={n}")));
    }
    if m <= d {
        return Err(Error::invalid(format!(
            "stage one needs m > d, got m={m}, d={d}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream(seed, TAG_SPLIT, 0);
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let stage1 = data.subset(&order[..m])?;
    let h1 = resolve_bandwidth(&stage1, rule)?;
    let spec = SmoothSpec::new(kernel.clone(), h1, tau)?;
    let fit1 = fit_smoothed(&stage1, &spec, None)?;
    let dbeta = quantile_path_derivative(&stage1, &spec, &fit1)?;

    let stage2 = data.subset(&order[m..])?;
    let raw: Vec<f64> = (0..stage2.n())
        .map(|i| dot(stage2.row(i), &dbeta))
        .collect();
    let mut sorted = raw.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = crate::qr_smooth::quantile_type7(&sorted, 0.5);
    if !(median > 0.0) {
        return Err(Error::AllWeightsClamped);
    }
    let (lo, hi) = (CLAMP_LO * median, CLAMP_HI * median);
    let mut clamped_count = 0;
    let weights: Vec<f64> = raw
        .iter()
        .map(|&q| {
            if q < lo || q > hi {
                clamped_count += 1;
            }
            q.clamp(lo, hi)
        })
        .collect();
    if 2 * clamped_count > stage2.n() {
        return Err(Error::AllWeightsClamped);
    }
    let inv_weights: Vec<f64> = weights.iter().map(|q| 1.0 / q).collect();
    let fit2 = fit_exact_weighted(&stage2, tau, Some(&inv_weights))?;
    Ok(EfficientFit {
        beta: fit2.beta,
        tau,
        m,
        weights,
        clamped_count,
        h_stage1: h1,
        objective: fit2.objective,
        converged: fit2.converged,
    })
}

/// Σ_q(τ) = τ(1−τ)·D_q⁻¹(τ) with D_q = E[XX'/q²(τ|X)], the efficiency bound
/// covariance, by quadrature over a closed-form design.
pub fn efficient_covariance_oracle(design: &Design, tau: f64) -> Result<Mat> {
    let mut m = design
        .dq_matrix(tau)?
        .inverse_spd()
        .ok_or(Error::SingularHessian)?;
    m.scale(tau * (1.0 - tau));
    m.symmetrize();
    Ok(m)
}
