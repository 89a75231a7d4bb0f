//! Indicator-smoothed quantile regression (Horowitz 1998): the alternative
//! objective (1/n) Σ eᵢ[τ − K(−eᵢ/h)] that smooths the indicator inside the
//! check function rather than the integrating measure. It shares the Newton
//! machinery with the convolution-smoothed fit; only the loss, gradient and
//! curvature callbacks differ, so head-to-head experiments isolate the
//! estimator, not the optimizer. CLI and report name: "smr".

use crate::data::{dot, Dataset, FitResult};
use crate::error::{Error, Result};
use crate::inference::{sandwich, CovarianceEstimate};
use crate::linalg::Mat;
use crate::qr_smooth::{default_init, grad_tolerance, SmoothSpec};
use crate::solver::{minimize, NewtonCfg, Objective};

/// Kernel, bandwidth and quantile level; same invariants as `SmoothSpec`.
pub type HorowitzSpec = SmoothSpec;

struct HorowitzProblem<'a> {
    data: &'a Dataset,
    spec: &'a HorowitzSpec,
}

impl<'a> Objective for HorowitzProblem<'a> {
    fn dim(&self) -> usize {
        self.data.d()
    }

    fn value(&self, b: &[f64]) -> f64 {
        horowitz_objective(self.data, self.spec, b)
    }

    fn gradient(&self, b: &[f64]) -> Vec<f64> {
        horowitz_gradient(self.data, self.spec, b)
    }

    fn hessian(&self, b: &[f64]) -> Mat {
        horowitz_hessian(self.data, self.spec, b)
    }
}

/// (1/n) Σ eᵢ[τ − K(−eᵢ/h)].
pub fn horowitz_objective(data: &Dataset, spec: &HorowitzSpec, b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..data.n() {
        let e = data.y()[i] - dot(data.row(i), b);
        s += e * (spec.tau - spec.kernel.int_k(-e / spec.h));
    }
    s / data.n() as f64
}

/// (1/n) Σ Xᵢ[K(−eᵢ/h) − τ − k(−eᵢ/h)·eᵢ/h]: the convolution-smoothed
/// gradient minus an extra term that is the source of the larger bias.
pub fn horowitz_gradient(data: &Dataset, spec: &HorowitzSpec, b: &[f64]) -> Vec<f64> {
    let d = data.d();
    let mut g = vec![0.0; d];
    for i in 0..data.n() {
        let row = data.row(i);
        let e = data.y()[i] - dot(row, b);
        let t = -e / spec.h;
        let c = spec.kernel.int_k(t) - spec.tau - spec.kernel.k(t) * e / spec.h;
        for j in 0..d {
            g[j] += c * row[j];
        }
    }
    for v in &mut g {
        *v /= data.n() as f64;
    }
    g
}

/// (1/n) Σ XᵢXᵢ'·κ(eᵢ/h)/h with κ(t) = 2k(t) + t·k'(t).
pub fn horowitz_hessian(data: &Dataset, spec: &HorowitzSpec, b: &[f64]) -> Mat {
    let mut m = Mat::zeros(data.d());
    for i in 0..data.n() {
        let row = data.row(i);
        let e = data.y()[i] - dot(row, b);
        let w = spec.kernel.kappa(e / spec.h) / spec.h;
        if w != 0.0 {
            m.add_outer(row, w);
        }
    }
    m.scale(1.0 / data.n() as f64);
    m
}

/// Damped-Newton stationary point of the indicator-smoothed objective.
pub fn fit_horowitz(
    data: &Dataset,
    spec: &HorowitzSpec,
    init: Option<&[f64]>,
) -> Result<FitResult> {
    let init = match init {
        Some(b) => b.to_vec(),
        None => default_init(data, spec.tau),
    };
    let problem = HorowitzProblem { data, spec };
    let cfg = NewtonCfg {
        grad_tol: grad_tolerance(data),
        max_iter: 200,
    };
    let out = minimize(&problem, init, &cfg);
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

/// κ-based sandwich standard errors for the indicator-smoothed fit. The
/// middle matrix uses this objective's own score; reports label it as an
/// approximation to the original recipe.
pub fn covariance_smr(
    data: &Dataset,
    spec: &HorowitzSpec,
    fit: &FitResult,
) -> Result<CovarianceEstimate> {
    let mut v_hat = Mat::zeros(data.d());
    for i in 0..data.n() {
        let row = data.row(i);
        let e = data.y()[i] - dot(row, &fit.beta);
        let t = -e / spec.h;
        let psi = spec.kernel.int_k(t) - spec.tau - spec.kernel.k(t) * e / spec.h;
        v_hat.add_outer(row, psi * psi);
    }
    v_hat.scale(1.0 / data.n() as f64);
    sandwich(data, fit, v_hat)
}
