//! Unsmoothed (exact) quantile regression.
//!
//! The check objective is minimized by smoothing continuation: solve the
//! convolution-smoothed problem on a halving bandwidth ladder, polish onto
//! the best interpolating vertex, and certify the result with a subgradient
//! check. Minimizers can be set-valued; on a flat face the continuation limit
//! is returned as is, so compare objectives in tests, never arguments.

use crate::data::{dot, Dataset, FitResult};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::qr_smooth::SmoothSpec;
use crate::rng::{stream, TAG_BOOT};
use rand::Rng;
use rayon::prelude::*;

/// Check-function objective (1/n) Σ ρ_τ(yᵢ − xᵢ'b), ρ_τ(u) = u(τ − 1{u<0}).
pub fn check_objective(data: &Dataset, b: &[f64], tau: f64) -> Result<f64> {
    check_objective_weighted(data, b, tau, None)
}

pub(crate) fn check_objective_weighted(
    data: &Dataset,
    b: &[f64],
    tau: f64,
    weights: Option<&[f64]>,
) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(format!("tau must lie in (0,1), got {tau}")));
    }
    let mut s = 0.0;
    for i in 0..data.n() {
        let e = data.y()[i] - dot(data.row(i), b);
        let w = weights.map_or(1.0, |w| w[i]);
        s += w * e * (tau - f64::from(e < 0.0));
    }
    Ok(s / data.n() as f64)
}

/// Global minimizer of the check objective via smoothing continuation.
///
/// Optimality is certified by one-sided directional derivatives along ± each
/// coordinate direction; `converged` reports the certificate.
pub fn fit_exact(data: &Dataset, tau: f64) -> Result<FitResult> {
    fit_exact_weighted(data, tau, None)
}

pub(crate) fn fit_exact_weighted(
    data: &Dataset,
    tau: f64,
    weights: Option<&[f64]>,
) -> Result<FitResult> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(format!("tau must lie in (0,1), got {tau}")));
    }
    if let Some(w) = weights {
        if w.len() != data.n() || w.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid(
                "weights must be positive, finite, one per row",
            ));
        }
    }
    let kernel = Kernel::gaussian(2).expect("order-2 kernel");
    let init = crate::qr_smooth::default_init(data, tau);
    let mut best = init;
    let mut iterations = 0usize;

    let y_scale = sd(data.y()).max(1e-8 * (1.0 + max_abs(data.y())));
    let cert_tol = 1e-9 * data.mean_row_norm().max(1.0);
    let obj_at = |b: &[f64]| check_objective_weighted(data, b, tau, weights).expect("tau checked");

    // accept a candidate as soon as its subgradient certificate clears
    let finish = |beta: Vec<f64>, iterations: usize, worst: f64| FitResult {
        objective: obj_at(&beta),
        beta,
        tau,
        h: 0.0,
        grad_norm: (-worst).max(0.0),
        iterations,
        converged: worst >= -cert_tol,
        hessian: None,
    };

    if obj_at(&best) == 0.0 {
        let worst = subgradient_worst(data, &best, tau, weights, y_scale);
        return Ok(finish(best, 0, worst));
    }

    let resid_scale = sd(&data.residuals(&best));
    let h0 = resid_scale.max(1e-8 * (1.0 + max_abs(data.y())));
    let h_min = 1e-6 * y_scale;
    let mut h = h0;
    let mut worst;
    loop {
        let spec = SmoothSpec::unchecked(kernel.clone(), h, tau);
        // per-rung Newton; a stalled rung keeps its partial progress and the
        // certificate below is the real optimality gate
        let out = crate::qr_smooth::fit_smoothed_raw(data, &spec, Some(&best), weights, 40);
        iterations += out.iterations;
        if out.objective.is_finite() {
            best = out.beta;
        }
        // polish onto the best interpolating vertex among the rows with the
        // smallest residuals; accept only strict improvement so flat minima
        // keep the continuation limit
        let mut candidate = best.clone();
        if let Some(vertex) = vertex_polish(data, &best, tau, weights) {
            let margin = 1e-12 * (1.0 + obj_at(&best).abs());
            if obj_at(&vertex) < obj_at(&best) - margin {
                candidate = vertex;
            }
        }
        worst = subgradient_worst(data, &candidate, tau, weights, y_scale);
        if worst >= -cert_tol {
            return Ok(finish(candidate, iterations, worst));
        }
        if h <= h_min {
            best = candidate;
            break;
        }
        h = (h * 0.5).max(h_min * 0.999_999);
    }
    Ok(finish(best, iterations, worst))
}

/// Solve the d×d interpolation system through the rows with the smallest
/// absolute residuals; tries every size-d subset of the d+2 nearest rows and
/// returns the candidate with the lowest check objective.
fn vertex_polish(data: &Dataset, b: &[f64], tau: f64, weights: Option<&[f64]>) -> Option<Vec<f64>> {
    let d = data.d();
    let resid = data.residuals(b);
    let mut order: Vec<usize> = (0..data.n()).collect();
    order.sort_by(|&i, &j| resid[i].abs().partial_cmp(&resid[j].abs()).unwrap());
    let pool: Vec<usize> = order.into_iter().take((d + 2).min(data.n())).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for subset in subsets(&pool, d) {
        let mut m = crate::linalg::Mat::zeros(d);
        let mut rhs = vec![0.0; d];
        for (r, &i) in subset.iter().enumerate() {
            for c in 0..d {
                m.set(r, c, data.row(i)[c]);
            }
            rhs[r] = data.y()[i];
        }
        if let Some(candidate) = crate::linalg::solve_lu(&m, &rhs) {
            let obj = check_objective_weighted(data, &candidate, tau, weights).ok()?;
            match &best {
                Some((obest, _)) if *obest <= obj => {}
                _ => best = Some((obj, candidate)),
            }
        }
    }
    best.map(|(_, v)| v)
}

fn subsets(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let n = pool.len();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| pool[i]).collect());
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Worst one-sided directional derivative of the check objective over a
/// basis of active directions: the ± coordinate directions plus, for every
/// size-(d−1) subset of the rows nearest to zero residual, the ± directions
/// that keep that subset interpolated (the edges of the active fan). A
/// minimizer has all of them nonnegative.
fn subgradient_worst(
    data: &Dataset,
    b: &[f64],
    tau: f64,
    weights: Option<&[f64]>,
    y_scale: f64,
) -> f64 {
    let d = data.d();
    let zero_tol = 1e-9 * y_scale.max(1e-300);
    let resid = data.residuals(b);

    let mut directions: Vec<Vec<f64>> = Vec::new();
    for j in 0..d {
        let mut v = vec![0.0; d];
        v[j] = 1.0;
        directions.push(v);
    }
    if d > 1 {
        let mut order: Vec<usize> = (0..data.n()).collect();
        order.sort_by(|&i, &j| resid[i].abs().partial_cmp(&resid[j].abs()).unwrap());
        let pool: Vec<usize> = order.into_iter().take((d + 2).min(data.n())).collect();
        for subset in subsets(&pool, d - 1) {
            let rows: Vec<&[f64]> = subset.iter().map(|&i| data.row(i)).collect();
            if let Some(v) = null_direction(&rows, d) {
                directions.push(v);
            }
        }
    }

    let n = data.n() as f64;
    let mut worst = f64::INFINITY;
    for dir in &directions {
        for sign in [1.0, -1.0] {
            let mut dd = 0.0;
            for i in 0..data.n() {
                let w = sign * dot(data.row(i), dir) * weights.map_or(1.0, |w| w[i]);
                let e = resid[i];
                dd += if e > zero_tol {
                    -w * tau
                } else if e < -zero_tol {
                    w * (1.0 - tau)
                } else {
                    ((1.0 - tau) * w).max(-tau * w)
                };
            }
            worst = worst.min(dd / n);
        }
    }
    worst
}

/// A unit vector orthogonal to the given rows, by projecting coordinate
/// seeds onto the orthogonal complement. `None` when the rows span the
/// whole space.
fn null_direction(rows: &[&[f64]], d: usize) -> Option<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for r in rows {
        let mut v = r.to_vec();
        for b in &basis {
            let c = dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-12 {
            for vi in &mut v {
                *vi /= norm;
            }
            basis.push(v);
        }
    }
    for j in 0..d {
        let mut v = vec![0.0; d];
        v[j] = 1.0;
        for b in &basis {
            let c = dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            for vi in &mut v {
                *vi /= norm;
            }
            return Some(v);
        }
    }
    None
}

/// Per-coefficient standard deviation of `fit_exact` over pairs-bootstrap
/// resamples. Rank-deficient resamples are redrawn up to ten times.
/// Deterministic in (inputs, seed) regardless of thread schedule.
pub fn pairs_bootstrap_se(data: &Dataset, tau: f64, reps: usize, seed: u64) -> Result<Vec<f64>> {
    if reps < 100 {
        return Err(Error::invalid(format!(
            "bootstrap needs reps >= 100, got {reps}"
        )));
    }
    let estimates: Vec<Result<Vec<f64>>> = (0..reps)
        .into_par_iter()
        .map(|rep| bootstrap_one(data, tau, seed, rep as u64))
        .collect();
    let mut cols = vec![Vec::with_capacity(reps); data.d()];
    for est in estimates {
        let beta = est?;
        for (j, v) in beta.into_iter().enumerate() {
            cols[j].push(v);
        }
    }
    Ok(cols.iter().map(|c| sd(c)).collect())
}

fn bootstrap_one(data: &Dataset, tau: f64, seed: u64, rep: u64) -> Result<Vec<f64>> {
    let mut rng = stream(seed, TAG_BOOT, rep);
    let n = data.n();
    for _attempt in 0..10 {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        match data.subset(&idx) {
            Ok(resample) => return fit_exact(&resample, tau).map(|f| f.beta),
            Err(Error::RankDeficient) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::RankDeficient)
}

pub(crate) fn sd(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
