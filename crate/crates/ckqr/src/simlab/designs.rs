//! Data-generating processes for the simulation lab, with the closed-form
//! error laws, coefficient truths, and quadrature oracles (D(τ), E[XX'],
//! bias direction, efficient-information matrix) used by the estimators'
//! validation machinery.
//!
//! Location designs are Y = 1 + X̃ + ε with X̃ uniform on (1,5); error laws are
//! recentered to median zero and, except for χ²₃, rescaled to variance two.
//! The heteroskedastic design uses ε = ¼(1 + X̃)Z with Z standard normal.
//! The four-covariate design draws U, X₁..₃ iid U(0,1) and sets
//! Y = β₀(U) + β₁(U)X₁ + X₂ + β₃(U)X₃ with Beta(1,16) and Beta(32,32)
//! quantile functions as β₀, β₁.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::quad::{integrate, integrate_split};
use crate::special::{beta_pdf, inv_reg_beta, norm_pdf, norm_quantile, reg_gamma_p};
use crate::Dataset;
use rand::Rng;
use std::f64::consts::{LN_2, PI, SQRT_2};

/// Median of the chi-square distribution with three degrees of freedom,
/// the root of P(3/2, x/2) = 1/2. Verified against the root finder in tests.
pub const CHI2_3_MEDIAN: f64 = 2.365973884375338;

const GUMBEL_MEDIAN: f64 = 0.36651292058166435; // -ln ln 2
const GUMBEL_SCALE: f64 = 1.1026577908435842; // sqrt(12)/pi, variance-two rescale
const T3_SCALE: f64 = 0.816496580927726; // sqrt(2/3)

/// Standardized error laws: each provides density, its derivatives where
/// closed forms exist, and the quantile function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorLaw {
    /// √2(E − ln 2), E ~ Exp(1): median 0, variance 2.
    Exponential,
    /// Rescaled, median-centered type-I extreme value: median 0, variance 2.
    Gumbel,
    /// χ²₃ minus its median: median 0, variance 6 (not rescaled).
    ChiSq3,
    /// √(2/3)·t₃: median 0, variance 2.
    T3,
    /// U(0,1) as-is (used intercept-only; no standardization).
    Uniform01,
    /// Standard normal as-is.
    StdNormal,
}

impl ErrorLaw {
    pub fn name(&self) -> &'static str {
        match self {
            ErrorLaw::Exponential => "exponential",
            ErrorLaw::Gumbel => "gumbel",
            ErrorLaw::ChiSq3 => "chi2_3",
            ErrorLaw::T3 => "t3",
            ErrorLaw::Uniform01 => "uniform01",
            ErrorLaw::StdNormal => "normal",
        }
    }

    /// Lower and upper support endpoints (±∞ allowed).
    pub fn support(&self) -> (f64, f64) {
        match self {
            ErrorLaw::Exponential => (-SQRT_2 * LN_2, f64::INFINITY),
            ErrorLaw::Gumbel => (f64::NEG_INFINITY, f64::INFINITY),
            ErrorLaw::ChiSq3 => (-CHI2_3_MEDIAN, f64::INFINITY),
            ErrorLaw::T3 => (f64::NEG_INFINITY, f64::INFINITY),
            ErrorLaw::Uniform01 => (0.0, 1.0),
            ErrorLaw::StdNormal => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn pdf(&self, t: f64) -> f64 {
        match self {
            ErrorLaw::Exponential => {
                if t < -SQRT_2 * LN_2 {
                    0.0
                } else {
                    (-t / SQRT_2).exp() / (2.0 * SQRT_2)
                }
            }
            ErrorLaw::Gumbel => {
                let g = t / GUMBEL_SCALE + GUMBEL_MEDIAN;
                (-g - (-g).exp()).exp() / GUMBEL_SCALE
            }
            ErrorLaw::ChiSq3 => {
                let x = t + CHI2_3_MEDIAN;
                if x <= 0.0 {
                    0.0
                } else {
                    x.sqrt() * (-x / 2.0).exp() / (2.0 * PI).sqrt()
                }
            }
            ErrorLaw::T3 => {
                let x = t / T3_SCALE;
                2.0 / (PI * 3.0_f64.sqrt()) * (1.0 + x * x / 3.0).powi(-2) / T3_SCALE
            }
            ErrorLaw::Uniform01 => {
                if (0.0..=1.0).contains(&t) {
                    1.0
                } else {
                    0.0
                }
            }
            ErrorLaw::StdNormal => norm_pdf(t),
        }
    }

    /// s-th derivative of the density where a closed form exists;
    /// `UnsupportedDesign` otherwise.
    pub fn pdf_deriv(&self, t: f64, s: u32) -> Result<f64> {
        if s == 0 {
            return Ok(self.pdf(t));
        }
        match self {
            ErrorLaw::Exponential => Ok((-1.0 / SQRT_2).powi(s as i32) * self.pdf(t)),
            ErrorLaw::Uniform01 => Ok(0.0),
            ErrorLaw::StdNormal => Ok(hermite_deriv(t, s)),
            ErrorLaw::Gumbel if s == 1 => {
                let g = t / GUMBEL_SCALE + GUMBEL_MEDIAN;
                Ok(self.pdf(t) * ((-g).exp() - 1.0) / GUMBEL_SCALE)
            }
            ErrorLaw::ChiSq3 if s == 1 => {
                let x = t + CHI2_3_MEDIAN;
                if x <= 0.0 {
                    Ok(0.0)
                } else {
                    Ok((-x / 2.0).exp() * (0.5 / x.sqrt() - x.sqrt() / 2.0) / (2.0 * PI).sqrt())
                }
            }
            ErrorLaw::T3 if s == 1 => {
                let x = t / T3_SCALE;
                let base = -8.0 * x / (3.0 * PI * 3.0_f64.sqrt()) * (1.0 + x * x / 3.0).powi(-3);
                Ok(base / (T3_SCALE * T3_SCALE))
            }
            _ => Err(Error::UnsupportedDesign),
        }
    }

    /// Quantile function; exact closed forms where they exist, safeguarded
    /// Newton on the cdf otherwise.
    pub fn quantile(&self, p: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&p));
        match self {
            ErrorLaw::Exponential => SQRT_2 * (-(1.0 - p).ln() - LN_2),
            ErrorLaw::Gumbel => GUMBEL_SCALE * (-(-p.ln()).ln() - GUMBEL_MEDIAN),
            ErrorLaw::ChiSq3 => chi2_3_quantile(p) - CHI2_3_MEDIAN,
            ErrorLaw::T3 => T3_SCALE * t3_quantile(p),
            ErrorLaw::Uniform01 => p,
            ErrorLaw::StdNormal => norm_quantile(p),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            ErrorLaw::Exponential | ErrorLaw::Gumbel | ErrorLaw::T3 => 2.0,
            ErrorLaw::ChiSq3 => 6.0,
            ErrorLaw::Uniform01 => 1.0 / 12.0,
            ErrorLaw::StdNormal => 1.0,
        }
    }
}

/// φ^{(s)}(t) = (−1)^s He_s(t) φ(t) with probabilists' Hermite polynomials.
fn hermite_deriv(t: f64, s: u32) -> f64 {
    let mut h_prev = 1.0; // He_0
    let mut h = t; // He_1
    if s == 0 {
        return norm_pdf(t);
    }
    for k in 1..s {
        let next = t * h - k as f64 * h_prev;
        h_prev = h;
        h = next;
    }
    (-1.0_f64).powi(s as i32) * h * norm_pdf(t)
}

/// Quantile of χ²₃ by safeguarded Newton on the regularized gamma cdf.
pub fn chi2_3_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    // Wilson-Hilferty start
    let z = norm_quantile(p);
    let k = 3.0_f64;
    let mut x = (k * (1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt()).powi(3)).max(1e-8);
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    for _ in 0..100 {
        let f = reg_gamma_p(1.5, x / 2.0) - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let pdf = x.sqrt() * (-x / 2.0).exp() / (2.0 * PI).sqrt();
        let mut next = if pdf > 1e-300 { x - f / pdf } else { f64::NAN };
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                2.0 * x.max(1.0)
            };
        }
        if (next - x).abs() < 1e-13 * (1.0 + x) && f.abs() < 1e-13 {
            return next;
        }
        x = next;
    }
    x
}

/// Quantile of the t distribution with 3 degrees of freedom, via Newton on
/// the closed-form cdf 1/2 + (x/√3/(1+x²/3) + atan(x/√3))/π.
pub fn t3_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    if (p - 0.5).abs() < 1e-16 {
        return 0.0;
    }
    let cdf = |x: f64| {
        let u = x / 3.0_f64.sqrt();
        0.5 + (u / (1.0 + u * u) + u.atan()) / PI
    };
    let pdf = |x: f64| 2.0 / (PI * 3.0_f64.sqrt()) * (1.0 + x * x / 3.0).powi(-2);
    let mut x = norm_quantile(p);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for _ in 0..200 {
        let f = cdf(x) - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = pdf(x);
        let mut next = if d > 1e-300 { x - f / d } else { f64::NAN };
        if !next.is_finite() || next <= lo || next >= hi {
            next = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo.abs().max(1.0) * 2.0,
                (false, true) => -hi.abs().max(1.0) * 2.0,
                _ => 0.0,
            };
        }
        if (next - x).abs() < 1e-14 * (1.0 + x.abs()) && f.abs() < 1e-14 {
            return next;
        }
        x = next;
    }
    x
}

/// β₃ coefficient curve of the four-covariate design.
pub fn qr41_beta3(tau: f64) -> f64 {
    ((2.0 * PI + 8.0) * tau - ((2.0 * PI * tau).cos() - 1.0)) / (2.0 * PI + 8.0)
}

fn qr41_beta3_deriv(tau: f64) -> f64 {
    ((2.0 * PI + 8.0) + 2.0 * PI * (2.0 * PI * tau).sin()) / (2.0 * PI + 8.0)
}

/// Quantile function of Beta(1,16): 1 − (1−τ)^{1/16}.
pub fn qr41_beta0(tau: f64) -> f64 {
    1.0 - (1.0 - tau).powf(1.0 / 16.0)
}

fn qr41_beta0_deriv(tau: f64) -> f64 {
    (1.0 - tau).powf(1.0 / 16.0 - 1.0) / 16.0
}

/// Quantile function of Beta(32,32), by incomplete-beta inversion.
pub fn qr41_beta1(tau: f64) -> f64 {
    inv_reg_beta(32.0, 32.0, tau)
}

fn qr41_beta1_deriv(tau: f64) -> f64 {
    1.0 / beta_pdf(32.0, 32.0, qr41_beta1(tau))
}

/// A data-generating process with known truth.
#[derive(Debug, Clone)]
pub enum Design {
    /// Y = 1 + X̃ + ε with X̃ uniform on (1,5).
    Location { err: ErrorLaw },
    /// Y = 1 + X̃ + ¼(1 + X̃)Z with X̃ uniform on (1,5), Z standard normal.
    Heteroskedastic,
    /// Four-covariate quantile model on U(0,1) covariates.
    Qr41,
    /// Y = ε, intercept only.
    InterceptOnly { err: ErrorLaw },
}

impl Design {
    pub fn d(&self) -> usize {
        match self {
            Design::Location { .. } | Design::Heteroskedastic => 2,
            Design::Qr41 => 4,
            Design::InterceptOnly { .. } => 1,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Design::Location { err } => err.name().to_string(),
            Design::Heteroskedastic => "heteroskedastic".to_string(),
            Design::Qr41 => "qr41".to_string(),
            Design::InterceptOnly { err } => format!("{}_intercept", err.name()),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, n: usize) -> Result<Dataset> {
        let d = self.d();
        let mut y = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n * d);
        for _ in 0..n {
            match self {
                Design::Location { err } => {
                    let xt = 1.0 + 4.0 * rng.random::<f64>();
                    let e = err.quantile(open_unit(rng));
                    x.extend_from_slice(&[1.0, xt]);
                    y.push(1.0 + xt + e);
                }
                Design::Heteroskedastic => {
                    let xt = 1.0 + 4.0 * rng.random::<f64>();
                    let z = norm_quantile(open_unit(rng));
                    x.extend_from_slice(&[1.0, xt]);
                    y.push(1.0 + xt + 0.25 * (1.0 + xt) * z);
                }
                Design::Qr41 => {
                    let u = open_unit(rng);
                    let x1 = rng.random::<f64>();
                    let x2 = rng.random::<f64>();
                    let x3 = rng.random::<f64>();
                    x.extend_from_slice(&[1.0, x1, x2, x3]);
                    y.push(qr41_beta0(u) + qr41_beta1(u) * x1 + x2 + qr41_beta3(u) * x3);
                }
                Design::InterceptOnly { err } => {
                    x.push(1.0);
                    y.push(err.quantile(open_unit(rng)));
                }
            }
        }
        Dataset::new(y, x, d)
    }

    /// Closed-form coefficient truth β(τ).
    pub fn true_beta(&self, tau: f64) -> Vec<f64> {
        match self {
            Design::Location { err } => vec![1.0 + err.quantile(tau), 1.0],
            Design::Heteroskedastic => {
                let q = norm_quantile(tau) / 4.0;
                vec![1.0 + q, 1.0 + q]
            }
            Design::Qr41 => {
                vec![qr41_beta0(tau), qr41_beta1(tau), 1.0, qr41_beta3(tau)]
            }
            Design::InterceptOnly { err } => vec![err.quantile(tau)],
        }
    }

    /// Closed-form derivative β^{(1)}(τ), the truth behind the qdf estimator.
    pub fn true_beta_deriv(&self, tau: f64) -> Vec<f64> {
        match self {
            Design::Location { err } => {
                vec![1.0 / err.pdf(err.quantile(tau)), 0.0]
            }
            Design::Heteroskedastic => {
                let q = 1.0 / (4.0 * norm_pdf(norm_quantile(tau)));
                vec![q, q]
            }
            Design::Qr41 => vec![
                qr41_beta0_deriv(tau),
                qr41_beta1_deriv(tau),
                0.0,
                qr41_beta3_deriv(tau),
            ],
            Design::InterceptOnly { err } => vec![1.0 / err.pdf(err.quantile(tau))],
        }
    }

    /// E[XX'] in closed form.
    pub fn exx(&self) -> Mat {
        match self {
            Design::Location { .. } | Design::Heteroskedastic => {
                Mat::from_rows(&[vec![1.0, 3.0], vec![3.0, 31.0 / 3.0]])
            }
            Design::Qr41 => Mat::from_rows(&[
                vec![1.0, 0.5, 0.5, 0.5],
                vec![0.5, 1.0 / 3.0, 0.25, 0.25],
                vec![0.5, 0.25, 1.0 / 3.0, 0.25],
                vec![0.5, 0.25, 0.25, 1.0 / 3.0],
            ]),
            Design::InterceptOnly { .. } => Mat::identity(1),
        }
    }

    /// D(τ) = E[XX' f(X'β(τ)|X)] by closed form or covariate quadrature.
    pub fn d_matrix(&self, tau: f64) -> Result<Mat> {
        match self {
            Design::Location { err } => {
                let f = err.pdf(err.quantile(tau));
                let mut m = self.exx();
                m.scale(f);
                Ok(m)
            }
            Design::InterceptOnly { err } => {
                let f = err.pdf(err.quantile(tau));
                let mut m = Mat::identity(1);
                m.scale(f);
                Ok(m)
            }
            Design::Heteroskedastic => {
                // f(x'β(τ)|x) = φ(z_τ)·4/(1+x̃)
                let fz = norm_pdf(norm_quantile(tau));
                Ok(self.het_moment_matrix(|xt| fz * 4.0 / (1.0 + xt)))
            }
            Design::Qr41 => Err(Error::UnsupportedDesign),
        }
    }

    /// E[X f^{(s)}(X'β(τ)|X)], the mean vector in the smoothing-bias constant.
    pub fn bias_mean_vec(&self, tau: f64, s: u32) -> Result<Vec<f64>> {
        match self {
            Design::Location { err } => {
                let fs = err.pdf_deriv(err.quantile(tau), s)?;
                Ok(vec![fs, 3.0 * fs])
            }
            Design::InterceptOnly { err } => Ok(vec![err.pdf_deriv(err.quantile(tau), s)?]),
            Design::Heteroskedastic => {
                if s != 1 {
                    return Err(Error::UnsupportedDesign);
                }
                // ∂f/∂y = φ'(z_τ)/σ² with σ = (1+x̃)/4
                let z = norm_quantile(tau);
                let fp = -z * norm_pdf(z);
                let g = |xt: f64| fp * 16.0 / ((1.0 + xt) * (1.0 + xt));
                let m0 = 0.25 * integrate(g, 1.0, 5.0, 1e-12);
                let m1 = 0.25 * integrate(|xt| xt * g(xt), 1.0, 5.0, 1e-12);
                Ok(vec![m0, m1])
            }
            Design::Qr41 => Err(Error::UnsupportedDesign),
        }
    }

    /// Asymptotic covariance Σ(τ) = τ(1−τ) D⁻¹ E[XX'] D⁻¹ of the standard
    /// estimator.
    pub fn sigma_matrix(&self, tau: f64) -> Result<Mat> {
        let d_inv = self
            .d_matrix(tau)?
            .inverse_spd()
            .ok_or(Error::SingularHessian)?;
        let mut s = d_inv.matmul(&self.exx()).matmul(&d_inv);
        s.scale(tau * (1.0 - tau));
        s.symmetrize();
        Ok(s)
    }

    /// D_q(τ) = E[XX' f²(X'β(τ)|X)], the efficient information matrix.
    pub fn dq_matrix(&self, tau: f64) -> Result<Mat> {
        match self {
            Design::Location { err } => {
                let f = err.pdf(err.quantile(tau));
                let mut m = self.exx();
                m.scale(f * f);
                Ok(m)
            }
            Design::InterceptOnly { err } => {
                let f = err.pdf(err.quantile(tau));
                let mut m = Mat::identity(1);
                m.scale(f * f);
                Ok(m)
            }
            Design::Heteroskedastic => {
                let fz = norm_pdf(norm_quantile(tau));
                Ok(self.het_moment_matrix(|xt| (fz * 4.0 / (1.0 + xt)).powi(2)))
            }
            Design::Qr41 => Err(Error::UnsupportedDesign),
        }
    }

    /// (1/4)∫₁⁵ [1, x̃]'[1, x̃] g(x̃) dx̃ for the two-covariate designs.
    fn het_moment_matrix(&self, g: impl Fn(f64) -> f64 + Copy) -> Mat {
        let m00 = 0.25 * integrate(g, 1.0, 5.0, 1e-12);
        let m01 = 0.25 * integrate(|x| x * g(x), 1.0, 5.0, 1e-12);
        let m11 = 0.25 * integrate(|x| x * x * g(x), 1.0, 5.0, 1e-12);
        Mat::from_rows(&[vec![m00, m01], vec![m01, m11]])
    }
}

/// Uniform draw restricted to the open unit interval.
fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    rng.random::<f64>()
        .clamp(2.0_f64.powi(-53), 1.0 - 2.0_f64.powi(-53))
}

/// A named simulation design with its sample size.
#[derive(Debug, Clone)]
pub struct DgpSpec {
    pub design: Design,
    pub name: String,
    pub n: usize,
}

impl DgpSpec {
    /// Designs addressable from the command line:
    /// exponential | gumbel | chi2_3 | t3 | heteroskedastic | qr41.
    pub fn from_name(name: &str, n: usize) -> Result<DgpSpec> {
        let design = match name {
            "exponential" => Design::Location { err: ErrorLaw::Exponential },
            "gumbel" => Design::Location { err: ErrorLaw::Gumbel },
            "chi2_3" => Design::Location { err: ErrorLaw::ChiSq3 },
            "t3" => Design::Location { err: ErrorLaw::T3 },
            "heteroskedastic" => Design::Heteroskedastic,
            "qr41" => Design::Qr41,
            other => {
                return Err(Error::invalid(format!(
                    "unknown design '{other}'; expected exponential|gumbel|chi2_3|t3|heteroskedastic|qr41"
                )))
            }
        };
        Ok(DgpSpec {
            design,
            name: name.to_string(),
            n,
        })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<Dataset> {
        self.design.sample(rng, self.n)
    }
}

/// Population (expected) smoothed objective machinery for intercept-only
/// designs: the gradient E[K((b−Y)/h)] − τ and its derivative are computed
/// by adaptive quadrature over the error law, then solved by Newton. These
/// are the oracles behind the smoothing-bias checks.
pub mod population {
    use super::*;
    use crate::kernels::Kernel;

    fn window(err: &ErrorLaw) -> (f64, f64, Vec<f64>) {
        let (lo, hi) = err.support();
        let lo_w = if lo.is_finite() {
            lo
        } else {
            err.quantile(1e-15) - 1.0
        };
        let hi_w = if hi.is_finite() {
            hi
        } else {
            err.quantile(1.0 - 1e-15) + 1.0
        };
        let mut splits = Vec::new();
        if lo.is_finite() {
            splits.push(lo);
        }
        if hi.is_finite() {
            splits.push(hi);
        }
        (lo_w, hi_w, splits)
    }

    /// Splits bracketing the kernel's active region around b, so the global
    /// refinement cannot overlook a spike much narrower than the window.
    fn kernel_splits(base: &[f64], b: f64, h: f64) -> Vec<f64> {
        let mut s = base.to_vec();
        for m in [-40.0, -8.0, -1.0, 0.0, 1.0, 8.0, 40.0] {
            s.push(b + m * h);
        }
        s
    }

    /// Population minimizer of the convolution-smoothed objective for Y = ε.
    pub fn smoothed_minimizer(err: &ErrorLaw, kernel: &Kernel, h: f64, tau: f64) -> f64 {
        let (lo, hi, splits) = window(err);
        let grad = |b: f64| {
            let sp = kernel_splits(&splits, b, h);
            integrate_split(
                |y| kernel.int_k((b - y) / h) * err.pdf(y),
                lo,
                hi,
                &sp,
                1e-14,
            ) - tau
        };
        let curv = |b: f64| {
            let sp = kernel_splits(&splits, b, h);
            integrate_split(
                |y| kernel.k((b - y) / h) * err.pdf(y) / h,
                lo,
                hi,
                &sp,
                1e-14,
            )
        };
        newton_scalar(err.quantile(tau), grad, curv)
    }

    /// Population minimizer of the indicator-smoothed objective for Y = ε.
    pub fn horowitz_minimizer(err: &ErrorLaw, kernel: &Kernel, h: f64, tau: f64) -> f64 {
        let (lo, hi, splits) = window(err);
        let grad = |b: f64| {
            let sp = kernel_splits(&splits, b, h);
            integrate_split(
                |y| {
                    let t = (b - y) / h;
                    (kernel.int_k(t) - tau - kernel.k(t) * (y - b) / h) * err.pdf(y)
                },
                lo,
                hi,
                &sp,
                1e-14,
            )
        };
        let curv = |b: f64| {
            let sp = kernel_splits(&splits, b, h);
            integrate_split(
                |y| kernel.kappa((b - y) / h) * err.pdf(y) / h,
                lo,
                hi,
                &sp,
                1e-14,
            )
        };
        newton_scalar(err.quantile(tau), grad, curv)
    }

    fn newton_scalar(init: f64, grad: impl Fn(f64) -> f64, curv: impl Fn(f64) -> f64) -> f64 {
        let mut b = init;
        for _ in 0..80 {
            let g = grad(b);
            let c = curv(b);
            if !c.is_finite() || c.abs() < 1e-14 {
                break;
            }
            let step = g / c;
            b -= step;
            if g.abs() < 1e-13 && step.abs() < 1e-12 {
                break;
            }
        }
        b
    }

    /// cdf of the error law by quadrature (test oracle).
    pub fn cdf(err: &ErrorLaw, t: f64) -> f64 {
        let (lo, _hi, splits) = window(err);
        if t <= lo {
            return 0.0;
        }
        integrate_split(|y| err.pdf(y), lo, t, &splits, 1e-13)
    }
}
