//! Gaussian-type kernels of order 2, 4, 6, and 8.
//!
//! Each kernel is an even polynomial times the standard normal density,
//! k(x) = p(x)·φ(x). The integrated kernel K(u) = ∫_{-∞}^u k and the first
//! partial moment G(u) = ∫_{-∞}^u z k(z) dz reduce to closed forms
//! a·Φ(u) − q(u)·φ(u) through the recursion
//! ∫ x^m φ = −x^{m−1} φ + (m−1) ∫ x^{m−2} φ, so every hot-path evaluation is
//! a Horner polynomial plus one Φ and one φ. Higher orders trade vanishing
//! moments for negativity: k can dip below zero and K is not monotone.

use crate::error::{Error, Result};
use crate::special::{norm_cdf, norm_pdf};

/// A Gaussian-type kernel of order `s + 1`, i.e. moments 1..s vanish and the
/// (s+1)-th does not. Immutable after construction; share freely.
#[derive(Debug, Clone)]
pub struct Kernel {
    name: &'static str,
    order: u32,
    /// coefficients of p by power of x (even powers only are nonzero)
    poly: Vec<f64>,
    /// K(u) = Φ(u) − kk_poly(u)·φ(u)
    kk_poly: Vec<f64>,
    /// G(u) = −g_poly(u)·φ(u)
    g_poly: Vec<f64>,
    /// κ(t) = 2k(t) + t k'(t) as a polynomial times φ
    kappa_poly: Vec<f64>,
    /// p'(x) − x·p(x), so k'(x) = kprime_poly(x)·φ(x)
    kprime_poly: Vec<f64>,
    c_k: f64,
}

const SQRT_PI: f64 = 1.772_453_850_905_516;

impl Kernel {
    /// Kernel of the given order; one of 2, 4, 6, 8.
    pub fn gaussian(order: u32) -> Result<Kernel> {
        let (name, poly, c_k): (_, Vec<f64>, _) = match order {
            2 => ("gaussian2", vec![1.0], 1.0 / SQRT_PI),
            4 => ("gaussian4", vec![1.5, 0.0, -0.5], 7.0 / (16.0 * SQRT_PI)),
            6 => (
                "gaussian6",
                vec![15.0 / 8.0, 0.0, -5.0 / 4.0, 0.0, 1.0 / 8.0],
                321.0 / (1024.0 * SQRT_PI),
            ),
            8 => (
                "gaussian8",
                vec![
                    35.0 / 16.0,
                    0.0,
                    -35.0 / 16.0,
                    0.0,
                    7.0 / 16.0,
                    0.0,
                    -1.0 / 48.0,
                ],
                4175.0 / (16384.0 * SQRT_PI),
            ),
            _ => {
                return Err(Error::invalid(format!(
                    "unsupported kernel order {order}; use 2, 4, 6 or 8"
                )))
            }
        };
        let k = Kernel::build(name, order, poly, c_k);
        debug_assert!(k.self_check());
        Ok(k)
    }

    /// Kernel selected by name: "gaussian2" | "gaussian4" | "gaussian6" | "gaussian8".
    pub fn from_name(name: &str) -> Result<Kernel> {
        match name {
            "gaussian2" => Kernel::gaussian(2),
            "gaussian4" => Kernel::gaussian(4),
            "gaussian6" => Kernel::gaussian(6),
            "gaussian8" => Kernel::gaussian(8),
            other => Err(Error::invalid(format!(
                "unknown kernel '{other}'; expected gaussian2|gaussian4|gaussian6|gaussian8"
            ))),
        }
    }

    fn build(name: &'static str, order: u32, poly: Vec<f64>, c_k: f64) -> Kernel {
        // With I_m(u) = ∫_{-∞}^u x^m φ(x) dx = α_m Φ(u) − ρ_m(u) φ(u):
        // α_0 = 1, ρ_0 = 0; α_1 = 0, ρ_1 = 1;
        // α_m = (m−1) α_{m−2}; ρ_m(u) = u^{m−1} + (m−1) ρ_{m−2}(u).
        let max_m = poly.len(); // need ρ up to degree max_m (for G)
        let mut alpha = vec![0.0; max_m + 2];
        let mut rho: Vec<Vec<f64>> = vec![Vec::new(); max_m + 2];
        alpha[0] = 1.0;
        rho[0] = vec![];
        alpha[1] = 0.0;
        rho[1] = vec![1.0];
        for m in 2..max_m + 2 {
            alpha[m] = (m as f64 - 1.0) * alpha[m - 2];
            let mut r = vec![0.0; m];
            r[m - 1] = 1.0;
            for (pw, &c) in rho[m - 2].iter().enumerate() {
                r[pw] += (m as f64 - 1.0) * c;
            }
            rho[m] = r;
        }
        let mut kk_poly = vec![0.0; max_m.max(1)];
        let mut g_poly = vec![0.0; max_m + 1];
        let mut a_total = 0.0;
        for (m, &c) in poly.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            a_total += c * alpha[m];
            for (pw, &r) in rho[m].iter().enumerate() {
                kk_poly[pw] += c * r;
            }
            for (pw, &r) in rho[m + 1].iter().enumerate() {
                g_poly[pw] += c * r;
            }
        }
        // ∫ k = 1 forces the Φ coefficient to one
        debug_assert!((a_total - 1.0).abs() < 1e-12);
        // k'(x) = [p'(x) − x p(x)] φ(x)
        let mut kprime_poly = vec![0.0; poly.len() + 1];
        for (m, &c) in poly.iter().enumerate() {
            if m >= 1 {
                kprime_poly[m - 1] += m as f64 * c;
            }
            kprime_poly[m + 1] -= c;
        }
        // κ(t) = 2k + t k' = [2p(t) + t p'(t) − t² p(t)] φ(t)
        let mut kappa_poly = vec![0.0; poly.len() + 2];
        for (m, &c) in poly.iter().enumerate() {
            kappa_poly[m] += 2.0 * c + m as f64 * c;
            kappa_poly[m + 2] -= c;
        }
        Kernel {
            name,
            order,
            poly,
            kk_poly,
            g_poly,
            kappa_poly,
            kprime_poly,
            c_k,
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    /// Kernel order s + 1.
    pub fn order(&self) -> u32 {
        self.order
    }

    /// Highest order of vanishing moments, s = order − 1.
    pub fn s(&self) -> u32 {
        self.order - 1
    }

    /// Kernel density k(u) = p(u)·φ(u).
    #[inline]
    pub fn k(&self, u: f64) -> f64 {
        if u.abs() > 40.0 {
            return 0.0;
        }
        horner(&self.poly, u) * norm_pdf(u)
    }

    /// Integrated kernel K(u) = ∫_{-∞}^u k(v) dv, in closed form.
    #[inline]
    pub fn int_k(&self, u: f64) -> f64 {
        if u > 40.0 {
            return 1.0;
        }
        if u < -40.0 {
            return 0.0;
        }
        norm_cdf(u) - horner(&self.kk_poly, u) * norm_pdf(u)
    }

    /// First partial moment G(u) = ∫_{-∞}^u v k(v) dv, in closed form.
    #[inline]
    pub fn int_zk(&self, u: f64) -> f64 {
        if u.abs() > 40.0 {
            return 0.0;
        }
        -horner(&self.g_poly, u) * norm_pdf(u)
    }

    /// Derivative k'(u).
    #[inline]
    pub fn k_prime(&self, u: f64) -> f64 {
        if u.abs() > 40.0 {
            return 0.0;
        }
        horner(&self.kprime_poly, u) * norm_pdf(u)
    }

    /// κ(u) = 2k(u) + u·k'(u), the curvature kernel of the indicator-smoothed
    /// objective; a kernel of the same order as k.
    #[inline]
    pub fn kappa(&self, u: f64) -> f64 {
        if u.abs() > 40.0 {
            return 0.0;
        }
        horner(&self.kappa_poly, u) * norm_pdf(u)
    }

    /// Smoothing constant c_k = 2∫₀^∞ K(1−K).
    pub fn smoothing_constant(&self) -> f64 {
        self.c_k
    }

    /// j-th moment ∫ z^j k(z) dz by Gaussian moment algebra.
    pub fn moment(&self, j: u32) -> f64 {
        self.poly
            .iter()
            .enumerate()
            .map(|(m, &c)| c * gauss_moment(m as u32 + j))
            .sum()
    }

    /// ∫ |z k(z)| dz, the Lipschitz constant tying the smoothed and exact
    /// check objectives; computed once by quadrature.
    pub fn abs_first_moment(&self) -> f64 {
        crate::quad::integrate(|z| (z * self.k(z)).abs(), -12.0, 12.0, 1e-10)
    }

    /// Quadrature verification of the closed forms; used by debug assertions.
    fn self_check(&self) -> bool {
        let mass = crate::quad::integrate(|z| self.k(z), -12.0, 12.0, 1e-10);
        if (mass - 1.0).abs() > 1e-9 {
            return false;
        }
        for &u in &[-3.0, -0.7, 0.0, 0.4, 2.1] {
            let by_quad = crate::quad::integrate(|z| self.k(z), -12.0, u, 1e-12);
            if (self.int_k(u) - by_quad).abs() > 1e-10 {
                return false;
            }
            let g_quad = crate::quad::integrate(|z| z * self.k(z), -12.0, u, 1e-12);
            if (self.int_zk(u) - g_quad).abs() > 1e-10 {
                return false;
            }
        }
        true
    }
}

/// All four built-in kernels.
pub fn all_kernels() -> Vec<Kernel> {
    [2, 4, 6, 8]
        .iter()
        .map(|&o| Kernel::gaussian(o).unwrap())
        .collect()
}

#[inline]
fn horner(c: &[f64], x: f64) -> f64 {
    let mut v = 0.0;
    for &ci in c.iter().rev() {
        v = v * x + ci;
    }
    v
}

/// E[Z^m] for standard normal Z: (m−1)!! for even m, zero for odd m.
fn gauss_moment(m: u32) -> f64 {
    if m % 2 == 1 {
        return 0.0;
    }
    let mut v = 1.0;
    let mut k = m as i64 - 1;
    while k > 1 {
        v *= k as f64;
        k -= 2;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;
    use proptest::prelude::*;

    #[test]
    fn density_values() {
        let k2 = Kernel::gaussian(2).unwrap();
        let k4 = Kernel::gaussian(4).unwrap();
        assert!((k2.k(0.0) - 0.3989422804014327).abs() < 1e-15);
        assert!((k4.k(0.0) - 1.5 * 0.3989422804014327).abs() < 1e-15);
        // higher-order kernels go negative
        assert!((k4.k(2.0) - (-0.02699548325659403)).abs() < 1e-15);
        assert!(k4.k(2.0) < 0.0);
    }

    #[test]
    fn integrated_kernel_values() {
        let k2 = Kernel::gaussian(2).unwrap();
        assert!((k2.int_k(0.0) - 0.5).abs() < 1e-15);
        assert!((k2.int_k(1.0) - 0.8413447460685429).abs() < 1e-14);
        // gaussian4 against the quadrature oracle
        let k4 = Kernel::gaussian(4).unwrap();
        let oracle = integrate(|z| k4.k(z), -12.0, 1.0, 1e-12);
        assert!((k4.int_k(1.0) - oracle).abs() < 1e-10);
        // frozen closed form Φ(1) + φ(1)/2
        assert!((k4.int_k(1.0) - 0.9623301083281146).abs() < 1e-14);
    }

    #[test]
    fn integrated_kernel_matches_quadrature_everywhere() {
        for kern in all_kernels() {
            for &u in &[-6.0_f64, -2.3, -1.0, -0.2, 0.0, 0.4, 1.7, 3.0, 8.0] {
                let oracle = integrate(|z| kern.k(z), -12.0, u.min(12.0), 1e-12);
                assert!(
                    (kern.int_k(u) - oracle).abs() < 1e-10,
                    "{} at {}: {} vs {}",
                    kern.name(),
                    u,
                    kern.int_k(u),
                    oracle
                );
            }
        }
    }

    #[test]
    fn smoothing_constants_match_table() {
        let want = [
            0.5641895835477563,
            0.2468329428021434,
            0.17686021124885720,
            0.14376779243846939,
        ];
        for (kern, w) in all_kernels().iter().zip(want) {
            assert!(
                (kern.smoothing_constant() - w).abs() < 1e-12,
                "{}: {} vs {}",
                kern.name(),
                kern.smoothing_constant(),
                w
            );
        }
    }

    #[test]
    fn smoothing_constant_matches_quadrature() {
        for kern in all_kernels() {
            let by_quad =
                2.0 * integrate(|y| kern.int_k(y) * (1.0 - kern.int_k(y)), 0.0, 12.0, 1e-9);
            assert!(
                (kern.smoothing_constant() - by_quad).abs() < 1e-6,
                "{}: {} vs {}",
                kern.name(),
                kern.smoothing_constant(),
                by_quad
            );
        }
    }

    #[test]
    fn moments_vanish_up_to_order() {
        for kern in all_kernels() {
            let s = kern.s();
            for j in 1..=s {
                assert!(
                    kern.moment(j).abs() < 1e-12,
                    "{} moment {} = {}",
                    kern.name(),
                    j,
                    kern.moment(j)
                );
            }
            assert!(kern.moment(s + 1).abs() > 1e-8, "{}", kern.name());
        }
        let k2 = Kernel::gaussian(2).unwrap();
        assert_eq!(k2.moment(1), 0.0);
        assert!((k2.moment(2) - 1.0).abs() < 1e-15);
        let k4 = Kernel::gaussian(4).unwrap();
        assert!(k4.moment(2).abs() < 1e-15);
        assert!((k4.moment(4) + 3.0).abs() < 1e-12);
    }

    #[test]
    fn moments_match_quadrature() {
        for kern in all_kernels() {
            for j in 0..=kern.s() + 1 {
                let by_quad = integrate(|z| z.powi(j as i32) * kern.k(z), -12.0, 12.0, 1e-10);
                assert!(
                    (kern.moment(j) - by_quad).abs() < 1e-8,
                    "{} moment {}: {} vs {}",
                    kern.name(),
                    j,
                    kern.moment(j),
                    by_quad
                );
            }
        }
    }

    #[test]
    fn unit_mass() {
        for kern in all_kernels() {
            let mass = integrate(|z| kern.k(z), -12.0, 12.0, 1e-10);
            assert!((mass - 1.0).abs() < 1e-8, "{}", kern.name());
        }
    }

    #[test]
    fn int_k_derivative_is_k() {
        for kern in all_kernels() {
            for &u in &[-2.5, -0.9, 0.0, 0.3, 1.2, 3.3] {
                let fd = (kern.int_k(u + 1e-5) - kern.int_k(u - 1e-5)) / 2e-5;
                assert!((fd - kern.k(u)).abs() < 1e-6, "{} at {}", kern.name(), u);
            }
        }
    }

    #[test]
    fn tails_saturate() {
        for kern in all_kernels() {
            assert_eq!(kern.int_k(50.0), 1.0);
            assert_eq!(kern.int_k(-50.0), 0.0);
            assert_eq!(kern.k(50.0), 0.0);
            assert_eq!(kern.int_zk(50.0), 0.0);
        }
    }

    #[test]
    fn kappa_is_a_kernel_of_same_order() {
        for kern in all_kernels() {
            let mass = integrate(|t| kern.kappa(t), -12.0, 12.0, 1e-10);
            assert!(
                (mass - 1.0).abs() < 1e-8,
                "{}: kappa mass {}",
                kern.name(),
                mass
            );
            for j in 1..=kern.s() {
                let mj = integrate(|t| t.powi(j as i32) * kern.kappa(t), -12.0, 12.0, 1e-10);
                assert!(
                    mj.abs() < 1e-8,
                    "{} kappa moment {} = {}",
                    kern.name(),
                    j,
                    mj
                );
            }
        }
    }

    #[test]
    fn kappa_matches_definition() {
        for kern in all_kernels() {
            for &t in &[-1.7, -0.4, 0.0, 0.9, 2.2] {
                let direct = 2.0 * kern.k(t) + t * kern.k_prime(t);
                assert!((kern.kappa(t) - direct).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn k_prime_matches_finite_difference() {
        for kern in all_kernels() {
            for &t in &[-2.0, -0.5, 0.1, 1.3] {
                let fd = (kern.k(t + 1e-6) - kern.k(t - 1e-6)) / 2e-6;
                assert!((kern.k_prime(t) - fd).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn name_round_trip() {
        for kern in all_kernels() {
            let again = Kernel::from_name(kern.name()).unwrap();
            assert_eq!(again.order(), kern.order());
        }
        assert!(Kernel::from_name("epanechnikov").is_err());
        assert!(Kernel::gaussian(3).is_err());
    }

    proptest! {
        #[test]
        fn int_k_symmetry(u in -10.0f64..10.0) {
            for kern in all_kernels() {
                let s = kern.int_k(u) + kern.int_k(-u);
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn int_zk_is_even(u in -10.0f64..10.0) {
            for kern in all_kernels() {
                prop_assert!((kern.int_zk(u) - kern.int_zk(-u)).abs() < 1e-12);
            }
        }
    }
}
