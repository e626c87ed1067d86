//! A-priori constants of the error analysis and the hypothesis certificate.
//!
//! The certificate evaluates every inequality that licenses the rigorous
//! dimension bracket at the actual mesh step `h`, rather than solving for the
//! largest admissible step.

use serde::{Deserialize, Serialize};

use crate::domain::{InvariantInterval, Mesh};
use crate::error::{Error, Result};
use crate::ifs::{contraction_bound, log_lipschitz_bound, GaussIfs};
use crate::real::{certainly_le, certainly_lt, Real};

/// Lebesgue-constant bound `psi(r) = (2/pi) ln(r + 1) + 3/4`.
pub fn psi<T: Real>(r: usize) -> T {
    T::from_f64(2.0) / T::pi() * T::from_usize(r + 1).ln() + T::from_f64(0.75)
}

/// `eta(r)`: `1/2` for even `r`, `(1 + tan(pi/(2r+2)))/2` for odd `r`.
pub fn eta<T: Real>(r: usize) -> T {
    let half = T::from_f64(0.5);
    if r.is_multiple_of(2) {
        half
    } else {
        half * (T::one() + (T::pi() / T::from_usize(2 * r + 2)).tan())
    }
}

fn factorial<T: Real>(n: usize) -> T {
    (2..=n).fold(T::one(), |acc, k| acc * T::from_usize(k))
}

/// Maximum over `[-1, 1]` of `|prod_k (x - c_k)|` for the extended Chebyshev
/// nodes: `2^-r cos(pi/(2r+2))^-(r+1)`.
pub fn node_poly_max<T: Real>(r: usize) -> Result<T> {
    if r < 2 {
        return Err(Error::InvalidArgument("degree must be at least 2".into()));
    }
    let c = (T::pi() / T::from_usize(2 * r + 2)).cos();
    Ok(T::from_f64(2.0).powi(-(r as i32)) * c.powi(-(r as i32 + 1)))
}

/// Interpolation-remainder constant `m_{r+1} = node_poly_max(r) / (2^(r+1) (r+1)!)`.
pub fn interpolation_constant<T: Real>(r: usize) -> Result<T> {
    Ok(node_poly_max::<T>(r)? / (T::from_f64(2.0).powi(r as i32 + 1) * factorial::<T>(r + 1)))
}

/// `chi = a_k + 1/b_inf`; `k = None` means the limit, where `chi = 2 a_inf + gamma`.
pub fn chi<T: Real>(inv: &InvariantInterval<T>, gamma: T, k: Option<usize>) -> T {
    match k {
        None => T::from_f64(2.0) * inv.a_inf + gamma,
        Some(k) => inv.a_at(k) + T::one() / inv.b_inf,
    }
}

/// `E(s, p) = (2s)(2s+1)...(2s+p-1) / chi^p`, the bound on `|v^(p)| / v` for
/// the positive eigenfunction.
pub fn e_bound<T: Real>(s: T, p: usize, chi: T) -> T {
    let two_s = s + s;
    let prod = (0..p).fold(T::one(), |acc, j| acc * (two_s + T::from_usize(j)));
    prod / chi.powi(p as i32)
}

/// `G_{r+1}` in product form:
/// `2 e^{2sh/chi} [(2s)...(2s+r) / (2*4*...*(2r+2))] chi^-(r+1) (2cos(pi/(2r+2)))^-(r+1)`.
pub fn g_bound<T: Real>(s: T, r: usize, h: T, chi: T) -> T {
    let two = T::from_f64(2.0);
    let two_s = s + s;
    let ratio = (0..=r).fold(T::one(), |acc, j| acc * (two_s + T::from_usize(j)) / T::from_usize(2 * j + 2));
    let c = two * (T::pi() / T::from_usize(2 * r + 2)).cos();
    two * (two_s * h / chi).exp() * ratio * (chi * c).powi(-(r as i32 + 1))
}

/// `G_{r+1}` in factorial form `E e^{2sh/chi} / (r+1)! (2cos(pi/(2r+2)))^-(r+1) 2^-r`.
pub fn g_bound_factorial_form<T: Real>(s: T, r: usize, h: T, chi: T) -> T {
    let c = T::from_f64(2.0) * (T::pi() / T::from_usize(2 * r + 2)).cos();
    e_bound(s, r + 1, chi) * ((s + s) * h / chi).exp() / factorial::<T>(r + 1)
        * c.powi(-(r as i32 + 1))
        * T::from_f64(2.0).powi(-(r as i32))
}

/// `D_{r+1} = G_{r+1} / sin^2(pi/(2r+2))` and `H_{r+1} = mu D_{r+1} chi / (2s)`.
pub fn d_h_bounds<T: Real>(g: T, r: usize, mu: T, chi: T, s: T) -> (T, T) {
    let sn = (T::pi() / T::from_usize(2 * r + 2)).sin();
    let d = g / (sn * sn);
    (d, mu * d * chi / (s + s))
}

/// Chained estimate `H_{r+1} <= mu (chi/2s) (3/(4 chi))^(r-2) 4 G_3`, looser
/// than [`d_h_bounds`] but independent of it.
pub fn h_chain_bound<T: Real>(s: T, r: usize, mu: T, chi: T, h: T) -> T {
    let g3 = g_bound(s, 2, h, chi);
    let ratio = T::from_f64(3.0) / (T::from_f64(4.0) * chi);
    mu * chi / (s + s) * ratio.powi(r as i32 - 2) * T::from_f64(4.0) * g3
}

/// `(M_1, M_2)` of the cone-preservation argument; `None` when a denominator
/// is not positive, i.e. the step is too large.
pub fn m1_m2<T: Real>(s: T, chi: T, mu: T, g: T, h_const: T, h: T, r: usize) -> Option<(T, T)> {
    let (d, _) = d_h_bounds(g, r, mu, chi, s);
    let ri = r as i32;
    let denom = T::one() - g * g * h.powi(2 * ri + 2);
    let sn = (T::pi() / T::from_usize(2 * r + 2)).sin();
    let two_s_chi = (s + s) / chi;
    let last = T::one() - h * h * two_s_chi / mu * sn * sn;
    if !(denom > T::zero()) || !(last > T::zero()) {
        return None;
    }
    let m1 = mu * d * h.powi(ri) / denom + two_s_chi;
    let m2 = two_s_chi * (T::one() + h_const * h.powi(ri) / denom + T::one() / last);
    Some((m1, m2))
}

/// Outcome of each hypothesis check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checks {
    pub kappa1_lt_1: bool,
    pub cond_8_3: bool,
    pub cond_8_4: bool,
    pub cond_h1: bool,
    pub m_gt_m2: bool,
    pub h_le_02: bool,
    pub s_range: bool,
    pub chi_ge_1: bool,
    pub gap_condition: bool,
}

impl Checks {
    pub fn all(&self) -> bool {
        self.kappa1_lt_1
            && self.cond_8_3
            && self.cond_8_4
            && self.cond_h1
            && self.m_gt_m2
            && self.h_le_02
            && self.s_range
            && self.chi_ge_1
            && self.gap_condition
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateOptions<T> {
    /// Overrides the default `kappa2 = (1 + kappa1)/2`.
    pub kappa2: Option<T>,
}

impl<T> Default for CertificateOptions<T> {
    fn default() -> Self {
        Self { kappa2: None }
    }
}

/// Every constant of the cone-preservation and error argument at one `s`,
/// with the hypothesis checks and the reasons for any failure.
#[derive(Debug, Clone)]
pub struct HypothesisCertificate<T> {
    pub s: T,
    pub r: usize,
    pub nu: usize,
    pub h: T,
    pub mu: T,
    pub chi: T,
    pub psi_r: T,
    pub eta_r: T,
    pub c_nu: T,
    pub m0_nu: T,
    pub kappa1: T,
    pub kappa2: T,
    pub kappa2_overridden: bool,
    pub m: T,
    pub m_prime: T,
    pub u: T,
    /// `psi(r) u e^u`, left side of the first mesh condition.
    pub cond_8_3_value: T,
    /// `kappa1 e^u / (1 - psi(r) u e^u)`, left side of the second.
    pub cond_8_4_lhs: T,
    /// `kappa2 - s M_0(nu) / M`, right side of the second.
    pub cond_8_4_rhs: T,
    pub e: T,
    pub g: T,
    pub d: T,
    pub h_const: T,
    pub m1: T,
    pub m2: T,
    pub checks: Checks,
    pub verified: bool,
    pub reasons: Vec<String>,
}

impl<T: Real> HypothesisCertificate<T> {
    /// The error factor `H h^r` of the eigenvalue sandwich.
    pub fn margin(&self) -> T {
        self.h_const * self.h.powi(self.r as i32)
    }

    /// Cone parameter usable for rigorous eigenvalue bounds, if verified.
    pub fn cone_parameter(&self) -> Option<T> {
        self.verified.then_some(self.m)
    }
}

/// Evaluates every constant at `s` on `mesh` and checks the hypotheses.
/// Failed checks are listed in `reasons`; when `kappa1 >= 1` the cone
/// parameter `M` cannot be formed and every entry depending on it is NaN.
pub fn build_certificate<T: Real>(
    ifs: &GaussIfs,
    inv: &InvariantInterval<T>,
    mesh: &Mesh<T>,
    s: T,
    nu: usize,
    options: &CertificateOptions<T>,
) -> Result<HypothesisCertificate<T>> {
    if nu == 0 {
        return Err(Error::InvalidArgument("nu must be at least 1".into()));
    }
    let r = mesh.r;
    let h = mesh.h;
    let mu = mesh.mu;
    let gamma = T::from_f64(ifs.gamma());
    let chi_v = chi(inv, gamma, None);
    let psi_r = psi::<T>(r);
    let eta_r = eta::<T>(r);
    let c_nu = contraction_bound(ifs, nu, inv.a_inf)?;
    let b_nu = inv.b_at(nu);
    let m0_nu = log_lipschitz_bound(inv.a_inf, b_nu);
    let rr = T::from_usize(r * r);
    let two = T::from_f64(2.0);
    let kappa1 = c_nu * two * eta_r * rr * psi_r;
    let kappa2 = options.kappa2.unwrap_or((T::one() + kappa1) / two);

    let mut reasons = Vec::new();
    let kappa1_lt_1 = certainly_lt(kappa1, T::one());
    if !kappa1_lt_1 {
        reasons.push("kappa1 >= 1 (raise nu)".to_string());
    } else if kappa1 > T::from_f64(0.8) {
        reasons.push("warning: kappa1 > 4/5".to_string());
    }
    let kappa_ok = kappa1_lt_1 && kappa1 < kappa2 && kappa2 < T::one();
    if kappa1_lt_1 && !kappa_ok {
        reasons.push("kappa2 must lie strictly between kappa1 and 1".to_string());
    }

    let nan = T::from_f64(f64::NAN);
    // M = 4s / (a_inf + a_{nu-1} + gamma) / (kappa2 - kappa1)
    let (m, m_prime, u, c83, c84l, c84r) = if kappa_ok && s > T::zero() {
        let denom = inv.a_inf + inv.a_at(nu - 1) + gamma;
        let m = T::from_f64(4.0) * s / denom / (kappa2 - kappa1);
        let u = m * eta_r * h;
        let c83 = psi_r * u * u.exp();
        let c84l = kappa1 * u.exp() / (T::one() - c83);
        let c84r = kappa2 - s * m0_nu / m;
        (m, kappa2 * m, u, c83, c84l, c84r)
    } else {
        (nan, nan, nan, nan, nan, nan)
    };

    let e = e_bound(s, r + 1, chi_v);
    let g = g_bound(s, r, h, chi_v);
    let (d, h_const) = d_h_bounds(g, r, mu, chi_v, s);
    let (m1, m2) = m1_m2(s, chi_v, mu, g, h_const, h, r).unwrap_or((nan, nan));

    let cond_8_3 = c83.is_finite() && certainly_lt(c83, T::one());
    let cond_8_4 = c84l.is_finite() && c83 < T::one() && certainly_lt(c84l, c84r);
    let rr_i = r as i32;
    let h1_lhs = two + h_const * (h.powi(rr_i) + h.powi(2 * rr_i + 2)) + h * h;
    let cond_h1 = kappa_ok && certainly_le(h1_lhs, two / (kappa2 - kappa1));
    let m_gt_m2 = m.is_finite() && m2.is_finite() && certainly_lt(m2, m);
    let h_le_02 = h <= T::from_f64(0.2);
    let s_range = s > T::zero() && s <= T::from_f64(1.5);
    let chi_ge_1 = chi_v >= T::one();
    let gap_condition = mesh.gap_ok;

    if kappa_ok {
        if !cond_8_3 {
            reasons.push("psi(r) u exp(u) >= 1".to_string());
        }
        if !cond_8_4 {
            reasons.push("kappa1 exp(u)/(1 - psi(r) u exp(u)) >= kappa2 - s M0(nu)/M".to_string());
        }
        if !cond_h1 {
            reasons.push("2 + H(h^r + h^(2r+2)) + h^2 > 2/(kappa2 - kappa1)".to_string());
        }
        if !m_gt_m2 {
            reasons.push("M <= M2".to_string());
        }
    }
    if !h_le_02 {
        reasons.push("h > 0.2".to_string());
    }
    if !s_range {
        reasons.push("s outside (0, 3/2]".to_string());
    }
    if !chi_ge_1 {
        reasons.push("chi < 1".to_string());
    }
    if !gap_condition {
        reasons.push("mesh gap condition violated".to_string());
    }

    let checks = Checks {
        kappa1_lt_1,
        cond_8_3,
        cond_8_4,
        cond_h1,
        m_gt_m2,
        h_le_02,
        s_range,
        chi_ge_1,
        gap_condition,
    };
    let verified = checks.all() && kappa_ok;
    Ok(HypothesisCertificate {
        s,
        r,
        nu,
        h,
        mu,
        chi: chi_v,
        psi_r,
        eta_r,
        c_nu,
        m0_nu,
        kappa1,
        kappa2,
        kappa2_overridden: options.kappa2.is_some(),
        m,
        m_prime,
        u,
        cond_8_3_value: c83,
        cond_8_4_lhs: c84l,
        cond_8_4_rhs: c84r,
        e,
        g,
        d,
        h_const,
        m1,
        m2,
        checks,
        verified,
        reasons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dd::DoubleDouble;
    use crate::domain::{build_mesh, invariant_interval};

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn psi_and_eta() {
        assert!((psi::<f64>(6) - 1.988_804_876_139_36).abs() < 1e-13);
        assert!((psi::<f64>(1) - 1.191_271_200_305_30).abs() < 1e-13);
        for r in 1..40 {
            assert!(psi::<f64>(r + 1) > psi::<f64>(r));
        }
        assert_eq!(eta::<f64>(6), 0.5);
        assert!((eta::<f64>(3) - 2f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((eta::<f64>(5) - (3.0 - 3f64.sqrt()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn node_polynomial_maximum() {
        assert!((node_poly_max::<f64>(2).unwrap() - 2.0 / (3.0 * 3f64.sqrt())).abs() < 1e-15);
        let c8 = (std::f64::consts::PI / 8.0).cos();
        assert!((node_poly_max::<f64>(3).unwrap() - 0.125 / c8.powi(4)).abs() < 1e-15);
        assert!((node_poly_max::<f64>(3).unwrap() - 0.171_572_875).abs() < 1e-8);
        for r in 2..=20usize {
            let c = (std::f64::consts::PI / (2 * r + 2) as f64).cos();
            let v = node_poly_max::<f64>(r).unwrap() * 2f64.powi(r as i32) * c.powi(r as i32 + 1);
            assert!((v - 1.0).abs() < 1e-14);
        }
        assert!(node_poly_max::<f64>(1).is_err());
        let m3 = interpolation_constant::<f64>(2).unwrap();
        assert!(rel(m3, 2.0 / (3.0 * 3f64.sqrt()) / 48.0) < 1e-15);
    }

    #[test]
    fn chi_values() {
        let inv = invariant_interval::<f64>(&GaussIfs::from_integers(&[1, 2]).unwrap()).unwrap();
        assert!((chi(&inv, 1.0, None) - 3f64.sqrt()).abs() < 1e-15);
        let inv7 = invariant_interval::<f64>(&GaussIfs::from_integers(&[1, 4, 7]).unwrap()).unwrap();
        assert!((chi(&inv7, 1.0, None) - 1.25).abs() < 5e-3);
        // finite depth: a_k + 1/b_inf converges to the limit from below
        let deep = chi(&inv7, 1.0, Some(50));
        assert!((deep - chi(&inv7, 1.0, None)).abs() < 1e-12);
        assert!(chi(&inv7, 1.0, Some(0)) < deep);
    }

    #[test]
    fn e_bound_values() {
        assert_eq!(e_bound(0.5, 1, 1.0), 1.0);
        assert!((e_bound(1.0, 3, 2.0) - 3.0).abs() < 1e-15);
        // (1.036)(2.036)...(7.036)/1.25^7 by direct evaluation
        assert!(rel(e_bound(0.518, 7, 1.25), 1_159.260_788_079_72) < 1e-12);
    }

    #[test]
    fn g_bound_values() {
        // r = 2, s = 1/2, h = 0, chi = 1: (1*2*3)/(2*4*6) * 2 * 3^{-3/2} = 1/(12 sqrt 3)
        let g3 = g_bound(0.5, 2, 0.0, 1.0);
        assert!(rel(g3, 1.0 / (12.0 * 3f64.sqrt())) < 1e-14);
        // explicit r = 2 display: 2s (1/(chi sqrt3))^3 ((2s+1)/4) ((s+1)/3) e^{2sh/chi}
        for &(s, h, c) in &[(0.3, 0.01, 1.2), (1.4, 0.2, 1.0), (0.9, 0.05, 2.5)] {
            let direct = 2.0 * s * (1.0 / (c * 3f64.sqrt())).powi(3) * ((2.0 * s + 1.0) / 4.0) * ((s + 1.0) / 3.0)
                * (2.0 * s * h / c).exp();
            assert!(rel(g_bound(s, 2, h, c), direct) < 1e-14);
        }
        let h_max = (9.0f64 / 5.0).ln() / 3.0;
        for s in [0.1, 0.5, 1.0, 1.5] {
            assert!(g_bound(s, 2, h_max, 1.0) <= 3f64.sqrt() / 2.0);
        }
        for r in 2..15 {
            assert!(g_bound(1.9, r + 1, 0.01, 1.0) < g_bound(1.9, r, 0.01, 1.0));
        }
    }

    #[test]
    fn d_h_known_ratios() {
        let (d3, _) = d_h_bounds(1.0, 2, 1.0, 1.0, 0.5);
        assert!((d3 - 4.0).abs() < 1e-14);
        let (d4, _) = d_h_bounds(1.0, 3, 1.0, 1.0, 0.5);
        assert!(rel(d4, 4.0 / (2.0 - 2f64.sqrt())) < 1e-14);
        let (d, h) = d_h_bounds(0.2, 4, 3.0, 1.5, 0.75);
        assert!(rel(h, 3.0 * d * 1.5 / 1.5) < 1e-15);
    }

    #[test]
    fn m1_m2_limits() {
        let (s, chi, mu, r) = (0.7, 1.3, 2.0, 4);
        let g = g_bound(s, r, 0.0, chi);
        let (_, hc) = d_h_bounds(g, r, mu, chi, s);
        let (m1, m2) = m1_m2(s, chi, mu, g, hc, 0.0, r).unwrap();
        assert!(rel(m1, 2.0 * s / chi) < 1e-15);
        assert!(rel(m2, 4.0 * s / chi) < 1e-15);
        let (m1, m2) = m1_m2(s, chi, mu, g, hc, 0.1, r).unwrap();
        assert!(m2 > m1);
    }

    fn e147_certificate(h: f64) -> HypothesisCertificate<DoubleDouble> {
        let e = GaussIfs::from_integers(&[1, 4, 7]).unwrap();
        let inv = invariant_interval::<DoubleDouble>(&e).unwrap();
        let mesh = build_mesh(&[(inv.a_inf, inv.b_inf)], 6, DoubleDouble::from_f64(h)).unwrap();
        build_certificate(&e, &inv, &mesh, DoubleDouble::from_f64(0.518), 6, &CertificateOptions::default())
            .unwrap()
    }

    #[test]
    fn small_nu_is_unverifiable() {
        let e = GaussIfs::from_integers(&[1, 2]).unwrap();
        let inv = invariant_interval::<f64>(&e).unwrap();
        let mesh = build_mesh(&[(inv.a_inf, inv.b_inf)], 8, 0.01).unwrap();
        let c = build_certificate(&e, &inv, &mesh, 0.53, 1, &CertificateOptions::default()).unwrap();
        assert!(!c.verified);
        assert!(!c.checks.kappa1_lt_1);
        assert!(c.reasons.iter().any(|r| r.starts_with("kappa1 >= 1")));
    }

    #[test]
    fn coarse_step_is_rejected() {
        let c = e147_certificate(0.5);
        assert!(!c.verified);
        assert!(!c.checks.h_le_02);
        assert!(c.reasons.iter().any(|r| r == "h > 0.2"));
    }

    #[test]
    fn refining_keeps_verification() {
        let coarse = e147_certificate(0.002);
        let fine = e147_certificate(0.001);
        assert!(coarse.verified && fine.verified);
        assert_eq!(coarse.kappa1, fine.kappa1);
        assert_eq!(coarse.kappa2, fine.kappa2);
        assert_eq!(coarse.m, fine.m);
        assert!(fine.u < coarse.u);
    }

    #[test]
    fn kappa2_override_is_reported() {
        let e = GaussIfs::from_integers(&[1, 4, 7]).unwrap();
        let inv = invariant_interval::<f64>(&e).unwrap();
        let mesh = build_mesh(&[(inv.a_inf, inv.b_inf)], 6, 0.001).unwrap();
        let opts = CertificateOptions { kappa2: Some(0.7) };
        let c = build_certificate(&e, &inv, &mesh, 0.518, 6, &opts).unwrap();
        assert!(c.kappa2_overridden);
        assert_eq!(c.kappa2, 0.7);
        assert!((c.m_prime - 0.7 * c.m).abs() < 1e-15);
    }
}
