//! Locating the zero of `rho(L_{s,nu})^(1/nu) - 1` and turning it into a
//! rigorous bracket `[s_l, s_u]` for the Hausdorff dimension.

use serde::{Deserialize, Serialize};

use crate::constants::{build_certificate, CertificateOptions, HypothesisCertificate};
use crate::domain::{build_mesh, build_subintervals, invariant_interval, InvariantInterval, Mesh};
use crate::error::{Error, Result};
use crate::ifs::GaussIfs;
use crate::real::Real;
use crate::transfer::{certified_rho, RhoEnclosure, TransferKernel};

/// Discretisation parameters.
#[derive(Debug, Clone, Copy)]
pub struct Discretization<T> {
    pub r: usize,
    pub h_target: T,
    pub nu: usize,
    pub nu_prime: usize,
    pub mu_cap: T,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions<T> {
    /// Use the certificate: cone bounds when it verifies, and the `H h^r`
    /// margin for the bracket. Off means heuristic mode with a zero margin.
    pub verify: bool,
    /// Relative spread at which power iteration stops.
    pub power_tol: T,
    pub max_iters: usize,
    /// Root-finding tolerance in `s`.
    pub root_tol: T,
    /// Upper end of the search interval `[0, s_max]`.
    pub s_max: T,
    pub kappa2: Option<T>,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        let eps = T::epsilon();
        Self {
            verify: true,
            power_tol: eps * T::from_f64(1e4),
            max_iters: 2000,
            root_tol: eps * T::from_f64(1e4),
            s_max: T::from_f64(1.5),
            kappa2: None,
        }
    }
}

/// Which stage of the computation produced a spectral-radius evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Root,
    Upper,
    Lower,
}

#[derive(Debug, Clone)]
pub struct Trial<T> {
    pub phase: Phase,
    pub s: T,
    pub lo: T,
    pub hi: T,
    pub lambda: T,
    pub iterations: usize,
    pub margin: T,
    pub cone: bool,
    pub verified: bool,
}

/// A prepared problem: domain, mesh and the `s`-independent part of the
/// collocation matrix.
#[derive(Debug, Clone)]
pub struct Problem<T> {
    pub ifs: GaussIfs,
    pub disc: Discretization<T>,
    pub inv: InvariantInterval<T>,
    pub subintervals: Vec<(T, T)>,
    pub mesh: Mesh<T>,
    pub kernel: TransferKernel<T>,
}

impl<T: Real> Problem<T> {
    pub fn new(ifs: GaussIfs, disc: Discretization<T>) -> Result<Self> {
        if disc.nu == 0 {
            return Err(Error::InvalidArgument("nu must be at least 1".into()));
        }
        if disc.nu_prime > disc.nu {
            return Err(Error::InvalidArgument("nu_prime must not exceed nu".into()));
        }
        let inv = invariant_interval::<T>(&ifs)?;
        let subintervals = build_subintervals(&ifs, &inv, disc.nu_prime, disc.r, disc.mu_cap, disc.h_target)?;
        let mesh = build_mesh(&subintervals, disc.r, disc.h_target)?;
        let kernel = TransferKernel::new(&ifs, &mesh, disc.nu)?;
        Ok(Self { ifs, disc, inv, subintervals, mesh, kernel })
    }

    pub fn certificate(&self, s: T, opts: &SolverOptions<T>) -> Result<HypothesisCertificate<T>> {
        build_certificate(&self.ifs, &self.inv, &self.mesh, s, self.disc.nu, &CertificateOptions { kappa2: opts.kappa2 })
    }

    /// Spectral-radius enclosure of the collocation matrix at `s`.
    pub fn evaluate(&self, s: T, phase: Phase, opts: &SolverOptions<T>) -> Result<Trial<T>> {
        let (cone_m, margin, verified) = if opts.verify && s > T::zero() {
            let cert = self.certificate(s, opts)?;
            (cert.cone_parameter(), cert.margin(), cert.verified)
        } else {
            (None, T::zero(), false)
        };
        let mat = self.kernel.assemble(s);
        let enc: RhoEnclosure<T> = certified_rho(&mat, &self.mesh.nodes, cone_m, opts.power_tol, opts.max_iters)?;
        Ok(Trial {
            phase,
            s,
            lo: enc.lo,
            hi: enc.hi,
            lambda: enc.lambda,
            iterations: enc.iterations,
            margin,
            cone: enc.cone,
            verified,
        })
    }

    fn phi(&self, t: &Trial<T>) -> T {
        root_nu(t.lambda, self.disc.nu) - T::one()
    }
}

fn root_nu<T: Real>(x: T, nu: usize) -> T {
    if nu == 1 {
        x
    } else {
        (x.ln() / T::from_usize(nu)).exp()
    }
}

#[derive(Debug, Clone)]
pub struct RootResult<T> {
    pub s_mid: T,
    /// `d/ds rho(L_{s,nu})^(1/nu)` near the root, from the last secant.
    pub slope: T,
    pub trace: Vec<Trial<T>>,
}

/// Zero of `phi(s) = rho(L_{s,nu})^(1/nu) - 1` on `[0, s_max]`: bisection down
/// to a bracket of width `1e-3`, then Illinois-modified regula falsi.
pub fn rho_root<T: Real>(problem: &Problem<T>, opts: &SolverOptions<T>) -> Result<RootResult<T>> {
    let mut trace = Vec::new();
    let eval = |s: T, trace: &mut Vec<Trial<T>>| -> Result<T> {
        // the root search uses the point estimate only
        let quick = SolverOptions { verify: false, ..*opts };
        let t = problem.evaluate(s, Phase::Root, &quick)?;
        let f = problem.phi(&t);
        trace.push(t);
        Ok(f)
    };
    let (mut a, mut b) = (T::zero(), opts.s_max);
    let mut fa = eval(a, &mut trace)?;
    let mut fb = eval(b, &mut trace)?;
    if !(fa > T::zero()) {
        return Err(Error::Range("spectral radius at s = 0 does not exceed 1".into()));
    }
    if !(fb < T::zero()) {
        return Err(Error::Range(format!("spectral radius at s = {} is not below 1", b.to_f64())));
    }
    let coarse = T::from_f64(1e-3);
    while b - a > coarse {
        let m = (a + b) / T::from_f64(2.0);
        let fm = eval(m, &mut trace)?;
        if fm > T::zero() {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    // Illinois: halve the stale end's value when the same side is kept twice.
    let mut side = 0i8;
    let mut best = if fa.abs() < fb.abs() { a } else { b };
    for _ in 0..200 {
        if b - a <= opts.root_tol {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !(c > a && c < b) {
            c = (a + b) / T::from_f64(2.0);
        }
        let fc = eval(c, &mut trace)?;
        best = c;
        if fc == T::zero() {
            break;
        }
        if fc > T::zero() {
            a = c;
            fa = fc;
            if side == 1 {
                fb /= T::from_f64(2.0);
            }
            side = 1;
        } else {
            b = c;
            fb = fc;
            if side == -1 {
                fa /= T::from_f64(2.0);
            }
            side = -1;
        }
        if (fc.abs()) <= T::epsilon() * T::from_f64(4.0) {
            break;
        }
    }
    let slope = secant_slope(&trace, problem);
    Ok(RootResult { s_mid: best, slope, trace })
}

fn secant_slope<T: Real>(trace: &[Trial<T>], problem: &Problem<T>) -> T {
    let n = trace.len();
    let fallback = T::from_f64(-1.0);
    if n < 2 {
        return fallback;
    }
    let (p, q) = (&trace[n - 2], &trace[n - 1]);
    let ds = q.s - p.s;
    if ds == T::zero() {
        return fallback;
    }
    let slope = (problem.phi(q) - problem.phi(p)) / ds;
    if slope < T::zero() && slope.is_finite() {
        slope
    } else {
        fallback
    }
}

/// Rigorous bracket for the dimension.
#[derive(Debug, Clone)]
pub struct DimensionBracket<T> {
    pub s_l: T,
    pub s_u: T,
    pub s_mid: T,
    /// `H_{r+1}` at `s_mid`.
    pub h_const: T,
    pub h: T,
    pub r: usize,
    pub nu: usize,
    pub rho_at_sl: (T, T),
    pub rho_at_su: (T, T),
    pub margin_at_sl: T,
    pub margin_at_su: T,
    pub verified: bool,
    pub digits_guaranteed: i32,
    pub trace: Vec<Trial<T>>,
}

impl<T: Real> DimensionBracket<T> {
    pub fn width(&self) -> T {
        self.s_u - self.s_l
    }
}

/// Expands outward from `s_mid` until the enclosures clear the `H h^r`
/// margins, `rho_hi(s_u) < 1 - H h^r` and `rho_lo(s_l) > 1 + H h^r`, then
/// bisects inward to the tightest passing points.
pub fn certify_bracket<T: Real>(
    problem: &Problem<T>,
    root: &RootResult<T>,
    opts: &SolverOptions<T>,
) -> Result<DimensionBracket<T>> {
    let s_mid = root.s_mid;
    let nu = problem.disc.nu;
    let cert_mid = problem.certificate(s_mid, opts)?;
    let margin_mid = if opts.verify { cert_mid.margin() } else { T::zero() };
    // d rho / ds of the nu-fold matrix, near rho = 1
    let drho = root.slope.abs() * T::from_usize(nu);
    let floor = opts.root_tol * T::from_f64(4.0);
    let d0 = (T::from_f64(1.5) * margin_mid / drho).max(floor);

    let mut trace = Vec::new();
    let upper = search_side(problem, opts, s_mid, d0, Phase::Upper, &mut trace)?;
    let lower = search_side(problem, opts, s_mid, d0, Phase::Lower, &mut trace)?;
    let width = upper.s - lower.s;
    let digits = if width > T::zero() { (-width.log10().to_f64()).floor() as i32 } else { T::DIGITS as i32 };
    Ok(DimensionBracket {
        s_l: lower.s,
        s_u: upper.s,
        s_mid,
        h_const: cert_mid.h_const,
        h: problem.mesh.h,
        r: problem.disc.r,
        nu,
        rho_at_sl: (lower.lo, lower.hi),
        rho_at_su: (upper.lo, upper.hi),
        margin_at_sl: lower.margin,
        margin_at_su: upper.margin,
        verified: opts.verify && lower.verified && upper.verified,
        digits_guaranteed: digits,
        trace,
    })
}

fn passes<T: Real>(t: &Trial<T>, phase: Phase) -> bool {
    match phase {
        Phase::Upper => t.hi < T::one() - t.margin,
        Phase::Lower => t.lo > T::one() + t.margin,
        Phase::Root => unreachable!("root trials are not bracket tests"),
    }
}

fn search_side<T: Real>(
    problem: &Problem<T>,
    opts: &SolverOptions<T>,
    s_mid: T,
    d0: T,
    phase: Phase,
    trace: &mut Vec<Trial<T>>,
) -> Result<Trial<T>> {
    let dir = if phase == Phase::Upper { T::one() } else { -T::one() };
    let in_range = |s: T| s > T::zero() && s <= opts.s_max;
    let mut fail = s_mid;
    let mut d = d0;
    let mut pass: Option<Trial<T>> = None;
    for _ in 0..200 {
        let s = s_mid + dir * d;
        if !in_range(s) {
            break;
        }
        let t = problem.evaluate(s, phase, opts)?;
        let ok = passes(&t, phase);
        trace.push(t.clone());
        if ok {
            pass = Some(t);
            break;
        }
        fail = s;
        d *= T::from_f64(2.0);
    }
    let mut pass = pass.ok_or_else(|| {
        Error::Bracket(format!(
            "no admissible {} end within (0, {}]; H h^r is too large, use a smaller h or a larger r",
            if phase == Phase::Upper { "upper" } else { "lower" },
            opts.s_max.to_f64()
        ))
    })?;
    loop {
        let gap = (pass.s - fail).abs();
        let resolution = ((pass.s - s_mid).abs() / T::from_f64(100.0)).max(opts.root_tol);
        if gap <= resolution {
            break;
        }
        let m = (pass.s + fail) / T::from_f64(2.0);
        let t = problem.evaluate(m, phase, opts)?;
        let ok = passes(&t, phase);
        trace.push(t.clone());
        if ok {
            pass = t;
        } else {
            fail = m;
        }
    }
    Ok(pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(digits: &[u64], r: usize, h: f64, nu: usize) -> Problem<f64> {
        let disc = Discretization { r, h_target: h, nu, nu_prime: 0, mu_cap: 4.0 };
        Problem::new(GaussIfs::from_integers(digits).unwrap(), disc).unwrap()
    }

    #[test]
    fn root_for_e12_in_double() {
        let p = problem(&[1, 2], 6, 0.05, 1);
        let opts = SolverOptions { verify: false, ..SolverOptions::default() };
        let root = rho_root(&p, &opts).unwrap();
        assert!((root.s_mid - 0.531_280_506_277_205).abs() < 1e-9, "{}", root.s_mid);
        assert!(root.slope < 0.0);
    }

    #[test]
    fn heuristic_bracket_collapses() {
        let p = problem(&[1, 2], 6, 0.05, 1);
        let opts = SolverOptions { verify: false, ..SolverOptions::default() };
        let root = rho_root(&p, &opts).unwrap();
        let br = certify_bracket(&p, &root, &opts).unwrap();
        assert!(br.s_l < br.s_mid && br.s_mid < br.s_u);
        assert!(br.width() < 1e-9);
        assert!(!br.verified);
    }

    #[test]
    fn nu_prime_above_nu_is_rejected() {
        let disc = Discretization { r: 4, h_target: 0.1, nu: 1, nu_prime: 2, mu_cap: 4.0 };
        assert!(Problem::new(GaussIfs::from_integers(&[1, 2]).unwrap(), disc).is_err());
    }

    #[test]
    fn upper_limit_below_dimension_is_reported() {
        let p = problem(&[1, 2], 4, 0.1, 1);
        let opts = SolverOptions { verify: false, s_max: 0.4, ..SolverOptions::default() };
        assert!(matches!(rho_root(&p, &opts), Err(Error::Range(_))));
    }
}
