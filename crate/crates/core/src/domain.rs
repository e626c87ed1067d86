//! Invariant interval, reduced subdomain and the piecewise extended-Chebyshev
//! collocation mesh.

use crate::error::{Error, Result};
use crate::ifs::{theta_omega, word_coeffs, GaussIfs};
use crate::real::Real;

const MAX_SEQUENCE_DEPTH: usize = 200;

/// The smallest interval mapped into itself by every digit map, together with
/// the monotone sequences `a_k` (increasing) and `b_k` (decreasing) that
/// converge to its endpoints.
#[derive(Debug, Clone)]
pub struct InvariantInterval<T> {
    pub a_inf: T,
    pub b_inf: T,
    pub a_seq: Vec<T>,
    pub b_seq: Vec<T>,
}

impl<T: Real> InvariantInterval<T> {
    /// `a_k`, saturating at the last stored term once the sequence has
    /// converged to working precision.
    pub fn a_at(&self, k: usize) -> T {
        self.a_seq[k.min(self.a_seq.len() - 1)]
    }

    pub fn b_at(&self, k: usize) -> T {
        self.b_seq[k.min(self.b_seq.len() - 1)]
    }

    pub fn len(&self) -> T {
        self.b_inf - self.a_inf
    }
}

/// Closed form `a_inf = -gamma/2 + sqrt(gamma^2/4 + gamma/Gamma)`,
/// `b_inf = (Gamma/gamma) a_inf`, plus the iterated sequences
/// `a_0 = 0, b_0 = 1/gamma, a_{k+1} = theta_Gamma(b_k), b_{k+1} = theta_gamma(a_k)`.
pub fn invariant_interval<T: Real>(ifs: &GaussIfs) -> Result<InvariantInterval<T>> {
    let (gf, bgf) = (ifs.gamma(), ifs.big_gamma());
    if gf >= bgf {
        return Err(Error::InvalidArgument("invariant interval needs two distinct digits".into()));
    }
    let g = T::from_f64(gf);
    let big = T::from_f64(bgf);
    let half = g / T::from_f64(2.0);
    // rationalised to avoid cancellation when gamma^2 >> gamma/Gamma
    let a_inf = (g / big) / (half + (half * half + g / big).sqrt());
    let b_inf = big / g * a_inf;

    let mut a_seq = vec![T::zero()];
    let mut b_seq = vec![T::one() / g];
    let tol = T::epsilon() * T::from_f64(4.0);
    for _ in 0..MAX_SEQUENCE_DEPTH {
        let (a, b) = (*a_seq.last().unwrap(), *b_seq.last().unwrap());
        let a_next = GaussIfs::theta(bgf, b);
        let b_next = GaussIfs::theta(gf, a);
        a_seq.push(a_next);
        b_seq.push(b_next);
        if (a_next - a).abs() <= tol * a_next.abs() && (b_next - b).abs() <= tol * b_next.abs() {
            break;
        }
    }
    Ok(InvariantInterval { a_inf, b_inf, a_seq, b_seq })
}

/// Residuals of the fixed-point equations
/// `theta_Gamma(theta_gamma(a_inf)) = a_inf` and `theta_gamma(theta_Gamma(b_inf)) = b_inf`.
pub fn fixed_point_residuals<T: Real>(ifs: &GaussIfs, inv: &InvariantInterval<T>) -> (T, T) {
    let (g, big) = (ifs.gamma(), ifs.big_gamma());
    let ra = GaussIfs::theta(big, GaussIfs::theta(g, inv.a_inf)) - inv.a_inf;
    let rb = GaussIfs::theta(g, GaussIfs::theta(big, inv.b_inf)) - inv.b_inf;
    (ra.abs(), rb.abs())
}

/// `sin^2(pi/(2r+2))`, the factor in the inter-interval gap condition.
pub fn gap_factor<T: Real>(r: usize) -> T {
    let s = (T::pi() / T::from_usize(2 * r + 2)).sin();
    s * s
}

/// Disjoint subintervals covering every image `theta_omega([a_inf, b_inf])`
/// with `|omega| = nu_prime`, ordered left to right.
///
/// Images are sorted and overlapping ones fused. A sweep then merges an
/// interval into its predecessor (absorbing the gap) when the gap is below
/// `sin^2(pi/(2r+2)) h_target` or when either interval is shorter than
/// `h_target / mu_cap`.
pub fn build_subintervals<T: Real>(
    ifs: &GaussIfs,
    inv: &InvariantInterval<T>,
    nu_prime: usize,
    r: usize,
    mu_cap: T,
    h_target: T,
) -> Result<Vec<(T, T)>> {
    if nu_prime == 0 {
        return Ok(vec![(inv.a_inf, inv.b_inf)]);
    }
    if mu_cap < T::one() {
        return Err(Error::InvalidArgument("mu_cap must be at least 1".into()));
    }
    let mut images: Vec<(T, T)> = ifs
        .words(nu_prime)?
        .iter()
        .map(|w| {
            let c = word_coeffs::<T>(ifs, w)?;
            let (x, y) = (theta_omega(&c, inv.a_inf), theta_omega(&c, inv.b_inf));
            Ok(if x <= y { (x, y) } else { (y, x) })
        })
        .collect::<Result<_>>()?;
    images.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());

    let min_gap = gap_factor::<T>(r) * h_target;
    let min_len = h_target / mu_cap;
    let mut out: Vec<(T, T)> = Vec::with_capacity(images.len());
    for (a, b) in images {
        match out.last_mut() {
            Some(last) => {
                let gap = a - last.1;
                let short = (b - a) < min_len || (last.1 - last.0) < min_len;
                if gap <= T::zero() || gap < min_gap || short {
                    last.1 = last.1.max(b);
                } else {
                    out.push((a, b));
                }
            }
            None => out.push((a, b)),
        }
    }
    Ok(out)
}

/// Extended Chebyshev points `c_k = -cos((2k+1)pi/(2r+2)) / cos(pi/(2r+2))`,
/// `k = 0..=r`, which include both endpoints of `[-1, 1]`.
pub fn chebyshev_reference_nodes<T: Real>(r: usize) -> Result<Vec<T>> {
    if r < 1 {
        return Err(Error::InvalidArgument("degree must be at least 1".into()));
    }
    let denom = T::from_usize(2 * r + 2);
    let scale = (T::pi() / denom).cos();
    let mut nodes = vec![T::zero(); r + 1];
    for k in 0..=r / 2 {
        let v = -(T::from_usize(2 * k + 1) * T::pi() / denom).cos() / scale;
        nodes[k] = v;
        nodes[r - k] = -v;
    }
    nodes[0] = -T::one();
    nodes[r] = T::one();
    if r.is_multiple_of(2) {
        nodes[r / 2] = T::zero();
    }
    Ok(nodes)
}

/// One subinterval `[a, b]` split into `n` cells of width `h`.
#[derive(Debug, Clone)]
pub struct MeshInterval<T> {
    pub a: T,
    pub b: T,
    pub n: usize,
    pub h: T,
    /// Global index of the first node of this interval.
    pub offset: usize,
}

impl<T: Real> MeshInterval<T> {
    /// Cell boundary `t_j`, `j = 0..=n`; `t_n` is `b` exactly.
    pub fn t(&self, j: usize) -> T {
        if j == self.n {
            self.b
        } else {
            self.a + T::from_usize(j) * self.h
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh<T> {
    pub intervals: Vec<MeshInterval<T>>,
    pub r: usize,
    /// Reference nodes on `[-1, 1]`.
    pub ref_nodes: Vec<T>,
    /// Global, strictly increasing collocation nodes.
    pub nodes: Vec<T>,
    pub q: usize,
    pub h: T,
    pub h_min: T,
    pub mu: T,
    pub gap_ok: bool,
}

impl<T: Real> Mesh<T> {
    /// Global index of local node `k` of cell `j` (both 0-based) in interval `i`.
    /// Node `r` of cell `j` and node `0` of cell `j + 1` share an index.
    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        self.intervals[i].offset + j * self.r + k
    }

    /// Total number of cells.
    pub fn cell_count(&self) -> usize {
        self.intervals.iter().map(|iv| iv.n).sum()
    }

    /// Cell `(i, j)` (0-based) containing `x`, and the reference coordinate of
    /// `x` in that cell. An interior cell boundary belongs to the left cell.
    /// Points within 4 ulp outside an interval are clamped onto it.
    pub fn locate(&self, x: T) -> Result<(usize, usize, T)> {
        let tol = T::from_f64(4.0) * T::epsilon() * x.abs().max(self.h);
        let ivs = &self.intervals;
        let mut i = ivs.partition_point(|iv| iv.a <= x).saturating_sub(1);
        let mut xc = x;
        if x < ivs[i].a {
            if ivs[i].a - x > tol {
                return Err(Error::Domain { x: x.to_sci_string() });
            }
            xc = ivs[i].a;
        } else if x > ivs[i].b {
            if x - ivs[i].b <= tol {
                xc = ivs[i].b;
            } else if i + 1 < ivs.len() && ivs[i + 1].a - x <= tol {
                i += 1;
                xc = ivs[i].a;
            } else {
                return Err(Error::Domain { x: x.to_sci_string() });
            }
        }
        let iv = &ivs[i];
        let guess = ((xc - iv.a) / iv.h).floor().to_f64();
        let mut j = if guess.is_finite() && guess > 0.0 { (guess as usize).min(iv.n - 1) } else { 0 };
        while j > 0 && xc <= iv.t(j) {
            j -= 1;
        }
        while j + 1 < iv.n && xc > iv.t(j + 1) {
            j += 1;
        }
        let (left, right) = (iv.t(j), iv.t(j + 1));
        let two = T::from_f64(2.0);
        let mut xhat = two * (xc - left) / (right - left) - T::one();
        if xhat < -T::one() {
            xhat = -T::one();
        } else if xhat > T::one() {
            xhat = T::one();
        }
        Ok((i, j, xhat))
    }
}

/// Lays `N_i = ceil((b_i - a_i)/h_target)` equal cells on each subinterval
/// and places the extended Chebyshev nodes in every cell.
pub fn build_mesh<T: Real>(subintervals: &[(T, T)], r: usize, h_target: T) -> Result<Mesh<T>> {
    if r < 2 {
        return Err(Error::InvalidArgument("degree must be at least 2".into()));
    }
    if !(h_target > T::zero()) {
        return Err(Error::InvalidArgument("h must be positive".into()));
    }
    if subintervals.is_empty() {
        return Err(Error::InvalidArgument("no subintervals".into()));
    }
    for (k, &(a, b)) in subintervals.iter().enumerate() {
        if !(a < b) {
            return Err(Error::Mesh(format!("subinterval {k} is empty or reversed")));
        }
        if k > 0 && !(subintervals[k - 1].1 < a) {
            return Err(Error::Mesh(format!("subintervals {} and {k} overlap", k - 1)));
        }
    }
    let ref_nodes = chebyshev_reference_nodes::<T>(r)?;
    let mut intervals = Vec::with_capacity(subintervals.len());
    let mut offset = 0;
    for &(a, b) in subintervals {
        let ratio = ((b - a) / h_target).to_f64();
        let mut n = ratio.ceil().max(1.0) as usize;
        // guard against ratio landing a hair below an integer in f64
        if (b - a) / T::from_usize(n) > h_target {
            n += 1;
        }
        let h = (b - a) / T::from_usize(n);
        intervals.push(MeshInterval { a, b, n, h, offset });
        offset += n * r + 1;
    }
    let q = offset;
    let half = T::from_f64(0.5);
    let mut nodes = Vec::with_capacity(q);
    for iv in &intervals {
        for j in 0..iv.n {
            let left = iv.t(j);
            let width = iv.t(j + 1) - left;
            for (k, &c) in ref_nodes.iter().enumerate() {
                if k == r {
                    continue;
                }
                nodes.push(if k == 0 { left } else { left + width * half * (T::one() + c) });
            }
        }
        nodes.push(iv.b);
    }
    debug_assert_eq!(nodes.len(), q);
    if nodes.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Mesh("collocation nodes are not strictly increasing".into()));
    }

    let h = intervals.iter().map(|iv| iv.h).fold(T::zero(), T::max);
    let h_min = intervals.iter().map(|iv| iv.h).fold(h, T::min);
    let factor = gap_factor::<T>(r);
    let mut gap_ok = true;
    for w in intervals.windows(2) {
        if factor * w[0].h > w[1].a - w[0].b {
            gap_ok = false;
        }
    }
    if !gap_ok {
        return Err(Error::Mesh(
            "gap between subintervals is below sin^2(pi/(2r+2)) h_i; merge intervals (raise mu_cap or lower nu_prime)"
                .into(),
        ));
    }
    Ok(Mesh { intervals, r, ref_nodes, nodes, q, h, h_min, mu: h / h_min, gap_ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dd::DoubleDouble;

    fn ifs(d: &[u64]) -> GaussIfs {
        GaussIfs::from_integers(d).unwrap()
    }

    #[test]
    fn closed_form_endpoints() {
        let inv = invariant_interval::<f64>(&ifs(&[1, 2])).unwrap();
        let s3 = 3f64.sqrt();
        assert!((inv.a_inf - (s3 - 1.0) / 2.0).abs() < 1e-15);
        assert!((inv.b_inf - (s3 - 1.0)).abs() < 1e-15);

        let inv = invariant_interval::<f64>(&ifs(&[10, 11])).unwrap();
        assert!((inv.a_inf - 0.0901).abs() < 5e-5);
        assert!((inv.b_inf - 0.0991).abs() < 5e-5);

        let inv = invariant_interval::<f64>(&ifs(&[1, 4, 7])).unwrap();
        assert!((inv.a_inf - 0.127).abs() < 5e-4);
        assert!((inv.b_inf - 0.8875).abs() < 5e-5);
    }

    #[test]
    fn sequences_are_monotone_and_converge() {
        let e = ifs(&[1, 4, 7]);
        let inv = invariant_interval::<DoubleDouble>(&e).unwrap();
        assert_eq!(inv.a_seq[0], DoubleDouble::zero());
        assert_eq!(inv.b_seq[0], DoubleDouble::one());
        for k in 0..inv.a_seq.len() - 1 {
            assert!(inv.a_seq[k] <= inv.a_seq[k + 1]);
            assert!(inv.b_seq[k + 1] <= inv.b_seq[k]);
            assert!(inv.a_seq[k + 1] < inv.b_seq[k + 1]);
        }
        let last = *inv.a_seq.last().unwrap();
        assert!(((last - inv.a_inf).abs()).to_f64() < 1e-16);
        let (ra, rb) = fixed_point_residuals(&e, &inv);
        assert!(ra.to_f64() < 1e-28 && rb.to_f64() < 1e-28);
    }

    #[test]
    fn single_digit_is_rejected() {
        let e = GaussIfs::new(vec![3.0, 3.5]).unwrap();
        assert!(invariant_interval::<f64>(&e).is_ok());
        assert!(GaussIfs::new(vec![3.0]).is_err());
    }

    #[test]
    fn reference_nodes() {
        assert_eq!(chebyshev_reference_nodes::<f64>(1).unwrap(), vec![-1.0, 1.0]);
        assert_eq!(chebyshev_reference_nodes::<f64>(2).unwrap(), vec![-1.0, 0.0, 1.0]);
        let n3 = chebyshev_reference_nodes::<f64>(3).unwrap();
        let t = 2f64.sqrt() - 1.0;
        assert!((n3[1] + t).abs() < 1e-15 && (n3[2] - t).abs() < 1e-15);
        assert!(chebyshev_reference_nodes::<f64>(0).is_err());
        for r in 1..20 {
            let n = chebyshev_reference_nodes::<f64>(r).unwrap();
            assert!(n.windows(2).all(|w| w[0] < w[1]));
            for k in 0..=r {
                assert_eq!(n[k], -n[r - k]);
            }
        }
    }

    #[test]
    fn small_meshes() {
        let m = build_mesh(&[(0.0, 1.0)], 2, 0.5).unwrap();
        assert_eq!(m.nodes, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(m.q, 5);
        assert_eq!(m.node_index(0, 0, 2), m.node_index(0, 1, 0));

        let m = build_mesh(&[(0.0, 1.0)], 3, 1.0).unwrap();
        assert_eq!(m.q, 4);
        let c = chebyshev_reference_nodes::<f64>(3).unwrap();
        for k in 0..4 {
            assert!((m.nodes[k] - (1.0 + c[k]) / 2.0).abs() < 1e-15);
        }
        assert!(build_mesh(&[(0.0, 1.0)], 1, 0.5).is_err());
    }

    #[test]
    fn two_intervals_share_no_nodes() {
        let m = build_mesh(&[(0.0, 1.0), (2.0, 2.5)], 2, 0.5).unwrap();
        assert_eq!(m.q, 2 * 2 + 1 + 2 + 1);
        assert_eq!(m.mu, 1.0);
        assert_eq!(m.node_index(1, 0, 0), 5);
    }

    #[test]
    fn gap_condition_violation_is_reported() {
        let err = build_mesh(&[(0.0, 1.0), (1.0001, 2.0)], 2, 0.5).unwrap_err();
        assert!(matches!(err, Error::Mesh(_)));
    }

    #[test]
    fn locate_uses_left_rule() {
        let m = build_mesh(&[(0.0, 1.0)], 2, 0.5).unwrap();
        assert_eq!(m.locate(0.3).unwrap().1, 0);
        assert_eq!(m.locate(0.5).unwrap().1, 0);
        assert_eq!(m.locate(0.5000001).unwrap().1, 1);
        assert_eq!(m.locate(1.0).unwrap().1, 1);
        assert_eq!(m.locate(1.0 + f64::EPSILON).unwrap().1, 1);
        assert!(m.locate(1.0 + 10.0 * f64::EPSILON).is_err());
        assert!(m.locate(-1e-3).is_err());
    }

    #[test]
    fn one_step_subdomain_for_e12() {
        let e = ifs(&[1, 2]);
        let inv = invariant_interval::<f64>(&e).unwrap();
        let subs = build_subintervals(&e, &inv, 1, 2, 4.0, 0.01).unwrap();
        assert_eq!(subs.len(), 2);
        let (a, b) = (inv.a_inf, inv.b_inf);
        let want = [(1.0 / (2.0 + b), 1.0 / (2.0 + a)), (1.0 / (1.0 + b), 1.0 / (1.0 + a))];
        for (got, want) in subs.iter().zip(want) {
            assert!((got.0 - want.0).abs() < 1e-15 && (got.1 - want.1).abs() < 1e-15);
        }
        assert!(subs[0].1 < subs[1].0);
        assert_eq!(build_subintervals(&e, &inv, 0, 2, 4.0, 0.01).unwrap(), vec![(a, b)]);
    }

    #[test]
    fn short_intervals_are_merged() {
        let e = ifs(&[1, 4, 7]);
        let inv = invariant_interval::<f64>(&e).unwrap();
        // with a coarse target the tiny images near 0.14 fall below h/mu_cap
        let subs = build_subintervals(&e, &inv, 2, 6, 4.0, 0.01).unwrap();
        assert!(subs.len() < 9);
        for w in subs.windows(2) {
            assert!(w[0].1 < w[1].0);
        }
        let min_len = subs.iter().map(|s| s.1 - s.0).fold(f64::INFINITY, f64::min);
        assert!(min_len >= 0.01 / 4.0);
    }
}
