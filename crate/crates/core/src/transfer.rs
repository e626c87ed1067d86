//! The collocation matrix of the iterated transfer operator and its
//! spectral-radius enclosure.
//!
//! Row `p` of the matrix evaluates `sum_w |theta_w'(x_p)|^s F(theta_w(x_p))`,
//! where `F` is the continuous piecewise interpolant of the node values. Only
//! the `r + 1` columns of the cell hit by `theta_w(x_p)` receive a
//! contribution, so rows are stored sparsely.

use std::io::Write;

use rayon::prelude::*;

use crate::domain::Mesh;
use crate::error::{Error, Result};
use crate::ifs::{theta_omega, word_coeffs, Continuants, GaussIfs};
use crate::real::Real;

/// Barycentric weights `1 / prod_{l != k} (c_k - c_l)` of the reference nodes.
pub fn barycentric_weights<T: Real>(nodes: &[T]) -> Vec<T> {
    (0..nodes.len())
        .map(|k| {
            let p = (0..nodes.len()).filter(|&l| l != k).fold(T::one(), |acc, l| acc * (nodes[k] - nodes[l]));
            T::one() / p
        })
        .collect()
}

/// All Lagrange basis values at reference coordinate `xhat` by the second
/// barycentric form; exact Kronecker delta at a node.
pub fn lagrange_values<T: Real>(nodes: &[T], weights: &[T], xhat: T, out: &mut [T]) {
    if let Some(k) = nodes.iter().position(|&c| c == xhat) {
        out.iter_mut().for_each(|v| *v = T::zero());
        out[k] = T::one();
        return;
    }
    let mut denom = T::zero();
    for ((o, &c), &w) in out.iter_mut().zip(nodes).zip(weights) {
        *o = w / (xhat - c);
        denom += *o;
    }
    for o in out.iter_mut() {
        *o /= denom;
    }
}

/// Value of local basis function `k` of cell `(i, j)` at `x`.
pub fn lagrange_eval<T: Real>(mesh: &Mesh<T>, i: usize, j: usize, k: usize, x: T) -> T {
    let iv = &mesh.intervals[i];
    let (left, right) = (iv.t(j), iv.t(j + 1));
    let xhat = T::from_f64(2.0) * (x - left) / (right - left) - T::one();
    let w = barycentric_weights(&mesh.ref_nodes);
    let mut out = vec![T::zero(); mesh.r + 1];
    lagrange_values(&mesh.ref_nodes, &w, xhat, &mut out);
    out[k]
}

/// Sparse row-major matrix.
#[derive(Debug, Clone)]
pub struct CollocationMatrix<T> {
    pub q: usize,
    pub s: T,
    pub nu: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Real> CollocationMatrix<T> {
    pub fn from_dense(rows: &[Vec<T>]) -> Self {
        let q = rows.len();
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in rows {
            assert_eq!(row.len(), q, "matrix must be square");
            for (c, &v) in row.iter().enumerate() {
                if v != T::zero() {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { q, s: T::zero(), nu: 1, row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, p: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[p]..self.row_ptr[p + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, p: usize, c: usize) -> T {
        self.row(p).find(|&(k, _)| k == c).map(|(_, v)| v).unwrap_or_else(T::zero)
    }

    /// `y = A x`, rows in parallel, each row summed left to right.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.q);
        (0..self.q)
            .into_par_iter()
            .with_min_len(64)
            .map(|p| self.row(p).fold(T::zero(), |acc, (c, v)| acc + v * x[c]))
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.q)
            .map(|p| {
                let mut row = vec![T::zero(); self.q];
                for (c, v) in self.row(p) {
                    row[c] = v;
                }
                row
            })
            .collect()
    }

    /// Text dump: `Q` on the first line, then one row per line, entries in
    /// full-precision decimal scientific notation.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.q)?;
        for row in self.to_dense() {
            let line: Vec<String> = row.iter().map(|v| v.to_sci_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Contribution of one word to one row: `ln(B_{nu-1} x + B_nu)`, the first
/// global column of the target cell, and the `r + 1` Lagrange values.
#[derive(Debug, Clone)]
struct Plan<T> {
    log_denoms: Vec<T>,
    first_cols: Vec<usize>,
    lagrange: Vec<T>,
}

/// Per-row log-denominators, first columns and Lagrange values, one entry per word.
type PlanRow<T> = (Vec<T>, Vec<usize>, Vec<T>);

/// Everything about the matrix that does not depend on `s`: word continuants,
/// the images of every node and their interpolation weights.
#[derive(Debug, Clone)]
pub struct TransferKernel<T> {
    pub nu: usize,
    pub words: usize,
    q: usize,
    r: usize,
    plan: Plan<T>,
}

impl<T: Real> TransferKernel<T> {
    pub fn new(ifs: &GaussIfs, mesh: &Mesh<T>, nu: usize) -> Result<Self> {
        let words = ifs.words(nu)?;
        let coeffs: Vec<Continuants<T>> = words.iter().map(|w| word_coeffs(ifs, w)).collect::<Result<_>>()?;
        let r = mesh.r;
        let nw = coeffs.len();
        let bw = barycentric_weights(&mesh.ref_nodes);
        let rows: Vec<Result<PlanRow<T>>> = mesh
            .nodes
            .par_iter()
            .map(|&x| {
                let mut logs = Vec::with_capacity(nw);
                let mut firsts = Vec::with_capacity(nw);
                let mut lag = vec![T::zero(); nw * (r + 1)];
                for (w, c) in coeffs.iter().enumerate() {
                    let y = theta_omega(c, x);
                    let (i, j, xhat) = mesh.locate(y)?;
                    logs.push((c.b_prev * x + c.b).ln());
                    firsts.push(mesh.node_index(i, j, 0));
                    lagrange_values(&mesh.ref_nodes, &bw, xhat, &mut lag[w * (r + 1)..(w + 1) * (r + 1)]);
                }
                Ok((logs, firsts, lag))
            })
            .collect();
        let mut plan = Plan {
            log_denoms: Vec::with_capacity(mesh.q * nw),
            first_cols: Vec::with_capacity(mesh.q * nw),
            lagrange: Vec::with_capacity(mesh.q * nw * (r + 1)),
        };
        for row in rows {
            let (l, f, g) = row?;
            plan.log_denoms.extend(l);
            plan.first_cols.extend(f);
            plan.lagrange.extend(g);
        }
        Ok(Self { nu, words: nw, q: mesh.q, r, plan })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// The collocation matrix at exponent `s`. Words are accumulated in
    /// lexicographic order within each row, so entries do not depend on the
    /// number of threads.
    pub fn assemble(&self, s: T) -> CollocationMatrix<T> {
        let (nw, r1, q) = (self.words, self.r + 1, self.q);
        let minus_two_s = -(s + s);
        let rows: Vec<(Vec<usize>, Vec<T>)> = (0..q)
            .into_par_iter()
            .with_min_len(16)
            .map_init(
                || (vec![T::zero(); q], vec![false; q]),
                |(acc, seen), p| {
                    let mut touched: Vec<usize> = Vec::new();
                    for w in 0..nw {
                        let idx = p * nw + w;
                        let weight =
                            if s == T::zero() { T::one() } else { (minus_two_s * self.plan.log_denoms[idx]).exp() };
                        let first = self.plan.first_cols[idx];
                        let lag = &self.plan.lagrange[idx * r1..(idx + 1) * r1];
                        for (k, &l) in lag.iter().enumerate() {
                            let c = first + k;
                            if !seen[c] {
                                seen[c] = true;
                                touched.push(c);
                            }
                            acc[c] += weight * l;
                        }
                    }
                    touched.sort_unstable();
                    let vals = touched.iter().map(|&c| acc[c]).collect();
                    for &c in &touched {
                        acc[c] = T::zero();
                        seen[c] = false;
                    }
                    (touched, vals)
                },
            )
            .collect();
        let mut row_ptr = Vec::with_capacity(q + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for (c, v) in rows {
            cols.extend(c);
            vals.extend(v);
            row_ptr.push(cols.len());
        }
        CollocationMatrix { q, s, nu: self.nu, row_ptr, cols, vals }
    }
}

/// Assembles the collocation matrix of the `nu`-fold operator at `s`.
pub fn assemble<T: Real>(ifs: &GaussIfs, mesh: &Mesh<T>, s: T, nu: usize) -> Result<CollocationMatrix<T>> {
    Ok(TransferKernel::new(ifs, mesh, nu)?.assemble(s))
}

/// Membership in the cone of positive vectors that are log-Lipschitz with
/// constant `m` on the (sorted) nodes. Checking consecutive nodes suffices.
pub fn cone_contains<T: Real>(values: &[T], nodes: &[T], m: T) -> bool {
    assert_eq!(values.len(), nodes.len());
    if values.iter().all(|&v| v == T::zero()) {
        return true;
    }
    if !values.iter().all(|&v| v > T::zero() && v.is_finite()) {
        return false;
    }
    values.windows(2).zip(nodes.windows(2)).all(|(v, x)| {
        let e = (m * (x[1] - x[0]).abs()).exp();
        v[0] <= e * v[1] && v[1] <= e * v[0]
    })
}

#[derive(Debug, Clone)]
pub struct PowerResult<T> {
    pub lambda: T,
    pub vector: Vec<T>,
    pub spread: T,
    pub iterations: usize,
}

/// Power iteration from the all-ones vector with max-norm normalisation.
/// Stops once the spread of the ratios `(A v)_p / v_p` falls below
/// `tol * lambda`; `lambda` is the midpoint of the extreme ratios.
pub fn power_iterate<T: Real>(
    mat: &CollocationMatrix<T>,
    cone: Option<(T, &[T])>,
    tol: T,
    max_iters: usize,
) -> Result<PowerResult<T>> {
    let mut v = vec![T::one(); mat.q];
    let mut last_spread = T::from_f64(f64::INFINITY);
    for it in 1..=max_iters {
        let u = mat.apply(&v);
        let (lo, hi) = ratio_range(&u, &v)
            .ok_or_else(|| Error::Convergence { iterations: it, spread: "non-positive iterate".into() })?;
        let lambda = (lo + hi) / T::from_f64(2.0);
        let spread = hi - lo;
        let norm = u.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
        v = u.into_iter().map(|x| x / norm).collect();
        last_spread = spread;
        if spread <= tol * lambda.abs() {
            if let Some((m, nodes)) = cone {
                if !cone_contains(&v, nodes, m) {
                    return Err(Error::Cone("converged vector is not in the cone".into()));
                }
            }
            return Ok(PowerResult { lambda, vector: v, spread, iterations: it });
        }
    }
    Err(Error::Convergence { iterations: max_iters, spread: last_spread.to_sci_string() })
}

fn ratio_range<T: Real>(u: &[T], v: &[T]) -> Option<(T, T)> {
    let mut lo = T::from_f64(f64::INFINITY);
    let mut hi = T::from_f64(f64::NEG_INFINITY);
    for (&a, &b) in u.iter().zip(v) {
        if !(b > T::zero()) || !(a > T::zero()) {
            return None;
        }
        let q = a / b;
        lo = lo.min(q);
        hi = hi.max(q);
    }
    Some((lo, hi))
}

/// Largest `alpha` and smallest `beta` with `alpha w <= A w <= beta w` in the
/// order of the cone with parameter `m`; `None` gives the plain componentwise
/// ratio bounds (the limit of an unbounded parameter).
///
/// For consecutive nodes with `E = exp(m |x_q - x_p|)`, membership of
/// `A w - alpha w` is the pair of half-lines
/// `alpha (E w_q - w_p) <= E u_q - u_p` and the same with `p, q` swapped, plus
/// `alpha < u_p / w_p`; the `beta` constraints are the reverse inequalities.
pub fn cone_order_bounds<T: Real>(mat: &CollocationMatrix<T>, w: &[T], nodes: &[T], m: Option<T>) -> Result<(T, T)> {
    let u = mat.apply(w);
    cone_order_bounds_from(&u, w, nodes, m)
}

pub fn cone_order_bounds_from<T: Real>(u: &[T], w: &[T], nodes: &[T], m: Option<T>) -> Result<(T, T)> {
    let (mut alpha, mut beta) =
        ratio_range(u, w).ok_or_else(|| Error::Cone("vector is not strictly positive".into()))?;
    if let Some(m) = m {
        for p in 0..w.len().saturating_sub(1) {
            let e = (m * (nodes[p + 1] - nodes[p]).abs()).exp();
            for (a, b) in [(p, p + 1), (p + 1, p)] {
                let coef = e * w[b] - w[a];
                if !(coef > T::zero()) {
                    return Err(Error::Cone(
                        "vector sits on the cone boundary; iterate further before bounding".into(),
                    ));
                }
                let rhs = (e * u[b] - u[a]) / coef;
                alpha = alpha.min(rhs);
                beta = beta.max(rhs);
            }
        }
    }
    Ok((alpha, beta))
}

#[derive(Debug, Clone)]
pub struct RhoEnclosure<T> {
    pub lo: T,
    pub hi: T,
    pub lambda: T,
    pub iterations: usize,
    /// Whether the cone parameter was supplied (rigorous bounds).
    pub cone: bool,
    pub vector: Vec<T>,
}

/// Power iteration followed by the cone-order bounds, widened outward by a
/// few units of roundoff.
pub fn certified_rho<T: Real>(
    mat: &CollocationMatrix<T>,
    nodes: &[T],
    m: Option<T>,
    tol: T,
    max_iters: usize,
) -> Result<RhoEnclosure<T>> {
    let pr = power_iterate(mat, m.map(|m| (m, nodes)), tol, max_iters)?;
    let (alpha, beta) = cone_order_bounds(mat, &pr.vector, nodes, m)?;
    let pad = T::from_f64(16.0) * T::epsilon();
    Ok(RhoEnclosure {
        lo: alpha - pad * alpha.abs(),
        hi: beta + pad * beta.abs(),
        lambda: pr.lambda,
        iterations: pr.iterations,
        cone: m.is_some(),
        vector: pr.vector,
    })
}
