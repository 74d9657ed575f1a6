//! Sparse symmetric solvers: top eigenpairs, Perron-Frobenius vectors, full
//! spectra of finite volumes, shifted solves and Chebyshev time evolution.

use num_complex::Complex64;

use crate::csr::{axpy, dot, norm2, CsrMatrix, SymmetricOperator};
use crate::dense;
use crate::error::{Error, Result};

/// Default residual tolerance for eigenpairs.
pub const DEFAULT_EIG_TOL: f64 = 1e-10;
/// Default size limit for full spectra.
pub const DEFAULT_DENSE_LIMIT: usize = 4096;
/// Default relative residual for resolvent solves.
pub const DEFAULT_SOLVE_TOL: f64 = 1e-10;
/// Default cap on Chebyshev degrees.
pub const DEFAULT_DEGREE_CAP: usize = 100_000;

/// Top eigenvalue, positive eigenvector normalised at the root, and the
/// optional full spectrum of a finite volume.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SpectralSummary {
    pub lambda_max: f64,
    pub pf_vector: Vec<f64>,
    pub residual: f64,
    pub spectrum: Option<Vec<f64>>,
}

impl SpectralSummary {
    pub fn pf_norm_sq(&self) -> f64 {
        dot(&self.pf_vector, &self.pf_vector)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub tol: f64,
    pub subspace: usize,
    pub max_restarts: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { tol: DEFAULT_EIG_TOL, subspace: 40, max_restarts: 400 }
    }
}

/// Explicitly restarted Lanczos with full reorthogonalisation for the largest
/// eigenvalue. Returns `(theta, unit vector, ||A x - theta x||)`.
pub fn lanczos_top(
    op: &dyn SymmetricOperator,
    start: &[f64],
    opts: LanczosOptions,
) -> Result<(f64, Vec<f64>, f64)> {
    let n = op.dim();
    assert_eq!(start.len(), n);
    if n == 0 {
        return Err(Error::Precondition("empty operator".into()));
    }
    let mut x = start.to_vec();
    let s = norm2(&x);
    if s == 0.0 {
        return Err(Error::Precondition("zero start vector".into()));
    }
    x.iter_mut().for_each(|v| *v /= s);
    let m = opts.subspace.clamp(1, n);
    let mut w = vec![0.0; n];
    let mut last = f64::INFINITY;
    for restart in 0..opts.max_restarts {
        let mut basis: Vec<Vec<f64>> = vec![x.clone()];
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        loop {
            let k = basis.len() - 1;
            op.apply(&basis[k], &mut w);
            let a = dot(&w, &basis[k]);
            alpha.push(a);
            // Two passes of classical Gram-Schmidt keep the basis orthonormal.
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(&w, v);
                    axpy(-c, v, &mut w);
                }
            }
            let b = norm2(&w);
            if basis.len() == m || b <= 1e-13 * a.abs().max(1.0) {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|v| v / b).collect());
        }
        let k = alpha.len();
        let t = faer::Mat::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i == j + 1 {
                beta[j]
            } else if j == i + 1 {
                beta[i]
            } else {
                0.0
            }
        });
        let (vals, vecs) = dense::eigen(&t)?;
        let theta = vals[k - 1];
        let mut ritz = vec![0.0; n];
        for (i, v) in basis.iter().enumerate() {
            axpy(vecs[(i, k - 1)], v, &mut ritz);
        }
        let s = norm2(&ritz);
        ritz.iter_mut().for_each(|v| *v /= s);
        op.apply(&ritz, &mut w);
        let theta = {
            let rq = dot(&w, &ritz);
            if rq.is_finite() { rq } else { theta }
        };
        axpy(-theta, &ritz, &mut w);
        let res = norm2(&w);
        log::trace!("lanczos restart {restart}: theta {theta:.16e} residual {res:.3e}");
        x = ritz;
        if res <= opts.tol {
            return Ok((theta, x, res));
        }
        last = res;
    }
    Err(Error::NoConvergence { iterations: opts.max_restarts, residual: last })
}

/// Largest eigenvalue and its eigenvector for a nonnegative irreducible
/// symmetric matrix, started from the all-ones vector.
pub fn extremal_eig(adjacency: &CsrMatrix, tol: f64) -> Result<(f64, Vec<f64>)> {
    let opts = LanczosOptions { tol, ..Default::default() };
    let n = adjacency.dim();
    if n == 1 {
        return Ok((adjacency.get(0, 0), vec![1.0]));
    }
    let (theta, x, _) = lanczos_top(adjacency, &vec![1.0; n], opts)?;
    Ok((theta, x))
}

/// Perron-Frobenius eigenpair rescaled so that the entry at `root` is 1.
pub fn pf_vector(adjacency: &CsrMatrix, root: usize, tol: f64) -> Result<SpectralSummary> {
    let n = adjacency.dim();
    let (mut lambda, x) = extremal_eig(adjacency, tol)?;
    let mut v: Vec<f64> = x.iter().map(|c| c.abs()).collect();
    let shift = adjacency.gershgorin_radius() + 1.0;
    let mut w = vec![0.0; n];
    // Entries that came out as zero are lifted by shifted power steps, which
    // preserve positivity and only sharpen the top eigendirection.
    let mut steps = 0;
    while v.iter().any(|&c| c <= 0.0) && steps < n {
        adjacency.matvec(&v, &mut w);
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi + shift * *vi;
        }
        let s = norm2(&v);
        v.iter_mut().for_each(|c| *c /= s);
        steps += 1;
    }
    adjacency.matvec(&v, &mut w);
    let vv = dot(&v, &v);
    let rq = dot(&w, &v) / vv;
    if rq.is_finite() {
        lambda = rq;
    }
    axpy(-lambda, &v, &mut w);
    let residual = norm2(&w) / vv.sqrt();
    if !(residual <= tol) {
        return Err(Error::NoConvergence { iterations: steps, residual });
    }
    let r = v[root];
    if !(r > 0.0) {
        return Err(Error::Precondition("Perron-Frobenius vector vanishes at the root".into()));
    }
    v.iter_mut().for_each(|c| *c /= r);
    Ok(SpectralSummary { lambda_max: lambda, pf_vector: v, residual, spectrum: None })
}

/// Breadth-first parent structure of a tree-shaped sparse matrix, if it is one.
struct TreeOrder {
    order: Vec<usize>,
    parent: Vec<usize>,
    weight: Vec<f64>,
}

fn tree_order(m: &CsrMatrix) -> Option<TreeOrder> {
    let n = m.dim();
    let off: usize = (0..n).map(|i| m.off_diagonal_degree(i)).sum();
    if off != 2 * n.saturating_sub(1) {
        return None;
    }
    let mut parent = vec![usize::MAX; n];
    let mut weight = vec![0.0; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    seen[0] = true;
    order.push(0);
    let mut head = 0;
    while head < order.len() {
        let x = order[head];
        head += 1;
        for (y, w) in m.row(x) {
            if y != x && !seen[y] {
                seen[y] = true;
                parent[y] = x;
                weight[y] = w;
                order.push(y);
            }
        }
    }
    (order.len() == n).then_some(TreeOrder { order, parent, weight })
}

/// Number of eigenvalues strictly below `x` of a tree-shaped symmetric matrix,
/// by leaf-to-root symmetric elimination of `A - x I`.
fn tree_sturm_count(t: &TreeOrder, diag: &[f64], x: f64, pivmin: f64, d: &mut [f64]) -> usize {
    for (di, a) in d.iter_mut().zip(diag) {
        *di = a - x;
    }
    let mut count = 0;
    for &c in t.order[1..].iter().rev() {
        let mut piv = d[c];
        if piv.abs() < pivmin {
            piv = -pivmin;
        }
        if piv < 0.0 {
            count += 1;
        }
        let w = t.weight[c];
        d[t.parent[c]] -= w * w / piv;
    }
    let root = t.order[0];
    if d[root] < 0.0 || d[root].abs() < pivmin {
        count += 1;
    }
    count
}

fn tree_spectrum(m: &CsrMatrix, t: &TreeOrder) -> Vec<f64> {
    let n = m.dim();
    let diag = m.diagonal();
    let g = m.gershgorin_radius().max(1.0);
    let pivmin = f64::MIN_POSITIVE.sqrt() * g;
    let resolution = 1e-13 * g;
    let mut d = vec![0.0; n];
    let lo = -g * (1.0 + 1e-9) - 1e-12;
    let hi = g * (1.0 + 1e-9) + 1e-12;
    let mut out = Vec::with_capacity(n);
    let mut stack = vec![(lo, hi, 0usize, n)];
    while let Some((a, b, ca, cb)) = stack.pop() {
        if cb == ca {
            continue;
        }
        if b - a <= resolution {
            out.extend(std::iter::repeat_n(0.5 * (a + b), cb - ca));
            continue;
        }
        let mid = 0.5 * (a + b);
        let cm = tree_sturm_count(t, &diag, mid, pivmin, &mut d).clamp(ca, cb);
        stack.push((mid, b, cm, cb));
        stack.push((a, mid, ca, cm));
    }
    out.sort_by(|x, y| x.total_cmp(y));
    out
}

/// All eigenvalues in ascending order. Tree-shaped matrices use Sturm
/// bisection on the tree elimination; other matrices go through a dense solver.
pub fn full_spectrum(adjacency: &CsrMatrix, dense_limit: usize) -> Result<Vec<f64>> {
    let n = adjacency.dim();
    if n > dense_limit {
        return Err(Error::DenseLimit { size: n, limit: dense_limit });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if let Some(t) = tree_order(adjacency) {
        return Ok(tree_spectrum(adjacency, &t));
    }
    dense::eigenvalues(&adjacency.to_dense())
}

/// Result of a shifted solve together with the solver effort.
#[derive(Debug, Clone)]
pub struct ResolventSolve {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Preconditioned conjugate gradients for a symmetric positive definite
/// operator `M`, given its diagonal for Jacobi scaling.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<ResolventSolve> {
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(ResolventSolve { x: vec![0.0; n], iterations: 0, residual: 0.0 });
    }
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Indefinite(format!("diagonal entry {i} is {}", diag[i])));
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut it = 0;
    while it < max_iter {
        it += 1;
        apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::Indefinite(format!("curvature p^T M p = {pq:.3e} at step {it}")));
        }
        let alpha = rz / pq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        let rn = norm2(&r);
        if rn <= tol * bnorm {
            // Confirm with the true residual before returning.
            apply(&x, &mut q);
            let true_res = q.iter().zip(b).map(|(m, b)| (b - m) * (b - m)).sum::<f64>().sqrt();
            if true_res <= tol * bnorm {
                return Ok(ResolventSolve { x, iterations: it, residual: true_res / bnorm });
            }
            r = b.iter().zip(&q).map(|(b, m)| b - m).collect();
        }
        for ((zi, ri), d) in z.iter_mut().zip(&r).zip(diag) {
            *zi = ri / d;
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::NoConvergence { iterations: it, residual: norm2(&r) / bnorm })
}

/// Exact solve of `(lambda I - A) x = b` for a tree-shaped `A` by symmetric
/// elimination leaves first; `None` unless every pivot is positive.
fn tree_shifted_solve(t: &TreeOrder, diag: &[f64], lambda: f64, b: &[f64]) -> Option<Vec<f64>> {
    let mut d: Vec<f64> = diag.iter().map(|a| lambda - a).collect();
    let mut r = b.to_vec();
    for &c in t.order[1..].iter().rev() {
        if !(d[c] > 0.0) {
            return None;
        }
        let (p, w) = (t.parent[c], t.weight[c]);
        d[p] -= w * w / d[c];
        r[p] += w * r[c] / d[c];
    }
    let root = t.order[0];
    if !(d[root] > 0.0) {
        return None;
    }
    let mut x = vec![0.0; b.len()];
    x[root] = r[root] / d[root];
    for &c in &t.order[1..] {
        x[c] = (r[c] + t.weight[c] * x[t.parent[c]]) / d[c];
    }
    Some(x)
}

/// Solves `(lambda I - A) x = b`. Tree-shaped matrices are eliminated
/// exactly; anything else goes through Jacobi-preconditioned conjugate gradients.
pub fn resolvent_solve(adjacency: &CsrMatrix, lambda: f64, b: &[f64], tol: f64) -> Result<ResolventSolve> {
    let apply = |x: &[f64], y: &mut [f64]| {
        adjacency.matvec(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = lambda * xi - *yi;
        }
    };
    if adjacency.dim() > 0 {
        if let Some(t) = tree_order(adjacency) {
            let x = tree_shifted_solve(&t, &adjacency.diagonal(), lambda, b).ok_or_else(|| {
                Error::Indefinite(format!("lambda = {lambda} is not above the spectrum"))
            })?;
            let mut m = vec![0.0; b.len()];
            apply(&x, &mut m);
            let bnorm = norm2(b).max(f64::MIN_POSITIVE);
            let res = m.iter().zip(b).map(|(m, b)| (b - m) * (b - m)).sum::<f64>().sqrt() / bnorm;
            return Ok(ResolventSolve { x, iterations: 1, residual: res });
        }
    }
    let diag: Vec<f64> = adjacency.diagonal().iter().map(|a| lambda - a).collect();
    conjugate_gradient(apply, &diag, b, tol, 20 * adjacency.dim() + 10_000)
}

/// Bessel functions `J_0(x) .. J_K(x)` by Miller's backward recurrence, cut
/// where the terms drop below `1e-17`.
pub fn bessel_j_sequence(x: f64) -> Vec<f64> {
    if x == 0.0 {
        return vec![1.0];
    }
    let ax = x.abs();
    let start = (ax + 12.0 * ax.cbrt() + 40.0).ceil() as usize;
    let start = start + start % 2;
    let mut j = vec![0.0; start + 2];
    j[start] = 1e-30;
    for k in (1..=start).rev() {
        j[k - 1] = 2.0 * k as f64 / ax * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in &mut j[k - 1..] {
                *v *= 1e-250;
            }
        }
    }
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    let mut out: Vec<f64> = j[..=start].iter().map(|v| v / norm).collect();
    if x < 0.0 {
        for (k, v) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
    }
    let keep = out
        .iter()
        .rposition(|v| v.abs() > 1e-17)
        .map_or(1, |k| k + 1)
        .max((ax.ceil() as usize + 1).min(out.len()));
    out.truncate(keep);
    out
}

/// `e^{itH} u` for the hopping Hamiltonian `H = reference I - A`, by a
/// Chebyshev-Bessel expansion whose degree follows from `|t| ||A||`.
pub fn evolve(
    adjacency: &CsrMatrix,
    reference: f64,
    t: f64,
    u: &[Complex64],
    degree_cap: usize,
) -> Result<Vec<Complex64>> {
    let n = adjacency.dim();
    assert_eq!(u.len(), n);
    if !t.is_finite() {
        return Err(Error::Domain(format!("evolution time {t}")));
    }
    if t == 0.0 {
        return Ok(u.to_vec());
    }
    let g = adjacency.gershgorin_radius().max(f64::MIN_POSITIVE);
    let coeff = bessel_j_sequence(t * g);
    let degree = coeff.len() - 1;
    if degree > degree_cap {
        return Err(Error::DegreeCap { needed: degree, cap: degree_cap });
    }
    // Real and imaginary parts follow the same real three-term recurrence.
    let split = |v: &[Complex64]| -> [Vec<f64>; 2] {
        [v.iter().map(|c| c.re).collect(), v.iter().map(|c| c.im).collect()]
    };
    let scaled = |x: &[f64], y: &mut [f64]| {
        adjacency.matvec(x, y);
        y.iter_mut().for_each(|v| *v /= g);
    };
    let mut prev = split(u);
    let mut acc: Vec<Complex64> = u.iter().map(|c| c * coeff[0]).collect();
    if degree >= 1 {
        let mut cur = [vec![0.0; n], vec![0.0; n]];
        scaled(&prev[0], &mut cur[0]);
        scaled(&prev[1], &mut cur[1]);
        let mut next = [vec![0.0; n], vec![0.0; n]];
        // (-i)^k cycles through 1, -i, -1, i.
        let phase = [Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, 1.0)];
        for k in 1..=degree {
            let c = phase[k % 4] * (2.0 * coeff[k]);
            for i in 0..n {
                acc[i] += c * Complex64::new(cur[0][i], cur[1][i]);
            }
            if k == degree {
                break;
            }
            for part in 0..2 {
                scaled(&cur[part], &mut next[part]);
                for i in 0..n {
                    next[part][i] = 2.0 * next[part][i] - prev[part][i];
                }
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
    }
    let rot = Complex64::from_polar(1.0, t * reference);
    acc.iter_mut().for_each(|c| *c *= rot);
    Ok(acc)
}

/// Chebyshev coefficients of `f` on `[lo, hi]`, computed from `nodes` points and
/// truncated once they fall below `tol` relative to the largest one.
pub fn chebyshev_coefficients(f: impl Fn(f64) -> f64, lo: f64, hi: f64, nodes: usize, tol: f64) -> Vec<f64> {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let fx: Vec<f64> = (0..nodes)
        .map(|j| {
            let th = std::f64::consts::PI * (j as f64 + 0.5) / nodes as f64;
            f(mid + half * th.cos())
        })
        .collect();
    let mut c: Vec<f64> = (0..nodes)
        .map(|k| {
            let s: f64 = fx
                .iter()
                .enumerate()
                .map(|(j, v)| v * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / nodes as f64).cos())
                .sum();
            2.0 * s / nodes as f64
        })
        .collect();
    c[0] *= 0.5;
    let big = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let keep = c.iter().rposition(|v| v.abs() > tol * big).map_or(1, |k| k + 1);
    c.truncate(keep);
    c
}

/// `sum_k c_k T_k(B) u` where `B` maps `[lo, hi]` to `[-1, 1]` affinely in `A`.
pub fn chebyshev_apply(op: &dyn SymmetricOperator, lo: f64, hi: f64, coeff: &[f64], u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let scaled = |x: &[f64], y: &mut [f64]| {
        op.apply(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = (*yi - mid * xi) / half;
        }
    };
    let mut acc: Vec<f64> = u.iter().map(|v| coeff[0] * v).collect();
    if coeff.len() == 1 {
        return acc;
    }
    let mut prev = u.to_vec();
    let mut cur = vec![0.0; n];
    scaled(&prev, &mut cur);
    let mut next = vec![0.0; n];
    for (k, &c) in coeff.iter().enumerate().skip(1) {
        axpy(c, &cur, &mut acc);
        if k + 1 == coeff.len() {
            break;
        }
        scaled(&cur, &mut next);
        for i in 0..n {
            next[i] = 2.0 * next[i] - prev[i];
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    acc
}

/// Gauss quadrature `<u, f(A) u>` from `steps` Lanczos steps started at `u`.
pub fn lanczos_quadrature(op: &dyn SymmetricOperator, u: &[f64], steps: usize, f: impl Fn(f64) -> f64) -> Result<f64> {
    let n = u.len();
    let unorm = norm2(u);
    if unorm == 0.0 {
        return Ok(0.0);
    }
    let mut basis: Vec<Vec<f64>> = vec![u.iter().map(|v| v / unorm).collect()];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut w = vec![0.0; n];
    for _ in 0..steps.max(1) {
        let k = basis.len() - 1;
        op.apply(&basis[k], &mut w);
        let a = dot(&w, &basis[k]);
        alpha.push(a);
        for _ in 0..2 {
            for v in &basis {
                let c = dot(&w, v);
                axpy(-c, v, &mut w);
            }
        }
        let b = norm2(&w);
        if alpha.len() == steps.max(1) || b <= 1e-13 * a.abs().max(1.0) {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|v| v / b).collect());
    }
    let k = alpha.len();
    let t = faer::Mat::from_fn(k, k, |i, j| match i.abs_diff(j) {
        0 => alpha[i],
        1 => beta[i.min(j)],
        _ => 0.0,
    });
    let (vals, vecs) = dense::eigen(&t)?;
    let q: f64 = (0..k).map(|i| vecs[(0, i)] * vecs[(0, i)] * f(vals[i])).sum();
    Ok(unorm * unorm * q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{perturb, ModelKind, PerturbationMode, TreeBall};
    use proptest::prelude::*;

    fn star() -> CsrMatrix {
        TreeBall::build(3, 1).unwrap().adjacency().clone()
    }

    #[test]
    fn star_eigenpair() {
        let (l, _) = extremal_eig(&star(), 1e-12).unwrap();
        assert!((l - 3f64.sqrt()).abs() < 1e-12);
        let s = pf_vector(&star(), 0, 1e-10).unwrap();
        for x in 1..4 {
            assert!((s.pf_vector[x] - 1.0 / 3f64.sqrt()).abs() < 1e-10);
        }
        let s = pf_vector(&star(), 1, 1e-10).unwrap();
        assert!((s.pf_vector[0] - 3f64.sqrt()).abs() < 1e-9);
        assert!((s.pf_vector[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_vertex() {
        let m = CsrMatrix::zeros(1);
        assert_eq!(extremal_eig(&m, 1e-10).unwrap().0, 0.0);
        let s = resolvent_solve(&m, 2.0, &[1.0], 1e-12).unwrap();
        assert_eq!(s.x, vec![0.5]);
    }

    #[test]
    fn tree_route_agrees_with_cg() {
        let a = TreeBall::build(3, 6).unwrap().adjacency().clone();
        let n = a.dim();
        let b: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64 - 1.0).collect();
        let lambda = 3.0;
        let exact = resolvent_solve(&a, lambda, &b, 1e-12).unwrap();
        assert!(exact.residual < 1e-13);
        let diag = vec![lambda; n];
        let apply = |x: &[f64], y: &mut [f64]| {
            a.matvec(x, y);
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi = lambda * xi - *yi;
            }
        };
        let cg = conjugate_gradient(apply, &diag, &b, 1e-13, 100_000).unwrap();
        for (x, y) in exact.x.iter().zip(&cg.x) {
            assert!((x - y).abs() < 1e-9);
        }
        assert!(matches!(resolvent_solve(&a, 2.0, &b, 1e-12), Err(Error::Indefinite(_))));
    }

    #[test]
    fn small_spectra() {
        let s = full_spectrum(&star(), 4096).unwrap();
        let r3 = 3f64.sqrt();
        for (a, b) in s.iter().zip([-r3, 0.0, 0.0, r3]) {
            assert!((a - b).abs() < 1e-12);
        }
        let p2 = CsrMatrix::from_triplets(2, vec![(0, 1, 1.0), (1, 0, 1.0)]);
        let s = full_spectrum(&p2, 4096).unwrap();
        assert!((s[0] + 1.0).abs() < 1e-12 && (s[1] - 1.0).abs() < 1e-12);
        let s = full_spectrum(TreeBall::build(3, 2).unwrap().adjacency(), 4096).unwrap();
        assert!((s[9] - 5f64.sqrt()).abs() < 1e-12);
        assert!((s[0] + 5f64.sqrt()).abs() < 1e-12);
        assert!(matches!(
            full_spectrum(TreeBall::build(3, 12).unwrap().adjacency(), 4096),
            Err(Error::DenseLimit { .. })
        ));
    }

    #[test]
    fn ball_norm_increases_below_tree_norm() {
        let mut last = 0.0;
        for n in 1..=8 {
            let (l, _) = extremal_eig(TreeBall::build(3, n).unwrap().adjacency(), 1e-11).unwrap();
            assert!(l > last && l < 8f64.sqrt());
            last = l;
        }
    }

    #[test]
    fn dense_and_tree_routes_agree_on_perturbed_ball() {
        let m = perturb(TreeBall::build(3, 5).unwrap(), ModelKind::Ray, PerturbationMode::DiagonalUnit).unwrap();
        let tree = full_spectrum(m.adjacency(), 4096).unwrap();
        let dense = dense::eigenvalues(&m.adjacency().to_dense()).unwrap();
        for (a, b) in tree.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn bessel_values() {
        let j = bessel_j_sequence(1.0);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-15);
        let j = bessel_j_sequence(-1.0);
        assert!((j[1] + 0.440_050_585_744_933_5).abs() < 1e-15);
        let j = bessel_j_sequence(40.0);
        assert!((j[0] - 0.007_366_890_584_237_291).abs() < 1e-13);
        assert!((j[1] - 0.126_038_318_037_584_97).abs() < 1e-13);
    }

    #[test]
    fn evolve_identity_and_unitarity() {
        let a = TreeBall::build(3, 4).unwrap().adjacency().clone();
        let n = a.dim();
        let mut u = vec![Complex64::new(0.0, 0.0); n];
        u[0] = Complex64::new(1.0, 0.0);
        u[5] = Complex64::new(0.0, 0.5);
        assert_eq!(evolve(&a, 3.0, 0.0, &u, 1000).unwrap(), u);
        let norm = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for t in [0.3, 1.0, -4.0, 10.0] {
            let w = evolve(&a, 3.0, t, &u, 1000).unwrap();
            assert!((norm(&w) - norm(&u)).abs() < 1e-10);
        }
        assert!(matches!(evolve(&a, 3.0, 1000.0, &u, 50), Err(Error::DegreeCap { .. })));
    }

    #[test]
    fn chebyshev_filter_matches_spectral_function() {
        let a = star();
        let c = chebyshev_coefficients(|x: f64| (-x).exp(), -2.0, 2.0, 64, 1e-16);
        let mut u = vec![0.0; 4];
        u[0] = 1.0;
        let y = chebyshev_apply(&a, -2.0, 2.0, &c, &u);
        // <d0, e^{-A} d0> = cosh(sqrt 3).
        assert!((y[0] - 3f64.sqrt().cosh()).abs() < 1e-13);
        let q = lanczos_quadrature(&a, &u, 4, |x| (-x).exp()).unwrap();
        assert!((q - 3f64.sqrt().cosh()).abs() < 1e-13);
    }

    fn random_tree() -> impl Strategy<Value = CsrMatrix> {
        (2usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.0f64..1.0, n - 1),
                proptest::collection::vec(0.5f64..2.0, n - 1),
                proptest::collection::vec(-1.0f64..1.0, n),
            )
                .prop_map(move |(p, w, d)| {
                    let mut t = Vec::new();
                    for i in 1..n {
                        let parent = ((p[i - 1] * i as f64) as usize).min(i - 1);
                        t.push((i, parent, w[i - 1]));
                        t.push((parent, i, w[i - 1]));
                    }
                    for (i, di) in d.iter().enumerate() {
                        t.push((i, i, (di * 4.0).round() / 4.0));
                    }
                    CsrMatrix::from_triplets(n, t)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn tree_sturm_matches_dense(m in random_tree()) {
            let s = full_spectrum(&m, 4096).unwrap();
            let d = dense::eigenvalues(&m.to_dense()).unwrap();
            prop_assert_eq!(s.len(), d.len());
            for (a, b) in s.iter().zip(&d) {
                prop_assert!((a - b).abs() < 1e-10 * m.gershgorin_radius().max(1.0));
            }
            let tr: f64 = s.iter().sum();
            let tr2: f64 = s.iter().map(|v| v * v).sum();
            prop_assert!((tr - m.trace()).abs() < 1e-8 * (1.0 + m.trace().abs()));
            prop_assert!((tr2 - m.frobenius_sq()).abs() < 1e-8 * m.frobenius_sq());
        }

        #[test]
        fn resolvent_solve_recovers_rhs(m in random_tree(), shift in 0.1f64..3.0) {
            let lambda = m.gershgorin_radius() + shift;
            let b: Vec<f64> = (0..m.dim()).map(|i| (i as f64).sin() + 1.5).collect();
            let s = resolvent_solve(&m, lambda, &b, 1e-12).unwrap();
            let mut y = vec![0.0; m.dim()];
            m.matvec(&s.x, &mut y);
            for i in 0..m.dim() {
                prop_assert!((lambda * s.x[i] - y[i] - b[i]).abs() < 1e-9 * norm2(&b));
            }
        }

        #[test]
        fn evolve_group_law(t1 in -5.0f64..5.0, t2 in -5.0f64..5.0) {
            let a = TreeBall::build(3, 3).unwrap().adjacency().clone();
            let n = a.dim();
            let u: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64).cos(), 0.3)).collect();
            let two = evolve(&a, 2.5, t1, &evolve(&a, 2.5, t2, &u, 10_000).unwrap(), 10_000).unwrap();
            let one = evolve(&a, 2.5, t1 + t2, &u, 10_000).unwrap();
            for (x, y) in two.iter().zip(&one) {
                prop_assert!((x - y).norm() < 1e-7);
            }
        }
    }
}
