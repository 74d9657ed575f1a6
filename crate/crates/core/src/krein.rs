//! Analytic kernels of the homogeneous tree and the secular problem that
//! locates the norm of the perturbed graph.
//!
//! For `|lambda| > 2 sqrt(Q-1)` the resolvent of the tree adjacency has entries
//! `a(lambda)^d / mu(lambda)`, where `d` is the tree distance. The perturbation
//! `A_Y = A + P_S` then has resolvent
//! `R_Y = R_A + R_A P (1 - S)^{-1} P R_A` with the secular kernel
//! `S(lambda) = P R_A(lambda) P` on the base `S`.

use num_complex::Complex64;

use crate::csr::{dot, SymmetricOperator};
use crate::dense;
use crate::error::{Error, Result};
use crate::graph::{BaseDistance, ModelKind, PerturbedModel, NO_PARENT};
use crate::spectral::{lanczos_top, LanczosOptions};

/// Bases larger than this use the tree convolution instead of dense matrices.
pub const DEFAULT_KERNEL_DENSE_LIMIT: usize = 4096;

/// Edge `2 sqrt(Q-1)` of the tree spectrum.
pub fn branch_point(q: usize) -> f64 {
    2.0 * ((q - 1) as f64).sqrt()
}

/// The pair `(a(lambda), mu(lambda))` for real `|lambda| >= 2 sqrt(Q-1)`.
///
/// Evaluated in the cancellation-free form `a = 2 / (lambda (1 + s))`,
/// `mu = lambda (Q - 2 + Q s) / (2 (Q-1))` with `s = sqrt(1 - 4(Q-1)/lambda^2)`.
pub fn a_mu(lambda: f64, q: usize) -> Result<(f64, f64)> {
    if q < 2 {
        return Err(Error::Domain(format!("vertex degree {q} < 2")));
    }
    let b = (q - 1) as f64;
    if !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda = {lambda}")));
    }
    let disc = 1.0 - 4.0 * b / (lambda * lambda);
    if !(disc >= -1e-14) {
        return Err(Error::Domain(format!(
            "lambda = {lambda} lies on the cut [-{0}, {0}]",
            branch_point(q)
        )));
    }
    let s = disc.max(0.0).sqrt();
    let a = 2.0 / (lambda * (1.0 + s));
    let mu = lambda * ((q as f64 - 2.0) + q as f64 * s) / (2.0 * b);
    Ok((a, mu))
}

/// Analytic continuation of `(a, mu)` off the cut. The principal square root is
/// taken in the closed upper half-plane and reflected, so conjugation symmetry
/// holds exactly.
pub fn a_mu_complex(z: Complex64, q: usize) -> Result<(Complex64, Complex64)> {
    if q < 2 {
        return Err(Error::Domain(format!("vertex degree {q} < 2")));
    }
    let bp = branch_point(q);
    if z.im == 0.0 && z.re.abs() < bp {
        return Err(Error::Domain(format!("z = {z} lies on the cut")));
    }
    if z.im < 0.0 {
        let (a, mu) = a_mu_complex(z.conj(), q)?;
        return Ok((a.conj(), mu.conj()));
    }
    let b = (q - 1) as f64;
    let s = (Complex64::new(1.0, 0.0) - 4.0 * b / (z * z)).sqrt();
    let a = 2.0 / (z * (1.0 + s));
    let mu = z * ((q as f64 - 2.0) + q as f64 * s) / (2.0 * b);
    Ok((a, mu))
}

/// Resolvent entry `a^d / mu` of the tree adjacency at tree distance `d`.
pub fn green_entry(q: usize, lambda: f64, d: usize) -> Result<f64> {
    let (a, mu) = a_mu(lambda, q)?;
    Ok(a.powi(d as i32) / mu)
}

/// Degree `Q`, its branching number and the kernel evaluations bound to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelContext {
    q: usize,
}

impl KernelContext {
    pub fn new(q: usize) -> Result<Self> {
        if q < 2 {
            return Err(Error::Domain(format!("vertex degree {q} < 2")));
        }
        Ok(KernelContext { q })
    }

    pub fn degree(&self) -> usize {
        self.q
    }

    pub fn branching(&self) -> usize {
        self.q - 1
    }

    pub fn branch_point(&self) -> f64 {
        branch_point(self.q)
    }

    pub fn a_mu(&self, lambda: f64) -> Result<(f64, f64)> {
        a_mu(lambda, self.q)
    }

    pub fn a_mu_complex(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        a_mu_complex(z, self.q)
    }

    pub fn green_entry(&self, lambda: f64, d: usize) -> Result<f64> {
        green_entry(self.q, lambda, d)
    }
}

/// Rooted tree of base sites, numbered breadth-first with parents first.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseGeometry {
    parent: Vec<usize>,
    depth: Vec<usize>,
    child_start: Vec<usize>,
    children: Vec<usize>,
}

impl BaseGeometry {
    /// Builds from a parent array where every parent precedes its children.
    pub fn from_parents(parent: Vec<usize>) -> Result<Self> {
        let n = parent.len();
        if n == 0 {
            return Err(Error::InvalidModel("empty base".into()));
        }
        if parent[0] != NO_PARENT {
            return Err(Error::InvalidModel("site 0 must be the root".into()));
        }
        let mut depth = vec![0usize; n];
        let mut count = vec![0usize; n + 1];
        for x in 1..n {
            let p = parent[x];
            if p >= x {
                return Err(Error::InvalidModel(format!("site {x} has parent {p} that does not precede it")));
            }
            depth[x] = depth[p] + 1;
            count[p + 1] += 1;
        }
        for i in 0..n {
            count[i + 1] += count[i];
        }
        let mut fill = count.clone();
        let mut children = vec![0usize; n.saturating_sub(1)];
        for x in 1..n {
            let p = parent[x];
            children[fill[p]] = x;
            fill[p] += 1;
        }
        Ok(BaseGeometry { parent, depth, child_start: count, children })
    }

    /// Geodesic ray with `len` sites starting at the root.
    pub fn ray(len: usize) -> Self {
        let parent = (0..len.max(1)).map(|x| if x == 0 { NO_PARENT } else { x - 1 }).collect();
        Self::from_parents(parent).expect("ray parents are valid")
    }

    /// Radius-`radius` ball of the degree-`q` tree; `q = 2` gives a segment of
    /// `2 radius + 1` sites centred at the root.
    pub fn regular_ball(q: usize, radius: usize) -> Self {
        let mut parent = vec![NO_PARENT];
        let mut start = 0;
        for _ in 0..radius {
            let end = parent.len();
            for x in start..end {
                let k = if x == 0 { q } else { q - 1 };
                parent.extend(std::iter::repeat_n(x, k));
            }
            start = end;
        }
        Self::from_parents(parent).expect("ball parents are valid")
    }

    /// Base of a built model, indexed in the order of `model.base()`.
    pub fn from_model(model: &PerturbedModel) -> Result<Self> {
        let base = model.base();
        if base.is_empty() {
            return Err(Error::InvalidModel("model has an empty base".into()));
        }
        let mut index = std::collections::HashMap::with_capacity(base.len());
        for (i, &x) in base.iter().enumerate() {
            index.insert(x, i);
        }
        let parent = base
            .iter()
            .map(|&x| match model.ball().parent(x) {
                None => Ok(NO_PARENT),
                Some(p) => index
                    .get(&p)
                    .copied()
                    .ok_or_else(|| Error::InvalidModel(format!("base vertex {x} has its parent outside the base"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parents(parent)
    }

    /// Truncation of the infinite base of `kind`: `level` sites for a ray,
    /// radius `level` for a subtree.
    pub fn for_kind(kind: ModelKind, level: usize) -> Result<Self> {
        match kind {
            ModelKind::Tree => Err(Error::InvalidModel("the unperturbed tree has no base".into())),
            ModelKind::Ray => Ok(Self::ray(level)),
            ModelKind::Subtree { q } => Ok(Self::regular_ball(q, level)),
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn depth(&self, x: usize) -> usize {
        self.depth[x]
    }

    pub fn parent(&self, x: usize) -> Option<usize> {
        (x != 0).then(|| self.parent[x])
    }

    pub fn children(&self, x: usize) -> &[usize] {
        &self.children[self.child_start[x]..self.child_start[x + 1]]
    }

    pub fn distance(&self, mut x: usize, mut y: usize) -> usize {
        let mut d = 0;
        while self.depth[x] > self.depth[y] {
            x = self.parent[x];
            d += 1;
        }
        while self.depth[y] > self.depth[x] {
            y = self.parent[y];
            d += 1;
        }
        while x != y {
            x = self.parent[x];
            y = self.parent[y];
            d += 2;
        }
        d
    }

    /// Distances from `src` to every site.
    pub fn distances_from(&self, src: usize) -> Vec<usize> {
        let n = self.len();
        let mut dist = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::with_capacity(n);
        dist[src] = 0;
        queue.push_back(src);
        while let Some(x) = queue.pop_front() {
            let next = dist[x] + 1;
            let up = self.parent(x).into_iter();
            for y in up.chain(self.children(x).iter().copied()) {
                if dist[y] == usize::MAX {
                    dist[y] = next;
                    queue.push_back(y);
                }
            }
        }
        dist
    }
}

/// `(1/mu) sum_y a^{d(x,y)} u(y)` in linear time by a leaf-to-root pass
/// followed by a root-to-leaf pass.
pub fn tree_convolve(geom: &BaseGeometry, a: f64, mu: f64, u: &[f64]) -> Vec<f64> {
    let n = geom.len();
    assert_eq!(u.len(), n);
    let mut down = u.to_vec();
    for x in (1..n).rev() {
        let p = geom.parent[x];
        down[p] += a * down[x];
    }
    let mut full = down.clone();
    for x in 1..n {
        let p = geom.parent[x];
        full[x] = down[x] + a * (full[p] - a * down[x]);
    }
    full.iter_mut().for_each(|v| *v /= mu);
    full
}

/// Dense kernel `[a^{d(x,y)} / mu]` on the base.
pub fn kernel_matrix(geom: &BaseGeometry, a: f64, mu: f64) -> faer::Mat<f64> {
    let n = geom.len();
    let mut m = faer::Mat::<f64>::zeros(n, n);
    let mut pow = vec![1.0 / mu];
    for i in 0..n {
        let d = geom.distances_from(i);
        for j in 0..n {
            while pow.len() <= d[j] {
                let last = *pow.last().unwrap();
                pow.push(last * a);
            }
            m[(i, j)] = pow[d[j]];
        }
    }
    m
}

struct KernelOperator<'a> {
    geom: &'a BaseGeometry,
    a: f64,
    mu: f64,
}

impl SymmetricOperator for KernelOperator<'_> {
    fn dim(&self) -> usize {
        self.geom.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&tree_convolve(self.geom, self.a, self.mu, x));
    }
}

/// The secular kernel `S(lambda)` on a finite base.
#[derive(Debug, Clone)]
pub struct SecularProblem {
    q: usize,
    geom: BaseGeometry,
    dense_limit: usize,
}

impl SecularProblem {
    pub fn new(q: usize, geom: BaseGeometry) -> Self {
        SecularProblem { q, geom, dense_limit: DEFAULT_KERNEL_DENSE_LIMIT }
    }

    pub fn with_dense_limit(mut self, limit: usize) -> Self {
        self.dense_limit = limit;
        self
    }

    pub fn degree(&self) -> usize {
        self.q
    }

    pub fn geometry(&self) -> &BaseGeometry {
        &self.geom
    }

    pub fn matrix_at(&self, lambda: f64) -> Result<faer::Mat<f64>> {
        let (a, mu) = a_mu(lambda, self.q)?;
        Ok(kernel_matrix(&self.geom, a, mu))
    }

    /// Norm of `S(lambda)`, equal to its top eigenvalue since the kernel is a
    /// compression of a positive definite resolvent.
    pub fn opnorm(&self, lambda: f64) -> Result<f64> {
        self.check_above_branch(lambda)?;
        let (a, mu) = a_mu(lambda, self.q)?;
        let n = self.geom.len();
        if n == 1 {
            return Ok(1.0 / mu);
        }
        if n <= self.dense_limit {
            let vals = dense::eigenvalues(&kernel_matrix(&self.geom, a, mu))?;
            return Ok(vals[n - 1]);
        }
        let op = KernelOperator { geom: &self.geom, a, mu };
        let opts = LanczosOptions { tol: 1e-12 / mu.min(1.0), ..Default::default() };
        Ok(lanczos_top(&op, &vec![1.0; n], opts)?.0)
    }

    fn check_above_branch(&self, lambda: f64) -> Result<()> {
        if lambda <= branch_point(self.q) {
            return Err(Error::Domain(format!(
                "lambda = {lambda} must exceed the branch point {}",
                branch_point(self.q)
            )));
        }
        Ok(())
    }

    /// Whether `||S(lambda)|| < 1`, decided exactly by the inertia of `1 - S`.
    fn below_one(&self, lambda: f64) -> Result<bool> {
        self.check_above_branch(lambda)?;
        let (a, mu) = a_mu(lambda, self.q)?;
        Ok(kernel_below_one(&self.geom, a, mu))
    }

    /// Largest `lambda` with `||S(lambda)|| = 1`, by bisection on the
    /// strictly decreasing norm.
    pub fn root(&self, tol: f64) -> Result<f64> {
        let bp = branch_point(self.q);
        let lo0 = bp * (1.0 + 1e-12) + 1e-15;
        if self.below_one(lo0)? {
            return Err(Error::NoCrossing(format!(
                "||S|| = {:.6} at the branch point with {} base sites",
                self.opnorm(lo0)?,
                self.geom.len()
            )));
        }
        let mut lo = lo0;
        let mut step = 1.0;
        let mut hi = lo + step;
        while !self.below_one(hi)? {
            lo = hi;
            step *= 2.0;
            hi = lo + step;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.below_one(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        let residual = (self.opnorm(root)? - 1.0).abs();
        if residual > tol {
            return Err(Error::NoConvergence { iterations: 200, residual });
        }
        Ok(root)
    }
}

/// Limit of `f(L) = c0 + c1 L^{-p1} + ... ` from the last `k + 1` samples,
/// with an error estimate from dropping the highest exponent.
pub fn richardson(levels: &[f64], values: &[f64], exponents: &[f64]) -> (f64, f64) {
    let fit = |k: usize| -> f64 {
        let m = k + 1;
        let ls = &levels[levels.len() - m..];
        let vs = &values[values.len() - m..];
        let mat = faer::Mat::from_fn(m, m, |i, j| if j == 0 { 1.0 } else { ls[i].powf(-exponents[j - 1]) });
        let rhs = faer::Mat::from_fn(m, 1, |i, _| vs[i]);
        let sol = faer::linalg::solvers::Solve::solve(&mat.partial_piv_lu(), &rhs);
        sol[(0, 0)]
    };
    let k = exponents.len().min(levels.len() - 1);
    let best = fit(k);
    let err = if k >= 1 { (best - fit(k - 1)).abs() } else { f64::NAN };
    (best, err)
}

/// Norm `||A_Y||` of the infinite model estimated from truncated secular roots.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ModelNorm {
    pub kind: ModelKind,
    pub degree: usize,
    pub lambda_star: f64,
    pub extrapolation_error: f64,
    /// `(truncation level, root)` pairs.
    pub per_level: Vec<(usize, f64)>,
    pub gap: f64,
    pub transient: Option<bool>,
}

impl ModelNorm {
    /// Default truncation levels: ray lengths or subtree radii.
    pub fn default_levels(kind: ModelKind) -> Vec<usize> {
        match kind {
            ModelKind::Tree => Vec::new(),
            ModelKind::Ray => vec![128, 256, 512],
            ModelKind::Subtree { q: 2 } => vec![64, 128, 256],
            ModelKind::Subtree { q } => {
                // Radii whose base stays below a few thousand sites.
                let mut r = 1;
                while crate::graph::ball_vertex_count(q, r + 1) <= 4096 {
                    r += 1;
                }
                vec![r.saturating_sub(2).max(1), r.saturating_sub(1).max(1), r]
            }
        }
    }

    pub fn estimate(kind: ModelKind, degree: usize, levels: &[usize], tol: f64) -> Result<Self> {
        if kind == ModelKind::Tree {
            return Ok(ModelNorm {
                kind,
                degree,
                lambda_star: branch_point(degree),
                extrapolation_error: 0.0,
                per_level: Vec::new(),
                gap: 0.0,
                transient: None,
            });
        }
        crate::graph::check_kind(degree, kind)?;
        if levels.is_empty() {
            return Err(Error::Precondition("no truncation levels".into()));
        }
        let mut per_level = Vec::with_capacity(levels.len());
        for &l in levels {
            let p = SecularProblem::new(degree, BaseGeometry::for_kind(kind, l)?);
            per_level.push((l, p.root(tol)?));
        }
        let ls: Vec<f64> = per_level.iter().map(|&(l, _)| l as f64).collect();
        let vs: Vec<f64> = per_level.iter().map(|&(_, v)| v).collect();
        let (lambda_star, extrapolation_error) = if vs.len() >= 3 {
            richardson(&ls, &vs, &[2.0, 3.0])
        } else {
            (*vs.last().unwrap(), f64::NAN)
        };
        Ok(ModelNorm {
            kind,
            degree,
            lambda_star,
            extrapolation_error,
            per_level,
            gap: lambda_star - branch_point(degree),
            transient: None,
        })
    }
}

/// Closed-form norm for a ray or a line base: the largest `lambda` where the
/// half-line symbol `(1 + a) / ((1 - a) mu)` reaches 1. Solving gives
/// `a^2 - 3a + 1 = 0`, independent of `Q`; `None` when that root falls below
/// the branch point.
pub fn symbol_lambda_star(degree: usize) -> Option<f64> {
    let a = (3.0 - 5f64.sqrt()) / 2.0;
    let b = (degree - 1) as f64;
    (a * b.sqrt() < 1.0).then(|| b * a + 1.0 / a)
}

/// Supremum `(1 + a) / ((1 - a) mu)` of the ray kernel symbol.
pub fn ray_symbol_norm(degree: usize, lambda: f64) -> Result<f64> {
    let (a, mu) = a_mu(lambda, degree)?;
    Ok((1.0 + a) / ((1.0 - a) * mu))
}

/// A point of the infinite graph: its anchor on the base and its distance to it.
/// Two off-base points sharing an anchor are taken to lie on one branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Site {
    pub anchor: usize,
    pub offset: usize,
}

impl Site {
    pub fn on_base(anchor: usize) -> Self {
        Site { anchor, offset: 0 }
    }

    /// The site of a ball vertex, with anchor indexed like `model.base()`.
    pub fn of_vertex(model: &PerturbedModel, x: usize) -> Option<Self> {
        let BaseDistance { dist, anchor } = model.base_distance(x)?;
        let idx = model.base().binary_search(&anchor).ok()?;
        Some(Site { anchor: idx, offset: dist })
    }
}

/// Resolvent of the infinite perturbed graph through the Krein formula, with
/// `(1 - S)^{-1}` taken on a truncated base.
#[derive(Debug, Clone)]
pub struct KreinResolvent {
    q: usize,
    geom: Option<BaseGeometry>,
    dense_limit: usize,
}

/// Bases above this size are solved with conjugate gradients on the tree convolution.
const KREIN_DENSE_LIMIT: usize = 512;

impl KreinResolvent {
    pub fn new(q: usize, kind: ModelKind, level: usize) -> Result<Self> {
        let geom = match kind {
            ModelKind::Tree => None,
            _ => Some(BaseGeometry::for_kind(kind, level)?),
        };
        Ok(KreinResolvent { q, geom, dense_limit: KREIN_DENSE_LIMIT })
    }

    pub fn from_geometry(q: usize, geom: Option<BaseGeometry>) -> Self {
        KreinResolvent { q, geom, dense_limit: KREIN_DENSE_LIMIT }
    }

    pub fn base_len(&self) -> usize {
        self.geom.as_ref().map_or(0, BaseGeometry::len)
    }

    fn site_distance(&self, x: Site, y: Site) -> usize {
        if x.anchor == y.anchor {
            return x.offset.abs_diff(y.offset);
        }
        let g = self.geom.as_ref().expect("anchors refer to a base");
        x.offset + g.distance(x.anchor, y.anchor) + y.offset
    }

    /// `<R_Y(lambda) delta_x, delta_y>`.
    pub fn entry(&self, lambda: f64, x: Site, y: Site) -> Result<f64> {
        let (a, mu) = a_mu(lambda, self.q)?;
        if lambda <= branch_point(self.q) {
            return Err(Error::Domain(format!("lambda = {lambda} is not above the branch point")));
        }
        let Some(geom) = &self.geom else {
            if x.anchor != 0 || y.anchor != 0 {
                return Err(Error::Precondition("no base: sites must be anchored at 0".into()));
            }
            return Ok(a.powi(x.offset.abs_diff(y.offset) as i32) / mu);
        };
        let n = geom.len();
        if x.anchor >= n || y.anchor >= n {
            return Err(Error::Precondition("site anchor outside the truncated base".into()));
        }
        let free = a.powi(self.site_distance(x, y) as i32) / mu;
        let mut ex = vec![0.0; n];
        ex[x.anchor] = 1.0;
        let gx = tree_convolve(geom, a, mu, &ex);
        let gy = if x.anchor == y.anchor {
            gx.clone()
        } else {
            let mut ey = vec![0.0; n];
            ey[y.anchor] = 1.0;
            tree_convolve(geom, a, mu, &ey)
        };
        let z = self.solve_one_minus_s(geom, a, mu, &gy)?;
        let corr = a.powi((x.offset + y.offset) as i32) * dot(&gx, &z);
        Ok(free + corr)
    }

    fn solve_one_minus_s(&self, geom: &BaseGeometry, a: f64, mu: f64, b: &[f64]) -> Result<Vec<f64>> {
        match kernel_shifted_solve(geom, a, mu, b) {
            Some(z) => Ok(z),
            None => {
                let n = geom.len();
                let top = if n <= self.dense_limit {
                    dense::eigenvalues(&kernel_matrix(geom, a, mu))?[n - 1]
                } else {
                    let op = KernelOperator { geom, a, mu };
                    lanczos_top(&op, &vec![1.0; n], LanczosOptions::default()).map_or(f64::NAN, |r| r.0)
                };
                Err(Error::NearSingular(1.0 - top))
            }
        }
    }
}

/// Pivots of `T - I/mu` eliminated leaves first, where `T` is the inverse of
/// the kernel `K = (a^{d(x,y)})` on a tree: `T` has the tree's own sparsity,
/// with `(1 + a^2 (deg - 1)) / (1 - a^2)` on the diagonal and `-a / (1 - a^2)`
/// on edges. Since `1 - K/mu = K (T - I/mu)` with commuting factors, both
/// sides have the same inertia.
fn shifted_inverse_pivots(geom: &BaseGeometry, a: f64, mu: f64, rhs: Option<&mut [f64]>) -> Vec<f64> {
    let n = geom.len();
    let s = 1.0 - a * a;
    let edge = a / s;
    let mut d: Vec<f64> = (0..n)
        .map(|x| {
            let deg = geom.children(x).len() + usize::from(x != 0);
            1.0 + a * a * deg as f64 / s - 1.0 / mu
        })
        .collect();
    let mut rhs = rhs;
    for x in (1..n).rev() {
        let p = geom.parent[x];
        let f = edge / d[x];
        d[p] -= edge * f;
        if let Some(r) = rhs.as_deref_mut() {
            r[p] += f * r[x];
        }
    }
    d
}

/// Whether `1 - S` is positive definite, from the signs of the tree pivots.
fn kernel_below_one(geom: &BaseGeometry, a: f64, mu: f64) -> bool {
    shifted_inverse_pivots(geom, a, mu, None).iter().all(|&p| p > 0.0)
}

/// Solves `(1 - S) z = b` exactly in `O(n)` through `(T - I/mu) z = T b`;
/// `None` when `1 - S` is not positive definite.
fn kernel_shifted_solve(geom: &BaseGeometry, a: f64, mu: f64, b: &[f64]) -> Option<Vec<f64>> {
    let n = geom.len();
    let s = 1.0 - a * a;
    let edge = a / s;
    // r = T b.
    let mut r: Vec<f64> = (0..n)
        .map(|x| {
            let deg = geom.children(x).len() + usize::from(x != 0);
            let mut v = (1.0 + a * a * deg as f64 / s) * b[x];
            if x != 0 {
                v -= edge * b[geom.parent[x]];
            }
            for &c in geom.children(x) {
                v -= edge * b[c];
            }
            v
        })
        .collect();
    let d = shifted_inverse_pivots(geom, a, mu, Some(&mut r));
    if !d.iter().all(|&p| p > 0.0) {
        return None;
    }
    let mut z = vec![0.0; n];
    z[0] = r[0] / d[0];
    for x in 1..n {
        z[x] = (r[x] + edge * z[geom.parent[x]]) / d[x];
    }
    Some(z)
}

/// Limit of a Krein entry over truncation levels, assuming `c0 + c1/N + c2/N^2`.
pub fn krein_limit_entry(
    q: usize,
    kind: ModelKind,
    levels: &[usize],
    lambda: f64,
    x: Site,
    y: Site,
) -> Result<(f64, f64, Vec<(usize, f64)>)> {
    let mut table = Vec::with_capacity(levels.len());
    for &l in levels {
        let r = KreinResolvent::new(q, kind, l)?;
        table.push((r.base_len(), r.entry(lambda, x, y)?));
    }
    if kind == ModelKind::Tree || table.len() < 3 {
        let v = table.last().map_or(f64::NAN, |t| t.1);
        return Ok((v, 0.0, table));
    }
    let ls: Vec<f64> = table.iter().map(|t| t.0 as f64).collect();
    let vs: Vec<f64> = table.iter().map(|t| t.1).collect();
    let (v, err) = richardson(&ls, &vs, &[1.0, 2.0]);
    Ok((v, err, table))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Transience {
    Recurrent,
    Transient,
    Inconclusive,
}

impl std::fmt::Display for Transience {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Transience::Recurrent => "Recurrent",
            Transience::Transient => "Transient",
            Transience::Inconclusive => "Inconclusive",
        };
        f.write_str(s)
    }
}

/// Thresholds for [`classify_transience`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TransienceOptions {
    pub levels: usize,
    pub cauchy_gap: f64,
    pub growth_ratio: f64,
}

impl Default for TransienceOptions {
    fn default() -> Self {
        TransienceOptions { levels: 20, cauchy_gap: 1e-3, growth_ratio: 1.1 }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct TransienceReport {
    pub verdict: Transience,
    /// `(j, lambda_j, g_j)` with `lambda_j = lambda* + 2^{-j}`.
    pub probes: Vec<(usize, f64, f64)>,
}

/// Default truncation for probing near `lambda*`: long enough that the base
/// correlation length at the last probe stays well inside it.
pub fn probe_truncation(kind: ModelKind) -> usize {
    match kind {
        ModelKind::Tree => 0,
        ModelKind::Ray => 16_384,
        ModelKind::Subtree { q: 2 } => 8_192,
        ModelKind::Subtree { q } => {
            let mut r = 1;
            while crate::graph::ball_vertex_count(q, r + 1) <= 20_000 {
                r += 1;
            }
            r
        }
    }
}

/// Diagonal resolvent probes `g_j` at `lambda* + 2^{-j}`; bounded Cauchy
/// sequences mean transient, sustained geometric growth means recurrent.
pub fn classify_transience(
    resolvent: &KreinResolvent,
    lambda_star: f64,
    site: Site,
    opts: TransienceOptions,
) -> Result<TransienceReport> {
    let probes = (1..=opts.levels)
        .map(|j| {
            let l = lambda_star + 0.5f64.powi(j as i32);
            resolvent.entry(l, site, site).map(|g| (j, l, g))
        })
        .collect::<Result<Vec<_>>>()?;
    let verdict = verdict_from(&probes, opts);
    Ok(TransienceReport { verdict, probes })
}

fn verdict_from(probes: &[(usize, f64, f64)], opts: TransienceOptions) -> Transience {
    let n = probes.len();
    if n < 4 {
        return Transience::Inconclusive;
    }
    let g: Vec<f64> = probes.iter().map(|p| p.2).collect();
    if !g.iter().all(|v| v.is_finite()) {
        return Transience::Recurrent;
    }
    if (g[n - 1] - g[n - 2]).abs() < opts.cauchy_gap * g[n - 1].abs() {
        return Transience::Transient;
    }
    let growing = (n - 3..n).all(|i| g[i] >= opts.growth_ratio * g[i - 1]);
    if growing {
        Transience::Recurrent
    } else {
        Transience::Inconclusive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CircleMax {
    pub max_ratio: f64,
    pub argmax_angle: f64,
}

/// Scans `|a(z) / mu(z)|` over `|z| = r`. Ties within rounding go to the
/// angle of smallest magnitude.
pub fn circle_max(q: usize, r: f64, samples: usize) -> Result<CircleMax> {
    if r <= branch_point(q) {
        return Err(Error::Domain(format!("radius {r} must exceed the branch point")));
    }
    let ratios = (0..samples)
        .map(|k| {
            let mut th = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
            if th > std::f64::consts::PI {
                th -= 2.0 * std::f64::consts::PI;
            }
            let (a, mu) = a_mu_complex(Complex64::from_polar(r, th), q)?;
            Ok((th, (a / mu).norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    let max = ratios.iter().fold(0.0f64, |m, p| m.max(p.1));
    let (argmax, _) = ratios
        .iter()
        .filter(|p| p.1 >= max * (1.0 - 1e-13))
        .min_by(|x, y| x.0.abs().total_cmp(&y.0.abs()))
        .copied()
        .expect("samples is positive");
    Ok(CircleMax { max_ratio: max, argmax_angle: argmax })
}

/// Smallest `lambda* + 0.01 k` where `||S|| <= 1/5`.
pub fn neumann_radius(problem: &SecularProblem, lambda_star: f64) -> Result<f64> {
    for k in 0..1_000_000 {
        let r = lambda_star + 0.01 * k as f64;
        if r <= branch_point(problem.degree()) {
            continue;
        }
        if problem.opnorm(r)? <= 0.2 {
            return Ok(r);
        }
    }
    Err(Error::NoConvergence { iterations: 1_000_000, residual: f64::NAN })
}
