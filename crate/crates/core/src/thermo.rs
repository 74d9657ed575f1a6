//! Ideal Bose gas on finite volumes and its infinite-volume limits.
//!
//! Energies follow the hopping convention `H = lambda* I - A`, so the
//! one-particle ground state of the infinite graph sits at zero.

use crate::csr::{CsrMatrix, SymmetricOperator};
use crate::dense;
use crate::error::{Error, Result};
use crate::graph::{ModelKind, PerturbedModel};
use crate::ids::{phi_series, Bounded};
use crate::krein::{krein_limit_entry, richardson, ModelNorm, Site, Transience};
use crate::pf::PfWeight;
use crate::spectral::{chebyshev_apply, chebyshev_coefficients, lanczos_quadrature, resolvent_solve};

/// Bose occupation `b(x) = 1 / (e^x - 1)`; infinite at zero.
pub fn bose(x: f64) -> f64 {
    1.0 / x.exp_m1()
}

/// Regular part `f(x) = b(x) - 1/x`, continued by `f(0) = -1/2`.
pub fn bose_regular(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        -0.5 + x / 12.0 - x * x2 / 720.0 + x * x2 * x2 / 30240.0
    } else {
        1.0 / x.exp_m1() - 1.0 / x
    }
}

/// The pair `(b(x), f(x))` for `x >= 0`.
pub fn bose_split(x: f64) -> Result<(f64, f64)> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("occupation argument {x} is negative")));
    }
    Ok((bose(x), bose_regular(x)))
}

fn check_below(energies: &[f64], mu: f64) -> Result<()> {
    let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    if !(mu < min) {
        return Err(Error::Precondition(format!("chemical potential {mu} is not below the spectrum minimum {min}")));
    }
    Ok(())
}

/// `(1/N) sum_k b(beta (h_k - mu))`.
pub fn finite_density(energies: &[f64], beta: f64, mu: f64) -> Result<f64> {
    if energies.is_empty() {
        return Err(Error::Precondition("empty spectrum".into()));
    }
    check_below(energies, mu)?;
    Ok(energies.iter().map(|h| bose(beta * (h - mu))).sum::<f64>() / energies.len() as f64)
}

/// The unique `mu` below the spectrum with `finite_density(mu) = rho`.
pub fn solve_chemical(energies: &[f64], beta: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("density {rho} must be positive")));
    }
    if energies.is_empty() {
        return Err(Error::Precondition("empty spectrum".into()));
    }
    let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = min;
    let mut step = 1.0;
    let mut lo = min - step;
    while finite_density(energies, beta, lo)? > rho {
        hi = lo;
        step *= 2.0;
        lo = min - step;
        if step > 1e300 {
            return Err(Error::NoConvergence { iterations: 0, residual: rho });
        }
    }
    let mut mid = lo;
    for _ in 0..400 {
        mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let d = finite_density(energies, beta, mid)?;
        if (d - rho).abs() <= 1e-12 * rho {
            return Ok(mid);
        }
        if d < rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let d = finite_density(energies, beta, mid)?;
    if (d - rho).abs() <= 1e-10 * rho {
        Ok(mid)
    } else {
        Err(Error::NoConvergence { iterations: 400, residual: (d - rho).abs() / rho })
    }
}

/// A density estimate with its route and error bar.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CriticalDensity {
    pub value: f64,
    pub error_bar: f64,
    pub route: &'static str,
    /// Route-specific intermediate values: `(level, value)`.
    pub table: Vec<(f64, f64)>,
}

/// `rho_c = sum_j Phi(j beta) e^{-j beta E_m}` with geometric tail bounds.
pub fn critical_density_series(degree: usize, beta: f64, em: f64, kmax: usize, cap: f64) -> Result<CriticalDensity> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("beta = {beta}")));
    }
    let mut sum = 0.0;
    let mut table = Vec::new();
    let mut phi_tail = 0.0;
    let mut j = 0usize;
    loop {
        j += 1;
        let Bounded { value, tail } = phi_series(degree, j as f64 * beta, kmax)?;
        let w = (-(j as f64) * beta * em).exp();
        sum += value * w;
        phi_tail += tail * w;
        table.push((j as f64, sum));
        if em > 0.0 {
            let rest = (-(j as f64 + 1.0) * beta * em).exp() / (1.0 - (-beta * em).exp());
            if rest < 1e-13 * sum {
                return Ok(CriticalDensity { value: sum, error_bar: rest + phi_tail, route: "series", table });
            }
        } else if value * w < 1e-14 * sum {
            return Ok(CriticalDensity { value: sum, error_bar: phi_tail, route: "series", table });
        }
        if sum > cap || j > 1_000_000 {
            return Err(Error::Precondition(format!("series for the critical density diverges (partial sum {sum:.3e} after {j} terms)")));
        }
    }
}

/// Trapezoidal mollifier: 0 up to `eps/2`, linear up to `eps`, then 1.
pub fn mollifier(eps: f64, h: f64) -> f64 {
    if h <= 0.5 * eps {
        0.0
    } else if h >= eps {
        1.0
    } else {
        (h - 0.5 * eps) / (0.5 * eps)
    }
}

/// `(1/N) sum_k F_eps(h_k) b(beta (h_k - mu))`.
pub fn mollified_density(energies: &[f64], beta: f64, mu: f64, eps: f64) -> Result<f64> {
    let mut s = 0.0;
    for &h in energies {
        let w = mollifier(eps, h);
        if w > 0.0 {
            if h <= mu {
                return Err(Error::Precondition(format!("mollified level {h} not above mu = {mu}")));
            }
            s += w * bose(beta * (h - mu));
        }
    }
    Ok(s / energies.len() as f64)
}

/// Mollified route over `(n, energies)` per volume. Finite-size excess comes
/// from `O(n)` boundary-bound states, so each width is extrapolated linearly in
/// `1/|V_n|`; the widths are then extrapolated linearly to `eps = 0`.
pub fn critical_density_mollified(
    volumes: &[(usize, Vec<f64>)],
    beta: f64,
    mu: f64,
    em: f64,
    fractions: &[f64],
) -> Result<CriticalDensity> {
    if !(em > 0.0) {
        return Err(Error::Precondition("mollified route needs a positive gap".into()));
    }
    if volumes.len() < 2 || fractions.len() < 2 {
        return Err(Error::Precondition("need at least two volumes and two widths".into()));
    }
    let sizes: Vec<f64> = volumes.iter().map(|(_, h)| h.len() as f64).collect();
    let mut per_eps = Vec::with_capacity(fractions.len());
    let mut n_err: f64 = 0.0;
    for &fr in fractions {
        let eps = fr * em;
        let vals = volumes
            .iter()
            .map(|(_, h)| mollified_density(h, beta, mu, eps))
            .collect::<Result<Vec<_>>>()?;
        let (lim, _) = richardson(&sizes, &vals, &[1.0]);
        n_err = n_err.max((lim - vals[vals.len() - 1]).abs());
        per_eps.push((eps, lim));
    }
    per_eps.sort_by(|x, y| y.0.total_cmp(&x.0));
    let ls: Vec<f64> = per_eps.iter().map(|(e, _)| 1.0 / e).collect();
    let vs: Vec<f64> = per_eps.iter().map(|(_, v)| *v).collect();
    let (value, _) = richardson(&ls, &vs, &[1.0]);
    let eps_err = (value - vs[vs.len() - 1]).abs();
    Ok(CriticalDensity { value, error_bar: n_err + eps_err, route: "mollified", table: per_eps })
}

/// Finite-volume two-point function `<(e^{beta(H - mu)} - 1)^{-1} u, w>` with
/// `H = reference I - A`.
pub struct GibbsState<'a> {
    adjacency: &'a CsrMatrix,
    reference: f64,
    beta: f64,
    mu: f64,
    dense: Option<(Vec<f64>, faer::Mat<f64>)>,
    cheb: Option<(f64, f64, Vec<f64>)>,
}

impl<'a> GibbsState<'a> {
    /// `lambda_max` is the top eigenvalue of `adjacency`; `mu` must lie below
    /// `reference - lambda_max`.
    pub fn new(
        adjacency: &'a CsrMatrix,
        reference: f64,
        lambda_max: f64,
        beta: f64,
        mu: f64,
        dense_limit: usize,
    ) -> Result<Self> {
        if !(mu < reference - lambda_max) {
            return Err(Error::Precondition(format!(
                "mu = {mu} is not below the ground energy {}",
                reference - lambda_max
            )));
        }
        if !(beta > 0.0) {
            return Err(Error::Domain(format!("beta = {beta}")));
        }
        let n = adjacency.dim();
        let mut st = GibbsState { adjacency, reference, beta, mu, dense: None, cheb: None };
        if n <= dense_limit {
            st.dense = Some(dense::eigen(&adjacency.to_dense())?);
        } else {
            // Bounded part f(beta (reference - mu - lambda)) as a Chebyshev series in A.
            let g = adjacency.gershgorin_radius();
            let (lo, hi) = (-g, g.max(lambda_max));
            let shift = reference - mu;
            let c = chebyshev_coefficients(|l| bose_regular(beta * (shift - l)), lo, hi, 512, 1e-16);
            st.cheb = Some((lo, hi, c));
        }
        Ok(st)
    }

    /// `G u` for the Gibbs kernel `G = (e^{beta(H - mu)} - 1)^{-1}`.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        if let Some((vals, vecs)) = &self.dense {
            let n = vals.len();
            let mut out = vec![0.0; n];
            for k in 0..n {
                let occ = bose(self.beta * (self.reference - vals[k] - self.mu));
                let c: f64 = (0..n).map(|i| vecs[(i, k)] * u[i]).sum::<f64>() * occ;
                for i in 0..n {
                    out[i] += c * vecs[(i, k)];
                }
            }
            return Ok(out);
        }
        let (lo, hi, c) = self.cheb.as_ref().expect("either route is prepared");
        let mut out = chebyshev_apply(self.adjacency, *lo, *hi, c, u);
        let r = resolvent_solve(self.adjacency, self.reference - self.mu, u, 1e-13)?;
        for (o, x) in out.iter_mut().zip(&r.x) {
            *o += x / self.beta;
        }
        Ok(out)
    }

    pub fn entry(&self, x: usize, y: usize) -> Result<f64> {
        let mut e = vec![0.0; self.adjacency.dim()];
        e[y] = 1.0;
        Ok(self.apply(&e)?[x])
    }

    /// `<G psi, psi>` for a complex vector given by its real and imaginary parts.
    pub fn quadratic_form(&self, re: &[f64], im: &[f64]) -> Result<f64> {
        let gr = self.apply(re)?;
        let gi = self.apply(im)?;
        Ok(crate::csr::dot(&gr, re) + crate::csr::dot(&gi, im))
    }
}

/// Chemical-potential rules.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "rule", content = "value")]
pub enum ScheduleRule {
    Fixed(f64),
    TargetDensity(f64),
    /// `1 / (|V_n| (lambda* - lambda_max - mu_n)) = c`.
    Fregg1(f64),
    /// `1 / (||v_n||^2 (lambda* - lambda_max - mu_n)) = D`.
    Fregg3(f64),
}

/// Per-volume data a schedule needs.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeData {
    pub kind: ModelKind,
    pub degree: usize,
    pub n: usize,
    pub volume: usize,
    pub lambda_max: f64,
    pub pf_norm_sq: f64,
    /// Energies of `lambda* I - A`, only needed for density targets.
    pub energies: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MuSchedule {
    pub rule: ScheduleRule,
    pub lambda_star: f64,
    /// `(n, mu_n)`.
    pub values: Vec<(usize, f64)>,
}

impl MuSchedule {
    /// `lambda_n = lambda* - mu_n`.
    pub fn lambda_n(&self, i: usize) -> f64 {
        self.lambda_star - self.values[i].1
    }
}

pub fn mu_schedule(norm: &ModelNorm, rule: ScheduleRule, beta: f64, data: &[VolumeData]) -> Result<MuSchedule> {
    let ls = norm.lambda_star;
    let mut values = Vec::with_capacity(data.len());
    for d in data {
        if d.kind != norm.kind || d.degree != norm.degree {
            return Err(Error::Stale(format!(
                "norm was estimated for {} with Q = {}, volume {} belongs to {} with Q = {}",
                norm.kind, norm.degree, d.n, d.kind, d.degree
            )));
        }
        let e0 = ls - d.lambda_max;
        let mu = match rule {
            ScheduleRule::Fixed(mu) => mu,
            ScheduleRule::TargetDensity(rho) => {
                let h = d
                    .energies
                    .as_ref()
                    .ok_or_else(|| Error::Precondition("density targets need the full spectrum".into()))?;
                solve_chemical(h, beta, rho)?
            }
            ScheduleRule::Fregg1(c) => {
                if !(c > 0.0) {
                    return Err(Error::Domain(format!("c = {c} must be positive")));
                }
                e0 - 1.0 / (c * d.volume as f64)
            }
            ScheduleRule::Fregg3(dd) => {
                if !(dd > 0.0) {
                    return Err(Error::Domain(format!("D = {dd} must be positive")));
                }
                e0 - 1.0 / (dd * d.pf_norm_sq)
            }
        };
        if !(mu < e0) {
            return Err(Error::Precondition(format!("mu_{} = {mu} is not below E_0 = {e0}", d.n)));
        }
        values.push((d.n, mu));
    }
    Ok(MuSchedule { rule, lambda_star: ls, values })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CondensateEstimate {
    /// `(eps, n, mass)`.
    pub table: Vec<(f64, usize, f64)>,
    pub n0: f64,
    pub volume_residual: f64,
    pub eps_residual: f64,
}

/// Low-energy mass `(1/N) sum (1 - F_eps(h)) b(beta (h - mu_n))` per `(eps, n)`,
/// extrapolated in `1/N` then in `eps`.
pub fn condensate_fraction(
    volumes: &[(usize, Vec<f64>)],
    mus: &[f64],
    beta: f64,
    epsilons: &[f64],
) -> Result<CondensateEstimate> {
    if volumes.len() < 2 || volumes.len() != mus.len() || epsilons.is_empty() {
        return Err(Error::Precondition("need matching volumes and chemical potentials".into()));
    }
    let mut table = Vec::new();
    let mut per_eps = Vec::new();
    let mut vres: f64 = 0.0;
    for &eps in epsilons {
        let mut ns = Vec::new();
        let mut ms = Vec::new();
        for ((n, h), &mu) in volumes.iter().zip(mus) {
            check_below(h, mu)?;
            let m = h
                .iter()
                .map(|&e| (1.0 - mollifier(eps, e)) * bose(beta * (e - mu)))
                .sum::<f64>()
                / h.len() as f64;
            table.push((eps, *n, m));
            ns.push(h.len() as f64);
            ms.push(m);
        }
        let (lim, _) = richardson(&ns, &ms, &[1.0]);
        vres = vres.max((lim - ms[ms.len() - 1]).abs());
        per_eps.push((eps, lim));
    }
    let (n0, eres) = if per_eps.len() >= 2 {
        let ls: Vec<f64> = per_eps.iter().map(|(e, _)| 1.0 / e).collect();
        let vs: Vec<f64> = per_eps.iter().map(|(_, v)| *v).collect();
        let (v, _) = richardson(&ls, &vs, &[1.0]);
        (v, (v - vs[vs.len() - 1]).abs())
    } else {
        (per_eps[0].1, f64::NAN)
    };
    Ok(CondensateEstimate { table, n0, volume_residual: vres, eps_residual: eres })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct OmegaD {
    pub value: f64,
    pub bounded_part: f64,
    pub bounded_error: f64,
    pub resolvent_part: f64,
    pub resolvent_error: f64,
    pub condensate_part: f64,
}

/// Numerical knobs for [`omega_d`].
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct OmegaOptions {
    pub quadrature_steps: usize,
    pub krein_levels: Vec<usize>,
}

impl OmegaOptions {
    pub fn for_kind(kind: ModelKind, radius: usize) -> Self {
        let krein_levels = match kind {
            ModelKind::Ray => vec![1000, 2000, 4000],
            ModelKind::Subtree { q: 2 } => vec![500, 1000, 2000],
            _ => ModelNorm::default_levels(kind),
        };
        OmegaOptions { quadrature_steps: radius.saturating_sub(2).max(2), krein_levels }
    }
}

/// Condensate two-point function `<(e^{beta H} - 1)^{-1} d_x, d_y> + D v(x) v(y)`
/// on the infinite graph. The Bose kernel splits into `f(beta H)`, evaluated
/// by Lanczos quadrature on a ball large enough that the Krylov space never
/// meets its boundary, and `(beta H)^{-1}`, evaluated by the Krein formula at
/// `lambda*`. Refused for recurrent graphs.
#[allow(clippy::too_many_arguments)]
pub fn omega_d(
    model: &PerturbedModel,
    norm: &ModelNorm,
    weight: &PfWeight,
    verdict: Transience,
    beta: f64,
    d: f64,
    x: usize,
    y: usize,
    opts: &OmegaOptions,
) -> Result<OmegaD> {
    match verdict {
        Transience::Transient => {}
        Transience::Recurrent => {
            return Err(Error::Refused(
                "the graph is recurrent: the diagonal resolvent diverges at the norm, so no locally normal condensate state exists".into(),
            ))
        }
        Transience::Inconclusive => {
            return Err(Error::Refused("transience could not be established".into()));
        }
    }
    if model.kind() != norm.kind || model.degree() != norm.degree {
        return Err(Error::Stale("model and norm estimate describe different graphs".into()));
    }
    let ls = norm.lambda_star;
    let adj = model.adjacency();
    let k = opts.quadrature_steps;
    let reach = model.ball().depth(x).max(model.ball().depth(y)) + k + 1;
    if reach > model.radius() {
        return Err(Error::Precondition(format!(
            "ball of radius {} is too small for {k} quadrature steps",
            model.radius()
        )));
    }
    let f = |l: f64| bose_regular(beta * (ls - l));
    let quad = |steps: usize| -> Result<f64> {
        let n = adj.dim();
        if x == y {
            let mut e = vec![0.0; n];
            e[x] = 1.0;
            return lanczos_quadrature(adj as &dyn SymmetricOperator, &e, steps, f);
        }
        let mut p = vec![0.0; n];
        let mut m = vec![0.0; n];
        p[x] = 1.0;
        p[y] = 1.0;
        m[x] = 1.0;
        m[y] = -1.0;
        Ok(0.25 * (lanczos_quadrature(adj, &p, steps, f)? - lanczos_quadrature(adj, &m, steps, f)?))
    };
    let bounded = quad(k)?;
    let bounded_error = (bounded - quad(k.saturating_sub(3).max(1))?).abs();
    let sx = Site::of_vertex(model, x).ok_or_else(|| Error::InvalidModel("model has no base".into()))?;
    let sy = Site::of_vertex(model, y).ok_or_else(|| Error::InvalidModel("model has no base".into()))?;
    let (r, r_err, _) = krein_limit_entry(norm.degree, norm.kind, &opts.krein_levels, ls, sx, sy)?;
    let resolvent_part = r / beta;
    let condensate_part = d * weight.closed_v(model, x) * weight.closed_v(model, y);
    Ok(OmegaD {
        value: bounded + resolvent_part + condensate_part,
        bounded_part: bounded,
        bounded_error,
        resolvent_part,
        resolvent_error: r_err / beta,
        condensate_part,
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Decomposition {
    pub density: f64,
    pub rho_c: f64,
    pub term1: f64,
    pub term2: f64,
    pub term3: f64,
    pub residual: f64,
}

/// Splits `rho_n(mu_n) - rho_c` into a finite-size proxy, the base-coupling
/// remainder and the ground-state term `1 / (N (lambda* - lambda_max - mu_n))`.
pub fn density_decomposition(
    density: f64,
    rho_c: f64,
    volume: usize,
    lambda_star: f64,
    lambda_max: f64,
    mu_n: f64,
    a_proxy: f64,
) -> Decomposition {
    let term3 = 1.0 / (volume as f64 * (lambda_star - lambda_max - mu_n));
    let term1 = a_proxy;
    let term2 = density - rho_c - term3 - term1;
    let residual = (term1 + term2 + term3) - (density - rho_c);
    Decomposition { density, rho_c, term1, term2, term3, residual }
}

/// Finite-size proxy: the unperturbed ball density shifted by `E_m`, minus `rho_c`.
pub fn finite_size_proxy(unperturbed_energies: &[f64], beta: f64, em: f64, rho_c: f64) -> f64 {
    let s: f64 = unperturbed_energies.iter().map(|h| bose(beta * (h + em))).sum();
    s / unperturbed_energies.len() as f64 - rho_c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Growth {
    Diverging,
    Bounded,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DivergenceReport {
    /// `(n, two-point value, witness)`.
    pub rows: Vec<(usize, f64, f64)>,
    pub verdict: Growth,
    pub growth: f64,
}

/// Diverging when the last value exceeds the first by `factor` and is still rising.
pub fn divergence_probe(rows: Vec<(usize, f64, f64)>, factor: f64) -> DivergenceReport {
    let n = rows.len();
    let growth = if n >= 1 { rows[n - 1].1 / rows[0].1 } else { f64::NAN };
    let rising = n >= 2 && rows[n - 1].1 > rows[n - 2].1;
    let verdict = if growth >= factor && rising { Growth::Diverging } else { Growth::Bounded };
    DivergenceReport { rows, verdict, growth }
}
