//! Closed-form Perron-Frobenius weights of the infinite perturbed graphs and
//! the finite-volume diagnostics built on them.

use crate::csr::dot;
use crate::error::{Error, Result};
use crate::graph::{perturb, ModelKind, PerturbationMode, PerturbedModel, TreeBall};
use crate::krein::{a_mu, ModelNorm};
use crate::spectral::{pf_vector, SpectralSummary};

/// The weight `v(x) = a*^{d(x,S)} w(y(x))` at `lambda* = ||A_Y||`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PfWeight {
    kind: ModelKind,
    degree: usize,
    lambda_star: f64,
    a_star: f64,
}

impl PfWeight {
    pub fn new(kind: ModelKind, degree: usize, lambda_star: f64) -> Result<Self> {
        if kind == ModelKind::Tree {
            return Err(Error::InvalidModel("no closed-form weight for the unperturbed tree".into()));
        }
        let (a_star, _) = a_mu(lambda_star, degree)?;
        Ok(PfWeight { kind, degree, lambda_star, a_star })
    }

    pub fn from_norm(norm: &ModelNorm) -> Result<Self> {
        Self::new(norm.kind, norm.degree, norm.lambda_star)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn lambda_star(&self) -> f64 {
        self.lambda_star
    }

    pub fn a_star(&self) -> f64 {
        self.a_star
    }

    /// Weight on the base at root distance `d`.
    pub fn closed_w(&self, d: usize) -> f64 {
        let d = d as f64;
        match self.kind {
            ModelKind::Ray => (1.0 - self.a_star) * d + 1.0,
            ModelKind::Subtree { q } => phi_family(q, d as usize),
            ModelKind::Tree => unreachable!("rejected at construction"),
        }
    }

    /// Weight at a point `dist` steps off the base, anchored at root distance `anchor_depth`.
    pub fn value(&self, dist: usize, anchor_depth: usize) -> f64 {
        self.a_star.powi(dist as i32) * self.closed_w(anchor_depth)
    }

    pub fn closed_v(&self, model: &PerturbedModel, x: usize) -> f64 {
        let bd = model.base_distance(x).expect("perturbed models have a base");
        self.value(bd.dist, model.ball().depth(bd.anchor))
    }

    /// `v` restricted to the ball of `model`.
    pub fn restrict(&self, model: &PerturbedModel) -> Vec<f64> {
        (0..model.vertex_count()).map(|x| self.closed_v(model, x)).collect()
    }
}

/// `(1 + (q-2) d / q) (q-1)^{-d/2}`, the alternative weight rooted at distance `d`.
pub fn phi_family(q: usize, d: usize) -> f64 {
    let d = d as f64;
    (1.0 + (q as f64 - 2.0) * d / q as f64) * ((q - 1) as f64).powf(-d / 2.0)
}

/// A finite volume together with its Perron-Frobenius data.
#[derive(Debug, Clone)]
pub struct FiniteVolume {
    pub model: PerturbedModel,
    pub summary: SpectralSummary,
}

impl FiniteVolume {
    pub fn build(kind: ModelKind, degree: usize, n: usize, tol: f64) -> Result<Self> {
        let model = perturb(TreeBall::build(degree, n)?, kind, PerturbationMode::DiagonalUnit)?;
        let summary = pf_vector(model.adjacency(), 0, tol)?;
        Ok(FiniteVolume { model, summary })
    }

    pub fn radius(&self) -> usize {
        self.model.radius()
    }
}

/// Builds every volume of an exhaustion range.
pub fn exhaustion(kind: ModelKind, degree: usize, ns: &[usize], tol: f64) -> Result<Vec<FiniteVolume>> {
    ns.iter().map(|&n| FiniteVolume::build(kind, degree, n, tol)).collect()
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RatioRow {
    pub n: usize,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub vn_norm_sq: f64,
    pub v_restricted_norm_sq: f64,
    pub base_size: usize,
    pub volume: usize,
}

/// `r1 = ||v|_n||^2 |S_n| / |V_n|`, `r2 = ||v_n||^2 |S_n| / |V_n|`, `r3 = ||v_n||^2 / |V_n|`.
pub fn ratio_row(vol: &FiniteVolume, weight: &PfWeight) -> RatioRow {
    let v = weight.restrict(&vol.model);
    let vr = dot(&v, &v);
    let vn = vol.summary.pf_norm_sq();
    let s = vol.model.base().len();
    let volume = vol.model.vertex_count();
    let inv = 1.0 / volume as f64;
    RatioRow {
        n: vol.radius(),
        r1: vr * s as f64 * inv,
        r2: vn * s as f64 * inv,
        r3: vn * inv,
        vn_norm_sq: vn,
        v_restricted_norm_sq: vr,
        base_size: s,
        volume,
    }
}

pub fn ratio_series(volumes: &[FiniteVolume], weight: &PfWeight) -> Vec<RatioRow> {
    volumes.iter().map(|v| ratio_row(v, weight)).collect()
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct VnRow {
    pub n: usize,
    /// `(vertex, v_n(x), |v_n(x) - v(x)|)` per probe.
    pub probes: Vec<(usize, f64, f64)>,
    pub vn_norm: f64,
}

/// Finite-volume PF values at the probe vertices against the closed form.
pub fn vn_vs_v(volumes: &[FiniteVolume], weight: &PfWeight, probes: &[usize]) -> Result<Vec<VnRow>> {
    volumes
        .iter()
        .map(|vol| {
            let rows = probes
                .iter()
                .map(|&x| {
                    if x >= vol.model.vertex_count() {
                        return Err(Error::Precondition(format!("probe {x} outside the ball of radius {}", vol.radius())));
                    }
                    let vn = vol.summary.pf_vector[x];
                    Ok((x, vn, (vn - weight.closed_v(&vol.model, x)).abs()))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(VnRow { n: vol.radius(), probes: rows, vn_norm: vol.summary.pf_norm_sq().sqrt() })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DominationRow {
    pub n: usize,
    pub passes: bool,
    /// Largest `v_n(x) / v(x)` over the base.
    pub worst_ratio: f64,
}

/// Whether `v_n <= v (1 + 1e-8)` on the base, per volume.
pub fn domination_check(volumes: &[FiniteVolume], weight: &PfWeight) -> Vec<DominationRow> {
    volumes
        .iter()
        .map(|vol| {
            let worst = vol
                .model
                .base()
                .iter()
                .map(|&x| vol.summary.pf_vector[x] / weight.closed_v(&vol.model, x))
                .fold(0.0f64, f64::max);
            DominationRow { n: vol.radius(), passes: worst <= 1.0 + 1e-8, worst_ratio: worst }
        })
        .collect()
}
