//! Integrated densities of states in the hopping convention `H = lambda_ref I - A`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum IdsSource {
    Empirical(usize),
    Series,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct IdsEstimate {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub source: IdsSource,
    pub delta_shift: f64,
    pub gap_em: f64,
}

/// `points` equispaced energies from `lo` to `hi`.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![lo];
    }
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

/// Uniform grid with the given jump locations merged in.
pub fn merged_grid(lo: f64, hi: f64, points: usize, jumps: &[f64]) -> Vec<f64> {
    let mut g = uniform_grid(lo, hi, points);
    g.extend(jumps.iter().copied().filter(|x| (lo..=hi).contains(x)));
    g.sort_by(|a, b| a.total_cmp(b));
    g.dedup();
    g
}

/// Energies `reference - lambda_k`, sorted ascending.
pub fn hamiltonian_energies(spectrum: &[f64], reference: f64) -> Vec<f64> {
    let mut h: Vec<f64> = spectrum.iter().map(|l| reference - l).collect();
    h.sort_by(|a, b| a.total_cmp(b));
    h
}

/// Fraction of sorted energies `<= x`.
pub fn cumulative(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|&h| h <= x) as f64 / sorted.len() as f64
}

/// Empirical IDS of `reference I - A` from the eigenvalues of `A` on a volume of radius `n`.
pub fn empirical_ids(spectrum: &[f64], reference: f64, grid: &[f64], n: usize) -> Result<IdsEstimate> {
    if spectrum.is_empty() {
        return Err(Error::Precondition("empty spectrum".into()));
    }
    let h = hamiltonian_energies(spectrum, reference);
    let values = grid.iter().map(|&x| cumulative(&h, x)).collect();
    Ok(IdsEstimate { grid: grid.to_vec(), values, source: IdsSource::Empirical(n), delta_shift: 0.0, gap_em: 0.0 })
}

/// A truncated series value with a bound on what was left out.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Bounded {
    pub value: f64,
    pub tail: f64,
}

/// `sum_{k > K} k r^k`.
fn tail_k_rk(r: f64, kmax: usize) -> f64 {
    let k = kmax as f64;
    r.powf(k + 1.0) * ((k + 1.0) - k * r) / ((1.0 - r) * (1.0 - r))
}

/// Laplace transform `Phi(beta)` of the tree IDS, as the path-spectrum
/// double sum truncated at `kmax`.
pub fn phi_series(degree: usize, beta: f64, kmax: usize) -> Result<Bounded> {
    if degree < 3 {
        return Err(Error::Domain(format!("series needs Q >= 3, got {degree}")));
    }
    if !(beta >= 0.0) {
        return Err(Error::Domain(format!("beta = {beta}")));
    }
    let b = (degree - 1) as f64;
    let pref = (degree as f64 - 2.0).powi(2) / b;
    let scale = 4.0 * beta * b.sqrt();
    let mut sum = 0.0;
    let mut weight = 1.0;
    for k in 1..=kmax {
        weight /= b;
        let denom = 2.0 * (k as f64 + 1.0);
        let inner: f64 = (1..=k)
            .map(|n| {
                let s = (n as f64 * std::f64::consts::PI / denom).sin();
                (-scale * s * s).exp()
            })
            .sum();
        sum += weight * inner;
    }
    Ok(Bounded { value: pref * sum, tail: pref * tail_k_rk(1.0 / b, kmax) })
}

/// `(1/N) sum_k e^{-beta h_k}`.
pub fn laplace_transform(energies: &[f64], beta: f64) -> f64 {
    energies.iter().map(|h| (-beta * h).exp()).sum::<f64>() / energies.len() as f64
}

/// `sup_x |F_Y(x) - F_X(x + delta)|` over the grid.
pub fn shift_discrepancy(h_y: &[f64], h_x: &[f64], delta: f64, grid: &[f64]) -> f64 {
    grid.iter()
        .map(|&x| (cumulative(h_y, x) - cumulative(h_x, x + delta)).abs())
        .fold(0.0, f64::max)
}

/// Shift law check between a perturbed spectrum (reference `lambda_star`) and
/// an unperturbed one (reference `tree_norm`), with `delta = tree_norm - lambda_star`.
///
/// Both cumulative functions are constant between jumps, so the supremum is
/// taken at one point in every gap between jump clusters. Jumps closer than
/// `1e-9` (relative) form one cluster: degenerate eigenvalues computed with
/// rounding noise must not be split apart.
pub fn shift_check(spec_y: &[f64], lambda_star: f64, spec_x: &[f64], tree_norm: f64) -> f64 {
    let h_y = hamiltonian_energies(spec_y, lambda_star);
    let h_x = hamiltonian_energies(spec_x, tree_norm);
    let delta = tree_norm - lambda_star;
    let mut jumps = h_y.clone();
    jumps.extend(h_x.iter().map(|h| h - delta));
    jumps.sort_by(|a, b| a.total_cmp(b));
    let scale = jumps.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * scale;
    let mut points = vec![jumps[0] - 1.0, jumps[jumps.len() - 1] + 1.0];
    points.extend(jumps.windows(2).filter(|w| w[1] - w[0] > 2.0 * tol).map(|w| 0.5 * (w[0] + w[1])));
    shift_discrepancy(&h_y, &h_x, delta, &points)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct HiddenGap {
    /// `(n, lambda* - lambda_max(n))`.
    pub e0_trend: Vec<(usize, f64)>,
    pub em: f64,
}

pub fn hidden_gap(lambda_star: f64, tree_norm: f64, lambda_max: &[(usize, f64)]) -> HiddenGap {
    HiddenGap {
        e0_trend: lambda_max.iter().map(|&(n, l)| (n, lambda_star - l)).collect(),
        em: lambda_star - tree_norm,
    }
}

/// Fraction of energies strictly inside `(lo, hi)`.
pub fn window_mass(sorted: &[f64], lo: f64, hi: f64) -> f64 {
    let a = sorted.partition_point(|&h| h <= lo);
    let b = sorted.partition_point(|&h| h < hi);
    b.saturating_sub(a) as f64 / sorted.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn star_ids() {
        let r3 = 3f64.sqrt();
        let spec = [-r3, 0.0, 0.0, r3];
        let grid = [-0.1, r3 - 1e-9, r3, 2.0 * r3 + 0.1];
        let ids = empirical_ids(&spec, r3, &grid, 1).unwrap();
        assert_eq!(ids.values, vec![0.0, 0.25, 0.75, 1.0]);
        assert!(empirical_ids(&[], 1.0, &grid, 0).is_err());
    }

    #[test]
    fn phi_normalisation() {
        for q in 3..=8 {
            let p = phi_series(q, 0.0, 200).unwrap();
            assert!((p.value - 1.0).abs() <= p.tail + 1e-12, "Q={q}: {p:?}");
        }
        let p = phi_series(3, 0.0, 20).unwrap();
        assert!(p.tail > 1e-6 && (p.value + p.tail - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_spectra_have_no_discrepancy() {
        let s = [-1.0, 0.0, 0.5, 2.0];
        assert_eq!(shift_check(&s, 2.0, &s, 2.0), 0.0);
        // Rounding noise inside a degenerate cluster is not a discrepancy.
        let noisy = [-1.0, 1e-14, -1e-14, 0.0, 2.0];
        let clean = [-1.0, 0.0, 0.0, 0.0, 2.0];
        assert_eq!(shift_check(&noisy, 2.0, &clean, 2.0), 0.0);
        // A rank-one move shifts the count by one level.
        let moved = [-1.0, 0.0, 0.0, 0.5, 2.0];
        assert!((shift_check(&moved, 2.0, &clean, 2.0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn gap_mass_window() {
        let h = [0.0, 0.1, 0.2, 0.5, 1.0];
        assert_eq!(window_mass(&h, 0.05, 0.6), 0.6);
        let g = hidden_gap(3.38, 2.83, &[(4, 3.2), (6, 3.3)]);
        assert!((g.em - 0.55).abs() < 1e-12);
        assert!(g.e0_trend[1].1 < g.e0_trend[0].1);
    }

    proptest! {
        #[test]
        fn phi_decreasing_and_log_convex(q in 3usize..8, b0 in 0.0f64..3.0) {
            let h = 0.05;
            let f = |b: f64| phi_series(q, b, 120).unwrap().value;
            let (f0, f1, f2) = (f(b0), f(b0 + h), f(b0 + 2.0 * h));
            prop_assert!(f1 < f0);
            prop_assert!(f1.ln() * 2.0 - f0.ln() - f2.ln() <= 1e-10);
        }

        #[test]
        fn discrepancy_in_unit_interval(a in proptest::collection::vec(-3.0f64..3.0, 1..30),
                                        b in proptest::collection::vec(-3.0f64..3.0, 1..30)) {
            let d = shift_check(&a, 3.0, &b, 2.5);
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }
}
