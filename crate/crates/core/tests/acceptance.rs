//! End-to-end acceptance run. Each criterion prints one PASS/FAIL line; the
//! process exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use treebec::graph::{perturb, ModelKind, PerturbationMode, PerturbedModel, TreeBall};
use treebec::ids::{hamiltonian_energies, laplace_transform, phi_series, shift_check, window_mass};
use treebec::krein::{
    a_mu, branch_point, circle_max, classify_transience, green_entry, probe_truncation, richardson, BaseGeometry,
    KreinResolvent, ModelNorm, SecularProblem, Site, Transience, TransienceOptions,
};
use treebec::pf::{exhaustion, ratio_series, vn_vs_v, PfWeight};
use treebec::spectral::{evolve, full_spectrum, pf_vector, resolvent_solve};
use treebec::thermo::{
    bose, condensate_fraction, critical_density_mollified, critical_density_series, finite_density, mu_schedule,
    omega_d, solve_chemical, GibbsState, OmegaOptions, ScheduleRule, VolumeData,
};
use treebec::Result;

const EIG_TOL: f64 = 1e-10;
const BIG_DENSE: usize = 20_000;

struct Verdict {
    pass: bool,
    detail: String,
}

/// Collects named sub-checks into one verdict.
#[derive(Default)]
struct Checks(Vec<(String, bool)>);

impl Checks {
    fn add(&mut self, what: impl Into<String>, ok: bool) {
        self.0.push((what.into(), ok));
    }

    fn verdict(self) -> Verdict {
        let pass = self.0.iter().all(|c| c.1);
        let detail = self
            .0
            .iter()
            .map(|(w, ok)| format!("{}{w}", if *ok { "" } else { "!! " }))
            .collect::<Vec<_>>()
            .join("; ");
        Verdict { pass, detail }
    }
}

fn hq(n: usize) -> Result<PerturbedModel> {
    perturb(TreeBall::build(3, n)?, ModelKind::Ray, PerturbationMode::DiagonalUnit)
}

fn hq_norm() -> Result<ModelNorm> {
    ModelNorm::estimate(ModelKind::Ray, 3, &ModelNorm::default_levels(ModelKind::Ray), 1e-13)
}

fn symbol_value() -> f64 {
    (9.0 - 5f64.sqrt()) / 2.0
}

fn c1() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_quad: f64 = 0.0;
    let mut worst_lin: f64 = 0.0;
    for q in 3..=8usize {
        let bp = branch_point(q);
        for _ in 0..100_000 {
            let lambda = bp + (100.0 - bp) * (1.0 - rng.gen::<f64>());
            let (a, mu) = a_mu(lambda, q)?;
            worst_quad = worst_quad.max(((q - 1) as f64 * a * a - lambda * a + 1.0).abs());
            worst_lin = worst_lin.max((mu - (lambda - q as f64 * a)).abs());
        }
    }
    let mut c = Checks::default();
    c.add(format!("quadratic residual {worst_quad:.2e}"), worst_quad <= 1e-12);
    c.add(format!("linear residual {worst_lin:.2e}"), worst_lin <= 1e-12);
    Ok(c.verdict())
}

fn c2() -> Result<Verdict> {
    let ball = TreeBall::build(3, 12)?;
    let mut b = vec![0.0; ball.vertex_count()];
    b[0] = 1.0;
    let x = resolvent_solve(ball.adjacency(), 3.0, &b, 1e-10)?.x;
    let mut c = Checks::default();
    let d1 = 1;
    let d2 = ball.children(d1).start;
    for (y, d) in [(0usize, 0usize), (d1, 1), (d2, 2)] {
        assert_eq!(ball.distance(0, y), d);
        let exact = green_entry(3, 3.0, d)?;
        let err = (x[y] - exact).abs();
        c.add(format!("d={d} err {err:.1e}"), err <= 1e-6);
    }
    Ok(c.verdict())
}

fn c3() -> Result<Verdict> {
    let mut c = Checks::default();
    let target = symbol_value();
    let root = SecularProblem::new(3, BaseGeometry::ray(501)).root(1e-12)?;
    c.add(format!("secular n=500 {root:.7} vs {target:.7}"), (root - target).abs() <= 1e-4);
    let lmax = pf_vector(hq(16)?.adjacency(), 0, EIG_TOL)?.lambda_max;
    c.add(format!("ball n=16 lambda_max {lmax:.7} gap {:.2e}", target - lmax), (lmax - target).abs() <= 1e-3);
    let single = SecularProblem::new(3, BaseGeometry::ray(1)).root(1e-14)?;
    let exact = (3.0 * 5f64.sqrt() - 1.0) / 2.0;
    c.add(format!("single site err {:.1e}", (single - exact).abs()), (single - exact).abs() <= 1e-8);
    Ok(c.verdict())
}

fn c4() -> Result<Verdict> {
    let mut c = Checks::default();
    let samples = 7200;
    let step = 2.0 * std::f64::consts::PI / samples as f64;
    for r in [3.0, 3.5, 4.0] {
        let m = circle_max(3, r, samples)?;
        let (a, mu) = a_mu(r, 3)?;
        let err = (m.max_ratio - a / mu).abs();
        c.add(format!("r={r} angle {:.1e} err {err:.1e}", m.argmax_angle), m.argmax_angle.abs() <= step && err <= 1e-10);
    }
    Ok(c.verdict())
}

fn c5() -> Result<Verdict> {
    let mut c = Checks::default();
    let p0 = phi_series(3, 0.0, 200)?;
    // The tail bound is far below double precision, so summation rounding is allowed on top.
    let bar = p0.tail + 1e-14;
    c.add(format!("Phi(0) - 1 = {:.1e} (tail {:.1e})", p0.value - 1.0, p0.tail), (p0.value - 1.0).abs() <= bar);
    let p1 = phi_series(3, 1.0, 200)?;
    let ball = TreeBall::build(3, 12)?;
    let h = hamiltonian_energies(&full_spectrum(ball.adjacency(), BIG_DENSE)?, branch_point(3));
    let lt = laplace_transform(&h, 1.0);
    let rel = (p1.value - lt).abs() / p1.value;
    c.add(format!("Phi(1) {:.6} vs ball {lt:.6} rel {rel:.1e}", p1.value), rel <= 0.01);
    let ls = hq_norm()?.lambda_star;
    let mut shifts = Vec::new();
    for n in [6usize, 8, 10] {
        let sy = full_spectrum(hq(n)?.adjacency(), BIG_DENSE)?;
        let sx = full_spectrum(TreeBall::build(3, n)?.adjacency(), BIG_DENSE)?;
        shifts.push(shift_check(&sy, ls, &sx, branch_point(3)));
    }
    c.add(
        format!("shift discrepancy {:.4}/{:.4}/{:.4}", shifts[0], shifts[1], shifts[2]),
        shifts.windows(2).all(|w| w[1] < w[0]),
    );
    Ok(c.verdict())
}

fn c6() -> Result<Verdict> {
    let mut c = Checks::default();
    let norm = hq_norm()?;
    let em_secular = norm.gap;
    c.add(format!("secular Em {em_secular:.5}"), (em_secular - 0.5535).abs() <= 1e-3);
    let ns = [14usize, 15, 16];
    let mut ls = Vec::new();
    let mut vs = Vec::new();
    for &n in &ns {
        ls.push((n + 2) as f64);
        vs.push(pf_vector(hq(n)?.adjacency(), 0, EIG_TOL)?.lambda_max);
    }
    let (lim, _) = richardson(&ls, &vs, &[2.0, 3.0]);
    let em_ball = lim - branch_point(3);
    c.add(
        format!("ball Em {em_ball:.5}"),
        (em_ball - 0.5535).abs() <= 1e-3 && (em_ball - em_secular).abs() <= 1e-3,
    );
    let mut mass = Vec::new();
    for n in [6usize, 8, 10] {
        let h = hamiltonian_energies(&full_spectrum(hq(n)?.adjacency(), BIG_DENSE)?, norm.lambda_star);
        mass.push(window_mass(&h, 0.05, 0.9 * em_secular));
    }
    c.add(
        format!("gap mass {:.2e}/{:.2e}/{:.2e}", mass[0], mass[1], mass[2]),
        mass.windows(2).all(|w| w[1] < w[0]),
    );
    Ok(c.verdict())
}

fn c7() -> Result<Verdict> {
    let mut c = Checks::default();
    let norm = hq_norm()?;
    let w = PfWeight::from_norm(&norm)?;
    let model = hq(14)?;
    let v = w.restrict(&model);
    let interior: Vec<usize> = (0..model.vertex_count())
        .filter(|&x| !model.in_base(x) && model.ball().depth(x) < model.radius())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let x = interior[rng.gen_range(0..interior.len())];
        let s: f64 = model.adjacency().row(x).map(|(y, a)| a * v[y]).sum();
        worst = worst.max((s - w.lambda_star() * v[x]).abs() / v[x]);
    }
    c.add(format!("eigen equation rel {worst:.1e}"), worst <= 1e-10);

    let ns: Vec<usize> = (6..=14).collect();
    let vols = exhaustion(ModelKind::Ray, 3, &ns, EIG_TOL)?;
    let base1 = vols[0].model.base()[1];
    let base2 = vols[0].model.base()[2];
    let off0 = vols[0].model.ball().children(0).find(|&y| !vols[0].model.in_base(y)).expect("root has off-base children");
    let off1 = vols[0].model.ball().children(base1).find(|&y| !vols[0].model.in_base(y)).expect("off-base child");
    let deep = vols[0].model.ball().children(off0).start;
    let probes = [base1, base2, off0, off1, deep];
    let table = vn_vs_v(&vols, &w, &probes)?;
    for (k, x) in probes.iter().enumerate() {
        let errs: Vec<f64> = table.iter().map(|r| r.probes[k].2).collect();
        c.add(
            format!("probe {x} err {:.1e}->{:.1e}", errs[0], errs[errs.len() - 1]),
            errs.windows(2).all(|e| e[1] < e[0]),
        );
    }
    let rows = ratio_series(&vols, &w);
    let r7 = rows.iter().find(|r| r.n == 7).expect("n=7 present").r1;
    let r14 = rows.iter().find(|r| r.n == 14).expect("n=14 present").r1;
    c.add(format!("r1 ratio {:.2}", r7 / r14), r7 / r14 >= 10.0);
    Ok(c.verdict())
}

fn c8() -> Result<Verdict> {
    let mut c = Checks::default();
    let mut worst: f64 = 0.0;
    for k in 0..10_000 {
        let x = 10f64.powf(-3.0 + 4.7 * k as f64 / 9_999.0);
        let b = bose(x);
        worst = worst.max((b * x.exp() - (b + 1.0)).abs() / (b + 1.0));
    }
    c.add(format!("bose identity {worst:.1e}"), worst <= 1e-12);

    let norm = hq_norm()?;
    let h8 = hamiltonian_energies(&full_spectrum(hq(8)?.adjacency(), BIG_DENSE)?, norm.lambda_star);
    let mut rt: f64 = 0.0;
    for mu in [-2.0, -0.5, -0.05, -1e-3] {
        let rho = finite_density(&h8, 1.0, mu)?;
        rt = rt.max((solve_chemical(&h8, 1.0, rho)? - mu).abs());
    }
    c.add(format!("chemical round trip {rt:.1e}"), rt <= 1e-9);

    let mut vols = Vec::new();
    for n in 8..=12usize {
        vols.push((n, hamiltonian_energies(&full_spectrum(hq(n)?.adjacency(), BIG_DENSE)?, norm.lambda_star)));
    }
    let eps: Vec<f64> = [0.4, 0.2, 0.1].iter().map(|f| f * norm.gap).collect();
    for mu in [-0.5, -0.1, -0.01] {
        let e = condensate_fraction(&vols, &vec![mu; vols.len()], 1.0, &eps)?;
        let bar = e.volume_residual + e.eps_residual;
        c.add(format!("n0(mu={mu}) {:.1e} within {bar:.1e}", e.n0), e.n0.abs() <= bar);
    }
    let series = critical_density_series(3, 1.0, norm.gap, 200, 1e6)?;
    let moll = critical_density_mollified(&vols[3..], 1.0, 0.0, norm.gap, &[0.4, 0.2, 0.1])?;
    let rel = (series.value - moll.value).abs() / series.value;
    c.add(format!("rho_c {:.5} vs {:.5} rel {rel:.1e}", series.value, moll.value), rel <= 0.02);
    Ok(c.verdict())
}

struct Run {
    n: usize,
    two_point: f64,
    witness: f64,
    term3: f64,
}

fn schedule_runs(kind: ModelKind, norm: &ModelNorm, rule: ScheduleRule, ns: &[usize]) -> Result<Vec<Run>> {
    ns.iter()
        .map(|&n| {
            let model = perturb(TreeBall::build(3, n)?, kind, PerturbationMode::DiagonalUnit)?;
            let s = pf_vector(model.adjacency(), 0, EIG_TOL)?;
            let data = VolumeData {
                kind,
                degree: 3,
                n,
                volume: model.vertex_count(),
                lambda_max: s.lambda_max,
                pf_norm_sq: s.pf_norm_sq(),
                energies: None,
            };
            let mu = mu_schedule(norm, rule, 1.0, &[data])?.values[0].1;
            let g = GibbsState::new(model.adjacency(), norm.lambda_star, s.lambda_max, 1.0, mu, 4096)?;
            Ok(Run {
                n,
                two_point: g.entry(0, 0)?,
                witness: 1.0 / (s.pf_norm_sq() * (norm.lambda_star - s.lambda_max - mu)),
                term3: s.pf_norm_sq() / model.vertex_count() as f64,
            })
        })
        .collect()
}

fn c9() -> Result<Verdict> {
    let mut c = Checks::default();
    let sub = ModelKind::Subtree { q: 2 };
    let n2 = ModelNorm::estimate(sub, 3, &ModelNorm::default_levels(sub), 1e-13)?;
    let res = KreinResolvent::new(3, sub, probe_truncation(sub))?;
    let rep = classify_transience(&res, n2.lambda_star, Site::on_base(0), TransienceOptions::default())?;
    let runs = schedule_runs(sub, &n2, ScheduleRule::Fregg1(1.0), &[8, 10, 12, 14])?;
    let growth = runs[3].two_point / runs[0].two_point;
    c.add(
        format!("(a) {} two-point x{growth:.1}", rep.verdict),
        rep.verdict == Transience::Recurrent && growth >= 4.0 && runs[3].two_point > runs[2].two_point,
    );

    let norm = hq_norm()?;
    let runs = schedule_runs(ModelKind::Ray, &norm, ScheduleRule::Fregg1(1.0), &[8, 10, 12, 14])?;
    let wg = runs[3].witness / runs[0].witness;
    let r3_falls = runs.windows(2).all(|w| w[1].term3 < w[0].term3);
    c.add(format!("(b) witness x{wg:.1}, r3 {:.1e}", runs[3].term3), wg >= 4.0 && r3_falls);

    let res = KreinResolvent::new(3, ModelKind::Ray, probe_truncation(ModelKind::Ray))?;
    let verdict = classify_transience(&res, norm.lambda_star, Site::on_base(0), TransienceOptions::default())?.verdict;
    let runs = schedule_runs(ModelKind::Ray, &norm, ScheduleRule::Fregg3(1.0), &[8, 12, 16])?;
    let big = hq(16)?;
    let w = PfWeight::from_norm(&norm)?;
    let omega = omega_d(&big, &norm, &w, verdict, 1.0, 1.0, 0, 0, &OmegaOptions::for_kind(ModelKind::Ray, 16))?;
    let last = &runs[runs.len() - 1];
    let rel = (last.two_point - omega.value).abs() / omega.value;
    let t3_ok = runs.windows(2).all(|w| w[1].term3 < w[0].term3) && last.term3 < 1e-2;
    c.add(
        format!("(c) n={} two-point {:.4} vs omega {:.4} rel {rel:.3}, term3 {:.1e}", last.n, last.two_point, omega.value, last.term3),
        rel <= 0.05 && t3_ok,
    );
    Ok(c.verdict())
}

fn c10() -> Result<Verdict> {
    let mut c = Checks::default();
    let norm = hq_norm()?;
    let w = PfWeight::from_norm(&norm)?;
    let model = hq(12)?;
    let adj = model.adjacency();
    let s = pf_vector(adj, 0, EIG_TOL)?;
    let v = w.restrict(&model);
    let n = model.vertex_count();
    let mut u = vec![Complex64::new(0.0, 0.0); n];
    u[0] = Complex64::new(1.0, 0.0);
    let reference = s.lambda_max;
    let gibbs = GibbsState::new(adj, reference, s.lambda_max, 1.0, -0.5, 4096)?;
    let g0 = gibbs.entry(0, 0)?;
    let r = norm.lambda_star + 1.0;
    let bound = r * v[0] / (r - norm.lambda_star);
    let mut unit: f64 = 0.0;
    let mut drift: f64 = 0.0;
    for t in [1.0, 5.0, 10.0] {
        let e = evolve(adj, reference, t, &u, 100_000)?;
        unit = unit.max((e.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() - 1.0).abs());
        let pairing: f64 = e.iter().zip(&v).map(|(z, vx)| z.norm() * vx).sum();
        c.add(format!("t={t} pairing {pairing:.3} <= {bound:.3}"), pairing <= bound);
        let re: Vec<f64> = e.iter().map(|z| z.re).collect();
        let im: Vec<f64> = e.iter().map(|z| z.im).collect();
        drift = drift.max((gibbs.quadratic_form(&re, &im)? - g0).abs());
    }
    c.add(format!("unitarity {unit:.1e}"), unit <= 1e-8);
    let two = evolve(adj, reference, 2.5, &evolve(adj, reference, -1.5, &u, 100_000)?, 100_000)?;
    let one = evolve(adj, reference, 1.0, &u, 100_000)?;
    let gl = two.iter().zip(&one).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    c.add(format!("group law {gl:.1e}"), gl <= 1e-7);
    c.add(format!("Gibbs drift {drift:.1e}"), drift <= 1e-7);
    Ok(c.verdict())
}

type Criterion = fn() -> Result<Verdict>;

fn main() {
    let criteria: [(u32, &str, Criterion, u64); 10] = [
        (1, "kernel identities", c1, 1),
        (2, "Green function oracle", c2, 30),
        (3, "secular norm of the ray model", c3, 120),
        (4, "circle maximum", c4, 5),
        (5, "integrated density of states", c5, 180),
        (6, "hidden spectrum", c6, 120),
        (7, "Perron-Frobenius structure", c7, 180),
        (8, "thermodynamic identities", c8, 180),
        (9, "condensation trichotomy", c9, 300),
        (10, "dynamics", c10, 60),
    ];
    let mut failed = 0;
    for (k, name, f, budget) in criteria {
        let start = Instant::now();
        let out = f();
        let took = start.elapsed();
        let slow = took > Duration::from_secs(budget);
        let (pass, detail) = match out {
            Ok(v) => (v.pass && !slow, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        let time = format!("{:.1}s/{budget}s{}", took.as_secs_f64(), if slow { " over budget" } else { "" });
        println!("criterion {k:>2} {} {name} [{time}] {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
