//! Batch pipelines behind the command-line subcommands. Each command reads a
//! validated [`RunConfig`], writes its files into the output directory and
//! reports what it wrote.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::graph::{perturb, ModelKind, PerturbationMode, PerturbedModel, TreeBall};
use crate::ids::{hamiltonian_energies, laplace_transform, merged_grid, phi_series, shift_check, window_mass};
use crate::krein::{
    branch_point, classify_transience, probe_truncation, KreinResolvent, ModelNorm, Site, Transience, TransienceReport,
};
use crate::pf::PfWeight;
use crate::report::{write_csv, write_json, Cell, Provenance, Table};
use crate::spectral::{extremal_eig, full_spectrum, pf_vector, SpectralSummary};
use crate::thermo::{
    condensate_fraction, critical_density_mollified, critical_density_series, density_decomposition, divergence_probe,
    finite_density, finite_size_proxy, mu_schedule, omega_d, GibbsState, OmegaOptions, ScheduleRule, VolumeData,
};

/// Files written by a command plus anything worth telling the user.
#[derive(Debug, Default, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
    /// Quantities the theory says do not exist for this model.
    pub refusals: Vec<String>,
}

/// Process exit code for an error: 1 configuration, 3 refusal, 2 anything numerical.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Parse { .. } => 1,
        Error::Refused(_) => 3,
        _ => 2,
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    kind: ModelKind,
    prov: Provenance,
    out: Outcome,
}

impl<'a> Ctx<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self> {
        let warnings = cfg.validate()?;
        std::fs::create_dir_all(&cfg.output_dir)?;
        Ok(Ctx {
            cfg,
            kind: cfg.model_kind()?,
            prov: Provenance::new(cfg.hash()),
            out: Outcome { warnings, ..Outcome::default() },
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    fn csv(&mut self, name: &str, table: &Table) -> Result<()> {
        let p = self.path(name);
        write_csv(&p, &self.prov, table)?;
        self.out.files.push(p);
        Ok(())
    }

    fn json(&mut self, name: &str, payload: serde_json::Value) -> Result<()> {
        let p = self.path(name);
        write_json(&p, &self.prov, payload)?;
        self.out.files.push(p);
        Ok(())
    }

    fn model(&self, n: usize) -> Result<PerturbedModel> {
        let ball = TreeBall::build_with_limit(self.cfg.model.degree, n, self.cfg.vertex_limit)?;
        perturb(ball, self.kind, self.cfg.mode)
    }

    fn finish(self, command: &str) -> Outcome {
        log_sidecar(&self.cfg.output_dir, command, &self.prov);
        self.out
    }
}

/// Timestamps live only in this sidecar so payload files stay reproducible.
fn log_sidecar(dir: &Path, command: &str, prov: &Provenance) {
    use std::io::Write;
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    if let Ok(mut f) = std::fs::OpenOptions::new().create(true).append(true).open(dir.join("run.log")) {
        let _ = writeln!(f, "{secs} {command} config-sha256 {}", prov.config_hash);
    }
}

fn floats(xs: &[f64]) -> Vec<Cell> {
    xs.iter().map(|&x| Cell::Float(x)).collect()
}

fn row(head: Vec<Cell>, tail: &[f64]) -> Vec<Cell> {
    let mut r = head;
    r.extend(floats(tail));
    r
}

pub fn cmd_build(cfg: &RunConfig) -> Result<Outcome> {
    let mut ctx = Ctx::new(cfg)?;
    let mut index = Table::new(["n", "vertices", "edges", "base_size"]);
    for &n in &cfg.n_range {
        let m = ctx.model(n)?;
        let mut buf = format!("{}\n", ctx.prov.header_line()).into_bytes();
        m.write_dump(&mut buf)?;
        let p = ctx.path(&format!("model_n{n}.dump"));
        std::fs::write(&p, buf)?;
        ctx.out.files.push(p);
        index.push(vec![n.into(), m.vertex_count().into(), m.ball().edge_count().into(), m.base().len().into()]);
    }
    ctx.csv("models.csv", &index)?;
    Ok(ctx.finish("build"))
}

fn summaries(ctx: &Ctx, with_spectrum: bool) -> Result<Vec<(PerturbedModel, SpectralSummary)>> {
    let tol = ctx.cfg.tolerances.eig;
    ctx.cfg
        .n_range
        .par_iter()
        .map(|&n| {
            let m = ctx.model(n)?;
            let mut s = pf_vector(m.adjacency(), 0, tol)?;
            if with_spectrum && m.vertex_count() <= ctx.cfg.dense_limit {
                s.spectrum = Some(full_spectrum(m.adjacency(), ctx.cfg.dense_limit)?);
            }
            Ok((m, s))
        })
        .collect()
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Outcome> {
    let mut ctx = Ctx::new(cfg)?;
    let rows = summaries(&ctx, false)?;
    let mut cols = vec!["n".to_string(), "vertices".into(), "lambda_max".into(), "residual".into(), "pf_norm_sq".into()];
    cols.extend(cfg.probes.iter().map(|x| format!("pf_at_{x}")));
    let mut t = Table::new(cols);
    for (m, s) in &rows {
        let mut vals = vec![s.lambda_max, s.residual, s.pf_norm_sq()];
        vals.extend(cfg.probes.iter().map(|&x| s.pf_vector.get(x).copied().unwrap_or(f64::NAN)));
        t.push(row(vec![m.radius().into(), m.vertex_count().into()], &vals));
        let mut pv = Table::new(["vertex", "depth", "in_base", "pf"]);
        for (x, v) in s.pf_vector.iter().enumerate() {
            pv.push(vec![x.into(), m.ball().depth(x).into(), m.in_base(x).into(), (*v).into()]);
        }
        ctx.csv(&format!("pf_n{}.csv", m.radius()), &pv)?;
    }
    ctx.csv("spectrum.csv", &t)?;
    Ok(ctx.finish("spectrum"))
}

fn estimate_norm(cfg: &RunConfig, kind: ModelKind) -> Result<ModelNorm> {
    ModelNorm::estimate(kind, cfg.model.degree, &ModelNorm::default_levels(kind), cfg.tolerances.secular)
}

fn transience(cfg: &RunConfig, kind: ModelKind, lambda_star: f64) -> Result<TransienceReport> {
    let r = KreinResolvent::new(cfg.model.degree, kind, probe_truncation(kind))?;
    classify_transience(&r, lambda_star, Site::on_base(0), cfg.transience)
}

pub fn cmd_secular(cfg: &RunConfig) -> Result<Outcome> {
    let mut ctx = Ctx::new(cfg)?;
    let kind = ctx.kind;
    let mut norm = estimate_norm(cfg, kind)?;
    let report = transience(cfg, kind, norm.lambda_star)?;
    norm.transient = match report.verdict {
        Transience::Transient => Some(true),
        Transience::Recurrent => Some(false),
        Transience::Inconclusive => None,
    };
    let mut lt = Table::new(["level", "lambda"]);
    for &(l, v) in &norm.per_level {
        lt.push(vec![l.into(), v.into()]);
    }
    ctx.csv("secular_levels.csv", &lt)?;
    let mut pt = Table::new(["j", "lambda", "value"]);
    for &(j, l, g) in &report.probes {
        pt.push(vec![j.into(), l.into(), g.into()]);
    }
    ctx.csv("transience_probes.csv", &pt)?;
    let tol = cfg.tolerances.eig;
    let lmax = cfg
        .n_range
        .par_iter()
        .map(|&n| Ok((n, extremal_eig(ctx.model(n)?.adjacency(), tol)?.0)))
        .collect::<Result<Vec<_>>>()?;
    let mut gt = Table::new(["n", "lambda_max", "e0"]);
    for &(n, l) in &lmax {
        gt.push(vec![n.into(), l.into(), (norm.lambda_star - l).into()]);
    }
    ctx.csv("hidden_gap.csv", &gt)?;
    let warnings = ctx.out.warnings.clone();
    ctx.json(
        "secular.json",
        json!({
            "model": kind.to_string(),
            "Q": cfg.model.degree,
            "lambdaStar": norm.lambda_star,
            "extrapolationError": norm.extrapolation_error,
            "treeNorm": branch_point(cfg.model.degree),
            "Em": norm.gap,
            "verdict": report.verdict.to_string(),
            "warnings": warnings,
        }),
    )?;
    Ok(ctx.finish("secular"))
}

pub fn cmd_ids(cfg: &RunConfig) -> Result<Outcome> {
    let mut ctx = Ctx::new(cfg)?;
    let kind = ctx.kind;
    let q = cfg.model.degree;
    let norm = estimate_norm(cfg, kind)?;
    let tree_norm = branch_point(q);
    let delta = tree_norm - norm.lambda_star;
    let spectra = cfg
        .n_range
        .par_iter()
        .map(|&n| {
            let y = ctx.model(n)?;
            let x = perturb(TreeBall::build_with_limit(q, n, cfg.vertex_limit)?, ModelKind::Tree, PerturbationMode::DiagonalUnit)?;
            Ok((n, full_spectrum(y.adjacency(), cfg.dense_limit)?, full_spectrum(x.adjacency(), cfg.dense_limit)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut summary_rows = Vec::new();
    for (n, sy, sx) in &spectra {
        let hy = hamiltonian_energies(sy, norm.lambda_star);
        let hx = hamiltonian_energies(sx, tree_norm);
        let lo = hy[0].min(hx[0]) - 0.5;
        let hi = hy[hy.len() - 1].max(hx[hx.len() - 1]) + 0.5;
        let grid = merged_grid(lo, hi, cfg.ids_points, &[]);
        let mut t = Table::new(["energy", "perturbed", "tree_shifted"]);
        for &e in &grid {
            let fy = crate::ids::cumulative(&hy, e);
            let fx = crate::ids::cumulative(&hx, e + delta);
            t.push(vec![e.into(), fy.into(), fx.into()]);
        }
        ctx.csv(&format!("ids_n{n}.csv"), &t)?;
        let disc = shift_check(sy, norm.lambda_star, sx, tree_norm);
        let mass = if norm.gap > 0.0 { window_mass(&hy, 0.05, 0.9 * norm.gap) } else { f64::NAN };
        let laplace: Vec<f64> = cfg.beta.iter().map(|&b| laplace_transform(&hx, b)).collect();
        summary_rows.push(json!({"n": n, "shiftDiscrepancy": disc, "gapWindowMass": mass, "laplaceTree": laplace}));
    }
    let phi = if q >= 3 {
        cfg.beta
            .iter()
            .map(|&b| phi_series(q, b, cfg.kmax).map(|p| json!({"beta": b, "value": p.value, "tail": p.tail})))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    ctx.json(
        "ids.json",
        json!({"lambdaStar": norm.lambda_star, "Em": norm.gap, "delta": delta, "phiAtBeta": phi, "volumes": summary_rows}),
    )?;
    Ok(ctx.finish("ids"))
}

struct PerN {
    model: PerturbedModel,
    summary: SpectralSummary,
    energies: Option<Vec<f64>>,
    tree_energies: Option<Vec<f64>>,
}

fn schedule_params(rule: ScheduleRule) -> serde_json::Value {
    serde_json::to_value(rule).expect("schedule serialises")
}

/// Ball radius for the bounded part of the condensate state: the largest ball
/// under a few hundred thousand vertices.
fn omega_radius(q: usize) -> usize {
    let mut r = 3;
    while crate::graph::ball_vertex_count(q, r + 1) <= 300_000 && r < 40 {
        r += 1;
    }
    r
}

pub fn cmd_thermo(cfg: &RunConfig) -> Result<Outcome> {
    let mut ctx = Ctx::new(cfg)?;
    let kind = ctx.kind;
    let q = cfg.model.degree;
    if kind == ModelKind::Tree {
        return Err(Error::Config("thermodynamics needs a perturbed model (HQ or GQq)".into()));
    }
    let mut norm = estimate_norm(cfg, kind)?;
    let ls = norm.lambda_star;
    let em = norm.gap;
    let trans = transience(cfg, kind, ls)?;
    norm.transient = Some(trans.verdict == Transience::Transient);
    let weight = PfWeight::from_norm(&norm)?;
    let tol = cfg.tolerances.eig;

    let per_n = cfg
        .n_range
        .par_iter()
        .map(|&n| {
            let model = ctx.model(n)?;
            let summary = pf_vector(model.adjacency(), 0, tol)?;
            let (energies, tree_energies) = if model.vertex_count() <= cfg.dense_limit {
                let sy = full_spectrum(model.adjacency(), cfg.dense_limit)?;
                let x = perturb(model.ball().clone(), ModelKind::Tree, PerturbationMode::DiagonalUnit)?;
                let sx = full_spectrum(x.adjacency(), cfg.dense_limit)?;
                (Some(hamiltonian_energies(&sy, ls)), Some(hamiltonian_energies(&sx, branch_point(q))))
            } else {
                (None, None)
            };
            Ok(PerN { model, summary, energies, tree_energies })
        })
        .collect::<Result<Vec<_>>>()?;

    let data: Vec<VolumeData> = per_n
        .iter()
        .map(|p| VolumeData {
            kind,
            degree: q,
            n: p.model.radius(),
            volume: p.model.vertex_count(),
            lambda_max: p.summary.lambda_max,
            pf_norm_sq: p.summary.pf_norm_sq(),
            energies: p.energies.clone(),
        })
        .collect();

    let mut manifest_beta = Vec::new();
    for &beta in &cfg.beta {
        let schedule = mu_schedule(&norm, cfg.schedule, beta, &data)?;
        let series = if em > 0.0 && q >= 3 { Some(critical_density_series(q, beta, em, cfg.kmax, cfg.series_cap)?) } else { None };
        let with_spec: Vec<(usize, Vec<f64>)> =
            per_n.iter().filter_map(|p| p.energies.clone().map(|e| (p.model.radius(), e))).collect();
        let mollified = if em > 0.0 && with_spec.len() >= 2 {
            Some(critical_density_mollified(&with_spec, beta, 0.0, em, &[0.4, 0.2, 0.1])?)
        } else {
            None
        };
        let rho_c = series.as_ref().or(mollified.as_ref()).map(|c| c.value);

        let mut cols = vec!["n", "volume", "lambda_max", "mu", "density"].into_iter().map(String::from).collect::<Vec<_>>();
        cols.extend(cfg.probes.iter().map(|x| format!("two_point_{x}")));
        cols.extend(["term1_proxy", "term2", "term3", "witness"].map(String::from));
        let mut table = Table::new(cols);
        let mut root_rows = Vec::new();
        for (i, p) in per_n.iter().enumerate() {
            let mu = schedule.values[i].1;
            let lmax = p.summary.lambda_max;
            let g = GibbsState::new(p.model.adjacency(), ls, lmax, beta, mu, cfg.dense_limit)?;
            let tp = cfg
                .probes
                .iter()
                .map(|&x| if x < p.model.vertex_count() { g.entry(x, x) } else { Ok(f64::NAN) })
                .collect::<Result<Vec<_>>>()?;
            let density = match &p.energies {
                Some(h) => finite_density(h, beta, mu)?,
                None => f64::NAN,
            };
            let proxy = match (&p.tree_energies, rho_c) {
                (Some(hx), Some(rc)) => finite_size_proxy(hx, beta, em, rc),
                _ => f64::NAN,
            };
            let dec = density_decomposition(density, rho_c.unwrap_or(f64::NAN), p.model.vertex_count(), ls, lmax, mu, proxy);
            let witness = 1.0 / (p.summary.pf_norm_sq() * (ls - lmax - mu));
            let root_tp = if p.model.vertex_count() > 0 { g.entry(0, 0)? } else { f64::NAN };
            root_rows.push((p.model.radius(), root_tp, witness));
            let mut vals = vec![lmax, mu, density];
            vals.extend(tp);
            vals.extend([dec.term1, dec.term2, dec.term3, witness]);
            table.push(row(vec![p.model.radius().into(), p.model.vertex_count().into()], &vals));
        }
        let suffix = if cfg.beta.len() > 1 { format!("_beta{}", beta) } else { String::new() };
        ctx.csv(&format!("thermo{suffix}.csv"), &table)?;

        let divergence = divergence_probe(root_rows, cfg.divergence_factor);
        let mut dt = Table::new(["n", "two_point_root", "witness"]);
        for &(n, v, w) in &divergence.rows {
            dt.push(vec![n.into(), v.into(), w.into()]);
        }
        ctx.csv(&format!("divergence{suffix}.csv"), &dt)?;

        let condensate = if em > 0.0 && with_spec.len() >= 2 && with_spec.len() == per_n.len() {
            let mus: Vec<f64> = schedule.values.iter().map(|v| v.1).collect();
            let eps: Vec<f64> = [0.4, 0.2, 0.1].iter().map(|f| f * em).collect();
            Some(condensate_fraction(&with_spec, &mus, beta, &eps)?)
        } else {
            None
        };

        let d = match cfg.schedule {
            ScheduleRule::Fregg3(d) => d,
            _ => 0.0,
        };
        let r = omega_radius(q);
        let big = ctx.model(r)?;
        let opts = OmegaOptions::for_kind(kind, r);
        let omega = cfg
            .probes
            .iter()
            .filter(|&&x| x < big.vertex_count())
            .map(|&x| omega_d(&big, &norm, &weight, trans.verdict, beta, d, x, x, &opts).map(|o| (x, o)))
            .collect::<Result<Vec<_>>>();
        let omega_json = match omega {
            Ok(v) => json!(v.iter().map(|(x, o)| json!({"vertex": x, "D": d, "result": o})).collect::<Vec<_>>()),
            Err(Error::Refused(msg)) => {
                ctx.out.refusals.push(msg.clone());
                json!({"refused": msg})
            }
            Err(e) => return Err(e),
        };
        manifest_beta.push(json!({
            "beta": beta,
            "schedule": schedule,
            "rhoC": {"series": series, "mollified": mollified, "mollifier": "trapezoid, widths 0.4/0.2/0.1 of Em"},
            "condensate": condensate,
            "divergence": {"verdict": divergence.verdict, "growth": divergence.growth},
            "omegaD": omega_json,
        }));
    }
    let warnings = ctx.out.warnings.clone();
    ctx.json(
        "manifest.json",
        json!({
            "model": kind.to_string(),
            "Q": q,
            "mode": cfg.mode.to_string(),
            "lambdaStar": ls,
            "lambdaStarError": norm.extrapolation_error,
            "Em": em,
            "transience": trans.verdict.to_string(),
            "scheduleRule": schedule_params(cfg.schedule),
            "runs": manifest_beta,
            "warnings": warnings,
            "conditional": "limit densities under volume-scaled schedules assume the base-coupling remainder vanishes",
        }),
    )?;
    Ok(ctx.finish("thermo"))
}

/// Index of every CSV/JSON file in the output directory that carries this
/// configuration's hash, with its columns and row count.
pub fn cmd_report(cfg: &RunConfig) -> Result<Outcome> {
    let mut ctx = Ctx::new(cfg)?;
    let mut names: Vec<PathBuf> = std::fs::read_dir(&cfg.output_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().is_some_and(|n| n != "report.json"))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "json")))
        .collect();
    names.sort();
    let mut entries = Vec::new();
    let mut foreign = 0usize;
    for p in names {
        let text = std::fs::read_to_string(&p)?;
        let name = p.file_name().unwrap().to_string_lossy().to_string();
        if !text.contains(&ctx.prov.config_hash) {
            foreign += 1;
            continue;
        }
        if name.ends_with(".csv") {
            let parsed = crate::report::parse_csv(&text)?;
            entries.push(json!({"file": name, "columns": parsed.columns, "rows": parsed.rows.len()}));
        } else {
            entries.push(json!({"file": name}));
        }
    }
    if foreign > 0 {
        ctx.out.warnings.push(format!("{foreign} file(s) from other configurations ignored"));
    }
    ctx.json("report.json", json!({"files": entries, "ignored": foreign}))?;
    Ok(ctx.finish("report"))
}
