use treebec::graph::{perturb, ModelKind, PerturbationMode, PerturbedModel, TreeBall};
use treebec::krein::{symbol_lambda_star, KreinResolvent, Site};
use treebec::pf::{domination_check, exhaustion, PfWeight};
use treebec::spectral::{pf_vector, resolvent_solve};
use treebec::thermo::GibbsState;

fn model(kind: ModelKind, n: usize) -> PerturbedModel {
    perturb(TreeBall::build(3, n).unwrap(), kind, PerturbationMode::DiagonalUnit).unwrap()
}

#[test]
fn dump_survives_a_file() {
    let m = model(ModelKind::Subtree { q: 2 }, 5);
    let path = tempfile::NamedTempFile::new().unwrap().into_temp_path();
    m.write_dump(std::fs::File::create(&path).unwrap()).unwrap();
    let back = PerturbedModel::read_dump(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(back.base(), m.base());
    assert_eq!(back.adjacency(), m.adjacency());
}

#[test]
fn krein_formula_reproduces_ball_resolvent() {
    // Well above the band the ball boundary is invisible, so the truncated
    // Krein resolvent must agree with a direct solve on the perturbed ball
    // up to leakage of order (2 a^2)^(distance to the boundary).
    let m = model(ModelKind::Ray, 12);
    let r = KreinResolvent::new(3, ModelKind::Ray, m.base().len()).unwrap();
    assert_eq!(r.base_len(), m.base().len());
    let lambda = 4.5;
    for y in [0usize, 1, 5, 40] {
        let mut b = vec![0.0; m.vertex_count()];
        b[y] = 1.0;
        let direct = resolvent_solve(m.adjacency(), lambda, &b, 1e-13).unwrap().x;
        let sy = Site::of_vertex(&m, y).unwrap();
        for x in [0usize, 2, 7, 40] {
            let sx = Site::of_vertex(&m, x).unwrap();
            let one_branch = m.ball().distance(x, y) == sx.offset.abs_diff(sy.offset);
            if sx.anchor == sy.anchor && !one_branch {
                // Sites sharing an anchor are placed on one branch.
                continue;
            }
            let k = r.entry(lambda, sx, sy).unwrap();
            assert!((k - direct[x]).abs() < 1e-8, "({x},{y}): {k} vs {}", direct[x]);
        }
    }
}

#[test]
fn finite_pf_vectors_sit_below_the_closed_form() {
    let w = PfWeight::new(ModelKind::Ray, 3, symbol_lambda_star(3).unwrap()).unwrap();
    let vols = exhaustion(ModelKind::Ray, 3, &[5, 7, 9], 1e-10).unwrap();
    assert!(domination_check(&vols, &w).iter().all(|d| d.passes));
}

#[test]
fn gibbs_routes_agree() {
    let m = model(ModelKind::Ray, 7);
    let s = pf_vector(m.adjacency(), 0, 1e-10).unwrap();
    let ls = symbol_lambda_star(3).unwrap();
    let mu = ls - s.lambda_max - 0.05;
    let dense = GibbsState::new(m.adjacency(), ls, s.lambda_max, 1.5, mu, 4096).unwrap();
    let cheb = GibbsState::new(m.adjacency(), ls, s.lambda_max, 1.5, mu, 1).unwrap();
    for (x, y) in [(0, 0), (0, 1), (3, 17)] {
        let (a, b) = (dense.entry(x, y).unwrap(), cheb.entry(x, y).unwrap());
        assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "({x},{y}): {a} vs {b}");
    }
}
