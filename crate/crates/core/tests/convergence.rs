use fracbvp::kernel::{KernelModel, ProblemParams};
use fracbvp::parse_expr;
use fracbvp::quad::QuadratureSpec;
use fracbvp::solver::{cone_metrics, solve_picard, Grid, GridSolution, PicardOptions};
use fracbvp::specialfn::gamma_checked;

fn models() -> [KernelModel; 2] {
    [
        KernelModel::new(ProblemParams::new(1.5, 0.2, 0.75, 31.0 / 40.0).unwrap()),
        KernelModel::new(ProblemParams::new(1.25, 0.4, 2.0 / 3.0, 41.0 / 60.0).unwrap()),
    ]
}

fn solve(n: usize, f1: &str, f2: &str, damping: f64) -> GridSolution {
    let grid = Grid::build(models(), n, &QuadratureSpec::default()).unwrap();
    let (f1, f2) = (parse_expr(f1).unwrap(), parse_expr(f2).unwrap());
    let zeros = vec![0.0; grid.len()];
    let opts = PicardOptions {
        tol: 1e-13,
        max_iter: 2000,
        damping,
    };
    let sol = solve_picard(&grid, [&f1, &f2], (zeros.clone(), zeros), &opts).unwrap();
    assert!(
        sol.converged,
        "{} iterations, residual {}",
        sol.iterations, sol.residual_sup
    );
    sol
}

/// `Σ_k x^(k+a) / Γ(k+a+1)`.
fn exp_integral(x: f64, a: f64) -> f64 {
    (0..60)
        .map(|k| x.powf(k as f64 + a) / gamma_checked(k as f64 + a + 1.0).unwrap())
        .sum()
}

fn value_at(sol: &GridSolution, t: f64) -> (f64, f64) {
    let j = sol.nodes.iter().position(|&x| x == t).expect("node");
    (sol.u[j], sol.v[j])
}

#[test]
fn exponential_forcing_converges_at_fourth_order() {
    let ms = models();
    let mut errs = Vec::new();
    for n in [16, 32, 64, 128] {
        let sol = solve(n, "exp(t)", "exp(t)", 1.0);
        let mut err = 0.0f64;
        for (m, w) in ms.iter().zip([&sol.u, &sol.v]) {
            let p = m.params();
            let a = p.alpha();
            for (&t, &x) in sol.nodes.iter().zip(w.iter()) {
                let exact = p.beta() * (1f64.exp() - 1.0) + exp_integral(p.eta(), a) - exp_integral(t, a);
                err = err.max((x - exact).abs());
            }
        }
        errs.push(err);
    }
    for pair in errs.windows(2) {
        assert!(pair[0] / pair[1] > 8.0, "{errs:?}");
    }
}

#[test]
fn nonlinear_system_self_converges() {
    let (f1, f2) = ("0.5 + 0.2*sin(u) + 0.1*v", "1 - 0.3*u*t + 0.05*cos(v)");
    let sols: Vec<GridSolution> = [16, 32, 64, 128].iter().map(|&n| solve(n, f1, f2, 1.0)).collect();
    let coarse: Vec<f64> = (0..=16).map(|j| j as f64 / 16.0).collect();
    let diff = |a: &GridSolution, b: &GridSolution| {
        coarse
            .iter()
            .map(|&t| {
                let (ua, va) = value_at(a, t);
                let (ub, vb) = value_at(b, t);
                (ua - ub).abs().max((va - vb).abs())
            })
            .fold(0.0, f64::max)
    };
    // f(u(s)) inherits the s^α behaviour of u at 0, so expect about 1 + α
    // (2.25 for the second equation) rather than the fourth order above.
    let d: Vec<f64> = sols.windows(2).map(|w| diff(&w[0], &w[1])).collect();
    assert!(d[2] < 2e-7, "{d:?}");
    assert!(d[0] / d[1] > 4.0 && d[1] / d[2] > 4.0, "{d:?}");
}

#[test]
fn damping_changes_the_path_not_the_limit() {
    let (f1, f2) = ("0.5 + 0.2*sin(u)", "1 + 0.1*u*v");
    let full = solve(32, f1, f2, 1.0);
    let half = solve(32, f1, f2, 0.5);
    assert!(half.iterations > full.iterations);
    for (a, b) in full.u.iter().chain(&full.v).zip(half.u.iter().chain(&half.v)) {
        assert!((a - b).abs() < 1e-11);
    }
}

#[test]
fn positive_forcing_gives_cone_members() {
    let sol = solve(64, "1 + u^2/10", "2 + sin(t)", 0.7);
    assert!(cone_metrics(&sol, &models()).in_cone());
}
