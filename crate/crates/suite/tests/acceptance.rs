//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the lines are always
//! printed.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use lerayflow::diagnostics::{
    corrupted_non_solution, crucial_identity_from_gradients, norms_report, verify_profile, ProfileData,
    VerificationReport,
};
use lerayflow::duhamel::QuadratureSchedule;
use lerayflow::heat_lift::{heat_lift_eval, oseen_profile};
use lerayflow::initial_data::{check_global_holder, holder_norm, HOLDER_CALIBRATION};
use lerayflow::leray_solver::{continuation_solve, k_map, picard_solve, ProfileSolution, SolveContext, SolveParams};
use lerayflow::spectral::{
    derivative, from_spectrum, heat_propagate, leray_project, scalar_to_spectrum, spectrum_to_real, to_spectrum,
};
use lerayflow::{build_homogeneous_field, CircleTrace, Grid, GridVectorField, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RUNTIME_LIMIT: Duration = Duration::from_secs(120);
const REMAINDER_LIMIT: f64 = 1e-3;
const OSEEN_TOLERANCE: f64 = 1e-6;
const IDENTITY_LIMIT: f64 = 5e-2;
const CORRUPTED_FLOOR: f64 = 0.5;
const MACHINE_TOLERANCE: f64 = 1e-13;
const GAUSSIAN_TOLERANCE: f64 = 1e-10;
const PARSEVAL_TOLERANCE: f64 = 1e-12;
const NODE_DOUBLING_LIMIT: f64 = 1e-4;
const HOMOGENEITY_LIMIT: f64 = 1e-12;
const SMALL_DATA_SIZE: f64 = 0.1;
const SMALL_DATA_ITERATIONS: usize = 30;
const SMALL_DATA_TOL: f64 = 1e-8;
const RESIDUAL_LIMIT: f64 = 1e-3;
const PRESSURE_GAIN_FLOOR: f64 = 10.0;
const HOLDER_PAIRS: usize = 10_000;

struct Solved {
    name: &'static str,
    ctx: SolveContext,
    sol: ProfileSolution,
    report: VerificationReport,
}

impl Solved {
    fn new(name: &'static str, trace: CircleTrace, params: &SolveParams) -> Self {
        let ctx = SolveContext::from_params(trace, params).expect("context");
        let sol = continuation_solve(params, &ctx).expect("solve");
        let report = verify_profile(&ProfileData {
            lift: ctx.lift(),
            v0: ctx.v0_jets(),
            v_re: &sol.v_re,
            grad_re: &sol.derivatives.grad,
            q: &sol.q,
            grad_q: &sol.grad_q,
        })
        .expect("verification");
        Solved { name, ctx, sol, report }
    }

    /// The named check's value and verdict, if it ran.
    fn check(&self, name: &str) -> Option<(f64, bool)> {
        self.report
            .checks
            .iter()
            .find(|c| c.name == name)
            .map(|c| (c.value, c.pass))
    }
}

fn corpus() -> Vec<(&'static str, CircleTrace)> {
    let alpha = 2.0 * PI;
    vec![
        ("swirl", CircleTrace::swirl(alpha)),
        ("cos", CircleTrace::new(alpha, vec![1.0], vec![], 1.0).unwrap()),
        (
            "cos2_sin",
            CircleTrace::new(alpha, vec![0.0, 1.0], vec![0.5], 1.0).unwrap(),
        ),
    ]
}

struct Line {
    pass: bool,
    detail: String,
}

impl Line {
    fn new(pass: bool, detail: String) -> Self {
        Line { pass, detail }
    }
}

fn relative_gap(a: &GridVectorField, b: &GridVectorField) -> f64 {
    a.axpy(-1.0, b).unwrap().max_norm() / b.max_norm().max(f64::MIN_POSITIVE)
}

fn l2_gap(a: &GridVectorField, b: &GridVectorField) -> f64 {
    a.axpy(-1.0, b).unwrap().l2_norm() / b.l2_norm().max(f64::MIN_POSITIVE)
}

fn oseen_worst() -> f64 {
    let field = build_homogeneous_field(CircleTrace::swirl(2.0 * PI));
    let mut worst = 0.0_f64;
    for i in 0..=19 {
        let r = 0.5 + 9.5 * i as f64 / 19.0;
        for theta in [0.3_f64, 1.7, 3.1, 4.4, 5.9] {
            let y = [r * theta.cos(), r * theta.sin()];
            let q = heat_lift_eval(&field, y).unwrap().value;
            let e = oseen_profile(2.0 * PI, y);
            worst = worst.max((q[0] - e[0]).hypot(q[1] - e[1]) / e[0].hypot(e[1]));
        }
    }
    worst
}

fn criterion_1(params: &SolveParams) -> (Solved, Line) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let swirl = pool.install(|| Solved::new("swirl", CircleTrace::swirl(2.0 * PI), params));
    let elapsed = start.elapsed();
    let v_re = swirl.sol.v_re.max_norm();
    let oseen = oseen_worst();
    let pass = elapsed <= RUNTIME_LIMIT && v_re <= REMAINDER_LIMIT && oseen <= OSEEN_TOLERANCE;
    let detail = format!(
        "swirl on one thread: {:.1} s (<= {} s), max|v_re| = {v_re:.3e} (<= {REMAINDER_LIMIT:e}), \
         heat lift vs Oseen vortex {oseen:.3e} (<= {OSEEN_TOLERANCE:e})",
        elapsed.as_secs_f64(),
        RUNTIME_LIMIT.as_secs()
    );
    (swirl, Line::new(pass, detail))
}

fn criterion_2(solved: &[Solved]) -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in solved {
        let grid = *s.ctx.grid();
        let grad_v0 = &s.ctx.v0_jets().grad;
        let r = crucial_identity_from_gradients(&grid, grad_v0, &s.sol.derivatives.grad);
        let ok = r <= IDENTITY_LIMIT;
        pass &= ok;
        parts.push(format!("{} {r:.3e}", s.name));
        let bad = corrupted_non_solution(&s.ctx.v0_jets().value);
        let bad_grad = lerayflow::spectral::vector_gradient(&bad);
        let rc = crucial_identity_from_gradients(&grid, grad_v0, &bad_grad);
        pass &= rc >= CORRUPTED_FLOOR;
        parts.push(format!("{} corrupted {rc:.3e}", s.name));
    }
    Line::new(
        pass,
        format!(
            "identity residual (<= {IDENTITY_LIMIT:e}; corrupted >= {CORRUPTED_FLOOR}): {}",
            parts.join(", ")
        ),
    )
}

fn criterion_3(solved: &[Solved]) -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in solved {
        let n = norms_report(&s.sol, s.ctx.v0_jets()).unwrap();
        let ratio = n.dirichlet_vre / n.dirichlet_v0;
        pass &= n.dirichlet_bound_ok;
        parts.push(format!("{} {ratio:.3e}", s.name));
    }
    Line::new(pass, format!("Dirichlet ratio (<= 4.4): {}", parts.join(", ")))
}

fn criterion_4(solved: &[Solved]) -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in solved {
        for (check, label) in [
            ("decay_v0", "v0"),
            ("decay_v_re", "v_re"),
            ("decay_grad_v_re", "grad v_re"),
            ("decay_w", "w"),
        ] {
            match s.check(check) {
                Some((slope, ok)) => {
                    pass &= ok;
                    parts.push(format!(
                        "{} {label} {slope:.3}{}",
                        s.name,
                        if ok { "" } else { " (out)" }
                    ));
                }
                None => parts.push(format!("{} {label} skipped", s.name)),
            }
        }
    }
    Line::new(
        pass,
        format!(
            "slopes on [L/4, L/2] (v0 -1+-0.1, v_re -2+-0.2, grad -3+-0.25, w -2+-0.2): {}",
            parts.join(", ")
        ),
    )
}

fn criterion_5(cos: &Solved) -> Line {
    match cos.check("log_corrected_decay") {
        Some((ratio, ok)) => Line::new(ok, format!("cos datum shell-max ratio {ratio:.3} (<= 10)")),
        None => Line::new(false, "cos datum: log-corrected fit did not run".into()),
    }
}

fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> GridVectorField {
    let mut v = GridVectorField::zeros(grid);
    for c in v.u.iter_mut() {
        c.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
    }
    v
}

fn criterion_6() -> Line {
    let grid = Grid::new(8.0, 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let field = random_field(grid, &mut rng);
    let f = to_spectrum(&field);
    let pf = leray_project(&f);
    let idem = l2_gap(
        &from_spectrum(&leray_project(&pf)).unwrap(),
        &from_spectrum(&pf).unwrap(),
    );

    let phi: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let phi = scalar_to_spectrum(&ScalarField { grid, data: phi });
    let gx = spectrum_to_real(&derivative(&phi, 0)).pop().unwrap();
    let gy = spectrum_to_real(&derivative(&phi, 1)).pop().unwrap();
    let grad = GridVectorField { grid, u: [gx, gy] };
    let annihilated = from_spectrum(&leray_project(&to_spectrum(&grad))).unwrap().l2_norm() / grad.l2_norm();

    let composed = from_spectrum(&heat_propagate(&heat_propagate(&f, 0.3).unwrap(), 0.45).unwrap()).unwrap();
    let direct = from_spectrum(&heat_propagate(&f, 0.75).unwrap()).unwrap();
    let law = l2_gap(&composed, &direct);

    let g = Grid::new(16.0, 128).unwrap();
    let a = 0.5;
    let gauss = |c: f64, y: [f64; 2]| a / c * (-(y[0] * y[0] + y[1] * y[1]) / (4.0 * c)).exp();
    let initial = GridVectorField::from_fn(g, |y| [gauss(a, y), 0.0]);
    let exact = GridVectorField::from_fn(g, |y| [gauss(a + 1.0, y), 0.0]);
    let evolved = from_spectrum(&heat_propagate(&to_spectrum(&initial), 1.0).unwrap()).unwrap();
    let gaussian = relative_gap(&evolved, &exact);

    let parseval = (f.l2_norm() - field.l2_norm()).abs() / field.l2_norm();
    let pass = idem <= MACHINE_TOLERANCE
        && annihilated <= MACHINE_TOLERANCE
        && law <= MACHINE_TOLERANCE
        && gaussian <= GAUSSIAN_TOLERANCE
        && parseval <= PARSEVAL_TOLERANCE;
    Line::new(
        pass,
        format!(
            "idempotence {idem:.2e}, gradient annihilation {annihilated:.2e}, semigroup {law:.2e} (<= 1e-13); \
             Gaussian {gaussian:.2e} (<= 1e-10); Parseval {parseval:.2e} (<= 1e-12)"
        ),
    )
}

fn small_data_trace() -> CircleTrace {
    let base = corpus()[1].1.clone();
    base.scaled(SMALL_DATA_SIZE / holder_norm(&base, 1.0).unwrap())
}

fn criteria_7_and_8(params: &SolveParams) -> (Line, Line) {
    let trace = small_data_trace();
    let build = |nodes| {
        SolveContext::new(
            trace.clone(),
            params.grid,
            QuadratureSchedule::new(nodes).unwrap(),
            params.datum_extension,
        )
        .unwrap()
    };
    let coarse = build(32);
    let fine = build(64);
    let zero = GridVectorField::zeros(params.grid);
    let k_fine = k_map(&zero, 1.0, &fine).unwrap();
    let doubling = relative_gap(&k_map(&zero, 1.0, &coarse).unwrap(), &k_fine);
    let mut homogeneity = 0.0_f64;
    for sigma in [0.25, 0.5, 0.8] {
        let ks = k_map(&zero, sigma, &fine).unwrap();
        homogeneity = homogeneity.max(relative_gap(&ks, &k_fine.scaled(sigma * sigma)));
    }
    let seven = Line::new(
        doubling <= NODE_DOUBLING_LIMIT && homogeneity <= HOMOGENEITY_LIMIT,
        format!(
            "nodes 32 -> 64 change {doubling:.3e} (<= {NODE_DOUBLING_LIMIT:e}), \
             K(0,s) vs s^2 K(0,1) {homogeneity:.3e} (<= {HOMOGENEITY_LIMIT:e})"
        ),
    );

    let undamped = SolveParams {
        picard_tol: SMALL_DATA_TOL,
        damping: 1.0,
        max_iter: SMALL_DATA_ITERATIONS,
        ..params.clone()
    };
    let a = holder_norm(&trace, 1.0).unwrap();
    let eight = match picard_solve(1.0, &zero, &undamped, &fine) {
        Ok(sol) => {
            let stage = &sol.stages[0];
            let pass = stage.final_damping == 1.0
                && stage.iterations <= SMALL_DATA_ITERATIONS
                && sol.k_residual <= SMALL_DATA_TOL;
            Line::new(
                pass,
                format!(
                    "A = {a:.3}: {} undamped iterations (<= {SMALL_DATA_ITERATIONS}), residual {:.2e} (<= {SMALL_DATA_TOL:e}), damping {}",
                    stage.iterations, sol.k_residual, stage.final_damping
                ),
            )
        }
        Err(e) => Line::new(false, format!("A = {a:.3}: {e}")),
    };
    (seven, eight)
}

fn criterion_9(solved: &[Solved]) -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in solved {
        let r = &s.sol.residual;
        let gain = r.pressure_gain();
        pass &= r.relative <= RESIDUAL_LIMIT && gain >= PRESSURE_GAIN_FLOOR;
        parts.push(format!("{} residual {:.3e} gain {gain:.1}", s.name, r.relative));
    }
    Line::new(
        pass,
        format!(
            "interior residual (<= {RESIDUAL_LIMIT:e}), pressure gain (>= {PRESSURE_GAIN_FLOOR}): {}",
            parts.join(", ")
        ),
    )
}

fn criterion_10() -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, trace) in corpus() {
        let a = holder_norm(&trace, trace.beta).unwrap();
        let r = check_global_holder(&build_homogeneous_field(trace.clone()), trace.beta, HOLDER_PAIRS, 5).unwrap();
        let bound = HOLDER_CALIBRATION * a;
        pass &= r.pass && r.max_ratio <= bound;
        parts.push(format!("{name} {:.3} (<= {bound:.3})", r.max_ratio));
    }
    Line::new(
        pass,
        format!("compensated ratio over {HOLDER_PAIRS} pairs: {}", parts.join(", ")),
    )
}

fn main() -> ExitCode {
    // Accept and ignore libtest flags passed by `cargo test`.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let params = SolveParams::default();
    let mut lines: Vec<(usize, Line)> = Vec::new();
    let report = |n: usize, line: &Line| {
        println!(
            "criterion {n:>2} {}: {}",
            if line.pass { "PASS" } else { "FAIL" },
            line.detail
        );
    };

    let (swirl, one) = criterion_1(&params);
    report(1, &one);
    lines.push((1, one));
    let six = criterion_6();
    report(6, &six);
    let ten = criterion_10();
    report(10, &ten);
    let (seven, eight) = criteria_7_and_8(&params);
    report(7, &seven);
    report(8, &eight);

    let mut solved = vec![swirl];
    for (name, trace) in corpus().into_iter().skip(1) {
        solved.push(Solved::new(name, trace, &params));
    }
    let checks = [
        (2, criterion_2(&solved)),
        (3, criterion_3(&solved)),
        (4, criterion_4(&solved)),
        (5, criterion_5(&solved[1])),
        (9, criterion_9(&solved)),
    ];
    for (n, line) in checks {
        report(n, &line);
        lines.push((n, line));
    }
    lines.extend([(6, six), (7, seven), (8, eight), (10, ten)]);
    lines.sort_by_key(|(n, _)| *n);

    println!("\nsummary");
    for (n, line) in &lines {
        println!("criterion {n:>2} {}", if line.pass { "PASS" } else { "FAIL" });
    }
    let failed: Vec<String> = lines
        .iter()
        .filter(|(_, l)| !l.pass)
        .map(|(n, _)| n.to_string())
        .collect();
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
