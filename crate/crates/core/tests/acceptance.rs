//! Acceptance suite. Each test prints one `PASS`/`FAIL` line; run with
//! `cargo test --test acceptance -- --nocapture --test-threads=1` to see
//! them in order.

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ferrosim::cli::output::{parse_vtk, CSV_HEADER};
use ferrosim::cli::{main_with, EXIT_ASSUMPTION, EXIT_BLOWUP, EXIT_CONFIG, EXIT_OK, EXIT_SOLVER};
use ferrosim::driver::checkpoint::Checkpoint;
use ferrosim::driver::{parse_config_str, run, Collect, Outcome, Simulator};
use ferrosim::elliptic::{
    assemble_l_p, coercive_energy, dual_weights, estimate_inverse_norm, primal_norm_matrix, solve_elliptic,
    EllipticDofs, EllipticOptions, NormPair,
};
use ferrosim::fem::quadrature::QuadratureRule;
use ferrosim::loads::LoadSet;
use ferrosim::materials::tensor::Vec2;
use ferrosim::materials::{material_from_name, LameLaplace, MaterialModel, PolyPiezo};
use ferrosim::mesh::{build_structured_mesh, BcKind, BoundaryPartition, Mesh, Rect};
use ferrosim::parabolic::p_inf;
use ferrosim::verify::{
    dense_oracle_compare, gradient_check_h, lipschitz_probe_s, mms_elliptic, mms_parabolic, EllipticExact,
    ParabolicExact, ParabolicMms, ProbeSetup, ScaledStiffnessDerivative,
};

fn verdict(name: &str, passed: bool, started: Instant, detail: &str) {
    println!(
        "{} {name} ({:.1} s): {detail}",
        if passed { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    assert!(passed, "{name}: {detail}");
}

fn random_field(rng: &mut ChaCha8Rng, n: usize, amplitude: f64) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| [rng.gen_range(-amplitude..=amplitude), rng.gen_range(-amplitude..=amplitude)])
        .collect()
}

fn builtin(name: &str) -> Arc<dyn MaterialModel> {
    material_from_name(name, &Default::default()).unwrap()
}

fn clamped(mesh: &Mesh) -> BoundaryPartition {
    BoundaryPartition::uniform(mesh, BcKind::Dirichlet, BcKind::Dirichlet, BcKind::Neumann)
}

#[test]
fn cross_cancellation_and_coercivity() {
    let start = Instant::now();
    let mesh = build_structured_mesh(16, 16, Rect::unit()).unwrap();
    let partition = clamped(&mesh);
    let model = PolyPiezo::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = mesh.num_vertices();
    let p = random_field(&mut rng, n, 0.5);
    let dofs = EllipticDofs::new(&mesh, &partition);
    let a = assemble_l_p(&mesh, &dofs, &model, &p).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let u = random_field(&mut rng, n, 1.0);
        let phi: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let v = dofs.join(&u, &phi);
        let vav = a.pair(&v, &v);
        let energy = coercive_energy(&mesh, &model, &p, &u, &phi).unwrap();
        worst = worst.max((vav - energy).abs() / vav.abs());
    }
    let free = dofs.free();
    let af = a.principal_submatrix(&free).to_dense();
    let sym = (&af + af.transpose()) * 0.5;
    let lambda_min = sym.symmetric_eigenvalues().min();
    let passed = worst <= 1e-12 && lambda_min > 0.0;
    verdict(
        "cross-cancellation and coercivity",
        passed,
        start,
        &format!("max relative mismatch {worst:.2e} (<= 1e-12), smallest eigenvalue {lambda_min:.4e} (> 0)"),
    );
}

#[test]
fn bulk_energy_gradient_identity() {
    let start = Instant::now();
    let mut errors = Vec::new();
    let mut passed = true;
    for name in ["lame_laplace", "poly_piezo", "blowup_test"] {
        let e = gradient_check_h(builtin(name).as_ref(), 10).unwrap();
        passed &= e <= 1e-6;
        errors.push(format!("{name} {e:.2e}"));
    }
    let corrupted = ScaledStiffnessDerivative {
        inner: PolyPiezo::default(),
        factor: 1.01,
    };
    let e_bad = gradient_check_h(&corrupted, 10).unwrap();
    passed &= e_bad > 1e-6;
    verdict(
        "bulk-energy gradient identity",
        passed,
        start,
        &format!("relative errors {} (<= 1e-6); 1% corruption gives {e_bad:.2e} (> 1e-6)", errors.join(", ")),
    );
}

fn frozen_polarization(x: [f64; 2]) -> [f64; 2] {
    [0.3 * (std::f64::consts::PI * x[0]).cos(), 0.2 * x[1] * x[1]]
}

#[test]
fn elliptic_manufactured_solution() {
    let start = Instant::now();
    let ns = [8, 16, 32, 64];
    let constant = mms_elliptic(&ns, Arc::new(LameLaplace::default()), &EllipticExact::sine_poly()).unwrap();
    let exact = EllipticExact::sine_poly().with_polarization(frozen_polarization);
    let frozen = mms_elliptic(&ns, Arc::new(PolyPiezo::default()), &exact).unwrap();
    println!("constant coefficients\n{constant}\nfrozen polarization\n{frozen}");
    verdict(
        "elliptic manufactured solution",
        constant.passed && frozen.passed,
        start,
        &format!(
            "L2 orders {:.3} (constant) and {:.3} (frozen P), target 1.8",
            constant.order, frozen.order
        ),
    );
}

#[test]
fn parabolic_manufactured_solution() {
    let start = Instant::now();
    let dts = [1.0 / 20.0, 1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0];
    let r = mms_parabolic(&ParabolicMms::default(), &dts, &ParabolicExact::decaying_vortex()).unwrap();
    println!("{r}");
    verdict(
        "parabolic manufactured solution",
        r.passed,
        start,
        &format!("temporal order {:.3}, target 0.9", r.order),
    );
}

#[test]
fn decoupling_at_zero_polarization() {
    let start = Instant::now();
    let mesh = build_structured_mesh(16, 16, Rect::unit()).unwrap();
    let partition = clamped(&mesh);
    let model = LameLaplace::default();
    let n = mesh.num_vertices();
    let p = vec![[0.0; 2]; n];
    let dofs = EllipticDofs::new(&mesh, &partition);
    let a = assemble_l_p(&mesh, &dofs, &model, &p).unwrap();
    let off = dofs.phi.offset;
    let coupling = a
        .triplets()
        .filter(|&(i, j, _)| (i < off) != (j < off))
        .fold(0.0f64, |m, (_, _, v)| m.max(v.abs()));
    let scale = a.norm_inf();
    let loads = LoadSet::zero().with_f_d(|_, x| (3.0 * x[0]).sin() + x[1]);
    let s = solve_elliptic(&mesh, &partition, &model, &p, &loads, 0.0, &EllipticOptions::default()).unwrap();
    let u_inf = s.u.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let phi_inf = s.phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let passed = coupling <= 1e-12 * scale && u_inf <= 1e-12 && phi_inf > 0.0;
    verdict(
        "decoupling at zero polarization",
        passed,
        start,
        &format!(
            "coupling block max {coupling:.2e} vs 1e-12 x {scale:.3e}; |u|_inf {u_inf:.2e} (<= 1e-12) with |phi|_inf {phi_inf:.3e}"
        ),
    );
}

const BLOWUP_CONFIG: &str = r#"
[mesh]
nx = 8
ny = 8

[boundary]
p_dirichlet = []

[material]
name = "blowup_test"

[initial]
kind = "constant"
value = [0.6, 0.8]

[time]
t_final = 1.0
dt0 = 0.001
dt_min = 1e-6
dt_max = 0.001
blowup_norm_threshold = 1e3

[picard]
enabled = true
"#;

#[test]
fn blowup_time_detection() {
    let start = Instant::now();
    let cfg = parse_config_str(BLOWUP_CONFIG, &[]).unwrap();
    let r = run(&cfg, None, &mut Collect::default()).unwrap().report;
    let passed = (0.45..=0.5).contains(&r.t_hat) && r.outcome != Outcome::ReachedT;
    verdict(
        "blow-up time detection",
        passed,
        start,
        &format!(
            "t_hat {:.6} in [0.45, 0.5] against exact 0.5, outcome {} (not reached_T), |P|_inf {:.3e}",
            r.t_hat,
            r.outcome.as_str(),
            r.p_inf
        ),
    );
}

const PIEZO_CONFIG: &str = r#"
[mesh]
nx = 12
ny = 12

[boundary]
phi_dirichlet = ["left", "right"]

[material]
name = "poly_piezo"

[loads]
f_d = { kind = "sine_x", value = [0.5] }
t_p = { kind = "ramp_t", value = [0.1, 0.0], duration = 0.2 }

[initial]
kind = "random"
amplitude = 0.3
seed = 5

[time]
t_final = 0.5
dt0 = 0.01
dt_min = 0.01
dt_max = 0.01

[picard]
enabled = true
tol = 1e-12
max_iters = 100
"#;

#[test]
fn picard_uniqueness_and_determinism() {
    let start = Instant::now();
    let cfg = parse_config_str(PIEZO_CONFIG, &[]).unwrap();
    let problem = cfg.build().unwrap();
    let mut sim = Simulator::from_problem(&problem, cfg.elliptic_options());
    let picard = cfg.picard_config();
    let mut state = sim.equilibrate(0.0, problem.p0.clone()).unwrap();
    let mut worst: f64 = 0.0;
    let mut max_iters = 0;
    for _ in 0..50 {
        let (a, ia) = sim.advance_from(&state, 0.01, &picard, None).unwrap().unwrap();
        let guess: Vec<[f64; 2]> = state.p.iter().map(|v| [1.1 * v[0], 1.1 * v[1]]).collect();
        let (b, ib) = sim.advance_from(&state, 0.01, &picard, Some(&guess)).unwrap().unwrap();
        let diff = a.p.iter().flatten().zip(b.p.iter().flatten()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        worst = worst.max(diff);
        max_iters = max_iters.max(ia.max(ib));
        state = a;
    }
    let run_once = || {
        let mut obs = Collect {
            keep_snapshots: true,
            ..Collect::default()
        };
        let r = run(&cfg, None, &mut obs).unwrap();
        (r, obs.trajectory)
    };
    let (r1, t1) = run_once();
    let (r2, t2) = run_once();
    let bits = |s: &ferrosim::parabolic::State| -> Vec<u64> {
        s.p.iter()
            .chain(s.u.iter())
            .flatten()
            .chain(s.phi.iter())
            .map(|v| v.to_bits())
            .collect()
    };
    let identical = t1.records.len() == t2.records.len()
        && t1.records.iter().zip(&t2.records).all(|(a, b)| format!("{a:?}") == format!("{b:?}"))
        && t1.snapshots.iter().zip(&t2.snapshots).all(|(a, b)| bits(a) == bits(b))
        && bits(&r1.final_state) == bits(&r2.final_state);
    let passed = worst <= 1e-8 && identical && r1.report.accepted_steps == 50;
    verdict(
        "Picard uniqueness and determinism",
        passed,
        start,
        &format!(
            "max per-step difference {worst:.2e} (<= 1e-8), at most {max_iters} iterations; repeated runs bit-identical: {identical}"
        ),
    );
}

fn dense_inverse_norm(mesh: &Mesh, partition: &BoundaryPartition, model: &dyn MaterialModel, p: &[[f64; 2]]) -> f64 {
    let dofs = EllipticDofs::new(mesh, partition);
    let free = dofs.free();
    let a = assemble_l_p(mesh, &dofs, model, p).unwrap().principal_submatrix(&free).to_dense();
    let g = primal_norm_matrix(mesh, &dofs).principal_submatrix(&free).to_dense();
    let w0 = dual_weights(mesh, &dofs);
    let w_inv_sqrt = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(free.len(), free.iter().map(|&i| 1.0 / w0[i].sqrt())));
    let l = g.cholesky().expect("primal norm matrix is positive definite").l();
    let l_inv_t = l.transpose().try_inverse().unwrap();
    let b = w_inv_sqrt * a * l_inv_t;
    let sigma_min = b.singular_values().min();
    1.0 / sigma_min
}

#[test]
fn inverse_norm_probe() {
    let start = Instant::now();
    let mesh = build_structured_mesh(8, 8, Rect::unit()).unwrap();
    let partition = clamped(&mesh);
    let model = PolyPiezo::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = mesh.num_vertices();
    let p = random_field(&mut rng, n, 0.5);
    let est = estimate_inverse_norm(&mesh, &partition, &model, &p, NormPair::Energy).unwrap();
    let dense = dense_inverse_norm(&mesh, &partition, &model, &p);
    let rel = (est.c_p - dense).abs() / dense;
    let mut delta = random_field(&mut rng, n, 1e-3);
    delta[0] = [1e-3, delta[0][1]];
    let shifted: Vec<[f64; 2]> = p.iter().zip(&delta).map(|(a, d)| [a[0] + d[0], a[1] + d[1]]).collect();
    let est2 = estimate_inverse_norm(&mesh, &partition, &model, &shifted, NormPair::Energy).unwrap();
    let cont = (est2.c_p - est.c_p).abs() / est.c_p;
    let passed = rel <= 1e-6 && cont <= 0.1 && (p_inf(&delta) - 1e-3).abs() < 1e-15;
    verdict(
        "inverse-norm probe",
        passed,
        start,
        &format!(
            "C_P {:.10e} vs dense SVD {dense:.10e}, relative {rel:.2e} (<= 1e-6); continuity {cont:.2e} (<= 0.1)",
            est.c_p
        ),
    );
}

#[test]
fn dense_assembly_oracle() {
    let start = Instant::now();
    let loads = LoadSet::zero()
        .with_f_sigma(|t, x| [x[0] + t, x[1] * x[1]])
        .with_f_d(|_, x| x[0] * x[1])
        .with_f_p(|t, x| [1.0 + t, x[0]])
        .with_t_sigma(|_, x| [x[1], 1.0])
        .with_t_d(|_, x| x[0] - 0.5)
        .with_t_p(|_, x| [x[0] * x[1], 0.5]);
    let rule = QuadratureRule::order2();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (nx, ny) in [(1, 1), (2, 2), (2, 1)] {
        let mesh = build_structured_mesh(nx, ny, Rect::new(0.0, 0.0, 1.0, 0.7)).unwrap();
        for partition in [
            clamped(&mesh),
            BoundaryPartition::uniform(&mesh, BcKind::Neumann, BcKind::Dirichlet, BcKind::Dirichlet),
        ] {
            for name in ["lame_laplace", "poly_piezo", "blowup_test"] {
                let model = builtin(name);
                let p: Vec<[f64; 2]> = mesh.vertices.iter().map(|x| [0.4 * x[0] - 0.1, 0.3 * x[0] * x[1]]).collect();
                let dev = dense_oracle_compare(&mesh, &partition, model.as_ref(), &p, &loads, 0.3, &rule).unwrap();
                worst = worst.max(dev.max());
                cases += 1;
            }
        }
    }
    verdict(
        "dense assembly oracle",
        worst <= 1e-13,
        start,
        &format!("max deviation {worst:.2e} over {cases} cases (<= 1e-13)"),
    );
}

/// Largest spectral norm of the Hessian of the separation energy over a
/// polar grid of the disc `|P| <= m`, by central differences of its
/// gradient.
fn separation_hessian_bound(model: &dyn MaterialModel, m: f64) -> f64 {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..=40 {
        let r = m * i as f64 / 40.0;
        for k in 0..64 {
            let a = std::f64::consts::TAU * k as f64 / 64.0;
            let p = Vec2::new(r * a.cos(), r * a.sin());
            let mut jac = nalgebra::Matrix2::zeros();
            for j in 0..2 {
                let mut d = Vec2::zeros();
                d[j] = h;
                let col = (model.separation_grad(&(p + d)) - model.separation_grad(&(p - d))) / (2.0 * h);
                jac.set_column(j, &col);
            }
            worst = worst.max(jac.norm().max(jac.singular_values().max()));
        }
    }
    worst
}

#[test]
fn reduced_energy_decay() {
    let start = Instant::now();
    let model: Arc<dyn MaterialModel> = Arc::new(PolyPiezo::reduced());
    let mut setup = ProbeSetup::unit_square(16).unwrap();
    setup.seed = 10;
    let h_m = lipschitz_probe_s(&setup, model.clone(), 1.0, 20).unwrap().h_m;
    let l_sep = separation_hessian_bound(model.as_ref(), 1.0);
    let dt = 1.0 / h_m.max(l_sep);
    let mesh = setup.mesh.clone();
    let mut sim = Simulator::new(mesh, setup.partition.clone(), model, LoadSet::zero(), EllipticOptions::default());
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let p0 = random_field(&mut rng, sim.mesh.num_vertices(), 0.8);
    let mut state = sim.equilibrate(0.0, p0).unwrap();
    let imex = ferrosim::driver::PicardConfig::default();
    let mut energies = vec![sim.record(&state, dt, 0).unwrap().energy.reduced_total()];
    for _ in 0..200 {
        state = sim.advance(&state, dt, &imex).unwrap().unwrap().0;
        energies.push(sim.record(&state, dt, 1).unwrap().energy.reduced_total());
    }
    let scale = energies[0].abs();
    let worst_rise = energies
        .windows(2)
        .map(|w| (w[1] - w[0]) / scale)
        .fold(f64::NEG_INFINITY, f64::max);
    let passed = worst_rise <= 1e-12;
    verdict(
        "reduced energy decay",
        passed,
        start,
        &format!(
            "dt* = 1/max(h_M = {h_m:.3}, sup|D2 omega| = {l_sep:.3}) = {dt:.4e}; energy {:.6e} -> {:.6e} over 200 steps, \
             largest increase {worst_rise:.2e} of the initial energy (<= 1e-12)",
            energies[0],
            energies[200]
        ),
    );
}

const IO_CONFIG: &str = r#"
[mesh]
nx = 6
ny = 5
rect = [0.0, 0.0, 1.2, 1.0]

[boundary]
phi_dirichlet = ["left", "right"]

[material]
name = "poly_piezo"

[loads]
f_d = { kind = "sine_x", value = [0.5] }
t_p = { kind = "ramp_t", value = [0.1, 0.0], duration = 0.2 }

[initial]
kind = "random"
amplitude = 0.3
seed = 2

[time]
t_final = T_FINAL
dt0 = 0.01
dt_min = 0.01
dt_max = 0.01

[picard]
enabled = true
tol = 1e-12

[output]
cadence = 2
"#;

fn cli(args: &[&str]) -> i32 {
    main_with(std::iter::once("ferrosim").chain(args.iter().copied()))
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn csv_rows(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines.map(|l| l.split(',').map(|f| f.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn state_vec(s: &ferrosim::parabolic::State) -> Vec<f64> {
    s.p.iter().chain(s.u.iter()).flatten().chain(s.phi.iter()).copied().collect()
}

#[test]
fn io_contracts() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut notes = Vec::new();
    let mut passed = true;

    let full_cfg = write_config(d, "full.toml", &IO_CONFIG.replace("T_FINAL", "0.2"));
    let half_cfg = write_config(d, "half.toml", &IO_CONFIG.replace("T_FINAL", "0.1"));
    let full_out = d.join("full");
    let half_out = d.join("half");
    let code_full = cli(&["run", &full_cfg, "-o", full_out.to_str().unwrap()]);
    let code_half = cli(&["run", &half_cfg, "-o", half_out.to_str().unwrap()]);
    passed &= code_full == EXIT_OK && code_half == EXIT_OK;

    let (header, rows) = csv_rows(&full_out.join("timeseries.csv"));
    let schema = header == CSV_HEADER
        && header == "t,energy_total,energy_bulk,energy_sep,energy_exch,p_inf,p_h1,picard_iters,dt,elliptic_residual"
        && rows.len() == 11
        && rows.iter().all(|r| r.len() == 10);
    passed &= schema;
    notes.push(format!("CSV schema exact with {} rows: {schema}", rows.len()));

    let ckpt = Checkpoint::read(&full_out.join("checkpoint.txt")).unwrap();
    let snap = full_out.join("snapshots").join("step_000020.vtk");
    let vtk = parse_vtk(&fs::read_to_string(&snap).unwrap()).unwrap();
    let s = &ckpt.state;
    let n = s.p.len();
    let mut vtk_err: f64 = 0.0;
    for i in 0..n {
        let pol = vtk.vectors["polarization"][i];
        let disp = vtk.vectors["displacement"][i];
        vtk_err = vtk_err
            .max(max_diff(&pol, &[s.p[i][0], s.p[i][1], 0.0]))
            .max(max_diff(&disp, &[s.u[i][0], s.u[i][1], 0.0]))
            .max((vtk.scalars["potential"][i] - s.phi[i]).abs());
    }
    let vtk_ok = vtk_err <= 1e-12 && vtk.points.len() == n && vtk.cell_types.iter().all(|&c| c == 5);
    passed &= vtk_ok;
    notes.push(format!("VTK parse-back error {vtk_err:.2e} (<= 1e-12)"));

    let restart_code = cli(&[
        "run",
        &full_cfg,
        "-o",
        half_out.to_str().unwrap(),
        "--restart",
        half_out.join("checkpoint.txt").to_str().unwrap(),
    ]);
    let resumed = Checkpoint::read(&half_out.join("checkpoint.txt")).unwrap();
    let restart_err = max_diff(&state_vec(&resumed.state), &state_vec(&ckpt.state)).max((resumed.state.t - ckpt.state.t).abs());
    let (h2, rows2) = csv_rows(&half_out.join("timeseries.csv"));
    let csv_err = if rows2.len() == rows.len() && h2 == header {
        rows.iter().zip(&rows2).map(|(a, b)| max_diff(a, b)).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let restart_ok = restart_code == EXIT_OK && restart_err <= 1e-12 && csv_err <= 1e-12 && resumed.steps == ckpt.steps;
    passed &= restart_ok;
    notes.push(format!("restart state error {restart_err:.2e}, time-series error {csv_err:.2e} (<= 1e-12)"));

    let mut codes = Vec::new();
    let quiet = d.join("codes");
    let q = quiet.to_str().unwrap();
    let bad_dt = write_config(d, "bad_dt.toml", &IO_CONFIG.replace("T_FINAL", "0.1").replace("dt_min = 0.01", "dt_min = 0.5"));
    codes.push(("dt_min > dt0", cli(&["run", &bad_dt, "-o", q]), EXIT_CONFIG));
    let unknown = write_config(d, "unknown.toml", &IO_CONFIG.replace("T_FINAL", "0.1").replace("[picard]", "[picard]\nbogus = 1"));
    codes.push(("unknown key", cli(&["run", &unknown, "-o", q]), EXIT_CONFIG));
    codes.push(("missing file", cli(&["run", d.join("none.toml").to_str().unwrap(), "-o", q]), EXIT_CONFIG));
    codes.push(("unknown subcommand", cli(&["fly"]), EXIT_CONFIG));
    let lame = "[material]\nname = \"lame_laplace\"\n[time]\nt_final = 0.05\ndt0 = 0.01\ndt_min = 0.001\ndt_max = 0.01\n";
    let lame_cfg = write_config(d, "lame.toml", lame);
    codes.push(("check passes", cli(&["check", &lame_cfg, "-o", q, "--expect-decoupled"]), EXIT_OK));
    codes.push((
        "check fails",
        cli(&["check", &lame_cfg, "-o", q, "--set", "material.gamma=-1"]),
        EXIT_ASSUMPTION,
    ));
    let check_json: serde_json::Value = serde_json::from_str(&fs::read_to_string(quiet.join("check.json")).unwrap()).unwrap();
    let names_failure = check_json["failed"].as_array().is_some_and(|f| f.iter().any(|v| v == "coercivity"));
    codes.push(("run with failing coercivity", cli(&["run", &lame_cfg, "-o", q, "--set", "material.gamma=-1"]), EXIT_ASSUMPTION));
    let floating = format!(
        "{lame}[boundary]\nu_dirichlet = []\nphi_dirichlet = []\n[checks]\nassume_invertible = true\n[output]\nsnapshots = false\n"
    );
    let floating_cfg = write_config(d, "floating.toml", &floating);
    codes.push(("singular operator", cli(&["run", &floating_cfg, "-o", q]), EXIT_SOLVER));
    let blowup_cfg = write_config(d, "blowup.toml", &format!("{BLOWUP_CONFIG}[output]\nsnapshots = false\ncadence = 100\n").replace("dt0 = 0.001", "dt0 = 0.01").replace("dt_max = 0.001", "dt_max = 0.01"));
    let blowup_out = d.join("blowup");
    codes.push(("blow-up before T", cli(&["run", &blowup_cfg, "-o", blowup_out.to_str().unwrap()]), EXIT_BLOWUP));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(blowup_out.join("report.json")).unwrap()).unwrap();
    let report_ok = report["outcome"] != "reached_T" && report["t_hat"].as_f64().is_some_and(|t| t < 1.0);
    let wrong: Vec<String> = codes
        .iter()
        .filter(|(_, got, want)| got != want)
        .map(|(what, got, want)| format!("{what}: got {got}, want {want}"))
        .collect();
    passed &= wrong.is_empty() && names_failure && report_ok;
    notes.push(format!(
        "{} exit-code cases, mismatches [{}], check JSON names the failure: {names_failure}, blow-up report written: {report_ok}",
        codes.len(),
        wrong.join("; ")
    ));
    verdict("I/O contracts", passed, start, &notes.join("; "));
}
