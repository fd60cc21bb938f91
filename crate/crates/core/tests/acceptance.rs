//! Acceptance criteria 1–10. Each test prints one PASS/FAIL line.

use std::io::Write as _;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use evolve_surf::coefficients::{estimate_c_sharp, horizon_from_dilation, lambda_select, m_quantities, smallness_report, SmallnessOptions};
use evolve_surf::diagnostics::{decay_report, energy_report, mms_convergence, MmsOptions};
use evolve_surf::grid::linspace;
use evolve_surf::operator::{assemble_a, assemble_b_parts, assemble_l, verify_anisotropic_identities, OperatorTag};
use evolve_surf::sparse::{CsrMatrix, SolverOptions};
use evolve_surf::timestepper::{solve_direct, solve_picard, NoForcing, PicardOptions};
use evolve_surf::{Chart, Diffusion, GridSpec, Preset, Rect, SeparableMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Written to the process stdout directly so the line survives libtest capture.
fn report(id: u32, ok: bool, title: &str, detail: String) {
    let line = format!("[{}] criterion {id}: {title} ({detail})\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(ok, "criterion {id} failed: {detail}");
}

fn chart(p: Preset, horizon: f64) -> Chart {
    Chart::preset(p, Rect::unit(), horizon).unwrap()
}

fn within(elapsed: Duration, budget_secs: f64) -> bool {
    elapsed.as_secs_f64() < budget_secs
}

const GRAPH: Preset = Preset::GraphOscillation { epsilon: 0.05, omega: 1.0 };

#[test]
fn criterion_01_metric_identities() {
    let start = Instant::now();
    let presets = [
        Preset::FlatStatic,
        Preset::IsotropicScaling { gamma: 1.0 },
        Preset::GraphOscillation { epsilon: 0.3, omega: 2.0 },
        Preset::TranslatingPatch { speed: 1.5 },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst = 0.0_f64;
    let mut min_det = f64::INFINITY;
    for p in presets {
        let c = chart(p, 1.0);
        for _ in 0..10_000 {
            let x = [rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0)];
            let t = rng.gen_range(0.0..=1.0);
            let m = c.metric(x, t).unwrap();
            worst = worst.max(m.inverse_defect());
            min_det = min_det.min(m.det);
        }
    }
    let elapsed = start.elapsed();
    let ok = worst <= 1e-12 && min_det > 0.0 && within(elapsed, 1.0);
    report(1, ok, "metric identities", format!("max |g⁻¹g − I| = {worst:.2e}, min 𝒢 = {min_det:.3}, {elapsed:.2?}"));
}

#[test]
fn criterion_02_operator_reduction() {
    let start = Instant::now();
    let g = GridSpec::unit_square(32).unwrap();
    let a = assemble_a(&g, 1.0, 1.0).unwrap().matrix;
    let one = Diffusion::constant(1.0);
    let mut flat = 0.0_f64;
    let mut scaling = 0.0_f64;
    for t in [0.0, 0.5, 1.0] {
        let l = assemble_l(&chart(Preset::FlatStatic, 1.0), &one, &g, t).unwrap();
        flat = flat.max(l.matrix.max_abs_diff(&a));
        let l = assemble_l(&chart(Preset::IsotropicScaling { gamma: 1.0 }, 1.0), &one, &g, t).unwrap();
        let expect = a.linear_combination((-2.0 * t).exp(), &CsrMatrix::identity(g.len()), 2.0);
        scaling = scaling.max(l.matrix.max_abs_diff(&expect));
    }
    let elapsed = start.elapsed();
    let ok = flat <= 1e-12 && scaling <= 1e-10 && within(elapsed, 1.0);
    report(2, ok, "operator reduction", format!("flat {flat:.2e}, scaling {scaling:.2e}, {elapsed:.2?}"));
}

#[test]
fn criterion_03_decomposition() {
    let g = GridSpec::unit_square(32).unwrap();
    let c = chart(GRAPH, 2.0 * PI);
    let mut worst = 0.0_f64;
    for kappa in [Diffusion::constant(1.0), Diffusion::bump(1.0, 0.2)] {
        let times = linspace(0.2, 2.0 * PI - 0.2, 5);
        let sel = lambda_select(&c, &kappa, &g, &times, 0.05).unwrap();
        let a = assemble_a(&g, sel.lambda1, sel.lambda2).unwrap();
        for &t in &times {
            let b = assemble_b_parts(&c, &kappa, &g, sel.lambda1, sel.lambda2, t).unwrap();
            let l = assemble_l(&c, &kappa, &g, t).unwrap();
            worst = worst.max(b.sum().matrix.max_abs_diff(&l.minus(&a, OperatorTag::B).matrix));
        }
    }
    report(3, worst <= 1e-10, "B₁+…+B₅ = L − A", format!("max entry difference {worst:.2e}"));
}

#[test]
fn criterion_04_relative_bound() {
    let g = GridSpec::unit_square(32).unwrap();
    let c = chart(GRAPH, 2.0 * PI);
    let kappa = Diffusion::constant(1.0);
    let times = linspace(0.0, 2.0 * PI, 33);
    let sel = lambda_select(&c, &kappa, &g, &times, 0.05).unwrap();
    let a = assemble_a(&g, sel.lambda1, sel.lambda2).unwrap();
    let m = m_quantities(&c, &kappa, sel.lambda1, sel.lambda2, &g, &times).unwrap();
    let c_sharp = estimate_c_sharp(&a, &g, 16, 42).unwrap();
    let bound = 2.0 * c_sharp * m.sum(5) * 1.1;
    let bs: Vec<_> = linspace(0.0, 2.0 * PI, 9)
        .iter()
        .map(|&t| assemble_l(&c, &kappa, &g, t).unwrap().minus(&a, OperatorTag::B))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut violations = 0;
    let mut worst = 0.0_f64;
    for k in 0..100 {
        // alternate rough fields and smooth low-mode combinations
        let f: Vec<f64> = if k % 2 == 0 {
            (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()
        } else {
            let coefs: Vec<(usize, usize, f64)> =
                (0..6).map(|_| (rng.gen_range(1..5), rng.gen_range(1..5), rng.gen_range(-1.0..1.0))).collect();
            g.sample(|x| coefs.iter().map(|&(p, q, w)| w * (p as f64 * PI * x[0]).sin() * (q as f64 * PI * x[1]).sin()).sum())
        };
        let af = g.l2_norm(&a.apply(&f));
        for b in &bs {
            let r = g.l2_norm(&b.apply(&f)) / (bound * af);
            worst = worst.max(r);
            if r > 1.0 {
                violations += 1;
            }
        }
    }
    report(
        4,
        violations == 0,
        "‖Bf‖ ≤ 2C♯Σℳ‖Af‖·1.1",
        format!("C♯ = {c_sharp:.4}, Σℳ = {:.4}, max ratio to bound {worst:.3}, violations {violations}", m.sum(5)),
    );
}

#[test]
fn criterion_05_heat_oracle_and_mms() {
    let start = Instant::now();
    let g = GridSpec::unit_square(63).unwrap();
    let c = chart(Preset::FlatStatic, 0.05);
    let one = Diffusion::constant(1.0);
    let v0 = g.sample(|x| (PI * x[0]).sin() * (PI * x[1]).sin());
    let tr = solve_direct(&c, &one, &g, &v0, 0.05, 1e-3, 0.5, &NoForcing, SolverOptions::default()).unwrap();
    let decay = (-2.0 * PI * PI * 0.05).exp();
    let exact: Vec<f64> = v0.iter().map(|v| decay * v).collect();
    let peak = exact.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let err = tr.last().values.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / peak;

    let sol = SeparableMode::unit(1.0);
    let mut orders = Vec::new();
    for p in [Preset::FlatStatic, GRAPH] {
        let t = mms_convergence(&chart(p, 1.0), &one, &sol, &MmsOptions::default()).unwrap();
        orders.push((p.name(), t.fitted_space_order, t.fitted_time_order));
    }
    let elapsed = start.elapsed();
    let in_band = |o: &[f64; 2]| o.iter().all(|v| (1.8..=2.2).contains(v));
    let ok = err <= 1e-3 && orders.iter().all(|(_, s, t)| in_band(s) && in_band(t)) && within(elapsed, 30.0);
    let detail = orders
        .iter()
        .map(|(n, s, t)| format!("{n}: space {:.3}/{:.3}, time {:.3}/{:.3}", s[0], s[1], t[0], t[1]))
        .collect::<Vec<_>>()
        .join("; ");
    report(5, ok, "heat oracle and MMS orders", format!("eigenmode rel. error {err:.2e}; {detail}; {elapsed:.2?}"));
}

fn energy_residual(p: Preset, n: usize, dt: f64) -> f64 {
    let g = GridSpec::unit_square(n).unwrap();
    let horizon = 0.1;
    let c = chart(p, horizon);
    let one = Diffusion::constant(1.0);
    let v0 = g.sample(|x| (PI * x[0]).sin() * (PI * x[1]).sin());
    let tr = solve_direct(&c, &one, &g, &v0, horizon, dt, 0.5, &NoForcing, SolverOptions::default()).unwrap();
    energy_report(&tr, &c, &one, &g).unwrap().max_residual_rel()
}

#[test]
fn criterion_06_energy_equality() {
    let flat = energy_residual(Preset::FlatStatic, 63, 1e-3);
    let graph = energy_residual(GRAPH, 63, 1e-3);
    let coarse = energy_residual(GRAPH, 31, 2e-3);
    let order = (coarse / graph).log2();
    let ok = flat <= 1e-3 && graph <= 5e-3 && order >= 1.0;
    report(
        6,
        ok,
        "energy equality",
        format!("flat {flat:.2e}, graph_oscillation {graph:.2e}, refinement order {order:.2}"),
    );
}

#[test]
fn criterion_07_decay() {
    let g = GridSpec::unit_square(31).unwrap();
    let c = chart(Preset::FlatStatic, 1.0);
    let one = Diffusion::constant(1.0);
    let mut worst = 0.0_f64;
    for (p, q) in [(1, 1), (1, 2), (2, 3)] {
        let v0 = g.sample(|x| (p as f64 * PI * x[0]).sin() * (q as f64 * PI * x[1]).sin());
        let tr = solve_direct(&c, &one, &g, &v0, 1.0, 1e-2, 0.5, &NoForcing, SolverOptions::default()).unwrap();
        let d = decay_report(&tr, &c, &g, 0.1, 1.0).unwrap();
        worst = worst.max(d.sup_bound);
    }
    report(7, worst.is_finite() && worst <= 1.0, "t^{1/2} decay bound", format!("sup ratio {worst:.3e}"));
}

#[test]
fn criterion_08_picard_contraction() {
    let start = Instant::now();
    let preset = Preset::GraphOscillation { epsilon: 0.01, omega: 1.0 };
    let period = 2.0 * PI;
    let g = GridSpec::unit_square(32).unwrap();
    let one = Diffusion::constant(1.0);
    let scan = chart(preset, period);
    let opts = SmallnessOptions { margin: 0.001, ..Default::default() };
    let rep = smallness_report(&scan, &one, &g, &linspace(0.0, period, 65), &opts).unwrap();

    let horizon = 0.1;
    let c = chart(preset, horizon);
    let v0 = g.sample(|x| (PI * x[0]).sin() * (PI * x[1]).sin());
    let popts = PicardOptions { tol: 1e-8, ..Default::default() };
    let (pt, hist) = solve_picard(&c, &one, &g, rep.lambda1(), rep.lambda2(), &v0, horizon, 1e-3, &popts).unwrap();
    let direct = solve_direct(&c, &one, &g, &v0, horizon, 1e-3, 0.5, &NoForcing, SolverOptions::default()).unwrap();
    let mut diff = 0.0_f64;
    let mut peak = 0.0_f64;
    for (a, b) in pt.states.iter().zip(&direct.states) {
        for (x, y) in a.iter().zip(b) {
            diff = diff.max((x - y).abs());
            peak = peak.max(y.abs());
        }
    }
    let rel = diff / peak;
    let elapsed = start.elapsed();
    let ok = rep.condition_thm26 && hist.converged && hist.max_ratio() <= 0.55 && rel <= 1e-6 && within(elapsed, 60.0);
    report(
        8,
        ok,
        "Picard contraction",
        format!(
            "condition lhs {:.4} ≤ {:.4}: {}, iterations {}, max ratio {:.3}, agreement {rel:.2e}, {elapsed:.2?}",
            rep.lhs[2],
            evolve_surf::coefficients::SMALLNESS_THRESHOLD,
            rep.condition_thm26,
            hist.iterations,
            hist.max_ratio()
        ),
    );
}

#[test]
fn criterion_09_condition_arithmetic() {
    let t = horizon_from_dilation(f64::INFINITY, 1.0, 2.0, 1.0);
    let expect = 0.5 * (257.0f64 / 256.0).ln();
    let err = (t - expect).abs();
    report(9, err <= 1e-12, "T_* arithmetic", format!("T_* = {t:.10}, |error| {err:.1e}"));
}

#[test]
fn criterion_10_anisotropic_oracles() {
    let domain = Rect::new(1.0, 2.0, 1.0, 2.0).unwrap();
    let coarse = GridSpec::new(domain, 32, 32).unwrap();
    let fine = GridSpec::new(domain, 65, 65).unwrap();
    let mut ratios = Vec::new();
    for (l1, l2) in [(1.0, 1.0), (0.5, 2.0)] {
        let a = verify_anisotropic_identities(&coarse, l1, l2).unwrap();
        let b = verify_anisotropic_identities(&fine, l1, l2).unwrap();
        ratios.push((a.fundsol_residual / b.fundsol_residual, a.scaled_heat_residual / b.scaled_heat_residual));
    }
    let ok = ratios.iter().all(|(f, h)| (3.5..=4.5).contains(f) && (3.5..=4.5).contains(h));
    let detail = ratios.iter().map(|(f, h)| format!("fundsol {f:.3}, heat {h:.3}")).collect::<Vec<_>>().join("; ");
    report(10, ok, "anisotropic oracles", detail);
}
