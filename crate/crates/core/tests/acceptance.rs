//! End-to-end acceptance checks. Every criterion prints one PASS/FAIL line;
//! the test fails if any of them does.

use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xattract::criticality::{
    classify, hls_sharp_constant, make_negative_energy_data, rayleigh_quotient, CriticalityClass,
    NegativeEnergyOptions,
};
use xattract::dynamics::{run, step, Verdict};
use xattract::energy::{energy_decomposition, free_energy, virial_g, virial_g_expanded};
use xattract::experiments::{
    experiment_dichotomy, experiment_eps, experiment_virial, DichotomyReport, RunConfig,
};
use xattract::potential::solve_potential;
use xattract::{Density, Grid};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn canned(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name);
    RunConfig::load(&path).unwrap()
}

fn grid(d: usize, r_max: f64, n: usize) -> Arc<Grid> {
    Grid::new(d, r_max, n).unwrap().shared()
}

fn random_field(rng: &mut ChaCha8Rng, g: &Arc<Grid>) -> Density {
    let r_max = g.r_max();
    let mut values = vec![0.0; g.len()];
    let bumps = rng.gen_range(1..=3);
    for _ in 0..bumps {
        let centre = rng.gen_range(0.0..0.5 * r_max);
        let width = rng.gen_range(0.05..0.2 * r_max);
        let height = rng.gen_range(0.0..10.0);
        let ball = rng.gen_bool(0.3);
        for (v, &r) in values.iter_mut().zip(g.centers()) {
            let x = (r - centre) / width;
            *v += height
                * if ball {
                    f64::from(u8::from(x.abs() < 1.0))
                } else {
                    (-x * x).exp()
                };
        }
    }
    if rng.gen_bool(0.3) {
        for v in values.iter_mut() {
            *v *= rng.gen_range(0.0..1.0);
        }
    }
    Density::new(g.clone(), values).unwrap()
}

fn mass_conservation() -> Outcome {
    let mut details = Vec::new();
    let mut passed = true;
    let mut sub = canned("subcritical.cfg");
    sub.n = 1024;
    let mut eps = sub.clone();
    eps.eps = 1e-2;
    let mut sup = canned("supercritical.cfg");
    sup.n = 1024;
    for (label, cfg, horizon) in [
        ("subcritical", &sub, sub.t_end),
        ("supercritical", &sup, 0.012),
        ("eps=1e-2", &eps, eps.t_end),
    ] {
        let start = Instant::now();
        let mut ctrl = cfg.step_control();
        ctrl.t_end = horizon;
        let out = run(cfg.initial_state().unwrap(), &ctrl, usize::MAX).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let ok = out.max_step_mass_drift < 1e-12 && secs < 60.0;
        passed &= ok;
        details.push(format!(
            "{label}: drift {:.1e} in {} steps, {secs:.0}s",
            out.max_step_mass_drift, out.steps
        ));
    }
    outcome(passed, details.join("; "))
}

fn poisson_ball() -> Outcome {
    let exact = |r: f64| {
        if r < 1.0 {
            (3.0 - r * r) / (8.0 * PI)
        } else {
            1.0 / (4.0 * PI * r)
        }
    };
    let error = |n: usize| {
        let g = grid(3, 2.0, n);
        let v = solve_potential(&Density::ball(g.clone(), 1.0, 3.0 / (4.0 * PI)).unwrap()).unwrap();
        let err = g
            .centers()
            .iter()
            .zip(v.values())
            .map(|(&r, &x)| ((x - exact(r)) / exact(r)).abs())
            .fold(0.0f64, f64::max);
        (err, g.dr())
    };
    let (coarse, dr_coarse) = error(512);
    let (fine, dr_fine) = error(1024);
    let ratio = coarse / fine;
    let passed = (3.2..=4.8).contains(&ratio)
        && coarse <= 2.0 * dr_coarse * dr_coarse
        && fine <= 2.0 * dr_fine * dr_fine;
    outcome(
        passed,
        format!("max rel error {coarse:.3e} (n=512), {fine:.3e} (n=1024), ratio {ratio:.3}"),
    )
}

fn energy_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_split = 0.0f64;
    let mut worst_virial = 0.0f64;
    for _ in 0..100 {
        let d = rng.gen_range(3..=5);
        let g = grid(d, rng.gen_range(2.0..10.0), rng.gen_range(64..512));
        let u = random_field(&mut rng, &g);
        let w = random_field(&mut rng, &g);
        let (a1, a2) = (rng.gen_range(1e-3..=1.0), rng.gen_range(1e-3..=1.0));
        let e = free_energy(&u, &w, a1, a2).unwrap();
        let (sq, res) = energy_decomposition(&u, &w, a1, a2).unwrap();
        let scale = e.abs().max(sq.abs()).max(res.abs());
        worst_split = worst_split.max((sq + res - e).abs() / scale);
        let g_short = virial_g(&u, &w, a1, a2).unwrap();
        let g_long = virial_g_expanded(&u, &w, a1, a2).unwrap();
        let target = 2.0 * (d as f64 - 2.0) * e;
        worst_virial = worst_virial
            .max((g_short - target).abs() / target.abs())
            .max((g_long - target).abs() / target.abs());
    }
    outcome(
        worst_split <= 1e-12 && worst_virial <= 1e-12,
        format!("E split {worst_split:.1e}, G = 2(d-2)E {worst_virial:.1e}"),
    )
}

fn energy_dissipation(report: &DichotomyReport) -> Outcome {
    let t = &report.sub.trajectory;
    let mut worst = f64::NEG_INFINITY;
    let mut monotone = true;
    for w in t.windows(2) {
        let rise = w[1].energy - w[0].energy;
        worst = worst.max(rise);
        if rise > 1e-8 + 1e-4 * w[0].energy.abs() {
            monotone = false;
        }
    }
    let dissipated: f64 = t
        .windows(2)
        .map(|w| 0.5 * (w[0].dissipation + w[1].dissipation) * (w[1].time - w[0].time))
        .sum();
    let e0 = t[0].energy;
    let excess = t.last().unwrap().energy + dissipated - e0;
    let ledger = excess <= 0.05 * e0.abs();
    outcome(
        monotone && ledger,
        format!(
            "{} reports, largest rise {worst:.2e}, ledger E(T) + int D - E(0) = {excess:.2e} (|E0| = {:.3})",
            t.len(),
            e0.abs()
        ),
    )
}

fn virial_identity() -> Outcome {
    let report = experiment_virial(&canned("virial.cfg")).unwrap();
    let passed = !report.partial
        && matches!(report.coarse.verdict, Verdict::CompletedGlobal)
        && report.coarse.max_defect <= 0.02
        && report.fine.max_defect < report.coarse.max_defect;
    outcome(
        passed,
        format!(
            "defect {:.2e} (n={}), {:.2e} (n={}), slope {:.2}",
            report.coarse.max_defect,
            report.coarse.n,
            report.fine.max_defect,
            report.fine.n,
            report.slope
        ),
    )
}

fn unit_sphere_area(d: usize) -> f64 {
    let mut x = if d.is_multiple_of(2) { 1.0 } else { 0.5 };
    let mut gamma = if d.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    while 2.0 * x < d as f64 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(d as f64 / 2.0) / gamma
}

/// `H[f, f] / |f|_p^2` for a radial profile on all of R^d, using Newton's
/// theorem and trapezoidal quadrature in `r = tan(theta)`.
fn quotient_by_quadrature(d: usize, f: impl Fn(f64) -> f64) -> f64 {
    let steps = 400_000;
    let h = 0.5 * PI / steps as f64;
    let p = 2.0 * d as f64 / (d as f64 + 2.0);
    let sigma = unit_sphere_area(d);
    let point = |k: usize| {
        let theta = (k as f64 * h).min(0.5 * PI - 1e-12);
        let r = theta.tan();
        let jac = 1.0 / theta.cos().powi(2);
        (r, f(r), jac)
    };
    let (mut enclosed, mut h_integral, mut lp) = (0.0, 0.0, 0.0);
    let mut prev = point(0);
    for k in 1..=steps {
        let cur = point(k);
        let shell = |(r, fr, jac): (f64, f64, f64)| fr * r.powi(d as i32 - 1) * jac;
        let before = enclosed;
        enclosed += 0.5 * h * (shell(prev) + shell(cur));
        let outer = |(r, fr, jac): (f64, f64, f64), m: f64| fr * r * m * jac;
        h_integral += 0.5 * h * (outer(prev, before) + outer(cur, enclosed));
        let power = |(r, fr, jac): (f64, f64, f64)| fr.powf(p) * r.powi(d as i32 - 1) * jac;
        lp += 0.5 * h * (power(prev) + power(cur));
        prev = cur;
    }
    let h_total = 2.0 * sigma * sigma * h_integral;
    let norm = (sigma * lp).powf(1.0 / p);
    h_total / (norm * norm)
}

fn hls_constant() -> Outcome {
    let mut details = Vec::new();
    let mut passed = true;
    for d in [3usize, 4] {
        let formula: f64 = hls_sharp_constant(d).unwrap();
        let expo = -(d as f64 + 2.0) / 2.0;
        let optimizer = quotient_by_quadrature(d, |r| (1.0 + r * r).powf(expo));
        let rel = (optimizer - formula).abs() / formula;
        let mut gaussians = Vec::new();
        for width in [0.5, 1.0, 2.0] {
            let q = quotient_by_quadrature(d, |r| (-(r / width).powi(2)).exp());
            let g = grid(d, 12.0 * width, 2048);
            let discrete = rayleigh_quotient(
                &Density::from_profile(g, |r| (-(r / width).powi(2)).exp()).unwrap(),
            )
            .unwrap();
            passed &= q < formula && discrete < formula;
            gaussians.push(q);
        }
        passed &= rel <= 1e-3;
        details.push(format!(
            "d={d}: C {formula:.6} vs quadrature {optimizer:.6} (rel {rel:.1e}), Gaussian quotient {:.6}",
            gaussians[1]
        ));
    }
    outcome(passed, details.join("; "))
}

fn criticality_sign() -> Outcome {
    let (a, d, n) = (0.1, 3, 2048);
    let class = classify::<f64>(d, a, a).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = f64::INFINITY;
    let mut subcritical_ok = class.class == CriticalityClass::Subcritical;
    let p = 2.0 * d as f64 / (d as f64 + 2.0);
    for _ in 0..200 {
        let g = grid(d, rng.gen_range(2.0..20.0), n);
        let u = random_field(&mut rng, &g);
        let w = random_field(&mut rng, &g);
        let e = free_energy(&u, &w, a, a).unwrap();
        let scale = a * u.lp_norm(p).unwrap().powi(2) + a * w.lp_norm(p).unwrap().powi(2);
        worst = worst.min(e / scale);
        subcritical_ok &= e >= -0.02 * scale;
    }
    let sup_alpha = 1e-3;
    let g = grid(d, 25.0, n);
    let data = make_negative_energy_data(
        d,
        sup_alpha,
        sup_alpha,
        &g,
        &NegativeEnergyOptions::default(),
    )
    .unwrap();
    let (square, _) = energy_decomposition(&data.u0, &data.w0, sup_alpha, sup_alpha).unwrap();
    let supercritical_ok = data.energy < 0.0 && square.abs() < 1e-10 * data.energy.abs();
    outcome(
        subcritical_ok && supercritical_ok,
        format!(
            "ratio {:.4}: min E/(a|u|^2 + a|w|^2) = {worst:.4}; supercritical E0 = {:.4e}, E_square = {:.1e}",
            class.ratio, data.energy, square
        ),
    )
}

fn dichotomy(report: &DichotomyReport, secs: f64) -> Outcome {
    let sup_bounded = report
        .sub
        .trajectory
        .iter()
        .all(|r| r.sup_u.is_finite() && r.sup_w.is_finite() && r.sup_u < 1e3 && r.sup_w < 1e3);
    let passed = report.holds() && sup_bounded && secs < 600.0;
    outcome(
        passed,
        format!(
            "sub {} at t={}, super {} at t*={:.4e} (1.5 x bound = {:.4e}), I decreasing {}, {secs:.0}s",
            report.sub.verdict.label(),
            report.sub.final_state.time(),
            report.sup.verdict.label(),
            report.sup.verdict.blow_up_time().unwrap_or(f64::NAN),
            1.5 * report.virial_bound,
            report.moment_decreasing
        ),
    )
}

fn epsilon_convergence() -> Outcome {
    let study = experiment_eps(&canned("eps_study.cfg"), &[1e-2, 1e-3, 1e-4]).unwrap();
    let totals: Vec<String> = study
        .gaps
        .iter()
        .map(|g| {
            g.as_ref()
                .map_or("none".to_string(), |g| format!("{:.3e}", g.total()))
        })
        .collect();
    outcome(
        study.gaps_decreasing(),
        format!("L1 gaps {}", totals.join(" > ")),
    )
}

fn exchange_symmetry() -> Outcome {
    let mut cfg = canned("eps_study.cfg");
    cfg.mass_w = cfg.mass_u;
    cfg.scale_w = cfg.scale_u;
    cfg.initial_kind = xattract::experiments::InitialKind::Gaussian;
    cfg.alpha1 = 0.3;
    cfg.alpha2 = 0.3;
    cfg.n = 1024;
    cfg.t_end = 1.0;
    let mut state = cfg.initial_state().unwrap();
    let ctrl = cfg.step_control();
    let mass = state.u().mass();
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut steps = 0;
    while state.time() < ctrl.t_end && start.elapsed().as_secs_f64() < 60.0 {
        state = step(&state, &ctrl).unwrap().0;
        worst = worst.max(state.u().l1_distance(state.w()).unwrap());
        steps += 1;
    }
    outcome(
        worst <= 1e-12 * mass,
        format!(
            "max |u - w|_1 = {worst:.1e} over {steps} steps to t = {:.3}",
            state.time()
        ),
    )
}

fn report_line(k: usize, name: &str, o: &Outcome) {
    let verdict = if o.passed { "PASS" } else { "FAIL" };
    // written straight to stderr so the line shows without --nocapture
    let _ = writeln!(
        std::io::stderr(),
        "acceptance {k:>2} {name}: {verdict} ({})",
        o.detail
    );
}

#[test]
fn acceptance_criteria() {
    let mut failures = Vec::new();
    let mut check = |k: usize, name: &str, o: Outcome| {
        report_line(k, name, &o);
        if !o.passed {
            failures.push(format!("{k} {name}"));
        }
    };
    check(1, "mass conservation", mass_conservation());
    check(2, "Poisson oracle", poisson_ball());
    check(3, "energy identities", energy_identities());

    let start = Instant::now();
    let report =
        experiment_dichotomy(&canned("subcritical.cfg"), &canned("supercritical.cfg")).unwrap();
    let dichotomy_secs = start.elapsed().as_secs_f64();

    check(4, "energy dissipation", energy_dissipation(&report));
    check(5, "virial identity", virial_identity());
    check(6, "HLS sharp constant", hls_constant());
    check(7, "criticality sign", criticality_sign());
    check(8, "dichotomy", dichotomy(&report, dichotomy_secs));
    check(9, "epsilon convergence", epsilon_convergence());
    check(10, "exchange symmetry", exchange_symmetry());
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
