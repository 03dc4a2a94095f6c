//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runtime budgets are part of each criterion.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kvwave::config::{parse_config, ConfigErrorKind};
use kvwave::diagnostics::{
    check_decay_bound, check_prototype_bounds, decay_constant, energy_monotonicity,
    prototype_derivative_identity, regular_identity_residual, weak_energy,
    weak_identity_residual, DecayCertificate, EnergyTrace,
};
use kvwave::evolution::{evolve, exponential_formula, integrate, IntegratorSpec, Method, Model};
use kvwave::resolvent::{resolvent, solve_resolvent, verify_m_dissipativity, ResolventProblem};
use kvwave::run::run_simulate;
use kvwave::state::{dissipativity_gap, h_distance};
use kvwave::{Error, InitialData, ModalState, SpectralDomain};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn state(d: &SpectralDomain, a: &[f64], b: &[f64]) -> ModalState {
    ModalState::from_parts(d, a.to_vec(), b.to_vec()).unwrap()
}

/// Root of ξ³ + 2ξ - 1 on [0, 1] by plain bisection.
fn cubic_oracle() -> f64 {
    let p = |x: f64| x * x * x + 2.0 * x - 1.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn c1_single_mode_resolvent() -> Outcome {
    let d = SpectralDomain::interval(PI, 1).unwrap();
    let problem = ResolventProblem::new(1.0, vec![0.0], vec![1.0]);
    let sol = solve_resolvent(&d, &problem, 1e-12).map_err(|e| e.to_string())?;
    let xi = cubic_oracle();
    let dv = (sol.v[0] - xi).abs();
    let dchi = (sol.chi_star - sol.v[0] * sol.v[0]).abs();
    ensure(dv <= 1e-10, || format!("|v - xi| = {dv:e}"))?;
    ensure(dchi <= 1e-10, || format!("|chi - v^2| = {dchi:e}"))?;
    Ok(format!(
        "v = {:.15}, chi* = {:.15}, |dv| = {dv:.1e}",
        sol.v[0], sol.chi_star
    ))
}

fn c2_m_dissipativity() -> Outcome {
    let d = SpectralDomain::interval(1.0, 8).unwrap();
    let r = verify_m_dissipativity(&d, 1000, 1e-9, 2024);
    ensure(r.failures.is_empty(), || format!("solver failures: {:?}", r.failures))?;
    ensure(r.solved == 1000, || format!("solved {} of 1000", r.solved))?;
    ensure(r.max_residual <= 1e-9, || format!("max H residual {:e}", r.max_residual))?;
    ensure(r.min_stated_coercivity_slack >= -1e-12, || {
        format!("coercivity slack {:e}", r.min_stated_coercivity_slack)
    })?;
    Ok(format!(
        "max residual {:.2e}, min coercivity slack {:.3e}, max iterations {}",
        r.max_residual, r.min_stated_coercivity_slack, r.max_iterations
    ))
}

/// Random state with `a_k, b_k ~ U[-1, 1]/k`.
fn random_state(d: &SpectralDomain, rng: &mut ChaCha8Rng) -> ModalState {
    let m = d.len();
    let a = (1..=m).map(|k| rng.gen_range(-1.0..=1.0) / k as f64).collect();
    let b = (1..=m).map(|k| rng.gen_range(-1.0..=1.0) / k as f64).collect();
    ModalState::from_parts(d, a, b).unwrap()
}

fn c3_dissipativity_gap() -> Outcome {
    let d = SpectralDomain::interval(PI, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let s1 = random_state(&d, &mut rng);
        let s2 = random_state(&d, &mut rng);
        let g = dissipativity_gap(&d, &s1, &s2).unwrap();
        worst = worst.max(g.gap - g.certificate);
        ensure(g.gap <= g.certificate + 1e-12, || {
            format!("gap {:e} > certificate {:e}", g.gap, g.certificate)
        })?;
    }
    Ok(format!("max(gap - certificate) = {worst:.3e}"))
}

fn c4_contraction() -> Outcome {
    let d = SpectralDomain::interval(PI, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let alpha = rng.gen_range((1e-3f64).ln()..=(1e3f64).ln()).exp();
        let s1 = random_state(&d, &mut rng);
        let s2 = random_state(&d, &mut rng);
        let j1 = resolvent(&d, &s1, alpha, 1e-13).map_err(|e| e.to_string())?;
        let j2 = resolvent(&d, &s2, alpha, 1e-13).map_err(|e| e.to_string())?;
        let out = h_distance(&d, &j1, &j2).unwrap();
        let inp = h_distance(&d, &s1, &s2).unwrap();
        worst = worst.max(out - inp);
        ensure(out <= inp + 1e-10, || format!("alpha {alpha:e}: {out:e} > {inp:e}"))?;
    }
    Ok(format!("max(|JU1-JU2| - |U1-U2|) = {worst:.3e}"))
}

/// 8 modes on (0, π): `u0 = 0.92·x(π-x)`, `u1 = φ₁ + 0.5·φ₂`.
fn mixed_data() -> (SpectralDomain, ModalState) {
    let d = SpectralDomain::interval(PI, 8).unwrap();
    let a = d
        .project_one(&InitialData::Profile(kvwave::domain::Profile::new(|x, _| 0.92 * x * (PI - x))))
        .unwrap();
    let b = d
        .project_one(&InitialData::ModeSum(vec![(1, 1.0), (2, 0.5)]))
        .unwrap();
    let s = ModalState::from_parts(&d, a, b).unwrap();
    (d, s)
}

fn identity_residuals(trace: &EnergyTrace) -> (f64, f64) {
    let last = trace.len() - 1;
    let w = weak_identity_residual(trace, 0, last).unwrap().abs() / trace.e_weak[0];
    let r = regular_identity_residual(trace, 0, last).unwrap().abs() / trace.e_regular[0];
    (w, r)
}

fn c5_energy_identities() -> Outcome {
    let (d, s) = mixed_data();
    let e0 = weak_energy(&d, &s);
    ensure((e0 - 5.0).abs() < 0.5, || format!("E_w(0) = {e0}"))?;
    let run = |dt: f64| {
        let spec = IntegratorSpec::new(Method::DirectRk4, dt, 10.0, 10);
        evolve(&d, &s, Model::KelvinVoigt, &spec).unwrap()
    };
    let coarse = run(1e-3);
    let fine = run(5e-4);
    let (w1, r1) = identity_residuals(&coarse);
    let (w2, r2) = identity_residuals(&fine);
    ensure(w1 <= 1e-6 && r1 <= 1e-6, || format!("residuals {w1:e}, {r1:e}"))?;
    ensure(w1 / w2 >= 4.0, || format!("weak reduction {:.2} ({w1:e} -> {w2:e})", w1 / w2))?;
    ensure(r1 / r2 >= 4.0, || format!("regular reduction {:.2} ({r1:e} -> {r2:e})", r1 / r2))?;
    Ok(format!(
        "E_w(0) = {e0:.4}; weak {w1:.2e} -> {w2:.2e} (x{:.1}), regular {r1:.2e} -> {r2:.2e} (x{:.1})",
        w1 / w2,
        r1 / r2
    ))
}

fn max_step_increase(e: &[f64]) -> f64 {
    e.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}

fn c6_implicit_monotonicity() -> Outcome {
    let (d, s) = mixed_data();
    let tol = 1e-12;
    let budget = 10.0 * tol;

    let mut spec = IntegratorSpec::new(Method::ImplicitEuler, 1e-2, 10.0, 1);
    spec.resolvent_tol = tol;
    let trace = evolve(&d, &s, Model::KelvinVoigt, &spec).map_err(|e| e.to_string())?;
    let inc = max_step_increase(&trace.e_weak);
    ensure(inc <= budget, || format!("E_w increased by {inc:e} at dt = 1e-2"))?;

    let mut stiff = IntegratorSpec::new(Method::ImplicitEuler, 1.0, 20.0, 1);
    stiff.resolvent_tol = tol;
    let big = evolve(&d, &s, Model::KelvinVoigt, &stiff).map_err(|e| e.to_string())?;
    let inc_big = max_step_increase(&big.e_weak);
    ensure(big.valid && big.warnings.is_empty(), || format!("dt = 1 run flagged: {:?}", big.warnings))?;
    ensure(inc_big <= budget, || format!("E_w increased by {inc_big:e} at dt = 1"))?;

    let explicit = IntegratorSpec::new(Method::DirectRk4, 1.0, 20.0, 1);
    let warned = match evolve(&d, &s, Model::KelvinVoigt, &explicit) {
        Ok(t) => !t.warnings.is_empty(),
        Err(Error::BlowUp { partial, .. }) => partial.is_some_and(|p| !p.warnings.is_empty()),
        Err(e) => return Err(e.to_string()),
    };
    ensure(warned, || "direct_rk4 at dt = 1 raised no stiffness warning".into())?;
    Ok(format!(
        "max step increase {inc:.2e} (dt = 1e-2), {inc_big:.2e} (dt = 1); E_w(20) = {:.4e}; direct_rk4 at dt = 1 warned",
        big.e_weak.last().unwrap()
    ))
}

fn c7_semigroup_convergence() -> Outcome {
    let d = SpectralDomain::interval(PI, 4).unwrap();
    let s = state(&d, &[0.5, 0.2, 0.1, 0.05], &[0.3, -0.2, 0.1, 0.0]);
    let reference = integrate(
        &d,
        &s,
        Model::KelvinVoigt,
        &IntegratorSpec::new(Method::DirectRk4, 1e-4, 1.0, 1),
    )
    .map_err(|e| e.to_string())?;

    let ns: Vec<usize> = (5..=10).map(|p| 1usize << p).collect();
    let mut errs = Vec::new();
    for &n in &ns {
        let u = exponential_formula(&d, &s, 1.0, n, 1e-14).map_err(|e| e.to_string())?;
        errs.push(h_distance(&d, &u, &reference).unwrap());
    }
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    for (k, r) in ratios.iter().enumerate() {
        ensure((1.6..=2.4).contains(r), || {
            format!("err({})/err({}) = {r:.3}", ns[k], ns[k + 1])
        })?;
    }

    let mut yosida = Vec::new();
    for alpha in [1e-1, 1e-2, 1e-3] {
        let spec = IntegratorSpec::new(Method::YosidaRk4 { alpha }, alpha / 20.0, 1.0, 1);
        let u = integrate(&d, &s, Model::KelvinVoigt, &spec).map_err(|e| e.to_string())?;
        yosida.push(h_distance(&d, &u, &reference).unwrap());
    }
    ensure(yosida[0] > yosida[1] && yosida[1] > yosida[2], || {
        format!("Yosida errors not decreasing: {yosida:?}")
    })?;
    Ok(format!(
        "ratios {}; Yosida errors {:.2e}, {:.2e}, {:.2e}",
        ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", "),
        yosida[0],
        yosida[1],
        yosida[2]
    ))
}

/// 8 modes on (0, 1), `E_w(0) = π²/4`, run to `t_end = 20·C`.
fn decay_run() -> Result<(EnergyTrace, DecayCertificate), String> {
    let d = SpectralDomain::interval(1.0, 8).unwrap();
    let mut a = vec![0.0; 8];
    a[0] = 0.6;
    a[1] = 0.1;
    a[2] = (0.1f64 / 9.0).sqrt();
    let s = state(&d, &a, &[0.0; 8]);
    let e0 = weak_energy(&d, &s);
    let c = decay_constant(d.poincare_constant(), e0).map_err(|e| e.to_string())?;
    let spec = IntegratorSpec::new(Method::DirectRk4, 1e-4, 20.0 * c, 100);
    let trace = evolve(&d, &s, Model::KelvinVoigt, &spec).map_err(|e| e.to_string())?;
    let cert = DecayCertificate::build(&trace).map_err(|e| e.to_string())?;
    Ok((trace, cert))
}

thread_local! {
    static DECAY: std::cell::RefCell<Option<(EnergyTrace, DecayCertificate)>> =
        const { std::cell::RefCell::new(None) };
}

fn c8_komornik() -> Outcome {
    let (trace, cert) = decay_run()?;
    let e0 = trace.e0();
    ensure((e0 - PI * PI / 4.0).abs() < 1e-12, || format!("E_w(0) = {e0}"))?;
    let min = cert.komornik_margins.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(min >= -1e-8 * e0, || format!("min margin {min:e}"))?;
    let msg = format!(
        "C = {:.6}, {} margins, min {:.3e}",
        cert.c,
        cert.komornik_margins.len(),
        min
    );
    DECAY.with(|cell| *cell.borrow_mut() = Some((trace, cert)));
    Ok(msg)
}

fn c9_decay_bound() -> Outcome {
    let (trace, cert) = match DECAY.with(|cell| cell.borrow_mut().take()) {
        Some(run) => run,
        None => decay_run()?,
    };
    ensure((cert.c - 12.4077).abs() < 1e-3, || format!("C = {}", cert.c))?;
    let r = check_decay_bound(&trace, &cert).map_err(|e| e.to_string())?;
    ensure(r.violations == 0, || {
        format!("{} violations, max excess {:e}", r.violations, r.max_violation)
    })?;
    let mono = energy_monotonicity(&trace);
    let slope = r.slope.map_or_else(|| "n/a".into(), |s| format!("{s:.3}"));
    Ok(format!(
        "t_end = {:.2}, {} samples checked, max excess {:.3e}, slope {slope} (soft range [-1.5, -0.6]), max E_w step {:.1e}",
        trace.t_end(),
        r.checked_samples,
        r.max_violation,
        mono.max_weak_increase
    ))
}

fn c10_prototype_lower_bound() -> Outcome {
    let d = SpectralDomain::interval(PI, 1).unwrap();
    let s = state(&d, &[1.0], &[0.0]);
    let spec = IntegratorSpec::new(Method::DirectRk4, 1e-3, 1000.0, 10);
    let trace = evolve(&d, &s, Model::BtPrototype, &spec).map_err(|e| e.to_string())?;
    ensure(trace.e0() == 0.5, || format!("E_w(0) = {}", trace.e0()))?;
    let r = check_prototype_bounds(&trace).map_err(|e| e.to_string())?;
    ensure(r.min_ratio >= 1.0 - 1e-6, || format!("min ratio {}", r.min_ratio))?;
    let rel = prototype_derivative_identity(&trace).map_err(|e| e.to_string())?;
    ensure(rel <= 1e-4, || format!("derivative identity error {rel:e}"))?;
    Ok(format!(
        "min E(1/E0+2t) = {:.9}, derivative identity {rel:.2e}, slope {:.3}",
        r.min_ratio,
        r.slope.unwrap_or(f64::NAN)
    ))
}

fn corpus_dir(sub: &str) -> Vec<std::path::PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/configs").join(sub);
    let mut v: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn c11_cli_determinism() -> Outcome {
    let text = "\
model = kelvin_voigt
domain.length = 3.141592653589793
modes = 8
integrator.method = direct_rk4
integrator.dt = 0.001
integrator.t_end = 2
sample_stride = 10
init.u0 = parabola:0.92
init.u1 = modes:1:1.0,2:0.5
output.plot_script = plot.gp
";
    let cfg = parse_config(text).map_err(|e| e.to_string())?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    for run in ["first", "second"] {
        let dir = tmp.path().join(run);
        let report = run_simulate(&cfg, &dir, false).map_err(|e| e.to_string())?;
        ensure(report.passed(), || report.render())?;
        bytes.push(fs::read(dir.join("trace.csv")).map_err(|e| e.to_string())?);
    }
    ensure(bytes[0] == bytes[1], || "trace CSVs differ".into())?;

    let valid = corpus_dir("valid");
    let invalid = corpus_dir("invalid");
    for p in &valid {
        let c = parse_config(&fs::read_to_string(p).unwrap()).map_err(|e| format!("{}: {e}", p.display()))?;
        let back = parse_config(&c.render()).map_err(|e| e.to_string())?;
        ensure(back == c, || format!("{} does not round-trip", p.display()))?;
    }
    let mut kinds = Vec::new();
    for p in &invalid {
        match parse_config(&fs::read_to_string(p).unwrap()) {
            Ok(_) => return Err(format!("{} parsed", p.display())),
            Err(e) => kinds.extend(e.kinds()),
        }
    }
    let all = [
        ConfigErrorKind::Syntax,
        ConfigErrorKind::UnknownKey,
        ConfigErrorKind::DuplicateKey,
        ConfigErrorKind::MissingKey,
        ConfigErrorKind::TypeMismatch,
        ConfigErrorKind::RangeViolation,
        ConfigErrorKind::Conflict,
    ];
    for k in all {
        ensure(kinds.contains(&k), || format!("no corpus file triggers {k:?}"))?;
    }
    ensure(valid.len() + invalid.len() >= 20, || "corpus smaller than 20".into())?;
    Ok(format!(
        "{} identical bytes; {} valid configs round-trip, {} invalid cover all {} error kinds",
        bytes[0].len(),
        valid.len(),
        invalid.len(),
        all.len()
    ))
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let ms = Duration::from_millis;
    let s = Duration::from_secs;
    let criteria = [
        Criterion { id: 1, name: "resolvent single-mode oracle", budget: ms(1), run: c1_single_mode_resolvent },
        Criterion { id: 2, name: "m-dissipativity range trials", budget: s(1), run: c2_m_dissipativity },
        Criterion { id: 3, name: "dissipativity gap", budget: ms(100), run: c3_dissipativity_gap },
        Criterion { id: 4, name: "resolvent contraction", budget: s(1), run: c4_contraction },
        Criterion { id: 5, name: "energy identities", budget: s(5), run: c5_energy_identities },
        Criterion { id: 6, name: "implicit Euler monotonicity", budget: s(5), run: c6_implicit_monotonicity },
        Criterion { id: 7, name: "semigroup convergence", budget: s(30), run: c7_semigroup_convergence },
        Criterion { id: 8, name: "Komornik hypothesis", budget: s(60), run: c8_komornik },
        Criterion { id: 9, name: "decay bound", budget: s(60), run: c9_decay_bound },
        Criterion { id: 10, name: "prototype lower bound", budget: s(10), run: c10_prototype_lower_bound },
        Criterion { id: 11, name: "CLI determinism and round-trip", budget: s(1), run: c11_cli_determinism },
    ];

    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str()) || f == &c.id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > c.budget => Err(format!("over budget; {msg}")),
            other => other,
        };
        let (tag, msg) = match &outcome {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!(
            "{tag} [{:>2}] {:<32} {:>10.3} ms / {:>6} ms  {msg}",
            c.id,
            c.name,
            elapsed.as_secs_f64() * 1e3,
            c.budget.as_millis()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
