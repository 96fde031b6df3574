//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! nonzero status if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use lvchemo::galerkin::{
    truncation_study, GalerkinProblem, Multistart, NewtonOptions, SeedPolicy, TruncationRow,
};
use lvchemo::model::{Param, StateKind};
use lvchemo::sim::{
    pattern_cutoff, run_to_stationary, threshold_amplitude, AmplitudeThreshold,
    Classification, Field, FieldState, FinitePerturbation, Grid, InfinitesimalMode, InitialCondition,
    Placement, SimConfig, ThresholdSearch,
};
use lvchemo::spectral::{decompose_state, modal_growth_rate, wavelength_scan};
use lvchemo::stability::{
    critical_b, cubic_coefficients, cubic_roots, growth_rate, instability_cutoff, routh_hurwitz,
    threshold_curve, CriticalBSearch, CubicCoefficients,
};
use lvchemo::{Execution, ModelParams, SteadyState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

struct Check {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check {
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn near(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        let line = format!("{label}={got:.4} (want {want}±{tol})");
        if (got - want).abs() <= tol {
            self.notes.push(line);
        } else {
            self.failures.push(line);
        }
    }

    fn that(&mut self, label: &str, ok: bool) {
        if ok {
            self.notes.push(label.to_string());
        } else {
            self.failures.push(label.to_string());
        }
    }

    fn finish(self) -> Verdict {
        if self.failures.is_empty() {
            Ok(self.notes.join(", "))
        } else {
            Err(format!("{} | ok: {}", self.failures.join(", "), self.notes.join(", ")))
        }
    }
}

fn grid(length: f64) -> Grid {
    Grid::with_spacing(length, 0.25).unwrap()
}

fn exec() -> Execution {
    Execution::default()
}

fn extinction_eigenvalues() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let p = ModelParams {
            d1: rng.gen_range(0.1..3.0),
            d2: rng.gen_range(0.1..3.0),
            chi: rng.gen_range(-20.0..20.0),
            r1: rng.gen_range(0.01..1.0),
            r2: rng.gen_range(0.01..1.0),
            b1: rng.gen_range(0.1..3.0),
            b2: rng.gen_range(0.1..3.0),
            length: 15.0,
        };
        let k: f64 = rng.gen_range(0.0..3.0);
        let k2 = k * k;
        let want = (-1.0 - k2)
            .max(-p.d1 * k2 - p.r1)
            .max(-p.d2 * k2 - p.r2 * (p.b2 - 1.0));
        worst = worst.max((growth_rate(&SteadyState::extinction_of_v(), k, &p) - want).abs());
    }
    let line = format!("max |error| {worst:.2e} over 1000 draws");
    if worst <= 1e-12 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn routh_hurwitz_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut tested, mut mismatches) = (0, 0);
    while tested < 10_000 {
        let (a1, a2, a3): (f64, f64, f64) = (
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
        );
        if (a3 - a1 * a2).abs() <= 1e-6 {
            continue;
        }
        tested += 1;
        let rh = routh_hurwitz(&CubicCoefficients { a1, a2, a3, k: 0.0 }).stable;
        let direct = cubic_roots(a1, a2, a3).iter().all(|z| z.re < 0.0);
        if rh != direct {
            mismatches += 1;
        }
    }
    let line = format!("{mismatches} mismatches in {tested} cubics");
    if mismatches == 0 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn instability_domain_membership() -> Verdict {
    let a3_at = |b: f64| {
        let p = ModelParams {
            b1: b,
            b2: b,
            ..Default::default()
        };
        cubic_coefficients(&SteadyState::coexistence(&p).unwrap(), 0.2, &p)
    };
    let (inside, outside) = (a3_at(0.7), a3_at(0.3));
    let mut c = Check::new();
    c.that(&format!("a3(0.7,0.7)={:.4e} < 0", inside.a3), inside.a3 < 0.0);
    c.that(
        &format!("(0.3,0.3) stable with a3={:.4e}", outside.a3),
        routh_hurwitz(&outside).stable,
    );
    c.finish()
}

fn critical_b_defaults() -> Verdict {
    let r = critical_b(&ModelParams::default(), &CriticalBSearch::default()).map_err(|e| e.to_string())?;
    let mut c = Check::new();
    c.near("b_min", r.b_min, 0.6, 0.05);
    c.near("k", r.k_at_min, 0.2, 0.02);
    c.finish()
}

fn parameter_cutoffs() -> Verdict {
    let base = ModelParams::default();
    let search = CriticalBSearch::default();
    let mut c = Check::new();
    // (param, unstable end, stable end, expected cutoff, tolerance, samples in the unstable range)
    let cases = [
        (Param::D1, 1.0, 4.0, 2.6, 0.2, vec![1.0, 1.5, 2.0, 2.5]),
        (Param::Chi, -10.0, -3.0, -6.0, 0.5, vec![-10.0, -8.0, -7.0, -6.0]),
        (Param::R1, 0.1, 0.5, 0.3, 0.03, vec![0.1, 0.15, 0.2, 0.25]),
        (Param::R2, 0.1, 0.01, 0.04, 0.01, vec![0.1, 0.08, 0.06, 0.045]),
    ];
    let results = exec().map(&cases, |(param, unstable, stable, _, tol, samples)| {
        let cut = instability_cutoff(*param, *unstable, *stable, &base, &search, tol / 100.0);
        let curve = threshold_curve(*param, samples, &base, &search, Execution::Sequential);
        (cut, curve)
    });
    for ((param, _, _, want, tol, _), (cut, curve)) in cases.iter().zip(results) {
        match cut {
            Ok(v) => c.near(&format!("{param} cutoff"), v, *want, *tol),
            Err(e) => c.that(&format!("{param} cutoff: {e}"), false),
        }
        let b: Vec<f64> = curve.unstable().iter().map(|&(_, b)| b).collect();
        let rising = b.len() == curve.points.len() && b.windows(2).all(|w| w[1] > w[0]);
        c.that(&format!("{param} b_min trend {b:.3?}"), rising);
    }
    c.finish()
}

fn spike_count_l250() -> Verdict {
    let p = ModelParams::default().with(Param::L, 250.0);
    let g = grid(250.0);
    let init = InitialCondition::Infinitesimal {
        base: StateKind::Coexistence,
        amplitude: -1e-3,
        mode: InfinitesimalMode::Cosine { mode: 16 },
    };
    let out = run_to_stationary(init.build(&p, &g).unwrap(), &p, &g, &SimConfig::default())
        .map_err(|e| e.to_string())?;
    let mut c = Check::new();
    c.that(
        &format!("classification {}", out.classification),
        out.classification == Classification::StationaryPattern,
    );
    let full = out.spike_count.map_or(0.0, |s| s.full_spikes());
    c.near("full spikes", full, 8.0, 1.0);
    let s = decompose_state(&out.final_state, &g, 64).map_err(|e| e.to_string())?;
    c.near("alpha0", s.alpha[0], 0.478, 0.02);
    c.near("alpha16", s.alpha[16], 0.244, 0.02);
    c.near("gamma16", s.gamma[16], -0.102, 0.02);
    c.finish()
}

fn characteristic_length() -> Verdict {
    let lengths: Vec<f64> = (1..=50).map(f64::from).collect();
    let init = InitialCondition::Infinitesimal {
        base: StateKind::Coexistence,
        amplitude: 1e-3,
        mode: InfinitesimalMode::Noise { seed: 1 },
    };
    let scan = wavelength_scan(
        &ModelParams::default(),
        &lengths,
        &init,
        9,
        0.25,
        &SimConfig::default(),
        exec(),
    )
    .map_err(|e| e.to_string())?;
    let mut c = Check::new();
    match (scan.lambda0, scan.alpha_max) {
        (Some(l), Some(a)) => {
            c.near("Lambda0", l, 15.0, 1.0);
            c.near("alpha_max", a, 0.244, 0.02);
        }
        _ => c.that("no mode-1 window", false),
    }
    let short: Vec<_> = scan.rows.iter().filter(|r| r.length < 10.0).collect();
    c.that(
        "homogeneous for L < 10",
        short.iter().all(|r| r.classification == Classification::Homogeneous),
    );
    let worst = short
        .iter()
        .map(|r| r.alpha[0])
        .max_by(|a, b| (a - 0.6).abs().total_cmp(&(b - 0.6).abs()))
        .unwrap_or(f64::NAN);
    c.near("worst short-domain alpha0", worst, 0.6, 0.02);
    c.finish()
}

fn weak_reference() -> (ModelParams, Grid, FieldState) {
    let p = ModelParams::default();
    let g = grid(15.0);
    let init = InitialCondition::Infinitesimal {
        base: StateKind::Coexistence,
        amplitude: -1e-3,
        mode: InfinitesimalMode::Cosine { mode: 1 },
    };
    let out = run_to_stationary(init.build(&p, &g).unwrap(), &p, &g, &SimConfig::default()).unwrap();
    assert_eq!(out.classification, Classification::StationaryPattern);
    (p, g, out.final_state)
}

fn weak_strong_reference() -> (ModelParams, Grid, FieldState) {
    let p = ModelParams::weak_strong().with(Param::L, 10.0);
    let g = grid(10.0);
    let init = InitialCondition::Finite {
        base: StateKind::ExtinctionOfV,
        perturbation: FinitePerturbation {
            field: Field::V,
            amplitude: 1.0,
            width_fraction: 0.4,
            placement: Placement::Left,
        },
    };
    let out = run_to_stationary(init.build(&p, &g).unwrap(), &p, &g, &SimConfig::default()).unwrap();
    assert_eq!(out.classification, Classification::StationaryPattern);
    (p, g, out.final_state)
}

fn study(reference: &(ModelParams, Grid, FieldState), max_modes: usize) -> Result<Vec<TruncationRow>, String> {
    let (p, g, state) = reference;
    truncation_study(
        p,
        state,
        g,
        max_modes,
        SeedPolicy::BaseKick { kick: 0.1 },
        &NewtonOptions::default(),
        &Multistart::default(),
        exec(),
    )
    .map_err(|e| e.to_string())
}

fn compare_row(c: &mut Check, row: &TruncationRow, want: &[f64], tol: f64) {
    c.that(&format!("M={} converged", row.modes), row.solution.converged);
    for (i, (&got, &w)) in row.solution.spectrum.alpha.iter().zip(want).enumerate() {
        c.near(&format!("M={} alpha{i}", row.modes), got, w, tol);
    }
}

fn table_weak(rows: &[TruncationRow]) -> Verdict {
    let mut c = Check::new();
    compare_row(&mut c, &rows[0], &[0.1878, 0.3330], 0.005);
    compare_row(&mut c, &rows[1], &[0.4753, 0.2446, 0.0961], 0.005);
    compare_row(&mut c, &rows[2], &[0.4702, 0.2532, 0.0849, 0.0241], 0.005);
    c.finish()
}

fn table_weak_strong(rows: &[TruncationRow]) -> Verdict {
    let mut c = Check::new();
    compare_row(&mut c, &rows[3], &[0.3208, -0.4419, 0.2241, -0.0916, 0.0342], 0.01);
    c.finish()
}

fn error_convergence(weak: &[TruncationRow], weak_strong: &[TruncationRow]) -> Verdict {
    let mut c = Check::new();
    c.near("weak ER(M=1)", weak[0].er_u, 1.38, 0.1);
    c.that(&format!("weak ER(M=3)={:.4} <= 0.01", weak[2].er_u), weak[2].er_u <= 0.01);
    c.near("weak-strong ER(M=1)", weak_strong[0].er_u, 1.39, 0.1);
    c.that(
        &format!("weak-strong ER(M=4)={:.4} <= 0.03", weak_strong[3].er_u),
        weak_strong[3].er_u <= 0.03,
    );
    c.finish()
}

fn finite_amplitude_pattern() -> Verdict {
    let p = ModelParams::weak_strong().with(Param::L, 50.0);
    let g = grid(50.0);
    let cfg = SimConfig::default();
    let run = |field: Field, amplitude: f64| {
        let init = InitialCondition::Finite {
            base: StateKind::ExtinctionOfV,
            perturbation: FinitePerturbation {
                field,
                amplitude,
                width_fraction: 0.2,
                placement: Placement::Center,
            },
        };
        run_to_stationary(init.build(&p, &g).unwrap(), &p, &g, &cfg).unwrap()
    };
    let mut c = Check::new();
    let v = run(Field::V, 0.9);
    c.that(
        &format!("v bump -> {}", v.classification),
        v.classification == Classification::StationaryPattern,
    );
    c.near("full spikes", v.spike_count.map_or(0.0, |s| s.full_spikes()), 2.0, 0.0);
    let cases: Vec<(Field, f64)> = [Field::U, Field::C]
        .into_iter()
        .flat_map(|f| [0.25, 0.5, 0.75, 1.0].map(|a| (f, a)))
        .collect();
    let outcomes = exec().map(&cases, |&(f, a)| run(f, a).classification);
    let decayed = outcomes.iter().all(|&o| o == Classification::Homogeneous);
    c.that(&format!("u-only and c-only bumps decay: {decayed}"), decayed);
    c.finish()
}

fn threshold_trends() -> Verdict {
    let base = ModelParams::weak_strong().with(Param::L, 50.0);
    let g = grid(50.0);
    let cfg = SimConfig::default();
    let shape = FinitePerturbation::v_bump(1.0);
    let mut c = Check::new();

    // (param, patterned end, decaying end, expected cutoff, tolerance)
    let cutoffs = [
        (Param::Chi, -10.0, -7.0, -9.0, 1.0),
        (Param::D1, 1.0, 1.6, 1.3, 0.2),
        (Param::R1, 0.1, 0.2, 0.15, 0.03),
        (Param::R2, 0.1, 0.04, 0.1, 0.02),
        (Param::B1, 0.7, 0.1, 0.3, 0.05),
    ];
    let found = exec().map(&cutoffs, |&(param, pat, dec, _, tol)| {
        pattern_cutoff(param, pat, dec, &base, &g, &cfg, &shape, tol / 10.0)
    });
    for (&(param, _, _, want, tol), r) in cutoffs.iter().zip(found) {
        match r {
            Ok(v) => c.near(&format!("{param} cutoff"), v, want, tol),
            Err(e) => c.that(&format!("{param} cutoff: {e}"), false),
        }
    }

    // (param, values, threshold rises along the values)
    let trends = [
        (Param::Chi, [-20.0, -15.0, -10.0], true),
        (Param::B1, [0.5, 0.7, 0.9], false),
        (Param::D1, [0.5, 0.8, 1.1], true),
        (Param::D2, [0.5, 0.8, 1.1], true),
        (Param::B2, [1.3, 1.5, 1.7], true),
        (Param::R1, [0.05, 0.08, 0.11], true),
    ];
    let jobs: Vec<(Param, f64)> = trends
        .iter()
        .flat_map(|(param, values, _)| values.iter().map(|&v| (*param, v)))
        .collect();
    let search = ThresholdSearch {
        probes_per_round: 1,
        ..Default::default()
    };
    let amplitudes = exec().map(&jobs, |&(param, v)| {
        threshold_amplitude(&base.with(param, v), &g, &cfg, &shape, &search, Execution::Sequential)
            .ok()
            .and_then(|t| match t {
                AmplitudeThreshold::Threshold { amplitude, .. } => Some(amplitude),
                AmplitudeThreshold::NoPattern { .. } => None,
            })
    });
    for (i, (param, values, rising)) in trends.iter().enumerate() {
        let a = &amplitudes[3 * i..3 * i + 3];
        let ok = match (a[0], a[1], a[2]) {
            (Some(x), Some(y), Some(z)) if *rising => x < y && y < z,
            (Some(x), Some(y), Some(z)) => x > y && y > z,
            _ => false,
        };
        c.that(&format!("{param} {values:?} thresholds {a:.3?}"), ok);
    }
    c.finish()
}

fn modal_growth() -> Verdict {
    let p = ModelParams::default().with(Param::L, 250.0);
    let g = grid(250.0);
    let co = SteadyState::coexistence(&p).unwrap();
    let k = PI * 16.0 / 250.0;
    let linear = growth_rate(&co, k, &p);
    let simulated = modal_growth_rate(&p, &g, &co, 16, 1e-6, (200.0, 400.0), 0.2).map_err(|e| e.to_string())?;
    let rel = (simulated - linear).abs() / linear.abs();
    let line = format!("simulated {simulated:.6} vs linear {linear:.6}, relative error {rel:.2e}");
    if rel <= 0.05 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn residual_cross_check() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = ModelParams {
            chi: rng.gen_range(-15.0..0.0),
            b2: rng.gen_range(0.5..2.0),
            length: rng.gen_range(5.0..40.0),
            ..Default::default()
        };
        let problem = GalerkinProblem::new(p, 4);
        let x: Vec<f64> = (0..problem.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = problem.residuals(&x);
        let b = problem.convolution_residuals(&x);
        for (p, q) in a.iter().zip(&b) {
            worst = worst.max((p - q).abs());
        }
    }
    let line = format!("max |projection - convolution| {worst:.2e}");
    if worst <= 1e-9 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn strong_weak_control() -> Verdict {
    let p = ModelParams {
        b1: 1.7,
        b2: 0.7,
        length: 50.0,
        ..Default::default()
    };
    let g = grid(50.0);
    let cfg = SimConfig::default();
    let bump = |base, field| InitialCondition::Finite {
        base,
        perturbation: FinitePerturbation {
            field,
            amplitude: 0.9,
            width_fraction: 0.2,
            placement: Placement::Center,
        },
    };
    let mut initial: Vec<(String, FieldState)> = Vec::new();
    for seed in 1..=3 {
        let ic = InitialCondition::Infinitesimal {
            base: StateKind::ExtinctionOfU,
            amplitude: 1e-2,
            mode: InfinitesimalMode::Noise { seed },
        };
        initial.push((format!("(0,1,1)+noise{seed}"), ic.build(&p, &g).unwrap()));
    }
    initial.push((
        "(0,1,1)+u bump".into(),
        bump(StateKind::ExtinctionOfU, Field::U).build(&p, &g).unwrap(),
    ));
    initial.push((
        "(1,0,0)+v bump".into(),
        bump(StateKind::ExtinctionOfV, Field::V).build(&p, &g).unwrap(),
    ));
    for seed in 1..=3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut s = FieldState::homogeneous(&SteadyState::trivial(), &g);
        for f in [Field::U, Field::V, Field::C] {
            s.field_mut(f).iter_mut().for_each(|x| *x = rng.gen_range(0.0..1.0));
        }
        initial.push((format!("random{seed}"), s));
    }
    let outcomes = exec().map(&initial, |(_, s)| {
        run_to_stationary(s.clone(), &p, &g, &cfg).map(|o| o.classification)
    });
    let mut c = Check::new();
    for ((name, _), out) in initial.iter().zip(outcomes) {
        match out {
            Ok(class) => c.that(&format!("{name} -> {class}"), class == Classification::Homogeneous),
            Err(e) => c.that(&format!("{name}: {e}"), false),
        }
    }
    c.finish()
}

fn main() -> ExitCode {
    lvchemo::exec::init_workers_from_env();
    let mut failed = 0;
    let mut report = |id: u32, name: &str, f: &mut dyn FnMut() -> Verdict| {
        let t = Instant::now();
        let verdict = f();
        let secs = t.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS {id:>2} {name} [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id:>2} {name} [{secs:.1}s]: {detail}");
            }
        }
    };
    report(1, "extinction eigenvalues", &mut extinction_eigenvalues);
    report(2, "routh-hurwitz oracle", &mut routh_hurwitz_oracle);
    report(3, "instability domain membership", &mut instability_domain_membership);
    report(4, "critical b and wavenumber", &mut critical_b_defaults);
    report(5, "parameter cutoffs", &mut parameter_cutoffs);
    report(6, "spike count at L=250", &mut spike_count_l250);
    report(7, "characteristic length", &mut characteristic_length);

    let weak = weak_reference();
    let weak_strong = weak_strong_reference();
    let weak_rows = study(&weak, 3);
    let weak_strong_rows = study(&weak_strong, 4);
    report(8, "truncated system, weak competition", &mut || table_weak(weak_rows.as_ref()?));
    report(9, "truncated system, weak-strong competition", &mut || {
        table_weak_strong(weak_strong_rows.as_ref()?)
    });
    report(10, "profile error convergence", &mut || {
        error_convergence(weak_rows.as_ref()?, weak_strong_rows.as_ref()?)
    });
    report(11, "finite-amplitude pattern", &mut finite_amplitude_pattern);
    report(12, "finite-amplitude threshold trends", &mut threshold_trends);
    report(13, "linear vs nonlinear growth", &mut modal_growth);
    report(14, "galerkin residual cross-check", &mut residual_cross_check);
    report(15, "strong-weak negative control", &mut strong_weak_control);

    println!("acceptance: {} of 15 criteria passed", 15 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
