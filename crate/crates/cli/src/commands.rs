//! One function per subcommand. Each fills the collector and the manifest
//! results; a non-convergence error is returned after the outputs are in
//! place so partial results still get written.

use std::fmt;
use std::path::Path;

use clap::ValueEnum;
use lvchemo::galerkin::{
    coexistence_kick_seed, parameter_characteristics, solve_patterned, stable_base_state, truncation_study,
    GalerkinProblem, SeedDescriptor,
};
use lvchemo::model::{Param, SteadyState};
use lvchemo::sim::{run_to_stationary, threshold_amplitude, AmplitudeThreshold, Classification, FieldState, Grid};
use lvchemo::spectral::{decompose, decompose_state, dominant_modes, wavelength_scan, ModeSpectrum};
use lvchemo::stability::{
    critical_b, dispersion_curve, instability_cutoff, instability_domain, predicted_spike_count, threshold_curve,
    DomainCell,
};
use lvchemo::{Execution, ModelParams};

use crate::config::{ExperimentConfig, GalerkinSeed};
use crate::error::CliError;
use crate::output::{fmt_num, fmt_opt, Collector, Results, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Dispersion,
    StabilityMap,
    CriticalB,
    ThresholdAmplitude,
    Decompose,
    WavelengthScan,
    Galerkin,
    TruncationStudy,
    ParamStudy,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.to_possible_value().expect("no skipped variants");
        f.write_str(v.get_name())
    }
}

pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub exec: Execution,
    pub out: &'a mut Collector,
    pub results: &'a mut Results,
}

pub fn run(command: Command, ctx: &mut Context<'_>) -> Result<(), CliError> {
    match command {
        Command::Simulate => simulate(ctx),
        Command::Dispersion => dispersion(ctx),
        Command::StabilityMap => stability_map(ctx),
        Command::CriticalB => critical(ctx),
        Command::ThresholdAmplitude => threshold(ctx),
        Command::Decompose => decompose_file(ctx),
        Command::WavelengthScan => scan(ctx),
        Command::Galerkin => galerkin(ctx),
        Command::TruncationStudy => truncation(ctx),
        Command::ParamStudy => param_study(ctx),
    }
}

fn grid_for(cfg: &ExperimentConfig) -> Result<Grid, CliError> {
    Ok(Grid::with_spacing(cfg.model.length, cfg.grid.dx)?)
}

fn steady(kind: lvchemo::model::StateKind, p: &ModelParams) -> Result<SteadyState, CliError> {
    SteadyState::of_kind(kind, p).ok_or_else(|| CliError::Config(format!("no {kind} state for these parameters")))
}

fn profile_table(state: &FieldState, grid: &Grid) -> Table {
    let mut t = Table::new(["x", "u", "v", "c"]);
    for i in 0..state.len() {
        t.push(vec![
            fmt_num(grid.x(i)),
            fmt_num(state.u[i]),
            fmt_num(state.v[i]),
            fmt_num(state.c[i]),
        ]);
    }
    t
}

fn spectrum_table(s: &ModeSpectrum) -> Table {
    let mut t = Table::new(["mode", "k", "alpha", "gamma", "beta"]);
    for i in 0..=s.modes() {
        t.push(vec![
            i.to_string(),
            fmt_num(i as f64 * s.k()),
            fmt_num(s.alpha[i]),
            fmt_num(s.gamma[i]),
            fmt_num(s.beta[i]),
        ]);
    }
    t
}

fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}{i}"))
}

fn dominant_text(coefficients: &[f64], threshold: f64) -> String {
    let d = dominant_modes(coefficients, threshold);
    d.indices().iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

/// Runs the configured initial condition to a stationary state.
fn reference_run(cfg: &ExperimentConfig) -> Result<(Grid, lvchemo::sim::SimOutcome), CliError> {
    let grid = grid_for(cfg)?;
    let init = cfg.initial_condition().build(&cfg.model, &grid)?;
    let out = run_to_stationary(init, &cfg.model, &grid, &cfg.sim_config())?;
    Ok((grid, out))
}

fn simulate(ctx: &mut Context<'_>) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let (grid, out) = reference_run(cfg)?;
    let modes = cfg.decompose.modes.min((grid.cells() - 2) / 2);
    let spectrum = decompose_state(&out.final_state, &grid, modes)?;
    ctx.out.table("profile", &profile_table(&out.final_state, &grid), cfg.output.dat)?;
    ctx.out.table("spectrum", &spectrum_table(&spectrum), cfg.output.dat)?;
    let r = &mut *ctx.results;
    r.text("classification", out.classification.to_string());
    r.flag("converged", out.converged);
    r.num("t_final", out.final_state.t);
    r.num("residual", out.residual);
    r.int("steps", out.steps as i64);
    r.int("cells", grid.cells() as i64);
    if let Some(s) = out.spike_count {
        r.int("half_spikes", s.half_spikes as i64);
        r.num("full_spikes", s.full_spikes());
    }
    r.text("dominant_modes_u", dominant_text(&spectrum.alpha, cfg.decompose.dominance));
    if out.classification == Classification::NotConverged {
        return Err(CliError::NotConverged(format!(
            "no stationary state by t = {} (residual {:e})",
            out.final_state.t, out.residual
        )));
    }
    Ok(())
}

fn dispersion(ctx: &mut Context<'_>) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let s = &cfg.stability;
    let param = cfg.sweep_param()?;
    let values = match param {
        Some(_) => cfg.sweep_values()?,
        None => vec![f64::NAN],
    };
    let mut curve = Table::new(["value", "k", "wavelength", "growth_rate", "rh_stable"]);
    let mut summary = Table::new(["value", "k_star", "lambda_star", "half_spikes", "full_spikes"]);
    for &value in &values {
        let p = match param {
            Some(param) => cfg.model.with(param, value),
            None => cfg.model,
        };
        let state = steady(s.state, &p)?;
        let report = dispersion_curve(&state, &p, s.k_min, s.k_max, s.points, ctx.exec)?;
        let label = param.map_or(String::new(), |_| fmt_num(value));
        for i in 0..report.k_grid.len() {
            let k = report.k_grid[i];
            curve.push(vec![
                label.clone(),
                fmt_num(k),
                if k > 0.0 { fmt_num(2.0 * std::f64::consts::PI / k) } else { String::new() },
                fmt_num(report.growth_rates[i]),
                report.rh_verdicts[i].to_string(),
            ]);
        }
        let spikes = if report.lambda_star > 0.0 {
            predicted_spike_count(report.k_star, p.length).ok()
        } else {
            None
        };
        summary.push(vec![
            label,
            fmt_num(report.k_star),
            fmt_num(report.lambda_star),
            spikes.map_or(String::new(), |s| s.half_spikes.to_string()),
            spikes.map_or(String::new(), |s| s.full_spikes.to_string()),
        ]);
        if param.is_none() {
            ctx.results.num("k_star", report.k_star);
            ctx.results.num("lambda_star", report.lambda_star);
            ctx.results.flag("unstable", report.lambda_star > 0.0);
        }
    }
    ctx.out.table("dispersion", &curve, cfg.output.dat)?;
    ctx.out.table("dispersion_summary", &summary, cfg.output.dat)?;
    Ok(())
}

fn stability_map(ctx: &mut Context<'_>) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let s = &cfg.stability;
    if s.b_points < 2 || !(s.b_max > s.b_min) {
        return Err(CliError::Config("stability map needs b_points >= 2 and b_max > b_min".into()));
    }
    let step = (s.b_max - s.b_min) / (s.b_points - 1) as f64;
    let bs: Vec<f64> = (0..s.b_points).map(|i| s.b_min + step * i as f64).collect();
    let map = instability_domain(&cfg.model, s.k, &bs, &bs, ctx.exec);
    let mut t = Table::new(["b1", "b2", "cell"]);
    for (i, &b1) in map.b1_values.iter().enumerate() {
        for (j, &b2) in map.b2_values.iter().enumerate() {
            let cell = match map.get(i, j) {
                DomainCell::Stable => "stable",
                DomainCell::Unstable => "unstable",
                DomainCell::NotApplicable => "not-applicable",
            };
            t.push(vec![fmt_num(b1), fmt_num(b2), cell.into()]);
        }
    }
    ctx.out.table("stability_map", &t, cfg.output.dat)?;
    ctx.results.int("unstable_cells", map.count(DomainCell::Unstable) as i64);
    ctx.results.int("stable_cells", map.count(DomainCell::Stable) as i64);
    ctx.results.int("not_applicable_cells", map.count(DomainCell::NotApplicable) as i64);
    Ok(())
}

fn critical(ctx: &mut Context<'_>) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let search = cfg.critical_search();
    let Some(param) = cfg.sweep_param()? else {
        let c = critical_b(&cfg.model, &search)?;
        ctx.results.num("b_min", c.b_min);
        ctx.results.num("k_at_min", c.k_at_min);
        return Ok(());
    };
    let values = cfg.sweep_values()?;
    let curve = threshold_curve(param, &values, &cfg.model, &search, ctx.exec);
    let mut t = Table::new(["value", "b_min", "k_at_min"]);
    for p in &curve.points {
        t.push(vec![
            fmt_num(p.value),
            fmt_opt(p.critical.map(|c| c.b_min)),
            fmt_opt(p.critical.map(|c| c.k_at_min)),
        ]);
    }
    ctx.out.table("critical_b", &t, cfg.output.dat)?;
    ctx.results.text("param", param.name());
    if let Some(last) = curve.cutoff() {
        ctx.results.num("cutoff_sampled", last);
        let next = curve
            .points
            .windows(2)
            .find(|w| w[0].value == last)
            .map(|w| w[1].value)
            .expect("cutoff is followed by a gap");
        let tol = (next - last).abs() * 1e-3;
        let cut = instability_cutoff(param, last, next, &cfg.model, &search, tol)?;
        ctx.results.num("cutoff", cut);
    }
    Ok(())
}

fn threshold(ctx: &mut Context<'_>) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let grid = grid_for(cfg)?;
    let shape = cfg.threshold_shape();
    let search = cfg.threshold_search();
    let sim = cfg.sim_config();
    let Some(param) = cfg.sweep_param()? else {
        let r = threshold_amplitude(&cfg.model, &grid, &sim, &shape, &search, ctx.exec)?;
        match r {
            AmplitudeThreshold::Threshold { amplitude, probes } => {
                ctx.results.num("threshold", amplitude);
                ctx.results.int("probes", probes.len() as i64);
            }
            AmplitudeThreshold::NoPattern { probes } => {
                ctx.results.text("threshold", "none");
                ctx.results.int("probes", probes.len() as i64);
            }
        }
        return Ok(());
    };
    let values = cfg.sweep_values()?;
    let rows = ctx.exec.map(&values, |&v| {
        threshold_amplitude(&cfg.model.with(param, v), &grid, &sim, &shape, &search, Execution::Sequential)
    });
    let mut t = Table::new(["value", "threshold", "probes"]);
    let mut first_error = None;
    for (&v, r) in values.iter().zip(rows) {
        match r {
            Ok(AmplitudeThreshold::Threshold { amplitude, probes }) => {
                t.push(vec![fmt_num(v), fmt_num(amplitude), probes.len().to_string()])
            }
            Ok(AmplitudeThreshold::NoPattern { probes }) => {
                t.push(vec![fmt_num(v), String::new(), probes.len().to_string()])
            }
            Err(e) => {
                t.push(vec![fmt_num(v), "error".into(), String::new()]);
                first_error.get_or_insert(CliError::from(e));
            }
        }
    }
    ctx.out.table("threshold", &t, cfg.output.dat)?;
    ctx.results.text("param", param.name());
    first_error.map_or(Ok(()), Err)
}

fn decompose_file(ctx: &mut Context<'_>) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    if cfg.decompose.input.is_empty() {
        return Err(CliError::Config("decompose.input must name a profile CSV".into()));
    }
    let (x, fields) = read_profile(Path::new(&cfg.decompose.input))?;
    let n = x.len();
    let modes = cfg.decompose.modes.min(n.saturating_sub(2) / 2);
    let length = if n > 1 { x[n - 1] - x[0] + (x[n - 1] - x[0]) / (n - 1) as f64 } else { 0.0 };
    let alpha = decompose(&fields[0], modes)?;
    let gamma = decompose(&fields[1], modes)?;
    let k = std::f64::consts::PI / length;
    let beta = lvchemo::galerkin::beta_from_gamma(&gamma, k);
    let spectrum = ModeSpectrum {
        length,
        alpha,
        gamma,
        beta,
    };
    ctx.out.table("spectrum", &spectrum_table(&spectrum), cfg.output.dat)?;
    ctx.results.num("length", length);
    ctx.results.int("samples", n as i64);
    ctx.results.text("dominant_modes_u", dominant_text(&spectrum.alpha, cfg.decompose.dominance));
    ctx.results.text("dominant_modes_v", dominant_text(&spectrum.gamma, cfg.decompose.dominance));
    Ok(())
}

/// Reads `x,u,v,c` columns; the grid is assumed uniform and cell-centred.
fn read_profile(path: &Path) -> Result<(Vec<f64>, [Vec<f64>; 3]), CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Config(format!("{}: missing column `{name}`", path.display())))
    };
    let idx = [col("x")?, col("u")?, col("v")?, col("c")?];
    let mut x = Vec::new();
    let mut fields = [Vec::new(), Vec::new(), Vec::new()];
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let get = |j: usize| -> Result<f64, CliError> {
            record
                .get(idx[j])
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| CliError::Config(format!("{}: bad number on data row {}", path.display(), line + 1)))
        };
        x.push(get(0)?);
        for (j, f) in fields.iter_mut().enumerate() {
            f.push(get(j + 1)?);
        }
    }
    Ok((x, fields))
}

fn scan(ctx: &mut Context<'_>) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let lengths = cfg.scan_lengths()?;
    let modes = cfg.scan.modes;
    let scan = wavelength_scan(
        &cfg.model,
        &lengths,
        &cfg.initial_condition(),
        modes,
        cfg.grid.dx,
        &cfg.sim_config(),
        ctx.exec,
    )?;
    let mut header = vec!["length".to_string(), "classification".into(), "half_spikes".into()];
    header.extend(indexed("alpha", modes + 1));
    header.extend(indexed("gamma", modes + 1));
    let mut t = Table::new(header);
    for r in &scan.rows {
        let mut row = vec![
            fmt_num(r.length),
            r.classification.to_string(),
            r.half_spikes.map_or(String::new(), |h| h.to_string()),
        ];
        row.extend(r.alpha.iter().map(|&a| fmt_num(a)));
        row.extend(r.gamma.iter().map(|&g| fmt_num(g)));
        t.push(row);
    }
    ctx.out.table("scan", &t, cfg.output.dat)?;
    if let (Some(l), Some(a)) = (scan.lambda0, scan.alpha_max) {
        ctx.results.num("lambda0", l);
        ctx.results.num("alpha_max", a);
    }
    let stuck: Vec<String> = scan.not_converged().map(fmt_num).collect();
    ctx.results.text("not_converged_lengths", stuck.join(" "));
    Ok(())
}

fn galerkin_header(modes: usize, extra: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = vec!["source".into()];
    h.extend(indexed("alpha", modes + 1));
    h.extend(indexed("gamma", modes + 1));
    h.extend(indexed("beta", modes + 1));
    h.extend(extra.iter().map(|s| s.to_string()));
    h
}

fn spectrum_cells(s: &ModeSpectrum, modes: usize) -> Vec<String> {
    let pad = |v: &[f64]| (0..=modes).map(|i| v.get(i).map_or(String::new(), |&x| fmt_num(x))).collect::<Vec<_>>();
    let mut cells = pad(&s.alpha);
    cells.extend(pad(&s.gamma));
    cells.extend(pad(&s.beta));
    cells
}

fn galerkin(ctx: &mut Context<'_>) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let g = &cfg.galerkin;
    let problem = GalerkinProblem::new(cfg.model, g.modes);
    let (seed, descriptor) = match g.seed {
        GalerkinSeed::Simulated => {
            let (grid, out) = reference_run(cfg)?;
            let spectrum = decompose_state(&out.final_state, &grid, g.modes.max(1))?;
            (problem.truncate(&spectrum), SeedDescriptor::Simulated)
        }
        GalerkinSeed::CoexistenceKick => {
            let x = coexistence_kick_seed(&problem, g.kick)
                .ok_or_else(|| CliError::Config("coexistence state does not exist".into()))?;
            (x, SeedDescriptor::CoexistenceKick { kick: g.kick })
        }
        GalerkinSeed::BaseKick => {
            let base = stable_base_state(&cfg.model)
                .ok_or_else(|| CliError::Config("no stable physical homogeneous state".into()))?;
            let mut x = problem.homogeneous(&base);
            if g.modes >= 1 {
                x[1] = g.kick;
            }
            (x, SeedDescriptor::BaseKick { kick: g.kick, base: base.kind })
        }
    };
    let sol = solve_patterned(&problem, &seed, descriptor, &cfg.newton(), &cfg.multistart(), ctx.exec)?;
    let mut t = Table::new(galerkin_header(g.modes, &["converged", "residual_norm", "newton_iters", "seed"]));
    let mut row = vec![format!("M={}", g.modes)];
    row.extend(spectrum_cells(&sol.spectrum, g.modes));
    row.extend([
        sol.converged.to_string(),
        fmt_num(sol.residual_norm),
        sol.newton_iters.to_string(),
        sol.seed.to_string(),
    ]);
    t.push(row);
    ctx.out.table("galerkin", &t, cfg.output.dat)?;
    ctx.results.flag("converged", sol.converged);
    ctx.results.num("residual_norm", sol.residual_norm);
    ctx.results.text("seed", sol.seed.to_string());
    if !sol.converged {
        return Err(CliError::NotConverged(format!(
            "Newton stopped at residual {:e} after {} iterations",
            sol.residual_norm, sol.newton_iters
        )));
    }
    Ok(())
}

fn truncation(ctx: &mut Context<'_>) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let g = &cfg.galerkin;
    let (grid, out) = reference_run(cfg)?;
    if out.classification != Classification::StationaryPattern {
        return Err(CliError::NotConverged(format!(
            "reference run ended {}, a stationary pattern is required",
            out.classification
        )));
    }
    let rows = truncation_study(
        &cfg.model,
        &out.final_state,
        &grid,
        g.max_modes,
        cfg.first_order_policy(),
        &cfg.newton(),
        &cfg.multistart(),
        ctx.exec,
    )?;
    let m = g.max_modes;
    let mut t = Table::new(galerkin_header(m, &["er_u", "er_v", "converged", "seed"]));
    let numerical = decompose_state(&out.final_state, &grid, m.max(1))?;
    let mut row = vec!["numerical".to_string()];
    row.extend(spectrum_cells(&numerical, m));
    row.extend([String::new(), String::new(), String::new(), String::new()]);
    t.push(row);
    for r in &rows {
        let mut row = vec![format!("M={}", r.modes)];
        row.extend(spectrum_cells(&r.solution.spectrum, m));
        row.extend([
            fmt_num(r.er_u),
            fmt_num(r.er_v),
            r.solution.converged.to_string(),
            r.solution.seed.to_string(),
        ]);
        t.push(row);
        ctx.results.num(&format!("er_u_m{}", r.modes), r.er_u);
    }
    ctx.out.table("truncation", &t, cfg.output.dat)?;
    ctx.out.table("reference_profile", &profile_table(&out.final_state, &grid), cfg.output.dat)?;
    Ok(())
}

fn param_study(ctx: &mut Context<'_>) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let param: Param = cfg
        .sweep_param()?
        .ok_or_else(|| CliError::Config("param-study needs sweep.param".into()))?;
    let values = cfg.sweep_values()?;
    let lengths = cfg.scan_lengths()?;
    let chars = parameter_characteristics(param, &values, &cfg.model, &lengths, cfg.galerkin.modes, &cfg.newton(), ctx.exec);
    let mut header = vec!["value", "lambda0", "alpha1", "gamma1"];
    if cfg.scan.simulate {
        header.extend(["sim_lambda0", "sim_alpha_max"]);
    }
    let mut t = Table::new(header);
    for c in &chars {
        let mut row = vec![fmt_num(c.value), fmt_opt(c.lambda0), fmt_opt(c.alpha1), fmt_opt(c.gamma1)];
        if cfg.scan.simulate {
            let p = cfg.model.with(param, c.value);
            let scan = wavelength_scan(
                &p,
                &lengths,
                &cfg.initial_condition(),
                cfg.scan.modes,
                cfg.grid.dx,
                &cfg.sim_config(),
                ctx.exec,
            )?;
            row.extend([fmt_opt(scan.lambda0), fmt_opt(scan.alpha_max)]);
        }
        t.push(row);
    }
    ctx.out.table("param_study", &t, cfg.output.dat)?;
    ctx.results.text("param", param.name());
    Ok(())
}
