//! Experiment configuration: TOML sections layered as built-in defaults,
//! preset, config file, then `--set` overrides.

use lvchemo::galerkin::{Multistart, NewtonOptions, SeedPolicy};
use lvchemo::model::{Param, StateKind};
use lvchemo::sim::{
    Field, FinitePerturbation, FluxScheme, InfinitesimalMode, InitialCondition, Placement, SimConfig,
    ThresholdSearch,
};
use lvchemo::stability::CriticalBSearch;
use lvchemo::ModelParams;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    pub grid: GridSection,
    pub perturbation: PerturbationSection,
    pub sweep: SweepSection,
    pub stability: StabilitySection,
    pub threshold: ThresholdSection,
    pub scan: ScanSection,
    pub galerkin: GalerkinSection,
    pub decompose: DecomposeSection,
    pub output: OutputSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dx: f64,
    pub t_max: f64,
    /// Max-norm of the time derivative regarded as stationary.
    pub tol: f64,
    pub window: usize,
    pub dt_safety: f64,
    pub dt_refresh: usize,
    pub scheme: FluxScheme,
    pub pattern_eps: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationKind {
    Noise,
    Cosine,
    Finite,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    pub kind: PerturbationKind,
    pub base: StateKind,
    /// Signed for cosine seeds, where the sign sets the orientation.
    pub amplitude: f64,
    pub seed: u64,
    /// Cosine mode index.
    pub mode: usize,
    pub field: Field,
    pub width_fraction: f64,
    pub placement: Placement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Empty for no sweep.
    pub param: String,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    /// Explicit values; take precedence over `start..=stop`.
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    pub state: StateKind,
    pub k_min: f64,
    pub k_max: f64,
    pub points: usize,
    /// Wavenumber of the `(b1, b2)` stability map.
    pub k: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub b_points: usize,
    /// Upper end of the `b` window searched by critical-b.
    pub b_cap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
    pub probes_per_round: usize,
    pub field: Field,
    pub width_fraction: f64,
    pub placement: Placement,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub l_start: f64,
    pub l_stop: f64,
    pub l_step: f64,
    pub modes: usize,
    /// Add a simulated wavelength scan to every param-study value.
    pub simulate: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GalerkinSeed {
    Simulated,
    CoexistenceKick,
    BaseKick,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GalerkinSection {
    pub modes: usize,
    pub max_modes: usize,
    pub seed: GalerkinSeed,
    /// Seeding of the `M = 1` order in truncation studies.
    pub first_order: GalerkinSeed,
    pub kick: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub multistart_starts: usize,
    pub multistart_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeSection {
    /// CSV with columns `x,u,v,c`.
    pub input: String,
    pub modes: usize,
    pub dominance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Also write whitespace-separated `.dat` copies of the tables.
    pub dat: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        let crit = CriticalBSearch::default();
        let thr = ThresholdSearch::default();
        let newton = NewtonOptions::default();
        let ms = Multistart::default();
        ExperimentConfig {
            model: ModelParams::default(),
            grid: GridSection {
                dx: lvchemo::sim::DEFAULT_DX,
                t_max: sim.t_max,
                tol: sim.tol,
                window: sim.window,
                dt_safety: sim.dt_safety,
                dt_refresh: sim.dt_refresh,
                scheme: sim.scheme,
                pattern_eps: sim.pattern_eps,
            },
            perturbation: PerturbationSection {
                kind: PerturbationKind::Noise,
                base: StateKind::Coexistence,
                amplitude: 1e-3,
                seed: 1,
                mode: 1,
                field: Field::V,
                width_fraction: 0.2,
                placement: Placement::Center,
            },
            sweep: SweepSection {
                param: String::new(),
                start: 0.0,
                stop: 0.0,
                step: 0.0,
                values: Vec::new(),
            },
            stability: StabilitySection {
                state: StateKind::Coexistence,
                k_min: 0.0,
                k_max: 1.0,
                points: lvchemo::stability::DEFAULT_DISPERSION_POINTS,
                k: 0.2,
                b_min: 0.01,
                b_max: 0.99,
                b_points: 99,
                b_cap: crit.b_range.1,
            },
            threshold: ThresholdSection {
                lo: thr.lo,
                hi: thr.hi,
                tol: thr.tol,
                probes_per_round: thr.probes_per_round,
                field: Field::V,
                width_fraction: 0.2,
                placement: Placement::Center,
            },
            scan: ScanSection {
                l_start: 1.0,
                l_stop: 50.0,
                l_step: 1.0,
                modes: 9,
                simulate: false,
            },
            galerkin: GalerkinSection {
                modes: 3,
                max_modes: 4,
                seed: GalerkinSeed::Simulated,
                first_order: GalerkinSeed::BaseKick,
                kick: 0.1,
                tol: newton.tol,
                max_iter: newton.max_iter,
                multistart_starts: ms.starts,
                multistart_seed: ms.seed,
            },
            decompose: DecomposeSection {
                input: String::new(),
                modes: lvchemo::spectral::DEFAULT_MODES,
                dominance: lvchemo::spectral::DEFAULT_DOMINANCE,
            },
            output: OutputSection { dat: false },
        }
    }
}

impl ExperimentConfig {
    /// Builds a config from layered TOML sources and `key=value` overrides.
    pub fn layered(layers: &[Table], overrides: &[String]) -> Result<Self, CliError> {
        let mut merged = match Value::try_from(ExperimentConfig::default()) {
            Ok(Value::Table(t)) => t,
            _ => unreachable!("config serialises to a table"),
        };
        for layer in layers {
            merge(&mut merged, layer);
        }
        for item in overrides {
            apply_override(&mut merged, item)?;
        }
        let cfg: ExperimentConfig = Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model
            .validate()
            .map_err(|e| CliError::Config(format!("model: {e}")))?;
        if !(self.grid.dx > 0.0 && self.grid.dx <= 0.5) {
            return Err(CliError::Config(format!("grid.dx must lie in (0, 0.5], got {}", self.grid.dx)));
        }
        if !(self.grid.tol > 0.0 && self.grid.t_max > 0.0 && self.grid.dt_safety > 0.0 && self.grid.dt_safety <= 1.0)
        {
            return Err(CliError::Config(
                "grid.tol and grid.t_max must be positive, grid.dt_safety in (0, 1]".into(),
            ));
        }
        if !self.sweep.param.is_empty() {
            self.sweep_values()?;
        }
        Ok(())
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            dt_safety: self.grid.dt_safety,
            dt_refresh: self.grid.dt_refresh,
            tol: self.grid.tol,
            window: self.grid.window,
            t_max: self.grid.t_max,
            scheme: self.grid.scheme,
            pattern_eps: self.grid.pattern_eps,
        }
    }

    pub fn initial_condition(&self) -> InitialCondition {
        let p = &self.perturbation;
        match p.kind {
            PerturbationKind::Noise => InitialCondition::Infinitesimal {
                base: p.base,
                amplitude: p.amplitude,
                mode: InfinitesimalMode::Noise { seed: p.seed },
            },
            PerturbationKind::Cosine => InitialCondition::Infinitesimal {
                base: p.base,
                amplitude: p.amplitude,
                mode: InfinitesimalMode::Cosine { mode: p.mode },
            },
            PerturbationKind::Finite => InitialCondition::Finite {
                base: p.base,
                perturbation: FinitePerturbation {
                    field: p.field,
                    amplitude: p.amplitude,
                    width_fraction: p.width_fraction,
                    placement: p.placement,
                },
            },
        }
    }

    pub fn threshold_shape(&self) -> FinitePerturbation {
        FinitePerturbation {
            field: self.threshold.field,
            amplitude: self.threshold.hi,
            width_fraction: self.threshold.width_fraction,
            placement: self.threshold.placement,
        }
    }

    pub fn threshold_search(&self) -> ThresholdSearch {
        ThresholdSearch {
            lo: self.threshold.lo,
            hi: self.threshold.hi,
            tol: self.threshold.tol,
            probes_per_round: self.threshold.probes_per_round,
        }
    }

    pub fn critical_search(&self) -> CriticalBSearch {
        let mut s = CriticalBSearch::default();
        s.b_range.1 = self.stability.b_cap;
        s
    }

    pub fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.galerkin.tol,
            max_iter: self.galerkin.max_iter,
            ..Default::default()
        }
    }

    pub fn multistart(&self) -> Multistart {
        Multistart {
            starts: self.galerkin.multistart_starts,
            seed: self.galerkin.multistart_seed,
        }
    }

    pub fn first_order_policy(&self) -> SeedPolicy {
        match self.galerkin.first_order {
            GalerkinSeed::BaseKick => SeedPolicy::BaseKick {
                kick: self.galerkin.kick,
            },
            _ => SeedPolicy::Simulated,
        }
    }

    /// The swept parameter, if any.
    pub fn sweep_param(&self) -> Result<Option<Param>, CliError> {
        if self.sweep.param.is_empty() {
            return Ok(None);
        }
        self.sweep
            .param
            .parse()
            .map(Some)
            .map_err(|e| CliError::Config(format!("sweep.param: {e}")))
    }

    pub fn sweep_values(&self) -> Result<Vec<f64>, CliError> {
        if !self.sweep.values.is_empty() {
            return Ok(self.sweep.values.clone());
        }
        let s = &self.sweep;
        range(s.start, s.stop, s.step).map_err(|e| CliError::Config(format!("sweep: {e}")))
    }

    pub fn scan_lengths(&self) -> Result<Vec<f64>, CliError> {
        let s = &self.scan;
        let lengths = range(s.l_start, s.l_stop, s.l_step).map_err(|e| CliError::Config(format!("scan: {e}")))?;
        if lengths.iter().any(|&l| l <= 0.0) {
            return Err(CliError::Config("scan lengths must be positive".into()));
        }
        Ok(lengths)
    }
}

/// `start, start + step, ...` up to `stop` inclusive; `step` may be negative.
fn range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, String> {
    if step == 0.0 || !step.is_finite() || (stop - start) * step < 0.0 {
        return Err(format!("cannot step from {start} to {stop} by {step}"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    if n > 1_000_000 {
        return Err(format!("{} points requested", n + 1));
    }
    Ok((0..=n).map(|i| start + step * i as f64).collect())
}

fn merge(base: &mut Table, layer: &Table) {
    for (key, value) in layer {
        match (base.get_mut(key), value) {
            (Some(Value::Table(b)), Value::Table(l)) => merge(b, l),
            _ => {
                base.insert(key.clone(), value.clone());
            }
        }
    }
}

/// Applies `section.key=value`. The value is read as a TOML literal and
/// falls back to a plain string.
fn apply_override(table: &mut Table, item: &str) -> Result<(), CliError> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{item}`")))?;
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    let keys: Vec<&str> = path.trim().split('.').collect();
    let (last, parents) = keys.split_last().expect("split yields one item");
    let mut cursor = table;
    for key in parents {
        cursor = match cursor.get_mut(*key) {
            Some(Value::Table(t)) => t,
            _ => return Err(CliError::Config(format!("unknown config section `{key}` in `{path}`"))),
        };
    }
    if !cursor.contains_key(*last) {
        return Err(CliError::Config(format!("unknown config key `{path}`")));
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

pub fn parse_table(text: &str, origin: &str) -> Result<Table, CliError> {
    text.parse::<Table>()
        .map_err(|e| CliError::Config(format!("{origin}: {}", e.message())))
}
