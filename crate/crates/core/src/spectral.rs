//! Cosine-series analysis of stationary profiles.
//!
//! A profile on `(0, L)` with no-flux walls is expanded as
//! `u(x) = a_0 + sum_i a_i cos(i pi x / L)`. Coefficients are computed by the
//! midpoint rule on the cell centres, which is the composite trapezoid rule
//! applied to the even reflection of the profile. On `N` cells the discrete
//! cosines of index `< N` are exactly orthogonal under this rule, so
//! decomposition and reconstruction are inverse to rounding.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::model::ModelParams;
use crate::sim::{run_to_stationary, Classification, Field, FieldState, Grid, InitialCondition, SimConfig, SimError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("{samples} samples cannot resolve {modes} modes (need at least {need})")]
    TooFewSamples { samples: usize, modes: usize, need: usize },
    #[error("profile length {got} does not match grid of {expected} cells")]
    GridMismatch { got: usize, expected: usize },
}

/// Default number of retained modes.
pub const DEFAULT_MODES: usize = 64;

/// Cosine coefficients of `u`, `v` and `c` on a domain of length `L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSpectrum {
    pub length: f64,
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl ModeSpectrum {
    /// Highest retained mode index.
    pub fn modes(&self) -> usize {
        self.alpha.len().saturating_sub(1)
    }

    /// Fundamental wavenumber `pi / L`.
    pub fn k(&self) -> f64 {
        PI / self.length
    }

    pub fn coefficients(&self, field: Field) -> &[f64] {
        match field {
            Field::U => &self.alpha,
            Field::V => &self.gamma,
            Field::C => &self.beta,
        }
    }

    /// Drops modes above `m`.
    pub fn truncated(&self, m: usize) -> Self {
        let cut = |a: &[f64]| a[..(m + 1).min(a.len())].to_vec();
        ModeSpectrum {
            length: self.length,
            alpha: cut(&self.alpha),
            gamma: cut(&self.gamma),
            beta: cut(&self.beta),
        }
    }
}

/// Cosine coefficients `0..=modes` of a cell-centred profile.
pub fn decompose(profile: &[f64], modes: usize) -> Result<Vec<f64>, SpectralError> {
    let n = profile.len();
    let need = 2 * modes + 2;
    if n < need {
        return Err(SpectralError::TooFewSamples {
            samples: n,
            modes,
            need,
        });
    }
    let nf = n as f64;
    Ok((0..=modes)
        .map(|i| {
            let w = if i == 0 { 1.0 } else { 2.0 };
            let s: f64 = profile
                .iter()
                .enumerate()
                .map(|(j, &y)| y * (PI * i as f64 * (j as f64 + 0.5) / nf).cos())
                .sum();
            w * s / nf
        })
        .collect())
}

pub fn decompose_state(state: &FieldState, grid: &Grid, modes: usize) -> Result<ModeSpectrum, SpectralError> {
    if state.len() != grid.cells() {
        return Err(SpectralError::GridMismatch {
            got: state.len(),
            expected: grid.cells(),
        });
    }
    Ok(ModeSpectrum {
        length: grid.length(),
        alpha: decompose(&state.u, modes)?,
        gamma: decompose(&state.v, modes)?,
        beta: decompose(&state.c, modes)?,
    })
}

/// Evaluates a truncated cosine sum at the cell centres of `grid`.
pub fn reconstruct_profile(coefficients: &[f64], grid: &Grid) -> Vec<f64> {
    let k = PI / grid.length();
    (0..grid.cells())
        .map(|j| {
            let x = grid.x(j);
            coefficients
                .iter()
                .enumerate()
                .map(|(i, a)| a * (k * i as f64 * x).cos())
                .sum()
        })
        .collect()
}

pub fn reconstruct(spectrum: &ModeSpectrum, grid: &Grid) -> FieldState {
    FieldState {
        t: 0.0,
        u: reconstruct_profile(&spectrum.alpha, grid),
        v: reconstruct_profile(&spectrum.gamma, grid),
        c: reconstruct_profile(&spectrum.beta, grid),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DominantModes {
    /// `(index, coefficient)` with `|coefficient| >= threshold`, largest first.
    pub modes: Vec<(usize, f64)>,
    /// Smallest nonzero dominant index.
    pub fundamental: Option<usize>,
    /// Dominant indices that are multiples of the fundamental, ascending.
    pub harmonics: Vec<usize>,
}

impl DominantModes {
    pub fn indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = self.modes.iter().map(|m| m.0).collect();
        idx.sort_unstable();
        idx
    }
}

/// Default cutoff for [`dominant_modes`].
pub const DEFAULT_DOMINANCE: f64 = 0.01;

pub fn dominant_modes(coefficients: &[f64], threshold: f64) -> DominantModes {
    let mut modes: Vec<(usize, f64)> = coefficients
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, a)| a.abs() >= threshold)
        .collect();
    modes.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
    let fundamental = modes.iter().map(|m| m.0).filter(|&i| i > 0).min();
    let harmonics = match fundamental {
        Some(f) => {
            let mut h: Vec<usize> = modes.iter().map(|m| m.0).filter(|&i| i > 0 && i % f == 0).collect();
            h.sort_unstable();
            h
        }
        None => Vec::new(),
    };
    DominantModes {
        modes,
        fundamental,
        harmonics,
    }
}

/// One domain length of a [`WavelengthScan`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub length: f64,
    pub classification: Classification,
    pub half_spikes: Option<u32>,
    /// `alpha_0..alpha_m` of the stationary `u`; only `alpha_0` is kept for
    /// homogeneous outcomes.
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl ScanRow {
    /// Whether `alpha_1` is the largest nonconstant coefficient of a pattern.
    pub fn mode_one_dominant(&self) -> bool {
        self.classification == Classification::StationaryPattern
            && self.alpha.len() > 1
            && self.alpha[2..].iter().all(|a| a.abs() < self.alpha[1].abs())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WavelengthScan {
    pub rows: Vec<ScanRow>,
    /// Length maximising `|alpha_1|` in the window where mode 1 dominates.
    pub lambda0: Option<f64>,
    pub alpha_max: Option<f64>,
}

impl WavelengthScan {
    pub fn not_converged(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows
            .iter()
            .filter(|r| r.classification == Classification::NotConverged)
            .map(|r| r.length)
    }
}

/// Simulates every length in `lengths` to stationarity and tabulates the
/// cosine coefficients `0..=modes`.
///
/// `dx` sets the grid spacing; short domains get at least
/// [`crate::sim::MIN_CELLS`] cells.
pub fn wavelength_scan(
    params: &ModelParams,
    lengths: &[f64],
    initial: &InitialCondition,
    modes: usize,
    dx: f64,
    cfg: &SimConfig,
    exec: Execution,
) -> Result<WavelengthScan, SimError> {
    let rows = exec.map(lengths, |&l| -> Result<ScanRow, SimError> {
        let p = ModelParams { length: l, ..*params };
        let grid = Grid::with_spacing(l, dx)?;
        let out = run_to_stationary(initial.build(&p, &grid)?, &p, &grid, cfg)?;
        let m = modes.min((grid.cells() - 2) / 2);
        let mut alpha = decompose(&out.final_state.u, m).expect("mode count clamped to grid");
        let mut gamma = decompose(&out.final_state.v, m).expect("mode count clamped to grid");
        alpha.resize(modes + 1, 0.0);
        gamma.resize(modes + 1, 0.0);
        if out.classification == Classification::Homogeneous {
            alpha[1..].iter_mut().for_each(|a| *a = 0.0);
            gamma[1..].iter_mut().for_each(|a| *a = 0.0);
        }
        Ok(ScanRow {
            length: l,
            classification: out.classification,
            half_spikes: out.spike_count.map(|s| s.half_spikes),
            alpha,
            gamma,
        })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let (lambda0, alpha_max) = match characteristic_length(&rows) {
        Some((l, a)) => (Some(l), Some(a)),
        None => (None, None),
    };
    Ok(WavelengthScan {
        rows,
        lambda0,
        alpha_max,
    })
}

/// Global maximum of `|alpha_1|` over the contiguous mode-1-dominant window
/// containing it.
fn characteristic_length(rows: &[ScanRow]) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    let mut i = 0;
    while i < rows.len() {
        if !rows[i].mode_one_dominant() {
            i += 1;
            continue;
        }
        while i < rows.len() && rows[i].mode_one_dominant() {
            let a = rows[i].alpha[1].abs();
            if best.is_none_or(|(_, b)| a > b) {
                best = Some((rows[i].length, a));
            }
            i += 1;
        }
    }
    best
}

/// Early-time exponential growth rate of cosine mode `mode`.
///
/// Starts from `base` plus `amplitude cos(mode pi x / L)` in every field and
/// fits `ln |alpha_mode|` between `t0` and `t1`. Both times should lie in the
/// linear regime, after transients of the decaying eigen-directions.
pub fn modal_growth_rate(
    params: &ModelParams,
    grid: &Grid,
    base: &crate::model::SteadyState,
    mode: usize,
    amplitude: f64,
    (t0, t1): (f64, f64),
    safety: f64,
) -> Result<f64, SimError> {
    let mut state = crate::sim::perturb_infinitesimal(
        base,
        grid,
        amplitude,
        crate::sim::InfinitesimalMode::Cosine { mode },
    )?;
    let mut stepper = crate::sim::Stepper::new(*params, *grid, crate::sim::FluxScheme::Hybrid);
    let coefficient = |s: &FieldState| {
        let n = s.len() as f64;
        2.0 / n
            * s.u
                .iter()
                .enumerate()
                .map(|(j, y)| (y - base.u) * (PI * mode as f64 * (j as f64 + 0.5) / n).cos())
                .sum::<f64>()
    };
    stepper.advance_to(&mut state, t0, safety)?;
    let (ta, a) = (state.t, coefficient(&state).abs());
    stepper.advance_to(&mut state, t1, safety)?;
    let (tb, b) = (state.t, coefficient(&state).abs());
    Ok((b / a).ln() / (tb - ta))
}
