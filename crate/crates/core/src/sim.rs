//! Finite-volume integration of the full model on `(0, L)` with no-flux
//! boundaries.
//!
//! Cells are uniform and values live at cell centres. Diffusive and
//! chemotactic fluxes are evaluated on faces; both boundary faces carry zero
//! flux, so with the kinetics switched off the totals of `u` and `v` are
//! conserved to rounding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::model::{reaction_terms, ModelParams, StateKind, SteadyState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("grid needs at least {min} cells, got {got}")]
    TooFewCells { min: usize, got: usize },
    #[error("invalid grid: length {length}, spacing {dx}")]
    InvalidGrid { length: f64, dx: f64 },
    #[error("non-finite value in {field} at cell {cell}, t = {t}")]
    NonFinite { field: Field, cell: usize, t: f64 },
    #[error("{field} = {value} < 0 at cell {cell}, t = {t}")]
    Negative {
        field: Field,
        cell: usize,
        value: f64,
        t: f64,
    },
    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),
    #[error("invalid time step {0}")]
    InvalidTimeStep(f64),
    #[error("threshold bracket: {0}")]
    Bracket(String),
    #[error("pattern at amplitude {below} but decay at larger amplitude {above}")]
    NonMonotone { below: f64, above: f64 },
    #[error("probe at amplitude {amplitude} did not settle before t_max")]
    ProbeNotConverged { amplitude: f64 },
}

/// Smallest admissible number of cells.
pub const MIN_CELLS: usize = 16;
/// Default cell width.
pub const DEFAULT_DX: f64 = 0.25;
/// Values below `-NEGATIVITY_TOL` are reported as a solver fault.
pub const NEGATIVITY_TOL: f64 = 1e-12;

/// Uniform cell-centred grid on `(0, L)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    length: f64,
    cells: usize,
}

impl Grid {
    pub fn new(length: f64, cells: usize) -> Result<Self, SimError> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(SimError::InvalidGrid {
                length,
                dx: length / cells as f64,
            });
        }
        if cells < MIN_CELLS {
            return Err(SimError::TooFewCells {
                min: MIN_CELLS,
                got: cells,
            });
        }
        Ok(Grid { length, cells })
    }

    /// Grid whose spacing is as close to `dx` as the length allows, refined
    /// to [`MIN_CELLS`] cells on short domains.
    pub fn with_spacing(length: f64, dx: f64) -> Result<Self, SimError> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(SimError::InvalidGrid { length, dx });
        }
        Self::new(length, ((length / dx).round() as usize).max(MIN_CELLS))
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn dx(&self) -> f64 {
        self.length / self.cells as f64
    }

    /// Centre of cell `i`.
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.x(i)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    U,
    V,
    C,
}

impl std::fmt::Display for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Field::U => "u",
            Field::V => "v",
            Field::C => "c",
        })
    }
}

/// Cell-centred profiles of `u`, `v` and `c` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub c: Vec<f64>,
}

impl FieldState {
    pub fn homogeneous(state: &SteadyState, grid: &Grid) -> Self {
        let n = grid.cells();
        FieldState {
            t: 0.0,
            u: vec![state.u; n],
            v: vec![state.v; n],
            c: vec![state.c; n],
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn field(&self, f: Field) -> &[f64] {
        match f {
            Field::U => &self.u,
            Field::V => &self.v,
            Field::C => &self.c,
        }
    }

    pub fn field_mut(&mut self, f: Field) -> &mut Vec<f64> {
        match f {
            Field::U => &mut self.u,
            Field::V => &mut self.v,
            Field::C => &mut self.c,
        }
    }

    /// The state reflected through `x -> L - x`.
    pub fn mirrored(&self) -> Self {
        let rev = |a: &[f64]| a.iter().rev().copied().collect::<Vec<_>>();
        FieldState {
            t: self.t,
            u: rev(&self.u),
            v: rev(&self.v),
            c: rev(&self.c),
        }
    }

    /// `max - min` of one field.
    pub fn range(&self, f: Field) -> f64 {
        let a = self.field(f);
        let (lo, hi) = a
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        hi - lo
    }

    /// Rectangle-rule integral of one field over the domain.
    pub fn total(&self, f: Field, grid: &Grid) -> f64 {
        self.field(f).iter().sum::<f64>() * grid.dx()
    }

    fn check(&self) -> Result<(), SimError> {
        for field in [Field::U, Field::V, Field::C] {
            for (cell, &value) in self.field(field).iter().enumerate() {
                if !value.is_finite() {
                    return Err(SimError::NonFinite {
                        field,
                        cell,
                        t: self.t,
                    });
                }
                if value < -NEGATIVITY_TOL {
                    return Err(SimError::Negative {
                        field,
                        cell,
                        value,
                        t: self.t,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Face value of `u` used in the chemotactic flux.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluxScheme {
    /// Arithmetic mean of the two adjacent cells.
    Centered,
    /// Value from the upwind cell of the chemotactic velocity `chi c_x`.
    Upwind,
    /// Centered while the cell Peclet number `|chi c_x| dx / D1` is at most 2,
    /// upwind beyond. Keeps `u` nonnegative across steep chemical fronts.
    #[default]
    Hybrid,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    /// Fraction of the explicit stability limit used as the time step.
    pub dt_safety: f64,
    /// The time step is recomputed every this many steps.
    pub dt_refresh: usize,
    /// Max-norm of the time derivative regarded as stationary.
    pub tol: f64,
    /// Number of consecutive steps the residual must stay below `tol`.
    pub window: usize,
    pub t_max: f64,
    pub scheme: FluxScheme,
    /// Minimal `max(u) - min(u)` of a stationary pattern.
    pub pattern_eps: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt_safety: 0.2,
            dt_refresh: 100,
            tol: 1e-8,
            window: 1000,
            t_max: 2e5,
            scheme: FluxScheme::Hybrid,
            pattern_eps: 1e-3,
        }
    }
}

/// Time step for the current state.
///
/// Diffusion sets `safety dx^2 / max(D1, D2, 1)`. The chemotactic drift
/// `chi c_x` and the kinetics add their own explicit limits, which only bind
/// for steep chemical gradients or fast reactions.
pub fn stable_dt(state: &FieldState, params: &ModelParams, grid: &Grid, safety: f64) -> f64 {
    let dx = grid.dx();
    let d_max = params.d1.max(params.d2).max(1.0);
    let mut dt = safety * dx * dx / d_max;
    let max_grad = state
        .c
        .windows(2)
        .map(|w| (w[1] - w[0]).abs() / dx)
        .fold(0.0, f64::max);
    let drift = params.chi.abs() * max_grad;
    if drift > 0.0 {
        dt = dt.min(safety * dx / drift).min(safety * 2.0 * params.d1 / (drift * drift));
    }
    let u_max = state.u.iter().cloned().fold(0.0, f64::max);
    let v_max = state.v.iter().cloned().fold(0.0, f64::max);
    let kinetic = params.r1 * (1.0 + u_max + params.b1 * v_max)
        + params.r2 * (1.0 + v_max + params.b2 * u_max)
        + 1.0;
    dt.min(safety / kinetic)
}

/// Writes the time derivative of `state` into `out` and returns its max-norm.
pub fn rhs(
    state: &FieldState,
    params: &ModelParams,
    grid: &Grid,
    scheme: FluxScheme,
    out: &mut FieldState,
) -> f64 {
    let n = state.len();
    let dx = grid.dx();
    let inv_dx = 1.0 / dx;
    let inv_dx2 = inv_dx * inv_dx;
    let (u, v, c) = (&state.u, &state.v, &state.c);
    out.t = state.t;
    out.u.resize(n, 0.0);
    out.v.resize(n, 0.0);
    out.c.resize(n, 0.0);

    // flux through the left face of cell i, carried over from the previous cell
    let mut left_flux = 0.0;
    let mut residual: f64 = 0.0;
    for i in 0..n {
        let right_flux = if i + 1 < n {
            let grad_c = (c[i + 1] - c[i]) * inv_dx;
            let velocity = params.chi * grad_c;
            let upwind = match scheme {
                FluxScheme::Centered => false,
                FluxScheme::Upwind => true,
                FluxScheme::Hybrid => velocity.abs() * dx > 2.0 * params.d1,
            };
            let u_face = if !upwind {
                0.5 * (u[i] + u[i + 1])
            } else if velocity > 0.0 {
                u[i]
            } else {
                u[i + 1]
            };
            -params.d1 * (u[i + 1] - u[i]) * inv_dx + params.chi * u_face * grad_c
        } else {
            0.0
        };
        let lap = |a: &[f64]| {
            let l = if i == 0 { a[0] } else { a[i - 1] };
            let r = if i + 1 == n { a[n - 1] } else { a[i + 1] };
            (l - 2.0 * a[i] + r) * inv_dx2
        };
        let (fu, fv, fc) = reaction_terms(u[i], v[i], c[i], params);
        let du = -(right_flux - left_flux) * inv_dx + fu;
        let dv = params.d2 * lap(v) + fv;
        let dc = lap(c) + fc;
        out.u[i] = du;
        out.v[i] = dv;
        out.c[i] = dc;
        residual = residual.max(du.abs()).max(dv.abs()).max(dc.abs());
        left_flux = right_flux;
    }
    residual
}

/// Explicit Euler integrator with reusable scratch storage.
#[derive(Clone, Debug)]
pub struct Stepper {
    params: ModelParams,
    grid: Grid,
    scheme: FluxScheme,
    scratch: FieldState,
}

impl Stepper {
    pub fn new(params: ModelParams, grid: Grid, scheme: FluxScheme) -> Self {
        Stepper {
            params,
            grid,
            scheme,
            scratch: FieldState {
                t: 0.0,
                u: vec![0.0; grid.cells()],
                v: vec![0.0; grid.cells()],
                c: vec![0.0; grid.cells()],
            },
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Advances `state` by `dt` in place; returns the residual of the state
    /// the step started from.
    pub fn step_in_place(&mut self, state: &mut FieldState, dt: f64) -> Result<f64, SimError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SimError::InvalidTimeStep(dt));
        }
        let residual = rhs(state, &self.params, &self.grid, self.scheme, &mut self.scratch);
        for (x, d) in state.u.iter_mut().zip(&self.scratch.u) {
            *x += dt * d;
        }
        for (x, d) in state.v.iter_mut().zip(&self.scratch.v) {
            *x += dt * d;
        }
        for (x, d) in state.c.iter_mut().zip(&self.scratch.c) {
            *x += dt * d;
        }
        state.t += dt;
        Ok(residual)
    }

    /// Integrates to time `t_end` with the adaptive explicit step.
    pub fn advance_to(&mut self, state: &mut FieldState, t_end: f64, safety: f64) -> Result<(), SimError> {
        let mut count = 0usize;
        let mut dt = stable_dt(state, &self.params, &self.grid, safety);
        while state.t < t_end {
            if count.is_multiple_of(100) {
                dt = stable_dt(state, &self.params, &self.grid, safety);
            }
            let h = dt.min(t_end - state.t);
            if h <= 0.0 {
                break;
            }
            self.step_in_place(state, h)?;
            count += 1;
            if count.is_multiple_of(100) {
                state.check()?;
            }
        }
        state.check()
    }
}

/// One explicit Euler step.
pub fn step(
    state: &FieldState,
    dt: f64,
    params: &ModelParams,
    grid: &Grid,
    scheme: FluxScheme,
) -> Result<FieldState, SimError> {
    let mut next = state.clone();
    Stepper::new(*params, *grid, scheme).step_in_place(&mut next, dt)?;
    next.check()?;
    Ok(next)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Homogeneous,
    StationaryPattern,
    NotConverged,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Homogeneous => "homogeneous",
            Classification::StationaryPattern => "stationary-pattern",
            Classification::NotConverged => "not-converged",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOutcome {
    pub final_state: FieldState,
    pub converged: bool,
    /// Max-norm of the time derivative at termination.
    pub residual: f64,
    pub classification: Classification,
    /// Spikes of `u` for stationary patterns.
    pub spike_count: Option<SpikeCount>,
    pub steps: u64,
}

/// Integrates until the time derivative stays below `cfg.tol` for
/// `cfg.window` consecutive steps, or until `cfg.t_max`.
pub fn run_to_stationary(
    initial: FieldState,
    params: &ModelParams,
    grid: &Grid,
    cfg: &SimConfig,
) -> Result<SimOutcome, SimError> {
    run_with_snapshots(initial, params, grid, cfg, &[], |_| {})
}

/// Like [`run_to_stationary`], calling `on_snapshot` when the simulation
/// first passes each of `snapshot_times` (sorted ascending).
pub fn run_with_snapshots<F>(
    initial: FieldState,
    params: &ModelParams,
    grid: &Grid,
    cfg: &SimConfig,
    snapshot_times: &[f64],
    mut on_snapshot: F,
) -> Result<SimOutcome, SimError>
where
    F: FnMut(&FieldState),
{
    if !(cfg.tol > 0.0) {
        return Err(SimError::InvalidTimeStep(cfg.tol));
    }
    if initial.len() != grid.cells() {
        return Err(SimError::InvalidGrid {
            length: grid.length(),
            dx: grid.dx(),
        });
    }
    initial.check()?;
    let mut state = initial;
    let mut stepper = Stepper::new(*params, *grid, cfg.scheme);
    let mut dt = stable_dt(&state, params, grid, cfg.dt_safety);
    let mut calm = 0usize;
    let mut steps = 0u64;
    let mut next_snapshot = 0usize;
    let refresh = cfg.dt_refresh.max(1) as u64;
    let (converged, residual) = loop {
        while next_snapshot < snapshot_times.len() && state.t >= snapshot_times[next_snapshot] {
            on_snapshot(&state);
            next_snapshot += 1;
        }
        if steps.is_multiple_of(refresh) {
            dt = stable_dt(&state, params, grid, cfg.dt_safety);
            state.check()?;
        }
        let residual = rhs(&state, params, grid, cfg.scheme, &mut stepper.scratch);
        if residual < cfg.tol {
            calm += 1;
        } else {
            calm = 0;
        }
        if calm >= cfg.window {
            break (true, residual);
        }
        if state.t >= cfg.t_max {
            break (false, residual);
        }
        let s = &stepper.scratch;
        for (x, d) in state.u.iter_mut().zip(&s.u) {
            *x += dt * d;
        }
        for (x, d) in state.v.iter_mut().zip(&s.v) {
            *x += dt * d;
        }
        for (x, d) in state.c.iter_mut().zip(&s.c) {
            *x += dt * d;
        }
        state.t += dt;
        steps += 1;
    };
    state.check()?;
    let patterned = state.range(Field::U) > cfg.pattern_eps;
    let classification = match (converged, patterned) {
        (false, _) => Classification::NotConverged,
        (true, true) => Classification::StationaryPattern,
        (true, false) => Classification::Homogeneous,
    };
    let spike_count = (classification == Classification::StationaryPattern)
        .then(|| count_spikes(&state.u, None));
    Ok(SimOutcome {
        final_state: state,
        converged,
        residual,
        classification,
        spike_count,
        steps,
    })
}

/// Small perturbation shapes around a homogeneous state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InfinitesimalMode {
    /// Independent uniform noise in `[-a, a]` per cell and field.
    Noise { seed: u64 },
    /// `a cos(i pi x / L)` added to all three fields.
    Cosine { mode: usize },
}

/// Largest `|amplitude|` accepted as infinitesimal. The sign selects the
/// orientation of a cosine disturbance.
pub const MAX_INFINITESIMAL: f64 = 1e-2;

pub fn perturb_infinitesimal(
    base: &SteadyState,
    grid: &Grid,
    amplitude: f64,
    mode: InfinitesimalMode,
) -> Result<FieldState, SimError> {
    if !(amplitude.abs() <= MAX_INFINITESIMAL) {
        return Err(SimError::InvalidPerturbation(format!(
            "infinitesimal amplitude must satisfy |a| <= {MAX_INFINITESIMAL}, got {amplitude}"
        )));
    }
    let mut state = FieldState::homogeneous(base, grid);
    if amplitude == 0.0 {
        return Ok(state);
    }
    match mode {
        InfinitesimalMode::Cosine { mode } => {
            let k = mode as f64 * std::f64::consts::PI / grid.length();
            for i in 0..grid.cells() {
                let d = amplitude * (k * grid.x(i)).cos();
                state.u[i] += d;
                state.v[i] += d;
                state.c[i] += d;
            }
        }
        InfinitesimalMode::Noise { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for field in [Field::U, Field::V, Field::C] {
                for x in state.field_mut(field).iter_mut() {
                    *x += rng.gen_range(-amplitude.abs()..=amplitude.abs());
                }
            }
        }
    }
    for field in [Field::U, Field::V, Field::C] {
        for x in state.field_mut(field).iter_mut() {
            *x = x.max(0.0);
        }
    }
    Ok(state)
}

/// Where a finite top-hat perturbation sits in the domain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    #[default]
    Center,
    /// Against the `x = 0` wall.
    Left,
}

/// Top-hat disturbance of one field: `amplitude` is added on a window of
/// width `width_fraction * L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinitePerturbation {
    pub field: Field,
    pub amplitude: f64,
    pub width_fraction: f64,
    pub placement: Placement,
}

impl FinitePerturbation {
    /// The default `v` disturbance: centred top-hat of width `0.2 L`.
    pub fn v_bump(amplitude: f64) -> Self {
        FinitePerturbation {
            field: Field::V,
            amplitude,
            width_fraction: 0.2,
            placement: Placement::Center,
        }
    }

    pub fn with_amplitude(self, amplitude: f64) -> Self {
        FinitePerturbation { amplitude, ..self }
    }

    fn window(&self, grid: &Grid) -> (f64, f64) {
        let width = self.width_fraction * grid.length();
        match self.placement {
            Placement::Center => {
                let start = 0.5 * (grid.length() - width);
                (start, start + width)
            }
            Placement::Left => (0.0, width),
        }
    }
}

pub fn perturb_finite(
    base: &SteadyState,
    grid: &Grid,
    perturbation: &FinitePerturbation,
) -> Result<FieldState, SimError> {
    if !(0.0..=1.0).contains(&perturbation.amplitude) {
        return Err(SimError::InvalidPerturbation(format!(
            "finite amplitude must lie in [0, 1], got {}",
            perturbation.amplitude
        )));
    }
    if !(perturbation.width_fraction > 0.0 && perturbation.width_fraction <= 1.0) {
        return Err(SimError::InvalidPerturbation(format!(
            "width fraction must lie in (0, 1], got {}",
            perturbation.width_fraction
        )));
    }
    let mut state = FieldState::homogeneous(base, grid);
    let (start, end) = perturbation.window(grid);
    let values = state.field_mut(perturbation.field);
    for (i, x) in values.iter_mut().enumerate() {
        let pos = grid.x(i);
        if pos >= start && pos <= end {
            *x += perturbation.amplitude;
        }
    }
    Ok(state)
}

/// `(1, 0, 0)` with `v` raised to `amplitude` on a centred window.
pub fn perturb_finite_v(grid: &Grid, amplitude: f64, width_fraction: f64) -> Result<FieldState, SimError> {
    perturb_finite(
        &SteadyState::extinction_of_v(),
        grid,
        &FinitePerturbation {
            width_fraction,
            ..FinitePerturbation::v_bump(amplitude)
        },
    )
}

/// Number of spikes, counted in half-spike units: interior maxima count as
/// two halves, maxima on a wall as one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpikeCount {
    pub half_spikes: u32,
    pub interior: u32,
    pub boundary: u32,
}

impl SpikeCount {
    pub fn full_spikes(&self) -> f64 {
        self.half_spikes as f64 / 2.0
    }
}

/// Counts maxima whose topographic prominence exceeds `eps`
/// (default `0.05 (max - min)`).
pub fn count_spikes(values: &[f64], eps: Option<f64>) -> SpikeCount {
    let n = values.len();
    let empty = SpikeCount {
        half_spikes: 0,
        interior: 0,
        boundary: 0,
    };
    if n < 2 {
        return empty;
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if !(hi > lo) {
        return empty;
    }
    let eps = eps.unwrap_or(0.05 * (hi - lo));
    let mut interior = 0;
    let mut boundary = 0;
    for i in 0..n {
        let left_ok = i == 0 || values[i] > values[i - 1];
        let right_ok = i + 1 == n || values[i] >= values[i + 1];
        let is_wall = i == 0 || i + 1 == n;
        if !(left_ok && right_ok) || (is_wall && n > 1 && values[i] == values[if i == 0 { 1 } else { n - 2 }]) {
            continue;
        }
        if prominence(values, i) > eps {
            if is_wall {
                boundary += 1;
            } else {
                interior += 1;
            }
        }
    }
    SpikeCount {
        half_spikes: 2 * interior + boundary,
        interior,
        boundary,
    }
}

/// Height of peak `i` above the higher of the two saddles separating it from
/// taller terrain. A wall peak sees its mirror image across the wall.
fn prominence(values: &[f64], i: usize) -> f64 {
    let n = values.len();
    let peak = values[i];
    let mut left_min = peak;
    let mut left_open = true;
    for j in (0..i).rev() {
        if values[j] > peak {
            left_open = false;
            break;
        }
        left_min = left_min.min(values[j]);
    }
    let mut right_min = peak;
    let mut right_open = true;
    for &x in &values[i + 1..] {
        if x > peak {
            right_open = false;
            break;
        }
        right_min = right_min.min(x);
    }
    // walls reflect: a wall-side that runs out of terrain mirrors the other side
    let saddle = if i == 0 {
        right_min
    } else if i + 1 == n {
        left_min
    } else {
        match (left_open, right_open) {
            (true, true) => left_min.max(right_min),
            (true, false) => right_min.max(left_min),
            (false, true) => left_min.max(right_min),
            (false, false) => left_min.max(right_min),
        }
    };
    peak - saddle
}

/// Homogeneous state plus a disturbance, as used to start a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum InitialCondition {
    Infinitesimal {
        base: StateKind,
        amplitude: f64,
        mode: InfinitesimalMode,
    },
    Finite {
        base: StateKind,
        perturbation: FinitePerturbation,
    },
}

impl InitialCondition {
    pub fn base(&self) -> StateKind {
        match self {
            InitialCondition::Infinitesimal { base, .. } | InitialCondition::Finite { base, .. } => *base,
        }
    }

    pub fn build(&self, params: &ModelParams, grid: &Grid) -> Result<FieldState, SimError> {
        let base = SteadyState::of_kind(self.base(), params)
            .filter(|s| s.physical)
            .ok_or_else(|| {
                SimError::InvalidPerturbation(format!("no physical {} state for these parameters", self.base()))
            })?;
        match self {
            InitialCondition::Infinitesimal { amplitude, mode, .. } => {
                perturb_infinitesimal(&base, grid, *amplitude, *mode)
            }
            InitialCondition::Finite { perturbation, .. } => perturb_finite(&base, grid, perturbation),
        }
    }
}

/// Result of a finite-amplitude threshold search.
#[derive(Clone, Debug, PartialEq)]
pub enum AmplitudeThreshold {
    /// Smallest amplitude (to the requested tolerance) that produced a
    /// stationary pattern.
    Threshold { amplitude: f64, probes: Vec<(f64, Classification)> },
    /// Even the largest amplitude relaxed to the homogeneous state.
    NoPattern { probes: Vec<(f64, Classification)> },
}

impl AmplitudeThreshold {
    pub fn amplitude(&self) -> Option<f64> {
        match self {
            AmplitudeThreshold::Threshold { amplitude, .. } => Some(*amplitude),
            AmplitudeThreshold::NoPattern { .. } => None,
        }
    }
}

/// Controls for [`threshold_amplitude`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdSearch {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
    /// Amplitudes probed concurrently per refinement round.
    pub probes_per_round: usize,
}

impl Default for ThresholdSearch {
    fn default() -> Self {
        ThresholdSearch {
            lo: 0.0,
            hi: 1.0,
            tol: 0.01,
            probes_per_round: 3,
        }
    }
}

/// Minimal amplitude of a finite disturbance of `(1, 0, 0)` that ends in a
/// stationary pattern.
///
/// The bracket is refined by probing `probes_per_round` interior amplitudes at
/// once, which reduces to plain bisection for one probe. Pattern-versus-decay
/// is assumed monotone in the amplitude; a probe sequence contradicting that
/// is reported as [`SimError::NonMonotone`].
pub fn threshold_amplitude(
    params: &ModelParams,
    grid: &Grid,
    cfg: &SimConfig,
    shape: &FinitePerturbation,
    search: &ThresholdSearch,
    exec: Execution,
) -> Result<AmplitudeThreshold, SimError> {
    if !(search.lo >= 0.0 && search.hi > search.lo && search.hi <= 1.0 && search.tol > 0.0) {
        return Err(SimError::Bracket(format!(
            "need 0 <= lo < hi <= 1 and tol > 0, got [{}, {}] tol {}",
            search.lo, search.hi, search.tol
        )));
    }
    let base = SteadyState::extinction_of_v();
    let probe = |a: f64| -> Result<(f64, Classification), SimError> {
        let init = perturb_finite(&base, grid, &shape.with_amplitude(a))?;
        let out = run_to_stationary(init, params, grid, cfg)?;
        match out.classification {
            Classification::NotConverged => Err(SimError::ProbeNotConverged { amplitude: a }),
            c => Ok((a, c)),
        }
    };
    let mut probes = Vec::new();
    let ends = exec.map(&[search.lo, search.hi], |&a| probe(a));
    let mut ends = ends.into_iter();
    let lo_outcome = ends.next().unwrap()?;
    let hi_outcome = ends.next().unwrap()?;
    probes.push(lo_outcome);
    probes.push(hi_outcome);
    let patterned = |c: Classification| c == Classification::StationaryPattern;
    if !patterned(hi_outcome.1) {
        if patterned(lo_outcome.1) {
            return Err(SimError::NonMonotone {
                below: search.lo,
                above: search.hi,
            });
        }
        return Ok(AmplitudeThreshold::NoPattern { probes });
    }
    if patterned(lo_outcome.1) {
        return Err(SimError::Bracket(format!(
            "pattern already forms at the lower amplitude {}",
            search.lo
        )));
    }
    let (mut lo, mut hi) = (search.lo, search.hi);
    let per_round = search.probes_per_round.max(1);
    while hi - lo > search.tol {
        let amps: Vec<f64> = (1..=per_round)
            .map(|j| lo + (hi - lo) * j as f64 / (per_round + 1) as f64)
            .collect();
        let results = exec.map(&amps, |&a| probe(a));
        let mut new_lo = lo;
        let mut new_hi = hi;
        let mut seen_pattern: Option<f64> = None;
        for r in results {
            let (a, c) = r?;
            probes.push((a, c));
            if patterned(c) {
                if seen_pattern.is_none() {
                    seen_pattern = Some(a);
                    new_hi = a;
                }
            } else if let Some(below) = seen_pattern {
                return Err(SimError::NonMonotone { below, above: a });
            } else {
                new_lo = a;
            }
        }
        lo = new_lo;
        hi = new_hi;
    }
    Ok(AmplitudeThreshold::Threshold { amplitude: hi, probes })
}

/// Parameter value at which a fixed disturbance of `(1, 0, 0)` stops
/// producing a pattern.
///
/// `patterned` and `decaying` are parameter values whose outcomes must be a
/// stationary pattern and relaxation respectively; the bracket between them
/// is bisected to width `tol` and its midpoint returned.
#[allow(clippy::too_many_arguments)]
pub fn pattern_cutoff(
    param: crate::model::Param,
    patterned: f64,
    decaying: f64,
    base: &ModelParams,
    grid: &Grid,
    cfg: &SimConfig,
    shape: &FinitePerturbation,
    tol: f64,
) -> Result<f64, SimError> {
    let forms = |value: f64| -> Result<bool, SimError> {
        let p = base.with(param, value);
        let init = perturb_finite(&SteadyState::extinction_of_v(), grid, shape)?;
        match run_to_stationary(init, &p, grid, cfg)?.classification {
            Classification::StationaryPattern => Ok(true),
            Classification::Homogeneous => Ok(false),
            Classification::NotConverged => Err(SimError::ProbeNotConverged {
                amplitude: shape.amplitude,
            }),
        }
    };
    if !forms(patterned)? || forms(decaying)? {
        return Err(SimError::Bracket(format!(
            "{param} = {patterned} must pattern and {param} = {decaying} must decay"
        )));
    }
    let (mut a, mut b) = (patterned, decaying);
    while (b - a).abs() > tol {
        let mid = 0.5 * (a + b);
        if forms(mid)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(l: f64) -> Grid {
        Grid::with_spacing(l, DEFAULT_DX).unwrap()
    }

    #[test]
    fn grid_geometry() {
        let g = grid(15.0);
        assert_eq!(g.cells(), 60);
        assert_abs_diff_eq!(g.dx(), 0.25);
        assert_abs_diff_eq!(g.x(0), 0.125);
        assert!(Grid::new(1.0, 8).is_err());
        assert_eq!(Grid::with_spacing(1.0, 0.25).unwrap().cells(), MIN_CELLS);
    }

    #[test]
    fn equilibrium_is_unchanged() {
        let p = ModelParams::weak_strong();
        let g = grid(20.0);
        let s = FieldState::homogeneous(&SteadyState::extinction_of_v(), &g);
        let next = step(&s, 0.01, &p, &g, FluxScheme::Centered).unwrap();
        for f in [Field::U, Field::V, Field::C] {
            for (a, b) in s.field(f).iter().zip(next.field(f)) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn constant_profile_without_kinetics_is_unchanged() {
        let p = ModelParams {
            r1: 0.0,
            chi: 0.0,
            ..Default::default()
        };
        let g = grid(10.0);
        let s = FieldState {
            t: 0.0,
            u: vec![0.42; g.cells()],
            v: vec![0.0; g.cells()],
            c: vec![0.0; g.cells()],
        };
        let next = step(&s, 0.01, &p, &g, FluxScheme::Centered).unwrap();
        assert_eq!(next.u, s.u);
    }

    fn smooth_state(g: &Grid) -> FieldState {
        let l = g.length();
        let f = |x: f64, a: f64, b: f64| a + b * (std::f64::consts::PI * x / l).cos();
        FieldState {
            t: 0.0,
            u: g.nodes().iter().map(|&x| f(x, 0.6, 0.2)).collect(),
            v: g.nodes().iter().map(|&x| f(x, 0.5, -0.15)).collect(),
            c: g.nodes().iter().map(|&x| f(x, 0.5, -0.1)).collect(),
        }
    }

    #[test]
    fn euler_step_agrees_with_fine_substeps() {
        let p = ModelParams::default();
        let g = grid(15.0);
        let s = smooth_state(&g);
        let dt = 0.01;
        let coarse = step(&s, dt, &p, &g, FluxScheme::Centered).unwrap();
        let mut fine = s.clone();
        let mut stepper = Stepper::new(p, g, FluxScheme::Centered);
        for _ in 0..100 {
            stepper.step_in_place(&mut fine, dt / 100.0).unwrap();
        }
        let mut deriv = FieldState::homogeneous(&SteadyState::trivial(), &g);
        let scale = rhs(&s, &p, &g, FluxScheme::Centered, &mut deriv);
        for f in [Field::U, Field::V, Field::C] {
            for (a, b) in coarse.field(f).iter().zip(fine.field(f)) {
                // both agree to first order; the gap is O(dt^2) per step
                assert!((a - b).abs() < dt * dt * (1.0 + scale), "{a} vs {b}");
                assert!((a - b).abs() > 0.0 || scale == 0.0);
            }
        }
    }

    #[test]
    fn mass_is_conserved_without_kinetics() {
        let p = ModelParams {
            r1: 0.0,
            r2: 0.0,
            ..Default::default()
        };
        let g = grid(15.0);
        let mut s = smooth_state(&g);
        let (u0, v0) = (s.total(Field::U, &g), s.total(Field::V, &g));
        let mut stepper = Stepper::new(p, g, FluxScheme::Centered);
        let dt = stable_dt(&s, &p, &g, 0.2);
        for _ in 0..10_000 {
            stepper.step_in_place(&mut s, dt).unwrap();
        }
        assert!((s.total(Field::U, &g) - u0).abs() < 1e-10);
        assert!((s.total(Field::V, &g) - v0).abs() < 1e-10);

        let mut up = Stepper::new(p, g, FluxScheme::Upwind);
        for _ in 0..1000 {
            up.step_in_place(&mut s, dt).unwrap();
        }
        assert!((s.total(Field::U, &g) - u0).abs() < 1e-10);
    }

    #[test]
    fn hybrid_flux_survives_steep_chemical_front() {
        let p = ModelParams::weak_strong().with(crate::model::Param::L, 50.0);
        let g = grid(50.0);
        let bump = FinitePerturbation {
            field: Field::C,
            amplitude: 1.0,
            width_fraction: 0.2,
            placement: Placement::Center,
        };
        let init = perturb_finite(&SteadyState::extinction_of_v(), &g, &bump).unwrap();
        let mut centered = Stepper::new(p, g, FluxScheme::Centered);
        let mut s = init.clone();
        assert!(matches!(
            centered.advance_to(&mut s, 1.0, 0.2),
            Err(SimError::Negative { .. })
        ));
        let mut hybrid = Stepper::new(p, g, FluxScheme::Hybrid);
        let mut s = init;
        hybrid.advance_to(&mut s, 1.0, 0.2).unwrap();
        assert!(s.u.iter().all(|&u| u >= 0.0));
    }

    #[test]
    fn zero_amplitude_perturbations_are_identity() {
        let g = grid(15.0);
        let p = ModelParams::default();
        let co = SteadyState::coexistence(&p).unwrap();
        let s = perturb_infinitesimal(&co, &g, 0.0, InfinitesimalMode::Noise { seed: 1 }).unwrap();
        assert_eq!(s, FieldState::homogeneous(&co, &g));
        let s = perturb_finite_v(&g, 0.0, 0.2).unwrap();
        assert_eq!(s, FieldState::homogeneous(&SteadyState::extinction_of_v(), &g));
        assert!(perturb_infinitesimal(&co, &g, 0.1, InfinitesimalMode::Cosine { mode: 1 }).is_err());
        assert!(perturb_finite_v(&g, 0.5, 0.0).is_err());
    }

    #[test]
    fn noise_is_reproducible() {
        let g = grid(15.0);
        let co = SteadyState::coexistence(&ModelParams::default()).unwrap();
        let a = perturb_infinitesimal(&co, &g, 1e-3, InfinitesimalMode::Noise { seed: 7 }).unwrap();
        let b = perturb_infinitesimal(&co, &g, 1e-3, InfinitesimalMode::Noise { seed: 7 }).unwrap();
        let c = perturb_infinitesimal(&co, &g, 1e-3, InfinitesimalMode::Noise { seed: 8 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.u.iter().all(|&x| (x - co.u).abs() <= 1e-3));
    }

    #[test]
    fn finite_window_placement() {
        let g = grid(50.0);
        let s = perturb_finite_v(&g, 0.9, 0.2).unwrap();
        let raised: Vec<usize> = (0..g.cells()).filter(|&i| s.v[i] > 0.0).collect();
        assert_eq!(raised.len(), 40);
        assert_abs_diff_eq!(g.x(raised[0]), 20.125);
        assert!(s.u.iter().all(|&u| u == 1.0));
        let left = perturb_finite(
            &SteadyState::extinction_of_v(),
            &g,
            &FinitePerturbation {
                placement: Placement::Left,
                ..FinitePerturbation::v_bump(0.5)
            },
        )
        .unwrap();
        assert_eq!(left.v[0], 0.5);
        assert_eq!(left.v[g.cells() - 1], 0.0);
    }

    #[test]
    fn spike_counting() {
        assert_eq!(count_spikes(&[0.3; 50], None).half_spikes, 0);
        let g = Grid::with_spacing(250.0, 0.25).unwrap();
        let l = g.length();
        let cos16: Vec<f64> = g
            .nodes()
            .iter()
            .map(|&x| (16.0 * std::f64::consts::PI * x / l).cos())
            .collect();
        let c = count_spikes(&cos16, None);
        assert_eq!(c.half_spikes, 16);
        assert_eq!(c.full_spikes(), 8.0);
        assert_eq!(c.boundary, 2);

        let half: Vec<f64> = g.nodes().iter().map(|&x| (std::f64::consts::PI * x / l).cos()).collect();
        assert_eq!(count_spikes(&half, None).half_spikes, 1);
        // small ripples do not count
        let rippled: Vec<f64> = cos16
            .iter()
            .enumerate()
            .map(|(i, &y)| y + 1e-3 * ((i as f64) * 2.9).sin())
            .collect();
        assert_eq!(count_spikes(&rippled, None).half_spikes, 16);
    }

    #[test]
    fn mirrored_state_reverses() {
        let g = grid(10.0);
        let s = smooth_state(&g);
        let m = s.mirrored();
        assert_eq!(m.u[0], s.u[g.cells() - 1]);
        assert_eq!(m.mirrored(), s);
    }
}
