//! Linear stability of homogeneous states against cosine perturbations
//! `exp(lambda t) cos(k x)`.
//!
//! The growth rates are the roots of the characteristic cubic
//! `lambda^3 + a1 lambda^2 + a2 lambda + a3 = 0` of a 3x3 matrix built from the
//! kinetics Jacobian, the diffusion terms and the linearised chemotactic flux.

use nalgebra::Matrix3;
use num_complex::Complex64;
use thiserror::Error;

use crate::exec::Execution;
use crate::model::{jacobian, ModelParams, Param, SteadyState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("wavenumber must be positive, got {0}")]
    NonPositiveWavenumber(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("no instability in range")]
    NoInstability,
}

/// Characteristic matrix of the state for wavenumber `k`.
///
/// The chemotactic entry is `+chi u* k^2`, the linearisation of
/// `-chi (u c_x)_x` about a homogeneous state. For `chi < 0` the chemical then
/// pushes `u` away from regions of high `v`.
pub fn characteristic_matrix(state: &SteadyState, k: f64, params: &ModelParams) -> Matrix3<f64> {
    let k2 = k * k;
    let mut m = jacobian(state, params);
    m[(0, 0)] -= params.d1 * k2;
    m[(1, 1)] -= params.d2 * k2;
    m[(2, 2)] -= k2;
    m[(0, 2)] = params.chi * state.u * k2;
    m
}

/// Coefficients of `lambda^3 + a1 lambda^2 + a2 lambda + a3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubicCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub k: f64,
}

impl CubicCoefficients {
    pub fn from_matrix(m: &Matrix3<f64>, k: f64) -> Self {
        let minors = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
            + m[(0, 0)] * m[(2, 2)]
            - m[(0, 2)] * m[(2, 0)]
            + m[(1, 1)] * m[(2, 2)]
            - m[(1, 2)] * m[(2, 1)];
        CubicCoefficients {
            a1: -m.trace(),
            a2: minors,
            a3: -m.determinant(),
            k,
        }
    }

    /// Evaluates the cubic at a complex point.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        ((z + self.a1) * z + self.a2) * z + self.a3
    }

    /// All three roots, from the eigenvalues of the companion matrix followed
    /// by Newton polishing.
    pub fn roots(&self) -> [Complex64; 3] {
        cubic_roots(self.a1, self.a2, self.a3)
    }
}

pub fn cubic_coefficients(state: &SteadyState, k: f64, params: &ModelParams) -> CubicCoefficients {
    CubicCoefficients::from_matrix(&characteristic_matrix(state, k, params), k)
}

/// Roots of `z^3 + a1 z^2 + a2 z + a3`.
pub fn cubic_roots(a1: f64, a2: f64, a3: f64) -> [Complex64; 3] {
    let companion = Matrix3::new(-a1, -a2, -a3, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    let eig = companion.complex_eigenvalues();
    let poly = |z: Complex64| ((z + a1) * z + a2) * z + a3;
    let dpoly = |z: Complex64| (3.0 * z + 2.0 * a1) * z + a2;
    let mut roots = [eig[0], eig[1], eig[2]];
    for z in roots.iter_mut() {
        for _ in 0..3 {
            let f = poly(*z);
            let df = dpoly(*z);
            if f.norm() == 0.0 || df.norm() == 0.0 {
                break;
            }
            let candidate = *z - f / df;
            if poly(candidate).norm() < f.norm() {
                *z = candidate;
            } else {
                break;
            }
        }
    }
    roots
}

/// One of the four sign conditions of the Routh-Hurwitz test for a cubic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RhCondition {
    A1Positive,
    A2Positive,
    A3Positive,
    /// `a3 - a1 a2 < 0`.
    A3BelowA1A2,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RouthHurwitz {
    pub stable: bool,
    pub violated: Vec<RhCondition>,
}

pub fn routh_hurwitz(c: &CubicCoefficients) -> RouthHurwitz {
    let checks = [
        (RhCondition::A1Positive, c.a1 > 0.0),
        (RhCondition::A2Positive, c.a2 > 0.0),
        (RhCondition::A3Positive, c.a3 > 0.0),
        (RhCondition::A3BelowA1A2, c.a3 - c.a1 * c.a2 < 0.0),
    ];
    let violated: Vec<_> = checks
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(cond, _)| *cond)
        .collect();
    RouthHurwitz {
        stable: violated.is_empty(),
        violated,
    }
}

/// Largest real part among the three growth rates at wavenumber `k`.
pub fn growth_rate(state: &SteadyState, k: f64, params: &ModelParams) -> f64 {
    cubic_coefficients(state, k, params)
        .roots()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Growth rates and Routh-Hurwitz verdicts sampled over a wavenumber grid.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub state: SteadyState,
    pub k_grid: Vec<f64>,
    pub growth_rates: Vec<f64>,
    pub rh_verdicts: Vec<bool>,
    /// Most unstable wavenumber; ties go to the smaller `k`.
    pub k_star: f64,
    pub lambda_star: f64,
}

/// Default number of dispersion samples on `[0, 1]`.
pub const DEFAULT_DISPERSION_POINTS: usize = 2000;

pub fn dispersion_curve(
    state: &SteadyState,
    params: &ModelParams,
    k_min: f64,
    k_max: f64,
    n_points: usize,
    exec: Execution,
) -> Result<StabilityReport, StabilityError> {
    if !(k_min >= 0.0 && k_max > k_min && n_points >= 2) {
        return Err(StabilityError::InvalidGrid(
            "need 0 <= k_min < k_max and n_points >= 2",
        ));
    }
    let k_grid = linspace(k_min, k_max, n_points);
    let rows = exec.map(&k_grid, |&k| {
        let coeffs = cubic_coefficients(state, k, params);
        let rate = coeffs
            .roots()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        (rate, routh_hurwitz(&coeffs).stable)
    });
    let (growth_rates, rh_verdicts): (Vec<f64>, Vec<bool>) = rows.into_iter().unzip();
    let mut best = 0;
    for (i, &g) in growth_rates.iter().enumerate() {
        if g > growth_rates[best] {
            best = i;
        }
    }
    Ok(StabilityReport {
        state: *state,
        k_star: k_grid[best],
        lambda_star: growth_rates[best],
        k_grid,
        growth_rates,
        rh_verdicts,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpikePrediction {
    /// `round(k L / pi)`: number of half-wavelengths fitting the domain.
    pub half_spikes: u32,
    pub full_spikes: u32,
    /// True when `half_spikes` is odd, i.e. a half spike is left over.
    pub remainder: bool,
}

pub fn predicted_spike_count(k_star: f64, length: f64) -> Result<SpikePrediction, StabilityError> {
    if !(k_star > 0.0) {
        return Err(StabilityError::NonPositiveWavenumber(k_star));
    }
    let half_spikes = (k_star * length / std::f64::consts::PI).round() as u32;
    Ok(SpikePrediction {
        half_spikes,
        full_spikes: half_spikes / 2,
        remainder: half_spikes % 2 == 1,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DomainCell {
    Stable,
    Unstable,
    /// Coexistence is degenerate or has a negative coordinate here.
    NotApplicable,
}

/// Stability of the coexistence state over a `(b1, b2)` grid, row-major in
/// `b1`.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityMap {
    pub b1_values: Vec<f64>,
    pub b2_values: Vec<f64>,
    pub cells: Vec<DomainCell>,
}

impl StabilityMap {
    pub fn get(&self, i: usize, j: usize) -> DomainCell {
        self.cells[i * self.b2_values.len() + j]
    }

    pub fn count(&self, cell: DomainCell) -> usize {
        self.cells.iter().filter(|&&c| c == cell).count()
    }
}

fn coexistence_cell(params: &ModelParams, ks: &[f64]) -> DomainCell {
    match SteadyState::coexistence(params) {
        Some(s) if s.physical => {
            let unstable = ks
                .iter()
                .any(|&k| !routh_hurwitz(&cubic_coefficients(&s, k, params)).stable);
            if unstable {
                DomainCell::Unstable
            } else {
                DomainCell::Stable
            }
        }
        _ => DomainCell::NotApplicable,
    }
}

fn domain_map(
    params: &ModelParams,
    ks: &[f64],
    b1_values: &[f64],
    b2_values: &[f64],
    exec: Execution,
) -> StabilityMap {
    let points: Vec<(f64, f64)> = b1_values
        .iter()
        .flat_map(|&b1| b2_values.iter().map(move |&b2| (b1, b2)))
        .collect();
    let cells = exec.map(&points, |&(b1, b2)| {
        coexistence_cell(&ModelParams { b1, b2, ..*params }, ks)
    });
    StabilityMap {
        b1_values: b1_values.to_vec(),
        b2_values: b2_values.to_vec(),
        cells,
    }
}

/// Routh-Hurwitz verdict at the coexistence state for one wavenumber.
/// `params.b1` and `params.b2` are ignored.
pub fn instability_domain(
    params: &ModelParams,
    k: f64,
    b1_values: &[f64],
    b2_values: &[f64],
    exec: Execution,
) -> StabilityMap {
    domain_map(params, &[k], b1_values, b2_values, exec)
}

/// A grid point is unstable if it is unstable for any wavenumber in
/// `k_values`.
pub fn instability_domain_union(
    params: &ModelParams,
    k_values: &[f64],
    b1_values: &[f64],
    b2_values: &[f64],
    exec: Execution,
) -> StabilityMap {
    domain_map(params, k_values, b1_values, b2_values, exec)
}

/// Search controls for [`critical_b`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalBSearch {
    pub b_range: (f64, f64),
    pub k_range: (f64, f64),
    pub b_tol: f64,
    pub k_tol: f64,
    /// Step of the central difference used for `d a3 / dk`.
    pub fd_step: f64,
    pub coarse_b: usize,
    pub coarse_k: usize,
}

impl Default for CriticalBSearch {
    fn default() -> Self {
        CriticalBSearch {
            b_range: (0.01, 0.95),
            k_range: (1e-3, 2.0),
            b_tol: 1e-4,
            k_tol: 1e-4,
            fd_step: 1e-5,
            coarse_b: 200,
            coarse_k: 400,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalB {
    pub b_min: f64,
    pub k_at_min: f64,
}

/// `a3` at the coexistence state with `b1 = b2 = b`.
fn symmetric_a3(params: &ModelParams, b: f64, k: f64) -> f64 {
    let p = ModelParams {
        b1: b,
        b2: b,
        ..*params
    };
    match SteadyState::coexistence(&p) {
        Some(s) => cubic_coefficients(&s, k, &p).a3,
        None => f64::INFINITY,
    }
}

/// Minimum of `a3` over `k` for fixed `b`, located where `d a3 / dk = 0`.
fn min_a3_over_k(params: &ModelParams, b: f64, search: &CriticalBSearch) -> (f64, f64) {
    let (k_lo, k_hi) = search.k_range;
    let n = search.coarse_k.max(3);
    let ks = linspace(k_lo, k_hi, n);
    let values: Vec<f64> = ks.iter().map(|&k| symmetric_a3(params, b, k)).collect();
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if best == 0 || best == n - 1 {
        return (ks[best], values[best]);
    }
    let h = search.fd_step;
    let slope = |k: f64| (symmetric_a3(params, b, k + h) - symmetric_a3(params, b, k - h)) / (2.0 * h);
    let (mut lo, mut hi) = (ks[best - 1], ks[best + 1]);
    while hi - lo > search.k_tol {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    (k, symmetric_a3(params, b, k))
}

/// Smallest `b = b1 = b2` for which the coexistence state is unstable for
/// some wavenumber, together with that wavenumber.
///
/// This is the point where the curves `a3 = 0` and `d a3 / dk = 0` meet in the
/// `(b, k)` plane. `params.b1` and `params.b2` are ignored.
pub fn critical_b(params: &ModelParams, search: &CriticalBSearch) -> Result<CriticalB, StabilityError> {
    let (b_lo, b_hi) = search.b_range;
    if !(b_lo > 0.0 && b_hi > b_lo) || !(search.k_range.0 > 0.0 && search.k_range.1 > search.k_range.0) {
        return Err(StabilityError::InvalidGrid("need 0 < lo < hi for b and k ranges"));
    }
    let bs = linspace(b_lo, b_hi, search.coarse_b.max(2));
    let first = bs
        .iter()
        .position(|&b| min_a3_over_k(params, b, search).1 <= 0.0)
        .ok_or(StabilityError::NoInstability)?;
    if first == 0 {
        let (k, _) = min_a3_over_k(params, b_lo, search);
        return Ok(CriticalB { b_min: b_lo, k_at_min: k });
    }
    let (mut lo, mut hi) = (bs[first - 1], bs[first]);
    while hi - lo > search.b_tol {
        let mid = 0.5 * (lo + hi);
        if min_a3_over_k(params, mid, search).1 <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (k, _) = min_a3_over_k(params, hi, search);
    Ok(CriticalB { b_min: hi, k_at_min: k })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdPoint {
    pub value: f64,
    /// `None` marks a gap: no instability within the search window.
    pub critical: Option<CriticalB>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdCurve {
    pub param: Param,
    pub points: Vec<ThresholdPoint>,
}

impl ThresholdCurve {
    /// Last sampled value that is still unstable before the first gap that
    /// follows an unstable stretch.
    pub fn cutoff(&self) -> Option<f64> {
        self.points
            .windows(2)
            .find(|w| w[0].critical.is_some() && w[1].critical.is_none())
            .map(|w| w[0].value)
    }

    /// `(value, b_min)` for the unstable samples only.
    pub fn unstable(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.critical.map(|c| (p.value, c.b_min)))
            .collect()
    }
}

/// Runs [`critical_b`] for each value of one parameter, everything else taken
/// from `base`.
pub fn threshold_curve(
    param: Param,
    values: &[f64],
    base: &ModelParams,
    search: &CriticalBSearch,
    exec: Execution,
) -> ThresholdCurve {
    let points = exec.map(values, |&value| ThresholdPoint {
        value,
        critical: critical_b(&base.with(param, value), search).ok(),
    });
    ThresholdCurve { param, points }
}

/// Parameter value where the instability window of [`critical_b`] closes,
/// bisected between an unstable and a stable value to within `tol`.
pub fn instability_cutoff(
    param: Param,
    unstable: f64,
    stable: f64,
    base: &ModelParams,
    search: &CriticalBSearch,
    tol: f64,
) -> Result<f64, StabilityError> {
    let is_unstable = |v: f64| critical_b(&base.with(param, v), search).is_ok();
    if !is_unstable(unstable) {
        return Err(StabilityError::NoInstability);
    }
    if is_unstable(stable) {
        return Err(StabilityError::InvalidGrid("stable end of the bracket is unstable"));
    }
    let (mut a, mut b) = (unstable, stable);
    while (b - a).abs() > tol {
        let mid = 0.5 * (a + b);
        if is_unstable(mid) {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}
