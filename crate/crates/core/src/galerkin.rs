//! Truncated cosine-Galerkin solution of the stationary problem.
//!
//! With `u = sum alpha_i cos(ikx)`, `v = sum gamma_i cos(ikx)` and
//! `k = pi / L`, the stationary `c`-equation is solved exactly by
//! `beta_i = gamma_i / (1 + (ik)^2)`. Projecting the stationary `u`- and
//! `v`-equations onto `cos(jkx)`, `j = 0..M`, leaves `2M + 2` equations in the
//! `2M + 2` unknowns `(alpha_0..alpha_M, gamma_0..gamma_M)`.
//!
//! Projections are computed by midpoint quadrature, exact for the
//! trigonometric polynomials involved. An independent closed-form evaluation
//! via product-to-sum identities is kept as a cross-check.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::model::{ModelParams, Param, SteadyState, V_REACTION_SIGN};
use crate::sim::{Field, FieldState, Grid};
use crate::spectral::{decompose_state, reconstruct_profile, ModeSpectrum};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GalerkinError {
    #[error("expected {expected} unknowns, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("seed contains non-finite values")]
    NonFiniteSeed,
    #[error("singular Jacobian after {iterations} iterations")]
    SingularJacobian { iterations: usize, last: Vec<f64> },
    #[error("domain length mismatch: spectrum {spectrum}, profile {profile}")]
    LengthMismatch { spectrum: f64, profile: f64 },
}

/// `beta_i = gamma_i / (1 + (ik)^2)`.
pub fn beta_from_gamma(gamma: &[f64], k: f64) -> Vec<f64> {
    gamma
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let ik = i as f64 * k;
            g / (1.0 + ik * ik)
        })
        .collect()
}

/// Midpoint samples per half period used by the projection.
pub const QUADRATURE_SAMPLES: usize = 1024;

/// The truncated stationary system for a parameter set and order `M`.
#[derive(Clone, Debug)]
pub struct GalerkinProblem {
    pub params: ModelParams,
    pub modes: usize,
    // cos(jkx_q) and sin(jkx_q) tables, row-major by mode
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl GalerkinProblem {
    pub fn new(params: ModelParams, modes: usize) -> Self {
        let q = QUADRATURE_SAMPLES;
        let k = PI / params.length;
        let mut cos = Vec::with_capacity((modes + 1) * q);
        let mut sin = Vec::with_capacity((modes + 1) * q);
        for j in 0..=modes {
            for s in 0..q {
                let x = (s as f64 + 0.5) * params.length / q as f64;
                let jk = j as f64 * k;
                cos.push((jk * x).cos());
                sin.push((jk * x).sin());
            }
        }
        GalerkinProblem {
            params,
            modes,
            cos,
            sin,
        }
    }

    pub fn k(&self) -> f64 {
        PI / self.params.length
    }

    /// Number of unknowns and equations, `2M + 2`.
    pub fn dim(&self) -> usize {
        2 * self.modes + 2
    }

    fn check(&self, x: &[f64]) -> Result<(), GalerkinError> {
        if x.len() != self.dim() {
            return Err(GalerkinError::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Projection residuals of the unknown vector `(alpha, gamma)`.
    ///
    /// # Panics
    /// If `x.len() != self.dim()`.
    pub fn residuals(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "unknown vector length");
        let m = self.modes;
        let q = QUADRATURE_SAMPLES;
        let k = self.k();
        let p = &self.params;
        let (alpha, gamma) = x.split_at(m + 1);
        let beta = beta_from_gamma(gamma, k);
        let mut fu = vec![0.0; q];
        let mut fv = vec![0.0; q];
        for s in 0..q {
            let (mut u, mut ux, mut uxx) = (0.0, 0.0, 0.0);
            let (mut v, mut vxx) = (0.0, 0.0);
            let (mut cx, mut cxx) = (0.0, 0.0);
            for i in 0..=m {
                let ik = i as f64 * k;
                let c = self.cos[i * q + s];
                let sn = self.sin[i * q + s];
                u += alpha[i] * c;
                ux -= alpha[i] * ik * sn;
                uxx -= alpha[i] * ik * ik * c;
                v += gamma[i] * c;
                vxx -= gamma[i] * ik * ik * c;
                cx -= beta[i] * ik * sn;
                cxx -= beta[i] * ik * ik * c;
            }
            fu[s] = p.d1 * uxx - p.chi * (ux * cx + u * cxx) + p.r1 * u * (1.0 - u - p.b1 * v);
            fv[s] = p.d2 * vxx + V_REACTION_SIGN * p.r2 * v * (1.0 - v - p.b2 * u);
        }
        let project = |f: &[f64], j: usize| {
            let w = if j == 0 { 1.0 } else { 2.0 };
            let row = &self.cos[j * q..(j + 1) * q];
            w * f.iter().zip(row).map(|(a, b)| a * b).sum::<f64>() / q as f64
        };
        let mut out = Vec::with_capacity(self.dim());
        out.extend((0..=m).map(|j| project(&fu, j)));
        out.extend((0..=m).map(|j| project(&fv, j)));
        out
    }

    /// The same residuals from explicit coefficient products.
    pub fn convolution_residuals(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "unknown vector length");
        let m = self.modes;
        let k = self.k();
        let p = &self.params;
        let (alpha, gamma) = x.split_at(m + 1);
        let beta = beta_from_gamma(gamma, k);
        let uu = cos_product(alpha, alpha, m);
        let uv = cos_product(alpha, gamma, m);
        let vv = cos_product(gamma, gamma, m);
        // u c_x as a sine series
        let mut s = vec![0.0; m + 1];
        for (i, a) in alpha.iter().enumerate() {
            for (j, b) in beta.iter().enumerate() {
                let w = -(j as f64) * k * a * b * 0.5;
                if i + j <= m {
                    s[i + j] += w;
                }
                if j > i && j - i <= m {
                    s[j - i] += w;
                }
                if i > j && i - j <= m {
                    s[i - j] -= w;
                }
            }
        }
        let mut out = Vec::with_capacity(self.dim());
        for n in 0..=m {
            let nk = n as f64 * k;
            out.push(
                -p.d1 * nk * nk * alpha[n] - p.chi * nk * s[n]
                    + p.r1 * (alpha[n] - uu[n] - p.b1 * uv[n]),
            );
        }
        for n in 0..=m {
            let nk = n as f64 * k;
            out.push(
                -p.d2 * nk * nk * gamma[n]
                    + V_REACTION_SIGN * p.r2 * (gamma[n] - vv[n] - p.b2 * uv[n]),
            );
        }
        out
    }

    /// Central-difference Jacobian of [`Self::residuals`].
    pub fn jacobian(&self, x: &[f64], h: f64) -> DMatrix<f64> {
        let n = self.dim();
        let mut jac = DMatrix::zeros(n, n);
        let mut xp = x.to_vec();
        for j in 0..n {
            xp[j] = x[j] + h;
            let fp = self.residuals(&xp);
            xp[j] = x[j] - h;
            let fm = self.residuals(&xp);
            xp[j] = x[j];
            for i in 0..n {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        jac
    }

    /// Unknown vector of a homogeneous state.
    pub fn homogeneous(&self, state: &SteadyState) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        x[0] = state.u;
        x[self.modes + 1] = state.v;
        x
    }

    /// Unknown vector from the first `M + 1` coefficients of a spectrum.
    pub fn truncate(&self, spectrum: &ModeSpectrum) -> Vec<f64> {
        let m = self.modes;
        let take = |a: &[f64]| (0..=m).map(|i| a.get(i).copied().unwrap_or(0.0)).collect::<Vec<_>>();
        let mut x = take(&spectrum.alpha);
        x.extend(take(&spectrum.gamma));
        x
    }

    pub fn spectrum(&self, x: &[f64]) -> ModeSpectrum {
        let (alpha, gamma) = x.split_at(self.modes + 1);
        ModeSpectrum {
            length: self.params.length,
            alpha: alpha.to_vec(),
            gamma: gamma.to_vec(),
            beta: beta_from_gamma(gamma, self.k()),
        }
    }
}

/// Cosine coefficients `0..=m` of the product of two cosine series.
fn cos_product(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut c = vec![0.0; m + 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            let w = 0.5 * x * y;
            if i + j <= m {
                c[i + j] += w;
            }
            let d = i.abs_diff(j);
            if d <= m {
                c[d] += w;
            }
        }
    }
    c
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iter: 100,
            max_halvings: 20,
            fd_step: 1e-6,
        }
    }
}

/// Where a Newton start came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SeedDescriptor {
    /// Truncated spectrum of a simulated stationary state.
    Simulated,
    /// Coexistence state with `alpha_1` set to `kick`.
    CoexistenceKick { kick: f64 },
    /// Stable homogeneous `base` state with `alpha_1` set to `kick`.
    BaseKick { kick: f64, base: crate::model::StateKind },
    /// Caller-supplied vector.
    Explicit,
    /// Member `index` of the deterministic multistart family.
    Multistart { index: usize, seed: u64 },
    /// Solution at a neighbouring parameter value.
    Continuation,
}

impl std::fmt::Display for SeedDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SeedDescriptor::Simulated => write!(f, "simulated"),
            SeedDescriptor::CoexistenceKick { kick } => write!(f, "coexistence+kick({kick})"),
            SeedDescriptor::BaseKick { kick, base } => write!(f, "{base}+kick({kick})"),
            SeedDescriptor::Explicit => write!(f, "explicit"),
            SeedDescriptor::Multistart { index, seed } => write!(f, "multistart(seed={seed},index={index})"),
            SeedDescriptor::Continuation => write!(f, "continuation"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GalerkinSolution {
    pub spectrum: ModeSpectrum,
    pub unknowns: Vec<f64>,
    pub residual_norm: f64,
    pub converged: bool,
    pub newton_iters: usize,
    pub seed: SeedDescriptor,
}

impl GalerkinSolution {
    /// True when every nonconstant coefficient is negligible.
    pub fn is_flat(&self) -> bool {
        self.spectrum.alpha[1..]
            .iter()
            .chain(&self.spectrum.gamma[1..])
            .all(|a| a.abs() < FLAT_EPS)
    }
}

/// Nonconstant coefficients below this make a solution homogeneous.
pub const FLAT_EPS: f64 = 1e-6;

/// Damped Newton iteration from `seed`.
///
/// Each step is halved until the residual norm decreases, at most
/// `max_halvings` times; if no halving helps the smallest step is taken.
/// Running out of iterations is not an error: the last iterate is returned
/// with `converged = false`.
pub fn newton_solve(
    problem: &GalerkinProblem,
    seed: &[f64],
    descriptor: SeedDescriptor,
    opts: &NewtonOptions,
) -> Result<GalerkinSolution, GalerkinError> {
    problem.check(seed)?;
    if seed.iter().any(|x| !x.is_finite()) {
        return Err(GalerkinError::NonFiniteSeed);
    }
    let mut x = seed.to_vec();
    let mut f = problem.residuals(&x);
    let mut fnorm = norm(&f);
    let mut iters = 0;
    while fnorm >= opts.tol && iters < opts.max_iter {
        let jac = problem.jacobian(&x, opts.fd_step);
        let rhs = -DVector::from_column_slice(&f);
        let step = jac
            .lu()
            .solve(&rhs)
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or_else(|| GalerkinError::SingularJacobian {
                iterations: iters,
                last: x.clone(),
            })?;
        let mut t = 1.0;
        let mut trial: Vec<f64>;
        let mut trial_f: Vec<f64>;
        let mut halvings = 0;
        loop {
            trial = x.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            trial_f = problem.residuals(&trial);
            let n = norm(&trial_f);
            if (n < fnorm && n.is_finite()) || halvings == opts.max_halvings {
                break;
            }
            t *= 0.5;
            halvings += 1;
        }
        x = trial;
        f = trial_f;
        fnorm = norm(&f);
        iters += 1;
        if !fnorm.is_finite() {
            break;
        }
    }
    Ok(GalerkinSolution {
        spectrum: problem.spectrum(&x),
        converged: fnorm < opts.tol,
        unknowns: x,
        residual_norm: fnorm,
        newton_iters: iters,
        seed: descriptor,
    })
}

/// Seed for the coexistence state with a first-mode kick on `u`.
pub fn coexistence_kick_seed(problem: &GalerkinProblem, kick: f64) -> Option<Vec<f64>> {
    let co = SteadyState::coexistence(&problem.params)?;
    let mut x = problem.homogeneous(&co);
    if problem.modes >= 1 {
        x[1] = kick;
    }
    Some(x)
}

/// Controls for the fallback search in [`solve_patterned`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Multistart {
    pub starts: usize,
    pub seed: u64,
}

impl Default for Multistart {
    fn default() -> Self {
        Multistart {
            starts: 1500,
            seed: 1,
        }
    }
}

/// Newton from `seed`, falling back to a multistart search when the seed
/// runs into a homogeneous root.
///
/// The fallback draws starts from a fixed-seed generator and keeps converged
/// patterned roots with `alpha_0, gamma_0 > 0` whose `alpha_1` has the sign of
/// the seed's; the root closest to the seed wins.
pub fn solve_patterned(
    problem: &GalerkinProblem,
    seed: &[f64],
    descriptor: SeedDescriptor,
    opts: &NewtonOptions,
    multistart: &Multistart,
    exec: Execution,
) -> Result<GalerkinSolution, GalerkinError> {
    let first = newton_solve(problem, seed, descriptor, opts)?;
    if first.converged && !first.is_flat() || problem.modes == 0 {
        return Ok(first);
    }
    let m = problem.modes;
    let mut rng = ChaCha8Rng::seed_from_u64(multistart.seed);
    let starts: Vec<(usize, Vec<f64>)> = (0..multistart.starts)
        .map(|idx| {
            let mut x = Vec::with_capacity(problem.dim());
            x.push(rng.gen_range(0.0..1.2));
            x.extend((0..m).map(|_| rng.gen_range(-0.8..0.8)));
            x.push(rng.gen_range(0.0..1.2));
            x.extend((0..m).map(|_| rng.gen_range(-0.8..0.8)));
            (idx, x)
        })
        .collect();
    let sign = if seed[1] == 0.0 { 1.0 } else { seed[1].signum() };
    let candidates = exec.map(&starts, |(idx, x)| {
        let d = SeedDescriptor::Multistart {
            index: *idx,
            seed: multistart.seed,
        };
        newton_solve(problem, x, d, opts).ok().filter(|s| {
            s.converged
                && !s.is_flat()
                && s.unknowns[0] > 1e-3
                && s.unknowns[m + 1] > 1e-3
                && s.unknowns[1].abs() > 1e-3
                && s.unknowns[1].signum() == sign
        })
    });
    let dist = |s: &GalerkinSolution| {
        s.unknowns
            .iter()
            .zip(seed)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    };
    Ok(candidates
        .into_iter()
        .flatten()
        .min_by(|a, b| dist(a).total_cmp(&dist(b)))
        .unwrap_or(first))
}

/// `int_0^L (analytic - simulated)^2 dx` for one field, on the simulation
/// grid.
pub fn profile_error(
    analytic: &ModeSpectrum,
    simulated: &FieldState,
    grid: &Grid,
    field: Field,
) -> Result<f64, GalerkinError> {
    if (analytic.length - grid.length()).abs() > 1e-12 * grid.length() {
        return Err(GalerkinError::LengthMismatch {
            spectrum: analytic.length,
            profile: grid.length(),
        });
    }
    let model = reconstruct_profile(analytic.coefficients(field), grid);
    Ok(model
        .iter()
        .zip(simulated.field(field))
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        * grid.dx())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruncationRow {
    pub modes: usize,
    pub solution: GalerkinSolution,
    pub er_u: f64,
    pub er_v: f64,
}

/// How the first-order (`M = 1`) system of a truncation study is seeded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SeedPolicy {
    /// Truncated spectrum of the reference state.
    #[default]
    Simulated,
    /// The stable physical homogeneous state with `alpha_1 = kick`, signed
    /// like the reference `alpha_1`.
    BaseKick { kick: f64 },
}

/// Stable physical homogeneous state: coexistence when it qualifies, else
/// the stable extinction state.
pub fn stable_base_state(params: &ModelParams) -> Option<SteadyState> {
    crate::model::steady_states(params)
        .states
        .into_iter()
        .filter(|s| s.physical)
        .rev()
        .find(|s| crate::model::classify_well_mixed(s, params).stable)
}

/// Solves orders `1..=max_modes` and scores every solution against
/// `reference`.
///
/// Orders `M >= 2` are seeded from the truncated reference spectrum; the
/// first order follows `first_order`. Runs that reach a homogeneous root
/// fall back to [`solve_patterned`]'s multistart search.
#[allow(clippy::too_many_arguments)]
pub fn truncation_study(
    params: &ModelParams,
    reference: &FieldState,
    grid: &Grid,
    max_modes: usize,
    first_order: SeedPolicy,
    opts: &NewtonOptions,
    multistart: &Multistart,
    exec: Execution,
) -> Result<Vec<TruncationRow>, GalerkinError> {
    let p = ModelParams {
        length: grid.length(),
        ..*params
    };
    let spectrum = decompose_state(reference, grid, max_modes.max(1)).map_err(|_| GalerkinError::Dimension {
        expected: 2 * max_modes + 2,
        got: reference.len(),
    })?;
    let orders: Vec<usize> = (1..=max_modes).collect();
    let rows = exec.map(&orders, |&m| -> Result<TruncationRow, GalerkinError> {
        let problem = GalerkinProblem::new(p, m);
        let (seed, descriptor) = match first_order {
            SeedPolicy::BaseKick { kick } if m == 1 => {
                let base = stable_base_state(&p).unwrap_or_else(SteadyState::extinction_of_v);
                let mut x = problem.homogeneous(&base);
                x[1] = kick.abs() * spectrum.alpha[1].signum();
                (x, SeedDescriptor::BaseKick { kick, base: base.kind })
            }
            _ => (problem.truncate(&spectrum), SeedDescriptor::Simulated),
        };
        let solution = solve_patterned(&problem, &seed, descriptor, opts, multistart, Execution::Sequential)?;
        Ok(TruncationRow {
            modes: m,
            er_u: profile_error(&solution.spectrum, reference, grid, Field::U)?,
            er_v: profile_error(&solution.spectrum, reference, grid, Field::V)?,
            solution,
        })
    });
    rows.into_iter().collect()
}

/// Galerkin characteristic length for one parameter value.
#[derive(Clone, Debug, PartialEq)]
pub struct Characteristic {
    pub value: f64,
    /// Length maximising `|alpha_1|` over the scanned lengths, if any
    /// patterned solution was found.
    pub lambda0: Option<f64>,
    pub alpha1: Option<f64>,
    pub gamma1: Option<f64>,
}

/// For each value of `param`, continues a patterned order-`M` solution along
/// `lengths` and reports where `|alpha_1|` peaks.
///
/// Each length is seeded from the previous converged patterned solution, the
/// first from the coexistence state with a first-mode kick. Values with no
/// patterned solution at any length are reported with `None`.
pub fn parameter_characteristics(
    param: Param,
    values: &[f64],
    base: &ModelParams,
    lengths: &[f64],
    modes: usize,
    opts: &NewtonOptions,
    exec: Execution,
) -> Vec<Characteristic> {
    exec.map(values, |&value| {
        let p = base.with(param, value);
        let mut prev: Option<Vec<f64>> = None;
        let mut best: Option<(f64, f64, f64)> = None;
        for &l in lengths {
            let problem = GalerkinProblem::new(ModelParams { length: l, ..p }, modes);
            let (seed, desc) = match &prev {
                Some(x) => (x.clone(), SeedDescriptor::Continuation),
                None => match coexistence_kick_seed(&problem, 0.1) {
                    Some(x) => (x, SeedDescriptor::CoexistenceKick { kick: 0.1 }),
                    None => break,
                },
            };
            let sol = match newton_solve(&problem, &seed, desc, opts) {
                Ok(s) if s.converged && !s.is_flat() && s.unknowns[0] > 0.0 => s,
                _ => {
                    prev = None;
                    continue;
                }
            };
            let a1 = sol.spectrum.alpha[1];
            if best.is_none_or(|(_, b, _)| a1.abs() > b.abs()) {
                best = Some((l, a1, sol.spectrum.gamma[1]));
            }
            prev = Some(sol.unknowns);
        }
        Characteristic {
            value,
            lambda0: best.map(|b| b.0),
            alpha1: best.map(|b| b.1),
            gamma1: best.map(|b| b.2),
        }
    })
}
