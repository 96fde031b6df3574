//! Model parameters, homogeneous steady states and well-mixed stability.

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sign in front of the logistic term of the `v` equation.
///
/// The steady states, the characteristic matrix and the extinction-state
/// eigenvalues all require `+r2 v (1 - v - b2 u)`. Kept as a constant so the
/// alternative reading can be audited by flipping one value.
pub const V_REACTION_SIGN: f64 = 1.0;

/// Tolerance below which an eigenvalue real part counts as zero (marginal).
const MARGINAL_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("parameter {name} must be {requirement}, got {value}")]
    OutOfRange {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("unknown parameter name `{0}`")]
    UnknownName(String),
}

/// The seven model parameters plus the domain length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Diffusion rate of `u`.
    #[serde(rename = "D1")]
    pub d1: f64,
    /// Diffusion rate of `v`.
    #[serde(rename = "D2")]
    pub d2: f64,
    /// Chemotactic sensitivity of `u` to `c`; negative values repel.
    pub chi: f64,
    pub r1: f64,
    pub r2: f64,
    /// Competition strength of `v` on `u`.
    pub b1: f64,
    /// Competition strength of `u` on `v`.
    pub b2: f64,
    /// Domain length.
    #[serde(rename = "L")]
    pub length: f64,
}

impl Default for ModelParams {
    /// Weak competition, chemorepulsion `chi = -10`, half-spike domain `L = 15`.
    fn default() -> Self {
        ModelParams {
            d1: 1.0,
            d2: 1.0,
            chi: -10.0,
            r1: 0.1,
            r2: 0.1,
            b1: 0.7,
            b2: 0.7,
            length: 15.0,
        }
    }
}

impl ModelParams {
    /// Default parameters with the competition switched to the weak-strong
    /// regime `b2 = 1.7`, where `(1, 0, 0)` is linearly stable.
    pub fn weak_strong() -> Self {
        ModelParams {
            b2: 1.7,
            ..Default::default()
        }
    }

    pub fn with(mut self, param: Param, value: f64) -> Self {
        param.set(&mut self, value);
        self
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = [
            ("D1", self.d1),
            ("D2", self.d2),
            ("r1", self.r1),
            ("r2", self.r2),
            ("L", self.length),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ParamError::OutOfRange {
                    name,
                    requirement: "finite and > 0",
                    value,
                });
            }
        }
        for (name, value) in [("b1", self.b1), ("b2", self.b2)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(ParamError::OutOfRange {
                    name,
                    requirement: "finite and >= 0",
                    value,
                });
            }
        }
        if !self.chi.is_finite() {
            return Err(ParamError::OutOfRange {
                name: "chi",
                requirement: "finite",
                value: self.chi,
            });
        }
        Ok(())
    }
}

/// A named scalar of [`ModelParams`], used by sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Param {
    #[serde(rename = "D1")]
    D1,
    #[serde(rename = "D2")]
    D2,
    #[serde(rename = "chi")]
    Chi,
    #[serde(rename = "r1")]
    R1,
    #[serde(rename = "r2")]
    R2,
    #[serde(rename = "b1")]
    B1,
    #[serde(rename = "b2")]
    B2,
    #[serde(rename = "L")]
    L,
}

impl Param {
    pub const ALL: [Param; 8] = [
        Param::D1,
        Param::D2,
        Param::Chi,
        Param::R1,
        Param::R2,
        Param::B1,
        Param::B2,
        Param::L,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::D1 => "D1",
            Param::D2 => "D2",
            Param::Chi => "chi",
            Param::R1 => "r1",
            Param::R2 => "r2",
            Param::B1 => "b1",
            Param::B2 => "b2",
            Param::L => "L",
        }
    }

    pub fn get(self, p: &ModelParams) -> f64 {
        match self {
            Param::D1 => p.d1,
            Param::D2 => p.d2,
            Param::Chi => p.chi,
            Param::R1 => p.r1,
            Param::R2 => p.r2,
            Param::B1 => p.b1,
            Param::B2 => p.b2,
            Param::L => p.length,
        }
    }

    pub fn set(self, p: &mut ModelParams, value: f64) {
        match self {
            Param::D1 => p.d1 = value,
            Param::D2 => p.d2 = value,
            Param::Chi => p.chi = value,
            Param::R1 => p.r1 = value,
            Param::R2 => p.r2 = value,
            Param::B1 => p.b1 = value,
            Param::B2 => p.b2 = value,
            Param::L => p.length = value,
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| ParamError::UnknownName(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    /// `(0, 0, 0)`.
    Trivial,
    /// `(1, 0, 0)`: species `v` extinct.
    ExtinctionOfV,
    /// `(0, 1, 1)`: species `u` extinct.
    ExtinctionOfU,
    Coexistence,
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StateKind::Trivial => "trivial",
            StateKind::ExtinctionOfV => "extinction-of-v",
            StateKind::ExtinctionOfU => "extinction-of-u",
            StateKind::Coexistence => "coexistence",
        })
    }
}

/// A spatially homogeneous equilibrium. `c = v` always holds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyState {
    pub u: f64,
    pub v: f64,
    pub c: f64,
    pub kind: StateKind,
    /// False when a coordinate is negative (only possible for coexistence).
    pub physical: bool,
}

impl SteadyState {
    fn new(u: f64, v: f64, kind: StateKind) -> Self {
        SteadyState {
            u,
            v,
            c: v,
            kind,
            physical: u >= 0.0 && v >= 0.0,
        }
    }

    pub fn trivial() -> Self {
        Self::new(0.0, 0.0, StateKind::Trivial)
    }

    pub fn extinction_of_v() -> Self {
        Self::new(1.0, 0.0, StateKind::ExtinctionOfV)
    }

    pub fn extinction_of_u() -> Self {
        Self::new(0.0, 1.0, StateKind::ExtinctionOfU)
    }

    /// The interior equilibrium, or `None` when `b1 b2 = 1`.
    pub fn coexistence(params: &ModelParams) -> Option<Self> {
        let denom = params.b1 * params.b2 - 1.0;
        if denom.abs() < 1e-14 {
            return None;
        }
        let u = (params.b1 - 1.0) / denom;
        let v = (params.b2 - 1.0) / denom;
        (u.is_finite() && v.is_finite()).then(|| Self::new(u, v, StateKind::Coexistence))
    }

    /// Looks up the equilibrium of the given kind for `params`.
    pub fn of_kind(kind: StateKind, params: &ModelParams) -> Option<Self> {
        match kind {
            StateKind::Trivial => Some(Self::trivial()),
            StateKind::ExtinctionOfV => Some(Self::extinction_of_v()),
            StateKind::ExtinctionOfU => Some(Self::extinction_of_u()),
            StateKind::Coexistence => Self::coexistence(params),
        }
    }
}

/// All homogeneous equilibria for a parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct SteadyStates {
    pub states: Vec<SteadyState>,
    /// Set when `b1 b2 = 1`, in which case no coexistence state is listed.
    pub coexistence_degenerate: bool,
}

impl SteadyStates {
    pub fn coexistence(&self) -> Option<&SteadyState> {
        self.states
            .iter()
            .find(|s| s.kind == StateKind::Coexistence)
    }
}

pub fn steady_states(params: &ModelParams) -> SteadyStates {
    let mut states = vec![
        SteadyState::trivial(),
        SteadyState::extinction_of_v(),
        SteadyState::extinction_of_u(),
    ];
    let coexistence = SteadyState::coexistence(params);
    let coexistence_degenerate = coexistence.is_none();
    states.extend(coexistence);
    SteadyStates {
        states,
        coexistence_degenerate,
    }
}

/// Kinetic right-hand sides `(du, dv, dc)` at a point.
#[inline]
pub fn reaction_terms(u: f64, v: f64, c: f64, params: &ModelParams) -> (f64, f64, f64) {
    let du = params.r1 * u * (1.0 - u - params.b1 * v);
    let dv = V_REACTION_SIGN * params.r2 * v * (1.0 - v - params.b2 * u);
    (du, dv, v - c)
}

/// Jacobian of the kinetics at a homogeneous state, i.e. the `k = 0`
/// characteristic matrix.
pub fn jacobian(state: &SteadyState, params: &ModelParams) -> Matrix3<f64> {
    let (u, v) = (state.u, state.v);
    let (r1, r2, b1, b2) = (params.r1, params.r2, params.b1, params.b2);
    let s = V_REACTION_SIGN;
    Matrix3::new(
        r1 * (1.0 - 2.0 * u - b1 * v),
        -r1 * b1 * u,
        0.0,
        -s * r2 * b2 * v,
        s * r2 * (1.0 - 2.0 * v - b2 * u),
        0.0,
        0.0,
        1.0,
        -1.0,
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WellMixedVerdict {
    pub state: SteadyState,
    pub stable: bool,
    pub eigenvalue_real_parts: [f64; 3],
}

/// Stability of a homogeneous state without spatial coupling.
///
/// A state is stable when it is physical and every eigenvalue real part is
/// below `-1e-12`; marginal states count as unstable. A coexistence state with
/// a negative coordinate can have a stable Jacobian but is never an attractor
/// of nonnegative data, so it is reported unstable.
pub fn classify_well_mixed(state: &SteadyState, params: &ModelParams) -> WellMixedVerdict {
    let eig = jacobian(state, params).complex_eigenvalues();
    let mut re = [eig[0].re, eig[1].re, eig[2].re];
    re.sort_by(|a, b| b.total_cmp(a));
    WellMixedVerdict {
        state: *state,
        stable: state.physical && re.iter().all(|&x| x < -MARGINAL_EPS),
        eigenvalue_real_parts: re,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn analytic_rule(kind: StateKind, b1: f64, b2: f64) -> bool {
        match kind {
            StateKind::Trivial => false,
            StateKind::Coexistence => b1 < 1.0 && b2 < 1.0,
            StateKind::ExtinctionOfV => b2 > 1.0,
            StateKind::ExtinctionOfU => b1 > 1.0,
        }
    }

    #[test]
    fn weak_competition_coexistence_value() {
        let p = ModelParams::default();
        let s = steady_states(&p);
        let co = s.coexistence().unwrap();
        assert_abs_diff_eq!(co.u, 0.3 / 0.51, epsilon = 1e-14);
        assert_abs_diff_eq!(co.v, 0.3 / 0.51, epsilon = 1e-14);
        assert_eq!(co.c, co.v);
        assert!(co.physical);
        assert_eq!(s.states.len(), 4);
    }

    #[test]
    fn weak_strong_coexistence_is_flagged() {
        let p = ModelParams::weak_strong();
        let co = SteadyState::coexistence(&p).unwrap();
        assert_abs_diff_eq!(co.u, -0.3 / 0.19, epsilon = 1e-12);
        assert_abs_diff_eq!(co.v, 0.7 / 0.19, epsilon = 1e-12);
        assert!(!co.physical);
    }

    #[test]
    fn degenerate_product_omits_coexistence() {
        let p = ModelParams {
            b1: 0.5,
            b2: 2.0,
            ..Default::default()
        };
        let s = steady_states(&p);
        assert!(s.coexistence_degenerate);
        assert_eq!(s.states.len(), 3);
        let kinds: Vec<_> = s.states.iter().map(|s| s.kind).collect();
        assert_eq!(
            kinds,
            [
                StateKind::Trivial,
                StateKind::ExtinctionOfV,
                StateKind::ExtinctionOfU
            ]
        );
    }

    #[test]
    fn reaction_terms_examples() {
        let p = ModelParams::default();
        assert_eq!(reaction_terms(1.0, 0.0, 0.0, &p), (0.0, 0.0, 0.0));
        assert_eq!(reaction_terms(0.0, 1.0, 1.0, &p), (0.0, 0.0, 0.0));
        let (du, dv, dc) = reaction_terms(0.5, 0.5, 0.2, &p);
        assert_abs_diff_eq!(du, 0.0075, epsilon = 1e-15);
        assert_abs_diff_eq!(dv, 0.0075, epsilon = 1e-15);
        assert_abs_diff_eq!(dc, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn steady_states_are_equilibria_on_grid() {
        for i in 1..=20 {
            for j in 1..=20 {
                let p = ModelParams {
                    b1: 0.1 * i as f64,
                    b2: 0.1 * j as f64,
                    ..Default::default()
                };
                for s in steady_states(&p).states {
                    let (du, dv, dc) = reaction_terms(s.u, s.v, s.c, &p);
                    let scale = 1.0 + s.u.abs().max(s.v.abs()).powi(2);
                    assert!(du.abs() < 1e-12 * scale, "{s:?} {du}");
                    assert!(dv.abs() < 1e-12 * scale, "{s:?} {dv}");
                    assert_eq!(dc, 0.0);
                    if s.kind == StateKind::Coexistence {
                        assert!((1.0 - s.u - p.b1 * s.v).abs() < 1e-12 * scale);
                        assert!((1.0 - s.v - p.b2 * s.u).abs() < 1e-12 * scale);
                    }
                }
            }
        }
    }

    #[test]
    fn well_mixed_classification_matches_rules_on_grid() {
        for i in 1..=20 {
            for j in 1..=20 {
                let (b1, b2) = (0.1 * i as f64, 0.1 * j as f64);
                let p = ModelParams {
                    b1,
                    b2,
                    ..Default::default()
                };
                for s in steady_states(&p).states {
                    let verdict = classify_well_mixed(&s, &p);
                    assert_eq!(
                        verdict.stable,
                        analytic_rule(s.kind, b1, b2),
                        "{:?} at b1={b1} b2={b2}: {:?}",
                        s.kind,
                        verdict.eigenvalue_real_parts
                    );
                }
            }
        }
    }

    #[test]
    fn named_examples() {
        let p = ModelParams::weak_strong();
        assert!(!classify_well_mixed(&SteadyState::trivial(), &p).stable);
        assert!(classify_well_mixed(&SteadyState::extinction_of_v(), &p).stable);
        let weak = ModelParams::default();
        let co = SteadyState::coexistence(&weak).unwrap();
        assert!(classify_well_mixed(&co, &weak).stable);
    }

    #[test]
    fn param_names_round_trip() {
        for p in Param::ALL {
            assert_eq!(p.name().parse::<Param>().unwrap(), p);
        }
        assert!("D3".parse::<Param>().is_err());
        let p = ModelParams::default().with(Param::Chi, -50.0);
        assert_eq!(p.chi, -50.0);
    }

    #[test]
    fn validation() {
        assert!(ModelParams::default().validate().is_ok());
        let bad = ModelParams {
            d1: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(ParamError::OutOfRange { name: "D1", .. })
        ));
        let bad = ModelParams {
            b2: -0.1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
