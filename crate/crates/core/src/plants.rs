//! Dead-time-plus-rational process models and their fixed-step integration.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::statespace::{Rk4Workspace, StateSpaceModel};

/// Output magnitude beyond which a trajectory is treated as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// `gain * num(s)/den(s) * exp(-dead_time * s)`, polynomials in descending
/// powers of `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedRationalPlant<T> {
    gain: T,
    dead_time: T,
    num: Vec<T>,
    den: Vec<T>,
    model: StateSpaceModel<T>,
}

impl<T: Scalar> DelayedRationalPlant<T> {
    pub fn new(gain: T, dead_time: T, num: Vec<T>, den: Vec<T>) -> Result<Self> {
        if !(dead_time >= T::zero() && dead_time.is_finite()) {
            return Err(Error::InvalidPlant(format!("dead time must be finite and non-negative, got {dead_time}")));
        }
        if !gain.is_finite() || num.iter().chain(&den).any(|c| !c.is_finite()) {
            return Err(Error::InvalidPlant("coefficients must be finite".into()));
        }
        let num = strip_leading_zeros(num);
        let den = strip_leading_zeros(den);
        if den.is_empty() {
            return Err(Error::InvalidPlant("denominator leading coefficient must be nonzero".into()));
        }
        if num.len() > den.len() {
            return Err(Error::InvalidPlant(format!(
                "improper transfer function: numerator degree {} exceeds denominator degree {}",
                num.len().saturating_sub(1),
                den.len() - 1
            )));
        }
        let model = controllable_realization(gain, &num, &den);
        Ok(Self { gain, dead_time, num, den, model })
    }

    pub fn gain(&self) -> T {
        self.gain
    }

    pub fn dead_time(&self) -> T {
        self.dead_time
    }

    pub fn num(&self) -> &[T] {
        &self.num
    }

    pub fn den(&self) -> &[T] {
        &self.den
    }

    /// Delay-free rational part as a state-space model.
    pub fn rational_part(&self) -> &StateSpaceModel<T> {
        &self.model
    }

    /// `L / (L + T)` for a first-order lag `1/(T s + 1)`; `None` otherwise.
    pub fn relative_dead_time(&self) -> Option<T> {
        if self.den.len() != 2 || self.num.len() != 1 || self.den[1] == T::zero() {
            return None;
        }
        let tau = self.den[0] / self.den[1];
        if tau <= T::zero() {
            return None;
        }
        Some(self.dead_time / (self.dead_time + tau))
    }

    /// Fresh state at rest, with the dead time quantized to whole substeps
    /// of length `h_sub`.
    pub fn initial_state(&self, h_sub: T) -> PlantState<T> {
        let steps = (self.dead_time / h_sub).round().to_usize().unwrap_or(0);
        let n = self.model.order();
        PlantState {
            x: vec![T::zero(); n],
            delay_line: std::iter::repeat_n(T::zero(), steps).collect(),
            delay_steps: steps,
            h_sub,
            last_input: T::zero(),
            ws: Rk4Workspace::new(n),
        }
    }

    /// Advances the plant by `h` seconds under the held input `u_held`,
    /// using `substeps` RK4 steps, and returns the output at the end of the
    /// interval.
    ///
    /// Every substep pushes `u_held` into the delay line and drives the
    /// rational part with the sample that leaves it, i.e. the input applied
    /// `delay_steps` substeps earlier.
    pub fn integrate_step(&self, state: &mut PlantState<T>, u_held: T, h: T, substeps: usize) -> std::result::Result<T, Diverged> {
        debug_assert!(substeps > 0 && h > T::zero());
        let h_sub = h / T::lit(substeps as f64);
        debug_assert!(
            (h_sub - state.h_sub).abs() <= state.h_sub * T::lit(1e-6),
            "state was initialized for a different substep"
        );
        for _ in 0..substeps {
            let delayed = if state.delay_steps == 0 {
                u_held
            } else {
                state.delay_line.push_back(u_held);
                state.delay_line.pop_front().unwrap_or(T::zero())
            };
            state.last_input = delayed;
            self.model.rk4_step(&mut state.x, delayed, h_sub, &mut state.ws);
        }
        let y = self.output(state);
        if !y.is_finite() || y.abs() > T::lit(DIVERGENCE_LIMIT) || state.x.iter().any(|v| !v.is_finite()) {
            return Err(Diverged { output: y.as_f64() });
        }
        Ok(y)
    }

    /// Current output from the rational-part state.
    pub fn output(&self, state: &PlantState<T>) -> T {
        self.model.output(&state.x, state.last_input)
    }
}

fn strip_leading_zeros<T: Scalar>(mut p: Vec<T>) -> Vec<T> {
    let lead = p.iter().take_while(|c| **c == T::zero()).count();
    p.drain(..lead);
    p
}

/// Controllable canonical form of `gain * num/den` (den already stripped).
fn controllable_realization<T: Scalar>(gain: T, num: &[T], den: &[T]) -> StateSpaceModel<T> {
    let n = den.len() - 1;
    let lead = den[0];
    let a_coef: Vec<T> = den[1..].iter().map(|&c| c / lead).collect();
    let mut b_coef = vec![T::zero(); n + 1];
    for (slot, &c) in b_coef[n + 1 - num.len()..].iter_mut().zip(num) {
        *slot = gain * c / lead;
    }
    let d = b_coef[0];
    if n == 0 {
        return StateSpaceModel::gain(d);
    }
    // x_1 = z, x_{i+1} = z^(i); z^(n) = u - Σ a_i z^(n-i)
    let mut a = vec![T::zero(); n * n];
    for i in 0..n - 1 {
        a[i * n + i + 1] = T::one();
    }
    for j in 0..n {
        a[(n - 1) * n + j] = -a_coef[n - 1 - j];
    }
    let mut b = vec![T::zero(); n];
    b[n - 1] = T::one();
    let c: Vec<T> = (0..n).map(|j| b_coef[n - j] - a_coef[n - 1 - j] * d).collect();
    StateSpaceModel::new(a, b, c, d).expect("canonical realization dimensions are consistent")
}

/// Integration state of one plant instance.
#[derive(Debug, Clone)]
pub struct PlantState<T> {
    pub x: Vec<T>,
    delay_line: VecDeque<T>,
    delay_steps: usize,
    h_sub: T,
    last_input: T,
    ws: Rk4Workspace<T>,
}

impl<T: Scalar> PlantState<T> {
    /// Number of substeps the input is delayed by.
    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    pub fn delay_line_len(&self) -> usize {
        self.delay_line.len()
    }
}

/// Trajectory left the admissible range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diverged {
    pub output: f64,
}

/// `K e^{-Ls} / (T s - 1)`.
pub fn make_fodup<T: Scalar>(k: T, l: T, t: T) -> Result<DelayedRationalPlant<T>> {
    if k == T::zero() {
        return Err(Error::InvalidPlant("gain must be nonzero".into()));
    }
    if !(t > T::zero()) {
        return Err(Error::InvalidPlant(format!("time constant must be positive, got {t}")));
    }
    DelayedRationalPlant::new(k, l, vec![T::one()], vec![t, -T::one()])
}

/// `K e^{-Ls} / ((T1 s - 1)(T2 s + 1))`.
pub fn make_sodup<T: Scalar>(k: T, l: T, t1: T, t2: T) -> Result<DelayedRationalPlant<T>> {
    if !(t1 > T::zero() && t2 > T::zero()) {
        return Err(Error::InvalidPlant(format!("time constants must be positive, got {t1} and {t2}")));
    }
    DelayedRationalPlant::new(k, l, vec![T::one()], vec![t1 * t2, t1 - t2, -T::one()])
}

/// `K e^{-Ls} / (T s + 1)`.
pub fn make_foptd<T: Scalar>(k: T, l: T, t: T) -> Result<DelayedRationalPlant<T>> {
    if !(t > T::zero()) {
        return Err(Error::InvalidPlant(format!("time constant must be positive, got {t}")));
    }
    DelayedRationalPlant::new(k, l, vec![T::one()], vec![t, T::one()])
}

/// Named test processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantPreset {
    /// `e^{-0.2s}/(s - 1)`
    P1Fodup,
    /// `e^{-0.939s}/((5s - 1)(2.07s + 1))`
    P2Sodup,
    /// `e^{-0.073s}/(1.03s + 1)`
    LagFoptd,
    /// `e^{-s}/(0.093s + 1)`
    DelayFoptd,
}

impl PlantPreset {
    pub const ALL: [PlantPreset; 4] = [Self::P1Fodup, Self::P2Sodup, Self::LagFoptd, Self::DelayFoptd];

    pub fn name(self) -> &'static str {
        match self {
            Self::P1Fodup => "p1_fodup",
            Self::P2Sodup => "p2_sodup",
            Self::LagFoptd => "lag_foptd",
            Self::DelayFoptd => "delay_foptd",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::UnknownPreset(name.to_string()))
    }

    pub fn build<T: Scalar>(self) -> DelayedRationalPlant<T> {
        let l = T::lit;
        match self {
            Self::P1Fodup => make_fodup(l(1.0), l(0.2), l(1.0)),
            Self::P2Sodup => make_sodup(l(1.0), l(0.939), l(5.0), l(2.07)),
            Self::LagFoptd => make_foptd(l(1.0), l(0.073), l(1.03)),
            Self::DelayFoptd => make_foptd(l(1.0), l(1.0), l(0.093)),
        }
        .expect("preset parameters are valid")
    }
}

/// Plant reference in a config document: a preset name or the generic form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlantSpec {
    Preset(String),
    Generic {
        gain: f64,
        dead_time: f64,
        num: Vec<f64>,
        den: Vec<f64>,
    },
}

impl PlantSpec {
    pub fn build<T: Scalar>(&self) -> Result<DelayedRationalPlant<T>> {
        match self {
            PlantSpec::Preset(name) => Ok(PlantPreset::from_name(name)?.build()),
            PlantSpec::Generic { gain, dead_time, num, den } => DelayedRationalPlant::new(
                T::lit(*gain),
                T::lit(*dead_time),
                num.iter().map(|&c| T::lit(c)).collect(),
                den.iter().map(|&c| T::lit(c)).collect(),
            ),
        }
    }
}
