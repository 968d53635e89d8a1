//! Band-limited rational approximation of fractional differ-integrators and
//! the parallel PIλDμ controller built from them.
//!
//! The operator `s^γ` is replaced over `[ω_b, ω_h]` by Oustaloup's recursive
//! filter `K ∏ (s + ω'_k)/(s + ω_k)`, `k = -N..=N`, with
//!
//! ```text
//! ω_k  = ω_b (ω_h/ω_b)^((k + N + (1 + γ)/2) / (2N + 1))
//! ω'_k = ω_b (ω_h/ω_b)^((k + N + (1 - γ)/2) / (2N + 1))
//! K    = ω_h^γ
//! ```

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::statespace::StateSpaceModel;

pub const DEFAULT_OMEGA_B: f64 = 1e-2;
pub const DEFAULT_OMEGA_H: f64 = 1e2;
pub const DEFAULT_N_HALF: usize = 2;

/// Frequency band and half-order shared by every fractional branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band<T> {
    pub omega_b: T,
    pub omega_h: T,
    pub n_half: usize,
}

impl<T: Scalar> Default for Band<T> {
    fn default() -> Self {
        Self {
            omega_b: T::lit(DEFAULT_OMEGA_B),
            omega_h: T::lit(DEFAULT_OMEGA_H),
            n_half: DEFAULT_N_HALF,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OustaloupConfig<T> {
    pub gamma: T,
    pub band: Band<T>,
}

impl<T: Scalar> OustaloupConfig<T> {
    pub fn new(gamma: T, omega_b: T, omega_h: T, n_half: usize) -> Self {
        Self {
            gamma,
            band: Band { omega_b, omega_h, n_half },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let Band { omega_b, omega_h, n_half } = self.band;
        if !(omega_b > T::zero() && omega_b.is_finite() && omega_h.is_finite()) {
            return Err(Error::InvalidConfig(format!("band edges must be positive and finite, got [{omega_b}, {omega_h}]")));
        }
        if omega_b >= omega_h {
            return Err(Error::InvalidConfig(format!("omega_b ({omega_b}) must be below omega_h ({omega_h})")));
        }
        if n_half < 1 {
            return Err(Error::InvalidConfig("half-order N must be at least 1".into()));
        }
        if !self.gamma.is_finite() || self.gamma.abs() > T::lit(2.0) {
            return Err(Error::InvalidConfig(format!("order {} outside [-2, 2]", self.gamma)));
        }
        Ok(())
    }
}

/// Zero-pole-gain form `gain * ∏ (s + zeros[k]) / (s + poles[k])`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFilter<T> {
    pub zeros: Vec<T>,
    pub poles: Vec<T>,
    pub gain: T,
}

impl<T: Scalar> RationalFilter<T> {
    pub fn order(&self) -> usize {
        self.poles.len()
    }

    /// Direct evaluation of the factored form at `s = jω`.
    pub fn freq_response(&self, omega: T) -> Complex<T> {
        let s = Complex::new(T::zero(), omega);
        self.zeros
            .iter()
            .zip(&self.poles)
            .fold(Complex::new(self.gain, T::zero()), |acc, (&z, &p)| acc * (s + z) / (s + p))
    }
}

/// Synthesizes the `(2N+1)`-order Oustaloup approximation of `s^γ`.
pub fn oustaloup_filter<T: Scalar>(cfg: &OustaloupConfig<T>) -> Result<RationalFilter<T>> {
    cfg.validate()?;
    let Band { omega_b, omega_h, n_half } = cfg.band;
    let n = n_half as i64;
    let order = T::lit((2 * n + 1) as f64);
    let ratio = omega_h / omega_b;
    let half = T::lit(0.5);
    let gamma = cfg.gamma;

    let mut zeros = Vec::with_capacity(2 * n_half + 1);
    let mut poles = Vec::with_capacity(2 * n_half + 1);
    for k in -n..=n {
        let base = T::lit((k + n) as f64);
        poles.push(omega_b * ratio.powf((base + half * (T::one() + gamma)) / order));
        zeros.push(omega_b * ratio.powf((base + half * (T::one() - gamma)) / order));
    }
    Ok(RationalFilter {
        zeros,
        poles,
        gain: omega_h.powf(gamma),
    })
}

/// Realizes a zero-pole-gain filter as a cascade of first-order sections.
///
/// Section `i` is `(s + z_i)/(s + p_i) = 1 + (z_i - p_i)/(s + p_i)`, so with
/// `c_j = z_j - p_j` the cascade has
/// `x_i' = -p_i x_i + K u + Σ_{j<i} c_j x_j` and `y = K u + Σ_j c_j x_j`.
/// The state matrix is lower triangular with the negated poles on its
/// diagonal.
pub fn filter_to_statespace<T: Scalar>(f: &RationalFilter<T>) -> StateSpaceModel<T> {
    let n = f.order();
    let coupling: Vec<T> = f.zeros.iter().zip(&f.poles).map(|(&z, &p)| z - p).collect();
    let mut a = vec![T::zero(); n * n];
    for i in 0..n {
        a[i * n + i] = -f.poles[i];
        for j in 0..i {
            a[i * n + j] = coupling[j];
        }
    }
    StateSpaceModel::new(a, vec![f.gain; n], coupling, f.gain).expect("cascade realization dimensions are consistent")
}

/// The decision vector `{Kp, Ki, Kd, λ, μ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams<T> {
    pub kp: T,
    pub ki: T,
    pub kd: T,
    pub lambda: T,
    pub mu: T,
}

impl<T: Scalar> ControllerParams<T> {
    pub fn fopid(kp: T, ki: T, kd: T, lambda: T, mu: T) -> Self {
        Self { kp, ki, kd, lambda, mu }
    }

    /// Integer-order PID: `λ = μ = 1`.
    pub fn pid(kp: T, ki: T, kd: T) -> Self {
        Self::fopid(kp, ki, kd, T::one(), T::one())
    }

    pub fn to_vec(&self) -> Vec<T> {
        vec![self.kp, self.ki, self.kd, self.lambda, self.mu]
    }

    /// Reads a 3-vector as PID gains or a 5-vector as full FOPID parameters.
    pub fn from_slice(x: &[T]) -> Self {
        match x.len() {
            3 => Self::pid(x[0], x[1], x[2]),
            5 => Self::fopid(x[0], x[1], x[2], x[3], x[4]),
            n => panic!("controller vector must have 3 or 5 entries, got {n}"),
        }
    }
}

/// Shared realization of the branch `s^γ`, or a unit gain when `γ == 0`.
fn fractional_branch<T: Scalar>(gamma: T, band: &Band<T>) -> Result<StateSpaceModel<T>> {
    if gamma == T::zero() {
        return Ok(StateSpaceModel::gain(T::one()));
    }
    let filter = oustaloup_filter(&OustaloupConfig { gamma, band: *band })?;
    Ok(filter_to_statespace(&filter))
}

/// `Kp + Ki s^{-λ} + Kd s^{μ}` in parallel form, each fractional operator
/// replaced by its Oustaloup realization over `band`. Branches with a zero
/// gain are omitted.
pub fn fopid_controller<T: Scalar>(p: &ControllerParams<T>, band: &Band<T>) -> Result<StateSpaceModel<T>> {
    for (name, v) in [("kp", p.kp), ("ki", p.ki), ("kd", p.kd), ("lambda", p.lambda), ("mu", p.mu)] {
        if !v.is_finite() {
            return Err(Error::InvalidConfig(format!("{name} is not finite")));
        }
    }
    let mut branches = vec![StateSpaceModel::gain(p.kp)];
    if p.ki != T::zero() {
        branches.push(fractional_branch(-p.lambda, band)?.scaled(p.ki));
    }
    if p.kd != T::zero() {
        branches.push(fractional_branch(p.mu, band)?.scaled(p.kd));
    }
    Ok(StateSpaceModel::parallel(&branches))
}

/// Controller definition as stored in JSON documents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerSpec {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "default_omega_b")]
    pub omega_b: f64,
    #[serde(default = "default_omega_h")]
    pub omega_h: f64,
    #[serde(default = "default_n_half")]
    pub n_half: usize,
}

fn one() -> f64 {
    1.0
}
fn default_omega_b() -> f64 {
    DEFAULT_OMEGA_B
}
fn default_omega_h() -> f64 {
    DEFAULT_OMEGA_H
}
fn default_n_half() -> usize {
    DEFAULT_N_HALF
}

impl ControllerSpec {
    pub fn new(params: ControllerParams<f64>, band: Band<f64>) -> Self {
        Self {
            kp: params.kp,
            ki: params.ki,
            kd: params.kd,
            lambda: params.lambda,
            mu: params.mu,
            omega_b: band.omega_b,
            omega_h: band.omega_h,
            n_half: band.n_half,
        }
    }

    pub fn params<T: Scalar>(&self) -> ControllerParams<T> {
        ControllerParams::fopid(T::lit(self.kp), T::lit(self.ki), T::lit(self.kd), T::lit(self.lambda), T::lit(self.mu))
    }

    pub fn band<T: Scalar>(&self) -> Band<T> {
        Band {
            omega_b: T::lit(self.omega_b),
            omega_h: T::lit(self.omega_h),
            n_half: self.n_half,
        }
    }

    pub fn build<T: Scalar>(&self) -> Result<StateSpaceModel<T>> {
        fopid_controller(&self.params(), &self.band())
    }
}
