//! Gas law, Riemann-invariant transforms, the mechanical-energy entropy pair
//! and the scalar functionals built from it.
//!
//! The pressure law is `p(ρ) = ρ^γ/γ` with `1 < γ ≤ 5/3` and `θ = (γ-1)/2`.
//! At vacuum (`ρ = 0`) the velocity is taken to be zero, so the invariants,
//! characteristic speeds and every derived quantity are total functions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{as_f64, lit, Scalar};

/// Default small exponent subtracted in the definition of `K`.
pub const DEFAULT_EPS: f64 = 0.01;

/// Conserved variables `(ρ, m)` with `m = ρv`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ConservedState<T> {
    pub rho: T,
    pub m: T,
}

impl<T: Scalar> ConservedState<T> {
    /// Builds a state, rejecting negative density and momentum at vacuum.
    pub fn new(rho: T, m: T) -> Result<Self> {
        if !(rho >= T::zero()) || !m.is_finite() {
            return Err(Error::Domain(format!(
                "state (rho = {}, m = {}) is not admissible",
                as_f64(rho),
                as_f64(m)
            )));
        }
        if rho == T::zero() && m != T::zero() {
            return Err(Error::Domain(format!("vacuum carries momentum m = {}", as_f64(m))));
        }
        Ok(Self { rho, m })
    }

    pub fn vacuum() -> Self {
        Self { rho: T::zero(), m: T::zero() }
    }

    pub fn is_vacuum(&self) -> bool {
        self.rho == T::zero()
    }

    /// `m/ρ`, or zero at vacuum.
    pub fn velocity(&self) -> T {
        if self.is_vacuum() {
            T::zero()
        } else {
            self.m / self.rho
        }
    }
}

/// Riemann invariants `z = v - ρ^θ/θ` and `w = v + ρ^θ/θ`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RiemannPair<T> {
    pub z: T,
    pub w: T,
}

/// Parameters of the gas law and of the invariant region.
///
/// `k` and `alpha_zeta` are tied to the initial data through
/// `K = α ρ̄ - ∫η*(u₀) - 1 = M^{2(γ-1)/(γ+1) - ε}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GasParams<T> {
    pub gamma: T,
    pub theta: T,
    pub eps: T,
    pub big_m: T,
    pub k: T,
    pub alpha_zeta: T,
    pub rho_bar: T,
    pub energy0: T,
}

impl<T: Scalar> GasParams<T> {
    pub fn new(gamma: T, eps: T, big_m: T, rho_bar: T, energy0: T) -> Result<Self> {
        if !(gamma > T::one() && gamma <= lit::<T>(5.0) / lit(3.0)) {
            return Err(Error::Config(format!("gamma = {} outside (1, 5/3]", as_f64(gamma))));
        }
        if !(eps > T::zero()) {
            return Err(Error::Config(format!("eps = {} must be positive", as_f64(eps))));
        }
        if !(big_m > T::zero()) || !big_m.is_finite() {
            return Err(Error::Config(format!("M = {} must be positive", as_f64(big_m))));
        }
        if !(rho_bar > T::zero()) {
            return Err(Error::Config(format!(
                "mean density rho_bar = {} must be positive",
                as_f64(rho_bar)
            )));
        }
        if !(energy0 >= T::zero()) || !energy0.is_finite() {
            return Err(Error::Config(format!(
                "initial energy {} must be finite and nonnegative",
                as_f64(energy0)
            )));
        }
        let two = lit::<T>(2.0);
        let theta = (gamma - T::one()) / two;
        let k = big_m.powf(two * (gamma - T::one()) / (gamma + T::one()) - eps);
        let alpha_zeta = (k + energy0 + T::one()) / rho_bar;
        Ok(Self { gamma, theta, eps, big_m, k, alpha_zeta, rho_bar, energy0 })
    }

    /// Builds parameters from initial data sampled at the `2N_x + 1` grid
    /// points of `[0, 1]`; `ρ̄` and `∫η*(u₀)` use the composite trapezoidal rule.
    pub fn from_samples(gamma: T, eps: T, big_m: T, samples: &[ConservedState<T>]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Config("need at least two initial samples".into()));
        }
        let h = T::one() / crate::scalar::from_usize(samples.len() - 1);
        let half = lit::<T>(0.5);
        let last = samples.len() - 1;
        let mut rho_bar = T::zero();
        let mut energy0 = T::zero();
        for (i, u) in samples.iter().enumerate() {
            let wgt = if i == 0 || i == last { half * h } else { h };
            rho_bar = rho_bar + wgt * u.rho;
            energy0 = energy0 + wgt * energy_density(gamma, u);
        }
        Self::new(gamma, eps, big_m, rho_bar, energy0)
    }

    /// `p(ρ) = ρ^γ/γ`.
    pub fn pressure(&self, rho: T) -> Result<T> {
        if !(rho >= T::zero()) {
            return Err(Error::Domain(format!("negative density {}", as_f64(rho))));
        }
        Ok(self.pressure_unchecked(rho))
    }

    #[inline]
    pub(crate) fn pressure_unchecked(&self, rho: T) -> T {
        rho.powf(self.gamma) / self.gamma
    }

    pub fn to_invariants(&self, u: &ConservedState<T>) -> RiemannPair<T> {
        if u.is_vacuum() {
            return RiemannPair { z: T::zero(), w: T::zero() };
        }
        let v = u.velocity();
        let s = u.rho.powf(self.theta) / self.theta;
        RiemannPair { z: v - s, w: v + s }
    }

    pub fn from_invariants(&self, p: &RiemannPair<T>) -> Result<ConservedState<T>> {
        if !(p.w >= p.z) {
            return Err(Error::Domain(format!(
                "w = {} below z = {} (negative density)",
                as_f64(p.w),
                as_f64(p.z)
            )));
        }
        let two = lit::<T>(2.0);
        let rho = (self.theta * (p.w - p.z) / two).powf(T::one() / self.theta);
        if rho == T::zero() {
            return Ok(ConservedState::vacuum());
        }
        Ok(ConservedState { rho, m: rho * (p.w + p.z) / two })
    }

    /// Characteristic speeds `(v - ρ^θ, v + ρ^θ)`.
    pub fn eigenvalues(&self, u: &ConservedState<T>) -> (T, T) {
        if u.is_vacuum() {
            return (T::zero(), T::zero());
        }
        let v = u.velocity();
        let c = u.rho.powf(self.theta);
        (v - c, v + c)
    }

    /// Physical flux `f(u) = (m, m²/ρ + p(ρ))`.
    pub fn flux(&self, u: &ConservedState<T>) -> (T, T) {
        if u.is_vacuum() {
            return (T::zero(), T::zero());
        }
        (u.m, u.m * u.m / u.rho + self.pressure_unchecked(u.rho))
    }

    /// Mechanical energy `η*` and its flux `q*`.
    pub fn entropy_pair(&self, u: &ConservedState<T>) -> (T, T) {
        if u.is_vacuum() {
            return (T::zero(), T::zero());
        }
        let half = lit::<T>(0.5);
        let v = u.velocity();
        let g1 = self.gamma - T::one();
        let eta = energy_density(self.gamma, u);
        let q = u.m * (half * v * v + u.rho.powf(g1) / g1);
        (eta, q)
    }

    pub fn eta(&self, u: &ConservedState<T>) -> T {
        energy_density(self.gamma, u)
    }

    /// `ζ(u) = η*(u) - αρ + K`.
    pub fn zeta(&self, u: &ConservedState<T>) -> T {
        self.eta(u) - self.alpha_zeta * u.rho + self.k
    }

    /// `V(u) = q*(u) - αm`.
    pub fn v_flux(&self, u: &ConservedState<T>) -> T {
        self.entropy_pair(u).1 - self.alpha_zeta * u.m
    }

    /// Source terms `(g1, g2)` of the transformed invariant equations.
    ///
    /// `f_moment` is the caller's approximation of `∫₀ˣ F(y,t) m(y,t) dy`.
    pub fn g_source(&self, u: &ConservedState<T>, f_val: T, f_moment: T) -> (T, T) {
        let forcing = f_val - f_moment;
        if u.is_vacuum() {
            return (forcing, forcing);
        }
        let (l1, l2) = self.eigenvalues(u);
        let powers = self.g_power_terms(u);
        (-self.k * l1 + powers + forcing, -self.k * l2 - powers + forcing)
    }

    /// The ρ-power part shared (with opposite signs) by `g1` and `g2`.
    pub(crate) fn g_power_terms(&self, u: &ConservedState<T>) -> T {
        let g = self.gamma;
        let th = self.theta;
        let half = lit::<T>(0.5);
        let v = u.velocity();
        let rho_th1 = u.rho.powf(th + T::one());
        u.rho.powf(g + th) / (g * (g - T::one())) + u.rho.powf(g) * v / g + half * rho_th1 * v * v
            - self.alpha_zeta * rho_th1
    }

    /// `C_γ = max{2^θ(θ+1), 2γ(γ-1)/(γ - 2 + (1/2)^{γ-1})}`.
    pub fn c_gamma(&self) -> T {
        let g = self.gamma;
        let two = lit::<T>(2.0);
        let a = two.powf(self.theta) * (self.theta + T::one());
        let b = two * g * (g - T::one()) / (g - two + lit::<T>(0.5).powf(g - T::one()));
        a.max(b)
    }

    /// Default vacuum-floor exponent δ, the midpoint of `(1, 1/(2θ))`.
    pub fn default_delta(&self) -> T {
        (T::one() + T::one() / (lit::<T>(2.0) * self.theta)) / lit(2.0)
    }

    /// Right-hand side of the decay estimate, `-½ M^{1 + 2(γ-1)/(γ+1) - ε}`.
    pub fn decay_bound(&self) -> T {
        let g = self.gamma;
        let expo = T::one() + lit::<T>(2.0) * (g - T::one()) / (g + T::one()) - self.eps;
        -lit::<T>(0.5) * self.big_m.powf(expo)
    }

    /// `M^{1+1/θ}·‖F‖∞`, which should be small for the band to be invariant.
    pub fn forcing_smallness(&self, amplitude: T) -> T {
        self.big_m.powf(T::one() + T::one() / self.theta) * amplitude
    }
}

/// `η*(u) = ½ m²/ρ + ρ^γ/(γ(γ-1))` for a given γ.
pub fn energy_density<T: Scalar>(gamma: T, u: &ConservedState<T>) -> T {
    if u.is_vacuum() {
        return T::zero();
    }
    let half = lit::<T>(0.5);
    half * u.m * u.m / u.rho + u.rho.powf(gamma) / (gamma * (gamma - T::one()))
}
