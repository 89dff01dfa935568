//! Cell Riemann problems: wave-curve classification, the middle state,
//! shock speeds, and the piecewise-constant 1-rarefaction fan.
//!
//! The 1-wave from `u_L` is a rarefaction when `ρ_M ≤ ρ_L` (then `w` is
//! constant and `z` increases), otherwise a shock with speed
//! `σ₁ = v_L - S(ρ_M, ρ_L)`. Symmetrically the 2-wave into `u_R` is a
//! rarefaction when `ρ_M ≤ ρ_R`, otherwise a shock with
//! `σ₂ = v_R + S(ρ_M, ρ_R)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gas::{ConservedState, GasParams, RiemannPair};
use crate::scalar::{as_f64, from_usize, lit, Scalar};

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;
const CURVE_RESIDUAL_TOL: f64 = 1e-10;

/// Exponents of the rarefaction-fan construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FanParams<T> {
    pub alpha_fan: T,
    pub beta_fan: T,
}

impl<T: Scalar> FanParams<T> {
    pub fn new(alpha_fan: T, beta_fan: T, gp: &GasParams<T>) -> Result<Self> {
        let fp = Self { alpha_fan, beta_fan };
        fp.validate(gp)?;
        Ok(fp)
    }

    pub fn default_for(gp: &GasParams<T>) -> Result<Self> {
        Self::new(lit(0.75), lit(0.1), gp)
    }

    pub fn validate(&self, gp: &GasParams<T>) -> Result<()> {
        let (a, b) = (self.alpha_fan, self.beta_fan);
        let half = lit::<T>(0.5);
        let two = lit::<T>(2.0);
        let ok = a > half
            && a < T::one()
            && b > T::zero()
            && b < a
            && half + b / two < a
            && a < T::one() - two * b
            && b < two / (gp.gamma + lit(5.0))
            && (lit::<T>(9.0) - lit::<T>(3.0) * gp.gamma) * b / two < a;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "fan exponents alpha = {}, beta = {} violate the admissibility constraints for gamma = {}",
                as_f64(a),
                as_f64(b),
                as_f64(gp.gamma)
            )))
        }
    }
}

/// Wave pattern of a Riemann problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RiemannCase {
    /// 1-rarefaction, 2-shock
    R1S2,
    /// 1-shock, 2-rarefaction
    S1R2,
    R1R2,
    S1S2,
}

impl RiemannCase {
    fn from_waves(one_rarefaction: bool, two_rarefaction: bool) -> Self {
        match (one_rarefaction, two_rarefaction) {
            (true, false) => Self::R1S2,
            (false, true) => Self::S1R2,
            (true, true) => Self::R1R2,
            (false, false) => Self::S1S2,
        }
    }

    pub fn one_is_shock(self) -> bool {
        matches!(self, Self::S1R2 | Self::S1S2)
    }

    pub fn two_is_shock(self) -> bool {
        matches!(self, Self::R1S2 | Self::S1S2)
    }
}

/// Solution of the middle-state problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MiddleState<T> {
    pub state: ConservedState<T>,
    pub case: RiemannCase,
    /// 1-shock speed, when the 1-wave is a shock.
    pub sigma1: Option<T>,
    /// 2-shock speed, when the 2-wave is a shock.
    pub sigma2: Option<T>,
    /// `|v_1(ρ_M) - v_2(ρ_M)|` at the returned density.
    pub curve_residual: T,
    pub newton_iterations: usize,
    pub used_bisection: bool,
}

/// Discretized 1-rarefaction: states `(z_i*, w_L)` separated by rays.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiemannFan<T> {
    pub states: Vec<RiemannPair<T>>,
    /// Speed of the ray between states `i` and `i+1`.
    pub speeds: Vec<T>,
    pub shock: Option<(T, ConservedState<T>)>,
}

impl<T> RiemannFan<T> {
    pub fn p(&self) -> usize {
        self.states.len()
    }
}

/// `S(ρ, ρ₀)`: relative shock speed, `ρ₀^θ` on the diagonal.
pub fn shock_speed_s<T: Scalar>(rho: T, rho0: T, gp: &GasParams<T>) -> Result<T> {
    if !(rho0 > T::zero()) {
        return Err(Error::Domain(format!("reference density {} must be positive", as_f64(rho0))));
    }
    if !(rho >= T::zero()) {
        return Err(Error::Domain(format!("negative density {}", as_f64(rho))));
    }
    if rho == rho0 {
        return Ok(rho0.powf(gp.theta));
    }
    let dp = gp.pressure_unchecked(rho) - gp.pressure_unchecked(rho0);
    Ok((rho * dp / (rho0 * (rho - rho0))).sqrt())
}

/// One branch of a wave curve through a reference state.
struct WaveCurve<'a, T> {
    rho_ref: T,
    v_ref: T,
    /// `-1` for the 1-curve from the left, `+1` for the 2-curve into the right.
    sign: T,
    gp: &'a GasParams<T>,
}

impl<T: Scalar> WaveCurve<'_, T> {
    /// `(v(ρ), dv/dρ)` along the curve.
    fn eval(&self, rho: T) -> (T, T) {
        let gp = self.gp;
        let th = gp.theta;
        if rho <= self.rho_ref {
            let v = self.v_ref + self.sign * (rho.powf(th) - self.rho_ref.powf(th)) / th;
            let dv = if rho > T::zero() { self.sign * rho.powf(th - T::one()) } else { T::zero() };
            return (v, dv);
        }
        let p = gp.pressure_unchecked(rho);
        let pr = gp.pressure_unchecked(self.rho_ref);
        let dp = p - pr;
        let drho = rho - self.rho_ref;
        let den = rho * self.rho_ref;
        let q = dp * drho / den;
        let v = self.v_ref + self.sign * q.sqrt();
        if q <= T::epsilon() * T::epsilon() {
            return (v, self.sign * self.rho_ref.powf(th - T::one()));
        }
        let dp_drho = rho.powf(gp.gamma - T::one());
        let dq = (dp_drho * drho + dp) / den - q / rho;
        (v, self.sign * dq / (lit::<T>(2.0) * q.sqrt()))
    }
}

/// Solves for the middle state connecting `uL` (1-wave) and `uR` (2-wave).
pub fn solve_middle<T: Scalar>(
    ul: &ConservedState<T>,
    ur: &ConservedState<T>,
    gp: &GasParams<T>,
) -> Result<MiddleState<T>> {
    if ul.is_vacuum() || ur.is_vacuum() {
        return Err(Error::Domain("Riemann data must be away from vacuum".into()));
    }
    let left = WaveCurve { rho_ref: ul.rho, v_ref: ul.velocity(), sign: -T::one(), gp };
    let right = WaveCurve { rho_ref: ur.rho, v_ref: ur.velocity(), sign: T::one(), gp };
    let gap = gp.to_invariants(ul).w - gp.to_invariants(ur).z;
    if !(gap > T::zero()) {
        return Err(Error::NearVacuum { gap: as_f64(gap) });
    }
    let mismatch = |rho: T| {
        let (vl, dl) = left.eval(rho);
        let (vr, dr) = right.eval(rho);
        (vl - vr, dl - dr)
    };

    // f(0) = w_L - z_R > 0 and f decreases; find a right end of the bracket
    let mut lo = T::zero();
    let mut hi = ul.rho.max(ur.rho);
    let mut grow = 0;
    while mismatch(hi).0 > T::zero() {
        lo = hi;
        hi = hi * lit(2.0);
        grow += 1;
        if grow > 2000 || !hi.is_finite() {
            return Err(Error::Domain("middle-state bracket search failed".into()));
        }
    }

    // two-rarefaction density is exact for R1R2 and a good start otherwise
    let two = lit::<T>(2.0);
    let mut rho = (gp.theta * gap / two).powf(T::one() / gp.theta);
    if !(rho > lo && rho < hi) {
        rho = (lo + hi) / two;
    }
    let tol = lit::<T>(NEWTON_TOL);
    let mut converged = false;
    let mut iters = 0;
    while iters < NEWTON_MAX_ITER {
        iters += 1;
        let (f, df) = mismatch(rho);
        if f > T::zero() {
            lo = lo.max(rho);
        } else {
            hi = hi.min(rho);
        }
        if !(df < T::zero()) || !f.is_finite() {
            break;
        }
        let next = rho - f / df;
        if !(next > T::zero()) || !next.is_finite() {
            break;
        }
        let step = (next - rho).abs();
        rho = next;
        if step <= tol * rho.max(T::one()) {
            converged = true;
            break;
        }
    }
    let mut used_bisection = false;
    if !converged {
        used_bisection = true;
        for _ in 0..400 {
            let mid = (lo + hi) / two;
            if mismatch(mid).0 > T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= tol * hi.max(T::one()) * lit(1e-2) {
                break;
            }
        }
        rho = (lo + hi) / two;
    }

    let (vl, _) = left.eval(rho);
    let (vr, _) = right.eval(rho);
    let residual = (vl - vr).abs();
    let v_scale = T::one() + vl.abs() + rho.powf(gp.theta) / gp.theta;
    if residual > lit::<T>(CURVE_RESIDUAL_TOL) * v_scale {
        return Err(Error::Domain(format!(
            "middle-state solve left curve residual {:e}",
            as_f64(residual)
        )));
    }
    let v = (vl + vr) / two;
    let state = ConservedState { rho, m: rho * v };
    let one_rare = rho <= ul.rho;
    let two_rare = rho <= ur.rho;
    let case = RiemannCase::from_waves(one_rare, two_rare);
    let sigma1 = if one_rare { None } else { Some(ul.velocity() - shock_speed_s(rho, ul.rho, gp)?) };
    let sigma2 = if two_rare { None } else { Some(ur.velocity() + shock_speed_s(rho, ur.rho, gp)?) };
    Ok(MiddleState {
        state,
        case,
        sigma1,
        sigma2,
        curve_residual: residual,
        newton_iterations: iters,
        used_bisection,
    })
}

/// Classifies the Riemann problem `(uL, uR)`; zero-strength waves count as rarefactions.
pub fn classify<T: Scalar>(ul: &ConservedState<T>, ur: &ConservedState<T>, gp: &GasParams<T>) -> Result<RiemannCase> {
    if ul == ur {
        return Ok(RiemannCase::R1R2);
    }
    Ok(solve_middle(ul, ur, gp)?.case)
}

/// Piecewise-constant 1-rarefaction fan from `uL` up to `z_M`.
///
/// States are `z_i* = z_L + (i-1)(Δx)^α` for `i < p` and `z_p* = z_M`, with
/// `p = max{⌊(z_M - z_L)/(Δx)^α⌋ + 1, 2}`; `w` stays at `w_L`. The ray between
/// states `i` and `i+1` moves with `v(z_i*, w_L) - S(ρ(z_{i+1}*), ρ(z_i*))`.
pub fn build_fan<T: Scalar>(
    ul: &ConservedState<T>,
    z_m: T,
    dx: T,
    fp: &FanParams<T>,
    gp: &GasParams<T>,
) -> Result<RiemannFan<T>> {
    let RiemannPair { z: z_l, w: w_l } = gp.to_invariants(ul);
    if z_m < z_l {
        return Err(Error::FanOrientation { z_l: as_f64(z_l), z_m: as_f64(z_m) });
    }
    if z_m > w_l {
        return Err(Error::Domain(format!(
            "fan end z_M = {} beyond vacuum line w_L = {}",
            as_f64(z_m),
            as_f64(w_l)
        )));
    }
    let h = dx.powf(fp.alpha_fan);
    let steps = ((z_m - z_l) / h)
        .floor()
        .to_usize()
        .ok_or_else(|| Error::Domain("fan state count overflows".into()))?;
    let p = (steps + 1).max(2);
    let mut states: Vec<RiemannPair<T>> = (0..p - 1)
        .map(|i| RiemannPair { z: z_l + from_usize::<T>(i) * h, w: w_l })
        .collect();
    states.push(RiemannPair { z: z_m, w: w_l });

    let two = lit::<T>(2.0);
    let rho_at = |z: T| (gp.theta * (w_l - z) / two).powf(T::one() / gp.theta);
    let mut speeds = Vec::with_capacity(p - 1);
    for pair in states.windows(2) {
        let (a, b) = (pair[0].z, pair[1].z);
        let rho_a = rho_at(a);
        let s = if rho_a > T::zero() { shock_speed_s(rho_at(b), rho_a, gp)? } else { T::zero() };
        speeds.push((w_l + a) / two - s);
    }
    Ok(RiemannFan { states, speeds, shock: None })
}

/// Rankine–Hugoniot defect `f(uR) - f(uL) - σ(uR - uL)`.
pub fn rh_residual<T: Scalar>(
    sigma: T,
    ul: &ConservedState<T>,
    ur: &ConservedState<T>,
    gp: &GasParams<T>,
) -> Result<(T, T)> {
    for u in [ul, ur] {
        if u.rho < T::zero() || (u.is_vacuum() && u.m != T::zero()) {
            return Err(Error::Domain("vacuum state with nonzero momentum flux".into()));
        }
    }
    let (fl0, fl1) = gp.flux(ul);
    let (fr0, fr1) = gp.flux(ur);
    Ok((fr0 - fl0 - sigma * (ur.rho - ul.rho), fr1 - fl1 - sigma * (ur.m - ul.m)))
}

/// Entropy dissipation `σ[η*] - [q*]` across a discontinuity from `ul` to `ur`.
pub fn entropy_dissipation<T: Scalar>(
    sigma: T,
    ul: &ConservedState<T>,
    ur: &ConservedState<T>,
    gp: &GasParams<T>,
) -> T {
    let (el, ql) = gp.entropy_pair(ul);
    let (er, qr) = gp.entropy_pair(ur);
    sigma * (er - el) - (qr - ql)
}
