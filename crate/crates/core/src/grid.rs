//! Staggered space-time mesh and the time-periodic outer force.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gas::GasParams;
use crate::scalar::{as_f64, from_usize, lit, Scalar};

/// Upper bound on `2N_t`; larger meshes are rejected as misconfigured.
pub const MAX_LEVELS: usize = 50_000_000;

/// Uniform staggered mesh on `[0,1] × [0,1]`.
///
/// Nodes are `x_j = j Δx` for `j = 0..=2N_x`; one forcing period spans
/// `2N_t` steps of size `Δt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid<T> {
    pub n_x: usize,
    pub n_t: usize,
    pub dx: T,
    pub dt: T,
    pub ratio: T,
}

impl<T: Scalar> Grid<T> {
    /// Builds the mesh with `Δx/Δt ≥ ⌊2M⌋ + 1` and `2N_t Δt = 1`.
    ///
    /// With `Δx = 1/(2N_x)` and target ratio `r = ⌊2M⌋ + 1` the period
    /// closes exactly at `N_t = r N_x`, so the ratio is attained exactly.
    pub fn build(n_x: usize, gp: &GasParams<T>) -> Result<Self> {
        if n_x < 2 {
            return Err(Error::Config(format!("n_x = {n_x} must be at least 2")));
        }
        let target = (lit::<T>(2.0) * gp.big_m).floor() + T::one();
        let target = target
            .to_usize()
            .ok_or_else(|| Error::Config(format!("mesh ratio for M = {} overflows", as_f64(gp.big_m))))?;
        let n_t = target
            .checked_mul(n_x)
            .filter(|n| n.checked_mul(2).is_some_and(|l| l <= MAX_LEVELS))
            .ok_or_else(|| {
                Error::Config(format!(
                    "n_x = {n_x} with M = {} needs more than {MAX_LEVELS} time levels",
                    as_f64(gp.big_m)
                ))
            })?;
        let dx = T::one() / from_usize::<T>(2 * n_x);
        let dt = T::one() / from_usize::<T>(2 * n_t);
        Ok(Self { n_x, n_t, dx, dt, ratio: from_usize::<T>(n_t) / from_usize(n_x) })
    }

    /// Number of steps in one period, `2N_t`.
    pub fn levels(&self) -> usize {
        2 * self.n_t
    }

    /// Index of the right wall node, `2N_x`.
    pub fn last_node(&self) -> usize {
        2 * self.n_x
    }

    pub fn x(&self, j: usize) -> T {
        from_usize::<T>(j) * self.dx
    }

    pub fn t(&self, n: usize) -> T {
        from_usize::<T>(n) * self.dt
    }

    pub fn stagger(&self, n: usize) -> Result<StaggerSet> {
        if n > self.levels() {
            return Err(Error::LevelOutOfRange { level: n, max: self.levels() });
        }
        Ok(StaggerSet::new(n, self.n_x))
    }

    /// Quadrature weight of node `j` on level `n`: `2Δx` for full cells,
    /// `Δx` for the wall half-cells of odd levels.
    pub fn weight(&self, n: usize, j: usize) -> T {
        if n % 2 == 1 && (j == 0 || j == self.last_node()) {
            self.dx
        } else {
            lit::<T>(2.0) * self.dx
        }
    }

    /// Width of the part of node `j`'s cell lying left of `x_j`.
    pub fn left_half_width(&self, j: usize) -> T {
        if j == 0 {
            T::zero()
        } else {
            self.dx
        }
    }
}

/// The index set `J_n = {k ∈ 0..=2N_x : k + n odd}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaggerSet {
    pub level: usize,
    pub indices: Vec<usize>,
}

impl StaggerSet {
    pub fn new(level: usize, n_x: usize) -> Self {
        let start = if level % 2 == 0 { 1 } else { 0 };
        Self { level, indices: (start..=2 * n_x).step_by(2).collect() }
    }

    pub fn contains(&self, k: usize) -> bool {
        (k + self.level) % 2 == 1 && self.indices.last().is_some_and(|&l| k <= l + 1)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// A force `F(x, t)` of period one in `t`.
pub trait Forcing<T: Scalar>: Send + Sync {
    fn eval(&self, x: T, t: T) -> T;

    /// Estimate of `‖F‖∞` over `[0,1]²`.
    fn amplitude(&self) -> T;
}

/// Built-in periodic forces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BuiltinForcing<T> {
    Zero,
    /// `A sin(2πt)`
    SinT(T),
    /// `A sin(2πt) sin(πx)`
    SinXT(T),
    /// `A (1 - cos(2πt))/2 · x(1-x)`
    GravityPulse(T),
}

pub const BUILTIN_FORCING_NAMES: [&str; 4] = ["zero", "sin_t", "sin_xt", "gravity_pulse"];

impl<T: Scalar> BuiltinForcing<T> {
    pub fn from_name(name: &str, amplitude: T) -> Result<Self> {
        match name {
            "zero" => Ok(Self::Zero),
            "sin_t" => Ok(Self::SinT(amplitude)),
            "sin_xt" => Ok(Self::SinXT(amplitude)),
            "gravity_pulse" => Ok(Self::GravityPulse(amplitude)),
            other => Err(Error::Config(format!(
                "unknown forcing '{other}' (expected one of {})",
                BUILTIN_FORCING_NAMES.join(", ")
            ))),
        }
    }
}

impl<T: Scalar> Forcing<T> for BuiltinForcing<T> {
    fn eval(&self, x: T, t: T) -> T {
        // reduce to one period so that F(x, 0) and F(x, 1) agree bit for bit
        let t = t - t.floor();
        let two_pi = lit::<T>(2.0 * PI);
        match *self {
            Self::Zero => T::zero(),
            Self::SinT(a) => a * (two_pi * t).sin(),
            Self::SinXT(a) => a * (two_pi * t).sin() * (lit::<T>(PI) * x).sin(),
            Self::GravityPulse(a) => {
                a * (T::one() - (two_pi * t).cos()) / lit(2.0) * x * (T::one() - x)
            }
        }
    }

    fn amplitude(&self) -> T {
        match *self {
            Self::Zero => T::zero(),
            Self::SinT(a) | Self::SinXT(a) => a.abs(),
            Self::GravityPulse(a) => a.abs() / lit(4.0),
        }
    }
}

/// Wraps a closure as a force. The closure is trusted to be 1-periodic in `t`.
pub struct FnForcing<F, T> {
    f: F,
    amplitude: T,
}

impl<F, T> FnForcing<F, T> {
    pub fn new(f: F, amplitude: T) -> Self {
        Self { f, amplitude }
    }
}

impl<T: Scalar, F: Fn(T, T) -> T + Send + Sync> Forcing<T> for FnForcing<F, T> {
    fn eval(&self, x: T, t: T) -> T {
        (self.f)(x, t)
    }

    fn amplitude(&self) -> T {
        self.amplitude
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gp(m: f64) -> GasParams<f64> {
        GasParams::new(1.4, 0.01, m, 1.0, 1.0).unwrap()
    }

    #[test]
    fn small_grid() {
        let g = Grid::build(2, &gp(0.4)).unwrap();
        assert_eq!(g.dx, 0.25);
        assert_eq!(g.n_t, 2);
        assert_eq!(g.dt, 0.25);
        assert_eq!(g.ratio, 1.0);
    }

    #[test]
    fn large_ratio_grid() {
        let g = Grid::build(50, &gp(100.0)).unwrap();
        assert_eq!(g.dx, 0.01);
        assert_eq!(g.n_t, 10050);
        assert_eq!(g.dt, 1.0 / 20100.0);
        assert!(g.ratio >= 201.0);
        assert_eq!(2.0 * g.n_t as f64 * g.dt, 1.0);
    }

    #[test]
    fn rejects_tiny_and_huge_grids() {
        assert!(matches!(Grid::build(1, &gp(1.0)), Err(Error::Config(_))));
        assert!(matches!(Grid::build(1_000_000, &gp(1e3)), Err(Error::Config(_))));
    }

    #[test]
    fn stagger_sets() {
        let g = Grid::build(2, &gp(0.4)).unwrap();
        assert_eq!(g.stagger(0).unwrap().indices, vec![1, 3]);
        assert_eq!(g.stagger(1).unwrap().indices, vec![0, 2, 4]);
        assert_eq!(g.stagger(g.levels()).unwrap().indices, g.stagger(0).unwrap().indices);
        assert!(matches!(g.stagger(5), Err(Error::LevelOutOfRange { .. })));
    }

    #[test]
    fn stagger_partition() {
        for n_x in 2..7 {
            for n in 0..6 {
                let a = StaggerSet::new(n, n_x);
                let b = StaggerSet::new(n + 1, n_x);
                let mut all: Vec<usize> = a.indices.iter().chain(&b.indices).copied().collect();
                all.sort_unstable();
                assert_eq!(all, (0..=2 * n_x).collect::<Vec<_>>());
                assert!(a.indices.iter().all(|k| a.contains(*k) && !b.contains(*k)));
                assert!(a.len() == n_x || a.len() == n_x + 1);
            }
        }
    }

    #[test]
    fn builtin_values() {
        let z = BuiltinForcing::<f64>::from_name("zero", 3.0).unwrap();
        assert_eq!(z.eval(0.3, 0.7), 0.0);
        let s = BuiltinForcing::from_name("sin_t", 1.0).unwrap();
        assert_eq!(s.eval(0.1, 0.25), 1.0);
        let sx = BuiltinForcing::from_name("sin_xt", 2.0).unwrap();
        assert_eq!(sx.eval(0.5, 0.25), 2.0);
        assert!(BuiltinForcing::<f64>::from_name("nope", 1.0).is_err());
    }

    #[test]
    fn builtins_close_the_period_exactly() {
        let g = Grid::build(25, &gp(10.0)).unwrap();
        for name in BUILTIN_FORCING_NAMES {
            let f = BuiltinForcing::from_name(name, 0.7).unwrap();
            let worst = (0..=g.last_node())
                .map(|j| (f.eval(g.x(j), 0.0) - f.eval(g.x(j), 1.0)).abs())
                .fold(0.0, f64::max);
            assert_eq!(worst, 0.0, "{name}");
        }
    }

    #[test]
    fn cfl_safety_for_band_speeds() {
        for &m in &[0.4, 1.0, 10.0, 37.5] {
            let g = Grid::build(10, &gp(m)).unwrap();
            assert!(g.dt * 2.0 * m / g.dx < 1.0);
        }
    }
}
