//! The staggered Lax–Friedrichs recurrence with source corrections, the
//! ζ-integral functional `I`, and the invariant-region cutoff.
//!
//! One step maps the states on `J_n` to averages on `J_{n+1}`:
//!
//! ```text
//! ρ'_j = (ρ_{j+1}+ρ_{j-1})/2 - Δt/(2Δx)(m_{j+1}-m_{j-1}) - R_{j+1} + R_{j-1}
//! m'_j = (m_{j+1}+m_{j-1})/2 - Δt/(2Δx)(Φ_{j+1}-Φ_{j-1}) - S_{j+1} + S_{j-1}
//!        - Δt (ρ_{j+1}+ρ_{j-1})/2 F(x_j, t_n)
//! ```
//!
//! with `Φ = m²/ρ + p(ρ)`. The walls `x = 0, 1` are reflecting: a missing
//! neighbour is the mirror image of the present one (momentum and `R`
//! negated), the wall nodes carry no mass correction `R`, and `m = 0` is
//! imposed on wall nodes after the update. This keeps total mass exactly
//! conserved when no cutoff acts.

use serde::Serialize;

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::gas::{ConservedState, GasParams, RiemannPair};
use crate::grid::{Forcing, Grid, StaggerSet};
use crate::scalar::{as_f64, from_usize, lit, Scalar};

/// Subsamples per cell used when averaging initial data.
pub const INIT_SUBSAMPLES: usize = 64;

const CUTOFF_MAX_SWEEPS: usize = 50;
const CUTOFF_I_TOL: f64 = 1e-13;
const CUTOFF_NUDGES: usize = 8;

/// Switches controlling the stepper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeOptions<T> {
    /// Apply the band cutoff and vacuum floor. Disabling it is a diagnostic mode.
    pub cutoff: bool,
    /// Use `L = 0` in the cutoff band instead of the running entropy production.
    pub freeze_l: bool,
    /// Vacuum-floor exponent: densities below `Δx^δ` become vacuum.
    pub delta: T,
}

impl<T: Scalar> SchemeOptions<T> {
    pub fn new(gp: &GasParams<T>) -> Self {
        Self { cutoff: true, freeze_l: false, delta: gp.default_delta() }
    }
}

/// One staggered time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub grid: Grid<T>,
    pub level: usize,
    /// `J_n`, ascending.
    pub indices: Vec<usize>,
    pub values: Vec<ConservedState<T>>,
    /// `I_j = ∫₀^{x_j} ζ`, the integral the band is built from.
    pub i_vals: Vec<T>,
    /// Band edges in force at this level.
    pub lo: Vec<T>,
    pub hi: Vec<T>,
    /// Entropy production accumulated since level 0.
    pub l_val: T,
}

impl<T: Scalar> Layer<T> {
    /// Builds a layer from node values, deriving `I` and the band at `M_n` with
    /// the given accumulated `L`.
    pub fn from_values(
        grid: Grid<T>,
        level: usize,
        values: Vec<ConservedState<T>>,
        l_val: T,
        gp: &GasParams<T>,
    ) -> Result<Self> {
        let indices = grid.stagger(level)?.indices;
        if values.len() != indices.len() {
            return Err(Error::Domain(format!(
                "level {level} needs {} values, got {}",
                indices.len(),
                values.len()
            )));
        }
        let i_vals = functional_i(&grid, level, &values, gp);
        let m_n = diagnostics::m_sequence(level, &grid, gp)?;
        let (lo, hi) = i_vals.iter().map(|&i| band_bounds(m_n, l_val, i)).unzip();
        Ok(Self { grid, level, indices, values, i_vals, lo, hi, l_val })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Position of node `j` in `values`, if `j ∈ J_n`.
    pub fn position(&self, j: usize) -> Option<usize> {
        let pos = j / 2;
        (self.indices.get(pos) == Some(&j)).then_some(pos)
    }

    pub fn get(&self, j: usize) -> Option<&ConservedState<T>> {
        self.position(j).map(|p| &self.values[p])
    }

    pub fn x(&self, pos: usize) -> T {
        self.grid.x(self.indices[pos])
    }
}

/// `(lo, hi) = (-M_n - L + I, M_n + L + I)`.
#[inline]
pub fn band_bounds<T: Scalar>(m_n: T, l: T, i: T) -> (T, T) {
    (-m_n - l + i, m_n + l + i)
}

/// Averages initial data over the level-0 cells `[x_{j-1}, x_{j+1})` by the
/// composite midpoint rule.
pub fn init_layer<T, F>(u0: F, grid: &Grid<T>, gp: &GasParams<T>) -> Result<Layer<T>>
where
    T: Scalar,
    F: Fn(T) -> ConservedState<T>,
{
    let set = grid.stagger(0)?;
    let h = lit::<T>(2.0) * grid.dx / from_usize(INIT_SUBSAMPLES);
    let half = lit::<T>(0.5);
    let mut values = Vec::with_capacity(set.len());
    for &j in &set.indices {
        let left = grid.x(j - 1);
        let (mut rho, mut m) = (T::zero(), T::zero());
        for s in 0..INIT_SUBSAMPLES {
            let u = u0(left + (from_usize::<T>(s) + half) * h);
            if !(u.rho >= T::zero()) {
                return Err(Error::Domain(format!(
                    "initial density {} is negative near x = {}",
                    as_f64(u.rho),
                    as_f64(left)
                )));
            }
            rho = rho + u.rho;
            m = m + u.m;
        }
        let n = from_usize::<T>(INIT_SUBSAMPLES);
        let (rho, m) = (rho / n, m / n);
        values.push(if rho == T::zero() { ConservedState::vacuum() } else { ConservedState { rho, m } });
    }
    let layer = Layer::from_values(*grid, 0, values, T::zero(), gp)?;
    let report = diagnostics::band_check(&layer, T::zero(), gp);
    if report.violations > 0 {
        log::warn!(
            "initial data leave the invariant band at {} node(s) (min margin {:e}); increase M",
            report.violations,
            as_f64(report.min_margin)
        );
    }
    Ok(layer)
}

/// `I_j = ∫₀^{x_j} ζ(E(x)) dx` for the piecewise-constant field of a level.
///
/// Each node's cell reaches `Δx` to either side of `x_j`, clipped to `[0,1]`.
pub fn functional_i<T: Scalar>(
    grid: &Grid<T>,
    level: usize,
    values: &[ConservedState<T>],
    gp: &GasParams<T>,
) -> Vec<T> {
    let set = StaggerSet::new(level, grid.n_x);
    let mut acc = T::zero();
    set.indices
        .iter()
        .zip(values)
        .map(|(&j, u)| {
            let z = gp.zeta(u);
            let i = acc + grid.left_half_width(j) * z;
            acc = acc + grid.weight(level, j) * z;
            i
        })
        .collect()
}

/// Projects an averaged state into the band `lo ≤ z`, `w ≤ hi`; densities
/// below `vac_thresh` become vacuum. A state lying wholly outside the band
/// also collapses to vacuum.
pub fn cutoff<T: Scalar>(
    e: &ConservedState<T>,
    lo: T,
    hi: T,
    vac_thresh: T,
    gp: &GasParams<T>,
) -> Result<ConservedState<T>> {
    if lo > hi {
        return Err(Error::BandCollapse { node: usize::MAX, lo: as_f64(lo), hi: as_f64(hi) });
    }
    if !(e.rho >= vac_thresh) || e.is_vacuum() {
        return Ok(ConservedState::vacuum());
    }
    let p = gp.to_invariants(e);
    let z = p.z.max(lo);
    let w = p.w.min(hi);
    if z == p.z && w == p.w {
        return Ok(*e);
    }
    if w <= z {
        return Ok(ConservedState::vacuum());
    }
    // Converting back to (z, w) rounds; step the targets inward until the
    // recomputed invariants sit in the closed band.
    let (mut zt, mut wt) = (z, w);
    for _ in 0..CUTOFF_NUDGES {
        let u = gp.from_invariants(&RiemannPair { z: zt, w: wt })?;
        let q = gp.to_invariants(&u);
        let (under, over) = (lo - q.z, q.w - hi);
        if under <= T::zero() && over <= T::zero() {
            return Ok(u);
        }
        let ulp = T::epsilon() * zt.abs().max(wt.abs()).max(T::one());
        if under > T::zero() {
            zt = zt + under.max(ulp);
        }
        if over > T::zero() {
            wt = wt - over.max(ulp);
        }
        if wt <= zt {
            return Ok(ConservedState::vacuum());
        }
    }
    Err(Error::BandCollapse { node: usize::MAX, lo: as_f64(lo), hi: as_f64(hi) })
}

/// Per-node correction terms of the recurrence, aligned with the layer's nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceTerms<T> {
    pub r: Vec<T>,
    pub s: Vec<T>,
    pub g: Vec<T>,
    pub h: Vec<T>,
    /// `ξ_k` pairs node `k` with `k + 2`; zero on vacuum nodes and on the last node.
    pub xi: Vec<T>,
    /// `Σ_{k+2 ≤ j} F(x_{k+1}, t_n) ξ_k`, the discrete force moment.
    pub moment: Vec<T>,
}

pub fn source_terms<T: Scalar>(layer: &Layer<T>, forcing: &dyn Forcing<T>, gp: &GasParams<T>) -> SourceTerms<T> {
    let grid = &layer.grid;
    let (dx, dt) = (grid.dx, grid.dt);
    let t = grid.t(layer.level);
    let n = layer.len();
    let two = lit::<T>(2.0);
    let c = dt * dt / (lit::<T>(8.0) * dx);

    let phi: Vec<T> = layer.values.iter().map(|u| gp.flux(u).1).collect();
    let mut xi = vec![T::zero(); n];
    for k in 0..n.saturating_sub(1) {
        let (a, b) = (&layer.values[k], &layer.values[k + 1]);
        if a.is_vacuum() {
            continue;
        }
        xi[k] = (b.m + a.m) * dx - two * dt / lit(3.0) * (phi[k + 1] - phi[k]);
    }
    let mut moment = vec![T::zero(); n];
    for k in 1..n {
        let mid = grid.x(layer.indices[k - 1] + 1);
        moment[k] = moment[k - 1] + forcing.eval(mid, t) * xi[k - 1];
    }

    let mut out = SourceTerms {
        r: vec![T::zero(); n],
        s: vec![T::zero(); n],
        g: vec![T::zero(); n],
        h: vec![T::zero(); n],
        xi,
        moment,
    };
    for (k, u) in layer.values.iter().enumerate() {
        if u.is_vacuum() {
            continue;
        }
        let f_val = forcing.eval(layer.x(k), t);
        let (g, h) = gp.g_source(u, f_val, out.moment[k]);
        let rho = u.rho;
        let v = u.velocity();
        let rho_th = rho.powf(gp.theta);
        out.g[k] = g;
        out.h[k] = h;
        out.r[k] = c * (rho * (h + g) + u.m / rho_th * (h - g));
        out.s[k] = dx / lit(4.0) * rho * gp.zeta(u)
            + c * (two * rho * (h + g + two * gp.v_flux(u))
                + (rho * v * v + rho.powf(gp.gamma)) / rho_th * (h - g)
                - two * u.m);
    }
    out
}

/// Result of one step, including the pre-cutoff averages.
#[derive(Debug, Clone)]
pub struct StepOutcome<T> {
    pub layer: Layer<T>,
    pub pre_cutoff: Vec<ConservedState<T>>,
    pub l_increment: T,
    /// Nodes whose `z` or `w` was clamped.
    pub cut_nodes: usize,
    /// Nodes floored to vacuum.
    pub vacuum_nodes: usize,
    /// `max |λ| Δt/Δx` on the input level.
    pub cfl: T,
}

/// Per-level record of a period run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PeriodTrace {
    pub records: Vec<DiagnosticsRecord>,
}

/// The time stepper bound to a gas, a force and options.
pub struct Scheme<'a, T: Scalar> {
    pub gp: &'a GasParams<T>,
    pub forcing: &'a dyn Forcing<T>,
    pub opts: SchemeOptions<T>,
}

struct Neighbor<T> {
    u: ConservedState<T>,
    phi: T,
    r: T,
    s: T,
}

impl<'a, T: Scalar> Scheme<'a, T> {
    pub fn new(gp: &'a GasParams<T>, forcing: &'a dyn Forcing<T>) -> Self {
        Self { gp, forcing, opts: SchemeOptions::new(gp) }
    }

    pub fn with_options(gp: &'a GasParams<T>, forcing: &'a dyn Forcing<T>, opts: SchemeOptions<T>) -> Self {
        Self { gp, forcing, opts }
    }

    pub fn cfl_number(&self, layer: &Layer<T>) -> T {
        let speed = layer
            .values
            .iter()
            .map(|u| {
                let (a, b) = self.gp.eigenvalues(u);
                a.abs().max(b.abs())
            })
            .fold(T::zero(), |acc, s| if s.is_nan() { s } else { acc.max(s) });
        speed * layer.grid.dt / layer.grid.dx
    }

    /// Advances one level.
    pub fn step(&self, layer: &Layer<T>) -> Result<StepOutcome<T>> {
        let gp = self.gp;
        let grid = layer.grid;
        let n = layer.level;
        if n >= grid.levels() {
            return Err(Error::LevelOutOfRange { level: n + 1, max: grid.levels() });
        }
        let cfl = self.cfl_number(layer);
        if !(cfl < T::one()) {
            return Err(Error::Instability {
                level: n,
                detail: format!(
                    "CFL number max|λ|·Δt/Δx = {:.6} ≥ 1 (Δx/Δt = {}); increase M or reduce the forcing",
                    as_f64(cfl),
                    as_f64(grid.ratio)
                ),
            });
        }

        let src = source_terms(layer, self.forcing, gp);
        let last = grid.last_node();
        let neighbor = |k: usize| -> Neighbor<T> {
            let p = layer.position(k).expect("neighbour on previous level");
            let u = layer.values[p];
            let wall = k == 0 || k == last;
            Neighbor { u, phi: gp.flux(&u).1, r: if wall { T::zero() } else { src.r[p] }, s: src.s[p] }
        };
        let mirror = |nb: Neighbor<T>| Neighbor {
            u: ConservedState { rho: nb.u.rho, m: -nb.u.m },
            phi: nb.phi,
            r: -nb.r,
            s: nb.s,
        };

        let next = grid.stagger(n + 1)?;
        let t = grid.t(n);
        let half = lit::<T>(0.5);
        let lam = grid.dt / (lit::<T>(2.0) * grid.dx);
        let mut pre = Vec::with_capacity(next.len());
        for &j in &next.indices {
            let (l, r) = if j == 0 {
                let r = neighbor(1);
                (mirror(neighbor(1)), r)
            } else if j == last {
                let l = neighbor(last - 1);
                (l, mirror(neighbor(last - 1)))
            } else {
                (neighbor(j - 1), neighbor(j + 1))
            };
            let rho_avg = (r.u.rho + l.u.rho) * half;
            let rho = rho_avg - lam * (r.u.m - l.u.m) - r.r + l.r;
            let mut m = (r.u.m + l.u.m) * half - lam * (r.phi - l.phi) - r.s + l.s
                - grid.dt * rho_avg * self.forcing.eval(grid.x(j), t);
            if j == 0 || j == last {
                m = T::zero();
            }
            if !rho.is_finite() || !m.is_finite() {
                return Err(Error::Instability {
                    level: n + 1,
                    detail: format!("non-finite state at node {j} (CFL number {:.6})", as_f64(cfl)),
                });
            }
            pre.push(ConservedState { rho, m });
        }

        let l_increment = diagnostics::entropy_production(layer, &pre, gp);
        let l_val = layer.l_val + l_increment;
        let l_band = if self.opts.freeze_l { T::zero() } else { l_val };
        let m_next = diagnostics::m_sequence(n + 1, &grid, gp)?;

        if !self.opts.cutoff {
            if let Some((k, u)) = pre.iter().enumerate().find(|(_, u)| !(u.rho >= T::zero())) {
                return Err(Error::Instability {
                    level: n + 1,
                    detail: format!(
                        "negative density {:e} at node {} without cutoff (CFL number {:.6})",
                        as_f64(u.rho),
                        next.indices[k],
                        as_f64(cfl)
                    ),
                });
            }
            let values: Vec<_> = pre
                .iter()
                .map(|u| if u.rho == T::zero() { ConservedState::vacuum() } else { *u })
                .collect();
            let i_vals = functional_i(&grid, n + 1, &values, gp);
            let (lo, hi) = i_vals.iter().map(|&i| band_bounds(m_next, l_band, i)).unzip();
            let layer = Layer { grid, level: n + 1, indices: next.indices, values, i_vals, lo, hi, l_val };
            return Ok(StepOutcome { layer, pre_cutoff: pre, l_increment, cut_nodes: 0, vacuum_nodes: 0, cfl });
        }

        let thresh = grid.dx.powf(self.opts.delta);
        let floored: Vec<_> = pre
            .iter()
            .map(|u| if u.rho >= thresh { *u } else { ConservedState::vacuum() })
            .collect();
        let vacuum_nodes = floored.iter().zip(&pre).filter(|(f, p)| f.is_vacuum() && !p.is_vacuum()).count();

        // I depends on the cut states; iterate the cut until I settles
        let mut i_used = functional_i(&grid, n + 1, &floored, gp);
        let mut values = floored;
        for sweep in 0..CUTOFF_MAX_SWEEPS {
            let mut cut = Vec::with_capacity(pre.len());
            for (k, (e, &i)) in pre.iter().zip(&i_used).enumerate() {
                let (lo, hi) = band_bounds(m_next, l_band, i);
                let u = cutoff(e, lo, hi, thresh, gp).map_err(|err| match err {
                    Error::BandCollapse { lo, hi, .. } => Error::BandCollapse { node: next.indices[k], lo, hi },
                    other => other,
                })?;
                cut.push(u);
            }
            let i_new = functional_i(&grid, n + 1, &cut, gp);
            let scale = i_used.iter().fold(T::one(), |a, &i| a.max(i.abs()));
            let diff = i_new.iter().zip(&i_used).fold(T::zero(), |a, (&x, &y)| a.max((x - y).abs()));
            values = cut;
            if diff <= lit::<T>(CUTOFF_I_TOL) * scale {
                break;
            }
            if sweep + 1 == CUTOFF_MAX_SWEEPS {
                log::warn!("level {}: cutoff/I iteration stopped with defect {:e}", n + 1, as_f64(diff));
            } else {
                i_used = i_new;
            }
        }
        let cut_nodes = values
            .iter()
            .zip(&pre)
            .filter(|(v, p)| !v.is_vacuum() && *v != *p)
            .count();
        let (lo, hi) = i_used.iter().map(|&i| band_bounds(m_next, l_band, i)).unzip();
        let layer = Layer { grid, level: n + 1, indices: next.indices, values, i_vals: i_used, lo, hi, l_val };
        Ok(StepOutcome { layer, pre_cutoff: pre, l_increment, cut_nodes, vacuum_nodes, cfl })
    }

    /// Applies `2N_t` steps from level 0, recording diagnostics per level.
    pub fn run_period(&self, layer0: &Layer<T>) -> Result<(Layer<T>, PeriodTrace)> {
        let grid = layer0.grid;
        if grid.levels() == 0 {
            return Err(Error::Config("grid has no time steps in a period".into()));
        }
        if layer0.level != 0 {
            return Err(Error::LevelOutOfRange { level: layer0.level, max: 0 });
        }
        let mut trace = PeriodTrace { records: Vec::with_capacity(grid.levels() + 1) };
        trace.records.push(diagnostics::record(layer0, T::zero(), 0, self.cfl_number(layer0), self.band_l(layer0), self.gp)?);
        let mut layer = layer0.clone();
        for _ in 0..grid.levels() {
            let out = self.step(&layer)?;
            layer = out.layer;
            trace.records.push(diagnostics::record(
                &layer,
                out.l_increment,
                out.cut_nodes,
                out.cfl,
                self.band_l(&layer),
                self.gp,
            )?);
        }
        Ok((layer, trace))
    }

    /// The `L` entering the band at this layer.
    pub fn band_l(&self, layer: &Layer<T>) -> T {
        if self.opts.freeze_l {
            T::zero()
        } else {
            layer.l_val
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BuiltinForcing;

    fn setup(n_x: usize, m: f64) -> (GasParams<f64>, Grid<f64>) {
        let gp = GasParams::new(1.4, 0.01, m, 1.0, 1.0 / 0.56).unwrap();
        let grid = Grid::build(n_x, &gp).unwrap();
        (gp, grid)
    }

    fn st(rho: f64, m: f64) -> ConservedState<f64> {
        ConservedState::new(rho, m).unwrap()
    }

    #[test]
    fn init_constant_and_linear() {
        let (gp, grid) = setup(2, 10.0);
        let l = init_layer(|_| st(1.0, 0.0), &grid, &gp).unwrap();
        assert_eq!(l.indices, vec![1, 3]);
        assert!(l.values.iter().all(|u| *u == st(1.0, 0.0)));
        let l = init_layer(|x| st(x, 0.0), &grid, &gp).unwrap();
        assert!((l.values[0].rho - 0.25).abs() < 1e-15);
        assert!((l.values[1].rho - 0.75).abs() < 1e-15);
        assert!(init_layer(|_| ConservedState { rho: -1.0, m: 0.0 }, &grid, &gp).is_err());
    }

    #[test]
    fn init_matches_closed_form_cell_integrals() {
        let (gp, grid) = setup(25, 10.0);
        let l = init_layer(|x| st(1.0 + 0.1 * (2.0 * std::f64::consts::PI * x).sin(), 0.0), &grid, &gp).unwrap();
        // 40-digit closed-form averages for j = 1, 13, 49
        for (j, want) in [(1, 1.012_500_363_006_749_9), (13, 1.099_540_210_054_434_9), (49, 0.987_499_636_993_250_1)] {
            let got = l.get(j).unwrap().rho;
            assert!((got - want).abs() < 1e-6, "j = {j}: {got} vs {want}");
        }
    }

    #[test]
    fn functional_i_cases() {
        let (gp, grid) = setup(2, 10.0);
        let vac = vec![ConservedState::vacuum(); 3];
        let i = functional_i(&grid, 1, &vac, &gp);
        for (k, j) in [0usize, 2, 4].iter().enumerate() {
            assert!((i[k] - gp.k * grid.x(*j)).abs() < 1e-15);
        }
        let u = st(0.8, 0.3);
        let i = functional_i(&grid, 0, &[u, u], &gp);
        assert!((i[0] - gp.zeta(&u) * 0.25).abs() < 1e-15);
        assert!((i[1] - gp.zeta(&u) * 0.75).abs() < 1e-15);

        // two-value layer at an odd level: cells [0,.25), [.25,.75), [.75,1]
        let (a, b, c) = (st(1.0, 0.0), st(2.0, 1.0), st(0.5, -0.2));
        let i = functional_i(&grid, 1, &[a, b, c], &gp);
        let (za, zb, zc) = (gp.zeta(&a), gp.zeta(&b), gp.zeta(&c));
        assert_eq!(i[0], 0.0);
        assert!((i[1] - (0.25 * za + 0.25 * zb)).abs() < 1e-14);
        assert!((i[2] - (0.25 * za + 0.5 * zb + 0.25 * zc)).abs() < 1e-14);
    }

    #[test]
    fn cutoff_semantics() {
        let (gp, _) = setup(2, 10.0);
        let e = st(1.0, 0.1);
        let p = gp.to_invariants(&e);
        assert_eq!(cutoff(&e, p.z - 1.0, p.w + 1.0, 1e-3, &gp).unwrap(), e);
        assert_eq!(cutoff(&st(0.5e-3, 0.0), -100.0, 100.0, 1e-3, &gp).unwrap(), ConservedState::vacuum());
        let c = cutoff(&e, p.z + 1.0, p.w + 1.0, 1e-3, &gp).unwrap();
        let q = gp.to_invariants(&c);
        assert!((q.z - (p.z + 1.0)).abs() < 1e-12);
        assert!((q.w - p.w).abs() < 1e-12);
        assert!(matches!(cutoff(&e, 1.0, 0.0, 1e-3, &gp), Err(Error::BandCollapse { .. })));
    }

    proptest::proptest! {
        #[test]
        fn cutoff_lands_in_closed_band(rho in 1e-3f64..50.0, v in -20.0f64..20.0, c in -30.0f64..30.0, half in 0.01f64..30.0) {
            let (gp, _) = setup(2, 10.0);
            let (lo, hi) = (c - half, c + half);
            let u = cutoff(&st(rho, rho * v), lo, hi, 1e-4, &gp).unwrap();
            if !u.is_vacuum() {
                let q = gp.to_invariants(&u);
                proptest::prop_assert!(lo <= q.z && q.w <= hi, "{lo} {} {} {hi}", q.z, q.w);
            }
        }
    }

    #[test]
    fn source_terms_vanish_on_vacuum() {
        let (gp, grid) = setup(3, 10.0);
        let layer = Layer::from_values(grid, 0, vec![ConservedState::vacuum(); 3], 0.0, &gp).unwrap();
        let f = BuiltinForcing::SinT(1.0);
        let s = source_terms(&layer, &f, &gp);
        for v in [&s.r, &s.s, &s.g, &s.h, &s.xi] {
            assert!(v.iter().all(|x| *x == 0.0));
        }
    }

    #[test]
    fn equilibrium_is_preserved() {
        let (gp, grid) = setup(5, 10.0);
        let layer = init_layer(|_| st(1.0, 0.0), &grid, &gp).unwrap();
        let f = BuiltinForcing::Zero;
        let scheme = Scheme::new(&gp, &f);
        let mut l = layer.clone();
        for _ in 0..4 {
            l = scheme.step(&l).unwrap().layer;
            for u in &l.values {
                assert!((u.rho - 1.0).abs() <= 1e-14 && u.m.abs() <= 1e-14, "{u:?}");
            }
        }
    }

    #[test]
    fn vacuum_layer_stays_vacuum() {
        let (gp, grid) = setup(4, 10.0);
        let layer = Layer::from_values(grid, 0, vec![ConservedState::vacuum(); 4], 0.0, &gp).unwrap();
        let f = BuiltinForcing::SinT(0.3);
        let out = Scheme::new(&gp, &f).step(&layer).unwrap();
        assert_eq!(out.layer.indices, vec![0, 2, 4, 6, 8]);
        assert!(out.layer.values.iter().all(|u| u.is_vacuum()));
    }

    #[test]
    fn no_cutoff_conserves_mass_with_forcing() {
        let (gp, grid) = setup(6, 10.0);
        let layer = init_layer(|x| st(1.0 + 0.3 * x, 0.1 * x * (1.0 - x)), &grid, &gp).unwrap();
        let f = BuiltinForcing::SinXT(0.5);
        let mut opts = SchemeOptions::new(&gp);
        opts.cutoff = false;
        let scheme = Scheme::with_options(&gp, &f, opts);
        let (m0, _) = diagnostics::mass_energy(&layer, &gp);
        let mut l = layer;
        for _ in 0..40 {
            l = scheme.step(&l).unwrap().layer;
            let (m, _) = diagnostics::mass_energy(&l, &gp);
            assert!((m - m0).abs() <= 1e-13 * m0, "{m} vs {m0}");
            for w in [0, grid.last_node()] {
                if let Some(u) = l.get(w) {
                    assert_eq!(u.m, 0.0);
                }
            }
        }
    }

    #[test]
    fn step_rejects_last_level_and_bad_period_start() {
        let (gp, grid) = setup(2, 0.4);
        let f = BuiltinForcing::Zero;
        let scheme = Scheme::new(&gp, &f);
        let layer = init_layer(|_| st(1e-3, 0.0), &grid, &gp).unwrap();
        let mut l = layer.clone();
        for _ in 0..grid.levels() {
            l = scheme.step(&l).unwrap().layer;
        }
        assert!(matches!(scheme.step(&l), Err(Error::LevelOutOfRange { .. })));
        assert!(scheme.run_period(&l).is_err());
    }

    #[test]
    fn cfl_violation_aborts() {
        let (gp, grid) = setup(4, 0.4);
        let layer = init_layer(|_| st(1.0, 5.0), &grid, &gp).unwrap();
        let f = BuiltinForcing::Zero;
        let err = Scheme::new(&gp, &f).step(&layer).unwrap_err();
        assert!(matches!(err, Error::Instability { .. }));
        assert!(err.to_string().contains("CFL"));
    }
}
