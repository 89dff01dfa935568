//! The period map on shifted Riemann-invariant coordinates and a damped
//! Picard driver for its fixed points.
//!
//! A [`MapPoint`] stores `z - I` and `w - I` for every node `j = 0..=2N_x`.
//! Level 0 only lives on odd nodes; the even-node entries are carried along
//! (they hold the state of the cell to their right, shifted by `I` at the
//! cell edge) so that the vector has the full `4N_x + 2` length, but
//! decoding reads the odd entries only.

use serde::Serialize;

use crate::diagnostics::{band_check, mass_energy};
use crate::error::{Error, Result};
use crate::gas::{ConservedState, GasParams};
use crate::grid::{Forcing, Grid};
use crate::scalar::{as_f64, lit, Scalar};
use crate::scheme::{functional_i, Layer, PeriodTrace, Scheme, SchemeOptions};

pub const DECODE_MAX_SWEEPS: usize = 20;
pub const DECODE_TOL: f64 = 1e-12;
/// Window over which tenfold residual growth counts as divergence.
pub const DIVERGENCE_WINDOW: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapPoint<T> {
    /// z-block then w-block, ascending node index.
    pub coords: Vec<T>,
}

impl<T: Scalar> MapPoint<T> {
    pub fn n_nodes(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn z(&self, j: usize) -> T {
        self.coords[j]
    }

    pub fn w(&self, j: usize) -> T {
        self.coords[self.n_nodes() + j]
    }

    pub fn sup_distance(&self, other: &Self) -> T {
        self.coords
            .iter()
            .zip(&other.coords)
            .fold(T::zero(), |a, (&x, &y)| {
                let d = (x - y).abs();
                if d.is_nan() { d } else { a.max(d) }
            })
    }

    pub fn sup_norm(&self) -> T {
        self.coords.iter().fold(T::zero(), |a, &x| a.max(x.abs()))
    }

    /// `(1 - ω) self + ω other`.
    pub fn blend(&self, other: &Self, omega: T) -> Self {
        let keep = T::one() - omega;
        Self { coords: self.coords.iter().zip(&other.coords).map(|(&a, &b)| keep * a + omega * b).collect() }
    }
}

/// Shifted coordinates of a level-0 or level-`2N_t` layer.
pub fn encode<T: Scalar>(layer: &Layer<T>, gp: &GasParams<T>) -> Result<MapPoint<T>> {
    if layer.level % 2 != 0 {
        return Err(Error::ParityMismatch { level: layer.level });
    }
    let grid = &layer.grid;
    let nodes = grid.last_node() + 1;
    let i_vals = functional_i(grid, layer.level, &layer.values, gp);
    let mut coords = vec![T::zero(); 2 * nodes];
    let mut edge_i = T::zero();
    for (pos, (u, &i)) in layer.values.iter().zip(&i_vals).enumerate() {
        let p = gp.to_invariants(u);
        let j = layer.indices[pos];
        coords[j] = p.z - i;
        coords[nodes + j] = p.w - i;
        // dormant entry at the cell's left edge
        coords[j - 1] = p.z - edge_i;
        coords[nodes + j - 1] = p.w - edge_i;
        edge_i = edge_i + grid.weight(layer.level, j) * gp.zeta(u);
    }
    let last = grid.last_node();
    let u = layer.values.last().expect("nonempty layer");
    let p = gp.to_invariants(u);
    coords[last] = p.z - edge_i;
    coords[nodes + last] = p.w - edge_i;
    Ok(MapPoint { coords })
}

/// Node `j` solves `v = c + acc + Δx ζ(ρ, ρv)`, a quadratic in `v`; the root
/// continuous in `Δx → 0` is taken.
fn solve_velocity<T: Scalar>(c: T, acc: T, rho: T, dx: T, gp: &GasParams<T>) -> Option<T> {
    let g = gp.gamma;
    let a = dx * rho / lit(2.0);
    let b = c + acc + dx * (rho.powf(g) / (g * (g - T::one())) - gp.alpha_zeta * rho + gp.k);
    let disc = T::one() - lit::<T>(4.0) * a * b;
    if !(disc >= T::zero()) {
        return None;
    }
    Some(lit::<T>(2.0) * b / (T::one() + disc.sqrt()))
}

/// Level-0 layer whose shifted invariants are `p`, with `I` recomputed from
/// the decoded states.
pub fn decode<T: Scalar>(p: &MapPoint<T>, grid: &Grid<T>, gp: &GasParams<T>) -> Result<Layer<T>> {
    let nodes = grid.last_node() + 1;
    if p.coords.len() != 2 * nodes {
        return Err(Error::Domain(format!("map point has {} coordinates, grid needs {}", p.coords.len(), 2 * nodes)));
    }
    if let Some(k) = p.coords.iter().position(|c| !c.is_finite()) {
        return Err(Error::Domain(format!("map coordinate {k} is not finite")));
    }
    let set = grid.stagger(0)?;
    let th = gp.theta;
    let half = lit::<T>(0.5);
    let tol = lit::<T>(DECODE_TOL);
    let mut rho = Vec::with_capacity(set.len());
    let mut c = Vec::with_capacity(set.len());
    for &j in &set.indices {
        let gap = p.w(j) - p.z(j);
        if gap < -tol * (T::one() + p.w(j).abs()) {
            return Err(Error::Unphysical { node: j, gap: as_f64(gap) });
        }
        rho.push(if gap > T::zero() { (th * gap / lit(2.0)).powf(T::one() / th) } else { T::zero() });
        c.push((p.z(j) + p.w(j)) * half);
    }
    let build = |v: &[T]| -> Vec<ConservedState<T>> {
        rho.iter()
            .zip(v)
            .map(|(&r, &v)| if r > T::zero() { ConservedState { rho: r, m: r * v } } else { ConservedState::vacuum() })
            .collect()
    };

    // left-to-right Gauss–Seidel: I_j needs ζ of the nodes to the left and half of its own
    let mut v = vec![T::zero(); set.len()];
    let mut acc = T::zero();
    for k in 0..set.len() {
        v[k] = if rho[k] > T::zero() {
            solve_velocity(c[k], acc, rho[k], grid.dx, gp).ok_or_else(|| Error::DecodeDivergence {
                sweeps: 0,
                defect: f64::INFINITY,
            })?
        } else {
            c[k] + acc + grid.dx * gp.k
        };
        let u = if rho[k] > T::zero() { ConservedState { rho: rho[k], m: rho[k] * v[k] } } else { ConservedState::vacuum() };
        acc = acc + lit::<T>(2.0) * grid.dx * gp.zeta(&u);
    }
    let mut defect = T::infinity();
    for sweep in 1..=DECODE_MAX_SWEEPS {
        let i_vals = functional_i(grid, 0, &build(&v), gp);
        let next: Vec<T> = c.iter().zip(&i_vals).map(|(&c, &i)| c + i).collect();
        defect = next.iter().zip(&v).fold(T::zero(), |a, (&x, &y)| a.max((x - y).abs()));
        let scale = next.iter().fold(T::one(), |a, &x| a.max(x.abs()));
        if defect <= tol * scale {
            return Layer::from_values(*grid, 0, build(&v), T::zero(), gp);
        }
        log::debug!("decode sweep {sweep}: defect {:e}", as_f64(defect));
        v = next;
    }
    Err(Error::DecodeDivergence { sweeps: DECODE_MAX_SWEEPS, defect: as_f64(defect) })
}

/// Output of one evaluation of the period map.
#[derive(Debug, Clone)]
pub struct MapEvaluation<T> {
    pub image: MapPoint<T>,
    pub start: Layer<T>,
    pub end: Layer<T>,
    pub trace: PeriodTrace,
}

/// The period map `p ↦ encode(run_period(decode(p)))`.
pub struct PeriodMap<'a, T: Scalar> {
    pub scheme: Scheme<'a, T>,
    pub grid: Grid<T>,
}

impl<'a, T: Scalar> PeriodMap<'a, T> {
    pub fn new(gp: &'a GasParams<T>, forcing: &'a dyn Forcing<T>, opts: SchemeOptions<T>, grid: Grid<T>) -> Self {
        Self { scheme: Scheme::with_options(gp, forcing, opts), grid }
    }

    pub fn evaluate(&self, p: &MapPoint<T>) -> Result<MapEvaluation<T>> {
        let start = decode(p, &self.grid, self.scheme.gp)?;
        let (end, trace) = self.scheme.run_period(&start)?;
        let image = encode(&end, self.scheme.gp)?;
        Ok(MapEvaluation { image, start, end, trace })
    }

    pub fn apply(&self, p: &MapPoint<T>) -> Result<MapPoint<T>> {
        Ok(self.evaluate(p)?.image)
    }
}

/// `max_j |ρ⁰_j (v⁰_j + v^{2N_t}_j) Δx|`; below one the velocity recovered
/// from a shifted point is unique.
pub fn contraction_factor<T: Scalar>(start: &Layer<T>, end: &Layer<T>) -> T {
    start
        .values
        .iter()
        .zip(&end.values)
        .map(|(a, b)| (a.rho * (a.velocity() + b.velocity()) * start.grid.dx).abs())
        .fold(T::zero(), T::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub residual: f64,
    pub contraction_factor: f64,
    pub mass: f64,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct FixedPointReport<T> {
    pub iterations: usize,
    pub residual_history: Vec<T>,
    pub converged: bool,
    /// Stopped early because the residual grew tenfold within the window.
    pub diverged: bool,
    pub contraction_factor: T,
    /// The last point at which the map was evaluated.
    pub final_point: MapPoint<T>,
    pub trace: Vec<TraceRow>,
    /// Decoded level 0 and the evolved level `2N_t` at `final_point`.
    pub start: Layer<T>,
    pub end: Layer<T>,
    /// Band check of the final start layer passes.
    pub band_ok: bool,
    /// Mass of the final start layer within `10Δx` of `ρ̄`.
    pub mass_ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardSettings<T> {
    pub omega: T,
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for PicardSettings<T> {
    fn default() -> Self {
        Self { omega: lit(0.5), tol: lit(1e-8), max_iter: 500 }
    }
}

impl<T: Scalar> PicardSettings<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > T::zero() && self.omega <= T::one()) {
            return Err(Error::Config(format!("omega = {} outside (0, 1]", as_f64(self.omega))));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::Config(format!("tol = {} must be positive", as_f64(self.tol))));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Damped Picard iteration `p ← (1-ω)p + ωF(p)` until `‖F(p) - p‖∞ ≤ tol`.
pub fn fixed_point<T: Scalar>(
    map: &PeriodMap<'_, T>,
    initial: MapPoint<T>,
    settings: PicardSettings<T>,
) -> Result<FixedPointReport<T>> {
    settings.validate()?;
    let gp = map.scheme.gp;
    let mut p = initial;
    let mut history: Vec<T> = Vec::new();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut diverged = false;
    let mut last_eval = None;
    for it in 1..=settings.max_iter {
        let ev = map.evaluate(&p)?;
        let res = ev.image.sup_distance(&p);
        if !res.is_finite() {
            return Err(Error::Instability { level: 0, detail: format!("non-finite residual at iteration {it}") });
        }
        let cf = contraction_factor(&ev.start, &ev.end);
        let (mass, energy) = mass_energy(&ev.start, gp);
        trace.push(TraceRow {
            iteration: it,
            residual: as_f64(res),
            contraction_factor: as_f64(cf),
            mass: as_f64(mass),
            energy: as_f64(energy),
        });
        history.push(res);
        log::debug!("picard {it}: residual {:e}", as_f64(res));
        if res <= settings.tol {
            converged = true;
            last_eval = Some((ev, cf));
            break;
        }
        if it > DIVERGENCE_WINDOW && res > lit::<T>(10.0) * history[it - 1 - DIVERGENCE_WINDOW] {
            log::warn!("picard iteration diverging at {it}: residual {:e}", as_f64(res));
            diverged = true;
            last_eval = Some((ev, cf));
            break;
        }
        let next = p.blend(&ev.image, settings.omega);
        last_eval = Some((ev, cf));
        if it < settings.max_iter {
            p = next;
        }
    }
    let (ev, cf) = last_eval.expect("at least one iteration");
    let band_ok = band_check(&ev.start, T::zero(), gp).violations == 0;
    let (mass, _) = mass_energy(&ev.start, gp);
    let mass_ok = (mass - gp.rho_bar).abs() <= lit::<T>(10.0) * map.grid.dx;
    Ok(FixedPointReport {
        iterations: history.len(),
        residual_history: history,
        converged,
        diverged,
        contraction_factor: cf,
        final_point: p,
        trace,
        start: ev.start,
        end: ev.end,
        band_ok,
        mass_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BuiltinForcing;
    use crate::scheme::init_layer;

    fn setup(n_x: usize) -> (GasParams<f64>, Grid<f64>) {
        let gp = GasParams::new(1.4, 0.01, 10.0, 1.0, 1.0 / 0.56).unwrap();
        let grid = Grid::build(n_x, &gp).unwrap();
        (gp, grid)
    }

    #[test]
    fn encode_constant_state_closed_form() {
        let (gp, grid) = setup(4);
        let u = ConservedState { rho: 1.0, m: 0.0 };
        let layer = init_layer(|_| u, &grid, &gp).unwrap();
        let p = encode(&layer, &gp).unwrap();
        let zeta = gp.zeta(&u);
        let s = 1.0 / gp.theta;
        for j in 0..=grid.last_node() {
            let x = grid.x(j);
            assert!((p.z(j) - (-s - zeta * x)).abs() < 1e-13, "j = {j}");
            assert!((p.w(j) - (s - zeta * x)).abs() < 1e-13, "j = {j}");
        }
        assert_eq!(p.coords.len(), 4 * grid.n_x + 2);
    }

    #[test]
    fn encode_vacuum_and_parity() {
        let (gp, grid) = setup(3);
        let layer = Layer::from_values(grid, 0, vec![ConservedState::vacuum(); 3], 0.0, &gp).unwrap();
        let p = encode(&layer, &gp).unwrap();
        for j in 0..=grid.last_node() {
            assert!((p.z(j) + gp.k * grid.x(j)).abs() < 1e-14);
            assert_eq!(p.z(j), p.w(j));
        }
        let odd = Layer::from_values(grid, 1, vec![ConservedState::vacuum(); 4], 0.0, &gp).unwrap();
        assert!(matches!(encode(&odd, &gp), Err(Error::ParityMismatch { level: 1 })));
        let back = decode(&p, &grid, &gp).unwrap();
        assert!(back.values.iter().all(|u| u.is_vacuum()));
    }

    #[test]
    fn decode_inverts_encode() {
        let (gp, grid) = setup(6);
        let layer = init_layer(
            |x| ConservedState { rho: 0.5 + x * x, m: 0.4 * (3.0 * x).sin() },
            &grid,
            &gp,
        )
        .unwrap();
        let p = encode(&layer, &gp).unwrap();
        let back = decode(&p, &grid, &gp).unwrap();
        for (a, b) in layer.values.iter().zip(&back.values) {
            let (pa, pb) = (gp.to_invariants(a), gp.to_invariants(b));
            assert!((pa.z - pb.z).abs() < 1e-12 && (pa.w - pb.w).abs() < 1e-12);
        }
        let again = encode(&back, &gp).unwrap();
        assert!(again.sup_distance(&p) < 1e-10);
    }

    #[test]
    fn decode_rejects_crossed_invariants() {
        let (gp, grid) = setup(2);
        let mut p = MapPoint { coords: vec![0.0; 10] };
        p.coords[1] = 1.0; // z_1 > w_1
        assert!(matches!(decode(&p, &grid, &gp), Err(Error::Unphysical { node: 1, .. })));
        assert!(decode(&MapPoint { coords: vec![0.0; 7] }, &grid, &gp).is_err());
    }

    #[test]
    fn equilibrium_is_fixed_in_one_iteration() {
        let (gp, grid) = setup(5);
        let f = BuiltinForcing::Zero;
        let map = PeriodMap::new(&gp, &f, SchemeOptions::new(&gp), grid);
        let layer = init_layer(|_| ConservedState { rho: 1.0, m: 0.0 }, &grid, &gp).unwrap();
        let p = encode(&layer, &gp).unwrap();
        assert!(map.apply(&p).unwrap().sup_distance(&p) <= 1e-12);
        let rep = fixed_point(&map, p, PicardSettings::default()).unwrap();
        assert!(rep.converged && rep.band_ok && rep.mass_ok);
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.residual_history.len(), rep.iterations);
        assert!(rep.contraction_factor < 1e-12);
    }

    #[test]
    fn perturbed_start_contracts_without_forcing() {
        let (gp, grid) = setup(5);
        let f = BuiltinForcing::Zero;
        let map = PeriodMap::new(&gp, &f, SchemeOptions::new(&gp), grid);
        let layer = init_layer(
            |x| ConservedState { rho: 1.0 + 0.05 * (2.0 * std::f64::consts::PI * x).cos(), m: 0.0 },
            &grid,
            &gp,
        )
        .unwrap();
        let settings = PicardSettings { omega: 0.5, tol: 1e-9, max_iter: 200 };
        let rep = fixed_point(&map, encode(&layer, &gp).unwrap(), settings).unwrap();
        assert!(rep.converged, "{:?}", rep.residual_history.last());
        for w in rep.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-14);
        }
    }

    #[test]
    fn settings_guards() {
        for s in [
            PicardSettings { omega: 0.0, tol: 1e-8, max_iter: 5 },
            PicardSettings { omega: 1.5, tol: 1e-8, max_iter: 5 },
            PicardSettings { omega: 0.5, tol: 0.0, max_iter: 5 },
            PicardSettings { omega: 0.5, tol: 1e-8, max_iter: 0 },
        ] {
            assert!(s.validate().is_err());
        }
    }
}
