use periodic_euler::diagnostics::{band_check, mass_energy, m_sequence};
use periodic_euler::gas::{ConservedState, GasParams};
use periodic_euler::grid::{BuiltinForcing, Grid};
use periodic_euler::period_map::{decode, encode, PeriodMap};
use periodic_euler::scheme::{functional_i, init_layer, Scheme, SchemeOptions};
use proptest::prelude::*;

const TAU: f64 = 2.0 * std::f64::consts::PI;

fn gp(big_m: f64) -> GasParams<f64> {
    GasParams::new(1.4, 0.01, big_m, 1.0, 1.0 / 0.56).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_does_not_grow_without_forcing(a in -0.6f64..0.6, mom in -0.3f64..0.3, k in 1u32..4) {
        let gp = gp(10.0);
        let grid = Grid::build(8, &gp).unwrap();
        let layer = init_layer(
            |x| ConservedState { rho: 1.0 + a * (TAU * k as f64 * x).cos(), m: mom * (std::f64::consts::PI * x).sin() },
            &grid,
            &gp,
        ).unwrap();
        let f = BuiltinForcing::Zero;
        let (_, trace) = Scheme::new(&gp, &f).run_period(&layer).unwrap();
        for w in trace.records.windows(2) {
            prop_assert!(w[1].energy <= w[0].energy + 1e-12, "level {}: {} -> {}", w[1].level, w[0].energy, w[1].energy);
        }
    }

    #[test]
    fn layers_stay_consistent_under_cutoff(a in 0.5f64..0.95, amp in 0.5f64..4.0) {
        let gp = gp(3.0);
        let grid = Grid::build(10, &gp).unwrap();
        let layer = init_layer(|x| ConservedState { rho: 1.0 + a * (TAU * x).sin(), m: 0.0 }, &grid, &gp).unwrap();
        let f = BuiltinForcing::GravityPulse(amp);
        let scheme = Scheme::new(&gp, &f);
        let mut l = layer;
        for n in 1..=grid.levels() {
            l = scheme.step(&l).unwrap().layer;
            prop_assert_eq!(l.level, n);
            prop_assert_eq!(&l.indices, &grid.stagger(n).unwrap().indices);
            prop_assert!(l.values.iter().all(|u| u.rho >= 0.0 && (u.rho > 0.0 || u.m == 0.0)));
            let fresh = functional_i(&grid, n, &l.values, &gp);
            for (x, y) in fresh.iter().zip(&l.i_vals) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
            prop_assert_eq!(band_check(&l, l.l_val, &gp).violations, 0);
        }
    }
}

#[test]
fn map_images_stay_in_the_band_box() {
    let gp = gp(10.0);
    let grid = Grid::build(10, &gp).unwrap();
    let f = BuiltinForcing::SinT(0.01);
    let map = PeriodMap::new(&gp, &f, SchemeOptions::new(&gp), grid);
    let layer = init_layer(|x| ConservedState { rho: 1.0 + 0.3 * (TAU * x).sin(), m: 0.0 }, &grid, &gp).unwrap();
    let mut p = encode(&layer, &gp).unwrap();
    for _ in 0..5 {
        let ev = map.evaluate(&p).unwrap();
        let sup_i = ev.end.i_vals.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let m_end = m_sequence(grid.levels(), &grid, &gp).unwrap();
        // odd-node entries carry the cut states exactly: |z - I|, |w - I| ≤ M_2Nt + L
        for &j in &ev.end.indices {
            for c in [ev.image.z(j), ev.image.w(j)] {
                assert!(c.abs() <= m_end + ev.end.l_val + 1e-12, "{c}");
            }
        }
        assert!(ev.image.sup_norm() <= gp.big_m + ev.end.l_val + sup_i);
        p = ev.image;
    }
}

#[test]
fn period_map_response_scales_with_forcing() {
    let gp = gp(10.0);
    let grid = Grid::build(10, &gp).unwrap();
    let layer = init_layer(|_| ConservedState { rho: 1.0, m: 0.0 }, &grid, &gp).unwrap();
    let p = encode(&layer, &gp).unwrap();
    let mut res = Vec::new();
    for amp in [1e-4, 2e-4, 4e-4] {
        let f = BuiltinForcing::SinXT(amp);
        let map = PeriodMap::new(&gp, &f, SchemeOptions::new(&gp), grid);
        res.push(map.apply(&p).unwrap().sup_distance(&p));
    }
    // linear response: doubling the force doubles the residual
    for w in res.windows(2) {
        let r = w[1] / w[0];
        assert!((r - 2.0).abs() < 0.05, "{res:?}");
    }
}

#[test]
fn decode_of_an_evolved_point_round_trips() {
    let gp = gp(10.0);
    let grid = Grid::build(12, &gp).unwrap();
    let f = BuiltinForcing::SinT(0.005);
    let layer = init_layer(|x| ConservedState { rho: 1.0 + 0.2 * (TAU * x).cos(), m: 0.1 * x * (1.0 - x) }, &grid, &gp)
        .unwrap();
    let (end, _) = Scheme::new(&gp, &f).run_period(&layer).unwrap();
    let p = encode(&end, &gp).unwrap();
    let back = decode(&p, &grid, &gp).unwrap();
    for (a, b) in end.values.iter().zip(&back.values) {
        assert!((a.rho - b.rho).abs() < 1e-12 && (a.m - b.m).abs() < 1e-12);
    }
}

#[test]
fn single_precision_period() {
    let gp = GasParams::<f32>::new(1.4, 0.01, 10.0, 1.0, 1.0 / 0.56).unwrap();
    let grid = Grid::build(6, &gp).unwrap();
    let f = BuiltinForcing::SinT(0.001f32);
    let layer = init_layer(|x: f32| ConservedState { rho: 1.0 + 0.1 * (6.0 * x).sin(), m: 0.0 }, &grid, &gp).unwrap();
    let (m0, _) = mass_energy(&layer, &gp);
    let (end, trace) = Scheme::new(&gp, &f).run_period(&layer).unwrap();
    let (m1, _) = mass_energy(&end, &gp);
    assert_eq!(trace.records.len(), grid.levels() + 1);
    assert!((m1 - m0).abs() / m0 < 1e-5);
    let p = encode(&end, &gp).unwrap();
    assert!(p.coords.iter().all(|c| c.is_finite()));
}
