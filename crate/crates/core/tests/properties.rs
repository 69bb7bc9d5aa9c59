//! Property-based checks over the algebraic layers.

use nalgebra::DVector;
use proptest::prelude::*;
use std::f64::consts::PI;

use heatnet::disturbance::{DisturbanceKind, DisturbanceSpec};
use heatnet::field::{AgentField, Grid};
use heatnet::graph::{centering, laplacian, Topology};
use heatnet::protocols::{linear_control, sign_vec};

fn path_topology(n: usize) -> Topology {
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (i, i + 1)).collect();
    Topology::new(n, &edges).expect("paths are connected")
}

proptest! {
    #[test]
    fn laplacian_annihilates_constants(n in 2usize..12, c in -100.0..100.0f64) {
        let lap = laplacian(&path_topology(n));
        let x = DVector::from_element(n, c);
        prop_assert!(lap.apply(&x).amax() < 1e-9 * (1.0 + c.abs()));
    }

    #[test]
    fn laplacian_quadratic_form_nonnegative(
        n in 2usize..10,
        vals in proptest::collection::vec(-10.0..10.0f64, 10),
    ) {
        let lap = laplacian(&path_topology(n));
        let x = DVector::from_fn(n, |i, _| vals[i]);
        prop_assert!(x.dot(&lap.apply(&x)) >= -1e-9);
    }

    #[test]
    fn linear_control_preserves_total(
        n in 2usize..10,
        vals in proptest::collection::vec(-50.0..50.0f64, 10),
    ) {
        let lap = laplacian(&path_topology(n));
        let trace = DVector::from_fn(n, |i, _| vals[i]);
        let u = linear_control(&trace, &lap);
        prop_assert!(u.sum().abs() < 1e-9 * (1.0 + trace.amax()));
    }

    #[test]
    fn sign_vec_is_odd_and_bounded(
        vals in proptest::collection::vec(-5.0..5.0f64, 1..10),
        band in 0.0..0.5f64,
    ) {
        let x = DVector::from_vec(vals);
        let s = sign_vec(&x, band);
        let neg = sign_vec(&(-&x), band);
        prop_assert_eq!(&neg, &(-&s));
        prop_assert!(s.amax() <= 1.0);
    }

    #[test]
    fn centering_is_idempotent_projection(
        n in 2usize..12,
        vals in proptest::collection::vec(-10.0..10.0f64, 12),
    ) {
        let c = centering(n);
        let x = DVector::from_fn(n, |i, _| vals[i]);
        let once = c.entries() * &x;
        let twice = c.entries() * &once;
        prop_assert!((&once - &twice).amax() < 1e-10);
        prop_assert!(once.sum().abs() < 1e-9 * (1.0 + x.amax()));
    }

    #[test]
    fn ramp_sine_rate_never_exceeds_bound(
        k in proptest::collection::vec(0.0..2.0f64, 1..8),
        t in 0.0..10.0f64,
    ) {
        let spec = DisturbanceSpec::explicit(DisturbanceKind::RampSine, k, None).unwrap();
        let bound = spec.rate_bound().unwrap().spec_bound;
        let dt = 1e-6;
        let rate = (spec.eval(t + dt) - spec.eval(t)) / dt;
        prop_assert!(rate.amax() <= bound + 1e-3);
    }

    #[test]
    fn h_norms_scale_and_nest(
        amp in -3.0..3.0f64,
        freq in 0usize..5,
        scale in 0.1..4.0f64,
    ) {
        let grid = Grid::new(30).unwrap();
        let f = AgentField::sample_profile(grid, 2, move |i, s| {
            amp * (freq as f64 * PI * s).cos() + i as f64
        });
        let mut scaled = AgentField::zeros(2, grid);
        *scaled.values_mut() = f.values() * scale;
        for r in 0..=2 {
            let a = f.h_norm(r).unwrap();
            prop_assert!((scaled.h_norm(r).unwrap() - scale * a).abs() < 1e-9 * (1.0 + scale * a));
            if r > 0 {
                prop_assert!(a >= f.h_norm(r - 1).unwrap() - 1e-12);
            }
        }
    }
}
