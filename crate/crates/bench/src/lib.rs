//! Shared fixtures for the criterion benchmarks.

use nalgebra::{DMatrix, DVector};
use rombo_core::cms::{self, ReducedModel, ReductionMethod};
use rombo_core::contact::{ContactConfig, ContactPoint, Cone, GapMotion};
use rombo_core::model::{LoadSet, MeshSpec, SecondOrderModel};

/// Benchmark bar: uniform 1D bar under gravity with a unit-area section.
pub fn bar_model(n_elems: usize) -> SecondOrderModel {
    let mut model = MeshSpec::Bar1d {
        n_elems,
        length: 10.0,
        density: 1.0,
        youngs_modulus: 900.0,
    }
    .assemble()
    .expect("bar assembly");
    let grav = model.gravity_load(10.0, 0).expect("gravity");
    model.load = LoadSet::constant(grav);
    model
}

/// Massless Craig-Bampton reduction of the benchmark bar.
pub fn reduced_bar(n_elems: usize, n_mod: usize) -> ReducedModel {
    cms::reduce(
        &bar_model(n_elems),
        ReductionMethod::MasslessCraigBampton,
        n_mod,
        None,
    )
    .expect("reduction")
}

/// Single ground contact at the bar's lower end.
pub fn bar_contact() -> ContactConfig {
    ContactConfig::frictionless(vec![ContactPoint::open(0.0)], GapMotion::constant(vec![0.0]))
        .expect("contact config")
}

/// Well-conditioned random SPD system for the inclusion-solver benchmark.
pub fn random_inclusion(n: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>, Vec<Cone>) {
    // simple deterministic LCG so the benchmark needs no rng dependency
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
    let mut next = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    let a = DMatrix::from_fn(n, n, |_, _| next());
    let q = a.qr().q();
    let mut lam = DMatrix::zeros(n, n);
    for i in 0..n {
        lam[(i, i)] = 0.5 + 0.75 * (next() + 1.0);
    }
    let g = &q * lam * q.transpose();
    let c = DVector::from_fn(n, |_, _| 2.0 * next());
    let cones = vec![
        Cone {
            mu: 0.0,
            preload_n: 0.0
        };
        n
    ];
    (g, c, cones)
}
