use std::sync::Arc;

use stochetd::calculus::{directional_derivative, smooth_probes, DEFAULT_EPS, DEFAULT_TOL};
use stochetd::*;

type Mat = [[f64; 3]; 3];

fn apply(a: &Mat, u: &StateVector) -> StateVector {
    StateVector::new((0..3).map(|i| (0..3).map(|j| u[j] * a[i][j]).sum()).collect())
}

fn linear(a: Mat) -> impl Fn(&StateVector) -> Result<StateVector> {
    move |u| Ok(apply(&a, u))
}

const A: Mat = [[1.0, 2.0, 0.0], [0.0, -1.0, 3.0], [0.5, 0.0, 2.0]];
const B: Mat = [[0.0, 1.0, -1.0], [2.0, 0.0, 0.0], [1.0, 1.0, 1.0]];

fn probe() -> StateVector {
    StateVector::new(vec![C64::new(1.0, 0.5), C64::new(-2.0, 0.0), C64::new(0.25, -1.0)])
}

#[test]
fn linear_fields_give_the_commutator() {
    // [A·, B·](u) = B A u - A B u
    let u = probe();
    let got = lie_bracket(linear(A), linear(B), &u, 1e-3).unwrap();
    let want = apply(&B, &apply(&A, &u)).sub(&apply(&A, &apply(&B, &u)));
    assert!(got.max_abs_diff(&want) < 1e-12);
    let back = lie_bracket(linear(B), linear(A), &u, 1e-3).unwrap();
    let mut sum = got.clone();
    sum.axpy(1.0, &back);
    assert!(sum.norm() < 1e-12);
}

#[test]
fn nonlinear_bracket_matches_hand_computation() {
    // F(u) = u², G(u) = c (constant): [F, G] = DG·F - DF·G = -2 c u.
    let u = probe();
    let c = C64::new(0.3, -0.1);
    let f = |v: &StateVector| Ok(StateVector::new(v.iter().map(|z| z * z).collect()));
    let g = |v: &StateVector| Ok(StateVector::new(vec![c; v.len()]));
    let got = lie_bracket(f, g, &u, 1e-4).unwrap();
    let want = StateVector::new(u.iter().map(|z| -2.0 * c * z).collect());
    assert!(got.max_abs_diff(&want) < 1e-9);
}

#[test]
fn degenerate_directions() {
    let u = probe();
    let zero = StateVector::zeros(3);
    assert!(matches!(
        directional_derivative(linear(A), &u, &zero, 1e-5),
        Err(Error::DegenerateDirection(_))
    ));
    assert!(directional_derivative(linear(A), &u, &u, 0.0).is_err());
    let none = |v: &StateVector| Ok(StateVector::zeros(v.len()));
    assert_eq!(lie_bracket(none, linear(A), &u, 1e-5).unwrap().norm(), 0.0);
}

/// Transport noises `-(ξ u)_x` have `[G_i, G_j] u = ((ξ_i' ξ_j - ξ_i ξ_j') u)_x`.
#[test]
fn transport_noise_bracket_matches_closed_form() {
    let m = ModelConfig::kdv_unit(64, NoiseBasisSpec::SineDecay { m: 2 }).build().unwrap();
    let g = &m.grid;
    let xs = g.points();
    let ddx = |vals: &[f64]| -> Vec<f64> {
        let mut s = g.to_spectral(vals).unwrap();
        for (z, k) in s.as_mut_slice().iter_mut().zip(g.wavenumbers()) {
            *z *= C64::new(0.0, *k);
        }
        g.to_physical(&s)
    };
    let xi = NoiseBasisSpec::SineDecay { m: 2 }.tabulate(g);
    let (d0, d1) = (ddx(&xi[0]), ddx(&xi[1]));
    let u: Vec<f64> = xs.iter().map(|x| 1.0 + (2.0 * std::f64::consts::PI * x).cos()).collect();
    let h: Vec<f64> = (0..64).map(|k| (d0[k] * xi[1][k] - xi[0][k] * d1[k]) * u[k]).collect();
    let want = g.to_spectral(&ddx(&h)).unwrap();

    let us = g.to_spectral(&u).unwrap();
    let gi = |v: &StateVector| m.problem.diffusion(0, 0.0, v);
    let gj = |v: &StateVector| m.problem.diffusion(1, 0.0, v);
    let got = lie_bracket(gi, gj, &us, 1e-5 * us.norm()).unwrap();
    assert!(got.max_abs_diff(&want) < 1e-8 * want.norm(), "{} vs {}", got.norm(), want.norm());
}

#[test]
fn report_classifies_models() {
    let cases = [
        (ModelConfig::kdv_unit(64, NoiseBasisSpec::SineDecay { m: 3 }), Classification::NonCommutative),
        (ModelConfig::kdv_travelling_wave(128, 16.0, 1.0), Classification::DriftCommutative),
    ];
    for (cfg, want) in cases {
        let m = cfg.build().unwrap();
        let probes = smooth_probes(&m.u0, 2, 1);
        let r = commutativity_report(&m.problem, &probes, DEFAULT_EPS, DEFAULT_TOL).unwrap();
        assert_eq!(r.classification, want, "{r:?}");
        assert_eq!(r.probe_states, 3);
        let back: CommutativityReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}

#[test]
fn report_needs_probes_of_the_right_size() {
    let p = SdeProblem::new(3, Arc::new(|_t, u: &StateVector| apply(&A, u)))
        .unwrap()
        .with_diffusion(Arc::new(|_t, u: &StateVector| apply(&B, u)));
    assert!(matches!(commutativity_report(&p, &[], 1e-5, 1e-3), Err(Error::InsufficientData(_))));
    assert!(commutativity_report(&p, &[StateVector::zeros(4)], 1e-5, 1e-3).is_err());
    let r = commutativity_report(&p, &[probe()], 1e-5, 1e-3).unwrap();
    assert_eq!(r.classification, Classification::Commutative);
    assert!(r.drift_brackets[0] > 1e-2);
}
