use stochetd::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn scalar_linear(lambda: C64) -> SdeProblem {
    SdeProblem::new(1, field(move |_, u| StateVector::new(vec![u[0] * lambda]))).unwrap()
}

/// A small nonlinear split system with two multiplicative noise channels.
fn split_problem(linear: Vec<C64>) -> SdeProblem {
    SdeProblem::new(
        3,
        field(|t, u| {
            StateVector::new(vec![
                -u[1] * u[2] + t,
                u[0] * u[0] * 0.3 - u[2],
                (u[0] * u[1]).sin(),
            ])
        }),
    )
    .unwrap()
    .with_linear_part(linear)
    .unwrap()
    .with_diffusion(field(|_, u| StateVector::new(vec![u[1] * 0.5, -u[0] * 0.5, u[2] * 0.1])))
    .with_diffusion(field(|_, u| StateVector::new(vec![u[0].cos(), c(0.2, 0.0), u[1] * 0.3])))
}

fn u0() -> StateVector {
    StateVector::new(vec![c(0.3, 0.1), c(-0.2, 0.4), c(0.5, -0.1)])
}

fn integ(p: &SdeProblem, s: SchemeId, dt: f64) -> Integrator {
    Integrator::new(p, s, dt, &ContourConfig::default(), None).unwrap()
}

fn rel(a: &StateVector, b: &StateVector) -> f64 {
    a.max_abs_diff(b) / b.norm().max(1e-300)
}

#[test]
fn srk4_linear_is_quartic_taylor_polynomial() {
    let lambda = c(-0.8, 0.5);
    let p = scalar_linear(lambda);
    let dt = 0.1;
    let z = lambda * dt;
    let expect = 1.0 + z + z * z / 2.0 + z * z * z / 6.0 + z * z * z * z / 24.0;
    let out = step_srk(&p, &ButcherTableau::rk4(), 0.0, &StateVector::from_real(&[1.0]), &Increment::new(dt, vec![]).unwrap()).unwrap();
    assert!((out[0] - expect).norm() < 1e-15);
    let out = integ(&p, SchemeId::Srk4, dt)
        .step(&p, 0.0, &StateVector::from_real(&[1.0]), &Increment::new(dt, vec![]).unwrap())
        .unwrap();
    assert!((out[0] - expect).norm() < 1e-15);
}

#[test]
fn ssp33_linear_is_cubic_taylor_polynomial() {
    let lambda = c(-1.1, 0.0);
    let p = scalar_linear(lambda);
    let dt = 0.2;
    let z = lambda * dt;
    let expect = 1.0 + z + z * z / 2.0 + z * z * z / 6.0;
    let out = integ(&p, SchemeId::Ssp33, dt)
        .step(&p, 0.0, &StateVector::from_real(&[1.0]), &Increment::new(dt, vec![]).unwrap())
        .unwrap();
    assert!((out[0] - expect).norm() < 1e-15);
}

#[test]
fn ssp22_pure_multiplicative_noise() {
    let p = SdeProblem::new(1, field(|_, u| StateVector::zeros(u.len())))
        .unwrap()
        .with_diffusion(field(|_, u| u.clone()));
    let (dt, dw) = (0.01, 0.37);
    let out = integ(&p, SchemeId::Ssp22, dt)
        .step(&p, 0.0, &StateVector::from_real(&[2.0]), &Increment::new(dt, vec![dw]).unwrap())
        .unwrap();
    let expect = 2.0 * (1.0 + dw + dw * dw / 2.0);
    assert!((out[0].re - expect).abs() < 1e-14);
}

#[test]
fn exponential_schemes_with_zero_nonlinearity_propagate_exactly() {
    let lin = vec![c(-2.0, 0.0), c(0.0, 5.0), c(-0.5, -1.0)];
    let p = SdeProblem::new(3, field(|_, u| StateVector::zeros(u.len())))
        .unwrap()
        .with_linear_part(lin.clone())
        .unwrap();
    let dt = 0.3;
    let exact: StateVector = lin.iter().zip(u0().iter()).map(|(l, u)| (l * dt).exp() * u).collect();
    for s in [SchemeId::Ifsrk4, SchemeId::Esspifsrk33, SchemeId::Esspifsrk22(Esspifsrk22Form::Source), SchemeId::Setdrk2, SchemeId::Setdrk3, SchemeId::Setdrk4] {
        let out = integ(&p, s.clone(), dt).step(&p, 0.0, &u0(), &Increment::new(dt, vec![]).unwrap()).unwrap();
        assert!(rel(&out, &exact) < 1e-14, "{s}");
    }
    let pi = p.clone().with_calculus(Calculus::Ito);
    let out = integ(&pi, SchemeId::Sifem, dt).step(&pi, 0.0, &u0(), &Increment::new(dt, vec![]).unwrap()).unwrap();
    assert!(rel(&out, &exact) < 1e-14);
}

#[test]
fn zero_operator_reductions() {
    let p = split_problem(vec![c(0.0, 0.0); 3]);
    let dt = 0.05;
    let inc = Increment::new(dt, vec![0.13, -0.07]).unwrap();
    let pairs = [
        (SchemeId::Setdrk2, SchemeId::Srk(ButcherTableau::heun())),
        (SchemeId::Setdrk3, SchemeId::Srk(ButcherTableau::kutta3())),
        (SchemeId::Setdrk4, SchemeId::Srk4),
        (SchemeId::Ifsrk4, SchemeId::Srk4),
        (SchemeId::Esspifsrk22(Esspifsrk22Form::Source), SchemeId::Ssp22),
        (SchemeId::Esspifsrk33, SchemeId::Srk(ButcherTableau::esspif33())),
        (SchemeId::Sifrk(ButcherTableau::ssp33()), SchemeId::Ssp33),
    ];
    for (a, b) in pairs {
        let ua = integ(&p, a.clone(), dt).step(&p, 0.1, &u0(), &inc).unwrap();
        let ub = integ(&p, b.clone(), dt).step(&p, 0.1, &u0(), &inc).unwrap();
        assert!(rel(&ua, &ub) < 1e-12, "{a} vs {b}: {}", rel(&ua, &ub));
    }
}

#[test]
fn change_of_variables_identity() {
    let p = split_problem(vec![c(-1.0, 0.5), c(0.0, -2.0), c(-0.3, 0.0)]);
    let dt = 0.02;
    let inc = Increment::new(dt, vec![0.05, -0.11]).unwrap();
    let frozen = p.modified(&inc).unwrap();
    for s in SchemeId::all_named().into_iter().filter(|s| !s.is_ito()) {
        let it = integ(&p, s.clone(), dt);
        let a = it.step(&p, 0.0, &u0(), &inc).unwrap();
        let b = it.step_deterministic(&frozen, 0.0, &u0()).unwrap();
        assert_eq!(a, b, "{s}");
    }
}

#[test]
fn noiseless_steps_are_bit_identical_to_deterministic_maps() {
    let p = split_problem(vec![c(-1.0, 0.5), c(0.0, -2.0), c(-0.3, 0.0)]).without_noise();
    let dt = 0.02;
    for s in SchemeId::all_named().into_iter().filter(|s| !s.is_ito()) {
        let it = integ(&p, s.clone(), dt);
        let a = it.step(&p, 0.0, &u0(), &Increment::new(dt, vec![]).unwrap()).unwrap();
        let b = it.step_deterministic(&p, 0.0, &u0()).unwrap();
        assert_eq!(a, b, "{s}");
    }
}

/// Observed local order of one step on `u' = (λ + μ)u` with `λ` as the
/// linear part, measured against the exact exponential.
fn local_order(s: SchemeId) -> f64 {
    let lambda = c(-0.6, 1.1);
    let mu = c(0.3, -0.4);
    let p = scalar_linear(mu).with_linear_part(vec![lambda]).unwrap();
    let err = |h: f64| {
        let out = integ(&p, s.clone(), h).step_deterministic(&p, 0.0, &StateVector::from_real(&[1.0])).unwrap();
        (out[0] - ((lambda + mu) * h).exp()).norm()
    };
    (err(0.04) / err(0.02)).log2() - 1.0
}

#[test]
fn deterministic_orders_on_split_linear_problem() {
    for s in SchemeId::all_named().into_iter().filter(|s| !s.is_ito()) {
        let want = s.deterministic_order() as f64;
        let got = local_order(s.clone());
        assert!((got - want).abs() < 0.25, "{s}: {got}");
    }
}

#[test]
fn printed_esspifsrk22_form_is_not_second_order() {
    assert_eq!(calibrate_esspifsrk22_form(), Esspifsrk22Form::Source);
    let got = local_order(SchemeId::Esspifsrk22(Esspifsrk22Form::Printed));
    assert!(got < 0.5, "{got}");
}

#[test]
fn csetdrk1_forms_agree() {
    let p = split_problem(vec![c(-1.0, 0.5), c(0.0, -2.0), c(-0.3, 0.0)]).with_calculus(Calculus::Ito);
    let dt = 0.01;
    let inc = Increment::new(dt, vec![0.08, 0.02]).unwrap();
    let a = integ(&p, SchemeId::Csetdrk1(Csetdrk1Form::Separate), dt).step(&p, 0.0, &u0(), &inc).unwrap();
    let b = integ(&p, SchemeId::Csetdrk1(Csetdrk1Form::Factored), dt).step(&p, 0.0, &u0(), &inc).unwrap();
    assert!(rel(&a, &b) < 1e-15);
}

#[test]
fn setdm01_recovers_euler_maruyama_as_operator_vanishes() {
    let p = split_problem(vec![c(0.0, 0.0); 3]).with_calculus(Calculus::Ito);
    let dt: f64 = 0.01;
    let dw = [0.08, -0.03];
    let z: Vec<f64> = dw.iter().map(|w| w / dt.sqrt()).collect();
    let inc = Increment::new(dt, dw.to_vec()).unwrap();
    let out = step_ito(&p, &SchemeId::Setdm01, 0.0, &u0(), &inc, &z).unwrap();
    let mut em = u0();
    em.axpy(dt, &p.drift(0.0, &u0()).unwrap());
    for m in 0..2 {
        em.axpy(dw[m], &p.diffusion(m, 0.0, &u0()).unwrap());
    }
    assert!(rel(&out, &em) < 1e-13);
}

#[test]
fn calculus_and_operator_checks() {
    let p = split_problem(vec![c(-1.0, 0.0); 3]);
    let cfg = ContourConfig::default();
    assert!(matches!(Integrator::new(&p, SchemeId::Sifem, 0.1, &cfg, None), Err(Error::CalculusMismatch { .. })));
    let pi = p.clone().with_calculus(Calculus::Ito);
    assert!(matches!(Integrator::new(&pi, SchemeId::Srk4, 0.1, &cfg, None), Err(Error::CalculusMismatch { .. })));
    let unsplit = SdeProblem::new(1, field(|_, u| u.clone())).unwrap();
    assert!(matches!(Integrator::new(&unsplit, SchemeId::Setdrk4, 0.1, &cfg, None), Err(Error::MissingLinearPart)));

    let coeffs = etd_coefficient_set(EtdScheme::Setdrk4, p.linear_part().unwrap(), 0.1, &cfg).unwrap();
    let inc = Increment::new(0.05, vec![0.0, 0.0]).unwrap();
    assert!(matches!(step_setdrk(&p, &coeffs, 0.0, &u0(), &inc), Err(Error::CoefficientMismatch(_))));
    let other = split_problem(vec![c(-2.0, 0.0); 3]);
    let inc = Increment::new(0.1, vec![0.0, 0.0]).unwrap();
    assert!(matches!(step_setdrk(&other, &coeffs, 0.0, &u0(), &inc), Err(Error::CoefficientMismatch(_))));
    assert!(step_setdrk(&p, &coeffs, 0.0, &u0(), &inc).is_ok());
}

#[test]
fn stage_failure_is_reported_with_index() {
    let p = SdeProblem::new(1, field(|t, u| if t > 0.0 { StateVector::from_real(&[f64::NAN]) } else { u.clone() })).unwrap();
    let err = integ(&p, SchemeId::Srk4, 0.1).step(&p, 0.0, &StateVector::from_real(&[1.0]), &Increment::new(0.1, vec![]).unwrap());
    assert!(matches!(err, Err(Error::StageNonFinite { stage: 2 })), "{err:?}");
}

#[test]
fn integrate_path_zero_steps_and_blow_up() {
    let p = scalar_linear(c(1.0, 0.0)).with_diffusion(field(|_, u| u.clone()));
    let paths = generate_paths(1, 0, 1, 8, 0.1).unwrap();
    let it = integ(&p, SchemeId::Srk4, 0.1);
    let u = StateVector::from_real(&[1.5]);
    let tr = integrate_path(&p, &it, &u, 0.0, &paths, 0, None).unwrap();
    assert_eq!(tr.final_state, u);

    let tr = integrate_path(&p, &it, &u, 0.0, &paths, 8, Some(2)).unwrap();
    assert_eq!(tr.snapshots.len(), 5);

    let huge = scalar_linear(c(1e5, 0.0));
    let paths0 = generate_paths(1, 0, 0, 400, 0.1).unwrap();
    let it = integ(&huge, SchemeId::Srk4, 0.1);
    let err = integrate_path(&huge, &it, &u, 0.0, &paths0, 400, None);
    assert!(matches!(err, Err(Error::BlowUp { .. })), "{err:?}");
}

#[test]
fn scheme_names_round_trip() {
    for s in SchemeId::all_named() {
        assert_eq!(s.name().parse::<SchemeId>().unwrap(), s);
    }
    assert_eq!("srk_heun".parse::<SchemeId>().unwrap(), SchemeId::Srk(ButcherTableau::heun()));
    assert!(matches!("rk45".parse::<SchemeId>(), Err(Error::UnknownScheme(_))));
    let json = serde_json::to_string(&SchemeId::Setdrk4).unwrap();
    assert_eq!(json, "\"setdrk4\"");
}

#[test]
fn order_profiles() {
    let p = SchemeId::Setdrk4.order_profile().unwrap();
    assert_eq!((p.p_d, p.p_dc, p.p_c, p.p_s), (4.0, 2.0, 1.0, 0.5));
    let p = SchemeId::Ssp33.order_profile().unwrap();
    assert_eq!(p.p_dc, 1.0);
    assert!(SchemeId::Sifem.order_profile().is_none());
    assert!(SchemeId::Srk(ButcherTableau::euler()).order_profile().is_none());
}
