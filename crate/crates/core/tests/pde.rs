use cosmowave::coefficients::{CoefficientProfile, SignConvention};
use cosmowave::pde_solver::{
    bump, estimate_blowup_time, init_state, run, run_from, support_radius, w_functional, GridConfig, InitialData,
    Nonlinearity, Outcome, ProblemSpec, StopConfig,
};

fn spec(profile: CoefficientProfile, n: u32, p: f64, kind: Nonlinearity, eps: f64, data: InitialData) -> ProblemSpec {
    ProblemSpec {
        n,
        p,
        nonlinearity: kind,
        epsilon: eps,
        data,
        profile,
    }
}

fn unit_speed() -> CoefficientProfile {
    CoefficientProfile::power_speed(0.0, SignConvention::Damping).unwrap()
}

/// Max error against d'Alembert for `u₀ = bump(|x|/2)`, `u₁ = 0`, `a ≡ 1`.
fn dalembert_error(dx: f64, t: f64) -> f64 {
    let s = spec(unit_speed(), 1, 2.0, Nonlinearity::None, 1.0, InitialData::bump(2.0, 1.0, 0.0));
    let mut state = init_state(&s, GridConfig::new(dx), t).unwrap();
    let res = run_from(&mut state, &s, 0.5, StopConfig::until(t)).unwrap();
    assert!(matches!(res.outcome, Outcome::Completed { .. }));
    state
        .positions()
        .iter()
        .zip(&state.u)
        .map(|(&x, &u)| (u - 0.5 * (bump((x - t) / 2.0) + bump((x + t) / 2.0))).abs())
        .fold(0.0, f64::max)
}

#[test]
fn dalembert_convergence_is_second_order() {
    let errs: Vec<f64> = [64.0, 128.0, 256.0, 512.0].iter().map(|m| dalembert_error(1.0 / m, 1.0)).collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..=4.5).contains(&ratio), "errors {errs:?}");
    }
}

#[test]
fn linear_problem_scales_with_epsilon() {
    let ads = CoefficientProfile::anti_de_sitter(1.0, 1).unwrap();
    let data = InitialData::bump(1.0, 0.5, 1.0);
    let grid = GridConfig::new(1.0 / 32.0);
    let stop = StopConfig::until(1.0);
    let a = spec(ads.clone(), 1, 2.0, Nonlinearity::None, 0.1, data.clone());
    let b = spec(ads, 1, 2.0, Nonlinearity::None, 0.2, data);
    let mut sa = init_state(&a, grid, 1.0).unwrap();
    let mut sb = init_state(&b, grid, 1.0).unwrap();
    run_from(&mut sa, &a, grid.cfl, stop).unwrap();
    run_from(&mut sb, &b, grid.cfl, stop).unwrap();
    let scale = sb.u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for (x, y) in sa.u.iter().zip(&sb.u) {
        assert!((2.0 * x - y).abs() <= 1e-14 * scale);
    }
}

#[test]
fn even_data_stays_exactly_even() {
    let fl = CoefficientProfile::flrw_expanding(1.0, 2.0).unwrap();
    for kind in [Nonlinearity::AbsUtP, Nonlinearity::AbsGradUP, Nonlinearity::AbsUP] {
        let s = spec(fl.clone(), 1, 2.0, kind, 0.5, InitialData::bump(1.0, 1.0, 1.0));
        let mut state = init_state(&s, GridConfig::new(1.0 / 32.0), 3.0).unwrap();
        run_from(&mut state, &s, 0.5, StopConfig::until(3.0)).unwrap();
        let m = state.u.len();
        for k in 0..m / 2 {
            assert_eq!(state.u[k], state.u[m - 1 - k]);
            assert_eq!(state.v[k], state.v[m - 1 - k]);
        }
    }
}

#[test]
fn linear_energy_is_conserved() {
    let s = spec(unit_speed(), 1, 2.0, Nonlinearity::None, 1.0, InitialData::bump(1.0, 1.0, 1.0));
    let res = run(&s, GridConfig::new(1.0 / 64.0), StopConfig::until(10.0)).unwrap();
    let e0 = res.trace[0].e0;
    for r in &res.trace {
        assert!((r.e0 - e0).abs() <= 1e-4 * e0, "t = {}: {} vs {}", r.t, r.e0, e0);
    }
}

#[test]
fn linear_energy_decays_under_dissipation() {
    let ds = CoefficientProfile::de_sitter(1.0, 2).unwrap();
    let s = spec(ds, 1, 2.0, Nonlinearity::None, 1.0, InitialData::bump(1.0, 1.0, 1.0));
    let res = run(&s, GridConfig::new(1.0 / 64.0), StopConfig { stride: 1, ..StopConfig::until(5.0) }).unwrap();
    let e0 = res.trace[0].e0;
    for w in res.trace.windows(2) {
        assert!(w[1].e0 <= w[0].e0 * (1.0 + 1e-6) + 1e-9 * e0, "t = {}", w[1].t);
    }
}

#[test]
fn linear_w_follows_the_antidamping_growth() {
    let ads = CoefficientProfile::anti_de_sitter(1.0, 1).unwrap();
    let s = spec(ads.clone(), 1, 2.0, Nonlinearity::None, 0.1, InitialData::bump(1.0, 0.0, 1.0));
    let res = run(&s, GridConfig::new(1.0 / 64.0), StopConfig::until(2.0)).unwrap();
    let w0 = res.trace[0].w;
    for r in &res.trace {
        let expected = w0 * ads.damping_integral(r.t).unwrap().exp();
        assert!((r.w - expected).abs() <= 1e-6 * expected, "t = {}", r.t);
    }
}

#[test]
fn initial_w_is_epsilon_times_the_bump_integral() {
    const BUMP_1D: f64 = 1.206_900_322_437_876_2;
    let s = spec(unit_speed(), 1, 2.0, Nonlinearity::AbsUtP, 0.1, InitialData::bump(1.0, 0.0, 1.0));
    let state = init_state(&s, GridConfig::new(1.0 / 128.0), 1.0).unwrap();
    assert!((w_functional(&state) - 0.1 * BUMP_1D).abs() < 1e-12);
}

#[test]
fn radial_w_matches_the_bump_integrals() {
    const BUMP_2D: f64 = 1.268_112_161_127_596;
    const BUMP_3D: f64 = 1.199_003_907_019_214;
    // The trapezoid rule is second order for n = 2 (the weight r has a kink
    // under even extension) and spectrally accurate for n = 3.
    for (n, exact, tol) in [(2, BUMP_2D, 4e-5), (3, BUMP_3D, 1e-12)] {
        let s = spec(unit_speed(), n, 2.0, Nonlinearity::AbsUtP, 1.0, InitialData::bump(1.0, 0.0, 1.0));
        let state = init_state(&s, GridConfig::new(1.0 / 128.0), 1.0).unwrap();
        assert!((w_functional(&state) - exact).abs() < tol, "n = {n}");
    }
}

#[test]
fn spatially_constant_velocity_follows_bernoulli() {
    // A wide flat plateau: away from its edges Δu = 0 and v' = βv + v².
    let beta = 0.5;
    let ads_like = CoefficientProfile::custom(
        cosmowave::coefficients::Table::sample(|_| 1.0, 10.0, 1, cosmowave::coefficients::TailClass::Constant).unwrap(),
        cosmowave::coefficients::Table::sample(|_| beta, 10.0, 1, cosmowave::coefficients::TailClass::Constant).unwrap(),
        SignConvention::Antidamping,
    )
    .unwrap();
    let radii = vec![0.0, 20.0, 25.0];
    let data = InitialData {
        shape: cosmowave::pde_solver::DataShape::Tabulated {
            radii,
            u0: vec![0.0, 0.0, 0.0],
            u1: vec![1.0, 1.0, 0.0],
        },
        r: 25.0,
    };
    let s = spec(ads_like, 1, 2.0, Nonlinearity::SignedUtP, 0.2, data);
    let t = 1.0;
    let mut state = init_state(&s, GridConfig::new(1.0 / 16.0), t).unwrap();
    run_from(&mut state, &s, 0.1, StopConfig::until(t)).unwrap();
    let center = state.u.len() / 2;
    let v0: f64 = 0.2;
    // Bernoulli: v(t) = β v0 e^{βt} / (β + v0 (1 - e^{βt})).
    let e = (beta * t).exp();
    let exact = beta * v0 * e / (beta + v0 * (1.0 - e));
    assert!((state.v[center] - exact).abs() < 1e-9 * exact, "{} vs {exact}", state.v[center]);
}

#[test]
fn anti_de_sitter_blows_up_and_w_respects_its_lower_bound() {
    let ads = CoefficientProfile::anti_de_sitter(1.0, 1).unwrap();
    let s = spec(ads.clone(), 1, 2.0, Nonlinearity::AbsUtP, 0.1, InitialData::bump(1.0, 0.0, 1.0));
    let res = run(&s, GridConfig::new(1.0 / 32.0), StopConfig::until(8.0)).unwrap();
    let Outcome::BlowUp { t_est, t_lower_witness, fit_quality, .. } = res.outcome else {
        panic!("expected blow-up, got {:?}", res.outcome);
    };
    assert!(t_est.is_finite() && t_est >= t_lower_witness);
    assert!(fit_quality > 0.99);
    let w0 = res.trace[0].w;
    for r in &res.trace {
        assert!(r.w >= w0 * ads.damping_integral(r.t).unwrap().exp() * (1.0 - 1e-6));
    }
    let fit = estimate_blowup_time(&res.trace, 2.0).unwrap();
    assert_eq!(fit.t_est, t_est);
}

#[test]
fn support_stays_inside_the_domain_with_threshold() {
    let fl = CoefficientProfile::flrw_expanding(0.5, 1.0).unwrap();
    let s = spec(fl, 2, 2.0, Nonlinearity::AbsUtP, 0.01, InitialData::bump(1.0, 1.0, 1.0));
    let mut state = init_state(&s, GridConfig::new(1.0 / 32.0), 4.0).unwrap();
    let res = run_from(&mut state, &s, 0.5, StopConfig::until(4.0)).unwrap();
    assert!(matches!(res.outcome, Outcome::Completed { .. }), "{:?}", res.outcome);
    let threshold = 1e-12 * state.v.iter().chain(&state.u).fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(support_radius(&state, threshold) < state.grid.x_max - 4.0 * state.grid.dx);
}


#[test]
fn pde_blows_up_no_later_than_the_reduced_ode() {
    // W only bounds the averaged velocity from below, so the pointwise
    // maximum must blow up first.
    use cosmowave::ode_oracle::{integrate_reduced_ode, OdeProblem};
    let ads = CoefficientProfile::anti_de_sitter(1.0, 1).unwrap();
    let mut last = 0.0;
    for eps in [0.2, 0.1] {
        let s = spec(ads.clone(), 1, 2.0, Nonlinearity::AbsUtP, eps, InitialData::bump(1.0, 0.0, 1.0));
        let res = run(&s, GridConfig::new(1.0 / 32.0), StopConfig::until(8.0)).unwrap();
        let Outcome::BlowUp { t_est, width, .. } = res.outcome else {
            panic!("ε = {eps}: {:?}", res.outcome);
        };
        let ode = integrate_reduced_ode(&OdeProblem::from_spec(&s).unwrap(), f64::MAX)
            .unwrap()
            .blowup_time()
            .unwrap();
        assert!(t_est <= ode + 2.0 * width, "ε = {eps}: {t_est} vs {ode}");
        assert!(t_est > last, "lifespan should grow as ε shrinks");
        last = t_est;
    }
}
