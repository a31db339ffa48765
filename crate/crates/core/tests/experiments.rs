use cosmowave::coefficients::{CoefficientProfile, SignConvention, Table, TailClass};
use cosmowave::experiments::{
    compare_to_theory, fit_log_law, fit_power_law, run_sweep, verify_integral_bound, BoundSide, CompareOptions,
    Censoring, EngineSettings, ExperimentError, SweepPoint,
};
use cosmowave::pde_solver::{GridConfig, InitialData, Nonlinearity, ProblemSpec, StopConfig};
use cosmowave::theory::classify;
use proptest::prelude::*;

fn spec(profile: CoefficientProfile, n: u32, p: f64) -> ProblemSpec {
    ProblemSpec {
        n,
        p,
        nonlinearity: Nonlinearity::AbsUtP,
        epsilon: 0.1,
        data: InitialData::bump(1.0, 0.0, 1.0),
        profile,
    }
}

const ODE: EngineSettings = EngineSettings::Ode { t_cap: f64::MAX };

fn decades(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 10f64.powi(-k)).collect()
}

#[test]
fn sweeps_need_four_epsilons() {
    let s = spec(CoefficientProfile::anti_de_sitter(1.0, 1).unwrap(), 1, 2.0);
    assert!(matches!(run_sweep(&s, &[], &ODE), Err(ExperimentError::InvalidSweep(_))));
    assert!(matches!(
        run_sweep(&s, &[0.1, 0.01, 0.001], &ODE),
        Err(ExperimentError::InvalidSweep(_))
    ));
}

#[test]
fn anti_de_sitter_oracle_sweep_is_monotone_and_matches_the_log_corrected_law() {
    let ads = CoefficientProfile::anti_de_sitter(1.0, 1).unwrap();
    let s = spec(ads.clone(), 1, 2.0);
    let sweep = run_sweep(&s, &[1e-3, 1e-1, 1e-4, 1e-2], &ODE).unwrap();
    let eps: Vec<f64> = sweep.points.iter().map(|p| p.epsilon).collect();
    assert_eq!(eps, vec![1e-1, 1e-2, 1e-3, 1e-4]);
    assert!(sweep.points.windows(2).all(|w| w[0].t < w[1].t));

    let full = run_sweep(&s, &decades(1, 6), &ODE).unwrap();
    let report = classify(&ads, 1, 2.0, Nonlinearity::AbsUtP, 1.0).unwrap();
    let cmp = compare_to_theory(&full, &report, CompareOptions::default()).unwrap();
    assert!(cmp.pass, "{cmp:#?}");
    assert!(cmp.checks.iter().all(|c| c.side == BoundSide::Upper));
}

#[test]
fn integral_bound_holds_for_power_speeds() {
    // For α = 0, p = 2 the lifespan is exp(1/W₀) - 1, which leaves f64 range below ε ≈ 1e-3.
    let cases = [
        (0.0, 2.0, vec![0.1, 0.05, 0.02, 0.01]),
        (0.0, 1.5, decades(1, 5)),
        (1.0, 1.5, decades(1, 5)),
    ];
    for (alpha, p, eps) in cases {
        let prof = CoefficientProfile::power_speed(alpha, SignConvention::Antidamping).unwrap();
        let s = spec(prof.clone(), 1, p);
        let sweep = run_sweep(&s, &eps, &ODE).unwrap();
        assert!(sweep.uncensored().count() == eps.len(), "α = {alpha}: {:?}", sweep.points);
        let check = verify_integral_bound(&prof, 1, p, 1.0, &sweep).unwrap();
        assert!(check.bounded && !check.low_confidence, "α = {alpha}, p = {p}: {check:?}");
    }
}

#[test]
fn single_point_bound_is_low_confidence() {
    let prof = CoefficientProfile::power_speed(0.0, SignConvention::Antidamping).unwrap();
    let s = spec(prof.clone(), 1, 2.0);
    let mut sweep = run_sweep(&s, &decades(1, 4), &ODE).unwrap();
    for p in sweep.points.iter_mut().skip(1) {
        p.censored = Censoring::Survived;
    }
    let check = verify_integral_bound(&prof, 1, 2.0, 1.0, &sweep).unwrap();
    assert!(check.bounded && check.low_confidence && check.ratios.len() == 1);
}

#[test]
fn strong_antidamping_gives_a_logarithmic_lifespan() {
    let speed = Table::sample(f64::exp, 20.0, 20_000, TailClass::Growing).unwrap();
    let damping = Table::sample(|_| 2.0, 20.0, 1, TailClass::Constant).unwrap();
    let prof = CoefficientProfile::custom(speed, damping, SignConvention::Antidamping).unwrap();
    let sweep = run_sweep(&spec(prof, 1, 2.0), &decades(1, 6), &ODE).unwrap();
    let fit = fit_log_law(&sweep.points).unwrap();
    assert!(fit.r_squared >= 0.98, "{fit:?}");
}

#[test]
fn sweeps_are_deterministic() {
    let s = spec(CoefficientProfile::flrw_contracting(1.0, 1.0).unwrap(), 1, 2.0);
    let a = run_sweep(&s, &decades(1, 4), &ODE).unwrap();
    let b = run_sweep(&s, &decades(1, 4), &ODE).unwrap();
    assert_eq!(a, b);
}

#[test]
fn mismatched_report_is_rejected() {
    let ads = CoefficientProfile::anti_de_sitter(1.0, 1).unwrap();
    let sweep = run_sweep(&spec(ads.clone(), 1, 2.0), &decades(1, 4), &ODE).unwrap();
    let report = classify(&ads, 1, 3.0, Nonlinearity::AbsUtP, 1.0).unwrap();
    assert!(matches!(
        compare_to_theory(&sweep, &report, CompareOptions::default()),
        Err(ExperimentError::MismatchedSpec(_))
    ));
}

#[test]
fn global_regime_pde_sweep_is_censored() {
    let ds = CoefficientProfile::de_sitter(1.0, 1).unwrap();
    let s = spec(ds.clone(), 1, 2.0);
    let settings = EngineSettings::Pde {
        grid: GridConfig::new(1.0 / 32.0),
        stop: StopConfig::until(10.0),
    };
    let sweep = run_sweep(&s, &[1e-2, 5e-3, 2e-3, 1e-3], &settings).unwrap();
    assert!(sweep.points.iter().all(|p| p.censored == Censoring::Survived));
    let report = classify(&ds, 1, 2.0, Nonlinearity::AbsUtP, 1.0).unwrap();
    let cmp = compare_to_theory(&sweep, &report, CompareOptions::default()).unwrap();
    assert_eq!(cmp.summary, "no finite-T prediction; all points censored");
    assert!(cmp.checks.is_empty());
}

proptest! {
    #[test]
    fn synthetic_power_law_is_recovered(
        exponent in 0.1f64..4.0,
        scale in 0.01f64..100.0,
        top in -3.0f64..-0.5,
        span in 1.0f64..4.0,
    ) {
        let pts: Vec<SweepPoint> = (0..6)
            .map(|i| {
                let e = 10f64.powf(top - span * i as f64 / 5.0);
                SweepPoint {
                    epsilon: e,
                    t: scale * e.powf(-exponent),
                    quality: 1.0,
                    width: 0.0,
                    censored: Censoring::None,
                    error: None,
                }
            })
            .collect();
        let slope = fit_power_law(&pts).unwrap().slope().unwrap();
        prop_assert!((slope - exponent).abs() <= 1e-10);
    }
}
