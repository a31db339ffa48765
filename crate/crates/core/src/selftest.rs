//! Worked examples for every public operation, runnable from the CLI.

use std::path::Path;

use serde::Serialize;

use crate::cli_io::{config_to_toml, parse_config, read_sweep_csv, write_sweep_csv};
use crate::coefficients::{CoefficientProfile, Integrability, SignConvention, Table, TailClass};
use crate::experiments::{
    compare_to_theory, fit_log_law, fit_power_law, fit_power_times_log, run_sweep, verify_integral_bound, Censoring,
    CompareOptions, EngineSettings, SweepPoint,
};
use crate::ode_oracle::{
    bernoulli_blowup_time, integrate, log_identity_check, w_lower_bound, ConstantCoefficients, OdeProblem,
    OdeSettings,
};
use crate::pde_solver::{
    bump, energy, estimate_blowup_time, init_state, run, run_from, support_radius, w_functional, GridConfig,
    InitialData, Nonlinearity, Outcome, ProblemSpec, StopConfig,
};
use crate::theory::{classify, critical_exponent, predicted_lifespan_lower, predicted_lifespan_upper, rules, Verdict};

#[derive(Debug, Clone, Serialize)]
pub struct CaseResult {
    pub module: &'static str,
    pub operation: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = std::result::Result<String, String>;

fn close(got: f64, want: f64, rel: f64) -> Check {
    let err = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
    if err <= rel {
        Ok(format!("{got} (expected {want})"))
    } else {
        Err(format!("{got} vs expected {want}, relative error {err:e} > {rel:e}"))
    }
}

fn ensure(cond: bool, what: impl Into<String>) -> Check {
    let what = what.into();
    if cond {
        Ok(what)
    } else {
        Err(what)
    }
}

fn s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

type Case = (&'static str, &'static str, fn() -> Check);

fn cases() -> Vec<Case> {
    vec![
        ("coefficients", "eval", || {
            let v = CoefficientProfile::flrw_expanding(1.0, 2.0).map_err(s)?.eval(1.0).map_err(s)?;
            close(v.a, 0.5, 1e-15).and(close(v.b, 1.0, 1e-15))
        }),
        ("coefficients", "big_a", || {
            let p = CoefficientProfile::de_sitter(1.0, 1).map_err(s)?;
            close(p.big_a(f64::INFINITY).map_err(s)?, 1.0, 1e-15)
        }),
        ("coefficients", "big_a_pm1", || {
            let p = CoefficientProfile::flrw_expanding(1.0, 1.0).map_err(s)?;
            close(p.big_a_pm1(9.0, 2.0).map_err(s)?, 10f64.ln(), 1e-12)
        }),
        ("coefficients", "check_dissipative", || {
            let good = CoefficientProfile::flrw_expanding(1.0, 2.0).map_err(s)?.check_dissipative(100.0, 1025).map_err(s)?;
            let bad = CoefficientProfile::flrw_expanding(2.0, 1.0).map_err(s)?.check_dissipative(10.0, 1025).map_err(s)?;
            ensure(good.holds && !bad.holds && bad.first_violation == Some(0.0), format!("{good:?} / {bad:?}"))
        }),
        ("coefficients", "alpha_sup", || {
            let p = CoefficientProfile::anti_de_sitter(1.0, 2).map_err(s)?;
            close(p.alpha_sup(2, 2.0, 1e4).map_err(s)?.value, 2.0, 1e-6)
        }),
        ("coefficients", "beta_inf", || {
            let speed = Table::sample(|_| 1.0, 40.0, 1, TailClass::Constant).map_err(s)?;
            let damping = Table::sample(|t| 2.0 + (-t).exp(), 40.0, 4000, TailClass::Constant).map_err(s)?;
            let p = CoefficientProfile::custom(speed, damping, SignConvention::Antidamping).map_err(s)?;
            close(p.beta_inf(f64::INFINITY).map_err(s)?, 2.0, 1e-6)
        }),
        ("coefficients", "a_pm1_integrable", || {
            let p = CoefficientProfile::flrw_expanding(2.0, 2.0).map_err(s)?;
            ensure(
                p.a_pm1_integrable(2.0) == Integrability::Integrable && p.a_pm1_integrable(1.25) == Integrability::Divergent,
                "FLRW α = 2: integrable for p = 2, divergent for p = 1.25",
            )
        }),
        ("theory", "classify", || {
            let ds = CoefficientProfile::de_sitter(1.0, 3).map_err(s)?;
            let r = classify(&ds, 1, 2.0, Nonlinearity::AbsUtP, 1.0).map_err(s)?;
            let ads = CoefficientProfile::anti_de_sitter(1.0, 1).map_err(s)?;
            let q = classify(&ads, 1, 2.0, Nonlinearity::AbsUtP, 1.0).map_err(s)?;
            ensure(
                r.verdict == Verdict::GlobalExistence
                    && r.rule_fired == rules::GLOBAL
                    && q.verdict == Verdict::BlowUp
                    && q.rule_fired == rules::THM31_EQUAL,
                format!("{} / {}", r.rule_fired, q.rule_fired),
            )
        }),
        ("theory", "critical_exponent", || {
            let p = CoefficientProfile::flrw_expanding(2.0, 2.0).map_err(s)?;
            close(critical_exponent(&p, 1).ok_or("no exponent")?, 1.5, 1e-15)
        }),
        ("theory", "predicted_lifespan_lower", || {
            let p = CoefficientProfile::flrw_expanding(1.0, 1.0).map_err(s)?;
            close(predicted_lifespan_lower(&p, 1, 2.0, 0.1).map_err(s)?, 10f64.exp() - 1.0, 1e-6)
        }),
        ("theory", "predicted_lifespan_upper", || {
            let p = CoefficientProfile::anti_de_sitter(1.0, 1).map_err(s)?;
            let u = predicted_lifespan_upper(&p, 1, 2.0, 0.1, 1.0).map_err(s)?;
            close(u.eval_at.ok_or("no value")?, 10.0 * 10f64.ln(), 1e-12)
        }),
        ("pde_solver", "run", || {
            let spec = ProblemSpec {
                n: 1,
                p: 2.0,
                nonlinearity: Nonlinearity::None,
                epsilon: 1.0,
                data: InitialData::bump(2.0, 1.0, 0.0),
                profile: CoefficientProfile::power_speed(0.0, SignConvention::Damping).map_err(s)?,
            };
            let mut st = init_state(&spec, GridConfig::new(1.0 / 128.0), 1.0).map_err(s)?;
            run_from(&mut st, &spec, 0.5, StopConfig::until(1.0)).map_err(s)?;
            let err = st
                .positions()
                .iter()
                .zip(&st.u)
                .map(|(&x, &u)| (u - 0.5 * (bump((x - 1.0) / 2.0) + bump((x + 1.0) / 2.0))).abs())
                .fold(0.0, f64::max);
            ensure(err < 1e-4, format!("max error against d'Alembert {err:e}"))
        }),
        ("pde_solver", "energy", || {
            let spec = ProblemSpec {
                n: 1,
                p: 2.0,
                nonlinearity: Nonlinearity::None,
                epsilon: 1.0,
                data: InitialData::bump(1.0, 1.0, 1.0),
                profile: CoefficientProfile::power_speed(0.0, SignConvention::Damping).map_err(s)?,
            };
            let mut st = init_state(&spec, GridConfig::new(1.0 / 64.0), 2.0).map_err(s)?;
            let e0 = energy(&st, &spec.profile, 0).map_err(s)?;
            run_from(&mut st, &spec, 0.5, StopConfig::until(2.0)).map_err(s)?;
            close(energy(&st, &spec.profile, 0).map_err(s)?, e0, 1e-4)
        }),
        ("pde_solver", "w_functional", || {
            let spec = ProblemSpec {
                n: 1,
                p: 2.0,
                nonlinearity: Nonlinearity::AbsUtP,
                epsilon: 0.1,
                data: InitialData::bump(1.0, 0.0, 1.0),
                profile: CoefficientProfile::power_speed(0.0, SignConvention::Damping).map_err(s)?,
            };
            let st = init_state(&spec, GridConfig::new(1.0 / 128.0), 1.0).map_err(s)?;
            close(w_functional(&st), 0.1 * 1.206_900_322_437_876_2, 1e-12)
        }),
        ("pde_solver", "support_radius", || {
            let spec = ProblemSpec {
                n: 1,
                p: 2.0,
                nonlinearity: Nonlinearity::None,
                epsilon: 1.0,
                data: InitialData::bump(1.0, 1.0, 0.0),
                profile: CoefficientProfile::power_speed(0.0, SignConvention::Damping).map_err(s)?,
            };
            let st = init_state(&spec, GridConfig::new(1.0 / 64.0), 1.0).map_err(s)?;
            let r = support_radius(&st, 0.0);
            ensure(r <= 1.0 && r > 1.0 - 2.0 / 64.0, format!("initial support radius {r}"))
        }),
        ("pde_solver", "estimate_blowup_time", || {
            let spec = ProblemSpec {
                n: 1,
                p: 2.0,
                nonlinearity: Nonlinearity::AbsUtP,
                epsilon: 0.1,
                data: InitialData::bump(1.0, 0.0, 1.0),
                profile: CoefficientProfile::anti_de_sitter(1.0, 1).map_err(s)?,
            };
            let res = run(&spec, GridConfig::new(1.0 / 32.0), StopConfig::until(8.0)).map_err(s)?;
            let Outcome::BlowUp { t_est, .. } = res.outcome else {
                return Err(format!("expected blow-up, got {:?}", res.outcome));
            };
            let fit = estimate_blowup_time(&res.trace, 2.0).map_err(s)?;
            ensure(fit.t_est == t_est && fit.r_squared > 0.99, format!("T ≈ {t_est}, r² = {}", fit.r_squared))
        }),
        ("ode_oracle", "integrate_reduced_ode", || {
            let c = ConstantCoefficients { beta: 1.0, gamma: 1.0 };
            let t = integrate(&c, 2.0, 0.1, 1e6, OdeSettings::default())
                .map_err(s)?
                .blowup_time()
                .ok_or("no blow-up")?;
            close(t, bernoulli_blowup_time(1.0, 1.0, 2.0, 0.1), 1e-8)
        }),
        ("ode_oracle", "w_lower_bound", || {
            let p = OdeProblem::new(CoefficientProfile::anti_de_sitter(1.0, 3).map_err(s)?, 3, 2.0, 1.0, 1.0).map_err(s)?;
            close(w_lower_bound(&p, 1.0).map_err(s)?, 3f64.exp(), 1e-14)
        }),
        ("ode_oracle", "log_identity_check", || {
            let p = CoefficientProfile::de_sitter(1.0, 1).map_err(s)?;
            let r = log_identity_check(&p, 2.0, 5.0).map_err(s)?;
            ensure(r.abs() <= 1e-9, format!("residual {r:e}"))
        }),
        ("experiments", "run_sweep", || {
            let spec = ads_spec()?;
            let sw = run_sweep(&spec, &[1e-1, 1e-2, 1e-3, 1e-4], &EngineSettings::Ode { t_cap: 1e300 }).map_err(s)?;
            ensure(
                sw.points.iter().all(|p| !p.is_censored()) && sw.points.windows(2).all(|w| w[0].t < w[1].t),
                "four finite lifespans increasing as ε decreases",
            )
        }),
        ("experiments", "fit_power_law", || {
            let f = fit_power_law(&synthetic(|e| 3.0 * e.powi(-2))).map_err(s)?;
            close(f.slope().unwrap_or(f64::NAN), 2.0, 1e-10)
        }),
        ("experiments", "fit_log_law", || {
            let f = fit_log_law(&synthetic(|e| 2.0 * (1.0 / e).ln() + 1.0)).map_err(s)?;
            close(f.r_squared, 1.0, 1e-12)
        }),
        ("experiments", "fit_power_times_log", || {
            let f = fit_power_times_log(&synthetic(|e| (1.0 / e).ln() / e)).map_err(s)?;
            close(f.slope().unwrap_or(f64::NAN), 1.0, 1e-10)
        }),
        ("experiments", "verify_integral_bound", || {
            let prof = CoefficientProfile::power_speed(0.0, SignConvention::Antidamping).map_err(s)?;
            let spec = ProblemSpec {
                profile: prof.clone(),
                ..ads_spec()?
            };
            let sw = run_sweep(&spec, &[0.1, 0.05, 0.02, 0.01], &EngineSettings::Ode { t_cap: 1e300 }).map_err(s)?;
            let c = verify_integral_bound(&prof, 1, 2.0, 1.0, &sw).map_err(s)?;
            ensure(c.bounded, format!("ratio spread {}", c.spread))
        }),
        ("experiments", "compare_to_theory", || {
            let spec = ads_spec()?;
            let eps: Vec<f64> = (1..=6).map(|k| 10f64.powi(-k)).collect();
            let sw = run_sweep(&spec, &eps, &EngineSettings::Ode { t_cap: 1e300 }).map_err(s)?;
            let report = classify(&spec.profile, 1, 2.0, Nonlinearity::AbsUtP, 1.0).map_err(s)?;
            let cmp = compare_to_theory(&sw, &report, CompareOptions::default()).map_err(s)?;
            ensure(cmp.pass, cmp.summary)
        }),
        ("cli_io", "load_config", || {
            let text = "[problem]\nn = 1\np = 0.5\n[coefficients]\nfamily = \"de_sitter\"\nH = 1.0\nn = 3\n";
            match parse_config(text, Path::new(".")) {
                Err(e) if e.to_string() == "problem.p must exceed 1" => Ok(e.to_string()),
                other => Err(format!("{other:?}")),
            }
        }),
        ("cli_io", "round_trip", || {
            let text = "[problem]\nn = 1\np = 2\n[coefficients]\nfamily = \"anti_de_sitter\"\nH = 1.0\nn = 1\n";
            let cfg = parse_config(text, Path::new(".")).map_err(s)?;
            let again = parse_config(&config_to_toml(&cfg), Path::new(".")).map_err(s)?;
            ensure(cfg == again, "config survives serialization")
        }),
        ("cli_io", "sweep_csv", || {
            let spec = ads_spec()?;
            let sw = run_sweep(&spec, &[1e-1, 1e-2, 1e-3, 1e-4], &EngineSettings::Ode { t_cap: 1e300 }).map_err(s)?;
            let mut buf = Vec::new();
            write_sweep_csv(&mut buf, &sw).map_err(s)?;
            let back = read_sweep_csv(buf.as_slice(), spec).map_err(s)?;
            let same = back
                .points
                .iter()
                .zip(&sw.points)
                .all(|(a, b)| a.epsilon == b.epsilon && a.t == b.t && a.quality == b.quality && a.censored == b.censored);
            ensure(same && back.engine == sw.engine, "sweep CSV re-reads bit for bit")
        }),
    ]
}

fn ads_spec() -> std::result::Result<ProblemSpec, String> {
    Ok(ProblemSpec {
        n: 1,
        p: 2.0,
        nonlinearity: Nonlinearity::AbsUtP,
        epsilon: 0.1,
        data: InitialData::bump(1.0, 0.0, 1.0),
        profile: CoefficientProfile::anti_de_sitter(1.0, 1).map_err(s)?,
    })
}

fn synthetic(f: impl Fn(f64) -> f64) -> Vec<SweepPoint> {
    [1e-2, 3e-3, 1e-3, 3e-4, 1e-4]
        .iter()
        .map(|&e| SweepPoint {
            epsilon: e,
            t: f(e),
            quality: 1.0,
            width: 0.0,
            censored: Censoring::None,
            error: None,
        })
        .collect()
}

/// Runs every example; a panic inside one counts as a failure.
pub fn run_selftest() -> Vec<CaseResult> {
    cases()
        .into_iter()
        .map(|(module, operation, f)| {
            let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
            let (passed, detail) = match outcome {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CaseResult {
                module,
                operation,
                passed,
                detail,
            }
        })
        .collect()
}
