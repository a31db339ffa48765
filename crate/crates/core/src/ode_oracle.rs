//! Reduced dynamics for `W(t) = ∫ u_t dx`:
//!
//! ```text
//! W' = b_-(t) W + (A(t) + R)^{-n(p-1)} W^p,   W(0) = W₀ > 0
//! ```
//!
//! integrated as an equality with an embedded Dormand–Prince 5(4) pair.
//! Its blow-up time is an upper bound for the lifespan of the PDE, since
//! `W` of the PDE solution obeys the corresponding inequality.

use serde::Serialize;
use thiserror::Error;

use crate::coefficients::{CoefficientError, CoefficientProfile, SignConvention};
use crate::pde_solver::{initial_velocity_integral, ProblemSpec};
use crate::quadrature::{adaptive_simpson, QuadratureError, QuadratureSettings};

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("invalid reduced problem: {0}")]
    InvalidProblem(String),
    #[error("non-finite right-hand side at t = {t}")]
    NonFinite { t: f64 },
    #[error(transparent)]
    Coefficients(#[from] CoefficientError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

pub type Result<T> = std::result::Result<T, OdeError>;

/// Coefficients of `W' = β(t) W + g(t) W^p`.
pub trait ReducedCoefficients {
    /// `β(t)`, the linear growth rate.
    fn growth(&self, t: f64) -> Result<f64>;
    /// `ln g(t)`.
    fn ln_coupling(&self, t: f64) -> Result<f64>;
}

/// Constant `β` and `g = γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantCoefficients {
    pub beta: f64,
    pub gamma: f64,
}

impl ReducedCoefficients for ConstantCoefficients {
    fn growth(&self, _t: f64) -> Result<f64> {
        Ok(self.beta)
    }

    fn ln_coupling(&self, _t: f64) -> Result<f64> {
        Ok(self.gamma.ln())
    }
}

/// Closed-form blow-up time of `W' = βW + γW^p`.
pub fn bernoulli_blowup_time(beta: f64, gamma: f64, p: f64, w0: f64) -> f64 {
    let z0 = w0.powf(1.0 - p);
    if beta == 0.0 {
        z0 / ((p - 1.0) * gamma)
    } else {
        (beta * z0 / gamma).ln_1p() / ((p - 1.0) * beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeProblem {
    pub profile: CoefficientProfile,
    pub n: u32,
    pub p: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "W0")]
    pub w0: f64,
}

impl OdeProblem {
    pub fn new(profile: CoefficientProfile, n: u32, p: f64, r: f64, w0: f64) -> Result<Self> {
        if profile.sign() != SignConvention::Antidamping {
            return Err(OdeError::InvalidProblem(
                "the reduced ODE needs an antidamping-form profile".into(),
            ));
        }
        if n < 1 || !(p > 1.0 && p.is_finite()) || !(r > 0.0 && r.is_finite()) {
            return Err(OdeError::InvalidProblem(format!(
                "need n ≥ 1, p > 1, R > 0 (got n = {n}, p = {p}, R = {r})"
            )));
        }
        if !(w0 > 0.0 && w0.is_finite()) {
            return Err(OdeError::InvalidProblem(format!("W0 must be positive, got {w0}")));
        }
        Ok(Self { profile, n, p, r, w0 })
    }

    /// The problem matching a PDE instance: `W₀ = ε ∫ u₁`, `R` from the data.
    pub fn from_spec(spec: &ProblemSpec) -> Result<Self> {
        let w0 = spec.epsilon * initial_velocity_integral(&spec.data, spec.n);
        Self::new(spec.profile.clone(), spec.n, spec.p, spec.data.r, w0)
    }

    /// `γ = R^{-n(p-1)}`.
    pub fn gamma(&self) -> f64 {
        self.r.powf(-(self.n as f64) * (self.p - 1.0))
    }
}

impl ReducedCoefficients for OdeProblem {
    fn growth(&self, t: f64) -> Result<f64> {
        Ok(self.profile.eval(t)?.b)
    }

    fn ln_coupling(&self, t: f64) -> Result<f64> {
        Ok(-(self.n as f64) * (self.p - 1.0) * self.profile.ln_big_a_plus(t, self.r)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OdeOutcome {
    BlowUp { time: f64 },
    /// No blow-up signal before `t_cap`; this is not a claim of global existence.
    CapReached { t_cap: f64, ln_w: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeResult {
    pub outcome: OdeOutcome,
    /// Accepted steps `(t, W)` while `W` is representable.
    pub trace: Vec<(f64, f64)>,
    pub steps: usize,
}

impl OdeResult {
    pub fn blowup_time(&self) -> Option<f64> {
        match self.outcome {
            OdeOutcome::BlowUp { time } => Some(time),
            OdeOutcome::CapReached { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeSettings {
    pub rtol: f64,
    /// Stop once the frozen-coefficient remaining time is below
    /// `stop_fraction · max(t, 1)`.
    pub stop_fraction: f64,
    pub max_steps: usize,
    /// Switch to `ln W` once `W` exceeds this.
    pub log_switch: f64,
}

impl Default for OdeSettings {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            stop_fraction: 1e-12,
            max_steps: 10_000_000,
            log_switch: 1e100,
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Which variable the integrator advances.
#[derive(Clone, Copy, PartialEq)]
enum Form {
    Linear,
    Log,
}

fn rhs<C: ReducedCoefficients + ?Sized>(c: &C, p: f64, form: Form, t: f64, y: f64) -> Result<f64> {
    let beta = c.growth(t)?;
    let lg = c.ln_coupling(t)?;
    let d = match form {
        // βW + g W^p
        Form::Linear => beta * y + if y > 0.0 { (lg + p * y.ln()).exp() } else { 0.0 },
        // (ln W)' = β + g W^{p-1}
        Form::Log => beta + (lg + (p - 1.0) * y).exp(),
    };
    if d.is_finite() {
        Ok(d)
    } else {
        Err(OdeError::NonFinite { t })
    }
}

/// Time left until blow-up with coefficients frozen at `t`.
fn frozen_remaining<C: ReducedCoefficients + ?Sized>(c: &C, p: f64, t: f64, ln_w: f64) -> Result<f64> {
    let beta = c.growth(t)?;
    let lg = c.ln_coupling(t)?;
    // β Z / g with Z = W^{1-p}, in logs.
    let ln_ratio = (1.0 - p) * ln_w - lg;
    if beta == 0.0 {
        return Ok(ln_ratio.exp() / (p - 1.0));
    }
    let x = beta * ln_ratio.exp();
    if x <= -1.0 {
        // Strong enough decay that the frozen problem never blows up.
        return Ok(f64::INFINITY);
    }
    Ok(x.ln_1p() / ((p - 1.0) * beta))
}

/// Integrates `W' = β W + g W^p` from `W(0) = w0` until blow-up or `t_cap`.
pub fn integrate<C: ReducedCoefficients + ?Sized>(
    coeffs: &C,
    p: f64,
    w0: f64,
    t_cap: f64,
    settings: OdeSettings,
) -> Result<OdeResult> {
    if !(w0 > 0.0) || !(p > 1.0) || !(t_cap > 0.0) {
        return Err(OdeError::InvalidProblem(format!(
            "need W0 > 0, p > 1, t_cap > 0 (got {w0}, {p}, {t_cap})"
        )));
    }
    let mut t = 0.0f64;
    let mut form = if w0 > settings.log_switch { Form::Log } else { Form::Linear };
    let mut y = if form == Form::Log { w0.ln() } else { w0 };
    let ln_w = |form: Form, y: f64| if form == Form::Log { y } else { y.ln() };
    let mut trace = vec![(0.0, w0)];

    let remaining = frozen_remaining(coeffs, p, 0.0, w0.ln())?;
    let mut h = if remaining.is_finite() {
        (0.01 * remaining).min(t_cap).max(1e-12)
    } else {
        (1e-3 * t_cap).min(1.0)
    };
    let mut steps = 0usize;
    let mut k = [0.0f64; 7];

    while steps < settings.max_steps {
        let r = frozen_remaining(coeffs, p, t, ln_w(form, y))?;
        if r <= settings.stop_fraction * t.max(1.0) {
            return Ok(OdeResult {
                outcome: OdeOutcome::BlowUp { time: t + r },
                trace,
                steps,
            });
        }
        if t >= t_cap {
            break;
        }
        if r.is_finite() {
            h = h.min(0.5 * r);
        }
        if h <= 1e-15 * t.max(1.0) {
            // Step size underflow: the singularity lies inside [t, t + h].
            return Ok(OdeResult {
                outcome: OdeOutcome::BlowUp { time: t + h.max(0.0) },
                trace,
                steps,
            });
        }

        let to_cap = t_cap - t;
        if to_cap <= 1e-15 * t.max(1.0) {
            t = t_cap;
            continue;
        }
        h = h.min(to_cap);

        let attempt = (|| -> Result<(f64, f64)> {
            k[0] = rhs(coeffs, p, form, t, y)?;
            for s in 1..7 {
                let mut yi = y;
                for j in 0..s {
                    yi += h * A[s][j] * k[j];
                }
                k[s] = rhs(coeffs, p, form, t + C[s] * h, yi)?;
            }
            let mut y5 = y;
            let mut y4 = y;
            for s in 0..7 {
                y5 += h * B5[s] * k[s];
                y4 += h * B4[s] * k[s];
            }
            Ok((y5, y4))
        })();

        let (y5, y4) = match attempt {
            Ok(v) if v.0.is_finite() && (form == Form::Log || v.0 > 0.0) => v,
            Ok(_) | Err(OdeError::NonFinite { .. }) => {
                h *= 0.25;
                continue;
            }
            Err(e) => return Err(e),
        };
        let scale = settings.rtol * y.abs().max(y5.abs()).max(if form == Form::Log { 1.0 } else { 0.0 }) + 1e-300;
        let err = (y5 - y4).abs() / scale;
        if err <= 1.0 {
            t += h;
            y = y5;
            steps += 1;
            if form == Form::Linear && y > settings.log_switch {
                form = Form::Log;
                y = y.ln();
            }
            let w = if form == Form::Log { y.exp() } else { y };
            if w.is_finite() {
                trace.push((t, w));
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    Ok(OdeResult {
        outcome: OdeOutcome::CapReached {
            t_cap: t,
            ln_w: ln_w(form, y),
        },
        trace,
        steps,
    })
}

/// The reduced ODE of a profile: blow-up time or `CapReached`.
pub fn integrate_reduced_ode(problem: &OdeProblem, t_cap: f64) -> Result<OdeResult> {
    integrate(problem, problem.p, problem.w0, t_cap, OdeSettings::default())
}

/// `W₀ exp(∫_0^t b_-)`.
pub fn w_lower_bound(problem: &OdeProblem, t: f64) -> Result<f64> {
    Ok(problem.w0 * problem.profile.damping_integral(t)?.exp())
}

/// `ln(A(t)+R) - [∫_0^t a/(A+R) ds + ln R]`, the right side by quadrature.
pub fn log_identity_check(profile: &CoefficientProfile, r: f64, t: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(OdeError::InvalidProblem(format!("R must be positive, got {r}")));
    }
    let lhs = profile.ln_big_a_plus(t, r)?;
    let failure = std::cell::RefCell::new(None);
    let integral = adaptive_simpson(
        |s| match (profile.speed(s), profile.big_a(s)) {
            (Ok(a), Ok(big)) => a / (big + r),
            (Err(e), _) | (_, Err(e)) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        t,
        QuadratureSettings::with_tolerance(1e-12),
    );
    if let Some(e) = failure.into_inner() {
        return Err(e.into());
    }
    Ok(lhs - (integral? + r.ln()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn pure_power_blows_up_at_one() {
        let c = ConstantCoefficients { beta: 0.0, gamma: 1.0 };
        let r = integrate(&c, 2.0, 1.0, 10.0, OdeSettings::default()).unwrap();
        assert!(rel(r.blowup_time().unwrap(), 1.0) < 1e-10);
    }

    #[test]
    fn bernoulli_closed_form() {
        let c = ConstantCoefficients { beta: 0.7, gamma: 0.3 };
        let r = integrate(&c, 2.0, 0.05, 1e3, OdeSettings::default()).unwrap();
        let exact = bernoulli_blowup_time(0.7, 0.3, 2.0, 0.05);
        assert!(rel(r.blowup_time().unwrap(), exact) < 1e-9);
    }

    #[test]
    fn cap_is_not_a_global_claim() {
        let c = ConstantCoefficients { beta: 0.0, gamma: 1.0 };
        let r = integrate(&c, 2.0, 1e-3, 10.0, OdeSettings::default()).unwrap();
        assert!(matches!(r.outcome, OdeOutcome::CapReached { .. }));
    }

    #[test]
    fn lower_bound_examples() {
        let flat = CoefficientProfile::power_speed(0.0, SignConvention::Antidamping).unwrap();
        let p = OdeProblem::new(flat, 1, 2.0, 1.0, 0.3).unwrap();
        assert_eq!(w_lower_bound(&p, 5.0).unwrap(), 0.3);

        let ads = CoefficientProfile::anti_de_sitter(1.0, 3).unwrap();
        let p = OdeProblem::new(ads, 3, 2.0, 1.0, 0.3).unwrap();
        assert!(rel(w_lower_bound(&p, 1.0).unwrap(), 0.3 * 3f64.exp()) < 1e-15);

        let fl = CoefficientProfile::flrw_contracting(1.0, 2.0).unwrap();
        let p = OdeProblem::new(fl, 1, 2.0, 1.0, 0.3).unwrap();
        assert!(rel(w_lower_bound(&p, 3.0).unwrap(), 16.0 * 0.3) < 1e-14);
    }

    #[test]
    fn log_identity_examples() {
        let flat = CoefficientProfile::power_speed(0.0, SignConvention::Antidamping).unwrap();
        assert!(log_identity_check(&flat, 1.0, 1.0).unwrap().abs() <= 1e-10);
        let ds = CoefficientProfile::de_sitter(1.0, 1).unwrap();
        assert!(log_identity_check(&ds, 2.0, 5.0).unwrap().abs() <= 1e-9);
        assert_eq!(log_identity_check(&ds, 2.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn damping_profiles_are_rejected() {
        let ds = CoefficientProfile::de_sitter(1.0, 1).unwrap();
        assert!(OdeProblem::new(ds, 1, 2.0, 1.0, 1.0).is_err());
    }
}
