//! Regime classification and closed-form lifespan laws.
//!
//! Every report names the statement it relied on. Lifespan laws carry an
//! unspecified constant `C`; numeric evaluation fixes `C = 1`, so only the
//! shape in `ε` is meaningful.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::{
    power_integral, power_integral_inverse, CoefficientError, CoefficientProfile, Family, Integrability,
    SignConvention, TailClass, DEFAULT_EXTREMUM_HORIZON,
};
use crate::pde_solver::Nonlinearity;
use crate::quadrature::{integrate_log_substituted, QuadratureError, QuadratureSettings};

/// Rule identifiers reported in [`RegimeReport::rule_fired`].
pub mod rules {
    pub const GLOBAL: &str = "Thm2.2(1)";
    pub const LOWER_BOUND: &str = "Thm2.2(2)";
    pub const NOT_DISSIPATIVE: &str = "(2.2) fails";
    pub const UNDECIDED_INTEGRABILITY: &str = "Thm2.2 undecided";
    pub const FLRW_ALPHA_GE_1: &str = "§2 FLRW blow-up α≥1";
    pub const FLRW_ALPHA_LT_1_I: &str = "§2 FLRW blow-up α<1 (i)";
    pub const FLRW_ALPHA_LT_1_II: &str = "§2 FLRW blow-up α<1 (ii)";
    pub const FLRW_ALPHA_LT_1_BOTH: &str = "§2 FLRW blow-up α<1 (i)+(ii)";
    pub const OPEN_CRITICAL: &str = "§2 p=p_c open problem";
    pub const THM31_EQUAL: &str = "Thm3.1 β=α";
    pub const THM31_STRICT: &str = "Thm3.1 β>α";
    pub const COR32: &str = "Cor3.2";
    pub const ANTIDAMPING_NONE: &str = "Thm3.1/Cor3.2 not applicable";
    pub const TW7: &str = "§1 TW7";
    pub const TW7_FAILS: &str = "§1 TW7 not satisfied";
    pub const TW1_6: &str = "§1 TW1-6 α>1";
}

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("inconsistent sign convention: {0}")]
    InconsistentForm(String),
    #[error("no rule covers the nonlinearity {0:?}")]
    UnsupportedNonlinearity(Nonlinearity),
    #[error("a^(p-1) is integrable: there is no finite lower bound on the lifespan")]
    NoFiniteBound,
    #[error("no blow-up rule fired (verdict {verdict:?}, rule {rule})")]
    NotBlowUpRegime { verdict: Verdict, rule: String },
    #[error(transparent)]
    Coefficients(#[from] CoefficientError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

pub type Result<T> = std::result::Result<T, TheoryError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    GlobalExistence,
    BlowUp,
    Undetermined,
}

/// Shape of a lifespan bound in `ε`, with the constant set to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum LifespanForm {
    /// `ε^{-exponent}`
    PowerOfEpsilon { exponent: f64 },
    /// `exp(ε^{-exponent})`
    ExpPowerOfEpsilon { exponent: f64 },
    /// `ln(1/ε)`
    LogOfInvEpsilon,
    /// `ε^{-exponent} ln(1/ε)`
    PowerTimesLog { exponent: f64 },
    /// `T^{power} (ln T)^{-log_power} = ε^{-(p-1)}`, solved for `T`.
    ImplicitPowerLog { power: f64, log_power: f64, p: f64 },
    /// `A_{p-1}(T) = ε^{-(p-1)}`, solved for `T`.
    ImplicitViaApm1 { p: f64 },
    /// `∫_0^T (A(t)+R)^{-n(p-1)} dt = ε^{-(p-1)}`, solved for `T`.
    ImplicitViaIntegral {
        n: u32,
        p: f64,
        #[serde(rename = "R")]
        r: f64,
    },
    /// Finite, but no rate is stated.
    Unquantified,
}

/// The unknown constant in front of a law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleConstant {
    Unspecified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifespanLaw {
    #[serde(flatten)]
    pub form: LifespanForm,
    pub constant: ScaleConstant,
}

impl LifespanLaw {
    pub fn new(form: LifespanForm) -> Self {
        Self {
            form,
            constant: ScaleConstant::Unspecified,
        }
    }

    /// The leading power of `1/ε`, when the law has one.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.form {
            LifespanForm::PowerOfEpsilon { exponent } | LifespanForm::PowerTimesLog { exponent } => Some(exponent),
            LifespanForm::ImplicitPowerLog { power, p, .. } => Some((p - 1.0) / power),
            _ => None,
        }
    }

    /// Numeric value with `C = 1`; `None` for [`LifespanForm::Unquantified`].
    pub fn evaluate(&self, profile: &CoefficientProfile, epsilon: f64) -> Result<Option<f64>> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(TheoryError::InvalidInput(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        let inv = 1.0 / epsilon;
        let value = match self.form {
            LifespanForm::PowerOfEpsilon { exponent } => inv.powf(exponent),
            LifespanForm::ExpPowerOfEpsilon { exponent } => inv.powf(exponent).exp(),
            LifespanForm::LogOfInvEpsilon => inv.ln(),
            LifespanForm::PowerTimesLog { exponent } => inv.powf(exponent) * inv.ln(),
            LifespanForm::ImplicitPowerLog { power, log_power, p } => {
                solve_power_log(power, log_power, (p - 1.0) * inv.ln())
            }
            LifespanForm::ImplicitViaApm1 { p } => invert_a_pm1(profile, p, epsilon)?,
            LifespanForm::ImplicitViaIntegral { n, p, r } => invert_reduced_integral(profile, n, p, r, epsilon)?,
            LifespanForm::Unquantified => return Ok(None),
        };
        Ok(Some(value))
    }
}

/// Echo of the classification inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyInputs {
    pub profile: CoefficientProfile,
    pub n: u32,
    pub p: f64,
    pub nonlinearity: Nonlinearity,
    #[serde(rename = "R")]
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub verdict: Verdict,
    pub rule_fired: String,
    pub lifespan_lower: Option<LifespanLaw>,
    pub lifespan_upper: Option<LifespanLaw>,
    pub critical_exponent: Option<f64>,
    pub inputs: ClassifyInputs,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl RegimeReport {
    fn new(inputs: ClassifyInputs, verdict: Verdict, rule: &str) -> Self {
        Self {
            verdict,
            rule_fired: rule.to_string(),
            lifespan_lower: None,
            lifespan_upper: None,
            critical_exponent: None,
            inputs,
            notes: Vec::new(),
        }
    }
}

const REL_EQ: f64 = 1e-9;

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_EQ * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn validate(n: u32, p: f64, r: f64) -> Result<()> {
    if n < 1 {
        return Err(TheoryError::InvalidInput("n must be at least 1".into()));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(TheoryError::InvalidInput(format!("p must exceed 1, got {p}")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(TheoryError::InvalidInput(format!("R must be positive, got {r}")));
    }
    Ok(())
}

/// `1 + 1/α` for expanding FLRW profiles with `μ = α`, when that exponent is
/// known to separate the regimes (`α ≥ 1`, or `n = 1`).
pub fn critical_exponent(profile: &CoefficientProfile, n: u32) -> Option<f64> {
    match *profile.family() {
        Family::FlrwExpanding { alpha, mu } if rel_eq(alpha, mu) && (alpha >= 1.0 || n == 1) => {
            Some(1.0 + 1.0 / alpha)
        }
        _ => None,
    }
}

/// Closed-form shape of the bound `A_{p-1}(T) ≥ C ε^{-(p-1)}`.
fn lower_law(profile: &CoefficientProfile, p: f64) -> LifespanLaw {
    let q = p - 1.0;
    let form = match profile.power_exponent() {
        Some(k) => {
            let kq1 = 1.0 + k * q;
            if kq1 > 0.0 && !rel_eq(kq1, 0.0) {
                LifespanForm::PowerOfEpsilon { exponent: q / kq1 }
            } else {
                LifespanForm::ExpPowerOfEpsilon { exponent: q }
            }
        }
        None => match profile.family() {
            Family::AntiDeSitter { .. } => LifespanForm::LogOfInvEpsilon,
            _ => LifespanForm::ImplicitViaApm1 { p },
        },
    };
    LifespanLaw::new(form)
}

/// Decides the regime of `(profile, n, p, F)` with data supported in `|x| ≤ R`.
pub fn classify(
    profile: &CoefficientProfile,
    n: u32,
    p: f64,
    nonlinearity: Nonlinearity,
    r: f64,
) -> Result<RegimeReport> {
    validate(n, p, r)?;
    let inputs = ClassifyInputs {
        profile: profile.clone(),
        n,
        p,
        nonlinearity,
        r,
    };
    let mut report = match nonlinearity {
        Nonlinearity::None => return Err(TheoryError::UnsupportedNonlinearity(nonlinearity)),
        Nonlinearity::AbsUP | Nonlinearity::AbsGradUP => classify_tw(profile, n, p, nonlinearity, inputs)?,
        Nonlinearity::AbsUtP | Nonlinearity::SignedUtP => match profile.sign() {
            SignConvention::Damping => classify_damping(profile, n, p, nonlinearity, inputs)?,
            SignConvention::Antidamping => classify_antidamping(profile, n, p, nonlinearity, r, inputs)?,
        },
    };
    if report.critical_exponent.is_none() && profile.sign() == SignConvention::Damping {
        report.critical_exponent = critical_exponent(profile, n);
    }
    debug_assert!(report.verdict != Verdict::BlowUp || report.lifespan_upper.is_some());
    debug_assert!(report.verdict != Verdict::GlobalExistence || report.lifespan_upper.is_none());
    Ok(report)
}

/// `β = limsup ln A(t) / ln t`, where it is known in closed form.
fn growth_index(profile: &CoefficientProfile) -> Option<f64> {
    match profile.family() {
        Family::DeSitter { .. } => Some(0.0),
        Family::AntiDeSitter { .. } => Some(f64::INFINITY),
        Family::Custom(c) => match c.speed.tail() {
            TailClass::Constant => Some(1.0),
            _ => None,
        },
        _ => {
            let k = profile.power_exponent().unwrap();
            Some((k + 1.0).max(0.0))
        }
    }
}

/// `0 < C_1 ≤ b ≤ C_2` and `limsup |ḃ|/b² < 1` for the damping coefficient.
fn tw7_damping_bounds(profile: &CoefficientProfile) -> std::result::Result<(), String> {
    if profile.sign() != SignConvention::Damping {
        return Err("the first-order coefficient is antidamping, not bounded below by a positive constant".into());
    }
    match profile.family() {
        Family::DeSitter { .. } => Ok(()),
        Family::FlrwExpanding { .. } => Err("b = μ/(t+1) is not bounded below by a positive constant".into()),
        Family::PowerSpeed { .. } => Err("b ≡ 0".into()),
        Family::Custom(c) => {
            let min = c.damping.values().iter().cloned().fold(f64::INFINITY, f64::min);
            if min <= 0.0 {
                return Err(format!("tabulated b reaches {min} ≤ 0"));
            }
            match c.damping.tail() {
                TailClass::Constant => Ok(()),
                TailClass::Growing => Err("b has a growing tail; no upper bound C_2".into()),
                TailClass::Decaying => Err("b has a decaying tail; no lower bound C_1".into()),
            }
        }
        Family::AntiDeSitter { .. } | Family::FlrwContracting { .. } => unreachable!(),
    }
}

fn classify_tw(
    profile: &CoefficientProfile,
    n: u32,
    p: f64,
    nonlinearity: Nonlinearity,
    inputs: ClassifyInputs,
) -> Result<RegimeReport> {
    let bounds = tw7_damping_bounds(profile);
    let beta = growth_index(profile);
    if let (Ok(()), Some(beta)) = (&bounds, beta) {
        let margin = match nonlinearity {
            Nonlinearity::AbsUP => 1.0 - n as f64 * beta * (p - 1.0),
            _ => 1.0 - beta * (n as f64 * (p - 1.0) + p),
        };
        if margin > 0.0 {
            let mut r = RegimeReport::new(inputs, Verdict::BlowUp, rules::TW7);
            r.lifespan_upper = Some(LifespanLaw::new(LifespanForm::Unquantified));
            r.notes.push(format!("limsup ln A/ln t = {beta}, exponent margin {margin}"));
            return Ok(r);
        }
    }
    if let Family::FlrwExpanding { alpha, .. } = *profile.family() {
        if alpha > 1.0 {
            let mut r = RegimeReport::new(inputs, Verdict::BlowUp, rules::TW1_6);
            r.lifespan_upper = Some(LifespanLaw::new(LifespanForm::Unquantified));
            r.notes.push("blow-up can occur for every p > 1".into());
            return Ok(r);
        }
    }
    let mut r = RegimeReport::new(inputs, Verdict::Undetermined, rules::TW7_FAILS);
    match (bounds, beta) {
        (Err(why), _) => r.notes.push(why),
        (Ok(()), None) => r.notes.push("limsup ln A/ln t is unknown for this profile".into()),
        (Ok(()), Some(beta)) => r.notes.push(format!("exponent condition fails with limsup ln A/ln t = {beta}")),
    }
    Ok(r)
}

fn classify_damping(
    profile: &CoefficientProfile,
    n: u32,
    p: f64,
    nonlinearity: Nonlinearity,
    inputs: ClassifyInputs,
) -> Result<RegimeReport> {
    let dissipative = profile.check_dissipative(DEFAULT_EXTREMUM_HORIZON, 4097)?.holds;
    let integrable = profile.a_pm1_integrable(p);

    if dissipative && integrable == Integrability::Integrable {
        return Ok(RegimeReport::new(inputs, Verdict::GlobalExistence, rules::GLOBAL));
    }
    let lower = (dissipative && integrable == Integrability::Divergent).then(|| lower_law(profile, p));

    if let (Family::FlrwExpanding { alpha, mu }, Nonlinearity::AbsUtP) = (profile.family(), nonlinearity) {
        if let Some(mut r) = flrw_blowup(*alpha, *mu, n, p, inputs.clone()) {
            r.lifespan_lower = lower;
            return Ok(r);
        }
        if let Some(pc) = critical_exponent(profile, n) {
            if rel_eq(p, pc) && *alpha >= 1.0 {
                let mut r = RegimeReport::new(inputs, Verdict::Undetermined, rules::OPEN_CRITICAL);
                r.lifespan_lower = lower;
                r.critical_exponent = Some(pc);
                return Ok(r);
            }
        }
    }

    let mut r = match (dissipative, integrability_rule(integrable)) {
        (false, _) => RegimeReport::new(inputs, Verdict::Undetermined, rules::NOT_DISSIPATIVE),
        (true, rule) => RegimeReport::new(inputs, Verdict::Undetermined, rule),
    };
    r.lifespan_lower = lower;
    if nonlinearity == Nonlinearity::SignedUtP {
        r.notes.push("blow-up statements assume F = |u_t|^p".into());
    }
    Ok(r)
}

fn integrability_rule(i: Integrability) -> &'static str {
    match i {
        Integrability::Divergent => rules::LOWER_BOUND,
        _ => rules::UNDECIDED_INTEGRABILITY,
    }
}

/// Blow-up ranges for `(a, b) = ((t+1)^{-α}, μ/(t+1))` with `F = |u_t|^p`.
fn flrw_blowup(alpha: f64, mu: f64, n: u32, p: f64, inputs: ClassifyInputs) -> Option<RegimeReport> {
    let q = p - 1.0;
    let nf = n as f64;
    if alpha >= 1.0 {
        if !(mu * q < 1.0) || rel_eq(mu * q, 1.0) {
            return None;
        }
        let upper = if alpha == 1.0 {
            LifespanForm::ImplicitPowerLog {
                power: 1.0 - mu * q,
                log_power: nf * q,
                p,
            }
        } else {
            LifespanForm::PowerOfEpsilon {
                exponent: q / (1.0 - mu * q),
            }
        };
        let mut r = RegimeReport::new(inputs, Verdict::BlowUp, rules::FLRW_ALPHA_GE_1);
        r.lifespan_upper = Some(LifespanLaw::new(upper));
        if alpha > 1.0 && rel_eq(alpha, mu) {
            r.notes
                .push(format!("sharp: T_ε ∼ ε^(-{})", q / (1.0 - alpha * q)));
        }
        return Some(r);
    }
    let bound_i = 1.0 + 2.0 / ((1.0 - alpha) * (nf - 1.0) + mu + alpha);
    let bound_ii = 1.0 + 1.0 / (nf * (1.0 - alpha) + mu);
    let fires_i = p <= bound_i || rel_eq(p, bound_i);
    let fires_ii = p < bound_ii && !rel_eq(p, bound_ii);
    let rule = match (fires_i, fires_ii) {
        (true, true) => rules::FLRW_ALPHA_LT_1_BOTH,
        (true, false) => rules::FLRW_ALPHA_LT_1_I,
        (false, true) => rules::FLRW_ALPHA_LT_1_II,
        (false, false) => return None,
    };
    let mut r = RegimeReport::new(inputs, Verdict::BlowUp, rule);
    if n == 1 && rel_eq(alpha, mu) {
        let denom = 1.0 - alpha * q;
        let form = if rel_eq(denom + 1.0, 1.0) || denom <= 0.0 {
            LifespanForm::ExpPowerOfEpsilon { exponent: q }
        } else {
            LifespanForm::PowerOfEpsilon { exponent: q / denom }
        };
        r.lifespan_upper = Some(LifespanLaw::new(form));
        r.critical_exponent = Some(1.0 + 1.0 / alpha);
        r.notes.push("sharp: upper and lower bounds share the same shape".into());
    } else {
        r.lifespan_upper = Some(LifespanLaw::new(LifespanForm::Unquantified));
        r.notes.push("the blow-up range is stated without a lifespan rate here".into());
    }
    Some(r)
}

/// Whether `A(t)^{-n(p-1)}` fails to be integrable at infinity.
fn reduced_integral_diverges(profile: &CoefficientProfile, n: u32, p: f64) -> Option<bool> {
    let m = n as f64 * (p - 1.0);
    match profile.family() {
        Family::AntiDeSitter { .. } => Some(false),
        Family::Custom(c) => match c.speed.tail() {
            TailClass::Constant => Some(m <= 1.0),
            _ => None,
        },
        _ => {
            let k = profile.power_exponent()?;
            if k <= -1.0 {
                Some(true)
            } else {
                let e = m * (k + 1.0);
                Some(e < 1.0 || rel_eq(e, 1.0))
            }
        }
    }
}

fn classify_antidamping(
    profile: &CoefficientProfile,
    n: u32,
    p: f64,
    nonlinearity: Nonlinearity,
    r: f64,
    inputs: ClassifyInputs,
) -> Result<RegimeReport> {
    if nonlinearity != Nonlinearity::AbsUtP {
        let mut rep = RegimeReport::new(inputs, Verdict::Undetermined, rules::ANTIDAMPING_NONE);
        rep.notes.push("the averaging argument needs F = |u_t|^p".into());
        return Ok(rep);
    }
    let mut notes = Vec::new();
    if !profile.is_undamped() {
        match (profile.alpha_sup(n, r, DEFAULT_EXTREMUM_HORIZON), profile.beta_inf(f64::INFINITY)) {
            (Ok(sup), Ok(inf)) if inf > 0.0 => {
                let (alpha, beta) = (sup.value, inf);
                if rel_eq(alpha, beta) {
                    let mut rep = RegimeReport::new(inputs, Verdict::BlowUp, rules::THM31_EQUAL);
                    rep.lifespan_upper = Some(LifespanLaw::new(LifespanForm::PowerTimesLog { exponent: p - 1.0 }));
                    rep.notes.push(format!("sup n a/(A+R) = {alpha}, inf b_- = {beta}"));
                    return Ok(rep);
                }
                if alpha < beta {
                    let mut rep = RegimeReport::new(inputs, Verdict::BlowUp, rules::THM31_STRICT);
                    rep.lifespan_upper = Some(LifespanLaw::new(LifespanForm::LogOfInvEpsilon));
                    rep.notes.push(format!("sup n a/(A+R) = {alpha}, inf b_- = {beta}"));
                    return Ok(rep);
                }
                notes.push(format!("sup n a/(A+R) = {alpha} exceeds inf b_- = {beta}"));
            }
            (Ok(_), Ok(inf)) => notes.push(format!("inf b_- = {inf} is not positive")),
            (Err(e), _) | (_, Err(e)) => notes.push(format!("extremum unavailable: {e}")),
        }
    }
    match reduced_integral_diverges(profile, n, p) {
        Some(true) => {
            let mut rep = RegimeReport::new(inputs, Verdict::BlowUp, rules::COR32);
            let m = n as f64 * (p - 1.0);
            let form = match profile.power_exponent() {
                Some(k) if k > -1.0 => {
                    let e = m * (k + 1.0);
                    if rel_eq(e, 1.0) {
                        LifespanForm::ExpPowerOfEpsilon { exponent: p - 1.0 }
                    } else {
                        LifespanForm::PowerOfEpsilon {
                            exponent: (p - 1.0) / (1.0 - e),
                        }
                    }
                }
                _ => LifespanForm::ImplicitViaIntegral { n, p, r },
            };
            rep.lifespan_upper = Some(LifespanLaw::new(form));
            rep.notes = notes;
            Ok(rep)
        }
        verdict => {
            let mut rep = RegimeReport::new(inputs, Verdict::Undetermined, rules::ANTIDAMPING_NONE);
            notes.push(match verdict {
                Some(_) => "A^(-n(p-1)) is integrable".into(),
                None => "integrability of A^(-n(p-1)) is unknown for this table".into(),
            });
            rep.notes = notes;
            Ok(rep)
        }
    }
}

/// Lower lifespan bound from `A_{p-1}(T) = ε^{-(p-1)}` (`C = 1`).
pub fn predicted_lifespan_lower(profile: &CoefficientProfile, n: u32, p: f64, epsilon: f64) -> Result<f64> {
    validate(n, p, 1.0)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(TheoryError::InvalidInput(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if profile.a_pm1_integrable(p) == Integrability::Integrable {
        return Err(TheoryError::NoFiniteBound);
    }
    invert_a_pm1(profile, p, epsilon)
}

fn invert_a_pm1(profile: &CoefficientProfile, p: f64, epsilon: f64) -> Result<f64> {
    let q = p - 1.0;
    let target = epsilon.powf(-q);
    match *profile.family() {
        Family::AntiDeSitter { h, .. } => Ok((q * h * target).ln_1p() / (q * h)),
        Family::DeSitter { h, .. } => {
            let arg = q * h * target;
            if arg >= 1.0 {
                Err(TheoryError::NoFiniteBound)
            } else {
                Ok(-(-arg).ln_1p() / (q * h))
            }
        }
        Family::Custom(_) => invert_a_pm1_by_bisection(profile, p, epsilon),
        _ => {
            let k = profile.power_exponent().unwrap() * q;
            let t = power_integral_inverse(k, target);
            if t.is_infinite() {
                Err(TheoryError::NoFiniteBound)
            } else {
                Ok(t)
            }
        }
    }
}

/// Solves `A_{p-1}(T) = ε^{-(p-1)}` by bisection on `ln(1+T)` to relative
/// tolerance 1e-12, independent of any closed-form inverse.
pub fn invert_a_pm1_by_bisection(profile: &CoefficientProfile, p: f64, epsilon: f64) -> Result<f64> {
    let target = epsilon.powf(-(p - 1.0));
    bisect_increasing(|t| Ok(profile.big_a_pm1(t, p)?), target)
}

/// Solves `∫_0^T (A+R)^{-n(p-1)} dt = ε^{-(p-1)}`.
fn invert_reduced_integral(profile: &CoefficientProfile, n: u32, p: f64, r: f64, epsilon: f64) -> Result<f64> {
    let target = epsilon.powf(-(p - 1.0));
    let m = n as f64 * (p - 1.0);
    bisect_increasing(|t| reduced_integral(profile, m, r, t), target)
}

/// `∫_0^t (A(s)+R)^{-m} ds` with the logarithmic substitution.
pub fn reduced_integral(profile: &CoefficientProfile, m: f64, r: f64, t: f64) -> Result<f64> {
    if let Some(k) = profile.power_exponent() {
        if k == 0.0 && r == 1.0 {
            // A + R = t + 1.
            return Ok(power_integral(-m, t));
        }
    }
    let failure = std::cell::RefCell::new(None);
    let v = integrate_log_substituted(
        |s| match profile.ln_big_a_plus(s, r) {
            Ok(l) => (-m * l).exp(),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        t,
        QuadratureSettings::with_tolerance(1e-10),
    );
    if let Some(e) = failure.into_inner() {
        return Err(e.into());
    }
    Ok(v?)
}

fn bisect_increasing<G: Fn(f64) -> Result<f64>>(g: G, target: f64) -> Result<f64> {
    // Work in s = ln(1 + T) so the bracket spans any magnitude.
    let from_s = |s: f64| s.exp_m1();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    loop {
        let v = g(from_s(hi))?;
        if v >= target {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > 709.0 {
            return Err(TheoryError::NoFiniteBound);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(from_s(mid))? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi.max(1e-300) {
            break;
        }
    }
    Ok(from_s(0.5 * (lo + hi)))
}

/// Root of `power·L - log_power·ln L = y` with `L = ln T` on the increasing
/// branch `L ≥ max(1, log_power/power)`.
fn solve_power_log(power: f64, log_power: f64, y: f64) -> f64 {
    let g = |l: f64| power * l - log_power * l.ln();
    let mut lo = (log_power / power).max(1.0);
    if g(lo) >= y {
        return lo.exp();
    }
    let mut hi = 2.0 * lo;
    while g(hi) < y {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// An upper lifespan law together with its value at `ε` (`C = 1`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperBound {
    pub law: LifespanLaw,
    pub rule_fired: String,
    /// `None` when the law has no stated rate.
    pub eval_at: Option<f64>,
}

pub fn predicted_lifespan_upper(
    profile: &CoefficientProfile,
    n: u32,
    p: f64,
    epsilon: f64,
    r: f64,
) -> Result<UpperBound> {
    let report = classify(profile, n, p, Nonlinearity::AbsUtP, r)?;
    let law = match (report.verdict, report.lifespan_upper) {
        (Verdict::BlowUp, Some(law)) => law,
        (verdict, _) => {
            return Err(TheoryError::NotBlowUpRegime {
                verdict,
                rule: report.rule_fired,
            })
        }
    };
    let eval_at = law.evaluate(profile, epsilon)?;
    Ok(UpperBound {
        law,
        rule_fired: report.rule_fired,
        eval_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::Table;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn de_sitter_is_global() {
        let p = CoefficientProfile::de_sitter(1.0, 3).unwrap();
        let r = classify(&p, 3, 1.2, Nonlinearity::AbsUtP, 1.0).unwrap();
        assert_eq!(r.verdict, Verdict::GlobalExistence);
        assert_eq!(r.rule_fired, rules::GLOBAL);
        assert!(r.lifespan_upper.is_none());
    }

    #[test]
    fn flrw_alpha_one_blows_up_with_log_law() {
        let p = CoefficientProfile::flrw_expanding(1.0, 1.0).unwrap();
        let r = classify(&p, 3, 1.5, Nonlinearity::AbsUtP, 1.0).unwrap();
        assert_eq!(r.verdict, Verdict::BlowUp);
        assert_eq!(r.rule_fired, rules::FLRW_ALPHA_GE_1);
        let lower = r.lifespan_lower.unwrap();
        assert_eq!(lower.form, LifespanForm::PowerOfEpsilon { exponent: 1.0 });
        assert!(matches!(
            r.lifespan_upper.unwrap().form,
            LifespanForm::ImplicitPowerLog { .. }
        ));
        assert_eq!(r.critical_exponent, Some(2.0));
    }

    #[test]
    fn anti_de_sitter_equal_case() {
        let p = CoefficientProfile::anti_de_sitter(1.0, 2).unwrap();
        let r = classify(&p, 2, 2.0, Nonlinearity::AbsUtP, 1.0).unwrap();
        assert_eq!(r.rule_fired, rules::THM31_EQUAL);
        assert_eq!(
            r.lifespan_upper.unwrap().form,
            LifespanForm::PowerTimesLog { exponent: 1.0 }
        );
    }

    #[test]
    fn flrw_at_critical_exponent_is_open() {
        let p = CoefficientProfile::flrw_expanding(2.0, 2.0).unwrap();
        let r = classify(&p, 1, 1.5, Nonlinearity::AbsUtP, 1.0).unwrap();
        assert_eq!(r.verdict, Verdict::Undetermined);
        assert_eq!(r.rule_fired, rules::OPEN_CRITICAL);
        assert_eq!(
            r.lifespan_lower.unwrap().form,
            LifespanForm::ExpPowerOfEpsilon { exponent: 0.5 }
        );
    }

    #[test]
    fn critical_exponent_examples() {
        let a = CoefficientProfile::flrw_expanding(2.0, 2.0).unwrap();
        assert_eq!(critical_exponent(&a, 3), Some(1.5));
        let b = CoefficientProfile::flrw_expanding(0.5, 0.5).unwrap();
        assert_eq!(critical_exponent(&b, 1), Some(3.0));
        let c = CoefficientProfile::flrw_expanding(1.0, 2.0).unwrap();
        assert_eq!(critical_exponent(&c, 2), None);
    }

    #[test]
    fn lower_lifespan_examples() {
        let unit = CoefficientProfile::power_speed(0.0, SignConvention::Damping).unwrap();
        assert!(close(predicted_lifespan_lower(&unit, 1, 2.0, 0.1).unwrap(), 10.0, 1e-14));

        let fl = CoefficientProfile::flrw_expanding(1.0, 1.0).unwrap();
        let t = predicted_lifespan_lower(&fl, 1, 2.0, 0.1).unwrap();
        assert!(close(t, 10f64.exp_m1(), 1e-12));
        let tb = invert_a_pm1_by_bisection(&fl, 2.0, 0.1).unwrap();
        assert!(close(tb, t, 1e-9));

        let half = CoefficientProfile::flrw_expanding(0.5, 0.5).unwrap();
        let t = predicted_lifespan_lower(&half, 1, 1.5, 0.01).unwrap();
        let expected = (1.0 + 0.75 * 0.01f64.powf(-0.5)).powf(4.0 / 3.0) - 1.0;
        assert!(close(t, expected, 1e-12));

        let ds = CoefficientProfile::de_sitter(1.0, 1).unwrap();
        assert!(matches!(
            predicted_lifespan_lower(&ds, 1, 2.0, 0.1),
            Err(TheoryError::NoFiniteBound)
        ));
    }

    #[test]
    fn upper_lifespan_examples() {
        let ads = CoefficientProfile::anti_de_sitter(1.0, 1).unwrap();
        let u = predicted_lifespan_upper(&ads, 1, 2.0, 0.01, 1.0).unwrap();
        assert!(close(u.eval_at.unwrap(), 100.0 * 100f64.ln(), 1e-14));

        let flat = CoefficientProfile::power_speed(0.0, SignConvention::Antidamping).unwrap();
        let u = predicted_lifespan_upper(&flat, 1, 1.5, 0.01, 1.0).unwrap();
        assert_eq!(u.rule_fired, rules::COR32);
        assert!(close(u.eval_at.unwrap(), 100.0, 1e-12));

        let lin = CoefficientProfile::power_speed(1.0, SignConvention::Antidamping).unwrap();
        let u = predicted_lifespan_upper(&lin, 1, 1.5, 0.1, 1.0).unwrap();
        assert!(close(u.eval_at.unwrap(), 10f64.sqrt().exp(), 1e-12));

        let ds = CoefficientProfile::de_sitter(1.0, 1).unwrap();
        assert!(matches!(
            predicted_lifespan_upper(&ds, 1, 2.0, 0.1, 1.0),
            Err(TheoryError::NotBlowUpRegime { .. })
        ));
    }

    #[test]
    fn strict_branch_for_custom_table() {
        let a = Table::sample(|_| 1.0, 10.0, 1, TailClass::Constant).unwrap();
        let b = Table::sample(|_| 2.0, 10.0, 1, TailClass::Constant).unwrap();
        let p = CoefficientProfile::custom(a, b, SignConvention::Antidamping).unwrap();
        let r = classify(&p, 1, 2.0, Nonlinearity::AbsUtP, 1.0).unwrap();
        assert_eq!(r.rule_fired, rules::THM31_STRICT);
    }

    #[test]
    fn implicit_integral_law_matches_closed_form() {
        // a ≡ 1, R = 1, n(p-1) = 2: ∫(t+1)^{-2} < 1 so small ε has no solution,
        // but n(p-1) = 1/2 gives 2(√(T+1) - 1) = ε^{-(p-1)}.
        let flat = CoefficientProfile::power_speed(0.0, SignConvention::Antidamping).unwrap();
        let law = LifespanLaw::new(LifespanForm::ImplicitViaIntegral { n: 1, p: 1.5, r: 1.0 });
        let t = law.evaluate(&flat, 0.01).unwrap().unwrap();
        let expected = (1.0 + 0.5 * 10.0f64).powi(2) - 1.0;
        assert!(close(t, expected, 1e-9));
    }

    #[test]
    fn power_log_solver_inverts() {
        let (a, b) = (0.5, 1.5);
        let t = solve_power_log(a, b, 20.0);
        let l = t.ln();
        assert!(close(a * l - b * l.ln(), 20.0, 1e-12));
    }

    #[test]
    fn report_round_trips_through_json() {
        let p = CoefficientProfile::flrw_expanding(1.0, 1.0).unwrap();
        let r = classify(&p, 3, 1.5, Nonlinearity::AbsUtP, 1.0).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        let back: RegimeReport = serde_json::from_str(&json).unwrap();
        assert_eq!(r, back);
    }
}
