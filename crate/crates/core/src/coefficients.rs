//! Coefficient families `a(t)`, `b(t)` for
//!
//! ```text
//! damping form:      u_tt - a(t)^2 Δu + b(t) u_t   = F
//! antidamping form:  u_tt - a(t)^2 Δu              = b_-(t) u_t + F
//! ```
//!
//! together with the integrals `A(t) = ∫_0^t a` and `A_{p-1}(t) = ∫_0^t a^{p-1}`
//! and the two extremal quantities that decide the antidamping blow-up regime:
//! `sup_t n a(t) / (A(t) + R)` and `inf_t b_-(t)`.
//!
//! Named families use closed forms everywhere. Tabulated (custom) profiles use
//! linear interpolation and a declared tail class that says how the table
//! continues past its last sample.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{adaptive_simpson, golden_section_max, QuadratureError, QuadratureSettings};

#[derive(Debug, Error)]
pub enum CoefficientError {
    #[error("propagation speed must be positive, got a({t}) = {value}")]
    NonPositiveSpeed { t: f64, value: f64 },
    #[error("t = {t} is outside the profile domain: {reason}")]
    DomainError { t: f64, reason: String },
    #[error("quadrature failed: {0}")]
    QuadratureFailure(#[from] QuadratureError),
    #[error("extremum search did not converge: {0}")]
    Unconverged(String),
    #[error("invalid coefficient profile: {0}")]
    InvalidProfile(String),
    #[error("inconsistent sign convention: {0}")]
    InconsistentForm(String),
    #[error("cannot read coefficient table: {0}")]
    TableIo(String),
}

pub type Result<T> = std::result::Result<T, CoefficientError>;

/// Which side of the equation the first-order term lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// `+ b(t) u_t` on the left-hand side.
    Damping,
    /// `b_-(t) u_t` on the right-hand side.
    Antidamping,
}

/// How a tabulated coefficient behaves after its last sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailClass {
    Decaying,
    Constant,
    Growing,
}

/// Samples `(t_i, v_i)` with `t_0 = 0`, strictly increasing times and linear
/// interpolation in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct Table {
    times: Vec<f64>,
    values: Vec<f64>,
    tail: TailClass,
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTable {
    times: Vec<f64>,
    values: Vec<f64>,
    tail: TailClass,
}

impl TryFrom<RawTable> for Table {
    type Error = CoefficientError;
    fn try_from(raw: RawTable) -> Result<Self> {
        Table::new(raw.times, raw.values, raw.tail)
    }
}

impl From<Table> for RawTable {
    fn from(t: Table) -> Self {
        RawTable {
            times: t.times,
            values: t.values,
            tail: t.tail,
        }
    }
}

impl Table {
    pub fn new(times: Vec<f64>, values: Vec<f64>, tail: TailClass) -> Result<Self> {
        if times.len() != values.len() {
            return Err(CoefficientError::InvalidProfile(format!(
                "table has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(CoefficientError::InvalidProfile(
                "table needs at least two samples".into(),
            ));
        }
        if times[0] != 0.0 {
            return Err(CoefficientError::InvalidProfile(format!(
                "table must start at t = 0, starts at {}",
                times[0]
            )));
        }
        if let Some(w) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(CoefficientError::InvalidProfile(format!(
                "table times must be strictly increasing (row {})",
                w + 2
            )));
        }
        if let Some(i) = times
            .iter()
            .zip(&values)
            .position(|(t, v)| !t.is_finite() || !v.is_finite())
        {
            return Err(CoefficientError::InvalidProfile(format!(
                "table row {} is not finite",
                i + 1
            )));
        }
        let mut cumulative = Vec::with_capacity(times.len());
        cumulative.push(0.0);
        for i in 1..times.len() {
            let seg = 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
            cumulative.push(cumulative[i - 1] + seg);
        }
        Ok(Self {
            times,
            values,
            tail,
            cumulative,
        })
    }

    /// Tabulates `f` on a uniform grid of `[0, t_end]`.
    pub fn sample<F: Fn(f64) -> f64>(f: F, t_end: f64, intervals: usize, tail: TailClass) -> Result<Self> {
        let times: Vec<f64> = (0..=intervals)
            .map(|i| t_end * i as f64 / intervals as f64)
            .collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values, tail)
    }

    /// Reads a two-column `t,value` CSV; a header row is optional.
    pub fn from_csv_reader<R: Read>(reader: R, tail: TailClass) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| CoefficientError::TableIo(e.to_string()))?;
            if record.len() != 2 {
                return Err(CoefficientError::TableIo(format!(
                    "row {} has {} columns, expected 2",
                    i + 1,
                    record.len()
                )));
            }
            let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
            match parsed {
                (Ok(t), Ok(v)) => {
                    times.push(t);
                    values.push(v);
                }
                _ if i == 0 => continue,
                _ => {
                    return Err(CoefficientError::TableIo(format!(
                        "row {} is not numeric",
                        i + 1
                    )))
                }
            }
        }
        Self::new(times, values, tail)
    }

    pub fn from_csv_path(path: &Path, tail: TailClass) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| CoefficientError::TableIo(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file, tail)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail(&self) -> TailClass {
        self.tail
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn last_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t < 0.0 || t.is_nan() {
            return Err(CoefficientError::DomainError {
                t,
                reason: "time must be non-negative".into(),
            });
        }
        if t > self.t_end() && self.tail != TailClass::Constant {
            return Err(CoefficientError::DomainError {
                t,
                reason: format!(
                    "beyond the last tabulated time {} and the tail is not constant",
                    self.t_end()
                ),
            });
        }
        Ok(())
    }

    /// Index `i` with `times[i] <= t < times[i+1]`, clamped to the last segment.
    fn segment(&self, t: f64) -> usize {
        let k = self.times.partition_point(|&x| x <= t);
        k.saturating_sub(1).min(self.times.len() - 2)
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        if t >= self.t_end() {
            return Ok(self.last_value());
        }
        let i = self.segment(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let w = (t - t0) / (t1 - t0);
        Ok(self.values[i] + w * (self.values[i + 1] - self.values[i]))
    }

    /// Exact integral of the interpolant over `[0, t]`.
    pub fn integral(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        if t >= self.t_end() {
            let n = self.times.len() - 1;
            return Ok(self.cumulative[n] + (t - self.t_end()) * self.last_value());
        }
        let i = self.segment(t);
        let v = self.eval(t)?;
        Ok(self.cumulative[i] + 0.5 * (t - self.times[i]) * (self.values[i] + v))
    }

    /// Exact `∫_0^t v(s)^q ds` for a positive interpolant.
    fn power_integral(&self, t: f64, q: f64) -> Result<f64> {
        self.check_time(t)?;
        let seg = |t0: f64, t1: f64, v0: f64, v1: f64| -> f64 {
            if t1 <= t0 {
                return 0.0;
            }
            let slope = (v1 - v0) / (t1 - t0);
            let rel = (v1 - v0).abs() / v0.abs().max(v1.abs());
            if rel < 1e-9 {
                // Nearly flat segment: midpoint rule is exact to rounding.
                (t1 - t0) * (0.5 * (v0 + v1)).powf(q)
            } else if (q + 1.0).abs() < 1e-14 {
                (v1 / v0).ln() / slope
            } else {
                (v1.powf(q + 1.0) - v0.powf(q + 1.0)) / (slope * (q + 1.0))
            }
        };
        let mut total = 0.0;
        for i in 0..self.times.len() - 1 {
            let (t0, t1) = (self.times[i], self.times[i + 1]);
            if t0 >= t {
                break;
            }
            let hi = t1.min(t);
            let vhi = if hi == t1 { self.values[i + 1] } else { self.eval(hi)? };
            total += seg(t0, hi, self.values[i], vhi);
        }
        if t > self.t_end() {
            total += (t - self.t_end()) * self.last_value().powf(q);
        }
        Ok(total)
    }
}

/// A custom profile: tabulated speed `a` and tabulated first-order coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomCoefficients {
    pub speed: Table,
    pub damping: Table,
}

/// The coefficient families the laboratory knows about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `a = (t+1)^{-alpha}`, `b = mu/(t+1)`.
    FlrwExpanding {
        #[serde(alias = "alpha_exp")]
        alpha: f64,
        mu: f64,
    },
    /// `a = e^{-Ht}`, `b = nH`.
    DeSitter {
        #[serde(rename = "H")]
        h: f64,
        n: u32,
    },
    /// `a = e^{Ht}`, `b_- = nH`.
    AntiDeSitter {
        #[serde(rename = "H")]
        h: f64,
        n: u32,
    },
    /// `a = (t+1)^{alpha}`, `b_- = mu/(t+1)`.
    FlrwContracting {
        #[serde(alias = "alpha_exp")]
        alpha: f64,
        mu: f64,
    },
    /// `a = (t+1)^{alpha}`, no first-order term (generalized Tricomi).
    PowerSpeed {
        #[serde(alias = "alpha_exp")]
        alpha: f64,
    },
    Custom(CustomCoefficients),
}

/// Pointwise coefficient values. `b` is `b(t)` for damping profiles and
/// `b_-(t)` for antidamping ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientValues {
    pub a: f64,
    pub a_dot: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DissipativityCheck {
    pub holds: bool,
    pub first_violation: Option<f64>,
}

/// Result of the `sup_t n a/(A+R)` search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedRatioSup {
    pub value: f64,
    /// `f64::INFINITY` when the supremum is only reached as `t → ∞`.
    pub attained_near: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrability {
    Integrable,
    Divergent,
    Unknown,
}

pub const DEFAULT_EXTREMUM_HORIZON: f64 = 1e4;
const EXTREMUM_SAMPLES: usize = 4096;
const GOLDEN_TOL: f64 = 1e-9;
const TAIL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientProfile {
    #[serde(flatten)]
    family: Family,
    sign: SignConvention,
}

impl CoefficientProfile {
    /// Builds a profile, checking parameter ranges and that the convention
    /// matches the family (only `PowerSpeed` and `Custom` accept either).
    pub fn new(family: Family, sign: SignConvention) -> Result<Self> {
        let invalid = |msg: String| Err(CoefficientError::InvalidProfile(msg));
        match &family {
            Family::FlrwExpanding { alpha, mu } | Family::FlrwContracting { alpha, mu } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return invalid(format!("alpha must be positive and finite, got {alpha}"));
                }
                if !(*mu >= 0.0 && mu.is_finite()) {
                    return invalid(format!("mu must be non-negative and finite, got {mu}"));
                }
            }
            Family::DeSitter { h, n } | Family::AntiDeSitter { h, n } => {
                if !(*h > 0.0 && h.is_finite()) {
                    return invalid(format!("H must be positive and finite, got {h}"));
                }
                if *n < 1 {
                    return invalid("n must be at least 1".into());
                }
            }
            Family::PowerSpeed { alpha } => {
                if !alpha.is_finite() {
                    return invalid(format!("alpha must be finite, got {alpha}"));
                }
            }
            Family::Custom(c) => {
                if let Some(i) = c.speed.values.iter().position(|&v| v <= 0.0) {
                    return Err(CoefficientError::NonPositiveSpeed {
                        t: c.speed.times[i],
                        value: c.speed.values[i],
                    });
                }
                if sign == SignConvention::Antidamping {
                    if let Some(i) = c.damping.values.iter().position(|&v| v <= 0.0) {
                        return invalid(format!(
                            "antidamping coefficient must be positive, got b_-({}) = {}",
                            c.damping.times[i], c.damping.values[i]
                        ));
                    }
                }
            }
        }
        let required = match family {
            Family::FlrwExpanding { .. } | Family::DeSitter { .. } => Some(SignConvention::Damping),
            Family::AntiDeSitter { .. } | Family::FlrwContracting { .. } => Some(SignConvention::Antidamping),
            Family::PowerSpeed { .. } | Family::Custom(_) => None,
        };
        if let Some(req) = required {
            if req != sign {
                return Err(CoefficientError::InconsistentForm(format!(
                    "{} profiles use the {:?} convention",
                    family.name(),
                    req
                )));
            }
        }
        Ok(Self { family, sign })
    }

    pub fn flrw_expanding(alpha: f64, mu: f64) -> Result<Self> {
        Self::new(Family::FlrwExpanding { alpha, mu }, SignConvention::Damping)
    }

    pub fn de_sitter(h: f64, n: u32) -> Result<Self> {
        Self::new(Family::DeSitter { h, n }, SignConvention::Damping)
    }

    pub fn anti_de_sitter(h: f64, n: u32) -> Result<Self> {
        Self::new(Family::AntiDeSitter { h, n }, SignConvention::Antidamping)
    }

    pub fn flrw_contracting(alpha: f64, mu: f64) -> Result<Self> {
        Self::new(Family::FlrwContracting { alpha, mu }, SignConvention::Antidamping)
    }

    pub fn power_speed(alpha: f64, sign: SignConvention) -> Result<Self> {
        Self::new(Family::PowerSpeed { alpha }, sign)
    }

    pub fn custom(speed: Table, damping: Table, sign: SignConvention) -> Result<Self> {
        Self::new(Family::Custom(CustomCoefficients { speed, damping }), sign)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn sign(&self) -> SignConvention {
        self.sign
    }

    /// `true` when the first-order coefficient vanishes identically.
    pub fn is_undamped(&self) -> bool {
        matches!(self.family, Family::PowerSpeed { .. })
    }

    /// Exponent `k` for the power families `a = (t+1)^k`.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.family {
            Family::FlrwExpanding { alpha, .. } => Some(-alpha),
            Family::FlrwContracting { alpha, .. } => Some(alpha),
            Family::PowerSpeed { alpha } => Some(alpha),
            _ => None,
        }
    }

    fn check_t(t: f64) -> Result<()> {
        if t < 0.0 || t.is_nan() {
            Err(CoefficientError::DomainError {
                t,
                reason: "time must be non-negative".into(),
            })
        } else {
            Ok(())
        }
    }

    /// Values of `a`, `ȧ` and `b` (or `b_-`) at `t`.
    pub fn eval(&self, t: f64) -> Result<CoefficientValues> {
        Self::check_t(t)?;
        let v = match &self.family {
            Family::FlrwExpanding { alpha, mu } => {
                let a = (t + 1.0).powf(-alpha);
                CoefficientValues {
                    a,
                    a_dot: -alpha * a / (t + 1.0),
                    b: mu / (t + 1.0),
                }
            }
            Family::FlrwContracting { alpha, mu } => {
                let a = (t + 1.0).powf(*alpha);
                CoefficientValues {
                    a,
                    a_dot: alpha * a / (t + 1.0),
                    b: mu / (t + 1.0),
                }
            }
            Family::PowerSpeed { alpha } => {
                let a = (t + 1.0).powf(*alpha);
                CoefficientValues {
                    a,
                    a_dot: alpha * a / (t + 1.0),
                    b: 0.0,
                }
            }
            Family::DeSitter { h, n } => {
                let a = (-h * t).exp();
                CoefficientValues {
                    a,
                    a_dot: -h * a,
                    b: *n as f64 * h,
                }
            }
            Family::AntiDeSitter { h, n } => {
                let a = (h * t).exp();
                CoefficientValues {
                    a,
                    a_dot: h * a,
                    b: *n as f64 * h,
                }
            }
            Family::Custom(c) => {
                let a = c.speed.eval(t)?;
                if a <= 0.0 {
                    return Err(CoefficientError::NonPositiveSpeed { t, value: a });
                }
                CoefficientValues {
                    a,
                    a_dot: custom_derivative(&c.speed, t)?,
                    b: c.damping.eval(t)?,
                }
            }
        };
        Ok(v)
    }

    pub fn speed(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)?.a)
    }

    /// Coefficient `c(t)` in `v_t = a²Δu - c(t) v + F`: `b` for damping
    /// profiles, `-b_-` for antidamping ones.
    pub fn friction(&self, t: f64) -> Result<f64> {
        let b = self.eval(t)?.b;
        Ok(match self.sign {
            SignConvention::Damping => b,
            SignConvention::Antidamping => -b,
        })
    }

    /// `ln a(t)`, finite even where `a` itself over- or underflows.
    pub fn ln_speed(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        Ok(match &self.family {
            Family::DeSitter { h, .. } => -h * t,
            Family::AntiDeSitter { h, .. } => h * t,
            Family::Custom(c) => c.speed.eval(t)?.ln(),
            _ => self.power_exponent().unwrap() * t.ln_1p(),
        })
    }

    /// `A(t) = ∫_0^t a(s) ds`. Accepts `t = ∞`.
    pub fn big_a(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        Ok(match &self.family {
            Family::DeSitter { h, .. } => -(-h * t).exp_m1() / h,
            Family::AntiDeSitter { h, .. } => (h * t).exp_m1() / h,
            Family::Custom(c) => c.speed.integral(t)?,
            _ => power_integral(self.power_exponent().unwrap(), t),
        })
    }

    /// `A(t)` by adaptive Simpson on the pointwise speed; the independent
    /// route used to cross-check the closed forms.
    pub fn big_a_by_quadrature(&self, t: f64, settings: QuadratureSettings) -> Result<f64> {
        Self::check_t(t)?;
        let failure = std::cell::RefCell::new(None);
        let v = adaptive_simpson(
            |s| match self.speed(s) {
                Ok(a) => a,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            },
            0.0,
            t,
            settings,
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(v?)
    }

    /// `A_{p-1}(t) = ∫_0^t a(s)^{p-1} ds`. Accepts `t = ∞`.
    pub fn big_a_pm1(&self, t: f64, p: f64) -> Result<f64> {
        Self::check_t(t)?;
        check_exponent(p)?;
        let q = p - 1.0;
        Ok(match &self.family {
            Family::DeSitter { h, .. } => -(-q * h * t).exp_m1() / (q * h),
            Family::AntiDeSitter { h, .. } => (q * h * t).exp_m1() / (q * h),
            Family::Custom(c) => c.speed.power_integral(t, q)?,
            _ => power_integral(self.power_exponent().unwrap() * q, t),
        })
    }

    pub fn big_a_pm1_by_quadrature(&self, t: f64, p: f64, settings: QuadratureSettings) -> Result<f64> {
        Self::check_t(t)?;
        check_exponent(p)?;
        let failure = std::cell::RefCell::new(None);
        let v = adaptive_simpson(
            |s| match self.speed(s) {
                Ok(a) => a.powf(p - 1.0),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            },
            0.0,
            t,
            settings,
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(v?)
    }

    /// `ln(A(t) + R)` computed without forming `A` when it would overflow.
    pub fn ln_big_a_plus(&self, t: f64, r: f64) -> Result<f64> {
        Self::check_t(t)?;
        Ok(match &self.family {
            Family::AntiDeSitter { h, .. } if h * t > 30.0 => {
                let ht = h * t;
                ht - h.ln() + ((r - 1.0 / h) * h * (-ht).exp()).ln_1p()
            }
            Family::Custom(_) | Family::DeSitter { .. } | Family::AntiDeSitter { .. } => {
                (self.big_a(t)? + r).ln()
            }
            _ => {
                let k = self.power_exponent().unwrap();
                let kp1 = k + 1.0;
                let l = t.ln_1p();
                if kp1 > 0.0 && kp1 * l > 600.0 {
                    kp1 * l - kp1.ln() + ((r - 1.0 / kp1) * kp1 * (-kp1 * l).exp()).ln_1p()
                } else {
                    (power_integral(k, t) + r).ln()
                }
            }
        })
    }

    /// `∫_0^t b(s) ds` (or `∫ b_-`).
    pub fn damping_integral(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        Ok(match &self.family {
            Family::FlrwExpanding { mu, .. } | Family::FlrwContracting { mu, .. } => mu * t.ln_1p(),
            Family::DeSitter { h, n } | Family::AntiDeSitter { h, n } => *n as f64 * h * t,
            Family::PowerSpeed { .. } => 0.0,
            Family::Custom(c) => c.damping.integral(t)?,
        })
    }

    /// `n a(t) / (A(t) + R)`, evaluated in log space.
    pub fn speed_ratio(&self, t: f64, n: u32, r: f64) -> Result<f64> {
        if let Family::AntiDeSitter { h, .. } = self.family {
            return Ok(n as f64 * h / (1.0 + (h * r - 1.0) * (-h * t).exp()));
        }
        Ok(n as f64 * (self.ln_speed(t)? - self.ln_big_a_plus(t, r)?).exp())
    }

    /// Samples `ȧ + a b ≥ 0` on a uniform grid and combines it with the
    /// analytic verdict for the named families.
    pub fn check_dissipative(&self, t_max: f64, samples: usize) -> Result<DissipativityCheck> {
        if self.sign != SignConvention::Damping {
            return Err(CoefficientError::InconsistentForm(
                "the dissipativity condition applies to damping-form profiles".into(),
            ));
        }
        if samples < 2 {
            return Err(CoefficientError::InvalidProfile(
                "need at least two samples".into(),
            ));
        }
        let t_max = match &self.family {
            Family::Custom(c) if c.speed.tail != TailClass::Constant || c.damping.tail != TailClass::Constant => {
                t_max.min(c.speed.t_end().min(c.damping.t_end()))
            }
            _ => t_max,
        };
        let mut first_violation = None;
        for i in 0..samples {
            let t = t_max * i as f64 / (samples - 1) as f64;
            let v = self.eval(t)?;
            let ab = v.a * v.b;
            let value = v.a_dot + ab;
            if value < -1e-12 * (v.a_dot.abs() + ab.abs()) {
                first_violation = Some(t);
                break;
            }
        }
        let analytic = match self.family {
            Family::FlrwExpanding { alpha, mu } => Some(mu >= alpha),
            Family::DeSitter { .. } => Some(true),
            Family::PowerSpeed { alpha } => Some(alpha >= 0.0),
            _ => None,
        };
        let holds = analytic.unwrap_or(true) && first_violation.is_none();
        Ok(DissipativityCheck {
            holds,
            first_violation,
        })
    }

    fn require_antidamping(&self, what: &str) -> Result<()> {
        if self.sign != SignConvention::Antidamping {
            return Err(CoefficientError::InconsistentForm(format!(
                "{what} applies to antidamping-form profiles"
            )));
        }
        Ok(())
    }

    /// Horizon actually searchable: tables without a constant tail stop at
    /// their last sample.
    fn search_horizon(&self, t_max: f64) -> f64 {
        match &self.family {
            Family::Custom(c) => {
                let mut h = t_max;
                if c.speed.tail != TailClass::Constant {
                    h = h.min(c.speed.t_end());
                }
                if c.damping.tail != TailClass::Constant {
                    h = h.min(c.damping.t_end());
                }
                h
            }
            _ => t_max,
        }
    }

    /// `sup_{t ≥ 0} n a(t) / (A(t) + R)`: log-spaced sampling on `[0, t_max]`,
    /// golden-section refinement of each interior local maximum, then the
    /// `t → ∞` limit.
    pub fn alpha_sup(&self, n: u32, r: f64, t_max: f64) -> Result<SpeedRatioSup> {
        self.require_antidamping("the speed-ratio supremum")?;
        if !(r > 0.0) {
            return Err(CoefficientError::InvalidProfile(format!(
                "support radius must be positive, got {r}"
            )));
        }
        let horizon = self.search_horizon(t_max);
        let f = |t: f64| self.speed_ratio(t, n, r).unwrap_or(f64::NEG_INFINITY);
        // Log-spaced so that long horizons still resolve early maxima.
        let top = horizon.ln_1p();
        let mut grid: Vec<f64> = (0..EXTREMUM_SAMPLES)
            .map(|i| (top * i as f64 / (EXTREMUM_SAMPLES - 1) as f64).exp_m1().min(horizon))
            .collect();
        if let Family::Custom(c) = &self.family {
            grid.extend(c.speed.times.iter().copied().filter(|&t| t <= horizon));
            grid.sort_by(f64::total_cmp);
            grid.dedup();
        }
        let values: Vec<f64> = grid
            .iter()
            .map(|&t| self.speed_ratio(t, n, r))
            .collect::<Result<_>>()?;
        let (mut best_t, mut best) = (grid[0], values[0]);
        for i in 0..values.len() {
            let left = if i == 0 { f64::NEG_INFINITY } else { values[i - 1] };
            let right = values.get(i + 1).copied().unwrap_or(f64::NEG_INFINITY);
            if values[i] >= left && values[i] >= right {
                let (t, v) = if i > 0 && i + 1 < values.len() {
                    golden_section_max(f, grid[i - 1], grid[i + 1], GOLDEN_TOL)
                } else {
                    (grid[i], values[i])
                };
                let (t, v) = if v >= values[i] { (t, v) } else { (grid[i], values[i]) };
                if v > best {
                    best = v;
                    best_t = t;
                }
            }
        }
        let tail = match &self.family {
            Family::AntiDeSitter { h, .. } => n as f64 * h,
            Family::Custom(c) => match c.speed.tail {
                // Nonincreasing speed and increasing A: the ratio only falls
                // after the table ends.
                TailClass::Constant | TailClass::Decaying => values[values.len() - 1],
                TailClass::Growing => {
                    return Err(CoefficientError::Unconverged(
                        "speed table has a growing tail; the supremum of n a/(A+R) beyond it is unknown".into(),
                    ))
                }
            },
            _ => 0.0,
        };
        if tail >= best {
            Ok(SpeedRatioSup {
                value: tail,
                attained_near: f64::INFINITY,
                converged: tail <= best + TAIL_TOL,
            })
        } else {
            Ok(SpeedRatioSup {
                value: best,
                attained_near: best_t,
                converged: true,
            })
        }
    }

    /// `inf_{t ≥ 0} b_-(t)` including the `t → ∞` limit.
    pub fn beta_inf(&self, t_max: f64) -> Result<f64> {
        self.require_antidamping("the antidamping infimum")?;
        match &self.family {
            Family::AntiDeSitter { h, n } => Ok(*n as f64 * h),
            Family::FlrwContracting { .. } | Family::PowerSpeed { .. } => Ok(0.0),
            Family::Custom(c) => {
                let table = &c.damping;
                let horizon = if t_max.is_finite() { t_max } else { table.t_end() };
                let mut best = table
                    .times
                    .iter()
                    .zip(&table.values)
                    .filter(|(t, _)| **t <= horizon)
                    .map(|(_, v)| *v)
                    .fold(f64::INFINITY, f64::min);
                if horizon < table.t_end() {
                    best = best.min(table.eval(horizon)?);
                }
                match table.tail {
                    TailClass::Constant | TailClass::Growing => {}
                    TailClass::Decaying => {
                        return Err(CoefficientError::Unconverged(
                            "antidamping table has a decaying tail; its infimum is unknown".into(),
                        ))
                    }
                }
                Ok(best)
            }
            Family::FlrwExpanding { .. } | Family::DeSitter { .. } => unreachable!(),
        }
    }

    /// Whether `a^{p-1} ∈ L¹([0, ∞))`.
    pub fn a_pm1_integrable(&self, p: f64) -> Integrability {
        let q = p - 1.0;
        match &self.family {
            Family::DeSitter { .. } => Integrability::Integrable,
            Family::AntiDeSitter { .. } | Family::FlrwContracting { .. } => Integrability::Divergent,
            Family::FlrwExpanding { alpha, .. } => {
                if alpha * q > 1.0 {
                    Integrability::Integrable
                } else {
                    Integrability::Divergent
                }
            }
            Family::PowerSpeed { alpha } => {
                if alpha * q < -1.0 {
                    Integrability::Integrable
                } else {
                    Integrability::Divergent
                }
            }
            Family::Custom(c) => match c.speed.tail {
                TailClass::Constant | TailClass::Growing => Integrability::Divergent,
                TailClass::Decaying => Integrability::Unknown,
            },
        }
    }
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::FlrwExpanding { .. } => "flrw_expanding",
            Family::DeSitter { .. } => "de_sitter",
            Family::AntiDeSitter { .. } => "anti_de_sitter",
            Family::FlrwContracting { .. } => "flrw_contracting",
            Family::PowerSpeed { .. } => "power_speed",
            Family::Custom(_) => "custom",
        }
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(CoefficientError::InvalidProfile(format!(
            "nonlinearity exponent must exceed 1, got {p}"
        )))
    }
}

/// Centered difference with relative step 1e-6 (one-sided near `t = 0` and
/// at the end of a table without a constant tail).
fn custom_derivative(table: &Table, t: f64) -> Result<f64> {
    let h = 1e-6 * t.abs().max(1.0);
    let hi_ok = t + h <= table.t_end() || table.tail == TailClass::Constant;
    match (t - h >= 0.0, hi_ok) {
        (true, true) => Ok((table.eval(t + h)? - table.eval(t - h)?) / (2.0 * h)),
        (false, true) => Ok((table.eval(t + h)? - table.eval(t)?) / h),
        (true, false) => Ok((table.eval(t)? - table.eval(t - h)?) / h),
        (false, false) => Err(CoefficientError::DomainError {
            t,
            reason: "table too short for a derivative".into(),
        }),
    }
}

/// `∫_0^t (s+1)^k ds`, including `t = ∞`.
pub fn power_integral(k: f64, t: f64) -> f64 {
    let kp1 = k + 1.0;
    if t.is_infinite() {
        return if kp1 < 0.0 { -1.0 / kp1 } else { f64::INFINITY };
    }
    if kp1 == 0.0 {
        t.ln_1p()
    } else {
        (kp1 * t.ln_1p()).exp_m1() / kp1
    }
}

/// Solves `power_integral(k, T) = y` for `T`; `∞` when `y` is beyond the
/// supremum of the integral.
pub fn power_integral_inverse(k: f64, y: f64) -> f64 {
    let kp1 = k + 1.0;
    if kp1 == 0.0 {
        return y.exp_m1();
    }
    let arg = kp1 * y;
    if arg <= -1.0 {
        return f64::INFINITY;
    }
    (arg.ln_1p() / kp1).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn eval_named_families() {
        let ds = CoefficientProfile::de_sitter(1.0, 3).unwrap().eval(0.0).unwrap();
        assert_eq!((ds.a, ds.a_dot, ds.b), (1.0, -1.0, 3.0));

        let fl = CoefficientProfile::flrw_expanding(1.0, 2.0).unwrap().eval(1.0).unwrap();
        assert_eq!((fl.a, fl.a_dot, fl.b), (0.5, -0.25, 1.0));

        let ads = CoefficientProfile::anti_de_sitter(2.0, 1)
            .unwrap()
            .eval(2f64.ln() / 2.0)
            .unwrap();
        assert!(close(ads.a, 2.0, 1e-15));
        assert!(close(ads.a_dot, 4.0, 1e-15));
        assert_eq!(ads.b, 2.0);
    }

    #[test]
    fn negative_time_is_a_domain_error() {
        let p = CoefficientProfile::de_sitter(1.0, 1).unwrap();
        assert!(matches!(p.eval(-1.0), Err(CoefficientError::DomainError { .. })));
        assert!(matches!(p.big_a(-0.5), Err(CoefficientError::DomainError { .. })));
    }

    #[test]
    fn custom_table_rejects_non_positive_speed() {
        let a = Table::new(vec![0.0, 1.0], vec![1.0, 0.0], TailClass::Constant).unwrap();
        let b = Table::new(vec![0.0, 1.0], vec![1.0, 1.0], TailClass::Constant).unwrap();
        let err = CoefficientProfile::custom(a, b, SignConvention::Damping).unwrap_err();
        assert!(matches!(err, CoefficientError::NonPositiveSpeed { t, .. } if t == 1.0));
    }

    #[test]
    fn custom_derivative_uses_finite_differences() {
        let a = Table::sample(|t| 1.0 + 2.0 * t, 10.0, 10, TailClass::Growing).unwrap();
        let b = Table::sample(|_| 1.0, 10.0, 1, TailClass::Constant).unwrap();
        let p = CoefficientProfile::custom(a, b, SignConvention::Damping).unwrap();
        for t in [0.0, 0.35, 5.0, 10.0] {
            assert!(close(p.eval(t).unwrap().a_dot, 2.0, 1e-8), "t = {t}");
        }
        assert!(p.eval(10.5).is_err());
    }

    #[test]
    fn big_a_examples() {
        let unit = CoefficientProfile::power_speed(0.0, SignConvention::Antidamping).unwrap();
        assert_eq!(unit.big_a(5.0).unwrap(), 5.0);
        let fl = CoefficientProfile::flrw_expanding(2.0, 0.0).unwrap();
        assert!(close(fl.big_a(1.0).unwrap(), 0.5, 1e-15));
        let ds = CoefficientProfile::de_sitter(1.0, 1).unwrap();
        assert!(close(ds.big_a(1.0).unwrap(), 1.0 - (-1f64).exp(), 1e-15));
    }

    #[test]
    fn big_a_pm1_examples() {
        let unit = CoefficientProfile::power_speed(0.0, SignConvention::Damping).unwrap();
        assert_eq!(unit.big_a_pm1(3.0, 2.0).unwrap(), 3.0);
        let fl = CoefficientProfile::flrw_expanding(1.0, 1.0).unwrap();
        assert!(close(fl.big_a_pm1(1f64.exp() - 1.0, 2.0).unwrap(), 1.0, 1e-15));
        let ds = CoefficientProfile::de_sitter(1.0, 1).unwrap();
        assert_eq!(ds.big_a_pm1(f64::INFINITY, 3.0).unwrap(), 0.5);
    }

    #[test]
    fn dissipativity_examples() {
        let ok = CoefficientProfile::flrw_expanding(1.0, 2.0).unwrap();
        let c = ok.check_dissipative(100.0, 1001).unwrap();
        assert!(c.holds && c.first_violation.is_none());

        let ds = CoefficientProfile::de_sitter(1.0, 2).unwrap();
        assert!(ds.check_dissipative(100.0, 1001).unwrap().holds);

        let bad = CoefficientProfile::flrw_expanding(2.0, 1.0).unwrap();
        let c = bad.check_dissipative(10.0, 101).unwrap();
        assert!(!c.holds);
        assert_eq!(c.first_violation, Some(0.0));

        let ads = CoefficientProfile::anti_de_sitter(1.0, 1).unwrap();
        assert!(matches!(
            ads.check_dissipative(10.0, 10),
            Err(CoefficientError::InconsistentForm(_))
        ));
    }

    #[test]
    fn alpha_sup_examples() {
        let ads = CoefficientProfile::anti_de_sitter(1.0, 3).unwrap();
        let s = ads.alpha_sup(3, 1.0, DEFAULT_EXTREMUM_HORIZON).unwrap();
        assert!(close(s.value, 3.0, 1e-12) && s.converged);

        let unit = CoefficientProfile::power_speed(0.0, SignConvention::Antidamping).unwrap();
        let s = unit.alpha_sup(2, 1.0, DEFAULT_EXTREMUM_HORIZON).unwrap();
        assert_eq!(s.value, 2.0);
        assert_eq!(s.attained_near, 0.0);

        let ads2 = CoefficientProfile::anti_de_sitter(1.0, 2).unwrap();
        let s = ads2.alpha_sup(2, 2.0, DEFAULT_EXTREMUM_HORIZON).unwrap();
        assert!(close(s.value, 2.0, 1e-12));
        assert!(s.attained_near.is_infinite());
        assert!(s.converged);
    }

    #[test]
    fn alpha_sup_with_growing_custom_tail_is_unconverged() {
        let a = Table::sample(f64::exp, 5.0, 500, TailClass::Growing).unwrap();
        let b = Table::sample(|_| 2.0, 5.0, 1, TailClass::Constant).unwrap();
        let p = CoefficientProfile::custom(a, b, SignConvention::Antidamping).unwrap();
        assert!(matches!(
            p.alpha_sup(1, 1.0, 100.0),
            Err(CoefficientError::Unconverged(_))
        ));
    }

    #[test]
    fn beta_inf_examples() {
        assert_eq!(CoefficientProfile::anti_de_sitter(2.0, 1).unwrap().beta_inf(1e4).unwrap(), 2.0);
        assert_eq!(
            CoefficientProfile::flrw_contracting(1.0, 3.0)
                .unwrap()
                .beta_inf(f64::INFINITY)
                .unwrap(),
            0.0
        );
        let a = Table::sample(|_| 1.0, 40.0, 1, TailClass::Constant).unwrap();
        let b = Table::sample(|t| 2.0 + (-t).exp(), 40.0, 4000, TailClass::Constant).unwrap();
        let p = CoefficientProfile::custom(a, b, SignConvention::Antidamping).unwrap();
        assert!(close(p.beta_inf(f64::INFINITY).unwrap(), 2.0, 1e-12));
    }

    #[test]
    fn integrability_examples() {
        assert_eq!(
            CoefficientProfile::de_sitter(1.0, 3).unwrap().a_pm1_integrable(1.01),
            Integrability::Integrable
        );
        assert_eq!(
            CoefficientProfile::flrw_expanding(1.0, 1.0).unwrap().a_pm1_integrable(2.0),
            Integrability::Divergent
        );
        assert_eq!(
            CoefficientProfile::flrw_expanding(2.0, 2.0).unwrap().a_pm1_integrable(2.0),
            Integrability::Integrable
        );
    }

    #[test]
    fn convention_must_match_family() {
        let err = CoefficientProfile::new(Family::DeSitter { h: 1.0, n: 1 }, SignConvention::Antidamping);
        assert!(matches!(err, Err(CoefficientError::InconsistentForm(_))));
    }

    #[test]
    fn ln_big_a_plus_survives_overflow() {
        let ads = CoefficientProfile::anti_de_sitter(1.0, 1).unwrap();
        let l = ads.ln_big_a_plus(2000.0, 1.0).unwrap();
        assert!(close(l, 2000.0, 1e-14));
        let pw = CoefficientProfile::power_speed(1.0, SignConvention::Antidamping).unwrap();
        // A = ((t+1)^2 - 1)/2, so ln(A + 1) ≈ 2 ln(t+1) - ln 2 for huge t.
        let t = 1e250;
        let l = pw.ln_big_a_plus(t, 1.0).unwrap();
        assert!(close(l, 2.0 * t.ln() - 2f64.ln(), 1e-14));
        let small = pw.ln_big_a_plus(3.0, 1.0).unwrap();
        assert!(close(small, (7.5f64 + 1.0).ln(), 1e-14));
    }

    #[test]
    fn table_serde_round_trip_validates() {
        let t = Table::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 3.0], TailClass::Growing).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: Table = serde_json::from_str(&json).unwrap();
        assert_eq!(t, back);
        let bad = r#"{"times":[1.0,2.0],"values":[1.0,1.0],"tail":"constant"}"#;
        assert!(serde_json::from_str::<Table>(bad).is_err());
    }

    #[test]
    fn table_csv_with_and_without_header() {
        let with = "t,value\n0,1\n1,2\n";
        let without = "0,1\n1,2\n";
        let a = Table::from_csv_reader(with.as_bytes(), TailClass::Constant).unwrap();
        let b = Table::from_csv_reader(without.as_bytes(), TailClass::Constant).unwrap();
        assert_eq!(a, b);
        assert!(Table::from_csv_reader("0,1\n0,2\n".as_bytes(), TailClass::Constant).is_err());
    }

    #[test]
    fn power_integral_inverse_round_trips() {
        for k in [-2.0, -1.0, -0.25, 0.0, 1.5] {
            let t = 7.25;
            let y = power_integral(k, t);
            assert!(close(power_integral_inverse(k, y), t, 1e-12), "k = {k}");
        }
        assert!(power_integral_inverse(-2.0, 1.5).is_infinite());
    }
}
