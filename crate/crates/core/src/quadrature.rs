//! Adaptive Simpson quadrature with an explicit work budget.

use thiserror::Error;

/// Tolerance and budget for [`adaptive_simpson`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    /// Absolute error target for the whole interval.
    pub abs_tol: f64,
    /// Upper bound on the number of accepted subintervals.
    pub max_subdivisions: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_subdivisions: 1 << 20,
        }
    }
}

impl QuadratureSettings {
    pub fn with_tolerance(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QuadratureError {
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error(
        "tolerance {tol:e} not met on [{a}, {b}] within {budget} subdivisions (partial estimate {estimate})"
    )]
    BudgetExceeded {
        a: f64,
        b: f64,
        tol: f64,
        budget: usize,
        estimate: f64,
    },
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
}

const INITIAL_PANELS: usize = 16;
const MAX_DEPTH: u32 = 60;

fn eval<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64, QuadratureError> {
    let y = f(x);
    if y.is_finite() {
        Ok(y)
    } else {
        Err(QuadratureError::NonFinite { x })
    }
}

/// Integrates `f` over `[a, b]` (finite bounds, `a <= b` or reversed).
///
/// The interval is first cut into 16 equal panels so narrow features are not
/// skipped by the first Simpson estimate, then each panel is bisected until the
/// classical `|S2 - S1| <= 15 tol` test holds. Accepted panels receive the
/// Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    settings: QuadratureSettings,
) -> Result<f64, QuadratureError> {
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return adaptive_simpson(f, b, a, settings).map(|v| -v);
    }
    let width = (b - a) / INITIAL_PANELS as f64;
    let mut stack = Vec::with_capacity(64);
    for i in (0..INITIAL_PANELS).rev() {
        let lo = a + width * i as f64;
        let hi = if i + 1 == INITIAL_PANELS {
            b
        } else {
            a + width * (i + 1) as f64
        };
        let m = 0.5 * (lo + hi);
        let (fa, fm, fb) = (eval(&f, lo)?, eval(&f, m)?, eval(&f, hi)?);
        stack.push(Panel {
            a: lo,
            b: hi,
            fa,
            fm,
            fb,
            whole: (hi - lo) / 6.0 * (fa + 4.0 * fm + fb),
            tol: settings.abs_tol / INITIAL_PANELS as f64,
            depth: 0,
        });
    }

    let mut total = 0.0;
    let mut accepted = 0usize;
    while let Some(panel) = stack.pop() {
        let m = 0.5 * (panel.a + panel.b);
        let lm = 0.5 * (panel.a + m);
        let rm = 0.5 * (m + panel.b);
        let flm = eval(&f, lm)?;
        let frm = eval(&f, rm)?;
        let left = (m - panel.a) / 6.0 * (panel.fa + 4.0 * flm + panel.fm);
        let right = (panel.b - m) / 6.0 * (panel.fm + 4.0 * frm + panel.fb);
        let delta = left + right - panel.whole;
        let too_narrow = rm <= m || lm <= panel.a || panel.depth >= MAX_DEPTH;
        if delta.abs() <= 15.0 * panel.tol || too_narrow {
            if too_narrow && delta.abs() > 15.0 * panel.tol {
                return Err(QuadratureError::BudgetExceeded {
                    a,
                    b,
                    tol: settings.abs_tol,
                    budget: settings.max_subdivisions,
                    estimate: total,
                });
            }
            total += left + right + delta / 15.0;
            accepted += 1;
            continue;
        }
        if accepted + stack.len() + 2 > settings.max_subdivisions {
            return Err(QuadratureError::BudgetExceeded {
                a,
                b,
                tol: settings.abs_tol,
                budget: settings.max_subdivisions,
                estimate: total,
            });
        }
        let tol = 0.5 * panel.tol;
        let depth = panel.depth + 1;
        stack.push(Panel {
            a: m,
            b: panel.b,
            fa: panel.fm,
            fm: frm,
            fb: panel.fb,
            whole: right,
            tol,
            depth,
        });
        stack.push(Panel {
            a: panel.a,
            b: m,
            fa: panel.fa,
            fm: flm,
            fb: panel.fm,
            whole: left,
            tol,
            depth,
        });
    }
    Ok(total)
}

/// Integrates over `[0, t]` for possibly very large `t` by substituting
/// `t = e^s - 1`, which turns power-law and logarithmic tails into smooth,
/// slowly varying integrands on `[0, ln(1 + t)]`.
pub fn integrate_log_substituted<F: Fn(f64) -> f64>(
    f: F,
    t: f64,
    settings: QuadratureSettings,
) -> Result<f64, QuadratureError> {
    let upper = t.ln_1p();
    adaptive_simpson(
        |s| {
            let x = s.exp_m1();
            f(x) * s.exp()
        },
        0.0,
        upper,
        settings,
    )
}

/// Golden-section search for a maximum of a unimodal `f` on `[lo, hi]`.
/// Returns `(argmax, max)`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iterations = 0;
    while (hi - lo) > tol && iterations < 200 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
        iterations += 1;
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    [(x, fx), (x1, f1), (x2, f2)]
        .into_iter()
        .fold((x, fx), |best, cand| if cand.1 > best.1 { cand } else { best })
}
