//! Binomial tail machinery for certifying risk estimates.
//!
//! The upper confidence bound treats the per-sample statistic `V in [0, v_max]`
//! as a scaled Bernoulli and inverts a two-part tail bound. With
//! `a = mean / v_max` and
//!
//! ```text
//! h(a; q) = a ln(a/q) + (1 - a) ln((1 - a)/(1 - q))        (KL divergence)
//! g(a; q, n) = min( exp(-n h(a; q)),  e * BinCdf(ceil(n a); n, q) )
//! ```
//!
//! the bound is `ucb = v_max * sup { q : g(a; q, n) >= alpha }`. The `g`
//! function is non-increasing in `q` on `q >= a`, so the sup is found by
//! bisection on `[a, 1 - 1e-12]` to an absolute tolerance of 1e-9 in `q`
//! (the upper bracket end is returned, which errs on the conservative side).
//! At `mean = 0` the sup has the closed form `1 - alpha^(1/n)`, a useful
//! cross-check. The binomial CDF is summed in log space with compensated
//! accumulation, keeping it within 1e-12 relative error through `n = 10^4`.
//!
//! [`conformal_quantile`] is the usual split-conformal order statistic: the
//! `ceil((1 - alpha)(l + 1))`-th smallest of `l` calibration values, clamped
//! to the maximum when the level reaches 1.

use thiserror::Error;

/// Errors from the bound computations.
#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    /// An argument is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// The operation needs at least one value.
    #[error("empty input")]
    EmptyInput,
}

/// Ceiling with a snap: values within 1e-9 of an integer round to it instead
/// of ceiling past it. Guards `ceil(n * a)`-style indices against the float
/// drift of `a = s/n` products (e.g. `0.9 * 20 = 18.000000000000004`).
pub(crate) fn ceil_snap(x: f64) -> f64 {
    let nearest = x.round();
    if (x - nearest).abs() < 1e-9 {
        nearest
    } else {
        x.ceil()
    }
}

/// Bernoulli KL divergence `h(a; q)` with the `0 ln 0 = 0` conventions at
/// `a = 0` and `a = 1`. Requires `a` in `[0, 1]` and `q` in `(0, 1)`.
pub fn kl_bernoulli(a: f64, q: f64) -> Result<f64, BoundsError> {
    if !(0.0..=1.0).contains(&a) {
        return Err(BoundsError::Domain(format!("a = {a} outside [0, 1]")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(BoundsError::Domain(format!("q = {q} outside (0, 1)")));
    }
    Ok(kl_raw(a, q))
}

/// [`kl_bernoulli`] without domain checks, for the bisection hot path.
#[inline]
fn kl_raw(a: f64, q: f64) -> f64 {
    let left = if a == 0.0 { 0.0 } else { a * (a / q).ln() };
    let right = if a == 1.0 {
        0.0
    } else {
        (1.0 - a) * ((1.0 - a) / (1.0 - q)).ln()
    };
    left + right
}

/// `P(X <= k)` for `X ~ Binomial(n, p)`, summed in log space.
///
/// Degenerate `p` is handled directly (`p <= 0` puts all mass at zero,
/// `p >= 1` at `n`), and `k >= n` returns exactly 1.
pub fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0; // k < n here
    }
    let ln_p = p.ln();
    let ln_1p = ln_one_minus(p);
    // log term for i successes: logC(n, i) + i ln p + (n - i) ln(1 - p).
    // logC accumulates with Neumaier compensation; the mantissa sum of the
    // streaming log-sum-exp is compensated as well.
    let mut log_choose = Compensated::default(); // logC(n, 0) = 0
    let mut max_log = f64::NEG_INFINITY;
    let mut mantissa = Compensated::default();
    for i in 0..=k {
        if i > 0 {
            log_choose.add(((n - i + 1) as f64).ln() - (i as f64).ln());
        }
        let log_term = log_choose.value() + i as f64 * ln_p + (n - i) as f64 * ln_1p;
        if log_term <= max_log {
            mantissa.add((log_term - max_log).exp());
        } else {
            let scale = (max_log - log_term).exp(); // 0 when max_log = -inf
            mantissa.scale(scale);
            mantissa.add(1.0);
            max_log = log_term;
        }
    }
    ((max_log + mantissa.value().ln()).exp()).min(1.0)
}

/// Neumaier-compensated accumulator.
#[derive(Default)]
struct Compensated {
    sum: f64,
    correction: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.correction += (self.sum - t) + v;
        } else {
            self.correction += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn scale(&mut self, factor: f64) {
        self.sum *= factor;
        self.correction *= factor;
    }

    fn value(&self) -> f64 {
        self.sum + self.correction
    }
}

/// `ln(1 - p)`, via `ln_1p` where `1 - p` would lose digits.
#[inline]
fn ln_one_minus(p: f64) -> f64 {
    if p < 0.5 {
        (-p).ln_1p()
    } else {
        (1.0 - p).ln()
    }
}

/// The tail function `g(a; q, n)`: minimum of the Chernoff–KL term and the
/// scaled exact binomial tail. Non-increasing in `q` for `q >= a`.
pub fn bentkus_g(a: f64, n: u64, q: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&a), "a = {a} outside [0, 1]");
    debug_assert!(q > 0.0 && q < 1.0, "q = {q} outside (0, 1)");
    let kl_term = (-(n as f64) * kl_raw(a, q)).exp();
    let k = ceil_snap(n as f64 * a) as u64;
    let cdf_term = std::f64::consts::E * binomial_cdf(k, n, q);
    kl_term.min(cdf_term)
}

/// Validated inputs for [`bentkus_ucb`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcbInput {
    mean: f64,
    n: u64,
    alpha: f64,
    v_max: f64,
}

impl UcbInput {
    /// Requires `n >= 1`, `alpha` in `(0, 1)`, `v_max > 0`, and
    /// `0 <= mean <= v_max`. A mean exceeding `v_max` by at most 1e-9
    /// relative (summation drift when every value sits at the cap) is
    /// clamped rather than rejected.
    pub fn new(mean: f64, n: u64, alpha: f64, v_max: f64) -> Result<Self, BoundsError> {
        if n == 0 {
            return Err(BoundsError::Domain("n must be >= 1".to_string()));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(BoundsError::Domain(format!("alpha = {alpha} outside (0, 1)")));
        }
        if !(v_max > 0.0) || !v_max.is_finite() {
            return Err(BoundsError::Domain(format!("v_max = {v_max} must be positive")));
        }
        if !(mean >= 0.0) || !mean.is_finite() {
            return Err(BoundsError::Domain(format!("mean = {mean} must be >= 0")));
        }
        if mean > v_max * (1.0 + 1e-9) {
            return Err(BoundsError::Domain(format!(
                "mean = {mean} exceeds v_max = {v_max}"
            )));
        }
        Ok(UcbInput {
            mean: mean.min(v_max),
            n,
            alpha,
            v_max,
        })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }
}

/// Upper confidence bound for the mean of a `[0, v_max]`-valued statistic:
/// `v_max * sup { q : g(mean/v_max; q, n) >= alpha }`, found by bisection.
/// Never below `mean`; equals `v_max` when even `q = 1 - 1e-12` satisfies
/// the tail condition; equals `v_max * (1 - alpha^(1/n))` at `mean = 0`.
pub fn bentkus_ucb(input: &UcbInput) -> f64 {
    let a = input.mean / input.v_max;
    if a >= 1.0 {
        return input.v_max;
    }
    let mut lo = a; // g(a; a, n) = 1 >= alpha
    let mut hi = 1.0 - 1e-12;
    if bentkus_g(a, input.n, hi) >= input.alpha {
        return input.v_max;
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if bentkus_g(a, input.n, mid) >= input.alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    input.v_max * hi
}

/// Split-conformal upper quantile: the `ceil((1 - alpha)(l + 1))`-th order
/// statistic of `values` (1-indexed), clamped to the maximum when the level
/// reaches or exceeds 1. Errors on empty input or `alpha` outside `(0, 1)`.
pub fn conformal_quantile(values: &[f64], alpha: f64) -> Result<f64, BoundsError> {
    if values.is_empty() {
        return Err(BoundsError::EmptyInput);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(BoundsError::Domain(format!("alpha = {alpha} outside (0, 1)")));
    }
    let l = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ceil_snap((1.0 - alpha) * (l as f64 + 1.0)) as usize;
    Ok(sorted[k.clamp(1, l) - 1])
}
