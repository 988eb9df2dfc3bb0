//! Special functions backing the closed-form performance bounds.
//!
//! The bound expressions need four ingredients:
//!
//! * the Gauss hypergeometric series with unit first parameter,
//!   `₂F₁(1, b; c; x) = Σ_{k≥0} (b)_k/(c)_k · x^k` (the `1/k!` of the general
//!   series cancels against `(1)_k`),
//! * binomial coefficients, exact in integer arithmetic for small arguments
//!   and in log-space beyond,
//! * the standard normal CDF (for the log-normal shadowing law) and its
//!   inverse (for tail truncation points),
//! * two tail-sum helpers: `k_func`, the exact hypergeometric form of
//!   `Σ_{k≥τ} C(n+k,k)x^k` and its heterogeneous generalization, and
//!   `g_func`, an elementary upper envelope of the same tail that is cheaper
//!   to evaluate and exact at `τ = 0`.
//!
//! Everything here is a pure function of its arguments; results several
//! hundred orders of magnitude outside f64 range are reachable through the
//! `ln_*` variants.

use thiserror::Error;

/// Termination policy for series evaluation.
#[derive(Debug, Clone, Copy)]
pub struct SeriesTolerances {
    /// Relative tolerance: the series stops once the current term drops below
    /// `rel_tol` times the partial sum.
    pub rel_tol: f64,
    /// Hard cap on the number of terms before giving up.
    pub max_terms: usize,
}

impl Default for SeriesTolerances {
    fn default() -> Self {
        // The stability condition keeps operating points away from x = 1,
        // but searches may probe near the boundary where the series is slow,
        // hence the generous term cap.
        SeriesTolerances { rel_tol: 1e-12, max_terms: 1_000_000 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("hypergeometric series diverges for x = {x} (requires 0 <= x < 1)")]
    Divergent { x: f64 },
    #[error("series did not converge within {max_terms} terms (x = {x})")]
    MaxTermsExceeded { max_terms: usize, x: f64 },
    #[error("argument out of domain: {what}")]
    Domain { what: String },
}

/// Binomial coefficient C(n, k) as f64; returns 0 when `k > n`.
///
/// Exact (u128 arithmetic) for n <= 64, multiplicative form above that; may
/// overflow to infinity for huge arguments, in which case callers switch to
/// [`ln_binomial`].
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    if k == 0 {
        return 1.0;
    }
    if n <= 64 {
        // C(64, 32) ~ 1.8e18 fits comfortably in u128 at every partial step.
        let mut num: u128 = 1;
        for i in 1..=k as u128 {
            num = num * (n as u128 - k as u128 + i) / i;
        }
        num as f64
    } else {
        let mut acc = 1.0f64;
        for i in 1..=k {
            acc *= (n - k + i) as f64 / i as f64;
        }
        acc
    }
}

/// ln C(n, k); `-inf` when `k > n`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    libm::lgamma((n + 1) as f64) - libm::lgamma((k + 1) as f64) - libm::lgamma((n - k + 1) as f64)
}

/// Core series loop: returns `(sum, log_scale)` with the true value equal to
/// `sum * exp(log_scale)`. Rescales on the fly so the running sum never
/// overflows.
fn hyp2f1_1_scaled(b: f64, c: f64, x: f64, tol: &SeriesTolerances) -> Result<(f64, f64), SeriesError> {
    if !(0.0..1.0).contains(&x) {
        return Err(SeriesError::Divergent { x });
    }
    if c <= 0.0 {
        return Err(SeriesError::Domain { what: format!("c = {c} must be positive") });
    }
    if x == 0.0 {
        return Ok((1.0, 0.0));
    }
    const RESCALE_AT: f64 = 1e280;
    let mut sum = 1.0f64;
    let mut term = 1.0f64;
    let mut log_scale = 0.0f64;
    for k in 0..tol.max_terms {
        let kf = k as f64;
        term *= (b + kf) / (c + kf) * x;
        sum += term;
        if term < tol.rel_tol * sum {
            // Close with a geometric majorant of the dropped tail so the
            // returned value sits (just) above the limit instead of below it;
            // the term ratio is monotone towards x, so the next ratio bounds
            // all remaining ones when b >= c and x bounds them otherwise.
            let r = (x * (b + kf + 1.0) / (c + kf + 1.0)).max(x);
            if r < 1.0 {
                sum += term * r / (1.0 - r);
            }
            return Ok((sum, log_scale));
        }
        if sum > RESCALE_AT {
            sum /= RESCALE_AT;
            term /= RESCALE_AT;
            log_scale += RESCALE_AT.ln();
        }
    }
    Err(SeriesError::MaxTermsExceeded { max_terms: tol.max_terms, x })
}

/// Gauss hypergeometric function with unit first parameter,
/// `₂F₁(1, b; c; x) = Σ_{k≥0} (b)_k/(c)_k x^k`, by direct term-ratio
/// summation (`t_{k+1} = t_k (b+k)/(c+k) x`).
///
/// For `b, c, x > 0` every term is positive, so partial sums increase
/// monotonically towards the result. Returns `+inf` if the value exceeds f64
/// range; use [`ln_hyp2f1_1`] in that regime.
pub fn hyp2f1_1(b: f64, c: f64, x: f64, tol: &SeriesTolerances) -> Result<f64, SeriesError> {
    let (sum, log_scale) = hyp2f1_1_scaled(b, c, x, tol)?;
    Ok(if log_scale == 0.0 { sum } else { sum * log_scale.exp() })
}

/// Natural log of [`hyp2f1_1`].
pub fn ln_hyp2f1_1(b: f64, c: f64, x: f64, tol: &SeriesTolerances) -> Result<f64, SeriesError> {
    let (sum, log_scale) = hyp2f1_1_scaled(b, c, x, tol)?;
    Ok(log_scale + sum.ln())
}

/// The hypergeometric tail-sum function
/// `x^τ C(n+1-m+τ, n+1-m) ₂F₁(1, n+2-m+τ; τ+1; x)`.
///
/// For `m = 1` this equals `Σ_{k=τ}^∞ C(n+k,k) x^k` exactly.
pub fn k_func(tau: u64, n: u64, m: u64, x: f64, tol: &SeriesTolerances) -> Result<f64, SeriesError> {
    check_knm(n, m, x)?;
    if x == 0.0 {
        return Ok(if tau == 0 { 1.0 } else { 0.0 });
    }
    let (sum, log_scale) = hyp2f1_1_scaled((n + 2 - m + tau) as f64, (tau + 1) as f64, x, tol)?;
    let bin = binomial(n + 1 - m + tau, n + 1 - m);
    let prefix = bin * x.powi(tau as i32);
    // Direct product when everything is representable; log-assembled otherwise.
    if log_scale == 0.0 && prefix.is_finite() && prefix > 1e-290 {
        Ok(prefix * sum)
    } else {
        let ln_val = tau as f64 * x.ln() + ln_binomial(n + 1 - m + tau, n + 1 - m) + log_scale + sum.ln();
        Ok(ln_val.exp())
    }
}

/// ln of [`k_func`]; usable where the value itself over- or underflows.
pub fn ln_k_func(tau: u64, n: u64, m: u64, x: f64, tol: &SeriesTolerances) -> Result<f64, SeriesError> {
    check_knm(n, m, x)?;
    if x == 0.0 {
        return Ok(if tau == 0 { 0.0 } else { f64::NEG_INFINITY });
    }
    let f = ln_hyp2f1_1((n + 2 - m + tau) as f64, (tau + 1) as f64, x, tol)?;
    Ok(tau as f64 * x.ln() + ln_binomial(n + 1 - m + tau, n + 1 - m) + f)
}

fn check_knm(n: u64, m: u64, x: f64) -> Result<(), SeriesError> {
    if m < 1 || m > n + 1 {
        return Err(SeriesError::Domain { what: format!("m = {m} must be in 1..={}", n + 1) });
    }
    if !(0.0..1.0).contains(&x) {
        return Err(SeriesError::Divergent { x });
    }
    Ok(())
}

/// Elementary upper envelope of the homogeneous tail sum:
/// `min(G1, G2) >= Σ_{k=τ}^∞ C(n+k,k) x^k` with
/// `G1 = min(1, x^τ C(n+τ,n)) / (1-x)^{n+1}` and
/// `G2 = 1/(1-x)^{n+1} - C(n+τ, n+1) x^{τ-1}`.
///
/// At `τ = 0` the envelope collapses onto the exact tail sum
/// `(1-x)^{-(n+1)}` (the `C(n, n+1)` in `G2` is zero, so `x^{τ-1}` at
/// `τ = 0` is never evaluated).
pub fn g_func(tau: u64, n: u64, x: f64) -> f64 {
    assert!((0.0..1.0).contains(&x), "g_func requires 0 <= x < 1, got {x}");
    let full = (1.0 - x).powi(-(n as i32) - 1);
    if tau == 0 {
        return full;
    }
    if x == 0.0 {
        return 0.0;
    }
    let g1 = (x.powi(tau as i32) * binomial(n + tau, n)).min(1.0) * full;
    let g2 = full - binomial(n + tau, n + 1) * x.powi(tau as i32 - 1);
    g1.min(g2)
}

/// ln of [`g_func`], assembled without overflow for large `τ` or `x` near 1.
pub fn ln_g_func(tau: u64, n: u64, x: f64) -> f64 {
    assert!((0.0..1.0).contains(&x), "ln_g_func requires 0 <= x < 1, got {x}");
    let ln_full = -((n + 1) as f64) * (1.0 - x).ln();
    if tau == 0 {
        return ln_full;
    }
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    let ln_x = x.ln();
    let ln_g1 = (tau as f64 * ln_x + ln_binomial(n + tau, n)).min(0.0) + ln_full;
    // G2 = full - sub, with 0 <= sub <= full guaranteed.
    let ln_sub = ln_binomial(n + tau, n + 1) + (tau - 1) as f64 * ln_x;
    let ln_g2 = if ln_sub == f64::NEG_INFINITY {
        ln_full
    } else {
        ln_full + ln_1m_exp(ln_sub - ln_full)
    };
    ln_g1.min(ln_g2)
}

// ln(1 - e^d) for d <= 0, stable at both ends.
fn ln_1m_exp(d: f64) -> f64 {
    debug_assert!(d <= 1e-12, "ln_1m_exp needs d <= 0, got {d}");
    let d = d.min(0.0);
    if d > -std::f64::consts::LN_2 {
        (-libm::expm1(d)).ln()
    } else {
        (-d.exp()).ln_1p()
    }
}

/// Standard normal CDF, accurate to well below 1e-10 absolute over the whole
/// line (complementary error function from libm).
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse standard normal CDF.
///
/// Rational initial guess (Acklam's approximation, relative error ~1.2e-9)
/// followed by one Halley step against [`normal_cdf`], which brings the
/// result to machine precision everywhere the CDF is representable.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "normal_quantile requires 0 < p < 1, got {p}");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let mut x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // One Halley refinement.
    let e = normal_cdf(x) - p;
    let u = e / normal_pdf(x);
    x -= u / (1.0 + x * u / 2.0);
    x
}
