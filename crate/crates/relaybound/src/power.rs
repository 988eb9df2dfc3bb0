//! Sum-power-constrained optimal transmit power allocation.
//!
//! The service bound of the whole tandem is maximized exactly when every hop
//! sees the same SINR distribution. With homogeneous shadowing that reduces
//! to equalizing the deterministic factors `omega_i l_i^{-beta} = c` across
//! hops, and walking the self-interference recursion
//! `lambda_{i-1} = (1 + mu_i lambda_i) c l_i^beta` backwards from the last
//! hop turns each node's SNR into a polynomial in `c`:
//!
//! ```text
//! lambda_i = sum_{k=1}^{n-i+1} nu_{i,k} c^k,
//! nu_{i,k} = l_{i+k}^beta * prod_{u=1}^{k-1} (mu_{i+u} l_{i+u}^beta).
//! ```
//!
//! The product form above is division-free, so `mu = 0` is a first-class
//! input (the textbook form divides by the trailing `mu`). Summing over nodes
//! gives a polynomial budget equation with strictly positive coefficients;
//! it has exactly one positive root, found here by bracketed Newton with
//! compensated Horner evaluation.
//!
//! For equal spacing and uniform coupling the same budget constraint can be
//! written in the single variable `t = c mu l^beta`; the resulting
//! higher-degree polynomial carries a known double root at `t = 1`, and
//! [`solve_c_of_mu`] deflates it twice and solves what remains. The two
//! routes to `c` are algebraically identical but numerically independent,
//! which makes them useful cross-checks of one another.

use thiserror::Error;

use crate::channel::{ChannelParams, PowerAllocation, Topology};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerError {
    #[error("failed to bracket the budget root: {what}")]
    Bracket { what: String },
    #[error("allocation is degenerate: the SINR factor satisfies c*mu*l^beta = 1 (t = {t}); the geometric form of the per-node SNR does not apply")]
    Degenerate { t: f64 },
    #[error("invalid input: {what}")]
    Invalid { what: String },
}

/// The per-node SNR expansion coefficients; `coeff(i, k)` with `0 <= i <= n`,
/// `1 <= k <= n - i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NuCoefficients {
    nu: Vec<Vec<f64>>,
}

impl NuCoefficients {
    pub fn coeff(&self, i: usize, k: usize) -> f64 {
        self.nu[i][k - 1]
    }

    /// Number of transmitting nodes (n + 1).
    pub fn nodes(&self) -> usize {
        self.nu.len()
    }

    /// Budget polynomial coefficients `b_k = sum_i nu_{i,k}` for
    /// `k = 1..=n+1`.
    pub fn budget_coefficients(&self) -> Vec<f64> {
        let hops = self.nodes();
        let mut b = vec![0.0; hops];
        for row in &self.nu {
            for (k_idx, v) in row.iter().enumerate() {
                b[k_idx] += v;
            }
        }
        b
    }

    /// Node SNR `lambda_i(c)` by Horner over the row.
    pub fn lambda_for(&self, i: usize, c: f64) -> f64 {
        let mut acc = 0.0;
        for &v in self.nu[i].iter().rev() {
            acc = acc * c + v;
        }
        acc * c
    }
}

/// Build the coefficient table from hop lengths and coupling coefficients.
pub fn nu_coefficients(topology: &Topology, beta: f64) -> NuCoefficients {
    let n = topology.n();
    let l_beta: Vec<f64> = topology.lengths_m.iter().map(|l| l.powf(beta)).collect();
    let mut nu = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut row = Vec::with_capacity(n - i + 1);
        // k = 1 has the empty product.
        let mut chain = 1.0;
        for k in 1..=(n - i + 1) {
            row.push(l_beta[i + k - 1] * chain);
            if i + k <= n {
                chain *= topology.mu[i + k - 1] * l_beta[i + k - 1];
            }
        }
        nu.push(row);
    }
    NuCoefficients { nu }
}

/// Compensated Horner evaluation (error-free transforms via fma); effectively
/// double-double accuracy, which keeps root residuals meaningful for the
/// high-degree budget polynomials of long relay chains.
fn horner_compensated(coeffs_desc: &[f64], x: f64) -> f64 {
    let mut s = coeffs_desc[0];
    let mut comp = 0.0f64;
    for &a in &coeffs_desc[1..] {
        let p = s * x;
        let pe = s.mul_add(x, -p);
        let t = p + a;
        let z = t - p;
        let te = (p - (t - z)) + (a - z);
        s = t;
        comp = comp * x + (pe + te);
    }
    s + comp
}

/// Unique positive root of an increasing polynomial `p` (descending
/// coefficients, p(lo) <= 0 <= p(hi)) by safeguarded Newton inside a bracket.
fn increasing_poly_root(coeffs_desc: &[f64], mut lo: f64, mut hi: f64) -> Result<f64, PowerError> {
    let deriv: Vec<f64> = {
        let deg = coeffs_desc.len() - 1;
        coeffs_desc[..deg]
            .iter()
            .enumerate()
            .map(|(j, &a)| a * (deg - j) as f64)
            .collect()
    };
    let f = |x: f64| horner_compensated(coeffs_desc, x);
    if !(f(lo) <= 0.0) || !(f(hi) >= 0.0) {
        return Err(PowerError::Bracket {
            what: format!("no sign change on [{lo}, {hi}] (f(lo) = {}, f(hi) = {})", f(lo), f(hi)),
        });
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = horner_compensated(&deriv, x);
        let newton = x - fx / d;
        x = if d.is_finite() && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (hi - lo) <= 1e-14 * hi.max(1.0) || (hi - lo) <= f64::MIN_POSITIVE {
            break;
        }
    }
    Ok(x)
}

/// Positive root of the budget equation
/// `sum_k (sum_i nu_{i,k}) c^k = lambda_tot`.
pub fn solve_budget_polynomial(nu: &NuCoefficients, lambda_tot: f64) -> Result<f64, PowerError> {
    if lambda_tot <= 0.0 {
        return Err(PowerError::Invalid { what: format!("lambda_tot = {lambda_tot} must be > 0") });
    }
    let b = nu.budget_coefficients();
    if b.iter().any(|v| !v.is_finite()) {
        return Err(PowerError::Bracket {
            what: "budget coefficients overflow f64 (coupling times pathloss too large)".into(),
        });
    }
    if !(b[0] > 0.0) {
        return Err(PowerError::Invalid { what: "linear budget coefficient must be positive".into() });
    }
    // Descending coefficients of f(x) = sum b_k x^k - lambda_tot.
    let mut coeffs: Vec<f64> = b.iter().rev().cloned().collect();
    coeffs.push(-lambda_tot);
    // All monomial coefficients are nonnegative, so sum b_k x^k >= b_1 x and
    // x = lambda_tot / b_1 sits at or above the root; the inflation keeps the
    // endpoint strictly past it when the polynomial is exactly linear.
    let hi = lambda_tot / b[0] * (1.0 + 1e-6);
    increasing_poly_root(&coeffs, 0.0, hi)
}

/// The optimal allocation and its certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    /// Per-node transmit powers in Watts (nodes 0..=n).
    pub powers_watts: Vec<f64>,
    /// Per-node SNR lambda_i (linear).
    pub lambda: Vec<f64>,
    /// The equalized SINR factor c = omega_i l_i^{-beta}.
    pub c_star: f64,
    /// |budget polynomial at c_star|; should be < 1e-10 * lambda_tot.
    pub residual: f64,
}

impl AllocationResult {
    pub fn allocation(&self) -> PowerAllocation {
        PowerAllocation::from_lambda(self.lambda.clone())
    }
}

/// Optimal sum-power-constrained allocation: equalizes `omega_i l_i^{-beta}`
/// across all hops while spending the entire budget.
pub fn optimal_allocation(
    params: &ChannelParams,
    topology: &Topology,
    p_tot_watts: f64,
) -> Result<AllocationResult, PowerError> {
    topology.validate().map_err(|e| PowerError::Invalid { what: e.to_string() })?;
    if p_tot_watts <= 0.0 {
        return Err(PowerError::Invalid { what: format!("p_tot = {p_tot_watts} W must be > 0") });
    }
    let nu = nu_coefficients(topology, params.beta);
    let lambda_tot = params.lambda_tot(p_tot_watts);
    let c = solve_budget_polynomial(&nu, lambda_tot)?;
    let lambda: Vec<f64> = (0..nu.nodes()).map(|i| nu.lambda_for(i, c)).collect();
    let n0 = params.noise_power_watts();
    let powers: Vec<f64> = lambda.iter().map(|l| l * n0).collect();
    let mut coeffs: Vec<f64> = nu.budget_coefficients().iter().rev().cloned().collect();
    coeffs.push(-lambda_tot);
    let residual = horner_compensated(&coeffs, c).abs();
    Ok(AllocationResult { powers_watts: powers, lambda, c_star: c, residual })
}

/// Equalized SINR factor for equal spacing `l` and uniform coupling `mu`,
/// solved in the normalized variable `t = c mu l^beta`.
///
/// The budget constraint in `t` is a degree-`n+3` polynomial with a known
/// double root at `t = 1` (the excluded geometric-sum singularity);
/// synthetic division deflates it twice and the unique positive root of the
/// quotient gives `c`. [`PowerError::Degenerate`] is returned if that root
/// itself lands on `t = 1`, i.e. exactly at
/// `mu = (n+1)(n+2) / (2 lambda_tot)`.
pub fn solve_c_of_mu(n: usize, l: f64, beta: f64, mu: f64, lambda_tot: f64) -> Result<f64, PowerError> {
    if l <= 0.0 || lambda_tot <= 0.0 || mu < 0.0 {
        return Err(PowerError::Invalid { what: "need l > 0, lambda_tot > 0, mu >= 0".into() });
    }
    let l_beta = l.powf(beta);
    if mu == 0.0 {
        // No interference cascade: uniform power, c = lambda_tot / ((n+1) l^beta).
        return Ok(lambda_tot / ((n + 1) as f64 * l_beta));
    }
    let d = mu * lambda_tot;
    // Descending coefficients of
    //   t^{n+3} - (n+2+d) t^2 + (n+1+2d) t - d.
    let mut coeffs = vec![0.0f64; n + 4];
    coeffs[0] = 1.0;
    coeffs[n + 1] = -((n + 2) as f64 + d);
    coeffs[n + 2] = (n + 1) as f64 + 2.0 * d;
    coeffs[n + 3] = -d;
    // Deflate the double root at t = 1 by synthetic division, twice.
    let mut quotient = coeffs;
    for _ in 0..2 {
        let mut out = Vec::with_capacity(quotient.len() - 1);
        let mut acc = 0.0f64;
        for &a in &quotient[..quotient.len() - 1] {
            acc = a + acc;
            out.push(acc);
        }
        let remainder = quotient[quotient.len() - 1] + acc;
        debug_assert!(
            remainder.abs() <= 1e-9 * d.max(1.0),
            "double root deflation left remainder {remainder}"
        );
        quotient = out;
    }
    // The quotient is increasing on (0, inf) with q(0) = -d < 0.
    let mut hi = 1.0f64;
    let mut tries = 0;
    while horner_compensated(&quotient, hi) < 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 1100 {
            return Err(PowerError::Bracket { what: "no positive root below overflow".into() });
        }
    }
    let t = increasing_poly_root(&quotient, 0.0, hi)?;
    if (t - 1.0).abs() < 1e-12 {
        return Err(PowerError::Degenerate { t });
    }
    Ok(t / (mu * l_beta))
}

/// Small-coupling closed form for the equal-spacing SINR factor:
/// `2 lambda_tot l^{-beta} / (n (1 + exp(2 lambda_tot mu / (n+1))) + 2)`.
/// Valid while `mu lambda_tot / (n+1)` stays small (about 1e-2 or less).
pub fn c_asymptote_small_mu(n: usize, l: f64, beta: f64, mu: f64, lambda_tot: f64) -> f64 {
    2.0 * lambda_tot * l.powf(-beta)
        / (n as f64 * (1.0 + (2.0 * lambda_tot * mu / (n + 1) as f64).exp()) + 2.0)
}

/// Dense-deployment asymptote `c(mu) = K / mu`; `K` comes from a one-point
/// calibration, see [`calibrate_large_n_constant`].
pub fn c_asymptote_large_n(mu: f64, k_const: f64) -> f64 {
    k_const / mu
}

/// `K = mu0 * c(mu0)` at a reference coupling; the asymptotic shape fixes
/// only the product, so the scale must be pinned empirically.
pub fn calibrate_large_n_constant(
    n: usize,
    l: f64,
    beta: f64,
    mu0: f64,
    lambda_tot: f64,
) -> Result<f64, PowerError> {
    Ok(mu0 * solve_c_of_mu(n, l, beta, mu0, lambda_tot)?)
}
