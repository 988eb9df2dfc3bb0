//! Steady-state backlog and delay bounds for the relay tandem.
//!
//! With deterministic arrivals `(delta_b, rho_a)` and the per-class service
//! factors `qhat_i(theta)`, define `V_i(theta) = p_a(theta) qhat_i(theta)`.
//! Whenever every `V_i < 1` (the effective capacity exceeds the effective
//! bandwidth at this `theta`), the steady-state backlog/delay kernel is
//! bounded by
//!
//! ```text
//! M(theta, s, t) <= e^{theta delta_b} p_a^{t-s}(theta) *
//!     | g_func(tau, n, V)                                     m = 1
//!     | sum_i psi_i V_i^{m-1} k_func(tau, n, m, V_i)          m >= 2
//! psi_i = prod_{j != i} (V_i - V_j)^{-1},   tau = max(s - t, 0).
//! ```
//!
//! The heterogeneous form comes from relaxing the per-class multiset
//! binomials into one shared binomial and resolving the composition sum by
//! partial fractions, so for `m >= 2` it upper-bounds (not equals) the
//! composition sum; oracles must compare against the relaxed double sum.
//!
//! Backlog uses `s = t` (so `tau = 0`) and optimizes
//! `(ln M - ln eps) / theta` over `theta`; delay scans integer `w` with
//! `s = t + w` until `inf_theta M <= eps`. Both searches run a log-spaced
//! `theta` grid inside the stability interval followed by golden-section
//! refinement, and everything is assembled in log space because the factors
//! span hundreds of orders of magnitude near the stability boundary.

use thiserror::Error;

use crate::mgf_bounds::{ArrivalSpec, HopClassDecomposition};
use crate::specfun::{ln_g_func, ln_k_func, SeriesError, SeriesTolerances};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("stability violated at theta = {theta}: max V_i = {max_v} >= 1")]
    Instability { theta: f64, max_v: f64 },
    #[error("hop classes degenerate at this theta (|V_i - V_j| = {gap:.3e} < 1e-10); merge classes first")]
    DegenerateClass { gap: f64 },
    #[error("no theta > 0 satisfies the stability condition (arrival rate exceeds effective capacity)")]
    UnstableSystem,
    #[error("delay scan exceeded the cap of {cap} slots without meeting the target violation probability")]
    DelayCapExceeded { cap: u64 },
    #[error("numerical failure: {what}")]
    Numerics { what: String },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Inputs of one kernel evaluation at fixed time offsets.
#[derive(Debug, Clone, Copy)]
pub struct MBoundInput<'a> {
    pub arrival: ArrivalSpec,
    pub decomp: &'a HopClassDecomposition,
    /// tau = max(s - t, 0); equals the candidate delay in the delay scan.
    pub tau: u64,
    /// s - t; 0 for backlog, w for delay (the arrival prefactor exponent).
    pub time_gap: i64,
}

/// Result of a bound optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundResult {
    /// Backlog in bits, or delay in whole slots.
    pub value: f64,
    /// The optimizing Chernoff parameter.
    pub theta_star: f64,
    /// Target violation probability the bound was computed for.
    pub epsilon: f64,
    pub stable: bool,
    /// 1 - max_i V_i(theta_star); positive iff stable at theta_star.
    pub margin: f64,
}

/// Maximal stable theta interval (0, theta_max).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRegion {
    pub theta_max: f64,
    /// True when no instability was found up to the probe ceiling; theta_max
    /// is then the ceiling rather than a root.
    pub capped: bool,
}

const DEGENERACY_GAP: f64 = 1e-10;
const THETA_GRID_POINTS: usize = 200;
pub const DEFAULT_DELAY_CAP: u64 = 100_000;

/// Per-class stability factors `V_i(theta)` with multiplicities.
pub fn v_values(arrival: &ArrivalSpec, decomp: &HopClassDecomposition, theta: f64) -> Vec<(f64, u64)> {
    let pa = arrival.ln_pa(theta);
    decomp
        .classes
        .iter()
        .map(|c| ((pa + c.q.eval(theta).ln()).exp(), c.multiplicity))
        .collect()
}

/// ln of the kernel bound from explicit `(V_i, multiplicity)` classes.
///
/// `n` is the relay count (hops - 1). Classes whose `V` values collide within
/// 1e-10 yield [`BoundError::DegenerateClass`]; merging them (adding their
/// multiplicities) is exact and is what the search routines do.
pub fn ln_m_bound_for_classes(
    arrival: &ArrivalSpec,
    theta: f64,
    n: u64,
    v_classes: &[(f64, u64)],
    tau: u64,
    time_gap: i64,
    tol: &SeriesTolerances,
) -> Result<f64, BoundError> {
    assert!(theta > 0.0, "theta must be positive");
    let m = v_classes.len() as u64;
    assert!(m >= 1);
    debug_assert_eq!(v_classes.iter().map(|c| c.1).sum::<u64>(), n + 1);
    let max_v = v_classes.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
    if !(max_v < 1.0) {
        return Err(BoundError::Instability { theta, max_v });
    }
    let ln_prefix = theta * arrival.delta_b - time_gap as f64 * arrival.ln_pa(theta);
    if m == 1 {
        return Ok(ln_prefix + ln_g_func(tau, n, v_classes[0].0));
    }
    // Pairwise separation guard: psi blows up as classes coalesce.
    for i in 0..v_classes.len() {
        for j in (i + 1)..v_classes.len() {
            let gap = (v_classes[i].0 - v_classes[j].0).abs();
            if gap < DEGENERACY_GAP {
                return Err(BoundError::DegenerateClass { gap });
            }
        }
    }
    // Signed log-sum-exp over psi_i V_i^{m-1} K(V_i).
    let mut ln_terms = Vec::with_capacity(v_classes.len());
    let mut signs = Vec::with_capacity(v_classes.len());
    for (i, &(vi, _)) in v_classes.iter().enumerate() {
        let mut ln_psi = 0.0;
        let mut sign = 1.0f64;
        for (j, &(vj, _)) in v_classes.iter().enumerate() {
            if i != j {
                ln_psi -= (vi - vj).abs().ln();
                if vi < vj {
                    sign = -sign;
                }
            }
        }
        let ln_k = ln_k_func(tau, n, m, vi, tol)?;
        ln_terms.push(ln_psi + (m - 1) as f64 * vi.ln() + ln_k);
        signs.push(sign);
    }
    let shift = ln_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let mut acc = 0.0;
    for (lt, s) in ln_terms.iter().zip(&signs) {
        acc += s * (lt - shift).exp();
    }
    if acc <= 0.0 {
        return Err(BoundError::Numerics {
            what: format!("partial-fraction sum lost all significance (acc = {acc:.3e})"),
        });
    }
    Ok(ln_prefix + shift + acc.ln())
}

/// Merge classes whose V values collide within the degeneracy gap, adding
/// multiplicities. Exact when the underlying laws coincide; for distinct laws
/// that merely collide at this theta it still yields a valid upper bound
/// because the shared-binomial relaxation only loosens.
fn merge_degenerate(mut v: Vec<(f64, u64)>) -> Vec<(f64, u64)> {
    v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out: Vec<(f64, u64)> = Vec::with_capacity(v.len());
    for (val, mult) in v {
        match out.last_mut() {
            Some((prev, pm)) if (val - *prev).abs() < DEGENERACY_GAP => *pm += mult,
            _ => out.push((val, mult)),
        }
    }
    out
}

/// The kernel bound `M(theta, s, t)` itself (linear scale, may be +inf).
///
/// Raises [`BoundError::DegenerateClass`] rather than silently merging; the
/// search routines merge up front.
pub fn m_bound(input: &MBoundInput, theta: f64) -> Result<f64, BoundError> {
    let v = v_values(&input.arrival, input.decomp, theta);
    let tol = SeriesTolerances::default();
    ln_m_bound_for_classes(&input.arrival, theta, input.decomp.n(), &v, input.tau, input.time_gap, &tol)
        .map(f64::exp)
}

/// ln of the kernel with degenerate classes merged; the building block of the
/// searches.
fn ln_m_merged(
    arrival: &ArrivalSpec,
    decomp: &HopClassDecomposition,
    theta: f64,
    tau: u64,
    time_gap: i64,
    tol: &SeriesTolerances,
) -> Result<f64, BoundError> {
    let v = merge_degenerate(v_values(arrival, decomp, theta));
    ln_m_bound_for_classes(arrival, theta, decomp.n(), &v, tau, time_gap, tol)
}

fn max_v(arrival: &ArrivalSpec, decomp: &HopClassDecomposition, theta: f64) -> f64 {
    v_values(arrival, decomp, theta).iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max)
}

/// Maximal theta interval on which `max_i V_i(theta) < 1`.
///
/// `ln max V` is convex in theta with value 0 at the origin, so the stable
/// set is an interval and bisection on the upper crossing is sound. Returns
/// `None` when no positive theta is stable (arrival rate at or above
/// effective capacity).
pub fn stability_region(arrival: &ArrivalSpec, decomp: &HopClassDecomposition) -> Option<StabilityRegion> {
    let h = |theta: f64| -> f64 {
        let pa = arrival.ln_pa(theta);
        decomp
            .classes
            .iter()
            .map(|c| pa + c.q.eval(theta).ln())
            .fold(f64::NEG_INFINITY, f64::max)
    };
    // Characteristic scale: both exponents theta*rho_a and eta*theta are O(1)
    // around 1/(rho_a + eta).
    let mut theta0 = 1.0 / (arrival.rho_a + decomp.eta).max(1e-300);
    let mut found = false;
    for _ in 0..90 {
        if h(theta0) < 0.0 {
            found = true;
            break;
        }
        theta0 *= 0.25;
    }
    if !found {
        return None;
    }
    let mut hi = theta0;
    let mut crossed = false;
    for _ in 0..110 {
        let next = hi * 2.0;
        if h(next) >= 0.0 {
            crossed = true;
            hi = next;
            break;
        }
        hi = next;
    }
    if !crossed {
        return Some(StabilityRegion { theta_max: hi, capped: true });
    }
    let (mut lo, mut hi) = (hi / 2.0, hi);
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-14 * hi {
            break;
        }
    }
    Some(StabilityRegion { theta_max: lo, capped: false })
}

fn theta_grid(region: &StabilityRegion) -> Vec<f64> {
    let lo = (1e-4 * region.theta_max).ln();
    let hi = (0.999 * region.theta_max).ln();
    (0..THETA_GRID_POINTS)
        .map(|i| (lo + (hi - lo) * i as f64 / (THETA_GRID_POINTS - 1) as f64).exp())
        .collect()
}

const GOLDEN_REL: f64 = 1e-6;

fn golden_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > GOLDEN_REL * 0.5 * (a + b) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Grid scan plus golden-section refinement of `f` over the stable interval.
/// Returns `(theta_star, f_min)`.
fn minimize_over_theta<F: Fn(f64) -> f64>(region: &StabilityRegion, f: F) -> (f64, f64) {
    let grid = theta_grid(region);
    let mut best = (grid[0], f(grid[0]));
    let mut best_idx = 0usize;
    for (i, &th) in grid.iter().enumerate().skip(1) {
        let v = f(th);
        if v < best.1 {
            best = (th, v);
            best_idx = i;
        }
    }
    let lo = grid[best_idx.saturating_sub(1)];
    let hi = grid[(best_idx + 1).min(grid.len() - 1)];
    let (th, v) = golden_min(&f, lo, hi);
    if v < best.1 {
        (th, v)
    } else {
        best
    }
}

/// Probabilistic total-backlog bound: the smallest
/// `(ln M(theta,t,t) - ln eps)/theta` over the stable theta range, in bits.
pub fn backlog_bound(
    arrival: &ArrivalSpec,
    decomp: &HopClassDecomposition,
    epsilon: f64,
) -> Result<BoundResult, BoundError> {
    assert!(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0,1)");
    let region = stability_region(arrival, decomp).ok_or(BoundError::UnstableSystem)?;
    let tol = SeriesTolerances::default();
    let ln_eps = epsilon.ln();
    let objective = |theta: f64| -> f64 {
        match ln_m_merged(arrival, decomp, theta, 0, 0, &tol) {
            Ok(ln_m) => (ln_m - ln_eps) / theta,
            Err(_) => f64::INFINITY,
        }
    };
    let (theta_star, value) = minimize_over_theta(&region, objective);
    if !value.is_finite() {
        return Err(BoundError::UnstableSystem);
    }
    let margin = 1.0 - max_v(arrival, decomp, theta_star);
    Ok(BoundResult { value, theta_star, epsilon, stable: true, margin })
}

/// `inf_theta ln M(theta, t+w, t)` for one whole-slot candidate delay,
/// together with the optimizing theta. Shared by [`delay_bound`] and the
/// monotonicity diagnostics.
pub fn delay_scan_inf(
    arrival: &ArrivalSpec,
    decomp: &HopClassDecomposition,
    region: &StabilityRegion,
    w: u64,
) -> (f64, f64) {
    let tol = SeriesTolerances::default();
    let objective = |theta: f64| -> f64 {
        ln_m_merged(arrival, decomp, theta, w, w as i64, &tol).unwrap_or(f64::INFINITY)
    };
    minimize_over_theta(region, objective)
}

/// Probabilistic end-to-end delay bound in whole slots: the first `w` whose
/// optimized kernel drops to the target violation probability.
///
/// `inf_theta M` is checked to be non-increasing along the scan; if a
/// non-monotone pair ever shows up, the first crossing is no longer trusted
/// on its own and the scan keeps going until the values stay below the target
/// for a full patience window.
pub fn delay_bound(
    arrival: &ArrivalSpec,
    decomp: &HopClassDecomposition,
    epsilon: f64,
) -> Result<BoundResult, BoundError> {
    delay_bound_with_cap(arrival, decomp, epsilon, DEFAULT_DELAY_CAP)
}

pub fn delay_bound_with_cap(
    arrival: &ArrivalSpec,
    decomp: &HopClassDecomposition,
    epsilon: f64,
    cap: u64,
) -> Result<BoundResult, BoundError> {
    assert!(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0,1)");
    let region = stability_region(arrival, decomp).ok_or(BoundError::UnstableSystem)?;
    let ln_eps = epsilon.ln();
    const PATIENCE: u64 = 32;
    let mut prev = f64::INFINITY;
    let mut monotone = true;
    let mut candidate: Option<(u64, f64)> = None;
    for w in 0..=cap {
        let (theta_star, inf_w) = delay_scan_inf(arrival, decomp, &region, w);
        if inf_w > prev * (1.0 + 1e-12) + 1e-9 {
            monotone = false;
        }
        prev = inf_w;
        if inf_w <= ln_eps {
            let cand = *candidate.get_or_insert((w, theta_star));
            if monotone || w - cand.0 >= PATIENCE {
                let margin = 1.0 - max_v(arrival, decomp, cand.1);
                return Ok(BoundResult {
                    value: cand.0 as f64,
                    theta_star: cand.1,
                    epsilon,
                    stable: true,
                    margin,
                });
            }
        } else {
            candidate = None;
        }
    }
    Err(BoundError::DelayCapExceeded { cap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::SinrModel;
    use crate::mgf_bounds::HopClassDecomposition;
    use crate::specfun::binomial;
    use approx::assert_relative_eq;

    fn tol() -> SeriesTolerances {
        SeriesTolerances::default()
    }

    fn no_arrival() -> ArrivalSpec {
        ArrivalSpec { rho_a: 0.0, delta_b: 0.0 }
    }

    /// Decomposition (eta = 1) whose per-hop SINR medians are free.
    fn decomp_for(scales: &[f64], sigma: f64) -> HopClassDecomposition {
        let model = SinrModel {
            scale: scales.to_vec(),
            sigma_db: vec![sigma; scales.len()],
            eta: 1.0,
        };
        HopClassDecomposition::from_model(&model, 1e-2)
    }

    #[test]
    fn homogeneous_backlog_kernel_collapse() {
        // m=1, tau=0, no burst, s=t: e^0 * p_a^0 * g(0, n, V) = (1-V)^-(n+1).
        let v = ln_m_bound_for_classes(&no_arrival(), 1.0, 1, &[(0.5, 2)], 0, 0, &tol()).unwrap();
        assert_relative_eq!(v.exp(), 4.0, max_relative = 1e-12);
    }

    /// Relaxed double-sum oracle: sum_{u=tau}^U C(u+n+1-m, n+1-m) *
    /// sum_{compositions of u into m} prod V_i^{pi_i}.
    fn relaxed_double_sum(n: u64, v: &[f64], tau: u64, upto: u64) -> f64 {
        let m = v.len() as u64;
        fn comp_sum(v: &[f64], total: u64) -> f64 {
            if v.len() == 1 {
                return v[0].powi(total as i32);
            }
            (0..=total).map(|b| v[0].powi(b as i32) * comp_sum(&v[1..], total - b)).sum()
        }
        let mut acc = 0.0;
        for u in tau..=upto {
            acc += binomial(u + n + 1 - m, n + 1 - m) * comp_sum(v, u);
        }
        acc
    }

    #[test]
    fn heterogeneous_kernel_matches_double_sum_oracle() {
        // n=1 (two hops), singleton classes, tau=1.
        let (v1, v2) = (0.5, 0.25);
        let ours = ln_m_bound_for_classes(&no_arrival(), 1.0, 1, &[(v1, 1), (v2, 1)], 1, 0, &tol())
            .unwrap()
            .exp();
        let oracle = relaxed_double_sum(1, &[v1, v2], 1, 400);
        assert_relative_eq!(ours, oracle, max_relative = 1e-9);
    }

    #[test]
    fn heterogeneous_kernel_three_classes() {
        let vs = [(0.62, 2), (0.3, 1), (0.11, 3)];
        let n = 5;
        for tau in [0u64, 2, 7] {
            let ours =
                ln_m_bound_for_classes(&no_arrival(), 1.0, n, &vs, tau, 0, &tol()).unwrap().exp();
            let oracle = relaxed_double_sum(n, &[0.62, 0.3, 0.11], tau, 600);
            assert_relative_eq!(ours, oracle, max_relative = 1e-9);
        }
    }

    #[test]
    fn near_degenerate_pair_converges_to_homogeneous() {
        // Fully heterogeneous two-hop case: as the second class collapses onto
        // the first, the partial-fraction form must approach the homogeneous
        // envelope (which is exact at tau = 0).
        let v = 0.5;
        let homog = ln_m_bound_for_classes(&no_arrival(), 1.0, 1, &[(v, 2)], 0, 0, &tol())
            .unwrap()
            .exp();
        let mut last_err = f64::INFINITY;
        for e in [1e-3, 1e-6] {
            let two = ln_m_bound_for_classes(
                &no_arrival(),
                1.0,
                1,
                &[(v, 1), (v * (1.0 + e), 1)],
                0,
                0,
                &tol(),
            )
            .unwrap()
            .exp();
            let err = (two / homog - 1.0).abs();
            assert!(err <= last_err + 1e-12, "error must shrink as classes coalesce");
            last_err = err;
        }
        assert!(last_err < 0.01, "residual gap {last_err}");
    }

    #[test]
    fn degenerate_classes_rejected() {
        let r = ln_m_bound_for_classes(
            &no_arrival(),
            1.0,
            1,
            &[(0.5, 1), (0.5 + 1e-11, 1)],
            0,
            0,
            &tol(),
        );
        assert!(matches!(r, Err(BoundError::DegenerateClass { .. })));
    }

    #[test]
    fn instability_rejected() {
        let r = ln_m_bound_for_classes(&no_arrival(), 1.0, 1, &[(1.0, 2)], 0, 0, &tol());
        assert!(matches!(r, Err(BoundError::Instability { .. })));
    }

    #[test]
    fn merge_sums_multiplicities() {
        let merged = merge_degenerate(vec![(0.5, 1), (0.5 + 1e-12, 2), (0.8, 1)]);
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0].1, 3);
    }

    #[test]
    fn stability_region_shapes() {
        let decomp = decomp_for(&[50.0, 50.0], 4.0);
        // Zero arrivals: q < 1 for every positive theta, region never closes.
        let r = stability_region(&no_arrival(), &decomp).unwrap();
        assert!(r.capped);
        // Moderate arrivals: finite region, interior strictly stable.
        let arr = ArrivalSpec { rho_a: 2.0, delta_b: 0.0 };
        let r = stability_region(&arr, &decomp).unwrap();
        assert!(!r.capped);
        assert!(r.theta_max > 0.0);
        for &f in &[1e-4, 0.3, 0.999] {
            assert!(max_v(&arr, &decomp, f * r.theta_max) < 1.0);
        }
        assert!(max_v(&arr, &decomp, 1.01 * r.theta_max) >= 1.0);
        // Arrivals above the best possible service: empty region.
        let too_fast = ArrivalSpec { rho_a: 100.0, delta_b: 0.0 };
        assert!(stability_region(&too_fast, &decomp).is_none());
    }

    #[test]
    fn backlog_bound_monotone_in_epsilon() {
        let decomp = decomp_for(&[50.0, 50.0], 4.0);
        let arr = ArrivalSpec { rho_a: 2.0, delta_b: 0.0 };
        let b3 = backlog_bound(&arr, &decomp, 1e-3).unwrap();
        let b6 = backlog_bound(&arr, &decomp, 1e-6).unwrap();
        assert!(b6.value > b3.value, "tighter epsilon must cost more backlog");
        assert!(b3.stable && b3.margin > 0.0);
        assert!(b3.value > 0.0);
    }

    #[test]
    fn backlog_bound_unstable_arrivals() {
        let decomp = decomp_for(&[50.0, 50.0], 4.0);
        let arr = ArrivalSpec { rho_a: 100.0, delta_b: 0.0 };
        assert!(matches!(backlog_bound(&arr, &decomp, 1e-3), Err(BoundError::UnstableSystem)));
    }

    #[test]
    fn theta_search_matches_dense_grid_reference() {
        let decomp = decomp_for(&[50.0, 50.0], 4.0);
        let arr = ArrivalSpec { rho_a: 2.0, delta_b: 0.0 };
        let eps = 1e-4;
        let got = backlog_bound(&arr, &decomp, eps).unwrap();
        // 1e4-point reference sweep over the same interval.
        let region = stability_region(&arr, &decomp).unwrap();
        let tfs = tol();
        let mut best = f64::INFINITY;
        let (llo, lhi) = ((1e-4 * region.theta_max).ln(), (0.999 * region.theta_max).ln());
        for i in 0..10_000 {
            let th = (llo + (lhi - llo) * i as f64 / 9999.0).exp();
            if let Ok(lm) = ln_m_merged(&arr, &decomp, th, 0, 0, &tfs) {
                best = best.min((lm - eps.ln()) / th);
            }
        }
        assert!(
            (got.value - best).abs() <= 1e-4 * best.abs(),
            "refined {} vs dense reference {}",
            got.value,
            best
        );
    }

    #[test]
    fn delay_bound_monotone_in_epsilon_and_scan_monotone() {
        let decomp = decomp_for(&[8.0, 8.0], 4.0);
        let arr = ArrivalSpec { rho_a: 1.2, delta_b: 0.0 };
        let region = stability_region(&arr, &decomp).unwrap();
        let mut prev = f64::INFINITY;
        for w in 0..12 {
            let (_, inf_w) = delay_scan_inf(&arr, &decomp, &region, w);
            assert!(inf_w <= prev * (1.0 + 1e-12) + 1e-9, "kernel inf must not grow with w");
            prev = inf_w;
        }
        let w2 = delay_bound(&arr, &decomp, 1e-2).unwrap();
        let w5 = delay_bound(&arr, &decomp, 1e-5).unwrap();
        assert!(w5.value >= w2.value, "tighter epsilon needs at least as many slots");
        assert!(w2.margin > 0.0);
    }

    #[test]
    fn delay_cap_error_when_unreachable() {
        let decomp = decomp_for(&[8.0, 8.0], 4.0);
        let arr = ArrivalSpec { rho_a: 1.2, delta_b: 0.0 };
        assert!(matches!(
            delay_bound_with_cap(&arr, &decomp, 1e-12, 3),
            Err(BoundError::DelayCapExceeded { cap: 3 })
        ));
    }

    #[test]
    fn public_kernel_equals_class_form() {
        let decomp = decomp_for(&[50.0, 20.0], 4.0);
        let arr = ArrivalSpec { rho_a: 1.0, delta_b: 10.0 };
        let theta = 0.2;
        let input = MBoundInput { arrival: arr, decomp: &decomp, tau: 2, time_gap: 2 };
        let direct = m_bound(&input, theta).unwrap();
        let v = v_values(&arr, &decomp, theta);
        let via_classes =
            ln_m_bound_for_classes(&arr, theta, decomp.n(), &v, 2, 2, &tol()).unwrap().exp();
        assert_relative_eq!(direct, via_classes, max_relative = 1e-12);
    }
}
