//! Outdoor 60 GHz propagation and full-duplex self-interference model.
//!
//! A path with `n` relays has `n + 1` hops, numbered 1..=n+1; nodes are
//! numbered 0 (source) to n+1 (destination). The channel gain of hop `i` over
//! distance `l_i` meters is, in dB, `-(alpha + 10 beta log10(l_i) + xi)` with
//! `xi ~ Normal(0, sigma_i^2)` log-normal shadowing. Each full-duplex relay
//! couples a fraction `mu_i` of its own transmit power into its receiver, so
//! the effective transmit SNR of hop `i <= n` is `lambda_{i-1} / (1 + mu_i
//! lambda_i)`; the last hop sees no self-interference.
//!
//! All dB quantities are converted to linear scale when the model is
//! constructed; the analytic core never sees dB.

use thiserror::Error;

use crate::specfun::{normal_cdf, normal_quantile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("hop index {hop} out of range 1..={hops}")]
    HopOutOfRange { hop: usize, hops: usize },
    #[error("invalid parameter: {what}")]
    Invalid { what: String },
}

/// Static propagation parameters of the deployment environment.
///
/// `sigma_db` carries one shadowing standard deviation per hop so that
/// heterogeneous environments stay expressible, even though the power
/// allocator assumes they are identical.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// Path-loss floating intercept (dB).
    pub alpha_db: f64,
    /// Path-loss slope (dimensionless, > 0).
    pub beta: f64,
    /// Shadowing standard deviation per hop (dB, >= 0).
    pub sigma_db: Vec<f64>,
    /// Antenna-gain scalar folding both ends of the link (dB).
    pub kappa_db: f64,
    /// Channel bandwidth W (Hz).
    pub bandwidth_hz: f64,
    /// Noise power density N0/W (dBm per MHz).
    pub noise_density_dbm_per_mhz: f64,
}

impl ChannelParams {
    /// Uniform-shadowing constructor; expands one sigma to all `hops` hops.
    pub fn with_uniform_sigma(
        alpha_db: f64,
        beta: f64,
        sigma_db: f64,
        kappa_db: f64,
        bandwidth_hz: f64,
        noise_density_dbm_per_mhz: f64,
        hops: usize,
    ) -> Self {
        ChannelParams {
            alpha_db,
            beta,
            sigma_db: vec![sigma_db; hops],
            kappa_db,
            bandwidth_hz,
            noise_density_dbm_per_mhz,
        }
    }

    pub fn validate(&self, hops: usize) -> Result<(), ChannelError> {
        if self.beta <= 0.0 {
            return Err(ChannelError::Invalid { what: format!("beta = {} must be > 0", self.beta) });
        }
        if self.bandwidth_hz <= 0.0 {
            return Err(ChannelError::Invalid {
                what: format!("bandwidth_hz = {} must be > 0", self.bandwidth_hz),
            });
        }
        if self.sigma_db.len() != hops {
            return Err(ChannelError::Invalid {
                what: format!("sigma_db has {} entries, expected {hops}", self.sigma_db.len()),
            });
        }
        if self.sigma_db.iter().any(|s| *s < 0.0 || !s.is_finite()) {
            return Err(ChannelError::Invalid { what: "sigma_db entries must be >= 0".into() });
        }
        Ok(())
    }

    /// Total background noise power N0 in Watts: density (dBm/MHz) times
    /// bandwidth.
    pub fn noise_power_watts(&self) -> f64 {
        let bw_mhz = self.bandwidth_hz / 1e6;
        let n0_dbm = self.noise_density_dbm_per_mhz + 10.0 * bw_mhz.log10();
        10f64.powf((n0_dbm - 30.0) / 10.0)
    }

    /// Shannon prefactor eta = W / ln 2, in bits per second (equivalently
    /// bits per one-second slot).
    pub fn eta(&self) -> f64 {
        self.bandwidth_hz / std::f64::consts::LN_2
    }

    /// Total transmit SNR budget P_tot / N0 (linear).
    pub fn lambda_tot(&self, p_tot_watts: f64) -> f64 {
        p_tot_watts / self.noise_power_watts()
    }
}

/// Relay placement and self-interference coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    /// Hop distances l_1..l_{n+1} in meters (n+1 entries, all > 0).
    pub lengths_m: Vec<f64>,
    /// Per-relay self-interference coefficients mu_1..mu_n (linear, in [0,1]).
    pub mu: Vec<f64>,
}

impl Topology {
    /// Equal spacing with identical coupling at every relay.
    pub fn equal_spacing(n: usize, hop_length_m: f64, mu: f64) -> Self {
        Topology { lengths_m: vec![hop_length_m; n + 1], mu: vec![mu; n] }
    }

    /// Relay count n.
    pub fn n(&self) -> usize {
        self.mu.len()
    }

    /// Hop count n + 1.
    pub fn hops(&self) -> usize {
        self.lengths_m.len()
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.lengths_m.len() != self.mu.len() + 1 {
            return Err(ChannelError::Invalid {
                what: format!(
                    "{} hop lengths require {} relay coefficients, got {}",
                    self.lengths_m.len(),
                    self.lengths_m.len() - 1,
                    self.mu.len()
                ),
            });
        }
        if self.lengths_m.iter().any(|l| *l <= 0.0 || !l.is_finite()) {
            return Err(ChannelError::Invalid { what: "hop lengths must be positive".into() });
        }
        if self.mu.iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(ChannelError::Invalid { what: "mu coefficients must lie in [0, 1]".into() });
        }
        Ok(())
    }
}

/// Per-node transmit SNR vector lambda_i = P_i / N0 (linear), nodes 0..=n.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub lambda: Vec<f64>,
}

impl PowerAllocation {
    pub fn from_lambda(lambda: Vec<f64>) -> Self {
        PowerAllocation { lambda }
    }

    /// Convert per-node powers in Watts into SNR units.
    pub fn from_watts(params: &ChannelParams, watts: &[f64]) -> Self {
        let n0 = params.noise_power_watts();
        PowerAllocation { lambda: watts.iter().map(|p| p / n0).collect() }
    }

    /// Split a total power budget evenly over the n+1 transmitting nodes.
    pub fn uniform(params: &ChannelParams, topology: &Topology, p_tot_watts: f64) -> Self {
        let nodes = topology.hops();
        Self::from_watts(params, &vec![p_tot_watts / nodes as f64; nodes])
    }

    pub fn validate(&self, topology: &Topology) -> Result<(), ChannelError> {
        if self.lambda.len() != topology.hops() {
            return Err(ChannelError::Invalid {
                what: format!(
                    "allocation has {} entries, topology needs {}",
                    self.lambda.len(),
                    topology.hops()
                ),
            });
        }
        if self.lambda.iter().any(|l| *l < 0.0 || !l.is_finite()) {
            return Err(ChannelError::Invalid { what: "lambda entries must be >= 0".into() });
        }
        Ok(())
    }
}

/// Effective transmit SNR of `hop` (1-based) after self-interference
/// discounting: `lambda_{hop-1} / (1 + mu_hop lambda_hop)` for interior hops,
/// plain `lambda_n` on the final hop.
pub fn omega(topology: &Topology, alloc: &PowerAllocation, hop: usize) -> Result<f64, ChannelError> {
    let hops = topology.hops();
    if hop == 0 || hop > hops {
        return Err(ChannelError::HopOutOfRange { hop, hops });
    }
    alloc.validate(topology)?;
    let lam_tx = alloc.lambda[hop - 1];
    if hop == hops {
        Ok(lam_tx)
    } else {
        Ok(lam_tx / (1.0 + topology.mu[hop - 1] * alloc.lambda[hop]))
    }
}

/// Per-hop SINR law: the random SINR of hop i is
/// `gamma_i = scale_i * 10^(-0.1 xi)` with `xi ~ Normal(0, sigma_i^2)` in dB,
/// so `scale_i` is both the deterministic multiplier and the median.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrModel {
    /// Deterministic SINR multiplier per hop (linear).
    pub scale: Vec<f64>,
    /// Shadowing standard deviation per hop (dB).
    pub sigma_db: Vec<f64>,
    /// Shannon prefactor W / ln 2 carried along for service computations.
    pub eta: f64,
}

/// Build the per-hop SINR model:
/// `scale_i = 10^(0.1 kappa) * 10^(-0.1 alpha) * omega_i * l_i^(-beta)`.
pub fn sinr_model(
    params: &ChannelParams,
    topology: &Topology,
    alloc: &PowerAllocation,
) -> Result<SinrModel, ChannelError> {
    topology.validate()?;
    params.validate(topology.hops())?;
    alloc.validate(topology)?;
    let gain = 10f64.powf(0.1 * (params.kappa_db - params.alpha_db));
    let mut scale = Vec::with_capacity(topology.hops());
    for hop in 1..=topology.hops() {
        let w = omega(topology, alloc, hop)?;
        scale.push(gain * w * topology.lengths_m[hop - 1].powf(-params.beta));
    }
    Ok(SinrModel { scale, sigma_db: params.sigma_db.clone(), eta: params.eta() })
}

/// CDF of the hop SINR: `P(gamma_i <= x) = Phi((10 / sigma_i) log10(x /
/// scale_i))`, with the degenerate step law when sigma_i = 0.
pub fn sinr_cdf(model: &SinrModel, hop: usize, x: f64) -> f64 {
    assert!(hop >= 1 && hop <= model.scale.len(), "hop {hop} out of range");
    debug_assert!(x >= 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    let scale = model.scale[hop - 1];
    let sigma = model.sigma_db[hop - 1];
    if sigma == 0.0 {
        return if x >= scale { 1.0 } else { 0.0 };
    }
    normal_cdf(10.0 / sigma * (x / scale).log10())
}

impl SinrModel {
    pub fn hops(&self) -> usize {
        self.scale.len()
    }

    /// SINR quantile: smallest x with `P(gamma <= x) >= p`.
    pub fn sinr_quantile(&self, hop: usize, p: f64) -> f64 {
        let scale = self.scale[hop - 1];
        let sigma = self.sigma_db[hop - 1];
        if sigma == 0.0 {
            return scale;
        }
        scale * 10f64.powf(0.1 * sigma * normal_quantile(p))
    }

    /// Draw one shadowing realization for `hop` given a standard normal z.
    #[inline]
    pub fn gamma_from_z(&self, hop: usize, z: f64) -> f64 {
        self.scale[hop - 1] * 10f64.powf(-0.1 * self.sigma_db[hop - 1] * z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn table_params(hops: usize) -> ChannelParams {
        ChannelParams::with_uniform_sigma(70.0, 2.45, 8.0, 70.0, 500e6, -114.0, hops)
    }

    #[test]
    fn omega_single_hop_is_plain_snr() {
        let topo = Topology::equal_spacing(0, 500.0, 0.0);
        let alloc = PowerAllocation::from_lambda(vec![10.0]);
        assert_eq!(omega(&topo, &alloc, 1).unwrap(), 10.0);
    }

    #[test]
    fn omega_interference_free_collapses() {
        let topo = Topology { lengths_m: vec![500.0, 500.0], mu: vec![0.0] };
        let alloc = PowerAllocation::from_lambda(vec![10.0, 5.0]);
        assert_eq!(omega(&topo, &alloc, 1).unwrap(), 10.0);
    }

    #[test]
    fn omega_discounts_by_coupled_power() {
        let topo = Topology { lengths_m: vec![500.0, 500.0], mu: vec![0.2] };
        let alloc = PowerAllocation::from_lambda(vec![10.0, 5.0]);
        // denominator 1 + 0.2 * 5 = 2
        assert_eq!(omega(&topo, &alloc, 1).unwrap(), 5.0);
        assert_eq!(omega(&topo, &alloc, 2).unwrap(), 5.0);
        assert!(matches!(omega(&topo, &alloc, 3), Err(ChannelError::HopOutOfRange { .. })));
        assert!(matches!(omega(&topo, &alloc, 0), Err(ChannelError::HopOutOfRange { .. })));
    }

    #[test]
    fn omega_strictly_decreasing_in_coupling() {
        let alloc = PowerAllocation::from_lambda(vec![10.0, 5.0]);
        let mut prev = f64::INFINITY;
        for &mu in &[0.0, 1e-3, 1e-2, 0.1, 0.5, 1.0] {
            let topo = Topology { lengths_m: vec![500.0, 500.0], mu: vec![mu] };
            let w = omega(&topo, &alloc, 1).unwrap();
            assert!(w < prev || mu == 0.0);
            prev = w;
        }
    }

    #[test]
    fn lambda_tot_matches_budget_check() {
        // 50 W over -114 dBm/MHz noise density on 500 MHz: 134 dB.
        let params = table_params(11);
        let lam = params.lambda_tot(50.0);
        let lam_db = 10.0 * lam.log10();
        assert!((lam_db - 134.0).abs() < 0.01, "lambda_tot = {lam_db} dB");
    }

    #[test]
    fn unit_scale_when_all_attenuation_vanishes() {
        let params = ChannelParams::with_uniform_sigma(0.0, 2.45, 8.0, 0.0, 500e6, -114.0, 1);
        let topo = Topology { lengths_m: vec![1.0], mu: vec![] };
        let alloc = PowerAllocation::from_lambda(vec![1.0]);
        let model = sinr_model(&params, &topo, &alloc).unwrap();
        assert_relative_eq!(model.scale[0], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn single_hop_scale_matches_hand_formula() {
        // Spreadsheet-style evaluation: 10^7 * 10^-7 * lambda_tot * 500^-2.45
        let params = table_params(1);
        let lam_tot = params.lambda_tot(50.0);
        let topo = Topology { lengths_m: vec![500.0], mu: vec![] };
        let alloc = PowerAllocation::from_lambda(vec![lam_tot]);
        let model = sinr_model(&params, &topo, &alloc).unwrap();
        let hand = 1e7 * 1e-7 * lam_tot * 500f64.powf(-2.45);
        assert_relative_eq!(model.scale[0], hand, max_relative = 1e-12);
    }

    #[test]
    fn cdf_median_zero_and_reference_point() {
        let model = SinrModel { scale: vec![1.0], sigma_db: vec![8.0], eta: 500e6 / 2f64.ln() };
        assert_eq!(sinr_cdf(&model, 1, 0.0), 0.0);
        assert_relative_eq!(sinr_cdf(&model, 1, 1.0), 0.5, max_relative = 1e-12);
        // x = 10: Phi(10/8) = Phi(1.25)
        assert!((sinr_cdf(&model, 1, 10.0) - 0.894350226333145).abs() < 1e-10);
    }

    #[test]
    fn cdf_monotone_and_saturating() {
        let model = SinrModel { scale: vec![75.0], sigma_db: vec![8.0], eta: 1.0 };
        let mut prev = 0.0;
        for i in 0..200 {
            let x = 1e-4 * 10f64.powf(i as f64 * 0.05);
            let f = sinr_cdf(&model, 1, x);
            assert!(f >= prev);
            assert!((0.0..=1.0).contains(&f));
            prev = f;
        }
        assert!(sinr_cdf(&model, 1, 1e12) > 1.0 - 1e-9);
    }

    #[test]
    fn cdf_scaling_law_exact() {
        let m1 = SinrModel { scale: vec![3.7], sigma_db: vec![8.0], eta: 1.0 };
        let m2 = SinrModel { scale: vec![7.4], sigma_db: vec![8.0], eta: 1.0 };
        for i in 1..50 {
            let x = 0.3 * i as f64;
            assert_eq!(sinr_cdf(&m1, 1, x), sinr_cdf(&m2, 1, 2.0 * x));
        }
    }

    #[test]
    fn degenerate_sigma_is_step_law() {
        let model = SinrModel { scale: vec![5.0], sigma_db: vec![0.0], eta: 1.0 };
        assert_eq!(sinr_cdf(&model, 1, 4.999), 0.0);
        assert_eq!(sinr_cdf(&model, 1, 5.0), 1.0);
        assert_eq!(model.sinr_quantile(1, 1.0 - 1e-9), 5.0);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let model = SinrModel { scale: vec![70.0], sigma_db: vec![8.0], eta: 1.0 };
        for &p in &[1e-6, 0.01, 0.5, 0.99, 1.0 - 1e-6] {
            let x = model.sinr_quantile(1, p);
            assert_relative_eq!(sinr_cdf(&model, 1, x), p, max_relative = 1e-9);
        }
    }

    #[test]
    fn empirical_cdf_within_ks_distance() {
        // 1e6 shadowing draws against the analytic law; KS distance must stay
        // below 0.005 (a fixed seed keeps this deterministic).
        let model = SinrModel { scale: vec![70.0], sigma_db: vec![8.0], eta: 1.0 };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000usize;
        let mut samples: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                model.gamma_from_z(1, z)
            })
            .collect();
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        for (i, x) in samples.iter().enumerate() {
            let f = sinr_cdf(&model, 1, *x);
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            ks = ks.max((f - lo).abs()).max((f - hi).abs());
        }
        assert!(ks < 0.005, "KS distance {ks}");
    }
}
