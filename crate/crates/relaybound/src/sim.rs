//! Discrete-time Monte Carlo simulator for the relay tandem.
//!
//! A fluid FCFS queue sits at the source and at every relay. Each slot the
//! simulator draws one shadowing realization per hop, computes the Shannon
//! service `eta ln(1 + gamma_i)` in bits, moves bits down the chain, and
//! records the total backlog at the slot boundary plus the virtual delay of
//! each arrival cohort (attributed when the cohort's last bit reaches the
//! destination). Traffic is tracked as `(cohort, bits)` chunks so per-bit
//! FCFS timestamps survive arbitrary splitting across service opportunities.
//!
//! Two intra-slot service orders are supported:
//!
//! * [`SlotSemantics::CutThrough`] serves hops source-to-destination within
//!   the slot, so bits can traverse several hops per slot when capacity is
//!   spare. This matches the fluid dynamic-server model behind the analytic
//!   bounds (which permits multi-hop traversal inside one slot) and is the
//!   mode to use when validating them.
//! * [`SlotSemantics::StoreAndForward`] serves all hops simultaneously from
//!   start-of-slot buffer contents; data forwarded in slot `k` becomes
//!   servable at the next hop in slot `k+1`, so every hop costs at least one
//!   slot and an uncongested pipeline shows an exact end-to-end delay of
//!   `n+1` slots. Use it to study slot-quantized relaying; its extra
//!   per-hop latency is *not* part of the analytic model.
//!
//! Replications run on independent, splittable RNG streams, so merged
//! statistics are bit-identical for a fixed `(seed, replications)` no matter
//! how many worker threads execute them.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::channel::{sinr_model, ChannelError, ChannelParams, PowerAllocation, SinrModel, Topology};
use crate::mgf_bounds::ArrivalSpec;

/// Intra-slot service order; see the module docs for the contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotSemantics {
    CutThrough,
    StoreAndForward,
}

/// Everything that defines the simulated system.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: ChannelParams,
    pub topology: Topology,
    pub alloc: PowerAllocation,
    pub arrival: ArrivalSpec,
}

impl Scenario {
    pub fn model(&self) -> Result<SinrModel, ChannelError> {
        sinr_model(&self.params, &self.topology, &self.alloc)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenario: Scenario,
    /// Simulated slots per replication.
    pub slots: u64,
    /// Slots discarded before statistics are recorded.
    pub warmup: u64,
    pub seed: u64,
    pub semantics: SlotSemantics,
    /// Backlog levels (bits, ascending) whose exceedance counts are tracked
    /// exactly.
    pub backlog_thresholds: Vec<f64>,
    /// Delay histogram size; delays at or beyond this land in one overflow
    /// bucket.
    pub delay_cap: usize,
    /// Total-backlog ceiling (bits) that flags the run as divergent.
    pub divergence_ceiling: f64,
    /// Keep per-boundary cumulative arrival/departure curves and a per-cohort
    /// delay log (memory-heavy; meant for invariant checks on short runs).
    pub record_cumulative: bool,
}

impl SimConfig {
    pub fn new(scenario: Scenario, slots: u64, seed: u64) -> Self {
        SimConfig {
            scenario,
            slots,
            warmup: 0,
            seed,
            semantics: SlotSemantics::CutThrough,
            backlog_thresholds: default_backlog_grid(),
            delay_cap: 4096,
            divergence_ceiling: 1e12,
            record_cumulative: false,
        }
    }
}

/// Log-spaced default grid, 1e3 .. 1e12 bits.
pub fn default_backlog_grid() -> Vec<f64> {
    (0..=90).map(|i| 10f64.powf(3.0 + 0.1 * i as f64)).collect()
}

/// Per-node flow-conservation snapshot at the end of a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeFlow {
    pub cum_in_bits: f64,
    pub cum_out_bits: f64,
    pub buffered_bits: f64,
}

/// Empirical outputs; everything is mergeable across replications except the
/// cumulative curves, which only exist for single runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    pub backlog_thresholds: Vec<f64>,
    /// Count of sampled slots whose total backlog exceeded each threshold.
    pub backlog_exceed: Vec<u64>,
    pub backlog_samples: u64,
    /// delay_hist[w] = cohorts whose virtual delay was exactly w slots; the
    /// last bucket collects overflows.
    pub delay_hist: Vec<u64>,
    pub delay_samples: u64,
    pub max_backlog_bits: f64,
    pub max_delay_slots: usize,
    pub arrived_bits: f64,
    pub delivered_bits: f64,
    pub diverged: bool,
    pub diverged_at_slot: Option<u64>,
    pub node_flow: Vec<NodeFlow>,
    /// Cumulative arrivals by boundary t (index t), when recorded.
    pub cum_a: Option<Vec<f64>>,
    /// Cumulative departures by boundary t, when recorded.
    pub cum_d: Option<Vec<f64>>,
    /// (cohort, delay) log, when recorded.
    pub delay_log: Option<Vec<(u64, u32)>>,
}

impl SimStats {
    /// Empirical P(B > threshold[i]).
    pub fn backlog_violation(&self, i: usize) -> f64 {
        if self.backlog_samples == 0 {
            return 0.0;
        }
        self.backlog_exceed[i] as f64 / self.backlog_samples as f64
    }

    /// Empirical P(W > w).
    pub fn delay_violation(&self, w: usize) -> f64 {
        if self.delay_samples == 0 {
            return 0.0;
        }
        let above: u64 = self.delay_hist.iter().skip(w + 1).sum();
        above as f64 / self.delay_samples as f64
    }

    /// Exceedance count behind [`Self::delay_violation`].
    pub fn delay_exceed_count(&self, w: usize) -> u64 {
        self.delay_hist.iter().skip(w + 1).sum()
    }

    /// Merge another replication's counts into this one.
    pub fn merge(&mut self, other: &SimStats) {
        assert_eq!(self.backlog_thresholds, other.backlog_thresholds);
        assert_eq!(self.delay_hist.len(), other.delay_hist.len());
        for (a, b) in self.backlog_exceed.iter_mut().zip(&other.backlog_exceed) {
            *a += b;
        }
        self.backlog_samples += other.backlog_samples;
        for (a, b) in self.delay_hist.iter_mut().zip(&other.delay_hist) {
            *a += b;
        }
        self.delay_samples += other.delay_samples;
        self.max_backlog_bits = self.max_backlog_bits.max(other.max_backlog_bits);
        self.max_delay_slots = self.max_delay_slots.max(other.max_delay_slots);
        self.arrived_bits += other.arrived_bits;
        self.delivered_bits += other.delivered_bits;
        self.diverged |= other.diverged;
        self.diverged_at_slot = match (self.diverged_at_slot, other.diverged_at_slot) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        for (a, b) in self.node_flow.iter_mut().zip(&other.node_flow) {
            a.cum_in_bits += b.cum_in_bits;
            a.cum_out_bits += b.cum_out_bits;
            a.buffered_bits += b.buffered_bits;
        }
        // Cumulative curves are per-run artifacts.
        self.cum_a = None;
        self.cum_d = None;
        self.delay_log = None;
    }

    /// CSV rows: metric, threshold, exceed_count, total_count, probability.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,threshold,exceed_count,total_count,probability\n");
        for (i, thr) in self.backlog_thresholds.iter().enumerate() {
            out.push_str(&format!(
                "backlog_bits,{:.6e},{},{},{:.6e}\n",
                thr,
                self.backlog_exceed[i],
                self.backlog_samples,
                self.backlog_violation(i)
            ));
        }
        for w in 0..=self.max_delay_slots.min(self.delay_hist.len() - 1) {
            out.push_str(&format!(
                "delay_slots,{},{},{},{:.6e}\n",
                w,
                self.delay_exceed_count(w),
                self.delay_samples,
                self.delay_violation(w)
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct Chunk {
    cohort: u64,
    bits: f64,
}

/// Move up to `budget` bits FCFS from `buf` into `out`; returns bits served.
fn serve(buf: &mut VecDeque<Chunk>, mut budget: f64, out: &mut Vec<Chunk>) -> f64 {
    let mut served = 0.0;
    while budget > 0.0 {
        match buf.front_mut() {
            None => break,
            Some(front) => {
                if front.bits <= budget {
                    budget -= front.bits;
                    served += front.bits;
                    out.push(*front);
                    buf.pop_front();
                } else {
                    out.push(Chunk { cohort: front.cohort, bits: budget });
                    front.bits -= budget;
                    served += budget;
                    budget = 0.0;
                }
            }
        }
    }
    served
}

/// Run one replication on RNG stream `stream`.
fn run_stream(config: &SimConfig, stream: u64) -> Result<SimStats, ChannelError> {
    let model = config.scenario.model()?;
    let hops = model.hops();
    let arrival = config.scenario.arrival;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);

    let thresholds = config.backlog_thresholds.clone();
    debug_assert!(thresholds.windows(2).all(|w| w[0] <= w[1]), "thresholds must be ascending");
    // bucket[j] = slots whose backlog exceeded exactly the first j thresholds.
    let mut exceed_bucket = vec![0u64; thresholds.len() + 1];
    let mut delay_hist = vec![0u64; config.delay_cap + 2];
    let mut stats = SimStats {
        backlog_thresholds: thresholds.clone(),
        backlog_exceed: vec![0; thresholds.len()],
        backlog_samples: 0,
        delay_hist: Vec::new(),
        delay_samples: 0,
        max_backlog_bits: 0.0,
        max_delay_slots: 0,
        arrived_bits: 0.0,
        delivered_bits: 0.0,
        diverged: false,
        diverged_at_slot: None,
        node_flow: vec![NodeFlow::default(); hops],
        cum_a: None,
        cum_d: None,
        delay_log: None,
    };

    let mut bufs: Vec<VecDeque<Chunk>> = (0..hops).map(|_| VecDeque::new()).collect();
    let mut staging: Vec<Vec<Chunk>> = (0..hops).map(|_| Vec::new()).collect();
    let mut delivered: Vec<Chunk> = Vec::new();
    let mut caps = vec![0.0f64; hops];
    let mut cum_in = vec![0.0f64; hops];
    let mut cum_out = vec![0.0f64; hops];

    // Cohort completion tracking for virtual delays.
    let mut cohort_rem: VecDeque<(u64, f64)> = VecDeque::new();
    let cohort_eps = 1e-9 * (arrival.rho_a + arrival.delta_b).max(1.0);

    let extra = config.semantics == SlotSemantics::StoreAndForward;
    let mut cum_a = config.record_cumulative.then(|| vec![0.0f64; config.slots as usize + 3]);
    let mut cum_d = config.record_cumulative.then(|| vec![0.0f64; config.slots as usize + 3]);
    let mut delay_log = config.record_cumulative.then(Vec::new);

    let mut total_arrived = 0.0f64;
    let mut total_delivered_acc = 0.0f64;

    for k in 0..config.slots {
        // Channel draws come first and in fixed count, so two runs with the
        // same seed but different load see identical capacities.
        for (i, cap) in caps.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *cap = model.eta * model.gamma_from_z(i + 1, z).ln_1p();
        }

        // Arrivals.
        let a_k = arrival.rho_a + if k == 0 { arrival.delta_b } else { 0.0 };
        if a_k > 0.0 {
            bufs[0].push_back(Chunk { cohort: k, bits: a_k });
            cohort_rem.push_back((k, a_k));
            cum_in[0] += a_k;
            total_arrived += a_k;
        }
        if let Some(ca) = cum_a.as_mut() {
            ca[k as usize + 1] = total_arrived;
        }

        // Service.
        delivered.clear();
        match config.semantics {
            SlotSemantics::CutThrough => {
                for i in 0..hops {
                    staging[i].clear();
                    let moved = if i + 1 < hops {
                        let (head, tail) = bufs.split_at_mut(i + 1);
                        let out_once = &mut staging[i];
                        let served = serve(&mut head[i], caps[i], out_once);
                        for ch in out_once.iter() {
                            tail[0].push_back(*ch);
                            cum_in[i + 1] += ch.bits;
                        }
                        served
                    } else {
                        serve(&mut bufs[i], caps[i], &mut delivered)
                    };
                    cum_out[i] += moved;
                }
            }
            SlotSemantics::StoreAndForward => {
                // Everyone serves start-of-slot contents; outputs become
                // visible at the next boundary.
                for i in 0..hops {
                    staging[i].clear();
                }
                for i in 0..hops {
                    let out = if i + 1 < hops { &mut staging[i + 1] } else { &mut delivered };
                    let moved = serve(&mut bufs[i], caps[i], out);
                    cum_out[i] += moved;
                }
                for i in 1..hops {
                    for ch in &staging[i] {
                        bufs[i].push_back(*ch);
                        cum_in[i] += ch.bits;
                    }
                }
            }
        }

        // Delivery bookkeeping. Under cut-through bits reach the destination
        // within the slot; under store-and-forward they arrive one boundary
        // later, like every other staged transfer.
        let delivery_time = if extra { k + 1 } else { k };
        let mut delivered_bits = 0.0;
        for ch in &delivered {
            delivered_bits += ch.bits;
            let idx = (ch.cohort - cohort_rem.front().map(|c| c.0).unwrap_or(ch.cohort)) as usize;
            if let Some(slot) = cohort_rem.get_mut(idx) {
                slot.1 -= ch.bits;
            }
        }
        total_delivered_acc += delivered_bits;
        while let Some(&(cohort, rem)) = cohort_rem.front() {
            if rem > cohort_eps {
                break;
            }
            cohort_rem.pop_front();
            let w = (delivery_time - cohort) as usize;
            if cohort >= config.warmup {
                let slot_idx = w.min(config.delay_cap + 1);
                delay_hist[slot_idx] += 1;
                stats.delay_samples += 1;
                stats.max_delay_slots = stats.max_delay_slots.max(w);
                if let Some(log) = delay_log.as_mut() {
                    log.push((cohort, w as u32));
                }
            }
        }
        if let Some(cd) = cum_d.as_mut() {
            // Bits counted as departed by the boundary after their delivery
            // time: delivery at time T is inside D(0, t) for t >= T + 1.
            cd[delivery_time as usize + 1] = total_delivered_acc;
            // Forward-fill happens at finalization.
        }

        // Backlog sample at the boundary after service; in store-and-forward
        // mode the chunk in flight towards the destination still counts.
        let mut backlog: f64 = bufs.iter().map(|b| b.iter().map(|c| c.bits).sum::<f64>()).sum();
        if extra {
            backlog += delivered_bits;
        }
        if k >= config.warmup {
            stats.backlog_samples += 1;
            stats.max_backlog_bits = stats.max_backlog_bits.max(backlog);
            let j = thresholds.partition_point(|&t| t < backlog);
            exceed_bucket[j] += 1;
        }
        if backlog > config.divergence_ceiling {
            stats.diverged = true;
            stats.diverged_at_slot = Some(k);
            break;
        }
    }

    // Suffix-sum the exceedance buckets: threshold i is exceeded by every
    // sample that cleared more than i thresholds.
    let mut acc = 0u64;
    for i in (0..thresholds.len()).rev() {
        acc += exceed_bucket[i + 1];
        stats.backlog_exceed[i] = acc;
    }
    stats.delay_hist = delay_hist;
    stats.arrived_bits = total_arrived;
    stats.delivered_bits = total_delivered_acc;
    for i in 0..hops {
        stats.node_flow[i] = NodeFlow {
            cum_in_bits: cum_in[i],
            cum_out_bits: cum_out[i],
            buffered_bits: bufs[i].iter().map(|c| c.bits).sum(),
        };
    }
    if let (Some(ca), Some(cd)) = (cum_a.as_mut(), cum_d.as_mut()) {
        // Forward-fill the cumulative curves so every boundary has a value.
        for t in 1..ca.len() {
            if ca[t] < ca[t - 1] {
                ca[t] = ca[t - 1];
            }
            if cd[t] < cd[t - 1] {
                cd[t] = cd[t - 1];
            }
        }
    }
    stats.cum_a = cum_a;
    stats.cum_d = cum_d;
    stats.delay_log = delay_log;
    Ok(stats)
}

/// Run a single replication (RNG stream 0).
pub fn run(config: &SimConfig) -> Result<SimStats, ChannelError> {
    run_stream(config, 0)
}

/// Run independent replications on streams `0..replications` and merge their
/// counts. The merge is a sequential fold in stream order, so the result is
/// identical no matter how the replications were scheduled.
pub fn run_parallel(config: &SimConfig, replications: u64) -> Result<SimStats, ChannelError> {
    assert!(replications >= 1);
    let runs: Vec<Result<SimStats, ChannelError>> =
        (0..replications).into_par_iter().map(|r| run_stream(config, r)).collect();
    let mut merged: Option<SimStats> = None;
    for r in runs {
        let s = r?;
        match merged.as_mut() {
            None => merged = Some(s),
            Some(m) => m.merge(&s),
        }
    }
    Ok(merged.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Topology;

    /// sigma = 0 scenario with per-hop capacity strictly above the arrival
    /// rate: the uncongested pipeline.
    fn pipeline_scenario(n: usize, rho: f64) -> Scenario {
        let params = ChannelParams::with_uniform_sigma(0.0, 2.0, 0.0, 0.0, 10.0, -114.0, n + 1);
        // scale = l^-2 with l = 1 gives gamma = 1 per hop; eta = 10/ln2, so
        // capacity ~ 10 bits per slot.
        let topology = Topology::equal_spacing(n, 1.0, 0.0);
        let alloc = PowerAllocation::from_lambda(vec![1.0; n + 1]);
        Scenario { params, topology, alloc, arrival: ArrivalSpec { rho_a: rho, delta_b: 0.0 } }
    }

    fn stochastic_scenario(rho: f64) -> Scenario {
        let params = ChannelParams::with_uniform_sigma(0.0, 2.0, 6.0, 0.0, 10.0, -114.0, 3);
        let topology = Topology::equal_spacing(2, 1.0, 0.0);
        let alloc = PowerAllocation::from_lambda(vec![1.0; 3]);
        Scenario { params, topology, alloc, arrival: ArrivalSpec { rho_a: rho, delta_b: 0.0 } }
    }

    #[test]
    fn zero_arrivals_zero_everything() {
        let mut sc = pipeline_scenario(2, 0.0);
        sc.arrival = ArrivalSpec { rho_a: 0.0, delta_b: 0.0 };
        let cfg = SimConfig::new(sc, 1000, 1);
        let stats = run(&cfg).unwrap();
        assert_eq!(stats.delay_samples, 0);
        assert_eq!(stats.max_backlog_bits, 0.0);
        assert!(stats.backlog_exceed.iter().all(|&c| c == 0));
        assert_eq!(stats.delay_violation(0), 0.0);
    }

    #[test]
    fn store_and_forward_pipeline_delay_is_hop_count() {
        for n in [0usize, 1, 4] {
            let mut cfg = SimConfig::new(pipeline_scenario(n, 5.0), 200, 1);
            cfg.semantics = SlotSemantics::StoreAndForward;
            cfg.record_cumulative = true;
            let stats = run(&cfg).unwrap();
            assert!(stats.delay_samples > 0);
            // Every cohort takes exactly one slot of transmission per hop.
            for w in 0..stats.delay_hist.len() {
                if stats.delay_hist[w] > 0 {
                    assert_eq!(w, n + 1, "pipeline delay must be exactly n+1 slots");
                }
            }
            // Steady backlog: one cohort per stage of the pipeline.
            assert!((stats.max_backlog_bits - 5.0 * (n as f64 + 1.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn cut_through_pipeline_flows_in_slot() {
        let mut cfg = SimConfig::new(pipeline_scenario(4, 5.0), 200, 1);
        cfg.semantics = SlotSemantics::CutThrough;
        let stats = run(&cfg).unwrap();
        assert!(stats.delay_samples > 0);
        for w in 0..stats.delay_hist.len() {
            if stats.delay_hist[w] > 0 {
                assert_eq!(w, 0, "uncongested cut-through delivers within the slot");
            }
        }
        assert!(stats.max_backlog_bits < 1e-9);
    }

    #[test]
    fn flow_conservation_both_modes() {
        for semantics in [SlotSemantics::CutThrough, SlotSemantics::StoreAndForward] {
            let mut cfg = SimConfig::new(stochastic_scenario(6.0), 5000, 42);
            cfg.semantics = semantics;
            let stats = run(&cfg).unwrap();
            for (i, nf) in stats.node_flow.iter().enumerate() {
                let resid = (nf.cum_in_bits - nf.cum_out_bits - nf.buffered_bits).abs();
                assert!(
                    resid <= 1e-6 * nf.cum_in_bits.max(1.0),
                    "node {i}: in {} != out {} + buf {}",
                    nf.cum_in_bits,
                    nf.cum_out_bits,
                    nf.buffered_bits
                );
            }
            // End-to-end accounting.
            assert!(stats.delivered_bits <= stats.arrived_bits + 1e-6);
        }
    }

    #[test]
    fn fcfs_delay_definition_check() {
        // Recorded virtual delays must satisfy A(0,t) <= D(0, t + W) and
        // A(0,t) > D(0, t + W - 1), with W attributed to t = cohort + 1.
        for semantics in [SlotSemantics::CutThrough, SlotSemantics::StoreAndForward] {
            let mut cfg = SimConfig::new(stochastic_scenario(7.5), 3000, 7);
            cfg.semantics = semantics;
            cfg.record_cumulative = true;
            let stats = run(&cfg).unwrap();
            let ca = stats.cum_a.as_ref().unwrap();
            let cd = stats.cum_d.as_ref().unwrap();
            // Causality first.
            for t in 0..cd.len().min(ca.len()) {
                assert!(cd[t] <= ca[t] + 1e-6, "departures outran arrivals at boundary {t}");
            }
            let log = stats.delay_log.as_ref().unwrap();
            assert!(!log.is_empty());
            let slack = 1e-6 * stats.arrived_bits.max(1.0);
            for &(cohort, w) in log.iter().take(1500) {
                let t = (cohort + 1) as usize;
                let w = w as usize;
                if t + w >= cd.len() {
                    continue;
                }
                assert!(ca[t] <= cd[t + w] + slack, "cohort {cohort}: A(0,{t}) > D(0,{})", t + w);
                if w > 0 {
                    assert!(
                        ca[t] > cd[t + w - 1] + slack.min(1e-3),
                        "cohort {cohort}: delay {w} not minimal"
                    );
                }
            }
        }
    }

    #[test]
    fn raising_load_never_reduces_delay() {
        // Common random numbers: the channel draw sequence is identical, so
        // every delay-CCDF point is monotone in the arrival rate.
        let mut low = SimConfig::new(stochastic_scenario(5.0), 4000, 99);
        let mut high = SimConfig::new(stochastic_scenario(8.0), 4000, 99);
        low.warmup = 100;
        high.warmup = 100;
        let s_low = run(&low).unwrap();
        let s_high = run(&high).unwrap();
        for w in 0..64 {
            assert!(
                s_high.delay_violation(w) >= s_low.delay_violation(w) - 1e-12,
                "load monotonicity broken at w = {w}"
            );
        }
    }

    #[test]
    fn single_replication_matches_plain_run() {
        let cfg = SimConfig::new(stochastic_scenario(6.0), 2000, 5);
        let a = run(&cfg).unwrap();
        let b = run_parallel(&cfg, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replication_merge_is_deterministic_and_additive() {
        let mut cfg = SimConfig::new(stochastic_scenario(6.0), 1500, 11);
        cfg.warmup = 100;
        let merged = run_parallel(&cfg, 8).unwrap();
        assert_eq!(merged.backlog_samples, 8 * (1500 - 100));
        // Same computation under a different worker count must be identical.
        let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
        let merged2 = pool.install(|| run_parallel(&cfg, 8).unwrap());
        assert_eq!(merged, merged2);
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let merged3 = pool1.install(|| run_parallel(&cfg, 8).unwrap());
        assert_eq!(merged, merged3);
    }

    #[test]
    fn divergence_flagged_for_overload() {
        // Arrivals far above capacity blow past the ceiling quickly.
        let mut cfg = SimConfig::new(stochastic_scenario(1000.0), 100_000, 3);
        cfg.divergence_ceiling = 1e5;
        let stats = run(&cfg).unwrap();
        assert!(stats.diverged);
        assert!(stats.diverged_at_slot.is_some());
    }

    #[test]
    fn csv_has_unit_bearing_header() {
        let cfg = SimConfig::new(stochastic_scenario(6.0), 500, 1);
        let stats = run(&cfg).unwrap();
        let csv = stats.to_csv();
        assert!(csv.starts_with("metric,threshold,exceed_count,total_count,probability\n"));
        assert!(csv.contains("backlog_bits"));
        assert!(csv.contains("delay_slots"));
    }
}
