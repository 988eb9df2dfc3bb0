//! Performance bounds for multi-hop outdoor 60 GHz relay networks.
//!
//! This crate computes probabilistic upper bounds on total backlog and
//! end-to-end delay for a tandem of full-duplex buffered relays over a
//! log-normally shadowed millimeter-wave channel, using MGF-based stochastic
//! network calculus. It also finds the optimal sum-power-constrained transmit
//! power allocation (which equalizes the per-hop SINR distribution) and ships
//! a discrete-time Monte Carlo simulator to validate every bound empirically.
//!
//! The pieces fit together like this:
//!
//! * [`channel`] — outdoor 60 GHz propagation + full-duplex self-interference
//!   model; produces per-hop log-normal SINR distributions.
//! * [`specfun`] — series evaluation of the Gauss hypergeometric function
//!   with unit first parameter, binomials, the normal CDF, and the tail-sum
//!   helpers the closed-form bounds are built from.
//! * [`mgf_bounds`] — the discretized inverse-moment bound on the per-slot
//!   service MGF and the multiset-counted network service MGF bound.
//! * [`netcalc`] — closed-form steady-state bound assembly, stability
//!   analysis, and the backlog/delay bound optimizations over the free
//!   Chernoff parameter.
//! * [`power`] — optimal power allocation under a sum budget and the
//!   equal-spacing self-interference analysis (the `c(mu)` curve).
//! * [`sim`] — fluid FCFS tandem-queue simulator with reproducible parallel
//!   replications.
//! * [`config`] / [`cli`] — experiment configuration and the CSV-emitting
//!   subcommands behind the `relaybound` binary.
//!
//! The `examples/` directory has one runnable example per capability; start
//! with `backlog_bounds` and `validate_with_simulation`.

pub mod channel;
pub mod cli;
pub mod config;
pub mod mgf_bounds;
pub mod netcalc;
pub mod power;
pub mod sim;
pub mod specfun;

pub use channel::{omega, sinr_cdf, sinr_model, ChannelParams, PowerAllocation, SinrModel, Topology};
pub use mgf_bounds::{ArrivalSpec, HopClassDecomposition, QFunction};
