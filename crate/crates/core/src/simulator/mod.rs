//! Window-level Monte Carlo of the real protocol.
//!
//! Randomness comes from ChaCha8 (RFC 7539 block function, 8 rounds) as
//! implemented by `rand_chacha`: the 64-bit seed is expanded with
//! `seed_from_u64` and every shard draws from its own stream
//! (`set_stream(shard_index)`). Windows are split into shards as
//! `n / shards` each with the first `n % shards` shards taking one extra, so a
//! result depends only on the seed, the shard count and the parameters, never
//! on thread scheduling.

mod tally;

pub use tally::{ClassCounts, Subset, TallyRow, WindowTally};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};
use crate::estimator::YieldSet;
use crate::model::{
    ChannelParams, DetectorEvent, ModelOptions, PhaseMode, ProtocolParams, WindowClass,
};
use crate::photonics::{accepts, click_distribution_at, ClickDistribution, Interferometer};

/// One simulated window, kept only when records are requested.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub class: WindowClass,
    pub subset: Subset,
    /// Residual phase `gamma_B - gamma_A`; zero in compensation mode.
    pub delta: f64,
    pub event: DetectorEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub tally: WindowTally,
    /// Yields observed on the disclosed subset `v` (accepted windows in
    /// post-selection mode).
    pub yields: Option<YieldSet>,
    /// Yields over every window; diagnostics only.
    pub population_yields: Option<YieldSet>,
    pub e_z_observed: Option<f64>,
    pub seed: u64,
    pub shards: u32,
    pub rng: String,
    pub params: ProtocolParams,
    pub channel: ChannelParams,
    pub options: ModelOptions,
}

/// Fingerprint of the inputs a tally was produced from.
pub fn provenance(params: &ProtocolParams, ch: &ChannelParams, opts: &ModelOptions) -> u64 {
    let mut h = Sha256::new();
    for part in [
        serde_json::to_vec(params),
        serde_json::to_vec(ch),
        serde_json::to_vec(opts),
    ] {
        h.update(part.expect("parameters serialize"));
    }
    let digest = h.finalize();
    // Zero is reserved for the identity tally.
    u64::from_le_bytes(digest[..8].try_into().unwrap()).max(1)
}

#[derive(Debug, Clone)]
pub struct Simulator {
    params: ProtocolParams,
    channel: ChannelParams,
    options: ModelOptions,
    interferometer: Interferometer,
    /// Fixed-phase distributions for the four real classes.
    fixed: [ClickDistribution; 4],
    provenance: u64,
}

impl Simulator {
    pub fn new(params: ProtocolParams, channel: ChannelParams, options: ModelOptions) -> Result<Self> {
        params.validate()?;
        channel.validate()?;
        options.validate()?;
        if params.phase_mode == PhaseMode::PostSelection && params.lambda_ps == 0.0 {
            return Err(crate::error::Error::EmptyAcceptance(0.0));
        }
        let interferometer = Interferometer::new(&channel);
        let mu = params.mu;
        let fixed = WindowClass::REAL.map(|c| click_distribution_at(c, 0.0, mu, mu, &interferometer));
        let provenance = provenance(&params, &channel, &options);
        Ok(Self {
            params,
            channel,
            options,
            interferometer,
            fixed,
            provenance,
        })
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn provenance(&self) -> u64 {
        self.provenance
    }

    /// Window count assigned to `shard` out of `shards`.
    pub fn shard_len(&self, shards: u32, shard: u32) -> u64 {
        let n = self.params.n_windows;
        let s = shards as u64;
        n / s + u64::from((shard as u64) < n % s)
    }

    fn rng(seed: u64, shard: u32) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(shard as u64);
        rng
    }

    fn sample_window(&self, rng: &mut ChaCha8Rng) -> WindowRecord {
        let p = &self.params;
        let alice = rng.gen::<f64>() < p.q;
        let bob = rng.gen::<f64>() < p.q;
        let class = WindowClass::from_decisions(alice, bob);
        let subset = if rng.gen::<f64>() < p.test_fraction_v {
            Subset::V
        } else {
            Subset::U
        };
        let delta = match p.phase_mode {
            PhaseMode::Compensation => 0.0,
            PhaseMode::PostSelection => {
                let tau = std::f64::consts::TAU;
                let ga = rng.gen::<f64>() * tau;
                let gb = rng.gen::<f64>() * tau;
                gb - ga
            }
        };
        let jitter = self.options.intensity_jitter;
        let dist = if jitter > 0.0 {
            let mut draw = || p.mu * (1.0 - jitter * rng.gen::<f64>());
            let mu_a = if alice { draw() } else { 0.0 };
            let mu_b = if bob { draw() } else { 0.0 };
            click_distribution_at(class, delta, mu_a, mu_b, &self.interferometer)
        } else if p.phase_mode == PhaseMode::PostSelection {
            click_distribution_at(class, delta, p.mu, p.mu, &self.interferometer)
        } else {
            self.fixed[class.index()]
        };
        let u = rng.gen::<f64>();
        let event = if u < dist.p_l_only {
            (true, false)
        } else if u < dist.p_l_only + dist.p_r_only {
            (false, true)
        } else if u < dist.p_l_only + dist.p_r_only + dist.p_both {
            (true, true)
        } else {
            (false, false)
        };
        WindowRecord {
            class,
            subset,
            delta,
            event: DetectorEvent {
                left_click: event.0,
                right_click: event.1,
            },
        }
    }

    /// Simulate a single shard into a fresh tally.
    pub fn run_shard(&self, seed: u64, shards: u32, shard: u32) -> WindowTally {
        let mut rng = Self::rng(seed, shard);
        let mut tally = WindowTally::with_provenance(self.provenance);
        let lambda = self.params.lambda_ps;
        let post = self.params.phase_mode == PhaseMode::PostSelection;
        let relabel = self.options.relabel_antiphase;
        for _ in 0..self.shard_len(shards, shard) {
            let rec = self.sample_window(&mut rng);
            let (l, r) = single_clicks(rec.event);
            let accepted = if post {
                accepted_event(&rec, lambda, relabel)
            } else {
                Some((l, r))
            };
            tally.record(rec.subset, rec.class, l, r, accepted);
        }
        tally
    }

    /// Per-window records for every window, in shard order. Memory grows
    /// linearly with `n_windows`; meant for post-selection studies.
    pub fn run_records(&self, seed: u64) -> Vec<WindowRecord> {
        let shards = self.options.shards;
        (0..shards)
            .flat_map(|shard| {
                let mut rng = Self::rng(seed, shard);
                (0..self.shard_len(shards, shard))
                    .map(|_| self.sample_window(&mut rng))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// Tally of all shards, run in parallel and merged in shard order.
    pub fn run_tally(&self, seed: u64) -> WindowTally {
        let shards = self.options.shards;
        let parts: Vec<WindowTally> = (0..shards)
            .into_par_iter()
            .map(|shard| self.run_shard(seed, shards, shard))
            .collect();
        parts
            .iter()
            .try_fold(WindowTally::with_provenance(self.provenance), |acc, t| acc.merge(t))
            .expect("shards share provenance")
    }

    pub fn run(&self, seed: u64) -> SimulationResult {
        let tally = self.run_tally(seed);
        self.summarize(tally, seed)
    }

    pub fn summarize(&self, tally: WindowTally, seed: u64) -> SimulationResult {
        let accepted = self.params.phase_mode == PhaseMode::PostSelection;
        SimulationResult {
            yields: tally.yields(Some(Subset::V), accepted).ok(),
            population_yields: tally.yields(None, accepted).ok(),
            e_z_observed: tally.bit_flip_error(accepted).ok(),
            tally,
            seed,
            shards: self.options.shards,
            rng: "chacha8 (rand_chacha 0.3), seed_from_u64(seed), stream = shard index".into(),
            params: self.params.clone(),
            channel: self.channel.clone(),
            options: self.options.clone(),
        }
    }
}

/// Run the protocol with default options.
pub fn run(params: &ProtocolParams, ch: &ChannelParams, seed: u64) -> Result<SimulationResult> {
    Ok(Simulator::new(params.clone(), ch.clone(), ModelOptions::default())?.run(seed))
}

fn single_clicks(ev: DetectorEvent) -> (bool, bool) {
    (
        ev.left_click && !ev.right_click,
        ev.right_click && !ev.left_click,
    )
}

fn accepted_event(rec: &WindowRecord, lambda: f64, relabel: bool) -> Option<(bool, bool)> {
    if !accepts(rec.delta, lambda) {
        return None;
    }
    let (l, r) = single_clicks(rec.event);
    if relabel && rec.delta.cos() < 0.0 {
        Some((r, l))
    } else {
        Some((l, r))
    }
}

/// Tally of the windows whose phases pass `1 - |cos delta| <= lambda_ps`.
///
/// Accepted windows are recorded in both views; anti-phase windows get their
/// detector labels swapped when `relabel_antiphase` is set.
pub fn post_select(
    records: &[WindowRecord],
    lambda_ps: f64,
    relabel_antiphase: bool,
) -> Result<WindowTally> {
    if !(0.0..=1.0).contains(&lambda_ps) {
        return Err(invalid("lambda_ps", "must lie in [0, 1]"));
    }
    let mut tally = WindowTally::zero();
    for rec in records {
        if let Some(ev) = accepted_event(rec, lambda_ps, relabel_antiphase) {
            tally.record(rec.subset, rec.class, ev.0, ev.1, Some(ev));
        }
    }
    Ok(tally)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim(mu: f64, q: f64, n: u64, ch: ChannelParams) -> Simulator {
        Simulator::new(ProtocolParams::new(mu, q, n), ch, ModelOptions::default()).unwrap()
    }

    #[test]
    fn no_light_no_dark_counts_means_no_events() {
        let mut ch = ChannelParams::at_distance(50.0, 0.1);
        ch.p_dark = 0.0;
        let s = sim(1e-300, 0.5, 1_000_000, ch);
        let t = s.run_tally(3);
        assert_eq!(t.total_windows(), 1_000_000);
        for class in WindowClass::REAL {
            assert_eq!(t.view(None, class, false).effective(), 0);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let s = sim(0.3, 0.3, 200_000, ChannelParams::at_distance(10.0, 0.05));
        assert_eq!(s.run(11), s.run(11));
        assert_ne!(s.run(11).tally, s.run(12).tally);
    }

    #[test]
    fn shards_merge_to_parallel_run() {
        let mut opts = ModelOptions::default();
        opts.shards = 8;
        let s = Simulator::new(
            ProtocolParams::new(0.4, 0.2, 100_003),
            ChannelParams::at_distance(20.0, 0.1),
            opts,
        )
        .unwrap();
        let mut seq = WindowTally::zero();
        for shard in 0..8 {
            seq = seq.merge(&s.run_shard(5, 8, shard)).unwrap();
        }
        assert_eq!(seq, s.run_tally(5));
        assert_eq!(seq.total_windows(), 100_003);
    }

    #[test]
    fn both_class_frequency_matches_prior() {
        let n = 10_000_000u64;
        let s = sim(0.1, 0.5, n, ChannelParams::at_distance(50.0, 0.0));
        let t = s.run_tally(1);
        let nb = t.view(None, WindowClass::BBoth, false).windows as f64;
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        assert!((nb - 0.25 * n as f64).abs() < 3.0 * sigma);
    }

    #[test]
    fn records_and_post_select_agree_with_streaming_run() {
        let mut p = ProtocolParams::new(0.5, 0.3, 50_000);
        p.phase_mode = PhaseMode::PostSelection;
        p.lambda_ps = 0.1;
        let mut opts = ModelOptions::default();
        opts.shards = 4;
        let s = Simulator::new(p, ChannelParams::at_distance(5.0, 0.05), opts).unwrap();
        let records = s.run_records(9);
        assert_eq!(records.len(), 50_000);
        let selected = post_select(&records, 0.1, true).unwrap();
        let streamed = s.run_tally(9);
        for subset in [Subset::V, Subset::U] {
            for class in WindowClass::REAL {
                assert_eq!(
                    selected.accepted_counts(subset, class),
                    streamed.accepted_counts(subset, class)
                );
            }
        }
        let all = post_select(&records, 1.0, true).unwrap();
        assert_eq!(all.total_windows(), 50_000);
        assert!(post_select(&records, 1.5, true).is_err());
        let none = post_select(&records, 0.0, true).unwrap();
        assert_eq!(none.total_windows(), 0);
    }
}
