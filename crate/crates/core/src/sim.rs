//! Seeded Monte Carlo realization of the generative models, for validating
//! the analytic results.
//!
//! Trials run in fixed-size chunks; chunk `i` draws from its own RNG stream
//! derived from `(seed, i)`, and per-chunk error counts are integers, so the
//! result is bit-identical no matter how many workers execute the chunks.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gender::GenderErrorRates;
use crate::prob::{Channel, Distribution, WorldModel};
use crate::retrieval::RetrievalPolicy;
use crate::verification::VerificationPolicy;

/// Monte Carlo run parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    pub chunk_size: u64,
    pub confidence_z: f64,
}

impl SimConfig {
    pub const DEFAULT_CHUNK_SIZE: u64 = 65_536;
    pub const DEFAULT_CONFIDENCE_Z: f64 = 3.0;

    pub fn new(trials: u64, seed: u64) -> Result<Self> {
        Self::with_chunk_size(trials, seed, Self::DEFAULT_CHUNK_SIZE)
    }

    pub fn with_chunk_size(trials: u64, seed: u64, chunk_size: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::Domain("trial count must be at least 1".to_string()));
        }
        if chunk_size == 0 {
            return Err(Error::Domain("chunk size must be at least 1".to_string()));
        }
        Ok(SimConfig {
            trials,
            seed,
            chunk_size,
            confidence_z: Self::DEFAULT_CONFIDENCE_Z,
        })
    }
}

/// An empirical error estimate with its normal-approximation confidence
/// interval, optionally annotated with the analytic value it should match.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub estimate: f64,
    pub trials: u64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub analytic: Option<f64>,
    pub within_ci: Option<bool>,
}

impl SimReport {
    pub fn from_counts(events: u64, trials: u64, confidence_z: f64) -> Self {
        let estimate = events as f64 / trials as f64;
        let std_error = (estimate * (1.0 - estimate) / trials as f64).sqrt();
        let half = confidence_z * std_error;
        SimReport {
            estimate,
            trials,
            std_error,
            ci_low: (estimate - half).max(0.0),
            ci_high: (estimate + half).min(1.0),
            analytic: None,
            within_ci: None,
        }
    }

    /// Attach the analytic value and record whether it falls in the interval.
    pub fn with_analytic(mut self, analytic: f64) -> Self {
        self.within_ci = Some(self.ci_low <= analytic && analytic <= self.ci_high);
        self.analytic = Some(analytic);
        self
    }
}

/// Uniform in [0, 1) with a fixed bit convention (53-bit mantissa from the
/// high bits of one `u64` draw), independent of any distribution library.
#[inline]
fn unit_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Cumulative table for categorical sampling. The boundary convention is
/// strict: `u < cdf[i]` selects the first such `i`.
struct CumTable {
    cum: Vec<f64>,
}

impl CumTable {
    fn new(probs: &[f64]) -> Self {
        let mut cum = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in probs {
            acc += p;
            cum.push(acc);
        }
        // Pin the last boundary so rounding in the running sum can never
        // leave a u in [0,1) unassigned.
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
        CumTable { cum }
    }

    #[inline]
    fn sample(&self, u: f64) -> usize {
        for (i, &c) in self.cum.iter().enumerate() {
            if u < c {
                return i;
            }
        }
        self.cum.len() - 1
    }
}

fn distribution_table(d: &Distribution) -> CumTable {
    CumTable::new(d.probs())
}

fn channel_tables(ch: &Channel) -> Vec<CumTable> {
    ch.rows().iter().map(|row| CumTable::new(row)).collect()
}

/// Runs `trials` trials split into chunks; chunk `i` uses RNG stream
/// `stream_base + i` of the seeded generator. Returns the total event count.
fn run_chunked(
    trials: u64,
    chunk_size: u64,
    seed: u64,
    stream_base: u64,
    stream_stride: u64,
    trial: impl Fn(&mut ChaCha8Rng) -> bool + Sync,
) -> u64 {
    let n_chunks = trials.div_ceil(chunk_size);
    (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream_base + chunk * stream_stride);
            let lo = chunk * chunk_size;
            let hi = (lo + chunk_size).min(trials);
            let mut events = 0u64;
            for _ in lo..hi {
                if trial(&mut rng) {
                    events += 1;
                }
            }
            events
        })
        .sum()
}

/// Simulate the 1-of-N retrieval game under `policy` and report the
/// empirical error rate.
///
/// Per trial: draw the true probe covariate, push it through both channels
/// to get the noisy probe and the true match's gallery value, draw `n - 1`
/// imposters, sample a target value from the policy row for the noisy probe,
/// and pick uniformly among gallery entries carrying the target. A target no
/// entry carries is an error.
pub fn simulate_retrieval(
    model: &WorldModel,
    n: u64,
    policy: &RetrievalPolicy,
    config: &SimConfig,
) -> Result<SimReport> {
    if n == 0 {
        return Err(Error::Domain(
            "gallery size must be at least 1".to_string(),
        ));
    }
    if **policy.space() != **model.space() {
        return Err(Error::SpaceMismatch {
            context: "simulate_retrieval",
        });
    }

    let probe_prior = distribution_table(model.probe_prior());
    let imposter_prior = distribution_table(model.imposter_prior());
    let probe_channel = channel_tables(model.probe_channel());
    let gallery_channel = channel_tables(model.gallery_channel());
    let policy_rows: Vec<CumTable> =
        policy.rows().iter().map(|row| CumTable::new(row)).collect();
    let m = model.space().len();

    let errors = run_chunked(
        config.trials,
        config.chunk_size,
        config.seed,
        0,
        1,
        |rng| {
            let cp = probe_prior.sample(unit_f64(rng));
            let ctp = probe_channel[cp].sample(unit_f64(rng));
            let ctg0 = gallery_channel[cp].sample(unit_f64(rng));
            let mut counts = vec![0u64; m];
            for _ in 1..n {
                let cg = imposter_prior.sample(unit_f64(rng));
                counts[gallery_channel[cg].sample(unit_f64(rng))] += 1;
            }
            let target = policy_rows[ctp].sample(unit_f64(rng));
            let total = counts[target] + u64::from(ctg0 == target);
            if total == 0 {
                return true; // no gallery entry carries the target
            }
            if ctg0 != target {
                return true; // the true match cannot be picked
            }
            // Uniform pick among `total` candidates; the true match is one.
            unit_f64(rng) >= 1.0 / total as f64
        },
    );
    Ok(SimReport::from_counts(errors, config.trials, config.confidence_z))
}

/// Simulate verification: `config.trials` mismatched pairs for the FAR
/// estimate and the same number of matched pairs for the FRR estimate, on
/// disjoint RNG streams.
pub fn simulate_verification(
    model: &WorldModel,
    policy: &VerificationPolicy,
    config: &SimConfig,
) -> Result<(SimReport, SimReport)> {
    if **policy.space() != **model.space() {
        return Err(Error::SpaceMismatch {
            context: "simulate_verification",
        });
    }
    let probe_prior = distribution_table(model.probe_prior());
    let imposter_prior = distribution_table(model.imposter_prior());
    let probe_channel = channel_tables(model.probe_channel());
    let gallery_channel = channel_tables(model.gallery_channel());

    // Mismatch condition: independent covariates, accept = false accept.
    let false_accepts = run_chunked(
        config.trials,
        config.chunk_size,
        config.seed,
        0,
        2,
        |rng| {
            let cp = probe_prior.sample(unit_f64(rng));
            let cg = imposter_prior.sample(unit_f64(rng));
            let ctp = probe_channel[cp].sample(unit_f64(rng));
            let ctg = gallery_channel[cg].sample(unit_f64(rng));
            unit_f64(rng) < policy.get(ctp, ctg)
        },
    );
    // Match condition: one covariate through both channels, reject = false reject.
    let false_rejects = run_chunked(
        config.trials,
        config.chunk_size,
        config.seed,
        1,
        2,
        |rng| {
            let cp = probe_prior.sample(unit_f64(rng));
            let ctp = probe_channel[cp].sample(unit_f64(rng));
            let ctg = gallery_channel[cp].sample(unit_f64(rng));
            unit_f64(rng) >= policy.get(ctp, ctg)
        },
    );
    Ok((
        SimReport::from_counts(false_accepts, config.trials, config.confidence_z),
        SimReport::from_counts(false_rejects, config.trials, config.confidence_z),
    ))
}

/// Simulate the two-item gender matching game: a probe, its true match, and
/// one imposter, all classified with noise; on an observed gender mismatch
/// the strategy picks the observed-probe match with probability `p_same`,
/// otherwise it picks uniformly.
///
/// This is the game behind the eight-type enumeration; unlike the
/// value-targeting retrieval policies it inspects both gallery
/// classifications and always has an item to pick.
pub fn simulate_match12(
    rates: GenderErrorRates,
    p_same: f64,
    config: &SimConfig,
) -> Result<SimReport> {
    if !(0.0..=1.0).contains(&p_same) || p_same.is_nan() {
        return Err(Error::Domain(format!(
            "p_same = {p_same} outside [0, 1]"
        )));
    }
    let GenderErrorRates { e_f, e_v } = rates;
    let errors = run_chunked(
        config.trials,
        config.chunk_size,
        config.seed,
        0,
        1,
        |rng| {
            let probe_gender = unit_f64(rng) < 0.5;
            let imposter_gender = unit_f64(rng) < 0.5;
            let observed_probe = probe_gender ^ (unit_f64(rng) < e_v);
            let observed_match = probe_gender ^ (unit_f64(rng) < e_f);
            let observed_imposter = imposter_gender ^ (unit_f64(rng) < e_f);
            if observed_match == observed_imposter {
                // Looks like a same-gender pair: uniform pick.
                return unit_f64(rng) < 0.5;
            }
            let pick_same = match p_same {
                0.0 => false,
                1.0 => true,
                p => unit_f64(rng) < p,
            };
            // Picking the observed-probe match errs iff that item is the
            // imposter, and vice versa.
            let observed_match_is_true_match = observed_match == observed_probe;
            pick_same != observed_match_is_true_match
        },
    );
    Ok(SimReport::from_counts(errors, config.trials, config.confidence_z))
}
