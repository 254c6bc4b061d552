//! Finite probability primitives: covariate spaces, distributions over them,
//! row-stochastic noisy channels, and the derived marginal / posterior
//! quantities everything downstream is built from.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Normalization tolerance accepted on user-supplied probability vectors.
/// Values inside the tolerance are renormalized exactly on construction so
/// downstream identities hold to ~1e-12.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// A finite, ordered set of covariate labels.
///
/// The label order is fixed at construction and defines the index ↔ label
/// mapping used by every distribution, channel, and policy built on top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CovariateSpace {
    labels: Vec<String>,
}

impl CovariateSpace {
    pub fn new<I, S>(labels: I) -> Result<Arc<Self>>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::EmptySpace);
        }
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].contains(label) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        Ok(Arc::new(CovariateSpace { labels }))
    }

    /// The binary space used throughout the gender special case.
    pub fn binary_gender() -> Arc<Self> {
        Self::new(["F", "M"]).expect("two distinct labels")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }
}

fn validate_prob_vector(context: &'static str, space: &CovariateSpace, probs: &[f64]) -> Result<f64> {
    if probs.len() != space.len() {
        return Err(Error::DimensionMismatch {
            context,
            expected: space.len(),
            got: probs.len(),
        });
    }
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || !(0.0..=1.0 + NORMALIZATION_TOLERANCE).contains(&p) {
            return Err(Error::ProbabilityOutOfRange {
                context,
                index: i,
                value: p,
            });
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::NotNormalized {
            context,
            sum,
            tolerance: NORMALIZATION_TOLERANCE,
        });
    }
    Ok(sum)
}

/// A probability vector over a [`CovariateSpace`].
///
/// Construction validates entries and normalization within
/// [`NORMALIZATION_TOLERANCE`], then renormalizes exactly; user-supplied JSON
/// carries decimal rounding that would otherwise leak into every identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    space: Arc<CovariateSpace>,
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(space: &Arc<CovariateSpace>, probs: Vec<f64>) -> Result<Self> {
        let sum = validate_prob_vector("distribution", space, &probs)?;
        let probs = probs.into_iter().map(|p| p / sum).collect();
        Ok(Distribution {
            space: Arc::clone(space),
            probs,
        })
    }

    pub fn uniform(space: &Arc<CovariateSpace>) -> Self {
        let m = space.len();
        Distribution {
            space: Arc::clone(space),
            probs: vec![1.0 / m as f64; m],
        }
    }

    /// Point mass on a single index.
    pub fn point(space: &Arc<CovariateSpace>, index: usize) -> Self {
        let mut probs = vec![0.0; space.len()];
        probs[index] = 1.0;
        Distribution {
            space: Arc::clone(space),
            probs,
        }
    }

    pub fn space(&self) -> &Arc<CovariateSpace> {
        &self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub(crate) fn from_normalized(space: &Arc<CovariateSpace>, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), space.len());
        Distribution {
            space: Arc::clone(space),
            probs,
        }
    }
}

/// A noisy channel: a row-stochastic confusion matrix over a space, with
/// entry `(input, output)` holding P(output | input).
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    space: Arc<CovariateSpace>,
    rows: Vec<Vec<f64>>,
}

impl Channel {
    pub fn new(space: &Arc<CovariateSpace>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != space.len() {
            return Err(Error::DimensionMismatch {
                context: "channel",
                expected: space.len(),
                got: rows.len(),
            });
        }
        let rows = rows
            .into_iter()
            .map(|row| {
                let sum = validate_prob_vector("channel row", space, &row)?;
                Ok(row.into_iter().map(|p| p / sum).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(Channel {
            space: Arc::clone(space),
            rows,
        })
    }

    pub fn identity(space: &Arc<CovariateSpace>) -> Self {
        let m = space.len();
        let rows = (0..m)
            .map(|i| {
                let mut row = vec![0.0; m];
                row[i] = 1.0;
                row
            })
            .collect();
        Channel {
            space: Arc::clone(space),
            rows,
        }
    }

    /// Binary symmetric channel: stays with probability `1 - flip`, crosses
    /// over with probability `flip`. Only defined on two-label spaces.
    pub fn binary_symmetric(space: &Arc<CovariateSpace>, flip: f64) -> Result<Self> {
        if space.len() != 2 {
            return Err(Error::Domain(format!(
                "binary symmetric channel requires a two-label space, got {}",
                space.len()
            )));
        }
        Channel::new(space, vec![vec![1.0 - flip, flip], vec![flip, 1.0 - flip]])
    }

    pub fn space(&self) -> &Arc<CovariateSpace> {
        &self.space
    }

    /// P(output | input).
    pub fn get(&self, input: usize, output: usize) -> f64 {
        self.rows[input][output]
    }

    pub fn row(&self, input: usize) -> &[f64] {
        &self.rows[input]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// The full generative model: priors for probe and imposter covariates and
/// the two noisy classification channels.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    space: Arc<CovariateSpace>,
    probe_prior: Distribution,
    imposter_prior: Distribution,
    probe_channel: Channel,
    gallery_channel: Channel,
}

impl WorldModel {
    pub fn new(
        probe_prior: Distribution,
        imposter_prior: Distribution,
        probe_channel: Channel,
        gallery_channel: Channel,
    ) -> Result<Self> {
        let space = Arc::clone(probe_prior.space());
        for other in [
            imposter_prior.space(),
            probe_channel.space(),
            gallery_channel.space(),
        ] {
            if **other != *space {
                return Err(Error::SpaceMismatch {
                    context: "world model components",
                });
            }
        }
        Ok(WorldModel {
            space,
            probe_prior,
            imposter_prior,
            probe_channel,
            gallery_channel,
        })
    }

    pub fn space(&self) -> &Arc<CovariateSpace> {
        &self.space
    }

    pub fn probe_prior(&self) -> &Distribution {
        &self.probe_prior
    }

    pub fn imposter_prior(&self) -> &Distribution {
        &self.imposter_prior
    }

    pub fn probe_channel(&self) -> &Channel {
        &self.probe_channel
    }

    pub fn gallery_channel(&self) -> &Channel {
        &self.gallery_channel
    }

    /// Distribution of the noisy probe observation (probe prior pushed
    /// through the probe channel).
    pub fn probe_output_marginal(&self) -> Distribution {
        output_marginal(&self.probe_prior, &self.probe_channel)
            .expect("components share a space by construction")
    }

    /// Distribution of a noisy imposter gallery value (imposter prior pushed
    /// through the gallery channel).
    pub fn gallery_output_marginal(&self) -> Distribution {
        output_marginal(&self.imposter_prior, &self.gallery_channel)
            .expect("components share a space by construction")
    }
}

/// Push a prior through a channel: `out[o] = Σ_c prior[c] · channel[c][o]`.
pub fn output_marginal(prior: &Distribution, channel: &Channel) -> Result<Distribution> {
    if prior.space() != channel.space() {
        return Err(Error::SpaceMismatch {
            context: "output_marginal",
        });
    }
    let m = prior.space().len();
    let mut out = vec![0.0; m];
    for c in 0..m {
        let p = prior.get(c);
        if p == 0.0 {
            continue;
        }
        for (o, slot) in out.iter_mut().enumerate() {
            *slot += p * channel.get(c, o);
        }
    }
    Ok(Distribution::from_normalized(prior.space(), out))
}

/// Bayes inversion: distribution of the true value given one noisy
/// observation, `post[c] ∝ prior[c] · channel[c][observed]`.
///
/// Observations with zero marginal probability are rejected rather than
/// mapped to a fallback; a zero-marginal observation means the model cannot
/// have produced the data.
pub fn posterior(prior: &Distribution, channel: &Channel, observed: &str) -> Result<Distribution> {
    let o = prior.space().index_of(observed)?;
    posterior_by_index(prior, channel, o)
}

pub fn posterior_by_index(
    prior: &Distribution,
    channel: &Channel,
    observed: usize,
) -> Result<Distribution> {
    if prior.space() != channel.space() {
        return Err(Error::SpaceMismatch { context: "posterior" });
    }
    let m = prior.space().len();
    let mut post: Vec<f64> = (0..m).map(|c| prior.get(c) * channel.get(c, observed)).collect();
    let marginal: f64 = post.iter().sum();
    if marginal == 0.0 {
        return Err(Error::UndefinedPosterior {
            label: prior.space().label(observed).to_string(),
            marginal,
        });
    }
    for p in &mut post {
        *p /= marginal;
    }
    Ok(Distribution::from_normalized(prior.space(), post))
}

/// Binomial PMF `B(n, k, p) = C(n, k) p^k (1-p)^{n-k}`, evaluated in the log
/// domain so it stays finite and accurate for n up to ~10^4.
pub fn binomial_pmf(n: u64, k: u64, p: f64) -> Result<f64> {
    if k > n {
        return Err(Error::Domain(format!(
            "binomial_pmf: k = {k} exceeds n = {n}"
        )));
    }
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::Domain(format!(
            "binomial_pmf: p = {p} outside [0, 1]"
        )));
    }
    // Degenerate parameters would produce ln(0) below.
    if p == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    if p == 1.0 {
        return Ok(if k == n { 1.0 } else { 0.0 });
    }
    // ln C(n, k) accumulated as Σ ln((n-k+i)/i), using the smaller tail.
    let k_small = k.min(n - k);
    let mut ln_choose = 0.0;
    for i in 1..=k_small {
        ln_choose += (((n - k_small + i) as f64) / (i as f64)).ln();
    }
    let ln_pmf = ln_choose + (k as f64) * p.ln() + ((n - k) as f64) * (1.0 - p).ln();
    Ok(ln_pmf.exp())
}
