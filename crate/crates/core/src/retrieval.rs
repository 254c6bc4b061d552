//! Optimal 1-of-N retrieval under the noisy-covariate model.
//!
//! A retrieval policy observes only the noisy probe value, commits to a
//! target covariate value, and then picks uniformly among the gallery
//! entries whose noisy value equals the target. Trials where no gallery
//! entry carries the target value count as errors.

use crate::error::{Error, Result};
use crate::prob::{posterior_by_index, CovariateSpace, Distribution, WorldModel};
use std::sync::Arc;

/// Default term budget for the exhaustive enumeration oracle.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 10_000_000;

/// A stochastic retrieval rule: row `c̃_p` is a distribution over the target
/// value chosen when the noisy probe reads `c̃_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalPolicy {
    space: Arc<CovariateSpace>,
    rows: Vec<Vec<f64>>,
}

impl RetrievalPolicy {
    pub fn new(space: &Arc<CovariateSpace>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != space.len() {
            return Err(Error::DimensionMismatch {
                context: "retrieval policy",
                expected: space.len(),
                got: rows.len(),
            });
        }
        let rows = rows
            .into_iter()
            .map(|row| Distribution::new(space, row).map(|d| d.probs().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Ok(RetrievalPolicy {
            space: Arc::clone(space),
            rows,
        })
    }

    /// Ignores the probe and targets every value with equal probability.
    pub fn uniform(space: &Arc<CovariateSpace>) -> Self {
        let m = space.len();
        RetrievalPolicy {
            space: Arc::clone(space),
            rows: vec![vec![1.0 / m as f64; m]; m],
        }
    }

    /// Targets exactly the observed noisy probe value.
    pub fn identity(space: &Arc<CovariateSpace>) -> Self {
        Self::deterministic(space, (0..space.len()).collect())
    }

    /// Point-mass rows: probe reading `i` targets value `map[i]`.
    pub fn deterministic(space: &Arc<CovariateSpace>, map: Vec<usize>) -> Self {
        let m = space.len();
        assert_eq!(map.len(), m, "deterministic policy map must cover every probe value");
        let rows = map
            .into_iter()
            .map(|j| {
                let mut row = vec![0.0; m];
                row[j] = 1.0;
                row
            })
            .collect();
        RetrievalPolicy {
            space: Arc::clone(space),
            rows,
        }
    }

    pub fn space(&self) -> &Arc<CovariateSpace> {
        &self.space
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, noisy_probe: usize, target: usize) -> f64 {
        self.rows[noisy_probe][target]
    }
}

/// The optimal policy together with its per-probe correctness profile.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalAnswer {
    pub policy: RetrievalPolicy,
    /// P(correct | c̃_p) under the policy, indexed by noisy probe value.
    pub per_probe_correct: Vec<f64>,
    pub overall_error: f64,
    /// Noisy probe values with zero marginal probability. Their policy rows
    /// are point masses on index 0 and carry no weight in the overall error.
    pub unreachable_probes: Vec<usize>,
}

fn check_gallery_size(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain(
            "gallery size must be at least 1".to_string(),
        ));
    }
    Ok(())
}

/// Collision-discount factor `g(ĉ) = (1 - (1 - p)^N) / (N p)` with
/// `p = P_GJ(ĉ)`: the expected credit 1/(K+1) for picking uniformly among
/// the true match and K ~ Binomial(N-1, p) colliding imposters. Defined as 1
/// at p = 0 (the p → 0 limit; no imposter can collide).
fn gain_factor(p_gj: f64, n: u64) -> f64 {
    if p_gj == 0.0 {
        return 1.0;
    }
    let nf = n as f64;
    let survive = if n <= i32::MAX as u64 {
        (1.0 - p_gj).powi(n as i32)
    } else {
        (1.0 - p_gj).powf(nf)
    };
    (1.0 - survive) / (nf * p_gj)
}

/// The target-value quality factor `g(ĉ)` for gallery size `n`.
pub fn gain(cs: &str, model: &WorldModel, n: u64) -> Result<f64> {
    check_gallery_size(n)?;
    let idx = model.space().index_of(cs)?;
    let p_gj = model.gallery_output_marginal();
    Ok(gain_factor(p_gj.get(idx), n))
}

/// Everything `policy_error` and `optimal_policy` need, computed once:
/// the noisy-probe marginal and, for every reachable noisy probe, the
/// correctness `q[c̃_p][ĉ]` of committing to each target value.
struct CorrectnessTable {
    probe_marginal: Vec<f64>,
    q: Vec<Vec<f64>>,
    unreachable: Vec<usize>,
}

fn correctness_table(model: &WorldModel, n: u64) -> Result<CorrectnessTable> {
    check_gallery_size(n)?;
    let m = model.space().len();
    let probe_marginal = model.probe_output_marginal().probs().to_vec();
    let p_gj = model.gallery_output_marginal();
    let gains: Vec<f64> = (0..m).map(|cs| gain_factor(p_gj.get(cs), n)).collect();

    let mut q = vec![vec![0.0; m]; m];
    let mut unreachable = Vec::new();
    for ctp in 0..m {
        if probe_marginal[ctp] == 0.0 {
            unreachable.push(ctp);
            continue;
        }
        let post = posterior_by_index(model.probe_prior(), model.probe_channel(), ctp)?;
        for cs in 0..m {
            let mut acc = 0.0;
            for cp in 0..m {
                acc += post.get(cp) * model.gallery_channel().get(cp, cs);
            }
            q[ctp][cs] = acc * gains[cs];
        }
    }
    Ok(CorrectnessTable {
        probe_marginal,
        q,
        unreachable,
    })
}

/// P(correct | c̃_p, target ĉ): the posterior-weighted probability that the
/// true match lands on `cs` times the collision discount.
pub fn correct_given_noisy_probe(
    ctilde_p: &str,
    cs: &str,
    model: &WorldModel,
    n: u64,
) -> Result<f64> {
    check_gallery_size(n)?;
    let ctp = model.space().index_of(ctilde_p)?;
    let target = model.space().index_of(cs)?;
    let marginal = model.probe_output_marginal();
    if marginal.get(ctp) == 0.0 {
        return Err(Error::UndefinedPosterior {
            label: ctilde_p.to_string(),
            marginal: 0.0,
        });
    }
    let table = correctness_table(model, n)?;
    Ok(table.q[ctp][target])
}

fn error_from_table(table: &CorrectnessTable, policy: &RetrievalPolicy) -> f64 {
    let m = table.probe_marginal.len();
    let mut correct = 0.0;
    for ctp in 0..m {
        let weight = table.probe_marginal[ctp];
        if weight == 0.0 {
            continue;
        }
        let mut row_correct = 0.0;
        for cs in 0..m {
            row_correct += policy.get(ctp, cs) * table.q[ctp][cs];
        }
        correct += weight * row_correct;
    }
    1.0 - correct
}

/// Exact analytic error of an arbitrary stochastic policy.
pub fn policy_error(policy: &RetrievalPolicy, model: &WorldModel, n: u64) -> Result<f64> {
    if **policy.space() != **model.space() {
        return Err(Error::SpaceMismatch {
            context: "policy_error",
        });
    }
    let table = correctness_table(model, n)?;
    Ok(error_from_table(&table, policy))
}

/// The deterministic argmax policy and its error. Ties break toward the
/// lowest target index; any tie-break attains the same optimum.
pub fn optimal_policy(model: &WorldModel, n: u64) -> Result<RetrievalAnswer> {
    let table = correctness_table(model, n)?;
    let m = table.probe_marginal.len();
    let mut map = vec![0usize; m];
    let mut per_probe_correct = vec![0.0; m];
    for ctp in 0..m {
        if table.probe_marginal[ctp] == 0.0 {
            continue; // row stays a point mass on index 0, weight 0
        }
        let mut best = 0usize;
        for cs in 1..m {
            if table.q[ctp][cs] > table.q[ctp][best] {
                best = cs;
            }
        }
        map[ctp] = best;
        per_probe_correct[ctp] = table.q[ctp][best];
    }
    let policy = RetrievalPolicy::deterministic(model.space(), map);
    let overall_error = error_from_table(&table, &policy);
    Ok(RetrievalAnswer {
        policy,
        per_probe_correct,
        overall_error,
        unreachable_probes: table.unreachable,
    })
}

/// Number of weak compositions of `total` into `parts` parts,
/// `C(total + parts - 1, parts - 1)`, saturating on overflow.
fn composition_count(total: u64, parts: u64) -> u128 {
    debug_assert!(parts >= 1);
    let k = (parts - 1).min(total); // C(total + parts - 1, parts - 1), smaller index
    let n = total as u128 + parts as u128 - 1;
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        match acc.checked_mul(n - k as u128 + i) {
            Some(v) => acc = v / i, // exact: prefix of a binomial is divisible
            None => return u128::MAX,
        }
    }
    acc
}

/// Exhaustive-enumeration oracle for the error of `policy`.
///
/// Sums over the true probe value, both noisy observations of it, and the
/// multinomial distribution of imposter noisy-value counts. The choice of
/// target ĉ earns credit `[c̃_g0 = ĉ] / (1 + imposter count on ĉ)`; picking a
/// value no gallery entry carries is an error. Terms accumulate in sorted
/// magnitude order. Refuses instances whose term count exceeds `budget`
/// (default [`DEFAULT_ENUMERATION_BUDGET`]), reporting the required budget.
pub fn brute_force_retrieval(
    model: &WorldModel,
    n: u64,
    policy: &RetrievalPolicy,
    budget: Option<u64>,
) -> Result<f64> {
    check_gallery_size(n)?;
    if **policy.space() != **model.space() {
        return Err(Error::SpaceMismatch {
            context: "brute_force_retrieval",
        });
    }
    let budget = budget.unwrap_or(DEFAULT_ENUMERATION_BUDGET);
    let m = model.space().len();
    let comps = composition_count(n - 1, m as u64);
    let required = (m as u128).pow(3).saturating_mul(comps);
    if required > budget as u128 {
        return Err(Error::OracleBudgetExceeded { required, budget });
    }

    let p_q = model.probe_prior();
    let p_g_j = model.gallery_output_marginal();
    let h = model.probe_channel();
    let j = model.gallery_channel();

    // ln k! for k = 0..n-1, for the multinomial coefficient.
    let imposters = (n - 1) as usize;
    let mut ln_fact = vec![0.0f64; imposters + 1];
    for k in 1..=imposters {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let ln_pgj: Vec<f64> = (0..m)
        .map(|v| if p_g_j.get(v) > 0.0 { p_g_j.get(v).ln() } else { f64::NEG_INFINITY })
        .collect();

    let mut terms: Vec<f64> = Vec::new();
    let mut counts = vec![0u64; m];
    enumerate_compositions(imposters as u64, 0, &mut counts, &mut |counts| {
        // Multinomial weight of this imposter count vector.
        let mut ln_w = ln_fact[imposters];
        for v in 0..m {
            let c = counts[v];
            if c == 0 {
                continue;
            }
            if ln_pgj[v] == f64::NEG_INFINITY {
                return; // impossible composition
            }
            ln_w += c as f64 * ln_pgj[v] - ln_fact[c as usize];
        }
        let w_counts = ln_w.exp();
        if w_counts == 0.0 {
            return;
        }
        for cp in 0..m {
            let w_cp = p_q.get(cp) * w_counts;
            if w_cp == 0.0 {
                continue;
            }
            for ctp in 0..m {
                let w_ctp = w_cp * h.get(cp, ctp);
                if w_ctp == 0.0 {
                    continue;
                }
                // Credit is nonzero only when the target equals the true
                // match's noisy value.
                for (ctg0, &collisions) in counts.iter().enumerate() {
                    let r = policy.get(ctp, ctg0);
                    if r == 0.0 {
                        continue;
                    }
                    let w = w_ctp * j.get(cp, ctg0) * r / (1.0 + collisions as f64);
                    if w > 0.0 {
                        terms.push(w);
                    }
                }
            }
        }
    });

    terms.sort_unstable_by(f64::total_cmp);
    let correct: f64 = terms.iter().sum();
    Ok(1.0 - correct)
}

fn enumerate_compositions(
    remaining: u64,
    idx: usize,
    counts: &mut Vec<u64>,
    visit: &mut impl FnMut(&[u64]),
) {
    if idx == counts.len() - 1 {
        counts[idx] = remaining;
        visit(counts);
        return;
    }
    for c in 0..=remaining {
        counts[idx] = c;
        enumerate_compositions(remaining - c, idx + 1, counts, visit);
    }
}
