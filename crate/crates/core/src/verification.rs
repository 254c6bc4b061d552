//! Verification: analytic false-accept / false-reject rates for stochastic
//! acceptance policies, and the EER-minimizing policy.
//!
//! Minimizing the false-acceptance rate subject to the equal-error
//! constraint is a continuous knapsack: with per-cell weight
//! `a = P(mismatch) + β·P(match)` and cost `c = P(mismatch)`, the program is
//! `min Σ c·r  s.t.  Σ a·r = β, 0 ≤ r ≤ 1`, solved exactly by greedy ratio
//! ordering.

use crate::error::{Error, Result};
use crate::prob::{CovariateSpace, WorldModel};
use std::sync::Arc;

/// Evaluation budget for the grid-search oracle.
pub const GRID_SEARCH_BUDGET: u128 = 10_000_000;

/// Joint distributions of the noisy pair `(c̃_p, c̃_g)` under the match and
/// mismatch hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    space: Arc<CovariateSpace>,
    match_table: Vec<Vec<f64>>,
    mismatch_table: Vec<Vec<f64>>,
}

fn validate_joint(context: &'static str, space: &CovariateSpace, table: &[Vec<f64>]) -> Result<()> {
    if table.len() != space.len() || table.iter().any(|row| row.len() != space.len()) {
        return Err(Error::DimensionMismatch {
            context,
            expected: space.len(),
            got: table.len(),
        });
    }
    let mut sum = 0.0;
    for row in table {
        for (j, &p) in row.iter().enumerate() {
            if !p.is_finite()
                || !(0.0..=1.0 + crate::prob::NORMALIZATION_TOLERANCE).contains(&p)
            {
                return Err(Error::ProbabilityOutOfRange {
                    context,
                    index: j,
                    value: p,
                });
            }
            sum += p;
        }
    }
    if (sum - 1.0).abs() > crate::prob::NORMALIZATION_TOLERANCE {
        return Err(Error::NotNormalized {
            context,
            sum,
            tolerance: crate::prob::NORMALIZATION_TOLERANCE,
        });
    }
    Ok(())
}

impl JointTable {
    pub fn new(
        space: &Arc<CovariateSpace>,
        match_table: Vec<Vec<f64>>,
        mismatch_table: Vec<Vec<f64>>,
    ) -> Result<Self> {
        validate_joint("joint match table", space, &match_table)?;
        validate_joint("joint mismatch table", space, &mismatch_table)?;
        Ok(JointTable {
            space: Arc::clone(space),
            match_table,
            mismatch_table,
        })
    }

    pub fn space(&self) -> &Arc<CovariateSpace> {
        &self.space
    }

    /// P(c̃_p, c̃_g | match).
    pub fn match_prob(&self, ctp: usize, ctg: usize) -> f64 {
        self.match_table[ctp][ctg]
    }

    /// P(c̃_p, c̃_g | mismatch).
    pub fn mismatch_prob(&self, ctp: usize, ctg: usize) -> f64 {
        self.mismatch_table[ctp][ctg]
    }

    pub fn match_table(&self) -> &[Vec<f64>] {
        &self.match_table
    }

    pub fn mismatch_table(&self) -> &[Vec<f64>] {
        &self.mismatch_table
    }
}

/// A stochastic acceptance rule: entry `(c̃_p, c̃_g)` is the probability of
/// accepting that observed pair as a match.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationPolicy {
    space: Arc<CovariateSpace>,
    accept: Vec<Vec<f64>>,
}

impl VerificationPolicy {
    pub fn new(space: &Arc<CovariateSpace>, accept: Vec<Vec<f64>>) -> Result<Self> {
        if accept.len() != space.len() || accept.iter().any(|row| row.len() != space.len()) {
            return Err(Error::DimensionMismatch {
                context: "verification policy",
                expected: space.len(),
                got: accept.len(),
            });
        }
        for row in &accept {
            for (j, &p) in row.iter().enumerate() {
                if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                    return Err(Error::ProbabilityOutOfRange {
                        context: "verification policy",
                        index: j,
                        value: p,
                    });
                }
            }
        }
        Ok(VerificationPolicy {
            space: Arc::clone(space),
            accept,
        })
    }

    pub fn constant(space: &Arc<CovariateSpace>, accept_probability: f64) -> Result<Self> {
        let m = space.len();
        Self::new(space, vec![vec![accept_probability; m]; m])
    }

    /// Accept iff the two observed labels agree, with probability `p`.
    pub fn diagonal(space: &Arc<CovariateSpace>, p: f64) -> Result<Self> {
        let m = space.len();
        let mut accept = vec![vec![0.0; m]; m];
        for (i, row) in accept.iter_mut().enumerate() {
            row[i] = p;
        }
        Self::new(space, accept)
    }

    pub fn space(&self) -> &Arc<CovariateSpace> {
        &self.space
    }

    pub fn get(&self, ctp: usize, ctg: usize) -> f64 {
        self.accept[ctp][ctg]
    }

    pub fn accept_matrix(&self) -> &[Vec<f64>] {
        &self.accept
    }
}

/// An optimal operating point: the policy and its error rates. For the
/// default β = 1 this is the equal-error point (far = frr = eer); for a
/// general β the policy satisfies far = β·frr and `eer` holds the achieved
/// false-acceptance rate.
#[derive(Debug, Clone, PartialEq)]
pub struct EerSolution {
    pub policy: VerificationPolicy,
    pub eer: f64,
    pub far: f64,
    pub frr: f64,
}

/// Joint match/mismatch tables of the model. The mismatch table factorizes
/// as the outer product of the noisy-probe and noisy-gallery marginals.
pub fn joint_tables(model: &WorldModel) -> JointTable {
    let m = model.space().len();
    let p_q = model.probe_prior();
    let h = model.probe_channel();
    let j = model.gallery_channel();
    let p_qh = model.probe_output_marginal();
    let p_gj = model.gallery_output_marginal();

    let mut match_table = vec![vec![0.0; m]; m];
    for cp in 0..m {
        let w = p_q.get(cp);
        if w == 0.0 {
            continue;
        }
        for (ctp, row) in match_table.iter_mut().enumerate() {
            let w2 = w * h.get(cp, ctp);
            if w2 == 0.0 {
                continue;
            }
            for (ctg, cell) in row.iter_mut().enumerate() {
                *cell += w2 * j.get(cp, ctg);
            }
        }
    }
    let mismatch_table = (0..m)
        .map(|ctp| (0..m).map(|ctg| p_qh.get(ctp) * p_gj.get(ctg)).collect())
        .collect();
    JointTable {
        space: Arc::clone(model.space()),
        match_table,
        mismatch_table,
    }
}

fn check_shared_space(policy: &VerificationPolicy, joints: &JointTable, context: &'static str) -> Result<()> {
    if **policy.space() != **joints.space() {
        return Err(Error::SpaceMismatch { context });
    }
    Ok(())
}

/// False-acceptance rate: probability of accepting a mismatched pair.
pub fn far(policy: &VerificationPolicy, joints: &JointTable) -> Result<f64> {
    check_shared_space(policy, joints, "far")?;
    let m = joints.space().len();
    let mut acc = 0.0;
    for ctp in 0..m {
        for ctg in 0..m {
            acc += policy.get(ctp, ctg) * joints.mismatch_prob(ctp, ctg);
        }
    }
    Ok(acc)
}

/// False-rejection rate: probability of rejecting a matched pair.
pub fn frr(policy: &VerificationPolicy, joints: &JointTable) -> Result<f64> {
    check_shared_space(policy, joints, "frr")?;
    let m = joints.space().len();
    let mut acc = 0.0;
    for ctp in 0..m {
        for ctg in 0..m {
            acc += (1.0 - policy.get(ctp, ctg)) * joints.match_prob(ctp, ctg);
        }
    }
    Ok(acc)
}

/// The EER-minimizing acceptance policy (β = 1).
pub fn optimal_eer(model: &WorldModel) -> EerSolution {
    optimal_operating_point(model, 1.0).expect("beta = 1 is always valid")
}

/// Minimizes the false-acceptance rate at the operating point
/// `F_A = beta · F_R`. The constraint is always feasible: total cell weight
/// `Σ (mismatch + beta·match)` is `1 + beta`, which exceeds the budget
/// `beta`.
///
/// Greedy ratio ordering solves the knapsack exactly. Cells that are
/// unreachable under both hypotheses are pinned to reject. When the budget
/// boundary falls inside a run of exactly tied cost/weight ratios, the
/// remaining budget is spread uniformly over the tied cells — every split of
/// a tied run attains the same objective, and the uniform one preserves the
/// model's symmetries.
pub fn optimal_operating_point(model: &WorldModel, beta: f64) -> Result<EerSolution> {
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::Domain(format!(
            "operating-point ratio beta must be positive and finite, got {beta}"
        )));
    }
    let joints = joint_tables(model);
    let m = joints.space().len();

    struct Cell {
        ctp: usize,
        ctg: usize,
        weight: f64,
        ratio: f64,
    }
    let mut cells = Vec::with_capacity(m * m);
    for ctp in 0..m {
        for ctg in 0..m {
            let cost = joints.mismatch_prob(ctp, ctg);
            let weight = cost + beta * joints.match_prob(ctp, ctg);
            if weight == 0.0 {
                continue; // unreachable under both hypotheses: r stays 0
            }
            cells.push(Cell {
                ctp,
                ctg,
                weight,
                ratio: cost / weight,
            });
        }
    }
    cells.sort_by(|x, y| {
        x.ratio
            .total_cmp(&y.ratio)
            .then(x.ctp.cmp(&y.ctp))
            .then(x.ctg.cmp(&y.ctg))
    });

    let mut accept = vec![vec![0.0; m]; m];
    let mut remaining = beta;
    let mut i = 0;
    while i < cells.len() && remaining > 0.0 {
        // Maximal run of exactly tied ratios.
        let mut j = i + 1;
        while j < cells.len() && cells[j].ratio == cells[i].ratio {
            j += 1;
        }
        let run_weight: f64 = cells[i..j].iter().map(|c| c.weight).sum();
        let fill = if run_weight <= remaining {
            remaining -= run_weight;
            1.0
        } else {
            let f = remaining / run_weight;
            remaining = 0.0;
            f
        };
        for cell in &cells[i..j] {
            accept[cell.ctp][cell.ctg] = fill;
        }
        i = j;
    }
    debug_assert!(remaining <= 1e-12, "knapsack budget not exhausted: {remaining}");

    let policy = VerificationPolicy {
        space: Arc::clone(joints.space()),
        accept,
    };
    let far = far(&policy, &joints)?;
    let frr = frr(&policy, &joints)?;
    Ok(EerSolution {
        policy,
        eer: far,
        far,
        frr,
    })
}

/// How far above the true optimum the grid-search oracle can land, for a
/// given joint table and grid resolution: one half grid step on every
/// non-pivot cell plus the pivot cell's compensating move.
pub fn eer_grid_quantization_bound(joints: &JointTable, grid: usize) -> f64 {
    let m = joints.space().len();
    let mut a_total = 0.0;
    let mut a_max = 0.0f64;
    for ctp in 0..m {
        for ctg in 0..m {
            let a = joints.mismatch_prob(ctp, ctg) + joints.match_prob(ctp, ctg);
            a_total += a;
            a_max = a_max.max(a);
        }
    }
    let h = 1.0 / (grid - 1) as f64;
    0.5 * h * (1.0 + (a_total - a_max) / a_max)
}

/// Grid-search oracle for the EER point (β = 1).
///
/// Scans every assignment of grid values `{0, 1/(g-1), …, 1}` to all
/// reachable cells but one, solving the held-out pivot cell exactly from the
/// equal-error constraint; every reachable cell takes a turn as the pivot.
/// The best feasible candidate upper-bounds the true optimum by at most
/// [`eer_grid_quantization_bound`].
pub fn brute_force_eer(model: &WorldModel, grid: usize) -> Result<EerSolution> {
    let m = model.space().len();
    if m > 3 {
        return Err(Error::GridGuard(format!(
            "space has {m} labels; the grid oracle is limited to 3"
        )));
    }
    if !(2..=21).contains(&grid) {
        return Err(Error::GridGuard(format!(
            "grid resolution must be in 2..=21, got {grid}"
        )));
    }
    let joints = joint_tables(model);
    let mut free: Vec<(usize, usize, f64, f64)> = Vec::new(); // (ctp, ctg, a, c)
    for ctp in 0..m {
        for ctg in 0..m {
            let c = joints.mismatch_prob(ctp, ctg);
            let a = c + joints.match_prob(ctp, ctg);
            if a > 0.0 {
                free.push((ctp, ctg, a, c));
            }
        }
    }
    let evals = (free.len() as u128)
        .saturating_mul((grid as u128).saturating_pow(free.len().saturating_sub(1) as u32));
    if evals > GRID_SEARCH_BUDGET {
        return Err(Error::GridGuard(format!(
            "{evals} grid evaluations exceed the budget of {GRID_SEARCH_BUDGET}; \
             lower the grid resolution"
        )));
    }

    let steps: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
    let k = free.len();
    let mut best_fa = f64::INFINITY;
    let mut best_r: Vec<f64> = Vec::new();

    let mut r = vec![0.0f64; k];
    for pivot in 0..k {
        let others: Vec<usize> = (0..k).filter(|&i| i != pivot).collect();
        let mut idx = vec![0usize; others.len()];
        loop {
            let mut spent = 0.0;
            let mut fa_partial = 0.0;
            for (slot, &cell) in others.iter().enumerate() {
                let v = steps[idx[slot]];
                r[cell] = v;
                spent += free[cell].2 * v;
                fa_partial += free[cell].3 * v;
            }
            let pivot_r = (1.0 - spent) / free[pivot].2;
            if (-1e-12..=1.0 + 1e-12).contains(&pivot_r) {
                let pivot_r = pivot_r.clamp(0.0, 1.0);
                r[pivot] = pivot_r;
                let fa = fa_partial + free[pivot].3 * pivot_r;
                if fa < best_fa {
                    best_fa = fa;
                    best_r = r.clone();
                }
            }
            // Odometer increment over the non-pivot cells.
            let mut carry = true;
            for slot in (0..idx.len()).rev() {
                idx[slot] += 1;
                if idx[slot] < grid {
                    carry = false;
                    break;
                }
                idx[slot] = 0;
            }
            if carry || others.is_empty() {
                break;
            }
        }
        if others.is_empty() {
            break;
        }
    }

    if best_r.is_empty() {
        return Err(Error::GridGuard(
            "grid search found no feasible policy on the equal-error constraint".to_string(),
        ));
    }
    let mut accept = vec![vec![0.0; m]; m];
    for (i, &(ctp, ctg, _, _)) in free.iter().enumerate() {
        accept[ctp][ctg] = best_r[i];
    }
    let policy = VerificationPolicy {
        space: Arc::clone(joints.space()),
        accept,
    };
    let far = far(&policy, &joints)?;
    let frr = frr(&policy, &joints)?;
    Ok(EerSolution {
        policy,
        eer: far,
        far,
        frr,
    })
}
