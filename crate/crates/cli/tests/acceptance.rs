//! Acceptance suite: every release-gating check in one target, one test and
//! one printed PASS/FAIL line per criterion.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use covmatch_core::gender::{self, GenderErrorRates};
use covmatch_core::prob::{Channel, CovariateSpace, Distribution, WorldModel};
use covmatch_core::retrieval::{self, RetrievalPolicy};
use covmatch_core::sim::{simulate_match12, simulate_retrieval, simulate_verification, SimConfig};
use covmatch_core::verification;

fn report(id: &str, outcome: Result<String, String>) {
    match outcome {
        Ok(detail) => println!("[PASS] {id}: {detail}"),
        Err(detail) => {
            println!("[FAIL] {id}: {detail}");
            panic!("{id}: {detail}");
        }
    }
}

fn ensure(cond: bool, detail: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(detail)
    }
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn random_probs(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| 0.05 + unit(rng)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / sum).collect()
}

fn random_model(rng: &mut ChaCha8Rng, m: usize) -> WorldModel {
    let space = CovariateSpace::new((0..m).map(|i| format!("l{i}"))).unwrap();
    let rows = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..m).map(|_| random_probs(rng, m)).collect()
    };
    WorldModel::new(
        Distribution::new(&space, random_probs(rng, m)).unwrap(),
        Distribution::new(&space, random_probs(rng, m)).unwrap(),
        Channel::new(&space, rows(rng)).unwrap(),
        Channel::new(&space, rows(rng)).unwrap(),
    )
    .unwrap()
}

fn perfect_model() -> WorldModel {
    gender::gender_model(GenderErrorRates::new(0.0, 0.0).unwrap())
}

#[test]
fn criterion_1_perfect_gender_one_of_two() {
    let started = Instant::now();
    let id = "criterion 1 — perfect-gender 1:2 matching";
    report(id, (|| {
        let model = perfect_model();
        let answer = retrieval::optimal_policy(&model, 2).map_err(|e| e.to_string())?;
        ensure(
            answer.overall_error == 0.25,
            format!("analytic error {} != 0.25 exactly", answer.overall_error),
        )?;
        let config = SimConfig::new(1_000_000, 20_240_101).map_err(|e| e.to_string())?;
        let mc = simulate_retrieval(&model, 2, &answer.policy, &config)
            .map_err(|e| e.to_string())?
            .with_analytic(0.25);
        let dev = (mc.estimate - 0.25).abs();
        ensure(
            mc.within_ci == Some(true),
            format!("Monte Carlo estimate {} off by {dev} > 3 sigma", mc.estimate),
        )?;
        let elapsed = started.elapsed().as_secs_f64();
        ensure(elapsed < 5.0, format!("took {elapsed:.2}s, budget 5s"))?;
        Ok(format!(
            "analytic 0.25 exact; MC {} within 3 sigma (|dev| {dev:.2e} <= {:.2e}); {elapsed:.2}s < 5s",
            mc.estimate,
            3.0 * mc.std_error
        ))
    })());
}

#[test]
fn criterion_2_perfect_gender_verification() {
    let id = "criterion 2 — perfect-gender verification EER";
    report(id, (|| {
        let model = perfect_model();
        let sol = verification::optimal_eer(&model);
        ensure(
            (sol.eer - 1.0 / 3.0).abs() <= 1e-12,
            format!("eer {} != 1/3", sol.eer),
        )?;
        for i in 0..2 {
            ensure(
                (sol.policy.get(i, i) - 2.0 / 3.0).abs() <= 1e-12,
                format!("diagonal acceptance ({i},{i}) = {}", sol.policy.get(i, i)),
            )?;
        }
        let config = SimConfig::new(1_000_000, 20_240_202).map_err(|e| e.to_string())?;
        let (far, frr) =
            simulate_verification(&model, &sol.policy, &config).map_err(|e| e.to_string())?;
        let far = far.with_analytic(sol.far);
        let frr = frr.with_analytic(sol.frr);
        ensure(
            far.within_ci == Some(true),
            format!("simulated FAR {} outside 3 sigma of {}", far.estimate, sol.far),
        )?;
        ensure(
            frr.within_ci == Some(true),
            format!("simulated FRR {} outside 3 sigma of {}", frr.estimate, sol.frr),
        )?;
        Ok(format!(
            "eer = 1/3, diagonal acceptance = 2/3 (1e-12); simulated FAR {} / FRR {} within 3 sigma",
            far.estimate, frr.estimate
        ))
    })());
}

#[test]
fn criterion_3_one_of_n_closed_form() {
    let id = "criterion 3 — 1:N closed form, N = 1..12";
    report(id, (|| {
        let model = perfect_model();
        let mut worst = 0.0f64;
        for n in 1..=12u64 {
            let expected = gender::match1n_perfect(n).map_err(|e| e.to_string())?;
            let got = retrieval::optimal_policy(&model, n)
                .map_err(|e| e.to_string())?
                .overall_error;
            let dev = (got - expected).abs();
            worst = worst.max(dev);
            ensure(
                dev <= 1e-12,
                format!("N={n}: optimal error {got} vs closed form {expected} (|dev| {dev:.2e})"),
            )?;
        }
        Ok(format!(
            "general optimum matches 1 - (2 - 0.5^(N-1))/N for N = 1..12; worst |dev| {worst:.2e} <= 1e-12"
        ))
    })());
}

#[test]
fn criterion_4_retrieval_oracle_equivalence() {
    let started = Instant::now();
    let id = "criterion 4 — retrieval oracle equivalence on 200 random models";
    report(id, (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
        let mut worst_gap = 0.0f64;
        for trial in 0..200usize {
            let m = 1 + trial % 3;
            let n = 1 + (rng.next_u64() % 6);
            let model = random_model(&mut rng, m);
            let optimal = retrieval::optimal_policy(&model, n).map_err(|e| e.to_string())?;

            let mut policies: Vec<(String, RetrievalPolicy)> = vec![
                ("optimal".into(), optimal.policy.clone()),
                ("uniform".into(), RetrievalPolicy::uniform(model.space())),
                ("identity-map".into(), RetrievalPolicy::identity(model.space())),
            ];
            for k in 0..20 {
                let rows = (0..m).map(|_| random_probs(&mut rng, m)).collect();
                policies.push((
                    format!("random-{k}"),
                    RetrievalPolicy::new(model.space(), rows).map_err(|e| e.to_string())?,
                ));
            }

            for (name, policy) in &policies {
                let analytic =
                    retrieval::policy_error(policy, &model, n).map_err(|e| e.to_string())?;
                let oracle = retrieval::brute_force_retrieval(&model, n, policy, None)
                    .map_err(|e| e.to_string())?;
                let gap = (analytic - oracle).abs();
                worst_gap = worst_gap.max(gap);
                ensure(
                    gap <= 1e-10,
                    format!(
                        "model {trial} (M={m}, N={n}), policy {name}: analytic {analytic} vs oracle {oracle}"
                    ),
                )?;
                ensure(
                    optimal.overall_error <= analytic + 1e-12,
                    format!(
                        "model {trial} (M={m}, N={n}): optimal {} beaten by {name} at {analytic}",
                        optimal.overall_error
                    ),
                )?;
            }
        }
        let elapsed = started.elapsed().as_secs_f64();
        ensure(elapsed < 60.0, format!("took {elapsed:.2}s, budget 60s"))?;
        Ok(format!(
            "200 models x 23 policies: worst |analytic - oracle| {worst_gap:.2e} <= 1e-10; optimal dominated nothing; {elapsed:.2}s < 60s"
        ))
    })());
}

#[test]
fn criterion_5_verification_oracle_equivalence() {
    let started = Instant::now();
    let id = "criterion 5 — verification oracle equivalence on 50 random binary models";
    report(id, (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF);
        let mut worst_excess = 0.0f64;
        for trial in 0..50usize {
            let model = random_model(&mut rng, 2);
            let greedy = verification::optimal_eer(&model);
            ensure(
                (greedy.far - greedy.frr).abs() <= 1e-12,
                format!("model {trial}: greedy F_A {} != F_R {}", greedy.far, greedy.frr),
            )?;
            let oracle = verification::brute_force_eer(&model, 21).map_err(|e| e.to_string())?;
            let joints = verification::joint_tables(&model);
            let bound = verification::eer_grid_quantization_bound(&joints, 21);
            ensure(
                greedy.eer <= oracle.eer + 1e-12,
                format!(
                    "model {trial}: grid search {} beat the greedy optimum {}",
                    oracle.eer, greedy.eer
                ),
            )?;
            let excess = oracle.eer - greedy.eer;
            worst_excess = worst_excess.max(excess);
            ensure(
                excess <= bound,
                format!(
                    "model {trial}: oracle {} exceeds greedy {} by {excess:.3e} > quantization bound {bound:.3e}",
                    oracle.eer, greedy.eer
                ),
            )?;
        }
        let elapsed = started.elapsed().as_secs_f64();
        ensure(elapsed < 30.0, format!("took {elapsed:.2}s, budget 30s"))?;
        Ok(format!(
            "50 binary models: greedy <= grid-21 oracle <= greedy + bound (worst excess {worst_excess:.2e}); F_A = F_R to 1e-12; {elapsed:.2}s < 30s"
        ))
    })());
}

#[test]
fn criterion_6_imperfect_gender_verification_closed_form() {
    let id = "criterion 6 — imperfect-gender verification closed form, 36-point grid";
    report(id, (|| {
        let mut worst = 0.0f64;
        for i in 0..6 {
            for j in 0..6 {
                let e_f = i as f64 * 0.1;
                let e_v = j as f64 * 0.1;
                let rates = GenderErrorRates::new(e_f, e_v).map_err(|e| e.to_string())?;
                let alpha = (1.0 - e_f) * (1.0 - e_v) + e_f * e_v;
                let expected = 1.0 / (1.0 + 2.0 * alpha);
                let got = verification::optimal_eer(&gender::gender_model(rates)).eer;
                let dev = (got - expected).abs();
                worst = worst.max(dev);
                ensure(
                    dev <= 1e-9,
                    format!("e_f={e_f} e_v={e_v}: eer {got} vs 1/(1+2a) = {expected}"),
                )?;
            }
        }
        Ok(format!(
            "optimal_eer = 1/(1+2a) on all 36 grid points; worst |dev| {worst:.2e} <= 1e-9"
        ))
    })());
}

#[test]
fn criterion_7_imperfect_gender_one_of_two() {
    let id = "criterion 7 — imperfect-gender 1:2 matching, 36-point grid";
    report(id, (|| {
        let mut worst_ident = 0.0f64;
        let mut seed = 0x1234u64;
        for i in 0..6 {
            for j in 0..6 {
                let e_f = i as f64 * 0.1;
                let e_v = j as f64 * 0.1;
                let rates = GenderErrorRates::new(e_f, e_v).map_err(|e| e.to_string())?;
                let strategy = gender::match12_imperfect(rates);
                let enumerated = gender::match12_error_for_strategy(rates, strategy.p_same);
                let dev = (strategy.error - enumerated).abs();
                worst_ident = worst_ident.max(dev);
                ensure(
                    dev <= 1e-12,
                    format!(
                        "e_f={e_f} e_v={e_v}: branch formula {} vs eight-type enumeration {enumerated}",
                        strategy.error
                    ),
                )?;
                seed += 1;
                let config = SimConfig::new(1_000_000, seed).map_err(|e| e.to_string())?;
                let mc = simulate_match12(rates, strategy.p_same, &config)
                    .map_err(|e| e.to_string())?
                    .with_analytic(strategy.error);
                ensure(
                    mc.within_ci == Some(true),
                    format!(
                        "e_f={e_f} e_v={e_v}: MC {} outside 3 sigma of {}",
                        mc.estimate, strategy.error
                    ),
                )?;
            }
        }
        Ok(format!(
            "branch formulas match the eight-type enumeration (worst |dev| {worst_ident:.2e} <= 1e-12) and 10^6-trial MC stays within 3 sigma on all 36 grid points"
        ))
    })());
}

fn covmatch_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_covmatch"))
}

fn model_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
}

#[test]
fn criterion_8_simulation_determinism() {
    let id = "criterion 8 — byte-identical simulation output";
    report(id, (|| {
        let model = model_path("gender_ef01_ev02.json");
        let model = model.to_str().unwrap();
        let retrieval_args = [
            "retrieval", model, "--n", "2", "--simulate", "1000000", "--seed", "7",
        ];
        let verify_args = ["verify", model, "--simulate", "1000000", "--seed", "7"];

        for (name, args) in [("retrieval", &retrieval_args[..]), ("verify", &verify_args[..])] {
            let mut outputs = Vec::new();
            for workers in ["1", "4", "1"] {
                let out = covmatch_bin()
                    .args(args)
                    .env("RAYON_NUM_THREADS", workers)
                    .output()
                    .map_err(|e| e.to_string())?;
                ensure(
                    out.status.success(),
                    format!("{name} run failed: {}", String::from_utf8_lossy(&out.stderr)),
                )?;
                outputs.push(out.stdout);
            }
            ensure(
                outputs[0] == outputs[2],
                format!("{name}: repeated invocation changed the output bytes"),
            )?;
            ensure(
                outputs[0] == outputs[1],
                format!("{name}: worker count changed the output bytes"),
            )?;
        }
        Ok(
            "retrieval and verify simulate runs are byte-identical across repeats and worker counts"
                .to_string(),
        )
    })());
}
