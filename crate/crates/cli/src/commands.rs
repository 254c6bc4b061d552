//! Command implementations and dispatch.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use covmatch_core::error::Error as CoreError;
use covmatch_core::gender::{self, GenderErrorRates};
use covmatch_core::prob::WorldModel;
use covmatch_core::retrieval::{self, RetrievalPolicy};
use covmatch_core::sim::{self, SimConfig};
use covmatch_core::verification;

use crate::model::ModelFile;
use crate::report::{
    fmt_float17, to_json_string, NormalizedModel, SimReportJson,
};

#[derive(Debug)]
pub enum CliError {
    Schema(String),
    Domain(String),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Schema(msg) => write!(f, "schema violation: {msg}"),
            CliError::Domain(msg) => write!(f, "{msg}"),
            CliError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        if err.is_structural() {
            CliError::Schema(err.to_string())
        } else {
            CliError::Domain(err.to_string())
        }
    }
}

#[derive(Parser)]
#[command(
    name = "covmatch",
    version,
    about = "Optimal matching and verification strategies over noisily classified covariates"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze 1-of-N retrieval for a model
    Retrieval(RetrievalArgs),
    /// Analyze verification (EER operating point) for a model
    Verify(VerifyArgs),
    /// Closed forms for the 50/50 binary gender case
    Gender {
        #[command(subcommand)]
        task: GenderTask,
    },
    /// Emit CSV curves over a parameter grid
    Sweep {
        #[command(subcommand)]
        mode: SweepMode,
    },
}

#[derive(Args)]
struct RetrievalArgs {
    /// Model JSON file
    model: PathBuf,
    /// Gallery size
    #[arg(long)]
    n: u64,
    /// "optimal", "uniform", or a path to a policy JSON file (an MxM array
    /// of row distributions over target values)
    #[arg(long, default_value = "optimal")]
    policy: String,
    /// Also run a Monte Carlo estimate with this many trials
    #[arg(long, value_name = "TRIALS")]
    simulate: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = SimConfig::DEFAULT_CHUNK_SIZE)]
    chunk_size: u64,
}

#[derive(Args)]
struct VerifyArgs {
    /// Model JSON file
    model: PathBuf,
    /// Operating-point ratio: minimize F_A subject to F_A = beta * F_R
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Also run Monte Carlo FAR/FRR estimates with this many trials each
    #[arg(long, value_name = "TRIALS")]
    simulate: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = SimConfig::DEFAULT_CHUNK_SIZE)]
    chunk_size: u64,
}

#[derive(Subcommand)]
enum GenderTask {
    /// Optimal 1:2 matching under classification noise
    Match12 {
        #[arg(long)]
        e_f: f64,
        #[arg(long)]
        e_v: f64,
        /// Also report the general-module value and the absolute difference
        #[arg(long)]
        check: bool,
    },
    /// Optimal 1:N matching with perfect classification
    Match1n {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        check: bool,
    },
    /// Optimal verification EER under classification noise
    Verify {
        #[arg(long)]
        e_f: f64,
        #[arg(long)]
        e_v: f64,
        #[arg(long)]
        check: bool,
    },
}

#[derive(Subcommand)]
enum SweepMode {
    /// Optimal retrieval error versus gallery size
    N {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        from: u64,
        #[arg(long)]
        to: u64,
        /// Output CSV path ("-" for stdout)
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_name = "TRIALS")]
        simulate: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = SimConfig::DEFAULT_CHUNK_SIZE)]
        chunk_size: u64,
    },
    /// Optimal verification EER over symmetric binary error-rate grids
    Eer {
        /// Gallery-side (face) error rates, comma separated
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        e_f: Vec<f64>,
        /// Probe-side (voice) error rates, comma separated
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        e_v: Vec<f64>,
        /// Output CSV path ("-" for stdout)
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_name = "TRIALS")]
        simulate: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = SimConfig::DEFAULT_CHUNK_SIZE)]
        chunk_size: u64,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Retrieval(args) => cmd_retrieval(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Gender { task } => cmd_gender(task),
        Command::Sweep { mode } => cmd_sweep(mode),
    }
}

// ---------------------------------------------------------------------------
// retrieval
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RetrievalSimSection {
    seed: u64,
    chunk_size: u64,
    #[serde(flatten)]
    report: SimReportJson,
}

#[derive(Serialize)]
struct RetrievalReport {
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    model_name: Option<String>,
    model: ModelFile,
    model_normalized: NormalizedModel,
    n: u64,
    policy_source: String,
    policy: Vec<Vec<f64>>,
    per_probe_correct: Vec<f64>,
    unreachable_probes: Vec<usize>,
    analytic_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulation: Option<RetrievalSimSection>,
}

fn load_retrieval_policy(
    selector: &str,
    model: &WorldModel,
    n: u64,
) -> Result<(String, RetrievalPolicy), CliError> {
    match selector {
        "optimal" => {
            let answer = retrieval::optimal_policy(model, n)?;
            Ok(("optimal".to_string(), answer.policy))
        }
        "uniform" => Ok(("uniform".to_string(), RetrievalPolicy::uniform(model.space()))),
        path => {
            let bytes = fs::read(path)
                .map_err(|e| CliError::Io(format!("cannot read policy file {path}: {e}")))?;
            let rows: Vec<Vec<f64>> = serde_json::from_slice(&bytes)
                .map_err(|e| CliError::Schema(format!("policy file {path}: {e}")))?;
            let policy = RetrievalPolicy::new(model.space(), rows)
                .map_err(|e| CliError::Schema(format!("policy file {path}: {e}")))?;
            Ok((format!("file:{path}"), policy))
        }
    }
}

fn per_probe_correctness(
    policy: &RetrievalPolicy,
    model: &WorldModel,
    n: u64,
) -> Result<(Vec<f64>, Vec<usize>), CliError> {
    let m = model.space().len();
    let marginal = model.probe_output_marginal();
    let mut per_probe = vec![0.0; m];
    let mut unreachable = Vec::new();
    for (ctp, slot) in per_probe.iter_mut().enumerate() {
        if marginal.get(ctp) == 0.0 {
            unreachable.push(ctp);
            continue;
        }
        let label = model.space().label(ctp);
        let mut acc = 0.0;
        for cs in 0..m {
            let weight = policy.get(ctp, cs);
            if weight == 0.0 {
                continue;
            }
            let target = model.space().label(cs);
            acc += weight * retrieval::correct_given_noisy_probe(label, target, model, n)?;
        }
        *slot = acc;
    }
    Ok((per_probe, unreachable))
}

fn cmd_retrieval(args: RetrievalArgs) -> Result<(), CliError> {
    let file = ModelFile::load(&args.model)?;
    let model = file.to_world_model()?;
    let (policy_source, policy) = load_retrieval_policy(&args.policy, &model, args.n)?;
    let analytic_error = retrieval::policy_error(&policy, &model, args.n)?;
    let (per_probe_correct, unreachable_probes) =
        per_probe_correctness(&policy, &model, args.n)?;

    let simulation = match args.simulate {
        Some(trials) => {
            let config = SimConfig::with_chunk_size(trials, args.seed, args.chunk_size)?;
            let report = sim::simulate_retrieval(&model, args.n, &policy, &config)?
                .with_analytic(analytic_error);
            Some(RetrievalSimSection {
                seed: args.seed,
                chunk_size: args.chunk_size,
                report: SimReportJson::from(&report),
            })
        }
        None => None,
    };

    let report = RetrievalReport {
        command: "retrieval",
        model_name: file.name().map(str::to_string),
        model_normalized: NormalizedModel::from_model(&model),
        model: file,
        n: args.n,
        policy_source,
        policy: policy.rows().to_vec(),
        per_probe_correct,
        unreachable_probes,
        analytic_error,
        simulation,
    };
    println!("{}", to_json_string(&report));
    Ok(())
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct VerifySimSection {
    seed: u64,
    chunk_size: u64,
    far: SimReportJson,
    frr: SimReportJson,
}

#[derive(Serialize)]
struct VerifyReport {
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    model_name: Option<String>,
    model: ModelFile,
    model_normalized: NormalizedModel,
    beta: f64,
    joint_match: Vec<Vec<f64>>,
    joint_mismatch: Vec<Vec<f64>>,
    policy: Vec<Vec<f64>>,
    eer: f64,
    far: f64,
    frr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulation: Option<VerifySimSection>,
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let file = ModelFile::load(&args.model)?;
    let model = file.to_world_model()?;
    let joints = verification::joint_tables(&model);
    let solution = verification::optimal_operating_point(&model, args.beta)?;

    let simulation = match args.simulate {
        Some(trials) => {
            let config = SimConfig::with_chunk_size(trials, args.seed, args.chunk_size)?;
            let (far, frr) = sim::simulate_verification(&model, &solution.policy, &config)?;
            Some(VerifySimSection {
                seed: args.seed,
                chunk_size: args.chunk_size,
                far: SimReportJson::from(&far.with_analytic(solution.far)),
                frr: SimReportJson::from(&frr.with_analytic(solution.frr)),
            })
        }
        None => None,
    };

    let report = VerifyReport {
        command: "verify",
        model_name: file.name().map(str::to_string),
        model_normalized: NormalizedModel::from_model(&model),
        model: file,
        beta: args.beta,
        joint_match: joints.match_table().to_vec(),
        joint_mismatch: joints.mismatch_table().to_vec(),
        policy: solution.policy.accept_matrix().to_vec(),
        eer: solution.eer,
        far: solution.far,
        frr: solution.frr,
        simulation,
    };
    println!("{}", to_json_string(&report));
    Ok(())
}

// ---------------------------------------------------------------------------
// gender
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct CheckSection {
    general: f64,
    abs_difference: f64,
}

#[derive(Serialize)]
struct TypeRowJson {
    probe_correct: bool,
    gallery_match_correct: bool,
    gallery_imposter_correct: bool,
    pattern_prob: f64,
    error_factor: f64,
    error_prob: f64,
}

#[derive(Serialize)]
struct GenderReport {
    command: &'static str,
    subcommand: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    e_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    e_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_same: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mismatch_types: Option<Vec<TypeRowJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_accept: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q_accept: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eer: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    check: Option<CheckSection>,
}

impl GenderReport {
    fn new(subcommand: &'static str) -> Self {
        GenderReport {
            command: "gender",
            subcommand,
            e_f: None,
            e_v: None,
            n: None,
            p_same: None,
            error: None,
            mismatch_types: None,
            alpha: None,
            p_accept: None,
            q_accept: None,
            eer: None,
            check: None,
        }
    }
}

fn gender_rates(e_f: f64, e_v: f64) -> Result<GenderErrorRates, CliError> {
    Ok(GenderErrorRates::new(e_f, e_v)?)
}

fn cmd_gender(task: GenderTask) -> Result<(), CliError> {
    let report = match task {
        GenderTask::Match12 { e_f, e_v, check } => {
            let rates = gender_rates(e_f, e_v)?;
            let strategy = gender::match12_imperfect(rates);
            let table = gender::mismatch_type_table(rates, strategy.p_same);
            let mut report = GenderReport::new("match12");
            report.e_f = Some(e_f);
            report.e_v = Some(e_v);
            report.p_same = Some(strategy.p_same);
            report.error = Some(strategy.error);
            report.mismatch_types = Some(
                table
                    .iter()
                    .map(|row| TypeRowJson {
                        probe_correct: row.probe_correct,
                        gallery_match_correct: row.gallery_match_correct,
                        gallery_imposter_correct: row.gallery_imposter_correct,
                        pattern_prob: row.pattern_prob,
                        error_factor: row.error_factor,
                        error_prob: row.error_prob,
                    })
                    .collect(),
            );
            if check {
                // The general policy class commits to a target value before
                // seeing the gallery, so under noise its optimum sits above
                // the two-item strategy; the report carries the gap.
                let general = retrieval::optimal_policy(&gender::gender_model(rates), 2)?
                    .overall_error;
                report.check = Some(CheckSection {
                    general,
                    abs_difference: (general - strategy.error).abs(),
                });
            }
            report
        }
        GenderTask::Match1n { n, check } => {
            let error = gender::match1n_perfect(n)?;
            let mut report = GenderReport::new("match1n");
            report.n = Some(n);
            report.error = Some(error);
            if check {
                let rates = GenderErrorRates::new(0.0, 0.0).expect("zero rates are valid");
                let general =
                    retrieval::optimal_policy(&gender::gender_model(rates), n)?.overall_error;
                report.check = Some(CheckSection {
                    general,
                    abs_difference: (general - error).abs(),
                });
            }
            report
        }
        GenderTask::Verify { e_f, e_v, check } => {
            let rates = gender_rates(e_f, e_v)?;
            let v = gender::verify_eer_imperfect(rates);
            let mut report = GenderReport::new("verify");
            report.e_f = Some(e_f);
            report.e_v = Some(e_v);
            report.alpha = Some(v.alpha);
            report.p_accept = Some(v.p_accept);
            report.q_accept = Some(v.q_accept);
            report.eer = Some(v.eer);
            if check {
                let general = verification::optimal_eer(&gender::gender_model(rates)).eer;
                report.check = Some(CheckSection {
                    general,
                    abs_difference: (general - v.eer).abs(),
                });
            }
            report
        }
    };
    println!("{}", to_json_string(&report));
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

fn write_output(out: &Path, content: &str) -> Result<(), CliError> {
    if out == Path::new("-") {
        print!("{content}");
        return Ok(());
    }
    fs::write(out, content)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", out.display())))
}

fn cmd_sweep(mode: SweepMode) -> Result<(), CliError> {
    match mode {
        SweepMode::N {
            model,
            from,
            to,
            out,
            simulate,
            seed,
            chunk_size,
        } => {
            let file = ModelFile::load(&model)?;
            let world = file.to_world_model()?;
            let mut csv = String::new();
            csv.push_str(if simulate.is_some() {
                "n,analytic_error,sim_estimate,sim_std_error\n"
            } else {
                "n,analytic_error\n"
            });
            for (row, n) in (from..=to).enumerate() {
                let answer = retrieval::optimal_policy(&world, n)?;
                match simulate {
                    Some(trials) => {
                        let config = SimConfig::with_chunk_size(
                            trials,
                            seed.wrapping_add(row as u64),
                            chunk_size,
                        )?;
                        let report =
                            sim::simulate_retrieval(&world, n, &answer.policy, &config)?;
                        csv.push_str(&format!(
                            "{n},{},{},{}\n",
                            fmt_float17(answer.overall_error),
                            fmt_float17(report.estimate),
                            fmt_float17(report.std_error),
                        ));
                    }
                    None => {
                        csv.push_str(&format!(
                            "{n},{}\n",
                            fmt_float17(answer.overall_error)
                        ));
                    }
                }
            }
            write_output(&out, &csv)
        }
        SweepMode::Eer {
            e_f,
            e_v,
            out,
            simulate,
            seed,
            chunk_size,
        } => {
            let mut csv = String::new();
            csv.push_str(if simulate.is_some() {
                "e_f,e_v,eer,sim_far,sim_frr\n"
            } else {
                "e_f,e_v,eer\n"
            });
            let mut row = 0u64;
            for &ef in &e_f {
                for &ev in &e_v {
                    let rates = gender_rates(ef, ev)?;
                    let world = gender::gender_model(rates);
                    let solution = verification::optimal_eer(&world);
                    match simulate {
                        Some(trials) => {
                            let config = SimConfig::with_chunk_size(
                                trials,
                                seed.wrapping_add(row),
                                chunk_size,
                            )?;
                            let (far, frr) =
                                sim::simulate_verification(&world, &solution.policy, &config)?;
                            csv.push_str(&format!(
                                "{},{},{},{},{}\n",
                                fmt_float17(ef),
                                fmt_float17(ev),
                                fmt_float17(solution.eer),
                                fmt_float17(far.estimate),
                                fmt_float17(frr.estimate),
                            ));
                        }
                        None => {
                            csv.push_str(&format!(
                                "{},{},{}\n",
                                fmt_float17(ef),
                                fmt_float17(ev),
                                fmt_float17(solution.eer),
                            ));
                        }
                    }
                    row += 1;
                }
            }
            write_output(&out, &csv)
        }
    }
}
