//! `crb`: the command-line front end. Each subcommand is a thin wrapper
//! over a function in `crb_core::commands` (or the service for `serve`).
//!
//! Exit codes: 0 success, 2 input error, 3 consistency error.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crb_core::commands::{
    cmd_degrade, cmd_eval_entities, cmd_eval_human, cmd_eval_nlg, cmd_kernels_selftest, cmd_stats, cmd_synth,
    cmd_table, ArmSet, CmdError, NlgOptions, OutputFormat, StatsOptions, StatsTest, SynthOptions, TableInputs,
};
use crb_core::diagnosis::AccuracyMode;
use crb_core::metrics::{EmbeddingProvider, HashingProvider, RemoteProvider};
use crb_core::model::{Arm, Language};
use crb_core::synth::FaultProfile;
use crb_core::tables::{TableFormat, TableId};
use crb_core::EntityLexicon;

#[derive(Parser)]
#[command(name = "crb", version, about = "Evaluate, synthesize and tabulate bilingual CBCT reports")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (directory for synth and degrade). Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// json, tsv or markdown. Tables default to tsv.
    #[arg(long, global = true)]
    format: Option<OutputFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score reports against references.
    #[command(subcommand)]
    Eval(Eval),
    /// Omnibus and pairwise rank tests over JSONL records.
    Stats(StatsArgs),
    /// Synthesize a bilingual cohort.
    Synth(SynthArgs),
    /// Inject omissions and incorrections into reports.
    Degrade(DegradeArgs),
    /// Render one of the summary tables.
    Table(TableArgs),
    /// Numerical checks for the encoder kernels.
    #[command(subcommand)]
    Kernels(Kernels),
    /// Host rating studies over HTTP.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum Eval {
    /// BLEU, ROUGE-L, METEOR, BERTScore and entity recall.
    Nlg(NlgArgs),
    /// Impression entity accuracy, recall and per-entity detection.
    Entities(EntityArgs),
    /// Rank, rubric and error-burden aggregates from annotations.
    Human(HumanArgs),
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
}

#[derive(Args)]
struct NlgArgs {
    #[command(flatten)]
    files: PairArgs,
    #[arg(long)]
    language: Option<Language>,
    /// Label for the method column.
    #[arg(long, default_value = "hyp")]
    method: String,
    /// "hashing" (offline), "none", or the base URL of an embedding service.
    #[arg(long, default_value = "hashing")]
    embedder: String,
    #[arg(long, default_value_t = 256)]
    embed_dim: usize,
}

#[derive(Args)]
struct EntityArgs {
    #[command(flatten)]
    files: PairArgs,
    #[arg(long, default_value = "jaccard")]
    mode: AccuracyMode,
}

#[derive(Args)]
struct HumanArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    cases: PathBuf,
    #[arg(long, default_value_t = 4)]
    scale: u8,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    input: PathBuf,
    /// Dotted field to group by, e.g. "arm".
    #[arg(long)]
    groupby: String,
    /// Dotted numeric field, e.g. "quality.coherence" or "errors".
    #[arg(long)]
    outcome: String,
    #[arg(long, default_value = "kw")]
    test: StatsTest,
    #[arg(long)]
    reference: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 300)]
    n: usize,
    /// CohortSpec as JSON; overrides --n and --seed.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Also degrade into an arm set: ai-vs-manual or collaboration.
    #[arg(long)]
    arms: Option<ArmSet>,
}

#[derive(Args)]
struct DegradeArgs {
    #[arg(long)]
    reports: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    omission: f64,
    #[arg(long, default_value_t = 0.0)]
    incorrection: f64,
    /// Probability an injected error is clinically significant.
    #[arg(long, default_value_t = 0.0)]
    cs: f64,
    /// Relabel the degraded reports as this arm.
    #[arg(long)]
    arm: Option<Arm>,
}

#[derive(Args)]
struct TableArgs {
    /// S2, S3_detect, S3_pref, S4, S5, S6, S7 or S8.
    id: TableId,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[arg(long)]
    cases: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Kernels {
    Selftest,
}

#[derive(Args, Clone)]
struct ServeArgs {
    #[arg(long, env = "CRB_ADDR", default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    #[arg(long, env = "CRB_DATA_DIR", default_value = "crb-data")]
    data_dir: PathBuf,
    /// Default for studies created without a seed; falls back to --seed.
    #[arg(long, env = "CRB_BLINDING_SEED")]
    blinding_seed: Option<u64>,
}

fn embedder(spec: &str, dim: usize, seed: u64) -> Option<Box<dyn EmbeddingProvider>> {
    match spec {
        "none" => None,
        "hashing" => Some(Box::new(HashingProvider::new(dim, seed))),
        url => Some(Box::new(RemoteProvider::new(url, dim, Duration::from_secs(30), 2))),
    }
}

fn require_out(out: Option<&Path>, cmd: &str) -> Result<PathBuf, CmdError> {
    out.map(Path::to_path_buf)
        .ok_or_else(|| CmdError::Input(format!("{cmd} writes several files and needs --out <dir>")))
}

fn run(cli: Cli) -> Result<Option<String>, CmdError> {
    let lex = EntityLexicon::builtin();
    let format = cli.format.unwrap_or_default();
    let out = cli.out.as_deref();
    let text = match cli.command {
        Command::Eval(Eval::Nlg(a)) => {
            let emb = embedder(&a.embedder, a.embed_dim, cli.seed);
            let opts = NlgOptions { language: a.language, method: a.method, embedder: emb.as_deref(), format };
            cmd_eval_nlg(&a.files.hyp, &a.files.reference, &lex, &opts)?
        }
        Command::Eval(Eval::Entities(a)) => cmd_eval_entities(&a.files.hyp, &a.files.reference, &lex, a.mode, format)?,
        Command::Eval(Eval::Human(a)) => cmd_eval_human(&a.annotations, &a.cases, a.scale, format)?,
        Command::Stats(a) => cmd_stats(
            &a.input,
            &StatsOptions { groupby: a.groupby, outcome: a.outcome, test: a.test, reference: a.reference, format },
        )?,
        Command::Synth(a) => {
            let dir = require_out(out, "synth")?;
            let opts = SynthOptions { n_cases: a.n, seed: cli.seed, spec: a.spec, arms: a.arms };
            eprint!("{}", cmd_synth(&opts, &lex, &dir)?);
            return Ok(None);
        }
        Command::Degrade(a) => {
            let dir = require_out(out, "degrade")?;
            let profile =
                FaultProfile { omission_rate: a.omission, incorrection_rate: a.incorrection, cs_probability: a.cs };
            eprint!("{}", cmd_degrade(&a.reports, &profile, a.arm, cli.seed, &lex, &dir)?);
            return Ok(None);
        }
        Command::Table(a) => {
            let tf = match cli.format {
                Some(OutputFormat::Markdown) => TableFormat::Markdown,
                _ => TableFormat::Tsv,
            };
            let inputs = TableInputs { input: a.input, annotations: a.annotations, cases: a.cases };
            cmd_table(a.id, &inputs, tf)?
        }
        Command::Kernels(Kernels::Selftest) => cmd_kernels_selftest(cli.seed, format)?,
        Command::Serve(_) => unreachable!("handled before dispatch"),
    };
    match out {
        Some(path) => {
            std::fs::write(path, &text).map_err(|e| CmdError::Input(format!("{}: {e}", path.display())))?;
            Ok(None)
        }
        None => Ok(Some(text)),
    }
}

fn serve(args: ServeArgs, seed: u64) -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let config = crb_service::ServiceConfig {
        addr: args.addr,
        data_dir: Some(args.data_dir),
        blinding_seed: args.blinding_seed.unwrap_or(seed),
    };
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match rt.block_on(crb_service::serve(config)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Serve(args) = &cli.command {
        return serve(args.clone(), cli.seed);
    }
    match run(cli) {
        Ok(Some(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
