//! `sepl`: fuse coarse pseudo-labels with class-agnostic instance masks,
//! evaluate label quality, and generate synthetic corpora.
//!
//! Exit codes: 0 on success, 1 on usage/configuration errors, 2 when a run
//! completed but some images failed and were skipped.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sepl_cli::io::QualityFilter;
use sepl_cli::runner::{
    self, render_enhance_human, render_enhance_machine, render_eval_human, render_eval_machine,
    render_inspect_human, render_inspect_machine, ReportFormat, RunConfig,
};
use sepl_core::{FlattenPolicy, SeplConfig};

#[derive(Parser)]
#[command(
    name = "sepl",
    version,
    about = "Enhance pseudo-label rasters with class-agnostic instance masks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enhance every image in a manifest and write refined label PNGs
    Enhance(EnhanceArgs),
    /// Score predictions against the ground-truth side of a manifest
    Eval(EvalArgs),
    /// Generate a synthetic corpus from a spec file
    Synth(SynthArgs),
    /// Threshold activation stacks into label PNGs
    CamThreshold(CamThresholdArgs),
    /// Show per-record diagnostics for a mask file
    MasksInspect(MasksInspectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum FlattenArg {
    SmallerRegionLast,
    HigherClassLast,
}

impl From<FlattenArg> for FlattenPolicy {
    fn from(arg: FlattenArg) -> Self {
        match arg {
            FlattenArg::SmallerRegionLast => FlattenPolicy::SmallerRegionLast,
            FlattenArg::HigherClassLast => FlattenPolicy::HigherClassLast,
        }
    }
}

#[derive(Args)]
struct SelectionArgs {
    /// Keep a mask when the labels cover more than this fraction of it
    #[arg(long, default_value_t = 0.5)]
    t1: f64,
    /// Keep a mask when it covers more than this fraction of the labels
    #[arg(long, default_value_t = 0.85)]
    t2: f64,
    /// Conflict resolution when flattening per-class regions
    #[arg(long, value_enum, default_value = "smaller-region-last")]
    flatten: FlattenArg,
}

#[derive(Args)]
struct FilterArgs {
    /// Drop mask records whose predicted IoU is below this
    #[arg(long, default_value_t = 0.86)]
    pred_iou_min: f64,
    /// Drop mask records whose stability score is below this
    #[arg(long, default_value_t = 0.92)]
    stability_min: f64,
    /// Keep every well-formed mask record regardless of scores
    #[arg(long)]
    no_mask_filter: bool,
}

impl FilterArgs {
    fn quality_filter(&self) -> QualityFilter {
        QualityFilter {
            enabled: !self.no_mask_filter,
            min_predicted_iou: self.pred_iou_min,
            min_stability: self.stability_min,
        }
    }
}

#[derive(Args)]
struct EnhanceArgs {
    /// Dataset manifest (line-delimited JSON with a header line)
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for enhanced PNGs, outcome records, and the summary
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    selection: SelectionArgs,
    #[command(flatten)]
    filter: FilterArgs,
    /// Worker count (falls back to SEPL_WORKERS, then all cores)
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value = "human")]
    format: ReportFormat,
}

#[derive(Args)]
struct EvalArgs {
    /// Prediction side: a directory of `<id>.png` files or a manifest whose
    /// pseudo paths are scored
    #[arg(long)]
    pred: PathBuf,
    /// Manifest providing the ground-truth side
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value = "human")]
    format: ReportFormat,
}

#[derive(Args)]
struct SynthArgs {
    /// Corpus spec (JSON)
    #[arg(long)]
    spec: PathBuf,
    /// Output directory for the corpus
    #[arg(long)]
    out: PathBuf,
    /// Override the spec's seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CamThresholdArgs {
    /// Score-stack files to threshold
    #[arg(required = true)]
    stacks: Vec<PathBuf>,
    /// Minimum winning activation; weaker pixels become background
    #[arg(long)]
    bg_threshold: f64,
    /// Output directory for label PNGs
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MasksInspectArgs {
    /// Mask-record file to inspect
    #[arg(long)]
    masks: PathBuf,
    #[command(flatten)]
    filter: FilterArgs,
    #[arg(long, value_enum, default_value = "human")]
    format: ReportFormat,
}

fn resolve_workers(flag: Option<usize>) -> anyhow::Result<usize> {
    let workers = match flag {
        Some(n) => n,
        None => match std::env::var("SEPL_WORKERS") {
            Ok(value) => value
                .trim()
                .parse::<usize>()
                .map_err(|_| anyhow::anyhow!("SEPL_WORKERS={value:?} is not a worker count"))?,
            Err(_) => std::thread::available_parallelism().map_or(1, usize::from),
        },
    };
    if workers == 0 {
        anyhow::bail!("worker count must be at least 1");
    }
    Ok(workers)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Enhance(args) => {
            let sepl = SeplConfig::new(
                args.selection.t1,
                args.selection.t2,
                args.selection.flatten.into(),
            )?;
            let cfg = RunConfig {
                manifest: args.manifest,
                out_dir: args.out,
                sepl,
                filter: args.filter.quality_filter(),
                workers: resolve_workers(args.workers)?,
                format: args.format,
            };
            let summary = runner::cmd_enhance(&cfg)?;
            match cfg.format {
                ReportFormat::Human => print!("{}", render_enhance_human(&summary)),
                ReportFormat::Machine => print!("{}", render_enhance_machine(&summary)),
            }
            Ok(if summary.images_skipped.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Eval(args) => {
            let output = runner::cmd_eval(&args.pred, &args.gt, resolve_workers(args.workers)?)?;
            match args.format {
                ReportFormat::Human => print!("{}", render_eval_human(&output)),
                ReportFormat::Machine => print!("{}", render_eval_machine(&output)),
            }
            Ok(if output.missing.is_empty() && output.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Synth(args) => {
            let summary = runner::cmd_synth(&args.spec, &args.out, args.seed)?;
            println!(
                "synth: {} scenes, manifest {}",
                summary.scenes,
                summary.manifest.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::CamThreshold(args) => {
            let summary = runner::cmd_cam_threshold(&args.stacks, args.bg_threshold, &args.out)?;
            for path in &summary.written {
                println!("wrote {}", path.display());
            }
            for failure in &summary.failures {
                eprintln!("failed {}: {}", failure.id, failure.reason);
            }
            Ok(if summary.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::MasksInspect(args) => {
            let ingest = runner::cmd_masks_inspect(&args.masks, &args.filter.quality_filter())?;
            match args.format {
                ReportFormat::Human => print!("{}", render_inspect_human(&args.masks, &ingest)),
                ReportFormat::Machine => print!("{}", render_inspect_machine(&ingest)),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
