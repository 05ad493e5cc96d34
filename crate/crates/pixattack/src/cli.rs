//! Subcommands. Each returns an [`Outcome`] whose exit code is 0 for a
//! successful run, 2 for an attack that found no misclassified candidate,
//! and 1 for any operational error.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use pixattack_core::attack::{attack_mask, AttackError};
use pixattack_core::{
    build_index, compute_cam, AttackReport, Image, Parity, PixelMask, QueryExecutor, SerialExecutor, Shape,
    ToyModel, Upsampling,
};

use crate::config::{self, AttentionSpec, Overrides, RunConfig, ToyVariant};
use crate::export::{self, ReportFile, RunLabels};
use crate::files::{self, write_bytes};
use crate::model_file::save_model;
use crate::setup::{self, Attention, SetupError};
use crate::visualize::render_pattern;
use crate::{FormatError, ThreadedExecutor};

pub const AE_IMAGE: &str = "adversarial.png";
pub const PERTURBATION_CSV: &str = "perturbation.csv";
pub const FRONT_CSV: &str = "front.csv";
pub const REPORT_JSON: &str = "report.json";
pub const HISTORY_CSV: &str = "history.csv";
pub const MASK_PGM: &str = "mask.pgm";
pub const ATTENTION_PGM: &str = "attention.pgm";
pub const ERROR_TXT: &str = "error.txt";

#[derive(Debug, Parser)]
#[command(name = "pixattack", version, about = "Attention-guided sparse black-box attacks on image classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Attack one image and write the adversarial example, perturbation,
    /// Pareto front and report into the output directory.
    Attack(AttackArgs),
    /// Render which pixels a perturbation changes.
    Visualize(VisualizeArgs),
    /// Write the Pareto front stored in a report as CSV.
    ExportFront(ExportFrontArgs),
    /// Compute an attention map (and optionally the attack mask) with a proxy model.
    GenAttention(GenAttentionArgs),
    /// Write a seeded toy model to a weight file.
    GenModel(GenModelArgs),
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    /// Target image (PNG, PPM or PGM).
    pub image: Option<PathBuf>,
    /// Flat key-value config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// toy:linear | toy:conv-gap | toy:<variant>:<model file> | subprocess:<cmd> | http:<url>
    #[arg(long)]
    pub oracle: Option<String>,
    /// proxy | proxy:<model file> | file:<attention.pgm>
    #[arg(long)]
    pub attention: Option<String>,
    /// Attack the whole image instead of the attention mask.
    #[arg(long)]
    pub no_attention: bool,
    /// Keep every attention pixel instead of the checkerboard subset.
    #[arg(long)]
    pub no_parity: bool,
    /// Keep odd (row+col) cells in the checkerboard instead of even ones.
    #[arg(long)]
    pub odd_parity: bool,
    /// Oracle evaluations for the search (default 10000).
    #[arg(long)]
    pub budget: Option<usize>,
    /// Population size (default 50).
    #[arg(long)]
    pub pop: Option<usize>,
    /// Crossover distribution index (default 20).
    #[arg(long)]
    pub eta_c: Option<f64>,
    /// Mutation distribution index (default 20).
    #[arg(long)]
    pub eta_m: Option<f64>,
    /// Crossover probability (default 1.0).
    #[arg(long)]
    pub p_c: Option<f64>,
    /// Per-variable mutation probability (default 1/d).
    #[arg(long)]
    pub p_m: Option<f64>,
    /// Largest allowed change of any channel value.
    #[arg(long)]
    pub delta_max: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pick the final example from the last Pareto front only.
    #[arg(long)]
    pub final_from_front: bool,
    /// Nearest-neighbour instead of bilinear attention upsampling.
    #[arg(long)]
    pub nearest: bool,
    /// Concurrent oracle queries, if the oracle allows them.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VisualizeArgs {
    /// Original image.
    pub image: PathBuf,
    /// Perturbation CSV (`l,w,c,value`).
    pub perturbation: PathBuf,
    /// Attack mask PGM; defaults to the whole image.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, default_value = "pattern.png")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportFrontArgs {
    /// Report JSON written by `attack`.
    pub report: PathBuf,
    #[arg(long, default_value = "front.csv")]
    pub out: PathBuf,
    /// Also write whitespace-separated `f2 f1` pairs for plotting.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenAttentionArgs {
    pub image: PathBuf,
    /// Proxy weight file; defaults to the built-in proxy.
    #[arg(long)]
    pub proxy: Option<PathBuf>,
    #[arg(long)]
    pub nearest: bool,
    #[arg(long, default_value = "attention.pgm")]
    pub out: PathBuf,
    /// Also write the attack mask derived from the map.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub no_parity: bool,
    #[arg(long)]
    pub odd_parity: bool,
}

#[derive(Debug, Args)]
pub struct GenModelArgs {
    /// linear or conv-gap
    pub kind: String,
    /// Input shape as HxWxC (the conv-gap model only uses C).
    #[arg(long, default_value = "32x32x3")]
    pub shape: String,
    #[arg(long, default_value_t = pixattack_core::toy::TOY_CLASSES)]
    pub classes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    AttackFailed,
    Error,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::Error => 1,
            Outcome::AttackFailed => 2,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Setup(#[from] SetupError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub fn run(cli: Cli) -> Outcome {
    let result = match cli.command {
        Command::Attack(a) => cmd_attack(&a),
        Command::Visualize(a) => cmd_visualize(&a).map(|()| Outcome::Success),
        Command::ExportFront(a) => cmd_export_front(&a).map(|()| Outcome::Success),
        Command::GenAttention(a) => cmd_gen_attention(&a).map(|()| Outcome::Success),
        Command::GenModel(a) => cmd_gen_model(&a).map(|()| Outcome::Success),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        Outcome::Error
    })
}

fn parity_flag(odd: bool) -> Option<Parity> {
    odd.then_some(Parity::Odd)
}

impl AttackArgs {
    pub fn overrides(&self) -> Result<Overrides, CliError> {
        let bad = |e: config::SpecError| CliError::Config(e.to_string());
        Ok(Overrides {
            image: self.image.clone(),
            oracle: self.oracle.as_deref().map(str::parse).transpose().map_err(bad)?,
            attention: self.attention.as_deref().map(str::parse).transpose().map_err(bad)?,
            use_attention: self.no_attention.then_some(false),
            use_parity: self.no_parity.then_some(false),
            parity: parity_flag(self.odd_parity),
            budget: self.budget,
            pop: self.pop,
            eta_c: self.eta_c,
            eta_m: self.eta_m,
            p_c: self.p_c,
            p_m: self.p_m,
            delta_max: self.delta_max,
            seed: self.seed,
            final_from_front: self.final_from_front.then_some(true),
            upsampling: self.nearest.then_some(Upsampling::Nearest),
            threads: self.threads,
            out: self.out.clone(),
        })
    }
}

fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.attack.moea.validate().map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(d) = cfg.attack.delta_max {
        if !(d.is_finite() && d >= 0.0) {
            return Err(CliError::Config(format!("delta_max must be a nonnegative number, got {d}")));
        }
    }
    if cfg.threads == 0 {
        return Err(CliError::Config("threads must be at least 1".into()));
    }
    Ok(())
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), FormatError> {
    write_bytes(&dir.join(name), text.as_bytes())
}

pub fn cmd_attack(args: &AttackArgs) -> Result<Outcome, CliError> {
    let cfg = RunConfig::resolve(args.config.as_deref(), args.overrides()?)?;
    run_config(&cfg)
}

/// Runs an attack described by a resolved config and writes its artifacts.
pub fn run_config(cfg: &RunConfig) -> Result<Outcome, CliError> {
    validate(cfg)?;
    let image_path = cfg
        .image
        .as_deref()
        .ok_or_else(|| CliError::Config("no target image given".into()))?;
    let image = files::load_image(image_path)?;
    let oracle = setup::build_oracle(&cfg.oracle, image.shape(), cfg.threads)?;
    let attention = setup::build_attention(&cfg.attention, &image)?;
    let out = &cfg.out;
    fs::create_dir_all(out).map_err(|source| FormatError::Io {
        path: out.clone(),
        source,
    })?;
    for stale in [AE_IMAGE, PERTURBATION_CSV, FRONT_CSV, REPORT_JSON, HISTORY_CSV, ERROR_TXT] {
        let _ = fs::remove_file(out.join(stale));
    }

    let threaded = ThreadedExecutor::new(cfg.threads);
    let executor: &dyn QueryExecutor = if cfg.threads > 1 { &threaded } else { &SerialExecutor };
    info!("attacking {} with {} ({} threads)", image_path.display(), cfg.oracle, cfg.threads);
    let start = Instant::now();
    let result = pixattack_core::run_attack(&image, &*oracle, attention.source(), &cfg.attack, executor);
    let elapsed = start.elapsed();

    let mut report = match result {
        Ok(r) => r,
        Err(e) => {
            // keep whatever was evaluated before the failure
            let partial = e.partial_history();
            if !partial.is_empty() {
                write_text(out, HISTORY_CSV, &export::format_history_csv(partial, None))?;
            }
            write_text(out, ERROR_TXT, &format!("{e}\n"))?;
            return Err(e.into());
        }
    };
    report.wall_time = Some(elapsed);
    for w in &report.warnings {
        warn!("{w}");
    }
    let labels = RunLabels {
        image: image_path.display().to_string(),
        oracle: cfg.oracle.to_string(),
        attention: if cfg.attack.use_attention {
            cfg.attention.to_string()
        } else {
            "none".into()
        },
    };
    write_artifacts(out, &report, &labels)?;
    print_summary(&report, out);
    Ok(if report.succeeded() {
        Outcome::Success
    } else {
        Outcome::AttackFailed
    })
}

pub fn write_artifacts(out: &Path, report: &AttackReport, labels: &RunLabels) -> Result<(), FormatError> {
    files::save_mask(&out.join(MASK_PGM), &report.mask)?;
    if let Some(map) = &report.attention {
        files::save_attention(&out.join(ATTENTION_PGM), map)?;
    }
    write_text(out, FRONT_CSV, &export::format_front_csv(&export::front_rows(report)))?;
    write_text(out, HISTORY_CSV, &export::format_history_csv(&report.history, Some(report.original_class)))?;
    if let Some(ae) = &report.final_ae {
        files::save_image(&out.join(AE_IMAGE), &ae.image)?;
        let rows = export::perturbation_rows(&ae.perturbation, &report.index);
        write_text(out, PERTURBATION_CSV, &export::format_perturbation_csv(&rows))?;
    }
    write_text(out, REPORT_JSON, &ReportFile::from_report(report, labels, report.wall_time).to_json())
}

fn print_summary(report: &AttackReport, out: &Path) {
    println!(
        "original class {} (p={:.4}); d={} over {} pixels; {} queries, {} generations",
        report.original_class,
        report.clean_confidence,
        report.dimension(),
        report.mask.count(),
        report.queries,
        report.generations
    );
    match &report.final_ae {
        Some(ae) => println!(
            "success: class {} (p={:.4}), original class p={:.4}, L2={:.3}, {} values changed",
            ae.class,
            ae.confidence,
            ae.original_probability,
            ae.l2,
            ae.perturbation.support_len()
        ),
        None => println!("attack failed: no candidate changed the prediction"),
    }
    println!("artifacts in {}", out.display());
}

pub fn cmd_visualize(args: &VisualizeArgs) -> Result<(), CliError> {
    let image = files::load_image(&args.image)?;
    let text = String::from_utf8(fs::read(&args.perturbation).map_err(|source| FormatError::Io {
        path: args.perturbation.clone(),
        source,
    })?)
    .map_err(|_| CliError::Config(format!("{} is not UTF-8", args.perturbation.display())))?;
    let raw = export::parse_perturbation_csv(&text)?;
    let mask = match &args.mask {
        Some(p) => files::load_mask(p, Some((image.height(), image.width())))?,
        None => PixelMask::full(image.height(), image.width()),
    };
    let pattern = render_pattern(&image, &mask, &effective_deltas(&image, &raw)?)?;
    files::save_image(&args.out, &pattern)?;
    Ok(())
}

/// The changes that actually land after rounding and clamping.
pub fn effective_deltas(image: &Image, raw: &[export::PixelDelta]) -> Result<Vec<export::PixelDelta>, FormatError> {
    let attacked = export::apply_deltas(image, raw)?;
    let mut out: Vec<export::PixelDelta> = raw
        .iter()
        .map(|d| export::PixelDelta {
            value: f64::from(attacked.get(d.row, d.col, d.channel)) - f64::from(image.get(d.row, d.col, d.channel)),
            ..*d
        })
        .collect();
    out.sort_by_key(|d| (d.row, d.col, d.channel));
    out.dedup_by_key(|d| (d.row, d.col, d.channel));
    Ok(out)
}

pub fn cmd_export_front(args: &ExportFrontArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.report).map_err(|source| FormatError::Io {
        path: args.report.clone(),
        source,
    })?;
    let report = ReportFile::from_json(&text)?;
    let mut rows = export::nondominated(&report.front);
    if rows.len() != report.front.len() {
        warn!("dropped {} dominated rows from the stored front", report.front.len() - rows.len());
    }
    export::sort_front(&mut rows);
    write_bytes(&args.out, export::format_front_csv(&rows).as_bytes())?;
    if let Some(plot) = &args.plot {
        write_bytes(plot, export::format_plot_data(&rows).as_bytes())?;
    }
    println!("{} front rows written to {}", rows.len(), args.out.display());
    Ok(())
}

pub fn cmd_gen_attention(args: &GenAttentionArgs) -> Result<(), CliError> {
    let image = files::load_image(&args.image)?;
    let spec = match &args.proxy {
        Some(p) => AttentionSpec::ProxyFile(p.clone()),
        None => AttentionSpec::Proxy,
    };
    let Attention::Proxy(proxy) = setup::build_attention(&spec, &image)? else {
        unreachable!("proxy specs always yield a proxy")
    };
    let mode = if args.nearest { Upsampling::Nearest } else { Upsampling::Bilinear };
    let map = compute_cam(&proxy, &image, mode).map_err(AttackError::from)?;
    files::save_attention(&args.out, &map)?;
    let parity = parity_flag(args.odd_parity).unwrap_or_default();
    let (mask, fallback) = attack_mask(&image, Some(&map), !args.no_parity, parity)?;
    if fallback {
        warn!("attention map is empty after refinement; the attack would use the full checkerboard");
    }
    let d = build_index(&mask, image.channels()).map_err(FormatError::from)?.len();
    println!(
        "{} of {} pixels salient; mask keeps {} pixels, d = {d}",
        map.values().iter().filter(|&&v| v != 0).count(),
        image.height() * image.width(),
        mask.count()
    );
    if let Some(path) = &args.mask {
        files::save_mask(path, &mask)?;
    }
    Ok(())
}

fn parse_shape(s: &str) -> Result<Shape, CliError> {
    let parts: Vec<usize> = s
        .split('x')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Config(format!("shape must be HxWxC, got {s:?}")))?;
    match parts.as_slice() {
        &[h, w, c] => Ok(Shape::new(h, w, c)),
        _ => Err(CliError::Config(format!("shape must be HxWxC, got {s:?}"))),
    }
}

pub fn cmd_gen_model(args: &GenModelArgs) -> Result<(), CliError> {
    let shape = parse_shape(&args.shape)?;
    let variant: ToyVariant = args.kind.parse().map_err(|e: config::SpecError| CliError::Config(e.to_string()))?;
    let model = match variant {
        ToyVariant::Linear => ToyModel::Linear(
            pixattack_core::LinearSoftmax::seeded(shape, args.classes, pixattack_core::toy::TOY_TARGET_GAIN, args.seed)
                .map_err(FormatError::from)?,
        ),
        ToyVariant::ConvGap => ToyModel::ConvGap(
            pixattack_core::ConvGap::seeded(pixattack_core::toy::toy_proxy_spec(shape.channels, args.classes), args.seed)
                .map_err(FormatError::from)?,
        ),
    };
    save_model(&args.out, &model)?;
    Ok(())
}
