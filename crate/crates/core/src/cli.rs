//! The `ttconv` command line.
//!
//! Exit codes: 0 on success, 1 when a computation or check fails, 2 for
//! usage and validation errors (bad flags, unreadable or invalid manifests).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conv::{dense_conv_forward, reconstruct_kernel, tt_conv_forward, FeatureMap};
use crate::error::{Error, Result};
use crate::net::{
    compress_network, load_manifest_with, load_model, load_weights, model_to_bytes, rank_sweep, render_sweep_rows,
    render_sweep_table, save_weights, CompressedModel, CompressionReport, LayerWeights, NetworkManifest,
    RankSetting, WeightSet,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Largest relative deviation `verify` accepts by default.
pub const VERIFY_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "ttconv", version, about = "Tensor-train compression of convolution layers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compress the selected layers of a network and write a model file.
    Compress(CompressArgs),
    /// Check TT forward passes of a model against its reconstructed dense kernels.
    Verify(VerifyArgs),
    /// Compress at several uniform ranks and tabulate size, MACs and error.
    Sweep(SweepArgs),
    /// Print the compression report of a model file.
    Report(ReportArgs),
    /// Write the dense weights of a model file.
    Reconstruct(ReconstructArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Aligned text table.
    Table,
    /// One JSON object per line.
    Jsonl,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Network manifest (TOML).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Weight index (TOML); synthetic weights are generated when omitted.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Default TT order for layers without explicit factors.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub order: Option<u32>,
    /// Seed for synthetic weights.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("truncation").required(true).args(["rank", "tolerance"])))]
pub struct CompressArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Uniform cap on every internal TT rank.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub rank: Option<u32>,
    /// Relative Frobenius error bound per layer, in (0, 1).
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Model file.
    pub model: PathBuf,
    /// Seed for the random probe inputs.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random inputs per layer.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub trials: u32,
    /// Largest accepted deviation relative to the dense output's max magnitude.
    #[arg(long, default_value_t = VERIFY_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Comma-separated uniform ranks.
    #[arg(long, value_delimiter = ',', required = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub ranks: Vec<u32>,
    /// Directory for the sweep table, per-rank reports and model files.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Model file.
    pub model: PathBuf,
    /// Original weights, for reconstruction errors.
    #[arg(long, conflicts_with = "seed")]
    pub weights: Option<PathBuf>,
    /// Regenerate synthetic original weights with this seed, for reconstruction errors.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Model file.
    pub model: PathBuf,
    /// Weight index to write; the data goes next to it with a `.bin` extension.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(&cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let Some(h) = hint(&e) {
                let _ = writeln!(err, "hint: {h}");
            }
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_FAILURE
            }
        }
    }
}

pub fn execute(command: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Compress(a) => cmd_compress(a, out),
        Command::Verify(a) => cmd_verify(a, out, err),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Report(a) => cmd_report(a, out),
        Command::Reconstruct(a) => cmd_reconstruct(a, out),
    }
}

fn hint(e: &Error) -> Option<&'static str> {
    match e {
        Error::Layer { source, .. } => hint(source),
        Error::Multiple(list) => list.first().and_then(hint),
        Error::Parse { .. } | Error::Validation(_) | Error::Plan(_) => {
            Some("fix the listed manifest or weight entries and run the command again")
        }
        Error::InvalidArgument(m) if m.ends_with("does not exist") => Some("check the path and run the command again"),
        Error::InvalidArgument(_) => Some("run `ttconv <command> --help` for the accepted flags"),
        Error::Corruption(_) => Some("the model file is damaged; regenerate it with `ttconv compress`"),
        Error::UnsupportedVersion { .. } => Some("regenerate the model file with this build of ttconv"),
        Error::Integrity { .. } => Some("padding cores are inconsistent; recompress the layer"),
        Error::Capacity { .. } => Some("lower the rank or reconstruct fewer layers at once"),
        Error::Data(_) => Some("check the weights for NaN or infinite values"),
        Error::Io { .. } => Some("check that the path exists and is accessible"),
        Error::Shape(_) | Error::Range { .. } => None,
    }
}

fn must_exist(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} {} does not exist", path.display())))
    }
}

fn load_source(a: &SourceArgs) -> Result<(NetworkManifest, WeightSet)> {
    must_exist(&a.manifest, "manifest")?;
    let manifest = load_manifest_with(&a.manifest, a.order.map(|o| o as usize))?;
    let weights = match &a.weights {
        Some(p) => {
            must_exist(p, "weights file")?;
            load_weights(p, &manifest)?
        }
        None => WeightSet::synthetic(&manifest, a.seed),
    };
    Ok((manifest, weights))
}

fn open_model(path: &Path) -> Result<CompressedModel> {
    must_exist(path, "model file")?;
    load_model(path)
}

fn render(report: &CompressionReport, format: Format) -> String {
    match format {
        Format::Table => report.render_table(),
        Format::Jsonl => report.render_rows(),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

pub fn cmd_compress(a: &CompressArgs, out: &mut dyn Write) -> Result<i32> {
    let setting = match (a.rank, a.tolerance) {
        (Some(r), None) => RankSetting::Uniform(r as usize),
        (None, Some(t)) => RankSetting::Tolerance(t),
        _ => return Err(Error::InvalidArgument("give exactly one of --rank and --tolerance".into())),
    };
    setting.validate()?;
    let (manifest, weights) = load_source(&a.source)?;
    let model = compress_network(&manifest, &weights, setting)?;
    let report = CompressionReport::build(&model, Some(&weights))?;
    write_file(&a.out, &model_to_bytes(&model))?;
    emit(out, &render(&report, a.format))?;
    Ok(EXIT_OK)
}

pub fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<i32> {
    let (manifest, weights) = load_source(&a.source)?;
    let ranks: Vec<usize> = a.ranks.iter().map(|&r| r as usize).collect();
    let points = rank_sweep(&manifest, &weights, &ranks)?;
    let reports: Vec<CompressionReport> = points.iter().map(|p| p.report.clone()).collect();
    let (summary, ext) = match a.format {
        Format::Table => (render_sweep_table(&reports), "txt"),
        Format::Jsonl => (render_sweep_rows(&reports), "jsonl"),
    };

    let mut files: Vec<(PathBuf, Vec<u8>)> = vec![(a.out.join(format!("sweep.{ext}")), summary.clone().into_bytes())];
    for p in &points {
        files.push((a.out.join(format!("rank-{}.{ext}", p.rank)), render(&p.report, a.format).into_bytes()));
        files.push((a.out.join(format!("rank-{}.ttcv", p.rank)), model_to_bytes(&p.model)));
    }
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    for (i, (path, bytes)) in files.iter().enumerate() {
        if let Err(e) = write_file(path, bytes) {
            for (written, _) in &files[..i] {
                let _ = std::fs::remove_file(written);
            }
            return Err(e);
        }
    }
    emit(out, &summary)?;
    Ok(EXIT_OK)
}

pub fn cmd_report(a: &ReportArgs, out: &mut dyn Write) -> Result<i32> {
    let model = open_model(&a.model)?;
    let originals = match (&a.weights, a.seed) {
        (Some(p), _) => {
            must_exist(p, "weights file")?;
            Some(load_weights(p, &model.manifest)?)
        }
        (None, Some(seed)) => Some(WeightSet::synthetic(&model.manifest, seed)),
        (None, None) => None,
    };
    let report = CompressionReport::build(&model, originals.as_ref())?;
    emit(out, &render(&report, a.format))?;
    Ok(EXIT_OK)
}

pub fn cmd_reconstruct(a: &ReconstructArgs, out: &mut dyn Write) -> Result<i32> {
    let model = open_model(&a.model)?;
    let weights = model.reconstruct_weights()?;
    save_weights(&weights, &a.out)?;
    emit(
        out,
        &format!(
            "wrote {} layers to {} and {}\n",
            weights.len(),
            a.out.display(),
            a.out.with_extension("bin").display()
        ),
    )?;
    Ok(EXIT_OK)
}

/// Worst deviation found for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCheck {
    pub id: String,
    pub deviation: f64,
    /// `(row, column, channel)` of the worst output element.
    pub position: (usize, usize, usize),
}

/// Runs `trials` random inputs through every TT layer of the model and its
/// reconstructed dense kernel. Inputs are small crops of the layer's
/// declared input extent.
pub fn verify_model(model: &CompressedModel, trials: usize, seed: u64) -> Result<Vec<LayerCheck>> {
    let mut checks = Vec::new();
    for (i, (entry, layer)) in model.manifest.layers.iter().zip(&model.layers).enumerate() {
        let LayerWeights::Tt(ttk) = &layer.weights else { continue };
        let check = (|| {
            let dense = reconstruct_kernel(ttk)?;
            let spec = ttk.spec();
            let h = entry.input_height.min(spec.kernel() + 7);
            let w = entry.input_width.min(spec.kernel() + 7);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut worst = LayerCheck {
                id: layer.id.clone(),
                deviation: 0.0,
                position: (0, 0, 0),
            };
            for _ in 0..trials {
                let data = (0..h * w * spec.in_channels()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let x = FeatureMap::new(h, w, spec.in_channels(), data)?;
                let reference = dense_conv_forward(&dense, &x)?;
                let got = tt_conv_forward(ttk, &x)?;
                let scale = reference.max_abs();
                let scale = if scale > 0.0 { scale } else { 1.0 };
                for (j, (a, b)) in reference.data().iter().zip(got.data()).enumerate() {
                    let d = (a - b).abs() / scale;
                    if d > worst.deviation || d.is_nan() {
                        let c = reference.channels();
                        let ow = reference.width();
                        worst.deviation = if d.is_nan() { f64::INFINITY } else { d };
                        worst.position = (j / c / ow, (j / c) % ow, j % c);
                    }
                }
            }
            Ok(worst)
        })()
        .map_err(|e: Error| e.in_layer(&layer.id))?;
        checks.push(check);
    }
    Ok(checks)
}

pub fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    if !(a.threshold.is_finite() && a.threshold > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold {} must be positive", a.threshold)));
    }
    let model = open_model(&a.model)?;
    let checks = verify_model(&model, a.trials as usize, a.seed)?;
    let mut text = String::new();
    for c in &checks {
        text.push_str(&format!(
            "layer {}: {} trials, max relative deviation {:.3e} {}\n",
            c.id,
            a.trials,
            c.deviation,
            if c.deviation <= a.threshold { "ok" } else { "FAILED" }
        ));
    }
    emit(out, &text)?;
    let failed: Vec<&LayerCheck> = checks.iter().filter(|c| c.deviation > a.threshold).collect();
    if failed.is_empty() {
        emit(
            out,
            &format!("verify passed: {} TT layers within {:e}\n", checks.len(), a.threshold),
        )?;
        Ok(EXIT_OK)
    } else {
        for c in failed {
            let _ = writeln!(
                err,
                "layer {}: deviation {:.3e} exceeds {:e} at output (row {}, col {}, channel {})",
                c.id, c.deviation, a.threshold, c.position.0, c.position.1, c.position.2
            );
        }
        Ok(EXIT_FAILURE)
    }
}
