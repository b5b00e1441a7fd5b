//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 codec error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use crate::analogy::{jdiagram_with, CornerSource, JDiagramOptions};
use crate::atdot::{accuracy_table, evaluate_attribute, EvaluateOptions, VectorSource};
use crate::attributes::{
    attribute_vector, balanced_attribute_vector_with, synthetic_attribute_vector, AttributeVector,
    BalanceMode, BalanceOptions,
};
use crate::codec::Codec;
use crate::error::{Error, Result};
use crate::grid::{CellRole, GridManifest};
use crate::io::csv::{read_latents_csv, write_latents_csv};
use crate::io::{
    decode_latents, encode_latents, read_features, render_grid, serve, write_features,
    ProcessCodec, RenderOptions,
};
use crate::latent::{
    interpolate_path, prior_stats, InterpolationMode, LatentDataset, LatentVector, Prior,
};
use crate::mine::{mine_grid, Metric, NeighborIndex};
use crate::toy::{toy_dataset, toy_latents, GaussianBlur, ToyCodec, ToyDatasetSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_CODEC: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "latentkit",
    version,
    about = "Latent-space sampling, navigation and analysis"
)]
struct Cli {
    /// Write the result here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Shell command that starts an external codec process.
    #[arg(long, global = true)]
    codec_cmd: Option<String>,
    /// Suppress informational messages.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Interpolate between two latents.
    Interpolate(InterpolateArgs),
    /// Analogy lattice from three latents.
    Jdiagram(JDiagramArgs),
    /// Neighbourhood grid around a seed latent.
    Mine(MineArgs),
    /// Compute an attribute vector.
    Attrvec(AttrvecArgs),
    /// Fit and evaluate attribute-vector classifiers.
    Classify(ClassifyArgs),
    /// Norm and per-dimension statistics of a dataset.
    Priorstats(PriorstatsArgs),
    /// Generate a synthetic labelled dataset.
    Toygen(ToygenArgs),
    /// Render a grid manifest to PNG.
    Render(RenderArgs),
    /// Serve the toy codec over the stdio protocol.
    ToyCodec(ToyCodecArgs),
    /// Convert a dataset between CSV and the binary format.
    Convert(ConvertArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Linear,
    Spherical,
}

impl From<ModeArg> for InterpolationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Linear => InterpolationMode::Linear,
            ModeArg::Spherical => InterpolationMode::Spherical,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Euclidean,
    Cosine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Naive,
    Balanced,
    Synthetic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CornersArg {
    Raw,
    Reconstructed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CodecKind {
    Toy,
    Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PriorArg {
    Gaussian,
    Uniform,
}

impl From<PriorArg> for Prior {
    fn from(p: PriorArg) -> Self {
        match p {
            PriorArg::Gaussian => Prior::Gaussian,
            PriorArg::Uniform => Prior::Uniform,
        }
    }
}

#[derive(Debug, Args)]
struct CodecArgs {
    /// Codec to use: the built-in toy codec or the process given by --codec-cmd.
    #[arg(long, value_enum)]
    codec: Option<CodecKind>,
    /// Seed of the toy codec.
    #[arg(long, default_value_t = 0)]
    codec_seed: u64,
    /// Toy codec image size.
    #[arg(long, value_parser = parse_hw, default_value = "32x32")]
    image: (usize, usize),
}

#[derive(Debug, Args)]
struct InterpolateArgs {
    /// Dataset used to resolve endpoint ids.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Start: a dataset id or comma-separated components.
    #[arg(long, allow_hyphen_values = true)]
    from: String,
    /// End: a dataset id or comma-separated components.
    #[arg(long, allow_hyphen_values = true)]
    to: String,
    #[arg(long, default_value_t = 8)]
    steps: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Spherical)]
    mode: ModeArg,
}

#[derive(Debug, Args)]
struct JDiagramArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    a: String,
    #[arg(long, allow_hyphen_values = true)]
    b: String,
    #[arg(long, allow_hyphen_values = true)]
    c: String,
    #[arg(long, default_value_t = 5)]
    rows: usize,
    #[arg(long, default_value_t = 5)]
    cols: usize,
    #[arg(long, value_enum, default_value_t = CornersArg::Raw)]
    corners: CornersArg,
    #[command(flatten)]
    codec: CodecArgs,
}

#[derive(Debug, Args)]
struct MineArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(
        long,
        conflicts_with = "seed_vec",
        required_unless_present = "seed_vec"
    )]
    seed_id: Option<String>,
    /// Seed latent as comma-separated components.
    #[arg(long, allow_hyphen_values = true)]
    seed_vec: Option<String>,
    /// Anchor lattice as RxC.
    #[arg(long, value_parser = parse_hw, default_value = "5x5")]
    anchors: (usize, usize),
    /// Cells between adjacent anchors.
    #[arg(long, default_value_t = 3)]
    spread: usize,
    #[arg(long, value_enum, default_value_t = MetricArg::Euclidean)]
    metric: MetricArg,
}

#[derive(Debug, Args)]
struct AttrvecArgs {
    /// Labelled dataset (naive and balanced methods).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    attr: String,
    #[arg(long, value_enum, default_value_t = MethodArg::Naive)]
    method: MethodArg,
    /// Attribute to balance against.
    #[arg(long)]
    confound: Option<String>,
    /// Use the replicated-rows formulation of balancing.
    #[arg(long)]
    replicate: bool,
    /// Images for the synthetic method.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Blur width of the synthetic transform.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Latent size of the toy codec when no dataset is given.
    #[arg(long)]
    latent_dim: Option<usize>,
    #[command(flatten)]
    codec: CodecArgs,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Attribute to evaluate (repeatable).
    #[arg(long, required = true)]
    attr: Vec<String>,
    /// Vector method (repeatable).
    #[arg(long, value_enum, default_values_t = [MethodArg::Naive])]
    method: Vec<MethodArg>,
    #[arg(long)]
    confound: Option<String>,
    /// Subtract the training mean before scoring.
    #[arg(long)]
    centered: bool,
    /// Precomputed attribute vector JSON (evaluated in addition to --method).
    #[arg(long)]
    vector: Vec<PathBuf>,
    /// Directory for per-report ROC and histogram CSV files.
    #[arg(long)]
    csv_dir: Option<PathBuf>,
    #[arg(long, default_value_t = crate::atdot::DEFAULT_HISTOGRAM_BINS)]
    bins: usize,
}

#[derive(Debug, Args)]
struct PriorstatsArgs {
    #[arg(long)]
    data: PathBuf,
}

#[derive(Debug, Args)]
struct ToygenArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated attribute names.
    #[arg(long, default_value = "smile,male")]
    attrs: String,
    /// Joint cell proportions p(+,+),p(+,-),p(-,+),p(-,-) over the first two attributes.
    #[arg(long, value_parser = parse_proportions)]
    proportions: Option<[f64; 4]>,
    #[arg(long)]
    margin: Option<f64>,
    /// Also write decoded images (FEAT1) here.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    codec_seed: u64,
    #[arg(long, value_parser = parse_hw, default_value = "32x32")]
    image: (usize, usize),
    /// Prior recorded in the output dataset.
    #[arg(long, value_enum, default_value_t = PriorArg::Gaussian)]
    prior: PriorArg,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    no_separator: bool,
    #[command(flatten)]
    codec: CodecArgs,
}

#[derive(Debug, Args)]
struct ToyCodecArgs {
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    codec_seed: u64,
    #[arg(long, value_parser = parse_hw, default_value = "32x32")]
    image: (usize, usize),
}

#[derive(Debug, Args)]
struct ConvertArgs {
    #[arg(long)]
    input: PathBuf,
    /// Prior assumed for CSV input.
    #[arg(long, value_enum, default_value_t = PriorArg::Gaussian)]
    prior: PriorArg,
}

fn parse_hw(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected RxC, got `{s}`"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("`{a}`: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("`{b}`: {e}"))?;
    if a == 0 || b == 0 {
        return Err("both sizes must be positive".into());
    }
    Ok((a, b))
}

fn parse_proportions(s: &str) -> std::result::Result<[f64; 4], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into()
        .map_err(|v: Vec<f64>| format!("expected 4 proportions, got {}", v.len()))
}

fn parse_literal(s: &str) -> Option<Vec<f64>> {
    if !s.contains(',') && s.trim().parse::<f64>().is_err() {
        return None;
    }
    s.split(',').map(|x| x.trim().parse::<f64>().ok()).collect()
}

struct Ctx<'a> {
    output: Option<PathBuf>,
    codec_cmd: Option<String>,
    quiet: bool,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn emit(&mut self, bytes: &[u8]) -> Result<()> {
        match &self.output {
            Some(path) => fs::write(path, bytes)?,
            None => {
                self.stdout.write_all(bytes)?;
                self.stdout.flush()?;
            }
        }
        Ok(())
    }

    fn emit_json(&mut self, json: String) -> Result<()> {
        let mut json = json;
        json.push('\n');
        self.emit(json.as_bytes())
    }

    fn info(&mut self, msg: impl std::fmt::Display) {
        if !self.quiet {
            let _ = writeln!(self.stderr, "{msg}");
        }
    }

    fn codec(&self, args: &CodecArgs, dim: usize) -> Result<Option<Box<dyn Codec>>> {
        let kind = match args.codec {
            Some(kind) => kind,
            None if self.codec_cmd.is_some() => CodecKind::Cmd,
            None => return Ok(None),
        };
        Ok(Some(match kind {
            CodecKind::Toy => Box::new(ToyCodec::new(
                args.codec_seed,
                dim,
                args.image.0,
                args.image.1,
            )?),
            CodecKind::Cmd => {
                let cmd = self.codec_cmd.as_deref().ok_or_else(|| {
                    Error::CodecUnavailable("--codec cmd needs --codec-cmd".into())
                })?;
                Box::new(ProcessCodec::spawn(cmd)?)
            }
        }))
    }
}

/// Reads a dataset, choosing the format from the file's leading bytes.
pub fn load_dataset(path: &Path, prior: Prior) -> Result<LatentDataset> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(crate::io::latent_file::LATENT_MAGIC) {
        decode_latents(&bytes)
    } else {
        read_latents_csv(bytes.as_slice(), prior)
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn dataset_bytes(ds: &LatentDataset, csv: bool) -> Result<Vec<u8>> {
    if csv {
        let mut out = Vec::new();
        write_latents_csv(ds, &mut out)?;
        Ok(out)
    } else {
        encode_latents(ds)
    }
}

fn resolve(spec: &str, data: Option<&LatentDataset>) -> Result<(LatentVector, Option<String>)> {
    if let Some(ds) = data {
        if let Some(i) = ds.index_of(spec) {
            return Ok((ds.vector(i), Some(spec.to_owned())));
        }
    }
    match parse_literal(spec) {
        Some(values) => Ok((LatentVector::new(values)?, None)),
        None if data.is_some() => Err(Error::InvalidDataset(format!("no row with id `{spec}`"))),
        None => Err(Error::InvalidDataset(format!(
            "`{spec}` is neither a latent literal nor resolvable without --data"
        ))),
    }
}

fn load_optional(path: Option<&PathBuf>) -> Result<Option<LatentDataset>> {
    path.map(|p| load_dataset(p, Prior::Gaussian)).transpose()
}

fn cmd_interpolate(ctx: &mut Ctx, args: InterpolateArgs) -> Result<()> {
    let data = load_optional(args.data.as_ref())?;
    let (a, a_id) = resolve(&args.from, data.as_ref())?;
    let (b, b_id) = resolve(&args.to, data.as_ref())?;
    let mode = InterpolationMode::from(args.mode);
    let path = interpolate_path(&a, &b, args.steps, mode)?;
    let last = path.len() - 1;
    let entries = path
        .into_iter()
        .enumerate()
        .map(|(j, z)| match j {
            0 => (CellRole::Input, a_id.clone(), z),
            j if j == last => (CellRole::Input, b_id.clone(), z),
            _ => (CellRole::Interpolated, None, z),
        })
        .collect();
    let mut meta = BTreeMap::new();
    meta.insert("kind".into(), Value::from("interpolation"));
    meta.insert("interpolation".into(), serde_json::to_value(mode)?);
    meta.insert("steps".into(), Value::from(args.steps));
    let grid = GridManifest::from_row_major(1, args.steps, entries, meta)?;
    ctx.emit_json(grid.to_json()?)
}

fn cmd_jdiagram(ctx: &mut Ctx, args: JDiagramArgs) -> Result<()> {
    let data = load_optional(args.data.as_ref())?;
    let (a, a_id) = resolve(&args.a, data.as_ref())?;
    let (b, b_id) = resolve(&args.b, data.as_ref())?;
    let (c, c_id) = resolve(&args.c, data.as_ref())?;
    let codec = ctx.codec(&args.codec, a.dim())?;
    let options = JDiagramOptions {
        ids: [a_id, b_id, c_id],
        codec: codec.as_deref(),
        corners: match args.corners {
            CornersArg::Raw => CornerSource::Raw,
            CornersArg::Reconstructed => CornerSource::Reconstructed,
        },
    };
    let grid = jdiagram_with(&a, &b, &c, args.rows, args.cols, &options)?;
    ctx.emit_json(grid.to_json()?)
}

fn cmd_mine(ctx: &mut Ctx, args: MineArgs) -> Result<()> {
    let data = load_dataset(&args.data, Prior::Gaussian)?;
    let seed = match (&args.seed_id, &args.seed_vec) {
        (Some(id), _) => {
            let i = data
                .index_of(id)
                .ok_or_else(|| Error::InvalidDataset(format!("no row with id `{id}`")))?;
            data.vector(i)
        }
        (None, Some(v)) => {
            let values = parse_literal(v)
                .ok_or_else(|| Error::InvalidDataset(format!("bad latent literal `{v}`")))?;
            LatentVector::new(values)?
        }
        (None, None) => unreachable!("clap requires one seed"),
    };
    let metric = match args.metric {
        MetricArg::Euclidean => Metric::Euclidean,
        MetricArg::Cosine => Metric::Cosine,
    };
    let index = NeighborIndex::new(&data, metric)?;
    let grid = mine_grid(&index, &seed, args.anchors.0, args.anchors.1, args.spread)?;
    ctx.info(format_args!(
        "mine: {}x{} grid from {} anchors",
        grid.grid.rows,
        grid.grid.cols,
        grid.anchors.len()
    ));
    ctx.emit_json(grid.to_json()?)
}

fn require<'a, T>(value: Option<&'a T>, flag: &str) -> Result<&'a T> {
    value.ok_or_else(|| Error::InvalidDataset(format!("{flag} is required for this method")))
}

fn cmd_attrvec(ctx: &mut Ctx, args: AttrvecArgs) -> Result<()> {
    let data = load_optional(args.data.as_ref())?;
    let vector = match args.method {
        MethodArg::Naive => attribute_vector(require(data.as_ref(), "--data")?, &args.attr)?,
        MethodArg::Balanced => {
            let ds = require(data.as_ref(), "--data")?;
            let confound = require(args.confound.as_ref(), "--confound")?;
            let mode = if args.replicate {
                BalanceMode::Replicated
            } else {
                BalanceMode::Weighted
            };
            balanced_attribute_vector_with(ds, &args.attr, confound, BalanceOptions { mode })?
        }
        MethodArg::Synthetic => {
            let features = read_features(require(args.features.as_ref(), "--features")?)?;
            let dim = match (args.latent_dim, &data) {
                (Some(d), _) => d,
                (None, Some(ds)) => ds.dim(),
                (None, None) => {
                    return Err(Error::InvalidDataset(
                        "synthetic method needs --latent-dim or --data".into(),
                    ))
                }
            };
            let mut codec_args = CodecArgs {
                codec: args.codec.codec,
                codec_seed: args.codec.codec_seed,
                image: args.codec.image,
            };
            if codec_args.codec.is_none() && ctx.codec_cmd.is_none() {
                codec_args.codec = Some(CodecKind::Toy);
            }
            let shape = features.shape();
            if codec_args.codec == Some(CodecKind::Toy) {
                codec_args.image = (shape.height, shape.width);
            }
            let codec = ctx
                .codec(&codec_args, dim)?
                .expect("codec kind is always set here");
            let blur = GaussianBlur { sigma: args.sigma };
            synthetic_attribute_vector(&features, &blur, codec.as_ref(), &args.attr)?
        }
    };
    ctx.info(format_args!(
        "{}: {} vector, norm {:.6}",
        vector.name,
        vector.method,
        vector.direction.norm()
    ));
    ctx.emit_json(vector.to_json()?)
}

fn cmd_classify(ctx: &mut Ctx, args: ClassifyArgs) -> Result<()> {
    let train = load_dataset(&args.train, Prior::Gaussian)?;
    let test = load_dataset(&args.test, Prior::Gaussian)?;
    let options = EvaluateOptions {
        centered: args.centered,
        bins: args.bins,
    };
    let mut sources: Vec<(Option<String>, VectorSource)> = Vec::new();
    for m in &args.method {
        match m {
            MethodArg::Naive => sources.push((None, VectorSource::Naive)),
            MethodArg::Balanced => {
                let confound = require(args.confound.as_ref(), "--confound")?;
                sources.push((
                    None,
                    VectorSource::Balanced {
                        confound: confound.clone(),
                    },
                ));
            }
            MethodArg::Synthetic => {
                return Err(Error::InvalidDataset(
                    "synthetic vectors are evaluated via --vector (see attrvec)".into(),
                ))
            }
        }
    }
    for path in &args.vector {
        let v = AttributeVector::from_json(&fs::read_to_string(path)?)?;
        sources.push((Some(v.name.clone()), VectorSource::Precomputed(v)));
    }

    let mut reports = Vec::new();
    for attr in &args.attr {
        for (only, source) in &sources {
            if only.as_ref().is_some_and(|name| name != attr) {
                continue;
            }
            if matches!(source, VectorSource::Balanced { confound } if confound == attr) {
                ctx.info(format_args!(
                    "{attr}: skipping balanced, attribute is its own confound"
                ));
                continue;
            }
            let report = evaluate_attribute(&train, &test, attr, source, options)?;
            ctx.info(format_args!(
                "{attr} / {}: accuracy {:.4}, balanced {:.4}, auc {:.4}",
                report.method, report.accuracy, report.balanced_accuracy, report.auc
            ));
            if let Some(dir) = &args.csv_dir {
                fs::create_dir_all(dir)?;
                let stem = format!("{attr}_{}", report.method);
                fs::write(dir.join(format!("{stem}_roc.csv")), report.roc_csv())?;
                fs::write(dir.join(format!("{stem}_hist.csv")), report.histogram_csv())?;
            }
            reports.push(report);
        }
    }
    let table = accuracy_table(&reports);
    ctx.emit_json(serde_json::to_string_pretty(&reports)?)?;
    if ctx.output.is_some() {
        ctx.stdout.write_all(table.as_bytes())?;
    } else if !ctx.quiet {
        ctx.stderr.write_all(table.as_bytes())?;
    }
    Ok(())
}

fn cmd_priorstats(ctx: &mut Ctx, args: PriorstatsArgs) -> Result<()> {
    let ds = load_dataset(&args.data, Prior::Gaussian)?;
    let stats = prior_stats(&ds)?;
    ctx.emit_json(serde_json::to_string_pretty(&stats)?)
}

fn cmd_toygen(ctx: &mut Ctx, args: ToygenArgs) -> Result<()> {
    let names: Vec<&str> = args
        .attrs
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    let mut spec = ToyDatasetSpec::new(args.n, args.dim, args.seed, &names)?;
    if let Some(m) = args.margin {
        spec = spec.with_margin(m);
    }
    if let Some(p) = args.proportions {
        spec = spec.with_proportions(p);
    }
    let ds = match &args.features {
        Some(path) => {
            let codec = ToyCodec::new(args.codec_seed, args.dim, args.image.0, args.image.1)?;
            let (ds, features) = toy_dataset(&spec, &codec)?;
            write_features(&features, path)?;
            ds
        }
        None => toy_latents(&spec)?,
    };
    let ds = if Prior::from(args.prior) == ds.prior() {
        ds
    } else {
        LatentDataset::from_flat(
            ds.dim(),
            ds.flat().to_vec(),
            Some(ds.ids().to_vec()),
            ds.labels().clone(),
            args.prior.into(),
        )?
    };
    ctx.info(format_args!("toygen: {} rows, dim {}", ds.len(), ds.dim()));
    let csv = ctx.output.as_deref().is_some_and(is_csv);
    let bytes = dataset_bytes(&ds, csv)?;
    ctx.emit(&bytes)
}

fn cmd_render(ctx: &mut Ctx, args: RenderArgs) -> Result<()> {
    let manifest = GridManifest::from_json(&fs::read_to_string(&args.manifest)?)?;
    manifest.validate()?;
    let codec = ctx
        .codec(&args.codec, manifest.dim)?
        .ok_or_else(|| Error::CodecUnavailable("render needs --codec toy|cmd".into()))?;
    let options = RenderOptions {
        separator: !args.no_separator,
        ..RenderOptions::default()
    };
    match ctx.output.clone() {
        Some(path) => render_grid(&manifest, codec.as_ref(), path, options),
        None => {
            let (w, h, px) = crate::io::render::render_pixels(&manifest, codec.as_ref(), options)?;
            let bytes = crate::io::render::encode_png(w, h, &px)?;
            ctx.emit(&bytes)
        }
    }
}

fn cmd_toy_codec(ctx: &mut Ctx, args: ToyCodecArgs) -> Result<()> {
    let codec = ToyCodec::new(args.codec_seed, args.dim, args.image.0, args.image.1)?;
    let stdin = std::io::stdin();
    serve(&codec, stdin.lock(), &mut *ctx.stdout)
}

fn cmd_convert(ctx: &mut Ctx, args: ConvertArgs) -> Result<()> {
    let ds = load_dataset(&args.input, args.prior.into())?;
    let csv = match ctx.output.as_deref() {
        Some(path) => is_csv(path),
        None => !is_csv(&args.input),
    };
    let bytes = dataset_bytes(&ds, csv)?;
    ctx.emit(&bytes)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    let mut ctx = Ctx {
        output: cli.output,
        codec_cmd: cli.codec_cmd,
        quiet: cli.quiet,
        stdout,
        stderr,
    };
    let result = match cli.command {
        Command::Interpolate(a) => cmd_interpolate(&mut ctx, a),
        Command::Jdiagram(a) => cmd_jdiagram(&mut ctx, a),
        Command::Mine(a) => cmd_mine(&mut ctx, a),
        Command::Attrvec(a) => cmd_attrvec(&mut ctx, a),
        Command::Classify(a) => cmd_classify(&mut ctx, a),
        Command::Priorstats(a) => cmd_priorstats(&mut ctx, a),
        Command::Toygen(a) => cmd_toygen(&mut ctx, a),
        Command::Render(a) => cmd_render(&mut ctx, a),
        Command::ToyCodec(a) => cmd_toy_codec(&mut ctx, a),
        Command::Convert(a) => cmd_convert(&mut ctx, a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(ctx.stderr, "error: {e}");
            if e.is_codec() {
                EXIT_CODEC
            } else {
                EXIT_DATA
            }
        }
    }
}
