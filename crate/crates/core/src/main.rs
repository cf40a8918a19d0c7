use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter};
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use simulst::cli::{
    aggregate, evaluate, parse_model_spec, read_log, render_table, run_sweep, write_log,
    write_sweep_csv, EvalSettings, LanguagePair, Manifest, SweepAxis, SweepSpec,
};
use simulst::harness::ComputeClock;
use simulst::model::{DiagonalConfig, ModelSpec, DEFAULT_FRAME_MS};
use simulst::{LayerSpec, PolicyConfig, Segmentation, SessionOptions};

/// Simultaneous translation with attention-based emission.
#[derive(Parser)]
#[command(name = "simulst", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate every manifest entry as a stream and score the result.
    Evaluate(EvaluateArgs),
    /// Evaluate once per value of `f` or of the attention layer.
    Sweep(SweepArgs),
    /// Recompute the report of an instance log.
    Score(ScoreArgs),
    /// Serve a model over the line protocol.
    Serve(ServeArgs),
    /// Print the resolved policy configuration as JSON.
    Config(PolicyArgs),
}

#[derive(Args, Clone)]
struct PolicyArgs {
    /// Start from the settings of a language pair (en-de, cs-en, en-zh, en-ja).
    #[arg(long)]
    preset: Option<LanguagePair>,
    #[arg(long)]
    chunk_ms: Option<u32>,
    /// Frames kept back from the end of the received audio.
    #[arg(long)]
    f: Option<usize>,
    /// 1-based decoder layer, or `avg`.
    #[arg(long)]
    layer: Option<LayerSpec>,
    /// Normalize attention per source frame before alignment.
    #[arg(long, overrides_with = "no_normalize")]
    normalize: bool,
    #[arg(long, overrides_with = "normalize")]
    no_normalize: bool,
    /// Latency units: word or char.
    #[arg(long)]
    seg: Option<Segmentation>,
    /// Fixed cap on emitted tokens instead of 2 * frames + 20.
    #[arg(long)]
    max_target_units: Option<usize>,
}

impl PolicyArgs {
    fn resolve(&self) -> Result<PolicyConfig> {
        let mut c = match self.preset {
            Some(p) => p.config(),
            None => PolicyConfig::new(1, LayerSpec::Index(1), 1000)?,
        };
        if let Some(v) = self.chunk_ms {
            c = c.with_chunk_ms(v)?;
        }
        if let Some(v) = self.f {
            c = c.with_f(v)?;
        }
        if let Some(v) = self.layer {
            c = c.with_layer(v)?;
        }
        if self.normalize {
            c = c.with_normalize(true);
        }
        if self.no_normalize {
            c = c.with_normalize(false);
        }
        if let Some(v) = self.seg {
            c = c.with_segmentation(v);
        }
        if self.max_target_units.is_some() {
            c = c.with_max_target_units(self.max_target_units)?;
        }
        Ok(c)
    }
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// builtin:diagonal, builtin:scripted:FILE or remote:HOST:PORT.
    #[arg(long, default_value = "builtin:diagonal")]
    model: String,
    /// Diagonal model: attention width in frames (0 is one-hot).
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Diagonal model: target tokens per source frame.
    #[arg(long, default_value_t = 1.0)]
    len_ratio: f64,
    /// Diagonal model: decoder layers.
    #[arg(long, default_value_t = 1)]
    layers: usize,
    /// Diagonal model: milliseconds of audio per frame.
    #[arg(long, default_value_t = DEFAULT_FRAME_MS)]
    frame_ms: f64,
    /// Diagonal model: JSON object mapping source to target symbols.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Diagonal model: prefix of every token surface.
    #[arg(long, default_value = " ")]
    separator: String,
}

impl ModelArgs {
    fn resolve(&self) -> Result<ModelSpec> {
        let vocab: BTreeMap<String, String> = match &self.vocab {
            Some(p) => serde_json::from_str(&fs::read_to_string(p).with_context(|| p.display().to_string())?)
                .with_context(|| format!("{}: expected a JSON object of strings", p.display()))?,
            None => BTreeMap::new(),
        };
        let diagonal = DiagonalConfig {
            vocab,
            spread: self.sigma,
            len_ratio: self.len_ratio,
            n_layers: self.layers,
            frame_ms: self.frame_ms,
            separator: self.separator.clone(),
        };
        Ok(parse_model_spec(&self.model, diagonal)?)
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    /// Compute cost per step for the computation-aware delays: wall, zero or fixed:MS.
    #[arg(long, default_value = "wall")]
    clock: ComputeClock,
    /// Marks word starts in token surfaces.
    #[arg(long, default_value_t = ' ')]
    boundary_marker: char,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// ATD segment length; defaults to the chunk size.
    #[arg(long)]
    atd_unit_ms: Option<f64>,
}

impl RunArgs {
    fn resolve(&self) -> Result<(Manifest, ModelSpec, EvalSettings)> {
        let manifest = Manifest::load(&self.manifest)
            .with_context(|| format!("loading {}", self.manifest.display()))?;
        let model = self.model.resolve()?;
        let mut settings = EvalSettings::new(self.policy.resolve()?);
        settings.options = SessionOptions {
            clock: self.clock,
            boundary_marker: self.boundary_marker,
        };
        settings.jobs = self.jobs.max(1);
        settings.atd_unit_ms = self.atd_unit_ms;
        Ok((manifest, model, settings))
    }
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Directory for instances.jsonl and report.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    axis: SweepAxis,
    /// Comma-separated values or inclusive ranges, e.g. `1..6` or `1,4,avg`.
    #[arg(long)]
    values: String,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    log: PathBuf,
    /// Write the report as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "127.0.0.1:7878")]
    listen: String,
}

fn write_json<T: serde::Serialize>(path: &PathBuf, value: &T) -> Result<()> {
    let f = File::create(path).with_context(|| path.display().to_string())?;
    serde_json::to_writer_pretty(BufWriter::new(f), value)?;
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<bool> {
    let (manifest, model, settings) = args.run.resolve()?;
    let eval = evaluate(&manifest, &model, &settings)?;
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
        let log = File::create(dir.join("instances.jsonl"))?;
        write_log(&eval.entries, BufWriter::new(log))?;
        write_json(&dir.join("report.json"), &eval.report)?;
    }
    for e in eval.failed() {
        eprintln!("instance {} ({}): {}", e.index(), e.id(), e.error().unwrap_or_default());
    }
    print!("{}", render_table(&eval.report));
    Ok(eval.report.failed == 0)
}

fn run_sweep_cmd(args: SweepArgs) -> Result<bool> {
    let (manifest, model, settings) = args.run.resolve()?;
    let spec = SweepSpec::parse(args.axis, &args.values).map_err(anyhow::Error::msg)?;
    let rows = run_sweep(&manifest, &model, &settings, &spec)?;
    match &args.out {
        Some(p) => write_sweep_csv(spec.axis(), &rows, File::create(p)?)?,
        None => write_sweep_csv(spec.axis(), &rows, io::stdout().lock())?,
    }
    for r in rows.iter().filter(|r| !r.ok()) {
        eprintln!("{} {}: {}", spec.axis().name(), r.value, r.error.as_deref().unwrap_or_default());
    }
    Ok(rows.iter().all(|r| r.ok()))
}

fn run_score(args: ScoreArgs) -> Result<bool> {
    let f = File::open(&args.log).with_context(|| args.log.display().to_string())?;
    let entries = read_log(BufReader::new(f)).with_context(|| args.log.display().to_string())?;
    let report = aggregate(&entries)?;
    if let Some(p) = &args.out {
        write_json(p, &report)?;
    }
    print!("{}", render_table(&report));
    Ok(true)
}

fn run_serve(args: ServeArgs) -> Result<bool> {
    let spec = args.model.resolve()?;
    if matches!(spec, ModelSpec::Remote(_)) {
        bail!("serve needs a builtin model");
    }
    spec.instantiate()?;
    let listener = TcpListener::bind(&args.listen).with_context(|| args.listen.clone())?;
    eprintln!("listening on {}", listener.local_addr()?);
    simulst::model::serve(listener, move || spec.instantiate())?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Evaluate(a) => run_evaluate(a),
        Command::Sweep(a) => run_sweep_cmd(a),
        Command::Score(a) => run_score(a),
        Command::Serve(a) => run_serve(a),
        Command::Config(a) => a.resolve().and_then(|c| {
            println!("{}", serde_json::to_string_pretty(&c)?);
            Ok(true)
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
