//! The `cwsim` command line.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 for
//! problems with the data.

pub mod output;
pub mod svg;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cwsim::analysis::{LocalizationOptions, DEFAULT_MEMORY_BUDGET};
use cwsim::synth;
use cwsim::tensorstore::{validate_dump, write_attention_dump, write_representation_dump, CorpusInfo, DumpKind};
use cwsim::{Analyzer, LayerRef, Measure, MeasureOptions, Parallelism, SimilarityHeatmap};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<cwsim::Error> for CliError {
    fn from(e: cwsim::Error) -> Self {
        if e.is_usage() {
            CliError::config(e.to_string())
        } else {
            CliError::data(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cwsim", version, about = "Layer similarity heatmaps for contextual word representations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Heatmap of a similarity measure over every layer pair of the given dumps.
    Compare(CompareArgs),
    /// Per-layer neuronsim mean minus svsim mean.
    Localization(LocalizationArgs),
    /// Check a dump's manifest and layer files.
    Validate(ValidateArgs),
    /// Render a heatmap JSON file as SVG.
    Render(RenderArgs),
    /// Write seeded synthetic dumps.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Rep,
    Attn,
}

impl From<KindArg> for DumpKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Rep => DumpKind::Representation,
            KindArg::Attn => DumpKind::Attention,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Memory budget for cached layers, in bytes with an optional K/M/G suffix.
    #[arg(long, env = "CWSIM_MEM_BUDGET", value_parser = parse_bytes)]
    pub mem_budget: Option<usize>,

    /// Worker threads; 1 runs sequentially, 0 uses every core.
    #[arg(long, short = 'j')]
    pub jobs: Option<usize>,
}

impl RunArgs {
    fn analyzer(&self, manifests: &[PathBuf]) -> Result<Analyzer, CliError> {
        let mut an = Analyzer::open(manifests)?
            .with_memory_budget(self.mem_budget.unwrap_or(DEFAULT_MEMORY_BUDGET));
        if let Some(j) = self.jobs {
            an = an.with_parallelism(Parallelism::from_jobs(j));
        }
        Ok(an)
    }
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, value_enum, default_value = "rep")]
    pub kind: KindArg,

    /// neuronsim, mixedsim, svsim, pwsim, ckasim; or for attention dumps
    /// norm, pearson, js, svsim, pwsim, ckasim (optionally prefixed attn-).
    #[arg(long)]
    pub measure: String,

    #[arg(long, num_args = 1.., required = true)]
    pub dumps: Vec<PathBuf>,

    /// Dumps compared as a second block after --dumps.
    #[arg(long, num_args = 1..)]
    pub variant_dumps: Vec<PathBuf>,

    #[arg(long)]
    pub csv: Option<PathBuf>,

    #[arg(long)]
    pub json: Option<PathBuf>,

    #[arg(long)]
    pub svg: Option<PathBuf>,

    #[arg(long, default_value_t = 24)]
    pub cell_size: u32,

    /// Fraction of variance kept by the SVD truncation.
    #[arg(long, default_value_t = cwsim::rep::DEFAULT_VARIANCE_THRESHOLD)]
    pub threshold: f64,

    /// Average only the top k neurons (neuronsim).
    #[arg(long)]
    pub top_k: Option<usize>,

    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct LocalizationArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub dumps: Vec<PathBuf>,

    #[arg(long)]
    pub csv: Option<PathBuf>,

    /// Also write the full profile, including both heatmaps.
    #[arg(long)]
    pub json: Option<PathBuf>,

    #[arg(long, default_value_t = cwsim::rep::DEFAULT_VARIANCE_THRESHOLD)]
    pub threshold: f64,

    #[arg(long)]
    pub top_k: Option<usize>,

    /// Average only over layers of other models.
    #[arg(long)]
    pub cross_model_only: bool,

    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub manifest: PathBuf,

    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Heatmap JSON written by `compare --json`.
    pub input: PathBuf,

    #[arg(long)]
    pub svg: PathBuf,

    #[arg(long, default_value_t = 24)]
    pub cell_size: u32,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, value_enum, default_value = "rep")]
    pub kind: KindArg,

    #[arg(long, default_value_t = 2)]
    pub models: usize,

    #[arg(long, default_value_t = 4)]
    pub layers: usize,

    /// Words in the corpus (representation dumps).
    #[arg(long, default_value_t = 200)]
    pub words: usize,

    /// Neurons per layer (representation dumps).
    #[arg(long, default_value_t = 32)]
    pub width: usize,

    /// Heads per layer (attention dumps).
    #[arg(long, default_value_t = 4)]
    pub heads: usize,

    /// Sentences of the attention corpus; lengths cycle through 3..=8.
    #[arg(long, default_value_t = 10)]
    pub sentences: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `1024`, `512K`, `64M`, `4G` (binary multiples).
pub fn parse_bytes(s: &str) -> Result<usize, String> {
    let s = s.trim();
    let (digits, shift) = match s.char_indices().last() {
        Some((i, c)) if c.is_ascii_alphabetic() => {
            let shift = match c.to_ascii_uppercase() {
                'K' => 10,
                'M' => 20,
                'G' => 30,
                _ => return Err(format!("unknown size suffix in {s:?}")),
            };
            (&s[..i], shift)
        }
        _ => (s, 0),
    };
    let n: usize = digits.parse().map_err(|_| format!("invalid byte count {s:?}"))?;
    n.checked_mul(1usize << shift)
        .ok_or_else(|| format!("byte count {s:?} overflows"))
}

fn measure_options(threshold: f64, top_k: Option<usize>) -> Result<MeasureOptions, CliError> {
    let opts = MeasureOptions {
        variance_threshold: threshold,
        top_k,
    };
    opts.validate()?;
    Ok(opts)
}

fn layers_of(an: &Analyzer, manifests: &[PathBuf]) -> Vec<LayerRef> {
    an.dumps()[..manifests.len()]
        .iter()
        .flat_map(|d| (0..d.num_layers()).map(|l| LayerRef::new(d.model_name(), l)))
        .collect()
}

fn report_partial(h: &SimilarityHeatmap) {
    let absent = h.absent_count();
    if absent > 0 {
        eprintln!(
            "warning: {absent} of {} cells could not be evaluated and are left empty",
            h.nrows() * h.ncols()
        );
        for f in &h.failures {
            log::debug!("{} / {}: {}", h.row_labels[f.row], h.col_labels[f.col], f.message);
        }
    }
}

pub fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let measure = Measure::parse(args.kind.into(), &args.measure)?;
    let opts = measure_options(args.threshold, args.top_k)?;
    if args.top_k.is_some() && measure != Measure::NeuronSim {
        log::warn!("--top-k only affects neuronsim; ignored for {measure}");
    }
    let total = args.dumps.len() + args.variant_dumps.len();
    if total < 2 {
        return Err(CliError::config(format!("compare needs at least two dumps, got {total}")));
    }
    let all: Vec<PathBuf> = args.dumps.iter().chain(&args.variant_dumps).cloned().collect();
    let an = args.run.analyzer(&all)?;
    let layers = layers_of(&an, &all);
    let base_len: usize = an.dumps()[..args.dumps.len()].iter().map(|d| d.num_layers()).sum();
    let h = if args.variant_dumps.is_empty() {
        an.build_heatmap(&layers, measure, &opts)?
    } else {
        an.compare_model_sets(&layers[..base_len], &layers[base_len..], measure, &opts)?
    };
    report_partial(&h);
    let csv = output::heatmap_csv(&h).map_err(|e| CliError::data(e.to_string()))?;
    match &args.csv {
        Some(p) => output::write_file(p, &csv)?,
        None if args.json.is_none() && args.svg.is_none() => output::write_stdout(&csv)?,
        None => {}
    }
    if let Some(p) = &args.json {
        output::write_file(p, &output::to_json(&h))?;
    }
    if let Some(p) = &args.svg {
        let doc = svg::render_heatmap_svg(&h, svg::Palette::Sequential, args.cell_size)
            .map_err(|e| CliError::data(e.to_string()))?;
        output::write_file(p, doc.as_bytes())?;
    }
    Ok(())
}

pub fn cmd_localization(args: &LocalizationArgs) -> Result<(), CliError> {
    let opts = LocalizationOptions {
        measure: measure_options(args.threshold, args.top_k)?,
        cross_model_only: args.cross_model_only,
    };
    let an = args.run.analyzer(&args.dumps)?;
    let layers = layers_of(&an, &args.dumps);
    let profile = an.localization_profile(&layers, &opts)?;
    report_partial(&profile.neuronsim);
    report_partial(&profile.svsim);
    let csv = output::localization_csv(&profile).map_err(|e| CliError::data(e.to_string()))?;
    match &args.csv {
        Some(p) => output::write_file(p, &csv)?,
        None => output::write_stdout(&csv)?,
    }
    if let Some(p) = &args.json {
        output::write_file(p, &output::to_json(&profile))?;
    }
    Ok(())
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<(), CliError> {
    let report = validate_dump(&args.manifest);
    let text = if args.json {
        String::from_utf8(output::to_json(&report)).expect("json is utf-8")
    } else if report.ok {
        format!("{}: ok\n", args.manifest.display())
    } else {
        let mut s = format!(
            "{}: {} violation(s)\n",
            args.manifest.display(),
            report.violations.len()
        );
        for v in &report.violations {
            s.push_str(&format!("  {v}\n"));
        }
        s
    };
    output::write_stdout(text.as_bytes())?;
    if report.ok {
        Ok(())
    } else {
        Err(CliError::data(format!("{} failed validation", args.manifest.display())))
    }
}

pub fn cmd_render(args: &RenderArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| CliError::data(format!("{}: {e}", args.input.display())))?;
    let h: SimilarityHeatmap = serde_json::from_str(&text)
        .map_err(|e| CliError::data(format!("{}: {e}", args.input.display())))?;
    let doc = svg::render_heatmap_svg(&h, svg::Palette::Sequential, args.cell_size)
        .map_err(|e| CliError::data(e.to_string()))?;
    output::write_file(&args.svg, doc.as_bytes())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<Vec<PathBuf>, CliError> {
    if args.models == 0 || args.layers == 0 {
        return Err(CliError::config("--models and --layers must be positive"));
    }
    let mut rng = synth::rng(args.seed);
    let mut paths = Vec::new();
    match args.kind {
        KindArg::Rep => {
            if args.words < 2 || args.width == 0 {
                return Err(CliError::config("need at least 2 words and 1 neuron"));
            }
            let inputs = synth::gaussian_matrix(args.words, 2 * args.width, &mut rng);
            for m in 0..args.models {
                let layers =
                    synth::residual_model(inputs.as_ref(), args.width, args.layers, 0.5, &mut rng)?;
                let name = format!("synth-{m}");
                let corpus = CorpusInfo::word_level(vec![args.words]);
                paths.push(write_representation_dump(args.out.join(&name), &name, corpus, &layers)?);
            }
        }
        KindArg::Attn => {
            if args.sentences == 0 || args.heads == 0 {
                return Err(CliError::config("--sentences and --heads must be positive"));
            }
            let lengths: Vec<usize> = (0..args.sentences).map(|i| 3 + i % 6).collect();
            for m in 0..args.models {
                let layers: Vec<_> = (0..args.layers)
                    .map(|_| synth::softmax_attention(args.heads, &lengths, 2.0, &mut rng))
                    .collect();
                let name = format!("synth-attn-{m}");
                let corpus = CorpusInfo::word_level(lengths.clone());
                paths.push(write_attention_dump(args.out.join(&name), &name, corpus, &layers)?);
            }
        }
    }
    Ok(paths)
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Compare(a) => cmd_compare(a),
        Command::Localization(a) => cmd_localization(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Render(a) => cmd_render(a),
        Command::Synth(a) => {
            let paths = cmd_synth(a)?;
            let text: String = paths.iter().map(|p| format!("{}\n", p.display())).collect();
            output::write_stdout(text.as_bytes())
        }
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
