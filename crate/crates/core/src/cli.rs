//! The `pcc` command line: synthesize, train, evaluate, cross-validate,
//! gradient-check and export.
//!
//! Exit statuses: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::contour::{
    read_contour_file, load_manifest_file, ClassLabel, Normalization, PipelineOptions, FRAME_STEP,
};
use crate::engine::OptimizerKind;
use crate::error::{Error, Result};
use crate::models::{
    check_model_gradients, load_model_file, save_model_file, ArchConfig, ArchTag, ConvNetConfig,
    GradCheckOptions, LstmConfig,
};
use crate::plot::{contour_svg, filters_csv, filters_svg};
use crate::rng::Rng;
use crate::synth::{gen_corpus, NoiseLevel, SynthConfig};
use crate::training::{cross_validate, evaluate, train_with_progress, TrainConfig};

/// Largest per-layer relative error `gradcheck` accepts.
pub const GRADCHECK_THRESHOLD: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Usage = 1,
    Data = 2,
    Numeric = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    /// Maps a library error to the status the command exits with.
    pub fn of(err: &Error) -> Self {
        match err {
            Error::Config(_) => ExitStatus::Usage,
            Error::Numeric(_) => ExitStatus::Numeric,
            Error::ManifestRow { source, .. } => ExitStatus::of(source),
            _ => ExitStatus::Data,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "pcc", version, about = "Statement vs wh-question classification from F0 contours")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic labeled corpus (contour CSVs + manifest).
    Synth(SynthArgs),
    /// Train a model and save the best-loss snapshot.
    Train(TrainArgs),
    /// Evaluate a saved model on a manifest.
    Eval(EvalArgs),
    /// k-fold cross-validation with a five-number accuracy summary.
    Cv(CvArgs),
    /// Compare backpropagated gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Export a ConvNet's first-layer filters as CSV or SVG.
    DumpFilters(DumpFiltersArgs),
    /// Render one contour file as an SVG plot.
    PlotContour(PlotContourArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ArchArg {
    Convnet,
    Lstm,
}

impl From<ArchArg> for ArchTag {
    fn from(a: ArchArg) -> Self {
        match a {
            ArchArg::Convnet => ArchTag::ConvNet,
            ArchArg::Lstm => ArchTag::Lstm,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    Zero,
    Low,
    Moderate,
}

impl From<NoiseArg> for NoiseLevel {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Zero => NoiseLevel::Zero,
            NoiseArg::Low => NoiseLevel::Low,
            NoiseArg::Moderate => NoiseLevel::Moderate,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    None,
    Scale500,
}

impl From<NormArg> for Normalization {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::None => Normalization::None,
            NormArg::Scale500 => Normalization::Scale500,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

impl From<OptimizerArg> for OptimizerKind {
    fn from(o: OptimizerArg) -> Self {
        match o {
            OptimizerArg::Adam => OptimizerKind::Adam,
            OptimizerArg::Sgd => OptimizerKind::Sgd,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FilterFormat {
    Csv,
    Svg,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "PCC_SEED", default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = NoiseArg::Moderate)]
    pub noise: NoiseArg,
    #[arg(long, default_value_t = 1966, value_parser = clap::value_parser!(u32).range(1..))]
    pub n_statements: u32,
    #[arg(long, default_value_t = 2860, value_parser = clap::value_parser!(u32).range(1..))]
    pub n_questions: u32,
    #[arg(long, default_value_t = 25, value_parser = clap::value_parser!(u32).range(1..))]
    pub n_speakers_stmt: u32,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    pub n_speakers_q: u32,
}

/// Input pipeline flags shared by every command that reads a manifest.
#[derive(Args, Debug, Clone, Copy)]
pub struct PipelineArgs {
    /// Frame normalization.
    #[arg(long, value_enum, default_value_t = NormArg::Scale500)]
    pub norm: NormArg,
    /// Resampling step in seconds; samples are padded to 1024 frames.
    #[arg(long, default_value_t = FRAME_STEP)]
    pub frame_step: f64,
    /// Cut contours longer than 1024 frames instead of failing.
    #[arg(long)]
    pub truncate: bool,
}

impl PipelineArgs {
    fn options(&self) -> PipelineOptions {
        PipelineOptions {
            frame_step: self.frame_step,
            normalization: self.norm.into(),
            truncate: self.truncate,
        }
    }
}

/// Architecture and optimization flags shared by `train` and `cv`.
#[derive(Args, Debug, Clone, Copy)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = ArchArg::Convnet)]
    pub arch: ArchArg,
    #[arg(long, default_value_t = 18, value_parser = clap::value_parser!(u32).range(1..))]
    pub epochs: u32,
    #[arg(long, env = "PCC_SEED", default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u32).range(1..))]
    pub batch: u32,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
    /// LSTM: keep every n-th input frame.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=1024))]
    pub downsample: u32,
    /// LSTM hidden units.
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u32).range(1..))]
    pub hidden: u32,
    /// ConvNet filters.
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u32).range(1..))]
    pub filters: u32,
}

impl ModelArgs {
    fn arch_config(&self) -> ArchConfig {
        arch_config(self.arch, self.hidden, self.downsample, self.filters)
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs as usize,
            batch_size: self.batch as usize,
            optimizer: self.optimizer.into(),
            learning_rate: self.lr,
            seed: self.seed,
            shuffle: true,
        }
    }
}

fn arch_config(arch: ArchArg, hidden: u32, downsample: u32, filters: u32) -> ArchConfig {
    match arch {
        ArchArg::Convnet => ArchConfig::ConvNet(ConvNetConfig {
            n_filters: filters as usize,
            ..ConvNetConfig::default()
        }),
        ArchArg::Lstm => ArchConfig::Lstm(LstmConfig {
            hidden_size: hidden as usize,
            input_downsample: downsample as usize,
        }),
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Manifest CSV (`path,label,speaker_id`).
    #[arg(long)]
    pub data: PathBuf,
    /// Model file to write; the epoch log goes to `<out>.log`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Args, Debug)]
pub struct CvArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(2..))]
    pub folds: u32,
    /// Folds trained concurrently; the report does not depend on it.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: u32,
    /// Where to write the JSON report.
    #[arg(long, default_value = "cv_report.json")]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, value_enum, default_value_t = ArchArg::Convnet)]
    pub arch: ArchArg,
    #[arg(long, env = "PCC_SEED", default_value_t = 42)]
    pub seed: u64,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    /// Coordinates checked per tensor (at most 200).
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u32).range(1..=200))]
    pub max_coords: u32,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=1024))]
    pub downsample: u32,
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u32).range(1..))]
    pub hidden: u32,
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u32).range(1..))]
    pub filters: u32,
    /// Corrupt the analytic gradient so the check must fail.
    #[arg(long)]
    pub inject_fault: bool,
}

#[derive(Args, Debug)]
pub struct DumpFiltersArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = FilterFormat::Csv)]
    pub format: FilterFormat,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PlotContourArgs {
    /// Contour file (.csv or .PitchTier).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitStatus::Usage.code()
            } else {
                ExitStatus::Success.code()
            };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match execute(cli.command, &mut out) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e}");
            ExitStatus::of(&e).code()
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn emit(out: &mut dyn Write, line: impl AsRef<str>) -> Result<()> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| Error::io("<stdout>", e))
}

/// Runs a parsed command, writing its report to `out`.
pub fn execute(command: Command, out: &mut dyn Write) -> Result<ExitStatus> {
    match command {
        Command::Synth(a) => cmd_synth(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Cv(a) => cmd_cv(a, out),
        Command::Gradcheck(a) => cmd_gradcheck(a, out),
        Command::DumpFilters(a) => cmd_dump_filters(a, out),
        Command::PlotContour(a) => cmd_plot_contour(a, out),
    }
}

fn cmd_synth(a: SynthArgs, out: &mut dyn Write) -> Result<ExitStatus> {
    let cfg = SynthConfig {
        n_statements: a.n_statements as usize,
        n_questions: a.n_questions as usize,
        n_speakers_stmt: a.n_speakers_stmt as usize,
        n_speakers_q: a.n_speakers_q as usize,
        seed: a.seed,
        noise_level: a.noise.into(),
        ..SynthConfig::default()
    };
    let corpus = gen_corpus(&cfg, &a.out, &PipelineOptions::default())?;
    let [stmt, q] = corpus.dataset.class_counts();
    emit(out, format!("wrote {} contours ({stmt} statement, {q} wh_question)", stmt + q))?;
    emit(out, format!("manifest {}", corpus.manifest_path.display()))?;
    emit(out, format!("config digest {}", corpus.digest))?;
    Ok(ExitStatus::Success)
}

fn cmd_train(a: TrainArgs, out: &mut dyn Write) -> Result<ExitStatus> {
    let data = load_manifest_file(&a.data, &a.pipeline.options())?;
    let arch = a.model.arch_config();
    let cfg = a.model.train_config();
    let model = arch.build(&mut Rng::new(a.model.seed))?;

    let mut log = String::new();
    let mut write_err = None;
    let outcome = train_with_progress(&model, &data, &cfg, |r| {
        let line = format!("epoch {} loss {:.6} accuracy {:.4}", r.epoch, r.loss, r.accuracy);
        if let Err(e) = emit(out, &line) {
            write_err.get_or_insert(e);
        }
        log.push_str(&line);
        log.push('\n');
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    save_model_file(&outcome.best, &a.out)?;
    let log_path = PathBuf::from(format!("{}.log", a.out.display()));
    write_file(&log_path, &log)?;
    let best = &outcome.history[outcome.best_epoch - 1];
    emit(
        out,
        format!(
            "kept epoch {} (loss {:.6}); model {}",
            outcome.best_epoch,
            best.loss,
            a.out.display()
        ),
    )?;
    Ok(ExitStatus::Success)
}

fn cmd_eval(a: EvalArgs, out: &mut dyn Write) -> Result<ExitStatus> {
    let model = load_model_file(&a.model)?;
    let data = load_manifest_file(&a.data, &a.pipeline.options())?;
    let report = evaluate(&model, &data)?;
    emit(out, format!("accuracy {:.4}", report.accuracy))?;
    emit(out, "confusion (rows = true, columns = predicted)")?;
    emit(out, format!("{:>12} {:>10} {:>11}", "", "statement", "wh_question"))?;
    for label in ClassLabel::ALL {
        let row = report.confusion.0[label.index()];
        emit(out, format!("{:>12} {:>10} {:>11}", label.token(), row[0], row[1]))?;
    }
    for label in ClassLabel::ALL {
        let recall = match report.confusion.recall(label) {
            Some(r) => format!("{r:.4}"),
            None => "n/a".into(),
        };
        emit(out, format!("recall {} {recall}", label.token()))?;
    }
    Ok(ExitStatus::Success)
}

fn cmd_cv(a: CvArgs, out: &mut dyn Write) -> Result<ExitStatus> {
    let data = load_manifest_file(&a.data, &a.pipeline.options())?;
    let report = cross_validate(
        &a.model.arch_config(),
        &data,
        a.folds as usize,
        &a.model.train_config(),
        a.jobs as usize,
    )?;
    write_file(&a.out, &report.to_json())?;
    for f in &report.folds {
        emit(
            out,
            format!(
                "fold {:>2} test {:>4} accuracy {:.4} kept epoch {}",
                f.fold + 1,
                f.test_size,
                f.accuracy,
                f.selected_epoch
            ),
        )?;
    }
    let s = report.summary.summary;
    for (name, v) in [
        ("Min.", s.min),
        ("1st Qu.", s.q1),
        ("Median", s.median),
        ("3rd Qu.", s.q3),
        ("Max.", s.max),
    ] {
        emit(out, format!("{name:<8} {v:.4}"))?;
    }
    let sizes: Vec<String> = report.fold_sizes.iter().map(usize::to_string).collect();
    emit(out, format!("fold sizes {}", sizes.join(" ")))?;
    emit(out, format!("report {}", a.out.display()))?;
    Ok(ExitStatus::Success)
}

fn cmd_gradcheck(a: GradcheckArgs, out: &mut dyn Write) -> Result<ExitStatus> {
    let arch = arch_config(a.arch, a.hidden, a.downsample, a.filters);
    let options = GradCheckOptions {
        eps: a.eps,
        max_coords: a.max_coords as usize,
        inject_fault: a.inject_fault,
    };
    let check = check_model_gradients(&arch, a.seed, &options)?;
    for (layer, err) in check.layers() {
        emit(out, format!("{layer:<6} max relative error {err:.3e}"))?;
    }
    let worst = check.max_error();
    if worst > GRADCHECK_THRESHOLD {
        emit(out, format!("FAIL: {worst:.3e} exceeds {GRADCHECK_THRESHOLD:e}"))?;
        return Ok(ExitStatus::Numeric);
    }
    emit(out, format!("ok: max {worst:.3e}"))?;
    Ok(ExitStatus::Success)
}

fn cmd_dump_filters(a: DumpFiltersArgs, out: &mut dyn Write) -> Result<ExitStatus> {
    let model = load_model_file(&a.model)?;
    let Some(net) = model.as_convnet() else {
        return Err(Error::Config(format!(
            "{} is an {} model: no convolutional filters",
            a.model.display(),
            model.arch().token()
        )));
    };
    let weights = &net.conv().weights;
    let text = match a.format {
        FilterFormat::Csv => filters_csv(weights)?,
        FilterFormat::Svg => filters_svg(weights)?,
    };
    write_file(&a.out, &text)?;
    emit(
        out,
        format!("wrote {} filters to {}", weights.shape()[0], a.out.display()),
    )?;
    Ok(ExitStatus::Success)
}

fn cmd_plot_contour(a: PlotContourArgs, out: &mut dyn Write) -> Result<ExitStatus> {
    let name = a.input.display().to_string();
    let contour = read_contour_file(&a.input, ClassLabel::Statement, "plot")?;
    write_file(&a.out, &contour_svg(&contour, &name))?;
    emit(out, format!("wrote {}", a.out.display()))?;
    Ok(ExitStatus::Success)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn error_statuses() {
        assert_eq!(ExitStatus::of(&Error::Config("x".into())), ExitStatus::Usage);
        assert_eq!(ExitStatus::of(&Error::Numeric("x".into())), ExitStatus::Numeric);
        assert_eq!(ExitStatus::of(&Error::ModelFormat("x".into())), ExitStatus::Data);
        let nested = Error::ManifestRow {
            row: 2,
            path: "a".into(),
            source: Box::new(Error::parse("a", 1, "bad")),
        };
        assert_eq!(ExitStatus::of(&nested), ExitStatus::Data);
    }
}
