use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use progx::datasets::{evaluate, format_scene, gen_homographies, gen_stair, gen_star, load_scene, BBox, EvalReport, Scene, SceneFormat};
use progx::geometry::{DataKind, ModelClass};
use progx::neighborhood::NeighborhoodMode;
use progx::progx::{run, ProgXConfig};
use progx::report::{format_significant, render_svg, ResultDoc};

#[derive(Parser)]
#[command(name = "progx", version, about = "Progressive multi-model geometric fitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene with ground truth.
    Synth(SynthArgs),
    /// Fit instances to a scene file and write the result document.
    Fit(FitArgs),
    /// Repeat fitting on a scene or generator and tabulate the scores.
    Bench(BenchArgs),
    /// Score a result document against a scene's ground truth.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Star,
    Stair,
    Homography,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Clone)]
struct GenArgs {
    #[arg(long = "gen", value_enum, default_value = "star")]
    generator: Generator,
    /// Number of lines (star, stair) or planes (homography).
    #[arg(long, visible_alias = "planes", default_value_t = 5)]
    lines: usize,
    /// Points per line or plane.
    #[arg(long, default_value_t = 250)]
    points: usize,
    /// Standard deviation of the inlier noise.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Fraction ν of all points that are outliers.
    #[arg(long, default_value_t = 0.5)]
    outlier_ratio: f64,
    /// Bounding box of line scenes: min_x min_y max_x max_y.
    #[arg(long, num_args = 4, value_names = ["MIN_X", "MIN_Y", "MAX_X", "MAX_Y"])]
    bbox: Option<Vec<f64>>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SynthArgs {
    #[command(flatten)]
    generator: GenArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct FitFlags {
    /// Inlier-outlier threshold ε.
    #[arg(long)]
    threshold: Option<f64>,
    /// Confidence µ of the termination bound.
    #[arg(long)]
    confidence: Option<f64>,
    /// Minimal Jaccard distance for a proposal to pass validation.
    #[arg(long)]
    jaccard_epsilon: Option<f64>,
    /// Potts weight per neighborhood edge.
    #[arg(long)]
    spatial_weight: Option<f64>,
    /// Cost per instance in the labeling energy.
    #[arg(long)]
    label_cost: Option<f64>,
    /// Minimum instance support (default: minimal sample size + 1).
    #[arg(long)]
    min_support: Option<usize>,
    /// Comma-separated model classes, proposed in round-robin order.
    #[arg(long, value_delimiter = ',', default_value = "line", value_parser = parse_class)]
    classes: Vec<ModelClass>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_proposals: Option<usize>,
    /// Grid neighborhood cell size (default: bounding-box diagonal / 20).
    #[arg(long, conflicts_with = "knn")]
    cell_size: Option<f64>,
    /// Use a symmetrized k-nearest-neighbor graph instead of a grid.
    #[arg(long)]
    knn: Option<usize>,
    /// Scene file layout (default: inferred from the classes).
    #[arg(long, value_parser = parse_scene_format)]
    scene_format: Option<SceneFormat>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct FitArgs {
    scene: PathBuf,
    #[command(flatten)]
    flags: FitFlags,
    /// Record the instances and labels of every iteration, not just a summary.
    #[arg(long)]
    snapshots: bool,
    /// Write an SVG scatter plot of the final labeling.
    #[arg(long, value_name = "SVG")]
    plot: Option<PathBuf>,
    /// `json` writes the result document, `csv` one label per point.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct BenchArgs {
    /// Scene file; a fresh generated scene per run when omitted.
    scene: Option<PathBuf>,
    #[command(flatten)]
    generator: GenArgs,
    #[command(flatten)]
    flags: FitFlags,
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct EvalArgs {
    /// Result document written by `fit`.
    result: PathBuf,
    /// Scene file carrying the ground-truth column.
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, value_parser = parse_scene_format)]
    scene_format: Option<SceneFormat>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn parse_class(s: &str) -> Result<ModelClass, String> {
    match s.parse::<ModelClass>() {
        Ok(ModelClass::Outlier) => Err("the outlier class cannot be fitted".into()),
        Ok(c) => Ok(c),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_scene_format(s: &str) -> Result<SceneFormat, String> {
    s.parse().map_err(|e: progx::Error| e.to_string())
}

enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }
}

fn data(e: progx::Error) -> Failure {
    Failure::Data(e.to_string())
}

fn usage(e: progx::Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn config_from(flags: &FitFlags) -> Result<ProgXConfig, Failure> {
    let d = ProgXConfig::default();
    let neighborhood = match (flags.cell_size, flags.knn) {
        (Some(cell_size), _) => Some(NeighborhoodMode::Grid { cell_size }),
        (None, Some(k)) => Some(NeighborhoodMode::Knn { k }),
        (None, None) => None,
    };
    let cfg = ProgXConfig {
        threshold: flags.threshold.unwrap_or(d.threshold),
        confidence: flags.confidence.unwrap_or(d.confidence),
        jaccard_epsilon: flags.jaccard_epsilon.unwrap_or(d.jaccard_epsilon),
        spatial_weight: flags.spatial_weight.unwrap_or(d.spatial_weight),
        label_cost: flags.label_cost.unwrap_or(d.label_cost),
        min_support: flags.min_support.or(d.min_support),
        classes: flags.classes.clone(),
        seed: flags.seed,
        max_proposals: flags.max_proposals.unwrap_or(d.max_proposals),
        neighborhood,
        ..d
    };
    cfg.validate().map_err(usage)?;
    if let Some(NeighborhoodMode::Grid { cell_size }) = cfg.neighborhood {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Failure::Usage("cell size must be positive".into()));
        }
    }
    if cfg.neighborhood == Some(NeighborhoodMode::Knn { k: 0 }) {
        return Err(Failure::Usage("k must be positive".into()));
    }
    Ok(cfg)
}

fn scene_format_for(explicit: Option<SceneFormat>, classes: &[ModelClass]) -> Result<SceneFormat, Failure> {
    if let Some(f) = explicit {
        return Ok(f);
    }
    let kinds: Vec<DataKind> = classes.iter().map(|c| c.data_kind()).collect();
    let format = |k: DataKind| match k {
        DataKind::Point2 => Some(SceneFormat::Xy),
        DataKind::Point3 => Some(SceneFormat::Xyz),
        DataKind::Correspondence => Some(SceneFormat::Corr),
        DataKind::Any => None,
    };
    match kinds.first().and_then(|&k| format(k)) {
        Some(f) if kinds.iter().all(|&k| format(k) == Some(f)) => Ok(f),
        _ => Err(Failure::Usage("cannot infer the scene format from the classes; pass --scene-format".into())),
    }
}

fn load(path: &Path, format: SceneFormat) -> Result<Scene, Failure> {
    load_scene(path, format).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn generate(g: &GenArgs, seed: u64) -> Result<Scene, Failure> {
    let bbox = match &g.bbox {
        Some(b) => BBox::new(b[0], b[1], b[2], b[3]),
        None => BBox::default(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = match g.generator {
        Generator::Star => gen_star(g.lines, g.points, g.noise, g.outlier_ratio, bbox, &mut rng),
        Generator::Stair => gen_stair(g.lines, g.points, g.noise, g.outlier_ratio, bbox, &mut rng),
        Generator::Homography => gen_homographies(g.lines, g.points, g.noise, g.outlier_ratio, &mut rng).map(|h| h.scene),
    };
    let mut scene = scene.map_err(usage)?;
    scene.meta.seed = Some(seed);
    Ok(scene)
}

fn synth(args: &SynthArgs) -> Result<(), Failure> {
    let scene = generate(&args.generator, args.seed)?;
    emit(args.out.as_deref(), &format_scene(&scene))
}

fn fit(args: &FitArgs) -> Result<(), Failure> {
    let cfg = config_from(&args.flags)?;
    let format = scene_format_for(args.flags.scene_format, &cfg.classes)?;
    let scene = load(&args.scene, format)?;
    let result = run(&scene.data, &cfg).map_err(data)?;
    let doc = ResultDoc::new(&result, &cfg, args.snapshots);
    if let Some(path) = &args.plot {
        let svg = render_svg(&scene.data, &doc.labels, 800.0).map_err(data)?;
        emit(Some(path), &svg)?;
    }
    let text = match args.format {
        Format::Json => doc.to_json(),
        Format::Csv => doc.labels_csv(),
    };
    emit(args.out.as_deref(), &text)
}

#[derive(Serialize)]
struct BenchRow {
    run: usize,
    seed: u64,
    #[serde(flatten)]
    report: EvalReport,
}

/// Per-run seed: a SplitMix64 step away from the base seed.
fn run_seed(base: u64, run: usize) -> u64 {
    let mut z = base.wrapping_add((run as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn bench(args: &BenchArgs) -> Result<(), Failure> {
    if args.runs == 0 {
        return Err(Failure::Usage("--runs must be positive".into()));
    }
    let base = config_from(&args.flags)?;
    let fixed = match &args.scene {
        Some(path) => {
            let format = scene_format_for(args.flags.scene_format, &base.classes)?;
            let scene = load(path, format)?;
            if scene.ground_truth.is_none() {
                return Err(Failure::Data(format!("{}: no ground-truth column", path.display())));
            }
            Some(scene)
        }
        None => None,
    };
    let rows: Vec<Result<BenchRow, Failure>> = (0..args.runs)
        .into_par_iter()
        .map(|r| {
            let seed = run_seed(base.seed, r);
            let generated;
            let scene = match &fixed {
                Some(s) => s,
                None => {
                    generated = generate(&args.generator, seed)?;
                    &generated
                }
            };
            let cfg = ProgXConfig { seed, ..base.clone() };
            let result = run(&scene.data, &cfg).map_err(data)?;
            let gt = scene.ground_truth.as_ref().expect("checked above");
            let report = evaluate(&result.labeling.assignment, result.instances.len(), gt, result.elapsed_ms).map_err(data)?;
            Ok(BenchRow { run: r, seed, report })
        })
        .collect();
    let rows: Vec<BenchRow> = rows.into_iter().collect::<Result<_, _>>()?;
    let text = match args.format {
        Format::Csv => {
            let mut s = String::from("run,seed,me,fn,fp,ms\n");
            for row in &rows {
                let e = &row.report;
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    row.run,
                    row.seed,
                    format_significant(e.misclassification_error),
                    e.false_negatives,
                    e.false_positives,
                    format_significant(e.runtime_ms)
                );
            }
            s
        }
        Format::Json => serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n",
    };
    emit(args.out.as_deref(), &text)
}

fn eval(args: &EvalArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.result).map_err(|e| Failure::Data(format!("{}: {e}", args.result.display())))?;
    let doc = ResultDoc::from_json(&text).map_err(data)?;
    let format = scene_format_for(args.scene_format, &doc.config.classes)?;
    let scene = load(&args.scene, format)?;
    let gt = scene.ground_truth.ok_or_else(|| Failure::Data(format!("{}: no ground-truth column", args.scene.display())))?;
    let report = evaluate(&doc.labels, doc.instances.len(), &gt, doc.timing_ms).map_err(data)?;
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        Format::Csv => format!(
            "me,fn,fp,delta,ms\n{},{},{},{},{}\n",
            format_significant(report.misclassification_error),
            report.false_negatives,
            report.false_positives,
            report.instance_delta,
            format_significant(report.runtime_ms)
        ),
    };
    emit(args.out.as_deref(), &text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Fit(a) => fit(a),
        Command::Bench(a) => bench(a),
        Command::Eval(a) => eval(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(msg) | Failure::Data(msg)) = &f;
            eprintln!("progx: {msg}");
            ExitCode::from(f.code())
        }
    }
}
