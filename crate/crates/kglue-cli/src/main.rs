//! Command-line front end: build a built-in atlas (or load its parameters
//! from a TOML config), run the requested pipeline stage, and emit a report.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::Rational64;
use serde::Deserialize;

use kglue::atlas::{validate_atlas, ValidateOpts};
use kglue::circles::TwoCircles;
use kglue::collar::{build_collars, CollarOpts};
use kglue::euler::{euler_number, model_by_name, EulerOpts};
use kglue::examples::{football, redundant, tangent_sphere};
use kglue::gluing::{build_category, GluingOpts};
use kglue::reduction::{build_reduction, ReductionOpts};
use kglue::report::{CheckResult, Report};
use kglue::vfc::{count, CountOpts};
use kglue::{Atlas, KgError, Mutation};

#[derive(Parser)]
#[command(name = "kglue", version, about = "Atlas validation, gluing, and virtual counts")]
struct Cli {
  #[command(subcommand)]
  command: Command,
}

#[derive(Subcommand)]
enum Command {
  /// Check the atlas axioms numerically
  Validate(StageArgs),
  /// Build the reduction (shrunken domains, cutoffs, thickening radii)
  Reduce(StageArgs),
  /// Build collars and the glued space, then check its consistency
  Glue(StageArgs),
  /// Branch weights at sample points (two-circles) or at the counted zeros
  Weights(WeightsArgs),
  /// Run the full pipeline and count the zeros of the perturbed section
  Count(StageArgs),
  /// Euler number of a bundle model via one-chart zero counting
  Euler(EulerArgs),
  /// Run a named example end to end and compare against its expected value
  Example(StageArgs),
}

#[derive(Args, Clone)]
struct SourceArgs {
  /// Built-in example: tangent-sphere, football, redundant, two-circles
  #[arg(long)]
  example: Option<String>,
  /// TOML config file describing the run (flags override its fields)
  #[arg(long)]
  file: Option<PathBuf>,
  /// First pole order (football)
  #[arg(long)]
  p: Option<usize>,
  /// Second pole order (football)
  #[arg(long)]
  q: Option<usize>,
  /// Deliberate defect: none, broken-cocycle, broken-section-compat,
  /// oversized-epsilon, broken-tau-inverse
  #[arg(long)]
  mutation: Option<String>,
}

#[derive(Args, Clone)]
struct KnobArgs {
  /// Residual tolerance for the stage checks
  #[arg(long)]
  tol: Option<f64>,
  /// Zero-scan grid resolution
  #[arg(long)]
  grid: Option<usize>,
  /// Shrink factor for the thickening-radius scan, in (0,1)
  #[arg(long)]
  shrink_factor: Option<f64>,
  /// Safety fraction of the collar width the radii must stay under
  #[arg(long)]
  eps_safety: Option<f64>,
  /// Sampling seed
  #[arg(long)]
  seed: Option<u64>,
  /// Perturbation magnitude for the counting stage
  #[arg(long)]
  magnitude: Option<f64>,
  /// Write the report to this path as well
  #[arg(long)]
  out: Option<PathBuf>,
  /// Report format on stdout (and for --out)
  #[arg(long, value_enum, default_value_t = Format::Text)]
  format: Format,
}

#[derive(Args, Clone)]
struct StageArgs {
  #[command(flatten)]
  source: SourceArgs,
  #[command(flatten)]
  knobs: KnobArgs,
}

#[derive(Args, Clone)]
struct WeightsArgs {
  #[command(flatten)]
  source: SourceArgs,
  #[command(flatten)]
  knobs: KnobArgs,
  /// Number of sample points per region (two-circles)
  #[arg(long, default_value_t = 10)]
  points: usize,
}

#[derive(Args, Clone)]
struct EulerArgs {
  /// Bundle model: tangent-sphere, trivial-torus, one-zero-disc
  #[arg(long)]
  model: String,
  #[command(flatten)]
  knobs: KnobArgs,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
  Text,
  Json,
}

/// The subset of a run that can live in a TOML config file.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
  example: Option<String>,
  p: Option<usize>,
  q: Option<usize>,
  mutation: Option<String>,
  tol: Option<f64>,
  grid: Option<usize>,
  shrink_factor: Option<f64>,
  eps_safety: Option<f64>,
  seed: Option<u64>,
  magnitude: Option<f64>,
}

/// Fully resolved run parameters: config file first, flags override.
struct Run {
  example: String,
  p: usize,
  q: usize,
  mutation: Mutation,
  tol: Option<f64>,
  grid: Option<usize>,
  shrink_factor: Option<f64>,
  eps_safety: Option<f64>,
  seed: Option<u64>,
  magnitude: Option<f64>,
}

fn parse_mutation(s: &str) -> Result<Mutation, KgError> {
  match s {
    "none" => Ok(Mutation::None),
    "broken-cocycle" => Ok(Mutation::BrokenCocycle),
    "broken-section-compat" => Ok(Mutation::BrokenSectionCompat),
    "oversized-epsilon" => Ok(Mutation::OversizedEpsilon),
    "broken-tau-inverse" => Ok(Mutation::BrokenTauInverse),
    other => Err(KgError::Config(format!("unknown mutation '{other}'"))),
  }
}

fn resolve(source: &SourceArgs, knobs: &KnobArgs) -> Result<Run, KgError> {
  let file: FileConfig = match &source.file {
    Some(path) => {
      let text = std::fs::read_to_string(path)
        .map_err(|e| KgError::Config(format!("cannot read {}: {e}", path.display())))?;
      toml::from_str(&text)
        .map_err(|e| KgError::Config(format!("cannot parse {}: {e}", path.display())))?
    }
    None => FileConfig::default(),
  };
  let example = source
    .example
    .clone()
    .or(file.example)
    .ok_or_else(|| KgError::Config("no example named (use --example or --file)".into()))?;
  let mutation = match source.mutation.clone().or(file.mutation) {
    Some(m) => parse_mutation(&m)?,
    None => Mutation::None,
  };
  let run = Run {
    example,
    p: source.p.or(file.p).unwrap_or(2),
    q: source.q.or(file.q).unwrap_or(3),
    mutation,
    tol: knobs.tol.or(file.tol),
    grid: knobs.grid.or(file.grid),
    shrink_factor: knobs.shrink_factor.or(file.shrink_factor),
    eps_safety: knobs.eps_safety.or(file.eps_safety),
    seed: knobs.seed.or(file.seed),
    magnitude: knobs.magnitude.or(file.magnitude),
  };
  for v in [run.tol, run.shrink_factor, run.eps_safety, run.magnitude] {
    if v.is_some_and(|v| v <= 0.0) {
      return Err(KgError::Config("numeric knobs must be positive".into()));
    }
  }
  if run.grid.is_some_and(|g| g == 0) {
    return Err(KgError::Config("grid resolution must be positive".into()));
  }
  Ok(run)
}

fn build_atlas(run: &Run) -> Result<Atlas, KgError> {
  match run.example.as_str() {
    "tangent-sphere" => tangent_sphere(run.mutation),
    "football" => football(run.p, run.q, run.mutation),
    "redundant" => redundant(run.mutation),
    other => Err(KgError::Config(format!("unknown atlas example '{other}'"))),
  }
}

fn validate_opts(run: &Run) -> ValidateOpts {
  let mut o = ValidateOpts::default();
  if let Some(t) = run.tol {
    o.tol = t;
  }
  if let Some(s) = run.seed {
    o.seed = s;
  }
  o
}

fn reduction_opts(run: &Run) -> ReductionOpts {
  let mut o = ReductionOpts::default();
  if let Some(s) = run.seed {
    o.seed = s;
  }
  if let Some(f) = run.shrink_factor {
    o.shrink = f;
  }
  if let Some(f) = run.eps_safety {
    o.eps_safety = f;
  }
  o
}

fn count_opts(run: &Run) -> CountOpts {
  let mut o = CountOpts::default();
  if let Some(m) = run.magnitude {
    o.mag = m;
  }
  if let Some(g) = run.grid {
    o.grid = g;
  }
  if let Some(s) = run.seed {
    o.seed = s;
  }
  if let Some(t) = run.tol {
    o.tol = t;
  }
  o
}

fn emit(report: &Report, knobs: &KnobArgs) -> Result<(), KgError> {
  let body = match knobs.format {
    Format::Text => report.to_text(),
    Format::Json => {
      serde_json::to_string_pretty(report).map_err(|e| KgError::Config(e.to_string()))? + "\n"
    }
  };
  print!("{body}");
  if let Some(path) = &knobs.out {
    std::fs::write(path, &body)
      .map_err(|e| KgError::Config(format!("cannot write {}: {e}", path.display())))?;
  }
  Ok(())
}

fn validated_atlas(run: &Run) -> Result<(Atlas, Report), KgError> {
  let atlas = build_atlas(run)?;
  let report = validate_atlas(&atlas, &validate_opts(run));
  Ok((atlas, report))
}

fn stage_validate(args: &StageArgs) -> Result<Report, KgError> {
  let run = resolve(&args.source, &args.knobs)?;
  let (_, report) = validated_atlas(&run)?;
  Ok(report)
}

fn require_pass(report: &Report) -> Result<(), KgError> {
  if report.pass {
    return Ok(());
  }
  let failed: Vec<String> =
    report.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
  Err(KgError::Validation(format!("checks failed: {}", failed.join(", "))))
}

fn stage_reduce(args: &StageArgs) -> Result<Report, KgError> {
  let run = resolve(&args.source, &args.knobs)?;
  let (atlas, vrep) = validated_atlas(&run)?;
  require_pass(&vrep)?;
  let (_, report) = build_reduction(&atlas, &reduction_opts(&run))?;
  Ok(report)
}

fn stage_glue(args: &StageArgs) -> Result<Report, KgError> {
  let run = resolve(&args.source, &args.knobs)?;
  let (atlas, vrep) = validated_atlas(&run)?;
  require_pass(&vrep)?;
  let (red, _) = build_reduction(&atlas, &reduction_opts(&run))?;
  let (_, collar_rep) = build_collars(&atlas, &red, &CollarOpts::default())?;
  let cat = build_category(&atlas, &red, &GluingOpts::default())?;
  let cat_rep = cat.check_category(&GluingOpts::default())?;
  let mut checks = collar_rep.checks;
  checks.extend(cat_rep.checks);
  Ok(Report::new("glue", &atlas.name, checks))
}

fn run_count(run: &Run) -> Result<(Rational64, Report), KgError> {
  let (atlas, vrep) = validated_atlas(run)?;
  require_pass(&vrep)?;
  let (red, _) = build_reduction(&atlas, &reduction_opts(run))?;
  build_collars(&atlas, &red, &CollarOpts::default())?;
  let cat = build_category(&atlas, &red, &GluingOpts::default())?;
  count(&atlas, &red, &cat, &count_opts(run))
}

fn stage_count(args: &StageArgs) -> Result<Report, KgError> {
  let run = resolve(&args.source, &args.knobs)?;
  let (_, report) = run_count(&run)?;
  Ok(report)
}

fn stage_weights(args: &WeightsArgs) -> Result<Report, KgError> {
  let run = resolve(&args.source, &args.knobs)?;
  if run.example == "two-circles" {
    return Ok(TwoCircles::default().report(args.points));
  }
  let (_, report) = run_count(&run)?;
  Ok(Report { command: "weights".into(), ..report })
}

fn stage_euler(args: &EulerArgs) -> Result<Report, KgError> {
  let model = model_by_name(&args.model)
    .ok_or_else(|| KgError::Config(format!("unknown bundle model '{}'", args.model)))?;
  let mut opts = EulerOpts::default();
  if let Some(g) = args.knobs.grid {
    opts.grid = g;
  }
  if let Some(s) = args.knobs.seed {
    opts.seed = s;
  }
  if let Some(t) = args.knobs.tol {
    opts.tol = t;
  }
  let (_, report) = euler_number(&model, &opts)?;
  Ok(report)
}

fn expected_count(run: &Run) -> Option<Rational64> {
  match run.example.as_str() {
    "tangent-sphere" | "redundant" => Some(Rational64::new(2, 1)),
    "football" => Some(
      Rational64::new(1, run.p as i64) + Rational64::new(1, run.q as i64),
    ),
    _ => None,
  }
}

fn stage_example(args: &StageArgs) -> Result<Report, KgError> {
  let run = resolve(&args.source, &args.knobs)?;
  if run.example == "two-circles" {
    return Ok(TwoCircles::default().report(10));
  }
  if let Some(model) = model_by_name(&run.example) {
    if build_atlas(&run).is_err() {
      let (_, report) = euler_number(&model, &EulerOpts::default())?;
      return Ok(report);
    }
  }
  let expected = expected_count(&run)
    .ok_or_else(|| KgError::Config(format!("no expected value for '{}'", run.example)))?;
  let (total, report) = run_count(&run)?;
  let mut checks = report.checks;
  checks.push(
    CheckResult::new(
      "matches-expected",
      1,
      if total == expected { 0.0 } else { 1.0 },
      0.5,
    )
    .with_detail(format!("count {total}, expected {expected}")),
  );
  Ok(Report::new("example", &report.subject, checks).with_values(report.values.unwrap_or_default()))
}

fn dispatch(cli: &Cli) -> Result<(Report, KnobArgs), KgError> {
  match &cli.command {
    Command::Validate(a) => Ok((stage_validate(a)?, a.knobs.clone())),
    Command::Reduce(a) => Ok((stage_reduce(a)?, a.knobs.clone())),
    Command::Glue(a) => Ok((stage_glue(a)?, a.knobs.clone())),
    Command::Weights(a) => Ok((stage_weights(a)?, a.knobs.clone())),
    Command::Count(a) => Ok((stage_count(a)?, a.knobs.clone())),
    Command::Euler(a) => Ok((stage_euler(a)?, a.knobs.clone())),
    Command::Example(a) => Ok((stage_example(a)?, a.knobs.clone())),
  }
}

fn main() -> ExitCode {
  if let Ok(n) = std::env::var("KGLUE_THREADS") {
    if let Ok(n) = n.parse::<usize>() {
      let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
  }
  let cli = Cli::parse();
  match dispatch(&cli) {
    Ok((report, knobs)) => {
      if let Err(e) = emit(&report, &knobs) {
        eprintln!("{e}");
        return ExitCode::from(e.exit_code() as u8);
      }
      if report.pass {
        ExitCode::SUCCESS
      } else {
        // a failing report carries the exit class of its stage
        let code = match report.command.as_str() {
          "validate" => 10,
          "reduce" => 11,
          "glue" | "weights" => 12,
          _ => 13,
        };
        ExitCode::from(code)
      }
    }
    Err(e) => {
      eprintln!("{e}");
      ExitCode::from(e.exit_code() as u8)
    }
  }
}
