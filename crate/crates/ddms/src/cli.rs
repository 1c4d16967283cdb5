//! Command line configuration and verbs.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dms_core::gradient::compute_gradient;
use dms_core::oracle::reduce_matrix;
use dms_core::pairing::pair_extrema_saddles;
use dms_core::pipeline::{assemble, max_node_age, max_triplets, min_triplets, StagePairs};
use dms_core::propagation::pair_saddles;
use dms_core::{GlobalOrder, GridShape, PersistenceDiagram, ProcessingOrder, SimplexId, TriangulatedGrid};
use serde::Serialize;

use crate::distributed::{compute_diagram_distributed, DistConfig, Mode};
use crate::fields::{generate, FieldKind};
use crate::io::{self, ScalarType};
use crate::transport::MessageKind;
use crate::Error;

/// Environment variable holding the default delivery seed.
pub const SEED_ENV: &str = "DDMS_SEED";

#[derive(Parser, Debug)]
#[command(name = "ddms", version, about = "Persistence diagrams of scalar fields on regular grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute a diagram and write it.
    Run(RunArgs),
    /// Compute with several engines and compare; exit status 2 on mismatch.
    Diff(DiffArgs),
    /// Compute the reference diagram by boundary matrix reduction.
    Oracle(OracleArgs),
    /// Write a synthetic field as a raw file.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Sequential pipeline.
    Dms,
    /// Distributed pipeline over simulated ranks.
    Ddms,
    /// Boundary matrix reduction.
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

fn parse_dims(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<usize> = s
        .split([',', 'x'])
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x] => Ok([x, 1, 1]),
        [x, y] => Ok([x, y, 1]),
        [x, y, z] => Ok([x, y, z]),
        _ => Err("expected one to three sizes, e.g. 64,64,32".into()),
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

/// Where the field comes from.
#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Vertex counts along x, y, z.
    #[arg(long, value_parser = parse_dims)]
    pub dims: [usize; 3],
    /// Raw little-endian volume, x fastest.
    #[arg(long, conflicts_with = "field")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "f32")]
    pub dtype: ScalarType,
    /// Synthetic field: elevation, wavelet, random:SEED or two-bump.
    #[arg(long)]
    pub field: Option<FieldKind>,
}

/// Settings of the distributed engine.
#[derive(Args, Debug, Clone)]
pub struct DistArgs {
    /// Number of ranks; the split is derived when `--splits` is absent.
    #[arg(long)]
    pub ranks: Option<usize>,
    /// Parts along x, y, z.
    #[arg(long, value_parser = parse_dims)]
    pub splits: Option<[usize; 3]>,
    /// Worker threads per rank.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// round or eager.
    #[arg(long, value_parser = parse_mode, default_value = "round")]
    pub mode: Mode,
    /// Seed of the message delivery interleaving.
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "on")]
    pub anticipation: Switch,
    /// Anticipation budget as a fraction of the block's triangles.
    #[arg(long, default_value_t = 0.0001)]
    pub anticipation_ratio: f64,
    /// Absolute anticipation budget, overriding the ratio.
    #[arg(long)]
    pub anticipation_budget: Option<usize>,
    /// Eager send threshold as a fraction of unpaired 2-saddles.
    #[arg(long, default_value_t = 0.0001)]
    pub threshold_ratio: f64,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Diagram file; standard output when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Write run statistics as JSON here.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "dms")]
    pub engine: Engine,
    #[command(flatten)]
    pub dist: DistArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct DiffArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Engines to compare.
    #[arg(value_enum, num_args = 1.., default_values = ["dms", "ddms", "oracle"])]
    pub engines: Vec<Engine>,
    #[command(flatten)]
    pub dist: DistArgs,
}

#[derive(Args, Debug, Clone)]
pub struct OracleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct GenerateArgs {
    #[arg(long, value_parser = parse_dims)]
    pub dims: [usize; 3],
    #[arg(long)]
    pub field: FieldKind,
    #[arg(long, value_enum, default_value = "f32")]
    pub dtype: ScalarType,
    #[arg(long, short)]
    pub output: PathBuf,
}

/// Everything a run needs, independent of how it was specified.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub shape: GridShape,
    pub values: Vec<f64>,
    pub engine: Engine,
    pub dist: DistConfig,
}

impl InputArgs {
    pub fn load(&self) -> Result<(GridShape, Vec<f64>), Error> {
        let shape = GridShape { dims: self.dims };
        let values = match (&self.input, self.field) {
            (Some(path), _) => io::load_field(path, shape, self.dtype)?,
            (None, Some(kind)) => generate(kind, shape),
            (None, None) => return Err(Error::Config("either --input or --field is required".into())),
        };
        Ok((shape, values))
    }
}

impl DistArgs {
    pub fn config(&self, shape: GridShape) -> Result<DistConfig, Error> {
        let splits = match (self.splits, self.ranks) {
            (Some(s), Some(r)) if s.iter().product::<usize>() != r => {
                return Err(Error::Config(format!("splits {s:?} do not make {r} ranks")))
            }
            (Some(s), _) => s,
            (None, Some(r)) => default_splits(r, shape)?,
            (None, None) => [1, 1, 1],
        };
        Ok(DistConfig {
            splits,
            mode: self.mode,
            seed: self.seed,
            workers: self.workers.max(1),
            anticipation: self.anticipation == Switch::On,
            anticipation_ratio: self.anticipation_ratio,
            anticipation_budget: self.anticipation_budget,
            threshold_ratio: self.threshold_ratio,
            ..DistConfig::default()
        })
    }
}

/// Splits `ranks` over the axes, always cutting the axis with the most cells
/// per part by the smallest remaining prime factor.
pub fn default_splits(ranks: usize, shape: GridShape) -> Result<[usize; 3], Error> {
    if ranks == 0 {
        return Err(Error::Config("at least one rank is needed".into()));
    }
    let mut splits = [1usize; 3];
    let mut rest = ranks;
    let mut p = 2;
    while rest > 1 {
        while !rest.is_multiple_of(p) {
            p += 1;
        }
        let axis = (0..3)
            .filter(|&a| (shape.dims[a] - 1) >= splits[a] * p)
            .max_by_key(|&a| ((shape.dims[a] - 1) / splits[a], std::cmp::Reverse(a)))
            .ok_or_else(|| Error::Config(format!("{ranks} ranks do not fit the grid {:?}", shape.dims)))?;
        splits[axis] *= p;
        rest /= p;
    }
    Ok(splits)
}

/// Statistics of one run.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunStats {
    pub engine: Option<Engine>,
    pub ranks: usize,
    /// Wall time per step, in seconds; summed over ranks' maxima for the
    /// distributed engine.
    pub timings: Vec<(String, f64)>,
    pub messages: Vec<(String, u64)>,
    pub rounds: Vec<(String, u64)>,
    pub tokens_sent: u64,
    pub recomputes: u64,
    /// Per rank.
    pub peak_simplex_state: Vec<usize>,
    pub finite_pairs: [usize; 4],
    pub essential: [usize; 4],
}

pub struct RunReport {
    pub diagram: PersistenceDiagram,
    pub stats: RunStats,
}

/// Sequential pipeline with per-step timings.
pub fn run_dms(shape: GridShape, values: &[f64]) -> Result<RunReport, Error> {
    let mut laps: Vec<(String, f64)> = Vec::new();
    let mut at = Instant::now();
    let mut lap = |name: &str| {
        let now = Instant::now();
        laps.push((name.to_string(), (now - at).as_secs_f64()));
        at = now;
    };
    let grid = TriangulatedGrid::new(shape).map_err(dms_core::Error::from)?;
    if values.len() as u64 != shape.vertex_count() {
        return Err(dms_core::Error::FieldSize { shape, expected: shape.vertex_count(), got: values.len() }.into());
    }
    let order = GlobalOrder::sequential(values)?.order;
    lap("preconditioning");
    let grad = compute_gradient(&grid, &order, |_| true);
    lap("gradient");
    let top = grid.top_dim();
    let c1 = if top >= 1 { grad.critical(1, |_| true) } else { Vec::new() };
    let ctop = if top >= 2 { grad.critical(top - 1, |_| true) } else { Vec::new() };
    let min_t = min_triplets(&grid, &order, &grad, &c1)?;
    let max_t = if top >= 2 { max_triplets(&grid, &order, &grad, top, &ctop)? } else { Vec::new() };
    lap("extract");
    let mut pairs = StagePairs {
        min_side: pair_extrema_saddles(&min_t, |v| dms_core::order::simplex_key(&grid, &order, SimplexId::new(0, v)).0),
        ..Default::default()
    };
    lap("d0");
    if top >= 2 {
        pairs.max_side = pair_extrema_saddles(&max_t, |t| max_node_age(&grid, &order, top, t));
    }
    lap("d2");
    if top == 3 {
        let used1: std::collections::HashSet<u32> = pairs.min_side.iter().map(|p| p.0).collect();
        let used2: std::collections::HashSet<u32> = pairs.max_side.iter().map(|p| p.0).collect();
        let c1: Vec<u32> = c1.into_iter().filter(|e| !used1.contains(e)).collect();
        let c2 = grad.critical(2, |t| !used2.contains(&t));
        pairs.saddle = pair_saddles(&grid, &order, &grad, &c1, &c2, ProcessingOrder::Ascending)?.pairs;
    }
    lap("d1");
    let diagram = assemble(&grid, &order, values, &grad, &pairs);
    lap("assemble");
    Ok(RunReport { stats: RunStats { timings: laps, ranks: 1, ..Default::default() }, diagram })
}

pub fn run(cfg: &RunConfig) -> Result<RunReport, Error> {
    let mut report = match cfg.engine {
        Engine::Dms => run_dms(cfg.shape, &cfg.values)?,
        Engine::Oracle => {
            let t = Instant::now();
            let grid = TriangulatedGrid::new(cfg.shape).map_err(dms_core::Error::from)?;
            let order = GlobalOrder::sequential(&cfg.values)?.order;
            let diagram = reduce_matrix(&grid, &order, &cfg.values)?;
            let stats = RunStats { ranks: 1, timings: vec![("oracle".into(), t.elapsed().as_secs_f64())], ..Default::default() };
            RunReport { diagram, stats }
        }
        Engine::Ddms => {
            let out = compute_diagram_distributed(cfg.shape, &cfg.values, &cfg.dist)?;
            let mut stats = RunStats { ranks: out.ranks.len(), ..Default::default() };
            let mut names: Vec<&'static str> = Vec::new();
            for r in &out.ranks {
                for (n, _) in &r.stats.timings {
                    if !names.contains(n) {
                        names.push(n);
                    }
                }
            }
            // ranks run in lockstep, so a step lasts as long as its slowest rank
            for n in names {
                let slowest = out
                    .ranks
                    .iter()
                    .filter_map(|r| r.stats.timings.iter().find(|(m, _)| *m == n).map(|(_, d)| *d))
                    .max()
                    .unwrap_or(Duration::ZERO);
                stats.timings.push((n.to_string(), slowest.as_secs_f64()));
            }
            let t = out.transport();
            stats.messages = MessageKind::ALL.iter().map(|&k| (k.name().to_string(), t.sent_of(k))).collect();
            let r0 = out.ranks[0].stats.rounds;
            stats.rounds = ["tracing", "ownership", "d0_d2", "d1"].iter().zip(r0).map(|(n, r)| (n.to_string(), r)).collect();
            stats.tokens_sent = out.ranks.iter().map(|r| r.stats.tokens_sent).sum();
            stats.recomputes = out.ranks.iter().map(|r| r.stats.recomputes).sum();
            stats.peak_simplex_state = out.ranks.iter().map(|r| r.stats.peak_simplex_state).collect();
            RunReport { diagram: out.diagram, stats }
        }
    };
    report.stats.engine = Some(cfg.engine);
    report.stats.finite_pairs = report.diagram.finite_counts();
    report.stats.essential = report.diagram.essential_counts();
    Ok(report)
}

fn render(d: &PersistenceDiagram, format: Format) -> String {
    match format {
        Format::Csv => io::diagram_csv(d),
        Format::Json => io::diagram_json(d) + "\n",
    }
}

fn write_out(out: &OutputArgs, report: &RunReport) -> Result<(), Error> {
    let text = render(&report.diagram, out.format);
    match &out.output {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(p.display().to_string(), e))?,
        None => print!("{text}"),
    }
    if let Some(p) = &out.stats {
        let json = serde_json::to_string_pretty(&report.stats).expect("stats serialize");
        std::fs::write(p, json + "\n").map_err(|e| Error::Io(p.display().to_string(), e))?;
    }
    Ok(())
}

type Signature = Vec<(u8, u32, Option<u32>)>;

/// Outcome of a verb, mapped to the exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Mismatch,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Ok => 0,
            Outcome::Mismatch => 2,
        }
    }
}

/// Executes a parsed command line. Messages for the user go to `log`.
pub fn execute(cli: Cli, log: &mut dyn std::io::Write) -> Result<Outcome, Error> {
    match cli.command {
        Command::Run(a) => {
            let (shape, values) = a.input.load()?;
            let cfg = RunConfig { shape, values, engine: a.engine, dist: a.dist.config(shape)? };
            let report = run(&cfg)?;
            write_out(&a.output, &report)?;
            Ok(Outcome::Ok)
        }
        Command::Oracle(a) => {
            let (shape, values) = a.input.load()?;
            let cfg = RunConfig { shape, values, engine: Engine::Oracle, dist: DistConfig::default() };
            write_out(&a.output, &run(&cfg)?)?;
            Ok(Outcome::Ok)
        }
        Command::Diff(a) => {
            let (shape, values) = a.input.load()?;
            let dist = a.dist.config(shape)?;
            let mut reference: Option<(Engine, Signature)> = None;
            let mut same = true;
            for &engine in &a.engines {
                let cfg = RunConfig { shape, values: values.clone(), engine, dist: dist.clone() };
                let sig = run(&cfg)?.diagram.signature();
                match &reference {
                    None => reference = Some((engine, sig)),
                    Some((first, want)) => {
                        if *want != sig {
                            same = false;
                            let _ = writeln!(log, "{engine:?} differs from {first:?}");
                        }
                    }
                }
            }
            let _ = writeln!(log, "{}", if same { "MATCH" } else { "MISMATCH" });
            Ok(if same { Outcome::Ok } else { Outcome::Mismatch })
        }
        Command::Generate(a) => {
            let values = generate(a.field, GridShape { dims: a.dims });
            io::save_field(&a.output, &values, a.dtype)?;
            Ok(Outcome::Ok)
        }
    }
}
