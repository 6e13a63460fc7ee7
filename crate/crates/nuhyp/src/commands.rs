//! Subcommands of the `nuhyp` binary. Each returns its stdout text and
//! whether every check it ran passed.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nuhyp_core::cocycle::{finite_time_exponents, periodic_exponents};
use nuhyp_core::manifolds::{
    blowup_saddles, intersection_classes, BlowupPolarMap, Figure8SubstepMap, SaddleRecord, SurfaceMap,
    TorusLinearMap,
};
use nuhyp_core::pliss::{
    pliss_report, pliss_times_bruteforce, ultimate_pliss_times, PeriodicSequence, RealSequence,
};
use nuhyp_core::systems::{CatMap, Figure8System};
use nuhyp_core::wstar::{cylinder_family, torus_fourier_family, wstar_distance_report, TestFunctionFamily};
use serde::Serialize;

use crate::config::{ExperimentConfig, FamilyName};
use crate::error::{Error, Result};
use crate::experiments;
use crate::io::{self, PhaseSpace};

#[derive(Debug, Parser)]
#[command(name = "nuhyp", version, about = "Non-uniform hyperbolicity toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pliss times of a sequence read from CSV.
    Pliss(PlissArgs),
    /// Lyapunov exponents of an orbit JSON file.
    Exponents(ExponentsArgs),
    /// Truncated weak* distance between two measure files.
    MeasureDist(MeasureDistArgs),
    /// Intersection classes of a list of saddles.
    Classes(ClassesArgs),
    /// Run one of the example experiments and write its report.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct PlissArgs {
    /// CSV of reals; every numeric field is read in order.
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.2, allow_hyphen_values = true)]
    pub c1: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub c2: f64,
    /// Bound A ≥ sup|a_i|; defaults to max(sup|a_i|, c2).
    #[arg(long)]
    pub a_bound: Option<f64>,
    /// Treat the input as one period and report ultimate Pliss times.
    #[arg(long)]
    pub periodic: bool,
    /// Cross-check against the quadratic definition.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExponentsArgs {
    /// Orbit JSON: `points`, `jacobians` (row lists) and optional `period`.
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Space {
    Torus,
    Plane,
}

#[derive(Debug, Args)]
pub struct MeasureDistArgs {
    /// Measure as CSV `weight,x,y` or JSON.
    pub first: PathBuf,
    pub second: PathBuf,
    #[arg(long, value_enum, default_value_t = Space::Torus)]
    pub space: Space,
    #[arg(long, default_value = "torus-fourier")]
    pub family: String,
    #[arg(long, default_value_t = 3)]
    pub max_freq: i32,
    /// Keep the first K functions; 0 keeps all.
    #[arg(long, default_value_t = 0)]
    pub truncation: usize,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SystemName {
    Catmap,
    Blowup,
    Figure8,
}

#[derive(Debug, Args)]
pub struct ClassesArgs {
    #[arg(long, value_enum)]
    pub system: SystemName,
    /// CSV rows `x,y,period` in working coordinates: torus `[0,1)²` for the
    /// cat map, polar `(r, θ)` for the blow-up, the cylinder with periods in
    /// substeps for the figure-8. Defaults to the fixed points of the
    /// blow-up on `C`, or the rational orbits with denominator ≤ 5.
    #[arg(long)]
    pub saddles: Option<PathBuf>,
    /// Config file for the matrix, budgets and figure-8 substeps.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `section.key=value` overrides.
    #[arg(long = "set")]
    pub overrides: Vec<String>,
    /// Arclength budget; defaults to the config value.
    #[arg(long)]
    pub arclength: Option<f64>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExperimentName {
    Catmap,
    Blowup,
    Figure8,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub name: ExperimentName,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "set")]
    pub overrides: Vec<String>,
    /// Output directory; overrides `output_dir` of the config.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

/// What a command prints and whether its checks passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub success: bool,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Pliss(a) => cmd_pliss(&a),
        Command::Exponents(a) => cmd_exponents(&a),
        Command::MeasureDist(a) => cmd_measure_dist(&a),
        Command::Classes(a) => cmd_classes(&a),
        Command::Experiment(a) => cmd_experiment(&a),
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>, success: bool) -> Result<Outcome> {
    let text = io::to_json(value);
    if let Some(path) = out {
        io::write_text(path, &text)?;
    }
    Ok(Outcome { stdout: text, success })
}

#[derive(Debug, Serialize)]
struct PlissOutput {
    n: usize,
    c1: f64,
    c2: f64,
    a_bound: f64,
    pliss_times: Vec<usize>,
    count: usize,
    count_from_two: usize,
    theta_bound: f64,
    guaranteed: f64,
    hypothesis_holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    ultimate_times: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<String>,
}

pub fn cmd_pliss(args: &PlissArgs) -> Result<Outcome> {
    let values = io::read_sequence(&args.input)?;
    let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bound = args.a_bound.unwrap_or(sup.max(args.c2));
    let seq = RealSequence::with_bound(values.clone(), bound)?;
    let report = pliss_report(&seq, &args.c1, &args.c2)?;
    let ultimate = if args.periodic {
        Some(ultimate_pliss_times(&PeriodicSequence::from_values(values.clone())?, &args.c1))
    } else {
        None
    };
    let oracle = args.verify.then(|| {
        let mut ok = pliss_times_bruteforce(&seq, &args.c1) == report.pliss_times;
        if let Some(u) = &ultimate {
            let period = values.len();
            let unrolled = RealSequence::new(values.repeat(3)).expect("nonempty");
            let times = pliss_times_bruteforce(&unrolled, &args.c1);
            let expected: Vec<usize> = (1..=period)
                .filter(|i| (0..3).all(|k| times.binary_search(&(i + k * period)).is_ok()))
                .collect();
            ok &= *u == expected;
        }
        if ok { "match" } else { "mismatch" }.to_string()
    });
    let success = oracle.as_deref() != Some("mismatch");
    let out = PlissOutput {
        n: seq.len(),
        c1: args.c1,
        c2: args.c2,
        a_bound: bound,
        pliss_times: report.pliss_times,
        count: report.count,
        count_from_two: report.count_from_two,
        theta_bound: report.theta_bound,
        guaranteed: report.guaranteed,
        hypothesis_holds: report.hypothesis_holds,
        ultimate_times: ultimate,
        oracle,
    };
    emit(&out, args.out.as_deref(), success)
}

#[derive(Debug, Serialize)]
struct ExponentsOutput {
    dim: usize,
    len: usize,
    period: Option<usize>,
    method: String,
    exponents: Vec<f64>,
    warning: Option<String>,
}

pub fn cmd_exponents(args: &ExponentsArgs) -> Result<Outcome> {
    let orbit = io::read_orbit(&args.input)?;
    let out = if orbit.is_periodic() {
        let r = periodic_exponents(&orbit)?;
        ExponentsOutput {
            dim: orbit.dim(),
            len: orbit.len(),
            period: orbit.period(),
            method: format!("{:?}", r.method),
            exponents: r.exponents,
            warning: r.warning,
        }
    } else {
        ExponentsOutput {
            dim: orbit.dim(),
            len: orbit.len(),
            period: None,
            method: "finite-time QR".into(),
            exponents: finite_time_exponents(&orbit)?,
            warning: None,
        }
    };
    emit(&out, args.out.as_deref(), true)
}

#[derive(Debug, Serialize)]
struct DistanceOutput {
    family: String,
    truncation: usize,
    tail_bound: f64,
    distance: f64,
}

fn family_by_name(name: &str, max_freq: i32) -> Result<TestFunctionFamily<[f64; 2]>> {
    let name: FamilyName = serde_json::from_value(serde_json::Value::String(name.into()))
        .map_err(|_| Error::Config(format!("unknown family `{}` (torus-fourier, cylinder)", name)))?;
    Ok(match name {
        FamilyName::TorusFourier => torus_fourier_family(max_freq),
        FamilyName::Cylinder => cylinder_family(nuhyp_core::wstar::CylinderFamilyParams {
            max_freq,
            ..Default::default()
        }),
    })
}

pub fn cmd_measure_dist(args: &MeasureDistArgs) -> Result<Outcome> {
    let space = match args.space {
        Space::Torus => PhaseSpace::Torus,
        Space::Plane => PhaseSpace::Plane,
    };
    let a = io::read_measure(&args.first, space)?;
    let b = io::read_measure(&args.second, space)?;
    let mut family = family_by_name(&args.family, args.max_freq)?;
    if args.truncation > 0 {
        family = family.truncated(args.truncation)?;
    }
    let r = wstar_distance_report(&a, &b, &family);
    let out = DistanceOutput {
        family: family.name().into(),
        truncation: family.truncation(),
        tail_bound: family.tail_bound(),
        distance: r.distance,
    };
    emit(&out, args.out.as_deref(), true)
}

fn read_saddles(map: &dyn SurfaceMap, path: &Path) -> Result<Vec<SaddleRecord>> {
    io::read_numeric_rows(path)?
        .into_iter()
        .map(|(line, row)| {
            let parse_err = |message: String| Error::Parse {
                path: path.into(),
                line,
                message,
            };
            let [x, y, period] = row[..] else {
                return Err(parse_err(format!("expected 3 columns (x, y, period), found {}", row.len())));
            };
            if !(period >= 1.0 && period.fract() == 0.0) {
                return Err(parse_err(format!("period {} is not a positive integer", period)));
            }
            SaddleRecord::new(map, [x, y], period as usize).map_err(|e| parse_err(e.to_string()))
        })
        .collect()
}

pub fn cmd_classes(args: &ClassesArgs) -> Result<Outcome> {
    let cfg = ExperimentConfig::load(args.config.as_deref(), &args.overrides)?;
    let params = cfg.budgets.relation(args.arclength.unwrap_or(cfg.budgets.arclength));
    let m = CatMap::new(cfg.catmap.matrix)?;
    let part = match args.system {
        SystemName::Catmap => {
            let map = TorusLinearMap::new(&m);
            let saddles = match &args.saddles {
                Some(p) => read_saddles(&map, p)?,
                None => experiments::distinct_cat_orbits(&m, cfg.catmap.classes_max_q)?
                    .iter()
                    .map(|o| SaddleRecord::new(&map, o.representative.to_f64(), o.period))
                    .collect::<nuhyp_core::Result<_>>()?,
            };
            intersection_classes(&map, saddles, &params)?
        }
        SystemName::Blowup => {
            let map = BlowupPolarMap::new(&m)?;
            let saddles = match &args.saddles {
                Some(p) => read_saddles(&map, p)?,
                None => {
                    let (a, b) = blowup_saddles(&map, &m)?;
                    vec![a, b]
                }
            };
            intersection_classes(&map, saddles, &params)?
        }
        SystemName::Figure8 => {
            let map = Figure8SubstepMap::new(Figure8System::new(cfg.figure8.substeps)?);
            let saddles = match &args.saddles {
                Some(p) => read_saddles(&map, p)?,
                None => [nuhyp_core::systems::FIGURE8_P1, nuhyp_core::systems::FIGURE8_P2]
                    .into_iter()
                    .map(|p| SaddleRecord::new(&map, p, 1))
                    .collect::<nuhyp_core::Result<_>>()?,
            };
            intersection_classes(&map, saddles, &params)?
        }
    };
    emit(&part, args.out.as_deref(), true)
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<Outcome> {
    let mut cfg: ExperimentConfig = ExperimentConfig::load(args.config.as_deref(), &args.overrides)?;
    if let Some(dir) = &args.out {
        cfg.output_dir = dir.clone();
    }
    let name = match args.name {
        ExperimentName::Catmap => "catmap",
        ExperimentName::Blowup => "blowup",
        ExperimentName::Figure8 => "figure8",
    };
    let report = experiments::run(name, &cfg)?;
    let written = report.write(&cfg.output_dir)?;
    io::write_text(&cfg.output_dir.join(format!("{}_config.toml", name)), &cfg.to_toml())?;
    let mut text = String::new();
    for c in &report.checks {
        let value = c.value.map_or(String::new(), |v| format!(" = {:e}", v));
        text += &format!(
            "{} {}{} ({}){}\n",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            value,
            c.threshold,
            if c.detail.is_empty() { String::new() } else { format!(" [{}]", c.detail) }
        );
    }
    for p in written {
        text += &format!("wrote {}\n", p.display());
    }
    Ok(Outcome {
        stdout: text,
        success: report.passed,
    })
}
