//! Subcommands of the `modspace` binary.
//!
//! Every command returns whether its checks passed; the binary maps that
//! to exit code 0 or 2 and errors to exit code 1.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use modspace_core::alberti::{
    curves_to_alberti, fubini_partition, fubini_representation, validate_representation, Cone, Orientation,
    Partition, AXIS_CONE_COS,
};
use modspace_core::curves::{boundary_sides, crossing_family, CrossingStrategy};
use modspace_core::io::{
    certificate_from_json, family_from_json, family_to_json, representation_to_json, space_from_json, space_to_json,
};
use modspace_core::metric::{MetricGraph, PointCloud};
use modspace_core::modulus::{solve_modulus, verify_duality, FamilySpec, SolveOptions};
use modspace_core::spaces::{grid_square, heisenberg_lattice, sierpinski_carpet, slit_carpet_level, Generator};
use modspace_core::splitting::{factor_product, tangent_sequence};
use modspace_core::{ModspaceError, Result};

use crate::plot::{line_chart, sweep_csv};
use crate::scenarios::{crossing_spec, slit_vertical_sweep, FamilyKind, HeisenbergScenario, ScenarioFile};

#[derive(Parser, Debug)]
#[command(name = "modspace", version, about = "Discrete modulus, Alberti representations and tangent tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a space: grid, carpet, slit carpet or Heisenberg lattice.
    Gen(GenArgs),
    /// Build an explicit crossing family on a space.
    Family(FamilyArgs),
    /// Solve for the p-modulus and write its certificate.
    Modulus(ModulusArgs),
    /// Re-check the duality identities of a certificate.
    DualityCheck(DualityArgs),
    /// Build and validate Alberti representations.
    Alberti(AlbertiArgs),
    /// Heisenberg group law, geodesic and representation checks.
    Heis(HeisArgs),
    /// Rescale a cloud about a basepoint at decreasing scales.
    Blowup(BlowupArgs),
    /// Test whether a cloud splits off the given directions.
    Split(SplitArgs),
    /// Run a scenario and write its report.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(subcommand)]
    pub space: GenSpace,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum GenSpace {
    Grid {
        #[arg(long)]
        n: usize,
    },
    Carpet {
        #[arg(long, default_value_t = 3)]
        p: usize,
        #[arg(long)]
        k: u32,
    },
    Slit {
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// Also write the slit list to this file.
        #[arg(long)]
        slits: Option<PathBuf>,
    },
    Heis {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum StrategyArg {
    AllSimple,
    ShortestK,
    Monotone,
}

impl From<StrategyArg> for CrossingStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::AllSimple => CrossingStrategy::AllSimple,
            StrategyArg::ShortestK => CrossingStrategy::ShortestK,
            StrategyArg::Monotone => CrossingStrategy::Monotone,
        }
    }
}

#[derive(Args, Debug)]
pub struct FamilyArgs {
    #[arg(long)]
    pub space: PathBuf,
    /// Curves join the two sides of this coordinate axis.
    #[arg(long, default_value_t = 0)]
    pub axis: usize,
    #[arg(long, value_enum, default_value_t = StrategyArg::ShortestK)]
    pub strategy: StrategyArg,
    #[arg(long, default_value_t = 1000)]
    pub max_curves: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum ImplicitArg {
    Connecting,
    Monotone,
}

impl From<ImplicitArg> for FamilyKind {
    fn from(k: ImplicitArg) -> Self {
        match k {
            ImplicitArg::Connecting => FamilyKind::Connecting,
            ImplicitArg::Monotone => FamilyKind::Monotone,
        }
    }
}

#[derive(Args, Debug)]
pub struct ModulusArgs {
    #[arg(long)]
    pub space: PathBuf,
    /// Explicit family file written by `family`.
    #[arg(long, conflicts_with = "implicit", required_unless_present = "implicit")]
    pub family: Option<PathBuf>,
    /// Implicit crossing family between the sides of `--axis`.
    #[arg(long, value_enum)]
    pub implicit: Option<ImplicitArg>,
    #[arg(long, default_value_t = 0)]
    pub axis: usize,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 1e-6, value_parser = parse_tol)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DualityArgs {
    pub certificate: PathBuf,
    /// Defaults to the tolerance the certificate was solved with.
    #[arg(long, value_parser = parse_tol)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AlbertiArgs {
    #[command(subcommand)]
    pub source: AlbertiSource,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum OrientationArg {
    Rows,
    Cols,
}

#[derive(Subcommand, Debug)]
pub enum AlbertiSource {
    /// Row or column segments of a grid, checked against cell areas.
    Fubini {
        #[arg(long)]
        space: PathBuf,
        #[arg(long, value_enum, default_value_t = OrientationArg::Rows)]
        orientation: OrientationArg,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fragments of the dual curves of a certificate, checked against its
    /// curve measure.
    FromCertificate {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
        /// Cone axis index in the coordinate plane.
        #[arg(long, default_value_t = 0)]
        cone_axis: usize,
        #[arg(long, default_value_t = AXIS_CONE_COS)]
        cone_cos: f64,
        /// Largest tolerated fraction of steps outside the cone.
        #[arg(long, default_value_t = 1.0)]
        threshold: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct HeisArgs {
    #[arg(long, default_value_t = 10_000)]
    pub tuples: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub cells: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CloudSource {
    /// Point cloud JSON `{"points", "basepoint"}`.
    #[arg(long, conflicts_with = "space", required_unless_present = "space")]
    pub cloud: Option<PathBuf>,
    /// Space JSON; its vertex coordinates form the cloud.
    #[arg(long)]
    pub space: Option<PathBuf>,
}

impl CloudSource {
    fn load(&self, base: &[f64]) -> Result<PointCloud> {
        match (&self.cloud, &self.space) {
            (Some(path), _) => {
                let c: PointCloud = serde_json::from_str(&read(path)?)?;
                if base.is_empty() {
                    Ok(c)
                } else {
                    PointCloud::new(c.points, base.to_vec())
                }
            }
            (None, Some(path)) => {
                let g = space_from_json(&read(path)?)?;
                let pts = g.coordinate_points();
                let dim = pts.first().map_or(2, Vec::len);
                let base = if base.is_empty() { vec![0.0; dim] } else { base.to_vec() };
                PointCloud::new(pts, base)
            }
            (None, None) => Err(ModspaceError::InvalidInput("either --cloud or --space is required".into())),
        }
    }
}

#[derive(Args, Debug)]
pub struct BlowupArgs {
    #[command(flatten)]
    pub source: CloudSource,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub base: Vec<f64>,
    /// Strictly decreasing scales.
    #[arg(long, value_delimiter = ',', required = true)]
    pub scales: Vec<f64>,
    #[arg(long = "R", default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[command(flatten)]
    pub source: CloudSource,
    /// Basepoint; defaults to the cloud's own, or the origin for a space.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub base: Vec<f64>,
    /// One direction per occurrence, comma separated.
    #[arg(long = "dir", value_parser = parse_vector, allow_hyphen_values = true, required = true)]
    pub dirs: Vec<Vec<f64>>,
    #[arg(long = "R", default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// `slit-vertical`, a scenario name under `--scenarios`, or a TOML path.
    #[arg(long)]
    pub scenario: String,
    /// Levels for `slit-vertical`, as `a..b` or a comma list.
    #[arg(long, value_parser = parse_levels, default_value = "1..4")]
    pub k: Levels,
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 1e-4, value_parser = parse_tol)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = ImplicitArg::Monotone)]
    pub family: ImplicitArg,
    #[arg(long, default_value = "scenarios")]
    pub scenarios: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

fn parse_tol(s: &str) -> std::result::Result<f64, String> {
    let t: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if t > 0.0 && t < 1.0 {
        Ok(t)
    } else {
        Err(format!("tolerance {t} must lie in (0, 1)"))
    }
}

pub fn parse_vector(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect()
}

/// `a..b` (inclusive) or `a,b,c`.
#[derive(Clone, Debug, PartialEq)]
pub struct Levels(pub Vec<u32>);

pub fn parse_levels(s: &str) -> std::result::Result<Levels, String> {
    let num = |x: &str| x.trim().parse::<u32>().map_err(|e| format!("{x:?}: {e}"));
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
            if a > b {
                return Err(format!("empty level range {s}"));
            }
            Ok(Levels((a..=b).collect()))
        }
        None => s.split(',').map(num).collect::<std::result::Result<_, _>>().map(Levels),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| ModspaceError::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => Ok(std::fs::write(path, text)?),
        None => {
            use std::io::Write;
            // A closed pipe downstream is not an error of ours.
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn load_space(path: &Path) -> Result<MetricGraph> {
    space_from_json(&read(path)?)
}

pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Gen(a) => generate(a),
        Command::Family(a) => family(a),
        Command::Modulus(a) => modulus(a),
        Command::DualityCheck(a) => duality_check(a),
        Command::Alberti(a) => alberti(a),
        Command::Heis(a) => heis(a),
        Command::Blowup(a) => blowup(a),
        Command::Split(a) => split(a),
        Command::Report(a) => report(a),
    }
}

fn generate(a: GenArgs) -> Result<bool> {
    let out = a.out.as_deref();
    let graph = match a.space {
        GenSpace::Grid { n } => grid_square(n)?,
        GenSpace::Carpet { p, k } => sierpinski_carpet(p, k)?,
        GenSpace::Slit { k, m, slits } => {
            let (g, spec) = slit_carpet_level(k, m)?;
            if let Some(path) = slits {
                std::fs::write(path, serde_json::to_string_pretty(&spec)?)?;
            }
            g
        }
        GenSpace::Heis { n, s } => {
            emit(out, &serde_json::to_string_pretty(&heisenberg_lattice(n, s)?)?)?;
            return Ok(true);
        }
    };
    emit(out, &space_to_json(&graph)?)?;
    Ok(true)
}

fn family(a: FamilyArgs) -> Result<bool> {
    let g = load_space(&a.space)?;
    let (lo, hi) = boundary_sides(&g, a.axis)?;
    let fam = crossing_family(&g, &lo, &hi, a.max_curves, a.strategy.into())?;
    eprintln!("{} curves", fam.len());
    emit(a.out.as_deref(), &family_to_json(&g, &fam)?)?;
    Ok(true)
}

fn modulus(a: ModulusArgs) -> Result<bool> {
    let g = load_space(&a.space)?;
    let spec = match (&a.family, a.implicit) {
        (Some(path), _) => FamilySpec::Explicit(family_from_json(&g, &read(path)?)?),
        (None, Some(kind)) => crossing_spec(&g, a.axis, kind.into())?,
        (None, None) => return Err(ModspaceError::InvalidInput("either --family or --implicit is required".into())),
    };
    let cert = solve_modulus(&g, &spec, a.p, &SolveOptions::with_tol(a.tol))?;
    eprintln!(
        "Mod_{} = {} (lower bound {}, {} dual curves)",
        a.p,
        cert.value,
        cert.lower_bound,
        cert.dual.len()
    );
    emit(a.out.as_deref(), &cert.to_json()?)?;
    Ok(true)
}

fn duality_check(a: DualityArgs) -> Result<bool> {
    let cert = certificate_from_json(&read(&a.certificate)?)?;
    let report = verify_duality(&cert, a.tol.unwrap_or(cert.tol));
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
    Ok(report.passed)
}

fn alberti(a: AlbertiArgs) -> Result<bool> {
    match a.source {
        AlbertiSource::Fubini {
            space,
            orientation,
            tol,
            out,
        } => {
            let g = load_space(&space)?;
            let Some(Generator::Grid { n }) = g.generator() else {
                return Err(ModspaceError::WrongGenerator("Fubini representations need a grid".into()));
            };
            let o = match orientation {
                OrientationArg::Rows => Orientation::Rows,
                OrientationArg::Cols => Orientation::Cols,
            };
            let rep = fubini_representation(&g, o)?;
            let part = fubini_partition(*n);
            let vol = part.volumes().expect("box partition");
            let embed = |v: &usize| g.coords(*v).expect("grid has coordinates").to_vec();
            let r = validate_representation(&rep, &vol, &part, embed, tol)?;
            eprintln!("max residual {:e} over {} cells", r.max_residual, vol.len());
            emit(out.as_deref(), &representation_to_json(&rep)?)?;
            Ok(r.passed)
        }
        AlbertiSource::FromCertificate {
            space,
            certificate,
            cone_axis,
            cone_cos,
            threshold,
            tol,
            out,
        } => {
            let g = load_space(&space)?;
            let cert = certificate_from_json(&read(&certificate)?)?;
            let walks: Vec<(Vec<usize>, f64)> = cert
                .dual
                .iter()
                .map(|d| (d.curve.vertices().to_vec(), d.weight))
                .collect();
            let cone = Cone::axis(2, cone_axis, cone_cos)?;
            let phi = |v: usize| g.coords(v).map_or_else(|| vec![0.0, 0.0], <[f64]>::to_vec);
            let rep = curves_to_alberti(&g, &walks, phi, "xy", &cone, threshold)?;
            let part = Partition::singleton_edges(g.edge_count());
            let r = validate_representation(&rep, &cert.eta, &part, |v: &usize| vec![*v as f64], tol)?;
            eprintln!("{} fragments, max residual {:e}", rep.len(), r.max_residual);
            emit(out.as_deref(), &representation_to_json(&rep)?)?;
            Ok(r.passed)
        }
    }
}

fn heis(a: HeisArgs) -> Result<bool> {
    let scenario = HeisenbergScenario {
        tuples: a.tuples,
        seed: a.seed,
        algebra_tol: 1e-12,
        geodesy_tol: 1e-10,
        jacobian_tol: 1e-10,
        jacobian_samples: 1000,
        jacobian_step: 1e-3,
        cells: a.cells,
        time_step: 1.0 / 64.0,
        parameter_steps: vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
    };
    let (passed, metrics) = crate::scenarios::Scenario::Heisenberg(scenario).run()?;
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&metrics)?)?;
    Ok(passed)
}

fn blowup(a: BlowupArgs) -> Result<bool> {
    let cloud = a.source.load(&[])?;
    let seq = tangent_sequence(&cloud, &a.base, &a.scales, a.radius, a.eps)?;
    eprintln!("cauchy tail: {}", seq.cauchy_tail);
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&seq)?)?;
    Ok(seq.cauchy_tail)
}

fn split(a: SplitArgs) -> Result<bool> {
    let cloud = a.source.load(&a.base)?;
    let report = factor_product(&cloud, &a.dirs, a.radius, a.eps)?;
    eprintln!(
        "product error {:e}, line-test fraction {}",
        report.product_error, report.line_test_fraction
    );
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
    Ok(report.passed)
}

fn report(a: ReportArgs) -> Result<bool> {
    std::fs::create_dir_all(&a.out)?;
    if a.scenario == "slit-vertical" {
        let rows = slit_vertical_sweep(&a.k.0, a.m, a.p, a.family.into(), a.tol)?;
        std::fs::write(a.out.join("slit-vertical.csv"), sweep_csv(&rows))?;
        let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.k as f64, r.modulus)).collect();
        let title = format!("Mod_{} of the vertical family on slit carpets", a.p);
        std::fs::write(a.out.join("slit-vertical.svg"), line_chart(&title, "level k", "modulus", &points))?;
        for r in &rows {
            println!("k={} modulus={} ({} edges)", r.k, r.modulus, r.edges);
        }
        return Ok(true);
    }
    let scenario = if Path::new(&a.scenario).is_file() {
        ScenarioFile::load(Path::new(&a.scenario))?
    } else {
        ScenarioFile::find(&a.scenarios, &a.scenario)?
    };
    let outcome = scenario.run()?;
    println!("{}", outcome.line());
    std::fs::write(
        a.out.join(format!("{}.json", scenario.name)),
        serde_json::to_string_pretty(&outcome)?,
    )?;
    Ok(outcome.passed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_lists() {
        assert_eq!(parse_levels("1..4").unwrap().0, vec![1, 2, 3, 4]);
        assert_eq!(parse_levels("1..=2").unwrap().0, vec![1, 2]);
        assert_eq!(parse_levels("3,1").unwrap().0, vec![3, 1]);
        assert!(parse_levels("4..1").is_err());
        assert!(parse_levels("x").is_err());
    }

    #[test]
    fn vectors_and_tolerances() {
        assert_eq!(parse_vector("1, -0.5").unwrap(), vec![1.0, -0.5]);
        assert!(parse_vector("1,,2").is_err());
        assert!(parse_tol("1e-6").is_ok());
        assert!(parse_tol("1").is_err());
        assert!(parse_tol("0").is_err());
    }

    #[test]
    fn command_line_shapes() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from(["modspace", "split", "--cloud", "c.json", "--dir", "0,1", "--dir", "-1,0", "--eps", "0.1"])
            .unwrap();
        let Command::Split(s) = cli.command else { panic!() };
        assert_eq!(s.dirs, vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);
        assert!(Cli::try_parse_from(["modspace", "modulus", "--space", "s.json"]).is_err());
        assert!(Cli::try_parse_from(["modspace", "gen", "slit", "--k", "2", "--m", "1"]).is_ok());
        let report = Cli::try_parse_from(["modspace", "report", "--scenario", "slit-vertical", "--k", "1..2"]).unwrap();
        let Command::Report(r) = report.command else { panic!() };
        assert_eq!(r.k, Levels(vec![1, 2]));
    }
}
