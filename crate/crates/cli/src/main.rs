use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pdlab::blending::{blend_energy_report, whitney_blend, BlendEnergy};
use pdlab::certify::{auto_balls, certify, CertifyOptions};
use pdlab::energy::axioms_report;
use pdlab::fixtures::{generate, FamilySpec};
use pdlab::io::{cover_records, read_function, read_graph, read_json, write_graph, write_json, BallRecord, CoverRecord};
use pdlab::scale::{ScaleFunction, ScaleTable};
use pdlab::solver::SolveOptions;
use pdlab::suite::{load_config, run_suite};
use pdlab::whitney::{neighbor_geometry_check, whitney_cover, CoverCertificate, NeighborCheck};
use pdlab::{Ball, Graph, Space, VertexSet};

/// p-energies, cutoff Sobolev certificates and Whitney blending on weighted graphs.
#[derive(Parser)]
#[command(name = "pdlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a fixture graph.
    Gen(GenArgs),
    /// Randomized checks of the energy axioms.
    Axioms(AxiomArgs),
    /// Whitney cover of an annulus or a vertex set.
    Cover(CoverArgs),
    /// Blend two functions across a ball.
    Blend(BlendArgs),
    /// Per-ball constants and a summary.
    Certify(CertifyArgs),
    /// Run a suite configuration (TOML or JSON).
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// path, cycle, lattice_box, gasket, carpet, dumbbell or random.
    family: String,
    /// Level, edge count, side length or clique size depending on the family.
    #[arg(long)]
    level: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long)]
    multiplier: Option<f64>,
    #[arg(long, default_value_t = 3)]
    bridge: usize,
    #[arg(long, default_value_t = 0)]
    extra: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AxiomArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoverArgs {
    #[arg(long)]
    graph: PathBuf,
    /// `x,r1,r2`: the open set `B(x,r2)` minus the closed ball of radius `r1`.
    #[arg(long, conflicts_with = "omega")]
    annulus: Option<String>,
    /// JSON array of vertex ids.
    #[arg(long)]
    omega: Option<PathBuf>,
    #[arg(long, default_value_t = 8.0)]
    lambda: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BlendArgs {
    #[arg(long)]
    graph: PathBuf,
    /// `x,r`.
    #[arg(long)]
    ball: String,
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 8.0)]
    lambda: f64,
    /// JSON array with one value per vertex.
    #[arg(long)]
    f: PathBuf,
    #[arg(long)]
    g: PathBuf,
    /// Exponent of the default `Ψ = r^β` used for the energy ratio.
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    p: f64,
    #[arg(long, conflicts_with = "psi")]
    beta: Option<f64>,
    /// Tabulated scale function `{"radii": [...], "values": [...]}`.
    #[arg(long)]
    psi: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    lambda_pi: f64,
    #[arg(long, default_value_t = 8.0)]
    lambda_whitney: f64,
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    /// `auto` or a JSON file of `{"center", "radius"}` records.
    #[arg(long, default_value = "auto")]
    balls: String,
    #[arg(long, default_value_t = 32)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    blend_trials: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    config: PathBuf,
    /// Overrides the output directory of the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit<S: Serialize>(out: Option<&Path>, value: &S) -> Result<()> {
    match out {
        Some(path) => write_json(path, value).with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn load_graph(path: &Path) -> Result<Graph> {
    read_graph(path).with_context(|| format!("reading graph {}", path.display()))
}

fn parse_numbers(text: &str, count: usize, what: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("{what} must be {count} comma-separated numbers"))?;
    if parts.len() != count {
        bail!("{what} must be {count} comma-separated numbers, got {}", parts.len());
    }
    Ok(parts)
}

fn vertex(v: f64, n: usize) -> Result<usize> {
    if v < 0.0 || v.fract() != 0.0 || v as usize >= n {
        bail!("{v} is not a vertex id below {n}");
    }
    Ok(v as usize)
}

fn gen(a: GenArgs) -> Result<bool> {
    let spec = match a.family.as_str() {
        "path" => FamilySpec::Path { n: a.level },
        "cycle" => FamilySpec::Cycle { n: a.level },
        "lattice_box" => FamilySpec::LatticeBox { d: a.dim, m: a.level },
        "gasket" => FamilySpec::Gasket { level: a.level, multiplier: a.multiplier },
        "carpet" => FamilySpec::Carpet { level: a.level, multiplier: a.multiplier },
        "dumbbell" => FamilySpec::Dumbbell { clique: a.level, bridge: a.bridge },
        "random" => FamilySpec::Random { n: a.level, extra: a.extra, seed: a.seed },
        other => bail!("unknown family {other:?}"),
    };
    let g: Graph = generate(&spec)?;
    match a.out {
        Some(path) => write_graph(&path, &g)?,
        None => emit(None, &pdlab::io::GraphFile::from_graph(&g))?,
    }
    Ok(true)
}

fn axioms(a: AxiomArgs) -> Result<bool> {
    let g = load_graph(&a.graph)?;
    let rep = axioms_report(&g, a.p, a.trials, a.seed, a.tol)?;
    emit(a.out.as_deref(), &rep)?;
    Ok(rep.all_passed())
}

#[derive(Serialize)]
struct CoverOutput {
    omega: Vec<usize>,
    lambda: f64,
    balls: Vec<CoverRecord>,
    certificate: CoverCertificate,
    neighbors: NeighborCheck,
}

fn cover(a: CoverArgs) -> Result<bool> {
    let s = Space::new(load_graph(&a.graph)?)?;
    let omega = match (&a.annulus, &a.omega) {
        (Some(text), None) => {
            let v = parse_numbers(text, 3, "--annulus")?;
            let x = vertex(v[0], s.n())?;
            s.ball_members(&Ball::new(x, v[2])).difference(&s.closed_ball_members(&Ball::new(x, v[1])))
        }
        (None, Some(path)) => {
            let ids: Vec<usize> = read_json(path)?;
            if let Some(&bad) = ids.iter().find(|&&x| x >= s.n()) {
                bail!("vertex {bad} is out of range");
            }
            VertexSet::from_members(s.n(), ids)
        }
        _ => bail!("give exactly one of --annulus or --omega"),
    };
    let c = whitney_cover(&s, &omega, a.lambda)?;
    let neighbors = neighbor_geometry_check(&s, &c);
    let ok = c.certificate.passed() && neighbors.passed();
    let out = CoverOutput { omega: omega.members(), lambda: a.lambda, balls: cover_records(&c), certificate: c.certificate.clone(), neighbors };
    emit(a.out.as_deref(), &out)?;
    Ok(ok)
}

#[derive(Serialize)]
struct BlendOutput {
    center: usize,
    radius: f64,
    eta: f64,
    p: f64,
    lambda: f64,
    boundary_agreement: bool,
    degenerate: bool,
    cover_balls: usize,
    energy: BlendEnergy,
    h: Vec<f64>,
}

fn blend(a: BlendArgs) -> Result<bool> {
    let s = Space::new(load_graph(&a.graph)?)?;
    let v = parse_numbers(&a.ball, 2, "--ball")?;
    let b = Ball::new(vertex(v[0], s.n())?, v[1]);
    let f = read_function(&a.f, s.n())?;
    let g = read_function(&a.g, s.n())?;
    let res = whitney_blend(&s, &f, &g, &b, a.eta, a.p, a.lambda, &SolveOptions::default())?;
    let energy = blend_energy_report(&s, &res, &ScaleFunction::power(a.beta))?;
    let ok = res.boundary_agreement() && energy.finite();
    let out = BlendOutput {
        center: b.center,
        radius: b.radius,
        eta: a.eta,
        p: a.p,
        lambda: a.lambda,
        boundary_agreement: res.boundary_agreement(),
        degenerate: res.degenerate,
        cover_balls: res.cover.as_ref().map_or(0, |c| c.balls.len()),
        energy,
        h: res.h,
    };
    emit(a.report.as_deref(), &out)?;
    Ok(ok)
}

fn certify_cmd(a: CertifyArgs) -> Result<bool> {
    let s = Space::new(load_graph(&a.graph)?)?;
    let psi = match (a.beta, &a.psi) {
        (Some(beta), None) => ScaleFunction::power(beta),
        (None, Some(path)) => ScaleFunction::from_table(&read_json::<ScaleTable>(path)?)?,
        _ => bail!("give exactly one of --beta or --psi"),
    };
    let balls: Vec<Ball<f64>> = if a.balls == "auto" {
        auto_balls(&s)
    } else {
        let records: Vec<BallRecord> = read_json(Path::new(&a.balls))?;
        if let Some(r) = records.iter().find(|r| r.center >= s.n()) {
            bail!("ball center {} is out of range", r.center);
        }
        records.into_iter().map(BallRecord::to_ball).collect()
    };
    let mut opts = CertifyOptions { lambda_pi: a.lambda_pi, lambda_whitney: a.lambda_whitney, eta: a.eta, blend_trials: a.blend_trials, ..Default::default() };
    opts.ratio.restarts = a.restarts;
    opts.ratio.seed = a.seed;
    let rep = certify(&s, &balls, a.p, &psi, &opts)?;
    emit(a.out.as_deref(), &rep)?;
    Ok(true)
}

fn report(a: ReportArgs) -> Result<bool> {
    let cfg = load_config(&a.config).with_context(|| format!("in {}", a.config.display()))?;
    let out = run_suite(&cfg, a.out.as_deref())?;
    for r in &out.reports {
        println!("{}", r.display());
    }
    if let Some(s) = &out.summary {
        println!("{}", s.display());
    }
    Ok(out.passed)
}

fn threads() -> Result<()> {
    if let Ok(v) = std::env::var("PDLAB_THREADS") {
        let n: usize = v.parse().with_context(|| format!("PDLAB_THREADS={v:?} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let run = || -> Result<bool> {
        threads()?;
        match cli.command {
            Command::Gen(a) => gen(a),
            Command::Axioms(a) => axioms(a),
            Command::Cover(a) => cover(a),
            Command::Blend(a) => blend(a),
            Command::Certify(a) => certify_cmd(a),
            Command::Report(a) => report(a),
        }
    };
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
