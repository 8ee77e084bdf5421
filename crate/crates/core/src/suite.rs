//! Batch runs over graph families driven by a TOML or JSON config.
//!
//! ```toml
//! output = "reports"
//!
//! [settings]
//! lambda_pi = 2.0
//! seed = 7
//!
//! [[families]]
//! family = "gasket"
//! levels = [2, 3]
//! p = [2.0]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::blending::whitney_blend;
use crate::certify::{auto_balls, certify, CertReport, CertifyOptions, RatioOptions, SCHEMA};
use crate::error::{Error, Result};
use crate::fixtures::{generate, FamilySpec};
use crate::graph::{Ball, MetricSpace, VertexSet};
use crate::io::{write_json, BallRecord};
use crate::scale::ScaleFunction;
use crate::solver::{cutoff_between, SolveOptions};
use crate::whitney::whitney_cover;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(default = "two")]
    pub lambda_pi: f64,
    #[serde(default = "eight")]
    pub lambda_whitney: f64,
    #[serde(default = "half")]
    pub eta: f64,
    #[serde(default = "restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "tol")]
    pub tol: f64,
    #[serde(default = "one")]
    pub blend_trials: usize,
    /// Caps the number of automatically chosen balls per graph.
    #[serde(default)]
    pub max_balls: Option<usize>,
}

fn two() -> f64 {
    2.0
}
fn eight() -> f64 {
    8.0
}
fn half() -> f64 {
    0.5
}
fn restarts() -> usize {
    32
}
fn tol() -> f64 {
    1e-10
}
fn one() -> usize {
    1
}

impl Default for Settings {
    fn default() -> Self {
        Self { lambda_pi: 2.0, lambda_whitney: 8.0, eta: 0.5, restarts: 32, seed: 0, tol: 1e-10, blend_trials: 1, max_balls: None }
    }
}

/// Ball selection: `"auto"` or an explicit list.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(untagged)]
pub enum BallPolicy {
    #[default]
    #[serde(skip)]
    Auto,
    Named(String),
    List(Vec<BallRecord>),
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub family: String,
    pub levels: Vec<usize>,
    pub p: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub balls: BallPolicy,
    /// Lattice dimension.
    #[serde(default)]
    pub dim: Option<usize>,
    /// Dumbbell bridge length.
    #[serde(default)]
    pub bridge: Option<usize>,
    /// Random graph extra edges.
    #[serde(default)]
    pub extra: Option<usize>,
    /// Conductance multiplier per level for gaskets and carpets.
    #[serde(default)]
    pub multiplier: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub settings: Settings,
    #[serde(default)]
    pub families: Vec<FamilyConfig>,
}

#[derive(Deserialize)]
struct SpanDoc {
    #[serde(default)]
    families: Vec<SpanFamily>,
    #[serde(default)]
    settings: Option<Spanned<toml::Value>>,
}

#[derive(Deserialize)]
struct SpanFamily {
    family: Option<Spanned<toml::Value>>,
    levels: Option<Spanned<toml::Value>>,
    p: Option<Spanned<toml::Value>>,
    beta: Option<Spanned<toml::Value>>,
    balls: Option<Spanned<toml::Value>>,
}

/// Where a config value came from, for error messages.
struct Locator {
    text: String,
    spans: Option<SpanDoc>,
}

impl Locator {
    fn line(&self, family: Option<usize>, key: &str) -> Option<usize> {
        let doc = self.spans.as_ref()?;
        let span = match family {
            None => doc.settings.as_ref().map(|s| s.span()),
            Some(i) => {
                let f = doc.families.get(i)?;
                match key {
                    "family" => f.family.as_ref().map(|s| s.span()),
                    "levels" => f.levels.as_ref().map(|s| s.span()),
                    "p" => f.p.as_ref().map(|s| s.span()),
                    "beta" => f.beta.as_ref().map(|s| s.span()),
                    "balls" => f.balls.as_ref().map(|s| s.span()),
                    _ => None,
                }
            }
        }?;
        Some(self.text[..span.start].matches('\n').count() + 1)
    }

    fn error(&self, family: Option<usize>, key: &str, msg: String) -> Error {
        let path = match family {
            Some(i) => format!("families[{i}].{key}"),
            None => format!("settings.{key}"),
        };
        match self.line(family, key) {
            Some(l) => Error::Config(format!("line {l}: {path}: {msg}")),
            None => Error::Config(format!("{path}: {msg}")),
        }
    }
}

/// Parses and validates a config; `json` picks the format.
pub fn parse_config(text: &str, json: bool) -> Result<SuiteConfig> {
    let (cfg, loc) = if json {
        let cfg: SuiteConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        (cfg, Locator { text: text.into(), spans: None })
    } else {
        let cfg: SuiteConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        (cfg, Locator { text: text.into(), spans: toml::from_str(text).ok() })
    };
    validate(&cfg, &loc)?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SuiteConfig> {
    let text = std::fs::read_to_string(path)?;
    let json = path.extension().is_some_and(|e| e == "json");
    parse_config(&text, json)
}

fn validate(cfg: &SuiteConfig, loc: &Locator) -> Result<()> {
    let s = &cfg.settings;
    if s.lambda_pi < 1.0 {
        return Err(loc.error(None, "lambda_pi", format!("{} is below 1", s.lambda_pi)));
    }
    if s.lambda_whitney < 8.0 {
        return Err(loc.error(None, "lambda_whitney", format!("{} is below 8", s.lambda_whitney)));
    }
    if !(s.eta > 0.0 && s.eta < 1.0) {
        return Err(loc.error(None, "eta", format!("{} is outside (0, 1)", s.eta)));
    }
    for (i, f) in cfg.families.iter().enumerate() {
        if !["path", "cycle", "lattice_box", "gasket", "carpet", "dumbbell", "random"].contains(&f.family.as_str()) {
            return Err(loc.error(Some(i), "family", format!("unknown family `{}`", f.family)));
        }
        if f.levels.is_empty() {
            return Err(loc.error(Some(i), "levels", "no levels given".into()));
        }
        if f.p.is_empty() {
            return Err(loc.error(Some(i), "p", "no exponents given".into()));
        }
        if let Some(p) = f.p.iter().find(|&&p| !(p > 1.0 && p.is_finite())) {
            return Err(loc.error(Some(i), "p", format!("{p} is out of range (need p > 1)")));
        }
        if let Some(b) = f.beta.iter().find(|&&b| !(b > 0.0 && b.is_finite())) {
            return Err(loc.error(Some(i), "beta", format!("{b} is not positive")));
        }
        if f.beta.is_empty() && f.family == "carpet" {
            return Err(loc.error(Some(i), "beta", "carpet needs an explicit beta".into()));
        }
        if let BallPolicy::Named(name) = &f.balls {
            if name != "auto" {
                return Err(loc.error(Some(i), "balls", format!("expected \"auto\" or a list, found `{name}`")));
            }
        }
        for &level in &f.levels {
            spec_for(f, level).map_err(|e| loc.error(Some(i), "levels", e.to_string()))?;
        }
    }
    Ok(())
}

fn spec_for(f: &FamilyConfig, level: usize) -> Result<FamilySpec> {
    let spec = match f.family.as_str() {
        "path" => FamilySpec::Path { n: level },
        "cycle" => FamilySpec::Cycle { n: level },
        "lattice_box" => FamilySpec::LatticeBox { d: f.dim.unwrap_or(2), m: level },
        "gasket" => FamilySpec::Gasket { level, multiplier: f.multiplier },
        "carpet" => FamilySpec::Carpet { level, multiplier: f.multiplier },
        "dumbbell" => FamilySpec::Dumbbell { clique: level, bridge: f.bridge.unwrap_or(3) },
        "random" => FamilySpec::Random { n: level, extra: f.extra.unwrap_or(level), seed: level as u64 },
        other => return Err(Error::Config(format!("unknown family `{other}`"))),
    };
    match spec {
        FamilySpec::Gasket { level, .. } if level > crate::fixtures::MAX_GASKET_LEVEL => {
            Err(Error::OverBudget { family: "gasket".into(), level, max: crate::fixtures::MAX_GASKET_LEVEL })
        }
        FamilySpec::Carpet { level, .. } if level > crate::fixtures::MAX_CARPET_LEVEL => {
            Err(Error::OverBudget { family: "carpet".into(), level, max: crate::fixtures::MAX_CARPET_LEVEL })
        }
        s => Ok(s),
    }
}

fn default_beta(family: &str) -> f64 {
    if family == "gasket" {
        5f64.ln() / 2f64.ln()
    } else {
        2.0
    }
}

/// A pass/fail assertion recorded in a report.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub schema: &'static str,
    pub spec: FamilySpec,
    pub vertices: usize,
    pub checks: Vec<Check>,
    pub certificate: CertReport,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Clone, Debug)]
pub struct SuiteOutcome {
    pub reports: Vec<PathBuf>,
    pub summary: Option<PathBuf>,
    pub passed: bool,
}

/// Runs one family member at one `(p, β)`.
pub fn run_member(spec: &FamilySpec, p: f64, beta: f64, balls: &BallPolicy, settings: &Settings) -> Result<SuiteReport> {
    let graph = generate::<f64>(spec)?;
    let space = MetricSpace::new(graph)?;
    let psi = ScaleFunction::power(beta);
    let mut chosen: Vec<Ball<f64>> = match balls {
        BallPolicy::List(list) => list.iter().map(|b| b.to_ball()).collect(),
        _ => auto_balls(&space),
    };
    if let Some(max) = settings.max_balls {
        chosen.truncate(max);
    }
    let solve = SolveOptions::default().with_tol(settings.tol);
    let opts = CertifyOptions {
        lambda_pi: settings.lambda_pi,
        lambda_whitney: settings.lambda_whitney,
        eta: settings.eta,
        blend_trials: settings.blend_trials,
        ratio: RatioOptions { restarts: settings.restarts, seed: settings.seed, solve: solve.clone(), ..RatioOptions::default() },
    };
    let mut cert = certify(&space, &chosen, p, &psi, &opts)?;
    let mut checks = Vec::new();

    let nonneg = cert.balls.iter().all(|r| r.c_cap >= 0.0 && r.c_pi.value >= 0.0 && r.c_cs.value >= 0.0 && r.c_cs_classical.value >= 0.0 && r.c_wb >= 0.0);
    checks.push(Check { name: "constants_nonnegative".into(), passed: nonneg, detail: String::new() });
    let worst = cert.balls.iter().map(|r| r.cutoff_residual).fold(0.0, f64::max);
    checks.push(Check { name: "cutoff_residuals".into(), passed: worst <= settings.tol.max(1e-8), detail: format!("worst relative residual {worst:e}") });

    if let FamilySpec::Path { n } = *spec {
        let inner = VertexSet::from_members(n + 1, [0]);
        let outer = VertexSet::from_members(n + 1, 0..n);
        let c = cutoff_between(space.graph(), &inner, &outer, p, &solve)?;
        let want = (n as f64).powf(1.0 - p);
        let rel = (c.capacity - want).abs() / want;
        checks.push(Check { name: "capacity_oracle".into(), passed: rel <= 1e-8, detail: format!("capacity {} vs {want}, relative error {rel:e}", c.capacity) });
    }

    if let Some(b) = chosen.first() {
        let annulus = space.ball_members(&b.scaled(2.0)).difference(&space.closed_ball_members(b));
        if !annulus.is_empty() && !annulus.is_full() {
            let cover = whitney_cover(&space, &annulus, settings.lambda_whitney)?;
            checks.push(Check { name: "whitney_cover".into(), passed: cover.certificate.passed(), detail: format!("{} balls, overlap {}", cover.balls.len(), cover.certificate.overlap) });
        }
        let f: Vec<f64> = (0..space.n()).map(|x| space.d(b.center, x)).collect();
        let g = vec![0.0; space.n()];
        let res = whitney_blend(&space, &f, &g, b, settings.eta, p, settings.lambda_whitney, &solve)?;
        checks.push(Check { name: "blend_boundary".into(), passed: res.boundary_agreement(), detail: String::new() });
    }

    if p != 2.0 && matches!(spec, FamilySpec::Gasket { multiplier: None, .. } | FamilySpec::Carpet { multiplier: None, .. }) {
        cert.warnings.push("default conductance renormalization is the p = 2 value; its p != 2 counterpart is unknown".into());
    }
    Ok(SuiteReport { schema: SCHEMA, vertices: space.n(), spec: spec.clone(), checks, certificate: cert })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    family: &'a str,
    level: usize,
    vertices: usize,
    p: f64,
    beta: f64,
    balls: usize,
    c_d: f64,
    c_cap_min: f64,
    c_cap_max: f64,
    c_pi_max: f64,
    c_cs_max: f64,
    c_cs_classical_max: f64,
    c_wb_max: f64,
    passed: bool,
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x}");
    s.replace('.', "_")
}

/// Runs a config, writing one JSON report per member and `summary.csv`.
/// The outcome passes iff every check in every report passes.
pub fn run_suite(config: &SuiteConfig, out_override: Option<&Path>) -> Result<SuiteOutcome> {
    let out = out_override.map(Path::to_path_buf).or_else(|| config.output.clone()).unwrap_or_else(|| PathBuf::from("reports"));
    let mut reports = Vec::new();
    let mut passed = true;
    if config.families.is_empty() {
        return Ok(SuiteOutcome { reports, summary: None, passed });
    }
    std::fs::create_dir_all(&out)?;
    let summary = out.join("summary.csv");
    let mut csv = csv::Writer::from_path(&summary)?;
    for fam in &config.families {
        let betas = if fam.beta.is_empty() { vec![default_beta(&fam.family)] } else { fam.beta.clone() };
        for &level in &fam.levels {
            let spec = spec_for(fam, level)?;
            for &p in &fam.p {
                for &beta in &betas {
                    log::info!("running {} level {level} p={p} beta={beta}", fam.family);
                    let rep = run_member(&spec, p, beta, &fam.balls, &config.settings)?;
                    let file = out.join(format!("{}-{level}-p{}-b{}.json", fam.family, fmt_num(p), fmt_num(beta)));
                    write_json(&file, &rep)?;
                    let s = &rep.certificate.summary;
                    csv.serialize(CsvRow {
                        family: &fam.family,
                        level,
                        vertices: rep.vertices,
                        p,
                        beta,
                        balls: rep.certificate.balls.len(),
                        c_d: s.c_d,
                        c_cap_min: s.c_cap.min,
                        c_cap_max: s.c_cap.max,
                        c_pi_max: s.c_pi.max,
                        c_cs_max: s.c_cs.max,
                        c_cs_classical_max: s.c_cs_classical.max,
                        c_wb_max: s.c_wb.max,
                        passed: rep.passed(),
                    })?;
                    passed &= rep.passed();
                    reports.push(file);
                }
            }
        }
    }
    csv.flush()?;
    Ok(SuiteOutcome { reports, summary: Some(summary), passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invalid_p_names_its_line() {
        let text = "[[families]]\nfamily = \"path\"\nlevels = [4]\np = [0.5]\n";
        let err = parse_config(text, false).unwrap_err().to_string();
        assert!(err.contains("line 4") && err.contains("families[0].p"), "{err}");
    }

    #[test]
    fn json_config() {
        let text = r#"{"families":[{"family":"path","levels":[3],"p":[2.0],"balls":[{"center":0,"radius":1.5}]}]}"#;
        let cfg = parse_config(text, true).unwrap();
        assert!(matches!(cfg.families[0].balls, BallPolicy::List(ref l) if l.len() == 1));
        let bad = r#"{"families":[{"family":"torus","levels":[3],"p":[2.0]}]}"#;
        assert!(parse_config(bad, true).unwrap_err().to_string().contains("unknown family"));
    }

    #[test]
    fn empty_suite() {
        let cfg = parse_config("", false).unwrap();
        let out = run_suite(&cfg, Some(Path::new("/nonexistent/never-created"))).unwrap();
        assert!(out.passed && out.reports.is_empty());
    }

    #[test]
    fn over_budget_level() {
        let text = "[[families]]\nfamily = \"gasket\"\nlevels = [9]\np = [2.0]\n";
        assert!(parse_config(text, false).unwrap_err().to_string().contains("line 3"));
    }
}
