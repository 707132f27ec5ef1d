//! Batch front-end: TOML run configs in, JSON reports and CSV series out.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::branching::{
    borel_domination_statistic, borel_mass, borel_pmf, extinction_probability, one_sided_critical, rcm_cluster,
    total_progeny_gf, BranchingSpec, ExtinctionMethod,
};
use crate::combinat::{
    all_graphs_with, all_multigraphs, connected_graphs_with, connected_multigraphs_with, multirooted_graphs_with,
    nonflat_connected_pairs, partitions_with, spanning_multigraphs_with, trees_with,
};
use crate::converge::{check_fp, check_kpu, check_py, default_grid, optimize_witness, Checker, Condition};
use crate::cumulants::{cumulant_multigraph, cumulant_partition_pairs, empirical_cumulants, moment_multigraph, MIN_TRIALS};
use crate::error::{Error, Result};
use crate::expansion::{
    correlation_expansion, janossy_from_correlations, log_laplace_expansion, log_partition_expansion, truncated_expansion,
    FiniteVolumeOracle, Quantity,
};
use crate::model::{Activity, Kernel, KernelKind, PairPotential, Point, RadialTable, Region};
use crate::oracle::{extinction_root, poisson_pair_cumulants, poisson_pair_moments, tonks_xi};
use crate::quad::SamplingPlan;
use crate::ursell::{psi, ursell};
use crate::verify::{render_table, run_suite, Suite, VerifyOptions, FP_SAMPLES};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SIZE_LIMIT: i32 = 3;
pub const EXIT_TAIL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "mayerkit", version, about = "Cluster expansions for Gibbs point processes")]
pub struct Cli {
    /// TOML run configuration; every field has a default.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub samples: Option<u64>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Directory for the JSON report and CSV series; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub force_size_limits: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Count (and list) graphs, trees, partitions or multigraphs.
    Enumerate,
    /// Ursell function φ^T and ψ_{k,n} at the configured points.
    Ursell,
    /// Partial sums of log Ξ, ρ_n, ρ_n^T, log-Laplace or Janossy expansions.
    Expand,
    /// KPU, FP or PY certificates with the best witness and critical z.
    Converge,
    /// Extinction probability, Borel law and progeny generating function.
    Branching,
    /// Cluster sizes of the random connection model.
    Rcm,
    /// Multigraph and partition-pair moments and cumulants.
    Cumulants,
    /// Closed-form reference values.
    Oracle,
    /// Run an acceptance suite: counts, thresholds, oracles, cumulants or branching.
    Verify { suite: String },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Enumerate => "enumerate",
            Command::Ursell => "ursell",
            Command::Expand => "expand",
            Command::Converge => "converge",
            Command::Branching => "branching",
            Command::Rcm => "rcm",
            Command::Cumulants => "cumulants",
            Command::Oracle => "oracle",
            Command::Verify { .. } => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Ideal,
    HardSphere {
        diameter: f64,
    },
    Tabulated {
        #[serde(default)]
        path: Option<PathBuf>,
        #[serde(default)]
        distance: Vec<f64>,
        #[serde(default)]
        value: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActivityConfig {
    Constant { z: f64 },
    Piecewise { cells: Vec<CellConfig> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Constant { value: f64 },
    SquareWell { core: f64, core_value: f64, range: f64, depth: f64 },
    Gaussian { amplitude: f64, width: f64 },
    Tabulated { distance: Vec<f64>, value: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    /// Cube [0, side]^dim unless `lower`/`upper` are given.
    pub side: f64,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub beta: f64,
    pub potential: PotentialConfig,
    pub activity: ActivityConfig,
    pub kernel: KernelConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 1,
            side: 10.0,
            lower: None,
            upper: None,
            beta: 1.0,
            potential: PotentialConfig::HardSphere { diameter: 1.0 },
            activity: ActivityConfig::Constant { z: 0.05 },
            kernel: KernelConfig::Gaussian {
                amplitude: 1.0,
                width: 0.5,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    All,
    Connected,
    Multirooted,
    Trees,
    Partitions,
    Multigraphs,
    SpanningMultigraphs,
    ConnectedMultigraphs,
    PartitionPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FixedPoint,
    Simulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Tonks,
    Poisson,
    Extinction,
    Borel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericConfig {
    pub samples: u64,
    pub seed: u64,
    pub workers: usize,
    pub force_size_limits: bool,
    /// Expansion truncation N.
    pub order: usize,
    pub kmax: Option<usize>,
    /// Cumulant order.
    pub m: usize,
    pub t: f64,
    /// Fixed witness; optimised over the default grid when absent.
    pub a: Option<f64>,
    pub tol: f64,
    pub quantity: Quantity,
    pub points: Vec<Vec<f64>>,
    /// Constant test function for the log-Laplace expansion.
    pub h: f64,
    pub condition: Condition,
    /// Constant stability function B for the PY condition.
    pub stability: f64,
    pub family: Family,
    pub n: usize,
    pub k: usize,
    pub rooted: bool,
    pub list: bool,
    pub method: Method,
    pub iterations: usize,
    pub trials: u64,
    pub node_cap: usize,
    pub borel_terms: usize,
    pub empirical_trials: u64,
    pub oracle: OracleKind,
    /// Mean offspring for the closed-form branching oracles.
    pub bz: f64,
    /// Samples per Q_k term in `verify thresholds`.
    pub fp_samples: u64,
}

impl Default for NumericConfig {
    fn default() -> Self {
        NumericConfig {
            samples: 100_000,
            seed: 1,
            workers: 4,
            force_size_limits: false,
            order: 4,
            kmax: None,
            m: 2,
            t: 0.0,
            a: None,
            tol: 1e-8,
            quantity: Quantity::LogXi,
            points: vec![],
            h: 0.0,
            condition: Condition::Kpu,
            stability: 0.0,
            family: Family::Connected,
            n: 4,
            k: 1,
            rooted: false,
            list: false,
            method: Method::FixedPoint,
            iterations: 10_000,
            trials: 10_000,
            node_cap: 10_000,
            borel_terms: 50,
            empirical_trials: 0,
            oracle: OracleKind::Tonks,
            bz: 0.5,
            fp_samples: FP_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, csv: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub numeric: NumericConfig,
    pub output: OutputConfig,
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl RunConfig {
    /// Parses TOML, reporting the dotted path of the first bad field.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| config_error("", e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_error(&path, e.into_inner().message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_error("--config", format!("{}: {e}", path.display())))?;
        RunConfig::from_toml(&text)
    }

    /// Command-line flags take precedence over the file.
    pub fn apply_flags(&mut self, cli: &Cli) {
        if let Some(s) = cli.seed {
            self.numeric.seed = s;
        }
        if let Some(s) = cli.samples {
            self.numeric.samples = s;
        }
        if let Some(w) = cli.workers {
            self.numeric.workers = w;
        }
        if let Some(o) = &cli.out {
            self.output.dir = Some(o.clone());
        }
        if cli.force_size_limits {
            self.numeric.force_size_limits = true;
        }
    }

    pub fn plan(&self) -> SamplingPlan {
        SamplingPlan::new(self.numeric.samples, self.numeric.seed)
            .with_workers(self.numeric.workers)
            .with_force(self.numeric.force_size_limits)
    }

    fn at(path: &'static str) -> impl Fn(Error) -> Error {
        move |e| match e {
            Error::Model(m) | Error::Contract(m) => config_error(path, m),
            other => other,
        }
    }

    pub fn region(&self) -> Result<Region> {
        let m = &self.model;
        match (&m.lower, &m.upper) {
            (Some(lo), Some(hi)) => Region::new(lo, hi).map_err(Self::at("model.lower")),
            (None, None) => Region::cube(m.dim, m.side).map_err(Self::at("model.side")),
            _ => Err(config_error("model.upper", "give both lower and upper or neither")),
        }
    }

    pub fn potential(&self) -> Result<PairPotential> {
        let pot = match &self.model.potential {
            PotentialConfig::Ideal => PairPotential::ideal(),
            PotentialConfig::HardSphere { diameter } => {
                PairPotential::hard_sphere(*diameter).map_err(Self::at("model.potential.diameter"))?
            }
            PotentialConfig::Tabulated { path, distance, value } => {
                let table = match path {
                    Some(p) => RadialTable::from_csv(p).map_err(Self::at("model.potential.path"))?,
                    None => RadialTable::new(distance.clone(), value.clone()).map_err(Self::at("model.potential.value"))?,
                };
                PairPotential::tabulated(table).map_err(Self::at("model.potential"))?
            }
        };
        pot.with_beta(self.model.beta).map_err(Self::at("model.beta"))
    }

    pub fn activity(&self) -> Result<Activity> {
        let region = self.region()?;
        match &self.model.activity {
            ActivityConfig::Constant { z } => Activity::constant(*z, region).map_err(Self::at("model.activity.z")),
            ActivityConfig::Piecewise { cells } => {
                let cells = cells
                    .iter()
                    .map(|c| Ok((Region::new(&c.lower, &c.upper)?, c.z)))
                    .collect::<Result<Vec<_>>>()
                    .map_err(Self::at("model.activity.cells"))?;
                Activity::piecewise(cells, region).map_err(Self::at("model.activity.cells"))
            }
        }
    }

    pub fn kernel(&self) -> Result<Kernel> {
        let at = Self::at("model.kernel");
        match &self.model.kernel {
            KernelConfig::Constant { value } => Kernel::constant(*value).map_err(at),
            KernelConfig::SquareWell {
                core,
                core_value,
                range,
                depth,
            } => Kernel::square_well(*core, *core_value, *range, *depth).map_err(at),
            KernelConfig::Gaussian { amplitude, width } => Kernel::gaussian(*amplitude, *width).map_err(at),
            KernelConfig::Tabulated { distance, value } => {
                Ok(Kernel::tabulated(RadialTable::new(distance.clone(), value.clone()).map_err(at)?))
            }
        }
    }

    pub fn points(&self) -> Result<Vec<Point>> {
        let dim = self.model.dim;
        self.numeric
            .points
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if c.len() != dim {
                    return Err(config_error(
                        &format!("numeric.points[{i}]"),
                        format!("expected {dim} coordinates"),
                    ));
                }
                Point::new(c).map_err(|e| config_error(&format!("numeric.points[{i}]"), e.to_string()))
            })
            .collect()
    }
}

/// JSON report plus an optional CSV series.
pub struct Output {
    pub result: Value,
    pub csv: Option<(Vec<String>, Vec<Vec<String>>)>,
}

impl Output {
    fn json(result: Value) -> Self {
        Output { result, csv: None }
    }

    fn with_csv(mut self, header: &[&str], rows: Vec<Vec<String>>) -> Self {
        self.csv = Some((header.iter().map(|s| s.to_string()).collect(), rows));
        self
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Model(_) | Error::Contract(_) | Error::Unsupported(_) => EXIT_CONFIG,
        Error::SizeLimit { .. } => EXIT_SIZE_LIMIT,
        Error::TailTooLarge { .. } => EXIT_TAIL,
        Error::Io(_) => EXIT_FAILURE,
    }
}

/// Structured form of an error for the error stream.
pub fn error_json(e: &Error) -> Value {
    let mut v = json!({
        "schema_version": SCHEMA_VERSION,
        "error": e.kind(),
        "message": e.to_string(),
        "exit_code": exit_code(e),
    });
    match e {
        Error::Config { path, .. } => v["path"] = json!(path),
        Error::SizeLimit { what, value, cap } => v["limit"] = json!({"what": what, "value": value, "cap": cap}),
        Error::TailTooLarge { required, .. } => v["required"] = json!(required),
        _ => {}
    }
    v
}

fn report_json(command: &str, config: &RunConfig, result: Value) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": to_value(config),
        "result": result,
    })
}

fn write_outputs(command: &str, config: &RunConfig, out: &Output) -> Result<()> {
    let report = report_json(command, config, out.result.clone());
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.into()))?;
    match &config.output.dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(format!("{command}.json")), text + "\n")?;
            if let (true, Some((header, rows))) = (config.output.csv, &out.csv) {
                let mut w = csv::Writer::from_path(dir.join(format!("{command}.csv"))).map_err(csv_io)?;
                w.write_record(header).map_err(csv_io)?;
                for r in rows {
                    w.write_record(r).map_err(csv_io)?;
                }
                w.flush()?;
            }
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn enumerate(cfg: &RunConfig) -> Result<Output> {
    let nm = &cfg.numeric;
    let force = nm.force_size_limits;
    let (n, k, m) = (nm.n, nm.k, nm.m);
    let (count, items): (u64, Vec<String>) = match nm.family {
        Family::All => graphs(all_graphs_with(n, force)?, nm.list),
        Family::Connected => graphs(connected_graphs_with(n, force)?, nm.list),
        Family::Multirooted => graphs(multirooted_graphs_with(k, n, force)?, nm.list),
        Family::Trees => graphs(trees_with(n, nm.rooted, force)?.map(|t| t.graph), nm.list),
        Family::Partitions => listed(partitions_with(n, force)?.map(|p| format!("{:?}", p.blocks())), nm.list),
        Family::Multigraphs => listed(all_multigraphs(n, m)?.map(|g| format!("{:?}", g.pair_indices())), nm.list),
        Family::SpanningMultigraphs => {
            listed(spanning_multigraphs_with(n, m, force)?.map(|g| format!("{:?}", g.pair_indices())), nm.list)
        }
        Family::ConnectedMultigraphs => {
            listed(connected_multigraphs_with(n, m, force)?.map(|g| format!("{:?}", g.pair_indices())), nm.list)
        }
        Family::PartitionPairs => listed(nonflat_connected_pairs(m)?.into_iter().map(|s| format!("{:?}", s.blocks())), nm.list),
    };
    let rows = items.iter().enumerate().map(|(i, s)| vec![i.to_string(), s.clone()]).collect();
    Ok(Output::json(json!({"family": to_value(&nm.family), "n": n, "k": k, "m": m, "count": count})).with_csv(&["index", "item"], rows))
}

fn graphs(it: impl Iterator<Item = crate::combinat::Graph>, list: bool) -> (u64, Vec<String>) {
    listed(it.map(|g| format!("{:#x}", g.edge_bits())), list)
}

fn listed(it: impl Iterator<Item = String>, list: bool) -> (u64, Vec<String>) {
    let mut count = 0;
    let mut items = Vec::new();
    for s in it {
        count += 1;
        if list {
            items.push(s);
        }
    }
    (count, items)
}

fn ursell_cmd(cfg: &RunConfig) -> Result<Output> {
    let pot = cfg.potential()?;
    let pts = cfg.points()?;
    if pts.is_empty() {
        return Err(config_error("numeric.points", "need at least one point"));
    }
    let phi = ursell(&pot, &pts)?;
    let k = cfg.numeric.k.clamp(1, pts.len());
    let ps = psi(&pot, k, &pts)?;
    Ok(Output::json(json!({
        "n": pts.len(),
        "ursell": phi.value,
        "ursell_terms": phi.terms,
        "k": k,
        "psi": ps.value,
        "psi_terms": ps.terms,
    })))
}

fn expand(cfg: &RunConfig) -> Result<Output> {
    let pot = cfg.potential()?;
    let act = cfg.activity()?;
    let plan = cfg.plan();
    let nm = &cfg.numeric;
    let pts = cfg.points()?;
    let need_points = || {
        if pts.is_empty() {
            Err(config_error("numeric.points", "this quantity needs at least one point"))
        } else {
            Ok(())
        }
    };
    let report = match nm.quantity {
        Quantity::LogXi => log_partition_expansion(&pot, &act, nm.order, &plan)?,
        Quantity::Rho => {
            need_points()?;
            correlation_expansion(&pot, &act, &pts, nm.order, &plan)?
        }
        Quantity::RhoTruncated => {
            need_points()?;
            truncated_expansion(&pot, &act, &pts, nm.order, &plan)?
        }
        Quantity::LogLaplace => {
            let h = nm.h;
            log_laplace_expansion(&pot, &act, &move |_| h, nm.order, nm.t, &plan).map_err(RunConfig::at("numeric.h"))?
        }
        Quantity::Janossy => {
            let oracle = FiniteVolumeOracle::new(&pot, &act, nm.order, &plan, nm.tol)?;
            let j = janossy_from_correlations(&pot, &act, &oracle, act.domain(), &pts, nm.order, &plan, nm.tol)?;
            return Ok(Output::json(json!({
                "quantity": to_value(&Quantity::Janossy),
                "points": pts.len(),
                "value": j.mean,
                "std_error": j.std_error,
                "samples": j.samples,
            })));
        }
    };
    let rows = report
        .orders
        .iter()
        .map(|o| vec![o.order.to_string(), o.estimate.mean.to_string(), o.estimate.std_error.to_string()])
        .collect();
    Ok(Output::json(to_value(&report)).with_csv(&["order", "mean", "std_error"], rows))
}

fn converge(cfg: &RunConfig) -> Result<Output> {
    let act = cfg.activity()?;
    let plan = cfg.plan();
    let nm = &cfg.numeric;
    match nm.condition {
        Condition::Kpu | Condition::Fp => {
            let pot = cfg.potential()?;
            let checker = if nm.condition == Condition::Kpu {
                Checker::Kpu
            } else {
                Checker::Fp { kmax: nm.kmax }
            };
            let best = optimize_witness(&pot, &act, nm.t, checker, &default_grid(), &plan)?;
            let at = match nm.a {
                Some(a) if nm.condition == Condition::Kpu => Some(check_kpu(&pot, &act, nm.t, a, &plan)?),
                Some(a) => Some(check_fp(&pot, &act, nm.t, a, nm.kmax, &plan)?),
                None => None,
            };
            Ok(Output::json(json!({
                "certificate": to_value(&best),
                "critical_z": best.critical_z,
                "critical_zb": best.critical_zb(),
                "at_witness": at.as_ref().map(to_value),
            })))
        }
        Condition::Py => {
            let kernel = cfg.kernel()?;
            let b = nm.stability;
            let cert = check_py(&kernel, &act, &move |_| b, nm.a.unwrap_or(1.0), &plan)?;
            Ok(Output::json(json!({"certificate": to_value(&cert), "critical_z": Value::Null})))
        }
    }
}

fn branching(cfg: &RunConfig) -> Result<Output> {
    let spec = BranchingSpec::new(&cfg.potential()?, &cfg.activity()?)?;
    let nm = &cfg.numeric;
    let plan = cfg.plan();
    let method = match nm.method {
        Method::FixedPoint => ExtinctionMethod::FixedPoint { iterations: nm.iterations },
        Method::Simulation => ExtinctionMethod::Simulation { trials: nm.trials },
    };
    let ext = extinction_probability(&spec, method, &plan)?;
    let gf = total_progeny_gf(spec.b, nm.borel_terms.max(1))?;
    let rows = (1..=nm.borel_terms)
        .map(|n| vec![n.to_string(), borel_pmf(spec.b, n).to_string()])
        .collect();
    Ok(Output::json(json!({
        "mean_offspring": spec.b,
        "extinction": to_value(&ext),
        "bisection_root": extinction_root(spec.b),
        "borel_mass": borel_mass(spec.b, 5_000),
        "progeny_gf": to_value(&gf),
    }))
    .with_csv(&["n", "borel_pmf"], rows))
}

fn rcm(cfg: &RunConfig) -> Result<Output> {
    let act = cfg.activity()?;
    let spec = BranchingSpec::new(&cfg.potential()?, &act)?;
    let pts = cfg.points()?;
    let q = pts.first().copied().unwrap_or_else(|| act.domain().center());
    let nm = &cfg.numeric;
    let r = rcm_cluster(&spec, &q, nm.trials, nm.node_cap, &cfg.plan())?;
    let stat = borel_domination_statistic(&r, spec.b);
    let rows = r.histogram.iter().map(|(s, c)| vec![s.to_string(), c.to_string()]).collect();
    Ok(Output::json(json!({
        "report": to_value(&r),
        "borel_domination_statistic": stat,
        "critical_value_0_01": one_sided_critical(0.01, r.trials),
    }))
    .with_csv(&["size", "count"], rows))
}

fn cumulants_cmd(cfg: &RunConfig) -> Result<Output> {
    let kernel = cfg.kernel()?;
    let act = cfg.activity()?;
    let plan = cfg.plan();
    let nm = &cfg.numeric;
    let m = nm.m;
    let moment = moment_multigraph(&kernel, &act, m, &plan)?;
    let mg = cumulant_multigraph(&kernel, &act, m, &plan)?;
    let pp = cumulant_partition_pairs(&kernel, &act, m, &plan)?;
    let full = mg.to_full_scale();
    let mut result = json!({
        "m": m,
        "moment_half": to_value(&moment),
        "cumulant_multigraph_half": to_value(&mg),
        "cumulant_multigraph_full": full.value,
        "cumulant_partition_pairs": to_value(&pp),
        "cross_form_delta": pp.value - full.value,
        "restriction": "bounded kernels with finite integrals over the box",
    });
    if let (KernelKind::Constant(c), Some(mass)) = (kernel.kind(), act.exact_mass()) {
        let k = poisson_pair_cumulants(mass, m)[m - 1] * c.powi(m as i32);
        let mo = poisson_pair_moments(mass, m)[m - 1] * (c / 2.0).powi(m as i32);
        result["poisson_oracle"] = json!({
            "cumulant": k,
            "cumulant_delta": pp.value - k,
            "moment_half": mo,
            "moment_delta": moment.value - mo,
        });
    }
    if nm.empirical_trials > 0 {
        if nm.empirical_trials < MIN_TRIALS {
            return Err(config_error("numeric.empirical_trials", format!("need at least {MIN_TRIALS}")));
        }
        result["empirical"] = to_value(&empirical_cumulants(&kernel, &act, m, nm.empirical_trials, &plan)?);
    }
    let rows = pp
        .per_n
        .iter()
        .map(|(n, e)| vec![n.to_string(), full.contribution(*n).to_string(), e.mean.to_string(), e.std_error.to_string()])
        .collect();
    Ok(Output::json(result).with_csv(&["n", "multigraph_full", "partition_pairs", "std_error"], rows))
}

fn oracle_cmd(cfg: &RunConfig) -> Result<Output> {
    let nm = &cfg.numeric;
    let v = match nm.oracle {
        OracleKind::Tonks => {
            let sigma = match cfg.potential()?.hard_sphere_diameter() {
                Some(d) => d,
                None => return Err(config_error("model.potential", "the Tonks oracle needs hard rods")),
            };
            let act = cfg.activity()?;
            let z = act
                .constant_value()
                .ok_or_else(|| config_error("model.activity", "the Tonks oracle needs a constant activity"))?;
            if cfg.model.dim != 1 {
                return Err(config_error("model.dim", "the Tonks oracle is one-dimensional"));
            }
            let xi = tonks_xi(z, sigma, act.domain().side(0));
            json!({"oracle": "tonks", "xi": xi, "log_xi": xi.ln()})
        }
        OracleKind::Poisson => {
            let act = cfg.activity()?;
            let mu = act
                .exact_mass()
                .ok_or_else(|| config_error("model.activity", "needs a closed-form mass"))?;
            json!({
                "oracle": "poisson",
                "mass": mu,
                "pair_moments": poisson_pair_moments(mu, nm.m),
                "pair_cumulants": poisson_pair_cumulants(mu, nm.m),
            })
        }
        OracleKind::Extinction => json!({"oracle": "extinction", "bz": nm.bz, "root": extinction_root(nm.bz)}),
        OracleKind::Borel => {
            let pmf: Vec<f64> = (1..=nm.borel_terms).map(|n| borel_pmf(nm.bz, n)).collect();
            json!({"oracle": "borel", "bz": nm.bz, "pmf": pmf, "mass": borel_mass(nm.bz, 5_000)})
        }
    };
    Ok(Output::json(v))
}

fn verify_cmd(cfg: &RunConfig, suite: &str) -> std::result::Result<i32, Error> {
    let suite: Suite = suite.parse()?;
    let opts = VerifyOptions {
        seed: cfg.numeric.seed,
        workers: cfg.numeric.workers,
        fp_samples: cfg.numeric.fp_samples,
        samples: cfg.numeric.samples,
    };
    let criteria = run_suite(suite, &opts);
    print!("{}", render_table(&criteria));
    let all = criteria.iter().all(|c| c.passed());
    if cfg.output.dir.is_some() {
        let out = Output::json(json!({"suite": suite.name(), "passed": all, "criteria": to_value(&criteria)}));
        write_outputs("verify", cfg, &out)?;
    }
    Ok(if all { EXIT_OK } else { EXIT_FAILURE })
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_flags(cli);
    if cfg.numeric.workers == 0 {
        return Err(config_error("numeric.workers", "need at least one worker"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.numeric.workers)
        .build()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    log::info!("{} with seed {} and {} workers", cli.command.name(), cfg.numeric.seed, cfg.numeric.workers);
    pool.install(|| {
        let out = match &cli.command {
            Command::Verify { suite } => return verify_cmd(&cfg, suite),
            Command::Enumerate => enumerate(&cfg)?,
            Command::Ursell => ursell_cmd(&cfg)?,
            Command::Expand => expand(&cfg)?,
            Command::Converge => converge(&cfg)?,
            Command::Branching => branching(&cfg)?,
            Command::Rcm => rcm(&cfg)?,
            Command::Cumulants => cumulants_cmd(&cfg)?,
            Command::Oracle => oracle_cmd(&cfg)?,
        };
        write_outputs(cli.command.name(), &cfg, &out)?;
        Ok(EXIT_OK)
    })
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("MAYERKIT_LOG", "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn bad_potential_kind_names_the_field() {
        let err = RunConfig::from_toml("[model.potential]\nkind = \"lennard_jones\"\n").unwrap_err();
        match err {
            Error::Config { path, .. } => assert!(path.starts_with("model.potential"), "{path}"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_field_is_rejected() {
        let err = RunConfig::from_toml("[numeric]\nsampels = 10\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path.starts_with("numeric")), "{err}");
    }

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(exit_code(&config_error("x", "y")), EXIT_CONFIG);
        assert_eq!(
            exit_code(&Error::SizeLimit {
                what: "n",
                value: 9,
                cap: 8
            }),
            EXIT_SIZE_LIMIT
        );
        assert_eq!(
            exit_code(&Error::TailTooLarge {
                required: 3,
                detail: String::new()
            }),
            EXIT_TAIL
        );
    }
}
