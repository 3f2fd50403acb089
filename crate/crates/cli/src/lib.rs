//! Batch front end: every subcommand reads a panel (CSV files or a
//! synthetic scenario), builds the design matrix and writes CSV figure
//! data into the output directory.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use powerforest::baselines::{fit_ar1_design, fit_ols_design, write_fit_summary};
use powerforest::conf;
use powerforest::forest::{write_importance_csv, SamplingMode};
use powerforest::pipeline::{
    build_design_from_raw, convert_to_eur, fill_gaps_with, ingest_csv, rolling_mean, FillPolicy,
    DEFAULT_MIN_ROWS, MONTH, SOURCE_VARIABLES,
};
use powerforest::report::{rmse_grid, DEFAULT_MIN_NODE_SIZES, DEFAULT_TREE_COUNTS};
use powerforest::synth::generate;
use powerforest::{
    DailyPanel, DesignMatrix, Error, FeatureSpec, ForestModel, GridAxis, Hyperparameters, Result,
    ScenarioSpec, Target,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const CURVE_CHECKPOINTS: [usize; 9] = [1, 5, 10, 25, 50, 100, 250, 500, 1000];
pub const BENCHMARK_MIN_NODE: usize = 10;
pub const BENCHMARK_TREES: usize = 1000;

#[derive(Debug, Parser)]
#[command(
    name = "powerforest",
    version,
    about = "Random-forest analysis of electricity price drivers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandName {
    Ingest,
    Features,
    Table1,
    Importance,
    Pdp,
    Curve,
    Synth,
    Baselines,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Align and clean the input panel; also write 22-day rolling means.
    Ingest(RunArgs),
    /// Write the design matrix for each target.
    Features(RunArgs),
    /// RMSE grid over min-node size and tree count.
    Table1(RunArgs),
    /// Normalized importances per date range.
    Importance(RunArgs),
    /// Two-feature partial grid.
    Pdp(RunArgs),
    /// Out-of-bag error against number of trees.
    Curve(RunArgs),
    /// Generate a synthetic panel in the ingest format.
    Synth(RunArgs),
    /// AR(1) and OLS fit summaries.
    Baselines(RunArgs),
}

impl Command {
    pub fn split(self) -> (CommandName, RunArgs) {
        match self {
            Command::Ingest(a) => (CommandName::Ingest, a),
            Command::Features(a) => (CommandName::Features, a),
            Command::Table1(a) => (CommandName::Table1, a),
            Command::Importance(a) => (CommandName::Importance, a),
            Command::Pdp(a) => (CommandName::Pdp, a),
            Command::Curve(a) => (CommandName::Curve, a),
            Command::Synth(a) => (CommandName::Synth, a),
            Command::Baselines(a) => (CommandName::Baselines, a),
        }
    }
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::Ingest => "ingest",
            CommandName::Features => "features",
            CommandName::Table1 => "table1",
            CommandName::Importance => "importance",
            CommandName::Pdp => "pdp",
            CommandName::Curve => "curve",
            CommandName::Synth => "synth",
            CommandName::Baselines => "baselines",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Base,
    Peak,
    Both,
}

/// Command-line flags; every field is optional so that defaults, flags and
/// the config file can be layered.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Daily CSV input; repeat to merge files with disjoint columns.
    #[arg(long)]
    pub input: Vec<PathBuf>,
    /// Scenario config for a synthetic panel, or `default`.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long, value_enum)]
    pub target: Option<TargetArg>,
    /// First design date kept (inclusive).
    #[arg(long)]
    pub from: Option<NaiveDate>,
    /// Last design date kept (inclusive).
    #[arg(long)]
    pub to: Option<NaiveDate>,
    /// Tree counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub trees: Vec<usize>,
    /// Minimum rows of a splittable node, comma separated.
    #[arg(long = "min-node", value_delimiter = ',')]
    pub min_node: Vec<usize>,
    /// Candidate features per split (default p/3).
    #[arg(long)]
    pub mtry: Option<usize>,
    #[arg(long)]
    pub sampling: Option<SamplingMode>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// `key = value` file overriding the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Per-predictor transform overrides.
    #[arg(long = "feature-spec")]
    pub feature_spec: Option<PathBuf>,
    /// Date ranges for `importance`: `full`, `since-YYYY`, `FROM..TO`.
    #[arg(long, value_delimiter = ',')]
    pub ranges: Vec<String>,
    #[arg(long = "feature-a")]
    pub feature_a: Option<String>,
    #[arg(long = "feature-b")]
    pub feature_b: Option<String>,
    /// Grid points per axis for `pdp`.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Files(Vec<PathBuf>),
    Scenario(ScenarioSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DateRange {
    pub label: String,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
}

impl std::str::FromStr for DateRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("invalid date range `{s}`"));
        let date = |d: &str| -> Result<Option<NaiveDate>> {
            if d.is_empty() {
                Ok(None)
            } else {
                d.parse().map(Some).map_err(|_| bad())
            }
        };
        let label = s.to_string();
        if s == "full" {
            return Ok(DateRange {
                label,
                from: None,
                to: None,
            });
        }
        if let Some(year) = s.strip_prefix("since-") {
            let y: i32 = year.parse().map_err(|_| bad())?;
            let from = NaiveDate::from_ymd_opt(y, 1, 1).ok_or_else(bad)?;
            return Ok(DateRange {
                label,
                from: Some(from),
                to: None,
            });
        }
        let (a, b) = s.split_once("..").ok_or_else(bad)?;
        Ok(DateRange {
            label,
            from: date(a)?,
            to: date(b)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: Source,
    pub targets: Vec<Target>,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    pub min_node_sizes: Option<Vec<usize>>,
    pub tree_counts: Option<Vec<usize>>,
    pub mtry: Option<usize>,
    pub sampling: SamplingMode,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: usize,
    pub features: FeatureSpec,
    pub ranges: Vec<DateRange>,
    pub feature_a: String,
    pub feature_b: String,
    pub grid: usize,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("invalid `{key}` entry `{v}`")))
        })
        .collect()
}

fn scenario(value: &str) -> Result<ScenarioSpec> {
    if value == "default" {
        Ok(ScenarioSpec::default())
    } else {
        ScenarioSpec::from_file(Path::new(value))
    }
}

fn targets(t: TargetArg) -> Vec<Target> {
    match t {
        TargetArg::Base => vec![Target::Base],
        TargetArg::Peak => vec![Target::Peak],
        TargetArg::Both => vec![Target::Base, Target::Peak],
    }
}

impl RunConfig {
    /// Defaults, overridden by flags, overridden by `--config`.
    pub fn resolve(args: &RunArgs, command: CommandName) -> Result<Self> {
        let mut inputs = args.input.clone();
        let mut scenario_arg = args.scenario.clone();
        let mut target = args.target.unwrap_or(TargetArg::Both);
        let mut from = args.from;
        let mut to = args.to;
        let mut trees = (!args.trees.is_empty()).then(|| args.trees.clone());
        let mut min_node = (!args.min_node.is_empty()).then(|| args.min_node.clone());
        let mut mtry = args.mtry;
        let mut sampling = args.sampling.unwrap_or_default();
        let mut seed = args.seed.unwrap_or(42);
        let mut out = args.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        let mut workers = args.workers.unwrap_or_else(default_workers);
        let mut feature_spec = args.feature_spec.clone();
        let mut ranges = args.ranges.clone();
        let mut feature_a = args.feature_a.clone().unwrap_or_else(|| "permit".into());
        let mut feature_b = args.feature_b.clone().unwrap_or_else(|| "natgas".into());
        let mut grid = args
            .grid
            .unwrap_or(powerforest::forest::DEFAULT_GRID_POINTS);

        if let Some(path) = &args.config {
            for e in conf::read(path)? {
                let v = e.value.as_str();
                match e.key.as_str() {
                    "input" => inputs = list(&e.key, v)?,
                    "scenario" => scenario_arg = Some(v.to_string()),
                    "target" => {
                        target = TargetArg::from_str(v, true)
                            .map_err(|_| Error::Config(format!("invalid target `{v}`")))?
                    }
                    "from" => from = Some(e.parse_value()?),
                    "to" => to = Some(e.parse_value()?),
                    "trees" => trees = Some(list(&e.key, v)?),
                    "min-node" => min_node = Some(list(&e.key, v)?),
                    "mtry" => mtry = Some(e.parse_value()?),
                    "sampling" => sampling = e.parse_value()?,
                    "seed" => seed = e.parse_value()?,
                    "out" => out = PathBuf::from(v),
                    "workers" => workers = e.parse_value()?,
                    "feature-spec" => feature_spec = Some(PathBuf::from(v)),
                    "ranges" => ranges = list(&e.key, v)?,
                    "feature-a" => feature_a = v.to_string(),
                    "feature-b" => feature_b = v.to_string(),
                    "grid" => grid = e.parse_value()?,
                    k => {
                        return Err(Error::Config(format!(
                            "{}: line {}: unknown key `{k}`",
                            path.display(),
                            e.line
                        )))
                    }
                }
            }
        }

        let source = match (inputs.is_empty(), scenario_arg) {
            (false, None) => Source::Files(inputs),
            (true, Some(s)) => Source::Scenario(scenario(&s)?),
            (true, None) if command == CommandName::Synth => {
                Source::Scenario(ScenarioSpec::default())
            }
            (true, None) => {
                return Err(Error::Config(
                    "one of --input or --scenario is required".into(),
                ))
            }
            (false, Some(_)) => {
                return Err(Error::Config("--input and --scenario are exclusive".into()))
            }
        };
        let features = match feature_spec {
            Some(p) => FeatureSpec::from_file(&p)?,
            None => FeatureSpec::default(),
        };
        let ranges = if ranges.is_empty() {
            vec!["full".into(), "since-2017".into(), "since-2021".into()]
        } else {
            ranges
        };
        let cfg = RunConfig {
            source,
            targets: targets(target),
            from,
            to,
            min_node_sizes: min_node,
            tree_counts: trees,
            mtry,
            sampling,
            seed,
            out,
            workers,
            features,
            ranges: ranges.iter().map(|r| r.parse()).collect::<Result<_>>()?,
            feature_a,
            feature_b,
            grid,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let (Some(f), Some(t)) = (self.from, self.to) {
            if f >= t {
                return Err(Error::Config(format!("--from {f} must precede --to {t}")));
            }
        }
        for (name, l) in [
            ("trees", &self.tree_counts),
            ("min-node", &self.min_node_sizes),
        ] {
            if let Some(l) = l {
                if l.is_empty() {
                    return Err(Error::Config(format!("--{name} list is empty")));
                }
            }
        }
        if self.tree_counts.as_ref().is_some_and(|l| l.contains(&0)) {
            return Err(Error::Config("tree counts must be positive".into()));
        }
        if self
            .min_node_sizes
            .as_ref()
            .is_some_and(|l| l.iter().any(|&m| m < 2))
        {
            return Err(Error::Config("min-node sizes must be at least 2".into()));
        }
        if self.grid == 0 {
            return Err(Error::Config("--grid must be positive".into()));
        }
        if self.mtry.is_some_and(|m| m == 0 || m > 12) {
            return Err(Error::Config("--mtry must lie in 1..=12".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("--workers must be positive".into()));
        }
        Ok(())
    }

    /// Canonical text of everything that can change an output byte.
    pub fn canonical(&self) -> Result<String> {
        let mut s = String::new();
        match &self.source {
            Source::Files(paths) => {
                for p in paths {
                    let bytes = std::fs::read(p)?;
                    writeln!(s, "input = {}", hex(&Sha256::digest(&bytes))).unwrap();
                }
            }
            Source::Scenario(spec) => s.push_str(&spec.to_config_string()),
        }
        let targets: Vec<&str> = self.targets.iter().map(|t| t.as_str()).collect();
        let opt = |d: Option<NaiveDate>| d.map(|d| d.to_string()).unwrap_or_default();
        let nums = |l: &Option<Vec<usize>>| {
            l.as_ref()
                .map(|l| {
                    l.iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .unwrap_or_default()
        };
        writeln!(s, "target = {}", targets.join(",")).unwrap();
        writeln!(s, "from = {}\nto = {}", opt(self.from), opt(self.to)).unwrap();
        writeln!(
            s,
            "trees = {}\nmin-node = {}",
            nums(&self.tree_counts),
            nums(&self.min_node_sizes)
        )
        .unwrap();
        writeln!(
            s,
            "mtry = {:?}\nsampling = {}\nseed = {}",
            self.mtry, self.sampling, self.seed
        )
        .unwrap();
        s.push_str(&self.features.to_config_string());
        let labels: Vec<&str> = self.ranges.iter().map(|r| r.label.as_str()).collect();
        writeln!(s, "ranges = {}", labels.join(",")).unwrap();
        writeln!(
            s,
            "pdp = {} {} {}",
            self.feature_a, self.feature_b, self.grid
        )
        .unwrap();
        Ok(s)
    }

    /// First 16 hex digits of the SHA-256 of [`canonical`](Self::canonical);
    /// output directory and worker count are excluded.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.canonical()?.as_bytes());
        Ok(hex(&digest[..8]))
    }

    fn single(&self, list: &Option<Vec<usize>>, flag: &str, default: usize) -> Result<usize> {
        match list.as_deref() {
            None => Ok(default),
            Some([v]) => Ok(*v),
            Some(_) => Err(Error::Config(format!(
                "this command takes a single --{flag} value"
            ))),
        }
    }

    /// Hyperparameters for commands that fit one forest.
    pub fn hyperparameters(&self) -> Result<Hyperparameters> {
        Ok(Hyperparameters {
            n_trees: self.single(&self.tree_counts, "trees", BENCHMARK_TREES)?,
            min_node_size: self.single(&self.min_node_sizes, "min-node", BENCHMARK_MIN_NODE)?,
            features_per_split: self.mtry,
            sampling: self.sampling,
            seed: self.seed,
            max_depth: None,
        })
    }
}

pub fn load_panel(cfg: &RunConfig) -> Result<DailyPanel> {
    match &cfg.source {
        Source::Scenario(spec) => generate(spec),
        Source::Files(paths) => {
            let mut panel: Option<DailyPanel> = None;
            for p in paths {
                let next = ingest_csv(p, &SOURCE_VARIABLES)?;
                log::info!(
                    "{}: {} working days, {} variables",
                    p.display(),
                    next.len(),
                    next.variables().len()
                );
                panel = Some(match panel {
                    None => next,
                    Some(acc) => acc.merge(&next)?,
                });
            }
            panel.ok_or_else(|| Error::Config("no input files".into()))
        }
    }
}

/// Design matrix with features computed on the full panel, then restricted
/// to the configured dates (and `range`, if any).
pub fn design_for(
    cfg: &RunConfig,
    panel: &DailyPanel,
    target: Target,
    range: Option<&DateRange>,
) -> Result<DesignMatrix> {
    let full = build_design_from_raw(panel, &cfg.features, target, 1)?;
    let later = |a: Option<NaiveDate>, b: Option<NaiveDate>| a.max(b);
    let earlier = |a: Option<NaiveDate>, b: Option<NaiveDate>| match (a, b) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let (from, to) = match range {
        Some(r) => (later(cfg.from, r.from), earlier(cfg.to, r.to)),
        None => (cfg.from, cfg.to),
    };
    let d = full.restrict(from, to);
    if d.len() < DEFAULT_MIN_ROWS {
        let what = match range {
            Some(r) => format!("design rows in range `{}`", r.label),
            None => "design rows after date filter".into(),
        };
        return Err(Error::InsufficientData {
            what,
            needed: DEFAULT_MIN_ROWS,
            got: d.len(),
        });
    }
    Ok(d)
}

struct Output {
    dir: PathBuf,
    header: String,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(cfg: &RunConfig, command: CommandName) -> Result<Self> {
        std::fs::create_dir_all(&cfg.out)?;
        Ok(Output {
            dir: cfg.out.clone(),
            header: format!(
                "# powerforest {VERSION} command={} config={}\n",
                command.as_str(),
                cfg.hash()?
            ),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        w.write_all(self.header.as_bytes())?;
        body(&mut w)?;
        w.flush()?;
        log::info!("wrote {}", path.display());
        self.written.push(path);
        Ok(())
    }
}

/// Runs `command` on a pool of `cfg.workers` threads and returns the files
/// written.
pub fn run(command: CommandName, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    powerforest::forest::with_workers(cfg.workers, || match command {
        CommandName::Ingest => cmd_ingest(cfg),
        CommandName::Features => cmd_features(cfg),
        CommandName::Table1 => cmd_table1(cfg),
        CommandName::Importance => cmd_importance(cfg),
        CommandName::Pdp => cmd_pdp(cfg),
        CommandName::Curve => cmd_curve(cfg),
        CommandName::Synth => cmd_synth(cfg),
        CommandName::Baselines => cmd_baselines(cfg),
    })?
}

pub fn cmd_ingest(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let raw = load_panel(cfg)?;
    let filled = fill_gaps_with(&raw, |name| {
        cfg.features
            .fill_for(name)
            .unwrap_or(FillPolicy::ForwardFill)
    })?;
    let dollars: Vec<&str> = cfg
        .features
        .dollar_sources()
        .into_iter()
        .filter(|v| filled.has(v))
        .collect();
    let panel = if dollars.is_empty() {
        filled
    } else {
        convert_to_eur(&filled, &dollars)?
    };

    let mut smooth = Vec::with_capacity(panel.variables().len());
    for name in panel.variables() {
        let rm = rolling_mean(&panel.dense(name)?, MONTH)?;
        smooth.push((name.clone(), rm));
    }
    let smoothed = DailyPanel::new(
        panel.dates().to_vec(),
        smooth
            .iter()
            .map(|(n, _)| format!("{n}_rm{MONTH}"))
            .collect(),
        smooth.into_iter().map(|(_, c)| c).collect(),
    )?;

    let mut out = Output::new(cfg, CommandName::Ingest)?;
    out.write("panel.csv", |w| {
        panel.filter_dates(cfg.from, cfg.to).write_csv(w)
    })?;
    out.write("rolling_means.csv", |w| {
        smoothed.filter_dates(cfg.from, cfg.to).write_csv(w)
    })?;
    Ok(out.written)
}

pub fn cmd_features(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let panel = load_panel(cfg)?;
    let mut out = Output::new(cfg, CommandName::Features)?;
    for &t in &cfg.targets {
        let d = design_for(cfg, &panel, t, None)?;
        out.write(&format!("design_{t}.csv"), |w| d.write_csv(w))?;
    }
    Ok(out.written)
}

pub fn cmd_table1(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let panel = load_panel(cfg)?;
    let min_nodes = cfg
        .min_node_sizes
        .clone()
        .unwrap_or_else(|| DEFAULT_MIN_NODE_SIZES.to_vec());
    let trees = cfg
        .tree_counts
        .clone()
        .unwrap_or_else(|| DEFAULT_TREE_COUNTS.to_vec());
    let base = Hyperparameters {
        features_per_split: cfg.mtry,
        sampling: cfg.sampling,
        seed: cfg.seed,
        ..Default::default()
    };
    let mut out = Output::new(cfg, CommandName::Table1)?;
    for &t in &cfg.targets {
        let d = design_for(cfg, &panel, t, None)?;
        let grid = rmse_grid(&d, &min_nodes, &trees, &base)?;
        out.write(&format!("table1_{t}.csv"), |w| grid.write_csv(w))?;
    }
    Ok(out.written)
}

pub fn cmd_importance(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let panel = load_panel(cfg)?;
    let hyper = cfg.hyperparameters()?;
    let mut out = Output::new(cfg, CommandName::Importance)?;
    for &t in &cfg.targets {
        let mut rows = Vec::with_capacity(cfg.ranges.len());
        for r in &cfg.ranges {
            let d = design_for(cfg, &panel, t, Some(r))?;
            let imp = ForestModel::fit_design(&d, &hyper)?.importance()?;
            rows.push((r.label.clone(), imp));
        }
        out.write(&format!("importance_{t}.csv"), |w| {
            write_importance_csv(w, "range", &rows)
        })?;
    }
    Ok(out.written)
}

pub fn cmd_pdp(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let panel = load_panel(cfg)?;
    let hyper = cfg.hyperparameters()?;
    let mut out = Output::new(cfg, CommandName::Pdp)?;
    for &t in &cfg.targets {
        let d = design_for(cfg, &panel, t, None)?;
        for name in [&cfg.feature_a, &cfg.feature_b] {
            if !d.feature_names.contains(name) {
                return Err(Error::Config(format!(
                    "unknown feature `{name}`; valid names: {}",
                    d.feature_names.join(", ")
                )));
            }
        }
        let model = ForestModel::fit_design(&d, &hyper)?;
        let axis = GridAxis::Uniform(cfg.grid);
        let g = model.partial_grid_by_name(&cfg.feature_a, &cfg.feature_b, &axis, &axis)?;
        let name = format!("pdp_{t}_{}_{}.csv", cfg.feature_a, cfg.feature_b);
        out.write(&name, |w| g.write_csv(w))?;
    }
    Ok(out.written)
}

pub fn curve_checkpoints(n_trees: usize) -> Vec<usize> {
    CURVE_CHECKPOINTS
        .iter()
        .copied()
        .filter(|&k| k <= n_trees)
        .collect()
}

pub fn cmd_curve(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let panel = load_panel(cfg)?;
    let hyper = cfg.hyperparameters()?;
    let mut out = Output::new(cfg, CommandName::Curve)?;
    for &t in &cfg.targets {
        let d = design_for(cfg, &panel, t, None)?;
        let model = ForestModel::fit_design(&d, &hyper)?;
        let curve = model.error_curve(&d, &curve_checkpoints(hyper.n_trees))?;
        out.write(&format!("curve_{t}.csv"), |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(["n_trees", "oob_mse"])?;
            for (k, mse) in &curve {
                c.write_record([k.to_string(), format!("{mse:.8}")])?;
            }
            c.flush()?;
            Ok(())
        })?;
    }
    Ok(out.written)
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let Source::Scenario(spec) = &cfg.source else {
        return Err(Error::Config(
            "synth needs --scenario (or none for the default)".into(),
        ));
    };
    let panel = generate(spec)?;
    let mut out = Output::new(cfg, CommandName::Synth)?;
    out.write("synthetic.csv", |w| panel.write_csv(w))?;
    out.write("scenario.conf", |w| {
        Ok(w.write_all(spec.to_config_string().as_bytes())?)
    })?;
    Ok(out.written)
}

pub fn cmd_baselines(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let panel = load_panel(cfg)?;
    let mut out = Output::new(cfg, CommandName::Baselines)?;
    for &t in &cfg.targets {
        let d = design_for(cfg, &panel, t, None)?;
        let ar1 = fit_ar1_design(&d)?;
        let ols = fit_ols_design(&d)?;
        out.write(&format!("baselines_{t}.csv"), |w| {
            write_fit_summary(w, &[("ar1", &ar1), ("ols", &ols)])
        })?;
    }
    Ok(out.written)
}

/// Process exit code for an error: 2 config, 3 data, 4 numerical.
pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        powerforest::error::ErrorKind::Config => 2,
        powerforest::error::ErrorKind::Data => 3,
        powerforest::error::ErrorKind::Numerical => 4,
    }
}
