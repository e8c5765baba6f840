//! `gradate` command line: covariate-shift splits, dataset distances and
//! training-set selection.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numerical failure.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gradate_core::gdd::{gdd_from_cost, label_informed_cost, linear_cross_distance, LabelInformedCost};
use gradate_core::great::WeightVector;
use gradate_core::io::{
    covariate_split, dataset_hash, load_dataset, load_tudataset_with, verify_selection, CacheKey, DistanceCache, DomainSplit,
    ShiftProperty, TuOptions,
};
use gradate_core::pipeline::{
    gradate_from_cost, lava_from_cost, prepare, random_select, Method, SelectionConfig, SelectionResult,
};
use gradate_core::{Error, LabeledGraphDataset};
use serde_json::{json, Map, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "gradate", version, about = "Graph dataset distances and training-data selection")]
pub struct Cli {
    /// Worker threads for distance computations (results do not depend on it).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a dataset 60/20/20 after sorting by density or size.
    Split(SplitArgs),
    /// Print the distance between the train and validation parts of a split.
    Gdd(GddArgs),
    /// Select a subset of the training part.
    Select(SelectArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Property {
    Density,
    Size,
}

impl From<Property> for ShiftProperty {
    fn from(p: Property) -> Self {
        match p {
            Property::Density => ShiftProperty::Density,
            Property::Size => ShiftProperty::Size,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SolverKind {
    Exact,
    Sinkhorn,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Gradate,
    Lava,
    Random,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Gradate => Method::Gradate,
            MethodArg::Lava => Method::Lava,
            MethodArg::Random => Method::Random,
        }
    }
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// TU directory or native JSON dataset file.
    pub dataset: PathBuf,
    /// Without node attributes, use one-hot node labels as features (TU only).
    #[arg(long)]
    pub node_labels_as_features: bool,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long, value_enum)]
    pub by: Property,
    #[arg(long)]
    pub out: PathBuf,
}

/// Settings shared by `gdd` and `select`; unset flags fall back to the
/// config file, then to defaults.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON file with selection settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub order: Option<u32>,
    /// Weight of the label distance.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Reference graph size (default: median graph size).
    #[arg(long)]
    pub nbar: Option<usize>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverKind>,
    /// Entropic regularization for `--solver sinkhorn`.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Ignore validation labels (forces c = 0).
    #[arg(long)]
    pub no_val_labels: bool,
    /// Keep featureless graphs featureless instead of adding degree features.
    #[arg(long)]
    pub no_degree_features: bool,
    /// Distance cache directory (default: $GRADATE_CACHE_DIR, else a temp dir).
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub no_cache: bool,
}

#[derive(Debug, Args)]
pub struct GddArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long)]
    pub split: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Training weights: a selection file or a JSON array over the training part.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Accept a selection file made on a different training set.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long, value_enum, default_value = "gradate")]
    pub method: MethodArg,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Iteration horizon.
    #[arg(long = "T")]
    pub iterations: Option<usize>,
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Per-iteration CSV (gradate only).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Record the creation time (makes output differ between runs).
    #[arg(long)]
    pub stamp: bool,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> i32 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(Error::NumericalFailure(_) | Error::NonConvergence { .. }) => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

pub fn execute(cli: &Cli) -> anyhow::Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            bail!(Error::ConfigInvalid("--jobs must be >= 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("building thread pool")?;
    pool.install(|| match &cli.command {
        Command::Split(a) => cmd_split(a),
        Command::Gdd(a) => cmd_gdd(a),
        Command::Select(a) => cmd_select(a),
    })
}

fn load(data: &DatasetArgs) -> anyhow::Result<LabeledGraphDataset> {
    let path = &data.dataset;
    let ds = if path.is_dir() {
        let opts = TuOptions {
            node_labels_as_features: data.node_labels_as_features,
        };
        load_tudataset_with(path, opts)
    } else {
        load_dataset(path)
    };
    ds.with_context(|| format!("loading {}", path.display()))
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string(v).expect("serializable"));
}

pub fn cmd_split(a: &SplitArgs) -> anyhow::Result<()> {
    let ds = load(&a.data)?;
    let split = covariate_split(&ds, a.by.into())?;
    let mut bytes = serde_json::to_vec_pretty(&split)?;
    bytes.push(b'\n');
    std::fs::write(&a.out, bytes).with_context(|| format!("writing {}", a.out.display()))?;
    log::info!(
        "split {} graphs into {}/{}/{}",
        ds.len(),
        split.train_idx.len(),
        split.val_idx.len(),
        split.test_idx.len()
    );
    print_json(&json!({
        "out": a.out,
        "train": split.train_idx.len(),
        "val": split.val_idx.len(),
        "test": split.test_idx.len(),
    }));
    Ok(())
}

fn merge(base: &mut Map<String, Value>, overlay: Map<String, Value>) {
    for (k, v) in overlay {
        base.insert(k, v);
    }
}

/// Defaults, overlaid by the config file, overlaid by explicit flags.
pub fn resolve_config(args: &ConfigArgs, extra: Map<String, Value>) -> anyhow::Result<SelectionConfig> {
    let mut cfg = match serde_json::to_value(SelectionConfig::default())? {
        Value::Object(m) => m,
        _ => unreachable!("config serializes to an object"),
    };
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        match serde_json::from_str(&text).map_err(Error::from)? {
            Value::Object(m) => merge(&mut cfg, m),
            _ => bail!(Error::ConfigInvalid(format!("{} must hold a JSON object", path.display()))),
        }
    }
    let mut flags = extra;
    let mut put = |k: &str, v: Option<Value>| {
        if let Some(v) = v {
            flags.insert(k.to_owned(), v);
        }
    };
    put("alpha", args.alpha.map(Value::from));
    put("order", args.order.map(Value::from));
    put("c", args.c.map(Value::from));
    put("seed", args.seed.map(Value::from));
    put("nbar", args.nbar.map(Value::from));
    put("validation_labels", args.no_val_labels.then_some(Value::Bool(false)));
    put("degree_features", args.no_degree_features.then_some(Value::Bool(false)));
    let solver = match (args.solver, args.epsilon) {
        (Some(SolverKind::Exact), _) => Some(json!({"kind": "exact"})),
        (Some(SolverKind::Sinkhorn), Some(e)) => Some(json!({"kind": "sinkhorn", "epsilon": e})),
        (Some(SolverKind::Sinkhorn), None) => bail!(Error::ConfigInvalid("--solver sinkhorn needs --epsilon".into())),
        (None, Some(_)) => bail!(Error::ConfigInvalid("--epsilon needs --solver sinkhorn".into())),
        (None, None) => None,
    };
    put("solver", solver);
    merge(&mut cfg, flags);
    let cfg: SelectionConfig = serde_json::from_value(Value::Object(cfg)).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    cfg.validate()?;
    log::info!("config {}", serde_json::to_string(&cfg)?);
    Ok(cfg)
}

fn cache_for(args: &ConfigArgs) -> Option<DistanceCache> {
    if args.no_cache {
        return None;
    }
    let dir = args
        .cache_dir
        .clone()
        .or_else(|| std::env::var_os("GRADATE_CACHE_DIR").map(PathBuf::from))
        .unwrap_or_else(|| std::env::temp_dir().join("gradate-cache"));
    Some(DistanceCache::new(dir))
}

struct SplitData {
    train: LabeledGraphDataset,
    val: LabeledGraphDataset,
    /// Hash of the full dataset plus the split, identifying the cost inputs.
    provenance: String,
}

fn load_split(data: &DatasetArgs, split_path: &Path) -> anyhow::Result<SplitData> {
    let ds = load(data)?;
    let text = std::fs::read(split_path).with_context(|| format!("reading {}", split_path.display()))?;
    let split: DomainSplit = serde_json::from_slice(&text).map_err(|e| Error::Schema(format!("{}: {e}", split_path.display())))?;
    let (train, val, _) = split.apply(&ds)?;
    let provenance = format!(
        "{}:{}:{}",
        dataset_hash(&ds),
        serde_json::to_string(&split.train_idx)?,
        serde_json::to_string(&split.val_idx)?
    );
    Ok(SplitData { train, val, provenance })
}

/// Label-informed cost, read from or written to the cache when enabled.
fn cost(data: &SplitData, cfg: &SelectionConfig, cache: Option<&DistanceCache>) -> anyhow::Result<LabelInformedCost<f64>> {
    let (train, val) = prepare(&data.train, &data.val, cfg)?;
    let key = |kind: &str, c: f64| CacheKey {
        kind: kind.into(),
        dataset_hash: data.provenance.clone(),
        alpha: cfg.alpha,
        order: cfg.order,
        nbar: cfg.nbar,
        c,
        seed: cfg.seed,
        extra: format!("degree_features={} solver={:?}", cfg.degree_features, cfg.solver),
    };
    let base = || linear_cross_distance(&train, &val, &cfg.fgw(), cfg.nbar);
    let c = cfg.effective_c();
    let Some(cache) = cache else {
        return Ok(label_informed_cost(&train, &val, &base()?, c, &cfg.solver)?);
    };
    let d = cache.get_or_compute(&key("linear-fgw", 0.0), base)?;
    if c == 0.0 {
        return Ok(LabelInformedCost::plain(d));
    }
    let mut full = None;
    let values = cache.get_or_compute(&key("label-cost", c), || {
        let lc = label_informed_cost(&train, &val, &d, c, &cfg.solver)?;
        let v = lc.values.clone();
        full = Some(lc);
        Ok(v)
    })?;
    Ok(full.unwrap_or(LabelInformedCost {
        values,
        c,
        table: None,
    }))
}

fn read_weights(path: &Path, train: &LabeledGraphDataset, force: bool) -> anyhow::Result<WeightVector<f64>> {
    let text = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_slice(&text).map_err(Error::from)?;
    let n = train.len();
    let raw: Vec<f64> = if value.is_array() {
        serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?
    } else {
        let sel = gradate_core::io::load_selection(path)?;
        verify_selection(&sel, &dataset_hash(train), n, force)?;
        let mut w = vec![0.0; n];
        for (&i, &v) in sel.indices.iter().zip(&sel.weights) {
            w[i] = v;
        }
        w
    };
    if raw.len() != n {
        bail!(Error::Schema(format!("{} weights for {n} training graphs", raw.len())));
    }
    Ok(WeightVector::new(raw.into())?)
}

pub fn cmd_gdd(a: &GddArgs) -> anyhow::Result<()> {
    let cfg = resolve_config(&a.cfg, Map::new())?;
    let data = load_split(&a.data, &a.split)?;
    let w = a.weights.as_deref().map(|p| read_weights(p, &data.train, a.force)).transpose()?;
    let cache = cache_for(&a.cfg);
    let dtilde = cost(&data, &cfg, cache.as_ref())?;
    let sol = gdd_from_cost(&dtilde, w.as_ref(), &cfg.solver)?;
    print_json(&json!({"gdd": sol.value, "config": cfg}));
    Ok(())
}

fn write_trace(path: &Path, result: &SelectionResult) -> anyhow::Result<()> {
    let Some(trace) = &result.trace else {
        log::warn!("method {} has no iteration trace; {} not written", result.method, path.display());
        return Ok(());
    };
    let mut out = String::from("t,gdd,support,step_norm,reverted\n");
    for r in &trace.records {
        out.push_str(&format!("{},{},{},{},{}\n", r.t, r.gdd, r.support, r.step_norm, r.reverted));
    }
    let t = trace.records.len() + 1;
    out.push_str(&format!("{t},{},{},0,false\n", trace.final_gdd, result.indices.len()));
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn cmd_select(a: &SelectArgs) -> anyhow::Result<()> {
    let mut extra = Map::new();
    if let Some(t) = a.tau {
        extra.insert("tau".into(), t.into());
    }
    if let Some(e) = a.eta {
        extra.insert("eta".into(), e.into());
    }
    if let Some(t) = a.iterations {
        extra.insert("T".into(), t.into());
    }
    let cfg = resolve_config(&a.cfg, extra)?;
    let data = load_split(&a.data, &a.split)?;
    let method: Method = a.method.into();
    let hash = dataset_hash(&data.train);
    let mut result = match method {
        Method::Random => random_select(&data.train, &cfg)?,
        Method::Gradate | Method::Lava => {
            gradate_core::pipeline::selection_size(data.train.len(), cfg.tau)?;
            let dtilde = cost(&data, &cfg, cache_for(&a.cfg).as_ref())?;
            if method == Method::Gradate {
                gradate_from_cost(&dtilde, &cfg, hash)?
            } else {
                lava_from_cost(&dtilde, &cfg, hash)?
            }
        }
    };
    if a.stamp {
        result.created_at = Some(SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
    }
    gradate_core::io::save_selection(&result, &a.out)?;
    if let Some(path) = &a.trace {
        write_trace(path, &result)?;
    }
    print_json(&json!({
        "out": a.out,
        "method": result.method,
        "selected": result.indices.len(),
        "final_gdd": result.trace.as_ref().map(|t| t.final_gdd),
    }));
    Ok(())
}
