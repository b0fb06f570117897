use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use circuitflow::io::{
    load_circuit, load_circuit_unchecked, load_dataset, param_histogram, save_circuit, save_dataset, CircuitFormat,
    DataPaths, ExperimentConfig,
};
use circuitflow::prune::{prune, PruneHeuristic};
use circuitflow::sampler::sample_batch;
use circuitflow::structures::{build_hclt, chow_liu, estimate_mutual_info, quantize, ChowLiuTree};
use circuitflow::train::{compress, em_with_validation, structure_learn, ScheduleSegment, TrainLog};
use circuitflow::{aggregate_flows, Circuit, Dataset, RngSeed};

use crate::cli::*;
use crate::manifest::Manifest;

/// Flags that apply to every command.
#[derive(Debug, Clone, Copy)]
pub struct Globals {
    pub timings: bool,
}

/// Outcome the caller turns into an exit code.
pub enum Outcome {
    Ok,
    /// The command ran but found problems (for example an invalid model).
    Failed,
}

struct Stopwatch {
    enabled: bool,
    start: Instant,
}

impl Stopwatch {
    fn new(g: Globals) -> Self {
        Self { enabled: g.timings, start: Instant::now() }
    }

    fn lap(&mut self, what: &str) {
        if self.enabled {
            eprintln!("time {what}: {:.3} s", self.start.elapsed().as_secs_f64());
            self.start = Instant::now();
        }
    }
}

pub fn run(command: Command, g: Globals) -> Result<Outcome> {
    match command {
        Command::BuildHclt(a) => build_hclt_cmd(a, g),
        Command::Train(a) => train_cmd(a, g),
        Command::Prune(a) => prune_cmd(a, g),
        Command::Grow(a) => grow_cmd(a, g),
        Command::Spgrow(a) => spgrow_cmd(a, g),
        Command::Compress(a) => compress_cmd(a, g),
        Command::Eval(a) => eval_cmd(a),
        Command::Sample(a) => sample_cmd(a),
        Command::Histogram(a) => histogram_cmd(a),
        Command::Validate(a) => validate_cmd(a),
    }
}

fn read_model(path: &Path) -> Result<Circuit> {
    load_circuit(path, CircuitFormat::from_path(path)).with_context(|| format!("loading model {}", path.display()))
}

fn read_data(path: &Path, cards: Option<&[u32]>) -> Result<Dataset> {
    load_dataset(path, cards).with_context(|| format!("loading data {}", path.display()))
}

fn out_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir.to_path_buf())
}

fn write_model(circuit: &Circuit, dir: &Path, format: ModelFormat, manifest: &mut Manifest) -> Result<PathBuf> {
    let (name, fmt) = match format {
        ModelFormat::Text => ("model.pc", CircuitFormat::Text),
        ModelFormat::Binary => ("model.pcb", CircuitFormat::Binary),
    };
    let path = dir.join(name);
    save_circuit(circuit, &path, fmt).with_context(|| format!("writing {}", path.display()))?;
    manifest.output(name);
    Ok(path)
}

fn write_log(log: &TrainLog, dir: &Path, g: Globals, manifest: &mut Manifest) -> Result<()> {
    let mut buf = Vec::new();
    log.write_csv(&mut buf, g.timings)?;
    fs::write(dir.join("train_log.csv"), buf)?;
    manifest.output("train_log.csv");
    Ok(())
}

/// Loads the config (if any), applies data and seed flags, and picks the
/// output directory.
fn resolve(exp: &ExperimentArgs, output: Option<&Path>) -> Result<ExperimentConfig> {
    let mut cfg = match &exp.config {
        Some(path) => {
            let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading config {}", path.display()))?;
            if let Some(s) = exp.seed {
                cfg.reseed(s);
            }
            if let Some(p) = &exp.data {
                cfg.data.train = p.clone();
            }
            cfg
        }
        None => {
            let Some(train) = exp.data.clone() else { bail!("--data is required without --config") };
            ExperimentConfig::with_defaults(exp.seed.unwrap_or(0), DataPaths { train, valid: None, test: None })
        }
    };
    if let Some(p) = &exp.valid {
        cfg.data.valid = Some(p.clone());
    }
    if let Some(p) = &exp.test {
        cfg.data.test = Some(p.clone());
    }
    if let Some(o) = output {
        cfg.output_dir = o.to_path_buf();
    }
    Ok(cfg)
}

fn apply_structure(cfg: &mut ExperimentConfig, a: &StructureArgs) {
    if let Some(h) = a.hidden {
        cfg.structure.hidden_states = h;
    }
    if let Some(s) = a.mi_smoothing {
        cfg.structure.smoothing = s;
    }
    if a.quantize.is_some() {
        cfg.structure.quantize = a.quantize;
    }
}

fn apply_em(cfg: &mut ExperimentConfig, a: &EmArgs) {
    if let Some(b) = a.batch_size {
        cfg.em.batch_size = b;
    }
    if let Some(s) = a.smoothing {
        cfg.em.smoothing = s;
    }
    if let Some(e) = a.epochs {
        let first = cfg.em.schedule.first().cloned();
        let start = a.alpha_start.or(first.as_ref().map(|s| s.alpha_start)).unwrap_or(1.0);
        let end = a.alpha_end.or(first.as_ref().map(|s| s.alpha_end)).unwrap_or(start);
        cfg.em.schedule = vec![ScheduleSegment::new(start, end, e)];
    }
}

/// Training, validation and test splits, with cardinalities taken from the
/// training file (or from `model` when given).
struct Splits {
    train: Dataset,
    valid: Option<Dataset>,
    test: Option<Dataset>,
}

fn load_splits(cfg: &ExperimentConfig, model: Option<&Circuit>) -> Result<Splits> {
    let train = read_data(&cfg.data.train, model.map(|m| m.cardinalities()))?;
    let cards = train.cardinalities().to_vec();
    let other = |p: &Option<PathBuf>| -> Result<Option<Dataset>> {
        p.as_deref().map(|p| read_data(p, Some(&cards))).transpose()
    };
    Ok(Splits { valid: other(&cfg.data.valid)?, test: other(&cfg.data.test)?, train })
}

fn learn_tree(data: &Dataset, cfg: &ExperimentConfig) -> Result<ChowLiuTree> {
    let s = &cfg.structure;
    let mi = match s.quantize {
        Some(b) => estimate_mutual_info(&quantize(data, b)?, s.smoothing)?,
        None => estimate_mutual_info(data, s.smoothing)?,
    };
    Ok(chow_liu(&mi, 0)?)
}

/// The given model, or a hidden-tree circuit built on the training split.
fn initial_model(given: Option<Circuit>, cfg: &ExperimentConfig, splits: &Splits) -> Result<Circuit> {
    match given {
        Some(c) => Ok(c),
        None => Ok(build_hclt(&splits.train, &cfg.structure)?),
    }
}

fn print_metrics(circuit: &Circuit, splits: &Splits) -> Result<()> {
    let named = [("train", Some(&splits.train)), ("valid", splits.valid.as_ref()), ("test", splits.test.as_ref())];
    for (name, data) in named {
        if let Some(d) = data.filter(|d| !d.is_empty()) {
            println!("{name}_meanLL = {}", circuit.log_likelihood(d)?);
            println!("{name}_bpd = {}", circuit.bits_per_dimension(d)?);
        }
    }
    println!("params = {}", circuit.num_edges());
    Ok(())
}

fn build_hclt_cmd(a: BuildHcltArgs, g: Globals) -> Result<Outcome> {
    let mut watch = Stopwatch::new(g);
    let mut cfg = resolve(&a.exp, a.output.out.as_deref())?;
    apply_structure(&mut cfg, &a.structure);
    cfg.check()?;
    let splits = load_splits(&cfg, None)?;
    let tree = learn_tree(&splits.train, &cfg)?;
    let circuit = circuitflow::structures::compile_hclt(&tree, &splits.train, &cfg.structure)?;
    watch.lap("build");
    let dir = out_dir(&cfg.output_dir)?;
    let mut manifest = Manifest::new("build-hclt").experiment(&cfg);
    write_model(&circuit, &dir, a.output.format, &mut manifest)?;
    let mut buf = Vec::new();
    tree.write_edge_list(&mut buf)?;
    fs::write(dir.join("tree.txt"), buf)?;
    manifest.output("tree.txt");
    manifest.write(&dir)?;
    println!("vars = {}", circuit.num_vars());
    println!("units = {}", circuit.len());
    print_metrics(&circuit, &splits)?;
    Ok(Outcome::Ok)
}

fn train_cmd(a: TrainArgs, g: Globals) -> Result<Outcome> {
    let mut watch = Stopwatch::new(g);
    let mut cfg = resolve(&a.exp, a.output.out.as_deref())?;
    apply_structure(&mut cfg, &a.structure);
    apply_em(&mut cfg, &a.em);
    cfg.check()?;
    let given = a.model.as_deref().map(read_model).transpose()?;
    let splits = load_splits(&cfg, given.as_ref())?;
    let init = initial_model(given, &cfg, &splits)?;
    watch.lap("init");
    let (circuit, log) = em_with_validation(&init, &splits.train, splits.valid.as_ref(), &cfg.em)?;
    watch.lap("em");
    let dir = out_dir(&cfg.output_dir)?;
    let mut manifest = Manifest::new("train").experiment(&cfg);
    if let Some(m) = &a.model {
        manifest = manifest.param("model", m.display().to_string());
    }
    write_model(&circuit, &dir, a.output.format, &mut manifest)?;
    write_log(&log, &dir, g, &mut manifest)?;
    manifest.write(&dir)?;
    print_metrics(&circuit, &splits)?;
    Ok(Outcome::Ok)
}

fn prune_cmd(a: PruneArgs, g: Globals) -> Result<Outcome> {
    let mut watch = Stopwatch::new(g);
    let circuit = read_model(&a.model)?;
    let data = a.dataset.as_deref().map(|p| read_data(p, Some(circuit.cardinalities()))).transpose()?;
    let heuristic = match a.heuristic {
        Heuristic::Rand => PruneHeuristic::Random(RngSeed(a.seed)),
        Heuristic::Param => PruneHeuristic::Param,
        Heuristic::Flow => {
            let Some(d) = &data else { bail!("--heuristic flow needs --dataset") };
            PruneHeuristic::Flow(aggregate_flows(&circuit, d)?)
        }
    };
    let (pruned, mut report) = prune(&circuit, &heuristic, a.fraction)?;
    watch.lap("prune");
    if a.report_bounds {
        let d = data.as_ref().expect("clap requires --dataset");
        report.annotate(&circuit, d)?;
        watch.lap("bounds");
    }
    let dir = out_dir(&a.output.out.clone().unwrap_or_else(|| PathBuf::from("out")))?;
    let mut manifest = Manifest::new("prune")
        .seed(a.seed)
        .param("model", a.model.display().to_string())
        .param("heuristic", report.heuristic.clone())
        .param("fraction", a.fraction)
        .param("report_bounds", a.report_bounds);
    if let Some(p) = &a.dataset {
        manifest = manifest.param("dataset", p.display().to_string());
    }
    write_model(&pruned, &dir, a.output.format, &mut manifest)?;
    let mut buf = Vec::new();
    report.write_text(&mut buf)?;
    fs::write(dir.join("prune_report.txt"), buf)?;
    manifest.output("prune_report.txt");
    manifest.write(&dir)?;
    println!("edges_before = {}", report.edges_before);
    println!("edges_after = {}", report.edges_after);
    if let Some(d) = &data {
        println!("meanLL_before = {}", circuit.log_likelihood(d)?);
        println!("meanLL_after = {}", pruned.log_likelihood(d)?);
    }
    if let Some(b) = report.bounded_drop {
        println!("bounded_drop = {b}");
    }
    Ok(Outcome::Ok)
}

fn grow_cmd(a: GrowArgs, g: Globals) -> Result<Outcome> {
    let mut watch = Stopwatch::new(g);
    let circuit = read_model(&a.model)?;
    let cfg = circuitflow::grow::GrowConfig { sigma2: a.sigma2, seed: RngSeed(a.seed) };
    let grown = circuitflow::grow::grow(&circuit, &cfg)?;
    watch.lap("grow");
    let dir = out_dir(&a.output.out.clone().unwrap_or_else(|| PathBuf::from("out")))?;
    let mut manifest =
        Manifest::new("grow").seed(a.seed).param("model", a.model.display().to_string()).param("sigma2", a.sigma2);
    write_model(&grown, &dir, a.output.format, &mut manifest)?;
    manifest.write(&dir)?;
    println!("edges_before = {}", circuit.num_edges());
    println!("edges_after = {}", grown.num_edges());
    Ok(Outcome::Ok)
}

fn spgrow_cmd(a: SpgrowArgs, g: Globals) -> Result<Outcome> {
    let mut watch = Stopwatch::new(g);
    let mut cfg = resolve(&a.exp, a.output.out.as_deref())?;
    apply_structure(&mut cfg, &a.structure);
    apply_em(&mut cfg, &a.em);
    let lp = &mut cfg.structure_loop;
    if let Some(v) = a.iterations {
        lp.max_iterations = v;
    }
    if let Some(v) = a.prune_fraction {
        lp.prune_fraction = v;
    }
    if let Some(v) = a.sigma2 {
        lp.grow_sigma2 = v;
    }
    if let Some(v) = a.patience {
        lp.patience = v;
    }
    cfg.check()?;
    let given = a.model.as_deref().map(read_model).transpose()?;
    let splits = load_splits(&cfg, given.as_ref())?;
    let init = initial_model(given, &cfg, &splits)?;
    watch.lap("init");
    let (circuit, log) = structure_learn(&init, &splits.train, splits.valid.as_ref(), &cfg.structure_loop, &cfg.em)?;
    watch.lap("structure learning");
    let dir = out_dir(&cfg.output_dir)?;
    let mut manifest = Manifest::new("spgrow").experiment(&cfg);
    if let Some(m) = &a.model {
        manifest = manifest.param("model", m.display().to_string());
    }
    write_model(&circuit, &dir, a.output.format, &mut manifest)?;
    write_log(&log, &dir, g, &mut manifest)?;
    manifest.write(&dir)?;
    println!("best_iteration = {}", log.state.best_iteration);
    print_metrics(&circuit, &splits)?;
    Ok(Outcome::Ok)
}

fn compress_cmd(a: CompressArgs, g: Globals) -> Result<Outcome> {
    let mut watch = Stopwatch::new(g);
    let mut cfg = resolve(&a.exp, a.output.out.as_deref())?;
    apply_em(&mut cfg, &a.em);
    if let Some(v) = a.step_fraction {
        cfg.compress.step_fraction = v;
    }
    if let Some(v) = a.budget {
        cfg.compress.ll_budget = v;
    }
    if let Some(v) = a.max_steps {
        cfg.compress.max_steps = v;
    }
    cfg.check()?;
    let circuit = read_model(&a.model)?;
    let splits = load_splits(&cfg, Some(&circuit))?;
    let c = &cfg.compress;
    let result = compress(&circuit, &splits.train, c.step_fraction, c.ll_budget, c.max_steps, &cfg.em)?;
    watch.lap("compress");
    let dir = out_dir(&cfg.output_dir)?;
    let mut manifest = Manifest::new("compress").experiment(&cfg).param("model", a.model.display().to_string());
    write_model(&result.circuit, &dir, a.output.format, &mut manifest)?;
    write_log(&result.log, &dir, g, &mut manifest)?;
    manifest.write(&dir)?;
    println!("compression_rate = {}", result.rate);
    println!("steps = {}", result.steps);
    println!("initial_train_meanLL = {}", result.initial_ll);
    println!("final_train_meanLL = {}", result.final_ll);
    print_metrics(&result.circuit, &splits)?;
    Ok(Outcome::Ok)
}

fn eval_cmd(a: EvalArgs) -> Result<Outcome> {
    let circuit = read_model(&a.model)?;
    let data = read_data(&a.data, Some(circuit.cardinalities()))?;
    let ll = circuit.log_likelihood(&data)?;
    let bpd = circuit.bits_per_dimension(&data)?;
    let text = format!("meanLL = {ll}\nbpd = {bpd}\nrows = {}\n", data.len());
    print!("{text}");
    if let Some(out) = &a.out {
        let dir = out_dir(out)?;
        fs::write(dir.join("metrics.toml"), &text)?;
        let mut manifest = Manifest::new("eval")
            .param("model", a.model.display().to_string())
            .param("data", a.data.display().to_string());
        manifest.output("metrics.toml");
        manifest.write(&dir)?;
    }
    Ok(Outcome::Ok)
}

fn sample_cmd(a: SampleArgs) -> Result<Outcome> {
    let circuit = read_model(&a.model)?;
    let samples = sample_batch(&circuit, a.count, RngSeed(a.seed));
    let dir = out_dir(&a.out)?;
    save_dataset(&samples, &dir.join("samples.csv"))?;
    let mut manifest = Manifest::new("sample")
        .seed(a.seed)
        .param("model", a.model.display().to_string())
        .param("count", a.count as i64);
    manifest.output("samples.csv");
    manifest.write(&dir)?;
    println!("samples = {}", samples.len());
    Ok(Outcome::Ok)
}

fn histogram_cmd(a: HistogramArgs) -> Result<Outcome> {
    let circuit = read_model(&a.model)?;
    let hist = param_histogram(&circuit, a.bins)?;
    let mut buf = Vec::new();
    hist.write_csv(&mut buf)?;
    match &a.out {
        Some(out) => {
            let dir = out_dir(out)?;
            fs::write(dir.join("histogram.csv"), &buf)?;
            let mut manifest =
                Manifest::new("histogram").param("model", a.model.display().to_string()).param("bins", a.bins as i64);
            manifest.output("histogram.csv");
            manifest.write(&dir)?;
        }
        None => print!("{}", String::from_utf8(buf)?),
    }
    Ok(Outcome::Ok)
}

fn validate_cmd(a: ValidateArgs) -> Result<Outcome> {
    let path = &a.model;
    let circuit = load_circuit_unchecked(path, CircuitFormat::from_path(path))
        .with_context(|| format!("loading model {}", path.display()))?;
    let violations = circuit.validate();
    if violations.is_empty() {
        println!("valid: {} units, {} sum edges, {} variables", circuit.len(), circuit.num_edges(), circuit.num_vars());
        return Ok(Outcome::Ok);
    }
    println!("invalid: {} violation(s)", violations.len());
    for v in &violations {
        println!("  {v}");
    }
    Ok(Outcome::Failed)
}
