use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crucial::data::{even_cuts, load_csv, make_prefixes, CsvSchema, Dataset, LabelKind};
use crucial::loss::{write_loss_trace, CrucialConfig, MuPolicy, TraceRow};
use crucial::numerics::{derive_seed, SeededRng};
use crucial::trainer::{
    fit, run_continuous, write_metrics_csv, EpochSummary, Evaluation, FitOptions, FitReport, MetricRow, Model,
    ModelKind, Task, TaskSpec, TransferMatrix,
};
use crucial::Exec;
use serde::Serialize;

use crate::gen_data::{data_rng, drift_config, sine_config};
use crate::{median, parse_enum, write_json, CliError, Outcome, Resolved};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Sine(crucial::data::SineConfig),
    Drift(crucial::data::DriftConfig),
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub wrapper_name: String,
    pub data: DataSource,
    pub train_fraction: f64,
    pub model: ModelKind,
    pub window: usize,
    pub spec: TaskSpec,
    /// Continuous task: explicit cuts, else `stages` even cuts.
    pub cuts: Vec<usize>,
    pub stages: usize,
    pub baseline_seed: Option<u64>,
    pub keep_trace: bool,
}

fn parse_task(raw: &str) -> Result<Task, CliError> {
    Ok(match raw {
        "regression" => Task::Regression,
        "single-shot" => Task::SingleShotClassification,
        "continuous" => Task::ContinuousClassification,
        other => return Err(CliError::Usage(format!("task = {other:?}"))),
    })
}

fn parse_model(cfg: &Resolved) -> Result<ModelKind, CliError> {
    let hidden: Vec<usize> = cfg.list("hidden")?;
    Ok(match cfg.get::<String>("model")?.as_str() {
        "linear" => ModelKind::Linear,
        "mlp" => ModelKind::Mlp { hidden },
        "elman" => match hidden.as_slice() {
            [h] => ModelKind::Elman { hidden: *h },
            _ => return Err(CliError::Usage("elman takes a single hidden size".into())),
        },
        other => return Err(CliError::Usage(format!("model = {other:?}"))),
    })
}

fn parse_wrapper(cfg: &Resolved) -> Result<Option<CrucialConfig>, CliError> {
    let lambda: f64 = cfg.get("lambda")?;
    let mut w = match cfg.get::<String>("wrapper")?.as_str() {
        "none" => return Ok(None),
        "adp" => CrucialConfig::adp(lambda),
        "baseline" => CrucialConfig::baseline(cfg.get("threshold")?, lambda),
        "sin" => {
            let mu = match cfg.get::<String>("mu")?.as_str() {
                "mean" => MuPolicy::EpochMean,
                _ => MuPolicy::FixedValue(cfg.get("mu")?),
            };
            CrucialConfig::sin(cfg.get("omega")?, cfg.get("phase")?, mu)
        }
        other => return Err(CliError::Usage(format!("wrapper = {other:?}"))),
    };
    w.kappa_rule = parse_enum(cfg, "kappa_rule")?;
    w.sin_threshold = parse_enum(cfg, "sin_threshold")?;
    Ok(Some(w))
}

impl TrainSettings {
    pub fn from_config(cfg: &Resolved) -> Result<Self, CliError> {
        let task = parse_task(&cfg.get::<String>("task")?)?;
        let data = match cfg.raw("data_csv") {
            Some(p) => DataSource::Csv(PathBuf::from(p)),
            None if task == Task::Regression => DataSource::Sine(sine_config(cfg)?),
            None => DataSource::Drift(drift_config(cfg)?),
        };
        let mut spec = TaskSpec::new(task, cfg.get("epochs")?, cfg.get("lr")?).with_wrapper(parse_wrapper(cfg)?);
        spec.batch_size = cfg.get("batch_size")?;
        spec.accumulate_stats = cfg.get("accumulate_stats")?;
        spec.validate()?;
        let train_fraction: f64 = cfg.get("train_fraction")?;
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(CliError::Usage(format!("train_fraction = {train_fraction} is not in (0, 1)")));
        }
        Ok(Self {
            wrapper_name: cfg.get("wrapper")?,
            data,
            train_fraction,
            model: parse_model(cfg)?,
            window: cfg.get("window")?,
            spec,
            cuts: cfg.list("cuts")?,
            stages: cfg.get("stages")?,
            baseline_seed: cfg.opt("baseline_seed")?,
            keep_trace: cfg.get("trace")?,
        })
    }

    pub fn dataset(&self, seed: u64) -> Result<Dataset, CliError> {
        let mut rng = data_rng(seed);
        Ok(match &self.data {
            DataSource::Sine(c) => crucial::data::gen_sine_regression(c, &mut rng)?,
            DataSource::Drift(c) => crucial::data::gen_drift_classification(c, &mut rng)?,
            DataSource::Csv(path) => {
                let label = match self.spec.task {
                    Task::Regression => LabelKind::Real,
                    _ => LabelKind::Class,
                };
                load_csv(path, &CsvSchema { label, ..CsvSchema::default() })?
            }
        })
    }
}

/// Everything one seeded run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub run_id: String,
    pub seed: u64,
    /// Final test evaluation (regression and single-shot tasks).
    pub final_eval: Option<Evaluation>,
    pub transfer: Option<TransferMatrix>,
    /// Per-epoch count of wrapped samples with `kappa >= 1`, all stages in order.
    pub kappa_counts: Vec<usize>,
    pub metrics: Vec<MetricRow>,
    pub trace: Vec<TraceRow>,
}

fn class_count(data: &Dataset) -> usize {
    data.samples().iter().filter_map(|s| s.label.and_then(|l| l.class())).max().map_or(2, |m| (m + 1).max(2))
}

struct Rows<'a> {
    run_id: &'a str,
    seed: u64,
    rows: Vec<MetricRow>,
}

impl Rows<'_> {
    fn push(&mut self, epoch: usize, split: &str, name: &str, value: f64) {
        self.rows.push(MetricRow {
            run_id: self.run_id.to_string(),
            seed: self.seed,
            epoch,
            split: split.to_string(),
            metric_name: name.to_string(),
            value,
        });
    }

    fn epochs(&mut self, offset: usize, epochs: &[EpochSummary]) {
        for e in epochs {
            let ep = offset + e.epoch;
            self.push(ep, "train", "loss", e.train_loss);
            if let Some(t) = e.threshold {
                self.push(ep, "train", "threshold", t);
            }
            if let Some(k) = e.kappa_at_least_one {
                self.push(ep, "train", "kappa_ge_1", k as f64);
            }
            if let Some(s) = e.selected {
                self.push(ep, "train", "selected", s as f64);
            }
            if let Some(t) = &e.test {
                self.push(ep, "test", "loss", t.mean_loss);
                self.push(ep, "test", t.metric_name, t.metric);
            }
        }
    }
}

fn trace_rows(offset: usize, report: &FitReport, out: &mut Vec<TraceRow>) {
    for t in &report.traces {
        let epoch = offset + t.epoch;
        if t.modulated.is_empty() {
            out.extend(t.sample_ids.iter().zip(&t.raw_losses).map(|(&id, &l)| TraceRow {
                epoch,
                sample_id: id,
                input_loss: l,
                kappa: 1.0,
                threshold: 0.0,
                value: l,
                selected: true,
            }));
        } else {
            out.extend(t.sample_ids.iter().zip(&t.modulated).map(|(&id, m)| TraceRow::new(epoch, id, m)));
        }
    }
}

/// Trains one model from `seed`. Data, initial weights, batch order and the
/// untrained reference model each use their own seed derived from it.
pub fn run_seed(s: &TrainSettings, seed: u64, exec: Exec) -> Result<RunOutput, CliError> {
    let data = s.dataset(seed)?;
    let k = ((data.len() as f64) * s.train_fraction).round() as usize;
    if k == 0 || k >= data.len() {
        return Err(CliError::Usage(format!("train_fraction leaves an empty split of {} samples", data.len())));
    }
    let (train, test) = data.split_at(k);
    let outputs = match s.spec.task {
        Task::Regression => 1,
        _ => class_count(&data),
    };
    let mut model =
        Model::new(s.model.clone(), s.window, data.dims(), outputs, &mut SeededRng::new(derive_seed(seed, "model")))?;
    let mut rng = SeededRng::new(derive_seed(seed, "train"));
    let opts = FitOptions { exec, keep_traces: s.keep_trace, eval_every_epoch: true };
    let run_id = format!("{}-seed{seed}", s.wrapper_name);
    let mut rows = Rows { run_id: &run_id, seed, rows: Vec::new() };
    let mut trace = Vec::new();
    let mut kappa_counts = Vec::new();

    if s.spec.task == Task::ContinuousClassification {
        let cuts = if s.cuts.is_empty() { even_cuts(data.length(), s.stages) } else { s.cuts.clone() };
        let tr = make_prefixes(&train, &cuts)?;
        let te = make_prefixes(&test, &cuts)?;
        let baseline_seed = s.baseline_seed.unwrap_or_else(|| derive_seed(seed, "baseline"));
        let opts = FitOptions { eval_every_epoch: false, ..opts };
        let rep = run_continuous(&mut model, &tr, &te, &s.spec, &mut rng, baseline_seed, opts)?;
        let metric = if outputs == 2 { "auc" } else { "accuracy" };
        for (i, stage) in rep.stages.iter().enumerate() {
            let offset = i * s.spec.epochs;
            rows.epochs(offset, &stage.epochs);
            trace_rows(offset, stage, &mut trace);
            kappa_counts.extend(stage.epochs.iter().filter_map(|e| e.kappa_at_least_one));
            for (j, v) in rep.matrix.r[i].iter().enumerate() {
                rows.push(offset + s.spec.epochs - 1, &format!("stage{i}:test{j}"), metric, *v);
            }
        }
        let last = cuts.len() * s.spec.epochs - 1;
        if let (Ok(b), Ok(f)) = (rep.matrix.bwt(), rep.matrix.fwt()) {
            rows.push(last, "transfer", "bwt", b);
            rows.push(last, "transfer", "fwt", f);
        }
        return Ok(RunOutput {
            run_id: run_id.clone(),
            seed,
            final_eval: None,
            transfer: Some(rep.matrix),
            kappa_counts,
            metrics: rows.rows,
            trace,
        });
    }

    let mut wrapper = s.spec.wrapper()?;
    let rep = fit(&mut model, &train.full(), Some(&test.full()), &s.spec, wrapper.as_mut(), &mut rng, opts)?;
    rows.epochs(0, &rep.epochs);
    trace_rows(0, &rep, &mut trace);
    kappa_counts.extend(rep.epochs.iter().filter_map(|e| e.kappa_at_least_one));
    Ok(RunOutput {
        run_id: run_id.clone(),
        seed,
        final_eval: rep.epochs.last().and_then(|e| e.test),
        transfer: None,
        kappa_counts,
        metrics: rows.rows,
        trace,
    })
}

#[derive(Debug, Serialize)]
struct RunSummary {
    seed: u64,
    metric_name: Option<&'static str>,
    final_metric: Option<f64>,
    bwt: Option<f64>,
    fwt: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Aggregate {
    wrapper: String,
    runs: Vec<RunSummary>,
    median_final_metric: Option<f64>,
    mean_final_metric: Option<f64>,
    median_bwt: Option<f64>,
    median_fwt: Option<f64>,
}

pub fn run(cfg: &Resolved, out: &Path) -> Result<Outcome, CliError> {
    let settings = TrainSettings::from_config(cfg)?;
    let first: u64 = cfg.get("seed")?;
    let count: u64 = cfg.get("seeds")?;
    if count == 0 {
        return Err(CliError::Usage("seeds must be at least 1".into()));
    }
    let mut runs = Vec::new();
    let mut summary = String::new();
    for seed in first..first + count {
        let r = run_seed(&settings, seed, Exec::Parallel)?;
        write_metrics_csv(std::fs::File::create(out.join(format!("metrics_seed{seed}.csv")))?, &r.metrics)?;
        if settings.keep_trace {
            write_loss_trace(std::fs::File::create(out.join(format!("loss_trace_seed{seed}.csv")))?, &r.trace)?;
        }
        if let Some(m) = &r.transfer {
            std::fs::write(out.join(format!("transfer_seed{seed}.json")), m.to_json()? + "\n")?;
        }
        let s = RunSummary {
            seed,
            metric_name: r.final_eval.map(|e| e.metric_name),
            final_metric: r.final_eval.map(|e| e.metric),
            bwt: r.transfer.as_ref().and_then(|m| m.bwt().ok()),
            fwt: r.transfer.as_ref().and_then(|m| m.fwt().ok()),
        };
        match (&s.final_metric, &s.bwt, &s.fwt) {
            (Some(v), _, _) => {
                let _ = writeln!(summary, "{}: test {} = {v:.6}", r.run_id, s.metric_name.unwrap_or("metric"));
            }
            (None, Some(b), Some(f)) => {
                let _ = writeln!(summary, "{}: bwt = {b:.6}, fwt = {f:.6}", r.run_id);
            }
            _ => {
                let _ = writeln!(summary, "{}: done", r.run_id);
            }
        }
        runs.push(s);
    }
    let finals: Vec<f64> = runs.iter().filter_map(|r| r.final_metric).collect();
    let bwts: Vec<f64> = runs.iter().filter_map(|r| r.bwt).collect();
    let fwts: Vec<f64> = runs.iter().filter_map(|r| r.fwt).collect();
    let agg = Aggregate {
        wrapper: settings.wrapper_name.clone(),
        median_final_metric: median(&finals),
        mean_final_metric: (!finals.is_empty()).then(|| finals.iter().sum::<f64>() / finals.len() as f64),
        median_bwt: median(&bwts),
        median_fwt: median(&fwts),
        runs,
    };
    write_json(&out.join("aggregate.json"), &agg)?;
    Ok(Outcome { summary, passed: true })
}
