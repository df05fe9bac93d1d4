use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, auc, TransferMatrix};
use super::model::{softmax, BaseLoss, Model, Target};
use crate::data::{Label, PrefixDataset};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::loss::{loss_gradient_factor, Crucial, CrucialConfig, ModulatedLoss, MuPolicy, Variant};
use crate::numerics::SeededRng;

/// Samples per parallel work unit inside a mini-batch.
const CHUNK: usize = 8;

/// Mean raw loss above which training is aborted.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Regression,
    SingleShotClassification,
    ContinuousClassification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: Task,
    pub base_loss: BaseLoss,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub loss_wrapper: Option<CrucialConfig>,
    /// Continuous task: carry wrapper statistics across stages instead of
    /// restarting them for every new distribution.
    pub accumulate_stats: bool,
}

impl TaskSpec {
    pub fn new(task: Task, epochs: usize, learning_rate: f64) -> Self {
        let base_loss = match task {
            Task::Regression => BaseLoss::Mse,
            _ => BaseLoss::CrossEntropy,
        };
        Self { task, base_loss, epochs, learning_rate, batch_size: 32, loss_wrapper: None, accumulate_stats: false }
    }

    pub fn with_wrapper(mut self, cfg: Option<CrucialConfig>) -> Self {
        self.loss_wrapper = cfg;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let want = match self.task {
            Task::Regression => BaseLoss::Mse,
            _ => BaseLoss::CrossEntropy,
        };
        if self.base_loss != want {
            return Err(Error::invalid(
                "base_loss",
                "regression pairs with squared error, classification with cross-entropy",
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate", "must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        if let Some(cfg) = &self.loss_wrapper {
            cfg.validate()?;
        }
        Ok(())
    }

    /// A fresh wrapper driver, if one is configured.
    pub fn wrapper(&self) -> Result<Option<Crucial>> {
        self.loss_wrapper.clone().map(Crucial::new).transpose()
    }
}

/// Model inputs and targets extracted once from a prefix view.
struct Prepared {
    ids: Vec<u64>,
    xs: Vec<Vec<f64>>,
    ys: Vec<Target>,
}

impl Prepared {
    fn new(model: &Model, data: &PrefixDataset<'_>, loss: BaseLoss) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("training data"));
        }
        if data.dims() != model.dims() {
            return Err(Error::Shape(format!("data has {} dims, model expects {}", data.dims(), model.dims())));
        }
        let mut xs = Vec::with_capacity(data.len());
        let mut ys = Vec::with_capacity(data.len());
        for i in 0..data.len() {
            let mut x = Vec::new();
            data.window(i, model.window(), &mut x);
            xs.push(x);
            ys.push(match (loss, data.label(i)) {
                (BaseLoss::Mse, Some(Label::Real(y))) => Target::Real(y),
                (BaseLoss::CrossEntropy, Some(Label::Class(c))) => Target::Class(c),
                _ => {
                    return Err(Error::invalid(
                        "label",
                        format!("sample {} lacks a label of the right kind", data.id(i)),
                    ))
                }
            });
        }
        Ok(Self { ids: (0..data.len()).map(|i| data.id(i)).collect(), xs, ys })
    }

    fn losses(&self, model: &Model, loss: BaseLoss, exec: Exec) -> Result<Vec<f64>> {
        let parts = exec.map_ranges(self.xs.len(), CHUNK * 4, |_, r| {
            r.map(|i| model.loss(&self.xs[i], self.ys[i], loss)).collect::<Result<Vec<f64>>>()
        });
        let mut out = Vec::with_capacity(self.xs.len());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }
}

/// Per-sample record of one epoch, in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochTrace {
    pub epoch: usize,
    pub sample_ids: Vec<u64>,
    /// Base loss of each sample when its mini-batch was processed.
    pub raw_losses: Vec<f64>,
    /// Wrapper output per sample; empty without a wrapper.
    pub modulated: Vec<ModulatedLoss>,
    pub mean_loss: f64,
}

impl EpochTrace {
    /// Samples the wrapper up-weighted or left unchanged (`kappa >= 1`).
    pub fn kappa_at_least_one(&self) -> usize {
        self.modulated.iter().filter(|m| m.selected && m.kappa >= 1.0).count()
    }

    pub fn selected(&self) -> usize {
        self.modulated.iter().filter(|m| m.selected).count()
    }
}

fn run_epoch(
    model: &mut Model,
    data: &Prepared,
    spec: &TaskSpec,
    wrapper: Option<&mut Crucial>,
    epoch: usize,
    rng: &mut SeededRng,
    exec: Exec,
) -> Result<EpochTrace> {
    let n = data.xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut raw = vec![0.0; n];
    let mut modulated: Vec<Option<ModulatedLoss>> = vec![None; n];
    let n_params = model.params.len();
    {
        let view = wrapper.as_deref().map(|w| w.epoch_view()).transpose()?;
        for batch in order.chunks(spec.batch_size) {
            let current: &Model = model;
            let parts = exec.map_chunks(batch, CHUNK, |_, idxs| -> Result<_> {
                let mut acc = vec![0.0; n_params];
                let mut g = vec![0.0; n_params];
                let mut recs = Vec::with_capacity(idxs.len());
                for &i in idxs {
                    let l = current.loss_and_grad(&data.xs[i], data.ys[i], spec.base_loss, &mut g)?;
                    let m = view.as_ref().map(|v| v.modulate(l)).transpose()?;
                    let factor = m.as_ref().map_or(1.0, loss_gradient_factor);
                    for (a, gi) in acc.iter_mut().zip(&g) {
                        *a += factor * gi;
                    }
                    recs.push((i, l, m));
                }
                Ok((recs, acc))
            });
            let mut grad = vec![0.0; n_params];
            for part in parts {
                let (recs, acc) = part?;
                for (i, l, m) in recs {
                    raw[i] = l;
                    modulated[i] = m;
                }
                for (a, v) in grad.iter_mut().zip(&acc) {
                    *a += v;
                }
            }
            let step = spec.learning_rate / batch.len() as f64;
            for (p, g) in model.params.iter_mut().zip(&grad) {
                *p -= step * g;
            }
        }
    }
    let mean_loss = raw.iter().sum::<f64>() / n as f64;
    if !mean_loss.is_finite() || mean_loss > DIVERGENCE_LIMIT {
        return Err(Error::Diverged { epoch, mean_loss });
    }
    if let Some(w) = wrapper {
        w.finish_epoch(&raw)?;
    }
    Ok(EpochTrace {
        epoch,
        sample_ids: data.ids.clone(),
        raw_losses: raw,
        modulated: modulated.into_iter().flatten().collect(),
        mean_loss,
    })
}

/// One pass of mini-batch gradient descent over `data` in a seeded random
/// order. Each sample's gradient is scaled by its wrapper gradient factor;
/// the wrapper, if any, is advanced with the epoch's raw losses at the end.
pub fn train_epoch(
    model: &mut Model,
    data: &PrefixDataset<'_>,
    spec: &TaskSpec,
    wrapper: Option<&mut Crucial>,
    epoch: usize,
    rng: &mut SeededRng,
    exec: Exec,
) -> Result<EpochTrace> {
    spec.validate()?;
    let prepared = Prepared::new(model, data, spec.base_loss)?;
    run_epoch(model, &prepared, spec, wrapper, epoch, rng, exec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub mean_loss: f64,
    /// `mse`, `auc` or `accuracy`.
    pub metric_name: &'static str,
    pub metric: f64,
}

/// Mean base loss and the task metric: squared error for regression, AUC for
/// two classes, accuracy otherwise.
pub fn evaluate(model: &Model, data: &PrefixDataset<'_>, base_loss: BaseLoss, exec: Exec) -> Result<Evaluation> {
    let prepared = Prepared::new(model, data, base_loss)?;
    let parts = exec.map_ranges(prepared.xs.len(), CHUNK * 4, |_, r| {
        r.map(|i| model.forward(&prepared.xs[i])).collect::<Result<Vec<_>>>()
    });
    let mut outs = Vec::with_capacity(prepared.xs.len());
    for p in parts {
        outs.extend(p?);
    }
    let losses = prepared.losses(model, base_loss, exec)?;
    let mean_loss = losses.iter().sum::<f64>() / losses.len() as f64;
    let (metric_name, metric) = match base_loss {
        BaseLoss::Mse => ("mse", mean_loss),
        BaseLoss::CrossEntropy => {
            let classes: Vec<usize> = prepared
                .ys
                .iter()
                .map(|y| match y {
                    Target::Class(c) => *c,
                    Target::Real(_) => 0,
                })
                .collect();
            if model.outputs() == 2 {
                let scores: Vec<f64> = outs.iter().map(|o| softmax(o)[1]).collect();
                let pos: Vec<bool> = classes.iter().map(|&c| c == 1).collect();
                ("auc", auc(&scores, &pos))
            } else {
                let pred: Vec<usize> =
                    outs.iter().map(|o| (0..o.len()).max_by(|&a, &b| o[a].total_cmp(&o[b])).unwrap_or(0)).collect();
                ("accuracy", accuracy(&pred, &classes))
            }
        }
    };
    Ok(Evaluation { mean_loss, metric_name, metric })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub train_loss: f64,
    pub test: Option<Evaluation>,
    /// Wrapper threshold in force during the epoch.
    pub threshold: Option<f64>,
    pub kappa_at_least_one: Option<usize>,
    pub selected: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct FitReport {
    pub epochs: Vec<EpochSummary>,
    /// Full per-sample traces, kept only when requested.
    pub traces: Vec<EpochTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FitOptions {
    pub exec: Exec,
    pub keep_traces: bool,
    /// Evaluate on the test set after every epoch, not only the last.
    pub eval_every_epoch: bool,
}

fn needs_priming(w: &Crucial) -> bool {
    let cfg = w.config();
    cfg.variant == Variant::Sin && cfg.mu_policy == MuPolicy::EpochMean && w.state().prev_stats.is_none()
}

/// Runs `spec.epochs` epochs. A sine-scheduled wrapper that takes its base
/// threshold from the previous epoch is primed with one evaluation pass.
pub fn fit(
    model: &mut Model,
    train: &PrefixDataset<'_>,
    test: Option<&PrefixDataset<'_>>,
    spec: &TaskSpec,
    mut wrapper: Option<&mut Crucial>,
    rng: &mut SeededRng,
    opts: FitOptions,
) -> Result<FitReport> {
    spec.validate()?;
    let prepared = Prepared::new(model, train, spec.base_loss)?;
    if let Some(w) = wrapper.as_deref_mut() {
        if needs_priming(w) {
            w.prime(&prepared.losses(model, spec.base_loss, opts.exec)?)?;
        }
    }
    let mut report = FitReport::default();
    for epoch in 0..spec.epochs {
        let threshold = wrapper.as_deref().map(|w| w.state().threshold);
        let trace = run_epoch(model, &prepared, spec, wrapper.as_deref_mut(), epoch, rng, opts.exec)?;
        let last = epoch + 1 == spec.epochs;
        let eval = match test {
            Some(t) if last || opts.eval_every_epoch => Some(evaluate(model, t, spec.base_loss, opts.exec)?),
            _ => None,
        };
        let wrapped = wrapper.is_some();
        report.epochs.push(EpochSummary {
            epoch,
            train_loss: trace.mean_loss,
            test: eval,
            threshold,
            kappa_at_least_one: wrapped.then(|| trace.kappa_at_least_one()),
            selected: wrapped.then(|| trace.selected()),
        });
        if opts.keep_traces {
            report.traces.push(trace);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct ContinuousReport {
    pub matrix: TransferMatrix,
    pub baseline_seed: u64,
    pub stages: Vec<FitReport>,
}

/// Learns `train[0]`, `train[1]`, ... in turn and after each stage scores
/// the model on every `test[j]`, filling row `i` of the transfer matrix.
/// The baseline row is an untrained model initialised from `baseline_seed`.
#[allow(clippy::too_many_arguments)]
pub fn run_continuous(
    model: &mut Model,
    train: &[PrefixDataset<'_>],
    test: &[PrefixDataset<'_>],
    spec: &TaskSpec,
    rng: &mut SeededRng,
    baseline_seed: u64,
    opts: FitOptions,
) -> Result<ContinuousReport> {
    if train.is_empty() {
        return Err(Error::Empty("prefix list"));
    }
    if train.len() != test.len() {
        return Err(Error::Shape(format!("{} training stages but {} test stages", train.len(), test.len())));
    }
    if train.windows(2).any(|w| w[0].t() >= w[1].t()) {
        return Err(Error::invalid("prefixes", "must be strictly nested in time"));
    }
    let fresh = Model::new(
        model.kind().clone(),
        model.window(),
        model.dims(),
        model.outputs(),
        &mut SeededRng::new(baseline_seed),
    )?;
    let baseline = test
        .iter()
        .map(|t| evaluate(&fresh, t, spec.base_loss, opts.exec).map(|e| e.metric))
        .collect::<Result<Vec<_>>>()?;

    let mut wrapper = spec.wrapper()?;
    let mut r = Vec::with_capacity(train.len());
    let mut stages = Vec::with_capacity(train.len());
    for (i, stage) in train.iter().enumerate() {
        if let Some(w) = wrapper.as_mut() {
            if i == 0 || !spec.accumulate_stats {
                w.reset();
            }
        }
        stages.push(fit(model, stage, None, spec, wrapper.as_mut(), rng, opts)?);
        let row = test
            .iter()
            .map(|t| evaluate(model, t, spec.base_loss, opts.exec).map(|e| e.metric))
            .collect::<Result<Vec<_>>>()?;
        r.push(row);
    }
    Ok(ContinuousReport { matrix: TransferMatrix::new(r, baseline)?, baseline_seed, stages })
}
