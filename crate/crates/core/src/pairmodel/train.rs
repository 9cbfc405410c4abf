//! Mini-batch training with Adam, a seeded validation split and early
//! stopping on validation loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::network::{EncoderStamp, Example, PairModel};
use super::{LabeledDialog, ModelConfig, Target};
use crate::dialog_embed::{DialogInputs, Standardizer};
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::eval::bootstrap_balance;
use crate::tensor::{Adam, Tape, Tensor};

/// Outcome of one epoch as seen by [`EarlyStopping`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Progress {
    Improved,
    Waiting,
    Stop,
}

/// Stops after `patience` consecutive epochs without a strict improvement.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: Option<usize>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience: patience.max(1),
            best: f64::INFINITY,
            best_epoch: None,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> Progress {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = Some(epoch);
            self.stale = 0;
            Progress::Improved
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                Progress::Stop
            } else {
                Progress::Waiting
            }
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainReport {
    pub target: Target,
    pub train_examples: usize,
    pub validation_examples: usize,
    /// Epochs actually run (1-based count).
    pub epochs: usize,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub train_loss: Vec<f64>,
    /// Monitored loss per epoch: validation loss, or training loss when
    /// the data is too small to hold out a split.
    pub monitored_loss: Vec<f64>,
}

/// Drives `epoch_fn(epoch)` (returning the monitored loss) until early
/// stopping triggers or `max_epochs` is reached. `on_improve` runs after
/// every improving epoch. Returns `(epochs_run, best_epoch)`, both 1-based.
pub fn run_epochs(
    max_epochs: usize,
    patience: usize,
    mut epoch_fn: impl FnMut(usize) -> Result<f64>,
    mut on_improve: impl FnMut(usize),
) -> Result<(usize, usize)> {
    let mut stopper = EarlyStopping::new(patience);
    let mut ran = 0;
    for epoch in 1..=max_epochs {
        ran = epoch;
        let loss = epoch_fn(epoch)?;
        if !loss.is_finite() {
            return Err(Error::Contract(format!("non-finite loss at epoch {epoch}")));
        }
        match stopper.observe(epoch, loss) {
            Progress::Improved => on_improve(epoch),
            Progress::Waiting => {}
            Progress::Stop => break,
        }
    }
    Ok((ran, stopper.best_epoch().unwrap_or(ran)))
}

/// Examples of one dialog for `target`: its head, or its labeled body.
pub fn dialog_examples(d: &LabeledDialog, target: Target, encoder: &Encoder, radius: usize) -> Vec<Example> {
    let inputs = DialogInputs::new(&d.dialog, encoder, d.heuristics.clone(), radius);
    match target {
        Target::Issue => {
            let (w, h) = inputs.head();
            vec![Example {
                window: w.clone(),
                heuristic: h.to_vec(),
                label: d.issue as usize,
            }]
        }
        Target::Solution => inputs
            .body()
            .zip(&d.solution_labels)
            .map(|((w, h), &y)| Example {
                window: w.clone(),
                heuristic: h.to_vec(),
                label: y as usize,
            })
            .collect(),
    }
}

/// Dialogs a target trains on: every dialog for issues, issue dialogs
/// (gold labels) for solutions.
pub fn eligible(data: &[LabeledDialog], target: Target) -> Vec<&LabeledDialog> {
    data.iter().filter(|d| target == Target::Issue || d.issue).collect()
}

pub fn examples_for(dialogs: &[&LabeledDialog], target: Target, encoder: &Encoder, radius: usize) -> Vec<Example> {
    dialogs
        .iter()
        .flat_map(|d| dialog_examples(d, target, encoder, radius))
        .collect()
}

fn mean_loss(model: &PairModel, examples: &[Example]) -> Result<f64> {
    let mut total = 0.0;
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    for ex in examples {
        let mut tape = Tape::new(model.params());
        let loss = model.loss_on(&mut tape, ex, &mut rng)?;
        total += tape.value(loss).data()[0];
    }
    Ok(total / examples.len() as f64)
}

/// Trains one model. Bit-reproducible given `(data, encoder, cfg)`.
pub fn train_model(data: &[LabeledDialog], target: Target, encoder: &Encoder, cfg: &ModelConfig) -> Result<(PairModel, TrainReport)> {
    cfg.validate()?;
    let dialogs = eligible(data, target);
    let radius = cfg.arch.window;
    let all = examples_for(&dialogs, target, encoder, radius);
    let positives = all.iter().filter(|e| e.label == 1).count();
    if all.is_empty() || positives == 0 || positives == all.len() {
        return Err(Error::Data(format!(
            "{} training needs both classes; got {positives} positive of {} examples from {} dialogs",
            target.name(),
            all.len(),
            dialogs.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..dialogs.len()).collect();
    order.shuffle(&mut rng);
    let held = if dialogs.len() >= 2 {
        ((dialogs.len() as f64 * cfg.validation_fraction).round() as usize).min(dialogs.len() - 1)
    } else {
        0
    };
    let (val_idx, train_idx) = order.split_at(held);
    let mut train_dialogs: Vec<LabeledDialog> = train_idx.iter().map(|&i| dialogs[i].clone()).collect();
    if cfg.balance_classes && target == Target::Issue && train_dialogs.iter().any(|d| d.issue) && train_dialogs.iter().any(|d| !d.issue) {
        train_dialogs = bootstrap_balance(&train_dialogs, cfg.seed)?;
    }
    let train_refs: Vec<&LabeledDialog> = train_dialogs.iter().collect();
    let val_refs: Vec<&LabeledDialog> = val_idx.iter().map(|&i| dialogs[i]).collect();
    let train = examples_for(&train_refs, target, encoder, radius);
    let val = examples_for(&val_refs, target, encoder, radius);
    if train.is_empty() {
        return Err(Error::Data(format!("{} training split is empty", target.name())));
    }

    let rows: Vec<_> = train
        .iter()
        .map(|e| {
            let mut r = [0.0; crate::dialog_embed::HEURISTIC_DIM];
            r.copy_from_slice(&e.heuristic);
            r
        })
        .collect();
    let standardizer = Standardizer::fit(&rows)?;
    let mut model = PairModel::new(target, cfg.clone(), EncoderStamp::of(encoder), standardizer, &mut rng)?;
    let mut adam = Adam::new(cfg.adam(), model.params());

    let mut batch_order: Vec<usize> = (0..train.len()).collect();
    let mut train_loss = Vec::new();
    let mut monitored = Vec::new();
    let mut best: Vec<Tensor> = model.params().iter().map(|p| p.value.clone()).collect();

    let (epochs, best_epoch) = {
        let model = &mut model;
        let best = &mut best;
        let train_loss = &mut train_loss;
        let monitored = &mut monitored;
        // The epoch closure and the snapshot closure both need the model;
        // a RefCell keeps the borrow checker satisfied.
        let cell = std::cell::RefCell::new(model);
        run_epochs(
            cfg.max_epochs,
            cfg.early_stop_patience,
            |_| {
                let mut m = cell.borrow_mut();
                batch_order.shuffle(&mut rng);
                let mut total = 0.0;
                for batch in batch_order.chunks(cfg.batch_size) {
                    m.params_mut().zero_grads();
                    for &i in batch {
                        let grads = {
                            let mut tape = Tape::new(m.params()).training(true);
                            let loss = m.loss_on(&mut tape, &train[i], &mut rng)?;
                            total += tape.value(loss).data()[0];
                            tape.backward(loss)
                        };
                        m.params_mut().accumulate(&grads);
                    }
                    m.params_mut().scale_grads(1.0 / batch.len() as f64);
                    adam.step(m.params_mut());
                }
                if !m.params().all_finite() {
                    return Err(Error::Contract(format!("{} model diverged", m.target().name())));
                }
                train_loss.push(total / train.len() as f64);
                let watched = if val.is_empty() { mean_loss(&m, &train)? } else { mean_loss(&m, &val)? };
                monitored.push(watched);
                Ok(watched)
            },
            |_| {
                let m = cell.borrow();
                *best = m.params().iter().map(|p| p.value.clone()).collect();
            },
        )?
    };

    for (p, v) in model.params_mut().iter_mut().zip(best) {
        p.value = v;
    }
    model.quantize();
    let report = TrainReport {
        target,
        train_examples: train.len(),
        validation_examples: val.len(),
        epochs,
        best_epoch,
        train_loss,
        monitored_loss: monitored,
    };
    Ok((model, report))
}
