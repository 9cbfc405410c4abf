//! Issue and solution classifiers and the extraction pipeline built on
//! them: disentangle, gate each dialog on its head, then pick solution
//! utterances from the body.

pub mod dataset;
pub mod network;
pub mod train;

use serde::{Deserialize, Serialize};

pub use dataset::{build_labeled_dialogs, read_labeled_records, LabeledDialog, LabeledRecord};
pub use network::{EncoderStamp, Example, PairModel};
pub use train::{dialog_examples, eligible, examples_for, run_epochs, train_model, EarlyStopping, Progress, TrainReport};

use crate::corpus::ChatLog;
use crate::dialog_embed::{ArchConfig, DialogInputs, HeuristicExtractor};
use crate::disentangler::{assemble_dialogs, Dialog, DisentangleConfig, LinkFeatureConfig, ReplyScorer};
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::lexicon::HeuristicLexicons;
use crate::tensor::AdamConfig;

/// Lowest and highest thresholds accepted.
pub const THRESHOLD_RANGE: (f64, f64) = (0.2, 0.8);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Issue,
    Solution,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Issue => "issue",
            Target::Solution => "solution",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub arch: ArchConfig,
    /// Width of the hidden classifier layer.
    pub fc_hidden: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    /// Share of training dialogs held out to drive early stopping.
    pub validation_fraction: f64,
    pub issue_threshold: f64,
    pub solution_threshold: f64,
    /// Bootstrap the minority class before issue training.
    pub balance_classes: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            arch: ArchConfig::default(),
            fc_hidden: 64,
            batch_size: 8,
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            max_epochs: 100,
            early_stop_patience: 5,
            validation_fraction: 0.1,
            issue_threshold: 0.5,
            solution_threshold: 0.4,
            balance_classes: false,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = THRESHOLD_RANGE;
        for (name, t) in [("issue_threshold", self.issue_threshold), ("solution_threshold", self.solution_threshold)] {
            if !(lo..=hi).contains(&t) {
                return Err(Error::Config(format!("{name} {t} outside [{lo}, {hi}]")));
            }
        }
        if self.early_stop_patience == 0 || self.batch_size == 0 || self.max_epochs == 0 || self.fc_hidden == 0 {
            return Err(Error::Config(
                "early_stop_patience, batch_size, max_epochs and fc_hidden must be >= 1".into(),
            ));
        }
        if !(0.0..=0.5).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "validation_fraction {} outside [0, 0.5]",
                self.validation_fraction
            )));
        }
        if !(self.lr > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("lr must be positive and betas must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            ..AdamConfig::default()
        }
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            issue: self.issue_threshold,
            solution: self.solution_threshold,
        }
    }
}

/// Decision boundaries; a probability equal to a threshold is positive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub issue: f64,
    pub solution: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        ModelConfig::default().thresholds()
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        ModelConfig {
            issue_threshold: self.issue,
            solution_threshold: self.solution,
            ..ModelConfig::default()
        }
        .validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub p_issue: f64,
    /// Empty when the head was rejected.
    pub p_solution: Vec<f64>,
    pub thresholds: Thresholds,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairStatus {
    Answered,
    Unresolved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionUtterance {
    pub text: String,
    pub author: String,
    pub time: i64,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IssueSolutionPair {
    pub community_id: String,
    pub subject_id: usize,
    pub issue_text: String,
    pub solutions: Vec<SolutionUtterance>,
    pub status: PairStatus,
    pub p_issue: f64,
}

/// Issue decision for a dialog's head.
pub fn predict_issue(dialog: &Dialog, inputs: &DialogInputs, model: &PairModel, threshold: f64) -> Result<(bool, f64)> {
    if dialog.head.clean_text.trim().is_empty() {
        return Err(Error::Contract(format!("dialog {} has an empty head", dialog.subject_id)));
    }
    let (window, heuristic) = inputs.head();
    let p = model.probability(window, heuristic)?;
    Ok((p >= threshold, p))
}

/// Positive-class probability of every body utterance, in order.
pub fn solution_probabilities(inputs: &DialogInputs, model: &PairModel) -> Result<Vec<f64>> {
    inputs.body().map(|(w, h)| model.probability(w, h)).collect()
}

/// Indexes whose probability reaches `threshold`, in order.
pub fn select_solutions(probabilities: &[f64], threshold: f64) -> Vec<usize> {
    probabilities
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Selected body utterances with their probabilities.
pub fn predict_solutions(inputs: &DialogInputs, model: &PairModel, threshold: f64) -> Result<Vec<(usize, f64)>> {
    let probs = solution_probabilities(inputs, model)?;
    Ok(select_solutions(&probs, threshold).into_iter().map(|i| (i, probs[i])).collect())
}

/// Builds the output record from per-dialog decisions.
pub fn make_pair(community_id: &str, dialog: &Dialog, p_issue: f64, selected: &[(usize, f64)]) -> IssueSolutionPair {
    let solutions: Vec<SolutionUtterance> = selected
        .iter()
        .map(|&(i, p)| {
            let u = &dialog.body[i];
            SolutionUtterance {
                text: u.raw_text.clone(),
                author: u.author_id.clone(),
                time: u.time,
                p,
            }
        })
        .collect();
    IssueSolutionPair {
        community_id: community_id.to_string(),
        subject_id: dialog.subject_id,
        issue_text: dialog.head.raw_text.clone(),
        status: if solutions.is_empty() {
            PairStatus::Unresolved
        } else {
            PairStatus::Answered
        },
        solutions,
        p_issue,
    }
}

/// Trained models plus everything needed to run them on a chat.
pub struct PairExtractor<'a> {
    encoder: &'a Encoder,
    lexicons: &'a HeuristicLexicons,
    issue: &'a PairModel,
    solution: &'a PairModel,
    thresholds: Thresholds,
    jobs: usize,
}

impl<'a> PairExtractor<'a> {
    pub fn new(
        encoder: &'a Encoder,
        lexicons: &'a HeuristicLexicons,
        issue: &'a PairModel,
        solution: &'a PairModel,
        thresholds: Thresholds,
    ) -> Result<Self> {
        thresholds.validate()?;
        for (model, want) in [(issue, Target::Issue), (solution, Target::Solution)] {
            if model.target() != want {
                return Err(Error::Checkpoint(format!(
                    "expected a {} model, got a {} model",
                    want.name(),
                    model.target().name()
                )));
            }
            model.check_encoder(encoder)?;
        }
        Ok(PairExtractor {
            encoder,
            lexicons,
            issue,
            solution,
            thresholds,
            jobs: 1,
        })
    }

    /// Worker threads for per-dialog inference; output order is unchanged.
    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs.max(1);
        self
    }

    pub fn thresholds(&self) -> Thresholds {
        self.thresholds
    }

    /// Prediction and optional pair for one dialog of `log`.
    pub fn run_dialog(&self, log: &ChatLog, extractor: &HeuristicExtractor, dialog: &Dialog) -> Result<(Prediction, Option<IssueSolutionPair>)> {
        let issue_inputs = DialogInputs::build(dialog, self.encoder, extractor, self.issue.config().arch.window);
        let (positive, p_issue) = predict_issue(dialog, &issue_inputs, self.issue, self.thresholds.issue)?;
        let mut prediction = Prediction {
            p_issue,
            p_solution: Vec::new(),
            thresholds: self.thresholds,
        };
        if !positive {
            return Ok((prediction, None));
        }
        let solution_inputs = if self.solution.config().arch.window == self.issue.config().arch.window {
            issue_inputs
        } else {
            DialogInputs::build(dialog, self.encoder, extractor, self.solution.config().arch.window)
        };
        prediction.p_solution = solution_probabilities(&solution_inputs, self.solution)?;
        let selected: Vec<(usize, f64)> = select_solutions(&prediction.p_solution, self.thresholds.solution)
            .into_iter()
            .map(|i| (i, prediction.p_solution[i]))
            .collect();
        let pair = make_pair(&log.community_id, dialog, p_issue, &selected);
        Ok((prediction, Some(pair)))
    }

    /// Predictions for already-disentangled dialogs, in input order.
    pub fn run_dialogs(&self, log: &ChatLog, dialogs: &[Dialog]) -> Result<Vec<(Prediction, Option<IssueSolutionPair>)>> {
        let extractor = HeuristicExtractor::new(log, self.lexicons);
        let run = |chunk: &[Dialog]| -> Result<Vec<_>> { chunk.iter().map(|d| self.run_dialog(log, &extractor, d)).collect() };
        if self.jobs <= 1 || dialogs.len() < 2 {
            return run(dialogs);
        }
        let chunk = dialogs.len().div_ceil(self.jobs);
        let parts: Vec<Result<Vec<_>>> = std::thread::scope(|s| {
            let handles: Vec<_> = dialogs.chunks(chunk).map(|c| s.spawn(move || run(c))).collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::Contract("inference worker panicked".into()))))
                .collect()
        });
        let mut out = Vec::with_capacity(dialogs.len());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }

    pub fn pairs_from_dialogs(&self, log: &ChatLog, dialogs: &[Dialog]) -> Result<Vec<IssueSolutionPair>> {
        Ok(self.run_dialogs(log, dialogs)?.into_iter().filter_map(|(_, p)| p).collect())
    }

    /// Full pipeline: disentangle `log`, gate every dialog, extract solutions.
    pub fn assemble_pairs(
        &self,
        log: &ChatLog,
        scorer: &dyn ReplyScorer,
        features: &LinkFeatureConfig,
        cfg: &DisentangleConfig,
    ) -> Result<Vec<IssueSolutionPair>> {
        let dialogs = assemble_dialogs(log, scorer, features, self.lexicons, cfg)?;
        self.pairs_from_dialogs(log, &dialogs)
    }
}
