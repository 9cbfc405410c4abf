//! Class balancing, leave-one-project-out folds and precision/recall/F1.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::pairmodel::{
    dialog_examples, train_model, LabeledDialog, ModelConfig, PairModel, Target, Thresholds, TrainReport,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = ConfusionCounts::default();
        for (p, a) in pairs {
            c.record(p, a);
        }
        c
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    #[serde(rename = "P")]
    pub precision: f64,
    #[serde(rename = "R")]
    pub recall: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and their harmonic mean; every 0/0 is 0. F1 uses the
/// equivalent form `2tp / (2tp + fp + fn)`, a single rounding.
pub fn compute_prf(c: &ConfusionCounts) -> Prf {
    Prf {
        precision: ratio(c.tp, c.tp + c.fp),
        recall: ratio(c.tp, c.tp + c.fn_),
        f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
    }
}

/// Resamples the minority class with replacement until both classes are
/// equally large. The originals come first, in order.
pub fn bootstrap_balance_by<T: Clone>(items: &[T], label: impl Fn(&T) -> bool, seed: u64) -> Result<Vec<T>> {
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..items.len()).partition(|&i| label(&items[i]));
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Data(format!(
            "balancing needs both classes; got {} positive and {} negative",
            pos.len(),
            neg.len()
        )));
    }
    let (minority, deficit) = if pos.len() < neg.len() {
        (&pos, neg.len() - pos.len())
    } else {
        (&neg, pos.len() - neg.len())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = items.to_vec();
    out.extend((0..deficit).map(|_| items[minority[rng.gen_range(0..minority.len())]].clone()));
    Ok(out)
}

pub fn bootstrap_balance(dialogs: &[LabeledDialog], seed: u64) -> Result<Vec<LabeledDialog>> {
    bootstrap_balance_by(dialogs, |d| d.issue, seed)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub test: String,
    pub train: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossProjectSplit {
    pub folds: Vec<Fold>,
}

/// One fold per distinct project (first-appearance order); fold `i`
/// tests project `i` and trains on all others.
pub fn cross_project_split<'a>(projects: impl IntoIterator<Item = &'a str>) -> Result<CrossProjectSplit> {
    let mut unique: Vec<&str> = Vec::new();
    for p in projects {
        if !unique.contains(&p) {
            unique.push(p);
        }
    }
    if unique.len() < 2 {
        return Err(Error::Data(format!(
            "cross-project evaluation needs at least 2 projects, found {}",
            unique.len()
        )));
    }
    let folds = unique
        .iter()
        .map(|&test| Fold {
            test: test.to_string(),
            train: unique.iter().filter(|&&p| p != test).map(|p| p.to_string()).collect(),
        })
        .collect();
    Ok(CrossProjectSplit { folds })
}

/// Issue confusion over dialog heads.
pub fn evaluate_issue(model: &PairModel, dialogs: &[&LabeledDialog], encoder: &Encoder, threshold: f64) -> Result<ConfusionCounts> {
    let mut c = ConfusionCounts::default();
    for d in dialogs {
        for ex in dialog_examples(d, Target::Issue, encoder, model.config().arch.window) {
            let p = model.probability(&ex.window, &ex.heuristic)?;
            c.record(p >= threshold, ex.label == 1);
        }
    }
    Ok(c)
}

/// Solution confusion pooled over the body utterances of gold issue dialogs.
pub fn evaluate_solution(model: &PairModel, dialogs: &[&LabeledDialog], encoder: &Encoder, threshold: f64) -> Result<ConfusionCounts> {
    let mut c = ConfusionCounts::default();
    for d in dialogs.iter().filter(|d| d.issue) {
        for ex in dialog_examples(d, Target::Solution, encoder, model.config().arch.window) {
            let p = model.probability(&ex.window, &ex.heuristic)?;
            c.record(p >= threshold, ex.label == 1);
        }
    }
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub counts: ConfusionCounts,
    #[serde(flatten)]
    pub prf: Prf,
}

/// `{per_fold: {project: {P, R, F1, counts}}, macro_average: {P, R, F1}}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_fold: BTreeMap<String, FoldMetrics>,
    /// Unweighted mean over folds.
    pub macro_average: Prf,
}

impl MetricsReport {
    pub fn from_counts(counts: BTreeMap<String, ConfusionCounts>) -> Self {
        let per_fold: BTreeMap<String, FoldMetrics> = counts
            .into_iter()
            .map(|(k, c)| (k, FoldMetrics { counts: c, prf: compute_prf(&c) }))
            .collect();
        let n = per_fold.len().max(1) as f64;
        let mut avg = Prf::default();
        for m in per_fold.values() {
            avg.precision += m.prf.precision / n;
            avg.recall += m.prf.recall / n;
            avg.f1 += m.prf.f1 / n;
        }
        MetricsReport {
            per_fold,
            macro_average: avg,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub issue: MetricsReport,
    pub solution: MetricsReport,
}

fn by_project(dialogs: &[LabeledDialog]) -> BTreeMap<&str, Vec<&LabeledDialog>> {
    let mut out: BTreeMap<&str, Vec<&LabeledDialog>> = BTreeMap::new();
    for d in dialogs {
        out.entry(d.project.as_str()).or_default().push(d);
    }
    out
}

/// Scores trained models on each project separately.
pub fn evaluate_models(
    dialogs: &[LabeledDialog],
    issue: &PairModel,
    solution: &PairModel,
    encoder: &Encoder,
    thresholds: Thresholds,
) -> Result<EvalReport> {
    issue.check_encoder(encoder)?;
    solution.check_encoder(encoder)?;
    let mut ic = BTreeMap::new();
    let mut sc = BTreeMap::new();
    for (project, ds) in by_project(dialogs) {
        ic.insert(project.to_string(), evaluate_issue(issue, &ds, encoder, thresholds.issue)?);
        sc.insert(project.to_string(), evaluate_solution(solution, &ds, encoder, thresholds.solution)?);
    }
    Ok(EvalReport {
        issue: MetricsReport::from_counts(ic),
        solution: MetricsReport::from_counts(sc),
    })
}

/// Leave-one-project-out: train both models on the other projects (issue
/// training folds balanced by bootstrap), test on the held-out one.
pub fn cross_project_evaluate(dialogs: &[LabeledDialog], encoder: &Encoder, cfg: &ModelConfig) -> Result<(EvalReport, Vec<TrainReport>)> {
    let split = cross_project_split(dialogs.iter().map(|d| d.project.as_str()))?;
    let mut ic = BTreeMap::new();
    let mut sc = BTreeMap::new();
    let mut reports = Vec::new();
    for fold in &split.folds {
        let train: Vec<LabeledDialog> = dialogs.iter().filter(|d| d.project != fold.test).cloned().collect();
        let test: Vec<&LabeledDialog> = dialogs.iter().filter(|d| d.project == fold.test).collect();
        let issue_cfg = ModelConfig {
            balance_classes: true,
            ..cfg.clone()
        };
        let (issue, ir) = train_model(&train, Target::Issue, encoder, &issue_cfg)?;
        let (solution, sr) = train_model(&train, Target::Solution, encoder, cfg)?;
        ic.insert(fold.test.clone(), evaluate_issue(&issue, &test, encoder, cfg.issue_threshold)?);
        sc.insert(fold.test.clone(), evaluate_solution(&solution, &test, encoder, cfg.solution_threshold)?);
        reports.extend([ir, sr]);
    }
    Ok((
        EvalReport {
            issue: MetricsReport::from_counts(ic),
            solution: MetricsReport::from_counts(sc),
        },
        reports,
    ))
}
