use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{LinkContext, LinkFeatureConfig};
use crate::error::{Error, Result};
use crate::tensor::{read_checkpoint, write_checkpoint, Adam, AdamConfig, ParamId, ParamSet, Tape, Tensor};

/// Anything that can rate candidate parents for a message.
pub trait ReplyScorer: Sync {
    /// Scores in `[0, 1]` for each candidate (`None` = new dialog).
    fn score_candidates(&self, ctx: &LinkContext, child: usize, candidates: &[Option<usize>]) -> Result<Vec<f64>>;
}

/// Scores known links 1 and everything else 0.
#[derive(Clone, Debug)]
pub struct OracleScorer {
    pub parents: Vec<Option<usize>>,
}

impl ReplyScorer for OracleScorer {
    fn score_candidates(&self, _: &LinkContext, child: usize, candidates: &[Option<usize>]) -> Result<Vec<f64>> {
        let truth = self
            .parents
            .get(child)
            .ok_or_else(|| Error::Contract(format!("oracle has no entry for message {child}")))?;
        Ok(candidates.iter().map(|c| if c == truth { 1.0 } else { 0.0 }).collect())
    }
}

/// Fixed scores per `(child, parent)`; unlisted pairs score `default`.
#[derive(Clone, Debug, Default)]
pub struct TableScorer {
    pub scores: HashMap<(usize, Option<usize>), f64>,
    pub default: f64,
}

impl ReplyScorer for TableScorer {
    fn score_candidates(&self, _: &LinkContext, child: usize, candidates: &[Option<usize>]) -> Result<Vec<f64>> {
        Ok(candidates
            .iter()
            .map(|c| self.scores.get(&(child, *c)).copied().unwrap_or(self.default))
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkScorerConfig {
    pub features: LinkFeatureConfig,
    /// Widths of the softsign hidden layers.
    pub hidden: Vec<usize>,
}

impl Default for LinkScorerConfig {
    fn default() -> Self {
        LinkScorerConfig {
            features: LinkFeatureConfig::default(),
            hidden: vec![512, 512],
        }
    }
}

/// Feedforward link scorer: softsign hidden layers, then a sigmoid unit.
#[derive(Clone, Debug)]
pub struct LinkScorer {
    cfg: LinkScorerConfig,
    params: ParamSet,
    layers: Vec<(ParamId, ParamId)>,
}

const KIND: &str = "link-scorer";

impl LinkScorer {
    pub fn new<R: Rng>(cfg: LinkScorerConfig, rng: &mut R) -> Result<Self> {
        cfg.features.validate()?;
        let mut params = ParamSet::new();
        let mut layers = Vec::new();
        let mut fan_in = cfg.features.dim();
        let widths: Vec<usize> = cfg.hidden.iter().copied().chain([1]).collect();
        for (i, &w) in widths.iter().enumerate() {
            if w == 0 {
                return Err(Error::Config("hidden layer width must be >= 1".into()));
            }
            let wid = params.add(format!("layer{i}.weight"), Tensor::glorot_uniform(&[w, fan_in], fan_in, w, rng))?;
            let bid = params.add(format!("layer{i}.bias"), Tensor::zeros(&[w]))?;
            layers.push((wid, bid));
            fan_in = w;
        }
        Ok(LinkScorer { cfg, params, layers })
    }

    pub fn config(&self) -> &LinkScorerConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Pre-sigmoid output on the tape.
    pub fn logit_on(&self, tape: &mut Tape, x: crate::tensor::Var) -> crate::tensor::Var {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let (w, b) = (tape.param(w), tape.param(b));
            h = tape.linear(h, w, b);
            if i < last {
                h = tape.softsign(h);
            }
        }
        h
    }

    /// Probability that the link described by `features` is a reply.
    pub fn score(&self, features: &[f64]) -> Result<f64> {
        let dim = self.cfg.features.dim();
        if features.len() != dim {
            return Err(Error::Contract(format!(
                "link scorer expects {dim} features, got {}",
                features.len()
            )));
        }
        let mut h = features.to_vec();
        let last = self.layers.len() - 1;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let (w, b) = (&self.params.get(w).value, self.params.get(b).value.data());
            let n = w.shape()[1];
            let mut out: Vec<f64> = w
                .data()
                .chunks_exact(n)
                .zip(b)
                .map(|(row, bias)| bias + row.iter().zip(&h).map(|(a, x)| a * x).sum::<f64>())
                .collect();
            if i < last {
                out.iter_mut().for_each(|v| *v /= 1.0 + v.abs());
            }
            h = out;
        }
        Ok(1.0 / (1.0 + (-h[0]).exp()))
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        let meta = serde_json::json!({ "kind": KIND, "config": self.cfg });
        write_checkpoint(out, &self.params, meta)
    }

    pub fn load<R: BufRead>(input: R) -> Result<Self> {
        let (manifest, tensors) = read_checkpoint(input)?;
        if manifest.meta.get("kind").and_then(|k| k.as_str()) != Some(KIND) {
            return Err(Error::Checkpoint("not a link-scorer checkpoint".into()));
        }
        let cfg: LinkScorerConfig = serde_json::from_value(manifest.meta["config"].clone())
            .map_err(|e| Error::Checkpoint(format!("bad link-scorer config: {e}")))?;
        let mut scorer = LinkScorer::new(cfg, &mut ChaCha8Rng::seed_from_u64(0))?;
        scorer.params.load_values(tensors)?;
        Ok(scorer)
    }
}

impl ReplyScorer for LinkScorer {
    fn score_candidates(&self, ctx: &LinkContext, child: usize, candidates: &[Option<usize>]) -> Result<Vec<f64>> {
        if ctx.config() != &self.cfg.features {
            return Err(Error::Contract("link context and scorer use different feature configs".into()));
        }
        candidates.iter().map(|&p| self.score(&ctx.features(child, p)?)).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinkTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Wrong candidates sampled per message.
    pub negatives: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for LinkTrainConfig {
    fn default() -> Self {
        LinkTrainConfig {
            epochs: 4,
            batch_size: 16,
            negatives: 7,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

/// A log with its true reply structure.
pub struct LinkTrainingLog<'a> {
    pub ctx: LinkContext<'a>,
    pub parents: Vec<Option<usize>>,
}

/// Builds `(features, label)` pairs: the true link plus up to `negatives`
/// sampled candidates from other dialogs (or a fresh start, when the
/// message does not open its dialog).
pub fn link_examples<R: Rng>(logs: &[LinkTrainingLog], negatives: usize, rng: &mut R) -> Result<Vec<(Vec<f64>, f64)>> {
    let mut out = Vec::new();
    for l in logs {
        let lookback = l.ctx.config().lookback;
        let mut dialog_of = vec![0; l.parents.len()];
        for (d, members) in super::link_components(&l.parents).iter().enumerate() {
            for &m in members {
                dialog_of[m] = d;
            }
        }
        for child in 0..l.ctx.log().len() {
            let truth = l.parents[child];
            out.push((l.ctx.features(child, truth)?, 1.0));
            let mut wrong: Vec<Option<usize>> = std::iter::once(None)
                .chain((child.saturating_sub(lookback)..child).map(Some))
                .filter(|c| match c {
                    None => truth.is_some(),
                    Some(p) => dialog_of[*p] != dialog_of[child],
                })
                .collect();
            wrong.shuffle(rng);
            for c in wrong.into_iter().take(negatives) {
                out.push((l.ctx.features(child, c)?, 0.0));
            }
        }
    }
    Ok(out)
}

/// Trains with binary cross-entropy and Adam; returns the mean loss of
/// each epoch.
pub fn train_link_scorer(scorer: &mut LinkScorer, examples: &[(Vec<f64>, f64)], cfg: &LinkTrainConfig) -> Result<Vec<f64>> {
    if examples.is_empty() {
        return Err(Error::Data("no link training examples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.adam, &scorer.params);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size.max(1)) {
            scorer.params.zero_grads();
            for &i in batch {
                let (x, y) = &examples[i];
                let grads = {
                    let mut tape = Tape::new(&scorer.params);
                    let input = tape.input(Tensor::vector(x.clone()));
                    let logit = scorer.logit_on(&mut tape, input);
                    let loss = tape.sigmoid_bce(logit, *y);
                    total += tape.value(loss).data()[0];
                    tape.backward(loss)
                };
                scorer.params.accumulate(&grads);
            }
            scorer.params.scale_grads(1.0 / batch.len() as f64);
            adam.step(&mut scorer.params);
        }
        history.push(total / examples.len() as f64);
    }
    if !scorer.params.all_finite() {
        return Err(Error::Contract("link scorer diverged".into()));
    }
    Ok(history)
}
