//! The classifier shared by both targets: dialog embedding, then
//! `fused -> hidden (ReLU, dropout) -> 2` logits.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelConfig, Target};
use crate::dialog_embed::{DialogEmbedder, Embedded, Standardizer, HEURISTIC_DIM};
use crate::encoder::{Encoder, LocalWindow};
use crate::error::{Error, Result};
use crate::tensor::{read_checkpoint, write_checkpoint, ParamId, ParamSet, Tape, Tensor, Var};

const KIND: &str = "pair-model";

/// Identity of the encoder a model was trained against.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderStamp {
    pub hash: String,
    pub dim: usize,
}

impl EncoderStamp {
    pub fn of(encoder: &Encoder) -> Self {
        EncoderStamp {
            hash: encoder.config_hash(),
            dim: encoder.dim(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Meta {
    kind: String,
    target: Target,
    config: ModelConfig,
    encoder: EncoderStamp,
    standardizer: Standardizer,
}

#[derive(Clone, Debug)]
pub struct PairModel {
    target: Target,
    cfg: ModelConfig,
    encoder: EncoderStamp,
    standardizer: Standardizer,
    params: ParamSet,
    embedder: DialogEmbedder,
    fc1: (ParamId, ParamId),
    fc2: (ParamId, ParamId),
}

/// One classifier input: a window around the utterance and its raw
/// (unstandardized) attribute row.
#[derive(Clone, Debug)]
pub struct Example {
    pub window: LocalWindow,
    pub heuristic: Vec<f64>,
    pub label: usize,
}

fn fc_names(i: usize) -> (String, String) {
    (format!("fc{i}.weight"), format!("fc{i}.bias"))
}

impl PairModel {
    pub fn new<R: Rng>(target: Target, cfg: ModelConfig, encoder: EncoderStamp, standardizer: Standardizer, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut params = ParamSet::new();
        let embedder = DialogEmbedder::new(cfg.arch.clone(), encoder.dim, &mut params, rng)?;
        let (fused, hidden) = (cfg.arch.fused_dim(), cfg.fc_hidden);
        let mut layer = |i: usize, rows: usize, cols: usize| -> Result<(ParamId, ParamId)> {
            let (wn, bn) = fc_names(i);
            Ok((
                params.add(wn, Tensor::glorot_uniform(&[rows, cols], cols, rows, rng))?,
                params.add(bn, Tensor::zeros(&[rows]))?,
            ))
        };
        let fc1 = layer(1, hidden, fused)?;
        let fc2 = layer(2, 2, hidden)?;
        let model = PairModel {
            target,
            cfg,
            encoder,
            standardizer,
            params,
            embedder,
            fc1,
            fc2,
        };
        model.check_standardizer()?;
        Ok(model)
    }

    fn check_standardizer(&self) -> Result<()> {
        let s = &self.standardizer;
        if s.mean.len() != HEURISTIC_DIM || s.std.len() != HEURISTIC_DIM || s.std.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Checkpoint("standardization statistics are malformed".into()));
        }
        Ok(())
    }

    pub fn target(&self) -> Target {
        self.target
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn encoder_stamp(&self) -> &EncoderStamp {
        &self.encoder
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn embedder(&self) -> &DialogEmbedder {
        &self.embedder
    }

    /// Fails unless `encoder` matches the one the model was trained with.
    pub fn check_encoder(&self, encoder: &Encoder) -> Result<()> {
        let runtime = EncoderStamp::of(encoder);
        if runtime.dim != self.encoder.dim {
            return Err(Error::Checkpoint(format!(
                "{} model expects {}-dim encodings but the encoder emits {}",
                self.target.name(),
                self.encoder.dim,
                runtime.dim
            )));
        }
        if runtime.hash != self.encoder.hash {
            return Err(Error::Checkpoint(format!(
                "{} model was trained with encoder {} but the runtime encoder is {}; re-train or match the encoder settings",
                self.target.name(),
                self.encoder.hash,
                runtime.hash
            )));
        }
        Ok(())
    }

    /// Classifier head on top of an already-fused vector.
    pub fn head_on<R: Rng>(&self, tape: &mut Tape, fused: Var, rng: &mut R) -> Var {
        let (w1, b1) = (tape.param(self.fc1.0), tape.param(self.fc1.1));
        let h = tape.linear(fused, w1, b1);
        let h = tape.relu(h);
        let h = tape.dropout(h, self.cfg.arch.dropout, rng);
        let (w2, b2) = (tape.param(self.fc2.0), tape.param(self.fc2.1));
        tape.linear(h, w2, b2)
    }

    /// Two-class logits for one window.
    pub fn logits_on<R: Rng>(&self, tape: &mut Tape, window: &LocalWindow, heuristic: &[f64], rng: &mut R) -> Result<(Var, Embedded)> {
        let z = self.standardizer.apply(heuristic)?;
        let emb = self.embedder.embed_on(tape, window, &z, rng)?;
        let logits = self.head_on(tape, emb.fused, rng);
        Ok((logits, emb))
    }

    /// Probability of the positive class.
    pub fn probability(&self, window: &LocalWindow, heuristic: &[f64]) -> Result<f64> {
        let mut tape = Tape::new(&self.params);
        let (logits, _) = self.logits_on(&mut tape, window, heuristic, &mut rand::rngs::mock::StepRng::new(0, 0))?;
        let probs = tape.softmax(logits);
        Ok(tape.value(probs).data()[1])
    }

    /// Cross-entropy of one example, with dropout when `rng` is given.
    pub fn loss_on<R: Rng>(&self, tape: &mut Tape, ex: &Example, rng: &mut R) -> Result<Var> {
        let (logits, _) = self.logits_on(tape, &ex.window, &ex.heuristic, rng)?;
        Ok(tape.softmax_cross_entropy(logits, ex.label))
    }

    /// Rounds every parameter to the checkpoint's f32 precision.
    pub fn quantize(&mut self) {
        for p in self.params.iter_mut() {
            p.value.data_mut().iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        let meta = Meta {
            kind: KIND.into(),
            target: self.target,
            config: self.cfg.clone(),
            encoder: self.encoder.clone(),
            standardizer: self.standardizer.clone(),
        };
        let meta = serde_json::to_value(meta).map_err(|e| Error::Checkpoint(e.to_string()))?;
        write_checkpoint(out, &self.params, meta)
    }

    pub fn load<R: BufRead>(input: R) -> Result<Self> {
        let (manifest, tensors) = read_checkpoint(input)?;
        if manifest.meta.get("kind").and_then(|k| k.as_str()) != Some(KIND) {
            return Err(Error::Checkpoint("not an issue/solution model checkpoint".into()));
        }
        let meta: Meta = serde_json::from_value(manifest.meta)
            .map_err(|e| Error::Checkpoint(format!("bad model metadata: {e}")))?;
        let mut model = PairModel::new(
            meta.target,
            meta.config,
            meta.encoder,
            meta.standardizer,
            &mut ChaCha8Rng::seed_from_u64(0),
        )?;
        model.params.load_values(tensors)?;
        if !model.params.all_finite() {
            return Err(Error::Checkpoint("checkpoint holds non-finite parameters".into()));
        }
        Ok(model)
    }

    pub fn load_file(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::load(std::io::BufReader::new(file))
    }

    pub fn save_file(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.save(std::io::BufWriter::new(file))
    }
}
