//! Dialog embedding layer: a convolution stack over the utterance vector,
//! hand-crafted attributes, and local attention over the neighbouring
//! utterances, fused into one feature vector (256 + 29 + 128 = 413 with the
//! default architecture).

pub mod heuristics;
pub mod topic;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use heuristics::{text_attributes, HeuristicExtractor, HeuristicVector, HEURISTIC_DIM};
pub use topic::{scope_distance, top_terms, topic_profile, TopicIndex};

use crate::disentangler::Dialog;
use crate::encoder::{build_local_window, Encoder, LocalWindow};
use crate::error::{Error, Result};
use crate::tensor::{AttentionOutput, ParamId, ParamSet, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    /// Kernel counts of the sequential convolution-pooling stages.
    pub conv_widths: Vec<usize>,
    pub kernel_size: usize,
    pub attention_dim: usize,
    /// Window radius for the contextual extractor.
    pub window: usize,
    /// Attention falls back to uniform weights when the score sum is at
    /// most this fraction of the absolute score mass.
    pub attention_min_mass: f64,
    pub dropout: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            conv_widths: vec![1024, 512, 256],
            kernel_size: 3,
            attention_dim: 128,
            window: 1,
            attention_min_mass: 0.05,
            dropout: 0.6,
        }
    }
}

impl ArchConfig {
    pub fn textual_dim(&self) -> usize {
        self.conv_widths.last().copied().unwrap_or(0)
    }

    pub fn fused_dim(&self) -> usize {
        self.textual_dim() + HEURISTIC_DIM + self.attention_dim
    }

    /// Checks the stack against an encoder of width `input_dim`.
    pub fn validate(&self, input_dim: usize) -> Result<()> {
        if self.conv_widths.is_empty() || self.conv_widths.contains(&0) {
            return Err(Error::Config("conv_widths needs at least one nonzero stage".into()));
        }
        if self.kernel_size == 0 || self.attention_dim == 0 {
            return Err(Error::Config("kernel_size and attention_dim must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(0.0..1.0).contains(&self.attention_min_mass) {
            return Err(Error::Config("attention_min_mass must lie in [0, 1)".into()));
        }
        let mut len = input_dim;
        for (i, &w) in self.conv_widths.iter().enumerate() {
            if len < self.kernel_size {
                return Err(Error::Contract(format!(
                    "conv stage {i} sees a sequence of {len}, shorter than kernel size {}",
                    self.kernel_size
                )));
            }
            len = w;
        }
        Ok(())
    }
}

/// Z-score statistics for the heuristic attributes, fitted on training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Population statistics per column; constant columns keep scale 1.
    pub fn fit(rows: &[HeuristicVector]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Data("cannot fit standardization on zero rows".into()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; HEURISTIC_DIM];
        for r in rows {
            mean.iter_mut().zip(r).for_each(|(m, x)| *m += x / n);
        }
        let mut var = vec![0.0; HEURISTIC_DIM];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m) / n;
            }
        }
        let std = var.into_iter().map(|v| if v > 1e-12 { v.sqrt() } else { 1.0 }).collect();
        Ok(Standardizer { mean, std })
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.mean.len() {
            return Err(Error::Contract(format!(
                "standardizer expects {} values, got {}",
                self.mean.len(),
                row.len()
            )));
        }
        Ok(row.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (x - m) / s).collect())
    }
}

/// Concatenates the three feature segments after checking their widths.
pub fn fuse_features(textual: &[f64], heuristic: &[f64], context: &[f64], arch: &ArchConfig) -> Result<Vec<f64>> {
    for (name, got, want) in [
        ("textual", textual.len(), arch.textual_dim()),
        ("heuristic", heuristic.len(), HEURISTIC_DIM),
        ("context", context.len(), arch.attention_dim),
    ] {
        if got != want {
            return Err(Error::Contract(format!("{name} segment has {got} values, expected {want}")));
        }
    }
    Ok([textual, heuristic, context].concat())
}

/// Tape handles produced by one embedding pass.
#[derive(Clone, Debug)]
pub struct Embedded {
    pub fused: Var,
    pub textual: Var,
    pub context: Var,
    pub attention: AttentionOutput,
}

/// Parameter handles of the embedding layer inside a shared [`ParamSet`].
#[derive(Clone, Debug)]
pub struct DialogEmbedder {
    arch: ArchConfig,
    input_dim: usize,
    conv: Vec<(ParamId, ParamId)>,
    query: ParamId,
    key: ParamId,
    value: ParamId,
}

fn conv_names(i: usize) -> (String, String) {
    (format!("conv{i}.kernels"), format!("conv{i}.bias"))
}

const ATTENTION_NAMES: [&str; 3] = ["attn.query", "attn.key", "attn.value"];

impl DialogEmbedder {
    /// Registers freshly initialised parameters in `params`.
    pub fn new<R: Rng>(arch: ArchConfig, input_dim: usize, params: &mut ParamSet, rng: &mut R) -> Result<Self> {
        arch.validate(input_dim)?;
        let h = arch.kernel_size;
        let mut conv = Vec::new();
        for (i, &m) in arch.conv_widths.iter().enumerate() {
            let (kn, bn) = conv_names(i);
            let k = params.add(kn, Tensor::glorot_uniform(&[m, h], h, m, rng))?;
            let b = params.add(bn, Tensor::zeros(&[m]))?;
            conv.push((k, b));
        }
        let (a, d) = (arch.attention_dim, input_dim);
        let mut attn = ATTENTION_NAMES.iter().map(|n| params.add(*n, Tensor::glorot_uniform(&[a, d], d, a, rng)));
        let (query, key, value) = (attn.next().unwrap()?, attn.next().unwrap()?, attn.next().unwrap()?);
        Ok(DialogEmbedder {
            arch,
            input_dim,
            conv,
            query,
            key,
            value,
        })
    }

    /// Looks up existing parameters by name, checking their shapes.
    pub fn bind(arch: ArchConfig, input_dim: usize, params: &ParamSet) -> Result<Self> {
        arch.validate(input_dim)?;
        let find = |name: &str, shape: &[usize]| -> Result<ParamId> {
            let id = params
                .id(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))?;
            let got = params.get(id).value.shape();
            if got != shape {
                return Err(Error::Checkpoint(format!("parameter `{name}` has shape {got:?}, expected {shape:?}")));
            }
            Ok(id)
        };
        let mut conv = Vec::new();
        for (i, &m) in arch.conv_widths.iter().enumerate() {
            let (kn, bn) = conv_names(i);
            conv.push((find(&kn, &[m, arch.kernel_size])?, find(&bn, &[m])?));
        }
        let shape = [arch.attention_dim, input_dim];
        Ok(DialogEmbedder {
            query: find(ATTENTION_NAMES[0], &shape)?,
            key: find(ATTENTION_NAMES[1], &shape)?,
            value: find(ATTENTION_NAMES[2], &shape)?,
            arch,
            input_dim,
            conv,
        })
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Conv stack on one utterance vector, with dropout after each stage
    /// while the tape is training.
    pub fn textual_on<R: Rng>(&self, tape: &mut Tape, x: Var, rng: &mut R) -> Var {
        let mut h = x;
        for &(k, b) in &self.conv {
            let (k, b) = (tape.param(k), tape.param(b));
            h = tape.conv1d_maxpool(h, k, b);
            h = tape.dropout(h, self.arch.dropout, rng);
        }
        h
    }

    /// Local attention over a window; padded slots never reach the tape.
    pub fn context_on(&self, tape: &mut Tape, window: &LocalWindow) -> Result<AttentionOutput> {
        self.check_window(window)?;
        let slots: Vec<Option<Var>> = window
            .vectors
            .iter()
            .zip(&window.pad_mask)
            .map(|(v, &pad)| (!pad).then(|| tape.input(Tensor::vector(v.clone()))))
            .collect();
        let (q, k, v) = (tape.param(self.query), tape.param(self.key), tape.param(self.value));
        Ok(tape.local_attention(&slots, window.radius(), window.radius(), q, k, v, self.arch.attention_min_mass))
    }

    /// Full embedding of the window's centre utterance. `heuristic` must
    /// already be standardized.
    pub fn embed_on<R: Rng>(&self, tape: &mut Tape, window: &LocalWindow, heuristic: &[f64], rng: &mut R) -> Result<Embedded> {
        if heuristic.len() != HEURISTIC_DIM {
            return Err(Error::Contract(format!(
                "heuristic segment has {} values, expected {HEURISTIC_DIM}",
                heuristic.len()
            )));
        }
        let attention = self.context_on(tape, window)?;
        let centre = tape.input(Tensor::vector(window.vectors[window.radius()].clone()));
        let textual = self.textual_on(tape, centre, rng);
        let heur = tape.input(Tensor::vector(heuristic.to_vec()));
        let fused = tape.concat(&[textual, heur, attention.context]);
        Ok(Embedded {
            fused,
            textual,
            context: attention.context,
            attention,
        })
    }

    /// Inference-mode textual feature of one vector.
    pub fn textual_features(&self, params: &ParamSet, encoding: &[f64]) -> Result<Vec<f64>> {
        if encoding.len() != self.input_dim {
            return Err(Error::Contract(format!(
                "encoding has {} values, expected {}",
                encoding.len(),
                self.input_dim
            )));
        }
        let mut tape = Tape::new(params);
        let x = tape.input(Tensor::vector(encoding.to_vec()));
        let out = self.textual_on(&mut tape, x, &mut rand::rngs::mock::StepRng::new(0, 0));
        Ok(tape.value(out).data().to_vec())
    }

    /// Inference-mode context vector and attention weights of a window.
    pub fn context_features(&self, params: &ParamSet, window: &LocalWindow) -> Result<(Vec<f64>, AttentionOutput)> {
        let mut tape = Tape::new(params);
        let out = self.context_on(&mut tape, window)?;
        Ok((tape.value(out.context).data().to_vec(), out))
    }

    fn check_window(&self, window: &LocalWindow) -> Result<()> {
        let r = window.radius();
        if window.vectors.len() != 2 * r + 1 || window.pad_mask.len() != window.vectors.len() {
            return Err(Error::Contract("window must hold 2k + 1 slots".into()));
        }
        if window.pad_mask[r] {
            return Err(Error::Contract("window centre is padding".into()));
        }
        if let Some(v) = window.vectors.iter().find(|v| v.len() != self.input_dim) {
            return Err(Error::Contract(format!(
                "window vector has {} values, expected {}",
                v.len(),
                self.input_dim
            )));
        }
        Ok(())
    }
}

/// Everything the models need about one dialog: a window and a raw
/// attribute row for the head (index 0) and each body utterance.
#[derive(Clone, Debug)]
pub struct DialogInputs {
    pub windows: Vec<LocalWindow>,
    pub heuristics: Vec<HeuristicVector>,
}

impl DialogInputs {
    /// The head sits at the start of `[head, b1, .., bn]`, so its window is
    /// `[pad, head, b1]` at radius 1; body utterance `b_i` is centred at `i`.
    pub fn build(dialog: &Dialog, encoder: &Encoder, extractor: &HeuristicExtractor, radius: usize) -> Self {
        Self::new(dialog, encoder, extractor.dialog_attributes(dialog), radius)
    }

    /// Same as [`DialogInputs::build`] with precomputed attribute rows.
    pub fn new(dialog: &Dialog, encoder: &Encoder, heuristics: Vec<HeuristicVector>, radius: usize) -> Self {
        assert_eq!(heuristics.len(), dialog.body.len() + 1, "one attribute row per head and body utterance");
        let sequence: Vec<Vec<f64>> = std::iter::once(&dialog.head)
            .chain(&dialog.body)
            .map(|u| encoder.encode(u).vector)
            .collect();
        DialogInputs {
            windows: (0..sequence.len()).map(|i| build_local_window(&sequence, i, radius)).collect(),
            heuristics,
        }
    }

    pub fn head(&self) -> (&LocalWindow, &HeuristicVector) {
        (&self.windows[0], &self.heuristics[0])
    }

    pub fn body(&self) -> impl Iterator<Item = (&LocalWindow, &HeuristicVector)> {
        self.windows.iter().zip(&self.heuristics).skip(1)
    }
}

#[cfg(test)]
mod tests;
