use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::{ChatLog, PlaceholderCounts, Utterance};
use crate::disentangler::split_head_body;
use crate::encoder::EncoderConfig;
use crate::lexicon::HeuristicLexicons;

fn toy_arch(widths: &[usize], h: usize, attn: usize) -> ArchConfig {
    ArchConfig {
        conv_widths: widths.to_vec(),
        kernel_size: h,
        attention_dim: attn,
        ..ArchConfig::default()
    }
}

fn set(params: &mut ParamSet, name: &str, data: Vec<f64>) {
    let id = params.id(name).unwrap();
    let shape = params.get(id).value.shape().to_vec();
    params.get_mut(id).value = Tensor::from_vec(&shape, data);
}

fn window(vectors: Vec<Vec<f64>>, pad: &[bool]) -> LocalWindow {
    LocalWindow {
        center: 0,
        vectors,
        pad_mask: pad.to_vec(),
    }
}

/// Straightforward loops: every window, every kernel, ReLU, max.
fn oracle_stage(x: &[f64], kernels: &[Vec<f64>], bias: &[f64]) -> Vec<f64> {
    kernels
        .iter()
        .zip(bias)
        .map(|(k, b)| {
            let mut best = f64::NEG_INFINITY;
            for t in 0..=x.len() - k.len() {
                let mut s = *b;
                for q in 0..k.len() {
                    s += k[q] * x[t + q];
                }
                best = best.max(s.max(0.0));
            }
            best
        })
        .collect()
}

#[test]
fn default_dimensions() {
    let arch = ArchConfig::default();
    let mut params = ParamSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let emb = DialogEmbedder::new(arch.clone(), 800, &mut params, &mut rng).unwrap();
    let vectors: Vec<Vec<f64>> = (0..3).map(|s| (0..800).map(|j| ((j * 7 + s) % 13) as f64 / 13.0 - 0.4).collect()).collect();
    let w = window(vectors, &[false; 3]);
    let mut tape = Tape::new(&params);
    let out = emb.embed_on(&mut tape, &w, &[0.5; HEURISTIC_DIM], &mut rng).unwrap();
    assert_eq!(tape.value(out.textual).len(), 256);
    assert_eq!(tape.value(out.context).len(), 128);
    assert_eq!(tape.value(out.fused).len(), 413);
    assert_eq!(arch.fused_dim(), 413);
    assert!(tape.value(out.fused).is_finite());
}

#[test]
fn toy_stack_matches_brute_force() {
    let arch = toy_arch(&[2, 2, 2], 2, 2);
    let mut params = ParamSet::new();
    let emb = DialogEmbedder::new(arch, 6, &mut params, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let stages: [(Vec<Vec<f64>>, Vec<f64>); 3] = [
        (vec![vec![0.5, -1.0], vec![1.5, 0.25]], vec![0.1, -0.2]),
        (vec![vec![-0.3, 2.0], vec![1.0, 1.0]], vec![0.0, 0.3]),
        (vec![vec![1.2, -0.7], vec![0.4, 0.9]], vec![-0.1, 0.05]),
    ];
    for (i, (k, b)) in stages.iter().enumerate() {
        set(&mut params, &format!("conv{i}.kernels"), k.concat());
        set(&mut params, &format!("conv{i}.bias"), b.clone());
    }
    let x = vec![0.3, -1.2, 2.0, 0.7, -0.4, 1.1];
    let mut want = x.clone();
    for (k, b) in &stages {
        want = oracle_stage(&want, k, b);
    }
    let got = emb.textual_features(&params, &x).unwrap();
    assert_eq!(got.len(), 2);
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-12, "{got:?} vs {want:?}");
    }
}

#[test]
fn zero_input_zero_bias_gives_zero() {
    let mut params = ParamSet::new();
    let emb = DialogEmbedder::new(toy_arch(&[8, 4, 3], 3, 2), 10, &mut params, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    assert_eq!(emb.textual_features(&params, &[0.0; 10]).unwrap(), vec![0.0; 3]);
}

#[test]
fn short_sequence_is_rejected() {
    let err = toy_arch(&[2, 2], 3, 2).validate(10).unwrap_err();
    assert_eq!(err.kind(), "contract");
    assert_eq!(toy_arch(&[4, 4], 3, 2).validate(2).unwrap_err().kind(), "contract");
    assert!(toy_arch(&[4, 3], 3, 2).validate(3).is_ok());
}

/// Attention on a 2-d input with identity query/key projections.
fn attention_fixture(value: Vec<f64>) -> (DialogEmbedder, ParamSet) {
    let mut params = ParamSet::new();
    let emb = DialogEmbedder::new(toy_arch(&[2], 2, 2), 2, &mut params, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    set(&mut params, "attn.query", vec![1.0, 0.0, 0.0, 1.0]);
    set(&mut params, "attn.key", vec![1.0, 0.0, 0.0, 1.0]);
    set(&mut params, "attn.value", value);
    (emb, params)
}

#[test]
fn equal_scores_closed_form() {
    let (emb, params) = attention_fixture(vec![1.0, 0.0, 0.0, 1.0]);
    let u = vec![0.6, 0.8];
    let (ctx, out) = emb.context_features(&params, &window(vec![u.clone(); 3], &[false; 3])).unwrap();
    let g = (-0.5f64).exp();
    let centre = 1.0 / (1.0 + 2.0 * g);
    assert!((out.weights[1] - centre).abs() < 1e-9);
    assert!((out.weights[0] - g * centre).abs() < 1e-9);
    assert_eq!(out.gaussian[1], 1.0);
    // Identical values, so the context is the value itself over sqrt(2).
    for (c, x) in ctx.iter().zip(&u) {
        assert!((c - x / 2f64.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn lone_centre_takes_all_weight() {
    let (emb, params) = attention_fixture(vec![2.0, 0.0, 1.0, -1.0]);
    let u = vec![0.5, 0.25];
    let w = window(vec![vec![0.0; 2], u, vec![0.0; 2]], &[true, false, true]);
    let (ctx, out) = emb.context_features(&params, &w).unwrap();
    assert_eq!(out.weights, vec![0.0, 1.0, 0.0]);
    let s = 2f64.sqrt();
    assert!((ctx[0] - 1.0 / s).abs() < 1e-12);
    assert!((ctx[1] - 0.25 / s).abs() < 1e-12);
}

#[test]
fn zero_value_projection_gives_zero_context() {
    let (emb, params) = attention_fixture(vec![0.0; 4]);
    let w = window(vec![vec![1.0, 2.0], vec![0.3, -0.1], vec![-2.0, 0.5]], &[false; 3]);
    let (ctx, _) = emb.context_features(&params, &w).unwrap();
    assert_eq!(ctx, vec![0.0, 0.0]);
}

#[test]
fn padding_content_is_ignored() {
    let mut params = ParamSet::new();
    let emb = DialogEmbedder::new(toy_arch(&[4], 3, 3), 5, &mut params, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let centre = vec![0.2, -0.1, 0.4, 0.0, 0.9];
    let a = window(vec![vec![0.0; 5], centre.clone(), vec![1.0; 5]], &[true, false, false]);
    let mut b = a.clone();
    b.vectors[0] = vec![7.0, -3.0, 2.0, 1.0, 5.0];
    assert_eq!(emb.context_features(&params, &a).unwrap().0, emb.context_features(&params, &b).unwrap().0);
}

#[test]
fn padded_centre_is_rejected() {
    let (emb, params) = attention_fixture(vec![0.0; 4]);
    let w = window(vec![vec![1.0, 0.0]; 3], &[false, true, false]);
    assert_eq!(emb.context_features(&params, &w).unwrap_err().kind(), "contract");
}

#[test]
fn fusion_layout() {
    let arch = ArchConfig::default();
    let t: Vec<f64> = (0..256).map(|i| i as f64).collect();
    let h: Vec<f64> = (0..29).map(|i| -(i as f64)).collect();
    let c: Vec<f64> = (0..128).map(|i| i as f64 * 0.5).collect();
    let fused = fuse_features(&t, &h, &c, &arch).unwrap();
    assert_eq!(fused.len(), 413);
    assert_eq!(fused[..256], t[..]);
    assert_eq!(fused[256..285], h[..]);
    assert_eq!(fused[285..], c[..]);
    assert_eq!(fuse_features(&[0.0; 256], &[0.0; 29], &[0.0; 128], &arch).unwrap(), vec![0.0; 413]);
    assert_eq!(fuse_features(&t, &h[1..], &c, &arch).unwrap_err().kind(), "contract");
}

#[test]
fn standardizer_statistics() {
    let mut a = [0.0; HEURISTIC_DIM];
    let mut b = [0.0; HEURISTIC_DIM];
    a[12] = 2.0;
    b[12] = 6.0;
    a[0] = 1.0;
    b[0] = 1.0;
    let s = Standardizer::fit(&[a, b]).unwrap();
    assert_eq!((s.mean[12], s.std[12]), (4.0, 2.0));
    assert_eq!(s.std[0], 1.0);
    let z = s.apply(&b).unwrap();
    assert_eq!((z[12], z[0]), (1.0, 0.0));
    assert_eq!(Standardizer::identity(HEURISTIC_DIM).apply(&a).unwrap(), a.to_vec());
    assert!(Standardizer::fit(&[]).is_err());
}

#[test]
fn bind_finds_named_parameters() {
    let arch = toy_arch(&[4, 2], 3, 3);
    let mut params = ParamSet::new();
    DialogEmbedder::new(arch.clone(), 6, &mut params, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    assert!(DialogEmbedder::bind(arch.clone(), 6, &params).is_ok());
    let err = DialogEmbedder::bind(arch, 7, &params).unwrap_err();
    assert_eq!(err.kind(), "checkpoint");
    assert!(err.to_string().contains("attn.query"));
}

#[test]
fn head_window_is_pad_head_first_reply() {
    let mk = |i: usize, a: &str, t: &str| Utterance {
        index: i,
        time: i as i64,
        author_id: a.into(),
        raw_text: t.into(),
        clean_text: t.into(),
        tokens: t.split_whitespace().map(String::from).collect(),
        placeholders: PlaceholderCounts::default(),
    };
    let log = ChatLog {
        community_id: "t".into(),
        utterances: vec![mk(0, "a", "build fails"), mk(1, "a", "on windows"), mk(2, "b", "reinstall it"), mk(3, "a", "thanks")],
    };
    let d = split_head_body(&log, &[0, 1, 2, 3]).unwrap();
    let enc = Encoder::new(EncoderConfig {
        dim: 16,
        ..EncoderConfig::default()
    })
    .unwrap();
    let lex = HeuristicLexicons::bundled();
    let inputs = DialogInputs::build(&d, &enc, &HeuristicExtractor::new(&log, &lex), 1);
    assert_eq!(inputs.windows.len(), 3);
    let (hw, hh) = inputs.head();
    assert_eq!(hw.pad_mask, vec![true, false, false]);
    assert_eq!(hw.vectors[1], enc.encode(&d.head).vector);
    assert_eq!(hw.vectors[2], enc.encode(&d.body[0]).vector);
    assert_eq!(hh[heuristics::slot::ABS_POSITION], 1.0);
    let body: Vec<_> = inputs.body().collect();
    assert_eq!(body[0].1[heuristics::slot::ABS_POSITION], 3.0);
    assert_eq!(body[1].0.pad_mask, vec![false, false, true]);
}

proptest! {
    #[test]
    fn weights_sum_to_one(
        vals in prop::collection::vec(-1.0f64..1.0, 15),
        pads in prop::collection::vec(any::<bool>(), 2),
        seed in 0u64..50,
    ) {
        let mut params = ParamSet::new();
        let emb = DialogEmbedder::new(toy_arch(&[2], 2, 4), 5, &mut params, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let vectors: Vec<Vec<f64>> = vals.chunks(5).map(|c| c.to_vec()).collect();
        let pad = [pads[0], false, pads[1]];
        let mut w = window(vectors, &pad);
        for (v, p) in w.vectors.iter_mut().zip(pad) {
            if p { v.fill(0.0); }
        }
        let (ctx, out) = emb.context_features(&params, &w).unwrap();
        prop_assert!(ctx.iter().all(|c| c.is_finite()));
        let sum: f64 = out.weights.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert_eq!(out.gaussian[1], 1.0);
        for (a, p) in out.weights.iter().zip(pad) {
            if p { prop_assert_eq!(*a, 0.0); }
        }
    }
}
