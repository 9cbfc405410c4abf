use std::hint::black_box;

use chatmine::dialog_embed::{ArchConfig, DialogEmbedder, DialogInputs, HeuristicExtractor, Standardizer, HEURISTIC_DIM};
use chatmine::disentangler::{assemble_dialogs, DisentangleConfig, LinkContext, LinkScorer, LinkScorerConfig};
use chatmine::encoder::{Encoder, EncoderConfig};
use chatmine::lexicon::HeuristicLexicons;
use chatmine::pairmodel::{EncoderStamp, ModelConfig, PairModel, Target};
use chatmine::tensor::{ParamSet, Tape};
use chatmine_bench::{chat, labeled};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn encoding(c: &mut Criterion) {
    let encoder = Encoder::new(EncoderConfig::default()).unwrap();
    let (log, _) = chat(4, 1);
    c.bench_function("encode_chat", |b| {
        b.iter(|| log.utterances.iter().map(|u| encoder.encode(black_box(u)).vector.len()).sum::<usize>())
    });
}

fn embedding(c: &mut Criterion) {
    let encoder = Encoder::new(EncoderConfig::default()).unwrap();
    let lex = HeuristicLexicons::bundled();
    let data = labeled(2, 1);
    let d = &data[0];
    let extractor_log = chatmine::corpus::ChatLog {
        community_id: "bench".into(),
        utterances: std::iter::once(d.dialog.head.clone()).chain(d.dialog.body.iter().cloned()).collect(),
    };
    let extractor = HeuristicExtractor::new(&extractor_log, &lex);
    let inputs = DialogInputs::build(&d.dialog, &encoder, &extractor, 1);
    let mut params = ParamSet::new();
    let embedder = DialogEmbedder::new(ArchConfig::default(), encoder.dim(), &mut params, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let (window, heuristic) = inputs.head();
    let heuristic = heuristic.to_vec();
    c.bench_function("embed_forward", |b| {
        b.iter(|| {
            let mut tape = Tape::new(&params);
            let mut rng = rand::rngs::mock::StepRng::new(0, 0);
            embedder.embed_on(&mut tape, black_box(window), &heuristic, &mut rng).unwrap().fused
        })
    });

    let model = PairModel::new(
        Target::Issue,
        ModelConfig::default(),
        EncoderStamp::of(&encoder),
        Standardizer::identity(HEURISTIC_DIM),
        &mut ChaCha8Rng::seed_from_u64(2),
    )
    .unwrap();
    c.bench_function("pair_probability", |b| b.iter(|| model.probability(black_box(window), &heuristic).unwrap()));
}

fn disentangling(c: &mut Criterion) {
    let lex = HeuristicLexicons::bundled();
    let scorer = LinkScorer::new(LinkScorerConfig::default(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let (log, _) = chat(5, 2);
    let features = scorer.config().features.clone();
    c.bench_function("link_features", |b| {
        let ctx = LinkContext::new(&log, &features, &lex);
        b.iter(|| (1..log.len()).map(|i| ctx.features(i, Some(i - 1)).unwrap().len()).sum::<usize>())
    });
    let mut group = c.benchmark_group("assemble");
    group.sample_size(10);
    group.bench_function("assemble_dialogs", |b| {
        b.iter(|| assemble_dialogs(&log, &scorer, &features, &lex, &DisentangleConfig::default()).unwrap().len())
    });
    group.finish();
}

criterion_group!(benches, encoding, embedding, disentangling);
criterion_main!(benches);
