use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::{PlaceholderCounts, Utterance};
use crate::tensor::Tensor;

fn utt(index: usize, author: &str, text: &str) -> Utterance {
    Utterance {
        index,
        time: index as i64 * 10_000,
        author_id: author.into(),
        raw_text: text.into(),
        clean_text: text.into(),
        tokens: text.split_whitespace().map(String::from).collect(),
        placeholders: PlaceholderCounts::default(),
    }
}

fn log_of(rows: &[(&str, &str)]) -> ChatLog {
    ChatLog {
        community_id: "t".into(),
        utterances: rows.iter().enumerate().map(|(i, (a, x))| utt(i, a, x)).collect(),
    }
}

fn table(n: usize, links: &[(usize, usize)], score: f64) -> TableScorer {
    let mut scores = HashMap::new();
    for &(c, p) in links {
        scores.insert((c, Some(p)), score);
    }
    for c in 0..n {
        scores.entry((c, None)).or_insert(0.0);
    }
    TableScorer { scores, default: 0.0 }
}

fn dialogs(log: &ChatLog, scorer: &dyn ReplyScorer, threshold: f64) -> Vec<Dialog> {
    assemble_dialogs(
        log,
        scorer,
        &LinkFeatureConfig::default(),
        &HeuristicLexicons::bundled(),
        &DisentangleConfig { threshold },
    )
    .unwrap()
}

#[test]
fn head_is_initiators_opening_run() {
    let log = log_of(&[("A", "u1"), ("A", "u2"), ("B", "u3"), ("A", "u4")]);
    let d = split_head_body(&log, &[0, 1, 2, 3]).unwrap();
    assert_eq!(d.head.raw_text, "u1 u2");
    assert_eq!(d.head.time, 0);
    assert_eq!(d.head_sources, vec![0, 1]);
    let body: Vec<&str> = d.body.iter().map(|u| u.raw_text.as_str()).collect();
    assert_eq!(body, ["u3", "u4"]);
    assert_eq!(d.initiator_id, "A");
}

#[test]
fn single_reply_and_sole_speaker() {
    let log = log_of(&[("A", "u1"), ("B", "u2")]);
    let d = split_head_body(&log, &[0, 1]).unwrap();
    assert_eq!(d.head.raw_text, "u1");
    assert_eq!(d.body.len(), 1);

    let log = log_of(&[("A", "u1"), ("A", "u2")]);
    let d = split_head_body(&log, &[0, 1]).unwrap();
    assert_eq!(d.head.raw_text, "u1 u2");
    assert!(d.body.is_empty());
}

#[test]
fn bad_member_lists_are_rejected() {
    let log = log_of(&[("A", "u1"), ("B", "u2")]);
    assert!(split_head_body(&log, &[]).is_err());
    assert!(split_head_body(&log, &[1, 0]).is_err());
    assert!(split_head_body(&log, &[0, 2]).is_err());
}

#[test]
fn threshold_one_gives_singletons() {
    let log = log_of(&[("A", "a"), ("B", "b"), ("C", "c"), ("D", "d")]);
    let scorer = TableScorer {
        scores: HashMap::new(),
        default: 0.9,
    };
    let ds = dialogs(&log, &scorer, 1.0);
    assert_eq!(ds.len(), 4);
    assert!(ds.iter().all(|d| d.members.len() == 1));
}

#[test]
fn shared_parent_joins_one_dialog() {
    // 1-based links {2 -> 1, 3 -> 1}.
    let log = log_of(&[("A", "a"), ("B", "b"), ("C", "c")]);
    let ds = dialogs(&log, &table(3, &[(1, 0), (2, 0)], 0.9), 0.5);
    assert_eq!(ds.len(), 1);
    assert_eq!(ds[0].members, vec![0, 1, 2]);
}

/// Components by repeated relabeling until nothing changes.
fn brute_components(n: usize, links: &[(usize, usize)]) -> BTreeSet<BTreeSet<usize>> {
    let mut label: Vec<usize> = (0..n).collect();
    loop {
        let mut changed = false;
        for &(a, b) in links {
            let m = label[a].min(label[b]);
            for x in [a, b] {
                if label[x] != m {
                    label[x] = m;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (0..n)
        .map(|r| (0..n).filter(|&i| label[i] == r).collect::<BTreeSet<_>>())
        .filter(|s| !s.is_empty())
        .collect()
}

#[test]
fn two_chains_give_two_dialogs() {
    // 1-based links {2 -> 1, 4 -> 3} on four messages.
    let links = [(1, 0), (3, 2)];
    let log = log_of(&[("A", "a"), ("B", "b"), ("C", "c"), ("D", "d")]);
    let ds = dialogs(&log, &table(4, &links, 0.8), 0.5);
    let got: BTreeSet<BTreeSet<usize>> = ds.iter().map(|d| d.members.iter().copied().collect()).collect();
    assert_eq!(got, brute_components(4, &links));
    assert_eq!(got.len(), 2);
}

#[test]
fn ties_go_to_the_most_recent_parent() {
    let log = log_of(&[("A", "a"), ("B", "b"), ("C", "c")]);
    let scorer = table(3, &[(2, 0), (2, 1)], 0.7);
    let ctx = LinkContext::new(&log, &LinkFeatureConfig::default(), &HeuristicLexicons::bundled());
    let parents = decode_links(&ctx, &scorer, &DisentangleConfig::default()).unwrap();
    assert_eq!(parents, vec![None, None, Some(1)]);
}

fn toy_scorer() -> LinkScorer {
    let cfg = LinkScorerConfig {
        hidden: vec![2],
        ..LinkScorerConfig::default()
    };
    let mut s = LinkScorer::new(cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let dim = s.config().features.dim();
    let mut w1 = vec![0.0; 2 * dim];
    w1[0] = 0.5;
    w1[1] = -1.0;
    w1[dim] = 2.0;
    w1[dim + 1] = 0.25;
    let values = vec![
        ("layer0.weight".to_string(), Tensor::from_vec(&[2, dim], w1)),
        ("layer0.bias".to_string(), Tensor::vector(vec![0.1, -0.2])),
        ("layer1.weight".to_string(), Tensor::from_vec(&[1, 2], vec![1.5, -0.5])),
        ("layer1.bias".to_string(), Tensor::vector(vec![0.3])),
    ];
    s.params_mut().load_values(values).unwrap();
    s
}

#[test]
fn toy_network_matches_hand_computation() {
    let s = toy_scorer();
    let mut x = vec![0.0; s.config().features.dim()];
    x[0] = 1.0;
    x[1] = 2.0;
    // h = softsign([-1.4, 2.3]) = [-7/12, 23/33]; z = 1.5 h0 - 0.5 h1 + 0.3
    let h0: f64 = -1.4 / 2.4;
    let h1 = 2.3 / 3.3;
    let z = 1.5 * h0 - 0.5 * h1 + 0.3;
    let want = 1.0 / (1.0 + (-z).exp());
    assert!((want - 0.284_248_364_831_686).abs() < 1e-12);
    assert!((s.score(&x).unwrap() - want).abs() < 1e-12);
}

#[test]
fn zero_parameters_score_one_half() {
    let mut s = toy_scorer();
    for p in s.params_mut().iter_mut() {
        p.value.data_mut().fill(0.0);
    }
    let x: Vec<f64> = (0..77).map(|i| i as f64 * 0.1).collect();
    assert_eq!(s.score(&x).unwrap(), 0.5);
}

#[test]
fn wrong_feature_length_is_a_contract_violation() {
    assert_eq!(toy_scorer().score(&[1.0; 3]).unwrap_err().kind(), "contract");
}

#[test]
fn permuting_features_and_weight_columns_together_is_invariant() {
    let cfg = LinkScorerConfig {
        hidden: vec![6, 4],
        ..LinkScorerConfig::default()
    };
    let s = LinkScorer::new(cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let dim = 77;
    let x: Vec<f64> = (0..dim).map(|i| ((i * 37) % 11) as f64 / 7.0 - 0.5).collect();
    let perm: Vec<usize> = (0..dim).map(|i| (i * 5 + 3) % dim).collect();
    let px: Vec<f64> = perm.iter().map(|&j| x[j]).collect();

    let mut t = s.clone();
    let w = s.params().by_name("layer0.weight").unwrap().value.clone();
    let mut pw = w.clone();
    for r in 0..6 {
        for (c, &j) in perm.iter().enumerate() {
            pw.data_mut()[r * dim + c] = w.data()[r * dim + j];
        }
    }
    let id = t.params().id("layer0.weight").unwrap();
    t.params_mut().get_mut(id).value = pw;
    assert!((s.score(&x).unwrap() - t.score(&px).unwrap()).abs() < 1e-12);
    assert!((s.score(&x).unwrap() - s.score(&px).unwrap()).abs() > 1e-9);
}

#[test]
fn checkpoint_round_trip() {
    let s = toy_scorer();
    let mut a = Vec::new();
    s.save(&mut a).unwrap();
    let loaded = LinkScorer::load(a.as_slice()).unwrap();
    let mut b = Vec::new();
    loaded.save(&mut b).unwrap();
    assert_eq!(a, b);
}

#[test]
fn training_separates_replies_from_strangers() {
    // Two interleaved conversations with mentions and shared words.
    let rows = [
        ("ann", "my docker build fails with permission denied"),
        ("cat", "anyone tried the new release notes"),
        ("bob", "@ann docker build needs the user in the docker group"),
        ("dan", "@cat yes the release notes look good"),
        ("ann", "@bob thanks the docker group fixed the build"),
        ("cat", "@dan great release then"),
    ];
    let log = log_of(&rows);
    let parents = vec![None, None, Some(0), Some(1), Some(2), Some(3)];
    let cfg = LinkScorerConfig {
        hidden: vec![8, 8],
        ..LinkScorerConfig::default()
    };
    let lex = HeuristicLexicons::bundled();
    let training = [LinkTrainingLog {
        ctx: LinkContext::new(&log, &cfg.features, &lex),
        parents: parents.clone(),
    }];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let examples = link_examples(&training, 7, &mut rng).unwrap();
    assert!(examples.iter().any(|e| e.1 == 0.0));
    let mut scorer = LinkScorer::new(cfg.clone(), &mut rng).unwrap();
    let train_cfg = LinkTrainConfig {
        epochs: 300,
        batch_size: 4,
        adam: crate::tensor::AdamConfig {
            lr: 0.01,
            ..Default::default()
        },
        ..LinkTrainConfig::default()
    };
    let history = train_link_scorer(&mut scorer, &examples, &train_cfg).unwrap();
    assert!(history.last().unwrap() < &history[0]);
    let ds = assemble_dialogs(&log, &scorer, &cfg.features, &lex, &DisentangleConfig::default()).unwrap();
    let got: Vec<Vec<usize>> = ds.iter().map(|d| d.members.clone()).collect();
    assert_eq!(got, vec![vec![0, 2, 4], vec![1, 3, 5]]);
}

fn random_table(n: usize, raw: &[u32]) -> TableScorer {
    let mut scores = HashMap::new();
    let mut k = 0;
    for c in 0..n {
        for p in std::iter::once(None).chain((c.saturating_sub(50)..c).map(Some)) {
            scores.insert((c, p), raw[k % raw.len()] as f64 / 100.0);
            k += 1;
        }
    }
    TableScorer { scores, default: 0.0 }
}

proptest! {
    #[test]
    fn output_is_a_partition_with_disjoint_heads(
        authors in prop::collection::vec(0usize..3, 1..30),
        raw in prop::collection::vec(0u32..=100, 1..64),
        threshold in 0.0f64..1.0,
    ) {
        let names = ["a", "b", "c"];
        let rows: Vec<(&str, &str)> = authors.iter().map(|&a| (names[a], "x")).collect();
        let log = log_of(&rows);
        let ds = dialogs(&log, &random_table(rows.len(), &raw), threshold);
        let mut seen = vec![0; rows.len()];
        for d in &ds {
            prop_assert!(d.members.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(d.subject_id, d.members[0]);
            prop_assert_eq!(d.head_sources.len() + d.body.len(), d.members.len());
            for &m in &d.members {
                seen[m] += 1;
            }
            let body: BTreeSet<usize> = d.body.iter().map(|u| u.index).collect();
            prop_assert!(d.head_sources.iter().all(|h| !body.contains(h)));
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn raising_the_threshold_never_merges(
        n in 1usize..25,
        raw in prop::collection::vec(0u32..=100, 1..64),
        t1 in 0.0f64..1.0,
        t2 in 0.0f64..1.0,
    ) {
        let rows: Vec<(&str, &str)> = (0..n).map(|_| ("a", "x")).collect();
        let log = log_of(&rows);
        let scorer = random_table(n, &raw);
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(dialogs(&log, &scorer, lo).len() <= dialogs(&log, &scorer, hi).len());
    }
}
