//! Small seeded graphs covering every differentiable op the models use,
//! for finite-difference verification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{finite_difference_check, GradCheckConfig, GradCheckReport, ParamId, ParamSet, Tensor, Var};

pub const FRAGMENTS: [&str; 6] = [
    "linear",
    "conv1d_maxpool",
    "softsign",
    "softmax_cross_entropy",
    "local_attention",
    "classifier_head",
];

#[derive(Clone, Debug, Serialize)]
pub struct FragmentReport {
    pub fragment: String,
    pub seed: u64,
    #[serde(flatten)]
    pub report: GradCheckReport,
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let len = shape.iter().product();
    Tensor::from_vec(shape, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn coeffs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn params(rng: &mut ChaCha8Rng, shapes: &[(&str, &[usize])]) -> (ParamSet, Vec<ParamId>) {
    let mut ps = ParamSet::new();
    let ids = shapes
        .iter()
        .map(|(n, s)| ps.add(*n, random(rng, s)).expect("distinct fragment names"))
        .collect();
    (ps, ids)
}

/// Runs one fragment by name; `None` for an unknown name.
pub fn check_fragment(name: &str, seed: u64, cfg: &GradCheckConfig) -> Option<FragmentReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = GradCheckConfig { seed, ..cfg.clone() };
    let report = match name {
        "linear" => {
            let (mut ps, ids) = params(&mut rng, &[("w", &[4, 6]), ("b", &[4])]);
            let x = random(&mut rng, &[6]);
            let c = coeffs(&mut rng, 4);
            finite_difference_check(
                &mut ps,
                |t| {
                    let (w, b) = (t.param(ids[0]), t.param(ids[1]));
                    let x = t.input(x.clone());
                    let y = t.linear(x, w, b);
                    t.weighted_sum(y, c.clone())
                },
                &cfg,
            )
        }
        "conv1d_maxpool" => {
            let (mut ps, ids) = params(&mut rng, &[("kernels", &[8, 3]), ("bias", &[8]), ("kernels2", &[4, 3]), ("bias2", &[4])]);
            let x = random(&mut rng, &[12]);
            let c = coeffs(&mut rng, 4);
            finite_difference_check(
                &mut ps,
                |t| {
                    let p: Vec<Var> = ids.iter().map(|&i| t.param(i)).collect();
                    let x = t.input(x.clone());
                    let h = t.conv1d_maxpool(x, p[0], p[1]);
                    let y = t.conv1d_maxpool(h, p[2], p[3]);
                    t.weighted_sum(y, c.clone())
                },
                &cfg,
            )
        }
        "softsign" => {
            let (mut ps, ids) = params(&mut rng, &[("w1", &[5, 4]), ("b1", &[5]), ("w2", &[1, 5]), ("b2", &[1])]);
            let x = random(&mut rng, &[4]);
            finite_difference_check(
                &mut ps,
                |t| {
                    let p: Vec<Var> = ids.iter().map(|&i| t.param(i)).collect();
                    let x = t.input(x.clone());
                    let h = t.linear(x, p[0], p[1]);
                    let h = t.softsign(h);
                    let z = t.linear(h, p[2], p[3]);
                    t.sigmoid_bce(z, 1.0)
                },
                &cfg,
            )
        }
        "softmax_cross_entropy" => {
            let (mut ps, ids) = params(&mut rng, &[("w", &[3, 5]), ("b", &[3])]);
            let x = random(&mut rng, &[5]);
            finite_difference_check(
                &mut ps,
                |t| {
                    let (w, b) = (t.param(ids[0]), t.param(ids[1]));
                    let x = t.input(x.clone());
                    let z = t.linear(x, w, b);
                    let probs = t.softmax(z);
                    let unfused = t.cross_entropy(probs, 1);
                    let fused = t.softmax_cross_entropy(z, 2);
                    let both = t.concat(&[unfused, fused]);
                    t.weighted_sum(both, vec![1.0, 0.5])
                },
                &cfg,
            )
        }
        "local_attention" => {
            let (d, a) = (6, 4);
            let (mut ps, ids) = params(&mut rng, &[("query", &[a, d]), ("key", &[a, d]), ("value", &[a, d])]);
            let slots: Vec<Tensor> = (0..3).map(|_| random(&mut rng, &[d])).collect();
            let c = coeffs(&mut rng, a);
            finite_difference_check(
                &mut ps,
                |t| {
                    let p: Vec<Var> = ids.iter().map(|&i| t.param(i)).collect();
                    let s: Vec<Option<Var>> = slots.iter().map(|v| Some(t.input(v.clone()))).collect();
                    let out = t.local_attention(&s, 1, 1, p[0], p[1], p[2], 0.05);
                    t.weighted_sum(out.context, c.clone())
                },
                &cfg,
            )
        }
        "classifier_head" => {
            let (mut ps, ids) = params(&mut rng, &[("fc1.weight", &[64, 413]), ("fc1.bias", &[64]), ("fc2.weight", &[2, 64]), ("fc2.bias", &[2])]);
            let x = random(&mut rng, &[413]);
            finite_difference_check(
                &mut ps,
                |t| {
                    let p: Vec<Var> = ids.iter().map(|&i| t.param(i)).collect();
                    let x = t.input(x.clone());
                    let h = t.linear(x, p[0], p[1]);
                    let h = t.relu(h);
                    let z = t.linear(h, p[2], p[3]);
                    t.softmax_cross_entropy(z, 1)
                },
                &cfg,
            )
        }
        _ => return None,
    };
    Some(FragmentReport {
        fragment: name.to_string(),
        seed,
        report,
    })
}

/// Every fragment under every seed.
pub fn check_all_fragments(seeds: &[u64], cfg: &GradCheckConfig) -> Vec<FragmentReport> {
    seeds
        .iter()
        .flat_map(|&s| FRAGMENTS.iter().filter_map(move |f| check_fragment(f, s, cfg)))
        .collect()
}
