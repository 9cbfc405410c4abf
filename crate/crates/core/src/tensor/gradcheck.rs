use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ParamSet, Tape, Var};

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    pub tolerance: f64,
    /// Relative errors use `max(|analytic|, |numeric|, floor)` as the
    /// denominator so vanishing gradients are compared absolutely.
    pub denominator_floor: f64,
    /// Large tensors are spot-checked on this many seeded entries.
    pub max_entries_per_param: Option<usize>,
    /// Entries whose one-sided slopes disagree by more than this fraction
    /// sit on a kink (ReLU at 0, max-pool tie) and are skipped.
    pub kink_ratio: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            tolerance: 1e-4,
            denominator_floor: 1e-6,
            max_entries_per_param: None,
            kink_ratio: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamError {
    pub name: String,
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped_kinks: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub params: Vec<ParamError>,
    /// Parameters whose error exceeded the tolerance.
    pub offending: Vec<String>,
    pub passed: bool,
}

/// Compares tape gradients against central finite differences for every
/// parameter in `params`. `loss` must rebuild the same scalar each call.
pub fn finite_difference_check<F>(params: &mut ParamSet, loss: F, cfg: &GradCheckConfig) -> GradCheckReport
where
    F: Fn(&mut Tape) -> Var,
{
    let eval = |ps: &ParamSet| -> f64 {
        let mut tape = Tape::new(ps);
        let out = loss(&mut tape);
        tape.value(out).data()[0]
    };

    let analytic: Vec<Vec<f64>> = {
        let mut tape = Tape::new(params);
        let out = loss(&mut tape);
        let grads = tape.backward(out);
        params
            .iter()
            .enumerate()
            .map(|(i, p)| {
                grads
                    .iter()
                    .find(|(id, _)| id.0 == i)
                    .map(|(_, g)| g.to_vec())
                    .unwrap_or_else(|| vec![0.0; p.value.len()])
            })
            .collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let base = eval(params);
    let mut reports = Vec::new();
    for i in 0..params.len() {
        let len = params.iter().nth(i).unwrap().value.len();
        let entries: Vec<usize> = match cfg.max_entries_per_param {
            Some(k) if k < len => {
                let mut idx = sample(&mut rng, len, k).into_vec();
                idx.sort_unstable();
                idx
            }
            _ => (0..len).collect(),
        };
        let mut worst: f64 = 0.0;
        let mut skipped = 0;
        for &e in &entries {
            let original = params.iter().nth(i).unwrap().value.data()[e];
            let at = |v: f64, ps: &mut ParamSet| {
                ps.iter_mut().nth(i).unwrap().value.data_mut()[e] = v;
                eval(ps)
            };
            let plus = at(original + cfg.step, params);
            let minus = at(original - cfg.step, params);
            at(original, params);

            let right = (plus - base) / cfg.step;
            let left = (base - minus) / cfg.step;
            if (right - left).abs() > cfg.kink_ratio * right.abs().max(left.abs()).max(1.0) {
                skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * cfg.step);
            let a = analytic[i][e];
            let denom = a.abs().max(numeric.abs()).max(cfg.denominator_floor);
            worst = worst.max((a - numeric).abs() / denom);
        }
        reports.push(ParamError {
            name: params.iter().nth(i).unwrap().name.clone(),
            max_rel_error: worst,
            checked: entries.len() - skipped,
            skipped_kinks: skipped,
        });
    }

    let max_rel_error = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let offending: Vec<String> = reports
        .iter()
        .filter(|r| !(r.max_rel_error < cfg.tolerance))
        .map(|r| r.name.clone())
        .collect();
    GradCheckReport {
        max_rel_error,
        tolerance: cfg.tolerance,
        passed: offending.is_empty(),
        params: reports,
        offending,
    }
}
