//! One function per verb.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chatmine::corpus::{community_from_path, ingest, read_utterances, write_jsonl};
use chatmine::disentangler::{
    assemble_dialogs, link_examples, train_link_scorer, DialogRecord, LinkContext, LinkScorer, LinkTrainingLog,
};
use chatmine::encoder::Encoder;
use chatmine::eval::{cross_project_evaluate, evaluate_models};
use chatmine::lexicon::HeuristicLexicons;
use chatmine::pairmodel::{build_labeled_dialogs, read_labeled_records, train_model, LabeledDialog, PairExtractor, PairModel, Target};
use chatmine::synth::synthetic_link_scorer;
use chatmine::tensor::{check_all_fragments, GradCheckConfig};
use chatmine::{Error, Result};
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::annotated::read_annotated;
use crate::config::Settings;
use crate::{Command, Failure, TrainTarget};

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    match path {
        Some(p) => {
            let mut out = create(p)?;
            writeln!(out, "{text}").and_then(|_| out.flush()).map_err(|e| Error::io(p, e))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn community(explicit: Option<String>, input: &Path) -> String {
    explicit.unwrap_or_else(|| community_from_path(input))
}

/// The checkpointed link scorer, or a seeded stand-in trained on synthetic
/// chats when none is given.
fn link_scorer(ckpt: Option<&Path>, settings: &Settings, synthetic_chats: usize) -> Result<LinkScorer> {
    match ckpt {
        Some(path) => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            LinkScorer::load(std::io::BufReader::new(file))
        }
        None => {
            warn!("no --link-ckpt given; training a stand-in link scorer on {synthetic_chats} synthetic chats");
            synthetic_link_scorer(settings.link.clone(), &settings.link_train, synthetic_chats)
        }
    }
}

fn labeled_dialogs(inputs: &[std::path::PathBuf], settings: &Settings) -> Result<Vec<LabeledDialog>> {
    let mut records = Vec::new();
    for path in inputs {
        records.extend(read_labeled_records(path)?);
    }
    if records.is_empty() {
        return Err(Error::Data("no labeled dialogs in the input".into()));
    }
    build_labeled_dialogs(&records, &settings.preprocess, &HeuristicLexicons::bundled())
}

pub fn run(command: Command, settings: &Settings, jobs: usize) -> std::result::Result<(), Failure> {
    match command {
        Command::Preprocess {
            input,
            out,
            community: name,
            skipped,
        } => {
            let report = ingest(&input, &community(name, &input), &settings.preprocess)?;
            info!(
                "{} utterances ({} merged, {} empty dropped, {} lines skipped)",
                report.log.len(),
                report.merged,
                report.dropped_empty,
                report.skipped.len()
            );
            if !report.skipped.is_empty() {
                warn!("{} unparseable lines skipped", report.skipped.len());
            }
            if let Some(path) = skipped {
                write_jsonl(create(&path)?, &report.skipped)?;
            }
            write_jsonl(create(&out)?, &report.log.utterances)?;
        }
        Command::Disentangle {
            input,
            out,
            link_ckpt,
            community: name,
            synthetic_chats,
        } => {
            let log = read_utterances(&input, &community(name, &input))?;
            let scorer = link_scorer(link_ckpt.as_deref(), settings, synthetic_chats)?;
            let lex = HeuristicLexicons::bundled();
            let dialogs = assemble_dialogs(&log, &scorer, &scorer.config().features, &lex, &settings.disentangle)?;
            info!("{} dialogs from {} utterances", dialogs.len(), log.len());
            write_jsonl(create(&out)?, dialogs.iter().map(DialogRecord::from))?;
        }
        Command::Train {
            target,
            input,
            out,
            report,
            synthetic_chats,
        } => match target {
            TrainTarget::Link => train_link(&input, &out, report.as_deref(), settings, synthetic_chats)?,
            TrainTarget::Issue | TrainTarget::Solution => {
                if input.is_empty() {
                    return Err(Failure::Usage("--input is required for the issue and solution targets".into()));
                }
                let target = if target == TrainTarget::Issue { Target::Issue } else { Target::Solution };
                let data = labeled_dialogs(&input, settings)?;
                let encoder = Encoder::new(settings.encoder.clone())?;
                let (model, summary) = train_model(&data, target, &encoder, &settings.model)?;
                info!(
                    "{} model: {} epochs, best epoch {}",
                    target.name(),
                    summary.epochs,
                    summary.best_epoch
                );
                model.save_file(&out)?;
                if let Some(path) = report {
                    write_json(Some(&path), &summary)?;
                }
            }
        },
        Command::Extract {
            input,
            issue_ckpt,
            solution_ckpt,
            out,
            link_ckpt,
            community: name,
            synthetic_chats,
        } => {
            let ingested = ingest(&input, &community(name, &input), &settings.preprocess)?;
            let encoder = Encoder::new(settings.encoder.clone())?;
            let issue = PairModel::load_file(&issue_ckpt)?;
            let solution = PairModel::load_file(&solution_ckpt)?;
            let scorer = link_scorer(link_ckpt.as_deref(), settings, synthetic_chats)?;
            let lex = HeuristicLexicons::bundled();
            let extractor =
                PairExtractor::new(&encoder, &lex, &issue, &solution, settings.model.thresholds())?.with_jobs(jobs);
            let pairs = extractor.assemble_pairs(
                &ingested.log,
                &scorer,
                &scorer.config().features,
                &settings.disentangle,
            )?;
            info!("{} pairs from {} utterances", pairs.len(), ingested.log.len());
            write_jsonl(create(&out)?, &pairs)?;
        }
        Command::Eval {
            input,
            issue_ckpt,
            solution_ckpt,
            cross_project,
            out,
        } => {
            let data = labeled_dialogs(&input, settings)?;
            let encoder = Encoder::new(settings.encoder.clone())?;
            if cross_project {
                let (metrics, training) = cross_project_evaluate(&data, &encoder, &settings.model)?;
                write_json(
                    out.as_deref(),
                    &serde_json::json!({ "mode": "cross_project", "metrics": metrics, "training": training }),
                )?;
            } else {
                let (Some(i), Some(s)) = (issue_ckpt, solution_ckpt) else {
                    return Err(Failure::Usage("--issue-ckpt and --solution-ckpt are required".into()));
                };
                let issue = PairModel::load_file(&i)?;
                let solution = PairModel::load_file(&s)?;
                let metrics = evaluate_models(&data, &issue, &solution, &encoder, settings.model.thresholds())?;
                write_json(out.as_deref(), &serde_json::json!({ "mode": "checkpoints", "metrics": metrics }))?;
            }
        }
        Command::Gradcheck { tol, seeds, out } => {
            if !(tol > 0.0) {
                return Err(Failure::Usage(format!("--tol must be positive, got {tol}")));
            }
            let cfg = GradCheckConfig {
                tolerance: tol,
                ..GradCheckConfig::default()
            };
            let reports = check_all_fragments(&seeds, &cfg);
            write_json(out.as_deref(), &reports)?;
            let failed: Vec<String> = reports
                .iter()
                .filter(|r| !r.report.passed)
                .map(|r| format!("{} (seed {}, {:.2e})", r.fragment, r.seed, r.report.max_rel_error))
                .collect();
            if !failed.is_empty() {
                return Err(Error::Contract(format!("gradient check failed: {}", failed.join(", "))).into());
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct LinkReport {
    chats: usize,
    examples: usize,
    epoch_loss: Vec<f64>,
}

fn train_link(
    inputs: &[std::path::PathBuf],
    out: &Path,
    report: Option<&Path>,
    settings: &Settings,
    synthetic_chats: usize,
) -> Result<()> {
    if inputs.is_empty() {
        info!("training the link scorer on {synthetic_chats} synthetic chats");
        let scorer = synthetic_link_scorer(settings.link.clone(), &settings.link_train, synthetic_chats)?;
        return scorer.save(create(out)?);
    }
    let chats = inputs
        .iter()
        .map(|p| read_annotated(p, &settings.preprocess, settings.link.features.lookback))
        .collect::<Result<Vec<_>>>()?;
    let lex = HeuristicLexicons::bundled();
    let logs: Vec<LinkTrainingLog> = chats
        .iter()
        .map(|c| LinkTrainingLog {
            ctx: LinkContext::new(&c.log, &settings.link.features, &lex),
            parents: c.parents.clone(),
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.link_train.seed);
    let examples = link_examples(&logs, settings.link_train.negatives, &mut rng)?;
    let mut scorer = LinkScorer::new(settings.link.clone(), &mut rng)?;
    let epoch_loss = train_link_scorer(&mut scorer, &examples, &settings.link_train)?;
    scorer.save(create(out)?)?;
    if let Some(path) = report {
        write_json(
            Some(path),
            &LinkReport {
                chats: chats.len(),
                examples: examples.len(),
                epoch_loss,
            },
        )?;
    }
    Ok(())
}
