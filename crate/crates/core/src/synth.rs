//! Seeded synthetic chats: troubleshooting dialogs with labeled solutions,
//! small-talk dialogs, and random interleavings with known reply links.
//! Used by tests, benchmarks and as a fallback link-scorer training set.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{preprocess_log, ChatLog, PreprocessConfig, Preprocessor, RawChatLog, RawMessage};
use crate::disentangler::{
    link_examples, train_link_scorer, LinkContext, LinkScorer, LinkScorerConfig, LinkTrainConfig, LinkTrainingLog,
};
use crate::error::Result;
use crate::lexicon::HeuristicLexicons;
use crate::pairmodel::LabeledRecord;

const TOOLS: [&str; 6] = ["npm", "docker", "gradle", "webpack", "pip", "cargo"];
const COMMANDS: [&str; 5] = ["install", "build", "start", "test", "publish"];
const ERRORS: [&str; 6] = [
    "a permission error",
    "a timeout error",
    "a segfault",
    "a missing module error",
    "a checksum mismatch",
    "an out of memory crash",
];
const THINGS: [&str; 5] = ["cache", "lockfile", "node modules folder", "build directory", "local registry"];
const FEATURES: [&str; 5] = ["dark mode", "faster builds", "plugin support", "a new logo", "better docs"];

const ISSUE_HEADS: [&str; 4] = [
    "how do i fix {err} when running {tool} {cmd} ?",
    "{tool} {cmd} fails with {err} , any idea why ?",
    "getting {err} after upgrading {tool} , what should i do ?",
    "why does {tool} {cmd} crash with {err} ?",
];
const SOLUTIONS: [&str; 4] = [
    "try deleting the {thing} and run {tool} {cmd} again",
    "you need to clear the {thing} first , then reinstall {tool}",
    "set the retry option in your {tool} config and run {cmd} with the verbose flag",
    "downgrade {tool} to the previous release , that fixed it for me",
];
const SPLIT_SOLUTIONS: [(&str, &str); 2] = [
    ("first remove the {thing} completely", "then run {tool} {cmd} with the force flag"),
    ("you have to reset the {thing}", "and after that reinstall {tool} from scratch"),
];
const CLARIFY: [&str; 3] = ["which version of {tool} are you on ?", "what os are you using ?", "can you paste the full log ?"];
const ASKER_REPLIES: [&str; 4] = ["thanks , that worked !", "great , it works now", "ok let me check", "hmm still the same"];
const CHAT_HEADS: [&str; 4] = [
    "{tool} 3.0 was released today with {feat}",
    "good morning everyone",
    "anyone going to the {tool} meetup this week",
    "just published a blog post about {feat}",
];
const CHAT_REPLIES: [&str; 5] = ["nice", "congrats to the team", "see you there", "cool , will read it later", "morning !"];

fn fill<R: Rng>(template: &str, rng: &mut R, tool: &str, cmd: &str) -> String {
    template
        .replace("{tool}", tool)
        .replace("{cmd}", cmd)
        .replace("{err}", ERRORS.choose(rng).unwrap())
        .replace("{thing}", THINGS.choose(rng).unwrap())
        .replace("{feat}", FEATURES.choose(rng).unwrap())
}

/// One generated dialog, messages in order; times are offsets in ms.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthDialog {
    pub messages: Vec<RawMessage>,
    pub issue: bool,
    /// One entry per body message (empty for small talk).
    pub solution_labels: Vec<bool>,
}

fn msg(time: i64, author: &str, text: String) -> RawMessage {
    RawMessage {
        time,
        author_id: author.to_string(),
        text,
    }
}

fn gap<R: Rng>(rng: &mut R) -> i64 {
    rng.gen_range(20_000..90_000)
}

/// A troubleshooting dialog. With `split`, the solution arrives as two
/// consecutive messages by the helper.
pub fn issue_dialog<R: Rng>(rng: &mut R, asker: &str, helper: &str, split: bool) -> SynthDialog {
    let tool = *TOOLS.choose(rng).unwrap();
    let cmd = *COMMANDS.choose(rng).unwrap();
    let mut t = 0;
    let mut messages = vec![msg(t, asker, fill(ISSUE_HEADS.choose(rng).unwrap(), rng, tool, cmd))];
    let mut labels = Vec::new();
    let mut say = |rng: &mut R, author: &str, text: String, label: bool, messages: &mut Vec<RawMessage>| {
        t += gap(rng);
        messages.push(msg(t, author, text));
        labels.push(label);
    };
    if rng.gen_bool(0.4) {
        let ask = fill(CLARIFY.choose(rng).unwrap(), rng, tool, cmd);
        say(rng, helper, ask, false, &mut messages);
        let answer = format!("{tool} 2.{} on linux", rng.gen_range(0..10));
        say(rng, asker, answer, false, &mut messages);
    }
    if split {
        let (a, b) = SPLIT_SOLUTIONS.choose(rng).unwrap();
        let (a, b) = (fill(a, rng, tool, cmd), fill(b, rng, tool, cmd));
        say(rng, helper, a, true, &mut messages);
        say(rng, helper, b, true, &mut messages);
    } else {
        let fix = fill(SOLUTIONS.choose(rng).unwrap(), rng, tool, cmd);
        say(rng, helper, fix, true, &mut messages);
    }
    let reply = ASKER_REPLIES.choose(rng).unwrap().to_string();
    say(rng, asker, reply, false, &mut messages);
    SynthDialog {
        messages,
        issue: true,
        solution_labels: labels,
    }
}

/// Small talk: an announcement or greeting and a few reactions.
pub fn chatter_dialog<R: Rng>(rng: &mut R, opener: &str, others: &[&str]) -> SynthDialog {
    let tool = *TOOLS.choose(rng).unwrap();
    let mut t = 0;
    let mut messages = vec![msg(t, opener, fill(CHAT_HEADS.choose(rng).unwrap(), rng, tool, ""))];
    for _ in 0..rng.gen_range(1..=3) {
        t += gap(rng);
        let who = *others.choose(rng).unwrap();
        messages.push(msg(t, who, CHAT_REPLIES.choose(rng).unwrap().to_string()));
    }
    SynthDialog {
        messages,
        issue: false,
        solution_labels: Vec::new(),
    }
}

/// Random dialog with fresh author names drawn from `next_author`.
pub fn random_dialog<R: Rng>(rng: &mut R, issue: bool, next_author: &mut usize) -> SynthDialog {
    let mut name = || {
        *next_author += 1;
        format!("user{}", *next_author)
    };
    if issue {
        let (a, h) = (name(), name());
        let split = rng.gen_bool(0.3);
        issue_dialog(rng, &a, &h, split)
    } else {
        let (a, b, c) = (name(), name(), name());
        chatter_dialog(rng, &a, &[&b, &c])
    }
}

/// `n` labeled dialogs (alternating troubleshooting and small talk, every
/// third troubleshooting one with a split solution); each consecutive pair
/// goes to the next of `projects` projects, round-robin.
pub fn balanced_fixture(n: usize, projects: usize, seed: u64) -> Vec<LabeledRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut author = 0;
    let mut clock = 1_600_000_000_000i64;
    (0..n)
        .map(|i| {
            let issue = i % 2 == 0;
            let d = if issue {
                let (a, h) = (format!("user{}", author + 1), format!("user{}", author + 2));
                author += 2;
                issue_dialog(&mut rng, &a, &h, (i / 2) % 3 == 0)
            } else {
                random_dialog(&mut rng, false, &mut author)
            };
            clock += 3_600_000;
            LabeledRecord {
                project: format!("project{}", (i / 2) % projects.max(1)),
                dialog_id: Some(format!("d{i}")),
                utterances: d
                    .messages
                    .iter()
                    .map(|m| RawMessage {
                        time: clock + m.time,
                        ..m.clone()
                    })
                    .collect(),
                issue: d.issue,
                solution_labels: d.solution_labels,
            }
        })
        .collect()
}

/// An interleaved chat with its true reply links.
#[derive(Clone, Debug)]
pub struct Interleaving {
    pub log: RawChatLog,
    /// Previous message of the same dialog, `None` for openers.
    pub parents: Vec<Option<usize>>,
    /// Message indexes of each source dialog.
    pub dialogs: Vec<Vec<usize>>,
}

/// Shuffles dialogs together while keeping each one's internal order.
/// Consecutive messages are 5 to 40 seconds apart.
pub fn interleave<R: Rng>(dialogs: &[SynthDialog], community: &str, rng: &mut R) -> Interleaving {
    let mut cursor = vec![0usize; dialogs.len()];
    let mut last: Vec<Option<usize>> = vec![None; dialogs.len()];
    let mut groups = vec![Vec::new(); dialogs.len()];
    let mut messages = Vec::new();
    let mut parents = Vec::new();
    let mut t = 1_600_000_000_000i64;
    loop {
        let open: Vec<usize> = (0..dialogs.len()).filter(|&d| cursor[d] < dialogs[d].messages.len()).collect();
        let Some(&d) = open.choose(rng) else { break };
        t += rng.gen_range(5_000..40_000);
        let i = messages.len();
        messages.push(RawMessage {
            time: t,
            ..dialogs[d].messages[cursor[d]].clone()
        });
        parents.push(last[d]);
        last[d] = Some(i);
        groups[d].push(i);
        cursor[d] += 1;
    }
    Interleaving {
        log: RawChatLog {
            community_id: community.to_string(),
            messages,
        },
        parents,
        dialogs: groups,
    }
}

/// `n` random dialogs (issue with probability 1/2) interleaved.
pub fn random_chat<R: Rng>(rng: &mut R, n: usize, community: &str) -> (Interleaving, Vec<SynthDialog>) {
    let mut author = 0;
    let dialogs: Vec<SynthDialog> = (0..n)
        .map(|_| {
            let issue = rng.gen_bool(0.5);
            random_dialog(rng, issue, &mut author)
        })
        .collect();
    (interleave(&dialogs, community, rng), dialogs)
}

/// Preprocesses without merging, so indexes line up with the raw log.
pub fn normalize(raw: &RawChatLog) -> Result<ChatLog> {
    let cfg = PreprocessConfig::default();
    let pre = Preprocessor::new(&cfg)?;
    Ok(preprocess_log(raw, &pre, &cfg))
}

/// Link scorer trained on `chats` random interleavings of 2 to 5 dialogs.
pub fn synthetic_link_scorer(cfg: LinkScorerConfig, train: &LinkTrainConfig, chats: usize) -> Result<LinkScorer> {
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
    let lexicons = HeuristicLexicons::bundled();
    let mut data = Vec::new();
    for c in 0..chats {
        let n = rng.gen_range(2..=5);
        let (inter, _) = random_chat(&mut rng, n, &format!("synthetic{c}"));
        data.push((normalize(&inter.log)?, inter.parents));
    }
    let logs: Vec<LinkTrainingLog> = data
        .iter()
        .map(|(log, parents)| LinkTrainingLog {
            ctx: LinkContext::new(log, &cfg.features, &lexicons),
            parents: parents.clone(),
        })
        .collect();
    let examples = link_examples(&logs, train.negatives, &mut rng)?;
    let mut scorer = LinkScorer::new(cfg, &mut rng)?;
    train_link_scorer(&mut scorer, &examples, train)?;
    Ok(scorer)
}
