//! Seeded synthetic corpora with character-level obfuscation.
//!
//! Plain documents are lexicon phrases, optionally with their words
//! shuffled. Obfuscated documents are lexicon phrases with one word
//! rewritten by the configured rules (leet substitutions, separators,
//! doubled letters, split words). The built-in lexicon is a neutral
//! placeholder; bring your own through [`load_lexicon`].

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Label, LabeledCorpus};
use crate::error::{Error, Result};
use crate::seeded_rng;

const MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepeatPosition {
    First,
    Middle,
    Last,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleKind {
    /// Replace every `from` in the target word with `to`.
    Substitute { from: char, to: char },
    /// Insert `separator` after every `every` characters, never at the end.
    InsertSeparator { separator: char, every: usize },
    /// Double one character.
    RepeatChar { position: RepeatPosition },
    /// Break the word in two at its midpoint.
    SpaceSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObfuscationRule {
    #[serde(flatten)]
    pub kind: RuleKind,
    pub probability: f64,
}

impl ObfuscationRule {
    pub fn new(kind: RuleKind, probability: f64) -> Self {
        Self { kind, probability }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::Config(format!(
                "rule probability must be in [0, 1], got {}",
                self.probability
            )));
        }
        match self.kind {
            RuleKind::Substitute { from, to } if from == to => {
                Err(Error::Config(format!("substitution `{from}` -> `{to}` is a no-op")))
            }
            RuleKind::InsertSeparator { every: 0, .. } => {
                Err(Error::Config("separator spacing must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    fn apply(&self, word: &[char], rng: &mut ChaCha8Rng) -> Vec<char> {
        match self.kind {
            RuleKind::Substitute { from, to } => word.iter().map(|&c| if c == from { to } else { c }).collect(),
            RuleKind::InsertSeparator { separator, every } => {
                let mut out = Vec::with_capacity(word.len() * 2);
                for (i, &c) in word.iter().enumerate() {
                    out.push(c);
                    if (i + 1) % every == 0 && i + 1 < word.len() {
                        out.push(separator);
                    }
                }
                out
            }
            RuleKind::RepeatChar { position } => {
                if word.is_empty() {
                    return Vec::new();
                }
                let at = match position {
                    RepeatPosition::First => 0,
                    RepeatPosition::Middle => word.len() / 2,
                    RepeatPosition::Last => word.len() - 1,
                    RepeatPosition::Random => rng.gen_range(0..word.len()),
                };
                let mut out = word.to_vec();
                out.insert(at, word[at]);
                out
            }
            RuleKind::SpaceSplit => {
                if word.len() < 2 {
                    return word.to_vec();
                }
                let mid = word.len() / 2;
                let mut out = word[..mid].to_vec();
                out.push(' ');
                out.extend_from_slice(&word[mid..]);
                out
            }
        }
    }
}

/// Leet substitutions, period insertion and letter doubling.
pub fn default_rules() -> Vec<ObfuscationRule> {
    let sub = |from, to| ObfuscationRule::new(RuleKind::Substitute { from, to }, 0.5);
    vec![
        sub('i', '1'),
        sub('e', '3'),
        sub('a', '@'),
        sub('o', '0'),
        ObfuscationRule::new(
            RuleKind::InsertSeparator {
                separator: '.',
                every: 1,
            },
            0.25,
        ),
        ObfuscationRule::new(
            RuleKind::RepeatChar {
                position: RepeatPosition::Random,
            },
            0.25,
        ),
    ]
}

/// Neutral everyday Swahili phrases used when no lexicon is supplied.
pub fn default_lexicon() -> Vec<String> {
    [
        "habari za asubuhi",
        "karibu sana rafiki",
        "asante kwa chakula",
        "tutaonana kesho jioni",
        "mvua inanyesha leo",
        "ninapenda kusoma vitabu",
        "soko lina matunda mengi",
        "watoto wanacheza uwanjani",
        "mwalimu anafundisha darasa",
        "tunakwenda sokoni pamoja",
        "chai ya moto tafadhali",
        "barabara ni ndefu sana",
        "jua linawaka mchana",
        "nyumba yetu ni kubwa",
        "tuimbe wimbo mzuri",
        "samaki wanaogelea ziwani",
        "ndege wanaruka angani",
        "kitabu hiki ni kipya",
        "tafadhali funga mlango",
        "shamba lina mahindi",
        "mama anapika wali",
        "baba anasoma gazeti",
        "rafiki yangu anaishi mjini",
        "leo ni siku nzuri",
        "tunapanda miti shuleni",
        "simu yangu imezimika",
        "basi limechelewa tena",
        "maji ya kunywa ni safi",
        "kesho tutasafiri pwani",
        "habari ya jioni mzee",
    ]
    .into_iter()
    .map(String::from)
    .collect()
}

fn join(words: &[Vec<char>]) -> String {
    words
        .iter()
        .map(|w| w.iter().collect::<String>())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Rewrites `text` with the rules. Each rule fires independently with its
/// probability and, when it fires, applies to every word. Draws repeat until
/// the text changes; if the probabilities never fire, each rule is tried
/// alone before giving up.
pub fn obfuscate_text(text: &str, rules: &[ObfuscationRule], seed: u64) -> Result<String> {
    obfuscate_with(text, rules, &mut seeded_rng(seed))
}

fn obfuscate_with(text: &str, rules: &[ObfuscationRule], rng: &mut ChaCha8Rng) -> Result<String> {
    if rules.is_empty() {
        return Err(Error::Config("obfuscation needs at least one rule".into()));
    }
    for r in rules {
        r.validate()?;
    }
    let words: Vec<Vec<char>> = text.split_whitespace().map(|w| w.chars().collect()).collect();
    if words.is_empty() {
        return Err(Error::invalid("cannot obfuscate empty text"));
    }
    let original = join(&words);

    for _ in 0..MAX_ATTEMPTS {
        let mut out = words.clone();
        for r in rules {
            if rng.gen_bool(r.probability) {
                for w in &mut out {
                    *w = r.apply(w, rng);
                }
            }
        }
        let s = join(&out);
        if s != original {
            return Ok(s);
        }
    }
    for r in rules {
        let out: Vec<Vec<char>> = words.iter().map(|w| r.apply(w, rng)).collect();
        let s = join(&out);
        if s != original {
            return Ok(s);
        }
    }
    Err(Error::invalid(format!("no rule changes `{text}`")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(default = "default_lexicon")]
    pub base_lexicon: Vec<String>,
    #[serde(default = "default_n_docs")]
    pub n_docs: usize,
    #[serde(default = "default_fraction")]
    pub obfuscated_fraction: f64,
    #[serde(default = "default_rules")]
    pub rules: Vec<ObfuscationRule>,
    /// Chance that a plain document has its words shuffled.
    #[serde(default = "default_shuffle")]
    pub benign_shuffle_probability: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_n_docs() -> usize {
    200
}

fn default_fraction() -> f64 {
    0.3
}

fn default_shuffle() -> f64 {
    0.5
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            base_lexicon: default_lexicon(),
            n_docs: default_n_docs(),
            obfuscated_fraction: default_fraction(),
            rules: default_rules(),
            benign_shuffle_probability: default_shuffle(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Default::default()
        }
    }

    /// `round(n_docs * obfuscated_fraction)`
    pub fn n_obfuscated(&self) -> usize {
        (self.n_docs as f64 * self.obfuscated_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_lexicon.iter().all(|p| p.trim().is_empty()) {
            return Err(Error::Config("empty lexicon".into()));
        }
        if self.n_docs < 2 {
            return Err(Error::Config("n_docs must be at least 2".into()));
        }
        if !(self.obfuscated_fraction > 0.0 && self.obfuscated_fraction < 1.0) {
            return Err(Error::Config(
                "obfuscated_fraction must be strictly between 0 and 1".into(),
            ));
        }
        let ones = self.n_obfuscated();
        if ones == 0 || ones == self.n_docs {
            return Err(Error::Config(format!(
                "{} documents at fraction {} leaves one class empty",
                self.n_docs, self.obfuscated_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.benign_shuffle_probability) {
            return Err(Error::Config("benign_shuffle_probability must be in [0, 1]".into()));
        }
        if self.rules.is_empty() {
            return Err(Error::Config("obfuscation needs at least one rule".into()));
        }
        self.rules.iter().try_for_each(ObfuscationRule::validate)
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&s).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// A generated document together with the lexicon phrase it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthDocument {
    pub text: String,
    pub label: Label,
    pub source: String,
}

pub fn generate_documents(config: &SynthConfig) -> Result<Vec<SynthDocument>> {
    config.validate()?;
    let lexicon: Vec<&str> = config
        .base_lexicon
        .iter()
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .collect();
    let mut rng = seeded_rng(config.seed);

    let ones = config.n_obfuscated();
    let mut labels = vec![Label::Plain; config.n_docs - ones];
    labels.extend(std::iter::repeat_n(Label::Obfuscated, ones));
    labels.shuffle(&mut rng);

    labels
        .into_iter()
        .map(|label| {
            let source = lexicon[rng.gen_range(0..lexicon.len())];
            let text = match label {
                Label::Obfuscated => obfuscate_with(source, &config.rules, &mut rng)?,
                Label::Plain => {
                    let mut words: Vec<&str> = source.split_whitespace().collect();
                    if rng.gen_bool(config.benign_shuffle_probability) {
                        words.shuffle(&mut rng);
                    }
                    words.join(" ")
                }
            };
            Ok(SynthDocument {
                text,
                label,
                source: source.to_string(),
            })
        })
        .collect()
}

pub fn generate_synthetic_corpus(config: &SynthConfig) -> Result<LabeledCorpus> {
    LabeledCorpus::new(generate_documents(config)?.into_iter().map(|d| (d.text, d.label)))
}

/// One phrase per line; blank lines and `#` comments are skipped.
pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let phrases: Vec<String> = s
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect();
    if phrases.is_empty() {
        return Err(Error::Config(format!("{}: empty lexicon", path.display())));
    }
    Ok(phrases)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    rules: Vec<ObfuscationRule>,
}

/// TOML file with a `[[rules]]` array.
pub fn load_rules(path: impl AsRef<Path>) -> Result<Vec<ObfuscationRule>> {
    let path = path.as_ref();
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let f: RuleFile = toml::from_str(&s).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if f.rules.is_empty() {
        return Err(Error::Config(format!("{}: no rules", path.display())));
    }
    f.rules.iter().try_for_each(ObfuscationRule::validate)?;
    Ok(f.rules)
}
