//! Corpus ingestion, validation, splitting, and synthetic data.
//!
//! Corpus files are two-column tab-separated text (`token<TAB>label`), with a
//! blank line between sentences. Unlabeled sentences omit the tab and label.
//! A file may mix labeled and unlabeled sentences, but every line within one
//! sentence must have the same arity.
//!
//! Class marking is flag-only: tokens whose surface appears in the lexicon's
//! class list get `is_class = true`. Data is expected to arrive with class
//! surfaces (e.g. `city_name`) already substituted upstream; the loader never
//! rewrites surfaces.

mod synthetic;

pub use synthetic::generate_synthetic;

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A single token with its lexicon-derived flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    surface: String,
    is_class: bool,
    is_preposition: bool,
}

impl Token {
    /// Builds a token, enforcing the surface invariants (non-empty, no
    /// whitespace) and flag exclusivity.
    pub fn new(surface: impl Into<String>, is_class: bool, is_preposition: bool) -> Result<Self> {
        let surface = surface.into();
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            return Err(Error::Token(surface));
        }
        if is_class && is_preposition {
            return Err(Error::Contract(format!(
                "token {surface:?} cannot be both a class and a preposition"
            )));
        }
        Ok(Token {
            surface,
            is_class,
            is_preposition,
        })
    }

    /// A token with both flags off.
    pub fn plain(surface: impl Into<String>) -> Result<Self> {
        Token::new(surface, false, false)
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn is_class(&self) -> bool {
        self.is_class
    }

    pub fn is_preposition(&self) -> bool {
        self.is_preposition
    }
}

/// A token sequence, optionally with one label id per token.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSentence {
    pub tokens: Vec<Token>,
    pub labels: Option<Vec<u32>>,
}

impl AlignedSentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    /// Copy with the labels removed.
    pub fn stripped(&self) -> AlignedSentence {
        AlignedSentence {
            tokens: self.tokens.clone(),
            labels: None,
        }
    }
}

/// Bijection between label strings and dense indices.
///
/// The null label `O` is reserved at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelAlphabet {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

/// The reserved null label.
pub const NULL_LABEL: &str = "O";

impl LabelAlphabet {
    pub fn new() -> Self {
        let mut a = LabelAlphabet {
            names: Vec::new(),
            index: HashMap::new(),
        };
        a.intern(NULL_LABEL);
        a
    }

    /// Returns the id for `name`, adding it if unseen.
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn lookup(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        false // always holds the null label
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl Default for LabelAlphabet {
    fn default() -> Self {
        LabelAlphabet::new()
    }
}

/// Surface-form lists used for class and preposition marking, plus the
/// reserved dummy padding symbol for graph contexts.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    class_words: BTreeSet<String>,
    prepositions: BTreeSet<String>,
    dummy_boundary: String,
}

/// Default padding surface for sentence boundaries in graph contexts.
pub const DEFAULT_DUMMY: &str = "__dummy__";

impl Lexicon {
    pub fn new(
        class_words: impl IntoIterator<Item = String>,
        prepositions: impl IntoIterator<Item = String>,
        dummy_boundary: impl Into<String>,
    ) -> Result<Self> {
        let class_words: BTreeSet<String> = class_words.into_iter().collect();
        let prepositions: BTreeSet<String> = prepositions.into_iter().collect();
        let dummy_boundary = dummy_boundary.into();
        for w in class_words.iter().chain(prepositions.iter()) {
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::Lexicon(format!("invalid entry {w:?}")));
            }
        }
        if let Some(w) = class_words.intersection(&prepositions).next() {
            return Err(Error::Lexicon(format!(
                "{w:?} listed as both class and preposition"
            )));
        }
        if class_words.contains(&dummy_boundary) || prepositions.contains(&dummy_boundary) {
            return Err(Error::Lexicon(format!(
                "dummy boundary {dummy_boundary:?} must not be a lexicon entry"
            )));
        }
        Ok(Lexicon {
            class_words,
            prepositions,
            dummy_boundary,
        })
    }

    /// Empty lexicon: no marking at all.
    pub fn empty() -> Self {
        Lexicon {
            class_words: BTreeSet::new(),
            prepositions: BTreeSet::new(),
            dummy_boundary: DEFAULT_DUMMY.to_string(),
        }
    }

    pub fn is_class(&self, surface: &str) -> bool {
        self.class_words.contains(surface)
    }

    pub fn is_preposition(&self, surface: &str) -> bool {
        self.prepositions.contains(surface)
    }

    pub fn dummy_boundary(&self) -> &str {
        &self.dummy_boundary
    }

    /// Parses the sectioned lexicon format:
    ///
    /// ```text
    /// [classes]
    /// city_name
    /// [prepositions]
    /// from
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Classes,
            Prepositions,
        }
        let mut section = Section::None;
        let mut classes = Vec::new();
        let mut preps = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "[classes]" => section = Section::Classes,
                "[prepositions]" => section = Section::Prepositions,
                entry => match section {
                    Section::Classes => classes.push(entry.to_string()),
                    Section::Prepositions => preps.push(entry.to_string()),
                    Section::None => {
                        return Err(Error::Lexicon(format!(
                            "line {}: entry {entry:?} before any section header",
                            i + 1
                        )))
                    }
                },
            }
        }
        Lexicon::new(classes, preps, DEFAULT_DUMMY)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Lexicon::parse(&fs::read_to_string(path)?)
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::from("[classes]\n");
        for w in &self.class_words {
            out.push_str(w);
            out.push('\n');
        }
        out.push_str("[prepositions]\n");
        for w in &self.prepositions {
            out.push_str(w);
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_file_string())?;
        Ok(())
    }
}

/// Deterministic split request: same spec on the same corpus yields the same
/// partition, byte for byte.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    /// Fraction of sentences that keep their labels, in (0, 1].
    pub labeled_fraction: f64,
    pub rng_seed: u64,
    pub repeat_index: u32,
}

/// Result of [`split_corpus`]: the unlabeled partition is stripped, with the
/// original gold labels retained separately for evaluation.
#[derive(Debug, Clone)]
pub struct CorpusSplit {
    pub labeled: Vec<AlignedSentence>,
    pub unlabeled: Vec<AlignedSentence>,
    pub unlabeled_gold: Vec<AlignedSentence>,
}

/// Parses corpus text. Labels are interned into `alphabet`; lexicon flags are
/// applied to every token.
pub fn parse_corpus(
    text: &str,
    alphabet: &mut LabelAlphabet,
    lexicon: &Lexicon,
) -> Result<Vec<AlignedSentence>> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut labels: Vec<u32> = Vec::new();
    let mut sentence_labeled: Option<bool> = None;

    let mut flush = |tokens: &mut Vec<Token>,
                     labels: &mut Vec<u32>,
                     sentence_labeled: &mut Option<bool>| {
        if !tokens.is_empty() {
            let labs = if *sentence_labeled == Some(true) {
                Some(std::mem::take(labels))
            } else {
                labels.clear();
                None
            };
            sentences.push(AlignedSentence {
                tokens: std::mem::take(tokens),
                labels: labs,
            });
        }
        *sentence_labeled = None;
    };

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        if raw.is_empty() {
            flush(&mut tokens, &mut labels, &mut sentence_labeled);
            continue;
        }
        let (surface, label) = match raw.split_once('\t') {
            Some((s, l)) => (s, Some(l)),
            None => (raw, None),
        };
        let labeled = label.is_some();
        match sentence_labeled {
            None => sentence_labeled = Some(labeled),
            Some(expected) if expected != labeled => {
                return Err(Error::Structure {
                    line: line_no,
                    message: "mixed labeled and unlabeled lines within one sentence".into(),
                })
            }
            _ => {}
        }
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("invalid token field {surface:?}"),
            });
        }
        if let Some(l) = label {
            if l.is_empty() || l.chars().any(char::is_whitespace) {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("invalid label field {l:?}"),
                });
            }
            labels.push(alphabet.intern(l));
        }
        let tok = Token::new(
            surface,
            lexicon.is_class(surface),
            lexicon.is_preposition(surface),
        )?;
        tokens.push(tok);
    }
    flush(&mut tokens, &mut labels, &mut sentence_labeled);

    if sentences.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(sentences)
}

/// Loads a corpus file. See [`parse_corpus`].
pub fn load_corpus(
    path: impl AsRef<Path>,
    alphabet: &mut LabelAlphabet,
    lexicon: &Lexicon,
) -> Result<Vec<AlignedSentence>> {
    parse_corpus(&fs::read_to_string(path)?, alphabet, lexicon)
}

/// Canonical text form: tab-separated lines, exactly one blank line between
/// sentences, trailing newline.
pub fn corpus_to_string(sentences: &[AlignedSentence], alphabet: &LabelAlphabet) -> String {
    let mut out = String::new();
    for (i, s) in sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for (j, tok) in s.tokens.iter().enumerate() {
            match &s.labels {
                Some(labels) => {
                    let _ = writeln!(out, "{}\t{}", tok.surface(), alphabet.name(labels[j]));
                }
                None => {
                    let _ = writeln!(out, "{}", tok.surface());
                }
            }
        }
    }
    out
}

/// Writes the canonical text form to `path`.
pub fn save_corpus(
    sentences: &[AlignedSentence],
    alphabet: &LabelAlphabet,
    path: impl AsRef<Path>,
) -> Result<()> {
    fs::write(path, corpus_to_string(sentences, alphabet))?;
    Ok(())
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Splits a fully labeled corpus into a labeled part and an unlabeled part
/// whose gold labels are retained separately.
///
/// `|labeled|` is `labeled_fraction × N` rounded half-up. Both partitions
/// preserve the original corpus order.
pub fn split_corpus(corpus: &[AlignedSentence], spec: &SplitSpec) -> Result<CorpusSplit> {
    if !(spec.labeled_fraction > 0.0 && spec.labeled_fraction <= 1.0) {
        return Err(Error::FractionDomain(spec.labeled_fraction));
    }
    if let Some(s) = corpus.iter().find(|s| !s.is_labeled()) {
        return Err(Error::Contract(format!(
            "split_corpus requires a fully labeled corpus (unlabeled sentence starting with {:?})",
            s.tokens.first().map(Token::surface).unwrap_or("")
        )));
    }
    let n = corpus.len();
    let n_labeled = round_half_up(spec.labeled_fraction * n as f64).min(n);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    rng.set_stream(spec.repeat_index as u64);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    let mut chosen = vec![false; n];
    for &idx in perm.iter().take(n_labeled) {
        chosen[idx] = true;
    }

    let mut labeled = Vec::with_capacity(n_labeled);
    let mut unlabeled = Vec::with_capacity(n - n_labeled);
    let mut unlabeled_gold = Vec::with_capacity(n - n_labeled);
    for (idx, sentence) in corpus.iter().enumerate() {
        if chosen[idx] {
            labeled.push(sentence.clone());
        } else {
            unlabeled.push(sentence.stripped());
            unlabeled_gold.push(sentence.clone());
        }
    }
    Ok(CorpusSplit {
        labeled,
        unlabeled,
        unlabeled_gold,
    })
}

/// Assigns slot labels to token positions by scanning left to right: each
/// `(slot, value)` pair claims the next unclaimed position whose surface
/// equals `value`; all other positions get the null label.
pub fn monotone_align(
    tokens: &[Token],
    slot_sequence: &[(String, String)],
    alphabet: &mut LabelAlphabet,
) -> Result<Vec<u32>> {
    let null = alphabet.lookup(NULL_LABEL).expect("null label reserved");
    let mut labels = vec![null; tokens.len()];
    let mut cursor = 0usize;
    for (slot, value) in slot_sequence {
        let found = tokens[cursor.min(tokens.len())..]
            .iter()
            .position(|t| t.surface() == value)
            .map(|off| cursor + off);
        match found {
            Some(pos) => {
                labels[pos] = alphabet.intern(slot);
                cursor = pos + 1;
            }
            None => {
                return Err(Error::Alignment {
                    slot: slot.clone(),
                    value: value.clone(),
                })
            }
        }
    }
    Ok(labels)
}
