//! Built-in probabilistic grammar for flight-domain slot-filling data.
//!
//! The grammar is fixed and versioned: changing any table below is a breaking
//! change to the pinned regression baselines. Sentences combine a goal
//! preamble with optional origin/destination, date, time, airline, and
//! onboard-service segments. Origin/destination markers carry the slot label
//! together with the city, so the first-order label transition is informative
//! within the [0,+2] feature window. Onboard-service words are an open
//! vocabulary split between meals and amenities; the `offering` frame is
//! ambiguous between the two and only the word identity (or its occurrences
//! in the `serving`/`featuring` frames, which sit to the *left* of the word)
//! resolves it.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AlignedSentence, LabelAlphabet, Lexicon, Token};
use crate::error::{Error, Result};

pub(crate) const LABELS: [&str; 8] = [
    "O", "FROMLOC", "TOLOC", "DATE", "TIME", "AIRLINE", "MEAL", "AMENITY",
];

pub(crate) const CLASS_WORDS: [&str; 4] = ["city_name", "day_name", "time_value", "airline_name"];

pub(crate) const PREPOSITIONS: [&str; 10] = [
    "from", "to", "into", "toward", "leaving", "departing", "on", "at", "with", "next",
];

const PREAMBLES: [(&[&str], f64); 8] = [
    (&["i", "want", "to", "fly"], 0.20),
    (&["i", "need", "a", "flight"], 0.15),
    (&["show", "me", "flights"], 0.15),
    (&["book", "a", "flight"], 0.12),
    (&["i", "would", "like", "to", "fly"], 0.10),
    (&["list", "flights"], 0.10),
    (&["find", "me", "a", "flight"], 0.10),
    (&["give", "me", "the", "flights"], 0.08),
];

const FROM_MARKERS: [(&str, f64); 3] = [("from", 0.72), ("leaving", 0.18), ("departing", 0.10)];
const TO_MARKERS: [(&str, f64); 3] = [("to", 0.74), ("into", 0.16), ("toward", 0.10)];

pub(crate) const CITIES: [&str; 41] = [
    "dallas",
    "boston",
    "denver",
    "city_name",
    "atlanta",
    "chicago",
    "phoenix",
    "seattle",
    "portland",
    "omaha",
    "tucson",
    "reno",
    "boise",
    "fresno",
    "tampa",
    "austin",
    "memphis",
    "nashville",
    "orlando",
    "detroit",
    "cleveland",
    "pittsburgh",
    "baltimore",
    "charlotte",
    "columbus",
    "milwaukee",
    "sacramento",
    "oakland",
    "tulsa",
    "wichita",
    "spokane",
    "anchorage",
    "honolulu",
    "savannah",
    "lubbock",
    "amarillo",
    "bakersfield",
    "eugene",
    "tacoma",
    "shreveport",
    "laredo",
];

pub(crate) const MEALS: [&str; 24] = [
    "breakfast",
    "lunch",
    "dinner",
    "supper",
    "brunch",
    "snacks",
    "sandwiches",
    "refreshments",
    "pasta",
    "steak",
    "seafood",
    "salads",
    "pancakes",
    "waffles",
    "burgers",
    "noodles",
    "curry",
    "dumplings",
    "omelets",
    "bagels",
    "muffins",
    "tacos",
    "sushi",
    "chowder",
];

pub(crate) const AMENITIES: [&str; 24] = [
    "wifi",
    "legroom",
    "recliners",
    "outlets",
    "screens",
    "blankets",
    "pillows",
    "headphones",
    "lounges",
    "magazines",
    "newspapers",
    "slippers",
    "eyeshades",
    "earplugs",
    "chargers",
    "skybeds",
    "showers",
    "suites",
    "footrests",
    "armrests",
    "partitions",
    "minibars",
    "lockers",
    "hammocks",
];

const P_FROM: f64 = 0.75;
const P_TO: f64 = 0.90;
const P_SWAP_DIRECTIONS: f64 = 0.15;
const P_DATE: f64 = 0.55;
const P_TIME: f64 = 0.30;
const P_AIRLINE: f64 = 0.30;
const P_SERVICE: f64 = 0.90;
const P_TAIL: f64 = 0.25;

/// Power-law decay over city ranks; steep enough that tail cities stay rare.
const CITY_EXPONENT: f64 = 1.4;
/// Flatter decay over service words so a sizable middle band is rare but
/// not vanishing.
const PIVOT_EXPONENT: f64 = 0.7;

struct WeightedStrs {
    items: Vec<&'static str>,
    cumulative: Vec<f64>,
}

impl WeightedStrs {
    fn from_pairs(pairs: &[(&'static str, f64)]) -> Self {
        let items = pairs.iter().map(|(s, _)| *s).collect();
        let cumulative = cumulative(pairs.iter().map(|(_, w)| *w));
        WeightedStrs { items, cumulative }
    }

    fn power_law(items: &[&'static str], exponent: f64) -> Self {
        let weights = (0..items.len()).map(|i| 1.0 / ((i + 1) as f64).powf(exponent));
        WeightedStrs {
            items: items.to_vec(),
            cumulative: cumulative(weights),
        }
    }

    fn pick(&self, rng: &mut ChaCha8Rng) -> &'static str {
        let x: f64 = rng.gen();
        let idx = self
            .cumulative
            .iter()
            .position(|&c| x < c)
            .unwrap_or(self.items.len() - 1);
        self.items[idx]
    }
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let ws: Vec<f64> = weights.collect();
    let total: f64 = ws.iter().sum();
    let mut acc = 0.0;
    ws.iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect()
}

/// Interleaves meals and amenities so both share the full frequency range.
fn pivot_ranks() -> Vec<&'static str> {
    let mut out = Vec::with_capacity(MEALS.len() + AMENITIES.len());
    for i in 0..MEALS.len().max(AMENITIES.len()) {
        if i < MEALS.len() {
            out.push(MEALS[i]);
        }
        if i < AMENITIES.len() {
            out.push(AMENITIES[i]);
        }
    }
    out
}

struct Grammar {
    preambles: Vec<(Vec<&'static str>, f64)>,
    preamble_cum: Vec<f64>,
    from_markers: WeightedStrs,
    to_markers: WeightedStrs,
    cities: WeightedStrs,
    pivots: WeightedStrs,
}

impl Grammar {
    fn new() -> Self {
        let preambles: Vec<(Vec<&'static str>, f64)> = PREAMBLES
            .iter()
            .map(|(toks, w)| (toks.to_vec(), *w))
            .collect();
        let preamble_cum = cumulative(preambles.iter().map(|(_, w)| *w));
        Grammar {
            preambles,
            preamble_cum,
            from_markers: WeightedStrs::from_pairs(&FROM_MARKERS),
            to_markers: WeightedStrs::from_pairs(&TO_MARKERS),
            cities: WeightedStrs::power_law(&CITIES, CITY_EXPONENT),
            pivots: WeightedStrs::power_law(&pivot_ranks(), PIVOT_EXPONENT),
        }
    }

    fn pick_preamble(&self, rng: &mut ChaCha8Rng) -> &[&'static str] {
        let x: f64 = rng.gen();
        let idx = self
            .preamble_cum
            .iter()
            .position(|&c| x < c)
            .unwrap_or(self.preambles.len() - 1);
        &self.preambles[idx].0
    }
}

fn is_meal(word: &str) -> bool {
    MEALS.contains(&word)
}

struct SentenceBuilder<'a> {
    words: Vec<&'static str>,
    labels: Vec<u32>,
    alphabet: &'a LabelAlphabet,
}

impl<'a> SentenceBuilder<'a> {
    fn push(&mut self, word: &'static str, label: &str) {
        self.words.push(word);
        self.labels
            .push(self.alphabet.lookup(label).expect("label pre-interned"));
    }

    fn push_all(&mut self, words: &[&'static str], label: &str) {
        for w in words {
            self.push(w, label);
        }
    }
}

fn emit_sentence(
    grammar: &Grammar,
    rng: &mut ChaCha8Rng,
    alphabet: &LabelAlphabet,
    lexicon: &Lexicon,
) -> AlignedSentence {
    let mut b = SentenceBuilder {
        words: Vec::new(),
        labels: Vec::new(),
        alphabet,
    };

    let preamble = grammar.pick_preamble(rng).to_vec();
    b.push_all(&preamble, "O");

    let has_from = rng.gen::<f64>() < P_FROM;
    let has_to = rng.gen::<f64>() < P_TO;
    let swap = rng.gen::<f64>() < P_SWAP_DIRECTIONS;
    let emit_from = |b: &mut SentenceBuilder, rng: &mut ChaCha8Rng| {
        let marker = grammar.from_markers.pick(rng);
        let city = grammar.cities.pick(rng);
        b.push(marker, "FROMLOC");
        b.push(city, "FROMLOC");
    };
    let emit_to = |b: &mut SentenceBuilder, rng: &mut ChaCha8Rng| {
        let marker = grammar.to_markers.pick(rng);
        let city = grammar.cities.pick(rng);
        b.push(marker, "TOLOC");
        b.push(city, "TOLOC");
    };
    if swap {
        if has_to {
            emit_to(&mut b, rng);
        }
        if has_from {
            emit_from(&mut b, rng);
        }
    } else {
        if has_from {
            emit_from(&mut b, rng);
        }
        if has_to {
            emit_to(&mut b, rng);
        }
    }

    if rng.gen::<f64>() < P_DATE {
        let marker = if rng.gen::<f64>() < 0.8 { "on" } else { "next" };
        b.push(marker, "O");
        b.push("day_name", "DATE");
    }
    if rng.gen::<f64>() < P_TIME {
        b.push("at", "O");
        b.push("time_value", "TIME");
    }
    if rng.gen::<f64>() < P_AIRLINE {
        let marker = if rng.gen::<f64>() < 0.65 { "on" } else { "with" };
        b.push(marker, "O");
        b.push("airline_name", "AIRLINE");
    }
    if rng.gen::<f64>() < P_SERVICE {
        let frame: f64 = rng.gen();
        let (frame_word, pivot) = if frame < 0.4 {
            ("offering", grammar.pivots.pick(rng))
        } else if frame < 0.7 {
            // Meal-only frame: resample until the pivot is a meal.
            let mut w = grammar.pivots.pick(rng);
            while !is_meal(w) {
                w = grammar.pivots.pick(rng);
            }
            ("serving", w)
        } else {
            let mut w = grammar.pivots.pick(rng);
            while is_meal(w) {
                w = grammar.pivots.pick(rng);
            }
            ("featuring", w)
        };
        let label = if is_meal(pivot) { "MEAL" } else { "AMENITY" };
        b.push(frame_word, "O");
        b.push(pivot, label);
        b.push("onboard", "O");
    }
    if rng.gen::<f64>() < P_TAIL {
        let x: f64 = rng.gen();
        if x < 0.6 {
            b.push("please", "O");
        } else if x < 0.8 {
            b.push("today", "DATE");
        } else if x < 0.95 {
            b.push("tomorrow", "DATE");
        } else {
            b.push("tonight", "DATE");
        }
    }

    let tokens = b
        .words
        .iter()
        .map(|w| {
            Token::new(*w, lexicon.is_class(w), lexicon.is_preposition(w))
                .expect("grammar emits valid surfaces")
        })
        .collect();
    AlignedSentence {
        tokens,
        labels: Some(b.labels),
    }
}

/// The lexicon matching the built-in grammar.
pub(crate) fn grammar_lexicon() -> Lexicon {
    Lexicon::new(
        CLASS_WORDS.iter().map(|s| s.to_string()),
        PREPOSITIONS.iter().map(|s| s.to_string()),
        super::DEFAULT_DUMMY,
    )
    .expect("grammar lexicon is valid")
}

/// Emits `n_sentences` fully labeled sentences from the built-in grammar,
/// deterministically for a given `grammar_seed`.
pub fn generate_synthetic(
    grammar_seed: u64,
    n_sentences: usize,
) -> Result<(Vec<AlignedSentence>, LabelAlphabet, Lexicon)> {
    if n_sentences == 0 {
        return Err(Error::Domain(
            "synthetic generation requires at least one sentence".into(),
        ));
    }
    let mut alphabet = LabelAlphabet::new();
    for l in LABELS {
        alphabet.intern(l);
    }
    let lexicon = grammar_lexicon();
    let grammar = Grammar::new();
    let mut rng = ChaCha8Rng::seed_from_u64(grammar_seed);
    let sentences = (0..n_sentences)
        .map(|_| emit_sentence(&grammar, &mut rng, &alphabet, &lexicon))
        .collect();
    Ok((sentences, alphabet, lexicon))
}
