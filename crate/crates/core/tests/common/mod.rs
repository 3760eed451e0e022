//! Shared fixtures for integration tests.
#![allow(dead_code)]

use rnn_orbits::numerics::Rng;

const DETERMINERS: &[&str] = &["the", "a", "his", "her", "their", "this", "that", "every"];
const NAMES: &[&str] = &[
    "anna", "levin", "kitty", "vronsky", "dolly", "stiva", "karenin", "sergey", "varenka", "nikolay",
];
const PRONOUNS: &[&str] = &["he", "she", "they", "it", "i", "we"];
const NOUNS: &[&str] = &[
    "man", "woman", "house", "door", "letter", "horse", "train", "room", "child", "face", "hand", "eyes",
    "voice", "heart", "life", "love", "wife", "husband", "brother", "sister", "friend", "mother", "father",
    "table", "window", "garden", "road", "field", "carriage", "station", "evening", "morning", "day", "night",
    "time", "word", "thought", "feeling", "question", "answer", "dinner", "tea", "book", "money", "work",
    "peasant", "village", "city", "ball", "dress",
];
const ADJECTIVES: &[&str] = &[
    "old", "young", "little", "happy", "sad", "beautiful", "strange", "quiet", "cold", "warm", "dark",
    "bright", "tired", "good", "new", "long", "simple", "terrible", "kind", "proud",
];
const TRANSITIVE: &[&str] = &[
    "saw", "loved", "took", "found", "knew", "felt", "heard", "opened", "closed", "remembered", "wanted",
    "asked", "told", "left", "met", "watched", "held", "read", "wrote", "understood", "followed", "forgot",
    "touched", "brought", "kissed",
];
const INTRANSITIVE: &[&str] = &[
    "smiled", "laughed", "cried", "sat", "stood", "waited", "walked", "slept", "thought", "listened",
    "answered", "blushed", "sighed", "went", "came",
];
const ADVERBS: &[&str] = &[
    "quietly", "suddenly", "again", "slowly", "softly", "now", "then", "still", "always", "never",
];
const PREPOSITIONS: &[&str] = &["in", "on", "at", "with", "from", "into", "near", "after", "before", "without"];
const CONJUNCTIONS: &[&str] = &["and", "but", "while", "when", "because", "so"];

/// Picks from a list with Zipf-like weights `1 / (rank + 1)`.
fn zipf<'a>(rng: &mut Rng, words: &[&'a str]) -> &'a str {
    let total: f64 = (1..=words.len()).map(|r| 1.0 / r as f64).sum();
    let mut u = rng.next_f64() * total;
    for (i, w) in words.iter().enumerate() {
        u -= 1.0 / (i + 1) as f64;
        if u <= 0.0 {
            return w;
        }
    }
    words[words.len() - 1]
}

fn chance(rng: &mut Rng, p: f64) -> bool {
    rng.next_f64() < p
}

fn noun_phrase(rng: &mut Rng, out: &mut Vec<String>) {
    let r = rng.next_f64();
    if r < 0.2 {
        out.push(zipf(rng, NAMES).into());
    } else if r < 0.4 {
        out.push(zipf(rng, PRONOUNS).into());
    } else {
        out.push(zipf(rng, DETERMINERS).into());
        if chance(rng, 0.4) {
            out.push(zipf(rng, ADJECTIVES).into());
        }
        out.push(zipf(rng, NOUNS).into());
    }
}

fn clause(rng: &mut Rng, out: &mut Vec<String>, depth: usize) {
    noun_phrase(rng, out);
    let r = rng.next_f64();
    if r < 0.5 {
        out.push(zipf(rng, TRANSITIVE).into());
        noun_phrase(rng, out);
    } else if r < 0.85 || depth > 0 {
        out.push(zipf(rng, INTRANSITIVE).into());
        if chance(rng, 0.4) {
            out.push(zipf(rng, ADVERBS).into());
        }
    } else {
        out.push("said".into());
        out.push(",".into());
        out.push("\"".into());
        clause(rng, out, depth + 1);
        out.push("\"".into());
        return;
    }
    if chance(rng, 0.35) {
        out.push(zipf(rng, PREPOSITIONS).into());
        noun_phrase(rng, out);
    }
}

fn sentence(rng: &mut Rng, out: &mut Vec<String>) {
    clause(rng, out, 0);
    if chance(rng, 0.3) {
        out.push(",".into());
        out.push(zipf(rng, CONJUNCTIONS).into());
        clause(rng, out, 1);
    }
    let end = rng.next_f64();
    out.push(if end < 0.85 { "." } else if end < 0.95 { "?" } else { "!" }.into());
}

/// Deterministic English-like prose of roughly `tokens` tokens from a small
/// probabilistic grammar (about 170 distinct words).
pub fn synthetic_novel(seed: u64, tokens: usize) -> String {
    let mut rng = Rng::new(seed);
    let mut words = Vec::with_capacity(tokens + 32);
    while words.len() < tokens {
        sentence(&mut rng, &mut words);
    }
    let mut text = String::new();
    let mut line = 0;
    for w in &words {
        if !text.is_empty() && !text.ends_with('\n') && !matches!(w.as_str(), "." | "," | "?" | "!") {
            text.push(' ');
        }
        text.push_str(w);
        line += 1;
        if line > 14 && w == "." {
            text.push('\n');
            line = 0;
        }
    }
    text
}
