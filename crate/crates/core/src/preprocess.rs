//! Text normalization and token pipeline shared by corpus documents and queries.
//!
//! The pipeline is: lowercase, collapse "sustainable development goal(s)" into
//! `sdg`, fuse `sdg` with an adjacent goal number into `sdg<n>`, tokenize,
//! lemmatize (irregular-form lexicon), Snowball-stem, then drop stop-words and
//! punctuation.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use regex::{Captures, Regex};
use rust_stemmers::{Algorithm, Stemmer};

const STOP_WORDS: &str = include_str!("../data/stop_words.txt");
const LEMMA_EXCEPTIONS: &str = include_str!("../data/lemma_exceptions.txt");

const ORDINAL_WORDS: [&str; 17] = [
    "first",
    "second",
    "third",
    "fourth",
    "fifth",
    "sixth",
    "seventh",
    "eighth",
    "ninth",
    "tenth",
    "eleventh",
    "twelfth",
    "thirteenth",
    "fourteenth",
    "fifteenth",
    "sixteenth",
    "seventeenth",
];

const CLITICS: [&str; 6] = ["'s", "'ll", "'re", "'ve", "'d", "'m"];

/// Ordered stemmed tokens of a normalized text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProcessedDocument {
    tokens: Vec<String>,
}

impl ProcessedDocument {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            tokens: tokens.into_iter().map(Into::into).collect(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// The English preprocessing pipeline. Built once and shared; all methods take `&self`.
pub struct Preprocessor {
    stemmer: Stemmer,
    stop_words: HashSet<String>,
    lemmas: HashMap<String, String>,
    goal_phrase: Regex,
    cardinal: Regex,
    ordinal: Regex,
}

impl std::fmt::Debug for Preprocessor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Preprocessor")
            .field("stop_words", &self.stop_words.len())
            .field("lemmas", &self.lemmas.len())
            .finish()
    }
}

impl Preprocessor {
    /// Pipeline backed by the bundled stop-word list and lemma lexicon.
    pub fn english() -> Self {
        let stop_words = parse_stop_words(STOP_WORDS);
        let lemmas = parse_lemmas(LEMMA_EXCEPTIONS);

        let ordinals = {
            // numeric forms 17th..1st, then the spelled-out ones
            let mut alts: Vec<String> = (1..=17).rev().map(numeric_ordinal).collect();
            alts.extend(ORDINAL_WORDS.iter().map(|w| w.to_string()));
            alts.join("|")
        };

        Self {
            stemmer: Stemmer::create(Algorithm::English),
            stop_words,
            lemmas,
            goal_phrase: Regex::new(r"\bsustainable\s+development\s+goals?\b").unwrap(),
            cardinal: Regex::new(r"\bsdg ?(1[0-7]|[1-9])\b").unwrap(),
            ordinal: Regex::new(&format!(r"\b({ordinals})\ssdg\b")).unwrap(),
        }
    }

    /// Process-wide instance; corpus and queries go through this same object.
    pub fn shared() -> &'static Preprocessor {
        static SHARED: OnceLock<Preprocessor> = OnceLock::new();
        SHARED.get_or_init(Preprocessor::english)
    }

    pub fn is_stop_word(&self, token: &str) -> bool {
        self.stop_words.contains(token)
    }

    pub fn stop_words(&self) -> impl Iterator<Item = &str> {
        self.stop_words.iter().map(String::as_str)
    }

    /// Lowercases and rewrites goal mentions into `sdg` / `sdg<n>` tokens.
    pub fn normalize(&self, raw: &str) -> String {
        let lower = raw.to_lowercase();
        let text = self.goal_phrase.replace_all(&lower, "sdg");
        let text = self
            .cardinal
            .replace_all(&text, |caps: &Captures| format!("sdg{}", &caps[1]));
        let text = self.ordinal.replace_all(&text, |caps: &Captures| {
            let n = ordinal_value(&caps[1]).expect("regex only matches known ordinals");
            format!("sdg{n}")
        });
        text.into_owned()
    }

    /// Normalized, unstemmed word tokens with stop-words kept. This is the
    /// surface fed to word-embedding averaging.
    pub fn surface_tokens(&self, raw: &str) -> Vec<String> {
        tokenize(&self.normalize(raw))
    }

    /// Normalized text handed to the sentence encoder (and digested for the cache).
    pub fn encoder_text(&self, raw: &str) -> String {
        self.normalize(raw)
    }

    /// Full pipeline down to stemmed content tokens.
    pub fn process(&self, raw: &str) -> ProcessedDocument {
        let tokens = tokenize(&self.normalize(raw))
            .into_iter()
            .filter_map(|surface| self.reduce(&surface))
            .collect();
        ProcessedDocument { tokens }
    }

    fn reduce(&self, surface: &str) -> Option<String> {
        if self.is_stop_word(surface) || is_punctuation(surface) {
            return None;
        }
        let lemma = self
            .lemmas
            .get(surface)
            .map(String::as_str)
            .unwrap_or(surface);
        if self.is_stop_word(lemma) {
            return None;
        }
        let stem = if lemma.chars().any(|c| c.is_ascii_digit()) {
            lemma.to_string()
        } else {
            self.stemmer.stem(lemma).into_owned()
        };
        if stem.is_empty() || self.is_stop_word(&stem) || is_punctuation(&stem) {
            return None;
        }
        Some(stem)
    }
}

fn numeric_ordinal(n: u32) -> String {
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

fn ordinal_value(word: &str) -> Option<u32> {
    if let Some(pos) = ORDINAL_WORDS.iter().position(|w| *w == word) {
        return Some(pos as u32 + 1);
    }
    let digits: String = word.chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}

fn parse_stop_words(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.replace(['\u{2018}', '\u{2019}'], "'"))
        .collect()
}

fn parse_lemmas(text: &str) -> HashMap<String, String> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| l.split_once('\t'))
        .map(|(form, lemma)| (form.trim().to_string(), lemma.trim().to_string()))
        .collect()
}

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '\'' | '\u{2018}' | '\u{2019}')
}

fn is_punctuation(token: &str) -> bool {
    !token.chars().any(char::is_alphanumeric)
}

/// Splits on whitespace and punctuation. Hyphens and apostrophes stay attached
/// when they sit between two alphanumerics; English clitics (`'s`, `n't`, ...)
/// are then split off as their own tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut words = Vec::new();
    let mut current = String::new();

    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.push(c);
        } else if is_joiner(c)
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            current.push(if c == '-' { '-' } else { '\'' });
        } else if !current.is_empty() {
            words.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        words.push(current);
    }

    let mut tokens = Vec::with_capacity(words.len());
    for word in words {
        match split_clitic(&word) {
            Some((base, clitic)) => {
                tokens.push(base.to_string());
                tokens.push(clitic.to_string());
            }
            None => tokens.push(word),
        }
    }
    tokens
}

fn split_clitic(word: &str) -> Option<(&str, &str)> {
    if word.len() > 3 && word.ends_with("n't") {
        let cut = word.len() - 3;
        return Some((&word[..cut], &word[cut..]));
    }
    CLITICS.iter().find_map(|clitic| {
        let cut = word.len().checked_sub(clitic.len())?;
        (cut > 0 && word.ends_with(clitic)).then(|| (&word[..cut], &word[cut..]))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp() -> &'static Preprocessor {
        Preprocessor::shared()
    }

    #[test]
    fn normalize_goal_phrase() {
        assert_eq!(pp().normalize("Sustainable Development Goal 5"), "sdg5");
        assert_eq!(
            pp().normalize("the Sustainable Development Goals"),
            "the sdg"
        );
    }

    #[test]
    fn normalize_ordinals() {
        assert_eq!(pp().normalize("second sdg"), "sdg2");
        assert_eq!(pp().normalize("the 17th SDG"), "the sdg17");
        assert_eq!(pp().normalize("11th sdg"), "sdg11");
        assert_eq!(pp().normalize("eighteenth sdg"), "eighteenth sdg");
        assert_eq!(pp().normalize("21st sdg"), "21st sdg");
    }

    #[test]
    fn normalize_cardinal_range() {
        assert_eq!(pp().normalize(""), "");
        assert_eq!(pp().normalize("sdg 18"), "sdg 18");
        assert_eq!(pp().normalize("sdg 0"), "sdg 0");
        assert_eq!(pp().normalize("sdg 17 and sdg10"), "sdg17 and sdg10");
        assert_eq!(pp().normalize("sdg  5"), "sdg  5");
        assert_eq!(pp().normalize("xsdg 5"), "xsdg 5");
    }

    #[test]
    fn process_examples() {
        assert_eq!(
            pp().process("Ending poverty in all its forms").tokens(),
            ["end", "poverti", "form"]
        );
        assert!(pp().process("the of and").is_empty());
        assert_eq!(pp().process("SDG 3 and sdg3").tokens(), ["sdg3", "sdg3"]);
        assert!(pp().process("").is_empty());
    }

    #[test]
    fn irregular_forms_are_lemmatized() {
        assert_eq!(
            pp().process("women").tokens(),
            pp().process("woman").tokens()
        );
        assert_eq!(
            pp().process("children").tokens(),
            pp().process("child").tokens()
        );
    }

    #[test]
    fn tokenizer_keeps_internal_joiners() {
        assert_eq!(tokenize("well-being, sdg3!"), ["well-being", "sdg3"]);
        assert_eq!(tokenize("women's rights"), ["women", "'s", "rights"]);
        assert_eq!(tokenize("don’t -- stop"), ["do", "n't", "stop"]);
        assert_eq!(tokenize("-x- ..."), ["x"]);
    }

    #[test]
    fn clitics_are_dropped_as_stop_words() {
        assert_eq!(pp().process("women's").tokens(), ["woman"]);
    }

    #[test]
    fn bundled_list_size() {
        assert_eq!(STOP_WORDS.lines().count(), 326);
    }
}
