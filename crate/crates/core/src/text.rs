//! Deterministic lexical toolbox: tokenization, sentence splitting, keyword
//! extraction, and the similarity / overlap measures used downstream.
//!
//! Everything here is pure and allocation-cheap; no learned models. The
//! stopword list ships as a plain-text resource and can be overridden at
//! runtime (one word per line).

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io;
use std::path::Path;

const BUILTIN_STOPWORDS: &str = include_str!("../assets/stopwords.txt");

/// Ordered, normalized token sequence with a multiset view for overlaps.
///
/// Invariants: tokens are lowercase, non-empty, and free of leading/trailing
/// punctuation. Intra-token hyphens and decimal points survive ("covid-19",
/// "25.3", "19-20").
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSet {
    tokens: Vec<String>,
}

impl TokenSet {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Multiset view: token -> occurrence count.
    pub fn counts(&self) -> HashMap<&str, usize> {
        let mut m = HashMap::new();
        for t in &self.tokens {
            *m.entry(t.as_str()).or_insert(0) += 1;
        }
        m
    }
}

/// True for characters that may join two alphanumeric runs into one token.
fn is_joiner(c: char) -> bool {
    c == '-' || c == '.'
}

/// Split on whitespace and punctuation boundaries, lowercasing as we go.
///
/// A `-` or `.` stays inside a token only when flanked by alphanumerics on
/// both sides, so "covid-19" and "25.3" survive while "season," and
/// "(19-20)" shed their punctuation.
pub fn tokenize(text: &str) -> TokenSet {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.push(c);
        } else if is_joiner(c)
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(current.to_lowercase());
            current = String::new();
        }
    }
    if !current.is_empty() {
        tokens.push(current.to_lowercase());
    }
    TokenSet { tokens }
}

/// Split after '.', '!' or '?' when followed by whitespace and an uppercase
/// letter, or by end of text. Never splits inside numerics like "25.3".
/// Sentences are trimmed; empty segments are dropped.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    for (i, &c) in chars.iter().enumerate() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let rest = &chars[i + 1..];
        let boundary = match rest.first() {
            None => true,
            Some(n) if n.is_whitespace() => {
                match rest.iter().find(|ch| !ch.is_whitespace()) {
                    None => true,
                    Some(next_word) => next_word.is_uppercase(),
                }
            }
            Some(_) => false,
        };
        if boundary {
            let sentence: String = chars[start..=i].iter().collect();
            let trimmed = sentence.trim();
            if !trimmed.is_empty() {
                sentences.push(trimmed.to_string());
            }
            start = i + 1;
        }
    }
    if start < chars.len() {
        let tail: String = chars[start..].iter().collect();
        let trimmed = tail.trim();
        if !trimmed.is_empty() {
            sentences.push(trimmed.to_string());
        }
    }
    sentences
}

/// Keywords, entities and numeric literals extracted from a text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeywordSet {
    /// Non-stopword tokens plus numerics.
    pub keywords: BTreeSet<String>,
    /// Normalized capitalized runs (a cheap stand-in for NER output).
    pub entities: BTreeSet<String>,
    /// Tokens matching a number or numeric-range pattern.
    pub numerics: BTreeSet<String>,
}

impl KeywordSet {
    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty() && self.entities.is_empty() && self.numerics.is_empty()
    }

    /// Union of keywords, entities and numerics.
    pub fn all(&self) -> BTreeSet<&str> {
        let mut s: BTreeSet<&str> = BTreeSet::new();
        s.extend(self.keywords.iter().map(String::as_str));
        s.extend(self.entities.iter().map(String::as_str));
        s.extend(self.numerics.iter().map(String::as_str));
        s
    }

    /// True when the two sets share at least one keyword, entity or numeric.
    pub fn shares_any(&self, other: &KeywordSet) -> bool {
        let mine = self.all();
        other.all().iter().any(|t| mine.contains(t))
    }
}

/// A number ("1999", "25.3") or a numeric range ("19-20", "3.5-4.5").
pub fn is_numeric_literal(token: &str) -> bool {
    fn plain_number(s: &str) -> bool {
        !s.is_empty()
            && s.chars().all(|c| c.is_ascii_digit() || c == '.')
            && s.chars().filter(|c| *c == '.').count() <= 1
            && !s.starts_with('.')
            && !s.ends_with('.')
    }
    match token.split_once('-') {
        None => plain_number(token),
        Some((a, b)) => plain_number(a) && plain_number(b),
    }
}

/// Keyword-level overlap normalized by the smaller side, so short cells are
/// not penalized. Both sides use keywords ∪ entities; numerics ride along
/// inside keywords. Returns 0 when either side is empty.
pub fn overlap_ratio(a: &KeywordSet, b: &KeywordSet) -> f64 {
    let sa: BTreeSet<&str> = a
        .keywords
        .iter()
        .chain(a.entities.iter())
        .map(String::as_str)
        .collect();
    let sb: BTreeSet<&str> = b
        .keywords
        .iter()
        .chain(b.entities.iter())
        .map(String::as_str)
        .collect();
    if sa.is_empty() || sb.is_empty() {
        return 0.0;
    }
    let inter = sa.intersection(&sb).count();
    inter as f64 / sa.len().min(sb.len()) as f64
}

/// Lowercase and collapse internal whitespace to single spaces.
pub fn normalize_space(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Contiguous whole-token subsequence match. Empty needles never match.
pub fn token_seq_contains(haystack: &[String], needle: &[String]) -> bool {
    if needle.is_empty() || haystack.len() < needle.len() {
        return false;
    }
    haystack
        .windows(needle.len())
        .any(|w| w == needle)
}

/// Answer containment for table cells: exact normalized equality or a
/// contiguous whole-token subsequence ("1999" does not contain "99").
pub fn cell_contains(content: &str, answer: &str) -> bool {
    let answer_norm = normalize_space(answer);
    if answer_norm.is_empty() {
        return false;
    }
    if normalize_space(content) == answer_norm {
        return true;
    }
    token_seq_contains(tokenize(content).tokens(), tokenize(answer).tokens())
}

/// Answer containment for sentences: contiguous whole-token subsequence.
pub fn sentence_contains(content: &str, answer: &str) -> bool {
    token_seq_contains(tokenize(content).tokens(), tokenize(answer).tokens())
}

/// Stopword list plus the operations that depend on it.
#[derive(Debug, Clone)]
pub struct Lexicon {
    stopwords: HashSet<String>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::from_words(BUILTIN_STOPWORDS.lines())
    }
}

impl Lexicon {
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let stopwords = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        Lexicon { stopwords }
    }

    /// Load an override list: plain text, one word per line.
    pub fn from_file(path: &Path) -> io::Result<Self> {
        let body = std::fs::read_to_string(path)?;
        Ok(Lexicon::from_words(body.lines()))
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn len(&self) -> usize {
        self.stopwords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stopwords.is_empty()
    }

    /// Tokens of `text` with stopwords removed.
    pub fn content_tokens(&self, text: &str) -> Vec<String> {
        tokenize(text)
            .tokens
            .into_iter()
            .filter(|t| !self.is_stopword(t))
            .collect()
    }

    /// Numerics, entities (capitalized runs, minus sentence-initial
    /// stopwords) and stopword-complement keywords.
    pub fn extract_keywords(&self, text: &str) -> KeywordSet {
        let mut set = KeywordSet::default();
        for token in tokenize(text).tokens() {
            if is_numeric_literal(token) {
                set.numerics.insert(token.clone());
            }
            if !self.is_stopword(token) {
                set.keywords.insert(token.clone());
            }
        }
        set.keywords.extend(set.numerics.iter().cloned());

        for sentence in split_sentences(text) {
            let mut run: Vec<String> = Vec::new();
            for (word_idx, word) in sentence.split_whitespace().enumerate() {
                let capitalized = word
                    .chars()
                    .find(|c| c.is_alphabetic())
                    .is_some_and(|c| c.is_uppercase());
                let norm = tokenize(word).tokens().join(" ");
                let initial_stopword = word_idx == 0 && self.is_stopword(&norm);
                if capitalized && !norm.is_empty() && !initial_stopword {
                    run.push(norm);
                } else if !run.is_empty() {
                    set.entities.insert(run.join(" "));
                    run.clear();
                }
            }
            if !run.is_empty() {
                set.entities.insert(run.join(" "));
            }
        }
        set
    }

    /// Token-level F1 over stopword-filtered token multisets. Symmetric;
    /// 1.0 iff the filtered multisets are equal and non-empty; 0.0 when
    /// either side is empty after filtering.
    pub fn similarity(&self, a: &str, b: &str) -> f64 {
        let ta = self.content_tokens(a);
        let tb = self.content_tokens(b);
        if ta.is_empty() || tb.is_empty() {
            return 0.0;
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in &ta {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
        let mut overlap = 0usize;
        for t in &tb {
            if let Some(c) = counts.get_mut(t.as_str()) {
                if *c > 0 {
                    *c -= 1;
                    overlap += 1;
                }
            }
        }
        // 2PR/(P+R) simplifies to 2*overlap/(|a|+|b|).
        2.0 * overlap as f64 / (ta.len() + tb.len()) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex() -> Lexicon {
        Lexicon::default()
    }

    #[test]
    fn tokenize_strips_punctuation() {
        assert_eq!(
            tokenize("The season, suspended!").tokens(),
            ["the", "season", "suspended"]
        );
    }

    #[test]
    fn tokenize_keeps_hyphens_and_decimals() {
        assert_eq!(
            tokenize("25.3 points (19-20)").tokens(),
            ["25.3", "points", "19-20"]
        );
        assert_eq!(tokenize("COVID-19").tokens(), ["covid-19"]);
    }

    #[test]
    fn tokenize_empty() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  ... !!").is_empty());
    }

    #[test]
    fn tokenize_trailing_joiner_dropped() {
        assert_eq!(tokenize("end. next-").tokens(), ["end", "next"]);
    }

    #[test]
    fn sentences_two_plain() {
        assert_eq!(split_sentences("A b. C d."), ["A b.", "C d."]);
    }

    #[test]
    fn sentences_keep_decimals_whole() {
        let s = split_sentences("Score was 25.3 in 2020. Next season.");
        assert_eq!(s.len(), 2);
        assert!(s[0].contains("25.3"));
        assert_eq!(s[1], "Next season.");
    }

    #[test]
    fn sentences_no_split_before_lowercase() {
        assert_eq!(split_sentences("e.g. foo bar. Baz.").len(), 2);
    }

    #[test]
    fn sentences_empty() {
        assert!(split_sentences("").is_empty());
    }

    #[test]
    fn keywords_fig1_sentence() {
        let ks = lex().extract_keywords("The season was suspended by COVID-19");
        assert!(ks.entities.contains("covid-19"));
        for k in ["season", "suspended", "covid-19"] {
            assert!(ks.keywords.contains(k), "missing keyword {k}");
        }
        assert!(!ks.keywords.contains("the"));
    }

    #[test]
    fn keywords_pure_numeric() {
        let ks = lex().extract_keywords("25.3");
        assert_eq!(ks.numerics.iter().collect::<Vec<_>>(), ["25.3"]);
    }

    #[test]
    fn keywords_stopwords_only() {
        let ks = lex().extract_keywords("the of and");
        assert!(ks.is_empty());
    }

    #[test]
    fn numeric_literal_patterns() {
        for good in ["1999", "25.3", "19-20", "3.5-4.5"] {
            assert!(is_numeric_literal(good), "{good}");
        }
        for bad in ["covid-19", "a.b", "19-", ".5", "1-2-3", ""] {
            assert!(!is_numeric_literal(bad), "{bad}");
        }
    }

    #[test]
    fn similarity_identity_and_empty() {
        let l = lex();
        assert_eq!(l.similarity("points scored", "points scored"), 1.0);
        assert_eq!(l.similarity("", "anything"), 0.0);
        assert_eq!(l.similarity("the a an", "the a an"), 0.0);
    }

    #[test]
    fn similarity_hand_computed() {
        // filtered: [points, scored, 2020] vs [season, 2020] -> overlap 1,
        // F1 = 2*1/(3+2) = 0.4
        assert_eq!(lex().similarity("points scored 2020", "season 2020"), 0.4);
    }

    #[test]
    fn overlap_ratio_cases() {
        let l = lex();
        let a = l.extract_keywords("covid-19 season");
        let b = l.extract_keywords("covid-19 19-20 points");
        assert_eq!(overlap_ratio(&a, &b), 0.5);
        assert_eq!(overlap_ratio(&a, &a), 1.0);
        let empty = KeywordSet::default();
        assert_eq!(overlap_ratio(&a, &empty), 0.0);
    }

    #[test]
    fn containment_rules() {
        assert!(cell_contains("25.3", "25.3"));
        assert!(sentence_contains("won the cup in 1999", "cup"));
        assert!(!cell_contains("1999", "99"));
        assert!(cell_contains("Lionel Messi (captain)", "lionel messi"));
        assert!(!sentence_contains("anything", ""));
    }

    #[test]
    fn lexicon_override() {
        let l = Lexicon::from_words(["foo"]);
        assert!(l.is_stopword("foo"));
        assert!(!l.is_stopword("the"));
    }
}
