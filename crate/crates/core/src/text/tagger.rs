//! Lexicon tagger with suffix fallbacks and a few contextual rules.
//!
//! The lexicon maps frequent lowercase words to one or two Penn tags which
//! are collapsed into the coarse [`PosTag`] set. Words with both a noun and
//! a verb reading are resolved from the left context.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Version identifier of the embedded lexicon.
pub const LEXICON_VERSION: &str = "brill-coarse-v1";

const LEXICON_DATA: &str = include_str!("../../data/lexicon.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Noun,
    Verb,
    Adj,
    Det,
    Pron,
    Adp,
    Adv,
    Num,
    Punct,
    Other,
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PosTag::Noun => "NOUN",
            PosTag::Verb => "VERB",
            PosTag::Adj => "ADJ",
            PosTag::Det => "DET",
            PosTag::Pron => "PRON",
            PosTag::Adp => "ADP",
            PosTag::Adv => "ADV",
            PosTag::Num => "NUM",
            PosTag::Punct => "PUNCT",
            PosTag::Other => "OTHER",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedToken {
    pub surface: String,
    pub tag: PosTag,
    /// Byte offsets into the tagged text.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    primary: PosTag,
    alternate: Option<PosTag>,
    base_verb: bool,
    modal: bool,
}

fn coarse(penn: &str) -> PosTag {
    match penn {
        "NN" | "NNS" | "NNP" | "NNPS" => PosTag::Noun,
        "VB" | "VBD" | "VBG" | "VBN" | "VBP" | "VBZ" => PosTag::Verb,
        "JJ" | "JJR" | "JJS" => PosTag::Adj,
        "DT" | "PDT" | "WDT" | "PRP$" | "WP$" => PosTag::Det,
        "PRP" | "WP" | "EX" => PosTag::Pron,
        "IN" | "TO" => PosTag::Adp,
        "RB" | "RBR" | "RBS" | "RP" | "WRB" => PosTag::Adv,
        "CD" => PosTag::Num,
        "." | "," | ":" | "(" | ")" | "\"" | "''" | "``" | "#" | "$" => PosTag::Punct,
        _ => PosTag::Other,
    }
}

fn lexicon() -> &'static HashMap<&'static str, Entry> {
    static LEXICON: OnceLock<HashMap<&'static str, Entry>> = OnceLock::new();
    LEXICON.get_or_init(|| {
        LEXICON_DATA
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .filter_map(|l| {
                let (word, tags) = l.split_once('\t')?;
                let mut penn = tags.split('|');
                let first = penn.next()?;
                let second = penn.next();
                let base_verb = tags.split('|').any(|t| t == "VB" || t == "VBP");
                Some((
                    word,
                    Entry {
                        primary: coarse(first),
                        alternate: second.map(coarse).filter(|t| *t != coarse(first)),
                        base_verb,
                        modal: first == "MD",
                    },
                ))
            })
            .collect()
    })
}

/// Number of entries in the embedded lexicon.
pub fn lexicon_size() -> usize {
    lexicon().len()
}

/// True for the placeholder persons used in commonsense heads.
pub fn is_person_placeholder(word: &str) -> bool {
    matches!(
        word.to_ascii_lowercase().as_str(),
        "personx" | "persony" | "personz" | "person x" | "person y" | "person z"
    )
}

fn is_punct_char(c: char) -> bool {
    !c.is_alphanumeric() && c != '\'' && c != '-' && c != '_'
}

/// Splits on whitespace and peels punctuation off both ends of each word.
fn split_tokens(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut offset = 0;
    for word in text.split_inclusive(char::is_whitespace) {
        let trimmed = word.trim_end();
        let base = offset;
        offset += word.len();
        if trimmed.is_empty() {
            continue;
        }
        let chars: Vec<(usize, char)> = trimmed.char_indices().collect();
        let mut lo = 0;
        let mut hi = chars.len();
        let mut leading = Vec::new();
        while lo < hi && is_punct_char(chars[lo].1) {
            let s = chars[lo].0;
            leading.push((base + s, base + s + chars[lo].1.len_utf8()));
            lo += 1;
        }
        let mut trailing = Vec::new();
        while hi > lo && is_punct_char(chars[hi - 1].1) {
            let s = chars[hi - 1].0;
            trailing.push((base + s, base + s + chars[hi - 1].1.len_utf8()));
            hi -= 1;
        }
        spans.extend(leading);
        if lo < hi {
            let s = chars[lo].0;
            let e = chars[hi - 1].0 + chars[hi - 1].1.len_utf8();
            spans.push((base + s, base + e));
        }
        spans.extend(trailing.into_iter().rev());
    }
    spans
}

fn suffix_guess(word: &str) -> PosTag {
    let lower = word.to_lowercase();
    if lower.chars().any(|c| c.is_ascii_digit())
        && lower.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',')
    {
        return PosTag::Num;
    }
    if lower.chars().all(is_punct_char) {
        return PosTag::Punct;
    }
    if word.chars().next().is_some_and(char::is_uppercase) {
        return PosTag::Noun;
    }
    const VERB: &[&str] = &["ing", "ed"];
    const ADV: &[&str] = &["ly"];
    const NOUN: &[&str] = &["tion", "sion", "ness", "ment", "ity", "ism", "ship", "ance", "ence"];
    const ADJ: &[&str] = &["ous", "ful", "able", "ible", "ive", "less", "ish", "ic", "al"];
    if NOUN.iter().any(|s| lower.ends_with(s)) {
        PosTag::Noun
    } else if VERB.iter().any(|s| lower.ends_with(s)) {
        PosTag::Verb
    } else if ADV.iter().any(|s| lower.ends_with(s)) {
        PosTag::Adv
    } else if ADJ.iter().any(|s| lower.ends_with(s)) {
        PosTag::Adj
    } else {
        PosTag::Noun
    }
}

/// Tags `text` token by token.
pub fn tag(text: &str) -> Vec<TaggedToken> {
    let lex = lexicon();
    let mut out: Vec<TaggedToken> = Vec::new();
    let mut seen_verb = false;
    for (start, end) in split_tokens(text) {
        let surface = &text[start..end];
        let lower = surface.to_lowercase();
        let prev = out.last();
        let prev_tag = prev.map(|t| t.tag);
        let prev_lower = prev.map(|t| t.surface.to_lowercase());
        let after_subject = !seen_verb
            && matches!(prev_tag, Some(PosTag::Noun) | Some(PosTag::Pron))
            && out.iter().all(|t| matches!(t.tag, PosTag::Noun | PosTag::Pron | PosTag::Det | PosTag::Adj));
        let after_infinitive_marker = prev_lower.as_deref() == Some("to")
            || out.last().is_some_and(|t| {
                lex.get(t.surface.to_lowercase().as_str()).is_some_and(|e| e.modal)
            });

        let tag = if is_person_placeholder(surface) {
            PosTag::Pron
        } else if let Some(entry) = lex.get(lower.as_str()) {
            match entry.alternate {
                Some(alt) if has_pair(entry.primary, alt, PosTag::Noun, PosTag::Verb) => {
                    if matches!(prev_tag, Some(PosTag::Det) | Some(PosTag::Adj)) {
                        PosTag::Noun
                    } else if after_infinitive_marker || after_subject {
                        PosTag::Verb
                    } else {
                        entry.primary
                    }
                }
                _ => entry.primary,
            }
        } else {
            let guess = suffix_guess(surface);
            if guess == PosTag::Noun
                && after_subject
                && lower.ends_with('s')
                && !surface.chars().next().is_some_and(char::is_uppercase)
            {
                PosTag::Verb
            } else {
                guess
            }
        };
        if tag == PosTag::Verb {
            seen_verb = true;
        }
        out.push(TaggedToken {
            surface: surface.to_string(),
            tag,
            start,
            end,
        });
    }
    out
}

fn has_pair(a: PosTag, b: PosTag, x: PosTag, y: PosTag) -> bool {
    (a == x && b == y) || (a == y && b == x)
}

fn is_base_verb(word: &str) -> bool {
    lexicon().get(word).is_some_and(|e| e.base_verb)
}

const IRREGULAR: &[(&str, &str)] = &[
    ("is", "be"), ("are", "be"), ("was", "be"), ("were", "be"), ("am", "be"), ("been", "be"),
    ("has", "have"), ("had", "have"), ("does", "do"), ("did", "do"), ("done", "do"),
    ("went", "go"), ("gone", "go"), ("goes", "go"), ("made", "make"), ("got", "get"),
    ("took", "take"), ("taken", "take"), ("came", "come"), ("became", "become"), ("ran", "run"),
    ("saw", "see"), ("seen", "see"), ("gave", "give"), ("given", "give"), ("bought", "buy"),
    ("thought", "think"), ("told", "tell"), ("found", "find"), ("left", "leave"),
    ("felt", "feel"), ("kept", "keep"), ("won", "win"), ("ate", "eat"), ("eaten", "eat"),
    ("wrote", "write"), ("written", "write"), ("sat", "sit"), ("stood", "stand"),
    ("brought", "bring"), ("began", "begin"), ("begun", "begin"), ("knew", "know"),
    ("known", "know"), ("said", "say"), ("paid", "pay"), ("met", "meet"), ("sold", "sell"),
    ("held", "hold"), ("lost", "lose"), ("spent", "spend"), ("built", "build"), ("sent", "send"),
    ("fell", "fall"), ("fallen", "fall"), ("drove", "drive"), ("driven", "drive"),
    ("flew", "fly"), ("flown", "fly"), ("broke", "break"), ("broken", "break"),
    ("chose", "choose"), ("chosen", "choose"), ("forgot", "forget"), ("forgotten", "forget"),
    ("taught", "teach"), ("caught", "catch"), ("fought", "fight"), ("slept", "sleep"),
    ("swam", "swim"), ("sang", "sing"), ("drank", "drink"), ("threw", "throw"),
    ("wore", "wear"), ("understood", "understand"), ("heard", "hear"), ("led", "lead"),
    ("meant", "mean"), ("read", "read"),
];

/// Crude verb lemma: irregular table, then lexicon-validated suffix
/// stripping, then blind suffix stripping.
pub fn lemmatize_verb(word: &str) -> String {
    let lower = word.to_lowercase();
    if let Some((_, lemma)) = IRREGULAR.iter().find(|(form, _)| *form == lower) {
        return (*lemma).to_string();
    }
    if is_base_verb(&lower) {
        return lower;
    }
    let mut candidates: Vec<String> = Vec::new();
    let strip = |suffix: &str| lower.strip_suffix(suffix).map(str::to_string);
    if let Some(s) = strip("ies") {
        candidates.push(format!("{s}y"));
    }
    if let Some(s) = strip("ied") {
        candidates.push(format!("{s}y"));
    }
    for suffix in ["s", "es", "d", "ed", "ing"] {
        if let Some(s) = strip(suffix) {
            candidates.push(s.clone());
            if suffix == "ing" {
                candidates.push(format!("{s}e"));
            }
            let chars: Vec<char> = s.chars().collect();
            if (suffix == "ed" || suffix == "ing")
                && chars.len() >= 2
                && chars[chars.len() - 1] == chars[chars.len() - 2]
            {
                candidates.push(chars[..chars.len() - 1].iter().collect());
            }
        }
    }
    if let Some(hit) = candidates.iter().find(|c| !c.is_empty() && is_base_verb(c)) {
        return hit.clone();
    }
    for suffix in ["ing", "ed", "es", "s"] {
        if let Some(s) = strip(suffix) {
            if s.len() >= 2 {
                return s;
            }
        }
    }
    lower
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(text: &str) -> Vec<(String, PosTag)> {
        tag(text).into_iter().map(|t| (t.surface, t.tag)).collect()
    }

    #[test]
    fn lexicon_loads() {
        assert!(lexicon_size() > 14_000, "{}", lexicon_size());
    }

    #[test]
    fn tags_running_example() {
        use PosTag::*;
        let got: Vec<PosTag> = tags("PersonX becomes a great basketball player")
            .into_iter()
            .map(|(_, t)| t)
            .collect();
        assert_eq!(got, [Pron, Verb, Det, Adj, Noun, Noun]);
    }

    #[test]
    fn resolves_noun_verb_ambiguity_after_subject() {
        let t = tags("PersonX acts funny");
        assert_eq!(t[1], ("acts".to_string(), PosTag::Verb));
        let t = tags("the acts");
        assert_eq!(t[1].1, PosTag::Noun);
        let t = tags("to practice");
        assert_eq!(t[1].1, PosTag::Verb);
    }

    #[test]
    fn unknown_s_word_after_subject_is_verb() {
        let t = tags("PersonX wreaks havoc");
        assert_eq!(t[1].1, PosTag::Verb);
        assert_eq!(t[2].1, PosTag::Noun);
    }

    #[test]
    fn punctuation_is_split_and_spans_are_exact() {
        let text = "He wins, (finally).";
        let toks = tag(text);
        let surfaces: Vec<&str> = toks.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(surfaces, ["He", "wins", ",", "(", "finally", ")", "."]);
        for t in &toks {
            assert_eq!(&text[t.start..t.end], t.surface);
        }
        assert_eq!(toks[2].tag, PosTag::Punct);
    }

    #[test]
    fn suffix_rules_cover_unknown_words() {
        assert_eq!(suffix_guess("blorfing"), PosTag::Verb);
        assert_eq!(suffix_guess("blorfly"), PosTag::Adv);
        assert_eq!(suffix_guess("blorfness"), PosTag::Noun);
        assert_eq!(suffix_guess("blorf"), PosTag::Noun);
        assert_eq!(suffix_guess("42"), PosTag::Num);
    }

    #[test]
    fn lemmas() {
        assert_eq!(lemmatize_verb("becomes"), "become");
        assert_eq!(lemmatize_verb("uses"), "use");
        assert_eq!(lemmatize_verb("buys"), "buy");
        assert_eq!(lemmatize_verb("stopped"), "stop");
        assert_eq!(lemmatize_verb("making"), "make");
        assert_eq!(lemmatize_verb("went"), "go");
        assert_eq!(lemmatize_verb("tries"), "try");
    }
}
