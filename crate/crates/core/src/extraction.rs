//! Head extraction: sentences, noun-phrase chunks and verb-phrase chunks.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::KnowledgeHead;
use crate::text::tagger::{lemmatize_verb, PosTag, TaggedToken};
use crate::text::{segment_sentences, tag, SegmenterOptions};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractionError {
    #[error("at least one extractor must be enabled")]
    NoExtractors,
    #[error("unknown extractor `{0}` (expected sentence, np or vp)")]
    UnknownExtractor(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadForm {
    Sentence,
    NounPhrase,
    VerbPhrase,
}

impl fmt::Display for HeadForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeadForm::Sentence => "sentence",
            HeadForm::NounPhrase => "noun_phrase",
            HeadForm::VerbPhrase => "verb_phrase",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedHead {
    pub head: KnowledgeHead,
    pub form: HeadForm,
    pub source_sentence_index: usize,
}

/// Which extractors to run. Parsed from names like `sentence,np,vp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extractors {
    pub sentence: bool,
    pub noun_phrase: bool,
    pub verb_phrase: bool,
}

impl Extractors {
    pub const ALL: Extractors = Extractors {
        sentence: true,
        noun_phrase: true,
        verb_phrase: true,
    };

    pub const NONE: Extractors = Extractors {
        sentence: false,
        noun_phrase: false,
        verb_phrase: false,
    };

    pub fn only(form: HeadForm) -> Self {
        let mut e = Self::NONE;
        e.enable(form);
        e
    }

    pub fn enable(&mut self, form: HeadForm) {
        match form {
            HeadForm::Sentence => self.sentence = true,
            HeadForm::NounPhrase => self.noun_phrase = true,
            HeadForm::VerbPhrase => self.verb_phrase = true,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.sentence || self.noun_phrase || self.verb_phrase)
    }
}

impl Default for Extractors {
    fn default() -> Self {
        Self::ALL
    }
}

impl FromStr for Extractors {
    type Err = ExtractionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut e = Extractors::NONE;
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            let form = match name.to_ascii_lowercase().as_str() {
                "sentence" | "sent" => HeadForm::Sentence,
                "np" | "noun_phrase" | "noun-phrase" => HeadForm::NounPhrase,
                "vp" | "verb_phrase" | "verb-phrase" => HeadForm::VerbPhrase,
                other => return Err(ExtractionError::UnknownExtractor(other.to_string())),
            };
            e.enable(form);
        }
        Ok(e)
    }
}

const LEADING_DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "some", "any", "my", "your", "his", "her",
    "its", "our", "their", "every", "each",
];

/// Case-folded, whitespace-collapsed text with leading determiners removed.
pub fn dedup_key(text: &str) -> String {
    let words: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
    let skip = words
        .iter()
        .take_while(|w| LEADING_DETERMINERS.contains(&w.as_str()))
        .count();
    // a head made only of determiners keeps its own text as key
    let rest = if skip == words.len() { &words[..] } else { &words[skip..] };
    rest.join(" ")
}

/// A maximal `DET? (ADJ|NUM)* NOUN+` run, as token indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct NpChunk {
    start: usize,
    first_modifier: usize,
    first_noun: usize,
    end: usize, // exclusive
}

fn np_chunks(tokens: &[TaggedToken]) -> Vec<NpChunk> {
    let mut chunks = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let start = i;
        let mut j = i;
        if tokens[j].tag == PosTag::Det {
            j += 1;
        }
        let first_modifier = j;
        while j < tokens.len() && matches!(tokens[j].tag, PosTag::Adj | PosTag::Num) {
            j += 1;
        }
        let first_noun = j;
        while j < tokens.len() && tokens[j].tag == PosTag::Noun {
            j += 1;
        }
        if j > first_noun {
            chunks.push(NpChunk {
                start,
                first_modifier,
                first_noun,
                end: j,
            });
            i = j;
        } else {
            i += 1;
        }
    }
    chunks
}

fn span_text<'a>(sentence: &'a str, tokens: &[TaggedToken], from: usize, to: usize) -> &'a str {
    &sentence[tokens[from].start..tokens[to - 1].end]
}

fn noun_phrase_heads(sentence: &str, tokens: &[TaggedToken]) -> Vec<String> {
    let mut out = Vec::new();
    for c in np_chunks(tokens) {
        out.push(span_text(sentence, tokens, c.first_modifier, c.end).to_string());
        if c.first_noun > c.first_modifier {
            out.push(span_text(sentence, tokens, c.first_noun, c.end).to_string());
        }
        if c.end - c.first_noun > 1 {
            for t in &tokens[c.first_noun..c.end] {
                out.push(t.surface.clone());
            }
        }
    }
    out
}

fn verb_phrase_heads(tokens: &[TaggedToken]) -> Vec<String> {
    let chunks = np_chunks(tokens);
    let mut out = Vec::new();
    for (v, tok) in tokens.iter().enumerate() {
        if tok.tag != PosTag::Verb {
            continue;
        }
        let lemma = lemmatize_verb(&tok.surface);
        if lemma == "be" {
            continue;
        }
        // skip function words between the verb and its object
        let mut k = v + 1;
        while k < tokens.len() && matches!(tokens[k].tag, PosTag::Adv | PosTag::Adp) {
            k += 1;
        }
        if k >= tokens.len() {
            continue;
        }
        let object = if let Some(c) = chunks.iter().find(|c| c.start == k) {
            Some(tokens[c.end - 1].surface.clone())
        } else if tokens[k].tag == PosTag::Pron
            && crate::text::tagger::is_person_placeholder(&tokens[k].surface)
        {
            Some(tokens[k].surface.clone())
        } else {
            None
        };
        if let Some(object) = object {
            out.push(format!("{lemma} {object}"));
        }
    }
    out
}

/// Runs the enabled extractors over every sentence of `text`.
///
/// Per sentence the order is: the sentence, noun-phrase heads, verb-phrase
/// heads. Later duplicates under [`dedup_key`] are dropped.
pub fn extract_heads(text: &str, extractors: Extractors) -> Result<Vec<ExtractedHead>, ExtractionError> {
    if extractors.is_empty() {
        return Err(ExtractionError::NoExtractors);
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut push = |text: &str, form: HeadForm, idx: usize, out: &mut Vec<ExtractedHead>| {
        let Ok(head) = KnowledgeHead::new(text) else {
            return;
        };
        if seen.insert(dedup_key(head.text())) {
            out.push(ExtractedHead {
                head,
                form,
                source_sentence_index: idx,
            });
        }
    };
    for (idx, sentence) in segment_sentences(text, &SegmenterOptions::default())
        .iter()
        .enumerate()
    {
        let tokens = tag(sentence);
        if extractors.sentence {
            // heads read as clauses; a final period would double up in templates
            let clause = sentence.trim_end_matches(['.', '!', '?', ';', ':', ' ']);
            push(clause, HeadForm::Sentence, idx, &mut out);
        }
        if extractors.noun_phrase {
            for np in noun_phrase_heads(sentence, &tokens) {
                push(&np, HeadForm::NounPhrase, idx, &mut out);
            }
        }
        if extractors.verb_phrase {
            for vp in verb_phrase_heads(&tokens) {
                push(&vp, HeadForm::VerbPhrase, idx, &mut out);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(heads: &[ExtractedHead]) -> Vec<&str> {
        heads.iter().map(|h| h.head.text()).collect()
    }

    #[test]
    fn running_example() {
        let heads = extract_heads("PersonX becomes a great basketball player", Extractors::ALL).unwrap();
        assert_eq!(
            texts(&heads),
            [
                "PersonX becomes a great basketball player",
                "great basketball player",
                "basketball player",
                "basketball",
                "player",
                "become player",
            ]
        );
        assert_eq!(heads[0].form, HeadForm::Sentence);
        assert_eq!(heads[2].form, HeadForm::NounPhrase);
        assert_eq!(heads[5].form, HeadForm::VerbPhrase);
    }

    #[test]
    fn single_noun() {
        let heads = extract_heads("hammer", Extractors::only(HeadForm::NounPhrase)).unwrap();
        assert_eq!(texts(&heads), ["hammer"]);
    }

    #[test]
    fn duplicates_collapse_across_sentences() {
        // tags: He/PRON buys/VERB a/DET hammer/NOUN ./PUNCT (twice, with "uses")
        let heads = extract_heads("He buys a hammer. He uses a hammer.", Extractors::ALL).unwrap();
        assert_eq!(
            texts(&heads),
            ["He buys a hammer", "hammer", "buy hammer", "He uses a hammer", "use hammer"]
        );
        assert_eq!(heads[3].source_sentence_index, 1);
    }

    #[test]
    fn terminal_punctuation_does_not_change_heads() {
        let plain = extract_heads("PersonX becomes a great basketball player", Extractors::ALL).unwrap();
        for suffix in [".", "!", " ."] {
            let text = format!("PersonX becomes a great basketball player{suffix}");
            assert_eq!(extract_heads(&text, Extractors::ALL).unwrap(), plain, "{text:?}");
        }
    }

    #[test]
    fn placeholder_object_forms_verb_phrase() {
        let heads = extract_heads("PersonX motivates PersonY", Extractors::only(HeadForm::VerbPhrase)).unwrap();
        assert_eq!(texts(&heads), ["motivate PersonY"]);
    }

    #[test]
    fn no_extractors_is_an_error() {
        assert_eq!(
            extract_heads("x", Extractors::NONE).unwrap_err(),
            ExtractionError::NoExtractors
        );
    }

    #[test]
    fn extractor_names_parse() {
        assert_eq!("sentence,np,vp".parse::<Extractors>().unwrap(), Extractors::ALL);
        assert_eq!("np".parse::<Extractors>().unwrap(), Extractors::only(HeadForm::NounPhrase));
        assert!("nope".parse::<Extractors>().is_err());
    }

    #[test]
    fn dedup_key_strips_determiners_and_case() {
        assert_eq!(dedup_key("The  Hammer"), "hammer");
        assert_eq!(dedup_key("a hammer"), dedup_key("hammer"));
        assert_eq!(dedup_key("the"), "the");
    }

    #[test]
    fn noun_phrase_heads_are_contiguous_substrings() {
        let text = "The old man sells fresh fish at the busy market.";
        for h in extract_heads(text, Extractors::only(HeadForm::NounPhrase)).unwrap() {
            assert!(text.contains(h.head.text()), "{}", h.head);
        }
    }
}
