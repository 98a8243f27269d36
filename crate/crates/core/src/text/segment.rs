//! Rule-based sentence segmentation.

/// Abbreviations that never end a sentence (compared case-insensitively,
/// without the trailing period).
pub const ABBREVIATIONS: &[&str] = &[
    "dr", "mr", "mrs", "ms", "prof", "sr", "jr", "st", "mt", "vs", "etc", "inc", "ltd", "co",
    "corp", "gen", "col", "lt", "sgt", "capt", "rev", "hon", "no", "fig", "approx", "dept",
    "e.g", "i.e", "a.m", "p.m", "u.s", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep",
    "sept", "oct", "nov", "dec",
];

#[derive(Debug, Clone)]
pub struct SegmenterOptions {
    /// Treat a single letter followed by a period as an initial, not a
    /// sentence end.
    pub guard_single_letters: bool,
}

impl Default for SegmenterOptions {
    fn default() -> Self {
        Self {
            guard_single_letters: true,
        }
    }
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

/// Splits at `.`, `!` or `?` (plus closing quotes/brackets) when followed by
/// whitespace and an uppercase letter. Segments are trimmed; joining them
/// with the removed whitespace reproduces the input.
pub fn segment_sentences(text: &str, opts: &SegmenterOptions) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !matches!(c, '.' | '!' | '?') {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && (matches!(chars[j].1, '.' | '!' | '?') || is_closer(chars[j].1)) {
            j += 1;
        }
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let boundary = k > j && k < chars.len() && chars[k].1.is_uppercase();
        if boundary && !(c == '.' && is_guarded(&text[start..pos], opts)) {
            let end = if j < chars.len() { chars[j].0 } else { text.len() };
            push_trimmed(&mut sentences, &text[start..end]);
            start = chars[k].0;
            i = k;
        } else {
            i = j.max(i + 1);
        }
    }
    push_trimmed(&mut sentences, &text[start..]);
    sentences
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

/// Whether the word right before a period is an abbreviation or initial.
fn is_guarded(before: &str, opts: &SegmenterOptions) -> bool {
    let word = before
        .rsplit(|c: char| c.is_whitespace() || c == '(' || c == '"')
        .next()
        .unwrap_or("");
    if word.is_empty() {
        return false;
    }
    let lower = word.to_lowercase();
    if ABBREVIATIONS.contains(&lower.as_str()) {
        return true;
    }
    opts.guard_single_letters && word.chars().count() == 1 && word.chars().all(char::is_alphabetic)
}
