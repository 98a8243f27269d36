const SUFFIXES: &[&str] = &["ingly", "edly", "ing", "ies", "ied", "es", "ed", "ly", "s"];

/// Crude suffix-stripping stem; keeps at least three characters.
pub fn stem(word: &str) -> &str {
    for suf in SUFFIXES {
        if let Some(base) = word.strip_suffix(suf) {
            if base.chars().count() >= 3 {
                return base;
            }
        }
    }
    word
}

/// Aligns candidate tokens to reference tokens: exact matches first, then
/// stem matches among the leftovers. Each stage pairs a candidate token with
/// the earliest free reference token. Returns (candidate, reference) index
/// pairs sorted by candidate position.
fn align(candidate: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let mut ref_used = vec![false; reference.len()];
    let mut cand_used = vec![false; candidate.len()];
    let mut pairs = Vec::new();
    let stages: [fn(&str) -> &str; 2] = [|w| w, stem];
    for key in stages {
        for (i, c) in candidate.iter().enumerate() {
            if cand_used[i] {
                continue;
            }
            let hit = reference
                .iter()
                .enumerate()
                .find(|(j, r)| !ref_used[*j] && key(r) == key(c))
                .map(|(j, _)| j);
            if let Some(j) = hit {
                ref_used[j] = true;
                cand_used[i] = true;
                pairs.push((i, j));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// METEOR without the synonym stage: recall-weighted harmonic mean
/// 10PR/(R+9P) times (1 - 0.5 (chunks/matches)^3).
pub fn meteor_sentence(candidate: &[String], reference: &[String]) -> f64 {
    let pairs = align(candidate, reference);
    let m = pairs.len();
    if m == 0 {
        return 0.0;
    }
    let chunks = 1 + pairs
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count();
    let p = m as f64 / candidate.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / m as f64).powi(3);
    fmean * (1.0 - penalty)
}
