use std::collections::HashMap;

use super::ngrams;

const PRECISION_FLOOR: f64 = 1e-9;

fn counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    for g in ngrams(tokens, n) {
        *m.entry(g).or_default() += 1;
    }
    m
}

/// Reference length closest to `c`; ties go to the shorter one.
fn closest_ref_len(c: usize, refs: &[Vec<String>]) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(c), r))
        .unwrap_or(0)
}

/// Corpus BLEU with uniform weights over orders 1..=`max_order`.
///
/// Clipped counts and lengths are summed over the corpus before the
/// precisions are formed. Clipping uses the maximum count of an n-gram over
/// an item's references. A zero precision (or an order with no candidate
/// n-grams) is floored at 1e-9.
pub fn corpus_bleu(candidates: &[Vec<String>], references: &[Vec<Vec<String>>], max_order: usize) -> f64 {
    let max_order = max_order.max(1);
    let mut matched = vec![0usize; max_order];
    let mut total = vec![0usize; max_order];
    let mut cand_len = 0usize;
    let mut ref_len = 0usize;
    for (c, refs) in candidates.iter().zip(references) {
        cand_len += c.len();
        ref_len += closest_ref_len(c.len(), refs);
        for n in 1..=max_order {
            let mut max_ref: HashMap<&[String], usize> = HashMap::new();
            for r in refs {
                for (g, k) in counts(r, n) {
                    let e = max_ref.entry(g).or_default();
                    *e = (*e).max(k);
                }
            }
            for (g, k) in counts(c, n) {
                matched[n - 1] += k.min(max_ref.get(g).copied().unwrap_or(0));
                total[n - 1] += k;
            }
        }
    }
    if cand_len == 0 {
        return 0.0;
    }
    let log_p: f64 = matched
        .iter()
        .zip(&total)
        .map(|(&m, &t)| {
            let p = if t == 0 { 0.0 } else { m as f64 / t as f64 };
            p.max(PRECISION_FLOOR).ln()
        })
        .sum::<f64>()
        / max_order as f64;
    let bp = if cand_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    (bp * log_p.exp()).clamp(0.0, 1.0)
}
