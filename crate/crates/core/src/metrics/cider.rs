use std::collections::{BTreeMap, HashMap, HashSet};

use super::{ngrams, order_free_mean};

// ordered so that float sums do not depend on hash seeds
type Vector<'a> = BTreeMap<&'a [String], f64>;

fn tf(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    for g in ngrams(tokens, n) {
        *m.entry(g).or_default() += 1;
    }
    m
}

fn tfidf<'a>(tokens: &'a [String], n: usize, df: &HashMap<&[String], usize>, n_items: f64) -> Vector<'a> {
    tf(tokens, n)
        .into_iter()
        .map(|(g, k)| {
            let d = df.get(g).copied().unwrap_or(0).max(1) as f64;
            (g, k as f64 * (n_items / d).ln())
        })
        .collect()
}

/// Cosine similarity; 0 when either vector is zero.
fn cosine(a: &Vector<'_>, b: &Vector<'_>) -> f64 {
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().filter_map(|(g, x)| b.get(g).map(|y| x * y)).sum();
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// CIDEr: TF-IDF n-gram vectors for n = 1..=`max_order`, with document
/// frequencies counted over the items' reference sets. Per item, the cosine
/// to each reference is averaged over references and over n, then scaled
/// by 10. The corpus score is the mean over items.
pub fn corpus_cider(candidates: &[Vec<String>], references: &[Vec<Vec<String>>], max_order: usize) -> f64 {
    let max_order = max_order.max(1);
    let n_items = references.len() as f64;
    let mut item_scores = vec![0.0; candidates.len()];
    for n in 1..=max_order {
        let mut df: HashMap<&[String], usize> = HashMap::new();
        for refs in references {
            let grams: HashSet<&[String]> = refs.iter().flat_map(|r| ngrams(r, n)).collect();
            for g in grams {
                *df.entry(g).or_default() += 1;
            }
        }
        for (i, (c, refs)) in candidates.iter().zip(references).enumerate() {
            let cv = tfidf(c, n, &df, n_items);
            let sims: f64 = refs.iter().map(|r| cosine(&cv, &tfidf(r, n, &df, n_items))).sum();
            item_scores[i] += sims / refs.len() as f64;
        }
    }
    let per_item = item_scores.into_iter().map(|s| 10.0 * s / max_order as f64).collect();
    order_free_mean(per_item)
}
