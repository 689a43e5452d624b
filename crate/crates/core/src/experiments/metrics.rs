//! Non-interpolated average precision and its class mean.

use crate::error::{Error, Result};

/// Ranks by descending score (ties to the lower index) and averages
/// precision@k over the ranks `k` of relevant items.
pub fn average_precision(scores: &[f64], relevance: &[bool]) -> Result<f64> {
    if scores.len() != relevance.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} relevance flags",
            scores.len(),
            relevance.len()
        )));
    }
    let relevant = relevance.iter().filter(|&&r| r).count();
    if relevant == 0 {
        return Err(Error::UndefinedAp);
    }
    let key = |s: f64| if s.is_nan() { f64::NEG_INFINITY } else { s };
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| key(scores[b]).total_cmp(&key(scores[a])).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if relevance[i] {
            hits += 1;
            total += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(total / relevant as f64)
}

/// Mean over classes of the AP of each class's score vector, relevance being
/// label equality. Classes without test positives are skipped with a warning.
pub fn mean_average_precision(class_scores: &[Vec<f64>], test_labels: &[usize]) -> Result<f64> {
    let mut sum = 0.0;
    let mut defined = 0usize;
    for (class, scores) in class_scores.iter().enumerate() {
        if scores.len() != test_labels.len() {
            return Err(Error::Dimension(format!(
                "class {class} scores {} items, test set has {}",
                scores.len(),
                test_labels.len()
            )));
        }
        let relevance: Vec<bool> = test_labels.iter().map(|&l| l == class).collect();
        match average_precision(scores, &relevance) {
            Ok(ap) => {
                sum += ap;
                defined += 1;
            }
            Err(Error::UndefinedAp) => log::warn!("class {class} has no test positives; skipped in MAP"),
            Err(e) => return Err(e),
        }
    }
    if defined == 0 {
        return Err(Error::Evaluation("no class has a test positive; MAP undefined".into()));
    }
    Ok(sum / defined as f64)
}
