//! Area under the ROC curve as the Mann-Whitney statistic.

use super::LearnError;

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
///
/// Computed in `O(n log n)` from tie groups; the numerator is accumulated as
/// an integer (twice the win count plus ties), so the result is the exact
/// same `f64` a pairwise count would produce.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, LearnError> {
    if scores.len() != labels.len() {
        return Err(LearnError::LengthMismatch {
            rows: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(LearnError::NonFinite);
    }
    let positives = labels.iter().filter(|&&l| l).count() as u128;
    let negatives = labels.len() as u128 - positives;
    if positives == 0 || negatives == 0 {
        return Err(LearnError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut doubled_wins: u128 = 0;
    let mut negatives_below: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let value = scores[order[start]];
        let mut end = start;
        let (mut group_pos, mut group_neg) = (0u128, 0u128);
        while end < order.len() && scores[order[end]] == value {
            if labels[order[end]] {
                group_pos += 1;
            } else {
                group_neg += 1;
            }
            end += 1;
        }
        doubled_wins += group_pos * (2 * negatives_below + group_neg);
        negatives_below += group_neg;
        start = end;
    }
    Ok(doubled_wins as f64 / (2 * positives * negatives) as f64)
}
