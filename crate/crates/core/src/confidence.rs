//! Beta-posterior confidence intervals for compatibility scores.
//!
//! Starting from a uniform `Beta(1, 1)` prior, `S` successes out of `N`
//! candidate updates give a `Beta(1 + S, 1 + N - S)` posterior. The interval
//! is the score plus/minus `z` posterior standard deviations, clamped to
//! `[0, 1]`.

use serde::Serialize;
use thiserror::Error;

/// Critical value for a 90% confidence level, as a fixed two-decimal constant.
pub const Z_90: f64 = 1.65;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfidenceError {
    #[error("successful updates ({successes}) exceed candidate updates ({candidates})")]
    SuccessesExceedCandidates { candidates: u64, successes: u64 },
    #[error("no candidate updates: the score is undefined")]
    NoCandidates,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PosteriorParams {
    pub a: f64,
    pub b: f64,
}

pub fn posterior_params(candidates: u64, successes: u64) -> Result<PosteriorParams, ConfidenceError> {
    if successes > candidates {
        return Err(ConfidenceError::SuccessesExceedCandidates {
            candidates,
            successes,
        });
    }
    Ok(PosteriorParams {
        a: 1.0 + successes as f64,
        b: 1.0 + (candidates - successes) as f64,
    })
}

/// Standard deviation of the posterior beta distribution.
pub fn score_sigma(p: PosteriorParams) -> f64 {
    let sum = p.a + p.b;
    (p.a * p.b / (sum * sum * (sum + 1.0))).sqrt()
}

/// Interval half-width before clamping, at the 90% level.
pub fn ci_precision(p: PosteriorParams) -> f64 {
    ci_precision_with_z(p, Z_90)
}

pub fn ci_precision_with_z(p: PosteriorParams, z: f64) -> f64 {
    z * score_sigma(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    /// Unclamped half-width.
    pub precision: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Clamp `score ± precision` to the unit interval.
///
/// `candidates` must be the N that produced both `score` and `p`; N = 0 has
/// no score and therefore no interval.
pub fn confidence_interval(
    score: f64,
    candidates: u64,
    p: PosteriorParams,
    z: f64,
) -> Result<Interval, ConfidenceError> {
    if candidates == 0 {
        return Err(ConfidenceError::NoCandidates);
    }
    let precision = ci_precision_with_z(p, z);
    Ok(Interval {
        lo: (score - precision).max(0.0),
        hi: (score + precision).min(1.0),
        precision,
    })
}

/// 90% interval straight from counts.
pub fn interval_for_counts(candidates: u64, successes: u64) -> Result<Interval, ConfidenceError> {
    let p = posterior_params(candidates, successes)?;
    if candidates == 0 {
        return Err(ConfidenceError::NoCandidates);
    }
    confidence_interval(successes as f64 / candidates as f64, candidates, p, Z_90)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn posterior_examples() {
        assert_eq!(posterior_params(0, 0).unwrap(), PosteriorParams { a: 1.0, b: 1.0 });
        assert_eq!(posterior_params(5, 5).unwrap(), PosteriorParams { a: 6.0, b: 1.0 });
        assert_eq!(posterior_params(100, 99).unwrap(), PosteriorParams { a: 100.0, b: 2.0 });
        assert!(matches!(
            posterior_params(3, 4),
            Err(ConfidenceError::SuccessesExceedCandidates { .. })
        ));
    }

    #[test]
    fn sigma_and_precision_examples() {
        let p = |a, b| PosteriorParams { a, b };
        assert!(close(score_sigma(p(1.0, 1.0)), (1.0f64 / 12.0).sqrt(), 1e-15));
        assert!(close(score_sigma(p(6.0, 1.0)), 0.123718, 1e-6));
        assert!(close(score_sigma(p(100.0, 2.0)), 0.013661, 1e-6));
        assert!(close(ci_precision(p(6.0, 1.0)), 0.204135, 1e-6));
        assert!(close(ci_precision(p(100.0, 2.0)), 0.022541, 1e-6));
        assert!(close(ci_precision(p(1.0, 1.0)), 0.476314, 1e-6));
    }

    #[test]
    fn interval_examples() {
        let i = interval_for_counts(5, 5).unwrap();
        assert!(close(i.lo, 0.79587, 1e-5) && i.hi == 1.0);
        let i = interval_for_counts(100, 99).unwrap();
        assert!(close(i.lo, 0.96746, 1e-5) && i.hi == 1.0);
        let i = interval_for_counts(1, 0).unwrap();
        assert_eq!(i.lo, 0.0);
        assert!(close(i.hi, 0.38891, 1e-5));
        assert_eq!(interval_for_counts(0, 0), Err(ConfidenceError::NoCandidates));
    }

    #[test]
    fn precision_stays_unclamped() {
        let i = interval_for_counts(5, 5).unwrap();
        assert!(close(i.precision, 0.204135, 1e-6));
        assert!(i.hi - 1.0 < i.precision);
    }

    #[test]
    fn precision_shrinks_along_ladders() {
        for ratio in [(1, 1), (4, 5), (1, 2), (1, 5)] {
            let mut last = f64::INFINITY;
            for n in [5u64, 10, 50, 100, 500] {
                let s = n * ratio.0 / ratio.1;
                let prec = ci_precision(posterior_params(n, s).unwrap());
                assert!(prec < last, "n={n} ratio={ratio:?}");
                last = prec;
            }
        }
    }

    proptest! {
        #[test]
        fn bounds_are_clamped_and_contain_score(n in 1u64..5000, frac in 0.0f64..=1.0) {
            let s = ((n as f64) * frac).floor() as u64;
            let i = interval_for_counts(n, s).unwrap();
            let score = s as f64 / n as f64;
            prop_assert!(0.0 <= i.lo && i.lo <= i.hi && i.hi <= 1.0);
            prop_assert!(i.contains(score));
        }
    }
}
