//! Per-test reliability indicator `r_rel(t)`: does a score trajectory follow the expected
//! behavior along the modulation path?

use crate::error::{invalid, Result};
use crate::model::{Expectation, MeasureDescriptor, Orientation, Score, ScoreKind};

/// Relative tolerance of the constant rule.
pub const CONSTANT_EPSILON: f64 = 0.05;

/// How values equal to the median are treated by the constant rule for real scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MedianRule {
    /// Exclude exactly one median instance; other values equal to the median count as close.
    #[default]
    ExcludeOne,
    /// Exclude every value equal to the median (the formula read literally).
    ExcludeAll,
}

fn check_len(k: usize) -> Result<()> {
    if k < 2 {
        return Err(invalid(format!("reliability needs at least 2 scores, got {k}")));
    }
    Ok(())
}

fn ordered_pair_fraction(s: &[f64], better: impl Fn(f64, f64) -> bool) -> f64 {
    let k = s.len();
    let mut hits = 0usize;
    for i in 0..k {
        for j in i + 1..k {
            if better(s[i], s[j]) {
                hits += 1;
            }
        }
    }
    2.0 * hits as f64 / (k * (k - 1)) as f64
}

fn median(s: &[f64]) -> f64 {
    crate::kernels::stats::median(s)
}

fn constant_real(s: &[f64], rule: MedianRule) -> f64 {
    let k = s.len();
    let mu = median(s);
    let close = |v: f64| {
        let dev = (mu - v).abs();
        if mu == 0.0 {
            dev <= CONSTANT_EPSILON
        } else {
            (dev / mu).abs() <= CONSTANT_EPSILON
        }
    };
    let count = match rule {
        MedianRule::ExcludeAll => s.iter().filter(|&&v| v != mu && close(v)).count(),
        MedianRule::ExcludeOne => {
            let n = s.iter().filter(|&&v| close(v)).count();
            // An even-length median need not be one of the scores.
            if s.contains(&mu) {
                n - 1
            } else {
                n
            }
        }
    };
    (count as f64 / (k - 1) as f64).min(1.0)
}

/// `r_rel(t)` of a real trajectory already oriented so that higher is better.
pub fn reliability_real(s: &[f64], expectation: Expectation) -> Result<f64> {
    reliability_real_with(s, expectation, MedianRule::default())
}

pub fn reliability_real_with(s: &[f64], expectation: Expectation, rule: MedianRule) -> Result<f64> {
    check_len(s.len())?;
    if s.iter().any(|v| !v.is_finite()) {
        return Err(invalid("reliability of a non-finite score"));
    }
    match expectation {
        Expectation::Improve => Ok(ordered_pair_fraction(s, |a, b| a < b)),
        Expectation::Worsen => Ok(ordered_pair_fraction(s, |a, b| a > b)),
        Expectation::Constant => Ok(constant_real(s, rule)),
        Expectation::NotApplicable => Err(invalid("no reliability for a not-applicable test")),
    }
}

/// Point-system bounds `(r_min, r_max)` for `k` steps under the given weight vectors.
fn bounds(w_t: &[f64], w_f: &[f64], expectation: Expectation) -> (f64, f64) {
    let k = w_t.len();
    let half = k.div_ceil(2);
    let first = |w: &[f64]| w[..half].iter().sum::<f64>();
    let second = |w: &[f64]| w[half..].iter().sum::<f64>();
    match expectation {
        Expectation::Worsen => (
            first(w_f) + second(w_t),
            first(w_t) + second(w_f),
        ),
        _ => (
            first(w_t) + second(w_f),
            first(w_f) + second(w_t),
        ),
    }
}

/// `r_rel(t)` of a boolean trajectory where `true` is the better outcome.
pub fn reliability_boolean(s: &[bool], expectation: Expectation) -> Result<f64> {
    let k = s.len();
    check_len(k)?;
    let idx = |i: usize| i as f64;
    let rev = |i: usize| (k - i - 1) as f64;
    let (w_t, w_f): (Vec<f64>, Vec<f64>) = match expectation {
        Expectation::Improve => ((0..k).map(idx).collect(), (0..k).map(rev).collect()),
        Expectation::Worsen => ((0..k).map(rev).collect(), (0..k).map(idx).collect()),
        Expectation::Constant => {
            let equal = s.windows(2).filter(|w| w[0] == w[1]).count();
            return Ok(equal as f64 / (k - 1) as f64);
        }
        Expectation::NotApplicable => {
            return Err(invalid("no reliability for a not-applicable test"))
        }
    };
    let nominal: f64 = s
        .iter()
        .enumerate()
        .map(|(i, &b)| if b { w_t[i] } else { w_f[i] })
        .sum();
    let (r_min, r_max) = bounds(&w_t, &w_f, expectation);
    if r_max == r_min {
        return Err(invalid("degenerate boolean point system"));
    }
    Ok(((nominal - r_min) / (r_max - r_min)).clamp(0.0, 1.0))
}

/// `r_rel(t)` of a raw trajectory, applying the measure's declared orientation first.
pub fn trajectory_reliability(
    descriptor: &MeasureDescriptor,
    scores: &[Score],
    expectation: Expectation,
) -> Result<f64> {
    match descriptor.score_kind {
        ScoreKind::Boolean => {
            let raw: Vec<bool> = scores
                .iter()
                .map(|s| s.as_bool().ok_or_else(|| invalid("expected boolean scores")))
                .collect::<Result<_>>()?;
            let oriented: Vec<bool> = match descriptor.orientation {
                Orientation::LowerBetter => raw.iter().map(|b| !b).collect(),
                _ => raw,
            };
            reliability_boolean(&oriented, expectation)
        }
        ScoreKind::Real | ScoreKind::Pair => {
            let oriented: Vec<f64> = scores
                .iter()
                .map(|s| {
                    s.as_real()
                        .map(|v| descriptor.orientation.to_higher_better(v))
                        .ok_or_else(|| invalid("expected real scores"))
                })
                .collect::<Result<_>>()?;
            reliability_real(&oriented, expectation)
        }
    }
}
