use crate::instance::{IterateState, Loss, Problem};
use crate::record::Counters;
use crate::solver::TRIM_TOL;

/// Detection and false-positive rates of a predicted outlier set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionScore {
    /// `|predicted & truth| / |truth|`; absent when the truth set is empty.
    pub detection: Option<f64>,
    /// `|predicted \ truth| / |predicted|`; absent when nothing is flagged.
    pub false_positive: Option<f64>,
    pub flagged: usize,
}

impl DetectionScore {
    pub fn from_flags(flagged: &[bool], truth: &[bool]) -> DetectionScore {
        assert_eq!(flagged.len(), truth.len(), "mask lengths differ");
        let (mut hit, mut pred, mut real) = (0usize, 0usize, 0usize);
        for (&f, &t) in flagged.iter().zip(truth) {
            pred += f as usize;
            real += t as usize;
            hit += (f && t) as usize;
        }
        DetectionScore {
            detection: (real > 0).then(|| hit as f64 / real as f64),
            false_positive: (pred > 0).then(|| (pred - hit) as f64 / pred as f64),
            flagged: pred,
        }
    }
}

/// Flags `{i : w_i <= 1e-8}` and scores against `truth`.
pub fn score_detection(w: &[f64], truth: &[bool]) -> DetectionScore {
    let flags: Vec<bool> = w.iter().map(|&v| v <= TRIM_TOL).collect();
    DetectionScore::from_flags(&flags, truth)
}

/// Flags the `n_minus_h` largest losses at `state.x` (ties go to the lower
/// index) and scores against `truth`.
pub fn score_loss_ranking<L: Loss>(
    problem: &Problem<L>,
    state: &IterateState,
    truth: &[bool],
    n_minus_h: usize,
) -> DetectionScore {
    let losses = problem.losses(&state.x, &mut Counters::default());
    DetectionScore::from_flags(&top_flags(&losses, n_minus_h), truth)
}

pub(crate) fn top_flags(values: &[f64], count: usize) -> Vec<bool> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut flags = vec![false; values.len()];
    for &i in order.iter().take(count) {
        flags[i] = true;
    }
    flags
}
