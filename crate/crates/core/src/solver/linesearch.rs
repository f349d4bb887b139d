use crate::{CMatrix, Complex64};

/// Outcome of one backtracking gradient-ascent step.
#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub w: CMatrix,
    pub eta: f64,
    /// False when no trial step kept the objective from decreasing; `w` is
    /// then the starting point and `eta` is `eta_min`.
    pub accepted: bool,
}

/// Shrinks `eta` by `factor` from `eta_start` until
/// `evaluator(W + eta * gradient) >= evaluator(W)`.
pub fn backtrack_step<F>(
    w: &CMatrix,
    gradient: &CMatrix,
    eta_start: f64,
    mut evaluator: F,
    factor: f64,
    max_backtracks: usize,
    eta_min: f64,
) -> LineSearchOutcome
where
    F: FnMut(&CMatrix) -> f64,
{
    let base = evaluator(w);
    let mut eta = eta_start;
    for _ in 0..=max_backtracks {
        if eta < eta_min {
            break;
        }
        let candidate = w + gradient * Complex64::from(eta);
        if evaluator(&candidate) >= base {
            return LineSearchOutcome {
                w: candidate,
                eta,
                accepted: true,
            };
        }
        eta *= factor;
    }
    LineSearchOutcome {
        w: w.clone(),
        eta: eta_min,
        accepted: false,
    }
}
