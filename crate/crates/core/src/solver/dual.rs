use super::DualState;

/// Constraint levels the multipliers enforce.
#[derive(Debug, Clone, Copy)]
pub struct DualTargets<'a> {
    pub rate_min: &'a [f64],
    /// `None` leaves `lambda2` untouched (antenna selection has no ceiling).
    pub rate_max: Option<&'a [f64]>,
    pub power_budget: f64,
}

/// Projected dual ascent: each multiplier grows while its constraint is
/// violated and shrinks toward zero while it holds.
///
/// `lambda1_j += alpha (Rmin_j - SE_j)`, `lambda2_j += alpha (SE_j - Rmax_j)`,
/// `mu += alpha (power - budget)`, each clipped at zero.
pub fn dual_update(duals: &DualState, se: &[f64], power: f64, targets: DualTargets<'_>, alpha: f64) -> DualState {
    let lambda1 = duals
        .lambda1
        .iter()
        .zip(se.iter().zip(targets.rate_min))
        .map(|(l, (s, lo))| (l + alpha * (lo - s)).max(0.0))
        .collect();
    let lambda2 = match targets.rate_max {
        Some(hi) => duals
            .lambda2
            .iter()
            .zip(se.iter().zip(hi))
            .map(|(l, (s, hi))| (l + alpha * (s - hi)).max(0.0))
            .collect(),
        None => duals.lambda2.clone(),
    };
    DualState {
        lambda1,
        lambda2,
        mu: (duals.mu + alpha * (power - targets.power_budget)).max(0.0),
    }
}
