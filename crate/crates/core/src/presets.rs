//! Published weighting approaches for the nine standard criteria.

use crate::ahp::{aggregate_criteria, CriteriaGroup, PriorityVector};
use crate::error::Result;
use crate::reclass::CriterionId;

/// Criterion order shared by every preset.
pub const ORDER: [CriterionId; 9] = CriterionId::ALL;

/// Factor weights of the three approaches, in [`ORDER`].
pub const APPROACHES: [[f64; 9]; 3] = [
    [0.250, 0.086, 0.019, 0.026, 0.052, 0.036, 0.272, 0.148, 0.111],
    [0.222, 0.093, 0.029, 0.030, 0.071, 0.049, 0.0, 0.351, 0.155],
    [0.158, 0.086, 0.021, 0.027, 0.058, 0.043, 0.0, 0.339, 0.268],
];

/// Weights of approach `k` (1-based).
pub fn approach(k: usize) -> Option<PriorityVector> {
    let w = APPROACHES.get(k.checked_sub(1)?)?;
    PriorityVector::from_published(w.to_vec()).ok()
}

/// Climate, terrain and location groups.
pub fn standard_groups() -> Vec<CriteriaGroup<CriterionId>> {
    use CriterionId::*;
    vec![
        CriteriaGroup {
            name: "climate".into(),
            members: vec![Ghi, T, H],
        },
        CriteriaGroup {
            name: "terrain".into(),
            members: vec![Dem, S, Az],
        },
        CriteriaGroup {
            name: "location".into(),
            members: vec![Gp, Rp, Sp],
        },
    ]
}

/// Group totals for weights given in [`ORDER`].
pub fn group_weights(w: &PriorityVector) -> Result<Vec<(String, f64)>> {
    aggregate_criteria(w, &ORDER, &standard_groups())
}
