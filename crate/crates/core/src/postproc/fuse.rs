use super::grouping::ClusterAssignment;
use crate::error::{Error, Result};

pub const FUSE_GROUP_SIZE: usize = 5;
/// Weight kept on each clip's own prediction.
pub const SELF_WEIGHT: f64 = 0.01;

/// `f_i = 0.01 p_i + 0.99 median(p)` over a subject's five predictions.
pub fn median_fuse(predictions: &[f64]) -> Result<Vec<f64>> {
    if predictions.len() != FUSE_GROUP_SIZE {
        return Err(Error::Parameter(format!(
            "median fusion takes {FUSE_GROUP_SIZE} predictions, got {}",
            predictions.len()
        )));
    }
    if predictions.iter().any(|p| !p.is_finite()) {
        return Err(Error::Parameter("predictions must be finite".into()));
    }
    let mut sorted = predictions.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[FUSE_GROUP_SIZE / 2];
    Ok(predictions
        .iter()
        .map(|p| SELF_WEIGHT * p + (1.0 - SELF_WEIGHT) * median)
        .collect())
}

/// Fuses every complete group in place. Unassigned clips keep their values.
pub fn fuse_groups(predictions: &mut [f64], assignment: &ClusterAssignment) -> Result<()> {
    if predictions.len() != assignment.labels.len() {
        return Err(Error::Parameter(format!(
            "{} predictions for {} clips",
            predictions.len(),
            assignment.labels.len()
        )));
    }
    for group in &assignment.complete_groups {
        let values: Vec<f64> = group.iter().map(|&i| predictions[i]).collect();
        for (&i, f) in group.iter().zip(median_fuse(&values)?) {
            predictions[i] = f;
        }
    }
    Ok(())
}
