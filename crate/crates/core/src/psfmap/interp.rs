use crate::error::{Error, Result};

/// Tolerance for treating a query as an exact sample match (degrees).
const EXACT_MATCH_DEG: f64 = 1e-12;

/// Normalized inverse-square interpolation weights over the bracketing pair
/// of field samples.
///
/// Returns (sample index, weight) pairs; a query that lands on a sample gets
/// weight 1 on that sample alone. Weights are proportional to
/// 1/(theta_query - theta_i)^2 and sum to 1.
pub fn interp_weights(theta_query: f64, theta_samples: &[f64]) -> Result<Vec<(usize, f64)>> {
    if theta_samples.is_empty() {
        return Err(Error::InvalidInput("no field samples".into()));
    }
    let first = theta_samples[0];
    let last = *theta_samples.last().expect("non-empty");
    if theta_query < first - EXACT_MATCH_DEG || theta_query > last + EXACT_MATCH_DEG {
        return Err(Error::OutOfRange(format!(
            "field angle {theta_query} deg outside sample range [{first}, {last}]"
        )));
    }
    if let Some(i) = theta_samples
        .iter()
        .position(|&t| (t - theta_query).abs() <= EXACT_MATCH_DEG)
    {
        return Ok(vec![(i, 1.0)]);
    }
    let hi = theta_samples.partition_point(|&t| t < theta_query);
    let lo = hi - 1;
    let w_lo = 1.0 / (theta_query - theta_samples[lo]).powi(2);
    let w_hi = 1.0 / (theta_samples[hi] - theta_query).powi(2);
    let total = w_lo + w_hi;
    Ok(vec![(lo, w_lo / total), (hi, w_hi / total)])
}
