use thiserror::Error;

use crate::dynamics::RunTrace;

/// Why no contraction factor could be read off a trace.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("empirical rate undefined: {0}")]
pub struct UndefinedRate(pub String);

const MIN_POINTS: usize = 10;

/// Per-iteration contraction factor `exp(slope)` of the least-squares line
/// through `ln(terminal - L_k)` over the final third of `log_likelihoods`.
///
/// Points whose gap to `terminal` is not positive are skipped. The rate is
/// undefined for fewer than 10 iterations, a decreasing tail, or fewer than
/// three usable points.
pub fn empirical_rate(log_likelihoods: &[f64], terminal: f64) -> Result<f64, UndefinedRate> {
    let n = log_likelihoods.len();
    if n < MIN_POINTS {
        return Err(UndefinedRate(format!(
            "{n} iterations, need at least {MIN_POINTS}"
        )));
    }
    let start = n - n / 3;
    let tail = &log_likelihoods[start..];
    for (i, w) in tail.windows(2).enumerate() {
        if w[1] < w[0] - 1e-10 * w[0].abs().max(1.0) {
            return Err(UndefinedRate(format!(
                "log-likelihood decreases at iteration {}",
                start + i + 1
            )));
        }
    }

    let points: Vec<(f64, f64)> = tail
        .iter()
        .enumerate()
        .filter_map(|(i, l)| {
            let gap = terminal - l;
            (gap > 0.0).then(|| ((start + i) as f64, gap.ln()))
        })
        .collect();
    if points.len() < 3 {
        return Err(UndefinedRate("no decaying gap in the final third".into()));
    }
    let count = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / count;
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    Ok((sxy / sxx).exp())
}

/// [`empirical_rate`] of a run, taking its final log-likelihood as the limit.
pub fn trace_empirical_rate(trace: &RunTrace) -> Result<f64, UndefinedRate> {
    empirical_rate(&trace.log_likelihoods(), trace.final_log_likelihood())
}
