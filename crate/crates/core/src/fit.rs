use crate::error::{Error, Result};

/// Minimum number of samples for a rate fit.
pub const MIN_RATE_SAMPLES: usize = 10;

/// Least-squares slope of `ln(norm)` against `t`.
pub fn log_linear_slope(times: &[f64], norms: &[f64]) -> Result<f64> {
    if times.len() < MIN_RATE_SAMPLES || times.len() != norms.len() {
        return Err(Error::InsufficientSamples {
            found: times.len().min(norms.len()),
            required: MIN_RATE_SAMPLES,
        });
    }
    if let Some((&t, &norm)) = times.iter().zip(norms).find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::NonPositiveNorm { t, norm });
    }
    let n = times.len() as f64;
    let tm = times.iter().sum::<f64>() / n;
    let ym = norms.iter().map(|v| v.ln()).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (t, v) in times.iter().zip(norms) {
        let dt = t - tm;
        sxy += dt * (v.ln() - ym);
        sxx += dt * dt;
    }
    Ok(sxy / sxx)
}
