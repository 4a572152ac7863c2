//! Small shared numerics helpers.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One standard normal draw (Box-Muller, cosine branch).
pub(crate) fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Least-squares slope of log(error) against log(h): the observed
/// convergence order of a refinement study.
pub fn fit_rate(step_sizes: &[f64], errors: &[f64]) -> f64 {
    assert_eq!(step_sizes.len(), errors.len());
    let n = step_sizes.len() as f64;
    let xs: Vec<f64> = step_sizes.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.max(1e-300).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_of_a_clean_power_law() {
        let hs = [0.1f64, 0.05, 0.025, 0.0125];
        let errs: Vec<f64> = hs.iter().map(|h| 3.0 * h.powf(0.5)).collect();
        let r = fit_rate(&hs, &errs);
        assert!((r - 0.5).abs() < 1e-12);
    }
}
