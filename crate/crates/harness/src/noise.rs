//! Multiplicative Gaussian forecast error on prices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Clone, Debug, PartialEq)]
pub struct Forecast {
    pub prices: Vec<f64>,
    /// Mean absolute percentage error against the true series, in percent.
    pub mape: f64,
}

/// π̃(t) = (1 + σY)π(t) with Y standard normal. Slots with π = 0 are left
/// out of the MAPE.
pub fn apply_price_noise(prices: &[f64], sigma: f64, seed: u64) -> Forecast {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy: Vec<f64> = prices
        .iter()
        .map(|&p| {
            let y: f64 = StandardNormal.sample(&mut rng);
            (1.0 + sigma * y) * p
        })
        .collect();
    Forecast {
        mape: mape(prices, &noisy),
        prices: noisy,
    }
}

pub fn mape(truth: &[f64], forecast: &[f64]) -> f64 {
    let (sum, n) = truth
        .iter()
        .zip(forecast)
        .filter(|(t, _)| **t != 0.0)
        .fold((0.0, 0usize), |(s, n), (t, f)| (s + ((f - t) / t).abs(), n + 1));
    if n == 0 {
        0.0
    } else {
        100.0 * sum / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_is_identity() {
        let p = vec![0.1, -0.2, 0.0, 0.05];
        let f = apply_price_noise(&p, 0.0, 4);
        assert_eq!(f.prices, p);
        assert_eq!(f.mape, 0.0);
    }

    #[test]
    fn mape_matches_half_normal_mean() {
        // E|Y| = sqrt(2/π), so σ = 0.05 gives about 3.99 %.
        let p = vec![0.05; 200_000];
        let f = apply_price_noise(&p, 0.05, 11);
        let expected = 5.0 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((f.mape - expected).abs() < 0.05, "{}", f.mape);
    }

    #[test]
    fn seeded() {
        let p = vec![0.05; 32];
        assert_eq!(apply_price_noise(&p, 0.05, 1), apply_price_noise(&p, 0.05, 1));
        assert_ne!(apply_price_noise(&p, 0.05, 1), apply_price_noise(&p, 0.05, 2));
    }
}
