use rand::Rng;

/// Inverse CDF of Laplace(mu, b) at `u` in (0, 1).
pub fn laplace_inverse_cdf(u: f64, mu: f64, b: f64) -> f64 {
    let centred = u - 0.5;
    mu - b * centred.signum() * (1.0 - 2.0 * centred.abs()).ln()
}

/// One draw from Laplace(mu, b) by inverse-CDF sampling.
pub fn laplace_sample<R: Rng + ?Sized>(rng: &mut R, mu: f64, b: f64) -> f64 {
    assert!(b > 0.0, "Laplace scale must be positive");
    // Open interval: u = 0 would give -inf.
    let u = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    laplace_inverse_cdf(u, mu, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_form_points() {
        assert_eq!(laplace_inverse_cdf(0.5, 0.0, 0.5), 0.0);
        assert_eq!(laplace_inverse_cdf(0.5, 1.25, 0.5), 1.25);
        assert!((laplace_inverse_cdf(0.75, 0.0, 0.5) - 0.34657).abs() < 1e-5);
        assert!((laplace_inverse_cdf(0.25, 0.0, 0.5) + 0.34657).abs() < 1e-5);
    }

    #[test]
    fn monte_carlo_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let (mut sum, mut abs) = (0.0, 0.0);
        for _ in 0..n {
            let x = laplace_sample(&mut rng, 0.0, 0.5);
            sum += x;
            abs += x.abs();
        }
        assert!((sum / n as f64).abs() < 0.003);
        // E|X - mu| = b
        assert!((abs / n as f64 - 0.5).abs() < 0.003);
    }
}
