use rand::Rng;

use crate::error::{Error, Result};

/// Largest domain the CDF table is built for.
pub const MAX_DOMAIN: u64 = 10_000_000;

/// Zipfian sampler over `1..=n` with `P(k) ∝ k^-theta`, backed by a
/// precomputed CDF and binary search.
#[derive(Debug, Clone)]
pub struct Zipf {
    theta: f64,
    cdf: Vec<f64>,
}

impl Zipf {
    pub fn new(n: u64, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::config(format!("zipf theta {theta} outside [0, 1]")));
        }
        if n == 0 || n > MAX_DOMAIN {
            return Err(Error::config(format!(
                "zipf domain {n} outside 1..={MAX_DOMAIN}"
            )));
        }
        let mut cdf = Vec::with_capacity(n as usize);
        let mut acc = 0.0;
        for k in 1..=n {
            acc += (k as f64).powf(-theta);
            cdf.push(acc);
        }
        let total = acc;
        for c in &mut cdf {
            *c /= total;
        }
        Ok(Zipf { theta, cdf })
    }

    pub fn n(&self) -> u64 {
        self.cdf.len() as u64
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Draws an index in `[1, n]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.gen();
        let i = self.cdf.partition_point(|&c| c <= u);
        (i.min(self.cdf.len() - 1) + 1) as u64
    }
}

/// One-shot draw; builds the table each call, so prefer [`Zipf`] in loops.
pub fn zipf_sample<R: Rng + ?Sized>(n: u64, theta: f64, rng: &mut R) -> Result<u64> {
    Ok(Zipf::new(n, theta)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn freqs(n: u64, theta: f64, draws: usize, seed: u64) -> Vec<f64> {
        let z = Zipf::new(n, theta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = vec![0usize; n as usize];
        for _ in 0..draws {
            counts[(z.sample(&mut rng) - 1) as usize] += 1;
        }
        counts.iter().map(|&c| c as f64 / draws as f64).collect()
    }

    #[test]
    fn theta_zero_is_uniform() {
        for f in freqs(10, 0.0, 1_000_000, 1) {
            assert!((f - 0.1).abs() < 0.005, "{f}");
        }
    }

    #[test]
    fn theta_one_over_three() {
        let f = freqs(3, 1.0, 1_000_000, 2);
        // 1 + 1/2 + 1/3 = 11/6
        let expect = [6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0];
        for (a, b) in f.iter().zip(expect) {
            assert!((a - b).abs() < 0.005, "{a} vs {b}");
        }
    }

    #[test]
    fn single_element_domain() {
        let z = Zipf::new(1, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..1000).all(|_| z.sample(&mut rng) == 1));
    }

    #[test]
    fn theta_out_of_range() {
        assert!(Zipf::new(10, 1.5).is_err());
        assert!(Zipf::new(10, -0.1).is_err());
        assert!(Zipf::new(0, 0.5).is_err());
    }
}
