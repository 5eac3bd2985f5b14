//! Binomial read-count likelihood given a genotype and a per-locus error rate.

use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

use crate::error::{ensure, Result};
use crate::genotype::GenotypeCode;
use crate::math::xlogy;

const CACHED_DEPTH: usize = 1024;

/// Reads covering one locus in one individual.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct ReadObservation {
    pub depth: u32,
    pub variants: u32,
}

impl ReadObservation {
    pub const MISSING: Self = Self { depth: 0, variants: 0 };

    pub fn new(depth: u32, variants: u32) -> Result<Self> {
        ensure!(variants <= depth, "variant count {variants} exceeds read depth {depth}");
        Ok(Self { depth, variants })
    }
}

/// Per-locus probability that a read shows the wrong allele.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRates(Vec<f64>);

impl ErrorRates {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        for &a in &rates {
            validate_alpha(a)?;
        }
        Ok(Self(rates))
    }

    pub fn uniform(num_loci: usize, alpha: f64) -> Result<Self> {
        Self::new(vec![alpha; num_loci])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub(crate) fn validate_alpha(alpha: f64) -> Result<()> {
    ensure!((0.0..0.5).contains(&alpha), "read error rate {alpha} outside [0, 0.5)");
    Ok(())
}

fn ln_factorial(n: u32) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| (0..=CACHED_DEPTH).map(|k| ln_gamma(k as f64 + 1.0)).collect());
    match table.get(n as usize) {
        Some(&v) => v,
        None => ln_gamma(n as f64 + 1.0),
    }
}

/// `ln C(n, k)`, symmetric in `k ↔ n − k` bit for bit.
pub fn ln_binomial(n: u32, k: u32) -> f64 {
    debug_assert!(k <= n);
    let k = k.min(n - k);
    if k == 0 {
        return 0.0;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Log-likelihoods of one observation under genotypes 0, 1 and 2.
#[inline]
pub fn genotype_log_likelihoods(obs: ReadObservation, alpha: f64) -> [f64; 3] {
    let n = obs.depth;
    let y = obs.variants;
    if n == 0 {
        return [0.0; 3];
    }
    let lnc = ln_binomial(n, y);
    let correct = 1.0 - alpha;
    let (yf, rf) = (y as f64, (n - y) as f64);
    [
        lnc + (xlogy(yf, alpha) + xlogy(rf, correct)),
        lnc + n as f64 * 0.5f64.ln(),
        lnc + (xlogy(rf, alpha) + xlogy(yf, correct)),
    ]
}

/// `ln Pr(y | n, g; α)` for the binomial read model.
pub fn read_log_likelihood(obs: ReadObservation, g: GenotypeCode, alpha: f64) -> Result<f64> {
    ensure!(
        obs.variants <= obs.depth,
        "variant count {} exceeds read depth {}",
        obs.variants,
        obs.depth
    );
    ensure!(g <= 2, "genotype code {g} not in 0..=2");
    validate_alpha(alpha)?;
    Ok(genotype_log_likelihoods(obs, alpha)[g as usize])
}

/// Sum of per-locus log-likelihoods for one individual.
pub fn individual_multilocus_log_likelihood(
    obs: &[ReadObservation],
    genotypes: &[GenotypeCode],
    alpha: &ErrorRates,
) -> Result<f64> {
    ensure!(
        obs.len() == genotypes.len() && obs.len() == alpha.len(),
        "length mismatch: {} observations, {} genotypes, {} error rates",
        obs.len(),
        genotypes.len(),
        alpha.len()
    );
    obs.iter()
        .zip(genotypes)
        .zip(alpha.as_slice())
        .map(|((&o, &g), &a)| read_log_likelihood(o, g, a))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(n: u32, y: u32) -> ReadObservation {
        ReadObservation::new(n, y).unwrap()
    }

    #[test]
    fn homozygote_all_variant() {
        let ll = read_log_likelihood(obs(3, 3), 2, 0.1).unwrap();
        assert!((ll.exp() - 0.729).abs() < 1e-14);
        assert!((ll - (-0.31608)).abs() < 1e-5);
    }

    #[test]
    fn heterozygote_is_fair_binomial() {
        for alpha in [0.0, 0.01, 0.3] {
            let ll = read_log_likelihood(obs(4, 2), 1, alpha).unwrap();
            assert!((ll.exp() - 0.375).abs() < 1e-14);
        }
    }

    #[test]
    fn error_free_homozygote() {
        assert_eq!(read_log_likelihood(obs(5, 0), 0, 0.0).unwrap(), 0.0);
        assert_eq!(read_log_likelihood(obs(5, 1), 0, 0.0).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn zero_depth_is_uninformative() {
        for g in 0..3 {
            assert_eq!(read_log_likelihood(ReadObservation::MISSING, g, 0.2).unwrap(), 0.0);
        }
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(ReadObservation::new(10, 11).is_err());
        let bad = ReadObservation {
            depth: 10,
            variants: 11,
        };
        assert!(read_log_likelihood(bad, 0, 0.1).is_err());
        assert!(read_log_likelihood(obs(3, 1), 3, 0.1).is_err());
        assert!(read_log_likelihood(obs(3, 1), 0, 0.5).is_err());
        assert!(read_log_likelihood(obs(3, 1), 0, -0.1).is_err());
        assert!(ErrorRates::new(vec![0.1, 0.7]).is_err());
    }

    #[test]
    fn multilocus_sums_loci() {
        let alpha = ErrorRates::new(vec![0.05, 0.1]).unwrap();
        let o = [obs(0, 0), obs(0, 0)];
        assert_eq!(individual_multilocus_log_likelihood(&o, &[0, 2], &alpha).unwrap(), 0.0);

        let o = [obs(10, 2), obs(7, 6)];
        let joint = individual_multilocus_log_likelihood(&o, &[1, 2], &alpha).unwrap();
        let separate = read_log_likelihood(o[0], 1, 0.05).unwrap() + read_log_likelihood(o[1], 2, 0.1).unwrap();
        assert!((joint - separate).abs() < 1e-14);

        let single = ErrorRates::new(vec![0.05]).unwrap();
        assert_eq!(
            individual_multilocus_log_likelihood(&o[..1], &[1], &single).unwrap(),
            read_log_likelihood(o[0], 1, 0.05).unwrap()
        );
        assert!(individual_multilocus_log_likelihood(&o, &[1], &alpha).is_err());
    }

    #[test]
    fn masses_sum_to_one() {
        for n in 0..=12 {
            for alpha in [0.005, 0.05, 0.1] {
                for g in 0..3 {
                    let total: f64 = (0..=n)
                        .map(|y| read_log_likelihood(obs(n, y), g, alpha).unwrap().exp())
                        .sum();
                    assert!((total - 1.0).abs() < 1e-10, "n={n} g={g} alpha={alpha}");
                }
            }
        }
    }

    #[test]
    fn homozygote_symmetry_is_exact() {
        for n in 0..=40 {
            for y in 0..=n {
                for alpha in [0.001, 0.05, 0.123, 0.49] {
                    let a = read_log_likelihood(obs(n, y), 0, alpha).unwrap();
                    let b = read_log_likelihood(obs(n, n - y), 2, alpha).unwrap();
                    assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }

    #[test]
    fn heterozygote_is_bitwise_alpha_free() {
        for n in 0..=30 {
            for y in 0..=n {
                let base = read_log_likelihood(obs(n, y), 1, 0.005).unwrap();
                for alpha in [0.0, 0.05, 0.1, 0.4] {
                    assert_eq!(
                        base.to_bits(),
                        read_log_likelihood(obs(n, y), 1, alpha).unwrap().to_bits()
                    );
                }
            }
        }
    }

    #[test]
    fn homozygote_ref_likelihood_decreases_past_expected_errors() {
        for n in 1..=30u32 {
            for alpha in [0.005, 0.05, 0.1, 0.3] {
                let start = (n as f64 * alpha).ceil() as u32;
                for y in start.max(1)..n {
                    let here = read_log_likelihood(obs(n, y), 0, alpha).unwrap();
                    let next = read_log_likelihood(obs(n, y + 1), 0, alpha).unwrap();
                    assert!(next <= here, "n={n} y={y} alpha={alpha}");
                }
            }
        }
    }

    #[test]
    fn large_depths_fall_back_to_log_gamma() {
        let ll = read_log_likelihood(obs(2000, 1000), 1, 0.01).unwrap();
        assert!(ll.is_finite() && ll < 0.0);
        assert!((ln_binomial(2000, 3) - (2000.0f64 * 1999.0 * 1998.0 / 6.0).ln()).abs() < 1e-9);
    }
}
