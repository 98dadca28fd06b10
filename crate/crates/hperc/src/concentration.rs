//! Fidelity concentration: the analytic tail bound, its derivation
//! diagnostics, and empirical validation by Monte Carlo pair sampling.
//!
//! For two independent Haar states in dimension D the fidelity |<a|b>|^2 has
//! mean exactly 1/D and follows the Beta(1, D-1) law. The bound evaluated
//! here for the deviation probability P(| |<a|b>|^2 - 1/D | >= eps) is
//!
//!   4·exp[-(D/4)·(D·eps/(1 + D·eps))^2],
//!
//! with the eps = 1/D specialization P_L.B. = 1 - 4·exp(-D/16). Beware: the
//! exact Beta tail exceeds this expression for deviations of order 1/D (the
//! two-sided tail at eps = 1/D tends to e^(-2) ~= 0.1353 while the
//! expression gives 4·exp(-D/16)), so the bound is informative only in the
//! large-deviation regime; [`empirical_tail`] measures the truth either way.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::metric::fidelity;
use crate::scalar::{lit, Scalar};
use crate::states::{sample_state, stream_rng};

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim });
    }
    Ok(())
}

fn check_epsilon<S: Scalar>(epsilon: S) -> Result<()> {
    if !(epsilon > S::zero()) {
        return Err(Error::InvalidEpsilon {
            value: epsilon.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// Half the tail bound: 2·exp[-(D/4)·(D·eps/(1 + D·eps))^2]. Both the upper
/// and lower branches of the derivation reach exactly this value, so the
/// full bound is twice it by construction.
fn branch_bound<S: Scalar>(dim: usize, epsilon: S) -> S {
    let d = lit::<S>(dim as f64);
    let de = d * epsilon;
    let ratio = de / (S::one() + de);
    lit::<S>(2.0) * (-(d / lit::<S>(4.0)) * ratio * ratio).exp()
}

/// The tail bound 4·exp[-(D/4)·(D·eps/(1 + D·eps))^2].
pub fn analytic_bound<S: Scalar>(dim: usize, epsilon: S) -> Result<S> {
    check_dim(dim)?;
    check_epsilon(epsilon)?;
    Ok(lit::<S>(2.0) * branch_bound(dim, epsilon))
}

/// P_L.B. = 1 - 4·exp(-D/16): the eps = 1/D specialization of the bound,
/// a lower bound on P(|fidelity - 1/D| < 1/D).
pub fn lower_bound_plb<S: Scalar>(dim: usize) -> Result<S> {
    check_dim(dim)?;
    let d = lit::<S>(dim as f64);
    Ok(S::one() - lit::<S>(4.0) * (-d / lit::<S>(16.0)).exp())
}

/// Tail bound for the mean of n squared standard normals:
/// P(|(1/n)·Σ Z_k^2 - 1| >= t) <= 2·exp(-n·t^2/8), valid for t in (0, 1).
pub fn chi_square_tail<S: Scalar>(n: usize, t: S) -> Result<S> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if !(t > S::zero() && t < S::one()) {
        return Err(Error::InvalidArgument(format!(
            "t must lie in (0, 1), got {}",
            t.to_f64().unwrap_or(f64::NAN)
        )));
    }
    let nf = lit::<S>(n as f64);
    Ok(lit::<S>(2.0) * (-nf * t * t / lit::<S>(8.0)).exp())
}

/// Intermediate optima of the two derivation branches.
///
/// The upper branch bounds P(fidelity >= 1/D + eps) by minimizing over a
/// free parameter eta in its feasible range; X and Y are the two competing
/// exponents and their maxima decide the bound. Likewise for the lower
/// branch. Both branches relax to the same final exponent, so
/// `p_plus_bound + p_minus_bound` reproduces [`analytic_bound`] exactly.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundComponents<S> {
    pub p_plus_bound: S,
    pub p_minus_bound: S,
    /// max X_+ = (D·eps)^2 for D·eps < 1, saturating at 1 beyond.
    pub x_plus_max: S,
    /// max Y_+ = D·(D·eps)^2/(1 + D·eps)^2.
    pub y_plus_max: S,
    /// max X_- = (D·eps)^2.
    pub x_minus_max: S,
    /// max Y_- = D for D·eps > 1/2, D·(D·eps)^2/(1 - D·eps)^2 below.
    pub y_minus_max: S,
}

/// Evaluate the branch bounds and their intermediate optima.
pub fn bound_components<S: Scalar>(dim: usize, epsilon: S) -> Result<BoundComponents<S>> {
    check_dim(dim)?;
    check_epsilon(epsilon)?;
    let d = lit::<S>(dim as f64);
    let de = d * epsilon;
    let one = S::one();
    let branch = branch_bound(dim, epsilon);
    let x_plus_max = (de * de).min(one);
    let y_plus_max = d * (de / (one + de)) * (de / (one + de));
    let x_minus_max = de * de;
    let y_minus_max = if de > lit(0.5) {
        d
    } else {
        d * (de / (one - de)) * (de / (one - de))
    };
    Ok(BoundComponents {
        p_plus_bound: branch,
        p_minus_bound: branch,
        x_plus_max,
        y_plus_max,
        x_minus_max,
        y_minus_max,
    })
}

/// One empirical-versus-analytic comparison row.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConcentrationBoundReport<S> {
    pub dim: usize,
    pub epsilon: S,
    pub analytic_bound: S,
    pub lower_bound_plb: S,
    /// Fraction of sampled pairs with |fidelity - 1/D| >= eps.
    pub empirical_tail: S,
    pub n_samples: u64,
    /// Half-width of the 99% Clopper-Pearson interval for the tail.
    pub ci_halfwidth: S,
}

/// Minimum pair count accepted by [`empirical_tail`].
pub const MIN_PAIRS: u64 = 1000;

/// Pairs per deterministic counting block; fixed so the tail count is
/// independent of the worker count.
const PAIR_BLOCK: u64 = 1024;

/// Exact (Clopper-Pearson) central confidence interval for a binomial
/// proportion, via Beta quantiles.
fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    debug_assert!(trials > 0 && successes <= trials);
    let alpha = 1.0 - confidence;
    let (k, n) = (successes as f64, trials as f64);
    let lower = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0).unwrap().inverse_cdf(alpha / 2.0)
    };
    let upper = if successes == trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k).unwrap().inverse_cdf(1.0 - alpha / 2.0)
    };
    (lower, upper)
}

/// Estimate P(|fidelity - 1/D| >= eps) over `n_pairs` independent Haar
/// pairs and assemble the full report.
///
/// Pair k draws its two states from the streams (seed, 2k) and (seed, 2k+1),
/// so the estimate is reproducible and parallelizes over disjoint blocks of
/// pair indices; the tail count is an integer sum and therefore identical
/// for every worker count.
pub fn empirical_tail<S: Scalar>(
    dim: usize,
    epsilon: S,
    n_pairs: u64,
    seed: u64,
) -> Result<ConcentrationBoundReport<S>> {
    check_dim(dim)?;
    check_epsilon(epsilon)?;
    if n_pairs < MIN_PAIRS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_PAIRS} pairs for a meaningful tail estimate, got {n_pairs}"
        )));
    }
    let mean = lit::<S>(dim as f64).recip();
    let n_blocks = n_pairs.div_ceil(PAIR_BLOCK);
    let tail_count: u64 = (0..n_blocks)
        .into_par_iter()
        .map(|block| {
            let lo = block * PAIR_BLOCK;
            let hi = (lo + PAIR_BLOCK).min(n_pairs);
            let mut count = 0u64;
            for k in lo..hi {
                let a = sample_state::<S, _>(dim, &mut stream_rng(seed, 2 * k))
                    .expect("dim checked above");
                let b = sample_state::<S, _>(dim, &mut stream_rng(seed, 2 * k + 1))
                    .expect("dim checked above");
                let f = fidelity(&a, &b).expect("dims match");
                if (f - mean).abs() >= epsilon {
                    count += 1;
                }
            }
            count
        })
        .sum();
    let (lo, hi) = clopper_pearson(tail_count, n_pairs, 0.99);
    Ok(ConcentrationBoundReport {
        dim,
        epsilon,
        analytic_bound: analytic_bound(dim, epsilon)?,
        lower_bound_plb: lower_bound_plb(dim)?,
        empirical_tail: lit::<S>(tail_count as f64) / lit::<S>(n_pairs as f64),
        n_samples: n_pairs,
        ci_halfwidth: lit::<S>((hi - lo) / 2.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn lower_bound_table_matches_quoted_digits() {
        // 1 - 4·exp(-2^N/16) for N = 6, 7, 8.
        for (n, expect) in [(6u32, 0.9267), (7, 0.99866), (8, 0.99999955)] {
            let got = lower_bound_plb::<f64>(1usize << n).unwrap();
            assert!(
                (got - expect).abs() < 5e-4,
                "N = {n}: got {got}, expect {expect}"
            );
            let via_bound = 1.0 - analytic_bound(1usize << n, 1.0 / (1u64 << n) as f64).unwrap();
            assert!((via_bound - got).abs() < 1e-12);
        }
    }

    #[test]
    fn bound_is_vacuous_as_epsilon_vanishes() {
        let b = analytic_bound::<f64>(64, 1e-300).unwrap();
        assert!(b > 3.999_999 && b <= 4.0);
    }

    #[test]
    fn epsilon_validation() {
        assert!(matches!(
            analytic_bound::<f64>(64, 0.0),
            Err(Error::InvalidEpsilon { .. })
        ));
        assert!(matches!(
            analytic_bound::<f64>(64, -1.0),
            Err(Error::InvalidEpsilon { .. })
        ));
        assert!(matches!(
            analytic_bound::<f64>(1, 0.1),
            Err(Error::InvalidDimension { .. })
        ));
    }

    #[test]
    fn chi_square_tail_values() {
        let got = chi_square_tail(8, 0.5f64).unwrap();
        assert!((got - 2.0 * (-0.25f64).exp()).abs() < 1e-15);
        // t -> 1^- approaches 2·exp(-n/8).
        let near_one = chi_square_tail(16, 1.0 - 1e-12f64).unwrap();
        assert!((near_one - 2.0 * (-2.0f64).exp()).abs() < 1e-9);
        assert!(chi_square_tail(16, 0.0f64).is_err());
        assert!(chi_square_tail(16, 1.0f64).is_err());
        assert!(chi_square_tail(0, 0.5f64).is_err());
    }

    #[test]
    fn chi_square_bound_holds_empirically() {
        // 1e5 trials of the mean of 64 squared normals; the observed tail at
        // t = 0.5 must respect 2·exp(-64/32) ~= 0.2707.
        let (n, t, trials) = (64usize, 0.5f64, 100_000usize);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(404);
        let mut exceed = 0u64;
        for _ in 0..trials {
            let mean: f64 = (0..n)
                .map(|_| {
                    let z: f64 = rand_distr::Distribution::sample(
                        &rand_distr::StandardNormal,
                        &mut rng,
                    );
                    z * z
                })
                .sum::<f64>()
                / n as f64;
            if (mean - 1.0).abs() >= t {
                exceed += 1;
            }
        }
        let empirical = exceed as f64 / trials as f64;
        assert!(
            empirical <= chi_square_tail(n, t).unwrap(),
            "empirical = {empirical}"
        );
    }

    #[test]
    fn branch_bounds_sum_to_the_full_bound() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(99);
        for _ in 0..100 {
            let dim = 1usize << rng.gen_range(1..12);
            let eps: f64 = 10f64.powf(rng.gen_range(-6.0..1.0));
            let c = bound_components(dim, eps).unwrap();
            let full = analytic_bound(dim, eps).unwrap();
            assert!((c.p_plus_bound + c.p_minus_bound - full).abs() < 1e-12);
            assert_eq!(c.p_plus_bound, c.p_minus_bound);
        }
    }

    #[test]
    fn appendix_case_splits() {
        // D·eps = 1 exactly: both X_+ branches agree at 1.
        let c = bound_components(64, 1.0 / 64.0f64).unwrap();
        assert_eq!(c.x_plus_max, 1.0);
        // D·eps = 1/2: X_+ max is (D·eps)^2 = 0.25.
        let c = bound_components(64, 1.0 / 128.0f64).unwrap();
        assert_eq!(c.x_plus_max, 0.25);
        assert_eq!(c.x_minus_max, 0.25);
        // Y_- saturates at D above D·eps = 1/2.
        let c = bound_components(64, 0.1f64).unwrap();
        assert_eq!(c.y_minus_max, 64.0);
        // Below the split it follows D·(D·eps)^2/(1 - D·eps)^2.
        let c = bound_components(64, 1.0 / 256.0f64).unwrap();
        let de = 0.25f64;
        assert!((c.y_minus_max - 64.0 * (de / (1.0 - de)).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn plb_approaches_unity_double_exponentially() {
        // 1 - P_L.B.(N) = 4·exp(-2^N/16) satisfies q(N+1) = q(N)^2/4 as an
        // identity; allow one part in 1e12 of floating-point slack.
        for n in 5u32..=10 {
            let q_n = 1.0 - lower_bound_plb::<f64>(1usize << n).unwrap();
            let q_next = 1.0 - lower_bound_plb::<f64>(1usize << (n + 1)).unwrap();
            assert!(q_next <= q_n * q_n / 4.0 * (1.0 + 1e-12), "N = {n}");
        }
    }

    #[test]
    fn bound_dominates_in_the_large_deviation_regime() {
        // The exact two-sided tail of the Beta(1, D-1) fidelity law crosses
        // below the bound once D·eps is of order D/4; at (64, 0.25) the true
        // tail is ~4e-9 against a bound of ~3e-6. Near eps ~ 1/D the formula
        // is smaller than the true tail and cannot dominate; see the
        // acceptance suite for that comparison.
        let r = empirical_tail::<f64>(64, 0.25, 20_000, 7).unwrap();
        assert!(r.analytic_bound < 1.0);
        assert!(r.empirical_tail - r.ci_halfwidth <= r.analytic_bound);
        assert!(r.empirical_tail >= 0.0 && r.empirical_tail <= 1.0);
        assert_eq!(r.n_samples, 20_000);
    }

    #[test]
    fn empirical_tail_matches_the_exact_beta_law() {
        // P(|F - 1/D| >= eps) for F ~ Beta(1, D-1) is
        // (1 - 1/D - eps)^(D-1) + 0 when eps > 1/D has no lower branch; at
        // (64, 1/64) that is (1 - 2/64)^63 ~= 0.13531. Band: 3 binomial SE.
        let (dim, eps, n) = (64usize, 1.0 / 64.0, 20_000u64);
        let exact = (1.0 - 2.0 / 64.0f64).powi(63);
        let r = empirical_tail::<f64>(dim, eps, n, 7).unwrap();
        let band = 3.0 * (exact * (1.0 - exact) / n as f64).sqrt();
        assert!(
            (r.empirical_tail - exact).abs() < band,
            "tail = {}, exact = {exact}",
            r.empirical_tail
        );
    }

    #[test]
    fn impossible_deviation_has_zero_tail() {
        // Fidelity lives in [0, 1]; a deviation of 10 can never occur.
        let r = empirical_tail::<f64>(4, 10.0, 1000, 1).unwrap();
        assert_eq!(r.empirical_tail, 0.0);
        assert!(r.ci_halfwidth > 0.0);
    }

    #[test]
    fn two_dimensional_fidelity_is_uniform() {
        // At D = 2 the fidelity is uniform on [0, 1], so
        // P(|F - 1/2| >= 0.01) = 0.98; allow 3 binomial standard errors.
        let n = 10_000u64;
        let r = empirical_tail::<f64>(2, 0.01, n, 3).unwrap();
        let band = 3.0 * (0.98f64 * 0.02 / n as f64).sqrt();
        assert!(
            (r.empirical_tail - 0.98).abs() < band,
            "tail = {}",
            r.empirical_tail
        );
    }

    #[test]
    fn mean_fidelity_is_inverse_dimension_across_dims() {
        // SD of the fidelity is sqrt((D-1)/(D^2 (D+1))); band is 3 standard
        // errors of the sample mean.
        use crate::metric::fidelity;
        use crate::states::sample_state;
        for dim in [2usize, 64, 1024] {
            let n = 2000u64;
            let mut total = 0.0;
            for k in 0..n {
                let a = sample_state::<f64, _>(dim, &mut stream_rng(31, 2 * k)).unwrap();
                let b = sample_state::<f64, _>(dim, &mut stream_rng(31, 2 * k + 1)).unwrap();
                total += fidelity(&a, &b).unwrap();
            }
            let mean = total / n as f64;
            let d = dim as f64;
            let sd = ((d - 1.0) / (d * d * (d + 1.0))).sqrt();
            let band = 3.0 * sd / (n as f64).sqrt();
            assert!(
                (mean - 1.0 / d).abs() < band,
                "dim {dim}: mean = {mean}, band = {band}"
            );
        }
    }

    #[test]
    fn pair_count_floor_is_enforced() {
        assert!(matches!(
            empirical_tail::<f64>(4, 0.1, 10, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn tail_estimate_is_worker_count_independent() {
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| empirical_tail::<f64>(8, 0.05, 5000, 11).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.empirical_tail, b.empirical_tail);
        assert_eq!(a.ci_halfwidth, b.ci_halfwidth);
    }

    #[test]
    fn clopper_pearson_basics() {
        let (lo, hi) = clopper_pearson(0, 100, 0.99);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.1);
        let (lo, hi) = clopper_pearson(100, 100, 0.99);
        assert!(lo > 0.9);
        assert_eq!(hi, 1.0);
        let (lo, hi) = clopper_pearson(50, 100, 0.99);
        assert!(lo < 0.5 && hi > 0.5);
    }
}
