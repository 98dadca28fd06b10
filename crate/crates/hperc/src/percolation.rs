//! Critical-threshold location and replicated sweeps.
//!
//! For a sampled ensemble the critical threshold dS* is the smallest dS at
//! which a maximal span cluster exists, with the acceptance band coupled to
//! the connection threshold (eps = dS) unless overridden. The MSC indicator
//! is monotone non-decreasing in dS — raising dS both coarsens the partition
//! and widens the band — so bisection on [0, pi/2] locates dS* directly; the
//! distance matrix is computed once and reused across all bisection steps.

use rayon::prelude::*;
use serde::Serialize;

use crate::clusters::{build_clusters, detect_msc};
use crate::error::{Error, Result};
use crate::metric::{distance_matrix, DistanceMatrix};
use crate::scalar::{lit, Scalar};
use crate::states::{sample_ensemble, StateEnsemble};

/// Band tolerance for MSC detection: coupled to the connection threshold by
/// default, or fixed for sensitivity studies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonRule<S> {
    /// eps = dS at every threshold (the default coupling).
    CoupledToThreshold,
    /// A fixed eps, independent of dS.
    Fixed(S),
}

impl<S: Scalar> EpsilonRule<S> {
    fn at(&self, delta_s: S) -> S {
        match *self {
            EpsilonRule::CoupledToThreshold => delta_s,
            EpsilonRule::Fixed(eps) => eps,
        }
    }
}

/// Does an MSC exist at threshold `delta_s` with eps = dS?
pub fn msc_indicator<S: Scalar>(dm: &DistanceMatrix<S>, delta_s: S) -> Result<bool> {
    msc_indicator_with(dm, delta_s, EpsilonRule::CoupledToThreshold)
}

/// MSC indicator under an explicit epsilon rule.
pub fn msc_indicator_with<S: Scalar>(
    dm: &DistanceMatrix<S>,
    delta_s: S,
    rule: EpsilonRule<S>,
) -> Result<bool> {
    let partition = build_clusters(dm, delta_s)?;
    Ok(detect_msc(&partition, rule.at(delta_s)).has_msc)
}

/// Location of the critical threshold for one distance matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint<S> {
    /// Smallest threshold (within the bisection tolerance) with an MSC.
    pub critical_delta_s: S,
    /// Pair of state indices realizing the qualifying cluster's span.
    pub msc_witness: (usize, usize),
    pub bisection_iterations: u32,
}

/// Bisect for the smallest dS with an MSC (eps = dS).
pub fn critical_threshold<S: Scalar>(dm: &DistanceMatrix<S>, tol: S) -> Result<CriticalPoint<S>> {
    critical_threshold_with(dm, tol, EpsilonRule::CoupledToThreshold)
}

/// Bisect under an explicit epsilon rule. The indicator stays monotone for
/// a fixed eps too (only the connectivity side then grows with dS).
pub fn critical_threshold_with<S: Scalar>(
    dm: &DistanceMatrix<S>,
    tol: S,
    rule: EpsilonRule<S>,
) -> Result<CriticalPoint<S>> {
    if !(tol > S::zero()) {
        return Err(Error::InvalidArgument(format!(
            "bisection tolerance must be positive, got {}",
            tol.to_f64().unwrap_or(f64::NAN)
        )));
    }
    let mut lo = S::zero();
    let mut hi = S::FRAC_PI_2();
    let mut iterations = 0u32;
    if msc_indicator_with(dm, lo, rule)? {
        hi = lo;
    } else {
        // Always true at pi/2 under the coupled rule (everything joins one
        // cluster and the band covers any span); a fixed eps can make the
        // indicator false everywhere.
        if !msc_indicator_with(dm, hi, rule)? {
            return Err(Error::InvalidArgument(
                "no maximal span cluster exists even at dS = pi/2 under the fixed epsilon rule"
                    .into(),
            ));
        }
        while hi - lo > tol {
            let mid = (lo + hi) / lit(2.0);
            if msc_indicator_with(dm, mid, rule)? {
                hi = mid;
            } else {
                lo = mid;
            }
            iterations += 1;
        }
    }
    let partition = build_clusters(dm, hi)?;
    let report = detect_msc(&partition, rule.at(hi));
    let alpha = report
        .msc_cluster_id
        .expect("MSC present at the upper bracket");
    Ok(CriticalPoint {
        critical_delta_s: hi,
        msc_witness: partition.span_witness(alpha),
        bisection_iterations: iterations,
    })
}

/// Critical threshold of one sampled ensemble, with its replicate identity.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalThresholdResult<S> {
    pub dim: usize,
    pub n_states: usize,
    pub seed: u64,
    pub sample_index: u64,
    pub critical_delta_s: S,
    pub msc_witness: (usize, usize),
    pub bisection_iterations: u32,
}

/// Sample-to-threshold pipeline for one ensemble.
pub fn percolate_ensemble<S: Scalar>(
    ensemble: &StateEnsemble<S>,
    tol: S,
    rule: EpsilonRule<S>,
) -> Result<CriticalThresholdResult<S>> {
    let dm = distance_matrix(ensemble);
    let point = critical_threshold_with(&dm, tol, rule)?;
    Ok(CriticalThresholdResult {
        dim: ensemble.dim(),
        n_states: ensemble.len(),
        seed: ensemble.seed(),
        sample_index: ensemble.sample_index(),
        critical_delta_s: point.critical_delta_s,
        msc_witness: point.msc_witness,
        bisection_iterations: point.bisection_iterations,
    })
}

/// Grid + replication plan for a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepConfig<S> {
    pub dims: Vec<usize>,
    pub state_counts: Vec<usize>,
    pub n_samples: usize,
    pub seed: u64,
    pub tol: S,
    /// None: eps = dS. Some(e): fixed band tolerance.
    pub epsilon_override: Option<S>,
    /// Refuse a (D, M) grid point whose working set exceeds this many bytes.
    pub memory_budget_bytes: u64,
}

/// Default working-set ceiling: 4 GiB.
pub const DEFAULT_MEMORY_BUDGET: u64 = 4 << 30;

impl<S: Scalar> SweepConfig<S> {
    pub fn new(dims: Vec<usize>, state_counts: Vec<usize>, n_samples: usize, seed: u64, tol: S) -> Self {
        SweepConfig {
            dims,
            state_counts,
            n_samples,
            seed,
            tol,
            epsilon_override: None,
            memory_budget_bytes: DEFAULT_MEMORY_BUDGET,
        }
    }

    fn epsilon_rule(&self) -> EpsilonRule<S> {
        match self.epsilon_override {
            Some(e) => EpsilonRule::Fixed(e),
            None => EpsilonRule::CoupledToThreshold,
        }
    }
}

/// Estimated working set of one (D, M) grid point: amplitudes plus the packed
/// distance matrix.
pub fn estimate_bytes<S>(dim: usize, n_states: usize) -> u64 {
    let amplitudes = (n_states as u64) * (dim as u64) * 2 * std::mem::size_of::<S>() as u64;
    let matrix = (n_states as u64) * (n_states as u64 - 1) / 2 * std::mem::size_of::<S>() as u64;
    amplitudes + matrix
}

/// Aggregated critical thresholds for one (D, M) grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord<S> {
    pub dim: usize,
    pub n_states: usize,
    pub n_samples: usize,
    pub mean_critical_delta_s: S,
    /// Sample standard deviation over replicates divided by sqrt(n_samples);
    /// zero when only one replicate exists.
    pub std_error: S,
    /// Per-replicate thresholds, indexed by sample_index.
    pub samples: Vec<S>,
}

fn aggregate<S: Scalar>(dim: usize, n_states: usize, samples: Vec<S>) -> SweepRecord<S> {
    let n = samples.len();
    let nf = lit::<S>(n as f64);
    let mean = samples.iter().copied().sum::<S>() / nf;
    let std_error = if n > 1 {
        let var = samples
            .iter()
            .map(|&x| (x - mean) * (x - mean))
            .sum::<S>()
            / lit::<S>((n - 1) as f64);
        (var / nf).sqrt()
    } else {
        S::zero()
    };
    SweepRecord {
        dim,
        n_states,
        n_samples: n,
        mean_critical_delta_s: mean,
        std_error,
        samples,
    }
}

/// Run every (D, M, sample_index) work item of the grid and aggregate.
///
/// Work items execute in parallel on the current rayon pool; results are
/// keyed by their grid position, so the output is identical for any worker
/// count or schedule.
pub fn run_sweep<S: Scalar>(config: &SweepConfig<S>) -> Result<Vec<SweepRecord<S>>> {
    run_sweep_filtered(config, |_, _| true)
}

/// [`run_sweep`] restricted to grid points where `include(dim, n_states)`
/// holds — the resume path skips points already on disk.
pub fn run_sweep_filtered<S: Scalar>(
    config: &SweepConfig<S>,
    include: impl Fn(usize, usize) -> bool,
) -> Result<Vec<SweepRecord<S>>> {
    if config.n_samples < 1 {
        return Err(Error::InvalidArgument(
            "n_samples must be at least 1".into(),
        ));
    }
    if config.dims.is_empty() || config.state_counts.is_empty() {
        return Err(Error::InvalidArgument("empty sweep grid".into()));
    }
    for &m in &config.state_counts {
        if m < 2 {
            return Err(Error::InvalidEnsemble { n_states: m });
        }
    }
    let mut grid: Vec<(usize, usize)> = Vec::new();
    for &dim in &config.dims {
        if dim < 2 {
            return Err(Error::InvalidDimension { dim });
        }
        for &m in &config.state_counts {
            if !include(dim, m) {
                continue;
            }
            let required = estimate_bytes::<S>(dim, m);
            if required > config.memory_budget_bytes {
                return Err(Error::OverBudget {
                    dim,
                    n_states: m,
                    required,
                    budget: config.memory_budget_bytes,
                });
            }
            grid.push((dim, m));
        }
    }
    let rule = config.epsilon_rule();
    let items: Vec<(usize, usize, u64)> = grid
        .iter()
        .flat_map(|&(dim, m)| (0..config.n_samples as u64).map(move |idx| (dim, m, idx)))
        .collect();
    let thresholds: Vec<S> = items
        .par_iter()
        .map(|&(dim, m, idx)| {
            let ensemble = sample_ensemble::<S>(m, dim, config.seed, idx)?;
            Ok(percolate_ensemble(&ensemble, config.tol, rule)?.critical_delta_s)
        })
        .collect::<Result<_>>()?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &(dim, m))| {
            let base = i * config.n_samples;
            aggregate(dim, m, thresholds[base..base + config.n_samples].to_vec())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::FRAC_PI_2;

    const TOL: f64 = 1e-4;

    fn pair_dm(d: f64) -> DistanceMatrix<f64> {
        DistanceMatrix::from_upper_triangle(2, vec![d]).unwrap()
    }

    #[test]
    fn indicator_is_true_at_the_diameter() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        for _ in 0..10 {
            let e = sample_ensemble::<f64>(rng.gen_range(2..20), 4, rng.gen(), 0).unwrap();
            let dm = distance_matrix(&e);
            assert!(msc_indicator(&dm, FRAC_PI_2).unwrap());
        }
    }

    #[test]
    fn two_state_indicator_closed_form() {
        // For M = 2 at distance d: cluster needs dS >= d, band needs
        // dS >= pi/2 - d, so the indicator flips at max(d, pi/2 - d).
        let dm = pair_dm(1.0);
        assert!(!msc_indicator(&dm, 0.9).unwrap());
        assert!(msc_indicator(&dm, 1.0).unwrap());
    }

    #[test]
    fn critical_threshold_examples() {
        let d = FRAC_PI_2;
        let point = critical_threshold(&pair_dm(d), TOL).unwrap();
        assert!((point.critical_delta_s - FRAC_PI_2).abs() <= TOL);

        let point = critical_threshold(&pair_dm(1.0), TOL).unwrap();
        assert!((point.critical_delta_s - 1.0).abs() <= TOL);
        assert_eq!(point.msc_witness, (0, 1));

        let point = critical_threshold(&pair_dm(0.5), TOL).unwrap();
        assert!((point.critical_delta_s - (FRAC_PI_2 - 0.5)).abs() <= TOL);
    }

    #[test]
    fn bisection_brackets_the_flip() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(77);
        for _ in 0..20 {
            let e = sample_ensemble::<f64>(rng.gen_range(2..40), 8, rng.gen(), 0).unwrap();
            let dm = distance_matrix(&e);
            let point = critical_threshold(&dm, TOL).unwrap();
            let star = point.critical_delta_s;
            assert!(msc_indicator(&dm, star).unwrap());
            if star - 2.0 * TOL >= 0.0 {
                assert!(!msc_indicator(&dm, star - 2.0 * TOL).unwrap());
            }
        }
    }

    #[test]
    fn indicator_is_monotone_in_threshold() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for _ in 0..20 {
            let e = sample_ensemble::<f64>(rng.gen_range(2..60), 4, rng.gen(), 0).unwrap();
            let dm = distance_matrix(&e);
            for _ in 0..20 {
                let a: f64 = rng.gen_range(0.0..FRAC_PI_2);
                let b: f64 = rng.gen_range(a..FRAC_PI_2);
                if msc_indicator(&dm, a).unwrap() {
                    assert!(msc_indicator(&dm, b).unwrap());
                }
            }
        }
    }

    #[test]
    fn two_state_closed_form_over_random_ensembles() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(123);
        for _ in 0..100 {
            let e = sample_ensemble::<f64>(2, 16, rng.gen(), 0).unwrap();
            let dm = distance_matrix(&e);
            let d = dm.get(0, 1);
            let expect = d.max(FRAC_PI_2 - d);
            let got = critical_threshold(&dm, TOL).unwrap().critical_delta_s;
            assert!((got - expect).abs() <= 2.0 * TOL, "d={d}: {got} vs {expect}");
        }
    }

    #[test]
    fn fixed_epsilon_rule_changes_the_flip_point() {
        // d = 0.5 with fixed eps = 1.2: the band accepts spans >= pi/2 - 1.2,
        // so the flip happens when the pair connects, at dS = 0.5 (the
        // coupled rule would flip at pi/2 - 0.5 instead).
        let dm = pair_dm(0.5);
        let point = critical_threshold_with(&dm, TOL, EpsilonRule::Fixed(1.2)).unwrap();
        assert!((point.critical_delta_s - 0.5).abs() <= TOL);

        // A tight fixed band that span 0.5 can never reach: no root.
        assert!(critical_threshold_with(&dm, TOL, EpsilonRule::Fixed(0.2)).is_err());
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(critical_threshold(&pair_dm(0.4), 0.0).is_err());
        assert!(critical_threshold(&pair_dm(0.4), -1.0).is_err());
    }

    #[test]
    fn critical_threshold_is_the_first_edge_when_all_pairs_are_distant() {
        // When every pairwise distance exceeds pi/4, the first connected
        // pair (at dS = min distance d) already has span d >= pi/2 - d, so
        // the flip happens exactly at the smallest matrix entry. High
        // dimensions put all distances near pi/2, far above pi/4.
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2718);
        for _ in 0..10 {
            let m = rng.gen_range(3..30);
            let e = sample_ensemble::<f64>(m, 128, rng.gen(), 0).unwrap();
            let dm = distance_matrix(&e);
            let d_min = dm.min_entry();
            assert!(d_min > std::f64::consts::FRAC_PI_4);
            let star = critical_threshold(&dm, TOL).unwrap().critical_delta_s;
            assert!(
                star >= d_min && star <= d_min + TOL,
                "dS* = {star}, d_min = {d_min}"
            );
        }
    }

    #[test]
    fn sweep_of_one_sample_matches_single_run() {
        let config = SweepConfig::new(vec![4], vec![2], 1, 9, TOL);
        let records = run_sweep(&config).unwrap();
        assert_eq!(records.len(), 1);
        let e = sample_ensemble::<f64>(2, 4, 9, 0).unwrap();
        let single = percolate_ensemble(&e, TOL, EpsilonRule::CoupledToThreshold).unwrap();
        assert_eq!(records[0].mean_critical_delta_s, single.critical_delta_s);
        assert_eq!(records[0].std_error, 0.0);
        assert_eq!(records[0].samples.len(), 1);
    }

    #[test]
    fn sweep_means_stay_in_range() {
        let config = SweepConfig::new(vec![2], vec![2], 100, 31, TOL);
        let records = run_sweep(&config).unwrap();
        let mean = records[0].mean_critical_delta_s;
        assert!(mean > 0.0 && mean <= FRAC_PI_2);
        assert!(records[0].std_error > 0.0);
        assert_eq!(records[0].samples.len(), 100);
    }

    #[test]
    fn sweep_is_schedule_independent() {
        let config = SweepConfig::new(vec![2, 4], vec![2, 5], 6, 42, TOL);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_sweep(&config).unwrap());
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_sweep(&config).unwrap());
        assert_eq!(single, multi);
    }

    #[test]
    fn sweep_refuses_over_budget_grids() {
        let mut config = SweepConfig::new(vec![1024], vec![100], 1, 0, TOL);
        config.memory_budget_bytes = 1024;
        match run_sweep(&config) {
            Err(Error::OverBudget { dim, n_states, budget, .. }) => {
                assert_eq!((dim, n_states, budget), (1024, 100, 1024));
            }
            other => panic!("expected budget refusal, got {other:?}"),
        }
    }

    #[test]
    fn sweep_validates_grid() {
        assert!(run_sweep(&SweepConfig::new(vec![], vec![2], 1, 0, TOL)).is_err());
        assert!(run_sweep(&SweepConfig::new(vec![2], vec![1], 1, 0, TOL)).is_err());
        assert!(run_sweep(&SweepConfig::new(vec![2], vec![2], 0, 0, TOL)).is_err());
    }
}
