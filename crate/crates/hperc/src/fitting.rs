//! Scaling-law fits.
//!
//! Per dimension, mean critical thresholds follow dS = (pi/2)·A·M^(-B),
//! fitted as ordinary (or error-weighted) least squares on
//! log(2·dS/pi) = log A - B·log M. Across dimensions the fitted factors
//! follow A(D) = gamma_A - alpha_A·D^(-beta_A) (profiled over gamma_A) and
//! B(D) = alpha_B·D^(-beta_B) (plain log-log).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Straight-line fit y = intercept + slope·x with standard errors.
///
/// Unweighted: parameter variances scale with RSS/(n-2). Weighted (weights
/// are 1/sigma_y^2 with known sigmas): variances come from the normal
/// equations directly, without the reduced-chi-square factor.
#[derive(Debug, Clone, Copy)]
struct LineFit<S> {
    intercept: S,
    slope: S,
    se_intercept: S,
    se_slope: S,
    r_squared: S,
    rss: S,
}

fn fit_line<S: Scalar>(xs: &[S], ys: &[S], weights: Option<&[S]>) -> Result<LineFit<S>> {
    let n = xs.len();
    debug_assert_eq!(n, ys.len());
    let w = |i: usize| weights.map_or(S::one(), |w| w[i]);
    let sw: S = (0..n).map(&w).sum();
    let sx: S = (0..n).map(|i| w(i) * xs[i]).sum();
    let sy: S = (0..n).map(|i| w(i) * ys[i]).sum();
    let mean_x = sx / sw;
    let mean_y = sy / sw;
    let stt: S = (0..n).map(|i| w(i) * (xs[i] - mean_x) * (xs[i] - mean_x)).sum();
    if !(stt > S::zero()) {
        return Err(Error::InsufficientData(
            "all abscissas identical: slope is unidentifiable".into(),
        ));
    }
    let sty: S = (0..n).map(|i| w(i) * (xs[i] - mean_x) * ys[i]).sum();
    let slope = sty / stt;
    let intercept = (sy - sx * slope) / sw;
    let rss: S = (0..n)
        .map(|i| {
            let r = ys[i] - intercept - slope * xs[i];
            w(i) * r * r
        })
        .sum();
    let tss: S = (0..n)
        .map(|i| w(i) * (ys[i] - mean_y) * (ys[i] - mean_y))
        .sum();
    let tiny = lit::<S>(1e-300);
    let r_squared = if tss > tiny {
        S::one() - rss / tss
    } else if rss <= tiny {
        S::one()
    } else {
        S::zero()
    };
    let (var_slope, var_intercept) = if weights.is_some() {
        (stt.recip(), sw.recip() + mean_x * mean_x / stt)
    } else {
        let dof = lit::<S>((n - 2) as f64);
        let sigma_sqr = rss / dof;
        (
            sigma_sqr / stt,
            sigma_sqr * (lit::<S>(n as f64).recip() + mean_x * mean_x / stt),
        )
    };
    Ok(LineFit {
        intercept,
        slope,
        se_intercept: var_intercept.sqrt(),
        se_slope: var_slope.sqrt(),
        r_squared,
        rss,
    })
}

fn distinct_count<S: Scalar>(xs: &[S]) -> usize {
    let mut sorted: Vec<S> = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup();
    sorted.len()
}

/// Result of the per-dimension power-law fit dS = (pi/2)·A·M^(-B).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PowerLawFit<S> {
    pub a: S,
    pub b: S,
    pub se_a: S,
    pub se_b: S,
    pub r_squared: S,
    /// [min M, max M] consumed by the fit.
    pub m_range: (usize, usize),
}

/// Fit dS = (pi/2)·A·M^(-B) from (M, mean dS) points.
///
/// `weights`, when given, are the per-point standard errors of dS; they are
/// propagated into log space as sigma/dS and used as inverse-variance
/// weights.
pub fn fit_power_law<S: Scalar>(
    points: &[(usize, S)],
    weights: Option<&[S]>,
) -> Result<PowerLawFit<S>> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 points for the power-law fit, got {}",
            points.len()
        )));
    }
    if let Some(w) = weights {
        if w.len() != points.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {} points",
                w.len(),
                points.len()
            )));
        }
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(m, delta_s) in points {
        if m < 2 {
            return Err(Error::InvalidData(format!("state count {m} below 2")));
        }
        if !(delta_s > S::zero()) {
            return Err(Error::InvalidData(format!(
                "threshold {} is not positive",
                delta_s.to_f64().unwrap_or(f64::NAN)
            )));
        }
        xs.push(lit::<S>(m as f64).ln());
        ys.push((lit::<S>(2.0) * delta_s / S::PI()).ln());
    }
    if distinct_count(&xs) < 3 {
        return Err(Error::InsufficientData(
            "need at least 3 distinct M values".into(),
        ));
    }
    let log_weights = match weights {
        None => None,
        Some(sigmas) => {
            let mut w = Vec::with_capacity(sigmas.len());
            for (i, &sigma) in sigmas.iter().enumerate() {
                if !(sigma > S::zero()) {
                    return Err(Error::InvalidData(format!(
                        "standard error {} is not positive",
                        sigma.to_f64().unwrap_or(f64::NAN)
                    )));
                }
                let sigma_log = sigma / points[i].1;
                w.push((sigma_log * sigma_log).recip());
            }
            Some(w)
        }
    };
    let line = fit_line(&xs, &ys, log_weights.as_deref())?;
    let a = line.intercept.exp();
    let m_min = points.iter().map(|&(m, _)| m).min().unwrap();
    let m_max = points.iter().map(|&(m, _)| m).max().unwrap();
    Ok(PowerLawFit {
        a,
        b: -line.slope,
        se_a: a * line.se_intercept,
        se_b: line.se_slope,
        r_squared: line.r_squared,
        m_range: (m_min, m_max),
    })
}

/// Result of the log-log fit B(D) = alpha_B·D^(-beta_B).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BLawFit<S> {
    pub alpha_b: S,
    pub beta_b: S,
    pub se_alpha_b: S,
    pub se_beta_b: S,
    pub r_squared: S,
}

/// Fit B = alpha_B·D^(-beta_B) from (D, B) points.
pub fn fit_b_law<S: Scalar>(points: &[(usize, S)]) -> Result<BLawFit<S>> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 points for the B law, got {}",
            points.len()
        )));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(d, b) in points {
        if !(b > S::zero()) {
            return Err(Error::InvalidData(format!(
                "exponent {} is not positive",
                b.to_f64().unwrap_or(f64::NAN)
            )));
        }
        xs.push(lit::<S>(d as f64).ln());
        ys.push(b.ln());
    }
    if distinct_count(&xs) < 3 {
        return Err(Error::InsufficientData(
            "need at least 3 distinct dimensions".into(),
        ));
    }
    let line = fit_line(&xs, &ys, None)?;
    let alpha_b = line.intercept.exp();
    Ok(BLawFit {
        alpha_b,
        beta_b: -line.slope,
        se_alpha_b: alpha_b * line.se_intercept,
        se_beta_b: line.se_slope,
        r_squared: line.r_squared,
    })
}

/// Result of the profiled fit A(D) = gamma_A - alpha_A·D^(-beta_A).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ALawFit<S> {
    pub gamma_a: S,
    pub alpha_a: S,
    pub beta_a: S,
    pub se_gamma_a: S,
    pub se_alpha_a: S,
    pub se_beta_a: S,
    /// Residual sum of squares in log(gamma_A - A) space at the optimum.
    pub rss: S,
}

/// Log-space RSS of the A law at a fixed gamma; `None` when gamma - A <= 0
/// somewhere, which rules that gamma out.
fn a_law_rss_at<S: Scalar>(gamma: S, log_d: &[S], a_values: &[S]) -> Option<(S, LineFit<S>)> {
    let mut ys = Vec::with_capacity(a_values.len());
    for &a in a_values {
        let gap = gamma - a;
        if !(gap > S::zero()) {
            return None;
        }
        ys.push(gap.ln());
    }
    let line = fit_line(log_d, &ys, None).ok()?;
    Some((line.rss, line))
}

/// Fit A = gamma_A - alpha_A·D^(-beta_A) from (D, A) points.
///
/// gamma_A is profiled: 400 log-spaced offsets above max(A) in
/// [1e-6, 0.2] are scanned, each reduced to a log-log line fit of
/// log(gamma_A - A) on log D, and the winner is refined by golden-section
/// search to 1e-6. gamma_A's standard error comes from the curvature of the
/// RSS profile (central finite difference).
pub fn fit_a_law<S: Scalar>(points: &[(usize, S)]) -> Result<ALawFit<S>> {
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "need at least 4 points for the 3-parameter A law, got {}",
            points.len()
        )));
    }
    let log_d: Vec<S> = points.iter().map(|&(d, _)| lit::<S>(d as f64).ln()).collect();
    let a_values: Vec<S> = points.iter().map(|&(_, a)| a).collect();
    if distinct_count(&log_d) < 4 {
        return Err(Error::InsufficientData(
            "need at least 4 distinct dimensions".into(),
        ));
    }
    let max_a = a_values
        .iter()
        .copied()
        .fold(S::neg_infinity(), |acc, a| acc.max(a));
    let min_a = a_values
        .iter()
        .copied()
        .fold(S::infinity(), |acc, a| acc.min(a));
    if max_a - min_a < lit(1e-12) {
        return Err(Error::DegenerateFit(
            "A is constant across dimensions: alpha_A = 0, beta_A unidentifiable".into(),
        ));
    }

    // Scan gamma over max(A) + 400 log-spaced offsets in [1e-6, 0.2].
    let n_grid = 400;
    let (lo_off, hi_off) = (1e-6f64, 0.2f64);
    let ratio = (hi_off / lo_off).ln() / (n_grid - 1) as f64;
    let mut best: Option<(S, S)> = None; // (rss, gamma)
    let mut candidates = Vec::with_capacity(n_grid);
    for k in 0..n_grid {
        let gamma = max_a + lit::<S>(lo_off * (ratio * k as f64).exp());
        candidates.push(gamma);
        if let Some((rss, _)) = a_law_rss_at(gamma, &log_d, &a_values) {
            // Strict < and ascending scan order: ties go to the smallest gamma.
            if best.is_none_or(|(r, _)| rss < r) {
                best = Some((rss, gamma));
            }
        }
    }
    let (_, gamma_grid) = best.ok_or_else(|| {
        Error::DegenerateFit("no gamma candidate leaves gamma - A positive".into())
    })?;

    // Golden-section refinement inside the bracketing grid interval.
    let idx = candidates
        .iter()
        .position(|&g| g == gamma_grid)
        .expect("winner comes from the grid");
    let lo = candidates[idx.saturating_sub(1)];
    let hi = candidates[(idx + 1).min(n_grid - 1)];
    let gamma = golden_min(
        |g| {
            a_law_rss_at(g, &log_d, &a_values)
                .map(|(rss, _)| rss)
                .unwrap_or_else(S::infinity)
        },
        lo,
        hi,
        lit(1e-6),
    );
    let (rss, line) = a_law_rss_at(gamma, &log_d, &a_values)
        .ok_or_else(|| Error::DegenerateFit("refined gamma left gamma - A <= 0".into()))?;

    let alpha_a = line.intercept.exp();
    let beta_a = -line.slope;

    // Profile curvature: RSS''(gamma) by central difference; the gamma
    // variance is 2·sigma^2 / RSS'' with sigma^2 = RSS/(n - 3).
    let h = lit::<S>(1e-4);
    let rss_at = |g: S| a_law_rss_at(g, &log_d, &a_values).map(|(r, _)| r);
    let se_gamma = match (rss_at(gamma - h), rss_at(gamma + h)) {
        (Some(lo_r), Some(hi_r)) => {
            let second = (hi_r - lit::<S>(2.0) * rss + lo_r) / (h * h);
            let dof = lit::<S>((points.len() - 3) as f64);
            if second > S::zero() && dof > S::zero() {
                (lit::<S>(2.0) * (rss / dof) / second).sqrt()
            } else {
                S::nan()
            }
        }
        _ => S::nan(),
    };
    Ok(ALawFit {
        gamma_a: gamma,
        alpha_a,
        beta_a,
        se_gamma_a: se_gamma,
        se_alpha_a: alpha_a * line.se_intercept,
        se_beta_a: line.se_slope,
        rss,
    })
}

/// Golden-section minimization of `f` on [lo, hi] to absolute tolerance `tol`.
fn golden_min<S: Scalar>(f: impl Fn(S) -> S, mut lo: S, mut hi: S, tol: S) -> S {
    let inv_phi = lit::<S>(0.618_033_988_749_894_9);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    (lo + hi) / lit(2.0)
}

/// Combined meta-law parameters over a set of dimensions.
#[derive(Debug, Clone, Serialize)]
pub struct MetaFit<S> {
    pub gamma_a: S,
    pub se_gamma_a: S,
    pub alpha_a: S,
    pub se_alpha_a: S,
    pub beta_a: S,
    pub se_beta_a: S,
    pub alpha_b: S,
    pub se_alpha_b: S,
    pub beta_b: S,
    pub se_beta_b: S,
    pub dims_used: Vec<usize>,
}

/// Fit both meta-laws from per-dimension (D, A) and (D, B) points.
pub fn fit_meta<S: Scalar>(
    points_a: &[(usize, S)],
    points_b: &[(usize, S)],
) -> Result<MetaFit<S>> {
    let a = fit_a_law(points_a)?;
    let b = fit_b_law(points_b)?;
    let mut dims_used: Vec<usize> = points_a.iter().map(|&(d, _)| d).collect();
    dims_used.sort_unstable();
    dims_used.dedup();
    Ok(MetaFit {
        gamma_a: a.gamma_a,
        se_gamma_a: a.se_gamma_a,
        alpha_a: a.alpha_a,
        se_alpha_a: a.se_alpha_a,
        beta_a: a.beta_a,
        se_beta_a: a.se_beta_a,
        alpha_b: b.alpha_b,
        se_alpha_b: b.se_alpha_b,
        beta_b: b.beta_b,
        se_beta_b: b.se_beta_b,
        dims_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn law(a: f64, b: f64, m: usize) -> f64 {
        FRAC_PI_2 * a * (m as f64).powf(-b)
    }

    fn m_grid() -> Vec<usize> {
        vec![2, 4, 8, 16, 32, 64, 128, 256]
    }

    #[test]
    fn exact_power_law_round_trip() {
        let points: Vec<(usize, f64)> = m_grid().iter().map(|&m| (m, law(1.0, 0.5, m))).collect();
        let fit = fit_power_law(&points, None).unwrap();
        assert!((fit.a - 1.0).abs() < 1e-10, "A = {}", fit.a);
        assert!((fit.b - 0.5).abs() < 1e-10, "B = {}", fit.b);
        assert!(fit.r_squared >= 0.99);
        assert_eq!(fit.m_range, (2, 256));
        assert!(fit.se_a < 1e-10 && fit.se_b < 1e-10);
    }

    #[test]
    fn constant_law_gives_unit_amplitude_zero_exponent() {
        let points: Vec<(usize, f64)> = m_grid().iter().map(|&m| (m, FRAC_PI_2)).collect();
        let fit = fit_power_law(&points, None).unwrap();
        assert!((fit.a - 1.0).abs() < 1e-12);
        assert!(fit.b.abs() < 1e-12);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn power_law_error_paths() {
        let ok = |m: usize| (m, law(0.9, 0.3, m));
        assert!(matches!(
            fit_power_law(&[ok(2), ok(4)], None),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            fit_power_law(&[ok(2), ok(4), (8, 0.0)], None),
            Err(Error::InvalidData(_))
        ));
        assert!(matches!(
            fit_power_law(&[ok(2), ok(4), (8, -0.1)], None),
            Err(Error::InvalidData(_))
        ));
        // Three points but only two distinct M.
        assert!(matches!(
            fit_power_law(&[ok(2), ok(2), ok(4)], None),
            Err(Error::InsufficientData(_))
        ));
        // Bad weights.
        assert!(fit_power_law(&[ok(2), ok(4), ok(8)], Some(&[1.0, 1.0])).is_err());
        assert!(fit_power_law(&[ok(2), ok(4), ok(8)], Some(&[1.0, 0.0, 1.0])).is_err());
    }

    #[test]
    fn equal_weights_match_unweighted_point_estimates() {
        let points: Vec<(usize, f64)> = m_grid()
            .iter()
            .map(|&m| (m, law(0.8, 0.2, m) * (1.0 + 0.01 * (m as f64).sin())))
            .collect();
        let sigmas = vec![0.01; points.len()];
        let plain = fit_power_law(&points, None).unwrap();
        let weighted = fit_power_law(&points, Some(&sigmas)).unwrap();
        // Equal sigmas scale all weights alike only when sigma/dS is constant,
        // so compare against per-point sigmas proportional to dS.
        let proportional: Vec<f64> = points.iter().map(|&(_, y)| 0.01 * y).collect();
        let weighted_prop = fit_power_law(&points, Some(&proportional)).unwrap();
        assert!((weighted_prop.a - plain.a).abs() < 1e-12);
        assert!((weighted_prop.b - plain.b).abs() < 1e-12);
        assert!(weighted.a.is_finite());
    }

    #[test]
    fn b_law_round_trip() {
        let dims: Vec<usize> = (7..=14).map(|n| 1usize << n).collect();
        let points: Vec<(usize, f64)> = dims
            .iter()
            .map(|&d| (d, 0.2 * (d as f64).powf(-0.5)))
            .collect();
        let fit = fit_b_law(&points).unwrap();
        assert!((fit.alpha_b - 0.2).abs() < 1e-10);
        assert!((fit.beta_b - 0.5).abs() < 1e-10);
    }

    #[test]
    fn b_law_error_paths() {
        assert!(matches!(
            fit_b_law(&[(128usize, 0.1f64)]),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            fit_b_law(&[(128, 0.1), (256, -0.05), (512, 0.02)]),
            Err(Error::InvalidData(_))
        ));
    }

    #[test]
    fn a_law_round_trip() {
        let dims: Vec<usize> = (7..=14).map(|n| 1usize << n).collect();
        let points: Vec<(usize, f64)> = dims
            .iter()
            .map(|&d| (d, 1.0 - 0.33 * (d as f64).powf(-0.47)))
            .collect();
        let fit = fit_a_law(&points).unwrap();
        assert!((fit.gamma_a - 1.0).abs() < 1e-6, "gamma = {}", fit.gamma_a);
        assert!((fit.alpha_a - 0.33).abs() < 1e-4, "alpha = {}", fit.alpha_a);
        assert!((fit.beta_a - 0.47).abs() < 1e-4, "beta = {}", fit.beta_a);
    }

    #[test]
    fn a_law_degenerate_and_insufficient() {
        let flat: Vec<(usize, f64)> = (7..=10).map(|n| (1usize << n, 0.9)).collect();
        assert!(matches!(fit_a_law(&flat), Err(Error::DegenerateFit(_))));
        assert!(matches!(
            fit_a_law(&flat[..3]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn meta_fit_round_trip() {
        let dims: Vec<usize> = (7..=14).map(|n| 1usize << n).collect();
        let points_a: Vec<(usize, f64)> = dims
            .iter()
            .map(|&d| (d, 1.0 - 0.33 * (d as f64).powf(-0.47)))
            .collect();
        let points_b: Vec<(usize, f64)> = dims
            .iter()
            .map(|&d| (d, 0.182 * (d as f64).powf(-0.522)))
            .collect();
        let meta = fit_meta(&points_a, &points_b).unwrap();
        assert!((meta.gamma_a - 1.0).abs() < 1e-6);
        assert!((meta.alpha_b - 0.182).abs() < 1e-10);
        assert!((meta.beta_b - 0.522).abs() < 1e-10);
        assert_eq!(meta.dims_used, dims);
    }

    proptest! {
        #[test]
        fn round_trip_is_exact_for_any_law(
            a in 0.1f64..1.0,
            b in 0.0f64..1.0,
        ) {
            let points: Vec<(usize, f64)> =
                m_grid().iter().map(|&m| (m, law(a, b, m))).collect();
            let fit = fit_power_law(&points, None).unwrap();
            prop_assert!((fit.a - a).abs() < 1e-10);
            prop_assert!((fit.b - b).abs() < 1e-10);
            prop_assert!(fit.r_squared >= 0.99);
        }

        #[test]
        fn rescaling_thresholds_rescales_amplitude_only(
            a in 0.1f64..0.9,
            b in 0.05f64..0.9,
            c in 0.2f64..1.5,
        ) {
            let base: Vec<(usize, f64)> =
                m_grid().iter().map(|&m| (m, law(a, b, m))).collect();
            let scaled: Vec<(usize, f64)> =
                base.iter().map(|&(m, y)| (m, c * y)).collect();
            let f0 = fit_power_law(&base, None).unwrap();
            let f1 = fit_power_law(&scaled, None).unwrap();
            prop_assert!((f1.a - c * f0.a).abs() < 1e-12 * c.max(1.0));
            prop_assert!((f1.b - f0.b).abs() < 1e-12);
        }
    }
}
