//! Fubini-Study distances between pure states and packed pairwise matrices.
//!
//! d(a, b) = arccos(|<a|b>|) with the arccos argument clamped to [0, 1], so
//! every distance lands in [0, pi/2] and near-identical states cannot produce
//! NaN from rounding pushing |<a|b>| above one.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::states::{QuantumState, StateEnsemble};

/// <a|b> = Σ_j conj(a_j)·b_j, accumulated by pairwise summation.
fn inner_product<S: Scalar>(a: &[Complex<S>], b: &[Complex<S>]) -> Complex<S> {
    const BASE: usize = 32;
    fn go<S: Scalar>(a: &[Complex<S>], b: &[Complex<S>]) -> Complex<S> {
        if a.len() <= BASE {
            let mut acc = Complex::new(S::zero(), S::zero());
            for (x, y) in a.iter().zip(b.iter()) {
                acc += x.conj() * *y;
            }
            acc
        } else {
            let mid = a.len() / 2;
            go(&a[..mid], &b[..mid]) + go(&a[mid..], &b[mid..])
        }
    }
    go(a, b)
}

fn check_dims<S: Scalar>(a: &QuantumState<S>, b: &QuantumState<S>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

/// |<a|b>| clamped to [0, 1].
fn overlap_magnitude<S: Scalar>(a: &QuantumState<S>, b: &QuantumState<S>) -> S {
    let z = inner_product(a.amplitudes(), b.amplitudes());
    z.norm().min(S::one())
}

/// Fubini-Study distance arccos(|<a|b>|), in [0, pi/2].
pub fn fubini_study_distance<S: Scalar>(a: &QuantumState<S>, b: &QuantumState<S>) -> Result<S> {
    check_dims(a, b)?;
    Ok(overlap_magnitude(a, b).acos())
}

/// Fidelity |<a|b>|^2, in [0, 1].
pub fn fidelity<S: Scalar>(a: &QuantumState<S>, b: &QuantumState<S>) -> Result<S> {
    check_dims(a, b)?;
    let m = overlap_magnitude(a, b);
    Ok(m * m)
}

/// Symmetric M x M distance matrix, stored as the packed upper triangle
/// (M(M-1)/2 entries, diagonal implicitly zero).
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<S> {
    size: usize,
    entries: Vec<S>,
}

impl<S: Scalar> DistanceMatrix<S> {
    /// Packed index of the pair (m, n) with m < n.
    #[inline]
    fn pack(size: usize, m: usize, n: usize) -> usize {
        debug_assert!(m < n && n < size);
        m * size - m * (m + 1) / 2 + (n - m - 1)
    }

    /// Wrap explicit upper-triangle entries (row-major, m < n order).
    /// Every entry must lie in [0, pi/2].
    pub fn from_upper_triangle(size: usize, entries: Vec<S>) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidEnsemble { n_states: size });
        }
        if entries.len() != size * (size - 1) / 2 {
            return Err(Error::InvalidData(format!(
                "expected {} packed entries for size {}, got {}",
                size * (size - 1) / 2,
                size,
                entries.len()
            )));
        }
        let half_pi = S::FRAC_PI_2();
        for &d in &entries {
            if !(d >= S::zero() && d <= half_pi) {
                return Err(Error::InvalidData(format!(
                    "distance {} outside [0, pi/2]",
                    d.to_f64().unwrap_or(f64::NAN)
                )));
            }
        }
        Ok(DistanceMatrix { size, entries })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Distance between states m and n; zero on the diagonal.
    pub fn get(&self, m: usize, n: usize) -> S {
        use std::cmp::Ordering;
        match m.cmp(&n) {
            Ordering::Equal => S::zero(),
            Ordering::Less => self.entries[Self::pack(self.size, m, n)],
            Ordering::Greater => self.entries[Self::pack(self.size, n, m)],
        }
    }

    /// All (m, n, d) triples with m < n, in packed order.
    pub fn iter_pairs(&self) -> impl Iterator<Item = (usize, usize, S)> + '_ {
        let size = self.size;
        (0..size)
            .flat_map(move |m| (m + 1..size).map(move |n| (m, n)))
            .zip(self.entries.iter())
            .map(|((m, n), &d)| (m, n, d))
    }

    /// Largest entry, or zero for the (impossible) empty triangle.
    pub fn max_entry(&self) -> S {
        self.entries
            .iter()
            .copied()
            .fold(S::zero(), |a, b| if b > a { b } else { a })
    }

    /// Smallest entry.
    pub fn min_entry(&self) -> S {
        self.entries
            .iter()
            .copied()
            .fold(S::FRAC_PI_2(), |a, b| if b < a { b } else { a })
    }

    /// CSV rows `m, n, d` (0-based, 17 significant digits) for oracle exchange.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        for (m, n, d) in self.iter_pairs() {
            writeln!(w, "{},{},{:.16e}", m, n, d)?;
        }
        Ok(())
    }
}

/// All M(M-1)/2 pairwise Fubini-Study distances of an ensemble.
///
/// Entries are computed in parallel; each is an independent pure function of
/// its state pair, so the result does not depend on the schedule.
pub fn distance_matrix<S: Scalar>(ensemble: &StateEnsemble<S>) -> DistanceMatrix<S> {
    let size = ensemble.len();
    let pairs: Vec<(usize, usize)> = (0..size)
        .flat_map(|m| (m + 1..size).map(move |n| (m, n)))
        .collect();
    let entries: Vec<S> = pairs
        .par_iter()
        .map(|&(m, n)| {
            overlap_magnitude(ensemble.state(m), ensemble.state(n)).acos()
        })
        .collect();
    DistanceMatrix { size, entries }
}
