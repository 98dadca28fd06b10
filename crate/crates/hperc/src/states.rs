//! Haar-uniform random pure states with reproducible, splittable randomness.
//!
//! A state of dimension D is drawn by sampling 2D standard normals
//! x_1..x_{2D} and setting u_j = (x_{2j-1} + i·x_{2j}) / r with
//! r = ||x||_2. Normalizing an isotropic Gaussian vector is exactly the
//! Haar-uniform measure on the unit sphere of C^D.
//!
//! Randomness contract (frozen for 0.x): the stream for a replicate is
//! ChaCha12 keyed with SHA-256("hperc.states.v1" || seed || sample_index),
//! normals drawn via the `rand_distr` ziggurat. Replicates with different
//! `sample_index` therefore use statistically independent streams and can be
//! generated in parallel with no shared RNG state.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::{lit, pairwise_sum, Scalar};

const STREAM_TAG: &[u8] = b"hperc.states.v1";

/// Tolerance on |Σ|u_j|^2 - 1| accepted by [`QuantumState::from_amplitudes`].
pub const NORM_TOLERANCE: f64 = 1e-12;

/// A pure state: D complex amplitudes of unit 2-norm.
///
/// `Vec<Complex<S>>` stores re/im interleaved in one flat allocation, which
/// keeps inner products cache-friendly up to D = 2^14.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState<S> {
    amplitudes: Vec<Complex<S>>,
}

impl<S: Scalar> QuantumState<S> {
    /// Wrap explicit amplitudes, checking dim >= 2 and unit norm (1e-12).
    pub fn from_amplitudes(amplitudes: Vec<Complex<S>>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::InvalidDimension {
                dim: amplitudes.len(),
            });
        }
        let state = QuantumState { amplitudes };
        let deviation = (state.norm_sqr() - S::one()).abs();
        if deviation > lit(NORM_TOLERANCE) {
            return Err(Error::NotNormalized {
                deviation: deviation.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(state)
    }

    /// The computational basis state |k> in dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension { dim });
        }
        assert!(k < dim, "basis index {k} out of range for dim {dim}");
        let mut amplitudes = vec![Complex::new(S::zero(), S::zero()); dim];
        amplitudes[k] = Complex::new(S::one(), S::zero());
        Ok(QuantumState { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex<S>] {
        &self.amplitudes
    }

    /// Σ_j |u_j|^2, via pairwise summation.
    pub fn norm_sqr(&self) -> S {
        let sq: Vec<S> = self.amplitudes.iter().map(|a| a.norm_sqr()).collect();
        pairwise_sum(&sq)
    }
}

/// Build a state from 2·dim normal draws; `None` if the draw vector is all
/// zero (probability zero, resampled by the caller).
fn state_from_normals<S: Scalar>(draws: &[S]) -> Option<QuantumState<S>> {
    debug_assert!(draws.len().is_multiple_of(2));
    let sq: Vec<S> = draws.iter().map(|&x| x * x).collect();
    let r_sqr = pairwise_sum(&sq);
    if r_sqr <= S::zero() {
        return None;
    }
    let r = r_sqr.sqrt();
    let amplitudes = draws
        .chunks_exact(2)
        .map(|xy| Complex::new(xy[0] / r, xy[1] / r))
        .collect();
    Some(QuantumState { amplitudes })
}

/// Draw one Haar-uniform state of dimension `dim` from `rng`.
pub fn sample_state<S: Scalar, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<QuantumState<S>> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim });
    }
    let mut draws = vec![S::zero(); 2 * dim];
    loop {
        for x in draws.iter_mut() {
            *x = S::standard_normal(rng);
        }
        if let Some(state) = state_from_normals(&draws) {
            return Ok(state);
        }
    }
}

/// The deterministic RNG for one `(seed, sample_index)` replicate.
pub fn stream_rng(seed: u64, sample_index: u64) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(STREAM_TAG);
    hasher.update(seed.to_le_bytes());
    hasher.update(sample_index.to_le_bytes());
    let key: [u8; 32] = hasher.finalize().into();
    ChaCha12Rng::from_seed(key)
}

/// M Haar-uniform states sharing one dimension, plus the replicate identity
/// that regenerates them bit-identically.
#[derive(Debug, Clone)]
pub struct StateEnsemble<S> {
    states: Vec<QuantumState<S>>,
    dim: usize,
    seed: u64,
    sample_index: u64,
}

impl<S: Scalar> StateEnsemble<S> {
    pub fn states(&self) -> &[QuantumState<S>] {
        &self.states
    }

    pub fn state(&self, n: usize) -> &QuantumState<S> {
        &self.states[n]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sample_index(&self) -> u64 {
        self.sample_index
    }

    /// Debug dump as CSV rows `n, j, re, im` (17 significant digits), for
    /// cross-language oracle checks.
    pub fn write_amplitudes_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        for (n, state) in self.states.iter().enumerate() {
            for (j, a) in state.amplitudes().iter().enumerate() {
                writeln!(w, "{},{},{:.16e},{:.16e}", n, j, a.re, a.im)?;
            }
        }
        Ok(())
    }
}

/// Sample M independent Haar states from the `(seed, sample_index)` stream.
pub fn sample_ensemble<S: Scalar>(
    n_states: usize,
    dim: usize,
    seed: u64,
    sample_index: u64,
) -> Result<StateEnsemble<S>> {
    if n_states < 2 {
        return Err(Error::InvalidEnsemble { n_states });
    }
    if dim < 2 {
        return Err(Error::InvalidDimension { dim });
    }
    let mut rng = stream_rng(seed, sample_index);
    let states = (0..n_states)
        .map(|_| sample_state(dim, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(StateEnsemble {
        states,
        dim,
        seed,
        sample_index,
    })
}
