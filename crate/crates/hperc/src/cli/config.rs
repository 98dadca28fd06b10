//! Command configuration: every parameter can come from flags or from a JSON
//! config file (`--config`), flags winning. Each command's manifest embeds
//! the fully resolved config, and that document can be fed back through
//! `--config` to re-execute the identical run.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::percolation::DEFAULT_MEMORY_BUDGET;

/// Default bisection tolerance on the critical threshold.
pub const DEFAULT_TOL: f64 = 1e-4;
/// Default replicate count per (N, M) grid point.
pub const DEFAULT_SAMPLES: usize = 100;
/// Default qubit grid for sweeps (every point fits the default budget).
pub const DEFAULT_SWEEP_QUBITS: [u32; 8] = [7, 8, 9, 10, 11, 12, 13, 14];
/// Default qubit window admitted to the meta-law fits.
pub const DEFAULT_FIT_QUBIT_WINDOW: (u32, u32) = (7, 14);
/// Default pair count for concentration runs.
pub const DEFAULT_PAIRS: u64 = 100_000;

/// Load a JSON config file. A manifest produced by an earlier run is also
/// accepted: its embedded `config` object is used.
fn load_config_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))?;
    let config_value = match value.get("config") {
        Some(inner) => inner.clone(),
        None => value,
    };
    serde_json::from_value(config_value)
        .map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))
}

fn merge<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

/// Parse a `min:max:count` log grid spec.
fn parse_log_grid(spec: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "log grid spec must be min:max:count, got {spec:?}"
        )));
    }
    let parse = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::InvalidArgument(format!("bad log grid component {s:?}")))
    };
    Ok((parse(parts[0])?, parse(parts[1])?, parse(parts[2])?))
}

/// `count` log-spaced integers in [min, max], deduplicated and ascending.
pub fn log_spaced_states(min: usize, max: usize, count: usize) -> Result<Vec<usize>> {
    if min < 2 || max < min || count < 1 {
        return Err(Error::InvalidArgument(format!(
            "bad log grid: min={min} max={max} count={count}"
        )));
    }
    if count == 1 {
        return Ok(vec![min]);
    }
    let (lo, hi) = ((min as f64).ln(), (max as f64).ln());
    let mut out: Vec<usize> = (0..count)
        .map(|k| {
            let t = k as f64 / (count - 1) as f64;
            (lo + t * (hi - lo)).exp().round() as usize
        })
        .collect();
    out.dedup();
    Ok(out)
}

fn qubits_to_dims(qubits: &[u32]) -> Result<Vec<usize>> {
    qubits
        .iter()
        .map(|&n| {
            if n == 0 || n >= usize::BITS {
                Err(Error::InvalidArgument(format!(
                    "qubit count {n} out of range (need 1..{})",
                    usize::BITS
                )))
            } else {
                Ok(1usize << n)
            }
        })
        .collect()
}

// ---------------------------------------------------------------- percolate

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PercolateArgs {
    /// Number of qubits N; the Hilbert space has dimension 2^N
    #[arg(long)]
    pub qubits: Option<u32>,
    /// Number of random states M
    #[arg(long)]
    pub states: Option<usize>,
    /// Base seed of the random stream
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replicate index within the seed
    #[arg(long)]
    pub sample_index: Option<u64>,
    /// Bisection tolerance on the critical threshold
    #[arg(long)]
    pub tol: Option<f64>,
    /// Fixed MSC band tolerance; omitted means eps = dS
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Working-set refusal limit in bytes
    #[arg(long)]
    pub memory_budget: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON config file; explicit flags override its values
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Fully resolved `percolate` configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PercolateConfig {
    pub qubits: u32,
    pub states: usize,
    pub seed: u64,
    pub sample_index: u64,
    pub tol: f64,
    pub epsilon: Option<f64>,
    pub memory_budget: u64,
    /// Output directory; not part of the persisted config, so manifests
    /// are byte-identical wherever the run lands.
    #[serde(skip)]
    pub out: PathBuf,
}

impl PercolateConfig {
    pub fn resolve(args: PercolateArgs) -> Result<Self> {
        let file: PercolateArgs = match &args.config {
            Some(path) => load_config_file(path)?,
            None => PercolateArgs::default(),
        };
        let qubits = merge(args.qubits, file.qubits)
            .ok_or_else(|| Error::InvalidArgument("--qubits is required".into()))?;
        let states = merge(args.states, file.states)
            .ok_or_else(|| Error::InvalidArgument("--states is required".into()))?;
        let config = PercolateConfig {
            qubits,
            states,
            seed: merge(args.seed, file.seed).unwrap_or(0),
            sample_index: merge(args.sample_index, file.sample_index).unwrap_or(0),
            tol: merge(args.tol, file.tol).unwrap_or(DEFAULT_TOL),
            epsilon: merge(args.epsilon, file.epsilon),
            memory_budget: merge(args.memory_budget, file.memory_budget)
                .unwrap_or(DEFAULT_MEMORY_BUDGET),
            out: merge(args.out, file.out).unwrap_or_else(|| PathBuf::from(".")),
        };
        config.dim()?;
        if config.states < 2 {
            return Err(Error::InvalidEnsemble {
                n_states: config.states,
            });
        }
        Ok(config)
    }

    pub fn dim(&self) -> Result<usize> {
        Ok(qubits_to_dims(&[self.qubits])?[0])
    }
}

// -------------------------------------------------------------------- sweep

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepArgs {
    /// Qubit counts N, comma separated (default 7,8,9,10)
    #[arg(long, value_delimiter = ',')]
    pub qubits: Option<Vec<u32>>,
    /// Explicit state counts M, comma separated
    #[arg(long, value_delimiter = ',')]
    pub states: Option<Vec<usize>>,
    /// Log-spaced state grid as min:max:count (default 2:200:25)
    #[arg(long, conflicts_with = "states")]
    pub states_log: Option<String>,
    /// Replicates per grid point
    #[arg(long)]
    pub samples: Option<usize>,
    /// Base seed of the random streams
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bisection tolerance on the critical threshold
    #[arg(long)]
    pub tol: Option<f64>,
    /// Fixed MSC band tolerance; omitted means eps = dS
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Working-set refusal limit in bytes
    #[arg(long)]
    pub memory_budget: Option<u64>,
    /// Also write per-replicate thresholds
    #[arg(long)]
    pub per_sample: bool,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Skip (dim, M) rows already present in the output CSV
    #[arg(long)]
    #[serde(skip)]
    pub resume: bool,
    /// JSON config file; explicit flags override its values
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Fully resolved `sweep` configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCmdConfig {
    pub qubits: Vec<u32>,
    pub states: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub epsilon: Option<f64>,
    pub memory_budget: u64,
    pub per_sample: bool,
    /// Output directory; not part of the persisted config, so manifests
    /// are byte-identical wherever the run lands.
    #[serde(skip)]
    pub out: PathBuf,
}

impl SweepCmdConfig {
    pub fn resolve(args: SweepArgs) -> Result<(Self, bool)> {
        let file: SweepArgs = match &args.config {
            Some(path) => load_config_file(path)?,
            None => SweepArgs::default(),
        };
        let states = match (
            args.states,
            args.states_log,
            file.states,
            file.states_log,
        ) {
            (Some(list), _, _, _) | (None, None, Some(list), _) => list,
            (None, Some(spec), _, _) | (None, None, None, Some(spec)) => {
                let (min, max, count) = parse_log_grid(&spec)?;
                log_spaced_states(min, max, count)?
            }
            (None, None, None, None) => log_spaced_states(2, 200, 25)?,
        };
        let config = SweepCmdConfig {
            qubits: merge(args.qubits, file.qubits)
                .unwrap_or_else(|| DEFAULT_SWEEP_QUBITS.to_vec()),
            states,
            samples: merge(args.samples, file.samples).unwrap_or(DEFAULT_SAMPLES),
            seed: merge(args.seed, file.seed).unwrap_or(0),
            tol: merge(args.tol, file.tol).unwrap_or(DEFAULT_TOL),
            epsilon: merge(args.epsilon, file.epsilon),
            memory_budget: merge(args.memory_budget, file.memory_budget)
                .unwrap_or(DEFAULT_MEMORY_BUDGET),
            per_sample: args.per_sample || file.per_sample,
            out: merge(args.out, file.out).unwrap_or_else(|| PathBuf::from(".")),
        };
        if config.qubits.is_empty() || config.states.is_empty() {
            return Err(Error::InvalidArgument("empty sweep grid".into()));
        }
        config.dims()?;
        Ok((config, args.resume || file.resume))
    }

    pub fn dims(&self) -> Result<Vec<usize>> {
        qubits_to_dims(&self.qubits)
    }
}

// ---------------------------------------------------------------------- fit

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitArgs {
    /// Sweep CSV to fit
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Smallest M admitted to the fit window
    #[arg(long)]
    pub m_min: Option<usize>,
    /// Largest M admitted to the fit window
    #[arg(long)]
    pub m_max: Option<usize>,
    /// Smallest qubit count admitted to the fit window
    #[arg(long)]
    pub n_min: Option<u32>,
    /// Largest qubit count admitted to the fit window
    #[arg(long)]
    pub n_max: Option<u32>,
    /// Weight points by their standard errors
    #[arg(long)]
    pub weighted: bool,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON config file; explicit flags override its values
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Fully resolved `fit` configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub input: PathBuf,
    pub m_min: usize,
    pub m_max: usize,
    pub n_min: u32,
    pub n_max: u32,
    pub weighted: bool,
    /// Output directory; not part of the persisted config, so manifests
    /// are byte-identical wherever the run lands.
    #[serde(skip)]
    pub out: PathBuf,
}

impl FitConfig {
    pub fn resolve(args: FitArgs) -> Result<Self> {
        let file: FitArgs = match &args.config {
            Some(path) => load_config_file(path)?,
            None => FitArgs::default(),
        };
        let config = FitConfig {
            input: merge(args.input, file.input)
                .ok_or_else(|| Error::InvalidArgument("--input is required".into()))?,
            m_min: merge(args.m_min, file.m_min).unwrap_or(2),
            m_max: merge(args.m_max, file.m_max).unwrap_or(200),
            n_min: merge(args.n_min, file.n_min).unwrap_or(DEFAULT_FIT_QUBIT_WINDOW.0),
            n_max: merge(args.n_max, file.n_max).unwrap_or(DEFAULT_FIT_QUBIT_WINDOW.1),
            weighted: args.weighted || file.weighted,
            out: merge(args.out, file.out).unwrap_or_else(|| PathBuf::from(".")),
        };
        if config.m_min < 2 || config.m_max < config.m_min {
            return Err(Error::InvalidArgument(format!(
                "bad fit window M in [{}, {}]",
                config.m_min, config.m_max
            )));
        }
        if config.n_min < 1 || config.n_max < config.n_min || config.n_max >= usize::BITS {
            return Err(Error::InvalidArgument(format!(
                "bad fit window N in [{}, {}]",
                config.n_min, config.n_max
            )));
        }
        Ok(config)
    }

    /// Admitted dimension range [2^n_min, 2^n_max].
    pub fn dim_window(&self) -> (usize, usize) {
        (1usize << self.n_min, 1usize << self.n_max)
    }
}

// ------------------------------------------------------------- concentration

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcentrationArgs {
    /// Qubit counts N, comma separated (default 6,7,8)
    #[arg(long, value_delimiter = ',')]
    pub qubits: Option<Vec<u32>>,
    /// Explicit deviation values, comma separated
    #[arg(long, value_delimiter = ',', conflicts_with = "epsilon_inverse_dim")]
    pub epsilon: Option<Vec<f64>>,
    /// Use eps = 1/D for each dimension (the default when --epsilon is absent)
    #[arg(long)]
    pub epsilon_inverse_dim: bool,
    /// Independent Haar pairs per (D, eps) row
    #[arg(long)]
    pub pairs: Option<u64>,
    /// Base seed of the random streams
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON config file; explicit flags override its values
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Fully resolved `concentration` configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcentrationConfig {
    pub qubits: Vec<u32>,
    /// Explicit deviations, or None for eps = 1/D per dimension.
    pub epsilon: Option<Vec<f64>>,
    pub pairs: u64,
    pub seed: u64,
    /// Output directory; not part of the persisted config, so manifests
    /// are byte-identical wherever the run lands.
    #[serde(skip)]
    pub out: PathBuf,
}

impl ConcentrationConfig {
    pub fn resolve(args: ConcentrationArgs) -> Result<Self> {
        let file: ConcentrationArgs = match &args.config {
            Some(path) => load_config_file(path)?,
            None => ConcentrationArgs::default(),
        };
        let epsilon = if args.epsilon_inverse_dim {
            None
        } else {
            merge(args.epsilon, file.epsilon)
        };
        let config = ConcentrationConfig {
            qubits: merge(args.qubits, file.qubits).unwrap_or_else(|| vec![6, 7, 8]),
            epsilon,
            pairs: merge(args.pairs, file.pairs).unwrap_or(DEFAULT_PAIRS),
            seed: merge(args.seed, file.seed).unwrap_or(0),
            out: merge(args.out, file.out).unwrap_or_else(|| PathBuf::from(".")),
        };
        if config.qubits.is_empty() {
            return Err(Error::InvalidArgument("empty qubit list".into()));
        }
        if let Some(eps) = &config.epsilon {
            if eps.is_empty() {
                return Err(Error::InvalidArgument("empty epsilon list".into()));
            }
        }
        config.dims()?;
        Ok(config)
    }

    pub fn dims(&self) -> Result<Vec<usize>> {
        qubits_to_dims(&self.qubits)
    }

    /// The (dim, eps) grid in row order.
    pub fn grid(&self) -> Result<Vec<(usize, f64)>> {
        let dims = self.dims()?;
        let mut grid = Vec::new();
        for &dim in &dims {
            match &self.epsilon {
                Some(eps_list) => {
                    for &eps in eps_list {
                        grid.push((dim, eps));
                    }
                }
                None => grid.push((dim, 1.0 / dim as f64)),
            }
        }
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_covers_endpoints_without_duplicates() {
        let grid = log_spaced_states(2, 200, 25).unwrap();
        assert_eq!(*grid.first().unwrap(), 2);
        assert_eq!(*grid.last().unwrap(), 200);
        assert!(grid.len() >= 20, "only {} values", grid.len());
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn log_grid_rejects_bad_bounds() {
        assert!(log_spaced_states(1, 10, 5).is_err());
        assert!(log_spaced_states(10, 5, 5).is_err());
        assert!(log_spaced_states(2, 10, 0).is_err());
    }

    #[test]
    fn qubit_zero_is_rejected() {
        assert!(qubits_to_dims(&[0]).is_err());
        assert_eq!(qubits_to_dims(&[1, 10]).unwrap(), vec![2, 1024]);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"qubits": 3, "states": 10, "seed": 5}"#).unwrap();
        let args = PercolateArgs {
            seed: Some(9),
            config: Some(path),
            ..Default::default()
        };
        let cfg = PercolateConfig::resolve(args).unwrap();
        assert_eq!(cfg.qubits, 3);
        assert_eq!(cfg.states, 10);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.tol, DEFAULT_TOL);
    }

    #[test]
    fn manifest_wrapped_config_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        std::fs::write(
            &path,
            r#"{"tool": "hperc", "command": "percolate",
                "config": {"qubits": 2, "states": 4}}"#,
        )
        .unwrap();
        let args = PercolateArgs {
            config: Some(path),
            ..Default::default()
        };
        let cfg = PercolateConfig::resolve(args).unwrap();
        assert_eq!((cfg.qubits, cfg.states), (2, 4));
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"qubitz": 3}"#).unwrap();
        let args = PercolateArgs {
            config: Some(path),
            ..Default::default()
        };
        assert!(PercolateConfig::resolve(args).is_err());
    }

    #[test]
    fn sweep_defaults_mirror_the_protocol() {
        let (cfg, resume) = SweepCmdConfig::resolve(SweepArgs::default()).unwrap();
        assert_eq!(cfg.qubits, vec![7, 8, 9, 10, 11, 12, 13, 14]);
        assert_eq!(cfg.samples, 100);
        assert_eq!(*cfg.states.first().unwrap(), 2);
        assert_eq!(*cfg.states.last().unwrap(), 200);
        assert!(!resume);
        // Every default grid point clears the default memory budget.
        for &n in &cfg.qubits {
            let bytes = crate::percolation::estimate_bytes::<f64>(1usize << n, 200);
            assert!(bytes <= cfg.memory_budget);
        }
    }

    #[test]
    fn fit_window_defaults_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("s.csv");
        std::fs::write(&input, "x").unwrap();
        let args = FitArgs {
            input: Some(input.clone()),
            ..Default::default()
        };
        let cfg = FitConfig::resolve(args).unwrap();
        assert_eq!((cfg.n_min, cfg.n_max), (7, 14));
        assert_eq!(cfg.dim_window(), (128, 16384));
        let bad = FitArgs {
            input: Some(input),
            n_min: Some(9),
            n_max: Some(8),
            ..Default::default()
        };
        assert!(FitConfig::resolve(bad).is_err());
    }

    #[test]
    fn concentration_grid_defaults_to_inverse_dim() {
        let cfg = ConcentrationConfig::resolve(ConcentrationArgs::default()).unwrap();
        let grid = cfg.grid().unwrap();
        assert_eq!(grid[0], (64, 1.0 / 64.0));
        assert_eq!(grid.len(), 3);
    }
}
