//! Experiment configuration. A config file is either a bare parameter
//! object (the eight coefficients) or a full document with a `params` key
//! and optional per-subsystem sections.

use serde::{Deserialize, Serialize};
use slvq_core::model::RawParams;
use slvq_core::sde::{Scheme, SimConfig, StoppingKind};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSection {
    /// Lower truncation; must be positive for model grids.
    pub eps_lo: f64,
    /// Upper truncation; `null`/absent means automatic.
    pub l_hi: Option<f64>,
    /// Interior nodes per axis.
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            eps_lo: 1e-3,
            l_hi: None,
            n: 160,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSection {
    pub dt: f64,
    pub t_max: f64,
    pub abs_threshold: f64,
    pub seed: u64,
    pub n_paths: usize,
    pub scheme: Scheme,
    pub stopping: StoppingKind,
    pub x0: [f64; 2],
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            dt: 1e-3,
            t_max: 50.0,
            abs_threshold: 1e-8,
            seed: 1,
            n_paths: 2000,
            scheme: Scheme::EulerZ,
            stopping: StoppingKind::TBoundary,
            x0: [1.0, 1.0],
        }
    }
}

impl SimSection {
    pub fn to_sim_config(self) -> SimConfig {
        SimConfig {
            dt: self.dt,
            t_max: self.t_max,
            abs_threshold: self.abs_threshold,
            seed: self.seed,
            n_paths: self.n_paths,
            scheme: self.scheme,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct FvSection {
    pub n_particles: usize,
    /// Burn-in in units of `1/lambda1`; the design default is 5.
    pub t_burn_over_lambda: f64,
    pub t_sample_over_lambda: f64,
    /// Histogram nodes per axis.
    pub hist_n: usize,
}

impl Default for FvSection {
    fn default() -> Self {
        FvSection {
            n_particles: 2000,
            t_burn_over_lambda: 5.0,
            t_sample_over_lambda: 40.0,
            hist_n: 36,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanSection {
    pub c_values: Vec<f64>,
    pub c_tol: f64,
    pub n_2d: usize,
    pub n_1d: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection {
            c_values: (1..=9).map(|i| i as f64 / 10.0).collect(),
            c_tol: 1e-2,
            n_2d: 160,
            n_1d: 1200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsSection {
    pub radii: Vec<f64>,
    pub samples_per_shell: usize,
    pub eps_trunc: f64,
    pub series_k_max: usize,
    pub betas: Vec<f64>,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        let d = slvq_core::model::DiagnosticsConfig::default();
        DiagnosticsSection {
            radii: d.radii,
            samples_per_shell: d.samples_per_shell,
            eps_trunc: d.eps_trunc,
            series_k_max: d.series_k_max,
            betas: d.betas,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: RawParams,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub grid_1d: Option<GridSection>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub fv: FvSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub out_dir: Option<String>,
    /// Number of eigenpairs for `spectrum`.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Exit-split sample size for `classify`.
    #[serde(default = "default_exit_paths")]
    pub exit_paths: usize,
    /// Number of trajectories `simulate` dumps to `paths.csv` (0 = none).
    #[serde(default)]
    pub record_paths: usize,
}

fn default_k() -> usize {
    2
}

fn default_exit_paths() -> usize {
    4000
}

impl ExperimentConfig {
    pub fn from_params(params: RawParams) -> Self {
        ExperimentConfig {
            params,
            grid: GridSection::default(),
            grid_1d: None,
            sim: SimSection::default(),
            fv: FvSection::default(),
            scan: ScanSection::default(),
            diagnostics: DiagnosticsSection::default(),
            out_dir: None,
            k: default_k(),
            exit_paths: default_exit_paths(),
            record_paths: 0,
        }
    }

    /// Parses a full config document, falling back to a bare parameter
    /// object.
    pub fn parse(bytes: &[u8]) -> Result<Self, String> {
        let full = serde_json::from_slice::<ExperimentConfig>(bytes);
        match full {
            Ok(cfg) => Ok(cfg),
            Err(full_err) => match serde_json::from_slice::<RawParams>(bytes) {
                Ok(params) => Ok(ExperimentConfig::from_params(params)),
                Err(_) => Err(format!("config parse error: {full_err}")),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_params_accepted() {
        let doc = br#"{"gamma1":1,"gamma2":1,"r1":1,"r2":1,"c11":1,"c12":0,"c21":0,"c22":1}"#;
        let cfg = ExperimentConfig::parse(doc).unwrap();
        assert_eq!(cfg.params.c12, 0.0);
        assert_eq!(cfg.grid.n, 160);
    }

    #[test]
    fn round_trip_is_identity() {
        let doc =
            br#"{"params":{"gamma1":1,"gamma2":2,"r1":1,"r2":1,"c11":1,"c12":1,"c21":2,"c22":1},
                       "grid":{"eps_lo":1e-3,"l_hi":8.0,"n":100},
                       "sim":{"dt":0.002,"seed":9}}"#;
        let cfg = ExperimentConfig::parse(doc).unwrap();
        let ser = serde_json::to_vec(&cfg).unwrap();
        let cfg2 = ExperimentConfig::parse(&ser).unwrap();
        let ser2 = serde_json::to_vec(&cfg2).unwrap();
        assert_eq!(ser, ser2);
    }

    #[test]
    fn garbage_rejected() {
        assert!(ExperimentConfig::parse(b"{\"nope\": 1}").is_err());
    }
}
