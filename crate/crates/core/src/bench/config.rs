use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::InitMethod;
use crate::linalg::Field;

/// Trials are successful when their final relative error is below this.
pub const SUCCESS_THRESHOLD: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Initializer accuracy against m/n.
    InitBench,
    /// Relative error per iteration on noisy data.
    Converge,
    /// Iterations and wall time to reach the success threshold.
    Timing,
    /// Success rate against m/n.
    Success,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::InitBench => "init-bench",
            Experiment::Converge => "converge",
            Experiment::Timing => "timing",
            Experiment::Success => "success",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Gn,
    Wf,
    Altmin,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Gn, SolverKind::Wf, SolverKind::Altmin];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Gn => "gn",
            SolverKind::Wf => "wf",
            SolverKind::Altmin => "altmin",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gn" | "gauss-newton" => Ok(SolverKind::Gn),
            "wf" | "wirtinger-flow" => Ok(SolverKind::Wf),
            "altmin" | "alt-min" | "er" => Ok(SolverKind::Altmin),
            "taf" => Err(Error::Config("TAF is not implemented".into())),
            other => Err(Error::Config(format!("unknown solver `{other}`"))),
        }
    }
}

/// Ratios `m/n` given as `start:stop:step`, a comma list, or one value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec(pub Vec<f64>);

impl GridSpec {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Number of measurements for each ratio, `round(ratio n)`.
    pub fn measurements(&self, n: usize) -> Vec<usize> {
        self.0.iter().map(|r| (r * n as f64).round() as usize).collect()
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad m/n grid `{s}`"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let values: Vec<f64> = if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            let (start, stop, step) = match parts.as_slice() {
                [a, b] => (num(a)?, num(b)?, 1.0),
                [a, b, c] => (num(a)?, num(b)?, num(c)?),
                _ => return Err(bad()),
            };
            if !(step > 0.0) || stop < start {
                return Err(bad());
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|i| start + i as f64 * step).collect()
        } else {
            s.split(',').map(num).collect::<Result<_>>()?
        };
        if values.is_empty() || values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(bad());
        }
        Ok(GridSpec(values))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n: usize,
    pub m_over_n: GridSpec,
    pub trials: usize,
    pub noise_sigma: f64,
    pub signal_field: Field,
    pub ensemble_field: Field,
    /// Trial `t` uses seed `seed + t`.
    pub seed: u64,
    pub methods: Vec<String>,
    pub out_dir: Option<PathBuf>,
    pub emit_svg: bool,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    pub power_iters: usize,
    /// Overrides every solver's iteration cap.
    pub max_iters: Option<usize>,
    pub success_threshold: f64,
}

impl ExperimentConfig {
    /// Desk-scale defaults for each experiment.
    pub fn defaults(experiment: Experiment) -> Self {
        let base = ExperimentConfig {
            experiment,
            n: 128,
            m_over_n: GridSpec(vec![5.0]),
            trials: 10,
            noise_sigma: 0.0,
            signal_field: Field::Real,
            ensemble_field: Field::Complex,
            seed: 7,
            methods: SolverKind::ALL.iter().map(|s| s.name().to_string()).collect(),
            out_dir: None,
            emit_svg: false,
            threads: 0,
            power_iters: 50,
            max_iters: None,
            success_threshold: SUCCESS_THRESHOLD,
        };
        match experiment {
            Experiment::InitBench => ExperimentConfig {
                m_over_n: GridSpec((2..=11).map(|k| 2.0 * k as f64).collect()),
                trials: 50,
                signal_field: Field::Complex,
                methods: InitMethod::ALL.iter().map(|m| m.name().to_string()).collect(),
                ..base
            },
            Experiment::Converge => ExperimentConfig { trials: 1, noise_sigma: 0.1, ..base },
            Experiment::Timing => base,
            Experiment::Success => ExperimentConfig {
                m_over_n: GridSpec((0..19).map(|k| 1.0 + 0.5 * k as f64).collect()),
                trials: 100,
                ..base
            },
        }
    }

    pub fn init_methods(&self) -> Result<Vec<InitMethod>> {
        self.methods.iter().map(|s| s.parse::<InitMethod>().map_err(|e| Error::Config(e.to_string()))).collect()
    }

    pub fn solver_methods(&self) -> Result<Vec<SolverKind>> {
        self.methods.iter().map(|s| s.parse()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.m_over_n.values().is_empty() {
            return Err(Error::Config("m/n grid is empty".into()));
        }
        if self.m_over_n.measurements(self.n).contains(&0) {
            return Err(Error::Config("a grid point rounds to zero measurements".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("sigma must be non-negative".into()));
        }
        if !(self.success_threshold > 0.0) {
            return Err(Error::Config("success threshold must be positive".into()));
        }
        if self.power_iters == 0 {
            return Err(Error::Config("power_iters must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if self.signal_field == Field::Complex && self.ensemble_field == Field::Real {
            return Err(Error::Config("a complex signal needs complex sensing vectors".into()));
        }
        match self.experiment {
            Experiment::InitBench => {
                self.init_methods()?;
            }
            _ => {
                self.solver_methods()?;
            }
        }
        Ok(())
    }

    pub fn threshold_overridden(&self) -> bool {
        self.success_threshold != SUCCESS_THRESHOLD
    }
}
