use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{correlated_innovations, gen_cointegrated_with, gen_local_unit_root, gen_var2_with, Block, SimRng};
use crate::error::{AlqrError, Result};
use crate::linalg::Matrix;
use crate::model::{active_set, PredictorPanel, ResponseSeries};

/// Preset scenario or a user-supplied coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawId", into = "RawId")]
pub enum ScenarioId {
    S1,
    S2,
    S3,
    Custom,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawId {
    Num(u64),
    Text(String),
}

impl TryFrom<RawId> for ScenarioId {
    type Error = String;
    fn try_from(raw: RawId) -> std::result::Result<Self, String> {
        match raw {
            RawId::Num(1) => Ok(ScenarioId::S1),
            RawId::Num(2) => Ok(ScenarioId::S2),
            RawId::Num(3) => Ok(ScenarioId::S3),
            RawId::Text(s) if s.eq_ignore_ascii_case("custom") => Ok(ScenarioId::Custom),
            RawId::Text(s) => s.parse::<u64>().map_err(|_| format!("unknown scenario '{s}'")).and_then(|n| RawId::Num(n).try_into()),
            RawId::Num(n) => Err(format!("unknown scenario {n}")),
        }
    }
}

impl From<ScenarioId> for RawId {
    fn from(id: ScenarioId) -> Self {
        match id {
            ScenarioId::S1 => RawId::Num(1),
            ScenarioId::S2 => RawId::Num(2),
            ScenarioId::S3 => RawId::Num(3),
            ScenarioId::Custom => RawId::Text("custom".into()),
        }
    }
}

impl ScenarioId {
    pub fn from_number(n: u64) -> Result<Self> {
        RawId::Num(n).try_into().map_err(AlqrError::Config)
    }

    /// Preset `(beta_z, beta_cx)`; `None` for `Custom`.
    pub fn betas(self) -> Option<([f64; 4], [f64; 8])> {
        const BZ: [f64; 4] = [-0.4, 0.0, 0.0, 0.1];
        const BCX: [f64; 8] = [0.2, -0.4, 0.1, 0.5, 0.0, 0.0, 0.0, 0.0];
        match self {
            ScenarioId::S1 => Some((BZ, BCX)),
            ScenarioId::S2 => Some((BZ, [0.2, -0.4, 0.1, 0.5, 0.2, 0.15, 0.0, 0.0])),
            ScenarioId::S3 => Some(([-0.4, 0.2, 0.15, 0.1], [0.2, -0.4, 0.1, 0.5, 0.2, 0.15, 0.1, -0.05])),
            ScenarioId::Custom => None,
        }
    }
}

/// Distribution of the response noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Normal {
        #[serde(default = "unit")]
        scale: f64,
    },
    StudentT {
        df: f64,
        #[serde(default = "unit")]
        scale: f64,
    },
    /// No noise: the response is an exact linear function of the lagged panel.
    None,
}

fn unit() -> f64 {
    1.0
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::Normal { scale: 1.0 }
    }
}

impl NoiseSpec {
    fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::Normal { scale } if !(scale.is_finite() && scale >= 0.0) => {
                Err(AlqrError::Config(format!("noise scale must be finite and nonnegative, got {scale}")))
            }
            NoiseSpec::StudentT { df, scale } if !(df > 0.0 && df.is_finite() && scale.is_finite() && scale >= 0.0) => {
                Err(AlqrError::Config(format!("invalid Student-t noise (df {df}, scale {scale})")))
            }
            _ => Ok(()),
        }
    }

    fn draw(&self, rng: &mut SimRng, n: usize) -> Vec<f64> {
        match *self {
            NoiseSpec::Normal { scale } => (0..n).map(|_| scale * rng.standard_normal()).collect(),
            NoiseSpec::StudentT { df, scale } => {
                let t = StudentsT::new(0.0, 1.0, df).expect("validated degrees of freedom");
                (0..n).map(|_| scale * t.inverse_cdf(rng.uniform())).collect()
            }
            NoiseSpec::None => vec![0.0; n],
        }
    }
}

/// Full description of a simulated mixed-root panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct ScenarioConfig {
    pub n: usize,
    pub scenario_id: ScenarioId,
    pub beta_z: Vec<f64>,
    pub beta_cx: Vec<f64>,
    pub innovation_rho: f64,
    pub response_noise: NoiseSpec,
    pub seed: u64,
}

/// Config as written in files: preset coefficients may be omitted.
#[derive(Deserialize)]
struct RawConfig {
    n: usize,
    scenario_id: ScenarioId,
    beta_z: Option<Vec<f64>>,
    beta_cx: Option<Vec<f64>>,
    #[serde(default)]
    innovation_rho: f64,
    #[serde(default)]
    response_noise: NoiseSpec,
    #[serde(default)]
    seed: u64,
}

impl TryFrom<RawConfig> for ScenarioConfig {
    type Error = String;
    fn try_from(r: RawConfig) -> std::result::Result<Self, String> {
        let preset = r.scenario_id.betas();
        let pick = |given: Option<Vec<f64>>, preset: Option<Vec<f64>>, name: &str| {
            given.or(preset).ok_or_else(|| format!("{name} is required for a custom scenario"))
        };
        Ok(Self {
            n: r.n,
            scenario_id: r.scenario_id,
            beta_z: pick(r.beta_z, preset.map(|p| p.0.to_vec()), "beta_z")?,
            beta_cx: pick(r.beta_cx, preset.map(|p| p.1.to_vec()), "beta_cx")?,
            innovation_rho: r.innovation_rho,
            response_noise: r.response_noise,
            seed: r.seed,
        })
    }
}

impl ScenarioConfig {
    /// Preset scenario 1, 2 or 3 with standard-normal noise.
    pub fn preset(scenario: u64, n: usize, seed: u64) -> Result<Self> {
        let id = ScenarioId::from_number(scenario)?;
        let (bz, bcx) = id.betas().expect("numbered presets have betas");
        Ok(Self {
            n,
            scenario_id: id,
            beta_z: bz.to_vec(),
            beta_cx: bcx.to_vec(),
            innovation_rho: 0.0,
            response_noise: NoiseSpec::default(),
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(AlqrError::Config(format!("n must be at least 10, got {}", self.n)));
        }
        if self.beta_z.len() != 4 || self.beta_cx.len() != 8 {
            return Err(AlqrError::Config(format!(
                "beta_z needs 4 and beta_cx 8 entries, got {} and {}",
                self.beta_z.len(),
                self.beta_cx.len()
            )));
        }
        if self.beta_z.iter().chain(&self.beta_cx).any(|b| !b.is_finite()) {
            return Err(AlqrError::Config("coefficients must be finite".into()));
        }
        if let Some((bz, bcx)) = self.scenario_id.betas() {
            if self.beta_z != bz || self.beta_cx != bcx {
                return Err(AlqrError::Config(format!(
                    "coefficients differ from preset scenario {:?}; use scenario_id \"custom\"",
                    self.scenario_id
                )));
            }
        }
        if !(0.0..1.0).contains(&self.innovation_rho) {
            return Err(AlqrError::Config(format!("innovation_rho must lie in [0, 1), got {}", self.innovation_rho)));
        }
        self.response_noise.validate()
    }

    /// The 12 true coefficients in panel column order.
    pub fn true_beta(&self) -> Vec<f64> {
        self.beta_z.iter().chain(&self.beta_cx).copied().collect()
    }
}

/// A simulated panel together with its generating truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedPanel {
    pub z: Matrix,
    pub xc: Matrix,
    pub x: Matrix,
    pub panel: PredictorPanel,
    pub y: ResponseSeries,
    pub true_beta: Vec<f64>,
    pub true_active: Vec<usize>,
}

/// Column names of the simulated panel.
pub fn column_names() -> Vec<String> {
    let mut names = Vec::with_capacity(12);
    for prefix in ["z", "xc", "x"] {
        for j in 1..=4 {
            names.push(format!("{prefix}{j}"));
        }
    }
    names
}

pub fn gen_scenario(config: &ScenarioConfig) -> Result<MixedPanel> {
    gen_scenario_stream(config, 0)
}

/// Scenario draw on stream `stream_id`; all four blocks use their own keys.
pub fn gen_scenario_stream(config: &ScenarioConfig, stream_id: u64) -> Result<MixedPanel> {
    config.validate()?;
    let n = config.n;
    let seed = config.seed;
    let z = gen_var2_with(n, &mut SimRng::new(seed, Block::Stationary, stream_id))?;
    let xc = gen_cointegrated_with(n, &mut SimRng::new(seed, Block::Cointegrated, stream_id))?;
    let mut ur = SimRng::new(seed, Block::UnitRoot, stream_id);
    let v = correlated_innovations(&mut ur, n, 4, config.innovation_rho)?;
    let x = gen_local_unit_root(&[0.0; 4], &v)?;
    let eps = config.response_noise.draw(&mut SimRng::new(seed, Block::ResponseNoise, stream_id), n);

    let mut values = Vec::with_capacity(n * 12);
    for t in 0..n {
        values.extend_from_slice(z.row(t));
        values.extend_from_slice(xc.row(t));
        values.extend_from_slice(x.row(t));
    }
    let panel = PredictorPanel::new(values, n, column_names(), None)?;
    let beta = config.true_beta();
    let mut y = Vec::with_capacity(n);
    y.push(eps[0]);
    for t in 1..n {
        let lin: f64 = panel.row(t - 1).iter().zip(&beta).map(|(a, b)| a * b).sum();
        y.push(lin + eps[t]);
    }
    Ok(MixedPanel {
        z,
        xc,
        x,
        panel,
        y: ResponseSeries::new(y)?,
        true_active: active_set(&beta),
        true_beta: beta,
    })
}
