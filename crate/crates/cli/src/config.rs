//! JSON configuration documents.

use std::path::Path;

use qfnet_core::montecarlo::Sampling;
use qfnet_core::optimizer::AmplitudeGrid;
use qfnet_core::{ChannelModel, CodeLength, Encoding, ProtocolParams};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub schema_version: u32,
    pub protocol: ProtocolSection,
    pub channel: ChannelSection,
    #[serde(default)]
    pub encoding: EncodingSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    pub montecarlo: Option<MonteCarloSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub n: u64,
    pub c: f64,
    pub delta: f64,
    pub epsilon: f64,
    #[serde(rename = "N")]
    pub parties: usize,
    #[serde(default)]
    pub code_length: CodeLength,
}

/// A single value applies to every sender.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PerSender {
    One(f64),
    Each(Vec<f64>),
}

impl PerSender {
    fn expand(&self, parties: usize) -> Vec<f64> {
        match self {
            PerSender::One(v) => vec![*v; parties],
            PerSender::Each(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub sqrt_eta: Option<PerSender>,
    pub eta: Option<PerSender>,
    pub dark_count: f64,
    #[serde(default = "one")]
    pub visibility: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodingSection {
    #[serde(default)]
    pub variant: Encoding,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    /// `[min, max]` for every amplitude.
    #[serde(default = "default_bounds")]
    pub bounds: [f64; 2],
    /// Coarse-grid points per coordinate.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub symmetric_only: bool,
}

fn default_bounds() -> [f64; 2] {
    let g = AmplitudeGrid::default();
    [g.min, g.max]
}

fn default_grid() -> usize {
    AmplitudeGrid::default().points
}

impl Default for OptimizerSection {
    fn default() -> Self {
        OptimizerSection { bounds: default_bounds(), grid: default_grid(), symmetric_only: false }
    }
}

impl OptimizerSection {
    pub fn amplitude_grid(&self) -> AmplitudeGrid {
        AmplitudeGrid { min: self.bounds[0], max: self.bounds[1], points: self.grid }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    /// Desk-scale codeword length; replaces the one derived from `n`.
    pub m: u64,
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub sampling: Sampling,
    /// Fixed run configurations. Omitted: optimize at the desk-scale `m`.
    pub runs: Option<Vec<RunSection>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub alphas: Vec<f64>,
    /// Omitted: best threshold per detector.
    #[serde(default)]
    pub thresholds: Vec<u64>,
}

/// A parsed document together with the digest of its bytes.
pub struct LoadedConfig {
    pub doc: ConfigDocument,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
    let doc = parse(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(LoadedConfig { doc, sha256: sha256_hex(&bytes) })
}

pub fn parse(bytes: &[u8]) -> Result<ConfigDocument, String> {
    let doc: ConfigDocument = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(format!("schema_version {} unsupported, expected {SCHEMA_VERSION}", doc.schema_version));
    }
    Ok(doc)
}

fn field<T>(section: &str, r: qfnet_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Config(format!("{section}: {e}")))
}

impl ConfigDocument {
    /// Protocol parameters. `epsilon = 1` is accepted and makes the constraint vacuous.
    pub fn protocol(&self) -> Result<ProtocolParams, CliError> {
        let p = &self.protocol;
        let eps = if p.epsilon == 1.0 { 0.5 } else { p.epsilon };
        let pp = field("protocol", ProtocolParams::with_code_length(p.n, p.c, p.delta, eps, p.parties, p.code_length))?;
        field("protocol.epsilon", pp.with_epsilon(p.epsilon))
    }

    pub fn channel(&self) -> Result<ChannelModel, CliError> {
        let c = &self.channel;
        let n = self.protocol.parties;
        let ch = match (&c.sqrt_eta, &c.eta) {
            (Some(s), None) => ChannelModel::from_sqrt_eta(&s.expand(n), c.dark_count, c.visibility),
            (None, Some(e)) => ChannelModel::new(e.expand(n), c.dark_count, c.visibility),
            (Some(_), Some(_)) => return Err(CliError::Config("channel: give sqrt_eta or eta, not both".into())),
            (None, None) => return Err(CliError::Config("channel: missing sqrt_eta or eta".into())),
        };
        let ch = field("channel", ch)?;
        field("channel", ch.check_parties(n))?;
        Ok(ch)
    }

    pub fn montecarlo(&self) -> Result<&MonteCarloSection, CliError> {
        self.montecarlo.as_ref().ok_or_else(|| CliError::Config("missing montecarlo section".into()))
    }
}
