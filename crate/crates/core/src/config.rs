//! Experiment configuration.
//!
//! A single TOML document with two tables, `[simulation]` and `[sweep]`.
//! Every key has a default, so an empty file is a valid configuration.
//! Overrides use dotted key paths (`simulation.uu.size_mean=0.002`) and are
//! applied to the document before it is deserialized, so they go through
//! exactly the same checks as file values.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::agents::{RelativeLossModel, UuParams};
use crate::error::{Error, Result};
use crate::fees::{BlockSignal, FeePolicy};
use crate::price_feed::{GbmParams, Regime};

const MAX_BPS: u32 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeePolicyConfig {
    Fx {
        #[serde(default = "default_f_fx")]
        f_fx: u32,
    },
    Ba {
        #[serde(default = "default_f_init")]
        f_init: u32,
        #[serde(default = "default_f_step")]
        f_step: u32,
        #[serde(default)]
        signal: BlockSignal,
    },
    Da {
        #[serde(default = "default_f_init")]
        f_init: u32,
        #[serde(default = "default_f_step")]
        f_step: u32,
    },
    Ob {
        #[serde(default = "default_f_ad")]
        f_ad: u32,
        #[serde(default = "default_f_nad")]
        f_nad: u32,
    },
}

fn default_f_fx() -> u32 {
    30
}
fn default_f_init() -> u32 {
    30
}
fn default_f_step() -> u32 {
    1
}
fn default_f_ad() -> u32 {
    45
}
fn default_f_nad() -> u32 {
    15
}

impl Default for FeePolicyConfig {
    fn default() -> Self {
        FeePolicyConfig::Fx { f_fx: default_f_fx() }
    }
}

impl FeePolicyConfig {
    /// Default parameters for a policy short name (`fx`, `ba`, `da`, `ob`).
    pub fn from_short_name(name: &str) -> Option<Self> {
        Some(match name.trim().to_ascii_lowercase().as_str() {
            "fx" => FeePolicyConfig::Fx { f_fx: default_f_fx() },
            "ba" => FeePolicyConfig::Ba {
                f_init: default_f_init(),
                f_step: default_f_step(),
                signal: BlockSignal::default(),
            },
            "da" => FeePolicyConfig::Da {
                f_init: default_f_init(),
                f_step: default_f_step(),
            },
            "ob" => FeePolicyConfig::Ob {
                f_ad: default_f_ad(),
                f_nad: default_f_nad(),
            },
            _ => return None,
        })
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            FeePolicyConfig::Fx { .. } => "fx",
            FeePolicyConfig::Ba { .. } => "ba",
            FeePolicyConfig::Da { .. } => "da",
            FeePolicyConfig::Ob { .. } => "ob",
        }
    }

    pub fn label(&self) -> &'static str {
        self.build().label()
    }

    pub fn build(&self) -> FeePolicy {
        match *self {
            FeePolicyConfig::Fx { f_fx } => FeePolicy::fixed(f_fx),
            FeePolicyConfig::Ba { f_init, f_step, signal } => FeePolicy::block_adaptive(f_init, f_step, signal),
            FeePolicyConfig::Da { f_init, f_step } => FeePolicy::deal_adaptive(f_init, f_step),
            FeePolicyConfig::Ob { f_ad, f_nad } => FeePolicy::oracle_based(f_ad, f_nad),
        }
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        let key = |k: &str| format!("{prefix}.{k}");
        match *self {
            FeePolicyConfig::Fx { f_fx } => {
                if f_fx >= MAX_BPS {
                    return Err(Error::config(key("f_fx"), "must be below 10000 bps"));
                }
            }
            FeePolicyConfig::Ba { f_init, f_step, .. } | FeePolicyConfig::Da { f_init, f_step } => {
                if 2 * f_init >= MAX_BPS {
                    return Err(Error::config(key("f_init"), "both directions together must stay below 10000 bps"));
                }
                if f_step == 0 {
                    return Err(Error::config(key("f_step"), "must be at least 1 bps"));
                }
            }
            FeePolicyConfig::Ob { f_ad, f_nad } => {
                if f_ad >= MAX_BPS {
                    return Err(Error::config(key("f_ad"), "must be below 10000 bps"));
                }
                if f_nad >= MAX_BPS {
                    return Err(Error::config(key("f_nad"), "must be below 10000 bps"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSource {
    Synthetic {
        #[serde(default = "default_regime")]
        regime: Regime,
        #[serde(default = "default_n_paths")]
        n_paths: usize,
        #[serde(default = "default_n_blocks")]
        n_blocks: usize,
        /// Overrides the regime preset for asset A.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        asset_a: Option<GbmParams>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        asset_b: Option<GbmParams>,
        /// Historical `timestamp,p_a,p_b` file to estimate both assets'
        /// parameters from. Takes precedence over presets and overrides.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        estimate_from: Option<PathBuf>,
    },
    Historical {
        file: PathBuf,
        /// Second per-asset file; when set, `file` and `file_b` use the
        /// `timestamp,price` schema.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        file_b: Option<PathBuf>,
    },
}

fn default_regime() -> Regime {
    Regime::HighVol
}
fn default_n_paths() -> usize {
    1000
}
fn default_n_blocks() -> usize {
    1440
}

impl Default for PathSource {
    fn default() -> Self {
        PathSource::Synthetic {
            regime: default_regime(),
            n_paths: default_n_paths(),
            n_blocks: default_n_blocks(),
            asset_a: None,
            asset_b: None,
            estimate_from: None,
        }
    }
}

/// Which agent acts first inside a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockOrder {
    /// Uninformed user, then the arbitrageur (who sees the UU's trade).
    #[default]
    UuFirst,
    IuFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub initial_pool_value: f64,
    /// Network fee per trade, in base currency.
    pub alpha: f64,
    pub master_seed: u64,
    pub block_order: BlockOrder,
    pub fee_policy: FeePolicyConfig,
    pub uu: UuParams,
    pub loss_model: RelativeLossModel,
    pub path_source: PathSource,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            initial_pool_value: 25_000_000.0,
            alpha: 0.0,
            master_seed: 42,
            block_order: BlockOrder::default(),
            fee_policy: FeePolicyConfig::default(),
            uu: UuParams::default(),
            loss_model: RelativeLossModel::default(),
            path_source: PathSource::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        const P: &str = "simulation";
        if !(self.initial_pool_value.is_finite() && self.initial_pool_value > 0.0) {
            return Err(Error::config(format!("{P}.initial_pool_value"), "must be finite and positive"));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::config(format!("{P}.alpha"), "must be finite and non-negative"));
        }
        self.fee_policy.validate(&format!("{P}.fee_policy"))?;
        self.uu.validate(&format!("{P}.uu"))?;
        match &self.path_source {
            PathSource::Synthetic {
                regime,
                n_paths,
                n_blocks,
                asset_a,
                asset_b,
                estimate_from,
            } => {
                let key = |k: &str| format!("{P}.path_source.{k}");
                if *n_paths == 0 {
                    return Err(Error::config(key("n_paths"), "must be at least 1"));
                }
                if *n_blocks == 0 {
                    return Err(Error::config(key("n_blocks"), "must be at least 1"));
                }
                if *regime == Regime::Custom && estimate_from.is_none() {
                    if asset_a.is_none() {
                        return Err(Error::config(key("asset_a"), "required when regime = \"custom\""));
                    }
                    if asset_b.is_none() {
                        return Err(Error::config(key("asset_b"), "required when regime = \"custom\""));
                    }
                }
                for (name, params) in [("asset_a", asset_a), ("asset_b", asset_b)] {
                    if let Some(g) = params {
                        if !(g.p0.is_finite() && g.p0 > 0.0) {
                            return Err(Error::config(key(&format!("{name}.p0")), "must be finite and positive"));
                        }
                        if !(g.sigma.is_finite() && g.sigma >= 0.0) {
                            return Err(Error::config(key(&format!("{name}.sigma")), "must be finite and non-negative"));
                        }
                        if !g.mu.is_finite() {
                            return Err(Error::config(key(&format!("{name}.mu")), "must be finite"));
                        }
                    }
                }
            }
            PathSource::Historical { .. } => {}
        }
        Ok(())
    }

    pub fn n_paths(&self) -> usize {
        match &self.path_source {
            PathSource::Synthetic { n_paths, .. } => *n_paths,
            PathSource::Historical { .. } => 1,
        }
    }

    pub fn with_policy(&self, policy: FeePolicyConfig) -> SimConfig {
        SimConfig {
            fee_policy: policy,
            ..self.clone()
        }
    }
}

/// Setup of the fee-sweep experiment: one fixed pool, one fixed trade of
/// token A at constant prices, evaluated across a grid of fees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub reserve_a: f64,
    pub reserve_b: f64,
    pub amount_in: f64,
    pub p_a: f64,
    pub p_b: f64,
    pub alpha: f64,
    pub fee_min_pct: f64,
    pub fee_max_pct: f64,
    pub fee_step_pct: f64,
    /// Explicit grid in percent; replaces min/max/step when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fee_grid_pct: Option<Vec<f64>>,
    pub n_trials: usize,
    pub seed: u64,
    pub loss_model: RelativeLossModel,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            reserve_a: 12_500_000.0,
            reserve_b: 12_500_000.0,
            amount_in: 12_500.0,
            p_a: 1.0,
            p_b: 1.0,
            alpha: 0.0,
            fee_min_pct: 0.0,
            fee_max_pct: 2.0,
            fee_step_pct: 0.01,
            fee_grid_pct: None,
            n_trials: 100_000,
            seed: 42,
            loss_model: RelativeLossModel::default(),
        }
    }
}

impl SweepConfig {
    /// Fee levels in percent. Built as `min + i·step`, rounded to 1e-9 %,
    /// so the points neither accumulate rounding nor print as `1.4000000000000001`.
    pub fn grid_pct(&self) -> Vec<f64> {
        if let Some(grid) = &self.fee_grid_pct {
            return grid.clone();
        }
        let n = ((self.fee_max_pct - self.fee_min_pct) / self.fee_step_pct + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| ((self.fee_min_pct + i as f64 * self.fee_step_pct) * 1e9).round() / 1e9)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        const P: &str = "sweep";
        for (k, v) in [
            ("reserve_a", self.reserve_a),
            ("reserve_b", self.reserve_b),
            ("amount_in", self.amount_in),
            ("p_a", self.p_a),
            ("p_b", self.p_b),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{P}.{k}"), "must be finite and positive"));
            }
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::config(format!("{P}.alpha"), "must be finite and non-negative"));
        }
        if self.fee_grid_pct.is_none() {
            if !(self.fee_step_pct.is_finite() && self.fee_step_pct > 0.0) {
                return Err(Error::config(format!("{P}.fee_step_pct"), "must be positive"));
            }
            if self.fee_min_pct.is_nan() || self.fee_max_pct.is_nan() || self.fee_min_pct > self.fee_max_pct {
                return Err(Error::config(format!("{P}.fee_max_pct"), "must not be below fee_min_pct"));
            }
        }
        let grid = self.grid_pct();
        if grid.is_empty() {
            return Err(Error::config(format!("{P}.fee_grid_pct"), "grid is empty"));
        }
        if let Some(bad) = grid.iter().find(|f| !(0.0..=10.0).contains(*f)) {
            let key = if self.fee_grid_pct.is_some() { "fee_grid_pct" } else { "fee_max_pct" };
            return Err(Error::config(format!("{P}.{key}"), format!("fee {bad}% outside [0, 10]%")));
        }
        if self.n_trials == 0 {
            return Err(Error::config(format!("{P}.n_trials"), "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabConfig {
    pub simulation: SimConfig,
    pub sweep: SweepConfig,
}

impl LabConfig {
    /// Parses `text`, applies `overrides` (`(dotted.key, value)` pairs, the
    /// value in TOML syntax or a bare string), then validates.
    pub fn from_toml_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| Error::config("<file>", e.to_string()))?;
        for (key, value) in overrides {
            apply_override(&mut doc, key, value)?;
        }
        default_kind(&mut doc, &["simulation", "fee_policy"], "fx");
        default_kind(&mut doc, &["simulation", "path_source"], "synthetic");
        let config: LabConfig = serde_path_to_error::deserialize(toml::Value::Table(doc)).map_err(|e| {
            let path = e.path().to_string();
            let message = e.into_inner().to_string();
            let message = message.lines().next().unwrap_or_default().to_string();
            Error::config(if path == "." { "<root>".to_string() } else { path }, message)
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.simulation.validate()?;
        self.sweep.validate()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }
}

/// Splits `key=value`.
pub fn parse_override(spec: &str) -> Result<(String, String)> {
    let (k, v) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(spec, "override must look like key=value"))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(Error::config(spec, "override key is empty"));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

/// Tables of tagged choices may omit `kind` and get the default variant.
fn default_kind(doc: &mut toml::Table, at: &[&str], kind: &str) {
    let mut table = doc;
    for part in at {
        match table.get_mut(*part).and_then(toml::Value::as_table_mut) {
            Some(t) => table = t,
            None => return,
        }
    }
    table
        .entry("kind")
        .or_insert_with(|| toml::Value::String(kind.to_string()));
}

fn apply_override(doc: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut table = doc;
    for (i, part) in parents.iter().enumerate() {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(parts[..=i].join("."), "is not a table"))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}
