//! Run configuration: one TOML file (or defaults) driving training and
//! evaluation. The parsed config is echoed verbatim into every report so a
//! run documents itself.

use crate::error::{Error, Result};
use crate::eval::{EvalConfig, FeatureKind, ModelChoice};
use crate::neural::{default_lambda_grid, ModelKind, TdfThresholds, TrainConfig, TrrSizes};
use crate::riemann::FeatureConfig;
use crate::signal::BandSpec;
use crate::sync::DEFAULT_MAX_LAG_MS;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    /// Pass bands in Hz, `[low, high]` pairs.
    pub bands: Vec<[f64; 2]>,
    pub refilter: bool,
    pub win_ms: f64,
    pub step_ms: f64,
    pub seq_len: usize,
    /// Slope-sign-change / Wilson-amplitude thresholds (TDF features only).
    pub ssc_eps: f64,
    pub wamp_theta: f64,
}

impl Default for FeatureSection {
    fn default() -> Self {
        let fc = FeatureConfig::multiband();
        Self {
            bands: fc.bands.iter().map(|b| [b.low_hz, b.high_hz]).collect(),
            refilter: fc.refilter,
            win_ms: fc.win_ms,
            step_ms: fc.step_ms,
            seq_len: fc.seq_len,
            ssc_eps: TdfThresholds::default().ssc_eps,
            wamp_theta: TdfThresholds::default().wamp_theta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub k_folds: usize,
    pub val_fraction: f64,
    pub lambda_grid: Vec<f64>,
    /// Synchronization search range.
    pub max_lag_ms: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            k_folds: 10,
            val_fraction: 0.10,
            lambda_grid: default_lambda_grid(),
            max_lag_ms: DEFAULT_MAX_LAG_MS,
        }
    }
}

/// Optional layer-width overrides for desk-scale runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SizesSection {
    pub trr: Option<TrrSizes>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// trr | trr-simplified | mlp-cmts | mlp-tdf | ridge
    pub model: String,
    /// Root seed; every component derives its own stream from it.
    pub seed: u64,
    pub features: FeatureSection,
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub sizes: SizesSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Trr.to_string(),
            seed: 0,
            features: FeatureSection::default(),
            train: TrainConfig::default(),
            eval: EvalSection::default(),
            sizes: SizesSection::default(),
        }
    }
}

impl RunConfig {
    /// Defaults appropriate for a model kind: the simplified TRR swaps in
    /// the single-band feature configuration.
    pub fn default_for(kind: ModelKind) -> Self {
        let mut cfg = Self { model: kind.to_string(), ..Self::default() };
        if kind == ModelKind::TrrSimplified {
            let fc = FeatureConfig::simplified();
            cfg.features.bands = fc.bands.iter().map(|b| [b.low_hz, b.high_hz]).collect();
            cfg.features.refilter = fc.refilter;
        }
        cfg
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.model_kind()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn model_kind(&self) -> Result<ModelKind> {
        self.model.parse()
    }

    pub fn feature_config(&self) -> Result<FeatureConfig> {
        if self.features.bands.is_empty() {
            return Err(Error::Config("at least one band is required".into()));
        }
        Ok(FeatureConfig {
            bands: self.features.bands.iter().map(|&[l, h]| BandSpec::new(l, h)).collect(),
            refilter: self.features.refilter,
            shrinkage: crate::riemann::Shrinkage::LedoitWolf,
            seq_len: self.features.seq_len,
            win_ms: self.features.win_ms,
            step_ms: self.features.step_ms,
        })
    }

    pub fn feature_kind(&self) -> Result<FeatureKind> {
        Ok(match self.model_kind()? {
            ModelKind::MlpTdf => FeatureKind::Tdf {
                win_ms: self.features.win_ms,
                step_ms: self.features.step_ms,
                seq_len: self.features.seq_len,
                thresholds: TdfThresholds {
                    ssc_eps: self.features.ssc_eps,
                    wamp_theta: self.features.wamp_theta,
                },
            },
            _ => FeatureKind::Cmts(self.feature_config()?),
        })
    }

    pub fn eval_config(&self) -> Result<EvalConfig> {
        let choice = match self.model_kind()? {
            ModelKind::Trr | ModelKind::TrrSimplified => ModelChoice::Trr,
            ModelKind::MlpCmts | ModelKind::MlpTdf => ModelChoice::Mlp,
            ModelKind::Ridge => ModelChoice::Ridge,
        };
        Ok(EvalConfig {
            feature: self.feature_kind()?,
            model: choice,
            train: TrainConfig { seed: self.seed, ..self.train.clone() },
            trr_sizes: self.sizes.trr.clone(),
            k_folds: self.eval.k_folds,
            val_fraction: self.eval.val_fraction,
            lambda_grid: self.eval.lambda_grid.clone(),
            seed: self.seed,
        })
    }

    /// Canonical TOML echo embedded in reports and artifacts.
    pub fn echo(&self) -> String {
        toml::to_string_pretty(self).unwrap_or_else(|e| format!("# unserializable: {e}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let echoed = cfg.echo();
        let back = RunConfig::from_toml(&echoed).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.model_kind().unwrap(), ModelKind::Trr);
        assert_eq!(cfg.feature_config().unwrap(), FeatureConfig::multiband());
    }

    #[test]
    fn partial_files_fall_back_to_defaults() {
        let cfg = RunConfig::from_toml(
            "model = \"ridge\"\nseed = 9\n[features]\nseq_len = 4\n",
        )
        .unwrap();
        assert_eq!(cfg.model_kind().unwrap(), ModelKind::Ridge);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.features.seq_len, 4);
        assert_eq!(cfg.features.win_ms, 300.0);
        assert_eq!(cfg.eval_config().unwrap().model, ModelChoice::Ridge);
    }

    #[test]
    fn unknown_keys_and_models_are_rejected() {
        assert!(RunConfig::from_toml("modle = \"trr\"").is_err());
        assert!(RunConfig::from_toml("model = \"transformer\"").is_err());
    }

    #[test]
    fn simplified_defaults_use_one_band() {
        let cfg = RunConfig::default_for(ModelKind::TrrSimplified);
        assert_eq!(cfg.feature_config().unwrap(), FeatureConfig::simplified());
    }

    #[test]
    fn tdf_model_selects_tdf_features() {
        let cfg = RunConfig::default_for(ModelKind::MlpTdf);
        assert!(matches!(cfg.feature_kind().unwrap(), FeatureKind::Tdf { .. }));
    }
}
