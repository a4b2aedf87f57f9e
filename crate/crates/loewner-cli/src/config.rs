//! Run configuration: the JSON shape consumed by `--config` and emitted by
//! `demo --emit-config`.

use anyhow::{bail, Context, Result};
use loewner::evolution::IntegratorSettings;
use loewner::herglotz::{make_field, FieldSpec, HerglotzField, OrderD};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

fn default_order() -> OrderD {
    OrderD::Infinite
}

fn default_horizon() -> f64 {
    3.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Config schema version; this build reads version 1.
    pub schema: u32,
    pub field: FieldSpec,
    #[serde(default = "default_order")]
    pub order: OrderD,
    /// Right end of the time interval the field is certified on.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub integrator: IntegratorOverrides,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
}

impl RunConfig {
    pub fn autonomous(expr: &str) -> Self {
        RunConfig {
            schema: SCHEMA_VERSION,
            field: FieldSpec::Autonomous { base: expr.to_string() },
            order: OrderD::Infinite,
            horizon: default_horizon(),
            integrator: IntegratorOverrides::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).context("unreadable run configuration")?;
        if cfg.schema != SCHEMA_VERSION {
            bail!(
                "config schema version {} is not supported (this build reads {})",
                cfg.schema,
                SCHEMA_VERSION
            );
        }
        if !(cfg.horizon.is_finite() && cfg.horizon > 0.0) {
            bail!("horizon must be a positive finite time, got {}", cfg.horizon);
        }
        Ok(cfg)
    }

    /// Integrator settings: library defaults overlaid with the config's
    /// overrides.
    pub fn settings(&self) -> Result<IntegratorSettings> {
        let mut s = IntegratorSettings::default();
        if let Some(v) = self.integrator.rel_tol {
            s.rel_tol = v;
        }
        if let Some(v) = self.integrator.abs_tol {
            s.abs_tol = v;
        }
        if let Some(v) = self.integrator.max_step {
            s.max_step = v;
        }
        if !(s.rel_tol > 0.0 && s.abs_tol > 0.0 && s.max_step > 0.0) {
            bail!("integrator overrides must be positive");
        }
        Ok(s)
    }

    /// Build and certify the field. Certification failures surface here.
    pub fn build_field(&self) -> Result<HerglotzField> {
        Ok(make_field(&self.field, self.order, self.horizon)?)
    }
}
