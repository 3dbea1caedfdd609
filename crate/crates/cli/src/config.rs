//! Run configuration: one JSON document, optional `--param key=value`
//! overrides, command-specific defaults, and a digest of the result.

use hawkes_dt::model::ParamsDoc;
use hawkes_dt::operators::{MarkQuadrature, OperatorConfig};
use hawkes_dt::HawkesParams;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Keys of the parameter document, reachable without the `params.` prefix.
const PARAM_KEYS: [&str; 6] = ["kernel", "alpha", "beta", "lambda_inf", "x0", "marks"];

/// The configuration file as written by the user. Omitted fields take
/// command-specific defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: ParamsDoc,
    /// Simulation horizon `T`; also sets `h = T / N` in check-generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Grid size `N` for trajectory output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    /// Marginal time for check-convergence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    /// Test functions for check-generator; the kernel's whole family if unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functions: Option<Vec<String>>,
    /// Parameters of the exact oracle in check-convergence; `params` if unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_params: Option<ParamsDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mark_quadrature: Option<MarkQuadrature>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planar_points: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ParamsDoc::from(&HawkesParams::fig4()),
            horizon: None,
            steps: None,
            t: None,
            n_list: None,
            paths: None,
            functions: None,
            oracle_params: None,
            mark_quadrature: None,
            grid_points: None,
            planar_points: None,
        }
    }
}

/// Fallbacks for the optional fields, chosen per command.
#[derive(Debug, Clone, Copy)]
pub struct Defaults {
    pub horizon: f64,
    pub steps: u64,
}

impl Defaults {
    pub const SIMULATION: Defaults = Defaults {
        horizon: 1.0,
        steps: 10_000,
    };
    /// The reference trajectory figure does not state its horizon; 5 is used.
    pub const FIG4: Defaults = Defaults {
        horizon: 5.0,
        steps: 100_000,
    };
}

impl RunConfig {
    /// Reads the file at `path` (or the built-in defaults) and applies
    /// overrides in order.
    pub fn load(path: Option<&std::path::Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str::<Value>(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => serde_json::to_value(RunConfig::default()).expect("config serializes"),
        };
        for kv in overrides {
            apply_override(&mut doc, kv)?;
        }
        serde_json::from_value(doc).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    /// Fills unset fields from `d` and the global defaults.
    pub fn resolved(mut self, d: Defaults) -> Self {
        self.horizon.get_or_insert(d.horizon);
        self.steps.get_or_insert(d.steps);
        self.t.get_or_insert(1.0);
        self.n_list.get_or_insert_with(|| vec![100, 1_000, 10_000]);
        self.paths.get_or_insert(10_000);
        self
    }

    /// Field-level checks shared by every command, so that no command starts
    /// work on a document another command would reject.
    pub fn check(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let positive = |v: Option<f64>| v.is_none_or(|x| x.is_finite() && x > 0.0);
        if !positive(self.horizon) {
            return bad(format!("horizon must be positive, got {:?}", self.horizon));
        }
        if !positive(self.t) {
            return bad(format!("t must be positive, got {:?}", self.t));
        }
        if self.steps == Some(0) {
            return bad("steps must be at least 1".into());
        }
        if let Some(ns) = &self.n_list {
            if ns.is_empty() || ns.contains(&0) {
                return bad("n_list must hold positive grid sizes".into());
            }
        }
        if self.paths == Some(0) {
            return bad("paths must be at least 1".into());
        }
        self.model()?;
        self.oracle()?;
        self.operator_config()?;
        Ok(())
    }

    /// Validated model parameters.
    pub fn model(&self) -> Result<HawkesParams, CliError> {
        checked(&self.params, "params")
    }

    /// Validated oracle parameters, if configured separately.
    pub fn oracle(&self) -> Result<Option<HawkesParams>, CliError> {
        self.oracle_params
            .as_ref()
            .map(|doc| checked(doc, "oracle_params"))
            .transpose()
    }

    pub fn operator_config(&self) -> Result<OperatorConfig, CliError> {
        let mut cfg = OperatorConfig::default();
        if let Some(q) = self.mark_quadrature {
            cfg.mark_quadrature = q;
        }
        if let Some(n) = self.grid_points {
            cfg.grid_points = n;
        }
        if let Some(n) = self.planar_points {
            cfg.planar_points = n;
        }
        if cfg.grid_points < 2 || cfg.planar_points < 2 {
            return Err(CliError::Config("sup grids need at least 2 points".into()));
        }
        Ok(cfg)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&canonical)
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn checked(doc: &ParamsDoc, what: &str) -> Result<HawkesParams, CliError> {
    let p = HawkesParams::from(doc);
    // Warnings are logged by the validator itself.
    p.validate()
        .map_err(|e| CliError::Config(format!("{what}: {e}")))?;
    Ok(p)
}

/// Applies one `key=value` override. Keys are dot paths; parameter fields may
/// drop the `params.` prefix. Values are parsed as JSON, falling back to a
/// plain string.
fn apply_override(doc: &mut Value, kv: &str) -> Result<(), CliError> {
    let (key, raw) = kv
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{kv}` is not key=value")))?;
    let mut parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key `{key}`")));
    }
    if PARAM_KEYS.contains(&parts[0]) {
        parts.insert(0, "params");
    }
    let value =
        serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().into()));
    let root = doc
        .as_object_mut()
        .ok_or_else(|| CliError::Config("config must be a JSON object".into()))?;
    // An oracle override starts from a copy of the model parameters.
    if parts[0] == "oracle_params" && parts.len() > 1 && !root.contains_key("oracle_params") {
        let base = root
            .get("params")
            .cloned()
            .unwrap_or(Value::Object(Map::new()));
        root.insert("oracle_params".into(), base);
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        node = node
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()))
            .as_object_mut()
            .ok_or_else(|| {
                CliError::Config(format!("override `{key}` descends into a non-object"))
            })?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
