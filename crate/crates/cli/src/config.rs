//! Run configuration: JSON file plus dotted-path overrides.

use std::path::Path;

use anyhow::{bail, Context, Result};
use lerayflow::duhamel::QuadratureSchedule;
use lerayflow::leray_solver::SolveParams;
use lerayflow::{CircleTrace, Grid};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub half_width: f64,
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            half_width: 32.0,
            n: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub sigma_schedule: Vec<f64>,
    pub picard_tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub damping_floor: f64,
    pub quadrature_nodes: usize,
    pub datum_extension: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = SolveParams::default();
        SolverConfig {
            sigma_schedule: p.sigma_schedule,
            picard_tol: p.picard_tol,
            max_iter: p.max_iter,
            damping: p.damping,
            damping_floor: p.damping_floor,
            quadrature_nodes: p.quadrature.n_nodes,
            datum_extension: p.datum_extension,
        }
    }
}

/// File names of the artifacts, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub v_re: String,
    pub q: String,
    /// Derivative parts that spectral differentiation of `v_re` and `q`
    /// cannot reproduce.
    pub corrections: String,
    pub solve_report: String,
    pub verify_report: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            v_re: "v_re.lfg".into(),
            q: "q.lfg".into(),
            corrections: "derivative_corrections.lfg".into(),
            solve_report: "solve.json".into(),
            verify_report: "verify.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub initial_data: CircleTrace,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub outputs: OutputConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            initial_data: CircleTrace::swirl(2.0 * std::f64::consts::PI),
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            outputs: OutputConfig::default(),
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Merges the file at `path` (if any) over the defaults, then applies
    /// `key=value` overrides. Values are parsed as JSON, falling back to
    /// strings.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = serde_json::to_value(RunConfig::default())?;
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let file: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            if !file.is_object() {
                bail!("{} must hold a JSON object", p.display());
            }
            merge(&mut value, file);
        }
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let config: RunConfig = serde_json::from_value(value).context("invalid configuration")?;
        config.solve_params()?;
        Ok(config)
    }

    pub fn solve_params(&self) -> Result<SolveParams> {
        self.initial_data.validate()?;
        let s = &self.solver;
        let params = SolveParams {
            sigma_schedule: s.sigma_schedule.clone(),
            picard_tol: s.picard_tol,
            max_iter: s.max_iter,
            damping: s.damping,
            damping_floor: s.damping_floor,
            quadrature: QuadratureSchedule::new(s.quadrature_nodes)?,
            grid: Grid::new(self.grid.half_width, self.grid.n)?,
            datum_extension: s.datum_extension,
        };
        params.validate()?;
        Ok(params)
    }
}

/// Recursively overlays `top` onto `base`; objects merge, anything else
/// replaces.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Sets `a.b.c=value` inside a JSON object, creating intermediate objects.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let Some((key, raw)) = spec.split_once('=') else {
        bail!("override '{spec}' is not of the form key=value");
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override key '{key}' has an empty segment");
    }
    let new = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let Value::Object(map) = node else {
            bail!("override '{key}' descends into a non-object");
        };
        node = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let Value::Object(map) = node else {
        bail!("override '{key}' descends into a non-object");
    };
    map.insert(parts[parts.len() - 1].to_string(), new);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(c, back);
        assert!(text.contains("\"L\":32"));
    }

    #[test]
    fn overrides_nest_and_parse() {
        let o: Vec<String> = [
            "grid.n=128",
            "grid.L=16",
            "initial_data.f_cos=[1.0]",
            "outputs.v_re=field.bin",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let c = RunConfig::load(None, &o).unwrap();
        assert_eq!(c.grid.half_width, 16.0);
        assert_eq!(c.grid.n, 128);
        assert_eq!(c.initial_data.f_cos, vec![1.0]);
        assert_eq!(c.outputs.v_re, "field.bin");
    }

    #[test]
    fn bad_overrides() {
        let mut v = serde_json::json!({"seed": 1});
        assert!(apply_override(&mut v, "seed").is_err());
        assert!(apply_override(&mut v, "seed.x=1").is_err());
        assert!(apply_override(&mut v, "a..b=1").is_err());
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let o = vec!["initial_data.f_cos=[1.0]".to_string()];
        let c = RunConfig::load(None, &o).unwrap();
        assert_eq!(c.initial_data.alpha, 2.0 * std::f64::consts::PI);
        assert_eq!(c.initial_data.f_cos, vec![1.0]);
        let mut base = serde_json::json!({"a": {"b": 1, "c": 2}});
        merge(&mut base, serde_json::json!({"a": {"c": 3}}));
        assert_eq!(base, serde_json::json!({"a": {"b": 1, "c": 3}}));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let v = serde_json::json!({"solver": {"tolerance": 1e-6}});
        assert!(serde_json::from_value::<RunConfig>(v).is_err());
    }

    #[test]
    fn invalid_params_are_rejected() {
        let o = vec!["solver.sigma_schedule=[0.5]".to_string()];
        assert!(RunConfig::load(None, &o).is_err());
        let o = vec!["grid.n=100".to_string()];
        assert!(RunConfig::load(None, &o).is_err());
    }
}
