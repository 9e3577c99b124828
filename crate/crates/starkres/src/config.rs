//! Run configuration: flat `section.key=value` text, overridden by CLI flags.
//!
//! Every key has a default, and the flattened key set of [`Parameters`] is
//! the schema: unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use starkres_core::floquet::EigenSettings;
use starkres_core::{FormFactor, ResolventSettings, RootSettings, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Dc,
    Sweep,
    Ac,
    Plot,
    Verify,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Dc => "dc",
            Mode::Sweep => "sweep",
            Mode::Ac => "ac",
            Mode::Plot => "plot",
            Mode::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiParams {
    pub amp: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcParams {
    pub f: f64,
    pub method: String,
    pub window: Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub f_grid: Vec<f64>,
    pub window: Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcParams {
    pub f_grid: Vec<f64>,
    pub omega: f64,
    pub im_theta: f64,
    pub n_fourier: u64,
    pub n_hermite: u64,
    pub length: f64,
    /// `auto` (field-free zero from the dc window) or `re,im`.
    pub target: String,
    /// Binary dump of the matrix at the largest grid f; empty for none.
    pub dump_matrix: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputParams {
    pub dir: String,
    /// Integrand samples written next to dc results; 0 disables.
    pub integrand_samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotParams {
    pub input: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub phi: PhiParams,
    pub dc: DcParams,
    pub sweep: SweepParams,
    pub ac: AcParams,
    pub root: RootSettings,
    pub resolvent: ResolventSettings,
    pub eigen: EigenSettings,
    pub output: OutputParams,
    pub plot: PlotParams,
}

impl Default for Parameters {
    fn default() -> Self {
        Self {
            phi: PhiParams { amp: 0.1, width: 1.0 },
            dc: DcParams {
                f: 0.0,
                method: "auto".into(),
                window: Window {
                    re_min: 0.9,
                    re_max: 1.1,
                    im_min: -0.05,
                    im_max: -1e-4,
                },
            },
            sweep: SweepParams {
                f_grid: vec![0.05, 0.02, 0.01, 0.005],
                window: Window {
                    re_min: 0.9,
                    re_max: 1.1,
                    im_min: -0.05,
                    im_max: -1e-6,
                },
            },
            ac: AcParams {
                f_grid: vec![0.1, 0.05, 0.02],
                omega: 1.0,
                im_theta: 0.3,
                n_fourier: 16,
                n_hermite: 80,
                length: 1.0,
                target: "auto".into(),
                dump_matrix: String::new(),
            },
            root: RootSettings::default(),
            resolvent: ResolventSettings::default(),
            eigen: EigenSettings::default(),
            output: OutputParams {
                dir: ".".into(),
                integrand_samples: 0,
            },
            plot: PlotParams { input: String::new() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn flatten_into(prefix: &str, value: &Value, out: &mut BTreeMap<String, Value>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten_into(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}

fn flatten(p: &Parameters) -> BTreeMap<String, Value> {
    let mut out = BTreeMap::new();
    flatten_into("", &serde_json::to_value(p).expect("parameters serialize"), &mut out);
    out
}

fn parse_as(key: &str, raw: &str, like: &Value) -> Result<Value, ConfigError> {
    let bad = |what: &str| ConfigError(format!("{key}: cannot parse '{raw}' as {what}"));
    let raw = raw.trim();
    Ok(match like {
        Value::Bool(_) => Value::Bool(raw.parse().map_err(|_| bad("a boolean"))?),
        Value::Number(n) if n.is_u64() => Value::from(raw.parse::<u64>().map_err(|_| bad("an integer"))?),
        Value::Number(_) => {
            let x: f64 = raw.parse().map_err(|_| bad("a number"))?;
            if !x.is_finite() {
                return Err(bad("a finite number"));
            }
            Value::from(x)
        }
        Value::String(_) => Value::String(raw.to_string()),
        Value::Array(_) => {
            let items: Result<Vec<Value>, ConfigError> = raw
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .map(Value::from)
                        .ok_or_else(|| bad("a comma-separated list of numbers"))
                })
                .collect();
            Value::Array(items?)
        }
        _ => return Err(bad("a value")),
    })
}

fn set_path(root: &mut Value, key: &str, value: Value) {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        node = node
            .as_object_mut()
            .expect("schema keys address objects")
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    node.as_object_mut()
        .expect("schema keys address objects")
        .insert(parts[parts.len() - 1].to_string(), value);
}

/// Parses `key=value` lines; `#` starts a comment line.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("line {}: expected key=value", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl Parameters {
    /// Defaults with `overrides` applied in order; later entries win.
    pub fn from_overrides(overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let defaults = Parameters::default();
        let schema = flatten(&defaults);
        let mut tree = serde_json::to_value(&defaults).expect("parameters serialize");
        for (key, raw) in overrides {
            let like = schema.get(key).ok_or_else(|| ConfigError(format!("unknown configuration key '{key}'")))?;
            set_path(&mut tree, key, parse_as(key, raw, like)?);
        }
        let params: Parameters = serde_json::from_value(tree).map_err(|e| ConfigError(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    /// Every key with its effective value.
    pub fn effective(&self) -> BTreeMap<String, Value> {
        flatten(self)
    }

    pub fn keys() -> Vec<String> {
        flatten(&Parameters::default()).into_keys().collect()
    }

    pub fn form_factor(&self) -> Result<FormFactor, ConfigError> {
        FormFactor::gaussian(self.phi.amp, self.phi.width).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.output.dir)
    }

    pub fn target(&self) -> Result<Option<Complex64>, ConfigError> {
        let t = self.ac.target.trim();
        if t == "auto" {
            return Ok(None);
        }
        let parts: Vec<&str> = t.split(',').map(str::trim).collect();
        match parts.as_slice() {
            [re, im] => match (re.parse::<f64>(), im.parse::<f64>()) {
                (Ok(re), Ok(im)) if re.is_finite() && im.is_finite() => Ok(Some(Complex64::new(re, im))),
                _ => Err(ConfigError(format!("ac.target: cannot parse '{t}'"))),
            },
            _ => Err(ConfigError(format!("ac.target: expected 'auto' or 're,im', got '{t}'"))),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError(m));
        if !(self.phi.amp.is_finite()) {
            return err("phi.amp must be finite".into());
        }
        if !(self.phi.width > 0.0) {
            return err("phi.width must be > 0".into());
        }
        if !(self.dc.f >= 0.0) {
            return err("dc.f must be >= 0".into());
        }
        for (name, w) in [("dc.window", &self.dc.window), ("sweep.window", &self.sweep.window)] {
            w.validate().map_err(|e| ConfigError(format!("{name}: {e}")))?;
        }
        for (name, grid) in [("sweep.f_grid", &self.sweep.f_grid), ("ac.f_grid", &self.ac.f_grid)] {
            if grid.is_empty() || grid.iter().any(|f| !(*f > 0.0)) || grid.windows(2).any(|w| w[1] >= w[0]) {
                return err(format!("{name} must be a strictly descending list of positive values"));
            }
        }
        if !(self.ac.omega > 0.0) {
            return err("ac.omega must be > 0".into());
        }
        if !(self.ac.im_theta > 0.0 && self.ac.im_theta < std::f64::consts::FRAC_PI_2) {
            return err("ac.im_theta must lie in (0, pi/2)".into());
        }
        if !(self.ac.length > 0.0) {
            return err("ac.length must be > 0".into());
        }
        for (name, tol) in [
            ("root.tol", self.root.tol),
            ("resolvent.quadrature.abs_tol", self.resolvent.quadrature.abs_tol),
            ("resolvent.quadrature.rel_tol", self.resolvent.quadrature.rel_tol),
            ("eigen.tol", self.eigen.tol),
            ("eigen.disk_radius", self.eigen.disk_radius),
        ] {
            if !(tol > 0.0) {
                return err(format!("{name} must be > 0"));
            }
        }
        let fmax = self.sweep.f_grid.iter().chain([&self.dc.f]).fold(0.0f64, |a, b| a.max(*b));
        self.resolvent
            .validate(fmax)
            .map_err(|e| ConfigError(format!("resolvent: {e}")))?;
        self.target()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(k: &str, v: &str) -> (String, String) {
        (k.to_string(), v.to_string())
    }

    #[test]
    fn defaults_round_trip() {
        let p = Parameters::from_overrides(&[]).unwrap();
        assert_eq!(p, Parameters::default());
        assert!(Parameters::keys().contains(&"dc.window.re_min".to_string()));
        assert!(Parameters::keys().contains(&"resolvent.quadrature.abs_tol".to_string()));
    }

    #[test]
    fn overrides_apply_in_order() {
        let p = Parameters::from_overrides(&[
            kv("dc.window.re_min", "0.8"),
            kv("sweep.f_grid", "0.1, 0.05"),
            kv("ac.n_fourier", "8"),
            kv("dc.window.re_min", "0.85"),
            kv("root.tol", "1e-12"),
        ])
        .unwrap();
        assert_eq!(p.dc.window.re_min, 0.85);
        assert_eq!(p.sweep.f_grid, vec![0.1, 0.05]);
        assert_eq!(p.ac.n_fourier, 8);
        assert_eq!(p.root.tol, 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Parameters::from_overrides(&[kv("dc.windw.re_min", "0.8")]).is_err());
        assert!(Parameters::from_overrides(&[kv("ac.omega", "-1")]).is_err());
        assert!(Parameters::from_overrides(&[kv("ac.n_fourier", "1.5")]).is_err());
        assert!(Parameters::from_overrides(&[kv("root.tol", "0")]).is_err());
        assert!(Parameters::from_overrides(&[kv("sweep.f_grid", "0.01,0.02")]).is_err());
        assert!(Parameters::from_overrides(&[kv("dc.f", "-0.1")]).is_err());
        assert!(Parameters::from_overrides(&[kv("ac.target", "1.0")]).is_err());
        assert!(Parameters::from_overrides(&[kv("dc.window.im_min", "nan")]).is_err());
    }

    #[test]
    fn config_text() {
        let lines = parse_config_text("# comment\n\ndc.f = 0.01\nphi.amp=0.2\n").unwrap();
        assert_eq!(lines, vec![kv("dc.f", "0.01"), kv("phi.amp", "0.2")]);
        assert!(parse_config_text("dc.f 0.01").is_err());
        let p = Parameters::from_overrides(&lines).unwrap();
        assert_eq!(p.dc.f, 0.01);
        assert_eq!(p.target().unwrap(), None);
        let p = Parameters::from_overrides(&[kv("ac.target", "1.02,-0.011")]).unwrap();
        assert_eq!(p.target().unwrap(), Some(Complex64::new(1.02, -0.011)));
    }
}
