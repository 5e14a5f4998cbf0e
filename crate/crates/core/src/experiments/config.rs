//! Flat dotted-key configuration.
//!
//! Documents are TOML; nested tables are flattened to dotted keys, so
//! `[physics]\neta = 0.1` and `physics.eta = 0.1` are the same setting.
//! Layers are applied in order: defaults, scenario preset, config file, `--set`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use toml::Value;

use crate::dynamics::{ExperimentConfig, WindowMode};
use crate::error::{Error, Result};
use crate::field::{CouplingTensor, Window};
use crate::grid::{AxisGrid, GaussianSpec, GridSpec};
use crate::spin::{eigenspinor, SpinorState, UnitDirection};
use crate::Axis;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Float,
    Int,
    Str,
    Bool,
}

/// Every accepted key with its type, default and meaning.
const SCHEMA: &[(&str, Kind, &str, &str)] = &[
    ("physics.eta", Kind::Float, "0.02", "coupling strength eta"),
    ("physics.hbar", Kind::Float, "1", "reduced Planck constant"),
    ("physics.mass", Kind::Float, "1", "particle mass"),
    ("window.kind", Kind::Str, "boxcar", "window shape (only boxcar)"),
    ("window.mode", Kind::Str, "temporal", "temporal | spatial"),
    ("window.extent", Kind::Float, "1", "duration T or length L"),
    ("window.center", Kind::Float, "0", "window center (time or y)"),
    ("spin.pre.theta", Kind::Float, "2.827433388230814", "polar angle of the pre-selection axis (9 pi / 10)"),
    ("spin.pre.axis", Kind::Str, "x", "tilt direction of the pre-selection axis, x | y"),
    ("spin.pre.s", Kind::Int, "0", "eigenvalue index (-1)^s along that axis"),
    ("spin.post.theta", Kind::Float, "0", "polar angle of the post-selection axis"),
    ("spin.post.axis", Kind::Str, "x", "tilt direction of the post-selection axis, x | y"),
    ("spin.post.s", Kind::Int, "0", "eigenvalue index along that axis"),
    ("tensor.kind", Kind::Str, "maxwell", "maxwell | textbook (zz, violates Maxwell)"),
    ("tensor.hxx", Kind::Float, "-1", "H_xx = -H_zz"),
    ("tensor.hxz", Kind::Float, "0", "H_xz = H_zx"),
    ("grid.x.n", Kind::Int, "256", "points on x (0 disables the axis)"),
    ("grid.x.pmax", Kind::Float, "32", "momentum half-range on x"),
    ("grid.y.n", Kind::Int, "0", "points on y (0 disables the axis)"),
    ("grid.y.pmax", Kind::Float, "32", "momentum half-range on y"),
    ("grid.z.n", Kind::Int, "256", "points on z (0 disables the axis)"),
    ("grid.z.pmax", Kind::Float, "32", "momentum half-range on z"),
    ("packet.sigma.x", Kind::Float, "1", "momentum width on x"),
    ("packet.sigma.y", Kind::Float, "1", "momentum width on y"),
    ("packet.sigma.z", Kind::Float, "1", "momentum width on z"),
    ("packet.center.x", Kind::Float, "0", "mean momentum on x"),
    ("packet.center.y", Kind::Float, "0", "mean momentum on y (beam)"),
    ("packet.center.z", Kind::Float, "0", "mean momentum on z"),
    ("run.steps", Kind::Int, "200", "split steps between -tau and tau"),
    ("run.tau", Kind::Float, "1", "tau_i = tau_f"),
    ("run.kinetic", Kind::Bool, "true", "include the kinetic term"),
];

/// Keys, defaults and descriptions, for `--help` style listings.
pub fn schema() -> impl Iterator<Item = (&'static str, &'static str, &'static str)> {
    SCHEMA.iter().map(|(k, _, d, h)| (*k, *d, *h))
}

fn kind_of(key: &str) -> Option<Kind> {
    SCHEMA.iter().find(|(k, ..)| *k == key).map(|(_, kind, ..)| *kind)
}

/// Layered settings keyed by dotted path.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, Value>,
}

impl Default for Settings {
    fn default() -> Self {
        let values = SCHEMA
            .iter()
            .map(|(k, kind, d, _)| {
                let v = match kind {
                    Kind::Float => Value::Float(d.parse().expect("schema default")),
                    Kind::Int => Value::Integer(d.parse().expect("schema default")),
                    Kind::Bool => Value::Boolean(d.parse().expect("schema default")),
                    Kind::Str => Value::String((*d).to_string()),
                };
                (k.to_string(), v)
            })
            .collect();
        Self { values }
    }
}

impl Settings {
    /// Sets one key, checking that it exists and has the right type.
    pub fn set(&mut self, key: &str, value: Value) -> Result<()> {
        let kind = kind_of(key).ok_or_else(|| Error::config(key, "unknown key"))?;
        let value = match (kind, value) {
            (Kind::Float, Value::Float(f)) => Value::Float(f),
            (Kind::Float, Value::Integer(i)) => Value::Float(i as f64),
            (Kind::Int, Value::Integer(i)) => Value::Integer(i),
            (Kind::Str, Value::String(s)) => Value::String(s),
            (Kind::Bool, Value::Boolean(b)) => Value::Boolean(b),
            (kind, v) => return Err(Error::config(key, format!("expected {kind:?}, got {}", v.type_str()))),
        };
        self.values.insert(key.to_string(), value);
        Ok(())
    }

    /// Layers a TOML document on top.
    pub fn merge_document(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config("<document>", e.message()))?;
        let mut flat = Vec::new();
        flatten("", &Value::Table(table), &mut flat)?;
        for (k, v) in flat {
            self.set(&k, v)?;
        }
        Ok(())
    }

    /// Applies a `key=value` override; the value is read as TOML, falling back to a bare string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(assignment, "overrides must look like key=value"))?;
        let (key, raw) = (key.trim(), raw.trim());
        let value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string()));
        self.set(key, value)
    }

    pub fn float(&self, key: &str) -> f64 {
        self.values[key].as_float().expect("validated float")
    }

    pub fn int(&self, key: &str) -> i64 {
        self.values[key].as_integer().expect("validated integer")
    }

    pub fn string(&self, key: &str) -> &str {
        self.values[key].as_str().expect("validated string")
    }

    pub fn boolean(&self, key: &str) -> bool {
        self.values[key].as_bool().expect("validated bool")
    }

    /// `key = value` lines in key order.
    pub fn echo(&self) -> Vec<(String, String)> {
        self.values.iter().map(|(k, v)| (k.clone(), v.to_string())).collect()
    }

    pub fn build(&self) -> Result<ExperimentConfig> {
        let eta = self.float("physics.eta");
        let hbar = self.float("physics.hbar");
        let mass = self.float("physics.mass");
        if self.string("window.kind") != "boxcar" {
            return Err(Error::config("window.kind", "only boxcar windows are supported"));
        }
        let mode = match self.string("window.mode") {
            "temporal" => WindowMode::Temporal,
            "spatial" => WindowMode::Spatial,
            other => return Err(Error::config("window.mode", format!("expected temporal or spatial, got {other}"))),
        };
        let window = Window::boxcar_at(self.float("window.extent"), self.float("window.center"))
            .map_err(|_| Error::config("window.extent", "must be positive and finite"))?;
        let pre = self.spin("pre")?;
        let post = self.spin("post")?;
        let tensor = match self.string("tensor.kind") {
            "maxwell" => {
                let (hxx, hxz) = (self.float("tensor.hxx"), self.float("tensor.hxz"));
                if hxx == 0.0 && hxz == 0.0 {
                    return Err(Error::config("tensor.hxx", "hxx and hxz are both zero: no coupling"));
                }
                CouplingTensor::maxwell(hxx, hxz)
            }
            "textbook" => CouplingTensor::z_dyad([0.0, 0.0, 1.0]),
            other => return Err(Error::config("tensor.kind", format!("expected maxwell or textbook, got {other}"))),
        };

        let mut axes = Vec::new();
        let mut sigma = [0.0; 3];
        let mut center = [0.0; 3];
        for axis in Axis::ALL {
            let n = self.int(&format!("grid.{axis}.n"));
            sigma[axis.index()] = self.float(&format!("packet.sigma.{axis}"));
            center[axis.index()] = self.float(&format!("packet.center.{axis}"));
            if n == 0 {
                continue;
            }
            if n < 0 {
                return Err(Error::config(format!("grid.{axis}.n"), "must be >= 0"));
            }
            axes.push(AxisGrid::new(axis, n as usize, self.float(&format!("grid.{axis}.pmax"))));
        }
        if axes.is_empty() {
            return Err(Error::config("grid", "every axis is disabled"));
        }
        let grid = GridSpec::new(axes, hbar)?;
        let steps = self.int("run.steps");
        if steps <= 0 {
            return Err(Error::config("run.steps", "must be positive"));
        }
        let tau = self.float("run.tau");
        let config = ExperimentConfig {
            eta,
            hbar,
            mass,
            window,
            mode,
            tensor,
            pre,
            post,
            grid,
            packet: GaussianSpec::new(center, sigma, pre),
            tau_i: tau,
            tau_f: tau,
            steps: steps as usize,
            kinetic: self.boolean("run.kinetic"),
        };
        config.validate()?;
        Ok(config)
    }

    fn spin(&self, which: &str) -> Result<SpinorState> {
        let axis_key = format!("spin.{which}.axis");
        let toward = match self.string(&axis_key) {
            "x" => Axis::X,
            "y" => Axis::Y,
            other => return Err(Error::config(axis_key, format!("expected x or y, got {other}"))),
        };
        let s_key = format!("spin.{which}.s");
        let s = match self.int(&s_key) {
            0 => 0,
            1 => 1,
            other => return Err(Error::config(s_key, format!("expected 0 or 1, got {other}"))),
        };
        let theta = self.float(&format!("spin.{which}.theta"));
        eigenspinor(&UnitDirection::tilted(theta, toward)?, s)
    }
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, Value)>) -> Result<()> {
    match value {
        Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out)?;
            }
            Ok(())
        }
        Value::Array(_) | Value::Datetime(_) => Err(Error::config(prefix, "arrays and dates are not accepted")),
        v => {
            out.push((prefix.to_string(), v.clone()));
            Ok(())
        }
    }
}

/// Parses a document on top of the defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut s = Settings::default();
    s.merge_document(text)?;
    s.build()
}

/// The pre-selection tilt used by the Fig. 2 style presets.
pub const FIG2_THETA: f64 = 9.0 * PI / 10.0;
