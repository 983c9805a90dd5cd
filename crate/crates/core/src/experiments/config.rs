use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::{Deserialize, Serialize};

use super::permeability::GeneratorSpec;
use crate::error::{Error, Result};
use crate::timeint::Source;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// `f = 0`
    #[default]
    Linear,
    /// `f(p) = −p(1 − p)(1 + p)`
    Semilinear,
}

impl Model {
    pub fn source(self) -> Source {
        match self {
            Model::Linear => Source::Zero,
            Model::Semilinear => Source::Cubic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialCondition {
    /// `p₀ = x(1 − x) y(1 − y)`
    #[default]
    Bubble,
    Zero,
}

impl InitialCondition {
    pub fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            InitialCondition::Bubble => x * (1.0 - x) * y * (1.0 - y),
            InitialCondition::Zero => 0.0,
        }
    }
}

/// Shipped raster fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinField {
    Linear,
    Semilinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PermeabilitySource {
    Builtin { name: BuiltinField },
    Raster { path: PathBuf },
    Generator(GeneratorSpec),
    Uniform { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mesh: MeshSpec,
    /// Defaults to the shipped raster of the chosen model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permeability: Option<PermeabilitySource>,
    /// `κ₂/κ₁` used by the generator.
    #[serde(default = "default_contrast")]
    pub contrast: f64,
    pub n_points: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_gamma", deserialize_with = "one_or_many")]
    pub gamma: Vec<f64>,
    #[serde(default = "default_m", deserialize_with = "one_or_many")]
    pub m: Vec<usize>,
    #[serde(default = "default_n_t", deserialize_with = "one_or_many")]
    pub n_t: Vec<usize>,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default)]
    pub model: Model,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default = "default_reference_n_t")]
    pub reference_n_t: usize,
    /// Step count of the sweep over γ.
    #[serde(default = "default_fixed_n_t")]
    pub fixed_n_t: usize,
    /// γ of the sweep over `N_t`.
    #[serde(default = "default_fixed_gamma")]
    pub fixed_gamma: f64,
    /// Coarse dimension per point of the exported fields.
    #[serde(default = "default_field_m")]
    pub field_m: usize,
    #[serde(default = "default_picard")]
    pub picard: usize,
    #[serde(default = "default_lloyd_max_iters")]
    pub lloyd_max_iters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_contrast() -> f64 {
    1e4
}
fn default_beta() -> f64 {
    0.01
}
fn default_gamma() -> Vec<f64> {
    vec![3.0]
}
fn default_m() -> Vec<usize> {
    (3..=10).collect()
}
fn default_n_t() -> Vec<usize> {
    vec![50]
}
fn default_t_max() -> f64 {
    0.2
}
fn default_reference_n_t() -> usize {
    30_000
}
fn default_fixed_n_t() -> usize {
    50
}
fn default_fixed_gamma() -> f64 {
    3.0
}
fn default_field_m() -> usize {
    5
}
fn default_picard() -> usize {
    1
}
fn default_lloyd_max_iters() -> usize {
    200
}

/// Accept `x` as shorthand for `[x]`.
fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    struct V<T>(std::marker::PhantomData<T>);
    impl<'de, T: Deserialize<'de>> Visitor<'de> for V<T> {
        type Value = Vec<T>;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a value or a list of values")
        }
        fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Vec<T>, A::Error> {
            let mut out = Vec::new();
            while let Some(x) = seq.next_element()? {
                out.push(x);
            }
            Ok(out)
        }
        fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Vec<T>, E> {
            T::deserialize(de::value::U64Deserializer::new(v)).map(|x| vec![x])
        }
        fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Vec<T>, E> {
            T::deserialize(de::value::I64Deserializer::new(v)).map(|x| vec![x])
        }
        fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Vec<T>, E> {
            T::deserialize(de::value::F64Deserializer::new(v)).map(|x| vec![x])
        }
    }
    d.deserialize_any(V(std::marker::PhantomData))
}

impl ExperimentConfig {
    /// Parse and validate a JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.to_string();
            // Missing and unknown fields are reported one level up.
            let key = match (path.as_str(), backticked(&msg)) {
                (".", Some(k)) => k,
                (p, Some(k)) if msg.starts_with("missing field") => format!("{p}.{k}"),
                (p, _) => p.to_string(),
            };
            Error::config(key, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, m: String| Err(Error::config(k, m));
        if self.mesh.nx == 0 || self.mesh.ny == 0 {
            return bad("mesh", format!("mesh needs nx, ny >= 1, got {}x{}", self.mesh.nx, self.mesh.ny));
        }
        if self.n_points < 2 {
            return bad("n_points", format!("need at least 2 points, got {}", self.n_points));
        }
        if !(self.contrast >= 1.0) || !self.contrast.is_finite() {
            return bad("contrast", format!("contrast must be finite and >= 1, got {}", self.contrast));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return bad("beta", format!("beta must be finite and >= 0, got {}", self.beta));
        }
        for (key, list_empty) in [("gamma", self.gamma.is_empty()), ("m", self.m.is_empty()), ("n_t", self.n_t.is_empty())] {
            if list_empty {
                return bad(key, "list must not be empty".into());
            }
        }
        for &g in self.gamma.iter().chain([&self.fixed_gamma]) {
            if !(g > 1.0) || !g.is_finite() {
                return bad("gamma", format!("gamma must exceed 1, got {g}"));
            }
        }
        if self.m.iter().chain([&self.field_m]).any(|&m| m == 0) {
            return bad("m", "basis counts must be >= 1".into());
        }
        if self.n_t.iter().chain([&self.fixed_n_t, &self.reference_n_t]).any(|&n| n == 0) {
            return bad("n_t", "step counts must be >= 1".into());
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return bad("t_max", format!("t_max must be positive, got {}", self.t_max));
        }
        if self.picard == 0 {
            return bad("picard", "picard count must be >= 1".into());
        }
        if let Some(PermeabilitySource::Uniform { value }) = &self.permeability {
            if !(*value > 0.0) || !value.is_finite() {
                return bad("permeability.value", format!("must be positive, got {value}"));
            }
        }
        if let Some(PermeabilitySource::Generator(g)) = &self.permeability {
            g.validate().map_err(|e| Error::config("permeability", e.to_string()))?;
        }
        Ok(())
    }

    /// Largest basis count any run needs.
    pub fn max_m(&self) -> usize {
        self.m.iter().copied().chain([self.field_m]).max().unwrap_or(1)
    }

    /// γ values needed by a sweep, sorted and deduplicated.
    pub fn all_gammas(&self) -> Vec<f64> {
        let mut g: Vec<f64> = self.gamma.iter().copied().chain([self.fixed_gamma]).collect();
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    }
}

fn backticked(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text)
}
