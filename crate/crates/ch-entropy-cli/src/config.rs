//! Run configuration: a JSON document with command-line overrides.

use std::path::PathBuf;

use ch_entropy::zoo::ExampleSpec;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Crvol,
    Entropy,
    CheckTheorem2,
    CheckMonotonicity,
    CheckRegularity,
    CheckRankone,
    ListExamples,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Crvol => "crvol",
            Command::Entropy => "entropy",
            Command::CheckTheorem2 => "check-theorem2",
            Command::CheckMonotonicity => "check-monotonicity",
            Command::CheckRegularity => "check-regularity",
            Command::CheckRankone => "check-rankone",
            Command::ListExamples => "list-examples",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// The `tau` grid of the entropy search, `2^min_exp ..= 2^max_exp`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TauGrid {
    pub min_exp: i32,
    pub max_exp: i32,
    pub points: usize,
}

impl Default for TauGrid {
    fn default() -> Self {
        TauGrid { min_exp: -6, max_exp: 6, points: 25 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative slack for the entropy/CR-volume inequality.
    pub relative: f64,
    /// Extrapolated boundary witnesses.
    pub witness: f64,
    /// Allowed negative part of `Q`.
    pub q_floor: f64,
    /// Relative residual of the rank-one relations.
    pub rank_one: f64,
    /// Half-width of decay-rate windows.
    pub slope_window: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { relative: 1e-3, witness: 1e-3, q_floor: 1e-8, rank_one: 1e-4, slope_window: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Samples {
    pub monotonicity: usize,
    pub rank_one_charts: usize,
    /// Leading scales of the grid checked for monotonicity in `tau`.
    pub monotone_scales: usize,
}

impl Default for Samples {
    fn default() -> Self {
        Samples { monotonicity: 200, rank_one_charts: 20, monotone_scales: 15 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub example: Option<ExampleSpec>,
    /// Quadrature nodes per link axis.
    #[serde(default)]
    pub nodes: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Largest truncation radius of the entropy functional.
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default)]
    pub tau: TauGrid,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub samples: Samples,
    // output plumbing does not enter the hash
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing)]
    pub format: Format,
}

fn default_r_max() -> f64 {
    24.0
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            example: None,
            nodes: None,
            seed: 0,
            r_max: default_r_max(),
            tau: TauGrid::default(),
            tolerances: Tolerances::default(),
            samples: Samples::default(),
            out: None,
            format: Format::Json,
        }
    }

    pub fn with_example(mut self, spec: ExampleSpec) -> Self {
        self.example = Some(spec);
        self
    }

    /// Parses and validates a JSON document.
    pub fn from_value(value: Value) -> Result<Self, CliError> {
        let config: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| CliError::Schema {
            path: schema_path(&e.path().to_string()),
            message: e.inner().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| CliError::Schema { path: "$".into(), message: format!("not valid JSON: {e}") })?;
        Self::from_value(value)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |path: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::schema(path, format!("must be positive, got {v}")))
            }
        };
        let t = &self.tolerances;
        positive("tolerances.relative", t.relative)?;
        positive("tolerances.witness", t.witness)?;
        positive("tolerances.q_floor", t.q_floor)?;
        positive("tolerances.rank_one", t.rank_one)?;
        positive("tolerances.slope_window", t.slope_window)?;
        if !(self.r_max >= 6.0 && self.r_max.is_finite()) {
            return Err(CliError::schema(
                "r_max",
                format!("must be at least the first truncation radius 6, got {}", self.r_max),
            ));
        }
        if self.tau.min_exp > self.tau.max_exp {
            return Err(CliError::schema("tau.min_exp", "exceeds tau.max_exp"));
        }
        if self.tau.points < 2 {
            return Err(CliError::schema("tau.points", "need at least 2 scales"));
        }
        if self.nodes == Some(0) {
            return Err(CliError::schema("nodes", "must be at least 1"));
        }
        if let Some(spec) = &self.example {
            if spec.name.is_empty() {
                return Err(CliError::schema("example.name", "must not be empty"));
            }
            for (k, v) in &spec.params {
                if !v.is_finite() {
                    return Err(CliError::schema(&format!("example.params.{k}"), "must be finite"));
                }
            }
        }
        Ok(())
    }

    /// The example with the `nodes` override folded into its parameters.
    pub fn example_spec(&self) -> Option<ExampleSpec> {
        let mut spec = self.example.clone()?;
        if let Some(k) = self.nodes {
            spec.params.insert("nodes".into(), k as f64);
        }
        Some(spec)
    }

    /// SHA-256 of the canonical JSON of the numerical inputs.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

fn schema_path(p: &str) -> String {
    if p.is_empty() || p == "." {
        "$".into()
    } else {
        p.to_string()
    }
}

/// Command-line settings layered over the JSON document.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub command: Option<Command>,
    pub example: Option<String>,
    pub n: Option<u64>,
    pub nodes: Option<u64>,
    pub seed: Option<u64>,
    pub r_max: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl Overrides {
    /// Applies the overrides to a parsed document, so that schema errors
    /// still point at field paths.
    pub fn apply(&self, mut doc: Value) -> Result<Value, CliError> {
        let root = doc.as_object_mut().ok_or_else(|| CliError::schema("$", "the config must be a JSON object"))?;
        if let Some(c) = self.command {
            root.insert("command".into(), Value::from(c.as_str()));
        }
        if let Some(name) = &self.example {
            // a new example starts from its default parameters
            let keep = match root.get("example") {
                Some(Value::Object(e)) if e.get("name").and_then(Value::as_str) == Some(name) => {
                    e.get("params").cloned()
                }
                _ => None,
            };
            let mut e = Map::new();
            e.insert("name".into(), Value::from(name.clone()));
            if let Some(p) = keep {
                e.insert("params".into(), p);
            }
            root.insert("example".into(), Value::Object(e));
        }
        if let Some(n) = self.n {
            let example = root
                .get_mut("example")
                .and_then(Value::as_object_mut)
                .ok_or_else(|| CliError::schema("example", "--n needs an example"))?;
            let params = example.entry("params").or_insert_with(|| Value::Object(Map::new()));
            params
                .as_object_mut()
                .ok_or_else(|| CliError::schema("example.params", "must be an object"))?
                .insert("n".into(), Value::from(n as f64));
        }
        if let Some(k) = self.nodes {
            root.insert("nodes".into(), Value::from(k));
        }
        if let Some(s) = self.seed {
            root.insert("seed".into(), Value::from(s));
        }
        if let Some(r) = self.r_max {
            root.insert("r_max".into(), Value::from(r));
        }
        if let Some(out) = &self.out {
            root.insert("out".into(), Value::from(out.to_string_lossy().into_owned()));
        }
        if let Some(f) = self.format {
            root.insert("format".into(), Value::from(if f == Format::Csv { "csv" } else { "json" }));
        }
        Ok(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document() {
        let c = RunConfig::from_json(r#"{"command": "entropy", "example": {"name": "real_slice"}}"#).unwrap();
        assert_eq!(c.command, Command::Entropy);
        assert_eq!(c.r_max, 24.0);
        assert_eq!(c.tau, TauGrid::default());
    }

    #[test]
    fn unknown_fields_are_reported_with_their_path() {
        let err = RunConfig::from_json(r#"{"command": "crvol", "tau": {"points": 5, "step": 2}}"#).unwrap_err();
        match err {
            CliError::Schema { path, message } => {
                assert_eq!(path, "tau.step");
                assert!(message.contains("step"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_types_are_reported_with_their_path() {
        let err = RunConfig::from_json(r#"{"command": "crvol", "tolerances": {"witness": "small"}}"#).unwrap_err();
        assert!(matches!(err, CliError::Schema { ref path, .. } if path == "tolerances.witness"), "{err:?}");
    }

    #[test]
    fn nonpositive_tolerances_are_rejected() {
        let err = RunConfig::from_json(r#"{"command": "crvol", "tolerances": {"q_floor": 0}}"#).unwrap_err();
        assert!(matches!(err, CliError::Schema { ref path, .. } if path == "tolerances.q_floor"), "{err:?}");
    }

    #[test]
    fn overrides_replace_the_example_and_set_n() {
        let doc = serde_json::json!({"command": "crvol", "example": {"name": "real_slice", "params": {"n": 2}}});
        let o = Overrides {
            example: Some("legendrian_great_sphere".into()),
            n: Some(1),
            seed: Some(5),
            ..Default::default()
        };
        let c = RunConfig::from_value(o.apply(doc).unwrap()).unwrap();
        let spec = c.example.unwrap();
        assert_eq!(spec.name, "legendrian_great_sphere");
        assert_eq!(spec.params.get("n"), Some(&1.0));
        assert_eq!(c.seed, 5);
    }

    #[test]
    fn hash_ignores_output_plumbing() {
        let a = RunConfig::new(Command::Crvol);
        let mut b = a.clone();
        b.out = Some("elsewhere".into());
        b.format = Format::Csv;
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
