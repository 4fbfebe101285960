//! Scenario files: model, connection, simulation budget and the checks to run.

use serde::{Deserialize, Serialize};
use srpath_core::diffusion::{Scheme, SimConfig};
use srpath_core::error::{Error, Result};
use srpath_core::geometry::{canonical_connection, ConnectionData, LieAlgebraModel};
use srpath_core::linalg::{Mat, Vect};
use srpath_core::pathcalc::CameronMartinPath;
use srpath_core::registry;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectionKind {
    #[default]
    Canonical,
    Adjoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
}

/// Piecewise-linear Cameron–Martin path given by `(t, h(t))` nodes; `h(0) = 0`
/// is implied and `h` is held constant after the last node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub nodes: Vec<(f64, Vec<f64>)>,
}

impl PathSpec {
    /// Rises to `e₁` at `T/2`, then to `e₁ + … + e_d` at `T`.
    pub fn default_for(d: usize, horizon: f64) -> Self {
        let first: Vec<f64> = (0..d).map(|a| if a == 0 { 1.0 } else { 0.0 }).collect();
        PathSpec { nodes: vec![(0.5 * horizon, first), (horizon, vec![1.0; d])] }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let mut last = 0.0;
        for (t, v) in &self.nodes {
            if v.len() != d {
                return Err(Error::Config(format!("path node at t = {t} has {} entries, expected {d}", v.len())));
            }
            if !(*t > last) {
                return Err(Error::Config("path node times must be positive and increasing".into()));
            }
            last = *t;
        }
        Ok(())
    }

    pub fn value(&self, t: f64, d: usize) -> Vect {
        let mut prev = (0.0, Vect::zeros(d));
        for (tn, v) in &self.nodes {
            let v = Vect::from_slice(v);
            if t <= *tn {
                let w = (t - prev.0) / (tn - prev.0);
                return prev.1.scale(1.0 - w) + v.scale(w);
            }
            prev = (*tn, v);
        }
        prev.1
    }

    pub fn sample(&self, d: usize, horizon: f64, steps: usize) -> Result<CameronMartinPath> {
        self.validate(d)?;
        Ok(CameronMartinPath::from_fn(horizon, steps, |t| self.value(t, d)))
    }
}

/// Budget of the nested checks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NestedSpec {
    pub inner_paths: Option<usize>,
    pub inner_steps: Option<usize>,
    pub batches: Option<usize>,
}

/// One check with its parameters. Unset fields take per-check defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub name: String,
    /// Point-function id for single-time checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    /// Cylindrical-function id for path-space checks.
    #[serde(default, rename = "F", skip_serializing_if = "Option::is_none")]
    pub functional: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<PathSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<PathSpec>,
    #[serde(default, rename = "K", skip_serializing_if = "Option::is_none")]
    pub curvature_bound: Option<f64>,
    /// Evaluation time of `derivative` and `inequality_v`; outer time of `semigroup`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Extra time of `semigroup`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// Direction of `derivative`, covector of `small_time_ricci`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nested: Option<NestedSpec>,
}

impl CheckSpec {
    pub fn named(name: &str) -> Self {
        CheckSpec {
            name: name.into(),
            f: None,
            functional: None,
            k: None,
            h: None,
            curvature_bound: None,
            t: None,
            s: None,
            v: None,
            horizon: None,
            steps: None,
            paths: None,
            seed: None,
            nested: None,
        }
    }
}

/// Recognized check names.
pub const CHECK_NAMES: &[&str] = &[
    "derivative",
    "ibp_damped",
    "ibp_gradient",
    "quasi_invariance",
    "inequality_i",
    "inequality_ii",
    "inequality_v",
    "logsobolev",
    "poincare",
    "spectral_gap",
    "small_time_ricci",
    "clark_ocone",
    "semigroup",
    "pathwise",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Registry name or path to a model file.
    pub model: String,
    #[serde(default)]
    pub connection: ConnectionKind,
    pub horizon: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Curvature bound for every inequality check; defaults to the computed
    /// `K_sym` when neither this nor the check sets one.
    #[serde(default, rename = "K", skip_serializing_if = "Option::is_none")]
    pub curvature_bound: Option<f64>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub format: Format,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
}

fn default_workers() -> usize {
    1
}

fn default_format() -> Format {
    Format::Both
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            model: "heisenberg3".into(),
            connection: ConnectionKind::Canonical,
            horizon: 0.5,
            steps: 400,
            paths: 100_000,
            seed: 2024,
            scheme: Scheme::StratonovichMidpoint,
            curvature_bound: None,
            workers: 1,
            out: None,
            format: Format::Both,
            checks: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig { horizon: self.horizon, steps: self.steps, paths: self.paths, seed: self.seed, scheme: self.scheme }
    }

    /// Checks names, budgets and that the model resolves.
    pub fn validate(&self) -> Result<()> {
        self.sim_config().validate()?;
        let model = load_model(&self.model)?;
        for c in &self.checks {
            if !CHECK_NAMES.contains(&c.name.as_str()) {
                return Err(Error::UnknownId(c.name.clone()));
            }
            for p in [&c.k, &c.h].into_iter().flatten() {
                p.validate(model.rank())?;
            }
        }
        Ok(())
    }

    pub fn connection(&self, model: &LieAlgebraModel) -> ConnectionData {
        let conn = canonical_connection(model);
        match self.connection {
            ConnectionKind::Canonical => conn,
            ConnectionKind::Adjoint => conn.adjoint(model),
        }
    }
}

/// A model file: structure constants or a matrix realization.
///
/// ```toml
/// name = "heis"
/// rank = 2
/// frames = ["X", "Y", "Z"]
/// brackets = [[0, 1, 2, 1.0]]   # [E_i, E_j] = Σ c E_k as (i, j, k, c)
/// generators = [[[0,1,0],[0,0,0],[0,0,0]], …]   # optional
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub name: String,
    pub rank: usize,
    pub frames: Vec<String>,
    #[serde(default)]
    pub brackets: Vec<(usize, usize, usize, f64)>,
    #[serde(default)]
    pub generators: Option<Vec<Vec<Vec<f64>>>>,
}

impl ModelFile {
    pub fn build(&self) -> Result<LieAlgebraModel> {
        let to_mat = |rows: &Vec<Vec<f64>>| -> Result<Mat> {
            let m = rows.len();
            if rows.iter().any(|r| r.len() != m) {
                return Err(Error::Config("generators must be square".into()));
            }
            Ok(Mat::from_fn(m, m, |r, c| rows[r][c]))
        };
        let generators = match &self.generators {
            Some(gs) => Some(gs.iter().map(to_mat).collect::<Result<Vec<_>>>()?),
            None => None,
        };
        if self.brackets.is_empty() {
            if let Some(gs) = generators {
                return LieAlgebraModel::from_generators(&self.name, self.rank, self.frames.clone(), gs);
            }
        }
        let n = self.frames.len();
        let mut c = vec![0.0; n * n * n];
        for &(i, j, k, v) in &self.brackets {
            if i >= n || j >= n || k >= n {
                return Err(Error::Config(format!("bracket index out of range in ({i}, {j}, {k})")));
            }
            c[(i * n + j) * n + k] = v;
            c[(j * n + i) * n + k] = -v;
        }
        let model = LieAlgebraModel::new(&self.name, n, self.rank, self.frames.clone(), c)?;
        match generators {
            Some(gs) => model.with_realization(gs),
            None => Ok(model),
        }
    }
}

/// Registry name, or a path to a TOML model file.
pub fn load_model(spec: &str) -> Result<LieAlgebraModel> {
    match registry::model(spec) {
        Ok(m) => Ok(m),
        Err(err) => {
            let path = Path::new(spec);
            if path.extension().is_some_and(|e| e == "toml") || path.exists() {
                let text = std::fs::read_to_string(path)?;
                let file: ModelFile = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
                file.build()
            } else {
                Err(err)
            }
        }
    }
}
