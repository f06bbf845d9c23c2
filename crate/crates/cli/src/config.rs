use std::path::{Path, PathBuf};
use std::time::Duration;

use pathopt_core::apps::{recipe_by_name, Recipe, BANDWIDTH};
use pathopt_core::pathgen::SelectStrategy;
use pathopt_core::topology::{fat_tree, Topology};
use pathopt_core::traffic::{gravity_matrix, uniform_matrix, TrafficMatrix};
use pathopt_lp::MilpOptions;
use serde::Deserialize;

use crate::CliError;

/// A topology file (JSON, or GraphML by extension) or a generated fat tree.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum TopologySource {
    File(PathBuf),
    FatTree { fat_tree: i64 },
}

/// A traffic file or a generated matrix.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum TrafficSource {
    File(PathBuf),
    Gravity { gravity: GravitySpec },
    Uniform { uniform: UniformSpec },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GravitySpec {
    pub total: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformSpec {
    pub volume: f64,
}

/// Run configuration. Relative file names resolve against the config's
/// directory.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub topology: TopologySource,
    pub traffic: TrafficSource,
    pub recipe: String,
    #[serde(default)]
    pub recipe_params: serde_json::Value,
    /// Defaults to the recipe's.
    pub select_number: Option<usize>,
    pub strategy: Option<SelectStrategy>,
    #[serde(default)]
    pub seed: u64,
    pub gap: Option<f64>,
    pub time_limit_s: Option<f64>,
    /// Path cache written by an earlier run; generation is skipped when set.
    pub paths: Option<PathBuf>,
    pub max_len: Option<usize>,
    pub max_count: Option<usize>,
    /// Uniform bandwidth for every link, replacing the topology's.
    pub link_capacity: Option<f64>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Config {
    pub fn from_json_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, CliError> {
        let mut cfg: Config =
            serde_json::from_str(text).map_err(|e| CliError::Input { path: "config".into(), msg: e.to_string() })?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Config::from_json_str(&text, base).map_err(|e| match e {
            CliError::Input { msg, .. } => CliError::Input { path: path.display().to_string(), msg },
            other => other,
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// Everything needed to generate, select and solve.
#[derive(Clone, Debug)]
pub struct Instance {
    pub topo: Topology,
    /// Traffic as prepared by the recipe.
    pub tm: TrafficMatrix,
    pub recipe: Recipe,
    pub seed: u64,
    pub opts: MilpOptions,
    pub paths_cache: Option<PathBuf>,
}

impl Instance {
    pub fn from_config(cfg: &Config) -> Result<Self, CliError> {
        let mut recipe = recipe_by_name(&cfg.recipe, &cfg.recipe_params)?;
        if let Some(n) = cfg.select_number {
            recipe.select_number = n;
        }
        if let Some(s) = cfg.strategy {
            recipe.strategy = s;
        }
        if let Some(n) = cfg.max_len {
            recipe.gen.max_len = n;
        }
        if let Some(n) = cfg.max_count {
            recipe.gen.max_count = n;
        }
        let mut topo = match &cfg.topology {
            TopologySource::File(p) => {
                let p = cfg.resolve(p);
                Topology::load(&p).map_err(|e| CliError::input(&p, e))?
            }
            TopologySource::FatTree { fat_tree: k } => {
                fat_tree(*k).map_err(|e| CliError::Input { path: "topology".into(), msg: e.to_string() })?
            }
        };
        if let Some(c) = cfg.link_capacity {
            topo = topo.with_uniform_link_capacity(BANDWIDTH, c);
        }
        let tm = match &cfg.traffic {
            TrafficSource::File(p) => {
                let p = cfg.resolve(p);
                TrafficMatrix::load(&p, Some(&topo)).map_err(|e| CliError::input(&p, e))?
            }
            TrafficSource::Gravity { gravity } => gravity_matrix(&topo, gravity.total, gravity.seed)
                .map_err(|e| CliError::Input { path: "traffic".into(), msg: e.to_string() })?,
            TrafficSource::Uniform { uniform } => uniform_matrix(&topo, uniform.volume),
        };
        let mut opts = MilpOptions::default();
        let bad = |what: &str, v: f64| CliError::Input { path: "config".into(), msg: format!("{what} must be a non-negative number, got {v}") };
        if let Some(g) = cfg.gap {
            if !(g.is_finite() && g >= 0.0) {
                return Err(bad("gap", g));
            }
            opts.gap = g;
        }
        if let Some(t) = cfg.time_limit_s {
            if !(t.is_finite() && t >= 0.0) {
                return Err(bad("time_limit_s", t));
            }
            opts.time_limit = Some(Duration::from_secs_f64(t));
        }
        Ok(Instance {
            tm: recipe.prepare_traffic(&tm),
            topo,
            recipe,
            seed: cfg.seed,
            opts,
            paths_cache: cfg.paths.as_ref().map(|p| cfg.resolve(p)),
        })
    }
}
