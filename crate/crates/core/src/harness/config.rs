use std::fmt;
use std::path::{Component, Path};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::Side;
use crate::error::{Error, Result};
use crate::problems::{builtin, MinimaxProblem, SmoothedState};
use crate::solvers::{AlgoParams, Method, StopMode, StoppingRule};

/// Solver selector of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Dsgda,
    SgdaPrimal,
    SgdaDual,
    Gda,
    Eg,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Dsgda => "dsgda",
            Algorithm::SgdaPrimal => "sgda-primal",
            Algorithm::SgdaDual => "sgda-dual",
            Algorithm::Gda => "gda",
            Algorithm::Eg => "eg",
        })
    }
}

/// Parameter table. Which keys are required depends on the algorithm:
/// DS-GDA takes all six smoothing parameters, one-sided S-GDA may omit the
/// unused side (`mu`, `r2` for the primal side; `beta`, `r1` for the dual
/// side), GDA takes `c` and `alpha`, extragradient takes `step`. Missing
/// baseline step sizes default to `1/(2L)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl From<AlgoParams> for ParamSpec {
    fn from(p: AlgoParams) -> Self {
        Self {
            c: Some(p.c),
            alpha: Some(p.alpha),
            beta: Some(p.beta),
            mu: Some(p.mu),
            r1: Some(p.r1),
            r2: Some(p.r2),
            step: None,
        }
    }
}

/// Initialization: one point, an interior `k x k` lattice of `n = k^2`
/// points, or `n` seeded uniform draws from `X x Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InitRepr", into = "InitRepr")]
pub enum Init {
    Point(f64, f64),
    Grid(usize),
    Random(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum InitRepr {
    Point(Vec<f64>),
    Text(String),
}

impl TryFrom<InitRepr> for Init {
    type Error = String;

    fn try_from(r: InitRepr) -> std::result::Result<Self, String> {
        match r {
            InitRepr::Point(v) => match v[..] {
                [x, y] => Ok(Init::Point(x, y)),
                _ => Err(format!("init point needs 2 coordinates, got {}", v.len())),
            },
            InitRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Init> for InitRepr {
    fn from(i: Init) -> Self {
        match i {
            Init::Point(x, y) => InitRepr::Point(vec![x, y]),
            other => InitRepr::Text(other.to_string()),
        }
    }
}

impl fmt::Display for Init {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Init::Point(x, y) => write!(f, "({x}, {y})"),
            Init::Grid(n) => write!(f, "grid({n})"),
            Init::Random(n) => write!(f, "random({n})"),
        }
    }
}

impl std::str::FromStr for Init {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let call = |name: &str| {
            s.strip_prefix(name)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
                .map(str::trim)
        };
        let count = |arg: &str| {
            arg.parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| format!("expected a positive count, got `{arg}`"))
        };
        if let Some(arg) = call("grid") {
            let n = count(arg)?;
            let k = (n as f64).sqrt().round() as usize;
            if k * k != n {
                return Err(format!("grid({n}): count must be a perfect square"));
            }
            return Ok(Init::Grid(n));
        }
        if let Some(arg) = call("random") {
            return Ok(Init::Random(count(arg)?));
        }
        let parts: Vec<&str> = s
            .trim_matches(|c| c == '(' || c == ')')
            .split(',')
            .collect();
        if let [x, y] = parts[..] {
            if let (Ok(x), Ok(y)) = (x.trim().parse(), y.trim().parse()) {
                return Ok(Init::Point(x, y));
            }
        }
        Err(format!(
            "expected `(x0, y0)`, `grid(n)` or `random(n)`, got `{s}`"
        ))
    }
}

/// Trajectory recording stride.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    #[serde(rename = "every-k")]
    pub every_k: u64,
}

impl Default for Record {
    fn default() -> Self {
        Self { every_k: 1 }
    }
}

fn default_outputs() -> String {
    "run".into()
}

/// One experiment: problem, solver, parameters, initialization, stopping
/// rule, recording stride and output stem (relative to the output
/// directory; the extension follows the export format).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    pub algorithm: Algorithm,
    pub init: Init,
    #[serde(default = "default_outputs")]
    pub outputs: String,
    /// Seed of `random(n)` initializations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: ParamSpec,
    #[serde(default)]
    pub stop: StoppingRule,
    #[serde(default)]
    pub record: Record,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("config", e.message().to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config { field, message } => Error::Config {
                field,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })
    }

    pub fn problem(&self) -> Result<MinimaxProblem> {
        builtin(&self.problem).map_err(|e| Error::config("problem", e.to_string()))
    }

    /// The solver with defaults filled in, validated against the problem.
    pub fn method(&self, prob: &MinimaxProblem) -> Result<Method> {
        let p = &self.params;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| {
                Error::config(
                    format!("params.{name}"),
                    format!("required by {}", self.algorithm),
                )
            })
        };
        let forbid = |v: Option<f64>, name: &str| match v {
            Some(_) => Err(Error::config(
                format!("params.{name}"),
                format!("not used by {}", self.algorithm),
            )),
            None => Ok(()),
        };
        let smoothed = |beta: f64, mu: f64, r1: f64, r2: f64| -> Result<AlgoParams> {
            forbid(p.step, "step")?;
            Ok(AlgoParams {
                c: need(p.c, "c")?,
                alpha: need(p.alpha, "alpha")?,
                beta,
                mu,
                r1,
                r2,
            })
        };
        let default_step = 1.0 / (2.0 * prob.lip_max());
        let m = match self.algorithm {
            Algorithm::Dsgda => Method::Dsgda(smoothed(
                need(p.beta, "beta")?,
                need(p.mu, "mu")?,
                need(p.r1, "r1")?,
                need(p.r2, "r2")?,
            )?),
            Algorithm::SgdaPrimal => Method::Sgda {
                params: smoothed(
                    need(p.beta, "beta")?,
                    p.mu.unwrap_or(1.0),
                    need(p.r1, "r1")?,
                    p.r2.unwrap_or(1.0),
                )?,
                side: Side::Primal,
            },
            Algorithm::SgdaDual => Method::Sgda {
                params: smoothed(
                    p.beta.unwrap_or(1.0),
                    need(p.mu, "mu")?,
                    p.r1.unwrap_or(1.0),
                    need(p.r2, "r2")?,
                )?,
                side: Side::Dual,
            },
            Algorithm::Gda => {
                for (v, name) in [
                    (p.beta, "beta"),
                    (p.mu, "mu"),
                    (p.r1, "r1"),
                    (p.r2, "r2"),
                    (p.step, "step"),
                ] {
                    forbid(v, name)?;
                }
                Method::Gda {
                    c: p.c.unwrap_or(default_step),
                    alpha: p.alpha.unwrap_or(default_step),
                }
            }
            Algorithm::Eg => {
                for (v, name) in [
                    (p.c, "c"),
                    (p.alpha, "alpha"),
                    (p.beta, "beta"),
                    (p.mu, "mu"),
                    (p.r1, "r1"),
                    (p.r2, "r2"),
                ] {
                    forbid(v, name)?;
                }
                Method::Eg {
                    step: p.step.unwrap_or(default_step),
                }
            }
        };
        m.validate()
            .map_err(|e| Error::config("params", e.to_string()))?;
        Ok(m)
    }

    /// Initial points in `X x Y`. `grid(k^2)` places `k` points per axis at
    /// `lo + (hi - lo) i/(k + 1)`, `i = 1..k`, x-major.
    pub fn init_points(&self, prob: &MinimaxProblem) -> Result<Vec<(f64, f64)>> {
        if prob.dim_x() != 1 || prob.dim_y() != 1 {
            return Err(Error::config(
                "init",
                "configs support scalar problems only",
            ));
        }
        let (xl, xh) = (prob.x_set().lower()[0], prob.x_set().upper()[0]);
        let (yl, yh) = (prob.y_set().lower()[0], prob.y_set().upper()[0]);
        let pts = match self.init {
            Init::Point(x, y) => vec![(x, y)],
            Init::Grid(n) => {
                let k = (n as f64).sqrt().round() as usize;
                let axis = |lo: f64, hi: f64| -> Vec<f64> {
                    (1..=k)
                        .map(|i| lo + (hi - lo) * i as f64 / (k + 1) as f64)
                        .collect()
                };
                let ys = axis(yl, yh);
                axis(xl, xh)
                    .into_iter()
                    .flat_map(|x| ys.iter().map(move |&y| (x, y)))
                    .collect()
            }
            Init::Random(n) => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed.unwrap_or(0));
                (0..n)
                    .map(|_| (rng.random_range(xl..=xh), rng.random_range(yl..=yh)))
                    .collect()
            }
        };
        for &(x, y) in &pts {
            prob.check_feasible(&[x], &[y])
                .map_err(|e| Error::config("init", e.to_string()))?;
        }
        Ok(pts)
    }

    /// Structural checks that need no solver run.
    pub fn validate(&self) -> Result<()> {
        let prob = self.problem()?;
        self.method(&prob)?;
        self.init_points(&prob)?;
        self.stop
            .validate()
            .map_err(|e| Error::config("stop", e.to_string()))?;
        if self.record.every_k == 0 {
            return Err(Error::config("record.every-k", "must be at least 1"));
        }
        check_output_stem(&self.outputs)
    }

    /// One single-point config per initial point. Multi-point members get
    /// the output stem `<outputs>-<index>`.
    pub fn expand(&self) -> Result<Vec<RunConfig>> {
        let prob = self.problem()?;
        let pts = self.init_points(&prob)?;
        if let Init::Point(..) = self.init {
            return Ok(vec![self.clone()]);
        }
        let width = pts.len().saturating_sub(1).to_string().len();
        Ok(pts
            .into_iter()
            .enumerate()
            .map(|(i, (x, y))| RunConfig {
                init: Init::Point(x, y),
                outputs: format!("{}-{i:0width$}", self.outputs),
                ..self.clone()
            })
            .collect())
    }

    pub fn initial_state(&self) -> Result<SmoothedState> {
        match self.init {
            Init::Point(x, y) => Ok(SmoothedState::scalar(x, y, x, y)),
            other => Err(Error::config(
                "init",
                format!("{other} describes several runs; expand the config first"),
            )),
        }
    }

    /// Apply command-line overrides of the stopping rule and seed.
    pub fn with_overrides(
        mut self,
        tol: Option<f64>,
        max_iters: Option<u64>,
        seed: Option<u64>,
    ) -> Self {
        if let Some(t) = tol {
            self.stop.tol = t;
        }
        if let Some(m) = max_iters {
            self.stop.max_iters = m;
        }
        if seed.is_some() {
            self.seed = seed;
        }
        self
    }

    /// Anchor-free methods never move `z`, `v`, so the proximal-gap test
    /// becomes the step test for them.
    pub(crate) fn effective_stop(&self, method: &Method) -> StoppingRule {
        let mut s = self.stop;
        if s.mode == StopMode::ProximalGap {
            s.mode = method.default_stop_mode();
        }
        s
    }
}

/// Output stems must stay inside the output directory.
pub(crate) fn check_output_stem(stem: &str) -> Result<()> {
    let p = Path::new(stem);
    if stem.is_empty() || !p.components().all(|c| matches!(c, Component::Normal(_))) {
        return Err(Error::config(
            "outputs",
            format!("`{stem}` must be a relative path without `..`"),
        ));
    }
    Ok(())
}
