//! Weight search: coordinate descent over per-parameter grids with seeded
//! restarts, under a per-intent verification-test guardrail.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::combiner::RankerConfig;
use crate::corpus::QueryRecord;
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::eval::bvt::{run_bvts, BvtCase};
use crate::eval::metrics::Judgments;
use crate::eval::replay::{graded_eval, sgcr_replay, GradedMetric};

/// Cross-products up to this size are sampled without replacement for restarts.
pub const EXHAUSTIVE_RESTART_LIMIT: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grid {
    /// `lo, lo*factor, ...` up to `hi`, optionally with 0 prepended.
    Geometric {
        lo: f64,
        hi: f64,
        factor: f64,
        #[serde(default)]
        include_zero: bool,
    },
    Points(Vec<f64>),
}

impl Grid {
    /// The default ladder: factor 2 over [initial/8, initial*8].
    pub fn around(initial: f64) -> Self {
        if initial > 0.0 {
            Grid::Geometric {
                lo: initial / 8.0,
                hi: initial * 8.0,
                factor: 2.0,
                include_zero: false,
            }
        } else {
            Grid::Geometric {
                lo: 0.125,
                hi: 8.0,
                factor: 2.0,
                include_zero: true,
            }
        }
    }

    /// Ascending, deduplicated grid points.
    pub fn points(&self) -> Result<Vec<f64>> {
        let mut pts = match self {
            Grid::Geometric {
                lo,
                hi,
                factor,
                include_zero,
            } => {
                if !(*lo > 0.0 && hi >= lo && *factor > 1.0 && hi.is_finite()) {
                    return Err(Error::Config(format!(
                        "geometric grid needs 0 < lo <= hi and factor > 1, got lo={lo} hi={hi} factor={factor}"
                    )));
                }
                let mut v = Vec::new();
                if *include_zero {
                    v.push(0.0);
                }
                let mut x = *lo;
                // tolerance so that lo * factor^n lands on hi despite rounding
                while x <= hi * (1.0 + 1e-9) {
                    v.push(x);
                    x *= factor;
                }
                v
            }
            Grid::Points(p) => p.clone(),
        };
        if pts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Config("grid points must be finite and >= 0".into()));
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        if pts.is_empty() {
            return Err(Error::Config("grid is empty".into()));
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeParam {
    /// `generic.<component>`, `intent.<intent>` or `trigger_threshold`.
    pub path: String,
    #[serde(default)]
    pub grid: Option<Grid>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveWeights {
    pub sgcr: f64,
    pub ndcg: f64,
    pub bvt: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self {
            sgcr: 1.0 / 3.0,
            ndcg: 1.0 / 3.0,
            bvt: 1.0 / 3.0,
        }
    }
}

fn default_k() -> usize {
    10
}
fn default_budget() -> usize {
    200
}
fn default_epsilon() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneSpec {
    pub params: Vec<FreeParam>,
    #[serde(default)]
    pub objective: ObjectiveWeights,
    #[serde(default = "default_k")]
    pub sgcr_k: usize,
    #[serde(default = "default_k")]
    pub ndcg_k: usize,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_epsilon")]
    pub guardrail_epsilon: f64,
}

impl TuneSpec {
    pub fn new(params: &[&str]) -> Self {
        Self {
            params: params
                .iter()
                .map(|p| FreeParam {
                    path: p.to_string(),
                    grid: None,
                })
                .collect(),
            objective: ObjectiveWeights::default(),
            sgcr_k: default_k(),
            ndcg_k: default_k(),
            budget: default_budget(),
            restarts: 0,
            seed: 0,
            guardrail_epsilon: default_epsilon(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.objective;
        if [w.sgcr, w.ndcg, w.bvt].iter().any(|x| !(*x >= 0.0)) || ((w.sgcr + w.ndcg + w.bvt) - 1.0).abs() > 1e-9 {
            return Err(Error::Config("objective weights must be >= 0 and sum to 1".into()));
        }
        if self.budget < 1 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        if self.params.is_empty() {
            return Err(Error::Config("no free parameters to tune".into()));
        }
        if !(self.guardrail_epsilon >= 0.0) {
            return Err(Error::Config("guardrail_epsilon must be >= 0".into()));
        }
        Ok(())
    }
}

/// Objective value plus the per-intent verification pass rates the guardrail checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub objective: f64,
    pub intent_pass_rates: BTreeMap<String, f64>,
}

pub trait Objective: Sync {
    fn evaluate(&self, config: &RankerConfig) -> Result<Evaluation>;
}

/// `α·SGCR + β·NDCG@k + γ·BVT pass rate` on an engine and its evaluation assets.
pub struct EngineObjective<'a> {
    pub engine: &'a Engine,
    pub log: &'a [QueryRecord],
    pub judgments: &'a Judgments,
    pub suite: &'a [BvtCase],
    pub weights: ObjectiveWeights,
    pub sgcr_k: usize,
    pub ndcg_k: usize,
}

impl<'a> EngineObjective<'a> {
    pub fn new(
        engine: &'a Engine,
        log: &'a [QueryRecord],
        judgments: &'a Judgments,
        suite: &'a [BvtCase],
        spec: &TuneSpec,
    ) -> Self {
        Self {
            engine,
            log,
            judgments,
            suite,
            weights: spec.objective,
            sgcr_k: spec.sgcr_k,
            ndcg_k: spec.ndcg_k,
        }
    }
}

impl Objective for EngineObjective<'_> {
    fn evaluate(&self, config: &RankerConfig) -> Result<Evaluation> {
        let w = self.weights;
        let mut objective = 0.0;
        if w.sgcr > 0.0 {
            if self.log.is_empty() {
                return Err(Error::Evaluation("objective needs SGCR but the query log is empty".into()));
            }
            objective += w.sgcr * sgcr_replay(self.log, self.engine, config, self.sgcr_k)?.value;
        }
        if w.ndcg > 0.0 {
            if self.judgments.is_empty() {
                return Err(Error::Evaluation("objective needs NDCG but the judgments are empty".into()));
            }
            let r = graded_eval(self.judgments, self.engine, config, GradedMetric::Ndcg, self.ndcg_k)?;
            if r.query_count == 0 {
                return Err(Error::Evaluation("no judged query has a positive grade".into()));
            }
            objective += w.ndcg * r.value;
        }
        let mut intent_pass_rates = BTreeMap::new();
        if !self.suite.is_empty() {
            let report = run_bvts(self.suite, self.engine, config);
            objective += w.bvt * report.pass_rate();
            intent_pass_rates = report
                .by_intent
                .iter()
                .map(|(k, t)| (k.clone(), t.pass_rate()))
                .collect();
        } else if w.bvt > 0.0 {
            return Err(Error::Evaluation("objective needs BVT pass rate but the suite is empty".into()));
        }
        Ok(Evaluation {
            objective,
            intent_pass_rates,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub evaluation: usize,
    pub objective: f64,
    pub accepted: bool,
    pub best_so_far: f64,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_config: RankerConfig,
    pub best_objective: f64,
    pub initial_objective: f64,
    pub trajectory: Vec<TrajectoryPoint>,
    pub evaluations: usize,
    pub guardrail_rejections: usize,
    /// The budget ran out before the first full sweep finished.
    pub incomplete: bool,
    pub sweeps: usize,
}

/// Grid position per parameter; `OFF_GRID` marks the initial value.
type Point = Vec<usize>;
const OFF_GRID: usize = usize::MAX;

struct Search<'a, O: Objective> {
    objective: &'a O,
    initial: &'a RankerConfig,
    paths: Vec<String>,
    initial_values: Vec<f64>,
    grids: Vec<Vec<f64>>,
    epsilon: f64,
    budget: usize,
    baseline: BTreeMap<String, f64>,
    memo: HashMap<Point, Option<f64>>,
    trajectory: Vec<TrajectoryPoint>,
    rejections: usize,
    best: Option<(f64, Point)>,
}

struct OutOfBudget;

impl<O: Objective> Search<'_, O> {
    fn values(&self, p: &Point) -> Vec<f64> {
        p.iter()
            .enumerate()
            .map(|(i, &g)| if g == OFF_GRID { self.initial_values[i] } else { self.grids[i][g] })
            .collect()
    }

    fn config(&self, p: &Point) -> Result<RankerConfig> {
        let mut c = self.initial.clone();
        for (path, v) in self.paths.iter().zip(self.values(p)) {
            c.set(path, v)?;
        }
        Ok(c)
    }

    fn better(a: &(f64, Point), b: &(f64, Point)) -> bool {
        a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
    }

    /// Objective of an accepted point, `None` when the guardrail rejects it.
    fn eval(&mut self, p: &Point) -> Result<std::result::Result<Option<f64>, OutOfBudget>> {
        if let Some(v) = self.memo.get(p) {
            return Ok(Ok(*v));
        }
        if self.trajectory.len() >= self.budget {
            return Ok(Err(OutOfBudget));
        }
        let config = self.config(p)?;
        let e = self.objective.evaluate(&config)?;
        let first = self.trajectory.is_empty();
        if first {
            self.baseline = e.intent_pass_rates.clone();
        }
        let ok = first
            || self
                .baseline
                .iter()
                .all(|(tag, base)| e.intent_pass_rates.get(tag).copied().unwrap_or(0.0) >= base - self.epsilon);
        if !ok {
            self.rejections += 1;
        }
        let result = ok.then_some(e.objective);
        if let Some(obj) = result {
            let cand = (obj, p.clone());
            if self.best.as_ref().is_none_or(|b| Self::better(&cand, b)) {
                self.best = Some(cand);
            }
        }
        let values = self.paths.iter().cloned().zip(self.values(p)).collect();
        self.trajectory.push(TrajectoryPoint {
            evaluation: self.trajectory.len(),
            objective: e.objective,
            accepted: ok,
            best_so_far: self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.0),
            values,
        });
        self.memo.insert(p.clone(), result);
        Ok(Ok(result))
    }

    /// Coordinate descent from `start`; returns completed sweeps.
    fn descend(&mut self, start: Point) -> Result<std::result::Result<usize, OutOfBudget>> {
        let mut current = start;
        let mut current_obj = match self.eval(&current)? {
            Ok(Some(v)) => v,
            Ok(None) => return Ok(Ok(0)),
            Err(o) => return Ok(Err(o)),
        };
        let mut sweeps = 0;
        loop {
            let mut improved = false;
            for i in 0..self.paths.len() {
                let mut best_here: Option<(f64, usize)> = None;
                for g in 0..self.grids[i].len() {
                    let mut cand = current.clone();
                    cand[i] = g;
                    match self.eval(&cand)? {
                        Ok(Some(v)) => {
                            if best_here.is_none_or(|(b, _)| v > b) {
                                best_here = Some((v, g));
                            }
                        }
                        Ok(None) => {}
                        Err(o) => return Ok(Err(o)),
                    }
                }
                if let Some((v, g)) = best_here {
                    let mut cand = current.clone();
                    cand[i] = g;
                    if v > current_obj || (v == current_obj && cand < current) {
                        improved |= v > current_obj;
                        current = cand;
                        current_obj = v;
                    }
                }
            }
            sweeps += 1;
            if !improved {
                return Ok(Ok(sweeps));
            }
        }
    }
}

/// Tunes the parameters named in `spec`, starting from `initial`.
pub fn tune<O: Objective>(initial: &RankerConfig, spec: &TuneSpec, objective: &O) -> Result<TuneResult> {
    spec.validate()?;
    initial.validate()?;
    let mut paths = Vec::new();
    let mut initial_values = Vec::new();
    let mut grids = Vec::new();
    for p in &spec.params {
        let v = initial.get(&p.path).ok_or_else(|| {
            Error::Config(format!("free parameter `{}` is not in the ranker config", p.path))
        })?;
        let grid = p.grid.clone().unwrap_or_else(|| Grid::around(v));
        paths.push(p.path.clone());
        initial_values.push(v);
        grids.push(grid.points()?);
    }
    let mut s = Search {
        objective,
        initial,
        paths,
        initial_values,
        grids,
        epsilon: spec.guardrail_epsilon,
        budget: spec.budget,
        baseline: BTreeMap::new(),
        memo: HashMap::new(),
        trajectory: Vec::new(),
        rejections: 0,
        best: None,
    };
    let start: Point = vec![OFF_GRID; s.paths.len()];
    let (mut incomplete, mut sweeps) = match s.descend(start.clone())? {
        Ok(n) => (false, n),
        Err(OutOfBudget) => (true, 0),
    };
    if !incomplete && spec.restarts > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let sizes: Vec<usize> = s.grids.iter().map(Vec::len).collect();
        let total = sizes.iter().try_fold(1usize, |a, &b| a.checked_mul(b));
        let starts: Vec<Point> = match total {
            Some(t) if t <= EXHAUSTIVE_RESTART_LIMIT => {
                let mut all: Vec<usize> = (0..t).collect();
                all.shuffle(&mut rng);
                all.into_iter()
                    .take(spec.restarts)
                    .map(|mut flat| {
                        let mut p = vec![0; sizes.len()];
                        for i in (0..sizes.len()).rev() {
                            p[i] = flat % sizes[i];
                            flat /= sizes[i];
                        }
                        p
                    })
                    .collect()
            }
            _ => (0..spec.restarts)
                .map(|_| sizes.iter().map(|&n| rng.random_range(0..n)).collect())
                .collect(),
        };
        for p in starts {
            match s.descend(p)? {
                Ok(n) => sweeps += n,
                Err(OutOfBudget) => break,
            }
        }
    }
    let initial_objective = s.trajectory.first().map(|t| t.objective).unwrap_or(f64::NAN);
    let (best_objective, best_point) = s.best.clone().unwrap_or((initial_objective, start));
    if s.trajectory.is_empty() {
        incomplete = true;
    }
    Ok(TuneResult {
        best_config: s.config(&best_point)?,
        best_objective,
        initial_objective,
        evaluations: s.trajectory.len(),
        trajectory: s.trajectory,
        guardrail_rejections: s.rejections,
        incomplete,
        sweeps,
    })
}
