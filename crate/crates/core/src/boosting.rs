//! Boosting driver, cross-validated choice of the ridge parameter, risk /
//! complexity sweeps and the coverage comparison harness.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{Extension, OrthoBasis};
use crate::data::Dataset;
use crate::ensemble::{Rule, RuleEnsemble};
use crate::error::{Error, Result};
use crate::losses::{self, LossKind};
use crate::objectives::{Objective, ObjectiveKind, DEFAULT_EPSILON};
use crate::query::Selection;
use crate::search::{find_best_query, SearchConfig, SearchOutcome};
use crate::weights;

/// Candidate ridge parameters for cross-validation.
pub const LAMBDA_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];

/// `||O^T g||` above which the gradient is projected even at `lambda = 0`.
const ORTHOGONALITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightUpdate {
    /// Line search for the newest weight only.
    Stagewise,
    /// `-<q,g> / (<q,h> + lambda)` for the newest weight only.
    XgbClosedForm,
    /// Joint refit of all weights.
    Corrective,
}

impl WeightUpdate {
    pub fn name(self) -> &'static str {
        match self {
            WeightUpdate::Stagewise => "stagewise",
            WeightUpdate::XgbClosedForm => "xgb",
            WeightUpdate::Corrective => "corrective",
        }
    }
}

impl fmt::Display for WeightUpdate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightUpdate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stagewise" => Ok(WeightUpdate::Stagewise),
            "xgb" | "xgb-closed-form" => Ok(WeightUpdate::XgbClosedForm),
            "corrective" => Ok(WeightUpdate::Corrective),
            other => Err(Error::Config(format!("unknown weight update `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaChoice {
    Fixed(f64),
    /// Five-fold cross-validation over [`LAMBDA_GRID`].
    Cv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffsetMode {
    /// Best constant model.
    Fit,
    /// Start from `f = 0`.
    Zero,
}

impl FromStr for OffsetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fit" => Ok(OffsetMode::Fit),
            "zero" => Ok(OffsetMode::Zero),
            other => Err(Error::Config(format!("unknown offset mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub objective: ObjectiveKind,
    pub epsilon: f64,
    pub update: WeightUpdate,
    /// Search width; `None` runs branch-and-bound.
    pub width: Option<usize>,
    pub max_propositions: Option<usize>,
    pub bounding: bool,
    /// Defaults to the loss matching the dataset's task.
    pub loss: Option<LossKind>,
    pub lambda: LambdaChoice,
    pub max_complexity: usize,
    pub max_rules: Option<usize>,
    pub seed: u64,
    pub offset: OffsetMode,
    pub cv_folds: usize,
}

impl BoostConfig {
    pub fn new(objective: ObjectiveKind, update: WeightUpdate) -> Self {
        Self {
            objective,
            epsilon: DEFAULT_EPSILON,
            update,
            width: Some(1),
            max_propositions: None,
            bounding: true,
            loss: None,
            lambda: LambdaChoice::Fixed(0.0),
            max_complexity: 50,
            max_rules: None,
            seed: 0,
            offset: OffsetMode::Fit,
            cv_folds: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == Some(0) {
            return Err(Error::Config("search width must be at least 1".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon must be finite and >= 0, got {}", self.epsilon)));
        }
        if let LambdaChoice::Fixed(l) = self.lambda {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::Config(format!("lambda must be finite and >= 0, got {l}")));
            }
        }
        if self.max_complexity < 2 {
            return Err(Error::Config("max complexity must be at least 2".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::Config("cross-validation needs at least 2 folds".into()));
        }
        Ok(())
    }

    pub fn loss_for(&self, ds: &Dataset) -> LossKind {
        self.loss.unwrap_or_else(|| LossKind::for_task(ds.task()))
    }

    pub fn search_config(&self, objective: ObjectiveKind, lambda: f64) -> SearchConfig {
        SearchConfig {
            width: self.width,
            objective: Objective {
                kind: objective,
                epsilon: self.epsilon,
                lambda,
            },
            max_propositions: self.max_propositions,
            bounding: self.bounding,
        }
    }

    fn rule_budget(&self) -> usize {
        self.max_rules.unwrap_or(self.max_complexity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxRules,
    ZeroGradient,
    /// No query has a positive objective value.
    NoImprovement,
    ComplexityLimit,
    /// The selected query lies in the span of earlier ones.
    Redundant,
}

impl StopReason {
    pub fn describe(self) -> &'static str {
        match self {
            StopReason::MaxRules => "rule limit reached",
            StopReason::ZeroGradient => "gradient is zero",
            StopReason::NoImprovement => "no query with positive objective",
            StopReason::ComplexityLimit => "next rule would exceed the complexity limit",
            StopReason::Redundant => "selected query is linearly dependent on earlier rules",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub k: usize,
    pub complexity: usize,
    pub train_risk: f64,
    pub rule: String,
    pub objective_value: f64,
    /// Fraction of training rows selected by the new rule.
    pub coverage: f64,
    /// Largest `|<q_j, g>| / (||q_j|| ||g||)` after a corrective fit.
    pub max_gradient_cosine: Option<f64>,
    /// Seconds since the start of the run.
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostRun {
    /// `f(0), f(1), ..`: the ensemble after every round.
    pub ensembles: Vec<RuleEnsemble>,
    pub rounds: Vec<RoundLog>,
    pub stop: StopReason,
    pub lambda: f64,
}

impl BoostRun {
    pub fn final_ensemble(&self) -> &RuleEnsemble {
        self.ensembles.last().expect("offset ensemble is always present")
    }
}

/// Outcome of one boosting round.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Added(RoundLog),
    Stopped(StopReason),
}

/// Mutable state of a boosting run.
#[derive(Debug, Clone)]
pub struct BoostState<'a> {
    ds: &'a Dataset,
    cfg: BoostConfig,
    loss: LossKind,
    lambda: f64,
    offset: f64,
    f: Vec<f64>,
    rules: Vec<Rule>,
    selections: Vec<Selection>,
    basis: OrthoBasis,
    started: Instant,
}

impl<'a> BoostState<'a> {
    pub fn new(ds: &'a Dataset, cfg: &BoostConfig, lambda: f64) -> Result<Self> {
        cfg.validate()?;
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        let loss = cfg.loss_for(ds);
        loss.check_targets(ds.target())?;
        let offset = match cfg.offset {
            OffsetMode::Fit => weights::fit_offset(ds, loss)?,
            OffsetMode::Zero => 0.0,
        };
        Ok(Self {
            ds,
            cfg: cfg.clone(),
            loss,
            lambda,
            offset,
            f: vec![offset; ds.n()],
            rules: Vec::new(),
            selections: Vec::new(),
            basis: OrthoBasis::new(ds.n()),
            started: Instant::now(),
        })
    }

    pub fn outputs(&self) -> &[f64] {
        &self.f
    }

    pub fn basis(&self) -> &OrthoBasis {
        &self.basis
    }

    pub fn selections(&self) -> &[Selection] {
        &self.selections
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn complexity(&self) -> usize {
        self.rules.iter().map(|r| 1 + r.query.len()).sum()
    }

    pub fn ensemble(&self) -> RuleEnsemble {
        RuleEnsemble {
            offset: self.offset,
            rules: self.rules.clone(),
            loss: self.loss,
            feature_names: self.ds.feature_names().to_vec(),
        }
    }

    /// Mean training loss.
    pub fn train_risk(&self) -> f64 {
        losses::risk(self.loss, &self.f, self.ds.target())
    }

    pub fn regularized_risk(&self) -> f64 {
        let w: Vec<f64> = self.rules.iter().map(|r| r.weight).collect();
        losses::regularized_risk(self.loss, &self.f, self.ds.target(), &w, self.lambda)
    }

    /// Loss gradient at the current outputs.
    pub fn gradient(&self) -> Vec<f64> {
        losses::gradient(self.loss, &self.f, self.ds.target()).expect("lengths match")
    }

    fn hessian(&self) -> Vec<f64> {
        losses::hessian_diag(self.loss, &self.f, self.ds.target()).expect("lengths match")
    }

    fn gradient_is_zero(&self, g: &[f64]) -> bool {
        let scale = 1.0 + self.ds.target().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        g.iter().all(|v| v.abs() <= 1e-12 * scale)
    }

    /// Gradient handed to the search: projected onto the orthogonal
    /// complement of the basis for the orthogonal objective.
    fn search_gradient(&self, kind: ObjectiveKind, g: Vec<f64>) -> Vec<f64> {
        if kind != ObjectiveKind::Ogb || self.basis.is_empty() {
            return g;
        }
        let needs_projection = self.lambda > 0.0 || {
            let c = self.basis.coefficients(&g).expect("lengths match");
            c.iter().map(|x| x * x).sum::<f64>().sqrt() > ORTHOGONALITY_TOL
        };
        if needs_projection {
            self.basis.perp(&g).expect("lengths match")
        } else {
            g
        }
    }

    /// Best query under `objective` from the current state, without changing it.
    pub fn propose(&self, objective: ObjectiveKind) -> Result<Option<SearchOutcome>> {
        let g = self.gradient();
        let h = if objective == ObjectiveKind::Xgb { self.hessian() } else { Vec::new() };
        let gs = self.search_gradient(objective, g);
        let cfg = self.cfg.search_config(objective, self.lambda);
        find_best_query(self.ds, &gs, &h, &self.basis, &cfg)
    }

    /// Runs one round.
    pub fn step(&mut self) -> Result<Step> {
        if self.rules.len() >= self.cfg.rule_budget() {
            return Ok(Step::Stopped(StopReason::MaxRules));
        }
        let g = self.gradient();
        if self.gradient_is_zero(&g) {
            return Ok(Step::Stopped(StopReason::ZeroGradient));
        }
        let kind = self.cfg.objective;
        let needs_h = kind == ObjectiveKind::Xgb || self.cfg.update == WeightUpdate::XgbClosedForm;
        let h = if needs_h { self.hessian() } else { Vec::new() };
        let gs = self.search_gradient(kind, g.clone());
        let search = self.cfg.search_config(kind, self.lambda);
        let Some(found) = find_best_query(self.ds, &gs, &h, &self.basis, &search)? else {
            return Ok(Step::Stopped(StopReason::NoImprovement));
        };
        let complexity = self.complexity() + 1 + found.query.len();
        if complexity > self.cfg.max_complexity {
            return Ok(Step::Stopped(StopReason::ComplexityLimit));
        }
        let sel = found.selection;
        match self.basis.extend_selection(&sel)? {
            Extension::Added { .. } => {}
            Extension::Rejected { .. } if self.cfg.update == WeightUpdate::Corrective => {
                return Ok(Step::Stopped(StopReason::Redundant));
            }
            Extension::Rejected { .. } => {}
        }

        let y = self.ds.target();
        let mut cosine = None;
        match self.cfg.update {
            WeightUpdate::Stagewise => {
                let w = weights::line_search_selection(self.loss, &self.f, y, &sel, self.lambda)?;
                self.push_rule(found.query, sel, w);
            }
            WeightUpdate::XgbClosedForm => {
                let w = weights::xgb_ratio(sel.dot(&g), sel.dot(&h) + self.lambda)?;
                self.push_rule(found.query, sel, w);
            }
            WeightUpdate::Corrective => {
                let mut init: Vec<f64> = self.rules.iter().map(|r| r.weight).collect();
                init.push(0.0);
                self.selections.push(sel);
                self.rules.push(Rule {
                    query: found.query,
                    weight: 0.0,
                });
                let w = weights::corrective_fit_from(self.loss, y, self.offset, &self.selections, self.lambda, Some(&init))?;
                for (r, wi) in self.rules.iter_mut().zip(&w) {
                    r.weight = *wi;
                }
                self.recompute_outputs();
                cosine = Some(self.max_gradient_cosine());
            }
        }

        let k = self.rules.len();
        let ens_names = self.ds.feature_names();
        let last = &self.rules[k - 1];
        Ok(Step::Added(RoundLog {
            k,
            complexity: self.complexity(),
            train_risk: self.train_risk(),
            rule: format!("IF {} THEN {:+}", last.query.describe(ens_names), last.weight),
            objective_value: found.value,
            coverage: self.selections[k - 1].len() as f64 / self.ds.n() as f64,
            max_gradient_cosine: cosine,
            elapsed: self.started.elapsed().as_secs_f64(),
        }))
    }

    fn push_rule(&mut self, query: crate::query::Query, sel: Selection, weight: f64) {
        for &i in sel.rows() {
            self.f[i] += weight;
        }
        self.selections.push(sel);
        self.rules.push(Rule { query, weight });
    }

    fn recompute_outputs(&mut self) {
        self.f.iter_mut().for_each(|v| *v = self.offset);
        for (sel, r) in self.selections.iter().zip(&self.rules) {
            for &i in sel.rows() {
                self.f[i] += r.weight;
            }
        }
    }

    /// `max_j |<q_j, g>| / (||q_j|| ||g||)` with the exact loss derivative.
    pub fn max_gradient_cosine(&self) -> f64 {
        let y = self.ds.target();
        let g: Vec<f64> = self
            .f
            .iter()
            .zip(y)
            .map(|(&fi, &yi)| losses::loss_derivative(self.loss, fi, yi))
            .collect();
        // an interpolating fit leaves only rounding noise, with no direction
        if self.gradient_is_zero(&g) {
            return 0.0;
        }
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.selections
            .iter()
            .map(|s| s.dot(&g).abs() / ((s.len() as f64).sqrt() * gnorm))
            .fold(0.0, f64::max)
    }
}

fn run_fixed(ds: &Dataset, cfg: &BoostConfig, lambda: f64) -> Result<BoostRun> {
    let mut state = BoostState::new(ds, cfg, lambda)?;
    let mut ensembles = vec![state.ensemble()];
    let mut rounds = Vec::new();
    let stop = loop {
        match state.step()? {
            Step::Added(log) => {
                rounds.push(log);
                ensembles.push(state.ensemble());
            }
            Step::Stopped(reason) => break reason,
        }
    };
    Ok(BoostRun {
        ensembles,
        rounds,
        stop,
        lambda,
    })
}

/// Fits a sequence of ensembles. With [`LambdaChoice::Cv`] the ridge
/// parameter is chosen for the final rule count first.
pub fn boost(ds: &Dataset, cfg: &BoostConfig) -> Result<BoostRun> {
    cfg.validate()?;
    let lambda = match cfg.lambda {
        LambdaChoice::Fixed(l) => l,
        LambdaChoice::Cv => cv_select_lambda(ds, cfg.rule_budget(), cfg)?,
    };
    run_fixed(ds, cfg, lambda)
}

fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        fold[row] = pos % folds;
    }
    fold
}

/// Mean held-out risk for every grid value (rows) and rule count `0..=max_k`
/// (columns). Runs that stop early keep their last ensemble.
pub fn cv_risk_table(ds: &Dataset, cfg: &BoostConfig, max_k: usize) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let folds = cfg.cv_folds;
    if ds.n() < folds {
        return Err(Error::Config(format!(
            "cross-validation needs at least {folds} rows, got {}",
            ds.n()
        )));
    }
    let assignment = fold_assignment(ds.n(), folds, cfg.seed);
    let mut fold_cfg = cfg.clone();
    fold_cfg.max_rules = Some(max_k);
    let jobs: Vec<(usize, usize)> = (0..LAMBDA_GRID.len())
        .flat_map(|l| (0..folds).map(move |f| (l, f)))
        .collect();
    let results: Vec<Result<Vec<f64>>> = jobs
        .par_iter()
        .map(|&(l, fold)| {
            let train_rows: Vec<usize> = (0..ds.n()).filter(|&i| assignment[i] != fold).collect();
            let test_rows: Vec<usize> = (0..ds.n()).filter(|&i| assignment[i] == fold).collect();
            let train = ds.subset(&train_rows);
            let test = ds.subset(&test_rows);
            let run = run_fixed(&train, &fold_cfg, LAMBDA_GRID[l])?;
            Ok((0..=max_k)
                .map(|k| {
                    let ens = &run.ensembles[k.min(run.ensembles.len() - 1)];
                    losses::risk(ens.loss, &ens.predict_aligned(&test), test.target())
                })
                .collect())
        })
        .collect();
    let mut table = vec![vec![0.0; max_k + 1]; LAMBDA_GRID.len()];
    for (&(l, _), res) in jobs.iter().zip(results) {
        for (acc, r) in table[l].iter_mut().zip(res?) {
            *acc += r / folds as f64;
        }
    }
    Ok(table)
}

fn argmin_lambda(table: &[Vec<f64>], k: usize) -> usize {
    let mut best = 0;
    for l in 1..table.len() {
        if table[l][k] < table[best][k] {
            best = l;
        }
    }
    best
}

/// Grid value with the smallest cross-validated risk of `k`-rule ensembles;
/// ties go to the smaller value.
pub fn cv_select_lambda(ds: &Dataset, k: usize, cfg: &BoostConfig) -> Result<f64> {
    let table = cv_risk_table(ds, cfg, k)?;
    Ok(LAMBDA_GRID[argmin_lambda(&table, k)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub k: usize,
    pub complexity: usize,
    pub train_risk: f64,
    pub test_risk: f64,
    /// Risks divided by those of the offset-only model.
    pub train_risk_norm: f64,
    pub test_risk_norm: f64,
    pub lambda: f64,
    pub seconds: f64,
}

fn normalized(raw: f64, base: f64) -> f64 {
    if base > 0.0 {
        raw / base
    } else if raw == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Risk of every ensemble size on train and test data, normalized by the
/// offset-only model. With [`LambdaChoice::Cv`] each `k` uses its own
/// cross-validated ridge parameter.
pub fn sweep_tradeoff(train: &Dataset, test: &Dataset, cfg: &BoostConfig) -> Result<Vec<TradeoffPoint>> {
    cfg.validate()?;
    let point = |ens: &RuleEnsemble, k: usize, lambda: f64, seconds: f64, base: (f64, f64)| -> Result<TradeoffPoint> {
        let train_risk = ens.risk(train)?;
        let test_risk = ens.risk(test)?;
        Ok(TradeoffPoint {
            k,
            complexity: ens.complexity(),
            train_risk,
            test_risk,
            train_risk_norm: if k == 0 { 1.0 } else { normalized(train_risk, base.0) },
            test_risk_norm: if k == 0 { 1.0 } else { normalized(test_risk, base.1) },
            lambda,
            seconds,
        })
    };
    let base_of = |run: &BoostRun| -> Result<(f64, f64)> {
        let e = &run.ensembles[0];
        Ok((e.risk(train)?, e.risk(test)?))
    };

    match cfg.lambda {
        LambdaChoice::Fixed(lambda) => {
            let run = run_fixed(train, cfg, lambda)?;
            let base = base_of(&run)?;
            run.ensembles
                .iter()
                .enumerate()
                .map(|(k, e)| {
                    let secs = if k == 0 { 0.0 } else { run.rounds[k - 1].elapsed };
                    point(e, k, lambda, secs, base)
                })
                .collect()
        }
        LambdaChoice::Cv => {
            let max_k = cfg.rule_budget();
            let table = cv_risk_table(train, cfg, max_k)?;
            let choice: Vec<usize> = (0..=max_k).map(|k| argmin_lambda(&table, k)).collect();
            let mut needed: Vec<usize> = choice.clone();
            needed.sort_unstable();
            needed.dedup();
            let runs: Vec<Result<BoostRun>> = needed
                .par_iter()
                .map(|&l| run_fixed(train, cfg, LAMBDA_GRID[l]))
                .collect();
            let mut by_lambda: Vec<Option<BoostRun>> = vec![None; LAMBDA_GRID.len()];
            for (&l, r) in needed.iter().zip(runs) {
                by_lambda[l] = Some(r?);
            }
            let mut points = Vec::new();
            for (k, &l) in choice.iter().enumerate() {
                let run = by_lambda[l].as_ref().expect("run computed");
                if run.ensembles.len() <= k {
                    break;
                }
                let base = base_of(run)?;
                let secs = if k == 0 { 0.0 } else { run.rounds[k - 1].elapsed };
                points.push(point(&run.ensembles[k], k, LAMBDA_GRID[l], secs, base)?);
            }
            Ok(points)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveragePair {
    pub round: usize,
    /// Coverage of the rule chosen by the base objective.
    pub base: f64,
    /// Coverage of the rule the orthogonal objective would choose from the same state.
    pub ogb: Option<f64>,
}

/// Runs stagewise boosting with `cfg.objective` for up to `rounds` rules and
/// records, at every round, the coverage of the chosen rule next to the
/// coverage of the orthogonal objective's choice from the same state.
pub fn coverage_compare(ds: &Dataset, cfg: &BoostConfig, rounds: usize) -> Result<Vec<CoveragePair>> {
    let mut cfg = cfg.clone();
    cfg.update = WeightUpdate::Stagewise;
    cfg.max_rules = Some(rounds);
    let lambda = match cfg.lambda {
        LambdaChoice::Fixed(l) => l,
        LambdaChoice::Cv => cv_select_lambda(ds, rounds, &cfg)?,
    };
    let mut state = BoostState::new(ds, &cfg, lambda)?;
    let n = ds.n() as f64;
    let mut out = Vec::with_capacity(rounds);
    for round in 1..=rounds {
        let alt = state.propose(ObjectiveKind::Ogb)?.map(|o| o.selection.len() as f64 / n);
        match state.step()? {
            Step::Added(log) => out.push(CoveragePair {
                round,
                base: log.coverage,
                ogb: alt,
            }),
            Step::Stopped(_) => break,
        }
    }
    Ok(out)
}
