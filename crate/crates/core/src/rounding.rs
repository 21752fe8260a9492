//! Randomized rounding of a fractional `x` into a strategy, plus exact and
//! Monte Carlo save probabilities.
//!
//! Every algorithm is a sequence of per-layer steps; a step looks at the
//! picks made so far and offers weighted options (a vertex or nothing).
//! Sampling, exact enumeration and Monte Carlo all drive the same steps.

use crate::lp::path_sums;
use crate::rational::{self, one, zero, Rational};
use crate::tree::{simulate, Instance, SavedSet, Strategy, VertexId};
use num::{BigInt, Signed, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RoundingError {
    #[error("layer {layer} has x-sum {sum} > 1")]
    InfeasibleX { layer: usize, sum: String },
    #[error("x_{0} is outside [0, 1]")]
    OutOfRange(VertexId),
    #[error("x references unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("the root cannot carry a positive x")]
    RootValue,
    #[error("not half-integral: {0}")]
    NotHalfIntegral(String),
    #[error("x is not {eta}-separable: layer {layer} mixes light and heavy vertices")]
    NotSeparable { eta: String, layer: usize },
    #[error("more than {0} branches")]
    BranchCapExceeded(usize),
    #[error("need at least one trial")]
    NoTrials,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Algorithm {
    Independent,
    HalfIntegral,
    TwoPhase { eta: Rational },
}

impl Algorithm {
    /// Two-phase rounding with `η = 1/2`.
    pub fn two_phase() -> Self {
        Algorithm::TwoPhase {
            eta: rational::half(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Independent => "independent",
            Algorithm::HalfIntegral => "half_integral",
            Algorithm::TwoPhase { .. } => "two_phase",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RoundingRun {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub strategy: Strategy,
    pub saved: SavedSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerClass {
    Empty,
    Light,
    Heavy,
    /// Both light and heavy positive vertices.
    Mixed,
}

#[derive(Debug, Clone)]
pub struct SeparabilityReport {
    pub eta: Rational,
    pub layer_class: BTreeMap<usize, LayerClass>,
    pub separable: bool,
}

impl SeparabilityReport {
    pub fn layers_of(&self, class: LayerClass) -> Vec<usize> {
        self.layer_class
            .iter()
            .filter(|(_, &c)| c == class)
            .map(|(&j, _)| j)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StepKind {
    Independent,
    Half,
    Heavy,
}

#[derive(Debug, Clone)]
struct Step {
    layer: usize,
    kind: StepKind,
    /// Indices into `Plan::pos`.
    members: Vec<usize>,
}

/// Positive-x vertices, their positive strict ancestors, and the steps.
#[derive(Debug, Clone)]
struct Plan {
    x: Vec<Rational>,
    pos: Vec<VertexId>,
    pos_index: Vec<Option<usize>>,
    pos_anc: Vec<Vec<usize>>,
    steps: Vec<Step>,
}

type Options = Vec<(Option<usize>, Rational)>;

impl Plan {
    fn saved(&self, picked: &[bool], i: usize) -> bool {
        picked[i] || self.pos_anc[i].iter().any(|&a| picked[a])
    }

    fn options(&self, step: &Step, picked: &[bool]) -> Options {
        let x = |i: usize| &self.x[self.pos[i]];
        match step.kind {
            StepKind::Independent => {
                let mut out: Options = step
                    .members
                    .iter()
                    .map(|&i| (Some(i), x(i).clone()))
                    .collect();
                let rest = one() - rational::sum(step.members.iter().map(|&i| x(i)));
                if rest.is_positive() {
                    out.push((None, rest));
                }
                out
            }
            StepKind::Half => {
                let unsaved: Vec<usize> = step
                    .members
                    .iter()
                    .copied()
                    .filter(|&i| !self.saved(picked, i))
                    .collect();
                match unsaved.as_slice() {
                    [] => vec![(None, one())],
                    [u] => vec![(Some(*u), one())],
                    [u, v] => {
                        let top_u = self.pos_anc[*u].is_empty();
                        let top_v = self.pos_anc[*v].is_empty();
                        if top_u == top_v {
                            vec![(Some(*u), rational::half()), (Some(*v), rational::half())]
                        } else {
                            let (a1, a2) = if top_u { (*u, *v) } else { (*v, *u) };
                            vec![
                                (Some(a1), rational::ratio(1, 3)),
                                (Some(a2), rational::ratio(2, 3)),
                            ]
                        }
                    }
                    _ => unreachable!("checked when the plan was built"),
                }
            }
            StepKind::Heavy => {
                let free: Vec<usize> = step
                    .members
                    .iter()
                    .copied()
                    .filter(|&i| !self.saved(picked, i))
                    .collect();
                if free.is_empty() {
                    return vec![(None, one())];
                }
                let mass = rational::sum(free.iter().map(|&i| x(i)));
                free.into_iter().map(|i| (Some(i), x(i) / &mass)).collect()
            }
        }
    }

    /// Positive picks with no picked positive strict ancestor.
    fn topmost<'a>(
        &'a self,
        picks: &'a [usize],
        picked: &'a [bool],
    ) -> impl Iterator<Item = usize> + 'a {
        picks
            .iter()
            .copied()
            .filter(|&i| !self.pos_anc[i].iter().any(|&a| picked[a]))
    }
}

fn dense_x(
    inst: &Instance,
    x: &BTreeMap<VertexId, Rational>,
) -> Result<Vec<Rational>, RoundingError> {
    let n = inst.vertex_count();
    let mut dense = vec![zero(); n];
    for (&v, val) in x {
        if v >= n {
            return Err(RoundingError::UnknownVertex(v));
        }
        if !rational::in_unit_interval(val) {
            return Err(RoundingError::OutOfRange(v));
        }
        if v == inst.root() && val.is_positive() {
            return Err(RoundingError::RootValue);
        }
        dense[v] = val.clone();
    }
    Ok(dense)
}

fn strict_prefix(inst: &Instance, x: &[Rational]) -> Vec<Rational> {
    let sums = path_sums(inst, x);
    (0..inst.vertex_count()).map(|v| &sums[v] - &x[v]).collect()
}

fn classify_dense(inst: &Instance, x: &[Rational], eta: &Rational) -> SeparabilityReport {
    let prefix = strict_prefix(inst, x);
    let mut layer_class = BTreeMap::new();
    for j in 1..=inst.height() {
        let mut light = false;
        let mut heavy = false;
        for &v in inst.layer(j) {
            if x[v].is_positive() {
                if prefix[v] < *eta {
                    light = true;
                } else {
                    heavy = true;
                }
            }
        }
        let class = match (light, heavy) {
            (false, false) => LayerClass::Empty,
            (true, false) => LayerClass::Light,
            (false, true) => LayerClass::Heavy,
            (true, true) => LayerClass::Mixed,
        };
        layer_class.insert(j, class);
    }
    let separable = !layer_class.values().any(|&c| c == LayerClass::Mixed);
    SeparabilityReport {
        eta: eta.clone(),
        layer_class,
        separable,
    }
}

/// A positive vertex is `η`-light when its strict-ancestor x-sum is below `η`.
pub fn classify_separable(
    inst: &Instance,
    x: &BTreeMap<VertexId, Rational>,
    eta: &Rational,
) -> Result<SeparabilityReport, RoundingError> {
    Ok(classify_dense(inst, &dense_x(inst, x)?, eta))
}

fn plan(
    inst: &Instance,
    x: &BTreeMap<VertexId, Rational>,
    algo: &Algorithm,
) -> Result<Plan, RoundingError> {
    let x = dense_x(inst, x)?;
    let n = inst.vertex_count();
    let mut pos = Vec::new();
    let mut pos_index = vec![None; n];
    let mut pos_anc: Vec<Vec<usize>> = Vec::new();
    // Nearest positive ancestor-or-self, by BFS order.
    let mut nearest: Vec<Option<usize>> = vec![None; n];
    for &v in inst.bfs_order() {
        let up = inst.parent(v).and_then(|p| nearest[p]);
        if x[v].is_positive() {
            let i = pos.len();
            pos.push(v);
            pos_index[v] = Some(i);
            let mut anc = up.map(|a| pos_anc[a].clone()).unwrap_or_default();
            if let Some(a) = up {
                anc.push(a);
            }
            pos_anc.push(anc);
            nearest[v] = Some(i);
        } else {
            nearest[v] = up;
        }
    }
    let mut by_layer: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &v) in pos.iter().enumerate() {
        by_layer.entry(inst.depth(v)).or_default().push(i);
    }
    for (&layer, members) in &by_layer {
        let sum = rational::sum(members.iter().map(|&i| &x[pos[i]]));
        if sum > one() {
            return Err(RoundingError::InfeasibleX {
                layer,
                sum: rational::format(&sum),
            });
        }
    }
    let step = |layer: usize, kind: StepKind| Step {
        layer,
        kind,
        members: by_layer[&layer].clone(),
    };
    let steps = match algo {
        Algorithm::Independent => by_layer
            .keys()
            .map(|&j| step(j, StepKind::Independent))
            .collect(),
        Algorithm::HalfIntegral => {
            if let Some((v, val)) = x
                .iter()
                .enumerate()
                .find(|(_, v)| !(*v * rational::int(2)).is_integer())
            {
                return Err(RoundingError::NotHalfIntegral(format!(
                    "x_{v} = {}",
                    rational::format(val)
                )));
            }
            if let Some((j, m)) = by_layer.iter().find(|(_, m)| m.len() > 2) {
                return Err(RoundingError::NotHalfIntegral(format!(
                    "layer {j} has {} positive vertices",
                    m.len()
                )));
            }
            by_layer.keys().map(|&j| step(j, StepKind::Half)).collect()
        }
        Algorithm::TwoPhase { eta } => {
            let report = classify_dense(inst, &x, eta);
            if let Some((&layer, _)) = report
                .layer_class
                .iter()
                .find(|(_, &c)| c == LayerClass::Mixed)
            {
                return Err(RoundingError::NotSeparable {
                    eta: rational::format(eta),
                    layer,
                });
            }
            let light = report.layers_of(LayerClass::Light);
            let heavy = report.layers_of(LayerClass::Heavy);
            light
                .into_iter()
                .map(|j| step(j, StepKind::Independent))
                .chain(heavy.into_iter().map(|j| step(j, StepKind::Heavy)))
                .collect()
        }
    };
    Ok(Plan {
        x,
        pos,
        pos_index,
        pos_anc,
        steps,
    })
}

fn threshold(cum: &Rational) -> u128 {
    if *cum >= one() {
        return 1u128 << 64;
    }
    let t: BigInt = (cum.numer() << 64usize) / cum.denom();
    t.to_u128().expect("below 2^64")
}

fn choose(options: &Options, r: u64) -> Option<usize> {
    let mut cum = zero();
    for (choice, p) in options {
        cum += p;
        if (r as u128) < threshold(&cum) {
            return *choice;
        }
    }
    options.last().and_then(|(c, _)| *c)
}

fn stream(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// One 64-bit draw per layer, addressed by position in the stream.
fn draw(rng: &mut ChaCha8Rng, layer: usize) -> u64 {
    rng.set_word_pos(2 * layer as u128);
    rng.next_u64()
}

fn sample(plan: &Plan, seed: u64, trial: u64, picked: &mut [bool]) -> Vec<usize> {
    let mut rng = stream(seed, trial);
    let mut picks = Vec::new();
    for step in &plan.steps {
        let options = plan.options(step, picked);
        if let Some(i) = choose(&options, draw(&mut rng, step.layer)) {
            picked[i] = true;
            picks.push(i);
        }
    }
    picks
}

/// Runs `algo` once. The draw for layer `j` depends only on `(seed, j)`.
pub fn round(
    inst: &Instance,
    x: &BTreeMap<VertexId, Rational>,
    algo: &Algorithm,
    seed: u64,
) -> Result<RoundingRun, RoundingError> {
    let plan = plan(inst, x, algo)?;
    let mut picked = vec![false; plan.pos.len()];
    let picks = sample(&plan, seed, 0, &mut picked);
    let strategy = Strategy::from_vertices(inst, picks.iter().map(|&i| plan.pos[i]));
    let saved = simulate(inst, &strategy).expect("one pick per layer");
    Ok(RoundingRun {
        algorithm: algo.clone(),
        seed,
        strategy,
        saved,
    })
}

pub fn independent_round(
    inst: &Instance,
    x: &BTreeMap<VertexId, Rational>,
    seed: u64,
) -> Result<RoundingRun, RoundingError> {
    round(inst, x, &Algorithm::Independent, seed)
}

pub fn half_integral_round(
    inst: &Instance,
    x: &BTreeMap<VertexId, Rational>,
    seed: u64,
) -> Result<RoundingRun, RoundingError> {
    round(inst, x, &Algorithm::HalfIntegral, seed)
}

pub fn two_phase_round(
    inst: &Instance,
    x: &BTreeMap<VertexId, Rational>,
    eta: &Rational,
    seed: u64,
) -> Result<RoundingRun, RoundingError> {
    round(inst, x, &Algorithm::TwoPhase { eta: eta.clone() }, seed)
}

/// Exact per-vertex probabilities over the whole decision tree.
#[derive(Debug, Clone)]
pub struct ExactProbabilities {
    pub saved: Vec<Rational>,
    pub picked: Vec<Rational>,
    pub branches: usize,
    /// Sum of leaf weights; always 1.
    pub total_weight: Rational,
}

impl ExactProbabilities {
    /// Mean saved fraction over the instance's terminals.
    pub fn terminal_mean(&self, inst: &Instance) -> Rational {
        let ts = inst.terminals();
        if ts.is_empty() {
            return zero();
        }
        rational::sum(ts.iter().map(|&t| &self.saved[t])) / rational::int(ts.len() as i64)
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloEstimate {
    pub trials: u64,
    pub seed: u64,
    pub saved_counts: Vec<u64>,
    pub p: Vec<f64>,
    pub stderr: Vec<f64>,
    pub terminal_mean: f64,
    pub terminal_stderr: f64,
}

impl MonteCarloEstimate {
    /// Normal-approximation interval for the terminal-save mean.
    pub fn terminal_ci(&self, z: f64) -> (f64, f64) {
        let w = z * self.terminal_stderr;
        (self.terminal_mean - w, self.terminal_mean + w)
    }
}

/// z for a two-sided 99% normal interval.
pub const Z99: f64 = 2.5758293035489004;

#[derive(Debug, Clone)]
pub enum SaveProbabilities {
    Exact(ExactProbabilities),
    MonteCarlo(MonteCarloEstimate),
}

impl SaveProbabilities {
    pub fn method(&self) -> &'static str {
        match self {
            SaveProbabilities::Exact(_) => "exact_enumeration",
            SaveProbabilities::MonteCarlo(_) => "monte_carlo",
        }
    }

    pub fn p_f64(&self, v: VertexId) -> f64 {
        match self {
            SaveProbabilities::Exact(e) => rational::to_f64(&e.saved[v]),
            SaveProbabilities::MonteCarlo(m) => m.p[v],
        }
    }

    pub fn stderr(&self, v: VertexId) -> f64 {
        match self {
            SaveProbabilities::Exact(_) => 0.0,
            SaveProbabilities::MonteCarlo(m) => m.stderr[v],
        }
    }

    /// Branch count or trial count.
    pub fn count(&self) -> u64 {
        match self {
            SaveProbabilities::Exact(e) => e.branches as u64,
            SaveProbabilities::MonteCarlo(m) => m.trials,
        }
    }

    pub fn terminal_mean(&self, inst: &Instance) -> f64 {
        match self {
            SaveProbabilities::Exact(e) => rational::to_f64(&e.terminal_mean(inst)),
            SaveProbabilities::MonteCarlo(m) => m.terminal_mean,
        }
    }
}

struct Walk<'a> {
    plan: &'a Plan,
    picked: Vec<bool>,
    picks: Vec<usize>,
    top: Vec<Rational>,
    any: Vec<Rational>,
    branches: usize,
    total: Rational,
    cap: usize,
}

impl Walk<'_> {
    fn go(&mut self, s: usize, w: &Rational) -> Result<(), RoundingError> {
        let Some(step) = self.plan.steps.get(s) else {
            self.branches += 1;
            if self.branches > self.cap {
                return Err(RoundingError::BranchCapExceeded(self.cap));
            }
            self.total += w;
            for i in self
                .plan
                .topmost(&self.picks, &self.picked)
                .collect::<Vec<_>>()
            {
                self.top[i] += w;
            }
            for &i in &self.picks {
                self.any[i] += w;
            }
            return Ok(());
        };
        for (choice, p) in self.plan.options(step, &self.picked) {
            if p.is_zero() {
                continue;
            }
            let w = w * &p;
            if let Some(i) = choice {
                self.picked[i] = true;
                self.picks.push(i);
            }
            self.go(s + 1, &w)?;
            if let Some(i) = choice {
                self.picked[i] = false;
                self.picks.pop();
            }
        }
        Ok(())
    }
}

/// Saved probability of every vertex from the topmost-pick mass of its
/// positive ancestors-or-self.
fn propagate<T: Clone + for<'a> std::ops::AddAssign<&'a T>>(
    inst: &Instance,
    plan: &Plan,
    top: &[T],
    zero: T,
) -> Vec<T> {
    let mut out = vec![zero; inst.vertex_count()];
    for &v in inst.bfs_order() {
        if let Some(p) = inst.parent(v) {
            out[v] = out[p].clone();
        }
        if let Some(i) = plan.pos_index[v] {
            out[v] += &top[i];
        }
    }
    out
}

/// Enumerates every coin outcome of `algo` with its exact weight.
pub fn exact_save_prob(
    inst: &Instance,
    x: &BTreeMap<VertexId, Rational>,
    algo: &Algorithm,
    branch_cap: usize,
) -> Result<ExactProbabilities, RoundingError> {
    let plan = plan(inst, x, algo)?;
    let k = plan.pos.len();
    let mut walk = Walk {
        plan: &plan,
        picked: vec![false; k],
        picks: Vec::new(),
        top: vec![zero(); k],
        any: vec![zero(); k],
        branches: 0,
        total: zero(),
        cap: branch_cap,
    };
    walk.go(0, &one())?;
    let saved = propagate(inst, &plan, &walk.top, zero());
    let mut picked = vec![zero(); inst.vertex_count()];
    for (i, &v) in plan.pos.iter().enumerate() {
        picked[v] = walk.any[i].clone();
    }
    Ok(ExactProbabilities {
        saved,
        picked,
        branches: walk.branches,
        total_weight: walk.total,
    })
}

#[derive(Clone)]
struct Tally {
    top: Vec<u64>,
    term_sum: u128,
    term_sq: u128,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.top.iter_mut().zip(other.top) {
            *a += b;
        }
        self.term_sum += other.term_sum;
        self.term_sq += other.term_sq;
        self
    }
}

/// Empirical save frequencies over `trials` independent runs; trial `i`
/// uses stream `i` of `seed`, so results do not depend on the thread count.
pub fn monte_carlo(
    inst: &Instance,
    x: &BTreeMap<VertexId, Rational>,
    algo: &Algorithm,
    trials: u64,
    seed: u64,
) -> Result<MonteCarloEstimate, RoundingError> {
    if trials == 0 {
        return Err(RoundingError::NoTrials);
    }
    let plan = plan(inst, x, algo)?;
    let k = plan.pos.len();
    let counts = inst.subtree_terminal_counts();
    let tcount: Vec<u128> = plan.pos.iter().map(|&v| counts[v] as u128).collect();
    let empty = Tally {
        top: vec![0; k],
        term_sum: 0,
        term_sq: 0,
    };
    let tally = (0..trials)
        .into_par_iter()
        .fold(
            || (empty.clone(), vec![false; k]),
            |(mut acc, mut picked), trial| {
                let picks = sample(&plan, seed, trial, &mut picked);
                let mut saved_terms = 0u128;
                for i in plan.topmost(&picks, &picked) {
                    acc.top[i] += 1;
                    saved_terms += tcount[i];
                }
                acc.term_sum += saved_terms;
                acc.term_sq += saved_terms * saved_terms;
                for &i in &picks {
                    picked[i] = false;
                }
                (acc, picked)
            },
        )
        .map(|(acc, _)| acc)
        .reduce(|| empty.clone(), Tally::merge);
    let saved_counts = propagate(inst, &plan, &tally.top, 0u64);
    let nt = trials as f64;
    let p: Vec<f64> = saved_counts.iter().map(|&c| c as f64 / nt).collect();
    let stderr = p.iter().map(|&q| (q * (1.0 - q) / nt).sqrt()).collect();
    let terms = inst.terminal_count().max(1) as f64;
    let mean = tally.term_sum as f64 / nt / terms;
    let second = tally.term_sq as f64 / nt / (terms * terms);
    let var = if trials > 1 {
        (second - mean * mean).max(0.0) * nt / (nt - 1.0)
    } else {
        0.0
    };
    Ok(MonteCarloEstimate {
        trials,
        seed,
        saved_counts,
        p,
        stderr,
        terminal_mean: mean,
        terminal_stderr: (var / nt).sqrt(),
    })
}

/// `E[x(L̃_j) | t not saved after phase 1]` for every heavy layer `j` above
/// `t`, where `L̃_j` holds the positive vertices of `L_j` not saved by the
/// light-layer picks. `None` when `t` is always saved in phase 1.
pub fn heavy_mass_given_unsaved(
    inst: &Instance,
    x: &BTreeMap<VertexId, Rational>,
    eta: &Rational,
    t: VertexId,
    branch_cap: usize,
) -> Result<Option<BTreeMap<usize, Rational>>, RoundingError> {
    let full = plan(inst, x, &Algorithm::TwoPhase { eta: eta.clone() })?;
    let light: Vec<Step> = full
        .steps
        .iter()
        .filter(|s| s.kind == StepKind::Independent)
        .cloned()
        .collect();
    let heavy: Vec<Step> = full
        .steps
        .iter()
        .filter(|s| s.kind == StepKind::Heavy && s.layer < inst.depth(t))
        .cloned()
        .collect();
    let t_anc: Vec<usize> = inst
        .pickable_path(t)
        .into_iter()
        .filter_map(|v| full.pos_index[v])
        .collect();
    let phase1 = Plan {
        steps: light,
        ..full.clone()
    };

    struct Cond<'a> {
        plan: &'a Plan,
        heavy: &'a [Step],
        t_anc: &'a [usize],
        picked: Vec<bool>,
        mass: Vec<Rational>,
        unsaved: Rational,
        branches: usize,
        cap: usize,
    }
    impl Cond<'_> {
        fn go(&mut self, s: usize, w: &Rational) -> Result<(), RoundingError> {
            let Some(step) = self.plan.steps.get(s) else {
                self.branches += 1;
                if self.branches > self.cap {
                    return Err(RoundingError::BranchCapExceeded(self.cap));
                }
                if self.t_anc.iter().any(|&i| self.picked[i]) {
                    return Ok(());
                }
                self.unsaved += w;
                for (h, step) in self.heavy.iter().enumerate() {
                    let m = rational::sum(
                        step.members
                            .iter()
                            .filter(|&&i| !self.plan.saved(&self.picked, i))
                            .map(|&i| &self.plan.x[self.plan.pos[i]]),
                    );
                    self.mass[h] += w * m;
                }
                return Ok(());
            };
            for (choice, p) in self.plan.options(step, &self.picked) {
                if p.is_zero() {
                    continue;
                }
                if let Some(i) = choice {
                    self.picked[i] = true;
                }
                self.go(s + 1, &(w * &p))?;
                if let Some(i) = choice {
                    self.picked[i] = false;
                }
            }
            Ok(())
        }
    }

    let mut c = Cond {
        plan: &phase1,
        heavy: &heavy,
        t_anc: &t_anc,
        picked: vec![false; full.pos.len()],
        mass: vec![zero(); heavy.len()],
        unsaved: zero(),
        branches: 0,
        cap: branch_cap,
    };
    c.go(0, &one())?;
    if c.unsaved.is_zero() {
        return Ok(None);
    }
    Ok(Some(
        heavy
            .iter()
            .zip(&c.mass)
            .map(|(s, m)| (s.layer, m / &c.unsaved))
            .collect(),
    ))
}

/// `Π_{u ∈ P_v} (1 − x_u)` for every vertex.
pub fn independent_unsaved_bound(
    inst: &Instance,
    x: &BTreeMap<VertexId, Rational>,
) -> Result<Vec<Rational>, RoundingError> {
    let x = dense_x(inst, x)?;
    let mut out = vec![one(); inst.vertex_count()];
    for &v in inst.bfs_order() {
        if let Some(p) = inst.parent(v) {
            out[v] = &out[p] * (one() - &x[v]);
        }
    }
    Ok(out)
}

/// Smallest `P[v saved] / y_v` over positive-x vertices, `y_v = min(1, x(P_v))`.
pub fn min_ratio_to_y(
    inst: &Instance,
    x: &BTreeMap<VertexId, Rational>,
    saved: &[Rational],
) -> Result<Option<(VertexId, Rational)>, RoundingError> {
    let dense = dense_x(inst, x)?;
    let sums = path_sums(inst, &dense);
    let mut best: Option<(VertexId, Rational)> = None;
    for v in 0..inst.vertex_count() {
        if !dense[v].is_positive() {
            continue;
        }
        let y = rational::min(&one(), &sums[v]);
        let r = &saved[v] / y;
        if best.as_ref().is_none_or(|(_, b)| r < *b) {
            best = Some((v, r));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{
        basic_gadget, fig4_fixture, half_on_specials, one_and_one_family, path3, two_heavy_family,
    };
    use crate::rational::ratio;

    fn xmap(pairs: &[(VertexId, Rational)]) -> BTreeMap<VertexId, Rational> {
        pairs.iter().cloned().collect()
    }

    #[test]
    fn certain_pick_always_saves() {
        let inst = path3();
        let x = xmap(&[(1, one())]);
        for seed in 0..20 {
            let run = independent_round(&inst, &x, seed).unwrap();
            assert!(run.saved.is_saved(2));
        }
        let e = exact_save_prob(&inst, &x, &Algorithm::Independent, 10).unwrap();
        assert_eq!(e.saved[2], one());
        assert_eq!(e.branches, 1);
    }

    #[test]
    fn independent_marginals_are_exact() {
        let (inst, x) = fig4_fixture();
        let e = exact_save_prob(&inst, &x, &Algorithm::Independent, 1000).unwrap();
        assert_eq!(e.total_weight, one());
        for v in 1..inst.vertex_count() {
            assert_eq!(e.picked[v], x.get(&v).cloned().unwrap_or_else(zero));
        }
        // c is saved unless neither a nor c is picked.
        assert_eq!(e.saved[3], ratio(3, 4));
        assert_eq!(e.saved[5], ratio(1, 2));
    }

    #[test]
    fn infeasible_layer_rejected() {
        let (inst, _) = fig4_fixture();
        let x = xmap(&[(1, ratio(2, 3)), (2, ratio(2, 3))]);
        assert!(matches!(
            independent_round(&inst, &x, 0),
            Err(RoundingError::InfeasibleX { layer: 1, .. })
        ));
    }

    #[test]
    fn one_and_one_family_two_thirds_five_sixths() {
        for d in 1..4 {
            let (inst, x, u, v) = one_and_one_family(d).unwrap();
            let e = exact_save_prob(&inst, &x, &Algorithm::HalfIntegral, 1000).unwrap();
            assert_eq!(e.saved[u], ratio(2, 3));
            assert_eq!(e.saved[v], ratio(5, 6));
        }
    }

    #[test]
    fn two_heavy_family_at_least_five_sixths() {
        let (inst, x, u, v) = two_heavy_family(2).unwrap();
        let e = exact_save_prob(&inst, &x, &Algorithm::HalfIntegral, 1000).unwrap();
        assert!(e.saved[u] >= ratio(5, 6));
        assert!(e.saved[v] >= ratio(5, 6));
        let (_, r) = min_ratio_to_y(&inst, &x, &e.saved).unwrap().unwrap();
        assert!(r >= ratio(5, 6));
    }

    #[test]
    fn half_integral_rejects_thirds() {
        let (inst, _) = fig4_fixture();
        let x = xmap(&[(1, ratio(1, 3))]);
        assert!(matches!(
            half_integral_round(&inst, &x, 0),
            Err(RoundingError::NotHalfIntegral(_))
        ));
    }

    #[test]
    fn zero_x_vertices_inherit_ancestor_probability() {
        let inst = basic_gadget();
        let x = half_on_specials(&inst);
        let e = exact_save_prob(&inst, &x, &Algorithm::HalfIntegral, 1000).unwrap();
        for v in 1..inst.vertex_count() {
            if !x.contains_key(&v) {
                let p = inst.parent(v).unwrap();
                assert_eq!(e.saved[v], e.saved[p]);
            }
        }
    }

    #[test]
    fn separability_examples() {
        let (inst, x) = fig4_fixture();
        let half = rational::half();
        assert!(
            classify_separable(&inst, &BTreeMap::new(), &half)
                .unwrap()
                .separable
        );
        let r = classify_separable(&inst, &x, &half).unwrap();
        assert!(r.separable);
        assert_eq!(r.layer_class[&1], LayerClass::Light);
        assert_eq!(r.layer_class[&2], LayerClass::Heavy);
        // c sits under a (sum 3/4), e under b (sum 0).
        let mixed = xmap(&[(1, ratio(3, 4)), (3, ratio(1, 8)), (5, ratio(1, 8))]);
        let r = classify_separable(&inst, &mixed, &half).unwrap();
        assert!(!r.separable);
        assert_eq!(r.layer_class[&2], LayerClass::Mixed);
        assert!(matches!(
            two_phase_round(&inst, &mixed, &half, 0),
            Err(RoundingError::NotSeparable { layer: 2, .. })
        ));
    }

    #[test]
    fn two_phase_without_heavy_layers_matches_independent() {
        let (inst, _) = fig4_fixture();
        let x = xmap(&[(1, ratio(1, 4)), (2, ratio(1, 2)), (3, ratio(1, 8))]);
        let half = rational::half();
        let r = classify_separable(&inst, &x, &half).unwrap();
        assert!(r.layers_of(LayerClass::Heavy).is_empty());
        let a = exact_save_prob(&inst, &x, &Algorithm::Independent, 1000).unwrap();
        let b = exact_save_prob(&inst, &x, &Algorithm::TwoPhase { eta: half }, 1000).unwrap();
        assert_eq!(a.saved, b.saved);
    }

    #[test]
    fn saved_heavy_layer_is_skipped() {
        let (inst, _) = fig4_fixture();
        let x = xmap(&[(1, one()), (3, ratio(1, 2)), (4, ratio(1, 2))]);
        for seed in 0..10 {
            let run = two_phase_round(&inst, &x, &rational::half(), seed).unwrap();
            assert_eq!(run.strategy.vertices().collect::<Vec<_>>(), vec![1]);
        }
    }

    #[test]
    fn two_phase_conditional_mass() {
        // s → a, b; a → c → e; b → d.
        let inst = Instance::build(&[(1, 0), (2, 0), (3, 1), (4, 2), (5, 3)], 0, &[5], 1).unwrap();
        let h = rational::half();
        let x = xmap(&[
            (1, h.clone()),
            (2, h.clone()),
            (3, h.clone()),
            (4, h.clone()),
        ]);
        let m = heavy_mass_given_unsaved(&inst, &x, &h, 5, 100)
            .unwrap()
            .unwrap();
        assert_eq!(m, BTreeMap::from([(2, h.clone())]));
        let sure = xmap(&[(1, one())]);
        assert!(heavy_mass_given_unsaved(&inst, &sure, &h, 5, 100)
            .unwrap()
            .is_none());
    }

    #[test]
    fn monte_carlo_agrees_with_exact() {
        let (inst, x) = fig4_fixture();
        for algo in [
            Algorithm::Independent,
            Algorithm::HalfIntegral,
            Algorithm::two_phase(),
        ] {
            let e = exact_save_prob(&inst, &x, &algo, 1000).unwrap();
            let m = monte_carlo(&inst, &x, &algo, 20_000, 7).unwrap();
            for v in 0..inst.vertex_count() {
                let p = rational::to_f64(&e.saved[v]);
                assert!(
                    (m.p[v] - p).abs() <= 4.0 * m.stderr[v].max(1e-3),
                    "{algo:?} v={v}"
                );
            }
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let (inst, x) = fig4_fixture();
        let a = round(&inst, &x, &Algorithm::Independent, 42).unwrap();
        let b = round(&inst, &x, &Algorithm::Independent, 42).unwrap();
        assert_eq!(a.strategy, b.strategy);
        let m1 = monte_carlo(&inst, &x, &Algorithm::Independent, 500, 3).unwrap();
        let m2 = monte_carlo(&inst, &x, &Algorithm::Independent, 500, 3).unwrap();
        assert_eq!(m1.saved_counts, m2.saved_counts);
    }

    #[test]
    fn branch_cap_is_enforced() {
        let (inst, x) = fig4_fixture();
        assert_eq!(
            exact_save_prob(&inst, &x, &Algorithm::Independent, 3).unwrap_err(),
            RoundingError::BranchCapExceeded(3)
        );
    }

    #[test]
    fn zero_x_gives_zero_frequencies() {
        let (inst, _) = fig4_fixture();
        let m = monte_carlo(&inst, &BTreeMap::new(), &Algorithm::Independent, 100, 0).unwrap();
        assert!(m.p.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn threshold_covers_the_unit_interval() {
        assert_eq!(threshold(&one()), 1u128 << 64);
        assert_eq!(threshold(&rational::half()), 1u128 << 63);
        let opts = vec![(Some(0), rational::half()), (None, rational::half())];
        assert_eq!(choose(&opts, 0), Some(0));
        assert_eq!(choose(&opts, u64::MAX), None);
    }
}
