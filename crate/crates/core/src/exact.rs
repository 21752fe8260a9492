//! Exact optimal strategies and the gap harness.
//!
//! The search walks layers top-down. A state is the multiset of burning
//! vertices in the current layer that still have terminals below; vertices
//! are replaced by canonical subtree classes (terminal and forbidden flags
//! included), so isomorphic states share one memo entry. Pruning only
//! compares alternatives inside a node, which keeps memoized values exact.

use crate::generators::GadgetOutput;
use crate::lp::{self, LpError, LpVariant};
use crate::rational::{self, int, zero, Rational};
use crate::simplex::{self, Status};
use crate::tree::{simulate, Instance, Strategy, VertexId};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExactError {
    #[error("search budget exhausted after {nodes} nodes (incumbent {incumbent})")]
    ResourceExhausted { nodes: usize, incumbent: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("LP solve ended with status {0:?}")]
    Solver(Status),
    #[error("{0}")]
    BadInput(String),
}

#[derive(Debug, Clone, Default)]
pub struct SearchOptions {
    pub node_cap: Option<usize>,
    pub time_limit: Option<Duration>,
    pub forbid_layers: BTreeSet<usize>,
    pub forbid_vertices: BTreeSet<VertexId>,
    /// Disable the layer-wise upper bound (for testing the bare search).
    pub no_bound: bool,
}

impl SearchOptions {
    pub fn forbid_layers<I: IntoIterator<Item = usize>>(mut self, layers: I) -> Self {
        self.forbid_layers.extend(layers);
        self
    }

    pub fn forbid_vertices<I: IntoIterator<Item = VertexId>>(mut self, vs: I) -> Self {
        self.forbid_vertices.extend(vs);
        self
    }

    pub fn node_cap(mut self, cap: usize) -> Self {
        self.node_cap = Some(cap);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResult {
    pub strategy: Strategy,
    /// Terminals saved by `strategy`.
    pub value: usize,
    pub proven_optimal: bool,
    /// Upper bound on the optimum (equal to `value` when proven).
    pub upper_bound: usize,
    pub nodes: usize,
}

type Class = u32;

struct Classes {
    of: Vec<Class>,
    weight: Vec<u64>,
    children: Vec<Vec<Class>>,
    forbidden: Vec<bool>,
    /// `best[c][r]`: heaviest vertex `r` levels below the class root.
    best: Vec<Vec<u64>>,
}

fn classify(inst: &Instance, forbid: &BTreeSet<VertexId>) -> Classes {
    let n = inst.vertex_count();
    let mut table: HashMap<(bool, bool, Vec<Class>), Class> = HashMap::new();
    let mut of = vec![0; n];
    let mut weight = Vec::new();
    let mut children = Vec::new();
    let mut forbidden = Vec::new();
    let mut best: Vec<Vec<u64>> = Vec::new();
    for &v in inst.bfs_order().iter().rev() {
        let mut kids: Vec<Class> = inst.children(v).iter().map(|&c| of[c]).collect();
        kids.sort_unstable();
        let key = (inst.is_terminal(v), forbid.contains(&v), kids);
        let next = weight.len() as Class;
        let id = *table.entry(key.clone()).or_insert(next);
        if id == next {
            let (term, forb, kids) = key;
            let w = term as u64 + kids.iter().map(|&c| weight[c as usize]).sum::<u64>();
            let mut b = vec![w];
            for &c in &kids {
                let cb = &best[c as usize];
                if b.len() < cb.len() + 1 {
                    b.resize(cb.len() + 1, 0);
                }
                for (r, &x) in cb.iter().enumerate() {
                    b[r + 1] = b[r + 1].max(x);
                }
            }
            weight.push(w);
            forbidden.push(forb);
            best.push(b);
            children.push(
                kids.into_iter()
                    .filter(|&c| weight[c as usize] > 0)
                    .collect(),
            );
        }
        of[v] = id;
    }
    Classes {
        of,
        weight,
        children,
        forbidden,
        best,
    }
}

struct Search<'a> {
    cls: &'a Classes,
    budget: usize,
    forbid_layer: Vec<bool>,
    keyed_by_layer: bool,
    use_bound: bool,
    memo: HashMap<(usize, Vec<Class>), (u64, Vec<Class>)>,
    nodes: usize,
    cap: usize,
    deadline: Option<Instant>,
    aborted: bool,
}

impl Search<'_> {
    fn layer_forbidden(&self, t: usize) -> bool {
        self.forbid_layer.get(t).copied().unwrap_or(false)
    }

    fn upper_bound(&self, t: usize, cands: &[Class]) -> u64 {
        let total: u64 = cands.iter().map(|&c| self.cls.weight[c as usize]).sum();
        if !self.use_bound {
            return total;
        }
        let mut per_level: Vec<u64> = Vec::new();
        for &c in cands {
            let b = &self.cls.best[c as usize];
            if per_level.len() < b.len() {
                per_level.resize(b.len(), 0);
            }
            for (r, &x) in b.iter().enumerate() {
                per_level[r] = per_level[r].max(x);
            }
        }
        let layered: u64 = per_level
            .iter()
            .enumerate()
            .filter(|(r, _)| !self.layer_forbidden(t + r))
            .map(|(_, &x)| x * self.budget as u64)
            .sum();
        total.min(layered)
    }

    fn next_state(&self, cands: &[Class], picked: &[Class]) -> Vec<Class> {
        let mut remaining: BTreeMap<Class, usize> = BTreeMap::new();
        for &c in picked {
            *remaining.entry(c).or_default() += 1;
        }
        let mut next = Vec::new();
        for &c in cands {
            if let Some(k) = remaining.get_mut(&c) {
                if *k > 0 {
                    *k -= 1;
                    continue;
                }
            }
            next.extend_from_slice(&self.cls.children[c as usize]);
        }
        next.sort_unstable();
        next
    }

    /// Sub-multisets of pickable classes with 1..=budget elements.
    fn pick_sets(&self, t: usize, cands: &[Class]) -> Vec<Vec<Class>> {
        if self.layer_forbidden(t) {
            return Vec::new();
        }
        let mut distinct: Vec<(Class, usize)> = Vec::new();
        for &c in cands {
            if self.cls.forbidden[c as usize] {
                continue;
            }
            match distinct.last_mut() {
                Some((d, k)) if *d == c => *k += 1,
                _ => distinct.push((c, 1)),
            }
        }
        let mut out = Vec::new();
        let mut cur = Vec::new();
        fn rec(
            i: usize,
            distinct: &[(Class, usize)],
            left: usize,
            cur: &mut Vec<Class>,
            out: &mut Vec<Vec<Class>>,
        ) {
            if i == distinct.len() {
                if !cur.is_empty() {
                    out.push(cur.clone());
                }
                return;
            }
            let (c, k) = distinct[i];
            for take in 0..=k.min(left) {
                for _ in 0..take {
                    cur.push(c);
                }
                rec(i + 1, distinct, left - take, cur, out);
                for _ in 0..take {
                    cur.pop();
                }
            }
        }
        rec(0, &distinct, self.budget, &mut cur, &mut out);
        out
    }

    fn solve(&mut self, t: usize, cands: Vec<Class>) -> u64 {
        if cands.is_empty() || self.aborted {
            return 0;
        }
        let key = (if self.keyed_by_layer { t } else { 0 }, cands);
        if let Some((v, _)) = self.memo.get(&key) {
            return *v;
        }
        let cands = key.1;
        self.nodes += 1;
        if self.nodes > self.cap
            || (self.nodes.is_multiple_of(1024)
                && self.deadline.is_some_and(|d| Instant::now() > d))
        {
            self.aborted = true;
            return 0;
        }
        let mut options: Vec<(u64, Vec<Class>)> = self
            .pick_sets(t, &cands)
            .into_iter()
            .map(|p| (p.iter().map(|&c| self.cls.weight[c as usize]).sum(), p))
            .collect();
        options.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        options.push((0, Vec::new()));
        let mut best = 0u64;
        let mut best_pick: Vec<Class> = Vec::new();
        let mut first = true;
        for (gain, pick) in options {
            let next = self.next_state(&cands, &pick);
            if !first && gain + self.upper_bound(t + 1, &next) <= best {
                continue;
            }
            let v = gain + self.solve(t + 1, next);
            if self.aborted {
                return 0;
            }
            if first || v > best {
                best = v;
                best_pick = pick;
            }
            first = false;
        }
        self.memo.insert(
            (if self.keyed_by_layer { t } else { 0 }, cands),
            (best, best_pick),
        );
        best
    }
}

fn root_candidates(inst: &Instance, cls: &Classes) -> Vec<VertexId> {
    inst.children(inst.root())
        .iter()
        .copied()
        .filter(|&c| cls.weight[cls.of[c] as usize] > 0)
        .collect()
}

fn greedy(inst: &Instance, cls: &Classes, opts: &SearchOptions) -> Strategy {
    let mut strategy = Strategy::new();
    let mut cands = root_candidates(inst, cls);
    let mut t = 1;
    while !cands.is_empty() {
        let mut order: Vec<VertexId> = cands
            .iter()
            .copied()
            .filter(|v| !opts.forbid_vertices.contains(v) && !opts.forbid_layers.contains(&t))
            .collect();
        order.sort_by_key(|&v| (std::cmp::Reverse(cls.weight[cls.of[v] as usize]), v));
        let picked: BTreeSet<VertexId> = order.into_iter().take(inst.budget()).collect();
        for &v in &picked {
            strategy.pick(t, v);
        }
        cands = cands
            .iter()
            .filter(|v| !picked.contains(v))
            .flat_map(|&v| inst.children(v).iter().copied())
            .filter(|&c| cls.weight[cls.of[c] as usize] > 0)
            .collect();
        t += 1;
    }
    strategy
}

/// Maximum number of saved terminals, with an optimal layered strategy.
///
/// When the node cap or time limit is hit the greedy incumbent is returned
/// with `proven_optimal = false`.
pub fn optimal_strategy(inst: &Instance, opts: &SearchOptions) -> SearchResult {
    let cls = classify(inst, &opts.forbid_vertices);
    let height = inst.height();
    let mut forbid_layer = vec![false; height + 2];
    for &l in &opts.forbid_layers {
        if l < forbid_layer.len() {
            forbid_layer[l] = true;
        }
    }
    let mut search = Search {
        cls: &cls,
        budget: inst.budget(),
        forbid_layer,
        keyed_by_layer: !opts.forbid_layers.is_empty(),
        use_bound: !opts.no_bound,
        memo: HashMap::new(),
        nodes: 0,
        cap: opts.node_cap.unwrap_or(usize::MAX),
        deadline: opts.time_limit.map(|d| Instant::now() + d),
        aborted: false,
    };
    let start_vertices = root_candidates(inst, &cls);
    let mut start: Vec<Class> = start_vertices.iter().map(|&v| cls.of[v]).collect();
    start.sort_unstable();
    let upper = search.upper_bound(1, &start);
    let value = search.solve(1, start.clone());
    if search.aborted {
        let strategy = greedy(inst, &cls, opts);
        let value = simulate(inst, &strategy)
            .expect("greedy is valid")
            .saved_terminal_count;
        return SearchResult {
            strategy,
            value,
            proven_optimal: false,
            upper_bound: upper as usize,
            nodes: search.nodes,
        };
    }

    // Replay memoized choices on concrete vertices.
    let mut strategy = Strategy::new();
    let mut cands = start_vertices;
    let mut t = 1;
    while !cands.is_empty() {
        let mut key_classes: Vec<Class> = cands.iter().map(|&v| cls.of[v]).collect();
        key_classes.sort_unstable();
        let key = (if search.keyed_by_layer { t } else { 0 }, key_classes);
        let pick = search
            .memo
            .get(&key)
            .map(|(_, p)| p.clone())
            .unwrap_or_default();
        let mut chosen = BTreeSet::new();
        for c in pick {
            let v = cands
                .iter()
                .copied()
                .filter(|v| cls.of[*v] == c && !chosen.contains(v))
                .min()
                .expect("memoized class is present");
            chosen.insert(v);
            strategy.pick(t, v);
        }
        cands = cands
            .iter()
            .filter(|v| !chosen.contains(v))
            .flat_map(|&v| inst.children(v).iter().copied())
            .filter(|&c| cls.weight[cls.of[c] as usize] > 0)
            .collect();
        t += 1;
    }
    let replayed = simulate(inst, &strategy).expect("replayed strategy is valid");
    debug_assert_eq!(replayed.saved_terminal_count as u64, value);
    SearchResult {
        strategy,
        value: value as usize,
        proven_optimal: true,
        upper_bound: value as usize,
        nodes: search.nodes,
    }
}

/// Brute force over every layered strategy, no pruning; for small trees.
pub fn exhaustive_optimum(inst: &Instance, opts: &SearchOptions) -> (usize, Strategy) {
    let layers: Vec<Vec<Vec<VertexId>>> = (1..=inst.height())
        .map(|t| {
            if opts.forbid_layers.contains(&t) {
                return vec![Vec::new()];
            }
            let allowed: Vec<VertexId> = inst
                .layer(t)
                .iter()
                .copied()
                .filter(|v| !opts.forbid_vertices.contains(v))
                .collect();
            subsets_up_to(&allowed, inst.budget())
        })
        .collect();
    let mut best = (0usize, Strategy::new());
    let mut idx = vec![0usize; layers.len()];
    loop {
        let mut s = Strategy::new();
        for (t, &i) in idx.iter().enumerate() {
            for &v in &layers[t][i] {
                s.pick(t + 1, v);
            }
        }
        let value = simulate(inst, &s)
            .expect("enumerated strategy is valid")
            .saved_terminal_count;
        if value > best.0 {
            best = (value, s);
        }
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return best;
            }
            idx[pos] += 1;
            if idx[pos] < layers[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

fn subsets_up_to(items: &[VertexId], k: usize) -> Vec<Vec<VertexId>> {
    let mut out = vec![Vec::new()];
    for &v in items {
        let extra: Vec<Vec<VertexId>> = out
            .iter()
            .filter(|s| s.len() < k)
            .map(|s| {
                let mut s = s.clone();
                s.push(v);
                s
            })
            .collect();
        out.extend(extra);
    }
    out
}

/// Leaves of the `ℬ` trees whose path from their gadget root avoids every
/// vertex of `picks`.
pub fn risky_count(g: &GadgetOutput, burning: &[usize], picks: &BTreeSet<VertexId>) -> usize {
    let inst = &g.instance;
    burning
        .iter()
        .map(|&i| {
            g.leaves_by_tree[i]
                .iter()
                .filter(|&&leaf| {
                    let mut v = leaf;
                    loop {
                        if picks.contains(&v) {
                            return false;
                        }
                        if v == g.roots[i] {
                            return true;
                        }
                        v = inst.parent(v).unwrap();
                    }
                })
                .count()
        })
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct RiskyWitness {
    /// Tree indices (0-based) of the burning roots.
    pub burning: Vec<usize>,
    /// One pick per gadget layer, as `[gadget_layer, vertex]`.
    pub picks: Vec<[usize; 2]>,
    pub risky: usize,
    #[serde(serialize_with = "ser_rational")]
    pub fraction: Rational,
}

#[derive(Debug, Clone, Serialize)]
pub struct RiskyReport {
    #[serde(serialize_with = "ser_rational")]
    pub min_fraction: Rational,
    pub witness: RiskyWitness,
    pub per_subset: Vec<RiskyWitness>,
    pub complete: bool,
}

/// Minimum over nonempty `ℬ` and strategies `𝒰` of
/// `risky · M / (|ℬ| · |L_h|)`.
pub fn risky_min(g: &GadgetOutput, node_cap: Option<usize>) -> Result<RiskyReport, ExactError> {
    let m = g.roots.len();
    if m > 20 {
        return Err(ExactError::BadInput(format!(
            "{m} gadget trees is too many to enumerate"
        )));
    }
    let total_leaves = g.leaf_count();
    let mut per_subset = Vec::new();
    let mut complete = true;
    for mask in 1u32..(1 << m) {
        let burning: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let terminals: Vec<VertexId> = burning
            .iter()
            .flat_map(|&i| g.leaves_by_tree[i].iter().copied())
            .collect();
        let inst = g
            .instance
            .with_terminals(&terminals)
            .map_err(|e| ExactError::BadInput(e.to_string()))?;
        let opts = SearchOptions {
            node_cap,
            ..SearchOptions::default()
        }
        .forbid_layers([1]);
        let res = optimal_strategy(&inst, &opts);
        complete &= res.proven_optimal;
        let picks: BTreeSet<VertexId> = res.strategy.vertices().collect();
        let risky = risky_count(g, &burning, &picks);
        debug_assert_eq!(risky, terminals.len() - res.value);
        let fraction = Rational::new(
            ((risky * m) as i64).into(),
            ((burning.len() * total_leaves) as i64).into(),
        );
        per_subset.push(RiskyWitness {
            burning,
            picks: res
                .strategy
                .as_pairs()
                .into_iter()
                .map(|[l, v]| [l - 1, v])
                .collect(),
            risky,
            fraction,
        });
    }
    let witness = per_subset
        .iter()
        .min_by(|a, b| a.fraction.cmp(&b.fraction))
        .cloned()
        .expect("at least one subset");
    Ok(RiskyReport {
        min_fraction: witness.fraction.clone(),
        witness,
        per_subset,
        complete,
    })
}

/// Largest fraction of tree `i`'s first-stage feet that one strategy can
/// separate from the burning root.
pub fn first_stage_cut_fraction(g: &GadgetOutput, i: usize) -> Rational {
    let targets = &g.specials_by_tree[i];
    let inst = g
        .instance
        .with_terminals(targets)
        .expect("specials are vertices");
    let res = optimal_strategy(&inst, &SearchOptions::default().forbid_layers([1]));
    Rational::new((res.value as i64).into(), (targets.len() as i64).into())
}

/// Largest fraction of the leaves below a first-stage foot `v` that picks
/// strictly below `v` can separate from `v`.
pub fn second_stage_cut_fraction(g: &GadgetOutput, v: VertexId) -> Rational {
    let inst = &g.instance;
    let below: Vec<VertexId> = inst
        .subtree(v)
        .expect("v is a vertex")
        .into_iter()
        .filter(|&u| inst.children(u).is_empty())
        .collect();
    let restricted = inst.with_terminals(&below).expect("leaves are vertices");
    let res = optimal_strategy(
        &restricted,
        &SearchOptions::default().forbid_layers(1..=inst.depth(v)),
    );
    Rational::new((res.value as i64).into(), (below.len() as i64).into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapMethod {
    Exhaustive,
    BranchAndBound,
    UpperBoundOnly,
}

/// Certified gap measurement.
#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    pub instance: String,
    pub lp_variant: LpVariant,
    #[serde(serialize_with = "ser_rational")]
    pub lp_value: Rational,
    pub opt: usize,
    pub opt_upper_bound: usize,
    #[serde(serialize_with = "ser_rational")]
    pub gap: Rational,
    pub method: GapMethod,
    pub strategy: Vec<[usize; 2]>,
    pub pivot_count: usize,
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&rational::format(r))
}

impl GapReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn build_lp(inst: &Instance, variant: LpVariant) -> Result<lp::LinearProgram, ExactError> {
    Ok(match variant {
        LpVariant::Lp1 => lp::build_lp1(inst),
        LpVariant::Lp2 => lp::build_lp2(inst)?,
        LpVariant::Hartke => lp::drop_dominated_rows(&lp::build_lp_hartke(inst)?),
        LpVariant::Imported => {
            return Err(ExactError::BadInput("imported LPs have no instance".into()))
        }
    })
}

/// Exact LP optimum and optimal (or best found) strategy on one instance.
pub fn measure_gap(
    inst: &Instance,
    name: &str,
    variant: LpVariant,
    opts: &SearchOptions,
) -> Result<GapReport, ExactError> {
    let lp = build_lp(inst, variant)?;
    let res = simplex::solve(&lp);
    if res.status != Status::Optimal {
        return Err(ExactError::Solver(res.status));
    }
    let lp_value = res.solution.expect("optimal").objective_value;
    let plain;
    let inst = if variant == LpVariant::Lp1 && inst.has_explicit_terminals() {
        plain = inst
            .with_terminals(&[])
            .map_err(|e| ExactError::BadInput(e.to_string()))?;
        &plain
    } else {
        inst
    };
    let search = optimal_strategy(inst, opts);
    let method = if !search.proven_optimal {
        GapMethod::UpperBoundOnly
    } else if inst.vertex_count() <= 12 {
        GapMethod::Exhaustive
    } else {
        GapMethod::BranchAndBound
    };
    if inst.vertex_count() <= 12 && search.proven_optimal {
        let (brute, _) = exhaustive_optimum(inst, opts);
        if brute != search.value {
            return Err(ExactError::BadInput(format!(
                "search value {} disagrees with brute force {brute}",
                search.value
            )));
        }
    }
    let gap = if lp_value == zero() {
        int(1)
    } else {
        int(search.value as i64) / &lp_value
    };
    Ok(GapReport {
        instance: name.to_string(),
        lp_variant: variant,
        lp_value,
        opt: search.value,
        opt_upper_bound: search.upper_bound,
        gap,
        method,
        strategy: search.strategy.as_pairs(),
        pivot_count: res.pivot_count,
    })
}
