//! Explicit sparse LP relaxations over an [`Instance`].
//!
//! Variables are ordered `x` by vertex id, then `y` by vertex id. Every
//! variable carries the box `[0, 1]`; rows are all of the form `a·z ≤ rhs`.

use crate::rational::{self, int, one, zero, Rational};
use crate::tree::{Instance, VertexId};
use num::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LpError {
    #[error("LP-2 needs an explicit terminal set")]
    EmptyTerminals,
    #[error("Hartke rows are only defined for budget 1 (instance budget is {0})")]
    HartkeBudgetUnsupported(usize),
    #[error("solution does not match the LP variables: {0}")]
    DimensionMismatch(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VarKind {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Var {
    pub kind: VarKind,
    pub vertex: VertexId,
}

impl std::fmt::Display for Var {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            VarKind::X => write!(f, "x{}", self.vertex),
            VarKind::Y => write!(f, "y{}", self.vertex),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LpVariant {
    #[serde(rename = "LP1")]
    Lp1,
    #[serde(rename = "LP2")]
    Lp2,
    #[serde(rename = "LPprime")]
    Hartke,
    #[serde(rename = "imported")]
    Imported,
}

impl LpVariant {
    pub fn name(self) -> &'static str {
        match self {
            LpVariant::Lp1 => "LP1",
            LpVariant::Lp2 => "LP2",
            LpVariant::Hartke => "LPprime",
            LpVariant::Imported => "imported",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RowKind {
    /// `Σ_{L_j} x ≤ b`.
    Layer {
        layer: usize,
    },
    /// `y_v − Σ_{P_v} x ≤ 0`.
    Coverage {
        vertex: VertexId,
    },
    /// `Σ_{P_v ∪ (T_v ∩ L_j)} x ≤ 1`.
    Hartke {
        vertex: VertexId,
        layer: usize,
    },
    /// Variable upper bound `z ≤ 1`; only produced by feasibility reports.
    Bound {
        var: usize,
    },
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub coeffs: Vec<(usize, Rational)>,
    pub rhs: Rational,
    pub kind: RowKind,
}

impl Row {
    pub fn lhs(&self, values: &[Rational]) -> Rational {
        self.coeffs
            .iter()
            .fold(zero(), |acc, (i, c)| acc + c * &values[*i])
    }

    fn support(&self) -> Vec<usize> {
        self.coeffs.iter().map(|(i, _)| *i).collect()
    }

    fn is_unit_packing(&self) -> bool {
        self.coeffs.iter().all(|(_, c)| c == &one())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearProgram {
    pub variant: LpVariant,
    pub variables: Vec<Var>,
    /// Maximize `objective · z`.
    pub objective: Vec<(usize, Rational)>,
    pub rows: Vec<Row>,
    index: BTreeMap<Var, usize>,
}

impl LinearProgram {
    pub fn new(
        variant: LpVariant,
        variables: Vec<Var>,
        objective: Vec<(usize, Rational)>,
        rows: Vec<Row>,
    ) -> Self {
        let index = variables.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        Self {
            variant,
            variables,
            objective,
            rows,
            index,
        }
    }

    pub fn var_count(&self) -> usize {
        self.variables.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn index_of(&self, var: Var) -> Option<usize> {
        self.index.get(&var).copied()
    }

    pub fn x(&self, v: VertexId) -> Option<usize> {
        self.index_of(Var {
            kind: VarKind::X,
            vertex: v,
        })
    }

    pub fn y(&self, v: VertexId) -> Option<usize> {
        self.index_of(Var {
            kind: VarKind::Y,
            vertex: v,
        })
    }

    pub fn rows_of(&self, pred: impl Fn(&RowKind) -> bool) -> usize {
        self.rows.iter().filter(|r| pred(&r.kind)).count()
    }

    pub fn objective_value(&self, values: &[Rational]) -> Rational {
        self.objective
            .iter()
            .fold(zero(), |acc, (i, c)| acc + c * &values[*i])
    }

    /// Dense value vector for a solution; errors unless the solution names
    /// exactly this LP's variables.
    pub fn values_of(&self, sol: &FractionalSolution) -> Result<Vec<Rational>, LpError> {
        let mut values = vec![zero(); self.var_count()];
        let mut seen = 0usize;
        for (kind, map) in [(VarKind::X, &sol.x), (VarKind::Y, &sol.y)] {
            for (&v, val) in map {
                let var = Var { kind, vertex: v };
                let i = self.index_of(var).ok_or_else(|| {
                    LpError::DimensionMismatch(format!("{var} is not an LP variable"))
                })?;
                values[i] = val.clone();
                seen += 1;
            }
        }
        if seen != self.var_count() {
            return Err(LpError::DimensionMismatch(format!(
                "solution has {seen} values, LP has {} variables",
                self.var_count()
            )));
        }
        Ok(values)
    }

    pub fn solution_from_values(&self, values: &[Rational], is_basic: bool) -> FractionalSolution {
        let mut x = BTreeMap::new();
        let mut y = BTreeMap::new();
        for (var, val) in self.variables.iter().zip(values) {
            match var.kind {
                VarKind::X => x.insert(var.vertex, val.clone()),
                VarKind::Y => y.insert(var.vertex, val.clone()),
            };
        }
        FractionalSolution {
            x,
            y,
            objective_value: self.objective_value(values),
            is_basic,
        }
    }

    /// Plain-text export: a `vars` line, a `max` line, then one line per row
    /// `<= rhs  idx:coef ...` with rationals as `p/q`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("vars");
        for v in &self.variables {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
        out.push_str("max");
        for (i, c) in &self.objective {
            write!(out, " {i}:{}", rational::Pq(c)).unwrap();
        }
        out.push('\n');
        for row in &self.rows {
            write!(out, "<= {} ", rational::Pq(&row.rhs)).unwrap();
            for (i, c) in &row.coeffs {
                write!(out, " {i}:{}", rational::Pq(c)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, LpError> {
        let perr = |line: usize, msg: &str| LpError::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut variables = None;
        let mut objective = None;
        let mut rows = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let mut toks = raw.split_whitespace();
            let Some(head) = toks.next() else { continue };
            match head {
                "vars" => {
                    let vars = toks
                        .map(|t| {
                            let (kind, rest) = match t.split_at(1) {
                                ("x", r) => (VarKind::X, r),
                                ("y", r) => (VarKind::Y, r),
                                _ => return Err(perr(line, "variable must start with x or y")),
                            };
                            let vertex = rest.parse().map_err(|_| perr(line, "bad vertex id"))?;
                            Ok(Var { kind, vertex })
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    variables = Some(vars);
                }
                "max" => objective = Some(parse_terms(toks, line)?),
                "<=" => {
                    let rhs = toks.next().ok_or_else(|| perr(line, "missing rhs"))?;
                    let rhs = rational::parse(rhs).map_err(|e| perr(line, &e.to_string()))?;
                    rows.push(Row {
                        coeffs: parse_terms(toks, line)?,
                        rhs,
                        kind: RowKind::Other,
                    });
                }
                _ => return Err(perr(line, "expected vars, max or <=")),
            }
        }
        let variables = variables.ok_or_else(|| perr(0, "missing vars line"))?;
        let objective = objective.unwrap_or_default();
        let n = variables.len();
        let bad = objective
            .iter()
            .chain(rows.iter().flat_map(|r| r.coeffs.iter()))
            .any(|(i, _)| *i >= n);
        if bad {
            return Err(perr(0, "term references an undeclared variable"));
        }
        Ok(Self::new(LpVariant::Imported, variables, objective, rows))
    }
}

fn parse_terms<'a>(
    toks: impl Iterator<Item = &'a str>,
    line: usize,
) -> Result<Vec<(usize, Rational)>, LpError> {
    toks.map(|t| {
        let (i, c) = t.split_once(':').ok_or_else(|| LpError::Parse {
            line,
            msg: format!("bad term {t:?}"),
        })?;
        let i = i.parse().map_err(|_| LpError::Parse {
            line,
            msg: format!("bad index {i:?}"),
        })?;
        let c = rational::parse(c).map_err(|e| LpError::Parse {
            line,
            msg: e.to_string(),
        })?;
        Ok((i, c))
    })
    .collect()
}

/// An (x, y) point over instance vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FractionalSolution {
    pub x: BTreeMap<VertexId, Rational>,
    pub y: BTreeMap<VertexId, Rational>,
    pub objective_value: Rational,
    pub is_basic: bool,
}

impl FractionalSolution {
    /// Keeps only the variables of `lp` and recomputes its objective.
    pub fn project(&self, lp: &LinearProgram) -> FractionalSolution {
        let values: Vec<Rational> = lp
            .variables
            .iter()
            .map(|var| {
                let map = match var.kind {
                    VarKind::X => &self.x,
                    VarKind::Y => &self.y,
                };
                map.get(&var.vertex).cloned().unwrap_or_else(zero)
            })
            .collect();
        lp.solution_from_values(&values, false)
    }

    pub fn x_of(&self, v: VertexId) -> Rational {
        self.x.get(&v).cloned().unwrap_or_else(zero)
    }

    pub fn y_of(&self, v: VertexId) -> Rational {
        self.y.get(&v).cloned().unwrap_or_else(zero)
    }

    /// x as a dense per-vertex vector (root and missing entries are 0).
    pub fn x_dense(&self, n: usize) -> Vec<Rational> {
        let mut out = vec![zero(); n];
        for (&v, val) in &self.x {
            out[v] = val.clone();
        }
        out
    }
}

fn x_vars(inst: &Instance) -> Vec<Var> {
    (0..inst.vertex_count())
        .filter(|&v| v != inst.root())
        .map(|v| Var {
            kind: VarKind::X,
            vertex: v,
        })
        .collect()
}

fn build_with_cover(inst: &Instance, variant: LpVariant, cover: &[VertexId]) -> LinearProgram {
    let mut variables = x_vars(inst);
    variables.extend(cover.iter().map(|&v| Var {
        kind: VarKind::Y,
        vertex: v,
    }));
    let index: BTreeMap<Var, usize> = variables.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let xi = |v: VertexId| {
        index[&Var {
            kind: VarKind::X,
            vertex: v,
        }]
    };
    let yi = |v: VertexId| {
        index[&Var {
            kind: VarKind::Y,
            vertex: v,
        }]
    };

    let mut rows = Vec::new();
    for j in 1..=inst.height() {
        rows.push(Row {
            coeffs: inst.layer(j).iter().map(|&v| (xi(v), one())).collect(),
            rhs: int(inst.budget() as i64),
            kind: RowKind::Layer { layer: j },
        });
    }
    for &v in cover {
        let mut coeffs = vec![(yi(v), one())];
        let mut path: Vec<usize> = inst.pickable_path(v).into_iter().map(xi).collect();
        path.sort_unstable();
        coeffs.extend(path.into_iter().map(|i| (i, -one())));
        rows.push(Row {
            coeffs,
            rhs: zero(),
            kind: RowKind::Coverage { vertex: v },
        });
    }
    let objective = cover.iter().map(|&v| (yi(v), one())).collect();
    LinearProgram::new(variant, variables, objective, rows)
}

/// Layer rows with rhs `b`, coverage rows and objective over every non-root
/// vertex; declared terminals are ignored.
pub fn build_lp1(inst: &Instance) -> LinearProgram {
    let cover: Vec<VertexId> = (0..inst.vertex_count())
        .filter(|&v| v != inst.root())
        .collect();
    build_with_cover(inst, LpVariant::Lp1, &cover)
}

/// Coverage rows and objective over the declared terminals only.
pub fn build_lp2(inst: &Instance) -> Result<LinearProgram, LpError> {
    if !inst.has_explicit_terminals() {
        return Err(LpError::EmptyTerminals);
    }
    Ok(build_with_cover(
        inst,
        LpVariant::Lp2,
        inst.declared_terminals(),
    ))
}

/// Number of Hartke rows: for each non-root `v`, the layers strictly below
/// `v` that meet `T_v`.
pub fn hartke_row_count(inst: &Instance) -> usize {
    let mut below = vec![0usize; inst.vertex_count()];
    for &v in inst.bfs_order().iter().rev() {
        if let Some(p) = inst.parent(v) {
            below[p] = below[p].max(below[v] + 1);
        }
    }
    (0..inst.vertex_count())
        .filter(|&v| v != inst.root())
        .map(|v| below[v])
        .sum()
}

/// LP-1 (or LP-2 when terminals are declared) plus one Hartke row per
/// non-root `v` and layer `j > layer(v)` meeting `T_v`.
pub fn build_lp_hartke(inst: &Instance) -> Result<LinearProgram, LpError> {
    if inst.budget() != 1 {
        return Err(LpError::HartkeBudgetUnsupported(inst.budget()));
    }
    let mut lp = if inst.has_explicit_terminals() {
        build_lp2(inst)?
    } else {
        build_lp1(inst)
    };
    lp.variant = LpVariant::Hartke;
    for v in 0..inst.vertex_count() {
        if v == inst.root() {
            continue;
        }
        let path: Vec<usize> = inst
            .pickable_path(v)
            .into_iter()
            .map(|u| lp.x(u).unwrap())
            .collect();
        let mut by_layer: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for u in inst.subtree(v).unwrap() {
            if u != v {
                by_layer
                    .entry(inst.depth(u))
                    .or_default()
                    .push(lp.x(u).unwrap());
            }
        }
        for (layer, members) in by_layer {
            let mut support: Vec<usize> = path.iter().chain(members.iter()).copied().collect();
            support.sort_unstable();
            lp.rows.push(Row {
                coeffs: support.into_iter().map(|i| (i, one())).collect(),
                rhs: one(),
                kind: RowKind::Hartke { vertex: v, layer },
            });
        }
    }
    Ok(lp)
}

/// Drops every all-ones packing row whose support is contained in another
/// such row with the same rhs (the first of several identical rows is kept).
pub fn drop_dominated_rows(lp: &LinearProgram) -> LinearProgram {
    let packing: Vec<(usize, BTreeSet<usize>)> = lp
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_unit_packing() && !r.rhs.is_negative())
        .map(|(i, r)| (i, r.support().into_iter().collect()))
        .collect();
    let mut drop = vec![false; lp.rows.len()];
    for (a, sa) in &packing {
        for (b, sb) in &packing {
            if a == b || drop[*b] || lp.rows[*a].rhs != lp.rows[*b].rhs {
                continue;
            }
            let strictly = sa.len() < sb.len();
            if sa.is_subset(sb) && (strictly || b < a) {
                drop[*a] = true;
                break;
            }
        }
    }
    let rows = lp
        .rows
        .iter()
        .zip(&drop)
        .filter(|(_, d)| !**d)
        .map(|(r, _)| r.clone())
        .collect();
    LinearProgram::new(lp.variant, lp.variables.clone(), lp.objective.clone(), rows)
}

/// Root-to-`v` sums `Σ_{P_v} x` (root excluded, `v` included).
pub fn path_sums(inst: &Instance, x: &[Rational]) -> Vec<Rational> {
    let mut sums = vec![zero(); inst.vertex_count()];
    for &v in inst.bfs_order() {
        if let Some(p) = inst.parent(v) {
            sums[v] = &sums[p] + &x[v];
        }
    }
    sums
}

/// The largest feasible `y` for a given `x`: `y_v = min(1, Σ_{P_v} x)` on
/// every non-root vertex; the objective counts effective terminals.
pub fn y_from_x(inst: &Instance, x: &BTreeMap<VertexId, Rational>) -> FractionalSolution {
    let mut dense = vec![zero(); inst.vertex_count()];
    for (&v, val) in x {
        dense[v] = val.clone();
    }
    let sums = path_sums(inst, &dense);
    let mut y = BTreeMap::new();
    let mut objective = zero();
    for v in 0..inst.vertex_count() {
        if v == inst.root() {
            continue;
        }
        let yv = rational::min(&one(), &sums[v]);
        if inst.is_terminal(v) {
            objective += &yv;
        }
        y.insert(v, yv);
    }
    let x = (0..inst.vertex_count())
        .filter(|&v| v != inst.root())
        .map(|v| (v, dense[v].clone()))
        .collect();
    FractionalSolution {
        x,
        y,
        objective_value: objective,
        is_basic: false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Row index, or `None` for a variable bound.
    pub row: Option<usize>,
    pub kind: RowKind,
    pub lhs: Rational,
    pub rhs: Rational,
    /// `rhs − lhs`, negative for a violation.
    pub slack: Rational,
}

/// Every violated row and bound with its exact slack; empty means feasible.
pub fn check_feasibility(
    lp: &LinearProgram,
    sol: &FractionalSolution,
) -> Result<Vec<Violation>, LpError> {
    let values = lp.values_of(sol)?;
    let mut out = Vec::new();
    for (i, val) in values.iter().enumerate() {
        if val.is_negative() {
            out.push(Violation {
                row: None,
                kind: RowKind::Bound { var: i },
                lhs: -val.clone(),
                rhs: zero(),
                slack: val.clone(),
            });
        } else if *val > one() {
            out.push(Violation {
                row: None,
                kind: RowKind::Bound { var: i },
                lhs: val.clone(),
                rhs: one(),
                slack: one() - val,
            });
        }
    }
    for (i, row) in lp.rows.iter().enumerate() {
        let lhs = row.lhs(&values);
        if lhs > row.rhs {
            out.push(Violation {
                row: Some(i),
                kind: row.kind,
                slack: &row.rhs - &lhs,
                lhs,
                rhs: row.rhs.clone(),
            });
        }
    }
    Ok(out)
}

/// A Hartke row `(v, j)` checked without materializing the LP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HartkeViolation {
    pub vertex: VertexId,
    pub layer: usize,
    pub lhs: Rational,
}

/// Checks every Hartke row (and, through the root, every layer row) for a
/// per-vertex `x` by merging sparse per-subtree layer sums bottom-up.
pub fn check_hartke_implicit(inst: &Instance, x: &[Rational]) -> Vec<HartkeViolation> {
    let sums = path_sums(inst, x);
    let n = inst.vertex_count();
    let mut maps: Vec<BTreeMap<usize, Rational>> = vec![BTreeMap::new(); n];
    let mut out = Vec::new();
    for &v in inst.bfs_order().iter().rev() {
        let mut merged = std::mem::take(&mut maps[v]);
        for &c in inst.children(v) {
            let mut child = std::mem::take(&mut maps[c]);
            if child.len() > merged.len() {
                std::mem::swap(&mut child, &mut merged);
            }
            for (d, s) in child {
                *merged.entry(d).or_insert_with(zero) += s;
            }
        }
        let prefix = &sums[v];
        for (&layer, s) in &merged {
            let lhs = prefix + s;
            if lhs > one() {
                out.push(HartkeViolation {
                    vertex: v,
                    layer,
                    lhs,
                });
            }
        }
        if v != inst.root() && !x[v].is_zero() {
            merged.insert(inst.depth(v), x[v].clone());
        }
        maps[v] = merged;
    }
    out.sort_by_key(|h| (h.vertex, h.layer));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn path3() -> Instance {
        Instance::build(&[(1, 0), (2, 1)], 0, &[], 1).unwrap()
    }

    #[test]
    fn lp1_path_shape() {
        let lp = build_lp1(&path3());
        assert_eq!(lp.rows_of(|k| matches!(k, RowKind::Layer { .. })), 2);
        assert_eq!(lp.rows_of(|k| matches!(k, RowKind::Coverage { .. })), 2);
        assert_eq!(lp.objective.len(), 2);
        assert_eq!(lp.variables.len(), 4);
        assert_eq!(lp.x(1), Some(0));
        assert_eq!(lp.y(2), Some(3));
    }

    #[test]
    fn lp2_objective_terminals_only() {
        let inst = Instance::build(&[(1, 0), (2, 1)], 0, &[2], 1).unwrap();
        let lp = build_lp2(&inst).unwrap();
        assert_eq!(lp.objective, vec![(lp.y(2).unwrap(), one())]);
        assert_eq!(build_lp2(&path3()), Err(LpError::EmptyTerminals));
    }

    #[test]
    fn layer_violation_slack() {
        let inst = Instance::build(&[(1, 0), (2, 0)], 0, &[], 1).unwrap();
        let lp = build_lp1(&inst);
        let x = BTreeMap::from([(1, ratio(3, 5)), (2, ratio(3, 5))]);
        let sol = FractionalSolution {
            x,
            y: BTreeMap::from([(1, zero()), (2, zero())]),
            objective_value: zero(),
            is_basic: false,
        };
        let report = check_feasibility(&lp, &sol).unwrap();
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].slack, ratio(-1, 5));
        assert_eq!(report[0].kind, RowKind::Layer { layer: 1 });
    }

    #[test]
    fn dimension_mismatch() {
        let lp = build_lp1(&path3());
        let sol = FractionalSolution {
            x: BTreeMap::from([(1, zero())]),
            y: BTreeMap::new(),
            objective_value: zero(),
            is_basic: false,
        };
        assert!(matches!(
            check_feasibility(&lp, &sol),
            Err(LpError::DimensionMismatch(_))
        ));
        let sol = FractionalSolution {
            x: BTreeMap::from([(0, zero())]),
            ..sol
        };
        assert!(matches!(
            check_feasibility(&lp, &sol),
            Err(LpError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn hartke_on_path_is_prefix_sum() {
        let lp = build_lp_hartke(&path3()).unwrap();
        let rows: Vec<_> = lp
            .rows
            .iter()
            .filter(|r| matches!(r.kind, RowKind::Hartke { .. }))
            .collect();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].support(), vec![0, 1]);
        assert_eq!(hartke_row_count(&path3()), 1);
    }

    #[test]
    fn hartke_refuses_budget() {
        let inst = path3().with_budget(2).unwrap();
        assert_eq!(
            build_lp_hartke(&inst),
            Err(LpError::HartkeBudgetUnsupported(2))
        );
    }

    #[test]
    fn y_from_x_zero() {
        let sol = y_from_x(&path3(), &BTreeMap::new());
        assert!(sol.y.values().all(Zero::is_zero));
        assert!(sol.objective_value.is_zero());
    }

    #[test]
    fn text_roundtrip() {
        let inst = Instance::build(&[(1, 0), (2, 0), (3, 1)], 0, &[2, 3], 1).unwrap();
        let lp = build_lp_hartke(&inst).unwrap();
        let text = lp.to_text();
        let back = LinearProgram::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.variables, lp.variables);
        assert!(LinearProgram::from_text("vars x1\n<= 1/1 5:1/1\n").is_err());
    }

    #[test]
    fn redundancy_filter_keeps_maximal_rows() {
        let inst = Instance::build(&[(1, 0), (2, 1), (3, 2)], 0, &[], 1).unwrap();
        let lp = build_lp_hartke(&inst).unwrap();
        let filtered = drop_dominated_rows(&lp);
        // Only x1+x2+x3 ≤ 1 survives among packing rows on a path.
        let packing = filtered
            .rows
            .iter()
            .filter(|r| !matches!(r.kind, RowKind::Coverage { .. }))
            .count();
        assert_eq!(packing, 1);
    }

    #[test]
    fn implicit_hartke_matches_explicit() {
        let inst = Instance::build(&[(1, 0), (2, 0), (3, 1), (4, 1), (5, 3)], 0, &[], 1).unwrap();
        let lp = build_lp_hartke(&inst).unwrap();
        let x = vec![
            zero(),
            ratio(1, 2),
            ratio(1, 2),
            ratio(1, 2),
            ratio(1, 4),
            ratio(1, 4),
        ];
        let xmap = (1..6).map(|v| (v, x[v].clone())).collect();
        let sol = y_from_x(&inst, &xmap).project(&lp);
        let explicit: BTreeSet<(usize, usize)> = check_feasibility(&lp, &sol)
            .unwrap()
            .into_iter()
            .filter_map(|v| match v.kind {
                RowKind::Hartke { vertex, layer } => Some((vertex, layer)),
                RowKind::Layer { layer } => Some((0, layer)),
                _ => None,
            })
            .collect();
        let implicit: BTreeSet<(usize, usize)> = check_hartke_implicit(&inst, &x)
            .into_iter()
            .map(|h| (h.vertex, h.layer))
            .collect();
        assert_eq!(explicit, implicit);
        assert!(!implicit.is_empty());
    }
}
