//! Exact primal simplex over [`Rational`] on a dense tableau.
//!
//! The LP `max c·z, Az ≤ b, 0 ≤ z ≤ 1` is brought to standard form with one
//! slack per row; a bound row `z_j ≤ 1` is added only when no nonnegative
//! row already implies it. Phase 1 (single artificial column) runs only when
//! some rhs is negative.

use crate::lp::{FractionalSolution, LinearProgram, VarKind};
use crate::rational::{one, zero, Rational};
use num::{One, Signed, Zero};
use std::collections::HashSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PivotRule {
    /// Smallest-index entering and leaving columns.
    #[default]
    Bland,
    /// Largest reduced cost entering, lexicographic ratio test.
    Lexicographic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Column {
    Var(usize),
    Slack(usize),
}

/// Where a standard-form row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StdRow {
    Lp(usize),
    UpperBound(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimplexError {
    #[error("pivot limit {0} reached")]
    PivotLimit(usize),
    #[error("vertex enumeration needs a nonnegative rhs")]
    NegativeRhs,
    #[error("LP is not optimal ({0:?})")]
    NotOptimal(Status),
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub status: Status,
    pub solution: Option<FractionalSolution>,
    /// Values of the LP variables (empty unless optimal).
    pub values: Vec<Rational>,
    pub basis: Vec<Column>,
    pub pivot_count: usize,
    pub rows: Vec<StdRow>,
    /// One dual per standard-form row.
    pub duals: Vec<Rational>,
    /// `c_j − yᵀA_j` per LP variable.
    pub reduced_costs: Vec<Rational>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimplexOptions {
    pub rule: PivotRule,
    pub max_pivots: Option<usize>,
}

#[derive(Clone)]
struct Tableau {
    a: Vec<Vec<Rational>>,
    b: Vec<Rational>,
    d: Vec<Rational>,
    value: Rational,
    basis: Vec<usize>,
    n_vars: usize,
    m: usize,
    allowed: Vec<bool>,
    pivots: usize,
}

impl Tableau {
    fn slack(&self, i: usize) -> usize {
        self.n_vars + i
    }

    fn pivot(&mut self, r: usize, c: usize) {
        self.pivots += 1;
        let inv = one() / &self.a[r][c];
        let nz: Vec<usize> = (0..self.a[r].len())
            .filter(|&j| !self.a[r][j].is_zero())
            .collect();
        for &j in &nz {
            self.a[r][j] *= &inv;
        }
        self.b[r] *= &inv;
        let (head, rest) = self.a.split_at_mut(r);
        let (prow, tail) = rest.split_first_mut().unwrap();
        for (i, row) in head.iter_mut().chain(tail.iter_mut()).enumerate() {
            let f = row[c].clone();
            if f.is_zero() {
                continue;
            }
            for &j in &nz {
                let delta = &f * &prow[j];
                row[j] -= delta;
            }
            let i = if i < r { i } else { i + 1 };
            let delta = &f * &self.b[r];
            self.b[i] -= delta;
        }
        let f = self.d[c].clone();
        if !f.is_zero() {
            for &j in &nz {
                let delta = &f * &self.a[r][j];
                self.d[j] -= delta;
            }
            self.value += &f * &self.b[r];
        }
        self.basis[r] = c;
    }

    fn entering(&self, rule: PivotRule) -> Option<usize> {
        let candidates = (0..self.d.len()).filter(|&j| self.allowed[j] && self.d[j].is_positive());
        match rule {
            PivotRule::Bland => candidates.min(),
            PivotRule::Lexicographic => {
                let mut best: Option<usize> = None;
                for j in candidates {
                    if best.is_none_or(|b| self.d[j] > self.d[b]) {
                        best = Some(j);
                    }
                }
                best
            }
        }
    }

    fn leaving(&self, c: usize, rule: PivotRule) -> Option<usize> {
        let mut best: Option<usize> = None;
        for i in 0..self.m {
            if !self.a[i][c].is_positive() {
                continue;
            }
            let Some(k) = best else {
                best = Some(i);
                continue;
            };
            let ord = (&self.b[i] * &self.a[k][c]).cmp(&(&self.b[k] * &self.a[i][c]));
            let better = match ord {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Greater => false,
                std::cmp::Ordering::Equal => match rule {
                    PivotRule::Bland => self.basis[i] < self.basis[k],
                    PivotRule::Lexicographic => self.lex_less(i, k, c),
                },
            };
            if better {
                best = Some(i);
            }
        }
        best
    }

    /// Compares rows `i`, `k` of `B⁻¹` (the slack block) scaled by column `c`.
    fn lex_less(&self, i: usize, k: usize, c: usize) -> bool {
        for s in 0..self.m {
            let col = self.slack(s);
            let lhs = &self.a[i][col] * &self.a[k][c];
            let rhs = &self.a[k][col] * &self.a[i][c];
            match lhs.cmp(&rhs) {
                std::cmp::Ordering::Less => return true,
                std::cmp::Ordering::Greater => return false,
                std::cmp::Ordering::Equal => {}
            }
        }
        false
    }

    fn run(&mut self, rule: PivotRule, limit: Option<usize>) -> Result<Status, SimplexError> {
        loop {
            let Some(c) = self.entering(rule) else {
                return Ok(Status::Optimal);
            };
            let Some(r) = self.leaving(c, rule) else {
                return Ok(Status::Unbounded);
            };
            if let Some(limit) = limit {
                if self.pivots >= limit {
                    return Err(SimplexError::PivotLimit(limit));
                }
            }
            self.pivot(r, c);
        }
    }

    fn column_values(&self) -> Vec<Rational> {
        let mut vals = vec![zero(); self.d.len()];
        for (i, &c) in self.basis.iter().enumerate() {
            vals[c] = self.b[i].clone();
        }
        vals
    }
}

struct StandardForm {
    tableau: Tableau,
    rows: Vec<StdRow>,
    cost: Vec<Rational>,
}

fn nonneg_row_implies(row: &crate::lp::Row, j: usize, bound: &Rational) -> bool {
    row.coeffs.iter().all(|(_, c)| !c.is_negative())
        && row
            .coeffs
            .iter()
            .any(|(i, c)| *i == j && c.is_positive() && row.rhs <= c * bound)
}

/// `z_j ≤ 1` follows from one nonnegative row, or from a row
/// `z_j − Σ a_i z_i ≤ r` chained with a nonnegative row covering the `a_i`.
fn bound_implied(lp: &LinearProgram, rows_with: &[Vec<usize>], j: usize) -> bool {
    let one = one();
    if rows_with[j]
        .iter()
        .any(|&r| nonneg_row_implies(&lp.rows[r], j, &one))
    {
        return true;
    }
    rows_with[j].iter().any(|&h| {
        let head = &lp.rows[h];
        let mut own = None;
        let mut rest = Vec::new();
        for (i, c) in &head.coeffs {
            if *i == j {
                own = Some(c.clone());
            } else if c.is_positive() {
                return false;
            } else {
                rest.push((*i, -c));
            }
        }
        if own.is_none_or(|c| !c.is_one()) || rest.is_empty() {
            return false;
        }
        rows_with[rest[0].0].iter().any(|&t| {
            let tail = &lp.rows[t];
            tail.coeffs.iter().all(|(i, c)| *i != j && !c.is_negative())
                && &head.rhs + &tail.rhs <= one
                && rest
                    .iter()
                    .all(|(i, a)| tail.coeffs.iter().any(|(k, c)| k == i && c >= a))
        })
    })
}

fn standard_form(lp: &LinearProgram) -> StandardForm {
    let n = lp.var_count();
    let mut rows: Vec<StdRow> = (0..lp.row_count()).map(StdRow::Lp).collect();
    let mut rows_with = vec![Vec::new(); n];
    for (r, row) in lp.rows.iter().enumerate() {
        for (i, _) in &row.coeffs {
            rows_with[*i].push(r);
        }
    }
    rows.extend(
        (0..n)
            .filter(|&j| !bound_implied(lp, &rows_with, j))
            .map(StdRow::UpperBound),
    );
    let m = rows.len();
    let width = n + m;
    let mut a = vec![vec![zero(); width]; m];
    let mut b = vec![zero(); m];
    for (i, src) in rows.iter().enumerate() {
        match *src {
            StdRow::Lp(r) => {
                for (j, c) in &lp.rows[r].coeffs {
                    a[i][*j] += c;
                }
                b[i] = lp.rows[r].rhs.clone();
            }
            StdRow::UpperBound(j) => {
                a[i][j] = one();
                b[i] = one();
            }
        }
        a[i][n + i] = one();
    }
    let mut cost = vec![zero(); width];
    for (j, c) in &lp.objective {
        cost[*j] += c;
    }
    let tableau = Tableau {
        a,
        b,
        d: cost.clone(),
        value: zero(),
        basis: (n..n + m).collect(),
        n_vars: n,
        m,
        allowed: vec![true; width],
        pivots: 0,
    };
    StandardForm {
        tableau,
        rows,
        cost,
    }
}

/// Phase 1 with one artificial column; returns false when infeasible.
fn phase_one(t: &mut Tableau, limit: Option<usize>) -> Result<bool, SimplexError> {
    let width = t.d.len();
    for row in t.a.iter_mut() {
        row.push(-one());
    }
    let art = width;
    t.allowed.push(true);
    let saved_d = std::mem::replace(&mut t.d, vec![zero(); width + 1]);
    t.d[art] = -one();
    t.value = zero();
    let r = (0..t.m)
        .min_by(|&i, &k| t.b[i].cmp(&t.b[k]).then(i.cmp(&k)))
        .expect("phase one needs a row");
    t.pivot(r, art);
    t.run(PivotRule::Bland, limit)?;
    if t.value.is_negative() {
        return Ok(false);
    }
    if let Some(r) = t.basis.iter().position(|&c| c == art) {
        if let Some(c) = (0..width).find(|&j| !t.a[r][j].is_zero()) {
            t.pivot(r, c);
        }
    }
    t.allowed[art] = false;
    // Drop the artificial column unless it is stuck in a redundant row.
    if !t.basis.contains(&art) {
        for row in t.a.iter_mut() {
            row.pop();
        }
        t.allowed.pop();
    }
    t.d = saved_d;
    t.d.resize(t.a[0].len(), zero());
    Ok(true)
}

fn price(t: &mut Tableau, cost: &[Rational]) {
    let width = t.a[0].len();
    let mut d: Vec<Rational> = (0..width)
        .map(|j| cost.get(j).cloned().unwrap_or_else(zero))
        .collect();
    let mut value = zero();
    for (i, &c) in t.basis.iter().enumerate() {
        let cb = cost.get(c).cloned().unwrap_or_else(zero);
        if cb.is_zero() {
            continue;
        }
        for (j, dj) in d.iter_mut().enumerate() {
            if !t.a[i][j].is_zero() {
                *dj -= &cb * &t.a[i][j];
            }
        }
        value += &cb * &t.b[i];
    }
    t.d = d;
    t.value = value;
}

fn finish(lp: &LinearProgram, sf: &StandardForm, t: &Tableau, status: Status) -> SimplexResult {
    let n = lp.var_count();
    let basis = t
        .basis
        .iter()
        .map(|&c| {
            if c < n {
                Column::Var(c)
            } else {
                Column::Slack(c - n)
            }
        })
        .collect();
    if status != Status::Optimal {
        return SimplexResult {
            status,
            solution: None,
            values: Vec::new(),
            basis,
            pivot_count: t.pivots,
            rows: sf.rows.clone(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
        };
    }
    let cols = t.column_values();
    let values: Vec<Rational> = cols[..n].to_vec();
    let duals = (0..t.m).map(|i| -t.d[n + i].clone()).collect();
    let reduced_costs = t.d[..n].to_vec();
    SimplexResult {
        status,
        solution: Some(lp.solution_from_values(&values, true)),
        values,
        basis,
        pivot_count: t.pivots,
        rows: sf.rows.clone(),
        duals,
        reduced_costs,
    }
}

fn solve_tableau(
    lp: &LinearProgram,
    opts: SimplexOptions,
) -> Result<(StandardForm, Status), SimplexError> {
    let mut sf = standard_form(lp);
    let t = &mut sf.tableau;
    let mut rule = opts.rule;
    if t.m > 0 && t.b.iter().any(Signed::is_negative) {
        if !phase_one(t, opts.max_pivots)? {
            return Ok((sf, Status::Infeasible));
        }
        price(t, &sf.cost);
        rule = PivotRule::Bland;
    }
    let status = sf.tableau.run(rule, opts.max_pivots)?;
    Ok((sf, status))
}

pub fn solve(lp: &LinearProgram) -> SimplexResult {
    solve_with(lp, SimplexOptions::default()).expect("no pivot limit set")
}

pub fn solve_with(lp: &LinearProgram, opts: SimplexOptions) -> Result<SimplexResult, SimplexError> {
    let (sf, status) = solve_tableau(lp, opts)?;
    let result = finish(lp, &sf, &sf.tableau, status);
    if cfg!(debug_assertions) && status == Status::Optimal {
        if let Err(msg) = verify_certificate(lp, &result) {
            panic!("simplex produced an invalid certificate: {msg}");
        }
    }
    Ok(result)
}

/// Checks primal feasibility, dual feasibility and equal objectives, using
/// only the LP data and the returned values/duals.
pub fn verify_certificate(lp: &LinearProgram, result: &SimplexResult) -> Result<(), String> {
    if result.status != Status::Optimal {
        return Err(format!("status {:?}", result.status));
    }
    let z = &result.values;
    let n = lp.var_count();
    if z.len() != n || result.duals.len() != result.rows.len() {
        return Err("dimension mismatch".into());
    }
    if z.iter().any(|v| v.is_negative() || *v > one()) {
        return Err("value outside [0,1]".into());
    }
    for (r, row) in lp.rows.iter().enumerate() {
        if row.lhs(z) > row.rhs {
            return Err(format!("row {r} violated"));
        }
    }
    let mut dual_obj = zero();
    let mut aty = vec![zero(); n];
    for (y, src) in result.duals.iter().zip(&result.rows) {
        if y.is_negative() {
            return Err("negative dual".into());
        }
        if y.is_zero() {
            continue;
        }
        match *src {
            StdRow::Lp(r) => {
                dual_obj += y * &lp.rows[r].rhs;
                for (j, c) in &lp.rows[r].coeffs {
                    aty[*j] += y * c;
                }
            }
            StdRow::UpperBound(j) => {
                dual_obj += y;
                aty[j] += y;
            }
        }
    }
    let mut cost = vec![zero(); n];
    for (j, c) in &lp.objective {
        cost[*j] += c;
    }
    for j in 0..n {
        if cost[j] > aty[j] {
            return Err(format!("column {j} has positive reduced cost"));
        }
    }
    if dual_obj != lp.objective_value(z) {
        return Err("primal and dual objectives differ".into());
    }
    Ok(())
}

/// Fractional coordinates of a solution, as `(kind, vertex)` pairs.
pub fn fractional_coordinates(sol: &FractionalSolution) -> Vec<(VarKind, usize)> {
    let frac = |v: &Rational| !(v.is_zero() || *v == one());
    sol.x
        .iter()
        .filter(|(_, v)| frac(v))
        .map(|(&u, _)| (VarKind::X, u))
        .chain(
            sol.y
                .iter()
                .filter(|(_, v)| frac(v))
                .map(|(&u, _)| (VarKind::Y, u)),
        )
        .collect()
}

pub fn is_integral(sol: &FractionalSolution) -> bool {
    fractional_coordinates(sol).is_empty()
}

#[derive(Debug, Clone)]
pub struct VertexEnumeration {
    pub vertices: Vec<FractionalSolution>,
    pub cap_exceeded: bool,
    pub bases_visited: usize,
}

/// Distinct optimal basic solutions, found by a depth-first walk over the
/// lexicographically feasible bases of the optimal face.
///
/// Columns with negative reduced cost at the lexicographic optimum are
/// frozen at zero; every remaining feasible point is optimal. The walk is
/// complete unless `cap_exceeded` is set (more than `cap` vertices, or more
/// than `basis_cap` bases).
pub fn enumerate_optimal_vertices(
    lp: &LinearProgram,
    cap: usize,
    basis_cap: usize,
) -> Result<VertexEnumeration, SimplexError> {
    if lp.rows.iter().any(|r| r.rhs.is_negative()) {
        return Err(SimplexError::NegativeRhs);
    }
    let opts = SimplexOptions {
        rule: PivotRule::Lexicographic,
        max_pivots: None,
    };
    let (mut sf, status) = solve_tableau(lp, opts)?;
    if status != Status::Optimal {
        return Err(SimplexError::NotOptimal(status));
    }
    let n = lp.var_count();
    let t = &mut sf.tableau;
    for j in 0..t.d.len() {
        t.allowed[j] = t.d[j].is_zero();
    }

    let key = |t: &Tableau| {
        let mut k = t.basis.clone();
        k.sort_unstable();
        k
    };
    let mut seen_bases: HashSet<Vec<usize>> = HashSet::new();
    let mut seen_points: HashSet<Vec<Rational>> = HashSet::new();
    let mut vertices = Vec::new();
    let mut cap_exceeded = false;

    let mut record = |t: &Tableau, vertices: &mut Vec<FractionalSolution>| -> bool {
        let vals = t.column_values()[..n].to_vec();
        if seen_points.insert(vals.clone()) {
            if vertices.len() == cap {
                return false;
            }
            vertices.push(lp.solution_from_values(&vals, true));
        }
        true
    };

    seen_bases.insert(key(t));
    record(t, &mut vertices);
    // Each frame: next column to try, and the pivot (row, left column) that
    // undoes the move into this basis.
    let mut stack: Vec<(usize, Option<(usize, usize)>)> = vec![(0, None)];
    'walk: while let Some(frame) = stack.last_mut() {
        let width = t.d.len();
        let mut j = frame.0;
        while j < width {
            if t.allowed[j] && !t.basis.contains(&j) {
                if let Some(r) = t.leaving(j, PivotRule::Lexicographic) {
                    frame.0 = j + 1;
                    let left = t.basis[r];
                    t.pivot(r, j);
                    if seen_bases.insert(key(t)) {
                        if seen_bases.len() > basis_cap || !record(t, &mut vertices) {
                            cap_exceeded = true;
                            break 'walk;
                        }
                        stack.push((0, Some((r, left))));
                    } else {
                        t.pivot(r, left);
                    }
                    continue 'walk;
                }
            }
            j += 1;
        }
        let (_, undo) = stack.pop().unwrap();
        if let Some((r, left)) = undo {
            t.pivot(r, left);
        }
    }
    Ok(VertexEnumeration {
        vertices,
        cap_exceeded,
        bases_visited: seen_bases.len(),
    })
}
