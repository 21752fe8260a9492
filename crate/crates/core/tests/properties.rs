use firefighter::exact::{exhaustive_optimum, optimal_strategy, risky_count, SearchOptions};
use firefighter::generators::{good_gadget, GadgetSpec};
use firefighter::lp::{
    build_lp1, build_lp_hartke, check_feasibility, y_from_x, LinearProgram, LpVariant, Row,
    RowKind, Var, VarKind,
};
use firefighter::rational::{int, one, ratio, zero};
use firefighter::rounding::{exact_save_prob, independent_unsaved_bound, monte_carlo, Algorithm};
use firefighter::simplex::{solve, Status};
use firefighter::{simulate, Instance, Rational, Strategy as Plan, VertexId};
use num::{Signed, Zero};
use proptest::prelude::*;
use std::collections::{BTreeMap, BTreeSet};

fn tree(max_n: usize) -> impl Strategy<Value = Vec<usize>> {
    (2..=max_n).prop_flat_map(|n| (1..n).map(|i| 0..i).collect::<Vec<_>>())
}

fn instance(parents: &[usize], terminals: &[VertexId], budget: usize) -> Instance {
    let edges: Vec<(VertexId, VertexId)> = parents
        .iter()
        .enumerate()
        .map(|(i, &p)| (i + 1, p))
        .collect();
    Instance::build(&edges, 0, terminals, budget).unwrap()
}

/// Keeps at most `b` of the chosen vertices per layer.
fn layered(inst: &Instance, chosen: &[bool]) -> Plan {
    let mut s = Plan::new();
    for t in 1..=inst.height() {
        for &v in inst
            .layer(t)
            .iter()
            .filter(|&&v| chosen[v])
            .take(inst.budget())
        {
            s.pick(t, v);
        }
    }
    s
}

fn path_scan_saved(inst: &Instance, picks: &BTreeSet<VertexId>, v: VertexId) -> bool {
    let mut u = Some(v);
    while let Some(w) = u {
        if picks.contains(&w) {
            return true;
        }
        u = inst.parent(w);
    }
    false
}

/// Quarter-valued x with every layer sum at most `b`.
fn layer_feasible_x(inst: &Instance, quarters: &[u8]) -> BTreeMap<VertexId, Rational> {
    let mut x = BTreeMap::new();
    for t in 1..=inst.height() {
        let mut left = 4 * inst.budget() as i64;
        for &v in inst.layer(t) {
            let q = (quarters[v] as i64 % 5).min(left);
            left -= q;
            x.insert(v, ratio(q, 4));
        }
    }
    x
}

/// Brute-force LP optimum over every basis of `max c·z, Az ≤ b, 0 ≤ z ≤ 1`.
fn vertex_max(n: usize, c: &[Rational], rows: &[(Vec<Rational>, Rational)]) -> Rational {
    let mut cons: Vec<(Vec<Rational>, Rational)> = rows.to_vec();
    for i in 0..n {
        let mut e = vec![zero(); n];
        e[i] = one();
        cons.push((e.clone(), one()));
        e[i] = -one();
        cons.push((e, zero()));
    }
    let feasible = |z: &[Rational]| {
        cons.iter().all(|(a, b)| {
            let lhs: Rational = a.iter().zip(z).map(|(ai, zi)| ai * zi).sum();
            lhs <= *b
        })
    };
    let mut best: Option<Rational> = None;
    let m = cons.len();
    let mut pick = vec![0usize; n];
    fn next(pick: &mut [usize], m: usize) -> bool {
        let n = pick.len();
        for i in (0..n).rev() {
            if pick[i] < m - n + i {
                pick[i] += 1;
                for j in i + 1..n {
                    pick[j] = pick[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    for (i, p) in pick.iter_mut().enumerate() {
        *p = i;
    }
    loop {
        let mut a: Vec<Vec<Rational>> = pick
            .iter()
            .map(|&r| {
                let mut row = cons[r].0.clone();
                row.push(cons[r].1.clone());
                row
            })
            .collect();
        if let Some(z) = gauss(&mut a, n) {
            if feasible(&z) {
                let v: Rational = c.iter().zip(&z).map(|(ci, zi)| ci * zi).sum();
                if best.as_ref().is_none_or(|b| v > *b) {
                    best = Some(v);
                }
            }
        }
        if !next(&mut pick, m) {
            break;
        }
    }
    best.unwrap()
}

fn gauss(a: &mut [Vec<Rational>], n: usize) -> Option<Vec<Rational>> {
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        let inv = one() / &a[col][col];
        for j in col..=n {
            a[col][j] = &a[col][j] * &inv;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in col..=n {
                    let d = &f * &a[col][j];
                    a[r][j] -= d;
                }
            }
        }
    }
    Some(a.iter().map(|row| row[n].clone()).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simulate_matches_path_scan(
        parents in tree(30),
        coins in prop::collection::vec(any::<bool>(), 30),
        budget in 1usize..3,
    ) {
        let inst = instance(&parents, &[], budget);
        let s = layered(&inst, &coins);
        let picks: BTreeSet<VertexId> = s.vertices().collect();
        let saved = simulate(&inst, &s).unwrap();
        for v in 0..inst.vertex_count() {
            prop_assert_eq!(saved.is_saved(v), path_scan_saved(&inst, &picks, v), "vertex {}", v);
        }
    }

    #[test]
    fn extra_picks_never_unsave(
        parents in tree(30),
        coins in prop::collection::vec(any::<bool>(), 30),
        drop in prop::collection::vec(any::<bool>(), 30),
    ) {
        let inst = instance(&parents, &[], 2);
        let big = layered(&inst, &coins);
        let mut small = Plan::new();
        for v in big.vertices().filter(|&v| !drop[v]) {
            small.pick(inst.depth(v), v);
        }
        let a = simulate(&inst, &small).unwrap();
        let b = simulate(&inst, &big).unwrap();
        for v in 0..inst.vertex_count() {
            prop_assert!(!a.is_saved(v) || b.is_saved(v), "vertex {}", v);
        }
        prop_assert!(a.saved_count() <= b.saved_count());
    }

    #[test]
    fn search_matches_exhaustive(
        parents in tree(12),
        tmask in prop::collection::vec(any::<bool>(), 12),
        budget in 1usize..3,
        forbid in 0usize..4,
    ) {
        let n = parents.len() + 1;
        let terminals: Vec<VertexId> = (1..n).filter(|&v| tmask[v]).collect();
        let inst = instance(&parents, &terminals, budget);
        let opts = SearchOptions::default().forbid_layers([forbid]);
        let res = optimal_strategy(&inst, &opts);
        let (brute, _) = exhaustive_optimum(&inst, &opts);
        prop_assert!(res.proven_optimal);
        prop_assert_eq!(res.value, brute);
        prop_assert_eq!(simulate(&inst, &res.strategy).unwrap().saved_terminal_count, res.value);
        prop_assert!(res.strategy.at(forbid).next().is_none());
    }

    #[test]
    fn hartke_feasible_is_lp1_feasible(
        parents in tree(14),
        quarters in prop::collection::vec(0u8..5, 14),
    ) {
        let inst = instance(&parents, &[], 1);
        let x = layer_feasible_x(&inst, &quarters);
        let point = y_from_x(&inst, &x);
        let lph = build_lp_hartke(&inst).unwrap();
        let lp1 = build_lp1(&inst);
        if check_feasibility(&lph, &point.project(&lph)).unwrap().is_empty() {
            prop_assert!(check_feasibility(&lp1, &point.project(&lp1)).unwrap().is_empty());
        }
        let opth = solve(&lph).solution.unwrap();
        prop_assert!(check_feasibility(&lp1, &opth.project(&lp1)).unwrap().is_empty());
        let opt1 = solve(&lp1).solution.unwrap().objective_value;
        prop_assert!(opth.objective_value <= opt1);
    }

    #[test]
    fn y_from_x_dominates_lp1_optimum(parents in tree(16), budget in 1usize..3) {
        let inst = instance(&parents, &[], budget);
        let lp = build_lp1(&inst);
        let res = solve(&lp);
        prop_assert_eq!(res.status, Status::Optimal);
        let sol = res.solution.unwrap();
        let best = y_from_x(&inst, &sol.x);
        prop_assert!(check_feasibility(&lp, &best.project(&lp)).unwrap().is_empty());
        for (v, y) in &sol.y {
            prop_assert!(*y <= best.y[v]);
        }
        prop_assert_eq!(best.project(&lp).objective_value, sol.objective_value);
    }

    #[test]
    fn simplex_matches_vertex_enumeration(
        n in 1usize..4,
        c in prop::collection::vec(-3i64..5, 3),
        a in prop::collection::vec(prop::collection::vec(-2i64..4, 3), 0..4),
        b in prop::collection::vec(0i64..5, 4),
    ) {
        let c: Vec<Rational> = c[..n].iter().map(|&v| int(v)).collect();
        let dense: Vec<(Vec<Rational>, Rational)> = a
            .iter()
            .zip(&b)
            .map(|(row, &r)| (row[..n].iter().map(|&v| int(v)).collect(), ratio(r, 2)))
            .collect();
        let variables = (0..n).map(|v| Var { kind: VarKind::X, vertex: v + 1 }).collect();
        let sparse = |coeffs: &[Rational]| -> Vec<(usize, Rational)> {
            coeffs.iter().cloned().enumerate().filter(|(_, v)| !v.is_zero()).collect()
        };
        let rows = dense
            .iter()
            .map(|(coeffs, rhs)| Row { coeffs: sparse(coeffs), rhs: rhs.clone(), kind: RowKind::Other })
            .collect();
        let lp = LinearProgram::new(LpVariant::Imported, variables, sparse(&c), rows);
        let res = solve(&lp);
        prop_assert_eq!(res.status, Status::Optimal);
        prop_assert_eq!(res.solution.unwrap().objective_value, vertex_max(n, &c, &dense));
    }

    #[test]
    fn risky_count_shrinks_with_picks(
        picks in prop::collection::vec(any::<bool>(), 64),
        extra in prop::collection::vec(any::<bool>(), 64),
        burning in prop::collection::vec(any::<bool>(), 2),
    ) {
        let g = good_gadget(&GadgetSpec::new(2, 2, 4).unwrap()).unwrap();
        let n = g.instance.vertex_count();
        let burning: Vec<usize> = (0..2).filter(|&i| burning[i]).collect();
        let pick = |mask: &dyn Fn(usize) -> bool| -> BTreeSet<VertexId> {
            (1..n).filter(|&v| mask(v % 64)).collect()
        };
        let small = pick(&|i| picks[i]);
        let big = pick(&|i| picks[i] || extra[i]);
        prop_assert!(risky_count(&g, &burning, &big) <= risky_count(&g, &burning, &small));
        prop_assert!(risky_count(&g, &burning, &BTreeSet::new()) >= risky_count(&g, &burning, &small));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn independent_rounding_is_exact_product(
        parents in tree(12),
        quarters in prop::collection::vec(0u8..5, 12),
    ) {
        let inst = instance(&parents, &[], 1);
        let x = layer_feasible_x(&inst, &quarters);
        let exact = exact_save_prob(&inst, &x, &Algorithm::Independent, 1 << 16).unwrap();
        prop_assert_eq!(&exact.total_weight, &one());
        let unsaved = independent_unsaved_bound(&inst, &x).unwrap();
        for v in 1..inst.vertex_count() {
            prop_assert_eq!(&exact.saved[v], &(one() - &unsaved[v]), "vertex {}", v);
        }
    }

    #[test]
    fn monte_carlo_tracks_exact(
        parents in tree(10),
        quarters in prop::collection::vec(0u8..5, 10),
        seed in any::<u64>(),
    ) {
        let inst = instance(&parents, &[], 1);
        let x = layer_feasible_x(&inst, &quarters);
        let exact = exact_save_prob(&inst, &x, &Algorithm::Independent, 1 << 16).unwrap();
        let mc = monte_carlo(&inst, &x, &Algorithm::Independent, 4000, seed).unwrap();
        for v in 1..inst.vertex_count() {
            let p = firefighter::rational::to_f64(&exact.saved[v]);
            let se = (p * (1.0 - p) / 4000.0).sqrt();
            prop_assert!((mc.p[v] - p).abs() <= 6.0 * se + 1e-9, "vertex {}: mc {} exact {}", v, mc.p[v], p);
        }
        let again = monte_carlo(&inst, &x, &Algorithm::Independent, 4000, seed).unwrap();
        prop_assert_eq!(mc.saved_counts, again.saved_counts);
        prop_assert!(exact.saved.iter().all(|p| !p.is_negative() && *p <= one()));
    }
}
