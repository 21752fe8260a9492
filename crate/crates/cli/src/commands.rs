use crate::output::{Exit, Failure, Report};
use crate::source::{self, XMap};
use crate::{
    AlgoArg, CertifyFamily, Family, FanoutArg, GadgetParams, GapArgs, GapFanoutArg, GapParams,
    LpArg, RoundArgs, SolveArgs,
};
use firefighter::exact::{
    build_lp, exhaustive_optimum, measure_gap, optimal_strategy, risky_min, GapMethod,
    SearchOptions,
};
use firefighter::generators::{
    basic_gadget, check_gadget, fig4_fixture, finbow_random, gap_instance, good_gadget,
    half_on_specials, hartke_gap_instance, terminal_to_plain, GadgetSpec, GapFanout, GenError,
    StageTwoFanout,
};
use firefighter::lp::{
    self, build_lp2, build_lp_hartke, check_feasibility, check_hartke_implicit, y_from_x, LpVariant,
};
use firefighter::rational::{self, int, one, ratio, zero};
use firefighter::rounding::{
    exact_save_prob, min_ratio_to_y, monte_carlo, Algorithm, RoundingError, SaveProbabilities, Z99,
};
use firefighter::simplex::{
    self, enumerate_optimal_vertices, fractional_coordinates, is_integral, verify_certificate,
    Status,
};
use firefighter::{Instance, Rational, VertexId};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::Duration;

fn fmt(r: &Rational) -> String {
    rational::format(r)
}

fn rational_map<'a>(entries: impl IntoIterator<Item = (&'a VertexId, &'a Rational)>) -> Value {
    let m: BTreeMap<String, String> = entries
        .into_iter()
        .filter(|(_, v)| **v != zero())
        .map(|(k, v)| (k.to_string(), fmt(v)))
        .collect();
    json!(m)
}

fn gen_err(e: GenError) -> Failure {
    match e {
        GenError::SizeCapExceeded { .. } => Failure::resource(e.to_string()),
        GenError::Invariant(_) => Failure {
            exit: Exit::Certification,
            message: e.to_string(),
        },
        _ => Failure::input(e.to_string()),
    }
}

fn instance_inputs(name: &str, inst: &Instance) -> Value {
    json!({ "instance": name, "checksum": inst.checksum() })
}

fn variant(lp: LpArg) -> LpVariant {
    match lp {
        LpArg::Lp1 => LpVariant::Lp1,
        LpArg::Lp2 => LpVariant::Lp2,
        LpArg::Hartke => LpVariant::Hartke,
    }
}

fn gadget_spec(p: &GadgetParams) -> Result<GadgetSpec, Failure> {
    let spec = match (&p.delta, p.d) {
        (Some(delta), _) => GadgetSpec::from_delta(p.m, p.k, &rational::parse(delta)?),
        (None, Some(d)) => GadgetSpec::new(p.m, p.k, d),
        (None, None) => return Err(Failure::input("need --D or --delta")),
    }
    .map_err(gen_err)?;
    let fanout = match p.fanout {
        FanoutArg::Full => StageTwoFanout::Full,
        FanoutArg::Compact => StageTwoFanout::Compact,
    };
    Ok(spec.with_fanout(fanout).with_size_cap(p.size_cap as u128))
}

fn gap_fanout(f: GapFanoutArg) -> GapFanout {
    match f {
        GapFanoutArg::Full => GapFanout::Full,
        GapFanoutArg::Compact => GapFanout::Compact,
        GapFanoutArg::Tapered => GapFanout::Tapered,
    }
}

fn build_gap(p: &GapParams) -> Result<firefighter::generators::GapInstance, Failure> {
    gap_instance(p.k, p.d, p.phases, gap_fanout(p.fanout), p.size_cap as u128).map_err(gen_err)
}

/// Instance JSON plus a one-line size summary.
pub fn generate(family: &Family) -> Result<(String, String), Failure> {
    let inst = match family {
        Family::GoodGadget(p) => good_gadget(&gadget_spec(p)?).map_err(gen_err)?.instance,
        Family::GapInstance(p) => build_gap(p)?.instance,
        Family::BasicGadget => basic_gadget(),
        Family::HartkeGap { alpha, size_cap } => {
            hartke_gap_instance(*alpha, *size_cap as u128)
                .map_err(gen_err)?
                .instance
        }
        Family::FinbowRandom { n, seed } => finbow_random(*n, *seed).map_err(gen_err)?,
        Family::TerminalToPlain {
            input,
            epsilon,
            size_cap,
        } => {
            let loaded = source::load(input)?;
            terminal_to_plain(
                &loaded.instance,
                &rational::parse(epsilon)?,
                *size_cap as u128,
            )
            .map_err(gen_err)?
        }
        Family::Fig4Fixture => fig4_fixture().0,
    };
    let summary = format!(
        "vertices={} layers={} terminals={} specials={} checksum={}",
        inst.vertex_count(),
        inst.height(),
        inst.terminal_count(),
        inst.specials().len(),
        inst.checksum()
    );
    Ok((inst.to_json(), summary))
}

pub fn solve(a: &SolveArgs) -> Result<Report, Failure> {
    let loaded = source::load(&a.instance)?;
    let inst = &loaded.instance;
    let v = variant(a.lp);
    let lp = build_lp(inst, v)?;
    if let Some(path) = &a.export_lp {
        std::fs::write(path, lp.to_text())
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    }
    let res = simplex::solve(&lp);
    let mut result = json!({
        "lp": { "variant": v, "variables": lp.var_count(), "rows": lp.row_count() },
        "status": format!("{:?}", res.status).to_lowercase(),
        "pivot_count": res.pivot_count,
    });
    let mut exit = Exit::Ok;
    if res.status == Status::Optimal {
        let sol = res.solution.as_ref().expect("optimal");
        let fractional: Vec<String> = fractional_coordinates(sol)
            .into_iter()
            .map(|(kind, vertex)| {
                format!("{}{vertex}", if kind == lp::VarKind::X { "x" } else { "y" })
            })
            .collect();
        result["objective"] = json!(fmt(&sol.objective_value));
        result["x"] = rational_map(&sol.x);
        result["y"] = rational_map(&sol.y);
        result["integral"] = json!(is_integral(sol));
        result["fractional"] = json!(fractional);
        result["certificate"] = match verify_certificate(&lp, &res) {
            Ok(()) => json!("verified"),
            Err(e) => json!(e),
        };
        if let Some(cap) = a.enumerate_vertices {
            let e = enumerate_optimal_vertices(&lp, cap, a.basis_cap)?;
            let vertices: Vec<Value> = e
                .vertices
                .iter()
                .map(|s| {
                    json!({
                        "objective": fmt(&s.objective_value),
                        "integral": is_integral(s),
                        "x": rational_map(&s.x),
                    })
                })
                .collect();
            result["enumeration"] = json!({
                "found": vertices.len(),
                "non_integral": e.vertices.iter().filter(|s| !is_integral(s)).count(),
                "complete": !e.cap_exceeded,
                "bases_visited": e.bases_visited,
                "vertices": vertices,
            });
            if e.cap_exceeded {
                exit = Exit::Resource;
            }
        }
    }
    Ok(Report {
        inputs: instance_inputs(&loaded.name, inst),
        result,
        exit,
    })
}

fn rounding_err(e: RoundingError) -> Failure {
    match e {
        RoundingError::BranchCapExceeded(_) => Failure::resource(e.to_string()),
        _ => Failure::input(e.to_string()),
    }
}

fn estimate(
    inst: &Instance,
    x: &XMap,
    algo: &Algorithm,
    a: &RoundArgs,
) -> Result<SaveProbabilities, Failure> {
    Ok(if a.exact {
        SaveProbabilities::Exact(
            exact_save_prob(inst, x, algo, a.branch_cap).map_err(rounding_err)?,
        )
    } else {
        SaveProbabilities::MonteCarlo(
            monte_carlo(inst, x, algo, a.trials, a.seed).map_err(rounding_err)?,
        )
    })
}

fn terminal_summary(inst: &Instance, p: &SaveProbabilities) -> Value {
    match p {
        SaveProbabilities::Exact(e) => {
            let mean = e.terminal_mean(inst);
            json!({ "mean": rational::to_f64(&mean), "mean_exact": fmt(&mean) })
        }
        SaveProbabilities::MonteCarlo(m) => {
            let (lo, hi) = m.terminal_ci(Z99);
            json!({ "mean": m.terminal_mean, "stderr": m.terminal_stderr, "ci99": [lo, hi] })
        }
    }
}

pub fn round(a: &RoundArgs) -> Result<Report, Failure> {
    let loaded = source::load(&a.instance)?;
    let inst = &loaded.instance;
    let x = source::load_x(&a.x, &loaded)?;
    let eta = rational::parse(&a.eta)?;
    let algo = match a.algo {
        AlgoArg::Independent => Algorithm::Independent,
        AlgoArg::Half => Algorithm::HalfIntegral,
        AlgoArg::Twophase => Algorithm::TwoPhase { eta: eta.clone() },
    };
    let probs = estimate(inst, &x, &algo, a)?;
    let y = y_from_x(inst, &x);
    let y_of = |v: VertexId| if v == inst.root() { zero() } else { y.y_of(v) };

    if let Some(path) = &a.csv {
        let mut csv = String::from("vertex,y,p_saved,stderr,ratio\n");
        for v in 0..inst.vertex_count() {
            let yv = rational::to_f64(&y_of(v));
            let p = probs.p_f64(v);
            let ratio = if yv > 0.0 {
                format!("{:.12}", p / yv)
            } else {
                String::new()
            };
            writeln!(csv, "{v},{yv:.12},{p:.12},{:.12},{ratio}", probs.stderr(v))
                .expect("string write");
        }
        std::fs::write(path, csv)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    }

    let min_ratio = match &probs {
        SaveProbabilities::Exact(e) => match min_ratio_to_y(inst, &x, &e.saved)
            .map_err(rounding_err)?
        {
            Some((v, r)) => json!({ "vertex": v, "value": rational::to_f64(&r), "exact": fmt(&r) }),
            None => Value::Null,
        },
        SaveProbabilities::MonteCarlo(m) => {
            let mut best: Option<(VertexId, f64)> = None;
            for (&v, xv) in &x {
                if *xv > zero() {
                    let r = m.p[v] / rational::to_f64(&y_of(v));
                    if best.is_none_or(|(_, b)| r < b) {
                        best = Some((v, r));
                    }
                }
            }
            best.map_or(Value::Null, |(v, r)| json!({ "vertex": v, "value": r }))
        }
    };
    let mut result = json!({
        "algorithm": algo.name(),
        "method": probs.method(),
        "count": probs.count(),
        "seed": a.seed,
        "terminals": terminal_summary(inst, &probs),
        "min_ratio": min_ratio,
    });
    if let Algorithm::TwoPhase { eta } = &algo {
        result["eta"] = json!(fmt(eta));
    }
    if a.baseline {
        let base = estimate(inst, &x, &Algorithm::Independent, a)?;
        result["baseline"] =
            json!({ "algorithm": "independent", "terminals": terminal_summary(inst, &base) });
        if let (SaveProbabilities::MonteCarlo(m), SaveProbabilities::MonteCarlo(b)) =
            (&probs, &base)
        {
            let (lo, hi) = m.terminal_ci(Z99);
            let (blo, bhi) = b.terminal_ci(Z99);
            result["ci99_disjoint"] = json!(lo > bhi || hi < blo);
            result["improves_on_baseline"] = json!(lo > bhi);
        }
    }
    let mut inputs = instance_inputs(&loaded.name, inst);
    inputs["x_source"] = json!(a.x);
    inputs["x"] = rational_map(&x);
    Ok(Report::ok(inputs, result))
}

pub fn gap(a: &GapArgs) -> Result<Report, Failure> {
    let loaded = source::load(&a.instance)?;
    let inst = &loaded.instance;
    let opts = SearchOptions {
        node_cap: a.node_cap,
        time_limit: a.time_limit.map(Duration::from_secs_f64),
        ..SearchOptions::default()
    }
    .forbid_layers(a.forbid_layers.iter().copied())
    .forbid_vertices(a.forbid_vertices.iter().copied());
    let report = measure_gap(inst, &loaded.name, variant(a.lp), &opts)?;
    let exit = if report.method == GapMethod::UpperBoundOnly {
        Exit::Resource
    } else {
        Exit::Ok
    };
    Ok(Report {
        inputs: instance_inputs(&loaded.name, inst),
        result: serde_json::to_value(&report)?,
        exit,
    })
}

fn check(name: &str, pass: bool, detail: Value) -> Value {
    json!({ "check": name, "pass": pass, "detail": detail })
}

/// LP-2 feasibility of `x` with its implied `y`, and how many terminals keep `y < 1`.
fn lp2_check(inst: &Instance, x: &XMap) -> Result<(bool, usize), Failure> {
    let lp = build_lp2(inst)?;
    let sol = y_from_x(inst, x).project(&lp);
    let feasible = check_feasibility(&lp, &sol)?.is_empty();
    let short = inst
        .terminals()
        .into_iter()
        .filter(|&t| sol.y_of(t) != one())
        .count();
    Ok((feasible, short))
}

fn hartke_check(inst: &Instance, x: &XMap) -> usize {
    let dense = y_from_x(inst, x).x_dense(inst.vertex_count());
    check_hartke_implicit(inst, &dense).len()
}

fn specials_layout(inst: &Instance) -> (usize, (usize, usize)) {
    let specials: BTreeSet<VertexId> = inst.specials().into_iter().collect();
    let mut per_layer = BTreeMap::<usize, usize>::new();
    for &s in &specials {
        *per_layer.entry(inst.depth(s)).or_default() += 1;
    }
    let counts: Vec<usize> = inst
        .leaves()
        .into_iter()
        .map(|l| {
            inst.pickable_path(l)
                .into_iter()
                .filter(|v| specials.contains(v))
                .count()
        })
        .collect();
    let min = counts.iter().copied().min().unwrap_or(0);
    let max = counts.iter().copied().max().unwrap_or(0);
    (per_layer.values().copied().max().unwrap_or(0), (min, max))
}

pub fn certify(family: &CertifyFamily) -> Result<Report, Failure> {
    let mut checks = Vec::new();
    let mut extra = json!({});
    let mut exit = Exit::Ok;
    let inputs;
    match family {
        CertifyFamily::GoodGadget { params, node_cap } => {
            let spec = gadget_spec(params)?;
            let g = good_gadget(&spec).map_err(gen_err)?;
            inputs = instance_inputs("good-gadget", &g.instance);
            let c = check_gadget(&g);
            checks.push(check(
                "uniform_leaf_depth",
                c.uniform_depth,
                json!(g.leaf_layer),
            ));
            checks.push(check(
                "specials_per_layer_at_most_k",
                c.max_specials_per_layer <= spec.k,
                json!(c.max_specials_per_layer),
            ));
            checks.push(check(
                "every_path_meets_a_special",
                c.every_path_hits_special,
                Value::Null,
            ));
            let report = risky_min(&g, *node_cap)?;
            let bound = one() - ratio(1, spec.k as i64) - ratio(4, spec.d as i64);
            let vacuous = bound <= zero();
            checks.push(check(
                "risky_min_at_least_bound",
                vacuous || report.min_fraction >= bound,
                json!({
                    "risky_min": fmt(&report.min_fraction),
                    "bound": fmt(&bound),
                    "vacuous": vacuous,
                }),
            ));
            if !report.complete {
                exit = Exit::Resource;
            }
            extra = json!({ "risky": report });
        }
        CertifyFamily::GapInstance { params, opt } => {
            let g = build_gap(params)?;
            let inst = &g.instance;
            inputs = instance_inputs("gap-instance", inst);
            for p in &g.phases {
                let q = p.phase;
                checks.push(check(
                    &format!("phase_{q}_invariants"),
                    p.specials_per_path == (q, q) && p.max_specials_per_layer <= g.k,
                    serde_json::to_value(p)?,
                ));
            }
            let (feasible, short) = lp2_check(inst, &g.uniform_solution())?;
            checks.push(check(
                "uniform_x_lp2_feasible_saves_all",
                feasible && short == 0,
                json!({ "feasible": feasible, "terminals_below_one": short }),
            ));
            let violations = hartke_check(inst, &g.hartke_scaled_solution());
            checks.push(check(
                "scaled_x_meets_hartke_rows",
                violations == 0,
                json!(violations),
            ));
            if *opt {
                let res = optimal_strategy(inst, &SearchOptions::default());
                let terms = inst.terminal_count();
                checks.push(check(
                    "opt_below_terminal_count",
                    res.value < terms,
                    json!({
                        "opt": res.value,
                        "terminals": terms,
                        "gap": fmt(&(int(res.value as i64) / int(terms.max(1) as i64))),
                        "proven_optimal": res.proven_optimal,
                    }),
                ));
                if !res.proven_optimal {
                    exit = Exit::Resource;
                }
            }
        }
        CertifyFamily::HartkeGap { alpha, size_cap } => {
            let h = hartke_gap_instance(*alpha, *size_cap as u128).map_err(gen_err)?;
            let inst = &h.instance;
            inputs = instance_inputs("hartke-gap", inst);
            let a5 = alpha.pow(5);
            checks.push(check(
                "terminal_count",
                inst.terminal_count() == 6 * a5,
                json!({ "found": inst.terminal_count(), "expected": 6 * a5 }),
            ));
            let counts = inst.subtree_terminal_counts();
            let first = counts[h.a[0]] + counts[h.b[0]];
            let second = counts[h.a[1]] + counts[h.b[1]];
            checks.push(check(
                "terminal_split",
                first == 3 * a5 && second == 3 * a5,
                json!([first, second]),
            ));
            let (per_layer, (lo, hi)) = specials_layout(inst);
            checks.push(check(
                "two_specials_per_path",
                lo == 2 && hi == 2,
                json!([lo, hi]),
            ));
            checks.push(check(
                "specials_per_layer_at_most_2",
                per_layer <= 2,
                json!(per_layer),
            ));
            let x = h.half_solution();
            let (feasible, short) = lp2_check(inst, &x)?;
            let violations = hartke_check(inst, &x);
            checks.push(check(
                "half_x_lpprime_feasible_saves_all",
                feasible && short == 0 && violations == 0,
                json!({ "lp2_feasible": feasible, "hartke_violations": violations, "terminals_below_one": short }),
            ));
        }
        CertifyFamily::BasicGadget => {
            let inst = basic_gadget();
            inputs = instance_inputs("basic-gadget", &inst);
            let (best, _) = exhaustive_optimum(&inst, &SearchOptions::default().forbid_layers([1]));
            checks.push(check(
                "layer_one_forbidden_saves_two_of_three",
                best == 2 && inst.terminal_count() == 3,
                json!(best),
            ));
            let x = half_on_specials(&inst);
            let lp = build_lp_hartke(&inst)?;
            let sol = y_from_x(&inst, &x).project(&lp);
            let violations = check_feasibility(&lp, &sol)?.len();
            let short = inst
                .terminals()
                .into_iter()
                .filter(|&t| sol.y_of(t) != one())
                .count();
            checks.push(check(
                "half_x_lpprime_feasible_saves_all",
                violations == 0 && short == 0,
                json!({ "violations": violations, "terminals_below_one": short }),
            ));
        }
    }
    let pass = checks.iter().all(|c| c["pass"] == json!(true));
    if !pass {
        exit = Exit::Certification;
    }
    let mut result = json!({ "pass": pass, "checks": checks });
    if let Value::Object(m) = extra {
        for (k, v) in m {
            result[k] = v;
        }
    }
    Ok(Report {
        inputs,
        result,
        exit,
    })
}
