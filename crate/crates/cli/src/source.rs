//! Named fixtures, instance files and fractional solutions.

use crate::output::Failure;
use firefighter::exact::build_lp;
use firefighter::generators::{
    basic_gadget, fig4_fixture, gap_fixture, half_on_specials, one_and_one_family, path3,
    truncated_hartke_fixture, two_heavy_family,
};
use firefighter::lp::LpVariant;
use firefighter::rational;
use firefighter::simplex::{solve, Status};
use firefighter::{Instance, Rational, VertexId};
use std::collections::BTreeMap;

pub type XMap = BTreeMap<VertexId, Rational>;

pub struct Loaded {
    pub name: String,
    pub instance: Instance,
    /// The fixture's own fractional solution, if it ships one.
    pub x: Option<XMap>,
}

pub const FIXTURES: &str =
    "fig4, path3, basic-gadget, gap-fixture, one-and-one:<d>, two-heavy:<d>, hartke-trunc:<layer>";

fn param(spec: &str, prefix: &str) -> Option<Result<usize, Failure>> {
    spec.strip_prefix(prefix).map(|p| {
        p.parse()
            .map_err(|_| Failure::input(format!("bad parameter in {spec:?}")))
    })
}

/// A named fixture or a path to an instance JSON file.
pub fn load(spec: &str) -> Result<Loaded, Failure> {
    let fixture = |instance: Instance, x: Option<XMap>| Loaded {
        name: spec.to_string(),
        instance,
        x,
    };
    Ok(match spec {
        "fig4" | "fig4-fixture" => {
            let (inst, x) = fig4_fixture();
            fixture(inst, Some(x))
        }
        "path3" => fixture(path3(), None),
        "basic-gadget" => {
            let inst = basic_gadget();
            let x = half_on_specials(&inst);
            fixture(inst, Some(x))
        }
        "gap-fixture" => {
            let g = gap_fixture();
            let x = g.hartke_scaled_solution();
            fixture(g.instance, Some(x))
        }
        _ => {
            if let Some(d) = param(spec, "one-and-one:") {
                let (inst, x, _, _) = one_and_one_family(d?)?;
                return Ok(fixture(inst, Some(x)));
            }
            if let Some(d) = param(spec, "two-heavy:") {
                let (inst, x, _, _) = two_heavy_family(d?)?;
                return Ok(fixture(inst, Some(x)));
            }
            if let Some(l) = param(spec, "hartke-trunc:") {
                let (inst, x) = truncated_hartke_fixture(l?)?;
                return Ok(fixture(inst, Some(x)));
            }
            let text = std::fs::read_to_string(spec).map_err(|e| {
                Failure::input(format!("{spec}: {e} (not a file; fixtures are {FIXTURES})"))
            })?;
            fixture(Instance::from_json(&text)?, None)
        }
    })
}

/// `fixture`, `half` (1/2 on specials), `lp1`/`lp2`/`hartke` (an optimal
/// basic solution), or a JSON file mapping vertex ids to rationals.
pub fn load_x(spec: &str, loaded: &Loaded) -> Result<XMap, Failure> {
    let inst = &loaded.instance;
    let variant = match spec {
        "fixture" => {
            return loaded
                .x
                .clone()
                .ok_or_else(|| Failure::input(format!("{} ships no x; pass --x", loaded.name)))
        }
        "half" => return Ok(half_on_specials(inst)),
        "lp1" => LpVariant::Lp1,
        "lp2" => LpVariant::Lp2,
        "hartke" => LpVariant::Hartke,
        path => return read_x(path),
    };
    let lp = build_lp(inst, variant)?;
    let res = solve(&lp);
    if res.status != Status::Optimal {
        return Err(Failure::input(format!("LP ended {:?}", res.status)));
    }
    let sol = res.solution.expect("optimal");
    Ok(sol
        .x
        .into_iter()
        .filter(|(_, v)| *v > rational::zero())
        .collect())
}

fn read_x(path: &str) -> Result<XMap, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{path}: {e}")))?;
    let raw: BTreeMap<String, serde_json::Value> = serde_json::from_str(&text)?;
    raw.into_iter()
        .map(|(k, v)| {
            let vertex: VertexId = k
                .parse()
                .map_err(|_| Failure::input(format!("{path}: bad vertex id {k:?}")))?;
            let value = match &v {
                serde_json::Value::String(s) => rational::parse(s)?,
                serde_json::Value::Number(n) => rational::parse(&n.to_string())?,
                _ => return Err(Failure::input(format!("{path}: bad value for {k}"))),
            };
            Ok((vertex, value))
        })
        .collect()
}
