//! Instance families: spiders, good gadgets, the k-phase gap instance, the
//! small half-integral gadget and the alpha-parameterized instance built
//! from it, the terminal-to-plain reduction, random Finbow trees, and a few
//! hand fixtures.
//!
//! Special vertices carry a label starting with `special:`.

use crate::rational::{int, one, ratio, zero, Rational};
use crate::tree::{Instance, TreeError, VertexId};
use num::{Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("construction needs about {estimate} vertices, above the cap of {cap}")]
    SizeCapExceeded { estimate: u128, cap: u128 },
    #[error("bad spider: {0}")]
    BadSpiderSpec(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Default vertex cap for generated instances.
pub const DEFAULT_SIZE_CAP: u128 = 2_000_000;

pub fn is_special_label(label: &str) -> bool {
    label.starts_with("special")
}

/// Incremental tree construction with the root at id 0.
#[derive(Debug, Clone)]
pub struct Builder {
    parent: Vec<Option<VertexId>>,
    depth: Vec<usize>,
    labels: BTreeMap<VertexId, String>,
}

impl Default for Builder {
    fn default() -> Self {
        Self::new()
    }
}

impl Builder {
    pub fn new() -> Self {
        Self {
            parent: vec![None],
            depth: vec![0],
            labels: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn depth(&self, v: VertexId) -> usize {
        self.depth[v]
    }

    pub fn child(&mut self, p: VertexId) -> VertexId {
        self.parent.push(Some(p));
        self.depth.push(self.depth[p] + 1);
        self.parent.len() - 1
    }

    /// Appends a path of `len` new vertices below `from`; returns its end
    /// (`from` itself when `len == 0`).
    pub fn chain(&mut self, from: VertexId, len: usize) -> VertexId {
        (0..len).fold(from, |v, _| self.child(v))
    }

    /// One leg per offset; returns the feet in offset order.
    pub fn spider(&mut self, root: VertexId, offsets: &[usize]) -> Result<Vec<VertexId>, GenError> {
        if offsets.contains(&0) {
            return Err(GenError::BadSpiderSpec(
                "foot offsets must be at least 1".into(),
            ));
        }
        Ok(offsets.iter().map(|&o| self.chain(root, o)).collect())
    }

    pub fn label(&mut self, v: VertexId, label: impl Into<String>) {
        self.labels.insert(v, label.into());
    }

    pub fn leaves(&self) -> Vec<VertexId> {
        let mut has_child = vec![false; self.len()];
        for p in self.parent.iter().flatten() {
            has_child[*p] = true;
        }
        (1..self.len()).filter(|&v| !has_child[v]).collect()
    }

    pub fn finish(self, terminals: &[VertexId], budget: usize) -> Result<Instance, GenError> {
        Ok(Instance::from_parents(
            self.parent,
            0,
            terminals,
            budget,
            self.labels,
        )?)
    }
}

/// A spider rooted at vertex 0 with one foot at each offset.
pub fn spider(legs: usize, foot_layers: &[usize]) -> Result<Instance, GenError> {
    if legs != foot_layers.len() || legs == 0 {
        return Err(GenError::BadSpiderSpec(format!(
            "{legs} legs but {} foot positions",
            foot_layers.len()
        )));
    }
    let mut b = Builder::new();
    b.spider(0, foot_layers)?;
    b.finish(&[], 1)
}

/// Number of second-stage feet below each first-stage foot of tree `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StageTwoFanout {
    /// `D^(2M−i+1)`, leaves per tree `k·D^(2M)`.
    #[default]
    Full,
    /// `D^(M−i+1)`, leaves per tree `k·D^M`; keeps desk-scale gap instances small.
    Compact,
}

/// Second-stage fanout per phase of [`gap_instance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapFanout {
    /// Full fanout in every phase.
    Full,
    /// Compact fanout in every phase.
    Compact,
    /// Compact before the final phase, full fanout in it.
    #[default]
    Tapered,
}

impl GapFanout {
    fn phase(self, q: usize, phases: usize) -> StageTwoFanout {
        match self {
            GapFanout::Full => StageTwoFanout::Full,
            GapFanout::Compact => StageTwoFanout::Compact,
            GapFanout::Tapered if q == phases => StageTwoFanout::Full,
            GapFanout::Tapered => StageTwoFanout::Compact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GadgetSpec {
    pub m: usize,
    pub k: usize,
    pub d: usize,
    pub fanout: StageTwoFanout,
    pub size_cap: u128,
}

impl GadgetSpec {
    pub fn new(m: usize, k: usize, d: usize) -> Result<Self, GenError> {
        if m == 0 || k < 2 || d < 2 {
            return Err(GenError::BadParameter(format!(
                "need M ≥ 1, k ≥ 2, D ≥ 2 (got M={m}, k={k}, D={d})"
            )));
        }
        Ok(Self {
            m,
            k,
            d,
            fanout: StageTwoFanout::Full,
            size_cap: DEFAULT_SIZE_CAP,
        })
    }

    /// `D = ⌈4/δ⌉`.
    pub fn from_delta(m: usize, k: usize, delta: &Rational) -> Result<Self, GenError> {
        if !delta.is_positive() {
            return Err(GenError::BadParameter("delta must be positive".into()));
        }
        let d = (int(4) / delta).ceil().to_integer();
        let d = d
            .to_usize()
            .filter(|&d| d >= 2)
            .ok_or_else(|| GenError::BadParameter(format!("D = ⌈4/δ⌉ = {d} is out of range")))?;
        Self::new(m, k, d)
    }

    pub fn with_fanout(mut self, fanout: StageTwoFanout) -> Self {
        self.fanout = fanout;
        self
    }

    pub fn with_size_cap(mut self, cap: u128) -> Self {
        self.size_cap = cap;
        self
    }

    fn pow(&self, e: usize) -> Option<u128> {
        (self.d as u128).checked_pow(e as u32)
    }

    /// First layer of tree `i`'s first-stage feet.
    pub fn alpha_i(&self, i: usize) -> Option<u128> {
        (1..i).try_fold(1u128, |acc, j| acc.checked_add(self.pow(j - 1)?))
    }

    /// Leaf layer `h`.
    pub fn leaf_layer(&self) -> Option<u128> {
        self.alpha_i(self.m + 1)
    }

    pub fn stage_two_feet(&self, i: usize) -> Option<u128> {
        match self.fanout {
            StageTwoFanout::Full => self.pow(2 * self.m - i + 1),
            StageTwoFanout::Compact => self.pow(self.m - i + 1),
        }
    }

    pub fn leaves_per_tree(&self) -> Option<u128> {
        let e = match self.fanout {
            StageTwoFanout::Full => 2 * self.m,
            StageTwoFanout::Compact => self.m,
        };
        self.pow(e)?.checked_mul(self.k as u128)
    }

    /// Exact non-root vertex count of the gadget forest, `None` on overflow.
    pub fn vertex_count(&self) -> Option<u128> {
        let h = self.leaf_layer()?;
        let k = self.k as u128;
        let mut total = 0u128;
        for i in 1..=self.m {
            let start = self.alpha_i(i)?;
            let width = self.pow(i - 1)?;
            let f = self.stage_two_feet(i)?;
            // Layers start..start+width-1; legs of length ℓ and h-ℓ.
            let end = start.checked_add(width)?.checked_sub(1)?;
            let sum_l = (start + end).checked_mul(width)? / 2;
            let sum_rest = h.checked_mul(width)?.checked_sub(sum_l)?;
            total = total
                .checked_add(k.checked_mul(sum_l)?)?
                .checked_add(k.checked_mul(f)?.checked_mul(sum_rest)?)?
                .checked_add(1)?;
        }
        Some(total)
    }

    fn check_size(&self, already: u128, copies: u128) -> Result<(), GenError> {
        let estimate = self
            .vertex_count()
            .and_then(|c| c.checked_mul(copies))
            .and_then(|c| c.checked_add(already))
            .unwrap_or(u128::MAX);
        if estimate > self.size_cap {
            return Err(GenError::SizeCapExceeded {
                estimate,
                cap: self.size_cap,
            });
        }
        Ok(())
    }
}

fn attach_gadget(
    b: &mut Builder,
    roots: &[VertexId],
    k: usize,
    d: usize,
    fanout: StageTwoFanout,
    tag: &str,
) -> (Vec<Vec<VertexId>>, Vec<Vec<VertexId>>) {
    let spec = GadgetSpec {
        m: roots.len(),
        k,
        d,
        fanout,
        size_cap: u128::MAX,
    };
    let h = spec.leaf_layer().unwrap() as usize;
    let mut specials = Vec::with_capacity(roots.len());
    let mut leaves = Vec::with_capacity(roots.len());
    for (idx, &r) in roots.iter().enumerate() {
        let i = idx + 1;
        let start = spec.alpha_i(i).unwrap() as usize;
        let width = spec.pow(i - 1).unwrap() as usize;
        let offsets: Vec<usize> = (start..start + width)
            .flat_map(|l| std::iter::repeat_n(l, k))
            .collect();
        let feet = b.spider(r, &offsets).unwrap();
        let f = spec.stage_two_feet(i).unwrap() as usize;
        let mut tree_leaves = Vec::new();
        for (&v, &l) in feet.iter().zip(&offsets) {
            b.label(v, format!("special:{tag}"));
            tree_leaves.extend(b.spider(v, &vec![h - l; f]).unwrap());
        }
        specials.push(feet);
        leaves.push(tree_leaves);
    }
    (specials, leaves)
}

/// A good gadget as one instance: a virtual root (id 0) whose children are
/// the gadget roots, so gadget layer `j` is instance layer `j + 1`.
#[derive(Debug, Clone)]
pub struct GadgetOutput {
    pub spec: GadgetSpec,
    pub instance: Instance,
    pub roots: Vec<VertexId>,
    /// First-stage feet of each tree.
    pub specials_by_tree: Vec<Vec<VertexId>>,
    pub leaves_by_tree: Vec<Vec<VertexId>>,
    /// Gadget-local leaf layer.
    pub leaf_layer: usize,
}

impl GadgetOutput {
    pub fn specials(&self) -> Vec<VertexId> {
        let mut s: Vec<_> = self.specials_by_tree.iter().flatten().copied().collect();
        s.sort_unstable();
        s
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves_by_tree.iter().map(Vec::len).sum()
    }
}

pub fn good_gadget(spec: &GadgetSpec) -> Result<GadgetOutput, GenError> {
    spec.check_size(1, 1)?;
    let mut b = Builder::new();
    let roots: Vec<VertexId> = (0..spec.m).map(|_| b.child(0)).collect();
    for (i, &r) in roots.iter().enumerate() {
        b.label(r, format!("r{}", i + 1));
    }
    let (specials_by_tree, leaves_by_tree) =
        attach_gadget(&mut b, &roots, spec.k, spec.d, spec.fanout, "gadget");
    let leaves: Vec<VertexId> = leaves_by_tree.iter().flatten().copied().collect();
    let instance = b.finish(&leaves, 1)?;
    Ok(GadgetOutput {
        spec: *spec,
        instance,
        roots,
        specials_by_tree,
        leaves_by_tree,
        leaf_layer: spec.leaf_layer().unwrap() as usize,
    })
}

/// Structural half of gadget goodness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GadgetCheck {
    pub uniform_depth: bool,
    pub max_specials_per_layer: usize,
    pub every_path_hits_special: bool,
}

impl GadgetCheck {
    pub fn lp_friendly(&self, k: usize) -> bool {
        self.uniform_depth && self.max_specials_per_layer <= k && self.every_path_hits_special
    }
}

pub fn check_gadget(g: &GadgetOutput) -> GadgetCheck {
    let inst = &g.instance;
    let h = g.leaf_layer + 1;
    let uniform_depth = inst.leaves().iter().all(|&v| inst.depth(v) == h);
    let specials = g.specials();
    let mut per_layer = BTreeMap::<usize, usize>::new();
    let mut is_special = vec![false; inst.vertex_count()];
    for &v in &specials {
        *per_layer.entry(inst.depth(v)).or_default() += 1;
        is_special[v] = true;
    }
    let mut hit = vec![false; inst.vertex_count()];
    for &v in inst.bfs_order() {
        hit[v] = is_special[v] || inst.parent(v).is_some_and(|p| hit[p]);
    }
    GadgetCheck {
        uniform_depth,
        max_specials_per_layer: per_layer.values().copied().max().unwrap_or(0),
        every_path_hits_special: inst.leaves().iter().all(|&v| hit[v]),
    }
}

/// Per-phase invariants of the k-phase construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhaseReport {
    pub phase: usize,
    pub leaf_layer: usize,
    pub leaves: usize,
    pub max_specials_per_layer: usize,
    /// Min and max special count over root-to-leaf paths.
    pub specials_per_path: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct GapInstance {
    pub instance: Instance,
    pub k: usize,
    pub phases: Vec<PhaseReport>,
}

impl GapInstance {
    /// Phase of each special vertex (0 for regular vertices).
    pub fn phase_of(&self, v: VertexId) -> usize {
        self.instance
            .label(v)
            .and_then(|l| l.strip_prefix("special:phase"))
            .and_then(|p| p.parse().ok())
            .unwrap_or(0)
    }

    /// `x = 1/k` on every special.
    pub fn uniform_solution(&self) -> BTreeMap<VertexId, Rational> {
        self.instance
            .specials()
            .into_iter()
            .map(|v| (v, ratio(1, self.k as i64)))
            .collect()
    }

    /// `x = (1 − (q−1)/k)/k` on phase-`q` specials; satisfies the Hartke
    /// rows, which the uniform solution does not once two phases stack.
    pub fn hartke_scaled_solution(&self) -> BTreeMap<VertexId, Rational> {
        let k = self.k as i64;
        self.instance
            .specials()
            .into_iter()
            .map(|v| {
                let q = self.phase_of(v) as i64;
                (v, (one() - ratio(q - 1, k)) / int(k))
            })
            .collect()
    }
}

fn phase_report(b: &Builder, phase: usize, leaves: &[VertexId]) -> PhaseReport {
    let mut specials_on_path = vec![0usize; b.len()];
    let mut per_layer = BTreeMap::<usize, usize>::new();
    for v in 1..b.len() {
        let p = b.parent[v].unwrap();
        let s = b.labels.get(&v).is_some_and(|l| is_special_label(l));
        specials_on_path[v] = specials_on_path[p] + s as usize;
        if s {
            *per_layer.entry(b.depth[v]).or_default() += 1;
        }
    }
    let counts = leaves.iter().map(|&v| specials_on_path[v]);
    PhaseReport {
        phase,
        leaf_layer: leaves.first().map(|&v| b.depth[v]).unwrap_or(0),
        leaves: leaves.len(),
        max_specials_per_layer: per_layer.values().copied().max().unwrap_or(0),
        specials_per_path: (counts.clone().min().unwrap_or(0), counts.max().unwrap_or(0)),
    }
}

/// The k-phase gap instance truncated to `phases` phases; terminals are the
/// final leaves.
pub fn gap_instance(
    k: usize,
    d: usize,
    phases: usize,
    fanout: GapFanout,
    size_cap: u128,
) -> Result<GapInstance, GenError> {
    if phases == 0 || phases > k {
        return Err(GenError::BadParameter(format!(
            "need 1 ≤ phases ≤ k (got {phases})"
        )));
    }
    GadgetSpec::new(1, k, d)?;
    let mut b = Builder::new();
    let mut leaves = vec![0];
    let mut reports = Vec::new();
    for q in 1..=phases {
        let fanout_q = fanout.phase(q, phases);
        let spec = GadgetSpec::new(leaves.len(), k, d)?
            .with_fanout(fanout_q)
            .with_size_cap(size_cap);
        spec.check_size(b.len() as u128, 1)?;
        let (_, new_leaves) = attach_gadget(&mut b, &leaves, k, d, fanout_q, &format!("phase{q}"));
        leaves = new_leaves.into_iter().flatten().collect();
        let report = phase_report(&b, q, &leaves);
        let depth_ok = leaves.iter().all(|&v| b.depth[v] == report.leaf_layer);
        if !depth_ok || report.max_specials_per_layer > k || report.specials_per_path != (q, q) {
            return Err(GenError::Invariant(format!("phase {q}: {report:?}")));
        }
        reports.push(report);
    }
    let instance = b.finish(&leaves, 1)?;
    Ok(GapInstance {
        instance,
        k,
        phases: reports,
    })
}

/// The shipped k = 2, D = 2, two-phase fixture with tapered fanout.
pub fn gap_fixture() -> GapInstance {
    gap_instance(2, 2, 2, GapFanout::Tapered, DEFAULT_SIZE_CAP)
        .expect("fixture fits the default cap")
}

/// SHA-256 of the canonical JSON of [`basic_gadget`].
pub const BASIC_GADGET_CHECKSUM: &str =
    "a0d10ce293a8572f39f91d61fe375d6ea610e8b7a17e0813f44933be8f2d2906";

/// The small half-integral gadget: `a`, `b` in layer 1 below the source;
/// `a` has a leaf `a'` and a regular child `c` with leaf `a''`; `b` has a
/// special child `b'` with leaf `b''`. Terminals are the three leaves.
///
/// ```text
///        s
///      /   \
///     a*    b
///    / \     \
///  a'*  c    b'*
///       |     |
///      a''*  b''*
/// ```
pub fn basic_gadget() -> Instance {
    let mut b = Builder::new();
    let a = b.child(0);
    let bb = b.child(0);
    let a1 = b.child(a);
    let c = b.child(a);
    let b1 = b.child(bb);
    let a2 = b.child(c);
    let b2 = b.child(b1);
    b.label(a, "special:a");
    b.label(bb, "b");
    b.label(a1, "special:a'");
    b.label(c, "c");
    b.label(b1, "special:b'");
    b.label(a2, "special:a''");
    b.label(b2, "special:b''");
    b.finish(&[a1, a2, b2], 1).expect("fixed gadget is valid")
}

/// Seven-vertex Finbow tree `s → a, b; a → c, d; b → e, f` with the
/// half-point `x_a = x_b = x_c = x_d = 1/2` (returned as the second item).
pub fn fig4_fixture() -> (Instance, BTreeMap<VertexId, Rational>) {
    let mut b = Builder::new();
    let a = b.child(0);
    let bb = b.child(0);
    let c = b.child(a);
    let d = b.child(a);
    let e = b.child(bb);
    let f = b.child(bb);
    for (v, l) in [(a, "a"), (bb, "b"), (c, "c"), (d, "d"), (e, "e"), (f, "f")] {
        b.label(v, l);
    }
    let x = [a, bb, c, d]
        .into_iter()
        .map(|v| (v, ratio(1, 2)))
        .collect();
    (b.finish(&[], 1).expect("fixture is valid"), x)
}

/// `s → v1 → v2` with terminal `v2`.
pub fn path3() -> Instance {
    Instance::build(&[(1, 0), (2, 1)], 0, &[2], 1).expect("fixture is valid")
}

/// Named vertices of the alpha-parameterized instance.
#[derive(Debug, Clone)]
pub struct HartkeGapInstance {
    pub instance: Instance,
    pub alpha: usize,
    pub a: [VertexId; 2],
    pub b: [VertexId; 2],
}

impl HartkeGapInstance {
    /// `x = 1/2` on every special vertex.
    pub fn half_solution(&self) -> BTreeMap<VertexId, Rational> {
        half_on_specials(&self.instance)
    }
}

pub fn half_on_specials(inst: &Instance) -> BTreeMap<VertexId, Rational> {
    inst.specials()
        .into_iter()
        .map(|v| (v, ratio(1, 2)))
        .collect()
}

/// Vertex count of [`hartke_gap_instance`], `None` on overflow.
pub fn hartke_gap_size(alpha: usize) -> Option<u128> {
    let a = alpha as u128;
    let p = |e: u32| a.checked_pow(e);
    let mut total = 5u128;
    // Z1, Z2, W1/W2 primes: legs from layer 1.
    for i in 1..=2u32 {
        let count = p(i)?;
        let first = if i == 1 { 2 } else { a + 2 };
        for j in 0..count {
            let layer = first + j;
            total = total.checked_add(2 * (layer - 1))?;
            total = total.checked_add(p(5 - i)?)?;
        }
    }
    // Z' and W'' feet.
    for i in 1..=2u32 {
        for j in 1..=p(i)? {
            let root_layer = if i == 1 { 1 + j } else { a + 1 + j };
            let base = if i == 1 { 1 + a } else { 1 + a + p(3)? };
            for jp in 1..=p(2)? {
                let layer = base + j * p(2)? + jp;
                total = total.checked_add(layer - root_layer)?;
                total = total.checked_add(layer - 1)?;
                total = total.checked_add(2 * p(3 - i)?)?;
            }
        }
    }
    Some(total)
}

/// The alpha-parameterized instance built from overlapping copies of
/// [`basic_gadget`]; terminals are the leaves.
pub fn hartke_gap_instance(alpha: usize, size_cap: u128) -> Result<HartkeGapInstance, GenError> {
    if alpha < 2 {
        return Err(GenError::BadParameter("alpha must be at least 2".into()));
    }
    let estimate = hartke_gap_size(alpha).unwrap_or(u128::MAX);
    if estimate > size_cap {
        return Err(GenError::SizeCapExceeded {
            estimate,
            cap: size_cap,
        });
    }
    let al = alpha;
    let pw = |e: u32| al.pow(e);
    let mut b = Builder::new();
    let a1 = b.child(0);
    let a2 = b.child(0);
    let b1 = b.child(0);
    let b2 = b.child(0);
    b.label(a1, "special:a(1)");
    b.label(a2, "special:a(2)");
    b.label(b1, "b(1)");
    b.label(b2, "b(2)");
    let mut leaves = Vec::new();
    for i in 1..=2usize {
        let (ai, bi) = if i == 1 { (a1, b1) } else { (a2, b2) };
        let count = pw(i as u32);
        // Layers of b'(i, j) / a'(i, j).
        let prime_layer = |j: usize| if i == 1 { 1 + j } else { al + 1 + j };
        let double_base = if i == 1 { 1 + al } else { 1 + al + pw(3) };
        let offsets: Vec<usize> = (1..=count).map(|j| prime_layer(j) - 1).collect();
        let b_primes = b.spider(bi, &offsets)?;
        let a_primes = b.spider(ai, &offsets)?;
        for j in 1..=count {
            let (bp, ap) = (b_primes[j - 1], a_primes[j - 1]);
            b.label(bp, format!("special:b'({i},{j})"));
            b.label(ap, format!("special:a'({i},{j})"));
            for _ in 0..pw(5 - i as u32) {
                leaves.push(b.child(ap));
            }
        }
        for j in 1..=count {
            let bp = b_primes[j - 1];
            let layers: Vec<usize> = (1..=pw(2)).map(|jp| double_base + j * pw(2) + jp).collect();
            let b_offsets: Vec<usize> = layers.iter().map(|&l| l - prime_layer(j)).collect();
            let a_offsets: Vec<usize> = layers.iter().map(|&l| l - 1).collect();
            let b_doubles = b.spider(bp, &b_offsets)?;
            let a_doubles = b.spider(ai, &a_offsets)?;
            for jp in 1..=pw(2) {
                let (bd, ad) = (b_doubles[jp - 1], a_doubles[jp - 1]);
                b.label(bd, format!("special:b''({i},{j},{jp})"));
                b.label(ad, format!("special:a''({i},{j},{jp})"));
                for _ in 0..pw(3 - i as u32) {
                    leaves.push(b.child(bd));
                }
                for _ in 0..pw(3 - i as u32) {
                    leaves.push(b.child(ad));
                }
            }
        }
    }
    leaves.sort_unstable();
    let instance = b.finish(&leaves, 1)?;
    Ok(HartkeGapInstance {
        instance,
        alpha,
        a: [a1, a2],
        b: [b1, b2],
    })
}

/// Lemma-style reduction: `M = ⌈2|V|/ε⌉` new leaf children under every
/// terminal, and the terminal restriction is dropped.
pub fn terminal_to_plain(
    inst: &Instance,
    epsilon: &Rational,
    size_cap: u128,
) -> Result<Instance, GenError> {
    if !inst.has_explicit_terminals() {
        return Err(GenError::BadParameter(
            "instance has no terminal set".into(),
        ));
    }
    if !epsilon.is_positive() {
        return Err(GenError::BadParameter("epsilon must be positive".into()));
    }
    let m = (int(2 * inst.vertex_count() as i64) / epsilon)
        .ceil()
        .to_integer();
    let m = m.to_u128().unwrap_or(u128::MAX);
    if m < 2 {
        return Err(GenError::BadParameter(format!("M = {m} is degenerate")));
    }
    let t = inst.declared_terminals();
    let estimate = m
        .checked_mul(t.len() as u128)
        .and_then(|x| x.checked_add(inst.vertex_count() as u128))
        .unwrap_or(u128::MAX);
    if estimate > size_cap {
        return Err(GenError::SizeCapExceeded {
            estimate,
            cap: size_cap,
        });
    }
    let mut parent: Vec<Option<VertexId>> =
        (0..inst.vertex_count()).map(|v| inst.parent(v)).collect();
    for &v in t {
        for _ in 0..m {
            parent.push(Some(v));
        }
    }
    Ok(Instance::from_parents(
        parent,
        inst.root(),
        &[],
        inst.budget(),
        inst.labels().clone(),
    )?)
}

/// `⌈2|V|/ε⌉` as used by [`terminal_to_plain`].
pub fn reduction_multiplier(inst: &Instance, epsilon: &Rational) -> Rational {
    (int(2 * inst.vertex_count() as i64) / epsilon).ceil()
}

/// Random tree with root degree 2 and maximum degree 3, grown by attaching
/// each new vertex to a uniformly chosen non-root vertex with fewer than two
/// children.
pub fn finbow_random(n: usize, seed: u64) -> Result<Instance, GenError> {
    if n < 3 {
        return Err(GenError::BadParameter(
            "a Finbow tree needs at least 3 vertices".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder::new();
    b.child(0);
    b.child(0);
    let mut kids = vec![2usize, 0, 0];
    let mut open: Vec<VertexId> = vec![1, 2];
    while b.len() < n {
        let idx = rng.gen_range(0..open.len());
        let p = open[idx];
        let c = b.child(p);
        kids.push(0);
        kids[p] += 1;
        if kids[p] == 2 {
            open.swap_remove(idx);
        }
        open.push(c);
        open.sort_unstable();
    }
    b.finish(&[], 1)
}

/// Layer `1` holds specials `p`, `q` and a regular `r`; at layer `1 + d`
/// a special `v` hangs below `p` and a special `u` below `r`, each through
/// a chain of regular vertices. Returns the instance, the half-integral
/// solution and `(u, v)`.
pub fn one_and_one_family(
    d: usize,
) -> Result<(Instance, BTreeMap<VertexId, Rational>, VertexId, VertexId), GenError> {
    if d == 0 {
        return Err(GenError::BadParameter("depth must be at least 1".into()));
    }
    let mut b = Builder::new();
    let p = b.child(0);
    let q = b.child(0);
    let r = b.child(0);
    let pv = b.chain(p, d - 1);
    let v = b.child(pv);
    let ru = b.chain(r, d - 1);
    let u = b.child(ru);
    for (x, l) in [
        (p, "special:p"),
        (q, "special:q"),
        (v, "special:v"),
        (u, "special:u"),
    ] {
        b.label(x, l);
    }
    b.label(r, "r");
    let inst = b.finish(&[], 1)?;
    let x = half_on_specials(&inst);
    Ok((inst, x, u, v))
}

/// Layer 1 holds specials `p`, `r` and a regular `g`; at layer `1 + d`
/// specials `q`, `w` hang below `g`; at layer `1 + 2d` special `u` hangs
/// below `p` and special `v` below `q`. Returns the instance, the
/// half-integral solution and `(u, v)`.
pub fn two_heavy_family(
    d: usize,
) -> Result<(Instance, BTreeMap<VertexId, Rational>, VertexId, VertexId), GenError> {
    if d == 0 {
        return Err(GenError::BadParameter("depth must be at least 1".into()));
    }
    let mut b = Builder::new();
    let p = b.child(0);
    let r = b.child(0);
    let g = b.child(0);
    let gq = b.chain(g, d - 1);
    let q = b.child(gq);
    let gw = b.chain(g, d - 1);
    let w = b.child(gw);
    let pu = b.chain(p, 2 * d - 1);
    let u = b.child(pu);
    let qv = b.chain(q, d - 1);
    let v = b.child(qv);
    for (x, l) in [
        (p, "special:p"),
        (r, "special:r"),
        (q, "special:q"),
        (w, "special:w"),
        (u, "special:u"),
        (v, "special:v"),
    ] {
        b.label(x, l);
    }
    b.label(g, "g");
    let inst = b.finish(&[], 1)?;
    let x = half_on_specials(&inst);
    Ok((inst, x, u, v))
}

/// The alpha = 2 instance cut below `max_layer`, with its half solution.
pub fn truncated_hartke_fixture(
    max_layer: usize,
) -> Result<(Instance, BTreeMap<VertexId, Rational>), GenError> {
    let full = hartke_gap_instance(2, DEFAULT_SIZE_CAP)?;
    let inst = full.instance.truncate_to_depth(max_layer);
    let x = half_on_specials(&inst);
    Ok((inst, x))
}

/// Sum of `x` along every root-to-leaf path, by leaf.
pub fn leaf_path_sums(
    inst: &Instance,
    x: &BTreeMap<VertexId, Rational>,
) -> BTreeMap<VertexId, Rational> {
    let mut dense = vec![zero(); inst.vertex_count()];
    for (&v, val) in x {
        dense[v] = val.clone();
    }
    let sums = crate::lp::path_sums(inst, &dense);
    inst.leaves()
        .into_iter()
        .map(|v| (v, sums[v].clone()))
        .collect()
}

/// `true` when every value is a multiple of `1/q` in `[0, 1]`.
pub fn is_q_integral(x: &BTreeMap<VertexId, Rational>, q: i64) -> bool {
    x.values()
        .all(|v| (v * int(q)).is_integer() && !v.is_negative() && *v <= one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{
        build_lp2, build_lp_hartke, check_feasibility, check_hartke_implicit, y_from_x,
    };

    #[test]
    fn spider_shapes() {
        let s = spider(1, &[1]).unwrap();
        assert_eq!(s.vertex_count(), 2);
        let s = spider(3, &[1, 2, 3]).unwrap();
        assert_eq!(s.leaves().len(), 3);
        assert!((1..s.vertex_count()).all(|v| s.children(v).len() <= 1));
        assert!(spider(2, &[1]).is_err());
        assert!(spider(1, &[0]).is_err());
    }

    #[test]
    fn good_gadget_m1_k2_d2() {
        let spec = GadgetSpec::new(1, 2, 2).unwrap();
        let g = good_gadget(&spec).unwrap();
        assert_eq!(g.leaves_by_tree[0].len(), 8);
        assert_eq!(g.leaf_layer, 2);
        let check = check_gadget(&g);
        assert!(check.lp_friendly(2));
        assert_eq!(
            spec.vertex_count().unwrap() + 1,
            g.instance.vertex_count() as u128
        );
    }

    #[test]
    fn good_gadget_m2_k2_d4_leaves() {
        let spec = GadgetSpec::new(2, 2, 4).unwrap();
        assert_eq!(spec.leaves_per_tree(), Some(512));
        let g = good_gadget(&spec).unwrap();
        assert!(g.leaves_by_tree.iter().all(|l| l.len() == 512));
        assert_eq!(check_gadget(&g).max_specials_per_layer, 2);
        assert_eq!(
            spec.vertex_count().unwrap() + 1,
            g.instance.vertex_count() as u128
        );
    }

    #[test]
    fn from_delta_rounds_up() {
        assert_eq!(GadgetSpec::from_delta(1, 2, &ratio(1, 1)).unwrap().d, 4);
        assert_eq!(GadgetSpec::from_delta(1, 2, &ratio(3, 2)).unwrap().d, 3);
        assert!(GadgetSpec::from_delta(1, 2, &ratio(5, 1)).is_err());
    }

    #[test]
    fn full_fanout_gap_instance_is_refused() {
        let err = gap_instance(2, 2, 2, GapFanout::Full, DEFAULT_SIZE_CAP).unwrap_err();
        assert!(matches!(err, GenError::SizeCapExceeded { .. }));
    }

    #[test]
    fn compact_gap_instance_has_no_gap() {
        let g = gap_instance(2, 2, 2, GapFanout::Compact, DEFAULT_SIZE_CAP).unwrap();
        assert_eq!(g.instance.terminal_count(), 128);
        let r = crate::exact::optimal_strategy(&g.instance, &Default::default());
        assert!(r.proven_optimal);
        assert_eq!(r.value, 128);
    }

    #[test]
    fn tapered_gap_instance_invariants() {
        let g = gap_instance(2, 2, 2, GapFanout::Tapered, DEFAULT_SIZE_CAP).unwrap();
        assert_eq!(g.instance.terminal_count(), 2048);
        assert_eq!(g.instance.vertex_count(), 22519);
        assert_eq!(g.phases[0].specials_per_path, (1, 1));
        assert_eq!(g.phases[1].specials_per_path, (2, 2));
        assert_eq!(g.instance.height(), 18);
        let x = g.uniform_solution();
        let lp = build_lp2(&g.instance).unwrap();
        let sol = y_from_x(&g.instance, &x).project(&lp);
        assert!(check_feasibility(&lp, &sol).unwrap().is_empty());
        assert_eq!(sol.objective_value, int(2048));
        let xs = g.hartke_scaled_solution();
        let dense = y_from_x(&g.instance, &xs).x_dense(g.instance.vertex_count());
        assert!(check_hartke_implicit(&g.instance, &dense).is_empty());
        let dense = y_from_x(&g.instance, &x).x_dense(g.instance.vertex_count());
        assert!(!check_hartke_implicit(&g.instance, &dense).is_empty());
    }

    #[test]
    fn basic_gadget_half_solution() {
        let inst = basic_gadget();
        assert_eq!(inst.specials().len(), 5);
        let x = half_on_specials(&inst);
        let lp = build_lp_hartke(&inst).unwrap();
        let sol = y_from_x(&inst, &x).project(&lp);
        assert!(check_feasibility(&lp, &sol).unwrap().is_empty());
        assert!(inst
            .declared_terminals()
            .iter()
            .all(|&t| sol.y_of(t) == one()));
    }

    #[test]
    fn basic_gadget_checksum_is_frozen() {
        assert_eq!(basic_gadget().checksum(), BASIC_GADGET_CHECKSUM);
    }

    #[test]
    fn hartke_instance_counts() {
        for alpha in [2usize, 3] {
            let h = hartke_gap_instance(alpha, DEFAULT_SIZE_CAP).unwrap();
            assert_eq!(h.instance.terminal_count(), 6 * alpha.pow(5));
            assert_eq!(
                hartke_gap_size(alpha).unwrap(),
                h.instance.vertex_count() as u128
            );
        }
    }

    #[test]
    fn terminal_to_plain_sizes() {
        let inst = path3();
        let t = terminal_to_plain(&inst, &one(), DEFAULT_SIZE_CAP).unwrap();
        assert_eq!(t.vertex_count(), 3 + 6);
        assert!(!t.has_explicit_terminals());
        assert!(terminal_to_plain(&inst, &int(6), DEFAULT_SIZE_CAP).is_err());
        assert!(terminal_to_plain(&inst, &zero(), DEFAULT_SIZE_CAP).is_err());
    }

    #[test]
    fn finbow_degrees() {
        let t = finbow_random(3, 1).unwrap();
        assert_eq!(t.layers(), &[vec![0], vec![1, 2]]);
        for seed in 0..200 {
            let t = finbow_random(20, seed).unwrap();
            assert_eq!(t.vertex_count(), 20);
            assert_eq!(t.children(0).len(), 2);
            assert!((1..20).all(|v| t.children(v).len() <= 2));
        }
        assert_eq!(finbow_random(15, 7).unwrap(), finbow_random(15, 7).unwrap());
    }

    #[test]
    fn lemma_families_are_feasible() {
        for d in 1..4 {
            for (inst, x) in [
                one_and_one_family(d).map(|(i, x, _, _)| (i, x)).unwrap(),
                two_heavy_family(d).map(|(i, x, _, _)| (i, x)).unwrap(),
            ] {
                let dense = y_from_x(&inst, &x).x_dense(inst.vertex_count());
                assert!(check_hartke_implicit(&inst, &dense).is_empty());
                assert!(is_q_integral(&x, 2));
            }
        }
    }
}
