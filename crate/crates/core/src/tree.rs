//! Rooted layered trees, layered strategies and fire simulation.
//!
//! The root sits at layer 0 and is the only burning vertex at time 0. A
//! strategy picks at most `budget` vertices of layer `t` at time `t`; a
//! vertex is saved when it or one of its ancestors has been picked.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

pub type VertexId = usize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("parent links contain a cycle through vertex {vertex}")]
    Cycle { vertex: VertexId },
    #[error("vertex {vertex} appears as a child more than once")]
    MultiParent { vertex: VertexId },
    #[error("vertex {vertex} is not connected to the root")]
    Disconnected { vertex: VertexId },
    #[error("root {root} is listed with a parent")]
    RootHasParent { root: VertexId },
    #[error("terminal {vertex} is the root or not a vertex of the tree")]
    BadTerminal { vertex: VertexId },
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("vertex ids must be exactly 0..{count}; id {id} is out of range")]
    NonContiguousIds { id: u64, count: usize },
    #[error("budget must be positive")]
    ZeroBudget,
    #[error("invalid pick of vertex {vertex} at layer {layer}: {reason}")]
    InvalidPick {
        layer: usize,
        vertex: VertexId,
        reason: &'static str,
    },
    #[error("layer {layer} has {count} picks but the budget is {budget}")]
    OverBudget {
        layer: usize,
        count: usize,
        budget: usize,
    },
    #[error("malformed instance json: {0}")]
    Json(String),
}

/// A rooted tree with a terminal set and a per-step budget.
///
/// An empty terminal set means every non-root vertex counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    root: VertexId,
    parent: Vec<Option<VertexId>>,
    children: Vec<Vec<VertexId>>,
    depth: Vec<usize>,
    layers: Vec<Vec<VertexId>>,
    bfs_order: Vec<VertexId>,
    tin: Vec<usize>,
    tout: Vec<usize>,
    terminals: Vec<VertexId>,
    is_terminal: Vec<bool>,
    budget: usize,
    labels: BTreeMap<VertexId, String>,
}

impl Instance {
    /// Builds and validates an instance from `(child, parent)` pairs.
    ///
    /// Vertex ids must be exactly `0..n` where `n` is the number of distinct
    /// ids mentioned by the edges and the root.
    pub fn build(
        edges: &[(VertexId, VertexId)],
        root: VertexId,
        terminals: &[VertexId],
        budget: usize,
    ) -> Result<Self, TreeError> {
        Self::build_labeled(edges, root, terminals, budget, BTreeMap::new())
    }

    pub fn build_labeled(
        edges: &[(VertexId, VertexId)],
        root: VertexId,
        terminals: &[VertexId],
        budget: usize,
        labels: BTreeMap<VertexId, String>,
    ) -> Result<Self, TreeError> {
        if budget == 0 {
            return Err(TreeError::ZeroBudget);
        }
        let mut ids: BTreeSet<VertexId> = BTreeSet::new();
        ids.insert(root);
        for &(c, p) in edges {
            ids.insert(c);
            ids.insert(p);
        }
        let n = ids.len();
        if let Some(&max) = ids.iter().next_back() {
            if max >= n {
                return Err(TreeError::NonContiguousIds {
                    id: max as u64,
                    count: n,
                });
            }
        }
        let mut parent = vec![None; n];
        for &(c, p) in edges {
            if c == root {
                return Err(TreeError::RootHasParent { root });
            }
            if parent[c].is_some() {
                return Err(TreeError::MultiParent { vertex: c });
            }
            if c == p {
                return Err(TreeError::Cycle { vertex: c });
            }
            parent[c] = Some(p);
        }
        Self::from_parents(parent, root, terminals, budget, labels)
    }

    /// Builds from a dense parent array (`parent[root] == None`).
    pub fn from_parents(
        parent: Vec<Option<VertexId>>,
        root: VertexId,
        terminals: &[VertexId],
        budget: usize,
        labels: BTreeMap<VertexId, String>,
    ) -> Result<Self, TreeError> {
        if budget == 0 {
            return Err(TreeError::ZeroBudget);
        }
        let n = parent.len();
        if root >= n {
            return Err(TreeError::UnknownVertex(root));
        }
        if parent[root].is_some() {
            return Err(TreeError::RootHasParent { root });
        }
        let mut children = vec![Vec::new(); n];
        for (v, p) in parent.iter().enumerate() {
            match *p {
                Some(p) if p >= n => return Err(TreeError::UnknownVertex(p)),
                Some(p) => children[p].push(v),
                None if v != root => return Err(TreeError::Disconnected { vertex: v }),
                None => {}
            }
        }
        // BFS from the root; anything unreached sits on a cycle.
        let mut depth = vec![usize::MAX; n];
        let mut bfs_order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        depth[root] = 0;
        while let Some(v) = queue.pop_front() {
            bfs_order.push(v);
            for &c in &children[v] {
                depth[c] = depth[v] + 1;
                queue.push_back(c);
            }
        }
        if let Some(v) = (0..n).find(|&v| depth[v] == usize::MAX) {
            return Err(TreeError::Cycle { vertex: v });
        }
        let height = depth.iter().copied().max().unwrap_or(0);
        let mut layers = vec![Vec::new(); height + 1];
        for v in 0..n {
            layers[depth[v]].push(v);
        }

        let mut tin = vec![0; n];
        let mut tout = vec![0; n];
        let mut clock = 0;
        let mut stack = vec![(root, false)];
        while let Some((v, done)) = stack.pop() {
            if done {
                tout[v] = clock;
                continue;
            }
            tin[v] = clock;
            clock += 1;
            stack.push((v, true));
            for &c in children[v].iter().rev() {
                stack.push((c, false));
            }
        }

        let mut is_terminal = vec![false; n];
        let mut term_sorted: Vec<VertexId> = terminals.to_vec();
        term_sorted.sort_unstable();
        term_sorted.dedup();
        for &t in &term_sorted {
            if t >= n || t == root {
                return Err(TreeError::BadTerminal { vertex: t });
            }
            is_terminal[t] = true;
        }
        if term_sorted.is_empty() {
            for (v, flag) in is_terminal.iter_mut().enumerate() {
                *flag = v != root;
            }
        }
        if let Some((&v, _)) = labels.iter().find(|(&v, _)| v >= n) {
            return Err(TreeError::UnknownVertex(v));
        }
        Ok(Self {
            root,
            parent,
            children,
            depth,
            layers,
            bfs_order,
            tin,
            tout,
            terminals: term_sorted,
            is_terminal,
            budget,
            labels,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> VertexId {
        self.root
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn parent(&self, v: VertexId) -> Option<VertexId> {
        self.parent[v]
    }

    pub fn children(&self, v: VertexId) -> &[VertexId] {
        &self.children[v]
    }

    /// Edge distance from the root. Panics on an unknown vertex; see
    /// [`Instance::layer_of`] for the checked form.
    pub fn depth(&self, v: VertexId) -> usize {
        self.depth[v]
    }

    pub fn layer_of(&self, v: VertexId) -> Result<usize, TreeError> {
        self.check(v)?;
        Ok(self.depth[v])
    }

    /// Index of the deepest layer.
    pub fn height(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn layers(&self) -> &[Vec<VertexId>] {
        &self.layers
    }

    /// Vertices of layer `j`, empty past the height.
    pub fn layer(&self, j: usize) -> &[VertexId] {
        self.layers.get(j).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Vertices ordered by non-decreasing depth.
    pub fn bfs_order(&self) -> &[VertexId] {
        &self.bfs_order
    }

    /// Declared terminal set (empty means "all non-root vertices").
    pub fn declared_terminals(&self) -> &[VertexId] {
        &self.terminals
    }

    pub fn has_explicit_terminals(&self) -> bool {
        !self.terminals.is_empty()
    }

    pub fn is_terminal(&self, v: VertexId) -> bool {
        self.is_terminal[v]
    }

    /// The vertices whose saving counts in the objective.
    pub fn terminals(&self) -> Vec<VertexId> {
        (0..self.vertex_count())
            .filter(|&v| self.is_terminal[v])
            .collect()
    }

    pub fn terminal_count(&self) -> usize {
        self.is_terminal.iter().filter(|&&t| t).count()
    }

    pub fn labels(&self) -> &BTreeMap<VertexId, String> {
        &self.labels
    }

    pub fn label(&self, v: VertexId) -> Option<&str> {
        self.labels.get(&v).map(String::as_str)
    }

    /// Vertices whose label starts with `special`.
    pub fn specials(&self) -> Vec<VertexId> {
        self.labels
            .iter()
            .filter(|(_, l)| l.starts_with("special"))
            .map(|(&v, _)| v)
            .collect()
    }

    /// Vertex with exactly this label (first by id).
    pub fn find_label(&self, name: &str) -> Option<VertexId> {
        self.labels
            .iter()
            .find(|(_, l)| {
                l.as_str() == name || l.strip_prefix("special:").is_some_and(|rest| rest == name)
            })
            .map(|(&v, _)| v)
    }

    pub fn is_ancestor_or_self(&self, a: VertexId, v: VertexId) -> bool {
        self.tin[a] <= self.tin[v] && self.tout[v] <= self.tout[a]
    }

    /// `[v, parent(v), ..., root]`.
    pub fn path_to_root(&self, v: VertexId) -> Result<Vec<VertexId>, TreeError> {
        self.check(v)?;
        let mut path = vec![v];
        let mut cur = v;
        while let Some(p) = self.parent[cur] {
            path.push(p);
            cur = p;
        }
        Ok(path)
    }

    /// Ancestors of `v` strictly below the root, together with `v` itself
    /// when `v` is not the root; ordered top-down.
    pub fn pickable_path(&self, v: VertexId) -> Vec<VertexId> {
        let mut path = Vec::with_capacity(self.depth[v]);
        let mut cur = v;
        while cur != self.root {
            path.push(cur);
            cur = self.parent[cur].expect("non-root vertex has a parent");
        }
        path.reverse();
        path
    }

    /// Subtree of `v` in preorder.
    pub fn subtree(&self, v: VertexId) -> Result<Vec<VertexId>, TreeError> {
        self.check(v)?;
        let mut out = Vec::new();
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            out.push(u);
            for &c in self.children[u].iter().rev() {
                stack.push(c);
            }
        }
        Ok(out)
    }

    pub fn subtree_size(&self, v: VertexId) -> usize {
        self.tout[v] - self.tin[v]
    }

    pub fn lca(&self, u: VertexId, v: VertexId) -> Result<VertexId, TreeError> {
        self.check(u)?;
        self.check(v)?;
        let (mut a, mut b) = (u, v);
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].unwrap();
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].unwrap();
        }
        while a != b {
            a = self.parent[a].unwrap();
            b = self.parent[b].unwrap();
        }
        Ok(a)
    }

    pub fn leaves(&self) -> Vec<VertexId> {
        (0..self.vertex_count())
            .filter(|&v| self.children[v].is_empty() && v != self.root)
            .collect()
    }

    /// Number of (effective) terminals in each subtree.
    pub fn subtree_terminal_counts(&self) -> Vec<usize> {
        let mut counts: Vec<usize> = self.is_terminal.iter().map(|&t| t as usize).collect();
        for &v in self.bfs_order.iter().rev() {
            if let Some(p) = self.parent[v] {
                counts[p] += counts[v];
            }
        }
        counts
    }

    /// Same tree, different terminal set.
    pub fn with_terminals(&self, terminals: &[VertexId]) -> Result<Self, TreeError> {
        Self::from_parents(
            self.parent.clone(),
            self.root,
            terminals,
            self.budget,
            self.labels.clone(),
        )
    }

    pub fn with_budget(&self, budget: usize) -> Result<Self, TreeError> {
        Self::from_parents(
            self.parent.clone(),
            self.root,
            &self.terminals,
            budget,
            self.labels.clone(),
        )
    }

    /// Keeps the vertices of layers `0..=max_layer`, renumbered in id order.
    /// Declared terminals are restricted to the kept vertices; when none
    /// survive the result counts every vertex.
    pub fn truncate_to_depth(&self, max_layer: usize) -> Self {
        let keep: Vec<VertexId> = (0..self.vertex_count())
            .filter(|&v| self.depth[v] <= max_layer)
            .collect();
        let mut new_id = vec![usize::MAX; self.vertex_count()];
        for (i, &v) in keep.iter().enumerate() {
            new_id[v] = i;
        }
        let parent = keep
            .iter()
            .map(|&v| self.parent[v].map(|p| new_id[p]))
            .collect();
        let terminals: Vec<VertexId> = self
            .terminals
            .iter()
            .filter(|&&t| self.depth[t] <= max_layer)
            .map(|&t| new_id[t])
            .collect();
        let labels = self
            .labels
            .iter()
            .filter(|(&v, _)| self.depth[v] <= max_layer)
            .map(|(&v, l)| (new_id[v], l.clone()))
            .collect();
        Self::from_parents(parent, new_id[self.root], &terminals, self.budget, labels)
            .expect("truncation of a valid tree is valid")
    }

    fn check(&self, v: VertexId) -> Result<(), TreeError> {
        if v < self.vertex_count() {
            Ok(())
        } else {
            Err(TreeError::UnknownVertex(v))
        }
    }

    pub fn to_json_value(&self) -> InstanceJson {
        let mut edges: Vec<[u64; 2]> = (0..self.vertex_count())
            .filter_map(|v| self.parent[v].map(|p| [v as u64, p as u64]))
            .collect();
        edges.sort_unstable();
        InstanceJson {
            root: self.root as u64,
            edges,
            terminals: self.terminals.iter().map(|&t| t as u64).collect(),
            budget: self.budget as u64,
            labels: self
                .labels
                .iter()
                .map(|(&v, l)| (v as u64, l.clone()))
                .collect(),
        }
    }

    /// Canonical JSON: edges sorted by child, terminals sorted, label keys
    /// in numeric order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        let raw: InstanceJson =
            serde_json::from_str(text).map_err(|e| TreeError::Json(e.to_string()))?;
        raw.into_instance()
    }

    /// SHA-256 of the canonical JSON.
    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

/// On-disk instance schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceJson {
    pub root: u64,
    pub edges: Vec<[u64; 2]>,
    #[serde(default)]
    pub terminals: Vec<u64>,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default)]
    pub labels: BTreeMap<u64, String>,
}

fn default_budget() -> u64 {
    1
}

impl InstanceJson {
    pub fn into_instance(self) -> Result<Instance, TreeError> {
        let conv =
            |x: u64| usize::try_from(x).map_err(|_| TreeError::Json(format!("id {x} too large")));
        let edges = self
            .edges
            .iter()
            .map(|[c, p]| Ok((conv(*c)?, conv(*p)?)))
            .collect::<Result<Vec<_>, TreeError>>()?;
        let terminals = self
            .terminals
            .iter()
            .map(|&t| conv(t))
            .collect::<Result<Vec<_>, _>>()?;
        let labels = self
            .labels
            .into_iter()
            .map(|(v, l)| Ok((conv(v)?, l)))
            .collect::<Result<BTreeMap<_, _>, TreeError>>()?;
        Instance::build_labeled(
            &edges,
            conv(self.root)?,
            &terminals,
            conv(self.budget)?,
            labels,
        )
    }
}

/// One pick set per layer. Layer `t` picks must lie in layer `t`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    picks: BTreeMap<usize, BTreeSet<VertexId>>,
}

impl Strategy {
    pub fn new() -> Self {
        Self::default()
    }

    /// Places each vertex at its own layer.
    pub fn from_vertices<I: IntoIterator<Item = VertexId>>(inst: &Instance, vertices: I) -> Self {
        let mut s = Self::new();
        for v in vertices {
            s.pick(inst.depth(v), v);
        }
        s
    }

    pub fn pick(&mut self, layer: usize, v: VertexId) {
        self.picks.entry(layer).or_default().insert(v);
    }

    pub fn picks(&self) -> &BTreeMap<usize, BTreeSet<VertexId>> {
        &self.picks
    }

    pub fn at(&self, layer: usize) -> impl Iterator<Item = VertexId> + '_ {
        self.picks.get(&layer).into_iter().flatten().copied()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.picks.values().flatten().copied()
    }

    pub fn len(&self) -> usize {
        self.picks.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `[[layer, vertex], ...]` in layer order.
    pub fn as_pairs(&self) -> Vec<[usize; 2]> {
        self.picks
            .iter()
            .flat_map(|(&l, vs)| vs.iter().map(move |&v| [l, v]))
            .collect()
    }

    pub fn validate(&self, inst: &Instance) -> Result<(), TreeError> {
        for (&layer, vs) in &self.picks {
            if vs.len() > inst.budget() {
                return Err(TreeError::OverBudget {
                    layer,
                    count: vs.len(),
                    budget: inst.budget(),
                });
            }
            for &v in vs {
                if v >= inst.vertex_count() {
                    return Err(TreeError::UnknownVertex(v));
                }
                if v == inst.root() {
                    return Err(TreeError::InvalidPick {
                        layer,
                        vertex: v,
                        reason: "the root is burning from the start",
                    });
                }
                if inst.depth(v) != layer {
                    return Err(TreeError::InvalidPick {
                        layer,
                        vertex: v,
                        reason: "vertex is not in this layer",
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SavedSet {
    pub saved: Vec<bool>,
    pub saved_terminal_count: usize,
}

impl SavedSet {
    pub fn is_saved(&self, v: VertexId) -> bool {
        self.saved[v]
    }

    pub fn saved_vertices(&self) -> Vec<VertexId> {
        (0..self.saved.len()).filter(|&v| self.saved[v]).collect()
    }

    pub fn saved_count(&self) -> usize {
        self.saved.iter().filter(|&&s| s).count()
    }
}

/// Runs the fire against a layered strategy.
///
/// Picks of vertices that are already saved are harmless no-ops.
pub fn simulate(inst: &Instance, strategy: &Strategy) -> Result<SavedSet, TreeError> {
    strategy.validate(inst)?;
    let mut picked = vec![false; inst.vertex_count()];
    for v in strategy.vertices() {
        picked[v] = true;
    }
    let mut saved = vec![false; inst.vertex_count()];
    for &v in inst.bfs_order() {
        saved[v] = picked[v] || inst.parent(v).is_some_and(|p| saved[p]);
    }
    let saved_terminal_count = (0..inst.vertex_count())
        .filter(|&v| saved[v] && inst.is_terminal(v))
        .count();
    Ok(SavedSet {
        saved,
        saved_terminal_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Instance {
        Instance::build(&[(1, 0), (2, 1)], 0, &[2], 1).unwrap()
    }

    #[test]
    fn path_layers() {
        let inst = path3();
        assert_eq!(inst.layers(), &[vec![0], vec![1], vec![2]]);
        assert_eq!(inst.path_to_root(2).unwrap(), vec![2, 1, 0]);
        assert_eq!(inst.pickable_path(2), vec![1, 2]);
        assert_eq!(inst.terminals(), vec![2]);
    }

    #[test]
    fn star_layers() {
        let edges: Vec<_> = (1..=5).map(|c| (c, 0)).collect();
        let inst = Instance::build(&edges, 0, &[], 1).unwrap();
        assert_eq!(inst.layers(), &[vec![0], vec![1, 2, 3, 4, 5]]);
        assert_eq!(inst.terminal_count(), 5);
        assert_eq!(inst.leaves(), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn rejects_malformed() {
        assert_eq!(
            Instance::build(&[(1, 0), (1, 2), (2, 0)], 0, &[], 1),
            Err(TreeError::MultiParent { vertex: 1 })
        );
        assert!(matches!(
            Instance::build(&[(1, 2), (2, 1)], 0, &[], 1),
            Err(TreeError::Disconnected { .. }) | Err(TreeError::Cycle { .. })
        ));
        assert!(matches!(
            Instance::build(&[(1, 0), (2, 3), (3, 2)], 0, &[], 1),
            Err(TreeError::Cycle { .. })
        ));
        assert_eq!(
            Instance::build(&[(1, 0)], 0, &[0], 1),
            Err(TreeError::BadTerminal { vertex: 0 })
        );
        assert_eq!(
            Instance::build(&[(1, 0)], 0, &[7], 1),
            Err(TreeError::BadTerminal { vertex: 7 })
        );
        assert!(matches!(
            Instance::build(&[(1, 0), (5, 1)], 0, &[], 1),
            Err(TreeError::NonContiguousIds { .. })
        ));
        assert_eq!(
            Instance::build(&[(1, 0)], 0, &[], 0),
            Err(TreeError::ZeroBudget)
        );
        assert_eq!(
            Instance::build(&[(0, 1)], 0, &[], 1),
            Err(TreeError::RootHasParent { root: 0 })
        );
    }

    #[test]
    fn pick_cuts_subtree() {
        let inst = path3();
        let mut s = Strategy::new();
        s.pick(1, 1);
        let saved = simulate(&inst, &s).unwrap();
        assert_eq!(saved.saved_vertices(), vec![1, 2]);
        assert_eq!(saved.saved_terminal_count, 1);
    }

    #[test]
    fn invalid_picks() {
        let inst = path3();
        let mut s = Strategy::new();
        s.pick(2, 1);
        assert!(matches!(
            simulate(&inst, &s),
            Err(TreeError::InvalidPick { .. })
        ));
        let star = Instance::build(&[(1, 0), (2, 0)], 0, &[], 1).unwrap();
        let mut s = Strategy::new();
        s.pick(1, 1);
        s.pick(1, 2);
        assert!(matches!(
            simulate(&star, &s),
            Err(TreeError::OverBudget { .. })
        ));
        let mut s = Strategy::new();
        s.pick(0, 0);
        assert!(matches!(
            simulate(&star, &s),
            Err(TreeError::InvalidPick { .. })
        ));
    }

    #[test]
    fn wasted_pick_is_not_an_error() {
        let inst = path3();
        let mut s = Strategy::new();
        s.pick(1, 1);
        s.pick(2, 2);
        assert_eq!(simulate(&inst, &s).unwrap().saved_terminal_count, 1);
    }

    #[test]
    fn lca_and_subtree() {
        //      0
        //    1   2
        //   3 4   5
        let inst = Instance::build(&[(1, 0), (2, 0), (3, 1), (4, 1), (5, 2)], 0, &[], 1).unwrap();
        assert_eq!(inst.lca(3, 4).unwrap(), 1);
        assert_eq!(inst.lca(3, 5).unwrap(), 0);
        assert_eq!(inst.lca(1, 4).unwrap(), 1);
        assert_eq!(inst.subtree(1).unwrap(), vec![1, 3, 4]);
        assert_eq!(inst.subtree_size(1), 3);
        assert!(inst.is_ancestor_or_self(1, 4));
        assert!(!inst.is_ancestor_or_self(2, 4));
        assert_eq!(inst.subtree_terminal_counts()[0], 5);
        assert_eq!(inst.lca(0, 9), Err(TreeError::UnknownVertex(9)));
        assert_eq!(inst.layer_of(9), Err(TreeError::UnknownVertex(9)));
    }

    #[test]
    fn json_roundtrip_is_byte_stable() {
        let mut labels = BTreeMap::new();
        labels.insert(2, "special".to_string());
        let inst =
            Instance::build_labeled(&[(2, 1), (1, 0), (3, 0)], 0, &[3, 2], 2, labels).unwrap();
        let text = inst.to_json();
        let back = Instance::from_json(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.to_json(), text);
        assert_eq!(back.specials(), vec![2]);
    }

    #[test]
    fn truncate_keeps_top() {
        let inst = Instance::build(&[(1, 0), (2, 1), (3, 2), (4, 0)], 0, &[3, 4], 1).unwrap();
        let t = inst.truncate_to_depth(1);
        assert_eq!(t.vertex_count(), 3);
        assert_eq!(t.declared_terminals(), &[2]);
    }
}
