//! Refined process structure tree: canonical hierarchy of single-entry
//! single-exit components (trivial, polygon, bond, rigid).
//!
//! Fragments are enumerated as the arc sets lying on entry-to-exit paths of
//! node pairs (plus per-branch components of bonds), then filtered down to
//! the canonical, non-overlapping ones. Quadratic in the arc count, which is
//! fine at the model sizes this crate targets.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{NodeId, ProcessModel};

pub type Arc = (NodeId, NodeId);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpstKind {
    Trivial,
    Polygon,
    Bond,
    Rigid,
}

#[derive(Debug, Clone)]
pub struct RpstNode {
    pub kind: RpstKind,
    pub entry: NodeId,
    pub exit: NodeId,
    /// All arcs owned by this component (children partition this set).
    pub arcs: BTreeSet<Arc>,
    /// Ordered for polygons (sequence order), deterministic otherwise.
    pub children: Vec<RpstNode>,
}

impl RpstNode {
    pub fn contains_rigid(&self) -> bool {
        self.kind == RpstKind::Rigid || self.children.iter().any(|c| c.contains_rigid())
    }

    pub fn rigid_count(&self) -> usize {
        let own = usize::from(self.kind == RpstKind::Rigid);
        own + self.children.iter().map(|c| c.rigid_count()).sum::<usize>()
    }

    /// Preorder iterator over this node and all descendants.
    pub fn walk(&self) -> Vec<&RpstNode> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.walk());
        }
        out
    }

    pub fn render_indented(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out, 0);
        out
    }

    fn render_into(&self, out: &mut String, depth: usize) {
        let kind = match self.kind {
            RpstKind::Trivial => "trivial",
            RpstKind::Polygon => "polygon",
            RpstKind::Bond => "bond",
            RpstKind::Rigid => "rigid",
        };
        out.push_str(&"  ".repeat(depth));
        out.push_str(&format!("{kind} [{} -> {}] ({} arcs)\n", self.entry, self.exit, self.arcs.len()));
        for c in &self.children {
            c.render_into(out, depth + 1);
        }
    }
}

/// True iff no component of the tree is a rigid.
pub fn is_well_structured(root: &RpstNode) -> bool {
    !root.contains_rigid()
}

#[derive(Debug, Clone)]
struct Fragment {
    arcs: BTreeSet<Arc>,
    entry: NodeId,
    exit: NodeId,
}

/// Computes the canonical RPST of a valid model.
pub fn compute_rpst(m: &ProcessModel) -> RpstNode {
    let arcs: Vec<Arc> = m.arcs().iter().cloned().collect();
    let nodes: Vec<&NodeId> = m.nodes().keys().collect();

    // reflexive reachability per node
    let mut reach: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for n in &nodes {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut stack: Vec<&str> = vec![n.as_str()];
        while let Some(x) = stack.pop() {
            if seen.insert(x) {
                for (s, t) in &arcs {
                    if s == x {
                        stack.push(t);
                    }
                }
            }
        }
        reach.insert(n.as_str(), seen);
    }

    let mut fragments: BTreeMap<BTreeSet<Arc>, (NodeId, NodeId)> = BTreeMap::new();
    // singleton fragments: every arc is a component
    for a in &arcs {
        fragments.insert([a.clone()].into(), (a.0.clone(), a.1.clone()));
    }
    for u in &nodes {
        for v in &nodes {
            if u == v {
                continue;
            }
            let set: BTreeSet<Arc> = arcs
                .iter()
                .filter(|(x, y)| reach[u.as_str()].contains(x.as_str()) && reach[y.as_str()].contains(v.as_str()))
                .cloned()
                .collect();
            if set.is_empty() {
                continue;
            }
            if !is_sese(&set, u, v, &arcs) {
                continue;
            }
            // per-branch components (connected through interior nodes)
            let branches = branch_components(&set, u, v);
            for b in branches {
                fragments.entry(b).or_insert_with(|| ((*u).clone(), (*v).clone()));
            }
            fragments.insert(set, ((*u).clone(), (*v).clone()));
        }
    }

    let frags: Vec<Fragment> = fragments
        .into_iter()
        .map(|(arcs, (entry, exit))| Fragment { arcs, entry, exit })
        .collect();

    // canonical = overlaps no other fragment
    let canonical: Vec<&Fragment> = frags
        .iter()
        .filter(|f| !frags.iter().any(|g| overlaps(&f.arcs, &g.arcs)))
        .collect();

    // containment tree over canonical fragments
    let mut order: Vec<&Fragment> = canonical.clone();
    order.sort_by_key(|f| (f.arcs.len(), f.arcs.iter().next().cloned()));
    let root_idx = order.len() - 1;
    debug_assert_eq!(order[root_idx].arcs.len(), arcs.len(), "root owns all arcs");
    build_node(&order, root_idx)
}

fn is_sese(set: &BTreeSet<Arc>, entry: &str, exit: &str, all: &[Arc]) -> bool {
    let mut interior: BTreeSet<&str> = BTreeSet::new();
    for (s, t) in set {
        if s != entry && s != exit {
            interior.insert(s);
        }
        if t != entry && t != exit {
            interior.insert(t);
        }
    }
    for (s, t) in all {
        if !set.contains(&(s.clone(), t.clone()))
            && (interior.contains(s.as_str()) || interior.contains(t.as_str()))
        {
            return false;
        }
    }
    true
}

/// Splits a SESE arc set into its components connected via interior nodes.
fn branch_components(set: &BTreeSet<Arc>, entry: &str, exit: &str) -> Vec<BTreeSet<Arc>> {
    let items: Vec<&Arc> = set.iter().collect();
    let n = items.len();
    let mut comp: Vec<usize> = (0..n).collect();
    fn find(comp: &mut Vec<usize>, i: usize) -> usize {
        if comp[i] != i {
            let r = find(comp, comp[i]);
            comp[i] = r;
            r
        } else {
            i
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let shares_interior = [&items[i].0, &items[i].1]
                .iter()
                .any(|x| (x.as_str() != entry && x.as_str() != exit) && (items[j].0 == **x || items[j].1 == **x));
            if shares_interior {
                let (a, b) = (find(&mut comp, i), find(&mut comp, j));
                comp[a] = b;
            }
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<Arc>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut comp, i);
        groups.entry(r).or_default().insert(items[i].clone());
    }
    if groups.len() <= 1 {
        vec![]
    } else {
        groups.into_values().collect()
    }
}

fn overlaps(a: &BTreeSet<Arc>, b: &BTreeSet<Arc>) -> bool {
    let inter = a.intersection(b).count();
    inter > 0 && inter < a.len() && inter < b.len()
}

fn build_node(order: &[&Fragment], idx: usize) -> RpstNode {
    let f = order[idx];
    // direct children: maximal fragments strictly contained in f
    let mut child_idxs: Vec<usize> = vec![];
    for (i, g) in order.iter().enumerate() {
        if i == idx || g.arcs.len() >= f.arcs.len() {
            continue;
        }
        if !g.arcs.is_subset(&f.arcs) {
            continue;
        }
        // skip if some other candidate strictly between g and f
        let nested = order.iter().enumerate().any(|(j, h)| {
            j != i
                && j != idx
                && h.arcs.len() < f.arcs.len()
                && h.arcs.len() > g.arcs.len()
                && g.arcs.is_subset(&h.arcs)
                && h.arcs.is_subset(&f.arcs)
        });
        if !nested {
            child_idxs.push(i);
        }
    }

    if child_idxs.is_empty() {
        debug_assert_eq!(f.arcs.len(), 1);
        return RpstNode {
            kind: RpstKind::Trivial,
            entry: f.entry.clone(),
            exit: f.exit.clone(),
            arcs: f.arcs.clone(),
            children: vec![],
        };
    }

    let mut children: Vec<RpstNode> = child_idxs.iter().map(|&i| build_node(order, i)).collect();
    debug_assert_eq!(
        children.iter().map(|c| c.arcs.len()).sum::<usize>(),
        f.arcs.len(),
        "children partition the parent's arcs"
    );

    // polygon: children chain from entry to exit
    if let Some(ordered) = chain_order(&children, &f.entry, &f.exit) {
        return RpstNode {
            kind: RpstKind::Polygon,
            entry: f.entry.clone(),
            exit: f.exit.clone(),
            arcs: f.arcs.clone(),
            children: ordered,
        };
    }
    // bond: >=2 children all sharing entry and exit
    if children.len() >= 2
        && children.iter().all(|c| c.entry == f.entry && c.exit == f.exit)
    {
        children.sort_by_key(|c| c.arcs.iter().next().cloned());
        return RpstNode {
            kind: RpstKind::Bond,
            entry: f.entry.clone(),
            exit: f.exit.clone(),
            arcs: f.arcs.clone(),
            children,
        };
    }
    children.sort_by_key(|c| c.arcs.iter().next().cloned());
    RpstNode {
        kind: RpstKind::Rigid,
        entry: f.entry.clone(),
        exit: f.exit.clone(),
        arcs: f.arcs.clone(),
        children,
    }
}

fn chain_order(children: &[RpstNode], entry: &str, exit: &str) -> Option<Vec<RpstNode>> {
    if children.len() < 2 {
        return None;
    }
    let mut by_entry: BTreeMap<&str, &RpstNode> = BTreeMap::new();
    for c in children {
        if by_entry.insert(c.entry.as_str(), c).is_some() {
            return None; // duplicate entries: not a sequence
        }
    }
    let mut ordered = vec![];
    let mut cur = entry;
    for _ in 0..children.len() {
        let c = by_entry.get(cur)?;
        ordered.push((*c).clone());
        cur = c.exit.as_str();
    }
    (cur == exit).then_some(ordered)
}
