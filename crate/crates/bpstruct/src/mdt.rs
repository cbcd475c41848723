//! Modular decomposition of a digraph.
//!
//! A module is a vertex set whose members are indistinguishable from outside:
//! every external vertex relates uniformly (arc in, arc out, both, or none)
//! to all members. Strong modules overlap no other module and form a tree.
//! The children of each tree node are its maximal proper strong modules; the
//! node's class is read off the quotient over its children.
//!
//! Candidate generation exploits that every non-singleton strong module is
//! the minimal module spanning one of its vertex pairs, so the closure of all
//! pairs plus the singletons covers everything. This is quadratic-ish and
//! entirely adequate for the graph sizes involved.

use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone)]
pub struct Digraph {
    pub n: usize,
    adj: Vec<BTreeSet<usize>>,
}

impl Digraph {
    pub fn new(n: usize) -> Self {
        Digraph { n, adj: vec![BTreeSet::new(); n] }
    }

    pub fn add_arc(&mut self, u: usize, v: usize) {
        debug_assert!(u != v && u < self.n && v < self.n);
        self.adj[u].insert(v);
    }

    pub fn has_arc(&self, u: usize, v: usize) -> bool {
        self.adj[u].contains(&v)
    }

    pub fn arcs(&self) -> Vec<(usize, usize)> {
        let mut out = vec![];
        for (u, vs) in self.adj.iter().enumerate() {
            for &v in vs {
                out.push((u, v));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MdtClass {
    Trivial,
    /// Quotient is a transitive tournament; children listed in chain order.
    Linear,
    /// Quotient is complete with double arcs: pairwise alternatives.
    XorComplete,
    /// Quotient has no arcs: pairwise concurrent / parallel.
    AndComplete,
    /// Quotient is prime. `concurrent` records whether some pair of children
    /// is unconnected.
    Primitive { concurrent: bool },
}

#[derive(Debug, Clone)]
pub struct MdtNode {
    pub class: MdtClass,
    pub members: BTreeSet<usize>,
    pub children: Vec<MdtNode>,
}

impl MdtNode {
    pub fn walk(&self) -> Vec<&MdtNode> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.walk());
        }
        out
    }

    pub fn render_indented(&self, labels: &dyn Fn(usize) -> String) -> String {
        let mut out = String::new();
        self.render_into(&mut out, 0, labels);
        out
    }

    fn render_into(&self, out: &mut String, depth: usize, labels: &dyn Fn(usize) -> String) {
        let class = match &self.class {
            MdtClass::Trivial => "trivial".to_string(),
            MdtClass::Linear => "linear".to_string(),
            MdtClass::XorComplete => "xor-complete".to_string(),
            MdtClass::AndComplete => "and-complete".to_string(),
            MdtClass::Primitive { concurrent: true } => "primitive (concurrent)".to_string(),
            MdtClass::Primitive { concurrent: false } => "primitive".to_string(),
        };
        let members: Vec<String> = self.members.iter().map(|&v| labels(v)).collect();
        out.push_str(&"  ".repeat(depth));
        out.push_str(&format!("{class} {{{}}}\n", members.join(", ")));
        for c in &self.children {
            c.render_into(out, depth + 1, labels);
        }
    }

    pub fn class_name(&self) -> &'static str {
        match &self.class {
            MdtClass::Trivial => "trivial",
            MdtClass::Linear => "linear",
            MdtClass::XorComplete => "xor-complete",
            MdtClass::AndComplete => "and-complete",
            MdtClass::Primitive { concurrent: true } => "primitive-concurrent",
            MdtClass::Primitive { concurrent: false } => "primitive-sequential",
        }
    }

    pub fn to_json(&self, labels: &dyn Fn(usize) -> String) -> String {
        fn value(n: &MdtNode, labels: &dyn Fn(usize) -> String) -> serde_json::Value {
            serde_json::json!({
                "class": n.class_name(),
                "members": n.members.iter().map(|&v| labels(v)).collect::<Vec<_>>(),
                "children": n.children.iter().map(|c| value(c, labels)).collect::<Vec<_>>(),
            })
        }
        let doc = serde_json::json!({
            "format": "bpstruct-mdt/1",
            "root": value(self, labels),
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("mdt serializes");
        s.push('\n');
        s
    }

    pub fn to_dot(&self, labels: &dyn Fn(usize) -> String) -> String {
        fn rec(
            n: &MdtNode,
            labels: &dyn Fn(usize) -> String,
            next: &mut usize,
            out: &mut String,
        ) -> usize {
            let id = *next;
            *next += 1;
            let text = if n.children.is_empty() {
                let members: Vec<String> = n.members.iter().map(|&v| labels(v)).collect();
                members.join(", ")
            } else {
                n.class_name().to_string()
            };
            out.push_str(&format!("  n{id} [shape=box, label=\"{text}\"];\n"));
            for c in &n.children {
                let cid = rec(c, labels, next, out);
                out.push_str(&format!("  n{id} -> n{cid};\n"));
            }
            id
        }
        let mut out = String::from("digraph mdt {\n");
        let mut next = 0;
        rec(self, labels, &mut next, &mut out);
        out.push_str("}\n");
        out
    }
}

/// True iff `set` is a module of the subgraph induced by `universe`.
pub fn is_module(g: &Digraph, set: &BTreeSet<usize>, universe: &BTreeSet<usize>) -> bool {
    universe
        .iter()
        .filter(|w| !set.contains(w))
        .all(|&w| {
            let mut outs = set.iter().map(|&m| g.has_arc(w, m));
            let mut ins = set.iter().map(|&m| g.has_arc(m, w));
            let first_out = g.has_arc(w, *set.iter().next().unwrap());
            let first_in = g.has_arc(*set.iter().next().unwrap(), w);
            outs.all(|x| x == first_out) && ins.all(|x| x == first_in)
        })
}

/// Minimal module of the induced subgraph containing both seeds.
fn spanning_module(g: &Digraph, u: usize, v: usize, universe: &BTreeSet<usize>) -> BTreeSet<usize> {
    let mut m: BTreeSet<usize> = [u, v].into();
    loop {
        let distinguisher = universe.iter().copied().find(|&w| {
            if m.contains(&w) {
                return false;
            }
            let mut pairs = m.iter().map(|&a| (g.has_arc(w, a), g.has_arc(a, w)));
            let first = pairs.next().unwrap();
            pairs.any(|p| p != first)
        });
        match distinguisher {
            Some(w) => {
                m.insert(w);
            }
            None => return m,
        }
    }
}

/// All strong modules of the induced subgraph: the member sets of the
/// decomposition tree nodes.
pub fn strong_modules(g: &Digraph, universe: &BTreeSet<usize>) -> Vec<BTreeSet<usize>> {
    let tree = decompose(g, universe);
    let mut out: Vec<BTreeSet<usize>> = tree.walk().iter().map(|n| n.members.clone()).collect();
    out.sort();
    out.dedup();
    out
}

/// Modular decomposition tree of the digraph.
pub fn mdt(g: &Digraph) -> MdtNode {
    assert!(g.n > 0, "empty digraph has no decomposition");
    let universe: BTreeSet<usize> = (0..g.n).collect();
    decompose(g, &universe)
}

fn components(
    members: &BTreeSet<usize>,
    adjacent: &dyn Fn(usize, usize) -> bool,
) -> Vec<BTreeSet<usize>> {
    let mut out: Vec<BTreeSet<usize>> = vec![];
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    for &start in members {
        if seen.contains(&start) {
            continue;
        }
        let mut comp: BTreeSet<usize> = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            if !comp.insert(u) {
                continue;
            }
            seen.insert(u);
            for &v in members {
                if !comp.contains(&v) && adjacent(u, v) {
                    stack.push(v);
                }
            }
        }
        out.push(comp);
    }
    out
}

fn decompose(g: &Digraph, members: &BTreeSet<usize>) -> MdtNode {
    if members.len() == 1 {
        return MdtNode { class: MdtClass::Trivial, members: members.clone(), children: vec![] };
    }
    let node = |class: MdtClass, blocks: Vec<BTreeSet<usize>>| -> MdtNode {
        let children = blocks.iter().map(|b| decompose(g, b)).collect();
        MdtNode { class, members: members.clone(), children }
    };

    // parallel case: components under "some arc either way"
    let comps = components(members, &|u, v| g.has_arc(u, v) || g.has_arc(v, u));
    if comps.len() >= 2 {
        return node(MdtClass::AndComplete, comps);
    }
    // clique case: components under "not a double arc"
    let comps = components(members, &|u, v| !(g.has_arc(u, v) && g.has_arc(v, u)));
    if comps.len() >= 2 {
        return node(MdtClass::XorComplete, comps);
    }
    // linear case: chain of minimal one-way prefixes
    if let Some(blocks) = linear_blocks(g, members) {
        return node(MdtClass::Linear, blocks);
    }
    // prime case: children are the classes of the spanning-module relation
    let verts: Vec<usize> = members.iter().copied().collect();
    let mut parent: BTreeMap<usize, usize> = verts.iter().map(|&v| (v, v)).collect();
    fn find(parent: &mut BTreeMap<usize, usize>, v: usize) -> usize {
        let p = parent[&v];
        if p == v {
            v
        } else {
            let r = find(parent, p);
            parent.insert(v, r);
            r
        }
    }
    for i in 0..verts.len() {
        for j in i + 1..verts.len() {
            if spanning_module(g, verts[i], verts[j], members) != *members {
                let (a, b) = (find(&mut parent, verts[i]), find(&mut parent, verts[j]));
                if a != b {
                    parent.insert(a, b);
                }
            }
        }
    }
    let mut classes: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &v in &verts {
        let r = find(&mut parent, v);
        classes.entry(r).or_default().insert(v);
    }
    let blocks: Vec<BTreeSet<usize>> = {
        let mut b: Vec<BTreeSet<usize>> = classes.into_values().collect();
        b.sort_by_key(|m| *m.iter().next().unwrap());
        b
    };
    debug_assert!(blocks.len() >= 2, "prime node must have several children");
    debug_assert!(blocks.iter().all(|b| is_module(g, b, members)));
    let reps: Vec<usize> = blocks.iter().map(|b| *b.iter().next().unwrap()).collect();
    let concurrent = reps
        .iter()
        .enumerate()
        .any(|(i, &u)| reps.iter().skip(i + 1).any(|&v| !g.has_arc(u, v) && !g.has_arc(v, u)));
    node(MdtClass::Primitive { concurrent }, blocks)
}

/// Finds the chain of blocks of a linear node: the distinct minimal "prefix"
/// sets (everything inside points one-way at everything outside), which are
/// totally ordered by inclusion. Returns None when the only prefix is the
/// whole set.
fn linear_blocks(g: &Digraph, members: &BTreeSet<usize>) -> Option<Vec<BTreeSet<usize>>> {
    let mut prefixes: BTreeSet<BTreeSet<usize>> = BTreeSet::new();
    for &u in members {
        let mut p: BTreeSet<usize> = [u].into();
        loop {
            let offender = members.iter().copied().find(|&q| {
                !p.contains(&q) && p.iter().any(|&x| !g.has_arc(x, q) || g.has_arc(q, x))
            });
            match offender {
                Some(q) => {
                    p.insert(q);
                }
                None => break,
            }
        }
        prefixes.insert(p);
    }
    let mut chain: Vec<BTreeSet<usize>> = prefixes.into_iter().collect();
    chain.sort_by_key(|p| p.len());
    if chain.len() < 2 {
        return None;
    }
    debug_assert_eq!(chain.last().unwrap(), members);
    let mut blocks = vec![chain[0].clone()];
    for w in chain.windows(2) {
        debug_assert!(w[0].is_subset(&w[1]), "prefixes must nest");
        blocks.push(w[1].difference(&w[0]).copied().collect());
    }
    Some(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, arcs: &[(usize, usize)]) -> Digraph {
        let mut g = Digraph::new(n);
        for &(u, v) in arcs {
            g.add_arc(u, v);
        }
        g
    }

    /// Brute-force oracle: all modules by subset enumeration, strong ones by
    /// overlap testing, tree by containment.
    pub fn brute_force_strong_modules(g: &Digraph) -> Vec<BTreeSet<usize>> {
        let universe: BTreeSet<usize> = (0..g.n).collect();
        let mut modules: Vec<BTreeSet<usize>> = vec![];
        for mask in 1u32..(1 << g.n) {
            let set: BTreeSet<usize> = (0..g.n).filter(|&i| mask & (1 << i) != 0).collect();
            if is_module(g, &set, &universe) {
                modules.push(set);
            }
        }
        modules
            .iter()
            .filter(|m| {
                !modules.iter().any(|o| {
                    let inter = m.intersection(o).count();
                    inter > 0 && inter < m.len() && inter < o.len()
                })
            })
            .cloned()
            .collect()
    }

    #[test]
    fn chain_decomposes_to_linear_of_singletons() {
        let g = graph(3, &[(0, 1), (0, 2), (1, 2)]);
        let t = mdt(&g);
        assert_eq!(t.class, MdtClass::Linear);
        assert_eq!(t.children.len(), 3);
        let order: Vec<usize> = t.children.iter().map(|c| *c.members.iter().next().unwrap()).collect();
        assert_eq!(order, [0, 1, 2]);
    }

    #[test]
    fn double_arcs_give_xor_complete() {
        let g = graph(3, &[(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)]);
        assert_eq!(mdt(&g).class, MdtClass::XorComplete);
    }

    #[test]
    fn empty_graph_gives_and_complete() {
        let g = graph(3, &[]);
        assert_eq!(mdt(&g).class, MdtClass::AndComplete);
    }

    #[test]
    fn n_pattern_is_concurrent_primitive() {
        // 0 -> 2, 1 -> 2, 1 -> 3: the N shape
        let g = graph(4, &[(0, 2), (1, 2), (1, 3)]);
        let t = mdt(&g);
        assert_eq!(t.class, MdtClass::Primitive { concurrent: true });
        assert_eq!(t.children.len(), 4);
    }

    #[test]
    fn sequential_prime_detected() {
        // runs {0;2}, {0;3}, {1;3}: causal 0->2, 0->3, 1->3, everything else
        // double arcs (conflicts)
        let g = graph(
            4,
            &[(0, 2), (0, 3), (1, 3), (0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2)],
        );
        let t = mdt(&g);
        assert_eq!(t.class, MdtClass::Primitive { concurrent: false });
    }

    #[test]
    fn nested_modules() {
        // linear [ xor {0,1}, and {2,3} ]: conflicts inside {0,1}, nothing
        // inside {2,3}, all of {0,1} before all of {2,3}
        let g = graph(4, &[(0, 1), (1, 0), (0, 2), (0, 3), (1, 2), (1, 3)]);
        let t = mdt(&g);
        assert_eq!(t.class, MdtClass::Linear);
        assert_eq!(t.children.len(), 2);
        assert_eq!(t.children[0].class, MdtClass::XorComplete);
        assert_eq!(t.children[0].members, [0, 1].into());
        assert_eq!(t.children[1].class, MdtClass::AndComplete);
        assert_eq!(t.children[1].members, [2, 3].into());
    }

    #[test]
    fn matches_brute_force_on_small_random_graphs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let n = rng.gen_range(1..=7);
            let mut g = Digraph::new(n);
            for u in 0..n {
                for v in 0..n {
                    if u != v && rng.gen_bool(0.3) {
                        g.add_arc(u, v);
                    }
                }
            }
            let t = mdt(&g);
            let mut got: Vec<BTreeSet<usize>> = t.walk().iter().map(|x| x.members.clone()).collect();
            got.sort();
            got.dedup();
            let mut want = brute_force_strong_modules(&g);
            want.sort();
            assert_eq!(got, want, "strong module family mismatch");
        }
    }
}
