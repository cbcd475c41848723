//! Synthesis of a structured process model fragment from an ordering
//! relations graph.
//!
//! The chain goes: graph -> partial order of histories -> labeled event
//! structure (complete primes) -> occurrence net -> simplified net -> folded
//! net -> process model. Duplication of behavior that cannot be expressed
//! with one task per label appears naturally as multiple primes with the same
//! label.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::{ProcessModel, END_LABEL, START_LABEL};
use crate::net::WfNet;
use crate::org::Org;

pub const DEFAULT_HISTORY_CAP: usize = 100_000;

// ---------------------------------------------------------------------------
// posets of histories

/// Left-closed conflict-free subsets of the graph, ordered by inclusion.
/// Vertex indices refer to the originating graph.
#[derive(Debug, Clone)]
pub struct Poset {
    pub histories: Vec<BTreeSet<usize>>,
}

impl Poset {
    pub fn maximal(&self) -> Vec<&BTreeSet<usize>> {
        self.histories
            .iter()
            .filter(|h| {
                !self
                    .histories
                    .iter()
                    .any(|g| g.len() > h.len() && h.is_subset(g))
            })
            .collect()
    }
}

/// Iteratively builds all histories of the graph: starting from the empty
/// set, a vertex `v` can extend a history `h` when (1) `h` is empty or some
/// member is not pointed at by `v`, (2) `v` conflicts no member, and (3)
/// every strict-causal predecessor of `v` missing from `h` is excluded by a
/// conflict with some member. Clause (3) is what admits histories in which a
/// shared vertex occurs after only one of its alternative predecessors.
pub fn build_poset(org: &Org, cap: usize) -> Result<Poset> {
    let n = org.n();
    let arc = |a: usize, b: usize| {
        org.causal.contains(&(a, b)) || org.conflict.contains(&(a, b))
    };
    let mut seen: BTreeSet<BTreeSet<usize>> = BTreeSet::new();
    let mut queue: Vec<BTreeSet<usize>> = vec![BTreeSet::new()];
    seen.insert(BTreeSet::new());
    while let Some(h) = queue.pop() {
        for v in 0..n {
            if h.contains(&v) {
                continue;
            }
            let c1 = h.is_empty() || h.iter().any(|&a| !arc(v, a));
            let c2 = h.iter().all(|&b| !(arc(b, v) && arc(v, b)));
            let c3 = (0..n).all(|c| {
                if h.contains(&c) || !(arc(c, v) && !arc(v, c)) {
                    true
                } else {
                    h.iter().any(|&d| arc(c, d) && arc(d, c))
                }
            });
            if c1 && c2 && c3 {
                let mut h2 = h.clone();
                h2.insert(v);
                if seen.insert(h2.clone()) {
                    if seen.len() > cap {
                        return Err(Error::Guard { what: "poset histories", limit: cap });
                    }
                    queue.push(h2);
                }
            }
        }
    }
    Ok(Poset { histories: seen.into_iter().collect() })
}

/// Vertex universe of the augmented poset: graph vertices plus fresh initial
/// and final events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugVertex {
    Graph(usize),
    Initial,
    Final,
}

/// Augmented poset: every history gains the initial event, maximal histories
/// additionally spawn a completion with the final event. Vertices are encoded
/// as `usize` with `n` = initial and `n + 1` = final.
#[derive(Debug, Clone)]
pub struct AugPoset {
    pub n_graph: usize,
    pub histories: Vec<BTreeSet<usize>>,
}

impl AugPoset {
    pub fn initial(&self) -> usize {
        self.n_graph
    }

    pub fn final_vertex(&self) -> usize {
        self.n_graph + 1
    }

    pub fn decode(&self, v: usize) -> AugVertex {
        if v == self.n_graph {
            AugVertex::Initial
        } else if v == self.n_graph + 1 {
            AugVertex::Final
        } else {
            AugVertex::Graph(v)
        }
    }
}

pub fn augment(org: &Org, poset: &Poset) -> AugPoset {
    let n = org.n();
    let i = n;
    let o = n + 1;
    let mut histories: Vec<BTreeSet<usize>> = vec![BTreeSet::new()];
    for h in &poset.histories {
        let mut hi = h.clone();
        hi.insert(i);
        histories.push(hi);
    }
    for h in poset.maximal() {
        let mut ho = (*h).clone();
        ho.insert(i);
        ho.insert(o);
        histories.push(ho);
    }
    histories.sort();
    histories.dedup();
    AugPoset { n_graph: n, histories }
}

// ---------------------------------------------------------------------------
// event structures

#[derive(Debug, Clone)]
pub struct EsEvent {
    pub label: String,
    /// The history this prime corresponds to.
    pub history: BTreeSet<usize>,
    /// The single vertex introduced by this prime.
    pub vertex: usize,
}

#[derive(Debug, Clone)]
pub struct EventStructure {
    pub events: Vec<EsEvent>,
    /// Reflexive causality (partial order).
    pub leq: BTreeSet<(usize, usize)>,
    /// Symmetric irreflexive conflict.
    pub conflict: BTreeSet<(usize, usize)>,
}

impl EventStructure {
    pub fn lt(&self, a: usize, b: usize) -> bool {
        a != b && self.leq.contains(&(a, b))
    }

    pub fn n(&self) -> usize {
        self.events.len()
    }

    pub fn concurrent(&self, a: usize, b: usize) -> bool {
        a != b && !self.leq.contains(&(a, b)) && !self.leq.contains(&(b, a))
            && !self.conflict.contains(&(a, b))
    }

    /// Checks conflict heredity; used as an internal sanity assertion.
    pub fn heredity_holds(&self) -> bool {
        let n = self.n();
        (0..n).all(|e1| {
            (0..n).all(|e2| {
                (0..n).all(|e3| {
                    !(self.leq.contains(&(e2, e1)) && self.conflict.contains(&(e2, e3)))
                        || e1 == e2
                        || self.conflict.contains(&(e1, e3))
                        || e1 == e3
                })
            })
        })
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph es {\n");
        for (i, e) in self.events.iter().enumerate() {
            out.push_str(&format!("  e{i} [shape=ellipse, label=\"{}\"];\n", e.label));
        }
        for &(a, b) in &self.leq {
            if a != b && !self.covered(a, b) {
                out.push_str(&format!("  e{a} -> e{b};\n"));
            }
        }
        for &(a, b) in &self.conflict {
            if a < b {
                out.push_str(&format!("  e{a} -> e{b} [dir=none, style=dashed, color=red];\n"));
            }
        }
        out.push_str("}\n");
        out
    }

    /// True when another event sits strictly between a and b.
    fn covered(&self, a: usize, b: usize) -> bool {
        (0..self.n()).any(|c| c != a && c != b && self.lt(a, c) && self.lt(c, b))
    }
}

/// The complete primes of a finite coherent poset where lubs of consistent
/// sets are unions: the histories that are not the union of their proper
/// sub-histories.
pub fn primes(aug: &AugPoset) -> Vec<usize> {
    (0..aug.histories.len())
        .filter(|&x| {
            let hx = &aug.histories[x];
            if hx.is_empty() {
                return false;
            }
            let mut union: BTreeSet<usize> = BTreeSet::new();
            for h in &aug.histories {
                if h.len() < hx.len() && h.is_subset(hx) {
                    union.extend(h);
                }
            }
            union != *hx
        })
        .collect()
}

/// Event structure of the augmented poset: events are complete primes,
/// causality is inclusion, conflict is inconsistency, and each event is
/// labeled after the single vertex it introduces.
pub fn event_structure(org: &Org, aug: &AugPoset) -> EventStructure {
    let prime_idx = primes(aug);
    let consistent = |a: &BTreeSet<usize>, b: &BTreeSet<usize>| {
        aug.histories.iter().any(|z| a.is_subset(z) && b.is_subset(z))
    };
    let mut events = vec![];
    for &p in &prime_idx {
        let hp = &aug.histories[p];
        // the prime introduces exactly one new vertex over its sub-histories
        let mut union: BTreeSet<usize> = BTreeSet::new();
        for h in &aug.histories {
            if h.len() < hp.len() && h.is_subset(hp) {
                union.extend(h);
            }
        }
        let fresh: Vec<usize> = hp.difference(&union).copied().collect();
        assert_eq!(fresh.len(), 1, "a complete prime introduces one vertex");
        let vertex = fresh[0];
        let label = match aug.decode(vertex) {
            AugVertex::Graph(v) => org.vertices[v].label.clone(),
            AugVertex::Initial => START_LABEL.to_string(),
            AugVertex::Final => END_LABEL.to_string(),
        };
        events.push(EsEvent { label, history: hp.clone(), vertex });
    }
    let n = events.len();
    let mut leq = BTreeSet::new();
    let mut conflict = BTreeSet::new();
    for a in 0..n {
        for b in 0..n {
            if events[a].history.is_subset(&events[b].history) {
                leq.insert((a, b));
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            if a != b && !consistent(&events[a].history, &events[b].history) {
                conflict.insert((a, b));
            }
        }
    }
    let es = EventStructure { events, leq, conflict };
    debug_assert!(es.heredity_holds(), "conflict heredity");
    es
}

// ---------------------------------------------------------------------------
// occurrence nets

#[derive(Debug, Clone)]
pub struct OCondition {
    /// Producing event, if any.
    pub pre: Option<usize>,
    /// Consuming events (a conflict clique).
    pub post: BTreeSet<usize>,
    /// Single-post transitive conflict kept for folding.
    pub transitive: bool,
}

#[derive(Debug, Clone)]
pub struct OccNet {
    pub events: Vec<OEvent>,
    pub conditions: Vec<OCondition>,
}

#[derive(Debug, Clone)]
pub struct OEvent {
    pub label: String,
}

impl OccNet {
    pub fn pre_of_event(&self, e: usize) -> BTreeSet<usize> {
        self.conditions
            .iter()
            .enumerate()
            .filter(|(_, c)| c.post.contains(&e))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn post_of_event(&self, e: usize) -> BTreeSet<usize> {
        self.conditions
            .iter()
            .enumerate()
            .filter(|(_, c)| c.pre == Some(e))
            .map(|(i, _)| i)
            .collect()
    }

    /// Strict causality between events.
    pub fn lt(&self, a: usize, b: usize) -> bool {
        if a == b {
            return false;
        }
        let mut stack = vec![a];
        let mut seen = BTreeSet::new();
        while let Some(x) = stack.pop() {
            if !seen.insert(x) {
                continue;
            }
            for c in &self.conditions {
                if c.pre == Some(x) {
                    for &y in &c.post {
                        if y == b {
                            return true;
                        }
                        stack.push(y);
                    }
                }
            }
        }
        false
    }

    /// Conflict between events: distinct branching from a shared condition.
    pub fn in_conflict(&self, a: usize, b: usize) -> bool {
        if a == b || self.lt(a, b) || self.lt(b, a) {
            return false;
        }
        for c in &self.conditions {
            for &x in &c.post {
                for &y in &c.post {
                    if x != y
                        && (x == a || self.lt(x, a))
                        && (y == b || self.lt(y, b))
                    {
                        return true;
                    }
                }
            }
        }
        false
    }

    pub fn concurrent_events(&self, a: usize, b: usize) -> bool {
        a != b && !self.lt(a, b) && !self.lt(b, a) && !self.in_conflict(a, b)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph onet {\n  rankdir=LR;\n");
        for (i, e) in self.events.iter().enumerate() {
            out.push_str(&format!("  e{i} [shape=box, label=\"{}\"];\n", e.label));
        }
        for (i, c) in self.conditions.iter().enumerate() {
            let deco = if c.transitive { ", style=dashed" } else { "" };
            out.push_str(&format!("  b{i} [shape=circle, label=\"b{i}\"{deco}];\n"));
            if let Some(e) = c.pre {
                out.push_str(&format!("  e{e} -> b{i};\n"));
            }
            for &e in &c.post {
                out.push_str(&format!("  b{i} -> e{e};\n"));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Builds the canonical occurrence net of an event structure: conditions are
/// pairs of a producing event (or none) and a conflict clique of consumers
/// strictly above it.
pub fn occurrence_net(es: &EventStructure) -> OccNet {
    let n = es.n();
    // all conflict cliques, including the empty one
    let mut cliques: Vec<BTreeSet<usize>> = vec![BTreeSet::new()];
    let mut frontier: Vec<BTreeSet<usize>> = vec![BTreeSet::new()];
    while let Some(x) = frontier.pop() {
        let lo = x.iter().next_back().map_or(0, |&m| m + 1);
        for e in lo..n {
            if x.iter().all(|&y| es.conflict.contains(&(y, e))) {
                let mut x2 = x.clone();
                x2.insert(e);
                cliques.push(x2.clone());
                frontier.push(x2);
            }
        }
    }

    let mut conditions = vec![];
    for e in 0..n {
        for x in &cliques {
            if x.iter().all(|&e2| es.lt(e, e2)) {
                conditions.push(OCondition { pre: Some(e), post: x.clone(), transitive: false });
            }
        }
    }
    for x in &cliques {
        if !x.is_empty() {
            conditions.push(OCondition { pre: None, post: x.clone(), transitive: false });
        }
    }
    OccNet {
        events: es.events.iter().map(|e| OEvent { label: e.label.clone() }).collect(),
        conditions,
    }
}

/// Reads the event structure back off an occurrence net.
pub fn es_of_occnet(net: &OccNet) -> EventStructure {
    let n = net.events.len();
    let mut leq = BTreeSet::new();
    let mut conflict = BTreeSet::new();
    for a in 0..n {
        leq.insert((a, a));
        for b in 0..n {
            if net.lt(a, b) {
                leq.insert((a, b));
            }
            if a != b && net.in_conflict(a, b) {
                conflict.insert((a, b));
            }
        }
    }
    EventStructure {
        events: net
            .events
            .iter()
            .map(|e| EsEvent { label: e.label.clone(), history: BTreeSet::new(), vertex: 0 })
            .collect(),
        leq,
        conflict,
    }
}

/// Removes redundant and subsumed conditions, and transitive conflicts with
/// two or more post-events. Transitive conflicts with a single post-event are
/// kept and flagged: folding may need them as placeholder pre-conditions.
/// All predicates are evaluated on the input net.
pub fn simplify(net: &OccNet) -> OccNet {
    let m = net.conditions.len();
    let redundant = |i: usize| -> bool {
        let c = &net.conditions[i];
        if c.post.is_empty() {
            if let Some(e) = c.pre {
                return net
                    .conditions
                    .iter()
                    .enumerate()
                    .any(|(j, c2)| j != i && c2.pre == Some(e));
            }
            return false;
        }
        if c.pre.is_none() {
            return net
                .conditions
                .iter()
                .enumerate()
                .any(|(j, c2)| j != i && c2.post == c.post && c2.pre.is_some());
        }
        false
    };
    let subsumed = |i: usize| -> bool {
        let c = &net.conditions[i];
        net.conditions.iter().enumerate().any(|(j, c2)| {
            j != i && c2.pre == c.pre && c.post.is_subset(&c2.post) && c.post != c2.post
        })
    };
    // b denotes a transitive conflict when a sibling with the same pre-event
    // already covers the dependency through an earlier event: some post-event
    // of b is strictly preceded by a post-event of the sibling. For conflict
    // conditions this is heredity (the sibling denotes the conflict at the
    // earlier event); for single-post conditions it marks a causal link that
    // also follows transitively.
    let transitive = |i: usize| -> bool {
        let c = &net.conditions[i];
        net.conditions.iter().enumerate().any(|(j, c2)| {
            j != i
                && c2.pre == c.pre
                && c
                    .post
                    .iter()
                    .any(|&e| c2.post.iter().any(|&e2| net.lt(e2, e)))
        })
    };

    let mut conditions = vec![];
    for i in 0..m {
        if redundant(i) || subsumed(i) {
            continue;
        }
        let is_trans = transitive(i);
        if is_trans && net.conditions[i].post.len() >= 2 {
            continue;
        }
        let mut c = net.conditions[i].clone();
        c.transitive = is_trans;
        conditions.push(c);
    }
    OccNet { events: net.events.clone(), conditions }
}

// ---------------------------------------------------------------------------
// folding

/// A folded net: classes of events and conditions with quotient flow.
#[derive(Debug, Clone)]
pub struct FoldedNet {
    /// Transition labels, per class.
    pub transitions: Vec<String>,
    pub n_places: usize,
    /// Flow: place -> transition.
    pub pt: BTreeSet<(usize, usize)>,
    /// Flow: transition -> place.
    pub tp: BTreeSet<(usize, usize)>,
}

#[derive(Clone)]
struct FoldState {
    /// Union-find over event ids (0..n_e) and condition ids (n_e..n_e+n_b).
    parent: Vec<usize>,
    /// Transitive conditions that were consumed as a fold placeholder.
    used_transitive: BTreeSet<usize>,
}

impl FoldState {
    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let r = self.find(self.parent[x]);
            self.parent[x] = r;
            r
        } else {
            x
        }
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Folds the simplified occurrence net under a future equivalence found by
/// greedy merging with backtracking over pairing choices.
pub fn fold(net: &OccNet) -> FoldedNet {
    let n_e = net.events.len();
    let n_b = net.conditions.len();
    let cid = |c: usize| n_e + c;

    // precompute relations
    let mut conc_e = vec![vec![false; n_e]; n_e];
    for a in 0..n_e {
        for b in 0..n_e {
            conc_e[a][b] = net.concurrent_events(a, b);
        }
    }
    // condition concurrency: both can be marked in one run. b co b' iff their
    // producing events are not in conflict and neither condition's consumer
    // chain separates them; computed from event relations.
    let cond_conc = |a: usize, b: usize| -> bool {
        if a == b {
            return false;
        }
        let ca = &net.conditions[a];
        let cb = &net.conditions[b];
        // causally ordered when one's consumers lead to the other's producer
        let before = |x: &OCondition, y: &OCondition| -> bool {
            x.post.iter().any(|&e| match y.pre {
                Some(p) => e == p || net.lt(e, p),
                None => false,
            })
        };
        if before(ca, cb) || before(cb, ca) {
            return false;
        }
        // conflict when producers (or consumers) are in conflict
        let ev_a = ca.pre;
        let ev_b = cb.pre;
        if let (Some(x), Some(y)) = (ev_a, ev_b) {
            if x != y && net.in_conflict(x, y) {
                return false;
            }
        }
        true
    };

    let pre_req: Vec<BTreeSet<usize>> = (0..n_e)
        .map(|e| {
            net.pre_of_event(e)
                .into_iter()
                .filter(|&c| !net.conditions[c].transitive)
                .collect()
        })
        .collect();
    let pre_trans: Vec<BTreeSet<usize>> = (0..n_e)
        .map(|e| {
            net.pre_of_event(e)
                .into_iter()
                .filter(|&c| net.conditions[c].transitive)
                .collect()
        })
        .collect();
    let posts_e: Vec<BTreeSet<usize>> = (0..n_e).map(|e| net.post_of_event(e)).collect();

    // recursive merge with obligation propagation; returns None on failure
    fn merge_events(
        st: &FoldState,
        x: usize,
        y: usize,
        net: &OccNet,
        conc_e: &[Vec<bool>],
        cond_conc: &dyn Fn(usize, usize) -> bool,
        pre_req: &[BTreeSet<usize>],
        pre_trans: &[BTreeSet<usize>],
        posts_e: &[BTreeSet<usize>],
        n_e: usize,
        depth: usize,
    ) -> Option<FoldState> {
        let mut st = st.clone();
        if st.find(x) == st.find(y) {
            return Some(st);
        }
        if depth > 64 || net.events[x].label != net.events[y].label || conc_e[x][y] {
            return None;
        }
        st.union(x, y);
        // post pairing
        let px: Vec<usize> = posts_e[x].iter().copied().collect();
        let py: Vec<usize> = posts_e[y].iter().copied().collect();
        if px.len() != py.len() {
            return None;
        }
        let st = match_sets(
            st, &px, &py, true, net, conc_e, cond_conc, pre_req, pre_trans, posts_e, n_e, depth,
        )?;
        // pre pairing with transitive-placeholder padding
        let (big, small) = if pre_req[x].len() >= pre_req[y].len() { (x, y) } else { (y, x) };
        let need = pre_req[big].len() - pre_req[small].len();
        if need > pre_trans[small].len() {
            return None;
        }
        let bigs: Vec<usize> = pre_req[big].iter().copied().collect();
        let smalls: Vec<usize> = pre_req[small].iter().copied().collect();
        let spares: Vec<usize> = pre_trans[small].iter().copied().collect();
        // choose `need` placeholders out of the spares
        let mut choice: Vec<usize> = vec![];
        fn choose(
            spares: &[usize],
            k: usize,
            from: usize,
            choice: &mut Vec<usize>,
            st: &FoldState,
            bigs: &[usize],
            smalls: &[usize],
            net: &OccNet,
            conc_e: &[Vec<bool>],
            cond_conc: &dyn Fn(usize, usize) -> bool,
            pre_req: &[BTreeSet<usize>],
            pre_trans: &[BTreeSet<usize>],
            posts_e: &[BTreeSet<usize>],
            n_e: usize,
            depth: usize,
        ) -> Option<FoldState> {
            if choice.len() == k {
                let mut padded: Vec<usize> = smalls.to_vec();
                padded.extend(choice.iter().copied());
                let mut st2 = st.clone();
                for &c in choice.iter() {
                    st2.used_transitive.insert(c);
                }
                return match_sets(
                    st2, bigs, &padded, true, net, conc_e, cond_conc, pre_req, pre_trans, posts_e,
                    n_e, depth,
                );
            }
            for i in from..spares.len() {
                choice.push(spares[i]);
                if let Some(st2) = choose(
                    spares, k, i + 1, choice, st, bigs, smalls, net, conc_e, cond_conc, pre_req,
                    pre_trans, posts_e, n_e, depth,
                ) {
                    choice.pop();
                    return Some(st2);
                }
                choice.pop();
            }
            None
        }
        choose(
            &spares, need, 0, &mut choice, &st, &bigs, &smalls, net, conc_e, cond_conc, pre_req,
            pre_trans, posts_e, n_e, depth,
        )
    }

    fn merge_conditions(
        st: &FoldState,
        x: usize,
        y: usize,
        net: &OccNet,
        conc_e: &[Vec<bool>],
        cond_conc: &dyn Fn(usize, usize) -> bool,
        pre_req: &[BTreeSet<usize>],
        pre_trans: &[BTreeSet<usize>],
        posts_e: &[BTreeSet<usize>],
        n_e: usize,
        depth: usize,
    ) -> Option<FoldState> {
        let mut st = st.clone();
        if st.find(n_e + x) == st.find(n_e + y) {
            return Some(st);
        }
        if depth > 64 || cond_conc(x, y) {
            return None;
        }
        st.union(n_e + x, n_e + y);
        let px: Vec<usize> = net.conditions[x].post.iter().copied().collect();
        let py: Vec<usize> = net.conditions[y].post.iter().copied().collect();
        if px.len() != py.len() {
            return None;
        }
        match_sets(
            st, &px, &py, false, net, conc_e, cond_conc, pre_req, pre_trans, posts_e, n_e, depth,
        )
    }

    /// Finds a bijection between xs and ys (conditions when `conds`, else
    /// events) such that each pair merges; backtracks over pairings.
    #[allow(clippy::too_many_arguments)]
    fn match_sets(
        st: FoldState,
        xs: &[usize],
        ys: &[usize],
        conds: bool,
        net: &OccNet,
        conc_e: &[Vec<bool>],
        cond_conc: &dyn Fn(usize, usize) -> bool,
        pre_req: &[BTreeSet<usize>],
        pre_trans: &[BTreeSet<usize>],
        posts_e: &[BTreeSet<usize>],
        n_e: usize,
        depth: usize,
    ) -> Option<FoldState> {
        if xs.is_empty() {
            return Some(st);
        }
        let x = xs[0];
        for (i, &y) in ys.iter().enumerate() {
            let merged = if conds {
                merge_conditions(
                    &st, x, y, net, conc_e, cond_conc, pre_req, pre_trans, posts_e, n_e, depth + 1,
                )
            } else {
                merge_events(
                    &st, x, y, net, conc_e, cond_conc, pre_req, pre_trans, posts_e, n_e, depth + 1,
                )
            };
            if let Some(st2) = merged {
                let mut rest: Vec<usize> = ys.to_vec();
                rest.remove(i);
                if let Some(st3) = match_sets(
                    st2, &xs[1..], &rest, conds, net, conc_e, cond_conc, pre_req, pre_trans,
                    posts_e, n_e, depth,
                ) {
                    return Some(st3);
                }
            }
        }
        None
    }

    // greedy merging, deepest events first so sinks fold before their causes
    let depth_of = |e: usize| -> usize {
        (0..n_e).filter(|&x| net.lt(x, e)).count()
    };
    let mut order: Vec<usize> = (0..n_e).collect();
    order.sort_by_key(|&e| (std::cmp::Reverse(depth_of(e)), e));

    let mut st = FoldState {
        parent: (0..n_e + n_b).collect(),
        used_transitive: BTreeSet::new(),
    };
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            let (x, y) = (order[i], order[j]);
            if net.events[x].label == net.events[y].label {
                if let Some(st2) = merge_events(
                    &st, x, y, net, &conc_e, &cond_conc, &pre_req, &pre_trans, &posts_e, n_e, 0,
                ) {
                    st = st2;
                }
            }
        }
    }
    // fold leftover sink conditions and identical-post siblings
    for x in 0..n_b {
        for y in x + 1..n_b {
            if net.conditions[x].post == net.conditions[y].post && !cond_conc(x, y) {
                if let Some(st2) = merge_conditions(
                    &st, x, y, net, &conc_e, &cond_conc, &pre_req, &pre_trans, &posts_e, n_e, 0,
                ) {
                    st = st2;
                }
            }
        }
    }

    // build the quotient, dropping transitive conditions never used as a
    // folding placeholder
    let mut drop: BTreeSet<usize> = BTreeSet::new();
    for c in 0..n_b {
        if net.conditions[c].transitive {
            let mut stc = st.clone();
            let class_used = (0..n_b).any(|c2| {
                st.used_transitive.contains(&c2) && {
                    let r1 = stc.find(cid(c));
                    let r2 = stc.find(cid(c2));
                    r1 == r2
                }
            });
            let class_has_required = (0..n_b).any(|c2| {
                !net.conditions[c2].transitive && {
                    let r1 = stc.find(cid(c));
                    let r2 = stc.find(cid(c2));
                    r1 == r2
                }
            });
            if !class_used && !class_has_required {
                drop.insert(c);
            }
        }
    }

    let mut stf = st.clone();
    let mut e_class: BTreeMap<usize, usize> = BTreeMap::new();
    let mut transitions = vec![];
    for e in 0..n_e {
        let r = stf.find(e);
        let next = e_class.len();
        let id = *e_class.entry(r).or_insert(next);
        if id == transitions.len() {
            transitions.push(net.events[e].label.clone());
        }
    }
    let mut b_class: BTreeMap<usize, usize> = BTreeMap::new();
    let mut n_places = 0;
    for c in 0..n_b {
        if drop.contains(&c) {
            continue;
        }
        let r = stf.find(cid(c));
        b_class.entry(r).or_insert_with(|| {
            let id = n_places;
            n_places += 1;
            id
        });
    }
    let mut pt = BTreeSet::new();
    let mut tp = BTreeSet::new();
    for c in 0..n_b {
        if drop.contains(&c) {
            continue;
        }
        let pc = b_class[&stf.find(cid(c))];
        if let Some(e) = net.conditions[c].pre {
            tp.insert((e_class[&stf.find(e)], pc));
        }
        for &e in &net.conditions[c].post {
            pt.insert((pc, e_class[&stf.find(e)]));
        }
    }
    FoldedNet { transitions, n_places, pt, tp }
}

// ---------------------------------------------------------------------------
// back to nets and models

/// Views an (unfolded) occurrence net as a workflow net, for replay and
/// run-set comparison. Requires a unique initial condition.
pub fn occnet_to_wfnet(net: &OccNet) -> Result<WfNet> {
    let inits: Vec<usize> = net
        .conditions
        .iter()
        .enumerate()
        .filter(|(_, c)| c.pre.is_none())
        .map(|(i, _)| i)
        .collect();
    if inits.len() != 1 {
        return Err(Error::NotMappable(format!(
            "{} initial conditions, expected one",
            inits.len()
        )));
    }
    let sinks: Vec<usize> = net
        .conditions
        .iter()
        .enumerate()
        .filter(|(_, c)| c.post.is_empty())
        .map(|(i, _)| i)
        .collect();
    let sink_name = format!("b{}", sinks.first().copied().unwrap_or(inits[0]));
    let mut wf = WfNet::new(&format!("b{}", inits[0]), &sink_name);
    for (i, _) in net.conditions.iter().enumerate() {
        wf.add_place(&format!("b{i}"));
    }
    for (e, ev) in net.events.iter().enumerate() {
        wf.add_transition(&format!("e{e}"), Some(&ev.label), None);
    }
    for (i, c) in net.conditions.iter().enumerate() {
        if let Some(e) = c.pre {
            wf.add_flow_tp(&format!("e{e}"), &format!("b{i}"));
        }
        for &e in &c.post {
            wf.add_flow_pt(&format!("b{i}"), &format!("e{e}"));
        }
    }
    Ok(wf)
}

/// Views a folded net as a workflow net. The source (sink) is the unique
/// place with no producer (consumer).
pub fn folded_to_wfnet(net: &FoldedNet) -> Result<WfNet> {
    let sources: Vec<usize> = (0..net.n_places)
        .filter(|&p| !net.tp.iter().any(|&(_, q)| q == p))
        .collect();
    let sinks: Vec<usize> = (0..net.n_places)
        .filter(|&p| !net.pt.iter().any(|&(q, _)| q == p))
        .collect();
    if sources.len() != 1 || sinks.len() != 1 {
        return Err(Error::NotMappable(format!(
            "folded net has {} sources and {} sinks",
            sources.len(),
            sinks.len()
        )));
    }
    let mut wf = WfNet::new(&format!("p{}", sources[0]), &format!("p{}", sinks[0]));
    for p in 0..net.n_places {
        wf.add_place(&format!("p{p}"));
    }
    for (t, label) in net.transitions.iter().enumerate() {
        wf.add_transition(&format!("t{t}"), Some(label), None);
    }
    for &(p, t) in &net.pt {
        wf.add_flow_pt(&format!("p{p}"), &format!("t{t}"));
    }
    for &(t, p) in &net.tp {
        wf.add_flow_tp(&format!("t{t}"), &format!("p{p}"));
    }
    Ok(wf)
}

/// Artifacts of one synthesis run, for inspection and dumping.
#[derive(Debug)]
pub struct Synthesis {
    pub poset: Poset,
    pub aug: AugPoset,
    pub es: EventStructure,
    pub occnet: OccNet,
    pub simplified: OccNet,
    pub folded: FoldedNet,
    pub model: ProcessModel,
}

/// Synthesizes a process model fragment realizing the behavior of the
/// ordering relations graph. The fragment starts and ends with boundary
/// tasks labeled with the reserved start/end names.
pub fn synthesize(org: &Org, history_cap: usize) -> Result<Synthesis> {
    let poset = build_poset(org, history_cap)?;
    let aug = augment(org, &poset);
    let es = event_structure(org, &aug);
    let occnet = occurrence_net(&es);
    let simplified = simplify(&occnet);
    let folded = fold(&simplified);
    let wf = folded_to_wfnet(&folded)?;
    // the fold must not change behavior; refuse rather than emit a wrong model
    let before = crate::equivalence::net_run_set(
        &occnet_to_wfnet(&simplified)?,
        crate::unfold::DEFAULT_EVENT_CAP,
    )?;
    let after = crate::equivalence::net_run_set(&wf, crate::unfold::DEFAULT_EVENT_CAP)?;
    if before != after {
        return Err(Error::NotMappable("folding changed the run set".into()));
    }
    let model = crate::net::net_to_model(&wf)?;
    Ok(Synthesis { poset, aug, es, occnet, simplified, folded, model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::net::model_to_wfnet;
    use crate::org::build_org;
    use crate::unfold::{unfold, UnfoldOptions, DEFAULT_EVENT_CAP};

    fn org_of(m: &crate::model::ProcessModel) -> Org {
        let p = unfold(&model_to_wfnet(m), UnfoldOptions::default()).unwrap();
        build_org(&p, &["i", "o"])
    }

    #[test]
    fn poset_of_conflict_pair() {
        let org = org_of(&fixtures::xor_bond());
        let poset = build_poset(&org, DEFAULT_HISTORY_CAP).unwrap();
        assert_eq!(poset.histories.len(), 3); // {}, {a}, {b}
        let aug = augment(&org, &poset);
        assert_eq!(aug.histories.len(), 6);
    }

    #[test]
    fn poset_admits_shared_vertex_after_one_alternative() {
        let org = org_of(&fixtures::overlapping_xor_a());
        let poset = build_poset(&org, DEFAULT_HISTORY_CAP).unwrap();
        let hs: BTreeSet<BTreeSet<String>> = poset
            .histories
            .iter()
            .map(|h| h.iter().map(|&v| org.vertices[v].label.clone()).collect())
            .collect();
        let mk = |ls: &[&str]| ls.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
        assert!(hs.contains(&mk(&[])));
        assert!(hs.contains(&mk(&["a"])));
        assert!(hs.contains(&mk(&["b"])));
        assert!(hs.contains(&mk(&["a", "c"])));
        assert!(hs.contains(&mk(&["a", "d"])), "shared d after a");
        assert!(hs.contains(&mk(&["b", "d"])));
        assert_eq!(hs.len(), 6);
    }

    #[test]
    fn primes_duplicate_shared_vertex() {
        let org = org_of(&fixtures::overlapping_xor_a());
        let poset = build_poset(&org, DEFAULT_HISTORY_CAP).unwrap();
        let aug = augment(&org, &poset);
        let es = event_structure(&org, &aug);
        let d_events = es.events.iter().filter(|e| e.label == "d").count();
        assert_eq!(d_events, 2, "d occurs after a and after b");
        let o_events = es.events.iter().filter(|e| e.label == crate::model::END_LABEL).count();
        assert_eq!(o_events, 3, "one completion per maximal history");
        assert_eq!(es.n(), 9);
    }

    #[test]
    fn occurrence_net_roundtrips_event_structure() {
        for m in [fixtures::overlapping_xor_a(), fixtures::xor_bond(), fixtures::n_shape()] {
            let org = org_of(&m);
            let poset = build_poset(&org, DEFAULT_HISTORY_CAP).unwrap();
            let aug = augment(&org, &poset);
            let es = event_structure(&org, &aug);
            let net = occurrence_net(&es);
            let back = es_of_occnet(&net);
            let strip = |leq: &BTreeSet<(usize, usize)>| -> BTreeSet<(usize, usize)> {
                leq.iter().filter(|(a, b)| a != b).copied().collect()
            };
            assert_eq!(strip(&es.leq), strip(&back.leq), "causality preserved");
            assert_eq!(es.conflict, back.conflict, "conflict preserved");
        }
    }

    #[test]
    fn simplify_preserves_relations() {
        for m in [fixtures::overlapping_xor_a(), fixtures::n_shape(), fixtures::m_shape()] {
            let org = org_of(&m);
            let poset = build_poset(&org, DEFAULT_HISTORY_CAP).unwrap();
            let aug = augment(&org, &poset);
            let es = event_structure(&org, &aug);
            let net = occurrence_net(&es);
            let simp = simplify(&net);
            for a in 0..net.events.len() {
                for b in 0..net.events.len() {
                    assert_eq!(net.lt(a, b), simp.lt(a, b), "causality {a},{b}");
                    assert_eq!(net.in_conflict(a, b), simp.in_conflict(a, b), "conflict {a},{b}");
                }
            }
        }
    }

    #[test]
    fn synthesized_fragment_preserves_runs() {
        for (name, m) in [
            ("xor-bond", fixtures::xor_bond()),
            ("overlapping-xor-a", fixtures::overlapping_xor_a()),
            ("n-shape", fixtures::n_shape()),
        ] {
            let org = org_of(&m);
            let syn = synthesize(&org, DEFAULT_HISTORY_CAP).unwrap_or_else(|e| panic!("{name}: {e}"));
            // reference: the original model with boundary tasks renamed
            let mut doc: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
            for node in doc["nodes"].as_array_mut().unwrap() {
                if node["name"] == "i" {
                    node["name"] = crate::model::START_LABEL.into();
                }
                if node["name"] == "o" {
                    node["name"] = crate::model::END_LABEL.into();
                }
            }
            let reference = crate::model::ProcessModel::parse(&doc.to_string()).unwrap();
            let eq = crate::equivalence::equivalent(&syn.model, &reference, DEFAULT_EVENT_CAP)
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(eq, "{name}: synthesized fragment not equivalent\n{}", syn.model.to_json());
        }
    }
}
