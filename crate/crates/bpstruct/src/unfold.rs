//! Branching-process unfolding of a workflow net into a complete prefix.
//!
//! Events are appended in an adequate total order (local configuration size,
//! then the sorted transition image, then Foata levels), so the first event
//! reaching a marking is the canonical representative for later cutoffs. A
//! cutoff only truncates the prefix when it is healthy: the part of its cut
//! not produced by the event itself must coincide with that of the
//! corresponding event, which guarantees the surrounding concurrency context
//! matches and the prefix stays complete.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::error::{Error, Result};
use crate::model::NodeId;
use crate::net::{PlaceId, TransId, WfNet};

pub const DEFAULT_EVENT_CAP: usize = 100_000;

#[derive(Debug, Clone)]
pub struct Event {
    pub id: String,
    pub trans: TransId,
    pub label: Option<String>,
    pub origin: Option<NodeId>,
    pub pre: BTreeSet<usize>,
    pub post: BTreeSet<usize>,
    /// Local configuration: this event plus its causal past.
    pub local: BTreeSet<usize>,
}

#[derive(Debug, Clone)]
pub struct Condition {
    pub id: String,
    pub place: PlaceId,
    pub pre: Option<usize>,
    pub post: BTreeSet<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnfoldOptions {
    /// When false, the net is unfolded exhaustively (no truncation); only
    /// sensible for acyclic nets.
    pub use_cutoffs: bool,
    pub max_events: usize,
}

impl Default for UnfoldOptions {
    fn default() -> Self {
        UnfoldOptions { use_cutoffs: true, max_events: DEFAULT_EVENT_CAP }
    }
}

#[derive(Debug)]
pub struct Prefix {
    pub events: Vec<Event>,
    pub conditions: Vec<Condition>,
    /// Initial conditions (the minimal elements).
    pub min: BTreeSet<usize>,
    /// Every event whose local marking was seen before, with its
    /// corresponding event.
    pub cutoffs: BTreeMap<usize, usize>,
    /// The subset of cutoffs that truncated the prefix.
    pub healthy: BTreeSet<usize>,
}

/// Adequate-order key over local configurations.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct ConfigKey {
    size: usize,
    image: Vec<TransId>,
    foata: Vec<Vec<TransId>>,
}

impl Prefix {
    /// Cut of a configuration: conditions holding after executing it.
    pub fn cut(&self, config: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut cut: BTreeSet<usize> = self.min.clone();
        for &e in config {
            cut.extend(&self.events[e].post);
        }
        for &e in config {
            for c in &self.events[e].pre {
                cut.remove(c);
            }
        }
        cut
    }

    /// Marking reached by a configuration, as a sorted place multiset.
    pub fn mark(&self, config: &BTreeSet<usize>) -> Vec<PlaceId> {
        let mut m: Vec<PlaceId> = self.cut(config).iter().map(|&c| self.conditions[c].place.clone()).collect();
        m.sort();
        m
    }

    /// Strict causality between events.
    pub fn causal(&self, a: usize, b: usize) -> bool {
        a != b && self.events[b].local.contains(&a)
    }

    pub fn conflict(&self, a: usize, b: usize) -> bool {
        if a == b || self.causal(a, b) || self.causal(b, a) {
            return false;
        }
        // two events of the combined past sharing an input condition
        let joint: Vec<usize> = self.events[a].local.union(&self.events[b].local).copied().collect();
        let mut consumed: BTreeSet<usize> = BTreeSet::new();
        for &e in &joint {
            for &c in &self.events[e].pre {
                if !consumed.insert(c) {
                    return true;
                }
            }
        }
        false
    }

    pub fn concurrent(&self, a: usize, b: usize) -> bool {
        a != b && !self.causal(a, b) && !self.causal(b, a) && !self.conflict(a, b)
    }

    /// Events with an observable label, in insertion order.
    pub fn observable_events(&self) -> Vec<usize> {
        (0..self.events.len()).filter(|&e| self.events[e].label.is_some()).collect()
    }

    pub fn event_by_id(&self, id: &str) -> Option<usize> {
        self.events.iter().position(|e| e.id == id)
    }

    pub fn event_by_label(&self, label: &str) -> Option<usize> {
        self.events.iter().position(|e| e.label.as_deref() == Some(label))
    }

    /// All maximal configurations, via the token game with memoization on
    /// cuts. Intended for exhaustive prefixes of acyclic nets.
    pub fn maximal_configurations(&self) -> Vec<BTreeSet<usize>> {
        let mut terminal: BTreeSet<BTreeSet<usize>> = BTreeSet::new();
        let mut seen: BTreeSet<BTreeSet<usize>> = BTreeSet::new();
        let mut stack = vec![self.min.clone()];
        while let Some(cut) = stack.pop() {
            if !seen.insert(cut.clone()) {
                continue;
            }
            let mut any = false;
            for e in &self.events {
                // conditions are single-use, so preset availability is
                // exactly "enabled and not yet fired"
                if e.pre.iter().all(|c| cut.contains(c)) {
                    any = true;
                    let mut next = cut.clone();
                    for c in &e.pre {
                        next.remove(c);
                    }
                    next.extend(&e.post);
                    stack.push(next);
                }
            }
            if !any {
                terminal.insert(cut);
            }
        }
        terminal.into_iter().map(|cut| self.config_of_cut(&cut)).collect()
    }

    /// The configuration whose execution reaches the given cut.
    fn config_of_cut(&self, cut: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut config: BTreeSet<usize> = BTreeSet::new();
        let mut stack: Vec<usize> = cut.iter().filter_map(|&c| self.conditions[c].pre).collect();
        while let Some(e) = stack.pop() {
            if config.insert(e) {
                for &c in &self.events[e].pre {
                    if let Some(p) = self.conditions[c].pre {
                        stack.push(p);
                    }
                }
            }
        }
        config
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph prefix {\n  rankdir=LR;\n");
        for c in &self.conditions {
            out.push_str(&format!("  \"{}\" [shape=circle, label=\"{}\\n{}\"];\n", c.id, c.id, c.place));
        }
        for (i, e) in self.events.iter().enumerate() {
            let label = e.label.as_deref().unwrap_or("τ");
            let deco = if self.healthy.contains(&i) {
                ", style=dashed"
            } else if self.cutoffs.contains_key(&i) {
                ", style=dotted"
            } else {
                ""
            };
            out.push_str(&format!("  \"{}\" [shape=box, label=\"{}\\n{}\"{}];\n", e.id, e.id, label, deco));
        }
        for e in &self.events {
            for &c in &e.pre {
                out.push_str(&format!("  \"{}\" -> \"{}\";\n", self.conditions[c].id, e.id));
            }
            for &c in &e.post {
                out.push_str(&format!("  \"{}\" -> \"{}\";\n", e.id, self.conditions[c].id));
            }
        }
        for (&e, &corr) in &self.cutoffs {
            out.push_str(&format!(
                "  \"{}\" -> \"{}\" [style=dashed, color=gray, constraint=false, label=\"corr\"];\n",
                self.events[e].id, self.events[corr].id
            ));
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> String {
        use serde::Serialize;
        #[derive(Serialize)]
        struct EventDoc<'a> {
            id: &'a str,
            trans: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            label: Option<&'a str>,
            pre: Vec<&'a str>,
            post: Vec<&'a str>,
            #[serde(skip_serializing_if = "Option::is_none")]
            cutoff_of: Option<&'a str>,
            #[serde(skip_serializing_if = "std::ops::Not::not")]
            healthy: bool,
        }
        #[derive(Serialize)]
        struct ConditionDoc<'a> {
            id: &'a str,
            place: &'a str,
        }
        #[derive(Serialize)]
        struct PrefixDoc<'a> {
            format: &'a str,
            conditions: Vec<ConditionDoc<'a>>,
            events: Vec<EventDoc<'a>>,
        }
        let doc = PrefixDoc {
            format: "bpstruct-prefix/1",
            conditions: self
                .conditions
                .iter()
                .map(|c| ConditionDoc { id: &c.id, place: &c.place })
                .collect(),
            events: self
                .events
                .iter()
                .enumerate()
                .map(|(i, e)| EventDoc {
                    id: &e.id,
                    trans: &e.trans,
                    label: e.label.as_deref(),
                    pre: e.pre.iter().map(|&c| self.conditions[c].id.as_str()).collect(),
                    post: e.post.iter().map(|&c| self.conditions[c].id.as_str()).collect(),
                    cutoff_of: self.cutoffs.get(&i).map(|&j| self.events[j].id.as_str()),
                    healthy: self.healthy.contains(&i),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("prefix serializes");
        s.push('\n');
        s
    }
}

/// Adequate-order key of the local configuration a queued extension would
/// have: the existing causal past plus the new event itself.
fn extension_key(prefix: &Prefix, trans: &TransId, preset: &[usize]) -> ConfigKey {
    let mut local: BTreeSet<usize> = BTreeSet::new();
    let mut parents: BTreeSet<usize> = BTreeSet::new();
    for &b in preset {
        if let Some(p) = prefix.conditions[b].pre {
            local.extend(&prefix.events[p].local);
            parents.insert(p);
        }
    }
    let mut image: Vec<TransId> = local.iter().map(|&e| prefix.events[e].trans.clone()).collect();
    image.push(trans.clone());
    image.sort();

    let mut foata = vec![];
    let mut remaining = local.clone();
    let mut new_pending = true;
    while !remaining.is_empty() || new_pending {
        let level: BTreeSet<usize> = remaining
            .iter()
            .copied()
            .filter(|&e| {
                prefix.events[e]
                    .pre
                    .iter()
                    .all(|&c| prefix.conditions[c].pre.map_or(true, |p| !remaining.contains(&p)))
            })
            .collect();
        let mut labels: Vec<TransId> = level.iter().map(|&e| prefix.events[e].trans.clone()).collect();
        if new_pending && parents.iter().all(|p| !remaining.contains(p)) {
            labels.push(trans.clone());
            new_pending = false;
        }
        labels.sort();
        debug_assert!(!labels.is_empty(), "acyclic causality");
        foata.push(labels);
        for e in level {
            remaining.remove(&e);
        }
    }
    ConfigKey { size: local.len() + 1, image, foata }
}

/// Unfolds a workflow net into a complete finite prefix.
pub fn unfold(net: &WfNet, opts: UnfoldOptions) -> Result<Prefix> {
    let mut prefix = Prefix {
        events: vec![],
        conditions: vec![],
        min: BTreeSet::new(),
        cutoffs: BTreeMap::new(),
        healthy: BTreeSet::new(),
    };
    // concurrency sets per condition, and taint below healthy cutoffs
    let mut co: Vec<BTreeSet<usize>> = vec![];
    let mut tainted: BTreeSet<usize> = BTreeSet::new();
    // conditions grouped by place, for extension search
    let mut by_place: BTreeMap<PlaceId, Vec<usize>> = BTreeMap::new();

    let add_condition = |prefix: &mut Prefix,
                             co: &mut Vec<BTreeSet<usize>>,
                             by_place: &mut BTreeMap<PlaceId, Vec<usize>>,
                             place: &str,
                             pre: Option<usize>|
     -> usize {
        let idx = prefix.conditions.len();
        prefix.conditions.push(Condition {
            id: format!("c{}", idx + 1),
            place: place.to_string(),
            pre,
            post: BTreeSet::new(),
        });
        co.push(BTreeSet::new());
        by_place.entry(place.to_string()).or_default().push(idx);
        idx
    };

    for (p, &count) in &net.initial_marking() {
        for _ in 0..count {
            let idx = add_condition(&mut prefix, &mut co, &mut by_place, p, None);
            prefix.min.insert(idx);
        }
    }
    // initial conditions are pairwise concurrent
    let init: Vec<usize> = prefix.min.iter().copied().collect();
    for &a in &init {
        for &b in &init {
            if a != b {
                co[a].insert(b);
            }
        }
    }

    #[derive(PartialEq, Eq, PartialOrd, Ord)]
    struct QueuedExtension {
        key: ConfigKey,
        trans: TransId,
        preset: Vec<usize>,
    }

    let mut queue: BinaryHeap<Reverse<QueuedExtension>> = BinaryHeap::new();
    let mut queued: BTreeSet<(TransId, Vec<usize>)> = BTreeSet::new();
    let mut mark_owner: BTreeMap<Vec<PlaceId>, usize> = BTreeMap::new();

    // finds extensions of transition t whose preset uses condition `seed`
    let find_extensions = |prefix: &Prefix,
                           co: &[BTreeSet<usize>],
                           by_place: &BTreeMap<PlaceId, Vec<usize>>,
                           t: &TransId,
                           seed: usize|
     -> Vec<Vec<usize>> {
        let places: Vec<&PlaceId> = net.pre_t(t).iter().collect();
        let seed_place = &prefix.conditions[seed].place;
        debug_assert!(places.iter().any(|p| *p == seed_place));
        let mut found = vec![];
        let mut chosen: Vec<usize> = vec![];
        fn rec(
            places: &[&PlaceId],
            i: usize,
            chosen: &mut Vec<usize>,
            seed: usize,
            seed_place: &str,
            co: &[BTreeSet<usize>],
            by_place: &BTreeMap<PlaceId, Vec<usize>>,
            found: &mut Vec<Vec<usize>>,
        ) {
            if i == places.len() {
                if chosen.contains(&seed) {
                    let mut v = chosen.clone();
                    v.sort_unstable();
                    found.push(v);
                }
                return;
            }
            let candidates: Vec<usize> = if places[i].as_str() == seed_place {
                vec![seed]
            } else {
                by_place.get(places[i]).map_or(vec![], |v| v.clone())
            };
            for c in candidates {
                if chosen.iter().all(|&x| co[x].contains(&c)) {
                    chosen.push(c);
                    rec(places, i + 1, chosen, seed, seed_place, co, by_place, found);
                    chosen.pop();
                }
            }
        }
        rec(&places, 0, &mut chosen, seed, seed_place, co, by_place, &mut found);
        found.sort();
        found.dedup();
        found
    };

    // seed the queue from the initial conditions
    let mut fresh: Vec<usize> = init.clone();
    loop {
        for &c in &fresh {
            let place = prefix.conditions[c].place.clone();
            for t in net.post_p(&place) {
                for preset in find_extensions(&prefix, &co, &by_place, &t, c) {
                    let seen_key = (t.clone(), preset.clone());
                    if queued.insert(seen_key) {
                        let key = extension_key(&prefix, &t, &preset);
                        queue.push(Reverse(QueuedExtension { key, trans: t.clone(), preset }));
                    }
                }
            }
        }
        fresh.clear();

        let Some(Reverse(ext)) = queue.pop() else { break };
        if ext.preset.iter().any(|c| tainted.contains(c)) {
            continue;
        }
        if prefix.events.len() >= opts.max_events {
            return Err(Error::Guard { what: "unfolding events", limit: opts.max_events });
        }

        let ei = prefix.events.len();
        let mut local: BTreeSet<usize> = BTreeSet::new();
        for &b in &ext.preset {
            if let Some(p) = prefix.conditions[b].pre {
                local.extend(&prefix.events[p].local);
            }
        }
        local.insert(ei);
        let tr = &net.transitions[&ext.trans];
        prefix.events.push(Event {
            id: format!("e{}", ei + 1),
            trans: ext.trans.clone(),
            label: tr.label.clone(),
            origin: tr.origin.clone(),
            pre: ext.preset.iter().copied().collect(),
            post: BTreeSet::new(),
            local,
        });
        for &b in &ext.preset {
            prefix.conditions[b].post.insert(ei);
        }

        // post conditions, with incremental concurrency
        let mut shared: Option<BTreeSet<usize>> = None;
        for &b in &ext.preset {
            let s = &co[b];
            shared = Some(match shared {
                None => s.clone(),
                Some(acc) => acc.intersection(s).copied().collect(),
            });
        }
        let mut shared = shared.unwrap_or_default();
        for &b in &ext.preset {
            shared.remove(&b);
        }
        let mut new_conds = vec![];
        for p in net.post_t(&ext.trans).clone() {
            let c = add_condition(&mut prefix, &mut co, &mut by_place, &p, Some(ei));
            prefix.events[ei].post.insert(c);
            new_conds.push(c);
        }
        for &c in &new_conds {
            for &s in &shared {
                co[c].insert(s);
                co[s].insert(c);
            }
            for &c2 in &new_conds {
                if c2 != c {
                    co[c].insert(c2);
                }
            }
        }

        // cutoff bookkeeping
        let local = prefix.events[ei].local.clone();
        let marking = prefix.mark(&local);
        match mark_owner.get(&marking) {
            None => {
                mark_owner.insert(marking, ei);
                fresh.extend(&new_conds);
            }
            Some(&corr) => {
                prefix.cutoffs.insert(ei, corr);
                let healthy = {
                    let mut cut_e = prefix.cut(&local);
                    for c in &prefix.events[ei].post {
                        cut_e.remove(c);
                    }
                    let corr_local = prefix.events[corr].local.clone();
                    let mut cut_c = prefix.cut(&corr_local);
                    for c in &prefix.events[corr].post {
                        cut_c.remove(c);
                    }
                    cut_e == cut_c
                };
                if healthy && opts.use_cutoffs {
                    prefix.healthy.insert(ei);
                    tainted.extend(&new_conds);
                } else {
                    fresh.extend(&new_conds);
                }
            }
        }
    }

    Ok(prefix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::net::model_to_wfnet;

    fn unfold_model(m: &crate::model::ProcessModel) -> Prefix {
        unfold(&model_to_wfnet(m), UnfoldOptions::default()).unwrap()
    }

    #[test]
    fn sequence_unfolds_to_chain() {
        let p = unfold_model(&fixtures::sequence());
        assert_eq!(p.events.len(), 4);
        assert!(p.cutoffs.is_empty());
        let labels: Vec<_> = p.events.iter().map(|e| e.label.clone().unwrap()).collect();
        assert_eq!(labels, ["i", "a", "b", "o"]);
    }

    #[test]
    fn xor_join_truncates_one_branch() {
        let p = unfold_model(&fixtures::xor_join_simple());
        assert_eq!(p.cutoffs.len(), 1);
        let (&cut, &corr) = p.cutoffs.iter().next().unwrap();
        assert!(p.healthy.contains(&cut));
        assert_eq!(p.events[cut].label.as_deref(), Some("b"));
        assert_eq!(p.events[corr].label.as_deref(), Some("a"));
        // the continuation after the join is unfolded once
        let o_events = p.events.iter().filter(|e| e.label.as_deref() == Some("o")).count();
        assert_eq!(o_events, 1);
    }

    #[test]
    fn and_bond_events_concurrent() {
        let p = unfold_model(&fixtures::and_bond());
        assert!(p.cutoffs.is_empty());
        let a = p.event_by_label("a").unwrap();
        let b = p.event_by_label("b").unwrap();
        assert!(p.concurrent(a, b));
        let i = p.event_by_label("i").unwrap();
        assert!(p.causal(i, a));
    }

    #[test]
    fn entangled_prefix_has_expected_shape() {
        let p = unfold_model(&fixtures::entangled_xor_and());
        // each observable task unfolds into exactly one event
        for l in ["i", "a", "b", "c", "d", "e", "f", "o"] {
            let n = p.events.iter().filter(|e| e.label.as_deref() == Some(l)).count();
            assert_eq!(n, 1, "label {l}");
        }
        assert_eq!(p.cutoffs.len(), 2);
        assert_eq!(p.healthy.len(), 2);
        let (a, b, c, d) = (
            p.event_by_label("a").unwrap(),
            p.event_by_label("b").unwrap(),
            p.event_by_label("c").unwrap(),
            p.event_by_label("d").unwrap(),
        );
        let (e, f) = (p.event_by_label("e").unwrap(), p.event_by_label("f").unwrap());
        assert!(p.conflict(a, b));
        assert!(p.causal(a, c));
        assert!(p.causal(b, d));
        assert!(p.conflict(a, d), "d only unfolds on the b side");
        assert!(p.concurrent(e, f));
        assert!(p.conflict(d, e), "proper causality to e is only via cutoffs");
    }

    #[test]
    fn exhaustive_unfolding_enumerates_runs() {
        let net = model_to_wfnet(&fixtures::overlapping_xor_a());
        let p = unfold(&net, UnfoldOptions { use_cutoffs: false, max_events: 10_000 }).unwrap();
        assert!(p.healthy.is_empty());
        let runs = p.maximal_configurations();
        let mut traces: Vec<Vec<String>> = runs
            .iter()
            .map(|cfg| {
                let mut labels: Vec<String> = cfg
                    .iter()
                    .filter_map(|&e| p.events[e].label.clone())
                    .collect();
                labels.sort();
                labels
            })
            .collect();
        traces.sort();
        traces.dedup();
        let expect: Vec<Vec<String>> = vec![
            vec!["a", "c", "i", "o"],
            vec!["a", "d", "i", "o"],
            vec!["b", "d", "i", "o"],
        ]
        .into_iter()
        .map(|v| v.into_iter().map(String::from).collect())
        .collect();
        assert_eq!(traces, expect);
    }

    #[test]
    fn local_markings_match_token_replay() {
        for (name, m) in fixtures::named_corpus() {
            let net = model_to_wfnet(&m);
            let p = unfold(&net, UnfoldOptions::default()).unwrap();
            for ev in 0..p.events.len() {
                let local = p.events[ev].local.clone();
                // replay the local configuration in causal order
                let mut order: Vec<usize> = local.iter().copied().collect();
                order.sort_by_key(|&e| p.events[e].local.len());
                let mut marking = net.initial_marking();
                for e in order {
                    marking = net.fire(&marking, &p.events[e].trans);
                }
                let mut replayed: Vec<String> = marking
                    .iter()
                    .flat_map(|(pl, &n)| std::iter::repeat(pl.clone()).take(n as usize))
                    .collect();
                replayed.sort();
                assert_eq!(replayed, p.mark(&local), "{name} event {ev}");
            }
        }
    }
}
