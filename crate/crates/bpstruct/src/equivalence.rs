//! Behavioral equivalence of process models, compared as sets of runs.
//!
//! A run is the labeled partial order (pomset) of observable events of one
//! maximal configuration of the exhaustive unfolding. Two models are
//! equivalent when their run sets coincide up to label-preserving order
//! isomorphism; runs are canonicalized by minimizing the encoding over
//! permutations within equal-label groups.

use std::collections::BTreeSet;

use crate::error::Result;
use crate::model::ProcessModel;
use crate::net::model_to_wfnet;
use crate::unfold::{unfold, UnfoldOptions};

/// Canonical encoding of one run.
pub type RunKey = String;

/// The set of runs of a model, canonicalized.
pub fn run_set(m: &ProcessModel, max_events: usize) -> Result<BTreeSet<RunKey>> {
    net_run_set(&model_to_wfnet(m), max_events)
}

/// The set of runs of a workflow net, canonicalized.
pub fn net_run_set(net: &crate::net::WfNet, max_events: usize) -> Result<BTreeSet<RunKey>> {
    let prefix = unfold(net, UnfoldOptions { use_cutoffs: false, max_events })?;
    let mut runs = BTreeSet::new();
    for config in prefix.maximal_configurations() {
        let events: Vec<usize> = config
            .iter()
            .copied()
            .filter(|&e| prefix.events[e].label.is_some())
            .collect();
        let labels: Vec<String> = events
            .iter()
            .map(|&e| prefix.events[e].label.clone().unwrap())
            .collect();
        let n = events.len();
        let mut order: Vec<Vec<bool>> = vec![vec![false; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i != j && prefix.causal(events[i], events[j]) {
                    order[i][j] = true;
                }
            }
        }
        runs.insert(canonical_pomset(&labels, &order));
    }
    Ok(runs)
}

/// True iff the two models have the same run set.
pub fn equivalent(a: &ProcessModel, b: &ProcessModel, max_events: usize) -> Result<bool> {
    Ok(run_set(a, max_events)? == run_set(b, max_events)?)
}

/// Minimal encoding of a labeled partial order over all label-preserving
/// renumberings. Vertices are grouped by label; only permutations within a
/// group can change the encoding.
pub fn canonical_pomset(labels: &[String], order: &[Vec<bool>]) -> RunKey {
    let n = labels.len();
    // base order: sort vertex indices by label
    let mut base: Vec<usize> = (0..n).collect();
    base.sort_by(|&a, &b| labels[a].cmp(&labels[b]));
    // group boundaries over the sorted sequence
    let mut groups: Vec<(usize, usize)> = vec![];
    let mut start = 0;
    for i in 1..=n {
        if i == n || labels[base[i]] != labels[base[start]] {
            groups.push((start, i));
            start = i;
        }
    }

    let mut best: Option<String> = None;
    let mut perm = base.clone();
    permute_groups(&groups, 0, &mut perm, &mut |p: &[usize]| {
        // position of original vertex v in the candidate numbering
        let mut pos = vec![0usize; n];
        for (slot, &v) in p.iter().enumerate() {
            pos[v] = slot;
        }
        let mut pairs: Vec<(usize, usize)> = vec![];
        for i in 0..n {
            for j in 0..n {
                if order[i][j] {
                    pairs.push((pos[i], pos[j]));
                }
            }
        }
        pairs.sort_unstable();
        let enc = format!(
            "{}|{}",
            p.iter().map(|&v| labels[v].as_str()).collect::<Vec<_>>().join(","),
            pairs
                .iter()
                .map(|(a, b)| format!("{a}>{b}"))
                .collect::<Vec<_>>()
                .join(",")
        );
        match &best {
            Some(b) if *b <= enc => {}
            _ => best = Some(enc),
        }
    });
    best.unwrap_or_else(|| "|".to_string())
}

/// Calls `visit` with every permutation of `perm` obtained by permuting
/// within each group range independently.
fn permute_groups(
    groups: &[(usize, usize)],
    gi: usize,
    perm: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    if gi == groups.len() {
        visit(perm);
        return;
    }
    let (lo, hi) = groups[gi];
    fn heap_rec(
        perm: &mut Vec<usize>,
        lo: usize,
        k: usize,
        hi: usize,
        groups: &[(usize, usize)],
        gi: usize,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if k + 1 >= hi {
            permute_groups(groups, gi + 1, perm, visit);
            return;
        }
        for i in k..hi {
            perm.swap(k, i);
            heap_rec(perm, lo, k + 1, hi, groups, gi, visit);
            perm.swap(k, i);
        }
    }
    heap_rec(perm, lo, lo, hi, groups, gi, visit);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::ModelBuilder;
    use crate::unfold::DEFAULT_EVENT_CAP;

    #[test]
    fn model_equivalent_to_itself() {
        for m in fixtures::corpus() {
            assert!(equivalent(&m, &m, DEFAULT_EVENT_CAP).unwrap());
        }
    }

    #[test]
    fn branch_label_swap_is_equivalent() {
        // same bond with task ids permuted
        let m1 = fixtures::and_bond();
        let m2 = ModelBuilder::new()
            .task("i", "i")
            .and("s")
            .task("x", "b")
            .task("y", "a")
            .and("j")
            .task("o", "o")
            .arcs(&[("i", "s"), ("s", "x"), ("s", "y"), ("x", "j"), ("y", "j"), ("j", "o")])
            .build()
            .unwrap();
        assert!(equivalent(&m1, &m2, DEFAULT_EVENT_CAP).unwrap());
    }

    #[test]
    fn interleaving_differs_from_ordering() {
        // and bond vs the sequence a;b over the same labels
        let bond = fixtures::and_bond();
        let seq = ModelBuilder::new()
            .task("i", "i")
            .task("a", "a")
            .task("b", "b")
            .task("o", "o")
            .arcs(&[("i", "a"), ("a", "b"), ("b", "o")])
            .build()
            .unwrap();
        assert!(!equivalent(&bond, &seq, DEFAULT_EVENT_CAP).unwrap());
    }

    #[test]
    fn xor_and_differ() {
        assert!(!equivalent(&fixtures::xor_bond(), &fixtures::and_bond(), DEFAULT_EVENT_CAP).unwrap());
    }

    #[test]
    fn run_counts() {
        assert_eq!(run_set(&fixtures::sequence(), DEFAULT_EVENT_CAP).unwrap().len(), 1);
        assert_eq!(run_set(&fixtures::xor_bond(), DEFAULT_EVENT_CAP).unwrap().len(), 2);
        assert_eq!(run_set(&fixtures::and_bond(), DEFAULT_EVENT_CAP).unwrap().len(), 1);
        assert_eq!(run_set(&fixtures::overlapping_xor_a(), DEFAULT_EVENT_CAP).unwrap().len(), 3);
        assert_eq!(run_set(&fixtures::entangled_xor_and(), DEFAULT_EVENT_CAP).unwrap().len(), 3);
    }

    #[test]
    fn duplicate_labels_canonicalized() {
        // two runs that are isomorphic after swapping the equal-label pair
        let labels: Vec<String> = ["d", "d", "x"].iter().map(|s| s.to_string()).collect();
        let mk = |pairs: &[(usize, usize)]| {
            let mut o = vec![vec![false; 3]; 3];
            for &(i, j) in pairs {
                o[i][j] = true;
            }
            o
        };
        // x between the two d's, swapped roles
        let a = canonical_pomset(&labels, &mk(&[(0, 2), (2, 1)]));
        let b = canonical_pomset(&labels, &mk(&[(1, 2), (2, 0)]));
        assert_eq!(a, b);
        // but a chain d<d<x is different from d<x<d
        let c = canonical_pomset(&labels, &mk(&[(0, 1), (1, 2), (0, 2)]));
        assert_ne!(a, c);
    }
}
