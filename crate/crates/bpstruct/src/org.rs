//! Ordering relations graph over the observable events of a complete prefix.
//!
//! Two observable events are in proper causal relation when one precedes the
//! other in the prefix itself or through a chain of cutoff jumps (continuing
//! from the corresponding event of each cutoff). Proper conflict is prefix
//! conflict minus proper causality in either direction. Concurrency is the
//! absence of arcs.

use std::collections::BTreeSet;

use crate::model::NodeId;
use crate::unfold::Prefix;

#[derive(Debug, Clone)]
pub struct OrgVertex {
    /// Index of the event in the originating prefix.
    pub event: usize,
    pub label: String,
    pub origin: Option<NodeId>,
}

#[derive(Debug, Clone)]
pub struct Org {
    pub vertices: Vec<OrgVertex>,
    /// Proper causality, as ordered vertex-index pairs.
    pub causal: BTreeSet<(usize, usize)>,
    /// Proper conflict, stored symmetrically.
    pub conflict: BTreeSet<(usize, usize)>,
}

impl Org {
    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    pub fn concurrent(&self, a: usize, b: usize) -> bool {
        a != b
            && !self.causal.contains(&(a, b))
            && !self.causal.contains(&(b, a))
            && !self.conflict.contains(&(a, b))
    }

    /// The plain digraph view used by modular decomposition: causality gives
    /// single arcs, conflict gives double arcs.
    pub fn digraph(&self) -> crate::mdt::Digraph {
        let mut g = crate::mdt::Digraph::new(self.n());
        for &(a, b) in &self.causal {
            g.add_arc(a, b);
        }
        for &(a, b) in &self.conflict {
            g.add_arc(a, b);
        }
        g
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph org {\n");
        for (i, v) in self.vertices.iter().enumerate() {
            out.push_str(&format!("  v{i} [shape=ellipse, label=\"{}\"];\n", v.label));
        }
        for &(a, b) in &self.causal {
            out.push_str(&format!("  v{a} -> v{b};\n"));
        }
        for &(a, b) in &self.conflict {
            if a < b {
                out.push_str(&format!("  v{a} -> v{b} [dir=both, color=red];\n"));
            }
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> String {
        use serde::Serialize;
        #[derive(Serialize)]
        struct VertexDoc<'a> {
            id: usize,
            label: &'a str,
        }
        #[derive(Serialize)]
        struct OrgDoc<'a> {
            format: &'a str,
            vertices: Vec<VertexDoc<'a>>,
            causal: Vec<(usize, usize)>,
            conflict: Vec<(usize, usize)>,
        }
        let doc = OrgDoc {
            format: "bpstruct-org/1",
            vertices: self
                .vertices
                .iter()
                .enumerate()
                .map(|(i, v)| VertexDoc { id: i, label: &v.label })
                .collect(),
            causal: self.causal.iter().copied().collect(),
            conflict: self.conflict.iter().filter(|(a, b)| a < b).copied().collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("org serializes");
        s.push('\n');
        s
    }

    /// Parses the JSON produced by [`Org::to_json`].
    pub fn parse(doc: &str) -> crate::error::Result<Org> {
        use crate::error::Error;
        let v: serde_json::Value =
            serde_json::from_str(doc).map_err(|e| Error::Parse(e.to_string()))?;
        if v["format"] != "bpstruct-org/1" {
            return Err(Error::Parse("expected format bpstruct-org/1".into()));
        }
        let raw_vertices = v["vertices"]
            .as_array()
            .ok_or_else(|| Error::Parse("vertices must be an array".into()))?;
        let mut vertices = vec![];
        for (i, rv) in raw_vertices.iter().enumerate() {
            if rv["id"].as_u64() != Some(i as u64) {
                return Err(Error::Parse(format!("vertex ids must be 0..n, got {}", rv["id"])));
            }
            let label = rv["label"]
                .as_str()
                .ok_or_else(|| Error::Parse("vertex label must be a string".into()))?;
            vertices.push(OrgVertex { event: i, label: label.to_string(), origin: None });
        }
        let n = vertices.len();
        let pairs = |key: &str| -> crate::error::Result<Vec<(usize, usize)>> {
            let arr = v[key]
                .as_array()
                .ok_or_else(|| Error::Parse(format!("{key} must be an array")))?;
            arr.iter()
                .map(|p| {
                    let a = p[0].as_u64().map(|x| x as usize);
                    let b = p[1].as_u64().map(|x| x as usize);
                    match (a, b) {
                        (Some(a), Some(b)) if a < n && b < n && a != b => Ok((a, b)),
                        _ => Err(Error::Parse(format!("bad {key} pair {p}"))),
                    }
                })
                .collect()
        };
        let causal: BTreeSet<(usize, usize)> = pairs("causal")?.into_iter().collect();
        let mut conflict = BTreeSet::new();
        for (a, b) in pairs("conflict")? {
            conflict.insert((a, b));
            conflict.insert((b, a));
        }
        for &(a, b) in &causal {
            if causal.contains(&(b, a)) || conflict.contains(&(a, b)) {
                return Err(Error::Parse(format!("vertices {a},{b} have clashing relations")));
            }
        }
        Ok(Org { vertices, causal, conflict })
    }
}

/// Builds the ordering relations graph of a prefix, keeping the observable
/// events whose label is not in `hidden`.
pub fn build_org(prefix: &Prefix, hidden: &[&str]) -> Org {
    let events: Vec<usize> = prefix
        .observable_events()
        .into_iter()
        .filter(|&e| {
            let l = prefix.events[e].label.as_deref().unwrap();
            !hidden.contains(&l)
        })
        .collect();

    let vertices: Vec<OrgVertex> = events
        .iter()
        .map(|&e| OrgVertex {
            event: e,
            label: prefix.events[e].label.clone().unwrap(),
            origin: prefix.events[e].origin.clone(),
        })
        .collect();

    // proper-causal successors of each event, through cutoff jumps
    let proper_succ = |x: usize| -> BTreeSet<usize> {
        let all = prefix.events.len();
        let strict_succ = |s: usize| -> Vec<usize> {
            (0..all).filter(|&y| prefix.causal(s, y)).collect()
        };
        let mut succ: BTreeSet<usize> = strict_succ(x).into_iter().collect();
        // jump sources reachable from x (reflexively) or from earlier jumps
        let mut sources: BTreeSet<usize> = [x].into();
        sources.extend(&succ);
        loop {
            let jumps: Vec<usize> = sources
                .iter()
                .filter_map(|e| prefix.cutoffs.get(e).copied())
                .collect();
            let mut grew = false;
            for corr in jumps {
                for y in std::iter::once(corr).chain(strict_succ(corr)) {
                    if sources.insert(y) {
                        grew = true;
                    }
                    if y != corr {
                        succ.insert(y);
                    }
                }
                // the landing point itself is reachable for further jumps but
                // only its strict successors become proper-causal
                for y in strict_succ(corr) {
                    succ.insert(y);
                }
            }
            if !grew {
                break;
            }
        }
        succ
    };

    let mut causal = BTreeSet::new();
    let succ_of: Vec<BTreeSet<usize>> = events.iter().map(|&e| proper_succ(e)).collect();
    for (i, _) in events.iter().enumerate() {
        for (j, &ej) in events.iter().enumerate() {
            if i != j && succ_of[i].contains(&ej) {
                causal.insert((i, j));
            }
        }
    }
    let mut conflict = BTreeSet::new();
    for (i, &ei) in events.iter().enumerate() {
        for (j, &ej) in events.iter().enumerate() {
            if i < j
                && prefix.conflict(ei, ej)
                && !causal.contains(&(i, j))
                && !causal.contains(&(j, i))
            {
                conflict.insert((i, j));
                conflict.insert((j, i));
            }
        }
    }

    Org { vertices, causal, conflict }
}
