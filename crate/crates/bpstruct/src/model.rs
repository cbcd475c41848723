//! Process-model data model: tasks and xor/and gateways connected by
//! control-flow arcs, with a single source and a single sink task.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = String;

pub const FORMAT_TAG: &str = "bpstruct/1";

/// Reserved label for the synthetic source task wrapped around a component.
pub const START_LABEL: &str = "__start__";
/// Reserved label for the synthetic sink task wrapped around a component.
pub const END_LABEL: &str = "__end__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GatewayKind {
    Xor,
    And,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Task { name: String },
    Gateway(GatewayKind),
}

impl NodeKind {
    pub fn is_task(&self) -> bool {
        matches!(self, NodeKind::Task { .. })
    }
}

/// A validated process model (tasks, gateways, control-flow arcs).
///
/// Node ids are caller-supplied strings; ids generated during restructuring
/// carry the reserved `__g` prefix. Task names may repeat across distinct
/// tasks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessModel {
    nodes: BTreeMap<NodeId, NodeKind>,
    arcs: BTreeSet<(NodeId, NodeId)>,
}

impl ProcessModel {
    pub fn new(nodes: BTreeMap<NodeId, NodeKind>, arcs: BTreeSet<(NodeId, NodeId)>) -> Result<Self> {
        let m = ProcessModel { nodes, arcs };
        m.validate()?;
        Ok(m)
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, NodeKind> {
        &self.nodes
    }

    pub fn arcs(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.arcs
    }

    pub fn kind(&self, id: &str) -> Option<&NodeKind> {
        self.nodes.get(id)
    }

    /// Set of task names occurring in the model.
    pub fn alphabet(&self) -> BTreeSet<String> {
        self.nodes
            .values()
            .filter_map(|k| match k {
                NodeKind::Task { name } => Some(name.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn preset(&self, id: &str) -> Vec<&NodeId> {
        self.arcs.iter().filter(|(_, t)| t == id).map(|(s, _)| s).collect()
    }

    pub fn postset(&self, id: &str) -> Vec<&NodeId> {
        self.arcs
            .range((id.to_string(), String::new())..)
            .take_while(|(s, _)| s == id)
            .map(|(_, t)| t)
            .collect()
    }

    pub fn source(&self) -> &NodeId {
        self.nodes
            .keys()
            .find(|id| self.preset(id).is_empty())
            .expect("validated model has a source")
    }

    pub fn sink(&self) -> &NodeId {
        self.nodes
            .keys()
            .find(|id| self.postset(id).is_empty())
            .expect("validated model has a sink")
    }

    /// Checks every structural invariant of a process model; error messages
    /// name the violated invariant.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Invalid("empty model".into()));
        }
        for (s, t) in &self.arcs {
            if !self.nodes.contains_key(s) {
                return Err(Error::Invalid(format!("arc references unknown node {s}")));
            }
            if !self.nodes.contains_key(t) {
                return Err(Error::Invalid(format!("arc references unknown node {t}")));
            }
            if s == t {
                return Err(Error::Invalid(format!("self-loop on {s}")));
            }
        }
        let mut indeg: BTreeMap<&str, usize> = BTreeMap::new();
        let mut outdeg: BTreeMap<&str, usize> = BTreeMap::new();
        for (s, t) in &self.arcs {
            *outdeg.entry(s).or_default() += 1;
            *indeg.entry(t).or_default() += 1;
        }
        let mut sources = vec![];
        let mut sinks = vec![];
        for (id, kind) in &self.nodes {
            let din = indeg.get(id.as_str()).copied().unwrap_or(0);
            let dout = outdeg.get(id.as_str()).copied().unwrap_or(0);
            if din == 0 {
                sources.push(id);
            }
            if dout == 0 {
                sinks.push(id);
            }
            match kind {
                NodeKind::Task { .. } => {
                    if din > 1 {
                        return Err(Error::Invalid(format!("task {id} with {din} incoming arcs")));
                    }
                    if dout > 1 {
                        return Err(Error::Invalid(format!("task {id} with {dout} outgoing arcs")));
                    }
                }
                NodeKind::Gateway(_) => {
                    let split = din == 1 && dout > 1;
                    let join = din > 1 && dout == 1;
                    if !split && !join {
                        return Err(Error::Invalid(format!(
                            "gateway {id} is neither split nor join ({din} in, {dout} out)"
                        )));
                    }
                }
            }
        }
        if sources.len() > 1 {
            return Err(Error::Invalid(format!(
                "two sources: {} and {}",
                sources[0], sources[1]
            )));
        }
        if sinks.len() > 1 {
            return Err(Error::Invalid(format!("two sinks: {} and {}", sinks[0], sinks[1])));
        }
        let (source, sink) = match (sources.first(), sinks.first()) {
            (Some(s), Some(t)) => (s.as_str(), t.as_str()),
            _ => return Err(Error::Invalid("cyclic".into())),
        };
        if !self.nodes[source].is_task() {
            return Err(Error::Invalid(format!("source {source} is not a task")));
        }
        if !self.nodes[sink].is_task() {
            return Err(Error::Invalid(format!("sink {sink} is not a task")));
        }
        if self.has_cycle() {
            return Err(Error::Invalid("cyclic".into()));
        }
        // every node on a source -> sink path
        let fwd = self.reach_from(source, false);
        let bwd = self.reach_from(sink, true);
        for id in self.nodes.keys() {
            if !fwd.contains(id.as_str()) || !bwd.contains(id.as_str()) {
                return Err(Error::Invalid(format!("node {id} not on a source-sink path")));
            }
        }
        Ok(())
    }

    fn has_cycle(&self) -> bool {
        let mut indeg: BTreeMap<&str, usize> = self.nodes.keys().map(|k| (k.as_str(), 0)).collect();
        for (_, t) in &self.arcs {
            *indeg.get_mut(t.as_str()).unwrap() += 1;
        }
        let mut queue: VecDeque<&str> =
            indeg.iter().filter(|(_, d)| **d == 0).map(|(k, _)| *k).collect();
        let mut seen = 0usize;
        while let Some(n) = queue.pop_front() {
            seen += 1;
            for (s, t) in &self.arcs {
                if s == n {
                    let d = indeg.get_mut(t.as_str()).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        queue.push_back(t);
                    }
                }
            }
        }
        seen != self.nodes.len()
    }

    fn reach_from<'a>(&'a self, start: &'a str, backward: bool) -> BTreeSet<&'a str> {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            if !seen.insert(n) {
                continue;
            }
            for (s, t) in &self.arcs {
                if !backward && s == n && !seen.contains(t.as_str()) {
                    stack.push(t);
                }
                if backward && t == n && !seen.contains(s.as_str()) {
                    stack.push(s);
                }
            }
        }
        seen
    }

    /// Parses and validates the `bpstruct/1` JSON document format.
    pub fn parse(doc: &str) -> Result<Self> {
        let doc: ModelDoc =
            serde_json::from_str(doc).map_err(|e| Error::Parse(e.to_string()))?;
        if doc.format != FORMAT_TAG {
            return Err(Error::Parse(format!(
                "unsupported format {:?}, expected {FORMAT_TAG:?}",
                doc.format
            )));
        }
        let mut nodes = BTreeMap::new();
        for n in doc.nodes {
            let kind = match n.kind.as_str() {
                "task" => NodeKind::Task {
                    name: n.name.unwrap_or_else(|| n.id.clone()),
                },
                "xor" => NodeKind::Gateway(GatewayKind::Xor),
                "and" => NodeKind::Gateway(GatewayKind::And),
                other => return Err(Error::Parse(format!("unknown node kind {other:?}"))),
            };
            if nodes.insert(n.id.clone(), kind).is_some() {
                return Err(Error::Invalid(format!("duplicate node id {}", n.id)));
            }
        }
        let arcs = doc.arcs.into_iter().collect();
        ProcessModel::new(nodes, arcs)
    }

    /// Serializes back to the JSON input format (deterministic field order).
    pub fn to_json(&self) -> String {
        let doc = ModelDoc {
            format: FORMAT_TAG.to_string(),
            nodes: self
                .nodes
                .iter()
                .map(|(id, kind)| match kind {
                    NodeKind::Task { name } => NodeDoc {
                        id: id.clone(),
                        kind: "task".into(),
                        name: Some(name.clone()),
                    },
                    NodeKind::Gateway(GatewayKind::Xor) => NodeDoc {
                        id: id.clone(),
                        kind: "xor".into(),
                        name: None,
                    },
                    NodeKind::Gateway(GatewayKind::And) => NodeDoc {
                        id: id.clone(),
                        kind: "and".into(),
                        name: None,
                    },
                })
                .collect(),
            arcs: self.arcs.iter().cloned().collect(),
        };
        serde_json::to_string_pretty(&doc).expect("model serialization")
    }

    /// Deterministic DOT export: tasks as boxes, xor gateways as diamonds
    /// labeled "X", and gateways as diamonds labeled "+".
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph model {\n  rankdir=LR;\n");
        for (id, kind) in &self.nodes {
            match kind {
                NodeKind::Task { name } => {
                    let _ = writeln!(out, "  {:?} [shape=box, label={:?}];", id, name);
                }
                NodeKind::Gateway(GatewayKind::Xor) => {
                    let _ = writeln!(out, "  {:?} [shape=diamond, label=\"X\"];", id);
                }
                NodeKind::Gateway(GatewayKind::And) => {
                    let _ = writeln!(out, "  {:?} [shape=diamond, label=\"+\"];", id);
                }
            }
        }
        for (s, t) in &self.arcs {
            let _ = writeln!(out, "  {:?} -> {:?};", s, t);
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    nodes: Vec<NodeDoc>,
    arcs: Vec<(String, String)>,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: String,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
}

/// Convenience builder used heavily by tests and fixtures.
#[derive(Debug, Default)]
pub struct ModelBuilder {
    nodes: BTreeMap<NodeId, NodeKind>,
    arcs: BTreeSet<(NodeId, NodeId)>,
}

impl ModelBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn task(mut self, id: &str, name: &str) -> Self {
        self.nodes.insert(id.into(), NodeKind::Task { name: name.into() });
        self
    }

    pub fn xor(mut self, id: &str) -> Self {
        self.nodes.insert(id.into(), NodeKind::Gateway(GatewayKind::Xor));
        self
    }

    pub fn and(mut self, id: &str) -> Self {
        self.nodes.insert(id.into(), NodeKind::Gateway(GatewayKind::And));
        self
    }

    pub fn arc(mut self, from: &str, to: &str) -> Self {
        self.arcs.insert((from.into(), to.into()));
        self
    }

    pub fn arcs(mut self, pairs: &[(&str, &str)]) -> Self {
        for (f, t) in pairs {
            self.arcs.insert(((*f).into(), (*t).into()));
        }
        self
    }

    pub fn build(self) -> Result<ProcessModel> {
        ProcessModel::new(self.nodes, self.arcs)
    }
}

/// Generates fresh node ids with the reserved `__g` prefix.
#[derive(Debug, Default)]
pub struct IdGen {
    next: u64,
}

impl IdGen {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fresh(&mut self, hint: &str) -> NodeId {
        let id = format!("__g{}_{hint}", self.next);
        self.next += 1;
        id
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> ProcessModel {
        ModelBuilder::new()
            .task("i", "i")
            .task("a", "a")
            .task("o", "o")
            .arcs(&[("i", "a"), ("a", "o")])
            .build()
            .unwrap()
    }

    #[test]
    fn minimal_chain_parses() {
        let m = chain();
        assert_eq!(m.nodes().len(), 3);
        assert_eq!(m.arcs().len(), 2);
        assert_eq!(m.source(), "i");
        assert_eq!(m.sink(), "o");
    }

    #[test]
    fn and_bond_is_valid() {
        let m = ModelBuilder::new()
            .task("i", "i")
            .and("s")
            .task("a", "a")
            .task("b", "b")
            .and("j")
            .task("o", "o")
            .arcs(&[("i", "s"), ("s", "a"), ("s", "b"), ("a", "j"), ("b", "j"), ("j", "o")])
            .build()
            .unwrap();
        assert_eq!(m.nodes().len(), 6);
    }

    #[test]
    fn gateway_with_two_in_two_out_rejected() {
        let err = ModelBuilder::new()
            .task("i", "i")
            .and("s")
            .xor("g")
            .task("a", "a")
            .task("b", "b")
            .and("j")
            .task("o", "o")
            .arcs(&[
                ("i", "s"),
                ("s", "g"),
                ("s", "a"),
                ("a", "g"),
                ("g", "b"),
                ("g", "j"),
                ("b", "j"),
                ("j", "o"),
            ])
            .build()
            .unwrap_err();
        assert!(err.to_string().contains("neither split nor join"), "{err}");
    }

    #[test]
    fn two_sources_rejected() {
        let err = ModelBuilder::new()
            .task("i1", "i1")
            .task("i2", "i2")
            .xor("j")
            .task("o", "o")
            .arcs(&[("i1", "j"), ("i2", "j"), ("j", "o")])
            .build()
            .unwrap_err();
        assert!(err.to_string().contains("two sources"), "{err}");
    }

    #[test]
    fn cycle_rejected() {
        let err = ModelBuilder::new()
            .task("i", "i")
            .xor("j")
            .task("a", "a")
            .xor("s")
            .task("o", "o")
            .arcs(&[("i", "j"), ("j", "a"), ("a", "s"), ("s", "j"), ("s", "o")])
            .build()
            .unwrap_err();
        assert!(err.to_string().contains("cyclic"), "{err}");
    }

    #[test]
    fn parse_serialize_roundtrip() {
        let m = chain();
        let m2 = ProcessModel::parse(&m.to_json()).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn dot_is_deterministic() {
        let m = chain();
        assert_eq!(m.to_dot(), m.to_dot());
        assert_eq!(m.to_dot().matches("->").count(), 2);
    }
}
