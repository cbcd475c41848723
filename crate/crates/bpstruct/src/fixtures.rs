//! Shared example models used by tests and benchmarks.
//!
//! Each constructor returns a small, valid process model exercising one
//! structural situation (sequences, bonds, entangled gateways, primitives).

use crate::model::{ModelBuilder, ProcessModel};

/// Plain chain of four tasks.
pub fn sequence() -> ProcessModel {
    ModelBuilder::new()
        .task("i", "i")
        .task("a", "a")
        .task("b", "b")
        .task("o", "o")
        .arcs(&[("i", "a"), ("a", "b"), ("b", "o")])
        .build()
        .unwrap()
}

/// Two tasks in parallel between an and split and an and join.
pub fn and_bond() -> ProcessModel {
    ModelBuilder::new()
        .task("i", "i")
        .and("s")
        .task("a", "a")
        .task("b", "b")
        .and("j")
        .task("o", "o")
        .arcs(&[("i", "s"), ("s", "a"), ("s", "b"), ("a", "j"), ("b", "j"), ("j", "o")])
        .build()
        .unwrap()
}

/// Two alternative tasks between an xor split and an xor join.
pub fn xor_bond() -> ProcessModel {
    ModelBuilder::new()
        .task("i", "i")
        .xor("s")
        .task("a", "a")
        .task("b", "b")
        .xor("j")
        .task("o", "o")
        .arcs(&[("i", "s"), ("s", "a"), ("s", "b"), ("a", "j"), ("b", "j"), ("j", "o")])
        .build()
        .unwrap()
}

/// Xor bond whose first branch contains an and bond: nested, well structured.
pub fn nested_bonds() -> ProcessModel {
    ModelBuilder::new()
        .task("i", "i")
        .xor("s")
        .and("s2")
        .task("a", "a")
        .task("b", "b")
        .and("j2")
        .task("c", "c")
        .xor("j")
        .task("o", "o")
        .arcs(&[
            ("i", "s"),
            ("s", "s2"),
            ("s2", "a"),
            ("s2", "b"),
            ("a", "j2"),
            ("b", "j2"),
            ("j", "o"),
            ("j2", "j"),
            ("s", "c"),
            ("c", "j"),
        ])
        .build()
        .unwrap()
}

/// Sequence of an xor bond followed by an and bond; well structured.
pub fn mixed_polygon() -> ProcessModel {
    ModelBuilder::new()
        .task("i", "i")
        .xor("s1")
        .task("a", "a")
        .task("b", "b")
        .xor("j1")
        .and("s2")
        .task("c", "c")
        .task("d", "d")
        .and("j2")
        .task("o", "o")
        .arcs(&[
            ("i", "s1"),
            ("s1", "a"),
            ("s1", "b"),
            ("a", "j1"),
            ("b", "j1"),
            ("j1", "s2"),
            ("s2", "c"),
            ("s2", "d"),
            ("c", "j2"),
            ("d", "j2"),
            ("j2", "o"),
        ])
        .build()
        .unwrap()
}

/// Entangled but fully structurable rigid: an overlapping xor core (runs a;c,
/// a;d and b;d over a shared task d) followed by two concurrent tasks whose
/// and split is duplicated per alternative, so no cut point exists between
/// the xor part and the parallel part.
pub fn entangled_xor_and() -> ProcessModel {
    ModelBuilder::new()
        .task("i", "i")
        .xor("s")
        .task("a", "a")
        .task("b", "b")
        .xor("u")
        .task("c", "c")
        .xor("w")
        .task("d", "d")
        .and("v1")
        .and("v2")
        .xor("me")
        .xor("mf")
        .task("e", "e")
        .task("f", "f")
        .and("z")
        .task("o", "o")
        .arcs(&[
            ("i", "s"),
            ("s", "a"),
            ("s", "b"),
            ("a", "u"),
            ("u", "c"),
            ("u", "w"),
            ("b", "w"),
            ("w", "d"),
            ("c", "v1"),
            ("d", "v2"),
            ("v1", "me"),
            ("v1", "mf"),
            ("v2", "me"),
            ("v2", "mf"),
            ("me", "e"),
            ("mf", "f"),
            ("e", "z"),
            ("f", "z"),
            ("z", "o"),
        ])
        .build()
        .unwrap()
}

/// Overlapping xor core alone: runs a;c, a;d, b;d with one shared task d.
/// Its rigid is a sequential primitive (structuring requires duplicating d).
pub fn overlapping_xor_a() -> ProcessModel {
    ModelBuilder::new()
        .task("i", "i")
        .xor("s")
        .task("a", "a")
        .task("b", "b")
        .xor("u")
        .task("c", "c")
        .xor("w")
        .task("d", "d")
        .xor("z")
        .task("o", "o")
        .arcs(&[
            ("i", "s"),
            ("s", "a"),
            ("s", "b"),
            ("a", "u"),
            ("u", "c"),
            ("u", "w"),
            ("b", "w"),
            ("w", "d"),
            ("c", "z"),
            ("d", "z"),
            ("z", "o"),
        ])
        .build()
        .unwrap()
}

/// Mirror of [`overlapping_xor_a`]: runs a;c, b;c, b;d sharing task c.
pub fn overlapping_xor_b() -> ProcessModel {
    ModelBuilder::new()
        .task("i", "i")
        .xor("s")
        .task("a", "a")
        .task("b", "b")
        .xor("u")
        .task("d", "d")
        .xor("w")
        .task("c", "c")
        .xor("z")
        .task("o", "o")
        .arcs(&[
            ("i", "s"),
            ("s", "a"),
            ("s", "b"),
            ("b", "u"),
            ("u", "d"),
            ("u", "w"),
            ("a", "w"),
            ("w", "c"),
            ("c", "z"),
            ("d", "z"),
            ("z", "o"),
        ])
        .build()
        .unwrap()
}

/// Inherently unstructured concurrency: one run with a < c, b < c, b < d and
/// no matching join for the inner and split. The rigid cannot be removed.
pub fn n_shape() -> ProcessModel {
    ModelBuilder::new()
        .task("i", "i")
        .and("s")
        .task("a", "a")
        .task("b", "b")
        .and("v")
        .and("t")
        .task("c", "c")
        .task("d", "d")
        .and("z")
        .task("o", "o")
        .arcs(&[
            ("i", "s"),
            ("s", "a"),
            ("s", "b"),
            ("b", "v"),
            ("v", "t"),
            ("v", "d"),
            ("a", "t"),
            ("t", "c"),
            ("c", "z"),
            ("d", "z"),
            ("z", "o"),
        ])
        .build()
        .unwrap()
}

/// Five-task concurrent primitive: a < c, a < d, b < d, b < e in one run.
pub fn m_shape() -> ProcessModel {
    ModelBuilder::new()
        .task("i", "i")
        .and("s")
        .task("a", "a")
        .task("b", "b")
        .and("va")
        .and("vb")
        .and("t")
        .task("c", "c")
        .task("d", "d")
        .task("e", "e")
        .and("z")
        .task("o", "o")
        .arcs(&[
            ("i", "s"),
            ("s", "a"),
            ("s", "b"),
            ("a", "va"),
            ("b", "vb"),
            ("va", "c"),
            ("va", "t"),
            ("vb", "t"),
            ("vb", "e"),
            ("t", "d"),
            ("c", "z"),
            ("d", "z"),
            ("e", "z"),
            ("z", "o"),
        ])
        .build()
        .unwrap()
}

/// Mirror of [`n_shape`] with the two sink-side tasks sharing one label, so
/// the ordering relations graph carries duplicate task names.
pub fn n_shape_dup_label() -> ProcessModel {
    ModelBuilder::new()
        .task("i", "i")
        .and("s")
        .task("a", "a")
        .task("b", "b")
        .and("v")
        .and("t")
        .task("c1", "d")
        .task("d1", "d")
        .and("z")
        .task("o", "o")
        .arcs(&[
            ("i", "s"),
            ("s", "a"),
            ("s", "b"),
            ("a", "v"),
            ("v", "c1"),
            ("v", "t"),
            ("b", "t"),
            ("t", "d1"),
            ("c1", "z"),
            ("d1", "z"),
            ("z", "o"),
        ])
        .build()
        .unwrap()
}

/// Minimal xor join: the unfolder truncates one branch at a cutoff.
pub fn xor_join_simple() -> ProcessModel {
    ModelBuilder::new()
        .task("i", "i")
        .xor("s")
        .task("a", "a")
        .task("b", "b")
        .xor("j")
        .task("o", "o")
        .arcs(&[("i", "s"), ("s", "a"), ("s", "b"), ("a", "j"), ("b", "j"), ("j", "o")])
        .build()
        .unwrap()
}

/// Three-way xor bond with branches of unequal length.
pub fn skewed_xor() -> ProcessModel {
    ModelBuilder::new()
        .task("i", "i")
        .xor("s")
        .task("a", "a")
        .task("b", "b")
        .task("c", "c")
        .task("d", "d")
        .xor("j")
        .task("o", "o")
        .arcs(&[
            ("i", "s"),
            ("s", "a"),
            ("s", "b"),
            ("s", "d"),
            ("a", "j"),
            ("b", "c"),
            ("c", "j"),
            ("d", "j"),
            ("j", "o"),
        ])
        .build()
        .unwrap()
}

/// The full example corpus, in a fixed order.
pub fn corpus() -> Vec<ProcessModel> {
    vec![
        sequence(),
        and_bond(),
        xor_bond(),
        nested_bonds(),
        mixed_polygon(),
        entangled_xor_and(),
        overlapping_xor_a(),
        overlapping_xor_b(),
        n_shape(),
        m_shape(),
        n_shape_dup_label(),
        xor_join_simple(),
        skewed_xor(),
    ]
}

/// Corpus entries paired with stable names (used by the CLI examples too).
pub fn named_corpus() -> Vec<(&'static str, ProcessModel)> {
    vec![
        ("sequence", sequence()),
        ("and-bond", and_bond()),
        ("xor-bond", xor_bond()),
        ("nested-bonds", nested_bonds()),
        ("mixed-polygon", mixed_polygon()),
        ("entangled-xor-and", entangled_xor_and()),
        ("overlapping-xor-a", overlapping_xor_a()),
        ("overlapping-xor-b", overlapping_xor_b()),
        ("n-shape", n_shape()),
        ("m-shape", m_shape()),
        ("n-shape-dup-label", n_shape_dup_label()),
        ("xor-join-simple", xor_join_simple()),
        ("skewed-xor", skewed_xor()),
    ]
}
