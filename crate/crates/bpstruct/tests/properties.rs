//! Property-based invariants over randomly generated models.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bpstruct::equivalence::equivalent;
use bpstruct::model::{ModelBuilder, ProcessModel};
use bpstruct::restructure::{structure_model, StructuringOptions};
use bpstruct::rpst::{compute_rpst, is_well_structured};

/// Random block-structured model: tasks, sequences, xor bonds, and bonds.
fn random_structured_model(seed: u64) -> ProcessModel {
    fn block(
        rng: &mut ChaCha8Rng,
        depth: usize,
        next: &mut usize,
        nodes: &mut Vec<(String, u8)>,
        arcs: &mut Vec<(String, String)>,
    ) -> (String, String) {
        let kind = if depth == 0 { 0 } else { rng.gen_range(0..4) };
        let fresh = |next: &mut usize, p: &str| {
            *next += 1;
            format!("{p}{next}")
        };
        match kind {
            0 => {
                let id = fresh(next, "t");
                nodes.push((id.clone(), 0));
                (id.clone(), id)
            }
            1 => {
                let (e1, x1) = block(rng, depth - 1, next, nodes, arcs);
                let (e2, x2) = block(rng, depth - 1, next, nodes, arcs);
                arcs.push((x1, e2));
                (e1, x2)
            }
            k => {
                let gw = if k == 2 { 1 } else { 2 };
                let s = fresh(next, "s");
                let j = fresh(next, "j");
                nodes.push((s.clone(), gw));
                nodes.push((j.clone(), gw));
                let branches = rng.gen_range(2..=3);
                for _ in 0..branches {
                    let (e, x) = block(rng, depth - 1, next, nodes, arcs);
                    arcs.push((s.clone(), e));
                    arcs.push((x, j.clone()));
                }
                (s, j)
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = vec![];
    let mut arcs = vec![];
    let mut next = 0;
    let (entry, exit) = block(&mut rng, 3, &mut next, &mut nodes, &mut arcs);
    nodes.push(("i".into(), 0));
    nodes.push(("o".into(), 0));
    arcs.push(("i".into(), entry));
    arcs.push((exit, "o".into()));
    let mut b = ModelBuilder::new();
    for (id, k) in &nodes {
        b = match k {
            0 => b.task(id, id),
            1 => b.xor(id),
            _ => b.and(id),
        };
    }
    for (f, t) in &arcs {
        b = b.arc(f, t);
    }
    b.build().expect("generated model is valid")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Block-structured input is already maximally structured: the rewrite
    /// keeps it well-structured, rigid-free, and behaviorally identical.
    #[test]
    fn structured_input_stays_structured(seed: u64) {
        let m = random_structured_model(seed);
        prop_assert!(is_well_structured(&compute_rpst(&m)));
        let (out, report) = structure_model(&m, StructuringOptions::default()).unwrap();
        prop_assert_eq!(compute_rpst(&out).rigid_count(), 0);
        prop_assert_eq!(report.rigids_processed, 0);
        prop_assert!(equivalent(&m, &out, bpstruct::unfold::DEFAULT_EVENT_CAP).unwrap());
    }

    /// Serializing and reparsing a model is the identity on its JSON form.
    #[test]
    fn json_round_trip_is_identity(seed: u64) {
        let m = random_structured_model(seed);
        let text = m.to_json();
        let back = ProcessModel::parse(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
        prop_assert_eq!(back.nodes(), m.nodes());
        prop_assert_eq!(back.arcs(), m.arcs());
    }
}
