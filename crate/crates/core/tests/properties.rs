mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use ptgraph::adjustment::{
    candidates, common_sufficient_set, is_common_sufficient, is_sufficient,
    minimal_sufficient_sets, AdjustmentSet,
};
use ptgraph::completion::{completions, DEFAULT_COMPLETION_CAP};
use ptgraph::dsep::{d_separated, open_path_witness};
use ptgraph::graph::{descendants, Edge, GraphBuilder, NodeId, Period};
use ptgraph::sem::{implied_covariance, random_sem};
use ptgraph::swig::build_swig;
use ptgraph::{dsl, verdict};

fn subsets_of(names: &[NodeId], mask: u32) -> BTreeSet<NodeId> {
    (0..names.len())
        .filter(|b| mask & (1 << b) != 0)
        .map(|b| names[b].clone())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn serialize_then_parse_is_identity(
        g in arb_did(0, 5, true),
        picks in prop::collection::vec(any::<bool>(), 10),
    ) {
        let g = soften(&g, &picks);
        let text = dsl::serialize(&g);
        let back = dsl::parse(&text).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(dsl::serialize(&back), text);
    }

    #[test]
    fn adding_an_edge_never_shrinks_descendants(g in arb_dag(2, 7), i in 0usize..7, j in 0usize..7) {
        let names: Vec<NodeId> = g.nodes().map(|n| n.id.clone()).collect();
        let (i, j) = (i % names.len(), j % names.len());
        prop_assume!(i != j && !g.has_edge(names[j].as_str(), names[i].as_str()));
        let mut b = GraphBuilder::from_graph(g.clone());
        b.edge(Edge::directed(names[i].clone(), names[j].clone()));
        let bigger = b.build_unchecked();
        prop_assume!(!ptgraph::graph::validate(&bigger).has_cycle());
        for v in &names {
            let before = descendants(&g, v.as_str()).unwrap();
            let after = descendants(&bigger, v.as_str()).unwrap();
            prop_assert!(before.is_subset(&after));
            prop_assert!(after.contains(v));
        }
    }

    #[test]
    fn dsep_matches_moralization_and_is_symmetric(g in arb_dag(2, 7), x in 0usize..7, y in 0usize..7, mask in any::<u32>()) {
        let names: Vec<NodeId> = g.nodes().map(|n| n.id.clone()).collect();
        let (x, y) = (x % names.len(), y % names.len());
        prop_assume!(x != y);
        let others: Vec<NodeId> = names.iter().enumerate()
            .filter(|(k, _)| *k != x && *k != y).map(|(_, v)| v.clone()).collect();
        let z = subsets_of(&others, mask);
        let (xs, ys) = (names[x].as_str(), names[y].as_str());
        let sep = d_separated(&g, xs, ys, &z).unwrap();
        prop_assert_eq!(sep, d_separated(&g, ys, xs, &z).unwrap());
        prop_assert_eq!(sep, moral_separated(&g, xs, ys, &z));
        match open_path_witness(&g, xs, ys, &z).unwrap() {
            Some(p) => {
                prop_assert!(!sep);
                prop_assert!(p.certify(&g, &z));
            }
            None => prop_assert!(sep),
        }
    }

    #[test]
    fn completions_match_recursive_enumeration(
        g in arb_did(2, 5, false),
        picks in prop::collection::vec(any::<bool>(), 10),
    ) {
        let g = soften(&g, &picks);
        let ours: BTreeSet<BTreeSet<(String, String)>> = completions(&g, DEFAULT_COMPLETION_CAP)
            .unwrap()
            .into_iter()
            .map(|c| {
                prop_assert!(c.graph.is_fully_directed());
                Ok(c.graph.directed_edges().map(|e| (e.tail.to_string(), e.head.to_string())).collect())
            })
            .collect::<Result<_, TestCaseError>>()?;
        let count = completions(&g, DEFAULT_COMPLETION_CAP).unwrap().len();
        prop_assert_eq!(count, ours.len());
        prop_assert_eq!(ours, oracle_completions(&g));
    }

    #[test]
    fn minimal_sets_are_minimal_and_match_brute_force(g in arb_did(0, 7, true)) {
        let s = build_swig(&g, 0).unwrap();
        for t in Period::BOTH {
            let fam = minimal_sufficient_sets(&s, t).unwrap();
            for m in &fam.sets {
                prop_assert!(is_sufficient(&s, m, t).unwrap());
                for v in m.members() {
                    let smaller: AdjustmentSet = m.members().iter().filter(|u| *u != v).cloned().collect();
                    prop_assert!(!is_sufficient(&s, &smaller, t).unwrap());
                }
            }
            let ours: BTreeSet<BTreeSet<NodeId>> = fam.sets.iter().map(|m| m.members().clone()).collect();
            prop_assert_eq!(ours, oracle_minimal_sets(&g, t));
            let pool: BTreeSet<NodeId> = candidates(&s, t).into_iter().collect();
            let oracle_pool: BTreeSet<NodeId> = eligible_pool(&g, Some(t)).into_iter().collect();
            prop_assert_eq!(pool, oracle_pool);
        }
    }

    #[test]
    fn common_set_exists_without_y0_to_a(g in arb_did(0, 7, true)) {
        let g = g.without_edge(&Edge::directed(id("Y0"), id("A")));
        let s = build_swig(&g, 0).unwrap();
        let m = common_sufficient_set(&s).unwrap();
        prop_assert!(oracle_common_exists(&g));
        let m = m.expect("a common set exists");
        prop_assert!(is_common_sufficient(&s, &m).unwrap());
    }

    #[test]
    fn covariance_matches_trek_rule(g in arb_dag(1, 7), seed in any::<u64>()) {
        let m = random_sem(&g, seed, (0.2, 1.5)).unwrap();
        let cov = implied_covariance(&m).unwrap();
        for x in g.nodes() {
            for y in g.nodes() {
                let ours = cov.get(x.id.as_str(), y.id.as_str()).unwrap();
                let trek = trek_covariance(&m, x.id.as_str(), y.id.as_str());
                prop_assert!((ours - trek).abs() <= 1e-9 * (1.0 + trek.abs()), "{} {} {} {}", x.id, y.id, ours, trek);
            }
        }
    }

    #[test]
    fn separated_pairs_have_zero_partial_covariance(g in arb_dag(2, 6), seed in any::<u64>(), mask in any::<u32>()) {
        let m = random_sem(&g, seed, (0.2, 1.5)).unwrap();
        let cov = implied_covariance(&m).unwrap();
        let names: Vec<NodeId> = g.nodes().map(|n| n.id.clone()).collect();
        for i in 0..names.len() {
            for j in i + 1..names.len() {
                let others: Vec<NodeId> = names.iter().filter(|v| **v != names[i] && **v != names[j]).cloned().collect();
                let z = subsets_of(&others, mask);
                if d_separated(&g, names[i].as_str(), names[j].as_str(), &z).unwrap() {
                    let zs: Vec<&str> = z.iter().map(NodeId::as_str).collect();
                    let pc = cov.partial(names[i].as_str(), names[j].as_str(), &zs).unwrap();
                    prop_assert!(pc.abs() < 1e-9, "{pc}");
                }
            }
        }
    }

    #[test]
    fn verdict_witnesses_reverify(
        g in arb_did(1, 5, false),
        picks in prop::collection::vec(any::<bool>(), 6),
    ) {
        let g = soften(&g, &picks);
        let v = verdict::analyze(&g, &verdict::AnalyzeOptions::default()).unwrap();
        let worlds = completions(&g, DEFAULT_COMPLETION_CAP).unwrap();
        prop_assert_eq!(worlds.len(), v.completions_analyzed);
        for w in &v.witnesses {
            let s = build_swig(&worlds[w.completion].graph, 0).unwrap();
            prop_assert!(verdict::verify_witness(&s, &w.witness), "{}", w.witness);
        }
        let rejects = |i: usize| {
            v.condition(verdict::Condition::C1).violated_in.contains(&i)
                || v.condition(verdict::Condition::C2).violated_in.contains(&i)
        };
        let all = (0..v.completions_analyzed).all(rejects);
        prop_assert_eq!(v.overall == verdict::Overall::Rejected, all);
        prop_assert_eq!(v.obligation.is_some(), v.obligation_statement.is_some());
        prop_assert_eq!(v.to_json(), verdict::analyze(&g, &Default::default()).unwrap().to_json());
    }
}
