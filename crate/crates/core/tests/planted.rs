//! Recovery of planted structure from generated networks and panels.

use std::collections::BTreeMap;

use engage_core::features::standardize_and_transform;
use engage_core::graph::{giant_component, EndorsementGraph};
use engage_core::partition::{bisect, ensemble_polarity, label_sides, louvain, modularity};
use engage_core::stats::select_by_correlation;
use engage_core::synth::{generate_network, generate_state_panel, SynthConfig};
use engage_core::Side;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sixty_forty(seed: u64) -> (EndorsementGraph, BTreeMap<String, Side>) {
    let cfg = SynthConfig {
        n_users: 100,
        ratio: 1.5,
        p_in: 0.3,
        p_out: 0.01,
        ..SynthConfig::default()
    };
    let (g, truth) = generate_network(&cfg, seed).unwrap();
    let g = g.induced_subgraph(&giant_component(&g));
    (g, truth.planted_sides())
}

/// Share of nodes whose 0/1 side agrees with the planted side under the
/// better of the two orientations.
fn aligned_accuracy(ids: &[String], sides: &[u8], planted: &BTreeMap<String, Side>) -> f64 {
    let agree = ids
        .iter()
        .zip(sides)
        .filter(|(id, s)| (planted[*id] == Side::Rights) == (**s == 1))
        .count();
    agree.max(ids.len() - agree) as f64 / ids.len() as f64
}

#[test]
fn bisection_recovers_sixty_forty_blocks() {
    for seed in 1..=5 {
        let (g, planted) = sixty_forty(seed);
        let a = bisect(&g, 1.5, seed).unwrap();
        let acc = aligned_accuracy(&a.ids, &a.sides, &planted);
        assert!(acc >= 0.95, "seed {seed}: {acc}");
    }
}

#[test]
fn ensemble_extremes_cover_the_graph_and_match_planted_sides() {
    let (g, planted) = sixty_forty(2);
    let scores = ensemble_polarity(&g, 20, 1.5, 2).unwrap();
    let n = scores.len();
    assert!(scores.extreme_count() as f64 >= 0.9 * n as f64);
    let extremes: Vec<(String, u8)> = (0..n)
        .filter(|&i| scores.polarity(i) >= 0.95 || scores.polarity(i) <= 0.05)
        .map(|i| (scores.ids[i].clone(), (scores.polarity(i) >= 0.5) as u8))
        .collect();
    let (ids, sides): (Vec<String>, Vec<u8>) = extremes.into_iter().unzip();
    assert_eq!(aligned_accuracy(&ids, &sides, &planted), 1.0);
}

#[test]
fn three_anchors_per_side_name_the_poles() {
    let (g, planted) = sixty_forty(3);
    let scores = ensemble_polarity(&g, 20, 1.5, 3).unwrap();
    let mut anchors = Vec::new();
    for side in [Side::Control, Side::Rights] {
        anchors.extend(planted.iter().filter(|(_, s)| **s == side).take(3).map(|(id, s)| (id.clone(), *s)));
    }
    let labels = label_sides(&scores, &anchors).unwrap();
    let decided: Vec<bool> = labels
        .ids
        .iter()
        .zip(&labels.labels)
        .filter(|(_, s)| **s != Side::Unknown)
        .map(|(id, s)| planted[id] == *s)
        .collect();
    let hits = decided.iter().filter(|b| **b).count();
    assert!(hits as f64 >= 0.95 * labels.ids.len() as f64, "{hits} of {}", labels.ids.len());
}

#[test]
fn louvain_beats_bisection_on_many_communities() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..3 {
        let n = 120;
        let ids: Vec<String> = (0..n).map(|i| format!("v{i:03}")).collect();
        let mut edges = Vec::new();
        for s in 0..n {
            for t in 0..n {
                let p = if s % 4 == t % 4 { 0.2 } else { 0.01 };
                if s != t && rng.random::<f64>() < p {
                    edges.push((ids[s].as_str(), ids[t].as_str(), rng.random_range(1..4u64)));
                }
            }
        }
        let g = EndorsementGraph::from_edges(ids.iter().map(String::as_str), edges, 1).unwrap();
        let a = bisect(&g, 1.0, 1).unwrap();
        let groups: Vec<usize> = a.sides.iter().map(|&s| s as usize).collect();
        let q_bisect = modularity(&g, &groups).unwrap();
        let lv = louvain(&g, 1).unwrap();
        assert!(lv.modularity >= q_bisect, "{} < {q_bisect}", lv.modularity);
        assert!(lv.communities >= 3);
    }
}

#[test]
fn correlation_screen_keeps_the_informative_panel_columns() {
    let cfg = SynthConfig {
        state_coefficients: [("perc_vote_republican", 1.0), ("gun_sales", 1.0), ("perc_rural", 1.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        ..SynthConfig::default()
    };
    let informative: Vec<&str> = cfg.state_coefficients.keys().map(String::as_str).collect();
    let mut noise_kept = 0;
    let mut noise_total = 0;
    for seed in 1..=5 {
        let panel = generate_state_panel(&cfg, seed).unwrap();
        let (z, _) = standardize_and_transform(&panel.matrix);
        let sel = select_by_correlation(&z, &panel.ratings, 0.3).unwrap();
        let kept: Vec<&str> = sel.kept.iter().map(|(c, _)| c.as_str()).collect();
        for c in &informative {
            assert!(kept.contains(c), "seed {seed}: {c} dropped");
        }
        noise_kept += kept.len() - informative.len();
        noise_total += z.n_cols() - informative.len();
    }
    assert!((noise_kept as f64) < 0.25 * noise_total as f64, "{noise_kept} of {noise_total} noise columns kept");
}
