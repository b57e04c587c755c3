use std::collections::{BTreeMap, HashMap};

use engage_core::features::{
    gini, join_external, standardize_and_transform, state_network_features, ExternalTable, FeatureMatrix,
    Provenance,
};
use engage_core::graph::EndorsementGraph;
use engage_core::ingest::StateCode;
use engage_core::stats::{
    class_weights, fold_assignment, logistic_loss_grad, ols, train, vif_prune, ClassifierKind, ClassifierSpec,
};
use engage_core::text::{lexicon_rate, log_odds_dirichlet, shannon_entropy, train_nb, Lexicon, TokenDoc};
use engage_core::Side;
use proptest::collection::vec;
use proptest::prelude::*;

fn cfg() -> ProptestConfig {
    ProptestConfig::with_cases(64)
}

fn corpus() -> impl Strategy<Value = HashMap<String, u64>> {
    proptest::collection::hash_map("[a-f]{1,2}", 1u64..40, 1..12)
}

fn pooled(a: &HashMap<String, u64>, b: &HashMap<String, u64>) -> HashMap<String, u64> {
    let mut out = a.clone();
    for (k, v) in b {
        *out.entry(k.clone()).or_insert(0) += v;
    }
    out
}

/// Rows of `p` columns with some spread in every column.
fn design(n: std::ops::Range<usize>, p: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    vec(vec(-10.0f64..10.0, p), n).prop_filter("columns need spread", move |rows| {
        (0..p).all(|j| {
            let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), r| (l.min(r[j]), h.max(r[j])));
            hi - lo > 1.0
        })
    })
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn rights_only_token_never_lowers_p_rights(extra in vec("[a-e]", 0..15), copies in 1usize..4) {
        let mut docs = BTreeMap::new();
        let mut labels = BTreeMap::new();
        for (i, (side, words)) in [
            (Side::Rights, "arms arms carry a b"),
            (Side::Rights, "arms carry c d"),
            (Side::Control, "safety ban a c"),
            (Side::Control, "safety b d e"),
        ]
        .into_iter()
        .enumerate()
        {
            let id = format!("u{i}");
            docs.insert(id.clone(), TokenDoc::new(id.clone(), words.split(' ').map(String::from).collect()));
            labels.insert(id, side);
        }
        let model = train_nb(&docs, &labels, 1.0, 1).unwrap();
        let base = TokenDoc::new("x", extra.clone());
        let mut tokens = extra;
        tokens.extend(std::iter::repeat_n("arms".to_string(), copies));
        let more = TokenDoc::new("x", tokens);
        prop_assert!(model.p_rights(&more) >= model.p_rights(&base));
    }

    #[test]
    fn log_odds_swap_is_antisymmetric(a in corpus(), b in corpus(), scale in 0.001f64..2.0) {
        let bg = pooled(&a, &b);
        let ab = log_odds_dirichlet(&a, &b, &bg, scale).unwrap();
        let ba = log_odds_dirichlet(&b, &a, &bg, scale).unwrap();
        prop_assert_eq!(ab.entries.len(), ba.entries.len());
        for (x, y) in ab.entries.iter().zip(&ba.entries) {
            prop_assert_eq!(x.delta, -y.delta);
            prop_assert_eq!(x.z, -y.z);
        }
    }

    #[test]
    fn entropy_is_bounded_by_support(counts in vec(0u64..50, 0..30)) {
        let h = shannon_entropy(counts.iter().copied());
        let support = counts.iter().filter(|&&c| c > 0).count();
        prop_assert!(h >= 0.0);
        if support > 0 {
            prop_assert!(h <= (support as f64).log2() + 1e-12);
        } else {
            prop_assert_eq!(h, 0.0);
        }
    }

    #[test]
    fn entropy_ignores_order(mut counts in vec(0u64..50, 1..30)) {
        let h = shannon_entropy(counts.iter().copied());
        counts.reverse();
        prop_assert_eq!(h, shannon_entropy(counts.iter().copied()));
    }

    #[test]
    fn lexicon_rates_are_shares(tokens in vec("[a-h]", 0..40), terms in vec("[a-h]", 0..5)) {
        let rate = lexicon_rate(&TokenDoc::new("u", tokens), &Lexicon::from_terms(terms));
        prop_assert!((0.0..=1.0).contains(&rate));
    }

    #[test]
    fn gini_is_scale_invariant(v in vec(0.0f64..100.0, 1..30), c in 0.01f64..100.0) {
        let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
        prop_assert!((gini(&v) - gini(&scaled)).abs() < 1e-9);
        prop_assert!((0.0..1.0).contains(&gini(&v)));
    }

    #[test]
    fn standardized_columns_have_zero_mean_unit_sd(rows in vec(vec(-50.0f64..50.0, 3), 3..30)) {
        let keys: Vec<String> = (0..rows.len()).map(|i| format!("k{i}")).collect();
        let mut m = FeatureMatrix::new(keys).unwrap();
        for j in 0..3 {
            m.push_column(format!("c{j}"), Provenance::Content, rows.iter().map(|r| Some(r[j])).collect()).unwrap();
        }
        let (s, logs) = standardize_and_transform(&m);
        for (c, log) in s.columns().iter().zip(&logs) {
            let v: Vec<f64> = c.present().collect();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9);
            if !log.constant {
                let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                prop_assert!((sd - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn joins_leave_existing_cells_alone(
        cells in vec(proptest::option::of(-5.0f64..5.0), 6),
        table in vec(proptest::option::of(-5.0f64..5.0), 4),
    ) {
        let keys: Vec<String> = (0..6).map(|i| format!("r{i}")).collect();
        let mut m = FeatureMatrix::new(keys.clone()).unwrap();
        m.push_column("own", Provenance::Network, cells.clone()).unwrap();
        let mut csv = String::from("state,ext\n");
        for (i, v) in table.iter().enumerate() {
            csv.push_str(&format!("S{i},{}\n", v.map_or("NA".to_string(), |x| x.to_string())));
        }
        let t = ExternalTable::from_csv(csv.as_bytes(), Provenance::Health).unwrap();
        let map: BTreeMap<String, String> = keys.iter().enumerate().map(|(i, k)| (k.clone(), format!("S{}", i % 5))).collect();
        let joined = join_external(&m, &t, &map).unwrap();
        prop_assert_eq!(&joined.column("own").unwrap().values, &cells);
        prop_assert_eq!(joined.keys(), m.keys());
        prop_assert_eq!(joined.n_cols(), 2);
    }

    #[test]
    fn state_node_counts_add_up(
        edges in vec((0usize..15, 0usize..15, 1u64..4), 1..40),
        placement in vec(0usize..4, 15),
        side_bits in vec(0u8..3, 15),
    ) {
        let ids: Vec<String> = (0..15).map(|i| format!("u{i:02}")).collect();
        let edges: Vec<(&str, &str, u64)> =
            edges.iter().filter(|(s, t, _)| s != t).map(|&(s, t, w)| (ids[s].as_str(), ids[t].as_str(), w)).collect();
        let mut merged: BTreeMap<(&str, &str), u64> = BTreeMap::new();
        for (s, t, w) in edges {
            *merged.entry((s, t)).or_insert(0) += w;
        }
        let g = EndorsementGraph::from_edges(ids.iter().map(String::as_str), merged.into_iter().map(|((s, t), w)| (s, t, w)), 1).unwrap();
        let states: Vec<StateCode> = ["CA", "NY", "TX"].iter().map(|s| s.parse().unwrap()).collect();
        // Placement 3 leaves the user without a state.
        let state_of: BTreeMap<String, StateCode> = ids
            .iter()
            .zip(&placement)
            .filter(|(_, &p)| p < 3)
            .map(|(id, &p)| (id.clone(), states[p]))
            .collect();
        let sides: BTreeMap<String, Side> = ids
            .iter()
            .zip(&side_bits)
            .map(|(id, &b)| (id.clone(), [Side::Control, Side::Rights, Side::Unknown][b as usize]))
            .collect();
        let m = state_network_features(&g, &state_of, &sides, &states).unwrap();
        let total: f64 = (0..3).map(|i| m.get(i, "net_nodes").unwrap()).sum();
        prop_assert_eq!(total as usize, state_of.len());
        for i in 0..3 {
            let (all, ctl, rts) = (m.get(i, "net_nodes").unwrap(), m.get(i, "net_ctl_nodes").unwrap(), m.get(i, "net_rts_nodes").unwrap());
            prop_assert!(ctl + rts <= all);
            prop_assert!(m.get(i, "net_eig_nodes").unwrap() >= all);
        }
    }

    #[test]
    fn ols_residuals_are_orthogonal_to_the_design(rows in design(12..40, 3), noise in vec(-1.0f64..1.0, 40)) {
        let y: Vec<f64> = rows.iter().zip(&noise).map(|(r, e)| 2.0 + r[0] - 0.5 * r[2] + e).collect();
        let names: Vec<String> = (0..3).map(|j| format!("x{j}")).collect();
        let fit = ols(&rows, &y, &names).unwrap();
        let scale: f64 = y.iter().map(|v| v.abs()).sum::<f64>() * 10.0;
        prop_assert!(fit.residuals.iter().sum::<f64>().abs() < 1e-9 * scale);
        for j in 0..3 {
            let dot: f64 = rows.iter().zip(&fit.residuals).map(|(r, e)| r[j] * e).sum();
            prop_assert!(dot.abs() < 1e-9 * scale);
        }
        prop_assert!((0.0..=1.0 + 1e-12).contains(&fit.r2));
    }

    #[test]
    fn vif_pruning_ignores_column_order(rows in design(15..30, 4), rot in 0usize..4) {
        let mut cols: Vec<Vec<f64>> = (0..4).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        // Make one column nearly a combination of two others.
        cols[3] = cols[0].iter().zip(&cols[1]).zip(&cols[3]).map(|((a, b), c)| a + b + 0.01 * c).collect();
        let names: Vec<String> = (0..4).map(|j| format!("x{j}")).collect();
        let a = vif_prune(&cols, &names, 6.0).unwrap();
        let (mut rc, mut rn) = (cols.clone(), names.clone());
        rc.rotate_left(rot);
        rn.rotate_left(rot);
        let b = vif_prune(&rc, &rn, 6.0).unwrap();
        prop_assert_eq!(a.removed.iter().map(|r| &r.0).collect::<Vec<_>>(), b.removed.iter().map(|r| &r.0).collect::<Vec<_>>());
        prop_assert_eq!(a.kept.iter().map(|r| &r.0).collect::<Vec<_>>(), b.kept.iter().map(|r| &r.0).collect::<Vec<_>>());
        prop_assert!(a.kept.iter().all(|(_, v)| *v < 6.0));
    }

    #[test]
    fn class_weights_balance_the_classes(y in vec(any::<bool>(), 2..200)) {
        let pos = y.iter().filter(|b| **b).count();
        prop_assume!(pos > 0 && pos < y.len());
        let [w0, w1] = class_weights(&y).unwrap();
        let n = y.len() as f64;
        let sum = w0 * (y.len() - pos) as f64 + w1 * pos as f64;
        prop_assert!((sum - n).abs() <= 2.0 * f64::EPSILON * n);
        prop_assert!((w0 * (y.len() - pos) as f64 - w1 * pos as f64).abs() <= f64::EPSILON * n);
    }

    #[test]
    fn folds_are_a_reproducible_partition(n in 2usize..200, k in 2usize..10, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let a = fold_assignment(n, k, seed);
        prop_assert_eq!(&a, &fold_assignment(n, k, seed));
        let mut all: Vec<usize> = a.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = a.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn logistic_gradient_matches_finite_differences(
        theta in vec(-2.0f64..2.0, 3),
        x in vec(vec(-3.0f64..3.0, 2), 5..20),
        bits in vec(any::<bool>(), 20),
        c in 0.1f64..5.0,
    ) {
        let y = &bits[..x.len()];
        let w: Vec<f64> = y.iter().map(|b| if *b { 1.3 } else { 0.8 }).collect();
        let (_, g) = logistic_loss_grad(&theta, &x, y, &w, c);
        for j in 0..3 {
            let h = 1e-5;
            let (mut p, mut m) = (theta.clone(), theta.clone());
            p[j] += h;
            m[j] -= h;
            let fd = (logistic_loss_grad(&p, &x, y, &w, c).0 - logistic_loss_grad(&m, &x, y, &w, c).0) / (2.0 * h);
            prop_assert!((fd - g[j]).abs() <= 1e-5 * (1.0 + g[j].abs()));
        }
    }

    #[test]
    fn flipping_labels_negates_the_logistic_model(x in vec(vec(-3.0f64..3.0, 2), 8..40), bits in vec(any::<bool>(), 40)) {
        let y: Vec<bool> = bits[..x.len()].to_vec();
        let pos = y.iter().filter(|b| **b).count();
        prop_assume!(pos > 0 && pos < y.len());
        let flipped: Vec<bool> = y.iter().map(|b| !b).collect();
        let spec = ClassifierSpec::new(ClassifierKind::Logreg, 1);
        let a = train(&spec, &x, &y).unwrap();
        let b = train(&spec, &x, &flipped).unwrap();
        let (a, b) = (a.linear().unwrap(), b.linear().unwrap());
        prop_assert!((a.intercept + b.intercept).abs() < 1e-4);
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            prop_assert!((wa + wb).abs() < 1e-4);
        }
    }
}
