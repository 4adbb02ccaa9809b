use std::collections::{BTreeSet, HashSet};

use proptest::prelude::*;
use rand::Rng;

use ndsal::acquisition::{
    draw, score_min_margin, score_nds_plus, score_random, score_var_ratio, AcquisitionScore, ClusterDiagnostics, Decay,
    MixingState, Strategy as AcqStrategy,
};
use ndsal::classifier::ProbMatrix;
use ndsal::dominantset::{escalate, replicator_dynamics_observed, ClusterGraph, ParticipationVector, ESCALATION_FACTOR};
use ndsal::harness::{stratified_split, ALConfig};
use ndsal::iostore::{format_config, parse_config, EmbeddingFile, LabelFile};
use ndsal::numerics::Matrix;
use ndsal::SampleId;

fn ids(n: usize) -> Vec<SampleId> {
    (0..n as u64).map(SampleId).collect()
}

fn graph_strategy(max_n: usize) -> impl Strategy<Value = ClusterGraph> {
    (2..=max_n).prop_flat_map(|n| {
        prop::collection::vec(0.0..=1.0f64, n * (n - 1) / 2).prop_map(move |upper| {
            let mut w = Matrix::zeros(n, n);
            let mut it = upper.into_iter();
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = it.next().unwrap();
                    w[(i, j)] = v;
                    w[(j, i)] = v;
                }
            }
            ClusterGraph::new(ids(n), w).unwrap()
        })
    })
}

fn simplex(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, 1..=max_n).prop_filter_map("zero mass", |raw| {
        let s: f64 = raw.iter().sum();
        (s > 1e-6).then(|| raw.iter().map(|v| v / s).collect())
    })
}

fn prob_rows(max_n: usize) -> impl Strategy<Value = ProbMatrix> {
    (2..=6usize, 1..=max_n).prop_flat_map(|(k, n)| {
        prop::collection::vec(0.001..1.0f64, n * k).prop_map(move |raw| {
            let mut data = Vec::with_capacity(raw.len());
            for row in raw.chunks(k) {
                let s: f64 = row.iter().sum();
                data.extend(row.iter().map(|v| v / s));
            }
            ProbMatrix::new(ids(n), k, data).unwrap()
        })
    })
}

/// Score over `n` ids split round-robin into `k` clusters, each cluster's
/// non-dominant pool being its members whose index is in `nondominant`.
fn clustered_score(n: usize, k: usize, nondominant: &BTreeSet<usize>) -> AcquisitionScore {
    let all = ids(n);
    let clusters = (0..k)
        .map(|c| {
            let members: Vec<SampleId> = all.iter().copied().filter(|id| id.0 as usize % k == c).collect();
            let nd = members.iter().copied().filter(|id| nondominant.contains(&(id.0 as usize))).collect();
            ClusterDiagnostics {
                members,
                nondominant: nd,
                cutoff_multiplier: 1.0,
                tau: 0.0,
                shortfall: 0,
                replicator_iterations: 0,
                replicator_converged: true,
            }
        })
        .collect();
    let phi = (0..n).map(|i| if nondominant.contains(&i) { 1.0 } else { 0.0 }).collect();
    AcquisitionScore { ids: all, phi, strategy: AcqStrategy::Nds, alpha: None, clusters }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn replicator_stays_on_simplex_and_climbs(g in graph_strategy(20)) {
        let mut previous = f64::NEG_INFINITY;
        let p = replicator_dynamics_observed(&g, 1e-9, 500, |z, objective| {
            let sum: f64 = z.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9, "sum {sum}");
            assert!(z.iter().all(|v| *v >= 0.0));
            assert!(objective >= previous - 1e-10, "{objective} < {previous}");
            previous = objective;
        });
        prop_assert_eq!(p.z.len(), g.len());
    }

    #[test]
    fn escalation_reaches_the_quota(z in simplex(40), required in 1usize..50) {
        let p = ParticipationVector::from_values(ids(z.len()), z.clone()).unwrap();
        let (last, trace) = escalate(&p, required).unwrap();
        let target = required.min(z.len());
        prop_assert!(last.nondominant_ids.len() >= target);
        for (i, split) in trace.iter().enumerate() {
            prop_assert_eq!(split.cutoff_multiplier, ESCALATION_FACTOR.powi(i as i32));
            let nd: HashSet<_> = split.nondominant_ids.iter().collect();
            let d: HashSet<_> = split.dominant_ids.iter().collect();
            prop_assert!(nd.is_disjoint(&d));
            prop_assert_eq!(nd.len() + d.len(), z.len());
            if i + 1 < trace.len() {
                prop_assert!(split.nondominant_ids.len() < target);
            }
        }
    }

    #[test]
    fn weighted_draws_are_distinct_pool_subsets(weights in prop::collection::vec(0.0..5.0f64, 1..60), m in 1usize..80, seed: u64) {
        let mut score = score_random(&ids(weights.len())).unwrap();
        score.phi = weights.clone();
        score.strategy = AcqStrategy::MinMargin;
        let d = draw(&score, m, seed).unwrap();
        prop_assert_eq!(d.selected.len(), m.min(weights.len()));
        let unique: BTreeSet<_> = d.selected.iter().collect();
        prop_assert_eq!(unique.len(), d.selected.len());
        prop_assert!(d.selected.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(d.selected.iter().all(|id| (id.0 as usize) < weights.len()));
        let positive = weights.iter().filter(|w| **w > 0.0).count();
        if m < weights.len() {
            prop_assert_eq!(d.filled.len(), m.saturating_sub(positive));
        }
        prop_assert_eq!(draw(&score, m, seed).unwrap(), d);
    }

    #[test]
    fn stratified_draws_meet_cluster_quotas(n in 20usize..80, k in 2usize..5, m in 4usize..16, seed: u64, pick in prop::collection::vec(any::<bool>(), 80)) {
        prop_assume!(m < n);
        let nondominant: BTreeSet<usize> = (0..n).filter(|i| pick[*i]).collect();
        let score = clustered_score(n, k, &nondominant);
        let d = draw(&score, m, seed).unwrap();
        prop_assert_eq!(d.selected.len(), m);
        let pools: Vec<usize> = (0..k).map(|c| nondominant.iter().filter(|i| *i % k == c).count()).collect();
        let taken: Vec<usize> = (0..k).map(|c| d.selected.iter().filter(|id| {
            id.0 as usize % k == c && nondominant.contains(&(id.0 as usize))
        }).count()).collect();
        for c in 0..k {
            let quota = m / k + usize::from(c < m % k);
            prop_assert!(taken[c] >= quota.min(pools[c]), "cluster {} took {} of quota {}", c, taken[c], quota);
        }
        prop_assert_eq!(d.filled.len(), m.saturating_sub(nondominant.len()));
        prop_assert!(d.selected.iter().filter(|id| !d.filled.contains(id)).all(|id| nondominant.contains(&(id.0 as usize))));
    }

    #[test]
    fn uncertainty_scores_stay_in_range(p in prob_rows(30)) {
        let k = p.classes() as f64;
        for v in score_var_ratio(&p).unwrap().phi {
            prop_assert!((0.0..=1.0 - 1.0 / k + 1e-12).contains(&v));
        }
        for v in score_min_margin(&p).unwrap().phi {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn nds_plus_mixes_normalized_scores(n in 2usize..40, cycle in 0usize..60, seed: u64) {
        let mut rng = ndsal::seed::rng(seed);
        let nd: BTreeSet<usize> = (0..n).filter(|_| rng.random_bool(0.5)).chain([0]).collect();
        let nds = clustered_score(n, 1, &nd);
        let mut u = score_random(&ids(n)).unwrap();
        u.phi = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        u.strategy = AcqStrategy::MinMargin;
        let mix = MixingState::at_cycle(cycle);
        let s = score_nds_plus(&nds, &u, &mix).unwrap();
        prop_assert!((s.phi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert_eq!(s.alpha, Some(mix.alpha()));
        if cycle == 0 {
            for (a, b) in s.phi.iter().zip(nds.normalized()) {
                prop_assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn alpha_never_increases(rate in 0.0..=1.0f64, cycle in 0usize..200) {
        for decay in [Decay::Additive, Decay::Multiplicative] {
            let a = MixingState::new(rate, decay, cycle).alpha();
            let b = MixingState::new(rate, decay, cycle + 1).alpha();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(b <= a);
        }
        prop_assert_eq!(MixingState::new(rate, Decay::Additive, 0).alpha(), 1.0);
    }

    #[test]
    fn embedding_files_round_trip(n in 1u64..20, d in 1u32..10, bits in prop::collection::vec(any::<u32>(), 200)) {
        let data: Vec<f32> = bits.iter().take((n as usize) * (d as usize)).map(|b| f32::from_bits(*b)).collect();
        let f = EmbeddingFile::new(n, d, data).unwrap();
        let back = EmbeddingFile::from_bytes(&f.to_bytes()).unwrap();
        prop_assert_eq!(back.payload(), f.payload());
    }

    #[test]
    fn label_files_round_trip(raw in prop::collection::btree_map(any::<u32>(), prop::option::of(0usize..7), 0..50)) {
        let entries: Vec<_> = raw.into_iter().map(|(id, c)| (SampleId(u64::from(id)), c)).collect();
        let f = LabelFile { entries };
        prop_assert_eq!(LabelFile::parse(&f.to_text(), 7).unwrap(), f);
    }

    #[test]
    fn configs_round_trip(draw_size in 1usize..50, budget in 100usize..900, seed: u64, decay in 0.0..=1.0f64, freeze: bool) {
        let c = ALConfig {
            draw_size,
            budget,
            seed,
            alpha_decay: decay,
            alpha_schedule: Decay::Multiplicative,
            freeze_clusters: freeze,
            strategy: vec![AcqStrategy::VarRatio, AcqStrategy::NdsPlus],
            ..ALConfig::default()
        };
        prop_assert_eq!(parse_config(&format_config(&c)).unwrap(), c);
    }

    #[test]
    fn split_is_disjoint_and_stratified(labels in prop::collection::vec(0usize..4, 1..300), seed: u64) {
        let all = ids(labels.len());
        let s = stratified_split(&all, &labels, 4, seed).unwrap();
        prop_assert_eq!(s.train.len() + s.test.len(), labels.len());
        prop_assert!(s.train.keys().all(|id| !s.test.contains_key(id)));
        for c in 0..4 {
            let n = labels.iter().filter(|l| **l == c).count();
            let t = s.test.values().filter(|l| **l == c).count();
            prop_assert_eq!(t, (n as f64 * 0.2).round() as usize);
        }
    }
}
