use mcgc_core::graph::{invert_permutation, permute_nodes};
use mcgc_core::model::{
    cluster_schedule, forward, graph_loss, param_gradients, random_graph, Checkpoint, ModelParams, PoolingConfig,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn setup(seed: u64, n: usize, layers: usize, beta: f64) -> (mcgc_core::Graph, ModelParams, PoolingConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_graph(&mut rng, n, 3, 2).unwrap();
    let mut cfg = PoolingConfig::new(layers, 2, 5, cluster_schedule(16, layers)).unwrap();
    cfg.entropy_coeff = beta;
    let params = ModelParams::init(&cfg, 3, 2, seed ^ 0xabc).unwrap();
    (g, params, cfg)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn layer_state_invariants(seed in any::<u64>(), n in 1usize..16, layers in 1usize..4) {
        let (g, params, cfg) = setup(seed, n, layers, 1.0);
        let (probs, state) = forward(&g, &params, &cfg).unwrap();
        prop_assert!((probs.sum() - 1.0).abs() < 1e-9);
        prop_assert_eq!(state.channels.len(), layers + 1);
        prop_assert_eq!(&state.channels[0].adjacency, g.adjacency());
        prop_assert_eq!(&state.channels[0].features, g.features());
        for ch in &state.channels {
            let a = &ch.adjacency;
            prop_assert!(a.iter().zip(a.t().iter()).all(|(x, y)| (x - y).abs() <= 1e-9));
            prop_assert!(ch.features.iter().all(|&v| v >= 0.0));
            prop_assert!(ch.node_repr.iter().all(|&v| v >= 0.0));
            if let Some(c) = &ch.assignment {
                for row in c.rows() {
                    prop_assert!((row.sum() - 1.0).abs() < 1e-6);
                }
            }
        }
        prop_assert!(state.channels.last().unwrap().assignment.is_none());
    }

    #[test]
    fn loss_bounds(seed in any::<u64>(), n in 1usize..16, beta in 0.0f64..3.0) {
        let (g, params, cfg) = setup(seed, n, 3, beta);
        let loss = graph_loss(&g, &params, &cfg).unwrap();
        let (probs, state) = forward(&g, &params, &cfg).unwrap();
        let ce = -probs[g.label()].max(cfg.epsilon).ln();
        let entropy_cap: f64 = cfg.cluster_sizes.iter().map(|&k| (k as f64).ln()).sum::<f64>() * beta;
        prop_assert!(loss >= 0.0);
        prop_assert!(loss - ce >= -1e-12);
        prop_assert!(loss - ce <= entropy_cap + 1e-9);
        prop_assert_eq!(state.assignments().len(), 3);
    }

    #[test]
    fn permutation_leaves_output_and_gradients_unchanged(seed in any::<u64>(), n in 2usize..14) {
        let (g, params, cfg) = setup(seed, n, 2, 1.0);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(1)));
        let h = permute_nodes(&g, &perm).unwrap();
        let back = permute_nodes(&h, &invert_permutation(&perm).unwrap()).unwrap();
        prop_assert_eq!(back.adjacency(), g.adjacency());

        let (a, _) = forward(&g, &params, &cfg).unwrap();
        let (b, _) = forward(&h, &params, &cfg).unwrap();
        prop_assert!(a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= 1e-9));

        let ga = param_gradients(&g, &params, &cfg).unwrap();
        let gb = param_gradients(&h, &params, &cfg).unwrap();
        for ((name, x), (_, y)) in ga.grads.iter().zip(gb.grads.iter()) {
            let worst = x.iter().zip(y.iter()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            prop_assert!(worst <= 1e-8, "{} differs by {}", name, worst);
        }
    }
}

#[test]
fn forward_is_bitwise_deterministic() {
    let (g, params, cfg) = setup(4, 9, 3, 1.0);
    let (a, _) = forward(&g, &params, &cfg).unwrap();
    let (b, _) = forward(&g, &params, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn checkpoint_file_round_trip() {
    let (g, params, cfg) = setup(8, 7, 2, 0.5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.json");
    Checkpoint::new(cfg.clone(), &params).save(&path).unwrap();
    let ck = Checkpoint::load(&path).unwrap();
    assert_eq!(ck.config, cfg);
    let restored = ck.model().unwrap();
    assert_eq!(
        forward(&g, &restored, &cfg).unwrap().0,
        forward(&g, &params, &cfg).unwrap().0
    );
}

#[test]
fn mismatched_features_are_rejected() {
    let (_, params, cfg) = setup(1, 5, 2, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let wide = random_graph(&mut rng, 5, 4, 2).unwrap();
    assert!(forward(&wide, &params, &cfg).is_err());
}
