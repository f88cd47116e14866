use proptest::prelude::*;

use rap_lab::graph::{
    build_rap, dropconnect_from_lambda, hamiltonian, lambda_from_dropconnect, FactorGraph,
    RapParams,
};
use rap_lab::net::{init_mlp, load_checkpoint, save_checkpoint, NetArchitecture};

proptest! {
    /// The planted configuration satisfies every interaction, so its
    /// energy is exactly -M, integer arithmetic, no tolerance.
    #[test]
    fn planted_energy_is_minus_m(
        n in 1usize..40,
        depth in 2usize..5,
        m in 0usize..200,
        seed in any::<u64>(),
    ) {
        let (graph, planted) = build_rap(&RapParams {
            population_size: n,
            depth,
            num_paths: m,
            seed,
        }).unwrap();
        prop_assert_eq!(hamiltonian(&graph, &planted.values).unwrap(), -(m as f64));
    }

    /// Mean degree -> keep probability -> mean degree is the identity.
    #[test]
    fn dropconnect_lambda_inverse(
        n in 1usize..5000,
        depth in 2usize..6,
        frac in 1e-6f64..1.0,
    ) {
        let lambda = frac * n as f64;
        let p_dc = dropconnect_from_lambda(lambda, n, depth).unwrap();
        let back = lambda_from_dropconnect(p_dc, n, depth).unwrap();
        prop_assert!((back - lambda).abs() <= 1e-12 * lambda.max(1.0));
    }

    /// Graph text dumps parse back to an identical graph.
    #[test]
    fn graph_dump_load_round_trip(
        n in 1usize..20,
        depth in 2usize..5,
        m in 0usize..60,
        seed in any::<u64>(),
    ) {
        let (graph, _) = build_rap(&RapParams {
            population_size: n,
            depth,
            num_paths: m,
            seed,
        }).unwrap();
        let mut buf = Vec::new();
        graph.dump(&mut buf).unwrap();
        let loaded = FactorGraph::load(&buf[..]).unwrap();
        prop_assert_eq!(graph, loaded);
    }

    /// Checkpoints round-trip bit for bit.
    #[test]
    fn checkpoint_round_trip(
        w0 in 1usize..6,
        w1 in 1usize..6,
        w2 in 1usize..6,
        seed in any::<u64>(),
    ) {
        let arch = NetArchitecture::new(vec![w0, w1, w2]).unwrap();
        let mlp = init_mlp(&arch, seed);
        let mut buf = Vec::new();
        save_checkpoint(&mlp, &mut buf).unwrap();
        let loaded = load_checkpoint(&buf[..]).unwrap();
        prop_assert_eq!(mlp, loaded);
    }
}
