use std::time::Instant;

use qas_core::problems::{enumerate_cubic_graphs, hea_circuit, maxcut_hamiltonian, qaoa_circuit, schwinger_hamiltonian, Graph, SchwingerParams};
use qas_core::vqopt::{approximation_ratio, optimize_adam_paramshift, optimize_derivative_free, OptConfig, OptMethod};

#[test]
fn qaoa_k4_depth_two() {
    let g = Graph::complete(4);
    let h = maxcut_hamiltonian(&g).unwrap();
    let bounds = h.extreme_eigenvalues().unwrap();
    let c = qaoa_circuit(&g, 2).unwrap();
    for seed in 0..3 {
        let r = optimize_derivative_free(&c, &h, &OptConfig { restarts: 5, seed, ..Default::default() }).unwrap();
        let eta = approximation_ratio(r.best_energy, &bounds).unwrap();
        assert!(eta >= 0.99, "seed {seed}: eta {eta}");
    }
}

#[test]
fn hea_schwinger_four_sites() {
    let h = schwinger_hamiltonian(4, &SchwingerParams::default()).unwrap();
    let bounds = h.extreme_eigenvalues().unwrap();
    let c = hea_circuit(4, 3).unwrap();
    let cfg = OptConfig { method: OptMethod::AdamParamshift, max_evals: 200, restarts: 3, lr: 0.1, seed: 1, ..Default::default() };
    let r = optimize_adam_paramshift(&c, &h, &cfg).unwrap();
    let eta = approximation_ratio(r.best_energy, &bounds).unwrap();
    assert!(eta >= 0.97, "eta {eta}");
}

#[test]
fn cubic_counts_through_twelve() {
    let start = Instant::now();
    let counts: Vec<usize> = [4, 6, 8, 10, 12].iter().map(|&n| enumerate_cubic_graphs(n).unwrap().len()).collect();
    assert_eq!(counts, vec![1, 2, 5, 19, 85]);
    assert!(start.elapsed().as_secs() < 60, "took {:?}", start.elapsed());
}
