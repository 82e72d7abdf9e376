//! Sequential vs rayon execution of the three data-parallel hot spots:
//! optimizer restarts, per-instance reward evaluation and the batched TD loss.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qas_core::env::{Env, EnvConfig, Instance, RewardMode, SystemLayout};
use qas_core::par::Exec;
use qas_core::problems::{enumerate_cubic_graphs, hea_circuit, maxcut_hamiltonian, schwinger_hamiltonian, SchwingerParams};
use qas_core::qmix::{batch_loss_grad, AgentNet, EpisodeRecord, Mixer, MixerNet, Networks};
use qas_core::rng::{stream_rng, Stream};
use qas_core::vqopt::{optimize_compiled, OptConfig, OptMethod};
use rand::Rng;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn restarts(c: &mut Criterion) {
    let h = schwinger_hamiltonian(8, &SchwingerParams::default()).unwrap().compile();
    let circ = hea_circuit(8, 2).unwrap();
    let mut g = c.benchmark_group("restarts/hea_n8_x8");
    g.sample_size(10);
    for (name, exec) in MODES {
        let cfg = OptConfig { method: OptMethod::AdamParamshift, max_evals: 10, restarts: 8, lr: 0.1, exec, ..OptConfig::default() };
        g.bench_function(name, |b| b.iter(|| optimize_compiled(black_box(&circ), &h, &cfg).unwrap()));
    }
    g.finish();
}

fn reward(c: &mut Criterion) {
    let graphs = enumerate_cubic_graphs(10).unwrap();
    let insts: Vec<Instance> = graphs.iter().take(12).map(|g| Instance::new("g", maxcut_hamiltonian(g).unwrap()).unwrap()).collect();
    let mut g = c.benchmark_group("env_step/maxcut_n10_x12");
    g.sample_size(10);
    for (name, exec) in MODES {
        let cfg = EnvConfig {
            reward_mode: RewardMode::AveragedInstances,
            share_params_per_step: true,
            inner: OptConfig { exec, max_evals: 60, ..OptConfig::default() },
            ..EnvConfig::default()
        };
        let env = Env::new(SystemLayout::new(10, 10).unwrap(), cfg, insts.clone()).unwrap();
        g.bench_function(name, |b| {
            b.iter(|| {
                let mut s = env.reset(1).unwrap();
                env.step(&mut s, &[0, 1, 4, 2, 4, 0, 1, 4, 2, 0]).unwrap();
                env.step(&mut s, &[1, 0, 3, 4, 0, 1, 4, 3, 4, 1]).unwrap()
            })
        });
    }
    g.finish();
}

fn episode(rng: &mut qas_core::rng::Rng, m: usize, obs: usize, acts: usize, sd: usize, len: usize) -> EpisodeRecord {
    let mut v = |k: usize| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    EpisodeRecord {
        states: (0..=len).map(|_| v(sd)).collect(),
        observations: (0..=len).map(|_| (0..m).map(|_| v(obs)).collect()).collect(),
        actions: (0..len).map(|t| (0..m).map(|i| (t + i) % acts).collect()).collect(),
        rewards: v(len),
        dones: (0..len).map(|t| t + 1 == len).collect(),
    }
}

fn td_loss(c: &mut Criterion) {
    let mut g = c.benchmark_group("td_loss");
    g.sample_size(10);
    for m in [1usize, 4] {
        let mut rng = stream_rng(3, Stream::TrainerInit, &[m as u64]);
        let (obs, acts, sd) = (5 + 4 + 4 / m * 4 + 1 + m, 4 / m * 4 + 1, 32);
        let online = Networks { agent: AgentNet::init(obs, acts, 64, &mut rng), mixer: Mixer::Qmix(MixerNet::init(m, sd, 64, &mut rng)) };
        let target = online.clone();
        let eps: Vec<EpisodeRecord> = (0..32).map(|_| episode(&mut rng, m, obs, acts, sd, 15)).collect();
        let batch: Vec<&EpisodeRecord> = eps.iter().collect();
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, format!("m{m}_b32_t15")), &batch, |b, batch| {
                b.iter(|| batch_loss_grad(&online, &target, batch, 0.99, exec).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, restarts, reward, td_loss);
criterion_main!(benches);
