//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use qas_core::experiment::{
    run_baseline, run_training, summarize, write_report, Baseline, ExperimentConfig, Problem, RunReport, SeedRun,
};
use qas_core::nn::{abs_act, abs_backward, relu, relu_backward, Gru, GruState, Linear, Parameters};
use qas_core::par::Exec;
use qas_core::problems::{canonical_code, enumerate_cubic_graphs, hea_circuit, maxcut_hamiltonian, qaoa_circuit, schwinger_hamiltonian, Graph, SchwingerParams};
use qas_core::qmix::{batch_loss_grad, AgentNet, EpisodeRecord, Mixer, MixerNet, Networks};
use qas_core::statevec::prepare;
use qas_core::vqopt::{approximation_ratio, optimize_adam_paramshift, optimize_derivative_free, OptConfig, OptMethod};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    if took > limit {
        o.pass = false;
    }
    o.detail = format!("{} ({:.1}s, limit {}s)", o.detail, took.as_secs_f64(), limit.as_secs());
    o
}

fn rvec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest relative error between analytic and central-difference gradients.
/// Step 1e-5 keeps round-off below the truncation error for O(1) losses.
fn fd_error(analytic: &[f64], x0: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let h = 1e-5;
    let mut x = x0.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        x[i] = x0[i] + h;
        let up = f(&x);
        x[i] = x0[i] - h;
        let down = f(&x);
        x[i] = x0[i];
        let num = (up - down) / (2.0 * h);
        let err = (analytic[i] - num).abs() / (analytic[i].abs() + num.abs()).max(1e-6);
        worst = worst.max(err);
    }
    worst
}

fn c1_simulator() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut amp, mut ex) = (0.0f64, 0.0f64);
    let trials = 150;
    for t in 0..trials {
        let n = 1 + t % 3;
        let circ = random_circuit(&mut rng, n, 14);
        let params: Vec<f64> = (0..circ.n_param_groups()).map(|_| rng.random_range(-4.0..4.0)).collect();
        let fast = prepare(&circ, &params).unwrap();
        let slow = dense_state(&circ, &params);
        for (a, b) in fast.amplitudes().iter().zip(&slow) {
            amp = amp.max((a - b).norm());
        }
        let h = random_hamiltonian(&mut rng, n, 6);
        let e = expect(&dense_hamiltonian(&h), &slow);
        ex = ex.max((fast.expectation(&h).unwrap() - e.re).abs()).max(e.im.abs());
    }
    outcome(amp < 1e-10 && ex < 1e-10, format!("{trials} circuits, max amplitude error {amp:.1e}, max expectation error {ex:.1e}"))
}

fn c2_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut errs: Vec<(&str, f64)> = Vec::new();

    let layer = Linear::init(5, 4, &mut rng);
    let x = rvec(&mut rng, 5);
    let c = rvec(&mut rng, 4);
    let mut g = Linear::zeros(5, 4);
    let dx = layer.backward(&x, &c, &mut g);
    let p0 = layer.flatten();
    errs.push(("linear params", fd_error(&g.flatten(), &p0, |p| {
        let mut l = layer.clone();
        l.set_flat(p);
        dot(&c, &l.forward(&x).unwrap())
    })));
    errs.push(("linear input", fd_error(&dx, &x, |xx| dot(&c, &layer.forward(xx).unwrap()))));

    let away: Vec<f64> = rvec(&mut rng, 8).into_iter().map(|v| if v.abs() < 0.05 { v + 0.1 } else { v }).collect();
    let c8 = rvec(&mut rng, 8);
    errs.push(("relu", fd_error(&relu_backward(&away, &c8), &away, |xx| dot(&c8, &relu(xx)))));
    errs.push(("abs", fd_error(&abs_backward(&away, &c8), &away, |xx| dot(&c8, &abs_act(xx)))));

    let gru = Gru::init(3, 4, &mut rng);
    let xs: Vec<Vec<f64>> = (0..5).map(|_| rvec(&mut rng, 3)).collect();
    let cs: Vec<Vec<f64>> = (0..5).map(|_| rvec(&mut rng, 4)).collect();
    let h0 = GruState { hidden: rvec(&mut rng, 4) };
    let loss = |net: &Gru, xs: &[Vec<f64>], h0: &GruState| {
        let mut h = h0.clone();
        let mut l = 0.0;
        for (x, c) in xs.iter().zip(&cs) {
            h = net.forward(x, &h).unwrap().0;
            l += dot(c, &h.hidden);
        }
        l
    };
    let mut caches = Vec::new();
    let mut h = h0.clone();
    for x in &xs {
        let (next, cache) = gru.forward(x, &h).unwrap();
        caches.push(cache);
        h = next;
    }
    let mut gg = Gru::zeros(3, 4);
    let mut carry = vec![0.0; 4];
    let mut dxs = vec![Vec::new(); 5];
    for t in (0..5).rev() {
        let dh: Vec<f64> = cs[t].iter().zip(&carry).map(|(a, b)| a + b).collect();
        let (dx, dprev) = gru.backward(&caches[t], &dh, &mut gg);
        dxs[t] = dx;
        carry = dprev;
    }
    errs.push(("gru 5-step params", fd_error(&gg.flatten(), &gru.flatten(), |p| {
        let mut n = gru.clone();
        n.set_flat(p);
        loss(&n, &xs, &h0)
    })));
    errs.push(("gru 5-step first input", fd_error(&dxs[0], &xs[0], |x0| {
        let mut v = xs.clone();
        v[0] = x0.to_vec();
        loss(&gru, &v, &h0)
    })));
    errs.push(("gru 5-step initial state", fd_error(&carry, &h0.hidden, |hh| loss(&gru, &xs, &GruState { hidden: hh.to_vec() }))));

    let (m, obs, acts, sd) = (2, 4, 3, 5);
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let online = Networks { agent: AgentNet::init(obs, acts, 6, &mut r), mixer: Mixer::Qmix(MixerNet::init(m, sd, 5, &mut r)) };
    let target = Networks { agent: AgentNet::init(obs, acts, 6, &mut r), mixer: Mixer::Qmix(MixerNet::init(m, sd, 5, &mut r)) };
    let episodes: Vec<EpisodeRecord> = [3usize, 2]
        .iter()
        .map(|&len| EpisodeRecord {
            states: (0..=len).map(|_| rvec(&mut rng, sd)).collect(),
            observations: (0..=len).map(|_| (0..m).map(|_| rvec(&mut rng, obs)).collect()).collect(),
            actions: (0..len).map(|_| (0..m).map(|_| rng.random_range(0..acts)).collect()).collect(),
            rewards: rvec(&mut rng, len),
            dones: (0..len).map(|t| t + 1 == len).collect(),
        })
        .collect();
    let batch: Vec<&EpisodeRecord> = episodes.iter().collect();
    let (_, grad) = batch_loss_grad(&online, &target, &batch, 0.9, Exec::Sequential).unwrap();
    errs.push(("qmix loss", fd_error(&grad.flatten(), &online.flatten(), |p| {
        let mut n = online.clone();
        n.set_flat(p);
        batch_loss_grad(&n, &target, &batch, 0.9, Exec::Sequential).unwrap().0
    })));

    let worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    let list: Vec<String> = errs.iter().map(|(k, e)| format!("{k} {e:.1e}")).collect();
    outcome(worst < 1e-5, format!("max relative error {worst:.1e} [{}]", list.join(", ")))
}

fn c3_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = f64::INFINITY;
    let h = 1e-5;
    for k in 0..100 {
        let m = 1 + k % 4;
        let sd = 3 + k % 5;
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(k as u64);
        let net = MixerNet::init(m, sd, 8, &mut r);
        let s: Vec<f64> = (0..sd).map(|_| rng.random_range(-3.0..3.0)).collect();
        let q: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
        for i in 0..m {
            let (mut up, mut dn) = (q.clone(), q.clone());
            up[i] += h;
            dn[i] -= h;
            let d = (net.forward(&up, &s).unwrap().0 - net.forward(&dn, &s).unwrap().0) / (2.0 * h);
            worst = worst.min(d);
        }
    }
    outcome(worst >= -1e-9, format!("100 mixers, smallest dQ_tot/dQ_i {worst:.2e}"))
}

fn c4_corpus() -> Outcome {
    let mut counts = Vec::new();
    let mut distinct = true;
    let mut cubic = true;
    for n in [4, 6, 8, 10, 12] {
        let gs = enumerate_cubic_graphs(n).unwrap();
        let mut codes: Vec<Vec<u32>> = gs.iter().map(canonical_code).collect();
        cubic &= gs.iter().all(Graph::is_cubic);
        codes.sort();
        codes.dedup();
        distinct &= codes.len() == gs.len();
        counts.push(gs.len());
    }
    outcome(counts == [1, 2, 5, 19, 85] && distinct && cubic, format!("counts {counts:?}, pairwise non-isomorphic {distinct}, all cubic {cubic}"))
}

fn c5_qaoa() -> Outcome {
    let g = Graph::complete(4);
    let h = maxcut_hamiltonian(&g).unwrap();
    let c = qaoa_circuit(&g, 2).unwrap();
    let r = optimize_derivative_free(&c, &h, &OptConfig { restarts: 5, seed: 5, ..Default::default() }).unwrap();
    let eta = approximation_ratio(r.best_energy, &h.extreme_eigenvalues().unwrap()).unwrap();
    let (n2q, npar) = (c.cnot_count(), c.param_count());
    outcome(eta >= 0.98 && n2q == 24 && npar == 4, format!("eta {eta:.4}, N_2q {n2q}, N_par {npar}"))
}

fn c6_hea() -> Outcome {
    let h = schwinger_hamiltonian(4, &SchwingerParams::default()).unwrap();
    let c = hea_circuit(4, 3).unwrap();
    let cfg = OptConfig { method: OptMethod::AdamParamshift, max_evals: 200, restarts: 3, lr: 0.1, seed: 6, ..Default::default() };
    let r = optimize_adam_paramshift(&c, &h, &cfg).unwrap();
    let eta = approximation_ratio(r.best_energy, &h.extreme_eigenvalues().unwrap()).unwrap();
    let (n2q, npar) = (c.cnot_count(), c.param_count());
    outcome(eta >= 0.97 && n2q == 12 && npar == 36, format!("eta {eta:.4}, N_2q {n2q}, N_par {npar}"))
}

fn search(problem: Problem, agents: usize, seeds: std::ops::Range<u64>, episodes: u64) -> RunReport {
    let mut c = ExperimentConfig::defaults_for(problem, 4, agents);
    c.seeds = seeds.collect();
    c.episodes = episodes;
    c.stop_at_threshold = true;
    run_training(&c).unwrap()
}

/// Median with misses counted as infinitely slow.
fn median_of(runs: &[SeedRun], f: impl Fn(&SeedRun) -> Option<u64>) -> f64 {
    let mut v: Vec<f64> = runs.iter().map(|r| f(r).map_or(f64::INFINITY, |x| x as f64)).collect();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    }
}

fn c7_end_to_end() -> Outcome {
    let rep = search(Problem::MaxcutCubic, 4, 0..9, 300);
    let hits = rep.runs.iter().filter(|r| r.hit.is_some()).count();
    let upd = median_of(&rep.runs, |r| r.hit.map(|h| h.grad_updates));
    let env = median_of(&rep.runs, |r| r.hit.map(|h| h.env_steps));
    let eps = median_of(&rep.runs, |r| r.hit.map(|h| h.episodes));
    let best = rep.best().map_or(0.0, |b| b.mean_train_eta());
    outcome(
        2 * hits > rep.runs.len() && upd <= 200.0,
        format!("{hits}/{} seeds satisfactory, best eta {best:.4}; median to threshold: {upd} updates, {env} env steps, {eps} episodes", rep.runs.len()),
    )
}

fn c8_speedup() -> Outcome {
    let seeds = 0..25;
    let mut parts = Vec::new();
    let mut pass = true;
    for (problem, name) in [(Problem::MaxcutCubic, "maxcut"), (Problem::Schwinger, "schwinger")] {
        let one = search(problem, 1, seeds.clone(), 400);
        let four = search(problem, 4, seeds.clone(), 400);
        let s1 = median_of(&one.runs, |r| r.hit.map(|h| h.env_steps));
        let s4 = median_of(&four.runs, |r| r.hit.map(|h| h.env_steps));
        let u1 = median_of(&one.runs, |r| r.hit.map(|h| h.grad_updates));
        let u4 = median_of(&four.runs, |r| r.hit.map(|h| h.grad_updates));
        let ratio = s4 / s1;
        pass &= ratio <= 0.5;
        parts.push(format!("{name}: median env steps m=1 {s1}, m=4 {s4}, ratio {ratio:.2} (updates {u1} vs {u4})"));
    }
    outcome(pass, format!("25 seeds each; {}", parts.join("; ")))
}

fn small(problem: Problem, n: usize, agents: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::defaults_for(problem, n, agents);
    c.seeds = vec![0, 1];
    c.episodes = 20;
    c.trainer.hidden = 16;
    c.trainer.mixing_embed = 16;
    c.trainer.batch_episodes = 4;
    c
}

fn c9_summary() -> Outcome {
    let mut reports = vec![
        run_training(&small(Problem::MaxcutCubic, 4, 4)).unwrap(),
        run_training(&small(Problem::MaxcutCubic, 6, 3)).unwrap(),
        run_training(&small(Problem::MaxcutCubic, 6, 1)).unwrap(),
        run_training(&small(Problem::Schwinger, 4, 2)).unwrap(),
    ];
    for (p, n, b) in [(Problem::MaxcutCubic, 4, Baseline::Qaoa { p: 2 }), (Problem::MaxcutCubic, 6, Baseline::Qaoa { p: 2 }), (Problem::Schwinger, 4, Baseline::Hea { layers: 3 })] {
        let mut c = ExperimentConfig::defaults_for(p, n, n);
        c.baseline = b;
        reports.push(run_baseline(&c).unwrap());
    }
    let s = summarize(&reports).unwrap();
    let csv = s.comparison_csv();
    let steps = s.steps_csv();
    let rows_ok = s.comparison.len() == 7 && steps.lines().count() == 5;
    let widths_ok = csv.lines().all(|l| l.split(',').count() == 9) && steps.lines().all(|l| l.split(',').count() == 14);
    let schwinger_blank = s.comparison.iter().filter(|r| r.problem == Problem::Schwinger).all(|r| r.eta_test.is_none());
    let qaoa6 = s.comparison.iter().find(|r| r.n == 6 && r.method == "qaoa p=2");
    let qaoa_ok = qaoa6.is_some_and(|r| r.eta_test.is_some() && r.n_2q == Some(36) && r.n_par == Some(4));
    outcome(
        rows_ok && widths_ok && schwinger_blank && qaoa_ok,
        format!("{} comparison rows, {} step rows, fixed widths {widths_ok}, Schwinger test column blank {schwinger_blank}, n=6 QAOA row {qaoa_ok}", s.comparison.len(), s.steps.len()),
    )
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(Problem::MaxcutCubic, 4, 2);
    c.deterministic = true;
    c.episodes = 40;
    let read = |d: &Path, s: u64| std::fs::read(d.join(format!("seed-{s}")).join("training.csv")).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    write_report(&run_training(&c).unwrap(), &a).unwrap();
    write_report(&run_training(&c).unwrap(), &b).unwrap();
    let same = c.seeds.iter().all(|&s| read(&a, s) == read(&b, s));
    let bytes: usize = c.seeds.iter().map(|&s| read(&a, s).len()).sum();
    outcome(same, format!("two deterministic runs, {} seeds, {bytes} CSV bytes, identical {same}", c.seeds.len()))
}

fn main() {
    let criteria: Vec<(&str, Duration, fn() -> Outcome)> = vec![
        ("simulator matches dense oracle", Duration::from_secs(10), c1_simulator),
        ("gradients match finite differences", Duration::from_secs(30), c2_gradients),
        ("mixer is monotone", Duration::from_secs(30), c3_monotonicity),
        ("cubic corpus counts", Duration::from_secs(60), c4_corpus),
        ("QAOA baseline on K4", Duration::from_secs(30), c5_qaoa),
        ("HEA baseline on Schwinger", Duration::from_secs(120), c6_hea),
        ("end-to-end search on K4", Duration::from_secs(900), c7_end_to_end),
        ("multi-agent speedup", Duration::from_secs(7200), c8_speedup),
        ("summary tables", Duration::from_secs(600), c9_summary),
        ("deterministic logs", Duration::from_secs(600), c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        let o = timed(limit, f);
        failed += usize::from(!o.pass);
        println!("criterion {:>2} {}: {}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, name, o.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
