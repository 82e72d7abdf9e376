//! QMIX value decomposition: shared recurrent agents, a monotone mixer,
//! episode replay and TD training. With one agent and [`Mixer::Identity`]
//! the same code is a recurrent DQN.

mod nets;

use std::collections::VecDeque;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use nets::{agent_q, mix, AgentCache, AgentNet, MixCache, Mixer, MixerCache, MixerNet, Networks};

use crate::error::{config, usage, QasError, Result};
use crate::nn::{AdamState, GruState, Parameters};
use crate::par::{self, Exec};
use crate::rng::{stream_rng, Rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixerKind {
    #[default]
    Qmix,
    /// Single-agent baseline; requires `n_agents = 1`.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub lr: f64,
    pub batch_episodes: usize,
    pub buffer_capacity: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_anneal_steps: u64,
    pub target_sync_every: u64,
    pub n_agents: usize,
    pub hidden: usize,
    pub mixing_embed: usize,
    pub mixer: MixerKind,
    /// Draw behaviour actions from the target network instead of the online one.
    pub act_with_target: bool,
    pub exec: Exec,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            gamma: 0.99,
            lr: 1e-4,
            batch_episodes: 32,
            buffer_capacity: 5000,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_anneal_steps: 600,
            target_sync_every: 150,
            n_agents: 1,
            hidden: 64,
            mixing_embed: 64,
            mixer: MixerKind::Qmix,
            act_with_target: true,
            exec: Exec::Parallel,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return config(format!("gamma must be in [0, 1), got {}", self.gamma));
        }
        if !(self.lr > 0.0) {
            return config(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(0.0..=1.0).contains(&self.eps_end) || !(0.0..=1.0).contains(&self.eps_start) || self.eps_end > self.eps_start {
            return config(format!("need 0 <= eps_end <= eps_start <= 1, got {} and {}", self.eps_end, self.eps_start));
        }
        if self.batch_episodes == 0 || self.buffer_capacity < self.batch_episodes {
            return config("batch_episodes must be positive and fit in the buffer");
        }
        if self.n_agents == 0 || self.hidden == 0 || self.mixing_embed == 0 || self.target_sync_every == 0 {
            return config("n_agents, hidden, mixing_embed and target_sync_every must be positive");
        }
        if self.mixer == MixerKind::Identity && self.n_agents != 1 {
            return config(format!("identity mixer needs one agent, got {}", self.n_agents));
        }
        Ok(())
    }
}

/// `eps(t) = max(eps_end, eps_start - (eps_start - eps_end) t / anneal)`.
pub fn epsilon(cfg: &TrainerConfig, t: u64) -> f64 {
    if t >= cfg.eps_anneal_steps {
        return cfg.eps_end;
    }
    let frac = t as f64 / cfg.eps_anneal_steps as f64;
    (cfg.eps_start - (cfg.eps_start - cfg.eps_end) * frac).max(cfg.eps_end)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn greedy(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate() {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// Independent epsilon-greedy choice per agent.
pub fn select_actions(q_per_agent: &[Vec<f64>], eps: f64, rng: &mut Rng) -> Vec<usize> {
    q_per_agent
        .iter()
        .map(|q| {
            if rng.random::<f64>() < eps {
                rng.random_range(0..q.len())
            } else {
                greedy(q)
            }
        })
        .collect()
}

/// One stored episode. Step `t` goes from `states[t]` to `states[t + 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Global states `s_0 ..= s_T`.
    pub states: Vec<Vec<f64>>,
    /// Per-step, per-agent observations `o_0 ..= o_T`.
    pub observations: Vec<Vec<Vec<f64>>>,
    pub actions: Vec<Vec<usize>>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
}

impl EpisodeRecord {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn validate(&self, n_agents: usize) -> Result<()> {
        let t = self.len();
        if t == 0 {
            return usage("episode has no steps");
        }
        if self.states.len() != t + 1 || self.observations.len() != t + 1 || self.rewards.len() != t || self.dones.len() != t {
            return usage("episode arrays have inconsistent lengths");
        }
        if self.actions.iter().any(|a| a.len() != n_agents) || self.observations.iter().any(|o| o.len() != n_agents) {
            return usage(format!("episode does not have {n_agents} agents at every step"));
        }
        if !self.dones[t - 1] || self.dones[..t - 1].iter().any(|&d| d) {
            return usage("episode must have exactly one terminal step, at the end");
        }
        Ok(())
    }
}

/// FIFO store of whole episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    episodes: VecDeque<EpisodeRecord>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer { capacity: capacity.max(1), episodes: VecDeque::new() }
    }

    pub fn push(&mut self, ep: EpisodeRecord) {
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(ep);
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.episodes.iter()
    }

    /// `b` distinct episodes chosen uniformly.
    pub fn sample(&self, b: usize, rng: &mut Rng) -> Result<Vec<&EpisodeRecord>> {
        if b > self.len() {
            return usage(format!("cannot sample {b} episodes from {}", self.len()));
        }
        Ok(rand::seq::index::sample(rng, self.len(), b).into_iter().map(|i| &self.episodes[i]).collect())
    }
}

/// Q-vectors of every agent along the episode: `[t][agent] -> (q, cache)`.
fn unroll(agent: &AgentNet, ep: &EpisodeRecord, steps: usize) -> Result<Vec<Vec<(Vec<f64>, AgentCache)>>> {
    let m = ep.observations[0].len();
    let mut hidden = vec![GruState::zeros(agent.hidden()); m];
    let mut out = Vec::with_capacity(steps);
    for obs in &ep.observations[..steps] {
        let mut row = Vec::with_capacity(m);
        for (i, o) in obs.iter().enumerate() {
            let (q, next, cache) = agent.forward(o, &hidden[i])?;
            hidden[i] = next;
            row.push((q, cache));
        }
        out.push(row);
    }
    Ok(out)
}

/// `y_t = r_t` at terminal steps, else `r_t + gamma Q_tot^-(s_{t+1}, greedy a')`
/// with each agent's greedy action taken from its own target q-vector.
pub fn td_targets(ep: &EpisodeRecord, target: &Networks, gamma: f64) -> Result<Vec<f64>> {
    let steps = ep.len();
    let rolled = unroll(&target.agent, ep, steps + 1)?;
    (0..steps)
        .map(|t| {
            if ep.dones[t] || gamma == 0.0 {
                return Ok(ep.rewards[t]);
            }
            let q_next: Vec<f64> = rolled[t + 1].iter().map(|(q, _)| q[greedy(q)]).collect();
            let (v, _) = target.mix_forward(&q_next, &ep.states[t + 1])?;
            Ok(ep.rewards[t] + gamma * v)
        })
        .collect()
}

/// Squared TD error summed over the episode, its step count, and the
/// gradient of that sum with respect to the online parameters.
pub fn episode_loss_grad(online: &Networks, target: &Networks, ep: &EpisodeRecord, gamma: f64) -> Result<(f64, usize, Networks)> {
    let steps = ep.len();
    let y = td_targets(ep, target, gamma)?;
    let rolled = unroll(&online.agent, ep, steps)?;
    let m = ep.observations[0].len();
    let mut grad = online.zeros_like();
    let mut sq = 0.0;
    // dL/dQ_i(a_i) per step and agent.
    let mut dq_chosen = vec![vec![0.0; m]; steps];
    for t in 0..steps {
        let chosen: Vec<f64> = rolled[t].iter().zip(&ep.actions[t]).map(|((q, _), &a)| q[a]).collect();
        let (q_tot, cache) = online.mix_forward(&chosen, &ep.states[t])?;
        let err = q_tot - y[t];
        sq += err * err;
        dq_chosen[t] = online.mix_backward(&cache, 2.0 * err, &mut grad);
    }
    let n_actions = online.agent.n_actions();
    for i in 0..m {
        let mut dh = vec![0.0; online.agent.hidden()];
        for t in (0..steps).rev() {
            let mut dq = vec![0.0; n_actions];
            dq[ep.actions[t][i]] = dq_chosen[t][i];
            dh = online.agent.backward(&rolled[t][i].1, &dq, &dh, &mut grad.agent);
        }
    }
    Ok((sq, steps, grad))
}

/// Mean squared TD error over all steps of `batch` and its gradient.
/// Episodes are processed independently and reduced in batch order.
pub fn batch_loss_grad(online: &Networks, target: &Networks, batch: &[&EpisodeRecord], gamma: f64, exec: Exec) -> Result<(f64, Networks)> {
    let parts = par::map_slice(exec, batch, |_, ep| episode_loss_grad(online, target, ep, gamma));
    let mut total_sq = 0.0;
    let mut total_steps = 0;
    let mut acc = online.zeros_like().flatten();
    for part in parts {
        let (sq, steps, g) = part?;
        total_sq += sq;
        total_steps += steps;
        for (a, v) in acc.iter_mut().zip(g.flatten()) {
            *a += v;
        }
    }
    let n = total_steps.max(1) as f64;
    for a in &mut acc {
        *a /= n;
    }
    let mut grad = online.zeros_like();
    grad.set_flat(&acc);
    Ok((total_sq / n, grad))
}

/// Online and target networks, optimizer and replay memory.
#[derive(Debug, Clone)]
pub struct Learner {
    pub cfg: TrainerConfig,
    pub online: Networks,
    pub target: Networks,
    pub adam: AdamState,
    pub buffer: ReplayBuffer,
    pub grad_updates: u64,
}

impl Learner {
    pub fn new(cfg: TrainerConfig, obs_dim: usize, state_dim: usize, n_actions: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = stream_rng(seed, Stream::TrainerInit, &[]);
        let agent = AgentNet::init(obs_dim, n_actions, cfg.hidden, &mut rng);
        let mixer = match cfg.mixer {
            MixerKind::Qmix => Mixer::Qmix(MixerNet::init(cfg.n_agents, state_dim, cfg.mixing_embed, &mut rng)),
            MixerKind::Identity => Mixer::Identity,
        };
        let online = Networks { agent, mixer };
        let adam = AdamState::new(online.n_params(), cfg.lr);
        Ok(Learner { cfg, target: online.clone(), online, adam, buffer: ReplayBuffer::new(cfg.buffer_capacity), grad_updates: 0 })
    }

    /// Network used for behaviour actions.
    pub fn policy(&self) -> &Networks {
        if self.cfg.act_with_target {
            &self.target
        } else {
            &self.online
        }
    }

    /// Advances every agent's hidden state and returns epsilon-greedy actions.
    pub fn act(&self, obs: &[Vec<f64>], hidden: &mut [GruState], eps: f64, rng: &mut Rng) -> Result<Vec<usize>> {
        let net = &self.policy().agent;
        let mut qs = Vec::with_capacity(obs.len());
        for (o, h) in obs.iter().zip(hidden.iter_mut()) {
            let (q, next) = agent_q(o, h, net)?;
            *h = next;
            qs.push(q);
        }
        Ok(select_actions(&qs, eps, rng))
    }

    pub fn store(&mut self, ep: EpisodeRecord) -> Result<()> {
        ep.validate(self.cfg.n_agents)?;
        self.buffer.push(ep);
        Ok(())
    }

    /// One ADAM update on a sampled batch; `None` until the buffer holds a full batch.
    pub fn train_step(&mut self, rng: &mut Rng) -> Result<Option<f64>> {
        if self.buffer.len() < self.cfg.batch_episodes {
            return Ok(None);
        }
        let batch = self.buffer.sample(self.cfg.batch_episodes, rng)?;
        let (loss, grad) = batch_loss_grad(&self.online, &self.target, &batch, self.cfg.gamma, self.cfg.exec)?;
        if !loss.is_finite() {
            return Err(QasError::Training(format!("non-finite loss after {} updates", self.grad_updates)));
        }
        self.adam.step(&mut self.online, &grad)?;
        self.grad_updates += 1;
        Ok(Some(loss))
    }

    /// Hard copy of the online networks when `episode_counter` is a multiple of the sync period.
    pub fn sync_target(&mut self, episode_counter: u64) -> bool {
        if episode_counter % self.cfg.target_sync_every == 0 {
            self.target = self.online.clone();
            true
        } else {
            false
        }
    }
}
