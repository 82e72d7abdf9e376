use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::nn::{abs_act, abs_backward, relu, relu_backward, Gru, GruCache, GruState, Linear, Parameters};
use crate::rng::Rng;

/// Shared per-agent network: `Linear -> ReLU -> GRU -> Linear`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentNet {
    pub fc1: Linear,
    pub gru: Gru,
    pub fc2: Linear,
}

/// Saved activations of one agent step.
#[derive(Debug, Clone)]
pub struct AgentCache {
    obs: Vec<f64>,
    pre: Vec<f64>,
    gru: GruCache,
    hidden: Vec<f64>,
}

impl AgentNet {
    pub fn init(obs_dim: usize, n_actions: usize, hidden: usize, rng: &mut Rng) -> Self {
        AgentNet {
            fc1: Linear::init(obs_dim, hidden, rng),
            gru: Gru::init(hidden, hidden, rng),
            fc2: Linear::init(hidden, n_actions, rng),
        }
    }

    pub fn zeros(obs_dim: usize, n_actions: usize, hidden: usize) -> Self {
        AgentNet { fc1: Linear::zeros(obs_dim, hidden), gru: Gru::zeros(hidden, hidden), fc2: Linear::zeros(hidden, n_actions) }
    }

    pub fn obs_dim(&self) -> usize {
        self.fc1.inputs()
    }

    pub fn n_actions(&self) -> usize {
        self.fc2.outputs()
    }

    pub fn hidden(&self) -> usize {
        self.gru.hidden()
    }

    pub fn forward(&self, obs: &[f64], h: &GruState) -> Result<(Vec<f64>, GruState, AgentCache)> {
        let pre = self.fc1.forward(obs)?;
        let (next, gru) = self.gru.forward(&relu(&pre), h)?;
        let q = self.fc2.forward(&next.hidden)?;
        let cache = AgentCache { obs: obs.to_vec(), pre, gru, hidden: next.hidden.clone() };
        Ok((q, next, cache))
    }

    /// `dq` is the gradient on this step's q-vector and `dh_next` the gradient
    /// arriving from later steps; returns the gradient for the previous hidden state.
    pub fn backward(&self, cache: &AgentCache, dq: &[f64], dh_next: &[f64], grad: &mut AgentNet) -> Vec<f64> {
        let mut dh = self.fc2.backward(&cache.hidden, dq, &mut grad.fc2);
        for (a, b) in dh.iter_mut().zip(dh_next) {
            *a += b;
        }
        let (dx, dh_prev) = self.gru.backward(&cache.gru, &dh, &mut grad.gru);
        let dpre = relu_backward(&cache.pre, &dx);
        self.fc1.backward(&cache.obs, &dpre, &mut grad.fc1);
        dh_prev
    }
}

/// One forward pass of the shared agent network.
pub fn agent_q(obs: &[f64], h: &GruState, net: &AgentNet) -> Result<(Vec<f64>, GruState)> {
    let (q, next, _) = net.forward(obs, h)?;
    Ok((q, next))
}

impl Parameters for AgentNet {
    fn named(&self) -> Vec<(String, [usize; 2], &[f64])> {
        let mut v = self.fc1.named_with("agent.fc1");
        v.extend(self.gru.named().into_iter().map(|(n, s, d)| (format!("agent.{n}"), s, d)));
        v.extend(self.fc2.named_with("agent.fc2"));
        v
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = self.fc1.arrays().into();
        v.extend(self.gru.arrays_mut());
        v.extend(self.fc2.arrays());
        v
    }
}

/// Monotone mixing network whose weights come from hypernetworks of the global state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixerNet {
    pub n_agents: usize,
    pub embed: usize,
    pub hyper_w1: Linear,
    pub hyper_b1: Linear,
    pub hyper_w2: Linear,
    pub hyper_b2a: Linear,
    pub hyper_b2b: Linear,
}

#[derive(Debug, Clone)]
pub struct MixerCache {
    state: Vec<f64>,
    q: Vec<f64>,
    w1_raw: Vec<f64>,
    w1: Vec<f64>,
    pre: Vec<f64>,
    hid: Vec<f64>,
    w2_raw: Vec<f64>,
    w2: Vec<f64>,
    v_pre: Vec<f64>,
    v_hid: Vec<f64>,
}

impl MixerNet {
    pub fn init(n_agents: usize, state_dim: usize, embed: usize, rng: &mut Rng) -> Self {
        MixerNet {
            n_agents,
            embed,
            hyper_w1: Linear::init(state_dim, n_agents * embed, rng),
            hyper_b1: Linear::init(state_dim, embed, rng),
            hyper_w2: Linear::init(state_dim, embed, rng),
            hyper_b2a: Linear::init(state_dim, embed, rng),
            hyper_b2b: Linear::init(embed, 1, rng),
        }
    }

    pub fn zeros(n_agents: usize, state_dim: usize, embed: usize) -> Self {
        MixerNet {
            n_agents,
            embed,
            hyper_w1: Linear::zeros(state_dim, n_agents * embed),
            hyper_b1: Linear::zeros(state_dim, embed),
            hyper_w2: Linear::zeros(state_dim, embed),
            hyper_b2a: Linear::zeros(state_dim, embed),
            hyper_b2b: Linear::zeros(embed, 1),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.hyper_w1.inputs()
    }

    /// Agent-`i` mixing weights `|W1[i, :]|` for a given state (all non-negative).
    pub fn first_layer_weights(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(abs_act(&self.hyper_w1.forward(state)?))
    }

    /// `q_tot = |W2|^T ReLU(|W1|^T q + b1) + b2`.
    pub fn forward(&self, q: &[f64], state: &[f64]) -> Result<(f64, MixerCache)> {
        if q.len() != self.n_agents {
            return usage(format!("mixer expects {} agent values, got {}", self.n_agents, q.len()));
        }
        let e = self.embed;
        let w1_raw = self.hyper_w1.forward(state)?;
        let w1 = abs_act(&w1_raw);
        let b1 = self.hyper_b1.forward(state)?;
        let pre: Vec<f64> = (0..e).map(|k| b1[k] + (0..self.n_agents).map(|i| q[i] * w1[i * e + k]).sum::<f64>()).collect();
        let hid = relu(&pre);
        let w2_raw = self.hyper_w2.forward(state)?;
        let w2 = abs_act(&w2_raw);
        let v_pre = self.hyper_b2a.forward(state)?;
        let v_hid = relu(&v_pre);
        let b2 = self.hyper_b2b.forward(&v_hid)?[0];
        let q_tot = w2.iter().zip(&hid).map(|(w, h)| w * h).sum::<f64>() + b2;
        let cache = MixerCache { state: state.to_vec(), q: q.to_vec(), w1_raw, w1, pre, hid, w2_raw, w2, v_pre, v_hid };
        Ok((q_tot, cache))
    }

    /// Accumulates hypernetwork gradients for upstream `g = dL/dq_tot` and returns `dL/dq`.
    pub fn backward(&self, cache: &MixerCache, g: f64, grad: &mut MixerNet) -> Vec<f64> {
        let e = self.embed;
        let s = &cache.state;
        let dw2: Vec<f64> = cache.hid.iter().map(|h| g * h).collect();
        self.hyper_w2.backward(s, &abs_backward(&cache.w2_raw, &dw2), &mut grad.hyper_w2);
        let dhid: Vec<f64> = cache.w2.iter().map(|w| g * w).collect();
        let dpre = relu_backward(&cache.pre, &dhid);
        self.hyper_b1.backward(s, &dpre, &mut grad.hyper_b1);
        let dw1: Vec<f64> = (0..self.n_agents * e).map(|idx| cache.q[idx / e] * dpre[idx % e]).collect();
        self.hyper_w1.backward(s, &abs_backward(&cache.w1_raw, &dw1), &mut grad.hyper_w1);
        let dv_hid = self.hyper_b2b.backward(&cache.v_hid, &[g], &mut grad.hyper_b2b);
        self.hyper_b2a.backward(s, &relu_backward(&cache.v_pre, &dv_hid), &mut grad.hyper_b2a);
        (0..self.n_agents).map(|i| (0..e).map(|k| cache.w1[i * e + k] * dpre[k]).sum()).collect()
    }
}

impl Parameters for MixerNet {
    fn named(&self) -> Vec<(String, [usize; 2], &[f64])> {
        let mut v = self.hyper_w1.named_with("mixer.hyper_w1");
        v.extend(self.hyper_b1.named_with("mixer.hyper_b1"));
        v.extend(self.hyper_w2.named_with("mixer.hyper_w2"));
        v.extend(self.hyper_b2a.named_with("mixer.hyper_b2a"));
        v.extend(self.hyper_b2b.named_with("mixer.hyper_b2b"));
        v
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::new();
        for l in [&mut self.hyper_w1, &mut self.hyper_b1, &mut self.hyper_w2, &mut self.hyper_b2a, &mut self.hyper_b2b] {
            v.extend(l.arrays());
        }
        v
    }
}

/// Mixing of chosen-action values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Mixer {
    Qmix(MixerNet),
    /// Single-agent DQN: `q_tot = q_0`.
    Identity,
}

#[derive(Debug, Clone)]
pub enum MixCache {
    Qmix(MixerCache),
    Identity,
}

/// Agent network plus mixer; the unit that is trained, copied to the target and checkpointed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Networks {
    pub agent: AgentNet,
    pub mixer: Mixer,
}

impl Networks {
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.zero();
        z
    }

    pub fn mix_forward(&self, q: &[f64], state: &[f64]) -> Result<(f64, MixCache)> {
        match &self.mixer {
            Mixer::Qmix(m) => {
                let (v, c) = m.forward(q, state)?;
                Ok((v, MixCache::Qmix(c)))
            }
            Mixer::Identity => {
                if q.len() != 1 {
                    return usage(format!("identity mixer needs exactly one agent, got {}", q.len()));
                }
                Ok((q[0], MixCache::Identity))
            }
        }
    }

    pub fn mix_backward(&self, cache: &MixCache, g: f64, grad: &mut Networks) -> Vec<f64> {
        match (&self.mixer, cache, &mut grad.mixer) {
            (Mixer::Qmix(m), MixCache::Qmix(c), Mixer::Qmix(gm)) => m.backward(c, g, gm),
            _ => vec![g],
        }
    }
}

/// `q_tot` for the given agent values and global state.
pub fn mix(q_agents: &[f64], state: &[f64], net: &MixerNet) -> Result<f64> {
    Ok(net.forward(q_agents, state)?.0)
}

impl Parameters for Networks {
    fn named(&self) -> Vec<(String, [usize; 2], &[f64])> {
        let mut v = self.agent.named();
        if let Mixer::Qmix(m) = &self.mixer {
            v.extend(m.named());
        }
        v
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.agent.arrays_mut();
        if let Mixer::Qmix(m) = &mut self.mixer {
            v.extend(m.arrays_mut());
        }
        v
    }
}
