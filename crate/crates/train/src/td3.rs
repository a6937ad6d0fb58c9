//! Twin-critic deterministic actor-critic with delayed actor updates and
//! target policy smoothing.

use ndarray::{concatenate, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::nn::{split_cols, Adam, Mlp, OutAct};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Td3Config {
    pub hidden: usize,
    pub actor_lr: f32,
    pub critic_lr: f32,
    pub gamma: f32,
    pub tau: f32,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub policy_delay: usize,
    pub target_noise: f32,
    pub target_noise_clip: f32,
    /// Std of the Gaussian noise added to actions while collecting data.
    pub explore_noise: f32,
    /// Steps of uniform random actions before the actor takes over.
    pub random_steps: usize,
    /// Steps collected before the first update.
    pub learning_starts: usize,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            hidden: 64,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            gamma: 0.99,
            tau: 0.005,
            batch_size: 128,
            replay_capacity: 100_000,
            policy_delay: 2,
            target_noise: 0.1,
            target_noise_clip: 0.3,
            explore_noise: 0.1,
            random_steps: 1000,
            learning_starts: 1000,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<(), String> {
        if self.hidden == 0 || self.batch_size == 0 || self.replay_capacity == 0 || self.policy_delay == 0 {
            return Err("hidden, batch_size, replay_capacity and policy_delay must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.tau) {
            return Err("gamma and tau must lie in [0, 1]".into());
        }
        if self.actor_lr <= 0.0 || self.critic_lr <= 0.0 {
            return Err("learning rates must be positive".into());
        }
        if self.target_noise < 0.0 || self.target_noise_clip < 0.0 || self.explore_noise < 0.0 {
            return Err("noise scales must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f32>,
    pub action: Vec<f32>,
    pub reward: f32,
    pub next_obs: Vec<f32>,
    /// True terminal (not a time-limit cut).
    pub done: bool,
}

/// FIFO ring buffer of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn sample<'a>(&'a self, n: usize, rng: &mut ChaCha8Rng) -> Vec<&'a Transition> {
        (0..n).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Losses {
    pub critic: f32,
    /// Present on steps that updated the actor.
    pub actor: Option<f32>,
}

#[derive(Debug, Clone)]
pub struct Td3 {
    pub cfg: Td3Config,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    actor_t: Mlp,
    critic1_t: Mlp,
    critic2_t: Mlp,
    actor_opt: Adam,
    critic1_opt: Adam,
    critic2_opt: Adam,
    updates: usize,
}

fn rows(items: &[&Transition], f: impl Fn(&Transition) -> &[f32], width: usize) -> Array2<f32> {
    let mut flat = Vec::with_capacity(items.len() * width);
    for t in items {
        flat.extend_from_slice(f(t));
    }
    Array2::from_shape_vec((items.len(), width), flat).expect("consistent widths")
}

impl Td3 {
    pub fn new(obs_dim: usize, act_dim: usize, cfg: Td3Config, rng: &mut ChaCha8Rng) -> Self {
        let h = cfg.hidden;
        let actor = Mlp::new(&[obs_dim, h, h, act_dim], OutAct::Tanh, rng);
        let critic1 = Mlp::new(&[obs_dim + act_dim, h, h, 1], OutAct::Identity, rng);
        let critic2 = Mlp::new(&[obs_dim + act_dim, h, h, 1], OutAct::Identity, rng);
        Self {
            actor_opt: Adam::new(&actor, cfg.actor_lr),
            critic1_opt: Adam::new(&critic1, cfg.critic_lr),
            critic2_opt: Adam::new(&critic2, cfg.critic_lr),
            actor_t: actor.clone(),
            critic1_t: critic1.clone(),
            critic2_t: critic2.clone(),
            actor,
            critic1,
            critic2,
            cfg,
            obs_dim,
            act_dim,
            updates: 0,
        }
    }

    /// Deterministic action for one observation.
    pub fn act(&self, obs: &[f32]) -> Vec<f32> {
        let x = Array2::from_shape_vec((1, obs.len()), obs.to_vec()).expect("row vector");
        self.actor.forward(&x).into_raw_vec_and_offset().0
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn update(&mut self, buffer: &ReplayBuffer, rng: &mut ChaCha8Rng) -> Losses {
        let c = &self.cfg;
        let batch = buffer.sample(c.batch_size, rng);
        let b = batch.len();
        let s = rows(&batch, |t| &t.obs, self.obs_dim);
        let a = rows(&batch, |t| &t.action, self.act_dim);
        let s2 = rows(&batch, |t| &t.next_obs, self.obs_dim);
        let r = Array2::from_shape_fn((b, 1), |(i, _)| batch[i].reward);
        let nd = Array2::from_shape_fn((b, 1), |(i, _)| if batch[i].done { 0.0 } else { 1.0 });

        let noise = Normal::new(0.0f32, c.target_noise.max(1e-12)).expect("valid std");
        let clip = c.target_noise_clip;
        let a2 = self.actor_t.forward(&s2).mapv(|v| {
            let n = if c.target_noise > 0.0 { noise.sample(rng).clamp(-clip, clip) } else { 0.0 };
            (v + n).clamp(-1.0, 1.0)
        });
        let sa2 = concatenate(Axis(1), &[s2.view(), a2.view()]).expect("same rows");
        let q1t = self.critic1_t.forward(&sa2);
        let q2t = self.critic2_t.forward(&sa2);
        let qt = ndarray::Zip::from(&q1t).and(&q2t).map_collect(|x, y| x.min(*y));
        let y = &r + &(nd * qt * c.gamma);

        let sa = concatenate(Axis(1), &[s.view(), a.view()]).expect("same rows");
        let mut critic_loss = 0.0;
        for (net, opt) in [
            (&mut self.critic1, &mut self.critic1_opt),
            (&mut self.critic2, &mut self.critic2_opt),
        ] {
            let cache = net.forward_cached(&sa);
            let err = Mlp::output(&cache) - &y;
            critic_loss += err.mapv(|e| e * e).mean().unwrap_or(0.0);
            let (g, _) = net.backward(&cache, &(err * (2.0 / b as f32)));
            opt.step(net, &g);
        }

        self.updates += 1;
        let mut actor_loss = None;
        if self.updates.is_multiple_of(c.policy_delay) {
            let acache = self.actor.forward_cached(&s);
            let pi = Mlp::output(&acache).clone();
            let spi = concatenate(Axis(1), &[s.view(), pi.view()]).expect("same rows");
            let ccache = self.critic1.forward_cached(&spi);
            actor_loss = Some(-Mlp::output(&ccache).mean().unwrap_or(0.0));
            let dq = Array2::from_elem((b, 1), -1.0 / b as f32);
            let (_, dx) = self.critic1.backward(&ccache, &dq);
            let (_, da) = split_cols(&dx, self.obs_dim);
            let (g, _) = self.actor.backward(&acache, &da);
            self.actor_opt.step(&mut self.actor, &g);

            let tau = c.tau;
            self.actor.soft_update_into(&mut self.actor_t, tau);
            self.critic1.soft_update_into(&mut self.critic1_t, tau);
            self.critic2.soft_update_into(&mut self.critic2_t, tau);
        }
        Losses {
            critic: critic_loss / 2.0,
            actor: actor_loss,
        }
    }

    /// Actor and critic tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(Vec<usize>, Vec<f32>)> {
        [&self.actor, &self.critic1, &self.critic2]
            .iter()
            .flat_map(|n| n.tensors())
            .collect()
    }

    /// Restores actor and critics (targets are set equal to them).
    pub fn load_tensors(&mut self, t: &[(Vec<usize>, Vec<f32>)]) -> Result<(), String> {
        let per = 2 * self.actor.layers.len();
        if t.len() != 3 * per {
            return Err(format!("expected {} tensors, got {}", 3 * per, t.len()));
        }
        self.actor.load_tensors(&t[..per])?;
        self.critic1.load_tensors(&t[per..2 * per])?;
        self.critic2.load_tensors(&t[2 * per..])?;
        self.actor_t = self.actor.clone();
        self.critic1_t = self.critic1.clone();
        self.critic2_t = self.critic2.clone();
        Ok(())
    }
}

/// Seeded generator for learner internals.
pub fn learner_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}
