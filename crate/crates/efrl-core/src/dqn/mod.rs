//! From-scratch deep Q-learning: the Q-network, epsilon-greedy behavior
//! policy, temporal-difference targets against a periodically synchronized
//! target network, Adam updates with global gradient clipping, and uniform
//! experience replay.

mod adam;
mod checkpoint;
mod mlp;
mod replay;
mod trainer;

pub use adam::AdamState;
pub use checkpoint::{load as checkpoint_load, save as checkpoint_save, Checkpoint, CheckpointMeta};
pub use mlp::{Gradients, Mlp};
pub use replay::ReplayBuffer;
pub use trainer::{train_agent, EpisodeLog};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::env::Transition;
use crate::{Error, Result};

/// Training hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct AgentConfig {
    pub gamma: f64,
    pub lr: f64,
    pub batch: usize,
    pub max_grad_norm: f64,
    /// Hard target-network copy every this many environment steps.
    pub target_update_interval: u64,
    pub replay_capacity: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Fraction of the planned environment steps over which epsilon decays
    /// linearly before holding at `eps_end`.
    pub eps_decay_fraction: f64,
    pub seed: u64,
}

impl AgentConfig {
    /// Published hyperparameters; the target interval is five episode lengths.
    pub fn defaults(n_train: usize, seed: u64) -> Self {
        Self {
            gamma: 0.99,
            lr: 1e-5,
            batch: 128,
            max_grad_norm: 5.0,
            target_update_interval: 5 * n_train as u64,
            replay_capacity: 50_000,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_fraction: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be in (0, 1], got {}",
                self.gamma
            )));
        }
        if !(self.lr > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if self.batch == 0 || self.replay_capacity < self.batch {
            return Err(Error::InvalidParameter(
                "replay capacity must hold at least one batch".into(),
            ));
        }
        if self.target_update_interval == 0 {
            return Err(Error::InvalidParameter(
                "target update interval must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.eps_start)
            || !(0.0..=1.0).contains(&self.eps_end)
            || !(self.eps_decay_fraction > 0.0 && self.eps_decay_fraction <= 1.0)
        {
            return Err(Error::InvalidParameter(
                "epsilon schedule outside [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Greedy action: argmax over Q-values, lowest index winning ties.
pub fn argmax_action(q_values: &[f64]) -> usize {
    let mut best = 0;
    for (idx, &v) in q_values.iter().enumerate().skip(1) {
        if v > q_values[best] {
            best = idx;
        }
    }
    best
}

/// Epsilon-greedy selection over the network's action values.
pub fn select_action(
    net: &Mlp,
    obs: &[f64],
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<usize> {
    debug_assert!((0.0..=1.0).contains(&epsilon));
    if epsilon > 0.0 && rng.random_range(0.0..1.0) < epsilon {
        return Ok(rng.random_range(0..net.output_dim()));
    }
    Ok(argmax_action(&net.forward(obs)?))
}

/// TD targets: `r` for terminal transitions, else
/// `r + gamma * max_a' Q_target(s', a')`.
pub fn td_targets(batch: &[&Transition], target_net: &Mlp, gamma: f64) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    let obs_dim = target_net.input_dim();
    let mut next = Array2::zeros((batch.len(), obs_dim));
    for (row, t) in batch.iter().enumerate() {
        if t.next_obs.len() != obs_dim {
            return Err(Error::InvalidParameter(format!(
                "next observation length {} does not match network input {obs_dim}",
                t.next_obs.len()
            )));
        }
        next.row_mut(row)
            .iter_mut()
            .zip(&t.next_obs)
            .for_each(|(dst, &src)| *dst = src);
    }
    let q_next = target_net.forward_batch(&next);
    let q_next = q_next.last().expect("at least one layer");
    Ok(batch
        .iter()
        .enumerate()
        .map(|(row, t)| {
            if t.done {
                t.reward
            } else {
                let best = q_next.row(row).iter().copied().fold(f64::NEG_INFINITY, f64::max);
                t.reward + gamma * best
            }
        })
        .collect())
}

/// Mean-squared TD loss over a prepared batch and its parameter gradients;
/// only the taken action's output contributes per sample.
pub(crate) fn td_loss_and_grads(
    net: &Mlp,
    x: &Array2<f64>,
    actions: &[usize],
    targets: &[f64],
) -> (f64, Gradients) {
    let activations = net.forward_batch(x);
    let q = activations.last().expect("at least one layer");
    let batch = x.nrows() as f64;
    let mut d_out = Array2::zeros(q.dim());
    let mut loss = 0.0;
    for (row, (&action, &y)) in actions.iter().zip(targets).enumerate() {
        let err = q[[row, action]] - y;
        loss += err * err;
        d_out[[row, action]] = 2.0 * err / batch;
    }
    loss /= batch;
    let grads = net.backward_batch(x, &activations, d_out);
    (loss, grads)
}

/// One optimization step on a uniformly sampled replay batch. Returns the
/// batch loss.
pub fn train_step(
    online: &mut Mlp,
    adam: &mut AdamState,
    buffer: &ReplayBuffer,
    target: &Mlp,
    cfg: &AgentConfig,
    rng: &mut impl Rng,
) -> Result<f64> {
    if buffer.len() < cfg.batch {
        return Err(Error::InvalidParameter(format!(
            "replay holds {} transitions, batch needs {}",
            buffer.len(),
            cfg.batch
        )));
    }
    let batch = buffer.sample(cfg.batch, rng);
    let targets = td_targets(&batch, target, cfg.gamma)?;
    let obs_dim = online.input_dim();
    let mut x = Array2::zeros((batch.len(), obs_dim));
    let mut actions = Vec::with_capacity(batch.len());
    for (row, t) in batch.iter().enumerate() {
        x.row_mut(row)
            .iter_mut()
            .zip(&t.obs)
            .for_each(|(dst, &src)| *dst = src);
        actions.push(t.action);
    }
    let (loss, mut grads) = td_loss_and_grads(online, &x, &actions, &targets);
    grads.clip_global_norm(cfg.max_grad_norm);
    adam.update(online, &grads, cfg.lr);
    Ok(loss)
}

/// Hard-copy the online parameters into the target network when the step
/// counter hits a multiple of the interval. Returns whether a copy happened.
pub fn target_sync(online: &Mlp, target: &mut Mlp, step_counter: u64, interval: u64) -> bool {
    if interval > 0 && step_counter % interval == 0 {
        target.copy_from(online);
        true
    } else {
        false
    }
}

/// Online network, target network, optimizer, replay, and schedule state,
/// bundled for the training loop.
pub struct Agent {
    online: Mlp,
    target: Mlp,
    adam: AdamState,
    replay: ReplayBuffer,
    cfg: AgentConfig,
    env_steps: u64,
    planned_steps: u64,
    rng: ChaCha12Rng,
}

impl Agent {
    pub fn new(
        obs_dim: usize,
        n_actions: usize,
        cfg: AgentConfig,
        planned_steps: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut init_rng = ChaCha12Rng::seed_from_u64(cfg.seed);
        let online = Mlp::q_network(obs_dim, n_actions, &mut init_rng)?;
        let target = online.clone();
        let adam = AdamState::new(&online);
        Ok(Self {
            replay: ReplayBuffer::new(cfg.replay_capacity),
            rng: ChaCha12Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed)),
            online,
            target,
            adam,
            cfg,
            env_steps: 0,
            planned_steps,
        })
    }

    /// Resume from saved parameters; the replay buffer starts empty.
    pub fn from_checkpoint(ckpt: Checkpoint, cfg: AgentConfig, planned_steps: u64) -> Result<Self> {
        cfg.validate()?;
        let target = ckpt.net.clone();
        Ok(Self {
            replay: ReplayBuffer::new(cfg.replay_capacity),
            rng: ChaCha12Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed)),
            online: ckpt.net,
            target,
            adam: ckpt.adam,
            cfg,
            env_steps: ckpt.meta.total_steps,
            planned_steps,
        })
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    /// Linear epsilon schedule over the planned environment steps.
    pub fn epsilon(&self) -> f64 {
        let horizon = (self.planned_steps as f64 * self.cfg.eps_decay_fraction).max(1.0);
        let frac = (self.env_steps as f64 / horizon).min(1.0);
        self.cfg.eps_start + (self.cfg.eps_end - self.cfg.eps_start) * frac
    }

    /// Behavior policy at the current epsilon.
    pub fn act(&mut self, obs: &[f64]) -> Result<usize> {
        select_action(&self.online, obs, self.epsilon(), &mut self.rng)
    }

    /// Greedy policy (epsilon = 0).
    pub fn act_greedy(&self, obs: &[f64]) -> Result<usize> {
        Ok(argmax_action(&self.online.forward(obs)?))
    }

    /// Store a transition, run one training step once the replay holds a
    /// batch, and synchronize the target network on schedule. Returns the
    /// training loss when a step ran.
    pub fn record(&mut self, transition: Transition) -> Result<Option<f64>> {
        self.replay.push(transition);
        self.env_steps += 1;
        let loss = if self.replay.len() >= self.cfg.batch {
            Some(train_step(
                &mut self.online,
                &mut self.adam,
                &self.replay,
                &self.target,
                &self.cfg,
                &mut self.rng,
            )?)
        } else {
            None
        };
        target_sync(
            &self.online,
            &mut self.target,
            self.env_steps,
            self.cfg.target_update_interval,
        );
        Ok(loss)
    }

    pub fn save_checkpoint(&self, path: &std::path::Path, episodes: u64) -> Result<()> {
        checkpoint_save(
            path,
            &self.online,
            &self.adam,
            &CheckpointMeta {
                seed: self.cfg.seed,
                episodes,
                total_steps: self.env_steps,
            },
        )
    }
}
