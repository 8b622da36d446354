//! The episode loop tying the environment to the agent: act, step, store,
//! train, one environment step at a time.

use rand_chacha::ChaCha12Rng;

use super::Agent;
use crate::env::Environment;
use crate::rewards::cumulative_return;
use crate::Result;

/// Per-episode training statistics.
#[derive(Debug, Clone)]
pub struct EpisodeLog {
    pub episode: usize,
    pub steps: usize,
    /// Plain reward sum; bounded by the episode length.
    pub plain_return: f64,
    pub discounted_return: f64,
    /// Mean TD loss over the steps that actually trained.
    pub mean_loss: f64,
    /// Epsilon at the end of the episode.
    pub epsilon: f64,
    pub blown_up: bool,
    /// Step index the episode started from (nonzero for randomized starts).
    pub start_index: usize,
}

/// Run `episodes` episodes of interaction and training. `reset_rng` drives
/// episode starts (only the randomized variant consumes it); `on_episode` is
/// called after each episode with its log entry.
pub fn train_agent(
    env: &mut Environment,
    agent: &mut Agent,
    episodes: usize,
    reset_rng: &mut ChaCha12Rng,
    mut on_episode: impl FnMut(&EpisodeLog),
) -> Result<Vec<EpisodeLog>> {
    let mut logs = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let mut obs = env.reset(reset_rng)?;
        let start_index = env.state().step_index();
        let mut rewards = Vec::with_capacity(env.config().n_train);
        let mut losses = Vec::new();
        let mut blown_up = false;
        loop {
            let action = agent.act(&obs)?;
            let (transition, info) = env.step(action)?;
            obs = transition.next_obs.clone();
            rewards.push(transition.reward);
            blown_up |= info.blown_up;
            let done = transition.done;
            if let Some(loss) = agent.record(transition)? {
                losses.push(loss);
            }
            if done {
                break;
            }
        }
        let ret = cumulative_return(&rewards, env.config().gamma);
        let mean_loss = if losses.is_empty() {
            f64::NAN
        } else {
            losses.iter().sum::<f64>() / losses.len() as f64
        };
        let log = EpisodeLog {
            episode,
            steps: rewards.len(),
            plain_return: ret.plain,
            discounted_return: ret.discounted,
            mean_loss,
            epsilon: agent.epsilon(),
            blown_up,
            start_index,
        };
        on_episode(&log);
        logs.push(log);
    }
    Ok(logs)
}
