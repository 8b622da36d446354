//! Agent training: the episode loop with per-episode logging and periodic
//! checkpoints.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use efrl_core::config::RunConfig;
use efrl_core::dqn::{train_agent, Agent};
use efrl_core::env::{Environment, ReferenceStore};

use crate::csvio::{fmt, CsvWriter};

pub fn run(cfg: &RunConfig, refs_dir: Option<PathBuf>) -> Result<()> {
    super::prepare_out_dir(cfg)?;

    let refs = if cfg.variant.needs_reference() {
        let dir = refs_dir.unwrap_or_else(|| super::refs_dir(cfg));
        let store = ReferenceStore::load(&dir).with_context(|| {
            format!(
                "variant {} needs filtered-DNS references in {}; run `efrl gen-dns` first",
                cfg.variant,
                dir.display()
            )
        })?;
        Some(Arc::new(store))
    } else {
        None
    };

    let initial = match &refs {
        Some(r) => r.snapshot(0)?.clone(),
        None => super::coarse_initial_field(cfg)?,
    };
    let episode_cfg = cfg.episode_config();
    let mut env = Environment::new(cfg.fluid()?, episode_cfg, cfg.reward, initial, refs)?;

    let planned_steps = (cfg.episodes * episode_cfg.n_train) as u64;
    let mut agent = Agent::new(
        env.observation_dim(),
        env.actions().len(),
        cfg.agent_config(),
        planned_steps,
    )?;
    let mut reset_rng = ChaCha12Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e3779b9));

    let mut log = CsvWriter::create(
        &cfg.out_dir.join("training_log.csv"),
        "episode,steps,start_index,plain_return,discounted_return,mean_loss,epsilon,blown_up",
    )?;
    let checkpoints_dir = cfg.out_dir.join("checkpoints");
    std::fs::create_dir_all(&checkpoints_dir)?;

    println!(
        "training {} for {} episodes of {} steps (obs dim {})",
        cfg.variant,
        cfg.episodes,
        episode_cfg.n_train,
        env.observation_dim()
    );
    let chunk = (cfg.episodes / 5).max(1);
    let mut done = 0usize;
    while done < cfg.episodes {
        let batch = chunk.min(cfg.episodes - done);
        let logs = train_agent(&mut env, &mut agent, batch, &mut reset_rng, |ep| {
            println!(
                "episode {:4}: steps {:4} return {:9.3} loss {:9.3e} eps {:.3}{}",
                done + ep.episode,
                ep.steps,
                ep.plain_return,
                ep.mean_loss,
                ep.epsilon,
                if ep.blown_up { " [blew up]" } else { "" }
            );
        })?;
        for ep in &logs {
            log.row(&[
                (done + ep.episode).to_string(),
                ep.steps.to_string(),
                ep.start_index.to_string(),
                fmt(ep.plain_return),
                fmt(ep.discounted_return),
                fmt(ep.mean_loss),
                fmt(ep.epsilon),
                (ep.blown_up as u8).to_string(),
            ])?;
        }
        done += batch;
        agent.save_checkpoint(
            &checkpoints_dir.join(format!("ep_{done:04}.efdq")),
            done as u64,
        )?;
    }
    log.finish()?;
    let final_path = super::checkpoint_path(&cfg.out_dir);
    agent.save_checkpoint(&final_path, cfg.episodes as u64)?;
    println!("saved {}", final_path.display());
    Ok(())
}
