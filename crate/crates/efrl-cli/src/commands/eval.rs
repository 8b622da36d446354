//! Greedy evaluation of a trained policy over the full horizon, side by side
//! with the unfiltered run and the fixed Kolmogorov-radius filter, all scored
//! against the filtered DNS.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde_json::json;

use efrl_core::config::RunConfig;
use efrl_core::dqn::{argmax_action, checkpoint_load};
use efrl_core::env::{Environment, EpisodeConfig, ReferenceStore, Variant};
use efrl_core::fields::grad_norm;
use efrl_core::metrics::{
    energy_spectrum, enstrophy, err_energy, err_spectrum, kinetic_energy, SpectrumStats,
};
use efrl_core::rewards::{residual_norm, reward_dd};
use efrl_core::solver::{ef_step, kolmogorov_scale, noef_step, SolverState};

use crate::csvio::{fmt, CsvWriter};

struct Record {
    step: usize,
    t: f64,
    delta: f64,
    reward: f64,
    res_raw: f64,
    grad: f64,
    energy: f64,
    enstrophy: f64,
}

struct Series {
    method: &'static str,
    records: Vec<Record>,
    spectra: Vec<SpectrumStats>,
    blown_up: bool,
}

pub fn run(
    cfg: &RunConfig,
    checkpoint: Option<PathBuf>,
    refs_dir: Option<PathBuf>,
) -> Result<()> {
    super::prepare_out_dir(cfg)?;
    let eval_dir = cfg.out_dir.join("eval");
    std::fs::create_dir_all(&eval_dir)?;

    let ckpt_path = checkpoint.unwrap_or_else(|| super::checkpoint_path(&cfg.out_dir));
    let ckpt = checkpoint_load(&ckpt_path)
        .with_context(|| format!("loading checkpoint {}", ckpt_path.display()))?;
    let coarse = cfg.coarse_grid()?;
    let obs_dim = 2 * coarse.n() * coarse.n();
    ckpt.ensure_compatible(obs_dim, 50)?;

    let refs_dir = refs_dir.unwrap_or_else(|| super::refs_full_dir(cfg));
    let refs = Arc::new(super::gen_dns::load_or_generate_full(cfg, &refs_dir)?);
    if refs.grid() != coarse {
        anyhow::bail!(
            "references in {} are on a {} grid, run uses {}",
            refs_dir.display(),
            refs.grid().n(),
            coarse.n()
        );
    }

    let fluid = cfg.fluid()?;
    let eta = kolmogorov_scale(&fluid, cfg.side);
    let n_total = cfg.n_total();
    println!("evaluating {} over {n_total} steps (eta = {eta:.4e})", ckpt_path.display());

    let rl = rollout_policy(cfg, &ckpt.net, &refs)?;
    let ef_eta = rollout_fixed(cfg, "ef_eta", Some(eta), &refs)?;
    let noef = rollout_fixed(cfg, "noef", None, &refs)?;

    // reference series over the full window
    let mut ref_energy = Vec::with_capacity(n_total);
    let mut ref_spectra = Vec::with_capacity(n_total);
    for step in 1..=n_total {
        let u = refs.snapshot(step)?;
        ref_energy.push(kinetic_energy(u));
        ref_spectra.push(energy_spectrum(u, step as f64 * cfg.dt)?);
    }

    let mut methods = serde_json::Map::new();
    for series in [&rl, &ef_eta, &noef] {
        write_series(&eval_dir, series)?;
        write_spectra_snapshots(&eval_dir, cfg, series)?;
        methods.insert(
            series.method.to_string(),
            summarize(cfg, series, &ref_energy, &ref_spectra)?,
        );
    }
    // reference snapshots for plotting alongside the methods
    write_reference_spectra(&eval_dir, cfg, &refs)?;

    write_actions(&eval_dir, &rl)?;

    let summary = json!({
        "profile": cfg.profile.name(),
        "variant": cfg.variant.to_string(),
        "seed": cfg.seed,
        "ic_seed": cfg.ic_seed,
        "coarse_n": cfg.coarse_n,
        "fine_n": cfg.fine_n,
        "n_total": n_total,
        "dt": cfg.dt,
        "eta": eta,
        "checkpoint": ckpt_path.display().to_string(),
        "methods": methods,
    });
    let summary_path = eval_dir.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    println!("wrote {}", summary_path.display());
    for (name, m) in summary["methods"].as_object().unwrap() {
        println!(
            "  {name:6}: err_energy = {}, blown_up = {}",
            m["err_energy"], m["blown_up"]
        );
    }
    Ok(())
}

/// Greedy rollout through the environment, so evaluation shares the exact
/// stepping semantics of training.
fn rollout_policy(
    cfg: &RunConfig,
    net: &efrl_core::dqn::Mlp,
    refs: &Arc<ReferenceStore>,
) -> Result<Series> {
    // the randomized variant evaluates like the plain data-driven one:
    // fixed start, same reward
    let variant = match cfg.variant {
        Variant::DdRand => Variant::Dd,
        v => v,
    };
    let ep_cfg = EpisodeConfig {
        variant,
        n_train: cfg.n_total(),
        start_max: 0,
        gamma: cfg.gamma,
    };
    let env_refs = variant.needs_reference().then(|| Arc::clone(refs));
    let mut env = Environment::new(
        cfg.fluid()?,
        ep_cfg,
        cfg.reward,
        refs.snapshot(0)?.clone(),
        env_refs,
    )?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut obs = env.reset(&mut rng)?;
    let mut records = Vec::with_capacity(cfg.n_total());
    let mut spectra = Vec::with_capacity(cfg.n_total());
    let mut blown_up = false;
    for step in 1..=cfg.n_total() {
        let action = argmax_action(&net.forward(&obs)?);
        let (tr, info) = env.step(action)?;
        obs = tr.next_obs;
        if info.blown_up {
            blown_up = true;
            break;
        }
        records.push(Record {
            step,
            t: info.t,
            delta: info.delta,
            reward: tr.reward,
            res_raw: info.res_raw,
            grad: info.grad_norm,
            energy: info.energy,
            enstrophy: info.enstrophy,
        });
        spectra.push(energy_spectrum(env.state().u(), info.t)?);
        if tr.done {
            break;
        }
    }
    Ok(Series {
        method: "rl",
        records,
        spectra,
        blown_up,
    })
}

/// Baseline rollout at a fixed radius (`None` = no filtering), truncated at
/// blow-up. The reward column is the data-driven reward against the
/// references, which is well defined for every method during evaluation.
fn rollout_fixed(
    cfg: &RunConfig,
    method: &'static str,
    delta: Option<f64>,
    refs: &Arc<ReferenceStore>,
) -> Result<Series> {
    let fluid = cfg.fluid()?;
    let mut state = SolverState::new(refs.snapshot(0)?.clone());
    let mut records = Vec::new();
    let mut spectra = Vec::new();
    let mut blown_up = false;
    for step in 1..=cfg.n_total() {
        let prev = state.u().clone();
        state = match delta {
            Some(d) => ef_step(&state, d, &fluid),
            None => noef_step(&state, &fluid),
        };
        if state.blown_up() {
            blown_up = true;
            break;
        }
        let reward = reward_dd(state.u(), refs.snapshot(step)?, &cfg.reward)?;
        records.push(Record {
            step,
            t: state.t(),
            delta: delta.unwrap_or(0.0),
            reward,
            res_raw: residual_norm(state.u(), &prev, &fluid)?,
            grad: grad_norm(state.u())?,
            energy: kinetic_energy(state.u()),
            enstrophy: enstrophy(state.u())?,
        });
        spectra.push(energy_spectrum(state.u(), state.t())?);
    }
    Ok(Series {
        method,
        records,
        spectra,
        blown_up,
    })
}

fn write_series(eval_dir: &std::path::Path, series: &Series) -> Result<()> {
    let mut csv = CsvWriter::create(
        &eval_dir.join(format!("{}_series.csv", series.method)),
        "step,t,delta,reward,res,grad_norm,energy,enstrophy",
    )?;
    for r in &series.records {
        csv.row(&[
            r.step.to_string(),
            fmt(r.t),
            fmt(r.delta),
            fmt(r.reward),
            fmt(r.res_raw),
            fmt(r.grad),
            fmt(r.energy),
            fmt(r.enstrophy),
        ])?;
    }
    csv.finish()
}

fn spectrum_rows(csv: &mut CsvWriter, spec: &SpectrumStats, max_shell: usize) -> Result<()> {
    for k in 1..=max_shell {
        csv.row(&[k.to_string(), fmt(spec.shell(k))])?;
    }
    Ok(())
}

fn write_spectra_snapshots(
    eval_dir: &std::path::Path,
    cfg: &RunConfig,
    series: &Series,
) -> Result<()> {
    let max_shell = cfg.coarse_n / 2;
    for &t in &cfg.spectrum_times {
        let step = (t / cfg.dt).round() as usize;
        let Some(spec) = series.spectra.get(step.saturating_sub(1)) else {
            continue; // truncated run never reached this time
        };
        let mut csv = CsvWriter::create(
            &eval_dir.join(format!("spectrum_{}_t{t}.csv", series.method)),
            "shell,energy",
        )?;
        spectrum_rows(&mut csv, spec, max_shell)?;
        csv.finish()?;
    }
    Ok(())
}

fn write_reference_spectra(
    eval_dir: &std::path::Path,
    cfg: &RunConfig,
    refs: &Arc<ReferenceStore>,
) -> Result<()> {
    let max_shell = cfg.coarse_n / 2;
    for &t in &cfg.spectrum_times {
        let step = (t / cfg.dt).round() as usize;
        if step > cfg.n_total() {
            continue;
        }
        let spec = energy_spectrum(refs.snapshot(step)?, t)?;
        let mut csv = CsvWriter::create(
            &eval_dir.join(format!("spectrum_reference_t{t}.csv")),
            "shell,energy",
        )?;
        spectrum_rows(&mut csv, &spec, max_shell)?;
        csv.finish()?;
    }
    Ok(())
}

fn write_actions(eval_dir: &std::path::Path, rl: &Series) -> Result<()> {
    let mut csv = CsvWriter::create(&eval_dir.join("actions.csv"), "step,t,delta")?;
    for r in &rl.records {
        csv.row(&[r.step.to_string(), fmt(r.t), fmt(r.delta)])?;
    }
    csv.finish()?;

    let actions = efrl_core::env::ActionSpace::build();
    let mut counts = vec![0usize; actions.len()];
    for r in &rl.records {
        if let Some(idx) = actions.index_of(r.delta) {
            counts[idx] += 1;
        }
    }
    let total = rl.records.len().max(1) as f64;
    let mut csv = CsvWriter::create(
        &eval_dir.join("actions_hist.csv"),
        "action,delta,count,frequency",
    )?;
    for (idx, &count) in counts.iter().enumerate() {
        csv.row(&[
            idx.to_string(),
            fmt(actions.values()[idx]),
            count.to_string(),
            fmt(count as f64 / total),
        ])?;
    }
    csv.finish()?;
    Ok(())
}

fn summarize(
    cfg: &RunConfig,
    series: &Series,
    ref_energy: &[f64],
    ref_spectra: &[SpectrumStats],
) -> Result<serde_json::Value> {
    let valid = series.records.len();
    let mut out = serde_json::Map::new();
    out.insert("blown_up".into(), json!(series.blown_up));
    out.insert("valid_steps".into(), json!(valid));
    if valid == 0 {
        out.insert("err_energy".into(), json!(null));
        return Ok(out.into());
    }
    let energies: Vec<f64> = series.records.iter().map(|r| r.energy).collect();
    let mean_reward =
        series.records.iter().map(|r| r.reward).sum::<f64>() / valid as f64;
    out.insert(
        "err_energy".into(),
        json!(err_energy(&energies, &ref_energy[..valid])?),
    );
    out.insert("mean_reward".into(), json!(mean_reward));
    let mut spectrum = serde_json::Map::new();
    for &k in &cfg.spectrum_k {
        let err = err_spectrum(&series.spectra, &ref_spectra[..valid], k)?;
        spectrum.insert(
            format!("k{k}"),
            json!({
                "signed": err.signed,
                "absolute": err.absolute,
                "excluded_shells": err.excluded_shells,
            }),
        );
    }
    out.insert("err_spectrum".into(), json!(spectrum));
    Ok(out.into())
}
