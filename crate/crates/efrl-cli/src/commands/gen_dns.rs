//! Reference generation: run the unregularized fine-grid simulation and store
//! its spectral restriction onto the coarse grid at every coarse time step.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use efrl_core::config::RunConfig;
use efrl_core::env::ReferenceStore;
use efrl_core::fields::write_snapshot;
use efrl_core::metrics::{filtered_dns_project, kinetic_energy};
use efrl_core::solver::{
    default_spectrum_profile, init_decaying_turbulence, noef_step, SolverState,
};

/// The reference run itself went unstable; surfaced as exit code 3.
#[derive(Debug)]
pub struct BlowUpAbort {
    pub step: usize,
    pub t: f64,
}

impl fmt::Display for BlowUpAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "fine-grid reference run blew up at step {} (t = {:.6}); \
             lower dns_dt or the initial energy",
            self.step, self.t
        )
    }
}

impl std::error::Error for BlowUpAbort {}

pub fn run(cfg: &RunConfig, full_window: bool) -> Result<()> {
    let coarse_steps = if full_window {
        cfg.n_total()
    } else {
        cfg.reference_steps()
    };
    if coarse_steps == 0 {
        println!(
            "variant {} trains without references; use --window full to \
             produce evaluation references",
            cfg.variant
        );
        return Ok(());
    }
    super::prepare_out_dir(cfg)?;
    let dir = if full_window {
        super::refs_full_dir(cfg)
    } else {
        super::refs_dir(cfg)
    };
    let store = generate(cfg, coarse_steps, &dir)?;
    println!(
        "wrote {} coarse reference snapshots (steps 0..={}) to {}",
        store.len(),
        coarse_steps,
        dir.display()
    );
    Ok(())
}

/// Run the DNS over `coarse_steps` coarse intervals and persist the
/// projections under `dir`. Also used by eval for on-demand references.
pub fn generate(cfg: &RunConfig, coarse_steps: usize, dir: &Path) -> Result<ReferenceStore> {
    let fine_grid = cfg.fine_grid()?;
    let coarse_grid = cfg.coarse_grid()?;
    let fluid_fine = cfg.fluid_fine()?;
    let substeps = (cfg.dt / cfg.dns_dt).round() as usize;

    let u0 = init_decaying_turbulence(
        fine_grid,
        default_spectrum_profile(cfg.spectrum_peak),
        cfg.initial_energy,
        cfg.ic_seed,
    )?;
    let mut state = SolverState::new(u0);
    let mut snapshots = vec![filtered_dns_project(state.u(), coarse_grid)?];
    let report_every = (coarse_steps / 10).max(1);
    for step in 1..=coarse_steps {
        for _ in 0..substeps {
            state = noef_step(&state, &fluid_fine);
            if state.blown_up() {
                return Err(BlowUpAbort {
                    step,
                    t: state.t(),
                }
                .into());
            }
        }
        snapshots.push(filtered_dns_project(state.u(), coarse_grid)?);
        if step % report_every == 0 {
            println!(
                "dns step {step}/{coarse_steps}: E = {:.6}",
                kinetic_energy(state.u())
            );
        }
    }
    let store = ReferenceStore::from_snapshots(cfg.dt, snapshots)?;
    store
        .save(dir)
        .with_context(|| format!("saving references to {}", dir.display()))?;
    // final fine state, useful for extending the window later
    write_snapshot(&dir.join("dns_final.efrl"), state.u(), state.t())?;
    Ok(store)
}

/// Load references from `dir`, or, for evaluation, generate the full window
/// on demand when they are missing or too short.
pub fn load_or_generate_full(cfg: &RunConfig, dir: &PathBuf) -> Result<ReferenceStore> {
    if dir.join("manifest.txt").exists() {
        let store = ReferenceStore::load(dir)?;
        if store.len() > cfg.n_total() {
            return Ok(store);
        }
        println!(
            "references in {} cover {} snapshots, need {}; regenerating",
            dir.display(),
            store.len(),
            cfg.n_total() + 1
        );
    }
    generate(cfg, cfg.n_total(), dir)
}
