pub mod compare;
pub mod eval;
pub mod gen_dns;
pub mod train;

use std::path::Path;

use anyhow::Result;
use efrl_core::config::RunConfig;

/// Create the run directory and drop the resolved configuration into it.
pub fn prepare_out_dir(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    cfg.save(&cfg.out_dir.join("config.txt"))?;
    Ok(())
}

/// Coarse-grid initial condition shared by training and fixed-start episodes.
pub fn coarse_initial_field(cfg: &RunConfig) -> Result<efrl_core::fields::VelocityField> {
    Ok(efrl_core::solver::init_decaying_turbulence(
        cfg.coarse_grid()?,
        efrl_core::solver::default_spectrum_profile(cfg.spectrum_peak),
        cfg.initial_energy,
        cfg.ic_seed,
    )?)
}

pub fn refs_dir(cfg: &RunConfig) -> std::path::PathBuf {
    cfg.out_dir.join("refs")
}

pub fn refs_full_dir(cfg: &RunConfig) -> std::path::PathBuf {
    cfg.out_dir.join("refs-full")
}

pub fn checkpoint_path(out_dir: &Path) -> std::path::PathBuf {
    out_dir.join("checkpoint_final.efdq")
}
