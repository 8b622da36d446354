//! The episodic control environment around EF stepping: the discrete filter
//! radius action space, episode lifecycle for the four training variants,
//! observation encoding, and transition emission.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;

use crate::fields::{read_snapshot, write_snapshot, GridSpec, VelocityField};
use crate::metrics::kinetic_energy;
use crate::rewards::{
    residual_norm, reward_dd, reward_df, reward_sp, RewardParams, StepDiagnostics,
};
use crate::solver::{ef_step, FluidParams, SolverState};
use crate::{Error, Result};

/// The 50 discrete filter radii: four log-spaced decades across
/// `[1e-10, 1e-7]` where filtering is effectively off, then forty-six
/// log-spaced values across `[1e-6, 1e-3]` where it acts.
#[derive(Debug, Clone)]
pub struct ActionSpace {
    values: Vec<f64>,
}

impl ActionSpace {
    pub fn build() -> Self {
        let mut values = vec![1e-10, 1e-9, 1e-8, 1e-7, 1e-6];
        for i in 1..45 {
            values.push(10f64.powf(-6.0 + i as f64 * (3.0 / 45.0)));
        }
        values.push(1e-3);
        debug_assert_eq!(values.len(), 50);
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Decode an action index into a filter radius.
    pub fn delta(&self, index: usize) -> Result<f64> {
        self.values
            .get(index)
            .copied()
            .ok_or(Error::InvalidAction(index))
    }

    /// Index of an exact action value, if it is one.
    pub fn index_of(&self, delta: f64) -> Option<usize> {
        self.values.iter().position(|&v| v == delta)
    }
}

impl Default for ActionSpace {
    fn default() -> Self {
        Self::build()
    }
}

/// Training variant, distinguished by reward and episode start rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Data-driven, episodes from t = 0.
    Dd,
    /// Data-driven, episodes from a random reference snapshot.
    DdRand,
    /// Data-free (residual + gradient change), episodes from t = 0.
    Df,
    /// Data-free with structure-preserving penalties, episodes from t = 0.
    SpDf,
}

impl Variant {
    pub fn needs_reference(&self) -> bool {
        matches!(self, Variant::Dd | Variant::DdRand)
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dd" => Ok(Variant::Dd),
            "dd-rand" => Ok(Variant::DdRand),
            "df" => Ok(Variant::Df),
            "sp-df" => Ok(Variant::SpDf),
            other => Err(Error::Config(format!(
                "unknown variant '{other}' (expected dd, dd-rand, df, sp-df)"
            ))),
        }
    }

    pub const ALL: [Variant; 4] = [Variant::Dd, Variant::DdRand, Variant::Df, Variant::SpDf];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::Dd => "dd",
            Variant::DdRand => "dd-rand",
            Variant::Df => "df",
            Variant::SpDf => "sp-df",
        };
        f.write_str(s)
    }
}

/// Episode shape: length, start rule, discount.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeConfig {
    pub variant: Variant,
    /// Steps per episode: `N/4`, or `N/10` for the randomized variant.
    pub n_train: usize,
    /// Randomized variant: episode starts are sampled from `1..=start_max`
    /// (the standard training window); zero for the fixed-start variants.
    pub start_max: usize,
    pub gamma: f64,
}

impl EpisodeConfig {
    /// Derive the episode shape from the total run length `n_total`.
    pub fn for_variant(variant: Variant, n_total: usize, gamma: f64) -> Self {
        match variant {
            Variant::DdRand => Self {
                variant,
                n_train: n_total / 10,
                start_max: n_total / 4,
                gamma,
            },
            _ => Self {
                variant,
                n_train: n_total / 4,
                start_max: 0,
                gamma,
            },
        }
    }
}

/// One interaction record for experience replay.
#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

/// Filtered-DNS snapshots at every coarse time step of a training window.
#[derive(Debug)]
pub struct ReferenceStore {
    dt: f64,
    snapshots: Vec<VelocityField>,
}

impl ReferenceStore {
    pub fn from_snapshots(dt: f64, snapshots: Vec<VelocityField>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::MissingReference("no snapshots".into()));
        }
        let grid = snapshots[0].grid();
        if snapshots.iter().any(|s| s.grid() != grid) {
            return Err(Error::Config("reference snapshots on mixed grids".into()));
        }
        Ok(Self { dt, snapshots })
    }

    pub fn grid(&self) -> GridSpec {
        self.snapshots[0].grid()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of stored snapshots (index 0 is the initial condition).
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn snapshot(&self, step: usize) -> Result<&VelocityField> {
        self.snapshots.get(step).ok_or_else(|| {
            Error::MissingReference(format!(
                "reference step {step} beyond stored window {}",
                self.snapshots.len()
            ))
        })
    }

    /// Write the store as a directory of snapshot files plus a manifest.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let grid = self.grid();
        for (idx, snap) in self.snapshots.iter().enumerate() {
            let t = idx as f64 * self.dt;
            write_snapshot(&dir.join(format!("step_{idx:06}")), snap, t)?;
        }
        let manifest = format!(
            "n={}\nside={}\ndt={}\ncount={}\n",
            grid.n(),
            grid.side(),
            self.dt,
            self.snapshots.len()
        );
        std::fs::write(dir.join("manifest.txt"), manifest)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join("manifest.txt");
        let text = std::fs::read_to_string(&manifest_path)
            .map_err(|e| Error::MissingReference(format!("{}: {e}", manifest_path.display())))?;
        let mut n = None;
        let mut dt = None;
        let mut count = None;
        for line in text.lines() {
            let Some((key, value)) = line.split_once('=') else {
                continue;
            };
            match key.trim() {
                "n" => n = value.trim().parse::<usize>().ok(),
                "dt" => dt = value.trim().parse::<f64>().ok(),
                "count" => count = value.trim().parse::<usize>().ok(),
                _ => {}
            }
        }
        let (Some(n), Some(dt), Some(count)) = (n, dt, count) else {
            return Err(Error::Format(format!(
                "{}: manifest missing n/dt/count",
                manifest_path.display()
            )));
        };
        let mut snapshots = Vec::with_capacity(count);
        for idx in 0..count {
            let (snap, _t) = read_snapshot(&dir.join(format!("step_{idx:06}")))?;
            if snap.grid().n() != n {
                return Err(Error::GridMismatch {
                    expected: n,
                    found: snap.grid().n(),
                });
            }
            snapshots.push(snap);
        }
        Self::from_snapshots(dt, snapshots)
    }
}

/// Flatten a velocity field (ux then uy, row-major) scaled by `inv_scale`.
pub fn encode_observation(u: &VelocityField, inv_scale: f64) -> Vec<f64> {
    let n = u.grid().n();
    let mut obs = Vec::with_capacity(2 * n * n);
    obs.extend(u.ux().values().iter().map(|v| v * inv_scale));
    obs.extend(u.uy().values().iter().map(|v| v * inv_scale));
    obs
}

/// Per-step physical diagnostics surfaced alongside each transition.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub t: f64,
    pub delta: f64,
    /// Raw (unscaled) momentum residual of the step; NaN after blow-up.
    pub res_raw: f64,
    pub grad_norm: f64,
    pub energy: f64,
    pub enstrophy: f64,
    pub blown_up: bool,
}

/// The MDP around EF stepping. One instance runs one episode at a time;
/// `reset` starts the next.
pub struct Environment {
    fluid: FluidParams,
    actions: ActionSpace,
    cfg: EpisodeConfig,
    reward_params: RewardParams,
    refs: Option<Arc<ReferenceStore>>,
    initial_field: VelocityField,
    state: SolverState,
    steps_taken: usize,
    start_index: usize,
    inv_rms0: f64,
    grad_prev: f64,
    energy_prev: f64,
    enstrophy_prev: f64,
    last_obs: Vec<f64>,
    done: bool,
}

impl Environment {
    /// `initial_field` seeds fixed-start episodes; data-driven variants must
    /// carry a reference store covering their training window.
    pub fn new(
        fluid: FluidParams,
        cfg: EpisodeConfig,
        reward_params: RewardParams,
        initial_field: VelocityField,
        refs: Option<Arc<ReferenceStore>>,
    ) -> Result<Self> {
        reward_params.validate()?;
        if cfg.n_train == 0 {
            return Err(Error::Config("episode length must be positive".into()));
        }
        match (&cfg.variant, &refs) {
            (v, None) if v.needs_reference() => {
                return Err(Error::MissingReference(format!(
                    "variant {v} requires filtered-DNS snapshots"
                )));
            }
            (Variant::DdRand, Some(r)) => {
                let needed = cfg.start_max + cfg.n_train;
                if r.len() <= needed {
                    return Err(Error::MissingReference(format!(
                        "randomized starts need references through step {needed}, store has {}",
                        r.len()
                    )));
                }
            }
            (Variant::Dd, Some(r)) => {
                if r.len() <= cfg.n_train {
                    return Err(Error::MissingReference(format!(
                        "training window needs references through step {}, store has {}",
                        cfg.n_train,
                        r.len()
                    )));
                }
            }
            _ => {}
        }
        if let Some(r) = &refs {
            if r.grid() != initial_field.grid() {
                return Err(Error::GridMismatch {
                    expected: initial_field.grid().n(),
                    found: r.grid().n(),
                });
            }
        }
        let state = SolverState::new(initial_field.clone());
        let mut env = Self {
            fluid,
            actions: ActionSpace::build(),
            cfg,
            reward_params,
            refs,
            initial_field,
            state,
            steps_taken: 0,
            start_index: 0,
            inv_rms0: 1.0,
            grad_prev: 0.0,
            energy_prev: 0.0,
            enstrophy_prev: 0.0,
            last_obs: Vec::new(),
            done: true,
        };
        env.begin_episode(0)?;
        Ok(env)
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.cfg
    }

    pub fn fluid(&self) -> &FluidParams {
        &self.fluid
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn observation_dim(&self) -> usize {
        2 * self.initial_field.grid().n() * self.initial_field.grid().n()
    }

    pub fn done(&self) -> bool {
        self.done
    }

    fn begin_episode(&mut self, start_index: usize) -> Result<()> {
        let state = if start_index == 0 {
            match (&self.cfg.variant, &self.refs) {
                // data-driven runs start from the filtered-DNS initial state
                (Variant::Dd, Some(r)) => SolverState::new(r.snapshot(0)?.clone()),
                _ => SolverState::new(self.initial_field.clone()),
            }
        } else {
            let refs = self.refs.as_ref().expect("randomized start needs refs");
            let u = refs.snapshot(start_index)?.clone();
            SolverState::at_time(u, start_index as f64 * self.fluid.dt(), start_index)
        };
        let rms = state.u().rms();
        self.inv_rms0 = if rms > 0.0 { 1.0 / rms } else { 1.0 };
        let hat = state.u().to_spectral()?;
        self.grad_prev = crate::fields::grad_norm_spectral(&hat);
        self.enstrophy_prev = crate::metrics::enstrophy_spectral(&hat);
        self.energy_prev = kinetic_energy(state.u());
        self.last_obs = encode_observation(state.u(), self.inv_rms0);
        self.state = state;
        self.steps_taken = 0;
        self.start_index = start_index;
        self.done = false;
        Ok(())
    }

    /// Start a new episode; the randomized variant draws its start step from
    /// `rng`, every other variant restarts at `t = 0`.
    pub fn reset(&mut self, rng: &mut impl Rng) -> Result<Vec<f64>> {
        let start = match self.cfg.variant {
            Variant::DdRand => rng.random_range(1..=self.cfg.start_max),
            _ => 0,
        };
        self.begin_episode(start)?;
        Ok(self.last_obs.clone())
    }

    /// Apply one action: decode the radius, take an EF step, compute the
    /// variant's reward, and emit the transition. Blow-up terminates the
    /// episode with reward -1.
    pub fn step(&mut self, action: usize) -> Result<(Transition, StepInfo)> {
        if self.done {
            return Err(Error::Config(
                "environment stepped after episode end; call reset".into(),
            ));
        }
        let delta = self.actions.delta(action)?;
        let prev_u = self.state.u().clone();
        let next = ef_step(&self.state, delta, &self.fluid);
        self.steps_taken += 1;

        let obs = std::mem::take(&mut self.last_obs);
        let (transition, info);
        if next.blown_up() {
            self.done = true;
            transition = Transition {
                obs,
                action,
                reward: -1.0,
                next_obs: vec![0.0; self.observation_dim()],
                done: true,
            };
            info = StepInfo {
                t: next.t(),
                delta,
                res_raw: f64::NAN,
                grad_norm: f64::NAN,
                energy: f64::NAN,
                enstrophy: f64::NAN,
                blown_up: true,
            };
        } else {
            let hat = next.u().to_spectral()?;
            let grad_now = crate::fields::grad_norm_spectral(&hat);
            let energy_now = kinetic_energy(next.u());
            let enstrophy_now = crate::metrics::enstrophy_spectral(&hat);
            let res_raw = residual_norm(next.u(), &prev_u, &self.fluid)?;
            let diag = StepDiagnostics {
                res: res_raw * self.reward_params.res_scale,
                grad_now,
                grad_prev: self.grad_prev,
                energy_now,
                energy_prev: self.energy_prev,
                enstrophy_now,
                enstrophy_prev: self.enstrophy_prev,
            };
            let reward = match self.cfg.variant {
                Variant::Dd | Variant::DdRand => {
                    let refs = self.refs.as_ref().expect("validated at construction");
                    let u_ref = refs.snapshot(self.start_index + self.steps_taken)?;
                    reward_dd(next.u(), u_ref, &self.reward_params)?
                }
                Variant::Df => reward_df(&diag, &self.reward_params),
                Variant::SpDf => {
                    let base = reward_df(&diag, &self.reward_params);
                    reward_sp(&diag, &self.reward_params, base)
                }
            };
            self.done = self.steps_taken >= self.cfg.n_train;
            let next_obs = encode_observation(next.u(), self.inv_rms0);
            self.last_obs = next_obs.clone();
            transition = Transition {
                obs,
                action,
                reward,
                next_obs,
                done: self.done,
            };
            info = StepInfo {
                t: next.t(),
                delta,
                res_raw,
                grad_norm: grad_now,
                energy: energy_now,
                enstrophy: enstrophy_now,
                blown_up: false,
            };
            self.grad_prev = grad_now;
            self.energy_prev = energy_now;
            self.enstrophy_prev = enstrophy_now;
        }
        self.state = next;
        Ok((transition, info))
    }
}
