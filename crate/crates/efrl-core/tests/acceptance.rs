//! Acceptance suite: one test per acceptance criterion, each printing a
//! pass line once its assertions hold.
//!
//! Criteria 1-7 and 9 run at their stated scales. Criterion 8 runs its
//! small-profile version here; the full-scale multi-seed version lives in
//! `full_scale_policy_improvement` behind `#[ignore]` (hours of runtime):
//!
//! ```text
//! cargo test --release -p efrl-core --test acceptance -- --ignored --nocapture
//! ```

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use efrl_core::config::{Profile, RunConfig};
use efrl_core::dqn::{train_agent, Agent, AgentConfig};
use efrl_core::env::{ActionSpace, Environment, EpisodeConfig, ReferenceStore, Variant};
use efrl_core::fields::{GridSpec, SpectralVelocity, VelocityField};
use efrl_core::metrics::{energy_spectrum, err_energy, err_spectrum, kinetic_energy, SpectrumStats};
use efrl_core::rewards::{reward_df, reward_map, reward_sp, RewardParams, StepDiagnostics};
use efrl_core::solver::{
    default_spectrum_profile, differential_filter, ef_step, evolve_step, init_decaying_turbulence,
    kolmogorov_scale, noef_step, FluidParams, SolverState,
};

fn coarse_initial(cfg: &RunConfig) -> VelocityField {
    init_decaying_turbulence(
        cfg.coarse_grid().unwrap(),
        default_spectrum_profile(cfg.spectrum_peak),
        cfg.initial_energy,
        cfg.ic_seed,
    )
    .unwrap()
}

/// A single divergence-free Fourier mode with random orientation and phase.
fn random_divergence_free_mode(grid: GridSpec, rng: &mut ChaCha12Rng) -> (VelocityField, f64) {
    let half = grid.n() as i64 / 2;
    let (mx, my) = loop {
        let mx = rng.random_range(-(half - 1)..half);
        let my = rng.random_range(-(half - 1)..half);
        if mx != 0 || my != 0 {
            break (mx, my);
        }
    };
    let kx = 2.0 * std::f64::consts::PI * mx as f64 / grid.side();
    let ky = 2.0 * std::f64::consts::PI * my as f64 / grid.side();
    let k2 = kx * kx + ky * ky;
    let knorm = k2.sqrt();
    // direction perpendicular to k keeps the mode divergence-free
    let (dx, dy) = (-ky / knorm, kx / knorm);
    let amp = rng.random_range(0.1..2.0);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let a = Complex64::from_polar(amp, phase);
    let mut hat = SpectralVelocity::zeros(grid);
    hat.ux.set_mode(mx, my, a * dx);
    hat.uy.set_mode(mx, my, a * dy);
    hat.ux.set_mode(-mx, -my, (a * dx).conj());
    hat.uy.set_mode(-mx, -my, (a * dy).conj());
    (hat.to_physical().unwrap(), k2)
}

#[test]
fn criterion_1_filter_transfer_function() {
    let grid = GridSpec::unit(64).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(2024);
    for trial in 0..20 {
        let (u, k2) = random_divergence_free_mode(grid, &mut rng);
        let norm_in = u.l2_norm();
        for delta in [0.0, 1e-7, 1e-5, 1e-3] {
            let filtered = differential_filter(&u, delta).unwrap();
            let expected = 1.0 / (1.0 + 2.0 * delta * delta * k2);
            let ratio = filtered.l2_norm() / norm_in;
            assert!(
                (ratio - expected).abs() <= 1e-12,
                "trial {trial}, delta {delta:e}: ratio {ratio} vs {expected}"
            );
        }
    }
    println!("[PASS] criterion 1: filter transfer function exact to 1e-12");
}

#[test]
fn criterion_2_divergence_preservation_over_rollout() {
    let cfg = RunConfig::new(Profile::Ci, Variant::Df);
    let fluid = cfg.fluid().unwrap();
    let eta = kolmogorov_scale(&fluid, cfg.side);
    let mut state = SolverState::new(coarse_initial(&cfg));
    for step in 1..=500 {
        state = ef_step(&state, eta, &fluid);
        assert!(!state.blown_up(), "EF rollout blew up at step {step}");
        let hat = state.u().to_spectral().unwrap();
        let div = hat.max_divergence();
        assert!(div <= 1e-10, "step {step}: max spectral divergence {div:e}");
    }
    println!("[PASS] criterion 2: 500-step EF rollout keeps divergence <= 1e-10");
}

#[test]
fn criterion_3_evolve_step_first_order_accuracy() {
    let grid = GridSpec::unit(32).unwrap();
    let taylor_green = |amp: f64| {
        VelocityField::from_fn(
            grid,
            move |x, y| {
                amp * (2.0 * std::f64::consts::PI * x).sin() * (2.0 * std::f64::consts::PI * y).cos()
            },
            move |x, y| {
                -amp * (2.0 * std::f64::consts::PI * x).cos()
                    * (2.0 * std::f64::consts::PI * y).sin()
            },
        )
    };
    let horizon = 0.1;
    let error_at = |dt: f64| {
        let p = FluidParams::new(100.0, dt).unwrap();
        let steps = (horizon / dt).round() as usize;
        let mut u = taylor_green(1.0);
        for _ in 0..steps {
            u = evolve_step(&u, &p).unwrap();
        }
        let decay = (-8.0 * std::f64::consts::PI.powi(2) * p.nu() * horizon).exp();
        let exact = taylor_green(decay);
        u.ux()
            .values()
            .iter()
            .zip(exact.ux().values().iter())
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
    };
    let ratio = error_at(1e-3) / error_at(5e-4);
    assert!(
        (1.8..=2.2).contains(&ratio),
        "halving dt changed the error by {ratio}, expected about 2"
    );
    println!("[PASS] criterion 3: evolve step converges at first order (ratio {ratio:.3})");
}

#[test]
fn criterion_4_reward_algebra() {
    let params = RewardParams::default();

    assert!((reward_map(0.0, 1.0).unwrap() - 1.0).abs() <= 1e-12);
    assert!(reward_map(2.0_f64.ln(), 1.0).unwrap().abs() <= 1e-12);
    assert!((reward_map(0.0, 0.37).unwrap() - 1.0).abs() <= 1e-12);
    assert!(reward_map(0.37 * 2.0_f64.ln(), 0.37).unwrap().abs() <= 1e-12);

    let diag = |res, g_now, g_prev| StepDiagnostics {
        res,
        grad_now: g_now,
        grad_prev: g_prev,
        energy_now: 1.0,
        energy_prev: 1.0,
        enstrophy_now: 1.0,
        enstrophy_prev: 1.0,
    };
    // frozen gradients: the reciprocal term sits at its -1 limit
    assert!(reward_df(&diag(0.0, 2.0, 2.0), &params).abs() <= 1e-12);
    // diverging gradient change: both halves approach +1
    assert!((reward_df(&diag(0.0, 1e15, 0.0), &params) - 1.0).abs() <= 1e-12);

    // structure-preserving penalties
    let monotone = StepDiagnostics {
        res: 0.0,
        grad_now: 1.0,
        grad_prev: 1.0,
        energy_now: 0.9,
        energy_prev: 1.0,
        enstrophy_now: 0.8,
        enstrophy_prev: 1.0,
    };
    let base = 0.625;
    assert!((reward_sp(&monotone, &params, base) - base).abs() <= 1e-12);
    let growing = StepDiagnostics {
        energy_now: 1.1,
        energy_prev: 1.0,
        ..monotone
    };
    let expected = base + (-1.0_f64).exp() - 1.0;
    assert!((reward_sp(&growing, &params, base) - expected).abs() <= 1e-12);
    println!("[PASS] criterion 4: reward algebra exact to 1e-12");
}

#[test]
fn criterion_5_metric_oracles() {
    let grid = GridSpec::unit(32).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(55);
    // Parseval on 100 random fields
    for trial in 0..100 {
        let u = VelocityField::from_fn(grid, |_, _| 0.0, |_, _| 0.0);
        let mut u = u;
        u.ux_mut()
            .values_mut()
            .mapv_inplace(|_| rng.random_range(-1.0..1.0));
        u.uy_mut()
            .values_mut()
            .mapv_inplace(|_| rng.random_range(-1.0..1.0));
        let ke = kinetic_energy(&u);
        let spec = energy_spectrum(&u, 0.0).unwrap();
        assert!(
            (spec.total() - ke).abs() <= 1e-10 * ke,
            "trial {trial}: Parseval violated"
        );
    }

    // err metrics against an independently coded brute-force evaluation
    let n_steps = 40;
    let k_max = 12;
    let series: Vec<f64> = (0..n_steps).map(|_| rng.random_range(0.2..3.0)).collect();
    let reference: Vec<f64> = (0..n_steps).map(|_| rng.random_range(0.2..3.0)).collect();
    let mut brute = 0.0;
    for i in 0..n_steps {
        brute += ((series[i] - reference[i]) / reference[i]).abs();
    }
    brute /= n_steps as f64;
    assert!((err_energy(&series, &reference).unwrap() - brute).abs() <= 1e-12);

    let random_spectrum = |rng: &mut ChaCha12Rng| {
        SpectrumStats::from_shells(
            0.0,
            (0..=k_max).map(|_| rng.random_range(0.05..4.0)).collect(),
        )
    };
    let spectra: Vec<SpectrumStats> = (0..n_steps).map(|_| random_spectrum(&mut rng)).collect();
    let refs: Vec<SpectrumStats> = (0..n_steps).map(|_| random_spectrum(&mut rng)).collect();
    let mut brute_signed = 0.0;
    let mut brute_abs = 0.0;
    for i in 0..n_steps {
        let mut s = 0.0;
        let mut a = 0.0;
        for k in 1..=k_max {
            let ratio = (spectra[i].shell(k) / refs[i].shell(k)).log10();
            s += ratio;
            a += ratio.abs();
        }
        brute_signed += s / k_max as f64;
        brute_abs += a / k_max as f64;
    }
    brute_signed /= n_steps as f64;
    brute_abs /= n_steps as f64;
    let err = err_spectrum(&spectra, &refs, k_max).unwrap();
    assert!((err.signed - brute_signed).abs() <= 1e-12);
    assert!((err.absolute - brute_abs).abs() <= 1e-12);
    println!("[PASS] criterion 5: Parseval and brute-force metric oracles hold");
}

#[test]
fn criterion_6_dqn_correctness() {
    // (a) analytic vs central finite-difference gradients: the dedicated unit
    // test covers every parameter; spot-check determinism of the Q-net here
    // plus (b) the tabular fixed point and (c) bit-exact persistence.
    let mut rng = ChaCha12Rng::seed_from_u64(123);
    let net = efrl_core::dqn::Mlp::new(&[4, 8, 3], &mut rng).unwrap();
    let obs = [0.3, -0.2, 0.9, 0.0];
    assert_eq!(net.forward(&obs).unwrap(), net.forward(&obs).unwrap());

    // (b) 2-state 2-action MDP against value iteration
    let gamma = 0.9;
    let reward = |s: usize, a: usize| match (s, a) {
        (0, 0) => 0.1,
        (1, 1) => 1.0,
        _ => 0.0,
    };
    let transition = |s: usize, a: usize| match (s, a) {
        (0, 0) => 0,
        (0, 1) => 1,
        (1, 0) => 0,
        _ => 1,
    };
    let mut q_star = [[0.0f64; 2]; 2];
    for _ in 0..600 {
        let mut next = q_star;
        for s in 0..2 {
            for a in 0..2 {
                let s2 = transition(s, a);
                next[s][a] = reward(s, a) + gamma * q_star[s2][0].max(q_star[s2][1]);
            }
        }
        q_star = next;
    }
    let q_sup = q_star.iter().flatten().fold(0.0f64, |m, &v| m.max(v.abs()));

    let cfg = AgentConfig {
        gamma,
        lr: 1e-3,
        batch: 32,
        replay_capacity: 2000,
        target_update_interval: 200,
        eps_start: 0.3,
        eps_end: 0.3,
        eps_decay_fraction: 1.0,
        ..AgentConfig::defaults(100, 17)
    };
    let mut agent = Agent::new(2, 2, cfg, 50_000).unwrap();
    let one_hot = |s: usize| {
        let mut v = vec![0.0; 2];
        v[s] = 1.0;
        v
    };
    let mut s = 0usize;
    let mut converged = None;
    for step in 0..50_000u64 {
        let obs = one_hot(s);
        let a = agent.act(&obs).unwrap();
        let s2 = transition(s, a);
        agent
            .record(efrl_core::env::Transition {
                obs,
                action: a,
                reward: reward(s, a),
                next_obs: one_hot(s2),
                done: false,
            })
            .unwrap();
        s = s2;
        if step % 1000 == 999 {
            let mut worst = 0.0f64;
            for state in 0..2 {
                let q = agent.online().forward(&one_hot(state)).unwrap();
                for action in 0..2 {
                    worst = worst.max((q[action] - q_star[state][action]).abs());
                }
            }
            if worst <= 0.05 * q_sup {
                converged = Some(step + 1);
                break;
            }
        }
    }
    let steps = converged.expect("DQN did not reach the value-iteration fixed point in 5e4 steps");

    // (c) target sync and checkpoint round trip, bit exact
    let dir = std::env::temp_dir().join("efrl_acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("agent.efdq");
    agent.save_checkpoint(&path, 1).unwrap();
    let back = efrl_core::dqn::checkpoint_load(&path).unwrap();
    assert_eq!(back.net, *agent.online());
    assert_eq!(back.adam, *agent.adam());
    let probe = one_hot(0);
    assert_eq!(
        back.net.forward(&probe).unwrap(),
        agent.online().forward(&probe).unwrap()
    );
    let mut target = efrl_core::dqn::Mlp::new(&[2, 64, 64, 2], &mut rng).unwrap();
    assert!(efrl_core::dqn::target_sync(&back.net, &mut target, 500, 500));
    assert_eq!(target, back.net);
    std::fs::remove_file(&path).ok();
    println!("[PASS] criterion 6: tabular fixed point in {steps} steps; persistence bit-exact");
}

#[test]
fn criterion_7_blow_up_versus_over_dissipation() {
    let cfg = RunConfig::new(Profile::Paper, Variant::Df);
    let fluid = cfg.fluid().unwrap();
    let eta = kolmogorov_scale(&fluid, cfg.side);
    let u0 = coarse_initial(&cfg);
    let n_total = cfg.n_total();

    // unregularized: must trip the blow-up flag within the horizon
    let mut state = SolverState::new(u0.clone());
    let mut blow_step = None;
    for step in 1..=n_total {
        state = noef_step(&state, &fluid);
        if state.blown_up() {
            blow_step = Some(step);
            break;
        }
    }
    let blow_step = blow_step.expect("noEF run stayed stable over the full horizon");

    // fixed Kolmogorov filter: completes with monotone non-increasing energy
    // and stays divergence-free at every one of the 2000 steps
    let mut state = SolverState::new(u0);
    let mut energy_prev = kinetic_energy(state.u());
    for step in 1..=n_total {
        state = ef_step(&state, eta, &fluid);
        assert!(!state.blown_up(), "EF(eta) blew up at step {step}");
        let energy = kinetic_energy(state.u());
        assert!(
            energy <= energy_prev * (1.0 + 1e-10),
            "EF(eta) energy rose at step {step}: {energy_prev} -> {energy}"
        );
        energy_prev = energy;
        let div = state.u().to_spectral().unwrap().max_divergence();
        assert!(div <= 1e-10, "step {step}: divergence {div:e}");
    }
    println!(
        "[PASS] criterion 7: noEF blew up at step {blow_step}, EF(eta) decayed monotonically \
         to E = {energy_prev:.4}"
    );
}

#[test]
fn criterion_8_policy_learning_small_profile() {
    let cfg = RunConfig::new(Profile::Ci, Variant::Df);
    let fluid = cfg.fluid().unwrap();
    let episode_cfg = cfg.episode_config();
    assert_eq!(episode_cfg.n_train, 125);
    let mut env = Environment::new(
        fluid,
        episode_cfg,
        cfg.reward,
        coarse_initial(&cfg),
        None,
    )
    .unwrap();
    let planned = (cfg.episodes * episode_cfg.n_train) as u64;
    let mut agent = Agent::new(
        env.observation_dim(),
        env.actions().len(),
        cfg.agent_config(),
        planned,
    )
    .unwrap();
    let mut reset_rng = ChaCha12Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e3779b9));
    let logs = train_agent(&mut env, &mut agent, cfg.episodes, &mut reset_rng, |_| {}).unwrap();
    assert_eq!(logs.len(), cfg.episodes);
    assert!(
        !logs.iter().any(|l| l.blown_up),
        "training episodes must stay stable on the small profile"
    );

    // greedy rollout of the converged policy over the training window
    let mut obs = env.reset(&mut reset_rng).unwrap();
    let mut plain = 0.0;
    let mut blown = false;
    loop {
        let action = agent.act_greedy(&obs).unwrap();
        let (tr, info) = env.step(action).unwrap();
        obs = tr.next_obs;
        plain += tr.reward;
        blown |= info.blown_up;
        if tr.done {
            break;
        }
    }
    assert!(!blown, "greedy policy blew up");
    let floor = 0.8 * episode_cfg.n_train as f64;
    assert!(
        plain >= floor,
        "greedy plain return {plain:.2} below 0.8 * N_train = {floor}"
    );
    println!(
        "[PASS] criterion 8 (small profile): greedy return {plain:.1} >= {floor:.0} after {} episodes",
        cfg.episodes
    );
}

#[test]
fn criterion_9_episode_accounting() {
    let cfg = RunConfig::new(Profile::Paper, Variant::Df);
    let fluid = cfg.fluid().unwrap();
    let eta = kolmogorov_scale(&fluid, cfg.side);
    let u0 = coarse_initial(&cfg);

    // synthetic references from a stable EF trajectory cover the randomized
    // window; accounting does not care where references come from
    let refs = {
        let needed = cfg.n_train() + cfg.n_rand_train();
        let mut state = SolverState::new(u0.clone());
        let mut snaps = vec![state.u().clone()];
        for _ in 0..needed {
            state = ef_step(&state, eta, &fluid);
            assert!(!state.blown_up());
            snaps.push(state.u().clone());
        }
        Arc::new(ReferenceStore::from_snapshots(cfg.dt, snaps).unwrap())
    };

    let actions = ActionSpace::build();
    let mid_action = actions.index_of(1e-4).unwrap_or(30);
    for variant in Variant::ALL {
        let episode_cfg = EpisodeConfig::for_variant(variant, cfg.n_total(), cfg.gamma);
        let expected = match variant {
            Variant::DdRand => 200,
            _ => 500,
        };
        assert_eq!(episode_cfg.n_train, expected, "{variant}");
        let mut env = Environment::new(
            fluid,
            episode_cfg,
            cfg.reward,
            u0.clone(),
            Some(Arc::clone(&refs)),
        )
        .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        env.reset(&mut rng).unwrap();
        let mut steps = 0;
        let mut plain = 0.0;
        loop {
            let (tr, _) = env.step(mid_action).unwrap();
            steps += 1;
            plain += tr.reward;
            if tr.done {
                break;
            }
        }
        assert_eq!(steps, expected, "{variant} episode length");
        assert!(
            plain <= expected as f64,
            "{variant}: plain return {plain} exceeds the step count"
        );
    }
    println!("[PASS] criterion 9: episodes cap at 500 (fixed start) / 200 (randomized)");
}

/// Full-scale version of criterion 8: three seeds of 90-episode data-free
/// training at 64 x 64, each greedy rollout over the complete horizon must
/// stay stable and beat the fixed Kolmogorov filter on the time-averaged
/// energy error for at least two seeds. Takes hours; run explicitly.
#[test]
#[ignore]
fn full_scale_policy_improvement() {
    let base = RunConfig::new(Profile::Paper, Variant::Df);
    let fluid = base.fluid().unwrap();
    let eta = kolmogorov_scale(&fluid, base.side);
    let n_total = base.n_total();
    let u0 = coarse_initial(&base);

    // reference trajectory: filtered DNS over the full horizon
    let refs = {
        let fine = base.fine_grid().unwrap();
        let coarse = base.coarse_grid().unwrap();
        let fluid_fine = base.fluid_fine().unwrap();
        let sub = (base.dt / base.dns_dt).round() as usize;
        let mut state = SolverState::new(
            init_decaying_turbulence(
                fine,
                default_spectrum_profile(base.spectrum_peak),
                base.initial_energy,
                base.ic_seed,
            )
            .unwrap(),
        );
        let mut snaps = vec![efrl_core::metrics::filtered_dns_project(state.u(), coarse).unwrap()];
        for _ in 1..=n_total {
            for _ in 0..sub {
                state = noef_step(&state, &fluid_fine);
                assert!(!state.blown_up(), "reference DNS blew up");
            }
            snaps.push(efrl_core::metrics::filtered_dns_project(state.u(), coarse).unwrap());
        }
        Arc::new(ReferenceStore::from_snapshots(base.dt, snaps).unwrap())
    };
    let ref_energy: Vec<f64> = (1..=n_total)
        .map(|i| kinetic_energy(refs.snapshot(i).unwrap()))
        .collect();

    // fixed-filter baseline error
    let ef_err = {
        let mut state = SolverState::new(refs.snapshot(0).unwrap().clone());
        let mut series = Vec::with_capacity(n_total);
        for _ in 1..=n_total {
            state = ef_step(&state, eta, &fluid);
            assert!(!state.blown_up());
            series.push(kinetic_energy(state.u()));
        }
        err_energy(&series, &ref_energy).unwrap()
    };

    let mut wins = 0;
    for seed in [0u64, 1, 2] {
        let mut cfg = base.clone();
        cfg.seed = seed;
        let episode_cfg = cfg.episode_config();
        let mut env = Environment::new(fluid, episode_cfg, cfg.reward, u0.clone(), None).unwrap();
        let planned = (cfg.episodes * episode_cfg.n_train) as u64;
        let mut agent = Agent::new(
            env.observation_dim(),
            env.actions().len(),
            cfg.agent_config(),
            planned,
        )
        .unwrap();
        let mut reset_rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(0x9e3779b9));
        train_agent(&mut env, &mut agent, cfg.episodes, &mut reset_rng, |log| {
            println!("seed {seed} episode {}: return {:.1}", log.episode, log.plain_return);
        })
        .unwrap();

        // greedy rollout over the full horizon from the reference initial state
        let eval_cfg = EpisodeConfig {
            variant: Variant::Df,
            n_train: n_total,
            start_max: 0,
            gamma: cfg.gamma,
        };
        let mut eval_env = Environment::new(
            fluid,
            eval_cfg,
            cfg.reward,
            refs.snapshot(0).unwrap().clone(),
            None,
        )
        .unwrap();
        let mut obs = eval_env.reset(&mut reset_rng).unwrap();
        let mut series = Vec::with_capacity(n_total);
        let mut blown = false;
        loop {
            let action = agent.act_greedy(&obs).unwrap();
            let (tr, info) = eval_env.step(action).unwrap();
            obs = tr.next_obs;
            blown |= info.blown_up;
            if info.blown_up {
                break;
            }
            series.push(info.energy);
            if tr.done {
                break;
            }
        }
        assert!(!blown, "seed {seed}: greedy full-horizon rollout blew up");
        let rl_err = err_energy(&series, &ref_energy).unwrap();
        println!("seed {seed}: err_energy RL {rl_err:.4} vs EF(eta) {ef_err:.4}");
        if rl_err < ef_err {
            wins += 1;
        }
    }
    assert!(
        wins >= 2,
        "learned policy beat the fixed filter on only {wins}/3 seeds"
    );
    println!("[PASS] criterion 8 (full scale): stable greedy rollouts, {wins}/3 seeds beat EF(eta)");
}
