use diffnet::{DenseNet, Matrix};
use evcs_agents::sac::SacAgent;
use evcs_agents::td3::Td3Agent;
use evcs_agents::*;
use evcs_core::{EnvConfig, ScenarioId};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn transition(tag: f64, reward: f64, done: bool) -> Transition {
    Transition {
        state: vec![tag, 0.5, 0.2, 0.1],
        action: vec![0.1, -0.2, 0.3],
        reward,
        next_state: vec![tag, 0.4, 0.3, 0.0],
        done,
    }
}

fn random_transition(rng: &mut ChaCha8Rng) -> Transition {
    Transition {
        state: (0..OBS_DIM).map(|_| rng.random()).collect(),
        action: (0..ACT_DIM).map(|_| rng.random_range(-1.0..1.0)).collect(),
        reward: rng.random_range(-2.0..1.0),
        next_state: (0..OBS_DIM).map(|_| rng.random()).collect(),
        done: rng.random_bool(0.1),
    }
}

fn small_sac(seed: u64, config: SacConfig) -> SacAgent {
    SacAgent::new(OBS_DIM, ACT_DIM, config, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn small_td3(seed: u64, config: Td3Config) -> Td3Agent {
    Td3Agent::new(OBS_DIM, ACT_DIM, config, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// A network whose output is the constant `c` (zero weights, bias `c`).
fn constant_net(sizes: &[usize], c: f64) -> DenseNet {
    let mut net = DenseNet::zeros(sizes).unwrap();
    *net.params_mut().last_mut().unwrap() = c;
    net
}

/// Pins the log-std outputs of a Gaussian actor to `value`.
fn pin_log_std(actor: &DenseNet, value: f64) -> DenseNet {
    let mut net = actor.clone();
    let sizes = net.sizes().to_vec();
    let (fan_in, fan_out) = (sizes[sizes.len() - 2], sizes[sizes.len() - 1]);
    let dim = fan_out / 2;
    let n = net.param_count();
    let w_start = n - (fan_in + 1) * fan_out;
    let p = net.params_mut();
    for j in dim..fan_out {
        for i in 0..fan_in {
            p[w_start + j * fan_in + i] = 0.0;
        }
        p[n - fan_out + j] = value;
    }
    net
}

// ---- replay buffer ----

#[test]
fn fifo_eviction() {
    let mut b = ReplayBuffer::new(2);
    for i in 1..=3 {
        b.push(transition(i as f64, 0.0, false));
    }
    let tags: Vec<f64> = b.iter().map(|t| t.state[0]).collect();
    assert_eq!(tags, vec![2.0, 3.0]);
}

#[test]
fn singleton_buffer_repeats_its_item() {
    let mut b = ReplayBuffer::new(5);
    b.push(transition(7.0, 1.0, true));
    let batch = b.sample(4, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert!((0..4).all(|i| batch.states.get(i, 0) == 7.0));
}

#[test]
fn sampling_is_uniform() {
    let mut b = ReplayBuffer::new(10);
    for i in 0..10 {
        b.push(transition(i as f64, 0.0, false));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 100_000;
    let mut counts = [0usize; 10];
    for i in b.sample_indices(n, &mut rng).unwrap() {
        counts[i] += 1;
    }
    for c in counts {
        let f = c as f64 / n as f64;
        assert!((f - 0.1).abs() <= 0.01, "frequency {f}");
    }
}

proptest! {
    #[test]
    fn buffer_keeps_the_newest_items(cap in 1usize..20, n in 0usize..60) {
        let mut b = ReplayBuffer::new(cap);
        for i in 0..n {
            b.push(transition(i as f64, 0.0, false));
        }
        prop_assert_eq!(b.len(), n.min(cap));
        let tags: Vec<f64> = b.iter().map(|t| t.state[0]).collect();
        let expected: Vec<f64> = (n.saturating_sub(cap)..n).map(|i| i as f64).collect();
        prop_assert_eq!(tags, expected);
    }
}

// ---- SAC ----

#[test]
fn sac_critics_reach_the_terminal_reward() {
    let mut agent = small_sac(
        1,
        SacConfig {
            hidden: vec![16, 16],
            lr_critic: 1e-3,
            batch_size: 8,
            ..Default::default()
        },
    );
    let mut b = ReplayBuffer::new(4);
    b.push(transition(0.3, 1.0, true));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..3000 {
        agent.update(&b, &mut rng).unwrap();
    }
    let t = b.get(0).unwrap();
    let q = agent.q1_value(&t.state, &t.action).unwrap();
    let x: Vec<f64> = t.state.iter().chain(&t.action).copied().collect();
    let q2 = agent.critics().1.forward(&x).unwrap()[0];
    assert!((q - 1.0).abs() < 1e-3, "q1 = {q}");
    assert!((q2 - 1.0).abs() < 1e-3, "q2 = {q2}");
}

#[test]
fn sac_stays_finite_on_random_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut b = ReplayBuffer::new(500);
    for _ in 0..500 {
        b.push(random_transition(&mut rng));
    }
    let mut agent = small_sac(
        6,
        SacConfig {
            hidden: vec![32, 32],
            batch_size: 32,
            ..Default::default()
        },
    );
    for _ in 0..1000 {
        let l = agent.update(&b, &mut rng).unwrap();
        assert!(l.critic1.is_finite() && l.critic2.is_finite());
        assert!(l.value.unwrap().is_finite() && l.actor.unwrap().is_finite());
    }
    assert!(agent.networks().iter().all(|(_, n)| n.is_finite()));
}

#[test]
fn sac_rejects_an_empty_buffer() {
    let mut agent = small_sac(0, SacConfig::default());
    let err = agent
        .update(&ReplayBuffer::new(3), &mut ChaCha8Rng::seed_from_u64(0))
        .unwrap_err();
    assert!(matches!(err, AgentError::EmptyBuffer));
}

#[test]
fn value_target_uses_the_smaller_critic() {
    let mut agent = small_sac(
        2,
        SacConfig {
            hidden: vec![8],
            ..Default::default()
        },
    );
    let sizes = agent.critics().0.sizes().to_vec();
    agent.set_network("q1", constant_net(&sizes, 5.0)).unwrap();
    agent.set_network("q2", constant_net(&sizes, 3.0)).unwrap();
    let states = Matrix::from_rows(&[[0.1, 0.2, 0.3, 0.4], [0.9, 0.1, 0.5, 0.0]]);
    let noise = Matrix::from_rows(&[[0.3, -0.2, 1.1], [0.0, 0.5, -0.7]]);
    let obj = agent.actor_objective(&states, &noise).unwrap();
    assert_eq!(obj.q_min, vec![3.0, 3.0]);
    let alpha = agent.config().alpha;
    for (y, lp) in agent.value_targets(&obj).iter().zip(&obj.log_probs) {
        assert!((y - (3.0 - alpha * lp)).abs() < 1e-12);
    }

    // Swapped disagreement picks the other critic.
    agent.set_network("q1", constant_net(&sizes, -2.0)).unwrap();
    let obj = agent.actor_objective(&states, &noise).unwrap();
    assert_eq!(obj.q_min, vec![-2.0, -2.0]);
}

#[test]
fn critic_target_is_bootstrapped_from_the_target_value_net() {
    let mut agent = small_sac(
        3,
        SacConfig {
            hidden: vec![8],
            reward_scale: 2.0,
            discount: 0.9,
            ..Default::default()
        },
    );
    let sizes = agent.value().sizes().to_vec();
    agent.set_network("value_target", constant_net(&sizes, 4.0)).unwrap();
    let a = transition(0.0, 1.5, false);
    let b = transition(1.0, 1.5, true);
    let batch = Batch::from_transitions(&[&a, &b]);
    let y = agent.critic_targets(&batch).unwrap();
    assert!((y[0] - (3.0 + 0.9 * 4.0)).abs() < 1e-12);
    assert!((y[1] - 3.0).abs() < 1e-12);
}

#[test]
fn zero_entropy_deterministic_actor_maximizes_min_critic() {
    let mut agent = small_sac(
        4,
        SacConfig {
            hidden: vec![8],
            alpha: 0.0,
            ..Default::default()
        },
    );
    let floor = pin_log_std(agent.actor(), -50.0);
    agent.set_network("actor", floor).unwrap();
    let states = Matrix::from_rows(&[[0.1, 0.2, 0.3, 0.4], [0.7, 0.6, 0.1, 0.2]]);
    let noise = Matrix::from_rows(&[[1.0, -1.0, 0.5], [0.2, 0.1, -0.3]]);
    let obj = agent.actor_objective(&states, &noise).unwrap();
    let mean_q = obj.q_min.iter().sum::<f64>() / 2.0;
    assert!((obj.loss + mean_q).abs() < 1e-12);
    // The sampled action is the squashed mean.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for b in 0..2 {
        let mean = agent.act(states.row(b), ActionMode::Exploit, &mut rng).unwrap();
        let x: Vec<f64> = states.row(b).iter().chain(&mean).copied().collect();
        let q = agent.critics().0.forward(&x).unwrap()[0].min(agent.critics().1.forward(&x).unwrap()[0]);
        assert!((q - obj.q_min[b]).abs() < 1e-9);
    }
}

fn max_rel_error(analytic: &[f64], f: &mut dyn FnMut(usize, f64) -> f64) -> f64 {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (k, a) in analytic.iter().enumerate() {
        let fd = (f(k, h) - f(k, -h)) / (2.0 * h);
        let err = (a - fd).abs() / (a.abs() + fd.abs()).max(1e-4);
        worst = worst.max(err);
    }
    worst
}

#[test]
fn sac_actor_gradient_matches_finite_differences() {
    let agent = small_sac(
        8,
        SacConfig {
            hidden: vec![6, 5],
            ..Default::default()
        },
    );
    let states = Matrix::from_rows(&[[0.1, 0.2, 0.3, 0.4], [0.7, 0.6, 0.1, 0.2], [0.5, 0.9, 0.0, 1.0]]);
    let noise = Matrix::from_rows(&[[1.0, -1.0, 0.5], [0.2, 0.1, -0.3], [-0.8, 0.4, 1.3]]);
    let obj = agent.actor_objective(&states, &noise).unwrap();
    let mut probe = agent.clone();
    let base = agent.actor().clone();
    let err = max_rel_error(&obj.grads, &mut |k, h| {
        let mut net = base.clone();
        net.params_mut()[k] += h;
        probe.set_network("actor", net).unwrap();
        probe.actor_objective(&states, &noise).unwrap().loss
    });
    assert!(err < 1e-4, "max relative error {err}");
}

#[test]
fn td3_actor_gradient_matches_finite_differences() {
    let agent = small_td3(
        9,
        Td3Config {
            hidden: vec![6, 5],
            ..Default::default()
        },
    );
    let states = Matrix::from_rows(&[[0.1, 0.2, 0.3, 0.4], [0.7, 0.6, 0.1, 0.2], [0.5, 0.9, 0.0, 1.0]]);
    let (_, grads) = agent.actor_objective(&states).unwrap();
    let mut probe = agent.clone();
    let base = agent.actor().clone();
    let err = max_rel_error(&grads, &mut |k, h| {
        let mut net = base.clone();
        net.params_mut()[k] += h;
        probe.set_network("actor", net).unwrap();
        probe.actor_objective(&states).unwrap().0
    });
    assert!(err < 1e-4, "max relative error {err}");
}

// ---- action selection ----

#[test]
fn exploit_is_deterministic_and_explore_stays_in_the_box() {
    let agent = small_sac(10, SacConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let obs = [0.3, 0.5, 0.0, 0.8];
    let a = agent.select_action(&obs, ActionMode::Exploit, &mut rng).unwrap();
    let b = agent.select_action(&obs, ActionMode::Exploit, &mut rng).unwrap();
    assert_eq!(a, b);
    for _ in 0..2000 {
        let o: Vec<f64> = (0..OBS_DIM).map(|_| rng.random()).collect();
        let a = agent
            .select_action(&o, ActionMode::Explore, &mut rng)
            .unwrap()
            .to_array();
        assert!(a.iter().all(|x| (0.0..=1.0).contains(x)));
    }
}

#[test]
fn explore_matches_exploit_at_the_log_std_floor() {
    let mut agent = small_sac(12, SacConfig::default());
    let floor = pin_log_std(agent.actor(), agent.head().log_std_min);
    agent.set_network("actor", floor).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let o: Vec<f64> = (0..OBS_DIM).map(|_| rng.random()).collect();
        let x = agent
            .select_action(&o, ActionMode::Explore, &mut rng)
            .unwrap()
            .to_array();
        let m = agent
            .select_action(&o, ActionMode::Exploit, &mut rng)
            .unwrap()
            .to_array();
        assert!(x.iter().zip(&m).all(|(a, b)| (a - b).abs() < 1e-3));
    }
}

// ---- TD3 ----

#[test]
fn td3_actor_updates_once_per_delay() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut b = ReplayBuffer::new(100);
    for _ in 0..100 {
        b.push(random_transition(&mut rng));
    }
    let mut agent = small_td3(
        15,
        Td3Config {
            policy_delay: 3,
            hidden: vec![8],
            batch_size: 8,
            ..Default::default()
        },
    );
    let mut actor_losses = 0;
    for i in 1..=10u64 {
        let l = agent.update(&b, &mut rng).unwrap();
        actor_losses += usize::from(l.actor.is_some());
        assert_eq!(agent.actor_updates(), i / 3);
        assert_eq!(agent.critic_updates(), i);
    }
    assert_eq!(actor_losses, 3);
}

#[test]
fn zero_noise_clip_gives_the_target_policy_mean() {
    let agent = small_td3(
        16,
        Td3Config {
            noise_clip: 0.0,
            policy_noise: 0.5,
            ..Default::default()
        },
    );
    let s = Matrix::from_rows(&[[0.1, 0.2, 0.3, 0.4], [0.9, 0.0, 1.0, 0.3]]);
    let a = agent.target_actions(&s, &mut ChaCha8Rng::seed_from_u64(17)).unwrap();
    for b in 0..2 {
        let out = agent.actor().forward(s.row(b)).unwrap();
        for j in 0..ACT_DIM {
            assert_eq!(a.get(b, j), out[j].tanh());
        }
    }
}

#[test]
fn td3_target_uses_the_smaller_target_critic() {
    let mut agent = small_td3(
        18,
        Td3Config {
            hidden: vec![8],
            discount: 0.5,
            ..Default::default()
        },
    );
    let sizes = agent.networks()[2].1.sizes().to_vec();
    agent.set_network("q1_target", constant_net(&sizes, 5.0)).unwrap();
    agent.set_network("q2_target", constant_net(&sizes, 3.0)).unwrap();
    let a = transition(0.0, 1.0, false);
    let b = transition(1.0, 1.0, true);
    let y = agent
        .critic_targets(&Batch::from_transitions(&[&a, &b]), &mut ChaCha8Rng::seed_from_u64(0))
        .unwrap();
    assert_eq!(y, vec![1.0 + 0.5 * 3.0, 1.0]);
}

#[test]
fn td3_critics_reach_the_terminal_reward() {
    let mut agent = small_td3(
        19,
        Td3Config {
            hidden: vec![16, 16],
            lr_critic: 1e-3,
            batch_size: 8,
            ..Default::default()
        },
    );
    let mut b = ReplayBuffer::new(4);
    b.push(transition(0.3, 1.0, true));
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..3000 {
        agent.update(&b, &mut rng).unwrap();
    }
    let t = b.get(0).unwrap();
    let x: Vec<f64> = t.state.iter().chain(&t.action).copied().collect();
    for (name, net) in agent.networks() {
        if name == "q1" || name == "q2" {
            let q = net.forward(&x).unwrap()[0];
            assert!((q - 1.0).abs() < 1e-3, "{name} = {q}");
        }
    }
}

// ---- training loop ----

fn tiny_env() -> EnvConfig {
    let mut env = EnvConfig::default_for(ScenarioId::Slb80);
    env.horizon_days = 3;
    env
}

fn tiny_schedule(episodes: usize) -> TrainSchedule {
    TrainSchedule {
        episodes,
        calendar_days: 3,
        warmup_steps: 30,
        buffer_capacity: 1000,
        ..Default::default()
    }
}

fn tiny_sac() -> AgentConfig {
    AgentConfig::Sac(SacConfig {
        hidden: vec![16],
        batch_size: 16,
        reward_scale: 0.02,
        ..Default::default()
    })
}

#[test]
fn zero_episodes_return_the_initial_policy() {
    let (learner, log) = train(&tiny_env(), &tiny_sac(), &tiny_schedule(0), 4).unwrap();
    assert!(log.is_empty());
    let fresh = Learner::new(&tiny_sac(), 4).unwrap();
    assert_eq!(learner.agent().networks()[0].1, fresh.agent().networks()[0].1);
}

#[test]
fn training_is_deterministic() {
    for cfg in [
        tiny_sac(),
        AgentConfig::Td3(Td3Config {
            hidden: vec![16],
            batch_size: 16,
            ..Default::default()
        }),
    ] {
        let (a, log_a) = train(&tiny_env(), &cfg, &tiny_schedule(5), 21).unwrap();
        let (b, log_b) = train(&tiny_env(), &cfg, &tiny_schedule(5), 21).unwrap();
        assert_eq!(log_a, log_b);
        assert_eq!(a.agent().networks()[0].1, b.agent().networks()[0].1);
        let (_, log_c) = train(&tiny_env(), &cfg, &tiny_schedule(5), 22).unwrap();
        assert_ne!(log_a, log_c);
    }
}

#[test]
fn log_rows_track_the_calendar_and_buffer() {
    let (_, log) = train(&tiny_env(), &tiny_sac(), &tiny_schedule(5), 1).unwrap();
    let days: Vec<usize> = log.episodes.iter().map(|e| e.day).collect();
    assert_eq!(days, vec![0, 1, 2, 0, 1]);
    let sizes: Vec<usize> = log.episodes.iter().map(|e| e.buffer_size).collect();
    assert_eq!(sizes, vec![24, 48, 72, 96, 120]);
    assert_eq!(log.episodes[0].critic_loss, 0.0);
    assert!(log.episodes[4].critic_loss > 0.0);
    let mut csv = Vec::new();
    log.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 6);
}

#[test]
fn episode_costs_are_non_negative() {
    let (_, log) = train(&tiny_env(), &tiny_sac(), &tiny_schedule(2), 9).unwrap();
    for e in &log.episodes {
        assert!(e.operational_cost_usd >= 0.0 && e.degradation_usd >= 0.0);
        assert!(e.episode_return.is_finite());
    }
}

#[test]
fn checkpoints_fire_on_schedule() {
    let mut learner = Learner::new(&tiny_sac(), 2).unwrap();
    let schedule = TrainSchedule {
        checkpoint_every: 2,
        ..tiny_schedule(5)
    };
    let mut seen = Vec::new();
    train_agent(&tiny_env(), learner.agent_mut(), &schedule, 2, &mut |ep, agent| {
        assert_eq!(agent.name(), "sac");
        seen.push(ep);
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, vec![2, 4]);
}

#[test]
fn bad_configs_fail_before_training() {
    let bad_agent = AgentConfig::Sac(SacConfig {
        tau: 0.0,
        ..Default::default()
    });
    let err = train(&tiny_env(), &bad_agent, &tiny_schedule(3), 0).unwrap_err();
    assert!(matches!(err, AgentError::InvalidConfig { ref key, .. } if key == "tau"));

    let bad_td3 = AgentConfig::Td3(Td3Config {
        policy_delay: 0,
        ..Default::default()
    });
    assert!(train(&tiny_env(), &bad_td3, &tiny_schedule(3), 0).is_err());

    let mut bad_env = tiny_env();
    bad_env.p_threshold_kw = -1.0;
    assert!(matches!(
        train(&bad_env, &tiny_sac(), &tiny_schedule(3), 0),
        Err(AgentError::Env(_))
    ));

    let bad_schedule = TrainSchedule {
        calendar_days: 0,
        ..tiny_schedule(3)
    };
    assert!(train(&tiny_env(), &tiny_sac(), &bad_schedule, 0).is_err());
}

// ---- evaluation ----

#[test]
fn controllers_face_identical_days() {
    let env = tiny_env();
    let days = [0, 1, 2];
    let rule = rollout(&env, &days, Controller::Rule, 5).unwrap();
    let random = rollout(&env, &days, Controller::Random, 5).unwrap();
    let loads = |r: &Rollout| r.trace.iter().map(|x| x.outcome.state.ev_load_kw).collect::<Vec<_>>();
    assert_eq!(loads(&rule), loads(&random));
    assert_eq!(rule.returns.len(), 3);
    assert_eq!(rule, rollout(&env, &days, Controller::Rule, 5).unwrap());
    let total: f64 = rule.trace.iter().map(|x| x.outcome.cash_cost_usd).sum();
    assert!((total - rule.total_cash_cost()).abs() < 1e-9);
}
