use droo_core::{
    exhaustive_opt, make_topology, quantize, run_episode, sample_frame, solve_p2, Agent, AgentConfig, ChannelFrame,
    EpisodeSpec, FrameResult, KMode, QuantizerKind, SolverConfig, SystemParams,
};

fn episode(n: usize, frames: u64, seed: u64, config: &AgentConfig) -> Vec<FrameResult> {
    let p = SystemParams::reference(n);
    let spec = EpisodeSpec::new(frames, seed, make_topology(n, seed, &p).unwrap()).unwrap();
    run_episode(&spec, &p, config).unwrap()
}

fn strip_timing(mut trace: Vec<FrameResult>) -> Vec<FrameResult> {
    trace.iter_mut().for_each(|f| f.wall_us = 0);
    trace
}

#[test]
fn one_device_with_two_candidates_is_exhaustive() {
    let p = SystemParams::reference(1);
    let config = AgentConfig { k_mode: KMode::Fixed { k: 2 }, ..AgentConfig::reference(1) };
    let mut agent = Agent::new(p.clone(), config, 3).unwrap();
    let topo = make_topology(1, 3, &p).unwrap();
    for t in 1..=300 {
        let frame = sample_frame(&topo, t, 3);
        let got = agent.step(&frame).unwrap();
        let (_, best) = exhaustive_opt(&frame, &p, &SolverConfig::default()).unwrap();
        assert_eq!(got.alloc.q, best.q, "frame {t}");
    }
}

#[test]
fn same_seed_gives_the_same_trace() {
    let config = AgentConfig::reference(6);
    let a = strip_timing(episode(6, 400, 9, &config));
    let b = strip_timing(episode(6, 400, 9, &config));
    assert_eq!(a, b);
    let c = strip_timing(episode(6, 400, 10, &config));
    assert_ne!(a, c);
}

#[test]
fn worker_pool_size_does_not_change_the_trace() {
    let serial = AgentConfig::reference(6);
    let pooled = AgentConfig { threads: 3, ..serial.clone() };
    assert_eq!(
        strip_timing(episode(6, 300, 4, &serial)),
        strip_timing(episode(6, 300, 4, &pooled))
    );
}

#[test]
fn winner_is_the_best_candidate_and_training_follows_the_interval() {
    let n = 5;
    let p = SystemParams::reference(n);
    let config = AgentConfig { k_mode: KMode::Adaptive { delta: 8 }, ..AgentConfig::reference(n) };
    let mut agent = Agent::new(p.clone(), config.clone(), 12).unwrap();
    let topo = make_topology(n, 12, &p).unwrap();
    for t in 1..=400u64 {
        let frame = sample_frame(&topo, t, 12);
        let input: Vec<f64> = frame.h.iter().map(|g| g * config.train.input_scale).collect();
        let xhat = agent.net().forward(&input).unwrap();
        let before = agent.evaluations();
        let r = agent.step(&frame).unwrap();
        let candidates = quantize(config.quantizer, &xhat, r.k_used).unwrap();
        assert_eq!(agent.evaluations() - before, r.k_used as u64);
        assert!(r.k_star >= 1 && r.k_star <= r.k_used && r.k_used <= n);
        let qs: Vec<f64> = candidates.iter().map(|x| solve_p2(&frame, x, &p, &config.solver).unwrap().q).collect();
        let max = qs.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(r.alloc.q, max);
        assert_eq!(qs.iter().position(|&q| q == max).unwrap() + 1, r.k_star);
        assert_eq!(candidates[r.k_star - 1], r.x_star);
        // Training starts once a full batch is stored.
        let trains = t % config.train.train_interval == 0 && t >= config.train.batch_size as u64;
        assert_eq!(r.loss.is_some(), trains, "frame {t}");
    }
}

#[test]
fn knn_agent_runs_and_respects_k() {
    let config = AgentConfig {
        quantizer: QuantizerKind::Knn,
        k_mode: KMode::Fixed { k: 4 },
        ..AgentConfig::reference(5)
    };
    for f in episode(5, 200, 2, &config) {
        assert_eq!(f.k_used, 4);
        assert!(f.alloc.time_used() <= 1.0 + 1e-9);
    }
}

#[test]
fn zero_gain_frame_keeps_the_first_candidate() {
    let p = SystemParams::reference(4);
    let mut agent = Agent::new(p, AgentConfig::reference(4), 1).unwrap();
    let r = agent.step(&ChannelFrame::new(1, vec![0.0; 4]).unwrap()).unwrap();
    assert_eq!((r.k_star, r.alloc.q), (1, 0.0));
}

#[test]
fn weight_changes_reach_the_solver() {
    let n = 3;
    let p = SystemParams::reference(n);
    let mut agent = Agent::new(p.clone(), AgentConfig::reference(n), 5).unwrap();
    let frame = ChannelFrame::new(1, vec![3e-6, 6e-6, 9e-6]).unwrap();
    let base = agent.step(&frame).unwrap().alloc.q;
    agent.set_weights(vec![2.0; n]).unwrap();
    let doubled = agent.step(&ChannelFrame::new(2, frame.h.clone()).unwrap()).unwrap().alloc.q;
    assert!(doubled > base);
    assert!(agent.set_weights(vec![1.0; n + 1]).is_err());
    assert!(agent.set_weights(vec![0.0; n]).is_err());
}
