//! Online offloading agent: relax, quantize, evaluate, select, remember,
//! train.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::channel::EpisodeSpec;
use crate::error::{check_len, Error, Result};
use crate::policy::{train_step, PolicyNet, ReplayMemory, Sample, TrainConfig, DEFAULT_HIDDEN};
use crate::quantizer::{quantize, QuantizerKind};
use crate::rng::{stream_rng, Stream};
use crate::solver::{solve_p2, SolverConfig};
use crate::system::{AllocationResult, ChannelFrame, OffloadAction, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum KMode {
    Fixed { k: usize },
    /// Starts at `K = N`; every `delta` frames resets `K` to one more than
    /// the largest winning index of the previous `delta` frames, capped at N.
    Adaptive { delta: u64 },
}

/// Candidate-count schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveK {
    mode: KMode,
    k_now: usize,
    history: Vec<usize>,
}

impl AdaptiveK {
    pub fn new(mode: KMode, n: usize) -> Result<Self> {
        let k_now = match mode {
            KMode::Fixed { k } => {
                if k == 0 {
                    return Err(Error::Config("fixed K must be at least 1".into()));
                }
                k
            }
            KMode::Adaptive { delta } => {
                if delta == 0 {
                    return Err(Error::Config("adaptive K needs delta >= 1".into()));
                }
                n
            }
        };
        Ok(AdaptiveK { mode, k_now, history: Vec::new() })
    }

    pub fn mode(&self) -> KMode {
        self.mode
    }

    pub fn k_now(&self) -> usize {
        self.k_now
    }

    pub fn history(&self) -> &[usize] {
        &self.history
    }

    /// K to use in frame `t`; updates on frames with `t mod delta == 0`
    /// using the winning indices recorded since the previous update.
    pub fn k_for_frame(&mut self, t: u64, n: usize) -> usize {
        if let KMode::Adaptive { delta } = self.mode {
            if t > 1 && t.is_multiple_of(delta) && !self.history.is_empty() {
                self.k_now = update_k(&self.history, n);
                self.history.clear();
            }
        }
        self.k_now
    }

    pub fn record(&mut self, k_star: usize) {
        if let KMode::Adaptive { delta } = self.mode {
            if self.history.len() as u64 >= delta {
                self.history.remove(0);
            }
            self.history.push(k_star);
        }
    }
}

/// `min(max(history) + 1, n)`
pub fn update_k(history: &[usize], n: usize) -> usize {
    let best = history.iter().copied().max().unwrap_or(n);
    (best + 1).min(n).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub quantizer: QuantizerKind,
    pub k_mode: KMode,
    pub train: TrainConfig,
    pub hidden: Vec<usize>,
    pub solver: SolverConfig,
    /// Worker threads for candidate evaluation; 1 evaluates in place.
    pub threads: usize,
}

impl AgentConfig {
    pub fn reference(n: usize) -> Self {
        AgentConfig {
            quantizer: QuantizerKind::OrderPreserving,
            k_mode: KMode::Fixed { k: n },
            train: TrainConfig::default(),
            hidden: DEFAULT_HIDDEN.to_vec(),
            solver: SolverConfig::default(),
            threads: 1,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.train.validate()?;
        self.solver.validate()?;
        if let KMode::Fixed { k } = self.k_mode {
            let max = match self.quantizer {
                QuantizerKind::OrderPreserving => n + 1,
                QuantizerKind::Knn => 1usize.checked_shl(n as u32).unwrap_or(usize::MAX),
            };
            if k == 0 || k > max {
                return Err(Error::Config(format!("K must lie in [1, {max}] for N={n}, got {k}")));
            }
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub t: u64,
    pub x_star: OffloadAction,
    pub alloc: AllocationResult,
    /// 1-based position of the winner in the candidate list.
    pub k_star: usize,
    pub k_used: usize,
    pub loss: Option<f64>,
    pub wall_us: u64,
}

pub struct Agent {
    params: SystemParams,
    config: AgentConfig,
    net: PolicyNet,
    memory: ReplayMemory,
    k_schedule: AdaptiveK,
    seed: u64,
    pool: Option<rayon::ThreadPool>,
    evaluations: u64,
}

impl Agent {
    pub fn new(params: SystemParams, config: AgentConfig, seed: u64) -> Result<Self> {
        let net = PolicyNet::for_devices(params.n, &config.hidden, seed, config.train.learning_rate)?;
        Self::with_network(params, config, seed, net)
    }

    /// Starts from an existing network (e.g. a loaded snapshot).
    pub fn with_network(params: SystemParams, config: AgentConfig, seed: u64, net: PolicyNet) -> Result<Self> {
        params.validate()?;
        config.validate(params.n)?;
        if net.input_dim() != params.n || net.output_dim() != params.n {
            return Err(Error::Shape(format!(
                "network dims {:?} do not match N={}",
                net.dims(),
                params.n
            )));
        }
        let pool = if config.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.threads)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Agent {
            memory: ReplayMemory::new(config.train.memory_size),
            k_schedule: AdaptiveK::new(config.k_mode, params.n)?,
            params,
            config,
            net,
            seed,
            pool,
            evaluations: 0,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn net(&self) -> &PolicyNet {
        &self.net
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    pub fn k_schedule(&self) -> &AdaptiveK {
        &self.k_schedule
    }

    /// Total `solve_p2` calls made for candidate evaluation.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn set_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        check_len(self.params.n, weights.len())?;
        let mut next = self.params.clone();
        next.weights = weights;
        next.validate()?;
        self.params = next;
        Ok(())
    }

    fn scaled(&self, h: &[f64]) -> Vec<f64> {
        h.iter().map(|g| g * self.config.train.input_scale).collect()
    }

    fn evaluate(&self, frame: &ChannelFrame, candidates: &[OffloadAction]) -> Result<Vec<AllocationResult>> {
        let solve = |x: &OffloadAction| solve_p2(frame, x, &self.params, &self.config.solver);
        match &self.pool {
            Some(pool) => pool.install(|| candidates.par_iter().map(solve).collect()),
            None => candidates.iter().map(solve).collect(),
        }
    }

    /// Processes frame `frame.t`.
    pub fn step(&mut self, frame: &ChannelFrame) -> Result<FrameResult> {
        let started = Instant::now();
        check_len(self.params.n, frame.n())?;
        let t = frame.t;
        let n = self.params.n;

        let input = self.scaled(&frame.h);
        let xhat = self.net.forward(&input)?;
        let k = self.k_schedule.k_for_frame(t, n);
        let candidates = quantize(self.config.quantizer, &xhat, k)?;
        let allocs = self.evaluate(frame, &candidates)?;
        self.evaluations += candidates.len() as u64;

        let mut best = 0;
        for (i, r) in allocs.iter().enumerate().skip(1) {
            if r.q > allocs[best].q {
                best = i;
            }
        }
        let k_star = best + 1;
        let x_star = candidates[best].clone();
        let alloc = allocs.into_iter().nth(best).unwrap();

        // Switched-off devices (zero gain) are stored as local so the policy
        // learns to exclude them.
        let mut label = x_star.clone();
        for i in 0..n {
            if frame.h[i] == 0.0 {
                label.set(i, false);
            }
        }
        self.memory.push(Sample::new(input, &label));

        let mut loss = None;
        if t.is_multiple_of(self.config.train.train_interval) {
            let mut rng = stream_rng(self.seed, Stream::Replay, t);
            loss = train_step(&mut self.net, &self.memory, &self.config.train, &mut rng)?;
        }
        self.k_schedule.record(k_star);

        Ok(FrameResult {
            t,
            x_star,
            alloc,
            k_star,
            k_used: candidates.len(),
            loss,
            wall_us: started.elapsed().as_micros() as u64,
        })
    }
}

/// Runs frames `1..=n_frames` of the episode through a fresh agent.
pub fn run_episode(spec: &EpisodeSpec, params: &SystemParams, config: &AgentConfig) -> Result<Vec<FrameResult>> {
    check_len(params.n, spec.topology.n())?;
    let mut agent = Agent::new(params.clone(), config.clone(), spec.seed)?;
    spec.frames().map(|f| agent.step(&f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::make_topology;

    #[test]
    fn update_rule_examples() {
        assert_eq!(update_k(&[3, 5, 2], 10), 6);
        assert_eq!(update_k(&[10, 4], 10), 10);
        assert_eq!(update_k(&[1], 10), 2);
    }

    #[test]
    fn adaptive_schedule_starts_at_n_and_updates_on_multiples() {
        let mut s = AdaptiveK::new(KMode::Adaptive { delta: 4 }, 10).unwrap();
        assert_eq!(s.k_for_frame(1, 10), 10);
        for t in 1..=3 {
            assert_eq!(s.k_for_frame(t, 10), 10);
            s.record(if t == 2 { 3 } else { 1 });
        }
        assert_eq!(s.k_for_frame(4, 10), 4);
        assert!(s.history().is_empty());
    }

    #[test]
    fn huge_delta_is_fixed_n() {
        let mut s = AdaptiveK::new(KMode::Adaptive { delta: u64::MAX }, 7).unwrap();
        for t in 1..500 {
            assert_eq!(s.k_for_frame(t, 7), 7);
            s.record(1);
        }
    }

    #[test]
    fn first_frame_evaluates_k_candidates() {
        let n = 10;
        let p = SystemParams::reference(n);
        let topo = make_topology(n, 3, &p).unwrap();
        let spec = EpisodeSpec::new(1, 3, topo).unwrap();
        let mut agent = Agent::new(p, AgentConfig::reference(n), 3).unwrap();
        let frame = spec.frames().next().unwrap();
        let r = agent.step(&frame).unwrap();
        assert_eq!(agent.evaluations(), 10);
        assert_eq!(r.k_used, 10);
        assert!(r.loss.is_none());
        assert!(r.k_star >= 1 && r.k_star <= 10);
    }

    #[test]
    fn all_zero_gains_pick_first_candidate() {
        let p = SystemParams::reference(4);
        let mut agent = Agent::new(p, AgentConfig::reference(4), 1).unwrap();
        let r = agent.step(&ChannelFrame::new(1, vec![0.0; 4]).unwrap()).unwrap();
        assert_eq!(r.k_star, 1);
        assert_eq!(r.alloc.q, 0.0);
    }

    #[test]
    fn invalid_k_is_rejected() {
        let p = SystemParams::reference(4);
        let mut cfg = AgentConfig::reference(4);
        cfg.k_mode = KMode::Fixed { k: 6 };
        assert!(Agent::new(p, cfg, 1).is_err());
    }
}
