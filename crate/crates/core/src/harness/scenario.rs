//! Scenario kinds, event schedules and the per-frame environment state.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_frame, Topology};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::system::{ChannelFrame, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    #[default]
    Baseline,
    AltWeights,
    Surge,
    Onoff,
    QuantizerSweep,
    DeltaSweep,
    HyperSweep,
    RateCompare,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 8] = [
        ScenarioKind::Baseline,
        ScenarioKind::AltWeights,
        ScenarioKind::Surge,
        ScenarioKind::Onoff,
        ScenarioKind::QuantizerSweep,
        ScenarioKind::DeltaSweep,
        ScenarioKind::HyperSweep,
        ScenarioKind::RateCompare,
    ];

    /// Sweeps write a directory of runs instead of a single CSV.
    pub fn is_sweep(self) -> bool {
        matches!(
            self,
            ScenarioKind::QuantizerSweep
                | ScenarioKind::DeltaSweep
                | ScenarioKind::HyperSweep
                | ScenarioKind::RateCompare
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Baseline => "baseline",
            ScenarioKind::AltWeights => "alt-weights",
            ScenarioKind::Surge => "surge",
            ScenarioKind::Onoff => "onoff",
            ScenarioKind::QuantizerSweep => "quantizer-sweep",
            ScenarioKind::DeltaSweep => "delta-sweep",
            ScenarioKind::HyperSweep => "hyper-sweep",
            ScenarioKind::RateCompare => "rate-compare",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario {s:?}")))
    }
}

/// Device indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    SetWeights { weights: Vec<f64> },
    SetWeight { device: usize, weight: f64 },
    TurnOff { device: usize },
    TurnOn { device: usize },
}

/// Takes effect from `frame` onwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledEvent {
    pub frame: u64,
    #[serde(flatten)]
    pub event: Event,
}

/// Frame at `per_10k / 10000` of the run, never before frame 1.
fn at(frames: u64, per_10k: u64) -> u64 {
    ((frames as u128 * per_10k as u128 / 10_000) as u64).max(1)
}

/// Event frames scale with the run length; at 10000 frames they fall on
/// the reference frames (6000, 8000, ...).
pub fn default_schedule(
    kind: ScenarioKind,
    frames: u64,
    seed: u64,
    base_weights: &[f64],
) -> Vec<ScheduledEvent> {
    let n = base_weights.len();
    let ev = |frame: u64, event: Event| ScheduledEvent { frame, event };
    match kind {
        ScenarioKind::AltWeights => {
            let swapped: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.5 } else { 1.0 }).collect();
            vec![
                ev(at(frames, 6000), Event::SetWeights { weights: swapped }),
                ev(at(frames, 8000), Event::SetWeights { weights: base_weights.to_vec() }),
            ]
        }
        ScenarioKind::Surge if n >= 2 => vec![
            ev(at(frames, 4000), Event::SetWeight { device: 1, weight: 2.0 * base_weights[1] }),
            ev(at(frames, 6000), Event::SetWeight { device: 0, weight: 3.0 * base_weights[0] }),
            ev(at(frames, 8000), Event::SetWeight { device: 0, weight: base_weights[0] }),
            ev(at(frames, 8000), Event::SetWeight { device: 1, weight: base_weights[1] }),
        ],
        ScenarioKind::Onoff if n >= 5 => onoff_schedule(frames, seed, n),
        _ => Vec::new(),
    }
}

/// Four devices go off one at a time, three come back, then one more goes
/// off, leaving `n - 2` active. Devices are drawn from the schedule stream.
fn onoff_schedule(frames: u64, seed: u64, n: usize) -> Vec<ScheduledEvent> {
    let mut rng = stream_rng(seed, Stream::Schedule, 0);
    let mut on: Vec<usize> = (0..n).collect();
    let mut off: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for (tp, turn_on) in [
        (6000, false),
        (6500, false),
        (7000, false),
        (7500, false),
        (8000, true),
        (8500, true),
        (9000, true),
        (9500, false),
    ] {
        let (from, to) = if turn_on { (&mut off, &mut on) } else { (&mut on, &mut off) };
        let device = from.remove(rng.gen_range(0..from.len()));
        to.push(device);
        to.sort_unstable();
        let event = if turn_on { Event::TurnOn { device } } else { Event::TurnOff { device } };
        out.push(ScheduledEvent { frame: at(frames, tp), event });
    }
    out
}

pub fn validate_schedule(schedule: &[ScheduledEvent], n: usize, frames: u64) -> Result<()> {
    for (i, e) in schedule.iter().enumerate() {
        if e.frame < 1 || e.frame > frames {
            return Err(Error::Config(format!(
                "schedule[{i}]: frame {} outside [1, {frames}]",
                e.frame
            )));
        }
        let bad_device = |d: usize| Error::Config(format!("schedule[{i}]: device {d} outside [0, {n})"));
        match &e.event {
            Event::SetWeights { weights } => {
                if weights.len() != n {
                    return Err(Error::Config(format!(
                        "schedule[{i}]: {} weights for {n} devices",
                        weights.len()
                    )));
                }
                if weights.iter().any(|w| !(*w > 0.0)) {
                    return Err(Error::Config(format!("schedule[{i}]: weights must be positive")));
                }
            }
            Event::SetWeight { device, weight } => {
                if *device >= n {
                    return Err(bad_device(*device));
                }
                if !(*weight > 0.0) {
                    return Err(Error::Config(format!("schedule[{i}]: weight must be positive")));
                }
            }
            Event::TurnOff { device } | Event::TurnOn { device } => {
                if *device >= n {
                    return Err(bad_device(*device));
                }
            }
        }
    }
    Ok(())
}

/// What the network looks like in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameState {
    /// Gains with inactive devices zeroed.
    pub frame: ChannelFrame,
    pub weights: Vec<f64>,
    pub active: Vec<bool>,
}

/// Channel draws plus the schedule; any frame can be produced on its own.
#[derive(Debug, Clone)]
pub struct Environment {
    pub params: SystemParams,
    pub topology: Topology,
    pub seed: u64,
    pub frames: u64,
    schedule: Vec<ScheduledEvent>,
}

impl Environment {
    pub fn new(
        params: SystemParams,
        topology: Topology,
        seed: u64,
        frames: u64,
        mut schedule: Vec<ScheduledEvent>,
    ) -> Result<Self> {
        params.validate()?;
        crate::error::check_len(params.n, topology.n())?;
        validate_schedule(&schedule, params.n, frames)?;
        // Stable: same-frame events apply in listed order.
        schedule.sort_by_key(|e| e.frame);
        Ok(Environment { params, topology, seed, frames, schedule })
    }

    pub fn schedule(&self) -> &[ScheduledEvent] {
        &self.schedule
    }

    pub fn state(&self, t: u64) -> FrameState {
        let mut weights = self.params.weights.clone();
        let mut active = vec![true; self.params.n];
        for e in self.schedule.iter().take_while(|e| e.frame <= t) {
            match &e.event {
                Event::SetWeights { weights: w } => weights.clone_from(w),
                Event::SetWeight { device, weight } => weights[*device] = *weight,
                Event::TurnOff { device } => active[*device] = false,
                Event::TurnOn { device } => active[*device] = true,
            }
        }
        let mut frame = sample_frame(&self.topology, t, self.seed);
        for (h, &on) in frame.h.iter_mut().zip(&active) {
            if !on {
                *h = 0.0;
            }
        }
        FrameState { frame, weights, active }
    }

    /// System parameters with the frame's weights.
    pub fn params_for(&self, state: &FrameState) -> SystemParams {
        let mut p = self.params.clone();
        p.weights.clone_from(&state.weights);
        p
    }
}
