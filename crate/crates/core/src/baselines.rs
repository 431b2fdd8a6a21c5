//! Reference offloading policies.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::solver::{solve_p2, SolverConfig};
use crate::system::{AllocationResult, ChannelFrame, OffloadAction, SystemParams};

/// Largest `N` accepted by [`exhaustive_opt`].
pub const EXHAUSTIVE_MAX_N: usize = 12;

/// Minimum gain for a coordinate-descent flip to count as an improvement.
pub const CD_IMPROVEMENT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    Exhaustive,
    Cd,
    Local,
    Edge,
}

pub fn run_baseline(
    kind: BaselineKind,
    frame: &ChannelFrame,
    p: &SystemParams,
    cfg: &SolverConfig,
) -> Result<(OffloadAction, AllocationResult)> {
    match kind {
        BaselineKind::Exhaustive => exhaustive_opt(frame, p, cfg),
        BaselineKind::Cd => coordinate_descent(frame, p, cfg),
        BaselineKind::Local => Ok((OffloadAction::zeros(p.n), all_local(frame, p, cfg)?)),
        BaselineKind::Edge => Ok((OffloadAction::ones(p.n), all_edge(frame, p, cfg)?)),
    }
}

/// Best of all `2^N` actions; ties go to the lexicographically smallest.
pub fn exhaustive_opt(
    frame: &ChannelFrame,
    p: &SystemParams,
    cfg: &SolverConfig,
) -> Result<(OffloadAction, AllocationResult)> {
    check_len(p.n, frame.n())?;
    if p.n > EXHAUSTIVE_MAX_N {
        return Err(Error::TooLarge { what: "exhaustive search", n: p.n, max: EXHAUSTIVE_MAX_N });
    }
    let mut best: Option<(OffloadAction, AllocationResult)> = None;
    for code in 0..(1u64 << p.n) {
        let x = OffloadAction::from_index(code, p.n);
        let r = solve_p2(frame, &x, p, cfg)?;
        if best.as_ref().is_none_or(|(_, b)| r.q > b.q) {
            best = Some((x, r));
        }
    }
    Ok(best.expect("at least one action"))
}

/// Coordinate descent from all-local.
pub fn coordinate_descent(
    frame: &ChannelFrame,
    p: &SystemParams,
    cfg: &SolverConfig,
) -> Result<(OffloadAction, AllocationResult)> {
    coordinate_descent_from(frame, p, cfg, OffloadAction::zeros(p.n))
}

/// Each round tries every single-device mode swap and applies the one with
/// the largest gain; stops when no swap gains more than [`CD_IMPROVEMENT`].
pub fn coordinate_descent_from(
    frame: &ChannelFrame,
    p: &SystemParams,
    cfg: &SolverConfig,
    start: OffloadAction,
) -> Result<(OffloadAction, AllocationResult)> {
    check_len(p.n, frame.n())?;
    check_len(p.n, start.len())?;
    let mut x = start;
    let mut current = solve_p2(frame, &x, p, cfg)?;
    loop {
        let mut best: Option<(usize, AllocationResult)> = None;
        for i in 0..p.n {
            let mut y = x.clone();
            y.flip(i);
            let r = solve_p2(frame, &y, p, cfg)?;
            if best.as_ref().is_none_or(|(_, b)| r.q > b.q) {
                best = Some((i, r));
            }
        }
        match best {
            Some((i, r)) if r.q > current.q + CD_IMPROVEMENT => {
                x.flip(i);
                current = r;
            }
            _ => return Ok((x, current)),
        }
    }
}

pub fn all_local(frame: &ChannelFrame, p: &SystemParams, cfg: &SolverConfig) -> Result<AllocationResult> {
    solve_p2(frame, &OffloadAction::zeros(p.n), p, cfg)
}

pub fn all_edge(frame: &ChannelFrame, p: &SystemParams, cfg: &SolverConfig) -> Result<AllocationResult> {
    solve_p2(frame, &OffloadAction::ones(p.n), p, cfg)
}
