//! Optimal time allocation for a fixed offloading action.
//!
//! For fixed `x` the weighted sum rate is jointly concave in `(a, tau)`, so
//! the allocation is found through the dual variable `lambda` of the time
//! budget `a + sum(tau) <= 1`. Two routes are provided:
//!
//! * [`SolveMethod::Dual`] (default): a single root search on `lambda`. For a
//!   given `lambda` every offloader's SNR ratio `rho_i = c_i a / tau_i`
//!   follows from equal marginal rates, the budget then fixes `a`, and the
//!   stationarity condition in `a` is an increasing function of `lambda`.
//! * [`SolveMethod::NestedGolden`]: golden-section search over `a`, with an
//!   inner bisection on `lambda` for the equal-marginal split of `1 - a`.
//!
//! [`grid_oracle_p2`] is a brute-force lower bound used for verification.

mod marginal;
mod oracle;

pub use marginal::{marginal_rate, rho_for_level, rho_for_level_nats};
pub use oracle::grid_oracle_p2;

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::error::{check_len, Error, Result};
use crate::system::{
    local_rate_unchecked, weighted_sum_rate_unchecked, AllocationResult, ChannelFrame,
    OffloadAction, SystemParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    #[default]
    Dual,
    NestedGolden,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Absolute tolerance on `a` for the golden-section route.
    pub outer_tol: f64,
    /// Relative tolerance on the dual variable.
    pub inner_tol: f64,
    pub max_iter: usize,
    pub method: SolveMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            outer_tol: 1e-6,
            inner_tol: 1e-8,
            max_iter: 200,
            method: SolveMethod::Dual,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.outer_tol > 0.0) || !(self.inner_tol > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("solver max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// An offloading device with positive gain.
#[derive(Debug, Clone, Copy)]
struct Offloader {
    idx: usize,
    /// `w_i B / v_u`
    scale: f64,
    /// `mu P h_i^2 / N0`; offload SNR is `c a / tau`.
    c: f64,
}

impl Offloader {
    fn rho_at(&self, lambda: f64) -> f64 {
        rho_for_level_nats(lambda * LN_2 / self.scale)
    }
}

/// The allocation problem for one `(h, x)` pair after dropping devices that
/// cannot contribute.
struct Reduced {
    /// Weighted local rate at `a = 1`; the local part is `local * a^(1/3)`.
    local: f64,
    offloaders: Vec<Offloader>,
}

impl Reduced {
    fn new(h: &[f64], x: &[bool], p: &SystemParams) -> Self {
        let eta1 = p.eta1();
        let snr = p.snr_scale();
        let mut local = 0.0;
        let mut offloaders = Vec::new();
        for i in 0..h.len() {
            if x[i] {
                if h[i] > 0.0 {
                    offloaders.push(Offloader {
                        idx: i,
                        scale: p.weights[i] * p.bandwidth_hz / p.vu,
                        c: snr * h[i] * h[i],
                    });
                }
            } else {
                local += p.weights[i] * local_rate_unchecked(eta1, h[i], p.energy_coeff[i], 1.0);
            }
        }
        Reduced { local, offloaders }
    }
}

fn check_inputs(frame: &ChannelFrame, x: &OffloadAction, p: &SystemParams) -> Result<()> {
    check_len(p.n, frame.n())?;
    check_len(p.n, x.len())?;
    check_len(p.n, p.weights.len())?;
    check_len(p.n, p.energy_coeff.len())?;
    Ok(())
}

/// Optimal `(a, tau)` and the resulting weighted sum rate for action `x`.
///
/// Offloaders with zero gain get `tau = 0`. With no effective offloader the
/// whole frame goes to energy transfer (`a = 1`).
pub fn solve_p2(
    frame: &ChannelFrame,
    x: &OffloadAction,
    p: &SystemParams,
    cfg: &SolverConfig,
) -> Result<AllocationResult> {
    check_inputs(frame, x, p)?;
    let reduced = Reduced::new(&frame.h, x.bits(), p);
    let mut tau = vec![0.0; p.n];
    let a = if reduced.offloaders.is_empty() {
        1.0
    } else {
        match cfg.method {
            SolveMethod::Dual => solve_dual(&reduced, cfg, &mut tau)?,
            SolveMethod::NestedGolden => solve_nested(&reduced, cfg, &mut tau)?,
        }
    };
    let q = weighted_sum_rate_unchecked(&frame.h, x.bits(), a, &tau, p);
    Ok(AllocationResult { a, tau, q })
}

/// Residual `H(lambda)` of the stationarity condition in `a` and its
/// derivative, with the budget-feasible split implied by `lambda`.
struct DualPoint {
    a: f64,
    residual: f64,
    slope: f64,
}

/// Fills `tau` with the split implied by `lambda`.
///
/// `H(lambda) = lambda - sum(phi_i) - (local / 3) a^(-2/3)` is strictly
/// increasing; its root is the optimum.
fn dual_point(r: &Reduced, lambda: f64, tau: &mut [f64]) -> DualPoint {
    let mut inv_sum = 0.0;
    let mut phi_sum = 0.0;
    // d(inv_sum)/d(lambda), negated.
    let mut inv_slope = 0.0;
    for o in &r.offloaders {
        let rho = o.rho_at(lambda);
        let q = o.c / rho;
        inv_sum += q;
        phi_sum += o.scale * o.c / ((1.0 + rho) * LN_2);
        inv_slope += q * LN_2 / o.scale * (1.0 + rho) * (1.0 + rho) / (rho * rho);
        tau[o.idx] = rho;
    }
    let a = 1.0 / (1.0 + inv_sum);
    for o in &r.offloaders {
        let rho = tau[o.idx];
        tau[o.idx] = if rho.is_infinite() { 0.0 } else { o.c * a / rho };
    }
    let mut residual = lambda - phi_sum;
    // d(phi_i)/d(lambda) = -c_i / rho_i.
    let mut slope = 1.0 + inv_sum;
    if r.local > 0.0 {
        residual -= r.local / 3.0 * a.powf(-2.0 / 3.0);
        slope += 2.0 * r.local / 9.0 * a.powf(1.0 / 3.0) * inv_slope;
    }
    if residual.is_nan() || residual == f64::NEG_INFINITY {
        residual = -f64::MAX;
    }
    DualPoint { a, residual, slope }
}

/// Safeguarded Newton on `lambda`: `H(0) < 0`, the bracket grows by 4x
/// until `H >= 0`, and steps leaving the bracket fall back to its
/// geometric midpoint.
fn solve_dual(r: &Reduced, cfg: &SolverConfig, tau: &mut [f64]) -> Result<f64> {
    let mut lambda = r.offloaders.iter().map(|o| o.scale).fold(0.0, f64::max);
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for _ in 0..cfg.max_iter {
        let pt = dual_point(r, lambda, tau);
        if pt.residual < 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        if pt.residual == 0.0 {
            return Ok(pt.a);
        }
        let mut next = lambda - pt.residual / pt.slope;
        if !(next > lo && next < hi) {
            next = if hi.is_infinite() {
                4.0 * lambda
            } else if lo == 0.0 {
                0.25 * hi
            } else {
                (lo * hi).sqrt()
            };
        }
        let converged = (next - lambda).abs() <= cfg.inner_tol * lambda || (hi.is_finite() && hi - lo <= cfg.inner_tol * hi);
        lambda = next;
        if converged {
            return Ok(dual_point(r, lambda, tau).a);
        }
    }
    Err(Error::NonConvergence { what: "dual Newton search", iterations: cfg.max_iter })
}

/// Equal-marginal split of `1 - a` among the offloaders; returns the
/// offloading part of the objective and fills `tau`.
fn split_budget(r: &Reduced, a: f64, cfg: &SolverConfig, tau: &mut [f64]) -> Result<f64> {
    let budget = 1.0 - a;
    if budget <= 0.0 || a <= 0.0 {
        for o in &r.offloaders {
            tau[o.idx] = 0.0;
        }
        return Ok(0.0);
    }
    let used = |lambda: f64| -> f64 {
        r.offloaders
            .iter()
            .map(|o| o.c * a / o.rho_at(lambda))
            .sum::<f64>()
    };
    // `used` decreases in lambda; bisect in log space.
    let start = r.offloaders.iter().map(|o| o.scale).fold(0.0, f64::max);
    let (mut lo, mut hi) = (start, start);
    let mut it = 0usize;
    let mut guard = || -> Result<()> {
        it += 1;
        if it > cfg.max_iter {
            Err(Error::NonConvergence {
                what: "budget bisection",
                iterations: cfg.max_iter,
            })
        } else {
            Ok(())
        }
    };
    while used(hi) > budget {
        guard()?;
        hi *= 4.0;
    }
    while used(lo) < budget {
        guard()?;
        lo *= 0.25;
    }
    while hi - lo > cfg.inner_tol * hi {
        guard()?;
        let mid = (lo * hi).sqrt();
        if used(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = hi;
    let mut raw = 0.0;
    for o in &r.offloaders {
        let t = o.c * a / o.rho_at(lambda);
        tau[o.idx] = t;
        raw += t;
    }
    // Rescale onto the budget face so the allocation is exactly feasible.
    let scale = if raw > 0.0 { budget / raw } else { 0.0 };
    let mut value = 0.0;
    for o in &r.offloaders {
        tau[o.idx] *= scale;
        let t = tau[o.idx];
        if t > 0.0 {
            value += o.scale * t * (o.c * a / t).ln_1p() / LN_2;
        }
    }
    Ok(value)
}

fn solve_nested(r: &Reduced, cfg: &SolverConfig, tau: &mut [f64]) -> Result<f64> {
    let objective = |a: f64, tau: &mut [f64]| -> Result<f64> {
        Ok(r.local * a.cbrt() + split_budget(r, a, cfg, tau)?)
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = objective(x1, tau)?;
    let mut f2 = objective(x2, tau)?;
    let mut iterations = 0usize;
    while hi - lo > cfg.outer_tol {
        iterations += 1;
        if iterations > cfg.max_iter {
            return Err(Error::NonConvergence {
                what: "golden-section search",
                iterations: cfg.max_iter,
            });
        }
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = objective(x1, tau)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = objective(x2, tau)?;
        }
    }
    let a = if f1 >= f2 { x1 } else { x2 };
    objective(a, tau)?;
    Ok(a)
}

/// Marginal rates `(w_i B / v_u) * g(rho_i)` of the effective offloaders at
/// an allocation; equal across devices at the optimum.
pub fn offloader_marginals(
    frame: &ChannelFrame,
    x: &OffloadAction,
    alloc: &AllocationResult,
    p: &SystemParams,
) -> Vec<f64> {
    let snr = p.snr_scale();
    (0..p.n)
        .filter(|&i| x.get(i) && frame.h[i] > 0.0 && alloc.tau[i] > 0.0)
        .map(|i| {
            let rho = snr * frame.h[i] * frame.h[i] * alloc.a / alloc.tau[i];
            p.weights[i] * p.bandwidth_hz / p.vu * marginal_rate(rho)
        })
        .collect()
}
