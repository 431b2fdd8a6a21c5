//! Brute-force grid oracle for the allocation problem.
//!
//! Shares nothing with the dual solver beyond the rate formulas of the system
//! model: small offloader sets are gridded directly, larger ones use a
//! per-`a` equal-marginal split whose SNR ratios come from the closed form
//! `rho = -(1 + W0(-exp(-1 - L))) / W0(-exp(-1 - L))` (Lambert W, principal
//! branch).

use std::f64::consts::LN_2;

use crate::error::{check_len, Error, Result};
use crate::system::{weighted_sum_rate_unchecked, AllocationResult, ChannelFrame, OffloadAction, SystemParams};

/// Principal branch of Lambert W on `[-1/e, 0]`, for the argument
/// `-exp(-1 - level)` with `level >= 0`.
fn lambert_w0_of_level(level: f64) -> f64 {
    let x = -(-1.0 - level).exp();
    // 1 + e x, computed without cancellation.
    let gap = -(-level).exp_m1();
    let mut w = if gap < 0.5 {
        let p = (2.0 * gap).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        x * (1.0 - x)
    };
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let dw = f / denom;
        w -= dw;
        if dw.abs() <= 1e-15 * (1.0 + w.abs()) {
            break;
        }
    }
    w.clamp(-1.0, 0.0)
}

fn rho_closed_form(level_nats: f64) -> f64 {
    if level_nats <= 0.0 {
        return 0.0;
    }
    if level_nats > 700.0 {
        return f64::INFINITY;
    }
    let gap = -(-level_nats).exp_m1();
    // v = 1 + W; near the branch point 1 + W cancels, so use its series in
    // p = sqrt(2 gap) directly.
    let v = if gap < 1e-6 {
        let p = (2.0 * gap).sqrt();
        p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 - p * 43.0 / 540.0)))
    } else {
        1.0 + lambert_w0_of_level(level_nats)
    };
    v / (1.0 - v)
}

/// Grid search over `a` (including both endpoints) and over the `tau`
/// simplex. Returns the best point found, a lower bound on the optimum.
///
/// `resolution` must lie in `(0, 0.1]`.
pub fn grid_oracle_p2(
    frame: &ChannelFrame,
    x: &OffloadAction,
    p: &SystemParams,
    resolution: f64,
) -> Result<AllocationResult> {
    if !(resolution > 0.0 && resolution <= 0.1) {
        return Err(Error::domain(format!("resolution must lie in (0, 0.1], got {resolution}")));
    }
    check_len(p.n, frame.n())?;
    check_len(p.n, x.len())?;
    let active: Vec<usize> = (0..p.n).filter(|&i| x.get(i) && frame.h[i] > 0.0).collect();
    let steps = (1.0 / resolution).round() as usize;
    let mut best = AllocationResult { a: 0.0, tau: vec![0.0; p.n], q: f64::NEG_INFINITY };
    let mut tau = vec![0.0; p.n];
    let consider = |a: f64, tau: &[f64], best: &mut AllocationResult| {
        let q = weighted_sum_rate_unchecked(&frame.h, x.bits(), a, tau, p);
        if q > best.q {
            *best = AllocationResult { a, tau: tau.to_vec(), q };
        }
    };

    for j in 0..=steps {
        let a = j as f64 / steps as f64;
        let budget = (1.0 - a).max(0.0);
        match active.len() {
            0 => consider(a, &tau, &mut best),
            1 => {
                let i = active[0];
                let mut m = 0;
                loop {
                    let t = m as f64 * resolution;
                    if t >= budget {
                        break;
                    }
                    tau[i] = t;
                    consider(a, &tau, &mut best);
                    m += 1;
                }
                tau[i] = budget;
                consider(a, &tau, &mut best);
            }
            2 => {
                let (i, k) = (active[0], active[1]);
                let mut m = 0;
                loop {
                    let t = (m as f64 * resolution).min(budget);
                    tau[i] = t;
                    tau[k] = (budget - t).max(0.0);
                    consider(a, &tau, &mut best);
                    if t >= budget {
                        break;
                    }
                    m += 1;
                }
            }
            _ => {
                equal_marginal_split(frame, p, &active, a, budget, &mut tau);
                consider(a, &tau, &mut best);
            }
        }
        for &i in &active {
            tau[i] = 0.0;
        }
    }
    Ok(best)
}

fn equal_marginal_split(
    frame: &ChannelFrame,
    p: &SystemParams,
    active: &[usize],
    a: f64,
    budget: f64,
    tau: &mut [f64],
) {
    if a <= 0.0 || budget <= 0.0 {
        return;
    }
    let snr = p.harvest_eff * p.ap_power_w / p.noise_w;
    let dev: Vec<(usize, f64, f64)> = active
        .iter()
        .map(|&i| (i, snr * frame.h[i] * frame.h[i], p.weights[i] * p.bandwidth_hz / p.vu))
        .collect();
    let used = |lambda: f64| -> f64 {
        dev.iter()
            .map(|&(_, c, s)| c * a / rho_closed_form(lambda * LN_2 / s))
            .sum()
    };
    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    while used(hi) > budget {
        hi *= 2.0;
    }
    while used(lo) < budget {
        lo *= 0.5;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if used(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    let mut total = 0.0;
    for &(i, c, s) in &dev {
        tau[i] = c * a / rho_closed_form(hi * LN_2 / s);
        total += tau[i];
    }
    if total > 0.0 {
        for &(i, _, _) in &dev {
            tau[i] *= budget / total;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambert_closed_form_inverts_marginal() {
        for i in -40..=30 {
            let rho = 10f64.powf(i as f64 * 0.2);
            let level = rho.ln_1p() - rho / (1.0 + rho);
            let back = rho_closed_form(level);
            assert!((back - rho).abs() <= 1e-6 * rho, "rho={rho} back={back}");
        }
    }

    #[test]
    fn resolution_is_validated() {
        let p = SystemParams::reference(1);
        let f = ChannelFrame::new(1, vec![1e-5]).unwrap();
        assert!(grid_oracle_p2(&f, &OffloadAction::ones(1), &p, 0.0).is_err());
        assert!(grid_oracle_p2(&f, &OffloadAction::ones(1), &p, 0.2).is_err());
    }

    #[test]
    fn all_local_grid_hits_a_equal_one() {
        let p = SystemParams::reference(3);
        let f = ChannelFrame::new(1, vec![1e-5, 2e-6, 5e-6]).unwrap();
        let r = grid_oracle_p2(&f, &OffloadAction::zeros(3), &p, 0.01).unwrap();
        assert_eq!(r.a, 1.0);
    }
}
