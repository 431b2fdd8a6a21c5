//! Marginal offloading rate and its inverse.
//!
//! With `rho = c a / tau` the derivative of `tau * log2(1 + c a / tau)` with
//! respect to `tau` is `log2(1 + rho) - rho / ((1 + rho) ln 2)`. It depends on
//! `rho` alone, is 0 at `rho = 0` and strictly increasing, so every level has
//! exactly one preimage.

use std::f64::consts::LN_2;

/// Marginal rate per unit of offloading time, in bits.
pub fn marginal_rate(rho: f64) -> f64 {
    marginal_nats(rho) / LN_2
}

fn marginal_nats(rho: f64) -> f64 {
    // ln(1+rho) - rho/(1+rho); the two terms cancel to O(rho^2) near 0.
    if rho < 1e-3 {
        let r = rho;
        r * r * (0.5 - r * (2.0 / 3.0 - r * (0.75 - r * 0.8)))
    } else {
        rho.ln_1p() - rho / (1.0 + rho)
    }
}

/// `f(s) = s + exp(-s) - 1` with `s = ln(1 + rho)`; equals `marginal_nats(rho)`.
fn level_in_log(s: f64) -> f64 {
    if s < 1e-2 {
        let s2 = s * s;
        s2 * (0.5 - s * (1.0 / 6.0 - s * (1.0 / 24.0 - s * (1.0 / 120.0 - s / 720.0))))
    } else {
        s + (-s).exp_m1()
    }
}

/// Inverse of [`marginal_rate`] for a level given in nats (`level > 0`).
///
/// Solved for `s = ln(1 + rho)` by Halley's method kept inside the bracket
/// `[sqrt(2 level), 1 + level]`, falling back to bisection whenever a step
/// leaves it.
pub fn rho_for_level_nats(level: f64) -> f64 {
    if level <= 0.0 {
        return 0.0;
    }
    if !level.is_finite() {
        return f64::INFINITY;
    }
    let mut lo = (2.0 * level).sqrt();
    let mut hi = 1.0 + level;
    let mut s = if level < 0.5 {
        // Series of the inverse near 0.
        lo * (1.0 + lo * (1.0 / 6.0 + lo / 72.0))
    } else {
        // s = 1 + level - exp(-s), one fixed-point step from s = 1 + level.
        hi - (-hi).exp()
    };
    if !(s > lo && s < hi) {
        s = 0.5 * (lo + hi);
    }
    for _ in 0..100 {
        let f = level_in_log(s) - level;
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let e = (-s).exp();
        let df = -(-s).exp_m1();
        let newton = f / df;
        let step = newton / (1.0 - 0.5 * newton * e / df);
        if step.abs() <= 4.0 * f64::EPSILON * s {
            s -= step;
            break;
        }
        let next = s - step;
        s = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    s.exp_m1()
}

/// Inverse of [`marginal_rate`] for a level in bits.
pub fn rho_for_level(level_bits: f64) -> f64 {
    rho_for_level_nats(level_bits * LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marginal_is_zero_at_origin_and_increasing() {
        assert_eq!(marginal_rate(0.0), 0.0);
        let mut prev = 0.0;
        for i in 1..2000 {
            let rho = 1e-6 * 1.02f64.powi(i);
            let g = marginal_rate(rho);
            assert!(g > prev, "not increasing at rho={rho}");
            prev = g;
        }
    }

    #[test]
    fn series_branch_matches_direct_formula() {
        for &rho in &[2e-4f64, 5e-4, 9.99e-4] {
            let direct = rho.ln_1p() - rho / (1.0 + rho);
            assert!((marginal_nats(rho) - direct).abs() <= 1e-10 * direct);
        }
    }

    #[test]
    fn inverse_round_trips_over_many_decades() {
        for i in -60..=40 {
            let rho = 10f64.powf(i as f64 * 0.25);
            let back = rho_for_level(marginal_rate(rho));
            assert!(
                (back - rho).abs() <= 1e-9 * rho,
                "rho={rho} back={back}"
            );
        }
    }

    #[test]
    fn inverse_of_nonpositive_level_is_zero() {
        assert_eq!(rho_for_level(0.0), 0.0);
        assert_eq!(rho_for_level(-1.0), 0.0);
    }
}
