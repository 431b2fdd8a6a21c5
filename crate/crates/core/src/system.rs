//! Physical model of a wireless powered MEC frame.
//!
//! One access point beams RF energy for a fraction `a` of each frame. A device
//! computing locally burns all harvested energy on its CPU for the whole
//! frame; an offloading device spends its harvested energy transmitting
//! during its own slot `tau_i`. All rate functions return bits per second.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::error::{check_len, Error, Result};

/// Fixed physical and channel constants of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub n: usize,
    pub frame_len_s: f64,
    pub ap_power_w: f64,
    pub harvest_eff: f64,
    pub bandwidth_hz: f64,
    pub noise_w: f64,
    pub vu: f64,
    pub cycles_per_bit: f64,
    pub energy_coeff: Vec<f64>,
    pub weights: Vec<f64>,
    pub antenna_gain: f64,
    pub carrier_hz: f64,
    pub pathloss_exp: f64,
}

impl SystemParams {
    /// Powercast-style reference network: P = 3 W, mu = 0.51, B = 2 MHz,
    /// N0 = 1e-10 W, v_u = 1.1, phi = 100, k_i = 1e-26, T = 1 s, weights
    /// 1 for odd (1-based) devices and 1.5 for even ones.
    pub fn reference(n: usize) -> Self {
        SystemParams {
            n,
            frame_len_s: 1.0,
            ap_power_w: 3.0,
            harvest_eff: 0.51,
            bandwidth_hz: 2e6,
            noise_w: 1e-10,
            vu: 1.1,
            cycles_per_bit: 100.0,
            energy_coeff: vec![1e-26; n],
            weights: default_weights(n),
            antenna_gain: 4.11,
            carrier_hz: 915e6,
            pathloss_exp: 2.8,
        }
    }

    /// `(mu P)^(1/3) / phi`
    pub fn eta1(&self) -> f64 {
        (self.harvest_eff * self.ap_power_w).cbrt() / self.cycles_per_bit
    }

    /// Received SNR scale `mu P / N0`; multiplied by `h^2` it gives the
    /// per-device constant `c_i` of the offload rate.
    pub fn snr_scale(&self) -> f64 {
        self.harvest_eff * self.ap_power_w / self.noise_w
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::domain("n must be at least 1"));
        }
        if !(self.harvest_eff > 0.0 && self.harvest_eff < 1.0) {
            return Err(Error::domain(format!(
                "harvest_eff must lie in (0,1), got {}",
                self.harvest_eff
            )));
        }
        for (name, v) in [
            ("frame_len_s", self.frame_len_s),
            ("ap_power_w", self.ap_power_w),
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_w", self.noise_w),
            ("cycles_per_bit", self.cycles_per_bit),
            ("carrier_hz", self.carrier_hz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.vu >= 1.0) {
            return Err(Error::domain(format!("vu must be >= 1, got {}", self.vu)));
        }
        check_len(self.n, self.energy_coeff.len())?;
        check_len(self.n, self.weights.len())?;
        if let Some(k) = self.energy_coeff.iter().find(|k| !(**k > 0.0)) {
            return Err(Error::domain(format!("energy_coeff must be positive, got {k}")));
        }
        if let Some(w) = self.weights.iter().find(|w| !(**w > 0.0)) {
            return Err(Error::domain(format!("weights must be positive, got {w}")));
        }
        Ok(())
    }
}

/// 1 for odd device numbers, 1.5 for even ones (devices numbered from 1).
pub fn default_weights(n: usize) -> Vec<f64> {
    (1..=n).map(|i| if i % 2 == 1 { 1.0 } else { 1.5 }).collect()
}

/// Channel gains observed in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFrame {
    /// 1-based frame index.
    pub t: u64,
    pub h: Vec<f64>,
}

impl ChannelFrame {
    pub fn new(t: u64, h: Vec<f64>) -> Result<Self> {
        if let Some(g) = h.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
            return Err(Error::domain(format!("channel gain must be finite and >= 0, got {g}")));
        }
        Ok(ChannelFrame { t, h })
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }
}

/// Binary offloading decision; `true` means the device offloads.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OffloadAction(Vec<bool>);

impl OffloadAction {
    pub fn from_bools(bits: Vec<bool>) -> Self {
        OffloadAction(bits)
    }

    /// Accepts only 0 and 1 entries.
    pub fn from_u8(bits: &[u8]) -> Result<Self> {
        bits.iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::domain(format!("offloading entry must be 0 or 1, got {other}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(OffloadAction)
    }

    pub fn zeros(n: usize) -> Self {
        OffloadAction(vec![false; n])
    }

    pub fn ones(n: usize) -> Self {
        OffloadAction(vec![true; n])
    }

    /// Action whose bits are the binary digits of `code`, device 0 being the
    /// most significant bit. Increasing codes enumerate actions in
    /// lexicographic order.
    pub fn from_index(code: u64, n: usize) -> Self {
        OffloadAction((0..n).map(|i| (code >> (n - 1 - i)) & 1 == 1).collect())
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.0[i] = value;
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.0.iter().map(|&b| b as u8).collect()
    }

    pub fn count_offloading(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }
}

impl std::fmt::Display for OffloadAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.0 {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Time split of one frame together with the weighted sum rate it achieves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub a: f64,
    pub tau: Vec<f64>,
    pub q: f64,
}

impl AllocationResult {
    pub fn time_used(&self) -> f64 {
        self.a + self.tau.iter().sum::<f64>()
    }
}

fn check_fraction(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in [0,1], got {v}")))
    }
}

/// Energy harvested during the WPT phase, in joules.
pub fn harvested_energy(h: f64, a: f64, p: &SystemParams) -> Result<f64> {
    check_fraction("a", a)?;
    if !(h >= 0.0) {
        return Err(Error::domain(format!("channel gain must be >= 0, got {h}")));
    }
    Ok(p.harvest_eff * p.ap_power_w * h * a * p.frame_len_s)
}

pub(crate) fn local_rate_unchecked(eta1: f64, h: f64, k: f64, a: f64) -> f64 {
    eta1 * (h / k).cbrt() * a.cbrt()
}

/// Local computing rate when the device runs its CPU for the whole frame on
/// the energy harvested in `a`.
pub fn local_rate(h: f64, k: f64, a: f64, p: &SystemParams) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::domain(format!("energy coefficient must be positive, got {k}")));
    }
    check_fraction("a", a)?;
    if !(h >= 0.0) {
        return Err(Error::domain(format!("channel gain must be >= 0, got {h}")));
    }
    Ok(local_rate_unchecked(p.eta1(), h, k, a))
}

pub(crate) fn offload_rate_unchecked(p: &SystemParams, h: f64, a: f64, tau: f64) -> f64 {
    if tau <= 0.0 || a <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let snr = p.snr_scale() * a * h * h / tau;
    p.bandwidth_hz * tau / p.vu * snr.ln_1p() / LN_2
}

/// Offloading rate: the data the device can push to the AP during `tau`
/// using all energy harvested in `a`. Exactly 0 when `tau`, `a` or `h` is 0.
pub fn offload_rate(h: f64, a: f64, tau: f64, p: &SystemParams) -> Result<f64> {
    if !(h >= 0.0) || !(a >= 0.0) || !(tau >= 0.0) {
        return Err(Error::domain(format!(
            "offload_rate needs h, a, tau >= 0, got h={h}, a={a}, tau={tau}"
        )));
    }
    Ok(offload_rate_unchecked(p, h, a, tau))
}

pub(crate) fn weighted_sum_rate_unchecked(
    h: &[f64],
    x: &[bool],
    a: f64,
    tau: &[f64],
    p: &SystemParams,
) -> f64 {
    let eta1 = p.eta1();
    let mut q = 0.0;
    for i in 0..h.len() {
        let r = if x[i] {
            offload_rate_unchecked(p, h[i], a, tau[i])
        } else {
            local_rate_unchecked(eta1, h[i], p.energy_coeff[i], a)
        };
        q += p.weights[i] * r;
    }
    q
}

/// Weighted sum computation rate of the frame for action `x` and time split
/// `(a, tau)`.
pub fn weighted_sum_rate(
    frame: &ChannelFrame,
    x: &OffloadAction,
    a: f64,
    tau: &[f64],
    p: &SystemParams,
) -> Result<f64> {
    check_len(p.n, frame.n())?;
    check_len(p.n, x.len())?;
    check_len(p.n, tau.len())?;
    check_fraction("a", a)?;
    if let Some(t) = tau.iter().find(|t| !(**t >= 0.0)) {
        return Err(Error::domain(format!("tau entries must be >= 0, got {t}")));
    }
    Ok(weighted_sum_rate_unchecked(&frame.h, x.bits(), a, tau, p))
}
