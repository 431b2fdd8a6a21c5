//! Free-space path loss with i.i.d. Rayleigh fading.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::{exp1, stream_rng, unit_f64, Stream};
use crate::system::{default_weights, ChannelFrame, SystemParams};

const SPEED_OF_LIGHT: f64 = 3e8;

/// Device placement range in meters (open interval).
pub const DISTANCE_RANGE: (f64, f64) = (2.5, 5.2);

/// Mean channel gain at distance `d` meters:
/// `A_d * (c / (4 pi f_c d))^d_e`.
pub fn path_loss(d: f64, p: &SystemParams) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::domain(format!("distance must be positive, got {d}")));
    }
    Ok(p.antenna_gain * (SPEED_OF_LIGHT / (4.0 * PI * p.carrier_hz * d)).powf(p.pathloss_exp))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub distances: Vec<f64>,
    pub mean_gains: Vec<f64>,
}

impl Topology {
    pub fn from_distances(distances: Vec<f64>, p: &SystemParams) -> Result<Self> {
        let mean_gains = distances
            .iter()
            .map(|&d| path_loss(d, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Topology { distances, mean_gains })
    }

    pub fn n(&self) -> usize {
        self.distances.len()
    }
}

/// Devices placed uniformly in [`DISTANCE_RANGE`].
pub fn make_topology(n: usize, seed: u64, p: &SystemParams) -> Result<Topology> {
    if n == 0 {
        return Err(Error::domain("topology needs at least one device"));
    }
    let mut rng = stream_rng(seed, Stream::Topology, 0);
    let (lo, hi) = DISTANCE_RANGE;
    let distances = (0..n)
        .map(|_| loop {
            let d = lo + (hi - lo) * unit_f64(&mut rng);
            if d > lo {
                break d;
            }
        })
        .collect();
    Topology::from_distances(distances, p)
}

/// Channel gains of frame `t`: `h_i = mean_gain_i * alpha_i` with
/// `alpha_i ~ Exp(1)`, drawn from the `(seed, channel, t)` cell.
pub fn sample_frame(topology: &Topology, t: u64, seed: u64) -> ChannelFrame {
    let mut rng = stream_rng(seed, Stream::Channel, t);
    let h = topology
        .mean_gains
        .iter()
        .map(|&g| g * exp1(&mut rng))
        .collect();
    ChannelFrame { t, h }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSpec {
    pub n_frames: u64,
    pub seed: u64,
    pub topology: Topology,
}

impl EpisodeSpec {
    pub fn new(n_frames: u64, seed: u64, topology: Topology) -> Result<Self> {
        if n_frames == 0 {
            return Err(Error::domain("an episode needs at least one frame"));
        }
        Ok(EpisodeSpec { n_frames, seed, topology })
    }

    /// Frames `1..=n_frames`.
    pub fn frames(&self) -> impl Iterator<Item = ChannelFrame> + '_ {
        (1..=self.n_frames).map(move |t| sample_frame(&self.topology, t, self.seed))
    }
}

/// On-disk topology document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyDoc {
    pub distances: Vec<f64>,
    pub seed: u64,
    pub weights: Vec<f64>,
}

impl TopologyDoc {
    pub fn new(topology: &Topology, seed: u64, weights: &[f64]) -> Self {
        TopologyDoc {
            distances: topology.distances.clone(),
            seed,
            weights: weights.to_vec(),
        }
    }

    pub fn default_for(topology: &Topology, seed: u64) -> Self {
        Self::new(topology, seed, &default_weights(topology.n()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json("topology", e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: TopologyDoc =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        if doc.distances.len() != doc.weights.len() {
            return Err(Error::LengthMismatch {
                expected: doc.distances.len(),
                got: doc.weights.len(),
            });
        }
        Ok(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn path_loss_examples() {
        let p = SystemParams::reference(1);
        let g3 = path_loss(3.0, &p).unwrap();
        let expected = 4.11 * (3e8 / (4.0 * PI * 915e6 * 3.0)).powf(2.8);
        assert_relative_eq!(g3, expected, max_relative = 1e-12);
        assert_relative_eq!(g3, 6.98e-6, max_relative = 1e-3);
        assert_relative_eq!(path_loss(6.0, &p).unwrap() / g3, 2f64.powf(-2.8), max_relative = 1e-12);
        assert_relative_eq!(2f64.powf(-2.8), 0.1436, max_relative = 1e-3);
        assert!(path_loss(2.5, &p).unwrap() > path_loss(5.2, &p).unwrap());
        assert!(path_loss(0.0, &p).is_err());
        assert!(path_loss(-1.0, &p).is_err());
    }

    #[test]
    fn topology_in_range_and_seeded() {
        let p = SystemParams::reference(10);
        let t = make_topology(10, 42, &p).unwrap();
        assert!(t.distances.iter().all(|&d| d > 2.5 && d < 5.2));
        assert_eq!(t, make_topology(10, 42, &p).unwrap());
        assert_ne!(t, make_topology(10, 43, &p).unwrap());
        for (d, g) in t.distances.iter().zip(&t.mean_gains) {
            assert_relative_eq!(*g, path_loss(*d, &p).unwrap(), max_relative = 1e-12);
        }
        assert!(make_topology(0, 1, &p).is_err());
    }

    #[test]
    fn frames_are_addressable() {
        let p = SystemParams::reference(4);
        let t = make_topology(4, 9, &p).unwrap();
        let spec = EpisodeSpec::new(20, 9, t.clone()).unwrap();
        let all: Vec<_> = spec.frames().collect();
        assert_eq!(all[16], sample_frame(&t, 17, 9));
        assert_eq!(sample_frame(&t, 5, 9), sample_frame(&t, 5, 9));
        assert!(EpisodeSpec::new(0, 1, t).is_err());
    }

    #[test]
    fn topology_doc_round_trip() {
        let p = SystemParams::reference(3);
        let t = make_topology(3, 5, &p).unwrap();
        let doc = TopologyDoc::default_for(&t, 5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("topo.json");
        doc.save(&path).unwrap();
        assert_eq!(TopologyDoc::load(&path).unwrap(), doc);
    }
}
