//! Relaxed action to binary candidates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::OffloadAction;

/// Largest `N` for which [`knn_quantize`] enumerates the hypercube.
pub const KNN_MAX_N: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QuantizerKind {
    #[default]
    #[serde(rename = "op")]
    OrderPreserving,
    #[serde(rename = "knn")]
    Knn,
}

/// Network output, every entry in `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedAction(Vec<f64>);

impl RelaxedAction {
    pub fn new(xhat: Vec<f64>) -> Result<Self> {
        if let Some(v) = xhat.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::domain(format!("relaxed action entries must lie in (0,1), got {v}")));
        }
        Ok(RelaxedAction(xhat))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Ordered candidate list; position `k - 1` is the k-th candidate.
pub type CandidateSet = Vec<OffloadAction>;

pub fn quantize(kind: QuantizerKind, xhat: &RelaxedAction, k: usize) -> Result<CandidateSet> {
    match kind {
        QuantizerKind::OrderPreserving => order_preserving_quantize(xhat, k),
        QuantizerKind::Knn => knn_quantize(xhat, k),
    }
}

/// Order-preserving quantization.
///
/// Candidate 1 thresholds at 0.5. Candidate `m + 1` thresholds at the entry
/// with the m-th smallest distance to 0.5: entries above it become 1, entries
/// below become 0, and entries equal to it become 1 when the threshold is at
/// most 0.5 and 0 otherwise. Equal distances are ordered by device index.
pub fn order_preserving_quantize(xhat: &RelaxedAction, k: usize) -> Result<CandidateSet> {
    let n = xhat.len();
    if k < 1 || k > n + 1 {
        return Err(Error::domain(format!("order-preserving K must lie in [1, {}], got {k}", n + 1)));
    }
    let v = xhat.values();
    let mut out = Vec::with_capacity(k);
    out.push(OffloadAction::from_bools(v.iter().map(|&x| x > 0.5).collect()));
    if k == 1 {
        return Ok(out);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| (v[i] - 0.5).abs().total_cmp(&(v[j] - 0.5).abs()));
    for &pivot in order.iter().take(k - 1) {
        let thr = v[pivot];
        let bits = v
            .iter()
            .map(|&x| x > thr || (x == thr && thr <= 0.5))
            .collect();
        out.push(OffloadAction::from_bools(bits));
    }
    Ok(out)
}

fn sq_distance(v: &[f64], code: u64) -> f64 {
    let n = v.len();
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let bit = ((code >> (n - 1 - i)) & 1) as f64;
            (bit - x) * (bit - x)
        })
        .sum()
}

/// The `k` hypercube vertices closest to `xhat` in Euclidean distance,
/// nearest first. Distances equal up to rounding are ordered
/// lexicographically (device 0 first, 0 before 1).
pub fn knn_quantize(xhat: &RelaxedAction, k: usize) -> Result<CandidateSet> {
    let n = xhat.len();
    if n > KNN_MAX_N {
        return Err(Error::TooLarge { what: "KNN quantizer", n, max: KNN_MAX_N });
    }
    let total = 1u64 << n;
    if k < 1 || k as u64 > total {
        return Err(Error::domain(format!("KNN K must lie in [1, {total}], got {k}")));
    }
    let v = xhat.values();
    // Codes in increasing order are lexicographic; stable sort keeps that
    // order among exact ties.
    let mut scored: Vec<(f64, u64)> = (0..total).map(|c| (sq_distance(v, c), c)).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Merge rounding-level ties back into lexicographic order.
    let mut start = 0;
    while start < scored.len() {
        let mut end = start + 1;
        while end < scored.len()
            && scored[end].0 - scored[start].0 <= 1e-12 * scored[start].0.max(1e-300)
        {
            end += 1;
        }
        if end - start > 1 {
            scored[start..end].sort_by_key(|s| s.1);
        }
        if start >= k {
            break;
        }
        start = end;
    }
    Ok(scored
        .into_iter()
        .take(k)
        .map(|(_, c)| OffloadAction::from_index(c, n))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ra(v: &[f64]) -> RelaxedAction {
        RelaxedAction::new(v.to_vec()).unwrap()
    }

    fn as_u8(set: &CandidateSet) -> Vec<Vec<u8>> {
        set.iter().map(|a| a.to_u8()).collect()
    }

    #[test]
    fn worked_example_order_preserving() {
        let set = order_preserving_quantize(&ra(&[0.2, 0.4, 0.7, 0.9]), 4).unwrap();
        assert_eq!(
            as_u8(&set),
            vec![vec![0, 0, 1, 1], vec![0, 1, 1, 1], vec![0, 0, 0, 1], vec![1, 1, 1, 1]]
        );
    }

    #[test]
    fn worked_example_knn() {
        let set = knn_quantize(&ra(&[0.2, 0.4, 0.7, 0.9]), 4).unwrap();
        assert_eq!(
            as_u8(&set),
            vec![vec![0, 0, 1, 1], vec![0, 1, 1, 1], vec![0, 0, 0, 1], vec![0, 1, 0, 1]]
        );
    }

    #[test]
    fn below_half_rounds_to_zero() {
        let set = order_preserving_quantize(&ra(&[0.1, 0.3, 0.49]), 1).unwrap();
        assert_eq!(as_u8(&set), vec![vec![0, 0, 0]]);
    }

    #[test]
    fn full_chain_is_distinct_and_monotone() {
        let v = [0.15, 0.62, 0.48, 0.91, 0.33, 0.57];
        let set = order_preserving_quantize(&ra(&v), v.len() + 1).unwrap();
        for i in 0..set.len() {
            for j in i + 1..set.len() {
                assert_ne!(set[i], set[j]);
            }
        }
        // Every candidate is an upper set of the x-hat order.
        let mut by_value: Vec<usize> = (0..v.len()).collect();
        by_value.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        for cand in &set {
            let bits: Vec<bool> = by_value.iter().map(|&i| cand.get(i)).collect();
            assert!(bits.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn exact_half_takes_the_low_branch() {
        let set = order_preserving_quantize(&RelaxedAction(vec![0.5, 0.8]), 3).unwrap();
        assert_eq!(as_u8(&set), vec![vec![0, 1], vec![1, 1], vec![0, 0]]);
    }

    #[test]
    fn k_out_of_range() {
        let x = ra(&[0.3, 0.6]);
        assert!(order_preserving_quantize(&x, 0).is_err());
        assert!(order_preserving_quantize(&x, 4).is_err());
        assert!(knn_quantize(&x, 0).is_err());
        assert!(knn_quantize(&x, 5).is_err());
        assert!(matches!(
            knn_quantize(&ra(&[0.3; KNN_MAX_N + 1]), 1),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn knn_full_cube_matches_brute_force_sort() {
        let v = [0.35, 0.8, 0.55];
        let set = knn_quantize(&ra(&v), 8).unwrap();
        let mut all: Vec<(f64, Vec<u8>)> = (0..8u8)
            .map(|c| {
                let bits = vec![(c >> 2) & 1, (c >> 1) & 1, c & 1];
                let d: f64 = bits.iter().zip(&v).map(|(&b, &x)| (b as f64 - x).powi(2)).sum();
                (d, bits)
            })
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        assert_eq!(as_u8(&set), all.into_iter().map(|x| x.1).collect::<Vec<_>>());
    }

    #[test]
    fn relaxed_action_rejects_boundary() {
        assert!(RelaxedAction::new(vec![0.0, 0.5]).is_err());
        assert!(RelaxedAction::new(vec![0.5, 1.0]).is_err());
    }
}
