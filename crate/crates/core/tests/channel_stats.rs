use droo_core::channel::{path_loss, DISTANCE_RANGE};
use droo_core::{make_topology, sample_frame, SystemParams};

const FRAMES: u64 = 100_000;

#[test]
fn fading_has_unit_mean_and_exponential_median() {
    let p = SystemParams::reference(10);
    let topo = make_topology(10, 42, &p).unwrap();
    let mut sums = [0.0; 10];
    let mut alphas: Vec<Vec<f64>> = (0..10).map(|_| Vec::with_capacity(FRAMES as usize)).collect();
    for t in 1..=FRAMES {
        let f = sample_frame(&topo, t, 42);
        for i in 0..10 {
            sums[i] += f.h[i];
            alphas[i].push(f.h[i] / topo.mean_gains[i]);
        }
    }
    for i in 0..10 {
        let mean = sums[i] / FRAMES as f64;
        assert!((mean / topo.mean_gains[i] - 1.0).abs() < 0.02, "device {i}: {mean}");
        let a = &mut alphas[i];
        a.sort_by(f64::total_cmp);
        let median = a[a.len() / 2];
        assert!((median / std::f64::consts::LN_2 - 1.0).abs() < 0.02, "median {median}");
        // Upper quartile of Exp(1) is ln 4.
        let q3 = a[3 * a.len() / 4];
        assert!((q3 / 4f64.ln() - 1.0).abs() < 0.02, "q3 {q3}");
    }
}

#[test]
fn consecutive_frames_are_uncorrelated() {
    let p = SystemParams::reference(3);
    let topo = make_topology(3, 7, &p).unwrap();
    let series: Vec<Vec<f64>> = (1..=10_000).map(|t| sample_frame(&topo, t, 7).h).collect();
    for i in 0..3 {
        let x: Vec<f64> = series.iter().map(|h| h[i]).collect();
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let var: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
        let cov: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
        let r = cov / var;
        // Four standard errors of a white-noise lag-1 estimate.
        assert!(r.abs() < 0.04, "device {i}: lag-1 autocorrelation {r}");
    }
    // Devices within one frame are independent too.
    let a: Vec<f64> = series.iter().map(|h| h[0]).collect();
    let b: Vec<f64> = series.iter().map(|h| h[1]).collect();
    let (ma, mb) = (a.iter().sum::<f64>() / 1e4, b.iter().sum::<f64>() / 1e4);
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    assert!((cov / (va * vb).sqrt()).abs() < 0.04);
}

#[test]
fn mean_gains_stay_between_the_range_ends() {
    let p = SystemParams::reference(50);
    let near = path_loss(DISTANCE_RANGE.0, &p).unwrap();
    let far = path_loss(DISTANCE_RANGE.1, &p).unwrap();
    for seed in 0..20 {
        let topo = make_topology(50, seed, &p).unwrap();
        assert!(topo.mean_gains.iter().all(|&g| g < near && g > far));
    }
}

#[test]
fn frames_do_not_depend_on_generation_order() {
    let p = SystemParams::reference(4);
    let topo = make_topology(4, 3, &p).unwrap();
    let forward: Vec<_> = (1..=50).map(|t| sample_frame(&topo, t, 3)).collect();
    for t in (1..=50u64).rev() {
        assert_eq!(sample_frame(&topo, t, 3), forward[t as usize - 1]);
    }
}
