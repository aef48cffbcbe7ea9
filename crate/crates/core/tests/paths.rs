//! Distributional checks of the Brownian path machinery against textbook
//! moments.

use flocksim::analysis::{exp_martingale, ks_critical, ks_statistic, mean_se};
use flocksim::noise::NoiseIntensity;
use flocksim::paths::{bridge_sample, stochastic_integral, BrownianPath};
use flocksim::rng::path_seed;
use statrs::distribution::{ContinuousCDF, Normal};

const N: usize = 100_000;

fn endpoints(dt: f64) -> Vec<f64> {
    (0..N).map(|i| *BrownianPath::sample(1.0, dt, path_seed(1, i as u64)).unwrap().values().last().unwrap()).collect()
}

#[test]
fn endpoint_is_standard_normal() {
    let w = endpoints(0.25);
    let (m, _) = mean_se(&w);
    let var = w.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (N - 1) as f64;
    assert!(m.abs() < 0.01, "mean {m}");
    assert!((var - 1.0).abs() < 0.02, "variance {var}");
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut w = w;
    let d = ks_statistic(&mut w, |x| normal.cdf(x));
    assert!(d < ks_critical(N, 0.001), "KS {d}");
}

#[test]
fn bridge_midpoint_variance() {
    // W(1/2) | W(0)=0, W(1)=0 has variance 1/4
    let z: Vec<f64> = (0..N).map(|i| bridge_sample(i as u64, (0.0, 0.0), (1.0, 0.0), 0.5)).collect();
    let (m, _) = mean_se(&z);
    let var = z.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (N - 1) as f64;
    assert!(m.abs() < 0.01);
    assert!((var - 0.25).abs() < 0.01, "variance {var}");
}

#[test]
fn increments_are_uncorrelated() {
    let n = 20_000;
    let (mut a, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let p = BrownianPath::sample(1.0, 0.5, path_seed(2, i as u64)).unwrap();
        let v = p.values();
        a.push(v[1] - v[0]);
        b.push(v[2] - v[1]);
    }
    let (ma, _) = mean_se(&a);
    let (mb, _) = mean_se(&b);
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n as f64;
    let corr = cov / 0.5;
    assert!(corr.abs() < 3.0 / (n as f64).sqrt(), "correlation {corr}");
}

#[test]
fn refinement_preserves_the_endpoint_law() {
    // refining every interval must not change W(1), and the new midpoints
    // must have the bridge law conditional on their neighbors
    let mut mids = Vec::with_capacity(N / 10);
    for i in 0..N / 10 {
        let p = BrownianPath::sample(1.0, 1.0, path_seed(3, i as u64)).unwrap();
        let r = p.refine(0.0, 1.0, 2).unwrap();
        assert_eq!(r.values().last(), p.values().last());
        let w1 = p.values()[1];
        mids.push(r.values()[1] - 0.5 * w1);
    }
    let (m, _) = mean_se(&mids);
    let var = mids.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (mids.len() - 1) as f64;
    assert!((var - 0.25).abs() < 0.02, "variance {var}");
}

#[test]
fn refined_integral_is_consistent() {
    // Ito sums on a refined path converge to the same integral; for constant
    // intensity they are exact at every node, refined or not
    let noise = NoiseIntensity::constant(0.7).unwrap();
    let p = BrownianPath::sample(2.0, 0.1, 11).unwrap();
    let r = p.refine(p.times()[3], p.times()[4], 8).unwrap();
    let a = stochastic_integral(&p, &noise);
    let b = stochastic_integral(&r, &noise);
    let last = |m: &[f64]| *m.last().unwrap();
    assert!((last(&a.m_values) - last(&b.m_values)).abs() < 1e-12);
    assert!((last(&a.m_values) - 0.7 * p.values().last().unwrap()).abs() < 1e-12);

    // time-varying intensity: the refined sum moves toward the fine-grid one
    let noise = NoiseIntensity::power_decay(1.0, 0.75).unwrap();
    let fine = BrownianPath::sample(1.0, 1e-4, 12).unwrap();
    let coarse = fine.coarsen(100);
    let exact = last(&stochastic_integral(&fine, &noise).m_values);
    let rough = last(&stochastic_integral(&coarse, &noise).m_values);
    assert!((exact - rough).abs() < 0.05, "{exact} vs {rough}");
}

#[test]
fn exponential_martingale_has_unit_mean() {
    let noise = NoiseIntensity::constant(0.5).unwrap();
    let e: Vec<f64> = (0..N)
        .map(|i| {
            let p = BrownianPath::sample(2.0, 1.0, path_seed(4, i as u64)).unwrap();
            exp_martingale(&stochastic_integral(&p, &noise), 2.0).unwrap()
        })
        .collect();
    let (m, se) = mean_se(&e);
    assert!((m - 1.0).abs() < 3.0 * se, "{m} +- {se}");
}
