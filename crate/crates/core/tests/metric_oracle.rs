//! Metrics against direct-summation oracles written independently of the
//! confusion-matrix implementation.

use barec_core::metrics::{ConfusionMatrix, MetricReport};
use barec_core::{Level, LevelScheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn oracle_accuracy(a: &[u8], b: &[u8]) -> f64 {
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
}

fn oracle_adjacent(a: &[u8], b: &[u8]) -> f64 {
    a.iter().zip(b).filter(|(x, y)| x.abs_diff(**y) <= 1).count() as f64 / a.len() as f64
}

fn oracle_distance(a: &[u8], b: &[u8]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.abs_diff(*y) as f64).sum::<f64>() / a.len() as f64
}

/// `1 − N·Σ(a_n−b_n)² / Σ_m Σ_n (a_m−b_n)²`; `None` when the double sum is 0.
fn oracle_qwk(a: &[u8], b: &[u8]) -> Option<f64> {
    let sq = |x: u8, y: u8| (x as f64 - y as f64).powi(2);
    let n = a.len() as f64;
    let observed: f64 = a.iter().zip(b).map(|(x, y)| sq(*x, *y)).sum();
    let expected: f64 = a.iter().map(|x| b.iter().map(|y| sq(*x, *y)).sum::<f64>()).sum();
    (expected != 0.0).then(|| 1.0 - n * observed / expected)
}

fn random_pair(rng: &mut ChaCha8Rng, k: u8) -> (Vec<u8>, Vec<u8>) {
    let len = rng.gen_range(1..=50);
    let a: Vec<u8> = (0..len).map(|_| rng.gen_range(1..=k)).collect();
    // Correlated hypothesis so kappa is not always near zero.
    let b: Vec<u8> = a
        .iter()
        .map(|&x| {
            if rng.gen_bool(0.5) {
                x
            } else {
                rng.gen_range(1..=k)
            }
        })
        .collect();
    (a, b)
}

#[test]
fn matrix_metrics_match_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked_qwk = 0;
    for i in 0..400 {
        let k = [3u8, 5, 7, 19][i % 4];
        let (a, b) = random_pair(&mut rng, k);
        let m = ConfusionMatrix::from_labels(&a, &b, k).unwrap();
        assert!((m.accuracy() - oracle_accuracy(&a, &b)).abs() < 1e-9);
        assert!((m.adjacent_accuracy() - oracle_adjacent(&a, &b)).abs() < 1e-9);
        assert!((m.mean_distance() - oracle_distance(&a, &b)).abs() < 1e-9);
        let q = m.qwk();
        match oracle_qwk(&a, &b) {
            Some(expected) => {
                assert!(!q.degenerate);
                assert!((q.value - expected).abs() < 1e-9, "{a:?} {b:?}");
                checked_qwk += 1;
            }
            None => assert!(q.degenerate),
        }
    }
    assert!(checked_qwk >= 200);
}

#[test]
fn two_label_kappa_is_cohens_kappa() {
    // With K = 2 every off-diagonal weight is 1, so QWK reduces to
    // Cohen's kappa: (p_o − p_e) / (1 − p_e).
    let a = [1, 1, 2, 2, 2, 1, 2, 1, 1, 2];
    let b = [1, 2, 2, 2, 1, 1, 2, 1, 2, 2];
    let m = ConfusionMatrix::from_labels(&a, &b, 2).unwrap();
    let n = a.len() as f64;
    let p_o = oracle_accuracy(&a, &b);
    let ra = a.iter().filter(|&&x| x == 1).count() as f64 / n;
    let rb = b.iter().filter(|&&x| x == 1).count() as f64 / n;
    let p_e = ra * rb + (1.0 - ra) * (1.0 - rb);
    assert!((m.qwk().value - (p_o - p_e) / (1.0 - p_e)).abs() < 1e-12);
}

#[test]
fn report_matches_oracles_on_levels() {
    let scheme = LevelScheme::shipped();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let (a, b) = random_pair(&mut rng, 19);
        let la: Vec<Level> = a.iter().map(|&x| Level::new(x).unwrap()).collect();
        let lb: Vec<Level> = b.iter().map(|&x| Level::new(x).unwrap()).collect();
        let r = MetricReport::compute(&la, &lb, &scheme).unwrap();
        assert!((r.acc19 - oracle_accuracy(&a, &b)).abs() < 1e-9);
        assert!((r.distance - oracle_distance(&a, &b)).abs() < 1e-9);
        assert!((r.distance_relative - oracle_distance(&a, &b) / 19.0).abs() < 1e-9);
        if let Some(q) = oracle_qwk(&a, &b) {
            assert!((r.qwk - q).abs() < 1e-9);
        }
    }
}
