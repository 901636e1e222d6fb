#![allow(dead_code)]

use hyperdelay_core::{HyperbolicSystem, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gram–Schmidt on `first` followed by random fill vectors.
pub fn orthonormal_completion(rng: &mut ChaCha8Rng, n: usize, first: Option<Vec<f64>>) -> Mat {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut pending = first;
    while cols.len() < n {
        let mut v = pending.take().unwrap_or_else(|| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        for _ in 0..2 {
            for c in &cols {
                let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(c).for_each(|(a, b)| *a -= d * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-3 {
            cols.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    let mut q = Mat::zeros(n, n);
    for (j, c) in cols.iter().enumerate() {
        for i in 0..n {
            q[(i, j)] = c[i];
        }
    }
    q
}

/// Distinct nonzero speeds in `[-3, 3]`, pairwise at least 0.1 apart.
pub fn random_speeds(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let mut s: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        s.sort_by(f64::total_cmp);
        let gaps_ok = s.windows(2).all(|w| w[1] - w[0] > 0.1);
        if gaps_ok && s.iter().all(|x| x.abs() > 0.1) {
            return s;
        }
    }
}

/// Square block with positive definite symmetric part, sometimes non-symmetric.
pub fn random_damping_block(rng: &mut ChaCha8Rng, n2: usize) -> Mat {
    let l = Mat::from_row_major(n2, n2, &(0..n2 * n2).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
    let mut d = l.matmul(&l.transpose());
    for i in 0..n2 {
        d[(i, i)] += 0.2;
    }
    if rng.gen_bool(0.3) {
        for i in 0..n2 {
            for j in (i + 1)..n2 {
                let k = rng.gen_range(-0.5..0.5);
                d[(i, j)] += k;
                d[(j, i)] -= k;
            }
        }
    }
    d
}

pub struct RandomSystem {
    pub system: HyperbolicSystem,
    pub speeds: Vec<f64>,
    /// `Some(false)` when an eigenvector was planted in the undamped block.
    pub planted_sk: Option<bool>,
}

/// `A = Q diag(λ) Qᵀ` with a random orthogonal `Q`; in roughly a third of
/// the cases one column of `Q` lives in the undamped coordinates.
pub fn random_system(seed: u64, n: usize) -> RandomSystem {
    let mut rng = rng(seed);
    let n1 = rng.gen_range(0..n);
    let speeds = random_speeds(&mut rng, n);
    let plant = n1 >= 1 && rng.gen_bool(0.35);
    let first = plant.then(|| {
        let mut v = vec![0.0_f64; n];
        for x in v.iter_mut().take(n1) {
            *x = rng.gen_range(-1.0..1.0);
        }
        if v.iter().all(|x| x.abs() < 1e-3) {
            v[0] = 1.0;
        }
        v
    });
    let q = orthonormal_completion(&mut rng, n, first);
    let a = q.matmul(&Mat::diag(&speeds)).matmul(&q.transpose());
    let a = a.symmetric_part();
    let dd = random_damping_block(&mut rng, n - n1);
    let system = HyperbolicSystem::new(n1, a, dd, None).expect("consistent dimensions");
    RandomSystem { system, speeds, planted_sk: plant.then_some(false) }
}

/// Symmetric flux with prescribed eigenvalues and a fixed orthogonal basis
/// `(1, ∓√2, 1)/2, (1, 0, −1)/√2`, damping on the last component only.
pub fn three_speed_system(speeds: [f64; 3], dd: f64) -> HyperbolicSystem {
    let r2 = 2f64.sqrt();
    let p = Mat::from_rows(&[[0.5, 1.0 / r2, 0.5], [-r2 / 2.0, 0.0, r2 / 2.0], [0.5, -1.0 / r2, 0.5]]);
    let mut sorted = speeds;
    sorted.sort_by(f64::total_cmp);
    let a = p.matmul(&Mat::diag(&sorted)).matmul(&p.transpose()).symmetric_part();
    HyperbolicSystem::new(2, a, Mat::from_rows(&[[dd]]), None).expect("consistent dimensions")
}

pub fn damped_wave() -> HyperbolicSystem {
    HyperbolicSystem::new(1, Mat::from_rows(&[[0.0, 1.0], [1.0, 0.0]]), Mat::from_rows(&[[1.0]]), None)
        .expect("consistent dimensions")
}
