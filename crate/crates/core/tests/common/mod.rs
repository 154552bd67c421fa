#![allow(dead_code)]

use rand::Rng;

/// Uniformly random `dim`-dimensional subspace of GF(2)^m as a reduced basis.
pub fn random_subspace(rng: &mut impl Rng, m: u32, dim: u32) -> Vec<u32> {
    let mut basis = Vec::new();
    while (basis.len() as u32) < dim {
        let v = rng.random_range(1..(1u32 << m));
        if reduce(&basis, v) != 0 {
            insert(&mut basis, v);
        }
    }
    basis
}

fn reduce(basis: &[u32], mut v: u32) -> u32 {
    for &b in basis {
        v = v.min(v ^ b);
    }
    v
}

fn insert(basis: &mut Vec<u32>, v: u32) {
    let r = reduce(basis, v);
    if r != 0 {
        basis.push(r);
        basis.sort_unstable_by(|a, b| b.cmp(a));
    }
}

/// Dimension of `U + V`.
pub fn sum_dimension(u: &[u32], v: &[u32]) -> u32 {
    let mut basis = u.to_vec();
    basis.sort_unstable_by(|a, b| b.cmp(a));
    for &x in v {
        insert(&mut basis, x);
    }
    basis.len() as u32
}

pub fn sample_index(rng: &mut impl Rng, p: &[f64]) -> u32 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &x) in p.iter().enumerate() {
        acc += x;
        if u < acc {
            return i as u32;
        }
    }
    p.len() as u32 - 1
}

/// Monte-Carlo estimates of the dimension distributions of `U ∩ V` and
/// `U + V` for independent uniformly random subspaces with dimensions drawn
/// from `p` and `q`.
pub fn subspace_oracle(rng: &mut impl Rng, m: u32, p: &[f64], q: &[f64], samples: usize) -> (Vec<f64>, Vec<f64>) {
    let mut inter = vec![0usize; m as usize + 1];
    let mut sum = vec![0usize; m as usize + 1];
    for _ in 0..samples {
        let i = sample_index(rng, p);
        let j = sample_index(rng, q);
        let u = random_subspace(rng, m, i);
        let v = random_subspace(rng, m, j);
        let s = sum_dimension(&u, &v);
        sum[s as usize] += 1;
        inter[(i + j - s) as usize] += 1;
    }
    let norm = |c: Vec<usize>| c.into_iter().map(|x| x as f64 / samples as f64).collect();
    (norm(inter), norm(sum))
}

/// Largest deviation in units of the binomial standard error.
pub fn max_sigma_deviation(estimate: &[f64], exact: &[f64], samples: usize) -> f64 {
    estimate
        .iter()
        .zip(exact)
        .map(|(&e, &p)| {
            let sd = (p * (1.0 - p) / samples as f64).sqrt();
            if sd == 0.0 {
                if (e - p).abs() < 1e-15 { 0.0 } else { f64::INFINITY }
            } else {
                (e - p).abs() / sd
            }
        })
        .fold(0.0, f64::max)
}

pub fn random_density(rng: &mut impl Rng, m: u32) -> Vec<f64> {
    let mut p: Vec<f64> = (0..=m).map(|_| rng.random::<f64>()).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    p
}

/// Table 1 of the reference results: rows m = 1..=19, columns d_c = 3..=6.
pub const REFERENCE_THRESHOLDS: [[f64; 4]; 19] = [
    [1.0799, 3.3945, 5.9311, 8.6557],
    [0.5748, 2.3274, 4.2477, 6.3098],
    [0.3295, 1.8033, 3.4128, 5.1370],
    [0.2075, 1.5341, 2.9732, 4.5078],
    [0.1422, 1.3816, 2.7151, 4.1293],
    [0.1069, 1.2910, 2.5536, 3.8855],
    [0.0888, 1.2359, 2.4487, 3.7210],
    [0.0809, 1.2025, 2.3786, 3.6068],
    [0.0792, 1.1826, 2.3312, 3.5256],
    [0.0813, 1.1716, 2.2987, 3.4665],
    [0.0856, 1.1661, 2.2765, 3.4228],
    [0.0913, 1.1645, 2.2613, 3.3904],
    [0.0977, 1.1653, 2.2511, 3.3659],
    [0.1044, 1.1677, 2.2445, 3.3472],
    [0.1111, 1.1713, 2.2405, 3.3331],
    [0.1179, 1.1754, 2.2383, 3.3222],
    [0.1245, 1.1801, 2.2378, 3.3142],
    [0.1309, 1.1851, 2.2380, 3.3081],
    [0.1371, 1.1901, 2.2392, 3.3036],
];
