//! Density evolution on the erasure channel for the `(2, d_c)` ensemble.
//!
//! A message is tracked only through the dimension of the linear subspace
//! of GF(2)^m that carries its support. A density `P = (P_0, …, P_m)` gives
//! the probability of each dimension. Variable nodes intersect subspaces
//! (`⊡`), check nodes sum them (`⊠`), in both cases under uniformly random
//! relabelling:
//!
//! ```text
//! [P ⊡ Q]_k = Σ_{i=k}^{m} Σ_{j=k}^{k+m−i} P_i Q_j 2^{(i−k)(j−k)} [i,k][m−i,j−k] / [m,j]
//! [P ⊠ Q]_k = Σ_{i=0}^{k} Σ_{j=k−i}^{k}   P_i Q_j 2^{(k−i)(k−j)} [m−i,m−k][i,k−j] / [m,m−j]
//! ```
//!
//! with `[a,b]` the Gaussian binomial at base 2.

use rayon::prelude::*;
use thiserror::Error;

pub const MAX_DEGREE: u32 = 19;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeError {
    #[error("Gaussian binomial [{m},{k}] is out of range")]
    BinomialRange { m: u32, k: u32 },
    #[error("extension degree {0} is outside 1..={MAX_DEGREE}")]
    Degree(u32),
    #[error("check degree {0} must be at least 3")]
    CheckDegree(usize),
    #[error("density has length {got}, expected {expected}")]
    DensityLength { got: usize, expected: usize },
    #[error("density entries must be non-negative and sum to 1")]
    NotADensity,
    #[error("threshold is not bracketed by [{lo}, {hi}]: both ends {verdict}")]
    NotBracketed { lo: f64, hi: f64, verdict: &'static str },
    #[error("overhead {0} must be finite and non-negative")]
    Overhead(f64),
}

/// `log2` of the Gaussian binomial `[m, k]` at base 2.
pub fn gaussian_binomial_log2(m: u32, k: u32) -> Result<f64, DeError> {
    if k > m || m > 62 {
        return Err(DeError::BinomialRange { m, k });
    }
    // (2^m − 2^l)/(2^k − 2^l) = (2^{m−l} − 1)/(2^{k−l} − 1); both are exact in f64.
    Ok((0..k)
        .map(|l| (((1u64 << (m - l)) - 1) as f64).log2() - (((1u64 << (k - l)) - 1) as f64).log2())
        .sum())
}

/// Distribution of the support dimension, indexed `0..=m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Density(Vec<f64>);

impl Density {
    pub fn new(p: Vec<f64>) -> Result<Self, DeError> {
        let sum: f64 = p.iter().sum();
        if p.is_empty() || p.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-10 {
            return Err(DeError::NotADensity);
        }
        Ok(Density(p))
    }

    /// All mass on dimension `dim`.
    pub fn point(m: u32, dim: u32) -> Self {
        assert!(dim <= m);
        let mut p = vec![0.0; m as usize + 1];
        p[dim as usize] = 1.0;
        Density(p)
    }

    pub fn degree(&self) -> u32 {
        self.0.len() as u32 - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Probability that the symbol is resolved.
    pub fn p0(&self) -> f64 {
        self.0[0]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    fn renormalize(mut self) -> Self {
        let s = self.total();
        if s > 0.0 {
            self.0.iter_mut().for_each(|x| *x /= s);
        }
        self
    }
}

#[derive(Debug, Clone, Copy)]
struct Term {
    k: u8,
    i: u8,
    j: u8,
    c: f64,
}

/// Both operator coefficient tables for one `m`, as sparse term lists.
#[derive(Debug, Clone)]
pub struct CoefficientTensors {
    m: u32,
    intersect: Vec<Term>,
    sum: Vec<Term>,
}

impl CoefficientTensors {
    pub fn new(m: u32) -> Result<Self, DeError> {
        if !(1..=MAX_DEGREE).contains(&m) {
            return Err(DeError::Degree(m));
        }
        let g = |a: u32, b: u32| gaussian_binomial_log2(a, b).expect("indices in range");
        let mut intersect = Vec::new();
        let mut sum = Vec::new();
        for k in 0..=m {
            for i in k..=m {
                for j in k..=k + m - i {
                    let e = ((i - k) * (j - k)) as f64 + g(i, k) + g(m - i, j - k) - g(m, j);
                    intersect.push(Term { k: k as u8, i: i as u8, j: j as u8, c: e.exp2() });
                }
            }
            for i in 0..=k {
                for j in k - i..=k {
                    let e = ((k - i) * (k - j)) as f64 + g(m - i, m - k) + g(i, k - j) - g(m, m - j);
                    sum.push(Term { k: k as u8, i: i as u8, j: j as u8, c: e.exp2() });
                }
            }
        }
        Ok(CoefficientTensors { m, intersect, sum })
    }

    pub fn degree(&self) -> u32 {
        self.m
    }

    /// `C_⊡(k, i, j)`, zero outside the valid range.
    pub fn intersect_coef(&self, k: u32, i: u32, j: u32) -> f64 {
        lookup(&self.intersect, k, i, j)
    }

    /// `C_⊠(k, i, j)`, zero outside the valid range.
    pub fn sum_coef(&self, k: u32, i: u32, j: u32) -> f64 {
        lookup(&self.sum, k, i, j)
    }

    /// `max_{i,j} |Σ_k C(k,i,j) − 1|` for both tables.
    pub fn row_sum_errors(&self) -> (f64, f64) {
        let worst = |terms: &[Term]| {
            let n = self.m as usize + 1;
            let mut sums = vec![0.0; n * n];
            for t in terms {
                sums[t.i as usize * n + t.j as usize] += t.c;
            }
            sums.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
        };
        (worst(&self.intersect), worst(&self.sum))
    }

    pub fn coefficients_in_unit_interval(&self) -> bool {
        self.intersect.iter().chain(&self.sum).all(|t| (0.0..=1.0 + 1e-12).contains(&t.c))
    }

    fn apply(&self, terms: &[Term], p: &Density, q: &Density) -> Density {
        assert_eq!(p.degree(), self.m);
        assert_eq!(q.degree(), self.m);
        let mut r = vec![0.0; self.m as usize + 1];
        for t in terms {
            r[t.k as usize] += t.c * p.0[t.i as usize] * q.0[t.j as usize];
        }
        Density(r).renormalize()
    }

    /// Variable-node operator (subspace intersection).
    pub fn boxdot(&self, p: &Density, q: &Density) -> Density {
        self.apply(&self.intersect, p, q)
    }

    /// Check-node operator (subspace sum).
    pub fn boxtimes(&self, p: &Density, q: &Density) -> Density {
        self.apply(&self.sum, p, q)
    }
}

fn lookup(terms: &[Term], k: u32, i: u32, j: u32) -> f64 {
    terms
        .iter()
        .find(|t| (t.k as u32, t.i as u32, t.j as u32) == (k, i, j))
        .map_or(0.0, |t| t.c)
}

/// How the mean number of observations per variable scales with `m` and `d_c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadNormalization {
    /// `β = (1+ε)·m/d_c`.
    #[default]
    CheckDegree,
    /// `β = (1+ε)·m·(d_c−2)/d_c`, i.e. `n/N` at capacity 1.
    DesignRate,
}

impl LoadNormalization {
    pub fn beta(self, epsilon: f64, m: u32, dc: usize) -> f64 {
        let base = (1.0 + epsilon) * m as f64 / dc as f64;
        match self {
            LoadNormalization::CheckDegree => base,
            LoadNormalization::DesignRate => base * (dc as f64 - 2.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeParams {
    /// Success once `1 − P_0` drops below this.
    pub delta: f64,
    pub max_iterations: usize,
    /// Failure once no entry moves by more than this in one iteration.
    pub stall: f64,
    pub bisection_tolerance: f64,
    pub poisson_tail: f64,
    pub epsilon_max: f64,
    pub normalization: LoadNormalization,
}

impl Default for DeParams {
    fn default() -> Self {
        DeParams {
            delta: 1e-4,
            max_iterations: 10_000,
            stall: 1e-14,
            bisection_tolerance: 1e-4,
            poisson_tail: 1e-12,
            epsilon_max: 10.0,
            normalization: LoadNormalization::CheckDegree,
        }
    }
}

/// Density seen by a variable node from a Poisson(β) number of outputs,
/// each of which leaves a hyperplane.
pub fn initial_density(
    tensors: &CoefficientTensors,
    epsilon: f64,
    dc: usize,
    params: &DeParams,
) -> Result<Density, DeError> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(DeError::Overhead(epsilon));
    }
    let beta = params.normalization.beta(epsilon, tensors.m, dc);
    Ok(poisson_mixture(tensors, beta, params.poisson_tail))
}

/// `Σ_d Poisson(d; β) · E^{⊡d}` with `E` the hyperplane point mass.
pub fn poisson_mixture(tensors: &CoefficientTensors, beta: f64, tail: f64) -> Density {
    let m = tensors.m;
    let hyperplane = Density::point(m, m - 1);
    let mut power = Density::point(m, m);
    let mut acc = vec![0.0; m as usize + 1];
    let mut weight = (-beta).exp();
    let mut mass = 0.0;
    let mut d = 0u32;
    loop {
        for (a, p) in acc.iter_mut().zip(&power.0) {
            *a += weight * p;
        }
        mass += weight;
        if 1.0 - mass < tail && d as f64 > beta {
            break;
        }
        // Once every term is fully resolved the tail contributes only δ_0.
        if power.p0() == 1.0 {
            acc[0] += 1.0 - mass;
            break;
        }
        d += 1;
        weight *= beta / d as f64;
        power = tensors.boxdot(&power, &hyperplane);
    }
    Density(acc).renormalize()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub converged: bool,
    pub iterations: usize,
    /// `P_0` after each iteration.
    pub p0_history: Vec<f64>,
    pub last: Density,
}

/// Runs `Q = P^{⊠(d_c−1)}`, `P' = P^(0) ⊡ Q` until success, stall or the cap.
pub fn evolve(tensors: &CoefficientTensors, p_init: &Density, dc: usize, params: &DeParams) -> Evolution {
    let mut p = p_init.clone();
    let mut history = Vec::new();
    for l in 1..=params.max_iterations {
        let mut q = p.clone();
        for _ in 0..dc - 2 {
            q = tensors.boxtimes(&q, &p);
        }
        let next = tensors.boxdot(p_init, &q);
        history.push(next.p0());
        if 1.0 - next.p0() < params.delta {
            return Evolution { converged: true, iterations: l, p0_history: history, last: next };
        }
        let moved = next.0.iter().zip(&p.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = next;
        if moved < params.stall {
            return Evolution { converged: false, iterations: l, p0_history: history, last: p };
        }
    }
    Evolution { converged: false, iterations: params.max_iterations, p0_history: history, last: p }
}

/// Whether density evolution succeeds at overhead `epsilon`.
pub fn succeeds(tensors: &CoefficientTensors, epsilon: f64, dc: usize, params: &DeParams) -> Result<bool, DeError> {
    let p0 = initial_density(tensors, epsilon, dc, params)?;
    Ok(evolve(tensors, &p0, dc, params).converged)
}

/// Smallest overhead at which density evolution succeeds, by bisection on
/// `[0, epsilon_max]`. Returns the midpoint of the final bracket.
pub fn threshold(m: u32, dc: usize, params: &DeParams) -> Result<f64, DeError> {
    let tensors = CoefficientTensors::new(m)?;
    threshold_with(&tensors, dc, params)
}

pub fn threshold_with(tensors: &CoefficientTensors, dc: usize, params: &DeParams) -> Result<f64, DeError> {
    if dc < 3 {
        return Err(DeError::CheckDegree(dc));
    }
    let (mut lo, mut hi) = (0.0, params.epsilon_max);
    if succeeds(tensors, lo, dc, params)? {
        return Err(DeError::NotBracketed { lo, hi, verdict: "succeed" });
    }
    if !succeeds(tensors, hi, dc, params)? {
        return Err(DeError::NotBracketed { lo, hi, verdict: "fail" });
    }
    while hi - lo > params.bisection_tolerance {
        let mid = 0.5 * (lo + hi);
        if succeeds(tensors, mid, dc, params)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableEntry {
    pub m: u32,
    pub dc: usize,
    pub epsilon_star: f64,
}

/// Thresholds for every `(m, d_c)` pair, ordered by `m` then `d_c`.
pub fn table(ms: &[u32], dcs: &[usize], params: &DeParams) -> Result<Vec<TableEntry>, DeError> {
    let cells: Vec<(u32, usize)> = ms.iter().flat_map(|&m| dcs.iter().map(move |&dc| (m, dc))).collect();
    cells
        .into_par_iter()
        .map(|(m, dc)| Ok(TableEntry { m, dc, epsilon_star: threshold(m, dc, params)? }))
        .collect()
}

pub const TABLE_HEADER: &str = "m,dc,epsilon_star";

pub fn table_csv(entries: &[TableEntry]) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for e in entries {
        out.push_str(&format!("{},{},{:.4}\n", e.m, e.dc, e.epsilon_star));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gaussian_binomial_examples() {
        assert_eq!(gaussian_binomial_log2(5, 0).unwrap(), 0.0);
        assert!((gaussian_binomial_log2(2, 1).unwrap() - 3f64.log2()).abs() < 1e-15);
        assert!((gaussian_binomial_log2(4, 2).unwrap() - 35f64.log2()).abs() < 1e-14);
        assert!((gaussian_binomial_log2(7, 7).unwrap()).abs() < 1e-15);
        assert!(gaussian_binomial_log2(3, 4).is_err());
    }

    #[test]
    fn gaussian_binomial_matches_integer_recurrence() {
        // [m,k] = [m−1,k−1] + 2^k [m−1,k], exact in u128 up to m = 19.
        let mut table = vec![vec![0u128; 20]; 20];
        for m in 0..20 {
            table[m][0] = 1;
            for k in 1..=m {
                table[m][k] = table[m - 1][k - 1] + (1u128 << k) * table[m - 1][k];
            }
        }
        for m in 0..20u32 {
            for k in 0..=m {
                let want = (table[m as usize][k as usize] as f64).log2();
                let got = gaussian_binomial_log2(m, k).unwrap();
                assert!((got - want).abs() <= 1e-12 * want.max(1.0), "[{m},{k}]");
            }
        }
    }

    #[test]
    fn identity_and_absorbing_elements() {
        for m in [1, 3, 8, 19] {
            let t = CoefficientTensors::new(m).unwrap();
            let full = Density::point(m, m);
            let zero = Density::point(m, 0);
            for dim in 0..=m {
                let p = Density::point(m, dim);
                assert_eq!(t.boxdot(&p, &full), p);
                assert_eq!(t.boxtimes(&p, &zero), p);
                assert_eq!(t.boxdot(&zero, &p), zero);
                assert_eq!(t.boxtimes(&full, &p), full);
            }
            for k in 0..=m {
                assert_eq!(t.intersect_coef(k, k, m), 1.0);
                assert_eq!(t.sum_coef(k, k, 0), 1.0);
            }
        }
    }

    #[test]
    fn row_sums_and_ranges() {
        for m in 1..=MAX_DEGREE {
            let t = CoefficientTensors::new(m).unwrap();
            let (a, b) = t.row_sum_errors();
            assert!(a < 1e-10 && b < 1e-10, "m={m}: {a} {b}");
            assert!(t.coefficients_in_unit_interval());
        }
    }

    #[test]
    fn two_hyperplanes_in_three_space() {
        // Two random planes in GF(2)^3 coincide with probability 1/7.
        let t = CoefficientTensors::new(3).unwrap();
        let e = Density::point(3, 2);
        let r = t.boxdot(&e, &e);
        assert!((r.as_slice()[2] - 1.0 / 7.0).abs() < 1e-15);
        assert!((r.as_slice()[1] - 6.0 / 7.0).abs() < 1e-15);
        // Two random lines span a plane unless equal.
        let l = Density::point(3, 1);
        let s = t.boxtimes(&l, &l);
        assert!((s.as_slice()[1] - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn binary_initial_density_closed_form() {
        let t = CoefficientTensors::new(1).unwrap();
        let params = DeParams::default();
        for eps in [0.0, 0.3, 1.0, 2.5] {
            let p = initial_density(&t, eps, 3, &params).unwrap();
            let beta = (1.0 + eps) / 3.0;
            assert!((p.p0() - (1.0 - (-beta).exp())).abs() < 1e-12);
        }
    }

    #[test]
    fn initial_density_without_outputs() {
        let t = CoefficientTensors::new(4).unwrap();
        let p = poisson_mixture(&t, 0.0, 1e-12);
        assert_eq!(p, Density::point(4, 4));
    }

    #[test]
    fn initial_density_normalized() {
        let params = DeParams::default();
        for m in [1, 2, 5, 8, 13, 19] {
            let t = CoefficientTensors::new(m).unwrap();
            for eps in [0.0, 0.1, 0.5, 1.0, 4.0, 10.0] {
                let p = initial_density(&t, eps, 3, &params).unwrap();
                assert!((p.total() - 1.0).abs() < 1e-10);
                assert!(p.as_slice().iter().all(|&x| x >= 0.0));
            }
        }
    }

    #[test]
    fn evolve_trivial_cases() {
        let params = DeParams::default();
        let t = CoefficientTensors::new(3).unwrap();
        let r = evolve(&t, &Density::point(3, 0), 3, &params);
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        let r = evolve(&t, &Density::point(3, 3), 3, &params);
        assert!(!r.converged);
    }

    #[test]
    fn binary_bracket() {
        let params = DeParams::default();
        let t = CoefficientTensors::new(1).unwrap();
        assert!(succeeds(&t, 1.2, 3, &params).unwrap());
        assert!(!succeeds(&t, 1.0, 3, &params).unwrap());
    }

    #[test]
    fn p0_non_decreasing() {
        let params = DeParams::default();
        for (m, dc) in [(1, 3), (3, 4), (8, 3), (12, 5)] {
            let t = CoefficientTensors::new(m).unwrap();
            for eps in [0.0, 0.05, 0.2, 1.0, 3.0] {
                let p = initial_density(&t, eps, dc, &params).unwrap();
                let r = evolve(&t, &p, dc, &params);
                let mut prev = p.p0();
                for &x in &r.p0_history {
                    assert!(x >= prev - 1e-12, "m={m} dc={dc} eps={eps}");
                    prev = x;
                }
            }
        }
    }

    #[test]
    fn binary_thresholds_match_scalar_recursion() {
        // For m = 1 a message is erased with probability x and
        // x' = e^{−β}·(1 − (1 − x)^{d_c−1}).
        let params = DeParams::default();
        for dc in 3..=6usize {
            let ok = |eps: f64| {
                let e = (-(1.0 + eps) / dc as f64).exp();
                let mut x = e;
                for _ in 0..params.max_iterations {
                    x = e * (1.0 - (1.0 - x).powi(dc as i32 - 1));
                    if x < params.delta {
                        return true;
                    }
                }
                false
            };
            let (mut lo, mut hi) = (0.0, 10.0);
            while hi - lo > 1e-6 {
                let mid = 0.5 * (lo + hi);
                if ok(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let got = threshold(1, dc, &params).unwrap();
            assert!((got - lo).abs() < 1e-4, "dc={dc}: {got} vs {lo}");
        }
    }

    #[test]
    fn bracket_failure_reported() {
        let params = DeParams { epsilon_max: 0.5, ..DeParams::default() };
        assert!(matches!(threshold(1, 3, &params), Err(DeError::NotBracketed { .. })));
    }

    #[test]
    fn csv_layout() {
        let csv = table_csv(&[TableEntry { m: 2, dc: 3, epsilon_star: 0.574_71 }]);
        assert_eq!(csv, "m,dc,epsilon_star\n2,3,0.5747\n");
    }

    fn density(m: u32) -> impl Strategy<Value = Density> {
        prop::collection::vec(0.0f64..1.0, m as usize + 1).prop_filter_map("zero mass", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-6).then(|| Density(v.iter().map(|x| x / s).collect()))
        })
    }

    proptest! {
        #[test]
        fn operators_closed_and_commutative((p, q) in (1u32..=10).prop_flat_map(|m| (density(m), density(m)))) {
            let t = CoefficientTensors::new(p.degree()).unwrap();
            for (a, b) in [(t.boxdot(&p, &q), t.boxdot(&q, &p)), (t.boxtimes(&p, &q), t.boxtimes(&q, &p))] {
                prop_assert!((a.total() - 1.0).abs() < 1e-10);
                prop_assert!(a.as_slice().iter().all(|&x| x >= 0.0));
                for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }
}
