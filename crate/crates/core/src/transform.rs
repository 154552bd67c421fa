//! Walsh–Hadamard transform over the additive group of GF(2^m).
//!
//! The transform diagonalises convolution over `(Z/2)^m`:
//! `(p ⊗ r)(x) = Σ_{y ⊕ z = x} p(y) r(z)` becomes a pointwise product.

/// In-place unnormalised Walsh–Hadamard transform. `data.len()` must be a
/// power of two. Applying it twice multiplies every entry by `data.len()`.
pub fn fwht(data: &mut [f64]) {
    let n = data.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in data.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// XOR-convolution of two vectors of equal power-of-two length in
/// `O(q log q)` time.
pub fn convolve(p1: &[f64], p2: &[f64]) -> Vec<f64> {
    assert_eq!(p1.len(), p2.len());
    let q = p1.len();
    let mut a = p1.to_vec();
    let mut b = p2.to_vec();
    fwht(&mut a);
    fwht(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    fwht(&mut a);
    let scale = 1.0 / q as f64;
    for x in a.iter_mut() {
        *x *= scale;
    }
    a
}
