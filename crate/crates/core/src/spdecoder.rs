//! Sum-product decoding on the pre-code's Tanner graph.
//!
//! The collected outputs are degree-one nodes hanging off the pre-code
//! variables. Messages they receive never change what they send back, so
//! they are folded once into the per-variable priors and the iterations run
//! on the pre-code graph alone. The work per iteration therefore depends
//! only on `(N, M, d_c, m)`, never on how many outputs were collected.

use crate::channel::Posterior;
use crate::fountain::OutputTriple;
use crate::gf::{Field, Symbol};
use crate::precode::{Codeword, ParityCheckCode};
use crate::transform::fwht;

pub use crate::transform::convolve;

pub const DEFAULT_MAX_ITERATIONS: usize = 200;

/// One collected channel output together with its metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectedOutput {
    pub triple: OutputTriple,
    pub posterior: Posterior,
}

/// The set `I` of collected outputs.
#[derive(Debug, Clone, Default)]
pub struct CollectedOutputs {
    entries: Vec<CollectedOutput>,
}

impl CollectedOutputs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, triple: OutputTriple, posterior: Posterior) {
        self.entries.push(CollectedOutput { triple, posterior });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CollectedOutput> {
        self.entries.iter()
    }

    /// `I_v` for every symbol `v < length`, as indices into this set.
    pub fn by_symbol(&self, length: usize) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); length];
        for (i, e) in self.entries.iter().enumerate() {
            groups[e.triple.symbol].push(i);
        }
        groups
    }
}

impl Extend<CollectedOutput> for CollectedOutputs {
    fn extend<T: IntoIterator<Item = CollectedOutput>>(&mut self, iter: T) {
        self.entries.extend(iter);
    }
}

/// Per-variable prior vectors `p_v^(0)`, stored row-major (`N × 2^m`).
#[derive(Debug, Clone, PartialEq)]
pub struct Priors {
    q: usize,
    data: Vec<f64>,
    /// Variables whose observations contradict each other (all-zero product).
    pub contradictions: Vec<usize>,
}

impl Priors {
    pub fn uniform(length: usize, q: usize) -> Self {
        Priors { q, data: vec![1.0 / q as f64; length * q], contradictions: Vec::new() }
    }

    pub fn symbol(&self, v: usize) -> &[f64] {
        &self.data[v * self.q..(v + 1) * self.q]
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.q
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn field_order(&self) -> usize {
        self.q
    }

    /// Priors that put all mass on the given word.
    pub fn certain(word: &[Symbol], q: usize) -> Self {
        let mut p = Priors { q, data: vec![0.0; word.len() * q], contradictions: Vec::new() };
        for (v, s) in word.iter().enumerate() {
            p.data[v * q + s.index()] = 1.0;
        }
        p
    }
}

/// Normalises `p` to sum 1. Returns `false` (and leaves `p` uniform) when the
/// total mass is zero or not finite.
fn normalize(p: &mut [f64]) -> bool {
    let sum: f64 = p.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        let inv = 1.0 / sum;
        p.iter_mut().for_each(|x| *x *= inv);
        true
    } else {
        let u = 1.0 / p.len() as f64;
        p.iter_mut().for_each(|x| *x = u);
        false
    }
}

/// Folds the collected outputs into `p_v^(0)(x) = ξ ∏_{i ∈ I_v} p̃_i(h_i x)`.
pub fn initialize(code: &ParityCheckCode, outputs: &CollectedOutputs) -> Priors {
    let field = code.field();
    let q = field.order();
    let m = field.degree();
    let n = code.length();
    let mut priors = Priors { q, data: vec![1.0; n * q], contradictions: Vec::new() };
    for e in outputs.iter() {
        let t = &e.triple;
        // x ↦ bit w of h·x is GF(2)-linear; its mask is read off the basis.
        let mask = (0..m).fold(0u32, |acc, j| {
            let b = (field.mul(t.coef, Symbol(1 << j)).0 >> (t.bit - 1)) & 1;
            acc | ((b as u32) << j)
        });
        let p = &mut priors.data[t.symbol * q..(t.symbol + 1) * q];
        let (q0, q1) = (e.posterior.q0, e.posterior.q1);
        let mut max = 0.0f64;
        for (x, px) in p.iter_mut().enumerate() {
            let bit = (x as u32 & mask).count_ones() & 1;
            *px *= if bit == 0 { q0 } else { q1 };
            max = max.max(*px);
        }
        if max > 0.0 && max < 1e-150 {
            let s = 1.0 / max;
            p.iter_mut().for_each(|x| *x *= s);
        }
    }
    for v in 0..n {
        if !normalize(&mut priors.data[v * q..(v + 1) * q]) {
            priors.contradictions.push(v);
        }
    }
    priors
}

/// Check-node rule for one check: for every edge `j`, relabel the other
/// incoming messages by their coefficients, XOR-convolve them, and relabel
/// the result back by `h_j⁻¹`.
///
/// `incoming` and `outgoing` hold `coefs.len()` consecutive vectors of length
/// `2^m`.
pub fn check_node_update(
    field: &Field,
    coefs: &[Symbol],
    incoming: &[f64],
    outgoing: &mut [f64],
    scratch: &mut CheckScratch,
) {
    let q = field.order();
    let d = coefs.len();
    if point_mass_update(field, coefs, incoming, outgoing) {
        return;
    }
    scratch.ensure(d, q);
    let CheckScratch { spectra, prefix, tmp } = scratch;
    for j in 0..d {
        let spec = &mut spectra[j * q..(j + 1) * q];
        field.scatter_mul(coefs[j], &incoming[j * q..(j + 1) * q], spec);
        fwht(spec);
    }
    // prefix[j] = ∏_{l<j} spectra[l]
    prefix[..q].iter_mut().for_each(|x| *x = 1.0);
    for j in 1..d {
        let (done, rest) = prefix.split_at_mut(j * q);
        let prev = &done[(j - 1) * q..];
        let spec = &spectra[(j - 1) * q..j * q];
        for ((dst, a), b) in rest[..q].iter_mut().zip(prev).zip(spec) {
            *dst = a * b;
        }
    }
    let (suffix, tmp) = tmp.split_at_mut(q);
    suffix.iter_mut().for_each(|x| *x = 1.0);
    for j in (0..d).rev() {
        let pre = &prefix[j * q..(j + 1) * q];
        for ((dst, a), b) in tmp.iter_mut().zip(pre).zip(suffix.iter()) {
            *dst = a * b;
        }
        fwht(tmp);
        let out = &mut outgoing[j * q..(j + 1) * q];
        field.gather_mul(coefs[j], tmp, out);
        out.iter_mut().for_each(|x| *x = x.max(0.0));
        normalize(out);
        let spec = &spectra[j * q..(j + 1) * q];
        suffix.iter_mut().zip(spec).for_each(|(s, t)| *s *= t);
    }
}

/// Position of the single nonzero entry, if `p` is a point mass.
fn point_mass(p: &[f64]) -> Option<usize> {
    let mut found = None;
    for (i, &x) in p.iter().enumerate() {
        if x != 0.0 {
            if found.is_some() {
                return None;
            }
            found = Some(i);
        }
    }
    found
}

/// Check-node rule when at most one incoming message is not a point mass.
/// Every output is then a relabelled copy of that message (or a point
/// mass), so no transform is needed. Returns `false` when not applicable.
fn point_mass_update(field: &Field, coefs: &[Symbol], incoming: &[f64], outgoing: &mut [f64]) -> bool {
    let q = field.order();
    let d = coefs.len();
    let mut spread = None;
    // Σ h_l a_l over the point-mass inputs.
    let mut total = Symbol::ZERO;
    for j in 0..d {
        match point_mass(&incoming[j * q..(j + 1) * q]) {
            Some(a) => total = total + field.mul(coefs[j], Symbol(a as u16)),
            None if spread.is_none() => spread = Some(j),
            None => return false,
        }
    }
    for j in 0..d {
        let out = &mut outgoing[j * q..(j + 1) * q];
        let inv = field.inv(coefs[j]).expect("nonzero coefficient");
        match spread {
            Some(l) if l != j => {
                // x_j = h_j⁻¹ (h_l x_l + s) with s the other point masses.
                let own = point_mass(&incoming[j * q..(j + 1) * q]).expect("point mass");
                let s = total + field.mul(coefs[j], Symbol(own as u16));
                let src = &incoming[l * q..(l + 1) * q];
                let hl = coefs[l];
                for (x, &p) in src.iter().enumerate() {
                    let y = field.mul(inv, field.mul(hl, Symbol(x as u16)) + s);
                    out[y.index()] = p;
                }
                normalize(out);
            }
            _ => {
                let s = match spread {
                    Some(_) => total,
                    None => {
                        let own = point_mass(&incoming[j * q..(j + 1) * q]).expect("point mass");
                        total + field.mul(coefs[j], Symbol(own as u16))
                    }
                };
                out.iter_mut().for_each(|x| *x = 0.0);
                out[field.mul(inv, s).index()] = 1.0;
            }
        }
    }
    true
}

/// Reusable buffers for [`check_node_update`].
#[derive(Debug, Default, Clone)]
pub struct CheckScratch {
    spectra: Vec<f64>,
    prefix: Vec<f64>,
    tmp: Vec<f64>,
}

impl CheckScratch {
    fn ensure(&mut self, d: usize, q: usize) {
        if self.spectra.len() != d * q || self.tmp.len() != 2 * q {
            self.spectra = vec![0.0; d * q];
            self.prefix = vec![0.0; d * q];
            self.tmp = vec![0.0; 2 * q];
        }
    }
}

/// Check-node rule on owned vectors, one per incident edge.
pub fn check_to_variable(field: &Field, coefs: &[Symbol], incoming: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let q = field.order();
    let flat: Vec<f64> = incoming.iter().flat_map(|v| v.iter().copied()).collect();
    let mut out = vec![0.0; flat.len()];
    check_node_update(field, coefs, &flat, &mut out, &mut CheckScratch::default());
    out.chunks(q).map(<[f64]>::to_vec).collect()
}

/// `out = normalize(prior ⊙ ∏_{l ≠ skip} inputs[l])`; `false` on zero mass.
fn product_except(prior: &[f64], inputs: &[&[f64]], skip: Option<usize>, out: &mut [f64]) -> bool {
    out.copy_from_slice(prior);
    for (l, input) in inputs.iter().enumerate() {
        if Some(l) != skip {
            out.iter_mut().zip(input.iter()).for_each(|(o, x)| *o *= x);
        }
    }
    normalize(out)
}

/// Variable-node rule: the message to each neighbour is the prior times the
/// messages from all other neighbours. The flag reports a zero normaliser on
/// some edge (that edge's message is then uniform).
pub fn variable_to_check(prior: &[f64], incoming: &[Vec<f64>]) -> (Vec<Vec<f64>>, bool) {
    let inputs: Vec<&[f64]> = incoming.iter().map(Vec::as_slice).collect();
    let mut contradiction = false;
    let out = (0..incoming.len())
        .map(|j| {
            let mut o = vec![0.0; prior.len()];
            contradiction |= !product_except(prior, &inputs, Some(j), &mut o);
            o
        })
        .collect();
    (out, contradiction)
}

/// Index of the largest entry; ties go to the smallest index.
fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in p.iter().enumerate().skip(1) {
        if x > p[best] {
            best = i;
        }
    }
    best
}

/// Tentative decision from priors and all incoming check messages of every
/// variable. Returns the candidate word and whether it is a codeword.
pub fn tentative_decision(
    code: &ParityCheckCode,
    priors: &Priors,
    check_messages: &[Vec<Vec<f64>>],
) -> (Codeword, bool) {
    let q = priors.field_order();
    let mut buf = vec![0.0; q];
    let word: Vec<Symbol> = (0..code.length())
        .map(|v| {
            let inputs: Vec<&[f64]> = check_messages[v].iter().map(Vec::as_slice).collect();
            product_except(priors.symbol(v), &inputs, None, &mut buf);
            Symbol(argmax(&buf) as u16)
        })
        .collect();
    let ok = code.is_codeword(&word);
    (Codeword(word), ok)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureReason {
    NoOutputs,
    Contradiction,
    /// Messages stopped changing; further iterations cannot help.
    FixedPoint,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeStatus {
    Success,
    Failure(FailureReason),
}

/// Work done in one iteration. The `*_to_*` counts are the messages the
/// schedule updates (every edge, both directions); the `*_evaluated` counts
/// are the nodes actually recomputed, fewer when unchanged inputs are
/// skipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IterationWork {
    pub check_to_variable: u64,
    pub variable_to_check: u64,
    pub checks_evaluated: u64,
    pub variables_evaluated: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub status: DecodeStatus,
    /// Last tentative decision (the decoded codeword on success).
    pub estimate: Codeword,
    pub iterations: usize,
    pub work: Vec<IterationWork>,
}

impl DecodeResult {
    pub fn is_success(&self) -> bool {
        self.status == DecodeStatus::Success
    }

    pub fn codeword(&self) -> Option<&Codeword> {
        self.is_success().then_some(&self.estimate)
    }

    fn failure(reason: FailureReason, n: usize) -> Self {
        DecodeResult {
            status: DecodeStatus::Failure(reason),
            estimate: Codeword(vec![Symbol::ZERO; n]),
            iterations: 0,
            work: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderOptions {
    /// Reuse a node's previous outputs when none of its inputs changed.
    /// Results are bitwise identical either way.
    pub skip_unchanged: bool,
}

impl Default for DecoderOptions {
    fn default() -> Self {
        DecoderOptions { skip_unchanged: true }
    }
}

/// Sum-product decoder bound to one pre-code; buffers are reused across calls.
pub struct SpDecoder<'a> {
    code: &'a ParityCheckCode,
    q: usize,
    options: DecoderOptions,
    /// Edges in check order: `row_ptr[c]..row_ptr[c + 1]` belong to check `c`.
    row_ptr: Vec<usize>,
    edge_var: Vec<usize>,
    edge_coef: Vec<Symbol>,
    /// Edges incident to each variable.
    var_edges: Vec<Vec<usize>>,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    v2c_changed: Vec<bool>,
    c2v_changed: Vec<bool>,
    row_out: Vec<f64>,
    scratch: CheckScratch,
}

impl<'a> SpDecoder<'a> {
    pub fn new(code: &'a ParityCheckCode) -> Self {
        Self::with_options(code, DecoderOptions::default())
    }

    pub fn with_options(code: &'a ParityCheckCode, options: DecoderOptions) -> Self {
        let q = code.field().order();
        let mut row_ptr = vec![0];
        let mut edge_var = Vec::with_capacity(code.edge_count());
        let mut edge_coef = Vec::with_capacity(code.edge_count());
        let mut var_edges = vec![Vec::with_capacity(2); code.length()];
        for row in code.rows() {
            for e in row {
                var_edges[e.col].push(edge_var.len());
                edge_var.push(e.col);
                edge_coef.push(e.coef);
            }
            row_ptr.push(edge_var.len());
        }
        let edges = edge_var.len();
        let max_row = code.rows().iter().map(Vec::len).max().unwrap_or(0);
        SpDecoder {
            code,
            q,
            options,
            row_ptr,
            edge_var,
            edge_coef,
            var_edges,
            v2c: vec![0.0; edges * q],
            c2v: vec![0.0; edges * q],
            v2c_changed: vec![true; edges],
            c2v_changed: vec![true; edges],
            row_out: vec![0.0; max_row * q],
            scratch: CheckScratch::default(),
        }
    }

    pub fn code(&self) -> &ParityCheckCode {
        self.code
    }

    /// Initialises from `outputs`, then runs at most `max_iter` iterations.
    pub fn decode(&mut self, outputs: &CollectedOutputs, max_iter: usize) -> DecodeResult {
        if outputs.is_empty() {
            return DecodeResult::failure(FailureReason::NoOutputs, self.code.length());
        }
        let priors = initialize(self.code, outputs);
        self.decode_priors(&priors, max_iter)
    }

    /// Runs sum-product iterations from the given priors.
    pub fn decode_priors(&mut self, priors: &Priors, max_iter: usize) -> DecodeResult {
        assert!(max_iter >= 1);
        let q = self.q;
        let n = self.code.length();
        assert_eq!(priors.len(), n);
        assert_eq!(priors.field_order(), q);
        if !priors.contradictions.is_empty() {
            return DecodeResult::failure(FailureReason::Contradiction, n);
        }

        for (e, &v) in self.edge_var.iter().enumerate() {
            self.v2c[e * q..(e + 1) * q].copy_from_slice(priors.symbol(v));
        }
        let u = 1.0 / q as f64;
        self.c2v.iter_mut().for_each(|x| *x = u);
        self.v2c_changed.iter_mut().for_each(|x| *x = true);

        let mut estimate = vec![Symbol::ZERO; n];
        let mut work = Vec::new();
        if self.decide(priors, &mut estimate, true) {
            return DecodeResult { status: DecodeStatus::Success, estimate: Codeword(estimate), iterations: 0, work };
        }

        let skip = self.options.skip_unchanged;
        let mut buf = vec![0.0; q];
        for iter in 1..=max_iter {
            let mut w = IterationWork::default();
            let skip = skip && iter > 1;

            for c in 0..self.row_ptr.len() - 1 {
                let (lo, hi) = (self.row_ptr[c], self.row_ptr[c + 1]);
                let d = hi - lo;
                w.check_to_variable += d as u64;
                if skip && !self.v2c_changed[lo..hi].iter().any(|&x| x) {
                    self.c2v_changed[lo..hi].iter_mut().for_each(|x| *x = false);
                    continue;
                }
                let out = &mut self.row_out[..d * q];
                check_node_update(
                    self.code.field(),
                    &self.edge_coef[lo..hi],
                    &self.v2c[lo * q..hi * q],
                    out,
                    &mut self.scratch,
                );
                w.checks_evaluated += 1;
                for j in 0..d {
                    let e = lo + j;
                    let dst = &mut self.c2v[e * q..(e + 1) * q];
                    let src = &out[j * q..(j + 1) * q];
                    self.c2v_changed[e] = dst != src;
                    dst.copy_from_slice(src);
                }
            }

            let mut changed = false;
            for v in 0..n {
                let edges = &self.var_edges[v];
                w.variable_to_check += edges.len() as u64;
                if skip && !edges.iter().any(|&e| self.c2v_changed[e]) {
                    edges.iter().for_each(|&e| self.v2c_changed[e] = false);
                    continue;
                }
                w.variables_evaluated += 1;
                for (j, &e) in edges.iter().enumerate() {
                    buf.copy_from_slice(priors.symbol(v));
                    for (l, &other) in edges.iter().enumerate() {
                        if l != j {
                            let msg = &self.c2v[other * q..(other + 1) * q];
                            buf.iter_mut().zip(msg).for_each(|(b, x)| *b *= x);
                        }
                    }
                    normalize(&mut buf);
                    let dst = &mut self.v2c[e * q..(e + 1) * q];
                    let differs = dst != buf.as_slice();
                    self.v2c_changed[e] = differs;
                    changed |= differs;
                    dst.copy_from_slice(&buf);
                }
            }
            work.push(w);

            if self.decide(priors, &mut estimate, !skip) {
                return DecodeResult {
                    status: DecodeStatus::Success,
                    estimate: Codeword(estimate),
                    iterations: iter,
                    work,
                };
            }
            if !changed {
                return DecodeResult {
                    status: DecodeStatus::Failure(FailureReason::FixedPoint),
                    estimate: Codeword(estimate),
                    iterations: iter,
                    work,
                };
            }
        }
        DecodeResult {
            status: DecodeStatus::Failure(FailureReason::MaxIterations),
            estimate: Codeword(estimate),
            iterations: max_iter,
            work,
        }
    }

    /// Tentative decision from the current check messages. With `all` unset,
    /// only variables with a changed incoming message are re-evaluated.
    fn decide(&self, priors: &Priors, estimate: &mut [Symbol], all: bool) -> bool {
        let q = self.q;
        let mut buf = vec![0.0; q];
        for (v, edges) in self.var_edges.iter().enumerate() {
            if !all && !edges.iter().any(|&e| self.c2v_changed[e]) {
                continue;
            }
            buf.copy_from_slice(priors.symbol(v));
            for &e in edges {
                let msg = &self.c2v[e * q..(e + 1) * q];
                buf.iter_mut().zip(msg).for_each(|(b, x)| *b *= x);
            }
            estimate[v] = Symbol(argmax(&buf) as u16);
        }
        self.code.is_codeword(estimate)
    }
}
