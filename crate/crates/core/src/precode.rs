//! The (2, d_c)-regular non-binary LDPC pre-code.
//!
//! Column layout: `K` information columns followed by `M` parity columns.
//! Check `c` touches parity columns `K + c` and `K + (c - 1 mod M)`, so the
//! parity part is a tail-biting zig-zag (bidiagonal plus one corner entry).
//! Every column then has weight exactly 2 and every row weight exactly
//! `d_c`. For `m >= 2` the construction keeps the parity block non-singular,
//! which is the case iff the product of its diagonal differs from the
//! product of its off-diagonal. Over GF(2) every column has weight 2, so the
//! rows always sum to zero and one check is redundant; the encoder then fixes
//! the final parity bit to zero.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::Deref;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gf::{Field, FieldError, Symbol};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodeError {
    #[error("check degree d_c = {0} must be at least 3")]
    CheckDegree(usize),
    #[error("k = {k_bits} information bits is not a positive multiple of m = {m}")]
    NotMultipleOfM { k_bits: usize, m: u32 },
    #[error("2K = {twice_k} is not divisible by d_c - 2 = {den}")]
    LengthNotIntegral { twice_k: usize, den: usize },
    #[error("M = {checks} checks cannot host {info} information columns on distinct non-adjacent check pairs")]
    TooSmall { checks: usize, info: usize },
    #[error("column placement did not converge after {0} resampling attempts")]
    RetryCapExceeded(usize),
    #[error("expected {expected} symbols, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("field degree {field} does not match code parameter m = {params}")]
    FieldMismatch { field: u32, params: u32 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid code structure: {0}")]
    Structure(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Dimensions of the pre-code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeParams {
    pub m: u32,
    pub check_degree: usize,
    pub k_bits: usize,
    pub seed: u64,
}

impl CodeParams {
    pub fn new(m: u32, check_degree: usize, k_bits: usize, seed: u64) -> Result<Self, CodeError> {
        let params = CodeParams { m, check_degree, k_bits, seed };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), CodeError> {
        if self.check_degree < 3 {
            return Err(CodeError::CheckDegree(self.check_degree));
        }
        if self.m == 0 || self.m > crate::gf::MAX_DEGREE {
            return Err(FieldError::UnsupportedDegree(self.m).into());
        }
        if self.k_bits == 0 || self.k_bits % self.m as usize != 0 {
            return Err(CodeError::NotMultipleOfM { k_bits: self.k_bits, m: self.m });
        }
        let twice_k = 2 * self.info_symbols();
        let den = self.check_degree - 2;
        if twice_k % den != 0 {
            return Err(CodeError::LengthNotIntegral { twice_k, den });
        }
        Ok(())
    }

    /// `K = k / m`
    pub fn info_symbols(&self) -> usize {
        self.k_bits / self.m as usize
    }

    /// `M = 2K / (d_c - 2)`
    pub fn checks(&self) -> usize {
        2 * self.info_symbols() / (self.check_degree - 2)
    }

    /// `N = K + M = K d_c / (d_c - 2)`
    pub fn length(&self) -> usize {
        self.info_symbols() + self.checks()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Entry {
    pub col: usize,
    pub coef: Symbol,
}

/// A codeword (or candidate word) of the pre-code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codeword(pub Vec<Symbol>);

impl Deref for Codeword {
    type Target = [Symbol];

    fn deref(&self) -> &[Symbol] {
        &self.0
    }
}

/// Sparse parity-check matrix with the zig-zag parity layout.
#[derive(Debug, Clone)]
pub struct ParityCheckCode {
    params: CodeParams,
    field: Arc<Field>,
    rows: Vec<Vec<Entry>>,
}

impl PartialEq for ParityCheckCode {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params && *self.field == *other.field && self.rows == other.rows
    }
}

const RESAMPLE_BUDGET_PER_COLUMN: usize = 200;

impl ParityCheckCode {
    pub fn construct(params: CodeParams, field: Arc<Field>) -> Result<Self, CodeError> {
        params.validate()?;
        if field.degree() != params.m {
            return Err(CodeError::FieldMismatch { field: field.degree(), params: params.m });
        }
        let k = params.info_symbols();
        let checks = params.checks();
        // Each information column needs its own pair of non-adjacent checks.
        if checks < 4 || k > checks * (checks - 3) / 2 {
            return Err(CodeError::TooSmall { checks, info: k });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

        let mut slots: Vec<usize> = (0..checks)
            .flat_map(|c| std::iter::repeat(c).take(params.check_degree - 2))
            .collect();
        debug_assert_eq!(slots.len(), 2 * k);
        slots.shuffle(&mut rng);
        place_info_columns(&mut slots, checks, &mut rng)?;

        let mut rows: Vec<Vec<Entry>> = vec![Vec::with_capacity(params.check_degree); checks];
        for (col, pair) in slots.chunks_exact(2).enumerate() {
            rows[pair[0]].push(Entry { col, coef: Symbol::ZERO });
            rows[pair[1]].push(Entry { col, coef: Symbol::ZERO });
        }
        for (c, row) in rows.iter_mut().enumerate() {
            row.push(Entry { col: k + (c + checks - 1) % checks, coef: Symbol::ZERO });
            row.push(Entry { col: k + c, coef: Symbol::ZERO });
            row.sort_by_key(|e| e.col);
        }
        let q = field.order() as u32;
        for row in rows.iter_mut() {
            for e in row.iter_mut() {
                e.coef = Symbol(rng.random_range(1..q) as u16);
            }
        }

        let mut code = ParityCheckCode { params, field, rows };
        if params.m >= 2 {
            while code.parity_diagonal_products().0 == code.parity_diagonal_products().1 {
                let slot = code.coef_slot(0, k + checks - 1).expect("corner entry");
                code.rows[0][slot].coef = Symbol(rng.random_range(1..q) as u16);
            }
        }
        Ok(code)
    }

    /// Construction with the documented default polynomial for `params.m`.
    pub fn construct_default(params: CodeParams) -> Result<Self, CodeError> {
        let field = Arc::new(Field::new(params.m)?);
        Self::construct(params, field)
    }

    pub fn params(&self) -> &CodeParams {
        &self.params
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn field_arc(&self) -> &Arc<Field> {
        &self.field
    }

    pub fn rows(&self) -> &[Vec<Entry>] {
        &self.rows
    }

    pub fn length(&self) -> usize {
        self.params.length()
    }

    pub fn info_symbols(&self) -> usize {
        self.params.info_symbols()
    }

    pub fn checks(&self) -> usize {
        self.rows.len()
    }

    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Row indices touching each column, in increasing order.
    pub fn column_rows(&self) -> Vec<Vec<usize>> {
        let mut cols = vec![Vec::with_capacity(2); self.length()];
        for (c, row) in self.rows.iter().enumerate() {
            for e in row {
                cols[e.col].push(c);
            }
        }
        cols
    }

    fn coef_slot(&self, row: usize, col: usize) -> Option<usize> {
        self.rows[row].iter().position(|e| e.col == col)
    }

    fn coef(&self, row: usize, col: usize) -> Symbol {
        self.coef_slot(row, col).map(|s| self.rows[row][s].coef).unwrap_or(Symbol::ZERO)
    }

    fn parity_diagonal_products(&self) -> (Symbol, Symbol) {
        let k = self.info_symbols();
        let checks = self.checks();
        let f = &*self.field;
        let mut diag = Symbol::ONE;
        let mut off = Symbol::ONE;
        for c in 0..checks {
            diag = f.mul(diag, self.coef(c, k + c));
            off = f.mul(off, self.coef(c, k + (c + checks - 1) % checks));
        }
        (diag, off)
    }

    /// Encodes `K` information symbols by substitution along the zig-zag.
    pub fn encode(&self, info: &[Symbol]) -> Result<Codeword, CodeError> {
        let k = self.info_symbols();
        if info.len() != k {
            return Err(CodeError::LengthMismatch { expected: k, got: info.len() });
        }
        let f = &*self.field;
        let checks = self.checks();
        let mut x = Vec::with_capacity(self.length());
        x.extend_from_slice(info);

        // Each parity symbol p_c is affine in the unknown tail t = p_{M-1}:
        // p_c = u_c + v_c t.
        let mut info_sum = vec![Symbol::ZERO; checks];
        for (c, row) in self.rows.iter().enumerate() {
            for e in row.iter().filter(|e| e.col < k) {
                info_sum[c] = info_sum[c] + f.mul(e.coef, info[e.col]);
            }
        }
        let mut u = vec![Symbol::ZERO; checks];
        let mut v = vec![Symbol::ZERO; checks];
        for c in 0..checks - 1 {
            let diag = self.coef(c, k + c);
            let off = self.coef(c, k + (c + checks - 1) % checks);
            let inv = f.inv(diag)?;
            if c == 0 {
                u[0] = f.mul(inv, info_sum[0]);
                v[0] = f.mul(inv, off);
            } else {
                u[c] = f.mul(inv, info_sum[c] + f.mul(off, u[c - 1]));
                v[c] = f.mul(inv, f.mul(off, v[c - 1]));
            }
        }
        let last = checks - 1;
        let diag = self.coef(last, k + last);
        let off = self.coef(last, k + last - 1);
        let lhs = diag + f.mul(off, v[last - 1]);
        let rhs = info_sum[last] + f.mul(off, u[last - 1]);
        let tail = if lhs.is_zero() {
            // Only reachable over GF(2), where the last check is redundant.
            debug_assert!(rhs.is_zero());
            Symbol::ZERO
        } else {
            f.div(rhs, lhs)?
        };
        for c in 0..last {
            x.push(u[c] + f.mul(v[c], tail));
        }
        x.push(tail);
        Ok(Codeword(x))
    }

    pub fn syndrome(&self, word: &[Symbol]) -> Result<Vec<Symbol>, CodeError> {
        if word.len() != self.length() {
            return Err(CodeError::LengthMismatch { expected: self.length(), got: word.len() });
        }
        let f = &*self.field;
        Ok(self
            .rows
            .iter()
            .map(|row| row.iter().fold(Symbol::ZERO, |acc, e| acc + f.mul(e.coef, word[e.col])))
            .collect())
    }

    /// `true` iff every parity check is satisfied.
    pub fn is_codeword(&self, word: &[Symbol]) -> bool {
        let f = &*self.field;
        word.len() == self.length()
            && self.rows.iter().all(|row| {
                row.iter().fold(Symbol::ZERO, |acc, e| acc + f.mul(e.coef, word[e.col])).is_zero()
            })
    }

    /// Checks every structural invariant the encoder and decoder rely on.
    pub fn validate(&self) -> Result<(), CodeError> {
        self.params.validate()?;
        let k = self.info_symbols();
        let checks = self.params.checks();
        let n = self.length();
        let bad = |msg: String| Err(CodeError::Structure(msg));
        if self.rows.len() != checks {
            return bad(format!("expected {checks} rows, found {}", self.rows.len()));
        }
        for (c, row) in self.rows.iter().enumerate() {
            if row.len() != self.params.check_degree {
                return bad(format!("row {c} has weight {}", row.len()));
            }
            for e in row {
                if e.col >= n {
                    return bad(format!("row {c} references column {}", e.col));
                }
                if e.coef.is_zero() || e.coef.index() >= self.field.order() {
                    return bad(format!("row {c} has invalid coefficient {:#x}", e.coef));
                }
            }
            if row.windows(2).any(|w| w[0].col >= w[1].col) {
                return bad(format!("row {c} is not sorted by column or repeats a column"));
            }
            let diag = k + c;
            let off = k + (c + checks - 1) % checks;
            if self.coef_slot(c, diag).is_none() || self.coef_slot(c, off).is_none() {
                return bad(format!("row {c} breaks the zig-zag parity layout"));
            }
            if row.iter().filter(|e| e.col >= k).count() != 2 {
                return bad(format!("row {c} touches extra parity columns"));
            }
        }
        let cols = self.column_rows();
        let mut pairs: HashMap<(usize, usize), usize> = HashMap::new();
        for (j, rows) in cols.iter().enumerate() {
            if rows.len() != 2 {
                return bad(format!("column {j} has weight {}", rows.len()));
            }
            if let Some(prev) = pairs.insert((rows[0], rows[1]), j) {
                return bad(format!("columns {prev} and {j} share both checks"));
            }
        }
        if self.params.m >= 2 {
            let (diag, off) = self.parity_diagonal_products();
            if diag == off {
                return bad("parity block is singular".into());
            }
        }
        Ok(())
    }

    /// Plain-text form: a header `m d_c N M seed`, then one line per check
    /// `c: (v,h_hex) (v,h_hex) ...` with 1-based `c` and `v`.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = format!(
            "{} {} {} {} {}\n",
            p.m,
            p.check_degree,
            self.length(),
            self.checks(),
            p.seed
        );
        for (c, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "{}:", c + 1);
            for e in row {
                let _ = write!(out, " ({},{:x})", e.col + 1, e.coef);
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`to_text`](Self::to_text) output and validates the structure.
    pub fn from_text(text: &str, field: Arc<Field>) -> Result<Self, CodeError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let perr = |line: usize, msg: &str| CodeError::Parse { line, msg: msg.to_string() };

        let (hline, header) = lines.next().ok_or_else(|| perr(1, "missing header"))?;
        let fields: Vec<u64> = header
            .split_whitespace()
            .map(|t| t.parse::<u64>())
            .collect::<Result<_, _>>()
            .map_err(|_| perr(hline, "header must be `m d_c N M seed`"))?;
        let [m, dc, n, checks, seed] = fields[..] else {
            return Err(perr(hline, "header must have 5 fields"));
        };
        let (m, dc, n, checks) = (m as u32, dc as usize, n as usize, checks as usize);
        if checks > n {
            return Err(perr(hline, "M exceeds N"));
        }
        if field.degree() != m {
            return Err(CodeError::FieldMismatch { field: field.degree(), params: m });
        }
        let params = CodeParams::new(m, dc, (n - checks) * m as usize, seed)?;
        if params.length() != n || params.checks() != checks {
            return Err(perr(hline, "N and M are inconsistent with d_c"));
        }

        let mut rows = vec![Vec::new(); checks];
        let mut seen = vec![false; checks];
        for (lineno, line) in lines {
            let (label, body) =
                line.split_once(':').ok_or_else(|| perr(lineno, "expected `c: (v,h) ...`"))?;
            let c: usize = label.trim().parse().map_err(|_| perr(lineno, "bad check index"))?;
            if c == 0 || c > checks {
                return Err(perr(lineno, "check index out of range"));
            }
            if std::mem::replace(&mut seen[c - 1], true) {
                return Err(perr(lineno, "duplicate check"));
            }
            let mut row = Vec::new();
            for tok in body.split(')').map(str::trim).filter(|t| !t.is_empty()) {
                let inner = tok.strip_prefix('(').ok_or_else(|| perr(lineno, "expected `(`"))?;
                let (v, h) =
                    inner.split_once(',').ok_or_else(|| perr(lineno, "expected `(v,h_hex)`"))?;
                let v: usize = v.trim().parse().map_err(|_| perr(lineno, "bad column index"))?;
                if v == 0 {
                    return Err(perr(lineno, "column indices are 1-based"));
                }
                let h = u32::from_str_radix(h.trim().trim_start_matches("0x"), 16)
                    .map_err(|_| perr(lineno, "bad hex coefficient"))?;
                let coef = field.symbol(h)?;
                row.push(Entry { col: v - 1, coef });
            }
            row.sort_by_key(|e| e.col);
            rows[c - 1] = row;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(CodeError::Structure(format!("check {} is missing", missing + 1)));
        }
        let code = ParityCheckCode { params, field, rows };
        code.validate()?;
        Ok(code)
    }
}

fn adjacent(a: usize, b: usize, checks: usize) -> bool {
    let d = a.abs_diff(b);
    d == 1 || d == checks - 1
}

fn pair_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Resamples the shuffled slot assignment until every information column
/// sits in two distinct, non-adjacent checks and no two columns share a pair.
///
/// Columns are repaired in order by swapping one of their slots with a random
/// slot elsewhere; a swap is kept only if it leaves every already repaired
/// column valid.
fn place_info_columns(
    slots: &mut [usize],
    checks: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(), CodeError> {
    let ncols = slots.len() / 2;
    let mut used: HashMap<(usize, usize), usize> = HashMap::new();
    for pair in slots.chunks_exact(2) {
        *used.entry(pair_key(pair[0], pair[1])).or_default() += 1;
    }
    let pair_of = |slots: &[usize], col: usize| (slots[2 * col], slots[2 * col + 1]);
    let valid = |(a, b): (usize, usize), used: &HashMap<(usize, usize), usize>| {
        a != b && !adjacent(a, b, checks) && used.get(&pair_key(a, b)).copied().unwrap_or(0) <= 1
    };
    let cap = RESAMPLE_BUDGET_PER_COLUMN * (ncols + 10);
    let mut attempts = 0;
    for col in 0..ncols {
        while !valid(pair_of(slots, col), &used) {
            attempts += 1;
            if attempts > cap {
                return Err(CodeError::RetryCapExceeded(cap));
            }
            let mine = 2 * col + rng.random_range(0..2);
            let other = rng.random_range(0..slots.len());
            let partner = other / 2;
            if partner == col {
                continue;
            }
            swap_slots(slots, &mut used, mine, other);
            if partner < col && !valid(pair_of(slots, partner), &used) {
                swap_slots(slots, &mut used, mine, other);
            }
        }
    }
    Ok(())
}

fn swap_slots(slots: &mut [usize], used: &mut HashMap<(usize, usize), usize>, a: usize, b: usize) {
    let (ca, cb) = (a / 2, b / 2);
    for col in [ca, cb] {
        if let Some(cnt) = used.get_mut(&pair_key(slots[2 * col], slots[2 * col + 1])) {
            *cnt -= 1;
        }
    }
    slots.swap(a, b);
    for col in [ca, cb] {
        *used.entry(pair_key(slots[2 * col], slots[2 * col + 1])).or_default() += 1;
    }
}

/// Packs `k` bits (one per byte, values 0/1) into `k / m` symbols; bit `t` of
/// symbol `j` is bit `j m + t` of the input.
pub fn symbols_from_bits(bits: &[u8], m: u32) -> Vec<Symbol> {
    bits.chunks(m as usize)
        .map(|chunk| {
            Symbol(chunk.iter().enumerate().fold(0u16, |acc, (t, &b)| acc | (((b & 1) as u16) << t)))
        })
        .collect()
}

pub fn bits_from_symbols(symbols: &[Symbol], m: u32) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| (0..m).map(move |t| ((s.0 >> t) & 1) as u8))
        .collect()
}
