//! Experiment engine: single trials with the collect-and-retry protocol,
//! overhead histograms and block-error sweeps.
//!
//! A trial transmits one random codeword over the channel and lets the
//! receiver collect `n(ε) = round((1+ε)·k/C)` outputs. On failure it raises
//! `ε` by one grid step, collects the additional outputs (stream indices
//! continue), and decodes again from a fresh initialisation.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::ChannelModel;
use crate::fountain::{emit_bit, splitmix64_finalize, StreamSpec};
use crate::gf::{Field, Symbol};
use crate::precode::{CodeError, CodeParams, Codeword, ParityCheckCode};
use crate::spdecoder::{CollectedOutputs, DecodeResult, SpDecoder, DEFAULT_MAX_ITERATIONS};

/// Environment variable that caps the number of worker threads.
pub const THREADS_ENV: &str = "NBF_THREADS";

const SEED_CODE: u64 = 0x6a09_e667_f3bc_c908;
const SEED_INFO: u64 = 0xbb67_ae85_84ca_a73b;
const SEED_NOISE: u64 = 0x3c6e_f372_fe94_f82b;
const SEED_STREAM: u64 = 0xa54f_f53a_5f1d_36f1;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error("overhead schedule needs start >= 0, step > 0 and max >= start")]
    Schedule,
    #[error("channel capacity {0} must be positive")]
    Capacity(f64),
    #[error("iteration cap must be at least 1")]
    Iterations,
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// The overhead grid `ε_s = start + s·step`, `s = 0, 1, …` while `ε_s ≤ max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub start: f64,
    pub step: f64,
    pub max: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { start: 0.0, step: 0.01, max: 2.0 }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let ok = self.start >= 0.0 && self.step > 0.0 && self.max >= self.start && self.max.is_finite();
        ok.then_some(()).ok_or(HarnessError::Schedule)
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        ((self.max - self.start) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn epsilon(&self, s: usize) -> f64 {
        self.start + s as f64 * self.step
    }
}

/// Number of outputs collected at overhead `epsilon`.
pub fn outputs_needed(epsilon: f64, k_bits: usize, capacity: f64) -> usize {
    ((1.0 + epsilon) * k_bits as f64 / capacity).round() as usize
}

#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub k_bits: usize,
    pub m: u32,
    pub dc: usize,
    pub channel: ChannelModel,
    /// Capacity used for `n(ε)`; defaults to the channel's own.
    pub capacity: f64,
    pub stream_seed: u64,
    pub trial_seed: u64,
    pub schedule: Schedule,
    pub max_iter: usize,
    pub field: Option<Arc<Field>>,
}

impl TrialConfig {
    pub fn new(k_bits: usize, m: u32, dc: usize, channel: ChannelModel) -> Self {
        TrialConfig {
            k_bits,
            m,
            dc,
            channel,
            capacity: channel.capacity(),
            stream_seed: 0,
            trial_seed: 0,
            schedule: Schedule::default(),
            max_iter: DEFAULT_MAX_ITERATIONS,
            field: None,
        }
    }

    pub fn with_seeds(mut self, stream_seed: u64, trial_seed: u64) -> Self {
        self.stream_seed = stream_seed;
        self.trial_seed = trial_seed;
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.schedule.validate()?;
        if !(self.capacity > 0.0) {
            return Err(HarnessError::Capacity(self.capacity));
        }
        if self.max_iter == 0 {
            return Err(HarnessError::Iterations);
        }
        CodeParams::new(self.m, self.dc, self.k_bits, 0)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    /// Overhead of the first successful attempt; `None` if the cap was hit.
    pub epsilon: Option<f64>,
    /// Grid step of the last attempt (`0` for the first).
    pub last_step: usize,
    pub attempts: usize,
    /// The decoder accepted a codeword other than the transmitted one.
    pub undetected: bool,
    pub outputs: usize,
    pub wall_time: Duration,
}

impl TrialOutcome {
    pub fn censored(&self) -> bool {
        self.epsilon.is_none()
    }
}

/// Code, codeword and noise source for one trial.
pub struct TrialSetup {
    pub code: ParityCheckCode,
    pub codeword: Codeword,
    pub stream: StreamSpec,
    pub noise: ChaCha8Rng,
}

impl TrialSetup {
    pub fn new(config: &TrialConfig) -> Result<Self, HarnessError> {
        let params = CodeParams::new(config.m, config.dc, config.k_bits, derive_seed(config.trial_seed, SEED_CODE))?;
        let code = match &config.field {
            Some(f) => ParityCheckCode::construct(params, Arc::clone(f))?,
            None => ParityCheckCode::construct_default(params)?,
        };
        let mut info_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.trial_seed, SEED_INFO));
        let q = code.field().order() as u32;
        let info: Vec<Symbol> = (0..code.info_symbols()).map(|_| Symbol(info_rng.random_range(0..q) as u16)).collect();
        let codeword = code.encode(&info)?;
        let stream = StreamSpec::new(config.stream_seed, code.length(), config.m);
        let noise = ChaCha8Rng::seed_from_u64(derive_seed(config.trial_seed, SEED_NOISE));
        Ok(TrialSetup { code, codeword, stream, noise })
    }

    /// Appends outputs until `outputs.len() == n`.
    pub fn collect(&mut self, channel: &ChannelModel, outputs: &mut CollectedOutputs, n: usize) {
        let start = outputs.len() as u64 + 1;
        let field = self.code.field_arc().clone();
        for t in self.stream.triples(start, n.saturating_sub(outputs.len())) {
            let obs = channel.transmit(emit_bit(&field, &self.codeword, &t), &mut self.noise);
            outputs.push(t, channel.posterior(obs));
        }
    }
}

/// Independent 64-bit seed for a named purpose.
pub fn derive_seed(root: u64, purpose: u64) -> u64 {
    splitmix64_finalize(splitmix64_finalize(root ^ purpose).wrapping_add(purpose))
}

/// Seed of trial `trial` in experiment cell `cell`.
pub fn trial_seed(root: u64, cell: u64, trial: u64) -> u64 {
    derive_seed(derive_seed(root, cell.wrapping_add(1)), trial.wrapping_add(1))
}

/// Stream seed shared by all trials under a root seed.
pub fn stream_seed(root: u64) -> u64 {
    derive_seed(root, SEED_STREAM)
}

fn judge(result: &DecodeResult, sent: &Codeword) -> (bool, bool) {
    match result.codeword() {
        Some(x) => (true, x != sent),
        None => (false, false),
    }
}

/// One trial of the collect-and-retry protocol.
pub fn run_trial(config: &TrialConfig) -> Result<TrialOutcome, HarnessError> {
    config.validate()?;
    let started = Instant::now();
    let mut setup = TrialSetup::new(config)?;
    let code = setup.code.clone();
    let mut decoder = SpDecoder::new(&code);
    let mut outputs = CollectedOutputs::new();
    let mut last_failed_n = None;
    let mut attempts = 0;
    let steps = config.schedule.len();
    for s in 0..steps {
        let eps = config.schedule.epsilon(s);
        let n = outputs_needed(eps, config.k_bits, config.capacity);
        setup.collect(&config.channel, &mut outputs, n);
        attempts += 1;
        // The decoder is deterministic: identical inputs give the same failure.
        if last_failed_n == Some(n) {
            continue;
        }
        let result = decoder.decode(&outputs, config.max_iter);
        let (ok, undetected) = judge(&result, &setup.codeword);
        if ok {
            return Ok(TrialOutcome {
                epsilon: Some(eps),
                last_step: s,
                attempts,
                undetected,
                outputs: n,
                wall_time: started.elapsed(),
            });
        }
        last_failed_n = Some(n);
    }
    Ok(TrialOutcome {
        epsilon: None,
        last_step: steps - 1,
        attempts,
        undetected: false,
        outputs: outputs.len(),
        wall_time: started.elapsed(),
    })
}

/// Runs `f` on a pool sized by [`THREADS_ENV`] (all cores when unset).
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Quantile with linear interpolation between order statistics; censored
/// values enter as `+∞`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi || sorted[lo] == sorted[hi] {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramRow {
    pub k: usize,
    pub trial: usize,
    pub outcome: TrialOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub k: usize,
    pub trials: usize,
    pub censored: usize,
    pub undetected: usize,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
}

#[derive(Debug, Clone)]
pub struct HistogramReport {
    pub template: TrialConfig,
    pub root_seed: u64,
    pub trials: usize,
    pub rows: Vec<HistogramRow>,
}

pub const HISTOGRAM_HEADER: &str = "k,trial,epsilon,attempts,censored,undetected";

/// Histogram bin width recorded in the output metadata.
pub const HISTOGRAM_BIN: f64 = 0.01;

impl HistogramReport {
    /// Per-`k` quantiles of the achieved overhead.
    pub fn summaries(&self) -> Vec<Summary> {
        let mut ks: Vec<usize> = self.rows.iter().map(|r| r.k).collect();
        ks.dedup();
        ks.into_iter()
            .map(|k| {
                let rows: Vec<_> = self.rows.iter().filter(|r| r.k == k).collect();
                let mut eps: Vec<f64> = rows.iter().map(|r| r.outcome.epsilon.unwrap_or(f64::INFINITY)).collect();
                eps.sort_by(f64::total_cmp);
                Summary {
                    k,
                    trials: rows.len(),
                    censored: rows.iter().filter(|r| r.outcome.censored()).count(),
                    undetected: rows.iter().filter(|r| r.outcome.undetected).count(),
                    q10: quantile(&eps, 0.1),
                    q50: quantile(&eps, 0.5),
                    q90: quantile(&eps, 0.9),
                }
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let t = &self.template;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# m={} dc={} channel={} capacity={} eps0={} step={} eps_max={} max_iter={} trials={} bin={} root_seed={}",
            t.m, t.dc, t.channel, t.capacity, t.schedule.start, t.schedule.step, t.schedule.max, t.max_iter,
            self.trials, HISTOGRAM_BIN, self.root_seed
        );
        out.push_str(HISTOGRAM_HEADER);
        out.push('\n');
        for r in &self.rows {
            let o = &r.outcome;
            let eps = o.epsilon.unwrap_or(t.schedule.epsilon(o.last_step));
            let _ = writeln!(
                out,
                "{},{},{:.4},{},{},{}",
                r.k,
                r.trial,
                eps,
                o.attempts,
                u8::from(o.censored()),
                u8::from(o.undetected)
            );
        }
        for s in self.summaries() {
            let _ = writeln!(
                out,
                "# summary k={} trials={} censored={} undetected={} q10={:.4} q50={:.4} q90={:.4}",
                s.k, s.trials, s.censored, s.undetected, s.q10, s.q50, s.q90
            );
        }
        out
    }
}

/// Runs `trials` trials for every `k` in `ks`. `template` supplies everything
/// but `k_bits` and the seeds, which derive from `root_seed`.
pub fn overhead_histogram(
    ks: &[usize],
    trials: usize,
    template: &TrialConfig,
    root_seed: u64,
) -> Result<HistogramReport, HarnessError> {
    let stream = stream_seed(root_seed);
    let jobs: Vec<(usize, usize)> = ks.iter().flat_map(|&k| (0..trials).map(move |t| (k, t))).collect();
    let rows = jobs
        .into_par_iter()
        .map(|(k, trial)| {
            let mut config = template.clone();
            config.k_bits = k;
            config.stream_seed = stream;
            config.trial_seed = trial_seed(root_seed, k as u64, trial as u64);
            run_trial(&config).map(|outcome| HistogramRow { k, trial, outcome })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(HistogramReport { template: template.clone(), root_seed, trials, rows })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlerPoint {
    pub capacity: f64,
    pub epsilon: f64,
    pub trials: usize,
    /// Trials in which the decoder did not find a codeword.
    pub block_errors: usize,
    /// Trials in which it found the wrong one.
    pub undetected: usize,
}

impl BlerPoint {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            (self.block_errors + self.undetected) as f64 / self.trials as f64
        }
    }
}

pub const BLER_HEADER: &str = "C,epsilon,trials,block_errors,undetected";

pub fn bler_csv(points: &[BlerPoint]) -> String {
    let mut out = String::from(BLER_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(out, "{},{:.4},{},{},{}", p.capacity, p.epsilon, p.trials, p.block_errors, p.undetected);
    }
    out
}

/// One channel of a sweep together with the capacity used for `n(ε)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepChannel {
    pub capacity: f64,
    pub model: ChannelModel,
}

impl SweepChannel {
    /// BI-AWGN at the given capacity (capacity 1 uses the noise floor).
    pub fn biawgn(capacity: f64) -> Result<Self, crate::channel::ChannelError> {
        Ok(SweepChannel { capacity, model: ChannelModel::biawgn_with_capacity(capacity)? })
    }

    pub fn bec(capacity: f64) -> Result<Self, crate::channel::ChannelError> {
        Ok(SweepChannel { capacity, model: ChannelModel::bec(1.0 - capacity)? })
    }
}

/// Fixed-`n` decoding (no retries) at every grid overhead. All overheads of
/// a trial share one code, codeword and output stream.
pub fn bler_sweep(
    epsilons: &[f64],
    channels: &[SweepChannel],
    template: &TrialConfig,
    trials: usize,
    root_seed: u64,
) -> Result<Vec<BlerPoint>, HarnessError> {
    template.schedule.validate()?;
    let stream = stream_seed(root_seed);
    let mut points = Vec::new();
    for (ci, ch) in channels.iter().enumerate() {
        let per_trial = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let mut config = template.clone();
                config.channel = ch.model;
                config.capacity = ch.capacity;
                config.stream_seed = stream;
                config.trial_seed = trial_seed(root_seed, ci as u64, trial as u64);
                config.validate()?;
                let mut setup = TrialSetup::new(&config)?;
                let code = setup.code.clone();
                let mut decoder = SpDecoder::new(&code);
                let mut verdicts = Vec::with_capacity(epsilons.len());
                for &eps in epsilons {
                    let n = outputs_needed(eps, config.k_bits, config.capacity);
                    let mut outputs = CollectedOutputs::new();
                    setup.noise = ChaCha8Rng::seed_from_u64(derive_seed(config.trial_seed, SEED_NOISE));
                    setup.collect(&config.channel, &mut outputs, n);
                    let result = decoder.decode(&outputs, config.max_iter);
                    verdicts.push(judge(&result, &setup.codeword));
                }
                Ok(verdicts)
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        for (e, &eps) in epsilons.iter().enumerate() {
            let mut p = BlerPoint { capacity: ch.capacity, epsilon: eps, trials, block_errors: 0, undetected: 0 };
            for v in &per_trial {
                match v[e] {
                    (false, _) => p.block_errors += 1,
                    (true, true) => p.undetected += 1,
                    (true, false) => {}
                }
            }
            points.push(p);
        }
    }
    Ok(points)
}
