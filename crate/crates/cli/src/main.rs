use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nbfountain::channel::{ChannelError, ChannelModel, Observation};
use nbfountain::deanalysis::{self, DeParams, LoadNormalization};
use nbfountain::fountain::{emit_bit, OutputTriple, StreamSpec};
use nbfountain::gf::{Field, FieldError};
use nbfountain::harness::{self, HarnessError, Schedule, SweepChannel, TrialConfig};
use nbfountain::precode::{bits_from_symbols, symbols_from_bits, CodeError, CodeParams, ParityCheckCode};
use nbfountain::spdecoder::{CollectedOutputs, SpDecoder, DEFAULT_MAX_ITERATIONS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    De(#[from] deanalysis::DeError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("decoding failed after {0} iterations")]
    DecodeFailed(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::DecodeFailed(_) => 1,
            CliError::Io { .. } => 1,
            _ => 2,
        }
    }
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Parser)]
#[command(name = "nbf", version, about = "Non-binary LDPC fountain codes: analysis and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Density-evolution thresholds for m = 1..=19 and d_c = 3..=6 as CSV.
    DeTable {
        #[arg(long, value_enum, default_value_t = Normalization::CheckDegree)]
        normalization: Normalization,
        #[arg(long, default_value_t = 19)]
        m_max: u32,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Density-evolution threshold for one (m, d_c).
    DeThreshold {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        dc: usize,
        #[arg(long, value_enum, default_value_t = Normalization::CheckDegree)]
        normalization: Normalization,
    },
    /// Achieved-overhead histogram with the collect-and-retry protocol.
    Histogram(HistogramArgs),
    /// Block error rate against overhead at fixed output counts.
    Bler(BlerArgs),
    /// Encode information bits and write channel outputs as packet CSV.
    Encode(EncodeArgs),
    /// Decode packet CSV back to information bits.
    Decode(DecodeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Normalization {
    CheckDegree,
    DesignRate,
}

impl From<Normalization> for LoadNormalization {
    fn from(n: Normalization) -> Self {
        match n {
            Normalization::CheckDegree => LoadNormalization::CheckDegree,
            Normalization::DesignRate => LoadNormalization::DesignRate,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum ChannelKind {
    Bec,
    Biawgn,
}

#[derive(Args, Clone)]
struct ChannelArgs {
    #[arg(long, value_enum, default_value_t = ChannelKind::Bec)]
    channel: ChannelKind,
    /// Channel capacity; sets the erasure probability or noise level.
    #[arg(long, conflicts_with_all = ["erasure", "sigma"])]
    capacity: Option<f64>,
    #[arg(long)]
    erasure: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
}

impl ChannelArgs {
    fn model(&self) -> Result<ChannelModel, CliError> {
        Ok(match self.channel {
            ChannelKind::Bec => {
                if self.sigma.is_some() {
                    return Err(config("--sigma needs --channel biawgn"));
                }
                match (self.capacity, self.erasure) {
                    (Some(c), _) => ChannelModel::bec(1.0 - c)?,
                    (None, Some(p)) => ChannelModel::bec(p)?,
                    (None, None) => ChannelModel::noiseless(),
                }
            }
            ChannelKind::Biawgn => {
                if self.erasure.is_some() {
                    return Err(config("--erasure needs --channel bec"));
                }
                match (self.capacity, self.sigma) {
                    (Some(c), _) => ChannelModel::biawgn_with_capacity(c)?,
                    (None, Some(s)) => ChannelModel::biawgn(s)?,
                    (None, None) => return Err(config("--channel biawgn needs --capacity or --sigma")),
                }
            }
        })
    }
}

#[derive(Args, Clone)]
struct CodeArgs {
    #[arg(long, default_value_t = 8)]
    m: u32,
    #[arg(long, default_value_t = 3)]
    dc: usize,
    /// Primitive polynomial as a hex mask, e.g. 0x11d.
    #[arg(long)]
    field_poly: Option<String>,
}

impl CodeArgs {
    fn field(&self) -> Result<Arc<Field>, CliError> {
        field_for(self.m, self.field_poly.as_deref())
    }
}

fn field_for(m: u32, poly: Option<&str>) -> Result<Arc<Field>, CliError> {
    Ok(Arc::new(match poly {
        Some(p) => {
            let v = u32::from_str_radix(p.trim_start_matches("0x"), 16)
                .map_err(|_| config(format!("--field-poly {p} is not hex")))?;
            Field::with_poly(m, v)?
        }
        None => Field::new(m)?,
    }))
}

#[derive(Args, Clone)]
struct ScheduleArgs {
    #[arg(long, default_value_t = 0.0)]
    eps0: f64,
    #[arg(long, default_value_t = 0.01)]
    eps_step: f64,
    #[arg(long, default_value_t = 2.0)]
    eps_max: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    max_iter: usize,
}

#[derive(Args)]
struct HistogramArgs {
    /// Information lengths in bits (repeat or comma-separate).
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    code: CodeArgs,
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BlerArgs {
    #[arg(long, default_value_t = 1024)]
    k: usize,
    /// Channel capacities (comma-separated).
    #[arg(long, value_delimiter = ',', default_value = "1.0,0.5,0.1")]
    capacity: Vec<f64>,
    #[arg(long, value_enum, default_value_t = ChannelKind::Biawgn)]
    channel: ChannelKind,
    /// Overheads as a list `a,b,c` or a range `start:stop:step`.
    #[arg(long, default_value = "0:0.5:0.05")]
    eps_grid: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    code: CodeArgs,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    max_iter: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    code: CodeArgs,
    /// Seed of the pre-code construction.
    #[arg(long, default_value_t = 1)]
    code_seed: u64,
    #[arg(long, default_value_t = 1)]
    stream_seed: u64,
    /// Seed for random information bits and channel noise.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// File of information bits as `0`/`1` characters; random when absent.
    #[arg(long)]
    info: Option<PathBuf>,
    /// Number of packets to emit.
    #[arg(long)]
    n: usize,
    /// First stream index.
    #[arg(long, default_value_t = 1)]
    start: u64,
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long)]
    dump_code: Option<PathBuf>,
    #[arg(long)]
    load_code: Option<PathBuf>,
    /// Where to write the information bits that were encoded.
    #[arg(long)]
    info_out: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    load_code: PathBuf,
    #[arg(long)]
    field_poly: Option<String>,
    #[arg(long)]
    packets: PathBuf,
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    max_iter: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn emit(path: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io { path: p.display().to_string(), source }),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || config(format!("bad --eps-grid `{spec}`"));
    if let Some((a, rest)) = spec.split_once(':') {
        let (b, s) = rest.split_once(':').ok_or_else(bad)?;
        let (a, b, s): (f64, f64, f64) =
            (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?, s.parse().map_err(|_| bad())?);
        if !(s > 0.0) || b < a || a < 0.0 {
            return Err(bad());
        }
        let count = ((b - a) / s + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| a + i as f64 * s).collect())
    } else {
        let v: Vec<f64> = spec.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
        if v.iter().any(|&e| !(e >= 0.0)) {
            return Err(bad());
        }
        Ok(v)
    }
}

fn load_code(path: &PathBuf, poly: Option<&str>) -> Result<ParityCheckCode, CliError> {
    let text = read(path)?;
    let m: u32 = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .and_then(|l| l.split_whitespace().next())
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| config(format!("{}: missing code header", path.display())))?;
    Ok(ParityCheckCode::from_text(&text, field_for(m, poly)?)?)
}

fn parse_bits(text: &str) -> Result<Vec<u8>, CliError> {
    text.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(config(format!("information bits must be 0 or 1, found `{c}`"))),
        })
        .collect()
}

const PACKET_HEADER: &str = "i,v,w,h_hex,y";

fn format_observation(obs: Observation) -> String {
    match obs {
        Observation::Erased => "e".into(),
        Observation::Bit(b) => b.to_string(),
        Observation::Real(y) => format!("{y:.17e}"),
    }
}

fn parse_observation(tok: &str) -> Option<Observation> {
    match tok {
        "e" => Some(Observation::Erased),
        "0" => Some(Observation::Bit(0)),
        "1" => Some(Observation::Bit(1)),
        _ => tok.parse::<f64>().ok().filter(|y| y.is_finite()).map(Observation::Real),
    }
}

fn cmd_encode(a: EncodeArgs) -> Result<(), CliError> {
    let channel = a.channel.model()?;
    let code = match &a.load_code {
        Some(p) => load_code(p, a.code.field_poly.as_deref())?,
        None => {
            let k = a.k.ok_or_else(|| config("--k is required unless --load-code is given"))?;
            let params = CodeParams::new(a.code.m, a.code.dc, k, a.code_seed)?;
            ParityCheckCode::construct(params, a.code.field()?)?
        }
    };
    let m = code.field().degree();
    let k_bits = code.info_symbols() * m as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let bits = match &a.info {
        Some(p) => parse_bits(&read(p)?)?,
        None => (0..k_bits).map(|_| rng.random_range(0..2u8)).collect(),
    };
    if bits.len() != k_bits {
        return Err(config(format!("expected {k_bits} information bits, got {}", bits.len())));
    }
    let x = code.encode(&symbols_from_bits(&bits, m))?;
    if let Some(p) = &a.dump_code {
        emit(Some(p), &code.to_text())?;
    }
    if let Some(p) = &a.info_out {
        let s: String = bits.iter().map(|b| char::from(b'0' + b)).collect();
        emit(Some(p), &(s + "\n"))?;
    }
    let stream = StreamSpec::new(a.stream_seed, code.length(), m);
    let mut out = String::from(PACKET_HEADER);
    out.push('\n');
    for t in stream.triples(a.start.max(1), a.n) {
        let obs = channel.transmit(emit_bit(code.field(), &x, &t), &mut rng);
        out.push_str(&format!(
            "{},{},{},{:x},{}\n",
            t.index,
            t.symbol + 1,
            t.bit,
            t.coef,
            format_observation(obs)
        ));
    }
    emit(a.output.as_ref(), &out)
}

fn cmd_decode(a: DecodeArgs) -> Result<(), CliError> {
    let channel = a.channel.model()?;
    let code = load_code(&a.load_code, a.field_poly.as_deref())?;
    let field = code.field();
    let text = read(&a.packets)?;
    let mut outputs = CollectedOutputs::new();
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
        if line.is_empty() || line.starts_with('#') || line == PACKET_HEADER {
            continue;
        }
        let bad = |what: &str| config(format!("{}:{lineno}: {what}", a.packets.display()));
        let cols: Vec<&str> = line.split(',').collect();
        let [i, v, w, h, y] = cols[..] else {
            return Err(bad("expected 5 columns"));
        };
        let index: u64 = i.parse().map_err(|_| bad("bad index"))?;
        let v: usize = v.parse().map_err(|_| bad("bad symbol index"))?;
        let w: u32 = w.parse().map_err(|_| bad("bad bit position"))?;
        let h = u32::from_str_radix(h, 16).map_err(|_| bad("bad coefficient"))?;
        if v == 0 || v > code.length() || w == 0 || w > field.degree() || h == 0 {
            return Err(bad("triple out of range"));
        }
        let obs = parse_observation(y).ok_or_else(|| bad("bad observation"))?;
        let triple = OutputTriple { index, symbol: v - 1, bit: w, coef: field.symbol(h)? };
        outputs.push(triple, channel.posterior(obs));
    }
    if a.max_iter == 0 {
        return Err(config("--max-iter must be at least 1"));
    }
    let result = SpDecoder::new(&code).decode(&outputs, a.max_iter);
    let x = result.codeword().ok_or(CliError::DecodeFailed(result.iterations))?;
    let bits = bits_from_symbols(&x[..code.info_symbols()], field.degree());
    let s: String = bits.iter().map(|b| char::from(b'0' + b)).collect();
    emit(a.output.as_ref(), &(s + "\n"))
}

fn trial_template(code: &CodeArgs, channel: ChannelModel, schedule: Schedule, max_iter: usize) -> Result<TrialConfig, CliError> {
    let mut t = TrialConfig::new(0, code.m, code.dc, channel);
    t.schedule = schedule;
    t.max_iter = max_iter;
    if code.field_poly.is_some() {
        t.field = Some(code.field()?);
    }
    Ok(t)
}

fn cmd_histogram(a: HistogramArgs) -> Result<(), CliError> {
    let channel = a.channel.model()?;
    let s = &a.schedule;
    let schedule = Schedule { start: s.eps0, step: s.eps_step, max: s.eps_max };
    let template = trial_template(&a.code, channel, schedule, s.max_iter)?;
    for &k in &a.k {
        let mut c = template.clone();
        c.k_bits = k;
        c.validate()?;
    }
    let report = harness::with_pool(|| harness::overhead_histogram(&a.k, a.trials, &template, a.seed))??;
    emit(a.output.as_ref(), &report.to_csv())
}

fn cmd_bler(a: BlerArgs) -> Result<(), CliError> {
    let grid = parse_grid(&a.eps_grid)?;
    let channels = a
        .capacity
        .iter()
        .map(|&c| match a.channel {
            ChannelKind::Biawgn => SweepChannel::biawgn(c),
            ChannelKind::Bec => SweepChannel::bec(c),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut template = trial_template(&a.code, ChannelModel::noiseless(), Schedule::default(), a.max_iter)?;
    template.k_bits = a.k;
    template.validate()?;
    let points = harness::with_pool(|| harness::bler_sweep(&grid, &channels, &template, a.trials, a.seed))??;
    emit(a.output.as_ref(), &harness::bler_csv(&points))
}

fn cmd_de_table(normalization: Normalization, m_max: u32, output: Option<PathBuf>) -> Result<(), CliError> {
    if !(1..=deanalysis::MAX_DEGREE).contains(&m_max) {
        return Err(config(format!("--m-max must be in 1..={}", deanalysis::MAX_DEGREE)));
    }
    let params = DeParams { normalization: normalization.into(), ..DeParams::default() };
    let ms: Vec<u32> = (1..=m_max).collect();
    let entries = harness::with_pool(|| deanalysis::table(&ms, &[3, 4, 5, 6], &params))??;
    emit(output.as_ref(), &deanalysis::table_csv(&entries))
}

fn cmd_de_threshold(m: u32, dc: usize, normalization: Normalization) -> Result<(), CliError> {
    if !(3..=6).contains(&dc) {
        return Err(config("--dc must be in 3..=6"));
    }
    let params = DeParams { normalization: normalization.into(), ..DeParams::default() };
    let eps = deanalysis::threshold(m, dc, &params)?;
    let entry = deanalysis::TableEntry { m, dc, epsilon_star: eps };
    emit(None, &deanalysis::table_csv(&[entry]))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::DeTable { normalization, m_max, output } => cmd_de_table(normalization, m_max, output),
        Command::DeThreshold { m, dc, normalization } => cmd_de_threshold(m, dc, normalization),
        Command::Histogram(a) => cmd_histogram(a),
        Command::Bler(a) => cmd_bler(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nbf: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
