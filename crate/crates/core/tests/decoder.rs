use nbfountain::channel::ChannelModel;
use nbfountain::fountain::{emit_bit, StreamSpec};
use nbfountain::gf::{Field, Symbol};
use nbfountain::precode::{CodeParams, Codeword, ParityCheckCode};
use nbfountain::spdecoder::{
    check_to_variable, convolve, CollectedOutputs, DecoderOptions, Priors, SpDecoder,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vector(rng: &mut impl Rng, q: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..q).map(|_| rng.random::<f64>()).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    p
}

fn point(q: usize, a: usize) -> Vec<f64> {
    let mut p = vec![0.0; q];
    p[a] = 1.0;
    p
}

fn direct_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for (y, &pa) in a.iter().enumerate() {
        for (z, &pb) in b.iter().enumerate() {
            out[y ^ z] += pa * pb;
        }
    }
    out
}

/// Check-node output by enumerating every assignment of the other edges.
fn enumerated_check(f: &Field, coefs: &[Symbol], inputs: &[Vec<f64>], j: usize) -> Vec<f64> {
    let q = f.order();
    let others: Vec<usize> = (0..coefs.len()).filter(|&l| l != j).collect();
    let inv = f.inv(coefs[j]).unwrap();
    let mut out = vec![0.0; q];
    let total = q.pow(others.len() as u32);
    for code in 0..total {
        let mut c = code;
        let mut weight = 1.0;
        let mut s = Symbol::ZERO;
        for &l in &others {
            let x = c % q;
            c /= q;
            weight *= inputs[l][x];
            s = s + f.mul(coefs[l], Symbol(x as u16));
        }
        out[f.mul(inv, s).index()] += weight;
    }
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= sum);
    out
}

#[test]
fn fast_convolution_matches_direct() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for m in 1..=6u32 {
        let q = 1 << m;
        for _ in 0..20 {
            let a = random_vector(&mut rng, q);
            let b = random_vector(&mut rng, q);
            let err = convolve(&a, &b)
                .iter()
                .zip(direct_convolution(&a, &b))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-12, "m={m} err={err}");
        }
    }
}

#[test]
fn check_rule_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for m in 1..=4u32 {
        let f = Field::new(m).unwrap();
        let q = f.order();
        for dc in 3..=5usize {
            if q.pow(dc as u32 - 1) > 1 << 16 {
                continue;
            }
            for case in 0..6 {
                let coefs: Vec<Symbol> = (0..dc).map(|_| Symbol(rng.random_range(1..q) as u16)).collect();
                // Mix general vectors with point masses to cover both kernels.
                let inputs: Vec<Vec<f64>> = (0..dc)
                    .map(|l| if (case + l) % 3 == 0 { point(q, rng.random_range(0..q)) } else { random_vector(&mut rng, q) })
                    .collect();
                let fast = check_to_variable(&f, &coefs, &inputs);
                for j in 0..dc {
                    let slow = enumerated_check(&f, &coefs, &inputs, j);
                    for (a, b) in fast[j].iter().zip(&slow) {
                        assert!((a - b).abs() < 1e-12, "m={m} dc={dc} j={j}");
                    }
                }
            }
        }
    }
}

#[test]
fn check_rule_all_point_masses() {
    let f = Field::new(4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let coefs: Vec<Symbol> = (0..4).map(|_| Symbol(rng.random_range(1..16))).collect();
        let inputs: Vec<Vec<f64>> = (0..4).map(|_| point(16, rng.random_range(0..16))).collect();
        let fast = check_to_variable(&f, &coefs, &inputs);
        for j in 0..4 {
            assert_eq!(fast[j], enumerated_check(&f, &coefs, &inputs, j));
        }
    }
}

struct Instance {
    code: ParityCheckCode,
    x: Codeword,
}

fn instance(m: u32, dc: usize, k_symbols: usize, seed: u64) -> Instance {
    let code = ParityCheckCode::construct_default(CodeParams::new(m, dc, k_symbols * m as usize, seed).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x55);
    let q = code.field().order() as u32;
    let info: Vec<Symbol> = (0..k_symbols).map(|_| Symbol(rng.random_range(0..q) as u16)).collect();
    let x = code.encode(&info).unwrap();
    Instance { code, x }
}

fn collect(inst: &Instance, channel: &ChannelModel, n: usize, seed: u64) -> CollectedOutputs {
    let stream = StreamSpec::new(seed, inst.code.length(), inst.code.field().degree());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = CollectedOutputs::new();
    for t in stream.triples(1, n) {
        let obs = channel.transmit(emit_bit(inst.code.field(), &inst.x, &t), &mut rng);
        out.push(t, channel.posterior(obs));
    }
    out
}

#[test]
fn skipping_unchanged_nodes_is_exact() {
    let channels = [ChannelModel::noiseless(), ChannelModel::bec(0.3).unwrap(), ChannelModel::biawgn(0.8).unwrap()];
    for (i, ch) in channels.iter().enumerate() {
        for seed in 0..6u64 {
            let inst = instance(4, 3, 24, seed);
            let n = ((1.0 + 0.1 * seed as f64) * 96.0 / ch.capacity()) as usize;
            let outputs = collect(&inst, ch, n, seed + 100 * i as u64);
            let a = SpDecoder::with_options(&inst.code, DecoderOptions { skip_unchanged: true }).decode(&outputs, 80);
            let b = SpDecoder::with_options(&inst.code, DecoderOptions { skip_unchanged: false }).decode(&outputs, 80);
            assert_eq!(a.status, b.status);
            assert_eq!(a.iterations, b.iterations);
            assert_eq!(a.estimate, b.estimate);
        }
    }
}

#[test]
fn erasure_channel_decoding() {
    let ch = ChannelModel::bec(0.5).unwrap();
    let mut ok = 0;
    for seed in 0..20u64 {
        let inst = instance(8, 3, 32, seed);
        let outputs = collect(&inst, &ch, 2 * 256 * 2, seed);
        let r = SpDecoder::new(&inst.code).decode(&outputs, 200);
        if let Some(x) = r.codeword() {
            assert_eq!(x, &inst.x);
            ok += 1;
        }
    }
    assert!(ok >= 19, "{ok}/20");
}

#[test]
fn decoder_reuse_across_calls() {
    let inst = instance(4, 3, 24, 7);
    let ch = ChannelModel::noiseless();
    let mut dec = SpDecoder::new(&inst.code);
    let low = collect(&inst, &ch, 10, 1);
    let high = collect(&inst, &ch, 400, 1);
    assert!(!dec.decode(&low, 50).is_success());
    let r = dec.decode(&high, 50);
    assert_eq!(r.codeword(), Some(&inst.x));
    let fresh = SpDecoder::new(&inst.code).decode(&high, 50);
    assert_eq!(fresh.iterations, r.iterations);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn messages_stay_normalized(m in 1u32..=6, dc in 3usize..=6, seed in any::<u64>()) {
        let f = Field::new(m).unwrap();
        let q = f.order();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coefs: Vec<Symbol> = (0..dc).map(|_| Symbol(rng.random_range(1..q) as u16)).collect();
        let inputs: Vec<Vec<f64>> = (0..dc).map(|_| random_vector(&mut rng, q)).collect();
        for out in check_to_variable(&f, &coefs, &inputs) {
            prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(out.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn success_implies_codeword(seed in any::<u64>(), sigma in 0.5f64..1.2) {
        let inst = instance(3, 3, 16, seed);
        let ch = ChannelModel::biawgn(sigma).unwrap();
        let outputs = collect(&inst, &ch, 200, seed);
        let r = SpDecoder::new(&inst.code).decode(&outputs, 40);
        if r.is_success() {
            prop_assert!(inst.code.is_codeword(&r.estimate));
        }
    }

    #[test]
    fn certain_priors_decode_immediately(seed in any::<u64>()) {
        let inst = instance(6, 4, 20, seed);
        let r = SpDecoder::new(&inst.code).decode_priors(&Priors::certain(&inst.x, 64), 5);
        prop_assert_eq!(r.iterations, 0);
        prop_assert_eq!(r.codeword(), Some(&inst.x));
    }
}
