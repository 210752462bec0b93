//! Metropolis sampling of `|Ψ(σ)|²`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PairProduct;

/// Sampler settings. `None` picks the size-dependent default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerOptions {
    /// Total configurations per batch, split evenly over walkers.
    pub n_samples: usize,
    pub n_walkers: usize,
    /// Sweeps (`N` proposals each) before the first record of a fresh walker;
    /// default `10 N`.
    pub burn_in_sweeps: Option<usize>,
    /// Sweeps at the start of every later batch of a persistent walker.
    pub rethermalize_sweeps: usize,
    /// Proposals between records; default `N`.
    pub thin: Option<usize>,
    /// Fraction of proposals that exchange two anti-aligned spins.
    pub exchange_fraction: f64,
    /// Draw independent uniform configurations when `|Ψ|` is constant.
    pub iid_when_unimodular: bool,
    /// Worker threads for walker-parallel sampling.
    pub threads: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions {
            n_samples: 10_000,
            n_walkers: 8,
            burn_in_sweeps: None,
            rethermalize_sweeps: 2,
            thin: None,
            exchange_fraction: 0.5,
            iid_when_unimodular: true,
            threads: 1,
        }
    }
}

/// Walker configurations that persist between batches.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Walkers {
    pub configs: Vec<Vec<i8>>,
}

/// Configurations drawn from `|Ψ|²`, stored row-major (`len × N`).
#[derive(Clone, Debug)]
pub struct SampleBatch {
    pub n_sites: usize,
    pub spins: Vec<i8>,
    pub n_walkers: usize,
    pub acceptance_flip: f64,
    pub acceptance_exchange: f64,
    /// Independent uniform draws rather than a Markov chain.
    pub iid: bool,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.spins.len() / self.n_sites
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn config(&self, k: usize) -> &[i8] {
        &self.spins[k * self.n_sites..(k + 1) * self.n_sites]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[i8]> {
        self.spins.chunks_exact(self.n_sites)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic seed for one random stream, e.g. `(seed, step, stage, walker)`.
pub fn stream_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5eed_u64, |acc, &p| splitmix(acc ^ splitmix(p)))
}

fn random_config(n: usize, rng: &mut ChaCha8Rng) -> Vec<i8> {
    (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect()
}

/// `n` independent uniform configurations.
pub fn uniform_samples(n_sites: usize, n: usize, seed: u64) -> SampleBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spins = (0..n * n_sites).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
    SampleBatch { n_sites, spins, n_walkers: 1, acceptance_flip: 1.0, acceptance_exchange: 1.0, iid: true }
}

struct ChainOutput {
    spins: Vec<i8>,
    last: Vec<i8>,
    flips: (u64, u64),
    exchanges: (u64, u64),
}

fn run_chain(
    wf: &PairProduct,
    opts: &SamplerOptions,
    start: Option<&[i8]>,
    n_records: usize,
    seed: u64,
) -> ChainOutput {
    let n = wf.n_sites();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut spins, sweeps) = match start {
        Some(s) => (s.to_vec(), opts.rethermalize_sweeps),
        None => (random_config(n, &mut rng), opts.burn_in_sweeps.unwrap_or(10 * n)),
    };
    let mut fields = wf.local_fields(&spins);
    let thin = opts.thin.unwrap_or(n).max(1);
    let mut flips = (0u64, 0u64);
    let mut exchanges = (0u64, 0u64);
    let mut step = |spins: &mut Vec<i8>, fields: &mut Vec<num_complex::Complex64>, rng: &mut ChaCha8Rng| {
        if n >= 2 && rng.gen::<f64>() < opts.exchange_fraction {
            let i = rng.gen_range(0..n);
            let j = (i + rng.gen_range(1..n)) % n;
            exchanges.0 += 1;
            if spins[i] == spins[j] {
                return;
            }
            let lr = wf.pair_flip_log_ratio(spins, fields, i, j);
            if rng.gen::<f64>() < (2.0 * lr.re).exp() {
                wf.apply_flip(spins, fields, i);
                wf.apply_flip(spins, fields, j);
                exchanges.1 += 1;
            }
        } else {
            let i = rng.gen_range(0..n);
            flips.0 += 1;
            let lr = wf.flip_log_ratio(spins, fields, i);
            if rng.gen::<f64>() < (2.0 * lr.re).exp() {
                wf.apply_flip(spins, fields, i);
                flips.1 += 1;
            }
        }
    };
    for _ in 0..sweeps * n {
        step(&mut spins, &mut fields, &mut rng);
    }
    let mut out = Vec::with_capacity(n_records * n);
    for _ in 0..n_records {
        for _ in 0..thin {
            step(&mut spins, &mut fields, &mut rng);
        }
        out.extend_from_slice(&spins);
    }
    ChainOutput { spins: out, last: spins, flips, exchanges }
}

/// Draws `opts.n_samples` configurations from `|Ψ|²`. Walker `w` uses the
/// stream `stream_seed(&[seed, w])`, and results are concatenated in walker
/// order, so output depends only on `(seed, opts, walkers)` and not on the
/// thread count. `walkers` is updated with the final configurations.
pub fn metropolis_sample(wf: &PairProduct, opts: &SamplerOptions, walkers: &mut Walkers, seed: u64) -> SampleBatch {
    let n = wf.n_sites();
    let nw = opts.n_walkers.max(1);
    if opts.iid_when_unimodular && wf.params().is_unimodular() {
        let mut batch = uniform_samples(n, opts.n_samples, stream_seed(&[seed, u64::MAX]));
        batch.n_walkers = nw;
        // Keep the persistent chains at equilibrium for later batches.
        walkers.configs = (0..nw).map(|w| batch.config(w % batch.len().max(1)).to_vec()).collect();
        return batch;
    }
    let per = opts.n_samples.div_ceil(nw);
    let starts: Vec<Option<Vec<i8>>> =
        (0..nw).map(|w| walkers.configs.get(w).filter(|c| c.len() == n).cloned()).collect();
    let threads = opts.threads.max(1).min(nw);
    let mut outputs: Vec<Option<ChainOutput>> = (0..nw).map(|_| None).collect();
    if threads == 1 {
        for (w, slot) in outputs.iter_mut().enumerate() {
            *slot = Some(run_chain(wf, opts, starts[w].as_deref(), per, stream_seed(&[seed, w as u64])));
        }
    } else {
        std::thread::scope(|scope| {
            let chunk = nw.div_ceil(threads);
            for (c, slots) in outputs.chunks_mut(chunk).enumerate() {
                let starts = &starts;
                scope.spawn(move || {
                    for (k, slot) in slots.iter_mut().enumerate() {
                        let w = c * chunk + k;
                        *slot = Some(run_chain(wf, opts, starts[w].as_deref(), per, stream_seed(&[seed, w as u64])));
                    }
                });
            }
        });
    }
    let mut spins = Vec::with_capacity(nw * per * n);
    let mut flips = (0u64, 0u64);
    let mut exch = (0u64, 0u64);
    walkers.configs.clear();
    for o in outputs.into_iter().flatten() {
        spins.extend_from_slice(&o.spins);
        walkers.configs.push(o.last);
        flips = (flips.0 + o.flips.0, flips.1 + o.flips.1);
        exch = (exch.0 + o.exchanges.0, exch.1 + o.exchanges.1);
    }
    spins.truncate(opts.n_samples * n);
    let rate = |(a, b): (u64, u64)| if a == 0 { 0.0 } else { b as f64 / a as f64 };
    SampleBatch {
        n_sites: n,
        spins,
        n_walkers: nw,
        acceptance_flip: rate(flips),
        acceptance_exchange: rate(exch),
        iid: false,
    }
}
