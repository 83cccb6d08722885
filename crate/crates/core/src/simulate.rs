//! Round-level Monte Carlo of the CHSH protocol under the optimal attack.
//!
//! Rounds are generated in blocks of [`BLOCK_LEN`]; block `k` draws from the
//! ChaCha stream `k` of the seed, so any partition of the blocks across
//! workers reproduces the serial record stream exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::attack::{optimal_attack, sifted_alice, FullAttack};
use crate::boxes::{NsBox, Visibility, SETTINGS};
use crate::error::{Error, Result};
use crate::polytope::VertexKind;

pub const BLOCK_LEN: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RoundRecord {
    pub x: u8,
    pub y: u8,
    pub a: u8,
    pub b: u8,
    pub eve_label: VertexKind,
    pub sifted_a: u8,
}

struct Sampler {
    cumulative: Vec<(f64, VertexKind, NsBox)>,
}

impl Sampler {
    fn new(attack: &FullAttack) -> Self {
        let mut acc = 0.0;
        let cumulative = attack
            .mixture()
            .iter()
            .map(|&(k, w)| {
                acc += w;
                (acc, k, attack.conditional_box(k))
            })
            .collect();
        Self { cumulative }
    }

    fn round(&self, rng: &mut ChaCha8Rng) -> RoundRecord {
        let inputs: u32 = rng.gen();
        let (x, y) = ((inputs & 1) as usize, ((inputs >> 1) & 1) as usize);
        let u: f64 = rng.gen();
        let (_, label, bx) = self
            .cumulative
            .iter()
            .find(|(c, _, _)| u < *c)
            .unwrap_or_else(|| self.cumulative.last().expect("nonempty mixture"));
        let mut t: f64 = rng.gen();
        let mut out = (1, 1);
        'outer: for a in 0..2 {
            for b in 0..2 {
                let p = bx.p(a, b, x, y);
                if t < p {
                    out = (a, b);
                    break 'outer;
                }
                t -= p;
            }
        }
        let (a, b) = out;
        RoundRecord {
            x: x as u8,
            y: y as u8,
            a: a as u8,
            b: b as u8,
            eve_label: *label,
            sifted_a: sifted_alice(a, x, y) as u8,
        }
    }
}

fn block(sampler: &Sampler, seed: u64, k: usize, len: usize) -> Vec<RoundRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    (0..len).map(|_| sampler.round(&mut rng)).collect()
}

fn block_lengths(n: usize) -> impl Iterator<Item = (usize, usize)> + Clone + Send {
    (0..n.div_ceil(BLOCK_LEN)).map(move |k| (k, BLOCK_LEN.min(n - k * BLOCK_LEN)))
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("need at least one round".into()));
    }
    Ok(())
}

/// `n` rounds against `isotropic(v)`, deterministic in `seed`.
pub fn run(v: Visibility, n: usize, seed: u64) -> Result<Vec<RoundRecord>> {
    check_n(n)?;
    let sampler = Sampler::new(&optimal_attack(v));
    Ok(block_lengths(n)
        .flat_map(|(k, len)| block(&sampler, seed, k, len))
        .collect())
}

/// Same records as [`run`], generated in parallel.
pub fn run_sharded(v: Visibility, n: usize, seed: u64) -> Result<Vec<RoundRecord>> {
    check_n(n)?;
    let sampler = Sampler::new(&optimal_attack(v));
    let blocks: Vec<Vec<RoundRecord>> = block_lengths(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(k, len)| block(&sampler, seed, k, len))
        .collect();
    Ok(blocks.into_iter().flatten().collect())
}

/// Sufficient statistics of a record stream. Merging is associative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    /// Counts indexed like box entries, `(x, y, a, b)` row-major.
    pub counts: [u64; 16],
    pub sifted_errors: u64,
}

impl Tally {
    pub fn add(&mut self, r: &RoundRecord) {
        let i = crate::boxes::index(r.x as usize, r.y as usize, r.a as usize, r.b as usize);
        self.counts[i] += 1;
        self.sifted_errors += u64::from(r.sifted_a != r.b);
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        for (c, o) in self.counts.iter_mut().zip(other.counts) {
            *c += o;
        }
        self.sifted_errors += other.sifted_errors;
        self
    }

    pub fn from_records(records: &[RoundRecord]) -> Tally {
        let mut t = Tally::default();
        for r in records {
            t.add(r);
        }
        t
    }

    pub fn n_rounds(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn setting_count(&self, x: usize, y: usize) -> u64 {
        (0..4)
            .map(|ab| self.counts[crate::boxes::index(x, y, 0, 0) + ab])
            .sum()
    }

    /// Empirical `P(a, b | x, y)`; settings never drawn stay zero.
    pub fn frequencies(&self) -> [f64; 16] {
        let mut f = [0.0; 16];
        for (x, y) in SETTINGS {
            let n = self.setting_count(x, y);
            if n == 0 {
                continue;
            }
            for a in 0..2 {
                for b in 0..2 {
                    let i = crate::boxes::index(x, y, a, b);
                    f[i] = self.counts[i] as f64 / n as f64;
                }
            }
        }
        f
    }
}

/// Streams `n` rounds into a [`Tally`] without keeping them.
pub fn run_tally(v: Visibility, n: usize, seed: u64) -> Result<Tally> {
    check_n(n)?;
    let sampler = Sampler::new(&optimal_attack(v));
    Ok(block_lengths(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(k, len)| Tally::from_records(&block(&sampler, seed, k, len)))
        .reduce(Tally::default, Tally::merge))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateReport {
    pub n_rounds: u64,
    pub chsh_hat: f64,
    pub chsh_stderr: f64,
    pub qber_hat: f64,
    pub qber_stderr: f64,
    pub p_nl_hat: f64,
}

impl EstimateReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Plug-in estimates with normal-approximation standard errors.
pub fn estimate_tally(t: &Tally) -> Result<EstimateReport> {
    let n = t.n_rounds();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut chsh = 0.0;
    let mut var = 0.0;
    for (x, y) in SETTINGS {
        let nxy = t.setting_count(x, y);
        if nxy == 0 {
            return Err(Error::Domain(format!("no rounds with inputs ({x}, {y})")));
        }
        let wins: u64 = (0..2)
            .map(|a| t.counts[crate::boxes::index(x, y, a, a ^ (x & y))])
            .sum();
        let p = wins as f64 / nxy as f64;
        chsh += p;
        var += p * (1.0 - p) / nxy as f64;
    }
    let q = t.sifted_errors as f64 / n as f64;
    Ok(EstimateReport {
        n_rounds: n,
        chsh_hat: chsh,
        chsh_stderr: var.sqrt(),
        qber_hat: q,
        qber_stderr: (q * (1.0 - q) / n as f64).sqrt(),
        p_nl_hat: (chsh - 3.0).max(0.0),
    })
}

pub fn estimate(records: &[RoundRecord]) -> Result<EstimateReport> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    estimate_tally(&Tally::from_records(records))
}

/// CSV with columns `x,y,a,b,e,sifted_a`.
pub fn records_to_csv(records: &[RoundRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 20 + 32);
    out.push_str("x,y,a,b,e,sifted_a\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.x, r.y, r.a, r.b, r.eve_label, r.sifted_a
        ));
    }
    out
}
