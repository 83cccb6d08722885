//! Bipartite binary-input/binary-output correlations.
//!
//! A box is the conditional distribution `P(a,b|x,y)` with `a,b,x,y ∈ {0,1}`.
//! All sixteen entries are stored, in `(x,y,a,b)` row-major order, and the
//! single-party marginals are computed once on construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Party, Result};
use crate::tolerance;

/// Flat index of `P(a,b|x,y)` in `(x,y,a,b)` row-major order.
#[inline]
pub const fn index(x: usize, y: usize, a: usize, b: usize) -> usize {
    ((x * 2 + y) * 2 + a) * 2 + b
}

/// All `(x, y)` input pairs in canonical order.
pub const SETTINGS: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

/// Visibility of an isotropic correlation, `0 ≤ v ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct Visibility(f64);

impl Visibility {
    pub fn new(v: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("visibility {v} outside [0,1]")));
        }
        Ok(Self(v))
    }

    /// Visibility whose optimal attack carries nonlocal weight `p_nl`.
    pub fn from_p_nl(p_nl: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_nl) {
            return Err(Error::Domain(format!("p_nl {p_nl} outside [0,1]")));
        }
        Ok(Self((1.0 + p_nl) / 2.0))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// Minimal nonlocal weight `max(0, 2v − 1)`.
    pub fn p_nl(self) -> f64 {
        (2.0 * self.0 - 1.0).max(0.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawBox {
    p: Vec<f64>,
}

/// A validated no-signaling box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct NsBox {
    p: [f64; 16],
    /// `alice[x][a] = P(a|x)`
    alice: [[f64; 2]; 2],
    /// `bob[y][b] = P(b|y)`
    bob: [[f64; 2]; 2],
}

impl TryFrom<RawBox> for NsBox {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        NsBox::validate(&raw.p, tolerance::PROB)
    }
}

impl From<NsBox> for RawBox {
    fn from(b: NsBox) -> Self {
        RawBox { p: b.p.to_vec() }
    }
}

impl NsBox {
    /// Checks normalization and no-signaling within `tol` and builds a box.
    ///
    /// Entries in `[-tol, 0)` are clamped to zero.
    pub fn validate(raw: &[f64], tol: f64) -> Result<Self> {
        if raw.len() != 16 {
            return Err(Error::WrongLength {
                expected: 16,
                got: raw.len(),
            });
        }
        let mut p = [0.0; 16];
        for (idx, &value) in raw.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { idx, value });
            }
            if value < -tol {
                return Err(Error::NegativeProbability { idx, value });
            }
            p[idx] = value.clamp(0.0, 1.0);
        }
        for (x, y) in SETTINGS {
            let sum: f64 = (0..4).map(|ab| p[index(x, y, ab / 2, ab % 2)]).sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::NotNormalized { x, y, sum });
            }
        }
        for input in 0..2 {
            let mut alice_dev = 0.0f64;
            let mut bob_dev = 0.0f64;
            for out in 0..2 {
                let a_y0 = p[index(input, 0, out, 0)] + p[index(input, 0, out, 1)];
                let a_y1 = p[index(input, 1, out, 0)] + p[index(input, 1, out, 1)];
                alice_dev = alice_dev.max((a_y0 - a_y1).abs());
                let b_x0 = p[index(0, input, 0, out)] + p[index(0, input, 1, out)];
                let b_x1 = p[index(1, input, 0, out)] + p[index(1, input, 1, out)];
                bob_dev = bob_dev.max((b_x0 - b_x1).abs());
            }
            if alice_dev > tol {
                return Err(Error::Signaling {
                    party: Party::Alice,
                    input,
                    deviation: alice_dev,
                });
            }
            if bob_dev > tol {
                return Err(Error::Signaling {
                    party: Party::Bob,
                    input,
                    deviation: bob_dev,
                });
            }
        }
        Ok(Self::from_array_unchecked(p))
    }

    pub(crate) fn from_array_unchecked(p: [f64; 16]) -> Self {
        let mut alice = [[0.0; 2]; 2];
        let mut bob = [[0.0; 2]; 2];
        for (x, y) in SETTINGS {
            for a in 0..2 {
                for b in 0..2 {
                    let v = p[index(x, y, a, b)] / 2.0;
                    alice[x][a] += v;
                    bob[y][b] += v;
                }
            }
        }
        Self { p, alice, bob }
    }

    pub(crate) fn from_fn(f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        let mut p = [0.0; 16];
        for (x, y) in SETTINGS {
            for a in 0..2 {
                for b in 0..2 {
                    p[index(x, y, a, b)] = f(a, b, x, y);
                }
            }
        }
        Self::from_array_unchecked(p)
    }

    /// `P(a,b|x,y)`.
    #[inline]
    pub fn p(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[index(x, y, a, b)]
    }

    /// Entries in `(x,y,a,b)` row-major order.
    pub fn as_array(&self) -> &[f64; 16] {
        &self.p
    }

    /// Alice's marginal `P(a|x)`.
    pub fn alice_marginal(&self, a: usize, x: usize) -> f64 {
        self.alice[x][a]
    }

    /// Bob's marginal `P(b|y)`.
    pub fn bob_marginal(&self, b: usize, y: usize) -> f64 {
        self.bob[y][b]
    }

    /// Isotropic correlation: `v·½·δ(a⊕b = xy) + (1−v)/4`.
    pub fn isotropic(v: Visibility) -> Self {
        Self::isotropic_signed(v.get())
    }

    /// Isotropic family extended to `v ∈ [−1, 1]`; negative visibility
    /// favours the anti-CHSH relation.
    pub(crate) fn isotropic_signed(v: f64) -> Self {
        Self::from_fn(|a, b, x, y| {
            let hit = if a ^ b == x & y { 0.5 } else { 0.0 };
            v * hit + (1.0 - v) / 4.0
        })
    }

    /// The ideal BB84 correlation: perfectly correlated on equal inputs,
    /// uncorrelated otherwise.
    pub fn bb84() -> Self {
        Self::from_fn(|a, b, x, y| {
            if x == y {
                if a == b {
                    0.5
                } else {
                    0.0
                }
            } else {
                0.25
            }
        })
    }

    /// Correlation of a Werner state of visibility `w` measured with the
    /// CHSH-optimal settings; equal to `isotropic(w/√2)`.
    pub fn werner(w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::Domain(format!(
                "Werner visibility {w} outside [0,1]"
            )));
        }
        Ok(Self::isotropic_signed(w / std::f64::consts::SQRT_2))
    }

    /// Score of the CHSH variant `Σ_{x,y} P(a⊕b = xy ⊕ αx ⊕ βy ⊕ γ | x,y)`.
    pub fn chsh_variant(&self, alpha: usize, beta: usize, gamma: usize) -> f64 {
        SETTINGS
            .iter()
            .map(|&(x, y)| {
                let target = (x & y) ^ (alpha & x) ^ (beta & y) ^ gamma;
                (0..2).map(|a| self.p(a, a ^ target, x, y)).sum::<f64>()
            })
            .sum()
    }

    /// `P(a₀=b₀) + P(a₀=b₁) + P(a₁=b₀) + P(a₁≠b₁)`; local boxes score at most 3.
    pub fn chsh(&self) -> f64 {
        self.chsh_variant(0, 0, 0)
    }

    /// Largest score over the eight relabelings of the CHSH expression.
    pub fn max_chsh(&self) -> f64 {
        (0..8)
            .map(|k| self.chsh_variant(k >> 2, (k >> 1) & 1, k & 1))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Uniform average over the eight local relabelings that leave the CHSH
    /// expression invariant. The result is isotropic with the same CHSH value.
    pub fn twirl_to_isotropic(&self) -> Self {
        let mut p = [0.0; 16];
        for g in 0..8usize {
            let (u, w, s) = (g >> 2, (g >> 1) & 1, g & 1);
            for (x, y) in SETTINGS {
                for a in 0..2 {
                    for b in 0..2 {
                        let src_a = a ^ (w & x) ^ s;
                        let src_b = b ^ (u & y) ^ s ^ (u & w);
                        p[index(x, y, a, b)] += self.p(src_a, src_b, x ^ u, y ^ w) / 8.0;
                    }
                }
            }
        }
        Self::from_array_unchecked(p)
    }

    /// Signed visibility of the isotropic box with this box's CHSH value.
    pub fn isotropic_visibility(&self) -> f64 {
        self.chsh() / 2.0 - 1.0
    }

    /// Convex combination `Σ wᵢ·boxᵢ`. Weights are used as given.
    pub fn mixture<'a>(parts: impl IntoIterator<Item = (f64, &'a NsBox)>) -> Self {
        let mut p = [0.0; 16];
        for (w, b) in parts {
            for (dst, src) in p.iter_mut().zip(b.p.iter()) {
                *dst += w * src;
            }
        }
        Self::from_array_unchecked(p)
    }

    pub fn max_abs_diff(&self, other: &NsBox) -> f64 {
        self.p
            .iter()
            .zip(other.p.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("box serializes")
    }

    pub fn from_json(s: &str, tol: f64) -> Result<Self> {
        let raw: RawBox = serde_json::from_str(s)?;
        Self::validate(&raw.p, tol)
    }

    /// Column labels for CSV, in serialization order.
    pub fn csv_header() -> Vec<String> {
        let mut out = Vec::with_capacity(16);
        for (x, y) in SETTINGS {
            for a in 0..2 {
                for b in 0..2 {
                    out.push(format!("a{a}b{b}x{x}y{y}"));
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::csv_header()).expect("in-memory write");
        w.write_record(self.p.iter().map(|v| format!("{v:?}")))
            .expect("in-memory write");
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    /// Parses a header plus one data row. Columns are matched by label, so
    /// their order in the file does not matter.
    pub fn from_csv(s: &str, tol: f64) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(s.as_bytes());
        let header = r.headers()?.clone();
        let row = r
            .records()
            .next()
            .ok_or_else(|| Error::Parse("CSV box has no data row".into()))??;
        let mut p = vec![f64::NAN; 16];
        for (label, field) in header.iter().zip(row.iter()) {
            let pos = Self::csv_header()
                .iter()
                .position(|h| h == label)
                .ok_or_else(|| Error::Parse(format!("unknown CSV column {label:?}")))?;
            p[pos] = field
                .parse()
                .map_err(|e| Error::Parse(format!("column {label}: {e}")))?;
        }
        if let Some(missing) = p.iter().position(|v| v.is_nan()) {
            return Err(Error::Parse(format!(
                "missing CSV column {}",
                Self::csv_header()[missing]
            )));
        }
        Self::validate(&p, tol)
    }
}
