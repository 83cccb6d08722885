//! Eve's optimal individual no-signaling attack on isotropic correlations.
//!
//! Eve prepares, round by round, one extremal box and keeps its label. On an
//! isotropic box above the local bound she sends the PR box with probability
//! `p_nl = 2v − 1` and otherwise one of the eight local vertices on the CHSH
//! facet, uniformly. Sifting then projects her vertex label onto what she can
//! infer about the sifted outputs once Bob's input is public.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::boxes::{NsBox, Visibility, SETTINGS};
use crate::error::{Error, Result};
use crate::polytope::{vertices, VertexKind};
use crate::rates::entropy;

/// `block[a][b] = P(a, b, e)` for one Eve symbol `e`.
pub type Block = [[f64; 2]; 2];

/// What Eve knows about the sifted pair `(a, b)`. Only the five
/// combinations produced by the optimal attack are representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EveSymbol {
    /// `(k, k)`: both outputs known and equal.
    Both(u8),
    /// `(?, k)`: Bob's output known, Alice's not.
    BobOnly(u8),
    /// `(?, ?)`: nothing known (PR box).
    Neither,
}

impl EveSymbol {
    pub const ALL: [EveSymbol; 5] = [
        EveSymbol::Both(0),
        EveSymbol::Both(1),
        EveSymbol::BobOnly(0),
        EveSymbol::BobOnly(1),
        EveSymbol::Neither,
    ];
}

/// Eve's symbol when Alice announces her input as well.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct AnnouncedSymbol {
    pub x: u8,
    pub e_a: Option<u8>,
    pub e_b: Option<u8>,
}

/// Common view of Eve's symbol alphabets.
pub trait EveLabel: Copy + Ord + fmt::Display {
    fn e_a(&self) -> Option<u8>;
    fn e_b(&self) -> Option<u8>;
    fn announced_x(&self) -> Option<u8> {
        None
    }
}

impl EveLabel for EveSymbol {
    fn e_a(&self) -> Option<u8> {
        match *self {
            EveSymbol::Both(k) => Some(k),
            _ => None,
        }
    }

    fn e_b(&self) -> Option<u8> {
        match *self {
            EveSymbol::Both(k) | EveSymbol::BobOnly(k) => Some(k),
            EveSymbol::Neither => None,
        }
    }
}

impl EveLabel for AnnouncedSymbol {
    fn e_a(&self) -> Option<u8> {
        self.e_a
    }

    fn e_b(&self) -> Option<u8> {
        self.e_b
    }

    fn announced_x(&self) -> Option<u8> {
        Some(self.x)
    }
}

fn fmt_bit(k: Option<u8>) -> String {
    k.map_or_else(|| "?".to_string(), |v| v.to_string())
}

impl fmt::Display for EveSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", fmt_bit(self.e_a()), fmt_bit(self.e_b()))
    }
}

impl fmt::Display for AnnouncedSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{})|x={}",
            fmt_bit(self.e_a),
            fmt_bit(self.e_b),
            self.x
        )
    }
}

/// Sifted joint distribution `P(a, b, e)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointAbe<S> {
    p_nl: f64,
    cells: Vec<(S, Block)>,
}

impl<S: EveLabel> JointAbe<S> {
    pub fn p_nl(&self) -> f64 {
        self.p_nl
    }

    pub fn cells(&self) -> &[(S, Block)] {
        &self.cells
    }

    /// Blocks in symbol order, the representation the rate code works on.
    pub fn blocks(&self) -> Vec<Block> {
        self.cells.iter().map(|(_, b)| *b).collect()
    }

    pub fn prob(&self, a: usize, b: usize, e: S) -> f64 {
        self.cells
            .iter()
            .find(|(s, _)| *s == e)
            .map_or(0.0, |(_, blk)| blk[a][b])
    }

    pub fn eve_probability(&self, e: S) -> f64 {
        self.cells
            .iter()
            .find(|(s, _)| *s == e)
            .map_or(0.0, |(_, b)| b.iter().flatten().sum())
    }

    pub fn ab_marginal(&self) -> Block {
        let mut m = [[0.0; 2]; 2];
        for (_, blk) in &self.cells {
            for a in 0..2 {
                for b in 0..2 {
                    m[a][b] += blk[a][b];
                }
            }
        }
        m
    }

    pub fn total(&self) -> f64 {
        self.cells
            .iter()
            .flat_map(|(_, b)| b.iter().flatten())
            .sum()
    }

    /// CSV with columns `a,b,e_a,e_b,prob` (plus `x` for announced symbols);
    /// unknown bits are written as `?`. Zero cells are omitted.
    pub fn to_csv(&self) -> String {
        let with_x = self.cells.iter().any(|(s, _)| s.announced_x().is_some());
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["a", "b", "e_a", "e_b", "prob"];
        if with_x {
            header.insert(4, "x");
        }
        w.write_record(&header).expect("in-memory write");
        for (s, blk) in &self.cells {
            for a in 0..2 {
                for b in 0..2 {
                    if blk[a][b] == 0.0 {
                        continue;
                    }
                    let mut rec = vec![
                        a.to_string(),
                        b.to_string(),
                        fmt_bit(s.e_a()),
                        fmt_bit(s.e_b()),
                    ];
                    if let Some(x) = s.announced_x() {
                        rec.push(x.to_string());
                    }
                    rec.push(format!("{:?}", blk[a][b]));
                    w.write_record(&rec).expect("in-memory write");
                }
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

/// Tripartite distribution `P(a, b, e | x, y)` where `e` is the label of the
/// extremal box Eve prepared.
#[derive(Debug, Clone, PartialEq)]
pub struct FullAttack {
    visibility: f64,
    mixture: Vec<(VertexKind, f64)>,
}

#[derive(Serialize)]
struct MixtureEntry {
    vertex: VertexKind,
    w: f64,
}

#[derive(Serialize)]
struct FullAttackJson {
    visibility: f64,
    p_nl: f64,
    mixture: Vec<MixtureEntry>,
    /// `p["x{x}y{y}"][label] = [P(0,0), P(0,1), P(1,0), P(1,1)]`
    p: BTreeMap<String, BTreeMap<String, [f64; 4]>>,
}

impl FullAttack {
    /// Builds an attack from an explicit mixture of vertices.
    pub fn from_mixture(visibility: f64, mixture: Vec<(VertexKind, f64)>) -> Self {
        Self {
            visibility,
            mixture,
        }
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    /// Weight on nonlocal vertices.
    pub fn p_nl(&self) -> f64 {
        self.mixture
            .iter()
            .filter(|(k, _)| !k.is_local())
            .map(|(_, w)| w)
            .sum()
    }

    /// Eve's labels with their probabilities; independent of `(x, y)`.
    pub fn mixture(&self) -> &[(VertexKind, f64)] {
        &self.mixture
    }

    /// `P(a, b, e | x, y)`.
    pub fn prob(&self, a: usize, b: usize, e: VertexKind, x: usize, y: usize) -> f64 {
        self.mixture
            .iter()
            .find(|(k, _)| *k == e)
            .map_or(0.0, |(k, w)| w * vertex_box(*k).p(a, b, x, y))
    }

    /// Alice–Bob box conditioned on Eve's label.
    pub fn conditional_box(&self, e: VertexKind) -> NsBox {
        *vertex_box(e)
    }

    /// The box Alice and Bob observe.
    pub fn alice_bob_marginal(&self) -> NsBox {
        NsBox::mixture(self.mixture.iter().map(|(k, w)| (*w, vertex_box(*k))))
    }

    pub fn to_json(&self) -> String {
        let mut p = BTreeMap::new();
        for (x, y) in SETTINGS {
            let mut per_e = BTreeMap::new();
            for (k, w) in &self.mixture {
                let bx = vertex_box(*k);
                per_e.insert(
                    k.to_string(),
                    [
                        w * bx.p(0, 0, x, y),
                        w * bx.p(0, 1, x, y),
                        w * bx.p(1, 0, x, y),
                        w * bx.p(1, 1, x, y),
                    ],
                );
            }
            p.insert(format!("x{x}y{y}"), per_e);
        }
        let dto = FullAttackJson {
            visibility: self.visibility,
            p_nl: self.p_nl(),
            mixture: self
                .mixture
                .iter()
                .map(|&(vertex, w)| MixtureEntry { vertex, w })
                .collect(),
            p,
        };
        serde_json::to_string_pretty(&dto).expect("attack serializes")
    }
}

fn vertex_box(k: VertexKind) -> &'static NsBox {
    vertices()
        .iter()
        .find(|v| v.kind() == k)
        .expect("every kind is a vertex")
        .ns_box()
}

/// Eve's optimal attack on `isotropic(v)`.
///
/// For `v ≥ 1/2`: PR box with weight `2v − 1`, each facet vertex with
/// `(1 − p_nl)/8`. Below the local bound the facet mixture is diluted with the
/// uniform mixture of all sixteen local vertices, so the marginal is still
/// exactly `isotropic(v)` and `p_nl = 0`.
pub fn optimal_attack(v: Visibility) -> FullAttack {
    let v = v.get();
    let mixture = vertices()
        .iter()
        .filter_map(|vx| {
            let w = if v >= 0.5 {
                if vx.is_pr() {
                    2.0 * v - 1.0
                } else if vx.on_chsh_facet() {
                    (2.0 - 2.0 * v) / 8.0
                } else {
                    0.0
                }
            } else if vx.on_chsh_facet() {
                2.0 * v / 8.0 + (1.0 - 2.0 * v) / 16.0
            } else if vx.is_local() {
                (1.0 - 2.0 * v) / 16.0
            } else {
                0.0
            };
            (w > 0.0).then_some((vx.kind(), w))
        })
        .collect();
    FullAttack::from_mixture(v, mixture)
}

/// Alice's sifted output: flipped exactly when `x = y = 1`.
#[inline]
pub fn sifted_alice(a: usize, x: usize, y: usize) -> usize {
    a ^ (x & y)
}

/// What Eve knows about the sifted outputs `(a', b)` given her label and the
/// public inputs. Bob's input is always public; Alice's only if announced.
pub fn eve_knowledge(
    e: VertexKind,
    x: usize,
    y: usize,
    alice_announces: bool,
) -> (Option<u8>, Option<u8>) {
    let VertexKind::Local { alpha, beta, .. } = e else {
        return (None, None);
    };
    let (a, b) = e.local_outputs(x, y).expect("local");
    let a_sifted = sifted_alice(a, x, y) as u8;
    // a' = x(α ⊕ y) ⊕ β does not depend on x when α = y.
    let a_known = alice_announces || alpha as usize == y;
    let ea = if a_known {
        Some(if alice_announces { a_sifted } else { beta })
    } else {
        None
    };
    (ea, Some(b as u8))
}

/// Eve's five-valued symbol for one round.
pub fn eve_symbol(e: VertexKind, x: usize, y: usize) -> Result<EveSymbol> {
    match eve_knowledge(e, x, y, false) {
        (None, None) => Ok(EveSymbol::Neither),
        (None, Some(k)) => Ok(EveSymbol::BobOnly(k)),
        (Some(ka), Some(kb)) if ka == kb => Ok(EveSymbol::Both(ka)),
        _ => Err(Error::UnrepresentableSymbol),
    }
}

fn sift_with<S: Ord + Copy>(
    attack: &FullAttack,
    mut label: impl FnMut(VertexKind, usize, usize) -> Result<S>,
) -> Result<BTreeMap<S, Block>> {
    let mut table: BTreeMap<S, Block> = BTreeMap::new();
    for &(k, w) in &attack.mixture {
        let bx = vertex_box(k);
        for (x, y) in SETTINGS {
            let s = label(k, x, y)?;
            let blk = table.entry(s).or_insert([[0.0; 2]; 2]);
            for a in 0..2 {
                for b in 0..2 {
                    let pr = bx.p(a, b, x, y);
                    if pr > 0.0 {
                        blk[sifted_alice(a, x, y)][b] += 0.25 * w * pr;
                    }
                }
            }
        }
    }
    Ok(table)
}

/// Sifted joint `P(a', b, e)` with inputs uniform, Bob's input public and
/// Eve's label projected onto the five symbols.
///
/// Fails if the attack uses local vertices off the CHSH facet, whose sifted
/// outputs can disagree while Eve knows both.
pub fn sift(attack: &FullAttack) -> Result<JointAbe<EveSymbol>> {
    let table = sift_with(attack, eve_symbol)?;
    let cells = EveSymbol::ALL
        .iter()
        .map(|s| (*s, table.get(s).copied().unwrap_or([[0.0; 2]; 2])))
        .collect();
    Ok(JointAbe {
        p_nl: attack.p_nl(),
        cells,
    })
}

/// Sifted joint when Alice announces her input too: Eve's symbol carries
/// `x` and, for local vertices, both sifted outputs.
pub fn sift_alice_announces(attack: &FullAttack) -> JointAbe<AnnouncedSymbol> {
    let table = sift_with(attack, |k, x, y| {
        let (e_a, e_b) = eve_knowledge(k, x, y, true);
        Ok(AnnouncedSymbol {
            x: x as u8,
            e_a,
            e_b,
        })
    })
    .expect("announced symbols are always representable");
    JointAbe {
        p_nl: attack.p_nl(),
        cells: table.into_iter().collect(),
    }
}

/// Error rate and pairwise informations of a sifted joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AliceBobStats {
    pub qber: f64,
    pub i_ab: f64,
    pub i_ae: f64,
    pub i_be: f64,
}

pub fn alice_bob_stats<S: EveLabel>(joint: &JointAbe<S>) -> AliceBobStats {
    let blocks = joint.blocks();
    let m = joint.ab_marginal();
    AliceBobStats {
        qber: m[0][1] + m[1][0],
        i_ab: entropy::mi_ab(&blocks),
        i_ae: entropy::mi_ae(&blocks),
        i_be: entropy::mi_be(&blocks),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vis(v: f64) -> Visibility {
        Visibility::new(v).unwrap()
    }

    #[test]
    fn attack_weights() {
        let a = optimal_attack(vis(1.0));
        assert_eq!(a.mixture().len(), 1);
        assert_eq!(a.p_nl(), 1.0);
        let a = optimal_attack(vis(0.5));
        assert_eq!(a.p_nl(), 0.0);
        assert_eq!(a.mixture().len(), 8);
        assert!(a.mixture().iter().all(|&(_, w)| w == 0.125));
        assert!((optimal_attack(vis(0.8)).p_nl() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn marginal_is_isotropic_everywhere() {
        for i in 0..=20 {
            let v = i as f64 / 20.0;
            let a = optimal_attack(vis(v));
            let m = a.alice_bob_marginal();
            assert!(m.max_abs_diff(&NsBox::isotropic(vis(v))) < 1e-12, "v={v}");
        }
    }

    #[test]
    fn eve_symbol_examples() {
        // Bob announces y = 1 while Eve holds a vertex with α = 0:
        // she knows a₀ and a₁ but not which one the flip rule produced.
        let k = VertexKind::Local {
            alpha: 0,
            beta: 1,
            gamma: 0,
            delta: 1,
        };
        assert_eq!(eve_symbol(k, 0, 0).unwrap(), EveSymbol::Both(1));
        assert_eq!(eve_symbol(k, 1, 1).unwrap(), EveSymbol::BobOnly(1));
        let pr = VertexKind::Nonlocal {
            alpha: 0,
            beta: 0,
            gamma: 0,
        };
        assert_eq!(eve_symbol(pr, 1, 0).unwrap(), EveSymbol::Neither);
    }

    #[test]
    fn off_facet_vertices_are_unrepresentable() {
        let attack = optimal_attack(vis(0.3));
        assert!(matches!(sift(&attack), Err(Error::UnrepresentableSymbol)));
    }

    #[test]
    fn announced_variant_at_pr_box() {
        let attack = optimal_attack(vis(1.0));
        let ann = sift_alice_announces(&attack);
        let plain = sift(&attack).unwrap();
        assert_eq!(ann.cells().len(), 2);
        let merged = ann.ab_marginal();
        let blk = plain.cells()[4].1;
        for a in 0..2 {
            for b in 0..2 {
                assert!((merged[a][b] - blk[a][b]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn announced_variant_keeps_eve_marginal() {
        for p in [0.0, 0.3, 0.7] {
            let v = Visibility::from_p_nl(p).unwrap();
            let ann = sift_alice_announces(&optimal_attack(v));
            let unknown: f64 = ann
                .cells()
                .iter()
                .filter(|(s, _)| s.e_a.is_none() && s.e_b.is_none())
                .map(|(_, b)| b.iter().flatten().sum::<f64>())
                .sum();
            assert!((unknown - p).abs() < 1e-15);
            assert!((ann.total() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn announced_variant_reveals_everything_without_pr() {
        let ann = sift_alice_announces(&optimal_attack(vis(0.5)));
        // Brute force over symbols: each carries one (a,b) cell.
        for (s, blk) in ann.cells() {
            let nonzero = blk.iter().flatten().filter(|&&v| v > 0.0).count();
            assert_eq!(nonzero, 1, "{s}");
            let (a, b) = (s.e_a.unwrap() as usize, s.e_b.unwrap() as usize);
            assert!(blk[a][b] > 0.0);
        }
    }

    #[test]
    fn joint_csv_layout() {
        let j = sift(&optimal_attack(vis(0.75))).unwrap();
        let csv = j.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("a,b,e_a,e_b,prob"));
        assert!(csv.contains("1,0,?,0,0.0625\n"), "{csv}");
        assert!(!csv.contains("0,1,?,0,"));
        assert_eq!(csv.lines().count(), 9);
        let ann = sift_alice_announces(&optimal_attack(vis(0.8)));
        assert!(ann.to_csv().starts_with("a,b,e_a,e_b,x,prob"));
    }

    #[test]
    fn attack_json_is_keyed_by_inputs_and_label() {
        let a = optimal_attack(vis(0.8));
        let v: serde_json::Value = serde_json::from_str(&a.to_json()).unwrap();
        assert!((v["p_nl"].as_f64().unwrap() - 0.6).abs() < 1e-15);
        let cell = &v["p"]["x1y1"]["NL:000"];
        assert!((cell[1].as_f64().unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(v["mixture"].as_array().unwrap().len(), 9);
    }
}
