//! Extremal points of the binary no-signaling polytope and minimal-nonlocal
//! decompositions over them.

use std::fmt;
use std::sync::OnceLock;

use serde::Serialize;

use crate::boxes::NsBox;
use crate::error::{Error, Result};
use crate::simplex;
use crate::tolerance;

/// Identity of an extremal no-signaling box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VertexKind {
    /// Deterministic box `a = αx ⊕ β`, `b = γy ⊕ δ`.
    Local {
        alpha: u8,
        beta: u8,
        gamma: u8,
        delta: u8,
    },
    /// PR-type box `a ⊕ b = xy ⊕ αx ⊕ βy ⊕ γ` with uniform marginals.
    Nonlocal { alpha: u8, beta: u8, gamma: u8 },
}

impl VertexKind {
    pub fn is_local(&self) -> bool {
        matches!(self, VertexKind::Local { .. })
    }

    /// Outputs of a local vertex for inputs `(x, y)`; `None` for nonlocal ones.
    pub fn local_outputs(&self, x: usize, y: usize) -> Option<(usize, usize)> {
        match *self {
            VertexKind::Local {
                alpha,
                beta,
                gamma,
                delta,
            } => Some((
                (alpha as usize & x) ^ beta as usize,
                (gamma as usize & y) ^ delta as usize,
            )),
            VertexKind::Nonlocal { .. } => None,
        }
    }

    /// Parses `L:abgd` or `NL:abg`.
    pub fn parse(label: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad vertex label {label:?}"));
        let (prefix, digits) = label.split_once(':').ok_or_else(bad)?;
        let bits: Vec<u8> = digits
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(bad()),
            })
            .collect::<Result<_>>()?;
        match (prefix, bits.as_slice()) {
            ("L", &[alpha, beta, gamma, delta]) => Ok(VertexKind::Local {
                alpha,
                beta,
                gamma,
                delta,
            }),
            ("NL", &[alpha, beta, gamma]) => Ok(VertexKind::Nonlocal { alpha, beta, gamma }),
            _ => Err(bad()),
        }
    }

    fn build_box(&self) -> NsBox {
        match *self {
            VertexKind::Local { .. } => NsBox::from_fn(|a, b, x, y| {
                let (va, vb) = self.local_outputs(x, y).expect("local");
                if a == va && b == vb {
                    1.0
                } else {
                    0.0
                }
            }),
            VertexKind::Nonlocal { alpha, beta, gamma } => NsBox::from_fn(|a, b, x, y| {
                let target = (x & y) ^ (alpha as usize & x) ^ (beta as usize & y) ^ gamma as usize;
                if a ^ b == target {
                    0.5
                } else {
                    0.0
                }
            }),
        }
    }
}

impl fmt::Display for VertexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexKind::Local {
                alpha,
                beta,
                gamma,
                delta,
            } => write!(f, "L:{alpha}{beta}{gamma}{delta}"),
            VertexKind::Nonlocal { alpha, beta, gamma } => write!(f, "NL:{alpha}{beta}{gamma}"),
        }
    }
}

impl Serialize for VertexKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    kind: VertexKind,
    ns_box: NsBox,
}

impl Vertex {
    pub fn new(kind: VertexKind) -> Self {
        Self {
            kind,
            ns_box: kind.build_box(),
        }
    }

    pub fn kind(&self) -> VertexKind {
        self.kind
    }

    pub fn ns_box(&self) -> &NsBox {
        &self.ns_box
    }

    pub fn is_local(&self) -> bool {
        self.kind.is_local()
    }

    /// Local vertex saturating the CHSH inequality.
    pub fn on_chsh_facet(&self) -> bool {
        self.is_local() && self.ns_box.chsh() == 3.0
    }

    /// The canonical PR box, `NL:000`.
    pub fn is_pr(&self) -> bool {
        self.kind
            == VertexKind::Nonlocal {
                alpha: 0,
                beta: 0,
                gamma: 0,
            }
    }
}

/// All 24 extremal points: 16 local (lexicographic in α,β,γ,δ), then
/// 8 nonlocal (lexicographic in α,β,γ).
pub fn vertices() -> &'static [Vertex] {
    static CELL: OnceLock<Vec<Vertex>> = OnceLock::new();
    CELL.get_or_init(|| {
        let local = (0..16u8).map(|k| VertexKind::Local {
            alpha: k >> 3,
            beta: (k >> 2) & 1,
            gamma: (k >> 1) & 1,
            delta: k & 1,
        });
        let nonlocal = (0..8u8).map(|k| VertexKind::Nonlocal {
            alpha: k >> 2,
            beta: (k >> 1) & 1,
            gamma: k & 1,
        });
        local.chain(nonlocal).map(Vertex::new).collect()
    })
}

/// Position of the PR box in [`vertices`].
pub const PR_INDEX: usize = 16;

/// Convex weights over the canonical vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    weights: Vec<f64>,
    residual: f64,
}

#[derive(Serialize)]
struct WeightEntry {
    vertex: VertexKind,
    w: f64,
}

#[derive(Serialize)]
struct DecompositionJson {
    weights: Vec<WeightEntry>,
    residual: f64,
}

impl Decomposition {
    /// Weight on each vertex, aligned with [`vertices`].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static Vertex, f64)> + '_ {
        vertices().iter().zip(self.weights.iter().copied())
    }

    /// Max-abs reconstruction error against the target box.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn nonlocal_weight(&self) -> f64 {
        self.iter()
            .filter(|(v, _)| !v.is_local())
            .map(|(_, w)| w)
            .sum()
    }

    pub fn reconstruct(&self) -> NsBox {
        NsBox::mixture(self.iter().map(|(v, w)| (w, v.ns_box())))
    }

    pub fn to_json(&self) -> String {
        let dto = DecompositionJson {
            weights: self
                .iter()
                .map(|(v, w)| WeightEntry {
                    vertex: v.kind(),
                    w,
                })
                .collect(),
            residual: self.residual,
        };
        serde_json::to_string_pretty(&dto).expect("decomposition serializes")
    }
}

/// Weights `w ≥ 0`, `Σw = 1`, with `Σ wᵢ·generatorᵢ = target`, minimizing each
/// objective in turn. Fails with [`Error::Infeasible`] if no mixture exists.
pub fn convex_weights(
    target: &NsBox,
    generators: &[NsBox],
    objectives: &[Vec<f64>],
    tol: f64,
) -> Result<Vec<f64>> {
    let n = generators.len();
    let mut a: Vec<Vec<f64>> = (0..16)
        .map(|i| generators.iter().map(|g| g.as_array()[i]).collect())
        .collect();
    let mut b: Vec<f64> = target.as_array().to_vec();
    a.push(vec![1.0; n]);
    b.push(1.0);
    simplex::solve_lexicographic(&a, &b, objectives, tol)
}

/// Decomposition minimizing the total weight on nonlocal vertices, ties
/// broken by the lexicographically smallest weight vector.
pub fn min_nonlocal_decomposition(target: &NsBox) -> Result<Decomposition> {
    min_nonlocal_decomposition_with(target, tolerance::LP)
}

pub fn min_nonlocal_decomposition_with(target: &NsBox, tol: f64) -> Result<Decomposition> {
    let verts = vertices();
    let boxes: Vec<NsBox> = verts.iter().map(|v| *v.ns_box()).collect();
    let n = verts.len();
    let mut objectives = Vec::with_capacity(n + 1);
    objectives.push(
        verts
            .iter()
            .map(|v| if v.is_local() { 0.0 } else { 1.0 })
            .collect(),
    );
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        objectives.push(e);
    }
    let weights = convex_weights(target, &boxes, &objectives, tol)?;
    let mut d = Decomposition {
        weights,
        residual: 0.0,
    };
    d.residual = d.reconstruct().max_abs_diff(target);
    Ok(d)
}

/// True when the box needs no nonlocal weight.
pub fn is_local(b: &NsBox) -> bool {
    is_local_with(b, tolerance::LP)
}

pub fn is_local_with(b: &NsBox, tol: f64) -> bool {
    match min_nonlocal_decomposition_with(b, tol) {
        Ok(d) => d.nonlocal_weight() <= tol,
        Err(_) => false,
    }
}
