//! Shannon entropies in bits.

use crate::attack::Block;
use crate::error::{Error, Result};
use crate::tolerance;

#[inline]
fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Binary entropy without domain checks; arguments are clamped to `[0, 1]`.
#[inline]
pub(crate) fn h2(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    plogp(p) + plogp(1.0 - p)
}

/// Binary entropy `h(p) = −p log₂ p − (1−p) log₂(1−p)`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!(
            "binary entropy needs p in [0, 1], got {p}"
        )));
    }
    Ok(h2(p))
}

/// Entropy of a (not necessarily normalized) list of weights; zeros skipped.
pub(crate) fn entropy_raw<'a>(probs: impl IntoIterator<Item = &'a f64>) -> f64 {
    probs.into_iter().map(|&p| plogp(p)).sum()
}

fn check_distribution<'a>(probs: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    let mut sum = 0.0;
    for (idx, &p) in probs.into_iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::NonFinite { idx, value: p });
        }
        if p < -tolerance::PROB {
            return Err(Error::NegativeProbability { idx, value: p });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > tolerance::PROB {
        return Err(Error::DistributionNotNormalized { sum });
    }
    Ok(())
}

/// Shannon entropy of a normalized distribution.
pub fn entropy(probs: &[f64]) -> Result<f64> {
    check_distribution(probs)?;
    Ok(entropy_raw(probs))
}

/// `I(X:Y)` for a joint given as `joint[x][y]`.
pub fn mutual_information(joint: &[Vec<f64>]) -> Result<f64> {
    check_distribution(joint.iter().flatten())?;
    let ny = joint.iter().map(Vec::len).max().unwrap_or(0);
    let px: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let py: Vec<f64> = (0..ny)
        .map(|y| joint.iter().map(|r| r.get(y).copied().unwrap_or(0.0)).sum())
        .collect();
    let hxy = entropy_raw(joint.iter().flatten());
    Ok((entropy_raw(&px) + entropy_raw(&py) - hxy).max(0.0))
}

/// `I(X:Y|Z)` for a joint given as `joint[x][y][z]`.
pub fn conditional_mutual_information(joint: &[Vec<Vec<f64>>]) -> Result<f64> {
    check_distribution(joint.iter().flatten().flatten())?;
    let ny = joint.iter().map(Vec::len).max().unwrap_or(0);
    let nz = joint.iter().flatten().map(Vec::len).max().unwrap_or(0);
    let at = |x: usize, y: usize, z: usize| -> f64 {
        joint[x]
            .get(y)
            .and_then(|r| r.get(z))
            .copied()
            .unwrap_or(0.0)
    };
    let mut total = 0.0;
    for z in 0..nz {
        let mut xz = vec![0.0; joint.len()];
        let mut yz = vec![0.0; ny];
        let mut xyz = Vec::with_capacity(joint.len() * ny);
        for (x, xzv) in xz.iter_mut().enumerate() {
            for (y, yzv) in yz.iter_mut().enumerate() {
                let p = at(x, y, z);
                *xzv += p;
                *yzv += p;
                xyz.push(p);
            }
        }
        let pz: f64 = xz.iter().sum();
        total += entropy_raw(&xz) + entropy_raw(&yz) - entropy_raw(&xyz) - plogp(pz);
    }
    Ok(total.max(0.0))
}

// Fast paths for binary (a, b) and an arbitrary Eve alphabet. The blocks are
// assumed normalized in total.

/// `I(A:B|E)`.
pub fn cmi_blocks(blocks: &[Block]) -> f64 {
    let mut total = 0.0;
    for blk in blocks {
        total += block_cmi_term(blk);
    }
    total.max(0.0)
}

/// Contribution of one Eve symbol to `I(A:B|E)`.
#[inline]
pub(crate) fn block_cmi_term(blk: &Block) -> f64 {
    let [[p00, p01], [p10, p11]] = *blk;
    let pa0 = p00 + p01;
    let pa1 = p10 + p11;
    let pb0 = p00 + p10;
    let pb1 = p01 + p11;
    let pe = pa0 + pa1;
    plogp(pa0) + plogp(pa1) + plogp(pb0) + plogp(pb1)
        - plogp(p00)
        - plogp(p01)
        - plogp(p10)
        - plogp(p11)
        - plogp(pe)
}

fn ab_marginal(blocks: &[Block]) -> Block {
    let mut m = [[0.0; 2]; 2];
    for blk in blocks {
        for a in 0..2 {
            for b in 0..2 {
                m[a][b] += blk[a][b];
            }
        }
    }
    m
}

/// `I(A:B)`.
pub fn mi_ab(blocks: &[Block]) -> f64 {
    block_cmi_term(&ab_marginal(blocks)).max(0.0)
}

/// `I(A:E)`.
pub fn mi_ae(blocks: &[Block]) -> f64 {
    let m = ab_marginal(blocks);
    let ha = h2(m[0][0] + m[0][1]);
    let mut h_a_given_e = 0.0;
    for blk in blocks {
        let a0 = blk[0][0] + blk[0][1];
        let a1 = blk[1][0] + blk[1][1];
        h_a_given_e += plogp(a0) + plogp(a1) - plogp(a0 + a1);
    }
    (ha - h_a_given_e).max(0.0)
}

/// `I(B:E)`.
pub fn mi_be(blocks: &[Block]) -> f64 {
    let transposed: Vec<Block> = blocks
        .iter()
        .map(|b| [[b[0][0], b[1][0]], [b[0][1], b[1][1]]])
        .collect();
    mi_ae(&transposed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((binary_entropy(0.11).unwrap() - 0.499_915_958_164_528_8).abs() < 1e-12);
        assert!(matches!(binary_entropy(-0.1), Err(Error::Domain(_))));
        assert!(matches!(binary_entropy(1.5), Err(Error::Domain(_))));
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn entropy_checks_normalization() {
        assert!((entropy(&[0.25; 4]).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(
            entropy(&[0.5, 0.4]),
            Err(Error::DistributionNotNormalized { .. })
        ));
        assert!(matches!(
            mutual_information(&[vec![0.5, 0.6], vec![0.0, 0.0]]),
            Err(Error::DistributionNotNormalized { .. })
        ));
    }

    #[test]
    fn perfectly_correlated_bits() {
        let j = vec![vec![0.5, 0.0], vec![0.0, 0.5]];
        assert!((mutual_information(&j).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn conditioning_on_xor_creates_correlation() {
        // X, Y uniform and independent, Z = X ⊕ Y: I(X:Y) = 0, I(X:Y|Z) = 1.
        let mut j = vec![vec![vec![0.0; 2]; 2]; 2];
        for x in 0..2 {
            for y in 0..2 {
                j[x][y][x ^ y] = 0.25;
            }
        }
        assert!((conditional_mutual_information(&j).unwrap() - 1.0).abs() < 1e-15);
    }

    fn random_blocks() -> impl Strategy<Value = Vec<Block>> {
        prop::collection::vec(prop::array::uniform4(0.0f64..1.0), 1..6).prop_map(|raw| {
            let s: f64 = raw.iter().flatten().sum::<f64>().max(1e-12);
            raw.iter()
                .map(|r| [[r[0] / s, r[1] / s], [r[2] / s, r[3] / s]])
                .collect()
        })
    }

    fn as_nested(blocks: &[Block]) -> Vec<Vec<Vec<f64>>> {
        (0..2)
            .map(|a| {
                (0..2)
                    .map(|b| blocks.iter().map(|blk| blk[a][b]).collect())
                    .collect()
            })
            .collect()
    }

    proptest! {
        #[test]
        fn fast_paths_agree_with_generic(blocks in random_blocks()) {
            let nested = as_nested(&blocks);
            let generic = conditional_mutual_information(&nested).unwrap();
            prop_assert!((generic - cmi_blocks(&blocks)).abs() < 1e-10);
            let ae: Vec<Vec<f64>> = (0..2)
                .map(|a| blocks.iter().map(|blk| blk[a][0] + blk[a][1]).collect())
                .collect();
            prop_assert!((mutual_information(&ae).unwrap() - mi_ae(&blocks)).abs() < 1e-10);
        }

        #[test]
        fn informations_are_bounded(blocks in random_blocks()) {
            for v in [cmi_blocks(&blocks), mi_ab(&blocks), mi_ae(&blocks), mi_be(&blocks)] {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            }
        }
    }
}
