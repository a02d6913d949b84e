//! Pairwise cosine similarities between the nine numbers of one (layer, format) slice.

use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingCorpus, NumberFormat};
use crate::error::{Error, Result};

pub const PAIR_COUNT: usize = 36;

/// An unordered comparison `lo` vs `hi` with `1 <= lo < hi <= 9`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NumberPair {
    pub lo: u8,
    pub hi: u8,
}

const fn build_pairs() -> [NumberPair; PAIR_COUNT] {
    let mut out = [NumberPair { lo: 0, hi: 0 }; PAIR_COUNT];
    let mut k = 0;
    let mut lo = 1;
    while lo <= 9 {
        let mut hi = lo + 1;
        while hi <= 9 {
            out[k] = NumberPair { lo, hi };
            k += 1;
            hi += 1;
        }
        lo += 1;
    }
    out
}

impl NumberPair {
    /// All 36 pairs in lexicographic (lo, hi) order.
    pub const ALL: [NumberPair; PAIR_COUNT] = build_pairs();

    pub fn new(a: u8, b: u8) -> Option<Self> {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        (lo >= 1 && hi <= 9 && lo != hi).then_some(NumberPair { lo, hi })
    }

    /// Position of this pair in [`NumberPair::ALL`].
    pub fn index(self) -> usize {
        let lo = usize::from(self.lo);
        let hi = usize::from(self.hi);
        // pairs preceding row `lo`: sum_{k=1}^{lo-1} (9 - k)
        (lo - 1) * (18 - lo) / 2 + (hi - lo - 1)
    }

    pub fn distance(self) -> u8 {
        self.hi - self.lo
    }

    pub fn ratio(self) -> f64 {
        f64::from(self.hi) / f64::from(self.lo)
    }
}

/// Cosine of the angle between `u` and `v`, clamped to [-1, 1].
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::validation(format!(
            "dimension mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let (mut dot, mut uu, mut vv) = (0.0, 0.0, 0.0);
    for (&a, &b) in u.iter().zip(v) {
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(Error::validation("cosine of a zero vector"));
    }
    Ok((dot / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0))
}

/// Min-max rescaling to [0, 1]. When every value is equal the result is all 0.5 and the
/// returned flag is set.
pub fn min_max_normalize(values: &[f64]) -> (Vec<f64>, bool) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if range > 0.0 {
        (values.iter().map(|v| (v - min) / range).collect(), false)
    } else {
        (vec![0.5; values.len()], true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSimilaritySet {
    pub layer_index: usize,
    pub format: NumberFormat,
    /// Cosine similarity per pair, indexed like [`NumberPair::ALL`].
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    /// Set when all raw similarities coincide and `normalized` fell back to 0.5.
    pub degenerate: bool,
}

impl PairSimilaritySet {
    pub fn from_raw(layer_index: usize, format: NumberFormat, raw: Vec<f64>) -> Result<Self> {
        if raw.len() != PAIR_COUNT {
            return Err(Error::validation(format!(
                "expected {PAIR_COUNT} pair similarities, got {}",
                raw.len()
            )));
        }
        let (normalized, degenerate) = min_max_normalize(&raw);
        Ok(Self {
            layer_index,
            format,
            raw,
            normalized,
            degenerate,
        })
    }

    pub fn raw(&self, pair: NumberPair) -> f64 {
        self.raw[pair.index()]
    }

    pub fn normalized(&self, pair: NumberPair) -> f64 {
        self.normalized[pair.index()]
    }
}

pub fn pair_similarities(
    corpus: &EmbeddingCorpus,
    layer: usize,
    format: NumberFormat,
) -> Result<PairSimilaritySet> {
    let vectors = corpus.slice(layer, format)?;
    let raw = NumberPair::ALL
        .iter()
        .map(|p| {
            cosine(
                vectors[usize::from(p.lo) - 1],
                vectors[usize::from(p.hi) - 1],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    PairSimilaritySet::from_raw(layer, format, raw)
}

/// 9x9 cosine dissimilarity matrix, row/column `i` holding number `i + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityMatrix(pub [[f64; 9]; 9]);

impl DissimilarityMatrix {
    /// `1 - cosine` off the diagonal, zero on it.
    pub fn from_similarities(s: &PairSimilaritySet) -> Self {
        let mut d = [[0.0; 9]; 9];
        for pair in NumberPair::ALL {
            let (i, j) = (usize::from(pair.lo) - 1, usize::from(pair.hi) - 1);
            let v = 1.0 - s.raw(pair);
            d[i][j] = v;
            d[j][i] = v;
        }
        Self(d)
    }

    /// Element-wise mean, folded in the order given.
    pub fn mean<'a>(matrices: impl IntoIterator<Item = &'a DissimilarityMatrix>) -> Result<Self> {
        let mut sum = [[0.0; 9]; 9];
        let mut count = 0usize;
        for m in matrices {
            for (row, src) in sum.iter_mut().zip(&m.0) {
                for (acc, v) in row.iter_mut().zip(src) {
                    *acc += v;
                }
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::validation("mean of zero dissimilarity matrices"));
        }
        let n = count as f64;
        for row in &mut sum {
            for v in row.iter_mut() {
                *v /= n;
            }
        }
        Ok(Self(sum))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    /// Symmetric, zero diagonal, non-negative and finite.
    pub fn check(&self) -> Result<()> {
        for i in 0..9 {
            if self.0[i][i] != 0.0 {
                return Err(Error::validation(format!("nonzero diagonal at {i}")));
            }
            for j in 0..9 {
                let v = self.0[i][j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::validation(format!(
                        "dissimilarity ({i},{j}) = {v} is not a finite non-negative value"
                    )));
                }
                if v != self.0[j][i] {
                    return Err(Error::validation(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(())
    }
}

/// [`DissimilarityMatrix::from_similarities`] as a free function.
pub fn dissimilarity_matrix(s: &PairSimilaritySet) -> DissimilarityMatrix {
    DissimilarityMatrix::from_similarities(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::toy_corpus;
    use proptest::prelude::*;

    #[test]
    fn pair_table() {
        assert_eq!(NumberPair::ALL.len(), 36);
        for (k, p) in NumberPair::ALL.iter().enumerate() {
            assert_eq!(p.index(), k);
            assert!(p.lo < p.hi);
        }
        assert_eq!(NumberPair::new(9, 1), Some(NumberPair { lo: 1, hi: 9 }));
        assert_eq!(NumberPair::new(3, 3), None);
        assert_eq!(NumberPair::new(0, 3), None);
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn cosine_errors() {
        assert!(cosine(&[0.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(cosine(&[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn identical_vectors_are_degenerate() {
        let mut c = toy_corpus(1, 4);
        for e in &mut c.entries {
            e.layers[0] = vec![0.3, -1.0, 2.0, 0.5];
        }
        let s = pair_similarities(&c, 0, NumberFormat::Digit).unwrap();
        assert!(s.raw.iter().all(|&v| v == 1.0));
        assert!(s.normalized.iter().all(|&v| v == 0.5));
        assert!(s.degenerate);
        let d = dissimilarity_matrix(&s);
        assert!(d.0.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn dissimilarity_definition() {
        let mut raw = vec![0.5; 36];
        raw[NumberPair::new(1, 2).unwrap().index()] = 0.9;
        let s = PairSimilaritySet::from_raw(0, NumberFormat::Digit, raw).unwrap();
        let d = dissimilarity_matrix(&s);
        assert!((d.get(0, 1) - 0.1).abs() < 1e-15);
        assert_eq!(d.get(0, 1), d.get(1, 0));
        d.check().unwrap();
    }

    #[test]
    fn power_of_two_scaling_is_bit_identical() {
        let c = toy_corpus(2, 5);
        let mut scaled = c.clone();
        for e in &mut scaled.entries {
            for v in &mut e.layers {
                v.iter_mut().for_each(|x| *x *= 8.0);
            }
        }
        for layer in 0..2 {
            for f in NumberFormat::ALL {
                assert_eq!(
                    pair_similarities(&c, layer, f).unwrap(),
                    pair_similarities(&scaled, layer, f).unwrap()
                );
            }
        }
    }

    #[test]
    fn non_dyadic_scaling_is_stable() {
        let c = toy_corpus(1, 5);
        let mut scaled = c.clone();
        for e in &mut scaled.entries {
            e.layers[0].iter_mut().for_each(|x| *x *= 7.3);
        }
        let a = pair_similarities(&c, 0, NumberFormat::LowercaseWord).unwrap();
        let b = pair_similarities(&scaled, 0, NumberFormat::LowercaseWord).unwrap();
        for (x, y) in a.raw.iter().zip(&b.raw) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in a.normalized.iter().zip(&b.normalized) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn layer_out_of_range() {
        let c = toy_corpus(2, 3);
        assert!(pair_similarities(&c, 2, NumberFormat::Digit).is_err());
    }

    fn nonzero_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, n)
            .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_bounded((u, v) in (1usize..12).prop_flat_map(|n| (nonzero_vec(n), nonzero_vec(n)))) {
            let a = cosine(&u, &v).unwrap();
            let b = cosine(&v, &u).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!((-1.0..=1.0).contains(&a));
        }

        #[test]
        fn normalization_spans_unit_interval(raw in prop::collection::vec(-1.0f64..1.0, 36)) {
            let (n, degenerate) = min_max_normalize(&raw);
            prop_assume!(!degenerate);
            let min = n.iter().copied().fold(f64::INFINITY, f64::min);
            let max = n.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(min, 0.0);
            prop_assert_eq!(max, 1.0);
        }

        #[test]
        fn dissimilarity_symmetric_zero_diag(raw in prop::collection::vec(-1.0f64..1.0, 36)) {
            let s = PairSimilaritySet::from_raw(0, NumberFormat::Digit, raw).unwrap();
            let d = dissimilarity_matrix(&s);
            prop_assert!(d.check().is_ok());
            for i in 0..9 {
                prop_assert_eq!(d.get(i, i), 0.0);
                for j in 0..9 {
                    prop_assert_eq!(d.get(i, j), d.get(j, i));
                    prop_assert!((0.0..=2.0).contains(&d.get(i, j)));
                }
            }
        }
    }
}
