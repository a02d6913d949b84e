//! Distance, size and ratio effects over one [`PairSimilaritySet`].
//!
//! * distance: mean similarity per `hi - lo` (8 points), line fit.
//! * size: mean similarity per `min(lo, hi)` (8 points), line fit.
//! * ratio: similarity against `hi / lo` (36 points), negative-exponential fit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::NumberFormat;
use crate::error::Result;
use crate::fitting::{fit_line, fit_negexp, LinearFit, NegExpFit};
use crate::simspace::{min_max_normalize, NumberPair, PairSimilaritySet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    Distance,
    Size,
    Ratio,
}

impl EffectKind {
    pub const ALL: [EffectKind; 3] = [EffectKind::Distance, EffectKind::Size, EffectKind::Ratio];

    pub fn as_str(self) -> &'static str {
        match self {
            EffectKind::Distance => "distance",
            EffectKind::Size => "size",
            EffectKind::Ratio => "ratio",
        }
    }
}

/// Order of averaging and min-max normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Average raw cosines per group, then rescale the group means to [0, 1].
    GroupThenNormalize,
    /// Rescale the 36 cosines to [0, 1], then average per group.
    NormalizeThenGroup,
}

impl Aggregation {
    pub fn default_for(kind: EffectKind) -> Self {
        match kind {
            EffectKind::Distance => Aggregation::GroupThenNormalize,
            EffectKind::Size | EffectKind::Ratio => Aggregation::NormalizeThenGroup,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::GroupThenNormalize => "group_then_normalize",
            Aggregation::NormalizeThenGroup => "normalize_then_group",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectOptions {
    /// Overrides the per-effect default order when set.
    pub order: Option<Aggregation>,
    /// Collapse pairs sharing a ratio (e.g. 1:2, 2:4, 3:6, 4:8) into one averaged point.
    pub ratio_average_duplicates: bool,
}

impl EffectOptions {
    pub fn order_for(&self, kind: EffectKind) -> Aggregation {
        self.order.unwrap_or(Aggregation::default_for(kind))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Fit {
    Linear(LinearFit),
    NegExp(NegExpFit),
}

impl Fit {
    pub fn predict(&self, x: f64) -> f64 {
        match self {
            Fit::Linear(f) => f.predict(x),
            Fit::NegExp(f) => f.predict(x),
        }
    }

    pub fn r_squared(&self) -> f64 {
        match self {
            Fit::Linear(f) => f.r_squared,
            Fit::NegExp(f) => f.r_squared,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectFit {
    pub effect_kind: EffectKind,
    pub layer_index: usize,
    pub format: NumberFormat,
    pub aggregation: Aggregation,
    pub duplicates_averaged: bool,
    /// The (x, y) points that were fitted.
    pub points: Vec<(f64, f64)>,
    pub fit: Fit,
    pub r_squared: f64,
}

/// Groups the 36 values by `key` and returns `(key, mean)` in key order.
fn group_means<K: Ord>(values: &[f64], key: impl Fn(NumberPair) -> K) -> Vec<(K, f64)> {
    let mut groups: BTreeMap<K, (f64, usize)> = BTreeMap::new();
    for pair in NumberPair::ALL {
        let slot = groups.entry(key(pair)).or_insert((0.0, 0));
        slot.0 += values[pair.index()];
        slot.1 += 1;
    }
    groups
        .into_iter()
        .map(|(k, (sum, n))| (k, sum / n as f64))
        .collect()
}

fn grouped<K: Ord>(
    s: &PairSimilaritySet,
    order: Aggregation,
    key: impl Fn(NumberPair) -> K,
    x_of: impl Fn(&K) -> f64,
) -> Vec<(f64, f64)> {
    let (keys, ys): (Vec<K>, Vec<f64>) = match order {
        Aggregation::GroupThenNormalize => {
            let (keys, means): (Vec<K>, Vec<f64>) = group_means(&s.raw, key).into_iter().unzip();
            (keys, min_max_normalize(&means).0)
        }
        Aggregation::NormalizeThenGroup => group_means(&s.normalized, key).into_iter().unzip(),
    };
    keys.iter().map(x_of).zip(ys).collect()
}

/// Reduced fraction `hi/lo`, used as an exact grouping key for ratios.
fn reduced_ratio(pair: NumberPair) -> (u8, u8) {
    fn gcd(a: u8, b: u8) -> u8 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let g = gcd(pair.hi, pair.lo);
    (pair.hi / g, pair.lo / g)
}

/// The points each effect fits, before fitting.
pub fn effect_points(
    kind: EffectKind,
    s: &PairSimilaritySet,
    opts: &EffectOptions,
) -> Vec<(f64, f64)> {
    let order = opts.order_for(kind);
    match kind {
        EffectKind::Distance => grouped(s, order, |p| p.distance(), |&d| f64::from(d)),
        EffectKind::Size => grouped(s, order, |p| p.lo, |&m| f64::from(m)),
        EffectKind::Ratio if opts.ratio_average_duplicates => {
            let mut pts = grouped(s, order, reduced_ratio, |&(n, d)| {
                f64::from(n) / f64::from(d)
            });
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            pts
        }
        // a single min-max pass over 36 values gives the same points in either order
        EffectKind::Ratio => NumberPair::ALL
            .iter()
            .map(|&p| (p.ratio(), s.normalized(p)))
            .collect(),
    }
}

pub fn run_effect(
    kind: EffectKind,
    s: &PairSimilaritySet,
    opts: &EffectOptions,
) -> Result<EffectFit> {
    let points = effect_points(kind, s, opts);
    let fit = match kind {
        EffectKind::Distance | EffectKind::Size => Fit::Linear(fit_line(&points)?),
        EffectKind::Ratio => Fit::NegExp(fit_negexp(&points)?),
    };
    Ok(EffectFit {
        effect_kind: kind,
        layer_index: s.layer_index,
        format: s.format,
        aggregation: opts.order_for(kind),
        duplicates_averaged: kind == EffectKind::Ratio && opts.ratio_average_duplicates,
        r_squared: fit.r_squared(),
        points,
        fit,
    })
}

pub fn distance_effect(s: &PairSimilaritySet) -> Result<EffectFit> {
    run_effect(EffectKind::Distance, s, &EffectOptions::default())
}

pub fn size_effect(s: &PairSimilaritySet) -> Result<EffectFit> {
    run_effect(EffectKind::Size, s, &EffectOptions::default())
}

pub fn ratio_effect(s: &PairSimilaritySet) -> Result<EffectFit> {
    run_effect(EffectKind::Ratio, s, &EffectOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set_from(f: impl Fn(NumberPair) -> f64) -> PairSimilaritySet {
        let raw = NumberPair::ALL.iter().map(|&p| f(p)).collect();
        PairSimilaritySet::from_raw(3, NumberFormat::Digit, raw).unwrap()
    }

    #[test]
    fn group_sizes() {
        let counts = group_means(&[1.0; 36], |p| p.distance());
        assert_eq!(counts.len(), 8);
        let sizes: Vec<usize> = (1..=8u8)
            .map(|d| NumberPair::ALL.iter().filter(|p| p.distance() == d).count())
            .collect();
        assert_eq!(sizes, vec![8, 7, 6, 5, 4, 3, 2, 1]);
        let only: Vec<_> = NumberPair::ALL
            .iter()
            .filter(|p| p.distance() == 8)
            .collect();
        assert_eq!(only, vec![&NumberPair { lo: 1, hi: 9 }]);
        let size8: Vec<_> = NumberPair::ALL.iter().filter(|p| p.lo == 8).collect();
        assert_eq!(size8, vec![&NumberPair { lo: 8, hi: 9 }]);
    }

    #[test]
    fn ratio_x_multiset_is_fixed() {
        let s = set_from(|p| 1.0 / p.ratio());
        let fit = ratio_effect(&s).unwrap();
        assert_eq!(fit.points.len(), 36);
        let twos = fit.points.iter().filter(|(x, _)| *x == 2.0).count();
        assert_eq!(twos, 4);
        let mut xs: Vec<f64> = fit.points.iter().map(|p| p.0).collect();
        let mut expected: Vec<f64> = (1..=9u8)
            .flat_map(|lo| (lo + 1..=9).map(move |hi| f64::from(hi) / f64::from(lo)))
            .collect();
        xs.sort_by(f64::total_cmp);
        expected.sort_by(f64::total_cmp);
        assert_eq!(xs, expected);
    }

    #[test]
    fn ratio_duplicate_averaging() {
        let s = set_from(|p| 1.0 / p.ratio() + 0.01 * f64::from(p.lo));
        let opts = EffectOptions {
            ratio_average_duplicates: true,
            ..Default::default()
        };
        let fit = run_effect(EffectKind::Ratio, &s, &opts).unwrap();
        assert_eq!(fit.points.len(), 27);
        assert!(fit.duplicates_averaged);
        let at_two: Vec<_> = fit.points.iter().filter(|p| p.0 == 2.0).collect();
        assert_eq!(at_two.len(), 1);
        let expected = [1, 2, 3, 4]
            .map(|lo| s.normalized(NumberPair::new(lo, 2 * lo).unwrap()))
            .iter()
            .sum::<f64>()
            / 4.0;
        assert!((at_two[0].1 - expected).abs() < 1e-15);
    }

    #[test]
    fn distance_effect_normalizes_group_means() {
        let s = set_from(|p| 0.9 - 0.05 * f64::from(p.distance()));
        let fit = distance_effect(&s).unwrap();
        assert_eq!(fit.points.len(), 8);
        assert_eq!(fit.points[0], (1.0, 1.0));
        assert_eq!(fit.points[7], (8.0, 0.0));
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.aggregation, Aggregation::GroupThenNormalize);
        match fit.fit {
            Fit::Linear(l) => assert!(l.slope < 0.0),
            Fit::NegExp(_) => panic!("distance uses a line"),
        }
    }

    #[test]
    fn size_effect_averages_normalized_values() {
        let s = set_from(|p| f64::from(p.lo) * 0.1 - f64::from(p.distance()) * 0.01);
        let fit = size_effect(&s).unwrap();
        assert_eq!(fit.points.len(), 8);
        let m8 = s.normalized(NumberPair::new(8, 9).unwrap());
        assert_eq!(fit.points[7], (8.0, m8));
        assert_eq!(fit.aggregation, Aggregation::NormalizeThenGroup);
    }

    #[test]
    fn order_override_is_recorded() {
        let s = set_from(|p| 1.0 / p.ratio());
        let opts = EffectOptions {
            order: Some(Aggregation::NormalizeThenGroup),
            ..Default::default()
        };
        let fit = run_effect(EffectKind::Distance, &s, &opts).unwrap();
        assert_eq!(fit.aggregation, Aggregation::NormalizeThenGroup);
        // means of normalized values are not rescaled again
        let d8 = s.normalized(NumberPair::new(1, 9).unwrap());
        assert_eq!(fit.points[7].1, d8);
    }

    proptest! {
        #[test]
        fn affine_decay_in_distance_is_perfectly_linear(a in -0.5f64..0.5, b in 0.001f64..0.1) {
            let s = set_from(|p| a - b * f64::from(p.distance()));
            let fit = distance_effect(&s).unwrap();
            prop_assert!((fit.r_squared - 1.0).abs() < 1e-9);
        }

        #[test]
        fn r_squared_is_affine_invariant_in_y(
            raw in prop::collection::vec(-1.0f64..1.0, 36),
            alpha in 0.1f64..10.0,
            beta in -5.0f64..5.0,
        ) {
            let base = PairSimilaritySet::from_raw(0, NumberFormat::Digit, raw.clone()).unwrap();
            prop_assume!(!base.degenerate);
            for kind in EffectKind::ALL {
                let opts = EffectOptions::default();
                let pts = effect_points(kind, &base, &opts);
                let moved: Vec<_> = pts.iter().map(|&(x, y)| (x, alpha * y + beta)).collect();
                let (r1, r2) = match kind {
                    EffectKind::Ratio => (
                        fit_negexp(&pts).unwrap().r_squared,
                        fit_negexp(&moved).unwrap().r_squared,
                    ),
                    _ => (fit_line(&pts).unwrap().r_squared, fit_line(&moved).unwrap().r_squared),
                };
                prop_assert!((r1 - r2).abs() < 1e-8, "{:?}: {} vs {}", kind, r1, r2);
            }
        }

        #[test]
        fn effects_ignore_raw_affine_rescaling(
            raw in prop::collection::vec(-1.0f64..1.0, 36),
            alpha in 0.1f64..1.0,
        ) {
            let a = PairSimilaritySet::from_raw(0, NumberFormat::Digit, raw.clone()).unwrap();
            prop_assume!(!a.degenerate);
            let b = PairSimilaritySet::from_raw(0, NumberFormat::Digit,
                raw.iter().map(|v| alpha * v).collect()).unwrap();
            for kind in EffectKind::ALL {
                let opts = EffectOptions::default();
                let ra = run_effect(kind, &a, &opts).unwrap().r_squared;
                let rb = run_effect(kind, &b, &opts).unwrap().r_squared;
                prop_assert!((ra - rb).abs() < 1e-8);
            }
        }
    }
}
