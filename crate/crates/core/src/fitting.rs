//! Least-squares curve fits: a straight line `a + b x` and a negative exponential
//! `a e^(-b x) + c`, both reporting R².
//!
//! Inputs are sorted before any summation, so results do not depend on point order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this total sum of squares the data is treated as flat.
const FLAT_TOLERANCE: f64 = 1e-12;

/// Bounds and resolution of the decay-rate search.
pub const NEGEXP_B_MIN: f64 = 1e-3;
pub const NEGEXP_B_MAX: f64 = 10.0;
pub const NEGEXP_GRID: usize = 256;
const GOLDEN_WIDTH: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegExpFit {
    pub a: f64,
    /// Decay rate, constrained to `[NEGEXP_B_MIN, NEGEXP_B_MAX]`.
    pub b: f64,
    pub c: f64,
    pub r_squared: f64,
    pub sse: f64,
}

impl NegExpFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.a * (-self.b * x).exp() + self.c
    }
}

fn sorted_points(points: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if let Some(p) = points
        .iter()
        .find(|(x, y)| !x.is_finite() || !y.is_finite())
    {
        return Err(Error::validation(format!("non-finite point {p:?}")));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    Ok(pts)
}

fn distinct_x(sorted: &[(f64, f64)]) -> usize {
    let mut n = 0;
    let mut last = None;
    for &(x, _) in sorted {
        if last != Some(x) {
            n += 1;
            last = Some(x);
        }
    }
    n
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// `1 - SS_res / SS_tot`; flat data scores 1 when fitted exactly and 0 otherwise.
pub fn r_squared(ss_res: f64, ss_tot: f64) -> f64 {
    if ss_tot < FLAT_TOLERANCE {
        if ss_res < FLAT_TOLERANCE {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

fn total_sum_of_squares(pts: &[(f64, f64)]) -> f64 {
    let ybar = mean(pts.iter().map(|p| p.1));
    pts.iter().map(|p| (p.1 - ybar).powi(2)).sum()
}

/// Ordinary least-squares line through `points`.
pub fn fit_line(points: &[(f64, f64)]) -> Result<LinearFit> {
    let pts = sorted_points(points)?;
    if pts.len() < 2 || distinct_x(&pts) < 2 {
        return Err(Error::validation(
            "line fit needs at least 2 points with 2 distinct x values",
        ));
    }
    let xbar = mean(pts.iter().map(|p| p.0));
    let ybar = mean(pts.iter().map(|p| p.1));
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in &pts {
        sxx += (x - xbar) * (x - xbar);
        sxy += (x - xbar) * (y - ybar);
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = pts
        .iter()
        .map(|&(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let ss_tot = total_sum_of_squares(&pts);
    Ok(LinearFit {
        intercept,
        slope,
        r_squared: r_squared(ss_res, ss_tot),
    })
}

/// Best (a, c) for a fixed decay rate, with the resulting SSE.
fn solve_amplitude(pts: &[(f64, f64)], b: f64) -> (f64, f64, f64) {
    let basis: Vec<f64> = pts.iter().map(|&(x, _)| (-b * x).exp()).collect();
    let fbar = mean(basis.iter().copied());
    let ybar = mean(pts.iter().map(|p| p.1));
    let (mut sff, mut sfy) = (0.0, 0.0);
    for (f, &(_, y)) in basis.iter().zip(pts) {
        sff += (f - fbar) * (f - fbar);
        sfy += (f - fbar) * (y - ybar);
    }
    let (a, c) = if sff > 0.0 {
        let a = sfy / sff;
        (a, ybar - a * fbar)
    } else {
        (0.0, ybar)
    };
    let sse = basis
        .iter()
        .zip(pts)
        .map(|(f, &(_, y))| (y - a * f - c).powi(2))
        .sum();
    (a, c, sse)
}

/// The log-spaced decay-rate grid searched before refinement.
pub fn negexp_grid() -> Vec<f64> {
    let (lo, hi) = (NEGEXP_B_MIN.log10(), NEGEXP_B_MAX.log10());
    let step = (hi - lo) / (NEGEXP_GRID - 1) as f64;
    (0..NEGEXP_GRID)
        .map(|k| match k {
            0 => NEGEXP_B_MIN,
            k if k == NEGEXP_GRID - 1 => NEGEXP_B_MAX,
            k => 10f64.powf(lo + step * k as f64),
        })
        .collect()
}

/// Least-squares fit of `a e^(-b x) + c`.
///
/// The decay rate is profiled: for each candidate `b` the amplitude and offset have a
/// closed-form solution. A 256-point log grid over `[1e-3, 10]` picks the bracket and
/// golden-section search narrows it to width `1e-10`. The best candidate evaluated
/// anywhere is returned, so the result never scores worse than the grid.
pub fn fit_negexp(points: &[(f64, f64)]) -> Result<NegExpFit> {
    let pts = sorted_points(points)?;
    if pts.len() < 4 || distinct_x(&pts) < 3 {
        return Err(Error::validation(
            "negative-exponential fit needs at least 4 points with 3 distinct x values",
        ));
    }

    let grid = negexp_grid();
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0); // (sse, a, b, c)
    let mut best_k = 0;
    for (k, &b) in grid.iter().enumerate() {
        let (a, c, sse) = solve_amplitude(&pts, b);
        if sse < best.0 {
            best = (sse, a, b, c);
            best_k = k;
        }
    }

    let mut consider = |b: f64| {
        let (a, c, sse) = solve_amplitude(&pts, b);
        if sse < best.0 {
            best = (sse, a, b, c);
        }
        sse
    };

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut lo = grid[best_k.saturating_sub(1)];
    let mut hi = grid[(best_k + 1).min(NEGEXP_GRID - 1)];
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = consider(x1);
    let mut f2 = consider(x2);
    while hi - lo >= GOLDEN_WIDTH {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = consider(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = consider(x2);
        }
    }
    consider(0.5 * (lo + hi));

    let (sse, a, b, c) = best;
    Ok(NegExpFit {
        a,
        b,
        c,
        r_squared: r_squared(sse, total_sum_of_squares(&pts)),
        sse,
    })
}

/// Sum of squared residuals of `fit` over `points`.
pub fn negexp_sse(fit: &NegExpFit, points: &[(f64, f64)]) -> f64 {
    points
        .iter()
        .map(|&(x, y)| (y - fit.predict(x)).powi(2))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn collinear_line() {
        let f = fit_line(&[(1.0, 0.9), (2.0, 0.7), (3.0, 0.5)]).unwrap();
        assert!((f.intercept - 1.1).abs() < 1e-12);
        assert!((f.slope + 0.2).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_covariance_line() {
        let f = fit_line(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).unwrap();
        assert!(f.slope.abs() < 1e-15);
        assert!((f.intercept - 2.0 / 3.0).abs() < 1e-15);
        assert!(f.r_squared.abs() < 1e-15);
    }

    #[test]
    fn noisy_line_high_r_squared() {
        // y = 0.95 - 0.1 x with fixed offsets inside +-0.001
        let noise = [
            0.0007, -0.0004, 0.0009, -0.001, 0.0002, -0.0006, 0.0003, -0.0008,
        ];
        let pts: Vec<_> = (1..=8)
            .map(|x| (x as f64, 0.95 - 0.1 * x as f64 + noise[x - 1]))
            .collect();
        let f = fit_line(&pts).unwrap();
        assert!(f.r_squared >= 0.999, "{}", f.r_squared);
    }

    #[test]
    fn line_rejects_degenerate_input() {
        assert!(fit_line(&[(1.0, 1.0)]).is_err());
        assert!(fit_line(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
        assert!(fit_line(&[(1.0, f64::NAN), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn flat_line_is_perfect() {
        let f = fit_line(&[(1.0, 0.4), (2.0, 0.4), (3.0, 0.4)]).unwrap();
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn negexp_recovers_generator() {
        let pts: Vec<_> = (0..=64)
            .map(|k| {
                let x = 1.0 + 0.125 * k as f64;
                (x, 2.0 * (-0.5 * x).exp() + 0.1)
            })
            .collect();
        let f = fit_negexp(&pts).unwrap();
        assert!((f.a - 2.0).abs() / 2.0 < 1e-4, "{f:?}");
        assert!((f.b - 0.5).abs() / 0.5 < 1e-4, "{f:?}");
        assert!((f.c - 0.1).abs() / 0.1 < 1e-4, "{f:?}");
        assert!(f.r_squared >= 1.0 - 1e-9);
        assert!(negexp_sse(&f, &pts) < 1e-12);
    }

    #[test]
    fn negexp_flat_data() {
        let pts: Vec<_> = (1..=8).map(|x| (x as f64, 0.4)).collect();
        let f = fit_negexp(&pts).unwrap();
        assert!(f.a.abs() < 1e-12);
        assert!((f.c - 0.4).abs() < 1e-12);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn negexp_increasing_data_scores_worse_than_decay() {
        let rising: Vec<_> = (1..=8).map(|x| (x as f64, x as f64)).collect();
        let decay: Vec<_> = (1..=8).map(|x| (x as f64, (-(x as f64)).exp())).collect();
        let fr = fit_negexp(&rising).unwrap();
        let fd = fit_negexp(&decay).unwrap();
        assert!(fr.r_squared <= fd.r_squared);
        assert_eq!(fr.b, NEGEXP_B_MIN);
    }

    #[test]
    fn negexp_needs_enough_points() {
        assert!(fit_negexp(&[(1.0, 1.0), (2.0, 0.5), (3.0, 0.2)]).is_err());
        assert!(fit_negexp(&[(1.0, 1.0), (1.0, 0.5), (2.0, 0.2), (2.0, 0.1)]).is_err());
    }

    #[test]
    fn grid_shape() {
        let g = negexp_grid();
        assert_eq!(g.len(), 256);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[255], 10.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    fn points(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((1.0f64..9.0, -1.0f64..1.0), n)
    }

    proptest! {
        #[test]
        fn line_residuals_sum_to_zero(pts in points(3..20)) {
            prop_assume!(distinct_x(&sorted_points(&pts).unwrap()) >= 2);
            let f = fit_line(&pts).unwrap();
            let sum: f64 = pts.iter().map(|&(x, y)| y - f.predict(x)).sum();
            prop_assert!(sum.abs() < 1e-9);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f.r_squared));
        }

        #[test]
        fn fits_ignore_point_order(pts in points(4..16), seed in any::<u64>()) {
            prop_assume!(distinct_x(&sorted_points(&pts).unwrap()) >= 3);
            let mut shuffled = pts.clone();
            // deterministic Fisher-Yates driven by an LCG
            let mut s = seed;
            for i in (1..shuffled.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(fit_line(&pts).unwrap(), fit_line(&shuffled).unwrap());
            prop_assert_eq!(fit_negexp(&pts).unwrap(), fit_negexp(&shuffled).unwrap());
        }

        #[test]
        fn negexp_beats_constant_model(pts in points(4..16)) {
            prop_assume!(distinct_x(&sorted_points(&pts).unwrap()) >= 3);
            let f = fit_negexp(&pts).unwrap();
            prop_assert!(f.r_squared >= -1e-12);
        }
    }
}
