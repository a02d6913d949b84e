//! Latent one-dimensional number line recovered by metric MDS.
//!
//! Classical (Torgerson) scaling double-centers the squared dissimilarities,
//! `B = -1/2 J (D∘D) J`, and takes `sqrt(λ₁) e₁` from the dominant eigenpair. The
//! eigenpair comes from deterministic power iteration restricted to the complement of
//! the constant vector (B annihilates it). An optional SMACOF pass refines the classical
//! solution when the dissimilarities are not Euclidean.
//!
//! Solutions are then anchored: reflected so that 1 lies left of the median, shifted so
//! that 1 sits at zero, and scaled so that the rightmost number sits at log10(9).

use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingCorpus, NumberFormat};
use crate::error::{Error, Result};
use crate::simspace::{pair_similarities, DissimilarityMatrix};
use crate::stats::pearson;

/// Convergence target used to size the fixed iteration budget.
const POWER_EPS: f64 = 1e-14;
const POWER_MAX_ITERS: usize = 20_000;
/// Below this the matrix has no 1-D structure to recover.
const MIN_EIGENVALUE: f64 = 1e-12;

pub const SMACOF_ITERS: usize = 500;
pub const SMACOF_TOLERANCE: f64 = 1e-10;

/// 10 * ceil(log2(1 / eps)).
pub fn power_iteration_budget() -> usize {
    10 * (1.0 / POWER_EPS).log2().ceil() as usize
}

/// log10(1), ..., log10(9).
pub fn log_targets() -> [f64; 9] {
    std::array::from_fn(|i| ((i + 1) as f64).log10())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolutionSource {
    Cell {
        layer_index: usize,
        format: NumberFormat,
    },
    /// Mean dissimilarity over every layer of the listed formats.
    Aggregated { formats: Vec<NumberFormat> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumberLineSolution {
    /// Raw MDS coordinates for numbers 1..9.
    pub coordinates: [f64; 9],
    pub anchored_positions: [f64; 9],
    /// Pearson correlation of the anchored positions with log10(1..9).
    pub log_correlation: f64,
    /// |anchored position - log10(n)|.
    pub residuals: [f64; 9],
    pub source: SolutionSource,
    pub eigenvalue: f64,
    pub refined: bool,
}

fn matvec(m: &[f64], n: usize, v: &[f64], shift: f64, out: &mut [f64]) {
    for i in 0..n {
        let row = &m[i * n..(i + 1) * n];
        out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() + shift * v[i];
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn rayleigh(m: &[f64], n: usize, v: &[f64], scratch: &mut [f64]) -> f64 {
    matvec(m, n, v, 0.0, scratch);
    scratch.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Power iteration on `m + shift I`. Returns the Rayleigh quotient of `m` and the unit
/// iterate, or `None` when the iterate collapses to zero.
fn power_iterate(m: &[f64], n: usize, shift: f64, deflate: bool) -> Option<(f64, Vec<f64>)> {
    let mut v: Vec<f64> = if deflate {
        (0..n).map(|i| i as f64 - (n as f64 - 1.0) / 2.0).collect()
    } else {
        (0..n).map(|i| 1.0 + i as f64 / n as f64).collect()
    };
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let scale = norm(m).max(f64::MIN_POSITIVE);
    let budget = power_iteration_budget();
    let mut w = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    for iter in 1..=POWER_MAX_ITERS {
        matvec(m, n, &v, shift, &mut w);
        if deflate {
            remove_mean(&mut w);
        }
        let nw = norm(&w);
        if nw <= scale * 1e-300 || nw == 0.0 {
            return None;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        if iter >= budget {
            let lambda = rayleigh(m, n, &v, &mut scratch);
            let residual = scratch
                .iter()
                .zip(&v)
                .map(|(mv, vi)| (mv - lambda * vi).powi(2))
                .sum::<f64>()
                .sqrt();
            if residual <= 1e-13 * scale {
                break;
            }
        }
    }
    Some((rayleigh(m, n, &v, &mut scratch), v))
}

/// Largest algebraic eigenvalue of a symmetric `n x n` row-major matrix and its unit
/// eigenvector. With `deflate_constant` the search is restricted to vectors orthogonal
/// to the all-ones vector.
///
/// Plain power iteration finds the eigenvalue of largest magnitude; when that one is
/// negative the matrix is shifted by its magnitude and iterated again.
pub fn dominant_eigenpair(m: &[f64], n: usize, deflate_constant: bool) -> Option<(f64, Vec<f64>)> {
    assert_eq!(m.len(), n * n, "matrix must be n x n");
    let (lambda, v) = power_iterate(m, n, 0.0, deflate_constant)?;
    if lambda >= 0.0 {
        return Some((lambda, v));
    }
    power_iterate(m, n, -lambda, deflate_constant)
}

/// `-1/2 J (D∘D) J`, row-major.
pub fn double_center(d: &DissimilarityMatrix) -> [f64; 81] {
    let mut sq = [0.0; 81];
    for i in 0..9 {
        for j in 0..9 {
            sq[i * 9 + j] = d.get(i, j) * d.get(i, j);
        }
    }
    let row_means: [f64; 9] =
        std::array::from_fn(|i| sq[i * 9..i * 9 + 9].iter().sum::<f64>() / 9.0);
    let col_means: [f64; 9] =
        std::array::from_fn(|j| (0..9).map(|i| sq[i * 9 + j]).sum::<f64>() / 9.0);
    let grand = row_means.iter().sum::<f64>() / 9.0;
    let mut b = [0.0; 81];
    for i in 0..9 {
        for j in 0..9 {
            b[i * 9 + j] = -0.5 * (sq[i * 9 + j] - row_means[i] - col_means[j] + grand);
        }
    }
    b
}

/// Classical MDS in one dimension. Returns the coordinates and the dominant eigenvalue.
pub fn mds_1d_with_eigenvalue(d: &DissimilarityMatrix) -> Result<([f64; 9], f64)> {
    d.check()?;
    let b = double_center(d);
    let (lambda, mut v) = dominant_eigenpair(&b, 9, true)
        .ok_or_else(|| Error::degenerate("no one-dimensional structure: B is zero"))?;
    if lambda <= MIN_EIGENVALUE {
        return Err(Error::degenerate(format!(
            "no one-dimensional structure: dominant eigenvalue {lambda:e}"
        )));
    }
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let root = lambda.sqrt();
    Ok((std::array::from_fn(|i| root * v[i]), lambda))
}

pub fn mds_1d(d: &DissimilarityMatrix) -> Result<[f64; 9]> {
    mds_1d_with_eigenvalue(d).map(|(c, _)| c)
}

fn stress(d: &DissimilarityMatrix, x: &[f64; 9]) -> f64 {
    let mut s = 0.0;
    for i in 0..9 {
        for j in i + 1..9 {
            s += (d.get(i, j) - (x[i] - x[j]).abs()).powi(2);
        }
    }
    s
}

/// SMACOF stress majorization in one dimension, starting from `init`.
///
/// Uses the unit-weight Guttman transform `x_i <- (1/n) Σ_j δ_ij sign(x_i - x_j)`.
/// Stops after [`SMACOF_ITERS`] updates or once stress falls by less than
/// [`SMACOF_TOLERANCE`].
pub fn smacof_1d(d: &DissimilarityMatrix, init: &[f64; 9]) -> [f64; 9] {
    let mut x = *init;
    let mut current = stress(d, &x);
    for _ in 0..SMACOF_ITERS {
        let next: [f64; 9] = std::array::from_fn(|i| {
            (0..9)
                .filter(|&j| j != i)
                .map(|j| {
                    let diff = x[i] - x[j];
                    let sign = if diff > 0.0 {
                        1.0
                    } else if diff < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    d.get(i, j) * sign
                })
                .sum::<f64>()
                / 9.0
        });
        let s = stress(d, &next);
        if s > current {
            break;
        }
        let improvement = current - s;
        x = next;
        current = s;
        if improvement < SMACOF_TOLERANCE {
            break;
        }
    }
    x
}

/// Reflects, translates and scales raw coordinates, then scores them against log10.
pub fn anchor_and_score(
    coordinates: &[f64; 9],
    source: SolutionSource,
) -> Result<NumberLineSolution> {
    if coordinates.iter().any(|c| !c.is_finite()) {
        return Err(Error::validation("non-finite MDS coordinate"));
    }
    if coordinates.iter().all(|&c| c == coordinates[0]) {
        return Err(Error::degenerate("all MDS coordinates are equal"));
    }
    let mut sorted = *coordinates;
    sorted.sort_by(f64::total_cmp);
    let median = sorted[4];
    let mean = coordinates.iter().sum::<f64>() / 9.0;
    let one = coordinates[0];
    let reflect = one > median || (one == median && one > mean);
    let oriented: [f64; 9] = std::array::from_fn(|i| {
        if reflect {
            -coordinates[i]
        } else {
            coordinates[i]
        }
    });

    let origin = oriented[0];
    let shifted: [f64; 9] = std::array::from_fn(|i| oriented[i] - origin);
    let max = shifted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max <= 0.0 {
        return Err(Error::degenerate(
            "number 1 is the rightmost point; cannot scale",
        ));
    }
    let targets = log_targets();
    let scale = targets[8] / max;
    let anchored: [f64; 9] = std::array::from_fn(|i| shifted[i] * scale);
    let log_correlation = pearson(&anchored, &targets)?;
    let residuals = std::array::from_fn(|i| (anchored[i] - targets[i]).abs());
    Ok(NumberLineSolution {
        coordinates: *coordinates,
        anchored_positions: anchored,
        log_correlation,
        residuals,
        source,
        eigenvalue: f64::NAN,
        refined: false,
    })
}

/// MDS (optionally SMACOF-refined) followed by anchoring.
pub fn solve(
    d: &DissimilarityMatrix,
    refine: bool,
    source: SolutionSource,
) -> Result<NumberLineSolution> {
    let (mut coords, eigenvalue) = mds_1d_with_eigenvalue(d)?;
    if refine {
        coords = smacof_1d(d, &coords);
    }
    let mut solution = anchor_and_score(&coords, source)?;
    solution.eigenvalue = eigenvalue;
    solution.refined = refine;
    Ok(solution)
}

/// Mean dissimilarity matrix over all layers of `formats`, folded in (layer, format) order.
pub fn mean_dissimilarity(
    corpus: &EmbeddingCorpus,
    formats: &[NumberFormat],
) -> Result<DissimilarityMatrix> {
    let mut matrices = Vec::with_capacity(corpus.num_layers * formats.len());
    for layer in 0..corpus.num_layers {
        for &format in formats {
            let s = pair_similarities(corpus, layer, format)?;
            matrices.push(DissimilarityMatrix::from_similarities(&s));
        }
    }
    DissimilarityMatrix::mean(&matrices)
}

pub fn aggregated_numberline_for(
    corpus: &EmbeddingCorpus,
    formats: &[NumberFormat],
    refine: bool,
) -> Result<NumberLineSolution> {
    let d = mean_dissimilarity(corpus, formats)?;
    solve(
        &d,
        refine,
        SolutionSource::Aggregated {
            formats: formats.to_vec(),
        },
    )
}

/// Number line of the dissimilarity matrix averaged over every layer and format.
pub fn aggregated_numberline(corpus: &EmbeddingCorpus) -> Result<NumberLineSolution> {
    aggregated_numberline_for(corpus, &NumberFormat::ALL, false)
}
