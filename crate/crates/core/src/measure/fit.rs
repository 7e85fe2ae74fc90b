use crate::error::{LabError, Result};

use super::family::TestFunctionFamily;
use super::histogram::HistogramMeasure;

/// Result of single-linkage clustering under `d_P`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureCluster {
    /// Cluster averages, renormalized.
    pub representatives: Vec<HistogramMeasure>,
    /// Cluster label of each sample; labels are numbered by first appearance.
    pub assignments: Vec<usize>,
    pub l: usize,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Merge samples whose `d_P` is at most `threshold`, transitively.
pub fn cluster_measures(
    samples: &[HistogramMeasure],
    threshold: f64,
    family: &TestFunctionFamily,
) -> Result<MeasureCluster> {
    if samples.is_empty() {
        return Err(LabError::Empty("nothing to cluster".into()));
    }
    let moments = samples.iter().map(|s| family.moments(s)).collect::<Result<Vec<_>>>()?;
    let n = samples.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if family.distance_from_moments(&moments[i], &moments[j]) <= threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut assignments = Vec::with_capacity(n);
    let mut l = 0;
    for i in 0..n {
        let root = find(&mut parent, i);
        let label = *labels[root].get_or_insert_with(|| {
            l += 1;
            l - 1
        });
        assignments.push(label);
    }
    let representatives = (0..l)
        .map(|c| {
            let members: Vec<&HistogramMeasure> =
                samples.iter().zip(&assignments).filter(|(_, &a)| a == c).map(|(s, _)| s).collect();
            HistogramMeasure::mixture(&members, &vec![1.0; members.len()])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasureCluster { representatives, assignments, l })
}

/// Simplex-constrained least-squares weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexFit {
    pub weights: Vec<f64>,
    /// Euclidean norm of the bin-mass residual.
    pub residual: f64,
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Nonnegative weights summing to one that minimize `|sum_i w_i basis_i - mu|_2`.
///
/// Every support set is tried: on a support the equality-constrained problem
/// is solved exactly, and the best feasible candidate wins (ties go to the
/// support enumerated first, which favors lower indices).
pub fn convex_fit(mu: &HistogramMeasure, basis: &[HistogramMeasure]) -> Result<ConvexFit> {
    if basis.is_empty() {
        return Err(LabError::Empty("empty basis".into()));
    }
    if basis.len() > 20 {
        return Err(LabError::InvalidParams(format!("basis of size {} is too large", basis.len())));
    }
    for b in basis {
        mu.check_compatible(b)?;
    }
    let p = basis.len();
    let gram: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| dot(&basis[i].masses, &basis[j].masses)).collect())
        .collect();
    let rhs: Vec<f64> = basis.iter().map(|b| dot(&b.masses, &mu.masses)).collect();
    let mm = dot(&mu.masses, &mu.masses);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << p) {
        let support: Vec<usize> = (0..p).filter(|i| mask & (1 << i) != 0).collect();
        let k = support.len();
        let mut a = vec![vec![0.0; k + 1]; k + 1];
        let mut b = vec![0.0; k + 1];
        for (r, &i) in support.iter().enumerate() {
            for (c, &j) in support.iter().enumerate() {
                a[r][c] = gram[i][j];
            }
            a[r][k] = 1.0;
            a[k][r] = 1.0;
            b[r] = rhs[i];
        }
        b[k] = 1.0;
        let Some(sol) = solve(a, b) else { continue };
        if sol[..k].iter().any(|&w| w < -1e-12) {
            continue;
        }
        let mut w = vec![0.0; p];
        for (r, &i) in support.iter().enumerate() {
            w[i] = sol[r].max(0.0);
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        // |Bw - mu|^2 = w'Gw - 2 w'r + mu'mu
        let mut sq = mm;
        for i in 0..p {
            sq -= 2.0 * w[i] * rhs[i];
            for j in 0..p {
                sq += w[i] * w[j] * gram[i][j];
            }
        }
        let sq = sq.max(0.0);
        if best.as_ref().is_none_or(|(b, _)| sq < *b - 1e-15) {
            best = Some((sq, w));
        }
    }
    let (_, weights) = best.ok_or_else(|| LabError::Empty("no feasible convex fit".into()))?;
    let residual = mu
        .masses
        .iter()
        .enumerate()
        .map(|(c, m)| {
            let r: f64 = basis.iter().zip(&weights).map(|(b, w)| w * b.masses[c]).sum::<f64>() - m;
            r * r
        })
        .sum::<f64>()
        .sqrt();
    Ok(ConvexFit { weights, residual })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
