//! Finite semi-metric and antipodal spaces.
//!
//! A finite semi-metric is a labelled point set with a symmetric,
//! positive-off-diagonal separation matrix; no triangle inequality is
//! assumed. An antipodal space additionally has diameter exactly one and
//! an antipode (a point at separation one) for every point. These are the
//! boundary objects everything else in the crate is built over.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for structural float equalities.
pub const STRUCTURAL_TOL: f64 = 1e-12;

/// Default residual threshold certifying Moebius equivalence.
pub const EQUIVALENCE_TOL: f64 = 1e-8;

/// A finite labelled point set with a symmetric positive separation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSemiMetric {
    labels: Vec<String>,
    n: usize,
    /// Row-major n x n separation matrix.
    rho: Vec<f64>,
}

/// Wire format for the JSON space schema.
#[derive(Serialize, Deserialize)]
struct SpaceJson {
    labels: Vec<String>,
    rho: Vec<Vec<f64>>,
}

impl FiniteSemiMetric {
    /// Validates a square matrix as a semi-metric: symmetry, zero diagonal,
    /// strictly positive off-diagonal, at least two points.
    pub fn validate(labels: Vec<String>, matrix: &[Vec<f64>]) -> Result<Self> {
        let n = matrix.len();
        if n < 2 {
            return Err(Error::TooFewPoints { required: 2, got: n });
        }
        if labels.len() != n {
            return Err(Error::LabelCountMismatch { labels: labels.len(), n });
        }
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSquare { row: i, len: row.len(), n });
            }
        }
        for i in 0..n {
            if matrix[i][i] != 0.0 {
                return Err(Error::NonzeroDiagonal { i, value: matrix[i][i] });
            }
            for j in (i + 1)..n {
                let a = matrix[i][j];
                let b = matrix[j][i];
                if a != b {
                    return Err(Error::AsymmetricMatrix { i, j, a, b });
                }
                if a <= 0.0 || !a.is_finite() {
                    return Err(Error::NonpositiveOffDiagonal { i, j, value: a });
                }
            }
        }
        let mut flat = Vec::with_capacity(n * n);
        for row in matrix {
            flat.extend_from_slice(row);
        }
        Ok(Self { labels, n, rho: flat })
    }

    /// Builds a space with default labels "0", "1", ...
    pub fn from_matrix(matrix: &[Vec<f64>]) -> Result<Self> {
        let labels = (0..matrix.len()).map(|i| i.to_string()).collect();
        Self::validate(labels, matrix)
    }

    pub(crate) fn from_flat_unchecked(labels: Vec<String>, n: usize, rho: Vec<f64>) -> Self {
        debug_assert_eq!(labels.len(), n);
        debug_assert_eq!(rho.len(), n * n);
        Self { labels, n, rho }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    /// Separation between points `i` and `j`.
    #[inline]
    pub fn rho(&self, i: usize, j: usize) -> f64 {
        self.rho[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rho[i * self.n..(i + 1) * self.n]
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    /// Largest off-diagonal separation.
    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                d = d.max(self.rho(i, j));
            }
        }
        d
    }

    /// Smallest off-diagonal separation.
    pub fn min_separation(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                m = m.min(self.rho(i, j));
            }
        }
        m
    }

    /// Rescales so the diameter is exactly one; ratios are preserved.
    pub fn normalize_diameter(&self) -> Self {
        let d = self.diameter();
        let mut out = self.clone();
        if d == 1.0 {
            return out;
        }
        for v in &mut out.rho {
            *v /= d;
        }
        // Snap the attaining entries so the new diameter is exact.
        for i in 0..out.n {
            for j in 0..out.n {
                if i != j && self.rho(i, j) == d {
                    out.rho[i * out.n + j] = 1.0;
                }
            }
        }
        out
    }

    /// Cross-ratio rho(a,c) rho(b,d) / (rho(a,d) rho(b,c)) of four distinct points.
    pub fn cross_ratio(&self, a: usize, b: usize, c: usize, d: usize) -> Result<f64> {
        if self.n < 4 {
            return Err(Error::TooFewPoints { required: 4, got: self.n });
        }
        if a == b || a == c || a == d || b == c || b == d || c == d {
            return Err(Error::NonDistinctPoints(a, b, c, d));
        }
        Ok(self.rho(a, c) * self.rho(b, d) / (self.rho(a, d) * self.rho(b, c)))
    }

    /// Smallest K with rho(i,k) <= K * max(rho(i,j), rho(j,k)) over all triples.
    /// Finite spaces always yield a finite K >= 1.
    pub fn quasimetric_constant(&self) -> f64 {
        let mut k = 1.0f64;
        for i in 0..self.n {
            for kk in 0..self.n {
                if i == kk {
                    continue;
                }
                let lhs = self.rho(i, kk);
                for j in 0..self.n {
                    let den = self.rho(i, j).max(self.rho(j, kk));
                    if den > 0.0 {
                        k = k.max(lhs / den);
                    }
                }
            }
        }
        k
    }

    /// Worst triangle-inequality defect rho(i,k) - rho(i,j) - rho(j,k).
    pub fn triangle_defect(&self) -> (f64, (usize, usize, usize)) {
        let mut worst = f64::NEG_INFINITY;
        let mut at = (0, 0, 0);
        for i in 0..self.n {
            for k in 0..self.n {
                if i == k {
                    continue;
                }
                for j in 0..self.n {
                    if j == i || j == k {
                        continue;
                    }
                    let d = self.rho(i, k) - self.rho(i, j) - self.rho(j, k);
                    if d > worst {
                        worst = d;
                        at = (i, j, k);
                    }
                }
            }
        }
        (worst, at)
    }

    /// True when the separation satisfies the triangle inequality within `tol`.
    pub fn is_metric(&self, tol: f64) -> bool {
        self.n < 3 || self.triangle_defect().0 <= tol
    }

    /// Full farthest-point ordering starting from `seed_index`. The k-th
    /// prefix of the ordering is a maximal k-point separated subset, so
    /// nets of different sizes taken from one ordering are nested.
    pub fn greedy_net_ordering(&self, seed_index: usize) -> Vec<usize> {
        assert!(seed_index < self.n, "net seed out of range");
        let mut order = vec![seed_index];
        let mut dist: Vec<f64> = (0..self.n).map(|i| self.rho(seed_index, i)).collect();
        dist[seed_index] = 0.0;
        while order.len() < self.n {
            let mut best = 0usize;
            let mut best_d = f64::NEG_INFINITY;
            for i in 0..self.n {
                if dist[i] > best_d {
                    best_d = dist[i];
                    best = i;
                }
            }
            if best_d <= 0.0 {
                break;
            }
            order.push(best);
            for i in 0..self.n {
                dist[i] = dist[i].min(self.rho(best, i));
            }
        }
        order
    }

    /// Greedy farthest-point eps-net: the result covers every point within
    /// `eps` and is pairwise separated by at least `eps`.
    pub fn epsilon_net(&self, eps: f64, seed_index: usize) -> Vec<usize> {
        assert!(eps > 0.0, "eps must be positive");
        let order = self.greedy_net_ordering(seed_index);
        let mut net: Vec<usize> = Vec::new();
        let mut dist = vec![f64::INFINITY; self.n];
        for &p in &order {
            if dist[p] < eps {
                break;
            }
            net.push(p);
            for i in 0..self.n {
                dist[i] = dist[i].min(self.rho(p, i));
            }
        }
        if net.is_empty() {
            net.push(seed_index);
        }
        net
    }

    /// First `k` points of the farthest-point ordering.
    pub fn net_of_size(&self, k: usize, seed_index: usize) -> Vec<usize> {
        let order = self.greedy_net_ordering(seed_index);
        order[..k.min(order.len())].to_vec()
    }

    /// Largest distance from any point to the subset.
    pub fn covering_radius_of(&self, subset: &[usize]) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let mut nearest = f64::INFINITY;
            for &s in subset {
                nearest = nearest.min(self.rho(s, i));
            }
            worst = worst.max(nearest);
        }
        worst
    }

    /// Restriction of the separation to a subset of points, keeping labels.
    pub fn restriction(&self, subset: &[usize]) -> Result<Self> {
        let m = subset.len();
        if m < 2 {
            return Err(Error::TooFewPoints { required: 2, got: m });
        }
        let labels = subset.iter().map(|&i| self.labels[i].clone()).collect();
        let mut rho = vec![0.0; m * m];
        for (a, &i) in subset.iter().enumerate() {
            for (b, &j) in subset.iter().enumerate() {
                rho[a * m + b] = self.rho(i, j);
            }
        }
        Ok(Self::from_flat_unchecked(labels, m, rho))
    }

    /// Parses the JSON space schema, rejecting invalid matrices.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: SpaceJson = serde_json::from_str(s).map_err(|e| Error::Json(e.to_string()))?;
        Self::validate(raw.labels, &raw.rho)
    }

    pub fn to_json_string(&self) -> String {
        let raw = SpaceJson { labels: self.labels.clone(), rho: self.matrix() };
        serde_json::to_string_pretty(&raw).expect("space serializes")
    }
}

/// A semi-metric with diameter one in which every point has an antipode.
#[derive(Debug, Clone, PartialEq)]
pub struct AntipodalSpace {
    base: FiniteSemiMetric,
}

impl AntipodalSpace {
    /// Validates the two antipodal clauses at structural tolerance.
    pub fn validate(base: FiniteSemiMetric) -> Result<Self> {
        Self::validate_with_tol(base, STRUCTURAL_TOL)
    }

    /// Validates with an explicit tolerance on both clauses.
    pub fn validate_with_tol(base: FiniteSemiMetric, tol: f64) -> Result<Self> {
        let diameter = base.diameter();
        if (diameter - 1.0).abs() > tol {
            return Err(Error::DiameterNotOne { diameter, tol });
        }
        for i in 0..base.len() {
            let row_max = base
                .row(i)
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, v)| *v)
                .fold(f64::NEG_INFINITY, f64::max);
            if (row_max - 1.0).abs() > tol {
                return Err(Error::MissingAntipode {
                    index: i,
                    label: base.label(i).to_string(),
                    row_max,
                    tol,
                });
            }
        }
        Ok(Self { base })
    }

    pub fn base(&self) -> &FiniteSemiMetric {
        &self.base
    }

    pub fn into_base(self) -> FiniteSemiMetric {
        self.base
    }
}

impl std::ops::Deref for AntipodalSpace {
    type Target = FiniteSemiMetric;

    fn deref(&self) -> &FiniteSemiMetric {
        &self.base
    }
}

/// Applies a log-derivative: rho1(i,j) = exp(tau_i/2) exp(tau_j/2) rho0(i,j).
/// Cross-ratios are invariant under this action.
pub fn gmvt_apply(tau: &[f64], base: &FiniteSemiMetric) -> Result<FiniteSemiMetric> {
    let n = base.len();
    if tau.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: tau.len() });
    }
    let half: Vec<f64> = tau.iter().map(|t| (t / 2.0).exp()).collect();
    let mut rho = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                rho[i * n + j] = half[i] * half[j] * base.rho(i, j);
            }
        }
    }
    Ok(FiniteSemiMetric::from_flat_unchecked(base.labels().to_vec(), n, rho))
}

/// Recovers the unique log-derivative tau with
/// rho1(i,j)^2 = exp(tau_i) exp(tau_j) rho0(i,j)^2, by least squares on the
/// overdetermined log-linear system tau_i + tau_j = y_ij. A residual above
/// `tol` means the two separations are not Moebius equivalent.
pub fn gmvt_derivative(
    rho1: &FiniteSemiMetric,
    rho0: &FiniteSemiMetric,
    tol: f64,
) -> Result<Vec<f64>> {
    let n = rho0.len();
    if rho1.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: rho1.len() });
    }
    let y = |i: usize, j: usize| 2.0 * (rho1.rho(i, j) / rho0.rho(i, j)).ln();
    let tau = if n == 2 {
        // Underdetermined single equation; split symmetrically.
        let v = y(0, 1) / 2.0;
        vec![v, v]
    } else {
        // Normal equations for the pair-sum design matrix have the closed form
        // (n-2) tau_i + S = Y_i with S = sum(tau), Y_i = sum_{j != i} y_ij.
        let mut row_sums = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    row_sums[i] += y(i, j);
                }
            }
        }
        let total: f64 = row_sums.iter().sum();
        let s = total / (2 * n - 2) as f64;
        row_sums.iter().map(|yi| (yi - s) / (n - 2) as f64).collect()
    };
    let mut residual = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            residual = residual.max((tau[i] + tau[j] - y(i, j)).abs());
        }
    }
    if residual > tol {
        return Err(Error::NotMoebiusEquivalent { residual, tol });
    }
    Ok(tau)
}

/// Probe radii and worst separation drifts for a family of spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct EquicontinuityModulus {
    pub deltas: Vec<f64>,
    pub omegas: Vec<f64>,
}

/// For each delta in the grid, the worst drift
/// max |rho(xi,zeta) - rho(eta,zeta)| over pairs with rho(xi,eta) < delta,
/// taken over every space in the family.
pub fn equicontinuity_modulus(
    family: &[&FiniteSemiMetric],
    delta_grid: &[f64],
) -> EquicontinuityModulus {
    assert!(!family.is_empty(), "family must be nonempty");
    let omegas = delta_grid
        .iter()
        .map(|&delta| {
            let mut omega = 0.0f64;
            for space in family {
                let n = space.len();
                for xi in 0..n {
                    for eta in (xi + 1)..n {
                        if space.rho(xi, eta) >= delta {
                            continue;
                        }
                        for zeta in 0..n {
                            omega = omega.max((space.rho(xi, zeta) - space.rho(eta, zeta)).abs());
                        }
                    }
                }
            }
            omega
        })
        .collect();
    EquicontinuityModulus { deltas: delta_grid.to_vec(), omegas }
}

#[cfg(test)]
pub(crate) fn z4() -> AntipodalSpace {
    let m = vec![
        vec![0.0, 1.0, 0.5, 0.5],
        vec![1.0, 0.0, 0.5, 0.5],
        vec![0.5, 0.5, 0.0, 1.0],
        vec![0.5, 0.5, 1.0, 0.0],
    ];
    AntipodalSpace::validate(FiniteSemiMetric::from_matrix(&m).unwrap()).unwrap()
}
