//! Generators for model antipodal spaces: circle and tree boundaries,
//! seeded random spaces, and seeded perturbations. Every generator returns
//! a validated antipodal space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::semimetric::{AntipodalSpace, FiniteSemiMetric};

/// A generator request with kind-specific parameters. Parameters are
/// validated by the generator it dispatches to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GallerySpec {
    Circle {
        n: usize,
    },
    Tree {
        branching: usize,
        depth: usize,
    },
    Random {
        n: usize,
        seed: u64,
    },
    /// Perturbs a base space supplied at build time.
    Perturb {
        eta: f64,
        seed: u64,
    },
}

impl GallerySpec {
    pub fn build(&self, base: Option<&AntipodalSpace>) -> Result<AntipodalSpace> {
        match *self {
            GallerySpec::Circle { n } => circle_boundary(n),
            GallerySpec::Tree { branching, depth } => tree_boundary(branching, depth),
            GallerySpec::Random { n, seed } => random_antipodal(n, seed),
            GallerySpec::Perturb { eta, seed } => {
                let base =
                    base.ok_or_else(|| Error::Json("perturbation needs a base space".into()))?;
                perturb_antipodal(base, eta, seed)
            }
        }
    }
}

/// Forces every row maximum to exactly one by raising the argmax pair,
/// keeping the matrix symmetric. Entries never exceed one afterwards when
/// they did not before.
fn repair_antipodes(matrix: &mut [Vec<f64>]) {
    let n = matrix.len();
    for i in 0..n {
        let mut jmax = usize::MAX;
        let mut best = f64::NEG_INFINITY;
        for j in 0..n {
            if j != i && matrix[i][j] > best {
                best = matrix[i][j];
                jmax = j;
            }
        }
        matrix[i][jmax] = 1.0;
        matrix[jmax][i] = 1.0;
    }
}

/// n points on the circle with the chordal separation
/// rho(theta_i, theta_j) = |sin((theta_i - theta_j) / 2)|. Even n gives
/// exact antipodes; odd n is repaired by raising each row maximum to one.
pub fn circle_boundary(n: usize) -> Result<AntipodalSpace> {
    if n < 4 {
        return Err(Error::TooFewPoints { required: 4, got: n });
    }
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let k = j - i;
            let v = if 2 * k == n {
                1.0
            } else {
                (std::f64::consts::PI * k as f64 / n as f64).sin().abs()
            };
            matrix[i][j] = v;
            matrix[j][i] = v;
        }
    }
    if n % 2 == 1 {
        repair_antipodes(&mut matrix);
    }
    let labels = (0..n).map(|k| format!("theta{k}")).collect();
    AntipodalSpace::validate(FiniteSemiMetric::validate(labels, &matrix)?)
}

/// Leaves of the rooted b-ary tree of the given depth with the ultrametric
/// separation exp(-split depth); the root split has separation one.
pub fn tree_boundary(branching: usize, depth: usize) -> Result<AntipodalSpace> {
    assert!(branching >= 2, "branching must be at least 2");
    assert!(depth >= 1, "depth must be at least 1");
    let n = branching.pow(depth as u32);
    // Leaf index digits in base `branching` spell the root-to-leaf path.
    let digits: Vec<Vec<usize>> = (0..n)
        .map(|mut leaf| {
            let mut path = vec![0; depth];
            for d in (0..depth).rev() {
                path[d] = leaf % branching;
                leaf /= branching;
            }
            path
        })
        .collect();
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let split = digits[i].iter().zip(&digits[j]).take_while(|(a, b)| a == b).count();
            let v = (-(split as f64)).exp();
            matrix[i][j] = v;
            matrix[j][i] = v;
        }
    }
    let labels = digits
        .iter()
        .map(|path| path.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("."))
        .collect();
    AntipodalSpace::validate(FiniteSemiMetric::validate(labels, &matrix)?)
}

/// Seeded symmetric entrywise noise of size at most `eta`, renormalized to
/// diameter one and antipode-repaired. The noise is the same unit draw
/// scaled by `eta`, so ladders over eta with a fixed seed shrink
/// monotonically. Requires eta below half the minimal separation.
pub fn perturb_antipodal(space: &AntipodalSpace, eta: f64, seed: u64) -> Result<AntipodalSpace> {
    assert!(eta >= 0.0, "eta must be non-negative");
    let min_sep = space.min_separation();
    if eta > 0.0 && eta >= min_sep / 2.0 {
        return Err(Error::EtaTooLarge { eta, min_sep });
    }
    if eta == 0.0 {
        return Ok(space.clone());
    }
    let n = space.len();
    let mut matrix = space.matrix();
    for i in 0..n {
        for j in (i + 1)..n {
            let key = (i * n + j) as u64;
            let noise = eta * rng::symmetric(rng::derive(seed, key));
            let v = (matrix[i][j] + noise).max(min_sep / 4.0);
            matrix[i][j] = v;
            matrix[j][i] = v;
        }
    }
    let perturbed = FiniteSemiMetric::validate(space.labels().to_vec(), &matrix)?;
    let mut normalized = perturbed.normalize_diameter().matrix();
    repair_antipodes(&mut normalized);
    AntipodalSpace::validate(FiniteSemiMetric::validate(space.labels().to_vec(), &normalized)?)
}

/// Seeded random antipodal space: symmetric entries in [0.05, 1], with
/// consecutive pairs {2k, 2k+1} forced to separation one (the last point
/// pairs with the first when n is odd).
pub fn random_antipodal(n: usize, seed: u64) -> Result<AntipodalSpace> {
    if n < 4 {
        return Err(Error::TooFewPoints { required: 4, got: n });
    }
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let key = (i * n + j) as u64;
            let v = 0.05 + 0.95 * rng::unit(rng::derive(seed, key));
            matrix[i][j] = v;
            matrix[j][i] = v;
        }
    }
    for k in 0..n / 2 {
        matrix[2 * k][2 * k + 1] = 1.0;
        matrix[2 * k + 1][2 * k] = 1.0;
    }
    if n % 2 == 1 {
        matrix[n - 1][0] = 1.0;
        matrix[0][n - 1] = 1.0;
    }
    let labels = (0..n).map(|k| format!("p{k}")).collect();
    AntipodalSpace::validate(FiniteSemiMetric::validate(labels, &matrix)?)
}
