//! Rough isometries between finite semi-metric spaces: distortion,
//! covering radius, the almost-isometry distance with exact and heuristic
//! search, inverse maps, and the Gromov-Hausdorff distance on metric
//! samples.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::semimetric::FiniteSemiMetric;

/// Exact searches are limited to this many points per side.
pub const EXACT_AI_LIMIT: usize = 8;
pub const EXACT_GH_LIMIT: usize = 7;

/// Default restart budget for the heuristic searches.
pub const DEFAULT_RESTARTS: usize = 32;

/// Search strategy for the distance computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Exact,
    Heuristic,
}

/// Distortion and covering radius of a point map, with their maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoughIsometryReport {
    pub distortion: f64,
    pub covering_radius: f64,
    pub epsilon: f64,
}

impl RoughIsometryReport {
    fn new(distortion: f64, covering_radius: f64) -> Self {
        Self { distortion, covering_radius, epsilon: distortion.max(covering_radius) }
    }
}

/// Worst additive distance defect of the map over all source pairs.
pub fn distortion(source: &FiniteSemiMetric, target: &FiniteSemiMetric, map: &[usize]) -> f64 {
    assert_eq!(map.len(), source.len(), "map must be total on the source");
    let mut worst = 0.0f64;
    for i in 0..source.len() {
        for j in (i + 1)..source.len() {
            worst = worst.max((target.rho(map[i], map[j]) - source.rho(i, j)).abs());
        }
    }
    worst
}

/// Largest distance from a target point to the image of the map.
pub fn covering_radius(source: &FiniteSemiMetric, target: &FiniteSemiMetric, map: &[usize]) -> f64 {
    assert_eq!(map.len(), source.len(), "map must be total on the source");
    let mut worst = 0.0f64;
    for t in 0..target.len() {
        let mut nearest = f64::INFINITY;
        for &img in map {
            let d = if img == t { 0.0 } else { target.rho(img, t) };
            nearest = nearest.min(d);
        }
        worst = worst.max(nearest);
    }
    worst
}

pub fn rough_isometry_report(
    source: &FiniteSemiMetric,
    target: &FiniteSemiMetric,
    map: &[usize],
) -> RoughIsometryReport {
    RoughIsometryReport::new(distortion(source, target, map), covering_radius(source, target, map))
}

/// Strict test: distortion < eps and covering radius < eps.
pub fn is_eps_isometry(
    source: &FiniteSemiMetric,
    target: &FiniteSemiMetric,
    map: &[usize],
    eps: f64,
) -> (bool, RoughIsometryReport) {
    let report = rough_isometry_report(source, target, map);
    (report.distortion < eps && report.covering_radius < eps, report)
}

/// Builds an approximate inverse of an eps-isometry: every target point is
/// sent to a source point whose image is nearest (exact ties prefer the
/// points of a separated 2eps-net, then the lowest index), so that
/// g(f(eta)) = eta holds on the net. On metric inputs the inverse of an
/// eps-isometry has distortion at most 3 eps.
pub fn invert_rough_isometry(
    source: &FiniteSemiMetric,
    target: &FiniteSemiMetric,
    map: &[usize],
    epsilon: f64,
) -> Vec<usize> {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let net = source.epsilon_net(2.0 * epsilon, 0);
    let mut in_net = vec![false; source.len()];
    for &eta in &net {
        in_net[eta] = true;
    }
    let mut inverse = Vec::with_capacity(target.len());
    for t in 0..target.len() {
        let mut best = 0usize;
        let mut best_key = (f64::INFINITY, true, usize::MAX);
        for x in 0..source.len() {
            let img = map[x];
            let d = if img == t { 0.0 } else { target.rho(img, t) };
            let key = (d, !in_net[x], x);
            if key < best_key {
                best_key = key;
                best = x;
            }
        }
        inverse.push(best);
    }
    inverse
}

/// Witness maps and the achieved epsilon for the almost-isometry distance.
#[derive(Debug, Clone, PartialEq)]
pub struct AiWitness {
    pub epsilon: f64,
    pub forward: Vec<usize>,
    pub backward: Vec<usize>,
    pub forward_report: RoughIsometryReport,
    pub backward_report: RoughIsometryReport,
}

struct MapSearch<'a> {
    src: &'a FiniteSemiMetric,
    dst: &'a FiniteSemiMetric,
    assignment: Vec<usize>,
    best_eps: f64,
    best_map: Vec<usize>,
}

impl<'a> MapSearch<'a> {
    fn leaf_eps(&self, map: &[usize]) -> f64 {
        distortion(self.src, self.dst, map).max(covering_radius(self.src, self.dst, map))
    }

    fn descend(&mut self, depth: usize, partial_distortion: f64) {
        if partial_distortion >= self.best_eps {
            return;
        }
        if depth == self.src.len() {
            let eps = self.leaf_eps(&self.assignment.clone());
            if eps < self.best_eps {
                self.best_eps = eps;
                self.best_map = self.assignment.clone();
            }
            return;
        }
        for candidate in 0..self.dst.len() {
            let mut violation = partial_distortion;
            for i in 0..depth {
                let defect =
                    (self.dst.rho(self.assignment[i], candidate) - self.src.rho(i, depth)).abs();
                violation = violation.max(defect);
                if violation >= self.best_eps {
                    break;
                }
            }
            if violation >= self.best_eps {
                continue;
            }
            self.assignment[depth] = candidate;
            self.descend(depth + 1, violation);
        }
    }
}

/// Exact minimum over all maps src -> dst of max(distortion, covering
/// radius), by depth-first search with distortion pruning.
fn best_map_exact(src: &FiniteSemiMetric, dst: &FiniteSemiMetric) -> (f64, Vec<usize>) {
    // Seed the bound with a greedy solution so pruning bites immediately.
    let (greedy_eps, greedy_map) = best_map_heuristic(src, dst, 4, 0);
    let mut search = MapSearch {
        src,
        dst,
        assignment: vec![0; src.len()],
        best_eps: greedy_eps + 1e-15,
        best_map: greedy_map,
    };
    search.descend(0, 0.0);
    (search.leaf_eps(&search.best_map.clone()), search.best_map)
}

fn greedy_map(src: &FiniteSemiMetric, dst: &FiniteSemiMetric, order: &[usize]) -> Vec<usize> {
    let n = src.len();
    let mut map = vec![usize::MAX; n];
    for (step, &i) in order.iter().enumerate() {
        let mut best = 0usize;
        let mut best_cost = f64::INFINITY;
        for candidate in 0..dst.len() {
            let mut cost = 0.0f64;
            for &j in &order[..step] {
                cost = cost.max((dst.rho(map[j], candidate) - src.rho(j, i)).abs());
            }
            if cost < best_cost {
                best_cost = cost;
                best = candidate;
            }
        }
        map[i] = best;
    }
    map
}

fn hill_climb(src: &FiniteSemiMetric, dst: &FiniteSemiMetric, map: &mut [usize]) -> f64 {
    let eval = |m: &[usize]| distortion(src, dst, m).max(covering_radius(src, dst, m));
    let mut best = eval(map);
    loop {
        let mut improved = false;
        // Single-point reassignment.
        for i in 0..map.len() {
            let original = map[i];
            for candidate in 0..dst.len() {
                if candidate == original {
                    continue;
                }
                map[i] = candidate;
                let eps = eval(map);
                if eps < best - 1e-15 {
                    best = eps;
                    improved = true;
                } else {
                    map[i] = original;
                }
                if improved {
                    break;
                }
            }
            if improved {
                break;
            }
        }
        if improved {
            continue;
        }
        // Pairwise value swap.
        'swaps: for i in 0..map.len() {
            for j in (i + 1)..map.len() {
                if map[i] == map[j] {
                    continue;
                }
                map.swap(i, j);
                let eps = eval(map);
                if eps < best - 1e-15 {
                    best = eps;
                    improved = true;
                    break 'swaps;
                }
                map.swap(i, j);
            }
        }
        if !improved {
            return best;
        }
    }
}

/// Seeded multi-start local search over maps src -> dst.
fn best_map_heuristic(
    src: &FiniteSemiMetric,
    dst: &FiniteSemiMetric,
    restarts: usize,
    seed: u64,
) -> (f64, Vec<usize>) {
    let n = src.len();
    let mut gen = SplitMix64::new(seed);
    // Diameter-ordered start: most eccentric points first.
    let mut base_order: Vec<usize> = (0..n).collect();
    let ecc: Vec<f64> = (0..n).map(|i| (0..n).map(|j| src.rho(i, j)).fold(0.0, f64::max)).collect();
    base_order.sort_by(|&a, &b| ecc[b].partial_cmp(&ecc[a]).unwrap().then(a.cmp(&b)));
    let mut best_eps = f64::INFINITY;
    let mut best_map = vec![0; n];
    for restart in 0..restarts.max(1) {
        let mut order = base_order.clone();
        if restart > 0 {
            // Seeded shuffle for diversity.
            for i in (1..n).rev() {
                let j = gen.next_index(i + 1);
                order.swap(i, j);
            }
        }
        let mut map = greedy_map(src, dst, &order);
        let eps = hill_climb(src, dst, &mut map);
        if eps < best_eps {
            best_eps = eps;
            best_map = map;
        }
    }
    (best_eps, best_map)
}

/// Almost-isometry distance: the minimum over map pairs of
/// max(Dis f, covrad f, Dis g, covrad g). The two directions decouple, so
/// each is minimized independently. Exact mode enumerates with pruning and
/// requires at most eight points per side; heuristic mode returns an upper
/// bound with witness maps.
pub fn ai_distance(
    a: &FiniteSemiMetric,
    b: &FiniteSemiMetric,
    mode: SearchMode,
    restarts: usize,
    seed: u64,
) -> Result<AiWitness> {
    let (forward, backward) = match mode {
        SearchMode::Exact => {
            let biggest = a.len().max(b.len());
            if biggest > EXACT_AI_LIMIT {
                return Err(Error::ExactBudgetExceeded { limit: EXACT_AI_LIMIT, got: biggest });
            }
            (best_map_exact(a, b).1, best_map_exact(b, a).1)
        }
        SearchMode::Heuristic => (
            best_map_heuristic(a, b, restarts, seed).1,
            best_map_heuristic(b, a, restarts, seed ^ 0x9e3779b97f4a7c15).1,
        ),
    };
    let forward_report = rough_isometry_report(a, b, &forward);
    let backward_report = rough_isometry_report(b, a, &backward);
    Ok(AiWitness {
        epsilon: forward_report.epsilon.max(backward_report.epsilon),
        forward,
        backward,
        forward_report,
        backward_report,
    })
}

fn check_metric(matrix: &[Vec<f64>], tol: f64) -> Result<()> {
    let n = matrix.len();
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                let defect = matrix[i][k] - matrix[i][j] - matrix[j][k];
                if defect > tol {
                    return Err(Error::NotAMetric { i, j, k, defect, tol });
                }
            }
        }
    }
    Ok(())
}

/// Joint defect of the correspondence graph(f) union graph(g)^T.
fn correspondence_defect(a: &[Vec<f64>], b: &[Vec<f64>], f: &[usize], g: &[usize]) -> f64 {
    let n = a.len();
    let m = b.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((b[f[i]][f[j]] - a[i][j]).abs());
        }
    }
    for i in 0..m {
        for j in (i + 1)..m {
            worst = worst.max((a[g[i]][g[j]] - b[i][j]).abs());
        }
    }
    for i in 0..n {
        for j in 0..m {
            worst = worst.max((a[i][g[j]] - b[f[i]][j]).abs());
        }
    }
    worst
}

struct GhSearch<'a> {
    a: &'a [Vec<f64>],
    b: &'a [Vec<f64>],
    f: Vec<usize>,
    g: Vec<usize>,
    best: f64,
    best_pair: (Vec<usize>, Vec<usize>),
}

impl<'a> GhSearch<'a> {
    /// Variables are interleaved f(0), g(0), f(1), g(1), ... so cross
    /// constraints prune as early as possible.
    fn descend(&mut self, slot: usize, partial: f64) {
        if partial >= self.best {
            return;
        }
        let n = self.a.len();
        let m = self.b.len();
        if slot == n + m {
            if partial < self.best {
                self.best = partial;
                self.best_pair = (self.f.clone(), self.g.clone());
            }
            return;
        }
        let (is_f, idx) = interleave(slot, n, m);
        if is_f {
            for candidate in 0..m {
                let mut defect = partial;
                for i in 0..idx {
                    defect = defect.max((self.b[self.f[i]][candidate] - self.a[i][idx]).abs());
                }
                let g_known = decided_g(slot, n, m);
                for j in 0..g_known {
                    defect = defect.max((self.a[idx][self.g[j]] - self.b[candidate][j]).abs());
                }
                if defect >= self.best {
                    continue;
                }
                self.f[idx] = candidate;
                self.descend(slot + 1, defect);
            }
        } else {
            for candidate in 0..n {
                let mut defect = partial;
                for j in 0..idx {
                    defect = defect.max((self.a[self.g[j]][candidate] - self.b[j][idx]).abs());
                }
                let f_known = decided_f(slot, n, m);
                for i in 0..f_known {
                    defect = defect.max((self.a[i][candidate] - self.b[self.f[i]][idx]).abs());
                }
                if defect >= self.best {
                    continue;
                }
                self.g[idx] = candidate;
                self.descend(slot + 1, defect);
            }
        }
    }
}

fn interleave(slot: usize, n: usize, m: usize) -> (bool, usize) {
    // Alternate while both sides have variables left, then finish the rest.
    let paired = 2 * n.min(m);
    if slot < paired {
        (slot % 2 == 0, slot / 2)
    } else if n > m {
        (true, m + (slot - paired))
    } else {
        (false, n + (slot - paired))
    }
}

fn decided_f(slot: usize, n: usize, m: usize) -> usize {
    (0..slot).filter(|&s| interleave(s, n, m).0).count()
}

fn decided_g(slot: usize, n: usize, m: usize) -> usize {
    (0..slot).filter(|&s| !interleave(s, n, m).0).count()
}

/// A correspondence witness for the Gromov-Hausdorff distance: the two
/// function graphs whose union realizes the reported distance.
#[derive(Debug, Clone, PartialEq)]
pub struct GhWitness {
    pub distance: f64,
    pub forward: Vec<usize>,
    pub backward: Vec<usize>,
}

/// Gromov-Hausdorff distance between finite metric spaces given by their
/// distance matrices: half the minimal distortion over correspondences.
/// Exact mode searches function-pair correspondences with pruning (at most
/// seven points per side); heuristic mode is a seeded local search whose
/// value is an upper bound for the exact distance.
pub fn gh_witness(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    mode: SearchMode,
    restarts: usize,
    seed: u64,
) -> Result<GhWitness> {
    check_metric(a, 1e-9)?;
    check_metric(b, 1e-9)?;
    let (forward, backward) = match mode {
        SearchMode::Exact => {
            let biggest = a.len().max(b.len());
            if biggest > EXACT_GH_LIMIT {
                return Err(Error::ExactBudgetExceeded { limit: EXACT_GH_LIMIT, got: biggest });
            }
            let seed_pair = gh_heuristic_pair(a, b, 4, seed);
            let mut search = GhSearch {
                a,
                b,
                f: vec![0; a.len()],
                g: vec![0; b.len()],
                best: correspondence_defect(a, b, &seed_pair.0, &seed_pair.1) + 1e-15,
                best_pair: seed_pair,
            };
            search.descend(0, 0.0);
            search.best_pair
        }
        SearchMode::Heuristic => gh_heuristic_pair(a, b, restarts, seed),
    };
    Ok(GhWitness {
        distance: 0.5 * correspondence_defect(a, b, &forward, &backward),
        forward,
        backward,
    })
}

/// The distance value alone; see [`gh_witness`].
pub fn gh_distance(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    mode: SearchMode,
    restarts: usize,
    seed: u64,
) -> Result<f64> {
    Ok(gh_witness(a, b, mode, restarts, seed)?.distance)
}

fn gh_heuristic_pair(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    restarts: usize,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let n = a.len();
    let m = b.len();
    let mut gen = SplitMix64::new(seed);
    let mut best = f64::INFINITY;
    let mut best_pair = (vec![0; n], vec![0; m]);
    for restart in 0..restarts.max(1) {
        let mut f: Vec<usize> = (0..n).map(|i| if m == 0 { 0 } else { i % m }).collect();
        if restart > 0 {
            for v in f.iter_mut() {
                *v = gen.next_index(m);
            }
        }
        // Set g to the nearest-preimage inverse of f, then climb jointly.
        let mut g: Vec<usize> = (0..m)
            .map(|y| {
                (0..n)
                    .min_by(|&x1, &x2| {
                        b[f[x1]][y].partial_cmp(&b[f[x2]][y]).unwrap().then(x1.cmp(&x2))
                    })
                    .unwrap_or(0)
            })
            .collect();
        let mut current = correspondence_defect(a, b, &f, &g);
        loop {
            let mut improved = false;
            for i in 0..n {
                let original = f[i];
                for candidate in 0..m {
                    if candidate == original {
                        continue;
                    }
                    f[i] = candidate;
                    let val = correspondence_defect(a, b, &f, &g);
                    if val < current - 1e-15 {
                        current = val;
                        improved = true;
                        break;
                    }
                    f[i] = original;
                }
            }
            for j in 0..m {
                let original = g[j];
                for candidate in 0..n {
                    if candidate == original {
                        continue;
                    }
                    g[j] = candidate;
                    let val = correspondence_defect(a, b, &f, &g);
                    if val < current - 1e-15 {
                        current = val;
                        improved = true;
                        break;
                    }
                    g[j] = original;
                }
            }
            if !improved {
                break;
            }
        }
        if current < best {
            best = current;
            best_pair = (f, g);
        }
    }
    best_pair
}
