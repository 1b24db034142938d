//! The backward pipeline: spheres around the base point, their linkage
//! components, shadows on the boundary, the argmax boundary map, and the
//! perturbation-ladder experiment recovering a finite boundary from sphere
//! components.

use crate::error::{Error, Result};
use crate::filling::filling_map;
use crate::gallery::perturb_antipodal;
use crate::moebius::{
    antipodalize, argmax_set, boundary_gromov_product, boundary_ray_point, gram_matrix,
    gromov_product, moebius_metric, retract_ball, Chart, MoebiusPoint, MEMBERSHIP_TOL,
};
use crate::rng;
use crate::rough::{rough_isometry_report, RoughIsometryReport};

/// Members at a fixed distance from the base point. The first
/// `boundary len` entries are the ray points in boundary order.
#[derive(Debug, Clone)]
pub struct SphereSample {
    pub chart: Chart,
    pub radius: f64,
    pub points: Vec<MoebiusPoint>,
    pub gram: Vec<Vec<f64>>,
    pub ray_count: usize,
}

/// Samples the sphere of the given radius: one ray point per boundary
/// direction plus retractions of random far members. Every distance to the
/// base point is verified to lie within 1e-6 of the radius.
pub fn sphere_sample(
    chart: &Chart,
    radius: f64,
    extra_count: usize,
    seed: u64,
) -> Result<SphereSample> {
    assert!(radius > 0.0, "radius must be positive");
    let mut points = Vec::with_capacity(chart.len() + extra_count);
    for zeta in 0..chart.len() {
        points.push(boundary_ray_point(chart, zeta, radius, MEMBERSHIP_TOL)?);
    }
    let ray_count = points.len();
    for index in 0..extra_count {
        // Rejection loop: draw beyond the sphere, then retract onto it.
        for attempt in 0u64..16 {
            let values: Vec<f64> = chart
                .space()
                .labels()
                .iter()
                .map(|label| {
                    2.0 * radius
                        * rng::symmetric(rng::derive_label(
                            seed,
                            (index as u64) << 8 | attempt,
                            label,
                        ))
                })
                .collect();
            let member = antipodalize(&chart.tau(values)?, MEMBERSHIP_TOL)?;
            if member.norm() > radius {
                points.push(retract_ball(&member, radius, MEMBERSHIP_TOL)?);
                break;
            }
        }
    }
    for p in &points {
        debug_assert!(
            (p.norm() - radius).abs() <= 1e-6,
            "sphere point drifted to distance {}",
            p.norm()
        );
    }
    let gram = gram_matrix(&points);
    Ok(SphereSample { chart: chart.clone(), radius, points, gram, ray_count })
}

/// Sphere points grouped by the linkage graph, and the boundary partition
/// they induce (a boundary direction belongs to the component holding its
/// ray point).
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentDecomposition {
    pub eps_link: f64,
    /// Disjoint sphere point index groups, ordered by smallest member.
    pub components: Vec<Vec<usize>>,
    /// shadows[c] lists the boundary indices assigned to components[c].
    pub shadows: Vec<Vec<usize>>,
}

impl ComponentDecomposition {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Largest pairwise distance within component `c`.
    pub fn diameter(&self, c: usize, gram: &[Vec<f64>]) -> f64 {
        let mut d = 0.0f64;
        for (a, &i) in self.components[c].iter().enumerate() {
            for &j in &self.components[c][a + 1..] {
                d = d.max(gram[i][j]);
            }
        }
        d
    }
}

/// Default linkage scale: a third of the smallest separation between ray
/// points at this radius.
pub fn default_eps_link(sample: &SphereSample) -> f64 {
    let mut min_ray = f64::INFINITY;
    for i in 0..sample.ray_count {
        for j in (i + 1)..sample.ray_count {
            min_ray = min_ray.min(sample.gram[i][j]);
        }
    }
    min_ray / 3.0
}

/// Connected components of the graph joining sphere points at mutual
/// distance below `eps_link`, with shadows assigned by ray membership.
pub fn components(sample: &SphereSample, eps_link: f64) -> Result<ComponentDecomposition> {
    assert!(eps_link > 0.0, "linkage scale must be positive");
    let m = sample.points.len();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for i in 0..m {
        for j in (i + 1)..m {
            if sample.gram[i][j] < eps_link {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..m {
        let root = find(&mut parent, i);
        match groups.iter_mut().find(|(r, _)| *r == root) {
            Some((_, members)) => members.push(i),
            None => groups.push((root, vec![i])),
        }
    }
    groups.sort_by_key(|(root, _)| *root);
    let components: Vec<Vec<usize>> = groups.into_iter().map(|(_, members)| members).collect();
    // Each boundary direction is shadowed by the component of its ray point.
    let mut shadows = vec![Vec::new(); components.len()];
    for zeta in 0..sample.ray_count {
        let holders: Vec<usize> = components
            .iter()
            .enumerate()
            .filter(|(_, members)| members.contains(&zeta))
            .map(|(c, _)| c)
            .collect();
        if holders.len() != 1 {
            return Err(Error::AmbiguousShadow { zeta });
        }
        shadows[holders[0]].push(zeta);
    }
    Ok(ComponentDecomposition { eps_link, components, shadows })
}

/// One checked inequality row of the Gromov product report.
#[derive(Debug, Clone, PartialEq)]
pub struct GromovBoundRow {
    pub xi: usize,
    pub eta: usize,
    pub value: f64,
    pub bound: f64,
    pub satisfied: bool,
}

/// Bounds relating boundary Gromov products to sphere components: a cross
/// bound within the component diameters for distinct shadows, and the
/// radius lower bound within one shadow.
#[derive(Debug, Clone, PartialEq)]
pub struct GromovBoundReport {
    pub cross_rows: Vec<GromovBoundRow>,
    pub same_rows: Vec<GromovBoundRow>,
}

impl GromovBoundReport {
    pub fn violations(&self) -> usize {
        self.cross_rows.iter().chain(&self.same_rows).filter(|row| !row.satisfied).count()
    }
}

pub fn component_gromov_bounds(
    sample: &SphereSample,
    decomp: &ComponentDecomposition,
    tol: f64,
) -> Result<GromovBoundReport> {
    let base = sample.chart.basepoint();
    let mut cross_rows = Vec::new();
    let mut same_rows = Vec::new();
    for u in 0..decomp.len() {
        let diam_u = decomp.diameter(u, &sample.gram);
        // Same-shadow pairs: (xi|eta) >= R - diam(U)/2 - tol.
        for (a, &xi) in decomp.shadows[u].iter().enumerate() {
            for &eta in &decomp.shadows[u][a + 1..] {
                let value = boundary_gromov_product(&base, xi, eta)?;
                let bound = sample.radius - diam_u / 2.0 - tol;
                same_rows.push(GromovBoundRow { xi, eta, value, bound, satisfied: value >= bound });
            }
        }
        for v in (u + 1)..decomp.len() {
            let diam_v = decomp.diameter(v, &sample.gram);
            for &xi in &decomp.shadows[u] {
                for &eta in &decomp.shadows[v] {
                    let boundary_ip = boundary_gromov_product(&base, xi, eta)?;
                    // Ray points represent their boundary directions.
                    let sphere_ip = gromov_product(&sample.points[xi], &sample.points[eta], &base)?;
                    let value = (boundary_ip - sphere_ip).abs();
                    let bound = diam_u + diam_v + tol;
                    cross_rows.push(GromovBoundRow {
                        xi,
                        eta,
                        value,
                        bound,
                        satisfied: value <= bound,
                    });
                }
            }
        }
    }
    Ok(GromovBoundReport { cross_rows, same_rows })
}

/// A sampled map between balls of two fillings: `sources[k]` is carried to
/// `images[k]`.
#[derive(Debug, Clone)]
pub struct BallMap {
    pub sources: Vec<MoebiusPoint>,
    pub images: Vec<MoebiusPoint>,
}

/// Builds the candidate boundary map from a ball map: each boundary
/// direction follows its ray point through the ball map and lands on the
/// argmax of the image chart vector (ties to the lowest index). Directions
/// outside the optional net are first retracted to their nearest net
/// point. `slack` bounds how far a ray point may sit from its nearest
/// mapped source.
pub fn boundary_map(
    source: &Chart,
    target: &Chart,
    ball_map: &BallMap,
    radius: f64,
    net: Option<&[usize]>,
    slack: f64,
) -> Result<(Vec<usize>, RoughIsometryReport)> {
    assert_eq!(ball_map.sources.len(), ball_map.images.len());
    let all: Vec<usize> = (0..source.len()).collect();
    let net: Vec<usize> = net.map(|n| n.to_vec()).unwrap_or(all);
    assert!(!net.is_empty(), "net must be nonempty");
    let mut assigned = vec![usize::MAX; source.len()];
    for &zeta in &net {
        let ray = boundary_ray_point(source, zeta, radius, MEMBERSHIP_TOL)?;
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for (k, s) in ball_map.sources.iter().enumerate() {
            let d = moebius_metric(&ray, s)?;
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        if best == usize::MAX || best_d > slack {
            return Err(Error::RayPointUnmapped { zeta, slack });
        }
        assigned[zeta] = argmax_set(ball_map.images[best].values())[0];
    }
    // Retraction onto the net for directions not carried directly.
    let rho = source.space().base();
    let map: Vec<usize> = (0..source.len())
        .map(|xi| {
            if assigned[xi] != usize::MAX {
                return assigned[xi];
            }
            let nearest = net
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    rho.rho(xi, a).partial_cmp(&rho.rho(xi, b)).unwrap().then(a.cmp(&b))
                })
                .expect("net is nonempty");
            assigned[nearest]
        })
        .collect();
    let report = rough_isometry_report(source.space().base(), target.space().base(), &map);
    Ok((map, report))
}

/// One perturbation rung of the backward experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryRow {
    pub eta: f64,
    pub component_count: usize,
    pub epsilon_g: f64,
    pub max_cross_gromov: f64,
    pub min_same_shadow_gromov: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryReport {
    pub radius: f64,
    pub rows: Vec<BoundaryRow>,
}

/// Perturbs the limit space along the ladder of scales, rebuilds the
/// sphere decomposition of each perturbed filling, matches components to
/// the reference sphere through the filling pipeline, reads off the
/// shadow-based boundary map, and records its rough-isometry epsilon
/// together with the Gromov product diagnostics.
pub fn boundary_convergence_experiment(
    limit: &Chart,
    etas: &[f64],
    radius: f64,
    seed: u64,
) -> Result<BoundaryReport> {
    let m = limit.len();
    assert!(m <= 8, "experiment is sized for small finite boundaries");
    let reference = sphere_sample(limit, radius, 2 * m, seed)?;
    let eps_link = default_eps_link(&reference);
    let expected = components(&reference, eps_link)?.len();
    let mut rows = Vec::with_capacity(etas.len());
    for &eta in etas {
        let perturbed = perturb_antipodal(limit.space(), eta, seed)?;
        let chart_n = Chart::new(perturbed);
        let sphere_n = sphere_sample(&chart_n, radius, 2 * m, seed)?;
        let decomp = components(&sphere_n, eps_link)?;
        if decomp.len() != expected {
            return Err(Error::ComponentCountMismatch { expected, got: decomp.len() });
        }
        // Carry the reference ray points through the filling pipeline and
        // match each perturbed component to its nearest carried ray.
        let identity: Vec<usize> = (0..m).collect();
        let pou_delta = chart_n.space().min_separation() / 2.0;
        let carried: Vec<MoebiusPoint> = (0..m)
            .map(|i| {
                filling_map(
                    &reference.points[i],
                    &chart_n,
                    &identity,
                    radius,
                    pou_delta,
                    MEMBERSHIP_TOL,
                )
            })
            .collect::<Result<_>>()?;
        let mut matched = vec![usize::MAX; decomp.len()];
        for (c, members) in decomp.components.iter().enumerate() {
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            for (i, w) in carried.iter().enumerate() {
                for &p in members {
                    let d = moebius_metric(&sphere_n.points[p], w)?;
                    if d < best_d {
                        best_d = d;
                        best = i;
                    }
                }
            }
            matched[c] = best;
        }
        let mut seen = matched.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != decomp.len() {
            return Err(Error::ComponentCountMismatch { expected, got: seen.len() });
        }
        // Shadow-based boundary map from the perturbed boundary to the limit.
        let mut g = vec![usize::MAX; m];
        for (c, shadow) in decomp.shadows.iter().enumerate() {
            for &zeta in shadow {
                g[zeta] = matched[c];
            }
        }
        let report = rough_isometry_report(chart_n.space().base(), limit.space().base(), &g);
        // Gromov product diagnostics of the perturbed sphere.
        let base_n = chart_n.basepoint();
        let mut max_cross = f64::NEG_INFINITY;
        for u in 0..decomp.len() {
            for v in (u + 1)..decomp.len() {
                for &p in &decomp.components[u] {
                    for &q in &decomp.components[v] {
                        let ip = gromov_product(&sphere_n.points[p], &sphere_n.points[q], &base_n)?;
                        max_cross = max_cross.max(ip);
                    }
                }
            }
        }
        let mut min_same = f64::INFINITY;
        for shadow in &decomp.shadows {
            for (a, &xi) in shadow.iter().enumerate() {
                for &zeta in &shadow[a + 1..] {
                    min_same = min_same.min(boundary_gromov_product(&base_n, xi, zeta)?);
                }
            }
        }
        rows.push(BoundaryRow {
            eta,
            component_count: decomp.len(),
            epsilon_g: report.epsilon,
            max_cross_gromov: max_cross,
            min_same_shadow_gromov: min_same,
        });
    }
    Ok(BoundaryReport { radius, rows })
}
