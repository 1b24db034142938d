//! The forward pipeline: pull a member back along a rough isometry of
//! boundaries, smooth it with a partition of unity, project it back to the
//! filling with the antipodal flow, and retract into the working ball.
//! The convergence experiment drives this over a ladder of nets and
//! reports distortion, coverage defect, and pulled-back discrepancy.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::moebius::{
    antipodalize, discrepancy_wrt, gram_matrix, moebius_metric, retract_ball, sample_ball, Chart,
    MoebiusPoint, MEMBERSHIP_TOL,
};
use crate::rough::rough_isometry_report;
use crate::semimetric::{AntipodalSpace, FiniteSemiMetric};

/// Weights of a partition of unity subordinate to the open balls of a net.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOfUnity {
    pub net: Vec<usize>,
    /// weights[k][xi] is the weight of net point k at xi; columns sum to one
    /// and a weight is positive only inside the k-th ball.
    pub weights: Vec<Vec<f64>>,
}

/// Builds the partition of unity from separations to ball complements:
/// f_k(xi) = rho(xi, complement of B(net_k, delta)), normalized per point.
pub fn partition_of_unity(
    space: &FiniteSemiMetric,
    net: &[usize],
    delta: f64,
) -> Result<PartitionOfUnity> {
    assert!(delta > 0.0, "delta must be positive");
    assert!(!net.is_empty(), "net must be nonempty");
    let n = space.len();
    // Verify the open balls cover the space.
    for xi in 0..n {
        let covered = net.iter().any(|&z| (if z == xi { 0.0 } else { space.rho(z, xi) }) < delta);
        if !covered {
            return Err(Error::NotACover { index: xi, delta });
        }
    }
    let mut weights = Vec::with_capacity(net.len());
    for &z in net {
        let mut row = Vec::with_capacity(n);
        for xi in 0..n {
            // Distance from xi to the complement of the ball around z. A
            // point outside the ball is its own complement witness, so the
            // weight vanishes exactly off the ball.
            let mut dist = f64::INFINITY;
            for eta in 0..n {
                let in_ball = (if eta == z { 0.0 } else { space.rho(z, eta) }) < delta;
                if !in_ball {
                    dist = dist.min(if eta == xi { 0.0 } else { space.rho(xi, eta) });
                }
            }
            if dist == f64::INFINITY {
                // The ball swallows the whole space; any positive constant
                // works under the later normalization.
                dist = 1.0;
            }
            row.push(dist);
        }
        weights.push(row);
    }
    for xi in 0..n {
        let total: f64 = weights.iter().map(|row| row[xi]).sum();
        debug_assert!(total > 0.0);
        for row in &mut weights {
            row[xi] /= total;
        }
    }
    Ok(PartitionOfUnity { net: net.to_vec(), weights })
}

/// Smooths values given on the net into a function on the whole space:
/// C(tau)(xi) = sum_k tau(net_k) P_k(xi). Never increases the sup norm.
pub fn smoothing_operator(values_on_net: &[f64], pou: &PartitionOfUnity) -> Result<Vec<f64>> {
    if values_on_net.len() != pou.net.len() {
        return Err(Error::DimensionMismatch { expected: pou.net.len(), got: values_on_net.len() });
    }
    let n = pou.weights[0].len();
    let mut out = vec![0.0; n];
    for (value, row) in values_on_net.iter().zip(&pou.weights) {
        for (o, w) in out.iter_mut().zip(row) {
            *o += value * w;
        }
    }
    Ok(out)
}

/// Composition tau . f for a point map f between index sets.
pub fn pullback_tau(tau: &[f64], map: &[usize]) -> Vec<f64> {
    map.iter().map(|&i| tau[i]).collect()
}

/// One application of the filling pipeline: member over the big boundary
/// in, member of the sub-boundary filling out (pull back along `map`,
/// smooth at scale `pou_delta`, project with the flow, retract into the
/// radius-`radius` ball). The base point maps to the base point exactly.
pub fn filling_map(
    member: &MoebiusPoint,
    target: &Chart,
    map: &[usize],
    radius: f64,
    pou_delta: f64,
    tol: f64,
) -> Result<MoebiusPoint> {
    assert_eq!(map.len(), target.len(), "map must be total on the target boundary");
    debug_assert!(member.norm() <= radius + 1e-6, "member must lie in the working ball");
    let pulled = pullback_tau(member.values(), map);
    let net = target.space().epsilon_net(pou_delta, 0);
    let pou = partition_of_unity(target.space().base(), &net, pou_delta)?;
    let on_net: Vec<f64> = net.iter().map(|&k| pulled[k]).collect();
    let smoothed = smoothing_operator(&on_net, &pou)?;
    let projected = antipodalize(&target.tau(smoothed)?, tol)?;
    retract_ball(&projected, radius, tol)
}

/// One ladder row of the forward convergence experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct FillingRow {
    pub net_size: usize,
    pub eps_n: f64,
    pub distortion: f64,
    pub net_defect: f64,
    pub sup_discrepancy: f64,
    pub wallclock_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FillingReport {
    pub radius: f64,
    pub sample_count: usize,
    pub rows: Vec<FillingRow>,
}

/// Extracts an antipode-closed sub-boundary of the requested size from the
/// farthest-point ordering: each selected point brings one of its exact
/// antipodes along, so the restriction is again antipodal.
pub fn antipodal_net(space: &AntipodalSpace, size: usize, seed_index: usize) -> Vec<usize> {
    let n = space.len();
    assert!(size >= 2, "antipodal nets need at least two points");
    let antipode_of = |i: usize| -> usize {
        (0..n)
            .filter(|&j| j != i)
            .max_by(|&a, &b| space.rho(i, a).partial_cmp(&space.rho(i, b)).unwrap().then(b.cmp(&a)))
            .expect("spaces have at least two points")
    };
    let mut selected: Vec<usize> = Vec::new();
    let mut chosen = vec![false; n];
    let mut dist = vec![f64::INFINITY; n];
    let push =
        |i: usize, selected: &mut Vec<usize>, chosen: &mut Vec<bool>, dist: &mut Vec<f64>| {
            if !chosen[i] {
                chosen[i] = true;
                selected.push(i);
                for j in 0..n {
                    dist[j] = dist[j].min(space.rho(i, j));
                }
            }
        };
    push(seed_index.min(n - 1), &mut selected, &mut chosen, &mut dist);
    push(antipode_of(seed_index.min(n - 1)), &mut selected, &mut chosen, &mut dist);
    while selected.len() < size.min(n) {
        let mut far = usize::MAX;
        let mut far_d = f64::NEG_INFINITY;
        for j in 0..n {
            if !chosen[j] && dist[j] > far_d {
                far_d = dist[j];
                far = j;
            }
        }
        if far == usize::MAX {
            break;
        }
        push(far, &mut selected, &mut chosen, &mut dist);
        push(antipode_of(far), &mut selected, &mut chosen, &mut dist);
    }
    selected
}

/// Runs the forward experiment: for each net size, fill the sampled ball
/// through the net inclusion and record the distortion on sampled pairs,
/// the coverage defect against a sample of the target ball, and the worst
/// pulled-back discrepancy.
pub fn filling_convergence_experiment(
    chart: &Chart,
    net_sizes: &[usize],
    radius: f64,
    sample_count: usize,
    seed: u64,
) -> Result<FillingReport> {
    assert!(!net_sizes.is_empty(), "need at least one net size");
    let space = chart.space();
    let source = sample_ball(chart, radius, sample_count, seed)?;
    let mut rows = Vec::with_capacity(net_sizes.len());
    for &size in net_sizes {
        let start = Instant::now();
        let net = antipodal_net(space, size, 0);
        let sub = AntipodalSpace::validate(space.restriction(&net)?)?;
        let target = Chart::new(sub);
        let inclusion = rough_isometry_report(target.space().base(), space.base(), &net);
        let eps_n = inclusion.epsilon;
        // Nets subordinate to the inclusion quality; identity smoothing
        // when the net is the whole space.
        let pou_delta = if inclusion.covering_radius > 0.0 {
            2.0 * inclusion.covering_radius
        } else {
            target.space().min_separation() / 2.0
        };
        let images: Vec<MoebiusPoint> = source
            .points
            .iter()
            .map(|p| filling_map(p, &target, &net, radius, pou_delta, MEMBERSHIP_TOL))
            .collect::<Result<_>>()?;
        let image_gram = gram_matrix(&images);
        let mut worst_distortion = 0.0f64;
        for i in 0..images.len() {
            for j in (i + 1)..images.len() {
                worst_distortion =
                    worst_distortion.max((image_gram[i][j] - source.gram[i][j]).abs());
            }
        }
        let target_sample = sample_ball(&target, radius, sample_count, seed)?;
        let mut net_defect = 0.0f64;
        for t in &target_sample.points {
            let nearest = images
                .iter()
                .map(|img| moebius_metric(t, img).expect("shared chart"))
                .fold(f64::INFINITY, f64::min);
            net_defect = net_defect.max(nearest);
        }
        let mut sup_discrepancy = 0.0f64;
        for p in &source.points {
            let pulled = pullback_tau(p.values(), &net);
            sup_discrepancy =
                sup_discrepancy.max(discrepancy_wrt(&pulled, target.space().base())?.sup_norm());
        }
        rows.push(FillingRow {
            net_size: net.len(),
            eps_n,
            distortion: worst_distortion,
            net_defect,
            sup_discrepancy,
            wallclock_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(FillingReport { radius, sample_count, rows })
}
