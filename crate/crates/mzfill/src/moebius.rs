//! The filling of an antipodal space: log-derivative charts, the
//! discrepancy, the antipodal flow and its limit map, geodesics, rays,
//! Gromov products, ball sampling and the injectivity/hyperbolicity probes.
//!
//! A point of the filling is an antipodal function Moebius equivalent to
//! the base separation. In the chart fixed by the base, a point is a real
//! vector tau (the log-derivative), and membership is exactly vanishing
//! discrepancy. The metric is the sup norm of chart differences.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::semimetric::{gmvt_apply, AntipodalSpace, FiniteSemiMetric};

/// Absolute tolerance on the discrepancy sup norm for membership.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

/// Default explicit Euler step for the antipodal flow.
pub const FLOW_STEP: f64 = 0.05;

/// Safety cap on flow steps.
pub const FLOW_MAX_STEPS: usize = 1_000_000;

/// Tie tolerance when reading off argmax sets of a chart vector.
pub const ARGMAX_TIE_TOL: f64 = 1e-9;

/// A shared base antipodal space fixing the chart.
#[derive(Debug, Clone)]
pub struct Chart(Arc<AntipodalSpace>);

impl Chart {
    pub fn new(space: AntipodalSpace) -> Self {
        Self(Arc::new(space))
    }

    pub fn space(&self) -> &AntipodalSpace {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.len() == 0
    }

    /// Wraps chart coordinates, checking the dimension.
    pub fn tau(&self, values: Vec<f64>) -> Result<TauVector> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: values.len() });
        }
        Ok(TauVector { chart: self.clone(), values })
    }

    /// The base point: tau identically zero, a member by antipodality.
    pub fn basepoint(&self) -> MoebiusPoint {
        MoebiusPoint {
            tau: TauVector { chart: self.clone(), values: vec![0.0; self.len()] },
            membership_residual: 0.0,
        }
    }
}

impl PartialEq for Chart {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

/// Chart coordinates of a separation Moebius equivalent to the base.
#[derive(Debug, Clone, PartialEq)]
pub struct TauVector {
    chart: Chart,
    values: Vec<f64>,
}

impl TauVector {
    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: f64) -> TauVector {
        TauVector {
            chart: self.chart.clone(),
            values: self.values.iter().map(|v| factor * v).collect(),
        }
    }

    /// Indices attaining the maximum entry, up to the tie tolerance.
    pub fn argmax_set(&self) -> Vec<usize> {
        argmax_set(&self.values)
    }
}

pub(crate) fn argmax_set(values: &[f64]) -> Vec<usize> {
    let top = values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    values.iter().enumerate().filter(|(_, v)| top - **v <= ARGMAX_TIE_TOL).map(|(i, _)| i).collect()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Per-point discrepancy values together with the attaining partner.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrepancy {
    pub values: Vec<f64>,
    pub argmax: Vec<usize>,
}

impl Discrepancy {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Discrepancy of a chart vector with respect to an arbitrary antipodal
/// separation on the same points:
/// D(tau)(i) = max over j != i of tau_i + tau_j + 2 log rho(i,j).
pub fn discrepancy_wrt(tau: &[f64], rho: &FiniteSemiMetric) -> Result<Discrepancy> {
    let n = rho.len();
    if tau.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: tau.len() });
    }
    let mut values = Vec::with_capacity(n);
    let mut argmax = Vec::with_capacity(n);
    for i in 0..n {
        let mut best = f64::NEG_INFINITY;
        let mut best_j = usize::MAX;
        for j in 0..n {
            if j == i {
                continue;
            }
            let v = tau[i] + tau[j] + 2.0 * rho.rho(i, j).ln();
            if v > best {
                best = v;
                best_j = j;
            }
        }
        values.push(best);
        argmax.push(best_j);
    }
    Ok(Discrepancy { values, argmax })
}

/// Discrepancy with respect to the base separation of the chart.
pub fn discrepancy(tau: &TauVector) -> Discrepancy {
    discrepancy_wrt(&tau.values, tau.chart.space().base())
        .expect("dimensions match by construction")
}

/// A chart vector whose discrepancy vanishes within tolerance: a point of
/// the filling.
#[derive(Debug, Clone, PartialEq)]
pub struct MoebiusPoint {
    tau: TauVector,
    membership_residual: f64,
}

impl MoebiusPoint {
    pub fn tau(&self) -> &TauVector {
        &self.tau
    }

    pub fn chart(&self) -> &Chart {
        &self.tau.chart
    }

    pub fn values(&self) -> &[f64] {
        &self.tau.values
    }

    pub fn membership_residual(&self) -> f64 {
        self.membership_residual
    }

    /// Distance to the chart base point.
    pub fn norm(&self) -> f64 {
        self.tau.sup_norm()
    }
}

/// Sup-norm distance between two points sharing a chart.
pub fn moebius_metric(a: &MoebiusPoint, b: &MoebiusPoint) -> Result<f64> {
    if a.chart() != b.chart() {
        return Err(Error::BaseMismatch);
    }
    Ok(sup_diff(a.values(), b.values()))
}

/// Rows violating membership, with the sign of the violation.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipRejection {
    pub residual: f64,
    pub violating_rows: Vec<(usize, f64)>,
}

/// Accepts the vector as a point of the filling iff the discrepancy sup
/// norm is within `tol`; rejection reports every violating row.
pub fn is_member(
    tau: &TauVector,
    tol: f64,
) -> std::result::Result<MoebiusPoint, MembershipRejection> {
    let disc = discrepancy(tau);
    let residual = disc.sup_norm();
    if residual <= tol {
        Ok(MoebiusPoint { tau: tau.clone(), membership_residual: residual })
    } else {
        let violating_rows = disc
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > tol)
            .map(|(i, v)| (i, *v))
            .collect();
        Err(MembershipRejection { residual, violating_rows })
    }
}

/// Explicit Euler record of the antipodal flow d tau / dt = -D(tau).
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub taus: Vec<Vec<f64>>,
    pub discrepancy_norms: Vec<f64>,
}

impl FlowTrajectory {
    pub fn final_tau(&self) -> &[f64] {
        self.taus.last().expect("trajectory is nonempty")
    }

    pub fn final_residual(&self) -> f64 {
        *self.discrepancy_norms.last().expect("trajectory is nonempty")
    }
}

fn euler_step(tau: &mut [f64], rho: &FiniteSemiMetric, h: f64) -> f64 {
    let disc = discrepancy_wrt(tau, rho).expect("dimensions fixed");
    for (t, d) in tau.iter_mut().zip(&disc.values) {
        *t -= h * d;
    }
    disc.sup_norm()
}

/// Integrates the flow with fixed-step explicit Euler up to `horizon`,
/// recording the state and residual at every step. The vector field is
/// 2-Lipschitz, so the default step is stable.
pub fn flow_trajectory(tau0: &TauVector, h: f64, horizon: f64) -> Result<FlowTrajectory> {
    assert!(h > 0.0 && horizon > 0.0, "step and horizon must be positive");
    let rho = tau0.chart.space().base().clone();
    let mut tau = tau0.values.clone();
    let mut times = vec![0.0];
    let mut taus = vec![tau.clone()];
    let mut norms = vec![discrepancy(tau0).sup_norm()];
    let steps = (horizon / h).ceil() as usize;
    for k in 1..=steps {
        let t = k as f64 * h;
        euler_step(&mut tau, &rho, h);
        if tau.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonfiniteState { t });
        }
        times.push(t);
        taus.push(tau.clone());
        norms.push(discrepancy_wrt(&tau, &rho)?.sup_norm());
    }
    Ok(FlowTrajectory { times, taus, discrepancy_norms: norms })
}

fn antipodalize_values(
    tau0: &[f64],
    rho: &FiniteSemiMetric,
    tol: f64,
    h: f64,
    max_steps: usize,
) -> Result<(Vec<f64>, f64)> {
    let mut tau = tau0.to_vec();
    let d0 = discrepancy_wrt(&tau, rho)?.sup_norm();
    // Stop once the a-priori tail bound 4 ||D(tau0)|| e^{-t/2} is below
    // tol/2 AND the measured residual is below tol; the former bounds the
    // remaining distance to the limit, the latter certifies membership.
    let t_star = if d0 <= tol / 8.0 { 0.0 } else { 2.0 * (8.0 * d0 / tol).ln() };
    let mut residual = d0;
    let mut t = 0.0;
    let mut steps = 0usize;
    while t < t_star || residual > tol {
        if steps >= max_steps {
            return Err(Error::BudgetExceeded { max_steps, residual });
        }
        residual = euler_step(&mut tau, rho, h);
        t += h;
        steps += 1;
        if tau.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonfiniteState { t });
        }
    }
    let final_residual = discrepancy_wrt(&tau, rho)?.sup_norm();
    Ok((tau, final_residual))
}

/// Projects a chart vector to the filling by running the antipodal flow to
/// its limit.
pub fn antipodalize(tau: &TauVector, tol: f64) -> Result<MoebiusPoint> {
    antipodalize_with(tau, tol, FLOW_STEP, FLOW_MAX_STEPS)
}

pub fn antipodalize_with(
    tau: &TauVector,
    tol: f64,
    h: f64,
    max_steps: usize,
) -> Result<MoebiusPoint> {
    let (values, residual) =
        antipodalize_values(&tau.values, tau.chart.space().base(), tol, h, max_steps)?;
    Ok(MoebiusPoint {
        tau: TauVector { chart: tau.chart.clone(), values },
        membership_residual: residual,
    })
}

/// Retraction onto the closed ball of radius `radius` around the base
/// point: points inside are fixed, points outside are pulled back along
/// the radial geodesic.
pub fn retract_ball(p: &MoebiusPoint, radius: f64, tol: f64) -> Result<MoebiusPoint> {
    assert!(radius > 0.0, "radius must be positive");
    let d = p.norm();
    if d <= radius {
        return Ok(p.clone());
    }
    antipodalize(&p.tau.scaled(radius / d), tol)
}

/// The point at parameter `t` of the radial geodesic from the base point
/// to `p`; its distance to the base point is t times the distance of `p`.
pub fn geodesic_point(p: &MoebiusPoint, t: f64, tol: f64) -> Result<MoebiusPoint> {
    assert!((0.0..=1.0).contains(&t), "geodesic parameter must lie in [0, 1]");
    antipodalize(&p.tau.scaled(t), tol)
}

/// A point at distance `t` from the base point on the ray toward boundary
/// point `zeta`. The candidate chart vector is
/// tau(eta) = t - 2 max(0, t + log rho0(zeta, eta)), repaired by the flow
/// when it is not already a member. Post-conditions: the distance to the
/// base point is `t` and `zeta` attains the maximum of the chart vector.
/// The argmax need not be a singleton: every direction within exp(-t) of
/// `zeta` is indistinguishable from this distance (ultrametric boundaries
/// realize such ties).
pub fn boundary_ray_point(chart: &Chart, zeta: usize, t: f64, tol: f64) -> Result<MoebiusPoint> {
    assert!(zeta < chart.len(), "boundary index out of range");
    assert!(t >= 0.0, "ray parameter must be non-negative");
    let rho = chart.space().base();
    let values: Vec<f64> = (0..chart.len())
        .map(|eta| if eta == zeta { t } else { t - 2.0 * (t + rho.rho(zeta, eta).ln()).max(0.0) })
        .collect();
    let candidate = chart.tau(values)?;
    let point = match is_member(&candidate, tol) {
        Ok(p) => p,
        Err(_) => antipodalize(&candidate, tol)?,
    };
    let distance_error = (point.norm() - t).abs();
    let argmax = point.tau.argmax_set();
    if distance_error > 1e-6 || !argmax.contains(&zeta) {
        return Err(Error::RayConstructionFailed { zeta, distance_error, argmax });
    }
    Ok(point)
}

/// Gromov product (a|b)_base = (d(a,base) + d(b,base) - d(a,b)) / 2.
pub fn gromov_product(a: &MoebiusPoint, b: &MoebiusPoint, base: &MoebiusPoint) -> Result<f64> {
    let da = moebius_metric(a, base)?;
    let db = moebius_metric(b, base)?;
    let dab = moebius_metric(a, b)?;
    Ok(0.5 * (da + db - dab))
}

/// Gromov product of two boundary points seen from `p`, i.e.
/// -log rho_p(i, j) for the visual separation at `p`; infinite iff i == j.
pub fn boundary_gromov_product(p: &MoebiusPoint, i: usize, j: usize) -> Result<f64> {
    let n = p.chart().len();
    assert!(i < n && j < n, "boundary index out of range");
    if i == j {
        return Ok(f64::INFINITY);
    }
    let visual = gmvt_apply(p.values(), p.chart().space().base())?;
    Ok(-visual.rho(i, j).ln())
}

/// The antipodal function a member represents: the image of the base
/// separation under its log-derivative, revalidated within `tol`.
pub fn visual_function_at(p: &MoebiusPoint, tol: f64) -> Result<AntipodalSpace> {
    let image = gmvt_apply(p.values(), p.chart().space().base())?;
    let n = image.len();
    let mut defect = (image.diameter() - 1.0).abs();
    for i in 0..n {
        let row_max =
            (0..n).filter(|&j| j != i).map(|j| image.rho(i, j)).fold(f64::NEG_INFINITY, f64::max);
        defect = defect.max((row_max - 1.0).abs());
    }
    if defect > tol {
        return Err(Error::NotAntipodalWithinTol { defect, tol });
    }
    AntipodalSpace::validate_with_tol(image, tol)
}

/// A deterministic sample of the closed ball around the base point.
#[derive(Debug, Clone)]
pub struct BallSample {
    pub chart: Chart,
    pub radius: f64,
    pub points: Vec<MoebiusPoint>,
    /// Pairwise sup-metric matrix of the sample.
    pub gram: Vec<Vec<f64>>,
}

/// Wire format for ball samples.
#[derive(Serialize, Deserialize)]
pub struct BallSampleJson {
    pub center_tau: Vec<f64>,
    #[serde(rename = "R")]
    pub radius: f64,
    pub taus: Vec<Vec<f64>>,
    pub gram: Vec<Vec<f64>>,
}

impl BallSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_json(&self) -> BallSampleJson {
        BallSampleJson {
            center_tau: vec![0.0; self.chart.len()],
            radius: self.radius,
            taus: self.points.iter().map(|p| p.values().to_vec()).collect(),
            gram: self.gram.clone(),
        }
    }
}

pub(crate) fn gram_matrix(points: &[MoebiusPoint]) -> Vec<Vec<f64>> {
    let m = points.len();
    let mut gram = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            let d = sup_diff(points[i].values(), points[j].values());
            gram[i][j] = d;
            gram[j][i] = d;
        }
    }
    gram
}

/// Draws a raw chart vector for sample index `index`, keyed per label so
/// that samples over a subspace correlate with samples over the space.
fn seeded_tau(chart: &Chart, radius: f64, seed: u64, index: u64) -> TauVector {
    let values = chart
        .space()
        .labels()
        .iter()
        .map(|label| radius * rng::symmetric(rng::derive_label(seed, index, label)))
        .collect();
    TauVector { chart: chart.clone(), values }
}

/// Samples `count` members of the ball of radius `radius`: the base point
/// and the boundary ray points are always included, and the remainder is a
/// farthest-point thinning of antipodalized random chart vectors.
/// Deterministic per seed.
pub fn sample_ball(chart: &Chart, radius: f64, count: usize, seed: u64) -> Result<BallSample> {
    assert!(count >= 1, "count must be at least 1");
    assert!(radius > 0.0, "radius must be positive");
    let mut mandatory = vec![chart.basepoint()];
    for zeta in 0..chart.len() {
        mandatory.push(boundary_ray_point(chart, zeta, radius, MEMBERSHIP_TOL)?);
    }
    let mut points: Vec<MoebiusPoint> = mandatory.into_iter().take(count).collect();
    if points.len() < count {
        let pool_size = 2 * (count - points.len()) + 8;
        let mut pool = Vec::with_capacity(pool_size);
        for index in 0..pool_size {
            let raw = seeded_tau(chart, radius, seed, index as u64);
            let member = antipodalize(&raw, MEMBERSHIP_TOL)?;
            pool.push(retract_ball(&member, radius, MEMBERSHIP_TOL)?);
        }
        // Farthest-point thinning against the already selected points.
        let mut dist: Vec<f64> = pool
            .iter()
            .map(|p| {
                points
                    .iter()
                    .map(|q| sup_diff(p.values(), q.values()))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        while points.len() < count {
            let (best, _) = dist.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, d)| {
                if *d > acc.1 {
                    (i, *d)
                } else {
                    acc
                }
            });
            let chosen = pool[best].clone();
            for (i, p) in pool.iter().enumerate() {
                dist[i] = dist[i].min(sup_diff(p.values(), chosen.values()));
            }
            dist[best] = f64::NEG_INFINITY;
            points.push(chosen);
        }
    }
    let gram = gram_matrix(&points);
    Ok(BallSample { chart: chart.clone(), radius, points, gram })
}

/// Worst four-point condition defect over all quadruples of the sample:
/// half the gap between the two largest of the three pairings.
pub fn hyperbolicity_delta(gram: &[Vec<f64>]) -> f64 {
    let m = gram.len();
    if m < 4 {
        return 0.0;
    }
    let mut delta = 0.0f64;
    for i in 0..m {
        for j in (i + 1)..m {
            for k in (j + 1)..m {
                for l in (k + 1)..m {
                    let s1 = gram[i][j] + gram[k][l];
                    let s2 = gram[i][k] + gram[j][l];
                    let s3 = gram[i][l] + gram[j][k];
                    let top = s1.max(s2).max(s3);
                    let mid = (s1 + s2 + s3) - top - s1.min(s2).min(s3);
                    delta = delta.max((top - mid) / 2.0);
                }
            }
        }
    }
    delta
}

/// Outcome of the ball-intersection search.
#[derive(Debug, Clone)]
pub struct HyperconvexityWitness {
    pub point: MoebiusPoint,
    /// max over balls of d(point, center) - radius.
    pub ball_residual: f64,
    pub satisfied: bool,
}

fn ball_residual(y: &[f64], balls: &[(usize, f64)], sample: &BallSample) -> f64 {
    balls
        .iter()
        .map(|&(idx, r)| sup_diff(y, sample.points[idx].values()) - r)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Searches for a member within distance r_i of every listed center. The
/// pairwise admissibility r_i + r_j >= d(x_i, x_j) is required (within
/// tol); the filling is injective, so a witness exists and the search
/// reports its best residual.
pub fn hyperconvexity_check(
    sample: &BallSample,
    balls: &[(usize, f64)],
    tol: f64,
) -> Result<HyperconvexityWitness> {
    assert!(!balls.is_empty(), "need at least one ball");
    for (a, &(i, ri)) in balls.iter().enumerate() {
        for &(j, rj) in &balls[a + 1..] {
            let d = sample.gram[i][j];
            if ri + rj < d - tol {
                return Err(Error::PairwiseConditionViolated { i, j, ri, rj, d });
            }
        }
    }
    let chart = &sample.chart;
    let n = chart.len();
    let rho = chart.space().base();
    // Coordinatewise interval hull of the ball constraints. Pairwise
    // admissibility makes every interval nonempty up to tol.
    let mut lower = vec![f64::NEG_INFINITY; n];
    let mut upper = vec![f64::INFINITY; n];
    for &(idx, r) in balls {
        let center = sample.points[idx].values();
        for j in 0..n {
            lower[j] = lower[j].max(center[j] - r);
            upper[j] = upper[j].min(center[j] + r);
        }
    }
    for j in 0..n {
        if lower[j] > upper[j] {
            let mid = 0.5 * (lower[j] + upper[j]);
            lower[j] = mid;
            upper[j] = mid;
        }
    }
    let membership_cap = tol.min(MEMBERSHIP_TOL);
    let mut best: Option<(Vec<f64>, f64)> = None;
    fn consider(
        best: &mut Option<(Vec<f64>, f64)>,
        candidate: &[f64],
        rho: &FiniteSemiMetric,
        cap: f64,
        balls: &[(usize, f64)],
        sample: &BallSample,
    ) {
        if discrepancy_wrt(candidate, rho).map(|d| d.sup_norm() <= cap).unwrap_or(false) {
            let res = ball_residual(candidate, balls, sample);
            if best.as_ref().map(|(_, b)| res < *b).unwrap_or(true) {
                *best = Some((candidate.to_vec(), res));
            }
        }
    }

    // Route 1: raise the lower corner of the box to tightness. The lower
    // corner is always feasible for the pair constraints
    // tau_i + tau_j <= -2 log rho(i,j), and raising each coordinate to the
    // smaller of its box cap and its tightness cap converges to a maximal
    // point of the feasible region, which is a member when no box cap binds.
    let cap = |tau: &[f64], i: usize| -> f64 {
        let mut c = upper[i];
        for j in 0..n {
            if j != i {
                c = c.min(-2.0 * rho.rho(i, j).ln() - tau[j]);
            }
        }
        c
    };
    let mut tau = lower.clone();
    for _ in 0..64 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let target = cap(&tau, i);
            moved = moved.max((target - tau[i]).abs());
            tau[i] = target;
        }
        if moved <= 1e-15 {
            break;
        }
    }
    consider(&mut best, &tau, rho, membership_cap, balls, sample);

    // Route 2: alternate between the flow projection onto the filling and
    // the exact box projection, starting from the box centre.
    let mut y: Vec<f64> = lower.iter().zip(&upper).map(|(l, u)| 0.5 * (l + u)).collect();
    for _ in 0..48 {
        let (member, _) = antipodalize_values(&y, rho, membership_cap, FLOW_STEP, FLOW_MAX_STEPS)?;
        consider(&mut best, &member, rho, membership_cap, balls, sample);
        if best.as_ref().map(|(_, b)| *b <= tol).unwrap_or(false) {
            break;
        }
        y = member.iter().enumerate().map(|(j, v)| v.clamp(lower[j], upper[j])).collect();
    }

    // Route 3: coordinate descent with shrinking steps from the incumbent.
    if let Some((seed_tau, seed_res)) = best.clone() {
        if seed_res > tol {
            let mut current = seed_tau;
            let mut current_res = seed_res;
            let mut step = current_res.max(1e-3);
            for _ in 0..24 {
                let mut improved = false;
                for j in 0..n {
                    for dir in [-1.0, 1.0] {
                        let mut trial = current.clone();
                        trial[j] += dir * step;
                        let (member, resid) = antipodalize_values(
                            &trial,
                            rho,
                            membership_cap,
                            FLOW_STEP,
                            FLOW_MAX_STEPS,
                        )?;
                        if resid <= membership_cap {
                            let r = ball_residual(&member, balls, sample);
                            if r < current_res - 1e-12 {
                                current = member;
                                current_res = r;
                                improved = true;
                            }
                        }
                    }
                }
                consider(&mut best, &current, rho, membership_cap, balls, sample);
                if current_res <= tol {
                    break;
                }
                if !improved {
                    step *= 0.5;
                    if step < 1e-9 {
                        break;
                    }
                }
            }
        }
    }

    let (values, residual) = best.expect("flow projection always yields a member");
    let point = MoebiusPoint {
        membership_residual: discrepancy_wrt(&values, rho)?.sup_norm(),
        tau: TauVector { chart: chart.clone(), values },
    };
    Ok(HyperconvexityWitness { point, ball_residual: residual, satisfied: residual <= tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semimetric::z4;

    const LN2: f64 = std::f64::consts::LN_2;

    fn z4_chart() -> Chart {
        Chart::new(z4())
    }

    #[test]
    fn discrepancy_on_z4_examples() {
        let chart = z4_chart();
        // tau = 0 -> D = 0 by antipodality.
        let zero = chart.tau(vec![0.0; 4]).unwrap();
        assert!(discrepancy(&zero).values.iter().all(|v| v.abs() < 1e-15));
        // tau = (1,-1,0,0) is a member: the cross terms sit below zero.
        let member = chart.tau(vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        let d = discrepancy(&member);
        assert!(d.sup_norm() < 1e-15);
        // tau = (1,0,0,0): rows 0 and 1 violate by exactly 1 via the pair (0,1).
        let bad = chart.tau(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let d = discrepancy(&bad);
        assert!((d.values[0] - 1.0).abs() < 1e-15);
        assert!((d.values[1] - 1.0).abs() < 1e-15);
        assert_eq!(d.argmax[0], 1);
        assert!(d.values[2].abs() < 1e-15);
        assert!(d.values[3].abs() < 1e-15);
    }

    #[test]
    fn membership_classifies_and_reports() {
        let chart = z4_chart();
        assert!(is_member(&chart.tau(vec![0.0; 4]).unwrap(), MEMBERSHIP_TOL).is_ok());
        assert!(is_member(&chart.tau(vec![1.0, -1.0, 0.0, 0.0]).unwrap(), MEMBERSHIP_TOL).is_ok());
        let rejection =
            is_member(&chart.tau(vec![1.0, 0.0, 0.0, 0.0]).unwrap(), MEMBERSHIP_TOL).unwrap_err();
        let rows: Vec<usize> = rejection.violating_rows.iter().map(|(i, _)| *i).collect();
        assert_eq!(rows, vec![0, 1]);
        assert!(rejection.violating_rows.iter().all(|(_, v)| *v > 0.0));
    }

    #[test]
    fn metric_is_sup_norm_with_base_check() {
        let chart = z4_chart();
        let a = antipodalize(&chart.tau(vec![1.0, -1.0, 0.0, 0.0]).unwrap(), 1e-10).unwrap();
        let base = chart.basepoint();
        assert_eq!(moebius_metric(&a, &a).unwrap(), 0.0);
        assert!((moebius_metric(&a, &base).unwrap() - 1.0).abs() < 1e-12);
        let other_chart = Chart::new(crate::gallery::circle_boundary(4).unwrap());
        let b = other_chart.basepoint();
        assert!(matches!(moebius_metric(&a, &b), Err(Error::BaseMismatch)));
    }

    #[test]
    fn flow_is_stationary_on_members() {
        let chart = z4_chart();
        let member = chart.tau(vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        let traj = flow_trajectory(&member, 0.05, 1.0).unwrap();
        for tau in &traj.taus {
            assert!(sup_diff(tau, member.values()) < 1e-14);
        }
    }

    #[test]
    fn flow_residuals_decay_and_limit_matches_estimate() {
        let chart = z4_chart();
        let start = chart.tau(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let d0 = discrepancy(&start).sup_norm();
        let traj = flow_trajectory(&start, 0.05, 20.0).unwrap();
        for pair in traj.discrepancy_norms.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "residual increased along the flow");
        }
        assert!(traj.final_residual() <= 4.0 * d0 * (-10.0f64).exp());
    }

    #[test]
    fn euler_halving_shows_first_order_convergence() {
        let chart = z4_chart();
        let start = chart.tau(vec![0.9, 0.3, -0.4, 0.2]).unwrap();
        // Compare against a much finer reference run at a fixed time.
        let t = 2.0;
        let reference = flow_trajectory(&start, 0.005, t).unwrap();
        let coarse = flow_trajectory(&start, 0.04, t).unwrap();
        let half = flow_trajectory(&start, 0.02, t).unwrap();
        let err_coarse = sup_diff(coarse.final_tau(), reference.final_tau());
        let err_half = sup_diff(half.final_tau(), reference.final_tau());
        assert!(
            err_half <= 0.65 * err_coarse,
            "halving the step should roughly halve the error: {err_coarse} -> {err_half}"
        );
    }

    #[test]
    fn antipodalize_member_returns_unchanged() {
        let chart = z4_chart();
        let member = chart.tau(vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        let p = antipodalize(&member, 1e-8).unwrap();
        assert!(sup_diff(p.values(), member.values()) < 1e-12);
    }

    #[test]
    fn antipodalize_repairs_and_respects_distance_bound() {
        let chart = z4_chart();
        let start = chart.tau(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let d0 = discrepancy(&start).sup_norm();
        let p = antipodalize(&start, 1e-8).unwrap();
        assert!(p.membership_residual() <= 1e-8);
        let moved = sup_diff(p.values(), start.values());
        assert!(moved <= 4.0 * d0 + 1e-6, "moved {moved} beyond 4*||D(tau0)||");
    }

    #[test]
    fn geodesic_scaling_on_z4() {
        let chart = z4_chart();
        let p = antipodalize(&chart.tau(vec![1.0, -1.0, 0.0, 0.0]).unwrap(), 1e-10).unwrap();
        for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let q = geodesic_point(&p, t, 1e-10).unwrap();
            assert!((q.norm() - t * p.norm()).abs() < 1e-8, "scaling failed at t = {t}");
        }
        let q0 = geodesic_point(&p, 0.0, 1e-10).unwrap();
        assert_eq!(q0.values(), vec![0.0; 4]);
        let q1 = geodesic_point(&p, 1.0, 1e-10).unwrap();
        assert!(sup_diff(q1.values(), p.values()) < 1e-10);
    }

    #[test]
    fn ray_points_match_closed_form_on_z4() {
        let chart = z4_chart();
        let p = boundary_ray_point(&chart, 0, 2.0, 1e-8).unwrap();
        let expected = [2.0, -2.0, -2.0 + 2.0 * LN2, -2.0 + 2.0 * LN2];
        assert!(sup_diff(p.values(), &expected) < 1e-12, "ray formula already a member");
        // Two ray points toward the same direction sit at unit distance.
        let q = boundary_ray_point(&chart, 0, 1.0, 1e-8).unwrap();
        assert!((sup_diff(p.values(), q.values()) - 1.0).abs() < 1e-7);
        // t = 0 lands on the base point.
        let o = boundary_ray_point(&chart, 0, 0.0, 1e-8).unwrap();
        assert!(o.norm() < 1e-12);
    }

    #[test]
    fn retraction_identities_on_ray_point() {
        let chart = z4_chart();
        let p = boundary_ray_point(&chart, 0, 2.0, 1e-10).unwrap();
        let r = retract_ball(&p, 1.0, 1e-10).unwrap();
        assert!((r.norm() - 1.0).abs() < 1e-7);
        let d_pr = moebius_metric(&p, &r).unwrap();
        assert!((p.norm() - d_pr - 1.0).abs() < 1e-6, "additivity along the radial geodesic");
        // Inside the ball nothing moves.
        let inside = retract_ball(&r, 2.0, 1e-10).unwrap();
        assert_eq!(inside.values(), r.values());
    }

    #[test]
    fn gromov_products_on_z4_rays() {
        let chart = z4_chart();
        let base = chart.basepoint();
        let a = boundary_ray_point(&chart, 0, 2.0, 1e-10).unwrap();
        let b = boundary_ray_point(&chart, 2, 2.0, 1e-10).unwrap();
        let ip = gromov_product(&a, &b, &base).unwrap();
        assert!((ip - LN2).abs() < 1e-9, "(a|b) should be log 2, got {ip}");
        // (a|a)_x = d(a,x).
        let self_ip = gromov_product(&a, &a, &base).unwrap();
        assert!((self_ip - a.norm()).abs() < 1e-12);
        // Upper bound via the argmax pair (0, 2) is attained here.
        let bound = -chart.space().rho(0, 2).ln();
        assert!(ip <= bound + 1e-9);
        assert!((ip - bound).abs() < 1e-9);
    }

    #[test]
    fn boundary_gromov_products_at_base() {
        let chart = z4_chart();
        let base = chart.basepoint();
        assert_eq!(boundary_gromov_product(&base, 0, 0).unwrap(), f64::INFINITY);
        assert!(boundary_gromov_product(&base, 0, 1).unwrap().abs() < 1e-15);
        assert!((boundary_gromov_product(&base, 0, 2).unwrap() - LN2).abs() < 1e-12);
    }

    #[test]
    fn visual_function_round_trip() {
        let chart = z4_chart();
        let base = chart.basepoint();
        let at_base = visual_function_at(&base, 1e-9).unwrap();
        assert_eq!(at_base.base(), chart.space().base());
        let p = antipodalize(&chart.tau(vec![1.0, -1.0, 0.0, 0.0]).unwrap(), 1e-10).unwrap();
        let visual = visual_function_at(&p, 1e-6).unwrap();
        assert!((visual.rho(0, 1) - 1.0).abs() < 1e-9);
        assert!((visual.rho(0, 2) - 0.5 * 0.5f64.exp()).abs() < 1e-9);
        assert!((visual.rho(1, 2) - 0.5 * (-0.5f64).exp()).abs() < 1e-9);
        let back =
            crate::semimetric::gmvt_derivative(visual.base(), chart.space().base(), 1e-8).unwrap();
        assert!(sup_diff(&back, p.values()) < 1e-10);
    }

    #[test]
    fn ball_sample_is_deterministic_and_valid() {
        let chart = z4_chart();
        let a = sample_ball(&chart, 2.0, 24, 7).unwrap();
        let b = sample_ball(&chart, 2.0, 24, 7).unwrap();
        assert_eq!(a.gram, b.gram);
        assert_eq!(a.len(), 24);
        for p in &a.points {
            assert!(p.membership_residual() <= MEMBERSHIP_TOL);
            assert!(p.norm() <= 2.0 + 1e-6);
        }
        // Center first, then the four rays.
        assert!(a.points[0].norm() < 1e-12);
        for zeta in 0..4 {
            assert!((a.points[1 + zeta].norm() - 2.0).abs() < 1e-7);
        }
        let single = sample_ball(&chart, 2.0, 1, 7).unwrap();
        assert_eq!(single.len(), 1);
        assert!(single.points[0].norm() < 1e-12);
        let other = sample_ball(&chart, 2.0, 24, 8).unwrap();
        assert_ne!(a.gram, other.gram);
    }

    #[test]
    fn hyperbolicity_delta_degenerate_cases() {
        // Fewer than four points: no quadruples.
        assert_eq!(hyperbolicity_delta(&[vec![0.0]]), 0.0);
        // Points on a common geodesic look like a path metric: delta = 0.
        let line: [f64; 4] = [0.0, 1.0, 2.5, 4.0];
        let gram: Vec<Vec<f64>> =
            line.iter().map(|a| line.iter().map(|b| (a - b).abs()).collect()).collect();
        assert!(hyperbolicity_delta(&gram) < 1e-12);
        let chart = z4_chart();
        let sample = sample_ball(&chart, 3.0, 16, 3).unwrap();
        let delta = hyperbolicity_delta(&sample.gram);
        assert!(delta.is_finite() && delta >= 0.0);
    }

    #[test]
    fn hyperconvexity_same_center_and_midpoint() {
        let chart = z4_chart();
        let sample = sample_ball(&chart, 2.0, 12, 5).unwrap();
        // Two balls on the same center: that center is a witness.
        let w = hyperconvexity_check(&sample, &[(2, 0.3), (2, 0.7)], 1e-6).unwrap();
        assert!(w.satisfied);
        assert!(w.ball_residual <= 1e-6);
        // Balls of radius d/2 around two points meet at a midpoint.
        let d = sample.gram[0][2];
        let w = hyperconvexity_check(&sample, &[(0, d / 2.0), (2, d / 2.0)], 1e-6).unwrap();
        assert!(w.satisfied, "midpoint witness missing, residual {}", w.ball_residual);
        assert!(w.point.membership_residual() <= 1e-8);
    }

    #[test]
    fn hyperconvexity_rejects_inadmissible_radii() {
        let chart = z4_chart();
        let sample = sample_ball(&chart, 2.0, 8, 5).unwrap();
        let d = sample.gram[0][1];
        let err = hyperconvexity_check(&sample, &[(0, d / 4.0), (1, d / 4.0)], 1e-9).unwrap_err();
        assert!(matches!(err, Error::PairwiseConditionViolated { .. }));
    }
}
