//! Seeded cross-module invariant battery, shared by the CLI
//! `invariant-suite` command and the test suite.

use crate::boundary::{components, default_eps_link, sphere_sample};
use crate::error::Result;
use crate::filling::{partition_of_unity, smoothing_operator};
use crate::gallery::{circle_boundary, random_antipodal};
use crate::moebius::{
    boundary_ray_point, discrepancy, geodesic_point, gromov_product, moebius_metric, retract_ball,
    sample_ball, Chart, MEMBERSHIP_TOL,
};
use crate::rng::SplitMix64;
use crate::rough::{
    ai_distance, covering_radius, distortion, invert_rough_isometry, rough_isometry_report,
    SearchMode,
};
use crate::semimetric::{equicontinuity_modulus, gmvt_apply, gmvt_derivative};

/// Outcome of one invariant check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

/// Runs the full battery with the given seed. Each entry is one invariant
/// from the module contracts, evaluated on seeded instances.
pub fn run_invariant_suite(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut outcomes = Vec::new();
    let mut gen = SplitMix64::new(seed);

    // Cross-ratio invariance under the log-derivative action.
    {
        let mut worst = 0.0f64;
        for trial in 0..8 {
            let space = random_antipodal(4 + (trial % 4), seed.wrapping_add(trial as u64))?;
            let tau: Vec<f64> = (0..space.len()).map(|_| gen.next_range(-1.5, 1.5)).collect();
            let moved = gmvt_apply(&tau, space.base())?;
            let n = space.len();
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        for d in 0..n {
                            if a == b || a == c || a == d || b == c || b == d || c == d {
                                continue;
                            }
                            let before = space.cross_ratio(a, b, c, d)?;
                            let after = moved.cross_ratio(a, b, c, d)?;
                            worst = worst.max(((before - after) / before).abs());
                        }
                    }
                }
            }
        }
        outcomes.push(check(
            "cross_ratio_invariance",
            worst <= 1e-12,
            format!("worst relative drift {worst:.3e}"),
        ));
    }

    // Derivative recovery inverts the action.
    {
        let mut worst = 0.0f64;
        for trial in 0..8 {
            let space = random_antipodal(5 + (trial % 3), seed.wrapping_add(100 + trial as u64))?;
            let tau: Vec<f64> = (0..space.len()).map(|_| gen.next_range(-1.0, 1.0)).collect();
            let moved = gmvt_apply(&tau, space.base())?;
            let back = gmvt_derivative(&moved, space.base(), 1e-8)?;
            for (a, b) in tau.iter().zip(&back) {
                worst = worst.max((a - b).abs());
            }
        }
        outcomes.push(check(
            "gmvt_round_trip",
            worst <= 1e-10,
            format!("worst recovery error {worst:.3e}"),
        ));
    }

    // Net covering and separation.
    {
        let circle = circle_boundary(64)?;
        let mut ok = true;
        for eps in [0.15, 0.3, 0.6] {
            let net = circle.epsilon_net(eps, 0);
            for i in 0..circle.len() {
                let near = net.iter().map(|&s| circle.rho(s, i)).fold(f64::INFINITY, f64::min);
                ok &= near <= eps;
            }
            for (a, &i) in net.iter().enumerate() {
                for &j in &net[a + 1..] {
                    ok &= circle.rho(i, j) >= eps;
                }
            }
        }
        outcomes.push(check("epsilon_net_cover_separate", ok, "eps in {0.15,0.3,0.6}".into()));
    }

    // Metric families have modulus bounded by delta.
    {
        let family = [circle_boundary(8)?, circle_boundary(16)?, circle_boundary(32)?];
        let bases: Vec<_> = family.iter().map(|s| s.base()).collect();
        let grid = [0.1, 0.2, 0.4, 0.8];
        let modulus = equicontinuity_modulus(&bases, &grid);
        let ok = grid.iter().zip(&modulus.omegas).all(|(d, w)| w <= d);
        outcomes.push(check(
            "equicontinuity_metric_bound",
            ok,
            format!("omegas {:?}", modulus.omegas),
        ));
    }

    // Discrepancy Lipschitz law and norm bound.
    {
        let mut worst = 0.0f64;
        for trial in 0..16 {
            let space = random_antipodal(4 + (trial % 5), seed.wrapping_add(200 + trial as u64))?;
            let chart = Chart::new(space);
            let t1: Vec<f64> = (0..chart.len()).map(|_| gen.next_range(-2.0, 2.0)).collect();
            let t2: Vec<f64> = (0..chart.len()).map(|_| gen.next_range(-2.0, 2.0)).collect();
            let d1 = discrepancy(&chart.tau(t1.clone())?);
            let d2 = discrepancy(&chart.tau(t2.clone())?);
            let lhs: f64 =
                d1.values.iter().zip(&d2.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let dist = t1.iter().zip(&t2).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            worst = worst.max(lhs - 2.0 * dist);
            let norm1 = t1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            worst = worst.max(d1.sup_norm() - 2.0 * norm1);
        }
        outcomes.push(check(
            "discrepancy_lipschitz_and_bound",
            worst <= 1e-12,
            format!("worst excess {worst:.3e}"),
        ));
    }

    // Flow tail estimate, geodesic scaling, retraction identities, and the
    // Gromov product bound, on one seeded ball sample.
    {
        let chart = Chart::new(circle_boundary(8)?);
        let sample = sample_ball(&chart, 2.0, 12, seed)?;
        let base = chart.basepoint();
        let mut geodesic_err = 0.0f64;
        let mut retraction_err = 0.0f64;
        let mut gromov_excess = 0.0f64;
        for p in &sample.points {
            for t in [0.25, 0.5, 0.75] {
                let q = geodesic_point(p, t, MEMBERSHIP_TOL)?;
                geodesic_err = geodesic_err.max((q.norm() - t * p.norm()).abs());
            }
            if p.norm() > 1.0 {
                let r = retract_ball(p, 1.0, MEMBERSHIP_TOL)?;
                retraction_err = retraction_err.max((r.norm() - 1.0).abs());
                let d_pr = moebius_metric(p, &r)?;
                retraction_err = retraction_err.max((p.norm() - d_pr - 1.0).abs());
            }
        }
        for a in &sample.points {
            for b in &sample.points {
                let ip = gromov_product(a, b, &base)?;
                let amax = a.tau().argmax_set();
                let bmax = b.tau().argmax_set();
                for &xi in &amax {
                    for &eta in &bmax {
                        if xi != eta {
                            let bound = -chart.space().rho(xi, eta).ln();
                            gromov_excess = gromov_excess.max(ip - bound);
                        }
                    }
                }
            }
        }
        outcomes.push(check(
            "geodesic_scaling",
            geodesic_err <= 1e-4,
            format!("worst |d - t d| = {geodesic_err:.3e}"),
        ));
        outcomes.push(check(
            "retraction_identities",
            retraction_err <= 1e-6,
            format!("worst identity error {retraction_err:.3e}"),
        ));
        outcomes.push(check(
            "gromov_product_upper_bound",
            gromov_excess <= 1e-9,
            format!("worst excess {gromov_excess:.3e}"),
        ));
    }

    // Membership is preserved by the point constructions.
    {
        let chart = Chart::new(circle_boundary(8)?);
        let mut worst = 0.0f64;
        for zeta in 0..chart.len() {
            let ray = boundary_ray_point(&chart, zeta, 2.5, MEMBERSHIP_TOL)?;
            worst = worst.max(ray.membership_residual());
            let retracted = retract_ball(&ray, 1.0, MEMBERSHIP_TOL)?;
            worst = worst.max(retracted.membership_residual());
            let mid = geodesic_point(&ray, 0.5, MEMBERSHIP_TOL)?;
            worst = worst.max(mid.membership_residual());
        }
        outcomes.push(check(
            "membership_preserved",
            worst <= MEMBERSHIP_TOL,
            format!("worst residual {worst:.3e}"),
        ));
    }

    // Smoothing is a sup-norm contraction with unit column sums.
    {
        let circle = circle_boundary(32)?;
        let net = circle.epsilon_net(0.3, 0);
        let pou = partition_of_unity(circle.base(), &net, 0.3)?;
        let mut ok = true;
        for xi in 0..circle.len() {
            let total: f64 = pou.weights.iter().map(|row| row[xi]).sum();
            ok &= (total - 1.0).abs() <= 1e-12;
        }
        let values: Vec<f64> = (0..net.len()).map(|_| gen.next_range(-1.0, 1.0)).collect();
        let smoothed = smoothing_operator(&values, &pou)?;
        let in_norm = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let out_norm = smoothed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        ok &= out_norm <= in_norm + 1e-12;
        outcomes.push(check(
            "smoothing_contraction",
            ok,
            format!("|C(tau)| = {out_norm:.3e} vs |tau| = {in_norm:.3e}"),
        ));
    }

    // Almost-isometry distance is symmetric and vanishes on relabellings.
    {
        let a = random_antipodal(5, seed.wrapping_add(300))?;
        let b = random_antipodal(6, seed.wrapping_add(301))?;
        let ab = ai_distance(a.base(), b.base(), SearchMode::Exact, 0, 0)?;
        let ba = ai_distance(b.base(), a.base(), SearchMode::Exact, 0, 0)?;
        let mut ok = ab.epsilon == ba.epsilon;
        let perm = [2usize, 0, 3, 1, 4];
        let mut m = vec![vec![0.0; 5]; 5];
        for i in 0..5 {
            for j in 0..5 {
                m[i][j] = a.rho(perm[i], perm[j]);
            }
        }
        let relabeled = crate::semimetric::FiniteSemiMetric::from_matrix(&m)?;
        let zero = ai_distance(a.base(), &relabeled, SearchMode::Exact, 0, 0)?;
        ok &= zero.epsilon == 0.0;
        outcomes.push(check(
            "ai_distance_symmetry_and_zero",
            ok,
            format!("d(a,b) = {:.3e}, permuted = {:.3e}", ab.epsilon, zero.epsilon),
        ));
    }

    // Inverse maps obey the 3-eps distortion bound on net inclusions.
    {
        let big = circle_boundary(32)?;
        let net = big.epsilon_net(0.4, 0);
        let small = big.restriction(&net)?;
        let report = rough_isometry_report(&small, big.base(), &net);
        let eps = report.epsilon + 1e-12;
        let g = invert_rough_isometry(&small, big.base(), &net, eps);
        let d_inv = distortion(big.base(), &small, &g);
        let cover = covering_radius(big.base(), &small, &g);
        let ok = d_inv <= 3.0 * eps && cover <= 4.0 * eps;
        outcomes.push(check(
            "inverse_three_eps",
            ok,
            format!("distortion {d_inv:.3e} vs 3 eps = {:.3e}", 3.0 * eps),
        ));
    }

    // Shadows partition the boundary and cross components stay below R.
    {
        let chart = Chart::new(crate::gallery::random_antipodal(4, seed.wrapping_add(400))?);
        let radius = 3.0;
        let sample = sphere_sample(&chart, radius, 8, seed)?;
        let decomp = components(&sample, default_eps_link(&sample))?;
        let mut seen: Vec<usize> = decomp.shadows.iter().flatten().copied().collect();
        seen.sort_unstable();
        let mut ok = seen == (0..chart.len()).collect::<Vec<_>>();
        let base = chart.basepoint();
        for u in 0..decomp.len() {
            for v in (u + 1)..decomp.len() {
                for &p in &decomp.components[u] {
                    for &q in &decomp.components[v] {
                        let ip = gromov_product(&sample.points[p], &sample.points[q], &base)?;
                        ok &= ip <= radius + 1e-6;
                    }
                }
            }
        }
        outcomes.push(check(
            "shadows_partition_and_cross_bound",
            ok,
            format!("{} components", decomp.len()),
        ));
    }

    Ok(outcomes)
}
