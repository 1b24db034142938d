//! Cross-module invariant properties on seeded and generated inputs.

use proptest::prelude::*;

use mzfill::filling::{
    antipodal_net, filling_convergence_experiment, partition_of_unity, smoothing_operator,
};
use mzfill::gallery::{circle_boundary, random_antipodal, tree_boundary};
use mzfill::moebius::{antipodalize, discrepancy, moebius_metric, sample_ball, Chart};
use mzfill::rng::{self, SplitMix64};
use mzfill::rough::{
    ai_distance, covering_radius, distortion, gh_distance, invert_rough_isometry,
    rough_isometry_report, SearchMode,
};
use mzfill::semimetric::{gmvt_apply, gmvt_derivative, FiniteSemiMetric};

fn seeded_tau(n: usize, bound: f64, seed: u64) -> Vec<f64> {
    (0..n).map(|i| bound * rng::symmetric(rng::derive(seed, i as u64))).collect()
}

fn sup(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cross_ratios_invariant_under_derivative_action(seed in any::<u64>(), n in 4usize..9) {
        let space = random_antipodal(n, seed).unwrap();
        let tau = seeded_tau(n, 2.0, seed ^ 0xabc);
        let moved = gmvt_apply(&tau, space.base()).unwrap();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let quad = [a, b, c, d];
                        let mut unique = quad.to_vec();
                        unique.sort_unstable();
                        unique.dedup();
                        if unique.len() != 4 {
                            continue;
                        }
                        let before = space.cross_ratio(a, b, c, d).unwrap();
                        let after = moved.cross_ratio(a, b, c, d).unwrap();
                        prop_assert!(((before - after) / before).abs() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn derivative_recovery_round_trips(seed in any::<u64>(), n in 4usize..12) {
        let space = random_antipodal(n, seed).unwrap();
        let tau = seeded_tau(n, 1.5, seed ^ 0x123);
        let moved = gmvt_apply(&tau, space.base()).unwrap();
        let back = gmvt_derivative(&moved, space.base(), 1e-8).unwrap();
        for (a, b) in tau.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn nets_cover_and_separate(seed in any::<u64>(), n in 4usize..20, eps_scale in 0.1f64..0.9) {
        let space = random_antipodal(n, seed).unwrap();
        let eps = eps_scale * space.diameter();
        let net = space.epsilon_net(eps, 0);
        for i in 0..n {
            let nearest = net
                .iter()
                .map(|&s| if s == i { 0.0 } else { space.rho(s, i) })
                .fold(f64::INFINITY, f64::min);
            prop_assert!(nearest <= eps);
        }
        for (a, &i) in net.iter().enumerate() {
            for &j in &net[a + 1..] {
                prop_assert!(space.rho(i, j) >= eps);
            }
        }
    }

    #[test]
    fn discrepancy_is_two_lipschitz(seed in any::<u64>(), n in 4usize..12) {
        let chart = Chart::new(random_antipodal(n, seed).unwrap());
        let t1 = chart.tau(seeded_tau(n, 3.0, seed ^ 0x1)).unwrap();
        let t2 = chart.tau(seeded_tau(n, 3.0, seed ^ 0x2)).unwrap();
        let d1 = discrepancy(&t1);
        let d2 = discrepancy(&t2);
        let lhs = d1.values.iter().zip(&d2.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let dist = t1.values().iter().zip(t2.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assert!(lhs <= 2.0 * dist * (1.0 + 1e-12));
        prop_assert!(d1.sup_norm() <= 2.0 * sup(t1.values()) * (1.0 + 1e-12));
    }

    #[test]
    fn smoothing_contracts_and_partitions(seed in any::<u64>(), delta in 0.15f64..0.5) {
        let circle = circle_boundary(32).unwrap();
        let net = circle.epsilon_net(delta, 0);
        let pou = partition_of_unity(circle.base(), &net, delta).unwrap();
        for xi in 0..circle.len() {
            let total: f64 = pou.weights.iter().map(|row| row[xi]).sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }
        let values = seeded_tau(net.len(), 2.0, seed);
        let smoothed = smoothing_operator(&values, &pou).unwrap();
        prop_assert!(sup(&smoothed) <= sup(&values) * (1.0 + 1e-12));
    }

    #[test]
    fn sup_metric_triangle_inequality(seed in any::<u64>()) {
        let chart = Chart::new(random_antipodal(5, seed).unwrap());
        let points: Vec<_> = (0..3u64)
            .map(|k| antipodalize(&chart.tau(seeded_tau(5, 2.0, seed ^ k)).unwrap(), 1e-9).unwrap())
            .collect();
        let d01 = moebius_metric(&points[0], &points[1]).unwrap();
        let d12 = moebius_metric(&points[1], &points[2]).unwrap();
        let d02 = moebius_metric(&points[0], &points[2]).unwrap();
        prop_assert!(d02 <= d01 + d12 + 1e-12);
    }
}

#[test]
fn ball_samples_are_deterministic_and_serializable() {
    let chart = Chart::new(circle_boundary(8).unwrap());
    let a = sample_ball(&chart, 2.0, 20, 9).unwrap();
    let b = sample_ball(&chart, 2.0, 20, 9).unwrap();
    assert_eq!(a.gram, b.gram);
    let json = serde_json::to_string(&a.to_json()).unwrap();
    let parsed: mzfill::moebius::BallSampleJson = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed.gram, a.gram);
    assert_eq!(parsed.radius, 2.0);
    assert_eq!(parsed.taus.len(), 20);
}

#[test]
fn circle_doubling_has_isometric_inclusion_and_small_ai_distance() {
    for n in [4usize, 8, 16] {
        let small = circle_boundary(n).unwrap();
        let big = circle_boundary(2 * n).unwrap();
        let inclusion: Vec<usize> = (0..n).map(|i| 2 * i).collect();
        let report = rough_isometry_report(small.base(), big.base(), &inclusion);
        assert_eq!(report.distortion, 0.0, "doubling inclusion must be exact");
        // The almost-isometry distance is witnessed at the covering radius.
        let witnessed =
            ai_distance(small.base(), big.base(), SearchMode::Heuristic, 32, 7).unwrap();
        assert!(
            witnessed.epsilon <= report.covering_radius + 1e-12,
            "c{n}: witnessed {} beyond covering radius {}",
            witnessed.epsilon,
            report.covering_radius
        );
    }
    // Small enough for the exact search: the distance equals the radius.
    let c4 = circle_boundary(4).unwrap();
    let c8 = circle_boundary(8).unwrap();
    let exact = ai_distance(c4.base(), c8.base(), SearchMode::Exact, 0, 0).unwrap();
    let inclusion: Vec<usize> = (0..4).map(|i| 2 * i).collect();
    let report = rough_isometry_report(c4.base(), c8.base(), &inclusion);
    assert!((exact.epsilon - report.covering_radius).abs() <= 1e-12);
}

#[test]
fn ai_zero_agrees_with_permutation_oracle() {
    // Exhaustive permutation search for an exact isometry on <= 6 points.
    fn permutation_isometry_exists(a: &FiniteSemiMetric, b: &FiniteSemiMetric) -> bool {
        if a.len() != b.len() {
            return false;
        }
        let n = a.len();
        let mut perm: Vec<usize> = (0..n).collect();
        fn heaps(
            perm: &mut Vec<usize>,
            k: usize,
            a: &FiniteSemiMetric,
            b: &FiniteSemiMetric,
        ) -> bool {
            if k == 1 {
                let n = a.len();
                for i in 0..n {
                    for j in 0..n {
                        if a.rho(i, j) != b.rho(perm[i], perm[j]) {
                            return false;
                        }
                    }
                }
                return true;
            }
            for i in 0..k {
                if heaps(perm, k - 1, a, b) {
                    return true;
                }
                if k.is_multiple_of(2) {
                    perm.swap(i, k - 1);
                } else {
                    perm.swap(0, k - 1);
                }
            }
            false
        }
        heaps(&mut perm, n, a, b)
    }

    for seed in 0..6u64 {
        let a = random_antipodal(5, 40 + seed).unwrap();
        let perm = {
            let mut p: Vec<usize> = (0..5).collect();
            let mut gen = SplitMix64::new(seed);
            for i in (1..5).rev() {
                let j = gen.next_index(i + 1);
                p.swap(i, j);
            }
            p
        };
        let mut m = vec![vec![0.0; 5]; 5];
        for i in 0..5 {
            for j in 0..5 {
                m[i][j] = a.rho(perm[i], perm[j]);
            }
        }
        let b = FiniteSemiMetric::from_matrix(&m).unwrap();
        let witness = ai_distance(a.base(), &b, SearchMode::Exact, 0, 0).unwrap();
        assert_eq!(witness.epsilon == 0.0, permutation_isometry_exists(a.base(), &b));
        // Perturb one entry: the oracle loses the isometry and the distance
        // becomes positive.
        let mut bumped = m.clone();
        bumped[0][2] += 0.07;
        bumped[2][0] += 0.07;
        if let Ok(bad) = FiniteSemiMetric::from_matrix(&bumped) {
            let w = ai_distance(a.base(), &bad, SearchMode::Exact, 0, 0).unwrap();
            assert!(w.epsilon > 0.0);
            assert!(!permutation_isometry_exists(a.base(), &bad));
        }
    }
}

#[test]
fn gh_ai_factor_two_diagnostics_on_small_metrics() {
    // Recorded relation between the two distances on metric inputs; the
    // correspondence route never exceeds the almost-isometry route by more
    // than the factor-two implications allow.
    for seed in 0..8u64 {
        let a = circle_boundary(4 + 2 * (seed as usize % 2)).unwrap();
        let bm = {
            let mut gen = SplitMix64::new(60 + seed);
            let angles: Vec<f64> = (0..5)
                .map(|k| (k as f64 + 0.49 * gen.next_unit()) * std::f64::consts::TAU / 5.0)
                .collect();
            (0..5)
                .map(|i| {
                    (0..5_usize)
                        .map(|j| ((angles[i] - angles[j]) / 2.0).sin().abs())
                        .collect::<Vec<f64>>()
                })
                .collect::<Vec<_>>()
        };
        let b = FiniteSemiMetric::from_matrix(&bm).unwrap();
        let d_ai = ai_distance(a.base(), &b, SearchMode::Exact, 0, 0).unwrap().epsilon;
        let d_gh = gh_distance(&a.matrix(), &bm, SearchMode::Exact, 0, 0).unwrap();
        println!("seed {seed}: |2 d_GH - d_AI| = {:.6}", (2.0 * d_gh - d_ai).abs());
        assert!(d_gh.is_finite() && d_ai.is_finite());
        assert!(d_gh > 0.0 && d_ai > 0.0);
        // Factor-two implications in both directions: an optimal
        // correspondence yields eps-isometries at twice the distance, and
        // any eps-isometry pair yields a correspondence within twice eps.
        assert!(d_ai <= 2.0 * d_gh + 1e-9);
        assert!(d_gh <= 2.0 * d_ai + 1e-9);
    }
}

#[test]
fn inverse_maps_obey_both_bounds_exhaustively() {
    for (seed, eps_scale) in [(1u64, 0.2f64), (2, 0.35), (3, 0.5)] {
        let big = circle_boundary(32).unwrap();
        let eps_target = eps_scale;
        let net = big.epsilon_net(eps_target, seed as usize % 32);
        let small = big.restriction(&net).unwrap();
        let report = rough_isometry_report(&small, big.base(), &net);
        let eps = report.epsilon + 1e-12;
        let inverse = invert_rough_isometry(&small, big.base(), &net, eps);
        assert!(distortion(big.base(), &small, &inverse) <= 3.0 * eps);
        // The image contains a 2-eps net of the source, so the covering
        // radius stays within twice the net separation.
        assert!(covering_radius(big.base(), &small, &inverse) <= 2.0 * (2.0 * eps));
    }
}

#[test]
fn pulled_back_oscillation_and_discrepancy_shrink_along_nets() {
    // Appendix-style records: the oscillation of sampled members over
    // close pairs, and the pulled-back discrepancy, both shrink as the net
    // refines.
    let chart = Chart::new(circle_boundary(32).unwrap());
    let sample = sample_ball(&chart, 2.0, 24, 5).unwrap();
    // Oscillation modulus of the sampled members at shrinking scales.
    let mut oscillations = Vec::new();
    for delta in [0.4, 0.2, 0.1] {
        let mut worst = 0.0f64;
        for p in &sample.points {
            for i in 0..chart.len() {
                for j in 0..chart.len() {
                    if i != j && chart.space().rho(i, j) < delta {
                        worst = worst.max((p.values()[i] - p.values()[j]).abs());
                    }
                }
            }
        }
        oscillations.push(worst);
    }
    assert!(oscillations[2] <= oscillations[1] && oscillations[1] <= oscillations[0]);
    // Pulled-back discrepancy along nested antipodal nets.
    let report = filling_convergence_experiment(&chart, &[8, 16], 2.0, 24, 5).unwrap();
    assert!(report.rows[1].sup_discrepancy <= report.rows[0].sup_discrepancy);
}

#[test]
fn antipodal_nets_stay_valid_on_trees() {
    let tree = tree_boundary(2, 5).unwrap();
    for size in [4, 8, 16] {
        let net = antipodal_net(&tree, size, 0);
        let sub = tree.restriction(&net).unwrap();
        assert!(mzfill::semimetric::AntipodalSpace::validate(sub).is_ok());
    }
}

#[test]
fn radial_curve_is_a_geodesic_segmentwise() {
    // Beyond the endpoint scaling law, consecutive points of the radial
    // curve are additively spaced: d(p_s, p_t) = |t - s| d(p, o).
    for seed in 0..5u64 {
        let chart = Chart::new(random_antipodal(5 + (seed as usize % 3), 120 + seed).unwrap());
        let member =
            antipodalize(&chart.tau(seeded_tau(chart.len(), 2.5, seed ^ 0x7f)).unwrap(), 1e-10)
                .unwrap();
        let d = member.norm();
        let grid: Vec<f64> = (0..=6).map(|k| f64::from(k) / 6.0).collect();
        let points: Vec<_> = grid
            .iter()
            .map(|&t| mzfill::moebius::geodesic_point(&member, t, 1e-10).unwrap())
            .collect();
        for (i, s) in grid.iter().enumerate() {
            for (j, t) in grid.iter().enumerate().skip(i + 1) {
                let measured = moebius_metric(&points[i], &points[j]).unwrap();
                assert!(
                    (measured - (t - s) * d).abs() <= 1e-6,
                    "segment ({s},{t}): {measured} vs {}",
                    (t - s) * d
                );
            }
        }
    }
}

#[test]
fn pulled_back_discrepancy_obeys_the_explicit_upper_bound() {
    // For a delta-isometry h into the base of a ball of radius R, the
    // pulled-back discrepancy of any member is at most 2 delta / (e^{-2R} - delta)
    // from above: the supremum over the pulled index set loses at most the
    // distortion per pair, and attaining pairs keep separation >= e^{-2R}.
    let base = {
        let m = vec![
            vec![0.0, 1.0, 0.5, 0.5],
            vec![1.0, 0.0, 0.5, 0.5],
            vec![0.5, 0.5, 0.0, 1.0],
            vec![0.5, 0.5, 1.0, 0.0],
        ];
        mzfill::semimetric::AntipodalSpace::validate(FiniteSemiMetric::from_matrix(&m).unwrap())
            .unwrap()
    };
    // The bound needs delta below exp(-2R), so work in a unit ball with
    // small perturbations.
    let radius = 1.0;
    let chart = Chart::new(base.clone());
    let sample = sample_ball(&chart, radius, 20, 13).unwrap();
    for eta in [0.04, 0.01] {
        let perturbed = mzfill::gallery::perturb_antipodal(&base, eta, 3).unwrap();
        // h: perturbed -> base is the identity on labels.
        let identity: Vec<usize> = (0..4).collect();
        let delta = distortion(perturbed.base(), base.base(), &identity).max(covering_radius(
            perturbed.base(),
            base.base(),
            &identity,
        ));
        let cap = 2.0 * delta / ((-2.0 * radius).exp() - delta);
        assert!(cap > 0.0, "bound degenerates; shrink eta");
        for p in &sample.points {
            let disc = mzfill::moebius::discrepancy_wrt(p.values(), perturbed.base()).unwrap();
            let signed_max = disc.values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
            assert!(
                signed_max <= cap + 1e-9,
                "eta {eta}: positive discrepancy {signed_max} beyond {cap}"
            );
        }
    }
}

#[test]
fn member_oscillation_bounded_by_antipode_ratio() {
    // For a member of a ball and any pair of directions, the chart gap is
    // controlled by the separations to the antipode of the smaller side:
    // tau(eta) - tau(xi) <= 2 log(rho0(xi, a) / rho0(eta, a)) where a is a
    // rho-antipode of xi.
    let chart = Chart::new(circle_boundary(16).unwrap());
    let sample = sample_ball(&chart, 2.0, 16, 21).unwrap();
    let n = chart.len();
    for p in &sample.points {
        let visual = mzfill::moebius::visual_function_at(p, 1e-6).unwrap();
        for xi in 0..n {
            // rho-antipode of xi: the row maximum of the visual function.
            let a = (0..n)
                .filter(|&j| j != xi)
                .max_by(|&x, &y| visual.rho(xi, x).partial_cmp(&visual.rho(xi, y)).unwrap())
                .unwrap();
            for eta in 0..n {
                if eta == xi || eta == a {
                    continue;
                }
                let gap = p.values()[eta] - p.values()[xi];
                let bound = 2.0 * (chart.space().rho(xi, a) / chart.space().rho(eta, a)).ln();
                assert!(
                    gap <= bound + 1e-6,
                    "oscillation {gap} beyond antipode-ratio bound {bound}"
                );
            }
        }
    }
}

#[test]
fn flow_residuals_never_increase_along_trajectories() {
    for seed in 0..6u64 {
        let chart = Chart::new(random_antipodal(6, 80 + seed).unwrap());
        let tau = chart.tau(seeded_tau(6, 2.0, seed)).unwrap();
        let d0 = discrepancy(&tau).sup_norm();
        let horizon = 12.0;
        let trajectory = mzfill::moebius::flow_trajectory(&tau, 0.05, horizon).unwrap();
        for pair in trajectory.discrepancy_norms.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-10, "residual increased: {pair:?}");
        }
        // Residual tail from the distance estimate and the Lipschitz law.
        let tail = 8.0 * d0 * (-horizon / 2.0).exp() + 1e-9;
        assert!(trajectory.final_residual() <= tail);
    }
}

fn enumerate_maps(n: usize, m: usize) -> Vec<Vec<usize>> {
    let total = m.pow(n as u32);
    (0..total)
        .map(|code| {
            let mut c = code;
            (0..n)
                .map(|_| {
                    let v = c % m;
                    c /= m;
                    v
                })
                .collect()
        })
        .collect()
}

#[test]
fn ai_search_matches_full_enumeration() {
    for seed in 0..30u64 {
        let na = 4 + (seed as usize) % 2;
        let nb = 4 + (seed as usize + 1) % 2;
        let a = random_antipodal(na, 1000 + seed).unwrap();
        let b = random_antipodal(nb, 2000 + seed).unwrap();
        let exact = ai_distance(a.base(), b.base(), SearchMode::Exact, 0, 0).unwrap();
        let brute = |src: &FiniteSemiMetric, dst: &FiniteSemiMetric| {
            enumerate_maps(src.len(), dst.len())
                .iter()
                .map(|map| mzfill::rough::rough_isometry_report(src, dst, map).epsilon)
                .fold(f64::INFINITY, f64::min)
        };
        let expected = brute(a.base(), b.base()).max(brute(b.base(), a.base()));
        assert!(
            (exact.epsilon - expected).abs() < 1e-14,
            "seed {seed}: pruned search {} vs enumeration {expected}",
            exact.epsilon
        );
    }
}

#[test]
fn gh_search_matches_full_enumeration() {
    // Random point configurations on the circle with the chordal
    // separation: always metric, and small enough to enumerate.
    fn random_chordal_metric(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut gen = SplitMix64::new(seed);
        let angles: Vec<f64> =
            (0..n).map(|k| (k as f64 + 0.49 * gen.next_unit()) * std::f64::consts::TAU / n as f64).collect();
        (0..n)
            .map(|i| (0..n).map(|j| ((angles[i] - angles[j]) / 2.0).sin().abs()).collect())
            .collect()
    }
    let mut checked = 0usize;
    for seed in 0..20u64 {
        let na = 3 + (seed as usize) % 2;
        let nb = 3 + (seed as usize + 1) % 2;
        let am = random_chordal_metric(na, 3000 + seed);
        let bm = random_chordal_metric(nb, 4000 + seed);
        let exact = gh_distance(&am, &bm, SearchMode::Exact, 0, 0).unwrap();
        let mut best = f64::INFINITY;
        for f in enumerate_maps(na, nb) {
            for g in enumerate_maps(nb, na) {
                let mut defect = 0.0f64;
                for i in 0..na {
                    for j in (i + 1)..na {
                        defect = defect.max((bm[f[i]][f[j]] - am[i][j]).abs());
                    }
                }
                for i in 0..nb {
                    for j in (i + 1)..nb {
                        defect = defect.max((am[g[i]][g[j]] - bm[i][j]).abs());
                    }
                }
                for i in 0..na {
                    for j in 0..nb {
                        defect = defect.max((am[i][g[j]] - bm[f[i]][j]).abs());
                    }
                }
                best = best.min(defect);
            }
        }
        assert!(
            (exact - 0.5 * best).abs() < 1e-14,
            "seed {seed}: pruned search {exact} vs enumeration {}",
            0.5 * best
        );
        checked += 1;
    }
    assert!(checked == 20, "expected all instances checked, got {checked}");
}
