use momlab_core::coupling::{coupled_path, coupled_recursion_residual, coupled_telescoped, AveragedSchedule};
use momlab_core::landscape::Landscape;
use momlab_core::linalg::{dist, norm, Mat};
use momlab_core::ngos::{NoiseModel, Oracle};
use momlab_core::optim::{run_logged, Rule, Schedule, TrajectoryState};
use momlab_core::rng::NoiseKey;
use proptest::prelude::*;

/// Forward series `(1 − β_k) Σ_{s=k}^{k+terms−1} η_s Π_{τ=k+1}^{s} β_τ`
/// over the schedule extended by its last entry.
fn brute_force(s: &Schedule, k: usize, terms: usize) -> f64 {
    let mut total = 0.0;
    let mut prod = 1.0;
    for t in k..k + terms {
        if t > k {
            prod *= s.beta(t);
        }
        total += s.eta(t) * prod;
    }
    (1.0 - s.beta(k)) * total
}

fn oracle() -> Oracle {
    let l = Landscape::quadratic(Mat::diag(&[1.0, 4.0]), vec![0.0, 0.0]).unwrap();
    Oracle::new(l, NoiseModel::IsotropicGaussian, 1.0).unwrap()
}

#[test]
fn two_phase_schedule_matches_series() {
    let mut eta = vec![0.1; 50];
    eta.extend(vec![0.01; 50]);
    let mut beta = vec![0.5; 50];
    beta.extend(vec![0.8; 50]);
    let s = Schedule::from_arrays(eta, beta).unwrap();
    let avg = AveragedSchedule::new(&s);
    for k in 0..100 {
        // the tail beyond the horizon is geometric; 200 terms past the
        // horizon leave 0.8^200 of it
        let series = brute_force(&s, k, 200 + 100 - k);
        assert!((avg.at(k) - series).abs() < 1e-12, "k = {k}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constant_schedule_average_is_eta(eta in 1e-4f64..1.0, beta in 0.0f64..0.999, k in 1usize..2000) {
        let s = Schedule::constant(eta, beta, k).unwrap();
        let avg = AveragedSchedule::new(&s);
        for &v in avg.values() {
            prop_assert!((v - eta).abs() <= 8.0 * f64::EPSILON * eta);
        }
    }

    #[test]
    fn averaged_rate_matches_series(
        etas in prop::collection::vec(0.001f64..0.2, 30),
        betas in prop::collection::vec(0.0f64..0.6, 30),
    ) {
        let s = Schedule::from_arrays(etas, betas).unwrap();
        let avg = AveragedSchedule::new(&s);
        for k in 0..30 {
            let series = brute_force(&s, k, 200);
            prop_assert!((avg.at(k) - series).abs() < 1e-12);
        }
        prop_assert!(avg.within_bounds(&s));
    }

    #[test]
    fn coupled_recursion_holds(
        etas in prop::collection::vec(0.001f64..0.05, 200),
        betas in prop::collection::vec(0.5f64..0.99, 200),
        seed in any::<u64>(),
    ) {
        let s = Schedule::from_arrays(etas, betas).unwrap();
        let avg = AveragedSchedule::new(&s);
        let m0 = vec![0.3, -0.2];
        let log = run_logged(Rule::Sgdm(&s), &oracle(), TrajectoryState::sgdm(vec![1.0, 1.0], m0.clone()).unwrap(), NoiseKey::new(seed, 0, 0), 200);
        let r = coupled_recursion_residual(&log, &s, &avg).unwrap();
        prop_assert!(r.relative() <= 1e-9);
        let ys = coupled_path(&log, &s, &avg).unwrap();
        let tel = coupled_telescoped(&log.xs[0], &m0, &log.grads, &s, &avg);
        for (a, b) in ys.iter().zip(&tel) {
            prop_assert!(dist(a, b) <= 1e-9 * (1.0 + norm(a)));
        }
    }

    #[test]
    fn scaled_schedules_respect_bounds(eta in 1e-3f64..0.1, alpha in 0.0f64..1.0, lambda in 0.05f64..0.9) {
        let s = Schedule::scaled(eta, alpha, lambda, 100).unwrap();
        prop_assert!(AveragedSchedule::new(&s).within_bounds(&s));
    }
}
