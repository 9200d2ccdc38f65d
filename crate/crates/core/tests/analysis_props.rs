use momlab_core::analysis::{
    descent_decomposition, descent_monte_carlo, run_ensemble, telescoping_probe, weak_distance, Bootstrap,
    Experiment, Method, MomentumInit, Pairing, TestFunction, WarmupOracle,
};
use momlab_core::landscape::Landscape;
use momlab_core::linalg::Mat;
use momlab_core::ngos::{NoiseModel, Oracle};
use momlab_core::optim::{run_logged, Rule, Schedule, TrajectoryState};
use momlab_core::rng::NoiseKey;
use proptest::prelude::*;

#[test]
fn warmup_estimates_match_closed_form() {
    let w = WarmupOracle {
        c: vec![1.0, -0.5],
        eta: 0.1,
        beta: 0.8,
        sigma: 1.0,
        z0: vec![0.0, 1.0],
    };
    let n = 4000;
    for est in w.estimate(&[10, 60], n, 3).unwrap() {
        let m = w.moments(est.k);
        for j in 0..2 {
            assert!((est.mean_z[j] - m.mean_z[j]).abs() < 4.0 * (m.var_z / n as f64).sqrt());
            assert!((est.mean_x[j] - m.mean_x[j]).abs() < 4.0 * (m.var_x / n as f64).sqrt());
        }
        // pooled over 2 coordinates: relative SE of a variance is √(2/(2n))
        let rel = 4.0 * (1.0 / n as f64).sqrt();
        assert!((est.var_z / m.var_z - 1.0).abs() < rel);
        assert!((est.var_x / m.var_x - 1.0).abs() < rel);
        assert!((est.step_var_sgdm / m.step_var_sgdm - 1.0).abs() < rel);
    }
}

#[test]
fn step_variance_ratio_for_several_betas() {
    for beta in [0.5, 0.9] {
        let w = WarmupOracle {
            c: vec![1.0],
            eta: 0.1,
            beta,
            sigma: 1.0,
            z0: vec![0.0],
        };
        let est = &w.estimate(&[50], 10_000, 9).unwrap()[0];
        let ratio = est.step_var_sgdm / est.step_var_sgd;
        let target = (1.0 - beta) / (1.0 + beta);
        assert!((ratio / target - 1.0).abs() < 0.05, "beta {beta}: {ratio} vs {target}");
    }
}

#[test]
fn descent_decomposition_matches_monte_carlo() {
    let a = Mat::from_rows(vec![vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
    let l = Landscape::quadratic(a, vec![0.3, 0.0]).unwrap();
    let noise = NoiseModel::FixedCovGaussian {
        sigma_half: Mat::from_rows(vec![vec![1.0, 0.0], vec![0.2, 0.5]]).unwrap(),
    };
    let o = Oracle::new(l.clone(), noise.clone(), 0.8).unwrap();
    let x = [0.7, -1.1];
    let t = descent_decomposition(&l, &x, 0.1, 0.8, &noise).unwrap();
    let mc = descent_monte_carlo(&o, &x, 0.1, 100_000, 12).unwrap();
    assert!((mc.mean - t.total).abs() < 4.0 * mc.stderr, "{} vs {}", mc.mean, t.total);
}

#[test]
fn paired_bootstrap_is_tighter_than_unpaired() {
    let l = Landscape::quadratic(Mat::diag(&[1.0, 4.0]), vec![0.0, 0.0]).unwrap();
    let eta: f64 = 0.02;
    let o = Oracle::new(l, NoiseModel::IsotropicGaussian, eta.powf(-0.5)).unwrap();
    let k = 100;
    let mk = |method| Experiment {
        method,
        x0: vec![1.0, 1.0],
        m0: MomentumInit::Zero,
        steps: k,
        stride: 10,
        seed: 2,
    };
    let hs = TestFunction::default_set(2);
    let a = run_ensemble(
        &mk(Method::Sgd {
            oracle: o.clone(),
            schedule: Schedule::constant(eta, 0.0, k).unwrap(),
        }),
        &hs,
        2000,
    )
    .unwrap();
    let b = run_ensemble(
        &mk(Method::Sgdm {
            oracle: o,
            schedule: Schedule::constant(eta, 0.9, k).unwrap(),
        }),
        &hs,
        2000,
    )
    .unwrap();
    let bs = Bootstrap::default();
    let p = weak_distance(&a, &b, &bs, Pairing::Paired).unwrap();
    let u = weak_distance(&a, &b, &bs, Pairing::Unpaired).unwrap();
    assert_eq!(p.d, u.d);
    assert!(p.ci_hi - p.ci_lo <= u.ci_hi - u.ci_lo);
    assert!(p.ci_lo <= p.d && p.d <= p.ci_hi);
    for c in a.summarize(&bs).unwrap() {
        assert!(c.ci_lo <= c.mean && c.mean <= c.ci_hi);
    }
}

#[test]
fn loss_running_averages_agree_after_transient() {
    // L(x) = x²/2 in one dimension, 1 − β ≪ η
    let (eta, beta) = (0.02, 0.995);
    let l = Landscape::quadratic(Mat::diag(&[1.0]), vec![0.0]).unwrap();
    let o = Oracle::new(l, NoiseModel::IsotropicGaussian, 1.0).unwrap();
    let k = 3000;
    let transient = (5.0 / (1.0 - beta)) as usize;
    let loss = TestFunction::Polynomial {
        index: 0,
        coeffs: vec![0.0, 0.0, 0.5],
    };
    let mk = |method| Experiment {
        method,
        x0: vec![0.0],
        m0: MomentumInit::Zero,
        steps: k,
        stride: 10,
        seed: 41,
    };
    let n = 2000;
    let run = |method| run_ensemble(&mk(method), std::slice::from_ref(&loss), n).unwrap();
    let sgd = run(Method::Sgd {
        oracle: o.clone(),
        schedule: Schedule::constant(eta, 0.0, k).unwrap(),
    });
    let sgdm = run(Method::Sgdm {
        oracle: o,
        schedule: Schedule::constant(eta, beta, k).unwrap(),
    });
    // per-seed time averages over the post-transient window
    let window: Vec<usize> = (0..sgd.steps.len()).filter(|&s| sgd.steps[s] >= transient).collect();
    let averages = |m: &momlab_core::analysis::SampleMatrix| -> Vec<f64> {
        (0..n)
            .map(|i| window.iter().map(|&s| m.row(i)[s]).sum::<f64>() / window.len() as f64)
            .collect()
    };
    let (a, b) = (averages(&sgd), averages(&sgdm));
    let stats = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / n as f64;
        let se = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0) / n as f64).sqrt();
        (m, se)
    };
    let ((ma, sa), (mb, sb)) = (stats(&a), stats(&b));
    assert!((ma - mb).abs() <= 1.96 * (sa + sb), "{ma} ± {sa} vs {mb} ± {sb}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn telescoped_sum_is_bounded_by_the_extreme_term(
        eta in 0.01f64..0.2,
        beta in 0.5f64..0.99,
        seed in any::<u64>(),
    ) {
        let l = Landscape::quadratic(Mat::diag(&[1.0, 3.0]), vec![0.0, 0.0]).unwrap();
        let o = Oracle::new(l.clone(), NoiseModel::IsotropicGaussian, 0.5).unwrap();
        let s = Schedule::constant(eta, beta, 200).unwrap();
        let log = run_logged(Rule::Sgdm(&s), &o, TrajectoryState::sgdm(vec![1.0, -1.0], vec![0.0, 0.0]).unwrap(), NoiseKey::new(seed, 0, 0), 200);
        let p = telescoping_probe(&log, &l, eta).unwrap();
        prop_assert_eq!(p.s[0], 0.0);
        let direct = p.s.last().unwrap() - p.s[0];
        prop_assert!((p.telescoped_sum - direct).abs() <= 1e-12 * (1.0 + p.max_abs));
        prop_assert!(p.telescoped_sum.abs() <= p.max_abs * (1.0 + 1e-12));
    }

    #[test]
    fn confidence_intervals_bracket_means(seed in 0u64..1000) {
        let l = Landscape::sphere(2, 1.0).unwrap();
        let o = Oracle::new(l, NoiseModel::IsotropicGaussian, 0.3).unwrap();
        let exp = Experiment {
            method: Method::Sgdm { oracle: o, schedule: Schedule::constant(0.05, 0.9, 30).unwrap() },
            x0: vec![1.2, 0.1],
            m0: MomentumInit::Zero,
            steps: 30,
            stride: 5,
            seed,
        };
        let m = run_ensemble(&exp, &TestFunction::default_set(2), 20).unwrap();
        let bs = Bootstrap { resamples: 200, ..Bootstrap::default() };
        for c in m.summarize(&bs).unwrap() {
            prop_assert!(c.ci_lo <= c.mean && c.mean <= c.ci_hi);
        }
    }
}
