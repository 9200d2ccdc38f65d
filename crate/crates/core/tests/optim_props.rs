use momlab_core::landscape::Landscape;
use momlab_core::linalg::{dist, norm, Mat};
use momlab_core::ngos::{NoiseModel, Oracle};
use momlab_core::optim::{
    convert_standard_to_ema, intro_form_conversion, run_logged, unroll_momentum, Rule, Schedule, StandardSchedule,
    TrajectoryState,
};
use momlab_core::rng::NoiseKey;
use proptest::prelude::*;

fn oracle() -> Oracle {
    let a = Mat::from_rows(vec![vec![1.0, 0.3], vec![0.3, 2.0]]).unwrap();
    Oracle::new(Landscape::quadratic(a, vec![0.1, -0.2]).unwrap(), NoiseModel::IsotropicGaussian, 0.5).unwrap()
}

fn schedule_strategy(k: usize) -> impl Strategy<Value = Schedule> {
    (prop::collection::vec(0.001f64..0.2, k), prop::collection::vec(0.0f64..0.99, k))
        .prop_map(|(e, b)| Schedule::from_arrays(e, b).unwrap())
}

fn standard_strategy(k: usize) -> impl Strategy<Value = StandardSchedule> {
    (
        prop::collection::vec(0.001f64..0.1, k),
        prop::collection::vec(0.0f64..0.99, k),
        prop::collection::vec(0.0f64..0.95, k),
    )
        .prop_map(|(g, m, t)| StandardSchedule::from_arrays(g, m, t).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn standard_and_ema_forms_agree(std in standard_strategy(300), seed in any::<u64>()) {
        let k = 300;
        let conv = convert_standard_to_ema(&std, k).unwrap();
        let x0 = vec![1.0, -0.5];
        let m0 = vec![0.2, 0.1];
        let key = NoiseKey::new(seed, 0, 0);
        let bar = run_logged(Rule::Standard(&std), &oracle(), TrajectoryState::sgdm(x0.clone(), m0.clone()).unwrap(), key, k);
        // α₀ = 1, so both forms start from the same momentum
        let ema = run_logged(Rule::Sgdm(&conv.schedule), &oracle(), TrajectoryState::sgdm(x0, m0).unwrap(), key, k);
        let scale = 1.0 + ema.xs.iter().map(|x| norm(x)).fold(0.0, f64::max);
        for i in 0..=k {
            prop_assert!(dist(&bar.xs[i], &ema.xs[i]) <= 1e-9 * scale);
            let rescaled: Vec<f64> = bar.ms[i].iter().map(|m| conv.alpha[i] * m).collect();
            prop_assert!(dist(&rescaled, &ema.ms[i]) <= 1e-9 * (1.0 + norm(&ema.ms[i])));
        }
    }

    #[test]
    fn momentum_unrolls_to_closed_form(s in schedule_strategy(60), seed in any::<u64>()) {
        let m0 = vec![0.7, -0.3];
        let log = run_logged(Rule::Sgdm(&s), &oracle(), TrajectoryState::sgdm(vec![0.5, 0.5], m0.clone()).unwrap(), NoiseKey::new(seed, 0, 0), 60);
        for k in [0, 1, 17, 60] {
            let closed = unroll_momentum(&s, &m0, &log.grads[..k]);
            prop_assert!(dist(&closed, &log.ms[k]) <= 1e-12 * (1.0 + norm(&log.ms[k])));
        }
    }

    #[test]
    fn zero_momentum_sgdm_is_sgd(etas in prop::collection::vec(0.001f64..0.3, 40), seed in any::<u64>()) {
        let s = Schedule::from_arrays(etas.clone(), vec![0.0; 40]).unwrap();
        let key = NoiseKey::new(seed, 2, 0);
        let a = run_logged(Rule::Sgd(&s), &oracle(), TrajectoryState::sgd(vec![1.0, 1.0]), key, 40);
        let b = run_logged(Rule::Sgdm(&s), &oracle(), TrajectoryState::sgdm(vec![1.0, 1.0], vec![9.0, 9.0]).unwrap(), key, 40);
        prop_assert_eq!(a.xs, b.xs);
    }

    #[test]
    fn conversion_keeps_beta_in_range(std in standard_strategy(50)) {
        let conv = convert_standard_to_ema(&std, 80).unwrap();
        prop_assert!(conv.schedule.betas().iter().all(|b| (0.0..1.0).contains(b)));
        prop_assert!(conv.alpha.iter().all(|a| *a > 0.0 && a.is_finite()));
    }
}

#[test]
fn heavy_ball_form_matches_ema_form() {
    let (gamma, beta) = (0.01, 0.9);
    let s = intro_form_conversion(gamma, beta, 200).unwrap();
    let o = oracle();
    let key = NoiseKey::new(5, 0, 0);
    let log = run_logged(Rule::Sgdm(&s), &o, TrajectoryState::sgdm(vec![1.0, 1.0], vec![0.0, 0.0]).unwrap(), key, 200);
    // x_{k+1} = x_k − γ g_k + β(x_k − x_{k−1})
    for k in 1..200 {
        for i in 0..2 {
            let hb = log.xs[k][i] - gamma * log.grads[k][i] + beta * (log.xs[k][i] - log.xs[k - 1][i]);
            assert!((hb - log.xs[k + 1][i]).abs() < 1e-12);
        }
    }
}
