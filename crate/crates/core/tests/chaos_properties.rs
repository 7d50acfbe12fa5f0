use blendchaos::chaos::{divergence_measure, ChaosExperimentConfig};
use proptest::prelude::*;

const N: usize = 10_000;
const T_HR: f64 = 100.0;

fn t_hr(n: usize) -> f64 {
    n as f64 * T_HR / N as f64
}

fn series(seed: f64, phase: f64) -> Vec<f64> {
    (0..=N)
        .map(|n| {
            let t = t_hr(n);
            seed * (0.7 * t + phase).sin() + 0.3 * (2.3 * t).cos() + 5.0
        })
        .collect()
}

/// Companion of `a` whose difference from it stays in `[0.5, 1.5]`.
fn companion(a: &[f64], seed: f64, phase: f64) -> Vec<f64> {
    a.iter()
        .enumerate()
        .map(|(n, v)| v + 1.0 + 0.5 * (seed * t_hr(n) + phase).sin())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn invariant_under_common_shift_and_scale(
        seed in 0.5f64..2.0,
        phase in 0.0f64..3.0,
        shift in -1e2f64..1e2,
        scale in 1e-3f64..1e3,
    ) {
        let cfg = ChaosExperimentConfig::default();
        let a = series(1.0, 0.0);
        let b = companion(&a, seed, phase);
        let base = divergence_measure(&a, &b, &cfg).unwrap();

        let a2: Vec<f64> = a.iter().map(|v| v + shift).collect();
        let b2: Vec<f64> = b.iter().map(|v| v + shift).collect();
        let shifted = divergence_measure(&a2, &b2, &cfg).unwrap();
        prop_assert!((shifted - base).abs() <= 1e-12, "{} vs {}", shifted, base);

        let a3: Vec<f64> = a.iter().map(|v| v * scale).collect();
        let b3: Vec<f64> = b.iter().map(|v| v * scale).collect();
        let scaled = divergence_measure(&a3, &b3, &cfg).unwrap();
        prop_assert!((scaled - base).abs() <= 1e-12, "{} vs {}", scaled, base);
    }

    #[test]
    fn symmetric_in_its_arguments(seed in 0.5f64..2.0, phase in 0.0f64..3.0) {
        let cfg = ChaosExperimentConfig::default();
        let a = series(1.0, 0.0);
        let b = series(seed, phase);
        prop_assert_eq!(
            divergence_measure(&a, &b, &cfg).unwrap(),
            divergence_measure(&b, &a, &cfg).unwrap()
        );
    }
}

#[test]
fn exponential_separation_matches_closed_form() {
    let cfg = ChaosExperimentConfig::default();
    for (eps, rate) in [(1e-9, 0.1), (1e-3, -0.05), (2.5, 0.2)] {
        let a = vec![0.0; N + 1];
        let b: Vec<f64> = (0..=N).map(|n| eps * (rate * t_hr(n)).exp()).collect();
        // windows [800, 1500] and [5000, 8000] have mean times 11.5 h and 65 h
        let expected = rate * (65.0 - 11.5);
        let got = divergence_measure(&a, &b, &cfg).unwrap();
        assert!((got - expected).abs() <= 1e-10, "eps={eps}: {got} vs {expected}");
    }
}

#[test]
fn identical_series_give_zero() {
    let a = series(1.0, 0.3);
    assert_eq!(divergence_measure(&a, &a, &ChaosExperimentConfig::default()).unwrap(), 0.0);
}

#[test]
fn out_of_range_windows_are_rejected() {
    let cfg = ChaosExperimentConfig {
        late_window: [0.5, 1.2],
        ..ChaosExperimentConfig::default()
    };
    let a = series(1.0, 0.0);
    assert!(divergence_measure(&a, &a, &cfg).is_err());
}
