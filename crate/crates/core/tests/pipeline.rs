use nvgyro_core::analysis::{fit_decaying_sine, power_spectrum, Spectrum};
use nvgyro_core::units::dps_to_hz;
use nvgyro_core::*;
use proptest::prelude::*;

fn carriers() -> (f64, f64) {
    transition_frequencies(&FieldEnvironment::new(482.0), &PhysicalConstants::LITERATURE).unwrap()
}

/// Frame that leaves the single-quantum coherences at `sq1`, `sq2` Hz and
/// the double-quantum fringe at `sq1 - sq2`.
fn offset_frame(cfg: SequenceConfig, sq1: f64, sq2: f64) -> SequenceConfig {
    let (f1, f2) = carriers();
    SequenceConfig {
        frame_f1: f1 - sq1,
        frame_f2: f2 - sq2,
        ..cfg
    }
}

fn simulator(cfg: &SequenceConfig) -> Simulator {
    Simulator::new(cfg, &DetectorConfig::default(), &PhysicalConstants::LITERATURE).unwrap()
}

/// `n` points covering `[0, span)`, so every multiple of `1 / span` is an
/// exact transform bin.
fn periodic_grid(span: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| span * i as f64 / n as f64).collect()
}

fn bin_power(s: &Spectrum, f: f64) -> f64 {
    s.max_in_band(f, 0.25 * s.resolution)
}

fn gradient() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.1f64..1.0, 0.8f64..1.2), 1..4).prop_map(|parts| {
        let total: f64 = parts.iter().map(|p| p.0).sum();
        parts.into_iter().map(|(w, s)| (w / total, s)).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn phase_cycling_cancels_single_quantum_signals(rf in gradient()) {
        let (sq1, sq2) = (20e3, 35e3);
        let cfg = offset_frame(
            SequenceConfig { rf_gradient: rf, t2_dq: 1e3, t2_sq: 1e3, ..SequenceConfig::default() },
            sq1,
            sq2,
        );
        let sim = simulator(&cfg);
        let sweep = sim.sweep(&FieldEnvironment::new(482.0), &periodic_grid(1e-3, 1000), None).unwrap();
        let combined = power_spectrum(&sweep.combined_series(), 1).unwrap();
        for k in 0..4 {
            let single = power_spectrum(&sweep.single_series(k), 1).unwrap();
            for f in [sq1, sq2] {
                let (p_single, p_comb) = (bin_power(&single, f), bin_power(&combined, f));
                prop_assert!(
                    p_comb * 100.0 <= p_single || p_single < 1e-28,
                    "R{} at {f} Hz: single {p_single:e}, combined {p_comb:e}", k + 1
                );
            }
        }
    }

    #[test]
    fn fringe_frequency_follows_frame_and_rotation(
        detune in -3e3f64..3e3,
        nu in -50.0f64..50.0,
    ) {
        let (f1, f2) = carriers();
        let cfg = SequenceConfig {
            frame_f1: f1 + detune,
            frame_f2: f2 + 6e3,
            ..SequenceConfig::default()
        };
        let sim = simulator(&cfg);
        let env = FieldEnvironment::new(482.0).with_rotation(nu);
        let expected = f1 - f2 - (cfg.frame_f1 - cfg.frame_f2) + 2.0 * nu;
        prop_assert!((sim.fringe_frequency(&env).unwrap() - expected).abs() < 1e-6);
        let sweep = sim.sweep(&env, &linspace(0.0, 5e-3, 1000), None).unwrap();
        let fit = fit_decaying_sine(&sweep.combined_series()).unwrap();
        prop_assert!(
            (fit.frequency.abs() - expected.abs()).abs() < 1e-3,
            "fit {} expected {expected}", fit.frequency
        );
    }

    #[test]
    fn pulse_errors_never_raise_contrast(spread in 0.0f64..0.2) {
        let frame = |cfg| offset_frame(cfg, 0.0, -5e3);
        let grid = linspace(0.0, 5e-3, 500);
        let env = FieldEnvironment::new(482.0);
        let amplitude = |cfg: SequenceConfig| {
            let sweep = simulator(&frame(cfg)).sweep(&env, &grid, None).unwrap();
            fit_decaying_sine(&sweep.combined_series()).unwrap().amplitude.abs()
        };
        let ideal = amplitude(SequenceConfig::default());
        let impaired = amplitude(SequenceConfig::default().with_rf_spread(spread));
        prop_assert!(impaired <= ideal * (1.0 + 1e-9), "{impaired} > {ideal}");
    }
}

#[test]
fn spectrum_peak_agrees_with_fit() {
    let cfg = offset_frame(SequenceConfig::default().with_rf_spread(0.1), 0.0, -5e3);
    let sim = simulator(&cfg);
    let sweep = sim
        .sweep(&FieldEnvironment::new(482.0), &linspace(0.0, 5e-3, 500), Some(3))
        .unwrap();
    let series = sweep.combined_series();
    let spectrum = power_spectrum(&series, 1).unwrap();
    let fit = fit_decaying_sine(&series).unwrap();
    let (peak, _) = spectrum.peak(0.0).unwrap();
    assert!((peak - fit.frequency).abs() <= spectrum.resolution, "{peak} vs {}", fit.frequency);
}

#[test]
fn identical_seeds_give_identical_outputs() {
    let cfg = SequenceConfig::default().with_rf_spread(0.1);
    let sim = simulator(&cfg);
    let env = FieldEnvironment::new(482.0);
    let grid = linspace(0.0, 2e-3, 4001);
    let a = sim.sweep(&env, &grid, Some(11)).unwrap();
    assert_eq!(a, sim.sweep(&env, &grid, Some(11)).unwrap());
    assert_ne!(a, sim.sweep(&env, &grid, Some(12)).unwrap());

    let s = sim.stream(&env, 5.0, Some(11)).unwrap();
    assert_eq!(s, sim.stream(&env, 5.0, Some(11)).unwrap());
    assert_ne!(s.signal, sim.stream(&env, 5.0, Some(12)).unwrap().signal);

    let mut exp = ExperimentConfig {
        sequence: cfg,
        ..Default::default()
    };
    exp.noise.target_arw_hz = Some(0.013);
    let profile = RotationProfile::triangle_sweep(20.0, 10.0).unwrap();
    let g1 = run_gyro(&exp, &profile, None, Some(4)).unwrap();
    let g2 = run_gyro(&exp, &profile, None, Some(4)).unwrap();
    assert_eq!(g1.stream, g2.stream);
    assert_eq!(g1.telemetry, g2.telemetry);
}

#[test]
fn constant_rotation_is_recovered() {
    let mut cfg = ExperimentConfig::default();
    cfg.sequence = cfg.sequence.with_rf_spread(0.085);
    cfg.environment.rotation_dps = 10.0;
    let profile = RotationProfile::hold(120.0).unwrap();

    let clean = run_gyro(&cfg, &profile, None, None).unwrap();
    for &nu in &clean.stream.nu_hat_hz {
        assert!((nu / dps_to_hz(10.0) - 1.0).abs() < 0.01, "{nu}");
    }

    let noisy = run_gyro(&cfg, &profile, None, Some(8)).unwrap();
    let nu = &noisy.stream.nu_hat_hz;
    let n = nu.len() as f64;
    let mean = nu.iter().sum::<f64>() / n;
    let band = 4.0 * noisy.predicted_sigma_hz / n.sqrt();
    assert!((mean - dps_to_hz(10.0)).abs() < band, "{mean} vs {} +/- {band}", dps_to_hz(10.0));
}
