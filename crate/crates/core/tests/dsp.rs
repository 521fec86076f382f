use alphasoft::dsp::{
    detect_alpha, offline_frames, AlphaPipeline, BandpassFilter, Calibration, DspConfig, PsdEstimator, WindowFunction,
    HOP_LEN, WINDOW_LEN,
};
use alphasoft::signal_source::{default_scenario, EegSample, Scenario, SynthGenerator, SynthParams};
use proptest::prelude::*;

fn synth(seconds: usize) -> Vec<EegSample> {
    let gen = SynthGenerator::new(SynthParams::default(), Scenario::new(default_scenario()).unwrap()).unwrap();
    gen.take(seconds * 250).collect()
}

#[test]
fn streaming_matches_batch_processing() {
    let cal = Calibration::new(37.0, 9.25).unwrap();
    let raw = synth(30);

    let mut streamed = Vec::new();
    let mut chain = AlphaPipeline::new(&DspConfig::default(), cal).unwrap();
    for &s in &raw {
        if let Some(out) = chain.push(s).unwrap() {
            streamed.push(out);
        }
    }

    let mut filt = BandpassFilter::default();
    let filtered: Vec<EegSample> = raw.iter().map(|&s| filt.filter_step(s).unwrap()).collect();
    let mut est = PsdEstimator::default();
    let batch: Vec<_> = offline_frames(&filtered, WINDOW_LEN, HOP_LEN)
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let spectrum = est.compute_psd(&f.samples, i as u64, f.t_end()).unwrap();
            let reading = detect_alpha(&spectrum, &cal);
            (spectrum, reading)
        })
        .collect();

    assert_eq!(streamed.len(), 29);
    assert_eq!(streamed, batch);
}

#[test]
fn hann_window_shifts_nothing_for_on_bin_tone() {
    let mut rect = PsdEstimator::new(WINDOW_LEN, 250.0, WindowFunction::Rectangular);
    let mut hann = PsdEstimator::new(WINDOW_LEN, 250.0, WindowFunction::Hann);
    let x: Vec<f64> = (0..WINDOW_LEN)
        .map(|i| (2.0 * std::f64::consts::PI * 10.0 * i as f64 / 250.0).sin())
        .collect();
    let argmax = |v: &[f64]| v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert_eq!(argmax(&rect.psd(&x).unwrap()), 20);
    assert_eq!(argmax(&hann.psd(&x).unwrap()), 20);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psd_is_nonnegative_and_satisfies_parseval(
        samples in prop::collection::vec(-200.0f64..200.0, WINDOW_LEN),
        hann in any::<bool>(),
    ) {
        let window = if hann { WindowFunction::Hann } else { WindowFunction::Rectangular };
        let mut est = PsdEstimator::new(WINDOW_LEN, 250.0, window);
        let psd = est.psd(&samples).unwrap();
        prop_assert!(psd.iter().all(|&p| p >= 0.0));
        let w = window.coefficients(WINDOW_LEN);
        let weighted: f64 = samples.iter().zip(&w).map(|(x, w)| (x * w).powi(2)).sum::<f64>()
            / w.iter().map(|w| w * w).sum::<f64>();
        let power = psd.iter().sum::<f64>() * 250.0 / WINDOW_LEN as f64;
        prop_assert!((power - weighted).abs() <= 1e-9 * weighted.max(1e-12));
    }

    #[test]
    fn filter_output_is_finite_and_causal(
        samples in prop::collection::vec(-1000.0f64..1000.0, 1..400),
        split in 0usize..400,
    ) {
        let mut a = BandpassFilter::default();
        let ya: Vec<f64> = samples.iter().map(|&x| a.process(x).unwrap()).collect();
        prop_assert!(ya.iter().all(|y| y.is_finite()));
        // changing the future does not change the past
        let k = split.min(samples.len());
        let mut b = BandpassFilter::default();
        let mut altered = samples.clone();
        for v in altered.iter_mut().skip(k) {
            *v = -*v + 1.0;
        }
        let yb: Vec<f64> = altered.iter().map(|&x| b.process(x).unwrap()).collect();
        prop_assert_eq!(&ya[..k], &yb[..k]);
    }

    #[test]
    fn a_psd_is_bounded(scale in 0.0f64..100.0, p_ref in 0.1f64..1000.0) {
        let cal = Calibration::new(p_ref, p_ref / 4.0).unwrap();
        let mut chain = AlphaPipeline::new(&DspConfig::default(), cal).unwrap();
        for s in synth(4) {
            let s = EegSample::new(s.index, s.v * scale);
            if let Some((_, r)) = chain.push(s).unwrap() {
                prop_assert!((0.0..=100.0).contains(&r.a_psd));
                if !r.gated {
                    prop_assert_eq!(r.a_psd, 0.0);
                }
            }
        }
    }
}

#[test]
fn non_finite_sample_is_a_signal_integrity_error() {
    let mut chain = AlphaPipeline::new(&DspConfig::default(), Calibration::new(1.0, 0.25).unwrap()).unwrap();
    let err = chain.push(EegSample::new(0, f64::NAN)).unwrap_err();
    assert!(matches!(err, alphasoft::dsp::DspError::SignalIntegrity(_)));
}
