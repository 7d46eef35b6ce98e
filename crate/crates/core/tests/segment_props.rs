use medcurate::model::{frame_sequence, FrameAnalysis};
use medcurate::segment::{segment, segment_oracle, valid_clip, ClipSpan, SegmenterConfig};
use proptest::prelude::*;

// Similarities and tau share a 0.01 grid so ties with tau actually occur.
fn frames_and_tau() -> impl Strategy<Value = (Vec<FrameAnalysis>, f64)> {
    (0usize..=50)
        .prop_flat_map(|n| {
            (
                proptest::collection::vec(prop_oneof![1 => Just(0u8), 6 => Just(1u8)], n),
                proptest::collection::vec(70u32..=100, n.saturating_sub(1)),
                75u32..=95,
            )
        })
        .prop_map(|(labels, sims, tau)| {
            let sims: Vec<f64> = sims.into_iter().map(|s| f64::from(s) / 100.0).collect();
            (frame_sequence(&labels, &sims), f64::from(tau) / 100.0)
        })
}

fn cfg(tau: f64) -> SegmenterConfig {
    SegmenterConfig {
        tau,
        ..SegmenterConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1500))]

    #[test]
    fn linear_scan_matches_brute_force((frames, tau) in frames_and_tau()) {
        let cfg = cfg(tau);
        prop_assert_eq!(segment(&frames, &cfg), segment_oracle(&frames, &cfg));
    }

    #[test]
    fn windows_are_valid_disjoint_and_ordered((frames, tau) in frames_and_tau()) {
        let cfg = cfg(tau);
        let spans = segment(&frames, &cfg);
        for s in &spans {
            prop_assert!(valid_clip(&frames, s.start, s.end, &cfg).unwrap());
        }
        for w in spans.windows(2) {
            prop_assert!(w[0].end < w[1].start);
        }
    }

    #[test]
    fn raising_tau_only_shrinks_coverage((frames, tau) in frames_and_tau(), bump in 1u32..10) {
        let low = segment(&frames, &cfg(tau));
        let high = segment(&frames, &cfg(tau + f64::from(bump) / 100.0));
        for h in &high {
            prop_assert!(low.iter().any(|l: &ClipSpan| l.contains(h)), "{:?} not inside {:?}", h, low);
        }
    }
}

#[test]
fn length_seven_label_patterns() {
    let cfg = SegmenterConfig::default();
    let sims = vec![0.99; 6];
    for pattern in 0u32..128 {
        let labels: Vec<u8> = (0..7).map(|b| ((pattern >> b) & 1) as u8).collect();
        let frames = frame_sequence(&labels, &sims);
        assert_eq!(
            valid_clip(&frames, 0, 6, &cfg).unwrap(),
            pattern == 127,
            "pattern {pattern:07b}"
        );
        assert!(!valid_clip(&frames, 0, 5, &cfg).unwrap());
        assert!(!valid_clip(&frames, 1, 6, &cfg).unwrap());
    }
}
