use std::collections::BTreeSet;

use medcurate::adapters::Scorers;
use medcurate::filter::{
    aesthetic_filter, joint_filter, ocr_filter, run_stage, technical_filter, FilterConfig, Verdict,
};
use medcurate::model::{ClipRecord, Stage};
use medcurate::synthetic::clip_corpus;
use proptest::prelude::*;

fn run_chain(clips: Vec<ClipRecord>, order: &[Stage], seed: u64) -> Vec<ClipRecord> {
    let scorers = Scorers::synthetic(seed);
    let cfg = FilterConfig::default();
    order.iter().fold(clips, |clips, stage| {
        run_stage(clips, *stage, &scorers, &cfg).unwrap().clips
    })
}

fn active_ids(clips: &[ClipRecord]) -> BTreeSet<String> {
    clips
        .iter()
        .filter(|c| c.is_active())
        .map(|c| c.clip_id.clone())
        .collect()
}

#[test]
fn boundary_values() {
    let cfg = FilterConfig::default();
    assert_eq!(ocr_filter(&[4, 4, 4, 4, 4], &cfg).unwrap(), Verdict::Keep);
    assert_eq!(ocr_filter(&[4, 4, 4, 4, 5], &cfg).unwrap(), Verdict::Remove);
    assert_eq!(aesthetic_filter(&[3.0; 5], &cfg).unwrap(), Verdict::Keep);
    assert_eq!(aesthetic_filter(&[2.999; 5], &cfg).unwrap(), Verdict::Remove);
    assert_eq!(technical_filter(0.0, &cfg), Verdict::Keep);
    assert_eq!(technical_filter(0.001, &cfg), Verdict::Remove);
    assert_eq!(joint_filter(0.35, 3.9, &cfg), Verdict::Remove);
    assert_eq!(joint_filter(0.35, 4.1, &cfg), Verdict::Keep);
    assert_eq!(joint_filter(0.2, 3.0, &cfg), Verdict::Keep);
}

#[test]
fn reports_reconcile_along_the_chain() {
    let scorers = Scorers::synthetic(17);
    let cfg = FilterConfig::default();
    let mut clips = clip_corpus(17, 500);
    let mut carried = clips.len();
    for stage in Stage::FILTERS {
        let out = run_stage(clips, stage, &scorers, &cfg).unwrap();
        let r = &out.report;
        assert!(r.reconciles(), "{r:?}");
        assert_eq!(r.input_count + r.errored, carried, "{stage}");
        assert_eq!(r.retained, out.clips.iter().filter(|c| c.is_active()).count());
        assert_eq!(
            r.removed,
            out.clips.iter().filter(|c| c.removed_by == Some(stage)).count()
        );
        carried = r.output_count;
        clips = out.clips;
    }
}

#[test]
fn rerunning_a_stage_changes_nothing() {
    let scorers = Scorers::synthetic(4);
    let cfg = FilterConfig::default();
    for stage in Stage::FILTERS {
        let once = run_stage(clip_corpus(4, 120), stage, &scorers, &cfg).unwrap();
        let twice = run_stage(once.clips.clone(), stage, &scorers, &cfg).unwrap();
        assert_eq!(active_ids(&once.clips), active_ids(&twice.clips));
        assert_eq!(twice.report.removed, 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn final_set_ignores_stage_order(order in Just(Stage::FILTERS.to_vec()).prop_shuffle(), seed in 0u64..4) {
        let clips = clip_corpus(seed, 150);
        let reference = active_ids(&run_chain(clips.clone(), &Stage::FILTERS, seed));
        prop_assert_eq!(active_ids(&run_chain(clips, &order, seed)), reference);
    }

    #[test]
    fn ocr_verdict_is_a_sum_threshold(counts in proptest::collection::vec(0u32..12, 5)) {
        let cfg = FilterConfig::default();
        let expected = if counts.iter().sum::<u32>() > 20 { Verdict::Remove } else { Verdict::Keep };
        prop_assert_eq!(ocr_filter(&counts, &cfg).unwrap(), expected);
    }

    #[test]
    fn joint_removes_only_on_both_conditions(t in -1.0f64..1.0, a in 0.0f64..10.0) {
        let cfg = FilterConfig::default();
        let expected = if t > 0.3 && a < 4.0 { Verdict::Remove } else { Verdict::Keep };
        prop_assert_eq!(joint_filter(t, a, &cfg), expected);
    }
}
