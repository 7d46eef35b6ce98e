use medcurate::manifest::{read_manifest, render_manifest, write_manifest};
use medcurate::model::{ClipRecord, Stage};
use medcurate::synthetic::{clip_corpus, video_corpus};
use medcurate::VideoRecord;
use proptest::prelude::*;

fn decorated(seed: u64, n: usize, removed: &[bool], score: f64) -> Vec<ClipRecord> {
    let mut clips = clip_corpus(seed, n);
    for (clip, r) in clips.iter_mut().zip(removed.iter().cycle()) {
        clip.scores.insert(Stage::Aesthetic, score);
        if *r {
            clip.mark_removed(Stage::Ocr);
        } else {
            clip.detailed_caption = Some("a surgeon sutures \"the\" wound\nslowly".into());
        }
    }
    clips
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn clip_manifest_round_trip(
        seed in any::<u64>(),
        n in 0usize..40,
        removed in proptest::collection::vec(any::<bool>(), 1..8),
        score in -10.0f64..10.0,
    ) {
        let clips = decorated(seed, n, &removed, score);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clips.jsonl");
        prop_assert_eq!(write_manifest(&clips, &path).unwrap(), n);
        let back: Vec<ClipRecord> = read_manifest(&path).unwrap();
        prop_assert_eq!(&back, &clips);
        // Rendering is a fixed point.
        prop_assert_eq!(render_manifest(&back).unwrap(), std::fs::read_to_string(&path).unwrap());
    }

    #[test]
    fn video_manifest_round_trip(seed in any::<u64>(), n in 0usize..40) {
        let videos = video_corpus(seed, n);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("videos.jsonl");
        write_manifest(&videos, &path).unwrap();
        let back: Vec<VideoRecord> = read_manifest(&path).unwrap();
        prop_assert_eq!(back, videos);
    }
}
