//! Seeded synthetic corpora for tests, demos and desk-scale runs.

use crate::fingerprint::{derive_u64, derive_unit};
use crate::model::{Category, ClipRecord, VideoRecord};

/// Medical terms used by the demo keyword dictionary.
pub const MEDICAL_TERMS: &[&str] = &[
    "laparoscopic",
    "cholecystectomy",
    "cardiology",
    "suturing",
    "ultrasound",
    "anatomy",
    "surgery",
    "endoscopy",
    "radiology",
    "physiology",
    "nursing",
    "blood pressure",
    "heart valve",
    "mri scan",
];

const MEDICAL_SUFFIXES: &[&str] = &[
    "tutorial",
    "walkthrough",
    "lecture",
    "case review",
    "explained",
    "step by step",
];

const OTHER_TITLES: &[&str] = &[
    "Cooking pasta at home",
    "Cartography of rivers",
    "Weekend travel vlog",
    "Guitar practice session",
    "Unboxing a new phone",
    "City cycling tour",
];

const RESOLUTIONS: &[(u32, u32)] = &[
    (1920, 1080),
    (1280, 720),
    (1280, 720),
    (720, 480),
    (640, 360),
    (480, 854),
];

fn pick<'a, T>(seed: u64, parts: &[&str], items: &'a [T]) -> &'a T {
    &items[(derive_u64(seed, parts) % items.len() as u64) as usize]
}

/// `count` videos; roughly 60% carry a medical term in the title, channels
/// hold about four videos each.
pub fn video_corpus(seed: u64, count: usize) -> Vec<VideoRecord> {
    let channels = (count / 4).max(1);
    (0..count)
        .map(|i| {
            let id = format!("vid{i:05}");
            let medical = derive_unit(seed, &["medical", &id]) < 0.6;
            let title = if medical {
                let term = pick(seed, &["term", &id], MEDICAL_TERMS);
                let suffix = pick(seed, &["suffix", &id], MEDICAL_SUFFIXES);
                let mut t = term.to_string();
                t[..1].make_ascii_uppercase();
                format!("{t} {suffix}")
            } else {
                pick(seed, &["other", &id], OTHER_TITLES).to_string()
            };
            let channel = derive_u64(seed, &["channel", &id]) % channels as u64;
            let (width, height) = *pick(seed, &["res", &id], RESOLUTIONS);
            let duration = 30.0 + (derive_unit(seed, &["duration", &id]) * 150.0).floor();
            VideoRecord {
                video_id: id.clone(),
                description: format!("{title}. Recorded for educational purposes."),
                title,
                channel_id: format!("ch{channel:03}"),
                duration_s: duration,
                width,
                height,
                transcript: Some(format!("Narration for {id}.")),
                media_path: format!("media/{id}.mp4"),
                category: Some(*pick(seed, &["category", &id], &Category::ALL)),
            }
        })
        .collect()
}

/// `count` active clips spread over synthetic parent videos, spans 6..=20 s.
pub fn clip_corpus(seed: u64, count: usize) -> Vec<ClipRecord> {
    let videos = video_corpus(seed, count.div_ceil(3).max(1));
    (0..count)
        .map(|i| {
            let video = &videos[i / 3];
            let start = (i % 3) as u32 * 40;
            let span = 6 + (derive_u64(seed, &["span", &i.to_string()]) % 15) as u32;
            ClipRecord::new(video, start, start + span)
        })
        .collect()
}
