//! Uniform frame sampling over an inclusive grid span.

/// `count` indices spread uniformly over `[start, end]`, both endpoints
/// included, each rounded to the nearest grid frame with ties going to the
/// lower index. The result is non-decreasing; it repeats indices only when
/// the span holds fewer than `count` frames.
pub fn uniform_indices(start: u32, end: u32, count: usize) -> Vec<u32> {
    assert!(end >= start, "end {end} precedes start {start}");
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let span = u64::from(end - start);
            let steps = (count - 1) as u64;
            (0..count as u64)
                .map(|k| {
                    let num = k * span;
                    let (q, r) = (num / steps, num % steps);
                    let offset = if 2 * r > steps { q + 1 } else { q };
                    start + offset as u32
                })
                .collect()
        }
    }
}
