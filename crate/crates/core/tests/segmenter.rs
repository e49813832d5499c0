use rand::{rngs::StdRng, Rng, SeedableRng};
use subqa_core::metrics::{readability, ReadabilityLimits};
use subqa_core::model::{TimeCode, TimedWord};
use subqa_core::segmenter::{segment_detailed, SegmenterConfig};
use subqa_oracles::{default_cue_penalty, min_segmentation, random_word_stream, RawWord};

fn timed(raw: &[RawWord]) -> Vec<TimedWord> {
    raw.iter()
        .map(|(t, s, e)| TimedWord::new(t.clone(), TimeCode::from_millis(*s), TimeCode::from_millis(*e), None).unwrap())
        .collect()
}

#[test]
fn dp_penalty_equals_exhaustive_minimum() {
    let mut rng = StdRng::seed_from_u64(11);
    let cfg = SegmenterConfig::default();
    for _ in 0..300 {
        let n = rng.gen_range(1..=12);
        let raw = random_word_stream(&mut rng, n);
        let seg = segment_detailed(&timed(&raw), &cfg).unwrap();
        let oracle = min_segmentation(n, |i, j| default_cue_penalty(&raw, i, j)).unwrap();
        assert_eq!(seg.penalty, oracle, "{raw:?}");
        // The chosen spans cost what the DP claims.
        let recomputed: u64 = seg.spans.iter().map(|&(i, j)| default_cue_penalty(&raw, i, j).unwrap()).sum();
        assert_eq!(recomputed, seg.penalty);
    }
}

#[test]
fn output_is_compliant_and_preserves_words() {
    let mut rng = StdRng::seed_from_u64(5);
    let cfg = SegmenterConfig::default();
    for _ in 0..200 {
        let n = rng.gen_range(1..=150);
        let raw = random_word_stream(&mut rng, n);
        let words = timed(&raw);
        let file = segment_detailed(&words, &cfg).unwrap().file;
        let report = readability(&file, &ReadabilityLimits::default()).unwrap();
        assert_eq!(report.hard_violation_count(), 0);

        let joined: Vec<&str> = raw.iter().map(|w| w.0.as_str()).collect();
        assert_eq!(file.full_text(), joined.join(" "));

        let mut k = 0;
        for pair in file.cues().windows(2) {
            assert!(pair[0].end() <= pair[1].start());
        }
        for cue in file.cues() {
            let count = cue.text().split(' ').count();
            assert_eq!(cue.start(), words[k].start());
            assert_eq!(cue.end(), words[k + count - 1].end());
            assert!(cue.lines().iter().all(|l| l.chars().count() <= cfg.max_line_chars));
            k += count;
        }
        assert_eq!(k, words.len());
    }
}

#[test]
fn fast_words_agree_with_exhaustive_search() {
    let mut rng = StdRng::seed_from_u64(23);
    let cfg = SegmenterConfig::default();
    let (mut feasible, mut infeasible) = (0, 0);
    for _ in 0..400 {
        let n = rng.gen_range(1..=12);
        let mut raw = random_word_stream(&mut rng, n);
        // Squeeze some words well past 15 chars/s.
        for w in raw.iter_mut() {
            if rng.gen_bool(0.3) {
                w.2 = w.1 + (w.2 - w.1) / 3 + 1;
            }
        }
        let oracle = min_segmentation(n, |i, j| default_cue_penalty(&raw, i, j));
        match segment_detailed(&timed(&raw), &cfg) {
            Ok(seg) => {
                feasible += 1;
                assert_eq!(Some(seg.penalty), oracle, "{raw:?}");
            }
            Err(e) => {
                infeasible += 1;
                assert_eq!(oracle, None, "{raw:?}: {e}");
            }
        }
    }
    assert!(feasible > 50 && infeasible > 50, "{feasible} / {infeasible}");
}
