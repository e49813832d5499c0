use rand::{rngs::StdRng, Rng, SeedableRng};
use subqa_core::metrics::{subtitle_tokens, suber, SubToken, TimedToken};
use subqa_core::model::{SubtitleFile, TimeCode};
use subqa_oracles::{suber_exhaustive, SpanToken};

fn random_file(rng: &mut StdRng, max_cues: usize) -> SubtitleFile {
    let n = rng.gen_range(1..=max_cues);
    let mut t = rng.gen_range(0..1500u64);
    let mut parts = Vec::new();
    for _ in 0..n {
        let start = t;
        let end = start + rng.gen_range(500..3000);
        let lines = (0..rng.gen_range(1..=2))
            .map(|_| {
                (0..rng.gen_range(1..=2))
                    .map(|_| ["a", "b", "c"][rng.gen_range(0..3)])
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        parts.push((TimeCode::from_millis(start), TimeCode::from_millis(end), lines));
        t = end + rng.gen_range(0..1000) - 400.min(end - start - 1);
    }
    SubtitleFile::from_parts(parts).unwrap()
}

fn span(t: &TimedToken) -> SpanToken {
    let (s, e) = (t.start.millis(), t.end.millis());
    match &t.token {
        SubToken::Word(w) => SpanToken::word(w, s, e),
        SubToken::LineBreak => SpanToken::brk("<eol>", s, e),
        SubToken::BlockBreak => SpanToken::brk("<eob>", s, e),
    }
}

#[test]
fn greedy_matches_exhaustive_on_small_instances() {
    let mut rng = StdRng::seed_from_u64(7);
    let mut checked = 0;
    let mut mismatches = Vec::new();
    while checked < 2000 {
        let r = random_file(&mut rng, 2);
        let h = random_file(&mut rng, 2);
        let rt = subtitle_tokens(&r, None);
        let ht = subtitle_tokens(&h, None);
        if rt.len() + ht.len() > 8 {
            continue;
        }
        checked += 1;
        let got = suber(&r, &h).unwrap();
        let rs: Vec<SpanToken> = rt.iter().map(span).collect();
        let hs: Vec<SpanToken> = ht.iter().map(span).collect();
        let want = suber_exhaustive(&rs, &hs, 10);
        if got.total_edits() != want {
            mismatches.push((r.full_text(), h.full_text(), got.total_edits(), want));
        }
    }
    assert!(mismatches.is_empty(), "{} mismatches, first: {:?}", mismatches.len(), mismatches.first());
}
