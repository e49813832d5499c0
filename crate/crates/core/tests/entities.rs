use proptest::prelude::*;
use subqa_core::entities::{eer, load_entities, EerConfig, EntityCategory, EntityRecord, Verdict};
use subqa_core::model::{parse_srt, parse_transcript, reference_words, TimeCode, Transcript, TranscriptSegment};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/ndrangheta");

fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(format!("{FIXTURE}/{name}")).unwrap()
}

#[test]
fn whisperx_output_misses_three_of_four() {
    let refs = load_entities(&fixture("entities.jsonl")).unwrap();
    let hyp = parse_transcript(&fixture("whisperx.json")).unwrap();
    let res = eer(&refs, &hyp, &EerConfig::default()).unwrap();
    let verdicts: Vec<_> = res.matches.iter().map(|m| m.verdict).collect();
    assert_eq!(verdicts, vec![Verdict::Incorrect, Verdict::Incorrect, Verdict::Incorrect, Verdict::Correct]);
    assert_eq!(res.eer, 0.75);
    assert_eq!(res.per_category[&EntityCategory::Organization].incorrect, 1);
    assert_eq!(res.per_category[&EntityCategory::Location].correct, 1);
}

#[test]
fn reviewed_output_gets_all_entities() {
    let refs = load_entities(&fixture("entities.jsonl")).unwrap();
    let hyp = parse_transcript(&fixture("reviewed.json")).unwrap();
    let res = eer(&refs, &hyp, &EerConfig::default()).unwrap();
    assert!(res.matches.iter().all(|m| m.verdict == Verdict::Correct), "{:#?}", res.matches);
    assert_eq!(res.eer, 0.0);
    assert_eq!(res.matches[0].candidate.as_ref().unwrap().text, "'ndrangheta");
}

#[test]
fn reference_transcribed_perfectly_has_zero_eer() {
    let srt = parse_srt(&fixture("reference.srt")).unwrap();
    let words = reference_words(&srt);
    let end = words.last().unwrap().end();
    let hyp = Transcript {
        model_id: "oracle".into(),
        audio_id: "ndrangheta".into(),
        audio_duration: end,
        segments: vec![TranscriptSegment { text: srt.full_text(), start: words[0].start(), end, words }],
        meta: Default::default(),
    };
    let refs = load_entities(&fixture("entities.jsonl")).unwrap();
    assert_eq!(eer(&refs, &hyp, &EerConfig::default()).unwrap().eer, 0.0);
}

const VOCAB: &[&str] = &["Roma", "Milano", "la", "di", "Mario", "Rossi", "procura", "Napoli", "operazione", "dell'Anas", "il", "Bianchi"];

fn transcript_from(words: &[usize], step_ms: u64) -> Transcript {
    let text = words.iter().map(|&w| VOCAB[w]).collect::<Vec<_>>().join(" ");
    let end = TimeCode::from_millis(step_ms * words.len() as u64);
    Transcript {
        model_id: "m".into(),
        audio_id: "a".into(),
        audio_duration: end,
        segments: vec![TranscriptSegment { text, start: TimeCode::ZERO, end, words: Vec::new() }],
        meta: Default::default(),
    }
}

fn arb_case() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, Vec<(usize, usize, u64)>)> {
    (
        prop::collection::vec(0..VOCAB.len(), 4..30),
        prop::collection::vec(0..VOCAB.len(), 4..30),
        prop::collection::vec((0..VOCAB.len(), 1..3usize, 0..12_000u64), 1..6),
    )
}

fn entities_from(specs: &[(usize, usize, u64)]) -> Vec<EntityRecord> {
    specs
        .iter()
        .map(|&(w, n, t)| {
            let surface = (0..n).map(|k| VOCAB[(w + k) % VOCAB.len()]).collect::<Vec<_>>().join(" ");
            EntityRecord::new(surface, EntityCategory::Person, TimeCode::from_millis(t))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn wider_window_never_loses_candidates((_, hyp, specs) in arb_case(), w1 in 0..6000u64, extra in 0..6000u64) {
        let hyp = transcript_from(&hyp, 400);
        let refs = entities_from(&specs);
        let narrow = eer(&refs, &hyp, &EerConfig { window_ms: w1, ..Default::default() }).unwrap();
        let wide = eer(&refs, &hyp, &EerConfig { window_ms: w1 + extra, ..Default::default() }).unwrap();
        prop_assert!(wide.totals.missing <= narrow.totals.missing);
        for (a, b) in narrow.matches.iter().zip(&wide.matches) {
            if let Some(ca) = &a.candidate {
                prop_assert!(b.candidate.as_ref().unwrap().similarity >= ca.similarity);
            }
        }
    }

    #[test]
    fn higher_threshold_never_finds_more((_, hyp, specs) in arb_case(), t1 in 0.0..1.0f64, dt in 0.0..0.5f64) {
        let hyp = transcript_from(&hyp, 400);
        let refs = entities_from(&specs);
        let lo = eer(&refs, &hyp, &EerConfig { similarity_threshold: t1, ..Default::default() }).unwrap();
        let hi = eer(&refs, &hyp, &EerConfig { similarity_threshold: (t1 + dt).min(1.0), ..Default::default() }).unwrap();
        prop_assert!(hi.totals.missing >= lo.totals.missing);
        prop_assert!(hi.eer >= lo.eer);
    }

    #[test]
    fn scoring_is_deterministic((_, hyp, specs) in arb_case()) {
        let hyp = transcript_from(&hyp, 400);
        let refs = entities_from(&specs);
        let cfg = EerConfig::default();
        prop_assert_eq!(eer(&refs, &hyp, &cfg).unwrap(), eer(&refs, &hyp, &cfg).unwrap());
    }

    #[test]
    fn own_words_score_zero((words, _, picks) in arb_case()) {
        let hyp = transcript_from(&words, 400);
        let timed = hyp.words();
        // Entities taken verbatim from the transcript, anchored at their own word.
        let refs: Vec<EntityRecord> = picks
            .iter()
            .map(|&(p, n, _)| {
                let i = p % words.len();
                let n = n.min(words.len() - i);
                let surface = timed[i..i + n].iter().map(|w| w.text()).collect::<Vec<_>>().join(" ");
                EntityRecord::new(surface, EntityCategory::Location, TimeCode::from_millis(timed[i].midpoint_ms()))
            })
            .collect();
        let res = eer(&refs, &hyp, &EerConfig::default()).unwrap();
        prop_assert_eq!(res.eer, 0.0, "{:#?}", res.matches);
    }
}
