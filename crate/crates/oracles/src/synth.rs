//! Deterministic synthetic episodes: a reference SRT, an ASR-like
//! transcript with realistic errors, and entity annotations.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;

const VOCAB: &[&str] = &[
    "abbiamo", "sempre", "detto", "che", "la", "il", "ricerca", "governo", "oggi", "provincia", "operazione", "questa",
    "sera", "una", "storia", "molto", "importante", "per", "tutti", "noi", "anche", "se", "non", "sono", "stati",
    "pochi", "giorni", "dopo", "lavoro", "inchiesta", "scienza", "dati", "anni", "paese", "cosa", "vero", "ospite",
    "domanda", "risposta", "grazie", "allora", "quindi", "dove", "quando", "nostro", "studio",
];

/// (reference surface, category, typical misrecognition)
const ENTITIES: &[(&str, &str, &str)] = &[
    ("Vibo Valentia", "Location", "Vibo-Valenzia"),
    ("Nicola Gratteri", "Person", "Nicola Grattieri"),
    ("Guardia di Finanza", "Organization", "Guardia di Finanza"),
    ("Calabria", "Location", "Calabria"),
    ("Italia", "Location", "Italia"),
    ("Rita Levi-Montalcini", "Person", "Rita Levi Montalcini"),
];

#[derive(Debug, Clone)]
pub struct SynthEpisode {
    pub reference_srt: String,
    pub transcript_json: String,
    pub entities_jsonl: String,
    pub duration_s: f64,
}

struct Word {
    text: String,
    asr: Option<String>,
    start: u64,
    end: u64,
    sentence: usize,
}

fn timecode(ms: u64) -> String {
    format!("{:02}:{:02}:{:02},{:03}", ms / 3_600_000, ms / 60_000 % 60, ms / 1000 % 60, ms % 1000)
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

/// An episode of about `duration_s` seconds of speech. The same seed always
/// yields the same bytes.
pub fn episode(seed: u64, duration_s: f64, model_id: &str) -> SynthEpisode {
    let mut rng = StdRng::seed_from_u64(seed);
    let limit = (duration_s * 1000.0) as u64;
    let mut words: Vec<Word> = Vec::new();
    let mut mentions: Vec<(usize, usize, usize)> = Vec::new(); // (entity, first word, word count)
    let mut t = 500u64;
    let mut sentence = 0;
    'outer: loop {
        let len = rng.gen_range(6..16);
        let entity_at = rng.gen_bool(0.5).then(|| rng.gen_range(1..len));
        for k in 0..len {
            let pieces: Vec<(String, Option<String>)> = if Some(k) == entity_at {
                let e = rng.gen_range(0..ENTITIES.len());
                let (surface, _, asr) = ENTITIES[e];
                mentions.push((e, words.len(), surface.split(' ').count()));
                let ref_parts: Vec<&str> = surface.split(' ').collect();
                let asr_parts: Vec<&str> = asr.split(' ').collect();
                if ref_parts.len() == asr_parts.len() {
                    ref_parts.iter().zip(&asr_parts).map(|(r, a)| (r.to_string(), Some(a.to_string()))).collect()
                } else {
                    // Differing word counts: merge the misrecognition into the first slot.
                    let mut v: Vec<(String, Option<String>)> = ref_parts.iter().map(|r| (r.to_string(), Some(String::new()))).collect();
                    v[0].1 = Some(asr.to_string());
                    v
                }
            } else {
                let w = VOCAB[rng.gen_range(0..VOCAB.len())];
                let w = if k == 0 { capitalize(w) } else { w.to_string() };
                let r: f64 = rng.gen();
                let asr = if r < 0.05 {
                    Some(VOCAB[rng.gen_range(0..VOCAB.len())].to_string())
                } else if r < 0.08 {
                    Some(String::new())
                } else {
                    None
                };
                vec![(w, asr)]
            };
            let last_piece = pieces.len() - 1;
            for (p, (mut text, mut asr)) in pieces.into_iter().enumerate() {
                if k + 1 == len && p == last_piece {
                    text.push('.');
                    asr = asr.map(|a| if a.is_empty() { a } else { format!("{a}.") });
                } else if rng.gen_bool(0.06) {
                    text.push(',');
                }
                // Timed for the longer spelling so neither version is rushed.
                let chars = text.chars().count().max(asr.as_ref().map_or(0, |a| a.chars().count())) as u64;
                let dur = 300 + 60 * chars;
                if t + dur > limit {
                    break 'outer;
                }
                words.push(Word { text, asr, start: t, end: t + dur, sentence });
                t += dur + rng.gen_range(60..140);
            }
        }
        t += rng.gen_range(300..900);
        sentence += 1;
    }
    // A sentence cut by the time limit keeps its words; mentions past the
    // cut are dropped.
    mentions.retain(|&(_, first, n)| first + n <= words.len());

    // Reference cues: up to 7 words, closed at sentence ends.
    let mut srt = String::new();
    let mut idx = 1;
    let mut i = 0;
    while i < words.len() {
        let mut j = i + 1;
        while j < words.len() && j - i < 7 && words[j].sentence == words[i].sentence {
            j += 1;
        }
        let texts: Vec<&str> = words[i..j].iter().map(|w| w.text.as_str()).collect();
        let text = texts.join(" ");
        let lines = if text.chars().count() > 37 && texts.len() > 1 {
            let mid = texts.len() / 2;
            format!("{}\n{}", texts[..mid].join(" "), texts[mid..].join(" "))
        } else {
            text
        };
        srt.push_str(&format!("{idx}\n{} --> {}\n{lines}\n\n", timecode(words[i].start), timecode(words[j - 1].end)));
        idx += 1;
        i = j;
    }
    srt.pop();

    // Transcript: one segment per sentence, words with small timing jitter.
    let mut segments = Vec::new();
    let mut s = 0;
    while s < words.len() {
        let mut e = s;
        while e < words.len() && words[e].sentence == words[s].sentence {
            e += 1;
        }
        let mut seg_words = Vec::new();
        for w in &words[s..e] {
            let text = w.asr.clone().unwrap_or_else(|| w.text.clone());
            if text.is_empty() {
                continue;
            }
            let jitter = rng.gen_range(0..40);
            seg_words.push(json!({
                "text": text,
                "start_s": (w.start + jitter) as f64 / 1000.0,
                "end_s": (w.end - jitter) as f64 / 1000.0,
                "confidence": (rng.gen_range(70..100) as f64) / 100.0,
            }));
        }
        if !seg_words.is_empty() {
            let text = seg_words.iter().map(|w| w["text"].as_str().unwrap()).collect::<Vec<_>>().join(" ");
            segments.push(json!({
                "text": text,
                "start_s": words[s].start as f64 / 1000.0,
                "end_s": words[e - 1].end as f64 / 1000.0,
                "words": seg_words,
            }));
        }
        s = e;
    }
    let audio_s = (words.last().map_or(0, |w| w.end) + 500) as f64 / 1000.0;
    let transcript = json!({
        "model_id": model_id,
        "audio_id": format!("synth-{seed}"),
        "audio_duration_s": audio_s,
        "segments": segments,
    });

    let mut entities = String::new();
    for (e, first, _) in mentions {
        let w = &words[first];
        let anchor = (w.start + w.end) as f64 / 2000.0;
        entities.push_str(&json!({"surface": ENTITIES[e].0, "category": ENTITIES[e].1, "anchor_s": anchor}).to_string());
        entities.push('\n');
    }
    SynthEpisode {
        reference_srt: srt,
        transcript_json: serde_json::to_string_pretty(&transcript).unwrap() + "\n",
        entities_jsonl: entities,
        duration_s: audio_s,
    }
}
