//! Exhaustive reference computations for small inputs.
//!
//! Nothing here shares code with `subqa-core`; every routine enumerates the
//! full search space its property is defined over, so it is only usable on
//! tiny instances.

use std::collections::{HashMap, VecDeque};

pub mod synth;

/// Minimum number of edits over every edit script turning `a` into `b`
/// (substitute, delete, insert; matches are free). Enumerates all alignment
/// paths.
pub fn min_edit_script<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    fn go<T: PartialEq>(a: &[T], b: &[T], best: &mut usize, acc: usize) {
        if acc >= *best {
            return;
        }
        match (a.split_first(), b.split_first()) {
            (None, None) => *best = acc,
            (Some(_), None) => go(&a[1..], b, best, acc + 1),
            (None, Some(_)) => go(a, &b[1..], best, acc + 1),
            (Some((x, ar)), Some((y, br))) => {
                go(ar, br, best, acc + usize::from(x != y));
                go(ar, b, best, acc + 1);
                go(a, br, best, acc + 1);
            }
        }
    }
    let mut best = usize::MAX;
    go(a, b, &mut best, 0);
    best
}

/// A subtitle token with the time span of its cue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanToken {
    pub text: String,
    pub is_word: bool,
    pub start: u64,
    pub end: u64,
}

impl SpanToken {
    pub fn word(text: &str, start: u64, end: u64) -> Self {
        SpanToken { text: text.to_string(), is_word: true, start, end }
    }

    pub fn brk(text: &str, start: u64, end: u64) -> Self {
        SpanToken { text: text.to_string(), is_word: false, start, end }
    }

    fn may_pair(&self, other: &SpanToken) -> bool {
        self.start < other.end && other.start < self.end && self.is_word == other.is_word
    }
}

/// Time-constrained edit distance by enumerating every alignment path:
/// diagonal steps only between same-family tokens whose spans overlap.
pub fn constrained_edit_distance(r: &[&SpanToken], h: &[&SpanToken]) -> usize {
    fn go(r: &[&SpanToken], h: &[&SpanToken], best: &mut usize, acc: usize) {
        if acc >= *best {
            return;
        }
        if r.is_empty() && h.is_empty() {
            *best = acc;
            return;
        }
        if let (Some(x), Some(y)) = (r.first(), h.first()) {
            if x.may_pair(y) {
                go(&r[1..], &h[1..], best, acc + usize::from(x.text != y.text));
            }
        }
        if !r.is_empty() {
            go(&r[1..], h, best, acc + 1);
        }
        if !h.is_empty() {
            go(r, &h[1..], best, acc + 1);
        }
    }
    let mut best = usize::MAX;
    go(r, h, &mut best, 0);
    best
}

/// Minimum of `shifts + constrained edit distance` over every sequence of
/// shifts, where a shift moves any contiguous block (length at most
/// `max_block`) of hypothesis words to any other position.
pub fn suber_exhaustive(r: &[SpanToken], h: &[SpanToken], max_block: usize) -> usize {
    let rr: Vec<&SpanToken> = r.iter().collect();
    let eval = |order: &[usize]| {
        let hh: Vec<&SpanToken> = order.iter().map(|&i| &h[i]).collect();
        constrained_edit_distance(&rr, &hh)
    };
    let start: Vec<usize> = (0..h.len()).collect();
    let mut depth: HashMap<Vec<usize>, usize> = HashMap::new();
    depth.insert(start.clone(), 0);
    let mut queue = VecDeque::from([start.clone()]);
    let mut best = eval(&start);
    while let Some(order) = queue.pop_front() {
        let d = depth[&order];
        best = best.min(d + eval(&order));
        if d + 1 >= best {
            continue;
        }
        let n = order.len();
        for s in 0..n {
            for len in 1..=max_block.min(n - s) {
                if !order[s..s + len].iter().all(|&i| h[i].is_word) {
                    break;
                }
                for p in 0..=n - len {
                    if p == s {
                        continue;
                    }
                    let mut rest: Vec<usize> = order[..s].iter().chain(&order[s + len..]).copied().collect();
                    rest.splice(p..p, order[s..s + len].iter().copied());
                    if !depth.contains_key(&rest) {
                        depth.insert(rest.clone(), d + 1);
                        queue.push_back(rest);
                    }
                }
            }
        }
    }
    best
}

/// Minimum cost over all monotone partial pairings of `n` reference with
/// `m` hypothesis items: `1 - sim` per pair, 1 per unpaired item.
pub fn min_monotone_pairing(sim: &[Vec<f64>], n: usize, m: usize) -> f64 {
    fn go(sim: &[Vec<f64>], i: usize, j: usize, n: usize, m: usize) -> f64 {
        if i == n {
            return (m - j) as f64;
        }
        // Reference i unpaired, or paired with some hypothesis k >= j
        // (hypotheses j..k skipped).
        let mut best = 1.0 + go(sim, i + 1, j, n, m);
        for k in j..m {
            let c = (k - j) as f64 + (1.0 - sim[i][k]) + go(sim, i + 1, k + 1, n, m);
            if c < best {
                best = c;
            }
        }
        best
    }
    go(sim, 0, 0, n, m)
}

/// Minimum total cost over all ways to cut `0..n` into consecutive
/// non-empty pieces; `cost(start, end)` returns `None` for forbidden
/// pieces. Enumerates all `2^(n-1)` cut sets.
pub fn min_segmentation(n: usize, cost: impl Fn(usize, usize) -> Option<u64>) -> Option<u64> {
    assert!(n >= 1 && n <= 20);
    let mut best: Option<u64> = None;
    for mask in 0u32..(1u32 << (n - 1)) {
        let mut total = 0u64;
        let mut start = 0;
        let mut ok = true;
        for gap in 0..n {
            let cut_here = gap == n - 1 || mask & (1 << gap) != 0;
            if cut_here {
                match cost(start, gap + 1) {
                    Some(c) => total += c,
                    None => {
                        ok = false;
                        break;
                    }
                }
                start = gap + 1;
            }
        }
        if ok && best.map_or(true, |b| total < b) {
            best = Some(total);
        }
    }
    best
}

/// Exact Wilcoxon signed-rank tail probabilities by enumerating every sign
/// assignment of the (average) ranks of the non-zero deltas.
///
/// Returns `(w_plus, p_less, p_greater, p_two_sided)` where `p_less` is
/// `P(W+ <= observed)`.
pub fn wilcoxon_enumerate(deltas: &[f64]) -> (f64, f64, f64, f64) {
    let nz: Vec<f64> = deltas.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nz.len();
    assert!(n >= 1 && n <= 20);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| nz[a].abs().partial_cmp(&nz[b].abs()).unwrap());
    let mut rank = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && nz[idx[j + 1]].abs() == nz[idx[i]].abs() {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            rank[idx[k]] = avg;
        }
        i = j + 1;
    }
    let observed: f64 = (0..n).filter(|&k| nz[k] > 0.0).map(|k| rank[k]).sum();
    let total = 1u64 << n;
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0..total {
        let w: f64 = (0..n).filter(|&k| mask & (1 << k) != 0).map(|k| rank[k]).sum();
        if w <= observed + 1e-9 {
            le += 1;
        }
        if w >= observed - 1e-9 {
            ge += 1;
        }
    }
    let p_less = le as f64 / total as f64;
    let p_greater = ge as f64 / total as f64;
    (observed, p_less, p_greater, (2.0 * p_less.min(p_greater)).min(1.0))
}

/// A timed word as `(text, start_ms, end_ms)`.
pub type RawWord = (String, u64, u64);

/// Random word stream in which every word can stand alone as a cue under
/// broadcast limits (at most 37 characters, 15 chars/s, 6 s). Gaps are
/// mostly short, sometimes long enough to force a boundary.
pub fn random_word_stream<R: rand::Rng>(rng: &mut R, n: usize) -> Vec<RawWord> {
    const STEMS: &[&str] = &[
        "si", "no", "casa", "governo", "la", "di", "operazione", "provincia", "sicuramente", "e", "ma", "che",
        "presidente", "un", "ricerca", "scientifica", "territorio", "quando", "giornalista", "ok",
    ];
    const TAILS: &[&str] = &["", "", "", "", "", ",", ".", "?", ";", ":"];
    let mut t = rng.gen_range(0..2000u64);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut text = STEMS[rng.gen_range(0..STEMS.len())].to_string();
        if rng.gen_bool(0.15) {
            text.push_str(STEMS[rng.gen_range(0..STEMS.len())]);
        }
        text.push_str(TAILS[rng.gen_range(0..TAILS.len())]);
        let chars = text.chars().count() as u64;
        let min_dur = (chars * 1000).div_ceil(15);
        let dur = rng.gen_range(min_dur..=(min_dur * 3).clamp(min_dur, 6000));
        out.push((text, t, t + dur));
        let gap = if rng.gen_bool(0.08) { rng.gen_range(1500..4000) } else { rng.gen_range(0..400) };
        t += dur + gap;
    }
    out
}

/// Penalty of one cue covering `words[i..j]` under default broadcast limits
/// and default weights, or `None` when the cue breaks a hard limit. Written
/// from the rules directly: no layout search, only the fact that a text
/// over 37 characters needs one space turned into a line break.
pub fn default_cue_penalty(words: &[RawWord], i: usize, j: usize) -> Option<u64> {
    const LINE: usize = 37;
    const CONJ: &[&str] = &[
        "e", "ed", "o", "od", "ma", "però", "perché", "perche", "che", "quando", "mentre", "se", "oppure", "quindi",
        "dunque", "poiché", "anche", "and", "but", "or", "so", "because", "when", "while", "if", "that", "which",
    ];
    let forced = |g: usize| words[g + 1].1.saturating_sub(words[g].2) >= 1500;
    if (i..j - 1).any(forced) {
        return None;
    }
    let toks: Vec<&str> = words[i..j].iter().map(|w| w.0.as_str()).collect();
    let len: usize = toks.iter().map(|t| t.chars().count()).sum::<usize>() + toks.len() - 1;
    let ncs = if len <= LINE {
        len
    } else {
        // Some prefix must fit on line one and the rest on line two.
        let mut left = 0;
        let mut ok = false;
        for k in 1..toks.len() {
            left += toks[k - 1].chars().count() + if k > 1 { 1 } else { 0 };
            if left <= LINE && len - left - 1 <= LINE {
                ok = true;
            }
        }
        if !ok {
            return None;
        }
        len - 1
    };
    let start = words[i].1;
    let end = match words.get(j) {
        Some(next) if next.1 < words[j - 1].2 => next.1,
        _ => words[j - 1].2,
    };
    if end <= start {
        return None;
    }
    let dur = end - start;
    // Integer comparisons: cps > 15 <=> ncs * 1000 > 15 * dur.
    if ncs > 74 || dur > 6000 || ncs as u64 * 1000 > 15 * dur {
        return None;
    }
    let mut cost = 1;
    if ncs < 30 {
        cost += 15;
    }
    if dur < 1000 {
        cost += 10;
    }
    if (ncs as u64) * 1000 < 9 * dur {
        cost += 5;
    }
    if j < words.len() && !forced(j - 1) {
        let prev = words[j - 1].0.trim_end_matches(['"', '\'', ')', ']', '»', '”', '’']);
        let next: String = words[j].0.chars().skip_while(|c| !c.is_alphanumeric()).take_while(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect();
        cost += match prev.chars().last() {
            Some('.' | '?' | '!' | '…') => 0,
            Some(',' | ';' | ':') => 10,
            _ if CONJ.contains(&next.as_str()) => 20,
            _ => 30,
        };
    }
    Some(cost)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edit_script_basics() {
        let k: Vec<char> = "kitten".chars().collect();
        let s: Vec<char> = "sitting".chars().collect();
        assert_eq!(min_edit_script(&k, &s), 3);
        assert_eq!(min_edit_script::<u8>(&[], &[1, 2]), 2);
    }

    #[test]
    fn wilcoxon_all_negative() {
        let (w, p_less, _, _) = wilcoxon_enumerate(&[-1.0, -2.0, -3.0, -4.0, -5.0]);
        assert_eq!(w, 0.0);
        assert_eq!(p_less, 1.0 / 32.0);
    }

    #[test]
    fn segmentation_counts_all_cuts() {
        // Every piece costs 1: best is a single piece.
        assert_eq!(min_segmentation(4, |_, _| Some(1)), Some(1));
        // Pieces longer than 1 forbidden: n pieces.
        assert_eq!(min_segmentation(4, |s, e| (e - s == 1).then_some(1)), Some(4));
    }
}

fn srt_timecode(ms: u64) -> String {
    format!("{:02}:{:02}:{:02},{:03}", ms / 3_600_000, ms / 60_000 % 60, ms / 1000 % 60, ms % 1000)
}

/// A random SubRip file in canonical form: LF endings, one blank line
/// between blocks, increasing indices (not always consecutive), occasional
/// overlaps and multi-line cues with accented text. Parsing then emitting
/// it must reproduce the bytes exactly.
pub fn random_srt<R: rand::Rng>(rng: &mut R) -> String {
    const WORDS: &[&str] = &[
        "perché", "città", "l'Italia", "dell'Anas", "Sì,", "no.", "«davvero»", "caffè", "\u{2014}", "già", "100%", "<i>bene</i>",
        "Vibo", "Valentia", "ciao!", "però", "d’accordo", "niño", "über", "…",
    ];
    let n = rng.gen_range(0..30);
    let mut out = String::new();
    let mut index = 0u32;
    let mut t = rng.gen_range(0..10_000u64);
    for k in 0..n {
        index += rng.gen_range(1..=2);
        let dur = rng.gen_range(1..8000);
        let lines = rng.gen_range(1..=3);
        if k > 0 {
            out.push('\n');
        }
        out.push_str(&format!("{index}\n{} --> {}\n", srt_timecode(t), srt_timecode(t + dur)));
        for _ in 0..lines {
            let words: Vec<&str> = (0..rng.gen_range(1..6)).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect();
            out.push_str(&words.join(" "));
            out.push('\n');
        }
        // Mostly forward; sometimes the next cue starts inside this one.
        t += if rng.gen_bool(0.1) { dur / 2 } else { dur + rng.gen_range(0..3000) };
    }
    out
}
