use std::ops::Add;

use serde::{Deserialize, Serialize};

/// One step of an edit script from a source sequence to a target sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EditOp {
    Match { src: usize, tgt: usize },
    Substitute { src: usize, tgt: usize },
    Delete { src: usize },
    Insert { tgt: usize },
}

impl EditOp {
    pub fn is_edit(&self) -> bool {
        !matches!(self, EditOp::Match { .. })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub matches: usize,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pub ops: Vec<EditOp>,
}

impl Alignment {
    /// Unit-cost size of the script.
    pub fn cost(&self) -> usize {
        self.ops.iter().filter(|op| op.is_edit()).count()
    }

    pub fn counts(&self) -> OpCounts {
        let mut c = OpCounts::default();
        for op in &self.ops {
            match op {
                EditOp::Match { .. } => c.matches += 1,
                EditOp::Substitute { .. } => c.substitutions += 1,
                EditOp::Delete { .. } => c.deletions += 1,
                EditOp::Insert { .. } => c.insertions += 1,
            }
        }
        c
    }

    /// Applies the script to `src`, taking substituted and inserted items
    /// from `tgt`. A valid alignment reproduces `tgt`.
    pub fn replay<T: Clone>(&self, src: &[T], tgt: &[T]) -> Vec<T> {
        self.ops
            .iter()
            .filter_map(|op| match *op {
                EditOp::Match { src: s, .. } => Some(src[s].clone()),
                EditOp::Substitute { tgt: t, .. } | EditOp::Insert { tgt: t } => Some(tgt[t].clone()),
                EditOp::Delete { .. } => None,
            })
            .collect()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Back {
    Diag,
    Up,
    Left,
}

/// Cost of pairing source item `i` with target item `j`: `None` forbids the
/// pairing, `Some((cost, true))` is a match.
pub(crate) type DiagCost<'a, C> = &'a dyn Fn(usize, usize) -> Option<(C, bool)>;

/// Generic edit-distance DP with a full backtrace.
///
/// At every cell the first minimal candidate in the order diagonal (match or
/// substitute), delete, insert wins, which fixes the tie-break across runs.
pub(crate) fn align_by<C>(
    n: usize,
    m: usize,
    diag: DiagCost<'_, C>,
    del: &dyn Fn(usize) -> C,
    ins: &dyn Fn(usize) -> C,
    zero: C,
) -> (C, Vec<EditOp>)
where
    C: Copy + PartialOrd + Add<Output = C>,
{
    let w = m + 1;
    let mut cost = vec![zero; (n + 1) * w];
    let mut back = vec![Back::Diag; (n + 1) * w];
    let mut is_match = vec![false; (n + 1) * w];
    for i in 1..=n {
        cost[i * w] = cost[(i - 1) * w] + del(i - 1);
        back[i * w] = Back::Up;
    }
    for j in 1..=m {
        cost[j] = cost[j - 1] + ins(j - 1);
        back[j] = Back::Left;
    }
    for i in 1..=n {
        for j in 1..=m {
            let mut best: Option<(C, Back, bool)> = None;
            if let Some((c, matched)) = diag(i - 1, j - 1) {
                best = Some((cost[(i - 1) * w + j - 1] + c, Back::Diag, matched));
            }
            let up = cost[(i - 1) * w + j] + del(i - 1);
            if best.map_or(true, |(b, _, _)| up < b) {
                best = Some((up, Back::Up, false));
            }
            let left = cost[i * w + j - 1] + ins(j - 1);
            if best.map_or(true, |(b, _, _)| left < b) {
                best = Some((left, Back::Left, false));
            }
            let (c, b, mt) = best.expect("delete is always available");
            cost[i * w + j] = c;
            back[i * w + j] = b;
            is_match[i * w + j] = mt;
        }
    }
    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        match back[i * w + j] {
            Back::Diag => {
                let op = if is_match[i * w + j] {
                    EditOp::Match { src: i - 1, tgt: j - 1 }
                } else {
                    EditOp::Substitute { src: i - 1, tgt: j - 1 }
                };
                ops.push(op);
                i -= 1;
                j -= 1;
            }
            Back::Up => {
                ops.push(EditOp::Delete { src: i - 1 });
                i -= 1;
            }
            Back::Left => {
                ops.push(EditOp::Insert { tgt: j - 1 });
                j -= 1;
            }
        }
    }
    ops.reverse();
    (cost[n * w + m], ops)
}

/// Minimal unit-cost alignment of `a` onto `b`.
///
/// Ties prefer Match, then Substitute, then Delete, then Insert, walking
/// back from the end of both sequences.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> Alignment {
    let diag = |i: usize, j: usize| {
        let same = a[i] == b[j];
        Some((usize::from(!same), same))
    };
    let (_, ops) = align_by(a.len(), b.len(), &diag, &|_| 1usize, &|_| 1usize, 0usize);
    Alignment { ops }
}

/// Unit-cost edit distance without a backtrace, in O(min(n, m)) memory.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut curr = vec![0; short.len() + 1];
    for (i, x) in long.iter().enumerate() {
        curr[0] = i + 1;
        for (j, y) in short.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[short.len()]
}
