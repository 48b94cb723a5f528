//! Sorted, disjoint half-open time intervals.

use crate::trace::Millis;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Spans(Vec<(Millis, Millis)>);

impl Spans {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `[start, end)`. Spans must be pushed in time order; touching
    /// or overlapping spans are merged and empty ones dropped.
    pub fn push(&mut self, start: Millis, end: Millis) {
        if end <= start {
            return;
        }
        match self.0.last_mut() {
            Some(last) if start <= last.1 => {
                debug_assert!(start >= last.0, "spans pushed out of order");
                last.1 = last.1.max(end);
            }
            _ => self.0.push((start, end)),
        }
    }

    pub fn as_slice(&self) -> &[(Millis, Millis)] {
        &self.0
    }

    pub fn total(&self) -> Millis {
        self.0.iter().map(|(s, e)| e - s).sum()
    }

    /// The part of these spans inside `[start, end)`.
    pub fn clip(&self, start: Millis, end: Millis) -> Spans {
        let first = self.0.partition_point(|&(_, e)| e <= start);
        let mut out = Spans::new();
        for &(s, e) in &self.0[first..] {
            if s >= end {
                break;
            }
            out.push(s.max(start), e.min(end));
        }
        out
    }

    /// These spans minus `other`.
    pub fn subtract(&self, other: &Spans) -> Spans {
        let mut out = Spans::new();
        let mut j = 0;
        for &(s, e) in &self.0 {
            let mut cursor = s;
            while j < other.0.len() && other.0[j].1 <= cursor {
                j += 1;
            }
            let mut k = j;
            while k < other.0.len() && other.0[k].0 < e {
                let (os, oe) = other.0[k];
                out.push(cursor, os.min(e));
                cursor = cursor.max(oe);
                if cursor >= e {
                    break;
                }
                k += 1;
            }
            out.push(cursor, e);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn from(pairs: &[(Millis, Millis)]) -> Spans {
        let mut s = Spans::new();
        for &(a, b) in pairs {
            s.push(a, b);
        }
        s
    }

    #[test]
    fn push_merges_touching() {
        let s = from(&[(0, 5), (5, 8), (10, 10), (12, 15)]);
        assert_eq!(s.as_slice(), &[(0, 8), (12, 15)]);
        assert_eq!(s.total(), 11);
    }

    #[test]
    fn clip_and_subtract() {
        let s = from(&[(0, 10), (20, 30)]);
        assert_eq!(s.clip(5, 25).as_slice(), &[(5, 10), (20, 25)]);
        let holes = from(&[(2, 4), (8, 22), (29, 40)]);
        assert_eq!(s.subtract(&holes).as_slice(), &[(0, 2), (4, 8), (22, 29)]);
    }

    fn arb_spans() -> impl Strategy<Value = Spans> {
        prop::collection::vec((0u64..50, 0u64..10), 0..8).prop_map(|steps| {
            let mut s = Spans::new();
            let mut t = 0;
            for (gap, len) in steps {
                t += gap;
                s.push(t, t + len);
                t += len;
            }
            s
        })
    }

    fn covered(s: &Spans, x: Millis) -> bool {
        s.as_slice().iter().any(|&(a, b)| a <= x && x < b)
    }

    proptest! {
        #[test]
        fn subtract_matches_pointwise(a in arb_spans(), b in arb_spans()) {
            let d = a.subtract(&b);
            for x in 0..500 {
                prop_assert_eq!(covered(&d, x), covered(&a, x) && !covered(&b, x));
            }
        }

        #[test]
        fn clip_matches_pointwise(a in arb_spans(), lo in 0u64..300, len in 0u64..300) {
            let c = a.clip(lo, lo + len);
            for x in 0..700 {
                prop_assert_eq!(covered(&c, x), covered(&a, x) && lo <= x && x < lo + len);
            }
        }
    }
}
