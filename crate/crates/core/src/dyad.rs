//! Unordered subject pairs, addressed by index into an ordered subject list.

use serde::{Deserialize, Serialize};

/// Unordered pair of subject indices, stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Dyad {
    a: usize,
    b: usize,
}

impl Dyad {
    /// Panics if `i == j`.
    pub fn new(i: usize, j: usize) -> Self {
        assert_ne!(i, j, "a dyad needs two distinct subjects");
        if i < j {
            Self { a: i, b: j }
        } else {
            Self { a: j, b: i }
        }
    }

    #[inline]
    pub fn a(self) -> usize {
        self.a
    }

    #[inline]
    pub fn b(self) -> usize {
        self.b
    }

    #[inline]
    pub fn contains(self, s: usize) -> bool {
        self.a == s || self.b == s
    }

    /// The member that is not `s`, if `s` is a member.
    pub fn partner(self, s: usize) -> Option<usize> {
        if self.a == s {
            Some(self.b)
        } else if self.b == s {
            Some(self.a)
        } else {
            None
        }
    }
}

/// All `n(n-1)/2` unordered pairs in lexicographic order.
pub fn all_dyads(n: usize) -> Vec<Dyad> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for a in 0..n {
        for b in (a + 1)..n {
            out.push(Dyad { a, b });
        }
    }
    out
}

/// `C(n, 2)`.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}
