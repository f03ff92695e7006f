//! Processes and extensional process sets over a fixed universe `{0, .., n-1}`.

use std::cmp::Ordering;
use std::fmt;

/// Largest universe supported by the bitset representation.
pub const MAX_PROCESSES: usize = 8;

/// A process of the universe, 0-based. Displayed as `p{index+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProcessId(pub usize);

impl ProcessId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0 + 1)
    }
}

/// A subset of the universe, stored as a bitmask.
///
/// Ordering is lexicographic on the sorted member lists, so `{p1} < {p1,p2} < {p2}`,
/// with the empty set first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ProcessSet(u32);

impl ProcessSet {
    pub const EMPTY: ProcessSet = ProcessSet(0);

    pub fn full(n: usize) -> Self {
        debug_assert!(n <= MAX_PROCESSES);
        ProcessSet(((1u64 << n) - 1) as u32)
    }

    pub fn singleton(p: usize) -> Self {
        ProcessSet(1 << p)
    }

    pub fn from_bits(bits: u32) -> Self {
        ProcessSet(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        indices
            .into_iter()
            .fold(ProcessSet::EMPTY, |s, p| s.with(p))
    }

    pub fn contains(self, p: usize) -> bool {
        self.0 >> p & 1 == 1
    }

    #[must_use]
    pub fn with(self, p: usize) -> Self {
        ProcessSet(self.0 | 1 << p)
    }

    #[must_use]
    pub fn without(self, p: usize) -> Self {
        ProcessSet(self.0 & !(1 << p))
    }

    #[must_use]
    pub fn union(self, other: Self) -> Self {
        ProcessSet(self.0 | other.0)
    }

    #[must_use]
    pub fn intersection(self, other: Self) -> Self {
        ProcessSet(self.0 & other.0)
    }

    #[must_use]
    pub fn difference(self, other: Self) -> Self {
        ProcessSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Whether every member is a valid index of a universe of size `n`.
    pub fn fits(self, n: usize) -> bool {
        self.is_subset(ProcessSet::full(n))
    }

    pub fn iter(self) -> impl Iterator<Item = usize> + Clone {
        let bits = self.0;
        (0..32).filter(move |p| bits >> p & 1 == 1)
    }

    pub fn to_indices(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// All `2^n` subsets of a universe of size `n`, in bitmask order.
    pub fn all_subsets(n: usize) -> impl Iterator<Item = ProcessSet> {
        (0..1u32 << n).map(ProcessSet)
    }

    /// All subsets of size at least `k`.
    pub fn subsets_of_size_at_least(n: usize, k: usize) -> impl Iterator<Item = ProcessSet> {
        Self::all_subsets(n).filter(move |s| s.len() >= k)
    }

    /// All supersets of `self` inside a universe of size `n`.
    pub fn supersets(self, n: usize) -> impl Iterator<Item = ProcessSet> {
        Self::all_subsets(n).filter(move |s| self.is_subset(*s))
    }
}

impl Ord for ProcessSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.iter().cmp(other.iter())
    }
}

impl PartialOrd for ProcessSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ProcessSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, p) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "p{}", p + 1)?;
        }
        f.write_str("}")
    }
}
