//! Horizon-truncated collections: a table `(round, process) -> ProcessSet`.
//!
//! The same shape serves as delivered collection (which messages are ever
//! delivered) and heard-of collection (which messages arrive on time).

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_round, Error, Result};
use crate::process::{ProcessSet, MAX_PROCESSES};

/// A finite truncation of an infinite collection, rounds `1..=horizon`.
///
/// Ordering is lexicographic over the round-major table, which gives the
/// canonical order used for every serialized set of collections.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Collection {
    n: usize,
    horizon: usize,
    sets: Vec<ProcessSet>,
}

pub type DeliveredCollection = Collection;
pub type HeardOfCollection = Collection;

pub(crate) fn check_shape(n: usize, horizon: usize) -> Result<()> {
    if n == 0 || n > MAX_PROCESSES {
        return Err(Error::InvalidParameter(format!(
            "universe size must be in [1, {MAX_PROCESSES}], got {n}"
        )));
    }
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    Ok(())
}

impl Collection {
    /// The collection where every process receives every message at every round.
    pub fn total(n: usize, horizon: usize) -> Self {
        Self::filled(n, horizon, ProcessSet::full(n))
    }

    pub fn filled(n: usize, horizon: usize, set: ProcessSet) -> Self {
        Collection {
            n,
            horizon,
            sets: vec![set; n * horizon],
        }
    }

    /// Builds a collection from a round-major table (`sets[r-1][p]`).
    pub fn from_rows(n: usize, rows: &[Vec<ProcessSet>]) -> Result<Self> {
        check_shape(n, rows.len())?;
        let mut sets = Vec::with_capacity(n * rows.len());
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Malformed(format!(
                    "round {} has {} entries, expected {n}",
                    r + 1,
                    row.len()
                )));
            }
            for s in row {
                if !s.fits(n) {
                    return Err(Error::Malformed(format!("{s} is not a subset of the universe")));
                }
                sets.push(*s);
            }
        }
        Ok(Collection {
            n,
            horizon: rows.len(),
            sets,
        })
    }

    pub(crate) fn from_flat(n: usize, horizon: usize, sets: Vec<ProcessSet>) -> Self {
        debug_assert_eq!(sets.len(), n * horizon);
        Collection { n, horizon, sets }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `c(r, p)` for `1 <= r <= horizon`. Panics outside the table.
    pub fn get(&self, round: usize, p: usize) -> ProcessSet {
        assert!(round >= 1 && round <= self.horizon && p < self.n);
        self.sets[(round - 1) * self.n + p]
    }

    pub fn set(&mut self, round: usize, p: usize, value: ProcessSet) {
        assert!(round >= 1 && round <= self.horizon && p < self.n);
        self.sets[(round - 1) * self.n + p] = value;
    }

    pub fn row(&self, round: usize) -> &[ProcessSet] {
        &self.sets[(round - 1) * self.n..round * self.n]
    }

    pub fn entries(&self) -> &[ProcessSet] {
        &self.sets
    }

    /// The prefix of process `p` up to `len` rounds.
    pub fn prefix_of(&self, p: usize, len: usize) -> Vec<ProcessSet> {
        (1..=len).map(|r| self.get(r, p)).collect()
    }

    pub fn is_total(&self) -> bool {
        let full = ProcessSet::full(self.n);
        self.sets.iter().all(|s| *s == full)
    }

    /// The kernel at round `r`: processes heard by everyone.
    pub fn kernel(&self, round: usize) -> Result<ProcessSet> {
        check_round(round, self.horizon)?;
        Ok(self
            .row(round)
            .iter()
            .fold(ProcessSet::full(self.n), |k, s| k.intersection(*s)))
    }

    fn check_same_shape(&self, other: &Collection) -> Result<()> {
        if self.n != other.n || self.horizon != other.horizon {
            return Err(Error::ShapeMismatch {
                expected_n: self.n,
                expected_horizon: self.horizon,
                found_n: other.n,
                found_horizon: other.horizon,
            });
        }
        Ok(())
    }

    /// Pointwise intersection.
    pub fn combine(&self, other: &Collection) -> Result<Collection> {
        self.check_same_shape(other)?;
        Ok(Collection {
            n: self.n,
            horizon: self.horizon,
            sets: self
                .sets
                .iter()
                .zip(&other.sets)
                .map(|(a, b)| a.intersection(*b))
                .collect(),
        })
    }

    /// `self[1, cut] . other`, truncated to `self.horizon` rounds.
    pub fn concat(&self, cut: usize, other: &Collection) -> Result<Collection> {
        self.check_same_shape(other)?;
        if cut > self.horizon {
            return Err(Error::RoundOutOfRange {
                round: cut,
                horizon: self.horizon,
            });
        }
        let n = self.n;
        let mut sets = Vec::with_capacity(self.sets.len());
        sets.extend_from_slice(&self.sets[..cut * n]);
        sets.extend_from_slice(&other.sets[..(self.horizon - cut) * n]);
        Ok(Collection {
            n,
            horizon: self.horizon,
            sets,
        })
    }

    /// Keeps the first `horizon` rounds.
    pub fn truncate(&self, horizon: usize) -> Result<Collection> {
        if horizon == 0 || horizon > self.horizon {
            return Err(Error::RoundOutOfRange {
                round: horizon,
                horizon: self.horizon,
            });
        }
        Ok(Collection {
            n: self.n,
            horizon,
            sets: self.sets[..horizon * self.n].to_vec(),
        })
    }

    /// Rows as sorted index lists, the JSON representation.
    pub fn to_index_rows(&self) -> Vec<Vec<Vec<usize>>> {
        (1..=self.horizon)
            .map(|r| self.row(r).iter().map(|s| s.to_indices()).collect())
            .collect()
    }

    pub fn from_index_rows(n: usize, rows: &[Vec<Vec<usize>>]) -> Result<Collection> {
        let rows: Vec<Vec<ProcessSet>> = rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|idx| {
                        if let Some(bad) = idx.iter().find(|&&p| p >= n) {
                            return Err(Error::Malformed(format!("process index {bad} >= n={n}")));
                        }
                        Ok(ProcessSet::from_indices(idx.iter().copied()))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Collection::from_rows(n, &rows)
    }
}

impl fmt::Display for Collection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 1..=self.horizon {
            if r > 1 {
                f.write_str(" | ")?;
            }
            write!(f, "r{r}:")?;
            for s in self.row(r) {
                write!(f, " {s}")?;
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct CollectionJson {
    n: usize,
    horizon: usize,
    sets: Vec<Vec<Vec<usize>>>,
}

impl Serialize for Collection {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        CollectionJson {
            n: self.n,
            horizon: self.horizon,
            sets: self.to_index_rows(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Collection {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = CollectionJson::deserialize(deserializer)?;
        let c = Collection::from_index_rows(raw.n, &raw.sets).map_err(serde::de::Error::custom)?;
        if c.horizon != raw.horizon {
            return Err(serde::de::Error::custom(format!(
                "horizon {} does not match {} rows",
                raw.horizon, c.horizon
            )));
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(idx: &[usize]) -> ProcessSet {
        ProcessSet::from_indices(idx.iter().copied())
    }

    #[test]
    fn kernel_of_total_is_universe() {
        let c = Collection::total(3, 2);
        assert_eq!(c.kernel(1).unwrap(), ProcessSet::full(3));
        assert_eq!(c.kernel(2).unwrap(), ProcessSet::full(3));
    }

    #[test]
    fn kernel_is_plain_intersection() {
        let c = Collection::from_rows(3, &[vec![ps(&[0, 1]), ps(&[1, 2]), ps(&[0, 1, 2])]]).unwrap();
        assert_eq!(c.kernel(1).unwrap(), ps(&[1]));
    }

    #[test]
    fn kernel_rejects_out_of_range_round() {
        let c = Collection::total(3, 2);
        assert_eq!(
            c.kernel(3),
            Err(Error::RoundOutOfRange {
                round: 3,
                horizon: 2
            })
        );
        assert!(c.kernel(0).is_err());
    }

    #[test]
    fn combine_identities() {
        let c = Collection::from_rows(
            3,
            &[
                vec![ps(&[0, 1]), ps(&[1, 2]), ps(&[0, 1, 2])],
                vec![ps(&[1]), ps(&[1]), ps(&[0, 1])],
            ],
        )
        .unwrap();
        let total = Collection::total(3, 2);
        assert_eq!(total.combine(&c).unwrap(), c);
        assert_eq!(c.combine(&c).unwrap(), c);
        assert!(c.combine(&Collection::total(3, 1)).is_err());
        assert!(c.combine(&Collection::total(2, 2)).is_err());
    }

    #[test]
    fn concat_cut_points() {
        let a = Collection::filled(3, 2, ps(&[0, 1]));
        let b = Collection::total(3, 2);
        assert_eq!(a.concat(0, &b).unwrap(), b);
        assert_eq!(a.concat(2, &b).unwrap(), a);
        let mixed = a.concat(1, &b).unwrap();
        assert_eq!(mixed.row(1), a.row(1));
        assert_eq!(mixed.row(2), b.row(1));
        assert!(a.concat(3, &b).is_err());
    }

    #[test]
    fn json_shape_is_round_major_with_sorted_indices() {
        let c = Collection::from_rows(2, &[vec![ps(&[1, 0]), ps(&[1])]]).unwrap();
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, r#"{"n":2,"horizon":1,"sets":[[[0,1],[1]]]}"#);
        let back: Collection = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<Collection>(r#"{"n":2,"horizon":1,"sets":[[[0,2],[1]]]}"#).is_err());
        assert!(serde_json::from_str::<Collection>(r#"{"n":2,"horizon":2,"sets":[[[0],[1]]]}"#).is_err());
    }
}
