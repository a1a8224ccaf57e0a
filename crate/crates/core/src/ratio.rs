//! Locating a single changed message symbol from two observed differences.
//!
//! Both update algorithms end in the same step: the stale node holds two
//! differences `(d1, d2)` that equal `(c1 * delta, c2 * delta)` for the
//! coefficient pair `(c1, c2)` of whichever symbol changed. Ratios are compared
//! projectively by cross-multiplication, so pairs with a zero component such as
//! `(10 : 0)` are handled like any other.

use thiserror::Error;

use crate::field::FieldElement;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RatioError {
    /// More than one symbol changed, or a response was corrupted.
    #[error("no candidate ratio matches the observed differences ({d1} : {d2})")]
    NoMatch { d1: FieldElement, d2: FieldElement },
    /// The coefficient table does not separate locations.
    #[error("observed ratio matches several candidates: {indices:?}")]
    Ambiguous { indices: Vec<usize> },
}

/// An element `(a : b)` of the projective line, with `(a, b) != (0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProjectiveRatio {
    a: FieldElement,
    b: FieldElement,
}

impl ProjectiveRatio {
    pub fn new(a: FieldElement, b: FieldElement) -> Option<Self> {
        (!(a.is_zero() && b.is_zero())).then_some(Self { a, b })
    }

    pub fn parts(self) -> (FieldElement, FieldElement) {
        (self.a, self.b)
    }

    pub fn same_as(self, other: Self) -> bool {
        self.a * other.b == other.a * self.b
    }

    /// Canonical representative: `(a / b : 1)` or `(1 : 0)`.
    pub fn normalized(self) -> (FieldElement, FieldElement) {
        let one = self.a.field().one();
        if self.b.is_zero() {
            (one, self.b)
        } else {
            (self.a * self.b.inv().expect("non-zero"), one)
        }
    }
}

/// A located change: index into the candidate table and the value difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocatedChange {
    pub index: usize,
    pub delta: FieldElement,
}

/// Finds the unique candidate `(c1, c2)` proportional to `(d1, d2)` and
/// recovers `delta` with `d = c * delta`.
///
/// Returns `Ok(None)` when both differences vanish. Candidates equal to
/// `(0, 0)` can never be identified and are skipped.
pub fn identify_change(
    candidates: &[(FieldElement, FieldElement)],
    d1: FieldElement,
    d2: FieldElement,
) -> Result<Option<LocatedChange>, RatioError> {
    let Some(observed) = ProjectiveRatio::new(d1, d2) else {
        return Ok(None);
    };
    let matches: Vec<usize> = candidates
        .iter()
        .enumerate()
        .filter_map(|(t, &(c1, c2))| {
            ProjectiveRatio::new(c1, c2)
                .filter(|r| r.same_as(observed))
                .map(|_| t)
        })
        .collect();
    match matches.as_slice() {
        [] => Err(RatioError::NoMatch { d1, d2 }),
        &[index] => {
            let (c1, c2) = candidates[index];
            // c1 may be zero for at most one location; fall back to the second
            // coordinate there.
            let delta = if c1.is_zero() {
                c2.inv().expect("non-zero") * d2
            } else {
                c1.inv().expect("non-zero") * d1
            };
            Ok(Some(LocatedChange { index, delta }))
        }
        _ => Err(RatioError::Ambiguous { indices: matches }),
    }
}
