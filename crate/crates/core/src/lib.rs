//! Erasure codes whose stale nodes catch up on a single-symbol change by
//! downloading a few helper symbols, without being told what changed.
//!
//! - [`field`]: prime fields and dense matrices over them.
//! - [`mbr`]: product-matrix MBR codes; two helpers send one symbol each.
//! - [`mds`]: Cauchy MDS codes; `k` helpers send two symbols each.
//! - [`ratio`]: locating the change from a pair of differences.
//! - [`bounds`]: witnesses that smaller download budgets cannot work.
//! - [`harness`]: cluster simulation, file formats and traces; [`cli`] wraps it.

pub mod bounds;
pub mod cli;
pub mod field;
pub mod harness;
pub mod mbr;
pub mod mds;
pub mod ratio;
pub mod shard;

#[cfg(test)]
mod testutil;
