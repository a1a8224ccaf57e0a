//! MDS storage code built from a Cauchy generator, with an update protocol
//! that downloads two symbols from each of `k` helpers.
//!
//! The `(nA x B)` generator `Γ` is split into `n` blocks `Γ_l` of `A = B/k`
//! rows; node `l` stores `Γ_l m`. Every square submatrix of a Cauchy matrix is
//! nonsingular, which gives both the any-`k` recovery and the per-column ratio
//! uniqueness the update relies on.

use thiserror::Error;

use crate::field::{self, build_cauchy, FieldElement, FieldError, FpMatrix, PrimeField};
use crate::ratio::{self, RatioError};
use crate::shard::{Diagnosis, Fingerprint, NodeShard, UpdateTranscript};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MdsError {
    #[error("invalid code parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("expected {expected} symbols, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("shard fingerprint {got} does not match code {expected}")]
    FingerprintMismatch { expected: Fingerprint, got: Fingerprint },
    #[error("node {0} does not exist")]
    UnknownNode(usize),
    #[error("node {0} cannot help itself")]
    SameNode(usize),
    #[error("node {0} appears more than once")]
    DuplicateNode(usize),
    #[error("expected exactly {expected} nodes, got {got}")]
    NodeCount { expected: usize, got: usize },
    #[error("coefficient bundle for node {bundle} handed to node {helper}")]
    MisaddressedBundle { bundle: usize, helper: usize },
    #[error(transparent)]
    Ratio(#[from] RatioError),
}

/// Public description of an MDS code instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MdsCodeSpec {
    n: usize,
    k: usize,
    message_len: usize,
    field: PrimeField,
    generator: FpMatrix,
    fingerprint: Fingerprint,
}

/// Smallest modulus that admits the Cauchy generator: `nA + B`.
pub fn min_modulus(n: usize, k: usize, message_len: usize) -> u64 {
    (n * (message_len / k) + message_len) as u64
}

/// Builds the code for `n` nodes, any-`k` recovery and `b` message symbols.
/// Without `q`, the smallest admissible prime is used.
pub fn generate(n: usize, k: usize, b: usize, q: Option<u64>) -> Result<MdsCodeSpec, MdsError> {
    if k == 0 || k >= n {
        return Err(MdsError::InvalidParameters(format!("need 1 <= k < n, got n={n}, k={k}")));
    }
    if !b.is_multiple_of(k) {
        return Err(MdsError::InvalidParameters(format!("k={k} does not divide B={b}")));
    }
    let a = b / k;
    if a < 2 {
        return Err(MdsError::InvalidParameters(format!(
            "each node must store at least 2 symbols, got A = B/k = {a}"
        )));
    }
    let needed = min_modulus(n, k, b);
    let q = match q {
        None => field::next_prime(needed),
        Some(q) if q < needed => {
            return Err(MdsError::InvalidParameters(format!("q = {q} is below nA + B = {needed}")))
        }
        Some(q) => q,
    };
    let generator = build_cauchy(n * a, b, q)?;
    let field = generator.field();
    let fingerprint = Fingerprint::of(format!("mds|n={n}|k={k}|b={b}|q={q}|cauchy={}x{b}", n * a).as_bytes());
    Ok(MdsCodeSpec {
        n,
        k,
        message_len: b,
        field,
        generator,
        fingerprint,
    })
}

impl MdsCodeSpec {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }

    /// `B`
    pub fn message_len(&self) -> usize {
        self.message_len
    }

    /// `A = B / k`
    pub fn shard_len(&self) -> usize {
        self.message_len / self.k
    }

    /// The full `(nA x B)` Cauchy generator.
    pub fn generator(&self) -> &FpMatrix {
        &self.generator
    }

    /// `Γ_l`, the `A x B` block of node `l` (1-based).
    pub fn node_generator(&self, node: usize) -> FpMatrix {
        let a = self.shard_len();
        let rows: Vec<usize> = ((node - 1) * a..node * a).collect();
        self.generator.select_rows(&rows)
    }

    fn check_node(&self, node: usize) -> Result<(), MdsError> {
        if (1..=self.n).contains(&node) {
            Ok(())
        } else {
            Err(MdsError::UnknownNode(node))
        }
    }

    fn check_shard(&self, shard: &NodeShard) -> Result<(), MdsError> {
        if shard.fingerprint != self.fingerprint {
            return Err(MdsError::FingerprintMismatch {
                expected: self.fingerprint.clone(),
                got: shard.fingerprint.clone(),
            });
        }
        self.check_node(shard.node_id)?;
        if shard.symbols.len() != self.shard_len() {
            return Err(MdsError::LengthMismatch {
                expected: self.shard_len(),
                got: shard.symbols.len(),
            });
        }
        Ok(())
    }

    /// Rejects duplicates, unknown ids and (optionally) the stale node itself.
    fn check_distinct(&self, nodes: &[usize], excluded: Option<usize>) -> Result<(), MdsError> {
        for (x, &u) in nodes.iter().enumerate() {
            self.check_node(u)?;
            if Some(u) == excluded {
                return Err(MdsError::SameNode(u));
            }
            if nodes[..x].contains(&u) {
                return Err(MdsError::DuplicateNode(u));
            }
        }
        Ok(())
    }

    /// `[Γ_{u_1}; ...; Γ_{u_j}]`
    pub fn stacked_generator(&self, nodes: &[usize]) -> Result<FpMatrix, MdsError> {
        let blocks: Vec<FpMatrix> = nodes.iter().map(|&u| self.node_generator(u)).collect();
        let refs: Vec<&FpMatrix> = blocks.iter().collect();
        Ok(FpMatrix::vstack(&refs)?)
    }
}

/// Node `l` stores `Γ_l m`.
pub fn encode(spec: &MdsCodeSpec, msg: &[FieldElement]) -> Result<Vec<NodeShard>, MdsError> {
    (1..=spec.n).map(|node| encode_node(spec, msg, node)).collect()
}

pub fn encode_node(spec: &MdsCodeSpec, msg: &[FieldElement], node: usize) -> Result<NodeShard, MdsError> {
    spec.check_node(node)?;
    if msg.len() != spec.message_len {
        return Err(MdsError::LengthMismatch {
            expected: spec.message_len,
            got: msg.len(),
        });
    }
    Ok(NodeShard {
        node_id: node,
        symbols: spec.node_generator(node).mul_vec(msg)?,
        fingerprint: spec.fingerprint.clone(),
    })
}

/// Per-helper coefficients `ξ⁽¹⁾, ξ⁽²⁾` chosen so that
/// `sum_l ξ_l⁽ⁱ⁾ᵀ Γ_{u_l} = Γ_s⁽ⁱ⁾` (the `i`-th row of the stale generator).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoefficientBundle {
    pub helper_id: usize,
    pub xi: [Vec<FieldElement>; 2],
    pub fingerprint: Fingerprint,
}

/// Computed by the stale node and shipped with the request, so helpers never
/// need to know who else participates.
pub fn coefficient_vectors(
    spec: &MdsCodeSpec,
    stale_id: usize,
    helpers: &[usize],
) -> Result<Vec<CoefficientBundle>, MdsError> {
    spec.check_node(stale_id)?;
    if helpers.len() != spec.k {
        return Err(MdsError::NodeCount {
            expected: spec.k,
            got: helpers.len(),
        });
    }
    spec.check_distinct(helpers, Some(stale_id))?;
    let inv = spec.stacked_generator(helpers)?.inverse()?;
    let stale_gen = spec.node_generator(stale_id);
    let full: [Vec<FieldElement>; 2] = [inv.vec_mul(stale_gen.row(0))?, inv.vec_mul(stale_gen.row(1))?];
    let a = spec.shard_len();
    Ok(helpers
        .iter()
        .enumerate()
        .map(|(l, &u)| CoefficientBundle {
            helper_id: u,
            xi: [full[0][l * a..(l + 1) * a].to_vec(), full[1][l * a..(l + 1) * a].to_vec()],
            fingerprint: spec.fingerprint.clone(),
        })
        .collect())
}

/// The two symbols a helper returns: its stored data projected on `ξ⁽¹⁾` and
/// `ξ⁽²⁾`.
pub fn helper_response(helper: &NodeShard, bundle: &CoefficientBundle) -> Result<(FieldElement, FieldElement), MdsError> {
    if helper.fingerprint != bundle.fingerprint {
        return Err(MdsError::FingerprintMismatch {
            expected: bundle.fingerprint.clone(),
            got: helper.fingerprint.clone(),
        });
    }
    if helper.node_id != bundle.helper_id {
        return Err(MdsError::MisaddressedBundle {
            bundle: bundle.helper_id,
            helper: helper.node_id,
        });
    }
    Ok((
        field::dot(&bundle.xi[0], &helper.symbols)?,
        field::dot(&bundle.xi[1], &helper.symbols)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HelperPair {
    pub helper_id: usize,
    pub symbols: (FieldElement, FieldElement),
}

/// Stale-node side: sums the `2k` received symbols into `Γ_s⁽¹⁾m'` and
/// `Γ_s⁽²⁾m'`, differences them against its first two stored symbols, finds
/// the column whose ratio matches and adds `δ` times that column of `Γ_s`.
///
/// Location is reported as a 0-based message index.
pub fn apply_update(
    spec: &MdsCodeSpec,
    stale: &NodeShard,
    replies: &[HelperPair],
) -> Result<UpdateTranscript<usize>, MdsError> {
    spec.check_shard(stale)?;
    let s = stale.node_id;
    if replies.len() != spec.k {
        return Err(MdsError::NodeCount {
            expected: spec.k,
            got: replies.len(),
        });
    }
    let helper_ids: Vec<usize> = replies.iter().map(|r| r.helper_id).collect();
    spec.check_distinct(&helper_ids, Some(s))?;

    let zero = spec.field.zero();
    let (mut sum1, mut sum2) = (zero, zero);
    for r in replies {
        sum1 = sum1.checked_add(r.symbols.0)?;
        sum2 = sum2.checked_add(r.symbols.1)?;
    }
    let d1 = sum1 - stale.symbols[0];
    let d2 = sum2 - stale.symbols[1];

    let stale_gen = spec.node_generator(s);
    let table: Vec<(FieldElement, FieldElement)> = (0..spec.message_len)
        .map(|j| (stale_gen.get(0, j), stale_gen.get(1, j)))
        .collect();
    let mut shard = stale.clone();
    let diagnosis = match ratio::identify_change(&table, d1, d2)? {
        None => Diagnosis::NoChange,
        Some(change) => {
            let column = stale_gen.column(change.index);
            for (sym, g) in shard.symbols.iter_mut().zip(column) {
                *sym += g * change.delta;
            }
            Diagnosis::Located {
                location: change.index,
                delta: change.delta,
            }
        }
    };
    Ok(UpdateTranscript {
        stale_id: s,
        helper_ids,
        downloaded: replies.iter().flat_map(|r| [r.symbols.0, r.symbols.1]).collect(),
        diagnosis,
        shard,
    })
}

/// Both sides of the update: bundles go out, each helper answers from its own
/// shard, the stale node applies the answers.
pub fn run_update(
    spec: &MdsCodeSpec,
    stale: &NodeShard,
    helpers: &[&NodeShard],
) -> Result<UpdateTranscript<usize>, MdsError> {
    let ids: Vec<usize> = helpers.iter().map(|h| h.node_id).collect();
    let bundles = coefficient_vectors(spec, stale.node_id, &ids)?;
    let replies = helpers
        .iter()
        .zip(&bundles)
        .map(|(h, b)| {
            Ok(HelperPair {
                helper_id: h.node_id,
                symbols: helper_response(h, b)?,
            })
        })
        .collect::<Result<Vec<_>, MdsError>>()?;
    apply_update(spec, stale, &replies)
}

/// Inverts the stacked generator of exactly `k` distinct shards.
pub fn decode(spec: &MdsCodeSpec, shards: &[NodeShard]) -> Result<Vec<FieldElement>, MdsError> {
    if shards.len() != spec.k {
        return Err(MdsError::NodeCount {
            expected: spec.k,
            got: shards.len(),
        });
    }
    for sh in shards {
        spec.check_shard(sh)?;
    }
    let ids: Vec<usize> = shards.iter().map(|s| s.node_id).collect();
    spec.check_distinct(&ids, None)?;
    let data: Vec<FieldElement> = shards.iter().flat_map(|s| s.symbols.iter().copied()).collect();
    Ok(spec.stacked_generator(&ids)?.solve(&data)?)
}
