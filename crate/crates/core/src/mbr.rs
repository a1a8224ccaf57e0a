//! Product-matrix storage code whose stale nodes update by downloading one
//! symbol from each of two helpers.
//!
//! The message is laid out in `theta` symmetric `(n-1) x (n-1)` matrices
//! `M_p`, each with its bottom-right `(n-1-k) x (n-1-k)` block fixed at zero.
//! Node `l` owns a public vector `psi_l` of length `n-1` and scalars
//! `eta_{l,p}`, and stores the row vectors `psi_lᵀ M_p` for every `p`, so
//! every shard holds `A = (n-1) * theta` symbols and any `k` shards recover
//! the message.
//!
//! A helper `u` answers an update request from stale node `s` with the single
//! symbol `sum_p eta_{u,p} psi_uᵀ M'_p psi_s`. Against the stale data, a change
//! of `delta` at location `(p, i, j)` shows up as the difference
//! `eta_{u,p} * gamma(u, s, i, j) * delta`, and two helpers give a ratio that
//! names the location (see [`verify_conditions`] for what makes it unique).
//!
//! Node ids are 1-based. Matrix coordinates and message indices are 0-based.

use std::fmt;

use itertools::Itertools;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;
use thiserror::Error;

use crate::field::{self, FieldElement, FieldError, FpMatrix, MinorViolation, PrimeField};
use crate::ratio::{self, RatioError};
use crate::shard::{Diagnosis, Fingerprint, NodeShard, UpdateTranscript};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MbrError {
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
    #[error("decoding needs exactly {expected} shards, got {got}")]
    ShardCount { expected: usize, got: usize },
    #[error(transparent)]
    Ratio(#[from] RatioError),
    #[error("recovered block {matrix} is not symmetric; a shard is corrupted")]
    AsymmetricBlock { matrix: usize },
    #[error("no valid code found over F_{q} after {attempts} attempts; retry with q = {suggested_q}")]
    BudgetExhausted { attempts: u64, q: u64, suggested_q: u64 },
}

/// Position `(p, i, j)` of a message symbol: matrix `p`, upper-triangle
/// coordinates `i <= j`, never inside the zero block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolLocation {
    pub matrix: usize,
    pub row: usize,
    pub col: usize,
}

impl fmt::Display for SymbolLocation {
    /// 1-based, e.g. `(1,1,2)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.matrix + 1, self.row + 1, self.col + 1)
    }
}

fn check_shape(n: usize, k: usize, theta: usize) -> Result<(), MbrError> {
    if n < 2 || k == 0 || k > n - 1 {
        return Err(MbrError::InvalidParameters(format!("need 1 <= k <= n-1, got n={n}, k={k}")));
    }
    if theta == 0 {
        return Err(MbrError::InvalidParameters("theta must be at least 1".into()));
    }
    Ok(())
}

/// Free entries of one message matrix: `k(n-1) - k(k-1)/2`.
pub fn symbols_per_matrix(n: usize, k: usize) -> usize {
    k * (n - 1) - k * (k - 1) / 2
}

/// Canonical placement of message symbols: ascending matrix, then row-major
/// over the upper triangle, skipping the zero block.
pub fn message_locations(n: usize, k: usize, theta: usize) -> Result<Vec<SymbolLocation>, MbrError> {
    check_shape(n, k, theta)?;
    let d = n - 1;
    let mut out = Vec::with_capacity(theta * symbols_per_matrix(n, k));
    for matrix in 0..theta {
        for row in 0..d {
            for col in row..d {
                if row >= k && col >= k {
                    continue;
                }
                out.push(SymbolLocation { matrix, row, col });
            }
        }
    }
    Ok(out)
}

/// Public description of a code instance.
///
/// [`MbrCodeSpec::from_parts`] only checks shapes; specs produced by
/// [`generate`] additionally satisfy both conditions checked by
/// [`verify_conditions`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MbrCodeSpec {
    n: usize,
    k: usize,
    theta: usize,
    field: PrimeField,
    psi: Vec<Vec<FieldElement>>,
    eta: Vec<Vec<FieldElement>>,
    locations: Vec<SymbolLocation>,
    fingerprint: Fingerprint,
}

impl MbrCodeSpec {
    /// `psi[l]` is node `l+1`'s vector (length `n-1`), `eta[l]` its `theta`
    /// scalars.
    pub fn from_parts(
        n: usize,
        k: usize,
        theta: usize,
        field: PrimeField,
        psi: Vec<Vec<FieldElement>>,
        eta: Vec<Vec<FieldElement>>,
    ) -> Result<Self, MbrError> {
        let locations = message_locations(n, k, theta)?;
        if locations.len() < 2 {
            return Err(MbrError::InvalidParameters(format!(
                "message length B = {} is below 2",
                locations.len()
            )));
        }
        if psi.len() != n || psi.iter().any(|v| v.len() != n - 1) {
            return Err(MbrError::InvalidParameters(format!("psi must be {n} vectors of length {}", n - 1)));
        }
        if eta.len() != n || eta.iter().any(|v| v.len() != theta) {
            return Err(MbrError::InvalidParameters(format!("eta must be {n} rows of length {theta}")));
        }
        let q = field.modulus();
        if let Some(bad) = psi.iter().chain(&eta).flatten().find(|e| e.modulus() != q) {
            return Err(FieldError::ModulusMismatch { left: q, right: bad.modulus() }.into());
        }
        let fingerprint = Self::compute_fingerprint(n, k, theta, field, &psi, &eta);
        Ok(Self {
            n,
            k,
            theta,
            field,
            psi,
            eta,
            locations,
            fingerprint,
        })
    }

    fn compute_fingerprint(
        n: usize,
        k: usize,
        theta: usize,
        field: PrimeField,
        psi: &[Vec<FieldElement>],
        eta: &[Vec<FieldElement>],
    ) -> Fingerprint {
        let join = |rows: &[Vec<FieldElement>]| rows.iter().map(|r| r.iter().join(",")).join(";");
        let canon = format!(
            "mbr|n={n}|k={k}|theta={theta}|q={}|psi={}|eta={}",
            field.modulus(),
            join(psi),
            join(eta)
        );
        Fingerprint::of(canon.as_bytes())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn theta(&self) -> usize {
        self.theta
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }

    /// `B`, the number of message symbols.
    pub fn message_len(&self) -> usize {
        self.locations.len()
    }

    /// `A = (n-1) * theta`, the number of symbols per node.
    pub fn shard_len(&self) -> usize {
        (self.n - 1) * self.theta
    }

    pub fn locations(&self) -> &[SymbolLocation] {
        &self.locations
    }

    pub fn location_index(&self, loc: SymbolLocation) -> Option<usize> {
        self.locations.binary_search(&loc).ok()
    }

    pub fn psi(&self, node: usize) -> &[FieldElement] {
        &self.psi[node - 1]
    }

    pub fn eta(&self, node: usize, matrix: usize) -> FieldElement {
        self.eta[node - 1][matrix]
    }

    pub fn psi_vectors(&self) -> &[Vec<FieldElement>] {
        &self.psi
    }

    pub fn eta_rows(&self) -> &[Vec<FieldElement>] {
        &self.eta
    }

    /// The `(n-1) x n` matrix `[psi_1 ... psi_n]`.
    pub fn psi_matrix(&self) -> FpMatrix {
        FpMatrix::from_element_rows(self.field, &self.psi)
            .expect("shape checked at construction")
            .transpose()
    }

    fn check_node(&self, node: usize) -> Result<(), MbrError> {
        if (1..=self.n).contains(&node) {
            Ok(())
        } else {
            Err(MbrError::UnknownNode(node))
        }
    }

    fn check_shard(&self, shard: &NodeShard) -> Result<(), MbrError> {
        if shard.fingerprint != self.fingerprint {
            return Err(MbrError::FingerprintMismatch {
                expected: self.fingerprint.clone(),
                got: shard.fingerprint.clone(),
            });
        }
        self.check_node(shard.node_id)?;
        if shard.symbols.len() != self.shard_len() {
            return Err(MbrError::LengthMismatch {
                expected: self.shard_len(),
                got: shard.symbols.len(),
            });
        }
        Ok(())
    }

    fn block<'a>(&self, shard: &'a NodeShard, matrix: usize) -> &'a [FieldElement] {
        let d = self.n - 1;
        &shard.symbols[matrix * d..(matrix + 1) * d]
    }
}

/// Lays the message out in the `theta` symmetric matrices.
pub fn pack_message(spec: &MbrCodeSpec, msg: &[FieldElement]) -> Result<Vec<FpMatrix>, MbrError> {
    if msg.len() != spec.message_len() {
        return Err(MbrError::LengthMismatch {
            expected: spec.message_len(),
            got: msg.len(),
        });
    }
    let d = spec.n - 1;
    let mut mats = vec![FpMatrix::zeros(spec.field, d, d); spec.theta];
    for (loc, &v) in spec.locations.iter().zip(msg) {
        let m = &mut mats[loc.matrix];
        m.set(loc.row, loc.col, v);
        m.set(loc.col, loc.row, v);
    }
    Ok(mats)
}

/// Reads the message back out of its matrices.
pub fn unpack_message(spec: &MbrCodeSpec, mats: &[FpMatrix]) -> Result<Vec<FieldElement>, MbrError> {
    let d = spec.n - 1;
    if mats.len() != spec.theta || mats.iter().any(|m| m.shape() != (d, d)) {
        return Err(MbrError::InvalidParameters(format!("expected {} matrices of size {d}x{d}", spec.theta)));
    }
    Ok(spec
        .locations
        .iter()
        .map(|loc| mats[loc.matrix].get(loc.row, loc.col))
        .collect())
}

/// `psi_{u,i} psi_{s,j} + psi_{u,j} psi_{s,i}` off the diagonal and
/// `psi_{u,i} psi_{s,i}` on it: the coefficient with which entry `(i, j)` of a
/// message matrix enters `psi_uᵀ M psi_s`.
pub fn gamma(spec: &MbrCodeSpec, u: usize, s: usize, i: usize, j: usize) -> Result<FieldElement, MbrError> {
    spec.check_node(u)?;
    spec.check_node(s)?;
    if u == s {
        return Err(MbrError::SameNode(u));
    }
    let d = spec.n - 1;
    if i >= d || j >= d {
        return Err(MbrError::InvalidParameters(format!("coordinate ({i},{j}) outside {d}x{d}")));
    }
    Ok(gamma_unchecked(spec.psi(u), spec.psi(s), i, j))
}

fn gamma_unchecked(psi_u: &[FieldElement], psi_s: &[FieldElement], i: usize, j: usize) -> FieldElement {
    if i == j {
        psi_u[i] * psi_s[i]
    } else {
        psi_u[i] * psi_s[j] + psi_u[j] * psi_s[i]
    }
}

/// `(eta_{u1,p} gamma(u1,s,i,j), eta_{u2,p} gamma(u2,s,i,j))` for every message
/// location, in canonical order.
pub fn coefficient_table(
    spec: &MbrCodeSpec,
    u1: usize,
    u2: usize,
    s: usize,
) -> Vec<(FieldElement, FieldElement)> {
    let (pu1, pu2, ps) = (spec.psi(u1), spec.psi(u2), spec.psi(s));
    spec.locations
        .iter()
        .map(|loc| {
            (
                spec.eta(u1, loc.matrix) * gamma_unchecked(pu1, ps, loc.row, loc.col),
                spec.eta(u2, loc.matrix) * gamma_unchecked(pu2, ps, loc.row, loc.col),
            )
        })
        .collect()
}

/// A failure of the pairwise-distinct-ratio requirement for helper pair
/// `(u1, u2)` and stale node `s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RatioViolation {
    /// Both coefficients vanish at `location`: a change there is invisible.
    Vanishing {
        helpers: (usize, usize),
        stale: usize,
        location: SymbolLocation,
    },
    /// Two locations produce proportional coefficient pairs.
    Collision {
        helpers: (usize, usize),
        stale: usize,
        first: SymbolLocation,
        second: SymbolLocation,
    },
}

impl fmt::Display for RatioViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Vanishing { helpers, stale, location } => write!(
                f,
                "helpers {helpers:?}, stale {stale}: both coefficients vanish at {location}"
            ),
            Self::Collision { helpers, stale, first, second } => write!(
                f,
                "helpers {helpers:?}, stale {stale}: locations {first} and {second} share a ratio"
            ),
        }
    }
}

/// Result of checking both code conditions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConditionReport {
    /// A singular square submatrix of `[psi_1 ... psi_n]`.
    pub minor: Option<MinorViolation>,
    pub ratio: Option<RatioViolation>,
}

impl ConditionReport {
    pub fn is_ok(&self) -> bool {
        self.minor.is_none() && self.ratio.is_none()
    }
}

/// Every square submatrix of `[psi_1 ... psi_n]` must be nonsingular.
pub fn check_psi_minors(spec: &MbrCodeSpec) -> Option<MinorViolation> {
    spec.psi_matrix()
        .all_square_submatrices_nonsingular(spec.n - 1)
        .err()
}

/// For every pairwise-distinct `(u1, u2, s)` and every two distinct message
/// locations `l != l'`:
///
/// `c1(l) c2(l') != c1(l') c2(l)` with `c_t(l) = eta_{u_t,p} gamma(u_t, s, i, j)`.
///
/// Locations where both coefficients vanish are looked for first, over all
/// triples, and reported as such.
/// Swapping `u1` and `u2` yields the same set of inequalities, so only
/// `u1 < u2` is enumerated.
pub fn check_ratio_condition(spec: &MbrCodeSpec) -> Option<RatioViolation> {
    let triples: Vec<(usize, usize, usize)> = (1..=spec.n)
        .flat_map(|s| {
            (1..=spec.n)
                .filter(move |&u| u != s)
                .tuple_combinations()
                .map(move |(u1, u2)| (u1, u2, s))
        })
        .collect();
    for &(u1, u2, s) in &triples {
        let table = coefficient_table(spec, u1, u2, s);
        if let Some(t) = table.iter().position(|(a, b)| a.is_zero() && b.is_zero()) {
            return Some(RatioViolation::Vanishing {
                helpers: (u1, u2),
                stale: s,
                location: spec.locations[t],
            });
        }
    }
    for &(u1, u2, s) in &triples {
        let table = coefficient_table(spec, u1, u2, s);
        for (x, y) in (0..table.len()).tuple_combinations() {
            let (a1, a2) = table[x];
            let (b1, b2) = table[y];
            if a1 * b2 == b1 * a2 {
                return Some(RatioViolation::Collision {
                    helpers: (u1, u2),
                    stale: s,
                    first: spec.locations[x],
                    second: spec.locations[y],
                });
            }
        }
    }
    None
}

pub fn verify_conditions(spec: &MbrCodeSpec) -> ConditionReport {
    ConditionReport {
        minor: check_psi_minors(spec),
        ratio: check_ratio_condition(spec),
    }
}

/// Draws `psi` and `eta` uniformly from `F_q` with a SplitMix64 stream seeded
/// by `seed` until both conditions hold, trying at most `budget` draws.
pub fn generate(
    n: usize,
    k: usize,
    theta: usize,
    q: u64,
    seed: u64,
    budget: u64,
) -> Result<MbrCodeSpec, MbrError> {
    check_shape(n, k, theta)?;
    if budget == 0 {
        return Err(MbrError::InvalidParameters("budget must be at least 1".into()));
    }
    let field = PrimeField::new(q)?;
    let mut rng = SplitMix64::seed_from_u64(seed);
    for _ in 0..budget {
        let psi = (0..n).map(|_| field.random_vector(&mut rng, n - 1)).collect();
        let eta = (0..n).map(|_| field.random_vector(&mut rng, theta)).collect();
        let spec = MbrCodeSpec::from_parts(n, k, theta, field, psi, eta)?;
        if check_psi_minors(&spec).is_none() && check_ratio_condition(&spec).is_none() {
            return Ok(spec);
        }
    }
    Err(MbrError::BudgetExhausted {
        attempts: budget,
        q,
        suggested_q: field::next_prime(q + 1),
    })
}

/// Runs [`generate`] over growing primes: `q_start`, then the next prime above
/// twice the previous one, up to `max_primes` fields.
pub fn generate_searching_q(
    n: usize,
    k: usize,
    theta: usize,
    q_start: u64,
    seed: u64,
    budget_per_prime: u64,
    max_primes: usize,
) -> Result<MbrCodeSpec, MbrError> {
    let mut q = field::next_prime(q_start);
    let mut last = None;
    for _ in 0..max_primes {
        match generate(n, k, theta, q, seed, budget_per_prime) {
            Ok(spec) => return Ok(spec),
            Err(e @ MbrError::BudgetExhausted { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
        q = field::next_prime(2 * q + 1);
    }
    Err(last.unwrap_or_else(|| MbrError::InvalidParameters("max_primes must be at least 1".into())))
}

fn node_shard(spec: &MbrCodeSpec, mats: &[FpMatrix], node: usize) -> Result<NodeShard, MbrError> {
    let mut symbols = Vec::with_capacity(spec.shard_len());
    for m in mats {
        symbols.extend(m.vec_mul(spec.psi(node))?);
    }
    Ok(NodeShard {
        node_id: node,
        symbols,
        fingerprint: spec.fingerprint.clone(),
    })
}

/// Node `l` stores `psi_lᵀ M_p` for `p = 1..theta`, concatenated.
pub fn encode(spec: &MbrCodeSpec, msg: &[FieldElement]) -> Result<Vec<NodeShard>, MbrError> {
    let mats = pack_message(spec, msg)?;
    (1..=spec.n).map(|node| node_shard(spec, &mats, node)).collect()
}

/// Encoding of a single node; what a helper-side rewrite would store.
pub fn encode_node(spec: &MbrCodeSpec, msg: &[FieldElement], node: usize) -> Result<NodeShard, MbrError> {
    spec.check_node(node)?;
    node_shard(spec, &pack_message(spec, msg)?, node)
}

/// `sum_p eta_{u,p} <block_p, psi_s>`, computed by helper `u` from its own
/// shard and the public code only.
pub fn helper_response(spec: &MbrCodeSpec, helper: &NodeShard, stale_id: usize) -> Result<FieldElement, MbrError> {
    spec.check_shard(helper)?;
    spec.check_node(stale_id)?;
    if helper.node_id == stale_id {
        return Err(MbrError::SameNode(stale_id));
    }
    weighted_projection(spec, helper, helper.node_id, stale_id)
}

/// `sum_p eta_{weight_node,p} <block_p(shard), psi_target>`
fn weighted_projection(
    spec: &MbrCodeSpec,
    shard: &NodeShard,
    weight_node: usize,
    target: usize,
) -> Result<FieldElement, MbrError> {
    let mut acc = spec.field.zero();
    for p in 0..spec.theta {
        acc += spec.eta(weight_node, p) * field::dot(spec.block(shard, p), spec.psi(target))?;
    }
    Ok(acc)
}

/// The one symbol a helper returns, tagged with who sent it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HelperSymbol {
    pub helper_id: usize,
    pub symbol: FieldElement,
}

/// Stale-node side of the update: compares the two helper symbols with the
/// same projections of its own stale data, locates the changed symbol from
/// the ratio of the differences and patches the affected block.
///
/// The result matches the encoding of the updated message whenever at most
/// one message symbol changed. Larger changes either fail to match any ratio
/// or are patched incorrectly; the caller cannot tell the latter apart.
pub fn apply_update(
    spec: &MbrCodeSpec,
    stale: &NodeShard,
    first: HelperSymbol,
    second: HelperSymbol,
) -> Result<UpdateTranscript<SymbolLocation>, MbrError> {
    spec.check_shard(stale)?;
    let s = stale.node_id;
    let (u1, u2) = (first.helper_id, second.helper_id);
    for u in [u1, u2] {
        spec.check_node(u)?;
        if u == s {
            return Err(MbrError::SameNode(u));
        }
    }
    if u1 == u2 {
        return Err(MbrError::DuplicateNode(u1));
    }
    // psi_sᵀ M_p psi_u = psi_uᵀ M_p psi_s by symmetry of M_p
    let r1 = weighted_projection(spec, stale, u1, u1)?;
    let r2 = weighted_projection(spec, stale, u2, u2)?;
    let d1 = first.symbol.checked_sub(r1)?;
    let d2 = second.symbol.checked_sub(r2)?;

    let table = coefficient_table(spec, u1, u2, s);
    let mut shard = stale.clone();
    let diagnosis = match ratio::identify_change(&table, d1, d2)? {
        None => Diagnosis::NoChange,
        Some(change) => {
            let loc = spec.locations[change.index];
            let delta = change.delta;
            // psi_sᵀ Δ, with Δ holding delta at (i, j) and (j, i)
            let base = loc.matrix * (spec.n - 1);
            let psi_s = spec.psi(s);
            shard.symbols[base + loc.col] += psi_s[loc.row] * delta;
            if loc.row != loc.col {
                shard.symbols[base + loc.row] += psi_s[loc.col] * delta;
            }
            Diagnosis::Located { location: loc, delta }
        }
    };
    Ok(UpdateTranscript {
        stale_id: s,
        helper_ids: vec![u1, u2],
        downloaded: vec![first.symbol, second.symbol],
        diagnosis,
        shard,
    })
}

/// Both sides of the update in one call: each helper answers from its own
/// shard, then the stale node applies the answers.
pub fn run_update(
    spec: &MbrCodeSpec,
    stale: &NodeShard,
    helper1: &NodeShard,
    helper2: &NodeShard,
) -> Result<UpdateTranscript<SymbolLocation>, MbrError> {
    let first = HelperSymbol {
        helper_id: helper1.node_id,
        symbol: helper_response(spec, helper1, stale.node_id)?,
    };
    let second = HelperSymbol {
        helper_id: helper2.node_id,
        symbol: helper_response(spec, helper2, stale.node_id)?,
    };
    apply_update(spec, stale, first, second)
}

/// Recovers the message from exactly `k` shards of distinct nodes.
///
/// Writing `M_p = [[S, T], [Tᵀ, 0]]` and splitting the stacked node vectors
/// into `[Phi | Delta]` (first `k` coordinates and the rest), the shards hold
/// `[Phi S + Delta Tᵀ | Phi T]`. `Phi` is a `k x k` minor of the psi matrix and
/// hence invertible, which yields `T` and then `S`.
pub fn decode(spec: &MbrCodeSpec, shards: &[NodeShard]) -> Result<Vec<FieldElement>, MbrError> {
    let k = spec.k;
    if shards.len() != k {
        return Err(MbrError::ShardCount { expected: k, got: shards.len() });
    }
    for (x, sh) in shards.iter().enumerate() {
        spec.check_shard(sh)?;
        if shards[..x].iter().any(|o| o.node_id == sh.node_id) {
            return Err(MbrError::DuplicateNode(sh.node_id));
        }
    }
    let d = spec.n - 1;
    let field = spec.field;
    let psi_rows: Vec<Vec<FieldElement>> = shards.iter().map(|sh| spec.psi(sh.node_id).to_vec()).collect();
    let psi = FpMatrix::from_element_rows(field, &psi_rows)?;
    let head: Vec<usize> = (0..k).collect();
    let tail: Vec<usize> = (k..d).collect();
    let phi_inv = psi.select_cols(&head).inverse()?;

    let mut mats = Vec::with_capacity(spec.theta);
    for p in 0..spec.theta {
        let rows: Vec<Vec<FieldElement>> = shards.iter().map(|sh| spec.block(sh, p).to_vec()).collect();
        let data = FpMatrix::from_element_rows(field, &rows)?;
        let (s_block, t_block) = if tail.is_empty() {
            (phi_inv.mul(&data)?, None)
        } else {
            let t = phi_inv.mul(&data.select_cols(&tail))?;
            let correction = psi.select_cols(&tail).mul(&t.transpose())?;
            let s = phi_inv.mul(&data.select_cols(&head).sub(&correction)?)?;
            (s, Some(t))
        };
        if !s_block.is_symmetric() {
            return Err(MbrError::AsymmetricBlock { matrix: p });
        }
        let mut m = FpMatrix::zeros(field, d, d);
        for i in 0..k {
            for j in 0..k {
                m.set(i, j, s_block.get(i, j));
            }
        }
        if let Some(t) = t_block {
            for i in 0..k {
                for (c, &j) in tail.iter().enumerate() {
                    m.set(i, j, t.get(i, c));
                    m.set(j, i, t.get(i, c));
                }
            }
        }
        mats.push(m);
    }
    unpack_message(spec, &mats)
}
