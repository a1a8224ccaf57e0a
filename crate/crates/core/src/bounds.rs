//! Constructive replays of the two download lower bounds.
//!
//! Each witness finder takes a download function `f` that is too small (fewer
//! than `q^2` distinct outputs) and returns a concrete pair of update
//! scenarios that the stale node cannot tell apart even though they require
//! different post-update shards. Every returned witness re-checks its evidence
//! from scratch, independently of how it was found.
//!
//! These are desk-scale proof replays: inputs are capped by
//! [`MAX_PROBES`], [`MAX_SHARD_LEN`] and [`MAX_MESSAGE_LEN`].

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::field::{hamming_distance, sub_vectors, add_vectors, FieldElement, FieldError, FpMatrix, PrimeField};
use crate::mds::{MdsCodeSpec, MdsError};

/// Largest probe set that will be enumerated (`q^2` or `q^A`).
pub const MAX_PROBES: usize = 1 << 12;
/// Largest stale shard length `A`.
pub const MAX_SHARD_LEN: usize = 3;
/// Largest message length `B`.
pub const MAX_MESSAGE_LEN: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundsError {
    #[error("download function has {range_size} distinct outputs; a witness is only guaranteed below q^2 = {limit}")]
    RangeTooLarge { range_size: usize, limit: usize },
    #[error("stale generator has rank {rank} but {rows} rows")]
    RankDeficient { rank: usize, rows: usize },
    #[error("stale node must store at least 2 symbols, got A = {0}")]
    ShardTooShort(usize),
    #[error("outside enumeration caps: {0}")]
    TooLarge(String),
    #[error("download function is undefined on probe {0:?}")]
    Undefined(Vec<u32>),
    #[error("probe {0:?} appears twice in the download table")]
    DuplicateProbe(Vec<u32>),
    #[error("invalid download function: {0}")]
    InvalidTable(String),
    #[error("invalid helper set: {0}")]
    Helpers(String),
    #[error("messages differ in {0} places; at most one symbol may change")]
    NotSingleUpdate(usize),
    #[error("no colliding probe pair found")]
    NoCollision,
    #[error("witness evidence failed: {0}")]
    Evidence(&'static str),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Mds(#[from] MdsError),
}

/// A finite download function: an explicit table from messages to opaque
/// output labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DownloadFunction {
    table: HashMap<Vec<FieldElement>, u64>,
    range_size: usize,
}

impl DownloadFunction {
    pub fn from_table<I>(entries: I) -> Result<Self, BoundsError>
    where
        I: IntoIterator<Item = (Vec<FieldElement>, u64)>,
    {
        let mut table = HashMap::new();
        for (msg, label) in entries {
            let key = crate::field::values(&msg);
            if table.insert(msg, label).is_some() {
                return Err(BoundsError::DuplicateProbe(key));
            }
        }
        let mut labels: Vec<u64> = table.values().copied().collect();
        labels.sort_unstable();
        labels.dedup();
        Ok(Self {
            range_size: labels.len(),
            table,
        })
    }

    /// Tabulates `f` on `probes`.
    pub fn from_fn(probes: &[Vec<FieldElement>], f: impl Fn(&[FieldElement]) -> u64) -> Result<Self, BoundsError> {
        Self::from_table(probes.iter().map(|m| (m.clone(), f(m))))
    }

    /// Every probe gets the same output.
    pub fn constant(probes: &[Vec<FieldElement>]) -> Result<Self, BoundsError> {
        Self::from_fn(probes, |_| 0)
    }

    /// Outputs only the symbol at `index`.
    pub fn coordinate(probes: &[Vec<FieldElement>], index: usize) -> Result<Self, BoundsError> {
        Self::from_fn(probes, |m| u64::from(m[index].value()))
    }

    /// Random table over `probes` using exactly `range_size` distinct labels.
    pub fn random<R: Rng + ?Sized>(
        probes: &[Vec<FieldElement>],
        range_size: usize,
        rng: &mut R,
    ) -> Result<Self, BoundsError> {
        if range_size == 0 || range_size > probes.len() {
            return Err(BoundsError::InvalidTable(format!(
                "cannot use {range_size} labels on {} probes",
                probes.len()
            )));
        }
        let r = range_size as u64;
        let mut labels: Vec<u64> = (0..r).chain((range_size..probes.len()).map(|_| rng.gen_range(0..r))).collect();
        labels.shuffle(rng);
        Self::from_table(probes.iter().cloned().zip(labels))
    }

    pub fn label(&self, msg: &[FieldElement]) -> Option<u64> {
        self.table.get(msg).copied()
    }

    /// Number of distinct outputs.
    pub fn range_size(&self) -> usize {
        self.range_size
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    fn label_of(&self, msg: &[FieldElement]) -> Result<u64, BoundsError> {
        self.label(msg)
            .ok_or_else(|| BoundsError::Undefined(crate::field::values(msg)))
    }
}

/// Two candidate updated messages `m_a`, `m_b` with a common stale message
/// `m_c` one symbol away from each, such that one helper's output and the
/// stale shard coincide while the required updated shards differ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessPair {
    m_a: Vec<FieldElement>,
    m_b: Vec<FieldElement>,
    m_c: Vec<FieldElement>,
}

impl WitnessPair {
    /// Checks every evidence clause and wraps the messages on success.
    pub fn validate(
        g_s: &FpMatrix,
        f: &DownloadFunction,
        m_a: Vec<FieldElement>,
        m_b: Vec<FieldElement>,
        m_c: Vec<FieldElement>,
    ) -> Result<Self, BoundsError> {
        if f.label_of(&m_a)? != f.label_of(&m_b)? {
            return Err(BoundsError::Evidence("helper outputs differ"));
        }
        if hamming_distance(&m_c, &m_a) > 1 || hamming_distance(&m_c, &m_b) > 1 {
            return Err(BoundsError::Evidence("stale message is not one symbol from both updates"));
        }
        if g_s.mul_vec(&m_a)? == g_s.mul_vec(&m_b)? {
            return Err(BoundsError::Evidence("updated stale shards coincide"));
        }
        Ok(Self { m_a, m_b, m_c })
    }

    pub fn m_a(&self) -> &[FieldElement] {
        &self.m_a
    }

    pub fn m_b(&self) -> &[FieldElement] {
        &self.m_b
    }

    /// The shared stale message.
    pub fn m_c(&self) -> &[FieldElement] {
        &self.m_c
    }
}

/// A common neighbour of `m_a` and `m_b` (at Hamming distance at most 2): `m_a`
/// with `m_b`'s value at the first coordinate where they differ.
fn midpoint(m_a: &[FieldElement], m_b: &[FieldElement]) -> Vec<FieldElement> {
    let mut m_c = m_a.to_vec();
    if hamming_distance(m_a, m_b) > 1 {
        let first = (0..m_a.len()).find(|&i| m_a[i] != m_b[i]).expect("distance > 1");
        m_c[first] = m_b[first];
    }
    m_c
}

fn check_caps(field: PrimeField, shard_len: usize, message_len: usize, probes: usize) -> Result<(), BoundsError> {
    if shard_len < 2 {
        return Err(BoundsError::ShardTooShort(shard_len));
    }
    if shard_len > MAX_SHARD_LEN || message_len > MAX_MESSAGE_LEN {
        return Err(BoundsError::TooLarge(format!(
            "A = {shard_len}, B = {message_len}; caps are A <= {MAX_SHARD_LEN}, B <= {MAX_MESSAGE_LEN}"
        )));
    }
    if probes > MAX_PROBES {
        return Err(BoundsError::TooLarge(format!(
            "{probes} probes over {field}; cap is {MAX_PROBES}"
        )));
    }
    Ok(())
}

fn check_range(field: PrimeField, f: &DownloadFunction) -> Result<(), BoundsError> {
    let q = field.modulus() as usize;
    if f.range_size() >= q * q {
        return Err(BoundsError::RangeTooLarge {
            range_size: f.range_size(),
            limit: q * q,
        });
    }
    Ok(())
}

/// Every message supported on `coords`, zero elsewhere. The first coordinate
/// varies fastest.
fn supported_messages(field: PrimeField, len: usize, coords: &[usize]) -> Vec<Vec<FieldElement>> {
    let q = field.modulus() as usize;
    let total = q.pow(coords.len() as u32);
    (0..total)
        .map(|mut code| {
            let mut m = field.zeros(len);
            for &c in coords {
                m[c] = field.element((code % q) as u64);
                code /= q;
            }
            m
        })
        .collect()
}

fn full_row_rank_pivots(g_s: &FpMatrix) -> Result<Vec<usize>, BoundsError> {
    let pivots = g_s.pivot_columns();
    if pivots.len() != g_s.rows() {
        return Err(BoundsError::RankDeficient {
            rank: pivots.len(),
            rows: g_s.rows(),
        });
    }
    Ok(pivots)
}

/// The `q^2` messages that are free on the first two pivot coordinates of the
/// stale generator `g_s` (`A x B`, full row rank) and zero elsewhere.
pub fn thm1_probe_set(g_s: &FpMatrix) -> Result<Vec<Vec<FieldElement>>, BoundsError> {
    let field = g_s.field();
    let q = field.modulus() as usize;
    check_caps(field, g_s.rows(), g_s.cols(), q * q)?;
    let pivots = full_row_rank_pivots(g_s)?;
    Ok(supported_messages(field, g_s.cols(), &pivots[..2]))
}

/// Finds two probe messages with the same output under `f`, distinct stale
/// encodings and Hamming distance at most 2, plus their common neighbour.
pub fn thm1_witness(g_s: &FpMatrix, f: &DownloadFunction) -> Result<WitnessPair, BoundsError> {
    let probes = thm1_probe_set(g_s)?;
    check_range(g_s.field(), f)?;
    let mut seen: HashMap<u64, usize> = HashMap::new();
    for (idx, m) in probes.iter().enumerate() {
        let label = f.label_of(m)?;
        match seen.get(&label) {
            Some(&prev) if g_s.mul_vec(&probes[prev])? != g_s.mul_vec(m)? => {
                let (m_a, m_b) = (probes[prev].clone(), m.clone());
                let m_c = midpoint(&m_a, &m_b);
                return WitnessPair::validate(g_s, f, m_a, m_b, m_c);
            }
            Some(_) => {}
            None => {
                seen.insert(label, idx);
            }
        }
    }
    Err(BoundsError::NoCollision)
}

fn check_helpers(spec: &MdsCodeSpec, stale: usize, helpers: &[usize], expected: usize) -> Result<(), BoundsError> {
    let n = spec.n();
    if !(1..=n).contains(&stale) {
        return Err(BoundsError::Helpers(format!("stale node {stale} does not exist")));
    }
    if helpers.len() != expected {
        return Err(BoundsError::Helpers(format!("need {expected} helpers, got {}", helpers.len())));
    }
    for (x, &u) in helpers.iter().enumerate() {
        if !(1..=n).contains(&u) || u == stale || helpers[..x].contains(&u) {
            return Err(BoundsError::Helpers(format!("helper {u} is unknown, repeated or the stale node")));
        }
    }
    Ok(())
}

/// `[Γ_{h_1}; ...; Γ_{h_{k-1}}; Γ_s]`, a nonsingular `B x B` matrix for an MDS
/// code.
fn genie_system(spec: &MdsCodeSpec, stale: usize, genies: &[usize]) -> Result<FpMatrix, BoundsError> {
    let mut nodes = genies.to_vec();
    nodes.push(stale);
    Ok(spec.stacked_generator(&nodes)?)
}

/// The unique message whose encoding agrees with `updated_msg` on the `k-1`
/// `helpers` and with `stale_msg` on node `stale`.
///
/// Treating it as an unmodified stale message gives the stale node exactly
/// the same view as the real update, so `k-1` helpers can never suffice.
pub fn mds_phantom_message(
    spec: &MdsCodeSpec,
    stale: usize,
    helpers: &[usize],
    stale_msg: &[FieldElement],
    updated_msg: &[FieldElement],
) -> Result<Vec<FieldElement>, BoundsError> {
    check_helpers(spec, stale, helpers, spec.k() - 1)?;
    let b = spec.message_len();
    if stale_msg.len() != b || updated_msg.len() != b {
        return Err(MdsError::LengthMismatch {
            expected: b,
            got: if stale_msg.len() != b { stale_msg.len() } else { updated_msg.len() },
        }
        .into());
    }
    let d = hamming_distance(stale_msg, updated_msg);
    if d > 1 {
        return Err(BoundsError::NotSingleUpdate(d));
    }
    let mut rhs = Vec::with_capacity(b);
    for &h in helpers {
        rhs.extend(spec.node_generator(h).mul_vec(updated_msg)?);
    }
    rhs.extend(spec.node_generator(stale).mul_vec(stale_msg)?);
    Ok(genie_system(spec, stale, helpers)?.solve(&rhs)?)
}

/// A probe `m'` on the stale generator's pivot coordinates and its transform
/// `m''`: same stale encoding, zero encoding on the genie helpers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformedProbe {
    pub primed: Vec<FieldElement>,
    pub transformed: Vec<FieldElement>,
}

/// Enumerates all `q^A` probes and their transforms, with the `k-1` `genies`
/// being the helpers whose whole shards are handed to the stale node.
pub fn thm4_probe_set(spec: &MdsCodeSpec, stale: usize, genies: &[usize]) -> Result<Vec<TransformedProbe>, BoundsError> {
    check_helpers(spec, stale, genies, spec.k() - 1)?;
    let field = spec.field();
    let a = spec.shard_len();
    let total = (field.modulus() as usize).checked_pow(a as u32).unwrap_or(usize::MAX);
    check_caps(field, a, spec.message_len(), total)?;
    let g_s = spec.node_generator(stale);
    let pivots = full_row_rank_pivots(&g_s)?;
    let inverse = genie_system(spec, stale, genies)?.inverse()?;
    let zeros = field.zeros(a * genies.len());
    supported_messages(field, spec.message_len(), &pivots)
        .into_iter()
        .map(|primed| {
            let mut rhs = zeros.clone();
            rhs.extend(g_s.mul_vec(&primed)?);
            let transformed = inverse.mul_vec(&rhs)?;
            Ok(TransformedProbe { primed, transformed })
        })
        .collect()
}

/// A stale message and the message it was updated to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateScenario {
    pub stale_msg: Vec<FieldElement>,
    pub updated_msg: Vec<FieldElement>,
}

/// Two single-symbol updates that look identical to stale node `stale` (its
/// own shard, the genie shards and the last helper's output) but demand
/// different updated shards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioWitness {
    stale: usize,
    helpers: Vec<usize>,
    first: UpdateScenario,
    second: UpdateScenario,
}

impl ScenarioWitness {
    /// Checks every evidence clause. `helpers` lists the `k-1` genie helpers
    /// followed by the helper that answers with `f`.
    pub fn validate(
        spec: &MdsCodeSpec,
        stale: usize,
        helpers: &[usize],
        f: &DownloadFunction,
        first: UpdateScenario,
        second: UpdateScenario,
    ) -> Result<Self, BoundsError> {
        check_helpers(spec, stale, helpers, spec.k())?;
        let genies = &helpers[..helpers.len() - 1];
        for sc in [&first, &second] {
            let d = hamming_distance(&sc.stale_msg, &sc.updated_msg);
            if d > 1 {
                return Err(BoundsError::NotSingleUpdate(d));
            }
        }
        let g_s = spec.node_generator(stale);
        if g_s.mul_vec(&first.stale_msg)? != g_s.mul_vec(&second.stale_msg)? {
            return Err(BoundsError::Evidence("stale shards differ"));
        }
        for &h in genies {
            let g_h = spec.node_generator(h);
            if g_h.mul_vec(&first.updated_msg)? != g_h.mul_vec(&second.updated_msg)? {
                return Err(BoundsError::Evidence("genie helper shards differ"));
            }
        }
        if f.label_of(&first.updated_msg)? != f.label_of(&second.updated_msg)? {
            return Err(BoundsError::Evidence("last helper outputs differ"));
        }
        if g_s.mul_vec(&first.updated_msg)? == g_s.mul_vec(&second.updated_msg)? {
            return Err(BoundsError::Evidence("updated stale shards coincide"));
        }
        Ok(Self {
            stale,
            helpers: helpers.to_vec(),
            first,
            second,
        })
    }

    pub fn stale(&self) -> usize {
        self.stale
    }

    pub fn helpers(&self) -> &[usize] {
        &self.helpers
    }

    pub fn first(&self) -> &UpdateScenario {
        &self.first
    }

    pub fn second(&self) -> &UpdateScenario {
        &self.second
    }
}

/// Replays the per-helper bound: given `k` helpers where the last answers
/// with `f` (defined on the transformed probes), finds two indistinguishable
/// single-symbol updates.
pub fn thm4_witness(
    spec: &MdsCodeSpec,
    stale: usize,
    helpers: &[usize],
    f: &DownloadFunction,
) -> Result<ScenarioWitness, BoundsError> {
    check_helpers(spec, stale, helpers, spec.k())?;
    let genies = &helpers[..helpers.len() - 1];
    let probes = thm4_probe_set(spec, stale, genies)?;
    check_range(spec.field(), f)?;

    let a = spec.shard_len();
    let q = spec.field().modulus() as usize;
    let threshold = q.pow(a as u32 - 2);
    let mut classes: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (idx, p) in probes.iter().enumerate() {
        classes.entry(f.label_of(&p.transformed)?).or_default().push(idx);
    }
    let class = classes
        .values()
        .find(|c| c.len() > threshold)
        .ok_or(BoundsError::NoCollision)?;

    let pivots = full_row_rank_pivots(&spec.node_generator(stale))?;
    let prefix = &pivots[..a - 2];
    let mut by_prefix: HashMap<Vec<FieldElement>, usize> = HashMap::new();
    for &idx in class {
        let key: Vec<FieldElement> = prefix.iter().map(|&c| probes[idx].primed[c]).collect();
        if let Some(&prev) = by_prefix.get(&key) {
            let (pa, pb) = (&probes[prev], &probes[idx]);
            let m_c = midpoint(&pa.primed, &pb.primed);
            let scenario = |p: &TransformedProbe| UpdateScenario {
                stale_msg: add_vectors(&sub_vectors(&p.transformed, &p.primed), &m_c),
                updated_msg: p.transformed.clone(),
            };
            return ScenarioWitness::validate(spec, stale, helpers, f, scenario(pa), scenario(pb));
        }
        by_prefix.insert(key, idx);
    }
    Err(BoundsError::NoCollision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mds;
    use rand::SeedableRng;
    use rand_xoshiro::SplitMix64;

    fn random_full_rank(field: PrimeField, rows: usize, cols: usize, rng: &mut SplitMix64) -> FpMatrix {
        loop {
            let g = FpMatrix::random(field, rows, cols, rng);
            if g.rank() == rows {
                return g;
            }
        }
    }

    #[test]
    fn constant_function_over_f2_identity() {
        let f2 = PrimeField::new(2).unwrap();
        let g = FpMatrix::identity(f2, 2);
        let probes = thm1_probe_set(&g).unwrap();
        assert_eq!(probes.len(), 4);
        let f = DownloadFunction::constant(&probes).unwrap();
        let w = thm1_witness(&g, &f).unwrap();
        assert_eq!(w.m_a(), f2.vector(&[0, 0]).as_slice());
        assert_eq!(w.m_b(), f2.vector(&[1, 0]).as_slice());
        assert_eq!(w.m_c(), f2.vector(&[0, 0]).as_slice());
    }

    #[test]
    fn probes_follow_pivots_not_leading_columns() {
        let f3 = PrimeField::new(3).unwrap();
        // column 0 is zero, so pivots are columns 1 and 2
        let g = FpMatrix::from_rows(f3, &[[0, 1, 0], [0, 0, 1]]).unwrap();
        let probes = thm1_probe_set(&g).unwrap();
        assert_eq!(probes.len(), 9);
        assert!(probes.iter().all(|m| m[0].is_zero()));
        let encodings: std::collections::HashSet<_> = probes.iter().map(|m| g.mul_vec(m).unwrap()).collect();
        assert_eq!(encodings.len(), 9);
    }

    #[test]
    fn random_tables_below_q_squared_always_yield_witnesses() {
        let mut rng = SplitMix64::seed_from_u64(7);
        for q in [2u64, 3] {
            let field = PrimeField::new(q).unwrap();
            for _ in 0..10 {
                let g = random_full_rank(field, 2, 3, &mut rng);
                let probes = thm1_probe_set(&g).unwrap();
                let f = DownloadFunction::random(&probes, (q * q - 1) as usize, &mut rng).unwrap();
                assert_eq!(f.range_size(), (q * q - 1) as usize);
                let w = thm1_witness(&g, &f).unwrap();
                assert!(hamming_distance(w.m_a(), w.m_b()) <= 2);
            }
        }
    }

    #[test]
    fn coordinate_function_is_defeated() {
        let f5 = PrimeField::new(5).unwrap();
        let g = FpMatrix::from_rows(f5, &[[1, 2, 3], [0, 1, 4]]).unwrap();
        let probes = thm1_probe_set(&g).unwrap();
        let f = DownloadFunction::coordinate(&probes, 0).unwrap();
        assert_eq!(f.range_size(), 5);
        let w = thm1_witness(&g, &f).unwrap();
        assert_eq!(w.m_a()[0], w.m_b()[0]);
    }

    #[test]
    fn large_range_and_bad_generators_are_rejected() {
        let f3 = PrimeField::new(3).unwrap();
        let g = FpMatrix::identity(f3, 2);
        let probes = thm1_probe_set(&g).unwrap();
        let injective = DownloadFunction::from_fn(&probes, |m| u64::from(m[0].value() * 3 + m[1].value())).unwrap();
        assert_eq!(
            thm1_witness(&g, &injective),
            Err(BoundsError::RangeTooLarge { range_size: 9, limit: 9 })
        );
        let singular = FpMatrix::from_rows(f3, &[[1, 1, 1], [2, 2, 2]]).unwrap();
        assert_eq!(thm1_probe_set(&singular), Err(BoundsError::RankDeficient { rank: 1, rows: 2 }));
        let single = FpMatrix::from_rows(f3, &[[1, 1, 1]]).unwrap();
        assert_eq!(thm1_probe_set(&single), Err(BoundsError::ShardTooShort(1)));
        let wide = FpMatrix::identity(f3, 4);
        assert!(matches!(thm1_probe_set(&wide), Err(BoundsError::TooLarge(_))));
    }

    #[test]
    fn evidence_is_rechecked() {
        let f3 = PrimeField::new(3).unwrap();
        let g = FpMatrix::identity(f3, 2);
        let probes = thm1_probe_set(&g).unwrap();
        let f = DownloadFunction::constant(&probes).unwrap();
        let (a, b) = (f3.vector(&[1, 0]), f3.vector(&[0, 1]));
        // stale message two symbols away from b
        assert_eq!(
            WitnessPair::validate(&g, &f, a.clone(), b.clone(), f3.vector(&[1, 2])),
            Err(BoundsError::Evidence("stale message is not one symbol from both updates"))
        );
        assert!(WitnessPair::validate(&g, &f, a.clone(), a.clone(), a.clone()).is_err());
        assert!(WitnessPair::validate(&g, &f, a, b, f3.vector(&[1, 1])).is_ok());
    }

    #[test]
    fn random_table_rejects_impossible_ranges() {
        let f2 = PrimeField::new(2).unwrap();
        let probes = thm1_probe_set(&FpMatrix::identity(f2, 2)).unwrap();
        let mut rng = SplitMix64::seed_from_u64(1);
        assert!(DownloadFunction::random(&probes, 5, &mut rng).is_err());
        assert!(DownloadFunction::random(&probes, 0, &mut rng).is_err());
        let dup = vec![probes[0].clone(), probes[0].clone()];
        assert!(matches!(DownloadFunction::constant(&dup), Err(BoundsError::DuplicateProbe(_))));
    }

    fn spec_4_2_4() -> MdsCodeSpec {
        mds::generate(4, 2, 4, Some(13)).unwrap()
    }

    #[test]
    fn phantom_of_unchanged_message_is_itself() {
        let spec = spec_4_2_4();
        let mut rng = SplitMix64::seed_from_u64(3);
        let m = spec.field().random_vector(&mut rng, 4);
        assert_eq!(mds_phantom_message(&spec, 4, &[1], &m, &m).unwrap(), m);
    }

    #[test]
    fn phantom_matches_stale_and_helper_data() {
        let spec = spec_4_2_4();
        let f = spec.field();
        let mut rng = SplitMix64::seed_from_u64(4);
        for _ in 0..20 {
            let stale_msg = f.random_vector(&mut rng, 4);
            let mut updated = stale_msg.clone();
            updated[rng.gen_range(0..4)] += f.element(rng.gen_range(1..13));
            let phantom = mds_phantom_message(&spec, 4, &[1], &stale_msg, &updated).unwrap();
            let g1 = spec.node_generator(1);
            let g4 = spec.node_generator(4);
            assert_eq!(g1.mul_vec(&phantom).unwrap(), g1.mul_vec(&updated).unwrap());
            assert_eq!(g4.mul_vec(&phantom).unwrap(), g4.mul_vec(&stale_msg).unwrap());
            // every column of a Cauchy block is nonzero, so the change is visible
            assert_ne!(phantom, updated);
            // unique: any unit perturbation breaks one of the defining equations
            for i in 0..4 {
                let mut p = phantom.clone();
                p[i] += f.one();
                assert!(
                    g1.mul_vec(&p).unwrap() != g1.mul_vec(&updated).unwrap()
                        || g4.mul_vec(&p).unwrap() != g4.mul_vec(&stale_msg).unwrap()
                );
            }
        }
    }

    #[test]
    fn phantom_argument_errors() {
        let spec = spec_4_2_4();
        let f = spec.field();
        let m = f.zeros(4);
        assert!(matches!(mds_phantom_message(&spec, 4, &[], &m, &m), Err(BoundsError::Helpers(_))));
        assert!(matches!(mds_phantom_message(&spec, 4, &[4], &m, &m), Err(BoundsError::Helpers(_))));
        let far = f.vector(&[1, 1, 0, 0]);
        assert_eq!(mds_phantom_message(&spec, 4, &[1], &m, &far), Err(BoundsError::NotSingleUpdate(2)));
    }

    #[test]
    fn transformed_probes_are_consistent() {
        let spec = spec_4_2_4();
        let probes = thm4_probe_set(&spec, 3, &[2]).unwrap();
        assert_eq!(probes.len(), 169);
        let g2 = spec.node_generator(2);
        let g3 = spec.node_generator(3);
        for p in &probes {
            assert!(g2.mul_vec(&p.transformed).unwrap().iter().all(|x| x.is_zero()));
            assert_eq!(g3.mul_vec(&p.transformed).unwrap(), g3.mul_vec(&p.primed).unwrap());
        }
    }

    #[test]
    fn thm4_witness_for_random_and_structured_tables() {
        let spec = spec_4_2_4();
        let mut rng = SplitMix64::seed_from_u64(9);
        let probes: Vec<_> = thm4_probe_set(&spec, 4, &[1])
            .unwrap()
            .into_iter()
            .map(|p| p.transformed)
            .collect();
        let f = DownloadFunction::random(&probes, 168, &mut rng).unwrap();
        let w = thm4_witness(&spec, 4, &[1, 2], &f).unwrap();
        for sc in [w.first(), w.second()] {
            assert!(hamming_distance(&sc.stale_msg, &sc.updated_msg) <= 1);
        }
        let constant = DownloadFunction::constant(&probes).unwrap();
        assert!(thm4_witness(&spec, 4, &[1, 2], &constant).is_ok());
        let injective = DownloadFunction::from_fn(&probes, |m| {
            m.iter().fold(0u64, |acc, x| acc * 13 + u64::from(x.value()))
        })
        .unwrap();
        assert!(matches!(
            thm4_witness(&spec, 4, &[1, 2], &injective),
            Err(BoundsError::RangeTooLarge { .. })
        ));
    }
}
