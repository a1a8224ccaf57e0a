use std::sync::OnceLock;

use crate::mbr::{self, MbrCodeSpec};

/// The `(n, k, theta, q) = (4, 2, 1, 11)` code found from seed 1, searched
/// once per test binary.
pub(crate) fn fig1_spec() -> MbrCodeSpec {
    static SPEC: OnceLock<MbrCodeSpec> = OnceLock::new();
    SPEC.get_or_init(|| mbr::generate(4, 2, 1, 11, 1, 1_000_000).unwrap()).clone()
}
