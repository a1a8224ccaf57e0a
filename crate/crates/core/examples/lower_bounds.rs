//! Concrete witnesses that download budgets below the protocols' costs fail.

use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

use oblivious_update::bounds::{self, DownloadFunction};
use oblivious_update::field::{values, FpMatrix, PrimeField};
use oblivious_update::mds;

fn main() {
    let mut rng = SplitMix64::seed_from_u64(5);

    // One helper, fewer than q^2 distinct answers.
    let f = PrimeField::new(3).unwrap();
    let g = FpMatrix::from_rows(f, &[vec![1, 0, 2], vec![0, 1, 1]]).unwrap();
    let probes = bounds::thm1_probe_set(&g).unwrap();
    let table = DownloadFunction::random(&probes, 8, &mut rng).unwrap();
    let w = bounds::thm1_witness(&g, &table).unwrap();
    println!("one helper, 8 answers over F_3:");
    println!("  messages {:?} and {:?} get the same answer", values(w.m_a()), values(w.m_b()));
    println!("  both are one symbol away from stale message {:?}", values(w.m_c()));

    // k - 1 helpers: a phantom message explains everything the stale node sees.
    let spec = mds::generate(4, 2, 4, Some(13)).unwrap();
    let ff = spec.field();
    let stale_msg = ff.vector(&[1, 2, 3, 4]);
    let updated = ff.vector(&[1, 2, 7, 4]);
    let phantom = bounds::mds_phantom_message(&spec, 1, &[2], &stale_msg, &updated).unwrap();
    println!("k - 1 helpers: phantom {:?} matches helper 2 and stale node 1", values(&phantom));

    // k helpers, one of them answering with fewer than q^2 labels.
    let probes: Vec<_> = bounds::thm4_probe_set(&spec, 1, &[2])
        .unwrap()
        .into_iter()
        .map(|p| p.transformed)
        .collect();
    let table = DownloadFunction::random(&probes, 13 * 13 - 1, &mut rng).unwrap();
    let w = bounds::thm4_witness(&spec, 1, &[2, 3], &table).unwrap();
    for (name, sc) in [("first", w.first()), ("second", w.second())] {
        println!(
            "  {name} scenario: {:?} -> {:?}",
            values(&sc.stale_msg),
            values(&sc.updated_msg)
        );
    }
    println!("node 1 gets identical data from helpers 2 and 3 in both, yet must end differently");
}
