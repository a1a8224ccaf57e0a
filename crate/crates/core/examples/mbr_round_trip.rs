//! Encodes with a (n=6, k=3, two-matrix) MBR code and decodes from every set
//! of three nodes.

use itertools::Itertools;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

use oblivious_update::mbr;

fn main() {
    let spec = mbr::generate_searching_q(6, 3, 2, 11, 1, 200, 16).unwrap();
    let mut rng = SplitMix64::seed_from_u64(1);
    let msg = spec.field().random_vector(&mut rng, spec.message_len());
    let shards = mbr::encode(&spec, &msg).unwrap();
    println!(
        "q = {}, B = {}, {} symbols per node",
        spec.field().modulus(),
        spec.message_len(),
        spec.shard_len()
    );
    for set in (0..6).combinations(3) {
        let chosen: Vec<_> = set.iter().map(|&i| shards[i].clone()).collect();
        let ok = mbr::decode(&spec, &chosen).unwrap() == msg;
        println!("nodes {:?}: {}", set.iter().map(|i| i + 1).collect::<Vec<_>>(), if ok { "ok" } else { "MISMATCH" });
    }
}
