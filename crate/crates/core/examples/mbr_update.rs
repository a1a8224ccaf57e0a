//! One oblivious update on the (n=4, k=2) product-matrix MBR code over F_11:
//! a stale node catches up on a single-symbol change from two helper symbols.

use oblivious_update::mbr;
use oblivious_update::shard::Diagnosis;

fn main() {
    let spec = mbr::generate(4, 2, 1, 11, 1, 1_000_000).unwrap();
    let f = spec.field();
    let old = f.vector(&[1, 2, 3, 4, 5]);
    let mut new = old.clone();
    new[2] = f.element(10);

    let stale = mbr::encode_node(&spec, &old, 4).unwrap();
    let fresh = mbr::encode(&spec, &new).unwrap();
    let t = mbr::run_update(&spec, &stale, &fresh[0], &fresh[1]).unwrap();

    println!("stale node 4 asks nodes 1 and 2");
    println!("downloaded: {:?}", oblivious_update::field::values(&t.downloaded));
    match t.diagnosis {
        Diagnosis::Located { location, delta } => println!("changed symbol {location} by {delta}"),
        Diagnosis::NoChange => println!("no change"),
    }
    println!("updated shard matches re-encoding: {}", t.shard == fresh[3]);
    println!("{} symbols, {:.4} bits", t.symbols_downloaded(), t.bits_downloaded());
}
