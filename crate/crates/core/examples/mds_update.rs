//! Oblivious update on the (n=4, k=2, B=4) Cauchy MDS code over F_13: two
//! symbols from each of two helpers.

use oblivious_update::field::values;
use oblivious_update::mds;
use oblivious_update::shard::Diagnosis;

fn main() {
    let spec = mds::generate(4, 2, 4, Some(13)).unwrap();
    let f = spec.field();
    let old = f.vector(&[3, 1, 4, 1]);
    let mut new = old.clone();
    new[3] = f.element(9);

    let stale = mds::encode_node(&spec, &old, 1).unwrap();
    let fresh = mds::encode(&spec, &new).unwrap();
    let t = mds::run_update(&spec, &stale, &[&fresh[2], &fresh[3]]).unwrap();

    println!("downloaded from nodes 3 and 4: {:?}", values(&t.downloaded));
    if let Diagnosis::Located { location, delta } = t.diagnosis {
        println!("symbol {} changed by {delta}", location + 1);
    }
    println!("updated shard matches re-encoding: {}", t.shard == fresh[0]);
    println!("{} symbols, {:.4} bits", t.symbols_downloaded(), t.bits_downloaded());
}
