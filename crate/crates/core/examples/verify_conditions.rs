//! Checks the two conditions an MBR code needs for oblivious updates, on a
//! generated code and on a degenerate one.

use oblivious_update::field::PrimeField;
use oblivious_update::mbr::{self, MbrCodeSpec};

fn report(name: &str, spec: &MbrCodeSpec) {
    let r = mbr::verify_conditions(spec);
    println!("{name}:");
    match &r.minor {
        Some(m) => println!("  psi minors: {m}"),
        None => println!("  psi minors: all nonsingular"),
    }
    match &r.ratio {
        Some(v) => println!("  helper ratios: {v}"),
        None => println!("  helper ratios: pairwise distinct"),
    }
}

fn main() {
    report("generated", &mbr::generate(4, 2, 1, 11, 1, 1_000_000).unwrap());

    let f = PrimeField::new(11).unwrap();
    let psi = (1..=4).map(|c| f.vector(&[c, 2 * c, 3 * c])).collect();
    let eta = vec![f.vector(&[1]); 4];
    report("degenerate", &MbrCodeSpec::from_parts(4, 2, 1, f, psi, eta).unwrap());
}
