//! Locates a changed symbol from two observed differences and a table of
//! coefficient pairs, over F_11.

use oblivious_update::field::PrimeField;
use oblivious_update::ratio::identify_change;

fn main() {
    let f = PrimeField::new(11).unwrap();
    let table: Vec<_> = [(3, 4), (8, 10), (6, 4), (3, 6), (10, 0)]
        .iter()
        .map(|&(a, b)| (f.element(a), f.element(b)))
        .collect();
    let (d1, d2) = (f.element(6), f.element(8));
    for (t, (c1, c2)) in table.iter().enumerate() {
        println!("symbol {}: ({c1}, {c2})", t + 1);
    }
    match identify_change(&table, d1, d2).unwrap() {
        Some(c) => println!("observed ({d1}, {d2}) -> symbol {} changed by {}", c.index + 1, c.delta),
        None => println!("observed ({d1}, {d2}) -> no change"),
    }
}
