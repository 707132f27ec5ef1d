// Ursell functions of hard rods: graph enumeration against the subset recursion.

use mayerkit::model::{PairPotential, Point};
use mayerkit::ursell::{psi, psi_by_recursion, ursell, ursell_fast, MayerMatrix};

fn main() -> mayerkit::Result<()> {
    let rods = PairPotential::hard_sphere(1.0)?;
    let pts: Vec<Point> = [0.0, 0.7, 1.5, 2.1, 2.9].into_iter().map(Point::on_line).collect();
    for n in 1..=pts.len() {
        let cfg = &pts[..n];
        let by_graphs = ursell(&rods, cfg)?;
        let fast = ursell_fast(&MayerMatrix::new(&rods, cfg));
        println!("n={n}: phi^T = {:+.1} over {} connected graphs, subset recursion {:+.1}", by_graphs.value, by_graphs.terms, fast);
    }
    let roots = [0, 1];
    let enumerated = psi(&rods, 2, &pts)?.value;
    let recursive = psi_by_recursion(&rods, &roots, &pts)?;
    println!("psi_(2,5): enumeration {enumerated:+.1}, root removal {recursive:+.1}");
    Ok(())
}
