// Counts of connected graphs, multirooted graphs, trees and set partitions.

use mayerkit::combinat::{all_graphs, connected_graphs, is_connected, multirooted_graphs, partitions, trees};

fn main() -> mayerkit::Result<()> {
    println!("{:>2} {:>8} {:>8} {:>10} {:>8} {:>6}", "n", "C_n", "D_{2,n}", "rooted", "filtered", "Bell");
    for n in 2..=6 {
        let connected = connected_graphs(n)?.count();
        let two_rooted = multirooted_graphs(2, n)?.count();
        let rooted = trees(n, true)?.count();
        let filtered = all_graphs(n)?.filter(is_connected).count();
        let bell = partitions(n)?.count();
        assert_eq!(connected, filtered);
        println!("{n:>2} {connected:>8} {two_rooted:>8} {rooted:>10} {filtered:>8} {bell:>6}");
    }
    Ok(())
}
