//! Key movement when a node joins: consistent ring versus hash modulus.
//!
//!     cargo run --example consistent_ring

use shardsim::strategies::{hash_locate, ring_add, ring_locate, HashRing, KeyHasher};
use shardsim::NodeId;

fn main() -> shardsim::Result<()> {
    const KEYS: u64 = 100_000;
    let hasher = KeyHasher::new(0);
    println!("hash function: {}", hasher.identifier());
    println!("{:>5} {:>10} {:>10} {:>12}", "nodes", "ring", "ideal", "modulus");
    for n in [4u32, 8, 16, 32] {
        let mut ring = HashRing::with_nodes((0..n).map(NodeId), 128, hasher);
        let before: Vec<NodeId> = (0..KEYS).map(|k| ring_locate(k, &ring)).collect::<Result<_, _>>()?;
        ring_add(&mut ring, NodeId(n))?;
        let mut moved = 0;
        for (k, old) in before.iter().enumerate() {
            let new = ring_locate(k as u64, &ring)?;
            if new != *old {
                assert_eq!(new, NodeId(n), "keys only ever move to the joining node");
                moved += 1;
            }
        }
        let modulus = (0..KEYS)
            .filter(|&k| hash_locate(k, n, &hasher) != hash_locate(k, n + 1, &hasher))
            .count();
        println!(
            "{n:>2}->{:<2} {:>10.4} {:>10.4} {:>12.4}",
            n + 1,
            moved as f64 / KEYS as f64,
            1.0 / (n as f64 + 1.0),
            modulus as f64 / KEYS as f64
        );
    }
    Ok(())
}
