//! Box-counting dimension of key sets and the shard budget it implies.
//!
//!     cargo run --example fractal_dimension

use shardsim::adaptive::{dyadic_scales, fractal_dimension, target_shard_size};
use shardsim::rng::rng_stream;

fn main() -> shardsim::Result<()> {
    let mut rng = rng_stream(3, "example");
    let uniform: Vec<f64> = (0..10_000).map(|_| rng.unit()).collect();
    let clustered: Vec<f64> = (0..10_000).map(|_| 0.3 + 0.01 * rng.unit()).collect();
    let two_spots: Vec<f64> = (0..10_000)
        .map(|i| if i % 2 == 0 { 0.1 } else { 0.7 } + 0.001 * rng.unit())
        .collect();
    let mut cantor = vec![0.5];
    let mut w = 1.0;
    for _ in 0..8 {
        w /= 3.0;
        cantor = cantor.iter().flat_map(|&x| [x - w, x + w]).collect();
    }

    let dyadic = dyadic_scales(8);
    let triadic: Vec<f64> = (1..=8).map(|j| 3f64.powi(-j)).collect();
    let sets: [(&str, &[f64], &[f64]); 4] = [
        ("uniform", &uniform, &dyadic),
        ("one narrow band", &clustered, &dyadic),
        ("two hot spots", &two_spots, &dyadic),
        ("Cantor, base 3", &cantor, &triadic),
    ];
    for (name, points, scales) in sets {
        let e = fractal_dimension(points, scales)?;
        println!(
            "{name:<16} D = {:.3} (residual {:.3}), shard budget {} of base 1000",
            e.dimension,
            e.residual,
            target_shard_size(e.dimension, 1000)
        );
    }
    Ok(())
}
