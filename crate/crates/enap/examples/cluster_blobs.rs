//! Alphabet discovery on synthetic data: density clustering finds the
//! cluster count by itself, K-Means refinement polishes the centroids, and
//! isolated points come out as noise before being folded into the nearest
//! cluster by the codebook assignment.
//!
//! ```bash
//! cargo run --example cluster_blobs
//! ```

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use enap::abstraction::{assign_symbol, cluster_features, refine_kmeans, ClusterParams, Codebook};

fn main() {
    let centers = [[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut points: Vec<Vec<f64>> = Vec::new();
    for c in &centers {
        for _ in 0..100 {
            points.push(vec![
                c[0] + rng.gen_range(-0.05..0.05),
                c[1] + rng.gen_range(-0.05..0.05),
            ]);
        }
    }
    // A couple of far outliers.
    points.push(vec![40.0, 40.0]);
    points.push(vec![-35.0, 50.0]);

    let clustering = cluster_features(
        &points,
        ClusterParams {
            min_cluster_size: 5,
            min_samples: 5,
        },
    )
    .expect("blobs are dense");
    let noise = clustering
        .labels
        .iter()
        .filter(|l| l.cluster().is_none())
        .count();
    println!(
        "density clustering: {} clusters, {} noise points",
        clustering.centroids.len(),
        noise
    );

    let (centroids, _) = refine_kmeans(&points, clustering.centroids.len(), 0).unwrap();
    let codebook = Codebook {
        centroids,
        min_cluster_size: 5,
        refined: true,
    };
    for (i, c) in codebook.centroids.iter().enumerate() {
        println!("  centroid {i}: [{:.3}, {:.3}]", c[0], c[1]);
    }

    // Noise points fold into their nearest cluster at assignment time.
    let outlier_symbol = assign_symbol(&codebook, &points[300]).unwrap();
    println!("outlier at (40, 40) assigns to symbol {outlier_symbol}");
}
