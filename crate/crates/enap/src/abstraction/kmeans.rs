use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::AbstractionError;
use crate::core::euclidean;

const SHIFT_TOL: f64 = 1e-8;
const MAX_ITERS: usize = 300;

/// Lloyd's algorithm to convergence, seeded from k distinct data points.
/// Every point gets a label (no noise). Ties break toward the lowest index.
pub fn refine_kmeans(
    features: &[Vec<f64>],
    k: usize,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<usize>), AbstractionError> {
    let n = features.len();
    if k == 0 || k > n {
        return Err(AbstractionError::KTooLarge { k, points: n });
    }

    // Initialization: shuffle indices, greedily take points with values not
    // seen yet, then pad with arbitrary points if duplicates leave too few.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    for &i in &order {
        if centroids.len() == k {
            break;
        }
        if !centroids.iter().any(|c| c == &features[i]) {
            centroids.push(features[i].clone());
        }
    }
    for &i in &order {
        if centroids.len() == k {
            break;
        }
        centroids.push(features[i].clone());
    }

    let mut labels = vec![0usize; n];
    for _ in 0..MAX_ITERS {
        for (i, f) in features.iter().enumerate() {
            labels[i] = nearest(&centroids, f);
        }
        let mut shift: f64 = 0.0;
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = features
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(f, _)| f)
                .collect();
            if members.is_empty() {
                continue; // keep the previous centroid
            }
            let mut mean = vec![0.0; centroid.len()];
            for m in &members {
                for (acc, v) in mean.iter_mut().zip(m.iter()) {
                    *acc += v;
                }
            }
            for v in mean.iter_mut() {
                *v /= members.len() as f64;
            }
            shift = shift.max(euclidean(centroid, &mean));
            *centroid = mean;
        }
        if shift < SHIFT_TOL {
            break;
        }
    }
    for (i, f) in features.iter().enumerate() {
        labels[i] = nearest(&centroids, f);
    }
    Ok((centroids, labels))
}

fn nearest(centroids: &[Vec<f64>], f: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = euclidean(c, f);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

pub fn within_cluster_ss(features: &[Vec<f64>], centroids: &[Vec<f64>], labels: &[usize]) -> f64 {
    features
        .iter()
        .zip(labels)
        .map(|(f, &l)| {
            let d = euclidean(f, &centroids[l]);
            d * d
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k1_gives_global_mean() {
        let pts = vec![vec![0.0, 0.0], vec![2.0, 4.0], vec![4.0, 2.0]];
        let (centroids, labels) = refine_kmeans(&pts, 1, 0).unwrap();
        assert_eq!(centroids, vec![vec![2.0, 2.0]]);
        assert_eq!(labels, vec![0, 0, 0]);
    }

    #[test]
    fn three_blobs_label_match() {
        let (pts, truth) = crate::abstraction::hdbscan::tests::three_blobs(0);
        let (centroids, labels) = refine_kmeans(&pts, 3, 0).unwrap();
        assert_eq!(centroids.len(), 3);
        // Oracle: nearest of the three generating centers.
        let centers = [[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]];
        for (i, f) in pts.iter().enumerate() {
            let oracle = centers
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    euclidean(&a.to_vec(), f)
                        .partial_cmp(&euclidean(&b.to_vec(), f))
                        .unwrap()
                })
                .map(|(c, _)| c)
                .unwrap();
            assert_eq!(oracle, truth[i]);
            // Points in the same blob share a k-means label.
            let first_of_blob = truth.iter().position(|&t| t == truth[i]).unwrap();
            assert_eq!(labels[i], labels[first_of_blob]);
        }
    }

    #[test]
    fn degenerate_k_equals_n() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0], vec![5.0]];
        let (centroids, labels) = refine_kmeans(&pts, 4, 1).unwrap();
        assert_eq!(within_cluster_ss(&pts, &centroids, &labels), 0.0);
    }

    #[test]
    fn k_too_large_rejected() {
        let pts = vec![vec![0.0]];
        assert!(matches!(
            refine_kmeans(&pts, 2, 0),
            Err(AbstractionError::KTooLarge { k: 2, points: 1 })
        ));
    }

    #[test]
    fn wcss_never_increases_over_iterations() {
        // Run Lloyd manually, tracking WCSS across assign/update rounds.
        let (pts, _) = crate::abstraction::hdbscan::tests::three_blobs(2);
        let (c0, l0) = refine_kmeans(&pts, 5, 3).unwrap();
        let final_ss = within_cluster_ss(&pts, &c0, &l0);
        // Any single further Lloyd round must not increase WCSS.
        let mut labels = vec![0usize; pts.len()];
        for (i, f) in pts.iter().enumerate() {
            labels[i] = super::nearest(&c0, f);
        }
        let again = within_cluster_ss(&pts, &c0, &labels);
        assert!(again <= final_ss + 1e-12);
    }
}
