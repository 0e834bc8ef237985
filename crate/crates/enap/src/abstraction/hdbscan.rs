//! Density clustering with adaptive cluster count and a noise label.
//!
//! A desk-scale implementation of the HDBSCAN pipeline: mutual-reachability
//! distances, a minimum spanning tree, condensation of the single-linkage
//! hierarchy under `min_cluster_size`, and cluster selection by stability
//! (excess of mass) over the condensed tree. Points that never join a
//! selected cluster are labeled noise.

use super::AbstractionError;
use crate::core::euclidean;

/// Label assigned to each input point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterLabel {
    Cluster(usize),
    Noise,
}

impl ClusterLabel {
    pub fn cluster(&self) -> Option<usize> {
        match self {
            ClusterLabel::Cluster(c) => Some(*c),
            ClusterLabel::Noise => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClusterParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
}

/// Output of [`cluster_features`]: per-point labels plus the centroid (mean
/// of member features) of each discovered cluster.
#[derive(Debug, Clone)]
pub struct Clustering {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<ClusterLabel>,
}

#[derive(Debug, Clone, Copy)]
struct MstEdge {
    a: usize,
    b: usize,
    weight: f64,
}

/// Discovers clusters in feature space. The cluster count is not fixed in
/// advance; all-noise data yields `NoClustersFound`.
pub fn cluster_features(
    features: &[Vec<f64>],
    params: ClusterParams,
) -> Result<Clustering, AbstractionError> {
    let n = features.len();
    let mcs = params.min_cluster_size.max(2);
    if n < mcs {
        return Err(AbstractionError::TooFewFeatures { needed: mcs, got: n });
    }

    let core = core_distances(features, params.min_samples.max(1));
    let mst = mutual_reachability_mst(features, &core);

    let mut tree = CondensedTree {
        mcs,
        nodes: Vec::new(),
    };
    let root = tree.condense((0..n).collect(), mst, f64::INFINITY);

    let selected = tree.select_by_stability(root);
    let mut labels = vec![ClusterLabel::Noise; n];
    let mut centroids = Vec::new();
    for node in selected {
        let mut points = Vec::new();
        tree.collect_points(node, &mut points);
        points.sort_unstable();
        let id = centroids.len();
        let dim = features[points[0]].len();
        let mut centroid = vec![0.0; dim];
        for &p in &points {
            labels[p] = ClusterLabel::Cluster(id);
            for (c, v) in centroid.iter_mut().zip(&features[p]) {
                *c += v;
            }
        }
        for c in centroid.iter_mut() {
            *c /= points.len() as f64;
        }
        centroids.push(centroid);
    }

    if centroids.is_empty() {
        return Err(AbstractionError::NoClustersFound);
    }
    Ok(Clustering { centroids, labels })
}

/// Density level for an edge weight; zero distances get a large finite level.
fn lambda(d: f64) -> f64 {
    if d <= 0.0 {
        1e12
    } else {
        (1.0 / d).min(1e12)
    }
}

struct CondensedNode {
    birth_d: f64,
    death_d: f64,
    children: Vec<usize>,
    /// (point, distance at which it left this cluster).
    falls: Vec<(usize, f64)>,
    /// Own falls plus everything under the children.
    descendant_points: usize,
}

struct CondensedTree {
    mcs: usize,
    nodes: Vec<CondensedNode>,
}

impl CondensedTree {
    /// Walks one cluster down the hierarchy, removing edges level by level
    /// (all edges tied at the current maximum weight at once). Fragments
    /// below `mcs` fall out as candidate noise; a split into two or more big
    /// fragments ends the cluster and recurses into children.
    fn condense(&mut self, points: Vec<usize>, edges: Vec<MstEdge>, birth_d: f64) -> usize {
        let idx = self.nodes.len();
        self.nodes.push(CondensedNode {
            birth_d,
            death_d: 0.0,
            children: Vec::new(),
            falls: Vec::new(),
            descendant_points: 0,
        });
        let mut points = points;
        let mut edges = edges;
        loop {
            if edges.is_empty() {
                // Nothing separates the remainder; it falls together at the
                // zero level.
                for &p in &points {
                    self.nodes[idx].falls.push((p, 0.0));
                }
                self.nodes[idx].death_d = 0.0;
                self.nodes[idx].descendant_points = self.nodes[idx].falls.len();
                return idx;
            }
            let level = edges
                .iter()
                .map(|e| e.weight)
                .fold(f64::NEG_INFINITY, f64::max);
            edges.retain(|e| e.weight < level);

            let comps = components(&points, &edges);
            let (big, small): (Vec<_>, Vec<_>) =
                comps.into_iter().partition(|c| c.len() >= self.mcs);
            for frag in &small {
                for &p in frag {
                    self.nodes[idx].falls.push((p, level));
                }
            }
            match big.len() {
                0 => {
                    self.nodes[idx].death_d = level;
                    self.nodes[idx].descendant_points = self.nodes[idx].falls.len();
                    return idx;
                }
                1 => {
                    let survivor = big.into_iter().next().unwrap();
                    let keep: std::collections::HashSet<usize> =
                        survivor.iter().copied().collect();
                    edges.retain(|e| keep.contains(&e.a) && keep.contains(&e.b));
                    points = survivor;
                }
                _ => {
                    self.nodes[idx].death_d = level;
                    let mut under_children = 0;
                    for part in big {
                        let keep: std::collections::HashSet<usize> =
                            part.iter().copied().collect();
                        let part_edges: Vec<MstEdge> = edges
                            .iter()
                            .filter(|e| keep.contains(&e.a) && keep.contains(&e.b))
                            .copied()
                            .collect();
                        let child = self.condense(part, part_edges, level);
                        under_children += self.nodes[child].descendant_points;
                        self.nodes[idx].children.push(child);
                    }
                    self.nodes[idx].descendant_points =
                        self.nodes[idx].falls.len() + under_children;
                    return idx;
                }
            }
        }
    }

    /// Excess of mass: points that fall from this cluster contribute up to
    /// their fall level; points continuing into children contribute up to the
    /// split level.
    fn stability(&self, idx: usize) -> f64 {
        let node = &self.nodes[idx];
        let birth = lambda(node.birth_d);
        let own: f64 = node.falls.iter().map(|&(_, d)| lambda(d) - birth).sum();
        let continued: usize = node
            .children
            .iter()
            .map(|&c| self.nodes[c].descendant_points)
            .sum();
        own + continued as f64 * (lambda(node.death_d) - birth)
    }

    /// Excess-of-mass selection. The root is only eligible when it never
    /// split and never shed noise before its terminal shatter (a single
    /// cohesive mass); otherwise root-level points are noise.
    fn select_by_stability(&self, root: usize) -> Vec<usize> {
        let root_node = &self.nodes[root];
        if root_node.children.is_empty() {
            let cohesive = root_node
                .falls
                .iter()
                .all(|&(_, d)| d == root_node.death_d);
            return if cohesive && root_node.falls.len() >= self.mcs {
                vec![root]
            } else {
                Vec::new()
            };
        }
        let mut selected = Vec::new();
        for &child in &root_node.children {
            self.select_subtree(child, &mut selected);
        }
        selected.sort_unstable();
        selected
    }

    /// Returns the selected set under `idx`, comparing the node's own
    /// stability against the best selection among its children.
    fn select_subtree(&self, idx: usize, selected: &mut Vec<usize>) -> f64 {
        let own = self.stability(idx);
        if self.nodes[idx].children.is_empty() {
            selected.push(idx);
            return own;
        }
        let mut child_selection = Vec::new();
        let mut child_sum = 0.0;
        for &c in &self.nodes[idx].children {
            child_sum += self.select_subtree(c, &mut child_selection);
        }
        if own >= child_sum {
            selected.push(idx);
            own
        } else {
            selected.extend(child_selection);
            child_sum
        }
    }

    fn collect_points(&self, idx: usize, out: &mut Vec<usize>) {
        out.extend(self.nodes[idx].falls.iter().map(|&(p, _)| p));
        for &c in &self.nodes[idx].children {
            self.collect_points(c, out);
        }
    }
}

fn components(points: &[usize], edges: &[MstEdge]) -> Vec<Vec<usize>> {
    use std::collections::HashMap;
    let mut index: HashMap<usize, usize> = HashMap::new();
    for (i, &p) in points.iter().enumerate() {
        index.insert(p, i);
    }
    let mut uf = UnionFind::new(points.len());
    for e in edges {
        if let (Some(&a), Some(&b)) = (index.get(&e.a), index.get(&e.b)) {
            uf.union(a, b);
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, &p) in points.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().push(p);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    for g in out.iter_mut() {
        g.sort_unstable();
    }
    out.sort_by_key(|g| g[0]);
    out
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Distance to the k-th nearest other point.
fn core_distances(features: &[Vec<f64>], k: usize) -> Vec<f64> {
    let n = features.len();
    let mut core = vec![0.0; n];
    for i in 0..n {
        let mut dists: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| euclidean(&features[i], &features[j]))
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let idx = (k - 1).min(dists.len().saturating_sub(1));
        core[i] = if dists.is_empty() { 0.0 } else { dists[idx] };
    }
    core
}

/// Prim's algorithm over mutual-reachability distances.
fn mutual_reachability_mst(features: &[Vec<f64>], core: &[f64]) -> Vec<MstEdge> {
    let n = features.len();
    if n <= 1 {
        return Vec::new();
    }
    let mreach = |a: usize, b: usize| -> f64 {
        euclidean(&features[a], &features[b]).max(core[a]).max(core[b])
    };
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![0usize; n];
    in_tree[0] = true;
    for j in 1..n {
        best[j] = mreach(0, j);
        parent[j] = 0;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_d = f64::INFINITY;
        for j in 0..n {
            if !in_tree[j] && best[j] < next_d {
                next_d = best[j];
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push(MstEdge {
            a: parent[next],
            b: next,
            weight: next_d,
        });
        for j in 0..n {
            if !in_tree[j] {
                let d = mreach(next, j);
                if d < best[j] {
                    best[j] = d;
                    parent[j] = next;
                }
            }
        }
    }
    edges
}
