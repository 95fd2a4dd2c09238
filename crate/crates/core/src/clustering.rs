//! Chain grouping and the final k-means partition.

use rand::Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::Distribution;

use crate::error::{invalid, Error, Result};
use crate::knn::knn_brute;
use crate::sample::{compensated_sum, sq_dist};
use crate::WeightedSample;

/// Default neighbour count for chain grouping.
pub const DEFAULT_N_NN: usize = 5;

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins, keeping the structure independent of merge order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// A partition of sampler ids. Each cluster is sorted; clusters are ordered
/// by their smallest member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainGrouping {
    pub clusters: Vec<Vec<usize>>,
}

impl ChainGrouping {
    pub fn singletons(m: usize) -> Self {
        Self {
            clusters: (0..m).map(|i| vec![i]).collect(),
        }
    }
}

/// Merges samplers `i` and `j` whenever a point of `i`'s last batch has a point
/// of `j`'s among its `n_nn` nearest neighbours in the pooled batches.
pub fn group_chains(last_batches: &[&[Vec<f64>]], n_nn: usize) -> Result<ChainGrouping> {
    if last_batches.iter().any(|b| b.is_empty()) {
        return Err(invalid("every sampler needs a nonempty last batch"));
    }
    let mut pooled = Vec::new();
    let mut owner = Vec::new();
    for (i, b) in last_batches.iter().enumerate() {
        pooled.extend(b.iter().cloned());
        owner.extend(std::iter::repeat_n(i, b.len()));
    }
    let d = pooled[0].len();
    if let Some(p) = pooled.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: p.len(),
        });
    }
    let mut uf = UnionFind::new(last_batches.len());
    for (i, nbrs) in knn_brute(&pooled, n_nn).iter().enumerate() {
        for n in nbrs {
            uf.union(owner[i], owner[n.index]);
        }
    }
    let mut by_root: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for s in 0..last_batches.len() {
        let r = uf.find(s);
        by_root.entry(r).or_default().push(s);
    }
    Ok(ChainGrouping {
        clusters: by_root.into_values().collect(),
    })
}

/// Point-to-cluster assignment with centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalPartition {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
}

impl FinalPartition {
    pub fn n_clusters(&self) -> usize {
        self.centroids.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.centroids.len()];
        for &a in &self.assignment {
            s[a] += 1;
        }
        s
    }

    /// Indices of the points in each cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.centroids.len()];
        for (i, &a) in self.assignment.iter().enumerate() {
            m[a].push(i);
        }
        m
    }

    /// Within-cluster sum of squares.
    pub fn objective(&self, points: &[Vec<f64>]) -> f64 {
        points
            .iter()
            .zip(&self.assignment)
            .map(|(p, &a)| sq_dist(p, &self.centroids[a]))
            .sum()
    }
}

/// Index of the closest centroid; ties go to the lower index.
pub fn nearest_centroid(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, mu) in centroids.iter().enumerate() {
        let dist = sq_dist(p, mu);
        if dist < best_d {
            best = c;
            best_d = dist;
        }
    }
    best
}

fn kmeans_pp_seed(points: &[Vec<f64>], m: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < m {
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // every point already coincides with a centroid
            Err(_) => rng.random_range(0..points.len()),
        };
        centroids.push(points[next].clone());
        for (di, p) in d2.iter_mut().zip(points) {
            *di = di.min(sq_dist(p, &points[next]));
        }
    }
    centroids
}

/// k-means++ seeding then Lloyd iterations. Returns the partition and the
/// objective after each assignment step.
pub fn kmeans_traced(
    points: &[Vec<f64>],
    m: usize,
    max_iter: usize,
    rng: &mut impl Rng,
) -> Result<(FinalPartition, Vec<f64>)> {
    if m == 0 {
        return Err(invalid("k-means needs at least one cluster"));
    }
    if points.len() < m {
        return Err(Error::NotEnoughPoints {
            needed: m,
            got: points.len(),
        });
    }
    let d = points[0].len();
    let mut centroids = kmeans_pp_seed(points, m, rng);
    let mut assignment: Vec<usize> = points
        .iter()
        .map(|p| nearest_centroid(p, &centroids))
        .collect();
    let mut trace = Vec::new();
    for _ in 0..max_iter.max(1) {
        // update step, re-seeding empty clusters from the worst-served point
        let mut sums = vec![vec![0.0; d]; m];
        let mut counts = vec![0usize; m];
        for (p, &a) in points.iter().zip(&assignment) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..m {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        for c in 0..m {
            if counts[c] == 0 {
                let far = (0..points.len())
                    .max_by(|&i, &j| {
                        sq_dist(&points[i], &centroids[assignment[i]])
                            .total_cmp(&sq_dist(&points[j], &centroids[assignment[j]]))
                            .then(j.cmp(&i))
                    })
                    .expect("nonempty");
                counts[assignment[far]] -= 1;
                assignment[far] = c;
                counts[c] = 1;
                centroids[c] = points[far].clone();
            }
        }
        let next: Vec<usize> = points
            .iter()
            .map(|p| nearest_centroid(p, &centroids))
            .collect();
        let done = next == assignment;
        assignment = next;
        trace.push(
            FinalPartition {
                assignment: assignment.clone(),
                centroids: centroids.clone(),
            }
            .objective(points),
        );
        if done {
            break;
        }
    }
    // final centroids are the means of the final assignment
    let mut sums = vec![vec![0.0; d]; m];
    let mut counts = vec![0usize; m];
    for (p, &a) in points.iter().zip(&assignment) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(p) {
            *s += x;
        }
    }
    for c in 0..m {
        if counts[c] > 0 {
            centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
        }
    }
    Ok((
        FinalPartition {
            assignment,
            centroids,
        },
        trace,
    ))
}

pub fn kmeans(
    points: &[Vec<f64>],
    m: usize,
    max_iter: usize,
    rng: &mut impl Rng,
) -> Result<FinalPartition> {
    Ok(kmeans_traced(points, m, max_iter, rng)?.0)
}

/// Moves the points of clusters smaller than `min_size` to the nearest
/// centroid of a large-enough cluster and drops the emptied clusters.
pub fn merge_small_clusters(
    points: &[Vec<f64>],
    partition: &FinalPartition,
    min_size: usize,
) -> FinalPartition {
    let sizes = partition.sizes();
    let keep: Vec<usize> = (0..sizes.len()).filter(|&c| sizes[c] >= min_size).collect();
    if keep.is_empty() {
        let mean = WeightedSample::uniform(points.to_vec())
            .map(|s| s.mean())
            .unwrap_or_default();
        return FinalPartition {
            assignment: vec![0; points.len()],
            centroids: vec![mean],
        };
    }
    let kept_centroids: Vec<Vec<f64>> = keep
        .iter()
        .map(|&c| partition.centroids[c].clone())
        .collect();
    let mut remap = vec![usize::MAX; sizes.len()];
    for (new, &old) in keep.iter().enumerate() {
        remap[old] = new;
    }
    let assignment = points
        .iter()
        .zip(&partition.assignment)
        .map(|(p, &a)| {
            if remap[a] != usize::MAX {
                remap[a]
            } else {
                nearest_centroid(p, &kept_centroids)
            }
        })
        .collect();
    FinalPartition {
        assignment,
        centroids: kept_centroids,
    }
}

/// Gives each point of cluster `i` the weight `w_i / n_i`.
pub fn reweight(
    points: Vec<Vec<f64>>,
    partition: &FinalPartition,
    weights: &[f64],
) -> Result<WeightedSample> {
    if weights.len() != partition.n_clusters() {
        return Err(invalid(format!(
            "{} weights for {} clusters",
            weights.len(),
            partition.n_clusters()
        )));
    }
    if points.len() != partition.assignment.len() {
        return Err(invalid("partition does not match the points"));
    }
    let sizes = partition.sizes();
    for (c, (&n, &w)) in sizes.iter().zip(weights).enumerate() {
        assert!(
            n > 0 || w == 0.0,
            "empty cluster {c} has positive weight {w}"
        );
    }
    let total = compensated_sum(weights.iter().copied());
    let per_point: Vec<f64> = partition
        .assignment
        .iter()
        .map(|&a| weights[a] / total / sizes[a] as f64)
        .collect();
    WeightedSample::new(points, per_point)
}
