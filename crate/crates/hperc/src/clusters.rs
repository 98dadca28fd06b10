//! Connectivity clusters of an ensemble at a distance threshold, per-cluster
//! maximal spans, and maximal span cluster (MSC) detection.
//!
//! Two states connect when their Fubini-Study distance satisfies d <= dS
//! (the closed predicate: ties have probability zero under continuous
//! sampling, and it makes the critical threshold attained rather than
//! approached). A cluster spans maximally when its largest intra-cluster
//! distance L comes within eps of pi/2, the diameter of state space:
//! pi/2 - L <= eps.
//!
//! The production path is union-find; [`oracle_boolean_clusters`] keeps the
//! O(M^3) boolean-list propagation alive as an independent cross-check.

use crate::error::{Error, Result};
use crate::metric::DistanceMatrix;
use crate::scalar::Scalar;

/// Disjoint-set forest with path compression and union by size.
struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
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
        if ra == rb {
            return;
        }
        let (big, small) = if self.size[ra] >= self.size[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small] = big;
        self.size[big] += self.size[small];
    }
}

/// Partition of state indices into connectivity clusters at one threshold.
///
/// Cluster ids are dense, assigned in order of each cluster's smallest
/// member. `spans[alpha]` is L_alpha = max intra-cluster distance, attained
/// by `span_witness[alpha]`; singletons have span 0 witnessed by (m, m).
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPartition<S> {
    threshold: S,
    labels: Vec<usize>,
    members: Vec<Vec<usize>>,
    spans: Vec<S>,
    span_witness: Vec<(usize, usize)>,
}

impl<S: Scalar> ClusterPartition<S> {
    pub fn threshold(&self) -> S {
        self.threshold
    }

    /// Per-state cluster id, length M.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn cluster_count(&self) -> usize {
        self.members.len()
    }

    /// Sorted member indices of cluster `alpha`.
    pub fn members(&self, alpha: usize) -> &[usize] {
        &self.members[alpha]
    }

    /// L_alpha, the maximal pairwise distance inside cluster `alpha`.
    pub fn span(&self, alpha: usize) -> S {
        self.spans[alpha]
    }

    pub fn spans(&self) -> &[S] {
        &self.spans
    }

    /// The pair attaining L_alpha.
    pub fn span_witness(&self, alpha: usize) -> (usize, usize) {
        self.span_witness[alpha]
    }

    /// Clusters as a canonical set-of-sets (sorted members, sorted by first
    /// member) for partition comparisons.
    pub fn as_sets(&self) -> Vec<Vec<usize>> {
        let mut sets = self.members.clone();
        sets.sort();
        sets
    }

    /// JSON document `{ threshold, epsilon, clusters: [...] }` with one
    /// `{ id, members, span, witness }` record per cluster.
    pub fn to_json(&self, epsilon: S) -> serde_json::Value {
        let clusters: Vec<serde_json::Value> = (0..self.cluster_count())
            .map(|alpha| {
                serde_json::json!({
                    "id": alpha,
                    "members": self.members[alpha],
                    "span": self.spans[alpha].to_f64(),
                    "witness": [self.span_witness[alpha].0, self.span_witness[alpha].1],
                })
            })
            .collect();
        serde_json::json!({
            "threshold": self.threshold.to_f64(),
            "epsilon": epsilon.to_f64(),
            "clusters": clusters,
        })
    }

    /// Relabel a per-state root assignment into the canonical dense form and
    /// compute spans by scanning all intra-cluster pairs.
    fn from_roots(dm: &DistanceMatrix<S>, threshold: S, roots: Vec<usize>) -> Self {
        let m = roots.len();
        let mut label_of_root = vec![usize::MAX; m];
        let mut labels = vec![0usize; m];
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (i, &r) in roots.iter().enumerate() {
            if label_of_root[r] == usize::MAX {
                label_of_root[r] = members.len();
                members.push(Vec::new());
            }
            labels[i] = label_of_root[r];
            members[label_of_root[r]].push(i);
        }
        let mut spans = Vec::with_capacity(members.len());
        let mut span_witness = Vec::with_capacity(members.len());
        for cluster in &members {
            let mut best = S::zero();
            let mut witness = (cluster[0], cluster[0]);
            for (i, &a) in cluster.iter().enumerate() {
                for &b in &cluster[i + 1..] {
                    let d = dm.get(a, b);
                    if d > best {
                        best = d;
                        witness = (a, b);
                    }
                }
            }
            spans.push(best);
            span_witness.push(witness);
        }
        ClusterPartition {
            threshold,
            labels,
            members,
            spans,
            span_witness,
        }
    }
}

fn check_threshold<S: Scalar>(threshold: S) -> Result<()> {
    if !(threshold >= S::zero() && threshold <= S::FRAC_PI_2()) {
        return Err(Error::InvalidThreshold {
            value: threshold.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// Union-find clustering of all pairs with d <= threshold.
pub fn build_clusters<S: Scalar>(
    dm: &DistanceMatrix<S>,
    threshold: S,
) -> Result<ClusterPartition<S>> {
    check_threshold(threshold)?;
    let m = dm.size();
    let mut uf = UnionFind::new(m);
    for (a, b, d) in dm.iter_pairs() {
        if d <= threshold {
            uf.union(a, b);
        }
    }
    let roots: Vec<usize> = (0..m).map(|i| uf.find(i)).collect();
    Ok(ClusterPartition::from_roots(dm, threshold, roots))
}

/// Boolean-list clustering, kept as a brute-force oracle for `build_clusters`.
///
/// Row m of the M x M boolean array records which states share a cluster with
/// m. Each connected pair ORs its two rows together; the pass repeats until
/// no bit changes (a single pass can leave rows of early states stale), then
/// duplicate rows are dropped so each cluster is listed once. Cubic cost,
/// intended for M up to a couple hundred.
#[allow(clippy::needless_range_loop)] // l indexes two rows at once
pub fn oracle_boolean_clusters<S: Scalar>(
    dm: &DistanceMatrix<S>,
    threshold: S,
) -> Result<ClusterPartition<S>> {
    check_threshold(threshold)?;
    let m = dm.size();
    let mut rows: Vec<Vec<bool>> = vec![vec![false; m]; m];
    loop {
        let mut changed = false;
        for a in 0..m {
            for b in 0..m {
                if dm.get(a, b) <= threshold {
                    if !rows[a][b] {
                        rows[a][b] = true;
                        changed = true;
                    }
                    for l in 0..m {
                        let merged = rows[a][l] | rows[b][l];
                        if rows[a][l] != merged || rows[b][l] != merged {
                            rows[a][l] = merged;
                            rows[b][l] = merged;
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    // Deduplicate: keep the first occurrence of each distinct row; the row
    // for state i is the membership list of i's cluster.
    let mut kept: Vec<&Vec<bool>> = Vec::new();
    for row in &rows {
        if !kept.contains(&row) {
            kept.push(row);
        }
    }
    let mut roots = vec![usize::MAX; m];
    for cluster_row in kept {
        let root = cluster_row
            .iter()
            .position(|&b| b)
            .expect("every fixpoint row contains its own state");
        for (i, &member) in cluster_row.iter().enumerate() {
            if member {
                debug_assert_eq!(roots[i], usize::MAX, "clusters must be disjoint");
                roots[i] = root;
            }
        }
    }
    debug_assert!(roots.iter().all(|&r| r != usize::MAX));
    Ok(ClusterPartition::from_roots(dm, threshold, roots))
}

/// Outcome of MSC detection at a tolerance `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct MscReport<S> {
    pub has_msc: bool,
    pub msc_cluster_id: Option<usize>,
    pub epsilon: S,
    pub achieved_span: Option<S>,
}

/// Find a maximal span cluster: some alpha with pi/2 - L_alpha <= epsilon.
///
/// When several clusters qualify, the one with the largest span wins, ties
/// going to the smallest cluster id.
pub fn detect_msc<S: Scalar>(partition: &ClusterPartition<S>, epsilon: S) -> MscReport<S> {
    debug_assert!(epsilon >= S::zero());
    let half_pi = S::FRAC_PI_2();
    let mut best: Option<(usize, S)> = None;
    for alpha in 0..partition.cluster_count() {
        let span = partition.span(alpha);
        if half_pi - span <= epsilon {
            match best {
                Some((_, s)) if s >= span => {}
                _ => best = Some((alpha, span)),
            }
        }
    }
    MscReport {
        has_msc: best.is_some(),
        msc_cluster_id: best.map(|(id, _)| id),
        epsilon,
        achieved_span: best.map(|(_, s)| s),
    }
}
