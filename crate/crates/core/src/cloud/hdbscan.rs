//! HDBSCAN over 3-d points with the Euclidean metric.
//!
//! Core distances come from a kd-tree; the mutual-reachability minimum
//! spanning tree is built with dense Prim (O(n²) time, O(n) memory), which
//! is exact and fast enough for the voxel-reduced clouds and VBS sets this
//! crate clusters.

use rayon::prelude::*;

use super::KdTree;
use crate::geom::Vec3;

pub const NOISE: i32 = -1;

/// Smallest distance used when converting to λ = 1/d, so coincident points
/// give a large but finite density.
const MIN_DIST: f64 = 1e-12;

/// One label per input point; `-1` is noise, clusters are `0..C`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterLabels {
    pub labels: Vec<i32>,
}

impl ClusterLabels {
    pub fn n_clusters(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize)
    }

    /// Member indices of each cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters()];
        for (i, &l) in self.labels.iter().enumerate() {
            if l >= 0 {
                out[l as usize].push(i);
            }
        }
        out
    }

    pub fn noise(&self) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, &l)| l == NOISE).map(|(i, _)| i).collect()
    }
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    a: usize,
    b: usize,
    w: f64,
}

/// Core distance: distance to the `min_samples`-th nearest point, counting
/// the point itself (so `min_samples = 1` gives zero).
fn core_distances(points: &[Vec3], min_samples: usize) -> Vec<f64> {
    let k = min_samples.min(points.len()).max(1);
    let tree = KdTree::new(points);
    points.par_iter().map(|&p| tree.knn(p, k).last().map_or(0.0, |&(d2, _)| d2.sqrt())).collect()
}

/// Prim's algorithm on the complete mutual-reachability graph. Ties prefer
/// the lower vertex index.
fn mst(points: &[Vec3], core: &[f64]) -> Vec<Edge> {
    let n = points.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let (pc, cc) = (points[current], core[current]);
        let mut next = usize::MAX;
        let mut next_w = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let w = pc.distance(points[j]).max(cc).max(core[j]);
            if w < best[j] || (w == best[j] && current < from[j]) {
                best[j] = w;
                from[j] = current;
            }
            if best[j] < next_w {
                next_w = best[j];
                next = j;
            }
        }
        in_tree[next] = true;
        let (a, b) = if from[next] < next { (from[next], next) } else { (next, from[next]) };
        edges.push(Edge { a, b, w: best[next] });
        current = next;
    }
    edges.sort_by(|x, y| x.w.total_cmp(&y.w).then(x.a.cmp(&y.a)).then(x.b.cmp(&y.b)));
    edges
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Single-linkage dendrogram: node `n + i` merges `left`, `right` at `dist`.
struct Dendrogram {
    n: usize,
    left: Vec<usize>,
    right: Vec<usize>,
    dist: Vec<f64>,
    size: Vec<usize>,
}

impl Dendrogram {
    fn from_mst(n: usize, edges: &[Edge]) -> Self {
        let mut uf = UnionFind::new(2 * n);
        // Dendrogram node currently representing each union-find root.
        let mut node_of: Vec<usize> = (0..2 * n).collect();
        let mut d = Dendrogram { n, left: vec![], right: vec![], dist: vec![], size: vec![1; n] };
        for (i, e) in edges.iter().enumerate() {
            let (ra, rb) = (uf.find(e.a), uf.find(e.b));
            let (na, nb) = (node_of[ra], node_of[rb]);
            let id = n + i;
            d.left.push(na);
            d.right.push(nb);
            d.dist.push(e.w);
            d.size.push(d.size[na] + d.size[nb]);
            uf.parent[ra] = id;
            uf.parent[rb] = id;
            node_of[id] = id;
        }
        d
    }

    fn root(&self) -> usize {
        self.n + self.left.len() - 1
    }

    fn children(&self, node: usize) -> Option<(usize, usize, f64)> {
        (node >= self.n).then(|| {
            let i = node - self.n;
            (self.left[i], self.right[i], self.dist[i])
        })
    }

    fn leaves(&self, node: usize, out: &mut Vec<usize>) {
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            match self.children(x) {
                Some((l, r, _)) => {
                    stack.push(l);
                    stack.push(r);
                }
                None => out.push(x),
            }
        }
    }
}

/// Condensed cluster tree. Cluster 0 is the root.
struct Condensed {
    parent: Vec<Option<usize>>,
    birth: Vec<f64>,
    /// `(point, cluster it falls out of, λ)`.
    point_exit: Vec<(usize, usize, f64)>,
    /// `(parent cluster, λ, size)` for every child cluster born.
    splits: Vec<(usize, f64, usize)>,
}

fn lambda(d: f64) -> f64 {
    1.0 / d.max(MIN_DIST)
}

fn condense(tree: &Dendrogram, min_cluster_size: usize) -> Condensed {
    let mut c = Condensed { parent: vec![None], birth: vec![0.0], point_exit: vec![], splits: vec![] };
    // (dendrogram node, cluster label)
    let mut stack = vec![(tree.root(), 0usize)];
    let mut buf = Vec::new();
    while let Some((node, label)) = stack.pop() {
        let Some((l, r, d)) = tree.children(node) else {
            c.point_exit.push((node, label, f64::INFINITY));
            continue;
        };
        let lam = lambda(d);
        let (sl, sr) = (tree.size[l], tree.size[r]);
        match (sl >= min_cluster_size, sr >= min_cluster_size) {
            (true, true) => {
                for child in [l, r] {
                    let id = c.parent.len();
                    c.parent.push(Some(label));
                    c.birth.push(lam);
                    c.splits.push((label, lam, tree.size[child]));
                    stack.push((child, id));
                }
            }
            (big_l, big_r) => {
                for (child, big) in [(l, big_l), (r, big_r)] {
                    if big {
                        stack.push((child, label));
                    } else {
                        buf.clear();
                        tree.leaves(child, &mut buf);
                        c.point_exit.extend(buf.iter().map(|&p| (p, label, lam)));
                    }
                }
            }
        }
    }
    c
}

/// Excess-of-mass selection. The root is a candidate only when
/// `allow_single`. With `epsilon > 0`, a selected cluster born below that
/// distance is replaced by its nearest ancestor born above it.
fn select_clusters(c: &Condensed, allow_single: bool, epsilon: f64) -> Vec<bool> {
    let k = c.parent.len();
    let mut stability = vec![0.0; k];
    for &(_, cl, lam) in &c.point_exit {
        // Points surviving to the leaves of the dendrogram exit at the
        // largest finite density.
        let lam = if lam.is_finite() { lam } else { lambda(0.0) };
        stability[cl] += lam - c.birth[cl];
    }
    for &(parent, lam, size) in &c.splits {
        stability[parent] += (lam - c.birth[parent]) * size as f64;
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (id, p) in c.parent.iter().enumerate() {
        if let Some(p) = p {
            children[*p].push(id);
        }
    }
    let mut selected = vec![false; k];
    let mut subtree = stability.clone();
    let unselect_below = |selected: &mut Vec<bool>, id: usize| {
        let mut stack = children[id].clone();
        while let Some(x) = stack.pop() {
            selected[x] = false;
            stack.extend(children[x].iter().copied());
        }
    };
    let lowest = if allow_single { 0 } else { 1 };
    // Children always carry larger labels than their parents.
    for id in (lowest..k).rev() {
        let child_sum: f64 = children[id].iter().map(|&ch| subtree[ch]).sum();
        if children[id].is_empty() || stability[id] >= child_sum {
            selected[id] = true;
            unselect_below(&mut selected, id);
            subtree[id] = stability[id];
        } else {
            subtree[id] = child_sum;
        }
    }
    if allow_single && k == 1 {
        selected[0] = true;
    }
    if epsilon > 0.0 {
        let max_lambda = 1.0 / epsilon;
        for id in 0..k {
            if !selected[id] || c.birth[id] <= max_lambda || id == 0 {
                continue;
            }
            let mut at = id;
            loop {
                let parent = c.parent[at].expect("non-root");
                if parent == 0 {
                    if allow_single {
                        at = 0;
                    }
                    break;
                }
                at = parent;
                if c.birth[at] <= max_lambda {
                    break;
                }
            }
            selected[at] = true;
            unselect_below(&mut selected, at);
        }
    }
    selected
}

/// HDBSCAN parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HdbscanParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    /// Clusters split at distances below this are merged back (0 disables).
    pub cluster_selection_epsilon: f64,
    /// Allow the whole data set to be returned as one cluster.
    pub allow_single_cluster: bool,
}

impl HdbscanParams {
    pub fn new(min_cluster_size: usize, min_samples: usize) -> Self {
        Self { min_cluster_size, min_samples, cluster_selection_epsilon: 0.0, allow_single_cluster: false }
    }
}

/// Clusters `points` and labels noise `-1`. Cluster ids are numbered by the
/// smallest member index, which makes the output canonical for a given
/// partition.
pub fn hdbscan(points: &[Vec3], min_cluster_size: usize, min_samples: usize) -> ClusterLabels {
    hdbscan_with(points, &HdbscanParams::new(min_cluster_size, min_samples))
}

/// [`hdbscan`] with the selection extensions. Points that fall out of a
/// selected root count as members only at densities above `1/epsilon`.
pub fn hdbscan_with(points: &[Vec3], params: &HdbscanParams) -> ClusterLabels {
    let n = points.len();
    let min_cluster_size = params.min_cluster_size.max(2);
    let min_samples = params.min_samples.max(1);
    if n < min_cluster_size || n < 2 {
        return ClusterLabels { labels: vec![NOISE; n] };
    }
    let core = core_distances(points, min_samples);
    let edges = mst(points, &core);
    let tree = Dendrogram::from_mst(n, &edges);
    let condensed = condense(&tree, min_cluster_size);
    let eps = params.cluster_selection_epsilon;
    let selected = select_clusters(&condensed, params.allow_single_cluster, eps);

    let mut raw = vec![NOISE; n];
    for &(p, cl, lam) in &condensed.point_exit {
        if cl == 0 && !(lam.is_infinite() || (eps > 0.0 && lam * eps >= 1.0)) {
            continue;
        }
        let mut at = Some(cl);
        while let Some(x) = at {
            if selected[x] {
                raw[p] = x as i32;
                break;
            }
            at = condensed.parent[x];
        }
    }
    let mut remap = std::collections::HashMap::new();
    let labels = raw
        .iter()
        .map(|&l| {
            if l == NOISE {
                NOISE
            } else {
                let next = remap.len() as i32;
                *remap.entry(l).or_insert(next)
            }
        })
        .collect();
    ClusterLabels { labels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn blobs(seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Normal::new(0.0, 0.5).unwrap();
        let mut pts = Vec::new();
        for c in [Vec3::ZERO, Vec3::new(100.0, 0.0, 0.0)] {
            for _ in 0..500 {
                pts.push(c + Vec3::new(g.sample(&mut rng), g.sample(&mut rng), g.sample(&mut rng)));
            }
        }
        pts
    }

    /// Partition as a sorted list of sorted member lists, noise excluded.
    fn partition(labels: &ClusterLabels, ids: &[usize]) -> Vec<Vec<usize>> {
        let mut parts: Vec<Vec<usize>> = labels
            .members()
            .into_iter()
            .map(|m| {
                let mut v: Vec<usize> = m.into_iter().map(|i| ids[i]).collect();
                v.sort();
                v
            })
            .collect();
        parts.sort();
        parts
    }

    #[test]
    fn two_blobs() {
        let pts = blobs(1);
        let l = hdbscan(&pts, 20, 10);
        assert_eq!(l.n_clusters(), 2);
        let a = l.labels[0];
        assert!(a >= 0);
        assert!(l.labels[..500].iter().all(|&x| x == a));
        assert!(l.labels[500..].iter().all(|&x| x == 1 - a));
    }

    #[test]
    fn too_few_points_are_noise() {
        let pts: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        assert_eq!(hdbscan(&pts, 20, 10).labels, vec![NOISE; 5]);
        assert!(hdbscan(&[], 5, 3).labels.is_empty());
    }

    #[test]
    fn permutation_invariant() {
        let pts = blobs(2);
        let base = partition(&hdbscan(&pts, 20, 10), &(0..pts.len()).collect::<Vec<_>>());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let mut ids: Vec<usize> = (0..pts.len()).collect();
            ids.shuffle(&mut rng);
            let shuffled: Vec<Vec3> = ids.iter().map(|&i| pts[i]).collect();
            assert_eq!(partition(&hdbscan(&shuffled, 20, 10), &ids), base);
        }
    }

    #[test]
    fn translation_invariant() {
        let pts = blobs(4);
        let moved: Vec<Vec3> = pts.iter().map(|&p| p + Vec3::new(1e3, -250.0, 42.0)).collect();
        let ids: Vec<usize> = (0..pts.len()).collect();
        assert_eq!(partition(&hdbscan(&pts, 20, 10), &ids), partition(&hdbscan(&moved, 20, 10), &ids));
    }

    #[test]
    fn coincident_points_form_one_cluster() {
        let mut pts = vec![Vec3::new(1.0, 2.0, 3.0); 30];
        pts.extend(vec![Vec3::new(81.0, 2.0, 3.0); 4]);
        let l = hdbscan(&pts, 2, 1);
        assert_eq!(l.n_clusters(), 2);
        assert!(l.labels[..30].iter().all(|&x| x == l.labels[0]));
        assert!(l.labels[30..].iter().all(|&x| x == l.labels[30]));
    }

    #[test]
    fn isolated_point_is_noise() {
        let mut pts = blobs(5);
        pts.push(Vec3::new(50.0, 1000.0, 0.0));
        let l = hdbscan(&pts, 20, 10);
        assert_eq!(*l.labels.last().unwrap(), NOISE);
        assert_eq!(l.n_clusters(), 2);
    }

    #[test]
    fn single_cluster_needs_opt_in() {
        let pts: Vec<Vec3> = blobs(7)[..500].to_vec();
        let p = HdbscanParams { allow_single_cluster: true, cluster_selection_epsilon: 5.0, ..HdbscanParams::new(20, 10) };
        assert_eq!(hdbscan_with(&pts, &p).n_clusters(), 1);
        // Without the opt-in the root cannot be selected.
        assert_ne!(hdbscan_with(&pts, &HdbscanParams::new(20, 10)).n_clusters(), 1);
    }

    #[test]
    fn epsilon_merges_fine_splits() {
        // Uniformly spaced line: plain EOM fragments it with tiny clusters.
        let mut pts: Vec<Vec3> = (0..30).map(|i| Vec3::new(0.01 * i as f64, 0.0, 0.0)).collect();
        pts.extend((0..30).map(|i| Vec3::new(80.0 + 0.01 * i as f64, 0.0, 0.0)));
        let p = HdbscanParams { cluster_selection_epsilon: 0.5, allow_single_cluster: true, ..HdbscanParams::new(2, 1) };
        let l = hdbscan_with(&pts, &p);
        assert_eq!(l.n_clusters(), 2);
        assert!(l.labels[..30].iter().all(|&x| x == 0));
        assert!(l.labels[30..].iter().all(|&x| x == 1));
        let one = hdbscan_with(&pts[..30], &p);
        assert_eq!(one.labels, vec![0; 30]);
    }

    #[test]
    fn mst_matches_brute_force_weight() {
        let pts: Vec<Vec3> = blobs(6).into_iter().step_by(10).collect();
        let core = core_distances(&pts, 3);
        let total: f64 = mst(&pts, &core).iter().map(|e| e.w).sum();
        // Kruskal over all pairs.
        let n = pts.len();
        let mut all = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                all.push(Edge { a, b, w: pts[a].distance(pts[b]).max(core[a]).max(core[b]) });
            }
        }
        all.sort_by(|x, y| x.w.total_cmp(&y.w));
        let mut uf = UnionFind::new(n);
        let mut kruskal = 0.0;
        for e in all {
            let (ra, rb) = (uf.find(e.a), uf.find(e.b));
            if ra != rb {
                uf.parent[ra] = rb;
                kruskal += e.w;
            }
        }
        assert!((total - kruskal).abs() < 1e-9 * kruskal);
    }
}
