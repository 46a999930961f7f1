//! Static 3-d tree for k-nearest-neighbour queries.

use crate::geom::Vec3;

const LEAF: usize = 12;

/// Implicit balanced kd-tree over a borrowed point slice.
///
/// Node `[lo, hi)` stores its splitting point at `mid = (lo + hi) / 2` in
/// `order`, with the split axis in `axes[mid]`.
pub struct KdTree<'a> {
    points: &'a [Vec3],
    order: Vec<usize>,
    axes: Vec<u8>,
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Vec3]) -> Self {
        let mut tree = KdTree {
            points,
            order: (0..points.len()).collect(),
            axes: vec![0; points.len()],
        };
        tree.build(0, points.len());
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, lo: usize, hi: usize) {
        if hi - lo <= LEAF {
            return;
        }
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for &i in &self.order[lo..hi] {
            let p = self.points[i];
            for a in 0..3 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (max[a] - min[a]).total_cmp(&(max[b] - min[b])))
            .unwrap_or(0);
        let mid = (lo + hi) / 2;
        let pts = self.points;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b))
        });
        self.axes[mid] = axis as u8;
        self.build(lo, mid);
        self.build(mid + 1, hi);
    }

    /// The `k` nearest points to `query` as `(squared distance, index)`,
    /// ascending; ties broken by index. A query that coincides with a stored
    /// point returns that point first.
    pub fn knn(&self, query: Vec3, k: usize) -> Vec<(f64, usize)> {
        let mut best = Vec::with_capacity(k + 1);
        if k > 0 {
            self.search(0, self.points.len(), query, k, &mut best);
        }
        best
    }

    fn offer(&self, i: usize, query: Vec3, k: usize, best: &mut Vec<(f64, usize)>) {
        let d = self.points[i].distance_sq(query);
        if best.len() == k {
            let worst = best[k - 1];
            if (d, i) >= worst {
                return;
            }
            best.pop();
        }
        let pos = best.partition_point(|&e| e < (d, i));
        best.insert(pos, (d, i));
    }

    fn search(&self, lo: usize, hi: usize, query: Vec3, k: usize, best: &mut Vec<(f64, usize)>) {
        if hi - lo <= LEAF {
            for &i in &self.order[lo..hi] {
                self.offer(i, query, k, best);
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = self.axes[mid] as usize;
        let split = self.order[mid];
        let diff = query[axis] - self.points[split][axis];
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(near.0, near.1, query, k, best);
        self.offer(split, query, k, best);
        if best.len() < k || diff * diff <= best[k - 1].0 {
            self.search(far.0, far.1, query, k, best);
        }
    }
}
