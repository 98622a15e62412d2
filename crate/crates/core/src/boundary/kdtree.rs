//! 2D Kd-tree with axis-alternating median splits.
//!
//! Nearest-neighbor ties are broken by smallest (y, x) — i.e. smallest
//! row, then smallest column for pixel-center points — so queries are
//! deterministic across platforms and input orders.

use crate::geom::Point2;

#[derive(Debug, Clone)]
struct Node {
    point: Point2,
    left: u32,
    right: u32,
}

const NIL: u32 = u32::MAX;

/// Static 2D Kd-tree over a point set.
#[derive(Debug, Clone)]
pub struct KdTree {
    nodes: Vec<Node>,
    root: u32,
}

impl KdTree {
    /// Builds the tree by recursive median splits, alternating between
    /// the x and y axes starting with x at the root.
    pub fn build(points: &[Point2]) -> KdTree {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes: Vec<Node> = points
            .iter()
            .map(|&point| Node {
                point,
                left: NIL,
                right: NIL,
            })
            .collect();
        let root = build_recursive(&mut nodes, &mut order, points, 0);
        KdTree { nodes, root }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nearest point to `q` under Euclidean distance with the (y, x)
    /// tie-break. Returns `None` on an empty tree.
    pub fn nearest(&self, q: Point2) -> Option<Point2> {
        if self.root == NIL {
            return None;
        }
        let mut best = self.nodes[self.root as usize].point;
        let mut best_d2 = q.distance_squared(best);
        self.search(self.root, q, 0, &mut best, &mut best_d2);
        Some(best)
    }

    fn search(&self, idx: u32, q: Point2, depth: usize, best: &mut Point2, best_d2: &mut f64) {
        let node = &self.nodes[idx as usize];
        let d2 = q.distance_squared(node.point);
        if better(d2, node.point, *best_d2, *best) {
            *best = node.point;
            *best_d2 = d2;
        }
        let delta = axis_delta(q, node.point, depth);
        let (near, far) = if delta < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        if near != NIL {
            self.search(near, q, depth + 1, best, best_d2);
        }
        // The far side may still hold an equidistant point with a better
        // tie-break, so prune only on strict inequality.
        if far != NIL && delta * delta <= *best_d2 {
            self.search(far, q, depth + 1, best, best_d2);
        }
    }
}

/// Strict "candidate beats incumbent" order on (distance², y, x).
#[inline]
fn better(d2: f64, p: Point2, best_d2: f64, best: Point2) -> bool {
    if d2 != best_d2 {
        return d2 < best_d2;
    }
    if p.y != best.y {
        return p.y < best.y;
    }
    p.x < best.x
}

/// Linear-scan reference with the identical tie-break; used as the
/// equivalence oracle for the tree.
pub fn nearest_linear(points: &[Point2], q: Point2) -> Option<Point2> {
    let mut iter = points.iter();
    let mut best = *iter.next()?;
    let mut best_d2 = q.distance_squared(best);
    for &p in iter {
        let d2 = q.distance_squared(p);
        if better(d2, p, best_d2, best) {
            best = p;
            best_d2 = d2;
        }
    }
    Some(best)
}

#[inline]
fn axis_coord(p: Point2, depth: usize) -> f64 {
    if depth.is_multiple_of(2) {
        p.x
    } else {
        p.y
    }
}

#[inline]
fn axis_delta(q: Point2, p: Point2, depth: usize) -> f64 {
    axis_coord(q, depth) - axis_coord(p, depth)
}

fn build_recursive(nodes: &mut [Node], order: &mut [u32], points: &[Point2], depth: usize) -> u32 {
    if order.is_empty() {
        return NIL;
    }
    // Total order (axis coordinate, y, x) makes the split independent of
    // the incoming permutation for distinct points.
    order.sort_unstable_by(|&a, &b| {
        let pa = points[a as usize];
        let pb = points[b as usize];
        (axis_coord(pa, depth), pa.y, pa.x)
            .partial_cmp(&(axis_coord(pb, depth), pb.y, pb.x))
            .unwrap()
    });
    let mid = order.len() / 2;
    let idx = order[mid];
    let (left_slice, rest) = order.split_at_mut(mid);
    let right_slice = &mut rest[1..];
    let left = build_recursive(nodes, left_slice, points, depth + 1);
    let right = build_recursive(nodes, right_slice, points, depth + 1);
    nodes[idx as usize].left = left;
    nodes[idx as usize].right = right;
    idx
}
