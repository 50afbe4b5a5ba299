//! Bounding volume hierarchy over quads.

use crate::geom::{Aabb, Point, Quad, Vector};

const LEAF_SIZE: usize = 4;
const SAH_BINS: usize = 16;
/// Bounding boxes are inflated by this much (m) so flat, axis-aligned quads
/// are never culled by rounding in the slab test.
const BOX_PAD: f64 = 1e-7;

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: first primitive in `order`. Interior: index of the left child
    /// (the right child follows its whole left subtree).
    start: u32,
    /// Leaf: primitive count. Interior: 0.
    count: u32,
    right: u32,
}

/// Nearest-hit acceleration structure.
///
/// Primitives are referred to by their position in the slice passed to
/// [`Bvh::build`]. Hits are ordered by `(distance, primitive index)`, which
/// makes the result identical to a linear scan even for exact ties.
#[derive(Debug, Clone)]
pub struct Bvh {
    quads: Vec<Quad>,
    ids: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvhHit {
    pub primitive: usize,
    pub t: f64,
}

struct BuildItem {
    id: u32,
    bounds: Aabb,
    centroid: Point,
}

impl Bvh {
    /// Build over the quads whose index is listed in `ids`.
    pub fn build(quads: &[Quad], ids: impl IntoIterator<Item = usize>) -> Self {
        let mut items: Vec<BuildItem> = ids
            .into_iter()
            .map(|i| {
                let bounds = quads[i].aabb().padded(BOX_PAD);
                BuildItem {
                    id: i as u32,
                    bounds,
                    centroid: bounds.centroid(),
                }
            })
            .collect();
        let mut bvh = Bvh {
            quads: quads.to_vec(),
            ids: Vec::with_capacity(items.len()),
            nodes: Vec::new(),
        };
        if !items.is_empty() {
            let n = items.len();
            bvh.build_node(&mut items, 0, n);
            bvh.ids = items.iter().map(|it| it.id).collect();
        }
        bvh
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn build_node(&mut self, items: &mut [BuildItem], start: usize, end: usize) -> usize {
        let node_id = self.nodes.len();
        let slice = &items[start..end];
        let bounds = slice.iter().fold(Aabb::empty(), |b, it| b.merge(&it.bounds));
        self.nodes.push(Node {
            bounds,
            start: start as u32,
            count: (end - start) as u32,
            right: 0,
        });
        if end - start <= LEAF_SIZE {
            return node_id;
        }
        let Some(mid) = sah_split(&mut items[start..end]).map(|m| start + m) else {
            return node_id;
        };
        let left = self.build_node(items, start, mid);
        let right = self.build_node(items, mid, end);
        debug_assert_eq!(left, node_id + 1);
        let node = &mut self.nodes[node_id];
        node.start = left as u32;
        node.count = 0;
        node.right = right as u32;
        node_id
    }

    /// Nearest primitive hit with `t > t_min`.
    pub fn intersect(&self, origin: &Point, dir: &Vector, t_min: f64) -> Option<BvhHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = dir.map(|c| 1.0 / c);
        let mut best: Option<BvhHit> = None;
        let mut best_t = f64::INFINITY;
        let mut stack: [u32; 128] = [0; 128];
        let mut sp = 0usize;
        let root_box = &self.nodes[0].bounds;
        if root_box.hit(origin, &inv, t_min, best_t).is_none() {
            return None;
        }
        stack[sp] = 0;
        sp += 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            // Re-check against the current best; ties must still be visited.
            match node.bounds.hit(origin, &inv, t_min, best_t) {
                Some(_) => {}
                None => continue,
            }
            if node.count > 0 {
                let s = node.start as usize;
                for &pid in &self.ids[s..s + node.count as usize] {
                    if let Some(t) = self.quads[pid as usize].intersect(origin, dir, t_min) {
                        let better = match best {
                            None => true,
                            Some(b) => t < b.t || (t == b.t && (pid as usize) < b.primitive),
                        };
                        if better {
                            best = Some(BvhHit {
                                primitive: pid as usize,
                                t,
                            });
                            best_t = t;
                        }
                    }
                }
            } else {
                let l = node.start as usize;
                let r = node.right as usize;
                let tl = self.nodes[l].bounds.hit(origin, &inv, t_min, best_t);
                let tr = self.nodes[r].bounds.hit(origin, &inv, t_min, best_t);
                // push the farther child first so the nearer one is popped next
                match (tl, tr) {
                    (Some(a), Some(b)) => {
                        let (first, second) = if a <= b { (r, l) } else { (l, r) };
                        stack[sp] = first as u32;
                        stack[sp + 1] = second as u32;
                        sp += 2;
                    }
                    (Some(_), None) => {
                        stack[sp] = l as u32;
                        sp += 1;
                    }
                    (None, Some(_)) => {
                        stack[sp] = r as u32;
                        sp += 1;
                    }
                    (None, None) => {}
                }
            }
        }
        best
    }
}

/// Binned SAH split. Returns the partition point, or `None` if splitting
/// does not pay off (or all centroids coincide).
fn sah_split(items: &mut [BuildItem]) -> Option<usize> {
    let cbounds = items.iter().fold(Aabb::empty(), |mut b, it| {
        b.grow(&it.centroid);
        b
    });
    let ext = cbounds.extent();
    let n = items.len();
    let mut best: Option<(f64, usize, usize)> = None; // (cost, axis, bin)
    for axis in 0..3 {
        if ext[axis] <= 0.0 {
            continue;
        }
        let scale = SAH_BINS as f64 / ext[axis];
        let bin_of = |c: f64| (((c - cbounds.min[axis]) * scale) as usize).min(SAH_BINS - 1);
        let mut counts = [0usize; SAH_BINS];
        let mut boxes = [Aabb::empty(); SAH_BINS];
        for it in items.iter() {
            let b = bin_of(it.centroid[axis]);
            counts[b] += 1;
            boxes[b] = boxes[b].merge(&it.bounds);
        }
        let mut right_area = [0.0; SAH_BINS];
        let mut right_count = [0usize; SAH_BINS];
        let mut acc = Aabb::empty();
        let mut cnt = 0;
        for b in (1..SAH_BINS).rev() {
            acc = acc.merge(&boxes[b]);
            cnt += counts[b];
            right_area[b] = acc.surface_area();
            right_count[b] = cnt;
        }
        let mut acc = Aabb::empty();
        let mut cnt = 0;
        for b in 0..SAH_BINS - 1 {
            acc = acc.merge(&boxes[b]);
            cnt += counts[b];
            if cnt == 0 || right_count[b + 1] == 0 {
                continue;
            }
            let cost = acc.surface_area() * cnt as f64 + right_area[b + 1] * right_count[b + 1] as f64;
            if best.map_or(true, |(c, _, _)| cost < c) {
                best = Some((cost, axis, b));
            }
        }
    }
    let (axis, bin) = match best {
        Some((_, a, b)) => (a, b),
        None => {
            // all centroids coincide along every axis with spread: fall back to a median split
            if n > LEAF_SIZE * 4 {
                return Some(n / 2);
            }
            return None;
        }
    };
    let scale = SAH_BINS as f64 / ext[axis];
    let min = cbounds.min[axis];
    let mut i = 0;
    let mut j = n;
    while i < j {
        let b = (((items[i].centroid[axis] - min) * scale) as usize).min(SAH_BINS - 1);
        if b <= bin {
            i += 1;
        } else {
            j -= 1;
            items.swap(i, j);
        }
    }
    (i > 0 && i < n).then_some(i)
}
