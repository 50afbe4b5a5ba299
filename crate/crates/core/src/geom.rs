//! Small geometric helpers shared by the plane, patch and ray modules.

use nalgebra::{Point3, Vector3};

pub type Point = Point3<f64>;
pub type Vector = Vector3<f64>;

/// A parallelogram `origin + a * edge_u + b * edge_v` for `a, b` in `[0, 1]`.
///
/// Patch cells are squares and building surfaces are rectangles, both of
/// which are represented this way.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub origin: Point,
    pub edge_u: Vector,
    pub edge_v: Vector,
}

impl Quad {
    pub fn new(origin: Point, edge_u: Vector, edge_v: Vector) -> Self {
        Self {
            origin,
            edge_u,
            edge_v,
        }
    }

    /// Unit normal `edge_u × edge_v`.
    pub fn normal(&self) -> Vector {
        self.edge_u.cross(&self.edge_v).normalize()
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            self.origin,
            self.origin + self.edge_u,
            self.origin + self.edge_u + self.edge_v,
            self.origin + self.edge_v,
        ]
    }

    pub fn center(&self) -> Point {
        self.origin + 0.5 * (self.edge_u + self.edge_v)
    }

    pub fn area(&self) -> f64 {
        self.edge_u.cross(&self.edge_v).norm()
    }

    pub fn aabb(&self) -> Aabb {
        let mut b = Aabb::empty();
        for c in self.corners() {
            b.grow(&c);
        }
        b
    }

    /// Ray parameter `t` of the intersection with this quad, if the hit lies
    /// inside the quad (boundary inclusive) and `t > t_min`.
    ///
    /// Rays parallel to the quad's plane never hit.
    #[inline]
    pub fn intersect(&self, origin: &Point, dir: &Vector, t_min: f64) -> Option<f64> {
        let n = self.edge_u.cross(&self.edge_v);
        let denom = n.dot(dir);
        if denom == 0.0 || !denom.is_finite() {
            return None;
        }
        let t = n.dot(&(self.origin - origin)) / denom;
        if !(t > t_min) || !t.is_finite() {
            return None;
        }
        // parallelogram coordinates: rel = a·u + b·v
        let rel = origin + dir * t - self.origin;
        let nn = n.norm_squared();
        let a = rel.cross(&self.edge_v).dot(&n) / nn;
        let b = self.edge_u.cross(&rel).dot(&n) / nn;
        if (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b) {
            Some(t)
        } else {
            None
        }
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Point::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn grow(&mut self, p: &Point) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn centroid(&self) -> Point {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn extent(&self) -> Vector {
        self.max - self.min
    }

    pub fn surface_area(&self) -> f64 {
        let e = self.extent();
        if e.x < 0.0 {
            return 0.0;
        }
        2.0 * (e.x * e.y + e.y * e.z + e.z * e.x)
    }

    /// Grow the box by `pad` on every side.
    pub fn padded(&self, pad: f64) -> Aabb {
        let v = Vector::repeat(pad);
        Aabb {
            min: self.min - v,
            max: self.max + v,
        }
    }

    /// Slab test. Returns the entry distance if the ray overlaps the box
    /// somewhere in `(t_min, t_max)`.
    #[inline]
    pub fn hit(&self, origin: &Point, inv_dir: &Vector, t_min: f64, t_max: f64) -> Option<f64> {
        let mut t0 = t_min;
        let mut t1 = t_max;
        for axis in 0..3 {
            let mut near = (self.min[axis] - origin[axis]) * inv_dir[axis];
            let mut far = (self.max[axis] - origin[axis]) * inv_dir[axis];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN (0 * inf) arises when the origin lies on a slab boundary of a
            // flat box; f64::max/min ignore NaN, which keeps the test conservative.
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

/// Orthonormal basis `(u, v)` completing the unit vector `n` to a right-handed frame.
///
/// Branch-free construction (Duff et al.); depends only on `n`, so identical
/// axes give bitwise-identical frames.
pub fn orthonormal_basis(n: &Vector) -> (Vector, Vector) {
    let sign = 1.0_f64.copysign(n.z);
    let a = -1.0 / (sign + n.z);
    let b = n.x * n.y * a;
    let u = Vector::new(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x);
    let v = Vector::new(b, sign + n.y * n.y * a, -n.y);
    (u, v)
}

/// +1 for vectors whose largest-magnitude component is positive, -1 otherwise.
/// Ties in magnitude go to the lowest axis index.
pub fn canonical_sign(v: &Vector) -> f64 {
    let mut best = 0;
    for axis in 1..3 {
        if v[axis].abs() > v[best].abs() {
            best = axis;
        }
    }
    if v[best] < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Signum with `sgn(0) = 0`.
#[inline]
pub fn signum(x: f64) -> i32 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}
