//! Finite boxes `B(0, L) = {-L..L}^d` with a linear vertex and edge indexing.
//!
//! Vertex indices are mixed radix with axis 0 (the `e_1` direction) varying
//! fastest. Edges are stored axis-major: all edges parallel to `e_1` first,
//! then `e_2`, and so on. Inside one axis block edge `{x, x + e_a}` is indexed
//! by `x` in the reduced grid where coordinate `a` ranges over `-L..L-1`,
//! again with axis 0 fastest. Iterating vertices in index order and skipping
//! those on the `+L` face of axis `a` therefore visits the edges of block `a`
//! in increasing order.

use crate::error::{Error, Result};

/// Parity of the coordinate sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_sum(s: i64) -> Self {
        if s.rem_euclid(2) == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

/// A signed coordinate direction `+e_a` or `-e_a` (axis is zero based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Direction {
    pub axis: usize,
    pub positive: bool,
}

impl Direction {
    pub const E1: Direction = Direction {
        axis: 0,
        positive: true,
    };

    pub fn new(axis: usize, positive: bool) -> Self {
        Direction { axis, positive }
    }

    pub fn sign(self) -> i64 {
        if self.positive {
            1
        } else {
            -1
        }
    }

    pub fn reverse(self) -> Self {
        Direction {
            axis: self.axis,
            positive: !self.positive,
        }
    }

    /// Bit of this direction in a per-vertex direction mask.
    #[inline]
    pub fn bit(self) -> u16 {
        1 << (2 * self.axis + usize::from(!self.positive))
    }

    /// All `2d` directions, `+e_1, -e_1, +e_2, ...`.
    pub fn all(d: usize) -> Vec<Direction> {
        (0..d)
            .flat_map(|a| [Direction::new(a, true), Direction::new(a, false)])
            .collect()
    }

    /// `+e1`, `-e3`, ...
    pub fn label(self) -> String {
        format!("{}e{}", if self.positive { '+' } else { '-' }, self.axis + 1)
    }

    pub fn parse(s: &str) -> Option<Direction> {
        let s = s.trim();
        let (positive, rest) = match s.as_bytes().first()? {
            b'+' => (true, &s[1..]),
            b'-' => (false, &s[1..]),
            _ => (true, s),
        };
        let axis: usize = rest.strip_prefix('e')?.parse().ok()?;
        if axis == 0 {
            return None;
        }
        Some(Direction::new(axis - 1, positive))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeBox {
    d: usize,
    radius: usize,
    side: usize,
    strides: Vec<usize>,
    num_vertices: usize,
    /// `edge_strides[a][b]`: stride of coordinate `b` inside the block of axis `a`.
    edge_strides: Vec<Vec<usize>>,
    edges_per_axis: usize,
}

impl LatticeBox {
    pub fn new(d: usize, radius: usize) -> Result<Self> {
        if d < 1 {
            return Err(Error::param("d", "dimension must be at least 1"));
        }
        if radius < 1 {
            return Err(Error::param("L", "box radius must be at least 1"));
        }
        let side = 2 * radius + 1;
        let num_vertices = side
            .checked_pow(d as u32)
            .filter(|&v| v <= u32::MAX as usize)
            .ok_or_else(|| Error::param("L", "box too large for 32-bit vertex indices"))?;
        let strides: Vec<usize> = (0..d).map(|a| side.pow(a as u32)).collect();
        let edge_strides = (0..d)
            .map(|a| {
                let mut acc = 1;
                (0..d)
                    .map(|b| {
                        let s = acc;
                        acc *= if b == a { side - 1 } else { side };
                        s
                    })
                    .collect()
            })
            .collect();
        let edges_per_axis = (side - 1) * side.pow(d as u32 - 1);
        Ok(LatticeBox {
            d,
            radius,
            side,
            strides,
            num_vertices,
            edge_strides,
            edges_per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn edges_per_axis(&self) -> usize {
        self.edges_per_axis
    }

    /// Exact in-box edge count `d * 2L * (2L+1)^(d-1)`.
    pub fn num_edges(&self) -> usize {
        self.d * self.edges_per_axis
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn origin(&self) -> usize {
        // all coordinates equal to zero, i.e. offset L in every digit
        self.strides.iter().map(|s| s * self.radius).sum()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        let l = self.radius as i64;
        x.len() == self.d && x.iter().all(|&c| -l <= c && c <= l)
    }

    pub fn index(&self, x: &[i64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let l = self.radius as i64;
        Some(x.iter().zip(&self.strides).map(|(&c, &s)| (c + l) as usize * s).sum())
    }

    #[inline]
    pub fn coord(&self, v: usize, axis: usize) -> i64 {
        ((v / self.strides[axis]) % self.side) as i64 - self.radius as i64
    }

    pub fn coords(&self, v: usize) -> Vec<i64> {
        (0..self.d).map(|a| self.coord(v, a)).collect()
    }

    pub fn parity(&self, v: usize) -> Parity {
        Parity::of_sum((0..self.d).map(|a| self.coord(v, a)).sum())
    }

    /// Sup-norm distance to the origin.
    pub fn sup_norm(&self, v: usize) -> usize {
        (0..self.d)
            .map(|a| self.coord(v, a).unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    #[inline]
    pub fn neighbor(&self, v: usize, dir: Direction) -> Option<usize> {
        let c = self.coord(v, dir.axis);
        let l = self.radius as i64;
        if dir.positive {
            (c < l).then(|| v + self.strides[dir.axis])
        } else {
            (c > -l).then(|| v - self.strides[dir.axis])
        }
    }

    /// Index of the edge `{lo, lo + e_axis}`; `None` when it leaves the box.
    pub fn edge_from_lower(&self, lo: usize, axis: usize) -> Option<usize> {
        if self.coord(lo, axis) >= self.radius as i64 {
            return None;
        }
        let reduced: usize = (0..self.d)
            .map(|b| ((lo / self.strides[b]) % self.side) * self.edge_strides[axis][b])
            .sum();
        Some(axis * self.edges_per_axis + reduced)
    }

    /// Edge from `v` in direction `dir`, if both endpoints lie in the box.
    #[inline]
    pub fn edge_at(&self, v: usize, dir: Direction) -> Option<usize> {
        if dir.positive {
            self.edge_from_lower(v, dir.axis)
        } else {
            let lo = self.neighbor(v, dir)?;
            self.edge_from_lower(lo, dir.axis)
        }
    }

    /// `(lower endpoint, upper endpoint, axis)` of an edge index.
    pub fn edge_endpoints(&self, e: usize) -> (usize, usize, usize) {
        let axis = e / self.edges_per_axis;
        let mut r = e % self.edges_per_axis;
        let mut lo = 0;
        for b in 0..self.d {
            let size = if b == axis { self.side - 1 } else { self.side };
            lo += (r % size) * self.strides[b];
            r /= size;
        }
        (lo, lo + self.strides[axis], axis)
    }

    /// Bit `2a` set when `v` lies on the `-L` face of axis `a`, bit `2a + 1` for `+L`.
    pub fn face_mask(&self, v: usize) -> u32 {
        let l = self.radius as i64;
        let mut m = 0;
        for a in 0..self.d {
            let c = self.coord(v, a);
            if c == -l {
                m |= 1 << (2 * a);
            }
            if c == l {
                m |= 1 << (2 * a + 1);
            }
        }
        m
    }

    pub fn all_faces_mask(&self) -> u32 {
        (1u32 << (2 * self.d)) - 1
    }

    /// `|B(0, r)|` restricted to one parity (`r` must not exceed the radius).
    /// Uses `#even - #odd = (-1)^(r d)`.
    pub fn ball_size(&self, r: usize, parity: Option<Parity>) -> usize {
        let total = (2 * r + 1).pow(self.d as u32);
        let sign_even = if (r * self.d).is_multiple_of(2) { 1 } else { -1 };
        match parity {
            None => total,
            Some(Parity::Even) => ((total as i64 + sign_even) / 2) as usize,
            Some(Parity::Odd) => ((total as i64 - sign_even) / 2) as usize,
        }
    }

    /// Visits `B(0, r)` (clipped to the box) in index order, passing the
    /// vertex index and its parity.
    pub fn for_each_in_ball(&self, r: usize, mut f: impl FnMut(usize, Parity)) {
        let r = r.min(self.radius) as i64;
        let d = self.d;
        let mut x = vec![-r; d];
        let mut v = self.index(&x).expect("clipped ball lies in the box");
        let mut sum: i64 = -r * d as i64;
        loop {
            f(v, Parity::of_sum(sum));
            let mut a = 0;
            loop {
                if a == d {
                    return;
                }
                if x[a] < r {
                    x[a] += 1;
                    v += self.strides[a];
                    sum += 1;
                    break;
                }
                v -= 2 * r as usize * self.strides[a];
                sum -= 2 * r;
                x[a] = -r;
                a += 1;
            }
        }
    }

    /// Vertices of `B(0, r)` (intersected with the box) of the given parity,
    /// or of both parities when `parity` is `None`, in index order.
    pub fn ball(&self, r: usize, parity: Option<Parity>) -> Vec<usize> {
        (0..self.num_vertices)
            .filter(|&v| self.sup_norm(v) <= r)
            .filter(|&v| parity.is_none_or(|p| self.parity(v) == p))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts() {
        let b = LatticeBox::new(3, 5).unwrap();
        assert_eq!(b.num_vertices(), 11usize.pow(3));
        assert_eq!(b.num_edges(), 3 * 10 * 11 * 11);
        let b = LatticeBox::new(2, 1).unwrap();
        assert_eq!(b.num_edges(), 2 * 2 * 3);
        assert!(LatticeBox::new(3, 0).is_err());
    }

    #[test]
    fn origin_is_zero() {
        let b = LatticeBox::new(3, 4).unwrap();
        assert_eq!(b.coords(b.origin()), vec![0, 0, 0]);
        assert_eq!(b.parity(b.origin()), Parity::Even);
    }

    #[test]
    fn edge_indexing_is_a_bijection() {
        for (d, l) in [(2, 1), (2, 3), (3, 2), (4, 1)] {
            let b = LatticeBox::new(d, l).unwrap();
            let mut seen = vec![false; b.num_edges()];
            let mut next: Vec<usize> = (0..d).map(|a| a * b.edges_per_axis()).collect();
            for v in 0..b.num_vertices() {
                for (a, expected) in next.iter_mut().enumerate() {
                    if let Some(e) = b.edge_from_lower(v, a) {
                        // axis-major, increasing along vertex order
                        assert_eq!(e, *expected);
                        *expected += 1;
                        assert!(!seen[e]);
                        seen[e] = true;
                        let (lo, hi, ax) = b.edge_endpoints(e);
                        assert_eq!((lo, ax), (v, a));
                        assert_eq!(Some(hi), b.neighbor(v, Direction::new(a, true)));
                        assert_eq!(b.edge_at(hi, Direction::new(a, false)), Some(e));
                    }
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn boundary_degrees() {
        let b = LatticeBox::new(3, 2).unwrap();
        for v in 0..b.num_vertices() {
            let deg = Direction::all(3)
                .into_iter()
                .filter(|&dir| b.neighbor(v, dir).is_some())
                .count();
            let faces = b.face_mask(v).count_ones() as usize;
            assert_eq!(deg, 6 - faces);
        }
    }

    #[test]
    fn parity_classes_partition_ball() {
        let b = LatticeBox::new(3, 4).unwrap();
        let all = b.ball(3, None);
        let odd = b.ball(3, Some(Parity::Odd));
        let even = b.ball(3, Some(Parity::Even));
        assert_eq!(all.len(), 7usize.pow(3));
        assert_eq!(odd.len() + even.len(), all.len());
        // 7^3 = 343 points, the corner (-3,-3,-3) is odd, so odd has one more
        assert_eq!(odd.len(), 172);
        assert_eq!(b.ball_size(3, Some(Parity::Odd)), 172);
        assert_eq!(b.ball_size(3, Some(Parity::Even)), 171);
        assert_eq!(b.ball_size(2, Some(Parity::Even)), 63);
        let mut visited = Vec::new();
        b.for_each_in_ball(3, |v, par| {
            assert_eq!(b.parity(v), par);
            visited.push(v);
        });
        assert_eq!(visited, all);
    }

    #[test]
    fn direction_labels() {
        for dir in Direction::all(3) {
            assert_eq!(Direction::parse(&dir.label()), Some(dir));
        }
        assert_eq!(Direction::parse("e1"), Some(Direction::E1));
        assert_eq!(Direction::parse("e0"), None);
    }

    proptest! {
        #[test]
        fn indexer_roundtrip(d in 2usize..5, l in 1usize..4, seed in any::<u64>()) {
            let b = LatticeBox::new(d, l).unwrap();
            let v = (seed as usize) % b.num_vertices();
            let x = b.coords(v);
            prop_assert_eq!(b.index(&x), Some(v));
            prop_assert!(x.iter().all(|c| c.unsigned_abs() as usize <= l));
        }
    }
}
