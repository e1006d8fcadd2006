//! Lattice points and unit directions of `Z^d`.
//!
//! Dimensions are runtime values up to [`MAX_DIM`]; a [`Point`] always carries
//! `MAX_DIM` coordinates and the unused tail is kept at zero so that points of
//! the same dimension compare and hash consistently.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 4;

/// A nearest-neighbour unit vector `±e_axis`.
///
/// Directions of a `d`-dimensional lattice are indexed `0..2d` in the order
/// `e_1, -e_1, e_2, -e_2, ...`; every per-direction vector in this crate
/// (kernels, perturbation atoms, environment rows) uses that layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Direction {
    axis: u8,
    negative: bool,
}

impl Direction {
    pub fn new(axis: usize, sign: i8) -> Self {
        assert!(axis < MAX_DIM, "axis {axis} exceeds MAX_DIM");
        assert!(sign == 1 || sign == -1, "sign must be ±1");
        Direction {
            axis: axis as u8,
            negative: sign < 0,
        }
    }

    /// `+e_axis`.
    pub fn pos(axis: usize) -> Self {
        Self::new(axis, 1)
    }

    /// `-e_axis`.
    pub fn neg_axis(axis: usize) -> Self {
        Self::new(axis, -1)
    }

    pub fn from_index(index: usize) -> Self {
        Direction {
            axis: (index / 2) as u8,
            negative: index % 2 == 1,
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        2 * self.axis as usize + self.negative as usize
    }

    #[inline]
    pub fn axis(self) -> usize {
        self.axis as usize
    }

    #[inline]
    pub fn sign(self) -> i64 {
        if self.negative {
            -1
        } else {
            1
        }
    }

    #[inline]
    pub fn opposite(self) -> Self {
        Direction {
            axis: self.axis,
            negative: !self.negative,
        }
    }

    pub fn as_point(self) -> Point {
        let mut p = Point::origin();
        p.c[self.axis()] = self.sign();
        p
    }

    /// All `2d` directions in canonical index order.
    pub fn all(dim: usize) -> impl Iterator<Item = Direction> + Clone {
        (0..2 * dim).map(Direction::from_index)
    }
}

impl Neg for Direction {
    type Output = Direction;
    fn neg(self) -> Direction {
        self.opposite()
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.negative { "-" } else { "+" };
        write!(f, "{}e{}", s, self.axis + 1)
    }
}

/// A point of `Z^d`, `d ≤ MAX_DIM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Point {
    pub c: [i64; MAX_DIM],
}

impl Point {
    pub const fn origin() -> Self {
        Point { c: [0; MAX_DIM] }
    }

    /// Builds a point from its first `coords.len()` coordinates.
    pub fn new(coords: &[i64]) -> Self {
        assert!(coords.len() <= MAX_DIM, "too many coordinates");
        let mut p = Point::origin();
        p.c[..coords.len()].copy_from_slice(coords);
        p
    }

    pub fn try_from_slice(coords: &[i64]) -> Result<Self> {
        if coords.len() > MAX_DIM {
            return Err(LabError::Dimension(format!(
                "point has {} coordinates, at most {MAX_DIM} supported",
                coords.len()
            )));
        }
        Ok(Point::new(coords))
    }

    #[inline]
    pub fn step(self, dir: Direction) -> Self {
        let mut p = self;
        p.c[dir.axis()] += dir.sign();
        p
    }

    pub fn coords(&self, dim: usize) -> &[i64] {
        &self.c[..dim]
    }

    pub fn l1(&self) -> i64 {
        self.c.iter().map(|v| v.abs()).sum()
    }

    pub fn linf(&self) -> i64 {
        self.c.iter().map(|v| v.abs()).max().unwrap_or(0)
    }

    /// Component along a direction, `x · e`.
    #[inline]
    pub fn dot_dir(&self, dir: Direction) -> i64 {
        self.c[dir.axis()] * dir.sign()
    }

    pub fn is_origin(&self) -> bool {
        self.c.iter().all(|&v| v == 0)
    }

    /// Largest coordinate index in use (plus one); used to reject points that
    /// do not fit a lattice of the given dimension.
    pub fn fits_dim(&self, dim: usize) -> bool {
        self.c[dim..].iter().all(|&v| v == 0)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        let mut p = self;
        for i in 0..MAX_DIM {
            p.c[i] += rhs.c[i];
        }
        p
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        let mut p = self;
        for i in 0..MAX_DIM {
            p.c[i] -= rhs.c[i];
        }
        p
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        let mut p = self;
        for v in p.c.iter_mut() {
            *v = -*v;
        }
        p
    }
}

impl Add<Direction> for Point {
    type Output = Point;
    fn add(self, rhs: Direction) -> Point {
        self.step(rhs)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Trailing zeros are not printed beyond the second coordinate.
        let used = self.c.iter().rposition(|&v| v != 0).map_or(2, |i| i + 1);
        write!(f, "(")?;
        for (i, v) in self.c[..used.max(2)].iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let used = self.c.iter().rposition(|&v| v != 0).map_or(0, |i| i + 1);
        self.c[..used].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        Point::try_from_slice(&v).map_err(serde::de::Error::custom)
    }
}

/// All points of the cube `|x|_∞ ≤ radius` in `Z^dim`, lexicographic order.
pub fn cube_points(dim: usize, radius: i64) -> Vec<Point> {
    let side = (2 * radius + 1) as usize;
    let total = side.pow(dim as u32);
    let mut out = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut p = Point::origin();
        for axis in (0..dim).rev() {
            p.c[axis] = (idx % side) as i64 - radius;
            idx /= side;
        }
        out.push(p);
    }
    out
}

/// Largest `l1` distance between two points of the set (0 for fewer than two).
pub fn l1_diameter(points: &[Point]) -> i64 {
    let mut best = 0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max((*a - *b).l1());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direction_indexing_is_canonical() {
        let dirs: Vec<_> = Direction::all(2).collect();
        assert_eq!(dirs.len(), 4);
        assert_eq!(dirs[0], Direction::pos(0));
        assert_eq!(dirs[1], Direction::neg_axis(0));
        assert_eq!(dirs[2], Direction::pos(1));
        assert_eq!(dirs[3], Direction::neg_axis(1));
        for (i, d) in dirs.iter().enumerate() {
            assert_eq!(d.index(), i);
            assert_eq!(d.opposite().opposite(), *d);
            assert_ne!(d.opposite(), *d);
        }
    }

    #[test]
    fn directions_are_distinct_in_every_dimension() {
        for dim in 1..=MAX_DIM {
            let pts: std::collections::HashSet<_> =
                Direction::all(dim).map(|d| d.as_point()).collect();
            assert_eq!(pts.len(), 2 * dim);
        }
    }

    #[test]
    fn point_arithmetic() {
        let a = Point::new(&[1, -2]);
        let b = a.step(Direction::neg_axis(1));
        assert_eq!(b, Point::new(&[1, -3]));
        assert_eq!((a - b).l1(), 1);
        assert_eq!(format!("{}", Point::new(&[0, 2])), "(0,2)");
        assert_eq!(format!("{}", Point::origin()), "(0,0)");
        assert_eq!(format!("{}", Point::new(&[0, 0, 1])), "(0,0,1)");
    }

    #[test]
    fn cube_and_diameter() {
        let pts = cube_points(2, 1);
        assert_eq!(pts.len(), 9);
        assert_eq!(l1_diameter(&pts), 4);
        assert_eq!(l1_diameter(&pts[..1]), 0);
    }

    #[test]
    fn point_serde_roundtrip() {
        let p = Point::new(&[3, 0, -1]);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[3,0,-1]");
        let q: Point = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}
