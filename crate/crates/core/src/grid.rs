//! Dense cubic grids over a window of `Z^d` with a one-cell zero border.
//!
//! The border lets stencil gathers read `x ± e` without bounds checks; values
//! stored there are always zero.

use crate::lattice::{Direction, Point};

#[derive(Debug, Clone)]
pub(crate) struct Grid {
    pub dim: usize,
    pub center: Point,
    pub radius: i64,
    /// Cells per axis including the two border cells.
    pub side: usize,
    pub strides: Vec<usize>,
    pub len: usize,
}

impl Grid {
    pub fn new(dim: usize, center: Point, radius: i64) -> Self {
        let side = (2 * radius + 3) as usize;
        let mut strides = vec![1usize; dim];
        for a in (0..dim.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * side;
        }
        let len = side.pow(dim as u32);
        Grid {
            dim,
            center,
            radius,
            side,
            strides,
            len,
        }
    }

    /// Grid coordinate (0-based, border included) along `axis` of lattice `x`.
    #[inline]
    fn local(&self, x: &Point, axis: usize) -> i64 {
        x.c[axis] - self.center.c[axis] + self.radius + 1
    }

    pub fn contains(&self, x: &Point) -> bool {
        (0..self.dim).all(|a| (x.c[a] - self.center.c[a]).abs() <= self.radius)
    }

    /// Flat index of an interior lattice point.
    #[inline]
    pub fn index(&self, x: &Point) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        Some(self.index_unchecked(x))
    }

    #[inline]
    pub fn index_unchecked(&self, x: &Point) -> usize {
        let mut idx = 0;
        for a in 0..self.dim {
            idx += self.local(x, a) as usize * self.strides[a];
        }
        idx
    }

    /// Lattice point of a flat index (border cells map outside the window).
    pub fn point(&self, mut idx: usize) -> Point {
        let mut p = Point::origin();
        for a in 0..self.dim {
            let q = idx / self.strides[a];
            idx %= self.strides[a];
            p.c[a] = q as i64 - 1 - self.radius + self.center.c[a];
        }
        p
    }

    /// Signed flat offset of a unit step.
    #[inline]
    pub fn offset(&self, dir: Direction) -> isize {
        self.strides[dir.axis()] as isize * dir.sign() as isize
    }

    /// Interior bounds in grid coordinates, inclusive.
    pub fn interior(&self) -> (Vec<usize>, Vec<usize>) {
        (vec![1; self.dim], vec![self.side - 2; self.dim])
    }

    /// Grid-coordinate box of radius `r` around lattice point `x`, clipped to the interior.
    pub fn box_around(&self, x: &Point, r: i64) -> (Vec<usize>, Vec<usize>) {
        let mut lo = vec![0; self.dim];
        let mut hi = vec![0; self.dim];
        for a in 0..self.dim {
            let c = self.local(x, a);
            lo[a] = (c - r).max(1) as usize;
            hi[a] = (c + r).min(self.side as i64 - 2) as usize;
        }
        (lo, hi)
    }

    /// Calls `f(start, len)` for every contiguous run along the last axis of the
    /// box `lo..=hi` (grid coordinates).
    pub fn for_each_run(&self, lo: &[usize], hi: &[usize], mut f: impl FnMut(usize, usize)) {
        let d = self.dim;
        if (0..d).any(|a| lo[a] > hi[a]) {
            return;
        }
        let run = hi[d - 1] - lo[d - 1] + 1;
        let mut cur: Vec<usize> = lo[..d - 1].to_vec();
        loop {
            let mut start = lo[d - 1];
            for a in 0..d - 1 {
                start += cur[a] * self.strides[a];
            }
            f(start, run);
            // odometer over the leading axes
            let mut a = d - 1;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                if cur[a] < hi[a] {
                    cur[a] += 1;
                    cur[(a + 1)..(d - 1)].copy_from_slice(&lo[(a + 1)..(d - 1)]);
                    break;
                } else if a == 0 {
                    return;
                }
            }
        }
    }

    /// Starting indices of every run, in the order `for_each_run` visits them.
    pub fn runs(&self, lo: &[usize], hi: &[usize]) -> (Vec<usize>, usize) {
        let mut starts = Vec::new();
        let mut len = 0;
        self.for_each_run(lo, hi, |s, l| {
            starts.push(s);
            len = l;
        });
        (starts, len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip_and_runs() {
        let g = Grid::new(2, Point::new(&[5, -3]), 2);
        assert_eq!(g.side, 7);
        let x = Point::new(&[6, -5]);
        let i = g.index(&x).unwrap();
        assert_eq!(g.point(i), x);
        assert!(g.index(&Point::new(&[8, -3])).is_none());
        let (lo, hi) = g.interior();
        let mut n = 0;
        g.for_each_run(&lo, &hi, |_, l| n += l);
        assert_eq!(n, 25);
    }

    #[test]
    fn runs_in_three_dimensions() {
        let g = Grid::new(3, Point::origin(), 1);
        let (lo, hi) = g.box_around(&Point::origin(), 1);
        let (starts, len) = g.runs(&lo, &hi);
        assert_eq!(starts.len(), 9);
        assert_eq!(len, 3);
        let g1 = Grid::new(1, Point::origin(), 3);
        let (lo, hi) = g1.interior();
        let (starts, len) = g1.runs(&lo, &hi);
        assert_eq!((starts.len(), len), (1, 7));
    }
}
