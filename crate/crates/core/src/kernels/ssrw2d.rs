//! Exact potential kernel of the simple symmetric walk on `Z^2`.
//!
//! Every value has the form `r + s/π` with `r, s` rational. Writing
//! `a = -J` for the classical potential kernel, the table is generated from
//!
//! * `a(0,0) = 0`, `a(1,0) = 1`, `a(1,1) = 4/π`,
//! * the diagonal `a(n,n) = (4/π) Σ_{k=1}^{n} 1/(2k-1)`,
//! * invariance under the dihedral group of the square,
//! * the mean-value relation `a(x) = ¼ Σ_e a(x+e)` for `x ≠ 0`,
//!
//! sweeping columns `x₁ = 1, 2, …` of the sector `0 ≤ x₂ ≤ x₁`. The relation is
//! numerically unstable in floating point, so the sweep runs in exact rational
//! arithmetic and converts to `f64` only at the end.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::{LabError, Result};
use crate::lattice::Point;

/// π to 60 significant digits; used only when converting `s/π` to `f64`.
const PI_DIGITS: &str = "314159265358979323846264338327950288419716939937510582097494";

/// `rational + inv_pi / π`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactKernelValue {
    pub rational: BigRational,
    pub inv_pi: BigRational,
}

impl ExactKernelValue {
    fn new(r: BigRational, s: BigRational) -> Self {
        ExactKernelValue {
            rational: r,
            inv_pi: s,
        }
    }

    fn int(r: i64, s: i64) -> Self {
        Self::new(
            BigRational::from_integer(r.into()),
            BigRational::from_integer(s.into()),
        )
    }

    fn lin(&self, k: i64, other: &Self) -> Self {
        // self * k + other
        let k = BigRational::from_integer(k.into());
        Self::new(
            &self.rational * &k + &other.rational,
            &self.inv_pi * &k + &other.inv_pi,
        )
    }

    fn sub(&self, other: &Self) -> Self {
        Self::new(
            &self.rational - &other.rational,
            &self.inv_pi - &other.inv_pi,
        )
    }

    fn neg(&self) -> Self {
        Self::new(-&self.rational, -&self.inv_pi)
    }

    /// Value rounded to `f64` (exact arithmetic up to the final division).
    pub fn to_f64(&self) -> f64 {
        let digits: BigInt = PI_DIGITS.parse().expect("valid digits");
        let scale = BigInt::from(10u8).pow(PI_DIGITS.len() as u32 - 1);
        let inv_pi = BigRational::new(scale, digits);
        let v = &self.rational + &self.inv_pi * inv_pi;
        v.to_f64().unwrap_or(f64::NAN)
    }

    /// e.g. `8/π - 4`.
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if !self.inv_pi.is_zero() {
            parts.push(format!("{}/π", self.inv_pi));
        }
        if !self.rational.is_zero() || parts.is_empty() {
            parts.push(format!("{}", self.rational));
        }
        parts.join(" + ").replace("+ -", "- ")
    }
}

/// `J(x)` for `|x|_∞ ≤ radius`, stored on the sector `0 ≤ x₂ ≤ x₁`.
#[derive(Debug, Clone)]
pub struct Ssrw2dTable {
    radius: i64,
    /// `sector[x1][x2]` holds the classical kernel `a = -J`.
    sector: Vec<Vec<ExactKernelValue>>,
}

impl Ssrw2dTable {
    pub fn compute(radius: i64) -> Result<Self> {
        if radius < 0 {
            return Err(LabError::InvalidArgument(format!(
                "radius {radius} is negative"
            )));
        }
        let n = radius.max(1) as usize;
        let mut a: Vec<Vec<ExactKernelValue>> = Vec::with_capacity(n + 1);
        a.push(vec![ExactKernelValue::int(0, 0)]);
        a.push(vec![
            ExactKernelValue::int(1, 0),
            ExactKernelValue::int(0, 4),
        ]);
        // running diagonal sum Σ 1/(2k-1)
        let mut diag = BigRational::from_integer(1.into());
        for x in 1..n {
            let mut col = Vec::with_capacity(x + 2);
            for y in 0..x {
                let below = if y == 0 { &a[x][1] } else { &a[x][y - 1] };
                let v = a[x][y]
                    .lin(4, &a[x - 1][y].neg())
                    .sub(&a[x][y + 1])
                    .sub(below);
                col.push(v);
            }
            // mean value at (x,x) with a(x,x+1) = a(x+1,x)
            col.push(a[x][x].lin(2, &a[x][x - 1].neg()));
            diag += BigRational::new(1.into(), BigInt::from(2 * (x + 1) - 1));
            col.push(ExactKernelValue::new(
                BigRational::zero(),
                &diag * BigRational::from_integer(4.into()),
            ));
            a.push(col);
        }
        Ok(Ssrw2dTable { radius, sector: a })
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    /// Exact `J(x)`.
    pub fn exact(&self, x: Point) -> Result<ExactKernelValue> {
        if !x.fits_dim(2) || x.linf() > self.radius {
            return Err(LabError::OutOfTable(format!(
                "{x} (radius {})",
                self.radius
            )));
        }
        let (u, v) = (x.c[0].abs(), x.c[1].abs());
        let (hi, lo) = if u >= v { (u, v) } else { (v, u) };
        Ok(self.sector[hi as usize][lo as usize].neg())
    }

    pub fn value(&self, x: Point) -> Result<f64> {
        Ok(self.exact(x)?.to_f64())
    }
}

/// Exact `J(x)` of the simple symmetric walk on `Z^2`.
pub fn potential_kernel_2d_ssrw(x: Point) -> Result<ExactKernelValue> {
    Ssrw2dTable::compute(x.linf())?.exact(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn reproduces_the_classical_small_values() {
        let t = Ssrw2dTable::compute(4).unwrap();
        assert_eq!(t.value(Point::origin()).unwrap(), 0.0);
        assert_eq!(t.value(Point::new(&[-1, 0])).unwrap(), -1.0);
        assert!((t.value(Point::new(&[1, -1])).unwrap() + 4.0 / PI).abs() < 1e-15);
        assert!((t.value(Point::new(&[2, 0])).unwrap() - (8.0 / PI - 4.0)).abs() < 1e-15);
        assert!((t.value(Point::new(&[0, -2])).unwrap() - (8.0 / PI - 4.0)).abs() < 1e-15);
        // a(2,1) = 8/π - 1, a(3,0) = 17 - 48/π, a(2,2) = 16/(3π)
        assert!((t.value(Point::new(&[1, 2])).unwrap() - (1.0 - 8.0 / PI)).abs() < 1e-14);
        assert!((t.value(Point::new(&[0, 3])).unwrap() - (48.0 / PI - 17.0)).abs() < 1e-13);
        assert!((t.value(Point::new(&[2, 2])).unwrap() + 16.0 / (3.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn exact_forms() {
        let v = potential_kernel_2d_ssrw(Point::new(&[2, 0])).unwrap();
        assert_eq!(v.rational, BigRational::from_integer((-4).into()));
        assert_eq!(v.inv_pi, BigRational::from_integer(8.into()));
        assert_eq!(v.describe(), "8/π - 4");
    }

    #[test]
    fn harmonic_off_origin_and_unit_laplacian_at_origin() {
        let t = Ssrw2dTable::compute(8).unwrap();
        for x in -7i64..=7 {
            for y in -7i64..=7 {
                let p = Point::new(&[x, y]);
                let mean: f64 = [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .map(|(dx, dy)| t.value(Point::new(&[x + dx, y + dy])).unwrap())
                    .sum::<f64>()
                    / 4.0;
                let expect = if p.is_origin() {
                    -1.0
                } else {
                    t.value(p).unwrap()
                };
                assert!((mean - expect).abs() < 1e-9, "{p}: {mean} vs {expect}");
            }
        }
    }

    #[test]
    fn rejects_points_outside_radius() {
        let t = Ssrw2dTable::compute(2).unwrap();
        assert!(t.value(Point::new(&[3, 0])).is_err());
        assert!(t.value(Point::new(&[0, 0, 1])).is_err());
    }
}
