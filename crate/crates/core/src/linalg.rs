//! Symmetric 3×3 matrices: determinant, trace, closed-form eigenvalues, signature.

use std::f64::consts::PI;
use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

/// Upper triangle of a symmetric 3×3 matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sym3 {
    pub m11: f64,
    pub m12: f64,
    pub m13: f64,
    pub m22: f64,
    pub m23: f64,
    pub m33: f64,
}

/// Eigenvalue sign counts `(positive, negative, zero)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub pos: usize,
    pub neg: usize,
    pub zero: usize,
}

impl Signature {
    /// The signature `(1, 2)` with no zero eigenvalue.
    pub const ONE_TWO: Signature = Signature {
        pos: 1,
        neg: 2,
        zero: 0,
    };
}

impl Sym3 {
    pub const fn new(m11: f64, m12: f64, m13: f64, m22: f64, m23: f64, m33: f64) -> Self {
        Sym3 {
            m11,
            m12,
            m13,
            m22,
            m23,
            m33,
        }
    }

    pub const fn diag(a: f64, b: f64, c: f64) -> Self {
        Sym3::new(a, 0.0, 0.0, b, 0.0, c)
    }

    /// Entries in the order `11, 12, 13, 22, 23, 33`.
    pub fn to_array(self) -> [f64; 6] {
        [self.m11, self.m12, self.m13, self.m22, self.m23, self.m33]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Sym3::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i.min(j), i.max(j)) {
            (0, 0) => self.m11,
            (0, 1) => self.m12,
            (0, 2) => self.m13,
            (1, 1) => self.m22,
            (1, 2) => self.m23,
            (2, 2) => self.m33,
            _ => panic!("index ({i}, {j}) out of range"),
        }
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22 + self.m33
    }

    pub fn det(&self) -> f64 {
        self.m11 * (self.m22 * self.m33 - self.m23 * self.m23)
            - self.m12 * (self.m12 * self.m33 - self.m23 * self.m13)
            + self.m13 * (self.m12 * self.m23 - self.m22 * self.m13)
    }

    /// First-order bound on the determinant error given absolute errors of the entries.
    pub fn det_error(&self, err: &Sym3) -> f64 {
        // |∂det/∂a_ij| is the cofactor; off-diagonal entries appear twice.
        let c11 = (self.m22 * self.m33 - self.m23 * self.m23).abs();
        let c22 = (self.m11 * self.m33 - self.m13 * self.m13).abs();
        let c33 = (self.m11 * self.m22 - self.m12 * self.m12).abs();
        let c12 = (self.m12 * self.m33 - self.m13 * self.m23).abs();
        let c13 = (self.m12 * self.m23 - self.m13 * self.m22).abs();
        let c23 = (self.m11 * self.m23 - self.m12 * self.m13).abs();
        c11 * err.m11.abs()
            + c22 * err.m22.abs()
            + c33 * err.m33.abs()
            + 2.0 * (c12 * err.m12.abs() + c13 * err.m13.abs() + c23 * err.m23.abs())
    }

    /// Eigenvalues in ascending order (trigonometric closed form).
    pub fn eigenvalues(&self) -> [f64; 3] {
        let p1 = self.m12 * self.m12 + self.m13 * self.m13 + self.m23 * self.m23;
        let q = self.trace() / 3.0;
        if p1 == 0.0 {
            let mut e = [self.m11, self.m22, self.m33];
            e.sort_by(f64::total_cmp);
            return e;
        }
        let p2 =
            (self.m11 - q).powi(2) + (self.m22 - q).powi(2) + (self.m33 - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let b = Sym3::new(
            (self.m11 - q) / p,
            self.m12 / p,
            self.m13 / p,
            (self.m22 - q) / p,
            self.m23 / p,
            (self.m33 - q) / p,
        );
        let r = (b.det() / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let largest = q + 2.0 * p * phi.cos();
        let smallest = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
        let middle = 3.0 * q - largest - smallest;
        let mut e = [smallest, middle, largest];
        e.sort_by(f64::total_cmp);
        e
    }

    /// Sign counts of the eigenvalues with zero threshold `rel_tol × max |λ|`.
    pub fn signature(&self, rel_tol: f64) -> Signature {
        let e = self.eigenvalues();
        let scale = e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tau = rel_tol * scale;
        let mut s = Signature {
            pos: 0,
            neg: 0,
            zero: 0,
        };
        for v in e {
            if v > tau {
                s.pos += 1;
            } else if v < -tau {
                s.neg += 1;
            } else {
                s.zero += 1;
            }
        }
        s
    }

    /// `Rᵀ H R` for the rotation `R` of the first two axes by `angle`
    /// (columns of `R` are the rotated local axes).
    pub fn rotate_12(&self, angle: f64) -> Sym3 {
        let (s, c) = angle.sin_cos();
        // Local axes e1' = (c, s, 0), e2' = (−s, c, 0), e3' = e3.
        let a = [[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]];
        let entry = |i: usize, j: usize| {
            let mut acc = 0.0;
            for k in 0..3 {
                for l in 0..3 {
                    acc += a[i][k] * self.get(k, l) * a[j][l];
                }
            }
            acc
        };
        Sym3::new(
            entry(0, 0),
            entry(0, 1),
            entry(0, 2),
            entry(1, 1),
            entry(1, 2),
            entry(2, 2),
        )
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Sym3 {
        Sym3::from_array(self.to_array().map(f))
    }
}

impl Add for Sym3 {
    type Output = Sym3;

    fn add(self, o: Sym3) -> Sym3 {
        let (a, b) = (self.to_array(), o.to_array());
        Sym3::from_array(std::array::from_fn(|i| a[i] + b[i]))
    }
}

impl Mul<Sym3> for f64 {
    type Output = Sym3;

    fn mul(self, m: Sym3) -> Sym3 {
        m.map(|v| self * v)
    }
}
