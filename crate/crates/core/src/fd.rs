//! Finite differences on a rectangular `(u, v)` grid, periodic in `v`.

use std::ops::{Add, Mul};

use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Stencil width for all derivatives.
pub const WIDTH: usize = 7;

/// Fornberg weights: `w[m][k]` approximates the m-th derivative at `z` from samples at `x[k]`.
pub fn fornberg(z: f64, x: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

pub trait Sample: Copy + Add<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
}

impl Sample for f64 {
    fn zero() -> Self {
        0.0
    }
}

impl Sample for Vec3 {
    fn zero() -> Self {
        Vec3::zeros()
    }
}

/// Uniform grid `u_i = u0 + i du` for `i < nu` with `u_{nu-1} = u1`, and
/// `v_j = j dv` for `j < nv` with `dv = 2 pi / nv`. Fields are stored row-major in `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nu: usize,
    pub nv: usize,
    pub u0: f64,
    pub u1: f64,
    du: f64,
    dv: f64,
    /// Per-row stencil start and weights for the first and second u-derivatives.
    u_weights: Vec<(usize, [f64; WIDTH], [f64; WIDTH])>,
    v_weights: ([f64; WIDTH], [f64; WIDTH]),
}

impl Grid {
    pub fn new(nu: usize, nv: usize, u0: f64, u1: f64) -> Result<Self> {
        if nu < WIDTH || nv < WIDTH {
            return Err(Error::DegenerateGrid(format!("grid {nu}x{nv} is smaller than the {WIDTH}-point stencil")));
        }
        let du = (u1 - u0) / (nu - 1) as f64;
        if !(du.is_finite() && du > 0.0) {
            return Err(Error::DegenerateGrid(format!("u-range [{u0}, {u1}] has duplicate nodes")));
        }
        let dv = 2.0 * std::f64::consts::PI / nv as f64;
        let half = WIDTH / 2;
        let to_arr = |w: &[f64]| -> [f64; WIDTH] { w.try_into().unwrap() };
        let u_weights = (0..nu)
            .map(|i| {
                let start = i.saturating_sub(half).min(nu - WIDTH);
                let x: Vec<f64> = (0..WIDTH).map(|k| (start + k) as f64 - i as f64).collect();
                let w = fornberg(0.0, &x, 2);
                (start, to_arr(&w[1]), to_arr(&w[2]))
            })
            .collect();
        let x: Vec<f64> = (0..WIDTH).map(|k| k as f64 - half as f64).collect();
        let w = fornberg(0.0, &x, 2);
        Ok(Self { nu, nv, u0, u1, du, dv, u_weights, v_weights: (to_arr(&w[1]), to_arr(&w[2])) })
    }

    pub fn len(&self) -> usize {
        self.nu * self.nv
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nv + j % self.nv
    }

    pub fn u(&self, i: usize) -> f64 {
        if i + 1 == self.nu {
            self.u1
        } else {
            self.u0 + i as f64 * self.du
        }
    }

    pub fn v(&self, j: usize) -> f64 {
        j as f64 * self.dv
    }

    pub fn du(&self) -> f64 {
        self.du
    }

    pub fn dv(&self) -> f64 {
        self.dv
    }

    /// Derivative of order 1 or 2 in `u` at node `(i, j)`.
    pub fn d_u<T: Sample>(&self, f: &[T], i: usize, j: usize, order: usize) -> T {
        let (start, w1, w2) = &self.u_weights[i];
        let (w, scale) = if order == 1 { (w1, self.du) } else { (w2, self.du * self.du) };
        let mut acc = T::zero();
        for k in 0..WIDTH {
            acc = acc + f[self.index(start + k, j)] * w[k];
        }
        acc * (1.0 / scale)
    }

    /// Derivative of order 1 or 2 in `v` at node `(i, j)`.
    pub fn d_v<T: Sample>(&self, f: &[T], i: usize, j: usize, order: usize) -> T {
        let (w, scale) = if order == 1 { (&self.v_weights.0, self.dv) } else { (&self.v_weights.1, self.dv * self.dv) };
        let half = WIDTH / 2;
        let mut acc = T::zero();
        for k in 0..WIDTH {
            let jj = (j + self.nv * 2 + k - half) % self.nv;
            acc = acc + f[self.index(i, jj)] * w[k];
        }
        acc * (1.0 / scale)
    }

    pub fn d_uv<T: Sample>(&self, f: &[T], i: usize, j: usize) -> T {
        let (start, w1, _) = &self.u_weights[i];
        let mut acc = T::zero();
        for k in 0..WIDTH {
            acc = acc + self.d_v(f, start + k, j, 1) * w1[k];
        }
        acc * (1.0 / self.du)
    }
}
