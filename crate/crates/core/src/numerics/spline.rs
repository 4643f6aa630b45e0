use alloc::vec;
use alloc::vec::Vec;

/// Equally spaced nodes `start + i * step`, `i < len`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UniformGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl UniformGrid {
    pub fn spanning(start: f64, end: f64, len: usize) -> Self {
        debug_assert!(len >= 2 && end > start);
        Self {
            start,
            step: (end - start) / (len - 1) as f64,
            len,
        }
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    #[inline]
    pub fn end(&self) -> f64 {
        self.node(self.len - 1)
    }

    /// Interval index and fractional position, clamped to the grid.
    #[inline]
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let s = (t - self.start) / self.step;
        let last = self.len - 2;
        let i = if s <= 0.0 {
            0
        } else {
            (libm::floor(s) as usize).min(last)
        };
        (i, s - i as f64)
    }
}

/// Natural cubic spline through values on a [`UniformGrid`].
///
/// The spline is linear in the data, which the fitting code relies on:
/// interpolating many rows and then combining them gives the same result as
/// combining first.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    grid: UniformGrid,
    y: Vec<f64>,
    m: Vec<f64>,
}

/// Per-point weights `(a, b, c, d)` so that
/// `S(t) = a*y[i] + b*y[i+1] + c*m[i] + d*m[i+1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineWeights {
    pub index: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl CubicSpline {
    pub fn new(grid: UniformGrid, y: Vec<f64>) -> Self {
        assert_eq!(grid.len, y.len());
        let m = Self::second_derivatives(&grid, &y);
        Self { grid, y, m }
    }

    /// Node second derivatives of the natural spline (Thomas algorithm on
    /// the tridiagonal `[1 4 1]` system).
    pub fn second_derivatives(grid: &UniformGrid, y: &[f64]) -> Vec<f64> {
        let n = y.len();
        let mut m = vec![0.0; n];
        if n < 3 {
            return m;
        }
        let scale = 6.0 / (grid.step * grid.step);
        let inner = n - 2;
        let mut c = vec![0.0; inner];
        let mut d = vec![0.0; inner];
        for k in 0..inner {
            let i = k + 1;
            let rhs = scale * (y[i + 1] - 2.0 * y[i] + y[i - 1]);
            if k == 0 {
                c[0] = 1.0 / 4.0;
                d[0] = rhs / 4.0;
            } else {
                let denom = 4.0 - c[k - 1];
                c[k] = 1.0 / denom;
                d[k] = (rhs - d[k - 1]) / denom;
            }
        }
        for k in (0..inner).rev() {
            let next = if k + 1 < inner { m[k + 2] } else { 0.0 };
            m[k + 1] = d[k] - c[k] * next;
        }
        m
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn curvatures(&self) -> &[f64] {
        &self.m
    }

    /// Interpolation weights at `t`. Outside the grid the spline is
    /// continued linearly with its end slope.
    pub fn weights(grid: &UniformGrid, t: f64) -> SplineWeights {
        let h = grid.step;
        let (i, u) = grid.locate(t);
        let h2 = h * h / 6.0;
        if u < 0.0 || u > 1.0 {
            // linear continuation: S(t_e) + S'(t_e) (t - t_e)
            let (at_end, dt) = if u < 0.0 { (0.0, u * h) } else { (1.0, (u - 1.0) * h) };
            let (a_end, b_end) = (1.0 - at_end, at_end);
            // S' = (y1 - y0)/h - (3A^2 - 1) h/6 m0 + (3B^2 - 1) h/6 m1
            let dm0 = -(3.0 * a_end * a_end - 1.0) * h / 6.0;
            let dm1 = (3.0 * b_end * b_end - 1.0) * h / 6.0;
            return SplineWeights {
                index: i,
                a: a_end - dt / h,
                b: b_end + dt / h,
                c: dm0 * dt,
                d: dm1 * dt,
            };
        }
        let a = 1.0 - u;
        let b = u;
        SplineWeights {
            index: i,
            a,
            b,
            c: (a * a * a - a) * h2,
            d: (b * b * b - b) * h2,
        }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let w = Self::weights(&self.grid, t);
        let i = w.index;
        w.a * self.y[i] + w.b * self.y[i + 1] + w.c * self.m[i] + w.d * self.m[i + 1]
    }
}
