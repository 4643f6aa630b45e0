use alloc::vec::Vec;

use super::{AnalyticError, RatioDensity};
use crate::numerics::{gauss_legendre, CubicSpline, UniformGrid};

/// Log-spaced grid of ratios `r_min .. r_max` with `points` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RatioGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
}

impl Default for RatioGrid {
    fn default() -> Self {
        Self { r_min: 1e-3, r_max: 1e3, points: 400 }
    }
}

impl RatioGrid {
    pub fn validate(&self) -> Result<(), AnalyticError> {
        if !(self.r_min > 0.0 && self.r_max > self.r_min && self.r_max.is_finite()) {
            return Err(AnalyticError::Table("grid needs 0 < r_min < r_max < inf"));
        }
        if self.points < 4 {
            return Err(AnalyticError::Table("grid needs at least 4 points"));
        }
        Ok(())
    }

    /// The grid in `t = ln r`.
    pub fn log_grid(&self) -> UniformGrid {
        UniformGrid::spanning(libm::log(self.r_min), libm::log(self.r_max), self.points)
    }

    pub fn ratios(&self) -> Vec<f64> {
        let g = self.log_grid();
        (0..g.len).map(|i| libm::exp(g.node(i))).collect()
    }
}

/// A ratio density cached on a [`RatioGrid`].
///
/// `ln p` is interpolated in `ln r` by a natural cubic spline. The CDF is
/// accumulated interval by interval with Gauss-Legendre on the interpolant;
/// the mass below `r_min` and above `r_max` is integrated from the exact
/// density and extended as power laws matching the density at the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTable {
    grid: RatioGrid,
    spline: CubicSpline,
    cdf_nodes: Vec<f64>,
    head: f64,
    head_exponent: f64,
    tail: f64,
    tail_exponent: f64,
    total: f64,
}

impl DensityTable {
    pub fn build<F>(grid: RatioGrid, mut pdf: F) -> Result<Self, AnalyticError>
    where
        F: FnMut(f64) -> Result<f64, AnalyticError>,
    {
        grid.validate()?;
        let lg = grid.log_grid();
        let mut ln_p = Vec::with_capacity(grid.points);
        for r in grid.ratios() {
            let p = pdf(r)?;
            if !(p > 0.0 && p.is_finite()) {
                return Err(AnalyticError::Table("density must be positive on the grid"));
            }
            ln_p.push(libm::log(p));
        }
        let mut failure = None;
        let mut exact = |r: f64| match pdf(r) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        };
        let head = gauss_legendre(&mut exact, 0.0, grid.r_min);
        let tail = gauss_legendre(|s| exact(1.0 / s) / (s * s), 0.0, 1.0 / grid.r_max);
        if let Some(e) = failure {
            return Err(e);
        }
        if !(head > 0.0 && tail > 0.0) {
            return Err(AnalyticError::Table("vanishing mass outside the grid"));
        }
        let spline = CubicSpline::new(lg, ln_p);
        let mut cdf_nodes = Vec::with_capacity(grid.points);
        let mut acc = head;
        cdf_nodes.push(acc);
        for i in 0..grid.points - 1 {
            acc += gauss_legendre(|t| libm::exp(spline.eval(t) + t), lg.node(i), lg.node(i + 1));
            cdf_nodes.push(acc);
        }
        let values = spline.values();
        let head_exponent = libm::exp(values[0]) * grid.r_min / head;
        let tail_exponent = libm::exp(values[grid.points - 1]) * grid.r_max / tail;
        Ok(Self {
            grid,
            spline,
            total: acc + tail,
            cdf_nodes,
            head,
            head_exponent,
            tail,
            tail_exponent,
        })
    }

    pub fn from_density(density: &RatioDensity, grid: RatioGrid) -> Result<Self, AnalyticError> {
        Self::build(grid, |r| density.pdf(r))
    }

    pub fn grid(&self) -> RatioGrid {
        self.grid
    }

    /// `ln p` at the grid nodes.
    pub fn ln_values(&self) -> &[f64] {
        self.spline.values()
    }

    /// Mass of the table including both power-law ends; not forced to 1.
    pub fn total_mass(&self) -> f64 {
        self.total
    }

    pub fn ln_pdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if r < self.grid.r_min {
            let q = self.head_exponent;
            libm::log(q * self.head / self.grid.r_min) + (q - 1.0) * libm::log(r / self.grid.r_min)
        } else if r > self.grid.r_max {
            let q = self.tail_exponent;
            libm::log(q * self.tail / self.grid.r_max) - (q + 1.0) * libm::log(r / self.grid.r_max)
        } else {
            self.spline.eval(libm::log(r))
        }
    }

    pub fn pdf(&self, r: f64) -> f64 {
        libm::exp(self.ln_pdf(r))
    }

    pub fn cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r < self.grid.r_min {
            return self.head * libm::pow(r / self.grid.r_min, self.head_exponent);
        }
        if r >= self.grid.r_max {
            return self.total - self.tail * libm::pow(r / self.grid.r_max, -self.tail_exponent);
        }
        let lg = self.spline.grid();
        let t = libm::log(r);
        let (i, _) = lg.locate(t);
        let start = lg.node(i);
        let partial = if t > start {
            gauss_legendre(|s| libm::exp(self.spline.eval(s) + s), start, t)
        } else {
            0.0
        };
        self.cdf_nodes[i] + partial
    }
}
