//! Nonnegative cell-averaged densities and the integral functionals tracked
//! along a run: mass, Lebesgue norms, second moment and sup norm.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::scalar::Real;

/// Negative noise below `CLAMP_FRACTION * sup` is reset to zero.
pub const CLAMP_FRACTION: f64 = 1e-14;

/// A radial density, one nonnegative average per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField<T> {
    grid: Arc<RadialGrid<T>>,
    values: Vec<T>,
}

impl<T: Real> DensityField<T> {
    /// Wraps cell values, clamping round-off negatives and rejecting real ones.
    pub fn new(grid: Arc<RadialGrid<T>>, mut values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        let mut sup = T::zero();
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Domain(format!("non-finite density {v} in cell {i}")));
            }
            sup = sup.max(v);
        }
        let floor = -T::lit(CLAMP_FRACTION) * sup;
        for (i, v) in values.iter_mut().enumerate() {
            if *v < T::zero() {
                if *v < floor {
                    return Err(Error::Domain(format!("negative density {v} in cell {i}")));
                }
                *v = T::zero();
            }
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid<T>>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![T::zero(); n],
        }
    }

    /// Samples `profile(r)` at cell centres.
    pub fn from_profile(grid: Arc<RadialGrid<T>>, profile: impl Fn(T) -> T) -> Result<Self> {
        let values = grid.centers().iter().map(|&r| profile(r)).collect();
        Self::new(grid, values)
    }

    /// Exact cell average of the indicator of the ball of radius `radius`, times `height`.
    pub fn ball(grid: Arc<RadialGrid<T>>, radius: T, height: T) -> Result<Self> {
        let d = grid.dim() as i32;
        let values = grid
            .edges()
            .windows(2)
            .map(|e| {
                if e[1] <= radius {
                    height
                } else if e[0] >= radius {
                    T::zero()
                } else {
                    height * (radius.powi(d) - e[0].powi(d)) / (e[1].powi(d) - e[0].powi(d))
                }
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<RadialGrid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// `lambda * f` for `lambda >= 0`.
    pub fn scaled(&self, lambda: T) -> Result<Self> {
        if lambda < T::zero() {
            return Err(Error::Domain(format!("negative scale factor {lambda}")));
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| v * lambda).collect(),
        })
    }

    /// Rescales to the requested mass; fails on an empty field.
    pub fn with_mass(&self, target: T) -> Result<Self> {
        let m = self.mass();
        if !(m > T::zero()) {
            return Err(Error::Domain(
                "cannot normalise a field of zero mass".into(),
            ));
        }
        self.scaled(target / m)
    }

    pub fn mass(&self) -> T {
        dot(&self.values, self.grid.volumes())
    }

    /// `(int f^p)^{1/p}` for `p >= 1`.
    pub fn lp_norm(&self, p: T) -> Result<T> {
        Ok(self.pth_power_integral(p)?.powf(T::one() / p))
    }

    /// `int f^p`.
    pub fn pth_power_integral(&self, p: T) -> Result<T> {
        if !(p >= T::one()) {
            return Err(Error::InvalidExponent(p.to_f64_lossy()));
        }
        Ok(self
            .values
            .iter()
            .zip(self.grid.volumes())
            .map(|(&f, &v)| {
                if f > T::zero() {
                    f.powf(p) * v
                } else {
                    T::zero()
                }
            })
            .sum())
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &v| m.max(v))
    }

    /// `int |f - g|`.
    pub fn l1_distance(&self, other: &Self) -> Result<T> {
        self.check_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.grid.volumes())
            .map(|((&a, &b), &v)| (a - b).abs() * v)
            .sum())
    }

    /// Fraction of this field's mass in the outermost 5% of cells.
    pub fn outer_mass(&self) -> T {
        let start = self.grid.leak_start();
        dot(&self.values[start..], &self.grid.volumes()[start..])
    }

    pub(crate) fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid.same_layout(&other.grid) {
            Ok(())
        } else {
            Err(Error::Shape("fields live on different grids".into()))
        }
    }

    #[cfg(test)]
    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// `I = int |x|^2 (u + w)`.
pub fn second_moment<T: Real>(u: &DensityField<T>, w: &DensityField<T>) -> Result<T> {
    u.check_grid(w)?;
    Ok(u.grid
        .centers()
        .iter()
        .zip(u.grid.volumes())
        .zip(u.values.iter().zip(&w.values))
        .map(|((&r, &vol), (&a, &b))| r * r * (a + b) * vol)
        .sum())
}
