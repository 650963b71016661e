//! Free-space Newtonian potentials of radial densities.
//!
//! The radial Gauss law gives the field at every cell face exactly from the
//! enclosed mass. Values at cell centres follow by midpoint integration of
//! the face field inward from the monopole far-field value at `r_max`, so the
//! centred difference of the values reproduces the face field exactly.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::DensityField;
use crate::grid::{sphere_area, RadialGrid};
use crate::scalar::Real;

/// Normalisation `c_d = 1 / ((d - 2) sigma_d)` of the Green's function
/// `c_d |x|^{2-d}` of `-Laplace` in R^d.
pub fn green_constant<T: Real>(d: usize) -> Result<T> {
    if d < 3 {
        return Err(Error::InvalidDimension {
            d,
            reason: "the Newtonian kernel |x|^{2-d} needs d >= 3",
        });
    }
    Ok(T::one() / (T::from_usize_exact(d - 2) * sphere_area::<T>(d)?))
}

/// Potential `K * source` sampled at cell centres, with its radial derivative at faces.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField<T> {
    grid: Arc<RadialGrid<T>>,
    values: Vec<T>,
    face_gradient: Vec<T>,
    source_mass: T,
}

impl<T: Real> PotentialField<T> {
    pub fn grid(&self) -> &Arc<RadialGrid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// d/dr of the potential at the `n + 1` faces; zero at the origin.
    pub fn face_gradient(&self) -> &[T] {
        &self.face_gradient
    }

    pub fn source_mass(&self) -> T {
        self.source_mass
    }

    /// Largest relative deviation from another potential on the same grid.
    pub(crate) fn max_relative_deviation(&self, other: &Self) -> T {
        let scale = self
            .values
            .iter()
            .chain(&other.values)
            .fold(T::min_positive_value(), |m, v| m.max(v.abs()));
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs() / scale))
    }
}

/// Solves `-Laplace v = source` in R^d for a radial source.
pub fn solve_potential<T: Real>(source: &DensityField<T>) -> Result<PotentialField<T>> {
    let grid = source.grid().clone();
    let n = grid.len();
    let d = grid.dim();
    let c_d = green_constant::<T>(d)?;
    if let Some(bad) = source.values().iter().find(|&&v| v < T::zero()) {
        return Err(Error::Domain(format!(
            "potential source has negative value {bad}"
        )));
    }

    let mut face_gradient = Vec::with_capacity(n + 1);
    face_gradient.push(T::zero());
    let mut enclosed = T::zero();
    for j in 1..=n {
        enclosed = enclosed + source.values()[j - 1] * grid.volumes()[j - 1];
        face_gradient.push(-enclosed / grid.face_areas()[j]);
    }

    let dr = grid.dr();
    let far = enclosed * c_d / grid.r_max().powi(d as i32 - 2);
    let mut values = vec![T::zero(); n];
    values[n - 1] = far - face_gradient[n] * dr / T::lit(2.0);
    for i in (0..n - 1).rev() {
        values[i] = values[i + 1] - face_gradient[i + 1] * dr;
    }

    Ok(PotentialField {
        grid,
        values,
        face_gradient,
        source_mass: enclosed,
    })
}
