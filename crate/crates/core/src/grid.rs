//! Cell-centred radial discretisation of a ball in R^d.
//!
//! Integrals of radial functions over R^d reduce to weighted sums over
//! spherical shells. Shell volumes are computed in closed form, so piecewise
//! constant integrands are integrated exactly.

use std::sync::Arc;

use libm::tgamma as gamma;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Smallest admissible cell count for [`RadialGrid::new`].
pub const MIN_CELLS: usize = 8;

/// Surface area of the unit sphere S^{d-1}, `2 pi^{d/2} / Gamma(d/2)`.
pub fn sphere_area<T: Real>(d: usize) -> Result<T> {
    if d < 2 {
        return Err(Error::InvalidDimension {
            d,
            reason: "sphere area needs d >= 2",
        });
    }
    let half = d as f64 / 2.0;
    Ok(T::lit(2.0 * std::f64::consts::PI.powf(half) / gamma(half)))
}

/// Uniform radial grid on `[0, r_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid<T> {
    d: usize,
    r_max: T,
    dr: T,
    sigma: T,
    edges: Vec<T>,
    centers: Vec<T>,
    volumes: Vec<T>,
    face_areas: Vec<T>,
}

impl<T: Real> RadialGrid<T> {
    /// Builds a grid of `n` equal-width shells covering `[0, r_max]` in R^d.
    pub fn new(d: usize, r_max: T, n: usize) -> Result<Self> {
        if d < 3 {
            return Err(Error::InvalidDimension {
                d,
                reason: "the cross-attraction system is posed for d >= 3",
            });
        }
        if n < MIN_CELLS {
            return Err(Error::config(
                "n",
                format!("need at least {MIN_CELLS} cells, got {n}"),
            ));
        }
        Self::build(d, r_max, n)
    }

    /// Same as [`RadialGrid::new`] without the lower bound on `n`.
    pub(crate) fn build(d: usize, r_max: T, n: usize) -> Result<Self> {
        if !(r_max > T::zero()) || !r_max.is_finite() {
            return Err(Error::config("r_max", "must be finite and > 0"));
        }
        if n == 0 {
            return Err(Error::config("n", "must be positive"));
        }
        let sigma = sphere_area::<T>(d)?;
        let nf = T::from_usize_exact(n);
        let dr = r_max / nf;
        let mut edges: Vec<T> = (0..=n)
            .map(|i| r_max * T::from_usize_exact(i) / nf)
            .collect();
        edges[n] = r_max;
        let centers = edges
            .windows(2)
            .map(|e| (e[0] + e[1]) / T::lit(2.0))
            .collect();
        let di = d as i32;
        let dd = T::from_usize_exact(d);
        let volumes = edges
            .windows(2)
            .map(|e| sigma * (e[1].powi(di) - e[0].powi(di)) / dd)
            .collect();
        let face_areas = edges.iter().map(|&r| sigma * r.powi(di - 1)).collect();
        Ok(Self {
            d,
            r_max,
            dr,
            sigma,
            edges,
            centers,
            volumes,
            face_areas,
        })
    }

    pub fn shared(self) -> Arc<Self> {
        Arc::new(self)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn r_max(&self) -> T {
        self.r_max
    }

    pub fn dr(&self) -> T {
        self.dr
    }

    /// sigma_d, the area of the unit sphere.
    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn edges(&self) -> &[T] {
        &self.edges
    }

    pub fn centers(&self) -> &[T] {
        &self.centers
    }

    pub fn volumes(&self) -> &[T] {
        &self.volumes
    }

    /// Face areas `sigma_d r_j^{d-1}` at every edge, `n + 1` entries.
    pub fn face_areas(&self) -> &[T] {
        &self.face_areas
    }

    /// Volume of the whole ball, `sigma_d r_max^d / d`.
    pub fn total_volume(&self) -> T {
        self.sigma * self.r_max.powi(self.d as i32) / T::from_usize_exact(self.d)
    }

    /// `sum_i f_i vol_i`.
    pub fn integrate(&self, f: &[T]) -> Result<T> {
        if f.len() != self.len() {
            return Err(Error::Shape(format!(
                "integrand has {} entries, grid has {} cells",
                f.len(),
                self.len()
            )));
        }
        Ok(f.iter().zip(&self.volumes).map(|(&a, &v)| a * v).sum())
    }

    /// Index of the first cell of the outer 5% shell used by the mass-leak monitor.
    pub fn leak_start(&self) -> usize {
        let n = self.len();
        let outer = n.div_ceil(20);
        n - outer.max(1)
    }

    /// Two grids are interchangeable when dimension, radius and resolution agree.
    pub fn same_layout(&self, other: &Self) -> bool {
        std::ptr::eq(self, other)
            || (self.d == other.d && self.len() == other.len() && self.r_max == other.r_max)
    }
}
