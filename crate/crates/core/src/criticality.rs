//! Sharp Hardy-Littlewood-Sobolev constant, the criticality classification of
//! the diffusion weights, and negative-energy initial data.
//!
//! For the Newtonian kernel `|x-y|^{2-d}` and `p = q = 2d/(d+2)`, Lieb's sharp
//! constant is
//!
//! ```text
//! C_HLS = pi^{mu/2} Gamma((d-mu)/2) / Gamma(d - mu/2) * (Gamma(d/2) / Gamma(d))^{-1 + mu/d},   mu = d - 2,
//! ```
//!
//! attained by `(1 + |x|^2)^{-(d+2)/2}`. The free energy is nonnegative for all
//! densities exactly when `2 sqrt(a1 a2) / c_d >= C_HLS`.

use std::fmt;
use std::sync::Arc;

use libm::tgamma;

use crate::energy::{check_alpha, free_energy};
use crate::error::{Error, Result};
use crate::fields::{second_moment, DensityField};
use crate::grid::RadialGrid;
use crate::potential::green_constant;
use crate::scalar::{critical_exponent, Real};

/// Half-width of the band around ratio 1 reported as critical.
pub const CRITICAL_BAND: f64 = 1e-9;

/// Blow-up data are optimizers cut off at this many scale lengths.
pub const TRUNCATION_SCALES: f64 = 20.0;

/// Lieb's sharp HLS constant for the diagonal Newtonian case in R^d.
pub fn hls_sharp_constant<T: Real>(d: usize) -> Result<T> {
    if d < 3 {
        return Err(Error::InvalidDimension {
            d,
            reason: "the Newtonian HLS inequality needs d >= 3",
        });
    }
    let df = d as f64;
    let mu = df - 2.0;
    let pi = std::f64::consts::PI;
    let c = pi.powf(mu / 2.0) * tgamma((df - mu) / 2.0) / tgamma(df - mu / 2.0)
        * (tgamma(df / 2.0) / tgamma(df)).powf(-1.0 + mu / df);
    Ok(T::lit(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalityClass {
    Subcritical,
    Critical,
    Supercritical,
}

impl fmt::Display for CriticalityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CriticalityClass::Subcritical => "Subcritical",
            CriticalityClass::Critical => "Critical",
            CriticalityClass::Supercritical => "Supercritical",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalityVerdict<T> {
    pub d: usize,
    pub alpha1: T,
    pub alpha2: T,
    pub c_d: T,
    pub c_hls: T,
    /// `2 sqrt(a1 a2) / (c_d C_HLS)`.
    pub ratio: T,
    /// `C_HLS - 2 sqrt(a1 a2) / c_d`.
    pub delta: T,
    pub class: CriticalityClass,
}

impl<T: Real> CriticalityVerdict<T> {
    pub const CSV_HEADER: [&'static str; 8] = [
        "d", "alpha1", "alpha2", "c_d", "C_HLS", "ratio", "delta", "class",
    ];

    pub fn csv_row(&self) -> [String; 8] {
        [
            self.d.to_string(),
            self.alpha1.to_string(),
            self.alpha2.to_string(),
            self.c_d.to_string(),
            self.c_hls.to_string(),
            self.ratio.to_string(),
            self.delta.to_string(),
            self.class.to_string(),
        ]
    }
}

/// Places `(a1, a2)` relative to the sharp threshold in dimension `d`.
pub fn classify<T: Real>(d: usize, alpha1: T, alpha2: T) -> Result<CriticalityVerdict<T>> {
    check_alpha("alpha1", alpha1)?;
    check_alpha("alpha2", alpha2)?;
    let c_d = green_constant::<T>(d)?;
    let c_hls = hls_sharp_constant::<T>(d)?;
    let weight = T::lit(2.0) * (alpha1 * alpha2).sqrt();
    let ratio = weight / (c_d * c_hls);
    let delta = c_hls - weight / c_d;
    let class = if (ratio - T::one()).abs() <= T::lit(CRITICAL_BAND) {
        CriticalityClass::Critical
    } else if ratio > T::one() {
        CriticalityClass::Subcritical
    } else {
        CriticalityClass::Supercritical
    };
    Ok(CriticalityVerdict {
        d,
        alpha1,
        alpha2,
        c_d,
        c_hls,
        ratio,
        delta,
        class,
    })
}

/// Equal weights `a1 = a2 = a` at which the ratio equals one: `a = c_d C_HLS / 2`.
pub fn critical_alpha<T: Real>(d: usize) -> Result<T> {
    Ok(green_constant::<T>(d)? * hls_sharp_constant::<T>(d)? / T::lit(2.0))
}

/// The HLS optimizer `(1 + (r/scale)^2)^{-(d+2)/2}` scaled to `target_mass`.
pub fn hls_optimizer<T: Real>(
    grid: &Arc<RadialGrid<T>>,
    scale: T,
    target_mass: T,
) -> Result<DensityField<T>> {
    optimizer_profile(grid, scale, target_mass, None)
}

/// As [`hls_optimizer`] but zero beyond `TRUNCATION_SCALES * scale`, then renormalised.
pub fn truncated_optimizer<T: Real>(
    grid: &Arc<RadialGrid<T>>,
    scale: T,
    target_mass: T,
) -> Result<DensityField<T>> {
    optimizer_profile(
        grid,
        scale,
        target_mass,
        Some(T::lit(TRUNCATION_SCALES) * scale),
    )
}

fn optimizer_profile<T: Real>(
    grid: &Arc<RadialGrid<T>>,
    scale: T,
    target_mass: T,
    cutoff: Option<T>,
) -> Result<DensityField<T>> {
    if !(scale > T::zero()) || !scale.is_finite() {
        return Err(Error::config("scale", "must be finite and > 0"));
    }
    if !(target_mass > T::zero()) || !target_mass.is_finite() {
        return Err(Error::config("mass", "target mass must be finite and > 0"));
    }
    let expo = -T::from_usize_exact(grid.dim() + 2) / T::lit(2.0);
    let field = DensityField::from_profile(grid.clone(), |r| match cutoff {
        Some(c) if r > c => T::zero(),
        _ => {
            let x = r / scale;
            (T::one() + x * x).powf(expo)
        }
    })?;
    field.with_mass(target_mass)
}

/// Discrete HLS quotient `H[f, f] / |f|^2_{2d/(d+2)}`.
pub fn rayleigh_quotient<T: Real>(f: &DensityField<T>) -> Result<T> {
    let norm = f.lp_norm(critical_exponent::<T>(f.grid().dim()))?;
    if !(norm > T::zero()) {
        return Err(Error::Domain("quotient of the zero field".into()));
    }
    Ok(crate::energy::interaction_h(f, f)? / (norm * norm))
}

/// Shape parameters for [`make_negative_energy_data`].
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeEnergyOptions<T> {
    pub scale_u: T,
    pub scale_w: T,
    /// Mass of `u0` before any amplification; `w0` is balanced against it.
    pub mass_u: T,
    /// When set, masses are amplified until the virial blow-up bound is at most this.
    pub horizon: Option<T>,
}

impl<T: Real> Default for NegativeEnergyOptions<T> {
    fn default() -> Self {
        Self {
            scale_u: T::one(),
            scale_w: T::one(),
            mass_u: T::one(),
            horizon: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NegativeEnergyData<T> {
    pub u0: DensityField<T>,
    pub w0: DensityField<T>,
    pub energy: T,
    pub virial_rate: T,
    pub second_moment: T,
    /// `2 I(0) / |G(0)|`.
    pub blowup_bound: T,
}

/// Balanced pair of truncated optimizers with negative free energy.
///
/// `w0` is scaled so that `sqrt(a1)|u0| = sqrt(a2)|w0|`, which zeroes the
/// completed square of the energy. Energy is homogeneous of degree two under
/// joint mass scaling while `I` is of degree one, so amplifying both masses by
/// `lambda` divides the blow-up bound `2 I(0)/|G(0)|` by `lambda`.
pub fn make_negative_energy_data<T: Real>(
    d: usize,
    alpha1: T,
    alpha2: T,
    grid: &Arc<RadialGrid<T>>,
    opts: &NegativeEnergyOptions<T>,
) -> Result<NegativeEnergyData<T>> {
    let verdict = classify(d, alpha1, alpha2)?;
    if verdict.class != CriticalityClass::Supercritical {
        return Err(Error::Domain(format!(
            "({alpha1}, {alpha2}) is {} in d = {d}; the free energy cannot be negative",
            verdict.class
        )));
    }
    if grid.dim() != d {
        return Err(Error::Shape(format!(
            "grid dimension {} differs from d = {d}",
            grid.dim()
        )));
    }
    let p = critical_exponent::<T>(d);
    let u0 = truncated_optimizer(grid, opts.scale_u, opts.mass_u)?;
    let shape_w = truncated_optimizer(grid, opts.scale_w, T::one())?;
    let target = alpha1.sqrt() * u0.lp_norm(p)? / alpha2.sqrt();
    let w0 = shape_w.scaled(target / shape_w.lp_norm(p)?)?;

    let measure = |u0: DensityField<T>, w0: DensityField<T>| -> Result<NegativeEnergyData<T>> {
        let energy = free_energy(&u0, &w0, alpha1, alpha2)?;
        let virial_rate = T::from_usize_exact(2 * (d - 2)) * energy;
        let i0 = second_moment(&u0, &w0)?;
        let blowup_bound = T::lit(2.0) * i0 / virial_rate.abs();
        Ok(NegativeEnergyData {
            u0,
            w0,
            energy,
            virial_rate,
            second_moment: i0,
            blowup_bound,
        })
    };
    let data = measure(u0, w0)?;
    if !(data.energy < T::zero()) {
        return Err(Error::Domain(format!(
            "balanced optimizers have E = {} >= 0 on this grid; refine the grid or widen r_max",
            data.energy
        )));
    }
    match opts.horizon {
        Some(h) if h > T::zero() && data.blowup_bound > h => {
            let lambda = data.blowup_bound / h;
            measure(data.u0.scaled(lambda)?, data.w0.scaled(lambda)?)
        }
        Some(h) if !(h > T::zero()) => Err(Error::config("horizon", "must be > 0")),
        _ => Ok(data),
    }
}
