//! Free energy, its HLS-adapted decomposition, the virial rate of the second
//! moment and the entropy dissipation.
//!
//! With `p = 2d/(d+2)` and `v = K * w`,
//!
//! ```text
//! E = a1 |u|_p^2 + a2 |w|_p^2 - c_d H[u, w],     c_d H[u, w] = int u v,
//! G = dI/dt = 2 (d - 2) E.
//! ```

use crate::dynamics::SystemState;
use crate::error::{Error, Result};
use crate::fields::{second_moment, DensityField};
use crate::potential::{green_constant, solve_potential, PotentialField};
use crate::scalar::{coefficient_exponent, critical_exponent, Real};

/// Relative tolerance used when checking cached potentials against a fresh solve.
const POTENTIAL_STALENESS_TOL: f64 = 1e-12;

/// Checks the admissible range `(0, 1]` of a diffusion weight.
pub fn check_alpha<T: Real>(name: &str, alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha <= T::one() {
        Ok(())
    } else {
        Err(Error::config(name, format!("{alpha} is outside (0, 1]")))
    }
}

fn check_alphas<T: Real>(alpha1: T, alpha2: T) -> Result<()> {
    check_alpha("alpha1", alpha1)?;
    check_alpha("alpha2", alpha2)
}

/// `sum_i u_i v_i vol_i`.
fn pair_integral<T: Real>(u: &DensityField<T>, v: &PotentialField<T>) -> T {
    u.values()
        .iter()
        .zip(v.values())
        .zip(u.grid().volumes())
        .map(|((&a, &b), &vol)| a * b * vol)
        .sum()
}

/// Newtonian cross interaction `H[u, w] = int int u(x) w(y) |x - y|^{2-d}`.
pub fn interaction_h<T: Real>(u: &DensityField<T>, w: &DensityField<T>) -> Result<T> {
    u.check_grid(w)?;
    let c_d = green_constant::<T>(u.grid().dim())?;
    let v = solve_potential(w)?;
    Ok(pair_integral(u, &v) / c_d)
}

/// Critical-norm pair `(|u|_p, |w|_p)`.
fn critical_norms<T: Real>(u: &DensityField<T>, w: &DensityField<T>) -> Result<(T, T)> {
    let p = critical_exponent::<T>(u.grid().dim());
    Ok((u.lp_norm(p)?, w.lp_norm(p)?))
}

/// `E_alpha[u, w]`.
pub fn free_energy<T: Real>(
    u: &DensityField<T>,
    w: &DensityField<T>,
    alpha1: T,
    alpha2: T,
) -> Result<T> {
    check_alphas(alpha1, alpha2)?;
    let (nu, nw) = critical_norms(u, w)?;
    let c_d = green_constant::<T>(u.grid().dim())?;
    let h = interaction_h(u, w)?;
    Ok(alpha1 * nu * nu + alpha2 * nw * nw - c_d * h)
}

/// Splits `E` into the completed square and the HLS residual:
/// `E_square = (sqrt(a1)|u| - sqrt(a2)|w|)^2`, `E_residual = 2 sqrt(a1 a2)|u||w| - c_d H`.
pub fn energy_decomposition<T: Real>(
    u: &DensityField<T>,
    w: &DensityField<T>,
    alpha1: T,
    alpha2: T,
) -> Result<(T, T)> {
    check_alphas(alpha1, alpha2)?;
    let (nu, nw) = critical_norms(u, w)?;
    let c_d = green_constant::<T>(u.grid().dim())?;
    let h = interaction_h(u, w)?;
    Ok(split_energy(nu, nw, c_d * h, alpha1, alpha2))
}

fn split_energy<T: Real>(nu: T, nw: T, coupling: T, alpha1: T, alpha2: T) -> (T, T) {
    let gap = alpha1.sqrt() * nu - alpha2.sqrt() * nw;
    let residual = T::lit(2.0) * (alpha1 * alpha2).sqrt() * nu * nw - coupling;
    (gap * gap, residual)
}

/// Virial rate `G = 2 (d - 2) E`.
pub fn virial_g<T: Real>(
    u: &DensityField<T>,
    w: &DensityField<T>,
    alpha1: T,
    alpha2: T,
) -> Result<T> {
    let d = u.grid().dim();
    Ok(T::from_usize_exact(2 * (d - 2)) * free_energy(u, w, alpha1, alpha2)?)
}

/// The same rate assembled term by term as
/// `C(a1,u) int u^p + C(a2,w) int w^p - 2 c_d (d-2) H` with `C(a,f) = 2(d-2) a |f|_p^{4/(d+2)}`.
pub fn virial_g_expanded<T: Real>(
    u: &DensityField<T>,
    w: &DensityField<T>,
    alpha1: T,
    alpha2: T,
) -> Result<T> {
    check_alphas(alpha1, alpha2)?;
    let d = u.grid().dim();
    let p = critical_exponent::<T>(d);
    let q = coefficient_exponent::<T>(d);
    let two_dm2 = T::from_usize_exact(2 * (d - 2));
    let coeff = |alpha: T, f: &DensityField<T>| -> Result<T> {
        let integral = f.pth_power_integral(p)?;
        Ok(two_dm2 * alpha * integral.powf(q / p) * integral)
    };
    let c_d = green_constant::<T>(d)?;
    Ok(coeff(alpha1, u)? + coeff(alpha2, w)? - two_dm2 * c_d * interaction_h(u, w)?)
}

/// `int f |d/dr (2 a |f|_p^{4/(d+2)} f^{(d-2)/(d+2)} - phi)|^2` with face-centred
/// differences and arithmetic face averages of `f`.
fn species_dissipation<T: Real>(
    f: &DensityField<T>,
    potential: &PotentialField<T>,
    alpha: T,
) -> Result<T> {
    let grid = f.grid();
    let d = grid.dim();
    let norm = f.lp_norm(critical_exponent::<T>(d))?;
    let prefactor = T::lit(2.0) * alpha * norm.powf(coefficient_exponent::<T>(d));
    let expo = T::from_usize_exact(d - 2) / T::from_usize_exact(d + 2);
    let mu: Vec<T> = f
        .values()
        .iter()
        .zip(potential.values())
        .map(|(&s, &phi)| {
            let pressure = if s > T::zero() {
                prefactor * s.powf(expo)
            } else {
                T::zero()
            };
            pressure - phi
        })
        .collect();
    let dr = grid.dr();
    let vals = f.values();
    let mut total = T::zero();
    for j in 1..grid.len() {
        let face = (vals[j] + vals[j - 1]) / T::lit(2.0);
        if face > T::zero() {
            let grad = (mu[j] - mu[j - 1]) / dr;
            total = total + face * grad * grad * grid.face_areas()[j] * dr;
        }
    }
    Ok(total)
}

/// Rate of free-energy decay, `-dE/dt`, for the current state. Fails when the
/// cached potentials do not belong to the current densities.
pub fn dissipation_rate<T: Real>(state: &SystemState<T>) -> Result<T> {
    state.check_potentials(T::lit(POTENTIAL_STALENESS_TOL))?;
    Ok(species_dissipation(state.u(), state.v(), state.alpha1())?
        + species_dissipation(state.w(), state.z(), state.alpha2())?)
}

/// Diagnostics for one instant of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport<T> {
    pub time: T,
    pub mass_u: T,
    pub mass_w: T,
    /// `|u|_{2d/(d+2)}`.
    pub norm_u: T,
    pub norm_w: T,
    /// Interaction `H[u, w]`.
    pub interaction: T,
    pub energy: T,
    pub energy_square: T,
    pub energy_residual: T,
    /// Second moment `I`.
    pub second_moment: T,
    /// Virial rate `G`.
    pub virial_rate: T,
    pub dissipation: T,
    /// Step that produced this state; zero for the initial report.
    pub dt: T,
    pub sup_u: T,
    pub sup_w: T,
    /// Fraction of the total mass in the outer 5% of cells.
    pub mass_leak: T,
}

impl<T: Real> EnergyReport<T> {
    pub const CSV_HEADER: [&'static str; 16] = [
        "t",
        "mass_u",
        "mass_w",
        "norm_u",
        "norm_w",
        "H",
        "E",
        "E_square",
        "E_residual",
        "I",
        "G",
        "dissipation",
        "dt",
        "sup_u",
        "sup_w",
        "mass_leak",
    ];

    pub fn measure(state: &SystemState<T>, dt: T) -> Result<Self> {
        let (u, w) = (state.u(), state.w());
        let d = u.grid().dim();
        let c_d = green_constant::<T>(d)?;
        let (norm_u, norm_w) = critical_norms(u, w)?;
        let coupling = pair_integral(u, state.v());
        let (alpha1, alpha2) = (state.alpha1(), state.alpha2());
        let energy = alpha1 * norm_u * norm_u + alpha2 * norm_w * norm_w - coupling;
        let (energy_square, energy_residual) =
            split_energy(norm_u, norm_w, coupling, alpha1, alpha2);
        let mass_u = u.mass();
        let mass_w = w.mass();
        let total = mass_u + mass_w;
        let mass_leak = if total > T::zero() {
            (u.outer_mass() + w.outer_mass()) / total
        } else {
            T::zero()
        };
        Ok(Self {
            time: state.time(),
            mass_u,
            mass_w,
            norm_u,
            norm_w,
            interaction: coupling / c_d,
            energy,
            energy_square,
            energy_residual,
            second_moment: second_moment(u, w)?,
            virial_rate: T::from_usize_exact(2 * (d - 2)) * energy,
            dissipation: dissipation_rate(state)?,
            dt,
            sup_u: u.sup_norm(),
            sup_w: w.sup_norm(),
            mass_leak,
        })
    }

    pub fn csv_row(&self) -> [T; 16] {
        [
            self.time,
            self.mass_u,
            self.mass_w,
            self.norm_u,
            self.norm_w,
            self.interaction,
            self.energy,
            self.energy_square,
            self.energy_residual,
            self.second_moment,
            self.virial_rate,
            self.dissipation,
            self.dt,
            self.sup_u,
            self.sup_w,
            self.mass_leak,
        ]
    }

    pub fn from_csv_row(row: [T; 16]) -> Self {
        let [time, mass_u, mass_w, norm_u, norm_w, interaction, energy, energy_square, energy_residual, second_moment, virial_rate, dissipation, dt, sup_u, sup_w, mass_leak] =
            row;
        Self {
            time,
            mass_u,
            mass_w,
            norm_u,
            norm_w,
            interaction,
            energy,
            energy_square,
            energy_residual,
            second_moment,
            virial_rate,
            dissipation,
            dt,
            sup_u,
            sup_w,
            mass_leak,
        }
    }
}
