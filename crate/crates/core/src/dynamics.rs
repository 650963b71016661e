//! Explicit conservative finite-volume integration of the (optionally
//! regularised) cross-attraction system.
//!
//! Each species is advanced in flux form on the radial faces:
//!
//! ```text
//! F_j = -D [phi(f_j) - phi(f_{j-1})] / dr + f_up * dphi/dr|_j,
//! f_i <- f_i - dt (A_{i+1} F_{i+1} - A_i F_i) / vol_i,
//! ```
//!
//! where `phi(s) = (s + eps)^m - eps^m`, `m = 2d/(d+2)`, the drift velocity is
//! the Gauss-law gradient of the potential generated by the *other* species,
//! and `f_up` is the upwind cell value. Fluxes vanish at the origin and at
//! `r_max`, so masses are conserved up to round-off.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::energy::{check_alpha, EnergyReport};
use crate::error::{Error, Result};
use crate::fields::{DensityField, CLAMP_FRACTION};
use crate::potential::{solve_potential, PotentialField};
use crate::scalar::{coefficient_exponent, critical_exponent, Real};

/// Maximum number of step halvings after a positivity failure.
pub const MAX_HALVINGS: usize = 40;

/// Number of trailing accepted steps inspected when the time step collapses.
pub const GROWTH_WINDOW: usize = 50;

/// Abort threshold on the fraction of mass in the outer 5% of cells.
pub const LEAK_LIMIT: f64 = 0.01;

/// Densities, their potentials and the model parameters at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState<T> {
    u: DensityField<T>,
    w: DensityField<T>,
    /// Potential generated by `w`; drives `u`.
    v: PotentialField<T>,
    /// Potential generated by `u`; drives `w`.
    z: PotentialField<T>,
    t: T,
    eps: T,
    alpha1: T,
    alpha2: T,
}

impl<T: Real> SystemState<T> {
    pub fn new(
        u: DensityField<T>,
        w: DensityField<T>,
        alpha1: T,
        alpha2: T,
        eps: T,
    ) -> Result<Self> {
        u.check_grid(&w)?;
        check_alpha("alpha1", alpha1)?;
        check_alpha("alpha2", alpha2)?;
        if !(eps >= T::zero()) || !eps.is_finite() {
            return Err(Error::config(
                "eps",
                format!("{eps} must be finite and >= 0"),
            ));
        }
        let v = solve_potential(&w)?;
        let z = solve_potential(&u)?;
        Ok(Self {
            u,
            w,
            v,
            z,
            t: T::zero(),
            eps,
            alpha1,
            alpha2,
        })
    }

    /// Reassembles a state from stored parts without recomputing potentials.
    /// Use [`SystemState::check_potentials`] before trusting them.
    pub fn from_parts(
        u: DensityField<T>,
        w: DensityField<T>,
        v: PotentialField<T>,
        z: PotentialField<T>,
        t: T,
        alpha1: T,
        alpha2: T,
        eps: T,
    ) -> Result<Self> {
        u.check_grid(&w)?;
        check_alpha("alpha1", alpha1)?;
        check_alpha("alpha2", alpha2)?;
        Ok(Self {
            u,
            w,
            v,
            z,
            t,
            eps,
            alpha1,
            alpha2,
        })
    }

    pub fn with_time(mut self, t: T) -> Self {
        self.t = t;
        self
    }

    pub fn with_eps(mut self, eps: T) -> Result<Self> {
        if !(eps >= T::zero()) {
            return Err(Error::config("eps", "must be >= 0"));
        }
        self.eps = eps;
        Ok(self)
    }

    pub fn u(&self) -> &DensityField<T> {
        &self.u
    }

    pub fn w(&self) -> &DensityField<T> {
        &self.w
    }

    pub fn v(&self) -> &PotentialField<T> {
        &self.v
    }

    pub fn z(&self) -> &PotentialField<T> {
        &self.z
    }

    pub fn time(&self) -> T {
        self.t
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn alpha1(&self) -> T {
        self.alpha1
    }

    pub fn alpha2(&self) -> T {
        self.alpha2
    }

    pub fn dim(&self) -> usize {
        self.u.grid().dim()
    }

    /// Verifies `v = K * w` and `z = K * u` to relative tolerance `tol`.
    pub fn check_potentials(&self, tol: T) -> Result<()> {
        let fresh_v = solve_potential(&self.w)?;
        let fresh_z = solve_potential(&self.u)?;
        let dv = self.v.max_relative_deviation(&fresh_v);
        let dz = self.z.max_relative_deviation(&fresh_z);
        if !self.v.grid().same_layout(self.u.grid()) || !self.z.grid().same_layout(self.u.grid()) {
            return Err(Error::Consistency(
                "cached potentials live on another grid".into(),
            ));
        }
        if dv > tol || dz > tol {
            return Err(Error::Consistency(format!(
                "cached potentials are stale (relative deviation {dv:e} / {dz:e})"
            )));
        }
        Ok(())
    }
}

/// Time-stepping knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct StepControl<T> {
    pub cfl_safety: T,
    pub dt_min: T,
    pub dt_max: T,
    /// Blow-up threshold on `sup u + sup w`.
    pub sup_cap: T,
    pub t_end: T,
    /// When false the attraction drift is switched off (pure diffusion).
    pub drift: bool,
}

impl<T: Real> StepControl<T> {
    pub fn new(t_end: T, dt_max: T) -> Self {
        Self {
            cfl_safety: T::lit(0.4),
            dt_min: T::lit(1e-12),
            dt_max,
            sup_cap: T::lit(1e8),
            t_end,
            drift: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_safety > T::zero() && self.cfl_safety < T::one()) {
            return Err(Error::config("cfl_safety", "must lie in (0, 1)"));
        }
        if !(self.dt_min > T::zero()) {
            return Err(Error::config("dt_min", "must be > 0"));
        }
        if !(self.dt_min < self.dt_max) {
            return Err(Error::config("dt_max", "must exceed dt_min"));
        }
        if !(self.sup_cap > T::zero()) {
            return Err(Error::config("sup_cap", "must be > 0"));
        }
        if !(self.t_end >= T::zero()) || !self.t_end.is_finite() {
            return Err(Error::config("t_end", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict<T> {
    CompletedGlobal,
    BlowUpDetected { t_star: T },
    MassLeak { t: T },
    StalledDt { t: T },
}

impl<T: Real> Verdict<T> {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::CompletedGlobal => "CompletedGlobal",
            Verdict::BlowUpDetected { .. } => "BlowUpDetected",
            Verdict::MassLeak { .. } => "MassLeak",
            Verdict::StalledDt { .. } => "StalledDt",
        }
    }

    pub fn blow_up_time(&self) -> Option<T> {
        match *self {
            Verdict::BlowUpDetected { t_star } => Some(t_star),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome<T> {
    pub verdict: Verdict<T>,
    pub trajectory: Vec<EnergyReport<T>>,
    pub final_state: SystemState<T>,
    pub steps: usize,
    /// Largest relative change of either mass over a single accepted step.
    pub max_step_mass_drift: T,
}

/// Nonlocal diffusion weight `a (d-2)/d |f|_{2d/(d+2)}^{4/(d+2)}`.
pub fn diffusion_coefficient<T: Real>(f: &DensityField<T>, alpha: T, d: usize) -> Result<T> {
    check_alpha("alpha", alpha)?;
    let norm = f.lp_norm(critical_exponent::<T>(d))?;
    Ok(alpha * T::from_usize_exact(d - 2) / T::from_usize_exact(d)
        * norm.powf(coefficient_exponent::<T>(d)))
}

/// `phi_eps(s) = (s + eps)^m - eps^m`.
#[inline]
fn pressure<T: Real>(s: T, eps: T, m: T, eps_m: T) -> T {
    if eps == T::zero() {
        if s > T::zero() {
            s.powf(m)
        } else {
            T::zero()
        }
    } else {
        (s + eps).powf(m) - eps_m
    }
}

/// `phi_eps'(s) = m (s + eps)^{m-1}`.
#[inline]
fn pressure_slope<T: Real>(s: T, eps: T, m: T) -> T {
    let x = s + eps;
    if x > T::zero() {
        m * x.powf(m - T::one())
    } else {
        T::zero()
    }
}

/// Stable explicit step from the diffusive and advective CFL bounds.
pub fn cfl_dt<T: Real>(state: &SystemState<T>, ctrl: &StepControl<T>) -> Result<T> {
    let grid = state.u.grid();
    let d = grid.dim();
    let m = critical_exponent::<T>(d);
    let dr = grid.dr();
    let du = diffusion_coefficient(&state.u, state.alpha1, d)?;
    let dw = diffusion_coefficient(&state.w, state.alpha2, d)?;
    let (u, w) = (state.u.values(), state.w.values());
    let (gv, gz) = (state.v.face_gradient(), state.z.face_gradient());
    let tiny = T::min_positive_value();
    let mut bound = T::infinity();
    for j in 1..grid.len() {
        let su = du * pressure_slope(u[j].max(u[j - 1]), state.eps, m);
        let sw = dw * pressure_slope(w[j].max(w[j - 1]), state.eps, m);
        bound = bound.min(dr * dr / (T::lit(2.0) * su.max(sw) + tiny));
        if ctrl.drift {
            let speed = gv[j].abs().max(gz[j].abs());
            bound = bound.min(dr / (speed + tiny));
        }
    }
    Ok((ctrl.cfl_safety * bound).max(ctrl.dt_min).min(ctrl.dt_max))
}

/// One explicit update of a single species. Returns `None` when a cell goes
/// negative beyond round-off.
fn advance_species<T: Real>(
    f: &DensityField<T>,
    drive: &PotentialField<T>,
    coefficient: T,
    eps: T,
    dt: T,
    drift: bool,
) -> Option<Vec<T>> {
    let grid = f.grid();
    let n = grid.len();
    let d = grid.dim();
    let m = critical_exponent::<T>(d);
    let eps_m = if eps > T::zero() {
        eps.powf(m)
    } else {
        T::zero()
    };
    let vals = f.values();
    let dr = grid.dr();
    let areas = grid.face_areas();
    let velocity = drive.face_gradient();

    let phi: Vec<T> = vals.iter().map(|&s| pressure(s, eps, m, eps_m)).collect();
    // area-weighted flux through every face; zero at both boundaries
    let mut flux = vec![T::zero(); n + 1];
    for j in 1..n {
        let mut fj = -coefficient * (phi[j] - phi[j - 1]) / dr;
        if drift {
            let c = velocity[j];
            fj = fj
                + if c > T::zero() {
                    vals[j - 1] * c
                } else {
                    vals[j] * c
                };
        }
        flux[j] = fj * areas[j];
    }

    let mut next: Vec<T> = vals
        .iter()
        .zip(grid.volumes())
        .enumerate()
        .map(|(i, (&s, &vol))| s - dt * (flux[i + 1] - flux[i]) / vol)
        .collect();
    let sup = next.iter().fold(T::zero(), |a, &b| a.max(b));
    let floor = -T::lit(CLAMP_FRACTION) * sup;
    for x in next.iter_mut() {
        if !x.is_finite() || *x < floor {
            return None;
        }
        if *x < T::zero() {
            *x = T::zero();
        }
    }
    Some(next)
}

/// Advances both species by exactly `dt`; diffusion weights are frozen at the
/// start of the step.
pub fn advance<T: Real>(state: &SystemState<T>, dt: T, drift: bool) -> Result<SystemState<T>> {
    let d = state.dim();
    let du = diffusion_coefficient(&state.u, state.alpha1, d)?;
    let dw = diffusion_coefficient(&state.w, state.alpha2, d)?;
    let next_u = advance_species(&state.u, &state.v, du, state.eps, dt, drift);
    let next_w = advance_species(&state.w, &state.z, dw, state.eps, dt, drift);
    let (Some(nu), Some(nw)) = (next_u, next_w) else {
        return Err(Error::Scheme(format!(
            "negative density after a step of dt = {dt:e} at t = {}",
            state.t
        )));
    };
    let grid = state.u.grid().clone();
    let u = DensityField::new(grid.clone(), nu)?;
    let w = DensityField::new(grid, nw)?;
    let v = solve_potential(&w)?;
    let z = solve_potential(&u)?;
    Ok(SystemState {
        u,
        w,
        v,
        z,
        t: state.t + dt,
        eps: state.eps,
        alpha1: state.alpha1,
        alpha2: state.alpha2,
    })
}

/// One accepted step of size `min(cfl_dt, t_end - t)`, halving on positivity
/// failures. Returns the new state and the step actually taken.
pub fn step<T: Real>(state: &SystemState<T>, ctrl: &StepControl<T>) -> Result<(SystemState<T>, T)> {
    let mut dt = cfl_dt(state, ctrl)?;
    let remaining = ctrl.t_end - state.t;
    let mut finishing = false;
    if remaining > T::zero() && remaining <= dt {
        dt = remaining;
        finishing = true;
    }
    let mut last = None;
    for _ in 0..=MAX_HALVINGS {
        match advance(state, dt, ctrl.drift) {
            Ok(next) if finishing => return Ok((next.with_time(ctrl.t_end), dt)),
            Ok(next) => return Ok((next, dt)),
            Err(e @ Error::Scheme(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
        dt = dt / T::lit(2.0);
        finishing = false;
        if dt < ctrl.dt_min {
            break;
        }
    }
    Err(last.unwrap_or_else(|| Error::Scheme("time step fell below dt_min".into())))
}

fn relative_change<T: Real>(before: T, after: T) -> T {
    if before > T::zero() {
        (after - before).abs() / before
    } else {
        after.abs()
    }
}

fn grew_monotonically<T: Real>(history: &VecDeque<T>) -> bool {
    history.len() > GROWTH_WINDOW
        && history
            .iter()
            .zip(history.iter().skip(1))
            .all(|(a, b)| b > a)
}

/// Integrates until `t_end`, blow-up, mass leak or time-step stall. Reports are
/// emitted for the initial state, every `output_stride` accepted steps, and the
/// final state.
pub fn run<T: Real>(
    initial: SystemState<T>,
    ctrl: &StepControl<T>,
    output_stride: usize,
) -> Result<RunOutcome<T>> {
    ctrl.validate()?;
    if output_stride == 0 {
        return Err(Error::config("output_stride", "must be >= 1"));
    }
    let mass_u0 = initial.u.mass();
    let mass_w0 = initial.w.mass();
    if !mass_u0.is_finite() || !mass_w0.is_finite() {
        return Err(Error::config(
            "initial_kind",
            "initial data must have finite mass",
        ));
    }
    if initial.u.grid().dim() < 3 {
        return Err(Error::InvalidDimension {
            d: initial.u.grid().dim(),
            reason: "dynamics need d >= 3",
        });
    }

    let mut state = initial;
    let mut trajectory = vec![EnergyReport::measure(&state, T::zero())?];
    let mut steps = 0usize;
    let mut max_drift = T::zero();
    let mut sup_history: VecDeque<T> = VecDeque::with_capacity(GROWTH_WINDOW + 2);
    let mut last_dt = T::zero();
    let mut reported_at = 0usize;
    sup_history.push_back(state.u.sup_norm() + state.w.sup_norm());

    let verdict = loop {
        if state.t >= ctrl.t_end {
            break Verdict::CompletedGlobal;
        }
        let (next, dt) = match step(&state, ctrl) {
            Ok(ok) => ok,
            Err(Error::Scheme(_)) => {
                break if grew_monotonically(&sup_history) {
                    Verdict::BlowUpDetected { t_star: state.t }
                } else {
                    Verdict::StalledDt { t: state.t }
                };
            }
            Err(e) => return Err(e),
        };
        let drift_u = relative_change(state.u.mass(), next.u.mass());
        let drift_w = relative_change(state.w.mass(), next.w.mass());
        max_drift = max_drift.max(drift_u).max(drift_w);
        state = next;
        steps += 1;
        last_dt = dt;

        let sup = state.u.sup_norm() + state.w.sup_norm();
        sup_history.push_back(sup);
        if sup_history.len() > GROWTH_WINDOW + 1 {
            sup_history.pop_front();
        }

        if sup >= ctrl.sup_cap {
            break Verdict::BlowUpDetected { t_star: state.t };
        }
        let total = state.u.mass() + state.w.mass();
        if total > T::zero()
            && (state.u.outer_mass() + state.w.outer_mass()) / total > T::lit(LEAK_LIMIT)
        {
            break Verdict::MassLeak { t: state.t };
        }
        if dt <= ctrl.dt_min && state.t < ctrl.t_end {
            break if grew_monotonically(&sup_history) {
                Verdict::BlowUpDetected { t_star: state.t }
            } else {
                Verdict::StalledDt { t: state.t }
            };
        }
        if steps.is_multiple_of(output_stride) {
            trajectory.push(EnergyReport::measure(&state, dt)?);
            reported_at = steps;
        }
    };
    if reported_at != steps {
        trajectory.push(EnergyReport::measure(&state, last_dt)?);
    }

    Ok(RunOutcome {
        verdict,
        trajectory,
        final_state: state,
        steps,
        max_step_mass_drift: max_drift,
    })
}

/// Distances between solutions at consecutive regularisation levels.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonGap<T> {
    pub eps_a: T,
    pub eps_b: T,
    pub l1_u: T,
    pub l1_w: T,
}

impl<T: Real> EpsilonGap<T> {
    pub fn total(&self) -> T {
        self.l1_u + self.l1_w
    }
}

#[derive(Debug, Clone)]
pub struct EpsilonStudy<T> {
    pub eps: Vec<T>,
    pub verdicts: Vec<Verdict<T>>,
    /// Gaps between consecutive entries of `eps`, computed only when both runs reached `t_end`.
    pub gaps: Vec<Option<EpsilonGap<T>>>,
    pub final_states: Vec<SystemState<T>>,
}

impl<T: Real> EpsilonStudy<T> {
    /// Indices of the levels that reached the common time.
    pub fn survivors(&self) -> Vec<usize> {
        self.verdicts
            .iter()
            .enumerate()
            .filter(|(_, v)| matches!(v, Verdict::CompletedGlobal))
            .map(|(i, _)| i)
            .collect()
    }

    /// True when every gap is available and the totals strictly decrease.
    pub fn gaps_decreasing(&self) -> bool {
        let totals: Option<Vec<T>> = self
            .gaps
            .iter()
            .map(|g| g.as_ref().map(|g| g.total()))
            .collect();
        match totals {
            Some(t) => t.windows(2).all(|w| w[1] < w[0]),
            None => false,
        }
    }
}

/// Runs the same initial data at every regularisation level in `eps_list`
/// (non-increasing, >= 0) up to `ctrl.t_end`; runs execute in parallel.
pub fn epsilon_convergence<T: Real>(
    initial: &SystemState<T>,
    ctrl: &StepControl<T>,
    eps_list: &[T],
) -> Result<EpsilonStudy<T>> {
    if eps_list.is_empty() {
        return Err(Error::config("eps_list", "must not be empty"));
    }
    if eps_list.iter().any(|&e| !(e >= T::zero())) {
        return Err(Error::config("eps_list", "entries must be >= 0"));
    }
    if eps_list.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::config("eps_list", "entries must be non-increasing"));
    }
    let outcomes: Vec<Result<RunOutcome<T>>> = eps_list
        .par_iter()
        .map(|&eps| {
            let start = initial.clone().with_eps(eps)?;
            run(start, ctrl, usize::MAX)
        })
        .collect();
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let verdicts: Vec<Verdict<T>> = outcomes.iter().map(|o| o.verdict).collect();
    let mut gaps = Vec::with_capacity(eps_list.len().saturating_sub(1));
    for k in 1..outcomes.len() {
        let (a, b) = (&outcomes[k - 1], &outcomes[k]);
        let both = matches!(a.verdict, Verdict::CompletedGlobal)
            && matches!(b.verdict, Verdict::CompletedGlobal);
        gaps.push(if both {
            Some(EpsilonGap {
                eps_a: eps_list[k - 1],
                eps_b: eps_list[k],
                l1_u: a.final_state.u.l1_distance(&b.final_state.u)?,
                l1_w: a.final_state.w.l1_distance(&b.final_state.w)?,
            })
        } else {
            None
        });
    }
    Ok(EpsilonStudy {
        eps: eps_list.to_vec(),
        verdicts,
        gaps,
        final_states: outcomes.into_iter().map(|o| o.final_state).collect(),
    })
}
