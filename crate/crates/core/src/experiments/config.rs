//! Flat `key = value` run configuration.
//!
//! One pair per line, `#` starts a comment, unknown or repeated keys are
//! rejected. [`RunConfig::to_text`] writes every key in a fixed order, so
//! `to_text(parse(to_text(c))) == to_text(c)`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::criticality::{
    make_negative_energy_data, truncated_optimizer, NegativeEnergyOptions, TRUNCATION_SCALES,
};
use crate::dynamics::{StepControl, SystemState};
use crate::error::{Error, Result};
use crate::fields::DensityField;
use crate::grid::RadialGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialKind {
    Gaussian,
    UniformBall,
    OptimizerTruncated,
    NegativeEnergyAuto,
}

impl fmt::Display for InitialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitialKind::Gaussian => "gaussian",
            InitialKind::UniformBall => "uniform_ball",
            InitialKind::OptimizerTruncated => "optimizer_truncated",
            InitialKind::NegativeEnergyAuto => "negative_energy_auto",
        })
    }
}

impl FromStr for InitialKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gaussian" => Ok(InitialKind::Gaussian),
            "uniform_ball" => Ok(InitialKind::UniformBall),
            "optimizer_truncated" => Ok(InitialKind::OptimizerTruncated),
            "negative_energy_auto" => Ok(InitialKind::NegativeEnergyAuto),
            other => Err(format!(
                "unknown kind `{other}` (expected gaussian, uniform_ball, optimizer_truncated or negative_energy_auto)"
            )),
        }
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub d: usize,
    pub r_max: f64,
    pub n: usize,
    pub alpha1: f64,
    pub alpha2: f64,
    pub eps: f64,
    pub t_end: f64,
    pub cfl_safety: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub sup_cap: f64,
    pub output_stride: usize,
    pub initial_kind: InitialKind,
    pub mass_u: f64,
    pub mass_w: f64,
    pub scale_u: f64,
    pub scale_w: f64,
    /// Centre offsets; only zero is meaningful in radial mode.
    pub offset_u: f64,
    pub offset_w: f64,
    /// Drives randomised property suites only; runs are deterministic.
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Attraction drift on/off. Off gives pure nonlocal porous-medium diffusion.
    pub drift: bool,
}

const KEYS: [&str; 22] = [
    "d",
    "r_max",
    "n",
    "alpha1",
    "alpha2",
    "eps",
    "t_end",
    "cfl_safety",
    "dt_min",
    "dt_max",
    "sup_cap",
    "output_stride",
    "initial_kind",
    "mass_u",
    "mass_w",
    "scale_u",
    "scale_w",
    "offset_u",
    "offset_w",
    "seed",
    "out_dir",
    "drift",
];

const REQUIRED: [&str; 7] = [
    "d",
    "r_max",
    "n",
    "alpha1",
    "alpha2",
    "t_end",
    "initial_kind",
];

fn parse_value<V: FromStr>(
    map: &BTreeMap<String, String>,
    key: &str,
    default: Option<V>,
) -> Result<V>
where
    V::Err: fmt::Display,
{
    match map.get(key) {
        Some(raw) => raw
            .parse::<V>()
            .map_err(|e| Error::config(key, format!("cannot parse `{raw}`: {e}"))),
        None => default.ok_or_else(|| Error::config(key, "missing required key")),
    }
}

impl RunConfig {
    /// A valid configuration with every optional key at its default.
    pub fn with_defaults(
        d: usize,
        r_max: f64,
        n: usize,
        alpha1: f64,
        alpha2: f64,
        t_end: f64,
        kind: InitialKind,
    ) -> Self {
        Self {
            d,
            r_max,
            n,
            alpha1,
            alpha2,
            eps: 0.0,
            t_end,
            cfl_safety: 0.4,
            dt_min: 1e-12,
            dt_max: 1e-2,
            sup_cap: 1e8,
            output_stride: 10,
            initial_kind: kind,
            mass_u: 1.0,
            mass_w: 1.0,
            scale_u: 1.0,
            scale_w: 1.0,
            offset_u: 0.0,
            offset_w: 0.0,
            seed: 0,
            out_dir: PathBuf::from("out"),
            drift: true,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    format!("line {}", lineno + 1),
                    format!("expected `key = value`, got `{line}`"),
                )
            })?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::config(key, "unknown key"));
            }
            if map
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::config(key, "key given twice"));
            }
        }
        for key in REQUIRED {
            if !map.contains_key(key) {
                return Err(Error::config(key, "missing required key"));
            }
        }
        let kind: InitialKind = parse_value(&map, "initial_kind", None)?;
        let base = Self::with_defaults(0, 0.0, 0, 0.0, 0.0, 0.0, kind);
        let cfg = Self {
            d: parse_value(&map, "d", None)?,
            r_max: parse_value(&map, "r_max", None)?,
            n: parse_value(&map, "n", None)?,
            alpha1: parse_value(&map, "alpha1", None)?,
            alpha2: parse_value(&map, "alpha2", None)?,
            eps: parse_value(&map, "eps", Some(base.eps))?,
            t_end: parse_value(&map, "t_end", None)?,
            cfl_safety: parse_value(&map, "cfl_safety", Some(base.cfl_safety))?,
            dt_min: parse_value(&map, "dt_min", Some(base.dt_min))?,
            dt_max: parse_value(&map, "dt_max", Some(base.dt_max))?,
            sup_cap: parse_value(&map, "sup_cap", Some(base.sup_cap))?,
            output_stride: parse_value(&map, "output_stride", Some(base.output_stride))?,
            initial_kind: kind,
            mass_u: parse_value(&map, "mass_u", Some(base.mass_u))?,
            mass_w: parse_value(&map, "mass_w", Some(base.mass_w))?,
            scale_u: parse_value(&map, "scale_u", Some(base.scale_u))?,
            scale_w: parse_value(&map, "scale_w", Some(base.scale_w))?,
            offset_u: parse_value(&map, "offset_u", Some(base.offset_u))?,
            offset_w: parse_value(&map, "offset_w", Some(base.offset_w))?,
            seed: parse_value(&map, "seed", Some(base.seed))?,
            out_dir: parse_value(&map, "out_dir", Some(base.out_dir))?,
            drift: parse_value(&map, "drift", Some(base.drift))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let values: [String; 22] = [
            self.d.to_string(),
            self.r_max.to_string(),
            self.n.to_string(),
            self.alpha1.to_string(),
            self.alpha2.to_string(),
            self.eps.to_string(),
            self.t_end.to_string(),
            self.cfl_safety.to_string(),
            self.dt_min.to_string(),
            self.dt_max.to_string(),
            self.sup_cap.to_string(),
            self.output_stride.to_string(),
            self.initial_kind.to_string(),
            self.mass_u.to_string(),
            self.mass_w.to_string(),
            self.scale_u.to_string(),
            self.scale_w.to_string(),
            self.offset_u.to_string(),
            self.offset_w.to_string(),
            self.seed.to_string(),
            self.out_dir.display().to_string(),
            self.drift.to_string(),
        ];
        KEYS.iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("{v} must be finite and > 0")))
            }
        };
        let nonnegative = |key: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("{v} must be finite and >= 0")))
            }
        };
        let unit = |key: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("{v} is outside (0, 1]")))
            }
        };
        if self.d < 3 {
            return Err(Error::config("d", format!("{} must be >= 3", self.d)));
        }
        positive("r_max", self.r_max)?;
        if self.n < crate::grid::MIN_CELLS {
            return Err(Error::config(
                "n",
                format!("{} must be >= {}", self.n, crate::grid::MIN_CELLS),
            ));
        }
        unit("alpha1", self.alpha1)?;
        unit("alpha2", self.alpha2)?;
        nonnegative("eps", self.eps)?;
        positive("t_end", self.t_end)?;
        if !(self.cfl_safety > 0.0 && self.cfl_safety < 1.0) {
            return Err(Error::config(
                "cfl_safety",
                format!("{} is outside (0, 1)", self.cfl_safety),
            ));
        }
        positive("dt_min", self.dt_min)?;
        positive("dt_max", self.dt_max)?;
        if self.dt_min >= self.dt_max {
            return Err(Error::config("dt_max", "must exceed dt_min"));
        }
        positive("sup_cap", self.sup_cap)?;
        if self.output_stride == 0 {
            return Err(Error::config("output_stride", "must be >= 1"));
        }
        nonnegative("mass_u", self.mass_u)?;
        nonnegative("mass_w", self.mass_w)?;
        positive("scale_u", self.scale_u)?;
        positive("scale_w", self.scale_w)?;
        if self.offset_u != 0.0 {
            return Err(Error::config(
                "offset_u",
                "centre offsets must be 0 in radial mode",
            ));
        }
        if self.offset_w != 0.0 {
            return Err(Error::config(
                "offset_w",
                "centre offsets must be 0 in radial mode",
            ));
        }
        if matches!(
            self.initial_kind,
            InitialKind::OptimizerTruncated | InitialKind::NegativeEnergyAuto
        ) {
            for (key, s) in [("scale_u", self.scale_u), ("scale_w", self.scale_w)] {
                if TRUNCATION_SCALES * s > 0.95 * self.r_max {
                    return Err(Error::config(
                        key,
                        format!("truncated optimizer needs {TRUNCATION_SCALES} * scale inside 0.95 * r_max"),
                    ));
                }
            }
        }
        if self.initial_kind == InitialKind::NegativeEnergyAuto && !(self.mass_u > 0.0) {
            return Err(Error::config(
                "mass_u",
                "negative-energy data need a positive base mass",
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<std::sync::Arc<RadialGrid<f64>>> {
        Ok(RadialGrid::new(self.d, self.r_max, self.n)?.shared())
    }

    pub fn step_control(&self) -> StepControl<f64> {
        StepControl {
            cfl_safety: self.cfl_safety,
            dt_min: self.dt_min,
            dt_max: self.dt_max,
            sup_cap: self.sup_cap,
            t_end: self.t_end,
            drift: self.drift,
        }
    }

    /// Horizon handed to the negative-energy construction: the virial bound
    /// must leave room for a 1.5x safety factor inside `t_end`.
    pub fn blowup_horizon(&self) -> f64 {
        self.t_end / 2.0
    }

    /// Builds the initial state described by this configuration.
    pub fn initial_state(&self) -> Result<SystemState<f64>> {
        self.validate()?;
        let grid = self.grid()?;
        let profile = |mass: f64, scale: f64| -> Result<DensityField<f64>> {
            if mass == 0.0 {
                return Ok(DensityField::zeros(grid.clone()));
            }
            match self.initial_kind {
                InitialKind::Gaussian => {
                    DensityField::from_profile(grid.clone(), |r| (-(r / scale).powi(2)).exp())?
                        .with_mass(mass)
                }
                InitialKind::UniformBall => {
                    DensityField::ball(grid.clone(), scale, 1.0)?.with_mass(mass)
                }
                InitialKind::OptimizerTruncated | InitialKind::NegativeEnergyAuto => {
                    truncated_optimizer(&grid, scale, mass)
                }
            }
        };
        let (u, w) = if self.initial_kind == InitialKind::NegativeEnergyAuto {
            let opts = NegativeEnergyOptions {
                scale_u: self.scale_u,
                scale_w: self.scale_w,
                mass_u: self.mass_u,
                horizon: Some(self.blowup_horizon()),
            };
            let data = make_negative_energy_data(self.d, self.alpha1, self.alpha2, &grid, &opts)?;
            (data.u0, data.w0)
        } else {
            (
                profile(self.mass_u, self.scale_u)?,
                profile(self.mass_w, self.scale_w)?,
            )
        };
        SystemState::new(u, w, self.alpha1, self.alpha2, self.eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
# minimal run
d = 3
r_max = 8
n = 256
alpha1 = 1
alpha2 = 1
t_end = 0.5
initial_kind = gaussian
";

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        let expected = RunConfig::with_defaults(3, 8.0, 256, 1.0, 1.0, 0.5, InitialKind::Gaussian);
        assert_eq!(cfg, expected);
        assert_eq!(cfg.cfl_safety, 0.4);
        assert_eq!(cfg.sup_cap, 1e8);
        assert_eq!(cfg.dt_min, 1e-12);
    }

    #[test]
    fn alpha_out_of_range_names_the_key() {
        let text = MINIMAL.replace("alpha1 = 1", "alpha1 = 1.5");
        match RunConfig::parse(&text) {
            Err(Error::Config { key, reason }) => {
                assert_eq!(key, "alpha1");
                assert!(reason.contains("(0, 1]"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn typos_and_missing_keys_are_errors() {
        let text = format!("{MINIMAL}cfl_saftey = 0.3\n");
        assert!(
            matches!(RunConfig::parse(&text), Err(Error::Config { key, .. }) if key == "cfl_saftey")
        );
        let text = MINIMAL.replace("n = 256\n", "");
        assert!(matches!(RunConfig::parse(&text), Err(Error::Config { key, .. }) if key == "n"));
        let text = MINIMAL.replace("n = 256", "n = many");
        assert!(matches!(RunConfig::parse(&text), Err(Error::Config { key, .. }) if key == "n"));
        let text = format!("{MINIMAL}d = 4\n");
        assert!(RunConfig::parse(&text).is_err());
        let text = MINIMAL.replace("initial_kind = gaussian", "initial_kind = blob");
        assert!(
            matches!(RunConfig::parse(&text), Err(Error::Config { key, .. }) if key == "initial_kind")
        );
        let text = format!("{MINIMAL}offset_u = 1\n");
        assert!(
            matches!(RunConfig::parse(&text), Err(Error::Config { key, .. }) if key == "offset_u")
        );
    }

    #[test]
    fn serialisation_is_idempotent() {
        let mut cfg = RunConfig::parse(MINIMAL).unwrap();
        cfg.eps = 1e-3;
        cfg.dt_max = 0.1 + 0.2;
        cfg.out_dir = PathBuf::from("runs/a b");
        let text = cfg.to_text();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn builds_each_initial_kind() {
        for kind in ["gaussian", "uniform_ball", "optimizer_truncated"] {
            let text = MINIMAL
                .replace("gaussian", kind)
                .replace("r_max = 8", "r_max = 25");
            let s = RunConfig::parse(&text).unwrap().initial_state().unwrap();
            assert!((s.u().mass() - 1.0).abs() < 1e-12, "{kind}");
        }
        let text = MINIMAL
            .replace("gaussian", "negative_energy_auto")
            .replace("r_max = 8", "r_max = 25")
            .replace("alpha1 = 1", "alpha1 = 0.001")
            .replace("alpha2 = 1", "alpha2 = 0.001");
        let s = RunConfig::parse(&text).unwrap().initial_state().unwrap();
        assert!(crate::energy::free_energy(s.u(), s.w(), 1e-3, 1e-3).unwrap() < 0.0);
        // subcritical weights cannot carry negative energy
        let text = MINIMAL
            .replace("gaussian", "negative_energy_auto")
            .replace("r_max = 8", "r_max = 25");
        assert!(RunConfig::parse(&text).unwrap().initial_state().is_err());
    }
}
