//! Configuration, canned experiment suites and result persistence.

mod config;
mod output;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{InitialKind, RunConfig};
pub use output::{
    read_snapshot, read_timeseries, write_snapshot, write_table, write_timeseries, SNAPSHOT_HEADER,
};

use crate::criticality::{classify, CriticalityClass, CriticalityVerdict};
use crate::dynamics::{epsilon_convergence, run, EpsilonStudy, RunOutcome, Verdict};
use crate::energy::EnergyReport;
use crate::error::{Error, Result};

/// Factor applied to the virial estimate `2 I(0) / |G(0)|` when judging blow-up times.
pub const BLOWUP_SAFETY: f64 = 1.5;

/// Below this many output strides a virial report is flagged partial.
pub const MIN_VIRIAL_STRIDES: usize = 10;

/// Runs a configuration without touching the filesystem.
pub fn simulate(cfg: &RunConfig) -> Result<RunOutcome<f64>> {
    let initial = cfg.initial_state()?;
    run(initial, &cfg.step_control(), cfg.output_stride)
}

/// Writes `<prefix>timeseries.csv`, `<prefix>snapshot.csv` and `<prefix>config.txt` under `out_dir`.
pub fn persist_run(
    cfg: &RunConfig,
    outcome: &RunOutcome<f64>,
    prefix: &str,
) -> Result<Vec<PathBuf>> {
    output::ensure_dir(&cfg.out_dir)?;
    let series = cfg.out_dir.join(format!("{prefix}timeseries.csv"));
    let snapshot = cfg.out_dir.join(format!("{prefix}snapshot.csv"));
    let config = cfg.out_dir.join(format!("{prefix}config.txt"));
    write_timeseries(&series, &outcome.trajectory)?;
    write_snapshot(&snapshot, &outcome.final_state)?;
    std::fs::write(&config, cfg.to_text())?;
    Ok(vec![series, snapshot, config])
}

pub fn verdict_time(v: &Verdict<f64>) -> f64 {
    match *v {
        Verdict::CompletedGlobal => -1.0,
        Verdict::BlowUpDetected { t_star } => t_star,
        Verdict::MassLeak { t } | Verdict::StalledDt { t } => t,
    }
}

/// One finite-difference sample of the virial identity between consecutive reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirialSample {
    pub t_mid: f64,
    pub finite_difference: f64,
    pub predicted: f64,
    pub relative_defect: f64,
}

/// Rate at which the second moment should change for this report. With the
/// drift switched off only the diffusion half of `2(d-2)E` remains.
fn predicted_rate(r: &EnergyReport<f64>, d: usize, alpha1: f64, alpha2: f64, drift: bool) -> f64 {
    if drift {
        r.virial_rate
    } else {
        2.0 * (d as f64 - 2.0) * (alpha1 * r.norm_u * r.norm_u + alpha2 * r.norm_w * r.norm_w)
    }
}

/// Compares `(I_{k+1} - I_k) / (t_{k+1} - t_k)` with the trapezoidal average of the predicted rate.
pub fn virial_samples(
    trajectory: &[EnergyReport<f64>],
    d: usize,
    alpha1: f64,
    alpha2: f64,
    drift: bool,
) -> Vec<VirialSample> {
    trajectory
        .windows(2)
        .filter(|w| w[1].time > w[0].time)
        .map(|w| {
            let fd = (w[1].second_moment - w[0].second_moment) / (w[1].time - w[0].time);
            let predicted = 0.5
                * (predicted_rate(&w[0], d, alpha1, alpha2, drift)
                    + predicted_rate(&w[1], d, alpha1, alpha2, drift));
            let gap = (fd - predicted).abs();
            let relative_defect = if gap == 0.0 {
                0.0
            } else {
                gap / predicted.abs()
            };
            VirialSample {
                t_mid: 0.5 * (w[0].time + w[1].time),
                finite_difference: fd,
                predicted,
                relative_defect,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct VirialResolution {
    pub n: usize,
    pub verdict: Verdict<f64>,
    pub samples: Vec<VirialSample>,
    pub max_defect: f64,
}

#[derive(Debug, Clone)]
pub struct VirialReport {
    pub coarse: VirialResolution,
    pub fine: VirialResolution,
    /// `log2(coarse / fine)` of the max defects.
    pub slope: f64,
    /// Fewer than [`MIN_VIRIAL_STRIDES`] strides were recorded at some resolution.
    pub partial: bool,
}

impl VirialReport {
    pub const CSV_HEADER: [&'static str; 4] = ["n", "verdict", "max_defect", "samples"];

    pub fn csv_rows(&self) -> Vec<[String; 4]> {
        [&self.coarse, &self.fine]
            .iter()
            .map(|r| {
                [
                    r.n.to_string(),
                    r.verdict.label().to_string(),
                    r.max_defect.to_string(),
                    r.samples.len().to_string(),
                ]
            })
            .collect()
    }
}

/// Runs `cfg` at `n` and `2n` and measures the virial defect at each.
pub fn experiment_virial(cfg: &RunConfig) -> Result<VirialReport> {
    let mut fine_cfg = cfg.clone();
    fine_cfg.n = 2 * cfg.n;
    let runs: Vec<Result<VirialResolution>> = [cfg, &fine_cfg]
        .par_iter()
        .map(|c| {
            let outcome = simulate(c)?;
            let samples = virial_samples(&outcome.trajectory, c.d, c.alpha1, c.alpha2, c.drift);
            let max_defect = samples.iter().fold(0.0f64, |m, s| m.max(s.relative_defect));
            Ok(VirialResolution {
                n: c.n,
                verdict: outcome.verdict,
                samples,
                max_defect,
            })
        })
        .collect();
    let mut runs = runs.into_iter();
    let coarse = runs.next().unwrap_or_else(|| unreachable!())?;
    let fine = runs.next().unwrap_or_else(|| unreachable!())?;
    let partial =
        coarse.samples.len() < MIN_VIRIAL_STRIDES || fine.samples.len() < MIN_VIRIAL_STRIDES;
    let slope = if coarse.max_defect > 0.0 && fine.max_defect > 0.0 {
        (coarse.max_defect / fine.max_defect).log2()
    } else {
        0.0
    };
    Ok(VirialReport {
        coarse,
        fine,
        slope,
        partial,
    })
}

/// One row of a criticality sweep; failures are recorded, not raised.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha1: f64,
    pub alpha2: f64,
    pub ratio: f64,
    pub class: String,
    pub verdict: String,
    pub t_star: f64,
    pub energy0: f64,
    pub virial0: f64,
    pub moment0: f64,
}

impl SweepRow {
    pub const CSV_HEADER: [&'static str; 9] = [
        "alpha1", "alpha2", "ratio", "class", "verdict", "t_star", "E0", "G0", "I0",
    ];

    pub fn csv_row(&self) -> [String; 9] {
        [
            self.alpha1.to_string(),
            self.alpha2.to_string(),
            self.ratio.to_string(),
            self.class.clone(),
            self.verdict.clone(),
            self.t_star.to_string(),
            self.energy0.to_string(),
            self.virial0.to_string(),
            self.moment0.to_string(),
        ]
    }
}

fn sweep_row(base: &RunConfig, alpha1: f64, alpha2: f64) -> SweepRow {
    let mut row = SweepRow {
        alpha1,
        alpha2,
        ratio: f64::NAN,
        class: "invalid".into(),
        verdict: String::new(),
        t_star: -1.0,
        energy0: f64::NAN,
        virial0: f64::NAN,
        moment0: f64::NAN,
    };
    let result = (|| -> Result<()> {
        let c: CriticalityVerdict<f64> = classify(base.d, alpha1, alpha2)?;
        row.ratio = c.ratio;
        row.class = c.class.to_string();
        let mut cfg = base.clone();
        cfg.alpha1 = alpha1;
        cfg.alpha2 = alpha2;
        let outcome = simulate(&cfg)?;
        let first = &outcome.trajectory[0];
        row.energy0 = first.energy;
        row.virial0 = first.virial_rate;
        row.moment0 = first.second_moment;
        row.verdict = outcome.verdict.label().to_string();
        row.t_star = outcome.verdict.blow_up_time().unwrap_or(-1.0);
        Ok(())
    })();
    if let Err(e) = result {
        row.verdict = format!("Error: {e}");
    }
    row
}

/// Runs `base` once per `(alpha1, alpha2)` pair, concurrently, keeping input order.
pub fn experiment_sweep(base: &RunConfig, alpha_grid: &[(f64, f64)]) -> Result<Vec<SweepRow>> {
    if alpha_grid.is_empty() {
        return Err(Error::config(
            "alpha_grid",
            "must contain at least one pair",
        ));
    }
    base.validate()?;
    Ok(alpha_grid
        .par_iter()
        .map(|&(a1, a2)| sweep_row(base, a1, a2))
        .collect())
}

/// Reads `alpha1 alpha2` pairs, one per line (comma or whitespace separated, `#` comments).
pub fn parse_alpha_grid(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let parsed: Option<Vec<f64>> = nums.iter().map(|s| s.parse().ok()).collect();
        match parsed.as_deref() {
            Some([a1, a2]) => pairs.push((*a1, *a2)),
            _ => {
                return Err(Error::config(
                    format!("alpha grid line {}", i + 1),
                    format!("expected two numbers, got `{line}`"),
                ))
            }
        }
    }
    Ok(pairs)
}

/// Parses a comma or whitespace separated list of regularisation levels.
pub fn parse_eps_list(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|e| Error::config("eps_list", format!("cannot parse `{s}`: {e}")))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DichotomyReport {
    pub sub_class: CriticalityVerdict<f64>,
    pub super_class: CriticalityVerdict<f64>,
    pub sub: RunOutcome<f64>,
    pub sup: RunOutcome<f64>,
    /// `2 I(0) / |G(0)|` of the supercritical data.
    pub virial_bound: f64,
    /// The second moment decreased strictly between every pair of reports.
    pub moment_decreasing: bool,
}

impl DichotomyReport {
    pub fn sub_global(&self) -> bool {
        matches!(self.sub.verdict, Verdict::CompletedGlobal)
    }

    pub fn super_blew_up_in_time(&self) -> bool {
        self.sup
            .verdict
            .blow_up_time()
            .is_some_and(|t| t <= BLOWUP_SAFETY * self.virial_bound)
    }

    pub fn holds(&self) -> bool {
        self.sub_global() && self.super_blew_up_in_time() && self.moment_decreasing
    }

    pub const CSV_HEADER: [&'static str; 7] = [
        "run",
        "ratio",
        "class",
        "verdict",
        "t_star",
        "virial_bound",
        "I_decreasing",
    ];

    pub fn csv_rows(&self) -> [[String; 7]; 2] {
        [
            [
                "sub".into(),
                self.sub_class.ratio.to_string(),
                self.sub_class.class.to_string(),
                self.sub.verdict.label().into(),
                verdict_time(&self.sub.verdict).to_string(),
                String::from("-1"),
                String::from("-"),
            ],
            [
                "super".into(),
                self.super_class.ratio.to_string(),
                self.super_class.class.to_string(),
                self.sup.verdict.label().into(),
                verdict_time(&self.sup.verdict).to_string(),
                self.virial_bound.to_string(),
                self.moment_decreasing.to_string(),
            ],
        ]
    }
}

/// Checks the hypotheses of both halves of the dichotomy, then runs them in parallel.
pub fn experiment_dichotomy(cfg_sub: &RunConfig, cfg_super: &RunConfig) -> Result<DichotomyReport> {
    let sub_class = classify(cfg_sub.d, cfg_sub.alpha1, cfg_sub.alpha2)?;
    if sub_class.class != CriticalityClass::Subcritical {
        return Err(Error::config(
            "alpha1",
            format!(
                "first config must be Subcritical, found {}",
                sub_class.class
            ),
        ));
    }
    let super_class = classify(cfg_super.d, cfg_super.alpha1, cfg_super.alpha2)?;
    if super_class.class != CriticalityClass::Supercritical {
        return Err(Error::config(
            "alpha1",
            format!(
                "second config must be Supercritical, found {}",
                super_class.class
            ),
        ));
    }
    if cfg_super.initial_kind != InitialKind::NegativeEnergyAuto {
        return Err(Error::config(
            "initial_kind",
            "supercritical half needs negative_energy_auto data",
        ));
    }
    let sub0 = cfg_sub.initial_state()?;
    let super0 = cfg_super.initial_state()?;
    let first = EnergyReport::measure(&super0, 0.0)?;
    if !(first.virial_rate < 0.0) {
        return Err(Error::config(
            "initial_kind",
            format!(
                "supercritical data need G(0) < 0, got {}",
                first.virial_rate
            ),
        ));
    }
    let virial_bound = 2.0 * first.second_moment / first.virial_rate.abs();
    let (sub, sup) = rayon::join(
        || run(sub0, &cfg_sub.step_control(), cfg_sub.output_stride),
        || run(super0, &cfg_super.step_control(), cfg_super.output_stride),
    );
    let (sub, sup) = (sub?, sup?);
    let moment_decreasing = sup
        .trajectory
        .windows(2)
        .all(|w| w[1].second_moment < w[0].second_moment);
    Ok(DichotomyReport {
        sub_class,
        super_class,
        sub,
        sup,
        virial_bound,
        moment_decreasing,
    })
}

pub const EPS_STUDY_HEADER: [&str; 6] = ["eps_a", "eps_b", "l1_u", "l1_w", "total", "verdicts"];

pub fn eps_study_rows(study: &EpsilonStudy<f64>) -> Vec<[String; 6]> {
    let fmt = |x: Option<f64>| x.map_or_else(|| "NaN".to_string(), |v| v.to_string());
    study
        .gaps
        .iter()
        .enumerate()
        .map(|(k, g)| {
            [
                study.eps[k].to_string(),
                study.eps[k + 1].to_string(),
                fmt(g.as_ref().map(|g| g.l1_u)),
                fmt(g.as_ref().map(|g| g.l1_w)),
                fmt(g.as_ref().map(|g| g.total())),
                format!(
                    "{}/{}",
                    study.verdicts[k].label(),
                    study.verdicts[k + 1].label()
                ),
            ]
        })
        .collect()
}

/// Runs the initial data of `cfg` at every level of `eps_list` up to `cfg.t_end`.
pub fn experiment_eps(cfg: &RunConfig, eps_list: &[f64]) -> Result<EpsilonStudy<f64>> {
    let initial = cfg.initial_state()?;
    epsilon_convergence(&initial, &cfg.step_control(), eps_list)
}

/// Creates `dir` if needed and returns `dir/name`.
pub fn output_file(dir: &Path, name: &str) -> Result<PathBuf> {
    output::ensure_dir(dir)?;
    Ok(dir.join(name))
}
