//! Characterization (deformation vs force) and calibration (raw counts vs
//! force) fits for candidate dielectric foams.
//!
//! RMSE is reported twice: in the raw unit of the fitted quantity (mm or
//! counts) and normalized to the observed full-scale range, as a percentage.
//! The printed material table uses the normalized form.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum CalibError {
    /// Fewer than two samples, or all abscissae equal.
    DegenerateAbscissa,
    InsufficientData(&'static str),
    InvalidSample {
        trial: u32,
        reason: &'static str,
    },
    NoCandidates,
}

impl fmt::Display for CalibError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CalibError::DegenerateAbscissa => write!(f, "need at least two distinct x values"),
            CalibError::InsufficientData(what) => write!(f, "insufficient data: {what}"),
            CalibError::InvalidSample { trial, reason } => write!(f, "invalid sample in trial {trial}: {reason}"),
            CalibError::NoCandidates => write!(f, "no material reports to choose from"),
        }
    }
}

impl core::error::Error for CalibError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub offset: f64,
    pub rmse: f64,
}

impl LinearFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.offset
    }
}

/// Ordinary least squares `y = slope x + offset`.
pub fn fit_linear(points: &[(f64, f64)]) -> Result<LinearFit, CalibError> {
    if points.len() < 2 {
        return Err(CalibError::DegenerateAbscissa);
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let scale = points.iter().map(|p| libm::fabs(p.0)).fold(0.0, f64::max).max(1.0);
    if !(sxx > 1e-24 * scale * scale * n) {
        return Err(CalibError::DegenerateAbscissa);
    }
    let slope = sxy / sxx;
    let offset = my - slope * mx;
    let sse: f64 = points.iter().map(|(x, y)| (y - slope * x - offset) * (y - slope * x - offset)).sum();
    Ok(LinearFit { slope, offset, rmse: libm::sqrt(sse / n) })
}

/// One row of a compression sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSample {
    pub trial: u32,
    /// Applied force (N).
    pub force: f64,
    /// Measured deformation (mm), absent when it was not recorded.
    pub deformation: Option<f64>,
    /// Raw capacitance variation (counts).
    pub raw: f64,
}

/// Deformation block of a report; absent when deformation was not recorded
/// at the maximum load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Characterization {
    /// Maximum deformation `dx` (mm).
    pub max_deformation: f64,
    pub fit: LinearFit,
    /// RMSE as a percentage of the deformation range.
    pub nrmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialReport {
    pub material: String,
    pub max_force: f64,
    pub characterization: Option<Characterization>,
    /// Deformation fit over the rows that have a deformation, reported even
    /// when `characterization` is absent.
    pub deformation_fit: Option<LinearFit>,
    pub deformation_nrmse: Option<f64>,
    /// Maximum raw variation `ds` (counts).
    pub max_raw_variation: f64,
    pub calibration: LinearFit,
    /// Calibration RMSE as a percentage of the raw range.
    pub raw_nrmse: f64,
}

impl MaterialReport {
    pub fn max_deformation(&self) -> Option<f64> {
        self.characterization.map(|c| c.max_deformation)
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn normalized(rmse: f64, span: f64) -> f64 {
    if span > 0.0 {
        100.0 * rmse / span
    } else {
        0.0
    }
}

/// Builds the report of one material from its loading sweep.
pub fn material_report(material: &str, samples: &[SweepSample]) -> Result<MaterialReport, CalibError> {
    for s in samples {
        if !(s.force >= 0.0 && s.force.is_finite()) {
            return Err(CalibError::InvalidSample { trial: s.trial, reason: "force must be non-negative" });
        }
        if let Some(d) = s.deformation {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(CalibError::InvalidSample { trial: s.trial, reason: "deformation must be non-negative" });
            }
        }
        if !s.raw.is_finite() {
            return Err(CalibError::InvalidSample { trial: s.trial, reason: "raw value must be finite" });
        }
    }
    let raw_points: Vec<(f64, f64)> = samples.iter().map(|s| (s.force, s.raw)).collect();
    let calibration = fit_linear(&raw_points).map_err(|_| CalibError::InsufficientData("loading sweep"))?;
    let (_, max_force) = range(samples.iter().map(|s| s.force));
    let (raw_lo, raw_hi) = range(samples.iter().map(|s| s.raw));

    let def_points: Vec<(f64, f64)> = samples.iter().filter_map(|s| s.deformation.map(|d| (s.force, d))).collect();
    let deformation_fit = if def_points.is_empty() { None } else { fit_linear(&def_points).ok() };
    let (def_lo, def_hi) = range(def_points.iter().map(|p| p.1));
    let deformation_nrmse = deformation_fit.map(|f| normalized(f.rmse, def_hi - def_lo));

    let at_max: Vec<&SweepSample> = samples.iter().filter(|s| s.force == max_force).collect();
    let complete = at_max.iter().all(|s| s.deformation.is_some());
    let characterization = match (deformation_fit, deformation_nrmse) {
        (Some(fit), Some(nrmse)) if complete => Some(Characterization { max_deformation: def_hi - def_lo, fit, nrmse }),
        _ => None,
    };

    Ok(MaterialReport {
        material: material.into(),
        max_force,
        characterization,
        deformation_fit,
        deformation_nrmse,
        max_raw_variation: raw_hi - raw_lo,
        calibration,
        raw_nrmse: normalized(calibration.rmse, raw_hi - raw_lo),
    })
}

/// Picks the most deformable material; ties go to the lower calibration
/// RMSE and then to input order. A missing deformation ranks last.
pub fn select_material(reports: &[MaterialReport]) -> Result<&MaterialReport, CalibError> {
    const TIE: f64 = 1e-9;
    let mut best: Option<&MaterialReport> = None;
    for r in reports {
        let better = match best {
            None => true,
            Some(b) => match (r.max_deformation(), b.max_deformation()) {
                (None, _) => false,
                (Some(_), None) => true,
                (Some(x), Some(y)) if x > y + TIE => true,
                (Some(x), Some(y)) if libm::fabs(x - y) <= TIE => {
                    r.raw_nrmse.partial_cmp(&b.raw_nrmse) == Some(Ordering::Less)
                }
                _ => false,
            },
        };
        if better {
            best = Some(r);
        }
    }
    best.ok_or(CalibError::NoCandidates)
}

/// Parameters of a reconstructed sweep. Each quantity follows a saturating
/// curve `full (1 - e^{-k u}) / (1 - e^{-k})` of the normalized load `u`,
/// plus a per-trial bow `a_i u (1 - u)`, so every trial passes through zero
/// and through the full-scale value at the maximum load.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSynthesis {
    pub material: String,
    pub max_force: f64,
    pub force_step: f64,
    pub trials: u32,
    /// Full-scale deformation (mm). `None` leaves deformation unrecorded.
    pub deformation_full_scale: Option<f64>,
    pub deformation_curvature: f64,
    pub deformation_spread: f64,
    /// Deformation is left unrecorded for loads at or above this value.
    pub deformation_cutoff: Option<f64>,
    /// Full-scale raw variation (counts); raw values are rounded to integers.
    pub raw_full_scale: f64,
    pub raw_curvature: f64,
    pub raw_spread: f64,
}

fn saturating(u: f64, k: f64) -> f64 {
    if libm::fabs(k) < 1e-9 {
        u
    } else {
        (1.0 - libm::exp(-k * u)) / (1.0 - libm::exp(-k))
    }
}

/// Trial bow coefficients: symmetric about zero, spanning `[-1, 1]`.
fn trial_weight(trial: u32, trials: u32) -> f64 {
    if trials <= 1 {
        0.0
    } else {
        2.0 * trial as f64 / (trials - 1) as f64 - 1.0
    }
}

pub fn synthesize_sweep(p: &SweepSynthesis) -> Vec<SweepSample> {
    let levels = libm::round(p.max_force / p.force_step) as u32;
    let mut out = Vec::with_capacity(((levels + 1) * p.trials) as usize);
    for trial in 0..p.trials {
        let w = trial_weight(trial, p.trials);
        for level in 0..=levels {
            let force = if level == levels { p.max_force } else { level as f64 * p.force_step };
            let u = force / p.max_force;
            let bow = u * (1.0 - u);
            let raw_full = p.raw_full_scale;
            let raw =
                libm::round(raw_full * saturating(u, p.raw_curvature) + w * p.raw_spread * bow).clamp(0.0, raw_full);
            let cut = p.deformation_cutoff.is_some_and(|c| force >= c);
            let deformation = match p.deformation_full_scale {
                Some(full) if !cut => {
                    let d = full * saturating(u, p.deformation_curvature) + w * p.deformation_spread * bow;
                    Some((libm::round(d * 1000.0) / 1000.0).clamp(0.0, full))
                }
                _ => None,
            };
            out.push(SweepSample { trial: trial + 1, force, deformation, raw });
        }
    }
    out
}

/// Grid search over curvature for the value whose normalized RMSE lands
/// closest to `target` (percent). `eval` maps a curvature to the resulting
/// normalized RMSE.
pub fn tune_curvature(target: f64, mut eval: impl FnMut(f64) -> Option<f64>) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for step in 0..=4000 {
        let k = step as f64 * 0.005;
        if let Some(v) = eval(k) {
            let err = libm::fabs(v - target);
            if best.is_none_or(|(_, e)| err < e) {
                best = Some((k, err));
            }
        }
    }
    best
}
