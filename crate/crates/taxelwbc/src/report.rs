//! Human-readable and JSON reports for calibration and simulation runs.

use serde::Serialize;
use taxelwbc_core::calib::MaterialReport;
use taxelwbc_core::sim::RunSummary;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaterialRow {
    pub material: String,
    /// `None` when deformation was not recorded at the maximum load.
    pub max_deformation_mm: Option<f64>,
    pub deformation_nrmse_pct: Option<f64>,
    pub max_raw_variation: f64,
    pub raw_nrmse_pct: f64,
    /// Counts per newton.
    pub slope: f64,
    pub offset: f64,
    pub max_force: f64,
}

impl From<&MaterialReport> for MaterialRow {
    fn from(r: &MaterialReport) -> Self {
        MaterialRow {
            material: r.material.clone(),
            max_deformation_mm: r.max_deformation(),
            deformation_nrmse_pct: r.deformation_nrmse,
            max_raw_variation: r.max_raw_variation,
            raw_nrmse_pct: r.raw_nrmse,
            slope: r.calibration.slope,
            offset: r.calibration.offset,
            max_force: r.max_force,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub materials: Vec<MaterialRow>,
    pub selected: String,
}

impl CalibrationReport {
    pub fn new(reports: &[MaterialReport], selected: &MaterialReport) -> Self {
        CalibrationReport {
            materials: reports.iter().map(MaterialRow::from).collect(),
            selected: selected.material.clone(),
        }
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>, prec: usize| v.map_or("NA".to_string(), |x| format!("{x:.prec$}"));
        let mut s = format!(
            "{:<18} {:>8} {:>10} {:>8} {:>10} {:>10}\n",
            "material", "dx [mm]", "RMSE dx %", "ds", "RMSE ds %", "counts/N"
        );
        for m in &self.materials {
            s += &format!(
                "{:<18} {:>8} {:>10} {:>8.0} {:>10.2} {:>10.4}\n",
                m.material,
                opt(m.max_deformation_mm, 1),
                opt(m.deformation_nrmse_pct, 3),
                m.max_raw_variation,
                m.raw_nrmse_pct,
                m.slope
            );
        }
        s += &format!("selected: {}\n", self.selected);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub rows: usize,
    pub duration: f64,
    /// Decoded sensor peaks per taxel, `[T1, .., T11]` (N).
    pub peak_taxel_force: Vec<f64>,
    /// Physical contact or push peaks per taxel (N).
    pub peak_applied_force: Vec<f64>,
    pub max_tracking_error_m: f64,
    pub final_base: [f64; 3],
}

impl RunReport {
    pub fn new(s: &RunSummary) -> Self {
        RunReport {
            rows: s.rows,
            duration: s.duration,
            peak_taxel_force: s.peak_taxel_force.to_vec(),
            peak_applied_force: s.peak_applied_force.to_vec(),
            max_tracking_error_m: s.max_tracking_error,
            final_base: [s.final_base.x, s.final_base.y, s.final_base.z],
        }
    }

    /// Taxels (1-based) whose physical force ever exceeded `threshold`.
    pub fn touched_taxels(&self, threshold: f64) -> Vec<usize> {
        (1..=self.peak_applied_force.len()).filter(|i| self.peak_applied_force[i - 1] > threshold).collect()
    }

    pub fn to_text(&self, title: &str) -> String {
        let mut s = format!("{title}: {} rows, {:.3} s\n", self.rows, self.duration);
        s += "taxel      sensed [N]  applied [N]\n";
        for (i, (p, a)) in self.peak_taxel_force.iter().zip(&self.peak_applied_force).enumerate() {
            if *p > 0.0 || *a > 0.0 {
                s += &format!("T{:<9} {:>10.2} {:>12.2}\n", i + 1, p, a);
            }
        }
        s += &format!("max end-effector error: {:.4} m\n", self.max_tracking_error_m);
        s += &format!(
            "final base: x {:.4} m, y {:.4} m, yaw {:.4} rad\n",
            self.final_base[0], self.final_base[1], self.final_base[2]
        );
        s
    }
}
