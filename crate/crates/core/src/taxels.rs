//! Capacitive taxels: the parallel-plate model, calibration maps, the
//! ring layout around the base and the aggregation of normal forces into a
//! planar base wrench.
//!
//! Sign convention: `phi` of a taxel is the direction, in `F_B`, of the
//! force a compressive contact exerts on the base. A positive reading
//! `F_i` therefore contributes `R(phi_i) (F_i, 0)` and points into the base.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{Matrix2, Vector2};
use rand_core::RngCore;

use crate::math::{cross2, rot2, PlanarWrench, PI};
use crate::model::Footprint;

/// Vacuum permittivity (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum TaxelError {
    NonPositiveGap(f64),
    GapBeyondElasticLayer { gap: f64, elastic_layer: f64 },
    UnknownTaxel(usize),
    DuplicateTaxel(usize),
    OutsideFootprint(usize),
    InvalidCalibration(&'static str),
    InvalidDesign(&'static str),
}

impl fmt::Display for TaxelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaxelError::NonPositiveGap(d) => write!(f, "plate gap must be positive, got {d} m"),
            TaxelError::GapBeyondElasticLayer { gap, elastic_layer } => {
                write!(f, "plate gap {gap} m exceeds the elastic layer height {elastic_layer} m")
            }
            TaxelError::UnknownTaxel(i) => write!(f, "unknown taxel index {i}"),
            TaxelError::DuplicateTaxel(i) => write!(f, "taxel index {i} appears twice"),
            TaxelError::OutsideFootprint(i) => write!(f, "taxel {i} lies outside the base footprint"),
            TaxelError::InvalidCalibration(what) => write!(f, "invalid calibration: {what}"),
            TaxelError::InvalidDesign(what) => write!(f, "invalid taxel design: {what}"),
        }
    }
}

impl core::error::Error for TaxelError {}

/// Construction parameters of one taxel. Lengths in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaxelDesignParams {
    pub height: f64,
    pub width: f64,
    pub length: f64,
    pub rigid_layer_height: f64,
    /// Second printed value for the rigid layer height; kept as metadata.
    pub rigid_layer_height_alt: f64,
    pub elastic_layer_height: f64,
    /// Elastic layer density (kg/m^3).
    pub density: f64,
    /// Conductive layer resistivity (ohm m). Metadata only.
    pub resistivity: f64,
    /// Dielectric permittivity (F/m).
    pub permittivity: f64,
    /// Plate area (m^2).
    pub plate_area: f64,
}

impl Default for TaxelDesignParams {
    /// Values of the fabricated PU-foam taxel. The permittivity assumes a
    /// relative permittivity of 1.3 for the open-cell foam and the plate area
    /// is `width x length` as printed.
    fn default() -> Self {
        Self {
            height: 5e-3,
            width: 4e-3,
            length: 18e-3,
            rigid_layer_height: 12.5e-3,
            rigid_layer_height_alt: 10e-3,
            elastic_layer_height: 15e-3,
            density: 30.0,
            resistivity: 2.65e-8,
            permittivity: 1.3 * VACUUM_PERMITTIVITY,
            plate_area: 4e-3 * 18e-3,
        }
    }
}

impl TaxelDesignParams {
    pub fn validate(&self) -> Result<(), TaxelError> {
        let geometric = [
            self.height,
            self.width,
            self.length,
            self.rigid_layer_height,
            self.rigid_layer_height_alt,
            self.elastic_layer_height,
            self.plate_area,
        ];
        if !geometric.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(TaxelError::InvalidDesign("geometric values must be positive"));
        }
        if !(self.permittivity > 0.0) {
            return Err(TaxelError::InvalidDesign("permittivity must be positive"));
        }
        Ok(())
    }

    /// Rest capacitance with the elastic layer uncompressed.
    pub fn rest_capacitance(&self) -> f64 {
        self.permittivity * self.plate_area / self.elastic_layer_height
    }
}

/// Parallel-plate capacitance `C = eps A / d`.
pub fn capacitance(params: &TaxelDesignParams, gap: f64) -> Result<f64, TaxelError> {
    if !(gap > 0.0) {
        return Err(TaxelError::NonPositiveGap(gap));
    }
    if gap > params.elastic_layer_height {
        return Err(TaxelError::GapBeyondElasticLayer { gap, elastic_layer: params.elastic_layer_height });
    }
    Ok(params.permittivity * params.plate_area / gap)
}

/// Force -> deformation -> gap -> capacitance -> counts chain of one taxel,
/// used to check that the physical transducer is monotone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoamTransducer {
    pub design: TaxelDesignParams,
    /// Foam compliance (m/N) from the characterization line.
    pub compliance: f64,
    /// Counts per unit relative capacitance change `(C - C0) / C0`.
    pub counts_per_relative_change: f64,
}

impl FoamTransducer {
    /// PU foam: 11.4 mm at 100 N, scaled so that 100 N reads 84 counts.
    pub fn pu_foam() -> Self {
        let design = TaxelDesignParams::default();
        let compliance = 11.4e-3 / 100.0;
        let gap = design.elastic_layer_height - 11.4e-3;
        let rel = design.elastic_layer_height / gap - 1.0;
        Self { design, compliance, counts_per_relative_change: 84.0 / rel }
    }

    pub fn gap(&self, force: f64) -> f64 {
        let e = self.design.elastic_layer_height;
        // the foam bottoms out before the plates touch
        let max_deformation = 0.95 * e;
        e - (self.compliance * force.max(0.0)).min(max_deformation)
    }

    pub fn counts(&self, force: f64) -> Result<f64, TaxelError> {
        let c = capacitance(&self.design, self.gap(force))?;
        let c0 = self.design.rest_capacitance();
        Ok(self.counts_per_relative_change * (c - c0) / c0)
    }
}

/// Affine calibration between raw counts and normal force.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationModel {
    pub material: String,
    /// Counts per newton.
    pub slope: f64,
    /// Counts at zero force.
    pub offset: f64,
    /// Upper end of the calibrated range (N).
    pub max_force: f64,
}

impl CalibrationModel {
    pub fn new(material: impl Into<String>, slope: f64, offset: f64, max_force: f64) -> Result<Self, TaxelError> {
        if !(slope > 0.0 && slope.is_finite()) {
            return Err(TaxelError::InvalidCalibration("slope must be positive"));
        }
        if !offset.is_finite() {
            return Err(TaxelError::InvalidCalibration("offset must be finite"));
        }
        if !(max_force > 0.0 && max_force.is_finite()) {
            return Err(TaxelError::InvalidCalibration("max_force must be positive"));
        }
        Ok(Self { material: material.into(), slope, offset, max_force })
    }

    /// Full-scale PU foam line: 0 counts at rest, 84 counts at 100 N.
    pub fn pu_foam_ld30() -> Self {
        Self::new("PU Foam LD30", 84.0 / 100.0, 0.0, 100.0).expect("valid constants")
    }

    /// Inverse calibration, clamped to `[0, max_force]`.
    pub fn raw_to_force(&self, raw: f64) -> f64 {
        ((raw - self.offset) / self.slope).clamp(0.0, self.max_force)
    }

    /// Continuous encoder used by the simulator before quantization.
    pub fn force_to_raw(&self, force: f64) -> f64 {
        self.offset + self.slope * force
    }
}

impl Default for CalibrationModel {
    fn default() -> Self {
        Self::pu_foam_ld30()
    }
}

/// Pose of one taxel in the base frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaxelGeometry {
    /// 1-based index.
    pub index: usize,
    pub position: Vector2<f64>,
    pub phi: f64,
}

impl TaxelGeometry {
    /// Unit direction of the force a positive reading applies to the base.
    pub fn axis(&self) -> Vector2<f64> {
        taxel_rotation(self.phi) * Vector2::x()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaxelReading {
    pub index: usize,
    /// Raw counts relative to the rest baseline.
    pub raw: f64,
    /// Decoded compressive force (N).
    pub force: f64,
}

impl TaxelReading {
    pub fn from_raw(index: usize, raw: f64, calibration: &CalibrationModel) -> Self {
        Self { index, raw, force: calibration.raw_to_force(raw) }
    }

    /// A reading carrying a force directly, with counts from the calibration.
    pub fn from_force(index: usize, force: f64, calibration: &CalibrationModel) -> Self {
        Self { index, raw: calibration.force_to_raw(force), force: force.max(0.0) }
    }
}

/// `R(phi)` about the base z-axis.
pub fn taxel_rotation(phi: f64) -> Matrix2<f64> {
    rot2(phi)
}

/// Validated set of taxel poses.
#[derive(Debug, Clone, PartialEq)]
pub struct TaxelLayout {
    taxels: Vec<TaxelGeometry>,
}

impl TaxelLayout {
    pub fn new(taxels: Vec<TaxelGeometry>, footprint: &Footprint) -> Result<Self, TaxelError> {
        let limit = footprint.half_diagonal() * (1.0 + 1e-9);
        for (n, t) in taxels.iter().enumerate() {
            if taxels[..n].iter().any(|o| o.index == t.index) {
                return Err(TaxelError::DuplicateTaxel(t.index));
            }
            if !(t.position.norm() <= limit) || !t.phi.is_finite() {
                return Err(TaxelError::OutsideFootprint(t.index));
            }
        }
        Ok(Self { taxels })
    }

    pub fn taxels(&self) -> &[TaxelGeometry] {
        &self.taxels
    }

    pub fn len(&self) -> usize {
        self.taxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taxels.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&TaxelGeometry> {
        self.taxels.iter().find(|t| t.index == index)
    }

    pub fn slot(&self, index: usize) -> Option<usize> {
        self.taxels.iter().position(|t| t.index == index)
    }
}

/// The 11-taxel ring: four taxels on each side and three on the front,
/// evenly spaced along each edge.
///
/// Numbering: `T1..T4` left side from rear to front, `T5..T7` front from
/// left to right, `T8..T11` right side from rear to front. With this order
/// `T6` sits on the base x-axis and the pairs `(T4, T8)` and `(T1, T11)`
/// are diagonal, so equal inward pushes on either pair produce a pure yaw
/// moment of opposite sign.
pub fn default_layout(footprint: &Footprint) -> TaxelLayout {
    let (hl, hw) = (0.5 * footprint.length, 0.5 * footprint.width);
    let side_x = |k: usize| -hl + footprint.length * (k as f64 + 0.5) / 4.0;
    let front_y = |k: usize| hw * (1.0 - (2 * k + 1) as f64 / 3.0);
    let mut taxels = Vec::with_capacity(crate::TAXEL_COUNT);
    for k in 0..4 {
        taxels.push(TaxelGeometry { index: 1 + k, position: Vector2::new(side_x(k), hw), phi: -PI / 2.0 });
    }
    for k in 0..3 {
        taxels.push(TaxelGeometry { index: 5 + k, position: Vector2::new(hl, front_y(k)), phi: PI });
    }
    for k in 0..4 {
        taxels.push(TaxelGeometry { index: 8 + k, position: Vector2::new(side_x(k), -hw), phi: PI / 2.0 });
    }
    TaxelLayout::new(taxels, footprint).expect("default layout lies on the footprint")
}

/// Planar base wrench `(F_x, F_y, M_z)` in `F_B` from taxel readings.
pub fn base_external_wrench(readings: &[TaxelReading], layout: &TaxelLayout) -> Result<PlanarWrench, TaxelError> {
    let mut wrench = PlanarWrench::zeros();
    for reading in readings {
        let taxel = layout.get(reading.index).ok_or(TaxelError::UnknownTaxel(reading.index))?;
        let force = taxel_rotation(taxel.phi) * Vector2::new(reading.force, 0.0);
        wrench.x += force.x;
        wrench.y += force.y;
        wrench.z += cross2(&taxel.position, &force);
    }
    Ok(wrench)
}

/// Simulator-side sensor front end: continuous force to quantized counts
/// with optional zero-mean noise, followed by decoding.
///
/// Noise is uniform with standard deviation `noise_std` counts. Readings at
/// or below `deadband` counts are reported as zero; the deadband is the
/// smallest integer covering the noise amplitude so an unloaded taxel always
/// reads zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TaxelEncoder {
    calibration: CalibrationModel,
    noise_std: f64,
    deadband: f64,
}

impl TaxelEncoder {
    pub fn new(calibration: CalibrationModel, noise_std: f64) -> Self {
        let noise_std = noise_std.max(0.0);
        let deadband = libm::ceil(libm::sqrt(3.0) * noise_std);
        Self { calibration, noise_std, deadband }
    }

    pub fn calibration(&self) -> &CalibrationModel {
        &self.calibration
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn deadband(&self) -> f64 {
        self.deadband
    }

    pub fn encode<R: RngCore>(&self, index: usize, force: f64, rng: &mut R) -> TaxelReading {
        let mut counts = self.calibration.force_to_raw(force.max(0.0)) - self.calibration.offset;
        if self.noise_std > 0.0 {
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            counts += (2.0 * u - 1.0) * libm::sqrt(3.0) * self.noise_std;
        }
        let mut raw = libm::round(counts).max(0.0);
        if raw <= self.deadband {
            raw = 0.0;
        }
        TaxelReading::from_raw(index, raw + self.calibration.offset, &self.calibration)
    }
}
