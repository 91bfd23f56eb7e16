//! Parameter extraction from simulated maps.

pub mod diamond;
pub mod families;
pub mod fit;
pub mod honeycomb;
pub mod peaks;
pub mod report;

use crate::error::{Error, Result};

pub use diamond::{fit_diamond, zero_bias_transitions, DiamondFit, Edge};
pub use families::{fit_family_slopes, label_families, FamilyFit, SlopeFamily};
pub use fit::LineFit;
pub use honeycomb::{triple_points_closed_form, vertex_splitting, GatePoint, VertexSplitting};
pub use peaks::{detect_peaks, Family, NoiseFloor, PeakLocus, PeakOptions, ScanAxis};
pub use report::ExtractionReport;

/// A fitted value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Self { value, stderr }
    }
}

/// Energy (meV) of a gate-voltage interval (mV) at lever arm `alpha`.
pub fn gate_to_energy(delta_vg: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(
            "alpha",
            format!("lever arm must lie in (0, 1), got {alpha}"),
        ));
    }
    if !delta_vg.is_finite() {
        return Err(Error::invalid("delta_vg", format!("must be finite, got {delta_vg}")));
    }
    Ok(alpha * delta_vg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_to_energy_checks_alpha() {
        assert!((gate_to_energy(24.88, 0.2205).unwrap() - 5.486).abs() < 1e-3);
        assert!(gate_to_energy(1.0, 0.0).is_err());
        assert!(gate_to_energy(1.0, 1.0).is_err());
        assert!(gate_to_energy(f64::NAN, 0.5).is_err());
    }
}
