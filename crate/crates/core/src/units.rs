//! Physical constants in the unit system used throughout the crate.
//!
//! Capacitances are in aF, voltages in mV, energies in meV, rates in Hz,
//! currents in A. With these units `e / (1 aF)` is 160.2 mV and
//! `e^2 / (1 aF)` is 160.2 meV, so the same constant converts both.

/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Boltzmann constant (meV/K).
pub const BOLTZMANN_MEV_PER_K: f64 = 8.617_333_262e-2;

/// `e / (1 aF)` in mV, numerically equal to `e^2 / (1 aF)` in meV.
pub const E_OVER_AF: f64 = ELEMENTARY_CHARGE / 1e-18 * 1e3;

/// Conductance quantum `e^2 / h` (S).
pub const CONDUCTANCE_QUANTUM: f64 = ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / PLANCK;

/// Thermal energy `k_B T` in meV.
pub fn thermal_energy(temperature_k: f64) -> f64 {
    BOLTZMANN_MEV_PER_K * temperature_k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_constants() {
        assert!((E_OVER_AF - 160.217_663_4).abs() < 1e-9);
        assert!((CONDUCTANCE_QUANTUM - 3.874_045_86e-5).abs() < 1e-13);
        assert!((thermal_energy(4.2) - 0.361_928).abs() < 1e-6);
    }
}
