//! Constant-interaction energy of an (N, M) charge configuration.
//!
//! The two islands form a 2x2 capacitance matrix with diagonal
//! `C_total,i + C_m` and off-diagonal `-C_m`. With the charge vector
//! `q_i = -N_i + sum_j C_ij V_j / e` (in units of e) the energy is
//! `U = (e^2 / 2) q^T C^-1 q` plus the orbital energy of each island.

use crate::device::{BiasPoint, DeviceSpec, DotIndex, Terminal};
use crate::error::{Error, Result};
use crate::units::E_OVER_AF;

/// Inverse capacitance matrix and gate couplings of a device, precomputed
/// for repeated energy evaluations.
#[derive(Debug, Clone)]
pub struct Electrostatics {
    /// `C^-1` in 1/aF, row-major.
    inverse: [[f64; 2]; 2],
    couplings: [[f64; 4]; 2],
    offsets: [f64; 2],
}

impl Electrostatics {
    pub fn new(device: &DeviceSpec) -> Result<Self> {
        let cm = device.c_mutual();
        let c0 = device.donor().caps().total() + cm;
        let c1 = device.dot().caps().total() + cm;
        let det = c0 * c1 - cm * cm;
        if !(det > 0.0) || det <= 1e-12 * c0 * c1 {
            return Err(Error::SingularCapacitanceMatrix { determinant: det });
        }
        let inverse = [[c1 / det, cm / det], [cm / det, c0 / det]];
        let couplings = DotIndex::ALL.map(|i| Terminal::ALL.map(|t| device.island(i).caps().to(t)));
        let offsets = DotIndex::ALL.map(|i| device.island(i).energy_offset());
        Ok(Self {
            inverse,
            couplings,
            offsets,
        })
    }

    /// Inverse capacitance matrix (1/aF).
    pub fn inverse(&self) -> [[f64; 2]; 2] {
        self.inverse
    }

    /// Charge (units of e) induced on each island by the terminal voltages.
    pub fn induced_charge(&self, bias: &BiasPoint) -> [f64; 2] {
        self.couplings.map(|row| {
            Terminal::ALL
                .iter()
                .zip(row)
                .map(|(t, c)| c * bias.get(*t))
                .sum::<f64>()
                / E_OVER_AF
        })
    }

    /// Electrostatic part of `U` (meV) for occupations `occ` and induced
    /// charges `induced`.
    pub fn charging_energy(&self, occ: [u32; 2], induced: [f64; 2]) -> f64 {
        let q = [induced[0] - f64::from(occ[0]), induced[1] - f64::from(occ[1])];
        let inv = &self.inverse;
        0.5 * E_OVER_AF * (q[0] * (inv[0][0] * q[0] + inv[0][1] * q[1]) + q[1] * (inv[1][0] * q[0] + inv[1][1] * q[1]))
    }

    /// Total energy (meV) including the orbital terms.
    pub fn energy(&self, device: &DeviceSpec, occ: [u32; 2], induced: [f64; 2]) -> f64 {
        let orbital: f64 = DotIndex::ALL
            .iter()
            .map(|&i| {
                let n = occ[i.index()];
                device.island(i).spectrum().orbital_energy(n) + self.offsets[i.index()] * f64::from(n)
            })
            .sum();
        self.charging_energy(occ, induced) + orbital
    }
}

fn check_state(device: &DeviceSpec, state: (u32, u32)) -> Result<()> {
    if device.donor().window().contains(state.0) && device.dot().window().contains(state.1) {
        Ok(())
    } else {
        Err(Error::OutOfWindow { n: state.0, m: state.1 })
    }
}

/// Energy `U(N, M; V)` in meV of `state = (N_donor, M_dot)`.
pub fn electrostatic_energy(device: &DeviceSpec, state: (u32, u32), bias: &BiasPoint) -> Result<f64> {
    bias.validate()?;
    check_state(device, state)?;
    let es = Electrostatics::new(device)?;
    Ok(es.energy(device, [state.0, state.1], es.induced_charge(bias)))
}

/// Energy (meV) to add the last electron of `which` in `state`:
/// `U(state) - U(state - 1_which)`.
pub fn electrochemical_potential(
    device: &DeviceSpec,
    which: DotIndex,
    state: (u32, u32),
    bias: &BiasPoint,
) -> Result<f64> {
    bias.validate()?;
    check_state(device, state)?;
    let occ = [state.0, state.1];
    if occ[which.index()] == 0 {
        return Err(Error::EmptyDot {
            dot: which,
            n: state.0,
            m: state.1,
        });
    }
    let mut lower = occ;
    lower[which.index()] -= 1;
    let es = Electrostatics::new(device)?;
    let induced = es.induced_charge(bias);
    Ok(es.energy(device, occ, induced) - es.energy(device, lower, induced))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{CapacitanceSet, DotSpec, DotSpectrum, OccupancyWindow};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn zero() -> BiasPoint {
        BiasPoint::default()
    }

    fn bare_device(c_mutual: f64) -> DeviceSpec {
        let t = DeviceSpec::table1();
        let donor = t.donor().clone().with_energy_offset(0.0);
        let dot = t.dot().clone().with_energy_offset(0.0);
        DeviceSpec::new(donor, dot, c_mutual, 4.2).unwrap()
    }

    #[test]
    fn empty_unbiased_state_has_zero_energy() {
        assert_eq!(
            electrostatic_energy(&DeviceSpec::table1(), (0, 0), &zero()).unwrap(),
            0.0
        );
    }

    #[test]
    fn donor_addition_energy_is_charging_energy() {
        let d = bare_device(0.0);
        let u = |n| electrostatic_energy(&d, (n, 0), &zero()).unwrap();
        let second_difference = u(1) - u(0) - (u(2) - u(1));
        assert_relative_eq!(-second_difference, 160.217_663_4 / 5.87, max_relative = 1e-12);
        assert!((-second_difference - 27.3).abs() < 0.1);
    }

    #[test]
    fn cross_addition_energy_matches_hand_inverse() {
        let d = bare_device(5.0);
        let u = |s| electrostatic_energy(&d, s, &zero()).unwrap();
        let cross = u((1, 1)) - u((1, 0)) - u((0, 1)) + u((0, 0));
        // [[10.87, -5], [-5, 34.21]]^-1 off-diagonal = 5 / (10.87 * 34.21 - 25).
        let expected = 160.217_663_4 * 5.0 / (10.87 * 34.21 - 25.0);
        assert!(cross > 0.0);
        assert_relative_eq!(cross, expected, max_relative = 1e-12);
    }

    #[test]
    fn donor_second_electron_pairs_in_ground_doublet() {
        let d = bare_device(0.0);
        let mu = |n| electrochemical_potential(&d, DotIndex::Donor, (n, 0), &zero()).unwrap();
        let ec = d.donor().caps().charging_energy();
        assert_relative_eq!(mu(2) - mu(1), ec, max_relative = 1e-12);
        assert_relative_eq!(mu(3) - mu(2), ec + 15.4, max_relative = 1e-12);
        assert_relative_eq!(mu(4) - mu(3), ec, max_relative = 1e-12);
    }

    #[test]
    fn metallic_addition_energy_constant() {
        let d = bare_device(0.0);
        let ec = d.dot().caps().charging_energy();
        for m in 1..12 {
            let a = electrochemical_potential(&d, DotIndex::Dot, (0, m), &zero()).unwrap();
            let b = electrochemical_potential(&d, DotIndex::Dot, (0, m + 1), &zero()).unwrap();
            assert_relative_eq!(b - a, ec, max_relative = 1e-10);
        }
    }

    #[test]
    fn gate_lowers_potential_by_lever_arm() {
        let d = bare_device(0.0);
        let delta = 3.7;
        for which in DotIndex::ALL {
            let b0 = BiasPoint::new(0.0, 1.0, 2400.0, 5.0);
            let b1 = b0.with(Terminal::Gate, 2400.0 + delta);
            let mu0 = electrochemical_potential(&d, which, (1, 1), &b0).unwrap();
            let mu1 = electrochemical_potential(&d, which, (1, 1), &b1).unwrap();
            let alpha = d.island(which).caps().lever_arm();
            assert_relative_eq!(mu0 - mu1, alpha * delta, max_relative = 1e-9);
        }
    }

    #[test]
    fn error_paths() {
        let d = DeviceSpec::table1();
        assert!(matches!(
            electrostatic_energy(&d, (5, 0), &zero()),
            Err(Error::OutOfWindow { .. })
        ));
        assert!(matches!(
            electrochemical_potential(&d, DotIndex::Dot, (1, 0), &zero()),
            Err(Error::EmptyDot { .. })
        ));
        let bad = BiasPoint::new(0.0, f64::NAN, 0.0, 0.0);
        assert!(electrostatic_energy(&d, (0, 0), &bad).is_err());
    }

    #[test]
    fn table1_level_alignment() {
        let d = DeviceSpec::table1();
        // Donor D0 resonance near 2.40 V; the dot's first level is 64 meV above it.
        let vg = 2399.55;
        let b = BiasPoint::new(0.0, 0.0, vg, 0.0);
        let mu_donor = electrochemical_potential(&d, DotIndex::Donor, (1, 0), &b).unwrap();
        let mu_dot = electrochemical_potential(&d, DotIndex::Dot, (0, 1), &b).unwrap();
        assert!(mu_donor.abs() < 0.01, "{mu_donor}");
        assert!((mu_dot - mu_donor - 64.0).abs() < 0.05, "{}", mu_dot - mu_donor);
    }

    fn single_island_energy(spec: &DotSpec, n: u32, bias: &BiasPoint) -> f64 {
        let c = spec.caps();
        let induced: f64 = Terminal::ALL.iter().map(|t| c.to(*t) * bias.get(*t)).sum::<f64>() / E_OVER_AF;
        let q = induced - f64::from(n);
        0.5 * E_OVER_AF * q * q / c.total() + spec.spectrum().orbital_energy(n) + spec.energy_offset() * f64::from(n)
    }

    fn random_dot(which: u8) -> impl Strategy<Value = DotSpec> {
        (0.1f64..20.0, 0.1f64..20.0, 0.1f64..20.0, 0.1f64..20.0, -50.0f64..50.0).prop_map(move |(s, d, g, b, off)| {
            let spectrum = if which == 0 {
                DotSpectrum::donor(15.4).unwrap()
            } else {
                DotSpectrum::Metallic
            };
            let max = if which == 0 { 4 } else { 12 };
            DotSpec::new(
                CapacitanceSet::new(s, d, g, b).unwrap(),
                spectrum,
                off,
                1e9,
                1e9,
                OccupancyWindow::new(0, max).unwrap(),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn uncoupled_energy_decomposes(
            donor in random_dot(0),
            dot in random_dot(1),
            n in 0u32..=4,
            m in 0u32..=12,
            vs in -50.0f64..50.0, vd in -50.0f64..50.0, vg in -3000.0f64..3000.0, vb in -500.0f64..500.0,
        ) {
            let device = DeviceSpec::new(donor.clone(), dot.clone(), 0.0, 4.2).unwrap();
            let bias = BiasPoint::new(vs, vd, vg, vb);
            let u = electrostatic_energy(&device, (n, m), &bias).unwrap();
            let parts = single_island_energy(&donor, n, &bias) + single_island_energy(&dot, m, &bias);
            prop_assert!((u - parts).abs() <= 1e-12 * u.abs().max(parts.abs()).max(1.0));
        }

        #[test]
        fn metallic_addition_energy_bias_independent(
            dot in random_dot(1),
            m in 1u32..12,
            vs in -50.0f64..50.0, vd in -50.0f64..50.0, vg in -3000.0f64..3000.0, vb in -500.0f64..500.0,
        ) {
            let device = DeviceSpec::new(DeviceSpec::table1().donor().clone(), dot.clone(), 0.0, 4.2).unwrap();
            let bias = BiasPoint::new(vs, vd, vg, vb);
            let u = |k| electrostatic_energy(&device, (0, k), &bias).unwrap();
            let add = u(m + 1) - 2.0 * u(m) + u(m - 1);
            let ec = dot.caps().charging_energy();
            let scale = u(m).abs().max(ec);
            prop_assert!((add - ec).abs() <= 1e-9 * scale, "{add} vs {ec}");
        }
    }
}
