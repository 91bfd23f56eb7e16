//! Capacitance network and per-island parameters of a donor and a quantum dot
//! conducting in parallel, plus the closed-form observables of a single island.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::E_OVER_AF;

/// Capacitances (aF) of one island to source, drain, front gate and back gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacitanceSet {
    c_source: f64,
    c_drain: f64,
    c_gate: f64,
    c_back: f64,
}

impl CapacitanceSet {
    pub fn new(c_source: f64, c_drain: f64, c_gate: f64, c_back: f64) -> Result<Self> {
        for (name, v) in [
            ("c_source", c_source),
            ("c_drain", c_drain),
            ("c_gate", c_gate),
            ("c_back", c_back),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        Ok(Self {
            c_source,
            c_drain,
            c_gate,
            c_back,
        })
    }

    pub fn c_source(&self) -> f64 {
        self.c_source
    }

    pub fn c_drain(&self) -> f64 {
        self.c_drain
    }

    pub fn c_gate(&self) -> f64 {
        self.c_gate
    }

    pub fn c_back(&self) -> f64 {
        self.c_back
    }

    /// Capacitance to the terminal `t`.
    pub fn to(&self, t: Terminal) -> f64 {
        match t {
            Terminal::Source => self.c_source,
            Terminal::Drain => self.c_drain,
            Terminal::Gate => self.c_gate,
            Terminal::Back => self.c_back,
        }
    }

    /// Total capacitance `C_s + C_d + C_g + C_b` (aF).
    pub fn total(&self) -> f64 {
        self.c_source + self.c_drain + self.c_gate + self.c_back
    }

    /// Charging energy `e^2 / C_total` (meV).
    pub fn charging_energy(&self) -> f64 {
        E_OVER_AF / self.total()
    }

    /// Front-gate lever arm `C_g / C_total` (meV/mV).
    pub fn lever_arm(&self) -> f64 {
        self.c_gate / self.total()
    }

    /// Slopes `dV_d/dV_g` of the Coulomb diamond edges: `C_g / (C_total - C_d)`
    /// and `-C_g / C_d`.
    pub fn diamond_slopes(&self) -> Result<(f64, f64)> {
        let total = self.total();
        if self.c_drain <= 0.0 || total <= self.c_drain {
            return Err(Error::DegenerateCapacitance(format!(
                "diamond slopes need 0 < C_d < C_total (C_d = {}, C_total = {total})",
                self.c_drain
            )));
        }
        Ok((self.c_gate / (total - self.c_drain), -self.c_gate / self.c_drain))
    }

    /// Slope `dV_g/dV_b = -C_b / C_g` of constant-charge lines with the back
    /// gate on the abscissa.
    pub fn backgate_slope(&self) -> Result<f64> {
        if self.c_gate <= 0.0 {
            return Err(Error::DegenerateCapacitance("C_g must be nonzero".into()));
        }
        Ok(-self.c_back / self.c_gate)
    }

    /// Front-gate period `e / C_g` (mV) of the Coulomb peaks of a metallic island.
    pub fn peak_spacing(&self) -> f64 {
        E_OVER_AF / self.c_gate
    }
}

/// One orbital of a discrete spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Level {
    /// Energy above the lowest orbital (meV).
    pub offset: f64,
    pub degeneracy: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    Metallic,
    Discrete,
}

/// Single-particle spectrum of an island, filled bottom-up.
#[derive(Debug, Clone, PartialEq)]
pub enum DotSpectrum {
    /// Zero level spacing and unbounded degeneracy.
    Metallic,
    /// Orbitals with nondecreasing offsets, the first at 0.
    Discrete(Vec<Level>),
}

impl DotSpectrum {
    pub fn discrete(levels: Vec<Level>) -> Result<Self> {
        let Some(first) = levels.first() else {
            return Err(Error::invalid("levels", "a discrete spectrum needs at least one level"));
        };
        if first.offset != 0.0 {
            return Err(Error::invalid("levels", "the first level offset must be 0"));
        }
        for w in levels.windows(2) {
            if !(w[1].offset >= w[0].offset) {
                return Err(Error::invalid("levels", "level offsets must be nondecreasing"));
            }
        }
        for l in &levels {
            if !l.offset.is_finite() {
                return Err(Error::invalid("levels", "level offsets must be finite"));
            }
            if l.degeneracy == 0 {
                return Err(Error::invalid("levels", "degeneracies must be positive"));
            }
        }
        Ok(DotSpectrum::Discrete(levels))
    }

    /// Spin-degenerate ground doublet and a spin-degenerate excited doublet
    /// `splitting` meV above it.
    pub fn donor(splitting: f64) -> Result<Self> {
        Self::discrete(vec![
            Level {
                offset: 0.0,
                degeneracy: 2,
            },
            Level {
                offset: splitting,
                degeneracy: 2,
            },
        ])
    }

    pub fn kind(&self) -> SpectrumKind {
        match self {
            DotSpectrum::Metallic => SpectrumKind::Metallic,
            DotSpectrum::Discrete(_) => SpectrumKind::Discrete,
        }
    }

    /// Maximum number of electrons, `None` when unbounded.
    pub fn capacity(&self) -> Option<u32> {
        match self {
            DotSpectrum::Metallic => None,
            DotSpectrum::Discrete(levels) => Some(levels.iter().map(|l| l.degeneracy).sum()),
        }
    }

    /// Occupation of each level for `n` electrons.
    fn occupations(levels: &[Level], n: u32) -> impl Iterator<Item = (&Level, u32)> + '_ {
        let mut left = n;
        levels.iter().map(move |l| {
            let occ = left.min(l.degeneracy);
            left -= occ;
            (l, occ)
        })
    }

    /// Summed level offsets of `n` electrons (meV).
    pub fn orbital_energy(&self, n: u32) -> f64 {
        match self {
            DotSpectrum::Metallic => 0.0,
            DotSpectrum::Discrete(levels) => Self::occupations(levels, n).map(|(l, occ)| l.offset * occ as f64).sum(),
        }
    }

    /// Empty slots in the orbital the `(n+1)`-th electron enters.
    pub fn in_multiplicity(&self, n: u32) -> u32 {
        match self {
            DotSpectrum::Metallic => 1,
            DotSpectrum::Discrete(levels) => Self::occupations(levels, n)
                .find(|(l, occ)| *occ < l.degeneracy)
                .map_or(0, |(l, occ)| l.degeneracy - occ),
        }
    }

    /// Electrons in the orbital the `n`-th electron leaves when the island
    /// goes from `n` to `n - 1`.
    pub fn out_multiplicity(&self, n: u32) -> u32 {
        match self {
            DotSpectrum::Metallic => u32::from(n > 0),
            DotSpectrum::Discrete(levels) => Self::occupations(levels, n)
                .filter(|(_, occ)| *occ > 0)
                .last()
                .map_or(0, |(_, occ)| occ),
        }
    }

    /// Number of microscopic configurations of `n` electrons in their
    /// lowest orbitals.
    pub fn microstates(&self, n: u32) -> f64 {
        match self {
            DotSpectrum::Metallic => 1.0,
            DotSpectrum::Discrete(levels) => Self::occupations(levels, n)
                .map(|(l, occ)| binomial(l.degeneracy, occ))
                .product(),
        }
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Inclusive range of electron numbers an island may hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyWindow {
    pub min: u32,
    pub max: u32,
}

impl OccupancyWindow {
    pub fn new(min: u32, max: u32) -> Result<Self> {
        if min > max {
            return Err(Error::invalid("window", format!("min {min} exceeds max {max}")));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, n: u32) -> bool {
        (self.min..=self.max).contains(&n)
    }

    pub fn len(&self) -> usize {
        (self.max - self.min) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// One island: capacitances, spectrum, bare tunnel rates and occupancy window.
#[derive(Debug, Clone, PartialEq)]
pub struct DotSpec {
    caps: CapacitanceSet,
    spectrum: DotSpectrum,
    energy_offset: f64,
    gamma_source: f64,
    gamma_drain: f64,
    window: OccupancyWindow,
}

impl DotSpec {
    /// `energy_offset` is the energy (meV) of the lowest orbital, counted once
    /// per electron on top of the electrostatic energy.
    pub fn new(
        caps: CapacitanceSet,
        spectrum: DotSpectrum,
        energy_offset: f64,
        gamma_source: f64,
        gamma_drain: f64,
        window: OccupancyWindow,
    ) -> Result<Self> {
        if !energy_offset.is_finite() {
            return Err(Error::invalid("energy_offset", "must be finite"));
        }
        for (name, v) in [("gamma_source", gamma_source), ("gamma_drain", gamma_drain)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        if let Some(cap) = spectrum.capacity() {
            if window.max > cap {
                return Err(Error::invalid(
                    "window",
                    format!("max {} exceeds the spectrum capacity {cap}", window.max),
                ));
            }
        }
        Ok(Self {
            caps,
            spectrum,
            energy_offset,
            gamma_source,
            gamma_drain,
            window,
        })
    }

    pub fn caps(&self) -> &CapacitanceSet {
        &self.caps
    }

    pub fn spectrum(&self) -> &DotSpectrum {
        &self.spectrum
    }

    pub fn energy_offset(&self) -> f64 {
        self.energy_offset
    }

    pub fn gamma_source(&self) -> f64 {
        self.gamma_source
    }

    pub fn gamma_drain(&self) -> f64 {
        self.gamma_drain
    }

    pub fn gamma(&self, lead: Lead) -> f64 {
        match lead {
            Lead::Source => self.gamma_source,
            Lead::Drain => self.gamma_drain,
        }
    }

    pub fn window(&self) -> OccupancyWindow {
        self.window
    }

    /// Same island with its occupancy pinned to `n`, which removes it from
    /// transport.
    pub fn frozen_at(&self, n: u32) -> Result<Self> {
        let mut out = self.clone();
        out.window = OccupancyWindow::new(n, n)?;
        if let Some(cap) = out.spectrum.capacity() {
            if n > cap {
                return Err(Error::invalid("window", format!("{n} exceeds capacity {cap}")));
            }
        }
        Ok(out)
    }

    pub fn with_energy_offset(mut self, energy_offset: f64) -> Self {
        self.energy_offset = energy_offset;
        self
    }

    pub fn with_window(mut self, window: OccupancyWindow) -> Result<Self> {
        self.window = window;
        Self::new(
            self.caps,
            self.spectrum,
            self.energy_offset,
            self.gamma_source,
            self.gamma_drain,
            self.window,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DotIndex {
    Donor,
    Dot,
}

impl DotIndex {
    pub const ALL: [DotIndex; 2] = [DotIndex::Donor, DotIndex::Dot];

    pub fn index(self) -> usize {
        match self {
            DotIndex::Donor => 0,
            DotIndex::Dot => 1,
        }
    }
}

impl fmt::Display for DotIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DotIndex::Donor => "donor",
            DotIndex::Dot => "dot",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lead {
    Source,
    Drain,
}

impl Lead {
    pub const ALL: [Lead; 2] = [Lead::Source, Lead::Drain];
}

/// Which self capacitance enters the closed-form anticrossing shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelfCapacitance {
    /// Lead and gate capacitances only.
    LeadsOnly,
    /// Lead and gate capacitances plus the mutual capacitance.
    WithMutual,
}

/// A donor and a quantum dot in parallel between the same leads, coupled
/// only capacitively.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    donor: DotSpec,
    dot: DotSpec,
    c_mutual: f64,
    temperature: f64,
}

/// Default bare tunnel rate per barrier (Hz).
pub const DEFAULT_GAMMA: f64 = 1e9;

/// Default temperature (K).
pub const DEFAULT_TEMPERATURE: f64 = 4.2;

impl DeviceSpec {
    pub fn new(donor: DotSpec, dot: DotSpec, c_mutual: f64, temperature: f64) -> Result<Self> {
        if !(c_mutual.is_finite() && c_mutual >= 0.0) {
            return Err(Error::invalid(
                "c_mutual",
                format!("must be finite and >= 0, got {c_mutual}"),
            ));
        }
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::invalid(
                "temperature_K",
                format!("must be positive and finite, got {temperature}"),
            ));
        }
        Ok(Self {
            donor,
            dot,
            c_mutual,
            temperature,
        })
    }

    /// Arsenic donor and electrostatic dot with the reference capacitances,
    /// a 15.4 meV valley splitting, 1 GHz barriers and 4.2 K.
    ///
    /// The donor D0 resonance sits near `V_g = 2.40 V` at zero back gate and
    /// drain bias; there the first dot level lies 64 meV higher.
    pub fn table1() -> Self {
        let donor = DotSpec::new(
            CapacitanceSet::new(1.74, 1.83, 1.44, 0.86).unwrap(),
            DotSpectrum::donor(15.4).unwrap(),
            575.0,
            DEFAULT_GAMMA,
            DEFAULT_GAMMA,
            OccupancyWindow::new(0, 4).unwrap(),
        )
        .unwrap();
        let dot = DotSpec::new(
            CapacitanceSet::new(11.44, 8.76, 6.44, 2.57).unwrap(),
            DotSpectrum::Metallic,
            590.3,
            DEFAULT_GAMMA,
            DEFAULT_GAMMA,
            OccupancyWindow::new(0, 12).unwrap(),
        )
        .unwrap();
        Self::new(donor, dot, 0.0, DEFAULT_TEMPERATURE).unwrap()
    }

    pub fn donor(&self) -> &DotSpec {
        &self.donor
    }

    pub fn dot(&self) -> &DotSpec {
        &self.dot
    }

    pub fn island(&self, which: DotIndex) -> &DotSpec {
        match which {
            DotIndex::Donor => &self.donor,
            DotIndex::Dot => &self.dot,
        }
    }

    pub fn c_mutual(&self) -> f64 {
        self.c_mutual
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn with_c_mutual(&self, c_mutual: f64) -> Result<Self> {
        Self::new(self.donor.clone(), self.dot.clone(), c_mutual, self.temperature)
    }

    pub fn with_temperature(&self, temperature: f64) -> Result<Self> {
        Self::new(self.donor.clone(), self.dot.clone(), self.c_mutual, temperature)
    }

    pub fn with_island(&self, which: DotIndex, spec: DotSpec) -> Self {
        let mut out = self.clone();
        match which {
            DotIndex::Donor => out.donor = spec,
            DotIndex::Dot => out.dot = spec,
        }
        out
    }

    /// Copy in which only `which` conducts; the other island is pinned at
    /// the bottom of its window.
    pub fn isolate(&self, which: DotIndex) -> Result<Self> {
        let other = match which {
            DotIndex::Donor => DotIndex::Dot,
            DotIndex::Dot => DotIndex::Donor,
        };
        let spec = self.island(other);
        let pinned = spec.frozen_at(spec.window().min)?;
        Ok(self.with_island(other, pinned))
    }

    /// Front-gate shift of the donor pattern across a honeycomb vertex,
    /// `e C_m / (C_m C_g,dot + C_g,donor C_self,donor)` in mV.
    ///
    /// This is a closed-form estimate; the ground-state map is the reference.
    pub fn anticrossing_shift(&self, convention: SelfCapacitance) -> f64 {
        let cm = self.c_mutual;
        if cm == 0.0 {
            return 0.0;
        }
        let donor = self.donor.caps();
        let self_cap = match convention {
            SelfCapacitance::LeadsOnly => donor.total(),
            SelfCapacitance::WithMutual => donor.total() + cm,
        };
        E_OVER_AF * cm / (cm * self.dot.caps().c_gate() + donor.c_gate() * self_cap)
    }
}

/// Voltage terminals of the device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Terminal {
    #[serde(rename = "v_source")]
    Source,
    #[serde(rename = "v_drain")]
    Drain,
    #[serde(rename = "v_gate")]
    Gate,
    #[serde(rename = "v_back")]
    Back,
}

impl Terminal {
    pub const ALL: [Terminal; 4] = [Terminal::Source, Terminal::Drain, Terminal::Gate, Terminal::Back];

    pub fn name(self) -> &'static str {
        match self {
            Terminal::Source => "v_source",
            Terminal::Drain => "v_drain",
            Terminal::Gate => "v_gate",
            Terminal::Back => "v_back",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Terminal voltages (mV).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BiasPoint {
    pub v_source: f64,
    pub v_drain: f64,
    pub v_gate: f64,
    pub v_back: f64,
}

impl BiasPoint {
    pub fn new(v_source: f64, v_drain: f64, v_gate: f64, v_back: f64) -> Self {
        Self {
            v_source,
            v_drain,
            v_gate,
            v_back,
        }
    }

    pub fn get(&self, t: Terminal) -> f64 {
        match t {
            Terminal::Source => self.v_source,
            Terminal::Drain => self.v_drain,
            Terminal::Gate => self.v_gate,
            Terminal::Back => self.v_back,
        }
    }

    pub fn set(&mut self, t: Terminal, v: f64) {
        match t {
            Terminal::Source => self.v_source = v,
            Terminal::Drain => self.v_drain = v,
            Terminal::Gate => self.v_gate = v,
            Terminal::Back => self.v_back = v,
        }
    }

    pub fn with(mut self, t: Terminal, v: f64) -> Self {
        self.set(t, v);
        self
    }

    /// Voltage of the lead `lead`.
    pub fn lead(&self, lead: Lead) -> f64 {
        match lead {
            Lead::Source => self.v_source,
            Lead::Drain => self.v_drain,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for t in Terminal::ALL {
            if !self.get(t).is_finite() {
                return Err(Error::invalid(t.name(), "bias voltages must be finite"));
            }
        }
        Ok(())
    }
}
