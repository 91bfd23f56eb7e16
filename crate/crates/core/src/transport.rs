//! Sequential tunneling between the leads and the two islands.
//!
//! Charge states `(N, M)` are connected by single-electron hops to or from
//! the source or drain. A hop into island `i` from lead `l` happens at rate
//! `Gamma_{l,i} g_in f((mu_i - mu_l) / kT)` and the reverse hop at
//! `Gamma_{l,i} g_out (1 - f(...))`, with `mu_l = -V_l` (meV for V in mV).
//! The stationary occupation probabilities solve `W p = 0`, `sum p = 1`.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::condensation;
use petgraph::graph::DiGraph;
use petgraph::visit::EdgeRef;

use crate::device::{BiasPoint, DeviceSpec, DotIndex, Lead};
use crate::energy::Electrostatics;
use crate::error::{Error, Result};
use crate::units::{thermal_energy, CONDUCTANCE_QUANTUM, ELEMENTARY_CHARGE};

/// Largest state space [`enumerate_states`] accepts.
pub const DEFAULT_STATE_CAP: usize = 10_000;

/// Default drain-bias step (mV) for numerical conductance.
pub const DEFAULT_DELTA_VD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeState {
    pub n_donor: u32,
    pub m_dot: u32,
    /// `U(N, M)` in meV at the bias the state was enumerated for.
    pub energy: f64,
}

impl ChargeState {
    pub fn occupation(&self) -> (u32, u32) {
        (self.n_donor, self.m_dot)
    }

    fn occ(&self, which: DotIndex) -> u32 {
        match which {
            DotIndex::Donor => self.n_donor,
            DotIndex::Dot => self.m_dot,
        }
    }
}

/// All states of the occupancy windows in lexicographic order.
pub fn enumerate_states(device: &DeviceSpec, bias: &BiasPoint) -> Result<Vec<ChargeState>> {
    enumerate_states_capped(device, bias, DEFAULT_STATE_CAP)
}

pub fn enumerate_states_capped(device: &DeviceSpec, bias: &BiasPoint, cap: usize) -> Result<Vec<ChargeState>> {
    bias.validate()?;
    let wn = device.donor().window();
    let wm = device.dot().window();
    let count = wn.len() * wm.len();
    if count > cap {
        return Err(Error::StateSpaceTooLarge { count, cap });
    }
    let es = Electrostatics::new(device)?;
    let induced = es.induced_charge(bias);
    let mut out = Vec::with_capacity(count);
    for n in wn.min..=wn.max {
        for m in wm.min..=wm.max {
            out.push(ChargeState {
                n_donor: n,
                m_dot: m,
                energy: es.energy(device, [n, m], induced),
            });
        }
    }
    Ok(out)
}

/// Fermi-Dirac occupation `1 / (1 + e^x)`, evaluated without overflow.
pub fn fermi(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// One directed tunneling event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hop {
    pub from: usize,
    pub to: usize,
    pub dot: DotIndex,
    pub lead: Lead,
    /// `true` when the electron enters the island.
    pub into_dot: bool,
    /// Hz.
    pub rate: f64,
}

/// Generator of the master equation: entry `(to, from)` is the rate of
/// `from -> to`, the diagonal makes every column sum to zero.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    generator: DMatrix<f64>,
    labels: Vec<(u32, u32)>,
    hops: Vec<Hop>,
}

impl RateMatrix {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, to: usize, from: usize) -> f64 {
        self.generator[(to, from)]
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn labels(&self) -> &[(u32, u32)] {
        &self.labels
    }

    pub fn hops(&self) -> &[Hop] {
        &self.hops
    }

    /// Largest relative column sum, `|sum_j W_jk| / sum_{j != k} W_jk`.
    pub fn generator_defect(&self) -> f64 {
        (0..self.dim())
            .map(|k| {
                let col = self.generator.column(k);
                let off: f64 = col.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, v)| *v).sum();
                if off == 0.0 {
                    col.sum().abs()
                } else {
                    col.sum().abs() / off
                }
            })
            .fold(0.0, f64::max)
    }

    /// Net electron flux (1/s) from the islands into `lead`, and the gross
    /// flux through that lead in both directions.
    pub fn lead_flux(&self, probabilities: &[f64], lead: Lead) -> (f64, f64) {
        let mut net = 0.0;
        let mut gross = 0.0;
        for h in self.hops.iter().filter(|h| h.lead == lead) {
            let flow = probabilities[h.from] * h.rate;
            gross += flow;
            if h.into_dot {
                net -= flow;
            } else {
                net += flow;
            }
        }
        (net, gross)
    }
}

/// Builds the rate matrix over `states`, which must come from
/// [`enumerate_states`] at the same bias.
pub fn transition_rates(device: &DeviceSpec, bias: &BiasPoint, states: &[ChargeState]) -> Result<RateMatrix> {
    let kt = thermal_energy(device.temperature());
    if !(kt > 0.0) {
        return Err(Error::invalid("temperature_K", "must be positive"));
    }
    let wn = device.donor().window();
    let wm = device.dot().window();
    let index = |n: u32, m: u32| -> Option<usize> {
        (wn.contains(n) && wm.contains(m)).then(|| (n - wn.min) as usize * wm.len() + (m - wm.min) as usize)
    };
    if states.len() != wn.len() * wm.len()
        || states
            .iter()
            .enumerate()
            .any(|(k, s)| index(s.n_donor, s.m_dot) != Some(k))
    {
        return Err(Error::invalid(
            "states",
            "not the enumerated state space of this device",
        ));
    }

    let dim = states.len();
    let mut generator = DMatrix::zeros(dim, dim);
    let mut hops = Vec::with_capacity(dim * 8);
    for (from, s) in states.iter().enumerate() {
        for which in DotIndex::ALL {
            let occ = s.occ(which);
            let target = match which {
                DotIndex::Donor => index(s.n_donor + 1, s.m_dot),
                DotIndex::Dot => index(s.n_donor, s.m_dot + 1),
            };
            let Some(to) = target else { continue };
            let island = device.island(which);
            let g_in = f64::from(island.spectrum().in_multiplicity(occ));
            let g_out = f64::from(island.spectrum().out_multiplicity(occ + 1));
            let mu = states[to].energy - s.energy;
            for lead in Lead::ALL {
                let x = (mu + bias.lead(lead)) / kt;
                let gamma = island.gamma(lead);
                let rate_in = gamma * g_in * fermi(x);
                let rate_out = gamma * g_out * fermi(-x);
                hops.push(Hop {
                    from,
                    to,
                    dot: which,
                    lead,
                    into_dot: true,
                    rate: rate_in,
                });
                hops.push(Hop {
                    from: to,
                    to: from,
                    dot: which,
                    lead,
                    into_dot: false,
                    rate: rate_out,
                });
                generator[(to, from)] += rate_in;
                generator[(from, to)] += rate_out;
            }
        }
    }
    for k in 0..dim {
        let off: f64 = generator.column(k).iter().sum();
        generator[(k, k)] = -off;
    }
    Ok(RateMatrix {
        generator,
        labels: states.iter().map(ChargeState::occupation).collect(),
        hops,
    })
}

/// Closed communicating classes of the hop graph (states with no exit).
fn closed_classes(rates: &RateMatrix) -> Vec<Vec<usize>> {
    let dim = rates.dim();
    let mut graph = DiGraph::<usize, ()>::with_capacity(dim, rates.hops.len());
    let nodes: Vec<_> = (0..dim).map(|k| graph.add_node(k)).collect();
    for to in 0..dim {
        for from in 0..dim {
            if to != from && rates.generator[(to, from)] > 0.0 {
                graph.add_edge(nodes[from], nodes[to], ());
            }
        }
    }
    let dag = condensation(graph, true);
    dag.node_indices()
        .filter(|&c| dag.edges(c).all(|e| e.target() == c))
        .map(|c| {
            let mut members = dag[c].clone();
            members.sort_unstable();
            members
        })
        .collect()
}

/// Stationary probabilities of `rates`.
///
/// The last balance equation is replaced by the normalization row and the
/// system is solved by LU with partial pivoting. Round-off negatives are
/// clipped to zero.
pub fn stationary_distribution(rates: &RateMatrix) -> Result<Vec<f64>> {
    let dim = rates.dim();
    if dim == 0 {
        return Err(Error::Numerical("empty state space".into()));
    }
    if dim == 1 {
        return Ok(vec![1.0]);
    }
    let closed = closed_classes(rates);
    if closed.len() > 1 {
        let mut components: Vec<Vec<(u32, u32)>> = closed
            .into_iter()
            .map(|c| c.into_iter().map(|k| rates.labels[k]).collect())
            .collect();
        components.sort();
        return Err(Error::DisconnectedStates { components });
    }

    let mut a = rates.generator.clone();
    a.row_mut(dim - 1).fill(1.0);
    let mut b = DVector::zeros(dim);
    b[dim - 1] = 1.0;
    let p = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numerical("singular master equation".into()))?;

    let mut p: Vec<f64> = p.iter().copied().collect();
    let worst = p.iter().copied().fold(0.0, f64::min);
    if worst < -1e-9 || p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("probability {worst:e} after solve")));
    }
    for v in &mut p {
        *v = v.max(0.0);
    }
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total;
    }
    Ok(p)
}

/// Current (A) into the drain. Positive when electrons leave the islands
/// into the drain, i.e. flow source to drain for `V_d > 0`.
pub fn drain_current(rates: &RateMatrix, probabilities: &[f64]) -> f64 {
    ELEMENTARY_CHARGE * rates.lead_flux(probabilities, Lead::Drain).0
}

/// Current (A) into the source, same sign convention as [`drain_current`].
pub fn source_current(rates: &RateMatrix, probabilities: &[f64]) -> f64 {
    ELEMENTARY_CHARGE * rates.lead_flux(probabilities, Lead::Source).0
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub states: Vec<ChargeState>,
    pub probabilities: Vec<f64>,
    /// A.
    pub i_drain: f64,
    /// A.
    pub i_source: f64,
    /// Gross charge throughput at the drain (A), the scale of `i_drain`.
    pub drain_throughput: f64,
}

impl SteadyState {
    pub fn probability(&self, n: u32, m: u32) -> Option<f64> {
        self.states
            .iter()
            .position(|s| s.n_donor == n && s.m_dot == m)
            .map(|k| self.probabilities[k])
    }
}

pub fn solve(device: &DeviceSpec, bias: &BiasPoint) -> Result<SteadyState> {
    let states = enumerate_states(device, bias)?;
    let rates = transition_rates(device, bias, &states)?;
    let probabilities = stationary_distribution(&rates)?;
    let (_, gross) = rates.lead_flux(&probabilities, Lead::Drain);
    Ok(SteadyState {
        i_drain: drain_current(&rates, &probabilities),
        i_source: source_current(&rates, &probabilities),
        drain_throughput: ELEMENTARY_CHARGE * gross,
        states,
        probabilities,
    })
}

/// Drain current (A) at `bias`.
pub fn current(device: &DeviceSpec, bias: &BiasPoint) -> Result<f64> {
    Ok(solve(device, bias)?.i_drain)
}

/// Differential conductance `dI/dV_d` by central difference with step
/// `delta_vd` (mV), in units of `e^2/h`.
pub fn conductance(device: &DeviceSpec, bias: &BiasPoint, delta_vd: f64) -> Result<f64> {
    if !(delta_vd.is_finite() && delta_vd > 0.0) {
        return Err(Error::invalid("delta_vd", "must be positive"));
    }
    let up = current(
        device,
        &bias.with(crate::device::Terminal::Drain, bias.v_drain + delta_vd),
    )?;
    let down = current(
        device,
        &bias.with(crate::device::Terminal::Drain, bias.v_drain - delta_vd),
    )?;
    let siemens = (up - down) / (2.0 * delta_vd * 1e-3);
    Ok(siemens / CONDUCTANCE_QUANTUM)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{CapacitanceSet, DotSpec, DotSpectrum, OccupancyWindow, Terminal};
    use approx::assert_relative_eq;

    fn small_device() -> DeviceSpec {
        let t = DeviceSpec::table1();
        let donor = t
            .donor()
            .clone()
            .with_window(OccupancyWindow::new(0, 1).unwrap())
            .unwrap();
        let dot = t
            .dot()
            .clone()
            .with_window(OccupancyWindow::new(0, 1).unwrap())
            .unwrap();
        DeviceSpec::new(donor, dot, 0.0, 4.2).unwrap()
    }

    #[test]
    fn enumeration_order_and_count() {
        let states = enumerate_states(&small_device(), &BiasPoint::default()).unwrap();
        let occ: Vec<_> = states.iter().map(ChargeState::occupation).collect();
        assert_eq!(occ, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        let all = enumerate_states(&DeviceSpec::table1(), &BiasPoint::default()).unwrap();
        assert_eq!(all.len(), 65);
        assert!(matches!(
            enumerate_states_capped(&DeviceSpec::table1(), &BiasPoint::default(), 10),
            Err(Error::StateSpaceTooLarge { count: 65, cap: 10 })
        ));
    }

    #[test]
    fn fermi_limits() {
        assert_eq!(fermi(0.0), 0.5);
        assert!(fermi(800.0) >= 0.0 && fermi(800.0) < 1e-300);
        assert_eq!(fermi(-800.0), 1.0);
        assert_relative_eq!(fermi(1e-9), 0.5, epsilon = 1e-9);
        for x in [-3.0, -0.2, 0.7, 5.0] {
            assert_relative_eq!(fermi(x) + fermi(-x), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn hot_limit_equalizes_rates() {
        let dev = small_device()
            .isolate(DotIndex::Dot)
            .unwrap()
            .with_temperature(1e9)
            .unwrap();
        let bias = BiasPoint::new(0.0, 0.0, 2500.0, 0.0);
        let states = enumerate_states(&dev, &bias).unwrap();
        let rates = transition_rates(&dev, &bias, &states).unwrap();
        assert_relative_eq!(rates.get(1, 0), rates.get(0, 1), max_relative = 1e-6);
        assert_relative_eq!(rates.get(1, 0), 1e9, max_relative = 1e-6);
    }

    #[test]
    fn two_state_closed_form() {
        // Rates a (0 -> 1) and b (1 -> 0) give p = (b, a) / (a + b).
        let dev = small_device().isolate(DotIndex::Dot).unwrap();
        let bias = BiasPoint::new(0.0, 0.3, 2690.0, 0.0);
        let states = enumerate_states(&dev, &bias).unwrap();
        let rates = transition_rates(&dev, &bias, &states).unwrap();
        let (a, b) = (rates.get(1, 0), rates.get(0, 1));
        let p = stationary_distribution(&rates).unwrap();
        assert_relative_eq!(p[0], b / (a + b), max_relative = 1e-12);
        assert_relative_eq!(p[1], a / (a + b), max_relative = 1e-12);
    }

    #[test]
    fn single_level_current_in_bias_window() {
        // One non-degenerate level deep inside the window: I = e Gs Gd / (Gs + Gd).
        let caps = CapacitanceSet::new(2.0, 2.0, 2.0, 1.0).unwrap();
        let gs = 3e9;
        let gd = 1e9;
        let island = DotSpec::new(
            caps,
            DotSpectrum::Metallic,
            0.0,
            gs,
            gd,
            OccupancyWindow::new(0, 1).unwrap(),
        )
        .unwrap();
        let donor = DeviceSpec::table1().donor().frozen_at(0).unwrap();
        let dev = DeviceSpec::new(donor, island, 0.0, 0.1).unwrap();
        // mu(1) = e^2/(2C) - e (C_g V_g + C_d V_d) / C, placed at -V_d / 2.
        let c = caps.total();
        let vd = 20.0;
        let vg = (crate::units::E_OVER_AF / 2.0 + c * vd / 2.0 - 2.0 * vd) / 2.0;
        let bias = BiasPoint::new(0.0, vd, vg, 0.0);
        let s = solve(&dev, &bias).unwrap();
        let mu = s.states[1].energy - s.states[0].energy;
        assert!(mu < -5.0 && mu > -vd + 5.0, "mu = {mu}");
        let expected = ELEMENTARY_CHARGE * gs * gd / (gs + gd);
        assert_relative_eq!(s.i_drain, expected, max_relative = 1e-9);
        assert_relative_eq!(s.i_source, -expected, max_relative = 1e-9);
    }

    #[test]
    fn zero_bias_has_no_current() {
        let dev = DeviceSpec::table1();
        for vg in [2300.0, 2399.55, 2500.0, 2700.0] {
            let s = solve(&dev, &BiasPoint::new(0.0, 0.0, vg, 0.0)).unwrap();
            assert!(s.i_drain.abs() < 1e-18, "{}", s.i_drain);
        }
    }

    #[test]
    fn current_flips_with_drain_bias() {
        let dev = DeviceSpec::table1().isolate(DotIndex::Dot).unwrap();
        let b = BiasPoint::new(0.0, 1.0, 2700.0, 0.0);
        let fwd = current(&dev, &b).unwrap();
        let rev = current(&dev, &b.with(Terminal::Drain, -1.0)).unwrap();
        assert!(fwd > 0.0 && rev < 0.0);
    }

    #[test]
    fn rate_scaling_leaves_distribution() {
        let dev = DeviceSpec::table1();
        let bias = BiasPoint::new(0.0, 2.0, 2690.0, 0.0);
        let states = enumerate_states(&dev, &bias).unwrap();
        let rates = transition_rates(&dev, &bias, &states).unwrap();
        let mut scaled = rates.clone();
        scaled.generator *= 10.0;
        let p = stationary_distribution(&rates).unwrap();
        let q = stationary_distribution(&scaled).unwrap();
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn disconnected_graph_reported() {
        let dev = small_device();
        let bias = BiasPoint::default();
        let states = enumerate_states(&dev, &bias).unwrap();
        let mut rates = transition_rates(&dev, &bias, &states).unwrap();
        // Cut every hop touching the donor: {(0,0),(0,1)} and {(1,0),(1,1)} separate.
        rates.generator.fill(0.0);
        rates.generator[(1, 0)] = 1.0;
        rates.generator[(0, 1)] = 1.0;
        rates.generator[(3, 2)] = 1.0;
        rates.generator[(2, 3)] = 1.0;
        for k in 0..4 {
            let s: f64 = rates.generator.column(k).sum();
            rates.generator[(k, k)] = -s;
        }
        match stationary_distribution(&rates) {
            Err(Error::DisconnectedStates { components }) => {
                assert_eq!(components, vec![vec![(0, 0), (0, 1)], vec![(1, 0), (1, 1)]]);
            }
            other => panic!("expected disconnected error, got {other:?}"),
        }
    }

    #[test]
    fn transient_states_allowed() {
        // A state that can be left but never entered still leaves a unique solution.
        let dev = small_device();
        let bias = BiasPoint::default();
        let states = enumerate_states(&dev, &bias).unwrap();
        let mut rates = transition_rates(&dev, &bias, &states).unwrap();
        rates.generator.fill(0.0);
        rates.generator[(1, 0)] = 2.0;
        rates.generator[(2, 1)] = 1.0;
        rates.generator[(1, 2)] = 3.0;
        rates.generator[(3, 2)] = 1.0;
        rates.generator[(2, 3)] = 1.0;
        for k in 0..4 {
            let s: f64 = rates.generator.column(k).sum();
            rates.generator[(k, k)] = -s;
        }
        let p = stationary_distribution(&rates).unwrap();
        assert_eq!(p[0], 0.0);
        assert_relative_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn hops_only_change_one_electron() {
        let dev = DeviceSpec::table1().with_c_mutual(5.0).unwrap();
        let bias = BiasPoint::new(0.0, 3.0, 2750.0, -20.0);
        let states = enumerate_states(&dev, &bias).unwrap();
        let rates = transition_rates(&dev, &bias, &states).unwrap();
        for to in 0..rates.dim() {
            for from in 0..rates.dim() {
                if to == from || rates.get(to, from) == 0.0 {
                    continue;
                }
                let (a, b) = (rates.labels()[to], rates.labels()[from]);
                let dn = a.0.abs_diff(b.0);
                let dm = a.1.abs_diff(b.1);
                assert_eq!(dn + dm, 1);
                assert!(rates.get(to, from) > 0.0);
            }
        }
        assert!(rates.generator_defect() < 1e-9);
    }

    #[test]
    fn conductance_blockade_and_peak() {
        let dev = DeviceSpec::table1().isolate(DotIndex::Donor).unwrap();
        let on = BiasPoint::new(0.0, 0.0, 2399.55, 0.0);
        let off = on.with(Terminal::Gate, 2455.0);
        let g_on = conductance(&dev, &on, DEFAULT_DELTA_VD).unwrap();
        let g_off = conductance(&dev, &off, DEFAULT_DELTA_VD).unwrap();
        assert!(g_off < 1e-8, "{g_off}");
        assert!(g_on > 1e3 * g_off);
        let g_half = conductance(&dev, &on.with(Terminal::Gate, 2400.5), DEFAULT_DELTA_VD / 2.0).unwrap();
        let g_full = conductance(&dev, &on.with(Terminal::Gate, 2400.5), DEFAULT_DELTA_VD).unwrap();
        assert_relative_eq!(g_half, g_full, max_relative = 1e-2);
        assert!(conductance(&dev, &on, 0.0).is_err());
    }
}
