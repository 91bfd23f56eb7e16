//! Coulomb-diamond edges from a (V_g, V_d) conductance map.
//!
//! Each bias row is walked outward from the blockaded centre to the first
//! conductance ridge on either side. A ridge is located at the midpoint of
//! its two half-maximum crossings, which keeps the estimate centred when the
//! ridge is thermally broadened.

use crate::analysis::fit::{fit_line, LineFit};
use crate::analysis::peaks::{find_peaks, parabolic_vertex};
use crate::analysis::Estimate;
use crate::device::Terminal;
use crate::error::{Error, Result};
use crate::sweep::{Axis, ConductanceMap, Observable};

/// Fraction of the zero-bias maximum a peak needs to count as a transition.
pub const TRANSITION_FLOOR: f64 = 0.05;
/// Rows used for the edge fits, as fractions of the largest blockaded |V_d|.
pub const ROW_BAND: (f64, f64) = (0.15, 0.75);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    UpperLeft,
    UpperRight,
    LowerLeft,
    LowerRight,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::UpperLeft, Edge::UpperRight, Edge::LowerLeft, Edge::LowerRight];

    pub fn name(self) -> &'static str {
        match self {
            Edge::UpperLeft => "upper_left",
            Edge::UpperRight => "upper_right",
            Edge::LowerLeft => "lower_left",
            Edge::LowerRight => "lower_right",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiamondFit {
    /// Zero-bias transitions bounding the diamond (mV of V_g).
    pub left_transition: f64,
    pub right_transition: f64,
    /// Edge fits `V_g = intercept + slope * V_d`, indexed like [`Edge::ALL`].
    pub edges: [Option<LineFit>; 4],
    /// dV_d/dV_g of the edges rising from the left transition.
    pub positive_slope: Option<Estimate>,
    /// dV_d/dV_g of the edges falling toward the right transition.
    pub negative_slope: Option<Estimate>,
    /// Half the tip-to-tip extent in V_d (mV), equal to the addition energy
    /// in meV.
    pub height: Option<Estimate>,
    /// `C_g / C_sum` from the two slopes.
    pub lever_arm: Option<Estimate>,
    /// Gate voltages (mV) where the left and right edge pairs meet, the
    /// zero-bias corners of the fitted diamond.
    pub vertices: Option<(f64, f64)>,
    pub missing_edges: Vec<Edge>,
}

impl DiamondFit {
    pub fn edge(&self, e: Edge) -> Option<&LineFit> {
        self.edges[e as usize].as_ref()
    }

    pub fn is_complete(&self) -> bool {
        self.missing_edges.is_empty()
    }

    /// Gate period between the bounding transitions (mV).
    pub fn width(&self) -> f64 {
        self.right_transition - self.left_transition
    }
}

struct Grid<'a> {
    map: &'a ConductanceMap,
    gate_is_axis1: bool,
    log: bool,
}

impl Grid<'_> {
    fn gate(&self) -> &Axis {
        if self.gate_is_axis1 {
            &self.map.plan.axis1
        } else {
            &self.map.plan.axis2
        }
    }

    fn drain(&self) -> &Axis {
        if self.gate_is_axis1 {
            &self.map.plan.axis2
        } else {
            &self.map.plan.axis1
        }
    }

    /// Conductance along the gate axis at drain index `d`.
    fn row(&self, d: usize) -> Vec<f64> {
        let raw = if self.gate_is_axis1 {
            self.map.row(d).to_vec()
        } else {
            self.map.column(d)
        };
        if self.log {
            raw.into_iter().map(|v| 10f64.powf(v)).collect()
        } else {
            raw
        }
    }
}

/// Position of a downward half-maximum crossing between samples `a` (above)
/// and `b` (below), in fractional index.
fn crossing(row: &[f64], a: usize, b: usize, half: f64) -> f64 {
    let (ya, yb) = (row[a], row[b]);
    let t = if ya == yb { 0.0 } else { (ya - half) / (ya - yb) };
    a as f64 + t * (b as f64 - a as f64)
}

/// Ridge centre near the local maximum at `peak`, in fractional index.
fn ridge_centre(row: &[f64], peak: usize) -> f64 {
    let half = 0.5 * row[peak];
    let walk = |dir: isize| -> Option<f64> {
        let mut i = peak as isize;
        loop {
            let j = i + dir;
            if j < 0 || j as usize >= row.len() {
                return None;
            }
            let (iu, ju) = (i as usize, j as usize);
            if row[ju] > row[iu] {
                // Rises again before dropping to half: another ridge.
                return None;
            }
            if row[ju] < half {
                return Some(crossing(row, iu, ju, half));
            }
            i = j;
        }
    };
    match (walk(-1), walk(1)) {
        (Some(l), Some(r)) => 0.5 * (l + r),
        _ if peak > 0 && peak + 1 < row.len() => {
            peak as f64 + parabolic_vertex(row[peak - 1], row[peak], row[peak + 1]).0
        }
        _ => peak as f64,
    }
}

/// Left and right ridge centres around fractional index `centre`, or `None`
/// when the row is not blockaded there.
fn edges_in_row(row: &[f64], centre: f64) -> Option<(f64, f64)> {
    let n = row.len();
    let c = centre.round();
    if c < 1.0 || c >= (n - 1) as f64 {
        return None;
    }
    // Settle into the blockade minimum first.
    let mut c = c as usize;
    while c > 0 && row[c - 1] < row[c] {
        c -= 1;
    }
    while c + 1 < n && row[c + 1] < row[c] {
        c += 1;
    }
    let mut l = c;
    while l > 0 && row[l - 1] >= row[l] {
        l -= 1;
    }
    let mut r = c;
    while r + 1 < n && row[r + 1] >= row[r] {
        r += 1;
    }
    if l == 0 || r == n - 1 || l == c || r == c {
        return None;
    }
    if !(row[c] < 0.5 * row[l].min(row[r])) {
        return None;
    }
    Some((ridge_centre(row, l), ridge_centre(row, r)))
}

fn slope_estimate(fits: [Option<&LineFit>; 2]) -> Option<Estimate> {
    // Edge fits give dV_g/dV_d; invert to dV_d/dV_g.
    let vals: Vec<(f64, f64)> = fits
        .iter()
        .flatten()
        .filter(|f| f.slope != 0.0)
        .map(|f| (1.0 / f.slope, f.slope_stderr / (f.slope * f.slope)))
        .collect();
    match vals.as_slice() {
        [] => None,
        [(v, e)] => Some(Estimate::new(*v, *e)),
        [(a, ea), (b, eb)] => {
            let propagated = 0.5 * (ea * ea + eb * eb).sqrt();
            Some(Estimate::new(0.5 * (a + b), propagated.max(0.5 * (a - b).abs())))
        }
        _ => unreachable!(),
    }
}

/// V_d where two edges meet.
fn tip(a: &LineFit, b: &LineFit) -> Option<f64> {
    let d = a.slope - b.slope;
    if d == 0.0 {
        return None;
    }
    Some((b.intercept - a.intercept) / d)
}

fn height_estimate(ul: &LineFit, ur: &LineFit, ll: &LineFit, lr: &LineFit) -> Option<Estimate> {
    let h = |f: [LineFit; 4]| -> Option<f64> { Some(0.5 * (tip(&f[0], &f[1])? - tip(&f[2], &f[3])?)) };
    let base = [*ul, *ur, *ll, *lr];
    let value = h(base)?;
    let mut var = 0.0;
    for k in 0..4 {
        let mut p = base;
        p[k].slope += p[k].slope_stderr;
        var += (h(p)? - value).powi(2);
        let mut p = base;
        p[k].intercept += p[k].intercept_stderr;
        var += (h(p)? - value).powi(2);
    }
    Some(Estimate::new(value, var.sqrt()))
}

/// Zero-bias transitions of a (V_g, V_d) map, ascending in V_g.
pub fn zero_bias_transitions(map: &ConductanceMap) -> Result<Vec<f64>> {
    let grid = grid(map)?;
    let d0 = zero_row(&grid);
    let row = grid.row(d0);
    let max = row.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Ok(Vec::new());
    }
    let mut peaks: Vec<f64> = find_peaks(&row, grid.gate(), TRANSITION_FLOOR * max)
        .into_iter()
        .map(|p| p.position)
        .collect();
    peaks.sort_by(f64::total_cmp);
    Ok(peaks)
}

fn grid(map: &ConductanceMap) -> Result<Grid<'_>> {
    let log = match map.plan.observable {
        Observable::Conductance => false,
        Observable::Log10Conductance => true,
        Observable::Current => return Err(Error::Extraction("diamond fitting needs a conductance map".into())),
    };
    let (t1, t2) = (map.plan.axis1.terminal, map.plan.axis2.terminal);
    let gate_is_axis1 = match (t1, t2) {
        (Terminal::Gate, Terminal::Drain) => true,
        (Terminal::Drain, Terminal::Gate) => false,
        _ => {
            return Err(Error::Extraction(format!(
                "diamond fitting needs v_gate and v_drain axes, got {} and {}",
                t1.name(),
                t2.name()
            )))
        }
    };
    Ok(Grid {
        map,
        gate_is_axis1,
        log,
    })
}

fn zero_row(grid: &Grid) -> usize {
    let d = grid.drain();
    (0..d.steps)
        .min_by(|&a, &b| d.value(a).abs().total_cmp(&d.value(b).abs()))
        .unwrap_or(0)
}

/// Fits the diamond between zero-bias transitions `index` and `index + 1`.
pub fn fit_diamond(map: &ConductanceMap, index: usize) -> Result<DiamondFit> {
    let grid = grid(map)?;
    let transitions = zero_bias_transitions(map)?;
    if transitions.len() < index + 2 {
        return Err(Error::Extraction(format!(
            "diamond {index} needs {} zero-bias transitions, found {}",
            index + 2,
            transitions.len()
        )));
    }
    let (g_left, g_right) = (transitions[index], transitions[index + 1]);
    let gate = *grid.gate();
    let drain = *grid.drain();
    let to_index = |v: f64| (v - gate.start) / gate.step();
    let to_volts = |x: f64| gate.start + x * gate.step();
    let d0 = zero_row(&grid);
    // Rows walking outward in +V_d and -V_d.
    let up_dir: isize = if drain.step() > 0.0 { 1 } else { -1 };

    let mut sides: [Vec<(f64, f64, f64)>; 2] = [Vec::new(), Vec::new()];
    for (s, dir) in [up_dir, -up_dir].into_iter().enumerate() {
        let mut centre = 0.5 * (to_index(g_left) + to_index(g_right));
        let mut gap = f64::INFINITY;
        let mut tip_row = 0;
        let mut d = d0 as isize + dir;
        while d >= 0 && (d as usize) < drain.steps {
            let vd = drain.value(d as usize);
            if vd == 0.0 {
                d += dir;
                continue;
            }
            let row = grid.row(d as usize);
            let Some((l, r)) = edges_in_row(&row, centre) else {
                break;
            };
            // The gap closes linearly up to the tip; beyond it the crossed
            // edges open again.
            if r - l > gap + 1.0 {
                break;
            }
            if r - l < gap {
                gap = r - l;
                tip_row = sides[s].len();
            }
            sides[s].push((vd, to_volts(l), to_volts(r)));
            centre = 0.5 * (l + r);
            d += dir;
        }
        sides[s].truncate(tip_row + 1);
    }

    let mut edges: [Option<LineFit>; 4] = [None; 4];
    for (s, rows) in sides.iter().enumerate() {
        let reach = rows.iter().map(|r| r.0.abs()).fold(0.0, f64::max);
        let band: Vec<_> = rows
            .iter()
            .filter(|r| r.0.abs() >= ROW_BAND.0 * reach && r.0.abs() <= ROW_BAND.1 * reach)
            .collect();
        if band.len() < 3 {
            continue;
        }
        let left: Vec<(f64, f64)> = band.iter().map(|r| (r.0, r.1)).collect();
        let right: Vec<(f64, f64)> = band.iter().map(|r| (r.0, r.2)).collect();
        let (le, re) = if s == 0 {
            (Edge::UpperLeft, Edge::UpperRight)
        } else {
            (Edge::LowerLeft, Edge::LowerRight)
        };
        edges[le as usize] = fit_line(&left);
        edges[re as usize] = fit_line(&right);
    }
    let missing_edges: Vec<Edge> = Edge::ALL.into_iter().filter(|e| edges[*e as usize].is_none()).collect();
    let e = |x: Edge| edges[x as usize].as_ref();
    let positive_slope = slope_estimate([e(Edge::UpperLeft), e(Edge::LowerRight)]);
    let negative_slope = slope_estimate([e(Edge::UpperRight), e(Edge::LowerLeft)]);
    let height = match (
        e(Edge::UpperLeft),
        e(Edge::UpperRight),
        e(Edge::LowerLeft),
        e(Edge::LowerRight),
    ) {
        (Some(ul), Some(ur), Some(ll), Some(lr)) => height_estimate(ul, ur, ll, lr),
        _ => None,
    };
    let corner = |a: Option<&LineFit>, b: Option<&LineFit>| Some(a?.at(tip(a?, b?)?));
    let vertices = match (
        corner(e(Edge::UpperLeft), e(Edge::LowerLeft)),
        corner(e(Edge::UpperRight), e(Edge::LowerRight)),
    ) {
        (Some(l), Some(r)) => Some((l, r)),
        _ => None,
    };
    let lever_arm = match (positive_slope, negative_slope) {
        (Some(p), Some(n)) => Some(lever_arm_from_slopes(p, n)),
        _ => None,
    };
    Ok(DiamondFit {
        left_transition: g_left,
        right_transition: g_right,
        edges,
        positive_slope,
        negative_slope,
        height,
        lever_arm,
        vertices,
        missing_edges,
    })
}

/// `C_g / C_sum = s+ |s-| / (s+ + |s-|)` from the two diamond slopes.
pub fn lever_arm_from_slopes(positive: Estimate, negative: Estimate) -> Estimate {
    let (p, n) = (positive.value, negative.value.abs());
    let value = p * n / (p + n);
    let dp = n * n / (p + n).powi(2);
    let dn = p * p / (p + n).powi(2);
    Estimate::new(
        value,
        ((dp * positive.stderr).powi(2) + (dn * negative.stderr).powi(2)).sqrt(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::BiasPoint;
    use crate::sweep::SweepPlan;

    /// Synthetic diamonds: Lorentzian ridges along the four edge families
    /// of a metallic island with slopes `sp` and `sn` and period `w`.
    fn synthetic(sp: f64, sn: f64, w: f64) -> ConductanceMap {
        let plan = SweepPlan::new(
            "v_gate:0:100:401".parse().unwrap(),
            "v_drain:-10:10:81".parse().unwrap(),
            BiasPoint::default(),
            Observable::Conductance,
        )
        .unwrap();
        let mut values = vec![0.0; plan.cells()];
        for j in 0..plan.axis2.steps {
            let vd = plan.axis2.value(j);
            for i in 0..plan.axis1.steps {
                let vg = plan.axis1.value(i);
                let mut g = 1e-9;
                for k in 0..6 {
                    let gk = 10.0 + w * k as f64;
                    for x in [gk + vd / sp, gk + vd / sn] {
                        g += 1.0 / (1.0 + ((vg - x) / 0.6).powi(2));
                    }
                }
                values[j * plan.axis1.steps + i] = g;
            }
        }
        ConductanceMap { plan, values }
    }

    #[test]
    fn recovers_synthetic_geometry() {
        let (sp, sn, w) = (0.3149, -0.7352, 24.88);
        let map = synthetic(sp, sn, w);
        let t = zero_bias_transitions(&map).unwrap();
        assert!((t[0] - 10.0).abs() < 0.1);
        let fit = fit_diamond(&map, 1).unwrap();
        assert!(fit.is_complete(), "{fit:?}");
        assert!((fit.positive_slope.unwrap().value / sp - 1.0).abs() < 0.02, "{fit:#?}");
        assert!((fit.negative_slope.unwrap().value / sn - 1.0).abs() < 0.02);
        let alpha = sp * sn.abs() / (sp + sn.abs());
        let expected_height = w * alpha;
        assert!((fit.height.unwrap().value / expected_height - 1.0).abs() < 0.03);
        assert!((fit.lever_arm.unwrap().value / alpha - 1.0).abs() < 0.02);
        assert!((fit.width() - w).abs() < 0.2);
    }

    #[test]
    fn log_map_matches_linear() {
        let map = synthetic(0.3564, -0.7869, 30.0);
        let mut log = map.clone();
        log.plan.observable = Observable::Log10Conductance;
        log.values.iter_mut().for_each(|v| *v = v.log10());
        let a = fit_diamond(&map, 0).unwrap();
        let b = fit_diamond(&log, 0).unwrap();
        let (ha, hb) = (a.height.unwrap().value, b.height.unwrap().value);
        assert!((ha - hb).abs() < 1e-6);
    }

    #[test]
    fn flat_map_fails() {
        let mut map = synthetic(0.3, -0.7, 25.0);
        map.values.iter_mut().for_each(|v| *v = 1e-3);
        assert!(matches!(fit_diamond(&map, 0), Err(Error::Extraction(_))));
    }

    #[test]
    fn wrong_axes_or_observable() {
        let mut map = synthetic(0.3, -0.7, 25.0);
        map.plan.observable = Observable::Current;
        assert!(fit_diamond(&map, 0).is_err());
        let mut map = synthetic(0.3, -0.7, 25.0);
        map.plan.axis2.terminal = Terminal::Back;
        assert!(fit_diamond(&map, 0).is_err());
    }

    #[test]
    fn lever_arm_identity() {
        // C_g/(C_sum - C_d) and -C_g/C_d recombine to C_g/C_sum.
        let (cs, cd, cg, cb) = (11.44, 8.76, 6.44, 2.57);
        let sum = cs + cd + cg + cb;
        let a = lever_arm_from_slopes(Estimate::new(cg / (sum - cd), 0.0), Estimate::new(-cg / cd, 0.0));
        assert!((a.value - cg / sum).abs() < 1e-12);
    }
}
