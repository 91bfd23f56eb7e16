//! Triple points and the vertex splitting of a (V_g, V_b) ground-state map.

use std::collections::BTreeMap;

use crate::analysis::fit::{fit_line_orthogonal, intersect};
use crate::device::{BiasPoint, DeviceSpec, DotIndex, Terminal};
use crate::energy::electrochemical_potential;
use crate::error::{Error, Result};
use crate::sweep::GroundStateMap;

/// Boundary cells needed before the short edge counts as resolved.
pub const MIN_SHORT_EDGE_CELLS: usize = 3;

/// A point in the (V_g, V_b) plane, mV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatePoint {
    pub v_gate: f64,
    pub v_back: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexSplitting {
    /// |ΔV_g| between the two triple points (mV); zero without an anticrossing.
    pub splitting: f64,
    /// Lower-left `(N, M)` of the vertex, when one was found.
    pub base: Option<(u32, u32)>,
    /// Triple points bordering `(N, M)` and `(N+1, M+1)`.
    pub triple_points: Option<[GatePoint; 2]>,
    /// Cells along the `(N+1, M) | (N, M+1)` boundary.
    pub short_edge_cells: usize,
    pub anticrossing: bool,
}

type Boundaries = BTreeMap<((u32, u32), (u32, u32)), Vec<(f64, f64)>>;

/// Midpoints between neighbouring cells of differing state, keyed by the
/// ordered state pair, in (V_g, V_b) coordinates.
fn boundaries(map: &GroundStateMap) -> Result<Boundaries> {
    let p = &map.plan;
    let gate_first = match (p.axis1.terminal, p.axis2.terminal) {
        (Terminal::Gate, Terminal::Back) => true,
        (Terminal::Back, Terminal::Gate) => false,
        (a, b) => {
            return Err(Error::Extraction(format!(
                "honeycomb analysis needs v_gate and v_back axes, got {} and {}",
                a.name(),
                b.name()
            )))
        }
    };
    let point = |a1: f64, a2: f64| if gate_first { (a1, a2) } else { (a2, a1) };
    let mut out: Boundaries = BTreeMap::new();
    let mut add = |s: (u32, u32), t: (u32, u32), at: (f64, f64)| {
        if s != t {
            let key = if s < t { (s, t) } else { (t, s) };
            out.entry(key).or_default().push(at);
        }
    };
    for j in 0..p.axis2.steps {
        for i in 0..p.axis1.steps {
            let s = map.state(i, j);
            if i + 1 < p.axis1.steps {
                let x = 0.5 * (p.axis1.value(i) + p.axis1.value(i + 1));
                add(s, map.state(i + 1, j), point(x, p.axis2.value(j)));
            }
            if j + 1 < p.axis2.steps {
                let y = 0.5 * (p.axis2.value(j) + p.axis2.value(j + 1));
                add(s, map.state(i, j + 1), point(p.axis1.value(i), y));
            }
        }
    }
    Ok(out)
}

/// Finds the best-resolved honeycomb vertex and the separation of its two
/// triple points along V_g.
pub fn vertex_splitting(map: &GroundStateMap) -> Result<VertexSplitting> {
    let b = boundaries(map)?;
    // Short edges join (N+1, M) and (N, M+1); keys are ordered, so the
    // smaller tuple is (N, M+1).
    let short = b
        .iter()
        .filter(|(((n0, m0), (n1, m1)), _)| *n1 == n0 + 1 && *m0 == m1 + 1)
        .max_by(|x, y| x.1.len().cmp(&y.1.len()).then(y.0.cmp(x.0)));
    let Some((((n, m1), _), cells)) = short else {
        return Ok(VertexSplitting {
            splitting: 0.0,
            base: None,
            triple_points: None,
            short_edge_cells: 0,
            anticrossing: false,
        });
    };
    let (n, m) = (*n, m1 - 1);
    let count = cells.len();
    if count < MIN_SHORT_EDGE_CELLS {
        return Ok(VertexSplitting {
            splitting: 0.0,
            base: Some((n, m)),
            triple_points: None,
            short_edge_cells: count,
            anticrossing: false,
        });
    }
    let line = |a: (u32, u32), c: (u32, u32)| -> Result<((f64, f64), (f64, f64))> {
        let key = if a < c { (a, c) } else { (c, a) };
        b.get(&key).and_then(|pts| fit_line_orthogonal(pts)).ok_or_else(|| {
            Error::Extraction(format!(
                "boundary ({},{})|({},{}) not resolved in the map",
                a.0, a.1, c.0, c.1
            ))
        })
    };
    let l1 = line((n, m), (n + 1, m))?;
    let l2 = line((n, m), (n, m + 1))?;
    let l3 = line((n + 1, m), (n + 1, m + 1))?;
    let l4 = line((n, m + 1), (n + 1, m + 1))?;
    let miss = || Error::Extraction("parallel boundaries at the vertex".into());
    let t1 = intersect(l1, l2).ok_or_else(miss)?;
    let t2 = intersect(l3, l4).ok_or_else(miss)?;
    Ok(VertexSplitting {
        splitting: (t2.0 - t1.0).abs(),
        base: Some((n, m)),
        triple_points: Some([
            GatePoint {
                v_gate: t1.0,
                v_back: t1.1,
            },
            GatePoint {
                v_gate: t2.0,
                v_back: t2.1,
            },
        ]),
        short_edge_cells: count,
        anticrossing: true,
    })
}

/// Electrochemical potential of `which` in `state` as an affine function
/// of (V_g, V_b) at otherwise fixed bias: `(value at 0, dμ/dV_g, dμ/dV_b)`.
fn affine_mu(device: &DeviceSpec, which: DotIndex, state: (u32, u32), fixed: &BiasPoint) -> Result<[f64; 3]> {
    let at = |g: f64, v: f64| {
        electrochemical_potential(
            device,
            which,
            state,
            &fixed.with(Terminal::Gate, g).with(Terminal::Back, v),
        )
    };
    let c = at(0.0, 0.0)?;
    Ok([c, at(1.0, 0.0)? - c, at(0.0, 1.0)? - c])
}

fn solve_zero(a: [f64; 3], b: [f64; 3]) -> Result<GatePoint> {
    let det = a[1] * b[2] - a[2] * b[1];
    if det.abs() < 1e-15 {
        return Err(Error::Numerical("degenerate triple-point system".into()));
    }
    Ok(GatePoint {
        v_gate: (-a[0] * b[2] + a[2] * b[0]) / det,
        v_back: (-a[1] * b[0] + a[0] * b[1]) / det,
    })
}

/// Triple points of the vertex above `(N, M)` from the capacitance model
/// directly, with the leads at `fixed`. The first is where `(N, M)`,
/// `(N+1, M)` and `(N, M+1)` meet, the second where `(N+1, M)`, `(N, M+1)`
/// and `(N+1, M+1)` meet.
pub fn triple_points_closed_form(device: &DeviceSpec, base: (u32, u32), fixed: &BiasPoint) -> Result<[GatePoint; 2]> {
    let (n, m) = base;
    let first = solve_zero(
        affine_mu(device, DotIndex::Donor, (n + 1, m), fixed)?,
        affine_mu(device, DotIndex::Dot, (n, m + 1), fixed)?,
    )?;
    let second = solve_zero(
        affine_mu(device, DotIndex::Donor, (n + 1, m + 1), fixed)?,
        affine_mu(device, DotIndex::Dot, (n + 1, m + 1), fixed)?,
    )?;
    Ok([first, second])
}
