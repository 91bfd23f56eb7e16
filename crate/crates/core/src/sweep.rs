//! Rectangular two-voltage sweeps and their CSV representation.
//!
//! Grids are stored row-major with axis1 varying fastest: the value at
//! `(i, j)` (axis1 index `i`, axis2 index `j`) lives at `j * steps1 + i`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{BiasPoint, DeviceSpec, Terminal};
use crate::error::{Error, Result};
use crate::transport::{self, DEFAULT_DELTA_VD};

/// Conductances below this many `e^2/h` are clamped before taking log10.
pub const DEFAULT_LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Current,
    Conductance,
    Log10Conductance,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::Current => "current",
            Observable::Conductance => "conductance",
            Observable::Log10Conductance => "log10_conductance",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Observable::Current => "A",
            Observable::Conductance => "e^2/h",
            Observable::Log10Conductance => "log10(e^2/h)",
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Observable::Current,
            Observable::Conductance,
            Observable::Log10Conductance,
        ]
        .into_iter()
        .find(|o| o.name() == s)
        .ok_or_else(|| Error::Plan(format!("unknown observable `{s}`")))
    }
}

/// One swept voltage: `steps` equally spaced points from `start` to `stop` (mV).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub terminal: Terminal,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(terminal: Terminal, start: f64, stop: f64, steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(Error::Plan(format!("{terminal} needs at least 2 steps, got {steps}")));
        }
        if !(start.is_finite() && stop.is_finite()) || start == stop {
            return Err(Error::Plan(format!("{terminal} range must be finite and nonempty")));
        }
        Ok(Self {
            terminal,
            start,
            stop,
            steps,
        })
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.steps {
            self.stop
        } else {
            self.start + (self.stop - self.start) * i as f64 / (self.steps - 1) as f64
        }
    }

    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.steps - 1) as f64
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.steps).map(|i| self.value(i))
    }
}

/// Parses `name:start:stop:steps`.
impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [name, start, stop, steps] = parts.as_slice() else {
            return Err(Error::Plan(format!("axis `{s}` is not name:start:stop:steps")));
        };
        let terminal = Terminal::from_name(name).ok_or_else(|| Error::Plan(format!("unknown voltage `{name}`")))?;
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Plan(format!("axis `{s}`: `{v}` is not a number")))
        };
        let steps = steps
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Plan(format!("axis `{s}`: `{steps}` is not a step count")))?;
        Axis::new(terminal, num(start)?, num(stop)?, steps)
    }
}

/// Renders `name,start,stop,steps` as used in CSV headers.
impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.terminal, self.start, self.stop, self.steps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub axis1: Axis,
    pub axis2: Axis,
    /// Voltages of the terminals not swept.
    pub fixed: BiasPoint,
    pub observable: Observable,
    /// Drain step (mV) for the numerical conductance.
    pub delta_vd: f64,
    /// Floor (e^2/h) applied before log10.
    pub log_floor: f64,
}

impl SweepPlan {
    pub fn new(axis1: Axis, axis2: Axis, fixed: BiasPoint, observable: Observable) -> Result<Self> {
        let plan = Self {
            axis1,
            axis2,
            fixed,
            observable,
            delta_vd: DEFAULT_DELTA_VD,
            log_floor: DEFAULT_LOG_FLOOR,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        Axis::new(self.axis1.terminal, self.axis1.start, self.axis1.stop, self.axis1.steps)?;
        Axis::new(self.axis2.terminal, self.axis2.start, self.axis2.stop, self.axis2.steps)?;
        if self.axis1.terminal == self.axis2.terminal {
            return Err(Error::Plan(format!("both axes sweep {}", self.axis1.terminal)));
        }
        self.fixed.validate()?;
        if !(self.delta_vd.is_finite() && self.delta_vd > 0.0) {
            return Err(Error::Plan("delta_vd must be positive".into()));
        }
        if !(self.log_floor.is_finite() && self.log_floor > 0.0) {
            return Err(Error::Plan("log_floor must be positive".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.axis1.steps * self.axis2.steps
    }

    /// Indices `(i, j)` of flat cell `k`.
    pub fn indices(&self, k: usize) -> (usize, usize) {
        (k % self.axis1.steps, k / self.axis1.steps)
    }

    pub fn bias_at(&self, i: usize, j: usize) -> BiasPoint {
        self.fixed
            .with(self.axis1.terminal, self.axis1.value(i))
            .with(self.axis2.terminal, self.axis2.value(j))
    }

    /// Axis whose terminal is `t`, with its position (1 or 2).
    pub fn axis_for(&self, t: Terminal) -> Option<(u8, &Axis)> {
        if self.axis1.terminal == t {
            Some((1, &self.axis1))
        } else if self.axis2.terminal == t {
            Some((2, &self.axis2))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConductanceMap {
    pub plan: SweepPlan,
    pub values: Vec<f64>,
}

impl ConductanceMap {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.plan.axis1.steps + i]
    }

    /// Values along axis1 at axis2 index `j`.
    pub fn row(&self, j: usize) -> &[f64] {
        let n = self.plan.axis1.steps;
        &self.values[j * n..(j + 1) * n]
    }

    /// Values along axis2 at axis1 index `i`.
    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.plan.axis2.steps).map(|j| self.value(i, j)).collect()
    }

    pub fn unit(&self) -> &'static str {
        self.plan.observable.unit()
    }

    pub fn to_csv(&self) -> String {
        let p = &self.plan;
        let mut out = format!(
            "# observable={} axis1={} axis2={}\n",
            p.observable.name(),
            p.axis1,
            p.axis2
        );
        for j in 0..p.axis2.steps {
            for i in 0..p.axis1.steps {
                let _ = writeln!(out, "{},{},{:e}", p.axis1.value(i), p.axis2.value(j), self.value(i, j));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundStateMap {
    pub plan: SweepPlan,
    /// `(N, M)` per cell, same layout as [`ConductanceMap::values`].
    pub states: Vec<(u32, u32)>,
}

impl GroundStateMap {
    pub fn state(&self, i: usize, j: usize) -> (u32, u32) {
        self.states[j * self.plan.axis1.steps + i]
    }

    pub fn to_csv(&self) -> String {
        let p = &self.plan;
        let mut out = format!("# observable=ground_state axis1={} axis2={}\n", p.axis1, p.axis2);
        for j in 0..p.axis2.steps {
            for i in 0..p.axis1.steps {
                let (n, m) = self.state(i, j);
                let _ = writeln!(out, "{},{},{n},{m}", p.axis1.value(i), p.axis2.value(j));
            }
        }
        out
    }
}

fn observe(device: &DeviceSpec, plan: &SweepPlan, bias: &BiasPoint) -> Result<f64> {
    match plan.observable {
        Observable::Current => transport::current(device, bias),
        Observable::Conductance => transport::conductance(device, bias, plan.delta_vd),
        Observable::Log10Conductance => {
            let g = transport::conductance(device, bias, plan.delta_vd)?;
            Ok(g.abs().max(plan.log_floor).log10())
        }
    }
}

/// Evaluates `f` on every cell in order, in parallel when `jobs` allows.
fn map_cells<T, F>(plan: &SweepPlan, jobs: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&BiasPoint) -> Result<T> + Sync + Send,
{
    let eval = || -> Vec<Result<T>> {
        (0..plan.cells())
            .into_par_iter()
            .map(|k| {
                let (i, j) = plan.indices(k);
                f(&plan.bias_at(i, j))
            })
            .collect()
    };
    let results = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Plan(format!("thread pool: {e}")))?
            .install(eval),
        None => eval(),
    };
    results
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            r.map_err(|e| {
                let (i, j) = plan.indices(k);
                Error::Cell {
                    axis1: plan.axis1.terminal.name(),
                    value1: plan.axis1.value(i),
                    axis2: plan.axis2.terminal.name(),
                    value2: plan.axis2.value(j),
                    source: Box::new(e),
                }
            })
        })
        .collect()
}

/// Evaluates the plan's observable over the grid.
pub fn run_sweep(device: &DeviceSpec, plan: &SweepPlan) -> Result<ConductanceMap> {
    run_sweep_with_jobs(device, plan, None)
}

/// As [`run_sweep`] with at most `jobs` worker threads (`None`: all cores).
/// The output does not depend on `jobs`.
pub fn run_sweep_with_jobs(device: &DeviceSpec, plan: &SweepPlan, jobs: Option<usize>) -> Result<ConductanceMap> {
    plan.validate()?;
    let values = map_cells(plan, jobs, |b| observe(device, plan, b))?;
    Ok(ConductanceMap {
        plan: plan.clone(),
        values,
    })
}

/// Lowest-energy `(N, M)` at `bias` with both leads grounded. Ties go to
/// the lexicographically first state.
pub fn ground_state(device: &DeviceSpec, bias: &BiasPoint) -> Result<(u32, u32)> {
    let b = BiasPoint {
        v_source: 0.0,
        v_drain: 0.0,
        ..*bias
    };
    let states = transport::enumerate_states(device, &b)?;
    let best = states
        .iter()
        .fold(None::<&transport::ChargeState>, |best, s| match best {
            Some(b) if b.energy <= s.energy => Some(b),
            _ => Some(s),
        })
        .expect("state space is never empty");
    Ok(best.occupation())
}

/// Ground state of every cell; the axes must be gate voltages.
pub fn ground_state_map(device: &DeviceSpec, plan: &SweepPlan) -> Result<GroundStateMap> {
    ground_state_map_with_jobs(device, plan, None)
}

pub fn ground_state_map_with_jobs(
    device: &DeviceSpec,
    plan: &SweepPlan,
    jobs: Option<usize>,
) -> Result<GroundStateMap> {
    plan.validate()?;
    for axis in [&plan.axis1, &plan.axis2] {
        if !matches!(axis.terminal, Terminal::Gate | Terminal::Back) {
            return Err(Error::Plan(format!(
                "ground-state maps sweep gate voltages only, not {}",
                axis.terminal
            )));
        }
    }
    let states = map_cells(plan, jobs, |b| ground_state(device, b))?;
    Ok(GroundStateMap {
        plan: plan.clone(),
        states,
    })
}

/// A map read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub enum MapFile {
    Observable(ConductanceMap),
    GroundState(GroundStateMap),
}

fn parse_header_axis(field: &str, key: &str) -> Result<Axis> {
    let body = field
        .strip_prefix(key)
        .and_then(|s| s.strip_prefix('='))
        .ok_or_else(|| Error::Map(format!("header field `{field}` is not {key}=...")))?;
    Axis::from_str(&body.replace(',', ":")).map_err(|e| Error::Map(format!("header {key}: {e}")))
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale.max(1.0)
}

/// Parses a CSV written by [`ConductanceMap::to_csv`] or
/// [`GroundStateMap::to_csv`]. Fixed voltages are not part of the CSV and
/// come back as zero.
pub fn read_map_csv(text: &str) -> Result<MapFile> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Map("empty file".into()))?;
    let fields: Vec<&str> = header
        .strip_prefix('#')
        .ok_or_else(|| Error::Map("missing `#` header line".into()))?
        .split_whitespace()
        .collect();
    let [obs, a1, a2] = fields.as_slice() else {
        return Err(Error::Map(format!("malformed header `{header}`")));
    };
    let obs = obs
        .strip_prefix("observable=")
        .ok_or_else(|| Error::Map("header lacks observable=".into()))?;
    let axis1 = parse_header_axis(a1, "axis1")?;
    let axis2 = parse_header_axis(a2, "axis2")?;
    let ground = obs == "ground_state";
    let observable = if ground {
        Observable::Current
    } else {
        obs.parse::<Observable>().map_err(|e| Error::Map(e.to_string()))?
    };
    let plan = SweepPlan::new(axis1, axis2, BiasPoint::default(), observable).map_err(|e| Error::Map(e.to_string()))?;

    let n = plan.cells();
    let mut values = Vec::with_capacity(if ground { 0 } else { n });
    let mut states = Vec::with_capacity(if ground { n } else { 0 });
    let scale1 = axis1.start.abs().max(axis1.stop.abs());
    let scale2 = axis2.start.abs().max(axis2.stop.abs());
    for (k, line) in lines.enumerate() {
        if k >= n {
            return Err(Error::Map(format!("more than {n} data rows")));
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let expected = if ground { 4 } else { 3 };
        if cols.len() != expected {
            return Err(Error::Map(format!("row {}: expected {expected} columns", k + 2)));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Map(format!("row {}: `{s}` is not a number", k + 2)))
        };
        let (i, j) = plan.indices(k);
        if !close(num(cols[0])?, axis1.value(i), scale1) || !close(num(cols[1])?, axis2.value(j), scale2) {
            return Err(Error::Map(format!("row {}: coordinates off the header grid", k + 2)));
        }
        if ground {
            let int = |s: &str| {
                s.parse::<u32>()
                    .map_err(|_| Error::Map(format!("row {}: `{s}` is not an occupation", k + 2)))
            };
            states.push((int(cols[2])?, int(cols[3])?));
        } else {
            let v = num(cols[2])?;
            if !v.is_finite() {
                return Err(Error::Map(format!("row {}: non-finite value", k + 2)));
            }
            values.push(v);
        }
    }
    let got = if ground { states.len() } else { values.len() };
    if got != n {
        return Err(Error::Map(format!("expected {n} data rows, found {got}")));
    }
    Ok(if ground {
        MapFile::GroundState(GroundStateMap { plan, states })
    } else {
        MapFile::Observable(ConductanceMap { plan, values })
    })
}
