//! Local maxima along one map axis, refined by a three-point parabola and
//! linked across the other axis into loci.

use serde::Serialize;

use crate::analysis::fit::fit_line;
use crate::error::{Error, Result};
use crate::sweep::{Axis, ConductanceMap, Observable};

/// Points of a locus used to extrapolate its next position.
pub const PREDICTION_POINTS: usize = 12;

/// Which axis the peak search runs along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanAxis {
    Axis1,
    Axis2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseFloor {
    /// Multiple of the median of all map values.
    MedianMultiple(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakOptions {
    pub floor: NoiseFloor,
    /// Largest distance (mV) between a locus' predicted position and a peak
    /// it absorbs; `None` means five grid steps of the scan axis.
    pub max_jump: Option<f64>,
    /// Lines a locus may miss before it is closed.
    pub max_gap: usize,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self {
            floor: NoiseFloor::MedianMultiple(10.0),
            max_jump: None,
            max_gap: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    /// Interpolated position (mV).
    pub position: f64,
    pub height: f64,
}

/// Sub-grid offset (in steps) and height of the parabola through three
/// samples centered on a maximum.
pub fn parabolic_vertex(y0: f64, y1: f64, y2: f64) -> (f64, f64) {
    let curvature = y0 - 2.0 * y1 + y2;
    if curvature >= 0.0 || !curvature.is_finite() {
        return (0.0, y1);
    }
    let delta = (0.5 * (y0 - y2) / curvature).clamp(-0.5, 0.5);
    (delta, y1 - 0.25 * (y0 - y2) * delta)
}

/// Interior local maxima of `values` above `floor`. Plateaus report their
/// first sample.
pub fn find_peaks(values: &[f64], axis: &Axis, floor: f64) -> Vec<Peak> {
    let mut out = Vec::new();
    if values.len() < 3 {
        return out;
    }
    for i in 1..values.len() - 1 {
        let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
        if b > a && b >= c && b > floor {
            let (delta, height) = parabolic_vertex(a, b, c);
            out.push(Peak {
                index: i,
                position: axis.value(i) + delta * axis.step(),
                height,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Donor,
    Dot,
    Unassigned,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Donor => "donor",
            Family::Dot => "dot",
            Family::Unassigned => "unassigned",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocusPoint {
    /// Coordinate on the fixed axis (mV).
    pub fixed: f64,
    /// Peak position on the scan axis (mV).
    pub position: f64,
    pub height: f64,
}

/// One peak followed across the fixed axis, ordered by the fixed coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakLocus {
    pub points: Vec<LocusPoint>,
}

impl PeakLocus {
    /// Position extrapolated to `fixed` by a line through up to the last
    /// [`PREDICTION_POINTS`] points. The long history keeps a locus on course
    /// through rows where it merges with a crossing line.
    fn predict(&self, fixed: f64) -> f64 {
        let tail = &self.points[self.points.len().saturating_sub(PREDICTION_POINTS)..];
        let last = tail[tail.len() - 1];
        let pts: Vec<(f64, f64)> = tail.iter().map(|p| (p.fixed, p.position)).collect();
        match fit_line(&pts) {
            Some(f) => f.at(fixed),
            None => last.position,
        }
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Noise floor of `values` under `floor`.
pub fn floor_value(values: &[f64], floor: NoiseFloor) -> f64 {
    match floor {
        NoiseFloor::MedianMultiple(k) => k * median(values),
        NoiseFloor::Absolute(v) => v,
    }
}

/// Peaks along `axis` on every line of the map, linked into loci.
pub fn detect_peaks(map: &ConductanceMap, axis: ScanAxis, options: &PeakOptions) -> Result<Vec<PeakLocus>> {
    if map.plan.observable == Observable::Log10Conductance {
        return Err(Error::Extraction(
            "peak detection needs a current or conductance map".into(),
        ));
    }
    let floor = floor_value(&map.values, options.floor);
    let (scan, fixed) = match axis {
        ScanAxis::Axis1 => (&map.plan.axis1, &map.plan.axis2),
        ScanAxis::Axis2 => (&map.plan.axis2, &map.plan.axis1),
    };
    let max_jump = options.max_jump.unwrap_or(5.0 * scan.step().abs());

    let mut open: Vec<(PeakLocus, usize)> = Vec::new();
    let mut closed: Vec<PeakLocus> = Vec::new();
    for line in 0..fixed.steps {
        let values: Vec<f64> = match axis {
            ScanAxis::Axis1 => map.row(line).to_vec(),
            ScanAxis::Axis2 => map.column(line),
        };
        let at = fixed.value(line);
        let peaks = find_peaks(&values, scan, floor);

        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (li, (locus, _)) in open.iter().enumerate() {
            let predicted = locus.predict(at);
            for (pi, p) in peaks.iter().enumerate() {
                let d = (p.position - predicted).abs();
                if d <= max_jump {
                    pairs.push((d, li, pi));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut locus_used = vec![false; open.len()];
        let mut peak_used = vec![false; peaks.len()];
        for (_, li, pi) in pairs {
            if locus_used[li] || peak_used[pi] {
                continue;
            }
            locus_used[li] = true;
            peak_used[pi] = true;
            let p = peaks[pi];
            open[li].0.points.push(LocusPoint {
                fixed: at,
                position: p.position,
                height: p.height,
            });
            open[li].1 = line;
        }
        for (pi, p) in peaks.iter().enumerate() {
            if !peak_used[pi] {
                open.push((
                    PeakLocus {
                        points: vec![LocusPoint {
                            fixed: at,
                            position: p.position,
                            height: p.height,
                        }],
                    },
                    line,
                ));
            }
        }
        let (keep, done): (Vec<_>, Vec<_>) = open.into_iter().partition(|(_, last)| line - *last <= options.max_gap);
        closed.extend(done.into_iter().map(|(l, _)| l));
        open = keep;
    }
    closed.extend(open.into_iter().map(|(l, _)| l));
    // Increasing fixed coordinate within each locus.
    if fixed.step() < 0.0 {
        for l in &mut closed {
            l.points.reverse();
        }
    }
    closed.sort_by(|a, b| {
        a.points[0]
            .fixed
            .total_cmp(&b.points[0].fixed)
            .then(a.points[0].position.total_cmp(&b.points[0].position))
    });
    Ok(closed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::BiasPoint;
    use crate::sweep::SweepPlan;

    fn gaussian_map(centers: impl Fn(f64) -> Vec<f64>, scale: f64) -> ConductanceMap {
        let plan = SweepPlan::new(
            "v_gate:0:100:201".parse().unwrap(),
            "v_back:-20:20:41".parse().unwrap(),
            BiasPoint::default(),
            Observable::Current,
        )
        .unwrap();
        let mut values = vec![0.0; plan.cells()];
        for j in 0..plan.axis2.steps {
            let cs = centers(plan.axis2.value(j));
            for i in 0..plan.axis1.steps {
                let x = plan.axis1.value(i);
                values[j * plan.axis1.steps + i] =
                    scale * (1e-6 + cs.iter().map(|c| (-(x - c).powi(2) / 4.0).exp()).sum::<f64>());
            }
        }
        ConductanceMap { plan, values }
    }

    #[test]
    fn parabola_recovers_vertex() {
        // y = 5 - (x - 0.3)^2 sampled at -1, 0, 1.
        let f = |x: f64| 5.0 - (x - 0.3).powi(2);
        let (d, h) = parabolic_vertex(f(-1.0), f(0.0), f(1.0));
        assert!((d - 0.3).abs() < 1e-12);
        assert!((h - 5.0).abs() < 1e-12);
    }

    #[test]
    fn flat_map_has_no_peaks() {
        let map = gaussian_map(|_| vec![], 1.0);
        let loci = detect_peaks(&map, ScanAxis::Axis1, &PeakOptions::default()).unwrap();
        assert!(loci.is_empty());
    }

    #[test]
    fn tracks_sloped_lines() {
        let map = gaussian_map(|vb| vec![30.0 - 0.6 * vb, 70.0 - 0.4 * vb], 1e-11);
        let loci = detect_peaks(&map, ScanAxis::Axis1, &PeakOptions::default()).unwrap();
        assert_eq!(loci.len(), 2);
        for l in &loci {
            assert_eq!(l.points.len(), 41);
            assert!(l.points.windows(2).all(|w| w[0].fixed < w[1].fixed));
        }
        let first = &loci[0].points;
        assert!((first[0].position - 42.0).abs() < 0.05);
    }

    #[test]
    fn scaling_values_keeps_positions() {
        let a = gaussian_map(|vb| vec![40.0 - 0.5 * vb], 1.0);
        let b = gaussian_map(|vb| vec![40.0 - 0.5 * vb], 7.5e-12);
        let la = detect_peaks(&a, ScanAxis::Axis1, &PeakOptions::default()).unwrap();
        let lb = detect_peaks(&b, ScanAxis::Axis1, &PeakOptions::default()).unwrap();
        assert_eq!(la.len(), lb.len());
        for (x, y) in la.iter().zip(&lb) {
            for (p, q) in x.points.iter().zip(&y.points) {
                assert!((p.position - q.position).abs() < 1e-9);
                assert!((q.height / p.height - 7.5e-12).abs() < 1e-20);
            }
        }
    }

    #[test]
    fn log_map_rejected() {
        let mut m = gaussian_map(|_| vec![50.0], 1.0);
        m.plan.observable = Observable::Log10Conductance;
        assert!(detect_peaks(&m, ScanAxis::Axis1, &PeakOptions::default()).is_err());
    }
}
