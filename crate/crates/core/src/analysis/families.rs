//! Slope families of tracked peak loci.

use crate::analysis::fit::{fit_line, LineFit};
use crate::analysis::peaks::{Family, PeakLocus};
use crate::device::{DeviceSpec, DotIndex};
use crate::error::{Error, Result};

/// Loci with fewer points are not fitted.
pub const MIN_LOCUS_POINTS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFamily {
    pub label: Family,
    /// Point-weighted mean slope (scan mV per fixed mV).
    pub slope: f64,
    pub stderr: f64,
    /// Indices into [`FamilyFit::lines`].
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyFit {
    /// One fit per locus that had enough points, with the locus index.
    pub lines: Vec<(usize, LineFit)>,
    /// Sorted by slope, steepest (most negative) first.
    pub families: Vec<SlopeFamily>,
    /// True when two separated clusters were found; otherwise all loci form
    /// one family.
    pub distinct: bool,
}

fn summarize(lines: &[(usize, LineFit)], members: Vec<usize>) -> SlopeFamily {
    let w: f64 = members.iter().map(|&k| lines[k].1.points as f64).sum();
    let mean = members
        .iter()
        .map(|&k| lines[k].1.slope * lines[k].1.points as f64)
        .sum::<f64>()
        / w;
    let stderr = if members.len() > 1 {
        let var = members
            .iter()
            .map(|&k| lines[k].1.points as f64 * (lines[k].1.slope - mean).powi(2))
            .sum::<f64>()
            / w;
        (var / members.len() as f64).sqrt()
    } else {
        lines[members[0]].1.slope_stderr
    };
    SlopeFamily {
        label: Family::Unassigned,
        slope: mean,
        stderr,
        members,
    }
}

/// Fits a line to each locus and splits the slopes into at most two
/// clusters by a deterministic 2-means seeded at the extremes.
pub fn fit_family_slopes(loci: &[PeakLocus]) -> Result<FamilyFit> {
    let lines: Vec<(usize, LineFit)> = loci
        .iter()
        .enumerate()
        .filter(|(_, l)| l.points.len() >= MIN_LOCUS_POINTS)
        .filter_map(|(k, l)| {
            let pts: Vec<(f64, f64)> = l.points.iter().map(|p| (p.fixed, p.position)).collect();
            fit_line(&pts).map(|f| (k, f))
        })
        .collect();
    if lines.is_empty() {
        return Err(Error::Extraction(format!(
            "no peak locus with at least {MIN_LOCUS_POINTS} points"
        )));
    }
    let slopes: Vec<f64> = lines.iter().map(|l| l.1.slope).collect();
    let lo = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let all: Vec<usize> = (0..lines.len()).collect();
    if lines.len() < 2 || hi == lo {
        return Ok(FamilyFit {
            families: vec![summarize(&lines, all)],
            lines,
            distinct: false,
        });
    }

    let mut centers = [lo, hi];
    let mut assign = vec![0usize; slopes.len()];
    for _ in 0..100 {
        let next: Vec<usize> = slopes
            .iter()
            .map(|s| usize::from((s - centers[1]).abs() < (s - centers[0]).abs()))
            .collect();
        let changed = next != assign;
        assign = next;
        for (c, center) in centers.iter_mut().enumerate() {
            let (sum, n) = slopes
                .iter()
                .zip(&assign)
                .filter(|(_, a)| **a == c)
                .fold((0.0, 0usize), |(s, n), (x, _)| (s + x, n + 1));
            if n > 0 {
                *center = sum / n as f64;
            }
        }
        if !changed {
            break;
        }
    }
    let groups: Vec<Vec<usize>> = (0..2)
        .map(|c| all.iter().copied().filter(|&k| assign[k] == c).collect())
        .filter(|g: &Vec<usize>| !g.is_empty())
        .collect();
    if groups.len() < 2 {
        return Ok(FamilyFit {
            families: vec![summarize(&lines, all)],
            lines,
            distinct: false,
        });
    }
    let families: Vec<SlopeFamily> = groups.into_iter().map(|g| summarize(&lines, g)).collect();

    // Pooled spread of individual slopes around their cluster mean.
    let mut ss = 0.0;
    for f in &families {
        for &k in &f.members {
            ss += (lines[k].1.slope - f.slope).powi(2);
        }
    }
    let pooled_sd = if lines.len() > 2 {
        (ss / (lines.len() - 2) as f64).sqrt()
    } else {
        0.0
    };
    let gap = (families[1].slope - families[0].slope).abs();
    let scale = 0.5 * (families[0].slope.abs() + families[1].slope.abs());
    if gap <= (4.0 * pooled_sd).max(0.02 * scale) {
        return Ok(FamilyFit {
            families: vec![summarize(&lines, all)],
            lines,
            distinct: false,
        });
    }
    Ok(FamilyFit {
        lines,
        families,
        distinct: true,
    })
}

/// Labels each family with the island whose predicted back-gate slope is
/// nearest. With two distinct families the labels are assigned jointly.
pub fn label_families(fit: &mut FamilyFit, device: &DeviceSpec) -> Result<()> {
    let donor = device.island(DotIndex::Donor).caps().backgate_slope()?;
    let dot = device.island(DotIndex::Dot).caps().backgate_slope()?;
    let nearest = |s: f64| {
        if (s - donor).abs() <= (s - dot).abs() {
            Family::Donor
        } else {
            Family::Dot
        }
    };
    if fit.distinct && fit.families.len() == 2 {
        let (a, b) = (fit.families[0].slope, fit.families[1].slope);
        let straight = (a - donor).abs() + (b - dot).abs();
        let swapped = (a - dot).abs() + (b - donor).abs();
        let (la, lb) = if straight <= swapped {
            (Family::Donor, Family::Dot)
        } else {
            (Family::Dot, Family::Donor)
        };
        fit.families[0].label = la;
        fit.families[1].label = lb;
    } else {
        for f in &mut fit.families {
            f.label = nearest(f.slope);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::peaks::LocusPoint;

    fn locus(slope: f64, offset: f64, n: usize) -> PeakLocus {
        PeakLocus {
            points: (0..n)
                .map(|k| {
                    let x = -20.0 + k as f64;
                    LocusPoint {
                        fixed: x,
                        position: offset + slope * x,
                        height: 1.0,
                    }
                })
                .collect(),
        }
    }

    #[test]
    fn two_families_separate_and_label() {
        let mut loci = Vec::new();
        for k in 0..3 {
            loci.push(locus(-0.597, 100.0 + 111.0 * k as f64, 40));
        }
        for k in 0..8 {
            loci.push(locus(-0.399, 130.0 + 24.9 * k as f64, 40));
        }
        loci.push(locus(0.0, 0.0, 2));
        let mut fit = fit_family_slopes(&loci).unwrap();
        assert_eq!(fit.lines.len(), 11);
        assert!(fit.distinct);
        assert!((fit.families[0].slope + 0.597).abs() < 1e-9);
        assert!((fit.families[1].slope + 0.399).abs() < 1e-9);
        label_families(&mut fit, &DeviceSpec::table1()).unwrap();
        assert_eq!(fit.families[0].label, Family::Donor);
        assert_eq!(fit.families[1].label, Family::Dot);
    }

    #[test]
    fn single_slope_is_one_family() {
        let loci: Vec<_> = (0..4).map(|k| locus(-0.4, 25.0 * k as f64, 10)).collect();
        let fit = fit_family_slopes(&loci).unwrap();
        assert_eq!(fit.families.len(), 1);
        assert!(!fit.distinct);
    }

    #[test]
    fn near_slopes_not_distinct() {
        let loci = vec![locus(-0.500, 0.0, 10), locus(-0.501, 30.0, 10), locus(-0.502, 60.0, 10)];
        let fit = fit_family_slopes(&loci).unwrap();
        assert!(!fit.distinct);
    }

    #[test]
    fn nothing_to_fit() {
        assert!(fit_family_slopes(&[locus(1.0, 0.0, 2)]).is_err());
        assert!(fit_family_slopes(&[]).is_err());
    }
}
