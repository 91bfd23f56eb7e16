//! Least-squares line fits.

/// `y = intercept + slope * x` with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    pub points: usize,
}

impl LineFit {
    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares of `y` on `x`. Needs at least two distinct `x`.
pub fn fit_line(points: &[(f64, f64)]) -> Option<LineFit> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (slope_stderr, intercept_stderr) = if n > 2 {
        let rss: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        let s2 = rss / (nf - 2.0);
        ((s2 / sxx).sqrt(), (s2 * (1.0 / nf + mx * mx / sxx)).sqrt())
    } else {
        (0.0, 0.0)
    };
    Some(LineFit {
        slope,
        intercept,
        slope_stderr,
        intercept_stderr,
        points: n,
    })
}

/// Line through a point cloud minimizing perpendicular distances: a point
/// on the line and a unit direction.
pub fn fit_line_orthogonal(points: &[(f64, f64)]) -> Option<((f64, f64), (f64, f64))> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p.0 - mx, p.1 - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx + syy == 0.0 {
        return None;
    }
    // Principal axis of the 2x2 scatter matrix.
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    Some(((mx, my), (theta.cos(), theta.sin())))
}

/// Intersection of two lines given as point + direction.
pub fn intersect(a: ((f64, f64), (f64, f64)), b: ((f64, f64), (f64, f64))) -> Option<(f64, f64)> {
    let ((px, py), (dx, dy)) = a;
    let ((qx, qy), (ex, ey)) = b;
    let denom = dx * ey - dy * ex;
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = ((qx - px) * ey - (qy - py) * ex) / denom;
    Some((px + t * dx, py + t * dy))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_has_zero_stderr() {
        let pts: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 3.0 - 0.597 * i as f64)).collect();
        let f = fit_line(&pts).unwrap();
        assert!((f.slope + 0.597).abs() < 1e-12);
        assert!((f.intercept - 3.0).abs() < 1e-12);
        assert!(f.slope_stderr < 1e-10);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_line(&[(1.0, 2.0)]).is_none());
        assert!(fit_line(&[(1.0, 2.0), (1.0, 3.0)]).is_none());
        assert!(fit_line_orthogonal(&[(1.0, 1.0), (1.0, 1.0)]).is_none());
    }

    #[test]
    fn orthogonal_fit_handles_vertical_lines() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (2.0, i as f64)).collect();
        let (p, d) = fit_line_orthogonal(&pts).unwrap();
        assert!((p.0 - 2.0).abs() < 1e-12);
        assert!(d.0.abs() < 1e-12);
        let h = ((0.0, 5.0), (1.0, 0.0));
        let x = intersect((p, d), h).unwrap();
        assert!((x.0 - 2.0).abs() < 1e-12 && (x.1 - 5.0).abs() < 1e-12);
    }
}
