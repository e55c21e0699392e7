//! Root location for smooth periodic functions on [0, 1).

/// Zeros of a period-1 function found by a sign-change scan on `scan`
/// uniform points, bisection, then a Newton polish with `df`.
///
/// Grid points where `f` is exactly zero are reported as roots whether or
/// not the sign changes there; callers decide what a touching zero means.
pub fn periodic_roots<F, D>(f: F, df: D, scan: usize) -> Vec<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let h = 1.0 / scan as f64;
    let values: Vec<f64> = (0..scan).map(|i| f(i as f64 * h)).collect();
    let mut roots = Vec::new();
    for i in 0..scan {
        let lo = i as f64 * h;
        let hi = lo + h;
        let fl = values[i];
        let fh = values[(i + 1) % scan];
        if fl == 0.0 {
            roots.push(lo);
        } else if fh != 0.0 && fl.signum() != fh.signum() {
            let r = polish(&f, &df, bisect(&f, lo, hi, fl), lo, hi);
            roots.push(r - r.floor());
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots
}

/// Bisection on a bracket `[lo, hi]` with `f(lo) = f_lo` of opposite sign
/// to `f(hi)`.
pub fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn polish<F, D>(f: &F, df: &D, mut x: f64, lo: f64, hi: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    for _ in 0..3 {
        let d = df(x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = x - f(x) / d;
        if !(lo..=hi).contains(&next) || f(next).abs() > f(x).abs() {
            break;
        }
        x = next;
    }
    x
}

/// Minimizes a unimodal function on `[lo, hi]` by golden-section search.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Circular distance on the unit circle.
#[inline]
pub fn circle_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(1.0);
    d.min(1.0 - d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn finds_sine_roots() {
        let f = |t: f64| (2.0 * PI * t + 0.3).sin();
        let df = |t: f64| 2.0 * PI * (2.0 * PI * t + 0.3).cos();
        let r = periodic_roots(f, df, 256);
        assert_eq!(r.len(), 2);
        for x in r {
            assert!(f(x).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_grid_zero_is_reported() {
        let f = |t: f64| (2.0 * PI * t).sin();
        let df = |t: f64| 2.0 * PI * (2.0 * PI * t).cos();
        let r = periodic_roots(f, df, 64);
        assert_eq!(r.len(), 2);
        assert_eq!(r[0], 0.0);
        assert!((r[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn golden_finds_minimum() {
        let (x, fx) = golden_min(|t| (t - 0.3).powi(2) + 1.0, 0.0, 1.0, 80);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-15);
    }

    #[test]
    fn circle_distance_wraps() {
        assert!((circle_distance(0.95, 0.05) - 0.1).abs() < 1e-15);
        assert!((circle_distance(0.2, 0.7) - 0.5).abs() < 1e-15);
    }
}
