//! Globally adaptive Gauss-Kronrod (7/15) quadrature with caller-supplied
//! breakpoints, plus an iterated 2D variant.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the odd-indexed Kronrod nodes (XGK[1], XGK[3], XGK[5], XGK[7]).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and work limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 0.0,
            max_panels: 10_000,
        }
    }
}

impl QuadConfig {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Panel {
        a,
        b,
        value: kron * h,
        error: ((kron - gauss) * h).abs(),
    }
}

/// Integrates `f` over `[a, b]`, starting from panels split at `breakpoints`.
///
/// Breakpoints outside `(a, b)` are ignored. Reversed limits flip the sign.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    cfg: &QuadConfig,
) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter("integration limits must be finite".into()));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            panels: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > lo && *x < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(lo);
    edges.extend(cuts);
    edges.push(hi);
    for w in edges.windows(2) {
        heap.push(gk15(&mut f, w[0], w[1]));
    }

    loop {
        let value: f64 = heap.iter().map(|p| p.value).sum();
        let error: f64 = heap.iter().map(|p| p.error).sum();
        let target = cfg.abs_tol.max(cfg.rel_tol * value.abs());
        if error <= target {
            return Ok(QuadResult {
                value: sign * value,
                error,
                panels: heap.len(),
            });
        }
        if heap.len() >= cfg.max_panels {
            return Err(Error::Accuracy {
                estimate: sign * value,
                error,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point.
            return Err(Error::Accuracy {
                estimate: sign * value,
                error,
            });
        }
        heap.push(gk15(&mut f, worst.a, mid));
        heap.push(gk15(&mut f, mid, worst.b));
    }
}

/// Iterated integral `int_{x0}^{x1} int_{y0}^{y1} f(x, y) dy dx`.
///
/// `x_breaks` are kinks of the outer integrand; `y_breaks(x)` returns the
/// kinks of the inner integrand at fixed `x`. The inner integrals run at a
/// tolerance ten times tighter than the outer one.
pub fn integrate_2d<F, B>(
    f: F,
    (x0, x1): (f64, f64),
    (y0, y1): (f64, f64),
    x_breaks: &[f64],
    y_breaks: B,
    cfg: &QuadConfig,
) -> Result<QuadResult>
where
    F: Fn(f64, f64) -> f64,
    B: Fn(f64) -> Vec<f64>,
{
    let inner_cfg = QuadConfig {
        rel_tol: cfg.rel_tol * 0.1,
        abs_tol: cfg.abs_tol * 0.1 / (x1 - x0).abs().max(f64::MIN_POSITIVE),
        max_panels: cfg.max_panels,
    };
    let mut failure: Option<Error> = None;
    let mut inner_panels = 0usize;
    let outer = integrate(
        |x| {
            let bps = y_breaks(x);
            match integrate(|y| f(x, y), y0, y1, &bps, &inner_cfg) {
                Ok(r) => {
                    inner_panels += r.panels;
                    r.value
                }
                Err(Error::Accuracy { estimate, .. }) => {
                    failure.get_or_insert(Error::Accuracy {
                        estimate,
                        error: f64::NAN,
                    });
                    estimate
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        x0,
        x1,
        x_breaks,
        cfg,
    );
    match (outer, failure) {
        (Ok(r), None) => Ok(QuadResult {
            value: r.value,
            error: r.error,
            panels: r.panels + inner_panels,
        }),
        (Ok(r), Some(Error::Accuracy { .. })) => Err(Error::Accuracy {
            estimate: r.value,
            error: f64::NAN,
        }),
        (_, Some(e)) => Err(e),
        (Err(e), None) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn polynomials_are_exact() {
        let r = integrate(|x| x.powi(20), 0.0, 1.0, &[], &QuadConfig::default()).unwrap();
        assert_relative_eq!(r.value, 1.0 / 21.0, max_relative = 1e-14);
    }

    #[test]
    fn kink_with_breakpoint_is_cheap() {
        let cfg = QuadConfig::with_rel_tol(1e-12);
        let with = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &[0.3], &cfg).unwrap();
        let without = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &[], &cfg).unwrap();
        let exact = 0.5 * (0.09 + 0.49);
        assert_relative_eq!(with.value, exact, max_relative = 1e-13);
        assert_relative_eq!(without.value, exact, max_relative = 1e-11);
        assert_eq!(with.panels, 2);
        assert!(without.panels > with.panels);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let r = integrate(f64::sin, PI, 0.0, &[], &QuadConfig::default()).unwrap();
        assert_relative_eq!(r.value, -2.0, max_relative = 1e-12);
    }

    #[test]
    fn singular_integrand_reports_accuracy() {
        let cfg = QuadConfig {
            rel_tol: 1e-14,
            abs_tol: 0.0,
            max_panels: 20,
        };
        let e = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &[], &cfg).unwrap_err();
        match e {
            Error::Accuracy { estimate, .. } => assert!((estimate - 2.0).abs() < 0.1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn disk_area_in_2d() {
        let r = integrate_2d(
            |x, y| if x * x + y * y <= 1.0 { 1.0 } else { 0.0 },
            (-2.0, 2.0),
            (-2.0, 2.0),
            &[-1.0, 1.0],
            |x| {
                let s = (1.0 - x * x).max(0.0).sqrt();
                vec![-s, s]
            },
            &QuadConfig::with_rel_tol(1e-9),
        )
        .unwrap();
        assert_relative_eq!(r.value, PI, max_relative = 1e-8);
    }
}
