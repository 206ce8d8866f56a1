//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.
//!
//! Used as an independent check of the closed-form time averages, so it only
//! needs to be accurate and robust, not fast.

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
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Upper bound on the number of panels kept by [`integrate`].
pub const MAX_PANELS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Sum of the local Kronrod–Gauss differences over all panels.
    pub error_estimate: f64,
    pub evaluations: usize,
}

fn kronrod_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, (kronrod - gauss).abs() * half)
}

struct Panel {
    lo: f64,
    hi: f64,
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
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `abs_tol`.
///
/// Globally adaptive: the panel with the largest error estimate is bisected
/// until the summed estimate meets the tolerance, the worst panel is at
/// rounding level, or [`MAX_PANELS`] panels exist.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Integral {
    if a == b {
        return Integral {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
        };
    }
    if b < a {
        let r = integrate(f, b, a, abs_tol);
        return Integral {
            value: -r.value,
            ..r
        };
    }
    let (value, error) = kronrod_panel(&f, a, b);
    let mut evaluations = 15;
    let mut panels = std::collections::BinaryHeap::new();
    panels.push(Panel {
        lo: a,
        hi: b,
        value,
        error,
    });
    let mut total_error = error;
    while total_error > abs_tol && panels.len() < MAX_PANELS {
        let worst = panels.pop().expect("at least one panel");
        let mid = 0.5 * (worst.lo + worst.hi);
        if worst.error <= 50.0 * f64::EPSILON * worst.value.abs()
            || mid <= worst.lo
            || mid >= worst.hi
        {
            panels.push(worst);
            break;
        }
        let (lv, le) = kronrod_panel(&f, worst.lo, mid);
        let (rv, re) = kronrod_panel(&f, mid, worst.hi);
        evaluations += 30;
        total_error += le + re - worst.error;
        panels.push(Panel {
            lo: worst.lo,
            hi: mid,
            value: lv,
            error: le,
        });
        panels.push(Panel {
            lo: mid,
            hi: worst.hi,
            value: rv,
            error: re,
        });
    }
    // Re-sum from scratch so the running error update cannot drift.
    let mut panels = panels.into_vec();
    panels.sort_by(|x, y| x.lo.total_cmp(&y.lo));
    Integral {
        value: panels.iter().map(|p| p.value).sum(),
        error_estimate: panels.iter().map(|p| p.error).sum(),
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let r = integrate(|x| 3.0 * x * x - x + 2.0, -1.0, 2.0, 1e-12);
        assert!((r.value - 13.5).abs() < 1e-12);
        let r = integrate(|x| x.powi(9), 0.0, 1.0, 1e-14);
        assert!((r.value - 0.1).abs() < 1e-14);
    }

    #[test]
    fn exponential_and_reversed_limits() {
        let r = integrate(|x| (-x).exp(), 0.0, 30.0, 1e-12);
        assert!((r.value - (1.0 - (-30.0f64).exp())).abs() < 1e-12);
        let s = integrate(|x| (-x).exp(), 30.0, 0.0, 1e-12);
        assert_eq!(s.value, -r.value);
    }

    #[test]
    fn sharp_peak() {
        let k = 200.0;
        let r = integrate(|x| k * (-k * x).exp(), 0.0, 1.0, 1e-10);
        assert!((r.value - (1.0 - (-k).exp())).abs() < 1e-10);
    }

    #[test]
    fn empty_interval() {
        assert_eq!(integrate(|x| x, 1.0, 1.0, 1e-9).value, 0.0);
    }
}
