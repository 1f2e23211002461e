//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! `integrate` bisects the interval with the largest error estimate until the
//! summed estimate meets `max(abs_tol, rel_tol·|I|)`. `integrate_partitioned`
//! does the same starting from caller-supplied breakpoints, which is how the
//! oscillatory filter integrals are handled (one initial panel per lobe).

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
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
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

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * h;
    let error = ((kronrod - gauss) * h).abs();
    Panel { a, b, value, error }
}

/// Maximum number of panel bisections before giving up.
const MAX_SPLITS: usize = 2_000_000;

/// Adaptive integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<QuadResult> {
    integrate_partitioned(f, &[a, b], rel_tol, abs_tol)
}

/// Adaptive integral of `f` over `[points[0], points[last]]`, starting from
/// one panel per consecutive pair of breakpoints.
pub fn integrate_partitioned<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<QuadResult> {
    if points.len() < 2 {
        return Err(Error::invalid("quadrature needs at least two breakpoints"));
    }
    let mut heap = BinaryHeap::with_capacity(points.len());
    let mut value = 0.0;
    let mut error = 0.0;
    let mut evaluations = 0;
    for w in points.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let p = gk15(&f, w[0], w[1]);
        evaluations += 15;
        value += p.value;
        error += p.error;
        heap.push(p);
    }
    let mut splits = 0;
    while error > abs_tol.max(rel_tol * value.abs()) {
        let Some(worst) = heap.pop() else { break };
        if !worst.value.is_finite() {
            return Err(Error::Quadrature {
                message: "non-finite integrand".into(),
                partial: value,
                error_estimate: error,
            });
        }
        let mid = 0.5 * (worst.a + worst.b);
        if splits >= MAX_SPLITS || mid <= worst.a || mid >= worst.b {
            return Err(Error::Quadrature {
                message: format!("tolerance not reached after {splits} subdivisions"),
                partial: value,
                error_estimate: error,
            });
        }
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        evaluations += 30;
        splits += 1;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    if !value.is_finite() {
        return Err(Error::Quadrature {
            message: "non-finite result".into(),
            partial: value,
            error_estimate: error,
        });
    }
    // Re-sum to shed the drift of incremental updates.
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Ok(QuadResult {
        value,
        error,
        evaluations,
    })
}
