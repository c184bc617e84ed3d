//! Adaptive Gauss–Kronrod (7/15) integration on finite intervals.

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

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Integral value with an error estimate and the integral of |f|.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub magnitude: f64,
}

impl std::ops::AddAssign for Estimate {
    fn add_assign(&mut self, rhs: Self) {
        self.value += rhs.value;
        self.error += rhs.error;
        self.magnitude += rhs.magnitude;
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Estimate {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut mag = fc.abs() * WGK[7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        kron += WGK[j] * (f1 + f2);
        mag += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Estimate {
        value: kron * h,
        error: ((kron - gauss) * h).abs(),
        magnitude: mag * h.abs(),
    }
}

/// Upper bound on the number of subintervals of one adaptive call.
pub const MAX_INTERVALS: usize = 2000;

/// Integrates `f` over [a, b] by globally adaptive bisection of the piece
/// with the largest error until `error <= max(abs_tol, rel_tol * magnitude)`
/// or [`MAX_INTERVALS`] is reached.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Estimate {
    integrate_pieces(f, &[a, b], rel_tol, abs_tol)
}

/// Same as [`integrate`] starting from the partition given by `breaks`.
pub fn integrate_pieces<F: FnMut(f64) -> f64>(f: F, breaks: &[f64], rel_tol: f64, abs_tol: f64) -> Estimate {
    let mut total = Estimate::default();
    for e in integrate_by_interval(f, breaks, rel_tol, abs_tol) {
        total += e;
    }
    total
}

/// Same refinement as `integrate_pieces`, with the converged result split
/// back onto the intervals between consecutive breakpoints.
pub fn integrate_by_interval<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Vec<Estimate> {
    let intervals = breaks.len().saturating_sub(1);
    let mut pieces: Vec<(usize, f64, f64, Estimate)> = breaks
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0])
        .map(|(i, w)| (i, w[0], w[1], gk15(&mut f, w[0], w[1])))
        .collect();
    loop {
        let mut total = Estimate::default();
        let mut worst = 0;
        for (i, p) in pieces.iter().enumerate() {
            total += p.3;
            if p.3.error > pieces[worst].3.error {
                worst = i;
            }
        }
        let target = abs_tol.max(rel_tol * total.magnitude);
        let done = pieces.is_empty()
            || total.error <= target
            || pieces.len() >= MAX_INTERVALS
            || !total.value.is_finite();
        let (owner, lo, hi) = pieces.get(worst).map(|p| (p.0, p.1, p.2)).unwrap_or((0, 0.0, 0.0));
        let mid = 0.5 * (lo + hi);
        if done || mid <= lo || mid >= hi {
            let mut out = vec![Estimate::default(); intervals];
            for p in &pieces {
                out[p.0] += p.3;
            }
            return out;
        }
        let left = gk15(&mut f, lo, mid);
        let right = gk15(&mut f, mid, hi);
        pieces[worst] = (owner, lo, mid, left);
        pieces.push((owner, mid, hi, right));
    }
}
