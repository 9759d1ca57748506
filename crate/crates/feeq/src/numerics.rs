//! Deterministic scalar numerics shared by every other module: definite
//! integration, monotone first-crossing search and one-dimensional
//! maximization.
//!
//! All three operations are pure: identical inputs give bit-identical
//! outputs, so they are safe for unrestricted concurrent use.

use crate::{Error, Result};

/// Default relative tolerance for [`integrate`].
pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Maximum bisection depth of a single quadrature panel.
const MAX_SIMPSON_DEPTH: u32 = 48;

/// Relative slack used when checking monotonicity of bisection samples.
/// Absorbs quadrature noise in integrand-valued functions.
const MONOTONE_SLACK_REL: f64 = 1e-9;

/// A real-valued function of time together with the locations where it is
/// allowed to jump or kink. Quadrature panels never straddle a breakpoint,
/// and the evaluation at a panel edge that is a breakpoint is taken from the
/// left, matching cadlag semantics for the piece that ends there.
pub struct Func1d<F> {
    eval: F,
    breakpoints: Vec<f64>,
}

impl<F: Fn(f64) -> f64> Func1d<F> {
    /// A function with no declared discontinuities.
    pub fn new(eval: F) -> Self {
        Func1d {
            eval,
            breakpoints: Vec::new(),
        }
    }

    /// A function with known jump/kink locations. The list is sorted and
    /// deduplicated; non-finite entries are rejected by `integrate`.
    pub fn with_breakpoints(eval: F, mut breakpoints: Vec<f64>) -> Self {
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        Func1d { eval, breakpoints }
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    fn eval_checked(&self, t: f64) -> Result<f64> {
        let y = (self.eval)(t);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFiniteEvaluation { abscissa: t })
        }
    }
}

/// Largest float strictly below `x`.
fn next_down(x: f64) -> f64 {
    if x.is_nan() || x == f64::NEG_INFINITY {
        return x;
    }
    let bits = x.to_bits();
    if x > 0.0 {
        f64::from_bits(bits - 1)
    } else if x < 0.0 {
        f64::from_bits(bits + 1)
    } else {
        -f64::MIN_POSITIVE * f64::EPSILON // largest negative subnormal step
    }
}

/// Abscissa used for the right edge of a panel that ends at a breakpoint:
/// nudged left so the evaluation picks up the piece that ends there rather
/// than the right-continuous value of the next piece.
fn left_of(q: f64, width: f64) -> f64 {
    let x = q - 1e-10 * width;
    if x < q {
        x
    } else {
        next_down(q)
    }
}

struct PanelEdge {
    x: f64,
    /// Where to actually evaluate the integrand for this edge.
    sample: f64,
}

/// Definite integral of `f` over `[a, b]`.
///
/// Adaptive composite Simpson, with the integration range split at every
/// declared breakpoint so discontinuities never sit inside a panel. The
/// result `I` satisfies `|I - integral| <~ rel_tol * (1 + |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: &Func1d<F>, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if !(a <= b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidInterval { lo: a, hi: b });
    }
    if a == b {
        return Ok(0.0);
    }
    let rel_tol = rel_tol.max(1e-15);

    // Panel edges: [a, interior breakpoints, b].
    let mut edges: Vec<PanelEdge> = Vec::with_capacity(f.breakpoints.len() + 2);
    edges.push(PanelEdge { x: a, sample: a });
    for &bp in &f.breakpoints {
        if bp > a && bp < b {
            edges.push(PanelEdge { x: bp, sample: bp });
        }
    }
    let b_is_breakpoint = f.breakpoints.contains(&b);
    edges.push(PanelEdge { x: b, sample: b });

    // Cheap first pass to set the absolute error budget.
    let mut rough = 0.0_f64;
    let mut panels = Vec::with_capacity(edges.len() - 1);
    for w in edges.windows(2) {
        let (p, q) = (w[0].x, w[1].x);
        let width = q - p;
        if width == 0.0 {
            continue;
        }
        // The right edge of a panel that ends at a breakpoint belongs to the
        // piece on the left.
        let right_sample = if q < b || b_is_breakpoint {
            left_of(q, width)
        } else {
            q
        };
        let fp = f.eval_checked(w[0].sample)?;
        let fq = f.eval_checked(right_sample)?;
        let m = 0.5 * (p + q);
        let fm = f.eval_checked(m)?;
        let s = width * (fp + 4.0 * fm + fq) / 6.0;
        rough += s;
        panels.push((p, q, fp, fm, fq, s));
    }

    let budget = rel_tol * (1.0 + rough.abs());
    let span = b - a;
    let mut total = 0.0_f64;
    for (p, q, fp, fm, fq, s) in panels {
        let eps = budget * (q - p) / span;
        total += adaptive_simpson(f, p, q, fp, fm, fq, s, eps, MAX_SIMPSON_DEPTH)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &Func1d<F>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f.eval_checked(lm)?;
    let frm = f.eval_checked(rm)?;
    let left = (m - a) * (fa + 4.0 * flm + fm) / 6.0;
    let right = (b - m) * (fm + 4.0 * frm + fb) / 6.0;
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return Ok(left + right + delta / 15.0);
    }
    let l = adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)?;
    let r = adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)?;
    Ok(l + r)
}

/// First time at which a nonincreasing function falls to `level` or below:
/// `inf { t in [lo, hi] : g(t) <= level }`, located to within `tol`.
///
/// Returns `lo` immediately if `g(lo) <= level`, and `hi` if `g` stays above
/// `level` on the whole interval (the caller interprets that sentinel).
/// Bisection runs on the indicator `{g <= level}`, which stays monotone even
/// where `g` jumps, so no root equation is ever solved.
pub fn first_time_below<F: Fn(f64) -> f64>(
    g: &Func1d<F>,
    level: f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64> {
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidInterval { lo, hi });
    }
    if !(tol > 0.0) {
        return Err(Error::parameter("tol", "must be > 0"));
    }
    let g_lo = g.eval_checked(lo)?;
    if g_lo <= level {
        return Ok(lo);
    }
    let g_hi = g.eval_checked(hi)?;
    let slack = MONOTONE_SLACK_REL * (1.0 + g_lo.abs().max(g_hi.abs()));
    if g_hi > g_lo + slack {
        return Err(Error::NonMonotoneSample {
            at: hi,
            value: g_hi,
        });
    }
    if g_hi > level {
        return Ok(hi);
    }

    let mut above = lo; // g(above) > level
    let mut below = hi; // g(below) <= level
    let mut g_above = g_lo;
    let mut g_below = g_hi;
    while below - above > tol {
        let mid = 0.5 * (above + below);
        if mid <= above || mid >= below {
            break; // interval is down to adjacent floats
        }
        let g_mid = g.eval_checked(mid)?;
        if g_mid > g_above + slack || g_mid < g_below - slack {
            return Err(Error::NonMonotoneSample {
                at: mid,
                value: g_mid,
            });
        }
        if g_mid <= level {
            below = mid;
            g_below = g_mid;
        } else {
            above = mid;
            g_above = g_mid;
        }
    }
    Ok(below)
}

/// Result of a one-dimensional maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub argmax: f64,
    pub value: f64,
}

/// Golden-section refinement of a maximum inside `[lo, hi]`.
///
/// Assumes a maximizer lies in the bracket; returns the best point probed.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Maximum {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut a = lo;
    let mut b = hi;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut best = if f1 >= f2 {
        Maximum {
            argmax: x1,
            value: f1,
        }
    } else {
        Maximum {
            argmax: x2,
            value: f2,
        }
    };
    while b - a > tol {
        if f1 >= f2 || f2.is_nan() {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        let (x, fx) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
        if fx > best.value {
            best = Maximum {
                argmax: x,
                value: fx,
            };
        }
    }
    best
}

/// Coarse grid scan over `[lo, hi]` followed by golden-section refinement
/// inside the bracket around the best grid point. The returned value is at
/// least the best grid value; the argmax is located to within `refine_tol`.
pub fn maximize_1d<F: Fn(f64) -> f64>(
    f: &Func1d<F>,
    lo: f64,
    hi: f64,
    coarse_points: usize,
    refine_tol: f64,
) -> Result<Maximum> {
    if !(lo < hi) {
        return Err(Error::InvalidInterval { lo, hi });
    }
    if coarse_points < 3 {
        return Err(Error::parameter("coarse_points", "must be >= 3"));
    }
    let n = coarse_points - 1;
    let mut best_idx = 0usize;
    let mut best_val = f64::NEG_INFINITY;
    let mut grid = Vec::with_capacity(coarse_points);
    for i in 0..coarse_points {
        let x = lo + (hi - lo) * (i as f64) / (n as f64);
        let y = f.eval_checked(x)?;
        if y > best_val {
            best_val = y;
            best_idx = i;
        }
        grid.push(x);
    }
    let bl = grid[best_idx.saturating_sub(1)];
    let bh = grid[(best_idx + 1).min(n)];
    let refined = golden_section_max(|x| f.eval(x), bl, bh, refine_tol);
    if refined.value >= best_val {
        Ok(refined)
    } else {
        Ok(Maximum {
            argmax: grid[best_idx],
            value: best_val,
        })
    }
}
