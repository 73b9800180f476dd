//! Brownian-motion boundary-crossing engine behind the design-stage
//! calculations: Siegmund's closed form for a single linear segment,
//! a knot-conditioning recursion for piecewise-linear boundaries, crossing
//! probabilities of the square-root boundary traced by a fixed z-cutoff over
//! an unspecified-follow-up window, the worst-case type I error implied by
//! stopping that window adversarially, the corrected cutoff k* restoring the
//! level, and the four design power definitions.
//!
//! Scale convention: with u = D1(t)/D1(Tmax) the first-stage score process,
//! standardized by sqrt(D1(Tmax)/4), behaves like a Brownian motion B(u) on
//! [u1, 1], with drift xi = theta * sqrt(D1(Tmax))/2 under the alternative.
//! The naive statistic exceeds `cutoff` at some analysis time iff B crosses
//! the boundary sqrt(u) * (cutoff - w2 * z2) / w1, z2 = Phi^-1(1 - p2).

use rayon::prelude::*;
use thiserror::Error;

use crate::combo_test::Weights;
use crate::numerics::{find_root, gauss_legendre, norm_cdf, norm_pdf, norm_quantile, NumError, Rng};

/// Default knot count for the piecewise-linear surrogate of the square-root
/// boundary; geometric spacing concentrates knots near u1 where the boundary
/// curves fastest.
pub const DEFAULT_KNOT_COUNT: usize = 16;

/// State-space truncation, in standard deviations, for every Gaussian layer.
const Z_RANGE: f64 = 8.0;
/// Quadrature nodes for the killed density carried between knots.
const N_STATE: usize = 32;
/// Quadrature nodes for each between-knot increment integral.
const N_INCR: usize = 24;
/// Quadrature nodes for the outer integral over z2 = Phi^-1(1 - p2).
const N_OUTER: usize = 64;

const INV_SQRT_2PI: f64 = 0.39894228040143267794;
const LN_SQRT_2PI: f64 = 0.91893853320467274178;

#[derive(Debug, Error)]
pub enum WienerError {
    #[error("boundary intercept {b} must be positive")]
    InvalidBoundary { b: f64 },
    #[error("segment horizon {c} must be positive and finite")]
    InvalidHorizon { c: f64 },
    #[error("{name} = {value} outside {range}")]
    Parameter {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error(transparent)]
    Num(#[from] NumError),
}

fn check_range(name: &'static str, value: f64, lo_open: f64, hi: f64, hi_closed: bool) -> Result<(), WienerError> {
    let ok = value.is_finite() && value > lo_open && (value < hi || (hi_closed && value == hi));
    if ok {
        Ok(())
    } else {
        let range = if hi_closed { "(0, 1]" } else { "(0, 1)" };
        Err(WienerError::Parameter { name, value, range })
    }
}

/// Phi^-1(1 - p), evaluated as -Phi^-1(p) to keep full accuracy for small p.
fn upper_q(name: &'static str, p: f64) -> Result<f64, WienerError> {
    check_range(name, p, 0.0, 1.0, false)?;
    Ok(-norm_quantile(p).expect("validated probability"))
}

/// ln Phi(x). Exact logarithm where Phi is representable with full relative
/// accuracy; for x <= -26 an asymptotic tail expansion (relative error below
/// 1e-9, shrinking rapidly with |x|).
fn ln_norm_cdf(x: f64) -> f64 {
    if x > -26.0 {
        norm_cdf(x).ln()
    } else {
        let inv2 = 1.0 / (x * x);
        let series = inv2 * (-1.0 + inv2 * (3.0 - 15.0 * inv2));
        -0.5 * x * x - LN_SQRT_2PI - (-x).ln() + series.ln_1p()
    }
}

/// No-crossing probability of a driftless Brownian motion started at 0
/// against the line a_eff*t + b over [0, c], with b > 0:
/// Phi((a_eff c + b)/sqrt(c)) - exp(-2 a_eff b) Phi((a_eff c - b)/sqrt(c)).
/// The reflected term is evaluated with a combined exponent so it never
/// overflows (mathematically it is a probability).
fn siegmund_noncross(a_eff: f64, b: f64, c: f64) -> f64 {
    let sq = c.sqrt();
    let term1 = norm_cdf((a_eff * c + b) / sq);
    let term2 = (-2.0 * a_eff * b + ln_norm_cdf((a_eff * c - b) / sq)).exp();
    term1 - term2
}

/// One straight-line boundary segment a*t + b over a horizon of length c.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearSegment {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Probability that a Brownian motion with the given drift, started at 0,
/// stays below a*t + b for all t in [0, c].
pub fn linear_noncross(seg: &LinearSegment, drift: f64) -> Result<f64, WienerError> {
    if !(seg.c > 0.0 && seg.c.is_finite()) {
        return Err(WienerError::InvalidHorizon { c: seg.c });
    }
    if !(seg.b > 0.0) {
        return Err(WienerError::InvalidBoundary { b: seg.b });
    }
    assert!(seg.a.is_finite() && drift.is_finite());
    Ok(siegmund_noncross(seg.a - drift, seg.b, seg.c).clamp(0.0, 1.0))
}

/// Barycentric interpolation weights for the node set `xs`, normalized to
/// max |w| = 1. Differences are rescaled so the running products stay far
/// from overflow; the common factor cancels in the interpolation formula.
fn bary_weights(xs: &[f64]) -> Vec<f64> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &x in xs {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let scale = 4.0 / (hi - lo);
    let mut w: Vec<f64> = (0..xs.len())
        .map(|k| {
            let mut prod = 1.0;
            for (j, &xj) in xs.iter().enumerate() {
                if j != k {
                    prod *= (xs[k] - xj) * scale;
                }
            }
            1.0 / prod
        })
        .collect();
    let wmax = w.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    for v in &mut w {
        *v /= wmax;
    }
    w
}

fn bary_eval(xq: f64, xs: &[f64], bw: &[f64], fv: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..xs.len() {
        let d = xq - xs[k];
        if d == 0.0 {
            return fv[k];
        }
        let c = bw[k] / d;
        num += c * fv[k];
        den += c;
    }
    num / den
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Start {
    /// Brownian motion from time 0, unconstrained before the first knot:
    /// the state at us[0] is N(drift*us[0], us[0]) truncated below bs[0].
    Free,
    /// Path pinned to 0 at us[0] (which must be 0); constrained everywhere.
    Delta,
}

/// No-crossing probability against the piecewise-linear boundary through
/// (us, bs): one exact Siegmund bridge factor per segment, the killed state
/// density carried across knots by Gauss-Legendre layers with barycentric
/// interpolation, and the last segment integrated in closed form.
fn noncross_engine(us: &[f64], bs: &[f64], drift: f64, start: Start) -> f64 {
    let m = us.len() - 1;
    let gl_state = gauss_legendre(N_STATE);
    let gl_incr = gauss_legendre(N_INCR);
    let layer_nodes = |a: f64, b: f64| -> (Vec<f64>, Vec<f64>) {
        let xm = 0.5 * (a + b);
        let xl = 0.5 * (b - a);
        gl_state.iter().map(|&(t, w)| (xm + xl * t, xl * w)).unzip()
    };

    let (mut xs, mut wq, mut fv): (Vec<f64>, Vec<f64>, Vec<f64>);
    let (mut lo, mut hi): (f64, f64);
    let i0: usize;
    match start {
        Start::Free => {
            assert!(us[0] > 0.0, "free start requires a positive first knot time");
            let mu0 = drift * us[0];
            let s0 = us[0].sqrt();
            let lo0 = mu0 - Z_RANGE * s0;
            let hi0 = (mu0 + Z_RANGE * s0).min(bs[0]);
            if hi0 <= lo0 {
                return 0.0;
            }
            if m == 0 {
                return norm_cdf((bs[0] - mu0) / s0).clamp(0.0, 1.0);
            }
            let (x, w) = layer_nodes(lo0, hi0);
            fv = x.iter().map(|&xi| norm_pdf((xi - mu0) / s0) / s0).collect();
            xs = x;
            wq = w;
            lo = lo0;
            hi = hi0;
            i0 = 0;
        }
        Start::Delta => {
            assert!(us[0] == 0.0, "delta start requires the horizon to begin at 0");
            assert!(bs[0] > 0.0, "delta start requires a positive initial boundary");
            let du = us[1] - us[0];
            if m == 1 {
                let a2 = (bs[1] - bs[0]) / du - drift;
                return siegmund_noncross(a2, bs[0], du).clamp(0.0, 1.0);
            }
            let mu0 = drift * du;
            let s0 = du.sqrt();
            let lo0 = mu0 - Z_RANGE * s0;
            let hi0 = (mu0 + Z_RANGE * s0).min(bs[1]);
            if hi0 <= lo0 {
                return 0.0;
            }
            let (x, w) = layer_nodes(lo0, hi0);
            fv = x
                .iter()
                .map(|&xi| {
                    let bridge = 1.0 - (-2.0 * bs[0] * (bs[1] - xi) / du).exp();
                    norm_pdf((xi - mu0) / s0) / s0 * bridge
                })
                .collect();
            xs = x;
            wq = w;
            lo = lo0;
            hi = hi0;
            i0 = 1;
        }
    }

    // quadrature layers for segments i0 .. m-2; the last segment is closed form
    for i in i0..m.saturating_sub(1) {
        let du = us[i + 1] - us[i];
        let sq = du.sqrt();
        let gap = bs[i + 1] - bs[i] - drift * du;
        let mu1 = drift * us[i + 1];
        let s1 = us[i + 1].sqrt();
        let lo1 = mu1 - Z_RANGE * s1;
        let hi1 = (mu1 + Z_RANGE * s1).min(bs[i + 1]);
        if hi1 <= lo1 {
            return 0.0;
        }
        let (ys, wq1) = layer_nodes(lo1, hi1);
        let bw = bary_weights(&xs);
        let mut fnew = vec![0.0f64; ys.len()];
        for (j, &y) in ys.iter().enumerate() {
            // state change of variables x = y - drift*du - sqrt(du)*t;
            // x < bs[i] (no prior kill) iff t > tmin, and x must stay inside
            // the previous layer's support [lo, hi]
            let tmin = (y - bs[i] - drift * du) / sq;
            let t_hi_dom = (y - drift * du - lo) / sq;
            let t_lo_dom = (y - drift * du - hi) / sq;
            let t_lo = tmin.max(t_lo_dom).max(-Z_RANGE);
            let t_hi = Z_RANGE.min(t_hi_dom);
            let mut direct = 0.0;
            if t_hi > t_lo {
                let xm = 0.5 * (t_lo + t_hi);
                let xl = 0.5 * (t_hi - t_lo);
                for &(tn, tw) in gl_incr.iter() {
                    let t = xm + xl * tn;
                    let g = bary_eval(y - drift * du - sq * t, &xs, &bw, &fv);
                    direct += xl * tw * g * norm_pdf(t);
                }
            }
            // reflected term: shifted variable s = t + c1 with prefactor
            // exp(2*(bs[i+1]-y)*gap/du); the exponent is folded into each
            // node's Gaussian weight so it never overflows
            let beta = bs[i + 1] - y;
            let c1 = 2.0 * beta / sq;
            let e0 = 2.0 * beta * gap / du;
            let s_lo = (tmin + c1).max(t_lo_dom + c1).max(-Z_RANGE);
            let s_hi = Z_RANGE.min(t_hi_dom + c1);
            let mut reflected = 0.0;
            if s_hi > s_lo {
                let xm = 0.5 * (s_lo + s_hi);
                let xl = 0.5 * (s_hi - s_lo);
                for &(sn, sw) in gl_incr.iter() {
                    let s = xm + xl * sn;
                    let g = bary_eval(y - drift * du - sq * (s - c1), &xs, &bw, &fv);
                    reflected += xl * sw * g * (e0 - 0.5 * s * s).exp() * INV_SQRT_2PI;
                }
            }
            fnew[j] = direct - reflected;
        }
        for v in &mut fnew {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        xs = ys;
        wq = wq1;
        fv = fnew;
        lo = lo1;
        hi = hi1;
    }

    let du = us[m] - us[m - 1];
    let a2 = (bs[m] - bs[m - 1]) / du - drift;
    let mut acc = 0.0;
    for k in 0..xs.len() {
        acc += wq[k] * fv[k] * siegmund_noncross(a2, bs[m - 1] - xs[k], du);
    }
    acc.clamp(0.0, 1.0)
}

fn validate_piecewise(boundary: &[f64], times: &[f64]) {
    assert!(times.len() >= 2, "need at least one segment");
    assert_eq!(boundary.len(), times.len(), "one boundary value per knot");
    assert!(times[0] == 0.0, "horizon must start at 0");
    for i in 1..times.len() {
        assert!(times[i] > times[i - 1] && times[i].is_finite(), "knot times must increase");
    }
    assert!(boundary.iter().all(|b| b.is_finite()), "boundary values must be finite");
}

/// Probability that a Brownian motion with the given drift, started at 0 at
/// time 0, stays below the piecewise-linear interpolant of `boundary` over
/// the knot `times` for the whole horizon. A nonpositive initial boundary
/// value is crossed immediately, giving probability 0.
pub fn piecewise_noncross(boundary: &[f64], times: &[f64], drift: f64) -> f64 {
    validate_piecewise(boundary, times);
    assert!(drift.is_finite());
    if boundary[0] <= 0.0 {
        return 0.0;
    }
    noncross_engine(times, boundary, drift, Start::Delta)
}

/// Monte Carlo estimate of the same probability as [`piecewise_noncross`]:
/// simulate the knot values under the drifted law and multiply the exact
/// per-segment bridge no-crossing factors. Returns (estimate, standard
/// error); the estimator is exact in distribution, so disagreement beyond a
/// few standard errors indicates a quadrature defect.
pub fn mc_bridge_noncross(
    boundary: &[f64],
    times: &[f64],
    drift: f64,
    paths: u64,
    seed: u64,
) -> (f64, f64) {
    validate_piecewise(boundary, times);
    if boundary[0] <= 0.0 {
        return (0.0, 0.0);
    }
    let mut rng = Rng::new(seed);
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..paths {
        let mut factor = 1.0;
        let mut x = 0.0f64;
        for i in 0..times.len() - 1 {
            let du = times[i + 1] - times[i];
            let xn = x + drift * du + du.sqrt() * rng.normal();
            if xn >= boundary[i + 1] {
                factor = 0.0;
                break;
            }
            factor *= 1.0 - (-2.0 * (boundary[i] - x) * (boundary[i + 1] - xn) / du).exp();
            x = xn;
        }
        sum += factor;
        sumsq += factor * factor;
    }
    let n = paths as f64;
    let mean = sum / n;
    let var = ((sumsq - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// Square-root boundary crossing problem on the information-fraction scale:
/// monitoring window [u1, 1], inverse-normal weights (w1, w2), level alpha,
/// drift xi (0 under the null), and the knot grid used for the
/// piecewise-linear surrogate boundary.
#[derive(Clone, Debug)]
pub struct BoundaryProblem {
    w1: f64,
    w2: f64,
    u1: f64,
    alpha: f64,
    drift: f64,
    knots: Vec<f64>,
}

/// Geometric grid u1 = g_0 < ... < g_{count-1} = 1.
fn geometric_knots(u1: f64, count: usize) -> Vec<f64> {
    if u1 >= 1.0 {
        return vec![1.0];
    }
    let m = (count - 1) as f64;
    (0..count)
        .map(|j| match j {
            0 => u1,
            j if j == count - 1 => 1.0,
            j => u1.powf(1.0 - j as f64 / m),
        })
        .collect()
}

impl BoundaryProblem {
    pub fn new(w1: f64, u1: f64, alpha: f64, drift: f64) -> Result<Self, WienerError> {
        Self::with_knot_count(w1, u1, alpha, drift, DEFAULT_KNOT_COUNT)
    }

    pub fn with_knot_count(
        w1: f64,
        u1: f64,
        alpha: f64,
        drift: f64,
        knot_count: usize,
    ) -> Result<Self, WienerError> {
        check_range("w1", w1, 0.0, 1.0, true)?;
        check_range("u1", u1, 0.0, 1.0, true)?;
        check_range("alpha", alpha, 0.0, 1.0, false)?;
        if !drift.is_finite() {
            return Err(WienerError::Parameter {
                name: "drift",
                value: drift,
                range: "finite",
            });
        }
        if knot_count < 2 {
            return Err(WienerError::Parameter {
                name: "knot_count",
                value: knot_count as f64,
                range: "(0, 1]",
            });
        }
        Ok(BoundaryProblem {
            w1,
            w2: (1.0 - w1 * w1).max(0.0).sqrt(),
            u1,
            alpha,
            drift,
            knots: geometric_knots(u1, knot_count),
        })
    }

    pub fn w1(&self) -> f64 {
        self.w1
    }

    pub fn w2(&self) -> f64 {
        self.w2
    }

    pub fn u1(&self) -> f64 {
        self.u1
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }
}

/// Crossing probability of B(u) over [u1, 1] against sqrt(u) * kappa,
/// kappa = (cutoff - w2*z2)/w1, with no clamping of kappa: a nonpositive
/// boundary is handled by the engine itself (the state windows collapse and
/// the no-crossing mass goes to zero continuously).
fn crossing_exact(w1: f64, w2: f64, u1: f64, cutoff: f64, z2: f64, drift: f64, knots: &[f64]) -> f64 {
    let kappa = (cutoff - w2 * z2) / w1;
    if u1 >= 1.0 {
        return norm_cdf(drift - kappa);
    }
    let bs: Vec<f64> = knots.iter().map(|&u| kappa * u.sqrt()).collect();
    (1.0 - noncross_engine(knots, &bs, drift, Start::Free)).clamp(0.0, 1.0)
}

/// Probability that the running naive statistic exceeds `cutoff` at some
/// point of the monitoring window, given the second-stage p-value p2.
/// If the p2 term drives the boundary to or below zero at u1 the crossing is
/// reported as certain (probability 1) rather than failing.
pub fn sqrt_crossing_given_p2(bp: &BoundaryProblem, cutoff: f64, p2: f64) -> Result<f64, WienerError> {
    assert!(cutoff.is_finite());
    let z2 = upper_q("p2", p2)?;
    let kappa = (cutoff - bp.w2 * z2) / bp.w1;
    if kappa <= 0.0 {
        return Ok(1.0);
    }
    Ok(crossing_exact(bp.w1, bp.w2, bp.u1, cutoff, z2, bp.drift, &bp.knots))
}

/// Monte Carlo companion to [`sqrt_crossing_given_p2`] on the same knot
/// grid: simulate knot values of the drifted Brownian motion and apply the
/// exact per-segment bridge factors. Returns (estimate, standard error).
pub fn mc_sqrt_crossing(
    bp: &BoundaryProblem,
    cutoff: f64,
    p2: f64,
    paths: u64,
    seed: u64,
) -> Result<(f64, f64), WienerError> {
    let z2 = upper_q("p2", p2)?;
    let kappa = (cutoff - bp.w2 * z2) / bp.w1;
    let us = &bp.knots;
    let bs: Vec<f64> = us.iter().map(|&u| kappa * u.sqrt()).collect();
    let mut rng = Rng::new(seed);
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..paths {
        let mut x = bp.drift * us[0] + us[0].sqrt() * rng.normal();
        let mut noncross = if x < bs[0] { 1.0 } else { 0.0 };
        if noncross > 0.0 {
            for i in 0..us.len() - 1 {
                let du = us[i + 1] - us[i];
                let xn = x + bp.drift * du + du.sqrt() * rng.normal();
                if xn >= bs[i + 1] {
                    noncross = 0.0;
                    break;
                }
                noncross *= 1.0 - (-2.0 * (bs[i] - x) * (bs[i + 1] - xn) / du).exp();
                x = xn;
            }
        }
        let crossing = 1.0 - noncross;
        sum += crossing;
        sumsq += crossing * crossing;
    }
    let n = paths as f64;
    let mean = sum / n;
    let var = ((sumsq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// Null crossing probability of the cutoff integrated over p2 ~ U(0, 1),
/// i.e. over z2 = Phi^-1(1 - p2) against the standard normal weight.
fn integrated_crossing(w1: f64, u1: f64, cutoff: f64, knot_count: usize) -> f64 {
    let w2 = (1.0 - w1 * w1).max(0.0).sqrt();
    let knots = geometric_knots(u1, knot_count);
    let gl = gauss_legendre(N_OUTER);
    let xl = Z_RANGE;
    gl.iter()
        .map(|&(t, w)| {
            let z = xl * t;
            xl * w * norm_pdf(z) * crossing_exact(w1, w2, u1, cutoff, z, 0.0, &knots)
        })
        .sum()
}

/// Worst-case type I error of the naive level-alpha test when the first
/// stage may be analyzed at any information fraction in [u1, 1]: the
/// rejection probability maximized over stopping rules equals the crossing
/// probability of the square-root boundary, integrated over the independent
/// second-stage p-value.
pub fn worst_case_alpha(w1: f64, u1: f64, alpha: f64, knot_count: usize) -> Result<f64, WienerError> {
    check_range("w1", w1, 0.0, 1.0, true)?;
    check_range("u1", u1, 0.0, 1.0, true)?;
    let cutoff = upper_q("alpha", alpha)?;
    if knot_count < 2 {
        return Err(WienerError::Parameter {
            name: "knot_count",
            value: knot_count as f64,
            range: "(0, 1]",
        });
    }
    Ok(integrated_crossing(w1, u1, cutoff, knot_count))
}

/// Corrected cutoff k*: the root of the integrated worst-case crossing
/// probability equal to alpha, bracketed in [Phi^-1(1-alpha), 6].
/// At u1 = 1 there is no monitoring window and k* is Phi^-1(1-alpha) itself.
pub fn corrected_kstar(w1: f64, u1: f64, alpha: f64) -> Result<f64, WienerError> {
    corrected_kstar_with_knots(w1, u1, alpha, DEFAULT_KNOT_COUNT)
}

pub fn corrected_kstar_with_knots(
    w1: f64,
    u1: f64,
    alpha: f64,
    knot_count: usize,
) -> Result<f64, WienerError> {
    check_range("w1", w1, 0.0, 1.0, true)?;
    check_range("u1", u1, 0.0, 1.0, true)?;
    let z_alpha = upper_q("alpha", alpha)?;
    if u1 >= 1.0 {
        return Ok(z_alpha);
    }
    let root = find_root(
        |k| integrated_crossing(w1, u1, k, knot_count) - alpha,
        z_alpha,
        6.0,
        1e-6,
    )?;
    Ok(root)
}

/// Grid of corrected cutoffs. Rows are labeled by the first-stage
/// information fraction f1 (the share of the planned events carried by the
/// first stage), so each cell is the cutoff at weight w1 = sqrt(f1); columns
/// are labeled by u1. Cells are independent and computed in parallel.
pub fn kstar_table(
    f1_grid: &[f64],
    u1_grid: &[f64],
    alpha: f64,
    knot_count: usize,
) -> Result<Vec<Vec<f64>>, WienerError> {
    assert!(!f1_grid.is_empty() && !u1_grid.is_empty(), "grids must be nonempty");
    let mut cells = Vec::with_capacity(f1_grid.len() * u1_grid.len());
    for &f1 in f1_grid {
        for &u1 in u1_grid {
            cells.push((f1, u1));
        }
    }
    let flat: Result<Vec<f64>, WienerError> = cells
        .into_par_iter()
        .map(|(f1, u1)| {
            check_range("f1", f1, 0.0, 1.0, true)?;
            corrected_kstar_with_knots(f1.sqrt(), u1, alpha, knot_count)
        })
        .collect();
    let flat = flat?;
    Ok(flat.chunks(u1_grid.len()).map(<[f64]>::to_vec).collect())
}

/// Inputs shared by the four design power definitions: weights, first-stage
/// events at the scheduled interim and at maximum follow-up, the reference
/// log hazard ratio theta_R, the level, and the corrected cutoff.
#[derive(Clone, Copy, Debug)]
pub struct PowerInputs {
    pub w: Weights,
    pub d1_t1: usize,
    pub d1_tmax: usize,
    pub theta_r: f64,
    pub alpha: f64,
    pub k_star: f64,
}

impl PowerInputs {
    fn validate(&self) -> Result<(), WienerError> {
        if self.d1_t1 == 0 || self.d1_t1 > self.d1_tmax {
            return Err(WienerError::Parameter {
                name: "d1_t1",
                value: self.d1_t1 as f64,
                range: "(0, 1]",
            });
        }
        if !(self.theta_r >= 0.0 && self.theta_r.is_finite()) {
            return Err(WienerError::Parameter {
                name: "theta_r",
                value: self.theta_r,
                range: "(0, 1]",
            });
        }
        check_range("alpha", self.alpha, 0.0, 1.0, false)?;
        assert!(self.k_star.is_finite());
        Ok(())
    }
}

fn fixed_cutoff_power(pi: &PowerInputs, cutoff: f64, d1: usize, z2: f64) -> f64 {
    let arg = (cutoff - pi.w.w2() * z2) / pi.w.w1() - pi.theta_r * (d1 as f64).sqrt() / 2.0;
    norm_cdf(-arg)
}

/// Power of the test that analyzes the first stage at its scheduled interim
/// with the standard cutoff: the planned design, no correction needed.
pub fn power_a(pi: &PowerInputs, p2: f64) -> Result<f64, WienerError> {
    pi.validate()?;
    let z2 = upper_q("p2", p2)?;
    let z_alpha = upper_q("alpha", pi.alpha)?;
    Ok(fixed_cutoff_power(pi, z_alpha, pi.d1_t1, z2))
}

/// Power at the scheduled interim but with the corrected cutoff k*: the
/// price of the correction when no extra follow-up materializes.
pub fn power_b(pi: &PowerInputs, p2: f64) -> Result<f64, WienerError> {
    pi.validate()?;
    let z2 = upper_q("p2", p2)?;
    Ok(fixed_cutoff_power(pi, pi.k_star, pi.d1_t1, z2))
}

/// Power with the corrected cutoff when the first stage runs to maximum
/// follow-up, so all d1(Tmax) events contribute.
pub fn power_c(pi: &PowerInputs, p2: f64) -> Result<f64, WienerError> {
    pi.validate()?;
    let z2 = upper_q("p2", p2)?;
    Ok(fixed_cutoff_power(pi, pi.k_star, pi.d1_tmax, z2))
}

/// Power of the most favorable stopping rule under the alternative: the
/// drifted square-root crossing probability with the corrected cutoff,
/// drift theta_R * sqrt(d1(Tmax))/2, over the window
/// [d1(T1)/d1(Tmax), 1].
pub fn power_d(pi: &PowerInputs, p2: f64) -> Result<f64, WienerError> {
    pi.validate()?;
    let drift = pi.theta_r * (pi.d1_tmax as f64).sqrt() / 2.0;
    let u1 = pi.d1_t1 as f64 / pi.d1_tmax as f64;
    let bp = BoundaryProblem::new(pi.w.w1(), u1, pi.alpha, drift)?;
    sqrt_crossing_given_p2(&bp, pi.k_star, p2)
}

// ---------------------------------------------------------------------------
