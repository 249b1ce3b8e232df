//! Scaling exponents and infinite-system extrapolations.
//!
//! Exponents come from weighted log-log regression; utilization extrapolates
//! to the infinite-ring limit either through the finite-size correction
//! `u_L = u_inf + const / L^(2(1-alpha))` or through a rational function of
//! 1/L fitted by least squares (with an exact diagonal rational
//! interpolation as a cross-check).

use serde::{Deserialize, Serialize};

use crate::ensemble::{plateau_entry_step, steady_state_mean, EnsembleSeries};
use crate::error::{CoreError, Result};
use crate::linalg::weighted_least_squares;
use crate::stats::StatId;

/// A fitted exponent with its regression uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub value: f64,
    pub stderr: f64,
    /// The (t or L) range actually used.
    pub fit_window: (f64, f64),
    pub points_used: usize,
}

/// Exponent bundle for one family of runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    pub growth: ExponentFit,
    pub roughness: ExponentFit,
    /// Dynamic exponent, reported as roughness/growth.
    pub dynamic: f64,
    pub crossover_step: f64,
}

impl ScalingResult {
    pub fn new(growth: ExponentFit, roughness: ExponentFit, crossover_step: f64) -> Self {
        ScalingResult {
            growth,
            roughness,
            dynamic: roughness.value / growth.value,
            crossover_step,
        }
    }
}

struct LineFit {
    intercept: f64,
    slope: f64,
    intercept_var: f64,
    slope_var: f64,
}

/// Weighted straight-line fit. When any sigma is nonpositive the fit falls
/// back to unweighted with residual-based parameter variances.
fn line_fit(xs: &[f64], ys: &[f64], sigmas: &[f64]) -> Result<LineFit> {
    let n = xs.len();
    if n < 2 {
        return Err(CoreError::InsufficientData("line fit needs >= 2 points".into()));
    }
    let weighted = sigmas.iter().all(|&s| s > 0.0);
    let weights: Vec<f64> = if weighted {
        sigmas.iter().map(|&s| 1.0 / (s * s)).collect()
    } else {
        vec![1.0; n]
    };
    let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x]).collect();
    let (coeffs, cov) = weighted_least_squares(&rows, ys, &weights)
        .ok_or_else(|| CoreError::FitFailed("degenerate design matrix".into()))?;

    let (mut intercept_var, mut slope_var) = (cov[0][0], cov[1][1]);
    if !weighted {
        // Scale the covariance by the residual variance.
        let rss: f64 = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| {
                let r = y - coeffs[0] - coeffs[1] * x;
                r * r
            })
            .sum();
        let s2 = if n > 2 { rss / (n - 2) as f64 } else { 0.0 };
        intercept_var *= s2;
        slope_var *= s2;
    }
    Ok(LineFit {
        intercept: coeffs[0],
        slope: coeffs[1],
        intercept_var,
        slope_var,
    })
}

/// Growth exponent from the squared-width series: weighted regression of
/// ln w2 on ln t over every recorded point in the window; the exponent is
/// half the slope.
pub fn growth_exponent(series: &EnsembleSeries, window: (u64, u64)) -> Result<ExponentFit> {
    let w2 = series.try_stat(StatId::WidthSq).ok_or_else(|| {
        CoreError::InsufficientData("squared width was not recorded".into())
    })?;
    let mut ln_t = Vec::new();
    let mut ln_w2 = Vec::new();
    let mut ln_sigma = Vec::new();
    let mut t_range = (f64::INFINITY, 0.0f64);
    for (i, &t) in series.steps_recorded.iter().enumerate() {
        if t < window.0 || t > window.1 || w2.mean[i] <= 0.0 {
            continue;
        }
        let tf = t as f64;
        ln_t.push(tf.ln());
        ln_w2.push(w2.mean[i].ln());
        // Relative error of w2 is the absolute error of ln w2.
        ln_sigma.push(w2.stderr[i] / w2.mean[i]);
        t_range = (t_range.0.min(tf), t_range.1.max(tf));
    }
    if ln_t.len() < 5 {
        return Err(CoreError::InsufficientData(format!(
            "growth fit window [{}, {}] holds {} usable points, need >= 5",
            window.0,
            window.1,
            ln_t.len()
        )));
    }
    let fit = line_fit(&ln_t, &ln_w2, &ln_sigma)?;
    Ok(ExponentFit {
        value: fit.slope / 2.0,
        stderr: fit.slope_var.max(0.0).sqrt() / 2.0,
        fit_window: t_range,
        points_used: ln_t.len(),
    })
}

/// Saturated squared width of one system size, as input to the roughness fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturatedWidth {
    pub system_size: f64,
    pub width_sq: f64,
    pub stderr: f64,
    pub saturated: bool,
}

/// Roughness exponent from saturated widths across system sizes: weighted
/// log-log regression; the exponent is half the slope. Unsaturated inputs are
/// refused.
pub fn roughness_exponent(points: &[SaturatedWidth]) -> Result<ExponentFit> {
    if let Some(bad) = points.iter().find(|p| !p.saturated) {
        return Err(CoreError::NotSaturated(format!(
            "width at system size {} has not saturated",
            bad.system_size
        )));
    }
    let mut sizes: Vec<f64> = points.iter().map(|p| p.system_size).collect();
    sizes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sizes.dedup();
    if sizes.len() < 3 {
        return Err(CoreError::InsufficientData(format!(
            "roughness fit needs >= 3 distinct system sizes, got {}",
            sizes.len()
        )));
    }
    let mut sorted: Vec<&SaturatedWidth> = points.iter().collect();
    sorted.sort_by(|a, b| a.system_size.partial_cmp(&b.system_size).unwrap());
    let ln_l: Vec<f64> = sorted.iter().map(|p| p.system_size.ln()).collect();
    let ln_w2: Vec<f64> = sorted.iter().map(|p| p.width_sq.ln()).collect();
    let ln_sigma: Vec<f64> = sorted.iter().map(|p| p.stderr / p.width_sq).collect();
    let fit = line_fit(&ln_l, &ln_w2, &ln_sigma)?;
    Ok(ExponentFit {
        value: fit.slope / 2.0,
        stderr: fit.slope_var.max(0.0).sqrt() / 2.0,
        fit_window: (sorted[0].system_size, sorted[sorted.len() - 1].system_size),
        points_used: sorted.len(),
    })
}

/// Relative half-width of the plateau band used to locate its beginning.
pub const PLATEAU_BAND: f64 = 0.05;

/// Crossover-step estimate.
///
/// Unconstrained runs: the step where the early-time growth law, fitted over
/// [10, t_plateau/4], first reaches the plateau of the squared width.
/// Window-constrained runs do not have a single crossover, so the estimate is
/// the beginning of the plateau: the first step from which the width stays
/// within 5% of its plateau mean.
pub fn crossover_time(series: &EnsembleSeries) -> Result<f64> {
    let w_plateau = steady_state_mean(series, StatId::Width)?;
    if !w_plateau.saturated {
        return Err(CoreError::NotSaturated(
            "width series has no plateau to cross into".into(),
        ));
    }
    let w = series.try_stat(StatId::Width).ok_or_else(|| {
        CoreError::InsufficientData("width was not recorded".into())
    })?;
    let entry = plateau_entry_step(
        &series.steps_recorded,
        &w.mean,
        w_plateau.mean,
        PLATEAU_BAND,
    )
    .ok_or_else(|| CoreError::NotSaturated("width never settles into the plateau band".into()))?;

    if series.cell.window.is_finite() {
        return Ok(entry as f64);
    }

    let w2_plateau = steady_state_mean(series, StatId::WidthSq)?;
    let fit_hi = (entry / 4).max(20);
    let growth = growth_exponent(series, (10.min(entry / 2).max(2), fit_hi))?;
    if growth.value <= 0.0 {
        return Err(CoreError::FitFailed("no growth before the plateau".into()));
    }
    // ln w2 = a + 2 beta ln t crosses ln(plateau) at t_cross.
    let ln_t0 = growth.fit_window.0.ln();
    // Reconstruct the fit intercept from the window midpoint fit: refit here
    // to keep one source of truth for the line.
    let w2 = series.stat(StatId::WidthSq);
    let mut ln_t = Vec::new();
    let mut ln_y = Vec::new();
    let mut sig = Vec::new();
    for (i, &t) in series.steps_recorded.iter().enumerate() {
        let tf = t as f64;
        if tf < growth.fit_window.0 || tf > growth.fit_window.1 || w2.mean[i] <= 0.0 {
            continue;
        }
        ln_t.push(tf.ln());
        ln_y.push(w2.mean[i].ln());
        sig.push(w2.stderr[i] / w2.mean[i]);
    }
    let fit = line_fit(&ln_t, &ln_y, &sig)?;
    let _ = ln_t0;
    let t_cross = ((w2_plateau.mean.ln() - fit.intercept) / fit.slope).exp();
    Ok(t_cross)
}

/// Which route produced an extrapolated value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtrapolationMethod {
    KrugMeakin,
    RationalLeastSquares,
    RationalInterpolation,
}

/// An infinite-ring utilization estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub u_inf: f64,
    pub uncertainty: f64,
    pub method: ExtrapolationMethod,
    /// KrugMeakin: [u_inf, const]. Rational: numerator then denominator
    /// coefficients.
    pub coefficients: Vec<f64>,
    pub degrees: Option<(usize, usize)>,
}

/// A steady-state utilization measurement at one system size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilizationPoint {
    pub system_size: f64,
    pub utilization: f64,
    pub stderr: f64,
}

/// Finite-size extrapolation through `u_L = u_inf + c / L^(2(1-alpha))`.
pub fn krug_meakin_extrapolate(
    points: &[UtilizationPoint],
    roughness: f64,
) -> Result<Extrapolation> {
    if points.len() < 3 {
        return Err(CoreError::InsufficientData(format!(
            "extrapolation needs >= 3 system sizes, got {}",
            points.len()
        )));
    }
    let exponent = 2.0 * (1.0 - roughness);
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.system_size.partial_cmp(&b.system_size).unwrap());
    let xs: Vec<f64> = sorted.iter().map(|p| p.system_size.powf(-exponent)).collect();
    let ys: Vec<f64> = sorted.iter().map(|p| p.utilization).collect();
    let sigmas: Vec<f64> = sorted.iter().map(|p| p.stderr).collect();
    let fit = line_fit(&xs, &ys, &sigmas)?;
    Ok(Extrapolation {
        u_inf: fit.intercept,
        uncertainty: fit.intercept_var.max(0.0).sqrt(),
        method: ExtrapolationMethod::KrugMeakin,
        coefficients: vec![fit.intercept, fit.slope],
        degrees: None,
    })
}

fn rational_eval(coeffs: &[f64], degrees: (usize, usize), x: f64) -> f64 {
    let (kn, kd) = degrees;
    let mut num = 0.0;
    for k in (0..=kn).rev() {
        num = num * x + coeffs[k];
    }
    let mut den = 0.0;
    for k in (0..kd).rev() {
        den = den * x + coeffs[kn + 1 + k];
    }
    num / (1.0 + den * x)
}

fn rational_denominator(coeffs: &[f64], degrees: (usize, usize), x: f64) -> f64 {
    let (kn, kd) = degrees;
    let mut den = 0.0;
    for k in (0..kd).rev() {
        den = den * x + coeffs[kn + 1 + k];
    }
    1.0 + den * x
}

fn fit_rational(
    points: &[(f64, f64)],
    degrees: (usize, usize),
) -> Result<(Vec<f64>, f64 /* var(a0) */, f64 /* rss */)> {
    let (kn, kd) = degrees;
    let m = kn + 1 + kd;
    if points.len() < m {
        return Err(CoreError::InsufficientData(format!(
            "rational fit of degrees ({kn},{kd}) needs >= {m} points, got {}",
            points.len()
        )));
    }
    // u * (1 + sum b_k x^k) = sum a_k x^k is linear in (a, b).
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|&(x, u)| {
            let mut row = Vec::with_capacity(m);
            let mut xp = 1.0;
            for _ in 0..=kn {
                row.push(xp);
                xp *= x;
            }
            let mut xp = x;
            for _ in 0..kd {
                row.push(-u * xp);
                xp *= x;
            }
            row
        })
        .collect();
    let rhs: Vec<f64> = points.iter().map(|&(_, u)| u).collect();
    let weights = vec![1.0; points.len()];
    let (coeffs, cov) = weighted_least_squares(&rows, &rhs, &weights)
        .ok_or_else(|| CoreError::FitFailed("degenerate rational design matrix".into()))?;

    let rss: f64 = points
        .iter()
        .map(|&(x, u)| {
            let r = rational_eval(&coeffs, degrees, x) - u;
            r * r
        })
        .sum();
    let dof = points.len().saturating_sub(m);
    let s2 = if dof > 0 { rss / dof as f64 } else { 0.0 };
    Ok((coeffs, cov[0][0] * s2, rss))
}

fn check_poles(coeffs: &[f64], degrees: (usize, usize), x_max: f64) -> Result<()> {
    for i in 0..=512 {
        let x = x_max * i as f64 / 512.0;
        if rational_denominator(coeffs, degrees, x) <= 0.0 {
            return Err(CoreError::PoisonedFit(format!(
                "denominator sign change near x = {x:.6}; choose different degrees"
            )));
        }
    }
    Ok(())
}

/// Rational-function extrapolation of utilization to 1/L = 0.
///
/// With explicit degrees this is one least-squares fit; with degrees omitted
/// the pair (K_n, K_d) in 1..=3 minimizing leave-one-out prediction error is
/// selected. A fit whose denominator changes sign inside [0, max x] is
/// rejected rather than reported.
pub fn rational_extrapolate(
    points: &[(f64, f64)],
    degrees: Option<(usize, usize)>,
) -> Result<Extrapolation> {
    // Automatic degree selection needs at least three points; explicit
    // degrees only need enough points for their coefficients, so a two-point
    // (1,0) fit degenerates to the plain linear extrapolation in 1/L.
    let minimum = match degrees {
        Some((kn, kd)) => (kn + 1 + kd).max(2),
        None => 3,
    };
    if points.len() < minimum {
        return Err(CoreError::InsufficientData(format!(
            "rational extrapolation needs >= {minimum} points here, got {}",
            points.len()
        )));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    {
        let mut distinct = pts.iter().map(|p| p.0).collect::<Vec<_>>();
        distinct.dedup();
        if distinct.len() < pts.len() {
            return Err(CoreError::InvalidConfig("duplicate 1/L abscissae".into()));
        }
    }
    let x_max = pts.last().unwrap().0;

    let chosen = match degrees {
        Some(d) => {
            if d.0 < 1 {
                return Err(CoreError::InvalidConfig(
                    "rational numerator degree must be at least 1".into(),
                ));
            }
            d
        }
        None => select_degrees(&pts)?,
    };

    let (coeffs, var_a0, _) = fit_rational(&pts, chosen)?;
    check_poles(&coeffs, chosen, x_max)?;
    Ok(Extrapolation {
        u_inf: coeffs[0],
        uncertainty: var_a0.max(0.0).sqrt(),
        method: ExtrapolationMethod::RationalLeastSquares,
        coefficients: coeffs,
        degrees: Some(chosen),
    })
}

fn select_degrees(pts: &[(f64, f64)]) -> Result<(usize, usize)> {
    let n = pts.len();
    let mut best: Option<((usize, usize), f64)> = None;
    let mut fallback: Option<(usize, usize)> = None;
    for kn in 1..=3usize {
        for kd in 1..=3usize {
            let m = kn + 1 + kd;
            if m > n {
                continue;
            }
            fallback.get_or_insert((kn, kd));
            if m > n - 1 {
                continue; // cannot leave one out
            }
            let mut score = 0.0;
            let mut usable = true;
            for leave in 0..n {
                let subset: Vec<(f64, f64)> = pts
                    .iter()
                    .enumerate()
                    .filter_map(|(i, &p)| (i != leave).then_some(p))
                    .collect();
                let Ok((coeffs, _, _)) = fit_rational(&subset, (kn, kd)) else {
                    usable = false;
                    break;
                };
                let (x, u) = pts[leave];
                let q = rational_denominator(&coeffs, (kn, kd), x);
                if q <= 0.0 {
                    usable = false;
                    break;
                }
                let r = rational_eval(&coeffs, (kn, kd), x) - u;
                score += r * r;
            }
            if usable && best.as_ref().is_none_or(|&(_, s)| score < s) {
                best = Some(((kn, kd), score));
            }
        }
    }
    best.map(|(d, _)| d)
        .or(fallback)
        .ok_or_else(|| CoreError::InsufficientData("no admissible rational degrees".into()))
}

/// Diagonal rational interpolation (Bulirsch-Stoer) through all points,
/// evaluated at `x`. Exact at the nodes.
pub fn rational_interpolate_at(points: &[(f64, f64)], x: f64) -> Result<(f64, f64)> {
    let n = points.len();
    if n < 2 {
        return Err(CoreError::InsufficientData("interpolation needs >= 2 points".into()));
    }
    if let Some(&(_, y)) = points.iter().find(|&&(px, _)| px == x) {
        return Ok((y, 0.0));
    }
    const TINY: f64 = 1e-300;
    let mut c: Vec<f64> = points.iter().map(|&(_, y)| y).collect();
    let mut d: Vec<f64> = points.iter().map(|&(_, y)| y + TINY).collect();

    let mut nearest = 0;
    for (i, &(px, _)) in points.iter().enumerate() {
        if (x - px).abs() < (x - points[nearest].0).abs() {
            nearest = i;
        }
    }
    let mut y = c[nearest];
    let mut err = 0.0;
    let mut shrinking_nearest = nearest;

    for m in 1..n {
        for i in 0..n - m {
            let w = c[i + 1] - d[i];
            let h = points[i + m].0 - x;
            let t = (points[i].0 - x) * d[i] / h;
            let dd = t - c[i + 1];
            if dd == 0.0 {
                return Err(CoreError::PoisonedFit(
                    "interpolating rational function has a pole at the evaluation point".into(),
                ));
            }
            let dd = w / dd;
            d[i] = c[i + 1] * dd;
            c[i] = t * dd;
        }
        err = if 2 * shrinking_nearest < n - m {
            c[shrinking_nearest]
        } else {
            shrinking_nearest = shrinking_nearest.saturating_sub(1);
            d[shrinking_nearest]
        };
        y += err;
    }
    Ok((y, err.abs()))
}

/// Exact-interpolation cross-check: the diagonal rational interpolant
/// evaluated at 1/L = 0.
pub fn rational_interpolate_at_zero(points: &[(f64, f64)]) -> Result<Extrapolation> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (value, err) = rational_interpolate_at(&pts, 0.0)?;
    Ok(Extrapolation {
        u_inf: value,
        uncertainty: err,
        method: ExtrapolationMethod::RationalInterpolation,
        coefficients: Vec::new(),
        degrees: None,
    })
}
