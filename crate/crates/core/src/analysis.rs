//! Radial-profile experiments validating the geometry of the regularizer.
//!
//! A sharp disk of height `h` and radius `R` is approached by C² radial
//! ramps of increasing edge steepness. For each ramp the shape-operator
//! norm has the closed radial form
//!
//! ```text
//! |W(r)| = sqrt( (u''/(1+u'²)^{3/2})² + (u'/(r·sqrt(1+u'²)))² )
//! ```
//!
//! and the area integral `2π ∫ r |W| dr` tends to `4πR`, independent of the
//! contrast `h` — whereas the total variation integral tends to `2πRh`.
//! The integral is bracketed at every steepness by two closed-form bounds,
//! and the squared misfit against the sharp disk obeys the lower bound
//! `∫ (f−u)² ≥ −πh³R/(12 u'(R))`. This module computes all of these
//! quantities by adaptive quadrature so they can be asserted numerically.

use crate::error::{Result, SatvError};
use crate::grid::ImageGrid;

use std::f64::consts::PI;

const QUAD_RTOL: f64 = 1e-6;
const QUAD_MAX_DEPTH: usize = 48;

/// A C² radial ramp from height `h` down to 0, flat outside a transition
/// band `[band_lo, band_hi]` centered at the disk radius.
///
/// The transition is a quintic smoothstep, so the profile is exactly `h` on
/// `[0, band_lo]`, exactly `0` on `[band_hi, 2R]`, concave before `R` and
/// convex after, with peak slope `u'(R) = -steepness`.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub radius: f64,
    pub contrast: f64,
    pub steepness: f64,
    pub band_lo: f64,
    pub band_hi: f64,
    band_width: f64,
}

/// Builds the ramp. Requires `steepness > 2h/R`, the slope condition for the
/// family the contrast analysis quantifies over.
pub fn smooth_disk_profile(radius: f64, contrast: f64, steepness: f64) -> Result<RadialProfile> {
    if !(radius > 0.0 && contrast > 0.0) {
        return Err(SatvError::Config(format!(
            "radius and contrast must be positive, got R={radius}, h={contrast}"
        )));
    }
    if steepness <= 2.0 * contrast / radius {
        return Err(SatvError::Config(format!(
            "steepness {steepness} must exceed 2h/R = {}",
            2.0 * contrast / radius
        )));
    }
    // Quintic smoothstep peak slope is 15/8 over a unit band, so a band of
    // width 15h/(8s) realizes u'(R) = -s. The slope condition guarantees the
    // band stays inside (0, 2R).
    let band_width = 15.0 * contrast / (8.0 * steepness);
    Ok(RadialProfile {
        radius,
        contrast,
        steepness,
        band_lo: radius - band_width / 2.0,
        band_hi: radius + band_width / 2.0,
        band_width,
    })
}

impl RadialProfile {
    /// Profile value `u(r)`.
    pub fn u(&self, r: f64) -> f64 {
        if r <= self.band_lo {
            self.contrast
        } else if r >= self.band_hi {
            0.0
        } else {
            let t = (r - self.band_lo) / self.band_width;
            let s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
            self.contrast * (1.0 - s)
        }
    }

    /// First derivative `u'(r)` (nonpositive).
    pub fn du(&self, r: f64) -> f64 {
        if r <= self.band_lo || r >= self.band_hi {
            0.0
        } else {
            let t = (r - self.band_lo) / self.band_width;
            let ds = 30.0 * t * t * (1.0 - t) * (1.0 - t);
            -self.contrast * ds / self.band_width
        }
    }

    /// Second derivative `u''(r)`.
    pub fn ddu(&self, r: f64) -> f64 {
        if r <= self.band_lo || r >= self.band_hi {
            0.0
        } else {
            let t = (r - self.band_lo) / self.band_width;
            let dds = 60.0 * t * (2.0 * t - 1.0) * (t - 1.0);
            -self.contrast * dds / (self.band_width * self.band_width)
        }
    }

    /// `u'/sqrt(1+u'²)`, the integrand of the closed-form bound corrections.
    fn slope_fraction(&self, r: f64) -> f64 {
        let d = self.du(r);
        d / (1.0 + d * d).sqrt()
    }
}

/// Radial shape-operator norm at `r > 0`.
pub fn radial_weingarten_norm(profile: &RadialProfile, r: f64) -> f64 {
    debug_assert!(r > 0.0);
    let d = profile.du(r);
    let dd = profile.ddu(r);
    let g = 1.0 + d * d;
    let curv_radial = dd / (g * g.sqrt());
    let curv_azimuthal = d / (r * g.sqrt());
    curv_radial.hypot(curv_azimuthal)
}

/// `2π ∫ r |W(r)| dr` over the support of the transition band, by adaptive
/// quadrature split at the disk radius (the integrand vanishes elsewhere;
/// `r·|W| → 0` as `r → 0`).
pub fn weingarten_integral(profile: &RadialProfile) -> Result<f64> {
    let f = |r: f64| r * radial_weingarten_norm(profile, r);
    let left = integrate(&f, profile.band_lo, profile.radius)?;
    let right = integrate(&f, profile.radius, profile.band_hi)?;
    Ok(2.0 * PI * (left + right))
}

/// The closed-form bracket `(lower, upper)` around the shape-operator
/// integral:
///
/// ```text
/// -4πR·q(R) + 4π ∫₀^R q dr  ≤  ∫|W|  ≤  -4πR·q(R) - 4π ∫_R^{2R} q dr
/// ```
///
/// with `q = u'/sqrt(1+u'²)`.
pub fn sandwich_bounds(profile: &RadialProfile) -> Result<(f64, f64)> {
    let q = |r: f64| profile.slope_fraction(r);
    let q_at_edge = profile.slope_fraction(profile.radius);
    let base = -4.0 * PI * profile.radius * q_at_edge;
    // q vanishes outside the band, so restrict the quadrature to it.
    let inner = integrate(&q, profile.band_lo, profile.radius)?;
    let outer = integrate(&q, profile.radius, profile.band_hi)?;
    Ok((base + 4.0 * PI * inner, base - 4.0 * PI * outer))
}

/// Squared-misfit lower bound of the fidelity term: returns
/// `(∫(f−u)², -πh³R/(12 u'(R)))` where `f` is the sharp disk.
pub fn fidelity_lower_bound_check(profile: &RadialProfile) -> Result<(f64, f64)> {
    let h = profile.contrast;
    let inside = |r: f64| r * (h - profile.u(r)).powi(2);
    let outside = |r: f64| r * profile.u(r).powi(2);
    let lhs = 2.0
        * PI
        * (integrate(&inside, profile.band_lo, profile.radius)?
            + integrate(&outside, profile.radius, profile.band_hi)?);
    let rhs = -PI * h.powi(3) * profile.radius / (12.0 * profile.du(profile.radius));
    Ok((lhs, rhs))
}

/// The same bound as it enters the energy: fidelity weighted by `1/(2λ)`,
/// bound `-πh³R/(24 λ u'(R))`.
pub fn fidelity_term_lower_bound(profile: &RadialProfile, lambda: f64) -> Result<(f64, f64)> {
    let (lhs, _) = fidelity_lower_bound_check(profile)?;
    let h = profile.contrast;
    let rhs = -PI * h.powi(3) * profile.radius / (24.0 * lambda * profile.du(profile.radius));
    Ok((lhs / (2.0 * lambda), rhs))
}

/// `2π ∫ r |u'| dr`: the total variation of the ramp, which approaches the
/// sharp-disk value `2πRh` as the band tightens.
pub fn tv_radial_integral(profile: &RadialProfile) -> Result<f64> {
    let f = |r: f64| r * profile.du(r).abs();
    let left = integrate(&f, profile.band_lo, profile.radius)?;
    let right = integrate(&f, profile.radius, profile.band_hi)?;
    Ok(2.0 * PI * (left + right))
}

/// One row of the steepness sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub steepness: f64,
    pub integral: f64,
    pub lower: f64,
    pub upper: f64,
    pub fidelity_lhs: f64,
    pub fidelity_rhs: f64,
    pub tv_integral: f64,
}

/// The default steepness multipliers applied to the base slope `2h/R`.
pub const SWEEP_MULTIPLIERS: [f64; 4] = [10.0, 100.0, 1000.0, 10000.0];

/// Runs the steepness sweep for a disk `(R, h)`: each row carries the
/// shape-operator integral, its bracket, both sides of the fidelity bound
/// and the TV integral.
pub fn steepness_sweep(radius: f64, contrast: f64, multipliers: &[f64]) -> Result<Vec<SweepRow>> {
    let base = 2.0 * contrast / radius;
    let mut rows = Vec::with_capacity(multipliers.len());
    for &mult in multipliers {
        let profile = smooth_disk_profile(radius, contrast, mult * base)?;
        let integral = weingarten_integral(&profile)?;
        let (lower, upper) = sandwich_bounds(&profile)?;
        let (fid_lhs, fid_rhs) = fidelity_lower_bound_check(&profile)?;
        let tv = tv_radial_integral(&profile)?;
        rows.push(SweepRow {
            steepness: mult * base,
            integral,
            lower,
            upper,
            fidelity_lhs: fid_lhs,
            fidelity_rhs: fid_rhs,
            tv_integral: tv,
        });
    }
    Ok(rows)
}

/// Robust contrast estimate for a centered disk of radius `radius` pixels:
/// mean over the inner half-disk minus mean outside 1.5 radii. Pixel centers
/// decide membership, matching [`crate::synth::disk_image`].
pub fn contrast_of(u: &ImageGrid, radius: f64) -> f64 {
    let (m, n) = u.shape();
    let (mut inner_sum, mut inner_count) = (0.0, 0usize);
    let (mut outer_sum, mut outer_count) = (0.0, 0usize);
    for i in 0..m {
        for j in 0..n {
            let x = i as f64 + 0.5 - m as f64 / 2.0;
            let y = j as f64 + 0.5 - n as f64 / 2.0;
            let r2 = x * x + y * y;
            if r2 < (radius / 2.0) * (radius / 2.0) {
                inner_sum += u.values()[[i, j]];
                inner_count += 1;
            } else if r2 > (1.5 * radius) * (1.5 * radius) {
                outer_sum += u.values()[[i, j]];
                outer_count += 1;
            }
        }
    }
    let inner = if inner_count > 0 { inner_sum / inner_count as f64 } else { 0.0 };
    let outer = if outer_count > 0 { outer_sum / outer_count as f64 } else { 0.0 };
    inner - outer
}

/// Adaptive Simpson quadrature with relative tolerance [`QUAD_RTOL`].
fn integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let eps = QUAD_RTOL * whole.abs();
    simpson_recurse(f, a, fa, b, fb, m, fm, whole, eps, QUAD_MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    eps: f64,
    depth: usize,
) -> Result<f64> {
    let lm = 0.5 * (a + m);
    let flm = f(lm);
    let rm = 0.5 * (m + b);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * eps {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(SatvError::QuadratureNonConvergence {
            max_depth: QUAD_MAX_DEPTH,
        });
    }
    Ok(
        simpson_recurse(f, a, fa, m, fm, lm, flm, left, eps / 2.0, depth - 1)?
            + simpson_recurse(f, m, fm, b, fb, rm, frm, right, eps / 2.0, depth - 1)?,
    )
}
