//! Grid scan of probe and readout angles restricted to the plane of the two
//! extremal eigenvectors, where the sensitivity has a closed form.

use crate::eig;
use crate::math;
use crate::mat::ComplexMatrix;
use crate::{Error, Result};

/// Default number of nodes per angle axis.
pub const DEFAULT_GRID: usize = 721;

/// Location and value of the best grid cell.
#[derive(Debug, Clone, Copy)]
pub struct ScanResult {
    pub alpha: f64,
    pub theta: f64,
    pub delta_b: f64,
    pub grid: usize,
    pub phi: f64,
}

/// Uncertainty of the two-angle readout family: probe at polar angle `theta`
/// (azimuth `phi/2`) on the extremal-pair Bloch sphere, observable tilted by
/// `alpha` from the pair's population axis.
pub fn closed_form_delta_b(
    alpha: f64,
    theta: f64,
    phi: f64,
    spread: f64,
    tau: f64,
    n_shots: u64,
) -> f64 {
    let half = phi / 2.0;
    let (sa, ca) = (math::sin(alpha), math::cos(alpha));
    let (st, ct) = (math::sin(theta), math::cos(theta));
    // sine of the angle between the probe and readout axes as a cross-product
    // norm; the √(1−cos²) form loses the numerator to rounding at the poles
    let noise = math::hypot(sa * math::sin(half), ca * st - sa * ct * math::cos(half));
    let signal = spread * math::abs(sa * st * math::sin(half)) * tau * math::sqrt(n_shots as f64);
    if signal < 1e-300 {
        return f64::INFINITY;
    }
    noise / signal
}

/// Scans `alpha, theta ∈ [0, π]` on a `grid × grid` lattice at fixed relative
/// phase `phi`, returning the first cell attaining the minimum uncertainty
/// (row-major order, `alpha` outermost, so ties resolve lexicographically).
pub fn two_level_optimum_scan(
    h: &ComplexMatrix,
    grid: usize,
    phi: f64,
    tau: f64,
    n_shots: u64,
) -> Result<ScanResult> {
    if grid < 2 {
        return Err(Error::CapExceeded { name: "grid" });
    }
    if tau <= 0.0 || n_shots == 0 {
        return Err(Error::InvalidProtocol("nonpositive time or shot count"));
    }
    let spread = eig::spectral_spread(h)?;
    if spread < 1e-12 {
        return Err(Error::ZeroSpread);
    }
    if math::abs(math::sin(phi / 2.0)) < 1e-12 {
        return Err(Error::InsensitiveObservable);
    }
    let step = math::PI / (grid - 1) as f64;
    let mut best = ScanResult {
        alpha: 0.0,
        theta: 0.0,
        delta_b: f64::INFINITY,
        grid,
        phi,
    };
    for i in 0..grid {
        let alpha = i as f64 * step;
        for j in 0..grid {
            let theta = j as f64 * step;
            let db = closed_form_delta_b(alpha, theta, phi, spread, tau, n_shots);
            if db < best.delta_b {
                best.alpha = alpha;
                best.theta = theta;
                best.delta_b = db;
            }
        }
    }
    if !best.delta_b.is_finite() {
        return Err(Error::InsensitiveObservable);
    }
    Ok(best)
}
