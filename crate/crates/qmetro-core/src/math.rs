//! Scalar math shims routed through `libm` so the crate builds without `std`.

use num_complex::Complex64 as C64;

pub const PI: f64 = core::f64::consts::PI;

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn cbrt(x: f64) -> f64 {
    libm::cbrt(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}

#[inline]
pub fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Complex modulus.
#[inline]
pub fn cabs(z: C64) -> f64 {
    hypot(z.re, z.im)
}

/// Unit phase `e^{i t}`.
#[inline]
pub fn cis(t: f64) -> C64 {
    C64::new(cos(t), sin(t))
}

/// `(e^z - 1) / z`, the kernel of the exponential's directional derivative,
/// continuous at the origin.
pub fn phi1(z: C64) -> C64 {
    if cabs(z) < 1e-6 {
        // fifth-order Taylor tail keeps the error below 1e-38 in this range
        let mut acc = C64::new(1.0, 0.0);
        let mut term = C64::new(1.0, 0.0);
        for k in 2..=6 {
            term = term * z / C64::new(k as f64, 0.0);
            acc += term;
        }
        acc
    } else {
        (cexp(z) - C64::new(1.0, 0.0)) / z
    }
}

/// Complex exponential.
#[inline]
pub fn cexp(z: C64) -> C64 {
    let m = exp(z.re);
    C64::new(m * cos(z.im), m * sin(z.im))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi1_matches_series_at_small_argument() {
        let z = C64::new(1e-8, -2e-8);
        let direct = phi1(z);
        assert!(cabs(direct - C64::new(1.0, 0.0)) < 1e-7);
    }

    #[test]
    fn phi1_matches_definition_away_from_origin() {
        let z = C64::new(0.3, -1.1);
        let expect = (cexp(z) - C64::new(1.0, 0.0)) / z;
        assert!(cabs(phi1(z) - expect) < 1e-15);
    }

    #[test]
    fn cis_is_unit_modulus() {
        for k in 0..8 {
            let t = 0.7 * k as f64;
            assert!((cabs(cis(t)) - 1.0).abs() < 1e-15);
        }
    }
}
