use super::NumericsError;

/// Switch from the power series to the large-argument expansion.
///
/// The asymptotic series for `e^{-z} I0(z)` can only be truncated to a
/// relative error of about `e^{-2z}`, so it is not used below `z = 20`.
const SERIES_LIMIT: f64 = 20.0;

/// Exponentially scaled modified Bessel function `e^{-|z|} I0(z)`.
///
/// The result lies in `(0, 1]`, decreases with `|z|` and never overflows.
pub fn bessel_i0_scaled(z: f64) -> Result<f64, NumericsError> {
    if !z.is_finite() {
        return Err(NumericsError::NonFinite(z));
    }
    Ok(i0_scaled(z))
}

#[inline]
pub(crate) fn i0_scaled(z: f64) -> f64 {
    let x = libm::fabs(z);
    if x < SERIES_LIMIT {
        // sum_m (x^2/4)^m / (m!)^2, all terms positive
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut m = 1.0;
        loop {
            term *= q / (m * m);
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
            m += 1.0;
        }
        sum * libm::exp(-x)
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            let ratio = (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * x * k);
            if ratio >= 1.0 {
                break;
            }
            term *= ratio;
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
            k += 1.0;
        }
        sum / libm::sqrt(2.0 * core::f64::consts::PI * x)
    }
}

/// Inverse hyperbolic sine, `ln(x + sqrt(1 + x^2))`, without cancellation for
/// large negative arguments.
pub fn asinh(x: f64) -> Result<f64, NumericsError> {
    if !x.is_finite() {
        return Err(NumericsError::NonFinite(x));
    }
    Ok(libm::asinh(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Plain 30-term power series for I0, then scaled.
    fn series_oracle(z: f64) -> f64 {
        let q = z * z / 4.0;
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        for m in 1..30 {
            term *= q / ((m * m) as f64);
            sum += term;
        }
        sum * (-z.abs()).exp()
    }

    #[test]
    fn known_values() {
        assert_eq!(bessel_i0_scaled(0.0).unwrap(), 1.0);
        // I0(1) = 1.2660658777520082
        assert_relative_eq!(
            bessel_i0_scaled(1.0).unwrap(),
            0.465_759_607_593_640_4,
            max_relative = 1e-14
        );
        // asymptotic oracle 1/sqrt(2 pi z) sum_n ((2n-1)!!)^2 / (n! (8z)^n), five terms
        let z = 100.0f64;
        let u = 8.0 * z;
        let asym = (1.0 + 1.0 / u + 9.0 / (2.0 * u * u) + 225.0 / (6.0 * u.powi(3))
            + 11025.0 / (24.0 * u.powi(4)))
            / (2.0 * core::f64::consts::PI * z).sqrt();
        assert_relative_eq!(bessel_i0_scaled(100.0).unwrap(), asym, max_relative = 5e-11);
        assert_relative_eq!(
            bessel_i0_scaled(100.0).unwrap(),
            0.039_944_379_299_096_68,
            max_relative = 1e-13
        );
    }

    #[test]
    fn matches_power_series_oracle() {
        let mut z = -10.0;
        while z <= 10.0 {
            let got = i0_scaled(z);
            let want = series_oracle(z);
            assert!(((got - want) / want).abs() < 1e-12, "z={z}: {got} vs {want}");
            z += 0.0625;
        }
    }

    #[test]
    fn continuous_across_branch_switch() {
        let below = i0_scaled(SERIES_LIMIT - 1e-12);
        let above = i0_scaled(SERIES_LIMIT);
        assert!(((below - above) / above).abs() < 1e-13);
    }

    #[test]
    fn monotone_and_bounded() {
        let mut prev = i0_scaled(0.0);
        let mut z = 0.01;
        while z < 800.0 {
            let v = i0_scaled(z);
            assert!(v > 0.0 && v <= 1.0);
            assert!(v <= prev, "not decreasing at {z}");
            prev = v;
            z *= 1.01;
        }
        assert!(i0_scaled(1e300) > 0.0);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(bessel_i0_scaled(f64::NAN).is_err());
        assert!(bessel_i0_scaled(f64::INFINITY).is_err());
        assert!(asinh(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn asinh_values() {
        assert_eq!(asinh(0.0).unwrap(), 0.0);
        assert_relative_eq!(asinh(1.0).unwrap(), 0.881_373_587_019_543, max_relative = 1e-15);
        assert_eq!(asinh(-3.7).unwrap(), -asinh(3.7).unwrap());
        // log form would cancel to zero here
        assert_relative_eq!(asinh(-1e10).unwrap(), -(2e10f64).ln(), max_relative = 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn even_symmetry(z in -1e4f64..1e4) {
            proptest::prop_assert_eq!(i0_scaled(z).to_bits(), i0_scaled(-z).to_bits());
        }

        #[test]
        fn asinh_is_odd(x in -1e6f64..1e6) {
            proptest::prop_assert_eq!(asinh(-x).unwrap(), -asinh(x).unwrap());
        }
    }
}
