//! Capacity primitives and the validated three-node network description.

use crate::error::{Error, Result};

/// Gaussian capacity `½·log₂(1 + x)` in bits per channel use.
pub fn capacity(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::CapacityDomain(x));
    }
    Ok(cap(x))
}

/// `max{0, ½·log₂(1 + x)}`, defined for `x > −1`.
pub fn capacity_plus(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= -1.0 {
        return Err(Error::CapacityDomain(x));
    }
    Ok(cap_plus(x))
}

// Unchecked forms for the inner loops. Callers guarantee the domain.
#[inline]
pub(crate) fn cap(x: f64) -> f64 {
    0.5 * x.ln_1p() / std::f64::consts::LN_2
}

#[inline]
pub(crate) fn cap_plus(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        cap(x)
    }
}

/// Channel amplitude gains. `h1` is user 2 ↔ BS, `h2` is user 1 ↔ BS and
/// `h3` is the D2D link between the users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains {
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
}

impl Gains {
    pub fn new(h1: f64, h2: f64, h3: f64) -> Self {
        Self { h1, h2, h3 }
    }

    #[inline]
    pub fn h1_sq(&self) -> f64 {
        self.h1 * self.h1
    }

    #[inline]
    pub fn h2_sq(&self) -> f64 {
        self.h2 * self.h2
    }

    #[inline]
    pub fn h3_sq(&self) -> f64 {
        self.h3 * self.h3
    }
}

/// Channel gains and power budgets of the two users and the base station.
///
/// Only obtainable through [`validate_config`] (or [`NetworkConfig::new`]),
/// so every instance satisfies `P ≥ 0`, finiteness and `h2² ≥ h1²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    gains: Gains,
    p1: f64,
    p2: f64,
    p3: f64,
}

impl NetworkConfig {
    pub fn new(h1: f64, h2: f64, h3: f64, p1: f64, p2: f64, p3: f64) -> Result<Self> {
        validate_config(RawConfig { h1, h2, h3, p1, p2, p3 })
    }

    /// Same gains, every node at power `p`.
    pub fn with_common_power(h1: f64, h2: f64, h3: f64, p: f64) -> Result<Self> {
        Self::new(h1, h2, h3, p, p, p)
    }

    pub fn gains(&self) -> Gains {
        self.gains
    }

    pub fn h1(&self) -> f64 {
        self.gains.h1
    }

    pub fn h2(&self) -> f64 {
        self.gains.h2
    }

    pub fn h3(&self) -> f64 {
        self.gains.h3
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    pub fn p3(&self) -> f64 {
        self.p3
    }

    /// Copy with a different D2D gain. The ordering invariant does not
    /// involve `h3`, so this cannot fail for finite input.
    pub fn with_h3(&self, h3: f64) -> Result<Self> {
        Self::new(self.gains.h1, self.gains.h2, h3, self.p1, self.p2, self.p3)
    }

    pub fn raw(&self) -> RawConfig {
        RawConfig {
            h1: self.gains.h1,
            h2: self.gains.h2,
            h3: self.gains.h3,
            p1: self.p1,
            p2: self.p2,
            p3: self.p3,
        }
    }
}

/// Unvalidated candidate configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawConfig {
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

pub fn validate_config(raw: RawConfig) -> Result<NetworkConfig> {
    let fields = [
        ("h1", raw.h1),
        ("h2", raw.h2),
        ("h3", raw.h3),
        ("p1", raw.p1),
        ("p2", raw.p2),
        ("p3", raw.p3),
    ];
    for (field, value) in fields {
        if !value.is_finite() {
            return Err(Error::NonFinite { field, value });
        }
    }
    for (field, value) in &fields[3..] {
        if *value < 0.0 {
            return Err(Error::NegativePower { field, value: *value });
        }
    }
    let (h1_sq, h2_sq) = (raw.h1 * raw.h1, raw.h2 * raw.h2);
    if h2_sq < h1_sq {
        return Err(Error::Ordering { h1_sq, h2_sq });
    }
    Ok(NetworkConfig {
        gains: Gains::new(raw.h1, raw.h2, raw.h3),
        p1: raw.p1,
        p2: raw.p2,
        p3: raw.p3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn capacity_examples() {
        assert_eq!(capacity(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(capacity(1.0).unwrap(), 0.5, epsilon = 1e-15);
        // ½·log₂(101), 30-digit reference value
        assert_abs_diff_eq!(capacity(100.0).unwrap(), 3.329_105_741_375_897, epsilon = 1e-6);
    }

    #[test]
    fn capacity_rejects_bad_input() {
        assert_eq!(capacity(-1e-9), Err(Error::CapacityDomain(-1e-9)));
        assert!(capacity(f64::NAN).is_err());
        assert!(capacity(f64::INFINITY).is_err());
    }

    #[test]
    fn capacity_plus_examples() {
        assert_eq!(capacity_plus(-0.5).unwrap(), 0.0);
        assert_eq!(capacity_plus(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(capacity_plus(99.5).unwrap(), 3.325_525_845_589_464, epsilon = 1e-6);
        assert!(capacity_plus(-1.0).is_err());
        assert!(capacity_plus(-2.0).is_err());
    }

    #[test]
    fn validate_examples() {
        assert!(NetworkConfig::with_common_power(0.15, 1.0, 0.5, 100.0).is_ok());
        assert!(matches!(
            NetworkConfig::with_common_power(1.0, 0.5, 0.3, 100.0),
            Err(Error::Ordering { .. })
        ));
        assert!(matches!(
            NetworkConfig::new(0.15, 1.0, 0.5, -1.0, 100.0, 100.0),
            Err(Error::NegativePower { field: "p1", .. })
        ));
        assert!(matches!(
            NetworkConfig::new(0.15, f64::NAN, 0.5, 1.0, 1.0, 1.0),
            Err(Error::NonFinite { field: "h2", .. })
        ));
    }

    #[test]
    fn ordering_uses_squares() {
        assert!(NetworkConfig::with_common_power(-0.9, 1.0, 0.0, 1.0).is_ok());
        assert!(NetworkConfig::with_common_power(0.9, -1.0, 0.0, 1.0).is_ok());
        assert!(NetworkConfig::with_common_power(1.0, -1.0, 0.0, 1.0).is_ok());
    }

    proptest! {
        #[test]
        fn capacity_concave_increasing(a in 1e-6f64..1e4, b in 1e-6f64..1e4) {
            let (ca, cb) = (capacity(a).unwrap(), capacity(b).unwrap());
            let mid = capacity(0.5 * (a + b)).unwrap();
            prop_assert!(mid >= 0.5 * (ca + cb) - 1e-15);
            if a < b {
                prop_assert!(ca < cb);
            }
        }

        #[test]
        fn capacity_plus_matches_capacity(x in 0.0f64..1e6) {
            prop_assert!((capacity_plus(x).unwrap() - capacity(x).unwrap()).abs() <= 1e-15);
        }
    }
}
