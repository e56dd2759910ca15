//! Double-double helpers for central coordinates.
//!
//! Separations between points of deep tower levels fall far below the f64
//! spacing near 1, so central coordinates are carried as unevaluated sums
//! of two doubles.

pub use twofloat::TwoFloat as Dd;

pub fn dd(x: f64) -> Dd {
    Dd::from(x)
}

pub fn to_f64(x: Dd) -> f64 {
    x.hi() + x.lo()
}

/// `a / b` to full double-double accuracy.
///
/// `TwoFloat` division only returns the leading double of the quotient; one
/// Newton step on the residual restores the low part.
pub fn div(a: Dd, b: Dd) -> Dd {
    let q = a / b;
    q + (a - q * b) / b
}

/// `x^n` by repeated squaring.
pub fn powu(x: Dd, mut n: u64) -> Dd {
    let mut base = x;
    let mut acc = dd(1.0);
    while n > 0 {
        if n & 1 == 1 {
            acc *= base;
        }
        base *= base;
        n >>= 1;
    }
    acc
}

pub fn abs(x: Dd) -> Dd {
    if x < 0.0 {
        -x
    } else {
        x
    }
}

/// Rebuilds a value from its `(hi, lo)` parts.
pub fn from_parts(hi: f64, lo: f64) -> Option<Dd> {
    Dd::try_from((hi, lo)).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powu_matches_repeated_multiplication() {
        let x = dd(1.2);
        let mut slow = dd(1.0);
        for _ in 0..37 {
            slow *= x;
        }
        let fast = powu(x, 37);
        assert!(to_f64(abs(fast - slow)) < 1e-28 * to_f64(slow));
    }

    #[test]
    fn keeps_digits_below_f64_spacing() {
        let x = dd(1.0) + dd(1e-25);
        assert_eq!(to_f64(x - dd(1.0)), 1e-25);
    }

    #[test]
    fn division_keeps_the_low_part() {
        let third = div(dd(1.0), dd(3.0));
        assert_eq!(to_f64(third * dd(3.0) - dd(1.0)), 0.0);
        assert!(third.lo() != 0.0);
        let x = powu(dd(1.81), 49);
        let y = powu(dd(1.81), 48);
        assert!(to_f64(abs(div(x, y) - dd(1.81))) < 1e-30);
    }

    #[test]
    fn parts_round_trip() {
        let x = div(dd(1.0), dd(3.0));
        assert_eq!(from_parts(x.hi(), x.lo()), Some(x));
    }
}
