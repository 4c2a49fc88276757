/// Integer division rounding half away from zero. `den` must be positive.
#[inline]
pub fn round_div(num: i64, den: i64) -> i64 {
    debug_assert!(den > 0);
    if num >= 0 {
        (num + den / 2) / den
    } else {
        -((-num + den / 2) / den)
    }
}

/// Round half away from zero.
#[inline]
pub fn round_half_away(x: f64) -> f64 {
    libm::round(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle(num: i64, den: i64) -> i64 {
        let q = num as f64 / den as f64;
        // exact for the small magnitudes exercised here
        libm::round(q) as i64
    }

    #[test]
    fn matches_float_rounding() {
        for den in 1..=40 {
            for num in -500..=500 {
                assert_eq!(round_div(num, den), oracle(num, den), "{num}/{den}");
            }
        }
    }

    #[test]
    fn halves_round_away() {
        assert_eq!(round_div(1, 2), 1);
        assert_eq!(round_div(-1, 2), -1);
        assert_eq!(round_div(3, 2), 2);
        assert_eq!(round_div(-3, 2), -2);
        assert_eq!(round_div(15, 10), 2);
        assert_eq!(round_half_away(0.5), 1.0);
        assert_eq!(round_half_away(-2.5), -3.0);
    }
}
