//! Small floating-point helpers shared across modules.

/// Slack used when rounding ratios that are integral in exact arithmetic
/// (e.g. `2 s / 5 ms`) but land a few ulps off in binary floating point.
const ROUNDING_SLACK: f64 = 1e-9;

pub(crate) fn floor_tolerant(x: f64) -> f64 {
    (x + ROUNDING_SLACK).floor()
}

pub(crate) fn ceil_tolerant(x: f64) -> f64 {
    (x - ROUNDING_SLACK).ceil()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_ratios_round_to_the_integer() {
        let v = 3.0 / 3.6;
        assert_eq!(floor_tolerant(15.0 / (v * 0.005)), 3600.0);
        assert_eq!(ceil_tolerant(2.0 / 0.005), 400.0);
        assert_eq!(ceil_tolerant(2.0 / 0.0049), 409.0);
        assert_eq!(floor_tolerant(2.5), 2.0);
    }
}
