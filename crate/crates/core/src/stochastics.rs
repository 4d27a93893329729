//! Poisson arrivals of pedestrian blockages and the frame-level probability
//! calculus.
//!
//! Pedestrian blockages arrive as a Poisson process whose rate follows the
//! length of the blocking strip (see [`crate::geometry::blocking_region_length`]).
//! Each blockage lasts a duration drawn uniformly from `[tau_min, tau_max]`,
//! so whether frame `i` is clear depends on every arrival in the preceding
//! `⌈tau_max / T⌉` frames. The infinite sums over arrival counts reduce to
//! closed forms through the Poisson probability generating function.

use rayon::prelude::*;

use crate::error::{HbbError, Result};
use crate::geometry::{blocking_region_length, blocking_region_length_2d, BodyGeometry};
use crate::numeric::ceil_tolerant;

/// Pedestrian density and blockage-duration bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PedestrianProcess {
    /// Arrivals per square meter per second.
    pub lambda0: f64,
    /// Seconds.
    pub tau_min: f64,
    /// Seconds.
    pub tau_max: f64,
}

impl PedestrianProcess {
    pub const SILENT: f64 = 0.01;
    pub const BUSY: f64 = 0.3;
    pub const CROWDED: f64 = 2.0;

    pub fn new(lambda0: f64, tau_min: f64, tau_max: f64) -> Result<Self> {
        let proc = PedestrianProcess {
            lambda0,
            tau_min,
            tau_max,
        };
        proc.validate()?;
        Ok(proc)
    }

    /// Measured blockage durations of 0.5 s to 2 s with the given density.
    pub fn with_density(lambda0: f64) -> Self {
        PedestrianProcess {
            lambda0,
            tau_min: 0.5,
            tau_max: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 >= 0.0 && self.lambda0.is_finite()) {
            return Err(HbbError::domain(format!(
                "lambda0 must be finite and >= 0, got {}",
                self.lambda0
            )));
        }
        if !(self.tau_min > 0.0 && self.tau_min < self.tau_max && self.tau_max.is_finite()) {
            return Err(HbbError::domain(format!(
                "blockage durations need 0 < tau_min < tau_max, got [{}, {}]",
                self.tau_min, self.tau_max
            )));
        }
        Ok(())
    }

    /// Number of past frames whose arrivals can still block the current one.
    pub fn memory_frames(&self, frame_len: f64) -> usize {
        ceil_tolerant(self.tau_max / frame_len) as usize
    }
}

/// TDD frame: downlink slot, guard slot carrying the pilots, uplink slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameStructure {
    pub downlink: f64,
    pub guard: f64,
    pub uplink: f64,
}

impl FrameStructure {
    pub fn new(downlink: f64, guard: f64, uplink: f64) -> Result<Self> {
        let frame = FrameStructure {
            downlink,
            guard,
            uplink,
        };
        frame.validate()?;
        Ok(frame)
    }

    /// Frame of total length `frame_len` whose growth goes entirely into the
    /// downlink slot.
    pub fn with_length(self, frame_len: f64) -> Result<Self> {
        FrameStructure::new(
            frame_len - self.guard - self.uplink,
            self.guard,
            self.uplink,
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("downlink", self.downlink),
            ("guard", self.guard),
            ("uplink", self.uplink),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(HbbError::domain(format!(
                    "{name} slot must be finite and > 0, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Frame length `T`.
    pub fn len(&self) -> f64 {
        self.downlink + self.guard + self.uplink
    }
}

impl Default for FrameStructure {
    fn default() -> Self {
        FrameStructure {
            downlink: 4.8e-3,
            guard: 0.1e-3,
            uplink: 0.1e-3,
        }
    }
}

/// How the duration-survival fraction is treated outside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Persistence {
    /// Clamp to `[0, 1]`, the CDF of the uniform duration distribution.
    #[default]
    Clamped,
    /// Use the raw fraction, negative below `tau_min` and above one past
    /// `tau_max`. For discrepancy studies only.
    Literal,
}

/// Probability of `k` arrivals when `mu` are expected.
pub fn poisson_pmf(k: u64, mu: f64) -> Result<f64> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(HbbError::domain(format!(
            "Poisson mean must be finite and >= 0, got {mu}"
        )));
    }
    if mu == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    if k <= 170 && mu < 700.0 {
        let mut p = (-mu).exp();
        for j in 1..=k {
            p *= mu / j as f64;
        }
        return Ok(p);
    }
    let ln_fact: f64 = (2..=k).map(|j| (j as f64).ln()).sum();
    Ok((k as f64 * mu.ln() - mu - ln_fact).exp())
}

fn check_density(lambda0: f64) -> Result<()> {
    if lambda0 >= 0.0 && lambda0.is_finite() {
        Ok(())
    } else {
        Err(HbbError::domain(format!(
            "lambda0 must be finite and >= 0, got {lambda0}"
        )))
    }
}

/// Blockage arrival rate (1/s) for a handset `d_2d` meters from the AP.
pub fn arrival_rate(lambda0: f64, d_2d: f64, geom: &BodyGeometry) -> Result<f64> {
    check_density(lambda0)?;
    Ok(lambda0 * blocking_region_length(d_2d, geom)? * geom.pedestrian_width)
}

/// Arrival rate under the planar blocking model.
pub fn arrival_rate_2d(lambda0: f64, d_2d: f64, geom: &BodyGeometry) -> Result<f64> {
    check_density(lambda0)?;
    Ok(lambda0 * blocking_region_length_2d(d_2d, geom)? * geom.pedestrian_width)
}

/// Arrival rate at zenith angle `phi`, written in terms of the angle rather
/// than the horizontal distance.
pub fn frame_arrival_rate(phi: f64, lambda0: f64, geom: &BodyGeometry) -> Result<f64> {
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&phi) {
        return Err(HbbError::domain(format!(
            "zenith angle must lie in [0, pi/2), got {phi}"
        )));
    }
    check_density(lambda0)?;
    let strip =
        (geom.pedestrian_height - geom.handset_height) * phi.tan() + geom.pedestrian_width / 2.0;
    Ok(lambda0 * strip * geom.pedestrian_width)
}

/// Probability of at least one arrival within a frame.
pub fn frame_arrival_prob(rate: f64, frame_len: f64) -> f64 {
    -(-rate * frame_len).exp_m1()
}

/// Fraction of blockages arriving in frame `j` that have ended by frame `i`.
pub fn persistence_factor(
    i: usize,
    j: usize,
    frame_len: f64,
    proc: &PedestrianProcess,
    mode: Persistence,
) -> Result<f64> {
    if j >= i {
        return Err(HbbError::domain(format!(
            "earlier frame {j} must precede frame {i}"
        )));
    }
    Ok(survival_fraction((i - j) as f64 * frame_len, proc, mode))
}

fn survival_fraction(elapsed: f64, proc: &PedestrianProcess, mode: Persistence) -> f64 {
    let raw = (elapsed - proc.tau_min) / (proc.tau_max - proc.tau_min);
    match mode {
        Persistence::Clamped => raw.clamp(0.0, 1.0),
        Persistence::Literal => raw,
    }
}

/// Poisson generating function `E[q^K] = exp(mu (q - 1))`.
pub fn pgf_poisson(mu: f64, q: f64) -> Result<f64> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(HbbError::domain(format!(
            "Poisson mean must be finite and >= 0, got {mu}"
        )));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(HbbError::domain(format!("q must lie in [0, 1], got {q}")));
    }
    Ok((mu * (q - 1.0)).exp())
}

fn check_rates(rates: &[f64]) -> Result<()> {
    if rates.is_empty() {
        return Err(HbbError::domain("empty arrival-rate series"));
    }
    if let Some(bad) = rates.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
        return Err(HbbError::domain(format!(
            "arrival rates must be finite and >= 0, got {bad}"
        )));
    }
    Ok(())
}

fn log_free_prob(
    i: usize,
    rates: &[f64],
    frame_len: f64,
    proc: &PedestrianProcess,
    mode: Persistence,
) -> f64 {
    let window = proc.memory_frames(frame_len);
    // Frames before the cell entrance carry no blockage history.
    let first = i.saturating_sub(window);
    let history: f64 = (first..i)
        .map(|j| {
            let q = survival_fraction((i - j) as f64 * frame_len, proc, mode);
            rates[j] * frame_len * (q - 1.0)
        })
        .sum();
    history - rates[i] * frame_len
}

/// Probability that frame `i` sees neither a new arrival nor a blockage
/// persisting from an earlier frame. `rates[j]` is the arrival rate during
/// frame `j`.
pub fn blockage_free_prob(
    i: usize,
    rates: &[f64],
    frame_len: f64,
    proc: &PedestrianProcess,
    mode: Persistence,
) -> Result<f64> {
    check_rates(rates)?;
    if i >= rates.len() {
        return Err(HbbError::domain(format!(
            "frame {i} beyond a rate series of {} frames",
            rates.len()
        )));
    }
    if !(frame_len > 0.0 && frame_len.is_finite()) {
        return Err(HbbError::domain(format!(
            "frame length must be > 0, got {frame_len}"
        )));
    }
    Ok(log_free_prob(i, rates, frame_len, proc, mode).exp())
}

/// [`blockage_free_prob`] for every frame of `rates`.
pub fn blockage_free_series(
    rates: &[f64],
    frame_len: f64,
    proc: &PedestrianProcess,
    mode: Persistence,
) -> Result<Vec<f64>> {
    check_rates(rates)?;
    if !(frame_len > 0.0 && frame_len.is_finite()) {
        return Err(HbbError::domain(format!(
            "frame length must be > 0, got {frame_len}"
        )));
    }
    Ok((0..rates.len())
        .into_par_iter()
        .map(|i| log_free_prob(i, rates, frame_len, proc, mode).exp())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const REF: BodyGeometry = BodyGeometry::REFERENCE;

    /// Independent product form of the history term: explicit truncated sums
    /// over the arrival count in every past frame.
    fn free_prob_by_sums(i: usize, rates: &[f64], t: f64, proc: &PedestrianProcess) -> f64 {
        let window = (proc.tau_max / t - 1e-9).ceil() as i64;
        let mut p = 1.0
            - (1..60)
                .map(|k| poisson_pmf(k, rates[i] * t).unwrap())
                .sum::<f64>();
        for j in (i as i64 - window)..(i as i64) {
            if j < 0 {
                continue;
            }
            let q = (((i as i64 - j) as f64 * t - proc.tau_min) / (proc.tau_max - proc.tau_min))
                .clamp(0.0, 1.0);
            let mu = rates[j as usize] * t;
            p *= (0..60)
                .map(|k| poisson_pmf(k, mu).unwrap() * q.powi(k as i32))
                .sum::<f64>();
        }
        p
    }

    #[test]
    fn pmf_examples() {
        for mu in [0.0, 0.3, 2.0, 17.5] {
            assert_abs_diff_eq!(poisson_pmf(0, mu).unwrap(), (-mu).exp(), epsilon = 1e-15);
        }
        assert_abs_diff_eq!(
            poisson_pmf(1, 0.00735).unwrap(),
            0.00735 * (-0.00735f64).exp(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(poisson_pmf(1, 0.00735).unwrap(), 0.007296, epsilon = 1e-6);
        let total: f64 = (0..=100).map(|k| poisson_pmf(k, 5.0).unwrap()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        assert!(poisson_pmf(1, -0.1).is_err());
        assert_eq!(poisson_pmf(3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn pmf_log_space_branch_matches_direct_product() {
        // k = 171 forces the log-space path; compare against the recurrence
        // carried one step further from k = 170.
        let mu = 160.0;
        let p170 = poisson_pmf(170, mu).unwrap();
        let p171 = poisson_pmf(171, mu).unwrap();
        assert_abs_diff_eq!(p171 / (p170 * mu / 171.0), 1.0, epsilon = 1e-10);
        let huge = poisson_pmf(1000, 1000.0).unwrap();
        assert!(huge > 0.0 && huge < 0.02);
    }

    #[test]
    fn arrival_rate_reference_points() {
        assert_abs_diff_eq!(
            arrival_rate(0.3, 5.0, &REF).unwrap(),
            0.3 * (0.2 / 1.5 * 5.0 + 0.15) * 0.3,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            arrival_rate(0.3, 5.0, &REF).unwrap(),
            0.0735,
            epsilon = 1e-9
        );
        assert_eq!(arrival_rate(0.0, 5.0, &REF).unwrap(), 0.0);
        assert_abs_diff_eq!(
            arrival_rate(2.0, 15.0, &REF).unwrap(),
            1.29,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            arrival_rate(0.01, 1.0, &REF).unwrap(),
            8.5e-4,
            epsilon = 1e-12
        );
        assert!(arrival_rate(-0.1, 5.0, &REF).is_err());
        assert!(arrival_rate(0.3, -5.0, &REF).is_err());
    }

    #[test]
    fn angle_and_distance_rates_coincide() {
        let phi = (5.0f64 / 1.5).atan();
        assert_abs_diff_eq!(
            frame_arrival_rate(phi, 0.3, &REF).unwrap(),
            0.0735,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            frame_arrival_rate(0.0, 0.3, &REF).unwrap(),
            0.3 * 0.15 * 0.3,
            epsilon = 1e-15
        );
        assert!(frame_arrival_rate(std::f64::consts::FRAC_PI_2, 0.3, &REF).is_err());
    }

    #[test]
    fn frame_arrival_prob_examples() {
        assert_abs_diff_eq!(
            frame_arrival_prob(0.0735, 0.1),
            0.007_323_054_806,
            epsilon = 1e-12
        );
        assert_eq!(frame_arrival_prob(0.0, 0.1), 0.0);
        assert_eq!(frame_arrival_prob(0.5, 1e6), 1.0);
    }

    #[test]
    fn persistence_examples() {
        let proc = PedestrianProcess::with_density(0.3);
        let p = |i, j, t| persistence_factor(i, j, t, &proc, Persistence::Clamped).unwrap();
        assert_eq!(p(100, 0, 0.005), 0.0);
        assert_eq!(p(400, 0, 0.005), 1.0);
        assert_eq!(p(1000, 0, 0.005), 1.0);
        assert_abs_diff_eq!(p(250, 0, 0.005), 0.5, epsilon = 1e-12);
        assert_eq!(p(1, 0, 0.005), 0.0);
        let lit = persistence_factor(1, 0, 0.005, &proc, Persistence::Literal).unwrap();
        assert!(lit < 0.0);
        assert!(persistence_factor(3, 3, 0.005, &proc, Persistence::Clamped).is_err());
    }

    #[test]
    fn pgf_examples() {
        assert_eq!(pgf_poisson(3.7, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(
            pgf_poisson(3.7, 0.0).unwrap(),
            (-3.7f64).exp(),
            epsilon = 1e-15
        );
        let brute: f64 = (0..=50)
            .map(|k| poisson_pmf(k, 0.5).unwrap() * 0.5f64.powi(k as i32))
            .sum();
        assert_abs_diff_eq!(pgf_poisson(0.5, 0.5).unwrap(), brute, epsilon = 1e-12);
        assert_abs_diff_eq!(brute, 0.778_800_783_071_404_9, epsilon = 1e-12);
        assert!(pgf_poisson(1.0, 1.5).is_err());
        assert!(pgf_poisson(1.0, -0.5).is_err());
    }

    #[test]
    fn free_prob_edge_cases() {
        let proc = PedestrianProcess::with_density(0.0);
        let rates = vec![0.0; 500];
        let series = blockage_free_series(&rates, 0.005, &proc, Persistence::Clamped).unwrap();
        assert!(series.iter().all(|p| *p == 1.0));

        let proc = PedestrianProcess::with_density(0.3);
        let rates = vec![0.07; 10];
        let p0 = blockage_free_prob(0, &rates, 0.005, &proc, Persistence::Clamped).unwrap();
        assert_abs_diff_eq!(p0, 1.0 - frame_arrival_prob(0.07, 0.005), epsilon = 1e-15);
        assert!(blockage_free_prob(0, &[], 0.005, &proc, Persistence::Clamped).is_err());
        assert!(blockage_free_series(&[], 0.005, &proc, Persistence::Clamped).is_err());
        assert!(blockage_free_prob(10, &rates, 0.005, &proc, Persistence::Clamped).is_err());
    }

    #[test]
    fn free_prob_matches_truncated_sums_with_varying_rates() {
        let proc = PedestrianProcess::with_density(2.0);
        let t = 0.02;
        let rates: Vec<f64> = (0..300)
            .map(|i| 0.2 + 0.6 * (i as f64 / 37.0).sin().abs())
            .collect();
        let series = blockage_free_series(&rates, t, &proc, Persistence::Clamped).unwrap();
        for i in [0usize, 1, 24, 25, 26, 99, 100, 101, 299] {
            let oracle = free_prob_by_sums(i, &rates, t, &proc);
            assert_abs_diff_eq!(series[i], oracle, epsilon = 1e-10);
        }
    }

    #[test]
    fn literal_mode_differs_only_by_unclamped_fraction() {
        let proc = PedestrianProcess::with_density(0.3);
        let rates = vec![0.1; 1000];
        let clamped = blockage_free_prob(900, &rates, 0.005, &proc, Persistence::Clamped).unwrap();
        let literal = blockage_free_prob(900, &rates, 0.005, &proc, Persistence::Literal).unwrap();
        // Negative fractions below tau_min make every early frame count more
        // than a certain blockage.
        assert!(literal < clamped);
    }

    #[test]
    fn stationary_free_prob_follows_mean_duration() {
        // Far from the cell entrance a constant rate gives
        // exp(-rate * (T + sum over window of T (1 - q))).
        let proc = PedestrianProcess::with_density(0.3);
        let t = 0.005;
        let rate = 0.0735;
        let rates = vec![rate; 1200];
        let p = blockage_free_prob(1100, &rates, t, &proc, Persistence::Clamped).unwrap();
        let window = 400;
        let mut exponent = rate * t;
        for m in 1..=window {
            let q = ((m as f64 * t - 0.5) / 1.5).clamp(0.0, 1.0);
            exponent += rate * t * (1.0 - q);
        }
        assert_abs_diff_eq!(p, (-exponent).exp(), epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn arrival_prob_increasing(l0 in 0.001f64..5.0, t in 1e-4f64..0.1, d in 0.0f64..20.0, f in 1.01f64..3.0) {
            let p = |l0: f64, t: f64, d: f64| frame_arrival_prob(arrival_rate(l0, d, &REF).unwrap(), t);
            let base = p(l0, t, d);
            prop_assert!(p(l0 * f, t, d) > base);
            prop_assert!(p(l0, t * f, d) > base);
            prop_assert!(p(l0, t, d + f) > base);
        }

        #[test]
        fn free_prob_bounded_and_monotone(l0 in 0.0f64..3.0, dl in 0.001f64..1.0, d in 0.0f64..10.0, dd in 0.01f64..5.0) {
            let proc = PedestrianProcess::with_density(l0);
            let t = 0.01;
            let eval = |l0: f64, d: f64| {
                let rates = vec![arrival_rate(l0, d, &REF).unwrap(); 260];
                blockage_free_prob(250, &rates, t, &proc, Persistence::Clamped).unwrap()
            };
            let base = eval(l0, d);
            let p_arr = frame_arrival_prob(arrival_rate(l0, d, &REF).unwrap(), t);
            prop_assert!(base >= 0.0 && base <= 1.0 - p_arr + 1e-15);
            prop_assert!(eval(l0 + dl, d) <= base);
            prop_assert!(eval(l0, d + dd) <= base);
        }

        #[test]
        fn rate_identity_over_angles(phi in 0.0f64..1.5, l0 in 0.0f64..3.0) {
            let d = REF.ap_drop() * phi.tan();
            let a = frame_arrival_rate(phi, l0, &REF).unwrap();
            let b = arrival_rate(l0, d, &REF).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
    }
}
