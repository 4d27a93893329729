//! Seeded discrete-event oracle for pedestrian blockage.
//!
//! Every replication draws a Poisson number of arrivals per frame, places each
//! arrival uniformly inside its frame and gives it a uniform duration. A frame
//! is lost when any blockage interval overlaps it. The oracle shares no code
//! with the closed forms in [`crate::stochastics`]; it only consumes the same
//! per-frame arrival rates.
//!
//! Replication `r` of a run with base seed `s` is seeded with
//! `splitmix64(s + r)` and driven by ChaCha8, so results are reproducible and
//! independent of thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{HbbError, Result};
use crate::scenario::SidewalkScenario;
use crate::stochastics::{arrival_rate, PedestrianProcess};

pub const MIN_REPLICATIONS: usize = 100;

/// Per-frame arrival rates plus the duration law, i.e. everything the oracle
/// needs to know about a scenario.
#[derive(Debug, Clone)]
pub struct ArrivalProfile {
    rates: Vec<f64>,
    frame_len: f64,
    process: PedestrianProcess,
    samplers: Vec<Option<Poisson<f64>>>,
}

impl ArrivalProfile {
    pub fn new(rates: Vec<f64>, frame_len: f64, process: PedestrianProcess) -> Result<Self> {
        process.validate()?;
        if !(frame_len > 0.0 && frame_len.is_finite()) {
            return Err(HbbError::domain(format!(
                "frame length must be finite and > 0, got {frame_len}"
            )));
        }
        let samplers = rates
            .iter()
            .map(|&rate| {
                let mean = rate * frame_len;
                if !(mean >= 0.0 && mean.is_finite()) {
                    Err(HbbError::domain(format!("invalid arrival rate {rate}")))
                } else if mean == 0.0 {
                    Ok(None)
                } else {
                    Poisson::new(mean)
                        .map(Some)
                        .map_err(|e| HbbError::domain(format!("Poisson mean {mean}: {e}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ArrivalProfile {
            rates,
            frame_len,
            process,
            samplers,
        })
    }

    /// Arrival rates along the scenario's trajectory.
    pub fn from_scenario(scenario: &SidewalkScenario) -> Result<Self> {
        scenario.validate()?;
        Self::new(
            scenario.rate_profile()?,
            scenario.frame_len(),
            scenario.process,
        )
    }

    /// A user standing still `d_2d` meters from the AP for `frames` frames.
    pub fn static_user(scenario: &SidewalkScenario, d_2d: f64, frames: usize) -> Result<Self> {
        let rate = arrival_rate(scenario.process.lambda0, d_2d, &scenario.geom)?;
        Self::new(vec![rate; frames], scenario.frame_len(), scenario.process)
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn frame_len(&self) -> f64 {
        self.frame_len
    }

    pub fn process(&self) -> &PedestrianProcess {
        &self.process
    }

    pub fn frames(&self) -> usize {
        self.rates.len()
    }
}

/// One simulated traversal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicationResult {
    pub seed: u64,
    /// At least one blockage started in the frame.
    pub arrival: Vec<bool>,
    /// Some blockage interval overlaps the frame.
    pub present: Vec<bool>,
}

/// A blockage interval in seconds since cell entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blockage {
    pub start: f64,
    pub end: f64,
}

/// Marks every frame `[iT, (i+1)T)` overlapped by at least one interval.
pub fn presence_from_intervals(blockages: &[Blockage], frames: usize, frame_len: f64) -> Vec<bool> {
    let mut present = vec![false; frames];
    for b in blockages {
        if b.end <= b.start {
            continue;
        }
        let first = (b.start / frame_len).floor().max(0.0) as usize;
        // Last frame whose start lies strictly before the interval end.
        let last = ((b.end / frame_len).ceil() as usize).min(frames);
        for flag in present.iter_mut().take(last).skip(first) {
            *flag = true;
        }
    }
    present
}

/// Stream seed for replication `index` of a run started from `base`.
pub fn replication_seed(base: u64, index: u64) -> u64 {
    // SplitMix64 finalizer
    let mut z = base.wrapping_add(index).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn simulate_replication(profile: &ArrivalProfile, seed: u64) -> ReplicationResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = profile.frame_len;
    let (tau_min, tau_max) = (profile.process.tau_min, profile.process.tau_max);
    let mut arrival = vec![false; profile.frames()];
    let mut blockages = Vec::new();
    for (i, sampler) in profile.samplers.iter().enumerate() {
        let Some(sampler) = sampler else { continue };
        let count = sampler.sample(&mut rng) as u64;
        arrival[i] = count > 0;
        for _ in 0..count {
            let start = (i as f64 + rng.random::<f64>()) * t;
            let duration = rng.random_range(tau_min..=tau_max);
            blockages.push(Blockage {
                start,
                end: start + duration,
            });
        }
    }
    ReplicationResult {
        seed,
        present: presence_from_intervals(&blockages, profile.frames(), t),
        arrival,
    }
}

/// Empirical per-frame probabilities with binomial standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSeries {
    pub replications: usize,
    pub p_arrival: Vec<f64>,
    pub se_arrival: Vec<f64>,
    pub p_free: Vec<f64>,
    pub se_free: Vec<f64>,
}

fn binomial(count: u64, n: usize) -> (f64, f64) {
    let p = count as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

#[derive(Clone)]
struct Counts {
    arrival: Vec<u64>,
    present: Vec<u64>,
}

impl Counts {
    fn zero(frames: usize) -> Self {
        Counts {
            arrival: vec![0; frames],
            present: vec![0; frames],
        }
    }

    fn add(mut self, rep: &ReplicationResult) -> Self {
        for (c, a) in self.arrival.iter_mut().zip(&rep.arrival) {
            *c += u64::from(*a);
        }
        for (c, p) in self.present.iter_mut().zip(&rep.present) {
            *c += u64::from(*p);
        }
        self
    }

    fn merge(mut self, other: Counts) -> Self {
        for (a, b) in self.arrival.iter_mut().zip(other.arrival) {
            *a += b;
        }
        for (a, b) in self.present.iter_mut().zip(other.present) {
            *a += b;
        }
        self
    }
}

/// Runs `replications` independent traversals and tallies per-frame
/// frequencies of arrival and of blockage absence.
pub fn estimate_probs(
    profile: &ArrivalProfile,
    replications: usize,
    base_seed: u64,
) -> Result<EstimateSeries> {
    if replications < MIN_REPLICATIONS {
        return Err(HbbError::domain(format!(
            "need at least {MIN_REPLICATIONS} replications, got {replications}"
        )));
    }
    let frames = profile.frames();
    let counts = (0..replications as u64)
        .into_par_iter()
        .fold(
            || Counts::zero(frames),
            |acc, r| {
                acc.add(&simulate_replication(
                    profile,
                    replication_seed(base_seed, r),
                ))
            },
        )
        .reduce(|| Counts::zero(frames), Counts::merge);

    let (p_arrival, se_arrival) = counts
        .arrival
        .iter()
        .map(|&c| binomial(c, replications))
        .unzip();
    let (p_free, se_free) = counts
        .present
        .iter()
        .map(|&c| binomial(replications as u64 - c, replications))
        .unzip();
    Ok(EstimateSeries {
        replications,
        p_arrival,
        se_arrival,
        p_free,
        se_free,
    })
}

/// Standardized deviation of an estimate from its analytic value. A zero
/// standard error gives zero on exact agreement and infinity otherwise.
pub fn z_score(estimate: f64, se: f64, analytic: f64) -> f64 {
    let diff = estimate - analytic;
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

/// Share of `z` values with magnitude below `bound`.
pub fn fraction_within(z: &[f64], bound: f64) -> f64 {
    if z.is_empty() {
        return 1.0;
    }
    z.iter().filter(|v| v.abs() < bound).count() as f64 / z.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::SidewalkScenario;

    #[test]
    fn empty_cell_never_blocks() {
        let s = SidewalkScenario::reference(0.0);
        let profile = ArrivalProfile::from_scenario(&s).unwrap();
        let rep = simulate_replication(&profile, 7);
        assert!(rep.arrival.iter().all(|a| !a));
        assert!(rep.present.iter().all(|p| !p));
        let est = estimate_probs(&profile, 100, 1).unwrap();
        assert!(est.p_free.iter().all(|p| *p == 1.0));
        assert!(est.p_arrival.iter().all(|p| *p == 0.0));
    }

    #[test]
    fn same_seed_same_result() {
        let s = SidewalkScenario::reference(2.0);
        let profile = ArrivalProfile::from_scenario(&s).unwrap();
        let a = simulate_replication(&profile, 42);
        let b = simulate_replication(&profile, 42);
        assert_eq!(a, b);
        assert!(a.arrival.iter().any(|x| *x));
        assert_ne!(a, simulate_replication(&profile, 43));
        assert_eq!(a.arrival.len(), s.frame_count());
    }

    #[test]
    fn presence_covers_interval_overlap() {
        // Binary-exact frame length keeps the boundary arithmetic exact.
        let t = 0.125;
        let aligned = presence_from_intervals(
            &[Blockage {
                start: 1.0,
                end: 2.0,
            }],
            40,
            t,
        );
        assert_eq!(aligned.iter().filter(|p| **p).count(), 8);
        assert!(aligned[8] && aligned[15] && !aligned[7] && !aligned[16]);
        // Same duration from inside a frame spills into one more.
        let offset = presence_from_intervals(
            &[Blockage {
                start: 1.0625,
                end: 2.0625,
            }],
            40,
            t,
        );
        assert_eq!(offset.iter().filter(|p| **p).count(), 9);
        let union = presence_from_intervals(
            &[
                Blockage {
                    start: 0.25,
                    end: 0.5,
                },
                Blockage {
                    start: 0.375,
                    end: 0.625,
                },
            ],
            8,
            t,
        );
        assert_eq!(union, [false, false, true, true, true, false, false, false]);
        let tail = presence_from_intervals(
            &[Blockage {
                start: 1.0,
                end: 100.0,
            }],
            10,
            t,
        );
        assert_eq!(tail.iter().filter(|p| **p).count(), 2);
    }

    #[test]
    fn forced_single_arrival_span() {
        // Near-deterministic 1 s duration and a practically certain arrival
        // in frame 0 (mean 40 arrivals).
        let t = 0.125;
        let process = PedestrianProcess::new(1.0, 0.999_999, 1.0).unwrap();
        let mut rates = vec![0.0; 40];
        rates[0] = 320.0;
        let profile = ArrivalProfile::new(rates, t, process).unwrap();
        let expect = (1.0f64 / t).ceil() as usize;
        for seed in 0..20 {
            let rep = simulate_replication(&profile, seed);
            let span = rep.present.iter().filter(|p| **p).count();
            assert!(span == expect || span == expect + 1, "span {span}");
            assert!(rep.present[0]);
        }
    }

    #[test]
    fn too_few_replications() {
        let s = SidewalkScenario::reference(0.3);
        let profile = ArrivalProfile::from_scenario(&s).unwrap();
        assert!(estimate_probs(&profile, 10, 0).is_err());
    }

    #[test]
    fn estimate_is_deterministic() {
        let s = SidewalkScenario::reference(0.3);
        let profile = ArrivalProfile::static_user(&s, 5.0, 200).unwrap();
        let a = estimate_probs(&profile, 300, 9).unwrap();
        let b = estimate_probs(&profile, 300, 9).unwrap();
        assert_eq!(a, b);
        for (p, se) in a.p_free.iter().zip(&a.se_free) {
            assert!((0.0..=1.0).contains(p));
            assert!((se - (p * (1.0 - p) / 300.0).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> =
            (0..10_000).map(|r| replication_seed(12345, r)).collect();
        assert_eq!(seeds.len(), 10_000);
    }

    #[test]
    fn z_scores() {
        assert!((z_score(0.5, 0.1, 0.3) - 2.0).abs() < 1e-12);
        assert_eq!(z_score(0.0, 0.0, 0.0), 0.0);
        assert!(z_score(0.0, 0.0, 0.1).is_infinite());
        assert_eq!(fraction_within(&[0.0, 1.0, 5.0, -4.0], 3.0), 0.5);
    }
}
