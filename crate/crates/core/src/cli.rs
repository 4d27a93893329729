//! Batch front-end: frame analysis, sweeps, Monte Carlo validation and the
//! reference loss table. All tabular output is CSV with a header row.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on invalid input.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::ScenarioConfig;
use crate::error::{HbbError, Result};
use crate::montecarlo::{estimate_probs, fraction_within, z_score, ArrivalProfile};
use crate::scenario::{sweep, DlTimeMode, SidewalkScenario, SweepCase, SweepPoint, SweepRow};
use crate::stochastics::{blockage_free_series, frame_arrival_prob, PedestrianProcess};

#[derive(Debug, Parser)]
#[command(
    name = "hbb",
    version,
    about = "Human-body blockage analysis for mmWave sidewalk links"
)]
pub struct Cli {
    /// Scenario configuration (TOML). Defaults to the reference scenario.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output file; standard output when omitted.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    /// Print the effective configuration and exit.
    #[arg(long)]
    pub dump_config: bool,

    /// Use the unclamped duration-survival fraction.
    #[arg(long, global = true)]
    pub eq8_no_clamp: bool,

    /// Form of the expected downlink-time sum.
    #[arg(long, global = true, value_enum)]
    pub eq13_mode: Option<ModeArg>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Literal,
    Sum,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-frame angles, arrival rates and probabilities along the sidewalk.
    Analyze,
    /// Re-run the scenario for a list of parameter values.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values. Scalars accept `start:step:end` ranges;
        /// body sizes are `WIDTHxHEIGHT` in meters. `T` is in milliseconds.
        #[arg(long, allow_hyphen_values = true, default_value = "")]
        values: String,
    },
    /// Compare analytic probabilities with a seeded Monte Carlo oracle.
    McValidate {
        #[arg(long, default_value_t = 100_000)]
        replications: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Hold the user still at this horizontal distance (m) from the AP.
        #[arg(long)]
        static_distance: Option<f64>,
        /// Frames simulated for a static user; defaults to the traversal length.
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Pedestrian, self and total blockage loss for the reference densities,
    /// next to the published values.
    Table2 {
        /// Densities to evaluate instead of silent, busy and crowded.
        #[arg(long, value_delimiter = ',')]
        densities: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    #[value(name = "T")]
    FrameLength,
    #[value(name = "lambda0")]
    Lambda0,
    #[value(name = "H")]
    ApHeight,
    #[value(name = "body")]
    Body,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::load(path).map_err(|e| match e {
            HbbError::Io(io) => HbbError::config(path.display().to_string(), io.to_string()),
            other => other,
        })?,
        None => ScenarioConfig::default(),
    };
    if cli.eq8_no_clamp {
        cfg.eq8_clamp = false;
    }
    if let Some(mode) = cli.eq13_mode {
        cfg.eq13_mode = match mode {
            ModeArg::Literal => DlTimeMode::Literal,
            ModeArg::Sum => DlTimeMode::Sum,
        };
    }
    Ok(cfg)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    if cli.dump_config {
        let mut out = open_output(cli.output.as_deref())?;
        out.write_all(cfg.to_toml().as_bytes())?;
        out.flush()?;
        return Ok(());
    }
    let Some(command) = &cli.command else {
        return Err(HbbError::config(
            "<command>",
            "no subcommand given (see --help)",
        ));
    };
    let scenario = cfg.scenario()?;
    let mut out = open_output(cli.output.as_deref())?;
    match command {
        Command::Analyze => cmd_analyze(&scenario, &mut out)?,
        Command::Sweep { param, values } => {
            let points = parse_sweep_values(*param, values)?;
            cmd_sweep(&scenario, *param, &points, &mut out)?;
        }
        Command::McValidate {
            replications,
            seed,
            static_distance,
            frames,
        } => {
            let profile = match static_distance {
                Some(d) => ArrivalProfile::static_user(
                    &scenario,
                    *d,
                    frames.unwrap_or_else(|| scenario.frame_count()),
                )?,
                None => ArrivalProfile::from_scenario(&scenario)?,
            };
            let summary = cmd_mc_validate(&profile, *replications, *seed, &mut out)?;
            let line = summary.to_string();
            if cli.output.is_some() {
                println!("{line}");
            } else {
                eprintln!("{line}");
            }
        }
        Command::Table2 { densities } => {
            let densities = densities
                .clone()
                .unwrap_or_else(|| REFERENCE_LOSSES.iter().map(|r| r.lambda0).collect());
            let rows = table2_rows(&scenario, &densities)?;
            out.write_all(format_table2(&rows).as_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Rounds to nine significant digits and prints the shortest representation
/// of the rounded value.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let rounded: f64 = format!("{x:.8e}").parse().unwrap_or(x);
    format!("{rounded:?}")
}

pub fn cmd_analyze(scenario: &SidewalkScenario, out: &mut dyn Write) -> Result<()> {
    let series = scenario.frame_series()?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "frame_index",
        "time_s",
        "theta_deg",
        "phi_deg",
        "d2d_m",
        "lambda_per_s",
        "p_arrival",
        "p_free",
        "self_blocked",
    ])?;
    for r in &series {
        w.write_record([
            r.index.to_string(),
            sig9(r.time),
            sig9(r.theta.to_degrees()),
            sig9(r.phi.to_degrees()),
            sig9(r.d_2d),
            sig9(r.rate),
            sig9(r.p_arrival),
            sig9(r.p_free),
            u8::from(r.self_blocked).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_number(token: &str) -> Result<f64> {
    token
        .trim()
        .parse::<f64>()
        .map_err(|_| HbbError::config("--values", format!("`{token}` is not a number")))
}

fn expand_scalars(values: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for token in values.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let parts: Vec<&str> = token.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(parse_number(v)?),
            [start, step, end] => {
                let (start, step, end) = (
                    parse_number(start)?,
                    parse_number(step)?,
                    parse_number(end)?,
                );
                if !(step > 0.0 && step.is_finite()) || end < start {
                    return Err(HbbError::config(
                        "--values",
                        format!("range `{token}` needs step > 0 and end >= start"),
                    ));
                }
                let n = ((end - start) / step + 1e-9).floor() as usize;
                out.extend((0..=n).map(|k| start + k as f64 * step));
            }
            _ => {
                return Err(HbbError::config(
                    "--values",
                    format!("`{token}` is neither a number nor start:step:end"),
                ))
            }
        }
    }
    Ok(out)
}

pub fn parse_sweep_values(param: SweepParam, values: &str) -> Result<Vec<SweepPoint>> {
    if param == SweepParam::Body {
        return values
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|token| {
                let (w, h) = token.split_once(['x', 'X']).ok_or_else(|| {
                    HbbError::config(
                        "--values",
                        format!("body size `{token}` is not WIDTHxHEIGHT"),
                    )
                })?;
                Ok(SweepPoint::BodySize {
                    width: parse_number(w)?,
                    height: parse_number(h)?,
                })
            })
            .collect();
    }
    Ok(expand_scalars(values)?
        .into_iter()
        .map(|v| match param {
            SweepParam::FrameLength => SweepPoint::FrameLength(v * 1e-3),
            SweepParam::Lambda0 => SweepPoint::Lambda0(v),
            SweepParam::ApHeight => SweepPoint::ApHeight(v),
            SweepParam::Body => unreachable!(),
        })
        .collect())
}

fn point_label(point: &SweepPoint) -> String {
    match *point {
        SweepPoint::FrameLength(t) => sig9(t * 1e3),
        SweepPoint::Lambda0(v) | SweepPoint::ApHeight(v) => sig9(v),
        SweepPoint::BodySize { width, height } => format!("{}x{}", sig9(width), sig9(height)),
    }
}

pub fn cmd_sweep(
    scenario: &SidewalkScenario,
    param: SweepParam,
    points: &[SweepPoint],
    out: &mut dyn Write,
) -> Result<Vec<SweepRow>> {
    let rows = sweep(scenario, points, param == SweepParam::FrameLength);
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "case",
        "param_value",
        "t_data_s",
        "eq13_mode",
        "frames_before_self_block",
        "pedestrian_loss_db",
        "self_loss_db",
        "total_loss_db",
        "mean_p_free",
        "status",
    ])?;
    for row in &rows {
        let label = point_label(&row.point);
        let record = match &row.outcome {
            Ok(m) => vec![
                row.case.as_str().to_string(),
                label,
                sig9(m.dl_time.seconds),
                m.dl_time.mode.as_str().to_string(),
                m.frames_before_self_block.to_string(),
                sig9(m.loss.pedestrian_db),
                sig9(m.loss.self_db),
                sig9(m.loss.total_db),
                sig9(m.mean_p_free),
                if m.loss.is_total_outage() {
                    "total_outage"
                } else {
                    "ok"
                }
                .to_string(),
            ],
            Err(msg) => {
                let mut r = vec![row.case.as_str().to_string(), label];
                r.extend(std::iter::repeat_n(String::new(), 7));
                r.push(format!("invalid: {msg}"));
                r
            }
        };
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(rows)
}

/// Agreement between the analytic model and the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSummary {
    pub frames: usize,
    pub replications: usize,
    pub arrival_within_3se: f64,
    pub free_within_3se: f64,
    /// Mean of `p_free_mc - p_free_analytic` over all frames.
    pub mean_free_gap: f64,
}

impl std::fmt::Display for McSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "frames={} replications={} arrival_within_3se={:.4} free_within_3se={:.4} mean_free_gap={:+.3e}",
            self.frames,
            self.replications,
            self.arrival_within_3se,
            self.free_within_3se,
            self.mean_free_gap
        )
    }
}

pub fn cmd_mc_validate(
    profile: &ArrivalProfile,
    replications: usize,
    seed: u64,
    out: &mut dyn Write,
) -> Result<McSummary> {
    let est = estimate_probs(profile, replications, seed)?;
    let t = profile.frame_len();
    let p_arr: Vec<f64> = profile
        .rates()
        .iter()
        .map(|&r| frame_arrival_prob(r, t))
        .collect();
    let p_free = if profile.frames() == 0 {
        Vec::new()
    } else {
        blockage_free_series(profile.rates(), t, profile.process(), Default::default())?
    };

    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "frame_index",
        "p_arrival_analytic",
        "p_arrival_mc",
        "se_arrival_mc",
        "p_free_analytic",
        "p_free_mc",
        "se_free_mc",
        "z_arrival",
        "z_free",
    ])?;
    let mut z_arr = Vec::with_capacity(p_arr.len());
    let mut z_free = Vec::with_capacity(p_arr.len());
    for i in 0..profile.frames() {
        let za = z_score(est.p_arrival[i], est.se_arrival[i], p_arr[i]);
        let zf = z_score(est.p_free[i], est.se_free[i], p_free[i]);
        z_arr.push(za);
        z_free.push(zf);
        w.write_record([
            i.to_string(),
            sig9(p_arr[i]),
            sig9(est.p_arrival[i]),
            sig9(est.se_arrival[i]),
            sig9(p_free[i]),
            sig9(est.p_free[i]),
            sig9(est.se_free[i]),
            sig9(za),
            sig9(zf),
        ])?;
    }
    w.flush()?;
    let gap = if p_free.is_empty() {
        0.0
    } else {
        est.p_free
            .iter()
            .zip(&p_free)
            .map(|(m, a)| m - a)
            .sum::<f64>()
            / p_free.len() as f64
    };
    Ok(McSummary {
        frames: profile.frames(),
        replications,
        arrival_within_3se: fraction_within(&z_arr, 3.0),
        free_within_3se: fraction_within(&z_free, 3.0),
        mean_free_gap: gap,
    })
}

/// Published losses (dB) for one reference density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceLoss {
    pub name: &'static str,
    pub lambda0: f64,
    pub pedestrian_db: f64,
    pub self_db: f64,
    pub total_db: f64,
}

pub const REFERENCE_LOSSES: [ReferenceLoss; 3] = [
    ReferenceLoss {
        name: "silent",
        lambda0: PedestrianProcess::SILENT,
        pedestrian_db: 0.021,
        self_db: 3.953,
        total_db: 3.974,
    },
    ReferenceLoss {
        name: "busy",
        lambda0: PedestrianProcess::BUSY,
        pedestrian_db: 0.630,
        self_db: 3.953,
        total_db: 4.583,
    },
    ReferenceLoss {
        name: "crowded",
        lambda0: PedestrianProcess::CROWDED,
        pedestrian_db: 9.304,
        self_db: 3.953,
        total_db: 13.257,
    },
];

#[derive(Debug, Clone, PartialEq)]
pub struct Table2Row {
    pub lambda0: f64,
    pub computed: crate::scenario::HbbLoss,
    pub reference: Option<ReferenceLoss>,
}

pub fn table2_rows(base: &SidewalkScenario, densities: &[f64]) -> Result<Vec<Table2Row>> {
    let points: Vec<SweepPoint> = densities.iter().map(|&l| SweepPoint::Lambda0(l)).collect();
    sweep(base, &points, false)
        .into_iter()
        .zip(densities)
        .map(|(row, &lambda0)| {
            debug_assert_eq!(row.case, SweepCase::Scenario);
            let metrics = row
                .outcome
                .map_err(|msg| HbbError::config("process.lambda0", msg))?;
            Ok(Table2Row {
                lambda0,
                computed: metrics.loss,
                reference: REFERENCE_LOSSES
                    .iter()
                    .find(|r| r.lambda0 == lambda0)
                    .copied(),
            })
        })
        .collect()
}

pub fn format_table2(rows: &[Table2Row]) -> String {
    let mut s = format!(
        "{:<9} {:>8} | {:>10} {:>10} {:>10} | {:>10} {:>10} {:>10} | {:>10} {:>10} {:>10}\n",
        "scenario",
        "lambda0",
        "ped_db",
        "ped_ref",
        "ped_delta",
        "self_db",
        "self_ref",
        "self_delta",
        "total_db",
        "total_ref",
        "total_delta"
    );
    let cell = |v: f64| format!("{v:>10.3}");
    for row in rows {
        let c = &row.computed;
        let (name, refs) = match &row.reference {
            Some(r) => (r.name, Some((r.pedestrian_db, r.self_db, r.total_db))),
            None => ("custom", None),
        };
        let triple = |computed: f64, reference: Option<f64>| match reference {
            Some(r) => format!("{} {} {}", cell(computed), cell(r), cell(computed - r)),
            None => format!("{} {:>10} {:>10}", cell(computed), "-", "-"),
        };
        s.push_str(&format!(
            "{:<9} {:>8} | {} | {} | {}\n",
            name,
            sig9(row.lambda0),
            triple(c.pedestrian_db, refs.map(|r| r.0)),
            triple(c.self_db, refs.map(|r| r.1)),
            triple(c.total_db, refs.map(|r| r.2)),
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(0.0), "0.0");
        assert_eq!(sig9(1.0), "1.0");
        assert_eq!(sig9(0.007_323_052_123_4), "0.00732305212");
        assert_eq!(sig9(123_456_789_012.0), "123456789000.0");
        assert_eq!(sig9(f64::INFINITY), "inf");
    }

    #[test]
    fn sweep_value_parsing() {
        let pts = parse_sweep_values(SweepParam::FrameLength, "0.5:0.5:2").unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[3], SweepPoint::FrameLength(2.0e-3));
        let pts = parse_sweep_values(SweepParam::ApHeight, "2, 2.5,5").unwrap();
        assert_eq!(
            pts,
            [
                SweepPoint::ApHeight(2.0),
                SweepPoint::ApHeight(2.5),
                SweepPoint::ApHeight(5.0)
            ]
        );
        let pts = parse_sweep_values(SweepParam::Body, "0.3x1.5,0.5x1.9").unwrap();
        assert_eq!(
            pts[1],
            SweepPoint::BodySize {
                width: 0.5,
                height: 1.9
            }
        );
        assert!(parse_sweep_values(SweepParam::Lambda0, "")
            .unwrap()
            .is_empty());
        assert!(parse_sweep_values(SweepParam::Lambda0, "abc").is_err());
        assert!(parse_sweep_values(SweepParam::Body, "0.3").is_err());
        assert!(parse_sweep_values(SweepParam::Lambda0, "1:0:2").is_err());
    }

    #[test]
    fn table2_lists_reference_values_and_deltas() {
        let base = SidewalkScenario::reference(0.3);
        let rows = table2_rows(&base, &[0.01, 0.3, 2.0, 0.0]).unwrap();
        let text = format_table2(&rows);
        for v in ["0.021", "0.630", "9.304", "3.953"] {
            assert!(text.contains(v), "missing {v} in\n{text}");
        }
        assert_eq!(rows[3].computed.pedestrian_db, 0.0);
        assert!(rows[3].reference.is_none());
        let busy = &rows[1];
        let delta = busy.computed.pedestrian_db - 0.630;
        assert!(text.contains(&format!("{delta:>10.3}")));
    }
}
