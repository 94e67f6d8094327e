//! Subcommand options with their resolved parameter sets, and the
//! pipelines that run them.
//!
//! Every subcommand has an options struct (all fields optional, filled from
//! flags and the config file) and a parameter struct with the same keys and
//! defaults applied. The parameter struct is what the manifest records, so
//! a manifest fed back through `--config` resolves to the same run.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use eqw_core::analysis::{
    fit_power_law, fit_power_law_weighted, trace_distance_channel, trace_distance_experiment,
    PowerLawFit, TraceExperiment,
};
use eqw_core::classical::{erw_ensemble_moments, ErwParams};
use eqw_core::spectral::{
    eigen_grid, evolve_two_point_channel, small_k_expansion, write_eigen_csv, Kernel,
};
use eqw_core::walk::run_ensemble;
use eqw_core::{
    make_gaussian_packet, make_localized, CoinBlochState, CoinParams, GaussianPacketSpec,
    PositionDistribution, StepSizeRule, WalkState,
};

use crate::config::{Angle, CliError};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleArg {
    Unit,
    Interval,
}

impl From<RuleArg> for StepSizeRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Unit => StepSizeRule::Unit,
            RuleArg::Interval => StepSizeRule::Interval,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelArg {
    Discrete,
    Continuous,
}

impl From<KernelArg> for Kernel {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Discrete => Kernel::Discrete,
            KernelArg::Continuous => Kernel::Continuous,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceMethod {
    /// Exact averaged channel on a periodic lattice.
    Channel,
    /// Monte Carlo over paired trajectories.
    Ensemble,
}

/// What a finished command hands back for the manifest.
pub struct Completed {
    pub params: Value,
    pub seed: u64,
}

/// Destination directory plus the chosen data format.
pub struct Output {
    dir: PathBuf,
    format: Format,
}

impl Output {
    pub fn create(dir: &Path, format: Format) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::field("out", format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
        })
    }

    fn file(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    pub fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut f = self.file(name)?;
        serde_json::to_writer_pretty(&mut f, value)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }

    /// Writes `stem.csv` with `csv`, or `stem.json` with the rows in `json`.
    fn table<T: Serialize>(
        &self,
        stem: &str,
        csv: impl FnOnce(BufWriter<File>) -> eqw_core::Result<()>,
        json: impl FnOnce() -> T,
    ) -> Result<(), CliError> {
        match self.format {
            Format::Csv => Ok(csv(self.file(&format!("{stem}.csv"))?)?),
            Format::Json => self.json(&format!("{stem}.json"), &json()),
        }
    }

    fn distribution(&self, t: usize, dist: &PositionDistribution) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Site {
            l: i64,
            p: f64,
        }
        self.table(
            &format!("dist_t{t}"),
            |w| dist.write_csv(w),
            || dist.sites().map(|(l, p)| Site { l, p }).collect::<Vec<_>>(),
        )
    }
}

fn to_value<T: Serialize>(p: &T) -> Result<Value, CliError> {
    Ok(serde_json::to_value(p)?)
}

fn positive(field: &str, v: usize) -> Result<usize, CliError> {
    if v == 0 {
        Err(CliError::field(field, "must be at least 1"))
    } else {
        Ok(v)
    }
}

/// Powers of two up to `steps`, plus `steps` itself.
fn default_snapshots(steps: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..usize::BITS)
        .map(|i| 1usize << i)
        .take_while(|&t| t <= steps)
        .collect();
    if out.last() != Some(&steps) {
        out.push(steps);
    }
    out
}

fn check_snapshots(snaps: &[usize], steps: usize) -> Result<(), CliError> {
    if let Some(&t) = snaps.iter().find(|&&t| t > steps) {
        return Err(CliError::field(
            "snapshots",
            format!("{t} exceeds steps = {steps}"),
        ));
    }
    Ok(())
}

fn window_pair(field: &str, w: &[f64]) -> Result<(f64, f64), CliError> {
    match w {
        [a, b] if a.is_finite() && b.is_finite() && a < b => Ok((*a, *b)),
        _ => Err(CliError::field(
            field,
            "expects two increasing numbers, e.g. 64,512",
        )),
    }
}

fn bloch(gamma_field: &str, gamma: f64, phi: f64) -> Result<CoinBlochState, CliError> {
    CoinBlochState::new(gamma, phi).map_err(|e| CliError::field(gamma_field, e))
}

fn initial_state(
    coin: CoinBlochState,
    delta: Option<f64>,
    truncation: f64,
) -> Result<WalkState, CliError> {
    Ok(match delta {
        None => make_localized(0, coin),
        Some(delta) => {
            make_gaussian_packet(GaussianPacketSpec { center: 0, delta }, coin, truncation)?
        }
    })
}

// ----------------------------------------------------------------------------
// standard / elephant

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct WalkOpts {
    /// Coin angle in radians, e.g. 0.785 or pi/4.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<Angle>,
    /// Polar angle of the initial coin state on the Bloch sphere.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<Angle>,
    /// Azimuthal angle of the initial coin state.
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<Angle>,
    /// Start from a Gaussian packet exp(-delta x^2 / 2) instead of a single site.
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    /// Packet truncation in standard deviations.
    #[arg(long, allow_hyphen_values = true)]
    pub truncation: Option<f64>,
    /// Amplitude of the uniform per-step coin-angle jitter.
    #[arg(long, allow_hyphen_values = true)]
    pub noise_epsilon: Option<f64>,
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub trajectories: Option<usize>,
    /// Comma-separated snapshot times; defaults to powers of two and the final step.
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct WalkParams {
    pub theta: f64,
    pub gamma: f64,
    pub phi: f64,
    pub delta: Option<f64>,
    pub truncation: f64,
    pub noise_epsilon: f64,
    pub rule: RuleArg,
    pub steps: usize,
    pub trajectories: usize,
    pub snapshots: Vec<usize>,
    pub seed: u64,
    pub format: Format,
}

impl WalkOpts {
    /// `standard` runs the unit rule and is exact with one trajectory when
    /// noiseless; `elephant` defaults to the interval rule.
    pub fn resolve(self, elephant: bool) -> Result<WalkParams, CliError> {
        let rule = self.rule.unwrap_or(if elephant {
            RuleArg::Interval
        } else {
            RuleArg::Unit
        });
        if !elephant && rule != RuleArg::Unit {
            return Err(CliError::field(
                "rule",
                "the standard walk takes unit steps",
            ));
        }
        let steps = positive(
            "steps",
            self.steps.unwrap_or(if elephant { 512 } else { 256 }),
        )?;
        let snapshots = self.snapshots.unwrap_or_else(|| default_snapshots(steps));
        check_snapshots(&snapshots, steps)?;
        Ok(WalkParams {
            theta: self.theta.map_or(FRAC_PI_4, |a| a.0),
            gamma: self.gamma.map_or(FRAC_PI_2, |a| a.0),
            phi: self.phi.map_or(0.0, |a| a.0),
            delta: self.delta,
            truncation: self.truncation.unwrap_or(6.0),
            noise_epsilon: self.noise_epsilon.unwrap_or(0.0),
            rule,
            steps,
            trajectories: positive(
                "trajectories",
                self.trajectories
                    .unwrap_or(if elephant { 20_000 } else { 1 }),
            )?,
            snapshots,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            format: self.format.unwrap_or_default(),
        })
    }
}

pub fn run_walk(p: &WalkParams, out: &Path) -> Result<Completed, CliError> {
    let coin = CoinParams::new(p.theta, p.noise_epsilon)?;
    let init = initial_state(bloch("gamma", p.gamma, p.phi)?, p.delta, p.truncation)?;
    let output = Output::create(out, p.format)?;
    let result = run_ensemble(
        &init,
        coin,
        p.rule.into(),
        p.steps,
        &p.snapshots,
        p.trajectories,
        p.seed,
    )?;
    output.table(
        "moments",
        |w| result.write_moments_csv(w),
        || result.moments.clone(),
    )?;
    for (t, dist) in result.snapshot_times.iter().zip(&result.distributions) {
        output.distribution(*t, dist)?;
    }
    Ok(Completed {
        params: to_value(p)?,
        seed: p.seed,
    })
}

// ----------------------------------------------------------------------------
// classical

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ClassicalOpts {
    /// Probability of repeating a remembered step.
    #[arg(long)]
    pub p: Option<f64>,
    /// Probability that the first step goes right.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub trajectories: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ClassicalParams {
    pub p: f64,
    pub q: f64,
    pub steps: usize,
    pub trajectories: usize,
    pub seed: u64,
    pub format: Format,
}

impl ClassicalOpts {
    pub fn resolve(self) -> Result<ClassicalParams, CliError> {
        Ok(ClassicalParams {
            p: self.p.unwrap_or(0.5),
            q: self.q.unwrap_or(0.5),
            steps: positive("steps", self.steps.unwrap_or(4096))?,
            trajectories: positive("trajectories", self.trajectories.unwrap_or(100_000))?,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            format: self.format.unwrap_or_default(),
        })
    }
}

pub fn run_classical(p: &ClassicalParams, out: &Path) -> Result<Completed, CliError> {
    let params = ErwParams::new(p.p, p.q, p.steps, p.trajectories)?;
    let output = Output::create(out, p.format)?;
    let moments = erw_ensemble_moments(&params, p.seed)?;
    output.table(
        "erw_moments",
        |w| moments.write_csv(w),
        || moments.rows.clone(),
    )?;
    Ok(Completed {
        params: to_value(p)?,
        seed: p.seed,
    })
}

// ----------------------------------------------------------------------------
// trace-distance

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TraceOpts {
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<Angle>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_a: Option<Angle>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi_a: Option<Angle>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_b: Option<Angle>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi_b: Option<Angle>,
    /// Width parameter of the initial Gaussian packet.
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub truncation: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub noise_epsilon: Option<f64>,
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Trajectories per ensemble (ensemble method only).
    #[arg(long)]
    pub trajectories: Option<usize>,
    #[arg(long, value_enum)]
    pub method: Option<TraceMethod>,
    /// Periodic lattice size M (channel method only).
    #[arg(long)]
    pub lattice: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TraceParams {
    pub theta: f64,
    pub gamma_a: f64,
    pub phi_a: f64,
    pub gamma_b: f64,
    pub phi_b: f64,
    pub delta: f64,
    pub truncation: f64,
    pub noise_epsilon: f64,
    pub rule: RuleArg,
    pub steps: usize,
    pub trajectories: usize,
    pub method: TraceMethod,
    pub lattice: usize,
    pub seed: u64,
    pub format: Format,
}

impl TraceOpts {
    pub fn resolve(self) -> Result<TraceParams, CliError> {
        Ok(TraceParams {
            theta: self.theta.map_or(FRAC_PI_4, |a| a.0),
            gamma_a: self.gamma_a.map_or(0.0, |a| a.0),
            phi_a: self.phi_a.map_or(0.0, |a| a.0),
            gamma_b: self.gamma_b.map_or(PI, |a| a.0),
            phi_b: self.phi_b.map_or(0.0, |a| a.0),
            delta: self.delta.unwrap_or(0.001),
            truncation: self.truncation.unwrap_or(6.0),
            noise_epsilon: self.noise_epsilon.unwrap_or(0.0),
            rule: self.rule.unwrap_or(RuleArg::Interval),
            steps: positive("steps", self.steps.unwrap_or(100))?,
            trajectories: positive("trajectories", self.trajectories.unwrap_or(2000))?,
            method: self.method.unwrap_or(TraceMethod::Channel),
            lattice: self.lattice.unwrap_or(4096),
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            format: self.format.unwrap_or_default(),
        })
    }
}

pub fn run_trace(p: &TraceParams, out: &Path) -> Result<Completed, CliError> {
    let cfg = TraceExperiment {
        coin_a: bloch("gamma-a", p.gamma_a, p.phi_a)?,
        coin_b: bloch("gamma-b", p.gamma_b, p.phi_b)?,
        packet: GaussianPacketSpec {
            center: 0,
            delta: p.delta,
        },
        truncation: p.truncation,
        coin: CoinParams::new(p.theta, p.noise_epsilon)?,
        rule: p.rule.into(),
        steps: p.steps,
        trajectories: p.trajectories,
        seed: p.seed,
    };
    let output = Output::create(out, p.format)?;
    let series = match p.method {
        TraceMethod::Channel => trace_distance_channel(&cfg, p.lattice)?,
        TraceMethod::Ensemble => trace_distance_experiment(&cfg)?,
    };
    #[derive(Serialize)]
    struct Row {
        t: usize,
        #[serde(rename = "D")]
        d: f64,
        v: Option<f64>,
    }
    output.table(
        "trace",
        |w| series.write_csv(w),
        || {
            series
                .times
                .iter()
                .zip(&series.distances)
                .enumerate()
                .map(|(i, (&t, &d))| Row {
                    t,
                    d,
                    v: series.velocities.get(i).copied(),
                })
                .collect::<Vec<_>>()
        },
    )?;
    output.json(
        "trace_summary.json",
        &serde_json::json!({
            "blp_sum": series.blp_sum,
            "positive_events": series.positive_events,
            "growth_times": series.growth_times().collect::<Vec<_>>(),
        }),
    )?;
    Ok(Completed {
        params: to_value(p)?,
        seed: p.seed,
    })
}

// ----------------------------------------------------------------------------
// kspace-eigen

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EigenOpts {
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<Angle>,
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    /// Comma-separated times at which the averaged map is evaluated.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<u64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub k_min: Option<Angle>,
    #[arg(long, allow_hyphen_values = true)]
    pub k_max: Option<Angle>,
    #[arg(long)]
    pub k_points: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EigenParams {
    pub theta: f64,
    pub kernel: KernelArg,
    pub times: Vec<u64>,
    pub k_min: f64,
    pub k_max: f64,
    pub k_points: usize,
    pub seed: u64,
    pub format: Format,
}

impl EigenOpts {
    pub fn resolve(self) -> Result<EigenParams, CliError> {
        let times = self.times.unwrap_or_else(|| vec![25, 50, 100, 200]);
        if times.is_empty() || times.contains(&0) {
            return Err(CliError::field(
                "times",
                "needs at least one time, all >= 1",
            ));
        }
        let p = EigenParams {
            theta: self.theta.map_or(FRAC_PI_4, |a| a.0),
            kernel: self.kernel.unwrap_or(KernelArg::Discrete),
            times,
            k_min: self.k_min.map_or(-PI, |a| a.0),
            k_max: self.k_max.map_or(PI, |a| a.0),
            k_points: self.k_points.unwrap_or(257),
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            format: self.format.unwrap_or_default(),
        };
        if p.k_points < 2 {
            return Err(CliError::field("k-points", "must be at least 2"));
        }
        if !(p.k_min < p.k_max) {
            return Err(CliError::field("k-max", "must exceed k-min"));
        }
        Ok(p)
    }
}

pub fn run_eigen(p: &EigenParams, out: &Path) -> Result<Completed, CliError> {
    let output = Output::create(out, p.format)?;
    let ks: Vec<f64> = (0..p.k_points)
        .map(|i| p.k_min + (p.k_max - p.k_min) * i as f64 / (p.k_points - 1) as f64)
        .collect();
    let samples = eigen_grid(p.theta, p.kernel.into(), &ks, &p.times)?;
    output.table(
        "eigen",
        |w| write_eigen_csv(&samples, w),
        || samples.clone(),
    )?;

    // Small-momentum fits on a grid inside |k| <= 0.1 / max(t).
    let t_max = *p.times.iter().max().expect("validated non-empty") as f64;
    let small: Vec<f64> = (0..=24)
        .map(|i| 0.1 / t_max * 10f64.powf(-1.0 + i as f64 / 24.0))
        .collect();
    let expansion = small_k_expansion(p.theta, p.kernel.into(), &p.times, &small)?;
    output.json(
        "expansion.json",
        &serde_json::json!({
            "fits": expansion.fits,
            "max_modulus": expansion.max_modulus,
            "conjugate_error": expansion.conjugate_error,
            "valid": expansion.valid,
        }),
    )?;
    Ok(Completed {
        params: to_value(p)?,
        seed: p.seed,
    })
}

// ----------------------------------------------------------------------------
// exact-channel

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ChannelOpts {
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<Angle>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<Angle>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<Angle>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub truncation: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub noise_epsilon: Option<f64>,
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Periodic lattice size M.
    #[arg(long)]
    pub lattice: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Option<Vec<usize>>,
    /// Fit the variance over this time window, e.g. 16,128.
    #[arg(long, value_delimiter = ',')]
    pub fit_window: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ChannelParams {
    pub theta: f64,
    pub gamma: f64,
    pub phi: f64,
    pub delta: Option<f64>,
    pub truncation: f64,
    pub noise_epsilon: f64,
    pub rule: RuleArg,
    pub steps: usize,
    pub lattice: usize,
    pub snapshots: Vec<usize>,
    pub fit_window: Option<Vec<f64>>,
    pub seed: u64,
    pub format: Format,
}

impl ChannelOpts {
    pub fn resolve(self) -> Result<ChannelParams, CliError> {
        let steps = positive("steps", self.steps.unwrap_or(64))?;
        let snapshots = self.snapshots.unwrap_or_else(|| default_snapshots(steps));
        check_snapshots(&snapshots, steps)?;
        if let Some(w) = &self.fit_window {
            window_pair("fit-window", w)?;
        }
        Ok(ChannelParams {
            theta: self.theta.map_or(FRAC_PI_4, |a| a.0),
            gamma: self.gamma.map_or(FRAC_PI_2, |a| a.0),
            phi: self.phi.map_or(0.0, |a| a.0),
            delta: self.delta,
            truncation: self.truncation.unwrap_or(6.0),
            noise_epsilon: self.noise_epsilon.unwrap_or(0.0),
            rule: self.rule.unwrap_or(RuleArg::Interval),
            steps,
            lattice: self.lattice.unwrap_or(2048),
            snapshots,
            fit_window: self.fit_window,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            format: self.format.unwrap_or_default(),
        })
    }
}

pub fn run_channel(p: &ChannelParams, out: &Path) -> Result<Completed, CliError> {
    let coin = CoinParams::new(p.theta, p.noise_epsilon)?;
    let init = initial_state(bloch("gamma", p.gamma, p.phi)?, p.delta, p.truncation)?;
    let output = Output::create(out, p.format)?;
    let result = evolve_two_point_channel(p.lattice, p.steps, coin, &init, p.rule.into())?;
    #[derive(Serialize)]
    struct Row {
        t: usize,
        var: f64,
    }
    output.table(
        "channel_moments",
        |w| result.write_moments_csv(w),
        || {
            result
                .times
                .iter()
                .zip(&result.variances)
                .map(|(&t, &var)| Row { t, var })
                .collect::<Vec<_>>()
        },
    )?;
    for &t in &p.snapshots {
        output.distribution(t, &result.distributions[t])?;
    }
    if let Some(w) = &p.fit_window {
        let times: Vec<f64> = result.times.iter().map(|&t| t as f64).collect();
        let fit = fit_power_law(&times, &result.variances, window_pair("fit-window", w)?)?;
        output.json("fit.json", &FitReport::new(&fit, "var", false))?;
    }
    Ok(Completed {
        params: to_value(p)?,
        seed: p.seed,
    })
}

// ----------------------------------------------------------------------------
// fit

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FitOpts {
    /// CSV file with a header row, e.g. a moments.csv from another run.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub time_column: Option<String>,
    #[arg(long)]
    pub value_column: Option<String>,
    /// Column of standard errors; switches to a weighted fit.
    #[arg(long)]
    pub se_column: Option<String>,
    /// Fit window t_min,t_max; defaults to every row.
    #[arg(long, value_delimiter = ',')]
    pub window: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct FitParams {
    pub input: PathBuf,
    pub time_column: String,
    pub value_column: String,
    pub se_column: Option<String>,
    pub window: Option<Vec<f64>>,
    pub seed: u64,
    pub format: Format,
}

impl FitOpts {
    pub fn resolve(self) -> Result<FitParams, CliError> {
        let input = self
            .input
            .ok_or_else(|| CliError::field("input", "a CSV file is required"))?;
        if let Some(w) = &self.window {
            window_pair("window", w)?;
        }
        Ok(FitParams {
            input,
            time_column: self.time_column.unwrap_or_else(|| "t".into()),
            value_column: self.value_column.unwrap_or_else(|| "var".into()),
            se_column: self.se_column,
            window: self.window,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            format: self.format.unwrap_or_default(),
        })
    }
}

/// `fit.json`: the fitted law with its window and standard errors.
#[derive(Debug, Serialize)]
pub struct FitReport<'a> {
    pub column: &'a str,
    pub weighted: bool,
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub coefficient: f64,
    pub coefficient_stderr: f64,
    pub r_squared: f64,
    pub window: [f64; 2],
    pub points: usize,
}

impl<'a> FitReport<'a> {
    fn new(fit: &PowerLawFit, column: &'a str, weighted: bool) -> Self {
        Self {
            column,
            weighted,
            exponent: fit.exponent,
            exponent_stderr: fit.exponent_stderr,
            coefficient: fit.coefficient,
            coefficient_stderr: fit.coefficient_stderr,
            r_squared: fit.r_squared,
            window: [fit.t_min, fit.t_max],
            points: fit.points,
        }
    }
}

fn read_columns(p: &FitParams) -> Result<Vec<Vec<f64>>, CliError> {
    let mut reader = csv::Reader::from_path(&p.input)
        .map_err(|e| CliError::field("input", format!("{}: {e}", p.input.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::field("input", e))?
        .clone();
    let mut wanted = vec![
        ("time-column", &p.time_column),
        ("value-column", &p.value_column),
    ];
    if let Some(se) = &p.se_column {
        wanted.push(("se-column", se));
    }
    let idx = wanted
        .iter()
        .map(|(field, name)| {
            headers
                .iter()
                .position(|h| h == name.as_str())
                .ok_or_else(|| {
                    CliError::field(
                        field,
                        format!("no column `{name}` in {}", p.input.display()),
                    )
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut cols = vec![Vec::new(); idx.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::field("input", e))?;
        for (col, &i) in cols.iter_mut().zip(&idx) {
            let cell = record.get(i).unwrap_or("");
            let v = cell.parse::<f64>().map_err(|_| {
                CliError::field(
                    "input",
                    format!("row {}: `{cell}` is not a number", row + 2),
                )
            })?;
            col.push(v);
        }
    }
    Ok(cols)
}

pub fn run_fit(p: &FitParams, out: &Path) -> Result<Completed, CliError> {
    let cols = read_columns(p)?;
    let (t, y) = (&cols[0], &cols[1]);
    let window = match &p.window {
        Some(w) => window_pair("window", w)?,
        None => (
            t.iter().copied().fold(f64::INFINITY, f64::min),
            t.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ),
    };
    let fit = match cols.get(2) {
        Some(se) => fit_power_law_weighted(t, y, se, window)?,
        None => fit_power_law(t, y, window)?,
    };
    let output = Output::create(out, p.format)?;
    output.json(
        "fit.json",
        &FitReport::new(&fit, &p.value_column, cols.len() == 3),
    )?;
    Ok(Completed {
        params: to_value(p)?,
        seed: p.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_schedule_is_geometric() {
        assert_eq!(default_snapshots(64), vec![1, 2, 4, 8, 16, 32, 64]);
        assert_eq!(default_snapshots(100), vec![1, 2, 4, 8, 16, 32, 64, 100]);
        assert_eq!(default_snapshots(1), vec![1]);
    }

    #[test]
    fn standard_rejects_interval_rule() {
        let opts = WalkOpts {
            rule: Some(RuleArg::Interval),
            ..Default::default()
        };
        let err = opts.resolve(false).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("`rule`"));
    }

    #[test]
    fn snapshots_beyond_steps_are_rejected() {
        let opts = WalkOpts {
            steps: Some(10),
            snapshots: Some(vec![5, 20]),
            ..Default::default()
        };
        assert!(opts
            .resolve(true)
            .unwrap_err()
            .to_string()
            .contains("`snapshots`"));
    }

    #[test]
    fn resolved_params_round_trip_through_options() {
        let p = ChannelOpts {
            fit_window: Some(vec![4.0, 32.0]),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        let back: ChannelOpts = serde_json::from_value(to_value(&p).unwrap()).unwrap();
        let again = back.resolve().unwrap();
        assert_eq!(to_value(&p).unwrap(), to_value(&again).unwrap());
    }

    #[test]
    fn window_needs_two_increasing_values() {
        assert!(window_pair("window", &[1.0, 2.0]).is_ok());
        for bad in [&[1.0][..], &[2.0, 1.0], &[1.0, 2.0, 3.0]] {
            assert!(window_pair("window", bad).is_err());
        }
    }
}
