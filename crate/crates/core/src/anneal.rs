//! Annealing diffusions with Poisson-refreshed drift targets.
//!
//! The switched process moves by
//! `dΘ = σ(Θ) dB − β_t grad κ(·, Y_t)(Θ) dt`, where `Y_t` is redrawn from `ν`
//! (plain mode) or from `ν_{s(t)}` (smoothed mode, with `κ` replaced by
//! `κ_{s(t)}`) at the jump times of a Poisson clock of intensity `1/γ_t`.
//! The homogenized reference replaces `grad κ(·, Y_t)` by its `ν`-average.
//!
//! Integration is Euler–Maruyama with an exponential-map retraction. Jump
//! times are computed exactly and steps are split there, so `Y` is piecewise
//! constant between integration nodes.

use std::f64::consts::E;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::spectral::{HeatFactors, SpectralKernel};
use crate::cost::{GradientBound, PowerCost, SmoothedCost};
use crate::error::{Error, Result};
use crate::manifold::{Manifold, Point, TangentVector};
use crate::measure::DiscreteMeasure;
use crate::rng::{stream, StreamRng};

/// Default shift of the schedule clock, so that `ln(1 + t + e - 1) ≥ 1`.
pub const DEFAULT_T_OFFSET: f64 = E - 1.0;
/// Floor of the smoothing time.
pub const DEFAULT_S_MIN: f64 = 5e-3;
/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Drift `grad ρ^p(·, Y)` with `Y ~ ν`.
    Plain,
    /// Drift `grad κ_s(·, Y)` with `Y ~ ν_s`, `s = s(t)`.
    Smoothed,
}

/// How the smoothed drift `grad κ_s` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum DriftMethod {
    /// Harmonic expansion; exact up to truncation.
    Spectral,
    /// Quadrature on a lattice with `nodes` points per axis.
    Quadrature { nodes: usize },
    /// One-sample score-function estimator (unbiased, noisy).
    Score,
}

/// `β_t = ln(1+τ)/k`, `γ_t = 1/(1+τ)`, `s_t = max(1/ln(1+τ), s_min)` with
/// `τ = t + t_offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedules {
    pub k: f64,
    pub t_offset: f64,
    pub s_min: f64,
    pub mode: Mode,
    /// Hold `β` fixed (test hook; `Some(0.0)` switches the drift off).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_override: Option<f64>,
    /// Hold `s` fixed (test hook).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_override: Option<f64>,
}

impl Schedules {
    pub fn new(k: f64, mode: Mode) -> Result<Self> {
        let s = Schedules {
            k,
            t_offset: DEFAULT_T_OFFSET,
            s_min: DEFAULT_S_MIN,
            mode,
            beta_override: None,
            s_override: None,
        };
        s.validate()?;
        Ok(s)
    }

    /// Fixed `β` and `s`.
    pub fn frozen(beta: f64, s: f64, mode: Mode) -> Result<Self> {
        let mut sched = Schedules::new(1.0, mode)?;
        sched.beta_override = Some(beta);
        sched.s_override = Some(s);
        sched.validate()?;
        Ok(sched)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::Config(format!("k must be positive, got {}", self.k)));
        }
        if !(self.t_offset >= 0.0 && self.t_offset.is_finite()) {
            return Err(Error::Config(format!("t_offset must be ≥ 0, got {}", self.t_offset)));
        }
        if !(self.s_min > 0.0 && self.s_min.is_finite()) {
            return Err(Error::Config(format!("s_min must be positive, got {}", self.s_min)));
        }
        if let Some(b) = self.beta_override {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::Config(format!("beta_override must be ≥ 0, got {b}")));
            }
        }
        if let Some(s) = self.s_override {
            if !(s >= self.s_min && s.is_finite()) {
                return Err(Error::Config(format!("s_override must be ≥ s_min, got {s}")));
            }
        }
        Ok(())
    }

    /// Clock `τ` at which the schedules are evaluated.
    pub fn tau(&self, t: f64) -> f64 {
        t + self.t_offset
    }

    pub fn beta(&self, t: f64) -> f64 {
        self.beta_override.unwrap_or_else(|| self.tau(t).ln_1p() / self.k)
    }

    pub fn gamma(&self, t: f64) -> f64 {
        1.0 / (1.0 + self.tau(t))
    }

    pub fn s(&self, t: f64) -> f64 {
        self.s_override.unwrap_or_else(|| (1.0 / self.tau(t).ln_1p()).max(self.s_min))
    }

    /// `(β_t, s_t)` from a single logarithm.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let l = self.tau(t).ln_1p();
        (
            self.beta_override.unwrap_or(l / self.k),
            self.s_override.unwrap_or_else(|| (1.0 / l).max(self.s_min)),
        )
    }
}

/// Integrated intensity `Λ(t) = t + t²/2` of the rate `1 + t`.
pub fn jump_intensity(t: f64) -> f64 {
    t + 0.5 * t * t
}

/// Next jump after `t` given an `Exp(1)` variate: `Λ(t') = Λ(t) + e`.
pub fn next_jump_time_from(t: f64, e: f64) -> f64 {
    -1.0 + ((1.0 + t) * (1.0 + t) + 2.0 * e).sqrt()
}

pub fn next_jump_time<R: Rng + ?Sized>(t: f64, rng: &mut R) -> f64 {
    let e: f64 = Exp1.sample(rng);
    next_jump_time_from(t, e)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnealState {
    pub t: f64,
    pub theta: Point,
    /// Current drift target.
    pub y: Point,
    pub jumps: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: AnnealState,
    /// The drift displacement was shortened to the cap.
    pub capped: bool,
}

/// One Euler–Maruyama step
/// `Θ ← exp_Θ(σ(Θ)·√h·g − h·β·drift)`, with the drift displacement
/// limited to `cap` in norm. `gauss` has the manifold's noise dimension
/// (ignored when `noise` is false).
#[allow(clippy::too_many_arguments)]
pub fn sde_step(
    m: Manifold,
    state: &AnnealState,
    h: f64,
    beta: f64,
    drift: &TangentVector,
    gauss: &[f64],
    noise: bool,
    cap: f64,
) -> Result<StepOutcome> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Argument(format!("step must be positive, got {h}")));
    }
    let mut push = drift.scale(-h * beta);
    let len = push.norm();
    let capped = len > cap;
    if capped {
        push = push.scale(cap / len);
    }
    let v = if noise {
        let sh = h.sqrt();
        let mut g = [0.0; 3];
        for (gi, x) in g.iter_mut().zip(gauss) {
            *gi = sh * x;
        }
        m.noise_step(&state.theta, &g[..gauss.len()])?.add(&push)
    } else {
        push
    };
    let theta = m.exp(&state.theta, &v);
    Ok(StepOutcome { state: AnnealState { t: state.t + h, theta, ..*state }, capped })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub theta: Point,
    pub y: Point,
    pub beta: f64,
    pub s: f64,
    pub jumps: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// Columns `t, theta_*, y_*, beta, s, jumps`.
    pub fn to_csv(&self, m: Manifold) -> String {
        let k = m.coord_len();
        let mut out = String::from("t");
        for i in 1..=k {
            let _ = write!(out, ",theta_{i}");
        }
        for i in 1..=k {
            let _ = write!(out, ",y_{i}");
        }
        out.push_str(",beta,s,jumps\n");
        for r in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.t,
                r.theta.to_csv(),
                r.y.to_csv(),
                r.beta,
                r.s,
                r.jumps
            );
        }
        out
    }
}

/// Everything that defines one simulated path apart from its seed.
#[derive(Clone, Debug)]
pub struct AnnealConfig {
    pub measure: DiscreteMeasure,
    pub p: f64,
    pub schedules: Schedules,
    pub t_end: f64,
    pub h_max: f64,
    /// Drift step constant; `h ≤ c_step/β_t`. Defaults to `0.1/K`.
    pub c_step: Option<f64>,
    /// Initial point; uniform when `None`.
    pub theta0: Option<Point>,
    /// Recording times in `(0, t_end]`; the initial state is always recorded.
    pub output_times: Vec<f64>,
    pub drift: DriftMethod,
    pub jumps: JumpHandling,
    /// `false` removes the Brownian term (test hook).
    pub noise: bool,
}

/// Treatment of drift-target jumps inside an integration step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpHandling {
    /// Every jump ends a step; the next step starts from the updated point.
    Split,
    /// Steps run across jumps; the drift integral over the step sums the
    /// Poisson segments exactly with the point held at the step's start.
    Accumulate,
}

impl AnnealConfig {
    pub fn new(measure: DiscreteMeasure, p: f64, schedules: Schedules, t_end: f64) -> Self {
        AnnealConfig {
            measure,
            p,
            schedules,
            t_end,
            h_max: 0.01,
            c_step: None,
            theta0: None,
            output_times: vec![t_end],
            drift: DriftMethod::Spectral,
            jumps: JumpHandling::Accumulate,
            noise: true,
        }
    }

    pub fn manifold(&self) -> Manifold {
        self.measure.manifold()
    }

    pub fn validate(&self) -> Result<()> {
        self.schedules.validate()?;
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::Config(format!("p must be ≥ 1, got {}", self.p)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be ≥ 0, got {}", self.t_end)));
        }
        if !(self.h_max > 0.0 && self.h_max.is_finite()) {
            return Err(Error::Config(format!("h_max must be positive, got {}", self.h_max)));
        }
        if let Some(c) = self.c_step {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("c_step must be positive, got {c}")));
            }
        }
        if let Some(t) = self.output_times.iter().find(|t| !(t.is_finite() && **t >= 0.0 && **t <= self.t_end)) {
            return Err(Error::Config(format!("output_times: {t} is outside [0, t_end]")));
        }
        if let Some(x) = &self.theta0 {
            if !self.manifold().contains(x) {
                return Err(Error::Config("theta0 is not a point of the manifold".into()));
            }
        }
        if let DriftMethod::Quadrature { nodes } = self.drift {
            if nodes < 16 {
                return Err(Error::Config(format!("drift.nodes must be ≥ 16, got {nodes}")));
            }
        }
        Ok(())
    }
}

/// Result of one path.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    /// Steps whose drift displacement hit the cap at `t ≥ 1`.
    pub cap_hits: u64,
    /// `max ‖drift‖ / K` over the run.
    pub max_drift_ratio: f64,
}

/// Ball `{θ : ρ(θ, center) ≤ radius}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighborhood {
    pub center: Point,
    pub radius: f64,
}

impl Neighborhood {
    pub fn contains(&self, m: Manifold, x: &Point) -> bool {
        m.distance(&self.center, x) <= self.radius
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleStats {
    pub checkpoints: Vec<f64>,
    pub hits: Vec<usize>,
    pub fractions: Vec<f64>,
    pub wilson_lo: Vec<f64>,
    pub wilson_hi: Vec<f64>,
    pub n_runs: usize,
    pub seed: u64,
    pub homogenized: bool,
    pub cap_hits: u64,
}

/// 95% Wilson score interval for `hits` successes in `n` trials.
pub fn wilson_interval(hits: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let phat = hits as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = Z95 * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// A validated configuration with its precomputed drift kernel.
#[derive(Clone, Debug)]
pub struct Engine {
    config: AnnealConfig,
    kernel: Option<SpectralKernel>,
    bound: GradientBound,
    c_step: f64,
    cap: f64,
}

impl Engine {
    pub fn new(config: AnnealConfig) -> Result<Self> {
        config.validate()?;
        let m = config.manifold();
        let kernel = match (config.schedules.mode, config.drift) {
            (Mode::Smoothed, DriftMethod::Spectral) => {
                Some(SpectralKernel::new(m, config.p, config.schedules.s_min)?)
            }
            _ => None,
        };
        let bound = GradientBound::new(m, config.p);
        let c_step = config.c_step.unwrap_or(0.1 / bound.k);
        // largest drift displacement the step rule allows
        let cap = c_step * bound.k * (1.0 + 1e-6);
        Ok(Engine { config, kernel, bound, c_step, cap })
    }

    pub fn config(&self) -> &AnnealConfig {
        &self.config
    }

    pub fn bound(&self) -> GradientBound {
        self.bound
    }

    fn manifold(&self) -> Manifold {
        self.config.manifold()
    }

    /// Step size at time `t` before splitting.
    pub fn step_size(&self, t: f64) -> f64 {
        self.step_for(self.config.schedules.beta(t))
    }

    fn step_for(&self, beta: f64) -> f64 {
        if beta > 0.0 {
            self.config.h_max.min(self.c_step / beta)
        } else {
            self.config.h_max
        }
    }

    fn draw_target(&self, s: f64, rng: &mut StreamRng) -> Result<Point> {
        let nu = &self.config.measure;
        let atom = nu.sample(rng);
        match self.config.schedules.mode {
            Mode::Plain => Ok(atom),
            Mode::Smoothed => self.manifold().sample_heat(s, &atom, rng),
        }
    }

    fn smoothed_grad(
        &self,
        theta: &Point,
        y: &Point,
        s: f64,
        cache: &mut Option<HeatFactors>,
        rng: &mut StreamRng,
    ) -> Result<TangentVector> {
        let m = self.manifold();
        match (self.config.drift, &self.kernel) {
            (DriftMethod::Spectral, Some(k)) => {
                if cache.as_ref().is_none_or(|f| f.s() != s) {
                    *cache = Some(k.factors(s)?);
                }
                Ok(k.grad_kappa_with(cache.as_ref().expect("filled above"), theta, y))
            }
            (DriftMethod::Quadrature { nodes }, _) => {
                Ok(SmoothedCost::new(PowerCost::new(self.config.p)?, s, nodes)?.grad_kappa(m, theta, y))
            }
            (DriftMethod::Score, _) => {
                let sc = SmoothedCost::new(PowerCost::new(self.config.p)?, s, 256)?;
                Ok(sc.grad_kappa_score(m, theta, y, rng))
            }
            (DriftMethod::Spectral, None) => unreachable!("kernel is built for smoothed spectral runs"),
        }
    }

    /// Drift of the switched process at target `y`.
    fn switched_drift(
        &self,
        theta: &Point,
        y: &Point,
        s: f64,
        cache: &mut Option<HeatFactors>,
        rng: &mut StreamRng,
    ) -> Result<TangentVector> {
        match self.config.schedules.mode {
            Mode::Plain => Ok(PowerCost::new(self.config.p)?.grad(self.manifold(), theta, y)),
            Mode::Smoothed => self.smoothed_grad(theta, y, s, cache, rng),
        }
    }

    /// `grad U` (plain) or `grad U_{0,2s}` (smoothed).
    fn homogenized_drift(
        &self,
        theta: &Point,
        s: f64,
        cache: &mut Option<HeatFactors>,
        rng: &mut StreamRng,
    ) -> Result<TangentVector> {
        let nu = &self.config.measure;
        let mut g = TangentVector::zero(*theta);
        match self.config.schedules.mode {
            Mode::Plain => {
                let cost = PowerCost::new(self.config.p)?;
                for (x, w) in nu.atoms().iter().zip(nu.weights()) {
                    g = g.add_scaled(*w, &cost.grad(self.manifold(), theta, x));
                }
            }
            Mode::Smoothed => {
                let s2 = 2.0 * s;
                for (x, w) in nu.atoms().iter().zip(nu.weights()) {
                    g = g.add_scaled(*w, &self.smoothed_grad(theta, x, s2, cache, rng)?);
                }
            }
        }
        Ok(g)
    }

    fn initial_state(&self, rng: &mut StreamRng) -> Result<AnnealState> {
        let m = self.manifold();
        let theta = match self.config.theta0 {
            Some(x) => x,
            None => m.sample_uniform(rng),
        };
        Ok(AnnealState { t: 0.0, theta, y: theta, jumps: 0 })
    }

    fn sample(&self, state: &AnnealState) -> Sample {
        let sched = &self.config.schedules;
        Sample {
            t: state.t,
            theta: state.theta,
            y: state.y,
            beta: sched.beta(state.t),
            s: sched.s(state.t),
            jumps: state.jumps,
        }
    }

    fn record_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self.config.output_times.iter().copied().filter(|&t| t > 0.0).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }

    /// A stepping handle on the switched process.
    pub fn annealer(&self, seed: u64, index: u64) -> Result<Annealer<'_>> {
        Annealer::new(self, stream(seed, index), false)
    }

    /// A stepping handle on the homogenized process.
    pub fn homogenized(&self, seed: u64, index: u64) -> Result<Annealer<'_>> {
        Annealer::new(self, stream(seed, index), true)
    }

    fn drive(&self, mut a: Annealer<'_>) -> Result<RunOutput> {
        let mut trajectory = Trajectory { samples: vec![self.sample(a.state())] };
        for t in self.record_times() {
            a.advance_to(t)?;
            trajectory.samples.push(self.sample(a.state()));
        }
        Ok(RunOutput { trajectory, cap_hits: a.cap_hits, max_drift_ratio: a.max_drift_ratio })
    }

    pub fn run(&self, seed: u64, index: u64) -> Result<RunOutput> {
        self.drive(self.annealer(seed, index)?)
    }

    pub fn run_homogenized(&self, seed: u64, index: u64) -> Result<RunOutput> {
        self.drive(self.homogenized(seed, index)?)
    }

    /// Runs `0..n_runs` on the rayon pool, each on its own stream of
    /// `seed`, and reports hit fractions of `neighborhood` at `checkpoints`.
    /// Trajectories are recorded at the configured output times.
    pub fn ensemble(
        &self,
        seed: u64,
        n_runs: usize,
        neighborhood: &Neighborhood,
        checkpoints: &[f64],
        homogenized: bool,
    ) -> Result<(EnsembleStats, Vec<Trajectory>)> {
        if n_runs < 30 {
            return Err(Error::Config(format!("n_runs must be ≥ 30, got {n_runs}")));
        }
        let mut checkpoints = checkpoints.to_vec();
        checkpoints.sort_by(f64::total_cmp);
        checkpoints.dedup();
        if checkpoints.iter().any(|&t| !(t >= 0.0 && t <= self.config.t_end)) {
            return Err(Error::Config("checkpoints must lie in [0, t_end]".into()));
        }
        let mut times: Vec<f64> = self.record_times();
        times.extend(checkpoints.iter().copied().filter(|&t| t > 0.0));
        times.sort_by(f64::total_cmp);
        times.dedup();
        let m = self.manifold();
        let per_run: Vec<Result<(Vec<bool>, Trajectory, u64)>> = (0..n_runs as u64)
            .into_par_iter()
            .map(|i| {
                let mut a = Annealer::new(self, stream(seed, i), homogenized)?;
                let mut trajectory = Trajectory { samples: vec![self.sample(a.state())] };
                let mut hits = vec![false; checkpoints.len()];
                let record = self.record_times();
                for (ci, &c) in checkpoints.iter().enumerate() {
                    if c == 0.0 {
                        hits[ci] = neighborhood.contains(m, &a.state().theta);
                    }
                }
                for &t in &times {
                    a.advance_to(t)?;
                    if record.contains(&t) {
                        trajectory.samples.push(self.sample(a.state()));
                    }
                    for (ci, &c) in checkpoints.iter().enumerate() {
                        if c == t {
                            hits[ci] = neighborhood.contains(m, &a.state().theta);
                        }
                    }
                }
                Ok((hits, trajectory, a.cap_hits))
            })
            .collect();
        let mut counts = vec![0usize; checkpoints.len()];
        let mut trajectories = Vec::with_capacity(n_runs);
        let mut cap_hits = 0;
        for r in per_run {
            let (hits, traj, caps) = r?;
            for (c, h) in counts.iter_mut().zip(hits) {
                *c += h as usize;
            }
            trajectories.push(traj);
            cap_hits += caps;
        }
        let (wilson_lo, wilson_hi) = counts.iter().map(|&h| wilson_interval(h, n_runs)).unzip();
        let stats = EnsembleStats {
            fractions: counts.iter().map(|&h| h as f64 / n_runs as f64).collect(),
            checkpoints,
            hits: counts,
            wilson_lo,
            wilson_hi,
            n_runs,
            seed,
            homogenized,
            cap_hits,
        };
        Ok((stats, trajectories))
    }
}

/// `Engine::new(config)?.run(seed, 0)`.
pub fn run(config: AnnealConfig, seed: u64) -> Result<Trajectory> {
    Ok(Engine::new(config)?.run(seed, 0)?.trajectory)
}

/// `Engine::new(config)?.run_homogenized(seed, 0)`.
pub fn run_homogenized(config: AnnealConfig, seed: u64) -> Result<Trajectory> {
    Ok(Engine::new(config)?.run_homogenized(seed, 0)?.trajectory)
}

/// A single path advanced on demand.
pub struct Annealer<'a> {
    engine: &'a Engine,
    state: AnnealState,
    rng: StreamRng,
    homogenized: bool,
    /// Next jump time on the simulation clock.
    next_jump: f64,
    cap_hits: u64,
    max_drift_ratio: f64,
    /// Last `(t, (β_t, s_t))`.
    cached: (f64, (f64, f64)),
    factors: Option<HeatFactors>,
}

impl<'a> Annealer<'a> {
    fn new(engine: &'a Engine, mut rng: StreamRng, homogenized: bool) -> Result<Self> {
        let mut state = engine.initial_state(&mut rng)?;
        let mut next_jump = f64::INFINITY;
        if !homogenized {
            state.y = engine.draw_target(engine.config.schedules.s(0.0), &mut rng)?;
            next_jump = engine.next_jump(0.0, &mut rng);
        }
        Ok(Annealer { engine, state, rng, homogenized, next_jump, cap_hits: 0, max_drift_ratio: 0.0, cached: (f64::NAN, (0.0, 0.0)), factors: None })
    }

    pub fn state(&self) -> &AnnealState {
        &self.state
    }

    pub fn cap_hits(&self) -> u64 {
        self.cap_hits
    }

    pub fn max_drift_ratio(&self) -> f64 {
        self.max_drift_ratio
    }

    /// Integrate up to time `target` (no-op if already there).
    pub fn advance_to(&mut self, target: f64) -> Result<()> {
        let e = self.engine;
        let m = e.manifold();
        let mut gauss = [0.0; 3];
        let nd = m.noise_dim();
        while self.state.t < target {
            if self.state.t >= self.next_jump {
                self.jump()?;
                continue;
            }
            let t = self.state.t;
            let (beta, s) = self.schedule_at(t);
            let mut stop = target;
            if e.config.jumps == JumpHandling::Split {
                stop = stop.min(self.next_jump);
            }
            let h = e.step_for(beta).min(stop - t);
            let end = if h == stop - t { stop } else { t + h };
            let drift = if self.homogenized {
                let g = e.homogenized_drift(&self.state.theta, s, &mut self.factors, &mut self.rng)?;
                self.max_drift_ratio = self.max_drift_ratio.max(g.norm() / e.bound.k);
                g
            } else {
                // ∫ grad κ(θ_t, Y_u) du over the step, Y piecewise constant
                let theta = self.state.theta;
                let mut acc = TangentVector::zero(theta);
                let mut cur = t;
                loop {
                    let seg_end = self.next_jump.min(end);
                    let g = e.switched_drift(&theta, &self.state.y, s, &mut self.factors, &mut self.rng)?;
                    self.max_drift_ratio = self.max_drift_ratio.max(g.norm() / e.bound.k);
                    acc = acc.add_scaled(seg_end - cur, &g);
                    cur = seg_end;
                    if self.next_jump >= end {
                        break;
                    }
                    self.state.jumps += 1;
                    self.state.y = e.draw_target(s, &mut self.rng)?;
                    self.next_jump = e.next_jump(cur, &mut self.rng);
                }
                acc.scale(1.0 / h)
            };
            if e.config.noise {
                for g in gauss.iter_mut().take(nd) {
                    *g = StandardNormal.sample(&mut self.rng);
                }
            }
            let out = sde_step(m, &self.state, h, beta, &drift, &gauss[..nd], e.config.noise, e.cap)?;
            self.state = out.state;
            self.state.t = end;
            if out.capped && t >= 1.0 {
                self.cap_hits += 1;
            }
        }
        Ok(())
    }

    fn schedule_at(&mut self, t: f64) -> (f64, f64) {
        if self.cached.0 != t {
            self.cached = (t, self.engine.config.schedules.at(t));
        }
        self.cached.1
    }

    fn jump(&mut self) -> Result<()> {
        let e = self.engine;
        self.state.jumps += 1;
        let (_, s) = self.schedule_at(self.state.t);
        self.state.y = e.draw_target(s, &mut self.rng)?;
        self.next_jump = e.next_jump(self.state.t, &mut self.rng);
        Ok(())
    }
}

impl Engine {
    fn next_jump(&self, t: f64, rng: &mut StreamRng) -> f64 {
        let sched = &self.config.schedules;
        next_jump_time(sched.tau(t), rng) - sched.t_offset
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_atoms() -> DiscreteMeasure {
        DiscreteMeasure::from_coords(Manifold::Circle, &[vec![0.0], vec![0.4]], None).unwrap()
    }

    #[test]
    fn schedules_shapes() {
        let s = Schedules::new(0.5, Mode::Smoothed).unwrap();
        assert!((s.beta(0.0) - 2.0).abs() < 1e-15);
        assert!((s.gamma(0.0) - 1.0 / E).abs() < 1e-15);
        assert!((s.s(0.0) - 1.0).abs() < 1e-15);
        let mut prev = (0.0, f64::INFINITY, f64::INFINITY);
        for i in 0..200 {
            let t = 1.3f64.powi(i) - 1.0;
            let cur = (s.beta(t), s.gamma(t), s.s(t));
            assert!(cur.0 >= prev.0 && cur.1 <= prev.1 && cur.2 <= prev.2);
            prev = cur;
        }
        assert_eq!(s.s(1e300), DEFAULT_S_MIN);
        assert!(Schedules::new(0.0, Mode::Plain).is_err());
    }

    #[test]
    fn jump_time_inversion() {
        assert!((next_jump_time_from(0.0, 1.5) - 1.0).abs() < 1e-15);
        assert!((next_jump_time_from(3.0, 1e-12) - 3.0).abs() < 1e-11);
        let t = 2.0;
        let t2 = next_jump_time_from(t, 0.7);
        assert!((jump_intensity(t2) - jump_intensity(t) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn deterministic_euler_step() {
        let m = Manifold::Circle;
        let theta = m.point(&[0.3]).unwrap();
        let st = AnnealState { t: 1.0, theta, y: theta, jumps: 4 };
        let g = TangentVector::new(theta, &[0.5]);
        let out = sde_step(m, &st, 0.01, 2.0, &g, &[0.0], false, 1.0).unwrap();
        assert!((out.state.theta.coords()[0] - (0.3 - 0.01)).abs() < 1e-15);
        assert_eq!(out.state.jumps, 4);
        assert!(!out.capped);
        let out = sde_step(m, &st, 0.01, 2.0, &g, &[0.0], false, 0.001).unwrap();
        assert!(out.capped);
        assert!((out.state.theta.coords()[0] - 0.299).abs() < 1e-15);
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
        assert_eq!(wilson_interval(0, 10).0, 0.0);
        assert!(wilson_interval(10, 10).1 > 1.0 - 1e-12);
    }

    #[test]
    fn zero_horizon_keeps_initial_state() {
        let mut cfg = AnnealConfig::new(two_atoms(), 2.0, Schedules::new(0.2, Mode::Plain).unwrap(), 0.0);
        cfg.theta0 = Some(Manifold::Circle.point(&[0.9]).unwrap());
        let tr = run(cfg, 1).unwrap();
        assert_eq!(tr.samples.len(), 1);
        assert_eq!(tr.samples[0].theta.coords()[0], 0.9);
        assert_eq!(tr.samples[0].t, 0.0);
    }

    #[test]
    fn identical_seeds_identical_paths() {
        let mut cfg = AnnealConfig::new(two_atoms(), 2.0, Schedules::new(0.2, Mode::Smoothed).unwrap(), 20.0);
        cfg.output_times = (1..=20).map(f64::from).collect();
        let e = Engine::new(cfg).unwrap();
        let a = e.run(9, 3).unwrap().trajectory;
        let b = e.run(9, 3).unwrap().trajectory;
        assert_eq!(a.to_csv(Manifold::Circle), b.to_csv(Manifold::Circle));
        assert_ne!(a, e.run(9, 4).unwrap().trajectory);
        let ts: Vec<f64> = a.samples.iter().map(|s| s.t).collect();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        assert!(a.samples.windows(2).all(|w| w[0].jumps <= w[1].jumps));
    }

    #[test]
    fn gradient_flow_reaches_a_critical_point() {
        let mut cfg = AnnealConfig::new(two_atoms(), 2.0, Schedules::frozen(1.0, 0.01, Mode::Plain).unwrap(), 30.0);
        cfg.noise = false;
        cfg.theta0 = Some(Manifold::Circle.point(&[0.1]).unwrap());
        let tr = run_homogenized(cfg, 0).unwrap();
        assert!((tr.last().unwrap().theta.coords()[0] - 0.2).abs() < 1e-9);
    }

    #[test]
    fn smoothed_drift_within_bound() {
        let mut cfg = AnnealConfig::new(two_atoms(), 1.5, Schedules::new(0.2, Mode::Smoothed).unwrap(), 50.0);
        cfg.h_max = 0.01;
        let e = Engine::new(cfg).unwrap();
        let out = e.run(4, 0).unwrap();
        assert!(out.max_drift_ratio <= 1.0 + 1e-6, "{}", out.max_drift_ratio);
        assert_eq!(out.cap_hits, 0);
    }
}
