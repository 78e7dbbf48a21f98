use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{csv_error, feedback_response, fmt_sig12, step_count};
use crate::error::{Error, Result};
use crate::hinfnorm::{closed_loop, hinf_norm_bisect, NormOptions};
use crate::model::{GainMatrix, LtiSystem};
use crate::riccati::synth_are;
use crate::synthesis::{optimal_gamma, synth_optimal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub num_systems: usize,
    pub param_low: f64,
    pub param_high: f64,
    pub seed: u64,
    pub horizon: f64,
    pub dt: f64,
    /// Relative accuracy of the Riccati gamma iteration.
    pub gamma_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            num_systems: 50,
            param_low: 0.1,
            param_high: 5.0,
            seed: 2019,
            horizon: 10.0,
            dt: 0.01,
            gamma_tol: 1e-6,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_systems == 0 {
            return Err(Error::InvalidArgument(
                "num_systems must be at least 1".into(),
            ));
        }
        if !(self.param_low > 0.0
            && self.param_low < self.param_high
            && self.param_high.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "need 0 < param_low < param_high, got ({}, {}]",
                self.param_low, self.param_high
            )));
        }
        if self.gamma_tol.is_nan() || self.gamma_tol <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "gamma_tol must be positive, got {}",
                self.gamma_tol
            )));
        }
        step_count(self.horizon, self.dt).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Controller {
    /// Closed-form `b^T a^{-1}`.
    Optimal,
    /// Central Riccati controller near the optimal level.
    Riccati,
}

impl Controller {
    pub const ALL: [Controller; 2] = [Controller::Optimal, Controller::Riccati];

    pub fn label(self) -> &'static str {
        match self {
            Controller::Optimal => "Lstar",
            Controller::Riccati => "LG",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Disturbance {
    /// Unit step on one channel.
    Channel(usize),
    /// Unit step on every channel at once.
    All,
}

impl Disturbance {
    fn modes(n: usize) -> Vec<Disturbance> {
        (0..n)
            .map(Disturbance::Channel)
            .chain([Disturbance::All])
            .collect()
    }

    pub fn label(self) -> String {
        match self {
            Disturbance::Channel(j) => format!("w{}", j + 1),
            Disturbance::All => "wall".into(),
        }
    }

    fn vector(self, n: usize) -> DVector<f64> {
        match self {
            Disturbance::Channel(j) => {
                let mut w = DVector::zeros(n);
                w[j] = 1.0;
                w
            }
            Disturbance::All => DVector::from_element(n, 1.0),
        }
    }
}

/// Averaged `|x_state(t)|` for one controller and disturbance.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub controller: Controller,
    pub disturbance: Disturbance,
    pub state: usize,
    pub mean_abs: Vec<f64>,
}

impl Series {
    pub fn label(&self) -> String {
        format!(
            "{}_{}_x{}",
            self.controller.label(),
            self.disturbance.label(),
            self.state + 1
        )
    }

    pub fn peak(&self) -> f64 {
        self.mean_abs
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrawSummary {
    pub index: usize,
    /// `(a_1, a_2, a_3)` then `(b_1, ..., b_5)`.
    pub params: Vec<f64>,
    pub gamma_opt: f64,
    pub norm_optimal: f64,
    pub norm_riccati: f64,
    pub riccati_gamma: f64,
}

impl DrawSummary {
    /// `|norm_optimal - norm_riccati| / gamma_opt`.
    pub fn relative_norm_gap(&self) -> f64 {
        (self.norm_optimal - self.norm_riccati).abs() / self.gamma_opt
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub config: ExperimentConfig,
    pub times: Vec<f64>,
    pub draws: Vec<DrawSummary>,
    /// Draws excluded from the averages, with the reason.
    pub failures: Vec<(usize, String)>,
    pub series: Vec<Series>,
}

impl ComparisonTable {
    pub fn series(
        &self,
        controller: Controller,
        disturbance: Disturbance,
        state: usize,
    ) -> Option<&Series> {
        self.series.iter().find(|s| {
            s.controller == controller && s.disturbance == disturbance && s.state == state
        })
    }

    /// Wide CSV: a `#` comment line with the configuration and draw counts,
    /// a header row, then one row per time sample.
    pub fn to_csv(&self) -> Result<String> {
        let c = &self.config;
        let mut out = format!(
            "# seed={} num_systems={} param_low={} param_high={} horizon={} dt={} gamma_tol={} succeeded={} failed={}\n",
            c.seed,
            c.num_systems,
            c.param_low,
            c.param_high,
            c.horizon,
            c.dt,
            c.gamma_tol,
            self.draws.len(),
            self.failures.len()
        );
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["time".to_string()];
        header.extend(self.series.iter().map(Series::label));
        w.write_record(&header).map_err(csv_error)?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![fmt_sig12(*t)];
            row.extend(self.series.iter().map(|s| fmt_sig12(s.mean_abs[k])));
            w.write_record(&row).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        out.push_str(&String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))?);
        Ok(out)
    }
}

/// Three buffers joined by three links, with every rate drawn from
/// `(low, high]`:
///
/// ```text
/// a = -diag(a1, a2, a3),  b = [[-b1, 0, 0], [b2, b3, -b4], [0, 0, b5]]
/// ```
pub fn draw_buffer_network(
    rng: &mut impl Rng,
    low: f64,
    high: f64,
) -> Result<(LtiSystem, Vec<f64>)> {
    // high - u (high - low) with u in [0, 1) lands in (low, high]
    let params: Vec<f64> = (0..8)
        .map(|_| high - rng.random::<f64>() * (high - low))
        .collect();
    let (a, b) = params.split_at(3);
    let a = DMatrix::from_diagonal(&DVector::from_iterator(3, a.iter().map(|v| -v)));
    let b = DMatrix::from_row_slice(3, 3, &[-b[0], 0.0, 0.0, b[1], b[2], -b[3], 0.0, 0.0, b[4]]);
    Ok((LtiSystem::new(a, b)?, params))
}

struct DrawResult {
    summary: DrawSummary,
    /// `|x|` samples indexed by `[controller][disturbance][time]`.
    responses: Vec<Vec<Vec<DVector<f64>>>>,
}

fn run_draw(cfg: &ExperimentConfig, index: usize, modes: &[Disturbance]) -> Result<DrawResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let (sys, params) = draw_buffer_network(&mut rng, cfg.param_low, cfg.param_high)?;
    let optimal = synth_optimal(&sys)?;
    let are = synth_are(&sys, cfg.gamma_tol)?;
    let opts = NormOptions::default();
    let norm_optimal = hinf_norm_bisect(&closed_loop(&sys, &optimal)?, &opts)?.gamma;
    let norm_riccati = hinf_norm_bisect(&closed_loop(&sys, &are.gain)?, &opts)?.gamma;
    let gains: [&GainMatrix; 2] = [&optimal, &are.gain];
    let n = sys.n();
    let responses = gains
        .iter()
        .map(|l| {
            modes
                .iter()
                .map(|d| {
                    let t = feedback_response(&sys, l, &d.vector(n), cfg.horizon, cfg.dt)?;
                    Ok(t.states.into_iter().map(|x| x.abs()).collect())
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DrawResult {
        summary: DrawSummary {
            index,
            params,
            gamma_opt: optimal_gamma(&sys),
            norm_optimal,
            norm_riccati,
            riccati_gamma: are.achieved_gamma,
        },
        responses,
    })
}

/// Draw `num_systems` random buffer networks, close each with the
/// closed-form and the Riccati controller, and average `|x_i(t)|` over the
/// draws for every controller, disturbance channel and state.
///
/// Draw `k` uses its own ChaCha8 stream `k` under `seed`, so the table does
/// not depend on thread scheduling. Failed draws are listed in
/// [`ComparisonTable::failures`] and left out of the averages.
pub fn run_comparison_experiment(cfg: &ExperimentConfig) -> Result<ComparisonTable> {
    cfg.validate()?;
    let n = 3;
    let modes = Disturbance::modes(n);
    let results: Vec<Result<DrawResult>> = (0..cfg.num_systems)
        .into_par_iter()
        .map(|k| run_draw(cfg, k, &modes))
        .collect();

    let steps = step_count(cfg.horizon, cfg.dt)?;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * cfg.dt).collect();
    let mut sums = vec![vec![vec![DVector::<f64>::zeros(n); steps + 1]; modes.len()]; 2];
    let mut draws = Vec::new();
    let mut failures = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(d) => {
                for (c, per_mode) in d.responses.iter().enumerate() {
                    for (m, samples) in per_mode.iter().enumerate() {
                        for (t, x) in samples.iter().enumerate() {
                            sums[c][m][t] += x;
                        }
                    }
                }
                draws.push(d.summary);
            }
            Err(e) => failures.push((k, e.to_string())),
        }
    }
    if draws.is_empty() {
        return Err(Error::NoConvergence {
            iterations: cfg.num_systems,
            context: format!("every draw failed, first: {}", failures[0].1),
        });
    }
    let count = draws.len() as f64;
    let mut series = Vec::new();
    for (c, controller) in Controller::ALL.iter().enumerate() {
        for (m, disturbance) in modes.iter().enumerate() {
            for state in 0..n {
                series.push(Series {
                    controller: *controller,
                    disturbance: *disturbance,
                    state,
                    mean_abs: sums[c][m].iter().map(|x| x[state] / count).collect(),
                });
            }
        }
    }
    Ok(ComparisonTable {
        config: cfg.clone(),
        times,
        draws,
        failures,
        series,
    })
}
