//! Time-domain responses to constant disturbances and the randomized
//! controller comparison built on them.

mod experiment;
mod expm;

pub use experiment::{
    draw_buffer_network, run_comparison_experiment, ComparisonTable, Controller, Disturbance,
    DrawSummary, ExperimentConfig, Series,
};
pub use expm::matrix_exponential;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{GainMatrix, LtiSystem, StateSpace};

/// Samples of a response on the grid `t_k = k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// `y_k = c x_k + d w`. For [`feedback_response`] this is `u = l x`.
    pub outputs: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn min_state(&self) -> f64 {
        self.states
            .iter()
            .flat_map(|x| x.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// CSV with a `time` column, then states, then outputs when
    /// `output_labels` is given. Values carry 12 significant digits.
    pub fn to_csv(
        &self,
        state_labels: &[String],
        output_labels: Option<&[String]>,
    ) -> Result<String> {
        let n = self.states.first().map_or(0, |x| x.len());
        let p = self.outputs.first().map_or(0, |y| y.len());
        if state_labels.len() != n || output_labels.is_some_and(|l| l.len() != p) {
            return Err(Error::DimensionMismatch(format!(
                "column labels do not match {n} states and {p} outputs"
            )));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["time".to_string()];
        header.extend(state_labels.iter().cloned());
        if let Some(l) = output_labels {
            header.extend(l.iter().cloned());
        }
        w.write_record(&header).map_err(csv_error)?;
        for k in 0..self.len() {
            let mut row = vec![fmt_sig12(self.times[k])];
            row.extend(self.states[k].iter().map(|v| fmt_sig12(*v)));
            if output_labels.is_some() {
                row.extend(self.outputs[k].iter().map(|v| fmt_sig12(*v)));
            }
            w.write_record(&row).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Twelve significant digits in scientific notation.
pub fn fmt_sig12(v: f64) -> String {
    format!("{v:.11e}")
}

/// Number of steps covering `[0, horizon]` with step `dt`.
fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be nonnegative, got {horizon}"
        )));
    }
    let steps = (horizon / dt - 1e-9).ceil().max(0.0);
    if steps > 1e8 {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} with dt {dt} needs {steps} steps"
        )));
    }
    Ok(steps as usize)
}

/// Response of `ss` from `x(0) = 0` to the constant input `w`, sampled
/// exactly through the zero-order-hold discretization
/// `x_{k+1} = e^{a dt} x_k + (int_0^dt e^{a s} ds) b w`.
///
/// Both factors come from one exponential of `[[a, b w], [0, 0]] dt`.
pub fn step_response(
    ss: &StateSpace,
    w: &DVector<f64>,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    if w.len() != ss.inputs() {
        return Err(Error::DimensionMismatch(format!(
            "disturbance has {} entries, realization has {} inputs",
            w.len(),
            ss.inputs()
        )));
    }
    let steps = step_count(horizon, dt)?;
    let max_real = linalg::max_real_part(&ss.a)?;
    if max_real >= 0.0 {
        return Err(Error::NotStable { max_real });
    }
    let n = ss.states();
    let forcing = &ss.b * w;
    let mut aug = DMatrix::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&ss.a * dt));
    aug.view_mut((0, n), (n, 1)).copy_from(&(&forcing * dt));
    let e = matrix_exponential(&aug)?;
    let ad = e.view((0, 0), (n, n)).into_owned();
    let gd = e.view((0, n), (n, 1)).column(0).into_owned();
    let feedthrough = &ss.d * w;

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps + 1);
    let mut x = DVector::zeros(n);
    for k in 0..=steps {
        if k > 0 {
            x = &ad * &x + &gd;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteResult(format!("state at step {k}")));
        }
        times.push(k as f64 * dt);
        outputs.push(&ss.c * &x + &feedthrough);
        states.push(x.clone());
    }
    Ok(Trajectory {
        times,
        states,
        outputs,
    })
}

/// Response of `x' = (a + b l) x + w` with the applied input `u = l x`
/// recorded as the output.
pub fn feedback_response(
    sys: &LtiSystem,
    l: &GainMatrix,
    w: &DVector<f64>,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    l.check_dims(sys)?;
    let n = sys.n();
    let ss = StateSpace::new(
        sys.a() + sys.b() * &l.l,
        DMatrix::identity(n, n),
        l.l.clone(),
        DMatrix::zeros(sys.m(), n),
    )?;
    step_response(&ss, w, horizon, dt)
}
