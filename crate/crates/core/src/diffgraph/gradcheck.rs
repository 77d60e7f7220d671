use crate::diffgraph::params::{Gradients, ParameterSet};
use crate::diffgraph::tape::{NodeId, Tape};
use crate::error::{Error, Result};

/// Entries whose analytic and numeric magnitudes are both below this are
/// compared absolutely rather than relatively.
const RELATIVE_FLOOR: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub max_relative_error: f64,
    pub worst_index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.max_relative_error)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_relative_error() < self.tolerance
    }
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for p in &self.params {
            writeln!(
                f,
                "{:<28} max_rel_err={:.3e} (entry {})",
                p.name, p.max_relative_error, p.worst_index
            )?;
        }
        write!(
            f,
            "{} max_rel_err={:.3e} tolerance={:.1e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.max_relative_error(),
            self.tolerance
        )
    }
}

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_FLOOR)
}

/// Compares `analytic` with central differences of `value` at every scalar
/// of every parameter.
pub fn compare_gradients(
    params: &ParameterSet,
    analytic: &Gradients,
    step: f64,
    tolerance: f64,
    value: impl Fn(&ParameterSet) -> Result<f64>,
) -> Result<GradCheckReport> {
    if step.is_nan() || step <= 0.0 {
        return Err(Error::Argument(format!("finite-difference step must be positive, got {step}")));
    }
    let mut probe = params.clone();
    let mut report = Vec::with_capacity(params.len());
    for id in params.ids() {
        let exact = analytic.dense(id, params);
        let mut worst = (0.0, 0);
        for e in 0..exact.len() {
            let orig = params.get(id).data()[e];
            probe.get_mut(id).data_mut()[e] = orig + step;
            let up = value(&probe)?;
            probe.get_mut(id).data_mut()[e] = orig - step;
            let down = value(&probe)?;
            probe.get_mut(id).data_mut()[e] = orig;
            let numeric = (up - down) / (2.0 * step);
            let err = relative_error(exact.data()[e], numeric);
            if err > worst.0 || err.is_nan() {
                worst = (err, e);
            }
        }
        report.push(ParamCheck {
            name: params.name(id).to_owned(),
            max_relative_error: worst.0,
            worst_index: worst.1,
        });
    }
    Ok(GradCheckReport {
        params: report,
        tolerance,
    })
}

/// Builds the graph with `build`, back-propagates, and checks the result
/// against central differences of the same function.
pub fn grad_check<'o, F>(params: &ParameterSet, step: f64, tolerance: f64, build: F) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&mut Tape<'t, 'o>) -> Result<NodeId>,
{
    let analytic = {
        let mut tape = Tape::new(params);
        let loss = build(&mut tape)?;
        tape.backward(loss)?
    };
    compare_gradients(params, &analytic, step, tolerance, |p| {
        let mut tape = Tape::new(p);
        let loss = build(&mut tape)?;
        tape.scalar(loss)
            .ok_or_else(|| Error::Contract("grad_check function must return a scalar".into()))
    })
}
