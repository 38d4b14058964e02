use crate::error::{Error, Result};
use crate::numkit::{sigmoid, Matrix, Rng};

use super::{hadamard, GateParams};

/// LSTM weights: input, forget and output gates plus the tanh candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub input: GateParams,
    pub forget: GateParams,
    pub output: GateParams,
    pub candidate: GateParams,
}

/// Activations cached at one time step, each `units × B`.
#[derive(Clone, Debug)]
pub struct LstmStep {
    pub i: Matrix,
    pub f: Matrix,
    pub o: Matrix,
    pub g: Matrix,
    pub c: Matrix,
    pub tanh_c: Matrix,
    pub h: Matrix,
}

/// Per-step activations of a forward pass over a whole window.
#[derive(Clone, Debug)]
pub struct LstmTrace {
    pub steps: Vec<LstmStep>,
}

impl LstmTrace {
    pub fn hidden(&self) -> impl Iterator<Item = &Matrix> {
        self.steps.iter().map(|s| &s.h)
    }

    pub fn cells(&self) -> impl Iterator<Item = &Matrix> {
        self.steps.iter().map(|s| &s.c)
    }

    pub fn final_hidden(&self) -> &Matrix {
        &self.steps.last().expect("trace covers at least one step").h
    }
}

impl LstmParams {
    pub fn zeros(units: usize) -> Self {
        LstmParams {
            input: GateParams::zeros(units),
            forget: GateParams::zeros(units),
            output: GateParams::zeros(units),
            candidate: GateParams::zeros(units),
        }
    }

    pub fn init(rng: &mut Rng, units: usize) -> Result<Self> {
        Ok(LstmParams {
            input: GateParams::init(rng, units)?,
            forget: GateParams::init(rng, units)?,
            output: GateParams::init(rng, units)?,
            candidate: GateParams::init(rng, units)?,
        })
    }

    pub fn units(&self) -> usize {
        self.input.units()
    }

    fn step(&self, x: &[f64], h_prev: &Matrix, c_prev: &Matrix) -> Result<LstmStep> {
        let i = self.input.preactivation(x, h_prev)?.map(sigmoid);
        let f = self.forget.preactivation(x, h_prev)?.map(sigmoid);
        let o = self.output.preactivation(x, h_prev)?.map(sigmoid);
        let g = self.candidate.preactivation(x, h_prev)?.map(f64::tanh);
        let mut c = hadamard(&f, c_prev);
        for ((cv, &iv), &gv) in c.as_mut_slice().iter_mut().zip(i.as_slice()).zip(g.as_slice()) {
            *cv += iv * gv;
        }
        let tanh_c = c.map(f64::tanh);
        let h = hadamard(&o, &tanh_c);
        Ok(LstmStep { i, f, o, g, c, tanh_c, h })
    }

    /// Full forward pass over `inputs` (`w × B`) keeping every step.
    pub fn forward(&self, inputs: &Matrix) -> Result<LstmTrace> {
        let units = self.units();
        let batch = inputs.cols();
        let zero = Matrix::zeros(units, batch);
        let mut steps: Vec<LstmStep> = Vec::with_capacity(inputs.rows());
        for t in 0..inputs.rows() {
            let (h_prev, c_prev) = match steps.last() {
                Some(s) => (&s.h, &s.c),
                None => (&zero, &zero),
            };
            let s = self.step(inputs.row(t), h_prev, c_prev)?;
            steps.push(s);
        }
        Ok(LstmTrace { steps })
    }

    /// Forward pass returning only `h_w`.
    pub fn final_hidden(&self, inputs: &Matrix) -> Result<Matrix> {
        if inputs.rows() == 0 {
            return Err(Error::Shape("empty window".into()));
        }
        let mut h = Matrix::zeros(self.units(), inputs.cols());
        let mut c = h.clone();
        for t in 0..inputs.rows() {
            let s = self.step(inputs.row(t), &h, &c)?;
            h = s.h;
            c = s.c;
        }
        Ok(h)
    }

    /// Backpropagate `dh_last` (gradient of the loss w.r.t. `h_w`) through
    /// the window, accumulating into `grad`.
    pub(crate) fn backward(&self, inputs: &Matrix, trace: &LstmTrace, dh_last: Matrix, grad: &mut LstmParams) -> Result<()> {
        let units = self.units();
        let batch = inputs.cols();
        let zero = Matrix::zeros(units, batch);
        let mut dh = dh_last;
        let mut dc = Matrix::zeros(units, batch);

        for t in (0..trace.steps.len()).rev() {
            let s = &trace.steps[t];
            let (h_prev, c_prev) = if t > 0 {
                (Some(&trace.steps[t - 1].h), &trace.steps[t - 1].c)
            } else {
                (None, &zero)
            };
            let n = units * batch;
            let mut da_i = Matrix::zeros(units, batch);
            let mut da_f = Matrix::zeros(units, batch);
            let mut da_o = Matrix::zeros(units, batch);
            let mut da_g = Matrix::zeros(units, batch);
            {
                let (dai, daf, dao, dag) =
                    (da_i.as_mut_slice(), da_f.as_mut_slice(), da_o.as_mut_slice(), da_g.as_mut_slice());
                let (i, f, o, g) = (s.i.as_slice(), s.f.as_slice(), s.o.as_slice(), s.g.as_slice());
                let tc = s.tanh_c.as_slice();
                let cp = c_prev.as_slice();
                let dh_s = dh.as_slice();
                let dc_s = dc.as_mut_slice();
                for k in 0..n {
                    let d_o = dh_s[k] * tc[k];
                    let d_c = dc_s[k] + dh_s[k] * o[k] * (1.0 - tc[k] * tc[k]);
                    dai[k] = d_c * g[k] * i[k] * (1.0 - i[k]);
                    daf[k] = d_c * cp[k] * f[k] * (1.0 - f[k]);
                    dao[k] = d_o * o[k] * (1.0 - o[k]);
                    dag[k] = d_c * i[k] * (1.0 - g[k] * g[k]);
                    // carried to step t-1
                    dc_s[k] = d_c * f[k];
                }
            }

            let x = inputs.row(t);
            grad.input.accumulate(&da_i, x, h_prev)?;
            grad.forget.accumulate(&da_f, x, h_prev)?;
            grad.output.accumulate(&da_o, x, h_prev)?;
            grad.candidate.accumulate(&da_g, x, h_prev)?;

            if t > 0 {
                let mut next = Matrix::zeros(units, batch);
                next.add_matmul_tn(&self.input.u, &da_i)?;
                next.add_matmul_tn(&self.forget.u, &da_f)?;
                next.add_matmul_tn(&self.output.u, &da_o)?;
                next.add_matmul_tn(&self.candidate.u, &da_g)?;
                dh = next;
            }
        }
        Ok(())
    }
}
