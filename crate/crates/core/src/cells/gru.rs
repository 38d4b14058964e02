use crate::error::{Error, Result};
use crate::numkit::{sigmoid, Matrix, Rng};

use super::{hadamard, GateParams};

/// GRU weights. The reset gate scales the previous hidden state inside the
/// candidate's recurrent term: `n = tanh(W_n x + U_n (r ⊙ h) + b_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams {
    pub update: GateParams,
    pub reset: GateParams,
    pub candidate: GateParams,
}

#[derive(Clone, Debug)]
pub struct GruStep {
    pub z: Matrix,
    pub r: Matrix,
    pub n: Matrix,
    /// `r ⊙ h_prev`
    pub rh: Matrix,
    pub h: Matrix,
}

#[derive(Clone, Debug)]
pub struct GruTrace {
    pub steps: Vec<GruStep>,
}

impl GruTrace {
    pub fn hidden(&self) -> impl Iterator<Item = &Matrix> {
        self.steps.iter().map(|s| &s.h)
    }

    pub fn final_hidden(&self) -> &Matrix {
        &self.steps.last().expect("trace covers at least one step").h
    }
}

impl GruParams {
    pub fn zeros(units: usize) -> Self {
        GruParams {
            update: GateParams::zeros(units),
            reset: GateParams::zeros(units),
            candidate: GateParams::zeros(units),
        }
    }

    pub fn init(rng: &mut Rng, units: usize) -> Result<Self> {
        Ok(GruParams {
            update: GateParams::init(rng, units)?,
            reset: GateParams::init(rng, units)?,
            candidate: GateParams::init(rng, units)?,
        })
    }

    pub fn units(&self) -> usize {
        self.update.units()
    }

    fn step(&self, x: &[f64], h_prev: &Matrix) -> Result<GruStep> {
        let z = self.update.preactivation(x, h_prev)?.map(sigmoid);
        let r = self.reset.preactivation(x, h_prev)?.map(sigmoid);
        let rh = hadamard(&r, h_prev);
        let n = self.candidate.preactivation(x, &rh)?.map(f64::tanh);
        let mut h = n.clone();
        for ((hv, &zv), &hp) in h.as_mut_slice().iter_mut().zip(z.as_slice()).zip(h_prev.as_slice()) {
            *hv = (1.0 - zv) * *hv + zv * hp;
        }
        Ok(GruStep { z, r, n, rh, h })
    }

    pub fn forward(&self, inputs: &Matrix) -> Result<GruTrace> {
        let zero = Matrix::zeros(self.units(), inputs.cols());
        let mut steps: Vec<GruStep> = Vec::with_capacity(inputs.rows());
        for t in 0..inputs.rows() {
            let h_prev = steps.last().map_or(&zero, |s| &s.h);
            let s = self.step(inputs.row(t), h_prev)?;
            steps.push(s);
        }
        Ok(GruTrace { steps })
    }

    pub fn final_hidden(&self, inputs: &Matrix) -> Result<Matrix> {
        if inputs.rows() == 0 {
            return Err(Error::Shape("empty window".into()));
        }
        let mut h = Matrix::zeros(self.units(), inputs.cols());
        for t in 0..inputs.rows() {
            h = self.step(inputs.row(t), &h)?.h;
        }
        Ok(h)
    }

    pub(crate) fn backward(&self, inputs: &Matrix, trace: &GruTrace, dh_last: Matrix, grad: &mut GruParams) -> Result<()> {
        let units = self.units();
        let batch = inputs.cols();
        let zero = Matrix::zeros(units, batch);
        let mut dh = dh_last;

        for t in (0..trace.steps.len()).rev() {
            let s = &trace.steps[t];
            let h_prev = if t > 0 { &trace.steps[t - 1].h } else { &zero };
            let n = units * batch;

            let mut da_n = Matrix::zeros(units, batch);
            let mut da_z = Matrix::zeros(units, batch);
            let mut dh_prev = Matrix::zeros(units, batch);
            {
                let (dan, daz, dhp) = (da_n.as_mut_slice(), da_z.as_mut_slice(), dh_prev.as_mut_slice());
                let (z, nn, hp, dh_s) = (s.z.as_slice(), s.n.as_slice(), h_prev.as_slice(), dh.as_slice());
                for k in 0..n {
                    dan[k] = dh_s[k] * (1.0 - z[k]) * (1.0 - nn[k] * nn[k]);
                    daz[k] = dh_s[k] * (hp[k] - nn[k]) * z[k] * (1.0 - z[k]);
                    dhp[k] = dh_s[k] * z[k];
                }
            }

            // gradient w.r.t. r ⊙ h_prev
            let mut d_rh = Matrix::zeros(units, batch);
            d_rh.add_matmul_tn(&self.candidate.u, &da_n)?;
            let mut da_r = Matrix::zeros(units, batch);
            {
                let (dar, dhp) = (da_r.as_mut_slice(), dh_prev.as_mut_slice());
                let (r, hp, drh) = (s.r.as_slice(), h_prev.as_slice(), d_rh.as_slice());
                for k in 0..n {
                    dar[k] = drh[k] * hp[k] * r[k] * (1.0 - r[k]);
                    dhp[k] += drh[k] * r[k];
                }
            }

            let x = inputs.row(t);
            let recurrent = (t > 0).then_some(h_prev);
            grad.update.accumulate(&da_z, x, recurrent)?;
            grad.reset.accumulate(&da_r, x, recurrent)?;
            grad.candidate.accumulate(&da_n, x, (t > 0).then_some(&s.rh))?;

            if t > 0 {
                dh_prev.add_matmul_tn(&self.update.u, &da_z)?;
                dh_prev.add_matmul_tn(&self.reset.u, &da_r)?;
                dh = dh_prev;
            }
        }
        Ok(())
    }
}
