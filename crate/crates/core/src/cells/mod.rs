//! Recurrent cells (LSTM, GRU) with hand-derived backpropagation through
//! time, and the linear head that maps the last hidden state to a direct
//! multi-step forecast.
//!
//! Batches are laid out column-wise: an input batch is a `w × B` matrix whose
//! row `t` holds the scalar observed at step `t` for every sample, hidden
//! states are `units × B`, forecasts are `f × B`. Hidden and cell state start
//! at zero for every window.

mod gru;
mod lstm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{Matrix, Rng};

pub use gru::{GruParams, GruStep, GruTrace};
pub use lstm::{LstmParams, LstmStep, LstmTrace};

/// Default hidden width.
pub const DEFAULT_UNITS: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lstm,
    Gru,
}

impl ModelKind {
    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Gru => "gru",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lstm" => Ok(ModelKind::Lstm),
            "gru" => Ok(ModelKind::Gru),
            other => Err(Error::Argument(format!("unknown model kind '{other}'"))),
        }
    }
}

/// Weights of one gate: input weight `units×1`, recurrent weight
/// `units×units`, bias `units×1`.
#[derive(Clone, Debug, PartialEq)]
pub struct GateParams {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Matrix,
}

impl GateParams {
    pub fn zeros(units: usize) -> Self {
        GateParams {
            w: Matrix::zeros(units, 1),
            u: Matrix::zeros(units, units),
            b: Matrix::zeros(units, 1),
        }
    }

    /// Weights uniform in ±1/√units, bias zero.
    pub fn init(rng: &mut Rng, units: usize) -> Result<Self> {
        let bound = 1.0 / (units as f64).sqrt();
        Ok(GateParams {
            w: rng.uniform(-bound, bound, units, 1)?,
            u: rng.uniform(-bound, bound, units, units)?,
            b: Matrix::zeros(units, 1),
        })
    }

    pub fn units(&self) -> usize {
        self.b.rows()
    }

    fn check(&self, units: usize, name: &str) -> Result<()> {
        let ok = self.w.shape() == (units, 1)
            && self.u.shape() == (units, units)
            && self.b.shape() == (units, 1);
        if !ok {
            return Err(Error::Shape(format!(
                "gate '{name}' has W {:?}, U {:?}, b {:?}; expected units={units}",
                self.w.shape(),
                self.u.shape(),
                self.b.shape()
            )));
        }
        Ok(())
    }

    /// `W x + U h + b` for a batch: `x` has one entry per sample, `h` is
    /// `units × B`.
    pub(crate) fn preactivation(&self, x: &[f64], h: &Matrix) -> Result<Matrix> {
        let units = self.units();
        let batch = x.len();
        let mut a = Matrix::zeros(units, batch);
        for r in 0..units {
            let (wr, bias) = (self.w.get(r, 0), self.b.get(r, 0));
            for (out, &xv) in a.row_mut(r).iter_mut().zip(x) {
                *out = wr * xv + bias;
            }
        }
        a.add_matmul(&self.u, h)?;
        Ok(a)
    }

    /// Accumulate this gate's parameter gradients given the gradient `da` of
    /// its pre-activation, the step input `x` and the hidden state `h_prev`
    /// that fed the recurrent term.
    pub(crate) fn accumulate(&mut self, da: &Matrix, x: &[f64], h_prev: Option<&Matrix>) -> Result<()> {
        for r in 0..da.rows() {
            let row = da.row(r);
            let dw: f64 = row.iter().zip(x).map(|(d, xv)| d * xv).sum();
            let db: f64 = row.iter().sum();
            self.w.as_mut_slice()[r] += dw;
            self.b.as_mut_slice()[r] += db;
        }
        if let Some(h) = h_prev {
            self.u.add_matmul_nt(da, h)?;
        }
        Ok(())
    }

    fn tensors(&self) -> [&Matrix; 3] {
        [&self.w, &self.u, &self.b]
    }

    fn tensors_mut(&mut self) -> [&mut Matrix; 3] {
        [&mut self.w, &mut self.u, &mut self.b]
    }
}

/// Linear output layer: `W` is `f×units`, `b` is `f×1`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams {
    pub w: Matrix,
    pub b: Matrix,
}

impl DenseParams {
    pub fn zeros(horizon: usize, units: usize) -> Self {
        DenseParams { w: Matrix::zeros(horizon, units), b: Matrix::zeros(horizon, 1) }
    }

    pub fn init(rng: &mut Rng, horizon: usize, units: usize) -> Result<Self> {
        let bound = 1.0 / (units as f64).sqrt();
        Ok(DenseParams { w: rng.uniform(-bound, bound, horizon, units)?, b: Matrix::zeros(horizon, 1) })
    }

    pub fn horizon(&self) -> usize {
        self.w.rows()
    }

    pub fn units(&self) -> usize {
        self.w.cols()
    }

    /// `W h + b` for each column of `h`. No activation.
    pub fn forward(&self, h: &Matrix) -> Result<Matrix> {
        if h.rows() != self.units() || self.b.shape() != (self.horizon(), 1) {
            return Err(Error::Shape(format!(
                "dense head W {:?}, b {:?} applied to hidden {:?}",
                self.w.shape(),
                self.b.shape(),
                h.shape()
            )));
        }
        let mut y = Matrix::zeros(self.horizon(), h.cols());
        for r in 0..self.horizon() {
            let bias = self.b.get(r, 0);
            y.row_mut(r).iter_mut().for_each(|v| *v = bias);
        }
        y.add_matmul(&self.w, h)?;
        Ok(y)
    }

    /// Forecast from a single hidden vector.
    pub fn forward_vec(&self, h: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(&Matrix::column(h)?)?.into_vec())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellParams {
    Lstm(LstmParams),
    Gru(GruParams),
}

impl CellParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            CellParams::Lstm(_) => ModelKind::Lstm,
            CellParams::Gru(_) => ModelKind::Gru,
        }
    }

    pub fn zeros(kind: ModelKind, units: usize) -> Self {
        match kind {
            ModelKind::Lstm => CellParams::Lstm(LstmParams::zeros(units)),
            ModelKind::Gru => CellParams::Gru(GruParams::zeros(units)),
        }
    }

    pub fn init(kind: ModelKind, rng: &mut Rng, units: usize) -> Result<Self> {
        Ok(match kind {
            ModelKind::Lstm => CellParams::Lstm(LstmParams::init(rng, units)?),
            ModelKind::Gru => CellParams::Gru(GruParams::init(rng, units)?),
        })
    }

    pub fn units(&self) -> usize {
        match self {
            CellParams::Lstm(p) => p.units(),
            CellParams::Gru(p) => p.units(),
        }
    }

    /// Final hidden state for each column of `inputs` (`w × B`).
    pub fn final_hidden(&self, inputs: &Matrix) -> Result<Matrix> {
        match self {
            CellParams::Lstm(p) => p.final_hidden(inputs),
            CellParams::Gru(p) => p.final_hidden(inputs),
        }
    }

    fn gates(&self) -> Vec<(&'static str, &GateParams)> {
        match self {
            CellParams::Lstm(p) => vec![
                ("input", &p.input),
                ("forget", &p.forget),
                ("output", &p.output),
                ("candidate", &p.candidate),
            ],
            CellParams::Gru(p) => vec![("update", &p.update), ("reset", &p.reset), ("candidate", &p.candidate)],
        }
    }

    fn gates_mut(&mut self) -> Vec<&mut GateParams> {
        match self {
            CellParams::Lstm(p) => vec![&mut p.input, &mut p.forget, &mut p.output, &mut p.candidate],
            CellParams::Gru(p) => vec![&mut p.update, &mut p.reset, &mut p.candidate],
        }
    }
}

/// Trainable network (cell + head) together with gradient buffers of the
/// same shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    window: usize,
    pub cell: CellParams,
    pub head: DenseParams,
    cell_grad: CellParams,
    head_grad: DenseParams,
}

impl ModelState {
    /// Freshly initialized model drawn from `rng`.
    pub fn new(kind: ModelKind, units: usize, window: usize, horizon: usize, rng: &mut Rng) -> Result<Self> {
        check_dims(units, window, horizon)?;
        let cell = CellParams::init(kind, rng, units)?;
        let head = DenseParams::init(rng, horizon, units)?;
        ModelState::from_parts(cell, head, window)
    }

    /// All-zero parameters.
    pub fn zeroed(kind: ModelKind, units: usize, window: usize, horizon: usize) -> Result<Self> {
        check_dims(units, window, horizon)?;
        ModelState::from_parts(CellParams::zeros(kind, units), DenseParams::zeros(horizon, units), window)
    }

    pub fn from_parts(cell: CellParams, head: DenseParams, window: usize) -> Result<Self> {
        let units = cell.units();
        check_dims(units, window, head.horizon())?;
        for (name, gate) in cell.gates() {
            gate.check(units, name)?;
        }
        if head.units() != units || head.b.shape() != (head.horizon(), 1) {
            return Err(Error::Shape(format!(
                "dense head W {:?}, b {:?} does not fit {units} units",
                head.w.shape(),
                head.b.shape()
            )));
        }
        let cell_grad = CellParams::zeros(cell.kind(), units);
        let head_grad = DenseParams::zeros(head.horizon(), units);
        Ok(ModelState { window, cell, head, cell_grad, head_grad })
    }

    pub fn kind(&self) -> ModelKind {
        self.cell.kind()
    }

    pub fn units(&self) -> usize {
        self.cell.units()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn horizon(&self) -> usize {
        self.head.horizon()
    }

    fn check_batch(&self, inputs: &Matrix) -> Result<()> {
        if inputs.rows() != self.window {
            return Err(Error::Shape(format!(
                "input windows have length {}, model expects w={}",
                inputs.rows(),
                self.window
            )));
        }
        Ok(())
    }

    /// Forecast for every column of `inputs` (`w × B`), returned as `f × B`.
    pub fn predict(&self, inputs: &Matrix) -> Result<Matrix> {
        self.check_batch(inputs)?;
        let h = self.cell.final_hidden(inputs)?;
        self.head.forward(&h)
    }

    /// Forecast for a single window.
    pub fn predict_window(&self, window: &[f64]) -> Result<Vec<f64>> {
        if window.len() != self.window {
            return Err(Error::Shape(format!(
                "window has length {}, model expects w={}",
                window.len(),
                self.window
            )));
        }
        Ok(self.predict(&Matrix::column(window)?)?.into_vec())
    }

    /// MSE loss for one window and its gradients. Overwrites the gradient
    /// buffers unless `accumulate` is set.
    pub fn backward(&mut self, window: &[f64], target: &[f64], accumulate: bool) -> Result<f64> {
        if window.len() != self.window || target.len() != self.horizon() {
            return Err(Error::Shape(format!(
                "sample ({} inputs, {} targets) does not fit w={}, f={}",
                window.len(),
                target.len(),
                self.window,
                self.horizon()
            )));
        }
        self.backward_batch(&Matrix::column(window)?, &Matrix::column(target)?, accumulate)
    }

    /// Mean per-sample MSE over the batch (`inputs` is `w × B`, `targets`
    /// `f × B`). Gradients are the mean of the per-sample gradients.
    pub fn backward_batch(&mut self, inputs: &Matrix, targets: &Matrix, accumulate: bool) -> Result<f64> {
        self.check_batch(inputs)?;
        let f = self.horizon();
        let batch = inputs.cols();
        if targets.shape() != (f, batch) {
            return Err(Error::Shape(format!(
                "targets {:?} do not match f={f} with batch {batch}",
                targets.shape()
            )));
        }
        if !accumulate {
            self.zero_grads();
        }

        let (h_last, trace) = match &self.cell {
            CellParams::Lstm(p) => {
                let t = p.forward(inputs)?;
                (t.final_hidden().clone(), Trace::Lstm(t))
            }
            CellParams::Gru(p) => {
                let t = p.forward(inputs)?;
                (t.final_hidden().clone(), Trace::Gru(t))
            }
        };
        let y = self.head.forward(&h_last)?;

        let mut loss = 0.0;
        let mut dy = Matrix::zeros(f, batch);
        let scale = 2.0 / (f * batch) as f64;
        for ((d, &p), &t) in dy.as_mut_slice().iter_mut().zip(y.as_slice()).zip(targets.as_slice()) {
            let e = p - t;
            loss += e * e;
            *d = scale * e;
        }
        loss /= (f * batch) as f64;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {loss}")));
        }

        self.head_grad.w.add_matmul_nt(&dy, &h_last)?;
        for r in 0..f {
            let s: f64 = dy.row(r).iter().sum();
            self.head_grad.b.as_mut_slice()[r] += s;
        }
        let mut dh = Matrix::zeros(self.units(), batch);
        dh.add_matmul_tn(&self.head.w, &dy)?;

        match (&self.cell, &mut self.cell_grad, &trace) {
            (CellParams::Lstm(p), CellParams::Lstm(g), Trace::Lstm(t)) => p.backward(inputs, t, dh, g)?,
            (CellParams::Gru(p), CellParams::Gru(g), Trace::Gru(t)) => p.backward(inputs, t, dh, g)?,
            _ => unreachable!("gradient buffers always mirror the cell kind"),
        }
        Ok(loss)
    }

    /// Global L2 norm over every gradient buffer.
    pub fn grad_norm(&self) -> f64 {
        self.grads().iter().map(|g| g.sum_squares()).sum::<f64>().sqrt()
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for g in self.grads_mut() {
            g.scale_in_place(factor);
        }
    }

    pub fn zero_grads(&mut self) {
        for g in self.grads_mut() {
            g.fill(0.0);
        }
    }

    /// Parameter tensors in canonical order (cell gates, then head).
    pub fn params(&self) -> Vec<&Matrix> {
        let mut v: Vec<&Matrix> = self.cell.gates().into_iter().flat_map(|(_, g)| g.tensors()).collect();
        v.extend([&self.head.w, &self.head.b]);
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v: Vec<&mut Matrix> = self.cell.gates_mut().into_iter().flat_map(|g| g.tensors_mut()).collect();
        v.extend([&mut self.head.w, &mut self.head.b]);
        v
    }

    /// Gradient tensors, same order and shapes as [`ModelState::params`].
    pub fn grads(&self) -> Vec<&Matrix> {
        let mut v: Vec<&Matrix> = self.cell_grad.gates().into_iter().flat_map(|(_, g)| g.tensors()).collect();
        v.extend([&self.head_grad.w, &self.head_grad.b]);
        v
    }

    fn grads_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v: Vec<&mut Matrix> = self.cell_grad.gates_mut().into_iter().flat_map(|g| g.tensors_mut()).collect();
        v.extend([&mut self.head_grad.w, &mut self.head_grad.b]);
        v
    }

    /// Parameters and gradients borrowed together for an optimizer step.
    pub fn params_and_grads_mut(&mut self) -> (Vec<&mut Matrix>, Vec<&Matrix>) {
        let mut p: Vec<&mut Matrix> = self.cell.gates_mut().into_iter().flat_map(|g| g.tensors_mut()).collect();
        p.extend([&mut self.head.w, &mut self.head.b]);
        let mut g: Vec<&Matrix> = self.cell_grad.gates().into_iter().flat_map(|(_, g)| g.tensors()).collect();
        g.extend([&self.head_grad.w, &self.head_grad.b]);
        (p, g)
    }

    /// Human-readable tensor names, same order as [`ModelState::params`].
    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .cell
            .gates()
            .into_iter()
            .flat_map(|(gate, _)| ["w", "u", "b"].map(|t| format!("{}.{gate}.{t}", self.kind())))
            .collect();
        names.extend(["head.w".to_string(), "head.b".to_string()]);
        names
    }
}

enum Trace {
    Lstm(LstmTrace),
    Gru(GruTrace),
}

fn check_dims(units: usize, window: usize, horizon: usize) -> Result<()> {
    if units == 0 || window == 0 || horizon == 0 {
        return Err(Error::Argument(format!(
            "units, window and horizon must be positive (got {units}, {window}, {horizon})"
        )));
    }
    Ok(())
}

/// Elementwise product helper for `units × B` buffers.
pub(crate) fn hadamard(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = a.clone();
    for (x, &y) in out.as_mut_slice().iter_mut().zip(b.as_slice()) {
        *x *= y;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn head(w: &[&[f64]], b: &[f64]) -> DenseParams {
        DenseParams { w: Matrix::from_rows(w).unwrap(), b: Matrix::column(b).unwrap() }
    }

    #[test]
    fn dense_bias_passthrough() {
        let d = head(&[&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]], &[0.3, 0.7]);
        assert_eq!(d.forward_vec(&[0.5, -0.2, 0.9]).unwrap(), vec![0.3, 0.7]);
    }

    #[test]
    fn dense_identity() {
        let d = DenseParams { w: Matrix::identity(3), b: Matrix::zeros(3, 1) };
        assert_eq!(d.forward_vec(&[0.5, -0.2, 0.9]).unwrap(), vec![0.5, -0.2, 0.9]);
    }

    #[test]
    fn dense_matches_loop_oracle() {
        let mut rng = Rng::new(5);
        let d = DenseParams::init(&mut rng, 3, 6).unwrap();
        let d = DenseParams { b: rng.uniform(-1.0, 1.0, 3, 1).unwrap(), ..d };
        let h: Vec<f64> = (0..6).map(|_| rng.uniform_scalar(-1.0, 1.0)).collect();
        let mut want = vec![0.0; 3];
        for (k, out) in want.iter_mut().enumerate() {
            let mut s = d.b.get(k, 0);
            for (j, hv) in h.iter().enumerate() {
                s += d.w.get(k, j) * hv;
            }
            *out = s;
        }
        assert_eq!(d.forward_vec(&h).unwrap(), want);
    }

    #[test]
    fn dense_shape_error() {
        let d = DenseParams::zeros(2, 4);
        assert!(matches!(d.forward_vec(&[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn loss_of_exact_prediction_is_zero() {
        for kind in [ModelKind::Lstm, ModelKind::Gru] {
            let mut m = ModelState::zeroed(kind, 3, 4, 2).unwrap();
            m.head.b = Matrix::column(&[0.25, 0.75]).unwrap();
            let loss = m.backward(&[0.1, 0.2, 0.3, 0.4], &[0.25, 0.75], false).unwrap();
            assert_eq!(loss, 0.0);
            assert!(m.grads().last().unwrap().as_slice().iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn single_step_loss_value() {
        let mut m = ModelState::zeroed(ModelKind::Lstm, 2, 3, 1).unwrap();
        m.head.b = Matrix::column(&[0.8]).unwrap();
        let loss = m.backward(&[0.0, 0.0, 0.0], &[0.5], false).unwrap();
        assert!((loss - 0.09).abs() < 1e-15, "{loss}");
    }

    #[test]
    fn backward_overwrites_unless_accumulating() {
        let mut rng = Rng::new(9);
        let mut m = ModelState::new(ModelKind::Gru, 3, 4, 2, &mut rng).unwrap();
        let (x, y) = ([0.1, 0.5, 0.3, 0.9], [0.2, 0.4]);
        m.backward(&x, &y, false).unwrap();
        let once: Vec<Matrix> = m.grads().into_iter().cloned().collect();
        m.backward(&x, &y, false).unwrap();
        assert_eq!(once, m.grads().into_iter().cloned().collect::<Vec<_>>());
        m.backward(&x, &y, true).unwrap();
        for (g, g1) in m.grads().into_iter().zip(&once) {
            for (a, b) in g.as_slice().iter().zip(g1.as_slice()) {
                assert!((a - 2.0 * b).abs() <= 1e-15 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn wrong_lengths_are_shape_errors() {
        let mut m = ModelState::zeroed(ModelKind::Lstm, 2, 5, 2).unwrap();
        assert!(matches!(m.predict_window(&[0.0; 4]), Err(Error::Shape(_))));
        assert!(matches!(m.backward(&[0.0; 5], &[0.0; 3], false), Err(Error::Shape(_))));
        let g = ModelState::zeroed(ModelKind::Gru, 2, 5, 2).unwrap();
        assert!(matches!(g.predict_window(&[0.0; 4]), Err(Error::Shape(_))));
    }

    #[test]
    fn batch_gradient_is_mean_of_sample_gradients() {
        let mut rng = Rng::new(21);
        for kind in [ModelKind::Lstm, ModelKind::Gru] {
            let mut m = ModelState::new(kind, 4, 5, 2, &mut rng).unwrap();
            let inputs = rng.uniform(0.0, 1.0, 5, 3).unwrap();
            let targets = rng.uniform(0.0, 1.0, 2, 3).unwrap();
            let batch_loss = m.backward_batch(&inputs, &targets, false).unwrap();
            let batch_grads: Vec<Matrix> = m.grads().into_iter().cloned().collect();

            let mut losses = 0.0;
            m.zero_grads();
            for s in 0..3 {
                losses += m.backward(&inputs.col(s), &targets.col(s), true).unwrap();
            }
            assert!((batch_loss - losses / 3.0).abs() < 1e-14);
            for (g, b) in m.grads().into_iter().zip(&batch_grads) {
                for (x, y) in g.as_slice().iter().zip(b.as_slice()) {
                    assert!((x / 3.0 - y).abs() < 1e-13, "{x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn param_names_align_with_params() {
        let m = ModelState::zeroed(ModelKind::Lstm, 2, 3, 1).unwrap();
        assert_eq!(m.param_names().len(), m.params().len());
        assert_eq!(m.param_names()[0], "lstm.input.w");
        assert_eq!(m.grads().len(), 14);
        let g = ModelState::zeroed(ModelKind::Gru, 2, 3, 1).unwrap();
        assert_eq!(g.params().len(), 11);
        for (p, gr) in g.params().iter().zip(g.grads()) {
            assert_eq!(p.shape(), gr.shape());
        }
    }
}
