//! Recurrent cells and readout heads.
//!
//! Every cell exposes its forward map together with the exact one-step state
//! Jacobian `∂h'/∂h` and a vector–Jacobian product for its parameters. The
//! LSTM state is the concatenation `[c ‖ h]`, so its Jacobian is the full
//! `2·units × 2·units` matrix of `[c' ‖ h']` with respect to `[c ‖ h]`.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{axpy_slice, dot, Matrix, Vector};

static GENERATION: AtomicU64 = AtomicU64::new(1);

fn next_generation() -> u64 {
    GENERATION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Linear,
    Tanh,
    Lstm,
}

impl CellKind {
    fn gate_blocks(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            _ => 1,
        }
    }
}

/// Recurrent weights `Ψ`.
///
/// Plain cells hold one block: `h' = φ(W_in x + W_rec h + b)`. The LSTM
/// stacks the input, forget, candidate and output gate blocks (in that
/// order) along the rows of `w_in`, `w_rec` and `bias`; `w_rec` acts on the
/// output half of the state only. Equality ignores the cache generation.
#[derive(Debug, Clone)]
pub struct RnnParams<S> {
    kind: CellKind,
    input_dim: usize,
    units: usize,
    pub(crate) w_in: Matrix<S>,
    pub(crate) w_rec: Matrix<S>,
    pub(crate) bias: Vector<S>,
    generation: u64,
}

impl<S: PartialEq> PartialEq for RnnParams<S> {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.input_dim == other.input_dim
            && self.units == other.units
            && self.w_in == other.w_in
            && self.w_rec == other.w_rec
            && self.bias == other.bias
    }
}

/// Gradient with the same layout as [`RnnParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct RnnGrads<S> {
    pub w_in: Matrix<S>,
    pub w_rec: Matrix<S>,
    pub bias: Vector<S>,
}

impl<S: Scalar> RnnGrads<S> {
    pub fn zeros_like(p: &RnnParams<S>) -> Self {
        Self {
            w_in: Matrix::zeros(p.w_in.rows(), p.w_in.cols()),
            w_rec: Matrix::zeros(p.w_rec.rows(), p.w_rec.cols()),
            bias: Vector::zeros(p.bias.len()),
        }
    }

    pub fn clear(&mut self) {
        self.w_in.fill(S::zero());
        self.w_rec.fill(S::zero());
        self.bias.fill(S::zero());
    }

    pub fn blocks(&self) -> [&[S]; 3] {
        [self.w_in.as_slice(), self.w_rec.as_slice(), self.bias.as_slice()]
    }

    pub fn add_scaled(&mut self, a: S, other: &Self) -> Result<()> {
        self.w_in.add_scaled(a, &other.w_in)?;
        self.w_rec.add_scaled(a, &other.w_rec)?;
        self.bias.axpy(a, &other.bias)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<S> {
        Ok(self
            .w_in
            .max_abs_diff(&other.w_in)?
            .max(self.w_rec.max_abs_diff(&other.w_rec)?)
            .max(self.bias.max_abs_diff(&other.bias)?))
    }
}

impl<S: Scalar> RnnParams<S> {
    /// Seeded initialisation: every entry uniform in `±1/√units`; the LSTM
    /// forget-gate bias starts at 1.
    pub fn init<R: Rng>(kind: CellKind, input_dim: usize, units: usize, rng: &mut R) -> Self {
        let rows = kind.gate_blocks() * units;
        let bound = 1.0 / (units as f64).sqrt();
        let mut draw = |n: usize| -> Vec<S> { (0..n).map(|_| S::lit(rng.gen_range(-bound..bound))).collect() };
        let w_in = Matrix::from_vec(rows, input_dim, draw(rows * input_dim)).unwrap();
        let w_rec = Matrix::from_vec(rows, units, draw(rows * units)).unwrap();
        let mut bias = Vector::from_vec(draw(rows));
        if kind == CellKind::Lstm {
            for u in 0..units {
                bias[units + u] = S::one();
            }
        }
        Self {
            kind,
            input_dim,
            units,
            w_in,
            w_rec,
            bias,
            generation: next_generation(),
        }
    }

    pub fn from_parts(kind: CellKind, w_in: Matrix<S>, w_rec: Matrix<S>, bias: Vector<S>) -> Result<Self> {
        let units = w_rec.cols();
        let rows = kind.gate_blocks() * units;
        if w_rec.rows() != rows || w_in.rows() != rows || bias.len() != rows {
            return Err(shape_err(
                "RnnParams::from_parts",
                format!("{rows} gate rows"),
                format!(
                    "w_in {:?}, w_rec {:?}, bias {}",
                    w_in.shape(),
                    w_rec.shape(),
                    bias.len()
                ),
            ));
        }
        Ok(Self {
            kind,
            input_dim: w_in.cols(),
            units,
            w_in,
            w_rec,
            bias,
            generation: next_generation(),
        })
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn units(&self) -> usize {
        self.units
    }

    /// `|h|`: `units`, or `2·units` for the LSTM `[c ‖ h]` state.
    pub fn state_dim(&self) -> usize {
        match self.kind {
            CellKind::Lstm => 2 * self.units,
            _ => self.units,
        }
    }

    pub fn w_in(&self) -> &Matrix<S> {
        &self.w_in
    }

    pub fn w_rec(&self) -> &Matrix<S> {
        &self.w_rec
    }

    pub fn bias(&self) -> &Vector<S> {
        &self.bias
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Mutable access to the three parameter blocks. Invalidates every
    /// outstanding [`StepCache`].
    pub fn blocks_mut(&mut self) -> [&mut [S]; 3] {
        self.generation = next_generation();
        [
            self.w_in.as_mut_slice(),
            self.w_rec.as_mut_slice(),
            self.bias.as_mut_slice(),
        ]
    }

    pub fn zero_state(&self) -> Vector<S> {
        Vector::zeros(self.state_dim())
    }

    /// One forward step with its state Jacobian and parameter cache.
    pub fn step(&self, x: &Vector<S>, h: &Vector<S>) -> Result<StepOutput<S>> {
        if x.len() != self.input_dim {
            return Err(shape_err("step(x)", self.input_dim, x.len()));
        }
        if h.len() != self.state_dim() {
            return Err(shape_err("step(h)", self.state_dim(), h.len()));
        }
        let out = match self.kind {
            CellKind::Linear | CellKind::Tanh => self.step_plain(x, h),
            CellKind::Lstm => self.step_lstm(x, h),
        };
        if !out.next_state.is_finite() || !out.jac_state.is_finite() {
            return Err(Error::NonFinite {
                context: "cell step",
                step: 0,
            });
        }
        Ok(out)
    }

    /// Next state only, without Jacobian or cache.
    pub fn advance(&self, x: &Vector<S>, h: &Vector<S>) -> Result<Vector<S>> {
        if x.len() != self.input_dim {
            return Err(shape_err("advance(x)", self.input_dim, x.len()));
        }
        if h.len() != self.state_dim() {
            return Err(shape_err("advance(h)", self.state_dim(), h.len()));
        }
        let n = self.units;
        let next = match self.kind {
            CellKind::Linear => self.preactivation(x, h.as_slice()),
            CellKind::Tanh => self
                .preactivation(x, h.as_slice())
                .into_iter()
                .map(|v| v.tanh())
                .collect(),
            CellKind::Lstm => {
                let (c_prev, h_prev) = h.as_slice().split_at(n);
                let z = self.preactivation(x, h_prev);
                let sig = |v: S| S::one() / (S::one() + (-v).exp());
                let mut next = vec![S::zero(); 2 * n];
                for u in 0..n {
                    let c = sig(z[n + u]) * c_prev[u] + sig(z[u]) * z[2 * n + u].tanh();
                    next[u] = c;
                    next[n + u] = sig(z[3 * n + u]) * c.tanh();
                }
                next
            }
        };
        let next = Vector::from_vec(next);
        if !next.is_finite() {
            return Err(Error::NonFinite {
                context: "cell step",
                step: 0,
            });
        }
        Ok(next)
    }

    fn preactivation(&self, x: &Vector<S>, h_out: &[S]) -> Vec<S> {
        (0..self.w_in.rows())
            .map(|r| dot(self.w_in.row(r), x.as_slice()) + dot(self.w_rec.row(r), h_out) + self.bias[r])
            .collect()
    }

    fn step_plain(&self, x: &Vector<S>, h: &Vector<S>) -> StepOutput<S> {
        let n = self.units;
        let z = self.preactivation(x, h.as_slice());
        let (next, deriv): (Vec<S>, Vec<S>) = match self.kind {
            CellKind::Linear => (z, vec![S::one(); n]),
            _ => z
                .iter()
                .map(|&v| {
                    let a = v.tanh();
                    (a, S::one() - a * a)
                })
                .unzip(),
        };
        let mut jac = self.w_rec.clone();
        if self.kind != CellKind::Linear {
            for (r, &d) in deriv.iter().enumerate() {
                jac.row_mut(r).iter_mut().for_each(|v| *v *= d);
            }
        }
        StepOutput {
            next_state: Vector::from_vec(next),
            jac_state: jac,
            cache: StepCache {
                generation: self.generation,
                x: x.clone(),
                h_prev: h.clone(),
                gates: deriv,
            },
        }
    }

    fn step_lstm(&self, x: &Vector<S>, h: &Vector<S>) -> StepOutput<S> {
        let n = self.units;
        let (c_prev, h_prev) = h.as_slice().split_at(n);
        let z = self.preactivation(x, h_prev);
        let sig = |v: S| S::one() / (S::one() + (-v).exp());
        let ig: Vec<S> = z[..n].iter().map(|&v| sig(v)).collect();
        let fg: Vec<S> = z[n..2 * n].iter().map(|&v| sig(v)).collect();
        let gg: Vec<S> = z[2 * n..3 * n].iter().map(|&v| v.tanh()).collect();
        let og: Vec<S> = z[3 * n..].iter().map(|&v| sig(v)).collect();
        let c_next: Vec<S> = (0..n).map(|u| fg[u] * c_prev[u] + ig[u] * gg[u]).collect();
        let tc: Vec<S> = c_next.iter().map(|&v| v.tanh()).collect();
        let h_next: Vec<S> = (0..n).map(|u| og[u] * tc[u]).collect();

        // Block Jacobian of [c' ‖ h'] w.r.t. [c ‖ h].
        let one = S::one();
        let mut jac = Matrix::zeros(2 * n, 2 * n);
        for u in 0..n {
            let di = gg[u] * ig[u] * (one - ig[u]);
            let df = c_prev[u] * fg[u] * (one - fg[u]);
            let dg = ig[u] * (one - gg[u] * gg[u]);
            let do_ = tc[u] * og[u] * (one - og[u]);
            let dtc = og[u] * (one - tc[u] * tc[u]);
            // ∂c'/∂c and ∂h'/∂c are diagonal.
            jac.set(u, u, fg[u]);
            jac.set(n + u, u, dtc * fg[u]);
            let ui = self.w_rec.row(u);
            let uf = self.w_rec.row(n + u);
            let ugate = self.w_rec.row(2 * n + u);
            let uo = self.w_rec.row(3 * n + u);
            for k in 0..n {
                let dc_dh = di * ui[k] + df * uf[k] + dg * ugate[k];
                jac.set(u, n + k, dc_dh);
                jac.set(n + u, n + k, do_ * uo[k] + dtc * dc_dh);
            }
        }

        let mut gates = Vec::with_capacity(6 * n);
        gates.extend_from_slice(&ig);
        gates.extend_from_slice(&fg);
        gates.extend_from_slice(&gg);
        gates.extend_from_slice(&og);
        gates.extend_from_slice(&c_next);
        gates.extend_from_slice(&tc);

        let mut next = c_next;
        next.extend_from_slice(&h_next);
        StepOutput {
            next_state: Vector::from_vec(next),
            jac_state: jac,
            cache: StepCache {
                generation: self.generation,
                x: x.clone(),
                h_prev: h.clone(),
                gates,
            },
        }
    }

    /// `adjointᵀ · ∂h'/∂Ψ` for the step that produced `cache`.
    pub fn vjp_params(&self, cache: &StepCache<S>, adjoint: &Vector<S>) -> Result<RnnGrads<S>> {
        let mut grads = RnnGrads::zeros_like(self);
        self.accumulate_vjp(cache, adjoint, &mut grads)?;
        Ok(grads)
    }

    /// Adds `adjointᵀ · ∂h'/∂Ψ` into `grads` without materialising the
    /// parameter Jacobian.
    pub fn accumulate_vjp(&self, cache: &StepCache<S>, adjoint: &Vector<S>, grads: &mut RnnGrads<S>) -> Result<()> {
        if cache.generation != self.generation {
            return Err(Error::StaleCache {
                cached: cache.generation,
                current: self.generation,
            });
        }
        if adjoint.len() != self.state_dim() {
            return Err(shape_err("vjp_params", self.state_dim(), adjoint.len()));
        }
        let n = self.units;
        let one = S::one();
        let dz: Vec<S> = match self.kind {
            CellKind::Linear | CellKind::Tanh => adjoint.iter().zip(&cache.gates).map(|(&a, &d)| a * d).collect(),
            CellKind::Lstm => {
                let g = &cache.gates;
                let (ig, fg, gg, og) = (&g[..n], &g[n..2 * n], &g[2 * n..3 * n], &g[3 * n..4 * n]);
                let tc = &g[5 * n..6 * n];
                let c_prev = &cache.h_prev.as_slice()[..n];
                let (a_c, a_h) = adjoint.as_slice().split_at(n);
                let mut dz = vec![S::zero(); 4 * n];
                for u in 0..n {
                    let dc = a_c[u] + a_h[u] * og[u] * (one - tc[u] * tc[u]);
                    dz[u] = dc * gg[u] * ig[u] * (one - ig[u]);
                    dz[n + u] = dc * c_prev[u] * fg[u] * (one - fg[u]);
                    dz[2 * n + u] = dc * ig[u] * (one - gg[u] * gg[u]);
                    dz[3 * n + u] = a_h[u] * tc[u] * og[u] * (one - og[u]);
                }
                dz
            }
        };
        let h_rec = match self.kind {
            CellKind::Lstm => &cache.h_prev.as_slice()[n..],
            _ => cache.h_prev.as_slice(),
        };
        for (r, &d) in dz.iter().enumerate() {
            if d == S::zero() {
                continue;
            }
            axpy_slice(grads.w_in.row_mut(r), d, cache.x.as_slice());
            axpy_slice(grads.w_rec.row_mut(r), d, h_rec);
            grads.bias[r] += d;
        }
        Ok(())
    }
}

/// Forward values saved by [`RnnParams::step`] for the parameter VJP.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache<S> {
    generation: u64,
    x: Vector<S>,
    h_prev: Vector<S>,
    // plain: φ'(z); LSTM: [i, f, g, o, c', tanh c']
    gates: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput<S> {
    pub next_state: Vector<S>,
    /// `∂h'/∂h`, `|h| × |h|`.
    pub jac_state: Matrix<S>,
    pub cache: StepCache<S>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// `½‖ŷ − y‖²` on a linear output.
    Mse,
    /// Softmax cross-entropy over class logits.
    CrossEntropy,
    /// Per-channel sigmoid with binary cross-entropy summed over channels.
    Bits,
}

impl HeadKind {
    fn name(self) -> &'static str {
        match self {
            HeadKind::Mse => "mse",
            HeadKind::CrossEntropy => "cross_entropy",
            HeadKind::Bits => "bits",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target<S> {
    Regression(Vector<S>),
    Class(usize),
    Bits(Vector<S>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutLoss<S> {
    /// Linear output, softmax probabilities or per-channel sigmoids.
    pub prediction: Vector<S>,
    pub loss: S,
    /// `∂L/∂h` over the full state (zero on the LSTM cell half).
    pub grad_state: Vector<S>,
    /// `∂L/∂(W_out h + b_out)`.
    pub grad_logits: Vector<S>,
}

/// Linear readout of the output part of the state.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout<S> {
    head: HeadKind,
    state_dim: usize,
    pub(crate) weight: Matrix<S>,
    pub(crate) bias: Vector<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutGrads<S> {
    pub weight: Matrix<S>,
    pub bias: Vector<S>,
}

impl<S: Scalar> ReadoutGrads<S> {
    pub fn zeros_like(r: &Readout<S>) -> Self {
        Self {
            weight: Matrix::zeros(r.weight.rows(), r.weight.cols()),
            bias: Vector::zeros(r.bias.len()),
        }
    }

    pub fn clear(&mut self) {
        self.weight.fill(S::zero());
        self.bias.fill(S::zero());
    }

    pub fn blocks(&self) -> [&[S]; 2] {
        [self.weight.as_slice(), self.bias.as_slice()]
    }
}

impl<S: Scalar> Readout<S> {
    /// `units` is the width of the output half of a state of size `state_dim`.
    pub fn init<R: Rng>(head: HeadKind, state_dim: usize, units: usize, output_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (units as f64).sqrt();
        let weight = Matrix::from_vec(
            output_dim,
            units,
            (0..output_dim * units)
                .map(|_| S::lit(rng.gen_range(-bound..bound)))
                .collect(),
        )
        .unwrap();
        let bias = Vector::from_vec((0..output_dim).map(|_| S::lit(rng.gen_range(-bound..bound))).collect());
        Self {
            head,
            state_dim,
            weight,
            bias,
        }
    }

    pub fn from_parts(head: HeadKind, state_dim: usize, weight: Matrix<S>, bias: Vector<S>) -> Result<Self> {
        if weight.rows() != bias.len() || weight.cols() > state_dim {
            return Err(shape_err(
                "Readout::from_parts",
                format!("rows == {} and cols <= {state_dim}", bias.len()),
                format!("{:?}", weight.shape()),
            ));
        }
        Ok(Self {
            head,
            state_dim,
            weight,
            bias,
        })
    }

    pub fn head(&self) -> HeadKind {
        self.head
    }

    pub fn output_dim(&self) -> usize {
        self.bias.len()
    }

    pub fn weight(&self) -> &Matrix<S> {
        &self.weight
    }

    pub fn blocks_mut(&mut self) -> [&mut [S]; 2] {
        [self.weight.as_mut_slice(), self.bias.as_mut_slice()]
    }

    fn offset(&self) -> usize {
        self.state_dim - self.weight.cols()
    }

    pub fn logits(&self, h: &Vector<S>) -> Result<Vector<S>> {
        if h.len() != self.state_dim {
            return Err(shape_err("readout(h)", self.state_dim, h.len()));
        }
        let h_out = &h.as_slice()[self.offset()..];
        Ok(Vector::from_vec(
            (0..self.weight.rows())
                .map(|r| dot(self.weight.row(r), h_out) + self.bias[r])
                .collect(),
        ))
    }

    /// Prediction, loss and `∂L/∂h`. Without a target the loss and all
    /// gradients are zero.
    pub fn readout(&self, h: &Vector<S>, target: Option<&Target<S>>) -> Result<ReadoutLoss<S>> {
        let logits = self.logits(h)?;
        let out_dim = logits.len();
        let (prediction, loss, grad_logits) = match (self.head, target) {
            (HeadKind::Mse, None) => (logits, S::zero(), Vector::zeros(out_dim)),
            (HeadKind::Mse, Some(Target::Regression(y))) => {
                let diff = logits.sub(y)?;
                let loss = S::lit(0.5) * dot(diff.as_slice(), diff.as_slice());
                (logits, loss, diff)
            }
            (HeadKind::CrossEntropy, t) => {
                let max = logits.iter().fold(S::neg_infinity(), |m, &v| m.max(v));
                let exps: Vec<S> = logits.iter().map(|&v| (v - max).exp()).collect();
                let total: S = exps.iter().copied().sum();
                let probs = Vector::from_vec(exps.iter().map(|&e| e / total).collect());
                match t {
                    None => (probs, S::zero(), Vector::zeros(out_dim)),
                    Some(Target::Class(c)) => {
                        if *c >= out_dim {
                            return Err(Error::OutOfRange {
                                what: "class label",
                                index: *c,
                                len: out_dim,
                            });
                        }
                        let loss = -(logits[*c] - max - total.ln());
                        let mut grad = probs.clone();
                        grad[*c] -= S::one();
                        (probs, loss, grad)
                    }
                    Some(_) => return Err(Error::MissingTarget(self.head.name())),
                }
            }
            (HeadKind::Bits, t) => {
                let probs = Vector::from_vec(logits.iter().map(|&v| S::one() / (S::one() + (-v).exp())).collect());
                match t {
                    None => (probs, S::zero(), Vector::zeros(out_dim)),
                    Some(Target::Bits(y)) => {
                        if y.len() != out_dim {
                            return Err(shape_err("readout(bits)", out_dim, y.len()));
                        }
                        // Numerically stable BCE-with-logits.
                        let mut loss = S::zero();
                        for (&z, &yv) in logits.iter().zip(y.iter()) {
                            loss += z.max(S::zero()) - z * yv + (S::one() + (-z.abs()).exp()).ln();
                        }
                        let grad = probs.sub(y)?;
                        (probs, loss, grad)
                    }
                    Some(_) => return Err(Error::MissingTarget(self.head.name())),
                }
            }
            (HeadKind::Mse, Some(_)) => return Err(Error::MissingTarget(self.head.name())),
        };
        let mut grad_state = Vector::zeros(self.state_dim);
        let off = self.offset();
        for (r, &g) in grad_logits.iter().enumerate() {
            if g != S::zero() {
                axpy_slice(&mut grad_state.as_mut_slice()[off..], g, self.weight.row(r));
            }
        }
        Ok(ReadoutLoss {
            prediction,
            loss,
            grad_state,
            grad_logits,
        })
    }

    pub fn accumulate_grads(&self, h: &Vector<S>, grad_logits: &Vector<S>, grads: &mut ReadoutGrads<S>) -> Result<()> {
        if grad_logits.len() != self.output_dim() {
            return Err(shape_err("readout grads", self.output_dim(), grad_logits.len()));
        }
        let h_out = &h.as_slice()[self.offset()..];
        for (r, &g) in grad_logits.iter().enumerate() {
            if g != S::zero() {
                axpy_slice(grads.weight.row_mut(r), g, h_out);
                grads.bias[r] += g;
            }
        }
        Ok(())
    }
}

/// A recurrent cell together with its readout.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<S> {
    pub rnn: RnnParams<S>,
    pub readout: Readout<S>,
}

impl<S: Scalar> Model<S> {
    pub fn init<R: Rng>(
        kind: CellKind,
        head: HeadKind,
        input_dim: usize,
        units: usize,
        output_dim: usize,
        rng: &mut R,
    ) -> Self {
        let rnn = RnnParams::init(kind, input_dim, units, rng);
        let readout = Readout::init(head, rnn.state_dim(), units, output_dim, rng);
        Self { rnn, readout }
    }

    pub fn state_dim(&self) -> usize {
        self.rnn.state_dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_cell_jacobian_is_recurrent_block() {
        let w_rec = Matrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        let p = RnnParams::<f64>::from_parts(CellKind::Linear, Matrix::zeros(2, 1), w_rec.clone(), Vector::zeros(2))
            .unwrap();
        let out = p.step(&Vector::zeros(1), &Vector::from_f64(&[1.0, 1.0])).unwrap();
        assert_eq!(out.next_state, Vector::from_f64(&[0.5, 0.5]));
        assert_eq!(out.jac_state, w_rec);
    }

    #[test]
    fn tanh_at_origin_linearises_to_recurrent_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = RnnParams::<f64>::init(CellKind::Tanh, 3, 4, &mut rng);
        p.blocks_mut()[2].iter_mut().for_each(|b| *b = 0.0);
        let out = p.step(&Vector::zeros(3), &Vector::zeros(4)).unwrap();
        assert!(out.next_state.iter().all(|&v| v == 0.0));
        assert_eq!(out.jac_state, *p.w_rec());
    }

    #[test]
    fn zero_adjoint_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = RnnParams::<f64>::init(CellKind::Lstm, 2, 3, &mut rng);
        let out = p
            .step(&Vector::from_f64(&[0.3, -0.2]), &Vector::from_f64(&[0.1; 6]))
            .unwrap();
        let g = p.vjp_params(&out.cache, &Vector::zeros(6)).unwrap();
        assert!(g.blocks().iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = RnnParams::<f64>::init(CellKind::Tanh, 2, 2, &mut rng);
        let out = p.step(&Vector::zeros(2), &Vector::zeros(2)).unwrap();
        p.blocks_mut()[0][0] += 1.0;
        let err = p.vjp_params(&out.cache, &Vector::zeros(2)).unwrap_err();
        assert!(matches!(err, Error::StaleCache { .. }));
    }

    #[test]
    fn shape_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = RnnParams::<f64>::init(CellKind::Lstm, 2, 3, &mut rng);
        assert!(p.step(&Vector::zeros(3), &Vector::zeros(6)).is_err());
        assert!(p.step(&Vector::zeros(2), &Vector::zeros(3)).is_err());
    }

    #[test]
    fn mse_zero_at_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = Readout::<f64>::init(HeadKind::Mse, 3, 3, 2, &mut rng);
        let h = Vector::from_f64(&[0.2, -0.1, 0.4]);
        let y = r.logits(&h).unwrap();
        let out = r.readout(&h, Some(&Target::Regression(y))).unwrap();
        assert_eq!(out.loss, 0.0);
        assert!(out.grad_state.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_cross_entropy_is_ln_ten() {
        let r = Readout::<f64>::from_parts(HeadKind::CrossEntropy, 4, Matrix::zeros(10, 4), Vector::zeros(10)).unwrap();
        let out = r
            .readout(&Vector::from_f64(&[1.0, 2.0, 3.0, 4.0]), Some(&Target::Class(7)))
            .unwrap();
        assert!((out.loss - 10f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn missing_target_variant_is_rejected() {
        let r = Readout::<f64>::from_parts(HeadKind::Bits, 2, Matrix::zeros(2, 2), Vector::zeros(2)).unwrap();
        assert!(r.readout(&Vector::zeros(2), Some(&Target::Class(0))).is_err());
        let none = r.readout(&Vector::zeros(2), None).unwrap();
        assert_eq!(none.loss, 0.0);
        assert!(none.grad_state.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lstm_readout_ignores_cell_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = Model::<f64>::init(CellKind::Lstm, HeadKind::Mse, 2, 3, 2, &mut rng);
        let h = Vector::from_f64(&[0.5, 0.5, 0.5, 0.1, 0.2, 0.3]);
        let out = m
            .readout
            .readout(&h, Some(&Target::Regression(Vector::from_f64(&[1.0, -1.0]))))
            .unwrap();
        assert!(out.grad_state.as_slice()[..3].iter().all(|&v| v == 0.0));
    }
}
