//! Linear synthesiser `g(h; θ) = θ·[h ‖ 1]`.

use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tensor::{dot, Matrix, Tensor3, Vector};

/// Synthesiser weights: a `|h| × (|h|+1)` matrix whose last column is the
/// bias. Starts at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesiser<S> {
    theta: Matrix<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthGradient<S> {
    pub value: Vector<S>,
    /// `scale · value`, what the recurrent network consumes.
    pub scaled: Vector<S>,
}

/// `∇_θ g(h; θ)` in implicit form.
///
/// Slice `j` of the dense `(|h|, |h|, |h|+1)` tensor is zero except row `j`,
/// which equals `[h ‖ 1]`; only that input vector is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthGrad<S> {
    input: Vector<S>,
}

impl<S: Scalar> SynthGrad<S> {
    /// The augmented input `[h ‖ 1]`.
    pub fn input(&self) -> &Vector<S> {
        &self.input
    }

    pub fn state_dim(&self) -> usize {
        self.input.len() - 1
    }

    pub fn materialise(&self) -> Tensor3<S> {
        let n = self.state_dim();
        let m = n + 1;
        let mut t = Tensor3::zeros(n, n, m);
        for j in 0..n {
            t.slab_mut(j)[j * m..(j + 1) * m].copy_from_slice(self.input.as_slice());
        }
        t
    }

    /// `vᵀ ∇_θ g = v ⊗ [h ‖ 1]`.
    pub fn contract_row(&self, v: &Vector<S>) -> Result<Matrix<S>> {
        let n = self.state_dim();
        if v.len() != n {
            return Err(shape_err("SynthGrad::contract_row", n, v.len()));
        }
        Ok(crate::tensor::outer(v, &self.input))
    }
}

impl<S: Scalar> Synthesiser<S> {
    pub fn zeros(state_dim: usize) -> Self {
        Self {
            theta: Matrix::zeros(state_dim, state_dim + 1),
        }
    }

    pub fn from_theta(theta: Matrix<S>) -> Result<Self> {
        if theta.cols() != theta.rows() + 1 {
            return Err(shape_err(
                "Synthesiser::from_theta",
                format!("({0}, {0}+1)", theta.rows()),
                format!("{:?}", theta.shape()),
            ));
        }
        Ok(Self { theta })
    }

    pub fn state_dim(&self) -> usize {
        self.theta.rows()
    }

    pub fn theta(&self) -> &Matrix<S> {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut Matrix<S> {
        &mut self.theta
    }

    /// `θ·[h ‖ 1]` without the final-step rule.
    pub fn raw(&self, h: &Vector<S>) -> Result<Vector<S>> {
        let n = self.state_dim();
        if h.len() != n {
            return Err(shape_err("Synthesiser::predict", n, h.len()));
        }
        let hs = h.as_slice();
        Ok(Vector::from_vec(
            (0..n)
                .map(|r| {
                    let row = self.theta.row(r);
                    dot(&row[..n], hs) + row[n]
                })
                .collect(),
        ))
    }

    /// Synthetic gradient for `h`; identically zero at the final timestep.
    pub fn predict(&self, h: &Vector<S>, is_final: bool, scale: S) -> Result<SynthGradient<S>> {
        let value = if is_final {
            if h.len() != self.state_dim() {
                return Err(shape_err("Synthesiser::predict", self.state_dim(), h.len()));
            }
            Vector::zeros(self.state_dim())
        } else {
            self.raw(h)?
        };
        let scaled = value.scaled(scale);
        Ok(SynthGradient { value, scaled })
    }

    /// Shorthand for the unscaled prediction.
    pub fn value(&self, h: &Vector<S>, is_final: bool) -> Result<Vector<S>> {
        if is_final {
            if h.len() != self.state_dim() {
                return Err(shape_err("Synthesiser::predict", self.state_dim(), h.len()));
            }
            return Ok(Vector::zeros(self.state_dim()));
        }
        self.raw(h)
    }

    pub fn grad_theta(&self, h: &Vector<S>) -> Result<SynthGrad<S>> {
        if h.len() != self.state_dim() {
            return Err(shape_err("Synthesiser::grad_theta", self.state_dim(), h.len()));
        }
        Ok(SynthGrad { input: h.with_bias() })
    }

    /// `θ += a · Δ`
    pub fn add_scaled(&mut self, a: S, delta: &Matrix<S>) -> Result<()> {
        self.theta.add_scaled(a, delta)
    }
}

/// Free-standing form of [`Synthesiser::grad_theta`]; independent of `θ`.
pub fn grad_theta<S: Scalar>(h: &Vector<S>) -> SynthGrad<S> {
    SynthGrad { input: h.with_bias() }
}
