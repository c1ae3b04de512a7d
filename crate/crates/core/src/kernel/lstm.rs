//! Peephole LSTM cell (Graves, 2013 formulation).
//!
//! Gate pre-activations are stacked in blocks of `H` rows in the order
//! input, forget, cell candidate, output. Peepholes connect the previous
//! cell state to the input and forget gates and the new cell state to the
//! output gate.

use rand::Rng;

use crate::error::{Error, Result};

use super::{fill_normal, Scalar, Tensor};

const GATE_I: usize = 0;
const GATE_F: usize = 1;
const GATE_C: usize = 2;
const GATE_O: usize = 3;

const PEEP_I: usize = 0;
const PEEP_F: usize = 1;
const PEEP_O: usize = 2;

pub const FORGET_BIAS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<T> {
    /// `[4H, input]`
    pub w_x: Tensor<T>,
    /// `[4H, H]`
    pub w_h: Tensor<T>,
    /// `[3, H]`: input, forget, output peepholes.
    pub peep: Tensor<T>,
    /// `[4H]`
    pub b: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<T> {
    pub h: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Scalar> LstmState<T> {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![T::zero(); hidden],
            c: vec![T::zero(); hidden],
        }
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct LstmCache<T> {
    pub x: Vec<T>,
    pub h_prev: Vec<T>,
    pub c_prev: Vec<T>,
    i: Vec<T>,
    f: Vec<T>,
    g: Vec<T>,
    o: Vec<T>,
    pub c: Vec<T>,
    tanh_c: Vec<T>,
    pub h: Vec<T>,
}

impl<T: Scalar> LstmCache<T> {
    pub fn state(&self) -> LstmState<T> {
        LstmState {
            h: self.h.clone(),
            c: self.c.clone(),
        }
    }

    pub fn gates(&self) -> (&[T], &[T], &[T], &[T]) {
        (&self.i, &self.f, &self.g, &self.o)
    }
}

/// Gradients flowing out of one backward step.
#[derive(Debug, Clone)]
pub struct LstmGradStep<T> {
    pub dx: Vec<T>,
    pub dh_prev: Vec<T>,
    pub dc_prev: Vec<T>,
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

impl<T: Scalar> LstmParams<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w_x: Tensor::zeros(&[4 * hidden, input]),
            w_h: Tensor::zeros(&[4 * hidden, hidden]),
            peep: Tensor::zeros(&[3, hidden]),
            b: Tensor::zeros(&[4 * hidden]),
        }
    }

    /// Weights and peepholes `~ N(0, sigma²)`, forget-gate bias set to 5,
    /// other biases zero.
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, sigma: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(input, hidden);
        fill_normal(&mut p.w_x, sigma, rng);
        fill_normal(&mut p.w_h, sigma, rng);
        fill_normal(&mut p.peep, sigma, rng);
        p.set_forget_bias(FORGET_BIAS);
        p
    }

    pub fn set_forget_bias(&mut self, value: f64) {
        let h = self.hidden();
        for b in &mut self.b.data_mut()[GATE_F * h..(GATE_F + 1) * h] {
            *b = T::of(value);
        }
    }

    pub fn forget_bias(&self) -> &[T] {
        let h = self.hidden();
        &self.b.data()[GATE_F * h..(GATE_F + 1) * h]
    }

    pub fn hidden(&self) -> usize {
        self.w_h.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.cols()
    }

    pub fn num_params(&self) -> usize {
        self.w_x.len() + self.w_h.len() + self.peep.len() + self.b.len()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.hidden())
    }

    pub fn step(&self, x: &[T], prev: &LstmState<T>) -> Result<LstmCache<T>> {
        let hd = self.hidden();
        if x.len() != self.input_dim() || prev.h.len() != hd || prev.c.len() != hd {
            return Err(Error::Shape(format!(
                "lstm step expects x[{}], h[{hd}], c[{hd}]; got x[{}], h[{}], c[{}]",
                self.input_dim(),
                x.len(),
                prev.h.len(),
                prev.c.len()
            )));
        }
        Ok(self.step_unchecked(x, &prev.h, &prev.c))
    }

    pub(crate) fn step_unchecked(&self, x: &[T], h_prev: &[T], c_prev: &[T]) -> LstmCache<T> {
        let hd = self.hidden();
        let mut a = vec![T::zero(); 4 * hd];
        self.w_x.matvec(x, &mut a);
        let mut ah = vec![T::zero(); 4 * hd];
        self.w_h.matvec(h_prev, &mut ah);
        for ((a, &r), &b) in a.iter_mut().zip(&ah).zip(self.b.data()) {
            *a += r + b;
        }
        let peep = |k: usize| self.peep.row(k);
        let mut i = vec![T::zero(); hd];
        let mut f = vec![T::zero(); hd];
        let mut g = vec![T::zero(); hd];
        let mut o = vec![T::zero(); hd];
        let mut c = vec![T::zero(); hd];
        let mut tanh_c = vec![T::zero(); hd];
        let mut h = vec![T::zero(); hd];
        for k in 0..hd {
            i[k] = sigmoid(a[GATE_I * hd + k] + peep(PEEP_I)[k] * c_prev[k]);
            f[k] = sigmoid(a[GATE_F * hd + k] + peep(PEEP_F)[k] * c_prev[k]);
            g[k] = a[GATE_C * hd + k].tanh();
            c[k] = f[k] * c_prev[k] + i[k] * g[k];
            o[k] = sigmoid(a[GATE_O * hd + k] + peep(PEEP_O)[k] * c[k]);
            tanh_c[k] = c[k].tanh();
            h[k] = o[k] * tanh_c[k];
        }
        LstmCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            i,
            f,
            g,
            o,
            c,
            tanh_c,
            h,
        }
    }

    /// Backpropagates `dh` (into this step's output) and `dc_next` (from the
    /// following step's cell), accumulating parameter gradients into `grad`.
    pub fn backward(
        &self,
        cache: &LstmCache<T>,
        dh: &[T],
        dc_next: &[T],
        grad: &mut LstmParams<T>,
    ) -> LstmGradStep<T> {
        let hd = self.hidden();
        let one = T::one();
        let mut da = vec![T::zero(); 4 * hd];
        let mut dc_prev = vec![T::zero(); hd];
        {
            let peep = &self.peep;
            let gpeep = grad.peep.data_mut();
            for k in 0..hd {
                let (i, f, g, o) = (cache.i[k], cache.f[k], cache.g[k], cache.o[k]);
                let tc = cache.tanh_c[k];
                let da_o = dh[k] * tc * o * (one - o);
                let dc = dc_next[k]
                    + dh[k] * o * (one - tc * tc)
                    + da_o * peep.row(PEEP_O)[k];
                let da_f = dc * cache.c_prev[k] * f * (one - f);
                let da_i = dc * g * i * (one - i);
                let da_g = dc * i * (one - g * g);
                dc_prev[k] = dc * f
                    + da_i * peep.row(PEEP_I)[k]
                    + da_f * peep.row(PEEP_F)[k];
                gpeep[PEEP_I * hd + k] += da_i * cache.c_prev[k];
                gpeep[PEEP_F * hd + k] += da_f * cache.c_prev[k];
                gpeep[PEEP_O * hd + k] += da_o * cache.c[k];
                da[GATE_I * hd + k] = da_i;
                da[GATE_F * hd + k] = da_f;
                da[GATE_C * hd + k] = da_g;
                da[GATE_O * hd + k] = da_o;
            }
        }
        grad.w_x.outer_acc(&da, &cache.x);
        grad.w_h.outer_acc(&da, &cache.h_prev);
        for (gb, &d) in grad.b.data_mut().iter_mut().zip(&da) {
            *gb += d;
        }
        let mut dx = vec![T::zero(); self.input_dim()];
        self.w_x.matvec_t_acc(&da, &mut dx);
        let mut dh_prev = vec![T::zero(); hd];
        self.w_h.matvec_t_acc(&da, &mut dh_prev);
        LstmGradStep {
            dx,
            dh_prev,
            dc_prev,
        }
    }
}
