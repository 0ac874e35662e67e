//! Layer building blocks shared by the level-1 and level-2 networks.
//!
//! Parameters live in a [`ParamSet`] under dotted names; a layer is just a
//! name prefix plus the helpers below.

use rand::Rng;

use crate::error::Result;
use crate::tensor::ops::{self, BatchStats};
use crate::tensor::{ParamSet, Tape, Tensor, Var};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;
pub const LEAKY_SLOPE: f64 = 0.2;
const INIT_STD: f64 = 0.02;

/// Batch-norm behaviour for a forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics, recorded for a later running-average update.
    Train,
    /// Running statistics.
    Eval,
}

/// One forward pass over a parameter set.
pub struct Forward<'a> {
    pub tape: &'a mut Tape,
    pub params: &'a ParamSet,
    pub mode: Mode,
    /// Bind every parameter as a constant, so no gradient reaches it.
    pub frozen: bool,
    pub stats: Vec<(String, BatchStats)>,
}

impl<'a> Forward<'a> {
    pub fn new(tape: &'a mut Tape, params: &'a ParamSet, mode: Mode) -> Self {
        Forward { tape, params, mode, frozen: false, stats: Vec::new() }
    }

    pub fn frozen(mut self) -> Self {
        self.frozen = true;
        self
    }

    pub fn param(&mut self, name: &str) -> Result<Var> {
        if self.frozen {
            let t = self.params.require(name)?;
            return self.tape.constant_from(t.shape().to_vec(), t.data().to_vec());
        }
        self.tape.param(self.params, name)
    }

    pub fn conv(&mut self, x: Var, name: &str, stride: usize, padding: usize) -> Result<Var> {
        let w = self.param(&format!("{name}.weight"))?;
        let y = ops::conv1d(self.tape, x, w, stride, padding)?;
        self.maybe_bias(y, name)
    }

    pub fn conv_transpose(&mut self, x: Var, name: &str, stride: usize, padding: usize) -> Result<Var> {
        let w = self.param(&format!("{name}.weight"))?;
        let y = ops::conv1d_transpose(self.tape, x, w, stride, padding)?;
        self.maybe_bias(y, name)
    }

    fn maybe_bias(&mut self, y: Var, name: &str) -> Result<Var> {
        let bias = format!("{name}.bias");
        if !self.params.contains(&bias) {
            return Ok(y);
        }
        let b = self.param(&bias)?;
        ops::bias_add(self.tape, y, b)
    }

    pub fn linear(&mut self, x: Var, name: &str) -> Result<Var> {
        let w = self.param(&format!("{name}.weight"))?;
        let b = self.param(&format!("{name}.bias"))?;
        ops::linear(self.tape, x, w, b)
    }

    pub fn batch_norm(&mut self, x: Var, name: &str) -> Result<Var> {
        let gamma = self.param(&format!("{name}.gamma"))?;
        let beta = self.param(&format!("{name}.beta"))?;
        match self.mode {
            Mode::Train => {
                let (y, stats) = ops::batch_norm_train(self.tape, x, gamma, beta, BN_EPS)?;
                self.stats.push((name.to_string(), stats));
                Ok(y)
            }
            Mode::Eval => {
                let mean = self.params.require(&format!("{name}.running_mean"))?.data();
                let var = self.params.require(&format!("{name}.running_var"))?.data();
                ops::batch_norm_eval(self.tape, x, gamma, beta, mean, var, BN_EPS)
            }
        }
    }

    /// Convolution, batch norm and leaky ReLU.
    pub fn conv_block(&mut self, x: Var, name: &str, stride: usize, padding: usize) -> Result<Var> {
        let y = self.conv(x, &format!("{name}.conv"), stride, padding)?;
        let y = self.batch_norm(y, &format!("{name}.bn"))?;
        ops::leaky_relu(self.tape, y, LEAKY_SLOPE)
    }

    /// Transposed convolution, batch norm and leaky ReLU.
    pub fn deconv_block(&mut self, x: Var, name: &str, stride: usize, padding: usize) -> Result<Var> {
        let y = self.conv_transpose(x, &format!("{name}.conv"), stride, padding)?;
        let y = self.batch_norm(y, &format!("{name}.bn"))?;
        ops::leaky_relu(self.tape, y, LEAKY_SLOPE)
    }
}

pub fn init_conv<R: Rng + ?Sized>(p: &mut ParamSet, rng: &mut R, name: &str, shape: [usize; 3], bias: bool) {
    p.insert(format!("{name}.weight"), Tensor::randn(shape.to_vec(), 0.0, INIT_STD, rng), true);
    if bias {
        p.insert(format!("{name}.bias"), Tensor::zeros(vec![shape[0]]), true);
    }
}

pub fn init_conv_transpose<R: Rng + ?Sized>(p: &mut ParamSet, rng: &mut R, name: &str, shape: [usize; 3], bias: bool) {
    p.insert(format!("{name}.weight"), Tensor::randn(shape.to_vec(), 0.0, INIT_STD, rng), true);
    if bias {
        p.insert(format!("{name}.bias"), Tensor::zeros(vec![shape[1]]), true);
    }
}

pub fn init_batch_norm<R: Rng + ?Sized>(p: &mut ParamSet, rng: &mut R, name: &str, channels: usize) {
    p.insert(format!("{name}.gamma"), Tensor::randn(vec![channels], 1.0, INIT_STD, rng), true);
    p.insert(format!("{name}.beta"), Tensor::zeros(vec![channels]), true);
    p.insert(format!("{name}.running_mean"), Tensor::zeros(vec![channels]), false);
    p.insert(format!("{name}.running_var"), Tensor::full(vec![channels], 1.0), false);
}

pub fn init_linear<R: Rng + ?Sized>(p: &mut ParamSet, rng: &mut R, name: &str, out: usize, inp: usize) {
    let bound = 1.0 / (inp as f64).sqrt();
    p.insert(format!("{name}.weight"), Tensor::uniform(vec![out, inp], -bound, bound, rng), true);
    p.insert(format!("{name}.bias"), Tensor::zeros(vec![out]), true);
}

/// Folds recorded batch statistics into the running buffers. The running
/// variance tracks the unbiased estimate.
pub fn update_running_stats(p: &mut ParamSet, stats: &[(String, BatchStats)]) -> Result<()> {
    fold_running_stats(p, stats, BN_MOMENTUM)
}

/// [`update_running_stats`] with an explicit momentum; 1 overwrites.
pub fn fold_running_stats(p: &mut ParamSet, stats: &[(String, BatchStats)], momentum: f64) -> Result<()> {
    for (name, s) in stats {
        let unbias = if s.count > 1 { s.count as f64 / (s.count - 1) as f64 } else { 1.0 };
        let rm = p.require_mut(&format!("{name}.running_mean"))?;
        for (r, m) in rm.data_mut().iter_mut().zip(&s.mean) {
            *r = (1.0 - momentum) * *r + momentum * m;
        }
        let rv = p.require_mut(&format!("{name}.running_var"))?;
        for (r, v) in rv.data_mut().iter_mut().zip(&s.var) {
            *r = (1.0 - momentum) * *r + momentum * v * unbias;
        }
    }
    Ok(())
}
