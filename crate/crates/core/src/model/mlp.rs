//! Forward and backward passes of the two-layer tanh/softmax perceptron that
//! backs classification experiments.

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::model::LayeredParams;

/// Borrowed view of an MLP's tensors, validated once.
#[derive(Debug, Clone, Copy)]
pub struct MlpView<'a> {
    w1: &'a [f64],
    b1: &'a [f64],
    w2: &'a [f64],
    b2: &'a [f64],
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl<'a> MlpView<'a> {
    pub fn new(params: &'a LayeredParams) -> Result<Self> {
        if params.total() != 4 {
            return Err(Error::Shape(format!(
                "expected 4 tensors (W1, b1, W2, b2), got {}",
                params.total()
            )));
        }
        let l = params.layers();
        let (hidden, input) = match l[0].shape.as_slice() {
            [h, i] => (*h, *i),
            s => return Err(Error::Shape(format!("W1 must be 2-D, got {s:?}"))),
        };
        let classes = match l[2].shape.as_slice() {
            [c, h] if *h == hidden => *c,
            s => {
                return Err(Error::Shape(format!(
                    "W2 shape {s:?} incompatible with hidden {hidden}"
                )))
            }
        };
        if l[1].shape != [hidden] || l[3].shape != [classes] {
            return Err(Error::Shape("bias shapes do not match weights".into()));
        }
        Ok(MlpView {
            w1: &l[0].values,
            b1: &l[1].values,
            w2: &l[2].values,
            b2: &l[3].values,
            input,
            hidden,
            classes,
        })
    }

    fn hidden_activations(&self, x: &[f64], out: &mut [f64]) {
        for (j, h) in out.iter_mut().enumerate() {
            let row = &self.w1[j * self.input..(j + 1) * self.input];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[j];
            *h = z.tanh();
        }
    }

    fn logits(&self, h: &[f64], out: &mut [f64]) {
        for (c, z) in out.iter_mut().enumerate() {
            let row = &self.w2[c * self.hidden..(c + 1) * self.hidden];
            *z = row.iter().zip(h).map(|(w, v)| w * v).sum::<f64>() + self.b2[c];
        }
    }

    /// Arg-max class; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut h = vec![0.0; self.hidden];
        let mut z = vec![0.0; self.classes];
        self.hidden_activations(x, &mut h);
        self.logits(&h, &mut z);
        argmax(&z)
    }

    /// Mean cross-entropy over `batch` and its gradient, accumulated into `grad`
    /// (which must be zeroed and shaped like the model).
    pub fn loss_and_grad(
        &self,
        samples: &[Sample],
        batch: &[usize],
        grad: &mut LayeredParams,
    ) -> f64 {
        let mut h = vec![0.0; self.hidden];
        let mut z = vec![0.0; self.classes];
        let mut dh = vec![0.0; self.hidden];
        let inv = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for &idx in batch {
            let s = &samples[idx];
            self.hidden_activations(&s.features, &mut h);
            self.logits(&h, &mut z);
            // softmax in place, stabilised by the max logit
            let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in z.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in z.iter_mut() {
                *v /= sum;
            }
            loss -= z[s.label].max(f64::MIN_POSITIVE).ln();
            z[s.label] -= 1.0;

            let layers = grad.layers_mut();
            dh.iter_mut().for_each(|v| *v = 0.0);
            {
                let (gw2, rest) = layers[2..].split_at_mut(1);
                let gw2 = &mut gw2[0].values;
                let gb2 = &mut rest[0].values;
                for c in 0..self.classes {
                    let d = z[c] * inv;
                    gb2[c] += d;
                    let row = &mut gw2[c * self.hidden..(c + 1) * self.hidden];
                    let wrow = &self.w2[c * self.hidden..(c + 1) * self.hidden];
                    for j in 0..self.hidden {
                        row[j] += d * h[j];
                        dh[j] += z[c] * wrow[j];
                    }
                }
            }
            let (gw1, rest) = layers[..2].split_at_mut(1);
            let gw1 = &mut gw1[0].values;
            let gb1 = &mut rest[0].values;
            for j in 0..self.hidden {
                let da = dh[j] * (1.0 - h[j] * h[j]) * inv;
                gb1[j] += da;
                let row = &mut gw1[j * self.input..(j + 1) * self.input];
                for (g, x) in row.iter_mut().zip(&s.features) {
                    *g += da * x;
                }
            }
        }
        loss * inv
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
