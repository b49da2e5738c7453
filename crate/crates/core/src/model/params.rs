use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One named parameter tensor, stored row-major in a flat vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Layer {
    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Layer {
            name: name.into(),
            shape,
            values: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Ordered list of parameter tensors. Each tensor (weights and biases alike)
/// is one "layer" for the purposes of layer-wise detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredParams {
    layers: Vec<Layer>,
}

/// Per-layer deltas with the same structure as the model they belong to.
pub type Gradient = LayeredParams;

impl LayeredParams {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("a model needs at least one layer".into()));
        }
        for layer in &layers {
            let expected: usize = layer.shape.iter().product();
            if expected != layer.values.len() {
                return Err(Error::Shape(format!(
                    "layer {} has shape {:?} but {} values",
                    layer.name,
                    layer.shape,
                    layer.values.len()
                )));
            }
        }
        Ok(LayeredParams { layers })
    }

    /// All-zero tensor set shaped like `self`.
    pub fn zeros_like(&self) -> Self {
        LayeredParams {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.name.clone(), l.shape.clone()))
                .collect(),
        }
    }

    /// Number of layers (`total` in the detection rule).
    pub fn total(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn layer(&self, j: usize) -> &Layer {
        &self.layers[j]
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::len).sum()
    }

    /// Per-layer element counts, in order.
    pub fn layout(&self) -> Vec<usize> {
        self.layers.iter().map(Layer::len).collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            out.extend_from_slice(&layer.values);
        }
        out
    }

    /// Rebuilds a model with the structure of `self` from a flat vector.
    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "flat vector has {} entries, model has {}",
                flat.len(),
                self.num_params()
            )));
        }
        let mut out = self.clone();
        let mut offset = 0;
        for layer in &mut out.layers {
            let n = layer.values.len();
            layer.values.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(out)
    }

    pub fn is_congruent(&self, other: &LayeredParams) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.name == b.name && a.shape == b.shape)
    }

    pub fn check_congruent(&self, other: &LayeredParams) -> Result<()> {
        if self.is_congruent(other) {
            Ok(())
        } else {
            Err(Error::Shape(
                "models do not share layer names and shapes".into(),
            ))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.values.iter().all(|v| v.is_finite()))
    }

    /// `self += scale * other`
    pub fn axpy(&mut self, scale: f64, other: &LayeredParams) {
        debug_assert!(self.is_congruent(other));
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.values.iter_mut().zip(&b.values) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            for v in &mut layer.values {
                *v *= factor;
            }
        }
    }

    pub fn sub(&self, other: &LayeredParams) -> LayeredParams {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn squared_distance(&self, other: &LayeredParams) -> f64 {
        self.layers
            .iter()
            .zip(&other.layers)
            .flat_map(|(a, b)| a.values.iter().zip(&b.values))
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.values.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Equal-weight mean of congruent models.
    pub fn mean<'a, I>(models: I) -> Result<LayeredParams>
    where
        I: IntoIterator<Item = &'a LayeredParams>,
    {
        let mut iter = models.into_iter();
        let first = iter.next().ok_or(Error::Empty("no models to average"))?;
        let rest: Vec<&LayeredParams> = iter.collect();
        for m in &rest {
            first.check_congruent(m)?;
        }
        // accumulate offsets from the first model so identical inputs average exactly
        let mut acc = first.zeros_like();
        for m in &rest {
            acc.axpy(1.0, &m.sub(first));
        }
        acc.scale(1.0 / (rest.len() + 1) as f64);
        let mut out = first.clone();
        out.axpy(1.0, &acc);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

/// Names and shapes of the parameter tensors of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub layers: Vec<LayerSpec>,
}

impl ArchSpec {
    /// Two-layer perceptron `input -> hidden (tanh) -> classes (softmax)`,
    /// enumerated as the four tensors W1, b1, W2, b2.
    pub fn mlp(input: usize, hidden: usize, classes: usize) -> Self {
        let spec = |name: &str, shape: Vec<usize>| LayerSpec {
            name: name.to_string(),
            shape,
        };
        ArchSpec {
            layers: vec![
                spec("fc1.weight", vec![hidden, input]),
                spec("fc1.bias", vec![hidden]),
                spec("fc2.weight", vec![classes, hidden]),
                spec("fc2.bias", vec![classes]),
            ],
        }
    }

    /// Arbitrary flat layers, e.g. for a quadratic test objective.
    pub fn flat(sizes: &[usize]) -> Self {
        ArchSpec {
            layers: sizes
                .iter()
                .enumerate()
                .map(|(i, &n)| LayerSpec {
                    name: format!("layer{i}"),
                    shape: vec![n],
                })
                .collect(),
        }
    }
}

/// Deterministic initialisation, uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
///
/// For a `[out, in]` tensor `fan_in = in`. A 1-D tensor borrows the fan-in of
/// the closest preceding matrix (the usual bias convention) and falls back to
/// its own length when there is none.
pub fn init_model(arch: &ArchSpec, seed: u64) -> Result<LayeredParams> {
    if arch.layers.is_empty() {
        return Err(Error::Config("architecture lists no layers".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_fan_in = None;
    let mut layers = Vec::with_capacity(arch.layers.len());
    for spec in &arch.layers {
        if spec.shape.is_empty() || spec.shape.contains(&0) {
            return Err(Error::Config(format!(
                "layer {} has degenerate shape {:?}",
                spec.name, spec.shape
            )));
        }
        let fan_in = if spec.shape.len() >= 2 {
            let f = spec.shape[1..].iter().product::<usize>();
            last_fan_in = Some(f);
            f
        } else {
            last_fan_in.unwrap_or(spec.shape[0])
        };
        let bound = 1.0 / (fan_in as f64).sqrt();
        let len: usize = spec.shape.iter().product();
        let values = (0..len).map(|_| rng.random_range(-bound..=bound)).collect();
        layers.push(Layer {
            name: spec.name.clone(),
            shape: spec.shape.clone(),
            values,
        });
    }
    LayeredParams::new(layers)
}
