//! Feed-forward networks: `a⁽ⁱ⁾ = W⁽ⁱ⁾ h⁽ⁱ⁻¹⁾ + b⁽ⁱ⁾`, `h⁽ⁱ⁾ = σ(a⁽ⁱ⁾)`, with
//! `h⁽⁰⁾ = x` ranging over an input box.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::{Activation, Interval};
use crate::error::{Error, Result};

/// One affine layer followed by an optional activation.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// One row per neuron of this layer, one column per neuron of the previous one.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    /// `None` only for a final, purely affine output layer.
    pub activation: Option<Activation>,
}

impl Layer {
    pub fn width(&self) -> usize {
        self.bias.len()
    }

    fn affine(&self, h: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(h).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkModel {
    input_box: Vec<Interval>,
    layers: Vec<Layer>,
}

/// Pre- and postactivations of every layer for one input.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerState {
    pub input: Vec<f64>,
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl LayerState {
    pub fn output(&self) -> &[f64] {
        self.post.last().map(Vec::as_slice).unwrap_or(&self.input)
    }
}

/// Interval bounds on every pre- and postactivation.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationBounds {
    pub pre: Vec<Vec<Interval>>,
    pub post: Vec<Vec<Interval>>,
}

#[derive(Serialize, Deserialize)]
struct LayerRepr {
    #[serde(rename = "W")]
    weights: Vec<Vec<f64>>,
    b: Vec<f64>,
    #[serde(default)]
    activation: Option<serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkRepr {
    input_dim: usize,
    #[serde(default)]
    input_box: Option<Vec<[f64; 2]>>,
    layers: Vec<LayerRepr>,
}

fn activation_from_json(v: &serde_json::Value) -> Result<Activation> {
    #[derive(Deserialize)]
    struct Tagged {
        tag: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    }
    let t: Tagged = serde_json::from_value(v.clone())
        .map_err(|e| Error::MalformedNetwork(format!("activation entry: {e}")))?;
    Activation::from_tag(&t.tag, &t.params)
}

impl NetworkModel {
    /// Validates shapes: rows chain from `input_box.len()`, and only the last
    /// layer may lack an activation.
    pub fn new(input_box: Vec<Interval>, layers: Vec<Layer>) -> Result<Self> {
        if input_box.is_empty() {
            return Err(Error::MalformedNetwork("input dimension must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::MalformedNetwork("network has no layers".into()));
        }
        let mut prev = input_box.len();
        for (i, layer) in layers.iter().enumerate() {
            if layer.weights.len() != layer.bias.len() {
                return Err(Error::DimensionMismatch {
                    expected: layer.bias.len(),
                    got: layer.weights.len(),
                });
            }
            if layer.bias.is_empty() {
                return Err(Error::MalformedNetwork(format!("layer {} is empty", i + 1)));
            }
            for row in &layer.weights {
                if row.len() != prev {
                    return Err(Error::DimensionMismatch {
                        expected: prev,
                        got: row.len(),
                    });
                }
            }
            let finite = layer.weights.iter().flatten().chain(&layer.bias).all(|v| v.is_finite());
            if !finite {
                return Err(Error::MalformedNetwork(format!("layer {} has non-finite entries", i + 1)));
            }
            if layer.activation.is_none() && i + 1 != layers.len() {
                return Err(Error::MalformedNetwork(format!(
                    "hidden layer {} has no activation",
                    i + 1
                )));
            }
            prev = layer.width();
        }
        Ok(NetworkModel { input_box, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_box.len()
    }

    pub fn input_box(&self) -> &[Interval] {
        &self.input_box
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Number of layers with an activation.
    pub fn hidden_layers(&self) -> usize {
        self.layers.iter().filter(|l| l.activation.is_some()).count()
    }

    /// Width of the layer feeding layer `i` (0-based).
    pub fn fan_in(&self, i: usize) -> usize {
        if i == 0 {
            self.input_dim()
        } else {
            self.layers[i - 1].width()
        }
    }

    /// Same network over a different input box.
    pub fn with_input_box(&self, input_box: Vec<Interval>) -> Result<Self> {
        if input_box.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: input_box.len(),
            });
        }
        Ok(NetworkModel {
            input_box,
            layers: self.layers.clone(),
        })
    }

    pub fn forward(&self, x: &[f64]) -> Result<LayerState> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        for (v, iv) in x.iter().zip(&self.input_box) {
            if !iv.contains_within(*v, 1e-9 * (1.0 + iv.lo().abs().max(iv.hi().abs()))) {
                return Err(Error::OutOfDomain {
                    value: *v,
                    lo: iv.lo(),
                    hi: iv.hi(),
                });
            }
        }
        let mut state = LayerState {
            input: x.to_vec(),
            pre: Vec::with_capacity(self.layers.len()),
            post: Vec::with_capacity(self.layers.len()),
        };
        let mut h = x.to_vec();
        for layer in &self.layers {
            let a = layer.affine(&h);
            h = match &layer.activation {
                Some(act) => a.iter().map(|&z| act.eval(z)).collect(),
                None => a.clone(),
            };
            state.pre.push(a);
            state.post.push(h.clone());
        }
        Ok(state)
    }

    /// Layer-by-layer interval arithmetic from the input box.
    pub fn interval_propagate(&self) -> ActivationBounds {
        let mut bounds = ActivationBounds {
            pre: Vec::new(),
            post: Vec::new(),
        };
        let mut h = self.input_box.clone();
        for layer in &self.layers {
            let pre = affine_bounds(layer, &h);
            let post = post_bounds(layer, &pre);
            bounds.pre.push(pre);
            bounds.post.push(post.clone());
            h = post;
        }
        bounds
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let repr: NetworkRepr =
            serde_json::from_str(s).map_err(|e| Error::MalformedInput(format!("network JSON: {e}")))?;
        let input_box = match repr.input_box {
            Some(b) => {
                if b.len() != repr.input_dim {
                    return Err(Error::DimensionMismatch {
                        expected: repr.input_dim,
                        got: b.len(),
                    });
                }
                b.into_iter()
                    .map(|[lo, hi]| Interval::new(lo, hi))
                    .collect::<Result<Vec<_>>>()?
            }
            None => vec![Interval::unit(); repr.input_dim],
        };
        let layers = repr
            .layers
            .into_iter()
            .map(|l| {
                let activation = match &l.activation {
                    None | Some(serde_json::Value::Null) => None,
                    Some(v) => Some(activation_from_json(v)?),
                };
                Ok(Layer {
                    weights: l.weights,
                    bias: l.b,
                    activation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        NetworkModel::new(input_box, layers)
    }

    pub fn to_json_string(&self) -> String {
        let repr = NetworkRepr {
            input_dim: self.input_dim(),
            input_box: Some(self.input_box.iter().map(|iv| [iv.lo(), iv.hi()]).collect()),
            layers: self
                .layers
                .iter()
                .map(|l| LayerRepr {
                    weights: l.weights.clone(),
                    b: l.bias.clone(),
                    activation: l.activation.map(|a| {
                        serde_json::json!({ "tag": a.tag(), "params": a.params() })
                    }),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&repr).expect("network serializes")
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string() + "\n")?;
        Ok(())
    }
}

/// Bounds on `W h + b` for `h` in a box.
pub fn affine_bounds(layer: &Layer, h: &[Interval]) -> Vec<Interval> {
    layer
        .weights
        .iter()
        .zip(&layer.bias)
        .map(|(row, &b)| {
            let (mut lo, mut hi) = (b, b);
            for (&w, iv) in row.iter().zip(h) {
                if w >= 0.0 {
                    lo += w * iv.lo();
                    hi += w * iv.hi();
                } else {
                    lo += w * iv.hi();
                    hi += w * iv.lo();
                }
            }
            Interval::new(lo, hi.max(lo)).expect("finite affine bounds")
        })
        .collect()
}

/// Exact image of preactivation intervals under the layer's activation.
pub fn post_bounds(layer: &Layer, pre: &[Interval]) -> Vec<Interval> {
    match &layer.activation {
        Some(act) => pre.iter().map(|iv| act.range_on(iv)).collect(),
        None => pre.to_vec(),
    }
}

/// Random network: `input_dim` inputs on `[0, 1]`, hidden layers of the given
/// widths with activation `act`, and an optional affine output layer.
/// Weights are uniform in `[-4/fan_in, 4/fan_in]`, biases uniform in `[-1, 1]`.
pub fn make_random_net(
    input_dim: usize,
    hidden: &[usize],
    outputs: Option<usize>,
    act: Activation,
    seed: u64,
) -> Result<NetworkModel> {
    if input_dim == 0 || hidden.contains(&0) || outputs == Some(0) {
        return Err(Error::MalformedInput("layer sizes must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let mut prev = input_dim;
    let widths = hidden.iter().map(|&w| (w, Some(act))).chain(outputs.map(|w| (w, None)));
    for (width, activation) in widths {
        let c = 4.0 / prev as f64;
        let weights = (0..width)
            .map(|_| (0..prev).map(|_| rng.random_range(-c..=c)).collect())
            .collect();
        let bias = (0..width).map(|_| rng.random_range(-1.0..=1.0)).collect();
        layers.push(Layer {
            weights,
            bias,
            activation,
        });
        prev = width;
    }
    NetworkModel::new(vec![Interval::unit(); input_dim], layers)
}
