//! Scalar activation catalog.
//!
//! Every catalogued activation is convex, concave, convex-then-concave
//! ("S-shaped") or, for SiLU, concave-convex-concave. An [`Activation`] is a
//! catalogued [`Kind`] together with two optional transformations: mirroring
//! the input (`z -> σ(-z)`) and negating the output (`z -> -σ(z)`). Their
//! composition is the point reflection `z -> -σ(-z)` used to turn concave
//! envelope machinery into convex envelope machinery.

mod envelope1d;
mod interval;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use envelope1d::{
    conc_env_1d, conc_env_1d_supergrad, conv_env_1d, conv_env_1d_subgrad, maximize_tilted,
    tie_point, ConcaveEnvelope1d, ConvexEnvelope1d,
};
pub use interval::Interval;

/// SELU constants.
pub const SELU_LAMBDA: f64 = 1.0507;
pub const SELU_ALPHA: f64 = 1.67326;

/// Positive root of `z * tanh(z / 2) = 2`; SiLU changes curvature at `±SILU_INFLECTION`.
pub const SILU_INFLECTION: f64 = 2.399_357_280_515_467_5;
/// Root of `1 + z (1 - s(z)) = 0`, the global minimiser of SiLU.
pub const SILU_ARGMIN: f64 = -1.278_464_542_761_073_7;

/// Which one-sided derivative to take.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn flipped(self) -> Self {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// Catalogued activation functions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kind {
    Sigmoid,
    Tanh,
    Softsign,
    PenalizedTanh { alpha: f64 },
    BipolarSigmoid,
    Relu,
    LeakyRelu { epsilon: f64 },
    Softplus,
    Elu { alpha: f64 },
    Selu { lambda: f64, alpha: f64 },
    Silu,
    Maxtanh,
}

/// Curvature pattern of an activation over the whole real line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Convex,
    Concave,
    /// Convex on `(-inf, inflection]`, concave on `[inflection, inf)`.
    SShaped { inflection: f64 },
    /// Concave on `(-inf, inflection]`, convex on `[inflection, inf)`.
    ReflectedSShaped { inflection: f64 },
    /// Two curvature changes; the first piece is convex iff `convex_first`.
    Wave {
        convex_first: bool,
        inflections: [f64; 2],
    },
}

impl Shape {
    /// Shapes whose concave envelope on every interval is a secant followed by
    /// the function.
    pub fn has_stfe(&self) -> bool {
        matches!(self, Shape::Convex | Shape::Concave | Shape::SShaped { .. })
    }
}

/// Sorted curvature breakpoints plus the curvature of the leftmost piece.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Curvature {
    pub convex_first: bool,
    pub breaks: Vec<f64>,
}

impl Curvature {
    /// Curvature of the piece with index `k` (0 = leftmost).
    pub fn piece_is_convex(&self, k: usize) -> bool {
        self.convex_first ^ (k % 2 == 1)
    }

    fn mirrored(&self) -> Self {
        let breaks: Vec<f64> = self.breaks.iter().rev().map(|t| -t).collect();
        Curvature {
            convex_first: self.convex_first ^ (self.breaks.len() % 2 == 1),
            breaks,
        }
    }

    fn negated(&self) -> Self {
        Curvature {
            convex_first: !self.convex_first,
            breaks: self.breaks.clone(),
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Kind {
    pub fn tag(&self) -> &'static str {
        match self {
            Kind::Sigmoid => "sigmoid",
            Kind::Tanh => "tanh",
            Kind::Softsign => "softsign",
            Kind::PenalizedTanh { .. } => "penalized_tanh",
            Kind::BipolarSigmoid => "bipolar_sigmoid",
            Kind::Relu => "relu",
            Kind::LeakyRelu { .. } => "leaky_relu",
            Kind::Softplus => "softplus",
            Kind::Elu { .. } => "elu",
            Kind::Selu { .. } => "selu",
            Kind::Silu => "silu",
            Kind::Maxtanh => "maxtanh",
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        match *self {
            Kind::PenalizedTanh { alpha } | Kind::Elu { alpha } => {
                out.insert("alpha".to_string(), alpha);
            }
            Kind::LeakyRelu { epsilon } => {
                out.insert("epsilon".to_string(), epsilon);
            }
            Kind::Selu { lambda, alpha } => {
                out.insert("lambda".to_string(), lambda);
                out.insert("alpha".to_string(), alpha);
            }
            _ => {}
        }
        out
    }

    fn validate(self) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            Kind::PenalizedTanh { alpha } if !(alpha > 0.0 && alpha < 1.0) => {
                bad(format!("penalized_tanh requires 0 < alpha < 1, got {alpha}"))
            }
            Kind::LeakyRelu { epsilon } if !(epsilon > 0.0 && epsilon < 1.0) => {
                bad(format!("leaky_relu requires 0 < epsilon < 1, got {epsilon}"))
            }
            Kind::Elu { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                bad(format!("elu requires alpha > 0, got {alpha}"))
            }
            Kind::Selu { lambda, alpha } if lambda != SELU_LAMBDA || alpha != SELU_ALPHA => bad(
                format!("selu uses lambda={SELU_LAMBDA}, alpha={SELU_ALPHA}; got {lambda}, {alpha}"),
            ),
            k => Ok(k),
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            Kind::Sigmoid => sigmoid(z),
            Kind::Tanh => z.tanh(),
            Kind::Softsign => z / (1.0 + z.abs()),
            Kind::PenalizedTanh { alpha } => {
                if z > 0.0 {
                    z.tanh()
                } else {
                    (alpha * z).tanh()
                }
            }
            Kind::BipolarSigmoid => (0.5 * z).tanh(),
            Kind::Relu => z.max(0.0),
            Kind::LeakyRelu { epsilon } => {
                if z > 0.0 {
                    z
                } else {
                    epsilon * z
                }
            }
            Kind::Softplus => z.max(0.0) + (-z.abs()).exp().ln_1p(),
            Kind::Elu { alpha } => {
                if z > 0.0 {
                    z
                } else {
                    alpha * z.exp_m1()
                }
            }
            Kind::Selu { lambda, alpha } => {
                lambda
                    * if z > 0.0 {
                        z
                    } else {
                        alpha * z.exp_m1()
                    }
            }
            Kind::Silu => z * sigmoid(z),
            Kind::Maxtanh => z.max(z.tanh()),
        }
    }

    /// One-sided derivative from the closed-form pieces.
    pub fn derivative(&self, z: f64, side: Side) -> f64 {
        // value of a piecewise derivative with a breakpoint at 0
        let at_kink = |left: f64, right: f64| match side {
            Side::Left => left,
            Side::Right => right,
        };
        match *self {
            Kind::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Kind::Tanh => 1.0 - z.tanh().powi(2),
            Kind::Softsign => 1.0 / (1.0 + z.abs()).powi(2),
            Kind::PenalizedTanh { alpha } => {
                let pos = |z: f64| 1.0 - z.tanh().powi(2);
                let neg = |z: f64| alpha * (1.0 - (alpha * z).tanh().powi(2));
                if z > 0.0 {
                    pos(z)
                } else if z < 0.0 {
                    neg(z)
                } else {
                    at_kink(neg(0.0), pos(0.0))
                }
            }
            Kind::BipolarSigmoid => 0.5 * (1.0 - (0.5 * z).tanh().powi(2)),
            Kind::Relu => {
                if z > 0.0 {
                    1.0
                } else if z < 0.0 {
                    0.0
                } else {
                    at_kink(0.0, 1.0)
                }
            }
            Kind::LeakyRelu { epsilon } => {
                if z > 0.0 {
                    1.0
                } else if z < 0.0 {
                    epsilon
                } else {
                    at_kink(epsilon, 1.0)
                }
            }
            Kind::Softplus => sigmoid(z),
            Kind::Elu { alpha } => {
                if z > 0.0 {
                    1.0
                } else if z < 0.0 {
                    alpha * z.exp()
                } else {
                    at_kink(alpha, 1.0)
                }
            }
            Kind::Selu { lambda, alpha } => {
                lambda
                    * if z > 0.0 {
                        1.0
                    } else if z < 0.0 {
                        alpha * z.exp()
                    } else {
                        at_kink(alpha, 1.0)
                    }
            }
            Kind::Silu => {
                let s = sigmoid(z);
                s * (1.0 + z * (1.0 - s))
            }
            Kind::Maxtanh => {
                if z < 0.0 {
                    1.0 - z.tanh().powi(2)
                } else {
                    1.0
                }
            }
        }
    }

    fn curvature(&self) -> Curvature {
        let (convex_first, breaks) = match *self {
            Kind::Relu | Kind::LeakyRelu { .. } | Kind::Softplus | Kind::Maxtanh => (true, vec![]),
            Kind::Elu { alpha } if alpha <= 1.0 => (true, vec![]),
            Kind::Elu { .. }
            | Kind::Selu { .. }
            | Kind::Sigmoid
            | Kind::Tanh
            | Kind::Softsign
            | Kind::PenalizedTanh { .. }
            | Kind::BipolarSigmoid => (true, vec![0.0]),
            Kind::Silu => (false, vec![-SILU_INFLECTION, SILU_INFLECTION]),
        };
        Curvature {
            convex_first,
            breaks,
        }
    }

    /// Exact image of `[lo, hi]`.
    fn range(&self, lo: f64, hi: f64) -> (f64, f64) {
        match self {
            Kind::Silu => {
                let lowest = self.eval(SILU_ARGMIN.clamp(lo, hi));
                (lowest, self.eval(lo).max(self.eval(hi)))
            }
            // everything else is non-decreasing
            _ => (self.eval(lo), self.eval(hi)),
        }
    }

    fn affine_on(&self, lo: f64, hi: f64) -> bool {
        if lo == hi {
            return true;
        }
        match self {
            Kind::Relu | Kind::LeakyRelu { .. } => hi <= 0.0 || lo >= 0.0,
            Kind::Elu { .. } | Kind::Selu { .. } | Kind::Maxtanh => lo >= 0.0,
            _ => false,
        }
    }
}

/// A catalogued activation, possibly mirrored and/or negated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Activation {
    kind: Kind,
    mirrored: bool,
    negated: bool,
}

impl From<Kind> for Activation {
    fn from(kind: Kind) -> Self {
        Activation {
            kind,
            mirrored: false,
            negated: false,
        }
    }
}

impl Activation {
    pub fn new(kind: Kind) -> Result<Self> {
        Ok(kind.validate()?.into())
    }

    pub fn sigmoid() -> Self {
        Kind::Sigmoid.into()
    }
    pub fn tanh() -> Self {
        Kind::Tanh.into()
    }
    pub fn softsign() -> Self {
        Kind::Softsign.into()
    }
    pub fn penalized_tanh(alpha: f64) -> Result<Self> {
        Self::new(Kind::PenalizedTanh { alpha })
    }
    pub fn bipolar_sigmoid() -> Self {
        Kind::BipolarSigmoid.into()
    }
    pub fn relu() -> Self {
        Kind::Relu.into()
    }
    pub fn leaky_relu(epsilon: f64) -> Result<Self> {
        Self::new(Kind::LeakyRelu { epsilon })
    }
    pub fn softplus() -> Self {
        Kind::Softplus.into()
    }
    pub fn elu(alpha: f64) -> Result<Self> {
        Self::new(Kind::Elu { alpha })
    }
    pub fn selu() -> Self {
        Kind::Selu {
            lambda: SELU_LAMBDA,
            alpha: SELU_ALPHA,
        }
        .into()
    }
    pub fn silu() -> Self {
        Kind::Silu.into()
    }
    pub fn maxtanh() -> Self {
        Kind::Maxtanh.into()
    }

    /// Every catalogued activation with its default parameters, plus the
    /// S-shaped ELU variant.
    pub fn catalog() -> Vec<Activation> {
        vec![
            Self::relu(),
            Self::leaky_relu(0.1).unwrap(),
            Self::maxtanh(),
            Self::softplus(),
            Self::elu(1.0).unwrap(),
            Self::softsign(),
            Self::tanh(),
            Self::penalized_tanh(0.25).unwrap(),
            Self::sigmoid(),
            Self::bipolar_sigmoid(),
            Self::elu(1.5).unwrap(),
            Self::selu(),
            Self::silu(),
        ]
    }

    /// Builds a catalogued activation from its tag and named parameters.
    pub fn from_tag(tag: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let norm: String = tag
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .collect::<String>()
            .to_ascii_lowercase();
        let mut params = params.clone();
        let mut take = |name: &str, default: Option<f64>| -> Result<f64> {
            match (params.remove(name), default) {
                (Some(v), _) => Ok(v),
                (None, Some(d)) => Ok(d),
                (None, None) => Err(Error::InvalidParameter(format!(
                    "{tag} requires parameter `{name}`"
                ))),
            }
        };
        let kind = match norm.as_str() {
            "sigmoid" | "logistic" => Kind::Sigmoid,
            "tanh" => Kind::Tanh,
            "softsign" => Kind::Softsign,
            "penalizedtanh" => Kind::PenalizedTanh {
                alpha: take("alpha", Some(0.25))?,
            },
            "bipolarsigmoid" => Kind::BipolarSigmoid,
            "relu" => Kind::Relu,
            "leakyrelu" => Kind::LeakyRelu {
                epsilon: take("epsilon", Some(0.01))?,
            },
            "softplus" => Kind::Softplus,
            "elu" => Kind::Elu {
                alpha: take("alpha", Some(1.0))?,
            },
            "selu" => Kind::Selu {
                lambda: take("lambda", Some(SELU_LAMBDA))?,
                alpha: take("alpha", Some(SELU_ALPHA))?,
            },
            "silu" | "swish" => Kind::Silu,
            "maxtanh" => Kind::Maxtanh,
            _ => return Err(Error::UnknownActivation(tag.to_string())),
        };
        if let Some(name) = params.keys().next() {
            return Err(Error::InvalidParameter(format!(
                "unexpected parameter `{name}` for {tag}"
            )));
        }
        Self::new(kind)
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn tag(&self) -> &'static str {
        self.kind.tag()
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        self.kind.params()
    }

    pub fn is_mirrored(&self) -> bool {
        self.mirrored
    }

    pub fn is_negated(&self) -> bool {
        self.negated
    }

    /// `z -> -σ(-z)`.
    pub fn reflect(&self) -> Self {
        Activation {
            kind: self.kind,
            mirrored: !self.mirrored,
            negated: !self.negated,
        }
    }

    /// `z -> σ(-z)`.
    pub fn mirror(&self) -> Self {
        Activation {
            mirrored: !self.mirrored,
            ..*self
        }
    }

    /// `z -> -σ(z)`.
    pub fn negate(&self) -> Self {
        Activation {
            negated: !self.negated,
            ..*self
        }
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        let arg = if self.mirrored { -z } else { z };
        let v = self.kind.eval(arg);
        if self.negated {
            -v
        } else {
            v
        }
    }

    /// One-sided derivative at `z`.
    pub fn derivative(&self, z: f64, side: Side) -> f64 {
        let (arg, side, chain) = if self.mirrored {
            (-z, side.flipped(), -1.0)
        } else {
            (z, side, 1.0)
        };
        let d = chain * self.kind.derivative(arg, side);
        if self.negated {
            -d
        } else {
            d
        }
    }

    pub(crate) fn curvature(&self) -> Curvature {
        let mut c = self.kind.curvature();
        if self.mirrored {
            c = c.mirrored();
        }
        if self.negated {
            c = c.negated();
        }
        c
    }

    /// Curvature pattern over the whole real line.
    pub fn shape(&self) -> Shape {
        let c = self.curvature();
        classify_pieces(c.convex_first, &c.breaks)
    }

    /// Curvature pattern of the restriction to `iv`.
    pub fn shape_on(&self, iv: &Interval) -> Shape {
        let c = self.curvature();
        let first_piece = c.breaks.iter().filter(|&&t| t <= iv.lo()).count();
        let inside: Vec<f64> = c
            .breaks
            .iter()
            .copied()
            .filter(|&t| iv.lo() < t && t < iv.hi())
            .collect();
        classify_pieces(c.piece_is_convex(first_piece), &inside)
    }

    /// Exact image `[min σ, max σ]` of the interval.
    pub fn range_on(&self, iv: &Interval) -> Interval {
        let (lo, hi) = if self.mirrored {
            (-iv.hi(), -iv.lo())
        } else {
            (iv.lo(), iv.hi())
        };
        let (a, b) = self.kind.range(lo, hi);
        let (a, b) = if self.negated { (-b, -a) } else { (a, b) };
        Interval::new(a, b).expect("activation image of a finite interval is finite")
    }

    /// Whether σ is affine on the whole interval (read off the piecewise form).
    pub fn is_affine_on(&self, iv: &Interval) -> bool {
        if self.mirrored {
            self.kind.affine_on(-iv.hi(), -iv.lo())
        } else {
            self.kind.affine_on(iv.lo(), iv.hi())
        }
    }
}

fn classify_pieces(convex_first: bool, breaks: &[f64]) -> Shape {
    match (breaks.len(), convex_first) {
        (0, true) => Shape::Convex,
        (0, false) => Shape::Concave,
        (1, true) => Shape::SShaped {
            inflection: breaks[0],
        },
        (1, false) => Shape::ReflectedSShaped {
            inflection: breaks[0],
        },
        _ => Shape::Wave {
            convex_first,
            inflections: [breaks[0], breaks[1]],
        },
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut base = self.tag().to_string();
        let params = self.params();
        if !params.is_empty() {
            let inner: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            base = format!("{base}({})", inner.join(", "));
        }
        match (self.mirrored, self.negated) {
            (false, false) => write!(f, "{base}"),
            (true, true) => write!(f, "reflect({base})"),
            (true, false) => write!(f, "mirror({base})"),
            (false, true) => write!(f, "negate({base})"),
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Serialize, Deserialize)]
struct ActivationRepr {
    tag: String,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "is_false")]
    mirrored: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    negated: bool,
}

impl Serialize for Activation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ActivationRepr {
            tag: self.tag().to_string(),
            params: self.params(),
            mirrored: self.mirrored,
            negated: self.negated,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Activation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = ActivationRepr::deserialize(d)?;
        let mut act = Activation::from_tag(&repr.tag, &repr.params).map_err(serde::de::Error::custom)?;
        act.mirrored = repr.mirrored;
        act.negated = repr.negated;
        Ok(act)
    }
}
