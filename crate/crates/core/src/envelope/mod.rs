//! Concave and convex envelopes of `x -> σ(wᵀx + b)` over a box.
//!
//! A [`RawInstance`] lives on an arbitrary box with weights of any sign.
//! [`RawInstance::normalize`] rescales it to the unit cube with strictly
//! positive weights; the envelope is then evaluated by the recursive region
//! formula in [`NormalizedInstance`], and [`Hull`] maps everything (values,
//! gradients, cuts) back to the original coordinates.

mod recursive;
mod separate;

use crate::activation::{Activation, ConcaveEnvelope1d, ConvexEnvelope1d, Interval, Shape};
use crate::error::{Error, Result};

use recursive::Core;
pub use separate::{max_affine_gap, separate, Cut, CutSense, Hull, Mode, Separation, SEP_TOL};

/// Unit-box membership slack.
pub const BOX_TOL: f64 = 1e-9;

/// Which piece of the region partition of the unit cube a point lies in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionLabel {
    /// The envelope equals the function.
    Rf,
    /// The envelope is linear along the ray from the origin.
    Rl,
    /// The envelope is the perspective of the face envelope with `x_i = 1`.
    Ri(usize),
}

/// `σ(wᵀx + b)` on a box, weights of any sign.
#[derive(Clone, Debug, PartialEq)]
pub struct RawInstance {
    pub w: Vec<f64>,
    pub b: f64,
    pub act: Activation,
    pub bbox: Vec<Interval>,
}

impl RawInstance {
    pub fn new(w: Vec<f64>, b: f64, act: Activation, bbox: Vec<Interval>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::MalformedInput("instance needs at least one weight".into()));
        }
        if w.len() != bbox.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                got: bbox.len(),
            });
        }
        if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::MalformedInput("weights and bias must be finite".into()));
        }
        Ok(RawInstance { w, b, act, bbox })
    }

    /// Instance over the unit cube.
    pub fn on_unit_box(w: Vec<f64>, b: f64, act: Activation) -> Result<Self> {
        let n = w.len();
        Self::new(w, b, act, vec![Interval::unit(); n])
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// `σ(wᵀx + b)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.act.eval(dot(&self.w, x) + self.b)
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        for (xi, iv) in x.iter().zip(&self.bbox) {
            let slack = BOX_TOL * (1.0 + iv.lo().abs().max(iv.hi().abs()));
            if !iv.contains_within(*xi, slack) {
                return Err(Error::OutOfDomain {
                    value: *xi,
                    lo: iv.lo(),
                    hi: iv.hi(),
                });
            }
        }
        Ok(())
    }

    /// Rescales to the unit cube with strictly positive weights.
    ///
    /// Coordinates with zero weight or a degenerate box side are dropped (the
    /// latter contribute a constant to the bias); a negative weight flips the
    /// coordinate.
    pub fn normalize(&self) -> Result<(NormalizedInstance, ReindexMap)> {
        let mut b = self.b;
        let mut w = Vec::new();
        let mut map = ReindexMap {
            n: self.dim(),
            kept: Vec::new(),
            scale: Vec::new(),
            offset: Vec::new(),
            fill: self.bbox.iter().map(|iv| iv.lo()).collect(),
        };
        for (i, (&wi, iv)) in self.w.iter().zip(&self.bbox).enumerate() {
            if wi == 0.0 {
                continue;
            }
            let width = iv.width();
            if width == 0.0 {
                b += wi * iv.lo();
                continue;
            }
            let (scale, offset) = if wi > 0.0 {
                (width, iv.lo())
            } else {
                (-width, iv.hi())
            };
            b += wi * offset;
            w.push(wi * scale);
            map.kept.push(i);
            map.scale.push(scale);
            map.offset.push(offset);
        }
        Ok((NormalizedInstance::new(w, b, self.act)?, map))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Affine correspondence between the unit cube of a normalized instance and
/// the original box: `x[kept[k]] = scale[k] * t[k] + offset[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReindexMap {
    n: usize,
    kept: Vec<usize>,
    scale: Vec<f64>,
    offset: Vec<f64>,
    /// Values used for dropped coordinates when mapping back.
    fill: Vec<f64>,
}

impl ReindexMap {
    pub fn original_dim(&self) -> usize {
        self.n
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    /// Whether coordinate `k` of the unit cube runs against the original one.
    pub fn is_flipped(&self, k: usize) -> bool {
        self.scale[k] < 0.0
    }

    /// Original-box point for a unit-cube point; dropped coordinates take their
    /// lower box end.
    pub fn to_original(&self, t: &[f64]) -> Vec<f64> {
        let mut x = self.fill.clone();
        for (k, &i) in self.kept.iter().enumerate() {
            x[i] = self.scale[k] * t[k] + self.offset[k];
        }
        x
    }

    /// Unit-cube point for an original-box point (clamped to the cube).
    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        self.kept
            .iter()
            .enumerate()
            .map(|(k, &i)| ((x[i] - self.offset[k]) / self.scale[k]).clamp(0.0, 1.0))
            .collect()
    }

    /// Rewrites the affine function `pᵀt + c` of unit-cube coordinates as
    /// `coeffsᵀx + constant` in original coordinates.
    pub fn pull_back(&self, p: &[f64], c: f64) -> (Vec<f64>, f64) {
        let mut coeffs = vec![0.0; self.n];
        let mut constant = c;
        for (k, &i) in self.kept.iter().enumerate() {
            coeffs[i] = p[k] / self.scale[k];
            constant -= p[k] * self.offset[k] / self.scale[k];
        }
        (coeffs, constant)
    }

    /// Chain rule for a gradient taken in unit-cube coordinates.
    pub fn pull_back_gradient(&self, g: &[f64]) -> Vec<f64> {
        self.pull_back(g, 0.0).0
    }
}

/// A concave-envelope evaluator in the secant-then-function orientation,
/// possibly applied at the mirrored point `1 - t`.
#[derive(Debug)]
struct Oriented {
    core: Core,
    flip: bool,
}

impl Oriented {
    fn new(act: Activation, w: &[f64], b: f64, top: f64) -> Result<Self> {
        let range = Interval::new(b, top)?;
        match act.shape_on(&range) {
            Shape::Convex | Shape::Concave | Shape::SShaped { .. } => Ok(Oriented {
                core: Core::new(act, w.to_vec(), b, top)?,
                flip: false,
            }),
            // σ(wᵀt + b) = σ̃(wᵀ(1 - t) - top) with σ̃(z) = σ(-z)
            Shape::ReflectedSShaped { .. } => Ok(Oriented {
                core: Core::new(act.mirror(), w.to_vec(), -top, -b)?,
                flip: true,
            }),
            Shape::Wave { .. } => Err(Error::UnsupportedShape {
                activation: act.to_string(),
                lo: b,
                hi: top,
            }),
        }
    }

    fn point(&self, t: &[f64]) -> Vec<f64> {
        if self.flip {
            t.iter().map(|v| 1.0 - v).collect()
        } else {
            t.to_vec()
        }
    }

    fn value(&self, t: &[f64]) -> Result<f64> {
        Ok(self.core.eval(&self.point(t), false)?.0)
    }

    fn value_and_grad(&self, t: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (v, mut g) = self.core.eval(&self.point(t), true)?;
        if self.flip {
            g.iter_mut().for_each(|x| *x = -*x);
        }
        Ok((v, g))
    }
}

/// `σ(wᵀt + b)` on the unit cube with every `w_i > 0`.
#[derive(Debug)]
pub struct NormalizedInstance {
    w: Vec<f64>,
    b: f64,
    act: Activation,
    arg_range: Interval,
    upper: Result<Oriented>,
    lower: Result<Oriented>,
    h_upper: Result<ConcaveEnvelope1d>,
    h_lower: Result<ConvexEnvelope1d>,
}

impl Clone for NormalizedInstance {
    fn clone(&self) -> Self {
        // rebuilding gives an empty tie-point cache, which is all we need
        NormalizedInstance::new(self.w.clone(), self.b, self.act).expect("validated at construction")
    }
}

impl NormalizedInstance {
    pub fn new(w: Vec<f64>, b: f64, act: Activation) -> Result<Self> {
        if let Some(bad) = w.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::MalformedInput(format!(
                "normalized weights must be positive and finite, got {bad}"
            )));
        }
        let top = b + w.iter().sum::<f64>();
        let arg_range = Interval::new(b, top)?;
        let upper = Oriented::new(act, &w, b, top);
        let lower = Oriented::new(act.negate(), &w, b, top);
        let h_upper = ConcaveEnvelope1d::new(&act, arg_range);
        let h_lower = ConvexEnvelope1d::new(&act, arg_range);
        Ok(NormalizedInstance {
            w,
            b,
            act,
            arg_range,
            upper,
            lower,
            h_upper,
            h_lower,
        })
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn activation(&self) -> &Activation {
        &self.act
    }

    /// `[b, wᵀ1 + b]`.
    pub fn arg_range(&self) -> Interval {
        self.arg_range
    }

    /// Tie point of σ on the argument range, when σ restricted to it has a
    /// secant-then-function envelope.
    pub fn tie(&self) -> Option<f64> {
        match &self.upper {
            Ok(o) if !o.flip => Some(o.core.tie()),
            _ => None,
        }
    }

    fn check(&self, t: &[f64]) -> Result<Vec<f64>> {
        if t.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: t.len(),
            });
        }
        t.iter()
            .map(|&v| {
                if (-BOX_TOL..=1.0 + BOX_TOL).contains(&v) {
                    Ok(v.clamp(0.0, 1.0))
                } else {
                    Err(Error::OutOfDomain {
                        value: v,
                        lo: 0.0,
                        hi: 1.0,
                    })
                }
            })
            .collect()
    }

    fn upper(&self) -> Result<&Oriented> {
        self.upper.as_ref().map_err(Clone::clone)
    }

    fn lower(&self) -> Result<&Oriented> {
        self.lower.as_ref().map_err(Clone::clone)
    }

    /// `σ(wᵀt + b)`.
    pub fn f(&self, t: &[f64]) -> f64 {
        self.act.eval(dot(&self.w, t) + self.b)
    }

    /// Region of the partition containing `t`. For concave-then-convex
    /// restrictions the partition is that of the mirrored instance, so the
    /// label describes the point `1 - t`.
    pub fn classify(&self, t: &[f64]) -> Result<RegionLabel> {
        let t = self.check(t)?;
        let up = self.upper()?;
        Ok(up.core.classify(&up.point(&t)))
    }

    pub fn conc_env(&self, t: &[f64]) -> Result<f64> {
        let t = self.check(t)?;
        self.upper()?.value(&t)
    }

    pub fn conc_env_supergrad(&self, t: &[f64]) -> Result<Vec<f64>> {
        Ok(self.conc_env_with_grad(t)?.1)
    }

    pub fn conc_env_with_grad(&self, t: &[f64]) -> Result<(f64, Vec<f64>)> {
        let t = self.check(t)?;
        self.upper()?.value_and_grad(&t)
    }

    pub fn conv_env(&self, t: &[f64]) -> Result<f64> {
        let t = self.check(t)?;
        Ok(-self.lower()?.value(&t)?)
    }

    pub fn conv_env_subgrad(&self, t: &[f64]) -> Result<Vec<f64>> {
        Ok(self.conv_env_with_grad(t)?.1)
    }

    pub fn conv_env_with_grad(&self, t: &[f64]) -> Result<(f64, Vec<f64>)> {
        let t = self.check(t)?;
        let (v, g) = self.lower()?.value_and_grad(&t)?;
        Ok((-v, g.into_iter().map(|x| -x).collect()))
    }

    /// One-dimensional concave envelope composed with the affine argument.
    pub fn h(&self, t: &[f64]) -> Result<f64> {
        Ok(self.h_with_grad(t)?.0)
    }

    pub fn h_supergrad(&self, t: &[f64]) -> Result<Vec<f64>> {
        Ok(self.h_with_grad(t)?.1)
    }

    pub fn h_with_grad(&self, t: &[f64]) -> Result<(f64, Vec<f64>)> {
        let t = self.check(t)?;
        let env = self.h_upper.as_ref().map_err(Clone::clone)?;
        let z = dot(&self.w, &t) + self.b;
        let s = env.supergradient(z)?;
        Ok((env.value(z)?, self.w.iter().map(|wi| s * wi).collect()))
    }

    /// Convex-side analogue of [`h`](Self::h).
    pub fn h_lower(&self, t: &[f64]) -> Result<f64> {
        Ok(self.h_lower_with_grad(t)?.0)
    }

    pub fn h_lower_with_grad(&self, t: &[f64]) -> Result<(f64, Vec<f64>)> {
        let t = self.check(t)?;
        let env = self.h_lower.as_ref().map_err(Clone::clone)?;
        let z = dot(&self.w, &t) + self.b;
        let s = env.subgradient(z)?;
        Ok((env.value(z)?, self.w.iter().map(|wi| s * wi).collect()))
    }
}
