//! One-dimensional concave and convex envelopes of an activation on an interval.

use super::{Activation, Interval, Shape, Side};
use crate::error::{Error, Result};

/// Relative bisection tolerance for tie points.
const TIE_TOL: f64 = 1e-12;

/// Points this close (relative to the interval scale) outside the interval are
/// clamped instead of rejected; affine pre-activations round by a few ulps.
const DOMAIN_SLACK: f64 = 1e-9;

fn unsupported(act: &Activation, iv: &Interval) -> Error {
    Error::UnsupportedShape {
        activation: act.to_string(),
        lo: iv.lo(),
        hi: iv.hi(),
    }
}

/// Smallest `t` in `iv` such that the concave envelope of `act` on `iv` is the
/// secant from `iv.lo()` to `t` followed by `act` itself.
///
/// Only defined when the restriction is convex, concave or convex-then-concave.
pub fn tie_point(act: &Activation, iv: Interval) -> Result<f64> {
    let (lo, hi) = (iv.lo(), iv.hi());
    if lo == hi {
        return Ok(lo);
    }
    match act.shape_on(&iv) {
        Shape::Concave => Ok(lo),
        Shape::Convex => Ok(if act.is_affine_on(&iv) { lo } else { hi }),
        Shape::SShaped { inflection } => {
            let f_lo = act.eval(lo);
            let gap = |z: f64| (act.eval(z) - f_lo) / (z - lo) - act.derivative(z, Side::Right);
            if gap(inflection) >= 0.0 {
                return Ok(inflection);
            }
            if gap(hi) < 0.0 {
                return Ok(hi);
            }
            let (mut a, mut b) = (inflection, hi);
            let tol = TIE_TOL * (hi - lo).max(1.0);
            while b - a > tol {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if gap(m) < 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            Ok(b)
        }
        Shape::ReflectedSShaped { .. } | Shape::Wave { .. } => Err(unsupported(act, &iv)),
    }
}

/// Secant-then-function envelope in the original orientation.
#[derive(Clone, Debug)]
struct Stfe {
    act: Activation,
    iv: Interval,
    tie: f64,
    f_lo: f64,
    slope: f64,
}

impl Stfe {
    fn new(act: Activation, iv: Interval) -> Result<Self> {
        let tie = tie_point(&act, iv)?;
        let f_lo = act.eval(iv.lo());
        let slope = if tie > iv.lo() {
            (act.eval(tie) - f_lo) / (tie - iv.lo())
        } else {
            act.derivative(iv.lo(), Side::Right)
        };
        Ok(Stfe {
            act,
            iv,
            tie,
            f_lo,
            slope,
        })
    }

    fn value(&self, z: f64) -> f64 {
        if z < self.tie {
            self.f_lo + self.slope * (z - self.iv.lo())
        } else {
            self.act.eval(z)
        }
    }

    fn supergradient(&self, z: f64) -> f64 {
        let lo = self.iv.lo();
        if z < self.tie || (z == self.tie && self.tie > lo) {
            self.slope
        } else if z == lo {
            self.act.derivative(z, Side::Right)
        } else {
            self.act.derivative(z, Side::Left)
        }
    }
}

/// Concave envelope of an activation restricted to an interval.
///
/// Concave-then-convex restrictions are handled by mirroring the domain, which
/// turns them into convex-then-concave ones.
#[derive(Clone, Debug)]
pub struct ConcaveEnvelope1d {
    act: Activation,
    iv: Interval,
    inner: Stfe,
    flipped: bool,
}

impl ConcaveEnvelope1d {
    pub fn new(act: &Activation, iv: Interval) -> Result<Self> {
        let (inner, flipped) = match act.shape_on(&iv) {
            Shape::ReflectedSShaped { .. } => (Stfe::new(act.mirror(), iv.negated())?, true),
            _ => (Stfe::new(*act, iv)?, false),
        };
        Ok(ConcaveEnvelope1d {
            act: *act,
            iv,
            inner,
            flipped,
        })
    }

    pub fn activation(&self) -> &Activation {
        &self.act
    }

    pub fn interval(&self) -> Interval {
        self.iv
    }

    /// The secant-then-function tie point, if the envelope has that orientation.
    pub fn tie(&self) -> Option<f64> {
        (!self.flipped).then_some(self.inner.tie)
    }

    /// Slope of the secant piece (or the right derivative at the left end when
    /// there is no secant piece). `None` for mirrored envelopes.
    pub fn secant_slope(&self) -> Option<f64> {
        (!self.flipped).then_some(self.inner.slope)
    }

    fn locate(&self, z: f64) -> Result<f64> {
        let slack = DOMAIN_SLACK * (1.0 + self.iv.lo().abs().max(self.iv.hi().abs()));
        if self.iv.contains_within(z, slack) {
            Ok(self.iv.clamp(z))
        } else {
            Err(Error::OutOfDomain {
                value: z,
                lo: self.iv.lo(),
                hi: self.iv.hi(),
            })
        }
    }

    pub fn value(&self, z: f64) -> Result<f64> {
        let z = self.locate(z)?;
        Ok(if self.flipped {
            self.inner.value(-z)
        } else {
            self.inner.value(z)
        })
    }

    /// A supergradient of the envelope at `z` (the secant slope on the secant
    /// piece, otherwise a one-sided derivative of the activation).
    pub fn supergradient(&self, z: f64) -> Result<f64> {
        let z = self.locate(z)?;
        Ok(if self.flipped {
            -self.inner.supergradient(-z)
        } else {
            self.inner.supergradient(z)
        })
    }
}

/// Convex envelope, computed as the negated concave envelope of `-σ`.
#[derive(Clone, Debug)]
pub struct ConvexEnvelope1d {
    upper: ConcaveEnvelope1d,
}

impl ConvexEnvelope1d {
    pub fn new(act: &Activation, iv: Interval) -> Result<Self> {
        Ok(ConvexEnvelope1d {
            upper: ConcaveEnvelope1d::new(&act.negate(), iv)?,
        })
    }

    pub fn interval(&self) -> Interval {
        self.upper.interval()
    }

    pub fn value(&self, z: f64) -> Result<f64> {
        Ok(-self.upper.value(z)?)
    }

    pub fn subgradient(&self, z: f64) -> Result<f64> {
        Ok(-self.upper.supergradient(z)?)
    }
}

pub fn conc_env_1d(act: &Activation, iv: Interval, z: f64) -> Result<f64> {
    ConcaveEnvelope1d::new(act, iv)?.value(z)
}

pub fn conc_env_1d_supergrad(act: &Activation, iv: Interval, z: f64) -> Result<f64> {
    ConcaveEnvelope1d::new(act, iv)?.supergradient(z)
}

pub fn conv_env_1d(act: &Activation, iv: Interval, z: f64) -> Result<f64> {
    ConvexEnvelope1d::new(act, iv)?.value(z)
}

pub fn conv_env_1d_subgrad(act: &Activation, iv: Interval, z: f64) -> Result<f64> {
    ConvexEnvelope1d::new(act, iv)?.subgradient(z)
}

/// Maximises `σ(z) - r z` over `iv`, returning `(argmax, max)`.
///
/// Works piecewise over the curvature pieces: a convex piece attains its
/// maximum at an endpoint, a concave piece where the derivative crosses `r`.
pub fn maximize_tilted(act: &Activation, iv: Interval, r: f64) -> (f64, f64) {
    let obj = |z: f64| act.eval(z) - r * z;
    let curv = act.curvature();
    let (lo, hi) = (iv.lo(), iv.hi());
    let mut edges = vec![lo];
    edges.extend(curv.breaks.iter().copied().filter(|&t| lo < t && t < hi));
    edges.push(hi);

    let first = curv.breaks.iter().filter(|&&t| t <= lo).count();
    let mut best = (lo, obj(lo));
    let mut consider = |z: f64| {
        let v = obj(z);
        if v > best.1 {
            best = (z, v);
        }
    };
    for (k, win) in edges.windows(2).enumerate() {
        let (a, b) = (win[0], win[1]);
        consider(b);
        if curv.piece_is_convex(first + k) || a == b {
            continue;
        }
        // concave piece: σ' - r is non-increasing
        if act.derivative(a, Side::Right) <= r || act.derivative(b, Side::Left) >= r {
            continue;
        }
        let (mut x, mut y) = (a, b);
        for _ in 0..200 {
            let m = 0.5 * (x + y);
            if m <= x || m >= y {
                break;
            }
            if act.derivative(m, Side::Left) > r {
                x = m;
            } else {
                y = m;
            }
        }
        consider(x);
        consider(y);
    }
    best
}
