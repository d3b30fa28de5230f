//! Separation of points from the convex hull of the graph of `σ(wᵀx + b)`.

use std::fmt;
use std::str::FromStr;

use super::{dot, NormalizedInstance, RawInstance, ReindexMap};
use crate::activation::{maximize_tilted, Activation, Interval};
use crate::error::{Error, Result};

/// Membership slack on the `y` coordinate.
pub const SEP_TOL: f64 = 1e-9;

/// Which overestimator (and underestimator) the oracle separates against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// The exact multivariate envelopes.
    Env,
    /// The one-dimensional envelopes composed with the affine argument.
    Hest,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "env" => Ok(Mode::Env),
            "hest" | "h-est" => Ok(Mode::Hest),
            other => Err(Error::MalformedInput(format!("unknown mode `{other}`"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Env => "env",
            Mode::Hest => "hest",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutSense {
    /// `y <= coeffsᵀx + constant`
    UpperBoundsY,
    /// `y >= coeffsᵀx + constant`
    LowerBoundsY,
}

/// A valid inequality between `x` and `y = σ(wᵀx + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cut {
    pub coeffs: Vec<f64>,
    pub constant: f64,
    pub sense: CutSense,
    /// Amount by which the separated point violates the cut.
    pub violation: f64,
}

impl Cut {
    pub fn affine(&self, x: &[f64]) -> f64 {
        dot(&self.coeffs, x) + self.constant
    }

    /// Non-negative iff `(x, y)` satisfies the cut.
    pub fn slack(&self, x: &[f64], y: f64) -> f64 {
        match self.sense {
            CutSense::UpperBoundsY => self.affine(x) - y,
            CutSense::LowerBoundsY => y - self.affine(x),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Separation {
    Inside,
    Cut(Cut),
    /// The point lies outside the estimator by `excess`, but no hyperplane
    /// through the computed gradient separates it (possible only at points
    /// where the estimator is not differentiable).
    Unseparated { excess: f64 },
}

/// `max over t in [0,1]^m of σ(wᵀt + b) - pᵀt`, for `w > 0`.
///
/// For fixed `z = wᵀt + b` the cheapest `pᵀt` is a fractional knapsack: fill
/// coordinates in increasing order of `p_k / w_k`. That makes the minimal
/// cost piecewise linear in `z`, and on each piece the problem is a tilted
/// one-dimensional maximisation.
pub fn max_affine_gap(act: &Activation, w: &[f64], b: f64, p: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&i, &j| (p[i] / w[i]).total_cmp(&(p[j] / w[j])).then(i.cmp(&j)));
    let mut best = act.eval(b);
    let (mut z, mut cost) = (b, 0.0);
    for k in order {
        let r = p[k] / w[k];
        let end = z + w[k];
        let seg = Interval::new(z, end.max(z)).expect("finite segment");
        let (_, v) = maximize_tilted(act, seg, r);
        best = best.max(v + r * z - cost);
        z = end;
        cost += p[k];
    }
    best
}

/// An instance together with its normalization, answering envelope queries
/// in original coordinates.
#[derive(Clone, Debug)]
pub struct Hull {
    raw: RawInstance,
    norm: NormalizedInstance,
    map: ReindexMap,
}

impl Hull {
    pub fn new(raw: RawInstance) -> Result<Self> {
        let (norm, map) = raw.normalize()?;
        Ok(Hull { raw, norm, map })
    }

    pub fn raw(&self) -> &RawInstance {
        &self.raw
    }

    pub fn normalized(&self) -> &NormalizedInstance {
        &self.norm
    }

    pub fn map(&self) -> &ReindexMap {
        &self.map
    }

    fn unit(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.raw.check_point(x)?;
        Ok(self.map.to_unit(x))
    }

    pub fn f(&self, x: &[f64]) -> f64 {
        self.raw.eval(x)
    }

    pub fn conc_env(&self, x: &[f64]) -> Result<f64> {
        self.norm.conc_env(&self.unit(x)?)
    }

    pub fn conc_env_supergrad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = self.norm.conc_env_supergrad(&self.unit(x)?)?;
        Ok(self.map.pull_back_gradient(&g))
    }

    pub fn conv_env(&self, x: &[f64]) -> Result<f64> {
        self.norm.conv_env(&self.unit(x)?)
    }

    pub fn conv_env_subgrad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = self.norm.conv_env_subgrad(&self.unit(x)?)?;
        Ok(self.map.pull_back_gradient(&g))
    }

    pub fn h(&self, x: &[f64]) -> Result<f64> {
        self.norm.h(&self.unit(x)?)
    }

    pub fn h_lower(&self, x: &[f64]) -> Result<f64> {
        self.norm.h_lower(&self.unit(x)?)
    }

    /// Certifies that `(x, y)` lies in the hull (up to [`SEP_TOL`]) or returns
    /// a valid cut violated by it.
    ///
    /// In [`Mode::Env`] the cut is the tangent plane of the violated envelope
    /// with its constant set to the exact maximum of `f - pᵀx` over the box, so
    /// it is valid even where the gradient formula is only one-sided. In
    /// [`Mode::Hest`] it is the tangent of the one-dimensional estimator.
    pub fn separate(&self, x: &[f64], y: f64, mode: Mode) -> Result<Separation> {
        let t = self.unit(x)?;
        let (w, b, act) = (self.norm.w(), self.norm.b(), *self.norm.activation());

        let (up, p) = match mode {
            Mode::Env => self.norm.conc_env_with_grad(&t)?,
            Mode::Hest => self.norm.h_with_grad(&t)?,
        };
        if y > up + SEP_TOL {
            let mut c = up - dot(&p, &t);
            if mode == Mode::Env {
                c = c.max(max_affine_gap(&act, w, b, &p));
            }
            return Ok(self.finish(p, c, CutSense::UpperBoundsY, x, y, y - up));
        }

        let (lo, q) = match mode {
            Mode::Env => self.norm.conv_env_with_grad(&t)?,
            Mode::Hest => self.norm.h_lower_with_grad(&t)?,
        };
        if y < lo - SEP_TOL {
            let mut c = lo - dot(&q, &t);
            if mode == Mode::Env {
                let neg_q: Vec<f64> = q.iter().map(|v| -v).collect();
                c = c.min(-max_affine_gap(&act.negate(), w, b, &neg_q));
            }
            return Ok(self.finish(q, c, CutSense::LowerBoundsY, x, y, lo - y));
        }
        Ok(Separation::Inside)
    }

    fn finish(&self, p: Vec<f64>, c: f64, sense: CutSense, x: &[f64], y: f64, excess: f64) -> Separation {
        let (coeffs, constant) = self.map.pull_back(&p, c);
        let mut cut = Cut {
            coeffs,
            constant,
            sense,
            violation: 0.0,
        };
        cut.violation = -cut.slack(x, y);
        if cut.violation > SEP_TOL {
            Separation::Cut(cut)
        } else {
            Separation::Unseparated { excess }
        }
    }
}

/// One-shot separation; see [`Hull::separate`].
pub fn separate(raw: &RawInstance, x: &[f64], y: f64, mode: Mode) -> Result<Separation> {
    Hull::new(raw.clone())?.separate(x, y, mode)
}
