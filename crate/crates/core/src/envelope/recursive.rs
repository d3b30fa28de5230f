//! Recursive evaluation of the concave envelope on the unit cube.
//!
//! With `ẑ` the tie point of σ on `[b, wᵀ1 + b]`, the envelope is
//!
//! * `σ(wᵀx + b)` where `wᵀx + b ≥ ẑ`,
//! * `σ(b) + s·wᵀx` (secant slope `s`) where the ray through `x` reaches the
//!   tie point inside the cube,
//! * `σ(b) + x_i (G(x_{-i} / x_i) - σ(b))` otherwise, where `i` is the first
//!   maximal coordinate and `G` the envelope on the face `x_i = 1`.
//!
//! Faces are identified by the sorted set of coordinates fixed to one; their
//! tie points are memoised so repeated evaluations solve each one once.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use super::RegionLabel;
use crate::activation::{Activation, ConcaveEnvelope1d, Interval};
use crate::error::Result;

/// Coordinates below this are treated as zero in the perspective branch.
const PERSPECTIVE_GUARD: f64 = 1e-12;

#[derive(Debug)]
struct Face {
    b: f64,
    f_b: f64,
    tie: f64,
    slope: f64,
    env: ConcaveEnvelope1d,
}

#[derive(Debug, Default)]
struct TieCache(RwLock<HashMap<Vec<u32>, Arc<Face>>>);

#[derive(Debug)]
pub(super) struct Core {
    act: Activation,
    w: Vec<f64>,
    b: f64,
    top: f64,
    root: Arc<Face>,
    cache: TieCache,
}

impl Core {
    /// `act` must have a secant-then-function envelope on `[b, top]`.
    pub fn new(act: Activation, w: Vec<f64>, b: f64, top: f64) -> Result<Self> {
        let root = Arc::new(Self::make_face(&act, b, top)?);
        Ok(Core {
            act,
            w,
            b,
            top,
            root,
            cache: TieCache::default(),
        })
    }

    fn make_face(act: &Activation, b: f64, top: f64) -> Result<Face> {
        let env = ConcaveEnvelope1d::new(act, Interval::new(b.min(top), top)?)?;
        let tie = env
            .tie()
            .expect("faces of a secant-then-function range keep that orientation");
        let slope = env.secant_slope().unwrap_or(0.0);
        Ok(Face {
            b,
            f_b: act.eval(b),
            tie,
            slope,
            env,
        })
    }

    pub fn tie(&self) -> f64 {
        self.root.tie
    }

    fn face(&self, fixed: &[u32]) -> Result<Arc<Face>> {
        if fixed.is_empty() {
            return Ok(self.root.clone());
        }
        if let Some(f) = self.cache.0.read().expect("tie cache poisoned").get(fixed) {
            return Ok(f.clone());
        }
        // summing in index order keeps the face bias independent of the path
        let b = self.b + fixed.iter().map(|&j| self.w[j as usize]).sum::<f64>();
        let face = Arc::new(Self::make_face(&self.act, b, self.top)?);
        let mut guard = self.cache.0.write().expect("tie cache poisoned");
        Ok(guard.entry(fixed.to_vec()).or_insert(face).clone())
    }

    /// Label of `t` at the top level.
    pub fn classify(&self, t: &[f64]) -> RegionLabel {
        let face = &self.root;
        let lin: f64 = self.w.iter().zip(t).map(|(w, y)| w * y).sum();
        if face.b + lin >= face.tie {
            return RegionLabel::Rf;
        }
        match first_argmax(t) {
            Some((i, m)) if m >= PERSPECTIVE_GUARD && lin < (face.tie - face.b) * m => {
                RegionLabel::Ri(i)
            }
            _ => RegionLabel::Rl,
        }
    }

    /// Envelope value and, if asked, a supergradient.
    pub fn eval(&self, t: &[f64], with_grad: bool) -> Result<(f64, Vec<f64>)> {
        let active: Vec<usize> = (0..self.w.len()).collect();
        let mut fixed = Vec::new();
        self.eval_face(&active, t, &mut fixed, with_grad)
    }

    fn eval_face(
        &self,
        active: &[usize],
        y: &[f64],
        fixed: &mut Vec<u32>,
        with_grad: bool,
    ) -> Result<(f64, Vec<f64>)> {
        let face = self.face(fixed)?;
        let lin: f64 = active.iter().zip(y).map(|(&j, v)| self.w[j] * v).sum();
        let z = face.b + lin;
        let scaled = |s: f64| -> Vec<f64> {
            if with_grad {
                active.iter().map(|&j| s * self.w[j]).collect()
            } else {
                Vec::new()
            }
        };

        if z >= face.tie {
            let g = if with_grad {
                scaled(face.env.supergradient(z.min(self.top))?)
            } else {
                Vec::new()
            };
            return Ok((self.act.eval(z), g));
        }
        let (k, m) = first_argmax(y).expect("a point below the tie has an active coordinate");
        if m < PERSPECTIVE_GUARD || lin >= (face.tie - face.b) * m {
            return Ok((face.f_b + face.slope * lin, scaled(face.slope)));
        }

        let sub: Vec<usize> = active.iter().enumerate().filter(|&(p, _)| p != k).map(|(_, &j)| j).collect();
        let y_sub: Vec<f64> = y
            .iter()
            .enumerate()
            .filter(|&(p, _)| p != k)
            .map(|(_, v)| (v / m).min(1.0))
            .collect();
        let pivot = active[k] as u32;
        let pos = fixed.partition_point(|&j| j < pivot);
        fixed.insert(pos, pivot);
        let (g_val, g_grad) = self.eval_face(&sub, &y_sub, fixed, with_grad)?;
        fixed.remove(pos);

        let value = face.f_b + m * (g_val - face.f_b);
        if !with_grad {
            return Ok((value, Vec::new()));
        }
        let mut grad = Vec::with_capacity(active.len());
        let persp = g_val - face.f_b - g_grad.iter().zip(&y_sub).map(|(g, v)| g * v).sum::<f64>();
        let mut it = g_grad.into_iter();
        for p in 0..active.len() {
            grad.push(if p == k { persp } else { it.next().unwrap() });
        }
        Ok((value, grad))
    }
}

/// Index and value of the first maximal entry.
fn first_argmax(y: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in y.iter().enumerate() {
        if best.is_none_or(|(_, m)| v > m) {
            best = Some((i, v));
        }
    }
    best
}
