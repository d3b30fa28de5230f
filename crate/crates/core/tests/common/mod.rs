//! Oracles and generators shared by the integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stfe_hull::activation::{Activation, Interval, Shape, SILU_INFLECTION};
use stfe_hull::envelope::NormalizedInstance;
use stfe_hull::lp::{Comparator, LinearProgram, Sense};
use stfe_hull::network::NetworkModel;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Upper concave hull of sampled graph points, interpolated linearly.
pub struct SampledHull {
    pts: Vec<(f64, f64)>,
}

impl SampledHull {
    /// Hull of `n + 1` equispaced samples plus the kink at 0 when inside.
    pub fn upper(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Self {
        let mut zs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
        if lo < 0.0 && 0.0 < hi {
            zs.push(0.0);
            zs.sort_by(f64::total_cmp);
        }
        let mut hull: Vec<(f64, f64)> = Vec::new();
        for z in zs {
            let p = (z, f(z));
            while hull.len() >= 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                // drop b when it lies on or below the chord a -> p
                if (b.1 - a.1) * (p.0 - a.0) <= (p.1 - a.1) * (b.0 - a.0) {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        SampledHull { pts: hull }
    }

    pub fn eval(&self, z: f64) -> f64 {
        let k = self.pts.partition_point(|p| p.0 < z).clamp(1, self.pts.len() - 1);
        let (a, b) = (self.pts[k - 1], self.pts[k]);
        if b.0 == a.0 {
            return a.1.max(b.1);
        }
        a.1 + (b.1 - a.1) * (z - a.0) / (b.0 - a.0)
    }
}

/// Random argument interval on which the activation has a well-defined
/// secant-then-function envelope orientation (SiLU intervals stay away from
/// spanning both of its inflections).
pub fn random_interval(act: &Activation, rng: &mut ChaCha8Rng) -> Interval {
    loop {
        let lo = rng.random_range(-8.0..4.0);
        let hi = lo + rng.random_range(0.05..10.0);
        if act.tag() == "silu" && lo < -SILU_INFLECTION && hi > SILU_INFLECTION {
            continue;
        }
        return Interval::new(lo, hi).unwrap();
    }
}

/// Random normalized instance of dimension `m` whose argument range is a
/// random interval as above.
pub fn random_instance(act: &Activation, m: usize, rng: &mut ChaCha8Rng) -> NormalizedInstance {
    let iv = random_interval(act, rng);
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|v| v / total * iv.width()).collect();
    NormalizedInstance::new(w, iv.lo(), *act).unwrap()
}

pub fn unit_point(m: usize, rng: &mut ChaCha8Rng, margin: f64) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(margin..1.0 - margin)).collect()
}

/// Outcome of the envelope property suite on one instance.
#[derive(Default, Debug)]
pub struct PropertyTally {
    pub checks: usize,
    /// Finite-difference stencils skipped because they straddle a kink.
    pub skipped: usize,
    pub violations: Vec<String>,
}

impl PropertyTally {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.violations.push(what());
        }
    }
}

/// Runs every envelope property on `inst`, sampling `n` points per property.
pub fn envelope_properties(inst: &NormalizedInstance, n: usize, rng: &mut ChaCha8Rng, t: &mut PropertyTally) {
    let m = inst.dim();
    let act = *inst.activation();
    let tag = format!("{act} w={:?} b={}", inst.w(), inst.b());
    let g = |x: &[f64]| inst.conc_env(x).unwrap();

    // overestimation, dominance over h, and the convex side
    for _ in 0..n {
        let x = unit_point(m, rng, 0.0);
        let (f, c, h, v) = (inst.f(&x), g(&x), inst.h(&x).unwrap(), inst.conv_env(&x).unwrap());
        t.check(c >= f - 1e-9, || format!("overestimation {tag} at {x:?}: {c} < {f}"));
        t.check(c <= h + 1e-9, || format!("dominance {tag} at {x:?}: {c} > h {h}"));
        t.check(v <= f + 1e-9, || format!("underestimation {tag} at {x:?}: {v} > {f}"));
    }

    // midpoint concavity
    for _ in 0..n {
        let (x, y) = (unit_point(m, rng, 0.0), unit_point(m, rng, 0.0));
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let (gm, gx, gy) = (g(&mid), g(&x), g(&y));
        t.check(gm >= 0.5 * (gx + gy) - 1e-8, || {
            format!("concavity {tag} at {x:?}, {y:?}: {gm} < {}", 0.5 * (gx + gy))
        });
    }

    // vertices
    for mask in 0..(1usize << m) {
        let v: Vec<f64> = (0..m).map(|k| ((mask >> k) & 1) as f64).collect();
        let (c, f) = (g(&v), inst.f(&v));
        t.check((c - f).abs() <= 1e-9, || format!("vertex {tag} at {v:?}: {c} vs {f}"));
    }

    // restriction to the faces x_i = 1
    if m >= 2 {
        for i in 0..m {
            let w_face: Vec<f64> = (0..m).filter(|&k| k != i).map(|k| inst.w()[k]).collect();
            let face = NormalizedInstance::new(w_face, inst.b() + inst.w()[i], act).unwrap();
            for _ in 0..n / 4 + 1 {
                let mut x = unit_point(m, rng, 0.0);
                x[i] = 1.0;
                let rest: Vec<f64> = (0..m).filter(|&k| k != i).map(|k| x[k]).collect();
                let (a, b) = (g(&x), face.conc_env(&rest).unwrap());
                t.check((a - b).abs() <= 1e-9, || format!("face {tag} x_{i}=1 at {x:?}: {a} vs {b}"));
            }
        }
    }

    // ray structure: either tight, or linear on the segment to the anchor
    // vertex (the origin, or 𝟙 when the envelope is mirrored)
    let mirrored = matches!(act.shape_on(&inst.arg_range()), Shape::ReflectedSShaped { .. });
    let anchor = vec![if mirrored { 1.0 } else { 0.0 }; m];
    let ga = g(&anchor);
    for _ in 0..n {
        let x = unit_point(m, rng, 0.0);
        let gx = g(&x);
        let tight = (gx - inst.f(&x)).abs() <= 1e-8;
        let linear = [0.25, 0.5, 0.75].iter().all(|&s| {
            let xs: Vec<f64> = x.iter().zip(&anchor).map(|(v, a)| a + s * (v - a)).collect();
            (g(&xs) - ((1.0 - s) * ga + s * gx)).abs() <= 1e-8
        });
        t.check(tight || linear, || format!("ray structure {tag} at {x:?}"));
    }

    // supergradient inequality and finite differences
    for _ in 0..n {
        let x = unit_point(m, rng, 1e-3);
        let (gx, p) = inst.conc_env_with_grad(&x).unwrap();
        for _ in 0..8 {
            let y = unit_point(m, rng, 0.0);
            let bound = gx + p.iter().zip(y.iter().zip(&x)).map(|(pk, (a, b))| pk * (a - b)).sum::<f64>();
            let gy = g(&y);
            t.check(gy <= bound + 1e-7, || {
                format!("supergradient {tag} at {x:?} -> {y:?}: {gy} > {bound}")
            });
        }
        let h = 1e-6;
        let tol = |v: f64| 1e-4 * v.abs().max(1.0);
        for k in 0..m {
            let (mut a, mut b) = (x.clone(), x.clone());
            a[k] += h;
            b[k] -= h;
            // skip stencils that straddle a kink: the gradient formula itself
            // jumps between the two sides
            let (pa, pb) = (inst.conc_env_supergrad(&a).unwrap(), inst.conc_env_supergrad(&b).unwrap());
            if pa.iter().zip(&pb).any(|(u, v)| (u - v).abs() > tol(*u)) {
                t.skipped += 1;
                continue;
            }
            let fd = (g(&a) - g(&b)) / (2.0 * h);
            t.check((fd - p[k]).abs() <= tol(p[k]), || {
                format!("gradient {tag} at {x:?}, coordinate {k}: fd {fd} vs {}", p[k])
            });
        }
    }
}

/// Brute-force LP oracle: enumerates every basic solution of a program over
/// a bounded box and returns the best feasible objective, or `None` if no
/// basic solution is feasible.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    // every constraint and bound as a dense row a·x (cmp) rhs
    let mut rows: Vec<(Vec<f64>, Comparator, f64)> = Vec::new();
    for c in lp.constraints() {
        let mut a = vec![0.0; n];
        for &(j, v) in &c.coeffs {
            a[j] += v;
        }
        rows.push((a, c.cmp, c.rhs));
    }
    for (j, v) in lp.variables().iter().enumerate() {
        assert!(v.lower.is_finite() && v.upper.is_finite(), "oracle needs a bounded box");
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        rows.push((e.clone(), Comparator::Ge, v.lower));
        rows.push((e, Comparator::Le, v.upper));
    }
    let sign = if lp.sense() == Sense::Maximize { 1.0 } else { -1.0 };
    let mut best: Option<f64> = None;
    let mut pick = Vec::with_capacity(n);
    subsets(rows.len(), n, 0, &mut pick, &mut |idx| {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| rows[i].2).collect();
        if let Some(x) = solve_dense(a, b) {
            if lp.is_feasible(&x, 1e-9, 1e-9) {
                let v = lp.objective_value(&x);
                if best.is_none_or(|bv| sign * v > sign * bv) {
                    best = Some(v);
                }
            }
        }
    });
    best
}

fn subsets(total: usize, k: usize, start: usize, pick: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
    if pick.len() == k {
        visit(pick);
        return;
    }
    for i in start..total {
        if total - i < k - pick.len() {
            break;
        }
        pick.push(i);
        subsets(total, k, i + 1, pick, visit);
        pick.pop();
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            let pivot = a[col].clone();
            for (x, p) in a[r][col..].iter_mut().zip(&pivot[col..]) {
                *x -= f * p;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Random LP over the box [-1, 2]^n with `m` random rows.
pub fn random_lp(n: usize, m: usize, rng: &mut ChaCha8Rng) -> LinearProgram {
    let sense = if rng.random_bool(0.5) { Sense::Maximize } else { Sense::Minimize };
    let mut lp = LinearProgram::new(sense);
    for j in 0..n {
        lp.add_variable(format!("x{j}"), -1.0, 2.0).unwrap();
    }
    let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    lp.set_objective(&c).unwrap();
    for _ in 0..m {
        let row: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cmp = match rng.random_range(0..5) {
            0 => Comparator::Ge,
            1 => Comparator::Eq,
            _ => Comparator::Le,
        };
        lp.add_constraint(&row, cmp, rng.random_range(-0.5..1.5)).unwrap();
    }
    lp
}

/// Empirical pre-activation ranges over `n` uniform inputs.
pub fn empirical_ranges(net: &NetworkModel, n: usize, seed: u64) -> Vec<Vec<(f64, f64)>> {
    let mut rng = rng(seed);
    let mut ranges: Vec<Vec<(f64, f64)>> = net
        .layers()
        .iter()
        .map(|l| vec![(f64::INFINITY, f64::NEG_INFINITY); l.width()])
        .collect();
    for _ in 0..n {
        let x: Vec<f64> = net.input_box().iter().map(|iv| rng.random_range(iv.lo()..=iv.hi())).collect();
        let s = net.forward(&x).unwrap();
        for (r, a) in ranges.iter_mut().zip(&s.pre) {
            for (e, &v) in r.iter_mut().zip(a) {
                e.0 = e.0.min(v);
                e.1 = e.1.max(v);
            }
        }
    }
    ranges
}
