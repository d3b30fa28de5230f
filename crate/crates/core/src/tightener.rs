//! Cutting-plane tightening of pre-activation bounds.
//!
//! For a target neuron the network up to the previous layer is relaxed to an
//! LP (affine layers exact, each activation replaced by a few valid lines),
//! the target pre-activation is minimised or maximised, and the incumbent is
//! separated neuron by neuron against the hull of `σ(wᵀh + b)` over the box
//! of the previous layer. Violated cuts are added and the LP is re-solved
//! until no cut is found, the objective stalls, or the round budget runs out.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Deserialize;

use crate::activation::{maximize_tilted, Activation, ConcaveEnvelope1d, ConvexEnvelope1d, Interval};
use crate::envelope::{Cut, CutSense, Hull, Mode, RawInstance, Separation};
use crate::error::{Error, Result};
use crate::lp::{Comparator, DenseSimplex, LinearProgram, LpOutcome, Sense, WarmStart};
use crate::network::{affine_bounds, post_bounds, ActivationBounds, NetworkModel};
use crate::num17;

/// Below this magnitude the improvement is reported as an absolute change.
pub const RELATIVE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Lower,
    Upper,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Lower => "lower",
            Direction::Upper => "upper",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lower" => Ok(Direction::Lower),
            "upper" => Ok(Direction::Upper),
            _ => Err(Error::MalformedInput(format!("unknown direction '{s}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TightenOptions {
    pub mode: Mode,
    pub max_rounds: usize,
    /// Stop once consecutive LP objectives differ by at most this much.
    pub stall_tol: f64,
    /// Worker threads for the neurons of one layer (1 = run inline).
    pub threads: usize,
    pub solver: DenseSimplex,
}

impl TightenOptions {
    pub fn new(mode: Mode) -> Self {
        TightenOptions {
            mode,
            max_rounds: 20,
            stall_tol: 1e-5,
            threads: 1,
            solver: DenseSimplex::default(),
        }
    }
}

/// Variable indices of the relaxation: inputs, then `a` and `h` per layer.
#[derive(Clone, Debug)]
struct Layout {
    input: usize,
    pre: Vec<usize>,
    post: Vec<usize>,
}

impl Layout {
    /// Index of the `k`-th input of layer `j` (an input coordinate for `j = 0`).
    fn layer_input(&self, j: usize, k: usize) -> usize {
        if j == 0 {
            self.input + k
        } else {
            self.post[j - 1] + k
        }
    }
}

/// Hulls of every activation in layers `0..layers`, each over the box of its
/// layer's inputs. Shared read-only across target neurons.
#[derive(Debug)]
pub struct HullSet {
    hulls: Vec<Vec<Hull>>,
}

impl HullSet {
    pub fn new(net: &NetworkModel, bounds: &ActivationBounds, layers: usize) -> Result<Self> {
        let mut hulls = Vec::with_capacity(layers);
        for j in 0..layers {
            let layer = &net.layers()[j];
            let act = layer
                .activation
                .ok_or_else(|| Error::MalformedNetwork(format!("layer {} has no activation", j + 1)))?;
            let bbox = input_box(net, bounds, j);
            let row: Result<Vec<Hull>> = layer
                .weights
                .iter()
                .zip(&layer.bias)
                .map(|(w, &b)| Hull::new(RawInstance::new(w.clone(), b, act, bbox.clone())?))
                .collect();
            hulls.push(row?);
        }
        Ok(HullSet { hulls })
    }

    pub fn layers(&self) -> usize {
        self.hulls.len()
    }

    pub fn get(&self, layer: usize, neuron: usize) -> &Hull {
        &self.hulls[layer][neuron]
    }
}

/// Box of the inputs of layer `j`: the input box, or the image of the
/// previous layer's pre-activation bounds.
fn input_box(net: &NetworkModel, bounds: &ActivationBounds, j: usize) -> Vec<Interval> {
    if j == 0 {
        net.input_box().to_vec()
    } else {
        bounds.post[j - 1].clone()
    }
}

/// A cut added during tightening, tagged with the neuron it came from.
#[derive(Clone, Debug)]
pub struct AddedCut {
    pub layer: usize,
    pub neuron: usize,
    pub cut: Cut,
}

/// LP relaxation of the network in front of one target layer.
#[derive(Clone, Debug)]
pub struct RelaxationState {
    lp: LinearProgram,
    layout: Layout,
    target_layer: usize,
    /// Bias of the target neuron, added to the LP objective.
    offset: f64,
    incumbent: Option<Vec<f64>>,
    cuts: Vec<AddedCut>,
}

/// Valid lines `σ(z) <= s z + c` (upper) and `σ(z) >= s z + c` (lower) on
/// `iv`, with offsets fixed by exact tilted maximisation.
fn base_lines(act: &Activation, iv: Interval) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    if iv.width() == 0.0 {
        return (Vec::new(), Vec::new());
    }
    let ends = [iv.lo(), iv.hi()];
    let secant = (act.eval(iv.hi()) - act.eval(iv.lo())) / iv.width();
    let up_slopes: Vec<f64> = match ConcaveEnvelope1d::new(act, iv) {
        Ok(env) => ends.iter().filter_map(|&z| env.supergradient(z).ok()).collect(),
        Err(_) => vec![secant],
    };
    let lo_slopes: Vec<f64> = match ConvexEnvelope1d::new(act, iv) {
        Ok(env) => ends.iter().filter_map(|&z| env.subgradient(z).ok()).collect(),
        Err(_) => vec![secant],
    };
    let neg = act.negate();
    let mut up: Vec<(f64, f64)> = Vec::new();
    for s in up_slopes {
        if s.is_finite() && !up.iter().any(|l| l.0 == s) {
            up.push((s, maximize_tilted(act, iv, s).1));
        }
    }
    let mut lo: Vec<(f64, f64)> = Vec::new();
    for s in lo_slopes {
        if s.is_finite() && !lo.iter().any(|l| l.0 == s) {
            lo.push((s, -maximize_tilted(&neg, iv, -s).1));
        }
    }
    (up, lo)
}

/// Base relaxation of layers `0..layer` with the objective set to the
/// pre-activation of `neuron` in `layer` (minimised for a lower bound).
pub fn build_base_relaxation(
    net: &NetworkModel,
    bounds: &ActivationBounds,
    layer: usize,
    neuron: usize,
    direction: Direction,
) -> Result<RelaxationState> {
    let mut state = RelaxationState::base(net, bounds, layer)?;
    state.target(net, neuron, direction)?;
    Ok(state)
}

impl RelaxationState {
    /// Relaxation without an objective; see [`RelaxationState::target`].
    pub fn base(net: &NetworkModel, bounds: &ActivationBounds, layer: usize) -> Result<Self> {
        if layer == 0 || layer >= net.layers().len() {
            return Err(Error::InvalidParameter(format!(
                "target layer {} has no hidden layer in front of it",
                layer + 1
            )));
        }
        let mut lp = LinearProgram::new(Sense::Minimize);
        let mut layout = Layout {
            input: 0,
            pre: Vec::new(),
            post: Vec::new(),
        };
        for (k, iv) in net.input_box().iter().enumerate() {
            lp.add_variable(format!("x[{k}]"), iv.lo(), iv.hi())?;
        }
        for j in 0..layer {
            let l = &net.layers()[j];
            let act = l
                .activation
                .ok_or_else(|| Error::MalformedNetwork(format!("layer {} has no activation", j + 1)))?;
            layout.pre.push(lp.num_vars());
            for (v, iv) in bounds.pre[j].iter().enumerate() {
                if iv.lo() > iv.hi() {
                    return Err(Error::InvalidInterval { lo: iv.lo(), hi: iv.hi() });
                }
                lp.add_variable(format!("a{}[{v}]", j + 1), iv.lo(), iv.hi())?;
            }
            layout.post.push(lp.num_vars());
            for (v, iv) in bounds.post[j].iter().enumerate() {
                lp.add_variable(format!("h{}[{v}]", j + 1), iv.lo(), iv.hi())?;
            }
            for v in 0..l.width() {
                let a = layout.pre[j] + v;
                let mut row: Vec<(usize, f64)> = l.weights[v]
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| **w != 0.0)
                    .map(|(k, w)| (layout.layer_input(j, k), *w))
                    .collect();
                row.push((a, -1.0));
                lp.add_sparse_constraint(row, Comparator::Eq, -l.bias[v])?;

                let h = layout.post[j] + v;
                let (up, lo) = base_lines(&act, bounds.pre[j][v]);
                for (s, c) in up {
                    lp.add_sparse_constraint(vec![(h, 1.0), (a, -s)], Comparator::Le, c)?;
                }
                for (s, c) in lo {
                    lp.add_sparse_constraint(vec![(h, 1.0), (a, -s)], Comparator::Ge, c)?;
                }
            }
        }
        Ok(RelaxationState {
            lp,
            layout,
            target_layer: layer,
            offset: 0.0,
            incumbent: None,
            cuts: Vec::new(),
        })
    }

    /// Points the objective at `neuron` of the target layer.
    pub fn target(&mut self, net: &NetworkModel, neuron: usize, direction: Direction) -> Result<()> {
        let l = &net.layers()[self.target_layer];
        let w = l.weights.get(neuron).ok_or_else(|| {
            Error::InvalidParameter(format!("layer {} has no neuron {neuron}", self.target_layer + 1))
        })?;
        let mut c = vec![0.0; self.lp.num_vars()];
        for (k, &wk) in w.iter().enumerate() {
            c[self.layout.layer_input(self.target_layer, k)] = wk;
        }
        self.lp.set_objective(&c)?;
        self.lp.set_sense(match direction {
            Direction::Lower => Sense::Minimize,
            Direction::Upper => Sense::Maximize,
        });
        self.offset = l.bias[neuron];
        self.incumbent = None;
        Ok(())
    }

    pub fn lp(&self) -> &LinearProgram {
        &self.lp
    }

    pub fn cuts(&self) -> &[AddedCut] {
        &self.cuts
    }

    /// Last optimal LP point, if solved.
    pub fn incumbent(&self) -> Option<&[f64]> {
        self.incumbent.as_deref()
    }

    /// Solves (warm when `warm` holds the basis of an earlier solve) and
    /// returns the bound on the target pre-activation.
    pub fn solve(&mut self, solver: &DenseSimplex, warm: &mut Option<WarmStart>) -> Result<f64> {
        let outcome = if warm.is_some() {
            solver.reoptimize(&self.lp, warm)?
        } else {
            let (out, ws) = solver.solve_warm(&self.lp)?;
            *warm = ws;
            out
        };
        match outcome {
            LpOutcome::Optimal { value, point } => {
                self.incumbent = Some(point);
                Ok(value + self.offset)
            }
            LpOutcome::Infeasible => Err(Error::Infeasible(format!(
                "relaxation for layer {} is infeasible; upstream bounds are inconsistent",
                self.target_layer + 1
            ))),
            LpOutcome::Unbounded => Err(Error::Unbounded(format!(
                "relaxation for layer {} is unbounded",
                self.target_layer + 1
            ))),
        }
    }

    /// Separates the incumbent at every neuron in front of the target layer
    /// and adds at most one cut per neuron; returns the number added.
    pub fn cut_round(&mut self, hulls: &HullSet, mode: Mode) -> Result<usize> {
        let point = self
            .incumbent
            .clone()
            .ok_or_else(|| Error::Numerical("cut round before the relaxation was solved".into()))?;
        let mut added = 0;
        for j in 0..self.target_layer {
            let n_out = hulls.hulls[j].len();
            for eta in 0..n_out {
                let hull = hulls.get(j, eta);
                let x: Vec<f64> = hull
                    .raw()
                    .bbox
                    .iter()
                    .enumerate()
                    .map(|(k, iv)| iv.clamp(point[self.layout.layer_input(j, k)]))
                    .collect();
                let yv = self.layout.post[j] + eta;
                let cut = match hull.separate(&x, point[yv], mode) {
                    Ok(Separation::Cut(cut)) => cut,
                    Ok(_) | Err(Error::UnsupportedShape { .. }) => continue,
                    Err(e) => return Err(e),
                };
                // y - coeffsᵀx  (<= | >=)  constant
                let mut row: Vec<(usize, f64)> = cut
                    .coeffs
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c != 0.0)
                    .map(|(k, c)| (self.layout.layer_input(j, k), -c))
                    .collect();
                row.push((yv, 1.0));
                let cmp = match cut.sense {
                    CutSense::UpperBoundsY => Comparator::Le,
                    CutSense::LowerBoundsY => Comparator::Ge,
                };
                self.lp.add_sparse_constraint(row, cmp, cut.constant)?;
                self.cuts.push(AddedCut {
                    layer: j,
                    neuron: eta,
                    cut,
                });
                added += 1;
            }
        }
        Ok(added)
    }
}

/// One line of a [`BoundsReport`]. `layer` counts hidden layers from 1,
/// `neuron` from 0.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct BoundsRow {
    pub layer: usize,
    pub neuron: usize,
    #[serde(deserialize_with = "de_direction")]
    pub direction: Direction,
    pub initial: f64,
    pub tightened: f64,
    /// Relative gain over the initial bound (absolute when `absolute`).
    pub improvement: f64,
    pub rounds: usize,
    pub cuts: usize,
    pub stalled: bool,
    pub absolute: bool,
}

fn de_direction<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Direction, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

/// `(tightened − initial)/|initial|` for lower bounds, mirrored for upper.
pub fn improvement(initial: f64, tightened: f64, direction: Direction) -> (f64, bool) {
    let gain = match direction {
        Direction::Lower => tightened - initial,
        Direction::Upper => initial - tightened,
    };
    if initial.abs() < RELATIVE_FLOOR {
        (gain, true)
    } else {
        (gain / initial.abs(), false)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundsReport {
    pub rows: Vec<BoundsRow>,
}

const HEADER: [&str; 10] = [
    "layer",
    "neuron",
    "direction",
    "initial",
    "tightened",
    "improvement",
    "rounds",
    "cuts",
    "stalled",
    "absolute",
];

impl BoundsReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(HEADER).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.layer.to_string(),
                r.neuron.to_string(),
                r.direction.to_string(),
                num17(r.initial),
                num17(r.tightened),
                num17(r.improvement),
                r.rounds.to_string(),
                r.cuts.to_string(),
                r.stalled.to_string(),
                r.absolute.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let rows: std::result::Result<Vec<BoundsRow>, _> = r.deserialize().collect();
        rows.map(|rows| BoundsReport { rows })
            .map_err(|e| Error::MalformedInput(format!("bounds report: {e}")))
    }

    pub fn row(&self, layer: usize, neuron: usize, direction: Direction) -> Option<&BoundsRow> {
        self.rows
            .iter()
            .find(|r| r.layer == layer && r.neuron == neuron && r.direction == direction)
    }

    /// Mean improvement over the rows of a hidden layer (1-based).
    pub fn mean_improvement(&self, layer: usize) -> Option<f64> {
        let v: Vec<f64> = self.rows.iter().filter(|r| r.layer == layer).map(|r| r.improvement).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Result of tightening one bound.
#[derive(Clone, Debug)]
pub struct Tightened {
    pub bound: f64,
    pub row: BoundsRow,
    /// LP objective (bound on the pre-activation) after each solve.
    pub trace: Vec<f64>,
    pub cuts: Vec<AddedCut>,
}

/// Tightens one bound of `neuron` in `layer` (0-based, at least 1) given
/// valid bounds for all earlier layers. The result never crosses
/// `bounds.pre[layer][neuron]`, which is also reported as the initial bound.
pub fn tighten_neuron(
    net: &NetworkModel,
    bounds: &ActivationBounds,
    layer: usize,
    neuron: usize,
    direction: Direction,
    opts: &TightenOptions,
) -> Result<Tightened> {
    let base = RelaxationState::base(net, bounds, layer)?;
    let hulls = HullSet::new(net, bounds, layer)?;
    let current = bounds.pre[layer][neuron];
    let initial = match direction {
        Direction::Lower => current.lo(),
        Direction::Upper => current.hi(),
    };
    run_neuron(net, &base, &hulls, neuron, direction, initial, current, opts)
}

#[allow(clippy::too_many_arguments)]
fn run_neuron(
    net: &NetworkModel,
    base: &RelaxationState,
    hulls: &HullSet,
    neuron: usize,
    direction: Direction,
    initial: f64,
    current: Interval,
    opts: &TightenOptions,
) -> Result<Tightened> {
    let mut state = base.clone();
    state.target(net, neuron, direction)?;
    let mut warm = None;
    let mut value = state.solve(&opts.solver, &mut warm)?;
    let mut trace = vec![value];
    let (mut rounds, mut stalled) = (0, false);
    while rounds < opts.max_rounds {
        let added = state.cut_round(hulls, opts.mode)?;
        if added == 0 {
            break;
        }
        rounds += 1;
        let next = state.solve(&opts.solver, &mut warm)?;
        trace.push(next);
        let change = (next - value).abs();
        value = next;
        if change <= opts.stall_tol {
            stalled = true;
            break;
        }
    }
    let bound = match direction {
        Direction::Lower => value.max(current.lo()),
        Direction::Upper => value.min(current.hi()),
    };
    let (imp, absolute) = improvement(initial, bound, direction);
    Ok(Tightened {
        bound,
        row: BoundsRow {
            layer: state.target_layer + 1,
            neuron,
            direction,
            initial,
            tightened: bound,
            improvement: imp,
            rounds,
            cuts: state.cuts.len(),
            stalled,
            absolute,
        },
        trace,
        cuts: state.cuts,
    })
}

fn trivial_row(layer: usize, neuron: usize, direction: Direction, iv: Interval) -> BoundsRow {
    let v = match direction {
        Direction::Lower => iv.lo(),
        Direction::Upper => iv.hi(),
    };
    BoundsRow {
        layer: layer + 1,
        neuron,
        direction,
        initial: v,
        tightened: v,
        improvement: 0.0,
        rounds: 0,
        cuts: 0,
        stalled: false,
        absolute: v.abs() < RELATIVE_FLOOR,
    }
}

/// Outcome of a full sweep: the report plus the final bounds.
#[derive(Clone, Debug)]
pub struct Sweep {
    pub report: BoundsReport,
    pub bounds: ActivationBounds,
}

/// Tightens both bounds of every hidden neuron, layer by layer, feeding the
/// tightened bounds of each layer into the relaxations of the next. The first
/// hidden layer is reported as-is (interval bounds are exact there); the
/// output layer, if any, is left alone.
pub fn tighten_all(net: &NetworkModel, opts: &TightenOptions) -> Result<Sweep> {
    let original = net.interval_propagate();
    let mut bounds = original.clone();
    let hidden = net.hidden_layers();
    let mut rows = Vec::new();
    if hidden > 0 {
        for (v, iv) in original.pre[0].iter().enumerate() {
            rows.push(trivial_row(0, v, Direction::Lower, *iv));
            rows.push(trivial_row(0, v, Direction::Upper, *iv));
        }
    }
    let pool = if opts.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(opts.threads)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    for i in 1..hidden {
        let layer = &net.layers()[i];
        // interval bounds from the already tightened previous layer
        let current: Vec<Interval> = affine_bounds(layer, &bounds.post[i - 1])
            .iter()
            .zip(&original.pre[i])
            .map(|(c, o)| c.intersect(o).unwrap_or(*c))
            .collect();
        bounds.pre[i] = current.clone();
        let base = RelaxationState::base(net, &bounds, i)?;
        let hulls = HullSet::new(net, &bounds, i)?;
        let jobs: Vec<(usize, Direction)> = (0..layer.width())
            .flat_map(|v| [(v, Direction::Lower), (v, Direction::Upper)])
            .collect();
        let run = |&(v, d): &(usize, Direction)| {
            let init = original.pre[i][v];
            let initial = match d {
                Direction::Lower => init.lo(),
                Direction::Upper => init.hi(),
            };
            run_neuron(net, &base, &hulls, v, d, initial, current[v], opts)
        };
        let results: Vec<Result<Tightened>> = match &pool {
            Some(p) => p.install(|| jobs.par_iter().map(run).collect()),
            None => jobs.iter().map(run).collect(),
        };
        let mut lo = vec![0.0; layer.width()];
        let mut hi = vec![0.0; layer.width()];
        for (t, &(v, d)) in results.into_iter().zip(&jobs) {
            let t = t?;
            match d {
                Direction::Lower => lo[v] = t.bound,
                Direction::Upper => hi[v] = t.bound,
            }
            rows.push(t.row);
        }
        bounds.pre[i] = lo
            .iter()
            .zip(&hi)
            .map(|(&l, &h)| Interval::new(l, h.max(l)))
            .collect::<Result<_>>()?;
        bounds.post[i] = post_bounds(layer, &bounds.pre[i]);
    }
    Ok(Sweep {
        report: BoundsReport { rows },
        bounds,
    })
}
