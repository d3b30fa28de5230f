//! Monte Carlo estimates of the total gap between `f(x) = σ(wᵀx + b)` and
//! two concave overestimators on the unit box: the one-dimensional estimator
//! `h` and the exact concave envelope.
//!
//! Samples come in blocks of [`BLOCK`] points; block `k` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` on stream `k`, so results do not depend
//! on the thread count. The first outputs of seed 1, stream 0 are
//!
//! ```text
//! next_u64: 0x67094cea8ca40db1  0x149406d8fc0e8e6b  0x98b82b0336070665
//! ```
//!
//! and a sample coordinate is `(next_u64 >> 11) · 2⁻⁵³`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::{NormalizedInstance, RawInstance};
use crate::error::{Error, Result};
use crate::num17;

/// Samples per independently seeded block.
pub const BLOCK: usize = 1 << 16;

/// Below this total gap of `h` the improvement ratio is reported as 0.
pub const DEGENERATE_GAP: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub samples: u64,
    pub seed: u64,
    pub dim: usize,
    pub mean_f: f64,
    pub mean_h: f64,
    pub mean_conc: f64,
    /// Total gap of `h`: mean of `h − f`.
    pub delta_h: f64,
    /// Total gap of the envelope: mean of `conc − f`.
    pub delta_conc: f64,
    pub se_delta_h: f64,
    pub se_delta_conc: f64,
    /// `(delta_h − delta_conc) / delta_h`.
    pub improvement: f64,
    /// Set when `delta_h` is too small for the ratio to mean anything.
    pub degenerate: bool,
}

/// Running sums over one block.
#[derive(Clone, Copy, Default)]
struct Sums {
    f: f64,
    h: f64,
    conc: f64,
    dh2: f64,
    dc2: f64,
}

impl Sums {
    fn add(self, o: Sums) -> Sums {
        Sums {
            f: self.f + o.f,
            h: self.h + o.h,
            conc: self.conc + o.conc,
            dh2: self.dh2 + o.dh2,
            dc2: self.dc2 + o.dc2,
        }
    }
}

fn block_sums(inst: &NormalizedInstance, seed: u64, block: u64, n: usize) -> Result<Sums> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    let mut t = vec![0.0; inst.dim()];
    let mut s = Sums::default();
    for _ in 0..n {
        t.iter_mut().for_each(|v| *v = rng.random::<f64>());
        let f = inst.f(&t);
        let h = inst.h(&t)?;
        let c = inst.conc_env(&t)?;
        s.f += f;
        s.h += h;
        s.conc += c;
        s.dh2 += (h - f) * (h - f);
        s.dc2 += (c - f) * (c - f);
    }
    Ok(s)
}

/// Estimates the gaps with `samples` uniform points of the normalised unit
/// box (the same points for all three integrands), using up to `threads`
/// workers. Bit-identical for identical arguments regardless of `threads`.
pub fn gap_report(raw: &RawInstance, samples: u64, seed: u64, threads: usize) -> Result<GapReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("at least one sample is required".into()));
    }
    let (inst, _) = raw.normalize()?;
    let blocks: Vec<(u64, usize)> = (0..samples.div_ceil(BLOCK as u64))
        .map(|k| {
            let n = (samples - k * BLOCK as u64).min(BLOCK as u64) as usize;
            (k, n)
        })
        .collect();
    let run = |&(k, n): &(u64, usize)| block_sums(&inst, seed, k, n);
    let parts: Vec<Result<Sums>> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(|| blocks.par_iter().map(run).collect())
    } else {
        blocks.iter().map(run).collect()
    };
    let mut total = Sums::default();
    for p in parts {
        total = total.add(p?);
    }

    let n = samples as f64;
    let (mean_f, mean_h, mean_conc) = (total.f / n, total.h / n, total.conc / n);
    let delta_h = mean_h - mean_f;
    let delta_conc = mean_conc - mean_f;
    let se = |sq: f64, mean: f64| {
        if samples < 2 {
            0.0
        } else {
            ((sq / n - mean * mean).max(0.0) * n / (n - 1.0) / n).sqrt()
        }
    };
    let degenerate = delta_h <= DEGENERATE_GAP;
    Ok(GapReport {
        samples,
        seed,
        dim: inst.dim(),
        mean_f,
        mean_h,
        mean_conc,
        delta_h,
        delta_conc,
        se_delta_h: se(total.dh2, delta_h),
        se_delta_conc: se(total.dc2, delta_conc),
        improvement: if degenerate { 0.0 } else { (delta_h - delta_conc) / delta_h },
        degenerate,
    })
}

const FIELDS: [&str; 12] = [
    "samples",
    "seed",
    "dim",
    "mean_f",
    "mean_h",
    "mean_conc",
    "delta_h",
    "delta_conc",
    "se_delta_h",
    "se_delta_conc",
    "improvement",
    "degenerate",
];

impl GapReport {
    fn values(&self) -> Vec<String> {
        vec![
            self.samples.to_string(),
            self.seed.to_string(),
            self.dim.to_string(),
            num17(self.mean_f),
            num17(self.mean_h),
            num17(self.mean_conc),
            num17(self.delta_h),
            num17(self.delta_conc),
            num17(self.se_delta_h),
            num17(self.se_delta_conc),
            num17(self.improvement),
            self.degenerate.to_string(),
        ]
    }

    /// Header line for [`GapReport::csv_row`].
    pub fn csv_header() -> String {
        FIELDS.join(",")
    }

    pub fn csv_row(&self) -> String {
        self.values().join(",")
    }

    /// Parses a header + row pair written by [`GapReport::csv_header`] and
    /// [`GapReport::csv_row`].
    pub fn from_csv(s: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(s.as_bytes());
        r.deserialize()
            .next()
            .ok_or_else(|| Error::MalformedInput("gap report CSV has no data row".into()))?
            .map_err(|e| Error::MalformedInput(format!("gap report: {e}")))
    }

    /// JSON object with every float written to 17 significant digits.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{");
        for (i, (k, v)) in FIELDS.iter().zip(self.values()).enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "\"{k}\": {v}");
        }
        out.push('}');
        out
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::MalformedInput(format!("gap report: {e}")))
    }
}
