//! Near-uniform sampling from a convex body known only through membership.
//!
//! [`hit_and_run`] draws an isotropic direction, finds the chord of the body
//! through the current point by bisection against the membership predicate,
//! and moves to a uniform point on that chord. [`grid_oracle`] enumerates
//! cell centres of a regular grid and serves as brute-force ground truth for
//! small `k`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consistent_set::ConsistentSetView;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};
use crate::types::ValueVector;

pub const DEFAULT_BISECTION_TOL: f64 = 1e-7;

/// Consecutive short chords after which the body is declared degenerate.
pub const DEGENERATE_RUN: usize = 50;

/// Largest dimension accepted by [`grid_oracle`].
pub const GRID_MAX_DIM: usize = 4;

/// A convex body in `[0,1]^k` given by a membership predicate.
pub trait MembershipOracle: Sync {
    fn dim(&self) -> usize;
    fn contains_point(&self, v: &[f64]) -> bool;

    /// Exact chord `[α_lo, α_hi]` of the line `x + αd`, for bodies that can
    /// intersect a line directly. `None` falls back to bisection.
    fn line_chord(&self, _x: &[f64], _d: &[f64]) -> Option<(f64, f64)> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_samples: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub bisection_tol: f64,
    pub n_chains: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig::for_dim(2, 0)
    }
}

impl SamplerConfig {
    /// Defaults scaled to dimension `k`.
    pub fn for_dim(k: usize, seed: u64) -> Self {
        SamplerConfig {
            n_samples: (200 * k).max(2000),
            burn_in: 100 * k,
            thin: k.max(1),
            bisection_tol: DEFAULT_BISECTION_TOL,
            n_chains: 4,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.thin == 0 || self.n_chains == 0 {
            return Err(Error::Config("n_samples, thin and n_chains must be positive".into()));
        }
        if !(self.bisection_tol > 0.0 && self.bisection_tol < 1.0) {
            return Err(Error::Config(format!("bisection_tol {} must lie in (0, 1)", self.bisection_tol)));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SamplerConfig { seed, ..self.clone() }
    }

    fn chain_quota(&self, chain: usize) -> usize {
        self.n_samples / self.n_chains + usize::from(chain < self.n_samples % self.n_chains)
    }
}

/// Where a sample set came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub seed: u64,
    pub chain_seeds: Vec<u64>,
    pub per_chain: Vec<usize>,
    pub burn_in: usize,
    pub thin: usize,
    /// Filled when the points are an enumeration rather than a Markov chain.
    pub grid_resolution: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    pub points: Vec<ValueVector>,
    pub provenance: Provenance,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `n` copies of one point; used when the body has collapsed to it numerically.
    pub fn point_mass(point: ValueVector, n: usize) -> Self {
        SampleSet { points: vec![point; n.max(1)], provenance: Provenance::default() }
    }
}

/// Seed of chain `chain` under master seed `seed`.
pub fn chain_seed(seed: u64, chain: usize) -> u64 {
    derive_seed(seed, chain as u64 + 1)
}

/// Chord of `view` through `x` along unit direction `d`, as `(α_lo, α_hi)`.
pub fn chord_interval(view: &ConsistentSetView, x: &ValueVector, d: &[f64], tol: f64) -> Result<(f64, f64)> {
    if x.len() != view.k() || d.len() != view.k() {
        return Err(Error::Usage("point and direction must have length k".into()));
    }
    let norm: f64 = d.iter().map(|di| di * di).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Usage(format!("direction must be a unit vector, |d| = {norm}")));
    }
    let mut probe = vec![0.0; view.k()];
    chord_on_slice(view, x.as_slice(), d, tol, &mut probe)
}

/// Chord through `x` along `d` for any oracle. The unit box gives the initial
/// bracket on each side; membership along a line through a convex body is an
/// interval, so bisection converges to its endpoints. Both returned endpoints
/// are members.
pub fn chord_on_slice<O: MembershipOracle + ?Sized>(
    oracle: &O,
    x: &[f64],
    d: &[f64],
    tol: f64,
    probe: &mut [f64],
) -> Result<(f64, f64)> {
    if !oracle.contains_point(x) {
        return Err(Error::StartInfeasible);
    }
    if let Some(chord) = oracle.line_chord(x, d) {
        return Ok(chord);
    }
    let (box_lo, box_hi) = box_chord(x, d);
    let hi = bisect_edge(oracle, x, d, box_hi, tol, probe);
    let lo = bisect_edge(oracle, x, d, box_lo, tol, probe);
    Ok((lo, hi))
}

/// Chord of the unit box through `x` along `d`.
fn box_chord(x: &[f64], d: &[f64]) -> (f64, f64) {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (xi, di) in x.iter().zip(d) {
        if *di > 0.0 {
            hi = hi.min((1.0 - xi) / di);
            lo = lo.max(-xi / di);
        } else if *di < 0.0 {
            hi = hi.min(-xi / di);
            lo = lo.max((1.0 - xi) / di);
        }
    }
    // x may sit a tolerance outside the box
    (lo.min(0.0), hi.max(0.0))
}

/// Largest member step from 0 toward `limit` (which may be negative), to within `tol`.
fn bisect_edge<O: MembershipOracle + ?Sized>(
    oracle: &O,
    x: &[f64],
    d: &[f64],
    limit: f64,
    tol: f64,
    probe: &mut [f64],
) -> f64 {
    let at = |alpha: f64, probe: &mut [f64]| {
        for (p, (xi, di)) in probe.iter_mut().zip(x.iter().zip(d)) {
            *p = xi + alpha * di;
        }
        oracle.contains_point(probe)
    };
    if at(limit, probe) {
        return limit;
    }
    let (mut inside, mut outside) = (0.0f64, limit);
    while (outside - inside).abs() > tol {
        let mid = 0.5 * (inside + outside);
        if at(mid, probe) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// Runs `cfg.n_chains` hit-and-run chains from `start`.
pub fn hit_and_run(view: &ConsistentSetView, start: &ValueVector, cfg: &SamplerConfig) -> Result<SampleSet> {
    hit_and_run_from(view, std::slice::from_ref(start), cfg)
}

/// Runs the chains, chain `c` starting at `starts[c % starts.len()]`.
///
/// The first `burn_in` steps of each chain are discarded and every `thin`-th
/// step after that is kept. Chains run in parallel and are merged in chain
/// order, so the result depends only on `cfg.seed`.
pub fn hit_and_run_from<O: MembershipOracle + ?Sized>(
    oracle: &O,
    starts: &[ValueVector],
    cfg: &SamplerConfig,
) -> Result<SampleSet> {
    cfg.validate()?;
    if starts.is_empty() {
        return Err(Error::Usage("hit-and-run needs at least one start point".into()));
    }
    let k = oracle.dim();
    if starts.iter().any(|s| s.len() != k) {
        return Err(Error::Usage("start point has wrong dimension".into()));
    }
    if starts.iter().any(|s| !oracle.contains_point(s.as_slice())) {
        return Err(Error::StartInfeasible);
    }
    let chain_seeds: Vec<u64> = (0..cfg.n_chains).map(|c| chain_seed(cfg.seed, c)).collect();
    let chains: Vec<Vec<ValueVector>> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_from(chain_seeds[c]);
            run_chain(oracle, starts[c % starts.len()].as_slice(), cfg, cfg.chain_quota(c), &mut rng)
        })
        .collect::<Result<_>>()?;
    let per_chain = chains.iter().map(Vec::len).collect();
    let points: Vec<ValueVector> = chains.into_iter().flatten().collect();
    debug_assert!(points.iter().all(|p| oracle.contains_point(p.as_slice())));
    Ok(SampleSet {
        points,
        provenance: Provenance {
            seed: cfg.seed,
            chain_seeds,
            per_chain,
            burn_in: cfg.burn_in,
            thin: cfg.thin,
            grid_resolution: None,
        },
    })
}

fn run_chain<O: MembershipOracle + ?Sized>(
    oracle: &O,
    start: &[f64],
    cfg: &SamplerConfig,
    quota: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ValueVector>> {
    let k = start.len();
    let mut x = start.to_vec();
    let mut d = vec![0.0; k];
    let mut probe = vec![0.0; k];
    let mut kept = Vec::with_capacity(quota);
    let min_chord = 10.0 * cfg.bisection_tol;
    let mut short_run = 0;
    let mut step = 0usize;
    while kept.len() < quota {
        random_direction(rng, &mut d);
        let (lo, hi) = chord_on_slice(oracle, &x, &d, cfg.bisection_tol, &mut probe)?;
        if hi - lo < min_chord {
            short_run += 1;
            if short_run >= DEGENERATE_RUN {
                return Err(Error::Degenerate { consecutive: short_run, min_length: min_chord });
            }
        } else {
            short_run = 0;
        }
        let alpha = lo + (hi - lo) * rng.random::<f64>();
        for (p, (xi, di)) in probe.iter_mut().zip(x.iter().zip(&d)) {
            *p = xi + alpha * di;
        }
        // endpoints are members and the body is convex, so this only guards rounding
        if oracle.contains_point(&probe) {
            x.copy_from_slice(&probe);
        }
        step += 1;
        if step > cfg.burn_in && (step - cfg.burn_in).is_multiple_of(cfg.thin) {
            kept.push(ValueVector::clamped(x.clone()));
        }
    }
    Ok(kept)
}

fn random_direction(rng: &mut ChaCha8Rng, d: &mut [f64]) {
    loop {
        let mut norm = 0.0;
        for di in d.iter_mut() {
            *di = rng.sample(StandardNormal);
            norm += *di * *di;
        }
        if norm > 1e-24 {
            let inv = norm.sqrt().recip();
            d.iter_mut().for_each(|di| *di *= inv);
            return;
        }
    }
}

/// Members among the cell centres `((i_1 + ½)/m, …, (i_k + ½)/m)` of an `m^k` grid.
pub fn grid_oracle<O: MembershipOracle + ?Sized>(oracle: &O, resolution: usize) -> Result<SampleSet> {
    let k = oracle.dim();
    if k > GRID_MAX_DIM {
        return Err(Error::DimensionTooLarge { k, max: GRID_MAX_DIM });
    }
    if resolution == 0 {
        return Err(Error::Usage("grid resolution must be positive".into()));
    }
    let m = resolution as f64;
    let total = resolution.pow(k as u32);
    let mut point = vec![0.0; k];
    let mut points = Vec::new();
    for mut cell in 0..total {
        for p in point.iter_mut() {
            *p = ((cell % resolution) as f64 + 0.5) / m;
            cell /= resolution;
        }
        if oracle.contains_point(&point) {
            points.push(ValueVector::clamped(point.clone()));
        }
    }
    Ok(SampleSet { points, provenance: Provenance { grid_resolution: Some(resolution), ..Provenance::default() } })
}
