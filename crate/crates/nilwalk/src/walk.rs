//! Right random walks `S_N = X_1 * ... * X_N`, recentered and rescaled
//! endpoints, and Donsker-interpolated paths.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::LieAlgebra;
use crate::batch::{BatchMeta, SampleBatch};
use crate::decomposition::{BiasExtension, WeightDecomposition};
use crate::error::{Error, Result};
use crate::measure::{truncate_sample, truncation_centering, IncrementMeasure};
use crate::rng::{stream_rng, Rng};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recentering {
    None,
    /// Right-multiply by `−N X`.
    #[default]
    Drift,
    /// Right-multiply by `−N X`, then by `g_N`.
    DriftThen(Vec<f64>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    #[default]
    Off,
    /// `T_N` applied to every increment.
    Uniform,
    /// Increment `i` is truncated at level `⌊N^{1−γ_i}⌋`, with `γ` read cyclically.
    Gradual(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct WalkConfig {
    pub dec: WeightDecomposition,
    pub measure: IncrementMeasure,
    pub steps: usize,
    pub trials: usize,
    pub recentering: Recentering,
    pub truncation: Truncation,
    /// Apply `D_{1/√N}` to the endpoint.
    pub rescale: bool,
    pub seed: u64,
    /// Draws used to estimate `c_N` for non-atomic laws.
    pub centering_samples: usize,
}

impl WalkConfig {
    pub fn new(dec: WeightDecomposition, measure: IncrementMeasure, steps: usize) -> Self {
        Self {
            dec,
            measure,
            steps,
            trials: 100_000,
            recentering: Recentering::Drift,
            truncation: Truncation::Off,
            rescale: true,
            seed: 0,
            centering_samples: 1_000_000,
        }
    }

    pub fn trials(mut self, t: usize) -> Self {
        self.trials = t;
        self
    }

    pub fn seed(mut self, s: u64) -> Self {
        self.seed = s;
        self
    }

    pub fn rescale(mut self, r: bool) -> Self {
        self.rescale = r;
        self
    }

    pub fn recentering(mut self, r: Recentering) -> Self {
        self.recentering = r;
        self
    }

    pub fn truncation(mut self, t: Truncation) -> Self {
        self.truncation = t;
        self
    }

    pub fn with_steps(&self, steps: usize) -> Self {
        let mut c = self.clone();
        c.steps = steps;
        c
    }

    fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.trials == 0 {
            return Err(Error::InvalidParameter("steps and trials must be positive".into()));
        }
        if self.measure.dim() != self.dec.dim() {
            return Err(Error::DimensionMismatch { expected: self.dec.dim(), got: self.measure.dim() });
        }
        if !self.dec.algebra().product_supported() {
            return Err(Error::StepTooLarge { step: self.dec.algebra().step(), max: crate::bch::MAX_STEP });
        }
        if let Recentering::DriftThen(g) = &self.recentering {
            if g.len() != self.dec.dim() {
                return Err(Error::DimensionMismatch { expected: self.dec.dim(), got: g.len() });
            }
        }
        if let Truncation::Gradual(g) = &self.truncation {
            if g.is_empty() || g.iter().any(|v| !(0.0..1.0).contains(v)) {
                return Err(Error::InvalidParameter("gradual truncation exponents must lie in [0, 1)".into()));
            }
        }
        Ok(())
    }

    fn meta(&self, kind: &str) -> BatchMeta {
        BatchMeta {
            kind: kind.into(),
            steps: Some(self.steps),
            seed: self.seed,
            trials: self.trials,
            recentering: Some(
                match &self.recentering {
                    Recentering::None => "none",
                    Recentering::Drift => "drift",
                    Recentering::DriftThen(_) => "drift_then",
                }
                .into(),
            ),
            ..Default::default()
        }
    }
}

/// Precomputed state for repeated endpoint draws.
pub struct Walker<'a> {
    cfg: &'a WalkConfig,
    x: Vec<f64>,
    tail: Vec<Vec<f64>>,
    levels: HashMap<u64, Vec<f64>>,
}

impl<'a> Walker<'a> {
    pub fn new(cfg: &'a WalkConfig) -> Result<Self> {
        cfg.validate()?;
        let x = cfg.dec.x_lift_f64();
        let n = cfg.steps as f64;
        let mut tail = Vec::new();
        if cfg.recentering != Recentering::None {
            tail.push(x.iter().map(|v| -n * v).collect());
        }
        if let Recentering::DriftThen(g) = &cfg.recentering {
            tail.push(g.clone());
        }
        let mut levels = HashMap::new();
        let level_list: Vec<u64> = match &cfg.truncation {
            Truncation::Off => Vec::new(),
            Truncation::Uniform => vec![cfg.steps as u64],
            Truncation::Gradual(g) => g.iter().map(|gi| gradual_level(cfg.steps, *gi)).collect(),
        };
        for l in level_list {
            if let std::collections::hash_map::Entry::Vacant(e) = levels.entry(l) {
                let c = truncation_centering(&cfg.measure, l as f64, &cfg.dec, cfg.centering_samples, cfg.seed ^ l)?;
                e.insert(c.c);
            }
        }
        Ok(Self { cfg, x, tail, levels })
    }

    fn level(&self, i: usize) -> Option<u64> {
        match &self.cfg.truncation {
            Truncation::Off => None,
            Truncation::Uniform => Some(self.cfg.steps as u64),
            Truncation::Gradual(g) => Some(gradual_level(self.cfg.steps, g[i % g.len()])),
        }
    }

    /// Draws increment `i` (0-based) into `out`, truncated if configured.
    fn increment(&self, i: usize, rng: &mut Rng, out: &mut [f64]) {
        self.cfg.measure.sample_into(rng, out);
        if let Some(l) = self.level(i) {
            let y: Vec<f64> = out.iter().zip(&self.x).map(|(a, b)| a - b).collect();
            let t = truncate_sample(&y, l as f64, &self.cfg.dec, &self.levels[&l]);
            for ((o, ti), xi) in out.iter_mut().zip(t).zip(&self.x) {
                *o = ti + xi;
            }
        }
    }

    pub fn endpoint(&self, rng: &mut Rng) -> Vec<f64> {
        let alg = self.cfg.dec.algebra();
        let d = alg.dim();
        let mut acc = vec![0.0; d];
        let mut tmp = vec![0.0; d];
        let mut inc = vec![0.0; d];
        let mut scratch = Vec::new();
        for i in 0..self.cfg.steps {
            self.increment(i, rng, &mut inc);
            alg.mul_into(&acc, &inc, &mut tmp, &mut scratch);
            std::mem::swap(&mut acc, &mut tmp);
        }
        for t in &self.tail {
            alg.mul_into(&acc, t, &mut tmp, &mut scratch);
            std::mem::swap(&mut acc, &mut tmp);
        }
        if self.cfg.rescale {
            acc = self.cfg.dec.dilate_unchecked(1.0 / (self.cfg.steps as f64).sqrt(), &acc);
        }
        acc
    }

    /// `W^(N)(t)` on a nondecreasing grid of times.
    pub fn path(&self, grid: &[f64], rng: &mut Rng) -> Vec<Vec<f64>> {
        let alg = self.cfg.dec.algebra();
        let d = alg.dim();
        let n = self.cfg.steps as f64;
        let mut scratch = Vec::new();
        let mut prefix = vec![0.0; d];
        let mut tmp = vec![0.0; d];
        let mut k = 0usize;
        let mut next = vec![0.0; d];
        let mut have_next = false;
        let mut out = Vec::with_capacity(grid.len());
        for &t in grid {
            let tn = t * n;
            let target = tn.floor() as usize;
            while k < target {
                if !have_next {
                    self.increment(k, rng, &mut next);
                }
                have_next = false;
                alg.mul_into(&prefix, &next, &mut tmp, &mut scratch);
                std::mem::swap(&mut prefix, &mut tmp);
                k += 1;
            }
            let frac = tn - target as f64;
            let mut v = prefix.clone();
            if frac > 0.0 {
                if !have_next {
                    self.increment(k, rng, &mut next);
                    have_next = true;
                }
                let part: Vec<f64> = next.iter().map(|a| frac * a).collect();
                alg.mul_into(&v, &part, &mut tmp, &mut scratch);
                v.copy_from_slice(&tmp);
            }
            let drift: Vec<f64> = self.x.iter().map(|a| -tn * a).collect();
            alg.mul_into(&v, &drift, &mut tmp, &mut scratch);
            out.push(self.cfg.dec.dilate_unchecked(1.0 / n.sqrt(), &tmp));
        }
        out
    }
}

fn gradual_level(n: usize, gamma: f64) -> u64 {
    ((n as f64).powf(1.0 - gamma).floor() as u64).max(1)
}

/// `D_{1/√N}(X_1 * ... * X_N * (−N X))`, with the configured truncation,
/// recentering and rescaling.
pub fn walk_endpoint(cfg: &WalkConfig, rng: &mut Rng) -> Result<Vec<f64>> {
    Ok(Walker::new(cfg)?.endpoint(rng))
}

/// `cfg.trials` endpoints; trial `i` uses stream `i` of `cfg.seed`.
pub fn walk_batch(cfg: &WalkConfig) -> Result<SampleBatch> {
    let w = Walker::new(cfg)?;
    let rows: Vec<f64> = (0..cfg.trials as u64)
        .into_par_iter()
        .flat_map_iter(|t| w.endpoint(&mut stream_rng(cfg.seed, t)))
        .collect();
    SampleBatch::new(cfg.dec.algebra().basis_names().to_vec(), rows, cfg.meta("walk"))
}

/// One interpolated path per trial, evaluated on `grid`.
pub fn interpolated_paths(cfg: &WalkConfig, grid: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
    if grid.iter().any(|t| *t < 0.0 || !t.is_finite()) || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("time grid must be nonnegative and nondecreasing".into()));
    }
    let w = Walker::new(cfg)?;
    Ok((0..cfg.trials as u64).into_par_iter().map(|t| w.path(grid, &mut stream_rng(cfg.seed, t))).collect())
}

pub fn interpolated_path(cfg: &WalkConfig, grid: &[f64], rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
    if grid.iter().any(|t| *t < 0.0 || !t.is_finite()) || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("time grid must be nonnegative and nondecreasing".into()));
    }
    Ok(Walker::new(cfg)?.path(grid, rng))
}

/// `sup_{s<t} ‖x(s)^{-1} * x(t)‖ / |t − s|^α` over grid pairs, with the group
/// law of `law`.
pub fn holder_statistic(path: &[Vec<f64>], grid: &[f64], law: &LieAlgebra, alpha: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("Hölder exponent must lie in [0, 1/2), got {alpha}")));
    }
    if path.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: path.len() });
    }
    let d = law.dim();
    let mut tmp = vec![0.0; d];
    let mut scratch = Vec::new();
    let mut best: f64 = 0.0;
    for i in 0..path.len() {
        let inv: Vec<f64> = path[i].iter().map(|v| -v).collect();
        for j in (i + 1)..path.len() {
            let dt = grid[j] - grid[i];
            if dt <= 0.0 {
                continue;
            }
            law.mul_into(&inv, &path[j], &mut tmp, &mut scratch);
            let norm = tmp.iter().map(|v| v * v).sum::<f64>().sqrt();
            best = best.max(norm / dt.powf(alpha));
        }
    }
    Ok(best)
}

/// `‖D_{1/√N} Π(x̃) − D_{1/√N} Π'(x̃)‖` for one draw of `N` lifted increments,
/// where `Π` and `Π'` are the products in `(g̃, *)` and `(g̃, *')`.
pub fn graded_replacement_gap(cfg: &WalkConfig, ext: &BiasExtension, rng: &mut Rng) -> Result<f64> {
    cfg.validate()?;
    let d = ext.dim();
    let (a, g) = (ext.algebra(), ext.graded());
    let mut p = vec![0.0; d];
    let mut pg = vec![0.0; d];
    let mut tmp = vec![0.0; d];
    let mut scratch = Vec::new();
    let mut x = vec![0.0; cfg.dec.dim()];
    for _ in 0..cfg.steps {
        cfg.measure.sample_into(rng, &mut x);
        let lifted = ext.lift_increment(&x);
        a.mul_into(&p, &lifted, &mut tmp, &mut scratch);
        std::mem::swap(&mut p, &mut tmp);
        g.mul_into(&pg, &lifted, &mut tmp, &mut scratch);
        std::mem::swap(&mut pg, &mut tmp);
    }
    let r = 1.0 / (cfg.steps as f64).sqrt();
    let (u, v) = (ext.dilate_unchecked(r, &p), ext.dilate_unchecked(r, &pg));
    Ok(u.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::heisenberg;
    use crate::scalar::qi;

    fn heis(xbar: [i64; 3]) -> WeightDecomposition {
        WeightDecomposition::for_bias(&heisenberg(), &xbar.map(qi)).unwrap()
    }

    #[test]
    fn deterministic_drift_gives_zero() {
        let dec = heis([0, 1, 0]);
        let m = IncrementMeasure::atomic(vec![(vec![0.0, 1.0, 0.0], 1.0)]).unwrap();
        let cfg = WalkConfig::new(dec, m, 50);
        let e = walk_endpoint(&cfg, &mut stream_rng(0, 0)).unwrap();
        assert!(e.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn single_trial_batch_matches_endpoint() {
        let dec = heis([0, 0, 0]);
        let m = IncrementMeasure::standard_gaussian(vec![0.0; 3], &[0, 1]).unwrap();
        let cfg = WalkConfig::new(dec, m, 20).trials(1).seed(9);
        let b = walk_batch(&cfg).unwrap();
        let e = walk_endpoint(&cfg, &mut stream_rng(9, 0)).unwrap();
        assert_eq!(b.row(0), &e[..]);
        assert_eq!(walk_batch(&cfg).unwrap(), b);
    }

    #[test]
    fn path_matches_endpoint_on_grid() {
        let dec = heis([0, 1, 0]);
        let m = IncrementMeasure::standard_gaussian(vec![0.0, 1.0, 0.0], &[0, 1]).unwrap();
        let n = 16;
        let cfg = WalkConfig::new(dec.clone(), m.clone(), n).seed(4);
        let grid = [0.0, 0.25, 0.3, 1.0];
        let path = interpolated_path(&cfg, &grid, &mut stream_rng(4, 0)).unwrap();
        assert!(path[0].iter().all(|v| *v == 0.0));
        let end = walk_endpoint(&cfg, &mut stream_rng(4, 0)).unwrap();
        for (a, b) in path[3].iter().zip(&end) {
            assert!((a - b).abs() < 1e-12);
        }
        // k = 4 steps with recentering −4X and dilation D_{1/√16}
        let short = WalkConfig::new(dec.clone(), m, 4).rescale(false);
        let raw = walk_endpoint(&short, &mut stream_rng(4, 0)).unwrap();
        let expect = dec.dilate(0.25, &raw).unwrap();
        for (a, b) in path[1].iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn holder_examples() {
        let a = LieAlgebra::abelian(2);
        let grid = [0.0, 0.5, 1.0];
        let line: Vec<Vec<f64>> = grid.iter().map(|t| vec![t * 3.0, t * 4.0]).collect();
        assert!((holder_statistic(&line, &grid, &a, 0.0).unwrap() - 5.0).abs() < 1e-12);
        let constant = vec![vec![1.0, 1.0]; 3];
        assert_eq!(holder_statistic(&constant, &grid, &a, 0.3).unwrap(), 0.0);
        assert!(holder_statistic(&line, &grid, &a, 0.5).is_err());
    }
}
