//! The limiting diffusion, simulated through its time-homogeneous lift.
//!
//! `Z` solves `dZ = Σ E_i ∘ dB_i + (B + Y) dt` in `(g̃, *')` and the process of
//! interest is `W(t) = Z(t) *' (−tY)`. Euler steps are left-invariant:
//! `Z ← Z *' (√h Σ g_i E_i + h (B + Y))`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::batch::{BatchMeta, SampleBatch};
use crate::decomposition::{BiasExtension, WeightDecomposition};
use crate::error::{Error, Result};
use crate::linalg;
use crate::measure::{sym_eigen, sym_sqrt, MomentReport};
use crate::rng::{derive_seed, stream_rng, Rng};
use crate::scalar::{q_to_f64, q_vec_from_f64};
use crate::stats::{two_sample_distance, ComparisonReport};

/// Diffusion data `(E_1..E_q, B, Y)`.
#[derive(Clone, Debug)]
pub struct GeneratorSpec {
    ext: BiasExtension,
    frame: Vec<Vec<f64>>,
    drift: Vec<f64>,
    y: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorJson {
    pub frame: Vec<Vec<f64>>,
    pub drift: Vec<f64>,
    /// `Y` in `g̃` coordinates (`χ` last).
    pub homogenizer: Vec<f64>,
}

const MEMBERSHIP_TOL: f64 = 1e-9;

fn residual(dec: &WeightDecomposition, b: usize, v: &[f64]) -> f64 {
    let p = dec.project(b, v);
    let scale = v.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    p.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
}

impl GeneratorSpec {
    /// `frame` must span `m^(1)`; `drift` must lie in `m^(2)`. `Y = χ`.
    pub fn new(dec: &WeightDecomposition, frame: Vec<Vec<f64>>, drift: Vec<f64>) -> Result<Self> {
        let n = dec.dim();
        for v in frame.iter().chain(std::iter::once(&drift)) {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
        }
        if let Some(v) = frame.iter().find(|v| residual(dec, 1, v) > MEMBERSHIP_TOL) {
            return Err(Error::InvalidParameter(format!("frame vector {v:?} is not in the first layer")));
        }
        if residual(dec, 2, &drift) > MEMBERSHIP_TOL {
            return Err(Error::InvalidParameter(format!("drift {drift:?} is not in the second layer")));
        }
        let q = dec.layer_dim(1);
        let coords: Vec<Vec<_>> = frame.iter().map(|v| q_vec_from_f64(&dec.layer_coords(1, v))).collect::<Result<_>>()?;
        let rank = linalg::rank(coords, q);
        if rank < q {
            return Err(Error::GeneratorsDoNotSpan { rank, needed: q });
        }
        let ext = BiasExtension::new(dec)?;
        let y = ext.chi();
        Ok(Self { ext, frame, drift, y })
    }

    pub fn decomposition(&self) -> &WeightDecomposition {
        self.ext.decomposition()
    }

    pub fn extension(&self) -> &BiasExtension {
        &self.ext
    }

    pub fn frame(&self) -> &[Vec<f64>] {
        &self.frame
    }

    pub fn drift(&self) -> &[f64] {
        &self.drift
    }

    pub fn homogenizer(&self) -> &[f64] {
        &self.y
    }

    pub fn to_json(&self) -> GeneratorJson {
        GeneratorJson { frame: self.frame.clone(), drift: self.drift.clone(), homogenizer: self.y.clone() }
    }
}

/// `E_i` = columns of `P_1 Cov^{1/2}` with `P_1` the adapted basis of `m^(1)`,
/// `B` = the `m^(2)` part of the mean.
pub fn generator_from_measure(dec: &WeightDecomposition, report: &MomentReport) -> Result<GeneratorSpec> {
    let q = dec.layer_dim(1);
    if report.cov_ab.len() != q {
        return Err(Error::DimensionMismatch { expected: q, got: report.cov_ab.len() });
    }
    let (vals, _) = sym_eigen(&report.cov_ab);
    let max = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min = vals.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if q == 0 || min <= 1e-12 * max.max(1.0) {
        return Err(Error::DegenerateCovariance { min_eigenvalue: if q == 0 { 0.0 } else { min } });
    }
    let root = sym_sqrt(&report.cov_ab);
    let basis: Vec<Vec<f64>> = dec.layer(1).iter().map(|v| v.iter().map(q_to_f64).collect()).collect();
    let n = dec.dim();
    let frame = (0..q)
        .map(|i| {
            let mut e = vec![0.0; n];
            for (a, p) in basis.iter().enumerate() {
                for (ek, pk) in e.iter_mut().zip(p) {
                    *ek += root[a][i] * pk;
                }
            }
            e
        })
        .collect();
    GeneratorSpec::new(dec, frame, report.commutator_mean.clone())
}

#[derive(Clone, Debug)]
pub struct DiffusionConfig {
    pub generator: GeneratorSpec,
    pub horizon: f64,
    pub dt: f64,
    pub trials: usize,
    pub seed: u64,
}

impl DiffusionConfig {
    pub fn new(generator: GeneratorSpec, horizon: f64) -> Self {
        Self { generator, horizon, dt: 1e-3, trials: 100_000, seed: 0 }
    }

    pub fn dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn trials(mut self, t: usize) -> Self {
        self.trials = t;
        self
    }

    pub fn seed(mut self, s: u64) -> Self {
        self.seed = s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= self.horizon && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < dt <= horizon, got dt = {}, horizon = {}",
                self.dt, self.horizon
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be positive".into()));
        }
        Ok(())
    }

    /// Number of Euler steps; the step is shrunk so they end exactly at the horizon.
    pub fn steps(&self) -> usize {
        ((self.horizon / self.dt) - 1e-9).ceil().max(1.0) as usize
    }
}

struct Stepper<'a> {
    gen: &'a GeneratorSpec,
    frame: Vec<Vec<f64>>,
    drift: Vec<f64>,
    steps: usize,
    h: f64,
    horizon: f64,
}

impl<'a> Stepper<'a> {
    fn new(cfg: &'a DiffusionConfig) -> Self {
        let gen = &cfg.generator;
        let ext = &gen.ext;
        let steps = cfg.steps();
        let h = cfg.horizon / steps as f64;
        let frame = gen.frame.iter().map(|e| ext.embed(e)).collect();
        let drift = ext.embed(&gen.drift).iter().zip(&gen.y).map(|(b, y)| b + y).collect();
        Self { gen, frame, drift, steps, h, horizon: cfg.horizon }
    }

    fn endpoint(&self, rng: &mut Rng) -> Vec<f64> {
        let law = self.gen.ext.graded();
        let d = law.dim();
        let mut z = vec![0.0; d];
        let mut tmp = vec![0.0; d];
        let mut inc = vec![0.0; d];
        let mut scratch = Vec::new();
        let sh = self.h.sqrt();
        for _ in 0..self.steps {
            for (v, b) in inc.iter_mut().zip(&self.drift) {
                *v = self.h * b;
            }
            for e in &self.frame {
                let g: f64 = StandardNormal.sample(rng);
                for (v, ei) in inc.iter_mut().zip(e) {
                    *v += sh * g * ei;
                }
            }
            law.mul_into(&z, &inc, &mut tmp, &mut scratch);
            std::mem::swap(&mut z, &mut tmp);
        }
        let back: Vec<f64> = self.gen.y.iter().map(|y| -self.horizon * y).collect();
        law.mul_into(&z, &back, &mut tmp, &mut scratch);
        tmp.truncate(self.gen.decomposition().dim());
        tmp
    }
}

/// One draw of `W(t)` in `g` coordinates.
pub fn simulate_diffusion_endpoint(cfg: &DiffusionConfig, rng: &mut Rng) -> Result<Vec<f64>> {
    cfg.validate()?;
    Ok(Stepper::new(cfg).endpoint(rng))
}

/// `cfg.trials` draws of `W(t)`; trial `i` uses stream `i` of `cfg.seed`.
pub fn diffusion_batch(cfg: &DiffusionConfig) -> Result<SampleBatch> {
    cfg.validate()?;
    let s = Stepper::new(cfg);
    let rows: Vec<f64> = (0..cfg.trials as u64)
        .into_par_iter()
        .flat_map_iter(|t| s.endpoint(&mut stream_rng(cfg.seed, t)))
        .collect();
    let meta = BatchMeta {
        kind: "diffusion".into(),
        horizon: Some(cfg.horizon),
        dt: Some(cfg.dt),
        seed: cfg.seed,
        trials: cfg.trials,
        ..Default::default()
    };
    SampleBatch::new(cfg.generator.decomposition().algebra().basis_names().to_vec(), rows, meta)
}

fn batch_at(gen: &GeneratorSpec, t: f64, dt: f64, trials: usize, seed: u64) -> Result<SampleBatch> {
    diffusion_batch(&DiffusionConfig { generator: gen.clone(), horizon: t, dt: dt.min(t), trials, seed })
}

/// Compares `W(rt)` with `D_{√r} W(t)` from independent batches.
pub fn scaling_check(gen: &GeneratorSpec, t: f64, r: f64, trials: usize, dt: f64, seed: u64) -> Result<ComparisonReport> {
    if !(r > 0.0 && t > 0.0) {
        return Err(Error::InvalidParameter(format!("need r > 0 and t > 0, got r = {r}, t = {t}")));
    }
    let a = batch_at(gen, r * t, dt, trials, derive_seed(seed, "scaling-long"))?;
    let dec = gen.decomposition();
    let b = batch_at(gen, t, dt, trials, derive_seed(seed, "scaling-short"))?.map_rows(|x| dec.dilate_unchecked(r.sqrt(), x))?;
    two_sample_distance(&a, &b)
}

/// Compares `W(s) *' Ad(sY) W'(t)` (independent factors) with `W(s + t)`.
pub fn semigroup_check(gen: &GeneratorSpec, s: f64, t: f64, trials: usize, dt: f64, seed: u64) -> Result<ComparisonReport> {
    if !(s >= 0.0 && t > 0.0) {
        return Err(Error::InvalidParameter(format!("need s >= 0 and t > 0, got s = {s}, t = {t}")));
    }
    let ext = &gen.ext;
    let law = ext.graded();
    let n = gen.decomposition().dim();
    let right = batch_at(gen, t, dt, trials, derive_seed(seed, "semigroup-right"))?;
    let left = if s > 0.0 { Some(batch_at(gen, s, dt, trials, derive_seed(seed, "semigroup-left"))?) } else { None };
    let sy: Vec<f64> = gen.y.iter().map(|v| s * v).collect();
    let neg_sy: Vec<f64> = sy.iter().map(|v| -v).collect();
    let rows: Vec<Vec<f64>> = (0..trials)
        .map(|i| {
            let mut scratch = Vec::new();
            let mut a = vec![0.0; ext.dim()];
            let mut b = vec![0.0; ext.dim()];
            law.mul_into(&sy, &ext.embed(right.row(i)), &mut a, &mut scratch);
            law.mul_into(&a, &neg_sy, &mut b, &mut scratch);
            if let Some(l) = &left {
                law.mul_into(&ext.embed(l.row(i)), &b, &mut a, &mut scratch);
                std::mem::swap(&mut a, &mut b);
            }
            b.truncate(n);
            b
        })
        .collect();
    let composed = SampleBatch::from_rows(right.names.clone(), &rows, right.meta.clone())?;
    let whole = batch_at(gen, s + t, dt, trials, derive_seed(seed, "semigroup-whole"))?;
    two_sample_distance(&composed, &whole)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::LieAlgebra;
    use crate::measure::{abelian_stats, IncrementMeasure};
    use crate::presets::heisenberg;
    use crate::scalar::qi;

    fn dec(alg: &LieAlgebra, xbar: &[i64]) -> WeightDecomposition {
        let x: Vec<_> = xbar.iter().map(|v| qi(*v)).collect();
        WeightDecomposition::for_bias(alg, &x).unwrap()
    }

    #[test]
    fn square_root_frame() {
        let d = dec(&heisenberg(), &[0, 0, 0]);
        let m = IncrementMeasure::gaussian(vec![0.0; 3], vec![vec![4.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0; 3]]).unwrap();
        let g = generator_from_measure(&d, &abelian_stats(&m, &d, 10, 0).unwrap()).unwrap();
        let expect = [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        for (e, x) in g.frame().iter().zip(expect) {
            for (a, b) in e.iter().zip(x) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert!(g.drift().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn frame_whitens_covariance() {
        let d = dec(&heisenberg(), &[0, 1, 0]);
        let cov = vec![vec![2.0, 0.7, 0.1], vec![0.7, 1.0, 0.0], vec![0.1, 0.0, 0.5]];
        let m = IncrementMeasure::gaussian(vec![0.0, 1.0, 0.3], cov).unwrap();
        let rep = abelian_stats(&m, &d, 10, 0).unwrap();
        let g = generator_from_measure(&d, &rep).unwrap();
        // E Eᵀ in layer coordinates reproduces the covariance
        let c: Vec<Vec<f64>> = g.frame().iter().map(|e| d.layer_coords(1, e)).collect();
        let q = c[0].len();
        for a in 0..q {
            for b in 0..q {
                let s: f64 = c.iter().map(|v| v[a] * v[b]).sum();
                assert!((s - rep.cov_ab[a][b]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn empty_noise_cancels_drift() {
        let d = dec(&heisenberg(), &[0, 1, 0]);
        let g = GeneratorSpec { ext: BiasExtension::new(&d).unwrap(), frame: vec![], drift: vec![0.0; 3], y: vec![] };
        let g = GeneratorSpec { y: g.ext.chi(), ..g };
        let w = simulate_diffusion_endpoint(&DiffusionConfig::new(g, 1.0), &mut stream_rng(0, 0)).unwrap();
        assert!(w.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn abelian_endpoint_is_gaussian() {
        let a = LieAlgebra::abelian(2);
        let d = dec(&a, &[0, 0]);
        let g = GeneratorSpec::new(&d, vec![vec![1.0, 0.0], vec![1.0, 1.0]], vec![0.0; 2]).unwrap();
        let b = diffusion_batch(&DiffusionConfig::new(g, 1.0).dt(0.25).trials(20_000).seed(3)).unwrap();
        let m = b.mean();
        let cov01 = b.iter_rows().map(|r| (r[0] - m[0]) * (r[1] - m[1])).sum::<f64>() / b.len() as f64;
        let var1 = b.iter_rows().map(|r| (r[1] - m[1]).powi(2)).sum::<f64>() / b.len() as f64;
        assert!(m.iter().all(|v| v.abs() < 0.05));
        assert!((cov01 - 1.0).abs() < 0.06 && (var1 - 1.0).abs() < 0.06);
    }

    #[test]
    fn rejects_bad_config() {
        let d = dec(&heisenberg(), &[0, 0, 0]);
        let g = GeneratorSpec::new(&d, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]], vec![0.0; 3]).unwrap();
        assert!(DiffusionConfig::new(g.clone(), 1.0).dt(2.0).validate().is_err());
        assert!(GeneratorSpec::new(&d, vec![vec![1.0, 0.0, 0.0]], vec![0.0; 3]).is_err());
        assert!(GeneratorSpec::new(&d, vec![vec![0.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]], vec![0.0; 3]).is_err());
    }
}
