//! Increment laws: specification, sampling, closed-form moments, the
//! truncation operator `T_N`, and an aperiodicity heuristic.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use num_traits::Zero;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::decomposition::WeightDecomposition;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Rng};
use crate::scalar::{format_q, parse_q, q_from_f64, q_to_f64, Q};

/// A rational number that reads from JSON numbers (exactly) or from strings
/// such as `"1/3"`.
#[derive(Clone, Debug, PartialEq)]
pub struct Num(pub Q);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_q(&self.0))
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            F(f64),
            S(String),
        }
        let q = match Repr::deserialize(d)? {
            Repr::F(x) => q_from_f64(x),
            Repr::S(s) => parse_q(&s),
        };
        q.map(Num).map_err(serde::de::Error::custom)
    }
}

impl From<f64> for Num {
    fn from(x: f64) -> Self {
        Num(q_from_f64(x).expect("finite"))
    }
}

fn nums(v: &[f64]) -> Vec<Num> {
    v.iter().map(|&x| Num::from(x)).collect()
}

fn floats(v: &[Num]) -> Vec<f64> {
    v.iter().map(|n| q_to_f64(&n.0)).collect()
}

/// Measure JSON schema (`kind` selects the variant).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    /// Finitely many atoms `[coords, probability]`.
    Atomic { atoms: Vec<(Vec<Num>, Num)> },
    /// Gaussian with the given mean and (positive semidefinite) covariance.
    Gaussian { mean: Vec<Num>, cov: Vec<Vec<Num>> },
    /// Independent uniform coordinates on the box `[low, high]`.
    Uniform { low: Vec<Num>, high: Vec<Num> },
    /// Law of `x + shift` for `x` drawn from `base`.
    Shifted { base: Box<MeasureSpec>, shift: Vec<Num> },
    /// Sum of independent draws from each factor; with factors living on
    /// complementary coordinates this is the product measure.
    Product { factors: Vec<MeasureSpec> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureJson {
    #[serde(flatten)]
    pub spec: MeasureSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment_order: Option<f64>,
}

#[derive(Clone, Debug)]
enum Sampler {
    Atomic { atoms: Vec<Vec<f64>>, index: WeightedIndex<f64> },
    Gaussian { mean: Vec<f64>, factor: Vec<Vec<f64>> },
    Uniform { low: Vec<f64>, width: Vec<f64> },
    Shifted { base: Box<Sampler>, shift: Vec<f64> },
    Product { factors: Vec<Sampler> },
}

impl Sampler {
    fn add_sample(&self, rng: &mut Rng, out: &mut [f64]) {
        match self {
            Sampler::Atomic { atoms, index } => {
                for (o, a) in out.iter_mut().zip(&atoms[index.sample(rng)]) {
                    *o += a;
                }
            }
            Sampler::Gaussian { mean, factor } => {
                for (o, m) in out.iter_mut().zip(mean) {
                    *o += m;
                }
                for col in factor {
                    let z: f64 = rng.sample(StandardNormal);
                    for (o, c) in out.iter_mut().zip(col) {
                        *o += c * z;
                    }
                }
            }
            Sampler::Uniform { low, width } => {
                for ((o, l), w) in out.iter_mut().zip(low).zip(width) {
                    *o += l + w * rng.random::<f64>();
                }
            }
            Sampler::Shifted { base, shift } => {
                base.add_sample(rng, out);
                for (o, s) in out.iter_mut().zip(shift) {
                    *o += s;
                }
            }
            Sampler::Product { factors } => {
                for f in factors {
                    f.add_sample(rng, out);
                }
            }
        }
    }
}

/// A validated, sampleable increment law on `g` (coordinates in the algebra basis).
#[derive(Clone, Debug)]
pub struct IncrementMeasure {
    spec: MeasureSpec,
    dim: usize,
    moment_order: Option<f64>,
    sampler: Sampler,
}

fn check_len(v: usize, dim: usize) -> Result<()> {
    if v != dim {
        Err(Error::DimensionMismatch { expected: dim, got: v })
    } else {
        Ok(())
    }
}

fn spec_dim(spec: &MeasureSpec) -> Result<usize> {
    Ok(match spec {
        MeasureSpec::Atomic { atoms } => {
            atoms.first().map(|a| a.0.len()).ok_or_else(|| Error::InvalidMeasure("no atoms".into()))?
        }
        MeasureSpec::Gaussian { mean, .. } => mean.len(),
        MeasureSpec::Uniform { low, .. } => low.len(),
        MeasureSpec::Shifted { shift, .. } => shift.len(),
        MeasureSpec::Product { factors } => {
            spec_dim(factors.first().ok_or_else(|| Error::InvalidMeasure("no factors".into()))?)?
        }
    })
}

fn build_sampler(spec: &MeasureSpec, dim: usize) -> Result<Sampler> {
    Ok(match spec {
        MeasureSpec::Atomic { atoms } => {
            let mut total = Q::zero();
            for (x, p) in atoms {
                check_len(x.len(), dim)?;
                if p.0 < Q::zero() {
                    return Err(Error::InvalidMeasure("negative atom probability".into()));
                }
                total += &p.0;
            }
            if (q_to_f64(&total) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidMeasure(format!("probabilities sum to {}", q_to_f64(&total))));
            }
            let weights: Vec<f64> = atoms.iter().map(|(_, p)| q_to_f64(&p.0)).collect();
            let index = WeightedIndex::new(weights).map_err(|e| Error::InvalidMeasure(e.to_string()))?;
            Sampler::Atomic { atoms: atoms.iter().map(|(x, _)| floats(x)).collect(), index }
        }
        MeasureSpec::Gaussian { mean, cov } => {
            check_len(mean.len(), dim)?;
            check_len(cov.len(), dim)?;
            for r in cov {
                check_len(r.len(), dim)?;
            }
            let c: Vec<Vec<f64>> = cov.iter().map(|r| floats(r)).collect();
            let scale = c.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
            for i in 0..dim {
                for j in 0..dim {
                    if (c[i][j] - c[j][i]).abs() > 1e-12 * scale {
                        return Err(Error::InvalidMeasure("covariance is not symmetric".into()));
                    }
                }
            }
            let (vals, vecs) = sym_eigen(&c);
            if vals.iter().any(|&l| l < -1e-10 * scale) {
                return Err(Error::InvalidMeasure("covariance is not positive semidefinite".into()));
            }
            let factor = vals
                .iter()
                .zip(&vecs)
                .filter(|(l, _)| **l > 1e-14 * scale)
                .map(|(l, v)| v.iter().map(|x| x * l.sqrt()).collect())
                .collect();
            Sampler::Gaussian { mean: floats(mean), factor }
        }
        MeasureSpec::Uniform { low, high } => {
            check_len(low.len(), dim)?;
            check_len(high.len(), dim)?;
            if low.iter().zip(high).any(|(l, h)| l.0 > h.0) {
                return Err(Error::InvalidMeasure("uniform box with low > high".into()));
            }
            let (l, h) = (floats(low), floats(high));
            Sampler::Uniform { width: h.iter().zip(&l).map(|(h, l)| h - l).collect(), low: l }
        }
        MeasureSpec::Shifted { base, shift } => {
            check_len(shift.len(), dim)?;
            Sampler::Shifted { base: Box::new(build_sampler(base, dim)?), shift: floats(shift) }
        }
        MeasureSpec::Product { factors } => Sampler::Product {
            factors: factors.iter().map(|f| build_sampler(f, dim)).collect::<Result<_>>()?,
        },
    })
}

/// Eigenvalues and eigenvectors (as vectors) of a symmetric matrix.
pub(crate) fn sym_eigen(c: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = c.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (c[i][j] + c[j][i]));
    let e = SymmetricEigen::new(m);
    let vals = e.eigenvalues.iter().copied().collect();
    let vecs = (0..n).map(|k| e.eigenvectors.column(k).iter().copied().collect()).collect();
    (vals, vecs)
}

/// Symmetric positive semidefinite square root.
pub(crate) fn sym_sqrt(c: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = c.len();
    let (vals, vecs) = sym_eigen(c);
    let mut out = vec![vec![0.0; n]; n];
    for (l, v) in vals.iter().zip(&vecs) {
        let s = l.max(0.0).sqrt();
        for i in 0..n {
            for j in 0..n {
                out[i][j] += s * v[i] * v[j];
            }
        }
    }
    out
}

impl IncrementMeasure {
    pub fn new(spec: MeasureSpec, moment_order: Option<f64>) -> Result<Self> {
        let dim = spec_dim(&spec)?;
        let sampler = build_sampler(&spec, dim)?;
        Ok(Self { spec, dim, moment_order, sampler })
    }

    pub fn from_json(j: MeasureJson) -> Result<Self> {
        Self::new(j.spec, j.moment_order)
    }

    pub fn to_json(&self) -> MeasureJson {
        MeasureJson { spec: self.spec.clone(), moment_order: self.moment_order }
    }

    pub fn atomic(atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let atoms = atoms.into_iter().map(|(x, p)| (nums(&x), Num::from(p))).collect();
        Self::new(MeasureSpec::Atomic { atoms }, None)
    }

    pub fn atomic_exact(atoms: Vec<(Vec<Q>, Q)>) -> Result<Self> {
        let atoms = atoms.into_iter().map(|(x, p)| (x.into_iter().map(Num).collect(), Num(p))).collect();
        Self::new(MeasureSpec::Atomic { atoms }, None)
    }

    pub fn gaussian(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let cov = cov.iter().map(|r| nums(r)).collect();
        Self::new(MeasureSpec::Gaussian { mean: nums(&mean), cov }, None)
    }

    /// Gaussian with mean `mean` and identity covariance on the listed coordinates.
    pub fn standard_gaussian(mean: Vec<f64>, coords: &[usize]) -> Result<Self> {
        let n = mean.len();
        let cov = (0..n).map(|i| (0..n).map(|j| if i == j && coords.contains(&i) { 1.0 } else { 0.0 }).collect()).collect();
        Self::gaussian(mean, cov)
    }

    pub fn uniform(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        Self::new(MeasureSpec::Uniform { low: nums(&low), high: nums(&high) }, None)
    }

    pub fn shifted(&self, shift: Vec<f64>) -> Result<Self> {
        Self::new(MeasureSpec::Shifted { base: Box::new(self.spec.clone()), shift: nums(&shift) }, self.moment_order)
    }

    pub fn product(factors: Vec<IncrementMeasure>) -> Result<Self> {
        Self::new(MeasureSpec::Product { factors: factors.into_iter().map(|f| f.spec).collect() }, None)
    }

    pub fn with_moment_order(mut self, m: f64) -> Self {
        self.moment_order = Some(m);
        self
    }

    pub fn spec(&self) -> &MeasureSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Declared moment order (advisory; defaults to 2).
    pub fn moment_order(&self) -> f64 {
        self.moment_order.unwrap_or(2.0)
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.sampler.add_sample(rng, &mut out);
        out
    }

    pub fn sample_into(&self, rng: &mut Rng, out: &mut [f64]) {
        out.fill(0.0);
        self.sampler.add_sample(rng, out);
    }

    /// Exact mean.
    pub fn mean_exact(&self) -> Vec<Q> {
        mean_of(&self.spec, self.dim)
    }

    pub fn mean(&self) -> Vec<f64> {
        self.mean_exact().iter().map(q_to_f64).collect()
    }

    /// Covariance matrix in the algebra basis.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        cov_of(&self.spec, self.dim)
    }

    /// `E e^{-2πi η(x)}` for a linear form `η` given in the dual basis.
    pub fn characteristic(&self, eta: &[f64]) -> Complex64 {
        cf_of(&self.spec, eta)
    }

    /// Whether `x - E x` and `E x - x` have the same law.
    pub fn symmetric_about_mean(&self) -> bool {
        symmetric(&self.spec, self.dim)
    }
}

fn mean_of(spec: &MeasureSpec, dim: usize) -> Vec<Q> {
    match spec {
        MeasureSpec::Atomic { atoms } => {
            let mut m = vec![Q::zero(); dim];
            for (x, p) in atoms {
                for (mi, xi) in m.iter_mut().zip(x) {
                    *mi += &xi.0 * &p.0;
                }
            }
            m
        }
        MeasureSpec::Gaussian { mean, .. } => mean.iter().map(|n| n.0.clone()).collect(),
        MeasureSpec::Uniform { low, high } => {
            low.iter().zip(high).map(|(l, h)| (&l.0 + &h.0) / Q::from_integer(2.into())).collect()
        }
        MeasureSpec::Shifted { base, shift } => {
            mean_of(base, dim).into_iter().zip(shift).map(|(m, s)| m + &s.0).collect()
        }
        MeasureSpec::Product { factors } => {
            let mut m = vec![Q::zero(); dim];
            for f in factors {
                for (a, b) in m.iter_mut().zip(mean_of(f, dim)) {
                    *a += b;
                }
            }
            m
        }
    }
}

fn cov_of(spec: &MeasureSpec, dim: usize) -> Vec<Vec<f64>> {
    match spec {
        MeasureSpec::Atomic { atoms } => {
            let m: Vec<f64> = mean_of(spec, dim).iter().map(q_to_f64).collect();
            let mut c = vec![vec![0.0; dim]; dim];
            for (x, p) in atoms {
                let p = q_to_f64(&p.0);
                let d: Vec<f64> = floats(x).iter().zip(&m).map(|(a, b)| a - b).collect();
                for i in 0..dim {
                    for j in 0..dim {
                        c[i][j] += p * d[i] * d[j];
                    }
                }
            }
            c
        }
        MeasureSpec::Gaussian { cov, .. } => cov.iter().map(|r| floats(r)).collect(),
        MeasureSpec::Uniform { low, high } => {
            let mut c = vec![vec![0.0; dim]; dim];
            for (i, (l, h)) in floats(low).iter().zip(floats(high)).enumerate() {
                c[i][i] = (h - l).powi(2) / 12.0;
            }
            c
        }
        MeasureSpec::Shifted { base, .. } => cov_of(base, dim),
        MeasureSpec::Product { factors } => {
            let mut c = vec![vec![0.0; dim]; dim];
            for f in factors {
                for (r, fr) in c.iter_mut().zip(cov_of(f, dim)) {
                    for (a, b) in r.iter_mut().zip(fr) {
                        *a += b;
                    }
                }
            }
            c
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cf_of(spec: &MeasureSpec, eta: &[f64]) -> Complex64 {
    let phase = |t: f64| Complex64::from_polar(1.0, -2.0 * PI * t);
    match spec {
        MeasureSpec::Atomic { atoms } => atoms.iter().map(|(x, p)| phase(dot(eta, &floats(x))) * q_to_f64(&p.0)).sum(),
        MeasureSpec::Gaussian { mean, cov } => {
            let c: Vec<Vec<f64>> = cov.iter().map(|r| floats(r)).collect();
            let q: f64 = c.iter().enumerate().map(|(i, r)| eta[i] * dot(r, eta)).sum();
            phase(dot(eta, &floats(mean))) * (-2.0 * PI * PI * q).exp()
        }
        MeasureSpec::Uniform { low, high } => {
            let (l, h) = (floats(low), floats(high));
            let mut z = Complex64::new(1.0, 0.0);
            for i in 0..eta.len() {
                let w = h[i] - l[i];
                let u = PI * eta[i] * w;
                let sinc = if u.abs() < 1e-300 { 1.0 } else { u.sin() / u };
                z *= phase(eta[i] * (l[i] + h[i]) / 2.0) * sinc;
            }
            z
        }
        MeasureSpec::Shifted { base, shift } => cf_of(base, eta) * phase(dot(eta, &floats(shift))),
        MeasureSpec::Product { factors } => factors.iter().map(|f| cf_of(f, eta)).product(),
    }
}

fn symmetric(spec: &MeasureSpec, dim: usize) -> bool {
    match spec {
        MeasureSpec::Gaussian { .. } | MeasureSpec::Uniform { .. } => true,
        MeasureSpec::Shifted { base, .. } => symmetric(base, dim),
        MeasureSpec::Product { factors } => factors.iter().all(|f| symmetric(f, dim)),
        MeasureSpec::Atomic { atoms } => {
            let m = mean_of(spec, dim);
            let two = Q::from_integer(2.into());
            atoms.iter().all(|(x, p)| {
                let mirror: Vec<Q> = x.iter().zip(&m).map(|(xi, mi)| &two * mi - &xi.0).collect();
                let mass_at = |v: &[Q]| {
                    atoms
                        .iter()
                        .filter(|(y, _)| y.iter().map(|n| &n.0).eq(v.iter()))
                        .fold(Q::zero(), |acc, (_, q)| acc + &q.0)
                };
                let here: Vec<Q> = x.iter().map(|n| n.0.clone()).collect();
                mass_at(&here) == mass_at(&mirror) || p.0.is_zero()
            })
        }
    }
}

/// Per-layer moment `E‖x^(b)‖^{m/b}` with its Monte Carlo standard error
/// (zero when computed exactly).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerMoment {
    pub weight: usize,
    pub exponent: f64,
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentReport {
    /// Abelianized mean `π^(1)(E x)`, in the algebra basis.
    pub xbar: Vec<f64>,
    /// Covariance of the `m^(1)` coordinates (adapted basis of `m^(1)`).
    pub cov_ab: Vec<Vec<f64>>,
    /// `B = E x^(2)`, in the algebra basis.
    pub commutator_mean: Vec<f64>,
    pub layer_moments: Vec<LayerMoment>,
}

/// Covariance of the `m^(1)` adapted coordinates of `measure`.
pub fn abelian_covariance(measure: &IncrementMeasure, dec: &WeightDecomposition) -> Vec<Vec<f64>> {
    let c = measure.covariance();
    let n = dec.dim();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let e: Vec<f64> = (0..n).map(|k| if k == j { 1.0 } else { 0.0 }).collect();
            dec.layer_coords(1, &e)
        })
        .collect();
    // rows[j][a] = coefficient of coordinate j in layer-1 coordinate a
    let q = dec.layer_dim(1);
    let mut out = vec![vec![0.0; q]; q];
    for a in 0..q {
        for b in 0..q {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += rows[i][a] * c[i][j] * rows[j][b];
                }
            }
            out[a][b] = s;
        }
    }
    out
}

/// Closed-form first and second moments plus per-layer moments. Layer moments
/// are exact for atomic laws and estimated from `nsamples` draws otherwise.
pub fn abelian_stats(
    measure: &IncrementMeasure,
    dec: &WeightDecomposition,
    nsamples: usize,
    seed: u64,
) -> Result<MomentReport> {
    if measure.dim() != dec.dim() {
        return Err(Error::DimensionMismatch { expected: dec.dim(), got: measure.dim() });
    }
    let mean = measure.mean();
    let cov_ab = abelian_covariance(measure, dec);
    let (vals, _) = sym_eigen(&cov_ab);
    let max = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min = vals.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if vals.is_empty() || min <= 1e-12 * max.max(1.0) {
        return Err(Error::DegenerateCovariance { min_eigenvalue: if vals.is_empty() { 0.0 } else { min } });
    }
    let m = measure.moment_order();
    let mut layer_moments = Vec::new();
    for b in 1..=dec.b_max() {
        if dec.layer_dim(b) == 0 {
            continue;
        }
        let exponent = m / b as f64;
        let norm = |x: &[f64]| dec.layer_coords(b, x).iter().map(|v| v * v).sum::<f64>().sqrt().powf(exponent);
        let (estimate, std_error) = match &measure.spec {
            MeasureSpec::Atomic { atoms } => {
                (atoms.iter().map(|(x, p)| q_to_f64(&p.0) * norm(&floats(x))).sum(), 0.0)
            }
            _ => {
                let mut rng = stream_rng(seed, b as u64);
                let mut s = 0.0;
                let mut s2 = 0.0;
                let mut x = vec![0.0; measure.dim()];
                for _ in 0..nsamples {
                    measure.sample_into(&mut rng, &mut x);
                    let v = norm(&x);
                    s += v;
                    s2 += v * v;
                }
                let n = nsamples.max(1) as f64;
                let mu = s / n;
                (mu, ((s2 / n - mu * mu).max(0.0) / n).sqrt())
            }
        };
        layer_moments.push(LayerMoment { weight: b, exponent, estimate, std_error });
    }
    Ok(MomentReport { xbar: dec.project(1, &mean), cov_ab, commutator_mean: dec.project(2, &mean), layer_moments })
}

/// Mean-restoring constant of the truncation at level `N`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Centering {
    /// `c_N`, an element of `m^(1)` in the algebra basis.
    pub c: Vec<f64>,
    /// `P(‖x^(1)‖ > √N)`.
    pub tail_mass: f64,
    pub std_error: f64,
    pub exact: bool,
}

/// `c_N = −P(‖x^(1)‖ > √N)^{-1} E[x^(1) 1{‖x^(1)‖ ≤ √N}]` for the centered
/// first-layer coordinate `x^(1) = π^(1)(x) − X`. Atomic laws are summed
/// exactly; other laws use `nsamples` draws, as antithetic pairs when the law
/// is symmetric about its mean.
pub fn truncation_centering(
    measure: &IncrementMeasure,
    n: f64,
    dec: &WeightDecomposition,
    nsamples: usize,
    seed: u64,
) -> Result<Centering> {
    let x_lift = dec.x_lift_f64();
    let q = dec.layer_dim(1);
    let threshold = n.sqrt();
    let centered = |x: &[f64]| {
        let d: Vec<f64> = x.iter().zip(&x_lift).map(|(a, b)| a - b).collect();
        dec.layer_coords(1, &d)
    };
    let mut kept_sum = vec![0.0; q];
    let (tail, std_error, exact) = match &measure.spec {
        MeasureSpec::Atomic { atoms } => {
            let mut tail = 0.0;
            for (x, p) in atoms {
                let p = q_to_f64(&p.0);
                let y = centered(&floats(x));
                if y.iter().map(|v| v * v).sum::<f64>().sqrt() > threshold {
                    tail += p;
                } else {
                    for (k, v) in kept_sum.iter_mut().zip(&y) {
                        *k += p * v;
                    }
                }
            }
            (tail, 0.0, true)
        }
        _ => {
            let mut rng = stream_rng(seed, 0);
            let antithetic = measure.symmetric_about_mean();
            let mean = measure.mean();
            let mut x = vec![0.0; measure.dim()];
            let mut count_tail = 0usize;
            let mut total = 0usize;
            let mut sq = 0.0;
            let mut add = |y: Vec<f64>, kept: &mut Vec<f64>, count_tail: &mut usize| {
                if y.iter().map(|v| v * v).sum::<f64>().sqrt() > threshold {
                    *count_tail += 1;
                } else {
                    sq += y.iter().map(|v| v * v).sum::<f64>();
                    for (k, v) in kept.iter_mut().zip(&y) {
                        *k += v;
                    }
                }
            };
            while total < nsamples {
                measure.sample_into(&mut rng, &mut x);
                add(centered(&x), &mut kept_sum, &mut count_tail);
                total += 1;
                if antithetic {
                    let mirror: Vec<f64> = x.iter().zip(&mean).map(|(a, m)| 2.0 * m - a).collect();
                    add(centered(&mirror), &mut kept_sum, &mut count_tail);
                    total += 1;
                }
            }
            let nt = total as f64;
            for k in kept_sum.iter_mut() {
                *k /= nt;
            }
            (count_tail as f64 / nt, (sq / nt / nt).sqrt(), false)
        }
    };
    if tail == 0.0 {
        return Ok(Centering { c: vec![0.0; dec.dim()], tail_mass: 0.0, std_error: 0.0, exact });
    }
    let mut adapted = vec![0.0; dec.dim()];
    let mut k = 0;
    for (i, w) in dec.weights().iter().enumerate() {
        if *w == 1 {
            adapted[i] = -kept_sum[k] / tail;
            k += 1;
        }
    }
    Ok(Centering { c: dec.from_adapted(&adapted), tail_mass: tail, std_error: std_error / tail, exact })
}

/// Layer-wise truncation `T_N` of a centered extension sample `x − X`: layer
/// `b ≥ 2` is zeroed when `‖x^(b)‖ > N^{b/2}`; the first layer is replaced by
/// `c_N` when `‖x^(1)‖ > N^{1/2}`. Norms are Euclidean in adapted coordinates.
pub fn truncate_sample(x: &[f64], n: f64, dec: &WeightDecomposition, c_n: &[f64]) -> Vec<f64> {
    let mut c = dec.to_adapted(x);
    let c_ad = dec.to_adapted(c_n);
    let weights = dec.weights();
    for b in 1..=dec.b_max() {
        let norm: f64 = c.iter().zip(weights).filter(|(_, w)| **w == b).map(|(v, _)| v * v).sum::<f64>().sqrt();
        if norm > n.powf(b as f64 / 2.0) {
            for (i, w) in weights.iter().enumerate() {
                if *w == b {
                    c[i] = if b == 1 { c_ad[i] } else { 0.0 };
                }
            }
        }
    }
    dec.from_adapted(&c)
}

/// Largest modulus of the abelianized characteristic function over `grid`
/// (frequencies in the dual of the adapted `m^(1)` coordinates). Values near 1
/// flag a lattice law.
pub fn aperiodicity_heuristic(measure: &IncrementMeasure, dec: &WeightDecomposition, grid: &[Vec<f64>]) -> Result<f64> {
    let q = dec.layer_dim(1);
    let n = dec.dim();
    // layer-1 coordinate a of x is Σ_j r[a][j] x_j
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let e: Vec<f64> = (0..n).map(|k| if k == j { 1.0 } else { 0.0 }).collect();
            dec.layer_coords(1, &e)
        })
        .collect();
    let mut best: f64 = 0.0;
    for xi in grid {
        check_len(xi.len(), q)?;
        if xi.iter().map(|v| v * v).sum::<f64>() < 1e-24 {
            return Err(Error::InvalidParameter("frequency grid must exclude the origin".into()));
        }
        let eta: Vec<f64> = (0..n).map(|j| (0..q).map(|a| xi[a] * rows[j][a]).sum()).collect();
        best = best.max(measure.characteristic(&eta).norm());
    }
    Ok(best.min(1.0))
}
