//! Reachable points of the limiting law: horizontal products, multiplicative
//! integrals of piecewise-constant paths, the filiform support inequality, and
//! the algebraic Gaussianity and double-cancellation checks.

use num_traits::{One, Zero};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::algebra::{Field, LieAlgebra};
use crate::decomposition::WeightDecomposition;
use crate::diffusion::GeneratorSpec;
use crate::error::{Error, Result};
use crate::linalg::{self, Subspace};
use crate::rng::stream_rng;
use crate::scalar::{format_q, q, q_from_f64, qi, Q};

/// Controls `(u_i, t_i)` with `u_i ∈ m^(1)`, `t_i ≥ 0`, `Σ t_i = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSequence<T> {
    pub controls: Vec<(Vec<T>, T)>,
}

impl<T: Field> ControlSequence<T> {
    pub fn new(controls: Vec<(Vec<T>, T)>) -> Result<Self> {
        if controls.is_empty() {
            return Err(Error::InvalidParameter("empty control sequence".into()));
        }
        if controls.iter().any(|(_, t)| t.as_f64() < 0.0) {
            return Err(Error::InvalidParameter("negative control duration".into()));
        }
        let total: f64 = controls.iter().map(|(_, t)| t.as_f64()).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("control durations sum to {total}, not 1")));
        }
        Ok(Self { controls })
    }
}

fn in_first_layer<T: Field>(dec: &WeightDecomposition, u: &[T]) -> bool {
    let v: Vec<f64> = u.iter().map(|x| x.as_f64()).collect();
    let p = dec.project(1, &v);
    let scale = v.iter().fold(1.0_f64, |m: f64, x: &f64| m.max(x.abs()));
    p.iter().zip(&v).all(|(a, b): (&f64, &f64)| (a - b).abs() <= 1e-9 * scale)
}

fn lift<T: Field>(v: &[f64]) -> Result<Vec<T>> {
    v.iter().map(|x| Ok(T::from_q(&q_from_f64(*x)?))).collect()
}

/// `Π^{*'}_i (u_i *' t_i (B + Y)) *' (−Y)` in `g` coordinates.
pub fn horizontal_endpoint<T: Field>(gen: &GeneratorSpec, controls: &ControlSequence<T>) -> Result<Vec<T>> {
    let dec = gen.decomposition();
    let ext = gen.extension();
    let law = ext.graded();
    let n = dec.dim();
    let b: Vec<T> = ext.embed(&lift::<T>(gen.drift())?);
    let y: Vec<T> = lift(gen.homogenizer())?;
    let by: Vec<T> = b.iter().zip(&y).map(|(p, q)| p.clone() + q.clone()).collect();
    let mut acc = vec![T::zero(); ext.dim()];
    for (u, t) in &controls.controls {
        if u.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: u.len() });
        }
        if !in_first_layer(dec, u) {
            return Err(Error::InvalidParameter(format!("control {u:?} is not in the first layer")));
        }
        let drift: Vec<T> = by.iter().map(|v| t.clone() * v.clone()).collect();
        let step = law.mul(&ext.embed(u), &drift)?;
        acc = law.mul(&acc, &step)?;
    }
    let neg_y: Vec<T> = y.iter().map(|v| -v.clone()).collect();
    let mut out = law.mul(&acc, &neg_y)?;
    out.truncate(n);
    Ok(out)
}

/// Path equal to `values[j]` on `(breakpoints[j], breakpoints[j+1])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePath<T> {
    pub breakpoints: Vec<T>,
    pub values: Vec<Vec<T>>,
}

impl<T: Field> PiecewisePath<T> {
    pub fn new(breakpoints: Vec<T>, values: Vec<Vec<T>>) -> Result<Self> {
        if breakpoints.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "{} breakpoints for {} pieces",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.windows(2).any(|w| w[1].as_f64() <= w[0].as_f64()) {
            return Err(Error::InvalidParameter("breakpoints must be strictly increasing".into()));
        }
        let d = values[0].len();
        if let Some(v) = values.iter().find(|v| v.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: v.len() });
        }
        Ok(Self { breakpoints, values })
    }

    pub fn lengths(&self) -> Vec<T> {
        self.breakpoints.windows(2).map(|w| w[1].clone() - w[0].clone()).collect()
    }
}

fn descents(p: &[usize]) -> usize {
    p.windows(2).filter(|w| w[0] > w[1]).count()
}

fn permutations(r: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for k in 0..r {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..=k).map(move |i| {
                    let mut q = p.clone();
                    q.insert(i, k);
                    q
                })
            })
            .collect();
    }
    out
}

fn nondecreasing(m: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..r {
        out = out
            .into_iter()
            .flat_map(|s: Vec<usize>| {
                let lo = s.last().copied().unwrap_or(0);
                (lo..m).map(move |j| {
                    let mut t = s.clone();
                    t.push(j);
                    t
                })
            })
            .collect();
    }
    out
}

fn binomial(n: usize, k: usize) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

fn factorial(n: usize) -> i64 {
    (1..=n as i64).product()
}

/// Weight of permutation `τ ∈ S_r` in the multiplicative integral:
/// `(−1)^{e(τ)} / (r² C(r−1, e(τ)))` with `e` the descent count.
pub fn strichartz_coefficient(tau: &[usize]) -> Q {
    let r = tau.len();
    let e = descents(tau);
    let sign = if e % 2 == 0 { 1 } else { -1 };
    q(sign, (r * r) as i64 * binomial(r - 1, e))
}

/// Largest step evaluated by the permutation expansion.
pub const STRICHARTZ_MAX_STEP: usize = 4;

/// `∫^{*'} c` over the path's interval in `alg`, usually the graded algebra of
/// a decomposition. Steps up to 4 use the permutation expansion over simplex
/// volumes; larger steps use the exact product of the constant pieces.
pub fn strichartz_integral<T: Field>(alg: &LieAlgebra, path: &PiecewisePath<T>) -> Result<Vec<T>> {
    let n = alg.dim();
    if path.values[0].len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: path.values[0].len() });
    }
    if alg.step() > STRICHARTZ_MAX_STEP {
        return piece_product(alg, path);
    }
    let lens = path.lengths();
    let m = lens.len();
    let mut out = vec![T::zero(); n];
    for (l, c) in lens.iter().zip(&path.values) {
        for (o, ci) in out.iter_mut().zip(c) {
            *o = o.clone() + l.clone() * ci.clone();
        }
    }
    for r in 2..=alg.step() {
        let perms = permutations(r);
        for seq in nondecreasing(m, r) {
            if seq.iter().all(|j| *j == seq[0]) {
                continue;
            }
            // simplex volume Π ℓ_j^{m_j} / m_j!
            let mut vol = T::from_q(&Q::one());
            let mut denom = 1i64;
            let mut k = 0;
            while k < r {
                let j = seq[k];
                let run = seq[k..].iter().take_while(|x| **x == j).count();
                for _ in 0..run {
                    vol = vol * lens[j].clone();
                }
                denom *= factorial(run);
                k += run;
            }
            vol = vol * T::from_q(&q(1, denom));
            for tau in &perms {
                let mut acc = path.values[seq[tau[0]]].clone();
                for &t in &tau[1..] {
                    acc = alg.bracket_unchecked(&acc, &path.values[seq[t]]);
                }
                if acc.iter().all(Zero::is_zero) {
                    continue;
                }
                let w = vol.clone() * T::from_q(&strichartz_coefficient(tau));
                for (o, a) in out.iter_mut().zip(acc) {
                    *o = o.clone() + w.clone() * a;
                }
            }
        }
    }
    Ok(out)
}

/// `(ℓ_1 c_1) * (ℓ_2 c_2) * ...`, the multiplicative integral of a
/// piecewise-constant path.
pub fn piece_product<T: Field>(alg: &LieAlgebra, path: &PiecewisePath<T>) -> Result<Vec<T>> {
    let pieces: Vec<Vec<T>> = path
        .lengths()
        .iter()
        .zip(&path.values)
        .map(|(l, c)| c.iter().map(|v| l.clone() * v.clone()).collect())
        .collect();
    alg.product_of(&pieces)
}

/// Left-point product `Π_i (h c(a + i h))` over a uniform mesh of `k` cells.
pub fn fine_mesh_product(alg: &LieAlgebra, path: &PiecewisePath<f64>, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidParameter("mesh needs at least one cell".into()));
    }
    if !alg.product_supported() {
        return Err(Error::StepTooLarge { step: alg.step(), max: crate::bch::MAX_STEP });
    }
    let a = path.breakpoints[0];
    let b = *path.breakpoints.last().unwrap();
    let h = (b - a) / k as f64;
    let n = alg.dim();
    let mut acc = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut inc = vec![0.0; n];
    let mut scratch = Vec::new();
    let mut piece = 0;
    for i in 0..k {
        let t = a + i as f64 * h;
        while piece + 1 < path.values.len() && path.breakpoints[piece + 1] <= t {
            piece += 1;
        }
        for (v, c) in inc.iter_mut().zip(&path.values[piece]) {
            *v = h * c;
        }
        alg.mul_into(&acc, &inc, &mut tmp, &mut scratch);
        std::mem::swap(&mut acc, &mut tmp);
    }
    Ok(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Inside,
    Boundary,
    Outside,
}

/// `2 s_4 − (s_1 + s_3) s_3` in the basis `(A, T, e3, e4)`.
pub fn filiform_statistic(s: &[f64]) -> f64 {
    2.0 * s[3] - (s[0] + s[2]) * s[2]
}

/// Position relative to `{2 s_4 ≥ (s_1 + s_3) s_3}` with a `tol`-wide boundary band.
pub fn filiform_member(s: &[f64], tol: f64) -> Membership {
    let g = filiform_statistic(s);
    if g > tol {
        Membership::Inside
    } else if g < -tol {
        Membership::Outside
    } else {
        Membership::Boundary
    }
}

pub fn filiform_member_exact(s: &[Q]) -> Membership {
    let g = qi(2) * &s[3] - (&s[0] + &s[2]) * &s[2];
    if g > Q::zero() {
        Membership::Inside
    } else if g < Q::zero() {
        Membership::Outside
    } else {
        Membership::Boundary
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutsideReport {
    pub steps: usize,
    pub samples: usize,
    /// `3 · IQR(statistic) / √N`.
    pub band: f64,
    pub outside: usize,
    pub fraction: f64,
    /// Fraction with a strictly negative statistic, no band.
    pub raw_fraction: f64,
}

/// Fraction of rescaled filiform endpoints strictly outside the support
/// beyond the statistical band.
pub fn filiform_outside_fraction(rows: &[Vec<f64>], steps: usize) -> Result<OutsideReport> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("no endpoints".into()));
    }
    let mut g: Vec<f64> = rows.iter().map(|r| filiform_statistic(r)).collect();
    let outside_of = |band: f64| rows.iter().filter(|r| filiform_member(r, band) == Membership::Outside).count();
    g.sort_by(f64::total_cmp);
    let quart = |p: f64| g[((g.len() - 1) as f64 * p).round() as usize];
    let band = 3.0 * (quart(0.75) - quart(0.25)) / (steps as f64).sqrt();
    let outside = outside_of(band);
    let m = rows.len() as f64;
    let raw_fraction = g.iter().filter(|v| **v < 0.0).count() as f64 / m;
    Ok(OutsideReport { steps, samples: rows.len(), band, outside, fraction: outside as f64 / m, raw_fraction })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaussianCaseReport {
    /// `(g, [.,.]')` is abelian.
    pub condition_i: bool,
    /// `m^(i) ≠ 0` exactly for odd `i ≤ 2s − 1`.
    pub condition_iii: bool,
    /// `[X, g^[a]] + g^[a+2] = g^[a+1]` for `a = 1..s`.
    pub condition_v: bool,
    pub agree: bool,
    pub gaussian: bool,
}

/// Exact evaluation of the equivalent Gaussianity conditions for the bias `xbar`.
pub fn gaussian_case_check(alg: &LieAlgebra, xbar: &[Q]) -> Result<GaussianCaseReport> {
    let dec = WeightDecomposition::for_bias(alg, xbar)?;
    let s = alg.step();
    let condition_i = dec.graded().is_abelian();
    let condition_iii = (1..=2 * s - 1).all(|i| (dec.layer_dim(i) > 0) == (i % 2 == 1));
    let lcs = alg.lower_central_series();
    let level = |a: usize| lcs.get(a - 1).cloned().unwrap_or_else(|| Subspace::zero(alg.dim()));
    let x = Subspace::span(alg.dim(), [dec.x_lift().to_vec()]);
    let condition_v = (1..=s).all(|a| alg.bracket_spaces(&x, &level(a)).sum(&level(a + 2)) == level(a + 1));
    let agree = condition_i == condition_iii && condition_iii == condition_v;
    Ok(GaussianCaseReport { condition_i, condition_iii, condition_v, agree, gaussian: agree && condition_i })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DcCertificate {
    pub generator: usize,
    pub witness: Vec<String>,
    pub power: usize,
    /// `[v_i, ad(w)^k v_i]`.
    pub value: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DcReport {
    pub holds: bool,
    pub witnesses_tried: usize,
    pub certificate: Option<DcCertificate>,
}

/// Randomized test of `[v_i, ad(w)^k v_i] = 0` for `k ≤ s − 2` at `trials`
/// integer witnesses with entries in `−3..=3`. A failure comes with an exact
/// certificate.
pub fn dc_condition_check(alg: &LieAlgebra, generators: &[Vec<Q>], trials: usize, seed: u64) -> Result<DcReport> {
    let n = alg.dim();
    if let Some(v) = generators.iter().find(|v| v.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: v.len() });
    }
    let full = Subspace::full(n);
    let derived = alg.bracket_spaces(&full, &full);
    let needed = n - derived.dim();
    let rank = linalg::rank(generators.iter().cloned().chain(derived.basis().iter().cloned()).collect(), n) - derived.dim();
    if rank < needed {
        return Err(Error::GeneratorsDoNotSpan { rank, needed });
    }
    let mut rng = stream_rng(seed, 0);
    let s = alg.step();
    for trial in 0..trials {
        let w: Vec<Q> = (0..n).map(|_| qi(rng.random_range(-3..=3))).collect();
        for (i, v) in generators.iter().enumerate() {
            let mut p = v.clone();
            for k in 1..=s.saturating_sub(2) {
                p = alg.bracket_unchecked(&w, &p);
                let value = alg.bracket_unchecked(v, &p);
                if value.iter().any(|c| !c.is_zero()) {
                    return Ok(DcReport {
                        holds: false,
                        witnesses_tried: trial + 1,
                        certificate: Some(DcCertificate {
                            generator: i,
                            witness: w.iter().map(format_q).collect(),
                            power: k,
                            value: value.iter().map(format_q).collect(),
                        }),
                    });
                }
            }
        }
    }
    Ok(DcReport { holds: true, witnesses_tried: trials, certificate: None })
}
