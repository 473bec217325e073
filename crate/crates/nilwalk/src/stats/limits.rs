//! Berry–Esseen curves, local limit ratios and the asymptotic closeness test.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::LieAlgebra;
use crate::batch::SampleBatch;
use crate::error::{Error, Result};
use crate::filtration::weight_filtration;
use crate::linalg::{null_space, Subspace};
use crate::measure::{sym_eigen, IncrementMeasure};
use crate::rng::{derive_seed, stream_rng};
use crate::scalar::{q_to_f64, Q};
use crate::walk::{WalkConfig, Walker};

use super::functions::{levy_expectation, TestFunction};

const BLOCK: usize = 4096;

/// Accumulated `(Σ f, Σ f², #{f ≠ 0})` over walk endpoints, summed per fixed
/// block so the result does not depend on the thread count.
fn walk_sums(cfg: &WalkConfig, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<(f64, f64, u64)> {
    let w = Walker::new(cfg)?;
    let blocks = cfg.trials.div_ceil(BLOCK);
    let parts: Vec<(f64, f64, u64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = (0.0, 0.0, 0u64);
            for t in (b * BLOCK)..((b + 1) * BLOCK).min(cfg.trials) {
                let v = f(&w.endpoint(&mut stream_rng(cfg.seed, t as u64)));
                acc.0 += v;
                acc.1 += v * v;
                acc.2 += u64::from(v != 0.0);
            }
            acc
        })
        .collect();
    Ok(parts.into_iter().fold((0.0, 0.0, 0), |a, p| (a.0 + p.0, a.1 + p.1, a.2 + p.2)))
}

/// Mean of `f` over `cfg.trials` walk endpoints, with its standard error.
pub fn walk_expectation(cfg: &WalkConfig, f: &TestFunction) -> Result<(f64, f64)> {
    if f.dim() != cfg.dec.dim() {
        return Err(Error::DimensionMismatch { expected: cfg.dec.dim(), got: f.dim() });
    }
    let (s, s2, _) = walk_sums(cfg, |x| f.eval(x))?;
    let n = cfg.trials as f64;
    let m = s / n;
    Ok((m, ((s2 / n - m * m).max(0.0) / n).sqrt()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BePoint {
    pub n: usize,
    pub estimate: f64,
    pub std_error: f64,
    /// `|E_walk f − ν(f)|`.
    pub error: f64,
    /// 95% interval for the error.
    pub error_ci: (f64, f64),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BeCurve {
    pub reference: f64,
    pub reference_std_error: f64,
    pub points: Vec<BePoint>,
    /// `error(N_{k+1}) / error(N_k)`.
    pub ratios: Vec<f64>,
    pub mean_ratio: f64,
    /// Least-squares slope of `log error` against `log N`.
    pub slope: f64,
}

/// `|E f(D_{1/√N}(S_N * (−N X))) − ν(f)|` for each `N`, with `ν(f)` supplied
/// as `reference ± reference_se`.
pub fn berry_esseen_curve(
    template: &WalkConfig,
    f: &TestFunction,
    ns: &[usize],
    reference: f64,
    reference_se: f64,
) -> Result<BeCurve> {
    if ns.is_empty() {
        return Err(Error::InvalidParameter("empty list of step counts".into()));
    }
    let mut points = Vec::with_capacity(ns.len());
    for &n in ns {
        let mut cfg = template.with_steps(n);
        cfg.rescale = true;
        cfg.seed = derive_seed(template.seed, &format!("be-{n}"));
        let (estimate, se) = walk_expectation(&cfg, f)?;
        let error = (estimate - reference).abs();
        let half = 1.96 * (se * se + reference_se * reference_se).sqrt();
        points.push(BePoint { n, estimate, std_error: se, error, error_ci: ((error - half).max(0.0), error + half) });
    }
    let ratios: Vec<f64> = points.windows(2).map(|w| w[1].error / w[0].error).collect();
    let mean_ratio = if ratios.is_empty() { f64::NAN } else { ratios.iter().sum::<f64>() / ratios.len() as f64 };
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.error.ln()).collect();
    Ok(BeCurve { reference, reference_std_error: reference_se, points, ratios, mean_ratio, slope: ls_slope(&xs, &ys) })
}

/// Least-squares slope (NaN with fewer than two points).
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return f64::NAN;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Product Gaussian kernel density estimate with Silverman bandwidths
/// `h_j = σ_j (4 / ((d + 2) n))^{1/(d+4)}`.
#[derive(Clone, Debug)]
pub struct Kde {
    points: SampleBatch,
    bandwidth: Vec<f64>,
}

impl Kde {
    pub fn silverman(batch: &SampleBatch) -> Result<Self> {
        if batch.len() < 2 {
            return Err(Error::InvalidParameter("kernel estimate needs at least two points".into()));
        }
        let (n, d) = (batch.len() as f64, batch.dim() as f64);
        let factor = (4.0 / ((d + 2.0) * n)).powf(1.0 / (d + 4.0));
        let mean = batch.mean();
        let bandwidth: Vec<f64> = (0..batch.dim())
            .map(|j| {
                let v = batch.iter_rows().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0);
                v.sqrt() * factor
            })
            .collect();
        if bandwidth.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::DegenerateCovariance { min_eigenvalue: 0.0 });
        }
        Ok(Self { points: batch.clone(), bandwidth })
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        let norm: f64 = self.bandwidth.iter().map(|h| h * (std::f64::consts::TAU).sqrt()).product();
        let s: f64 = self
            .points
            .iter_rows()
            .map(|r| {
                let q: f64 = r.iter().zip(x).zip(&self.bandwidth).map(|((a, b), h)| ((a - b) / h).powi(2)).sum();
                (-0.5 * q).exp()
            })
            .sum();
        s / (self.points.len() as f64 * norm)
    }
}

/// Source of the limiting density `u` of `ν = σ_1`.
#[derive(Clone, Debug)]
pub enum DensityModel {
    /// Closed form for the normalized centered Heisenberg walk.
    Levy,
    /// Kernel estimate from a batch of `W(1)` draws.
    Kde(Kde),
}

#[derive(Clone, Debug, Default)]
pub struct LltOptions {
    /// Left factor `g` in `g * S_N * (−N X) * h`; the right factor is set via
    /// the walk's recentering.
    pub left_deviation: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LltReport {
    pub steps: usize,
    pub samples: usize,
    pub homogeneous_dimension: usize,
    /// Samples landing in the support of `f`.
    pub hits: u64,
    pub hit_frequency: f64,
    /// Wilson 95% interval for the hit frequency.
    pub hit_ci: (f64, f64),
    pub expected_hits: f64,
    pub mean: f64,
    pub std_error: f64,
    /// `N^{d/2} E f(S_N * (−N X))`.
    pub scaled_estimate: f64,
    pub scaled_ci: (f64, f64),
    /// `∫ f(x) u(D_{1/√N} x) dx`.
    pub prediction: f64,
    pub ratio: f64,
    pub ratio_ci: (f64, f64),
}

const MIN_HITS: f64 = 100.0;

fn is_normalized_heisenberg(cfg: &WalkConfig) -> bool {
    let alg = cfg.dec.algebra();
    if alg.dim() != 3 || !cfg.dec.is_centered() {
        return false;
    }
    let std_bracket = (0..3).all(|i| {
        (0..3).all(|j| {
            let want: Vec<(usize, Q)> = match (i, j) {
                (0, 1) => vec![(2, Q::from_integer(1.into()))],
                (1, 0) => vec![(2, Q::from_integer((-1).into()))],
                _ => vec![],
            };
            alg.basis_bracket(i, j) == want.as_slice()
        })
    });
    let m = cfg.measure.mean();
    let c = cfg.measure.covariance();
    std_bracket
        && m.iter().all(|v| v.abs() < 1e-12)
        && (c[0][0] - 1.0).abs() < 1e-9
        && (c[1][1] - 1.0).abs() < 1e-9
        && c[0][1].abs() < 1e-9
}

/// Tensor Gauss–Legendre estimate of `∫_box g(x) u(D_{1/√N} x) dx`.
fn kde_integral(kde: &Kde, cfg: &WalkConfig, f: &TestFunction) -> Result<f64> {
    let bx = f.support_box().ok_or_else(|| Error::InvalidParameter("test function must have compact support".into()))?;
    let d = bx.len();
    let m = ((512f64).powf(1.0 / d as f64).floor() as usize).max(2);
    let rule = gauss_quad::GaussLegendre::new(std::num::NonZeroUsize::new(m).unwrap()).as_node_weight_pairs().to_vec();
    let r = 1.0 / (cfg.steps as f64).sqrt();
    let total = m.pow(d as u32);
    let nodes: Vec<(Vec<f64>, f64)> = (0..total)
        .map(|mut k| {
            let mut x = Vec::with_capacity(d);
            let mut w = 1.0;
            for (lo, hi) in &bx {
                let (t, wt) = rule[k % m];
                k /= m;
                x.push(0.5 * (lo + hi) + 0.5 * (hi - lo) * t);
                w *= 0.5 * (hi - lo) * wt;
            }
            (x, w)
        })
        .collect();
    Ok(nodes
        .par_iter()
        .map(|(x, w)| {
            let fx = f.eval(x);
            if fx == 0.0 {
                0.0
            } else {
                w * fx * kde.density(&cfg.dec.dilate_unchecked(r, x))
            }
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum())
}

fn wilson(k: u64, n: usize) -> (f64, f64) {
    let (n, p) = (n as f64, k as f64 / n as f64);
    let z = 1.96_f64;
    let den = 1.0 + z * z / n;
    let c = (p + z * z / (2.0 * n)) / den;
    let h = z * ((p * (1.0 - p) + z * z / (4.0 * n)) / n).sqrt() / den;
    (c - h, c + h)
}

/// Hit-counting estimate of `N^{d/2} μ^{*N} * δ_{−N X}(f)` against the
/// limiting prediction. Refuses when fewer than 100 samples are expected in
/// the support of `f`.
pub fn llt_ratio(cfg: &WalkConfig, f: &TestFunction, model: &DensityModel, opts: &LltOptions) -> Result<LltReport> {
    if f.dim() != cfg.dec.dim() {
        return Err(Error::DimensionMismatch { expected: cfg.dec.dim(), got: f.dim() });
    }
    let indicator =
        f.support_indicator().ok_or_else(|| Error::InvalidParameter("test function must have compact support".into()))?;
    let n = cfg.steps as f64;
    let dh = cfg.dec.homogeneous_dimension();
    let scale = n.powf(dh as f64 / 2.0);
    let (prediction, p_support) = match model {
        DensityModel::Levy => {
            if !is_normalized_heisenberg(cfg) {
                return Err(Error::InvalidParameter(
                    "closed-form density needs the centered Heisenberg walk with identity covariance".into(),
                ));
            }
            (scale * levy_expectation(f, n)?, levy_expectation(&indicator, n)?)
        }
        DensityModel::Kde(k) => (kde_integral(k, cfg, f)?, kde_integral(k, cfg, &indicator)? / scale),
    };
    let expected_hits = cfg.trials as f64 * p_support;
    if expected_hits < MIN_HITS {
        return Err(Error::InsufficientBudget {
            expected_hits,
            required_samples: (MIN_HITS / p_support.max(1e-300)).ceil().min(u64::MAX as f64) as u64,
        });
    }
    let mut run = cfg.clone();
    run.rescale = false;
    let alg = cfg.dec.algebra();
    let left = opts.left_deviation.clone();
    if let Some(g) = &left {
        if g.len() != alg.dim() {
            return Err(Error::DimensionMismatch { expected: alg.dim(), got: g.len() });
        }
    }
    let (s, s2, hits) = walk_sums(&run, |x| match &left {
        Some(g) => f.eval(&alg.mul(g, x).expect("supported step")),
        None => f.eval(x),
    })?;
    let m = cfg.trials as f64;
    let mean = s / m;
    let std_error = ((s2 / m - mean * mean).max(0.0) / m).sqrt();
    let scaled_estimate = scale * mean;
    let half = 1.96 * scale * std_error;
    let scaled_ci = (scaled_estimate - half, scaled_estimate + half);
    Ok(LltReport {
        steps: cfg.steps,
        samples: cfg.trials,
        homogeneous_dimension: dh,
        hits,
        hit_frequency: hits as f64 / m,
        hit_ci: wilson(hits, cfg.trials),
        expected_hits,
        mean,
        std_error,
        scaled_estimate,
        scaled_ci,
        prediction,
        ratio: scaled_estimate / prediction,
        ratio_ci: (scaled_ci.0 / prediction, scaled_ci.1 / prediction),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClosenessReport {
    pub close: bool,
    pub same_abelian_mean: bool,
    pub same_abelian_covariance: bool,
    pub same_mean_mod_g3: bool,
    /// Largest entrywise gap between the abelianized covariances.
    pub covariance_gap: f64,
}

/// Two laws are asymptotically close iff their images in `g/[g,g]` share mean
/// and covariance and their images in `g/g^(3)` share the mean.
pub fn asymptotically_close(alg: &LieAlgebra, mu1: &IncrementMeasure, mu2: &IncrementMeasure) -> Result<ClosenessReport> {
    let n = alg.dim();
    for m in [mu1, mu2] {
        if m.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: m.dim() });
        }
    }
    let (m1, m2) = (mu1.mean_exact(), mu2.mean_exact());
    let f1 = weight_filtration(alg, &m1)?;
    let f2 = weight_filtration(alg, &m2)?;
    if !f1.same_levels(&f2) {
        return Err(Error::NotComparable("the weight filtrations of the two laws differ".into()));
    }
    let full = Subspace::full(n);
    let derived = alg.bracket_spaces(&full, &full);
    // linear forms vanishing on [g, g]
    let forms: Vec<Vec<Q>> = if derived.is_zero() {
        (0..n).map(|i| (0..n).map(|j| Q::from_integer(i64::from(i == j).into())).collect()).collect()
    } else {
        null_space(derived.basis().to_vec(), n)
    };
    let diff: Vec<Q> = m1.iter().zip(&m2).map(|(a, b)| a - b).collect();
    let same_abelian_mean = forms.iter().all(|f| f.iter().zip(&diff).map(|(a, b)| a * b).sum::<Q>() == Q::from_integer(0.into()));
    let same_mean_mod_g3 = f1.level(3).contains_vec(&diff);
    let ff: Vec<Vec<f64>> = forms.iter().map(|f| f.iter().map(q_to_f64).collect()).collect();
    let pushed = |c: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        ff.iter()
            .map(|a| ff.iter().map(|b| (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| a[i] * c[i][j] * b[j]).sum()).collect())
            .collect()
    };
    let (c1, c2) = (pushed(&mu1.covariance()), pushed(&mu2.covariance()));
    for c in [&c1, &c2] {
        let (vals, _) = sym_eigen(c);
        let max = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let min = vals.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        if vals.is_empty() || min <= 1e-12 * max.max(1.0) {
            return Err(Error::DegenerateCovariance { min_eigenvalue: if vals.is_empty() { 0.0 } else { min } });
        }
    }
    let scale = c1.iter().chain(&c2).flatten().fold(1.0_f64, |m, v| m.max(v.abs()));
    let covariance_gap = c1.iter().flatten().zip(c2.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let same_abelian_covariance = covariance_gap <= 1e-9 * scale;
    Ok(ClosenessReport {
        close: same_abelian_mean && same_abelian_covariance && same_mean_mod_g3,
        same_abelian_mean,
        same_abelian_covariance,
        same_mean_mod_g3,
        covariance_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::WeightDecomposition;
    use crate::presets::{filiform3, heisenberg};
    use crate::scalar::qi;

    fn centered_heisenberg_walk(steps: usize, trials: usize) -> WalkConfig {
        let dec = WeightDecomposition::for_bias(&heisenberg(), &[qi(0), qi(0), qi(0)]).unwrap();
        let m = IncrementMeasure::standard_gaussian(vec![0.0; 3], &[0, 1]).unwrap();
        WalkConfig::new(dec, m, steps).trials(trials).seed(11)
    }

    #[test]
    fn constant_function_has_no_error() {
        let cfg = centered_heisenberg_walk(8, 2000);
        let c = berry_esseen_curve(&cfg, &TestFunction::constant(3, 1.0), &[4, 16], 1.0, 0.0).unwrap();
        assert!(c.points.iter().all(|p| p.error < 1e-12 && p.std_error < 1e-12));
    }

    #[test]
    fn llt_refuses_small_budgets() {
        let cfg = centered_heisenberg_walk(64, 1000);
        let f = TestFunction::bump(&[0.0; 3], &[1.0; 3], 0.05).unwrap();
        match llt_ratio(&cfg, &f, &DensityModel::Levy, &LltOptions::default()) {
            Err(Error::InsufficientBudget { expected_hits, required_samples }) => {
                assert!(expected_hits < 100.0);
                assert!(required_samples > 1000);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn llt_nested_bumps_are_ordered() {
        let cfg = centered_heisenberg_walk(16, 40_000);
        let small = TestFunction::bump(&[0.0; 3], &[1.0, 1.0, 1.0], 1.0).unwrap();
        let large = TestFunction::bump(&[0.0; 3], &[2.0, 2.0, 2.0], 1.0).unwrap();
        let opts = LltOptions::default();
        let a = llt_ratio(&cfg, &small, &DensityModel::Levy, &opts).unwrap();
        let b = llt_ratio(&cfg, &large, &DensityModel::Levy, &opts).unwrap();
        assert!(a.mean <= b.mean);
        assert!(a.hits <= b.hits);
    }

    #[test]
    fn closeness_rules() {
        let alg = filiform3();
        let cov = |s: f64| vec![vec![s, 0.0, 0.0, 0.0], vec![0.0, s, 0.0, 0.0], vec![0.0; 4], vec![0.0; 4]];
        let mu = IncrementMeasure::gaussian(vec![0.0; 4], cov(1.0)).unwrap();
        assert!(asymptotically_close(&alg, &mu, &mu).unwrap().close);
        let z4 = mu.shifted(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(asymptotically_close(&alg, &mu, &z4).unwrap().close);
        let z3 = mu.shifted(vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let r = asymptotically_close(&alg, &mu, &z3).unwrap();
        assert!(!r.close && r.same_abelian_mean && !r.same_mean_mod_g3);
        let wide = IncrementMeasure::gaussian(vec![0.0; 4], cov(2.0)).unwrap();
        assert!(!asymptotically_close(&alg, &mu, &wide).unwrap().same_abelian_covariance);
        let biased = mu.shifted(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(asymptotically_close(&alg, &mu, &biased), Err(Error::NotComparable(_))));
    }
}
