//! Two-sample distances between batches and one-sample goodness of fit.

use std::cmp::Ordering;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::batch::SampleBatch;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

/// `(1/n) Σ_k e^{−2πi ξ(x_k)}` for each `ξ` of the grid.
pub fn ecf(batch: &SampleBatch, grid: &[Vec<f64>]) -> Result<Vec<Complex64>> {
    if batch.is_empty() {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    if let Some(xi) = grid.iter().find(|xi| xi.len() != batch.dim()) {
        return Err(Error::DimensionMismatch { expected: batch.dim(), got: xi.len() });
    }
    let n = batch.len() as f64;
    Ok(grid
        .iter()
        .map(|xi| {
            let s = batch
                .iter_rows()
                .map(|r| {
                    let p: f64 = r.iter().zip(xi).map(|(a, b)| a * b).sum();
                    Complex64::from_polar(1.0, -std::f64::consts::TAU * p)
                })
                .sum::<Complex64>();
            s / n
        })
        .collect())
}

/// `sup |F_a − F_b|` of the two empirical CDFs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// `sup |F_n − F|` for a continuous CDF `F`.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = xs.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic two-sample KS critical value `c(α) √((n + m)/(n m))`,
/// `c(α) = √(−ln(α/2)/2)`.
pub fn ks_threshold(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    let (n, m) = (n as f64, m as f64);
    c * ((n + m) / (n * m)).sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn energy_from_matrix(d: &[f64], m: usize, labels: &[bool]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for i in 0..m {
        for j in (i + 1)..m {
            let v = d[i * m + j];
            match (labels[i], labels[j]) {
                (true, true) => aa += v,
                (false, false) => bb += v,
                _ => ab += v,
            }
        }
    }
    let na = labels.iter().filter(|l| **l).count() as f64;
    let nb = m as f64 - na;
    2.0 * ab / (na * nb) - 2.0 * aa / (na * na) - 2.0 * bb / (nb * nb)
}

/// Energy distance `2E|X − Y| − E|X − X'| − E|Y − Y'|` between two sets of rows.
pub fn energy_distance(a: &[&[f64]], b: &[&[f64]]) -> f64 {
    let pooled: Vec<&[f64]> = a.iter().chain(b).copied().collect();
    let m = pooled.len();
    let mut d = vec![0.0; m * m];
    for i in 0..m {
        for j in (i + 1)..m {
            d[i * m + j] = dist(pooled[i], pooled[j]);
        }
    }
    let labels: Vec<bool> = (0..m).map(|i| i < a.len()).collect();
    energy_from_matrix(&d, m, &labels)
}

/// Energy distance with its permutation p-value `(1 + #{E_π ≥ E}) / (1 + P)`.
pub fn energy_test(a: &[&[f64]], b: &[&[f64]], permutations: usize, seed: u64) -> (f64, f64) {
    let pooled: Vec<&[f64]> = a.iter().chain(b).copied().collect();
    let m = pooled.len();
    let mut d = vec![0.0; m * m];
    for i in 0..m {
        for j in (i + 1)..m {
            d[i * m + j] = dist(pooled[i], pooled[j]);
        }
    }
    let mut labels: Vec<bool> = (0..m).map(|i| i < a.len()).collect();
    let stat = energy_from_matrix(&d, m, &labels);
    let mut rng = stream_rng(seed, 0);
    let mut exceed = 0;
    for _ in 0..permutations {
        labels.shuffle(&mut rng);
        if energy_from_matrix(&d, m, &labels) >= stat - 1e-12 * stat.abs() {
            exceed += 1;
        }
    }
    (stat, (1 + exceed) as f64 / (1 + permutations) as f64)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompareOptions {
    /// Random unit directions added to the coordinate projections.
    pub directions: usize,
    /// Familywise level; each projection is tested at `alpha / k`.
    pub alpha: f64,
    /// Rows of each batch used for the energy distance.
    pub energy_rows: usize,
    pub permutations: usize,
    pub seed: u64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self { directions: 20, alpha: 0.05, energy_rows: 500, permutations: 200, seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectionKs {
    pub label: String,
    pub direction: Vec<f64>,
    pub ks: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub n_a: usize,
    pub n_b: usize,
    pub projections: Vec<ProjectionKs>,
    pub max_ks: f64,
    /// Pointwise 95% two-sample KS critical value.
    pub ks_threshold_95: f64,
    /// Critical value at the Bonferroni level `alpha / k` over the `k` projections.
    pub ks_threshold: f64,
    pub ks_pass: bool,
    pub energy_distance: f64,
    pub energy_p_value: f64,
    pub energy_pass: bool,
    /// Largest ECF gap over the projected frequency grid.
    pub ecf_gap: f64,
    /// `3 √(1/n_a + 1/n_b)`.
    pub ecf_threshold: f64,
    pub pass: bool,
}

/// Fixed pseudo-random unit directions in `ℝ^dim`.
pub fn directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(derive_seed(seed, "directions"), dim as u64);
    (0..count)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / n).collect()
        })
        .collect()
}

fn batch_order(a: &SampleBatch, b: &SampleBatch) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        a.rows.iter().zip(&b.rows).map(|(x, y)| x.total_cmp(y)).find(|o| *o != Ordering::Equal).unwrap_or(Ordering::Equal)
    })
}

fn sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt()
}

pub fn two_sample_distance(a: &SampleBatch, b: &SampleBatch) -> Result<ComparisonReport> {
    two_sample_distance_with(a, b, &CompareOptions::default())
}

/// Per-coordinate and random-direction KS distances, energy distance with a
/// permutation test, and an ECF gap. Symmetric in its arguments.
pub fn two_sample_distance_with(a: &SampleBatch, b: &SampleBatch, opts: &CompareOptions) -> Result<ComparisonReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let (a, b) = if batch_order(a, b) == Ordering::Greater { (b, a) } else { (a, b) };
    let d = a.dim();
    let mut dirs: Vec<(String, Vec<f64>)> = (0..d)
        .map(|j| {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            (a.names[j].clone(), e)
        })
        .collect();
    for (k, v) in directions(d, opts.directions, opts.seed).into_iter().enumerate() {
        dirs.push((format!("dir{k}"), v));
    }
    let k = dirs.len();
    let mut projections = Vec::with_capacity(k);
    let mut ecf_gap: f64 = 0.0;
    for (label, v) in dirs {
        let pa = a.project(&v);
        let pb = b.project(&v);
        let ks = ks_two_sample(&pa, &pb);
        let s = sd(&[pa.as_slice(), pb.as_slice()].concat());
        if s > 0.0 {
            for f in [0.25, 0.5, 1.0, 2.0] {
                let w = std::f64::consts::TAU * f / s;
                let phi = |xs: &[f64]| {
                    xs.iter().map(|x| Complex64::from_polar(1.0, -w * x)).sum::<Complex64>() / xs.len() as f64
                };
                ecf_gap = ecf_gap.max((phi(&pa) - phi(&pb)).norm());
            }
        }
        projections.push(ProjectionKs { label, direction: v, ks });
    }
    let max_ks = projections.iter().map(|p| p.ks).fold(0.0, f64::max);
    let (n_a, n_b) = (a.len(), b.len());
    let threshold = ks_threshold(opts.alpha / k as f64, n_a, n_b);
    let ra: Vec<&[f64]> = a.iter_rows().take(opts.energy_rows).collect();
    let rb: Vec<&[f64]> = b.iter_rows().take(opts.energy_rows).collect();
    let (energy_distance, energy_p_value) = energy_test(&ra, &rb, opts.permutations, derive_seed(opts.seed, "energy"));
    let ks_pass = max_ks <= threshold;
    let energy_pass = energy_p_value >= opts.alpha;
    Ok(ComparisonReport {
        n_a,
        n_b,
        projections,
        max_ks,
        ks_threshold_95: ks_threshold(0.05, n_a, n_b),
        ks_threshold: threshold,
        ks_pass,
        energy_distance,
        energy_p_value,
        energy_pass,
        ecf_gap,
        ecf_threshold: 3.0 * (1.0 / n_a as f64 + 1.0 / n_b as f64).sqrt(),
        pass: ks_pass && energy_pass,
    })
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormalityReport {
    pub n: usize,
    /// `A*² = A² (1 + 0.75/n + 2.25/n²)` with mean and variance estimated.
    pub statistic: f64,
    pub critical_5: f64,
    /// Approximate upper-tail probability of `A*²` under normality.
    pub p_value: f64,
    pub normal: bool,
}

/// Piecewise exponential fit to the null distribution of `A*²`
/// (D'Agostino and Stephens).
pub fn anderson_darling_p_value(a: f64) -> f64 {
    let p = if a >= 0.6 {
        (1.2937 - 5.709 * a + 0.0186 * a * a).exp()
    } else if a >= 0.34 {
        (0.9177 - 4.279 * a - 1.38 * a * a).exp()
    } else if a >= 0.2 {
        1.0 - (-8.318 + 42.796 * a - 59.938 * a * a).exp()
    } else {
        1.0 - (-13.436 + 101.14 * a - 223.73 * a * a).exp()
    };
    p.clamp(0.0, 1.0)
}

/// Anderson–Darling test of normality with estimated parameters, 5% level.
pub fn anderson_darling_normal(xs: &[f64]) -> Result<NormalityReport> {
    let n = xs.len();
    if n < 8 {
        return Err(Error::InvalidParameter(format!("need at least 8 samples, got {n}")));
    }
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    if var <= 0.0 {
        return Ok(NormalityReport { n, statistic: f64::INFINITY, critical_5: 0.752, p_value: 0.0, normal: false });
    }
    let s = var.sqrt();
    let mut z: Vec<f64> = xs.iter().map(|x| (x - mean) / s).collect();
    z.sort_by(f64::total_cmp);
    let mut acc = 0.0;
    for i in 0..n {
        let lo = normal_cdf(z[i]).max(1e-300).ln();
        let hi = normal_cdf(-z[n - 1 - i]).max(1e-300).ln();
        acc += (2 * i + 1) as f64 * (lo + hi);
    }
    let a2 = -nf - acc / nf;
    let statistic = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    Ok(NormalityReport {
        n,
        statistic,
        critical_5: 0.752,
        p_value: anderson_darling_p_value(statistic),
        normal: statistic < 0.752,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch::BatchMeta;

    fn gaussian_batch(n: usize, shift: f64, seed: u64) -> SampleBatch {
        let mut rng = stream_rng(seed, 0);
        let rows: Vec<f64> = (0..2 * n)
            .map(|k| {
                let g: f64 = StandardNormal.sample(&mut rng);
                if k % 2 == 0 { g + shift } else { g }
            })
            .collect();
        SampleBatch::new(vec!["a".into(), "b".into()], rows, BatchMeta::default()).unwrap()
    }

    #[test]
    fn ks_small_cases() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]), 1.0);
        assert!((ks_two_sample(&[0.0, 2.0], &[1.0, 3.0]) - 0.5).abs() < 1e-15);
        let u = [0.1, 0.4, 0.7];
        assert!((ks_one_sample(&u, |x| x) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn identical_batches_have_zero_distance() {
        let a = gaussian_batch(500, 0.0, 1);
        let r = two_sample_distance(&a, &a).unwrap();
        assert_eq!(r.max_ks, 0.0);
        assert_eq!(r.ecf_gap, 0.0);
        assert!(r.energy_distance.abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn symmetric_and_detects_shift() {
        let a = gaussian_batch(20_000, 0.0, 1);
        let b = gaussian_batch(20_000, 0.5, 2);
        let r1 = two_sample_distance(&a, &b).unwrap();
        let r2 = two_sample_distance(&b, &a).unwrap();
        assert_eq!(r1.max_ks, r2.max_ks);
        assert_eq!(r1.energy_p_value, r2.energy_p_value);
        // Φ(0.25) − Φ(−0.25) = 0.197
        assert!((r1.projections[0].ks - 0.197).abs() < 0.02);
        assert!(!r1.pass);
        let c = gaussian_batch(20_000, 0.0, 3);
        assert!(two_sample_distance(&a, &c).unwrap().ks_pass);
    }

    #[test]
    fn ecf_basics() {
        let z = SampleBatch::new(vec!["a".into()], vec![0.0; 10], BatchMeta::default()).unwrap();
        for v in ecf(&z, &[vec![0.3], vec![5.0]]).unwrap() {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
        let g = gaussian_batch(10_000, 0.0, 5);
        let grid: Vec<Vec<f64>> = (0..100).map(|k| vec![k as f64 * 0.01, 0.0]).collect();
        let e = ecf(&g, &grid).unwrap();
        assert_eq!(e[0], Complex64::new(1.0, 0.0));
        let gap = grid
            .iter()
            .zip(&e)
            .map(|(xi, v)| (v - (-2.0 * std::f64::consts::PI.powi(2) * xi[0] * xi[0]).exp()).norm())
            .fold(0.0, f64::max);
        assert!(gap <= 3.0 / 100.0);
    }

    #[test]
    fn anderson_darling() {
        let g = gaussian_batch(5000, 0.0, 8).column(0);
        assert!(anderson_darling_normal(&g).unwrap().normal);
        let e: Vec<f64> = g.iter().map(|x| x * x).collect();
        assert!(!anderson_darling_normal(&e).unwrap().normal);
        assert!((anderson_darling_p_value(0.752) - 0.05).abs() < 1e-3);
        assert!((anderson_darling_p_value(1.035) - 0.01).abs() < 1e-3);
        // the fit is coarse near the 15% table point
        let p = anderson_darling_p_value(0.576);
        assert!((p - (0.9177f64 - 4.279 * 0.576 - 1.38 * 0.576 * 0.576).exp()).abs() < 1e-12);
        assert!((p - 0.15).abs() < 0.02);
        for edge in [0.2, 0.34, 0.6] {
            let gap = anderson_darling_p_value(edge - 1e-9) - anderson_darling_p_value(edge + 1e-9);
            assert!(gap.abs() < 5e-3, "{edge}: {gap}");
        }
    }
}
