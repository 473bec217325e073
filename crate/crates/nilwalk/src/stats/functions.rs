//! Separable test functions `f(x) = h · Π_i φ_i(x_i)` and their integrals
//! against the normalized Heisenberg law.

use serde::{Deserialize, Serialize};

use crate::batch::SampleBatch;
use crate::error::{Error, Result};
use crate::levy::integrate_half_line;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Factor {
    One,
    /// `exp(1 − 1/(1 − u²))` for `u = (x − center)/radius` in `(−1, 1)`, else 0.
    Bump { center: f64, radius: f64 },
    /// `p(u) exp(−u²/2)` with `u = (x − center)/scale`, `p(u) = Σ coeffs[k] u^k`.
    Window { center: f64, scale: f64, coeffs: Vec<f64> },
    /// Indicator of `[low, high]`.
    Interval { low: f64, high: f64 },
}

impl Factor {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Factor::One => 1.0,
            Factor::Bump { center, radius } => {
                let u = (x - center) / radius;
                if u.abs() < 1.0 {
                    (1.0 - 1.0 / (1.0 - u * u)).exp()
                } else {
                    0.0
                }
            }
            Factor::Window { center, scale, coeffs } => {
                let u = (x - center) / scale;
                coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c) * (-0.5 * u * u).exp()
            }
            Factor::Interval { low, high } => f64::from(*low <= x && x <= *high),
        }
    }

    /// Interval outside of which the factor is zero (or below `1e-30` relative, for windows).
    pub fn range(&self) -> Option<(f64, f64)> {
        match self {
            Factor::One => None,
            Factor::Bump { center, radius } => Some((center - radius, center + radius)),
            Factor::Window { center, scale, .. } => Some((center - 14.0 * scale, center + 14.0 * scale)),
            Factor::Interval { low, high } => Some((*low, *high)),
        }
    }

    pub fn is_compact(&self) -> bool {
        matches!(self, Factor::Bump { .. } | Factor::Interval { .. })
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Factor::One => true,
            Factor::Bump { center, radius } => center.is_finite() && *radius > 0.0 && radius.is_finite(),
            Factor::Window { center, scale, coeffs } => {
                center.is_finite() && *scale > 0.0 && scale.is_finite() && coeffs.iter().all(|c| c.is_finite())
            }
            Factor::Interval { low, high } => low.is_finite() && high.is_finite() && low < high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid test-function factor {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub height: f64,
    pub factors: Vec<Factor>,
}

impl TestFunction {
    pub fn new(height: f64, factors: Vec<Factor>) -> Result<Self> {
        if !height.is_finite() {
            return Err(Error::InvalidParameter("non-finite height".into()));
        }
        for f in &factors {
            f.validate()?;
        }
        Ok(Self { height, factors })
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        Self { height: value, factors: vec![Factor::One; dim] }
    }

    /// Product bump with the given center, radii and peak value.
    pub fn bump(center: &[f64], radius: &[f64], height: f64) -> Result<Self> {
        if center.len() != radius.len() {
            return Err(Error::DimensionMismatch { expected: center.len(), got: radius.len() });
        }
        Self::new(height, center.iter().zip(radius).map(|(c, r)| Factor::Bump { center: *c, radius: *r }).collect())
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.height;
        for (f, xi) in self.factors.iter().zip(x) {
            if v == 0.0 {
                break;
            }
            v *= f.eval(*xi);
        }
        v
    }

    pub fn is_compact(&self) -> bool {
        self.factors.iter().all(Factor::is_compact)
    }

    /// Box containing the support, if bounded.
    pub fn support_box(&self) -> Option<Vec<(f64, f64)>> {
        self.factors.iter().map(|f| if f.is_compact() { f.range() } else { None }).collect()
    }

    /// Indicator of the support box.
    pub fn support_indicator(&self) -> Option<TestFunction> {
        let b = self.support_box()?;
        Some(TestFunction { height: 1.0, factors: b.into_iter().map(|(low, high)| Factor::Interval { low, high }).collect() })
    }

    /// `∫ f dx` (requires every factor to be integrable).
    pub fn integral(&self) -> Result<f64> {
        let mut v = self.height;
        for f in &self.factors {
            if matches!(f, Factor::One) {
                return Err(Error::InvalidParameter("constant factor is not integrable".into()));
            }
            v *= FactorRule::new(f).map(|r| r.sum(|_| 1.0)).unwrap_or(1.0);
        }
        Ok(v)
    }
}

/// Composite Gauss–Legendre rule on a factor's range with the factor values folded
/// into the weights.
pub(crate) struct FactorRule {
    pub xs: Vec<f64>,
    pub wf: Vec<f64>,
}

const FACTOR_PANELS: usize = 64;

impl FactorRule {
    pub fn new(f: &Factor) -> Option<Self> {
        Self::with_panels(f, FACTOR_PANELS)
    }

    pub fn with_panels(f: &Factor, panels: usize) -> Option<Self> {
        let (a, b) = f.range()?;
        let rule = gauss_legendre_16();
        let h = (b - a) / panels as f64;
        let mut xs = Vec::with_capacity(panels * rule.len());
        let mut wf = Vec::with_capacity(xs.capacity());
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, w) in rule {
                let t = mid + 0.5 * h * x;
                xs.push(t);
                wf.push(0.5 * h * w * f.eval(t));
            }
        }
        Some(Self { xs, wf })
    }

    pub fn sum(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.xs.iter().zip(&self.wf).map(|(x, w)| w * g(*x)).sum()
    }
}

pub(crate) fn gauss_legendre_16() -> &'static [(f64, f64)] {
    use std::sync::OnceLock;
    static R: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    R.get_or_init(|| {
        gauss_quad::GaussLegendre::new(std::num::NonZeroUsize::new(16).unwrap()).as_node_weight_pairs().to_vec()
    })
}

/// Sample mean of `f` over the rows of a batch with its standard error.
pub fn expectation(batch: &SampleBatch, f: &TestFunction) -> Result<(f64, f64)> {
    if f.dim() != batch.dim() {
        return Err(Error::DimensionMismatch { expected: batch.dim(), got: f.dim() });
    }
    if batch.is_empty() {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    let (mut s, mut s2) = (0.0, 0.0);
    for r in batch.iter_rows() {
        let v = f.eval(r);
        s += v;
        s2 += v * v;
    }
    let n = batch.len() as f64;
    let m = s / n;
    Ok((m, ((s2 / n - m * m).max(0.0) / n).sqrt()))
}

/// `σ_t(f)` for the normalized centered Heisenberg law at time `t`, whose
/// density is `t^{-2} u(x/√t, y/√t, z/t)`.
///
/// With `G_k(ξ) = ∫ φ_k(x) exp(−x² ξ / (2t tanh ξ)) dx` and
/// `H(ξ) = ∫ φ_3(z) cos(2ξz/t) dz`,
/// `σ_t(f) = h (π t)^{-2} ∫_0^∞ (ξ / sinh ξ) G_1 G_2 H dξ`.
/// A constant `z`-factor reduces to Gaussian integrals in `x, y`.
pub fn levy_expectation(f: &TestFunction, t: f64) -> Result<f64> {
    if f.dim() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: f.dim() });
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("time must be positive, got {t}")));
    }
    let rules: Vec<Option<FactorRule>> = f.factors.iter().map(FactorRule::new).collect();
    if rules[2].is_none() {
        let mut v = f.height;
        for r in rules[..2].iter().flatten() {
            let c = 1.0 / (std::f64::consts::TAU * t).sqrt();
            v *= r.sum(|x| c * (-0.5 * x * x / t).exp());
        }
        return Ok(v);
    }
    let g = |k: usize, xi: f64| -> f64 {
        let a = if xi < 1e-8 { 1.0 } else { xi / xi.tanh() } / (2.0 * t);
        match &rules[k] {
            Some(r) => r.sum(|x| (-a * x * x).exp()),
            None => (std::f64::consts::PI / a).sqrt(),
        }
    };
    let h = rules[2].as_ref().unwrap();
    let i = integrate_half_line(|xi| {
        let s = if xi < 1e-8 { 1.0 } else { xi / xi.sinh() };
        if s < 1e-300 {
            return 0.0;
        }
        s * g(0, xi) * g(1, xi) * h.sum(|z| (2.0 * xi * z / t).cos())
    })?;
    Ok(f.height * i / (std::f64::consts::PI * t).powi(2))
}
