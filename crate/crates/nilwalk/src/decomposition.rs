//! Weight gradings: complements `m^(b)`, projections, dilations, the graded
//! bracket `[.,.]'`, and the bias extension `g̃ = g ⊕ ℝχ`.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::algebra::{LieAlgebra, Terms};
use crate::error::{Error, Result};
use crate::filtration::{Filtration, FiltrationJson, FiltrationKind};
use crate::linalg::{inverse, mat_vec};
use crate::scalar::{format_q, q_vec_to_f64, Scalar, Q};

/// An adapted basis (columns of `p`) with integer weights, plus float copies.
#[derive(Clone, Debug)]
struct Frame {
    weights: Vec<usize>,
    p: Vec<Vec<Q>>,
    p_inv: Vec<Vec<Q>>,
    pf: Vec<f64>,
    pf_inv: Vec<f64>,
    identity: bool,
}

impl Frame {
    fn new(vectors: &[Vec<Q>], weights: Vec<usize>) -> Self {
        let n = vectors.len();
        let p: Vec<Vec<Q>> = (0..n).map(|i| (0..n).map(|j| vectors[j][i].clone()).collect()).collect();
        let p_inv = inverse(&p).expect("adapted basis is a basis");
        let flat = |m: &[Vec<Q>]| m.iter().flat_map(|r| q_vec_to_f64(r)).collect::<Vec<f64>>();
        let identity = (0..n).all(|i| (0..n).all(|j| p[i][j] == if i == j { Q::one() } else { Q::zero() }));
        Self { pf: flat(&p), pf_inv: flat(&p_inv), weights, p, p_inv, identity }
    }

    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn to_adapted(&self, x: &[f64]) -> Vec<f64> {
        if self.identity {
            return x.to_vec();
        }
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.pf_inv[i * n + j] * x[j]).sum()).collect()
    }

    fn from_adapted(&self, c: &[f64]) -> Vec<f64> {
        if self.identity {
            return c.to_vec();
        }
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.pf[i * n + j] * c[j]).sum()).collect()
    }

    fn scale(&self, r: f64, x: &[f64]) -> Vec<f64> {
        let mut c = self.to_adapted(x);
        for (v, w) in c.iter_mut().zip(&self.weights) {
            *v *= r.powi(*w as i32);
        }
        self.from_adapted(&c)
    }

    fn project_exact(&self, b: usize, x: &[Q]) -> Vec<Q> {
        let mut c = mat_vec(&self.p_inv, x);
        for (v, w) in c.iter_mut().zip(&self.weights) {
            if *w != b {
                *v = Q::zero();
            }
        }
        mat_vec(&self.p, &c)
    }

    fn project(&self, b: usize, x: &[f64]) -> Vec<f64> {
        let mut c = self.to_adapted(x);
        for (v, w) in c.iter_mut().zip(&self.weights) {
            if *w != b {
                *v = 0.0;
            }
        }
        self.from_adapted(&c)
    }
}

/// Graded bracket `[x, y]' = π^(i+j)[x^(i), y^(j)]` written as an algebra in
/// the original coordinates.
fn graded_algebra(alg: &LieAlgebra, frame: &Frame) -> Result<LieAlgebra> {
    let n = alg.dim();
    let cols: Vec<Vec<Q>> = (0..n).map(|j| (0..n).map(|i| frame.p[i][j].clone()).collect()).collect();
    // graded brackets of adapted basis vectors, in adapted coordinates
    let mut adapted = vec![vec![Vec::<(usize, Q)>::new(); n]; n];
    for a in 0..n {
        for b in (a + 1)..n {
            let br = alg.bracket_unchecked(&cols[a], &cols[b]);
            if br.iter().all(Zero::is_zero) {
                continue;
            }
            let w = frame.weights[a] + frame.weights[b];
            let c = mat_vec(&frame.p_inv, &br);
            let t: Vec<(usize, Q)> =
                c.into_iter().enumerate().filter(|(k, v)| frame.weights[*k] == w && !v.is_zero()).collect();
            adapted[b][a] = t.iter().map(|(k, v)| (*k, -v.clone())).collect();
            adapted[a][b] = t;
        }
    }
    let mut brackets = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let mut acc = vec![Q::zero(); n];
            for a in 0..n {
                let ca = &frame.p_inv[a][i];
                if ca.is_zero() {
                    continue;
                }
                for b in 0..n {
                    let cb = &frame.p_inv[b][j];
                    if cb.is_zero() || adapted[a][b].is_empty() {
                        continue;
                    }
                    let f = ca * cb;
                    for (k, v) in &adapted[a][b] {
                        acc[*k] += &f * v;
                    }
                }
            }
            let orig = mat_vec(&frame.p, &acc);
            let t: Terms = orig.into_iter().enumerate().filter(|(_, v)| !v.is_zero()).collect();
            if !t.is_empty() {
                brackets.push((i, j, t));
            }
        }
    }
    LieAlgebra::new(alg.basis_names().to_vec(), brackets)
}

/// A choice of complements `g^(b) = m^(b) ⊕ g^(b+1)`.
///
/// `m^(b)` is obtained by writing `g^(b+1)` in the echelon coordinates of
/// `g^(b)`, row-reducing, and keeping the echelon basis vectors of `g^(b)` at
/// the non-pivot positions. The choice is deterministic and depends on the
/// basis order.
#[derive(Clone, Debug)]
pub struct WeightDecomposition {
    alg: LieAlgebra,
    filtration: Filtration,
    layers: Vec<Vec<Vec<Q>>>,
    frame: Frame,
    x_lift: Vec<Q>,
    graded: LieAlgebra,
}

impl WeightDecomposition {
    pub fn new(alg: &LieAlgebra, filtration: Filtration) -> Result<Self> {
        if filtration.ambient() != alg.dim() {
            return Err(Error::DimensionMismatch { expected: alg.dim(), got: filtration.ambient() });
        }
        let b_max = filtration.b_max();
        let mut layers = Vec::with_capacity(b_max);
        let mut vectors = Vec::new();
        let mut weights = Vec::new();
        for b in 1..=b_max {
            let m = filtration.level(b).complement_of(&filtration.level(b + 1));
            for v in &m {
                vectors.push(v.clone());
                weights.push(b);
            }
            layers.push(m);
        }
        let frame = Frame::new(&vectors, weights);
        let x_lift = match filtration.kind() {
            FiltrationKind::Central => vec![Q::zero(); alg.dim()],
            FiltrationKind::Weight { xbar } => frame.project_exact(1, xbar),
        };
        let graded = graded_algebra(alg, &frame)?;
        Ok(Self { alg: alg.clone(), filtration, layers, frame, x_lift, graded })
    }

    /// Weight filtration of `xbar` with its default decomposition.
    pub fn for_bias(alg: &LieAlgebra, xbar: &[Q]) -> Result<Self> {
        Self::new(alg, crate::filtration::weight_filtration(alg, xbar)?)
    }

    pub fn algebra(&self) -> &LieAlgebra {
        &self.alg
    }

    pub fn filtration(&self) -> &Filtration {
        &self.filtration
    }

    pub fn dim(&self) -> usize {
        self.alg.dim()
    }

    pub fn b_max(&self) -> usize {
        self.layers.len()
    }

    /// Basis of `m^(b)` (empty past `b_max`).
    pub fn layer(&self, b: usize) -> &[Vec<Q>] {
        if b == 0 || b > self.layers.len() {
            &[]
        } else {
            &self.layers[b - 1]
        }
    }

    pub fn layer_dim(&self, b: usize) -> usize {
        self.layer(b).len()
    }

    /// Weight of each adapted basis vector, in adapted order.
    pub fn weights(&self) -> &[usize] {
        &self.frame.weights
    }

    /// Adapted basis vectors (columns of the basis change).
    pub fn adapted_basis(&self) -> Vec<Vec<Q>> {
        let n = self.dim();
        (0..n).map(|j| (0..n).map(|i| self.frame.p[i][j].clone()).collect()).collect()
    }

    /// `X = π^(1)(X̄)`, the drift lifted into `m^(1)`.
    pub fn x_lift(&self) -> &[Q] {
        &self.x_lift
    }

    pub fn x_lift_f64(&self) -> Vec<f64> {
        q_vec_to_f64(&self.x_lift)
    }

    pub fn is_centered(&self) -> bool {
        self.x_lift.iter().all(Zero::is_zero)
    }

    /// `(g, [.,.]')` in the original coordinates.
    pub fn graded(&self) -> &LieAlgebra {
        &self.graded
    }

    /// `Σ_b b · dim m^(b)`.
    pub fn homogeneous_dimension(&self) -> usize {
        self.frame.weights.iter().sum()
    }

    pub fn to_adapted(&self, x: &[f64]) -> Vec<f64> {
        self.frame.to_adapted(x)
    }

    pub fn from_adapted(&self, c: &[f64]) -> Vec<f64> {
        self.frame.from_adapted(c)
    }

    /// Adapted coordinates of `π^(b)(x)` inside `m^(b)`.
    pub fn layer_coords(&self, b: usize, x: &[f64]) -> Vec<f64> {
        let c = self.frame.to_adapted(x);
        c.into_iter().zip(&self.frame.weights).filter(|(_, w)| **w == b).map(|(v, _)| v).collect()
    }

    pub fn project(&self, b: usize, x: &[f64]) -> Vec<f64> {
        self.frame.project(b, x)
    }

    pub fn project_exact(&self, b: usize, x: &[Q]) -> Vec<Q> {
        self.frame.project_exact(b, x)
    }

    /// `D_r x = Σ_b r^b x^(b)`.
    pub fn dilate(&self, r: f64, x: &[f64]) -> Result<Vec<f64>> {
        check_dilation(r)?;
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.frame.scale(r, x))
    }

    /// Unchecked dilation for inner loops.
    pub fn dilate_unchecked(&self, r: f64, x: &[f64]) -> Vec<f64> {
        self.frame.scale(r, x)
    }

    pub fn graded_bracket<T: crate::algebra::Field>(&self, x: &[T], y: &[T]) -> Result<Vec<T>> {
        self.graded.bracket(x, y)
    }

    pub fn graded_product<T: crate::algebra::Field>(&self, x: &[T], y: &[T]) -> Result<Vec<T>> {
        self.graded.mul(x, y)
    }

    /// `a_X(y) = Σ_i π^(i+2)[X, y^(i)]`.
    pub fn a_x(&self, y: &[Q]) -> Result<Vec<Q>> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: y.len() });
        }
        let mut out = vec![Q::zero(); self.dim()];
        for i in 1..=self.b_max() {
            let yi = self.project_exact(i, y);
            let br = self.alg.bracket_unchecked(&self.x_lift, &yi);
            for (o, v) in out.iter_mut().zip(self.project_exact(i + 2, &br)) {
                *o += v;
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> DecompositionJson {
        let strings = |v: &[Q]| v.iter().map(format_q).collect::<Vec<_>>();
        DecompositionJson {
            filtration: self.filtration.to_json(),
            layers: self.layers.iter().map(|l| l.iter().map(|v| strings(v)).collect()).collect(),
            layer_dims: self.layers.iter().map(Vec::len).collect(),
            x_lift: strings(&self.x_lift),
            homogeneous_dimension: self.homogeneous_dimension(),
            graded_algebra: self.graded.to_json(),
        }
    }
}

fn check_dilation(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("dilation factor must be positive, got {r}")))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecompositionJson {
    pub filtration: FiltrationJson,
    pub layers: Vec<Vec<Vec<String>>>,
    pub layer_dims: Vec<usize>,
    pub x_lift: Vec<String>,
    pub homogeneous_dimension: usize,
    pub graded_algebra: crate::algebra::AlgebraJson,
}

/// `g̃ = g ⊕ ℝχ` with `[χ, x] = [X, x]`, graded with `χ` of weight 2.
///
/// Coordinates on `g̃` are `(x_1, ..., x_n, t)` for `x + tχ`. When the drift
/// vanishes, `g̃ = g` and there is no `χ` coordinate.
#[derive(Clone, Debug)]
pub struct BiasExtension {
    dec: WeightDecomposition,
    ext: LieAlgebra,
    graded_ext: LieAlgebra,
    frame: Frame,
    chi: Option<usize>,
}

impl BiasExtension {
    pub fn new(dec: &WeightDecomposition) -> Result<Self> {
        let alg = dec.algebra();
        let n = alg.dim();
        if dec.is_centered() {
            return Ok(Self {
                dec: dec.clone(),
                ext: alg.clone(),
                graded_ext: dec.graded().clone(),
                frame: dec.frame.clone(),
                chi: None,
            });
        }
        let mut brackets: Vec<(usize, usize, Terms)> =
            alg.constants_exact().iter().map(|(i, j, k, c)| (*i, *j, vec![(*k, c.clone())])).collect();
        let x = dec.x_lift();
        for j in 0..n {
            let mut e = vec![Q::zero(); n];
            e[j] = Q::one();
            let br = alg.bracket_unchecked(x, &e);
            let t: Terms = br.into_iter().enumerate().filter(|(_, v)| !v.is_zero()).collect();
            if !t.is_empty() {
                brackets.push((n, j, t));
            }
        }
        let mut names = alg.basis_names().to_vec();
        names.push("chi".into());
        let ext = LieAlgebra::new(names, brackets)?;
        let pad = |v: &Vec<Q>| {
            let mut w = v.clone();
            w.push(Q::zero());
            w
        };
        let mut vectors = Vec::new();
        let mut weights = Vec::new();
        for b in 1..=dec.b_max() {
            for v in dec.layer(b) {
                vectors.push(pad(v));
                weights.push(b);
            }
            if b == 2 || (b == 1 && dec.b_max() == 1) {
                let mut chi = vec![Q::zero(); n + 1];
                chi[n] = Q::one();
                vectors.push(chi);
                weights.push(2);
            }
        }
        let frame = Frame::new(&vectors, weights);
        let graded_ext = graded_algebra(&ext, &frame)?;
        Ok(Self { dec: dec.clone(), ext, graded_ext, frame, chi: Some(n) })
    }

    pub fn decomposition(&self) -> &WeightDecomposition {
        &self.dec
    }

    /// `(g̃, [.,.])`.
    pub fn algebra(&self) -> &LieAlgebra {
        &self.ext
    }

    /// `(g̃, [.,.]')`.
    pub fn graded(&self) -> &LieAlgebra {
        &self.graded_ext
    }

    pub fn dim(&self) -> usize {
        self.ext.dim()
    }

    pub fn chi_index(&self) -> Option<usize> {
        self.chi
    }

    /// Coordinates of `χ` in `g̃` (zero when the drift vanishes).
    pub fn chi(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        if let Some(i) = self.chi {
            v[i] = 1.0;
        }
        v
    }

    pub fn chi_exact(&self) -> Vec<Q> {
        let mut v = vec![Q::zero(); self.dim()];
        if let Some(i) = self.chi {
            v[i] = Q::one();
        }
        v
    }

    /// Embeds `x ∈ g` as `x ⊕ 0χ`.
    pub fn embed<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let mut v = x.to_vec();
        if self.chi.is_some() {
            v.push(T::zero());
        }
        v
    }

    /// `p(x + tχ) = x + tX`.
    pub fn project_to_g(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dec.dim();
        let mut x = v[..n].to_vec();
        if let Some(i) = self.chi {
            let t = v[i];
            for (xi, xl) in x.iter_mut().zip(self.dec.x_lift_f64()) {
                *xi += t * xl;
            }
        }
        x
    }

    /// The extended increment `x − X + χ` of a sample `x` of μ.
    pub fn lift_increment(&self, x: &[f64]) -> Vec<f64> {
        let mut v: Vec<f64> = x.iter().zip(self.dec.x_lift_f64()).map(|(a, b)| a - b).collect();
        if self.chi.is_some() {
            v.push(1.0);
        }
        v
    }

    /// Dilation of `g̃` (χ has weight 2).
    pub fn dilate(&self, r: f64, x: &[f64]) -> Result<Vec<f64>> {
        check_dilation(r)?;
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.frame.scale(r, x))
    }

    pub fn dilate_unchecked(&self, r: f64, x: &[f64]) -> Vec<f64> {
        self.frame.scale(r, x)
    }

    pub fn ext_weights(&self) -> &[usize] {
        &self.frame.weights
    }
}
