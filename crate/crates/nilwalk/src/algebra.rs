//! Nilpotent Lie algebras given by rational structure constants, and the group
//! law of the associated simply connected group in exponential coordinates.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::bch::{bch_table, PlanNode, ProductPlan, MAX_STEP};
use crate::error::{Error, Result};
use crate::linalg::Subspace;
use crate::scalar::{format_q, parse_q, Scalar, Q};

/// Sparse bracket of two basis vectors: `(k, c)` pairs meaning `Σ c e_k`.
pub type Terms = Vec<(usize, Q)>;

/// A finite-dimensional nilpotent Lie algebra with a fixed basis.
///
/// Constants are stored for `i < j`; antisymmetry supplies the rest. The
/// product `*` is the truncated Campbell–Hausdorff series.
#[derive(Clone, Debug)]
pub struct LieAlgebra {
    basis: Vec<String>,
    step: usize,
    table: Vec<Terms>,
    exact: Vec<(usize, usize, usize, Q)>,
    float: Vec<(usize, usize, usize, f64)>,
    plan: Option<ProductPlan>,
    plan_f64: Vec<(usize, f64)>,
}

/// Algebra JSON schema: `{"dim", "step", "basis", "brackets": [[i, j, [[k, "p/q"], ...]], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlgebraJson {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    pub basis: Vec<String>,
    pub brackets: Vec<(usize, usize, Vec<(usize, String)>)>,
}

/// Scalars that can read an algebra's structure constants.
pub trait Field: Scalar {
    fn constants(alg: &LieAlgebra) -> &[(usize, usize, usize, Self)];
}

impl Field for f64 {
    fn constants(alg: &LieAlgebra) -> &[(usize, usize, usize, f64)] {
        &alg.float
    }
}

impl Field for Q {
    fn constants(alg: &LieAlgebra) -> &[(usize, usize, usize, Q)] {
        &alg.exact
    }
}

impl LieAlgebra {
    /// Builds and validates an algebra. Each bracket entry `(i, j, terms)` gives
    /// `[e_i, e_j]`; entries with `i > j` are accepted and must agree with the
    /// antisymmetric counterpart if both are present.
    pub fn new(basis: Vec<String>, brackets: Vec<(usize, usize, Terms)>) -> Result<Self> {
        let n = basis.len();
        if n == 0 {
            return Err(Error::InvalidAlgebra("empty basis".into()));
        }
        let mut table: Vec<Option<Terms>> = vec![None; n * n];
        for (i, j, terms) in brackets {
            if i >= n || j >= n || terms.iter().any(|(k, _)| *k >= n) {
                return Err(Error::InvalidAlgebra(format!("index out of range in bracket ({i},{j})")));
            }
            let terms = normalize(terms);
            if i == j {
                if !terms.is_empty() {
                    return Err(Error::InvalidAlgebra(format!("[e{i},e{i}] must vanish")));
                }
                continue;
            }
            let neg: Terms = terms.iter().map(|(k, c)| (*k, -c.clone())).collect();
            for (a, b, t) in [(i, j, terms), (j, i, neg)] {
                match &table[a * n + b] {
                    Some(prev) if *prev != t => {
                        return Err(Error::InvalidAlgebra(format!("inconsistent constants for ({a},{b})")))
                    }
                    _ => table[a * n + b] = Some(t),
                }
            }
        }
        let table: Vec<Terms> = table.into_iter().map(Option::unwrap_or_default).collect();
        let mut exact = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                for (k, c) in &table[i * n + j] {
                    exact.push((i, j, *k, c.clone()));
                }
            }
        }
        let float = exact.iter().map(|(i, j, k, c)| (*i, *j, *k, f64::from_q(c))).collect();
        let mut alg = Self { basis, step: 0, table, exact, float, plan: None, plan_f64: Vec::new() };
        alg.check_jacobi()?;
        alg.step = alg.compute_step()?;
        if alg.step <= MAX_STEP {
            let plan = bch_table().plan(alg.step);
            alg.plan_f64 = plan.output.iter().map(|(s, c)| (*s, f64::from_q(c))).collect();
            alg.plan = Some(plan);
        }
        Ok(alg)
    }

    pub fn abelian(dim: usize) -> Self {
        Self::new((1..=dim).map(|i| format!("e{i}")).collect(), Vec::new()).expect("abelian algebra")
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn basis_names(&self) -> &[String] {
        &self.basis
    }

    pub fn is_abelian(&self) -> bool {
        self.exact.is_empty()
    }

    /// `[e_i, e_j]` as sparse terms.
    pub fn basis_bracket(&self, i: usize, j: usize) -> &Terms {
        &self.table[i * self.dim() + j]
    }

    /// Nonzero constants `(i, j, k, c)` with `i < j`, meaning `[e_i, e_j]` has `c` on `e_k`.
    pub fn constants_exact(&self) -> &[(usize, usize, usize, Q)] {
        &self.exact
    }

    fn check_dim(&self, v: &[impl Sized]) -> Result<()> {
        if v.len() != self.dim() {
            Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() })
        } else {
            Ok(())
        }
    }

    pub fn bracket<T: Field>(&self, x: &[T], y: &[T]) -> Result<Vec<T>> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        Ok(self.bracket_unchecked(x, y))
    }

    pub fn bracket_unchecked<T: Field>(&self, x: &[T], y: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        for (i, j, k, c) in T::constants(self) {
            let m = x[*i].clone() * y[*j].clone() - x[*j].clone() * y[*i].clone();
            if !m.is_zero() {
                out[*k] = out[*k].clone() + c.clone() * m;
            }
        }
        out
    }

    fn bracket_f64_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for &(i, j, k, c) in &self.float {
            out[k] += c * (x[i] * y[j] - x[j] * y[i]);
        }
    }

    /// Matrix of `ad(x)` (rows indexed by output coordinate).
    pub fn ad_matrix<T: Field>(&self, x: &[T]) -> Vec<Vec<T>> {
        let n = self.dim();
        let mut m = vec![vec![T::zero(); n]; n];
        for j in 0..n {
            let mut e = vec![T::zero(); n];
            e[j] = T::from_q(&Q::from_integer(1.into()));
            let col = self.bracket_unchecked(x, &e);
            for (i, v) in col.into_iter().enumerate() {
                m[i][j] = v;
            }
        }
        m
    }

    fn plan(&self) -> Result<&ProductPlan> {
        self.plan.as_ref().ok_or(Error::StepTooLarge { step: self.step, max: MAX_STEP })
    }

    /// Group product `x * y`.
    pub fn mul<T: Field>(&self, x: &[T], y: &[T]) -> Result<Vec<T>> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        let plan = self.plan()?;
        let mut values: Vec<Vec<T>> = Vec::with_capacity(plan.nodes.len());
        for node in &plan.nodes {
            let v = match node {
                PlanNode::X => x.to_vec(),
                PlanNode::Y => y.to_vec(),
                PlanNode::Bracket(a, b) => self.bracket_unchecked(&values[*a], &values[*b]),
            };
            values.push(v);
        }
        let mut out = vec![T::zero(); self.dim()];
        for (slot, c) in &plan.output {
            let c = T::from_q(c);
            for (o, v) in out.iter_mut().zip(&values[*slot]) {
                if !v.is_zero() {
                    *o = o.clone() + c.clone() * v.clone();
                }
            }
        }
        Ok(out)
    }

    /// Float product into `out`, using `scratch` as workspace. Dimensions are
    /// not checked; the step must be supported (see [`LieAlgebra::product_supported`]).
    pub fn mul_into(&self, x: &[f64], y: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
        let n = self.dim();
        if self.float.is_empty() {
            for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
                *o = a + b;
            }
            return;
        }
        let plan = self.plan.as_ref().expect("product step supported");
        scratch.resize(plan.nodes.len() * n, 0.0);
        for (s, node) in plan.nodes.iter().enumerate() {
            let (done, rest) = scratch.split_at_mut(s * n);
            let dst = &mut rest[..n];
            match node {
                PlanNode::X => dst.copy_from_slice(x),
                PlanNode::Y => dst.copy_from_slice(y),
                PlanNode::Bracket(a, b) => {
                    self.bracket_f64_into(&done[a * n..(a + 1) * n], &done[b * n..(b + 1) * n], dst)
                }
            }
        }
        out.fill(0.0);
        for &(slot, c) in &self.plan_f64 {
            let v = &scratch[slot * n..(slot + 1) * n];
            for (o, vi) in out.iter_mut().zip(v) {
                *o += c * vi;
            }
        }
    }

    pub fn product_supported(&self) -> bool {
        self.plan.is_some()
    }

    /// `Ad(y) x = y * x * (-y)`.
    pub fn adjoint<T: Field>(&self, y: &[T], x: &[T]) -> Result<Vec<T>> {
        let neg: Vec<T> = y.iter().map(|v| -v.clone()).collect();
        let xy = self.mul(x, &neg)?;
        self.mul(y, &xy)
    }

    /// Left fold `x_1 * x_2 * ... * x_k` (0 for an empty list).
    pub fn product_of<T: Field>(&self, xs: &[Vec<T>]) -> Result<Vec<T>> {
        let mut acc = vec![T::zero(); self.dim()];
        for x in xs {
            acc = self.mul(&acc, x)?;
        }
        Ok(acc)
    }

    /// `[e_a, v]` for a basis index `a` and an exact vector `v`.
    pub fn basis_vec_bracket(&self, a: usize, v: &[Q]) -> Vec<Q> {
        let mut out = vec![Q::zero(); self.dim()];
        for (m, c) in v.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for (k, d) in self.basis_bracket(a, m) {
                out[*k] += c * d;
            }
        }
        out
    }

    /// Span of all brackets `[u, v]` with `u ∈ a`, `v ∈ b`.
    pub fn bracket_spaces(&self, a: &Subspace, b: &Subspace) -> Subspace {
        let mut vecs = Vec::new();
        for u in a.basis() {
            for v in b.basis() {
                let w = self.bracket_unchecked(u, v);
                if w.iter().any(|c| !c.is_zero()) {
                    vecs.push(w);
                }
            }
        }
        Subspace::span(self.dim(), vecs)
    }

    /// Lower central series `g^[1] = g ⊋ ... ⊋ g^[s] ⊋ 0`, without the trailing zero.
    pub fn lower_central_series(&self) -> Vec<Subspace> {
        let n = self.dim();
        let full = Subspace::full(n);
        let mut series = vec![full.clone()];
        loop {
            let next = self.bracket_spaces(&full, series.last().unwrap());
            if next.is_zero() || next.dim() == series.last().unwrap().dim() {
                if !next.is_zero() {
                    series.push(next);
                }
                return series;
            }
            series.push(next);
        }
    }

    fn compute_step(&self) -> Result<usize> {
        let series = self.lower_central_series();
        let last = series.last().unwrap();
        let stalled = series.len() >= 2 && series[series.len() - 2].dim() == last.dim();
        if stalled {
            return Err(Error::InvalidAlgebra("not nilpotent: lower central series stabilizes".into()));
        }
        Ok(series.len())
    }

    fn check_jacobi(&self) -> Result<()> {
        let n = self.dim();
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    let mut total = vec![Q::zero(); n];
                    for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                        let inner = dense(self.basis_bracket(b, c), n);
                        for (t, v) in total.iter_mut().zip(self.basis_vec_bracket(a, &inner)) {
                            *t += v;
                        }
                    }
                    if total.iter().any(|c| !c.is_zero()) {
                        return Err(Error::InvalidAlgebra(format!("Jacobi identity fails on (e{i}, e{j}, e{k})")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> AlgebraJson {
        let n = self.dim();
        let mut brackets = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let t = self.basis_bracket(i, j);
                if !t.is_empty() {
                    brackets.push((i, j, t.iter().map(|(k, c)| (*k, format_q(c))).collect()));
                }
            }
        }
        AlgebraJson { dim: n, step: Some(self.step), basis: self.basis.clone(), brackets }
    }

    pub fn from_json(j: &AlgebraJson) -> Result<Self> {
        if j.basis.len() != j.dim {
            return Err(Error::InvalidAlgebra(format!("dim {} but {} basis names", j.dim, j.basis.len())));
        }
        let brackets = j
            .brackets
            .iter()
            .map(|(i, jj, t)| {
                let terms = t.iter().map(|(k, s)| Ok((*k, parse_q(s)?))).collect::<Result<Terms>>()?;
                Ok((*i, *jj, terms))
            })
            .collect::<Result<Vec<_>>>()?;
        let alg = Self::new(j.basis.clone(), brackets)?;
        if let Some(s) = j.step {
            if s != alg.step {
                return Err(Error::InvalidAlgebra(format!("declared step {s}, computed {}", alg.step)));
            }
        }
        Ok(alg)
    }
}

fn normalize(terms: Terms) -> Terms {
    let mut acc: std::collections::BTreeMap<usize, Q> = Default::default();
    for (k, c) in terms {
        *acc.entry(k).or_insert_with(Q::zero) += c;
    }
    acc.into_iter().filter(|(_, c)| !c.is_zero()).collect()
}

pub(crate) fn dense(t: &Terms, n: usize) -> Vec<Q> {
    let mut v = vec![Q::zero(); n];
    for (k, c) in t {
        v[*k] += c;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{filiform3, heisenberg};
    use crate::scalar::{q, qi};

    fn e(n: usize, i: usize) -> Vec<Q> {
        (0..n).map(|k| if k == i { qi(1) } else { qi(0) }).collect()
    }

    #[test]
    fn heisenberg_product() {
        let h = heisenberg();
        let p = h.mul(&e(3, 0), &e(3, 1)).unwrap();
        assert_eq!(p, vec![qi(1), qi(1), q(1, 2)]);
        let b = h.bracket(&e(3, 0), &e(3, 1)).unwrap();
        assert_eq!(b, e(3, 2));
    }

    #[test]
    fn filiform_product() {
        let f = filiform3();
        let p = f.mul(&e(4, 0), &e(4, 1)).unwrap();
        assert_eq!(p, vec![qi(1), qi(1), q(1, 2), q(1, 12)]);
        assert_eq!(f.bracket(&e(4, 0), &e(4, 2)).unwrap(), e(4, 3));
    }

    #[test]
    fn adjoint_heisenberg() {
        let h = heisenberg();
        let a = h.adjoint(&e(3, 0), &e(3, 1)).unwrap();
        assert_eq!(a, vec![qi(0), qi(1), qi(1)]);
    }

    #[test]
    fn float_matches_exact() {
        let f = filiform3();
        let x = [0.3, -1.2, 0.7, 2.0];
        let y = [1.1, 0.4, -0.5, 0.25];
        let generic = f.mul(&x, &y).unwrap();
        let mut out = [0.0; 4];
        let mut scratch = Vec::new();
        f.mul_into(&x, &y, &mut out, &mut scratch);
        for (a, b) in generic.iter().zip(&out) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let names: Vec<String> = (0..3).map(|i| format!("e{i}")).collect();
        let r = LieAlgebra::new(names.clone(), vec![(0, 1, vec![(2, qi(1))]), (1, 0, vec![(2, qi(1))])]);
        assert!(matches!(r, Err(Error::InvalidAlgebra(_))));
        // sl2-like relations: not nilpotent
        let r = LieAlgebra::new(
            names.clone(),
            vec![(0, 1, vec![(2, qi(1))]), (2, 0, vec![(0, qi(2))]), (2, 1, vec![(1, qi(-2))])],
        );
        assert!(r.is_err());
        let names5: Vec<String> = (0..5).map(|i| format!("e{i}")).collect();
        let r = LieAlgebra::new(names5, vec![(1, 2, vec![(3, qi(1))]), (0, 3, vec![(4, qi(1))])]);
        assert!(matches!(r, Err(Error::InvalidAlgebra(m)) if m.contains("Jacobi")));
        let h = heisenberg();
        assert!(matches!(h.bracket(&[1.0, 2.0], &[0.0, 0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn json_roundtrip() {
        let f = filiform3();
        let j = f.to_json();
        let s = serde_json::to_string(&j).unwrap();
        let back = LieAlgebra::from_json(&serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(back.constants_exact(), f.constants_exact());
        assert_eq!(back.step(), 3);
    }
}
