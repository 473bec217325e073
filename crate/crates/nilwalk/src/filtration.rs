//! Central descending series and the bias-dependent weight filtration.

use serde::{Deserialize, Serialize};

use crate::algebra::LieAlgebra;
use crate::error::{Error, Result};
use crate::linalg::{Subspace, SubspaceJson};
use crate::scalar::{format_q, Q};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FiltrationKind {
    Central,
    /// Weight filtration of a drift `X̄`, stored through the lift it was built from.
    Weight { xbar: Vec<Q> },
}

/// Nested ideals `g^(1) ⊇ g^(2) ⊇ ... ⊇ g^(b_max) ⊋ 0`; `g^(0) = g^(1) = g`.
#[derive(Clone, Debug)]
pub struct Filtration {
    kind: FiltrationKind,
    ambient: usize,
    levels: Vec<Subspace>,
}

/// `g^[1] = g`, `g^[i+1] = [g, g^[i]]`.
pub fn central_series(alg: &LieAlgebra) -> Filtration {
    Filtration { kind: FiltrationKind::Central, ambient: alg.dim(), levels: alg.lower_central_series() }
}

/// `g^(i+1) = [g, g^(i)] + [X̄, g^(i-1)]`. The result does not depend on the lift
/// of `X̄` modulo `[g, g]`.
pub fn weight_filtration(alg: &LieAlgebra, xbar: &[Q]) -> Result<Filtration> {
    let n = alg.dim();
    if xbar.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: xbar.len() });
    }
    let full = Subspace::full(n);
    let xline = Subspace::span(n, [xbar.to_vec()]);
    // levels[i] = g^(i), starting from g^(0)
    let mut levels = vec![full.clone(), full.clone()];
    loop {
        let i = levels.len() - 1;
        let next = alg.bracket_spaces(&full, &levels[i]).sum(&alg.bracket_spaces(&xline, &levels[i - 1]));
        let stop = next.is_zero() && levels[i].is_zero();
        levels.push(next);
        if stop {
            break;
        }
    }
    let mut levels: Vec<Subspace> = levels.into_iter().skip(1).collect();
    while levels.last().is_some_and(Subspace::is_zero) {
        levels.pop();
    }
    Ok(Filtration { kind: FiltrationKind::Weight { xbar: xbar.to_vec() }, ambient: n, levels })
}

impl Filtration {
    pub fn kind(&self) -> &FiltrationKind {
        &self.kind
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    /// Largest `b` with `g^(b) ≠ 0`.
    pub fn b_max(&self) -> usize {
        self.levels.len()
    }

    /// `g^(b)`; `g^(0) = g` and levels past `b_max` are zero.
    pub fn level(&self, b: usize) -> Subspace {
        match b {
            0 => Subspace::full(self.ambient),
            b if b <= self.levels.len() => self.levels[b - 1].clone(),
            _ => Subspace::zero(self.ambient),
        }
    }

    pub fn levels(&self) -> &[Subspace] {
        &self.levels
    }

    pub fn dims(&self) -> Vec<usize> {
        self.levels.iter().map(Subspace::dim).collect()
    }

    /// `Σ_i dim g^(i)`.
    pub fn homogeneous_dimension(&self) -> usize {
        self.dims().iter().sum()
    }

    pub fn is_nested(&self) -> bool {
        self.levels.windows(2).all(|w| w[0].contains(&w[1]))
    }

    /// `[g^(i), g^(j)] ⊆ g^(i+j)` for all `i, j ≥ 1`.
    pub fn is_bracket_compatible(&self, alg: &LieAlgebra) -> bool {
        let m = self.b_max();
        (1..=m).all(|i| (i..=m).all(|j| self.level(i + j).contains(&alg.bracket_spaces(&self.level(i), &self.level(j)))))
    }

    /// Same subspaces at every level.
    pub fn same_levels(&self, other: &Filtration) -> bool {
        self.levels == other.levels
    }

    pub fn to_json(&self) -> FiltrationJson {
        let (kind, xbar) = match &self.kind {
            FiltrationKind::Central => ("central".to_string(), None),
            FiltrationKind::Weight { xbar } => ("weight".to_string(), Some(xbar.iter().map(format_q).collect())),
        };
        FiltrationJson {
            kind,
            xbar,
            dims: self.dims(),
            homogeneous_dimension: self.homogeneous_dimension(),
            subspaces: self.levels.iter().map(SubspaceJson::from).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiltrationJson {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xbar: Option<Vec<String>>,
    pub dims: Vec<usize>,
    pub homogeneous_dimension: usize,
    pub subspaces: Vec<SubspaceJson>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{filiform3, heisenberg};
    use crate::scalar::qi;

    fn e(n: usize, i: usize) -> Vec<Q> {
        (0..n).map(|k| qi((k == i) as i64)).collect()
    }

    #[test]
    fn heisenberg_biased() {
        let h = heisenberg();
        let f = weight_filtration(&h, &e(3, 1)).unwrap();
        assert_eq!(f.dims(), vec![3, 1, 1]);
        assert_eq!(f.level(2), Subspace::span(3, [e(3, 2)]));
        assert!(f.level(4).is_zero());
        assert_eq!(f.homogeneous_dimension(), 5);
    }

    #[test]
    fn heisenberg_centered() {
        let h = heisenberg();
        let f = weight_filtration(&h, &[qi(0), qi(0), qi(0)]).unwrap();
        assert_eq!(f.dims(), vec![3, 1]);
        assert_eq!(f.homogeneous_dimension(), 4);
        assert!(f.same_levels(&central_series(&h)));
    }

    #[test]
    fn filiform_t() {
        let f = weight_filtration(&filiform3(), &e(4, 1)).unwrap();
        assert_eq!(f.dims(), vec![4, 2, 2, 1]);
        assert_eq!(f.level(4), Subspace::span(4, [e(4, 3)]));
        assert!(f.level(5).is_zero());
        assert_eq!(f.homogeneous_dimension(), 9);
        assert!(f.is_nested());
        assert!(f.is_bracket_compatible(&filiform3()));
    }

    #[test]
    fn filiform_central() {
        assert_eq!(central_series(&filiform3()).dims(), vec![4, 2, 1]);
    }
}
