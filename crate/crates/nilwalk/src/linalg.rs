//! Exact linear algebra over the rationals: row reduction, spans, complements.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::scalar::{format_q, parse_q, Q};

/// Reduced row-echelon form. Returns the nonzero rows and their pivot columns.
pub fn rref(mut rows: Vec<Vec<Q>>, ncols: usize) -> (Vec<Vec<Q>>, Vec<usize>) {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][c].recip();
        for v in rows[r].iter_mut() {
            *v *= &inv;
        }
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    rows.truncate(r);
    (rows, pivots)
}

pub fn rank(rows: Vec<Vec<Q>>, ncols: usize) -> usize {
    rref(rows, ncols).1.len()
}

/// Basis of the null space `{a : M a = 0}` of an `m × n` matrix given by rows.
pub fn null_space(rows: Vec<Vec<Q>>, ncols: usize) -> Vec<Vec<Q>> {
    let (r, piv) = rref(rows, ncols);
    let free: Vec<usize> = (0..ncols).filter(|c| !piv.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Q::zero(); ncols];
            v[f] = Q::one();
            for (row, &p) in r.iter().zip(&piv) {
                v[p] = -row[f].clone();
            }
            v
        })
        .collect()
}

/// Inverse of a square matrix, or `None` if singular.
pub fn inverse(m: &[Vec<Q>]) -> Option<Vec<Vec<Q>>> {
    let n = m.len();
    let aug: Vec<Vec<Q>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            r
        })
        .collect();
    let (r, piv) = rref(aug, 2 * n);
    if piv.len() < n || piv[n - 1] != n - 1 {
        return None;
    }
    Some(r.into_iter().map(|row| row[n..].to_vec()).collect())
}

pub fn mat_vec(m: &[Vec<Q>], v: &[Q]) -> Vec<Q> {
    m.iter()
        .map(|row| {
            row.iter()
                .zip(v)
                .filter(|(a, b)| !a.is_zero() && !b.is_zero())
                .fold(Q::zero(), |acc, (a, b)| acc + a * b)
        })
        .collect()
}

/// A linear subspace of `Q^n`, stored by its reduced row-echelon basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subspace {
    ambient: usize,
    basis: Vec<Vec<Q>>,
    pivots: Vec<usize>,
}

impl Subspace {
    pub fn zero(ambient: usize) -> Self {
        Self { ambient, basis: Vec::new(), pivots: Vec::new() }
    }

    pub fn full(ambient: usize) -> Self {
        let basis = (0..ambient)
            .map(|i| (0..ambient).map(|j| if i == j { Q::one() } else { Q::zero() }).collect())
            .collect();
        Self { ambient, basis, pivots: (0..ambient).collect() }
    }

    pub fn span<I: IntoIterator<Item = Vec<Q>>>(ambient: usize, vecs: I) -> Self {
        let rows: Vec<Vec<Q>> = vecs.into_iter().collect();
        debug_assert!(rows.iter().all(|r| r.len() == ambient));
        let (basis, pivots) = rref(rows, ambient);
        Self { ambient, basis, pivots }
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_zero(&self) -> bool {
        self.basis.is_empty()
    }

    /// Reduced row-echelon basis.
    pub fn basis(&self) -> &[Vec<Q>] {
        &self.basis
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Coordinates of `v` in the echelon basis, if `v` lies in the subspace.
    pub fn coordinates(&self, v: &[Q]) -> Option<Vec<Q>> {
        let coords: Vec<Q> = self.pivots.iter().map(|&p| v[p].clone()).collect();
        let mut rest = v.to_vec();
        for (c, b) in coords.iter().zip(&self.basis) {
            if c.is_zero() {
                continue;
            }
            for (r, bv) in rest.iter_mut().zip(b) {
                if !bv.is_zero() {
                    *r -= c * bv;
                }
            }
        }
        rest.iter().all(Zero::is_zero).then_some(coords)
    }

    pub fn contains_vec(&self, v: &[Q]) -> bool {
        self.coordinates(v).is_some()
    }

    pub fn contains(&self, other: &Subspace) -> bool {
        other.basis.iter().all(|v| self.contains_vec(v))
    }

    pub fn sum(&self, other: &Subspace) -> Subspace {
        Subspace::span(self.ambient, self.basis.iter().chain(&other.basis).cloned())
    }

    /// Complement of `sub` inside `self`: express `sub` in the echelon coordinates
    /// of `self`, row-reduce, and keep the basis vectors of `self` whose
    /// coordinate is not a pivot.
    pub fn complement_of(&self, sub: &Subspace) -> Vec<Vec<Q>> {
        let coords: Vec<Vec<Q>> = sub
            .basis
            .iter()
            .map(|v| self.coordinates(v).expect("complement_of: not a subspace"))
            .collect();
        let (_, piv) = rref(coords, self.dim());
        (0..self.dim())
            .filter(|k| !piv.contains(k))
            .map(|k| self.basis[k].clone())
            .collect()
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        self.basis.iter().map(|r| r.iter().map(format_q).collect()).collect()
    }
}

/// JSON form of a subspace: echelon basis rows as rational strings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubspaceJson {
    pub dim: usize,
    pub basis: Vec<Vec<String>>,
}

impl From<&Subspace> for SubspaceJson {
    fn from(s: &Subspace) -> Self {
        Self { dim: s.dim(), basis: s.to_strings() }
    }
}

impl SubspaceJson {
    pub fn to_subspace(&self, ambient: usize) -> crate::Result<Subspace> {
        let rows = self
            .basis
            .iter()
            .map(|r| r.iter().map(|s| parse_q(s)).collect::<crate::Result<Vec<Q>>>())
            .collect::<crate::Result<Vec<_>>>()?;
        Ok(Subspace::span(ambient, rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, qi};

    fn v(xs: &[i64]) -> Vec<Q> {
        xs.iter().map(|&x| qi(x)).collect()
    }

    #[test]
    fn rref_and_rank() {
        let (r, p) = rref(vec![v(&[2, 4, 0]), v(&[1, 2, 1]), v(&[3, 6, 1])], 3);
        assert_eq!(p, vec![0, 2]);
        assert_eq!(r[0], v(&[1, 2, 0]));
        assert_eq!(rank(vec![v(&[1, 1]), v(&[2, 2])], 2), 1);
    }

    #[test]
    fn inverse_roundtrip() {
        let m = vec![v(&[2, 1]), v(&[1, 1])];
        let inv = inverse(&m).unwrap();
        assert_eq!(inv, vec![v(&[1, -1]), v(&[-1, 2])]);
        assert!(inverse(&[v(&[1, 2]), v(&[2, 4])]).is_none());
    }

    #[test]
    fn null_space_is_annihilated() {
        let rows = vec![v(&[1, 2, 3]), v(&[0, 1, 1])];
        let ns = null_space(rows.clone(), 3);
        assert_eq!(ns.len(), 1);
        for n in &ns {
            assert!(mat_vec(&rows, n).iter().all(Zero::is_zero));
        }
    }

    #[test]
    fn complement_is_direct() {
        let big = Subspace::span(4, [v(&[1, 0, 1, 0]), v(&[0, 1, 0, 0]), v(&[0, 0, 1, 1])]);
        let sub = Subspace::span(4, [v(&[0, 1, 1, 1])]);
        assert!(big.contains(&sub));
        let m = big.complement_of(&sub);
        assert_eq!(m.len(), 2);
        let total = Subspace::span(4, m.iter().cloned().chain(sub.basis().iter().cloned()));
        assert_eq!(total, big);
        let c = big.coordinates(&v(&[1, 1, 1, 0])).unwrap();
        assert_eq!(c, vec![qi(1), qi(1), qi(1)]);
        assert!(big.coordinates(&[q(1, 2), qi(0), qi(0), qi(0)]).is_none());
    }
}
