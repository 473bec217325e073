//! Hall basis of the free Lie algebra and exact expansion into the free
//! associative algebra.
//!
//! Elements are listed by degree. Within a degree, `[h_i, h_j]` (with `i < j`)
//! is admitted when `h_j` is a generator or `h_j = [h_k, h_l]` with `k <= i`,
//! and candidates are enumerated in lexicographic order of `(i, j)`. This
//! ordering is frozen: basis labels and free-algebra coordinates depend on it.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::linalg::rref;
use crate::scalar::Q;

/// Element of the free associative algebra: word -> coefficient.
pub type NcPoly = BTreeMap<Vec<u8>, Q>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HallKind {
    Generator(usize),
    Bracket(usize, usize),
}

#[derive(Clone, Debug)]
pub struct HallElement {
    pub degree: usize,
    pub kind: HallKind,
    pub label: String,
}

#[derive(Clone, Debug)]
struct DegreeSolver {
    first: usize,
    count: usize,
    pivot_words: Vec<Vec<u8>>,
    transform: Vec<Vec<Q>>,
}

#[derive(Clone, Debug)]
pub struct HallBasis {
    rank: usize,
    max_degree: usize,
    elements: Vec<HallElement>,
    expansions: Vec<NcPoly>,
    solvers: Vec<DegreeSolver>,
}

/// Dimension of the degree-`n` part of the free Lie algebra on `rank` generators.
pub fn witt_dimension(rank: usize, n: usize) -> usize {
    let mut total: i128 = 0;
    for d in 1..=n {
        if n % d == 0 {
            total += mobius(d) as i128 * (rank as i128).pow((n / d) as u32);
        }
    }
    (total / n as i128) as usize
}

fn mobius(mut n: usize) -> i32 {
    let mut result = 1;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            result = -result;
        }
        p += 1;
    }
    if n > 1 {
        result = -result;
    }
    result
}

pub fn poly_mul(a: &NcPoly, b: &NcPoly, max_degree: usize) -> NcPoly {
    let mut out = NcPoly::new();
    for (wa, ca) in a {
        for (wb, cb) in b {
            if wa.len() + wb.len() > max_degree {
                continue;
            }
            let mut w = wa.clone();
            w.extend_from_slice(wb);
            let e = out.entry(w).or_insert_with(Q::zero);
            *e += ca * cb;
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

pub fn poly_add_scaled(acc: &mut NcPoly, p: &NcPoly, s: &Q) {
    for (w, c) in p {
        let e = acc.entry(w.clone()).or_insert_with(Q::zero);
        *e += c * s;
    }
    acc.retain(|_, c| !c.is_zero());
}

fn commutator(a: &NcPoly, b: &NcPoly) -> NcPoly {
    let deg = usize::MAX;
    let mut out = poly_mul(a, b, deg);
    poly_add_scaled(&mut out, &poly_mul(b, a, deg), &-Q::one());
    out
}

impl HallBasis {
    /// Hall basis of the free Lie algebra on generators named `names`, up to
    /// degree `max_degree`.
    pub fn new(names: &[&str], max_degree: usize) -> Self {
        let rank = names.len();
        let mut elements: Vec<HallElement> = names
            .iter()
            .enumerate()
            .map(|(i, n)| HallElement { degree: 1, kind: HallKind::Generator(i), label: n.to_string() })
            .collect();
        for n in 2..=max_degree {
            let existing = elements.len();
            for i in 0..existing {
                for j in (i + 1)..existing {
                    if elements[i].degree + elements[j].degree != n {
                        continue;
                    }
                    let ok = match elements[j].kind {
                        HallKind::Generator(_) => true,
                        HallKind::Bracket(k, _) => k <= i,
                    };
                    if ok {
                        let label = format!("[{},{}]", elements[i].label, elements[j].label);
                        elements.push(HallElement { degree: n, kind: HallKind::Bracket(i, j), label });
                    }
                }
            }
        }
        let mut expansions: Vec<NcPoly> = Vec::with_capacity(elements.len());
        for e in &elements {
            let p = match e.kind {
                HallKind::Generator(g) => NcPoly::from([(vec![g as u8], Q::one())]),
                HallKind::Bracket(a, b) => commutator(&expansions[a], &expansions[b]),
            };
            expansions.push(p);
        }
        let mut solvers = Vec::new();
        for n in 1..=max_degree {
            let first = elements.iter().position(|e| e.degree == n).unwrap_or(elements.len());
            let count = elements.iter().filter(|e| e.degree == n).count();
            let mut words: Vec<Vec<u8>> = Vec::new();
            for p in &expansions[first..first + count] {
                words.extend(p.keys().cloned());
            }
            words.sort();
            words.dedup();
            let w = words.len();
            let rows: Vec<Vec<Q>> = (0..count)
                .map(|r| {
                    let p = &expansions[first + r];
                    let mut row: Vec<Q> = words.iter().map(|wd| p.get(wd).cloned().unwrap_or_else(Q::zero)).collect();
                    row.extend((0..count).map(|c| if c == r { Q::one() } else { Q::zero() }));
                    row
                })
                .collect();
            let (red, piv) = rref(rows, w + count);
            assert!(
                piv.len() == count && piv.iter().all(|&p| p < w),
                "Hall elements of degree {n} are not independent"
            );
            solvers.push(DegreeSolver {
                first,
                count,
                pivot_words: piv.iter().map(|&p| words[p].clone()).collect(),
                transform: red.into_iter().map(|r| r[w..].to_vec()).collect(),
            });
        }
        Self { rank, max_degree, elements, expansions, solvers }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn elements(&self) -> &[HallElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn expansion(&self, idx: usize) -> &NcPoly {
        &self.expansions[idx]
    }

    /// Index range of the elements of degree `n`.
    pub fn degree_range(&self, n: usize) -> std::ops::Range<usize> {
        let s = &self.solvers[n - 1];
        s.first..s.first + s.count
    }

    /// Hall coordinates of a homogeneous Lie polynomial of degree `n`, given by
    /// its associative expansion. Returns `(element index, coefficient)` pairs.
    /// Panics if `p` is not a Lie polynomial of that degree.
    pub fn coordinates(&self, n: usize, p: &NcPoly) -> Vec<(usize, Q)> {
        let s = &self.solvers[n - 1];
        let d: Vec<Q> = s.pivot_words.iter().map(|w| p.get(w).cloned().unwrap_or_else(Q::zero)).collect();
        let mut out = Vec::new();
        for k in 0..s.count {
            let c = d.iter().zip(&s.transform).fold(Q::zero(), |acc, (dv, row)| acc + dv * &row[k]);
            if !c.is_zero() {
                out.push((s.first + k, c));
            }
        }
        let mut check = NcPoly::new();
        for (i, c) in &out {
            poly_add_scaled(&mut check, &self.expansions[*i], c);
        }
        assert_eq!(&check, p, "not a homogeneous Lie polynomial of degree {n}");
        out
    }

    /// Coordinates of `[h_a, h_b]`, or empty when the degree exceeds the basis.
    pub fn bracket(&self, a: usize, b: usize) -> Vec<(usize, Q)> {
        let n = self.elements[a].degree + self.elements[b].degree;
        if n > self.max_degree {
            return Vec::new();
        }
        self.coordinates(n, &commutator(&self.expansions[a], &self.expansions[b]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn witt_counts() {
        assert_eq!((1..=4).map(|n| witt_dimension(2, n)).collect::<Vec<_>>(), vec![2, 1, 2, 3]);
        assert_eq!(witt_dimension(2, 6), 9);
        assert_eq!(witt_dimension(3, 2), 3);
        assert_eq!(witt_dimension(1, 3), 0);
    }

    #[test]
    fn hall_sizes_match_witt() {
        for (r, s) in [(2, 6), (3, 4), (4, 3)] {
            let names: Vec<String> = (0..r).map(|i| format!("x{i}")).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let h = HallBasis::new(&refs, s);
            for n in 1..=s {
                assert_eq!(h.degree_range(n).len(), witt_dimension(r, n), "rank {r} degree {n}");
            }
        }
    }

    #[test]
    fn low_degree_labels() {
        let h = HallBasis::new(&["x", "y"], 3);
        let labels: Vec<&str> = h.elements().iter().map(|e| e.label.as_str()).collect();
        assert_eq!(labels, vec!["x", "y", "[x,y]", "[x,[x,y]]", "[y,[x,y]]"]);
    }

    #[test]
    fn antisymmetric_bracket() {
        let h = HallBasis::new(&["x", "y"], 3);
        let xy = h.bracket(0, 1);
        let yx = h.bracket(1, 0);
        assert_eq!(xy, vec![(2, Q::one())]);
        assert_eq!(yx, vec![(2, -Q::one())]);
    }
}
