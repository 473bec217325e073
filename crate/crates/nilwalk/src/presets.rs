//! Named algebras.
//!
//! | name | basis order |
//! |------|-------------|
//! | `heisenberg` | `e1, e2, e3` with `[e1,e2] = e3` |
//! | `filiform3` | `e1, e2, e3, e4` with `[e1,e2] = e3`, `[e1,e3] = e4` |
//! | `unitriangular(n)` | `E_ij` for `i < j`, lexicographic in `(i, j)` |
//! | `free(r,s)` | Hall basis (see [`crate::hall`]) |
//! | `abelian(d)` | `e1..ed` |

use num_traits::One;

use crate::algebra::{LieAlgebra, Terms};
use crate::error::{Error, Result};
use crate::hall::{HallBasis, HallKind};
use crate::scalar::{qi, Q};

/// Largest dimension accepted by [`free_nilpotent`].
pub const MAX_FREE_DIM: usize = 64;

pub fn heisenberg() -> LieAlgebra {
    LieAlgebra::new(names(3), vec![(0, 1, vec![(2, qi(1))])]).expect("heisenberg")
}

pub fn filiform3() -> LieAlgebra {
    LieAlgebra::new(names(4), vec![(0, 1, vec![(2, qi(1))]), (0, 2, vec![(3, qi(1))])]).expect("filiform3")
}

/// Strictly upper triangular `n × n` matrices, `[E_ij, E_kl] = δ_jk E_il − δ_li E_kj`.
pub fn unitriangular(n: usize) -> Result<LieAlgebra> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("unitriangular({n}) needs n >= 2")));
    }
    let pairs: Vec<(usize, usize)> = (1..=n).flat_map(|i| ((i + 1)..=n).map(move |j| (i, j))).collect();
    if pairs.len() > MAX_FREE_DIM {
        return Err(Error::SizeLimit(format!("unitriangular({n}) has dimension {}", pairs.len())));
    }
    let index = |a: usize, b: usize| pairs.iter().position(|&p| p == (a, b));
    let mut brackets = Vec::new();
    for (x, &(i, j)) in pairs.iter().enumerate() {
        for (y, &(k, l)) in pairs.iter().enumerate().skip(x + 1) {
            let mut t: Terms = Vec::new();
            if j == k {
                t.push((index(i, l).unwrap(), Q::one()));
            }
            if l == i {
                t.push((index(k, j).unwrap(), -Q::one()));
            }
            if !t.is_empty() {
                brackets.push((x, y, t));
            }
        }
    }
    let basis = pairs.iter().map(|(i, j)| format!("E{i}{j}")).collect();
    LieAlgebra::new(basis, brackets)
}

/// Free nilpotent Lie algebra of the given rank and step, in a Hall basis.
pub fn free_nilpotent(rank: usize, step: usize) -> Result<LieAlgebra> {
    if rank == 0 || step == 0 {
        return Err(Error::InvalidParameter("free(r,s) needs r, s >= 1".into()));
    }
    let dim: usize = (1..=step).map(|n| crate::hall::witt_dimension(rank, n)).sum();
    if dim > MAX_FREE_DIM {
        return Err(Error::SizeLimit(format!("free({rank},{step}) has dimension {dim} > {MAX_FREE_DIM}")));
    }
    let gen_names: Vec<String> = (1..=rank).map(|i| format!("x{i}")).collect();
    let refs: Vec<&str> = gen_names.iter().map(String::as_str).collect();
    let hall = HallBasis::new(&refs, step);
    let mut brackets = Vec::new();
    for a in 0..hall.len() {
        for b in (a + 1)..hall.len() {
            let t = hall.bracket(a, b);
            if !t.is_empty() {
                brackets.push((a, b, t));
            }
        }
    }
    debug_assert!(hall.elements().iter().take(rank).all(|e| matches!(e.kind, HallKind::Generator(_))));
    let basis = hall.elements().iter().map(|e| e.label.clone()).collect();
    LieAlgebra::new(basis, brackets)
}

/// Looks up `heisenberg`, `filiform3`, `unitriangular(n)`, `free(r,s)` or `abelian(d)`.
pub fn preset(name: &str) -> Result<LieAlgebra> {
    let name = name.trim();
    let unknown = || Error::UnknownPreset(name.to_string());
    let args = |prefix: &str| -> Option<Vec<usize>> {
        let inner = name.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?;
        inner.split(',').map(|s| s.trim().parse().ok()).collect()
    };
    match name {
        "heisenberg" => return Ok(heisenberg()),
        "filiform3" => return Ok(filiform3()),
        _ => {}
    }
    if let Some(a) = args("unitriangular") {
        return match a[..] {
            [n] => unitriangular(n),
            _ => Err(unknown()),
        };
    }
    if let Some(a) = args("free") {
        return match a[..] {
            [r, s] => free_nilpotent(r, s),
            _ => Err(unknown()),
        };
    }
    if let Some(a) = args("abelian") {
        return match a[..] {
            [d] if d >= 1 => Ok(LieAlgebra::abelian(d)),
            _ => Err(unknown()),
        };
    }
    Err(unknown())
}

fn names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("e{i}")).collect()
}
