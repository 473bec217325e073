//! Campbell–Hausdorff coefficients over the Hall basis of the free Lie algebra
//! on two letters `x`, `y`.
//!
//! The series `log(exp(x) exp(y))` is expanded in the truncated free
//! associative algebra and each homogeneous component is projected exactly onto
//! the Hall elements of its degree.

use std::sync::OnceLock;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::hall::{poly_add_scaled, poly_mul, HallBasis, HallKind, NcPoly};
use crate::scalar::{format_q, Q};

/// Largest nilpotency step for which a product table is provided.
pub const MAX_STEP: usize = 6;

#[derive(Debug)]
pub struct BchTable {
    step: usize,
    hall: HallBasis,
    coeffs: Vec<Q>,
}

/// A formal term of the series: the Hall element and its coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct BchTerm {
    pub degree: usize,
    pub pattern: String,
    pub coefficient: Q,
}

static TABLE: OnceLock<BchTable> = OnceLock::new();

/// The shared table, valid for every algebra of step at most [`MAX_STEP`].
pub fn bch_table() -> &'static BchTable {
    TABLE.get_or_init(|| BchTable::compute(MAX_STEP))
}

/// Checks that an algebra of the given step can use the table.
pub fn check_step(step: usize) -> Result<()> {
    if step > MAX_STEP {
        Err(Error::StepTooLarge { step, max: MAX_STEP })
    } else {
        Ok(())
    }
}

impl BchTable {
    pub fn compute(step: usize) -> Self {
        let hall = HallBasis::new(&["x", "y"], step);
        let mut factorial = Q::one();
        let mut ex = NcPoly::new();
        let mut ey = NcPoly::new();
        for k in 0..=step {
            if k > 0 {
                factorial *= Q::from_integer(k.into());
            }
            let c = factorial.recip();
            ex.insert(vec![0; k], c.clone());
            ey.insert(vec![1; k], c);
        }
        let mut z = poly_mul(&ex, &ey, step);
        z.remove(&Vec::new());
        let mut log = NcPoly::new();
        let mut power = z.clone();
        for k in 1..=step {
            let sign = if k % 2 == 1 { Q::one() } else { -Q::one() };
            poly_add_scaled(&mut log, &power, &(sign / Q::from_integer(k.into())));
            power = poly_mul(&power, &z, step);
        }
        let mut coeffs = vec![Q::zero(); hall.len()];
        for n in 1..=step {
            let part: NcPoly = log.iter().filter(|(w, _)| w.len() == n).map(|(w, c)| (w.clone(), c.clone())).collect();
            for (i, c) in hall.coordinates(n, &part) {
                coeffs[i] = c;
            }
        }
        Self { step, hall, coeffs }
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn hall(&self) -> &HallBasis {
        &self.hall
    }

    pub fn coefficient(&self, idx: usize) -> &Q {
        &self.coeffs[idx]
    }

    /// Nonzero terms up to degree `max_degree`.
    pub fn terms(&self, max_degree: usize) -> Vec<BchTerm> {
        self.hall
            .elements()
            .iter()
            .zip(&self.coeffs)
            .filter(|(e, c)| e.degree <= max_degree && !c.is_zero())
            .map(|(e, c)| BchTerm { degree: e.degree, pattern: e.label.clone(), coefficient: c.clone() })
            .collect()
    }

    /// Evaluation plan for algebras of step `step`: the Hall elements that must
    /// be computed (in dependency order) and the output coefficients.
    pub(crate) fn plan(&self, step: usize) -> ProductPlan {
        let n = self.hall.len();
        let mut needed = vec![false; n];
        for i in (0..n).rev() {
            let e = &self.hall.elements()[i];
            if e.degree > step {
                continue;
            }
            if !self.coeffs[i].is_zero() {
                needed[i] = true;
            }
            if needed[i] {
                if let HallKind::Bracket(a, b) = e.kind {
                    needed[a] = true;
                    needed[b] = true;
                }
            }
        }
        needed[0] = true;
        needed[1] = true;
        let mut slot = vec![usize::MAX; n];
        let mut nodes = Vec::new();
        for i in 0..n {
            if !needed[i] {
                continue;
            }
            slot[i] = nodes.len();
            nodes.push(match self.hall.elements()[i].kind {
                HallKind::Generator(0) => PlanNode::X,
                HallKind::Generator(_) => PlanNode::Y,
                HallKind::Bracket(a, b) => PlanNode::Bracket(slot[a], slot[b]),
            });
        }
        let output = (0..n)
            .filter(|&i| needed[i] && !self.coeffs[i].is_zero())
            .map(|i| (slot[i], self.coeffs[i].clone()))
            .collect();
        ProductPlan { nodes, output }
    }

    pub fn describe(&self, max_degree: usize) -> Vec<(usize, String, String)> {
        self.terms(max_degree)
            .into_iter()
            .map(|t| (t.degree, t.pattern, format_q(&t.coefficient)))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub(crate) enum PlanNode {
    X,
    Y,
    Bracket(usize, usize),
}

#[derive(Clone, Debug)]
pub(crate) struct ProductPlan {
    pub nodes: Vec<PlanNode>,
    pub output: Vec<(usize, Q)>,
}
