//! The representation on `L2(mu)` for a fixed probability measure.
//!
//! When every branch pushforward `mu . tau_i^-1` is absolutely continuous
//! with respect to `mu`, the space `L2(mu)` carries the operators
//!
//! ```text
//! (S_i phi)(x)  = phi(sigma x) sqrt(p_i(x))   for x under branch i, else 0
//! (S_i* phi)(x) = phi(tau_i x) / sqrt(p_i(tau_i x))
//! ```
//!
//! with `p_i = d(mu . tau_i^-1)/d mu`. At cylinder resolution `p_i` is a
//! table of exact rational mass ratios; the square roots are the only
//! floating-point step. Embedding `phi` as the square density
//! `(phi, mu)` identifies this construction with the corresponding
//! subspace of the density space, and the embedding exchanges the two
//! operator families.
//!
//! Vectors are cylinder-resolution functions: constant on each positive-mass
//! cell at the stored depth, with optional value overrides at the atoms of
//! `mu`. All bases are probability measures.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::coding::{IfsSystem, Word};
use crate::error::{Error, Result};
use crate::hilbert::{
    self, CuntzReport, Relation, RelationCheck, SquareDensity,
};
use crate::measure::{is_abs_continuous, AcWitness, Measure};
use crate::rational::{abs_sq_exact, sqrt_f64, to_f64};
use crate::{Rational, C64};

// ============================================================================
// Vectors
// ============================================================================

/// An element of `L2(mu)` at cylinder resolution: values on the
/// positive-mass cells of `mu` at its stored depth, plus overrides at atoms.
#[derive(Clone, PartialEq, Debug)]
pub struct L2Vector {
    base: Measure,
    values: BTreeMap<Word, C64>,
    atom_values: BTreeMap<Word, C64>,
}

impl L2Vector {
    /// Builds a vector over a probability measure. Cylinder keys must be
    /// finite words at the base's stored depth; entries on zero-mass cells
    /// or non-atoms are normalized away.
    pub fn new(
        base: Measure,
        values: Vec<(Word, C64)>,
        atom_values: Vec<(Word, C64)>,
    ) -> Result<L2Vector> {
        if !base.total_mass().is_one() {
            return Err(Error::InvalidMeasure(format!(
                "expected a probability measure, total mass is {}",
                base.total_mass()
            )));
        }
        let depth = base.depth();
        for (w, _) in &values {
            if !w.is_finite() || w.len() != depth {
                return Err(Error::InvalidMeasure(format!(
                    "value key {w} does not have depth {depth}"
                )));
            }
        }
        let mut v = L2Vector {
            base,
            values: values.into_iter().collect(),
            atom_values: atom_values.into_iter().collect(),
        };
        v.normalize();
        Ok(v)
    }

    /// The constant function 1.
    pub fn one(base: Measure) -> Result<L2Vector> {
        let one = C64::new(1.0, 0.0);
        let values = base
            .cylinder_part()
            .masses()
            .map(|(w, _)| (w.clone(), one))
            .collect();
        L2Vector::new(base, values, vec![])
    }

    fn normalize(&mut self) {
        let base = &self.base;
        self.values
            .retain(|w, _| base.cylinder_part().mass(w).is_positive());
        self.atom_values
            .retain(|u, _| base.atomic_part().mass(u).is_positive());
    }

    pub fn base(&self) -> &Measure {
        &self.base
    }

    pub fn depth(&self) -> usize {
        self.base.depth()
    }

    /// Value on a cylinder cell at the stored depth.
    pub fn value(&self, w: &Word) -> C64 {
        self.values.get(w).copied().unwrap_or_else(C64::zero)
    }

    pub fn values(&self) -> impl Iterator<Item = (&Word, &C64)> {
        self.values.iter()
    }

    pub fn atom_values(&self) -> impl Iterator<Item = (&Word, &C64)> {
        self.atom_values.iter()
    }

    /// Value at a point: the atom override when present, otherwise the value
    /// of the cell the point lies in.
    pub fn eval_at(&self, point: &Word) -> C64 {
        if let Some(v) = self.atom_values.get(point) {
            return *v;
        }
        let cell = Word::from_symbols(
            point.expand(self.depth()).expect("points are infinite"),
            Vec::new(),
        );
        self.value(&cell)
    }

    /// Same function at a finer resolution: values extend constantly to the
    /// children the base refines into.
    pub fn refine_to(&self, depth: usize) -> Result<L2Vector> {
        if depth < self.depth() {
            return Err(Error::InvalidMeasure(format!(
                "cannot coarsen values from depth {} to {}",
                self.depth(),
                depth
            )));
        }
        let base = self.base.at_depth(depth)?;
        let mut values = BTreeMap::new();
        for (w, _) in base.cylinder_part().masses() {
            let parent = Word::from_symbols(w.expand(self.depth())?, Vec::new());
            let v = self.value(&parent);
            if v != C64::zero() {
                values.insert(w.clone(), v);
            }
        }
        Ok(L2Vector {
            base,
            values,
            atom_values: self.atom_values.clone(),
        })
    }

    pub fn scale(&self, c: C64) -> L2Vector {
        let mut out = self.clone();
        for v in out.values.values_mut() {
            *v *= c;
        }
        for v in out.atom_values.values_mut() {
            *v *= c;
        }
        out
    }
}

fn align(a: &L2Vector, b: &L2Vector) -> Result<(L2Vector, L2Vector)> {
    if a.base.alphabet() != b.base.alphabet() {
        return Err(Error::AlphabetMismatch {
            left: a.base.alphabet().size(),
            right: b.base.alphabet().size(),
        });
    }
    let depth = a.depth().max(b.depth());
    let a = a.refine_to(depth)?;
    let b = b.refine_to(depth)?;
    if a.base != b.base {
        return Err(Error::BaseMismatch);
    }
    Ok((a, b))
}

/// `integral of conj(a) b d mu`, cylinder part cell by cell plus atom
/// corrections. Both vectors must live over the same measure.
pub fn inner(a: &L2Vector, b: &L2Vector) -> Result<C64> {
    let (a, b) = align(a, b)?;
    let mut acc = C64::zero();
    for (w, m) in a.base.cylinder_part().masses() {
        let p = a.value(w).conj() * b.value(w);
        if p != C64::zero() {
            acc += p * to_f64(m);
        }
    }
    for (u, m) in a.base.atomic_part().atoms() {
        let p = a.eval_at(u).conj() * b.eval_at(u);
        if p != C64::zero() {
            acc += p * to_f64(m);
        }
    }
    Ok(acc)
}

/// Squared norm `sum |phi|^2 mu(w)` plus atom terms.
pub fn norm_sq(a: &L2Vector) -> f64 {
    let mut acc = 0.0;
    for (w, m) in a.base.cylinder_part().masses() {
        let v = a.value(w);
        if v != C64::zero() {
            acc += v.norm_sqr() * to_f64(m);
        }
    }
    for (u, m) in a.base.atomic_part().atoms() {
        let v = a.eval_at(u);
        if v != C64::zero() {
            acc += v.norm_sqr() * to_f64(m);
        }
    }
    acc
}

pub fn norm(a: &L2Vector) -> f64 {
    norm_sq(a).sqrt()
}

/// Pointwise sum over the shared base.
pub fn add(a: &L2Vector, b: &L2Vector) -> Result<L2Vector> {
    let (a, b) = align(a, b)?;
    let mut values = BTreeMap::new();
    for (w, _) in a.base.cylinder_part().masses() {
        let v = a.value(w) + b.value(w);
        if v != C64::zero() {
            values.insert(w.clone(), v);
        }
    }
    let mut atom_values = BTreeMap::new();
    for (u, _) in a.base.atomic_part().atoms() {
        // Always recorded: a zero override must shadow a nonzero cell value.
        atom_values.insert(u.clone(), a.eval_at(u) + b.eval_at(u));
    }
    Ok(L2Vector {
        base: a.base.clone(),
        values,
        atom_values,
    })
}

pub fn sub(a: &L2Vector, b: &L2Vector) -> Result<L2Vector> {
    add(a, &b.scale(C64::new(-1.0, 0.0)))
}

/// Norm distance through the pointwise difference, so equal vectors cancel
/// exactly.
pub fn distance(a: &L2Vector, b: &L2Vector) -> Result<f64> {
    Ok(norm(&sub(a, b)?))
}

// ============================================================================
// Branch densities
// ============================================================================

/// The density `p_i = d(mu . tau_i^-1)/d mu` at cylinder resolution: exact
/// mass ratios on the positive cells of `mu`, and separately at its atoms.
/// Ratios are recorded only where `mu` has mass; on the rest of the space
/// the density is `mu`-irrelevant.
#[derive(Clone, PartialEq, Debug)]
pub struct BranchDensity {
    branch: u32,
    depth: usize,
    cylinder_ratio: BTreeMap<Word, Rational>,
    atom_ratio: BTreeMap<Word, Rational>,
}

impl BranchDensity {
    pub fn branch(&self) -> u32 {
        self.branch
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Ratio on a positive-mass cell, zero where the pushforward vanishes.
    pub fn value(&self, w: &Word) -> Rational {
        self.cylinder_ratio.get(w).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn atom_value(&self, u: &Word) -> Rational {
        self.atom_ratio.get(u).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn values(&self) -> impl Iterator<Item = (&Word, &Rational)> {
        self.cylinder_ratio.iter()
    }

    pub fn atom_values(&self) -> impl Iterator<Item = (&Word, &Rational)> {
        self.atom_ratio.iter()
    }

    /// Smallest ratio over the cells under the branch, where the density is
    /// supported. The operators stay bounded exactly when this stays away
    /// from zero.
    pub fn min_on_branch(&self) -> Option<Rational> {
        self.cylinder_ratio.values().cloned().reduce(Rational::min)
    }
}

/// Computes `p_i` at the given depth, first checking absolute continuity of
/// the pushforward in both the cylinder and the atom sense. Fails with the
/// offending cell or atom otherwise.
pub fn branch_density(
    sys: &IfsSystem,
    mu: &Measure,
    branch: u32,
    depth: usize,
) -> Result<BranchDensity> {
    let s = sys.alphabet().symbol(branch)?;
    if !sys.is_present(s) {
        return Err(Error::BranchNotPresent { branch });
    }
    if mu.alphabet() != sys.alphabet() {
        return Err(Error::AlphabetMismatch {
            left: sys.alphabet().size(),
            right: mu.alphabet().size(),
        });
    }
    let push = mu.pushforward_branch(branch)?;
    let verdict = is_abs_continuous(&push, mu, depth)?;
    if !(verdict.cylinder_ok && verdict.exact_ok) {
        let (witness, atom) = match verdict.witness {
            Some(AcWitness::Atom(u)) => (u.to_string(), true),
            Some(AcWitness::Cylinder(w)) => (w.to_string(), false),
            None => (String::from("?"), false),
        };
        return Err(Error::NotAbsolutelyContinuous { witness, atom });
    }
    let mu_at = mu.at_depth(depth)?;
    let push_at = push.at_depth(depth)?;
    let mut cylinder_ratio = BTreeMap::new();
    for (w, m) in mu_at.cylinder_part().masses() {
        let num = push_at.cylinder_part().mass(w);
        if num.is_positive() {
            cylinder_ratio.insert(w.clone(), num / m);
        }
    }
    let mut atom_ratio = BTreeMap::new();
    for (u, m) in mu_at.atomic_part().atoms() {
        let num = push_at.atomic_part().mass(u);
        if num.is_positive() {
            atom_ratio.insert(u.clone(), num / m);
        }
    }
    Ok(BranchDensity {
        branch,
        depth,
        cylinder_ratio,
        atom_ratio,
    })
}

// ============================================================================
// Operators
// ============================================================================

/// `S_i phi = (phi . sigma) sqrt(p_i)`: supported under branch `i`, one
/// resolution level finer than `phi`.
pub fn apply_s_mu(sys: &IfsSystem, branch: u32, phi: &L2Vector) -> Result<L2Vector> {
    let depth = phi.depth() + 1;
    let p = branch_density(sys, &phi.base, branch, depth)?;
    let s = sys.alphabet().symbol(branch)?;
    let base = phi.base.at_depth(depth)?;
    let mut values = BTreeMap::new();
    for (w, _) in base.cylinder_part().masses() {
        if w.prefix()[0] != s {
            continue;
        }
        let parent = w.shift()?;
        let v = phi.value(&parent);
        if v == C64::zero() {
            continue;
        }
        let ratio = p.value(w);
        if ratio.is_positive() {
            values.insert(w.clone(), v * sqrt_f64(&ratio));
        }
    }
    let mut atom_values = BTreeMap::new();
    for (u, _) in base.atomic_part().atoms() {
        if u.symbol_at(0)? != s {
            atom_values.insert(u.clone(), C64::zero());
            continue;
        }
        let ratio = p.atom_value(u);
        if ratio.is_positive() {
            let v = phi.eval_at(&u.shift()?);
            atom_values.insert(u.clone(), v * sqrt_f64(&ratio));
        } else {
            atom_values.insert(u.clone(), C64::zero());
        }
    }
    L2Vector::new(base, values.into_iter().collect(), atom_values.into_iter().collect())
}

/// `S_i* phi = (phi . tau_i) / sqrt(p_i . tau_i)`: one resolution level
/// coarser, reading `phi` on the cells under branch `i`.
pub fn apply_s_mu_star(sys: &IfsSystem, branch: u32, phi: &L2Vector) -> Result<L2Vector> {
    let phi = if phi.depth() == 0 {
        phi.refine_to(1)?
    } else {
        phi.clone()
    };
    let p = branch_density(sys, &phi.base, branch, phi.depth())?;
    let s = sys.alphabet().symbol(branch)?;
    let base = phi.base.at_depth(phi.depth() - 1)?;
    let mut values = BTreeMap::new();
    for (w, _) in base.cylinder_part().masses() {
        let inside = w.prepend(s);
        let v = phi.value(&inside);
        if v == C64::zero() {
            continue;
        }
        let ratio = p.value(&inside);
        if ratio.is_positive() {
            values.insert(w.clone(), v * (1.0 / sqrt_f64(&ratio)));
        }
    }
    let mut atom_values = BTreeMap::new();
    for (u, _) in base.atomic_part().atoms() {
        let inside = u.prepend(s);
        let ratio = p.atom_value(&inside);
        if ratio.is_positive() {
            let v = phi.eval_at(&inside);
            atom_values.insert(u.clone(), v * (1.0 / sqrt_f64(&ratio)));
        } else {
            atom_values.insert(u.clone(), C64::zero());
        }
    }
    L2Vector::new(base, values.into_iter().collect(), atom_values.into_iter().collect())
}

/// Exact squared norm of `phi - sum_i S_i S_i* phi` over the present
/// branches: the mass of `phi` outside the branch ranges. Zero exactly when
/// the present branches cover the support of `mu` or `phi` vanishes off
/// their ranges.
pub fn completeness_defect(sys: &IfsSystem, phi: &L2Vector) -> Result<Rational> {
    let phi = if phi.depth() == 0 {
        phi.refine_to(1)?
    } else {
        phi.clone()
    };
    let mut acc = Rational::zero();
    for (w, m) in phi.base.cylinder_part().masses() {
        let s = w.prefix()[0];
        if !sys.is_present(s) {
            acc += abs_sq_exact(&phi.value(w))? * m;
        }
    }
    for (u, m) in phi.base.atomic_part().atoms() {
        let s = u.symbol_at(0)?;
        if !sys.is_present(s) {
            acc += abs_sq_exact(&phi.eval_at(u))? * m;
        }
    }
    Ok(acc)
}

/// Checks the relation suite on `L2(mu)` the same way the density space
/// does, through the floating-point operator compositions.
pub fn verify_l2_relations(
    sys: &IfsSystem,
    vectors: &[L2Vector],
    tol: f64,
) -> Result<CuntzReport> {
    let mut checks = Vec::new();
    let branches: Vec<_> = sys.present_branches().collect();
    for (idx, phi) in vectors.iter().enumerate() {
        for &i in &branches {
            for &j in &branches {
                let image = apply_s_mu_star(sys, i.label(), &apply_s_mu(sys, j.label(), phi)?)?;
                let residual = if i == j {
                    distance(&image, phi)?
                } else {
                    norm(&image)
                };
                checks.push(RelationCheck {
                    vector: idx,
                    relation: Relation::StarProduct {
                        left: i.label(),
                        right: j.label(),
                    },
                    residual,
                });
            }
        }
        let mut total: Option<L2Vector> = None;
        for &i in &branches {
            let term = apply_s_mu(sys, i.label(), &apply_s_mu_star(sys, i.label(), phi)?)?;
            total = Some(match total {
                None => term,
                Some(t) => add(&t, &term)?,
            });
        }
        let residual = match total {
            None => norm(phi),
            Some(t) => distance(&t, phi)?,
        };
        checks.push(RelationCheck {
            vector: idx,
            relation: Relation::Completeness,
            residual,
        });
    }
    Ok(CuntzReport {
        tol,
        full_cover: sys.is_full_cover(),
        checks,
    })
}

// ============================================================================
// The embedding into square densities
// ============================================================================

/// `W phi = (phi, mu)`: the isometry of `L2(mu)` onto its slice of the
/// density space. Values carry over cell by cell, atom overrides become
/// atom densities.
pub fn embed_w_mu(phi: &L2Vector) -> Result<SquareDensity> {
    let atom_values = phi
        .base
        .atomic_part()
        .atoms()
        .map(|(u, _)| (u.clone(), phi.eval_at(u)))
        .collect();
    SquareDensity::new(
        phi.base.clone(),
        phi.values.iter().map(|(w, v)| (w.clone(), *v)).collect(),
        atom_values,
    )
}

/// Residuals of the exchange identities `W S_i = S_i W` and
/// `W S_i* = S_i* W` on one vector, measured in the density space.
#[derive(Clone, PartialEq, Debug)]
pub struct IntertwiningCheck {
    pub branch: u32,
    pub forward_residual: f64,
    pub adjoint_residual: f64,
}

/// Verifies that the embedding exchanges both operator families on the given
/// vector, for every present branch.
pub fn check_intertwining(
    sys: &IfsSystem,
    phi: &L2Vector,
) -> Result<Vec<IntertwiningCheck>> {
    let mut out = Vec::new();
    let embedded = embed_w_mu(phi)?;
    for s in sys.present_branches() {
        let i = s.label();
        let forward_residual = hilbert::distance(
            &embed_w_mu(&apply_s_mu(sys, i, phi)?)?,
            &hilbert::apply_s(sys, i, &embedded)?,
        )?;
        let adjoint_residual = hilbert::distance(
            &embed_w_mu(&apply_s_mu_star(sys, i, phi)?)?,
            &hilbert::apply_s_star(sys, i, &embedded)?,
        )?;
        out.push(IntertwiningCheck {
            branch: i,
            forward_residual,
            adjoint_residual,
        });
    }
    Ok(out)
}

// ============================================================================
// Tests
// ============================================================================
