//! The Hilbert space of square densities over the coding space.
//!
//! A vector is a pair `(phi, mu)`: a measure and a density value on each
//! cylinder cell and atom, representing `phi sqrt(d mu)`. Two pairs are the
//! same vector when `phi sqrt(d mu / d lambda) = psi sqrt(d nu / d lambda)`
//! against any measure `lambda` dominating both; all computations here take
//! `lambda = mu + nu`, which always dominates. The inner product is
//!
//! ```text
//! <(phi, mu) | (psi, nu)> = sum_cells conj(phi) psi sqrt(mu(w) nu(w))
//!                         + sum_atoms conj(phi) psi sqrt(mu(u) nu(u))
//! ```
//!
//! the cylinder-resolution Hellinger pairing. Masses stay rational; square
//! roots are the only floating-point step, so mutually singular vectors have
//! inner product exactly zero.
//!
//! The generator `S_i` sends `(phi, mu)` to `(phi . sigma, mu . tau_i^-1)`,
//! which at finite depth just moves the value on `w` to `i.w`. Its adjoint
//! restricts to the cells under branch `i` and strips the leading symbol.
//! Together they satisfy the Cuntz relations `S_i* S_j = delta_ij I`, with
//! `sum_i S_i S_i* = I` exactly when the branch images cover the space.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, Zero};

use crate::coding::{IfsSystem, Symbol, Word};
use crate::error::{Error, Result};
use crate::measure::{convex_combine, Measure};
use crate::rational::{sqrt_f64, to_f64};
use crate::{Rational, C64};

// ============================================================================
// Square densities
// ============================================================================

/// A vector `phi sqrt(d mu)`: base measure plus complex density values on
/// its positive-mass cylinder cells and atoms.
///
/// Values are normalized at construction: entries on zero-mass cells are
/// dropped (they do not affect the vector), and missing entries read as
/// zero.
#[derive(Clone, PartialEq, Debug)]
pub struct SquareDensity {
    base: Measure,
    values: BTreeMap<Word, C64>,
    atom_values: BTreeMap<Word, C64>,
}

impl SquareDensity {
    /// Builds `phi sqrt(d mu)` from explicit value tables. Cylinder keys
    /// must be finite words at the base's stored depth; values elsewhere are
    /// normalized away.
    pub fn new(
        base: Measure,
        values: Vec<(Word, C64)>,
        atom_values: Vec<(Word, C64)>,
    ) -> Result<SquareDensity> {
        let depth = base.depth();
        for (w, _) in &values {
            if !w.is_finite() || w.len() != depth {
                return Err(Error::InvalidMeasure(format!(
                    "density key {w} does not have depth {depth}"
                )));
            }
        }
        let mut d = SquareDensity {
            base,
            values: values.into_iter().collect(),
            atom_values: atom_values.into_iter().collect(),
        };
        d.normalize();
        Ok(d)
    }

    /// The vector `sqrt(d mu)`: density one everywhere `mu` lives.
    pub fn one(base: Measure) -> SquareDensity {
        let one = C64::new(1.0, 0.0);
        let values = base
            .cylinder_part()
            .masses()
            .map(|(w, _)| (w.clone(), one))
            .collect();
        let atom_values = base
            .atomic_part()
            .atoms()
            .map(|(u, _)| (u.clone(), one))
            .collect();
        SquareDensity {
            base,
            values,
            atom_values,
        }
    }

    /// The zero vector over an alphabet.
    pub fn zero(alphabet: crate::coding::Alphabet) -> SquareDensity {
        SquareDensity {
            base: Measure::zero(alphabet),
            values: BTreeMap::new(),
            atom_values: BTreeMap::new(),
        }
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

    /// Density value on a cylinder cell at the stored depth.
    pub fn value(&self, w: &Word) -> C64 {
        self.values.get(w).copied().unwrap_or_else(C64::zero)
    }

    pub fn atom_value(&self, u: &Word) -> C64 {
        self.atom_values.get(u).copied().unwrap_or_else(C64::zero)
    }

    pub fn values(&self) -> impl Iterator<Item = (&Word, &C64)> {
        self.values.iter()
    }

    pub fn atom_values(&self) -> impl Iterator<Item = (&Word, &C64)> {
        self.atom_values.iter()
    }

    /// Same vector at a finer cylinder resolution: the base refines through
    /// its model and values extend constantly to the children. Coarsening is
    /// not defined.
    pub fn refine_to(&self, depth: usize) -> Result<SquareDensity> {
        if depth < self.depth() {
            return Err(Error::InvalidMeasure(format!(
                "cannot coarsen density values from depth {} to {}",
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
        Ok(SquareDensity {
            base,
            values,
            atom_values: self.atom_values.clone(),
        })
    }

    /// Scalar multiple `c . (phi, mu) = (c phi, mu)`.
    pub fn scale(&self, c: C64) -> SquareDensity {
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

impl fmt::Display for SquareDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "square density at depth {} ({} cells, {} atoms)",
            self.depth(),
            self.values.len(),
            self.atom_values.len()
        )
    }
}

fn common_depth(a: &SquareDensity, b: &SquareDensity) -> usize {
    a.depth().max(b.depth())
}

fn check_alphabets(a: &SquareDensity, b: &SquareDensity) -> Result<()> {
    if a.base.alphabet() != b.base.alphabet() {
        return Err(Error::AlphabetMismatch {
            left: a.base.alphabet().size(),
            right: b.base.alphabet().size(),
        });
    }
    Ok(())
}

// ============================================================================
// Inner product and linear structure
// ============================================================================

/// Hellinger inner product at the common (maximal) stored depth. Products
/// over cells or atoms where either mass vanishes are exactly zero, so
/// mutually singular vectors are exactly orthogonal.
///
/// The pairing is taken at the resolution the operands carry: refining both
/// operands preserves it only when they refine through the same model
/// (children split proportionally). With different models the affinity
/// shrinks as the resolution grows, as it must.
pub fn inner(a: &SquareDensity, b: &SquareDensity) -> Result<C64> {
    check_alphabets(a, b)?;
    let depth = common_depth(a, b);
    let a = a.refine_to(depth)?;
    let b = b.refine_to(depth)?;
    let mut acc = C64::zero();
    for (w, av) in &a.values {
        let bv = b.value(w);
        if bv == C64::zero() {
            continue;
        }
        let mass_product = a.base.cylinder_part().mass(w) * b.base.cylinder_part().mass(w);
        acc += av.conj() * bv * sqrt_f64(&mass_product);
    }
    for (u, av) in &a.atom_values {
        let bv = b.atom_value(u);
        if bv == C64::zero() {
            continue;
        }
        let mass_product = a.base.atomic_part().mass(u) * b.base.atomic_part().mass(u);
        acc += av.conj() * bv * sqrt_f64(&mass_product);
    }
    Ok(acc)
}

/// Squared norm `sum |phi|^2 mu(w)`, summed directly over the base masses.
pub fn norm_sq(a: &SquareDensity) -> f64 {
    let mut acc = 0.0;
    for (w, v) in &a.values {
        acc += v.norm_sqr() * to_f64(&a.base.cylinder_part().mass(w));
    }
    for (u, v) in &a.atom_values {
        acc += v.norm_sqr() * to_f64(&a.base.atomic_part().mass(u));
    }
    acc
}

pub fn norm(a: &SquareDensity) -> f64 {
    norm_sq(a).sqrt()
}

/// Sum of vectors, represented over the dominating base `lambda = mu + nu`:
/// on each cell the summed value is
/// `phi sqrt(mu(w)/lambda(w)) + psi sqrt(nu(w)/lambda(w))`.
pub fn add(a: &SquareDensity, b: &SquareDensity) -> Result<SquareDensity> {
    check_alphabets(a, b)?;
    let depth = common_depth(a, b);
    let a = a.refine_to(depth)?;
    let b = b.refine_to(depth)?;
    let one = Rational::from_integer(1.into());
    let lambda = convex_combine(&[one.clone(), one], &[&a.base, &b.base])?;

    let mut values = BTreeMap::new();
    for (w, lm) in lambda.cylinder_part().masses() {
        let mut v = C64::zero();
        let am = a.base.cylinder_part().mass(w);
        if am.is_positive() {
            v += a.value(w) * sqrt_f64(&(am / lm));
        }
        let bm = b.base.cylinder_part().mass(w);
        if bm.is_positive() {
            v += b.value(w) * sqrt_f64(&(bm / lm));
        }
        if v != C64::zero() {
            values.insert(w.clone(), v);
        }
    }
    let mut atom_values = BTreeMap::new();
    for (u, lm) in lambda.atomic_part().atoms() {
        let mut v = C64::zero();
        let am = a.base.atomic_part().mass(u);
        if am.is_positive() {
            v += a.atom_value(u) * sqrt_f64(&(am / lm));
        }
        let bm = b.base.atomic_part().mass(u);
        if bm.is_positive() {
            v += b.atom_value(u) * sqrt_f64(&(bm / lm));
        }
        if v != C64::zero() {
            atom_values.insert(u.clone(), v);
        }
    }
    Ok(SquareDensity {
        base: lambda,
        values,
        atom_values,
    })
}

pub fn sub(a: &SquareDensity, b: &SquareDensity) -> Result<SquareDensity> {
    add(a, &b.scale(C64::new(-1.0, 0.0)))
}

/// Norm distance, computed through the difference vector so that equal
/// representations cancel exactly instead of leaving rounding residue.
pub fn distance(a: &SquareDensity, b: &SquareDensity) -> Result<f64> {
    Ok(norm(&sub(a, b)?))
}

/// Largest pointwise defect between the two pairs as densities against
/// `lambda = mu + nu`: zero exactly when they represent the same vector.
pub fn equivalence_defect(a: &SquareDensity, b: &SquareDensity) -> Result<f64> {
    check_alphabets(a, b)?;
    let depth = common_depth(a, b);
    let a = a.refine_to(depth)?;
    let b = b.refine_to(depth)?;
    let one = Rational::from_integer(1.into());
    let lambda = convex_combine(&[one.clone(), one], &[&a.base, &b.base])?;
    let mut worst: f64 = 0.0;
    for (w, lm) in lambda.cylinder_part().masses() {
        let av = a.value(w) * sqrt_f64(&(a.base.cylinder_part().mass(w) / lm));
        let bv = b.value(w) * sqrt_f64(&(b.base.cylinder_part().mass(w) / lm));
        worst = worst.max((av - bv).norm());
    }
    for (u, lm) in lambda.atomic_part().atoms() {
        let av = a.atom_value(u) * sqrt_f64(&(a.base.atomic_part().mass(u) / lm));
        let bv = b.atom_value(u) * sqrt_f64(&(b.base.atomic_part().mass(u) / lm));
        worst = worst.max((av - bv).norm());
    }
    Ok(worst)
}

/// Whether the two pairs represent the same vector, up to `tol` pointwise.
pub fn equivalent(a: &SquareDensity, b: &SquareDensity, tol: f64) -> Result<bool> {
    Ok(equivalence_defect(a, b)? <= tol)
}

// ============================================================================
// Generators
// ============================================================================

/// `S_i (phi, mu) = (phi . sigma, mu . tau_i^-1)`: the value on `w` moves to
/// `i.w`, atoms move to `i.u`.
pub fn apply_s(sys: &IfsSystem, branch: u32, a: &SquareDensity) -> Result<SquareDensity> {
    if sys.alphabet() != a.base.alphabet() {
        return Err(Error::AlphabetMismatch {
            left: sys.alphabet().size(),
            right: a.base.alphabet().size(),
        });
    }
    let s = sys.alphabet().symbol(branch)?;
    if !sys.is_present(s) {
        return Err(Error::BranchNotPresent { branch });
    }
    let base = a.base.pushforward_branch(branch)?;
    let values = a
        .values
        .iter()
        .map(|(w, v)| (w.prepend(s), *v))
        .collect();
    let atom_values = a
        .atom_values
        .iter()
        .map(|(u, v)| (u.prepend(s), *v))
        .collect();
    Ok(SquareDensity {
        base,
        values,
        atom_values,
    })
}

/// `S_i*`: restrict to the range of `S_i` (the cells and atoms under branch
/// `i`) and strip the leading symbol. On the orthogonal complement of that
/// range the adjoint vanishes, which the restriction implements.
pub fn apply_s_star(sys: &IfsSystem, branch: u32, a: &SquareDensity) -> Result<SquareDensity> {
    if sys.alphabet() != a.base.alphabet() {
        return Err(Error::AlphabetMismatch {
            left: sys.alphabet().size(),
            right: a.base.alphabet().size(),
        });
    }
    let s = sys.alphabet().symbol(branch)?;
    if !sys.is_present(s) {
        return Err(Error::BranchNotPresent { branch });
    }
    let a = if a.depth() == 0 {
        a.refine_to(1)?
    } else {
        a.clone()
    };
    let mut masses = Vec::new();
    let mut values = BTreeMap::new();
    for (w, m) in a.base.cylinder_part().masses() {
        if w.prefix()[0] != s {
            continue;
        }
        let stripped = w.shift().expect("depth >= 1 keys are nonempty");
        masses.push((stripped.clone(), m.clone()));
        let v = a.value(w);
        if v != C64::zero() {
            values.insert(stripped, v);
        }
    }
    let mut atoms = Vec::new();
    let mut atom_values = BTreeMap::new();
    for (u, m) in a.base.atomic_part().atoms() {
        if u.symbol_at(0).expect("atoms are infinite") != s {
            continue;
        }
        let stripped = u.shift().expect("atoms are infinite");
        atoms.push((stripped.clone(), m.clone()));
        let v = a.atom_value(u);
        if v != C64::zero() {
            atom_values.insert(stripped, v);
        }
    }
    let base = Measure::from_parts(
        a.base.alphabet(),
        a.depth() - 1,
        a.base.cylinder_part().model().clone(),
        masses,
        atoms,
    )?;
    Ok(SquareDensity {
        base,
        values,
        atom_values,
    })
}

// ============================================================================
// Relation verification
// ============================================================================

/// One verified operator identity.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Relation {
    /// `S_i* S_j = delta_ij I`.
    StarProduct { left: u32, right: u32 },
    /// `sum_i S_i S_i* = I` over the present branches.
    Completeness,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relation::StarProduct { left, right } => write!(f, "S{left}* S{right}"),
            Relation::Completeness => write!(f, "sum S_i S_i*"),
        }
    }
}

/// Residual of one relation on one test vector.
#[derive(Clone, PartialEq, Debug)]
pub struct RelationCheck {
    pub vector: usize,
    pub relation: Relation,
    pub residual: f64,
}

/// Residuals of the full relation suite over a batch of test vectors.
#[derive(Clone, PartialEq, Debug)]
pub struct CuntzReport {
    pub tol: f64,
    /// Whether the system's branches cover the space. Without full cover the
    /// completeness rows report the defect norm rather than a failure of the
    /// representation.
    pub full_cover: bool,
    pub checks: Vec<RelationCheck>,
}

impl CuntzReport {
    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&RelationCheck> {
        self.checks
            .iter()
            .max_by(|a, b| a.residual.total_cmp(&b.residual))
    }

    pub fn all_ok(&self) -> bool {
        self.max_residual() <= self.tol
    }
}

/// The defect vector `a - sum_i S_i S_i* a` over the present branches: zero
/// for a full cover, the part of `a` outside the branch ranges otherwise.
pub fn completeness_defect_vector(sys: &IfsSystem, a: &SquareDensity) -> Result<SquareDensity> {
    let mut total: Option<SquareDensity> = None;
    for s in sys.present_branches() {
        let term = apply_s(sys, s.label(), &apply_s_star(sys, s.label(), a)?)?;
        total = Some(match total {
            None => term,
            Some(t) => add(&t, &term)?,
        });
    }
    match total {
        None => Ok(a.clone()),
        Some(t) => sub(a, &t),
    }
}

/// Checks `S_i* S_j = delta_ij I` over all present branch pairs and the
/// completeness identity on each given vector, reporting every residual.
pub fn verify_cuntz_on(
    sys: &IfsSystem,
    vectors: &[SquareDensity],
    tol: f64,
) -> Result<CuntzReport> {
    let mut checks = Vec::new();
    let branches: Vec<Symbol> = sys.present_branches().collect();
    for (idx, a) in vectors.iter().enumerate() {
        for &i in &branches {
            for &j in &branches {
                let image = apply_s_star(sys, i.label(), &apply_s(sys, j.label(), a)?)?;
                let residual = if i == j {
                    distance(&image, a)?
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
        let defect = completeness_defect_vector(sys, a)?;
        checks.push(RelationCheck {
            vector: idx,
            relation: Relation::Completeness,
            residual: norm(&defect),
        });
    }
    Ok(CuntzReport {
        tol,
        full_cover: sys.is_full_cover(),
        checks,
    })
}

// ============================================================================
// Tests
// ============================================================================
