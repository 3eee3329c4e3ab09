//! Permutative representations on l2(Z) and the structures they induce on
//! the coding space.
//!
//! A representation assigns each branch an injective affine index map
//! `n -> a n + b`, acting on the standard basis by `S_i e_n = e_{a_i n + b_i}`.
//! Pairwise disjoint images make the `S_i` isometries with orthogonal
//! ranges; the images partition the integers exactly when the densities
//! `1/|a_i|` sum to one, which is the completeness half of the relations.
//!
//! Each vector `f` induces a measure on the coding space through the
//! cylinder projections `P(w) = S_w S_w*`:
//!
//! ```text
//! mu_f(w) = | P(w) f |^2 = | S_w* f |^2
//! ```
//!
//! For finitely supported `f` these masses are computed exactly: an index
//! lies in the range of at most one branch, so every basis coefficient
//! peels through a unique word and contributes its squared modulus to that
//! cell. The family `{mu_f}` satisfies the covariance identities
//!
//! ```text
//! sum_i (mu_{S_i* f}) . tau_i^-1 = mu_f        mu_f . tau_i^-1 = mu_{S_i f}
//! ```
//!
//! and `f -> (1, mu_f)` carries the representation into the square-density
//! space, exchanging the generators.

use std::collections::BTreeMap;

use num_integer::Integer;
use num_traits::{One, Zero};

use crate::coding::{Alphabet, IfsSystem, Word};
use crate::error::{Error, Result};
use crate::hilbert::{self, CuntzReport, Relation, RelationCheck, SquareDensity};
use crate::measure::{convex_combine, Measure, RefinementModel};
use crate::rational::{abs_sq_exact, conj_mul_exact, rat};
use crate::{Rational, C64};

// ============================================================================
// Index maps and representations
// ============================================================================

/// An injective affine map on basis indices, `n -> scale n + offset`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct IndexMap {
    scale: i64,
    offset: i64,
}

impl IndexMap {
    pub fn new(scale: i64, offset: i64) -> Result<IndexMap> {
        if scale == 0 {
            return Err(Error::InvalidRep("index map scale must be nonzero".into()));
        }
        Ok(IndexMap { scale, offset })
    }

    pub fn scale(&self) -> i64 {
        self.scale
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn apply(&self, n: i64) -> Result<i64> {
        n.checked_mul(self.scale)
            .and_then(|m| m.checked_add(self.offset))
            .ok_or(Error::IndexOverflow)
    }

    /// The unique preimage when `n` lies in the image, `None` otherwise.
    pub fn invert(&self, n: i64) -> Option<i64> {
        let shifted = (n as i128) - (self.offset as i128);
        if shifted % (self.scale as i128) != 0 {
            return None;
        }
        i64::try_from(shifted / (self.scale as i128)).ok()
    }
}

/// A permutative representation: one index map per symbol, with pairwise
/// disjoint images.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PermutativeRep {
    alphabet: Alphabet,
    maps: Vec<IndexMap>,
}

impl PermutativeRep {
    pub fn new(alphabet: Alphabet, maps: Vec<IndexMap>) -> Result<PermutativeRep> {
        if maps.len() != alphabet.size() as usize {
            return Err(Error::InvalidRep(format!(
                "expected {} index maps, got {}",
                alphabet.size(),
                maps.len()
            )));
        }
        // Two images {a n + b} and {a' n + b'} intersect exactly when
        // b = b' mod gcd(a, a').
        for (i, mi) in maps.iter().enumerate() {
            for (j, mj) in maps.iter().enumerate().skip(i + 1) {
                let g = mi.scale.unsigned_abs().gcd(&mj.scale.unsigned_abs()) as i128;
                if ((mi.offset as i128) - (mj.offset as i128)).rem_euclid(g) == 0 {
                    return Err(Error::InvalidRep(format!(
                        "branches {} and {} have overlapping index ranges",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(PermutativeRep { alphabet, maps })
    }

    /// The binary odometer pair `n -> 2n`, `n -> 2n + 1`: branch 1 carries
    /// the even indices, branch 2 the odd ones.
    pub fn torus() -> PermutativeRep {
        let alphabet = Alphabet::new(2).expect("binary alphabet");
        PermutativeRep::new(
            alphabet,
            vec![
                IndexMap::new(2, 0).expect("valid map"),
                IndexMap::new(2, 1).expect("valid map"),
            ],
        )
        .expect("disjoint ranges")
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn map(&self, branch: u32) -> Result<&IndexMap> {
        let s = self.alphabet.symbol(branch)?;
        Ok(&self.maps[s.index()])
    }

    pub fn maps(&self) -> &[IndexMap] {
        &self.maps
    }

    /// Whether the images partition the integers: disjointness is enforced
    /// at construction, so this is exactly the density count
    /// `sum 1/|scale| = 1`.
    pub fn is_full_cover(&self) -> bool {
        let total: Rational = self
            .maps
            .iter()
            .map(|m| rat(1, m.scale.abs()))
            .sum();
        total.is_one()
    }

    /// The branch whose image contains `n`, with the preimage. At most one
    /// exists.
    pub fn peel(&self, n: i64) -> Option<(u32, i64)> {
        for (k, m) in self.maps.iter().enumerate() {
            if let Some(prev) = m.invert(n) {
                return Some((k as u32 + 1, prev));
            }
        }
        None
    }
}

/// The length-`depth` cylinder word an index peels through, or `None` if
/// the index leaves the branch images along the way.
pub fn index_cylinder(rep: &PermutativeRep, n: i64, depth: usize) -> Option<Word> {
    let mut labels = Vec::with_capacity(depth);
    let mut current = n;
    for _ in 0..depth {
        let (branch, prev) = rep.peel(current)?;
        labels.push(branch);
        current = prev;
    }
    Some(Word::finite(rep.alphabet, &labels).expect("labels came from the alphabet"))
}

// ============================================================================
// Vectors
// ============================================================================

/// A finitely supported vector in l2(Z).
#[derive(Clone, PartialEq, Debug, Default)]
pub struct RepVector {
    coeffs: BTreeMap<i64, C64>,
}

impl RepVector {
    pub fn zero() -> RepVector {
        RepVector::default()
    }

    pub fn basis(n: i64) -> RepVector {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(n, C64::new(1.0, 0.0));
        RepVector { coeffs }
    }

    /// Sums duplicate indices and drops exact zeros.
    pub fn from_coeffs(entries: Vec<(i64, C64)>) -> RepVector {
        let mut coeffs: BTreeMap<i64, C64> = BTreeMap::new();
        for (n, c) in entries {
            *coeffs.entry(n).or_insert_with(C64::zero) += c;
        }
        coeffs.retain(|_, c| *c != C64::zero());
        RepVector { coeffs }
    }

    pub fn coeff(&self, n: i64) -> C64 {
        self.coeffs.get(&n).copied().unwrap_or_else(C64::zero)
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&i64, &C64)> {
        self.coeffs.iter()
    }

    pub fn support_len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn add(&self, other: &RepVector) -> RepVector {
        let mut coeffs = self.coeffs.clone();
        for (n, c) in &other.coeffs {
            *coeffs.entry(*n).or_insert_with(C64::zero) += c;
        }
        coeffs.retain(|_, c| *c != C64::zero());
        RepVector { coeffs }
    }

    pub fn scale(&self, c: C64) -> RepVector {
        let mut out = self.clone();
        for v in out.coeffs.values_mut() {
            *v *= c;
        }
        out.coeffs.retain(|_, v| *v != C64::zero());
        out
    }

    pub fn sub(&self, other: &RepVector) -> RepVector {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn inner(&self, other: &RepVector) -> C64 {
        let mut acc = C64::zero();
        for (n, a) in &self.coeffs {
            let b = other.coeff(*n);
            if b != C64::zero() {
                acc += a.conj() * b;
            }
        }
        acc
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `sum |c_n|^2` as an exact rational.
    pub fn norm_sq_exact(&self) -> Result<Rational> {
        let mut acc = Rational::zero();
        for c in self.coeffs.values() {
            acc += abs_sq_exact(c)?;
        }
        Ok(acc)
    }
}

/// `S_i f`: relabels every basis index through the branch map.
pub fn apply_gen(rep: &PermutativeRep, branch: u32, f: &RepVector) -> Result<RepVector> {
    let m = rep.map(branch)?;
    let mut coeffs = BTreeMap::new();
    for (n, c) in &f.coeffs {
        coeffs.insert(m.apply(*n)?, *c);
    }
    Ok(RepVector { coeffs })
}

/// `S_i* f`: keeps the coefficients sitting in the branch image and pulls
/// their indices back; the rest of the vector is annihilated.
pub fn apply_gen_star(rep: &PermutativeRep, branch: u32, f: &RepVector) -> Result<RepVector> {
    let m = rep.map(branch)?;
    let mut coeffs = BTreeMap::new();
    for (n, c) in &f.coeffs {
        if let Some(prev) = m.invert(*n) {
            coeffs.insert(prev, *c);
        }
    }
    Ok(RepVector { coeffs })
}

/// `S_w f` over a finite word.
pub fn apply_word(rep: &PermutativeRep, w: &Word, f: &RepVector) -> Result<RepVector> {
    if !w.is_finite() {
        return Err(Error::NotFinite);
    }
    let mut out = f.clone();
    for s in w.prefix().iter().rev() {
        out = apply_gen(rep, s.label(), &out)?;
    }
    Ok(out)
}

/// The cylinder projection `P(w) f = S_w S_w* f`.
pub fn cylinder_projection(rep: &PermutativeRep, w: &Word, f: &RepVector) -> Result<RepVector> {
    if !w.is_finite() {
        return Err(Error::NotFinite);
    }
    let mut out = f.clone();
    for s in w.prefix() {
        out = apply_gen_star(rep, s.label(), &out)?;
    }
    apply_word(rep, w, &out)
}

// ============================================================================
// Induced measures
// ============================================================================

/// The measure `mu_f(w) = |P(w) f|^2` at the given cylinder depth, with
/// exact rational masses. The table is frozen: finer masses come from
/// recomputing at a larger depth, not from a refinement model.
pub fn vector_measure(rep: &PermutativeRep, f: &RepVector, depth: usize) -> Result<Measure> {
    let mut masses: BTreeMap<Word, Rational> = BTreeMap::new();
    for (n, c) in &f.coeffs {
        if let Some(w) = index_cylinder(rep, *n, depth) {
            *masses.entry(w).or_insert_with(Rational::zero) += abs_sq_exact(c)?;
        }
    }
    Measure::from_parts(
        rep.alphabet,
        depth,
        RefinementModel::Frozen,
        masses.into_iter().collect(),
        vec![],
    )
}

/// The complex measure `mu_{f,g}(w) = <P(w) f, g>` cell by cell at the given
/// depth, as exact rational (re, im) pairs. Conjugate-linear in `f`.
pub fn sesquilinear_measure(
    rep: &PermutativeRep,
    f: &RepVector,
    g: &RepVector,
    depth: usize,
) -> Result<BTreeMap<Word, (Rational, Rational)>> {
    let mut out: BTreeMap<Word, (Rational, Rational)> = BTreeMap::new();
    for (n, a) in &f.coeffs {
        let b = g.coeff(*n);
        if b == C64::zero() {
            continue;
        }
        if let Some(w) = index_cylinder(rep, *n, depth) {
            let (re, im) = conj_mul_exact(a, &b)?;
            let slot = out
                .entry(w)
                .or_insert_with(|| (Rational::zero(), Rational::zero()));
            slot.0 += re;
            slot.1 += im;
        }
    }
    out.retain(|_, (re, im)| !re.is_zero() || !im.is_zero());
    Ok(out)
}

/// Recovers `<P(w) f, g>` from the four diagonal measures by polarization,
/// exactly:
///
/// ```text
/// <P f, g> = 1/4 sum_k i^-k mu_{f + i^k g}(w)      k = 0..4
/// ```
pub fn polarized_inner(
    rep: &PermutativeRep,
    f: &RepVector,
    g: &RepVector,
    cell: &Word,
) -> Result<(Rational, Rational)> {
    if !cell.is_finite() {
        return Err(Error::NotFinite);
    }
    let depth = cell.len();
    let powers = [
        C64::new(1.0, 0.0),
        C64::new(0.0, 1.0),
        C64::new(-1.0, 0.0),
        C64::new(0.0, -1.0),
    ];
    let mut re = Rational::zero();
    let mut im = Rational::zero();
    for (k, power) in powers.iter().enumerate() {
        let combined = f.add(&g.scale(*power));
        let mass = vector_measure(rep, &combined, depth)?.cylinder_mass(cell)?;
        match k {
            0 => re += mass,
            1 => im -= mass,
            2 => re -= mass,
            _ => im += mass,
        }
    }
    let quarter = rat(1, 4);
    Ok((re * &quarter, im * quarter))
}

// ============================================================================
// Covariance and the intertwiner
// ============================================================================

/// Exact verdicts for the covariance identities of the family `{mu_f}` at
/// one resolution.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CovarianceReport {
    pub depth: usize,
    /// `sum_i (mu_{S_i* f}) . tau_i^-1 = mu_f`.
    pub decomposition_ok: bool,
    /// `mu_f . tau_i^-1 = mu_{S_i f}` per branch.
    pub branch_ok: Vec<(u32, bool)>,
}

impl CovarianceReport {
    pub fn all_ok(&self) -> bool {
        self.decomposition_ok && self.branch_ok.iter().all(|(_, ok)| *ok)
    }
}

/// Same depth and same exact mass tables, cylinder and atomic. Refinement
/// models are bookkeeping, not content, so they do not enter.
fn same_tables(a: &Measure, b: &Measure) -> bool {
    a.depth() == b.depth()
        && a.cylinder_part().masses().eq(b.cylinder_part().masses())
        && a.atomic_part().atoms().eq(b.atomic_part().atoms())
}

/// Checks both covariance identities with exact rational masses. Depths
/// below 1 are raised to 1, the coarsest level where branches are visible.
pub fn check_covariance(
    rep: &PermutativeRep,
    f: &RepVector,
    depth: usize,
) -> Result<CovarianceReport> {
    let depth = depth.max(1);
    let mu_f = vector_measure(rep, f, depth)?;

    let mut parts = Vec::new();
    for branch in 1..=rep.alphabet.size() {
        let piece = vector_measure(rep, &apply_gen_star(rep, branch, f)?, depth - 1)?;
        parts.push(piece.pushforward_branch(branch)?);
    }
    let coeffs = vec![Rational::one(); parts.len()];
    let refs: Vec<&Measure> = parts.iter().collect();
    let decomposition_ok = same_tables(&convex_combine(&coeffs, &refs)?, &mu_f);

    let mut branch_ok = Vec::new();
    for branch in 1..=rep.alphabet.size() {
        let lhs = mu_f.pushforward_branch(branch)?;
        let rhs = vector_measure(rep, &apply_gen(rep, branch, f)?, depth + 1)?;
        branch_ok.push((branch, same_tables(&lhs, &rhs)));
    }
    Ok(CovarianceReport {
        depth,
        decomposition_ok,
        branch_ok,
    })
}

/// `W f = (1, mu_f)` at the given depth: the map carrying the abstract
/// representation into the square-density space over a system whose
/// composite branch images shrink to points.
pub fn intertwiner_w(
    sys: &IfsSystem,
    rep: &PermutativeRep,
    f: &RepVector,
    depth: usize,
) -> Result<SquareDensity> {
    if sys.alphabet() != rep.alphabet {
        return Err(Error::AlphabetMismatch {
            left: sys.alphabet().size(),
            right: rep.alphabet.size(),
        });
    }
    if !sys.diameters_vanish() {
        return Err(Error::InvalidSystem(
            "the coding map needs vanishing cylinder diameters".into(),
        ));
    }
    Ok(SquareDensity::one(vector_measure(rep, f, depth)?))
}

/// Residuals of `W S_i f = S_i W f` per branch, plus the exact isometry
/// defect `|f|^2 - mu_f(X)`: zero for a full cover, the escaped mass
/// otherwise.
#[derive(Clone, PartialEq, Debug)]
pub struct IntertwinerReport {
    pub depth: usize,
    pub isometry_defect: Rational,
    pub branch_residuals: Vec<(u32, f64)>,
}

impl IntertwinerReport {
    pub fn max_residual(&self) -> f64 {
        self.branch_residuals
            .iter()
            .map(|(_, r)| *r)
            .fold(0.0, f64::max)
    }
}

pub fn check_intertwiner(
    sys: &IfsSystem,
    rep: &PermutativeRep,
    f: &RepVector,
    depth: usize,
) -> Result<IntertwinerReport> {
    let embedded = intertwiner_w(sys, rep, f, depth)?;
    let isometry_defect = f.norm_sq_exact()? - embedded.base().total_mass();
    let mut branch_residuals = Vec::new();
    for s in sys.present_branches() {
        let branch = s.label();
        let lhs = intertwiner_w(sys, rep, &apply_gen(rep, branch, f)?, depth + 1)?;
        let rhs = hilbert::apply_s(sys, branch, &embedded)?;
        branch_residuals.push((branch, hilbert::distance(&lhs, &rhs)?));
    }
    Ok(IntertwinerReport {
        depth,
        isometry_defect,
        branch_residuals,
    })
}

/// Checks the relation suite directly on l2 vectors. Index arithmetic is
/// exact, so residuals are exactly zero wherever a relation holds.
pub fn verify_rep_relations(
    rep: &PermutativeRep,
    vectors: &[RepVector],
    tol: f64,
) -> Result<CuntzReport> {
    let mut checks = Vec::new();
    for (idx, f) in vectors.iter().enumerate() {
        for i in 1..=rep.alphabet.size() {
            for j in 1..=rep.alphabet.size() {
                let image = apply_gen_star(rep, i, &apply_gen(rep, j, f)?)?;
                let residual = if i == j {
                    image.sub(f).norm()
                } else {
                    image.norm()
                };
                checks.push(RelationCheck {
                    vector: idx,
                    relation: Relation::StarProduct { left: i, right: j },
                    residual,
                });
            }
        }
        let mut total = RepVector::zero();
        for i in 1..=rep.alphabet.size() {
            total = total.add(&apply_gen(rep, i, &apply_gen_star(rep, i, f)?)?);
        }
        checks.push(RelationCheck {
            vector: idx,
            relation: Relation::Completeness,
            residual: total.sub(f).norm(),
        });
    }
    Ok(CuntzReport {
        tol,
        full_cover: rep.is_full_cover(),
        checks,
    })
}

// ============================================================================
// Tests
// ============================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use proptest::prelude::*;

    fn fw(labels: &[u32]) -> Word {
        Word::finite(Alphabet::new(2).unwrap(), labels).unwrap()
    }

    fn mixed() -> RepVector {
        RepVector::from_coeffs(vec![
            (0, C64::new(0.5, 0.0)),
            (3, C64::new(1.0, 2.0)),
            (-2, C64::new(-1.0, 0.0)),
        ])
    }

    #[test]
    fn validation_rejects_overlapping_ranges() {
        let alphabet = Alphabet::new(2).unwrap();
        assert!(matches!(
            PermutativeRep::new(
                alphabet,
                vec![IndexMap::new(2, 0).unwrap(), IndexMap::new(2, 2).unwrap()],
            ),
            Err(Error::InvalidRep(_))
        ));
        assert!(IndexMap::new(0, 1).is_err());
        assert!(PermutativeRep::new(alphabet, vec![IndexMap::new(2, 0).unwrap()]).is_err());
        // Evens, 1 mod 4, 3 mod 4: a partition into three branches.
        let alphabet3 = Alphabet::new(3).unwrap();
        let three = PermutativeRep::new(
            alphabet3,
            vec![
                IndexMap::new(2, 0).unwrap(),
                IndexMap::new(4, 1).unwrap(),
                IndexMap::new(4, 3).unwrap(),
            ],
        )
        .unwrap();
        assert!(three.is_full_cover());
    }

    #[test]
    fn torus_moves_basis_indices() {
        let rep = PermutativeRep::torus();
        assert!(rep.is_full_cover());
        let e3 = RepVector::basis(3);
        assert_eq!(apply_gen(&rep, 1, &e3).unwrap(), RepVector::basis(6));
        assert_eq!(apply_gen(&rep, 2, &e3).unwrap(), RepVector::basis(7));
        assert_eq!(
            apply_gen_star(&rep, 1, &RepVector::basis(6)).unwrap(),
            RepVector::basis(3)
        );
        assert_eq!(
            apply_gen_star(&rep, 1, &RepVector::basis(7)).unwrap(),
            RepVector::zero()
        );
        assert_eq!(
            apply_gen_star(&rep, 2, &RepVector::basis(7)).unwrap(),
            RepVector::basis(3)
        );
    }

    #[test]
    fn relations_hold_exactly_on_the_torus() {
        let rep = PermutativeRep::torus();
        let vectors = [RepVector::basis(0), mixed()];
        let report = verify_rep_relations(&rep, &vectors, 1e-12).unwrap();
        assert!(report.full_cover);
        assert_eq!(report.max_residual(), 0.0);
    }

    #[test]
    fn partial_covers_leak_exactly() {
        // Evens and 1 mod 4: density 3/4, index 3 escapes both ranges.
        let rep = PermutativeRep::new(
            Alphabet::new(2).unwrap(),
            vec![IndexMap::new(2, 0).unwrap(), IndexMap::new(4, 1).unwrap()],
        )
        .unwrap();
        assert!(!rep.is_full_cover());
        let report =
            verify_rep_relations(&rep, std::slice::from_ref(&RepVector::basis(3)), 1e-12).unwrap();
        let defect = report
            .checks
            .iter()
            .find(|c| c.relation == Relation::Completeness)
            .unwrap();
        assert_eq!(defect.residual, 1.0);
        // And the induced measure misses that coefficient entirely.
        let mu = vector_measure(&rep, &RepVector::basis(3), 2).unwrap();
        assert_eq!(mu.total_mass(), rat(0, 1));
    }

    #[test]
    fn basis_measures_are_cylinder_points() {
        let rep = PermutativeRep::torus();
        // e_0 peels through branch 1 forever: the fixed point 0.
        let mu0 = vector_measure(&rep, &RepVector::basis(0), 4).unwrap();
        assert_eq!(mu0.cylinder_mass(&fw(&[1, 1, 1, 1])).unwrap(), rat(1, 1));
        assert_eq!(mu0.total_mass(), rat(1, 1));
        // e_1 peels through branch 2 once, then branch 1: the point 1/2.
        let mu1 = vector_measure(&rep, &RepVector::basis(1), 4).unwrap();
        assert_eq!(mu1.cylinder_mass(&fw(&[2, 1, 1, 1])).unwrap(), rat(1, 1));
        // e_5 spells the binary digits of 5 from the bottom: 5/8.
        let mu5 = vector_measure(&rep, &RepVector::basis(5), 5).unwrap();
        assert_eq!(mu5.cylinder_mass(&fw(&[2, 1, 2, 1, 1])).unwrap(), rat(1, 1));
    }

    #[test]
    fn peeling_matches_direct_projections() {
        let rep = PermutativeRep::torus();
        let f = mixed();
        let mu = vector_measure(&rep, &f, 3).unwrap();
        for w in Alphabet::new(2).unwrap().words(3) {
            let projected = cylinder_projection(&rep, &w, &f).unwrap();
            assert_eq!(projected.norm_sq_exact().unwrap(), mu.cylinder_mass(&w).unwrap());
        }
        assert_eq!(mu.total_mass(), f.norm_sq_exact().unwrap());
    }

    #[test]
    fn sesquilinear_agrees_with_polarization() {
        let rep = PermutativeRep::torus();
        let f = mixed();
        let g = RepVector::from_coeffs(vec![
            (0, C64::new(1.0, -1.0)),
            (3, C64::new(0.25, 0.0)),
            (6, C64::new(0.0, 2.0)),
        ]);
        let table = sesquilinear_measure(&rep, &f, &g, 2).unwrap();
        for w in Alphabet::new(2).unwrap().words(2) {
            let direct = table
                .get(&w)
                .cloned()
                .unwrap_or_else(|| (Rational::zero(), Rational::zero()));
            assert_eq!(polarized_inner(&rep, &f, &g, &w).unwrap(), direct);
        }
        // Hermitian symmetry: mu_{g,f} is the conjugate table.
        let flipped = sesquilinear_measure(&rep, &g, &f, 2).unwrap();
        for (w, (re, im)) in &table {
            let (fre, fim) = &flipped[w];
            assert_eq!(fre, re);
            assert_eq!(*fim, -im);
        }
    }

    #[test]
    fn covariance_holds_exactly() {
        let rep = PermutativeRep::torus();
        for f in [RepVector::basis(0), RepVector::basis(1), mixed()] {
            let report = check_covariance(&rep, &f, 3).unwrap();
            assert!(report.all_ok(), "{report:?}");
        }
    }

    #[test]
    fn intertwiner_exchanges_generators_exactly() {
        let sys = IfsSystem::dyadic();
        let rep = PermutativeRep::torus();
        let f = mixed();
        let report = check_intertwiner(&sys, &rep, &f, 3).unwrap();
        assert_eq!(report.isometry_defect, rat(0, 1));
        assert_eq!(report.max_residual(), 0.0);
        // mu_{e_0} pushed through branch 2 is the point measure at 1/2,
        // matching mu of the shifted basis vector.
        let mu0 = vector_measure(&rep, &RepVector::basis(0), 3).unwrap();
        let shifted = vector_measure(&rep, &apply_gen(&rep, 2, &RepVector::basis(0)).unwrap(), 4)
            .unwrap();
        assert_eq!(mu0.pushforward_branch(2).unwrap(), shifted);
    }

    #[test]
    fn intertwiner_reports_escaped_mass() {
        let sys = IfsSystem::dyadic();
        let rep = PermutativeRep::new(
            Alphabet::new(2).unwrap(),
            vec![IndexMap::new(2, 0).unwrap(), IndexMap::new(4, 1).unwrap()],
        )
        .unwrap();
        let f = RepVector::from_coeffs(vec![
            (3, C64::new(1.0, 0.0)),
            (4, C64::new(2.0, 0.0)),
        ]);
        let report = check_intertwiner(&sys, &rep, &f, 2).unwrap();
        assert_eq!(report.isometry_defect, rat(1, 1));
    }

    #[test]
    fn index_overflow_is_an_error() {
        let rep = PermutativeRep::torus();
        let f = RepVector::basis(i64::MAX / 2 + 1);
        assert!(matches!(
            apply_gen(&rep, 1, &f),
            Err(Error::IndexOverflow)
        ));
    }

    proptest! {
        #[test]
        fn random_vectors_satisfy_relations_and_covariance(
            entries in prop::collection::vec((-12i64..=12, -3i32..=3, -3i32..=3), 1..5),
            depth in 1usize..4,
        ) {
            let rep = PermutativeRep::torus();
            let f = RepVector::from_coeffs(
                entries
                    .into_iter()
                    .map(|(n, re, im)| (n, C64::new(re as f64, im as f64)))
                    .collect(),
            );
            let report = verify_rep_relations(&rep, std::slice::from_ref(&f), 1e-12).unwrap();
            prop_assert_eq!(report.max_residual(), 0.0);
            let cov = check_covariance(&rep, &f, depth).unwrap();
            prop_assert!(cov.all_ok());
            // Full cover: no mass escapes at any depth.
            let mu = vector_measure(&rep, &f, depth).unwrap();
            prop_assert_eq!(mu.total_mass(), f.norm_sq_exact().unwrap());
        }
    }
}
