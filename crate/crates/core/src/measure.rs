//! Measures on the coding space at finite cylinder resolution.
//!
//! A measure is stored as two parts with exact rational masses:
//!
//! - a cylinder part: a sparse table of masses over the depth-`k` cylinders,
//!   together with a refinement model saying how a cell's mass splits across
//!   its children (`Uniform`: equally; `Bernoulli(p)`: proportionally to
//!   fixed branch weights; `Frozen`: not at all);
//! - an atomic part: point masses at eventually periodic words.
//!
//! Refining and then re-summing a table reproduces it exactly, so any two
//! depths a model can reach give consistent masses. Pushforwards under the
//! branches `tau_i` and the shift `sigma` are mass reindexings and stay
//! exact; so do Radon-Nikodym tables, the self-similar product measure fixed
//! by `mu = sum_i p_i mu . tau_i^-1`, and L1 distances between tables.
//! Floating point appears nowhere in this module except the chaos-game
//! sampler's branch selection.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::coding::{Alphabet, IfsSystem, Symbol, Word};
use crate::error::{Error, Result};
use crate::rational::check_weights;
use crate::Rational;

// ============================================================================
// Parts
// ============================================================================

/// How a cylinder cell's mass distributes over its children when the table
/// is refined past its stored depth.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum RefinementModel {
    /// Each child receives `1/N` of the parent mass.
    Uniform,
    /// Child `w . j` receives `p_j` times the parent mass. Weights are
    /// nonnegative and sum to 1; a weight of 1 concentrates all mass on one
    /// branch.
    Bernoulli(Vec<Rational>),
    /// Masses are known only at the stored depth. Refining a cell of
    /// positive mass is an error; zero mass splits into zeros.
    Frozen,
}

/// Sparse table of exact masses over the depth-`k` cylinder cells. Missing
/// cells carry zero mass.
#[derive(Clone, PartialEq, Debug)]
pub struct CylinderPart {
    depth: usize,
    masses: BTreeMap<Word, Rational>,
    model: RefinementModel,
}

impl CylinderPart {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn model(&self) -> &RefinementModel {
        &self.model
    }

    /// Stored cells with positive mass, in lexicographic word order.
    pub fn masses(&self) -> impl Iterator<Item = (&Word, &Rational)> {
        self.masses.iter()
    }

    pub fn mass(&self, w: &Word) -> Rational {
        self.masses.get(w).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn total(&self) -> Rational {
        self.masses.values().sum()
    }

    fn empty(model: RefinementModel) -> CylinderPart {
        CylinderPart {
            depth: 0,
            masses: BTreeMap::new(),
            model,
        }
    }
}

/// Point masses at eventually periodic words. Stored masses are strictly
/// positive; words are syntactically canonical, so equal points over the
/// bare coding space share one entry. Boundary identifications of an
/// interval geometry are not folded in here; resolve those with
/// [`IfsSystem::canonical_address_form`] before inserting.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct AtomicPart {
    atoms: BTreeMap<Word, Rational>,
}

impl AtomicPart {
    pub fn atoms(&self) -> impl Iterator<Item = (&Word, &Rational)> {
        self.atoms.iter()
    }

    pub fn mass(&self, w: &Word) -> Rational {
        self.atoms.get(w).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn total(&self) -> Rational {
        self.atoms.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

// ============================================================================
// Measures
// ============================================================================

/// A finite nonnegative measure on the coding space: cylinder part plus
/// atoms.
#[derive(Clone, PartialEq, Debug)]
pub struct Measure {
    alphabet: Alphabet,
    cylinder: CylinderPart,
    atomic: AtomicPart,
}

impl Measure {
    // ------------------------------------------------------------------
    // Constructors
    // ------------------------------------------------------------------

    /// The zero measure.
    pub fn zero(alphabet: Alphabet) -> Measure {
        Measure {
            alphabet,
            cylinder: CylinderPart::empty(RefinementModel::Uniform),
            atomic: AtomicPart::default(),
        }
    }

    /// Total mass 1 split uniformly: the Lebesgue-like measure giving each
    /// depth-`k` cell mass `N^-k`.
    pub fn uniform(alphabet: Alphabet) -> Measure {
        Measure::product(alphabet, RefinementModel::Uniform)
    }

    /// Total mass 1 split by fixed branch weights: the product measure
    /// giving `w` the mass `p_{w_1} ... p_{w_k}`.
    pub fn bernoulli(alphabet: Alphabet, weights: Vec<Rational>) -> Result<Measure> {
        if weights.len() != alphabet.size() as usize {
            return Err(Error::InvalidWeights(format!(
                "expected {} weights, got {}",
                alphabet.size(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| w.is_negative()) {
            return Err(Error::InvalidWeights("weights must be nonnegative".into()));
        }
        let total: Rational = weights.iter().sum();
        if !total.is_one() {
            return Err(Error::InvalidWeights("weights must sum to 1".into()));
        }
        Ok(Measure::product(alphabet, RefinementModel::Bernoulli(weights)))
    }

    fn product(alphabet: Alphabet, model: RefinementModel) -> Measure {
        let mut masses = BTreeMap::new();
        masses.insert(Word::empty(), Rational::one());
        Measure {
            alphabet,
            cylinder: CylinderPart {
                depth: 0,
                masses,
                model,
            },
            atomic: AtomicPart::default(),
        }
    }

    /// Unit point mass at an eventually periodic word.
    pub fn dirac(alphabet: Alphabet, at: Word) -> Result<Measure> {
        let mut m = Measure::zero(alphabet);
        m.add_atom(at, Rational::one())?;
        Ok(m)
    }

    /// Assembles a measure from explicit parts, validating shape: cylinder
    /// keys are finite words of the stored depth, masses are nonnegative,
    /// atom words are eventually periodic with positive mass, and Bernoulli
    /// weights fit the alphabet. Zero-mass cells are pruned.
    pub fn from_parts(
        alphabet: Alphabet,
        depth: usize,
        model: RefinementModel,
        cylinder_masses: Vec<(Word, Rational)>,
        atoms: Vec<(Word, Rational)>,
    ) -> Result<Measure> {
        if let RefinementModel::Bernoulli(p) = &model {
            if p.len() != alphabet.size() as usize {
                return Err(Error::InvalidWeights(format!(
                    "expected {} weights, got {}",
                    alphabet.size(),
                    p.len()
                )));
            }
            if p.iter().any(|w| w.is_negative()) {
                return Err(Error::InvalidWeights("weights must be nonnegative".into()));
            }
            if !p.iter().sum::<Rational>().is_one() {
                return Err(Error::InvalidWeights("weights must sum to 1".into()));
            }
        }
        let mut table = BTreeMap::new();
        for (w, m) in cylinder_masses {
            if !w.is_finite() || w.len() != depth {
                return Err(Error::InvalidMeasure(format!(
                    "cylinder key {w} does not have depth {depth}"
                )));
            }
            if m.is_negative() {
                return Err(Error::InvalidMeasure(format!("negative mass at {w}")));
            }
            if m.is_zero() {
                continue;
            }
            let slot = table.entry(w).or_insert_with(Rational::zero);
            *slot += m;
        }
        let mut out = Measure {
            alphabet,
            cylinder: CylinderPart {
                depth,
                masses: table,
                model,
            },
            atomic: AtomicPart::default(),
        };
        for (w, m) in atoms {
            out.add_atom(w, m)?;
        }
        Ok(out)
    }

    fn add_atom(&mut self, at: Word, mass: Rational) -> Result<()> {
        if !at.is_point() {
            return Err(Error::InvalidMeasure(format!(
                "atom must sit at an eventually periodic word, got cylinder {at}"
            )));
        }
        if !mass.is_positive() {
            return Err(Error::InvalidMeasure(format!(
                "atom at {at} needs positive mass"
            )));
        }
        *self
            .atomic
            .atoms
            .entry(at)
            .or_insert_with(Rational::zero) += mass;
        Ok(())
    }

    // ------------------------------------------------------------------
    // Accessors
    // ------------------------------------------------------------------

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn cylinder_part(&self) -> &CylinderPart {
        &self.cylinder
    }

    pub fn atomic_part(&self) -> &AtomicPart {
        &self.atomic
    }

    pub fn depth(&self) -> usize {
        self.cylinder.depth
    }

    pub fn total_mass(&self) -> Rational {
        self.cylinder.total() + self.atomic.total()
    }

    // ------------------------------------------------------------------
    // Resolution changes
    // ------------------------------------------------------------------

    /// Moves the cylinder table to exactly `depth`, refining by the model or
    /// summing children as needed. Atoms are untouched.
    pub fn at_depth(&self, depth: usize) -> Result<Measure> {
        let mut out = self.clone();
        while out.cylinder.depth > depth {
            out.truncate_once();
        }
        while out.cylinder.depth < depth {
            out.refine_once()?;
        }
        Ok(out)
    }

    fn refine_once(&mut self) -> Result<()> {
        let n = self.alphabet.size();
        let mut next = BTreeMap::new();
        match &self.cylinder.model {
            RefinementModel::Uniform => {
                let share = Rational::new(1.into(), n.into());
                for (w, m) in &self.cylinder.masses {
                    let child_mass = m * &share;
                    for s in self.alphabet.symbols() {
                        next.insert(w.child(s), child_mass.clone());
                    }
                }
            }
            RefinementModel::Bernoulli(p) => {
                for (w, m) in &self.cylinder.masses {
                    for s in self.alphabet.symbols() {
                        let child_mass = m * &p[s.index()];
                        if child_mass.is_positive() {
                            next.insert(w.child(s), child_mass);
                        }
                    }
                }
            }
            RefinementModel::Frozen => {
                if !self.cylinder.masses.is_empty() {
                    return Err(Error::Resolution {
                        requested: self.cylinder.depth + 1,
                        available: self.cylinder.depth,
                    });
                }
            }
        }
        self.cylinder.masses = next;
        self.cylinder.depth += 1;
        Ok(())
    }

    fn truncate_once(&mut self) {
        debug_assert!(self.cylinder.depth > 0);
        let mut next: BTreeMap<Word, Rational> = BTreeMap::new();
        for (w, m) in &self.cylinder.masses {
            let (parent, _) = w.split_last().expect("depth > 0 keys are nonempty");
            *next.entry(parent).or_insert_with(Rational::zero) += m;
        }
        self.cylinder.depth -= 1;
        self.cylinder.masses = next;
    }

    // ------------------------------------------------------------------
    // Mass queries
    // ------------------------------------------------------------------

    /// Mass of the cylinder set of a finite word, atoms included. Words
    /// deeper than the stored table are resolved through the refinement
    /// model; `Frozen` only resolves cells that are already zero.
    pub fn cylinder_mass(&self, w: &Word) -> Result<Rational> {
        if !w.is_finite() {
            return Err(Error::NotFinite);
        }
        Ok(self.cylinder_part_mass(w)? + self.atom_mass_in(w))
    }

    /// Cylinder-part mass alone, without atoms.
    pub fn cylinder_part_mass(&self, w: &Word) -> Result<Rational> {
        let depth = self.cylinder.depth;
        if w.len() <= depth {
            let mut total = Rational::zero();
            for (key, m) in &self.cylinder.masses {
                if key.starts_with(w) {
                    total += m;
                }
            }
            return Ok(total);
        }
        // Descend from the stored ancestor cell through the model.
        let ancestor = Word::from_symbols(w.expand(depth)?, Vec::new());
        let mut mass = self.cylinder.mass(&ancestor);
        if mass.is_zero() {
            return Ok(mass);
        }
        match &self.cylinder.model {
            RefinementModel::Uniform => {
                let n = Rational::from_integer(self.alphabet.size().into());
                for _ in depth..w.len() {
                    mass /= &n;
                }
            }
            RefinementModel::Bernoulli(p) => {
                for k in depth..w.len() {
                    mass *= &p[w.symbol_at(k)?.index()];
                }
            }
            RefinementModel::Frozen => {
                return Err(Error::Resolution {
                    requested: w.len(),
                    available: depth,
                });
            }
        }
        Ok(mass)
    }

    /// Total atomic mass inside the cylinder of a finite word.
    pub fn atom_mass_in(&self, w: &Word) -> Rational {
        self.atomic
            .atoms
            .iter()
            .filter(|(u, _)| u.starts_with(w))
            .map(|(_, m)| m)
            .sum()
    }

    /// Exact mass of a single point. Combines the atom at the word with the
    /// cylinder part's limit along its cylinders: zero for `Uniform`, zero
    /// for `Bernoulli` unless every weight met infinitely often equals 1,
    /// and zero for `Frozen` (whose resolution ends at its stored depth).
    pub fn point_mass(&self, at: &Word) -> Result<Rational> {
        if !at.is_point() {
            return Err(Error::InvalidMeasure(format!(
                "point mass needs an eventually periodic word, got {at}"
            )));
        }
        let mut mass = self.atomic.mass(at);
        if let RefinementModel::Bernoulli(p) = &self.cylinder.model {
            let one = Rational::one();
            if at.period().iter().all(|s| p[s.index()] == one) {
                let depth = self.cylinder.depth;
                let ancestor = Word::from_symbols(at.expand(depth)?, Vec::new());
                let mut tail = self.cylinder.mass(&ancestor);
                for k in depth..at.prefix().len().max(depth) {
                    tail *= &p[at.symbol_at(k)?.index()];
                }
                mass += tail;
            }
        }
        Ok(mass)
    }

    /// Cylinder-set masses of every depth-`k` cell, atoms folded in. The
    /// table is sparse: absent cells have zero total mass.
    pub fn depth_totals(&self, depth: usize) -> Result<BTreeMap<Word, Rational>> {
        let refined = self.at_depth(depth)?;
        let mut totals = refined.cylinder.masses;
        for (u, m) in &self.atomic.atoms {
            let cell = Word::from_symbols(u.expand(depth)?, Vec::new());
            *totals.entry(cell).or_insert_with(Rational::zero) += m;
        }
        totals.retain(|_, m| m.is_positive());
        Ok(totals)
    }

    // ------------------------------------------------------------------
    // Pushforwards
    // ------------------------------------------------------------------

    /// Image measure under the branch `tau_i`: the mass of `w` moves to
    /// `i . w`, atoms move to `i . u`. Depth grows by one; the refinement
    /// model still describes the result, since children split in the same
    /// proportions as before the reindexing.
    pub fn pushforward_branch(&self, branch: u32) -> Result<Measure> {
        let s = self.alphabet.symbol(branch)?;
        let mut masses = BTreeMap::new();
        for (w, m) in &self.cylinder.masses {
            masses.insert(w.prepend(s), m.clone());
        }
        let mut atoms = BTreeMap::new();
        for (u, m) in &self.atomic.atoms {
            atoms.insert(u.prepend(s), m.clone());
        }
        Ok(Measure {
            alphabet: self.alphabet,
            cylinder: CylinderPart {
                depth: self.cylinder.depth + 1,
                masses,
                model: self.cylinder.model.clone(),
            },
            atomic: AtomicPart { atoms },
        })
    }

    /// Image measure under the shift: the mass of `w` becomes the sum of the
    /// masses of `1.w, ..., N.w`, so depth drops by one. A depth-0 table is
    /// first refined, which a frozen positive-mass table cannot do. Atoms
    /// shift and merge when their images collide.
    pub fn pushforward_sigma(&self) -> Result<Measure> {
        let src = if self.cylinder.depth == 0 {
            self.at_depth(1)?
        } else {
            self.clone()
        };
        let mut masses: BTreeMap<Word, Rational> = BTreeMap::new();
        for (w, m) in &src.cylinder.masses {
            let shifted = w.shift().expect("depth >= 1 keys are nonempty");
            *masses.entry(shifted).or_insert_with(Rational::zero) += m;
        }
        let mut atoms: BTreeMap<Word, Rational> = BTreeMap::new();
        for (u, m) in &self.atomic.atoms {
            let shifted = u.shift().expect("atoms are infinite words");
            *atoms.entry(shifted).or_insert_with(Rational::zero) += m;
        }
        Ok(Measure {
            alphabet: self.alphabet,
            cylinder: CylinderPart {
                depth: src.cylinder.depth - 1,
                masses,
                model: src.cylinder.model.clone(),
            },
            atomic: AtomicPart { atoms },
        })
    }

    // ------------------------------------------------------------------
    // Combination
    // ------------------------------------------------------------------

    /// Scales all masses by a nonnegative rational.
    pub fn scale(&self, c: &Rational) -> Result<Measure> {
        if c.is_negative() {
            return Err(Error::InvalidMeasure(
                "measures scale by nonnegative coefficients".into(),
            ));
        }
        if c.is_zero() {
            return Ok(Measure::zero(self.alphabet));
        }
        let mut out = self.clone();
        for m in out.cylinder.masses.values_mut() {
            *m *= c;
        }
        for m in out.atomic.atoms.values_mut() {
            *m *= c;
        }
        Ok(out)
    }
}

/// Nonnegative combination `sum_j c_j m_j`. Cylinder tables are brought to
/// the deepest stored depth first. The result keeps the inputs' refinement
/// model when all mass-carrying inputs agree on it; otherwise the mixture has
/// no product structure and the result is `Frozen` at the combined depth.
pub fn convex_combine(coeffs: &[Rational], measures: &[&Measure]) -> Result<Measure> {
    if coeffs.len() != measures.len() {
        return Err(Error::InvalidMeasure(format!(
            "{} coefficients for {} measures",
            coeffs.len(),
            measures.len()
        )));
    }
    if coeffs.iter().any(|c| c.is_negative()) {
        return Err(Error::InvalidMeasure(
            "combination coefficients must be nonnegative".into(),
        ));
    }
    let contributing: Vec<(&Rational, &Measure)> = coeffs
        .iter()
        .zip(measures.iter().copied())
        .filter(|(c, _)| c.is_positive())
        .collect();
    let alphabet = match contributing.first() {
        Some((_, m)) => m.alphabet,
        None => {
            return match measures.first() {
                Some(m) => Ok(Measure::zero(m.alphabet)),
                None => Err(Error::InvalidMeasure("nothing to combine".into())),
            }
        }
    };
    for (_, m) in &contributing {
        if m.alphabet != alphabet {
            return Err(Error::AlphabetMismatch {
                left: alphabet.size(),
                right: m.alphabet.size(),
            });
        }
    }

    let depth = contributing
        .iter()
        .map(|(_, m)| m.cylinder.depth)
        .max()
        .unwrap_or(0);
    let mut masses: BTreeMap<Word, Rational> = BTreeMap::new();
    let mut atoms: BTreeMap<Word, Rational> = BTreeMap::new();
    let mut models: Vec<RefinementModel> = Vec::new();
    for (c, m) in &contributing {
        let refined = m.at_depth(depth)?;
        if refined.cylinder.total().is_positive() {
            if !models.contains(&refined.cylinder.model) {
                models.push(refined.cylinder.model.clone());
            }
            for (w, mass) in refined.cylinder.masses {
                *masses.entry(w).or_insert_with(Rational::zero) += mass * *c;
            }
        }
        for (u, mass) in &m.atomic.atoms {
            *atoms.entry(u.clone()).or_insert_with(Rational::zero) += mass * *c;
        }
    }
    let model = match models.len() {
        0 | 1 => models.pop().unwrap_or(RefinementModel::Uniform),
        _ => RefinementModel::Frozen,
    };
    masses.retain(|_, m| m.is_positive());
    atoms.retain(|_, m| m.is_positive());
    Ok(Measure {
        alphabet,
        cylinder: CylinderPart {
            depth,
            masses,
            model,
        },
        atomic: AtomicPart { atoms },
    })
}

// ============================================================================
// Radon-Nikodym and absolute continuity
// ============================================================================

/// Depth-`k` table of exact density values `num(w) / den(w)`.
#[derive(Clone, PartialEq, Debug)]
pub struct RnTable {
    depth: usize,
    values: BTreeMap<Word, Rational>,
}

impl RnTable {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn value(&self, w: &Word) -> Rational {
        self.values.get(w).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn values(&self) -> impl Iterator<Item = (&Word, &Rational)> {
        self.values.iter()
    }
}

/// Cylinder-wise Radon-Nikodym derivative of `num` against `den` at depth
/// `k`: on each depth-`k` cell the ratio of the cylinder masses (atoms
/// included). Cells where both vanish get density zero; a cell with positive
/// `num` mass and zero `den` mass is an absolute-continuity failure.
pub fn radon_nikodym(num: &Measure, den: &Measure, depth: usize) -> Result<RnTable> {
    if num.alphabet() != den.alphabet() {
        return Err(Error::AlphabetMismatch {
            left: num.alphabet().size(),
            right: den.alphabet().size(),
        });
    }
    let num_totals = num.depth_totals(depth)?;
    let den_totals = den.depth_totals(depth)?;
    let mut values = BTreeMap::new();
    for (w, nm) in &num_totals {
        match den_totals.get(w) {
            Some(dm) => {
                values.insert(w.clone(), nm / dm);
            }
            None => {
                return Err(Error::NotAbsolutelyContinuous {
                    witness: w.to_string(),
                    atom: false,
                });
            }
        }
    }
    Ok(RnTable { depth, values })
}

/// Where an absolute-continuity check failed.
#[derive(Clone, PartialEq, Debug)]
pub enum AcWitness {
    /// A cylinder with positive numerator mass and zero denominator mass.
    Cylinder(Word),
    /// A numerator atom carrying mass the denominator gives to no point.
    Atom(Word),
}

/// Verdicts of [`is_abs_continuous`].
#[derive(Clone, PartialEq, Debug)]
pub struct AbsContinuity {
    /// The finite-resolution verdict: no depth-`k` cylinder has positive
    /// `num` mass and zero `den` mass.
    pub cylinder_ok: bool,
    /// The sharper verdict that additionally requires every `num` atom to
    /// sit on a point of positive `den` mass, and every cell of positive
    /// `num` cylinder-part mass to carry positive `den` cylinder-part mass.
    /// Atoms hiding inside a diffuse denominator are caught here even though
    /// every finite-depth cylinder test passes.
    pub exact_ok: bool,
    /// First failure found; an atom witness is preferred over a cylinder.
    pub witness: Option<AcWitness>,
}

impl AbsContinuity {
    pub fn both(&self) -> bool {
        self.cylinder_ok && self.exact_ok
    }
}

/// Tests `num << den` at cylinder resolution `k`, with the exact atom-aware
/// refinement described on [`AbsContinuity`].
pub fn is_abs_continuous(num: &Measure, den: &Measure, depth: usize) -> Result<AbsContinuity> {
    if num.alphabet() != den.alphabet() {
        return Err(Error::AlphabetMismatch {
            left: num.alphabet().size(),
            right: den.alphabet().size(),
        });
    }
    let num_at = num.at_depth(depth)?;
    let den_at = den.at_depth(depth)?;

    let mut cylinder_witness = None;
    for (w, _) in num.depth_totals(depth)? {
        if den_at.cylinder_mass(&w)?.is_zero() {
            cylinder_witness = Some(w);
            break;
        }
    }

    let mut atom_witness = None;
    for u in num.atomic.atoms.keys() {
        if !den.point_mass(u)?.is_positive() {
            atom_witness = Some(u.clone());
            break;
        }
    }

    let mut part_witness = None;
    if atom_witness.is_none() && cylinder_witness.is_none() {
        for w in num_at.cylinder.masses.keys() {
            if den_at.cylinder_part_mass(w)?.is_zero() {
                part_witness = Some(w.clone());
                break;
            }
        }
    }

    let cylinder_ok = cylinder_witness.is_none();
    let exact_ok = cylinder_ok && atom_witness.is_none() && part_witness.is_none();
    let witness = match (atom_witness, cylinder_witness, part_witness) {
        (Some(u), _, _) => Some(AcWitness::Atom(u)),
        (None, Some(w), _) => Some(AcWitness::Cylinder(w)),
        (None, None, Some(w)) => Some(AcWitness::Cylinder(w)),
        (None, None, None) => None,
    };
    Ok(AbsContinuity {
        cylinder_ok,
        exact_ok,
        witness,
    })
}

// ============================================================================
// Self-similar measures
// ============================================================================

/// The unique probability measure fixed by `mu = sum_i p_i mu . tau_i^-1`,
/// materialized at depth `k`: the product measure with `mu(w) = p_{w_1} ...
/// p_{w_k}`. Weights must be strictly positive and sum to 1.
pub fn hutchinson_fixed_point(
    sys: &IfsSystem,
    weights: &[Rational],
    depth: usize,
) -> Result<Measure> {
    if weights.len() != sys.alphabet().size() as usize {
        return Err(Error::InvalidWeights(format!(
            "expected {} weights, got {}",
            sys.alphabet().size(),
            weights.len()
        )));
    }
    check_weights(weights)?;
    Measure::bernoulli(sys.alphabet(), weights.to_vec())?.at_depth(depth)
}

/// One application of the weighted pushforward map
/// `H(m) = sum_i p_i m . tau_i^-1`, evaluated back at `m`'s own depth.
pub fn hutchinson_map(sys: &IfsSystem, weights: &[Rational], m: &Measure) -> Result<Measure> {
    if weights.len() != sys.alphabet().size() as usize {
        return Err(Error::InvalidWeights(format!(
            "expected {} weights, got {}",
            sys.alphabet().size(),
            weights.len()
        )));
    }
    check_weights(weights)?;
    let depth = m.depth();
    let mut pushed = Vec::new();
    for s in sys.alphabet().symbols() {
        pushed.push(m.pushforward_branch(s.label())?);
    }
    let refs: Vec<&Measure> = pushed.iter().collect();
    convex_combine(weights, &refs)?.at_depth(depth)
}

/// Iterates the weighted pushforward map from `start`, tracking the exact L1
/// cylinder distance to the fixed point at each step. Stops at `max_iters`
/// or as soon as the distance is exactly zero. At depth `k` the map reaches
/// the fixed point's depth-`k` table after at most `k` iterations: each
/// application freshens one more leading coordinate.
pub fn hutchinson_iterate(
    sys: &IfsSystem,
    weights: &[Rational],
    depth: usize,
    start: &Measure,
    max_iters: usize,
) -> Result<(Measure, Vec<Rational>)> {
    let target = hutchinson_fixed_point(sys, weights, depth)?;
    let mut current = start.at_depth(depth)?;
    let mut trace = Vec::new();
    for _ in 0..max_iters {
        current = hutchinson_map(sys, weights, &current)?;
        let d = l1_distance(&current, &target, depth)?;
        let done = d.is_zero();
        trace.push(d);
        if done {
            break;
        }
    }
    Ok((current, trace))
}

/// Exact L1 distance between the depth-`k` cylinder tables (atoms folded
/// in).
pub fn l1_distance(a: &Measure, b: &Measure, depth: usize) -> Result<Rational> {
    let ta = a.depth_totals(depth)?;
    let tb = b.depth_totals(depth)?;
    let mut total = Rational::zero();
    for (w, ma) in &ta {
        let mb = tb.get(w).cloned().unwrap_or_else(Rational::zero);
        total += (ma - mb).abs();
    }
    for (w, mb) in &tb {
        if !ta.contains_key(w) {
            total += mb.abs();
        }
    }
    Ok(total)
}

/// Empirical depth-`k` measure of the chaos game: `samples` words drawn
/// symbol by symbol with the given weights, counted into cylinder cells.
/// Exact counts over an exact total, so the result is rational; the table is
/// `Frozen` because an empirical sample carries no refinement rule. Fully
/// deterministic for a fixed seed.
pub fn chaos_game(
    sys: &IfsSystem,
    weights: &[Rational],
    samples: u64,
    seed: u64,
    depth: usize,
) -> Result<Measure> {
    if weights.len() != sys.alphabet().size() as usize {
        return Err(Error::InvalidWeights(format!(
            "expected {} weights, got {}",
            sys.alphabet().size(),
            weights.len()
        )));
    }
    check_weights(weights)?;
    if samples == 0 {
        return Err(Error::InvalidMeasure("need at least one sample".into()));
    }
    let cutoffs: Vec<f64> = weights
        .iter()
        .scan(Rational::zero(), |acc, w| {
            *acc += w;
            Some(crate::rational::to_f64(acc))
        })
        .collect();
    let symbols: Vec<Symbol> = sys.alphabet().symbols().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<Word, u64> = BTreeMap::new();
    for _ in 0..samples {
        let mut drawn = Vec::with_capacity(depth);
        for _ in 0..depth {
            let u: f64 = rng.gen();
            let pick = cutoffs
                .iter()
                .position(|c| u < *c)
                .unwrap_or(symbols.len() - 1);
            drawn.push(symbols[pick]);
        }
        *counts
            .entry(Word::from_symbols(drawn, Vec::new()))
            .or_insert(0) += 1;
    }
    let total = Rational::from_integer(samples.into());
    let masses = counts
        .into_iter()
        .map(|(w, c)| (w, Rational::from_integer(c.into()) / &total))
        .collect();
    Measure::from_parts(
        sys.alphabet(),
        depth,
        RefinementModel::Frozen,
        masses,
        Vec::new(),
    )
}

// ============================================================================
// Tests
// ============================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use proptest::prelude::*;

    fn alpha2() -> Alphabet {
        Alphabet::new(2).unwrap()
    }

    fn fw(labels: &[u32]) -> Word {
        Word::finite(alpha2(), labels).unwrap()
    }

    fn pw(prefix: &[u32], period: &[u32]) -> Word {
        Word::periodic(alpha2(), prefix, period).unwrap()
    }

    fn third_weights() -> Vec<Rational> {
        vec![rat(1, 3), rat(2, 3)]
    }

    #[test]
    fn uniform_masses_halve_with_depth() {
        let m = Measure::uniform(alpha2());
        assert_eq!(m.cylinder_mass(&fw(&[1])).unwrap(), rat(1, 2));
        assert_eq!(m.cylinder_mass(&fw(&[2, 1, 2])).unwrap(), rat(1, 8));
        assert_eq!(m.total_mass(), rat(1, 1));
    }

    #[test]
    fn bernoulli_mass_is_the_weight_product() {
        let m = Measure::bernoulli(alpha2(), third_weights()).unwrap();
        assert_eq!(m.cylinder_mass(&fw(&[2, 1])).unwrap(), rat(2, 9));
        assert_eq!(m.cylinder_mass(&fw(&[1, 1, 1])).unwrap(), rat(1, 27));
    }

    #[test]
    fn bernoulli_rejects_bad_weights() {
        assert!(Measure::bernoulli(alpha2(), vec![rat(1, 2)]).is_err());
        assert!(Measure::bernoulli(alpha2(), vec![rat(2, 1), rat(-1, 1)]).is_err());
        assert!(Measure::bernoulli(alpha2(), vec![rat(1, 2), rat(1, 3)]).is_err());
    }

    #[test]
    fn refine_then_truncate_is_identity() {
        let m = Measure::bernoulli(alpha2(), third_weights())
            .unwrap()
            .at_depth(2)
            .unwrap();
        let back = m.at_depth(5).unwrap().at_depth(2).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn frozen_tables_refuse_to_refine_positive_mass() {
        let m = Measure::from_parts(
            alpha2(),
            1,
            RefinementModel::Frozen,
            vec![(fw(&[1]), rat(1, 1))],
            vec![],
        )
        .unwrap();
        assert!(matches!(
            m.at_depth(2),
            Err(Error::Resolution {
                requested: 2,
                available: 1
            })
        ));
        // Zero mass refines to zero under any model.
        let z = Measure::from_parts(alpha2(), 1, RefinementModel::Frozen, vec![], vec![]).unwrap();
        assert_eq!(z.at_depth(3).unwrap().total_mass(), rat(0, 1));
    }

    #[test]
    fn dirac_concentrates_cylinder_masses() {
        let half = Measure::dirac(alpha2(), pw(&[2], &[1])).unwrap();
        assert_eq!(half.cylinder_mass(&fw(&[2])).unwrap(), rat(1, 1));
        assert_eq!(half.cylinder_mass(&fw(&[2, 1, 1])).unwrap(), rat(1, 1));
        assert_eq!(half.cylinder_mass(&fw(&[1])).unwrap(), rat(0, 1));
        assert_eq!(half.point_mass(&pw(&[2], &[1])).unwrap(), rat(1, 1));
        assert_eq!(half.point_mass(&pw(&[], &[1])).unwrap(), rat(0, 1));
    }

    #[test]
    fn pushforward_branch_reindexes() {
        // Lebesgue pushed through the first branch: all mass on the first
        // half, still refinable.
        let m = Measure::uniform(alpha2());
        let pushed = m.pushforward_branch(1).unwrap();
        assert_eq!(pushed.depth(), 1);
        assert_eq!(pushed.cylinder_mass(&fw(&[1])).unwrap(), rat(1, 1));
        assert_eq!(pushed.cylinder_mass(&fw(&[2])).unwrap(), rat(0, 1));
        assert_eq!(pushed.cylinder_mass(&fw(&[1, 2])).unwrap(), rat(1, 2));
    }

    #[test]
    fn pushforward_sigma_shifts_atoms() {
        // delta at 1/2 shifts to delta at 0.
        let half = Measure::dirac(alpha2(), pw(&[2], &[1])).unwrap();
        let shifted = half.pushforward_sigma().unwrap();
        assert_eq!(shifted, Measure::dirac(alpha2(), pw(&[], &[1])).unwrap());
    }

    #[test]
    fn pushforward_sigma_sums_over_first_symbol() {
        let m = Measure::bernoulli(alpha2(), third_weights())
            .unwrap()
            .at_depth(3)
            .unwrap();
        let shifted = m.pushforward_sigma().unwrap();
        for w in alpha2().words(2) {
            let direct: Rational = (1..=2)
                .map(|i| m.cylinder_mass(&w.prepend(alpha2().symbol(i).unwrap())).unwrap())
                .sum();
            assert_eq!(shifted.cylinder_mass(&w).unwrap(), direct);
        }
    }

    #[test]
    fn bernoulli_measures_are_shift_invariant() {
        let m = Measure::bernoulli(alpha2(), third_weights()).unwrap();
        for depth in 0..=6 {
            let fine = m.at_depth(depth + 1).unwrap();
            let shifted = fine.pushforward_sigma().unwrap();
            assert_eq!(l1_distance(&shifted, &m, depth).unwrap(), rat(0, 1));
        }
    }

    #[test]
    fn sigma_needs_resolution_on_frozen_tables() {
        let m = Measure::from_parts(
            alpha2(),
            0,
            RefinementModel::Frozen,
            vec![(Word::empty(), rat(1, 1))],
            vec![],
        )
        .unwrap();
        assert!(matches!(m.pushforward_sigma(), Err(Error::Resolution { .. })));
    }

    #[test]
    fn radon_nikodym_of_branch_pushforward() {
        let m = Measure::uniform(alpha2());
        let pushed = m.pushforward_branch(1).unwrap();
        let rn = radon_nikodym(&pushed, &m, 3).unwrap();
        for w in alpha2().words(3) {
            let expected = if w.prefix()[0].label() == 1 {
                rat(2, 1)
            } else {
                rat(0, 1)
            };
            assert_eq!(rn.value(&w), expected, "at {w}");
        }
    }

    #[test]
    fn radon_nikodym_integrates_back() {
        let num = Measure::bernoulli(alpha2(), third_weights()).unwrap();
        let den = Measure::uniform(alpha2());
        let depth = 4;
        let rn = radon_nikodym(&num, &den, depth).unwrap();
        for w in alpha2().words(depth) {
            assert_eq!(
                rn.value(&w) * den.cylinder_mass(&w).unwrap(),
                num.cylinder_mass(&w).unwrap()
            );
        }
    }

    #[test]
    fn radon_nikodym_reports_witness() {
        let num = Measure::dirac(alpha2(), pw(&[2], &[1])).unwrap();
        let den = Measure::dirac(alpha2(), pw(&[], &[1])).unwrap();
        match radon_nikodym(&num, &den, 2) {
            Err(Error::NotAbsolutelyContinuous { witness, .. }) => {
                assert_eq!(witness, "10");
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn abs_continuity_verdicts() {
        let leb = Measure::uniform(alpha2());
        let d0 = Measure::dirac(alpha2(), pw(&[], &[1])).unwrap();
        let dhalf = Measure::dirac(alpha2(), pw(&[2], &[1])).unwrap();

        // Branch pushforward of Lebesgue against Lebesgue: fine both ways.
        let pushed = leb.pushforward_branch(1).unwrap();
        let r = is_abs_continuous(&pushed, &leb, 4).unwrap();
        assert!(r.cylinder_ok && r.exact_ok);

        // Atom against a diffuse measure: every cylinder test passes, the
        // exact verdict fails at the atom.
        let r = is_abs_continuous(&d0, &leb, 6).unwrap();
        assert!(r.cylinder_ok);
        assert!(!r.exact_ok);
        assert_eq!(r.witness, Some(AcWitness::Atom(pw(&[], &[1]))));

        // Diffuse against an atom: caught by a cylinder cell.
        let r = is_abs_continuous(&leb, &d0, 3).unwrap();
        assert!(!r.cylinder_ok && !r.exact_ok);
        match &r.witness {
            Some(AcWitness::Cylinder(w)) => {
                assert!(leb.cylinder_mass(w).unwrap().is_positive());
                assert!(d0.cylinder_mass(w).unwrap().is_zero());
            }
            other => panic!("expected a cylinder witness, got {other:?}"),
        }

        // Distinct atoms: the atom witness is preferred in the report.
        let r = is_abs_continuous(&dhalf, &d0, 3).unwrap();
        assert!(!r.cylinder_ok && !r.exact_ok);
        assert_eq!(r.witness, Some(AcWitness::Atom(pw(&[2], &[1]))));
    }

    #[test]
    fn degenerate_bernoulli_weights_carry_point_mass() {
        let m = Measure::bernoulli(alpha2(), vec![rat(1, 1), rat(0, 1)]).unwrap();
        assert_eq!(m.point_mass(&pw(&[], &[1])).unwrap(), rat(1, 1));
        let d0 = Measure::dirac(alpha2(), pw(&[], &[1])).unwrap();
        let r = is_abs_continuous(&d0, &m, 4).unwrap();
        assert!(r.exact_ok);
    }

    #[test]
    fn hutchinson_product_masses_in_lexicographic_order() {
        let sys = IfsSystem::dyadic();
        let m = hutchinson_fixed_point(&sys, &third_weights(), 2).unwrap();
        let masses: Vec<Rational> = alpha2()
            .words(2)
            .iter()
            .map(|w| m.cylinder_mass(w).unwrap())
            .collect();
        assert_eq!(masses, vec![rat(1, 9), rat(2, 9), rat(2, 9), rat(4, 9)]);
    }

    #[test]
    fn hutchinson_fixed_point_is_actually_fixed() {
        let sys = IfsSystem::dyadic();
        let m = hutchinson_fixed_point(&sys, &third_weights(), 4).unwrap();
        let mapped = hutchinson_map(&sys, &third_weights(), &m).unwrap();
        assert_eq!(l1_distance(&mapped, &m, 4).unwrap(), rat(0, 1));
    }

    #[test]
    fn hutchinson_iteration_terminates_within_depth_steps() {
        // Each application of the map pins one more leading coordinate, so
        // the depth-k table is exact after at most k steps.
        let sys = IfsSystem::dyadic();
        for depth in 1..=5 {
            let start = Measure::uniform(alpha2());
            let (_, trace) =
                hutchinson_iterate(&sys, &third_weights(), depth, &start, 50).unwrap();
            assert!(trace.len() <= depth);
            assert!(trace.last().unwrap().is_zero());
        }
    }

    #[test]
    fn hutchinson_distances_never_increase() {
        // The per-step ratio is not bounded by max p_i: here the second step
        // shrinks by (1/3)/(7/18) = 6/7 > 2/3. Monotone nonincrease and
        // exact termination are what actually hold.
        let sys = IfsSystem::dyadic();
        let start = Measure::uniform(alpha2());
        let (_, trace) = hutchinson_iterate(&sys, &third_weights(), 3, &start, 50).unwrap();
        assert_eq!(trace, vec![rat(7, 18), rat(1, 3), rat(0, 1)]);
        assert!(trace[1].clone() / trace[0].clone() > rat(2, 3));
        for pair in trace.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
    }

    #[test]
    fn chaos_game_is_deterministic_and_normalized() {
        let sys = IfsSystem::dyadic();
        let w = vec![rat(1, 2), rat(1, 2)];
        let a = chaos_game(&sys, &w, 2000, 7, 3).unwrap();
        let b = chaos_game(&sys, &w, 2000, 7, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total_mass(), rat(1, 1));
        let c = chaos_game(&sys, &w, 2000, 8, 3).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn chaos_game_approximates_the_product_measure() {
        let sys = IfsSystem::dyadic();
        let w = vec![rat(1, 2), rat(1, 2)];
        let samples = 20_000u64;
        let emp = chaos_game(&sys, &w, samples, 11, 3).unwrap();
        let exact = hutchinson_fixed_point(&sys, &w, 3).unwrap();
        // Loose 5-sigma envelope per cell keeps this robust.
        let q = 1.0 / 8.0;
        let bound = 5.0 * (q * (1.0 - q) / samples as f64).sqrt();
        for cell in alpha2().words(3) {
            let dev = crate::rational::to_f64(
                &(emp.cylinder_mass(&cell).unwrap() - exact.cylinder_mass(&cell).unwrap()),
            )
            .abs();
            assert!(dev <= bound, "cell {cell} deviates by {dev}");
        }
    }

    #[test]
    fn combine_branch_pushforwards_recovers_the_cantor_measure() {
        let m = Measure::uniform(alpha2());
        let p1 = m.pushforward_branch(1).unwrap();
        let p2 = m.pushforward_branch(2).unwrap();
        let mixed = convex_combine(&[rat(1, 2), rat(1, 2)], &[&p1, &p2]).unwrap();
        for depth in 0..=8 {
            assert_eq!(l1_distance(&mixed, &m, depth).unwrap(), rat(0, 1));
        }
    }

    #[test]
    fn combine_freezes_mixed_models() {
        let a = Measure::uniform(alpha2());
        let b = Measure::bernoulli(alpha2(), third_weights()).unwrap();
        let mixed = convex_combine(&[rat(1, 2), rat(1, 2)], &[&a, &b]).unwrap();
        assert_eq!(mixed.cylinder_part().model(), &RefinementModel::Frozen);
        // A zero coefficient drops its input entirely, model included.
        let kept = convex_combine(&[rat(1, 1), rat(0, 1)], &[&a, &b]).unwrap();
        assert_eq!(kept.cylinder_part().model(), &RefinementModel::Uniform);
        assert!(convex_combine(&[rat(-1, 1)], &[&a]).is_err());
    }

    #[test]
    fn combine_merges_coinciding_atoms() {
        let a = Measure::dirac(alpha2(), pw(&[], &[1, 2])).unwrap();
        // Same point written with the period unrolled once.
        let b = Measure::dirac(alpha2(), pw(&[1], &[2, 1])).unwrap();
        let both = convex_combine(&[rat(1, 1), rat(2, 1)], &[&a, &b]).unwrap();
        assert_eq!(both.atomic_part().atoms().count(), 1);
        assert_eq!(both.point_mass(&pw(&[], &[1, 2])).unwrap(), rat(3, 1));
    }

    #[test]
    fn from_parts_validates_shape() {
        assert!(Measure::from_parts(
            alpha2(),
            2,
            RefinementModel::Uniform,
            vec![(fw(&[1]), rat(1, 1))],
            vec![],
        )
        .is_err());
        assert!(Measure::from_parts(
            alpha2(),
            1,
            RefinementModel::Uniform,
            vec![(fw(&[1]), rat(-1, 1))],
            vec![],
        )
        .is_err());
        assert!(Measure::from_parts(
            alpha2(),
            0,
            RefinementModel::Uniform,
            vec![],
            vec![(fw(&[1]), rat(1, 1))],
        )
        .is_err());
        assert!(Measure::from_parts(
            alpha2(),
            0,
            RefinementModel::Bernoulli(vec![rat(1, 2)]),
            vec![],
            vec![],
        )
        .is_err());
    }

    // ------------------------------------------------------------------
    // Property tests
    // ------------------------------------------------------------------

    fn arb_measure() -> impl Strategy<Value = Measure> {
        let cell_mass = (0u32..4).prop_map(|n| rat(n as i64, 4));
        let atom = (
            prop::collection::vec(1u32..=2, 0..3),
            prop::collection::vec(1u32..=2, 1..3),
            1u32..3,
        );
        (
            prop::collection::vec(cell_mass, 4),
            prop::collection::vec(atom, 0..2),
            prop_oneof![
                Just(RefinementModel::Uniform),
                Just(RefinementModel::Bernoulli(vec![rat(1, 3), rat(2, 3)])),
            ],
        )
            .prop_map(|(cells, atoms, model)| {
                let alphabet = Alphabet::new(2).unwrap();
                let words = alphabet.words(2);
                let masses = words.into_iter().zip(cells).collect();
                let atoms = atoms
                    .into_iter()
                    .map(|(prefix, period, m)| {
                        (
                            Word::periodic(alphabet, &prefix, &period).unwrap(),
                            rat(m as i64, 2),
                        )
                    })
                    .collect();
                Measure::from_parts(alphabet, 2, model, masses, atoms).unwrap()
            })
    }

    proptest! {
        #[test]
        fn refinement_preserves_cylinder_masses(m in arb_measure(), extra in 1usize..3) {
            let fine = m.at_depth(m.depth() + extra).unwrap();
            for w in Alphabet::new(2).unwrap().words(m.depth()) {
                prop_assert_eq!(
                    fine.cylinder_mass(&w).unwrap(),
                    m.cylinder_mass(&w).unwrap()
                );
            }
        }

        #[test]
        fn branch_pushforward_preserves_total_mass(m in arb_measure(), branch in 1u32..=2) {
            let pushed = m.pushforward_branch(branch).unwrap();
            prop_assert_eq!(pushed.total_mass(), m.total_mass());
        }

        #[test]
        fn sigma_undoes_branch_pushforward(m in arb_measure(), branch in 1u32..=2) {
            let back = m.pushforward_branch(branch).unwrap().pushforward_sigma().unwrap();
            prop_assert_eq!(l1_distance(&back, &m, m.depth()).unwrap(), rat(0, 1));
        }

        #[test]
        fn deep_cylinder_masses_sum_to_parent(m in arb_measure(), w_labels in prop::collection::vec(1u32..=2, 0..3)) {
            let w = Word::finite(Alphabet::new(2).unwrap(), &w_labels).unwrap();
            let children: Rational = (1..=2u32)
                .map(|j| {
                    let child = w.child(Alphabet::new(2).unwrap().symbol(j).unwrap());
                    m.cylinder_mass(&child).unwrap()
                })
                .sum();
            prop_assert_eq!(children, m.cylinder_mass(&w).unwrap());
        }
    }
}
