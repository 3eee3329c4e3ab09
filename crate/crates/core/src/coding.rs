//! Coding spaces: alphabets, eventually periodic words, and branch geometry.
//!
//! The coding space over an alphabet of size `N` is the set of infinite
//! sequences of symbols `1..=N`. Finite words address cylinder sets, and
//! eventually periodic words address single points. The left shift `sigma`
//! drops the first symbol; the branch `tau_i` prepends `i`, so
//! `sigma . tau_i = id` holds by construction.
//!
//! A system may carry a metric realization on the unit interval: each branch
//! acts as an affine contraction `x -> a_i x + b_i`, and the address map sends
//! a word to the corresponding point or cylinder interval. The two stock
//! realizations are the dyadic system (`x/2`, `(x+1)/2` on `[0,1)`) and the
//! middle-third Cantor system (`x/3`, `(x+2)/3`).

use std::collections::BTreeSet;
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::rat;
use crate::Rational;

// ============================================================================
// Symbols and alphabets
// ============================================================================

/// One branch label. Labels are 1-based: the symbols of an alphabet of size
/// `N` are `1..=N`. Serialized forms use 0-based digits instead; see
/// [`Word`]'s `Display`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Symbol(u32);

impl Symbol {
    /// 1-based label.
    pub fn label(self) -> u32 {
        self.0
    }

    /// 0-based position, for indexing per-branch tables.
    pub fn index(self) -> usize {
        (self.0 - 1) as usize
    }

    /// 0-based digit used in serialized words.
    pub fn digit(self) -> u32 {
        self.0 - 1
    }
}

/// Symbol set `{1, ..., N}` with `N >= 2`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Alphabet {
    size: u32,
}

impl Alphabet {
    pub fn new(size: u32) -> Result<Alphabet> {
        if size < 2 {
            return Err(Error::InvalidSystem(format!(
                "alphabet needs at least 2 symbols, got {size}"
            )));
        }
        Ok(Alphabet { size })
    }

    pub fn size(self) -> u32 {
        self.size
    }

    /// Validates a 1-based label.
    pub fn symbol(self, label: u32) -> Result<Symbol> {
        if label == 0 || label > self.size {
            return Err(Error::BranchOutOfRange {
                branch: label,
                size: self.size,
            });
        }
        Ok(Symbol(label))
    }

    /// Validates a 0-based digit, as found in serialized words.
    pub fn symbol_from_digit(self, digit: u32) -> Result<Symbol> {
        self.symbol(digit.checked_add(1).ok_or(Error::BranchOutOfRange {
            branch: u32::MAX,
            size: self.size,
        })?)
    }

    pub fn symbols(self) -> impl Iterator<Item = Symbol> {
        (1..=self.size).map(Symbol)
    }

    /// All finite words of the given length, in lexicographic order.
    pub fn words(self, len: usize) -> Vec<Word> {
        let mut out = vec![Word::empty()];
        for _ in 0..len {
            let mut next = Vec::with_capacity(out.len() * self.size as usize);
            for w in &out {
                for s in self.symbols() {
                    next.push(w.child(s));
                }
            }
            out = next;
        }
        out
    }
}

// ============================================================================
// Words
// ============================================================================

/// A finite or eventually periodic word.
///
/// With an empty period this is a finite word and addresses the cylinder of
/// sequences starting with `prefix`. With a nonempty period it is the
/// infinite sequence `prefix . period . period . ...` and addresses a single
/// point.
///
/// Construction canonicalizes: the period is reduced to its primitive root,
/// and any trailing prefix symbols that merely repeat the period are folded
/// into it (popping the prefix and rotating the period right). Two eventually
/// periodic words describe the same sequence exactly when their canonical
/// forms are equal, so derived equality is point equality.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Word {
    prefix: Vec<Symbol>,
    period: Vec<Symbol>,
}

impl Word {
    /// The empty finite word (the whole space as a cylinder).
    pub fn empty() -> Word {
        Word {
            prefix: Vec::new(),
            period: Vec::new(),
        }
    }

    /// Finite word from 1-based labels.
    pub fn finite(alphabet: Alphabet, labels: &[u32]) -> Result<Word> {
        let prefix = labels
            .iter()
            .map(|&l| alphabet.symbol(l))
            .collect::<Result<Vec<_>>>()?;
        Ok(Word {
            prefix,
            period: Vec::new(),
        })
    }

    /// Eventually periodic word from 1-based labels. The period must be
    /// nonempty; the result is canonicalized.
    pub fn periodic(alphabet: Alphabet, prefix: &[u32], period: &[u32]) -> Result<Word> {
        if period.is_empty() {
            return Err(Error::InvalidMeasure(
                "an eventually periodic word needs a nonempty period".into(),
            ));
        }
        let prefix = prefix
            .iter()
            .map(|&l| alphabet.symbol(l))
            .collect::<Result<Vec<_>>>()?;
        let period = period
            .iter()
            .map(|&l| alphabet.symbol(l))
            .collect::<Result<Vec<_>>>()?;
        Ok(Word::from_symbols(prefix, period))
    }

    /// Canonicalizing constructor over validated symbols.
    pub(crate) fn from_symbols(prefix: Vec<Symbol>, period: Vec<Symbol>) -> Word {
        let mut w = Word { prefix, period };
        w.canonicalize();
        w
    }

    fn canonicalize(&mut self) {
        if self.period.is_empty() {
            return;
        }
        // Reduce the period to its primitive root.
        let p = self.period.len();
        for d in 1..p {
            if p.is_multiple_of(d) && (0..p).all(|k| self.period[k] == self.period[k % d]) {
                self.period.truncate(d);
                break;
            }
        }
        // Fold prefix symbols that already follow the periodic pattern.
        while let (Some(&pl), Some(&ql)) = (self.prefix.last(), self.period.last()) {
            if pl != ql {
                break;
            }
            self.prefix.pop();
            self.period.rotate_right(1);
        }
    }

    pub fn prefix(&self) -> &[Symbol] {
        &self.prefix
    }

    pub fn period(&self) -> &[Symbol] {
        &self.period
    }

    pub fn is_finite(&self) -> bool {
        self.period.is_empty()
    }

    /// True for eventually periodic words, which address single points.
    pub fn is_point(&self) -> bool {
        !self.period.is_empty()
    }

    /// Length of a finite word. For point words this is the prefix length,
    /// not a sequence length.
    pub fn len(&self) -> usize {
        self.prefix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefix.is_empty() && self.period.is_empty()
    }

    /// Symbol at position `k` (0-based) of the full sequence.
    pub fn symbol_at(&self, k: usize) -> Result<Symbol> {
        if k < self.prefix.len() {
            return Ok(self.prefix[k]);
        }
        if self.period.is_empty() {
            return Err(Error::PastEnd {
                len: self.prefix.len(),
                index: k,
            });
        }
        Ok(self.period[(k - self.prefix.len()) % self.period.len()])
    }

    /// First `k` symbols of the sequence. Errors for finite words shorter
    /// than `k`.
    pub fn expand(&self, k: usize) -> Result<Vec<Symbol>> {
        (0..k).map(|i| self.symbol_at(i)).collect()
    }

    /// True when this word's sequence starts with the whole finite word `w`.
    pub fn starts_with(&self, w: &Word) -> bool {
        debug_assert!(w.is_finite());
        match self.expand(w.len()) {
            Ok(head) => head == w.prefix,
            Err(_) => false,
        }
    }

    /// The branch action `tau_s`: prepend `s`.
    pub fn prepend(&self, s: Symbol) -> Word {
        let mut prefix = Vec::with_capacity(self.prefix.len() + 1);
        prefix.push(s);
        prefix.extend_from_slice(&self.prefix);
        Word::from_symbols(prefix, self.period.clone())
    }

    /// The shift action `sigma`: drop the first symbol. Errors on the empty
    /// finite word.
    pub fn shift(&self) -> Result<Word> {
        if !self.prefix.is_empty() {
            let mut prefix = self.prefix.clone();
            prefix.remove(0);
            return Ok(Word::from_symbols(prefix, self.period.clone()));
        }
        if self.period.is_empty() {
            return Err(Error::EmptyWord);
        }
        let mut period = self.period.clone();
        period.rotate_left(1);
        Ok(Word::from_symbols(Vec::new(), period))
    }

    /// Finite word extended by one symbol on the right: the cylinder child
    /// `w . s`.
    pub fn child(&self, s: Symbol) -> Word {
        debug_assert!(self.is_finite());
        let mut prefix = self.prefix.clone();
        prefix.push(s);
        Word {
            prefix,
            period: Vec::new(),
        }
    }

    /// Parent cylinder of a nonempty finite word, with the removed last
    /// symbol.
    pub fn split_last(&self) -> Option<(Word, Symbol)> {
        debug_assert!(self.is_finite());
        let mut prefix = self.prefix.clone();
        let last = prefix.pop()?;
        Some((
            Word {
                prefix,
                period: Vec::new(),
            },
            last,
        ))
    }
}

/// Digits are 0-based in the serialized form: symbol 1 prints as `0`. For
/// alphabets past size 10 digits are dot-separated. Finite words print as the
/// digit string, eventually periodic ones as `prefix(period)`.
impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn digits(symbols: &[Symbol]) -> String {
            if symbols.iter().all(|s| s.digit() < 10) {
                symbols.iter().map(|s| s.digit().to_string()).collect()
            } else {
                let parts: Vec<String> = symbols.iter().map(|s| s.digit().to_string()).collect();
                parts.join(".")
            }
        }
        if self.is_finite() {
            write!(f, "{}", digits(&self.prefix))
        } else {
            write!(f, "{}({})", digits(&self.prefix), digits(&self.period))
        }
    }
}

// ============================================================================
// Geometry
// ============================================================================

/// One affine branch `x -> slope * x + offset` with exact coefficients.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AffineMap {
    pub slope: Rational,
    pub offset: Rational,
}

impl AffineMap {
    pub fn new(slope: Rational, offset: Rational) -> AffineMap {
        AffineMap { slope, offset }
    }

    pub fn apply(&self, x: &Rational) -> Rational {
        &self.slope * x + &self.offset
    }

    pub fn invert(&self, y: &Rational) -> Rational {
        (y - &self.offset) / &self.slope
    }

    /// `self . other` as a single affine map.
    fn after(&self, other: &AffineMap) -> AffineMap {
        AffineMap {
            slope: &self.slope * &other.slope,
            offset: &self.slope * &other.offset + &self.offset,
        }
    }

    fn identity() -> AffineMap {
        AffineMap {
            slope: Rational::one(),
            offset: Rational::zero(),
        }
    }
}

/// Metric realization of a system.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Geometry {
    /// Pure coding space; address and diameter queries are unavailable.
    SymbolicOnly,
    /// Affine branches tiling `[0, 1)`; adjacent branch images share
    /// endpoints, so distinct words can address the same point.
    AffineInterval(Vec<AffineMap>),
    /// `x/3` and `(x+2)/3` on the middle-third Cantor set. Branch images are
    /// separated by the removed gap, so addresses are injective.
    CantorMiddleThird,
}

/// Address of a word under a metric realization: a point for eventually
/// periodic words, the convex hull `[lo, hi]` of the cylinder for finite
/// ones.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Address {
    Point(Rational),
    Interval { lo: Rational, hi: Rational },
}

// ============================================================================
// Systems
// ============================================================================

/// A branch system over an alphabet, with optional metric realization and an
/// optional restriction to a subset of the branches.
///
/// The restriction models a system whose branch images no longer cover the
/// space; intact systems satisfy the full cover `union tau_i(X) = X`.
#[derive(Clone, PartialEq, Debug)]
pub struct IfsSystem {
    alphabet: Alphabet,
    geometry: Geometry,
    maps: Option<Vec<AffineMap>>,
    present: BTreeSet<Symbol>,
}

impl IfsSystem {
    /// Coding space over `n` symbols with no metric realization.
    pub fn symbolic(n: u32) -> Result<IfsSystem> {
        let alphabet = Alphabet::new(n)?;
        Ok(IfsSystem {
            alphabet,
            geometry: Geometry::SymbolicOnly,
            maps: None,
            present: alphabet.symbols().collect(),
        })
    }

    /// Binary system `x/2`, `(x+1)/2` on `[0, 1)`.
    pub fn dyadic() -> IfsSystem {
        IfsSystem::affine(vec![
            AffineMap::new(rat(1, 2), rat(0, 1)),
            AffineMap::new(rat(1, 2), rat(1, 2)),
        ])
        .expect("dyadic maps tile the interval")
    }

    /// Middle-third Cantor system `x/3`, `(x+2)/3`.
    pub fn cantor() -> IfsSystem {
        let alphabet = Alphabet::new(2).expect("two symbols");
        IfsSystem {
            alphabet,
            geometry: Geometry::CantorMiddleThird,
            maps: Some(vec![
                AffineMap::new(rat(1, 3), rat(0, 1)),
                AffineMap::new(rat(1, 3), rat(2, 3)),
            ]),
            present: alphabet.symbols().collect(),
        }
    }

    /// System of affine branches tiling `[0, 1)`. Branch `i` is `maps[i-1]`.
    ///
    /// Slopes must lie in `(0, 1)` and the images `[b_i, a_i + b_i)`, taken
    /// in the given order, must partition `[0, 1)` left to right. Tiling
    /// makes the full-cover property equivalent to all branches being
    /// present.
    pub fn affine(maps: Vec<AffineMap>) -> Result<IfsSystem> {
        let alphabet = Alphabet::new(maps.len() as u32)?;
        let one = Rational::one();
        for (k, m) in maps.iter().enumerate() {
            if !m.slope.is_positive() || m.slope >= one {
                return Err(Error::InvalidSystem(format!(
                    "branch {} slope must lie in (0, 1)",
                    k + 1
                )));
            }
        }
        let mut edge = Rational::zero();
        for (k, m) in maps.iter().enumerate() {
            if m.offset != edge {
                return Err(Error::InvalidSystem(format!(
                    "branch {} image starts at {}, expected {} for a tiling",
                    k + 1,
                    m.offset,
                    edge
                )));
            }
            edge = &m.slope + &m.offset;
        }
        if edge != one {
            return Err(Error::InvalidSystem(format!(
                "branch images end at {edge}, expected 1"
            )));
        }
        Ok(IfsSystem {
            alphabet,
            geometry: Geometry::AffineInterval(maps.clone()),
            maps: Some(maps),
            present: alphabet.symbols().collect(),
        })
    }

    /// Restricts the system to a subset of its branches (1-based labels).
    pub fn with_branches(mut self, branches: &[u32]) -> Result<IfsSystem> {
        if branches.is_empty() {
            return Err(Error::InvalidSystem(
                "branch restriction must keep at least one branch".into(),
            ));
        }
        let mut present = BTreeSet::new();
        for &b in branches {
            present.insert(self.alphabet.symbol(b)?);
        }
        self.present = present;
        Ok(self)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Branches the system currently uses.
    pub fn present_branches(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.present.iter().copied()
    }

    pub fn is_present(&self, s: Symbol) -> bool {
        self.present.contains(&s)
    }

    /// True when the branch images cover the whole space, which for these
    /// systems means no branch has been removed.
    pub fn is_full_cover(&self) -> bool {
        self.present.len() == self.alphabet.size() as usize
    }

    fn require_present(&self, s: Symbol) -> Result<()> {
        if self.is_present(s) {
            Ok(())
        } else {
            Err(Error::BranchNotPresent { branch: s.label() })
        }
    }

    fn affine_maps(&self) -> Result<&[AffineMap]> {
        self.maps.as_deref().ok_or(Error::UnsupportedGeometry)
    }

    fn branch_map(&self, s: Symbol) -> Result<&AffineMap> {
        Ok(&self.affine_maps()?[s.index()])
    }

    // ------------------------------------------------------------------
    // Symbol dynamics
    // ------------------------------------------------------------------

    /// `tau_i` on words: prepend the branch symbol.
    pub fn apply_branch(&self, branch: u32, w: &Word) -> Result<Word> {
        let s = self.alphabet.symbol(branch)?;
        self.require_present(s)?;
        Ok(w.prepend(s))
    }

    /// `sigma` on words: drop the first symbol.
    pub fn apply_sigma(&self, w: &Word) -> Result<Word> {
        w.shift()
    }

    // ------------------------------------------------------------------
    // Metric queries
    // ------------------------------------------------------------------

    /// Diameter of `tau_{w_1} ... tau_{w_k}(X)`: the product of the branch
    /// contraction ratios. Exact, and independent of the branch restriction.
    pub fn composed_image_diameter(&self, w: &Word) -> Result<Rational> {
        if !w.is_finite() {
            return Err(Error::NotFinite);
        }
        let maps = self.affine_maps()?;
        let mut d = Rational::one();
        for s in w.prefix() {
            d *= &maps[s.index()].slope;
        }
        Ok(d)
    }

    /// True when cylinder diameters shrink to zero with depth. Holds for the
    /// affine realizations by contractivity, and for the symbolic space under
    /// its standard ultrametric.
    pub fn diameters_vanish(&self) -> bool {
        true
    }

    /// Composite `tau_{w_1} . ... . tau_{w_k}` as one affine map.
    fn composed_map(&self, symbols: &[Symbol]) -> Result<AffineMap> {
        let maps = self.affine_maps()?;
        let mut acc = AffineMap::identity();
        for s in symbols.iter().rev() {
            acc = maps[s.index()].after(&acc);
        }
        Ok(acc)
    }

    /// Address of a word: the exact point for eventually periodic words, the
    /// hull `[lo, hi]` of the cylinder image for finite ones.
    pub fn address(&self, w: &Word) -> Result<Address> {
        let head = self.composed_map(w.prefix())?;
        if w.is_finite() {
            let lo = head.apply(&Rational::zero());
            let hi = head.apply(&Rational::one());
            return Ok(Address::Interval { lo, hi });
        }
        let cycle = self.composed_map(w.period())?;
        // Fixed point of the period composite; the slope is < 1 so the
        // denominator cannot vanish.
        let fix = cycle.offset.clone() / (Rational::one() - cycle.slope);
        Ok(Address::Point(head.apply(&fix)))
    }

    /// Address of an eventually periodic word as a point.
    pub fn address_point(&self, w: &Word) -> Result<Rational> {
        match self.address(w)? {
            Address::Point(x) => Ok(x),
            Address::Interval { .. } => Err(Error::NotFinite),
        }
    }

    /// `tau_i` on attractor points.
    pub fn branch_point(&self, branch: u32, x: &Rational) -> Result<Rational> {
        let s = self.alphabet.symbol(branch)?;
        self.require_present(s)?;
        Ok(self.branch_map(s)?.apply(x))
    }

    /// `sigma` on attractor points: invert the branch whose image contains
    /// `x`. For the dyadic system this is `2x mod 1`; for the Cantor system,
    /// `3x mod 1` on the two outer thirds. Points in a removed gap have no
    /// address and are rejected.
    pub fn sigma_point(&self, x: &Rational) -> Result<Rational> {
        let maps = self.affine_maps()?;
        if x.is_negative() || x > &Rational::one() {
            return Err(Error::OutsideDomain {
                point: x.to_string(),
            });
        }
        // Prefer the branch whose half-open image [b, a+b) contains x; the
        // point 1 belongs to the closure of the last image.
        let mut fallback = None;
        for m in maps {
            let lo = &m.offset;
            let hi = &m.slope + &m.offset;
            if x >= lo && *x < hi {
                return Ok(m.invert(x));
            }
            if *x == hi {
                fallback = Some(m.invert(x));
            }
        }
        fallback.ok_or(Error::OutsideDomain {
            point: x.to_string(),
        })
    }

    // ------------------------------------------------------------------
    // Boundary identifications
    // ------------------------------------------------------------------

    /// True when distinct words can address the same point. Tiling interval
    /// systems identify each cylinder's right endpoint with its neighbor's
    /// left endpoint; the Cantor system's gaps keep addresses injective.
    pub fn has_boundary_identifications(&self) -> bool {
        matches!(self.geometry, Geometry::AffineInterval(_))
    }

    /// Canonical representative of a point word under the geometry's address
    /// identifications. On tiling interval systems the word `u s (N N N ...)`
    /// addresses the same point as `u (s+1) (1 1 1 ...)`; the form ending in
    /// the all-1 tail is preferred. Other words (and all words on symbolic or
    /// Cantor systems) are returned unchanged.
    pub fn canonical_address_form(&self, w: &Word) -> Word {
        if !self.has_boundary_identifications() || w.is_finite() {
            return w.clone();
        }
        let n = self.alphabet.size();
        if w.period() != [Symbol(n)] {
            return w.clone();
        }
        let mut prefix = w.prefix().to_vec();
        match prefix.pop() {
            // Pure all-N word: the right endpoint of the space, no second
            // address.
            None => w.clone(),
            Some(s) => {
                // Canonical form rules out s == N here: the fold in
                // `canonicalize` would have absorbed it into the period.
                prefix.push(Symbol(s.label() + 1));
                Word::from_symbols(prefix, vec![Symbol(1)])
            }
        }
    }

    /// Point equality of two words under the geometry: canonical address
    /// forms agree.
    pub fn same_point(&self, a: &Word, b: &Word) -> bool {
        self.canonical_address_form(a) == self.canonical_address_form(b)
    }
}

// ============================================================================
// Tests
// ============================================================================
