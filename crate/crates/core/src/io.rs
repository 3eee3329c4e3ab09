//! Serialization and text parsing.
//!
//! Measures travel as JSON documents under the `ifs-cuntz/v1` schema, with
//! every mass an exact `num`/`den` string pair. Words appear in 0-based
//! digit form, concatenated for alphabets up to ten symbols and
//! dot-separated beyond that. The remaining helpers parse the compact
//! command-line notations for systems, weight vectors, representations, and
//! test vectors.

use serde::{Deserialize, Serialize};

use crate::coding::{AffineMap, Alphabet, IfsSystem, Word};
use crate::cuntz::{IndexMap, PermutativeRep, RepVector};
use crate::error::{Error, Result};
use crate::measure::{Measure, RefinementModel};
use crate::rational::parse_rational;
use crate::{Rational, C64};

pub const SCHEMA: &str = "ifs-cuntz/v1";

// ============================================================================
// Words as digit strings
// ============================================================================

fn format_digits(symbols: &[crate::coding::Symbol]) -> String {
    let digits: Vec<String> = symbols.iter().map(|s| s.digit().to_string()).collect();
    if symbols.iter().any(|s| s.digit() >= 10) {
        digits.join(".")
    } else {
        digits.concat()
    }
}

fn parse_digits(alphabet: Alphabet, s: &str) -> Result<Vec<u32>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    let digits: Vec<u32> = if s.contains('.') {
        s.split('.')
            .map(|part| {
                part.parse::<u32>()
                    .map_err(|_| Error::Parse(format!("bad digit {part:?} in word {s:?}")))
            })
            .collect::<Result<_>>()?
    } else {
        s.chars()
            .map(|ch| {
                ch.to_digit(10)
                    .ok_or_else(|| Error::Parse(format!("bad digit {ch:?} in word {s:?}")))
            })
            .collect::<Result<_>>()?
    };
    digits
        .into_iter()
        .map(|d| Ok(alphabet.symbol_from_digit(d)?.label()))
        .collect()
}

/// Finite word as a 0-based digit string.
pub fn format_finite_word(w: &Word) -> Result<String> {
    if !w.is_finite() {
        return Err(Error::NotFinite);
    }
    // Digit grouping depends only on whether any digit needs two decimals,
    // which the word itself knows how to render.
    Ok(w.to_string())
}

pub fn parse_finite_word(alphabet: Alphabet, s: &str) -> Result<Word> {
    Word::finite(alphabet, &parse_digits(alphabet, s)?)
}

/// Eventually periodic word as (prefix, period) digit strings.
pub fn format_point(w: &Word) -> (String, String) {
    (format_digits(w.prefix()), format_digits(w.period()))
}

pub fn parse_point(alphabet: Alphabet, prefix: &str, period: &str) -> Result<Word> {
    Word::periodic(
        alphabet,
        &parse_digits(alphabet, prefix)?,
        &parse_digits(alphabet, period)?,
    )
}

// ============================================================================
// Measures as JSON
// ============================================================================

#[derive(Serialize, Deserialize)]
struct MeasureDoc {
    schema: String,
    kind: String,
    alphabet: u32,
    depth: usize,
    model: String,
    masses: Vec<(String, String, String)>,
    atoms: Vec<(String, String, String, String)>,
}

fn format_model(model: &RefinementModel) -> String {
    match model {
        RefinementModel::Uniform => "uniform".into(),
        RefinementModel::Frozen => "frozen".into(),
        RefinementModel::Bernoulli(weights) => {
            let parts: Vec<String> = weights.iter().map(|w| w.to_string()).collect();
            format!("bernoulli:{}", parts.join(","))
        }
    }
}

fn parse_model(s: &str) -> Result<RefinementModel> {
    match s {
        "uniform" => Ok(RefinementModel::Uniform),
        "frozen" => Ok(RefinementModel::Frozen),
        _ => match s.strip_prefix("bernoulli:") {
            Some(list) => Ok(RefinementModel::Bernoulli(parse_weights(list)?)),
            None => Err(Error::Parse(format!(
                "unknown refinement model {s:?}; expected uniform, frozen, or bernoulli:<weights>"
            ))),
        },
    }
}

fn split_rational(r: &Rational) -> (String, String) {
    (r.numer().to_string(), r.denom().to_string())
}

fn join_rational(num: &str, den: &str) -> Result<Rational> {
    parse_rational(&format!("{num}/{den}"))
}

/// Renders a measure as a self-contained JSON document with exact masses.
pub fn measure_to_json(m: &Measure) -> String {
    let alphabet = m.alphabet();
    let masses = m
        .cylinder_part()
        .masses()
        .map(|(w, mass)| {
            let (num, den) = split_rational(mass);
            (format_digits(w.prefix()), num, den)
        })
        .collect();
    let atoms = m
        .atomic_part()
        .atoms()
        .map(|(u, mass)| {
            let (prefix, period) = format_point(u);
            let (num, den) = split_rational(mass);
            (prefix, period, num, den)
        })
        .collect();
    let doc = MeasureDoc {
        schema: SCHEMA.into(),
        kind: "measure".into(),
        alphabet: alphabet.size(),
        depth: m.depth(),
        model: format_model(m.cylinder_part().model()),
        masses,
        atoms,
    };
    serde_json::to_string_pretty(&doc).expect("measure documents always serialize")
}

pub fn measure_from_json(text: &str) -> Result<Measure> {
    let doc: MeasureDoc =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("bad measure JSON: {e}")))?;
    if doc.schema != SCHEMA {
        return Err(Error::Parse(format!(
            "unsupported schema {:?}, expected {SCHEMA:?}",
            doc.schema
        )));
    }
    if doc.kind != "measure" {
        return Err(Error::Parse(format!(
            "expected a measure document, got kind {:?}",
            doc.kind
        )));
    }
    let alphabet = Alphabet::new(doc.alphabet)?;
    let model = parse_model(&doc.model)?;
    let masses = doc
        .masses
        .iter()
        .map(|(w, num, den)| Ok((parse_finite_word(alphabet, w)?, join_rational(num, den)?)))
        .collect::<Result<Vec<_>>>()?;
    let atoms = doc
        .atoms
        .iter()
        .map(|(prefix, period, num, den)| {
            Ok((
                parse_point(alphabet, prefix, period)?,
                join_rational(num, den)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Measure::from_parts(alphabet, doc.depth, model, masses, atoms)
}

// ============================================================================
// Command-line notations
// ============================================================================

/// Comma-separated rationals: `"1/3,2/3"`.
pub fn parse_weights(s: &str) -> Result<Vec<Rational>> {
    s.split(',').map(parse_rational).collect()
}

/// System specs: `dyadic`, `cantor`, `symbolic:<n>`, or
/// `affine:<slope>,<offset>;...` with rational entries.
pub fn parse_system(spec: &str) -> Result<IfsSystem> {
    match spec {
        "dyadic" => return Ok(IfsSystem::dyadic()),
        "cantor" => return Ok(IfsSystem::cantor()),
        _ => {}
    }
    if let Some(n) = spec.strip_prefix("symbolic:") {
        let n: u32 = n
            .parse()
            .map_err(|_| Error::Parse(format!("bad branch count in {spec:?}")))?;
        return IfsSystem::symbolic(n);
    }
    if let Some(list) = spec.strip_prefix("affine:") {
        let maps = list
            .split(';')
            .map(|pair| {
                let (slope, offset) = pair.split_once(',').ok_or_else(|| {
                    Error::Parse(format!("expected <slope>,<offset> in {pair:?}"))
                })?;
                Ok(AffineMap::new(parse_rational(slope)?, parse_rational(offset)?))
            })
            .collect::<Result<Vec<_>>>()?;
        return IfsSystem::affine(maps);
    }
    Err(Error::Parse(format!(
        "unknown system {spec:?}; expected dyadic, cantor, symbolic:<n>, or affine:<maps>"
    )))
}

/// Representation specs: `torus` or `maps:<scale>,<offset>;...`.
pub fn parse_rep(spec: &str) -> Result<PermutativeRep> {
    if spec == "torus" {
        return Ok(PermutativeRep::torus());
    }
    if let Some(list) = spec.strip_prefix("maps:") {
        let maps = list
            .split(';')
            .map(|pair| {
                let (scale, offset) = pair.split_once(',').ok_or_else(|| {
                    Error::Parse(format!("expected <scale>,<offset> in {pair:?}"))
                })?;
                let scale: i64 = scale
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad scale in {pair:?}")))?;
                let offset: i64 = offset
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad offset in {pair:?}")))?;
                IndexMap::new(scale, offset)
            })
            .collect::<Result<Vec<_>>>()?;
        let n = u32::try_from(maps.len()).map_err(|_| Error::IndexOverflow)?;
        return PermutativeRep::new(Alphabet::new(n)?, maps);
    }
    Err(Error::Parse(format!(
        "unknown representation {spec:?}; expected torus or maps:<scale>,<offset>;..."
    )))
}

/// Vector specs: `<index>:<re>[:<im>]` entries joined by `;`, e.g.
/// `0:0.5;3:1:2;-2:-1`.
pub fn parse_rep_vector(s: &str) -> Result<RepVector> {
    let mut entries = Vec::new();
    for part in s.split(';') {
        let fields: Vec<&str> = part.split(':').collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(Error::Parse(format!(
                "expected <index>:<re>[:<im>], got {part:?}"
            )));
        }
        let n: i64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad index in {part:?}")))?;
        let parse_component = |f: &str| -> Result<f64> {
            f.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad coefficient in {part:?}")))
        };
        let re = parse_component(fields[1])?;
        let im = if fields.len() == 3 {
            parse_component(fields[2])?
        } else {
            0.0
        };
        entries.push((n, C64::new(re, im)));
    }
    Ok(RepVector::from_coeffs(entries))
}

// ============================================================================
// Tests
// ============================================================================
