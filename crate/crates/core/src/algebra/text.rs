//! Line-oriented text form of Hamiltonians:
//! `(re,im)  I:[(1),(3)]  q:[(1),(3)|(2),(2)]  S3`.
//!
//! Floats use the shortest representation that parses back to the same value.

use num_complex::Complex64;

use super::classify::{Bucket, ClassifiedHamiltonian};
use super::monomial::MonoKey;
use super::polynomial::Polynomial;
use crate::error::{Error, Result};
use crate::lattice::LatticeVector;

fn join(v: &[LatticeVector]) -> String {
    v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")
}

pub fn format_term(key: &MonoKey, c: Complex64, bucket: Option<Bucket>) -> String {
    let mut s = format!(
        "({:?},{:?})  I:[{}]  q:[{}|{}]",
        c.re,
        c.im,
        join(key.actions.entries()),
        join(key.osc.upper()),
        join(key.osc.lower())
    );
    if let Some(b) = bucket {
        s.push_str("  ");
        s.push_str(b.label());
    }
    s
}

fn parse_vectors(s: &str) -> Result<Vec<LatticeVector>> {
    let mut out = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        let end = rest
            .find(')')
            .ok_or_else(|| Error::Parse(format!("vector list {s:?}")))?;
        out.push(LatticeVector::parse(&rest[..=end])?);
        rest = rest[end + 1..].trim_start_matches(',').trim();
    }
    Ok(out)
}

pub fn parse_term(line: &str) -> Result<(MonoKey, Complex64, Option<Bucket>)> {
    let bad = || Error::Parse(format!("term line {line:?}"));
    let line = line.trim();
    let close = line.find(')').ok_or_else(bad)?;
    let coeff = line.get(1..close).ok_or_else(bad)?;
    let (re, im) = coeff.split_once(',').ok_or_else(bad)?;
    let parse_f = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let c = Complex64::new(parse_f(re)?, parse_f(im)?);
    let rest = &line[close + 1..];
    let i_start = rest.find("I:[").ok_or_else(bad)? + 3;
    let i_end = i_start + rest[i_start..].find(']').ok_or_else(bad)?;
    let actions = parse_vectors(&rest[i_start..i_end])?;
    let q_start = rest.find("q:[").ok_or_else(bad)? + 3;
    let q_end = q_start + rest[q_start..].find(']').ok_or_else(bad)?;
    let (u, l) = rest[q_start..q_end].split_once('|').ok_or_else(bad)?;
    let key = MonoKey::new(&actions, &parse_vectors(u)?, &parse_vectors(l)?)?;
    let tail = rest[q_end + 1..].trim();
    let bucket = if tail.is_empty() {
        None
    } else {
        Some(tail.parse()?)
    };
    Ok((key, c, bucket))
}

pub fn format_polynomial(p: &Polynomial) -> String {
    p.iter()
        .map(|(k, c)| format_term(k, *c, None) + "\n")
        .collect()
}

pub fn parse_polynomial(text: &str) -> Result<Polynomial> {
    let mut p = Polynomial::new();
    for line in text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
        let (k, c, _) = parse_term(line)?;
        p.add_term(k, c);
    }
    Ok(p)
}

/// One line per monomial tagged with its bucket; `Sigma_7` lines carry the
/// coefficient without its `eps^A` prefactor.
pub fn format_classified(h: &ClassifiedHamiltonian) -> String {
    let mut s = String::new();
    for (b, p) in h.buckets() {
        for (k, c) in p.iter() {
            s.push_str(&format_term(k, *c, Some(b)));
            s.push('\n');
        }
    }
    s
}

/// Parses the bucketed form into (untagged polynomial, tagged `Sigma_7`).
pub fn parse_classified(text: &str) -> Result<(Polynomial, Polynomial)> {
    let mut untagged = Polynomial::new();
    let mut tagged = Polynomial::new();
    for line in text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
        let (k, c, b) = parse_term(line)?;
        if b == Some(Bucket::S7) {
            tagged.add_term(k, c);
        } else {
            untagged.add_term(k, c);
        }
    }
    Ok((untagged, tagged))
}
