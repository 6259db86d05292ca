//! Lattice indices in Z^d, monomial index tuples and truncated Fourier states.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 4;

/// Inline storage for index tuples; monomials of interest have few factors.
pub type IndexVec = SmallVec<[LatticeVector; 8]>;

/// A point of Z^d with `1 <= d <= MAX_DIM`. Unused coordinates are zero.
///
/// Ordering is lexicographic on the coordinates.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeVector {
    coords: [i32; MAX_DIM],
    dim: u8,
}

impl LatticeVector {
    pub fn new(coords: &[i32]) -> Self {
        Self::try_new(coords).expect("lattice dimension must be in 1..=4")
    }

    pub fn try_new(coords: &[i32]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::InvalidParameter(format!(
                "lattice dimension {} not in 1..={MAX_DIM}",
                coords.len()
            )));
        }
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Self {
            coords: c,
            dim: coords.len() as u8,
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(&vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i32] {
        &self.coords[..self.dim as usize]
    }

    pub fn norm_sq(&self) -> i64 {
        self.coords().iter().map(|&x| (x as i64) * (x as i64)).sum()
    }

    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    /// `max(|n|, 1)`: the magnitude used against cutoffs and in envelope factors.
    pub fn eff_norm(&self) -> f64 {
        self.norm().max(1.0)
    }

    /// Japanese bracket `<n> = (1 + |n|^2)^{1/2}`.
    pub fn bracket(&self) -> f64 {
        (1.0 + self.norm_sq() as f64).sqrt()
    }

    pub fn max_norm(&self) -> u32 {
        self.coords().iter().map(|x| x.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coords().iter().all(|&x| x == 0)
    }

    pub fn neg(&self) -> Self {
        let mut out = *self;
        for x in out.coords.iter_mut() {
            *x = -*x;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        for (a, b) in out.coords.iter_mut().zip(other.coords.iter()) {
            *a += b;
        }
        out.dim = self.dim.max(other.dim);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// The representative of `{n, -n}` whose leading nonzero coordinate is positive.
    pub fn is_positive_representative(&self) -> bool {
        match self.coords().iter().find(|&&x| x != 0) {
            Some(&x) => x > 0,
            None => true,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let inner = s
            .trim()
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(|| Error::Parse(format!("lattice vector {s:?}")))?;
        let coords = inner
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<i32>()
                    .map_err(|e| Error::Parse(format!("{t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::try_new(&coords)
    }
}

impl fmt::Display for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for LatticeVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LatticeVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v: Vec<i32> = Vec::deserialize(d)?;
        Self::try_new(&v).map_err(serde::de::Error::custom)
    }
}

/// All points with `|n|_inf <= k` in lexicographic order.
pub fn box_points(dim: usize, k: u32) -> Vec<LatticeVector> {
    let k = k as i32;
    let mut out = Vec::new();
    let mut cur = vec![-k; dim];
    loop {
        out.push(LatticeVector::new(&cur));
        let mut i = dim;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < k {
                cur[i] += 1;
                for c in cur.iter_mut().skip(i + 1) {
                    *c = -k;
                }
                break;
            }
        }
    }
}

/// Dense numbering of the box `|n|_inf <= k`, consistent with [`box_points`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoxIndexer {
    pub dim: usize,
    pub k: u32,
}

impl BoxIndexer {
    pub fn new(dim: usize, k: u32) -> Self {
        Self { dim, k }
    }

    pub fn len(&self) -> usize {
        (2 * self.k as usize + 1).pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, n: &LatticeVector) -> Option<usize> {
        if n.dim() != self.dim || n.max_norm() > self.k {
            return None;
        }
        let side = 2 * self.k as usize + 1;
        let mut idx = 0usize;
        for &c in n.coords() {
            idx = idx * side + (c + self.k as i32) as usize;
        }
        Some(idx)
    }
}

/// Multiset of action indices `m`, kept sorted.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct ActionIndex(IndexVec);

impl ActionIndex {
    pub fn new(mut entries: IndexVec) -> Self {
        entries.sort_unstable();
        Self(entries)
    }

    pub fn from_slice(entries: &[LatticeVector]) -> Self {
        Self::new(entries.iter().copied().collect())
    }

    pub fn empty() -> Self {
        Self(IndexVec::new())
    }

    pub fn entries(&self) -> &[LatticeVector] {
        &self.0
    }

    /// Number of entries `|m|`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn multiplicity(&self, n: &LatticeVector) -> usize {
        self.0.iter().filter(|x| *x == n).count()
    }

    /// Largest entry magnitude, 0 when empty.
    pub fn m_plus(&self) -> f64 {
        self.0.iter().map(|n| n.norm()).fold(0.0, f64::max)
    }
}

impl fmt::Debug for ActionIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0.as_slice())
    }
}

/// Oscillatory index `n = (k; p)` for `q_{k_1}..q_{k_L} qbar_{p_1}..qbar_{p_L}`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct OscIndex {
    upper: IndexVec,
    lower: IndexVec,
}

impl OscIndex {
    pub fn new(mut upper: IndexVec, mut lower: IndexVec) -> Result<Self> {
        if upper.len() != lower.len() {
            return Err(Error::MalformedMonomial(format!(
                "unbalanced tuple: {} upper vs {} lower",
                upper.len(),
                lower.len()
            )));
        }
        upper.sort_unstable();
        lower.sort_unstable();
        Ok(Self { upper, lower })
    }

    pub fn from_slices(upper: &[LatticeVector], lower: &[LatticeVector]) -> Result<Self> {
        Self::new(upper.iter().copied().collect(), lower.iter().copied().collect())
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn upper(&self) -> &[LatticeVector] {
        &self.upper
    }

    pub fn lower(&self) -> &[LatticeVector] {
        &self.lower
    }

    /// `L`, the number of `q` (equivalently `qbar`) factors.
    pub fn half_len(&self) -> usize {
        self.upper.len()
    }

    /// Degree `|n| = 2L`.
    pub fn degree(&self) -> usize {
        2 * self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    /// `l(n) = sum k - sum p`; `None` for the empty tuple.
    pub fn momentum(&self) -> Option<LatticeVector> {
        let first = self.upper.first().or(self.lower.first())?;
        let mut acc = LatticeVector::zero(first.dim());
        for k in &self.upper {
            acc = acc.add(k);
        }
        for p in &self.lower {
            acc = acc.sub(p);
        }
        Some(acc)
    }

    pub fn is_momentum_zero(&self) -> bool {
        self.momentum().is_none_or(|m| m.is_zero())
    }

    /// True iff upper and lower share no index.
    pub fn is_fully_nonresonant(&self) -> bool {
        multiset_intersection(&self.upper, &self.lower).is_empty()
    }

    /// True iff upper and lower differ as multisets.
    pub fn is_nonresonant(&self) -> bool {
        self.upper != self.lower
    }

    /// Entry magnitudes `|n_j|` over all `2L` entries, in decreasing order.
    pub fn magnitudes_desc(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.entries().map(|n| n.norm()).collect();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
        v
    }

    pub fn entries(&self) -> impl Iterator<Item = &LatticeVector> {
        self.upper.iter().chain(self.lower.iter())
    }

    /// `n_+`, the largest entry magnitude (0 when empty).
    pub fn n_plus(&self) -> f64 {
        self.magnitudes_desc().first().copied().unwrap_or(0.0)
    }

    /// `n_-`, the least entry magnitude (0 when empty).
    pub fn n_minus(&self) -> f64 {
        self.magnitudes_desc().last().copied().unwrap_or(0.0)
    }

    /// `mu(n)`, the third largest magnitude; `n_-` when there are fewer than three entries.
    pub fn mu(&self) -> f64 {
        let v = self.magnitudes_desc();
        if v.len() < 3 {
            v.last().copied().unwrap_or(0.0)
        } else {
            v[2]
        }
    }

    pub fn swapped(&self) -> Self {
        Self {
            upper: self.lower.clone(),
            lower: self.upper.clone(),
        }
    }
}

impl fmt::Debug for OscIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}|{:?}", self.upper.as_slice(), self.lower.as_slice())
    }
}

/// Multiset intersection of two sorted slices.
pub fn multiset_intersection(a: &[LatticeVector], b: &[LatticeVector]) -> IndexVec {
    let (mut i, mut j) = (0, 0);
    let mut out = IndexVec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Removes the sorted sub-multiset `sub` from sorted `a`.
fn multiset_difference(a: &[LatticeVector], sub: &[LatticeVector]) -> IndexVec {
    let mut out = IndexVec::new();
    let mut j = 0;
    for x in a {
        if j < sub.len() && sub[j] == *x {
            j += 1;
        } else {
            out.push(*x);
        }
    }
    out
}

/// Moves every index common to `upper` and `lower` into the action part.
pub fn canonicalize(
    upper: &[LatticeVector],
    lower: &[LatticeVector],
) -> Result<(ActionIndex, OscIndex)> {
    if upper.len() != lower.len() {
        return Err(Error::MalformedMonomial(format!(
            "unbalanced tuple: {} upper vs {} lower",
            upper.len(),
            lower.len()
        )));
    }
    let mut u: IndexVec = upper.iter().copied().collect();
    let mut l: IndexVec = lower.iter().copied().collect();
    u.sort_unstable();
    l.sort_unstable();
    let common = multiset_intersection(&u, &l);
    let osc = OscIndex {
        upper: multiset_difference(&u, &common),
        lower: multiset_difference(&l, &common),
    };
    Ok((ActionIndex(common), osc))
}

/// Truncated Fourier state: modes with `|n|_inf <= cutoff`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierState {
    dim: usize,
    cutoff: u32,
    amplitudes: BTreeMap<LatticeVector, Complex64>,
}

impl FourierState {
    pub fn new(dim: usize, cutoff: u32) -> Self {
        Self {
            dim,
            cutoff,
            amplitudes: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn set(&mut self, n: LatticeVector, q: Complex64) -> Result<()> {
        if n.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: n.dim(),
            });
        }
        if n.max_norm() > self.cutoff {
            return Err(Error::OutOfRange {
                index: n.to_string(),
                cutoff: self.cutoff,
            });
        }
        if q == Complex64::new(0.0, 0.0) {
            self.amplitudes.remove(&n);
        } else {
            self.amplitudes.insert(n, q);
        }
        Ok(())
    }

    pub fn get(&self, n: &LatticeVector) -> Complex64 {
        self.amplitudes.get(n).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LatticeVector, &Complex64)> {
        self.amplitudes.iter()
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Action `I_n = |q_n|^2`.
    pub fn action(&self, n: &LatticeVector) -> f64 {
        self.get(n).norm_sqr()
    }

    pub fn mass(&self) -> f64 {
        self.amplitudes.values().map(|q| q.norm_sqr()).sum()
    }
}

/// `(sum <n>^{2s} |q_n|^2)^{1/2}`.
pub fn hs_norm(state: &FourierState, s: f64) -> f64 {
    state
        .iter()
        .map(|(n, q)| (1.0 + n.norm_sq() as f64).powf(s) * q.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: i32) -> LatticeVector {
        LatticeVector::new(&[x])
    }

    #[test]
    fn hs_norm_examples() {
        let mut st = FourierState::new(1, 4);
        assert_eq!(hs_norm(&st, 3.0), 0.0);
        st.set(v(2), Complex64::new(0.1, 0.0)).unwrap();
        assert!((hs_norm(&st, 0.0) - 0.1).abs() < 1e-15);

        let mut st2 = FourierState::new(2, 2);
        st2.set(LatticeVector::new(&[1, 0]), Complex64::new(1.0, 0.0))
            .unwrap();
        assert!((hs_norm(&st2, 2.0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn state_rejects_out_of_cutoff() {
        let mut st = FourierState::new(1, 2);
        assert!(st.set(v(3), Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn canonicalize_examples() {
        let (a, o) = canonicalize(&[v(1), v(3)], &[v(3), v(1)]).unwrap();
        assert_eq!(a.entries(), &[v(1), v(3)]);
        assert!(o.is_empty());

        let (a, o) = canonicalize(&[v(1), v(3)], &[v(2), v(2)]).unwrap();
        assert!(a.is_empty());
        assert_eq!(o.upper(), &[v(1), v(3)]);
        assert_eq!(o.lower(), &[v(2), v(2)]);

        let (a, o) = canonicalize(&[v(1), v(2), v(2)], &[v(2), v(5), v(5)]).unwrap();
        assert_eq!(a.entries(), &[v(2)]);
        assert_eq!(o.upper(), &[v(1), v(2)]);
        assert_eq!(o.lower(), &[v(5), v(5)]);

        assert!(canonicalize(&[v(1)], &[]).is_err());
    }

    #[test]
    fn mu_for_short_tuples_is_n_minus() {
        let o = OscIndex::from_slices(&[v(3)], &[v(-1)]).unwrap();
        assert_eq!(o.mu(), 1.0);
        assert_eq!(o.n_plus(), 3.0);
    }

    #[test]
    fn box_indexer_matches_enumeration() {
        for dim in 1..=3 {
            let ix = BoxIndexer::new(dim, 2);
            let pts = box_points(dim, 2);
            assert_eq!(pts.len(), ix.len());
            for (i, p) in pts.iter().enumerate() {
                assert_eq!(ix.index(p), Some(i));
            }
            assert!(pts.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn parse_round_trip() {
        let n = LatticeVector::new(&[-3, 0, 7]);
        assert_eq!(LatticeVector::parse(&n.to_string()).unwrap(), n);
    }
}
