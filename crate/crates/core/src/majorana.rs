//! Exact symbolic algebra of Majorana words.
//!
//! A word `m_{j1}^{a1} ... m_{jr}^{ar}` over a lattice of `V` sites with `p`
//! modes per site is stored as a bitmask over the `2pV` Majorana generators.
//! Bit `(site - 1) * 2p + (majorana - 1)` carries generator `m_site^majorana`;
//! the canonical written order of a word is increasing bit order, which is the
//! lexicographic `(site, majorana)` order.
//!
//! Sites and Majorana indices are 1-based throughout the public API.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Mul, Neg};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients with magnitude below this are dropped after every operation.
pub const DEFAULT_PRUNE: f64 = 1e-14;

/// Width of the word bitmask.
pub const MAX_MAJORANAS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemShape {
    sites: usize,
    modes_per_site: usize,
}

impl SystemShape {
    pub fn new(sites: usize, modes_per_site: usize) -> Result<Self> {
        if sites == 0 || modes_per_site == 0 {
            return Err(Error::domain(format!(
                "shape needs at least one site and one mode, got V={sites}, p={modes_per_site}"
            )));
        }
        if 2 * sites * modes_per_site > MAX_MAJORANAS {
            return Err(Error::Resource {
                modes: sites * modes_per_site,
                cap: MAX_MAJORANAS / 2,
            });
        }
        Ok(SystemShape {
            sites,
            modes_per_site,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn modes_per_site(&self) -> usize {
        self.modes_per_site
    }

    /// Total number of fermionic modes `pV`.
    pub fn modes(&self) -> usize {
        self.sites * self.modes_per_site
    }

    /// Total number of Majorana generators `2pV`.
    pub fn majoranas(&self) -> usize {
        2 * self.modes()
    }

    pub fn majoranas_per_site(&self) -> usize {
        2 * self.modes_per_site
    }

    /// Fock-space dimension `2^{pV}` as a float (exact for every valid shape).
    pub fn fock_dim_f64(&self) -> f64 {
        (self.modes() as f64).exp2()
    }

    pub fn with_sites(&self, sites: usize) -> Result<Self> {
        SystemShape::new(sites, self.modes_per_site)
    }

    pub(crate) fn bit(&self, idx: ModeIndex) -> Result<u32> {
        if idx.site == 0 || idx.site > self.sites {
            return Err(Error::domain(format!(
                "site {} out of range 1..={}",
                idx.site, self.sites
            )));
        }
        if idx.majorana == 0 || idx.majorana > self.majoranas_per_site() {
            return Err(Error::domain(format!(
                "majorana index {} out of range 1..={}",
                idx.majorana,
                self.majoranas_per_site()
            )));
        }
        Ok(((idx.site - 1) * self.majoranas_per_site() + idx.majorana - 1) as u32)
    }

    pub(crate) fn index_of_bit(&self, bit: u32) -> ModeIndex {
        let per = self.majoranas_per_site();
        ModeIndex {
            site: bit as usize / per + 1,
            majorana: bit as usize % per + 1,
        }
    }

    /// Bitmask of all Majoranas living on `site` (1-based).
    pub fn site_mask(&self, site: usize) -> u64 {
        let per = self.majoranas_per_site();
        low_bits(per) << ((site - 1) * per)
    }

    pub(crate) fn full_mask(&self) -> u64 {
        low_bits(self.majoranas())
    }

    pub(crate) fn check_site(&self, site: usize) -> Result<()> {
        if site == 0 || site > self.sites {
            Err(Error::domain(format!(
                "site {site} out of range 1..={}",
                self.sites
            )))
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for SystemShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(V={}, p={})", self.sites, self.modes_per_site)
    }
}

fn low_bits(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Mask of all bits strictly above `bit`.
fn bits_above(bit: u32) -> u64 {
    if bit >= 63 {
        0
    } else {
        !((2u64 << bit) - 1)
    }
}

/// `m_site^majorana`; ordered lexicographically by `(site, majorana)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeIndex {
    pub site: usize,
    pub majorana: usize,
}

impl ModeIndex {
    pub const fn new(site: usize, majorana: usize) -> Self {
        ModeIndex { site, majorana }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn from_parity(odd: bool) -> Self {
        if odd {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        Sign::from_parity(self != rhs)
    }
}

impl Neg for Sign {
    type Output = Sign;
    fn neg(self) -> Sign {
        self * Sign::Minus
    }
}

/// Canonically ordered product of distinct Majorana generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct MajoranaWord(u64);

impl MajoranaWord {
    pub const IDENTITY: MajoranaWord = MajoranaWord(0);

    pub fn from_bits(bits: u64) -> Self {
        MajoranaWord(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn degree(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_identity(self) -> bool {
        self.0 == 0
    }

    /// Builds a word from already strictly increasing indices.
    pub fn from_sorted(shape: &SystemShape, indices: &[ModeIndex]) -> Result<Self> {
        let (sign, word) = canonicalize(shape, indices)?;
        if sign != Sign::Plus || word.degree() != indices.len() {
            return Err(Error::domain("indices are not strictly increasing"));
        }
        Ok(word)
    }

    pub fn indices(self, shape: &SystemShape) -> Vec<ModeIndex> {
        BitIter(self.0).map(|b| shape.index_of_bit(b)).collect()
    }

    pub fn count_on_site(self, shape: &SystemShape, site: usize) -> usize {
        (self.0 & shape.site_mask(site)).count_ones() as usize
    }

    pub fn is_even_on_all_sites(self, shape: &SystemShape) -> bool {
        (1..=shape.sites()).all(|s| self.count_on_site(shape, s) % 2 == 0)
    }

    /// Sites carrying at least one generator, ascending.
    pub fn support(self, shape: &SystemShape) -> Vec<usize> {
        (1..=shape.sites())
            .filter(|&s| self.0 & shape.site_mask(s) != 0)
            .collect()
    }

    /// Bits of this word that sit on `site`, shifted down to site-local positions.
    pub fn local_bits(self, shape: &SystemShape, site: usize) -> u64 {
        (self.0 & shape.site_mask(site)) >> ((site - 1) * shape.majoranas_per_site())
    }

    /// Sign picked up by the adjoint: reversing `r` anticommuting factors.
    pub fn adjoint_sign(self) -> Sign {
        let r = self.degree();
        Sign::from_parity((r * r.saturating_sub(1) / 2) % 2 == 1)
    }

    /// Product of two canonical words.
    pub fn mul(self, rhs: MajoranaWord) -> (Sign, MajoranaWord) {
        let mut swaps = 0u32;
        for b in BitIter(rhs.0) {
            swaps += (self.0 & bits_above(b)).count_ones();
        }
        (Sign::from_parity(swaps % 2 == 1), MajoranaWord(self.0 ^ rhs.0))
    }

    pub fn display(self, shape: &SystemShape) -> String {
        if self.is_identity() {
            return "1".to_string();
        }
        self.indices(shape)
            .iter()
            .map(|i| format!("({},{})", i.site, i.majorana))
            .collect()
    }
}

/// Iterates set bits in ascending order.
#[derive(Clone, Copy)]
pub(crate) struct BitIter(pub u64);

impl Iterator for BitIter {
    type Item = u32;
    fn next(&mut self) -> Option<u32> {
        if self.0 == 0 {
            return None;
        }
        let b = self.0.trailing_zeros();
        self.0 &= self.0 - 1;
        Some(b)
    }
}

/// Orders a product of generators, applying `m^2 = 1` and tracking the sign
/// of every transposition of distinct generators.
pub fn canonicalize(shape: &SystemShape, indices: &[ModeIndex]) -> Result<(Sign, MajoranaWord)> {
    let mut word = 0u64;
    let mut odd = false;
    for &idx in indices {
        let b = shape.bit(idx)?;
        odd ^= (word & bits_above(b)).count_ones() % 2 == 1;
        word ^= 1 << b;
    }
    Ok((Sign::from_parity(odd), MajoranaWord(word)))
}

/// Bijection on sites `1..=V`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SitePermutation {
    // 0-based images
    images: Vec<usize>,
}

impl SitePermutation {
    pub fn identity(sites: usize) -> Self {
        SitePermutation {
            images: (0..sites).collect(),
        }
    }

    /// `images[j - 1]` is the image of site `j`; all 1-based.
    pub fn from_images(images: &[usize]) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in images {
            if i == 0 || i > n || seen[i - 1] {
                return Err(Error::domain(format!(
                    "{images:?} is not a permutation of 1..={n}"
                )));
            }
            seen[i - 1] = true;
        }
        Ok(SitePermutation {
            images: images.iter().map(|i| i - 1).collect(),
        })
    }

    pub fn transposition(sites: usize, a: usize, b: usize) -> Result<Self> {
        if a == 0 || b == 0 || a > sites || b > sites {
            return Err(Error::domain(format!(
                "transposition ({a} {b}) out of range 1..={sites}"
            )));
        }
        let mut p = Self::identity(sites);
        p.images.swap(a - 1, b - 1);
        Ok(p)
    }

    /// Cycle `c[0] -> c[1] -> ... -> c[0]`, 1-based.
    pub fn cycle(sites: usize, cycle: &[usize]) -> Result<Self> {
        let mut images: Vec<usize> = (1..=sites).collect();
        for (i, &from) in cycle.iter().enumerate() {
            let to = cycle[(i + 1) % cycle.len()];
            if from == 0 || from > sites {
                return Err(Error::domain(format!("cycle entry {from} out of range")));
            }
            images[from - 1] = to;
        }
        Self::from_images(&images)
    }

    pub fn sites(&self) -> usize {
        self.images.len()
    }

    /// Image of a 1-based site.
    pub fn apply(&self, site: usize) -> usize {
        self.images[site - 1] + 1
    }

    pub fn images(&self) -> Vec<usize> {
        self.images.iter().map(|i| i + 1).collect()
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &SitePermutation) -> Result<Self> {
        if self.sites() != other.sites() {
            return Err(Error::domain("composing permutations of different sizes"));
        }
        Ok(SitePermutation {
            images: other.images.iter().map(|&j| self.images[j]).collect(),
        })
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.images.len()];
        for (j, &i) in self.images.iter().enumerate() {
            inv[i] = j;
        }
        SitePermutation { images: inv }
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(j, &i)| i == j)
    }

    /// All `V!` permutations in lexicographic order of their image lists.
    pub fn all(sites: usize) -> impl Iterator<Item = SitePermutation> {
        let mut next = Some((0..sites).collect::<Vec<_>>());
        std::iter::from_fn(move || {
            let cur = next.take()?;
            next = next_lexicographic(&cur);
            Some(SitePermutation { images: cur })
        })
    }

    /// Maps a word site-by-site keeping the written order, then re-sorts.
    pub fn act_on_word(&self, shape: &SystemShape, w: MajoranaWord) -> (Sign, MajoranaWord) {
        let per = shape.majoranas_per_site() as u32;
        let mut seen = 0u64;
        let mut odd = false;
        for b in BitIter(w.0) {
            let site = (b / per) as usize;
            let nb = self.images[site] as u32 * per + b % per;
            odd ^= (seen & bits_above(nb)).count_ones() % 2 == 1;
            seen |= 1 << nb;
        }
        (Sign::from_parity(odd), MajoranaWord(seen))
    }

    /// True iff mapping the word's sites keeps its generators strictly increasing.
    pub fn is_order_preserving(&self, shape: &SystemShape, w: MajoranaWord) -> bool {
        let per = shape.majoranas_per_site() as u32;
        let mut last: Option<u32> = None;
        for b in BitIter(w.0) {
            let nb = self.images[(b / per) as usize] as u32 * per + b % per;
            if last.is_some_and(|l| nb <= l) {
                return false;
            }
            last = Some(nb);
        }
        true
    }
}

fn next_lexicographic(cur: &[usize]) -> Option<Vec<usize>> {
    let n = cur.len();
    if n < 2 {
        return None;
    }
    let i = (0..n - 1).rev().find(|&i| cur[i] < cur[i + 1])?;
    let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i])?;
    let mut next = cur.to_vec();
    next.swap(i, j);
    next[i + 1..].reverse();
    Some(next)
}

/// Sparse linear combination of Majorana words.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorExpansion {
    shape: SystemShape,
    terms: BTreeMap<MajoranaWord, Complex64>,
    prune: f64,
}

impl OperatorExpansion {
    pub fn zero(shape: SystemShape) -> Self {
        OperatorExpansion {
            shape,
            terms: BTreeMap::new(),
            prune: DEFAULT_PRUNE,
        }
    }

    pub fn identity(shape: SystemShape) -> Self {
        Self::from_word(shape, MajoranaWord::IDENTITY, Complex64::new(1.0, 0.0))
    }

    pub fn from_word(shape: SystemShape, w: MajoranaWord, coeff: Complex64) -> Self {
        let mut e = Self::zero(shape);
        e.add_term(w, coeff);
        e
    }

    /// Single product of generators in arbitrary written order.
    pub fn from_product(shape: SystemShape, indices: &[ModeIndex], coeff: Complex64) -> Result<Self> {
        let (sign, w) = canonicalize(&shape, indices)?;
        Ok(Self::from_word(shape, w, coeff * sign.value()))
    }

    pub fn from_terms<I>(shape: SystemShape, terms: I) -> Self
    where
        I: IntoIterator<Item = (MajoranaWord, Complex64)>,
    {
        let mut e = Self::zero(shape);
        for (w, c) in terms {
            e.add_term(w, c);
        }
        e
    }

    pub fn with_prune_threshold(mut self, prune: f64) -> Self {
        self.prune = prune;
        self.terms.retain(|_, c| c.norm() >= prune);
        self
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune
    }

    /// Accumulates `coeff * w`, dropping the term if it falls below the threshold.
    pub fn add_term(&mut self, w: MajoranaWord, coeff: Complex64) {
        debug_assert!(w.bits() & !self.shape.full_mask() == 0);
        let entry = self.terms.entry(w).or_insert(Complex64::new(0.0, 0.0));
        *entry += coeff;
        if entry.norm() < self.prune {
            self.terms.remove(&w);
        }
    }

    pub fn shape(&self) -> SystemShape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, w: MajoranaWord) -> Complex64 {
        self.terms.get(&w).copied().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (MajoranaWord, Complex64)> + '_ {
        self.terms.iter().map(|(w, c)| (*w, *c))
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::domain(format!(
                "shape mismatch: {} vs {}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    fn empty_like(&self, other: Option<&Self>) -> Self {
        let prune = other.map_or(self.prune, |o| self.prune.min(o.prune));
        OperatorExpansion {
            shape: self.shape,
            terms: BTreeMap::new(),
            prune,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let mut out = self.empty_like(Some(other));
        for (w, c) in self.terms().chain(other.terms()) {
            out.add_term(w, c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let mut out = self.empty_like(None);
        for (w, c) in self.terms() {
            out.add_term(w, c * factor);
        }
        out
    }

    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let mut out = self.empty_like(Some(other));
        for (a, ca) in self.terms() {
            for (b, cb) in other.terms() {
                let (sign, w) = a.mul(b);
                out.add_term(w, ca * cb * sign.value());
            }
        }
        Ok(out)
    }

    /// Hermitian conjugate: generators are Hermitian, so only the order reverses.
    pub fn adjoint(&self) -> Self {
        let mut out = self.empty_like(None);
        for (w, c) in self.terms() {
            out.add_term(w, c.conj() * w.adjoint_sign().value());
        }
        out
    }

    pub fn apply_permutation(&self, pi: &SitePermutation) -> Result<Self> {
        if pi.sites() != self.shape.sites() {
            return Err(Error::domain(format!(
                "permutation on {} sites applied to {}",
                pi.sites(),
                self.shape
            )));
        }
        let mut out = self.empty_like(None);
        for (w, c) in self.terms() {
            let (sign, nw) = pi.act_on_word(&self.shape, w);
            out.add_term(nw, c * sign.value());
        }
        Ok(out)
    }

    /// `C^sigma_{P_site}`: keeps words with even (`Plus`) or odd (`Minus`)
    /// Majorana count on `site`.
    pub fn parity_project(&self, site: usize, sign: Sign) -> Result<Self> {
        self.shape.check_site(site)?;
        let want_odd = sign == Sign::Minus;
        Ok(self.filtered(|w| (w.count_on_site(&self.shape, site) % 2 == 1) == want_odd))
    }

    /// Composition of the even pinchings on every site.
    pub fn global_channel(&self) -> Self {
        self.filtered(|w| w.is_even_on_all_sites(&self.shape))
    }

    fn filtered(&self, keep: impl Fn(MajoranaWord) -> bool) -> Self {
        let mut out = self.empty_like(None);
        out.terms = self
            .terms
            .iter()
            .filter(|(w, _)| keep(**w))
            .map(|(w, c)| (*w, *c))
            .collect();
        out
    }

    /// `tr(self * w)` over the full Fock space.
    pub fn expectation(&self, w: MajoranaWord) -> Complex64 {
        self.coefficient(w) * (w.adjoint_sign().value() * self.shape.fock_dim_f64())
    }

    pub fn trace(&self) -> Complex64 {
        self.expectation(MajoranaWord::IDENTITY)
    }

    /// Moves the sites of every word onto new labels. `site_map[j - 1]` is the
    /// new (1-based) label of old site `j`; unmapped sites must not occur.
    pub fn relabel_sites(&self, target: SystemShape, site_map: &[Option<usize>]) -> Result<Self> {
        if target.modes_per_site() != self.shape.modes_per_site() || site_map.len() != self.shape.sites() {
            return Err(Error::domain("incompatible relabeling"));
        }
        let per = self.shape.majoranas_per_site() as u32;
        let mut out = OperatorExpansion {
            shape: target,
            terms: BTreeMap::new(),
            prune: self.prune,
        };
        for (w, c) in self.terms() {
            let mut seen = 0u64;
            let mut odd = false;
            for b in BitIter(w.bits()) {
                let new_site = site_map[(b / per) as usize]
                    .ok_or_else(|| Error::domain("word touches an unmapped site"))?;
                target.check_site(new_site)?;
                let nb = (new_site as u32 - 1) * per + b % per;
                if seen & (1 << nb) != 0 {
                    return Err(Error::domain("relabeling is not injective"));
                }
                odd ^= (seen & bits_above(nb)).count_ones() % 2 == 1;
                seen |= 1 << nb;
            }
            out.add_term(MajoranaWord(seen), c * Sign::from_parity(odd).value());
        }
        Ok(out)
    }

    /// Symbolic reduction onto `keep` (1-based, any order; relabeled ascending).
    /// Words touching discarded sites are dropped; the rest are rescaled so
    /// the trace is preserved.
    pub fn reduce_to_sites(&self, keep: &[usize]) -> Result<Self> {
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.is_empty() {
            return Err(Error::domain("reduction onto an empty site set"));
        }
        for &s in &keep {
            self.shape.check_site(s)?;
        }
        let target = self.shape.with_sites(keep.len())?;
        let mut map = vec![None; self.shape.sites()];
        for (new, &old) in keep.iter().enumerate() {
            map[old - 1] = Some(new + 1);
        }
        let mask: u64 = keep.iter().map(|&s| self.shape.site_mask(s)).fold(0, |a, b| a | b);
        let scale = ((self.shape.modes() - target.modes()) as f64).exp2();
        let sub = self.filtered(|w| w.bits() & !mask == 0).scale(Complex64::new(scale, 0.0));
        sub.relabel_sites(target, &map)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut m: f64 = 0.0;
        for (w, c) in self.terms() {
            m = m.max((c - other.coefficient(w)).norm());
        }
        for (w, c) in other.terms() {
            if !self.terms.contains_key(&w) {
                m = m.max(c.norm());
            }
        }
        m
    }

    /// One term per line: `re im (j1,a1)(j2,a2)...`, identity written `1`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (w, c) in self.terms() {
            s.push_str(&format!("{} {} {}\n", c.re, c.im, w.display(&self.shape)));
        }
        s
    }

    pub fn from_text(shape: SystemShape, text: &str) -> Result<Self> {
        let mut out = Self::zero(shape);
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: &str| Error::Parse {
                line: n + 1,
                msg: msg.to_string(),
            };
            let mut parts = line.splitn(3, char::is_whitespace);
            let re: f64 = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| parse_err("bad real part"))?;
            let im: f64 = parts
                .next()
                .and_then(|t| t.trim().parse().ok())
                .ok_or_else(|| parse_err("bad imaginary part"))?;
            let word_text: String = parts
                .next()
                .ok_or_else(|| parse_err("missing word"))?
                .chars()
                .filter(|c| !c.is_whitespace())
                .collect();
            let indices = parse_word(&word_text).map_err(|m| parse_err(&m))?;
            let (sign, w) = canonicalize(&shape, &indices).map_err(|e| parse_err(&e.to_string()))?;
            out.add_term(w, Complex64::new(re, im) * sign.value());
        }
        Ok(out)
    }
}

fn parse_word(text: &str) -> std::result::Result<Vec<ModeIndex>, String> {
    if text == "1" {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut rest = text;
    while !rest.is_empty() {
        let body = rest
            .strip_prefix('(')
            .ok_or_else(|| format!("expected '(' in {text:?}"))?;
        let close = body.find(')').ok_or("unclosed '('")?;
        let (j, a) = body[..close].split_once(',').ok_or("expected 'site,majorana'")?;
        let site = j.parse().map_err(|_| format!("bad site {j:?}"))?;
        let majorana = a.parse().map_err(|_| format!("bad majorana index {a:?}"))?;
        out.push(ModeIndex { site, majorana });
        rest = &body[close + 1..];
    }
    Ok(out)
}
