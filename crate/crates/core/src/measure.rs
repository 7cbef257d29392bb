//! Finite measure spaces, atomic sub-σ-algebras and conditional expectation.
//!
//! A sub-σ-algebra of a finite space is generated by its atoms, so it is
//! stored as a [`Partition`]. Conditional expectation is the μ-weighted
//! average over each block, and every `𝒜`-measurable function is a function
//! of the block index.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Neumaier-compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of complex terms.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct ComplexSum {
    re: KahanSum,
    im: KahanSum,
}

impl ComplexSum {
    pub(crate) fn add(&mut self, z: C64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub(crate) fn value(&self) -> C64 {
        C64::new(self.re.value(), self.im.value())
    }
}

/// A finite measure space: labelled points with strictly positive masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpace {
    ids: Vec<String>,
    weights: Vec<f64>,
}

impl MeasureSpace {
    pub fn new(ids: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::invalid("measure space", "at least one point is required"));
        }
        if ids.len() != weights.len() {
            return Err(Error::shape("measure space weights", ids.len(), weights.len()));
        }
        for (id, &w) in ids.iter().zip(&weights) {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::invalid(
                    "measure space",
                    format!("point '{id}' has non-positive or non-finite weight {w}"),
                ));
            }
        }
        let mut seen = std::collections::HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::invalid("measure space", format!("duplicate point id '{id}'")));
            }
        }
        Ok(Self { ids, weights })
    }

    /// Points labelled `p0, p1, …`.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let ids = (0..weights.len()).map(|i| format!("p{i}")).collect();
        Self::new(ids, weights)
    }

    /// `n` points of equal mass summing to `total`.
    pub fn uniform(n: usize, total: f64) -> Result<Self> {
        Self::from_weights(vec![total / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|p| p == id)
    }

    pub fn total_mass(&self) -> f64 {
        let mut s = KahanSum::default();
        for &w in &self.weights {
            s.add(w);
        }
        s.value()
    }

    /// `⟨f, g⟩_μ = Σ f(x) conj(g(x)) μ(x)`.
    pub fn inner(&self, f: &CFun, g: &CFun) -> Result<C64> {
        self.check(f, "inner product")?;
        self.check(g, "inner product")?;
        let mut s = ComplexSum::default();
        for ((a, b), &m) in f.0.iter().zip(&g.0).zip(&self.weights) {
            s.add(a * b.conj() * m);
        }
        Ok(s.value())
    }

    pub fn norm(&self, f: &CFun) -> Result<f64> {
        self.check(f, "norm")?;
        let mut s = KahanSum::default();
        for (a, &m) in f.0.iter().zip(&self.weights) {
            s.add(a.norm_sqr() * m);
        }
        Ok(s.value().sqrt())
    }

    /// `∫ f dμ`.
    pub fn integral(&self, f: &CFun) -> Result<C64> {
        self.check(f, "integral")?;
        let mut s = ComplexSum::default();
        for (a, &m) in f.0.iter().zip(&self.weights) {
            s.add(a * m);
        }
        Ok(s.value())
    }

    pub(crate) fn check(&self, f: &CFun, context: &'static str) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::shape(context, self.len(), f.len()));
        }
        Ok(())
    }
}

/// The atoms of a sub-σ-algebra: a partition of the point indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    atom_of: Vec<usize>,
}

impl Partition {
    /// Builds a partition of `0..n` from explicit blocks.
    ///
    /// Blocks must be non-empty, pairwise disjoint and cover every index.
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        const UNSET: usize = usize::MAX;
        let mut atom_of = vec![UNSET; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::invalid("partition", format!("block {b} is empty")));
            }
            for &i in block {
                if i >= n {
                    return Err(Error::invalid(
                        "partition",
                        format!("block {b} references point {i} outside 0..{n}"),
                    ));
                }
                if atom_of[i] != UNSET {
                    return Err(Error::invalid(
                        "partition",
                        format!("point {i} appears in blocks {} and {b}", atom_of[i]),
                    ));
                }
                atom_of[i] = b;
            }
        }
        if let Some(i) = atom_of.iter().position(|&a| a == UNSET) {
            return Err(Error::invalid(
                "partition",
                format!("point {i} is not covered by any block"),
            ));
        }
        Ok(Self { blocks, atom_of })
    }

    /// Builds a partition from a block label per point; labels are renumbered
    /// in order of first appearance.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let mut remap = std::collections::HashMap::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            let b = *remap.entry(l).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[b].push(i);
        }
        Self::new(labels.len(), blocks)
    }

    /// The finest algebra: every point is an atom.
    pub fn singletons(n: usize) -> Self {
        Self {
            blocks: (0..n).map(|i| vec![i]).collect(),
            atom_of: (0..n).collect(),
        }
    }

    /// The trivial algebra `{∅, X}`.
    pub fn trivial(n: usize) -> Self {
        Self {
            blocks: vec![(0..n).collect()],
            atom_of: vec![0; n],
        }
    }

    pub fn n_points(&self) -> usize {
        self.atom_of.len()
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn atom_of(&self, i: usize) -> usize {
        self.atom_of[i]
    }

    pub fn same_atom(&self, i: usize, j: usize) -> bool {
        self.atom_of[i] == self.atom_of[j]
    }

    /// `μ(A)` for every block `A`.
    pub fn block_masses(&self, space: &MeasureSpace) -> Result<Vec<f64>> {
        self.check(space)?;
        Ok(self
            .blocks
            .iter()
            .map(|b| {
                let mut s = KahanSum::default();
                for &i in b {
                    s.add(space.weight(i));
                }
                s.value()
            })
            .collect())
    }

    /// Expands one value per block into a function on the points.
    pub fn expand(&self, per_block: &[C64]) -> Result<CFun> {
        if per_block.len() != self.block_count() {
            return Err(Error::shape("block values", self.block_count(), per_block.len()));
        }
        Ok(CFun(self.atom_of.iter().map(|&b| per_block[b]).collect()))
    }

    pub(crate) fn check(&self, space: &MeasureSpace) -> Result<()> {
        if self.n_points() != space.len() {
            return Err(Error::shape("partition", space.len(), self.n_points()));
        }
        Ok(())
    }
}

/// A complex-valued function on the points of a measure space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CFun(pub Vec<C64>);

impl CFun {
    pub fn new(values: Vec<C64>) -> Self {
        Self(values)
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self(values.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn constant(n: usize, c: C64) -> Self {
        Self(vec![c; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, C64::new(0.0, 0.0))
    }

    pub fn ones(n: usize) -> Self {
        Self::constant(n, C64::new(1.0, 0.0))
    }

    /// The `j`-th indicator function `e_j`.
    pub fn basis(n: usize, j: usize) -> Self {
        let mut f = Self::zeros(n);
        f.0[j] = C64::new(1.0, 0.0);
        f
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[C64] {
        &self.0
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    /// `|f|²` as a complex function with zero imaginary part.
    pub fn abs_sq(&self) -> Self {
        self.map(|z| C64::new(z.norm_sqr(), 0.0))
    }

    pub fn map(&self, op: impl Fn(C64) -> C64) -> Self {
        Self(self.0.iter().map(|&z| op(z)).collect())
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|z| z * c)
    }

    /// Largest modulus, `0` for the empty function.
    pub fn max_modulus(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max-norm distance between two functions of equal length.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn zip_with(&self, other: &Self, op: impl Fn(C64, C64) -> C64) -> Self {
        assert_eq!(
            self.len(),
            other.len(),
            "pointwise operation on functions of different length"
        );
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| op(a, b)).collect())
    }
}

impl Mul for &CFun {
    type Output = CFun;
    fn mul(self, rhs: &CFun) -> CFun {
        self.zip_with(rhs, |a, b| a * b)
    }
}

impl Add for &CFun {
    type Output = CFun;
    fn add(self, rhs: &CFun) -> CFun {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &CFun {
    type Output = CFun;
    fn sub(self, rhs: &CFun) -> CFun {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &CFun {
    type Output = CFun;
    fn neg(self) -> CFun {
        self.map(|z| -z)
    }
}

/// The set `{x : |f(x)| > τ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSet {
    flags: Vec<bool>,
    tolerance: f64,
}

impl SupportSet {
    pub fn from_flags(flags: Vec<bool>, tolerance: f64) -> Self {
        Self { flags, tolerance }
    }

    pub fn full(n: usize) -> Self {
        Self::from_flags(vec![true; n], 0.0)
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn contains(&self, i: usize) -> bool {
        self.flags[i]
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&b| b).count()
    }

    pub fn is_full(&self) -> bool {
        self.flags.iter().all(|&b| b)
    }

    pub fn indices(&self) -> Vec<usize> {
        self.flags
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    pub fn intersect(&self, other: &Self) -> Self {
        Self {
            flags: self.flags.iter().zip(&other.flags).map(|(&a, &b)| a && b).collect(),
            tolerance: self.tolerance,
        }
    }

    /// Membership agrees pointwise (tolerances are ignored).
    pub fn same_points(&self, other: &Self) -> bool {
        self.flags == other.flags
    }
}

/// Block averages `Σ_{x∈A} f(x)μ(x) / μ(A)`, one per block.
pub fn block_means(f: &CFun, p: &Partition, m: &MeasureSpace) -> Result<Vec<C64>> {
    m.check(f, "conditional expectation")?;
    p.check(m)?;
    Ok(p.blocks()
        .iter()
        .map(|block| {
            let mut num = ComplexSum::default();
            let mut mass = KahanSum::default();
            for &i in block {
                num.add(f.0[i] * m.weight(i));
                mass.add(m.weight(i));
            }
            num.value() / mass.value()
        })
        .collect())
}

/// Conditional expectation `E(f)` with respect to the algebra generated by `p`.
pub fn cond_expect(f: &CFun, p: &Partition, m: &MeasureSpace) -> Result<CFun> {
    let means = block_means(f, p, m)?;
    p.expand(&means)
}

/// Points where `|f| > tau`.
pub fn support_of(f: &CFun, tau: f64) -> Result<SupportSet> {
    if !(tau >= 0.0) {
        return Err(Error::Argument(format!(
            "support tolerance must be non-negative, got {tau}"
        )));
    }
    Ok(SupportSet::from_flags(
        f.0.iter().map(|z| z.norm() > tau).collect(),
        tau,
    ))
}

/// Whether `f` is constant on every block up to `tau` (deviation from the
/// block's conditional mean).
pub fn is_algebra_measurable(f: &CFun, p: &Partition, m: &MeasureSpace, tau: f64) -> Result<bool> {
    if !(tau >= 0.0) {
        return Err(Error::Argument(format!("tolerance must be non-negative, got {tau}")));
    }
    let means = block_means(f, p, m)?;
    Ok((0..f.len()).all(|i| (f.0[i] - means[p.atom_of(i)]).norm() <= tau))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn single_atom_average() {
        let m = MeasureSpace::uniform(2, 1.0).unwrap();
        let f = CFun::from_real(&[2.0, 4.0]);
        let e = cond_expect(&f, &Partition::trivial(2), &m).unwrap();
        assert_eq!(e, CFun::from_real(&[3.0, 3.0]));
    }

    #[test]
    fn singleton_partition_is_identity() {
        let m = MeasureSpace::from_weights(vec![0.3, 2.0, 7.5]).unwrap();
        let f = CFun::new(vec![c(1.0, -2.0), c(0.5, 0.25), c(-3.0, 4.0)]);
        let e = cond_expect(&f, &Partition::singletons(3), &m).unwrap();
        assert!(e.max_diff(&f) == 0.0);
    }

    #[test]
    fn symmetric_pair_exponential_mean_is_cosh() {
        let m = MeasureSpace::uniform(2, 1.0).unwrap();
        let u = CFun::from_real(&[(-1.0f64).exp(), 1.0f64.exp()]);
        let e = cond_expect(&u, &Partition::trivial(2), &m).unwrap();
        for z in e.values() {
            assert!((z.re - 1.0f64.cosh()).abs() < 1e-15);
            assert_eq!(z.im, 0.0);
        }
        assert!(!is_algebra_measurable(&u, &Partition::trivial(2), &m, 1e-12).unwrap());
    }

    #[test]
    fn support_thresholds() {
        let s = support_of(&CFun::from_real(&[0.0, 3.0, 0.0]), 0.0).unwrap();
        assert_eq!(s.flags(), &[false, true, false]);
        let s = support_of(&CFun::from_real(&[1e-14, 1.0]), 1e-12).unwrap();
        assert_eq!(s.flags(), &[false, true]);
        assert!(matches!(support_of(&CFun::zeros(1), -1.0), Err(Error::Argument(_))));
    }

    #[test]
    fn orthogonal_pair_has_empty_support() {
        let m = MeasureSpace::uniform(2, 1.0).unwrap();
        let u = CFun::from_real(&[1.0, 1.0]);
        let w = CFun::from_real(&[1.0, -1.0]);
        let euw = cond_expect(&(&u * &w), &Partition::trivial(2), &m).unwrap();
        // direct average: (1·1 + 1·(−1)) / 2
        assert_eq!(euw, CFun::zeros(2));
        assert_eq!(support_of(&euw, 0.0).unwrap().count(), 0);
    }

    #[test]
    fn measurability_predicate() {
        let m = MeasureSpace::from_weights(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = Partition::from_labels(&[0, 0, 1, 1]).unwrap();
        let f = CFun::from_real(&[5.0, 5.0, -1.0, -1.0]);
        assert!(is_algebra_measurable(&f, &p, &m, 0.0).unwrap());
        let g = CFun::from_real(&[5.0, 5.5, -1.0, -1.0]);
        assert!(!is_algebra_measurable(&g, &p, &m, 1e-3).unwrap());
        assert!(is_algebra_measurable(&g, &Partition::singletons(4), &m, 0.0).unwrap());
    }

    #[test]
    fn shape_errors() {
        let m = MeasureSpace::uniform(3, 1.0).unwrap();
        let err = cond_expect(&CFun::zeros(2), &Partition::trivial(3), &m).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
        let err = cond_expect(&CFun::zeros(3), &Partition::trivial(4), &m).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn invalid_structures_rejected() {
        assert!(MeasureSpace::from_weights(vec![]).is_err());
        assert!(MeasureSpace::from_weights(vec![1.0, 0.0]).is_err());
        assert!(MeasureSpace::from_weights(vec![1.0, f64::NAN]).is_err());
        assert!(MeasureSpace::new(vec!["a".into(), "a".into()], vec![1.0, 1.0]).is_err());
        assert!(Partition::new(3, vec![vec![0, 1]]).is_err());
        assert!(Partition::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(Partition::new(2, vec![vec![0, 1], vec![]]).is_err());
        assert!(Partition::new(2, vec![vec![0, 5]]).is_err());
    }

    #[test]
    fn compensated_block_mean_on_ill_scaled_weights() {
        let m = MeasureSpace::from_weights(vec![1e16, 1.0, 1.0, 1e-16]).unwrap();
        let f = CFun::from_real(&[1.0, 1.0, 1.0, 1.0]);
        let e = cond_expect(&f, &Partition::trivial(4), &m).unwrap();
        assert!(e.max_diff(&CFun::ones(4)) <= 2.0 * f64::EPSILON);
    }
}
