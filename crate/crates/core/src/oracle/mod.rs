//! Brute-force verification on dense matrices.
//!
//! A [`DenseOperator`] stores the matrix of an operator on `L²(μ)` in the
//! point basis. Every numerical question is answered on the similar matrix
//! `B = D^{1/2} A D^{−1/2}` with `D = diag(μ)`: the map `f ↦ D^{1/2}f` is a
//! unitary from `L²(μ)` onto `ℂⁿ` with the standard inner product, so the
//! weighted adjoint of `A` corresponds to the conjugate transpose of `B` and
//! norms, singular values and spectra carry over unchanged.

mod schur;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::condop::CondOpSpec;
use crate::measure::{CFun, MeasureSpace};
use crate::{Error, Result, C64};

pub use schur::QrStats;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// A square complex matrix acting on `L²(μ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    entries: DMatrix<C64>,
    space: MeasureSpace,
}

impl DenseOperator {
    pub fn new(entries: DMatrix<C64>, space: MeasureSpace) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::shape(
                "dense operator (square)",
                entries.nrows(),
                entries.ncols(),
            ));
        }
        if entries.nrows() != space.len() {
            return Err(Error::shape("dense operator", space.len(), entries.nrows()));
        }
        Ok(Self { entries, space })
    }

    /// Matrix of a linear action, built column by column from basis vectors.
    pub fn from_action(space: &MeasureSpace, action: impl Fn(&CFun) -> Result<CFun>) -> Result<Self> {
        let n = space.len();
        let mut entries = DMatrix::from_element(n, n, ZERO);
        for j in 0..n {
            let col = action(&CFun::basis(n, j))?;
            space.check(&col, "operator action")?;
            for (i, z) in col.values().iter().enumerate() {
                entries[(i, j)] = *z;
            }
        }
        Self::new(entries, space.clone())
    }

    /// Rebuilds an operator from its standard-basis form `B`.
    pub fn from_standard(b: &DMatrix<C64>, space: &MeasureSpace) -> Result<Self> {
        let sq: Vec<f64> = space.weights().iter().map(|m| m.sqrt()).collect();
        let n = space.len();
        if b.nrows() != n || b.ncols() != n {
            return Err(Error::shape("standard form", n, b.nrows()));
        }
        let entries = DMatrix::from_fn(n, n, |i, j| b[(i, j)] * (sq[j] / sq[i]));
        Self::new(entries, space.clone())
    }

    pub fn identity(space: &MeasureSpace) -> Self {
        Self {
            entries: DMatrix::identity(space.len(), space.len()),
            space: space.clone(),
        }
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn space(&self) -> &MeasureSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `B = D^{1/2} A D^{−1/2}`.
    pub fn standard(&self) -> DMatrix<C64> {
        let sq: Vec<f64> = self.space.weights().iter().map(|m| m.sqrt()).collect();
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.entries[(i, j)] * (sq[i] / sq[j]))
    }

    pub fn apply(&self, f: &CFun) -> Result<CFun> {
        self.space.check(f, "dense operator argument")?;
        let v = DVector::from_column_slice(f.values());
        Ok(CFun::new((&self.entries * v).iter().copied().collect()))
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(Self {
            entries: &self.entries * &other.entries,
            space: self.space.clone(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(Self {
            entries: &self.entries - &other.entries,
            space: self.space.clone(),
        })
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            entries: &self.entries * c,
            space: self.space.clone(),
        }
    }

    /// Weighted Hilbert–Schmidt norm (Frobenius norm of `B`).
    pub fn hs_norm(&self) -> f64 {
        frobenius(&self.standard())
    }

    /// `max |A − other| / max |other|` over entries; absolute when `other = 0`.
    pub fn max_entry_rel_diff(&self, other: &Self) -> f64 {
        let diff = self
            .entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let scale = other.entries.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    }

    fn same_space(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::shape("operator composition", self.dim(), other.dim()));
        }
        Ok(())
    }
}

pub(crate) fn frobenius(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Matrix of `M_w E M_u`: entry `(i, j)` is `w(i) u(j) μ(j) / μ(atom(i))`
/// when `i` and `j` share an atom and zero otherwise.
pub fn materialize(spec: &CondOpSpec) -> DenseOperator {
    let space = spec.space();
    let part = spec.partition();
    let masses = &spec.levels().mass;
    let n = space.len();
    let (u, w) = (spec.u().values(), spec.w().values());
    let entries = DMatrix::from_fn(n, n, |i, j| {
        if part.same_atom(i, j) {
            w[i] * u[j] * (space.weight(j) / masses[part.atom_of(i)])
        } else {
            ZERO
        }
    });
    DenseOperator {
        entries,
        space: space.clone(),
    }
}

/// Adjoint with respect to `⟨·,·⟩_μ`: `(i, j) ↦ conj(A(j, i)) μ(j) / μ(i)`.
pub fn weighted_adjoint(a: &DenseOperator) -> DenseOperator {
    let mu = a.space.weights();
    let n = a.dim();
    DenseOperator {
        entries: DMatrix::from_fn(n, n, |i, j| a.entries[(j, i)].conj() * (mu[j] / mu[i])),
        space: a.space.clone(),
    }
}

/// Largest singular value of `A` on `L²(μ)`.
///
/// Power iteration on the Hermitian matrix `BᴴB`, stopped when the
/// extrapolated error of the Rayleigh quotient falls below `tol`. Runs that
/// stall because the two top singular values are close switch the iteration
/// matrix to its repeated square every 256 steps.
pub fn op_norm(a: &DenseOperator, tol: f64, max_iter: usize) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!(
            "op_norm tolerance must be positive, got {tol}"
        )));
    }
    let b = a.standard();
    let m = b.adjoint() * &b;
    let n = m.nrows();
    // Deterministic quasi-random start; a zero overlap with the top
    // eigenvector would need an exact cancellation against this phase pattern.
    let g = DVector::from_fn(n, |j, _| {
        let theta = std::f64::consts::TAU * ((j as f64 + 1.0) * 0.754_877_666_246_692_7).fract();
        C64::from_polar(1.0 + 0.5 * ((j as f64) * 0.618_033_988_749_895).fract(), theta)
    });
    let mut x: DVector<C64> = &m * g;
    if x.norm() == 0.0 {
        return Ok(0.0);
    }
    x /= C64::new(x.norm(), 0.0);
    let rayleigh = |x: &DVector<C64>| (x.adjoint() * (&m * x))[(0, 0)].re;
    let mut work = m.clone();
    let mut r = rayleigh(&x);
    let mut prev_delta = f64::INFINITY;
    let mut since_switch = 0usize;
    for it in 1..=max_iter {
        let y = &work * &x;
        let ny = y.norm();
        if ny == 0.0 {
            return Ok(r.max(0.0).sqrt());
        }
        x = y / C64::new(ny, 0.0);
        let r_new = rayleigh(&x);
        let delta = (r_new - r).abs();
        r = r_new;
        since_switch += 1;
        if delta <= f64::EPSILON * r {
            return Ok(r.sqrt());
        }
        if since_switch >= 3 && prev_delta.is_finite() {
            let ratio = (delta / prev_delta).min(0.999_999);
            let remaining = delta * ratio / (1.0 - ratio);
            if remaining <= 0.25 * tol * r {
                return Ok(r.sqrt());
            }
        }
        prev_delta = delta;
        if it % 256 == 0 {
            let sq = &work * &work;
            let s = frobenius(&sq);
            if s > 0.0 {
                work = sq / C64::new(s, 0.0);
            }
            since_switch = 0;
            prev_delta = f64::INFINITY;
        }
    }
    Err(Error::NonConvergence {
        routine: "op_norm power iteration",
        iterations: max_iter,
        residual: prev_delta / r.max(f64::MIN_POSITIVE),
    })
}

/// Default power-iteration budget for [`op_norm`].
pub const OP_NORM_MAX_ITER: usize = 20_000;

/// `‖A‖` with the default budget and a tolerance tight enough for the
/// acceptance comparisons.
pub fn op_norm_default(a: &DenseOperator) -> Result<f64> {
    op_norm(a, 1e-12, OP_NORM_MAX_ITER)
}

/// Eigen-decomposition of the standard form of an operator that is Hermitian
/// and positive semi-definite in `⟨·,·⟩_μ`.
fn psd_eigen(a: &DenseOperator, routine: &'static str) -> Result<SymmetricEigen<C64, nalgebra::Dyn>> {
    let b = a.standard();
    let scale = frobenius(&b);
    let skew = frobenius(&(&b - b.adjoint()));
    if skew > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Contract {
            routine,
            msg: format!(
                "operator is not Hermitian in the weighted inner product (relative skew {:.3e})",
                skew / scale
            ),
        });
    }
    let sym = (&b + b.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let bottom = eig.eigenvalues.iter().copied().fold(0.0, f64::min);
    if bottom < -1e-10 * top.max(f64::MIN_POSITIVE) {
        return Err(Error::Contract {
            routine,
            msg: format!("operator has negative eigenvalue {bottom:.3e}"),
        });
    }
    Ok(eig)
}

/// Spectral power `A^p` of a positive operator.
///
/// Eigenvalues below `n · 64ε · λ_max` are rounding dust and are mapped to 0
/// before the power is taken.
pub fn herm_power(a: &DenseOperator, p: f64) -> Result<DenseOperator> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Argument(format!("power must be positive and finite, got {p}")));
    }
    let eig = psd_eigen(a, "herm_power")?;
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let dust = a.dim() as f64 * 64.0 * f64::EPSILON * top;
    let powered = eig
        .eigenvalues
        .map(|l| if l > dust { C64::new(l.powf(p), 0.0) } else { ZERO });
    let v = &eig.eigenvectors;
    let b = v * DMatrix::from_diagonal(&powered) * v.adjoint();
    DenseOperator::from_standard(&b, &a.space)
}

/// Polar factors `A = U P` with `P = (A*A)^{1/2}` and `U` the partial
/// isometry that vanishes on `ker A`.
#[derive(Debug, Clone)]
pub struct PolarFactors {
    pub isometry: DenseOperator,
    pub modulus: DenseOperator,
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

/// Default relative singular-value threshold for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

pub fn polar_factors(a: &DenseOperator) -> Result<PolarFactors> {
    polar_factors_with(a, RANK_TOL)
}

pub fn polar_factors_with(a: &DenseOperator, rank_tol: f64) -> Result<PolarFactors> {
    let b = a.standard();
    let n = b.nrows();
    let svd = checked_svd(b)?;
    let uu = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested Vᵀ");
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    let threshold = rank_tol * smax;
    let mut modulus = DMatrix::from_element(n, n, ZERO);
    let mut isometry = DMatrix::from_element(n, n, ZERO);
    let mut rank = 0;
    for (k, &s) in sigma.iter().enumerate() {
        let v = vt.row(k).adjoint();
        modulus += &v * v.adjoint() * C64::new(s, 0.0);
        if s > threshold && s > 0.0 {
            rank += 1;
            isometry += uu.column(k) * v.adjoint();
        }
    }
    Ok(PolarFactors {
        isometry: DenseOperator::from_standard(&isometry, &a.space)?,
        modulus: DenseOperator::from_standard(&modulus, &a.space)?,
        rank,
        singular_values: sigma,
    })
}

/// SVD with a reconstruction check.
///
/// nalgebra's implicit-shift SVD can mis-deflate matrices with exactly zero
/// rows when its zero threshold is as small as `ε`, returning factors that no
/// longer multiply back to the input. Start at `5ε`, loosen on failure and
/// try the adjoint at each level.
pub(crate) fn checked_svd(m: DMatrix<C64>) -> Result<SVD<C64, nalgebra::Dyn, nalgebra::Dyn>> {
    let dim = m.nrows().max(m.ncols()).max(1);
    let budget = 10_000 * dim;
    let scale = frobenius(&m);
    // Genuine failures are off by O(1). Near-defective shifts can lose a
    // singular value of order √ε·‖M‖ to deflation, which every caller treats
    // as zero anyway.
    let limit = 1e-8 * scale;
    let mut last = f64::NAN;
    for (factor, adjoint) in [5.0, 50.0, 500.0].into_iter().flat_map(|f| [(f, false), (f, true)]) {
        // the adjoint sometimes deflates cleanly where the matrix itself does not
        let input = if adjoint { m.adjoint() } else { m.clone() };
        let Some(mut svd) = SVD::try_new(input, true, true, factor * f64::EPSILON, budget) else {
            continue;
        };
        if adjoint {
            let u = svd.v_t.take().map(|vt| vt.adjoint());
            svd.v_t = svd.u.take().map(|u| u.adjoint());
            svd.u = u;
        }
        let (u, vt) = (
            svd.u.as_ref().expect("requested U"),
            svd.v_t.as_ref().expect("requested Vᵀ"),
        );
        let sigma = DMatrix::from_diagonal(&svd.singular_values.map(|x| C64::new(x, 0.0)));
        last = frobenius(&(u * sigma * vt - &m));
        if last <= limit {
            return Ok(svd);
        }
    }
    Err(Error::NonConvergence {
        routine: "SVD",
        iterations: budget,
        residual: if scale > 0.0 { last / scale } else { last },
    })
}

/// Outcome of [`commuting_family_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyCheck {
    pub commutative: bool,
    /// Largest scaled commutator norm `‖[P, Q]‖ / ‖A‖^{deg P + deg Q}`.
    pub max_residual: f64,
    /// Pair attaining the maximum, as (family index, family index).
    pub worst_pair: (usize, usize),
}

/// Checks that `{A*ⁿAⁿ, AᵏA*ᵏ : 1 ≤ n, k ≤ depth}` is commutative.
///
/// Each commutator `[P, Q]` is measured in the weighted Hilbert–Schmidt norm
/// and divided by `‖A‖^{deg P + deg Q}`, where `deg(A*ⁿAⁿ) = 2n`.
/// Family members are indexed `0..depth` for `A*ⁿAⁿ` (n = index + 1) and
/// `depth..2·depth` for `AᵏA*ᵏ`.
pub fn commuting_family_check(a: &DenseOperator, depth: usize, tol: f64) -> Result<FamilyCheck> {
    if depth == 0 {
        return Err(Error::Argument("commuting family depth must be at least 1".into()));
    }
    let norm = op_norm_default(a)?;
    let b = a.standard();
    if norm == 0.0 {
        return Ok(FamilyCheck {
            commutative: true,
            max_residual: 0.0,
            worst_pair: (0, 0),
        });
    }
    // Work with B/‖B‖ so every member has norm ≤ 1 and the scaling is implicit.
    let bn = &b / C64::new(norm, 0.0);
    let bh = bn.adjoint();
    let mut pow = bn.clone();
    let mut pow_h = bh.clone();
    let mut family = Vec::with_capacity(2 * depth);
    let mut left = Vec::with_capacity(depth);
    let mut right = Vec::with_capacity(depth);
    for k in 1..=depth {
        if k > 1 {
            pow = &pow * &bn;
            pow_h = &pow_h * &bh;
        }
        left.push(&pow_h * &pow);
        right.push(&pow * &pow_h);
    }
    family.extend(left);
    family.extend(right);
    let mut worst = (0.0, (0, 0));
    for i in 0..family.len() {
        for j in i + 1..family.len() {
            let c = &family[i] * &family[j] - &family[j] * &family[i];
            let r = frobenius(&c);
            if r > worst.0 {
                worst = (r, (i, j));
            }
        }
    }
    Ok(FamilyCheck {
        commutative: worst.0 <= tol,
        max_residual: worst.0,
        worst_pair: worst.1,
    })
}

/// `‖A*A − AA*‖ / ‖A‖²` in the weighted Hilbert–Schmidt norm (0 for `A = 0`).
pub fn normality_residual(a: &DenseOperator) -> Result<f64> {
    let norm = op_norm_default(a)?;
    if norm == 0.0 {
        return Ok(0.0);
    }
    let b = a.standard() / C64::new(norm, 0.0);
    let bh = b.adjoint();
    Ok(frobenius(&(&bh * &b - &b * &bh)))
}

/// Options of [`eigensolve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Residual bound `‖Bv − λv‖ ≤ tol·‖B‖` for returned eigenvectors.
    pub tol: f64,
    /// Eigenvalues closer than `cluster_tol·‖B‖` are one spectral point.
    pub cluster_tol: f64,
    /// Clusters within `zero_tol·‖B‖` of the origin are merged into `λ = 0`;
    /// defective zero eigenvalues split by about `√ε·‖B‖` in floating point.
    pub zero_tol: f64,
    /// Largest accepted dimension.
    pub max_dim: usize,
    /// QR sweep budget per eigenvalue.
    pub max_sweeps: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            cluster_tol: 1e-8,
            zero_tol: 1e-6,
            max_dim: 256,
            max_sweeps: 300,
        }
    }
}

/// One spectral point: a cluster of computed eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenCluster {
    pub value: C64,
    /// Algebraic multiplicity (number of eigenvalues in the cluster).
    pub multiplicity: usize,
    /// Orthonormal (in `L²(μ)`) basis of `ker(A − λ)`.
    pub basis: Vec<CFun>,
    /// Largest `‖Av − λv‖ / ‖A‖` over the basis.
    pub residual: f64,
}

/// Spectrum of a dense operator with eigenvalue clusters and eigenspaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigensystem {
    pub clusters: Vec<EigenCluster>,
    pub norm: f64,
    pub stats: QrStats,
}

impl Eigensystem {
    pub fn nonzero(&self) -> impl Iterator<Item = &EigenCluster> {
        self.clusters.iter().filter(|c| c.value != ZERO)
    }
}

pub(crate) fn cmp_complex(a: &C64, b: &C64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Groups values by single linkage at distance `radius`; groups are returned
/// with their members sorted and in ascending order of their first member.
pub(crate) fn cluster_values(values: &[C64], radius: f64) -> Vec<Vec<C64>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<C64>> = Default::default();
    for (i, &v) in values.iter().enumerate() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(v);
    }
    let mut out: Vec<Vec<C64>> = groups.into_values().collect();
    for g in &mut out {
        g.sort_by(cmp_complex);
    }
    out.sort_by(|a, b| cmp_complex(&a[0], &b[0]));
    out
}

fn mean(values: &[C64]) -> C64 {
    values.iter().sum::<C64>() / values.len() as f64
}

/// Right singular vectors of `m` whose singular value is at most `threshold`.
fn null_space(m: DMatrix<C64>, threshold: f64) -> Result<(Vec<DVector<C64>>, f64)> {
    let ncols = m.ncols();
    // nalgebra returns a thin SVD; pad short matrices so all right vectors exist.
    let m = if m.nrows() < ncols {
        let mut padded = DMatrix::from_element(ncols, ncols, ZERO);
        padded.view_mut((0, 0), (m.nrows(), ncols)).copy_from(&m);
        padded
    } else {
        m
    };
    let svd = checked_svd(m)?;
    let vt = svd.v_t.as_ref().expect("requested Vᵀ");
    let mut smallest = f64::INFINITY;
    let mut basis = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        smallest = smallest.min(s);
        if s <= threshold {
            basis.push(vt.row(k).adjoint());
        }
    }
    Ok((basis, smallest))
}

/// Eigenvalues (clustered, with algebraic multiplicities) and eigenspaces.
pub fn eigensolve(a: &DenseOperator, opts: &EigenOptions) -> Result<Eigensystem> {
    let n = a.dim();
    if n > opts.max_dim {
        return Err(Error::Argument(format!(
            "eigensolve is capped at dimension {}, got {n}",
            opts.max_dim
        )));
    }
    let b = a.standard();
    let norm = op_norm_default(a)?;
    let (raw, stats) = schur::eigenvalues(&b, opts.max_sweeps)?;
    let scale = norm.max(f64::MIN_POSITIVE);
    let mut zero_count = 0usize;
    let mut points: Vec<(C64, usize)> = Vec::new();
    for group in cluster_values(&raw, opts.cluster_tol * scale) {
        let centre = mean(&group);
        if centre.norm() <= opts.zero_tol * scale || norm == 0.0 {
            zero_count += group.len();
        } else {
            points.push((centre, group.len()));
        }
    }
    if zero_count > 0 {
        points.push((ZERO, zero_count));
    }
    points.sort_by(|x, y| cmp_complex(&x.0, &y.0));
    let sq: Vec<f64> = a.space.weights().iter().map(|m| m.sqrt()).collect();
    let mut clusters = Vec::with_capacity(points.len());
    for (value, multiplicity) in points {
        let shifted = &b - DMatrix::<C64>::identity(n, n) * value;
        let (vectors, smallest) = null_space(shifted, opts.tol * scale)?;
        if vectors.is_empty() {
            return Err(Error::NonConvergence {
                routine: "eigenvector extraction",
                iterations: stats.sweeps,
                residual: smallest / scale,
            });
        }
        let mut residual: f64 = 0.0;
        let basis = vectors
            .iter()
            .map(|v| {
                let r = (&b * v - v * value).norm() / scale;
                residual = residual.max(r);
                CFun::new(v.iter().zip(&sq).map(|(z, s)| z / *s).collect())
            })
            .collect();
        clusters.push(EigenCluster {
            value,
            multiplicity,
            basis,
            residual,
        });
    }
    Ok(Eigensystem { clusters, norm, stats })
}

/// `σ_min([B − λ; Bᴴ − λ̄]) / ‖B‖`: how far `λ` is from having a common
/// eigenvector of `A` and `A*`.
pub fn joint_eigen_residual(a: &DenseOperator, lambda: C64) -> Result<f64> {
    let b = a.standard();
    let n = b.nrows();
    let norm = op_norm_default(a)?;
    if norm == 0.0 {
        return Ok(0.0);
    }
    let id = DMatrix::<C64>::identity(n, n);
    let mut stacked = DMatrix::from_element(2 * n, n, ZERO);
    stacked.view_mut((0, 0), (n, n)).copy_from(&(&b - &id * lambda));
    stacked
        .view_mut((n, 0), (n, n))
        .copy_from(&(b.adjoint() - &id * lambda.conj()));
    Ok(smallest_singular_value(stacked)? / norm)
}

/// `σ_min` of a tall matrix through the Hermitian dilation `[0 R; Rᴴ 0]` of
/// its QR factor, whose eigenvalues are exactly `±σᵢ`. Hermitian eigensolves
/// keep absolute accuracy `O(ε‖M‖)` where the complex SVD occasionally
/// does not.
fn smallest_singular_value(m: DMatrix<C64>) -> Result<f64> {
    let n = m.ncols();
    let r = m.qr().r();
    let mut dilation = DMatrix::from_element(2 * n, 2 * n, ZERO);
    dilation.view_mut((0, n), (n, n)).copy_from(&r);
    dilation.view_mut((n, 0), (n, n)).copy_from(&r.adjoint());
    let budget = 10_000 * 2 * n;
    let eig = SymmetricEigen::try_new(dilation, 5.0 * f64::EPSILON, budget).ok_or(Error::NonConvergence {
        routine: "Hermitian eigensolve",
        iterations: budget,
        residual: f64::NAN,
    })?;
    Ok(eig.eigenvalues.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min))
}

impl DenseOperator {
    pub fn adjoint(&self) -> Self {
        weighted_adjoint(self)
    }

    /// `UU*U − U` residual in the weighted Hilbert–Schmidt norm.
    pub fn partial_isometry_residual(&self) -> Result<f64> {
        let uuu = self.compose(&self.adjoint())?.compose(self)?;
        Ok(uuu.sub(self)?.hs_norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Partition;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn half_space() -> MeasureSpace {
        MeasureSpace::uniform(2, 1.0).unwrap()
    }

    fn spec(u: &[f64], w: &[f64]) -> CondOpSpec {
        CondOpSpec::new(
            half_space(),
            Partition::trivial(2),
            CFun::from_real(u),
            CFun::from_real(w),
        )
        .unwrap()
    }

    #[test]
    fn materialize_column_vector_example() {
        let a = materialize(&spec(&[1.0, 0.0], &[1.0, 1.0]));
        let want = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.0, 0.0), c(0.5, 0.0), c(0.0, 0.0)]);
        assert_eq!(a.entries(), &want);
    }

    #[test]
    fn materialize_identity_and_averaging() {
        let m = MeasureSpace::from_weights(vec![0.2, 0.3, 0.5]).unwrap();
        let ones = CFun::ones(3);
        let id = CondOpSpec::new(m.clone(), Partition::singletons(3), ones.clone(), ones.clone()).unwrap();
        assert_eq!(materialize(&id).entries(), &DMatrix::identity(3, 3));
        let avg = CondOpSpec::new(m.clone(), Partition::trivial(3), ones.clone(), ones).unwrap();
        let e = materialize(&avg);
        for i in 0..3 {
            for j in 0..3 {
                assert!((e.entries()[(i, j)] - c(m.weight(j), 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn adjoint_is_involution_and_conjugate_transpose_for_uniform_weights() {
        let a = materialize(&spec(&[1.0, 2.0], &[0.5, -1.0]));
        let adj = weighted_adjoint(&a);
        assert_eq!(adj.entries(), &a.entries().adjoint());
        let m = MeasureSpace::from_weights(vec![0.1, 3.0]).unwrap();
        let b = DenseOperator::new(
            DMatrix::from_row_slice(2, 2, &[c(1.0, 2.0), c(0.0, -1.0), c(3.0, 0.5), c(-2.0, 0.0)]),
            m,
        )
        .unwrap();
        assert!(weighted_adjoint(&weighted_adjoint(&b)).max_entry_rel_diff(&b) < 1e-15);
    }

    #[test]
    fn op_norm_simple_cases() {
        let m = MeasureSpace::from_weights(vec![0.1, 0.4, 2.0]).unwrap();
        let id = DenseOperator::identity(&m);
        assert!((op_norm(&id, 1e-12, 100).unwrap() - 1.0).abs() < 1e-14);
        let avg = materialize(&CondOpSpec::new(m, Partition::trivial(3), CFun::ones(3), CFun::ones(3)).unwrap());
        assert!((op_norm(&avg, 1e-12, 100).unwrap() - 1.0).abs() < 1e-12);
        let t = materialize(&spec(&[2.0, 0.0], &[1.0, 1.0]));
        assert!((op_norm(&t, 1e-12, 100).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!(op_norm(&t, 0.0, 100).is_err());
    }

    #[test]
    fn op_norm_close_singular_values() {
        // diag(1, 1 − 1e−9, 0.5): plain power iteration would crawl.
        let m = MeasureSpace::uniform(3, 1.0).unwrap();
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(1.0 - 1e-9, 0.0), c(0.5, 0.0)]));
        let mut full = d.clone();
        full[(0, 1)] = c(1e-6, 0.0);
        let a = DenseOperator::new(full.clone(), m).unwrap();
        let got = op_norm(&a, 1e-12, 20_000).unwrap();
        let want = full.singular_values().max();
        assert!((got - want).abs() < 1e-11, "{got} vs {want}");
    }

    #[test]
    fn herm_power_projection_and_identity_power() {
        let m = MeasureSpace::from_weights(vec![0.2, 0.3, 0.5]).unwrap();
        let e = materialize(&CondOpSpec::new(m.clone(), Partition::trivial(3), CFun::ones(3), CFun::ones(3)).unwrap());
        for p in [0.5, 1.0, 3.0] {
            assert!(herm_power(&e, p).unwrap().max_entry_rel_diff(&e) < 1e-12);
        }
        let t = materialize(&spec(&[1.0, 3.0], &[2.0, -1.0]));
        let tt = t.adjoint().compose(&t).unwrap();
        assert!(herm_power(&tt, 1.0).unwrap().max_entry_rel_diff(&tt) < 1e-12);
        assert!(matches!(herm_power(&t, 0.5), Err(Error::Contract { .. })));
        let neg = DenseOperator::identity(&m).scale(c(-1.0, 0.0));
        assert!(matches!(herm_power(&neg, 0.5), Err(Error::Contract { .. })));
    }

    #[test]
    fn polar_factors_of_projection_and_nilpotent() {
        let e = materialize(&spec(&[1.0, 1.0], &[1.0, 1.0]));
        let pf = polar_factors(&e).unwrap();
        assert!(pf.isometry.max_entry_rel_diff(&e) < 1e-12);
        assert!(pf.modulus.max_entry_rel_diff(&e) < 1e-12);
        assert_eq!(pf.rank, 1);

        let t = materialize(&spec(&[1.0, 1.0], &[1.0, -1.0]));
        let pf = polar_factors(&t).unwrap();
        assert!(pf.isometry.compose(&pf.modulus).unwrap().max_entry_rel_diff(&t) < 1e-12);
        assert!(pf.isometry.partial_isometry_residual().unwrap() < 1e-12);
        // |T| = (1,1)-pattern averaging, U f = ((f₁+f₂)/2, −(f₁+f₂)/2)
        let want_u = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.5, 0.0), c(-0.5, 0.0), c(-0.5, 0.0)]);
        assert!((pf.isometry.entries() - want_u).norm() < 1e-12);
    }

    #[test]
    fn commuting_family_examples() {
        // u = (1,0), w = (1,1): explicit 2×2 commutators are far from zero.
        let t = materialize(&spec(&[1.0, 0.0], &[1.0, 1.0]));
        let check = commuting_family_check(&t, 2, 1e-8).unwrap();
        assert!(!check.commutative);
        assert!(check.max_residual > 1e-3);
        // T² = 0 collapses the family to {T*T, TT*}, which commute here.
        let nil = materialize(&spec(&[1.0, 1.0], &[1.0, -1.0]));
        assert!(commuting_family_check(&nil, 4, 1e-8).unwrap().commutative);
        // normal operators are centered
        let normal = materialize(&spec(&[1.0, 2.0], &[1.0, 2.0]));
        assert!(commuting_family_check(&normal, 4, 1e-8).unwrap().commutative);
        assert!(commuting_family_check(&normal, 0, 1e-8).is_err());
    }

    #[test]
    fn eigensolve_small_cases() {
        let opts = EigenOptions::default();
        let e = materialize(&spec(&[1.0, 1.0], &[1.0, 1.0]));
        let es = eigensolve(&e, &opts).unwrap();
        let values: Vec<_> = es.clusters.iter().map(|c| (c.value, c.multiplicity)).collect();
        assert_eq!(values, vec![(c(0.0, 0.0), 1), (c(1.0, 0.0), 1)]);

        let t = materialize(&spec(&[1.0, 0.0], &[1.0, 1.0]));
        let es = eigensolve(&t, &opts).unwrap();
        assert_eq!(es.clusters.len(), 2);
        assert!((es.clusters[1].value - c(0.5, 0.0)).norm() < 1e-14);
        assert!(es.clusters.iter().all(|c| c.residual <= 1e-8));

        // nilpotent: defective zero eigenvalue
        let nil = materialize(&spec(&[1.0, 1.0], &[1.0, -1.0]));
        let es = eigensolve(&nil, &opts).unwrap();
        assert_eq!(es.clusters.len(), 1);
        assert_eq!(es.clusters[0].multiplicity, 2);
        assert_eq!(es.clusters[0].basis.len(), 1);
    }

    #[test]
    fn eigensolve_respects_dimension_cap() {
        let m = MeasureSpace::uniform(3, 1.0).unwrap();
        let opts = EigenOptions {
            max_dim: 2,
            ..EigenOptions::default()
        };
        assert!(eigensolve(&DenseOperator::identity(&m), &opts).is_err());
    }

    #[test]
    fn joint_residual_detects_non_joint_eigenvalue() {
        let t = materialize(&spec(&[1.0, 0.0], &[1.0, 1.0]));
        assert!(joint_eigen_residual(&t, c(0.5, 0.0)).unwrap() > 1e-3);
        let s = materialize(&spec(&[1.0, 2.0], &[1.0, 2.0]));
        assert!(joint_eigen_residual(&s, c(2.5, 0.0)).unwrap() < 1e-12);
    }

    #[test]
    fn clustering_merges_close_values() {
        let v = [c(1.0, 0.0), c(1.0 + 1e-10, 0.0), c(-2.0, 0.0), c(1.0, 1e-10)];
        let groups = cluster_values(&v, 1e-8);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0], vec![c(-2.0, 0.0)]);
        assert_eq!(groups[1].len(), 3);
    }
}
