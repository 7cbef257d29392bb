//! Integral operators `Tf(x) = Σ_y k(x, y) f(y) μ(y)` and their realization as
//! weighted conditional type operators on the product space `X × X`.
//!
//! On `X × X` with `μ ⊗ μ` and the algebra of first-coordinate strips
//! `{A × X}`, conditional expectation integrates out the second coordinate.
//! With `u := k` and `w := 1`, `M_w E M_u` applied to `f'(x, y) = f(y)`
//! returns `Tf(x)` on every fibre. This only works when `μ(X) = 1`, because
//! the strip average divides by `μ(X)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::classify::{centered_from_levels, CriterionVerdict, Status};
use crate::condop::{BlockLevels, CondOpSpec};
use crate::measure::{CFun, ComplexSum, KahanSum, MeasureSpace, Partition};
use crate::oracle::DenseOperator;
use crate::{Error, Result, C64, DEFAULT_SUPP_TOL};

/// Largest base dimension whose product space is materialized as points.
pub const MATERIALIZE_CAP: usize = 64;

/// Relative tolerance on `μ(X) = 1`.
pub const PROBABILITY_TOL: f64 = 1e-12;

/// A kernel `k(x, y)` on a finite measure space.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    base_space: MeasureSpace,
    kernel: DMatrix<C64>,
}

impl KernelSpec {
    pub fn new(base_space: MeasureSpace, kernel: DMatrix<C64>) -> Result<Self> {
        let n = base_space.len();
        if kernel.nrows() != n {
            return Err(Error::shape("kernel rows", n, kernel.nrows()));
        }
        if kernel.ncols() != n {
            return Err(Error::shape("kernel columns", n, kernel.ncols()));
        }
        if kernel.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::invalid("kernel", "entries must be finite"));
        }
        Ok(Self { base_space, kernel })
    }

    pub fn base_space(&self) -> &MeasureSpace {
        &self.base_space
    }

    pub fn kernel(&self) -> &DMatrix<C64> {
        &self.kernel
    }

    pub fn len(&self) -> usize {
        self.base_space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base_space.is_empty()
    }

    /// `(Tf)(x) = Σ_y k(x, y) f(y) μ(y)`.
    pub fn kernel_apply(&self, f: &CFun) -> Result<CFun> {
        self.base_space.check(f, "kernel operator argument")?;
        let mu = self.base_space.weights();
        Ok(CFun::new(
            (0..self.len())
                .map(|x| {
                    let mut s = ComplexSum::default();
                    for (y, &m) in mu.iter().enumerate() {
                        s.add(self.kernel[(x, y)] * f.values()[y] * m);
                    }
                    s.value()
                })
                .collect(),
        ))
    }

    pub fn is_probability(&self) -> bool {
        (self.base_space.total_mass() - 1.0).abs() <= PROBABILITY_TOL
    }

    /// `(k, μ) ↦ (k · μ(X), μ / μ(X))`, which leaves `kernel_apply` unchanged
    /// and makes `μ` a probability measure.
    pub fn normalized(&self) -> Result<Self> {
        let total = self.base_space.total_mass();
        let weights = self.base_space.weights().iter().map(|w| w / total).collect();
        Self::new(
            MeasureSpace::new(self.base_space.ids().to_vec(), weights)?,
            &self.kernel * C64::new(total, 0.0),
        )
    }

    /// `∫ k(x, y) dμ(y)` per row.
    pub fn row_integrals(&self) -> Vec<C64> {
        let mu = self.base_space.weights();
        (0..self.len())
            .map(|x| {
                let mut s = ComplexSum::default();
                for (y, &m) in mu.iter().enumerate() {
                    s.add(self.kernel[(x, y)] * m);
                }
                s.value()
            })
            .collect()
    }

    /// `∫ |k(x, y)|² dμ(y)` per row.
    pub fn row_square_integrals(&self) -> Vec<f64> {
        let mu = self.base_space.weights();
        (0..self.len())
            .map(|x| {
                let mut s = KahanSum::default();
                for (y, &m) in mu.iter().enumerate() {
                    s.add(self.kernel[(x, y)].norm_sqr() * m);
                }
                s.value()
            })
            .collect()
    }

    fn require_probability(&self, routine: &'static str) -> Result<()> {
        if self.is_probability() {
            Ok(())
        } else {
            Err(Error::Contract {
                routine,
                msg: format!(
                    "μ(X) = {} but the product-space lift needs a probability measure; \
                     rescale with KernelSpec::normalized",
                    self.base_space.total_mass()
                ),
            })
        }
    }

    /// Conditional expectations of the lift, one block per row `x`:
    /// `E(uw) = E(u) = ∫k(x,·)dμ`, `E|u|² = ∫|k(x,·)|²dμ`, `E|w|² = E(w) = 1`.
    fn lifted_levels(&self, supp_tol: f64) -> BlockLevels {
        let r = self.row_integrals();
        let n = self.len();
        BlockLevels::from_values(
            self.base_space.weights().to_vec(),
            self.row_square_integrals(),
            vec![1.0; n],
            r.clone(),
            r,
            vec![C64::new(1.0, 0.0); n],
            supp_tol,
        )
    }

    /// Realizes the kernel operator as `M_1 E M_k` on `X × X`.
    pub fn lift_to_condop(&self) -> Result<LiftedKernel> {
        self.require_probability("lift_to_condop")?;
        let spec = if self.len() <= MATERIALIZE_CAP {
            Some(self.product_spec()?)
        } else {
            None
        };
        Ok(LiftedKernel {
            kernel: self.clone(),
            spec,
        })
    }

    fn product_spec(&self) -> Result<CondOpSpec> {
        let n = self.len();
        let ids = self.base_space.ids();
        let mu = self.base_space.weights();
        let mut pids = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        let mut u = Vec::with_capacity(n * n);
        for x in 0..n {
            for y in 0..n {
                pids.push(format!("{}|{}", ids[x], ids[y]));
                weights.push(mu[x] * mu[y]);
                u.push(self.kernel[(x, y)]);
            }
        }
        let blocks = (0..n).map(|x| (x * n..(x + 1) * n).collect()).collect();
        CondOpSpec::new(
            MeasureSpace::new(pids, weights)?,
            Partition::new(n * n, blocks)?,
            CFun::new(u),
            CFun::ones(n * n),
        )
    }

    /// Boundedness data of the kernel.
    pub fn kernel_bounded_report(&self) -> BoundednessReport {
        let rows = self.row_square_integrals();
        let ess_sup = rows.iter().copied().fold(0.0, f64::max);
        BoundednessReport {
            all_rows_finite: rows.iter().all(|r| r.is_finite()),
            lifted_norm: ess_sup.sqrt(),
            row_square_integrals: rows,
            ess_sup,
        }
    }

    /// Centeredness of the lifted operator: the conditional-type criterion with
    /// `E(uw) = E(u) = ∫k(x,·)dμ`, `E|u|² = ∫|k(x,·)|²dμ` and `w = 1`.
    /// Witnesses are row indices.
    pub fn kernel_centered(&self, tau: f64) -> Result<CriterionVerdict> {
        self.require_probability("kernel_centered")?;
        if !(tau >= 0.0) {
            return Err(Error::Argument(format!("tolerance must be non-negative, got {tau}")));
        }
        let lv = self.lifted_levels(DEFAULT_SUPP_TOL);
        let mut v = centered_from_levels(&lv, tau, |rows| {
            let mut r = rows.to_vec();
            r.sort_unstable();
            r
        });
        // with w ≡ 1 the equivalence needs S(∫k dμ) = X
        v.matching_supports = lv.in_h.iter().all(|&b| b);
        Ok(v)
    }

    /// Normality of the lifted operator: `|∫k(x,·)dμ|² = ∫|k(x,·)|²dμ` on every
    /// row, relative to `∫|k(x,·)|²dμ`.
    pub fn kernel_normal(&self, tau: f64) -> Result<CriterionVerdict> {
        self.require_probability("kernel_normal")?;
        if !(tau >= 0.0) {
            return Err(Error::Argument(format!("tolerance must be non-negative, got {tau}")));
        }
        let lv = self.lifted_levels(DEFAULT_SUPP_TOL);
        let floor = lv.supp_tol * lv.eu2.iter().copied().fold(0.0, f64::max);
        let mut witness = Vec::new();
        let mut residual: f64 = 0.0;
        for x in 0..self.len() {
            let diff = (lv.euw[x].norm_sqr() - lv.eu2[x]).abs();
            let d = if diff == 0.0 {
                0.0
            } else {
                diff / lv.eu2[x].max(floor).max(f64::MIN_POSITIVE)
            };
            residual = residual.max(d);
            if d > tau {
                witness.push(x);
            }
        }
        let matching = lv.in_h == lv.in_s;
        Ok(if witness.is_empty() {
            CriterionVerdict {
                status: Status::Yes,
                witness,
                criterion_id: "row_mean_modulus_equality".into(),
                residual,
                matching_supports: matching,
            }
        } else {
            CriterionVerdict {
                status: Status::No,
                witness,
                criterion_id: "row_mean_modulus_fails".into(),
                residual,
                matching_supports: matching,
            }
        })
    }

    /// Largest deviation of a row from its `μ`-mean, relative to the row's
    /// `L²(μ)` size.
    pub fn max_row_variation(&self) -> f64 {
        let r = self.row_integrals();
        let m = self.row_square_integrals();
        let total = self.base_space.total_mass();
        (0..self.len())
            .map(|x| {
                let mean = r[x] / total;
                let dev = (0..self.len())
                    .map(|y| (self.kernel[(x, y)] - mean).norm())
                    .fold(0.0, f64::max);
                if dev == 0.0 {
                    0.0
                } else {
                    dev / (m[x] / total).sqrt()
                }
            })
            .fold(0.0, f64::max)
    }

    /// The kernel operator itself on `L²(μ)`: matrix `k(x, y) μ(y)`.
    pub fn base_operator(&self) -> DenseOperator {
        let mu = self.base_space.weights();
        let n = self.len();
        DenseOperator::new(
            DMatrix::from_fn(n, n, |x, y| self.kernel[(x, y)] * mu[y]),
            self.base_space.clone(),
        )
        .expect("kernel dimensions are validated at construction")
    }
}

/// Integrability data of a kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    /// `M(x) = ∫|k(x, y)|² dμ(y)`.
    pub row_square_integrals: Vec<f64>,
    /// Every `M(x)` is finite (the almost-everywhere condition).
    pub all_rows_finite: bool,
    /// `max_x M(x)` (the essential supremum).
    pub ess_sup: f64,
    /// `(max_x M(x))^{1/2}`, the norm of the lifted operator.
    pub lifted_norm: f64,
}

/// The lift of a kernel operator to `X × X`.
///
/// Product points are ordered row-major: index `x · n + y` is `(x, y)`.
#[derive(Debug, Clone)]
pub struct LiftedKernel {
    kernel: KernelSpec,
    spec: Option<CondOpSpec>,
}

impl LiftedKernel {
    /// The materialized `M_1 E M_k`, available for `n ≤ MATERIALIZE_CAP`.
    pub fn spec(&self) -> Option<&CondOpSpec> {
        self.spec.as_ref()
    }

    pub fn base_len(&self) -> usize {
        self.kernel.len()
    }

    /// `f'(x, y) = f(y)`.
    pub fn embed(&self, f: &CFun) -> Result<CFun> {
        let n = self.base_len();
        self.kernel.base_space.check(f, "embedding")?;
        Ok(CFun::new((0..n * n).map(|i| f.values()[i % n]).collect()))
    }

    /// `g(·, y)` as a function on `X`.
    pub fn restrict(&self, g: &CFun, y: usize) -> Result<CFun> {
        let n = self.base_len();
        if g.len() != n * n {
            return Err(Error::shape("product-space function", n * n, g.len()));
        }
        if y >= n {
            return Err(Error::Argument(format!("fibre index {y} out of range 0..{n}")));
        }
        Ok(CFun::new((0..n).map(|x| g.values()[x * n + y]).collect()))
    }

    /// `(M_1 E M_k g)(x, y) = Σ_{y'} k(x, y') g(x, y') μ(y')`, evaluated through
    /// the materialized spec when present and by the formula otherwise.
    pub fn apply(&self, g: &CFun) -> Result<CFun> {
        if let Some(spec) = &self.spec {
            return spec.apply(g);
        }
        let n = self.base_len();
        if g.len() != n * n {
            return Err(Error::shape("product-space function", n * n, g.len()));
        }
        let mu = self.kernel.base_space.weights();
        let mut out = Vec::with_capacity(n * n);
        for x in 0..n {
            let mut s = ComplexSum::default();
            for (y, &m) in mu.iter().enumerate() {
                s.add(self.kernel.kernel[(x, y)] * g.values()[x * n + y] * m);
            }
            let v = s.value();
            out.extend(std::iter::repeat_n(v, n));
        }
        Ok(CFun::new(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn half() -> MeasureSpace {
        MeasureSpace::uniform(2, 1.0).unwrap()
    }

    fn column_kernel() -> KernelSpec {
        KernelSpec::new(half(), DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(1.0), c(0.0)])).unwrap()
    }

    #[test]
    fn constant_kernel_averages() {
        let m = MeasureSpace::from_weights(vec![0.2, 0.3, 0.5]).unwrap();
        let ks = KernelSpec::new(m, DMatrix::from_element(3, 3, c(1.0))).unwrap();
        let tf = ks.kernel_apply(&CFun::from_real(&[1.0, 2.0, 4.0])).unwrap();
        assert!(tf.max_diff(&CFun::constant(3, c(0.2 + 0.6 + 2.0))) < 1e-15);
        let rep = ks.kernel_bounded_report();
        assert!((rep.ess_sup - 1.0).abs() < 1e-15);
        assert!((rep.lifted_norm - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reproducing_kernel_is_identity() {
        let m = MeasureSpace::from_weights(vec![0.25, 0.75]).unwrap();
        let k = DMatrix::from_row_slice(2, 2, &[c(4.0), c(0.0), c(0.0), c(4.0 / 3.0)]);
        let ks = KernelSpec::new(m, k).unwrap();
        let f = CFun::from_real(&[3.0, -7.0]);
        assert!(ks.kernel_apply(&f).unwrap().max_diff(&f) < 1e-15);
    }

    #[test]
    fn column_kernel_apply_and_bound() {
        let ks = column_kernel();
        let tf = ks.kernel_apply(&CFun::from_real(&[3.0, 5.0])).unwrap();
        assert_eq!(tf, CFun::from_real(&[1.5, 1.5]));
        let rep = ks.kernel_bounded_report();
        assert_eq!(rep.ess_sup, 0.5);
        assert!((rep.lifted_norm - 0.5f64.sqrt()).abs() < 1e-15);
        let scaled = KernelSpec::new(half(), ks.kernel() * c(3.0)).unwrap();
        assert!((scaled.kernel_bounded_report().ess_sup - 9.0 * 0.5).abs() < 1e-14);
    }

    #[test]
    fn lift_round_trip_on_basis() {
        let ks = column_kernel();
        let lift = ks.lift_to_condop().unwrap();
        assert!(lift.spec().is_some());
        for j in 0..2 {
            let f = CFun::basis(2, j);
            let lifted = lift.apply(&lift.embed(&f).unwrap()).unwrap();
            for y in 0..2 {
                assert_eq!(lift.restrict(&lifted, y).unwrap(), ks.kernel_apply(&f).unwrap());
            }
        }
    }

    #[test]
    fn lift_requires_probability_measure() {
        let m = MeasureSpace::from_weights(vec![1.0, 2.0]).unwrap();
        let ks = KernelSpec::new(m, DMatrix::from_element(2, 2, c(1.0))).unwrap();
        assert!(matches!(ks.lift_to_condop(), Err(Error::Contract { .. })));
        let norm = ks.normalized().unwrap();
        assert!(norm.is_probability());
        let f = CFun::from_real(&[1.0, -2.0]);
        assert!(norm.kernel_apply(&f).unwrap().max_diff(&ks.kernel_apply(&f).unwrap()) < 1e-14);
        assert!(norm.lift_to_condop().is_ok());
    }

    #[test]
    fn lazy_lift_matches_materialized() {
        let m = MeasureSpace::from_weights(vec![0.1, 0.6, 0.3]).unwrap();
        let k = DMatrix::from_fn(3, 3, |i, j| C64::new(i as f64 - j as f64, (i * j) as f64));
        let ks = KernelSpec::new(m, k).unwrap();
        let eager = ks.lift_to_condop().unwrap();
        let lazy = LiftedKernel {
            kernel: ks.clone(),
            spec: None,
        };
        let g = CFun::new((0..9).map(|i| C64::new(i as f64, 1.0 - i as f64)).collect());
        assert!(eager.apply(&g).unwrap().max_diff(&lazy.apply(&g).unwrap()) < 1e-13);
    }

    #[test]
    fn kernel_verdicts() {
        let row_constant = KernelSpec::new(
            half(),
            DMatrix::from_row_slice(2, 2, &[c(2.0), c(2.0), C64::new(0.0, -1.0), C64::new(0.0, -1.0)]),
        )
        .unwrap();
        assert_eq!(row_constant.kernel_centered(1e-8).unwrap().status, Status::Yes);
        let n = row_constant.kernel_normal(1e-8).unwrap();
        assert_eq!(n.status, Status::Yes);
        assert!(n.matching_supports);

        let col = column_kernel();
        assert_eq!(col.kernel_centered(1e-8).unwrap().status, Status::No);
        assert_eq!(col.kernel_normal(1e-8).unwrap().status, Status::No);

        // one zero-mean row: identity fails only where ∫k dμ = 0
        let zero_mean = KernelSpec::new(
            half(),
            DMatrix::from_row_slice(2, 2, &[c(1.0), c(-1.0), c(3.0), c(3.0)]),
        )
        .unwrap();
        let v = zero_mean.kernel_centered(1e-8).unwrap();
        assert_eq!(v.status, Status::Indeterminate);
        assert_eq!(v.witness, vec![0]);
    }
}
