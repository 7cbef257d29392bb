//! The weighted conditional type operator `T = M_w E M_u` and its closed forms.
//!
//! Every quantity the closed forms need is a conditional expectation, hence
//! constant on atoms. [`CondOpSpec`] computes them once per block at
//! construction ([`BlockLevels`]); the operations below only combine those
//! block values with pointwise multiplications by `u`, `w` and their
//! conjugates.

use serde::{Deserialize, Serialize};

use crate::measure::{block_means, CFun, MeasureSpace, Partition, SupportSet};
use crate::{Error, Result, C64, DEFAULT_SUPP_TOL};

/// Which positive operator a power refers to: `T*T` or `TT*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    StarT,
    TStar,
}

/// Per-block conditional expectations of a spec together with the support
/// decisions made on them.
///
/// Supports use a relative threshold: a block value counts as non-zero when it
/// exceeds `supp_tol` times the largest value of its Cauchy–Schwarz majorant
/// (`E|u|²` for itself, `(E|u|²)^{1/2}` for `E(u)`, `(E|u|²E|w|²)^{1/2}` for
/// `E(uw)`, and so on).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLevels {
    pub mass: Vec<f64>,
    pub eu2: Vec<f64>,
    pub ew2: Vec<f64>,
    pub euw: Vec<C64>,
    pub eu: Vec<C64>,
    pub ew: Vec<C64>,
    pub in_s: Vec<bool>,
    pub in_g: Vec<bool>,
    pub in_h: Vec<bool>,
    pub in_eu: Vec<bool>,
    pub in_ew: Vec<bool>,
    pub supp_tol: f64,
}

impl BlockLevels {
    pub(crate) fn from_values(
        mass: Vec<f64>,
        eu2: Vec<f64>,
        ew2: Vec<f64>,
        euw: Vec<C64>,
        eu: Vec<C64>,
        ew: Vec<C64>,
        supp_tol: f64,
    ) -> Self {
        let max_eu2 = eu2.iter().copied().fold(0.0, f64::max);
        let max_ew2 = ew2.iter().copied().fold(0.0, f64::max);
        let max_prod = eu2.iter().zip(&ew2).map(|(a, b)| (a * b).sqrt()).fold(0.0, f64::max);
        let above = |x: f64, scale: f64| x > supp_tol * scale;
        Self {
            in_s: eu2.iter().map(|&x| above(x, max_eu2)).collect(),
            in_g: ew2.iter().map(|&x| above(x, max_ew2)).collect(),
            in_h: euw.iter().map(|z| above(z.norm(), max_prod)).collect(),
            in_eu: eu.iter().map(|z| above(z.norm(), max_eu2.sqrt())).collect(),
            in_ew: ew.iter().map(|z| above(z.norm(), max_ew2.sqrt())).collect(),
            mass,
            eu2,
            ew2,
            euw,
            eu,
            ew,
            supp_tol,
        }
    }

    pub fn block_count(&self) -> usize {
        self.mass.len()
    }

    /// `E(|u|²)E(|w|²)` per block.
    pub fn product(&self, b: usize) -> f64 {
        self.eu2[b] * self.ew2[b]
    }

    /// Largest block value of `E(|u|²)E(|w|²)`.
    pub fn max_product(&self) -> f64 {
        (0..self.block_count()).map(|b| self.product(b)).fold(0.0, f64::max)
    }
}

/// The tuple `(μ, 𝒜, u, w)` defining `T = M_w E M_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct CondOpSpec {
    space: MeasureSpace,
    partition: Partition,
    u: CFun,
    w: CFun,
    levels: BlockLevels,
}

impl CondOpSpec {
    pub fn new(space: MeasureSpace, partition: Partition, u: CFun, w: CFun) -> Result<Self> {
        Self::with_supp_tol(space, partition, u, w, DEFAULT_SUPP_TOL)
    }

    pub fn with_supp_tol(space: MeasureSpace, partition: Partition, u: CFun, w: CFun, supp_tol: f64) -> Result<Self> {
        if !(supp_tol >= 0.0) {
            return Err(Error::Argument(format!(
                "support tolerance must be non-negative, got {supp_tol}"
            )));
        }
        partition.check(&space)?;
        space.check(&u, "u")?;
        space.check(&w, "w")?;
        if u.values()
            .iter()
            .chain(w.values())
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::invalid(
                "weighted conditional operator",
                "u and w must be finite",
            ));
        }
        let levels = compute_levels(&space, &partition, &u, &w, supp_tol)?;
        Ok(Self {
            space,
            partition,
            u,
            w,
            levels,
        })
    }

    /// The same operator with a different support tolerance.
    pub fn retuned(&self, supp_tol: f64) -> Result<Self> {
        Self::with_supp_tol(
            self.space.clone(),
            self.partition.clone(),
            self.u.clone(),
            self.w.clone(),
            supp_tol,
        )
    }

    pub fn space(&self) -> &MeasureSpace {
        &self.space
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn u(&self) -> &CFun {
        &self.u
    }

    pub fn w(&self) -> &CFun {
        &self.w
    }

    pub fn levels(&self) -> &BlockLevels {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn supp_tol(&self) -> f64 {
        self.levels.supp_tol
    }

    fn expand_real(&self, per_block: &[f64]) -> CFun {
        CFun::new(
            (0..self.len())
                .map(|i| C64::new(per_block[self.partition.atom_of(i)], 0.0))
                .collect(),
        )
    }

    fn expand_complex(&self, per_block: &[C64]) -> CFun {
        CFun::new((0..self.len()).map(|i| per_block[self.partition.atom_of(i)]).collect())
    }

    fn expand_flags(&self, per_block: &[bool]) -> SupportSet {
        SupportSet::from_flags(
            (0..self.len()).map(|i| per_block[self.partition.atom_of(i)]).collect(),
            self.levels.supp_tol,
        )
    }

    /// `E(|u|²)`.
    pub fn e_abs_u_sq(&self) -> CFun {
        self.expand_real(&self.levels.eu2)
    }

    /// `E(|w|²)`.
    pub fn e_abs_w_sq(&self) -> CFun {
        self.expand_real(&self.levels.ew2)
    }

    /// `E(uw)`.
    pub fn e_uw(&self) -> CFun {
        self.expand_complex(&self.levels.euw)
    }

    /// `E(u)`.
    pub fn e_u(&self) -> CFun {
        self.expand_complex(&self.levels.eu)
    }

    /// `E(w)`.
    pub fn e_w(&self) -> CFun {
        self.expand_complex(&self.levels.ew)
    }

    /// `S = S(E(|u|²))`.
    pub fn support_s(&self) -> SupportSet {
        self.expand_flags(&self.levels.in_s)
    }

    /// `G = S(E(|w|²))`.
    pub fn support_g(&self) -> SupportSet {
        self.expand_flags(&self.levels.in_g)
    }

    /// `H = S(E(uw))`.
    pub fn support_h(&self) -> SupportSet {
        self.expand_flags(&self.levels.in_h)
    }

    pub fn support_eu(&self) -> SupportSet {
        self.expand_flags(&self.levels.in_eu)
    }

    pub fn support_ew(&self) -> SupportSet {
        self.expand_flags(&self.levels.in_ew)
    }

    fn check(&self, f: &CFun) -> Result<()> {
        self.space.check(f, "operator argument")
    }

    /// Block values of `E(g·f)`.
    fn cond_of_product(&self, g: &CFun, f: &CFun) -> Result<Vec<C64>> {
        self.check(f)?;
        block_means(&(g * f), &self.partition, &self.space)
    }

    /// `Tf = w · E(uf)`.
    pub fn apply(&self, f: &CFun) -> Result<CFun> {
        let euf = self.cond_of_product(&self.u, f)?;
        Ok(self.weighted(&self.w, |b| euf[b]))
    }

    /// `T*f = ū · E(w̄f)`.
    pub fn adjoint_apply(&self, f: &CFun) -> Result<CFun> {
        let ewf = self.cond_of_product(&self.w.conj(), f)?;
        Ok(self.weighted(&self.u.conj(), |b| ewf[b]))
    }

    /// `Tⁿf = E(uw)^{n−1} · w · E(uf)` for `n ≥ 1`.
    pub fn power_apply(&self, n: u32, f: &CFun) -> Result<CFun> {
        if n == 0 {
            return Err(Error::Argument("power_apply requires n ≥ 1".into()));
        }
        let euf = self.cond_of_product(&self.u, f)?;
        let euw = &self.levels.euw;
        Ok(self.weighted(&self.w, |b| euw[b].powu(n - 1) * euf[b]))
    }

    /// `‖T‖ = ‖(E|w|²)^{1/2}(E|u|²)^{1/2}‖_∞`.
    pub fn norm_formula(&self) -> f64 {
        self.levels.max_product().sqrt()
    }

    /// `(T*T)^p f` or `(TT*)^p f` by the multiplication–conditional closed form.
    ///
    /// The factor `(E|u|²)^{p−1}` (resp. `(E|w|²)^{p−1}`) is only evaluated on
    /// `S` (resp. `G`); off that set the coefficient is zero.
    pub fn positive_power(&self, p: f64, side: Side, f: &CFun) -> Result<CFun> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::Argument(format!("power must be positive and finite, got {p}")));
        }
        let lv = &self.levels;
        match side {
            Side::StarT => {
                let euf = self.cond_of_product(&self.u, f)?;
                let coef: Vec<f64> = (0..lv.block_count())
                    .map(|b| {
                        if lv.in_s[b] {
                            lv.eu2[b].powf(p - 1.0) * lv.ew2[b].powf(p)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                Ok(self.weighted(&self.u.conj(), |b| euf[b] * coef[b]))
            }
            Side::TStar => {
                let ewf = self.cond_of_product(&self.w.conj(), f)?;
                let coef: Vec<f64> = (0..lv.block_count())
                    .map(|b| {
                        if lv.in_g[b] {
                            lv.ew2[b].powf(p - 1.0) * lv.eu2[b].powf(p)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                Ok(self.weighted(&self.w, |b| ewf[b] * coef[b]))
            }
        }
    }

    /// Closed-form factors of the polar decomposition `T = U|T|`.
    pub fn polar_parts(&self) -> PolarParts<'_> {
        let lv = &self.levels;
        let modulus = (0..lv.block_count())
            .map(|b| {
                if lv.in_s[b] {
                    (lv.ew2[b] / lv.eu2[b]).sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let isometry = (0..lv.block_count())
            .map(|b| {
                if lv.in_s[b] && lv.in_g[b] {
                    (lv.ew2[b] * lv.eu2[b]).sqrt().recip()
                } else {
                    0.0
                }
            })
            .collect();
        PolarParts {
            spec: self,
            modulus,
            isometry,
        }
    }

    /// Aluthge transform `T̂f = χ_S E(uw)/E(|u|²) · ū · E(uf)`.
    pub fn aluthge_apply(&self, f: &CFun) -> Result<CFun> {
        let lv = &self.levels;
        let euf = self.cond_of_product(&self.u, f)?;
        Ok(self.weighted(&self.u.conj(), |b| {
            if lv.in_s[b] {
                lv.euw[b] / lv.eu2[b] * euf[b]
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    /// `g(x) · c(atom(x))`.
    fn weighted(&self, g: &CFun, per_block: impl Fn(usize) -> C64) -> CFun {
        CFun::new(
            g.values()
                .iter()
                .enumerate()
                .map(|(i, &gi)| gi * per_block(self.partition.atom_of(i)))
                .collect(),
        )
    }
}

/// `|T|` and `U` as block coefficients:
/// `|T|f = m · ū · E(uf)` and `Uf = s · w · E(uf)` with `m`, `s` constant on atoms.
#[derive(Debug, Clone)]
pub struct PolarParts<'a> {
    spec: &'a CondOpSpec,
    modulus: Vec<f64>,
    isometry: Vec<f64>,
}

impl PolarParts<'_> {
    /// `|T|f = (E|w|²/E|u|²)^{1/2} χ_S ū E(uf)`.
    pub fn modulus_apply(&self, f: &CFun) -> Result<CFun> {
        let spec = self.spec;
        let euf = spec.cond_of_product(&spec.u, f)?;
        Ok(spec.weighted(&spec.u.conj(), |b| euf[b] * self.modulus[b]))
    }

    /// `Uf = (χ_{S∩G} / (E|w|² E|u|²))^{1/2} w E(uf)`.
    pub fn isometry_apply(&self, f: &CFun) -> Result<CFun> {
        let spec = self.spec;
        let euf = spec.cond_of_product(&spec.u, f)?;
        Ok(spec.weighted(&spec.w, |b| euf[b] * self.isometry[b]))
    }

    pub fn modulus_coefficients(&self) -> &[f64] {
        &self.modulus
    }

    pub fn isometry_coefficients(&self) -> &[f64] {
        &self.isometry
    }
}

fn compute_levels(
    space: &MeasureSpace,
    partition: &Partition,
    u: &CFun,
    w: &CFun,
    supp_tol: f64,
) -> Result<BlockLevels> {
    let re = |v: Vec<C64>| v.into_iter().map(|z| z.re).collect::<Vec<f64>>();
    Ok(BlockLevels::from_values(
        partition.block_masses(space)?,
        re(block_means(&u.abs_sq(), partition, space)?),
        re(block_means(&w.abs_sq(), partition, space)?),
        block_means(&(u * w), partition, space)?,
        block_means(u, partition, space)?,
        block_means(w, partition, space)?,
        supp_tol,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_spec(u: &[f64], w: &[f64]) -> CondOpSpec {
        CondOpSpec::new(
            MeasureSpace::uniform(2, 1.0).unwrap(),
            Partition::trivial(2),
            CFun::from_real(u),
            CFun::from_real(w),
        )
        .unwrap()
    }

    #[test]
    fn unit_weights_reduce_to_conditional_expectation() {
        let t = pair_spec(&[1.0, 1.0], &[1.0, 1.0]);
        let tf = t.apply(&CFun::from_real(&[2.0, 4.0])).unwrap();
        assert_eq!(tf, CFun::from_real(&[3.0, 3.0]));
        assert_eq!(t.norm_formula(), 1.0);
    }

    #[test]
    fn orthogonal_pair_is_nilpotent() {
        let t = pair_spec(&[1.0, 1.0], &[1.0, -1.0]);
        let tf = t.apply(&CFun::from_real(&[1.0, 1.0])).unwrap();
        assert_eq!(tf, CFun::from_real(&[1.0, -1.0]));
        let f = CFun::new(vec![C64::new(0.3, -1.0), C64::new(2.0, 0.5)]);
        assert_eq!(t.power_apply(2, &f).unwrap().max_modulus(), 0.0);
        assert_eq!(t.norm_formula(), 1.0);
        // Aluthge transform vanishes because E(uw) = 0.
        assert_eq!(t.aluthge_apply(&f).unwrap().max_modulus(), 0.0);
    }

    #[test]
    fn power_one_is_apply() {
        let t = pair_spec(&[1.0, 2.0], &[0.5, -3.0]);
        let f = CFun::from_real(&[1.0, -1.0]);
        assert_eq!(t.power_apply(1, &f).unwrap(), t.apply(&f).unwrap());
        assert!(matches!(t.power_apply(0, &f), Err(Error::Argument(_))));
    }

    #[test]
    fn power_matches_repeated_apply_for_real_weights() {
        // u = w = (1, 2): E(uw) = 2.5, so T²f = 2.5 · w · E(uf).
        let t = pair_spec(&[1.0, 2.0], &[1.0, 2.0]);
        let f = CFun::from_real(&[0.7, -1.3]);
        let twice = t.apply(&t.apply(&f).unwrap()).unwrap();
        let closed = t.power_apply(2, &f).unwrap();
        assert!(twice.max_diff(&closed) < 1e-15);
        let euf = 0.5 * (0.7 - 2.6);
        let expected = CFun::from_real(&[2.5 * euf, 2.5 * 2.0 * euf]);
        assert!(closed.max_diff(&expected) < 1e-15);
    }

    #[test]
    fn norm_with_zero_weight_point() {
        // E|u|² = 2, E|w|² = 1
        let t = pair_spec(&[2.0, 0.0], &[1.0, 1.0]);
        assert!((t.norm_formula() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn projection_is_its_own_modulus() {
        let t = pair_spec(&[1.0, 1.0], &[1.0, 1.0]);
        let f = CFun::from_real(&[2.0, 5.0]);
        let e = t.apply(&f).unwrap();
        let polar = t.polar_parts();
        assert_eq!(polar.modulus_apply(&f).unwrap(), e);
        assert_eq!(polar.isometry_apply(&f).unwrap(), e);
        assert_eq!(t.positive_power(1.0, Side::StarT, &f).unwrap(), e);
        assert_eq!(t.aluthge_apply(&f).unwrap(), e);
    }

    #[test]
    fn orthogonal_pair_polar_parts() {
        let t = pair_spec(&[1.0, 1.0], &[1.0, -1.0]);
        let f = CFun::from_real(&[3.0, -1.0]);
        let polar = t.polar_parts();
        let m = polar.modulus_apply(&f).unwrap();
        assert_eq!(m, CFun::from_real(&[1.0, 1.0]));
        let uf = polar.isometry_apply(&f).unwrap();
        assert_eq!(uf, CFun::from_real(&[1.0, -1.0]));
        let recon = polar.isometry_apply(&m).unwrap();
        assert!(recon.max_diff(&t.apply(&f).unwrap()) < 1e-15);
    }

    #[test]
    fn positive_power_rejects_non_positive_exponent() {
        let t = pair_spec(&[1.0, 1.0], &[1.0, 1.0]);
        let f = CFun::ones(2);
        assert!(t.positive_power(0.0, Side::StarT, &f).is_err());
        assert!(t.positive_power(-1.0, Side::TStar, &f).is_err());
        assert!(t.positive_power(f64::NAN, Side::TStar, &f).is_err());
    }

    #[test]
    fn positive_power_vanishes_off_support() {
        // u vanishes on the second atom, so (T*T)^p kills it even for p < 1.
        let space = MeasureSpace::uniform(4, 1.0).unwrap();
        let part = Partition::from_labels(&[0, 0, 1, 1]).unwrap();
        let t = CondOpSpec::new(
            space,
            part,
            CFun::from_real(&[1.0, 2.0, 0.0, 0.0]),
            CFun::from_real(&[1.0, 1.0, 3.0, 4.0]),
        )
        .unwrap();
        let f = CFun::ones(4);
        let out = t.positive_power(0.25, Side::StarT, &f).unwrap();
        assert!(out.values()[2..].iter().all(|z| z.norm() == 0.0));
        assert!(out.values()[..2].iter().all(|z| z.norm().is_finite()));
        assert!(!t.support_s().contains(2));
    }

    #[test]
    fn cached_levels_are_reproducible() {
        let t = pair_spec(&[0.1, 0.7], &[1.3, -0.2]);
        let again = t.retuned(t.supp_tol()).unwrap();
        assert_eq!(t.levels(), again.levels());
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let t = pair_spec(&[1.0, 1.0], &[1.0, 1.0]);
        assert!(matches!(t.apply(&CFun::ones(3)), Err(Error::Shape { .. })));
        let bad = CondOpSpec::new(
            MeasureSpace::uniform(2, 1.0).unwrap(),
            Partition::trivial(2),
            CFun::ones(3),
            CFun::ones(2),
        );
        assert!(matches!(bad, Err(Error::Shape { .. })));
    }
}
