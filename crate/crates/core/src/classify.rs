//! Centeredness, normality and spectra of `M_w E M_u`.
//!
//! The closed-form criteria are pointwise identities between conditional
//! expectations. They come in pairs whose hypotheses differ on support sets,
//! so a verdict is three-valued: `Indeterminate` means the sufficient clause
//! failed only where the necessary clause says nothing, and the brute-force
//! oracle has to decide.

use serde::{Deserialize, Serialize};

use crate::condop::{BlockLevels, CondOpSpec};
use crate::measure::{is_algebra_measurable, CFun};
use crate::oracle::{self, EigenOptions, FamilyCheck};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Yes,
    No,
    Indeterminate,
}

/// Outcome of a closed-form criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub status: Status,
    /// Points where the tested identity fails (non-empty whenever `status` is `No`).
    pub witness: Vec<usize>,
    /// Which clause decided the verdict.
    pub criterion_id: String,
    /// Largest relative defect of the identity over the points that decided
    /// the verdict (0 when it holds exactly).
    pub residual: f64,
    /// Whether the support condition that turns the criterion into an
    /// equivalence holds.
    pub matching_supports: bool,
}

impl CriterionVerdict {
    fn new(status: Status, witness: Vec<usize>, id: &str, residual: f64, matching_supports: bool) -> Self {
        debug_assert!(status != Status::No || !witness.is_empty());
        Self {
            status,
            witness,
            criterion_id: id.to_string(),
            residual,
            matching_supports,
        }
    }
}

/// Relative defect `|lhs − rhs| / max(scale, floor)`, with `0/0 = 0`.
fn rel_defect(diff: f64, scale: f64, floor: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        diff / scale.max(floor).max(f64::MIN_POSITIVE)
    }
}

/// Points of the blocks in `blocks`, in ascending order.
fn points_of(spec: &CondOpSpec, blocks: &[usize]) -> Vec<usize> {
    let mut pts: Vec<usize> = blocks
        .iter()
        .flat_map(|&b| spec.partition().blocks()[b].iter().copied())
        .collect();
    pts.sort_unstable();
    pts
}

/// Block-level outcome of an "identity on a support" test.
pub(crate) struct BlockTest {
    /// (block, relative defect) for every block where the identity fails.
    pub failing: Vec<(usize, f64)>,
    pub max_defect: f64,
}

/// Evaluates `|E(uw)|² = E(|u|²)E(|w|²)` per block.
pub(crate) fn cs_equality_test(lv: &BlockLevels, tau: f64) -> BlockTest {
    let floor = lv.supp_tol * lv.max_product();
    let mut failing = Vec::new();
    let mut max_defect: f64 = 0.0;
    for b in 0..lv.block_count() {
        let ab = lv.product(b);
        let d = rel_defect((lv.euw[b].norm_sqr() - ab).abs(), ab, floor);
        max_defect = max_defect.max(d);
        if d > tau {
            failing.push((b, d));
        }
    }
    BlockTest { failing, max_defect }
}

/// Centeredness verdict from the block levels; `points` maps blocks to witness points.
pub(crate) fn centered_from_levels(
    lv: &BlockLevels,
    tau: f64,
    points: impl Fn(&[usize]) -> Vec<usize>,
) -> CriterionVerdict {
    let test = cs_equality_test(lv, tau);
    // S(E(u)E(w)) = S ∩ G = H, per block
    let matching = (0..lv.block_count()).all(|b| {
        let euew = lv.in_eu[b] && lv.in_ew[b];
        let sg = lv.in_s[b] && lv.in_g[b];
        euew == sg && sg == lv.in_h[b]
    });
    if test.failing.is_empty() {
        return CriterionVerdict::new(
            Status::Yes,
            Vec::new(),
            "cs_equality_everywhere",
            test.max_defect,
            matching,
        );
    }
    let on_support: Vec<&(usize, f64)> = test
        .failing
        .iter()
        .filter(|(b, _)| lv.in_h[*b] && lv.in_eu[*b] && lv.in_ew[*b])
        .collect();
    if !on_support.is_empty() {
        let blocks: Vec<usize> = on_support.iter().map(|(b, _)| *b).collect();
        let residual = on_support.iter().map(|(_, d)| *d).fold(0.0, f64::max);
        return CriterionVerdict::new(
            Status::No,
            points(&blocks),
            "cs_equality_fails_on_support",
            residual,
            matching,
        );
    }
    let blocks: Vec<usize> = test.failing.iter().map(|(b, _)| *b).collect();
    CriterionVerdict::new(
        Status::Indeterminate,
        points(&blocks),
        "cs_equality_fails_off_support",
        test.max_defect,
        matching,
    )
}

/// Closed-form centeredness test of `M_w E M_u`.
///
/// * `Yes` when `|E(uw)|² = E(|u|²)E(|w|²)` holds at every point;
/// * `No` when it fails somewhere on `S(E(uw)E(w)E(u))`;
/// * `Indeterminate` when it fails only off that set.
pub fn centered_closed_form(spec: &CondOpSpec, tau: f64) -> Result<CriterionVerdict> {
    check_tau(tau)?;
    Ok(centered_from_levels(spec.levels(), tau, |b| points_of(spec, b)))
}

fn check_tau(tau: f64) -> Result<()> {
    if tau >= 0.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("tolerance must be non-negative, got {tau}")))
    }
}

/// Whether `w ≡ 1` up to `tau`.
pub fn has_unit_weight(spec: &CondOpSpec, tau: f64) -> bool {
    spec.w().values().iter().all(|z| (z - C64::new(1.0, 0.0)).norm() <= tau)
}

fn require_unit_weight(spec: &CondOpSpec, tau: f64, routine: &'static str) -> Result<()> {
    if has_unit_weight(spec, tau) {
        Ok(())
    } else {
        Err(Error::Contract {
            routine,
            msg: "requires w ≡ 1".into(),
        })
    }
}

/// `u` is `𝒜`-measurable, with the tolerance taken relative to `max |u|`.
fn u_measurable(spec: &CondOpSpec, tau: f64) -> Result<bool> {
    let scale = spec.u().max_modulus();
    is_algebra_measurable(spec.u(), spec.partition(), spec.space(), tau * scale)
}

fn non_measurable_points(spec: &CondOpSpec, tau: f64) -> Vec<usize> {
    let lv = spec.levels();
    let scale = spec.u().max_modulus();
    (0..spec.len())
        .filter(|&i| (spec.u().values()[i] - lv.eu[spec.partition().atom_of(i)]).norm() > tau * scale)
        .collect()
}

/// Centeredness of `E M_u` (requires `w ≡ 1`) through `|E(u)|² = E(|u|²)`.
///
/// When the identity fails only off `S(E(u))` and `S(E(u)) = S(E(|u|²))`,
/// the verdict falls back to `𝒜`-measurability of `u`.
pub fn centered_eu_special(spec: &CondOpSpec, tau: f64) -> Result<CriterionVerdict> {
    check_tau(tau)?;
    require_unit_weight(spec, tau, "centered_eu_special")?;
    let lv = spec.levels();
    let floor = lv.supp_tol * lv.eu2.iter().copied().fold(0.0, f64::max);
    let mut failing = Vec::new();
    let mut max_defect: f64 = 0.0;
    for b in 0..lv.block_count() {
        let d = rel_defect((lv.eu[b].norm_sqr() - lv.eu2[b]).abs(), lv.eu2[b], floor);
        max_defect = max_defect.max(d);
        if d > tau {
            failing.push((b, d));
        }
    }
    let matching = lv.in_eu == lv.in_s;
    if failing.is_empty() {
        return Ok(CriterionVerdict::new(
            Status::Yes,
            vec![],
            "mean_modulus_equality",
            max_defect,
            matching,
        ));
    }
    let on_support: Vec<&(usize, f64)> = failing.iter().filter(|(b, _)| lv.in_eu[*b]).collect();
    if !on_support.is_empty() {
        let blocks: Vec<usize> = on_support.iter().map(|(b, _)| *b).collect();
        let residual = on_support.iter().map(|(_, d)| *d).fold(0.0, f64::max);
        return Ok(CriterionVerdict::new(
            Status::No,
            points_of(spec, &blocks),
            "mean_modulus_fails_on_support",
            residual,
            matching,
        ));
    }
    if matching {
        return Ok(if u_measurable(spec, tau)? {
            CriterionVerdict::new(Status::Yes, vec![], "multiplier_measurable", max_defect, true)
        } else {
            CriterionVerdict::new(
                Status::No,
                non_measurable_points(spec, tau),
                "multiplier_not_measurable",
                max_defect,
                true,
            )
        });
    }
    let blocks: Vec<usize> = failing.iter().map(|(b, _)| *b).collect();
    Ok(CriterionVerdict::new(
        Status::Indeterminate,
        points_of(spec, &blocks),
        "mean_modulus_fails_off_support",
        max_defect,
        false,
    ))
}

/// Closed-form normality test of `M_w E M_u`.
///
/// * `Yes` when `(E|u|²)^{1/2} w̄ = u (E|w|²)^{1/2}` pointwise;
/// * `No` when `|E(u)|²E(|w|²) = |E(w)|²E(|u|²)` fails on some atom;
/// * for `w ≡ 1` the verdict is exact: normal iff `u` is `𝒜`-measurable.
pub fn normal_closed_form(spec: &CondOpSpec, tau: f64) -> Result<CriterionVerdict> {
    check_tau(tau)?;
    let lv = spec.levels();
    let matching = lv.in_eu == lv.in_s;
    if has_unit_weight(spec, tau) {
        return Ok(if u_measurable(spec, tau)? {
            CriterionVerdict::new(Status::Yes, vec![], "multiplier_measurable", 0.0, matching)
        } else {
            let witness = non_measurable_points(spec, tau);
            let scale = spec.u().max_modulus().max(f64::MIN_POSITIVE);
            let residual = witness
                .iter()
                .map(|&i| (spec.u().values()[i] - lv.eu[spec.partition().atom_of(i)]).norm() / scale)
                .fold(0.0, f64::max);
            CriterionVerdict::new(Status::No, witness, "multiplier_not_measurable", residual, matching)
        });
    }

    // sufficient: (E|u|²)^{1/2} w̄ = u (E|w|²)^{1/2}
    let part = spec.partition();
    let (u, w) = (spec.u().values(), spec.w().values());
    let terms: Vec<(C64, C64)> = (0..spec.len())
        .map(|i| {
            let b = part.atom_of(i);
            (w[i].conj() * lv.eu2[b].sqrt(), u[i] * lv.ew2[b].sqrt())
        })
        .collect();
    let scale = terms.iter().map(|(l, r)| l.norm() + r.norm()).fold(0.0, f64::max);
    let defect_a = terms
        .iter()
        .map(|(l, r)| rel_defect((l - r).norm(), scale, 0.0))
        .fold(0.0, f64::max);
    if defect_a <= tau {
        return Ok(CriterionVerdict::new(
            Status::Yes,
            vec![],
            "aligned_weights",
            defect_a,
            matching,
        ));
    }

    // necessary: |E(u)|² E(|w|²) = |E(w)|² E(|u|²)
    let floor = lv.supp_tol * lv.max_product();
    let mut failing = Vec::new();
    let mut residual: f64 = 0.0;
    for b in 0..lv.block_count() {
        let lhs = lv.eu[b].norm_sqr() * lv.ew2[b];
        let rhs = lv.ew[b].norm_sqr() * lv.eu2[b];
        let d = rel_defect((lhs - rhs).abs(), lv.product(b), floor);
        if d > tau {
            residual = residual.max(d);
            failing.push(b);
        }
    }
    if !failing.is_empty() {
        return Ok(CriterionVerdict::new(
            Status::No,
            points_of(spec, &failing),
            "mean_balance_fails",
            residual,
            matching,
        ));
    }
    Ok(CriterionVerdict::new(
        Status::Indeterminate,
        Vec::new(),
        "between_clauses",
        defect_a,
        matching,
    ))
}

/// Maps an oracle residual to a verdict with a hysteresis band:
/// `≤ lo` is `Yes`, `> hi` is `No`, anything in between is `Indeterminate`.
pub fn hysteresis(residual: f64, lo: f64, hi: f64) -> Status {
    if residual <= lo {
        Status::Yes
    } else if residual > hi {
        Status::No
    } else {
        Status::Indeterminate
    }
}

/// Brute-force centeredness of the materialized operator.
pub fn centered_oracle(spec: &CondOpSpec, depth: usize, tol: f64) -> Result<FamilyCheck> {
    oracle::commuting_family_check(&oracle::materialize(spec), depth, tol)
}

/// Brute-force normality residual `‖T*T − TT*‖ / ‖T‖²`.
pub fn normal_oracle(spec: &CondOpSpec) -> Result<f64> {
    oracle::normality_residual(&oracle::materialize(spec))
}

/// The three equivalent conditions for `E M_u` evaluated independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub centered_closed_form: CriterionVerdict,
    pub centered_oracle_residual: f64,
    pub centered_oracle: bool,
    pub normal_closed_form: CriterionVerdict,
    pub normal_oracle_residual: f64,
    pub normal_oracle: bool,
    pub multiplier_measurable: bool,
    /// All decided predicates agree.
    pub agree: bool,
}

/// Evaluates centered / normal / `u ∈ L^∞(𝒜)` for `E M_u` under
/// `S(E(u)) = S(E(|u|²))`; refuses otherwise.
pub fn equivalence_suite(spec: &CondOpSpec, tau: f64, depth: usize) -> Result<EquivalenceReport> {
    check_tau(tau)?;
    require_unit_weight(spec, tau, "equivalence_suite")?;
    let lv = spec.levels();
    if lv.in_eu != lv.in_s {
        let differing: Vec<usize> = (0..lv.block_count()).filter(|&b| lv.in_eu[b] != lv.in_s[b]).collect();
        return Err(Error::Contract {
            routine: "equivalence_suite",
            msg: format!(
                "S(E(u)) and S(E(|u|²)) differ on points {:?}",
                points_of(spec, &differing)
            ),
        });
    }
    let centered = centered_eu_special(spec, tau)?;
    let family = centered_oracle(spec, depth, tau)?;
    let normal = normal_closed_form(spec, tau)?;
    let normal_residual = normal_oracle(spec)?;
    let measurable = u_measurable(spec, tau)?;
    let normal_by_oracle = normal_residual <= tau;
    let mut decided = vec![family.commutative, normal_by_oracle, measurable];
    for v in [&centered, &normal] {
        match v.status {
            Status::Yes => decided.push(true),
            Status::No => decided.push(false),
            Status::Indeterminate => {}
        }
    }
    let agree = decided.iter().all(|&d| d == decided[0]);
    Ok(EquivalenceReport {
        centered_closed_form: centered,
        centered_oracle_residual: family.max_residual,
        centered_oracle: family.commutative,
        normal_closed_form: normal,
        normal_oracle_residual: normal_residual,
        normal_oracle: normal_by_oracle,
        multiplier_measurable: measurable,
        agree,
    })
}

/// A distinct non-zero value `λ` of `E(uw)` with `μ({E(uw) = λ})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelValue {
    pub value: C64,
    pub mass: f64,
}

/// Oracle spectrum against the level sets of `E(uw)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Oracle eigenvalues with algebraic multiplicities (sum = n).
    pub eigenvalues: Vec<(C64, usize)>,
    /// Distinct non-zero values of `E(uw)` (formula side).
    pub nonzero_level_values: Vec<LevelValue>,
    /// Per oracle eigenvalue: has a common eigenvector with `T*` for `λ̄`.
    pub joint_flags: Vec<bool>,
    pub joint_residuals: Vec<f64>,
    /// Hausdorff distance between the two non-zero sets, relative to `‖T‖`.
    pub set_distance: f64,
    /// Non-zero sets agree within the comparison tolerance.
    pub sets_match: bool,
    /// `|E(uw)|² = E(|u|²)E(|w|²)` holds everywhere.
    pub equality_hypothesis: bool,
}

impl SpectrumReport {
    pub fn multiplicity_total(&self) -> usize {
        self.eigenvalues.iter().map(|(_, m)| m).sum()
    }

    pub fn nonzero_eigenvalues(&self) -> Vec<C64> {
        self.eigenvalues
            .iter()
            .filter(|(v, _)| *v != C64::new(0.0, 0.0))
            .map(|(v, _)| *v)
            .collect()
    }

    pub fn all_joint(&self) -> bool {
        self.joint_flags.iter().all(|&f| f)
    }
}

/// Distinct non-zero `E(uw)` values, clustered at `cluster_tol · ‖T‖`.
pub fn level_values(spec: &CondOpSpec, cluster_tol: f64) -> Vec<LevelValue> {
    let lv = spec.levels();
    let radius = cluster_tol * spec.norm_formula();
    let mut picked: Vec<(C64, f64)> = (0..lv.block_count())
        .filter(|&b| lv.in_h[b])
        .map(|b| (lv.euw[b], lv.mass[b]))
        .collect();
    picked.sort_by(|a, b| oracle::cmp_complex(&a.0, &b.0));
    let values: Vec<C64> = picked.iter().map(|p| p.0).collect();
    oracle::cluster_values(&values, radius)
        .into_iter()
        .map(|group| {
            let mass = picked.iter().filter(|(v, _)| group.contains(v)).map(|(_, m)| m).sum();
            LevelValue {
                value: group.iter().sum::<C64>() / group.len() as f64,
                mass,
            }
        })
        .collect()
}

fn hausdorff(a: &[C64], b: &[C64]) -> f64 {
    let one_way = |x: &[C64], y: &[C64]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    one_way(a, b).max(one_way(b, a))
}

fn spectrum(spec: &CondOpSpec, tau: f64, opts: &EigenOptions, joint: bool) -> Result<SpectrumReport> {
    check_tau(tau)?;
    let t = oracle::materialize(spec);
    let es = oracle::eigensolve(&t, opts)?;
    let levels = level_values(spec, opts.cluster_tol);
    let scale = es.norm.max(f64::MIN_POSITIVE);
    let oracle_nonzero: Vec<C64> = es.nonzero().map(|c| c.value).collect();
    let formula: Vec<C64> = levels.iter().map(|l| l.value).collect();
    let set_distance = if oracle_nonzero.len() == formula.len() {
        hausdorff(&oracle_nonzero, &formula) / scale
    } else {
        f64::INFINITY
    };
    let (joint_flags, joint_residuals) = if joint {
        let mut flags = Vec::new();
        let mut res = Vec::new();
        for c in &es.clusters {
            let r = oracle::joint_eigen_residual(&t, c.value)?;
            flags.push(r <= tau);
            res.push(r);
        }
        (flags, res)
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(SpectrumReport {
        eigenvalues: es.clusters.iter().map(|c| (c.value, c.multiplicity)).collect(),
        nonzero_level_values: levels,
        joint_flags,
        joint_residuals,
        sets_match: set_distance <= tau.max(opts.cluster_tol),
        set_distance,
        equality_hypothesis: cs_equality_test(spec.levels(), tau).failing.is_empty(),
    })
}

/// Non-zero point spectrum from the level sets of `E(uw)`, compared with the
/// oracle eigenvalues.
pub fn point_spectrum_formula(spec: &CondOpSpec, tau: f64) -> Result<SpectrumReport> {
    spectrum(spec, tau, &EigenOptions::default(), false)
}

/// [`point_spectrum_formula`] plus a joint-eigenvector test for every oracle
/// eigenvalue: `λ` is flagged joint when `ker(T − λ) ∩ ker(T* − λ̄) ≠ {0}`
/// numerically, which covers degenerate eigenspaces as a whole.
pub fn joint_spectrum_check(spec: &CondOpSpec, tau: f64) -> Result<SpectrumReport> {
    spectrum(spec, tau, &EigenOptions::default(), true)
}

/// Same as [`joint_spectrum_check`] with explicit eigensolver options.
pub fn joint_spectrum_check_with(spec: &CondOpSpec, tau: f64, opts: &EigenOptions) -> Result<SpectrumReport> {
    spectrum(spec, tau, opts, true)
}

/// Residual of the joint relation `T*f = λ̄f` for one vector, relative to `‖f‖`.
pub fn adjoint_eigen_defect(spec: &CondOpSpec, lambda: C64, f: &CFun) -> Result<f64> {
    let tf = spec.adjoint_apply(f)?;
    let diff = &tf - &f.scale(lambda.conj());
    let nf = spec.space().norm(f)?;
    Ok(spec.space().norm(&diff)? / nf.max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{MeasureSpace, Partition};

    fn pair(u: &[f64], w: &[f64]) -> CondOpSpec {
        CondOpSpec::new(
            MeasureSpace::uniform(2, 1.0).unwrap(),
            Partition::trivial(2),
            CFun::from_real(u),
            CFun::from_real(w),
        )
        .unwrap()
    }

    #[test]
    fn centered_equality_case() {
        // |E(uw)|² = 7.5² = 56.25 = 2.5 · 22.5
        let v = centered_closed_form(&pair(&[1.0, 2.0], &[3.0, 6.0]), 1e-8).unwrap();
        assert_eq!(v.status, Status::Yes);
        assert!(v.residual < 1e-15);
    }

    #[test]
    fn centered_orthogonal_pair_is_indeterminate() {
        let v = centered_closed_form(&pair(&[1.0, 1.0], &[1.0, -1.0]), 1e-8).unwrap();
        assert_eq!(v.status, Status::Indeterminate);
        assert_eq!(v.witness, vec![0, 1]);
    }

    #[test]
    fn centered_fails_on_full_support() {
        let v = centered_closed_form(&pair(&[1.0, 0.0], &[1.0, 1.0]), 1e-8).unwrap();
        assert_eq!(v.status, Status::No);
        assert_eq!(v.witness, vec![0, 1]);
        // |E(uw)|² = 1/4 against E|u|²E|w|² = 1/2
        assert!((v.residual - 0.5).abs() < 1e-15);
    }

    #[test]
    fn eu_special_cases() {
        let constant = CondOpSpec::new(
            MeasureSpace::uniform(4, 1.0).unwrap(),
            Partition::from_labels(&[0, 0, 1, 1]).unwrap(),
            CFun::from_real(&[2.0, 2.0, -1.0, -1.0]),
            CFun::ones(4),
        )
        .unwrap();
        assert_eq!(centered_eu_special(&constant, 1e-8).unwrap().status, Status::Yes);

        let exp = pair(&[(-1.0f64).exp(), 1.0f64.exp()], &[1.0, 1.0]);
        let v = centered_eu_special(&exp, 1e-8).unwrap();
        assert_eq!(v.status, Status::No);
        // cosh 2 − cosh² 1 relative to cosh 2
        let want = (2.0f64.cosh() - 1.0f64.cosh().powi(2)) / 2.0f64.cosh();
        assert!((v.residual - want).abs() < 1e-12);

        let v = centered_eu_special(&pair(&[1.0, 0.0], &[1.0, 1.0]), 1e-8).unwrap();
        assert_eq!(v.status, Status::No);

        assert!(centered_eu_special(&pair(&[1.0, 0.0], &[1.0, 2.0]), 1e-8).is_err());
    }

    #[test]
    fn eu_special_falls_back_to_measurability() {
        // E(u) = 0 on the atom while E|u|² = 1: the identity fails off S(E(u)) and
        // the supports differ, so nothing can be concluded in closed form.
        let v = centered_eu_special(&pair(&[1.0, -1.0], &[1.0, 1.0]), 1e-8).unwrap();
        assert_eq!(v.status, Status::Indeterminate);
        assert!(!v.matching_supports);
    }

    #[test]
    fn normal_cases() {
        let v = normal_closed_form(&pair(&[1.0, 2.0], &[1.0, 2.0]), 1e-8).unwrap();
        assert_eq!(v.status, Status::Yes);
        assert_eq!(v.criterion_id, "aligned_weights");

        let v = normal_closed_form(&pair(&[1.0, 0.0], &[1.0, 1.0]), 1e-8).unwrap();
        assert_eq!(v.status, Status::No);

        let blocky = CondOpSpec::new(
            MeasureSpace::uniform(4, 1.0).unwrap(),
            Partition::from_labels(&[0, 0, 1, 1]).unwrap(),
            CFun::new(vec![
                C64::new(0.0, 2.0),
                C64::new(0.0, 2.0),
                C64::new(-1.0, 0.0),
                C64::new(-1.0, 0.0),
            ]),
            CFun::ones(4),
        )
        .unwrap();
        assert_eq!(normal_closed_form(&blocky, 1e-8).unwrap().status, Status::Yes);
    }

    #[test]
    fn normal_unresolved_between_clauses() {
        // w = i·ū on one atom: normal, but (a) needs a non-negative phase.
        let u = CFun::from_real(&[1.0, 2.0]);
        let w = u.conj().scale(C64::new(0.0, 1.0));
        let spec = CondOpSpec::new(MeasureSpace::uniform(2, 1.0).unwrap(), Partition::trivial(2), u, w).unwrap();
        let v = normal_closed_form(&spec, 1e-8).unwrap();
        assert_eq!(v.status, Status::Indeterminate);
        assert!(normal_oracle(&spec).unwrap() < 1e-12);
    }

    #[test]
    fn equivalence_suite_agrees_and_refuses() {
        let blocky = CondOpSpec::new(
            MeasureSpace::from_weights(vec![0.5, 1.5, 1.0, 2.0]).unwrap(),
            Partition::from_labels(&[0, 0, 1, 1]).unwrap(),
            CFun::from_real(&[3.0, 3.0, -2.0, -2.0]),
            CFun::ones(4),
        )
        .unwrap();
        let r = equivalence_suite(&blocky, 1e-8, 4).unwrap();
        assert!(r.agree && r.centered_oracle && r.normal_oracle && r.multiplier_measurable);

        let exp = pair(&[(-1.0f64).exp(), 1.0f64.exp()], &[1.0, 1.0]);
        let r = equivalence_suite(&exp, 1e-8, 4).unwrap();
        assert!(r.agree && !r.centered_oracle && !r.normal_oracle && !r.multiplier_measurable);

        let zero_mean = pair(&[1.0, -1.0], &[1.0, 1.0]);
        assert!(matches!(
            equivalence_suite(&zero_mean, 1e-8, 4),
            Err(Error::Contract { .. })
        ));
    }

    #[test]
    fn spectrum_of_projection() {
        let r = point_spectrum_formula(&pair(&[1.0, 1.0], &[1.0, 1.0]), 1e-8).unwrap();
        assert_eq!(r.nonzero_eigenvalues(), vec![C64::new(1.0, 0.0)]);
        assert_eq!(r.multiplicity_total(), 2);
        assert!(r.sets_match);
    }

    #[test]
    fn spectrum_of_column_operator_and_joint_failure() {
        let spec = pair(&[1.0, 0.0], &[1.0, 1.0]);
        let r = joint_spectrum_check(&spec, 1e-8).unwrap();
        assert!(r.sets_match);
        assert_eq!(r.nonzero_level_values.len(), 1);
        assert!((r.nonzero_level_values[0].value - C64::new(0.5, 0.0)).norm() < 1e-15);
        let idx = r.eigenvalues.iter().position(|(v, _)| v.re > 0.25).unwrap();
        assert!(!r.joint_flags[idx]);
        // direct adjoint evaluation: T*(1,1) = (1,0) ≠ ½(1,1)
        let defect = adjoint_eigen_defect(&spec, C64::new(0.5, 0.0), &CFun::ones(2)).unwrap();
        assert!(defect > 0.1);
    }

    #[test]
    fn nilpotent_has_empty_nonzero_spectrum() {
        let r = joint_spectrum_check(&pair(&[1.0, 1.0], &[1.0, -1.0]), 1e-8).unwrap();
        assert!(r.nonzero_eigenvalues().is_empty());
        assert!(r.nonzero_level_values.is_empty());
        assert!(r.sets_match);
        assert_eq!(r.multiplicity_total(), 2);
    }

    #[test]
    fn self_adjoint_spectrum_is_joint() {
        let spec = CondOpSpec::new(
            MeasureSpace::from_weights(vec![0.2, 0.8, 1.0, 0.5, 0.5]).unwrap(),
            Partition::from_labels(&[0, 0, 1, 1, 1]).unwrap(),
            CFun::from_real(&[1.0, -2.0, 0.5, 3.0, 1.0]),
            CFun::from_real(&[1.0, -2.0, 0.5, 3.0, 1.0]),
        )
        .unwrap();
        let r = joint_spectrum_check(&spec, 1e-8).unwrap();
        assert!(r.equality_hypothesis);
        assert!(r.all_joint());
        assert!(r.sets_match);
    }

    #[test]
    fn hysteresis_band() {
        assert_eq!(hysteresis(1e-9, 1e-8, 1e-6), Status::Yes);
        assert_eq!(hysteresis(1e-7, 1e-8, 1e-6), Status::Indeterminate);
        assert_eq!(hysteresis(1e-5, 1e-8, 1e-6), Status::No);
    }
}
