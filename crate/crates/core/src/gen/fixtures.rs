//! Discretizations of two continuous operators.
//!
//! The strip fixture lives on `[0,1]²` with the algebra of vertical strips,
//! `u = y^{x/8}` and `w = √((4+x)y)`. Its closed forms are
//! `E|u|² = 4/(4+x)`, `E|w|² = (4+x)/2` (product 2) and
//! `|E(uw)|² = 64(4+x)/(x+12)²`, which stays strictly below 2 on `[0,1]`.
//! The audit measures that gap instead of assuming it away.
//!
//! The pair fixture lives on `[−1,1]` with the symmetric algebra, whose atoms
//! are `{−x, x}`; `u = eˣ`, `w = 1`, so `E(u) = cosh x`, `E|u|² = cosh 2x`.

use serde::{Deserialize, Serialize};

use crate::condop::CondOpSpec;
use crate::measure::{CFun, MeasureSpace, Partition};
use crate::{Error, Result, C64};

/// Per-column quadrature audit of the strip fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnAudit {
    pub x: f64,
    pub e_abs_u_sq: f64,
    /// `E|u|² · E|w|²`.
    pub product: f64,
    /// `|E(uw)|²`.
    pub cross_sq: f64,
    /// `64(4+x)/(x+12)²`.
    pub closed_form_cross_sq: f64,
    /// `product − cross_sq`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripAudit {
    pub resolution: usize,
    pub columns: Vec<ColumnAudit>,
    /// `max |product − 2|`.
    pub max_product_error: f64,
    /// `max |cross_sq − 64(4+x)/(x+12)²|`.
    pub max_cross_error: f64,
    /// `max |E|u|² − 4/(4+x)|`.
    pub max_e_abs_u_sq_error: f64,
    /// The gap at the column closest to `x = 0`.
    pub gap_near_zero: f64,
    /// Whether `|E(uw)|² = E|u|²E|w|²` held on every column within quadrature
    /// error. The closed forms say it cannot.
    pub equality_reproduced: bool,
}

/// `|E(uw)|²` of the strip fixture in closed form.
pub fn strip_cross_sq(x: f64) -> f64 {
    64.0 * (4.0 + x) / ((x + 12.0) * (x + 12.0))
}

/// Midpoint discretization of the strip fixture on an `n × n` grid.
///
/// Point `(i, j)` sits at `((i+½)/n, (j+½)/n)` with weight `1/n²`; the atoms
/// are the columns of fixed `i`.
pub fn gen_vertical_strip(n: usize) -> Result<(CondOpSpec, StripAudit)> {
    if n < 2 {
        return Err(Error::Argument(format!("grid resolution must be at least 2, got {n}")));
    }
    let h = 1.0 / n as f64;
    let node = |k: usize| (k as f64 + 0.5) * h;
    let mut ids = Vec::with_capacity(n * n);
    let mut u = Vec::with_capacity(n * n);
    let mut w = Vec::with_capacity(n * n);
    for i in 0..n {
        let x = node(i);
        for j in 0..n {
            let y = node(j);
            ids.push(format!("x{i}_y{j}"));
            u.push(C64::new(y.powf(x / 8.0), 0.0));
            w.push(C64::new(((4.0 + x) * y).sqrt(), 0.0));
        }
    }
    let blocks = (0..n).map(|i| (i * n..(i + 1) * n).collect()).collect();
    let spec = CondOpSpec::new(
        MeasureSpace::new(ids, vec![h * h; n * n])?,
        Partition::new(n * n, blocks)?,
        CFun::new(u),
        CFun::new(w),
    )?;
    let audit = audit_strip(&spec, n);
    Ok((spec, audit))
}

fn audit_strip(spec: &CondOpSpec, n: usize) -> StripAudit {
    let lv = spec.levels();
    let h = 1.0 / n as f64;
    let columns: Vec<ColumnAudit> = (0..n)
        .map(|i| {
            let x = (i as f64 + 0.5) * h;
            let product = lv.eu2[i] * lv.ew2[i];
            let cross_sq = lv.euw[i].norm_sqr();
            ColumnAudit {
                x,
                e_abs_u_sq: lv.eu2[i],
                product,
                cross_sq,
                closed_form_cross_sq: strip_cross_sq(x),
                gap: product - cross_sq,
            }
        })
        .collect();
    let max_of = |f: &dyn Fn(&ColumnAudit) -> f64| columns.iter().map(f).fold(0.0, f64::max);
    let max_product_error = max_of(&|c| (c.product - 2.0).abs());
    let max_cross_error = max_of(&|c| (c.cross_sq - c.closed_form_cross_sq).abs());
    let max_e_abs_u_sq_error = max_of(&|c| (c.e_abs_u_sq - 4.0 / (4.0 + c.x)).abs());
    // quadrature error bound well above the observed O(n^{-3/2}) rate
    let slack = 10.0 / n as f64;
    let equality_reproduced = columns.iter().all(|c| c.gap.abs() <= slack);
    StripAudit {
        resolution: n,
        gap_near_zero: columns[0].gap,
        columns,
        max_product_error,
        max_cross_error,
        max_e_abs_u_sq_error,
        equality_reproduced,
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Argument("symmetric grid must not be empty".into()));
    }
    for (i, &x) in grid.iter().enumerate() {
        if !(x.is_finite() && x > 0.0) {
            return Err(Error::Argument(format!("grid[{i}] = {x} must be positive and finite")));
        }
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|p| p[0] == p[1]) {
        return Err(Error::Argument("grid values must be distinct".into()));
    }
    Ok(())
}

/// The pair fixture on atoms `{−x, x}` for each grid value, equal weights.
pub fn gen_symmetric_pair(grid: &[f64]) -> Result<CondOpSpec> {
    check_grid(grid)?;
    let m = grid.len();
    let mut ids = Vec::with_capacity(2 * m);
    let mut u = Vec::with_capacity(2 * m);
    for &x in grid {
        ids.push(format!("{}", -x));
        ids.push(format!("{x}"));
        u.push(C64::new((-x).exp(), 0.0));
        u.push(C64::new(x.exp(), 0.0));
    }
    let blocks = (0..m).map(|k| vec![2 * k, 2 * k + 1]).collect();
    CondOpSpec::new(
        MeasureSpace::new(ids, vec![0.5 / m as f64; 2 * m])?,
        Partition::new(2 * m, blocks)?,
        CFun::new(u),
        CFun::ones(2 * m),
    )
}
