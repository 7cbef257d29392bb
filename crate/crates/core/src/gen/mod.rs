//! Instance generators: discretized continuous fixtures, seeded random
//! operators and the randomized centeredness search.

pub mod fixtures;
pub mod random;
pub mod search;

use serde::{Deserialize, Serialize};

use crate::condop::CondOpSpec;
use crate::{Error, Result};

pub use fixtures::{gen_symmetric_pair, gen_vertical_strip, ColumnAudit, StripAudit};
pub use random::{gen_equality_case, gen_orthogonal_case, gen_random, gen_random_kernel, gen_zero_mean_case};
pub use search::{counterexample_search, OutcomeCount, SearchReport, TrialRecord};

fn default_magnitude() -> f64 {
    1.0
}

/// A reproducible description of a generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceRecipe {
    /// Midpoint grid on the unit square, atoms are the columns.
    VerticalStrip { resolution: usize },
    /// Symmetric pairs `{−x, x}` with `u = eˣ` and `w = 1`.
    SymmetricPair { grid: Vec<f64> },
    Random {
        seed: u64,
        n_points: usize,
        n_blocks: usize,
        #[serde(default = "default_magnitude")]
        magnitude: f64,
    },
    /// `w = a·ū` with `a` constant on atoms.
    EqualityCase {
        seed: u64,
        n_points: usize,
        n_blocks: usize,
    },
}

impl InstanceRecipe {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::VerticalStrip { .. } => "vertical_strip",
            Self::SymmetricPair { .. } => "symmetric_pair",
            Self::Random { .. } => "random",
            Self::EqualityCase { .. } => "equality_case",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::VerticalStrip { resolution } => {
                if *resolution < 2 {
                    return Err(Error::Argument(format!(
                        "grid resolution must be at least 2, got {resolution}"
                    )));
                }
            }
            Self::SymmetricPair { grid } => fixtures::check_grid(grid)?,
            Self::Random {
                n_points,
                n_blocks,
                magnitude,
                ..
            } => {
                random::check_counts(*n_points, *n_blocks)?;
                if !(magnitude.is_finite() && *magnitude > 0.0) {
                    return Err(Error::Argument(format!(
                        "magnitude must be positive and finite, got {magnitude}"
                    )));
                }
            }
            Self::EqualityCase { n_points, n_blocks, .. } => random::check_counts(*n_points, *n_blocks)?,
        }
        Ok(())
    }

    /// Builds the operator, with the quadrature audit for strip grids.
    pub fn build(&self) -> Result<(CondOpSpec, Option<StripAudit>)> {
        self.validate()?;
        Ok(match self {
            Self::VerticalStrip { resolution } => {
                let (spec, audit) = gen_vertical_strip(*resolution)?;
                (spec, Some(audit))
            }
            Self::SymmetricPair { grid } => (gen_symmetric_pair(grid)?, None),
            Self::Random {
                seed,
                n_points,
                n_blocks,
                magnitude,
            } => (gen_random(*seed, *n_points, *n_blocks, *magnitude)?, None),
            Self::EqualityCase {
                seed,
                n_points,
                n_blocks,
            } => (gen_equality_case(*seed, *n_points, *n_blocks)?, None),
        })
    }
}

/// SplitMix64 finalizer, used to derive independent per-trial seeds.
pub fn mix_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
