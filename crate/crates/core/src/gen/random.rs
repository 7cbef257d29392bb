//! Seeded random operators. Every generator is a pure function of its
//! arguments: the same seed always yields the same instance, bit for bit.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::condop::CondOpSpec;
use crate::kernel::KernelSpec;
use crate::measure::{CFun, MeasureSpace, Partition};
use crate::{Error, Result, C64};

pub(crate) fn check_counts(n_points: usize, n_blocks: usize) -> Result<()> {
    if n_blocks == 0 || n_blocks > n_points {
        return Err(Error::Argument(format!(
            "need 1 ≤ n_blocks ≤ n_points, got n_blocks = {n_blocks}, n_points = {n_points}"
        )));
    }
    Ok(())
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard complex Gaussian: `E|z|² = 1`.
pub(crate) fn complex_normal(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub(crate) fn complex_vec(rng: &mut impl Rng, n: usize) -> CFun {
    CFun::new((0..n).map(|_| complex_normal(rng)).collect())
}

/// Weights log-uniform in `[1e−2, 1e2] · magnitude`.
pub(crate) fn random_space(rng: &mut impl Rng, n: usize, magnitude: f64) -> Result<MeasureSpace> {
    let weights = (0..n)
        .map(|_| magnitude * 10f64.powf(rng.random_range(-2.0..=2.0)))
        .collect();
    MeasureSpace::from_weights(weights)
}

/// Uniformly random labels with every block hit at least once.
pub(crate) fn random_partition(rng: &mut impl Rng, n_points: usize, n_blocks: usize) -> Result<Partition> {
    random_partition_min(rng, n_points, n_blocks, 1)
}

/// Random labels with at least `min_size` points in every block.
fn random_partition_min(rng: &mut impl Rng, n_points: usize, n_blocks: usize, min_size: usize) -> Result<Partition> {
    let mut order: Vec<usize> = (0..n_points).collect();
    order.shuffle(rng);
    let mut labels = vec![0; n_points];
    for (k, &i) in order.iter().enumerate() {
        labels[i] = if k < n_blocks * min_size {
            k % n_blocks
        } else {
            rng.random_range(0..n_blocks)
        };
    }
    Partition::from_labels(&labels)
}

/// Space, partition and `u` shared by the structured generators.
fn skeleton(
    rng: &mut impl Rng,
    n_points: usize,
    n_blocks: usize,
    min_size: usize,
) -> Result<(MeasureSpace, Partition, CFun)> {
    check_counts(n_points, n_blocks)?;
    let space = random_space(rng, n_points, 1.0)?;
    let partition = random_partition_min(rng, n_points, n_blocks, min_size)?;
    let u = complex_vec(rng, n_points);
    Ok((space, partition, u))
}

/// Random operator with complex Gaussian `u` and `w`.
pub fn gen_random(seed: u64, n_points: usize, n_blocks: usize, magnitude: f64) -> Result<CondOpSpec> {
    check_counts(n_points, n_blocks)?;
    if !(magnitude.is_finite() && magnitude > 0.0) {
        return Err(Error::Argument(format!(
            "magnitude must be positive and finite, got {magnitude}"
        )));
    }
    let mut r = rng(seed);
    let space = random_space(&mut r, n_points, magnitude)?;
    let partition = random_partition(&mut r, n_points, n_blocks)?;
    let u = complex_vec(&mut r, n_points);
    let w = complex_vec(&mut r, n_points);
    CondOpSpec::new(space, partition, u, w)
}

/// `w = a·ū` with a complex Gaussian `a` constant on each atom, which makes
/// `|E(uw)|² = E|u|²E|w|²` hold identically.
pub fn gen_equality_case(seed: u64, n_points: usize, n_blocks: usize) -> Result<CondOpSpec> {
    let mut r = rng(seed);
    loop {
        let (space, partition, u) = skeleton(&mut r, n_points, n_blocks, 1)?;
        let vanishes = partition
            .blocks()
            .iter()
            .any(|b| b.iter().all(|&i| u.values()[i] == C64::new(0.0, 0.0)));
        if vanishes {
            continue;
        }
        let a: Vec<C64> = (0..partition.block_count()).map(|_| complex_normal(&mut r)).collect();
        let w = CFun::new(
            (0..n_points)
                .map(|i| a[partition.atom_of(i)] * u.values()[i].conj())
                .collect(),
        );
        return CondOpSpec::new(space, partition, u, w);
    }
}

/// Random `w` projected per atom onto the orthogonal complement of `ū`, so
/// that `E(uw) ≡ 0` while `E|u|²` and `E|w|²` stay positive. Every such
/// operator squares to zero.
///
/// Atoms get at least two points: on a single point the complement is
/// trivial and `w` would vanish there.
pub fn gen_orthogonal_case(seed: u64, n_points: usize, n_blocks: usize) -> Result<CondOpSpec> {
    if n_points < 2 * n_blocks {
        return Err(Error::Argument(format!(
            "orthogonal case needs two points per atom, got n_points = {n_points}, n_blocks = {n_blocks}"
        )));
    }
    let mut r = rng(seed);
    let (space, partition, u) = skeleton(&mut r, n_points, n_blocks, 2)?;
    let w0 = complex_vec(&mut r, n_points);
    let w = orthogonalize(&space, &partition, &u, &w0);
    CondOpSpec::new(space, partition, u, w)
}

pub(crate) fn orthogonalize(space: &MeasureSpace, partition: &Partition, u: &CFun, w0: &CFun) -> CFun {
    let mut w = w0.clone();
    for block in partition.blocks() {
        let mut cross = C64::new(0.0, 0.0);
        let mut norm = 0.0;
        for &i in block {
            cross += u.values()[i] * w0.values()[i] * space.weight(i);
            norm += u.values()[i].norm_sqr() * space.weight(i);
        }
        if norm > 0.0 {
            let c = cross / norm;
            for &i in block {
                w.0[i] = w0.values()[i] - c * u.values()[i].conj();
            }
        }
    }
    w
}

/// Random `u` shifted to have `E(u) = 0` on every atom, with random `w`.
pub fn gen_zero_mean_case(seed: u64, n_points: usize, n_blocks: usize) -> Result<CondOpSpec> {
    let mut r = rng(seed);
    let (space, partition, u0) = skeleton(&mut r, n_points, n_blocks, 1)?;
    let w = complex_vec(&mut r, n_points);
    let mut u = u0.clone();
    for block in partition.blocks() {
        let mass: f64 = block.iter().map(|&i| space.weight(i)).sum();
        let mean = block.iter().map(|&i| u0.values()[i] * space.weight(i)).sum::<C64>() / mass;
        for &i in block {
            u.0[i] -= mean;
        }
    }
    CondOpSpec::new(space, partition, u, w)
}

/// Random kernel on a random probability space of `n` points. Each row is
/// constant with probability `row_constant_prob`, otherwise Gaussian.
pub fn gen_random_kernel(seed: u64, n: usize, row_constant_prob: f64) -> Result<KernelSpec> {
    if n == 0 {
        return Err(Error::Argument("kernel needs at least one point".into()));
    }
    if !(0.0..=1.0).contains(&row_constant_prob) {
        return Err(Error::Argument(format!(
            "row_constant_prob must lie in [0, 1], got {row_constant_prob}"
        )));
    }
    let mut r = rng(seed);
    let raw = random_space(&mut r, n, 1.0)?;
    let total = raw.total_mass();
    let space = MeasureSpace::from_weights(raw.weights().iter().map(|w| w / total).collect())?;
    let mut k = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for x in 0..n {
        if r.random_bool(row_constant_prob) {
            let c = complex_normal(&mut r);
            k.row_mut(x).fill(c);
        } else {
            for y in 0..n {
                k[(x, y)] = complex_normal(&mut r);
            }
        }
    }
    KernelSpec::new(space, k)
}
