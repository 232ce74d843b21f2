//! Reproducible multi-channel Brownian paths, dyadic coarsening for coupled
//! strong-error studies, and a fine-grid quadrature oracle for nested
//! Stratonovich integrals.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"BPTH";

/// `channels × n_steps` Brownian increments on a uniform grid of spacing `dt`.
///
/// Increments are stored channel-major: row `m` holds the increments of
/// `W^{m+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPaths {
    channels: usize,
    n_steps: usize,
    dt: f64,
    seed: u64,
    path_index: u64,
    increments: Vec<f64>,
}

/// Draws the increments of one ensemble member.
///
/// The stream is a ChaCha20 generator seeded from `seed` with stream id
/// `path_index`, so members can be generated independently in any order.
pub fn generate_paths(
    seed: u64,
    path_index: u64,
    channels: usize,
    n_steps: usize,
    dt_fine: f64,
) -> Result<BrownianPaths> {
    if n_steps == 0 {
        return Err(Error::InvalidConfig("Brownian path needs at least one step".into()));
    }
    if !(dt_fine > 0.0 && dt_fine.is_finite()) {
        return Err(Error::InvalidConfig(format!("fine step must be positive, got {dt_fine}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    let sd = dt_fine.sqrt();
    let increments = (0..channels * n_steps)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(BrownianPaths {
        channels,
        n_steps,
        dt: dt_fine,
        seed,
        path_index,
        increments,
    })
}

/// Sums `factor` consecutive increments (left to right) into each coarse one.
pub fn coarsen_paths(paths: &BrownianPaths, factor: usize) -> Result<BrownianPaths> {
    if factor == 0 || paths.n_steps % factor != 0 {
        return Err(Error::InvalidFactor {
            factor,
            n_steps: paths.n_steps,
        });
    }
    let n_coarse = paths.n_steps / factor;
    let mut increments = Vec::with_capacity(paths.channels * n_coarse);
    for m in 0..paths.channels {
        let row = paths.channel(m);
        increments.extend(row.chunks_exact(factor).map(|c| c.iter().sum::<f64>()));
    }
    Ok(BrownianPaths {
        n_steps: n_coarse,
        dt: paths.dt * factor as f64,
        increments,
        ..*paths
    })
}

impl BrownianPaths {
    /// Builds paths from explicit increments (row-major, one row per channel).
    pub fn from_increments(
        channels: usize,
        n_steps: usize,
        dt: f64,
        increments: Vec<f64>,
    ) -> Result<Self> {
        if n_steps == 0 || !(dt > 0.0) {
            return Err(Error::InvalidConfig("empty path or non-positive step".into()));
        }
        if increments.len() != channels * n_steps {
            return Err(Error::DimensionMismatch {
                expected: channels * n_steps,
                found: increments.len(),
            });
        }
        Ok(Self {
            channels,
            n_steps,
            dt,
            seed: 0,
            path_index: 0,
            increments,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    pub fn total_time(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    /// Increments of channel `m` (zero-based).
    pub fn channel(&self, m: usize) -> &[f64] {
        &self.increments[m * self.n_steps..(m + 1) * self.n_steps]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// All channel increments of step `n`.
    pub fn step(&self, n: usize) -> Vec<f64> {
        (0..self.channels)
            .map(|m| self.increments[m * self.n_steps + n])
            .collect()
    }

    /// `W^m(T)` for every channel.
    pub fn terminal_values(&self) -> Vec<f64> {
        (0..self.channels)
            .map(|m| self.channel(m).iter().sum())
            .collect()
    }

    /// Writes the binary dump: magic `BPTH`, then `M`, `N` (u64), `dt` (f64),
    /// `seed`, `path_index` (u64) and the increments, all little-endian.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.channels as u64).to_le_bytes())?;
        w.write_all(&(self.n_steps as u64).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.path_index.to_le_bytes())?;
        for x in &self.increments {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::InvalidConfig("not a BPTH dump".into()));
        }
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let channels = u64::from_le_bytes(next(&mut r)?) as usize;
        let n_steps = u64::from_le_bytes(next(&mut r)?) as usize;
        let dt = f64::from_le_bytes(next(&mut r)?);
        let seed = u64::from_le_bytes(next(&mut r)?);
        let path_index = u64::from_le_bytes(next(&mut r)?);
        let mut increments = Vec::with_capacity(channels * n_steps);
        for _ in 0..channels * n_steps {
            increments.push(f64::from_le_bytes(next(&mut r)?));
        }
        let mut p = Self::from_increments(channels, n_steps, dt, increments)?;
        p.seed = seed;
        p.path_index = path_index;
        Ok(p)
    }
}

/// Multi-index over `{0, 1, ..., M}`; `0` stands for time.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NestedIndex(Vec<usize>);

impl NestedIndex {
    pub fn new(indices: Vec<usize>) -> Self {
        Self(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<&[usize]> for NestedIndex {
    fn from(v: &[usize]) -> Self {
        Self(v.to_vec())
    }
}

/// Approximates `J_{j1,...,jn}` over the whole path by iterated midpoint
/// quadrature. `j1` is the innermost integrator.
pub fn nested_stratonovich_oracle(paths: &BrownianPaths, idx: &NestedIndex) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::InvalidConfig("nested index must be nonempty".into()));
    }
    for &j in idx.indices() {
        if j > paths.channels {
            return Err(Error::IndexOutOfRange {
                index: j,
                channels: paths.channels,
            });
        }
    }
    let n = paths.n_steps;
    let time = vec![paths.dt; n];
    let increments = |j: usize| -> &[f64] {
        if j == 0 {
            &time
        } else {
            paths.channel(j - 1)
        }
    };

    // prev[i] is the previous level's running integral at grid point i
    let mut prev = vec![1.0; n + 1];
    let mut next = vec![0.0; n + 1];
    for &j in idx.indices() {
        let dw = increments(j);
        next[0] = 0.0;
        for i in 0..n {
            next[i + 1] = next[i] + 0.5 * (prev[i] + prev[i + 1]) * dw[i];
        }
        std::mem::swap(&mut prev, &mut next);
    }
    Ok(prev[n])
}

/// Lévy area `(J_ij - J_ji) / 2` for one-based channels `i`, `j`.
pub fn levy_area(paths: &BrownianPaths, i: usize, j: usize) -> Result<f64> {
    for c in [i, j] {
        if c == 0 || c > paths.channels {
            return Err(Error::IndexOutOfRange {
                index: c,
                channels: paths.channels,
            });
        }
    }
    if i == j {
        return Ok(0.0);
    }
    let jij = nested_stratonovich_oracle(paths, &NestedIndex::new(vec![i, j]))?;
    let jji = nested_stratonovich_oracle(paths, &NestedIndex::new(vec![j, i]))?;
    Ok(0.5 * (jij - jji))
}

/// Symmetric, antisymmetric and two mixed parts of a rank-3 iterated integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rank3Parts {
    pub sym: f64,
    pub alt: f64,
    pub mixed1: f64,
    pub mixed2: f64,
}

impl Rank3Parts {
    pub fn recompose(&self) -> f64 {
        self.sym + self.alt + self.mixed1 + self.mixed2
    }
}

/// Decomposes `J_{ijk}` given a lookup of iterated integrals by index triple.
/// `alt` is the full antisymmetrizer (even minus odd permutations), which is
/// what makes the four parts sum back to `J_{ijk}`.
pub fn rank3_decomposition<F>(i: usize, j: usize, k: usize, mut jint: F) -> Rank3Parts
where
    F: FnMut(usize, usize, usize) -> f64,
{
    let ijk = jint(i, j, k);
    let jki = jint(j, k, i);
    let kji = jint(k, j, i);
    let ikj = jint(i, k, j);
    let jik = jint(j, i, k);
    let kij = jint(k, i, j);
    Rank3Parts {
        sym: (ijk + jki + kji + ikj + jik + kij) / 6.0,
        alt: (ijk + jki + kij - ikj - jik - kji) / 6.0,
        mixed1: (ijk - ikj + jik - kij) / 3.0,
        mixed2: (ijk - jik + ikj - jki) / 3.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_regeneration() {
        let a = generate_paths(7, 3, 2, 64, 0.01).unwrap();
        let b = generate_paths(7, 3, 2, 64, 0.01).unwrap();
        assert_eq!(a, b);
        let c = generate_paths(7, 4, 2, 64, 0.01).unwrap();
        assert_ne!(a.increments(), c.increments());
    }

    #[test]
    fn invalid_generation_config() {
        assert!(generate_paths(1, 0, 1, 0, 0.1).is_err());
        assert!(generate_paths(1, 0, 1, 4, 0.0).is_err());
        assert!(generate_paths(1, 0, 1, 4, -1.0).is_err());
    }

    #[test]
    fn coarsen_small_example() {
        let p = BrownianPaths::from_increments(1, 4, 0.5, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let c = coarsen_paths(&p, 2).unwrap();
        assert_eq!(c.channel(0), &[3.0, 7.0]);
        assert_eq!(c.dt(), 1.0);
        assert_eq!(coarsen_paths(&p, 1).unwrap(), p);
        assert!(matches!(coarsen_paths(&p, 3), Err(Error::InvalidFactor { .. })));
        assert!(matches!(coarsen_paths(&p, 0), Err(Error::InvalidFactor { .. })));
    }

    #[test]
    fn coarsening_composes() {
        let p = generate_paths(11, 0, 3, 256, 1e-3).unwrap();
        let twice = coarsen_paths(&coarsen_paths(&p, 2).unwrap(), 2).unwrap();
        let once = coarsen_paths(&p, 4).unwrap();
        for (a, b) in twice.increments().iter().zip(once.increments()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn time_index_integrates_to_total_time() {
        let p = generate_paths(1, 0, 1, 100, 0.01).unwrap();
        let j0 = nested_stratonovich_oracle(&p, &NestedIndex::new(vec![0])).unwrap();
        assert!((j0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn double_integral_of_one_channel_is_half_square() {
        let p = generate_paths(5, 9, 1, 1000, 1e-3).unwrap();
        let w = p.terminal_values()[0];
        let j11 = nested_stratonovich_oracle(&p, &NestedIndex::new(vec![1, 1])).unwrap();
        assert!((j11 - 0.5 * w * w).abs() < 1e-12);
    }

    #[test]
    fn index_out_of_range() {
        let p = generate_paths(5, 9, 2, 10, 1e-3).unwrap();
        assert!(matches!(
            nested_stratonovich_oracle(&p, &NestedIndex::new(vec![3])),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(nested_stratonovich_oracle(&p, &NestedIndex::new(vec![])).is_err());
        assert!(levy_area(&p, 0, 1).is_err());
        assert!(levy_area(&p, 1, 3).is_err());
    }

    #[test]
    fn levy_area_antisymmetric() {
        let p = generate_paths(2, 2, 2, 500, 1e-3).unwrap();
        assert_eq!(levy_area(&p, 1, 1).unwrap(), 0.0);
        let a = levy_area(&p, 1, 2).unwrap();
        let b = levy_area(&p, 2, 1).unwrap();
        assert_eq!(a, -b);
    }

    #[test]
    fn binary_dump_round_trip() {
        let p = generate_paths(42, 5, 3, 17, 0.125).unwrap();
        let mut buf = Vec::new();
        p.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"BPTH");
        assert_eq!(buf.len(), 4 + 5 * 8 + 3 * 17 * 8);
        let q = BrownianPaths::read_from(buf.as_slice()).unwrap();
        assert_eq!(p, q);
        assert!(BrownianPaths::read_from(&b"NOPE0000"[..]).is_err());
    }
}
