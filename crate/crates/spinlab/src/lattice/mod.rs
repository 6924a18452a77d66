//! The two-dimensional Ising model and its Monte Carlo dynamics.
//!
//! A [`SpinLattice`] is a square grid of ±1 spins with periodic boundaries
//! (a torus) and a uniform ferromagnetic coupling `J > 0`. Its energy is the
//! usual nearest-neighbour Hamiltonian
//!
//! ```text
//! E = -J * Σ_<i,j> σ_i σ_j
//! ```
//!
//! where the sum runs over the `2 * size²` distinct nearest-neighbour bonds of
//! the torus. Temperatures are measured in units where the Boltzmann constant
//! is 1, so Boltzmann weights are `exp(-E / T)`.
//!
//! Two update rules are provided: single-site [Metropolis] moves, used here
//! for cheap equilibration sweeps, and the [Wolff] cluster algorithm, which
//! flips whole correlated clusters at once and decorrelates quickly even near
//! the critical temperature `T_c ≈ 2.27`.
//!
//! [Metropolis]: SpinLattice::metropolis_update
//! [Wolff]: SpinLattice::wolff_update

use std::collections::VecDeque;

use rand::Rng;
use thiserror::Error;

mod chain;
mod dataset;

pub use chain::{generate_dataset, run_chain, temperature_grid, SimulationParams};
pub use dataset::{
    read_dataset_csv, write_dataset_csv, Dataset, DatasetIoError, LabeledSample, Provenance,
};

/// Errors from lattice construction and site addressing.
#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("lattice size must be at least 2, got {0}")]
    SizeTooSmall(usize),
    #[error("expected {expected} spins for the lattice, got {got}")]
    WrongSpinCount { expected: usize, got: usize },
    #[error("spin value {value} at flat index {index} is not -1 or +1")]
    InvalidSpin { index: usize, value: i8 },
    #[error("site ({row}, {col}) is out of bounds for a {size}x{size} lattice")]
    SiteOutOfBounds { row: usize, col: usize, size: usize },
    #[error("invalid simulation parameters: {0}")]
    InvalidParams(String),
}

/// A square Ising lattice with periodic boundary conditions.
///
/// Spins are stored row-major; site `(row, col)` lives at `row * size + col`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinLattice {
    size: usize,
    coupling: f64,
    spins: Vec<i8>,
}

impl SpinLattice {
    /// Creates a lattice with every spin up.
    pub fn all_up(size: usize, coupling: f64) -> Result<Self, LatticeError> {
        if size < 2 {
            return Err(LatticeError::SizeTooSmall(size));
        }
        Ok(Self { size, coupling, spins: vec![1; size * size] })
    }

    /// Creates a lattice from an explicit row-major spin grid.
    pub fn from_spins(size: usize, spins: Vec<i8>, coupling: f64) -> Result<Self, LatticeError> {
        if size < 2 {
            return Err(LatticeError::SizeTooSmall(size));
        }
        if spins.len() != size * size {
            return Err(LatticeError::WrongSpinCount { expected: size * size, got: spins.len() });
        }
        for (index, &value) in spins.iter().enumerate() {
            if value != 1 && value != -1 {
                return Err(LatticeError::InvalidSpin { index, value });
            }
        }
        Ok(Self { size, coupling, spins })
    }

    /// Creates a lattice with each spin drawn up or down with probability 1/2.
    pub fn random(size: usize, coupling: f64, rng: &mut impl Rng) -> Result<Self, LatticeError> {
        if size < 2 {
            return Err(LatticeError::SizeTooSmall(size));
        }
        let spins = (0..size * size).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
        Ok(Self { size, coupling, spins })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// The row-major spin grid.
    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    /// The spin at `(row, col)`. Panics if the site is out of bounds.
    pub fn spin(&self, row: usize, col: usize) -> i8 {
        assert!(row < self.size && col < self.size, "site out of bounds");
        self.spins[row * self.size + col]
    }

    #[inline]
    fn index(&self, row: usize, col: usize) -> usize {
        row * self.size + col
    }

    /// Sum of the four periodic nearest-neighbour spins of `(row, col)`.
    #[inline]
    fn neighbour_sum(&self, row: usize, col: usize) -> i32 {
        let n = self.size;
        let up = self.spins[self.index((row + n - 1) % n, col)] as i32;
        let down = self.spins[self.index((row + 1) % n, col)] as i32;
        let left = self.spins[self.index(row, (col + n - 1) % n)] as i32;
        let right = self.spins[self.index(row, (col + 1) % n)] as i32;
        up + down + left + right
    }

    /// Total energy `-J * Σ_<i,j> σ_i σ_j` over the `2 * size²` torus bonds.
    ///
    /// Each bond is counted once by pairing every site with its right and
    /// down neighbour (with wraparound).
    pub fn total_energy(&self) -> f64 {
        let n = self.size;
        let mut bond_sum: i64 = 0;
        for row in 0..n {
            for col in 0..n {
                let here = self.spins[self.index(row, col)] as i64;
                let right = self.spins[self.index(row, (col + 1) % n)] as i64;
                let down = self.spins[self.index((row + 1) % n, col)] as i64;
                bond_sum += here * (right + down);
            }
        }
        -self.coupling * bond_sum as f64
    }

    /// Mean spin `Σ σ_i / size²`, in `[-1, 1]`.
    pub fn magnetization(&self) -> f64 {
        let sum: i64 = self.spins.iter().map(|&s| s as i64).sum();
        sum as f64 / (self.size * self.size) as f64
    }

    /// Energy change `ΔE = 2 J σ_rc Σ_nb σ_nb` from flipping the spin at
    /// `(row, col)`, without performing the flip.
    pub fn flip_energy_delta(&self, row: usize, col: usize) -> Result<f64, LatticeError> {
        if row >= self.size || col >= self.size {
            return Err(LatticeError::SiteOutOfBounds { row, col, size: self.size });
        }
        Ok(self.flip_delta_unchecked(row, col))
    }

    #[inline]
    fn flip_delta_unchecked(&self, row: usize, col: usize) -> f64 {
        let spin = self.spins[self.index(row, col)] as i32;
        2.0 * self.coupling * (spin * self.neighbour_sum(row, col)) as f64
    }

    /// One Metropolis step: propose flipping a uniformly random site and
    /// accept if `ΔE <= 0`, otherwise with probability `exp(-ΔE / temperature)`.
    ///
    /// Returns whether the flip was accepted. A step is a single proposal, so
    /// "`n` steps" means `n` attempted flips, not `n` sweeps.
    ///
    /// Panics if `temperature` is not strictly positive.
    pub fn metropolis_update(&mut self, temperature: f64, rng: &mut impl Rng) -> bool {
        assert!(temperature > 0.0, "temperature must be positive");
        let site = rng.random_range(0..self.size * self.size);
        let (row, col) = (site / self.size, site % self.size);
        let delta = self.flip_delta_unchecked(row, col);
        // Short-circuit keeps the acceptance draw from consuming randomness
        // when the move is accepted unconditionally.
        let accept = delta <= 0.0 || rng.random::<f64>() < (-delta / temperature).exp();
        if accept {
            self.spins[site] = -self.spins[site];
        }
        accept
    }

    /// One Wolff cluster step: grow a same-sign cluster from a uniformly
    /// random seed site, adding each tested neighbour with probability
    /// [`wolff_add_probability`], then flip the whole cluster.
    ///
    /// Returns the cluster size. Neighbours are examined in a fixed
    /// up/down/left/right order so the update is reproducible for a given
    /// generator state. A site joins the cluster at most once, but a bond to
    /// a not-yet-joined site is retested each time the site is reached.
    ///
    /// Panics if `temperature` is not strictly positive.
    pub fn wolff_update(&mut self, temperature: f64, rng: &mut impl Rng) -> usize {
        assert!(temperature > 0.0, "temperature must be positive");
        let n = self.size;
        let p_add = wolff_add_probability(self.coupling, temperature);
        let seed_site = rng.random_range(0..n * n);
        let seed_spin = self.spins[seed_site];

        let mut in_cluster = vec![false; n * n];
        let mut queue = VecDeque::new();
        in_cluster[seed_site] = true;
        queue.push_back(seed_site);
        let mut cluster = vec![seed_site];

        while let Some(site) = queue.pop_front() {
            let (row, col) = (site / n, site % n);
            let neighbours = [
                self.index((row + n - 1) % n, col),
                self.index((row + 1) % n, col),
                self.index(row, (col + n - 1) % n),
                self.index(row, (col + 1) % n),
            ];
            for nb in neighbours {
                if !in_cluster[nb]
                    && self.spins[nb] == seed_spin
                    && rng.random::<f64>() < p_add
                {
                    in_cluster[nb] = true;
                    queue.push_back(nb);
                    cluster.push(nb);
                }
            }
        }

        for &site in &cluster {
            self.spins[site] = -self.spins[site];
        }
        cluster.len()
    }
}

/// The Wolff bond-activation probability `1 - exp(-2 J / T)`.
pub fn wolff_add_probability(coupling: f64, temperature: f64) -> f64 {
    1.0 - (-2.0 * coupling / temperature).exp()
}
