//! Single-excitation tight-binding Hamiltonians with per-site losses.
//!
//! All energies and couplings are angular frequencies in rad/s; loss rates
//! are energy decay rates in 1/s, so amplitudes decay at half that rate. The
//! effective non-Hermitian generator is
//!
//! ```text
//! H = diag(ε_n − iΓ_n/2) + J
//! ```
//!
//! with `J` real, symmetric and zero on the diagonal.

mod propagate;
mod strategy;

pub use propagate::{propagate_expm, propagate_ode, propagate_second_order};
pub use strategy::{
    propagator_registry, ExpmPropagator, Propagator, Rk4Propagator, SecondOrderPropagator,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Above this `max|J| / min ε` the weak-coupling picture (and the circuit
/// analogue built on it) is flagged as unreliable.
pub const WEAK_COUPLING_WARN_RATIO: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct TightBindingHamiltonian {
    site_energies: Vec<f64>,
    loss_rates: Vec<f64>,
    couplings: DMatrix<f64>,
}

/// Validating constructor; same as [`TightBindingHamiltonian::new`].
pub fn make_hamiltonian(
    site_energies: Vec<f64>,
    loss_rates: Vec<f64>,
    couplings: DMatrix<f64>,
) -> Result<TightBindingHamiltonian> {
    TightBindingHamiltonian::new(site_energies, loss_rates, couplings)
}

impl TightBindingHamiltonian {
    pub fn new(
        site_energies: Vec<f64>,
        loss_rates: Vec<f64>,
        couplings: DMatrix<f64>,
    ) -> Result<Self> {
        let n = site_energies.len();
        if n == 0 {
            return Err(Error::invalid("site_energies", "need at least one site"));
        }
        if loss_rates.len() != n {
            return Err(Error::DimensionMismatch {
                what: "loss_rates",
                expected: n,
                found: loss_rates.len(),
            });
        }
        if couplings.nrows() != n || couplings.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "couplings",
                expected: n,
                found: if couplings.nrows() != n {
                    couplings.nrows()
                } else {
                    couplings.ncols()
                },
            });
        }
        for (site, &e) in site_energies.iter().enumerate() {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::NonpositiveSiteEnergy { site, value: e });
            }
        }
        for (site, &g) in loss_rates.iter().enumerate() {
            if !(g >= 0.0) || !g.is_finite() {
                return Err(Error::invalid(
                    "loss_rates",
                    format!("site {site} has invalid loss rate {g}"),
                ));
            }
        }
        let scale = couplings.amax();
        for row in 0..n {
            if couplings[(row, row)] != 0.0 {
                return Err(Error::invalid(
                    "couplings",
                    format!("diagonal entry {row} is {} (must be zero)", couplings[(row, row)]),
                ));
            }
            for col in (row + 1)..n {
                let (fwd, bwd) = (couplings[(row, col)], couplings[(col, row)]);
                if !fwd.is_finite() || !bwd.is_finite() {
                    return Err(Error::invalid("couplings", "entries must be finite"));
                }
                if (fwd - bwd).abs() > 1e-12 * scale {
                    return Err(Error::AsymmetricCoupling {
                        row,
                        col,
                        forward: fwd,
                        backward: bwd,
                    });
                }
            }
        }
        Ok(Self {
            site_energies,
            loss_rates,
            couplings,
        })
    }

    /// Build from a sparse list of `(n, m, J_nm)` entries; each pair is
    /// written symmetrically.
    pub fn from_bonds(
        site_energies: Vec<f64>,
        loss_rates: Vec<f64>,
        bonds: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let n = site_energies.len();
        let mut j = DMatrix::zeros(n, n);
        for &(a, b, value) in bonds {
            if a >= n || b >= n || a == b {
                return Err(Error::invalid(
                    "couplings",
                    format!("bond ({a}, {b}) is not between two distinct sites of {n}"),
                ));
            }
            j[(a, b)] = value;
            j[(b, a)] = value;
        }
        Self::new(site_energies, loss_rates, j)
    }

    /// Open nearest-neighbour chain; `bonds[k]` couples sites k and k+1.
    pub fn chain(site_energies: Vec<f64>, loss_rates: Vec<f64>, bonds: &[f64]) -> Result<Self> {
        let list: Vec<_> = bonds.iter().enumerate().map(|(k, &v)| (k, k + 1, v)).collect();
        Self::from_bonds(site_energies, loss_rates, &list)
    }

    pub fn n_sites(&self) -> usize {
        self.site_energies.len()
    }

    pub fn site_energies(&self) -> &[f64] {
        &self.site_energies
    }

    pub fn loss_rates(&self) -> &[f64] {
        &self.loss_rates
    }

    pub fn couplings(&self) -> &DMatrix<f64> {
        &self.couplings
    }

    pub fn coupling(&self, a: usize, b: usize) -> f64 {
        self.couplings[(a, b)]
    }

    pub fn is_lossless(&self) -> bool {
        self.loss_rates.iter().all(|&g| g == 0.0)
    }

    pub fn max_site_energy(&self) -> f64 {
        self.site_energies.iter().copied().fold(0.0, f64::max)
    }

    /// Same sites and couplings with every loss rate set to zero.
    pub fn lossless(&self) -> Self {
        Self {
            loss_rates: vec![0.0; self.n_sites()],
            ..self.clone()
        }
    }

    pub fn with_loss_rates(&self, loss_rates: Vec<f64>) -> Result<Self> {
        Self::new(self.site_energies.clone(), loss_rates, self.couplings.clone())
    }

    /// `diag(ε − iΓ/2) + J` as a dense complex matrix.
    pub fn effective_matrix(&self) -> DMatrix<Complex64> {
        let n = self.n_sites();
        DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                Complex64::new(self.site_energies[r], -0.5 * self.loss_rates[r])
            } else {
                Complex64::new(self.couplings[(r, c)], 0.0)
            }
        })
    }

    /// `max|J_nm| / min ε_n`.
    pub fn weak_coupling_ratio(&self) -> f64 {
        let min_eps = self.site_energies.iter().copied().fold(f64::INFINITY, f64::min);
        self.couplings.amax() / min_eps
    }

    /// Logs a warning when the weak-coupling ratio exceeds
    /// [`WEAK_COUPLING_WARN_RATIO`]; returns whether it did.
    pub fn warn_if_strongly_coupled(&self) -> bool {
        let ratio = self.weak_coupling_ratio();
        if ratio > WEAK_COUPLING_WARN_RATIO {
            log::warn!(
                "coupling/site-energy ratio {ratio:.4} exceeds {WEAK_COUPLING_WARN_RATIO}; \
                 the circuit analogue is outside its weak-coupling regime"
            );
            true
        } else {
            false
        }
    }
}

/// Free-function form of [`TightBindingHamiltonian::weak_coupling_ratio`].
pub fn weak_coupling_ratio(h: &TightBindingHamiltonian) -> f64 {
    h.weak_coupling_ratio()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
}

impl QuantumState {
    pub fn new(amplitudes: Vec<Complex64>, time: f64) -> Self {
        Self { amplitudes, time }
    }

    /// Unit excitation on one site at t = 0.
    pub fn localized(n_sites: usize, site: usize) -> Result<Self> {
        if site >= n_sites {
            return Err(Error::invalid(
                "initial_site",
                format!("site index {site} out of range for {n_sites} sites"),
            ));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n_sites];
        amplitudes[site] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes, time: 0.0 })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }

    pub(crate) fn as_vector(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.amplitudes)
    }
}

/// Uniform or arbitrary time samples of a propagated state.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumTrajectory {
    times: Vec<f64>,
    amplitudes: Vec<Vec<Complex64>>,
    populations: Vec<Vec<f64>>,
}

impl QuantumTrajectory {
    pub fn new(times: Vec<f64>, amplitudes: Vec<Vec<Complex64>>) -> Result<Self> {
        if times.len() != amplitudes.len() {
            return Err(Error::DimensionMismatch {
                what: "trajectory states",
                expected: times.len(),
                found: amplitudes.len(),
            });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("times", "must be strictly increasing"));
        }
        let populations = amplitudes
            .iter()
            .map(|row| row.iter().map(|c| c.norm_sqr()).collect())
            .collect();
        Ok(Self {
            times,
            amplitudes,
            populations,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_sites(&self) -> usize {
        self.amplitudes.first().map_or(0, Vec::len)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn amplitudes(&self) -> &[Vec<Complex64>] {
        &self.amplitudes
    }

    /// `populations()[k][n] = |c_n(t_k)|²`.
    pub fn populations(&self) -> &[Vec<f64>] {
        &self.populations
    }

    pub fn state(&self, k: usize) -> QuantumState {
        QuantumState::new(self.amplitudes[k].clone(), self.times[k])
    }

    pub fn last_state(&self) -> QuantumState {
        self.state(self.len() - 1)
    }

    /// Population series of one site.
    pub fn site_population(&self, site: usize) -> Vec<f64> {
        self.populations.iter().map(|p| p[site]).collect()
    }
}

/// Total population `Σ_n |c_n|²` at every sample.
pub fn quantum_energy(traj: &QuantumTrajectory) -> Vec<f64> {
    traj.populations().iter().map(|p| p.iter().sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_site_mapping_example_is_valid() {
        let h = TightBindingHamiltonian::chain(vec![453.81, 453.81], vec![0.0, 0.0], &[-7.647])
            .unwrap();
        assert_eq!(h.n_sites(), 2);
        assert_eq!(h.coupling(0, 1), h.coupling(1, 0));
    }

    #[test]
    fn single_site() {
        let h = make_hamiltonian(vec![1.0], vec![0.0], DMatrix::zeros(1, 1)).unwrap();
        assert_eq!(h.n_sites(), 1);
        assert_eq!(h.weak_coupling_ratio(), 0.0);
    }

    #[test]
    fn rejects_asymmetric() {
        let j = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(matches!(
            make_hamiltonian(vec![1.0, 1.0], vec![0.0, 0.0], j),
            Err(Error::AsymmetricCoupling { row: 0, col: 1, .. })
        ));
    }

    #[test]
    fn rejects_bad_energies_and_dimensions() {
        assert!(matches!(
            make_hamiltonian(vec![1.0, -2.0], vec![0.0, 0.0], DMatrix::zeros(2, 2)),
            Err(Error::NonpositiveSiteEnergy { site: 1, .. })
        ));
        assert!(matches!(
            make_hamiltonian(vec![1.0, 2.0], vec![0.0], DMatrix::zeros(2, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            make_hamiltonian(vec![1.0, 2.0], vec![0.0, 0.0], DMatrix::zeros(3, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
        let diag = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]);
        assert!(make_hamiltonian(vec![1.0, 1.0], vec![0.0, 0.0], diag).is_err());
        assert!(make_hamiltonian(vec![1.0], vec![-0.1], DMatrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn weak_coupling_ratio_direct() {
        let h = TightBindingHamiltonian::chain(vec![1.0, 1.0], vec![0.0, 0.0], &[0.5]).unwrap();
        assert_eq!(weak_coupling_ratio(&h), 0.5);
        assert!(h.warn_if_strongly_coupled());
    }

    #[test]
    fn effective_matrix_carries_half_loss() {
        let h = TightBindingHamiltonian::chain(vec![3.0, 4.0], vec![2.0, 0.0], &[-1.0]).unwrap();
        let m = h.effective_matrix();
        assert_eq!(m[(0, 0)], Complex64::new(3.0, -1.0));
        assert_eq!(m[(0, 1)], Complex64::new(-1.0, 0.0));
    }
}
