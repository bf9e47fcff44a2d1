//! The bundled experiments (Anderson localization, SSH edge states,
//! coherent transfer, B800 ring) in both quantum and circuit form, the
//! disorder ensemble runner, and the end-to-end run pipeline.
//!
//! All circuit constants are the component values of the reconfigurable
//! platform. Presets are pure functions of their parameters and seed.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{
    self, carrier_period, compare_populations_trimmed, envelope_named, participation_ratio,
    site_positions, spread_variance, time_average, transfer_efficiency, EnvelopeSeries,
    SiteSeries,
};
use crate::circuit::{simulate_plan, CircuitNetwork, CircuitState, CircuitTrajectory};
use crate::error::{Error, Result};
use crate::mapping::{
    circuit_to_quantum, quantum_to_circuit, rescale, wavenumber_to_angular, B800_RESCALING,
};
use crate::ode::{max_step, Sampling, StepPlan};
use crate::registry::Registry;
use crate::tight_binding::propagator_registry;
use crate::tight_binding::{QuantumState, QuantumTrajectory, TightBindingHamiltonian};

pub const SITE_INDUCTANCE: f64 = 3.35e-3;
pub const SITE_CAPACITANCE: f64 = 1.5e-3;

pub const ANDERSON_SITES: usize = 9;
pub const ANDERSON_RESISTANCE: f64 = 1e3;
pub const ANDERSON_COUPLING: f64 = 96.05e-3;

pub const SSH_CELLS: usize = 5;
pub const SSH_RESISTANCE: f64 = 900.0;
pub const SSH_ALPHA: f64 = 96.05e-3;
pub const SSH_BETA: f64 = 192.1e-3;

pub const TRANSFER_SITES: usize = 7;
pub const TRANSFER_TIME: f64 = 5.6;
pub const TRANSFER_RESISTANCE: f64 = 1.5e3;
pub const TRANSFER_INDUCTANCE: f64 = 1.11e-3;
pub const TRANSFER_CAPACITANCES: [f64; 7] = [7.54e-3, 7.58e-3, 7.58e-3, 7.54e-3, 7.58e-3, 7.58e-3, 7.54e-3];
pub const TRANSFER_COUPLINGS: [f64; 6] = [321.36e-3, 181.97e-3, 75.45e-3, 75.45e-3, 181.97e-3, 321.36e-3];

pub const B800_SITES: usize = 9;
pub const B800_RESISTANCE: f64 = 1e3;
pub const B800_COUPLING: f64 = 806.90e-3;
/// Site energy and coupling of the ring, in cm⁻¹.
pub const B800_SITE_WAVENUMBER: f64 = 12450.0;
pub const B800_COUPLING_WAVENUMBER: f64 = -27.0;
pub const B800_WINDOW: f64 = 3.2;

/// Default window for the Anderson and SSH experiments.
pub const DEFAULT_WINDOW: f64 = 2.0;
/// Circuit and quantum runs keep every fifth integrator step: 40 samples per
/// carrier period at the default step.
pub const DEFAULT_STRIDE: usize = 5;

/// How on-site inductors are chosen in the chain presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SiteTuning {
    /// Every `L_n` is re-solved so that all sites share the bulk frequency.
    #[default]
    Uniform,
    /// `L_n` from the component table on every node; edge sites (fewer
    /// coupling inductors) end up detuned.
    Table,
}

/// Which bond type terminates the SSH chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SshEdgeBond {
    /// Weak (`L_β`) bonds at both ends: the topological configuration with
    /// edge states.
    #[default]
    Beta,
    /// Strong (`L_α`) bond first: `[α, β, α, …]`.
    Alpha,
}

/// Off-diagonal disorder: each coupling inductor is drawn uniformly from
/// `[L_x(1−Δ), L_x(1+Δ)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub delta: f64,
    pub coupling_inductance: f64,
    pub n_realizations: usize,
    pub master_seed: u64,
}

impl Default for DisorderSpec {
    fn default() -> Self {
        Self {
            delta: 0.0,
            coupling_inductance: ANDERSON_COUPLING,
            n_realizations: 50,
            master_seed: 0,
        }
    }
}

impl DisorderSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::invalid("delta", format!("must lie in [0, 1), got {}", self.delta)));
        }
        if !(self.coupling_inductance > 0.0) || !self.coupling_inductance.is_finite() {
            return Err(Error::invalid(
                "coupling_inductance",
                format!("must be positive, got {}", self.coupling_inductance),
            ));
        }
        if self.n_realizations == 0 {
            return Err(Error::invalid("n_realizations", "must be at least 1"));
        }
        Ok(())
    }

    /// Random stream of one realization. Bond `b` reads from word position
    /// `2b`, so draws do not depend on evaluation order.
    fn rng(&self, realization: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(realization as u64);
        rng
    }

    /// Coupling inductors of `n_bonds` bonds for one realization.
    pub fn sample_couplings(&self, n_bonds: usize, realization: usize) -> Result<Vec<f64>> {
        self.validate()?;
        if realization >= self.n_realizations {
            return Err(Error::invalid(
                "realization",
                format!("index {realization} out of range for {} realizations", self.n_realizations),
            ));
        }
        let lx = self.coupling_inductance;
        if self.delta == 0.0 {
            return Ok(vec![lx; n_bonds]);
        }
        let (lo, hi) = (lx * (1.0 - self.delta), lx * (1.0 + self.delta));
        let mut rng = self.rng(realization);
        Ok((0..n_bonds)
            .map(|b| {
                rng.set_word_pos(2 * b as u128);
                rng.random_range(lo..=hi)
            })
            .collect())
    }

    /// Relative site-energy offsets in `[−1, 1]`, drawn after the bonds.
    fn sample_site_offsets(&self, n_bonds: usize, n_sites: usize, realization: usize) -> Vec<f64> {
        let mut rng = self.rng(realization);
        (0..n_sites)
            .map(|k| {
                rng.set_word_pos(2 * (n_bonds + k) as u128);
                rng.random_range(-1.0..=1.0)
            })
            .collect()
    }
}

fn bonds_to_admittance(n: usize, bonds: &[(usize, usize, f64)]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for &(a, b, l) in bonds {
        y[a] += 1.0 / l;
        y[b] += 1.0 / l;
    }
    y
}

/// On-site inductors giving each node the target frequency `eps[n]`.
fn tuned_inductances(eps: &[f64], capacitances: &[f64], bonds: &[(usize, usize, f64)]) -> Result<Vec<f64>> {
    let admittance = bonds_to_admittance(eps.len(), bonds);
    eps.iter()
        .zip(capacitances)
        .zip(&admittance)
        .enumerate()
        .map(|(node, ((e, c), y))| {
            let inverse = e * e * c - y;
            if inverse > 0.0 {
                Ok(1.0 / inverse)
            } else {
                Err(Error::InfeasibleInductance {
                    node,
                    inverse_inductance: inverse,
                })
            }
        })
        .collect()
}

fn chain_bonds(couplings: &[f64]) -> Vec<(usize, usize, f64)> {
    couplings.iter().enumerate().map(|(k, &l)| (k, k + 1, l)).collect()
}

/// Parameters of the disordered chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AndersonParams {
    pub n_sites: usize,
    pub delta: f64,
    pub coupling_inductance: f64,
    pub n_realizations: usize,
    pub seed: u64,
    /// Which realization a single run uses.
    pub realization: usize,
    pub site_tuning: SiteTuning,
    /// Relative half-width of uniform site-energy disorder (uniform tuning
    /// only).
    pub site_disorder: f64,
    pub site_inductance: f64,
    pub capacitance: f64,
    /// Loss resistor on every node; `None` for a lossless chain.
    pub resistance: Option<f64>,
    /// 1-based; defaults to the centre site.
    pub initial_site: Option<usize>,
    pub t_end: f64,
}

impl Default for AndersonParams {
    fn default() -> Self {
        Self {
            n_sites: ANDERSON_SITES,
            delta: 0.0,
            coupling_inductance: ANDERSON_COUPLING,
            n_realizations: 50,
            seed: 0,
            realization: 0,
            site_tuning: SiteTuning::Uniform,
            site_disorder: 0.0,
            site_inductance: SITE_INDUCTANCE,
            capacitance: SITE_CAPACITANCE,
            resistance: Some(ANDERSON_RESISTANCE),
            initial_site: None,
            t_end: DEFAULT_WINDOW,
        }
    }
}

impl AndersonParams {
    pub fn disorder(&self) -> DisorderSpec {
        DisorderSpec {
            delta: self.delta,
            coupling_inductance: self.coupling_inductance,
            n_realizations: self.n_realizations,
            master_seed: self.seed,
        }
    }

    /// 0-based index of the excited site.
    pub fn centre(&self) -> usize {
        self.initial_site.map_or(self.n_sites / 2, |s| s.saturating_sub(1))
    }

    fn check_initial_site(&self) -> Result<usize> {
        match self.initial_site {
            Some(label) => site_index("initial_site", label, self.n_sites),
            None => Ok(self.n_sites / 2),
        }
    }

    /// Bulk frequency of the ordered chain, shared by every site under
    /// uniform tuning.
    pub fn reference_frequency(&self) -> f64 {
        ((1.0 / self.capacitance) * (1.0 / self.site_inductance + 2.0 / self.coupling_inductance)).sqrt()
    }

    /// Circuit of one disorder realization.
    pub fn network(&self, realization: usize) -> Result<CircuitNetwork> {
        if self.n_sites < 2 {
            return Err(Error::invalid("n_sites", "need at least two sites"));
        }
        if !(0.0..1.0).contains(&self.site_disorder) {
            return Err(Error::invalid(
                "site_disorder",
                format!("must lie in [0, 1), got {}", self.site_disorder),
            ));
        }
        let spec = self.disorder();
        let bonds = chain_bonds(&spec.sample_couplings(self.n_sites - 1, realization)?);
        let c = vec![self.capacitance; self.n_sites];
        let inductances = match self.site_tuning {
            SiteTuning::Table => {
                if self.site_disorder != 0.0 {
                    return Err(Error::invalid(
                        "site_disorder",
                        "site-energy disorder requires site_tuning = \"uniform\"",
                    ));
                }
                vec![self.site_inductance; self.n_sites]
            }
            SiteTuning::Uniform => {
                let e0 = self.reference_frequency();
                let eps: Vec<f64> = if self.site_disorder == 0.0 {
                    vec![e0; self.n_sites]
                } else {
                    spec.sample_site_offsets(self.n_sites - 1, self.n_sites, realization)
                        .into_iter()
                        .map(|u| e0 * (1.0 + self.site_disorder * u))
                        .collect()
                };
                tuned_inductances(&eps, &c, &bonds)?
            }
        };
        CircuitNetwork::new(vec![self.resistance; self.n_sites], inductances, c, bonds)
    }
}

/// Disordered chain with the default component values and uniform site
/// tuning.
pub fn anderson_preset(n_sites: usize, spec: DisorderSpec, realization_index: usize) -> Result<CircuitNetwork> {
    spec.validate()?;
    AndersonParams {
        n_sites,
        delta: spec.delta,
        coupling_inductance: spec.coupling_inductance,
        n_realizations: spec.n_realizations,
        seed: spec.master_seed,
        ..AndersonParams::default()
    }
    .network(realization_index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SshParams {
    pub n_cells: usize,
    pub edge_bond: SshEdgeBond,
    pub site_tuning: SiteTuning,
    pub alpha_inductance: f64,
    pub beta_inductance: f64,
    pub site_inductance: f64,
    pub capacitance: f64,
    pub resistance: Option<f64>,
    /// 1-based.
    pub initial_site: usize,
    pub t_end: f64,
}

impl Default for SshParams {
    fn default() -> Self {
        Self {
            n_cells: SSH_CELLS,
            edge_bond: SshEdgeBond::Beta,
            site_tuning: SiteTuning::Uniform,
            alpha_inductance: SSH_ALPHA,
            beta_inductance: SSH_BETA,
            site_inductance: SITE_INDUCTANCE,
            capacitance: SITE_CAPACITANCE,
            resistance: Some(SSH_RESISTANCE),
            initial_site: 1,
            t_end: DEFAULT_WINDOW,
        }
    }
}

impl SshParams {
    pub fn n_sites(&self) -> usize {
        2 * self.n_cells
    }

    /// Bulk frequency: one `L_α` and one `L_β` on every interior node.
    pub fn reference_frequency(&self) -> f64 {
        ((1.0 / self.capacitance)
            * (1.0 / self.site_inductance + 1.0 / self.alpha_inductance + 1.0 / self.beta_inductance))
            .sqrt()
    }

    pub fn bond_inductances(&self) -> Vec<f64> {
        let (first, second) = match self.edge_bond {
            SshEdgeBond::Alpha => (self.alpha_inductance, self.beta_inductance),
            SshEdgeBond::Beta => (self.beta_inductance, self.alpha_inductance),
        };
        (0..self.n_sites() - 1)
            .map(|k| if k % 2 == 0 { first } else { second })
            .collect()
    }

    pub fn network(&self) -> Result<CircuitNetwork> {
        if self.n_cells < 2 {
            return Err(Error::invalid(
                "n_cells",
                format!("need at least two cells, got {}", self.n_cells),
            ));
        }
        let n = self.n_sites();
        let bonds = chain_bonds(&self.bond_inductances());
        let c = vec![self.capacitance; n];
        let inductances = match self.site_tuning {
            SiteTuning::Table => vec![self.site_inductance; n],
            SiteTuning::Uniform => tuned_inductances(&vec![self.reference_frequency(); n], &c, &bonds)?,
        };
        CircuitNetwork::new(vec![self.resistance; n], inductances, c, bonds)
    }
}

/// SSH chain of `n_cells` two-site cells with the default components.
pub fn ssh_preset(n_cells: usize) -> Result<CircuitNetwork> {
    SshParams {
        n_cells,
        ..SshParams::default()
    }
    .network()
}

/// Coupling magnitudes `J_n = (π / 2t_f) √(n(N−n))`, `n = 1 … N−1`, for
/// perfect transfer from site 1 to site N at `t_f`.
pub fn transfer_couplings(n_sites: usize, t_f: f64) -> Result<Vec<f64>> {
    if n_sites < 2 {
        return Err(Error::invalid("n_sites", "need at least two sites"));
    }
    if !(t_f > 0.0) || !t_f.is_finite() {
        return Err(Error::invalid("t_f", format!("must be positive, got {t_f}")));
    }
    let scale = std::f64::consts::PI / (2.0 * t_f);
    Ok((1..n_sites)
        .map(|n| scale * ((n * (n_sites - n)) as f64).sqrt())
        .collect())
}

/// The component-table realization of the seven-site transfer chain.
pub fn transfer_table_network(lossy: bool) -> Result<CircuitNetwork> {
    let r = lossy.then_some(TRANSFER_RESISTANCE);
    CircuitNetwork::new(
        vec![r; TRANSFER_SITES],
        vec![TRANSFER_INDUCTANCE; TRANSFER_SITES],
        TRANSFER_CAPACITANCES.to_vec(),
        chain_bonds(&TRANSFER_COUPLINGS),
    )
}

/// Site energy of the transfer chain: the mean natural frequency of the
/// component-table network.
pub fn transfer_site_energy() -> Result<f64> {
    let eps = transfer_table_network(false)?.natural_frequencies();
    Ok(eps.iter().sum::<f64>() / eps.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferSystem {
    pub hamiltonian: TightBindingHamiltonian,
    pub circuit: CircuitNetwork,
}

/// Quantum chain with the √(n(N−n)) couplings (negative sign, as realized
/// by inductive coupling) and its circuit counterpart.
pub fn transfer_preset(n_sites: usize, t_f: f64, lossy: bool) -> Result<TransferSystem> {
    let eps = transfer_site_energy()?;
    let j: Vec<f64> = transfer_couplings(n_sites, t_f)?.into_iter().map(|j| -j).collect();
    let capacitances = if n_sites == TRANSFER_SITES {
        TRANSFER_CAPACITANCES.to_vec()
    } else {
        vec![TRANSFER_CAPACITANCES[0]; n_sites]
    };
    let gamma: Vec<f64> = capacitances
        .iter()
        .map(|c| if lossy { 1.0 / (TRANSFER_RESISTANCE * c) } else { 0.0 })
        .collect();
    let hamiltonian = TightBindingHamiltonian::chain(vec![eps; n_sites], gamma, &j)?;
    let circuit = if n_sites == TRANSFER_SITES {
        transfer_table_network(lossy)?
    } else {
        quantum_to_circuit(&hamiltonian, &capacitances)?
    };
    Ok(TransferSystem { hamiltonian, circuit })
}

#[derive(Debug, Clone, PartialEq)]
pub struct B800System {
    /// Ring Hamiltonian in physical units (rad/s).
    pub physical: TightBindingHamiltonian,
    /// `physical` divided by the platform rescaling factor.
    pub rescaled: TightBindingHamiltonian,
    pub circuit: CircuitNetwork,
    /// Hamiltonian implied by the circuit.
    pub mapped: TightBindingHamiltonian,
    pub eta: f64,
}

fn ring_bonds(n: usize, l: f64) -> Vec<(usize, usize, f64)> {
    (0..n).map(|k| (k.min((k + 1) % n), k.max((k + 1) % n), l)).collect()
}

/// Nine-site nearest-neighbour ring of the B800 antenna.
pub fn b800_preset() -> Result<B800System> {
    let n = B800_SITES;
    let eps = wavenumber_to_angular(B800_SITE_WAVENUMBER);
    let j = wavenumber_to_angular(B800_COUPLING_WAVENUMBER);
    let physical = TightBindingHamiltonian::from_bonds(
        vec![eps; n],
        vec![0.0; n],
        &(0..n).map(|k| (k, (k + 1) % n, j)).collect::<Vec<_>>(),
    )?;
    let rescaled = rescale(&physical, B800_RESCALING)?;
    let circuit = CircuitNetwork::new(
        vec![Some(B800_RESISTANCE); n],
        vec![SITE_INDUCTANCE; n],
        vec![SITE_CAPACITANCE; n],
        ring_bonds(n, B800_COUPLING),
    )?;
    let mapped = circuit_to_quantum(&circuit)?;
    Ok(B800System {
        physical,
        rescaled,
        circuit,
        mapped,
        eta: B800_RESCALING,
    })
}

/// A ready-to-run pair of quantum and circuit descriptions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSystem {
    pub preset: String,
    pub hamiltonian: TightBindingHamiltonian,
    pub circuit: CircuitNetwork,
    pub initial_site: usize,
    pub t_end: f64,
    /// Site and time for transfer read-out.
    pub target: Option<(usize, f64)>,
    /// Physical time = platform time / `time_scale`.
    pub time_scale: Option<f64>,
}

/// A named way of building an [`ExperimentSystem`] from parameters.
pub trait Preset: Send + Sync {
    fn name(&self) -> &'static str;
    /// Fully resolved parameters, defaults included.
    fn parameters(&self) -> Value;
    fn build(&self) -> Result<ExperimentSystem>;
}

fn parse<T: for<'de> Deserialize<'de>>(preset: &str, params: Value) -> Result<T> {
    let params = if params.is_null() {
        Value::Object(Default::default())
    } else {
        params
    };
    serde_json::from_value(params).map_err(|e| Error::invalid(preset, e.to_string()))
}

fn check_window(t_end: f64) -> Result<()> {
    if t_end > 0.0 && t_end.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("t_end", format!("must be positive, got {t_end}")))
    }
}

pub struct AndersonPreset(pub AndersonParams);

impl Preset for AndersonPreset {
    fn name(&self) -> &'static str {
        "anderson"
    }

    fn parameters(&self) -> Value {
        serde_json::to_value(&self.0).expect("parameters serialize")
    }

    fn build(&self) -> Result<ExperimentSystem> {
        let p = &self.0;
        check_window(p.t_end)?;
        let circuit = p.network(p.realization)?;
        let initial_site = p.check_initial_site()?;
        Ok(ExperimentSystem {
            preset: self.name().into(),
            hamiltonian: circuit_to_quantum(&circuit)?,
            circuit,
            initial_site,
            t_end: p.t_end,
            target: None,
            time_scale: None,
        })
    }
}

pub struct SshPreset(pub SshParams);

impl Preset for SshPreset {
    fn name(&self) -> &'static str {
        "ssh"
    }

    fn parameters(&self) -> Value {
        serde_json::to_value(&self.0).expect("parameters serialize")
    }

    fn build(&self) -> Result<ExperimentSystem> {
        let p = &self.0;
        check_window(p.t_end)?;
        let circuit = p.network()?;
        let initial_site = site_index("initial_site", p.initial_site, p.n_sites())?;
        Ok(ExperimentSystem {
            preset: self.name().into(),
            hamiltonian: circuit_to_quantum(&circuit)?,
            circuit,
            initial_site,
            t_end: p.t_end,
            target: None,
            time_scale: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferParams {
    pub n_sites: usize,
    pub t_f: f64,
    pub lossy: bool,
    /// 1-based.
    pub initial_site: usize,
    /// 1-based; defaults to the mirror of `initial_site`.
    pub target_site: Option<usize>,
    /// Defaults to `1.2 t_f`.
    pub t_end: Option<f64>,
}

impl Default for TransferParams {
    fn default() -> Self {
        Self {
            n_sites: TRANSFER_SITES,
            t_f: TRANSFER_TIME,
            lossy: true,
            initial_site: 1,
            target_site: None,
            t_end: None,
        }
    }
}

pub struct TransferPreset(pub TransferParams);

impl Preset for TransferPreset {
    fn name(&self) -> &'static str {
        "transfer"
    }

    fn parameters(&self) -> Value {
        serde_json::to_value(&self.0).expect("parameters serialize")
    }

    fn build(&self) -> Result<ExperimentSystem> {
        let p = &self.0;
        let sys = transfer_preset(p.n_sites, p.t_f, p.lossy)?;
        let t_end = p.t_end.unwrap_or(1.2 * p.t_f);
        check_window(t_end)?;
        let initial_site = site_index("initial_site", p.initial_site, p.n_sites)?;
        let target = match p.target_site {
            Some(label) => site_index("target_site", label, p.n_sites)?,
            None => p.n_sites - 1 - initial_site,
        };
        if p.t_f > t_end {
            return Err(Error::invalid("t_end", format!("window {t_end} ends before t_f = {}", p.t_f)));
        }
        Ok(ExperimentSystem {
            preset: self.name().into(),
            hamiltonian: sys.hamiltonian,
            circuit: sys.circuit,
            initial_site,
            t_end,
            target: Some((target, p.t_f)),
            time_scale: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct B800Params {
    /// 1-based.
    pub initial_site: usize,
    pub t_end: f64,
    /// Loss resistor on every node of the circuit (and the matching loss
    /// rate on the quantum side); `None` for lossless.
    pub resistance: Option<f64>,
}

impl Default for B800Params {
    fn default() -> Self {
        Self {
            initial_site: 1,
            t_end: B800_WINDOW,
            resistance: Some(B800_RESISTANCE),
        }
    }
}

pub struct B800Preset(pub B800Params);

impl Preset for B800Preset {
    fn name(&self) -> &'static str {
        "b800"
    }

    fn parameters(&self) -> Value {
        serde_json::to_value(&self.0).expect("parameters serialize")
    }

    /// The quantum side is the rescaled physical ring with the circuit's
    /// loss rates added.
    fn build(&self) -> Result<ExperimentSystem> {
        let p = &self.0;
        check_window(p.t_end)?;
        let initial_site = site_index("initial_site", p.initial_site, B800_SITES)?;
        let sys = b800_preset()?;
        let circuit = sys.circuit.with_resistances(vec![p.resistance; B800_SITES])?;
        let gamma = p
            .resistance
            .map_or(0.0, |r| 1.0 / (r * SITE_CAPACITANCE));
        Ok(ExperimentSystem {
            preset: self.name().into(),
            hamiltonian: sys.rescaled.with_loss_rates(vec![gamma; B800_SITES])?,
            circuit,
            initial_site,
            t_end: p.t_end,
            target: None,
            time_scale: Some(sys.eta),
        })
    }
}

/// A circuit given component by component. Node and bond indices are
/// 1-based, as in the component tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomCircuit {
    pub inductances: Vec<f64>,
    pub capacitances: Vec<f64>,
    /// Omit for a lossless network.
    #[serde(default)]
    pub resistances: Option<Vec<f64>>,
    /// `[node_a, node_b, L_ab]`.
    #[serde(default)]
    pub couplings: Vec<(usize, usize, f64)>,
}

/// A Hamiltonian realized with the given capacitances. Indices 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomHamiltonian {
    pub site_energies: Vec<f64>,
    #[serde(default)]
    pub loss_rates: Option<Vec<f64>>,
    /// `[site_a, site_b, J_ab]`.
    #[serde(default)]
    pub couplings: Vec<(usize, usize, f64)>,
    pub capacitances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CustomParams {
    pub circuit: Option<CustomCircuit>,
    pub hamiltonian: Option<CustomHamiltonian>,
    /// 1-based.
    pub initial_site: usize,
    pub t_end: f64,
    /// 1-based target site for a transfer read-out at `t_f`.
    pub target_site: Option<usize>,
    pub t_f: Option<f64>,
}

/// Converts a 1-based site label to an index.
fn site_index(name: &str, index: usize, n: usize) -> Result<usize> {
    if index == 0 || index > n {
        Err(Error::invalid(name, format!("1-based index {index} out of range for {n} sites")))
    } else {
        Ok(index - 1)
    }
}

pub struct CustomPreset(pub CustomParams);

impl Preset for CustomPreset {
    fn name(&self) -> &'static str {
        "custom"
    }

    fn parameters(&self) -> Value {
        serde_json::to_value(&self.0).expect("parameters serialize")
    }

    fn build(&self) -> Result<ExperimentSystem> {
        let p = &self.0;
        check_window(p.t_end)?;
        let (hamiltonian, circuit) = match (&p.circuit, &p.hamiltonian) {
            (Some(c), None) => {
                let n = c.inductances.len();
                let resistances = match &c.resistances {
                    Some(r) => r.iter().map(|&r| Some(r)).collect(),
                    None => vec![None; n],
                };
                let bonds = c
                    .couplings
                    .iter()
                    .map(|&(a, b, l)| Ok((site_index("couplings", a, n)?, site_index("couplings", b, n)?, l)))
                    .collect::<Result<Vec<_>>>()?;
                let net = CircuitNetwork::new(resistances, c.inductances.clone(), c.capacitances.clone(), bonds)?;
                (circuit_to_quantum(&net)?, net)
            }
            (None, Some(h)) => {
                let n = h.site_energies.len();
                let bonds = h
                    .couplings
                    .iter()
                    .map(|&(a, b, j)| Ok((site_index("couplings", a, n)?, site_index("couplings", b, n)?, j)))
                    .collect::<Result<Vec<_>>>()?;
                let ham = TightBindingHamiltonian::from_bonds(
                    h.site_energies.clone(),
                    h.loss_rates.clone().unwrap_or_else(|| vec![0.0; n]),
                    &bonds,
                )?;
                let net = quantum_to_circuit(&ham, &h.capacitances)?;
                (ham, net)
            }
            _ => {
                return Err(Error::invalid(
                    "custom",
                    "give exactly one of a `circuit` or a `hamiltonian` table",
                ))
            }
        };
        let n = hamiltonian.n_sites();
        let initial_site = site_index("initial_site", p.initial_site, n)?;
        let target = match (p.target_site, p.t_f) {
            (Some(site), Some(t_f)) => Some((site_index("target_site", site, n)?, t_f)),
            (None, None) => None,
            _ => return Err(Error::invalid("target_site", "target_site and t_f go together")),
        };
        Ok(ExperimentSystem {
            preset: self.name().into(),
            hamiltonian,
            circuit,
            initial_site,
            t_end: p.t_end,
            target,
            time_scale: None,
        })
    }
}

/// Presets keyed by name; the argument is the preset's parameter table.
pub fn preset_registry() -> Registry<dyn Preset, Value> {
    let mut reg: Registry<dyn Preset, Value> = Registry::new("preset");
    reg.register("anderson", "disordered 9-site chain, excitation at the centre", |v| {
        Ok(Box::new(AndersonPreset(parse("anderson", v)?)))
    });
    reg.register("ssh", "10-site SSH chain with staggered couplings", |v| {
        Ok(Box::new(SshPreset(parse("ssh", v)?)))
    });
    reg.register("transfer", "7-site perfect-transfer chain", |v| {
        Ok(Box::new(TransferPreset(parse("transfer", v)?)))
    });
    reg.register("b800", "9-site B800 light-harvesting ring", |v| {
        Ok(Box::new(B800Preset(parse("b800", v)?)))
    });
    reg.register("custom", "user-supplied circuit or Hamiltonian", |v| {
        let p: CustomParams = parse("custom", v)?;
        Ok(Box::new(CustomPreset(p)))
    });
    reg
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Quantum,
    Circuit,
    #[default]
    Both,
}

impl Side {
    pub fn quantum(self) -> bool {
        matches!(self, Side::Quantum | Side::Both)
    }

    pub fn circuit(self) -> bool {
        matches!(self, Side::Circuit | Side::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub side: Side,
    pub propagator: String,
    pub envelope: String,
    /// Integrator steps per stored sample.
    pub stride: usize,
    /// Carrier periods dropped at each edge in agreement metrics.
    pub edge_periods: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            side: Side::Both,
            propagator: "expm".into(),
            envelope: "analytic-signal".into(),
            stride: DEFAULT_STRIDE,
            edge_periods: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub system: ExperimentSystem,
    pub quantum: Option<QuantumTrajectory>,
    pub circuit: Option<CircuitTrajectory>,
    pub envelope: Option<EnvelopeSeries>,
    pub metrics: BTreeMap<String, f64>,
}

/// Integration plan shared by both sides of a system.
pub fn shared_plan(system: &ExperimentSystem, stride: usize) -> Result<StepPlan> {
    let omega = system
        .hamiltonian
        .max_site_energy()
        .max(system.circuit.max_natural_frequency());
    StepPlan::new(system.t_end, max_step(omega), Sampling::Stride(stride))
}

fn final_row(series: &dyn SiteSeries) -> &[f64] {
    series.values().last().map_or(&[], Vec::as_slice)
}

fn site_metrics(
    prefix: &str,
    series: &dyn SiteSeries,
    system: &ExperimentSystem,
    metrics: &mut BTreeMap<String, f64>,
) -> Result<()> {
    let last = final_row(series);
    let total: f64 = last.iter().sum();
    metrics.insert(format!("{prefix}return_probability"), last[system.initial_site]);
    metrics.insert(format!("{prefix}retention"), time_average(series, system.initial_site));
    metrics.insert(format!("{prefix}final_total"), total);
    if total > 0.0 {
        metrics.insert(format!("{prefix}participation_ratio"), participation_ratio(last)?);
        metrics.insert(
            format!("{prefix}spread_variance"),
            spread_variance(last, &site_positions(last.len()))?,
        );
    }
    if let Some((site, t_f)) = system.target {
        let eff = transfer_efficiency(series, site, t_f)?;
        metrics.insert(format!("{prefix}transfer_efficiency"), eff.at_t_f);
        metrics.insert(format!("{prefix}transfer_efficiency_peak"), eff.peak);
        metrics.insert(format!("{prefix}transfer_efficiency_peak_time"), eff.peak_time);
    }
    Ok(())
}

/// Runs one system on the requested sides over a shared time grid and
/// collects metrics. Circuit-side metrics carry a `circuit_` prefix.
pub fn run_experiment(system: &ExperimentSystem, opts: &RunOptions) -> Result<ExperimentResult> {
    let plan = shared_plan(system, opts.stride)?;
    let mut metrics = BTreeMap::new();
    let h = &system.hamiltonian;
    h.warn_if_strongly_coupled();
    metrics.insert("weak_coupling_ratio".into(), h.weak_coupling_ratio());
    metrics.insert(
        "mean_loss_rate".into(),
        h.loss_rates().iter().sum::<f64>() / h.n_sites() as f64,
    );
    metrics.insert("dt".into(), plan.dt);
    if let Some(eta) = system.time_scale {
        metrics.insert("physical_window_ps".into(), system.t_end / eta * 1e12);
    }

    let quantum = if opts.side.quantum() {
        let propagator = propagator_registry().create(&opts.propagator, ())?;
        let c0 = QuantumState::localized(h.n_sites(), system.initial_site)?;
        let traj = propagator.propagate(h, &c0, &plan)?;
        site_metrics("", &traj, system, &mut metrics)?;
        Some(traj)
    } else {
        None
    };

    let (circuit, envelope) = if opts.side.circuit() {
        let net = &system.circuit;
        let init = CircuitState::excited(net, system.initial_site)?;
        let traj = simulate_plan(net, &init, &plan)?;
        let energies = traj.energies(net)?;
        metrics.insert("decay_rate".into(), analysis::fit_decay_rate(traj.times(), &energies)?);
        metrics.insert(
            "energy_drift".into(),
            energies.iter().map(|e| (e / energies[0] - 1.0).abs()).fold(0.0, f64::max),
        );
        let env = envelope_named(&traj, net, &opts.envelope)?;
        site_metrics("circuit_", &env, system, &mut metrics)?;
        (Some(traj), Some(env))
    } else {
        (None, None)
    };

    if let (Some(q), Some(e)) = (&quantum, &envelope) {
        let trim = opts.edge_periods * carrier_period(&system.circuit);
        let report = compare_populations_trimmed(q, e, trim)?;
        metrics.insert("agreement_global_mae".into(), report.global_mae);
        metrics.insert("agreement_normalized_l2".into(), report.normalized_l2);
        metrics.insert("agreement_worst_site".into(), (report.worst_site + 1) as f64);
        metrics.insert("agreement_worst_site_mae".into(), report.per_site_mae[report.worst_site]);
    }

    Ok(ExperimentResult {
        system: system.clone(),
        quantum,
        circuit,
        envelope,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleOptions {
    /// Also simulate every realization's circuit and average its envelope.
    pub include_circuit: bool,
    pub envelope: String,
    /// Number of stored samples over the window (including both ends).
    pub samples: usize,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            include_circuit: false,
            envelope: "analytic-signal".into(),
            samples: 201,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub delta: f64,
    pub n_realizations: usize,
    pub initial_site: usize,
    pub times: Vec<f64>,
    /// `[sample][site]`, averaged over realizations.
    pub quantum_mean: Vec<Vec<f64>>,
    pub circuit_mean: Option<Vec<Vec<f64>>>,
    /// Mean over realizations of the final participation ratio.
    pub mean_participation_ratio: f64,
    /// Mean final population at the initial site.
    pub return_probability: f64,
    /// Spread variance of the averaged populations at every sample.
    pub variance_curve: Vec<f64>,
    pub circuit_return_probability: Option<f64>,
    pub circuit_mean_participation_ratio: Option<f64>,
}

impl SiteSeries for EnsembleResult {
    fn times(&self) -> &[f64] {
        &self.times
    }

    fn values(&self) -> &[Vec<f64>] {
        &self.quantum_mean
    }
}

struct Realization {
    quantum: Vec<Vec<f64>>,
    circuit: Option<Vec<Vec<f64>>>,
}

fn resample(series: &dyn SiteSeries, times: &[f64]) -> Vec<Vec<f64>> {
    let src_t = series.times();
    let src = series.values();
    times
        .iter()
        .map(|&t| {
            let k = src_t.partition_point(|&x| x <= t).clamp(1, src_t.len() - 1);
            let (t0, t1) = (src_t[k - 1], src_t[k]);
            let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
            src[k - 1]
                .iter()
                .zip(&src[k])
                .map(|(a, b)| a * (1.0 - w) + b * w)
                .collect()
        })
        .collect()
}

fn run_realization(params: &AndersonParams, index: usize, times: &[f64], opts: &EnsembleOptions) -> Result<Realization> {
    let net = params.network(index)?;
    let h = circuit_to_quantum(&net)?;
    let site = params.centre();
    let c0 = QuantumState::localized(h.n_sites(), site)?;
    let quantum = crate::tight_binding::propagate_expm(&h, &c0, times)?
        .populations()
        .to_vec();
    let circuit = if opts.include_circuit {
        let plan = StepPlan::new(params.t_end, max_step(net.max_natural_frequency()), Sampling::Stride(DEFAULT_STRIDE))?;
        let traj = simulate_plan(&net, &CircuitState::excited(&net, site)?, &plan)?;
        let env = envelope_named(&traj, &net, &opts.envelope)?;
        Some(resample(&env, times))
    } else {
        None
    };
    Ok(Realization { quantum, circuit })
}

fn mean_rows(rows: impl Iterator<Item = Vec<Vec<f64>>>, count: usize) -> Vec<Vec<f64>> {
    let mut acc: Vec<Vec<f64>> = Vec::new();
    for r in rows {
        if acc.is_empty() {
            acc = r;
        } else {
            for (a, b) in acc.iter_mut().zip(&r) {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            }
        }
    }
    for row in &mut acc {
        for x in row.iter_mut() {
            *x /= count as f64;
        }
    }
    acc
}

/// Averages all realizations of the disordered chain. Realizations run in
/// parallel; the mean is accumulated in realization order, so the result
/// does not depend on scheduling.
pub fn run_anderson_ensemble(params: &AndersonParams, opts: &EnsembleOptions) -> Result<EnsembleResult> {
    params.disorder().validate()?;
    check_window(params.t_end)?;
    params.check_initial_site()?;
    if opts.samples < 2 {
        return Err(Error::invalid("samples", "need at least two samples"));
    }
    let times: Vec<f64> = (0..opts.samples)
        .map(|k| params.t_end * k as f64 / (opts.samples - 1) as f64)
        .collect();
    let runs: Vec<Realization> = (0..params.n_realizations)
        .into_par_iter()
        .map(|k| run_realization(params, k, &times, opts))
        .collect::<Result<_>>()?;

    let n = runs.len();
    let site = params.centre();
    let mean_final = |rows: &dyn Fn(&Realization) -> Option<&Vec<Vec<f64>>>| -> Result<Option<(f64, f64)>> {
        let mut pr = 0.0;
        let mut ret = 0.0;
        for r in &runs {
            let Some(rows) = rows(r) else { return Ok(None) };
            let last = rows.last().expect("non-empty grid");
            pr += participation_ratio(last)?;
            ret += last[site];
        }
        Ok(Some((pr / n as f64, ret / n as f64)))
    };
    let (mean_pr, ret) = mean_final(&|r| Some(&r.quantum))?.expect("quantum rows always present");
    let circuit_stats = mean_final(&|r| r.circuit.as_ref())?;

    let quantum_mean = mean_rows(runs.iter().map(|r| r.quantum.clone()), n);
    let circuit_mean = opts
        .include_circuit
        .then(|| mean_rows(runs.iter().filter_map(|r| r.circuit.clone()), n));
    let positions = site_positions(params.n_sites);
    let variance_curve = quantum_mean
        .iter()
        .map(|row| spread_variance(row, &positions))
        .collect::<Result<_>>()?;

    Ok(EnsembleResult {
        delta: params.delta,
        n_realizations: n,
        initial_site: site,
        times,
        quantum_mean,
        circuit_mean,
        mean_participation_ratio: mean_pr,
        return_probability: ret,
        variance_curve,
        circuit_return_probability: circuit_stats.map(|s| s.1),
        circuit_mean_participation_ratio: circuit_stats.map(|s| s.0),
    })
}
