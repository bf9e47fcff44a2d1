//! Conversion between circuit components and tight-binding parameters, and
//! synthesis of the DAC control voltages that set components on the
//! reconfigurable platform.
//!
//! Site energy and coupling follow from matching the lossless circuit
//! equations to the weak-coupling second-order quantum equations:
//!
//! ```text
//! ε_n² = (1/C_n)(1/L_n + Σ_m 1/L_nm)
//! J_nm = −1 / (L_nm √(C_n C_m) (ε_n + ε_m))
//! Γ_n  = 1 / (R_n C_n)
//! ```
//!
//! For equal `ε` and `C` on both ends the coupling reduces to the familiar
//! one-sided `−1/(2 ε_n L_nm C_n)`; the symmetric form keeps `J` Hermitian
//! when an edge node has fewer neighbours than the bulk.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::circuit::CircuitNetwork;
use crate::error::{Error, Result};
use crate::tight_binding::TightBindingHamiltonian;

/// Speed of light in cm/s, for wavenumber conversion.
pub const SPEED_OF_LIGHT_CM_PER_S: f64 = 2.997_924_58e10;

/// Frequency rescaling between the B800 ring and the platform.
pub const B800_RESCALING: f64 = 5.2615e12;

/// Largest relative disagreement between the couplings computed from either
/// end of a branch before the mapping is rejected.
pub const DEFAULT_ASYMMETRY_TOLERANCE: f64 = 0.05;

/// `J_nm` seen from node `n` alone, `−1/(2 ε_n L_nm C_n)`.
pub fn one_sided_coupling(eps_n: f64, l_nm: f64, c_n: f64) -> f64 {
    -1.0 / (2.0 * eps_n * l_nm * c_n)
}

/// Symmetric coupling for a branch between nodes with `(ε_a, C_a)` and
/// `(ε_b, C_b)`.
pub fn symmetric_coupling(eps_a: f64, c_a: f64, eps_b: f64, c_b: f64, l_ab: f64) -> f64 {
    -1.0 / (l_ab * (c_a * c_b).sqrt() * (eps_a + eps_b))
}

pub fn circuit_to_quantum(net: &CircuitNetwork) -> Result<TightBindingHamiltonian> {
    circuit_to_quantum_with_tolerance(net, DEFAULT_ASYMMETRY_TOLERANCE)
}

pub fn circuit_to_quantum_with_tolerance(
    net: &CircuitNetwork,
    tolerance: f64,
) -> Result<TightBindingHamiltonian> {
    let eps = net.natural_frequencies();
    let c = net.capacitances();
    let gamma: Vec<f64> = net
        .resistances()
        .iter()
        .zip(c)
        .map(|(r, c)| r.map_or(0.0, |r| 1.0 / (r * c)))
        .collect();
    let n = net.n_nodes();
    let mut j = DMatrix::zeros(n, n);
    for &(a, b, l) in net.branches() {
        let from_a = one_sided_coupling(eps[a], l, c[a]);
        let from_b = one_sided_coupling(eps[b], l, c[b]);
        let mismatch = (from_a - from_b).abs() / from_a.abs().max(from_b.abs());
        if mismatch > tolerance {
            return Err(Error::AsymmetryBeyondTolerance {
                a,
                b,
                from_a,
                from_b,
                tolerance,
            });
        }
        let value = symmetric_coupling(eps[a], c[a], eps[b], c[b], l);
        j[(a, b)] = value;
        j[(b, a)] = value;
    }
    TightBindingHamiltonian::new(eps, gamma, j)
}

/// Inverts the mapping with the capacitances pinned by the caller.
pub fn quantum_to_circuit(
    h: &TightBindingHamiltonian,
    capacitances: &[f64],
) -> Result<CircuitNetwork> {
    let n = h.n_sites();
    if capacitances.len() != n {
        return Err(Error::DimensionMismatch {
            what: "capacitances",
            expected: n,
            found: capacitances.len(),
        });
    }
    if let Some(bad) = capacitances.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
        return Err(Error::invalid("capacitances", format!("must be positive, got {bad}")));
    }
    let eps = h.site_energies();
    let mut branches = Vec::new();
    let mut admittance = vec![0.0; n];
    for a in 0..n {
        for b in (a + 1)..n {
            let value = h.coupling(a, b);
            if value == 0.0 {
                continue;
            }
            if value > 0.0 {
                return Err(Error::PositiveJUnsupported { a, b, value });
            }
            let l = 1.0 / (value.abs() * (capacitances[a] * capacitances[b]).sqrt() * (eps[a] + eps[b]));
            admittance[a] += 1.0 / l;
            admittance[b] += 1.0 / l;
            branches.push((a, b, l));
        }
    }
    let mut inductances = Vec::with_capacity(n);
    for k in 0..n {
        let inverse = eps[k] * eps[k] * capacitances[k] - admittance[k];
        if !(inverse > 0.0) {
            return Err(Error::InfeasibleInductance {
                node: k,
                inverse_inductance: inverse,
            });
        }
        inductances.push(1.0 / inverse);
    }
    let resistances = h
        .loss_rates()
        .iter()
        .zip(capacitances)
        .map(|(&g, &c)| (g > 0.0).then(|| 1.0 / (g * c)))
        .collect();
    CircuitNetwork::new(resistances, inductances, capacitances.to_vec(), branches)
}

/// Divides every energy, coupling and loss rate by `eta`. Times scale the
/// other way: `t_platform = eta · t_physical`.
pub fn rescale(h: &TightBindingHamiltonian, eta: f64) -> Result<TightBindingHamiltonian> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::invalid("eta", format!("must be positive, got {eta}")));
    }
    TightBindingHamiltonian::new(
        h.site_energies().iter().map(|e| e / eta).collect(),
        h.loss_rates().iter().map(|g| g / eta).collect(),
        h.couplings() / eta,
    )
}

/// Physical time corresponding to a platform time under rescaling `eta`.
pub fn physical_time(platform_time: f64, eta: f64) -> f64 {
    platform_time / eta
}

/// `ω = 2π c ν̃` for a wavenumber in cm⁻¹.
pub fn wavenumber_to_angular(wavenumber: f64) -> f64 {
    TAU * SPEED_OF_LIGHT_CM_PER_S * wavenumber
}

/// Feedback components and DAC settings of the platform's analog core.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoreConfig {
    pub r_f1: f64,
    pub r_f2: f64,
    pub r_f3: f64,
    pub c_f1: f64,
    /// Output scaling of the analog multipliers.
    pub phi: f64,
    pub dac_full_scale: f64,
    pub dac_bits: u32,
}

impl Default for CoreConfig {
    fn default() -> Self {
        Self {
            r_f1: 10e3,
            r_f2: 5e3,
            r_f3: 1e3,
            c_f1: 0.1e-6,
            phi: 0.1,
            dac_full_scale: 5.0,
            dac_bits: 12,
        }
    }
}

impl CoreConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r_f1", self.r_f1),
            ("r_f2", self.r_f2),
            ("r_f3", self.r_f3),
            ("c_f1", self.c_f1),
            ("phi", self.phi),
            ("dac_full_scale", self.dac_full_scale),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if self.dac_bits == 0 || self.dac_bits > 24 {
            return Err(Error::invalid("dac_bits", format!("unsupported width {}", self.dac_bits)));
        }
        Ok(())
    }

    /// `1/R = resistive_gain · V_R`.
    pub fn resistive_gain(&self) -> f64 {
        self.r_f1 * self.phi / self.r_f2
    }

    /// `1/L = reactive_gain · V_L`, and likewise for `1/C` and `1/L_nm`.
    pub fn reactive_gain(&self) -> f64 {
        self.r_f1 * self.phi / (self.r_f2 * self.r_f3 * self.c_f1)
    }

    pub fn dac_step(&self) -> f64 {
        self.dac_full_scale / f64::from(1u32 << self.dac_bits)
    }

    pub fn max_code(&self) -> u32 {
        (1u32 << self.dac_bits) - 1
    }

    /// Nearest DAC code (clamped to the code range) and the resulting
    /// voltage error `code·step − voltage`.
    pub fn quantize(&self, voltage: f64) -> (u32, f64) {
        let step = self.dac_step();
        let code = (voltage / step).round().clamp(0.0, f64::from(self.max_code())) as u32;
        (code, f64::from(code) * step - voltage)
    }
}

/// Highest site frequency (Hz) reachable with both the `1/L` and `1/C`
/// controls at full scale.
pub fn max_site_frequency(cfg: &CoreConfig) -> f64 {
    let inverse_max = cfg.reactive_gain() * cfg.dac_full_scale;
    (inverse_max * inverse_max).sqrt() / TAU
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlKind {
    Resistance,
    Inductance,
    Capacitance,
    Coupling,
    InitialVoltage,
}

/// One DAC channel: the component it sets, the ideal control voltage and the
/// quantized code.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlEntry {
    pub parameter: String,
    pub kind: ControlKind,
    pub node: usize,
    pub other: Option<usize>,
    /// Component value in SI units (Ω, H, F, or V for the initial condition);
    /// `None` for an absent loss resistor.
    pub target: Option<f64>,
    pub voltage: f64,
    pub code: u32,
    pub quantization_error: f64,
}

impl ControlEntry {
    /// Component value actually realized by the quantized code. `None` when
    /// the code is zero for a reciprocal quantity (open resistor or inductor).
    pub fn realized_value(&self, cfg: &CoreConfig) -> Option<f64> {
        let v = f64::from(self.code) * cfg.dac_step();
        match self.kind {
            ControlKind::InitialVoltage => Some(v * cfg.r_f1 / cfg.r_f2),
            ControlKind::Resistance => (self.code > 0).then(|| 1.0 / (cfg.resistive_gain() * v)),
            _ => (self.code > 0).then(|| 1.0 / (cfg.reactive_gain() * v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesisResult {
    pub entries: Vec<ControlEntry>,
    pub dac_step: f64,
}

impl SynthesisResult {
    pub fn get(&self, parameter: &str) -> Option<&ControlEntry> {
        self.entries.iter().find(|e| e.parameter == parameter)
    }

    pub fn of_kind(&self, kind: ControlKind) -> impl Iterator<Item = &ControlEntry> {
        self.entries.iter().filter(move |e| e.kind == kind)
    }
}

/// Control voltages and DAC codes realizing `net` with the given initial
/// capacitor voltages. Every ideal voltage must lie inside the DAC range.
pub fn synthesize_controls(
    net: &CircuitNetwork,
    initial_voltages: &[f64],
    cfg: &CoreConfig,
) -> Result<SynthesisResult> {
    cfg.validate()?;
    let n = net.n_nodes();
    if initial_voltages.len() != n {
        return Err(Error::DimensionMismatch {
            what: "initial voltages",
            expected: n,
            found: initial_voltages.len(),
        });
    }
    let reactive = cfg.reactive_gain();
    let mut entries = Vec::with_capacity(4 * n + net.n_branches());
    let mut push = |parameter: String,
                    kind: ControlKind,
                    node: usize,
                    other: Option<usize>,
                    target: Option<f64>,
                    voltage: f64|
     -> Result<()> {
        if !(voltage >= 0.0 && voltage <= cfg.dac_full_scale) {
            return Err(Error::ControlOutOfRange {
                parameter,
                voltage,
                full_scale: cfg.dac_full_scale,
            });
        }
        let (code, quantization_error) = cfg.quantize(voltage);
        entries.push(ControlEntry {
            parameter,
            kind,
            node,
            other,
            target,
            voltage,
            code,
            quantization_error,
        });
        Ok(())
    };

    for k in 0..n {
        let label = k + 1;
        let r = net.resistances()[k];
        let v_r = r.map_or(0.0, |r| 1.0 / (cfg.resistive_gain() * r));
        push(format!("R_{label}"), ControlKind::Resistance, k, None, r, v_r)?;
        let l = net.inductances()[k];
        push(format!("L_{label}"), ControlKind::Inductance, k, None, Some(l), 1.0 / (reactive * l))?;
        let c = net.capacitances()[k];
        push(format!("C_{label}"), ControlKind::Capacitance, k, None, Some(c), 1.0 / (reactive * c))?;
        let v0 = initial_voltages[k];
        push(
            format!("V0_{label}"),
            ControlKind::InitialVoltage,
            k,
            None,
            Some(v0),
            v0 * cfg.r_f2 / cfg.r_f1,
        )?;
    }
    for &(a, b, l) in net.branches() {
        push(
            format!("L_{}_{}", a + 1, b + 1),
            ControlKind::Coupling,
            a,
            Some(b),
            Some(l),
            1.0 / (reactive * l),
        )?;
    }
    Ok(SynthesisResult {
        entries,
        dac_step: cfg.dac_step(),
    })
}
