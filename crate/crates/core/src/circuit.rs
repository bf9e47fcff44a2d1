//! Inductively coupled RLC oscillator networks.
//!
//! Each node is a parallel RLC tank (capacitor voltage `V_n`, inductor
//! current `I_n`, optional loss resistor); nodes are joined by coupling
//! inductors carrying branch currents `I_nm`, oriented from the lower to the
//! higher node index. The first-order system
//!
//! ```text
//! C_n dV_n/dt = −V_n/R_n − I_n − Σ_{m>n} I_nm + Σ_{m<n} I_mn
//! L_n dI_n/dt = V_n
//! L_nm dI_nm/dt = V_n − V_m        (n < m)
//! ```
//!
//! differentiates to the usual second-order Kirchhoff equations for the node
//! voltages.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ode::{self, Sampling, StepPlan};

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitNetwork {
    resistances: Vec<Option<f64>>,
    inductances: Vec<f64>,
    capacitances: Vec<f64>,
    /// Sorted by `(a, b)` with `a < b`; the order fixes branch-current indices.
    branches: Vec<(usize, usize, f64)>,
}

fn check_component(what: &str, node: impl std::fmt::Display, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            what,
            format!("{node} must be strictly positive and finite, got {value}"),
        ))
    }
}

impl CircuitNetwork {
    /// `resistances[n] = None` means node `n` is lossless. Coupling entries
    /// may be given in either orientation; a pair listed twice must carry the
    /// same value.
    pub fn new(
        resistances: Vec<Option<f64>>,
        inductances: Vec<f64>,
        capacitances: Vec<f64>,
        couplings: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let n = capacitances.len();
        if n == 0 {
            return Err(Error::invalid("capacitances", "need at least one node"));
        }
        for (what, len) in [("resistances", resistances.len()), ("inductances", inductances.len())] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    found: len,
                });
            }
        }
        for k in 0..n {
            check_component("capacitance", format!("node {}", k + 1), capacitances[k])?;
            check_component("inductance", format!("node {}", k + 1), inductances[k])?;
            if let Some(r) = resistances[k] {
                check_component("resistance", format!("node {}", k + 1), r)?;
            }
        }
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (a, b, l) in couplings {
            if a >= n || b >= n {
                return Err(Error::invalid(
                    "coupling",
                    format!("({}, {}) references a node outside 1..={n}", a + 1, b + 1),
                ));
            }
            if a == b {
                return Err(Error::invalid(
                    "coupling",
                    format!("self-coupling on node {}", a + 1),
                ));
            }
            check_component("coupling inductance", format!("({}, {})", a + 1, b + 1), l)?;
            let key = (a.min(b), a.max(b));
            if let Some(&prev) = map.get(&key) {
                if prev != l {
                    return Err(Error::invalid(
                        "coupling",
                        format!(
                            "({}, {}) given twice with different values {prev} and {l}",
                            key.0 + 1,
                            key.1 + 1
                        ),
                    ));
                }
            }
            map.insert(key, l);
        }
        Ok(Self {
            resistances,
            inductances,
            capacitances,
            branches: map.into_iter().map(|((a, b), l)| (a, b, l)).collect(),
        })
    }

    /// Open chain of identical tanks; `bonds[k]` couples nodes k and k+1.
    pub fn uniform_chain(
        n: usize,
        resistance: Option<f64>,
        inductance: f64,
        capacitance: f64,
        bonds: &[f64],
    ) -> Result<Self> {
        if bonds.len() + 1 != n {
            return Err(Error::DimensionMismatch {
                what: "chain bonds",
                expected: n.saturating_sub(1),
                found: bonds.len(),
            });
        }
        Self::new(
            vec![resistance; n],
            vec![inductance; n],
            vec![capacitance; n],
            bonds.iter().enumerate().map(|(k, &l)| (k, k + 1, l)),
        )
    }

    pub fn n_nodes(&self) -> usize {
        self.capacitances.len()
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn resistances(&self) -> &[Option<f64>] {
        &self.resistances
    }

    pub fn inductances(&self) -> &[f64] {
        &self.inductances
    }

    pub fn capacitances(&self) -> &[f64] {
        &self.capacitances
    }

    /// `(a, b, L_ab)` with `a < b`, in branch-current order.
    pub fn branches(&self) -> &[(usize, usize, f64)] {
        &self.branches
    }

    pub fn coupling(&self, a: usize, b: usize) -> Option<f64> {
        let key = (a.min(b), a.max(b));
        self.branches
            .iter()
            .find(|&&(x, y, _)| (x, y) == key)
            .map(|&(_, _, l)| l)
    }

    pub fn is_lossless(&self) -> bool {
        self.resistances.iter().all(Option::is_none)
    }

    /// Same network with every loss resistor removed.
    pub fn lossless(&self) -> Self {
        Self {
            resistances: vec![None; self.n_nodes()],
            ..self.clone()
        }
    }

    pub fn with_resistances(&self, resistances: Vec<Option<f64>>) -> Result<Self> {
        Self::new(
            resistances,
            self.inductances.clone(),
            self.capacitances.clone(),
            self.branches.iter().copied(),
        )
    }

    pub fn with_inductances(&self, inductances: Vec<f64>) -> Result<Self> {
        Self::new(
            self.resistances.clone(),
            inductances,
            self.capacitances.clone(),
            self.branches.iter().copied(),
        )
    }

    /// `Σ_m 1/L_nm` over the couplings of node `n`.
    pub fn coupling_admittance(&self, node: usize) -> f64 {
        self.branches
            .iter()
            .filter(|&&(a, b, _)| a == node || b == node)
            .map(|&(_, _, l)| 1.0 / l)
            .sum()
    }

    pub fn natural_frequencies(&self) -> Vec<f64> {
        (0..self.n_nodes())
            .map(|k| {
                ((1.0 / self.inductances[k] + self.coupling_admittance(k)) / self.capacitances[k])
                    .sqrt()
            })
            .collect()
    }

    pub fn max_natural_frequency(&self) -> f64 {
        self.natural_frequencies().into_iter().fold(0.0, f64::max)
    }

    fn check_state(&self, s: &CircuitState) -> Result<()> {
        let n = self.n_nodes();
        for (what, expected, found) in [
            ("voltages", n, s.voltages.len()),
            ("node currents", n, s.node_currents.len()),
            ("branch currents", self.n_branches(), s.branch_currents.len()),
        ] {
            if expected != found {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    found,
                });
            }
        }
        Ok(())
    }

    /// Packed right-hand side over `[V, I, I_branch]`.
    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        let n = self.n_nodes();
        let (v, rest) = y.split_at(n);
        let (i_node, i_branch) = rest.split_at(n);
        let (dv, drest) = dy.split_at_mut(n);
        let (di_node, di_branch) = drest.split_at_mut(n);

        for k in 0..n {
            let mut current = -i_node[k];
            if let Some(r) = self.resistances[k] {
                current -= v[k] / r;
            }
            dv[k] = current;
            di_node[k] = v[k] / self.inductances[k];
        }
        for (idx, &(a, b, l)) in self.branches.iter().enumerate() {
            dv[a] -= i_branch[idx];
            dv[b] += i_branch[idx];
            di_branch[idx] = (v[a] - v[b]) / l;
        }
        for k in 0..n {
            dv[k] /= self.capacitances[k];
        }
    }
}

/// Free-function form of [`CircuitNetwork::natural_frequencies`]:
/// `ε_n = √[(1/C_n)(1/L_n + Σ_m 1/L_nm)]`.
pub fn natural_frequencies(net: &CircuitNetwork) -> Vec<f64> {
    net.natural_frequencies()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitState {
    pub voltages: Vec<f64>,
    pub node_currents: Vec<f64>,
    pub branch_currents: Vec<f64>,
    pub time: f64,
}

impl CircuitState {
    pub fn zeros(net: &CircuitNetwork) -> Self {
        Self {
            voltages: vec![0.0; net.n_nodes()],
            node_currents: vec![0.0; net.n_nodes()],
            branch_currents: vec![0.0; net.n_branches()],
            time: 0.0,
        }
    }

    /// 1 V on `node`, everything else at rest.
    pub fn excited(net: &CircuitNetwork, node: usize) -> Result<Self> {
        if node >= net.n_nodes() {
            return Err(Error::invalid(
                "initial_site",
                format!("node index {node} out of range for {} nodes", net.n_nodes()),
            ));
        }
        let mut s = Self::zeros(net);
        s.voltages[node] = 1.0;
        Ok(s)
    }

    fn pack(&self) -> Vec<f64> {
        let mut y = self.voltages.clone();
        y.extend_from_slice(&self.node_currents);
        y.extend_from_slice(&self.branch_currents);
        y
    }

    fn unpack(y: &[f64], n: usize, time: f64) -> Self {
        Self {
            voltages: y[..n].to_vec(),
            node_currents: y[n..2 * n].to_vec(),
            branch_currents: y[2 * n..].to_vec(),
            time,
        }
    }
}

/// Time derivative of every state variable.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitDerivative {
    pub dv_dt: Vec<f64>,
    pub di_dt: Vec<f64>,
    pub dib_dt: Vec<f64>,
}

pub fn derivative(net: &CircuitNetwork, s: &CircuitState) -> Result<CircuitDerivative> {
    net.check_state(s)?;
    let n = net.n_nodes();
    let y = s.pack();
    let mut dy = vec![0.0; y.len()];
    net.rhs(&y, &mut dy);
    Ok(CircuitDerivative {
        dv_dt: dy[..n].to_vec(),
        di_dt: dy[n..2 * n].to_vec(),
        dib_dt: dy[2 * n..].to_vec(),
    })
}

/// `½ Σ (C_n V_n² + L_n I_n²) + ½ Σ_branches L_nm I_nm²`.
pub fn circuit_energy(net: &CircuitNetwork, s: &CircuitState) -> Result<f64> {
    net.check_state(s)?;
    let nodes: f64 = (0..net.n_nodes())
        .map(|k| {
            net.capacitances[k] * s.voltages[k].powi(2)
                + net.inductances[k] * s.node_currents[k].powi(2)
        })
        .sum();
    let branches: f64 = net
        .branches
        .iter()
        .zip(&s.branch_currents)
        .map(|(&(_, _, l), i)| l * i * i)
        .sum();
    Ok(0.5 * (nodes + branches))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitTrajectory {
    times: Vec<f64>,
    states: Vec<CircuitState>,
    squared_voltages: Vec<Vec<f64>>,
}

impl CircuitTrajectory {
    fn new(states: Vec<CircuitState>) -> Self {
        let times = states.iter().map(|s| s.time).collect();
        let squared_voltages = states
            .iter()
            .map(|s| s.voltages.iter().map(|v| v * v).collect())
            .collect();
        Self {
            times,
            states,
            squared_voltages,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.states.first().map_or(0, |s| s.voltages.len())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[CircuitState] {
        &self.states
    }

    /// `squared_voltages()[k][n] = V_n(t_k)²`.
    pub fn squared_voltages(&self) -> &[Vec<f64>] {
        &self.squared_voltages
    }

    pub fn voltage_series(&self, node: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.voltages[node]).collect()
    }

    /// Stored energy at every sample.
    pub fn energies(&self, net: &CircuitNetwork) -> Result<Vec<f64>> {
        self.states.iter().map(|s| circuit_energy(net, s)).collect()
    }
}

/// Fixed-step RK4 transient from `init` over `[init.time, init.time + t_end]`.
pub fn simulate(
    net: &CircuitNetwork,
    init: &CircuitState,
    t_end: f64,
    dt: f64,
    sampling: Sampling,
) -> Result<CircuitTrajectory> {
    ode::check_step(dt, net.max_natural_frequency())?;
    let plan = StepPlan::new(t_end, dt, sampling)?;
    simulate_plan(net, init, &plan)
}

/// [`simulate`] along an already resolved step plan.
pub fn simulate_plan(
    net: &CircuitNetwork,
    init: &CircuitState,
    plan: &StepPlan,
) -> Result<CircuitTrajectory> {
    net.check_state(init)?;
    ode::check_step(plan.dt, net.max_natural_frequency())?;
    let n = net.n_nodes();
    let mut states = Vec::with_capacity(plan.n_samples());
    ode::rk4(
        &init.pack(),
        init.time,
        plan,
        |_, y, dy| net.rhs(y, dy),
        |t, y| {
            if y.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteResult { time: t });
            }
            states.push(CircuitState::unpack(y, n, t));
            Ok(())
        },
    )?;
    Ok(CircuitTrajectory::new(states))
}
