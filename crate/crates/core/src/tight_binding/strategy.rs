use super::propagate::{propagate_expm, rk4_first_order, rk4_second_order};
use super::{QuantumState, QuantumTrajectory, TightBindingHamiltonian};
use crate::error::Result;
use crate::ode::StepPlan;
use crate::registry::Registry;

/// A method of advancing a single-excitation state along a step plan.
///
/// Every implementation samples at exactly `plan.sample_times(c0.time)` so
/// trajectories from different methods can be compared point by point.
pub trait Propagator: Send + Sync {
    fn name(&self) -> &'static str;

    fn propagate(
        &self,
        h: &TightBindingHamiltonian,
        c0: &QuantumState,
        plan: &StepPlan,
    ) -> Result<QuantumTrajectory>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExpmPropagator;

impl Propagator for ExpmPropagator {
    fn name(&self) -> &'static str {
        "expm"
    }

    fn propagate(
        &self,
        h: &TightBindingHamiltonian,
        c0: &QuantumState,
        plan: &StepPlan,
    ) -> Result<QuantumTrajectory> {
        propagate_expm(h, c0, &plan.sample_times(c0.time))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Rk4Propagator;

impl Propagator for Rk4Propagator {
    fn name(&self) -> &'static str {
        "rk4"
    }

    fn propagate(
        &self,
        h: &TightBindingHamiltonian,
        c0: &QuantumState,
        plan: &StepPlan,
    ) -> Result<QuantumTrajectory> {
        rk4_first_order(h, c0, plan)
    }
}

/// Weak-coupling second-order form; the loss terms are dropped.
#[derive(Debug, Clone, Copy, Default)]
pub struct SecondOrderPropagator;

impl Propagator for SecondOrderPropagator {
    fn name(&self) -> &'static str {
        "second-order"
    }

    fn propagate(
        &self,
        h: &TightBindingHamiltonian,
        c0: &QuantumState,
        plan: &StepPlan,
    ) -> Result<QuantumTrajectory> {
        rk4_second_order(h, c0, plan)
    }
}

pub fn propagator_registry() -> Registry<dyn Propagator> {
    let mut reg: Registry<dyn Propagator> = Registry::new("propagator");
    reg.register("expm", "dense matrix exponential at every sample", |_| {
        Ok(Box::new(ExpmPropagator))
    });
    reg.register("rk4", "fixed-step RK4 on the first-order equations", |_| {
        Ok(Box::new(Rk4Propagator))
    });
    reg.register(
        "second-order",
        "fixed-step RK4 on the weak-coupling second-order equations (lossless only)",
        |_| Ok(Box::new(SecondOrderPropagator)),
    );
    reg
}
