use num_complex::Complex64;

use super::{QuantumState, QuantumTrajectory, TightBindingHamiltonian};
use crate::error::{Error, Result};
use crate::ode::{self, Sampling, StepPlan};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn check_state(h: &TightBindingHamiltonian, c0: &QuantumState) -> Result<()> {
    if c0.amplitudes.len() != h.n_sites() {
        return Err(Error::DimensionMismatch {
            what: "initial state",
            expected: h.n_sites(),
            found: c0.amplitudes.len(),
        });
    }
    Ok(())
}

fn check_finite(time: f64, amps: &[Complex64]) -> Result<()> {
    if amps.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteResult { time })
    }
}

/// Exact propagation `c(t_k) = exp(−iH(t_k − t_0)) c(t_0)` by dense matrix
/// exponential at every requested time.
pub fn propagate_expm(
    h: &TightBindingHamiltonian,
    c0: &QuantumState,
    times: &[f64],
) -> Result<QuantumTrajectory> {
    check_state(h, c0)?;
    let Some(&t0) = times.first() else {
        return Err(Error::invalid("times", "need at least one sample"));
    };
    if (t0 - c0.time).abs() > 1e-12 * t0.abs().max(1.0) {
        return Err(Error::invalid(
            "times",
            format!("first sample {t0} differs from the initial state's time {}", c0.time),
        ));
    }
    let generator = h.effective_matrix() * (-I);
    let psi0 = c0.as_vector();
    let mut amplitudes = Vec::with_capacity(times.len());
    for &t in times {
        let u = (&generator * Complex64::new(t - t0, 0.0)).exp();
        let psi = &u * &psi0;
        let amps: Vec<Complex64> = psi.iter().copied().collect();
        check_finite(t, &amps)?;
        amplitudes.push(amps);
    }
    QuantumTrajectory::new(times.to_vec(), amplitudes)
}

/// Sparse view of `H` used by the stepping propagators.
struct SparseGenerator {
    diag: Vec<Complex64>,
    bonds: Vec<(usize, usize, f64)>,
}

impl SparseGenerator {
    /// `H − shift·1`.
    fn new(h: &TightBindingHamiltonian, shift: f64) -> Self {
        let n = h.n_sites();
        let diag = (0..n)
            .map(|k| Complex64::new(h.site_energies()[k] - shift, -0.5 * h.loss_rates()[k]))
            .collect();
        let mut bonds = Vec::new();
        for r in 0..n {
            for c in 0..n {
                let j = h.couplings()[(r, c)];
                if r != c && j != 0.0 {
                    bonds.push((r, c, j));
                }
            }
        }
        Self { diag, bonds }
    }

    /// `out = H c`.
    fn apply(&self, c: &[Complex64], out: &mut [Complex64]) {
        for (o, (d, x)) in out.iter_mut().zip(self.diag.iter().zip(c)) {
            *o = d * x;
        }
        for &(r, col, j) in &self.bonds {
            out[r] += c[col] * j;
        }
    }
}

pub(crate) fn rk4_first_order(
    h: &TightBindingHamiltonian,
    c0: &QuantumState,
    plan: &StepPlan,
) -> Result<QuantumTrajectory> {
    check_state(h, c0)?;
    ode::check_step(plan.dt, h.max_site_energy())?;
    // Integrate d = e^{iωt} c, which only carries the slow coupling and
    // detuning dynamics; the common carrier phase is restored exactly.
    let omega = h.site_energies().iter().sum::<f64>() / h.n_sites() as f64;
    let gen = SparseGenerator::new(h, omega);
    let mut times = Vec::with_capacity(plan.n_samples());
    let mut amplitudes = Vec::with_capacity(plan.n_samples());
    ode::rk4(
        &c0.amplitudes,
        c0.time,
        plan,
        |_, c, dc| {
            gen.apply(c, dc);
            for x in dc.iter_mut() {
                *x *= -I;
            }
        },
        |t, d| {
            let carrier = Complex64::from_polar(1.0, -omega * (t - c0.time));
            let c: Vec<Complex64> = d.iter().map(|x| x * carrier).collect();
            check_finite(t, &c)?;
            times.push(t);
            amplitudes.push(c);
            Ok(())
        },
    )?;
    QuantumTrajectory::new(times, amplitudes)
}

/// Fixed-step RK4 integration of `i dc/dt = H c`; an oracle for
/// [`propagate_expm`] that shares no code with it. The equation is
/// integrated in the frame rotating at the mean site energy.
pub fn propagate_ode(
    h: &TightBindingHamiltonian,
    c0: &QuantumState,
    t_end: f64,
    dt: f64,
    sampling: Sampling,
) -> Result<QuantumTrajectory> {
    ode::check_step(dt, h.max_site_energy())?;
    let plan = StepPlan::new(t_end, dt, sampling)?;
    rk4_first_order(h, c0, &plan)
}

pub(crate) fn rk4_second_order(
    h: &TightBindingHamiltonian,
    c0: &QuantumState,
    plan: &StepPlan,
) -> Result<QuantumTrajectory> {
    check_state(h, c0)?;
    if let Some((site, &rate)) = h.loss_rates().iter().enumerate().find(|(_, &g)| g != 0.0) {
        return Err(Error::LossNotSupported { site, rate });
    }
    ode::check_step(plan.dt, h.max_site_energy())?;
    let n = h.n_sites();
    let eps = h.site_energies().to_vec();
    let gen = SparseGenerator::new(h, 0.0);

    // y = [c, dc/dt]; dc/dt(0) = −i ε c(0) so the carrier starts co-rotating.
    let mut y0 = c0.amplitudes.clone();
    y0.extend(c0.amplitudes.iter().zip(&eps).map(|(c, e)| -I * c * *e));

    let mut times = Vec::with_capacity(plan.n_samples());
    let mut amplitudes = Vec::with_capacity(plan.n_samples());
    let mut coupled = vec![Complex64::new(0.0, 0.0); n];
    ode::rk4(
        &y0,
        c0.time,
        plan,
        |_, y, dy| {
            let (c, v) = y.split_at(n);
            coupled.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
            for &(r, col, j) in &gen.bonds {
                coupled[r] += c[col] * j;
            }
            let (dc, dv) = dy.split_at_mut(n);
            dc.copy_from_slice(v);
            for k in 0..n {
                dv[k] = c[k] * (-eps[k] * eps[k]) - coupled[k] * (2.0 * eps[k]);
            }
        },
        |t, y| {
            check_finite(t, y)?;
            times.push(t);
            amplitudes.push(y[..n].to_vec());
            Ok(())
        },
    )?;
    QuantumTrajectory::new(times, amplitudes)
}

/// Integrates the weak-coupling second-order form
/// `d²c_n/dt² = −ε_n² c_n − ε_n Σ_m 2J_nm c_m`, which is the equation the
/// circuit obeys. Lossless Hamiltonians only.
pub fn propagate_second_order(
    h: &TightBindingHamiltonian,
    c0: &QuantumState,
    t_end: f64,
    dt: f64,
    sampling: Sampling,
) -> Result<QuantumTrajectory> {
    let plan = StepPlan::new(t_end, dt, sampling)?;
    rk4_second_order(h, c0, &plan)
}
