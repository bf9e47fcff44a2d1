//! Envelope extraction from circuit signals, transport metrics, and
//! quantum ↔ circuit agreement reports.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::circuit::{derivative, CircuitNetwork, CircuitTrajectory};
use crate::error::{Error, Result};
use crate::registry::Registry;
use crate::tight_binding::QuantumTrajectory;

/// Fewest samples per carrier period accepted by [`envelope`].
pub const MIN_SAMPLES_PER_PERIOD: usize = 20;

/// Anything that provides a per-site value at a sequence of times:
/// populations, normalized envelopes, squared voltages.
pub trait SiteSeries {
    fn times(&self) -> &[f64];
    /// `values()[k][n]` is site `n` at `times()[k]`.
    fn values(&self) -> &[Vec<f64>];

    fn n_sites(&self) -> usize {
        self.values().first().map_or(0, Vec::len)
    }
}

impl SiteSeries for QuantumTrajectory {
    fn times(&self) -> &[f64] {
        QuantumTrajectory::times(self)
    }

    fn values(&self) -> &[Vec<f64>] {
        self.populations()
    }
}

/// Normalized slowly-varying envelope of the squared node signals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeSeries {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    method: String,
}

impl EnvelopeSeries {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>, method: impl Into<String>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                what: "envelope samples",
                expected: times.len(),
                found: values.len(),
            });
        }
        Ok(Self {
            times,
            values,
            method: method.into(),
        })
    }

    pub fn method(&self) -> &str {
        &self.method
    }

    pub fn site(&self, site: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[site]).collect()
    }
}

impl SiteSeries for EnvelopeSeries {
    fn times(&self) -> &[f64] {
        &self.times
    }

    fn values(&self) -> &[Vec<f64>] {
        &self.values
    }
}

/// A way of recovering the squared carrier amplitude `|a_n(t)|²` of every
/// node from a sampled circuit transient.
pub trait EnvelopeMethod: Send + Sync {
    fn name(&self) -> &'static str;

    /// Unnormalized squared amplitudes, `[sample][node]`.
    fn squared_amplitudes(
        &self,
        traj: &CircuitTrajectory,
        net: &CircuitNetwork,
    ) -> Result<Vec<Vec<f64>>>;
}

/// `|V + i·H[V]|²` with `H` the discrete Hilbert transform.
///
/// Each node signal is cut at its first and last local extremum and
/// evenly reflected there before the FFT, so the implied periodic signal
/// has no jump in value or slope. Samples outside the cut (less than half a
/// carrier period at either edge) take the nearest computed value.
#[derive(Debug, Clone, Copy, Default)]
pub struct AnalyticSignal;

/// `|V + i·(dV/dt)/ε_n|²`, with the exact circuit derivative.
#[derive(Debug, Clone, Copy, Default)]
pub struct Quadrature;

fn local_extremum(x: &[f64], indices: impl Iterator<Item = usize>) -> Option<usize> {
    let n = x.len();
    indices
        .filter(|&k| {
            let a = x[k].abs();
            a > 0.0
                && (k == 0 || a >= x[k - 1].abs())
                && (k + 1 == n || a >= x[k + 1].abs())
        })
        .next()
}

fn hilbert_envelope(x: &[f64], planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = x.len();
    let (Some(first), Some(last)) = (
        local_extremum(x, 0..n),
        local_extremum(x, (0..n).rev()),
    ) else {
        return vec![0.0; n];
    };
    if last <= first + 1 {
        return vec![x[first] * x[first]; n];
    }
    let mut buf: Vec<Complex64> = x[first..=last]
        .iter()
        .chain(x[first + 1..last].iter().rev())
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    let m = buf.len();
    planner.plan_fft_forward(m).process(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        let weight = if k == 0 || (m % 2 == 0 && k == m / 2) {
            1.0
        } else if k < m.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *b *= weight / m as f64;
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let inner: Vec<f64> = buf[..=last - first].iter().map(|z| z.norm_sqr()).collect();
    (0..n)
        .map(|k| inner[k.clamp(first, last) - first])
        .collect()
}

impl EnvelopeMethod for AnalyticSignal {
    fn name(&self) -> &'static str {
        "analytic-signal"
    }

    fn squared_amplitudes(
        &self,
        traj: &CircuitTrajectory,
        net: &CircuitNetwork,
    ) -> Result<Vec<Vec<f64>>> {
        let mut planner = FftPlanner::new();
        let per_node: Vec<Vec<f64>> = (0..net.n_nodes())
            .map(|node| hilbert_envelope(&traj.voltage_series(node), &mut planner))
            .collect();
        Ok((0..traj.len())
            .map(|k| per_node.iter().map(|s| s[k]).collect())
            .collect())
    }
}

impl EnvelopeMethod for Quadrature {
    fn name(&self) -> &'static str {
        "quadrature"
    }

    fn squared_amplitudes(
        &self,
        traj: &CircuitTrajectory,
        net: &CircuitNetwork,
    ) -> Result<Vec<Vec<f64>>> {
        let eps = net.natural_frequencies();
        traj.states()
            .iter()
            .map(|s| {
                let d = derivative(net, s)?;
                Ok(s.voltages
                    .iter()
                    .zip(&d.dv_dt)
                    .zip(&eps)
                    .map(|((v, dv), e)| v * v + (dv / e).powi(2))
                    .collect())
            })
            .collect()
    }
}

pub fn envelope_registry() -> Registry<dyn EnvelopeMethod> {
    let mut reg: Registry<dyn EnvelopeMethod> = Registry::new("envelope method");
    reg.register(
        "analytic-signal",
        "FFT Hilbert transform of each node voltage",
        |_| Ok(Box::new(AnalyticSignal)),
    );
    reg.register(
        "quadrature",
        "voltage and its derivative scaled by the node frequency",
        |_| Ok(Box::new(Quadrature)),
    );
    reg
}

/// Longest carrier period in the network, `2π / min ε_n`.
pub fn carrier_period(net: &CircuitNetwork) -> f64 {
    let slowest = net
        .natural_frequencies()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    TAU / slowest
}

fn check_sampling(traj: &CircuitTrajectory, net: &CircuitNetwork) -> Result<()> {
    let t = traj.times();
    if t.len() < 3 {
        return Err(Error::TooFewSamples {
            required: 3,
            found: t.len(),
        });
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    if t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(Error::invalid("trajectory", "envelope extraction needs uniform sampling"));
    }
    let samples_per_period = TAU / net.max_natural_frequency() / dt;
    if samples_per_period < MIN_SAMPLES_PER_PERIOD as f64 {
        return Err(Error::UndersampledSignal {
            samples_per_period,
            required: MIN_SAMPLES_PER_PERIOD,
        });
    }
    Ok(())
}

/// Envelope of every node, weighted by capacitance (stored-energy fraction)
/// and normalized so that the sites sum to one at the first sample.
pub fn envelope(
    traj: &CircuitTrajectory,
    net: &CircuitNetwork,
    method: &dyn EnvelopeMethod,
) -> Result<EnvelopeSeries> {
    if traj.n_nodes() != net.n_nodes() {
        return Err(Error::DimensionMismatch {
            what: "trajectory nodes",
            expected: net.n_nodes(),
            found: traj.n_nodes(),
        });
    }
    check_sampling(traj, net)?;
    let mut values = method.squared_amplitudes(traj, net)?;
    let c = net.capacitances();
    let total: f64 = values[0].iter().zip(c).map(|(a, c)| a * c).sum();
    if !(total > 0.0) {
        return Err(Error::AllZero);
    }
    for row in &mut values {
        for (a, c) in row.iter_mut().zip(c) {
            *a *= c / total;
        }
    }
    EnvelopeSeries::new(traj.times().to_vec(), values, method.name())
}

/// [`envelope`] with the method looked up by name.
pub fn envelope_named(
    traj: &CircuitTrajectory,
    net: &CircuitNetwork,
    method: &str,
) -> Result<EnvelopeSeries> {
    let m = envelope_registry().create(method, ())?;
    envelope(traj, net, m.as_ref())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub per_site_mae: Vec<f64>,
    /// Mean absolute error over all sites and samples.
    pub global_mae: f64,
    /// Root-mean-square error over all sites and samples.
    pub normalized_l2: f64,
    pub worst_site: usize,
    pub n_samples: usize,
}

fn interpolate(times: &[f64], values: &[Vec<f64>], t: f64, site: usize) -> f64 {
    let k = times.partition_point(|&x| x <= t);
    if k == 0 {
        return values[0][site];
    }
    if k == times.len() {
        return values[k - 1][site];
    }
    let (t0, t1) = (times[k - 1], times[k]);
    let w = (t - t0) / (t1 - t0);
    values[k - 1][site] * (1.0 - w) + values[k][site] * w
}

/// Compares two per-site series over their common time range.
pub fn compare_populations(a: &dyn SiteSeries, b: &dyn SiteSeries) -> Result<AgreementReport> {
    compare_populations_trimmed(a, b, 0.0)
}

/// Like [`compare_populations`], but drops `edge_trim` seconds at both
/// ends of the common range. The coarser of the two grids is kept and the
/// other series is linearly interpolated onto it.
pub fn compare_populations_trimmed(
    a: &dyn SiteSeries,
    b: &dyn SiteSeries,
    edge_trim: f64,
) -> Result<AgreementReport> {
    let n = a.n_sites();
    if b.n_sites() != n {
        return Err(Error::DimensionMismatch {
            what: "sites",
            expected: n,
            found: b.n_sites(),
        });
    }
    let (ta, tb) = (a.times(), b.times());
    if ta.is_empty() || tb.is_empty() {
        return Err(Error::TooFewSamples { required: 1, found: 0 });
    }
    let (a_start, a_end) = (ta[0], ta[ta.len() - 1]);
    let (b_start, b_end) = (tb[0], tb[tb.len() - 1]);
    let start = a_start.max(b_start);
    let end = a_end.min(b_end);
    if start > end {
        return Err(Error::DisjointTimeRanges {
            a_start,
            a_end,
            b_start,
            b_end,
        });
    }
    let spacing = |t: &[f64]| (t[t.len() - 1] - t[0]) / (t.len().max(2) - 1) as f64;
    let (grid, grid_vals, other, other_vals, grid_is_a) = if spacing(ta) >= spacing(tb) {
        (ta, a.values(), tb, b.values(), true)
    } else {
        (tb, b.values(), ta, a.values(), false)
    };
    let (lo, hi) = (start + edge_trim, end - edge_trim);
    let slack = 1e-9 * (end - start).abs().max(1e-300);
    let mut sum_abs = vec![0.0; n];
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for (k, &t) in grid.iter().enumerate() {
        if t < lo - slack || t > hi + slack {
            continue;
        }
        for site in 0..n {
            let g = grid_vals[k][site];
            let o = interpolate(other, other_vals, t, site);
            let d = if grid_is_a { g - o } else { o - g };
            sum_abs[site] += d.abs();
            sum_sq += d * d;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::TooFewSamples { required: 1, found: 0 });
    }
    let per_site_mae: Vec<f64> = sum_abs.iter().map(|s| s / count as f64).collect();
    let worst_site = per_site_mae
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0;
    Ok(AgreementReport {
        global_mae: per_site_mae.iter().sum::<f64>() / n as f64,
        normalized_l2: (sum_sq / (count * n) as f64).sqrt(),
        per_site_mae,
        worst_site,
        n_samples: count,
    })
}

/// Least-squares slope of `ln E` against time, negated.
pub fn fit_decay_rate(times: &[f64], energy: &[f64]) -> Result<f64> {
    if times.len() != energy.len() {
        return Err(Error::DimensionMismatch {
            what: "energy samples",
            expected: times.len(),
            found: energy.len(),
        });
    }
    if times.len() < 10 {
        return Err(Error::TooFewSamples {
            required: 10,
            found: times.len(),
        });
    }
    if let Some((index, &value)) = energy.iter().enumerate().find(|(_, e)| !(**e > 0.0)) {
        return Err(Error::NonpositiveEnergy { index, value });
    }
    let n = times.len() as f64;
    let t_mean = times.iter().sum::<f64>() / n;
    let logs: Vec<f64> = energy.iter().map(|e| e.ln()).collect();
    let y_mean = logs.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, y) in times.iter().zip(&logs) {
        sxy += (t - t_mean) * (y - y_mean);
        sxx += (t - t_mean).powi(2);
    }
    Ok(-sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransferEfficiency {
    /// Value at the sample nearest `t_f`.
    pub at_t_f: f64,
    /// Largest value within ±5% of `t_f`.
    pub peak: f64,
    pub peak_time: f64,
}

pub fn transfer_efficiency(
    series: &dyn SiteSeries,
    target_site: usize,
    t_f: f64,
) -> Result<TransferEfficiency> {
    let times = series.times();
    let (Some(&start), Some(&end)) = (times.first(), times.last()) else {
        return Err(Error::TooFewSamples { required: 1, found: 0 });
    };
    if t_f < start || t_f > end {
        return Err(Error::TimeOutOfRange { time: t_f, start, end });
    }
    if target_site >= series.n_sites() {
        return Err(Error::invalid(
            "target_site",
            format!("index {target_site} out of range for {} sites", series.n_sites()),
        ));
    }
    let values = series.values();
    let nearest = times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t_f).abs().total_cmp(&(b.1 - t_f).abs()))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let half_width = 0.05 * t_f.abs();
    let (peak_k, peak) = times
        .iter()
        .enumerate()
        .filter(|(_, t)| (**t - t_f).abs() <= half_width)
        .map(|(k, _)| (k, values[k][target_site]))
        .fold((nearest, values[nearest][target_site]), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        });
    Ok(TransferEfficiency {
        at_t_f: values[nearest][target_site],
        peak,
        peak_time: times[peak_k],
    })
}

/// `(Σp)² / Σp²`, the effective number of occupied sites.
pub fn participation_ratio(populations: &[f64]) -> Result<f64> {
    if let Some(bad) = populations.iter().find(|p| !(**p >= 0.0)) {
        return Err(Error::invalid("populations", format!("must be non-negative, got {bad}")));
    }
    let sum: f64 = populations.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::AllZero);
    }
    let sq: f64 = populations.iter().map(|p| p * p).sum();
    Ok(sum * sum / sq)
}

/// Variance of the site position under the (renormalized) population
/// distribution.
pub fn spread_variance(populations: &[f64], positions: &[f64]) -> Result<f64> {
    if positions.len() != populations.len() {
        return Err(Error::DimensionMismatch {
            what: "site positions",
            expected: populations.len(),
            found: positions.len(),
        });
    }
    let total: f64 = populations.iter().sum();
    if !(total > 0.0) {
        return Err(Error::AllZero);
    }
    let mean = populations.iter().zip(positions).map(|(p, x)| p * x).sum::<f64>() / total;
    Ok(populations
        .iter()
        .zip(positions)
        .map(|(p, x)| p * (x - mean).powi(2))
        .sum::<f64>()
        / total)
}

/// Site indices `0, 1, …, n−1` as positions.
pub fn site_positions(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64).collect()
}

/// Average of a per-site series over time at one site (trapezoidal rule).
pub fn time_average(series: &dyn SiteSeries, site: usize) -> f64 {
    let t = series.times();
    let v = series.values();
    if t.len() < 2 {
        return v.first().map_or(0.0, |row| row[site]);
    }
    let area: f64 = t
        .windows(2)
        .zip(v.windows(2))
        .map(|(tw, vw)| 0.5 * (tw[1] - tw[0]) * (vw[0][site] + vw[1][site]))
        .sum();
    area / (t[t.len() - 1] - t[0])
}
