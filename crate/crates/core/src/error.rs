use thiserror::Error;

/// Every failure the simulation, mapping and analysis layers can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} has length {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("coupling matrix is not symmetric at ({row}, {col}): {forward} vs {backward}")]
    AsymmetricCoupling {
        row: usize,
        col: usize,
        forward: f64,
        backward: f64,
    },
    #[error("site {site} has non-positive energy {value} rad/s")]
    NonpositiveSiteEnergy { site: usize, value: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("step {dt} s exceeds the resolution limit {limit} s")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("second-order propagation requires a lossless Hamiltonian (site {site} has loss {rate} 1/s)")]
    LossNotSupported { site: usize, rate: f64 },
    #[error("propagation produced a non-finite amplitude at t = {time} s")]
    NonFiniteResult { time: f64 },
    #[error(
        "coupling ({a}, {b}) maps asymmetrically: {from_a} vs {from_b} rad/s (tolerance {tolerance})"
    )]
    AsymmetryBeyondTolerance {
        a: usize,
        b: usize,
        from_a: f64,
        from_b: f64,
        tolerance: f64,
    },
    #[error("node {node} needs 1/L = {inverse_inductance} 1/H; couplings too strong for the requested frequency")]
    InfeasibleInductance { node: usize, inverse_inductance: f64 },
    #[error("coupling ({a}, {b}) = {value} rad/s is positive; only negative couplings are realizable")]
    PositiveJUnsupported { a: usize, b: usize, value: f64 },
    #[error("control `{parameter}` needs {voltage} V, outside [0, {full_scale}] V")]
    ControlOutOfRange {
        parameter: String,
        voltage: f64,
        full_scale: f64,
    },
    #[error("signal has {samples_per_period:.1} samples per carrier period, need at least {required}")]
    UndersampledSignal {
        samples_per_period: f64,
        required: usize,
    },
    #[error("time ranges [{a_start}, {a_end}] and [{b_start}, {b_end}] do not overlap")]
    DisjointTimeRanges {
        a_start: f64,
        a_end: f64,
        b_start: f64,
        b_end: f64,
    },
    #[error("energy sample {index} is {value}; decay fitting needs strictly positive energies")]
    NonpositiveEnergy { index: usize, value: f64 },
    #[error("need at least {required} samples, got {found}")]
    TooFewSamples { required: usize, found: usize },
    #[error("time {time} s is outside the trajectory window [{start}, {end}]")]
    TimeOutOfRange { time: f64, start: f64, end: f64 },
    #[error("population vector is empty or sums to zero")]
    AllZero,
    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },
}

impl Error {
    /// True for errors that mean the requested network cannot be realized on
    /// the platform, as opposed to bad input or numerical trouble.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::InfeasibleInductance { .. }
                | Error::PositiveJUnsupported { .. }
                | Error::ControlOutOfRange { .. }
        )
    }

    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
