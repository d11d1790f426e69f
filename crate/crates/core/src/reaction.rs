//! Ignition-type reaction rates: zero below the ignition threshold and above
//! the burned state, positive in between.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ReactionError {
    #[error("tabulated rate is nonzero outside (theta0, 1): f({theta}) = {value}")]
    TabulatedNonMonotoneSupport { theta: f64, value: f64 },
    #[error("invalid ignition threshold {0}, need 0 < theta0 < 1")]
    BadThreshold(f64),
    #[error("amplitude must be positive, got {0}")]
    BadAmplitude(f64),
    #[error("tabulated rate needs at least 2 samples")]
    TableTooShort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReactionKind {
    /// `f = A (theta - theta0)(1 - theta)` on the reactive interval; the
    /// default conforming choice (Lipschitz, `f'(1) < 0`).
    QuadraticIgnition,
    /// `f = A (1 - theta)` on the reactive interval; discontinuous at the
    /// threshold, kept only because it has a closed-form wave speed.
    LinearIgnition,
    /// Piecewise-linear interpolation of `(theta, f)` samples.
    Tabulated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IgnitionNonlinearity {
    pub kind: ReactionKind,
    pub theta0: f64,
    pub amplitude: f64,
    /// Sorted `(theta, f)` pairs; only used by `Tabulated`.
    pub table: Vec<(f64, f64)>,
}

/// Outcome of sampling-based validation of a reaction rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReactionValidation {
    /// Max finite-difference slope over a 10^4-point sample of [0, 1].
    pub lipschitz: f64,
    /// One-sided derivative estimate at the burned state.
    pub derivative_at_one: f64,
    /// `f > 0` everywhere strictly inside the reactive interval.
    pub positive_inside: bool,
    /// Largest jump detected between adjacent samples (discontinuity probe).
    pub max_jump: f64,
    /// True when the rate satisfies all structural requirements
    /// (Lipschitz continuity included); false for `LinearIgnition`.
    pub conforming: bool,
}

impl IgnitionNonlinearity {
    pub fn quadratic(theta0: f64, amplitude: f64) -> Result<Self, ReactionError> {
        Self::check_params(theta0, amplitude)?;
        Ok(IgnitionNonlinearity {
            kind: ReactionKind::QuadraticIgnition,
            theta0,
            amplitude,
            table: Vec::new(),
        })
    }

    pub fn linear(theta0: f64, amplitude: f64) -> Result<Self, ReactionError> {
        Self::check_params(theta0, amplitude)?;
        Ok(IgnitionNonlinearity {
            kind: ReactionKind::LinearIgnition,
            theta0,
            amplitude,
            table: Vec::new(),
        })
    }

    pub fn tabulated(theta0: f64, table: Vec<(f64, f64)>) -> Result<Self, ReactionError> {
        Self::check_params(theta0, 1.0)?;
        if table.len() < 2 {
            return Err(ReactionError::TableTooShort);
        }
        let f = IgnitionNonlinearity {
            kind: ReactionKind::Tabulated,
            theta0,
            amplitude: 1.0,
            table,
        };
        // Support check: samples outside (theta0, 1) must carry zero rate.
        for &(theta, value) in &f.table {
            if (theta <= f.theta0 || theta >= 1.0) && value != 0.0 {
                return Err(ReactionError::TabulatedNonMonotoneSupport { theta, value });
            }
        }
        Ok(f)
    }

    fn check_params(theta0: f64, amplitude: f64) -> Result<(), ReactionError> {
        if !(theta0 > 0.0 && theta0 < 1.0) {
            return Err(ReactionError::BadThreshold(theta0));
        }
        if !(amplitude > 0.0) {
            return Err(ReactionError::BadAmplitude(amplitude));
        }
        Ok(())
    }

    /// The reaction rate; zero for `theta <= theta0` and `theta >= 1`,
    /// including values pushed slightly outside [0, 1] by discretization.
    #[inline]
    pub fn evaluate(&self, theta: f64) -> f64 {
        if theta <= self.theta0 || theta >= 1.0 {
            return 0.0;
        }
        match self.kind {
            ReactionKind::QuadraticIgnition => {
                self.amplitude * (theta - self.theta0) * (1.0 - theta)
            }
            ReactionKind::LinearIgnition => self.amplitude * (1.0 - theta),
            ReactionKind::Tabulated => {
                let t = &self.table;
                if theta <= t[0].0 {
                    return 0.0;
                }
                if theta >= t[t.len() - 1].0 {
                    return 0.0;
                }
                let pos = t.partition_point(|&(x, _)| x <= theta);
                let (x0, f0) = t[pos - 1];
                let (x1, f1) = t[pos];
                let w = (theta - x0) / (x1 - x0);
                (f0 + w * (f1 - f0)).max(0.0)
            }
        }
    }

    /// Sampling-based structural validation: Lipschitz estimate, sign of the
    /// one-sided derivative at 1, positivity inside the reactive interval,
    /// and an overall conformance flag.
    pub fn validate(&self) -> Result<ReactionValidation, ReactionError> {
        const N: usize = 10_000;
        let h = 1.0 / N as f64;
        let mut lipschitz = 0.0_f64;
        let mut max_jump = 0.0_f64;
        let mut positive_inside = true;
        let mut prev = self.evaluate(0.0);
        for i in 1..=N {
            let theta = i as f64 * h;
            let v = self.evaluate(theta);
            let slope = (v - prev).abs() / h;
            lipschitz = lipschitz.max(slope);
            max_jump = max_jump.max((v - prev).abs());
            // Strict interior samples only; the endpoints themselves are 0.
            if theta > self.theta0 + 2.0 * h && theta < 1.0 - 2.0 * h && v <= 0.0 {
                positive_inside = false;
            }
            prev = v;
        }
        if !positive_inside && self.kind == ReactionKind::Tabulated {
            return Err(ReactionError::TabulatedNonMonotoneSupport {
                theta: f64::NAN,
                value: 0.0,
            });
        }
        let eps = 1e-7;
        let derivative_at_one = (self.evaluate(1.0 - eps) - 0.0) / (-eps);
        // A genuine jump: adjacent samples differing by much more than any
        // Lipschitz bound times h would allow.
        let discontinuous = max_jump > 0.05;
        let conforming = positive_inside && !discontinuous && derivative_at_one < 0.0;
        Ok(ReactionValidation {
            lipschitz,
            derivative_at_one,
            positive_inside,
            max_jump,
            conforming,
        })
    }

    /// True when the rate vanishes identically on the reactive interval.
    pub fn is_trivial(&self) -> bool {
        const N: usize = 2_000;
        (0..=N).all(|i| {
            let theta = self.theta0 + (1.0 - self.theta0) * i as f64 / N as f64;
            self.evaluate(theta) == 0.0
        })
    }
}
