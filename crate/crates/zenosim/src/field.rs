//! Control-field families and the fluence functional.
//!
//! Two field shapes are supported: a Gaussian-windowed multi-cosine built on
//! the system's allowed resonant transition frequencies, with the amplitudes
//! and phases as the controls, and a bare resonant rectangular pulse whose
//! only control is its amplitude. The fluence surrogate is the sum of squared
//! component amplitudes.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// One cosine component `A·cos(ωt + θ)` of a shaped field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldComponent {
    /// Amplitude `A ≥ 0` (system units; phases carry sign).
    pub amplitude: f64,
    /// Carrier frequency in rad/fs.
    pub frequency: f64,
    /// Phase in radians, wrapped to `[0, 2π)`.
    pub phase: f64,
}

/// Gaussian-windowed multi-cosine field,
/// `E(t) = s(t)·Σ_l A_l cos(ω_l t + θ_l)` with
/// `s(t) = exp[−(t − T_f/2)²/2σ²]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapedField {
    pub components: Vec<FieldComponent>,
    /// Envelope width σ in fs.
    pub sigma: f64,
    /// Final time `T_f` in fs; the envelope is centered at `T_f/2`.
    pub t_final: f64,
}

/// Resonant rectangular pulse `E(t) = A·cos t` on `[0, T_f]`, zero outside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectangularField {
    pub amplitude: f64,
    pub t_final: f64,
}

/// A control field of either family, or no field at all.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ControlField {
    Shaped(ShapedField),
    Rectangular(RectangularField),
    Zero,
}

impl ShapedField {
    /// Field with the given `(amplitude, phase)` pairs on the given carrier
    /// frequencies. Amplitudes are clamped at zero from below and phases
    /// wrapped to `[0, 2π)`.
    pub fn from_params(
        frequencies: &[f64],
        amplitudes: &[f64],
        phases: &[f64],
        sigma: f64,
        t_final: f64,
    ) -> Self {
        let components = frequencies
            .iter()
            .zip(amplitudes)
            .zip(phases)
            .map(|((&frequency, &amplitude), &phase)| FieldComponent {
                amplitude: amplitude.max(0.0),
                frequency,
                phase: phase.rem_euclid(TAU),
            })
            .collect();
        Self {
            components,
            sigma,
            t_final,
        }
    }

    /// Envelope value `s(t)`.
    pub fn envelope(&self, t: f64) -> f64 {
        let x = (t - 0.5 * self.t_final) / self.sigma;
        (-0.5 * x * x).exp()
    }
}

impl ControlField {
    pub fn zero() -> Self {
        ControlField::Zero
    }

    /// Field value at time `t` (fs). Total function: defined for all `t`.
    pub fn evaluate(&self, t: f64) -> f64 {
        match self {
            ControlField::Shaped(f) => {
                let carrier: f64 = f
                    .components
                    .iter()
                    .map(|c| c.amplitude * (c.frequency * t + c.phase).cos())
                    .sum();
                f.envelope(t) * carrier
            }
            ControlField::Rectangular(f) => {
                if (0.0..=f.t_final).contains(&t) {
                    f.amplitude * t.cos()
                } else {
                    0.0
                }
            }
            ControlField::Zero => 0.0,
        }
    }

    /// Fluence surrogate `F = Σ_l A_l²` (a single `A²` for the rectangular
    /// pulse). Invariant under phase changes.
    pub fn fluence(&self) -> f64 {
        match self {
            ControlField::Shaped(f) => f.components.iter().map(|c| c.amplitude * c.amplitude).sum(),
            ControlField::Rectangular(f) => f.amplitude * f.amplitude,
            ControlField::Zero => 0.0,
        }
    }

    /// `Σ_l A_l`, an upper bound for `|E(t)|`.
    pub fn amplitude_sum(&self) -> f64 {
        match self {
            ControlField::Shaped(f) => f.components.iter().map(|c| c.amplitude).sum(),
            ControlField::Rectangular(f) => f.amplitude.abs(),
            ControlField::Zero => 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ControlField::Zero => true,
            ControlField::Shaped(f) => f.components.iter().all(|c| c.amplitude == 0.0),
            ControlField::Rectangular(f) => f.amplitude == 0.0,
        }
    }

    /// Sample `(t, E(t))` rows on a uniform grid, e.g. for CSV export.
    pub fn sample(&self, t_start: f64, t_end: f64, n: usize) -> Vec<(f64, f64)> {
        let dt = (t_end - t_start) / (n.max(2) - 1) as f64;
        (0..n.max(2))
            .map(|k| {
                let t = t_start + k as f64 * dt;
                (t, self.evaluate(t))
            })
            .collect()
    }
}
