//! Catalog of the four bundled multilevel systems, plus the symmetry
//! diagnostics of the three-level system.
//!
//! Each system is described by its field-free energies (diagonal of `H₀`, in
//! rad/fs with the ground level at zero), a real symmetric dipole operator in
//! dimensionless system units, the allowed resonant transition frequencies
//! available to a shaped field, the initial/target levels, and the standard
//! run parameters (final time, envelope width, fluence weight).

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ControlField, ShapedField};
use crate::quantum::{DensityMatrix, HermitianOperator, Projector};

/// Structure and standard run parameters of one multilevel system.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SystemSpec {
    /// Catalog id, e.g. `"model1"`.
    pub name: String,
    /// Level labels for I/O; index order matches the matrix basis.
    pub labels: Vec<String>,
    /// Field-free energies ε_v in rad/fs, ground level first.
    pub energies: Vec<f64>,
    /// Dipole operator, row-major `dim × dim`, real symmetric.
    pub dipole: Vec<f64>,
    /// Allowed resonant transition frequencies {ω_l} for a shaped field.
    pub transition_frequencies: Vec<f64>,
    /// Index of the initially populated level.
    pub initial: usize,
    /// Index of the target level.
    pub target: usize,
    /// Final time T_f in fs.
    pub t_final: f64,
    /// Gaussian envelope width σ in fs, when a shaped field applies.
    pub sigma: Option<f64>,
    /// Fluence weight α in the field cost.
    pub alpha: f64,
    /// Free-form catalog metadata (e.g. the physical dipole unit scale).
    pub notes: String,
}

impl SystemSpec {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `H₀` as a diagonal Hermitian operator.
    pub fn h0(&self) -> HermitianOperator {
        HermitianOperator::from_diagonal(&self.energies)
    }

    /// The dipole operator `μ`.
    pub fn dipole_operator(&self) -> HermitianOperator {
        HermitianOperator::from_real_symmetric(self.dim(), &self.dipole)
            .expect("catalog dipole matrices are symmetric")
    }

    pub fn dipole_element(&self, i: usize, j: usize) -> f64 {
        self.dipole[i * self.dim() + j]
    }

    /// The initially prepared pure state.
    pub fn initial_state(&self) -> DensityMatrix {
        DensityMatrix::pure_state(self.dim(), self.initial)
    }

    /// Projector on the target level.
    pub fn target_projector(&self) -> Projector {
        Projector::basis_state(self.dim(), self.target)
    }

    /// Projector on an arbitrary level.
    pub fn level_projector(&self, k: usize) -> Projector {
        Projector::basis_state(self.dim(), k)
    }

    /// Level index for a label such as `"1'"`.
    pub fn level_by_label(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Check that every listed transition frequency matches the energy gap of
    /// a dipole-coupled pair (and vice versa) to within `tol`.
    pub fn transitions_consistent(&self, tol: f64) -> bool {
        let n = self.dim();
        let mut gaps = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.dipole_element(i, j) != 0.0 {
                    gaps.push((self.energies[j] - self.energies[i]).abs());
                }
            }
        }
        gaps.iter()
            .all(|g| {
                self.transition_frequencies
                    .iter()
                    .any(|w| (w - g).abs() <= tol)
            })
            && self
                .transition_frequencies
                .iter()
                .all(|w| gaps.iter().any(|g| (w - g).abs() <= tol))
    }
}

fn symmetric_from_couplings(n: usize, couplings: &[(usize, usize, f64)]) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for &(i, j, v) in couplings {
        m[i * n + j] = v;
        m[j * n + i] = v;
    }
    m
}

/// Five-level ladder with nearest-neighbor couplings; transfer from the
/// ground level to the top of the ladder.
pub fn model1() -> SystemSpec {
    let freqs = [1.511, 1.181, 0.761, 0.553];
    let mut energies = vec![0.0];
    for w in freqs {
        energies.push(energies.last().unwrap() + w);
    }
    SystemSpec {
        name: "model1".into(),
        labels: (0..5).map(|k| k.to_string()).collect(),
        energies,
        dipole: symmetric_from_couplings(
            5,
            &[
                (0, 1, 0.5855),
                (1, 2, 0.7079),
                (2, 3, 0.8352),
                (3, 4, 0.9281),
            ],
        ),
        transition_frequencies: freqs.to_vec(),
        initial: 0,
        target: 4,
        t_final: 200.0,
        sigma: Some(30.0),
        alpha: 0.05,
        notes: "dipole entries in units of 1.0e-30 C m, treated as dimensionless couplings".into(),
    }
}

/// Same ladder as [`model1`]; used with a fixed non-optimal field while the
/// observation sequence is optimized.
pub fn model2() -> SystemSpec {
    let mut spec = model1();
    spec.name = "model2".into();
    spec
}

/// The fixed non-optimal field used with [`model2`]: all four amplitudes at
/// 0.07 and phases at zero. Its fluence is 4·0.07² = 0.0196 and, acting
/// alone, it transfers 12.93% of the population.
pub fn model2_fixed_field() -> ControlField {
    let spec = model2();
    ControlField::Shaped(ShapedField::from_params(
        &spec.transition_frequencies,
        &[0.07; 4],
        &[0.0; 4],
        spec.sigma.unwrap(),
        spec.t_final,
    ))
}

/// High-symmetry three-level system: `H₀ = diag(1,2,3)` with equal couplings
/// 0↔1 and 1↔2. Driven by the resonant rectangular pulse; at most half the
/// population can reach the middle level under purely coherent dynamics.
pub fn model3() -> SystemSpec {
    SystemSpec {
        name: "model3".into(),
        labels: (0..3).map(|k| k.to_string()).collect(),
        energies: vec![1.0, 2.0, 3.0],
        dipole: symmetric_from_couplings(3, &[(0, 1, 1.0), (1, 2, 1.0)]),
        transition_frequencies: vec![1.0],
        initial: 0,
        target: 1,
        t_final: 200.0,
        sigma: None,
        alpha: 0.01,
        notes: "rectangular pulse carrier fixed at 1 rad/fs, resonant with both transitions"
            .into(),
    }
}

/// Five-level branched system with two degenerate transitions; population
/// must reach the top level without leaking into the undesired side level
/// `1'`.
pub fn model4() -> SystemSpec {
    SystemSpec {
        name: "model4".into(),
        labels: ["0", "1", "1'", "2", "3"].iter().map(|s| s.to_string()).collect(),
        // ε fixed by ε₀ = 0 with ω₀₁ = 3.3, ω₁₂ = 2.6, ω₁₁' = ω₂₃ = 0.8
        energies: vec![0.0, 3.3, 4.1, 5.9, 6.7],
        dipole: symmetric_from_couplings(
            5,
            &[(0, 1, 0.13), (1, 3, 0.15), (3, 4, 0.23), (1, 2, 0.21)],
        ),
        transition_frequencies: vec![3.3, 2.6, 0.8],
        initial: 0,
        target: 4,
        t_final: 200.0,
        sigma: Some(30.0),
        alpha: 0.01,
        notes: "the two transitions at 0.8 rad/fs share one field component".into(),
    }
}

/// All catalog ids.
pub fn catalog() -> Vec<&'static str> {
    vec!["model1", "model2", "model3", "model4"]
}

/// Look up a bundled system by id.
pub fn by_name(name: &str) -> Result<SystemSpec> {
    match name {
        "model1" => Ok(model1()),
        "model2" => Ok(model2()),
        "model3" => Ok(model3()),
        "model4" => Ok(model4()),
        other => Err(Error::UnknownModel(other.to_string())),
    }
}

/// The conserved quantity `|C₀C₂ − C₁²/2|` of the three-level system's
/// coherent dynamics. Zero along any trajectory that starts in the ground
/// state; broken by measurement.
pub fn symmetry_invariant(c: &[C64]) -> f64 {
    assert_eq!(c.len(), 3, "the invariant is defined on a three-level state");
    (c[0] * c[2] - 0.5 * c[1] * c[1]).norm()
}

/// Check the density-matrix form of the symmetry constraint for a model-3
/// state reached by purely coherent evolution from the ground state:
/// `ρ₀₀ρ₂₂ = ρ₁₁²/4` and `ρ₁₁ ≤ 1/2`. Returns `false` when violated
/// (e.g. after a measurement has broken the symmetry).
pub fn coherent_bound_check(rho: &DensityMatrix) -> bool {
    let p0 = rho.population(0);
    let p1 = rho.population(1);
    let p2 = rho.population(2);
    (p0 * p2 - 0.25 * p1 * p1).abs() <= 1e-6 && p1 <= 0.5 + 1e-6
}
