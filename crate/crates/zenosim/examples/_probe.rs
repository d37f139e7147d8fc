use nalgebra::DVector;
use num_complex::Complex64 as C64;
use zenosim::dynamics::*;
use zenosim::field::*;
use zenosim::models;
use zenosim::quantum::DensityMatrix;

fn main() {
    // free phases at dt=0.01
    let mut system = models::model1();
    system.energies = vec![0.5, 1.5, 2.5, 0.0, 0.0];
    system.dipole = vec![0.0; 25];
    let mut psi = DVector::zeros(5);
    let amp = (1.0f64 / 3.0).sqrt();
    for i in 0..3 { psi[i] = C64::new(amp, 0.0); }
    let config = PropagationConfig::new(0.0, 25.0, 0.01).unwrap();
    let traj = propagate_pure(&psi, &system, &ControlField::Zero, &config).unwrap();
    let end = traj.final_state();
    let mut maxdev = 0.0f64;
    for i in 0..3 {
        let expect = psi[i] * C64::new(0.0, -system.energies[i] * 25.0).exp();
        maxdev = maxdev.max((end[i] - expect).norm());
    }
    println!("free-phase max dev at dt=0.01: {maxdev:.3e}");

    // density vs pure agreement, model 3, A=0.35, t=60
    let system = models::model3();
    let field = ControlField::Rectangular(RectangularField { amplitude: 0.35, t_final: 200.0 });
    let mut psi = DVector::zeros(3);
    psi[0] = C64::new(1.0, 0.0);
    for dt in [0.01, 0.005, 0.002] {
        let config = PropagationConfig::new(0.0, 60.0, dt).unwrap();
        let traj = propagate_pure(&psi, &system, &field, &config).unwrap();
        let rho0 = DensityMatrix::pure_state(3, 0);
        let (rho, _) = propagate(&rho0, &system, &field, &[], &[], &config).unwrap();
        let end = traj.final_state();
        let mut maxdev = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let expect = end[i] * end[j].conj();
                maxdev = maxdev.max((rho.matrix()[(i, j)] - expect).norm());
            }
        }
        println!("pure-vs-density max dev at dt={dt}: {maxdev:.3e}");
    }

    // symmetry invariant drift over 200 fs at various dt, worst-case A=1
    for dt in [0.01, 0.005, 0.002] {
        let mut worst = 0.0f64;
        for amp_i in 0..10 {
            let a = 0.1 + 0.1 * amp_i as f64;
            let field = ControlField::Rectangular(RectangularField { amplitude: a, t_final: 200.0 });
            let config = PropagationConfig::new(0.0, 200.0, dt).unwrap();
            let traj = propagate_pure(&psi, &system, &field, &config).unwrap();
            for s in &traj.states {
                let inv = models::symmetry_invariant(&[s[0], s[1], s[2]]);
                worst = worst.max(inv);
            }
        }
        println!("symmetry-invariant worst drift over A in [0.1,1.0], dt={dt}: {worst:.3e}");
    }
}
