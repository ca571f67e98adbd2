use torus_vrep::fourier::TorusFunction;
use torus_vrep::inversion::{lieb_maximize, InversionOptions, InitialGuess};
use torus_vrep::manybody::ModelSpec;
use torus_vrep::spaces::DensityField;
use std::f64::consts::PI;

fn main() {
    let cutoff = 8;
    let m = TorusFunction::canonical_grid(cutoff);
    let samples: Vec<f64> = (0..m)
        .map(|i| 2.0 + (4.0 * PI * i as f64 / m as f64).cos())
        .collect();
    let rho = DensityField::from_samples(&samples, cutoff, 2).unwrap();
    let spec = ModelSpec::spinless(2, 8);
    let opts = InversionOptions {
        init: InitialGuess::Zero,
        max_iter: 800,
        ..Default::default()
    };
    let r = lieb_maximize(&rho, &spec, &opts).unwrap();
    println!("converged={} iters={} mismatch={:.3e} gap={:.3e} degeneracy={}",
             r.converged, r.iterations, r.mismatch, r.gap, r.degeneracy);
    println!("weights={:?}", r.weights);
    for w in &r.warnings { println!("warn: {w}"); }
    for row in r.trace.iter().rev().take(8) {
        println!("iter {:3}  G={:+.10e}  mismatch={:.3e}  step={:.2e}", row.iter, row.g_value, row.mismatch, row.step);
    }
}
