//! A single ellipsoid neuron: rotation, anisotropic falloff, and the loss
//! gradient checked against a finite difference.

use molsparse::erbf::{loss, loss_gradient, rotation_matrix, ErbfNeuron, ErbfParams, LossWeights, Sample};
use nalgebra::Vector3;

fn main() -> molsparse::Result<()> {
    let neuron = ErbfNeuron {
        w_tilde: 1.2,
        d_tilde: Vector3::new(1.0, 0.6, 0.4),
        center: Vector3::zeros(),
        angles: Vector3::new(0.0, 0.0, std::f64::consts::FRAC_PI_4),
    };
    let r = rotation_matrix(&neuron.angles);
    println!("R =\n{r:.4}det R = {:.15}", r.determinant());
    println!("weight {:.3}, axes {:.3?}", neuron.weight(), neuron.axes().as_slice());

    // The 45° turn puts the wider in-plane axis on a diagonal, so x and y
    // see the same falloff.
    for dir in [Vector3::x(), Vector3::y(), Vector3::new(1.0, 1.0, 0.0).normalize(), Vector3::z()] {
        println!("psi(1.5 * {:.2?}) = {:.4}", dir.as_slice(), neuron.psi(&(dir * 1.5)));
    }

    let params = ErbfParams::new(vec![neuron]);
    let batch: Vec<Sample> = (0..8)
        .map(|i| {
            let t = i as f64;
            Sample {
                point: Vector3::new(t.sin(), (0.7 * t).cos(), 0.1 * t),
                target: 0.5,
            }
        })
        .collect();
    let weights = LossWeights::new(0.1, 1.0)?;
    let grad = loss_gradient(&params, &batch, &weights)?;
    let h = 1e-6;
    let mut flat = params.to_flat();
    flat[0] += h;
    let up = loss(&ErbfParams::from_flat(&flat)?, &batch, &weights)?;
    flat[0] -= 2.0 * h;
    let down = loss(&ErbfParams::from_flat(&flat)?, &batch, &weights)?;
    println!("dL/dw~ analytic {:.8}, central difference {:.8}", grad[0], (up - down) / (2.0 * h));
    Ok(())
}
