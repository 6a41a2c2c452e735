//! Compare backpropagated gradients of the joint three-quantile objective
//! with central finite differences.
//!
//! cargo run --example gradient_check

use cpcp::losses::QuantileLevel;
use cpcp::nn::{HeadNet, JointQuantileObjective};
use cpcp::numeric::{Matrix, RngStream};

fn main() -> cpcp::Result<()> {
    let mut rng = RngStream::new(2, 0);
    let (n, p) = (32, 3);
    let x = Matrix::from_vec(n, p, (0..n * p).map(|_| rng.standard_normal()).collect())?;
    let targets: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
    let objective = JointQuantileObjective {
        targets: &targets,
        low: QuantileLevel::new(0.85)?,
        main: QuantileLevel::new(0.9)?,
        high: QuantileLevel::new(0.95)?,
    };
    let net = HeadNet::init(&[p, 12], &[1, 1, 1], &mut rng)?;
    let rows: Vec<usize> = (0..n).collect();
    let (loss, grads) = net.loss_and_grad(&x, &rows, &objective)?;
    let analytic: Vec<f64> = grads.slices().concat();
    println!("loss {loss:.6}, {} parameters", analytic.len());

    let h = 1e-6;
    let mut worst = 0.0f64;
    for k in (0..analytic.len()).step_by(7) {
        let perturbed = |sign: f64| -> cpcp::Result<f64> {
            let mut net = net.clone();
            let mut offset = k;
            for slice in net.param_slices_mut() {
                if offset < slice.len() {
                    slice[offset] += sign * h;
                    break;
                }
                offset -= slice.len();
            }
            Ok(net.loss_and_grad(&x, &rows, &objective)?.0)
        };
        let fd = (perturbed(1.0)? - perturbed(-1.0)?) / (2.0 * h);
        let rel = (fd - analytic[k]).abs() / fd.abs().max(analytic[k].abs()).max(1e-8);
        worst = worst.max(rel);
    }
    println!("worst relative error over sampled coordinates: {worst:.2e}");
    Ok(())
}
