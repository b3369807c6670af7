//! Compares the analytic backward pass of a conv layer and of the training
//! loss with central finite differences in f64.

use densefuse::conv::{conv2d_backward, conv2d_forward, ConvLayer};
use densefuse::loss::{total_loss, total_loss_backward};
use densefuse::{Shape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-4;

fn random(shape: Shape, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_, _, _, _| rng.random_range(0.0..1.0))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn main() -> densefuse::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let input = random(Shape::new(1, 2, 5, 5), &mut rng);
    let weights: Vec<f64> = (0..3 * 2 * 9).map(|_| rng.random_range(-0.5..0.5)).collect();
    let layer = ConvLayer::new(2, 3, weights, vec![0.1, -0.1, 0.05], true)?;
    let upstream = random(Shape::new(1, 3, 5, 5), &mut rng);
    let scalar = |x: &Tensor<f64>| -> f64 {
        let y = conv2d_forward(x, &layer).unwrap();
        y.data().iter().zip(upstream.data()).map(|(a, b)| a * b).sum()
    };
    let back = conv2d_backward(&input, &layer, &upstream)?;
    let mut worst = 0.0f64;
    for i in 0..input.len() {
        let mut plus = input.clone();
        plus.data_mut()[i] += EPS;
        let mut minus = input.clone();
        minus.data_mut()[i] -= EPS;
        let numeric = (scalar(&plus) - scalar(&minus)) / (2.0 * EPS);
        worst = worst.max(rel(back.grad_input.data()[i], numeric));
    }
    println!("conv2d input gradient: max relative error {worst:.2e}");

    let target = random(Shape::new(1, 1, 12, 12), &mut rng);
    let output = random(Shape::new(1, 1, 12, 12), &mut rng);
    for lambda in [1.0, 100.0] {
        let grad = total_loss_backward(&output, &target, lambda)?;
        let mut worst = 0.0f64;
        for i in 0..output.len() {
            let mut plus = output.clone();
            plus.data_mut()[i] += EPS;
            let mut minus = output.clone();
            minus.data_mut()[i] -= EPS;
            let numeric =
                (total_loss(&plus, &target, lambda)?.total - total_loss(&minus, &target, lambda)?.total) / (2.0 * EPS);
            worst = worst.max(rel(grad.data()[i], numeric));
        }
        println!("loss gradient, lambda {lambda}: max relative error {worst:.2e}");
    }
    Ok(())
}
