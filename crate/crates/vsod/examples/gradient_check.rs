//! Verify reverse-mode gradients against central finite differences for the
//! main differentiable building blocks.
//!
//! ```bash
//! cargo run --example gradient_check
//! ```

use vsod::loss::bce_with_logits;
use vsod::nn::{bilinear_resize, conv2d, grad_check, ops, ConvParams, Padding, Tensor};
use vsod::rng::Rng;

fn random(shape: &[usize], rng: &mut Rng) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
}

fn main() -> vsod::Result<()> {
    let mut rng = Rng::new(7);
    let x = random(&[2, 5, 5], &mut rng);

    let kernel = random(&[3, 2, 3, 3], &mut rng);
    let conv = ConvParams::new(kernel, None, 1, 2, Padding::Same)?;
    let target = Tensor::full(&[2, 5, 5], 0.75);

    let checks: Vec<(&str, f64)> = vec![
        ("sum . sigmoid", grad_check(|t| Ok(ops::sum_all(&ops::sigmoid(t))), &x, 1e-5)?),
        ("sum . tanh", grad_check(|t| Ok(ops::sum_all(&ops::tanh(t))), &x, 1e-5)?),
        (
            "sum . conv2d (dilation 2)",
            grad_check(|t| Ok(ops::sum_all(&conv2d(t, &conv)?)), &x, 1e-5)?,
        ),
        (
            "sum . bilinear_resize 5x5 -> 9x7",
            grad_check(|t| Ok(ops::sum_all(&bilinear_resize(t, 9, 7)?)), &x, 1e-5)?,
        ),
        (
            "sum . softmax . flatten",
            grad_check(
                |t| {
                    let flat = ops::flatten_positions(&ops::stack_frames(&[t])?)?;
                    Ok(ops::sum_all(&ops::mul(&ops::softmax(&flat, 1)?, &flat)?))
                },
                &x,
                1e-5,
            )?,
        ),
        ("bce_with_logits", grad_check(|t| bce_with_logits(t, &target), &x, 1e-5)?),
    ];

    println!("max relative error, reverse-mode vs central differences (eps 1e-5):");
    for (name, err) in checks {
        println!("  {name:<34} {err:.3e}");
        assert!(err < 1e-4);
    }
    println!("all gradients verified");
    Ok(())
}
