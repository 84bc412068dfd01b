//! Inverted dropout: zero activations during training, rescale survivors by
//! 1/(1−rate) so evaluation needs no compensation and is the exact identity.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Training mode draws a fresh mask from the given stream; eval is identity.
pub enum DropoutMode<'a> {
    Train(&'a mut ChaCha8Rng),
    Eval,
}

/// Applies dropout and returns `(output, mask)` where `output = input ⊙ mask`.
/// The mask entries are 0 (dropped) or 1/(1−rate) (kept); in eval mode the
/// mask is all ones. Panics unless 0 ≤ rate < 1.
pub fn dropout_forward(input: &[f64], rate: f64, mode: DropoutMode) -> (Vec<f64>, Vec<f64>) {
    assert!(
        (0.0..1.0).contains(&rate),
        "dropout rate must lie in [0, 1), got {rate}"
    );
    let mask: Vec<f64> = match mode {
        DropoutMode::Eval => vec![1.0; input.len()],
        DropoutMode::Train(rng) => {
            let keep_scale = 1.0 / (1.0 - rate);
            input
                .iter()
                .map(|_| {
                    if rng.random::<f64>() < rate {
                        0.0
                    } else {
                        keep_scale
                    }
                })
                .collect()
        }
    };
    let output = input.iter().zip(&mask).map(|(x, m)| x * m).collect();
    (output, mask)
}
