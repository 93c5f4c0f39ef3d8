//! Gumbel-Softmax sampling with a straight-through backward path.
//!
//! Perturbing logits with Gumbel noise and taking the argmax draws exactly
//! from softmax(logits); dividing by a temperature and softmaxing instead
//! gives a differentiable relaxation. Hard mode emits the one-hot argmax on
//! the forward pass and routes gradients through the relaxation unchanged.

use super::NetError;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    Soft,
    Hard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GumbelSample {
    pub soft: Vec<f64>,
    pub hard: Vec<f64>,
    pub mode: SampleMode,
    temperature: f64,
}

impl GumbelSample {
    /// The vector this sample exposes downstream: one-hot in hard mode,
    /// the relaxed probabilities in soft mode.
    pub fn value(&self) -> &[f64] {
        match self.mode {
            SampleMode::Hard => &self.hard,
            SampleMode::Soft => &self.soft,
        }
    }

    pub fn argmax(&self) -> usize {
        self.hard.iter().position(|&v| v == 1.0).expect("hard sample is one-hot")
    }
}

/// Draw `n` independent standard Gumbel variates.
pub fn sample_gumbel_noise<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            -(-u.ln()).ln()
        })
        .collect()
}

/// Softmax of (logits + noise) / temperature, plus the hard one-hot at its
/// argmax. Pass all-zero noise for a deterministic query.
pub fn gumbel_softmax(
    logits: &[f64],
    temperature: f64,
    noise: &[f64],
    mode: SampleMode,
) -> Result<GumbelSample, NetError> {
    if temperature <= 0.0 || !temperature.is_finite() {
        return Err(NetError::BadTemperature(temperature));
    }
    assert_eq!(noise.len(), logits.len(), "noise length must match logits");
    let scaled: Vec<f64> =
        logits.iter().zip(noise.iter()).map(|(l, g)| (l + g) / temperature).collect();
    let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let soft: Vec<f64> = exps.iter().map(|&e| e / sum).collect();

    let arg = soft
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("softmax outputs are finite"))
        .map(|(i, _)| i)
        .expect("non-empty logits");
    let mut hard = vec![0.0; soft.len()];
    hard[arg] = 1.0;

    Ok(GumbelSample { soft, hard, mode, temperature })
}

/// Pull a cotangent on the sample's value back to the logits.
///
/// Hard mode is straight-through: the cotangent is applied to the soft
/// relaxation as-is. Both modes then use the exact softmax Jacobian,
/// including the 1/temperature factor.
pub fn gumbel_backward(sample: &GumbelSample, d_value: &[f64]) -> Vec<f64> {
    assert_eq!(d_value.len(), sample.soft.len(), "cotangent length must match sample");
    let s = &sample.soft;
    let inner: f64 = d_value.iter().zip(s.iter()).map(|(d, si)| d * si).sum();
    s.iter()
        .zip(d_value.iter())
        .map(|(&si, &di)| si * (di - inner) / sample.temperature)
        .collect()
}
