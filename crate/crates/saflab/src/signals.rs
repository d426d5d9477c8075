//! Signal generation for the errors-in-variables model plus WAV ingest.
//!
//! Streams keep the clean and corrupted versions of both channels so a run
//! can feed the noisy pair to an algorithm while measuring against the
//! clean plant. All generators are deterministic in the seed; the input,
//! input-noise and output-noise sequences come from disjoint RNG substreams
//! so the independence assumptions hold by construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// RNG substream ids; disjoint per generated sequence.
const STREAM_INPUT: u64 = 1;
const STREAM_INPUT_NOISE: u64 = 2;
const STREAM_OUTPUT_NOISE: u64 = 3;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a per-trial seed from a base seed (splitmix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Gaussian background plus Bernoulli-Gaussian impulse contamination.
///
/// Sample model: `g + b * i` with `g ~ N(0, gaussian_variance)`,
/// `b ~ Bernoulli(impulse_probability)` and
/// `i ~ N(0, impulse_variance_ratio * gaussian_variance)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct NoiseSpec {
    pub gaussian_variance: f64,
    #[serde(default)]
    pub impulse_probability: f64,
    #[serde(default)]
    pub impulse_variance_ratio: f64,
}

impl NoiseSpec {
    pub fn gaussian(variance: f64) -> Self {
        NoiseSpec {
            gaussian_variance: variance,
            impulse_probability: 0.0,
            impulse_variance_ratio: 0.0,
        }
    }

    pub fn impulsive(variance: f64, probability: f64, variance_ratio: f64) -> Self {
        NoiseSpec {
            gaussian_variance: variance,
            impulse_probability: probability,
            impulse_variance_ratio: variance_ratio,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gaussian_variance < 0.0 || !self.gaussian_variance.is_finite() {
            return Err(Error::invalid("gaussian_variance must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.impulse_probability) {
            return Err(Error::invalid("impulse_probability must be in [0, 1]"));
        }
        if self.impulse_variance_ratio < 0.0 {
            return Err(Error::invalid("impulse_variance_ratio must be >= 0"));
        }
        Ok(())
    }

    /// Total variance of the contaminated process.
    pub fn total_variance(&self) -> f64 {
        self.gaussian_variance * (1.0 + self.impulse_probability * self.impulse_variance_ratio)
    }
}

/// Input process selection for experiments.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InputKind {
    /// White Gaussian with the given variance.
    White { variance: f64 },
    /// First-order autoregressive process driven by white Gaussian noise of
    /// the given variance: `x(n) = a x(n-1) + g(n)`.
    Ar1 { coefficient: f64, variance: f64 },
}

impl InputKind {
    /// Stationary variance of the generated process.
    pub fn stationary_variance(&self) -> f64 {
        match *self {
            InputKind::White { variance } => variance,
            InputKind::Ar1 {
                coefficient,
                variance,
            } => variance / (1.0 - coefficient * coefficient),
        }
    }
}

/// Zero-mean input sequence, deterministic in the seed.
pub fn gen_input(kind: InputKind, length: usize, seed: u64) -> Result<Vec<f64>> {
    let variance = match kind {
        InputKind::White { variance } => variance,
        InputKind::Ar1 {
            coefficient,
            variance,
        } => {
            if coefficient.abs() >= 1.0 {
                return Err(Error::invalid("AR(1) coefficient must satisfy |a| < 1"));
            }
            variance
        }
    };
    if variance < 0.0 {
        return Err(Error::invalid("variance must be >= 0"));
    }
    let mut rng = rng_for(seed, STREAM_INPUT);
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    let mut out = Vec::with_capacity(length);
    match kind {
        InputKind::White { .. } => {
            out.extend((0..length).map(|_| normal.sample(&mut rng)));
        }
        InputKind::Ar1 { coefficient, .. } => {
            let mut prev = 0.0;
            for _ in 0..length {
                prev = coefficient * prev + normal.sample(&mut rng);
                out.push(prev);
            }
        }
    }
    Ok(out)
}

/// Contaminated-Gaussian noise sequence for the given spec.
pub fn gen_noise(spec: &NoiseSpec, length: usize, seed: u64, stream: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut rng = rng_for(seed, stream);
    if spec.gaussian_variance == 0.0 {
        return Ok(vec![0.0; length]);
    }
    let gauss =
        Normal::new(0.0, spec.gaussian_variance.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    if spec.impulse_probability == 0.0 || spec.impulse_variance_ratio == 0.0 {
        return Ok((0..length).map(|_| gauss.sample(&mut rng)).collect());
    }
    let bern =
        Bernoulli::new(spec.impulse_probability).map_err(|e| Error::invalid(e.to_string()))?;
    let imp = Normal::new(
        0.0,
        (spec.impulse_variance_ratio * spec.gaussian_variance).sqrt(),
    )
    .map_err(|e| Error::invalid(e.to_string()))?;
    Ok((0..length)
        .map(|_| {
            let g = gauss.sample(&mut rng);
            // Draw both every sample so the stream layout does not depend
            // on which impulses fire.
            let hit = bern.sample(&mut rng);
            let spike = imp.sample(&mut rng);
            if hit {
                g + spike
            } else {
                g
            }
        })
        .collect())
}

/// Paired clean/corrupted input and desired sequences under a known plant.
#[derive(Debug, Clone)]
pub struct EivStream {
    pub clean_input: Vec<f64>,
    pub noisy_input: Vec<f64>,
    pub clean_desired: Vec<f64>,
    pub noisy_desired: Vec<f64>,
    pub plant: Vec<f64>,
    theta: Option<f64>,
}

impl EivStream {
    /// Output/input Gaussian noise variance ratio. Errors when the input
    /// noise variance is zero and the ratio is undefined.
    pub fn theta(&self) -> Result<f64> {
        self.theta.ok_or(Error::ThetaUndefined)
    }

    pub fn len(&self) -> usize {
        self.clean_input.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clean_input.is_empty()
    }
}

/// Builds an EIV stream: `d = h' x` exactly, then both channels are
/// corrupted by independently drawn noise. Theta is the ratio of the
/// Gaussian variance components.
pub fn make_eiv_stream(
    plant: &[f64],
    input: Vec<f64>,
    input_noise: &NoiseSpec,
    output_noise: &NoiseSpec,
    seed: u64,
) -> Result<EivStream> {
    if plant.len() < 3 {
        return Err(Error::invalid("plant length must be >= 3"));
    }
    input_noise.validate()?;
    output_noise.validate()?;
    let n = input.len();
    let clean_desired = convolve_plant(&input, plant);
    let u = gen_noise(input_noise, n, seed, STREAM_INPUT_NOISE)?;
    let v = gen_noise(output_noise, n, seed, STREAM_OUTPUT_NOISE)?;
    let noisy_input: Vec<f64> = input.iter().zip(&u).map(|(x, u)| x + u).collect();
    let noisy_desired: Vec<f64> = clean_desired.iter().zip(&v).map(|(d, v)| d + v).collect();
    let theta = if input_noise.gaussian_variance > 0.0 {
        Some(output_noise.gaussian_variance / input_noise.gaussian_variance)
    } else {
        None
    };
    Ok(EivStream {
        clean_input: input,
        noisy_input,
        clean_desired,
        noisy_desired,
        plant: plant.to_vec(),
        theta,
    })
}

fn convolve_plant(input: &[f64], plant: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; input.len()];
    for (n, o) in out.iter_mut().enumerate() {
        let kmax = plant.len().min(n + 1);
        let mut acc = 0.0;
        for (k, &c) in plant[..kmax].iter().enumerate() {
            acc += c * input[n - k];
        }
        *o = acc;
    }
    out
}

/// Random plant with unit squared norm: taps uniform on [-0.5, 0.5], then
/// normalized.
pub fn gen_plant(len: usize, seed: u64) -> Result<Vec<f64>> {
    if len < 3 {
        return Err(Error::invalid("plant length must be >= 3"));
    }
    let mut rng = rng_for(seed, 4);
    let mut h: Vec<f64> = (0..len).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let norm = h.iter().map(|c| c * c).sum::<f64>().sqrt();
    for c in &mut h {
        *c /= norm;
    }
    Ok(h)
}

/// Exponentially decaying random impulse response for echo-path models,
/// normalized to unit squared norm.
pub fn gen_echo_path(len: usize, decay_time: f64, seed: u64) -> Result<Vec<f64>> {
    if len < 3 {
        return Err(Error::invalid("echo path length must be >= 3"));
    }
    let mut rng = rng_for(seed, 5);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut h: Vec<f64> = (0..len)
        .map(|k| normal.sample(&mut rng) * (-(k as f64) / decay_time).exp())
        .collect();
    let norm = h.iter().map(|c| c * c).sum::<f64>().sqrt();
    for c in &mut h {
        *c /= norm;
    }
    Ok(h)
}

/// Synthetic speech-like test signal: AR(2)-colored Gaussian noise with a
/// slow amplitude envelope so the signal has voiced/quiet stretches.
pub fn gen_speech_like(length: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, 6);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let (a1, a2) = (1.5, -0.7);
    let mut y1 = 0.0;
    let mut y2 = 0.0;
    let mut out = Vec::with_capacity(length);
    for n in 0..length {
        let y = a1 * y1 + a2 * y2 + normal.sample(&mut rng);
        y2 = y1;
        y1 = y;
        let envelope = 0.55 + 0.45 * (2.0 * std::f64::consts::PI * n as f64 / 4000.0).sin();
        out.push(y * envelope * 0.1);
    }
    out
}

/// Reads a mono 16-bit PCM WAV file and scales samples to [-1, 1).
pub fn load_wav(path: &std::path::Path) -> Result<Vec<f64>> {
    let reader = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "expected mono, got {} channels",
            spec.channels
        )));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedFormat(format!(
            "expected 16-bit PCM, got {}-bit {:?}",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    let samples: std::result::Result<Vec<i16>, _> = reader.into_samples().collect();
    let samples = samples.map_err(wav_err)?;
    Ok(samples.iter().map(|&s| s as f64 / 32768.0).collect())
}

/// Writes samples as a mono 16-bit PCM WAV (values clamped to [-1, 1)).
pub fn save_wav(path: &std::path::Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in samples {
        let q = (s.clamp(-1.0, 32767.0 / 32768.0) * 32768.0).round() as i16;
        writer.write_sample(q).map_err(wav_err)?;
    }
    writer.finalize().map_err(wav_err)
}

fn wav_err(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::UnsupportedFormat(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_variance(xs: &[f64]) -> f64 {
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64
    }

    #[test]
    fn white_input_variance() {
        let x = gen_input(InputKind::White { variance: 1.0 }, 100_000, 11).unwrap();
        let v = sample_variance(&x);
        assert!((v - 1.0).abs() < 0.05, "variance {v}");
    }

    #[test]
    fn ar1_stationary_variance() {
        // driving variance 0.36 with a = 0.8 gives stationary variance 1.
        let kind = InputKind::Ar1 {
            coefficient: 0.8,
            variance: 0.36,
        };
        assert!((kind.stationary_variance() - 1.0).abs() < 1e-12);
        let x = gen_input(kind, 100_000, 3).unwrap();
        let v = sample_variance(&x);
        assert!((v - 1.0).abs() < 0.05, "variance {v}");
    }

    #[test]
    fn empty_and_unstable_inputs() {
        assert!(gen_input(InputKind::White { variance: 1.0 }, 0, 1)
            .unwrap()
            .is_empty());
        assert!(gen_input(
            InputKind::Ar1 {
                coefficient: 1.0,
                variance: 1.0
            },
            10,
            1
        )
        .is_err());
    }

    #[test]
    fn gaussian_noise_variance() {
        let spec = NoiseSpec::gaussian(0.05);
        let v = sample_variance(&gen_noise(&spec, 100_000, 21, 3).unwrap());
        assert!((v - 0.05).abs() / 0.05 < 0.05, "variance {v}");
    }

    #[test]
    fn zero_variance_noise_is_zero() {
        let spec = NoiseSpec::gaussian(0.0);
        assert!(gen_noise(&spec, 1000, 1, 3).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn impulsive_mixture_variance() {
        let spec = NoiseSpec::impulsive(0.05, 0.01, 1000.0);
        assert!((spec.total_variance() - 0.55).abs() < 1e-12);
        let v = sample_variance(&gen_noise(&spec, 1_000_000, 9, 3).unwrap());
        assert!(
            (v - 0.55).abs() / 0.55 < 0.10,
            "mixture variance {v} expected ~0.55"
        );
    }

    #[test]
    fn seeds_reproduce_streams() {
        let spec = NoiseSpec::impulsive(0.05, 0.01, 1000.0);
        let a = gen_noise(&spec, 5000, 42, 3).unwrap();
        let b = gen_noise(&spec, 5000, 42, 3).unwrap();
        assert_eq!(a, b);
        let c = gen_noise(&spec, 5000, 43, 3).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn eiv_stream_noiseless_reduction() {
        let h = vec![0.5, -0.25, 0.1];
        let x = gen_input(InputKind::White { variance: 1.0 }, 500, 2).unwrap();
        let s = make_eiv_stream(&h, x, &NoiseSpec::gaussian(0.0), &NoiseSpec::gaussian(0.0), 2)
            .unwrap();
        assert_eq!(s.clean_input, s.noisy_input);
        assert_eq!(s.clean_desired, s.noisy_desired);
        assert!(s.theta().is_err());
    }

    #[test]
    fn identity_plant_reproduces_input() {
        let h = vec![1.0, 0.0, 0.0];
        let x = gen_input(InputKind::White { variance: 1.0 }, 200, 5).unwrap();
        let s = make_eiv_stream(
            &h,
            x.clone(),
            &NoiseSpec::gaussian(0.0),
            &NoiseSpec::gaussian(0.0),
            5,
        )
        .unwrap();
        assert_eq!(s.clean_desired, x);
    }

    #[test]
    fn theta_is_variance_ratio() {
        let h = gen_plant(8, 1).unwrap();
        let x = gen_input(InputKind::White { variance: 1.0 }, 100, 1).unwrap();
        let s = make_eiv_stream(
            &h,
            x,
            &NoiseSpec::gaussian(0.05),
            &NoiseSpec::gaussian(0.05),
            1,
        )
        .unwrap();
        assert_eq!(s.theta().unwrap(), 1.0);
    }

    #[test]
    fn plant_identity_is_exact() {
        let h = gen_plant(16, 77).unwrap();
        let x = gen_input(InputKind::White { variance: 1.0 }, 2000, 77).unwrap();
        let s = make_eiv_stream(
            &h,
            x,
            &NoiseSpec::gaussian(0.05),
            &NoiseSpec::gaussian(0.05),
            77,
        )
        .unwrap();
        for n in 0..s.len() {
            let mut acc = 0.0;
            for k in 0..h.len().min(n + 1) {
                acc += h[k] * s.clean_input[n - k];
            }
            assert_eq!(acc, s.clean_desired[n]);
        }
    }

    #[test]
    fn input_and_input_noise_are_uncorrelated() {
        let n = 100_000;
        let x = gen_input(InputKind::White { variance: 1.0 }, n, 123).unwrap();
        let u = gen_noise(&NoiseSpec::gaussian(1.0), n, 123, STREAM_INPUT_NOISE).unwrap();
        let corr = x.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        assert!(
            corr.abs() < 4.0 / (n as f64).sqrt(),
            "cross-correlation {corr}"
        );
    }

    #[test]
    fn plant_norm_is_one() {
        let h = gen_plant(128, 3).unwrap();
        let norm_sq: f64 = h.iter().map(|c| c * c).sum();
        assert!((norm_sq - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wav_round_trip_and_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("probe.wav");
        let samples = vec![-1.0, 0.0, 0.5, 32767.0 / 32768.0];
        save_wav(&path, &samples, 8000).unwrap();
        let back = load_wav(&path).unwrap();
        assert_eq!(back.len(), samples.len());
        assert_eq!(back[0], -1.0);
        assert!((back[2] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn stereo_wav_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for _ in 0..16 {
            w.write_sample(0i16).unwrap();
            w.write_sample(0i16).unwrap();
        }
        w.finalize().unwrap();
        match load_wav(&path) {
            Err(Error::UnsupportedFormat(_)) => {}
            other => panic!("expected unsupported-format, got {other:?}"),
        }
    }

    #[test]
    fn missing_wav_is_io_error() {
        match load_wav(std::path::Path::new("/nonexistent/x.wav")) {
            Err(Error::Io(_)) => {}
            other => panic!("expected io error, got {other:?}"),
        }
    }
}
