//! Cosine-modulated pseudo-QMF analysis filter bank.
//!
//! The bank splits a full-band signal into `N` decimated subband signals.
//! Branch filters come from a square-root-raised-cosine prototype truncated
//! to `M` taps, lightly Kaiser-windowed, with the roll-off and cutoff chosen
//! by a deterministic search that minimizes the deviation of the bank's
//! power-complementarity response from unity. The achieved deviation is
//! recorded on the bank so callers can check it against their own budget.

use crate::error::{Error, Result};

/// Frequency grid used while searching for design parameters.
const SEARCH_GRID: usize = 512;
/// Frequency grid used for the final recorded error and [`paraunitarity_error`].
const EVAL_GRID: usize = 2048;
/// Quadrature grid for synthesizing prototype taps from the target response.
const SYNTH_GRID: usize = 2048;

/// An `N`-branch analysis bank with equal-length branch filters.
#[derive(Debug, Clone)]
pub struct AnalysisBank {
    branch_filters: Vec<Vec<f64>>,
    design_error: f64,
}

impl AnalysisBank {
    pub fn num_subbands(&self) -> usize {
        self.branch_filters.len()
    }

    pub fn proto_len(&self) -> usize {
        self.branch_filters[0].len()
    }

    pub fn branch(&self, i: usize) -> &[f64] {
        &self.branch_filters[i]
    }

    /// Power-complementarity deviation recorded when the bank was designed.
    pub fn design_error(&self) -> f64 {
        self.design_error
    }

    /// Squared l2 norm of one branch filter (the subband noise gain).
    pub fn branch_energy(&self, i: usize) -> f64 {
        self.branch_filters[i].iter().map(|c| c * c).sum()
    }
}

/// Designs an `num_subbands`-branch pseudo-QMF bank with `proto_len` taps
/// per branch. `num_subbands == 1` yields the identity (delta) bank and the
/// full-band algorithms fall out as the `N = 1` special case downstream.
pub fn design_bank(num_subbands: usize, proto_len: usize) -> Result<AnalysisBank> {
    if num_subbands == 0 || proto_len == 0 {
        return Err(Error::invalid("num_subbands and proto_len must be >= 1"));
    }
    if num_subbands == 1 {
        let mut delta = vec![0.0; proto_len];
        delta[0] = 1.0;
        return Ok(AnalysisBank {
            branch_filters: vec![delta],
            design_error: 0.0,
        });
    }
    if proto_len < num_subbands {
        return Err(Error::invalid(format!(
            "proto_len {proto_len} must be >= num_subbands {num_subbands}"
        )));
    }

    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    for &beta in &[1.5, 2.0, 2.5] {
        for &cutoff_scale in &[1.0, 1.02, 1.04, 1.06] {
            // Golden-section search on the roll-off factor.
            let (mut lo, mut hi) = (0.35f64, 0.75f64);
            for _ in 0..32 {
                let m1 = lo + (hi - lo) * 0.381_966;
                let m2 = hi - (hi - lo) * 0.381_966;
                let e1 = candidate_error(num_subbands, proto_len, m1, cutoff_scale, beta);
                let e2 = candidate_error(num_subbands, proto_len, m2, cutoff_scale, beta);
                if e1 < e2 {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let rolloff = 0.5 * (lo + hi);
            let bank = make_candidate(num_subbands, proto_len, rolloff, cutoff_scale, beta);
            let err = complementarity_deviation(&bank, EVAL_GRID);
            if best.as_ref().map_or(true, |(e, _)| err < *e) {
                best = Some((err, bank));
            }
        }
    }
    let (design_error, branch_filters) = best.expect("search always yields a candidate");
    Ok(AnalysisBank {
        branch_filters,
        design_error,
    })
}

fn candidate_error(n: usize, m: usize, rolloff: f64, cutoff_scale: f64, beta: f64) -> f64 {
    let bank = make_candidate(n, m, rolloff, cutoff_scale, beta);
    complementarity_deviation(&bank, SEARCH_GRID)
}

/// Prototype + modulation + gain normalization for one parameter triple.
fn make_candidate(n: usize, m: usize, rolloff: f64, cutoff_scale: f64, beta: f64) -> Vec<Vec<f64>> {
    let proto = rrc_prototype(m, n, rolloff, cutoff_scale, beta);
    let mut bank = modulate(&proto, n);
    // Scale so the mean of the power-complementarity response is one.
    let mean = mean_complementarity(&bank, SEARCH_GRID);
    let s = 1.0 / mean.sqrt();
    for h in &mut bank {
        for c in h.iter_mut() {
            *c *= s;
        }
    }
    bank
}

/// Linear-phase lowpass taps sampled from a sqrt-raised-cosine magnitude
/// response with band edge `cutoff_scale * pi / (2N)`, Kaiser-windowed.
fn rrc_prototype(m: usize, n: usize, rolloff: f64, cutoff_scale: f64, beta: f64) -> Vec<f64> {
    let wb = cutoff_scale * std::f64::consts::PI / (2.0 * n as f64);
    let lo = (1.0 - rolloff) * wb;
    let hi = (1.0 + rolloff) * wb;
    let dw = std::f64::consts::PI / SYNTH_GRID as f64;
    let center = (m as f64 - 1.0) / 2.0;
    let window = kaiser_window(m, beta);

    let mut taps = vec![0.0; m];
    for (k, tap) in taps.iter_mut().enumerate() {
        let shift = k as f64 - center;
        let mut acc = 0.0;
        for g in 0..SYNTH_GRID {
            let w = g as f64 * dw;
            let mag = if w <= lo {
                1.0
            } else if w < hi {
                ((std::f64::consts::FRAC_PI_4) * (w - lo) / (rolloff * wb)).cos()
            } else {
                break;
            };
            acc += mag * (w * shift).cos();
        }
        *tap = acc * dw / std::f64::consts::PI * window[k];
    }
    taps
}

/// Cosine modulation of the prototype into `n` branches.
fn modulate(proto: &[f64], n: usize) -> Vec<Vec<f64>> {
    let m = proto.len();
    let center = (m as f64 - 1.0) / 2.0;
    (0..n)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let phase0 = sign * std::f64::consts::FRAC_PI_4;
            let freq = std::f64::consts::PI / n as f64 * (i as f64 + 0.5);
            (0..m)
                .map(|k| 2.0 * proto[k] * (freq * (k as f64 - center) + phase0).cos())
                .collect()
        })
        .collect()
}

fn kaiser_window(m: usize, beta: f64) -> Vec<f64> {
    let denom = bessel_i0(beta);
    let half = (m as f64 - 1.0) / 2.0;
    (0..m)
        .map(|k| {
            let x = (k as f64 - half) / half;
            bessel_i0(beta * (1.0 - x * x).max(0.0).sqrt()) / denom
        })
        .collect()
}

/// Modified Bessel function of the first kind, order zero (series form).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half_sq = x * x / 4.0;
    for k in 1..40 {
        term *= half_sq / (k as f64 * k as f64);
        sum += term;
        if term < 1e-16 * sum {
            break;
        }
    }
    sum
}

/// Sum of squared branch magnitude responses over a dense grid in [0, pi).
fn complementarity_response(bank: &[Vec<f64>], grid: usize) -> Vec<f64> {
    let mut t = vec![0.0; grid];
    for h in bank {
        for (g, tg) in t.iter_mut().enumerate() {
            let w = g as f64 * std::f64::consts::PI / grid as f64;
            let mut re = 0.0;
            let mut im = 0.0;
            for (k, &c) in h.iter().enumerate() {
                let phi = w * k as f64;
                re += c * phi.cos();
                im -= c * phi.sin();
            }
            *tg += re * re + im * im;
        }
    }
    t
}

fn mean_complementarity(bank: &[Vec<f64>], grid: usize) -> f64 {
    let t = complementarity_response(bank, grid);
    t.iter().sum::<f64>() / grid as f64
}

fn complementarity_deviation(bank: &[Vec<f64>], grid: usize) -> f64 {
    complementarity_response(bank, grid)
        .iter()
        .map(|t| (t - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Maximum deviation of the bank's power-complementarity response from
/// unity over a dense frequency grid. Zero for an exactly paraunitary bank.
pub fn paraunitarity_error(bank: &AnalysisBank) -> f64 {
    complementarity_deviation(&bank.branch_filters, EVAL_GRID)
}

/// Full-rate subband signals for one source signal: entry `i` holds the
/// source convolved with branch filter `i` (same length as the source,
/// zero-padded history before sample zero).
pub fn analyze(bank: &AnalysisBank, signal: &[f64]) -> Vec<Vec<f64>> {
    bank.branch_filters
        .iter()
        .map(|h| convolve_same(signal, h))
        .collect()
}

fn convolve_same(signal: &[f64], taps: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; signal.len()];
    for (n, o) in out.iter_mut().enumerate() {
        let kmax = taps.len().min(n + 1);
        let mut acc = 0.0;
        for (k, &c) in taps[..kmax].iter().enumerate() {
            acc += c * signal[n - k];
        }
        *o = acc;
    }
    out
}

/// One subband's view of a decimated instant: the desired sample
/// `d_i(zN)` plus the regressor window ending at `x_i(zN)`.
///
/// The regressor is formally of length `filter_len` with zeros before
/// sample zero; `history` holds the available forward-time suffix.
#[derive(Debug, Clone, Copy)]
pub struct SubbandFrame<'a> {
    pub subband_index: usize,
    pub decimated_index: usize,
    pub desired: f64,
    history: &'a [f64],
    filter_len: usize,
}

impl<'a> SubbandFrame<'a> {
    /// Builds a frame from an explicit forward-time history slice whose last
    /// element is the current sample. At most the trailing `filter_len`
    /// entries are used.
    pub fn new(
        subband_index: usize,
        decimated_index: usize,
        history: &'a [f64],
        filter_len: usize,
        desired: f64,
    ) -> Self {
        let keep = history.len().min(filter_len);
        SubbandFrame {
            subband_index,
            decimated_index,
            desired,
            history: &history[history.len() - keep..],
            filter_len,
        }
    }

    pub fn filter_len(&self) -> usize {
        self.filter_len
    }

    /// Dot product of the regressor with `taps`, where `taps[0]` multiplies
    /// the newest sample. `taps` must have length `filter_len`.
    pub fn dot(&self, taps: &[f64]) -> f64 {
        debug_assert_eq!(taps.len(), self.filter_len);
        self.history
            .iter()
            .rev()
            .zip(taps.iter())
            .map(|(x, w)| x * w)
            .sum()
    }

    /// `taps[k] += coef * regressor[k]` over the available history.
    pub fn axpy_into(&self, coef: f64, taps: &mut [f64]) {
        debug_assert_eq!(taps.len(), self.filter_len);
        for (x, w) in self.history.iter().rev().zip(taps.iter_mut()) {
            *w += coef * x;
        }
    }

    /// Squared norm of the regressor.
    pub fn norm_sq(&self) -> f64 {
        self.history.iter().map(|x| x * x).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.desired.is_finite() && self.history.iter().all(|x| x.is_finite())
    }

    /// Regressor as an owned vector, newest sample first, zero padded.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.history.iter().rev().copied().collect();
        v.resize(self.filter_len, 0.0);
        v
    }
}

/// Subband-analyzed input/desired pair ready to be walked frame by frame.
pub struct SubbandSignals {
    input_branches: Vec<Vec<f64>>,
    desired_branches: Vec<Vec<f64>>,
    num_frames: usize,
    num_subbands: usize,
}

/// Filters both signals through the bank; frames are then served at every
/// `N`-th sample. Input and desired must have equal length.
pub fn analyze_decimate(
    bank: &AnalysisBank,
    input: &[f64],
    desired: &[f64],
) -> Result<SubbandSignals> {
    if input.len() != desired.len() {
        return Err(Error::invalid(format!(
            "input length {} != desired length {}",
            input.len(),
            desired.len()
        )));
    }
    let n = bank.num_subbands();
    let num_frames = input.len().div_ceil(n);
    Ok(SubbandSignals {
        input_branches: analyze(bank, input),
        desired_branches: analyze(bank, desired),
        num_frames,
        num_subbands: n,
    })
}

impl SubbandSignals {
    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_subbands(&self) -> usize {
        self.num_subbands
    }

    /// Frames for decimated index `z`, one per subband.
    pub fn frames(&self, z: usize, filter_len: usize) -> Vec<SubbandFrame<'_>> {
        let sample = z * self.num_subbands;
        (0..self.num_subbands)
            .map(|i| {
                SubbandFrame::new(
                    i,
                    z,
                    &self.input_branches[i][..=sample],
                    filter_len,
                    self.desired_branches[i][sample],
                )
            })
            .collect()
    }

    /// Full-rate subband input signal for branch `i` (used for calibration).
    pub fn input_branch(&self, i: usize) -> &[f64] {
        &self.input_branches[i]
    }
}
