//! DSP core: DC removal and band-power extraction.
//!
//! Raw voltage traces are high-pass filtered, cut into non-overlapping 0.5 s
//! frames, and reduced to one 8-band power vector per frame. Powers are
//! mean-square quantities (µV²): summing a frame's periodogram over all bins
//! reproduces the frame's mean squared amplitude.

use crate::error::{Error, Result};
use rustfft::{num_complex::Complex, FftPlanner};
use std::fmt;
use std::path::Path;

/// Number of spectral bands per frame.
pub const BAND_COUNT: usize = 8;

/// Canonical band names, ascending in frequency.
pub const BAND_NAMES: [&str; BAND_COUNT] = [
    "delta", "theta", "alpha1", "alpha2", "beta1", "beta2", "gamma1", "gamma2",
];

/// A single-channel voltage trace at a fixed sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSegment {
    samples: Vec<f64>,
    sample_rate: u32,
    channel_id: String,
}

impl RawSegment {
    pub fn new(samples: Vec<f64>, sample_rate: u32, channel_id: impl Into<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Parameter("segment has no samples".into()));
        }
        if sample_rate == 0 {
            return Err(Error::Parameter("sample rate must be positive".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
            channel_id: channel_id.into(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channel_id(&self) -> &str {
        &self.channel_id
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// One frequency band, bounds in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub low_hz: f64,
    pub high_hz: f64,
}

impl Band {
    pub fn contains(&self, hz: f64) -> bool {
        hz >= self.low_hz && hz <= self.high_hz
    }
}

/// The 8 analysis bands, ascending and pairwise non-overlapping.
#[derive(Debug, Clone, PartialEq)]
pub struct BandTable {
    bands: [Band; BAND_COUNT],
}

impl BandTable {
    pub fn new(bands: [Band; BAND_COUNT]) -> Result<Self> {
        for (i, band) in bands.iter().enumerate() {
            if !(band.low_hz.is_finite() && band.high_hz.is_finite()) || band.low_hz < 0.0 {
                return Err(Error::Parameter(format!(
                    "band `{}` has invalid bounds {}:{}",
                    BAND_NAMES[i], band.low_hz, band.high_hz
                )));
            }
            if band.low_hz >= band.high_hz {
                return Err(Error::Parameter(format!(
                    "band `{}` must satisfy low < high, got {}:{}",
                    BAND_NAMES[i], band.low_hz, band.high_hz
                )));
            }
        }
        for i in 1..BAND_COUNT {
            if bands[i].low_hz <= bands[i - 1].high_hz {
                return Err(Error::Parameter(format!(
                    "bands `{}` and `{}` overlap or are out of order",
                    BAND_NAMES[i - 1],
                    BAND_NAMES[i]
                )));
            }
        }
        Ok(Self { bands })
    }

    pub fn bands(&self) -> &[Band; BAND_COUNT] {
        &self.bands
    }

    /// Parses the plain-text key-value format, one `name=low:high` per line.
    /// Blank lines and `#` comments are ignored; all 8 bands are required.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut found: [Option<Band>; BAND_COUNT] = [None; BAND_COUNT];
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Schema(format!("band config line {}: expected `name=low:high`", lineno + 1))
            })?;
            let key = key.trim().to_ascii_lowercase();
            let idx = BAND_NAMES
                .iter()
                .position(|n| *n == key)
                .ok_or_else(|| Error::Schema(format!("unknown band name `{key}`")))?;
            let (lo, hi) = value.trim().split_once(':').ok_or_else(|| {
                Error::Schema(format!("band `{key}`: expected `low:high`, got `{value}`"))
            })?;
            let lo: f64 = lo.trim().parse().map_err(|_| {
                Error::Schema(format!("band `{key}`: bad lower bound `{lo}`"))
            })?;
            let hi: f64 = hi.trim().parse().map_err(|_| {
                Error::Schema(format!("band `{key}`: bad upper bound `{hi}`"))
            })?;
            found[idx] = Some(Band { low_hz: lo, high_hz: hi });
        }
        let mut bands = [Band { low_hz: 0.0, high_hz: 0.0 }; BAND_COUNT];
        for (i, slot) in found.iter().enumerate() {
            bands[i] = slot.ok_or_else(|| {
                Error::Schema(format!("missing column `{}`", BAND_NAMES[i]))
            })?;
        }
        Self::new(bands)
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_config_str(&text)
    }

    /// Serializes back to the key-value config format.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for (name, band) in BAND_NAMES.iter().zip(self.bands.iter()) {
            out.push_str(&format!("{name}={}:{}\n", band.low_hz, band.high_hz));
        }
        out
    }
}

impl Default for BandTable {
    /// Bounds used by the consumer single-channel headset this feature layout
    /// is modeled on. Alternate tables load via [`BandTable::from_config_str`].
    fn default() -> Self {
        let hz = |low_hz: f64, high_hz: f64| Band { low_hz, high_hz };
        Self {
            bands: [
                hz(0.5, 2.75),   // delta
                hz(3.5, 6.75),   // theta
                hz(7.5, 9.25),   // alpha1
                hz(10.0, 11.75), // alpha2
                hz(13.0, 16.75), // beta1
                hz(18.0, 29.75), // beta2
                hz(31.0, 39.75), // gamma1
                hz(41.0, 49.75), // gamma2
            ],
        }
    }
}

impl fmt::Display for BandTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.to_config_string().trim_end())
    }
}

/// One 0.5 s frame's 8 band powers, in [`BAND_NAMES`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPowers {
    pub values: [f64; BAND_COUNT],
    pub frame_index: usize,
}

/// Taper applied to each frame before the FFT. Rectangular is the default;
/// Hann trades scalloping loss for lower sidelobes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrameWindow {
    #[default]
    Rectangular,
    Hann,
}

/// First-order high-pass filter for DC removal.
///
/// Single-pole RC discretization: `y[n] = a*(y[n-1] + x[n] - x[n-1])` with
/// `a = RC/(RC + 1/fs)`. Filter state is primed with the first sample so a
/// constant input cancels from sample 0 rather than decaying over ~RC seconds.
pub fn high_pass(segment: &RawSegment, cutoff_hz: f64) -> Result<RawSegment> {
    let fs = segment.sample_rate as f64;
    if !cutoff_hz.is_finite() || cutoff_hz <= 0.0 || cutoff_hz >= fs / 2.0 {
        return Err(Error::Parameter(format!(
            "high-pass cutoff must be in (0, {}), got {}",
            fs / 2.0,
            cutoff_hz
        )));
    }
    let rc = 1.0 / (2.0 * std::f64::consts::PI * cutoff_hz);
    let a = rc / (rc + 1.0 / fs);
    let mut out = Vec::with_capacity(segment.samples.len());
    let mut prev_x = segment.samples[0];
    let mut prev_y = 0.0;
    for &x in &segment.samples {
        let y = a * (prev_y + x - prev_x);
        out.push(y);
        prev_x = x;
        prev_y = y;
    }
    RawSegment::new(out, segment.sample_rate, segment.channel_id.clone())
}

/// Analytic magnitude response of [`high_pass`] at frequency `hz`.
pub fn high_pass_response(sample_rate: u32, cutoff_hz: f64, hz: f64) -> f64 {
    let fs = sample_rate as f64;
    let rc = 1.0 / (2.0 * std::f64::consts::PI * cutoff_hz);
    let a = rc / (rc + 1.0 / fs);
    let w = 2.0 * std::f64::consts::PI * hz / fs;
    let num = a * (Complex::new(1.0, 0.0) - Complex::new(0.0, -w).exp());
    let den = Complex::new(1.0, 0.0) - a * Complex::new(0.0, -w).exp();
    (num / den).norm()
}

/// Cuts the segment into non-overlapping 0.5 s frames and extracts one
/// [`BandPowers`] per frame with a rectangular taper.
///
/// Frame `k` covers samples `[k*fs/2, (k+1)*fs/2)`; a segment shorter than
/// one frame yields an empty vector. Each band's power is the summed
/// one-sided mean-square periodogram over FFT bins whose center frequency
/// lies within `[low_hz, high_hz]`; bins falling in gaps between bands are
/// discarded, so the 8 powers sum to at most the frame's total power.
pub fn frame_band_powers(segment: &RawSegment, bands: &BandTable) -> Result<Vec<BandPowers>> {
    frame_band_powers_with(segment, bands, FrameWindow::Rectangular)
}

/// [`frame_band_powers`] with an explicit frame taper.
pub fn frame_band_powers_with(
    segment: &RawSegment,
    bands: &BandTable,
    window: FrameWindow,
) -> Result<Vec<BandPowers>> {
    if segment.samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(format!(
            "channel `{}` contains non-finite samples",
            segment.channel_id
        )));
    }
    let n = segment.samples.len() as u64;
    let fs = segment.sample_rate as u64;
    // floor(2 * duration) frames, boundaries in exact integer arithmetic
    let frame_count = (2 * n / fs) as usize;
    let mut result = Vec::with_capacity(frame_count);
    if frame_count == 0 {
        return Ok(result);
    }

    let mut planner = FftPlanner::<f64>::new();
    for k in 0..frame_count {
        let start = (k as u64 * fs / 2) as usize;
        let end = ((k as u64 + 1) * fs / 2) as usize;
        let frame = &segment.samples[start..end];
        let values = band_powers_of_frame(frame, segment.sample_rate, bands, window, &mut planner);
        result.push(BandPowers { values, frame_index: k });
    }
    Ok(result)
}

fn band_powers_of_frame(
    frame: &[f64],
    sample_rate: u32,
    bands: &BandTable,
    window: FrameWindow,
    planner: &mut FftPlanner<f64>,
) -> [f64; BAND_COUNT] {
    let len = frame.len();
    let mut buf: Vec<Complex<f64>> = match window {
        FrameWindow::Rectangular => frame.iter().map(|&v| Complex::new(v, 0.0)).collect(),
        FrameWindow::Hann => {
            // normalized so a full-band Parseval sum is preserved in expectation
            let s2: f64 = (0..len).map(|i| hann(i, len) * hann(i, len)).sum::<f64>() / len as f64;
            let scale = 1.0 / s2.sqrt();
            frame
                .iter()
                .enumerate()
                .map(|(i, &v)| Complex::new(v * hann(i, len) * scale, 0.0))
                .collect()
        }
    };
    planner.plan_fft_forward(len).process(&mut buf);

    let df = sample_rate as f64 / len as f64;
    let half = len / 2;
    let mut powers = [0.0; BAND_COUNT];
    for (k, value) in buf.iter().enumerate().take(half + 1) {
        let freq = k as f64 * df;
        // one-sided mean-square normalization: DC and Nyquist bins count once
        let one_sided = if k == 0 || (len % 2 == 0 && k == half) {
            1.0
        } else {
            2.0
        };
        let p = one_sided * value.norm_sqr() / (len as f64 * len as f64);
        if let Some(b) = bands.bands.iter().position(|band| band.contains(freq)) {
            powers[b] += p;
        }
    }
    powers
}

fn hann(i: usize, n: usize) -> f64 {
    0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
}

/// Total one-sided mean-square periodogram power of one frame (all bins).
pub fn total_frame_power(frame: &[f64]) -> f64 {
    frame.iter().map(|v| v * v).sum::<f64>() / frame.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sine(freq: f64, amplitude: f64, fs: u32, seconds: f64) -> RawSegment {
        let n = (fs as f64 * seconds).round() as usize;
        let samples = (0..n)
            .map(|i| amplitude * (2.0 * std::f64::consts::PI * freq * i as f64 / fs as f64).sin())
            .collect();
        RawSegment::new(samples, fs, "Fp1").unwrap()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    /// Independent oracle: naive O(n²) DFT band powers with the same
    /// bin-center assignment contract.
    fn naive_band_powers(frame: &[f64], fs: u32, bands: &BandTable) -> [f64; BAND_COUNT] {
        let n = frame.len();
        let df = fs as f64 / n as f64;
        let mut powers = [0.0; BAND_COUNT];
        for k in 0..=n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in frame.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * k as f64 * t as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            let one_sided = if k == 0 || (n % 2 == 0 && k == n / 2) { 1.0 } else { 2.0 };
            let p = one_sided * (re * re + im * im) / (n as f64 * n as f64);
            let freq = k as f64 * df;
            if let Some(b) = bands.bands().iter().position(|band| band.contains(freq)) {
                powers[b] += p;
            }
        }
        powers
    }

    #[test]
    fn high_pass_removes_constant_signal() {
        let seg = RawSegment::new(vec![5.0; 2048], 2048, "Fp1").unwrap();
        let out = high_pass(&seg, 0.5).unwrap();
        assert_eq!(out.samples().len(), 2048);
        assert_eq!(out.sample_rate(), 2048);
        let mean = out.samples().iter().sum::<f64>() / 2048.0;
        assert!(mean.abs() < 0.05, "mean {mean}");
        // attenuated to <= 1% of the input mean amplitude
        assert!(mean.abs() <= 0.01 * 5.0);
    }

    #[test]
    fn high_pass_passes_10hz_within_analytic_response() {
        let seg = sine(10.0, 1.0, 2048, 2.0);
        let out = high_pass(&seg, 0.5).unwrap();
        let ratio = rms(out.samples()) / rms(seg.samples());
        // oracle: analytic magnitude response of the one-pole filter at 10 Hz
        let expected = high_pass_response(2048, 0.5, 10.0);
        assert_relative_eq!(ratio, expected, max_relative = 5e-3);
        assert!((ratio - 1.0).abs() < 0.01, "RMS ratio {ratio}");
    }

    #[test]
    fn high_pass_superposition_of_dc_and_sine() {
        let fs = 2048;
        let samples: Vec<f64> = (0..fs)
            .map(|i| 3.0 + (2.0 * std::f64::consts::PI * 10.0 * i as f64 / fs as f64).sin())
            .collect();
        let seg = RawSegment::new(samples, fs as u32, "Fp1").unwrap();
        let out = high_pass(&seg, 0.5).unwrap();
        let mean = out.samples().iter().sum::<f64>() / out.samples().len() as f64;
        assert!(mean.abs() < 0.03, "mean {mean}");
        let sine_rms = (0.5f64).sqrt();
        assert!((rms(out.samples()) - sine_rms).abs() / sine_rms < 0.02);
    }

    #[test]
    fn high_pass_rejects_bad_cutoff() {
        let seg = sine(10.0, 1.0, 2048, 1.0);
        assert!(matches!(high_pass(&seg, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(high_pass(&seg, 1024.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn bin_centered_tone_concentrates_exactly() {
        // 10 Hz is an exact bin center of the 0.5 s frame (2 Hz resolution),
        // so Parseval puts A²/2 into alpha2 with zero leakage.
        let seg = sine(10.0, 1.0, 2048, 1.0);
        let frames = frame_band_powers(&seg, &BandTable::default()).unwrap();
        assert_eq!(frames.len(), 2);
        for f in &frames {
            assert_relative_eq!(f.values[3], 0.5, max_relative = 1e-9);
            for (i, v) in f.values.iter().enumerate() {
                if i != 3 {
                    assert!(*v < 1e-12, "band {i} leaked {v}");
                }
            }
        }
    }

    #[test]
    fn off_bin_tone_matches_naive_dft_oracle() {
        // 10.5 Hz sits a quarter-bin off the 2 Hz grid; rectangular-window
        // leakage keeps ~81% of A²/2 in alpha2 and the rest in neighbors.
        let seg = sine(10.5, 1.0, 2048, 1.0);
        let table = BandTable::default();
        let frames = frame_band_powers(&seg, &table).unwrap();
        assert_eq!(frames.len(), 2);
        for (k, f) in frames.iter().enumerate() {
            let start = k * 1024;
            let oracle = naive_band_powers(&seg.samples()[start..start + 1024], 2048, &table);
            for b in 0..BAND_COUNT {
                assert_relative_eq!(f.values[b], oracle[b], max_relative = 1e-6, epsilon = 1e-12);
            }
            // dominant band is alpha2; every other band is under 5% of it
            for b in 0..BAND_COUNT {
                if b != 3 {
                    assert!(f.values[b] < 0.05 * f.values[3]);
                }
            }
            assert_relative_eq!(f.values[3], 0.405, max_relative = 0.01);
        }
    }

    #[test]
    fn zero_signal_yields_zero_powers() {
        let seg = RawSegment::new(vec![0.0; 2048], 2048, "A1").unwrap();
        let frames = frame_band_powers(&seg, &BandTable::default()).unwrap();
        assert_eq!(frames.len(), 2);
        for f in &frames {
            assert!(f.values.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn short_segment_yields_empty_output() {
        let seg = sine(10.0, 1.0, 2048, 0.4);
        let frames = frame_band_powers(&seg, &BandTable::default()).unwrap();
        assert!(frames.is_empty());
    }

    #[test]
    fn non_finite_samples_are_a_data_error() {
        let seg = RawSegment::new(vec![0.0, f64::NAN, 1.0], 2048, "A1").unwrap();
        assert!(matches!(
            frame_band_powers(&seg, &BandTable::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn energy_is_conserved_per_frame() {
        let seg = sine(10.5, 2.0, 2048, 1.5);
        let frames = frame_band_powers(&seg, &BandTable::default()).unwrap();
        for (k, f) in frames.iter().enumerate() {
            let total = total_frame_power(&seg.samples()[k * 1024..(k + 1) * 1024]);
            let sum: f64 = f.values.iter().sum();
            assert!(sum <= total * (1.0 + 1e-12), "sum {sum} > total {total}");
        }
    }

    #[test]
    fn determinism_is_bitwise() {
        let seg = sine(12.3, 0.7, 2048, 1.0);
        let a = frame_band_powers(&seg, &BandTable::default()).unwrap();
        let b = frame_band_powers(&seg, &BandTable::default()).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            for (u, v) in x.values.iter().zip(y.values.iter()) {
                assert_eq!(u.to_bits(), v.to_bits());
            }
        }
    }

    #[test]
    fn hann_window_is_available() {
        let seg = sine(10.0, 1.0, 2048, 1.0);
        let frames =
            frame_band_powers_with(&seg, &BandTable::default(), FrameWindow::Hann).unwrap();
        assert_eq!(frames.len(), 2);
        // the Hann mainlobe spreads one bin each side (quarter power), so the
        // tone band still dominates but less sharply than rectangular
        let f = &frames[0];
        let rest = f.values.iter().enumerate().filter(|(i, _)| *i != 3).map(|(_, v)| *v);
        assert!(f.values[3] > 3.0 * rest.fold(0.0, f64::max));
    }

    #[test]
    fn band_table_validation() {
        let mut bands = *BandTable::default().bands();
        bands[1] = Band { low_hz: 2.0, high_hz: 2.5 }; // overlaps delta's 0.5..2.75
        assert!(BandTable::new(bands).is_err());

        let mut bands = *BandTable::default().bands();
        bands[0] = Band { low_hz: 3.0, high_hz: 2.0 };
        assert!(BandTable::new(bands).is_err());
    }

    #[test]
    fn band_table_config_round_trip() {
        let table = BandTable::default();
        let parsed = BandTable::from_config_str(&table.to_config_string()).unwrap();
        assert_eq!(table, parsed);

        let err = BandTable::from_config_str("delta=0.5:2.75\n").unwrap_err();
        assert!(err.to_string().contains("theta"), "{err}");
    }

    #[test]
    fn raw_segment_invariants() {
        assert!(RawSegment::new(vec![], 2048, "A1").is_err());
        assert!(RawSegment::new(vec![1.0], 0, "A1").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn frame_count_is_floor_of_twice_duration(n in 1usize..6000, fs in 16u32..4096) {
            let seg = RawSegment::new(vec![0.25; n], fs, "A1").unwrap();
            let frames = frame_band_powers(&seg, &BandTable::default()).unwrap();
            let expected = (2 * n as u64 / fs as u64) as usize;
            prop_assert_eq!(frames.len(), expected);
        }

        #[test]
        fn scaling_samples_scales_powers_quadratically(c in 0.01f64..100.0, freq in 1.0f64..40.0) {
            let base = sine(freq, 1.0, 512, 1.0);
            let scaled = RawSegment::new(
                base.samples().iter().map(|v| v * c).collect(),
                512,
                "A1",
            ).unwrap();
            let p1 = frame_band_powers(&base, &BandTable::default()).unwrap();
            let p2 = frame_band_powers(&scaled, &BandTable::default()).unwrap();
            for (a, b) in p1.iter().zip(p2.iter()) {
                for (u, v) in a.values.iter().zip(b.values.iter()) {
                    let expected = u * c * c;
                    if expected.abs() > 1e-300 {
                        prop_assert!((v - expected).abs() <= 1e-9 * expected.abs().max(*v));
                    }
                }
            }
        }
    }
}
