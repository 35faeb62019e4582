//! Seeded synthetic fixtures: 3-class Gaussian blobs in band-feature space,
//! organized into subject sessions so both frame- and window-mode models can
//! train on the same material.

use crate::dataset::{ClassLabel, FrameRow, LabeledDataset, Provenance, CLASS_COUNT};
use crate::features::{FrameFeatures, Gender, FEATURE_DIM};
use crate::signal::BAND_COUNT;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec {
    pub n: usize,
    pub seed: u64,
    /// Per-dimension Gaussian spread within a class.
    pub sigma: f64,
    /// Pairwise distance between class centers in band space.
    pub center_distance: f64,
    /// Frames per synthetic session (sessions are class-pure).
    pub session_len: usize,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self { n: 1500, seed: 42, sigma: 0.1, center_distance: 5.0, session_len: 20 }
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller on open-interval uniforms
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Equidistant class centers in the first two band dimensions.
fn centers(distance: f64) -> [[f64; BAND_COUNT]; CLASS_COUNT] {
    let mut c = [[0.0; BAND_COUNT]; CLASS_COUNT];
    c[1][0] = distance;
    c[2][0] = distance / 2.0;
    c[2][1] = distance * 3f64.sqrt() / 2.0;
    c
}

/// Generates `n` labeled frames in class-pure sessions of `session_len`
/// frames. Band dimensions carry the blob signal; demographics rotate per
/// subject independently of class, so only band dimensions are informative.
pub fn gaussian_blobs(spec: &BlobSpec) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers = centers(spec.center_distance);
    let mut ds = LabeledDataset::default();
    let per_class = spec.n / CLASS_COUNT;
    let remainder = spec.n % CLASS_COUNT;

    for class in 0..CLASS_COUNT {
        let count = per_class + usize::from(class < remainder);
        for i in 0..count {
            let session_ord = i / spec.session_len;
            let frame_index = i % spec.session_len;
            let subject = format!("blob{class}");
            let session = format!("s{session_ord}");
            let mut values = [0.0; FEATURE_DIM];
            for (d, v) in values.iter_mut().take(BAND_COUNT).enumerate() {
                *v = centers[class][d] + spec.sigma * standard_normal(&mut rng);
            }
            // demographics keyed off the session, uncorrelated with class
            let gender = if session_ord % 2 == 0 { Gender::Female } else { Gender::Male };
            let one_hot = gender.one_hot();
            values[8] = one_hot[0];
            values[9] = one_hot[1];
            values[10] = 18.0 + (session_ord % 12) as f64;

            ds.frames.push(FrameRow {
                features: FrameFeatures::from_values(values, subject, frame_index)
                    .expect("finite by construction"),
                label: ClassLabel::from_index(class).expect("class in range"),
                session,
                source: Provenance::BandCsv,
            });
        }
    }
    ds
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_balance() {
        let ds = gaussian_blobs(&BlobSpec { n: 1500, ..Default::default() });
        assert_eq!(ds.frames.len(), 1500);
        assert_eq!(ds.class_counts(), [500, 500, 500]);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = gaussian_blobs(&BlobSpec::default());
        let b = gaussian_blobs(&BlobSpec::default());
        for (x, y) in a.frames.iter().zip(b.frames.iter()) {
            assert_eq!(x.features.values(), y.features.values());
        }
    }

    #[test]
    fn sessions_are_class_pure_and_windowable() {
        let mut ds = gaussian_blobs(&BlobSpec { n: 300, ..Default::default() });
        ds.build_windows(20, 11).unwrap();
        assert_eq!(ds.windows.len(), 15); // 5 sessions per class, 1 window each
        for w in &ds.windows {
            assert_eq!(w.window.width(), 20);
        }
    }

    #[test]
    fn centers_are_equidistant() {
        let c = centers(5.0);
        let dist = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        };
        assert!((dist(&c[0], &c[1]) - 5.0).abs() < 1e-12);
        assert!((dist(&c[0], &c[2]) - 5.0).abs() < 1e-12);
        assert!((dist(&c[1], &c[2]) - 5.0).abs() < 1e-12);
    }
}
