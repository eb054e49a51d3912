//! Synthetic data with planted contamination, CSV ingestion, and
//! outlier-detection scoring.

mod io;
mod scoring;
mod synth;

pub use io::{load_csv, parse_csv, standardize_rows, write_csv, CsvData, CsvFormat};
pub use scoring::{score_detection, score_loss_ranking, DetectionScore};
pub use synth::{
    contaminate_labels, gen_homography, gen_pca, gen_softmax, gen_trimmed_ls, HomographyScene,
    LsDataset, PcaDataset, SoftmaxDataset,
};

/// Kept count `h = n (1 - (true_frac + 0.10))`: the trimmed fraction
/// over-estimates the contamination by ten percentage points.
pub fn overestimated_keep(n: usize, true_frac: f64) -> f64 {
    (n as f64 * (1.0 - (true_frac + 0.10))).clamp(0.0, n as f64)
}
