use rand::seq::SliceRandom;
use rand::Rng;

use super::{encode_room, AdHocMatrix, PreferenceClass, PreferenceError, NUM_CLASSES};
use crate::level::TileGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub input: Vec<f64>,
    pub label: PreferenceClass,
    /// Grid cell the individual came from.
    pub cell: (usize, usize),
}

/// Train/test split of one selection event, stratified by class.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreferenceDataset {
    pub train: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
}

fn histogram(samples: &[LabeledSample]) -> [usize; NUM_CLASSES] {
    let mut h = [0; NUM_CLASSES];
    for s in samples {
        h[s.label.index()] += 1;
    }
    h
}

impl PreferenceDataset {
    pub fn len(&self) -> usize {
        self.train.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn train_histogram(&self) -> [usize; NUM_CLASSES] {
        histogram(&self.train)
    }

    pub fn test_histogram(&self) -> [usize; NUM_CLASSES] {
        histogram(&self.test)
    }

    pub fn samples(&self) -> impl Iterator<Item = &LabeledSample> {
        self.train.iter().chain(&self.test)
    }
}

/// Labels every given member with its cell's matrix value, shuffles, and
/// sends `round(test_fraction * n_c)` samples of each class `c` to the test split.
pub fn build_dataset<'a, R: Rng + ?Sized>(
    members: impl IntoIterator<Item = ((usize, usize), &'a TileGrid)>,
    matrix: &AdHocMatrix,
    input_len: usize,
    test_fraction: f64,
    rng: &mut R,
) -> Result<PreferenceDataset, PreferenceError> {
    let (rows, cols) = matrix.shape();
    let mut samples = Vec::new();
    for ((i, j), grid) in members {
        if i >= rows || j >= cols {
            return Err(PreferenceError::OutOfRange { i, j, rows, cols });
        }
        samples.push(LabeledSample {
            input: encode_room(grid, input_len)?,
            label: matrix.class_at(i, j),
            cell: (i, j),
        });
    }
    if samples.is_empty() {
        return Err(PreferenceError::EmptyGrid);
    }
    samples.shuffle(rng);

    let counts = histogram(&samples);
    let mut quota = [0usize; NUM_CLASSES];
    for c in 0..NUM_CLASSES {
        quota[c] = (counts[c] as f64 * test_fraction).round() as usize;
    }
    let mut dataset = PreferenceDataset::default();
    for sample in samples {
        let c = sample.label.index();
        if quota[c] > 0 {
            quota[c] -= 1;
            dataset.test.push(sample);
        } else {
            dataset.train.push(sample);
        }
    }
    Ok(dataset)
}
