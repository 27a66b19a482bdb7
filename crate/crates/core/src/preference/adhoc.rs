use serde::{Deserialize, Serialize};

use super::{PreferenceClass, PreferenceError};

/// How grid steps between two cells are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepMetric {
    /// Diagonal neighbours are one step away.
    #[default]
    Chebyshev,
    Manhattan,
}

impl StepMetric {
    pub fn steps(self, a: (usize, usize), b: (usize, usize)) -> usize {
        let di = a.0.abs_diff(b.0);
        let dj = a.1.abs_diff(b.1);
        match self {
            StepMetric::Chebyshev => di.max(dj),
            StepMetric::Manhattan => di + dj,
        }
    }
}

/// Estimated preference of every cell after the designer applied the
/// suggestion at `origin`: 1.0 there, 0.2 less per step, floored at 0.0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdHocMatrix {
    rows: usize,
    cols: usize,
    origin: (usize, usize),
    classes: Vec<PreferenceClass>,
}

impl AdHocMatrix {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn origin(&self) -> (usize, usize) {
        self.origin
    }

    pub fn class_at(&self, i: usize, j: usize) -> PreferenceClass {
        self.classes[i * self.cols + j]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.class_at(i, j).value()
    }
}

pub fn build_adhoc_matrix(
    selected: (usize, usize),
    shape: (usize, usize),
    metric: StepMetric,
) -> Result<AdHocMatrix, PreferenceError> {
    let (rows, cols) = shape;
    if selected.0 >= rows || selected.1 >= cols {
        return Err(PreferenceError::OutOfRange {
            i: selected.0,
            j: selected.1,
            rows,
            cols,
        });
    }
    let mut classes = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            classes.push(PreferenceClass::from_steps(metric.steps((i, j), selected)));
        }
    }
    Ok(AdHocMatrix {
        rows,
        cols,
        origin: selected,
        classes,
    })
}
