use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SimError;
use crate::analysis::{AnalysisConfig, DimensionKind, RoomAnalysis};
use crate::engine::EliteSnapshot;
use crate::level::Room;

/// How a synthetic designer picks suggestions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// The elite scoring highest on one dimension.
    MaxDimension(DimensionKind),
    /// The elite with the most meso-patterns.
    PatternSeeker,
    /// A uniformly random elite.
    Random,
    /// Maximizes `from` before episode `switch_episode` and `to` from then on.
    Drifting {
        from: DimensionKind,
        to: DimensionKind,
        switch_episode: u64,
    },
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::MaxDimension(d) => write!(f, "max_dimension:{d}"),
            Policy::PatternSeeker => f.write_str("pattern_seeker"),
            Policy::Random => f.write_str("random"),
            Policy::Drifting {
                from,
                to,
                switch_episode,
            } => write!(f, "drifting:{from}:{to}:{switch_episode}"),
        }
    }
}

/// Accepts `max_dimension:symmetry`, `MAX_DIMENSION(SYMMETRY)`,
/// `pattern_seeker`, `random`, `drifting:symmetry:leniency:5` and
/// `DRIFTING(SYMMETRY->LENIENCY,5)`.
impl FromStr for Policy {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        let bad = || SimError::UnknownScenario(s.to_string());
        let norm = s.trim().to_ascii_lowercase();
        let (head, rest) = match norm.find([':', '(']) {
            Some(i) => (&norm[..i], norm[i + 1..].trim_end_matches(')')),
            None => (norm.as_str(), ""),
        };
        let args: Vec<&str> = rest
            .split([':', ',', '>'])
            .map(|a| a.trim().trim_end_matches('-').trim())
            .filter(|a| !a.is_empty())
            .collect();
        let dim = |a: &str| a.parse::<DimensionKind>().map_err(|_| bad());
        match (head, args.as_slice()) {
            ("max_dimension", [d]) => Ok(Policy::MaxDimension(dim(d)?)),
            ("pattern_seeker", []) => Ok(Policy::PatternSeeker),
            ("random", []) => Ok(Policy::Random),
            ("drifting", [a, b, n]) => Ok(Policy::Drifting {
                from: dim(a)?,
                to: dim(b)?,
                switch_episode: n.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

fn argmax_row_major(scores: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (idx, s) in scores {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((idx, s));
        }
    }
    best.map(|(idx, _)| idx)
}

/// The cell `policy` picks on `snapshot` during `episode`. Dimension values
/// are recomputed from each elite's tiles against `target`.
pub fn synthetic_select<R: Rng + ?Sized>(
    policy: Policy,
    snapshot: &EliteSnapshot,
    target: &Room,
    episode: u64,
    analysis: &AnalysisConfig,
    rng: &mut R,
) -> Result<(usize, usize), SimError> {
    let cols = snapshot.granularity.1;
    let occupied: Vec<usize> = (0..snapshot.cells.len())
        .filter(|&i| snapshot.cells[i].is_some())
        .collect();
    if occupied.is_empty() {
        return Err(SimError::EmptySnapshot);
    }
    let score = |idx: usize, f: &dyn Fn(&RoomAnalysis) -> f64| {
        let elite = snapshot.cells[idx].as_ref().unwrap();
        let a = RoomAnalysis::new(&elite.genotype, target.doors());
        f(&a)
    };
    let by_dimension = |d: DimensionKind| {
        argmax_row_major(occupied.iter().map(|&i| {
            (
                i,
                score(i, &|a| {
                    a.dimension_value(d, Some(target.grid()), analysis).unwrap_or(0.0)
                }),
            )
        }))
    };
    let idx = match policy {
        Policy::MaxDimension(d) => by_dimension(d),
        Policy::Drifting {
            from,
            to,
            switch_episode,
        } => by_dimension(if episode < switch_episode { from } else { to }),
        Policy::PatternSeeker => argmax_row_major(occupied.iter().map(|&i| (i, score(i, &|a| a.meso().len() as f64)))),
        Policy::Random => Some(occupied[rng.random_range(0..occupied.len())]),
    }
    .expect("occupied is non-empty");
    Ok((idx / cols, idx % cols))
}

/// A scripted designer: a policy plus its own random stream.
#[derive(Debug, Clone)]
pub struct SyntheticDesigner {
    pub policy: Policy,
    rng: ChaCha8Rng,
}

impl SyntheticDesigner {
    pub fn new(policy: Policy, seed: u64) -> Self {
        SyntheticDesigner {
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn select(
        &mut self,
        snapshot: &EliteSnapshot,
        target: &Room,
        episode: u64,
        analysis: &AnalysisConfig,
    ) -> Result<(usize, usize), SimError> {
        synthetic_select(self.policy, snapshot, target, episode, analysis, &mut self.rng)
    }
}
