use std::sync::Arc;

use rand::Rng;

use super::operators::{crossover, mutate, repair};
use super::{EliteSnapshot, EngineConfig, EngineError, Individual};
use crate::analysis::{DimensionKind, RoomAnalysis};
use crate::level::{Room, TileGrid};
use crate::preference::{BlendMode, PreferenceModel};

/// One MAP-Elites cell: a feasible and an infeasible population.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Cell {
    pub(crate) feasible: Vec<Individual>,
    pub(crate) infeasible: Vec<Individual>,
    pub(crate) elite: Option<usize>,
}

impl Cell {
    pub fn feasible(&self) -> &[Individual] {
        &self.feasible
    }

    pub fn infeasible(&self) -> &[Individual] {
        &self.infeasible
    }

    pub fn elite(&self) -> Option<&Individual> {
        self.elite.map(|i| &self.feasible[i])
    }

    pub fn is_empty(&self) -> bool {
        self.feasible.is_empty() && self.infeasible.is_empty()
    }

    pub fn len(&self) -> usize {
        self.feasible.len() + self.infeasible.len()
    }

    fn refresh_elite(&mut self) {
        self.elite = self
            .feasible
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.feasible_rank(b.1))
            .map(|(i, _)| i);
    }
}

/// Outcome of inserting one individual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub cell: (usize, usize),
    pub feasible: bool,
    /// False when the newcomer itself was the member evicted.
    pub accepted: bool,
    /// Birth stamp of the evicted member, if the population overflowed.
    pub evicted: Option<u64>,
    pub became_elite: bool,
}

/// What happened when the target room changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retarget {
    /// Same shape: every individual was repaired, re-evaluated and re-sorted.
    Repaired,
    /// Shape changed (or the grid was empty): populations were rebuilt from the target.
    Reseeded,
}

pub(crate) fn bin(value: f64, bins: usize) -> usize {
    ((value.clamp(0.0, 1.0) * bins as f64).floor() as usize).min(bins - 1)
}

/// `i = min(floor(v1 * M), M - 1)`, `j = min(floor(v2 * N), N - 1)`.
pub fn cell_index(values: (f64, f64), granularity: (usize, usize)) -> (usize, usize) {
    (bin(values.0, granularity.0), bin(values.1, granularity.1))
}

/// Constrained MAP-Elites archive with per-cell feasible/infeasible populations.
#[derive(Debug, Clone)]
pub struct EliteGrid {
    config: EngineConfig,
    cells: Vec<Cell>,
    dims: (DimensionKind, DimensionKind),
    generation: u64,
    target: Option<Room>,
    model: Arc<PreferenceModel>,
    next_birth: u64,
}

impl EliteGrid {
    pub fn new(config: EngineConfig, model: Arc<PreferenceModel>) -> Result<Self, EngineError> {
        if config.rows == 0 || config.cols == 0 || config.feasible_cap == 0 || config.infeasible_cap == 0 {
            return Err(EngineError::InvalidConfig(
                "grid granularity and caps must be positive".into(),
            ));
        }
        let dims = config.dimensions;
        if dims.0 == dims.1 {
            return Err(EngineError::DuplicateDimension(dims.0));
        }
        Ok(EliteGrid {
            cells: vec![Cell::default(); config.rows * config.cols],
            dims,
            generation: 0,
            target: None,
            model,
            next_birth: 1,
            config,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn granularity(&self) -> (usize, usize) {
        (self.config.rows, self.config.cols)
    }

    pub fn dims(&self) -> (DimensionKind, DimensionKind) {
        self.dims
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn target(&self) -> Option<&Room> {
        self.target.as_ref()
    }

    pub fn model(&self) -> &Arc<PreferenceModel> {
        &self.model
    }

    pub fn cell(&self, i: usize, j: usize) -> &Cell {
        &self.cells[i * self.config.cols + j]
    }

    fn cell_mut(&mut self, (i, j): (usize, usize)) -> &mut Cell {
        &mut self.cells[i * self.config.cols + j]
    }

    /// Cells in row-major order with their indices.
    pub fn cells(&self) -> impl Iterator<Item = ((usize, usize), &Cell)> {
        let cols = self.config.cols;
        self.cells
            .iter()
            .enumerate()
            .map(move |(k, c)| ((k / cols, k % cols), c))
    }

    pub fn elite(&self, i: usize, j: usize) -> Option<&Individual> {
        self.cell(i, j).elite()
    }

    pub fn population(&self) -> usize {
        self.cells.iter().map(Cell::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(Cell::is_empty)
    }

    /// Every feasible member (elites included) with its cell, row-major.
    pub fn feasible_members(&self) -> impl Iterator<Item = ((usize, usize), &Individual)> {
        self.cells()
            .flat_map(|(idx, cell)| cell.feasible.iter().map(move |ind| (idx, ind)))
    }

    fn target_or_err(&self) -> Result<&Room, EngineError> {
        self.target.as_ref().ok_or(EngineError::NoPopulation)
    }

    /// Scores a genotype against the current target, dimensions and model.
    pub fn evaluate(&self, genotype: TileGrid) -> Result<Individual, EngineError> {
        let target = self.target_or_err()?;
        if !genotype.same_shape(target.grid()) {
            return Err(EngineError::ShapeMismatch {
                expected: (target.width(), target.height()),
                found: (genotype.width(), genotype.height()),
            });
        }
        let analysis = RoomAnalysis::new(&genotype, target.doors());
        let feasible = analysis.is_feasible();
        let cfg = &self.config.analysis;
        let objective = if feasible {
            analysis.objective_unchecked(cfg)
        } else {
            analysis.infeasibility_fitness()
        };
        let descriptor = analysis.descriptor(self.dims, Some(target.grid()), cfg)?;
        drop(analysis);
        let mut ind = Individual {
            genotype,
            feasible,
            descriptor,
            objective,
            combined: objective,
            blend: None,
            birth: 0,
        };
        self.score(&mut ind);
        Ok(ind)
    }

    /// Recomputes `combined` for a feasible individual with the current model.
    fn score(&self, ind: &mut Individual) {
        ind.blend = None;
        ind.combined = ind.objective;
        if !ind.feasible || ind.genotype.len() != self.model.input_len() {
            return;
        }
        // A model with zero test accuracy carries zero weight under the weighted blend.
        if self.config.blend == BlendMode::Weighted && self.model.last_test_acc() == 0.0 {
            return;
        }
        if let Ok(b) = self.model.blend(&ind.genotype, ind.objective, self.config.blend) {
            ind.combined = b.combined;
            ind.blend = Some(b);
        }
    }

    /// Adds a freshly evaluated individual, stamping it as the newest member.
    pub fn insert(&mut self, mut ind: Individual) -> Result<Placement, EngineError> {
        if let Some(target) = &self.target {
            if !ind.genotype.same_shape(target.grid()) {
                return Err(EngineError::ShapeMismatch {
                    expected: (target.width(), target.height()),
                    found: (ind.genotype.width(), ind.genotype.height()),
                });
            }
        }
        ind.birth = self.next_birth;
        self.next_birth += 1;
        Ok(self.place(ind))
    }

    fn place(&mut self, ind: Individual) -> Placement {
        let idx = cell_index(ind.descriptor.values, self.granularity());
        let feasible = ind.feasible;
        let birth = ind.birth;
        let (feasible_cap, infeasible_cap) = (self.config.feasible_cap, self.config.infeasible_cap);
        let cell = self.cell_mut(idx);
        let previous_elite = cell.elite().map(|e| e.birth);
        let mut evicted = None;
        if feasible {
            cell.feasible.push(ind);
            if cell.feasible.len() > feasible_cap {
                let worst = cell
                    .feasible
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.feasible_rank(b.1))
                    .map(|(i, _)| i)
                    .unwrap();
                evicted = Some(cell.feasible.remove(worst).birth);
            }
            cell.refresh_elite();
        } else {
            cell.infeasible.push(ind);
            if cell.infeasible.len() > infeasible_cap {
                let worst = cell
                    .infeasible
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.infeasible_rank(b.1))
                    .map(|(i, _)| i)
                    .unwrap();
                evicted = Some(cell.infeasible.remove(worst).birth);
            }
        }
        let elite_now = cell.elite().map(|e| e.birth);
        Placement {
            cell: idx,
            feasible,
            accepted: evicted != Some(birth),
            evicted,
            became_elite: elite_now == Some(birth) && previous_elite != Some(birth),
        }
    }

    fn take_all(&mut self) -> Vec<Individual> {
        let mut all = Vec::with_capacity(self.population());
        for cell in &mut self.cells {
            all.append(&mut cell.feasible);
            all.append(&mut cell.infeasible);
            cell.elite = None;
        }
        all
    }

    /// Empties the grid and places `individuals` again in order, keeping their birth stamps.
    fn rebuild(&mut self, individuals: Vec<Individual>) {
        for cell in &mut self.cells {
            *cell = Cell::default();
        }
        for ind in individuals {
            self.place(ind);
        }
    }

    /// Replaces the grid contents with mutated copies of the target.
    pub fn seed<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), EngineError> {
        let target = self.target_or_err()?.clone();
        for cell in &mut self.cells {
            *cell = Cell::default();
        }
        for _ in 0..self.config.seed_population {
            let mut genotype = target.grid().clone();
            mutate(&mut genotype, self.config.seed_mutation_rate, rng);
            repair(&mut genotype, &target);
            let ind = self.evaluate(genotype)?;
            self.insert(ind)?;
        }
        Ok(())
    }

    /// Produces, evaluates and inserts one batch of offspring. An empty grid
    /// with a target is seeded first.
    pub fn step_generation<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), EngineError> {
        if self.is_empty() {
            self.seed(rng)?;
        }
        let target = self.target_or_err()?.clone();
        let occupied: Vec<usize> = (0..self.cells.len()).filter(|&k| !self.cells[k].is_empty()).collect();
        if occupied.is_empty() {
            return Err(EngineError::NoPopulation);
        }
        let mut offspring = Vec::with_capacity(self.config.offspring_per_generation);
        for _ in 0..self.config.offspring_per_generation {
            let cell = &self.cells[occupied[rng.random_range(0..occupied.len())]];
            let pool = if cell.feasible.is_empty() {
                &cell.infeasible
            } else {
                &cell.feasible
            };
            let a = &pool[rng.random_range(0..pool.len())].genotype;
            let b = &pool[rng.random_range(0..pool.len())].genotype;
            let mut child = crossover(a, b, self.config.crossover_rate, rng);
            mutate(&mut child, self.config.mutation_rate, rng);
            repair(&mut child, &target);
            offspring.push(child);
        }
        let evaluated = offspring
            .into_iter()
            .map(|g| self.evaluate(g))
            .collect::<Result<Vec<_>, _>>()?;
        for ind in evaluated {
            self.insert(ind)?;
        }
        self.generation += 1;
        Ok(())
    }

    /// Switches the active dimension pair, re-sorting every individual.
    pub fn set_dimensions(&mut self, dims: (DimensionKind, DimensionKind)) -> Result<(), EngineError> {
        if dims.0 == dims.1 {
            return Err(EngineError::DuplicateDimension(dims.0));
        }
        self.dims = dims;
        let mut all = self.take_all();
        if let Some(target) = &self.target {
            for ind in &mut all {
                let analysis = RoomAnalysis::new(&ind.genotype, target.doors());
                ind.descriptor = analysis.descriptor(dims, Some(target.grid()), &self.config.analysis)?;
            }
        }
        self.rebuild(all);
        Ok(())
    }

    /// Installs a new target room. Same-shaped populations are repaired
    /// against its locks and doors and re-evaluated; otherwise the grid is
    /// reseeded from the new target.
    pub fn set_target_room<R: Rng + ?Sized>(&mut self, room: Room, rng: &mut R) -> Result<Retarget, EngineError> {
        let same_shape = self.target.as_ref().is_some_and(|t| t.grid().same_shape(room.grid()));
        self.target = Some(room);
        if !same_shape || self.is_empty() {
            self.seed(rng)?;
            return Ok(Retarget::Reseeded);
        }
        let target = self.target.clone().unwrap();
        let all = self.take_all();
        let mut repaired = Vec::with_capacity(all.len());
        for ind in all {
            let mut genotype = ind.genotype;
            repair(&mut genotype, &target);
            let mut fresh = self.evaluate(genotype)?;
            fresh.birth = ind.birth;
            repaired.push(fresh);
        }
        self.rebuild(repaired);
        Ok(Retarget::Repaired)
    }

    pub fn set_locks<R: Rng + ?Sized>(&mut self, locks: Vec<bool>, rng: &mut R) -> Result<Retarget, EngineError> {
        let room = self.target_or_err()?.with_locks(locks)?;
        self.set_target_room(room, rng)
    }

    /// Installs a new model and rescores every feasible member.
    pub fn set_model(&mut self, model: Arc<PreferenceModel>) {
        self.model = model;
        let mut all = self.take_all();
        for ind in &mut all {
            self.score(ind);
        }
        self.rebuild(all);
    }

    /// Makes the elite at `cell` the new target and returns it as a room.
    pub fn apply_suggestion<R: Rng + ?Sized>(
        &mut self,
        cell: (usize, usize),
        rng: &mut R,
    ) -> Result<Room, EngineError> {
        let (rows, cols) = self.granularity();
        if cell.0 >= rows || cell.1 >= cols {
            return Err(EngineError::CellOutOfRange(cell));
        }
        let elite = self.elite(cell.0, cell.1).ok_or(EngineError::EmptyCell(cell))?;
        let room = self.target_or_err()?.with_grid(elite.genotype.clone())?;
        self.set_target_room(room.clone(), rng)?;
        Ok(room)
    }

    pub fn publish(&self) -> EliteSnapshot {
        EliteSnapshot::capture(self)
    }

    /// Checks the structural invariants; returns a description of the first violation.
    pub fn audit(&self) -> Result<(), String> {
        let target = self.target.as_ref();
        let doors = target.map(Room::door_positions).unwrap_or_default();
        for (idx, cell) in self.cells() {
            if cell.feasible.len() > self.config.feasible_cap || cell.infeasible.len() > self.config.infeasible_cap {
                return Err(format!("cell {idx:?} exceeds its population cap"));
            }
            for (ind, feasible) in cell
                .feasible
                .iter()
                .map(|i| (i, true))
                .chain(cell.infeasible.iter().map(|i| (i, false)))
            {
                if ind.feasible != feasible {
                    return Err(format!("cell {idx:?} holds a member in the wrong population"));
                }
                if ind.descriptor.dims != self.dims {
                    return Err(format!("cell {idx:?} holds a member described by stale dimensions"));
                }
                if cell_index(ind.descriptor.values, self.granularity()) != idx {
                    return Err(format!("member {} sits in {idx:?} but maps elsewhere", ind.birth));
                }
                if let Some(t) = target {
                    for (k, &locked) in t.locks().iter().enumerate() {
                        if locked && ind.genotype.tiles()[k] != t.grid().tiles()[k] {
                            return Err(format!("member {} violates lock at tile {k}", ind.birth));
                        }
                    }
                    for &(x, y) in &doors {
                        if !ind.genotype.get(x, y).is_walkable() || ind.genotype.get(x, y).is_entity() {
                            return Err(format!("member {} blocks the door at ({x}, {y})", ind.birth));
                        }
                    }
                }
            }
            match cell.elite() {
                Some(e) => {
                    if !e.feasible {
                        return Err(format!("elite of {idx:?} is infeasible"));
                    }
                    if cell.feasible.iter().any(|m| m.feasible_rank(e).is_gt()) {
                        return Err(format!("elite of {idx:?} is not the best feasible member"));
                    }
                }
                None if !cell.feasible.is_empty() => return Err(format!("cell {idx:?} lost its elite")),
                None => {}
            }
        }
        Ok(())
    }
}
