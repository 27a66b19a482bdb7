//! Variation operators and lock/door repair.

use rand::Rng;

use crate::level::{Room, TileGrid, TileKind};

/// Uniform crossover: each tile comes from `a` with probability `rate`, else from `b`.
pub fn crossover<R: Rng + ?Sized>(a: &TileGrid, b: &TileGrid, rate: f64, rng: &mut R) -> TileGrid {
    let mut child = a.clone();
    for (dst, &src) in child.tiles_mut().iter_mut().zip(b.tiles()) {
        if !rng.random_bool(rate) {
            *dst = src;
        }
    }
    child
}

/// Resamples each tile uniformly among the four kinds with probability `rate`.
pub fn mutate<R: Rng + ?Sized>(grid: &mut TileGrid, rate: f64, rng: &mut R) {
    if rate <= 0.0 {
        return;
    }
    for tile in grid.tiles_mut() {
        if rng.random_bool(rate) {
            *tile = TileKind::ALL[rng.random_range(0..TileKind::ALL.len())];
        }
    }
}

/// Copies locked tiles from the target and clears every door tile to floor.
pub fn repair(grid: &mut TileGrid, target: &Room) {
    let source = target.grid().tiles();
    for (k, tile) in grid.tiles_mut().iter_mut().enumerate() {
        if target.locks()[k] {
            *tile = source[k];
        }
    }
    for (x, y) in target.door_positions() {
        grid.set(x, y, TileKind::Floor);
    }
}
