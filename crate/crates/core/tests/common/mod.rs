//! Generators shared by the integration tests.
#![allow(dead_code)]

use proptest::prelude::*;
use rand::Rng;
use roomcraft::level::{Door, Room, RoomEdit, Side, TileGrid, TileKind};
use roomcraft::sim::{DraftStep, DEFAULT_DRAFT};

pub const KINDS: [TileKind; 4] = [TileKind::Floor, TileKind::Wall, TileKind::Treasure, TileKind::Enemy];

pub fn random_grid(w: usize, h: usize, rng: &mut impl Rng) -> TileGrid {
    let tiles = (0..w * h).map(|_| KINDS[rng.random_range(0..4)]).collect();
    TileGrid::from_tiles(w, h, tiles).unwrap()
}

/// Random tiles, doors and locks; door tiles are forced to floor.
pub fn random_room(w: usize, h: usize, rng: &mut impl Rng) -> Room {
    let mut grid = random_grid(w, h, rng);
    let mut doors = Vec::new();
    for _ in 0..rng.random_range(1..=4) {
        let side = [Side::N, Side::S, Side::E, Side::W][rng.random_range(0..4)];
        let len = if matches!(side, Side::N | Side::S) { w } else { h };
        let door = Door::new(side, rng.random_range(0..len));
        let pos = door.position(w, h).unwrap();
        if doors.iter().any(|d: &Door| d.position(w, h) == Some(pos)) {
            continue;
        }
        grid.set(pos.0, pos.1, TileKind::Floor);
        doors.push(door);
    }
    let locks = (0..w * h).map(|_| rng.random_bool(0.1)).collect();
    Room::from_parts(grid, doors, locks).unwrap()
}

pub fn kind() -> impl Strategy<Value = TileKind> {
    prop::sample::select(KINDS.to_vec())
}

pub fn door(w: usize, h: usize) -> impl Strategy<Value = Door> {
    prop_oneof![
        (0..w).prop_map(|o| Door::new(Side::N, o)),
        (0..w).prop_map(|o| Door::new(Side::S, o)),
        (0..h).prop_map(|o| Door::new(Side::W, o)),
        (0..h).prop_map(|o| Door::new(Side::E, o)),
    ]
}

/// Valid rooms between 3x3 and 14x9.
pub fn room() -> impl Strategy<Value = Room> {
    (3usize..15, 3usize..10)
        .prop_flat_map(|(w, h)| {
            (
                Just((w, h)),
                prop::collection::vec(kind(), w * h),
                prop::collection::vec(door(w, h), 1..5),
                prop::collection::vec(any::<bool>(), w * h),
            )
        })
        .prop_map(|((w, h), tiles, doors, locks)| {
            let mut grid = TileGrid::from_tiles(w, h, tiles).unwrap();
            let mut unique: Vec<Door> = Vec::new();
            for d in doors {
                let pos = d.position(w, h).unwrap();
                if !unique.iter().any(|u| u.position(w, h) == Some(pos)) {
                    grid.set(pos.0, pos.1, TileKind::Floor);
                    unique.push(d);
                }
            }
            Room::from_parts(grid, unique, locks).unwrap()
        })
}

/// The default room after the scripted draft used by the simulator.
pub fn drafted_room() -> Room {
    let mut room = Room::default_room();
    for step in DEFAULT_DRAFT {
        let edit = match *step {
            DraftStep::Paint(x, y, kind) => RoomEdit::SetTile { x, y, kind },
            DraftStep::Lock(x, y) => RoomEdit::ToggleLock { x, y },
        };
        room = room.apply_edit(edit).unwrap();
    }
    room
}

/// Horizontal mirror (x -> w - 1 - x) of a grid.
pub fn mirror(grid: &TileGrid) -> TileGrid {
    let (w, h) = (grid.width(), grid.height());
    let mut out = grid.clone();
    for y in 0..h {
        for x in 0..w {
            out.set(w - 1 - x, y, grid.get(x, y));
        }
    }
    out
}
