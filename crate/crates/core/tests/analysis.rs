mod common;

use std::collections::VecDeque;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roomcraft::analysis::{
    dimension_value, infeasibility_fitness, is_feasible, objective_fitness, spatial_patterns, AnalysisConfig,
    AnalysisError, DimensionKind, RoomAnalysis, SpatialLabel,
};
use roomcraft::level::{Room, TileGrid, TileKind};

/// Component id of every walkable tile, by plain BFS.
fn flood(grid: &TileGrid) -> Vec<Option<usize>> {
    let (w, h) = (grid.width(), grid.height());
    let mut comp = vec![None; w * h];
    let mut next = 0;
    for start in 0..w * h {
        if comp[start].is_some() || !grid.tiles()[start].is_walkable() {
            continue;
        }
        comp[start] = Some(next);
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for (nx, ny) in [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)] {
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let n = ny as usize * w + nx as usize;
                if comp[n].is_none() && grid.tiles()[n].is_walkable() {
                    comp[n] = Some(next);
                    queue.push_back(n);
                }
            }
        }
        next += 1;
    }
    comp
}

/// (feasible, infeasibility fitness) computed from the definitions.
fn feasibility_oracle(room: &Room) -> (bool, f64) {
    let grid = room.grid();
    let w = grid.width();
    let comp = flood(grid);
    let doors: Vec<usize> = room
        .door_positions()
        .iter()
        .map(|&(x, y)| comp[y * w + x].unwrap())
        .collect();
    // Component holding the most doors, earliest door first on ties.
    let main = doors
        .iter()
        .copied()
        .max_by(|&a, &b| {
            let ca = doors.iter().filter(|&&d| d == a).count();
            let cb = doors.iter().filter(|&&d| d == b).count();
            ca.cmp(&cb).then_with(|| {
                let fa = doors.iter().position(|&d| d == a).unwrap();
                let fb = doors.iter().position(|&d| d == b).unwrap();
                fb.cmp(&fa)
            })
        })
        .unwrap();
    let mut pairs = 0;
    let mut connected = 0;
    for a in 0..doors.len() {
        for b in a + 1..doors.len() {
            pairs += 1;
            connected += usize::from(doors[a] == doors[b]);
        }
    }
    let entities: Vec<usize> = (0..grid.len()).filter(|&i| grid.tiles()[i].is_entity()).collect();
    let reachable = entities.iter().filter(|&&i| comp[i] == Some(main)).count();
    let door_term = if pairs == 0 {
        1.0
    } else {
        connected as f64 / pairs as f64
    };
    let entity_term = if entities.is_empty() {
        1.0
    } else {
        reachable as f64 / entities.len() as f64
    };
    (
        connected == pairs && reachable == entities.len(),
        0.5 * door_term + 0.5 * entity_term,
    )
}

fn spatial_oracle(grid: &TileGrid, x: usize, y: usize) -> Option<SpatialLabel> {
    let (w, h) = (grid.width() as i64, grid.height() as i64);
    let walk = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && grid.get(x as usize, y as usize).is_walkable();
    let (x, y) = (x as i64, y as i64);
    if !walk(x, y) {
        return None;
    }
    for x0 in x - 2..=x {
        for y0 in y - 2..=y {
            if (x0..x0 + 3).all(|xx| (y0..y0 + 3).all(|yy| walk(xx, yy))) {
                return Some(SpatialLabel::Chamber);
            }
        }
    }
    let degree = [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)]
        .iter()
        .filter(|&&(a, b)| walk(a, b))
        .count();
    Some(match degree {
        0 => SpatialLabel::Nothing,
        1 | 2 => SpatialLabel::Corridor,
        _ => SpatialLabel::Connector,
    })
}

#[test]
fn spatial_labels_match_brute_force_on_random_rooms() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for n in 0..1500 {
        let (w, h) = if n % 3 == 0 { (13, 7) } else { (3 + n % 12, 3 + n % 7) };
        let room = common::random_room(w, h, &mut rng);
        let spatial = spatial_patterns(&room);
        for y in 0..h {
            for x in 0..w {
                assert_eq!(
                    spatial.get(x, y),
                    spatial_oracle(room.grid(), x, y),
                    "room {n} tile ({x}, {y})"
                );
            }
        }
    }
}

#[test]
fn feasibility_matches_flood_fill_on_random_rooms() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let mut feasible = 0;
    for n in 0..2000 {
        let mut room = common::random_room(13, 7, &mut rng);
        if n % 2 == 0 {
            // Sparser walls so both outcomes are common.
            let mut grid = room.grid().clone();
            for k in 0..grid.len() {
                if rng.random_bool(0.6) {
                    grid.tiles_mut()[k] = TileKind::Floor;
                }
            }
            room = room.with_grid(grid).unwrap();
        }
        let (expect_feasible, expect_fitness) = feasibility_oracle(&room);
        assert_eq!(is_feasible(&room), expect_feasible, "room {n}");
        assert!(
            (infeasibility_fitness(&room) - expect_fitness).abs() < 1e-12,
            "room {n}"
        );
        feasible += usize::from(expect_feasible);
    }
    assert!(
        feasible > 100 && feasible < 1900,
        "only {feasible} feasible rooms; generator is degenerate"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn values_are_bounded(room in common::room(), other in common::room()) {
        let cfg = AnalysisConfig::default();
        for kind in DimensionKind::ALL {
            let target = (kind == DimensionKind::Similarity).then_some(&room);
            let v = dimension_value(&room, kind, target, &cfg).unwrap();
            prop_assert!((0.0..=1.0).contains(&v), "{kind:?} = {v}");
        }
        let f = infeasibility_fitness(&room);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert_eq!(is_feasible(&room), f == 1.0);
        match objective_fitness(&room, &cfg) {
            Ok(o) => prop_assert!((0.0..=1.0).contains(&o)),
            Err(e) => {
                prop_assert!(matches!(e, AnalysisError::InfeasibleInput));
                prop_assert!(!is_feasible(&room));
            }
        }
        if room.grid().same_shape(other.grid()) {
            let ab = dimension_value(&room, DimensionKind::Similarity, Some(&other), &cfg).unwrap();
            let ba = dimension_value(&other, DimensionKind::Similarity, Some(&room), &cfg).unwrap();
            prop_assert_eq!(ab, ba);
        }
    }

    #[test]
    fn symmetry_is_mirror_invariant(room in common::room()) {
        let cfg = AnalysisConfig::default();
        let a = RoomAnalysis::new(room.grid(), room.doors());
        let mirror = common::mirror(room.grid());
        let b = RoomAnalysis::new(&mirror, &[]);
        let va = a.dimension_value(DimensionKind::Symmetry, None, &cfg).unwrap();
        let vb = b.dimension_value(DimensionKind::Symmetry, None, &cfg).unwrap();
        prop_assert_eq!(va, vb);
        prop_assert_eq!(dimension_value(&room, DimensionKind::Similarity, Some(&room), &cfg).unwrap(), 1.0);
    }
}
