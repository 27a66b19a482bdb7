use super::PreferenceError;
use crate::level::{TileGrid, TileKind};

/// One scalar per tile: floor 0, wall 1/3, treasure 2/3, enemy 1.
pub fn encode_tile(kind: TileKind) -> f64 {
    match kind {
        TileKind::Floor => 0.0,
        TileKind::Wall => 1.0 / 3.0,
        TileKind::Treasure => 2.0 / 3.0,
        TileKind::Enemy => 1.0,
    }
}

/// Row-major encoding of a genotype for a model with `input_len` inputs.
pub fn encode_room(grid: &TileGrid, input_len: usize) -> Result<Vec<f64>, PreferenceError> {
    if grid.len() != input_len {
        return Err(PreferenceError::ShapeMismatch {
            expected: input_len,
            found: grid.len(),
        });
    }
    Ok(grid.tiles().iter().map(|&t| encode_tile(t)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_room_encodes_to_zeros() {
        let grid = TileGrid::filled(13, 7, TileKind::Floor);
        assert_eq!(encode_room(&grid, 91).unwrap(), vec![0.0; 91]);
    }

    #[test]
    fn enemy_in_corner() {
        let mut grid = TileGrid::filled(13, 7, TileKind::Floor);
        grid.set(0, 0, TileKind::Enemy);
        let v = encode_room(&grid, 91).unwrap();
        assert_eq!(v[0], 1.0);
        assert!(v[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn wrong_size_rejected() {
        let grid = TileGrid::filled(12, 7, TileKind::Floor);
        assert_eq!(
            encode_room(&grid, 91),
            Err(PreferenceError::ShapeMismatch {
                expected: 91,
                found: 84
            })
        );
    }
}
