use serde::{Deserialize, Serialize};

use super::connectivity::neighbors4;
use crate::level::{TileGrid, TileKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SpatialLabel {
    Chamber,
    Corridor,
    Connector,
    Nothing,
}

/// Per-tile spatial label; `None` marks walls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpatialClassification {
    width: usize,
    height: usize,
    labels: Vec<Option<SpatialLabel>>,
    degrees: Vec<u8>,
}

impl SpatialClassification {
    /// A walkable tile is CHAMBER if some all-walkable 3x3 square covers it;
    /// otherwise it is labeled by its walkable 4-degree: >=3 CONNECTOR,
    /// 1-2 CORRIDOR, 0 NOTHING.
    pub fn classify(grid: &TileGrid) -> Self {
        let (w, h) = (grid.width(), grid.height());
        let walk = |x: usize, y: usize| grid.get(x, y).is_walkable();
        let mut chamber = vec![false; w * h];
        for y0 in 0..h.saturating_sub(2) {
            for x0 in 0..w.saturating_sub(2) {
                let open = (y0..y0 + 3).all(|y| (x0..x0 + 3).all(|x| walk(x, y)));
                if open {
                    for y in y0..y0 + 3 {
                        for x in x0..x0 + 3 {
                            chamber[y * w + x] = true;
                        }
                    }
                }
            }
        }
        let mut labels = vec![None; w * h];
        let mut degrees = vec![0u8; w * h];
        for y in 0..h {
            for x in 0..w {
                if !walk(x, y) {
                    continue;
                }
                let i = y * w + x;
                let degree = neighbors4(x, y, w, h).filter(|&(nx, ny)| walk(nx, ny)).count() as u8;
                degrees[i] = degree;
                labels[i] = Some(if chamber[i] {
                    SpatialLabel::Chamber
                } else {
                    match degree {
                        0 => SpatialLabel::Nothing,
                        1 | 2 => SpatialLabel::Corridor,
                        _ => SpatialLabel::Connector,
                    }
                });
            }
        }
        SpatialClassification {
            width: w,
            height: h,
            labels,
            degrees,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Option<SpatialLabel> {
        self.labels[y * self.width + x]
    }

    /// Number of walkable 4-neighbors.
    pub fn degree(&self, x: usize, y: usize) -> u8 {
        self.degrees[y * self.width + x]
    }

    pub fn count(&self, label: SpatialLabel) -> usize {
        self.labels.iter().filter(|l| **l == Some(label)).count()
    }

    pub fn walkable_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }

    pub fn labels(&self) -> &[Option<SpatialLabel>] {
        &self.labels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MesoKind {
    TreasureRoom,
    GuardRoom,
    Ambush,
    DeadEnd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MesoPattern {
    pub kind: MesoKind,
    pub tiles: Vec<(usize, usize)>,
}

/// 4-connected regions of chamber tiles, each in row-major order.
fn chamber_regions(spatial: &SpatialClassification) -> Vec<Vec<(usize, usize)>> {
    let (w, h) = (spatial.width, spatial.height);
    let is_chamber = |x: usize, y: usize| spatial.get(x, y) == Some(SpatialLabel::Chamber);
    let mut seen = vec![false; w * h];
    let mut regions = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if seen[y * w + x] || !is_chamber(x, y) {
                continue;
            }
            seen[y * w + x] = true;
            let mut stack = vec![(x, y)];
            let mut region = Vec::new();
            while let Some((cx, cy)) = stack.pop() {
                region.push((cx, cy));
                for (nx, ny) in neighbors4(cx, cy, w, h) {
                    if !seen[ny * w + nx] && is_chamber(nx, ny) {
                        seen[ny * w + nx] = true;
                        stack.push((nx, ny));
                    }
                }
            }
            region.sort_by_key(|&(x, y)| (y, x));
            regions.push(region);
        }
    }
    regions
}

/// Treasure and guard rooms per chamber region (in region order), then
/// ambushes and dead ends in row-major tile order.
pub(crate) fn find_meso_patterns(
    grid: &TileGrid,
    spatial: &SpatialClassification,
    doors: &[(usize, usize)],
) -> Vec<MesoPattern> {
    let mut out = Vec::new();
    for region in chamber_regions(spatial) {
        let treasures = region
            .iter()
            .filter(|&&(x, y)| grid.get(x, y) == TileKind::Treasure)
            .count();
        let enemies = region
            .iter()
            .filter(|&&(x, y)| grid.get(x, y) == TileKind::Enemy)
            .count();
        if treasures >= 2 {
            out.push(MesoPattern {
                kind: MesoKind::TreasureRoom,
                tiles: region.clone(),
            });
        }
        if treasures >= 1 && enemies >= 1 {
            out.push(MesoPattern {
                kind: MesoKind::GuardRoom,
                tiles: region,
            });
        }
    }
    let (w, h) = (grid.width(), grid.height());
    for y in 0..h {
        for x in 0..w {
            if grid.get(x, y) == TileKind::Enemy
                && doors.iter().any(|&(dx, dy)| dx.abs_diff(x) <= 1 && dy.abs_diff(y) <= 1)
            {
                out.push(MesoPattern {
                    kind: MesoKind::Ambush,
                    tiles: vec![(x, y)],
                });
            }
        }
    }
    for y in 0..h {
        for x in 0..w {
            if spatial.get(x, y) != Some(SpatialLabel::Corridor) || spatial.degree(x, y) != 1 {
                continue;
            }
            let near_door = doors.iter().any(|&(dx, dy)| dx.abs_diff(x) + dy.abs_diff(y) <= 1);
            if !near_door {
                out.push(MesoPattern {
                    kind: MesoKind::DeadEnd,
                    tiles: vec![(x, y)],
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::meso_patterns;
    use crate::level::{Door, Room, RoomEdit, Side};

    fn open_room() -> Room {
        Room::new(13, 7, vec![Door::new(Side::W, 3), Door::new(Side::E, 3)]).unwrap()
    }

    fn set(room: Room, x: usize, y: usize, kind: TileKind) -> Room {
        room.apply_edit(RoomEdit::SetTile { x, y, kind }).unwrap()
    }

    fn kinds(room: &Room) -> Vec<MesoKind> {
        meso_patterns(room).into_iter().map(|m| m.kind).collect()
    }

    #[test]
    fn open_room_is_all_chamber() {
        let s = SpatialClassification::classify(open_room().grid());
        assert_eq!(s.count(SpatialLabel::Chamber), 91);
        assert_eq!(s.walkable_count(), 91);
    }

    #[test]
    fn single_corridor_between_doors() {
        let base = open_room();
        let mut grid = TileGrid::filled(13, 7, TileKind::Wall);
        for x in 0..13 {
            grid.set(x, 3, TileKind::Floor);
        }
        let room = base.with_grid(grid).unwrap();
        let s = SpatialClassification::classify(room.grid());
        assert_eq!(s.count(SpatialLabel::Corridor), 13);
        assert_eq!(s.walkable_count(), 13);
        // both ends sit on doors, so neither is a dead end
        assert!(kinds(&room).is_empty());
    }

    #[test]
    fn isolated_floor_is_nothing() {
        let base = open_room();
        let mut grid = TileGrid::filled(13, 7, TileKind::Wall);
        grid.set(0, 3, TileKind::Floor);
        grid.set(12, 3, TileKind::Floor);
        grid.set(6, 3, TileKind::Floor);
        let room = base.with_grid(grid).unwrap();
        let s = SpatialClassification::classify(room.grid());
        assert_eq!(s.get(6, 3), Some(SpatialLabel::Nothing));
    }

    #[test]
    fn connector_at_t_junction() {
        let base = open_room();
        let mut grid = TileGrid::filled(13, 7, TileKind::Wall);
        for x in 0..13 {
            grid.set(x, 3, TileKind::Floor);
        }
        grid.set(6, 4, TileKind::Floor);
        grid.set(6, 5, TileKind::Floor);
        let room = base.with_grid(grid).unwrap();
        let s = SpatialClassification::classify(room.grid());
        assert_eq!(s.get(6, 3), Some(SpatialLabel::Connector));
        assert_eq!(kinds(&room), vec![MesoKind::DeadEnd]);
    }

    #[test]
    fn treasure_and_guard_room() {
        let mut room = open_room();
        room = set(room, 5, 2, TileKind::Treasure);
        room = set(room, 7, 4, TileKind::Treasure);
        room = set(room, 6, 3, TileKind::Enemy);
        assert_eq!(kinds(&room), vec![MesoKind::TreasureRoom, MesoKind::GuardRoom]);
    }

    #[test]
    fn diagonal_enemy_near_door_is_ambush() {
        let room = set(open_room(), 1, 2, TileKind::Enemy);
        assert_eq!(kinds(&room), vec![MesoKind::Ambush]);
    }

    #[test]
    fn open_room_has_no_meso_patterns() {
        assert!(kinds(&open_room()).is_empty());
    }
}
