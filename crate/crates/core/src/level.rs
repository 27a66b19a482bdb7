//! Rooms, dungeons, doors, locks and edits.
//!
//! Rooms are immutable values: every edit returns a new [`Room`]. The tile
//! alphabet is fixed at four kinds; doors are border metadata and the tile
//! under a door is always [`TileKind::Floor`].

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_ROOM_WIDTH: usize = 13;
pub const DEFAULT_ROOM_HEIGHT: usize = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LevelError {
    #[error("invalid room dimensions {width}x{height} (both must be >= 3)")]
    InvalidDimensions { width: usize, height: usize },
    #[error("invalid door: {0}")]
    InvalidDoor(String),
    #[error("position ({x}, {y}) is out of bounds")]
    OutOfBounds { x: usize, y: usize },
    #[error("tile ({x}, {y}) is locked")]
    LockedTile { x: usize, y: usize },
    #[error("tile ({x}, {y}) lies under a door and must stay floor")]
    DoorTileNotFloor { x: usize, y: usize },
    #[error("invalid connection: {0}")]
    InvalidConnection(String),
    #[error("malformed input at {position}: {message}")]
    MalformedInput { position: String, message: String },
    #[error("unsupported dungeon format version {0}")]
    UnsupportedVersion(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TileKind {
    Floor,
    Wall,
    Treasure,
    Enemy,
}

impl TileKind {
    pub const ALL: [TileKind; 4] = [TileKind::Floor, TileKind::Wall, TileKind::Treasure, TileKind::Enemy];

    pub fn to_char(self) -> char {
        match self {
            TileKind::Floor => 'F',
            TileKind::Wall => 'W',
            TileKind::Treasure => 'T',
            TileKind::Enemy => 'E',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'F' => Some(TileKind::Floor),
            'W' => Some(TileKind::Wall),
            'T' => Some(TileKind::Treasure),
            'E' => Some(TileKind::Enemy),
            _ => None,
        }
    }

    /// Everything except walls can be walked on; treasure and enemies stand on floor.
    pub fn is_walkable(self) -> bool {
        self != TileKind::Wall
    }

    pub fn is_entity(self) -> bool {
        matches!(self, TileKind::Treasure | TileKind::Enemy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    N,
    S,
    E,
    W,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Door {
    pub side: Side,
    pub offset: usize,
}

impl Door {
    pub fn new(side: Side, offset: usize) -> Self {
        Door { side, offset }
    }

    /// Tile position of the door for a room of the given size, or `None`
    /// if the offset runs past the side.
    pub fn position(&self, width: usize, height: usize) -> Option<(usize, usize)> {
        match self.side {
            Side::N if self.offset < width => Some((self.offset, 0)),
            Side::S if self.offset < width => Some((self.offset, height - 1)),
            Side::W if self.offset < height => Some((0, self.offset)),
            Side::E if self.offset < height => Some((width - 1, self.offset)),
            _ => None,
        }
    }
}

/// Row-major rectangular tile grid. This is also the genotype evolved by the engine.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TileGrid {
    width: usize,
    height: usize,
    tiles: Vec<TileKind>,
}

impl TileGrid {
    pub fn filled(width: usize, height: usize, kind: TileKind) -> Self {
        TileGrid {
            width,
            height,
            tiles: vec![kind; width * height],
        }
    }

    pub fn from_tiles(width: usize, height: usize, tiles: Vec<TileKind>) -> Result<Self, LevelError> {
        if tiles.len() != width * height {
            return Err(LevelError::MalformedInput {
                position: "tiles".into(),
                message: format!("expected {} tiles, found {}", width * height, tiles.len()),
            });
        }
        Ok(TileGrid { width, height, tiles })
    }

    /// Parses the row-major `F/W/T/E` string used by the dungeon file.
    pub fn parse(width: usize, height: usize, s: &str) -> Result<Self, LevelError> {
        let mut tiles = Vec::with_capacity(width * height);
        for (i, c) in s.chars().enumerate() {
            let kind = TileKind::from_char(c).ok_or_else(|| LevelError::MalformedInput {
                position: format!("tiles[{i}]"),
                message: format!("unknown tile character {c:?}"),
            })?;
            tiles.push(kind);
        }
        Self::from_tiles(width, height, tiles)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn same_shape(&self, other: &TileGrid) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> TileKind {
        self.tiles[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, kind: TileKind) {
        let i = self.index(x, y);
        self.tiles[i] = kind;
    }

    pub fn tiles(&self) -> &[TileKind] {
        &self.tiles
    }

    pub fn tiles_mut(&mut self) -> &mut [TileKind] {
        &mut self.tiles
    }

    pub fn count(&self, kind: TileKind) -> usize {
        self.tiles.iter().filter(|&&t| t == kind).count()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height
    }

    pub fn to_tile_string(&self) -> String {
        self.tiles.iter().map(|t| t.to_char()).collect()
    }
}

impl fmt::Display for TileGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.tiles.chunks(self.width) {
            let line: String = row.iter().map(|t| t.to_char()).collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// Serialized as `{"w", "h", "tiles"}` with the same tile string as the dungeon file.
impl Serialize for TileGrid {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("TileGrid", 3)?;
        s.serialize_field("w", &self.width())?;
        s.serialize_field("h", &self.height())?;
        s.serialize_field("tiles", &self.to_tile_string())?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for TileGrid {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            w: usize,
            h: usize,
            tiles: String,
        }
        let raw = Raw::deserialize(deserializer)?;
        TileGrid::parse(raw.w, raw.h, &raw.tiles).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "type")]
pub enum RoomEdit {
    SetTile { x: usize, y: usize, kind: TileKind },
    ToggleLock { x: usize, y: usize },
}

impl RoomEdit {
    pub fn position(&self) -> (usize, usize) {
        match *self {
            RoomEdit::SetTile { x, y, .. } | RoomEdit::ToggleLock { x, y } => (x, y),
        }
    }
}

/// A rectangular room: tiles, doors and a per-tile lock mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Room {
    grid: TileGrid,
    doors: Vec<Door>,
    locks: Vec<bool>,
}

fn validate_doors(width: usize, height: usize, doors: &[Door]) -> Result<(), LevelError> {
    if doors.is_empty() {
        return Err(LevelError::InvalidDoor("a room needs at least one door".into()));
    }
    let mut seen = HashSet::new();
    for door in doors {
        let pos = door.position(width, height).ok_or_else(|| {
            LevelError::InvalidDoor(format!(
                "{:?} offset {} is outside a {width}x{height} room",
                door.side, door.offset
            ))
        })?;
        if !seen.insert(pos) {
            return Err(LevelError::InvalidDoor(format!(
                "two doors share border position {pos:?}"
            )));
        }
    }
    Ok(())
}

impl Room {
    /// All-floor, unlocked room.
    pub fn new(width: usize, height: usize, doors: Vec<Door>) -> Result<Room, LevelError> {
        if width < 3 || height < 3 {
            return Err(LevelError::InvalidDimensions { width, height });
        }
        validate_doors(width, height, &doors)?;
        Ok(Room {
            grid: TileGrid::filled(width, height, TileKind::Floor),
            doors,
            locks: vec![false; width * height],
        })
    }

    /// Default 13x7 room with doors in the middle of the west and east walls.
    pub fn default_room() -> Room {
        Room::new(
            DEFAULT_ROOM_WIDTH,
            DEFAULT_ROOM_HEIGHT,
            vec![Door::new(Side::W, 3), Door::new(Side::E, 3)],
        )
        .expect("default room is valid")
    }

    pub fn from_parts(grid: TileGrid, doors: Vec<Door>, locks: Vec<bool>) -> Result<Room, LevelError> {
        let (width, height) = (grid.width(), grid.height());
        if width < 3 || height < 3 {
            return Err(LevelError::InvalidDimensions { width, height });
        }
        validate_doors(width, height, &doors)?;
        if locks.len() != grid.len() {
            return Err(LevelError::MalformedInput {
                position: "locks".into(),
                message: format!("expected {} lock flags, found {}", grid.len(), locks.len()),
            });
        }
        for door in &doors {
            let (x, y) = door.position(width, height).expect("validated");
            if grid.get(x, y) != TileKind::Floor {
                return Err(LevelError::DoorTileNotFloor { x, y });
            }
        }
        Ok(Room { grid, doors, locks })
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    pub fn grid(&self) -> &TileGrid {
        &self.grid
    }

    pub fn doors(&self) -> &[Door] {
        &self.doors
    }

    pub fn locks(&self) -> &[bool] {
        &self.locks
    }

    pub fn is_locked(&self, x: usize, y: usize) -> bool {
        self.locks[self.grid.index(x, y)]
    }

    pub fn door_positions(&self) -> Vec<(usize, usize)> {
        door_positions(&self.grid, &self.doors)
    }

    pub fn is_door_tile(&self, x: usize, y: usize) -> bool {
        self.door_positions().contains(&(x, y))
    }

    pub fn apply_edit(&self, edit: RoomEdit) -> Result<Room, LevelError> {
        let (x, y) = edit.position();
        if !self.grid.contains(x, y) {
            return Err(LevelError::OutOfBounds { x, y });
        }
        let mut next = self.clone();
        match edit {
            RoomEdit::SetTile { kind, .. } => {
                if self.is_locked(x, y) {
                    return Err(LevelError::LockedTile { x, y });
                }
                if kind != TileKind::Floor && self.is_door_tile(x, y) {
                    return Err(LevelError::DoorTileNotFloor { x, y });
                }
                next.grid.set(x, y, kind);
            }
            RoomEdit::ToggleLock { .. } => {
                let i = self.grid.index(x, y);
                next.locks[i] = !next.locks[i];
            }
        }
        Ok(next)
    }

    /// Replaces the lock mask wholesale.
    pub fn with_locks(&self, locks: Vec<bool>) -> Result<Room, LevelError> {
        if locks.len() != self.grid.len() {
            return Err(LevelError::MalformedInput {
                position: "locks".into(),
                message: format!("expected {} lock flags, found {}", self.grid.len(), locks.len()),
            });
        }
        Ok(Room { locks, ..self.clone() })
    }

    /// Replaces the tiles, keeping doors and locks. Fails if the grid puts a
    /// non-floor tile under a door or has a different shape.
    pub fn with_grid(&self, grid: TileGrid) -> Result<Room, LevelError> {
        if !grid.same_shape(&self.grid) {
            return Err(LevelError::InvalidDimensions {
                width: grid.width(),
                height: grid.height(),
            });
        }
        Room::from_parts(grid, self.doors.clone(), self.locks.clone())
    }
}

pub(crate) fn door_positions(grid: &TileGrid, doors: &[Door]) -> Vec<(usize, usize)> {
    doors
        .iter()
        .filter_map(|d| d.position(grid.width(), grid.height()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Connection {
    #[serde(rename = "a")]
    pub room_a: String,
    #[serde(rename = "doorA")]
    pub door_a: usize,
    #[serde(rename = "b")]
    pub room_b: String,
    #[serde(rename = "doorB")]
    pub door_b: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dungeon {
    rooms: BTreeMap<String, Room>,
    connections: Vec<Connection>,
}

impl Dungeon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(rooms: BTreeMap<String, Room>, connections: Vec<Connection>) -> Result<Self, LevelError> {
        let dungeon = Dungeon { rooms, connections };
        dungeon.validate_connections()?;
        Ok(dungeon)
    }

    pub fn rooms(&self) -> &BTreeMap<String, Room> {
        &self.rooms
    }

    pub fn room(&self, id: &str) -> Option<&Room> {
        self.rooms.get(id)
    }

    pub fn connections(&self) -> &[Connection] {
        &self.connections
    }

    pub fn with_room(&self, id: impl Into<String>, room: Room) -> Dungeon {
        let mut next = self.clone();
        next.rooms.insert(id.into(), room);
        next
    }

    pub fn with_connection(&self, connection: Connection) -> Result<Dungeon, LevelError> {
        let mut next = self.clone();
        next.connections.push(connection);
        next.validate_connections()?;
        Ok(next)
    }

    fn validate_connections(&self) -> Result<(), LevelError> {
        let mut used = HashSet::new();
        for (i, c) in self.connections.iter().enumerate() {
            for (room_id, door) in [(&c.room_a, c.door_a), (&c.room_b, c.door_b)] {
                let room = self.rooms.get(room_id).ok_or_else(|| {
                    LevelError::InvalidConnection(format!("connection {i}: unknown room {room_id:?}"))
                })?;
                if door >= room.doors().len() {
                    return Err(LevelError::InvalidConnection(format!(
                        "connection {i}: room {room_id:?} has no door {door}"
                    )));
                }
                if !used.insert((room_id.clone(), door)) {
                    return Err(LevelError::InvalidConnection(format!(
                        "connection {i}: door {door} of room {room_id:?} is already connected"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub mod format {
    //! Versioned JSON dungeon document.

    use super::*;

    pub const FORMAT_VERSION: u64 = 1;

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct RoomDoc {
        pub w: usize,
        pub h: usize,
        pub tiles: String,
        pub locks: String,
        pub doors: Vec<Door>,
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct DungeonDoc {
        pub version: u64,
        pub rooms: BTreeMap<String, RoomDoc>,
        pub connections: Vec<Connection>,
    }

    impl From<&Room> for RoomDoc {
        fn from(room: &Room) -> Self {
            RoomDoc {
                w: room.width(),
                h: room.height(),
                tiles: room.grid().to_tile_string(),
                locks: room.locks().iter().map(|&l| if l { '1' } else { '0' }).collect(),
                doors: room.doors().to_vec(),
            }
        }
    }

    fn prefixed(prefix: &str, err: LevelError) -> LevelError {
        match err {
            LevelError::MalformedInput { position, message } => LevelError::MalformedInput {
                position: format!("{prefix}.{position}"),
                message,
            },
            other => LevelError::MalformedInput {
                position: prefix.to_string(),
                message: other.to_string(),
            },
        }
    }

    impl RoomDoc {
        pub fn to_room(&self, id: &str) -> Result<Room, LevelError> {
            let at = format!("rooms.{id}");
            let grid = TileGrid::parse(self.w, self.h, &self.tiles).map_err(|e| prefixed(&at, e))?;
            let mut locks = Vec::with_capacity(self.locks.len());
            for (i, c) in self.locks.chars().enumerate() {
                match c {
                    '0' => locks.push(false),
                    '1' => locks.push(true),
                    _ => {
                        return Err(LevelError::MalformedInput {
                            position: format!("{at}.locks[{i}]"),
                            message: format!("expected '0' or '1', found {c:?}"),
                        })
                    }
                }
            }
            Room::from_parts(grid, self.doors.clone(), locks).map_err(|e| prefixed(&at, e))
        }
    }

    impl From<&Dungeon> for DungeonDoc {
        fn from(d: &Dungeon) -> Self {
            DungeonDoc {
                version: FORMAT_VERSION,
                rooms: d.rooms.iter().map(|(k, r)| (k.clone(), RoomDoc::from(r))).collect(),
                connections: d.connections.clone(),
            }
        }
    }

    impl DungeonDoc {
        pub fn to_dungeon(&self) -> Result<Dungeon, LevelError> {
            if self.version != FORMAT_VERSION {
                return Err(LevelError::UnsupportedVersion(self.version));
            }
            let mut rooms = BTreeMap::new();
            for (id, doc) in &self.rooms {
                rooms.insert(id.clone(), doc.to_room(id)?);
            }
            Dungeon::from_parts(rooms, self.connections.clone())
        }
    }

    pub fn serialize_dungeon(d: &Dungeon) -> Vec<u8> {
        serde_json::to_vec_pretty(&DungeonDoc::from(d)).expect("dungeon document serializes")
    }

    pub fn deserialize_dungeon(bytes: &[u8]) -> Result<Dungeon, LevelError> {
        let doc: DungeonDoc = serde_json::from_slice(bytes).map_err(|e| LevelError::MalformedInput {
            position: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        doc.to_dungeon()
    }
}

pub use format::{deserialize_dungeon, serialize_dungeon};

#[cfg(test)]
mod tests {
    use super::*;

    fn room_13x7() -> Room {
        Room::new(13, 7, vec![Door::new(Side::W, 3)]).unwrap()
    }

    #[test]
    fn new_room_is_all_floor_unlocked() {
        let room = room_13x7();
        assert_eq!(room.grid().count(TileKind::Floor), 91);
        assert_eq!(room.doors().len(), 1);
        assert!(room.locks().iter().all(|&l| !l));
    }

    #[test]
    fn minimal_room() {
        let room = Room::new(3, 3, vec![Door::new(Side::N, 1)]).unwrap();
        assert_eq!(room.grid().len(), 9);
        assert_eq!(room.door_positions(), vec![(1, 0)]);
    }

    #[test]
    fn rejects_bad_dimensions_and_doors() {
        assert_eq!(
            Room::new(2, 5, vec![Door::new(Side::N, 0)]),
            Err(LevelError::InvalidDimensions { width: 2, height: 5 })
        );
        assert!(matches!(
            Room::new(5, 5, vec![Door::new(Side::E, 5)]),
            Err(LevelError::InvalidDoor(_))
        ));
        assert!(matches!(
            Room::new(5, 5, vec![Door::new(Side::N, 0), Door::new(Side::W, 0)]),
            Err(LevelError::InvalidDoor(_))
        ));
        assert!(matches!(Room::new(5, 5, vec![]), Err(LevelError::InvalidDoor(_))));
    }

    #[test]
    fn edit_changes_single_cell() {
        let room = room_13x7();
        let next = room
            .apply_edit(RoomEdit::SetTile {
                x: 0,
                y: 0,
                kind: TileKind::Wall,
            })
            .unwrap();
        assert_eq!(next.grid().get(0, 0), TileKind::Wall);
        let changed = room
            .grid()
            .tiles()
            .iter()
            .zip(next.grid().tiles())
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(changed, 1);
    }

    #[test]
    fn locked_tile_rejects_kind_edit_until_unlocked() {
        let room = room_13x7().apply_edit(RoomEdit::ToggleLock { x: 4, y: 2 }).unwrap();
        assert!(room.is_locked(4, 2));
        assert_eq!(
            room.apply_edit(RoomEdit::SetTile {
                x: 4,
                y: 2,
                kind: TileKind::Enemy
            }),
            Err(LevelError::LockedTile { x: 4, y: 2 })
        );
        let unlocked = room.apply_edit(RoomEdit::ToggleLock { x: 4, y: 2 }).unwrap();
        assert!(unlocked
            .apply_edit(RoomEdit::SetTile {
                x: 4,
                y: 2,
                kind: TileKind::Enemy
            })
            .is_ok());
    }

    #[test]
    fn door_tile_stays_floor() {
        let room = room_13x7();
        assert_eq!(
            room.apply_edit(RoomEdit::SetTile {
                x: 0,
                y: 3,
                kind: TileKind::Wall
            }),
            Err(LevelError::DoorTileNotFloor { x: 0, y: 3 })
        );
        assert_eq!(
            room.apply_edit(RoomEdit::SetTile {
                x: 13,
                y: 0,
                kind: TileKind::Wall
            }),
            Err(LevelError::OutOfBounds { x: 13, y: 0 })
        );
    }

    #[test]
    fn empty_dungeon_round_trips() {
        let d = Dungeon::new();
        let bytes = serialize_dungeon(&d);
        assert_eq!(deserialize_dungeon(&bytes).unwrap(), d);
    }

    #[test]
    fn truncated_input_is_malformed() {
        let d = Dungeon::new().with_room("a", room_13x7());
        let bytes = serialize_dungeon(&d);
        let err = deserialize_dungeon(&bytes[..bytes.len() / 2]).unwrap_err();
        assert!(matches!(err, LevelError::MalformedInput { .. }));
    }

    #[test]
    fn wrong_tile_count_is_malformed() {
        let json = br#"{"version":1,"rooms":{"a":{"w":3,"h":3,"tiles":"FFFF","locks":"000000000","doors":[{"side":"N","offset":1}]}},"connections":[]}"#;
        match deserialize_dungeon(json) {
            Err(LevelError::MalformedInput { position, .. }) => assert!(position.starts_with("rooms.a")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bumped_version_rejected() {
        let json = br#"{"version":2,"rooms":{},"connections":[]}"#;
        assert_eq!(deserialize_dungeon(json), Err(LevelError::UnsupportedVersion(2)));
    }

    #[test]
    fn connection_validation() {
        let d = Dungeon::new().with_room("a", room_13x7()).with_room("b", room_13x7());
        let c = Connection {
            room_a: "a".into(),
            door_a: 0,
            room_b: "b".into(),
            door_b: 0,
        };
        let d2 = d.with_connection(c.clone()).unwrap();
        assert!(matches!(d2.with_connection(c), Err(LevelError::InvalidConnection(_))));
        let bad = Connection {
            room_a: "a".into(),
            door_a: 3,
            room_b: "b".into(),
            door_b: 0,
        };
        assert!(d.with_connection(bad).is_err());
    }
}
