use std::collections::VecDeque;

use crate::level::{Room, TileGrid};

/// 4-neighborhood component labels over the walkable tiles of a grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    width: usize,
    labels: Vec<Option<u32>>,
    sizes: Vec<usize>,
}

impl Components {
    /// Labels are assigned in row-major order of each component's first tile.
    pub fn label(grid: &TileGrid) -> Self {
        let (w, h) = (grid.width(), grid.height());
        let mut labels = vec![None; w * h];
        let mut sizes = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..w * h {
            if labels[start].is_some() || !grid.tiles()[start].is_walkable() {
                continue;
            }
            let label = sizes.len() as u32;
            let mut size = 0;
            labels[start] = Some(label);
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                size += 1;
                let (x, y) = (i % w, i / w);
                for (nx, ny) in neighbors4(x, y, w, h) {
                    let j = ny * w + nx;
                    if labels[j].is_none() && grid.tiles()[j].is_walkable() {
                        labels[j] = Some(label);
                        queue.push_back(j);
                    }
                }
            }
            sizes.push(size);
        }
        Components {
            width: w,
            labels,
            sizes,
        }
    }

    pub fn label_at(&self, x: usize, y: usize) -> Option<u32> {
        self.labels[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn size(&self, label: u32) -> usize {
        self.sizes[label as usize]
    }

    /// Tiles of each component, each list in row-major order.
    pub fn tiles(&self) -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::new(); self.sizes.len()];
        for (i, label) in self.labels.iter().enumerate() {
            if let Some(l) = label {
                out[*l as usize].push((i % self.width, i / self.width));
            }
        }
        out
    }
}

pub(crate) fn neighbors4(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    let mut out = [(usize::MAX, usize::MAX); 4];
    let mut n = 0;
    if x > 0 {
        out[n] = (x - 1, y);
        n += 1;
    }
    if x + 1 < w {
        out[n] = (x + 1, y);
        n += 1;
    }
    if y > 0 {
        out[n] = (x, y - 1);
        n += 1;
    }
    if y + 1 < h {
        out[n] = (x, y + 1);
        n += 1;
    }
    out.into_iter().take(n)
}

/// Maximal 4-connected components of non-wall tiles.
pub fn walkable_components(room: &Room) -> Vec<Vec<(usize, usize)>> {
    Components::label(room.grid()).tiles()
}
