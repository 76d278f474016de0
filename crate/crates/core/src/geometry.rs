use serde::{Deserialize, Serialize};

/// A grid cell. `x` grows to the right, `y` grows upward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(i32, i32)", into = "(i32, i32)")]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn dist(self, other: Cell) -> f64 {
        let dx = i64::from(self.x - other.x);
        let dy = i64::from(self.y - other.y);
        ((dx * dx + dy * dy) as f64).sqrt()
    }

    /// Euclidean, boundary inclusive.
    pub fn within(self, center: Cell, radius: f64) -> bool {
        self.dist(center) <= radius
    }
}

impl From<(i32, i32)> for Cell {
    fn from((x, y): (i32, i32)) -> Self {
        Cell { x, y }
    }
}

impl From<Cell> for (i32, i32) {
    fn from(c: Cell) -> Self {
        (c.x, c.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    pub width: i32,
    pub height: i32,
}

impl Grid {
    pub fn new(width: u32, height: u32) -> Self {
        Grid {
            width: width as i32,
            height: height as i32,
        }
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    pub fn clamp(&self, c: Cell) -> Cell {
        Cell::new(c.x.clamp(0, self.width - 1), c.y.clamp(0, self.height - 1))
    }

    pub fn len(&self) -> usize {
        (self.width * self.height) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major index.
    pub fn index(&self, c: Cell) -> usize {
        (c.y * self.width + c.x) as usize
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        let i = index as i32;
        Cell::new(i % self.width, i / self.width)
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).map(|i| self.cell_at(i))
    }

    /// In-grid cells within Euclidean `radius` of `center`, in row-major order.
    pub fn disk(&self, center: Cell, radius: f64) -> Vec<Cell> {
        let r = radius.floor() as i32;
        let mut out = Vec::new();
        for y in center.y - r..=center.y + r {
            for x in center.x - r..=center.x + r {
                let c = Cell::new(x, y);
                if self.contains(c) && c.within(center, radius) {
                    out.push(c);
                }
            }
        }
        out
    }
}

/// One tick of movement. Up is `+y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    #[default]
    Stay,
}

impl Action {
    pub const MOVES: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn offset(self) -> (i32, i32) {
        match self {
            Action::Up => (0, 1),
            Action::Down => (0, -1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::Stay => (0, 0),
        }
    }

    pub fn apply(self, from: Cell, grid: &Grid) -> Cell {
        let (dx, dy) = self.offset();
        grid.clamp(Cell::new(from.x + dx, from.y + dy))
    }
}
