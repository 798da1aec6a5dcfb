//! River-world benchmark: a ship drifting east on a grid toward a waterfall,
//! with a single port cell as the goal.
//!
//! From every non-terminal cell the ship moves up-right, right or down-right
//! (each with `p_forward_each`) or one cell left (`p_back`). Moves that would
//! leave the grid or enter an island are unavailable and their probability is
//! split equally among the available moves. Every cell of the last column is a
//! fail state.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::mdp::{Chain, Edge, StateId};

/// `(row, col)`, row 0 being the top bank.
pub type Cell = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct RiverConfig {
    pub width: usize,
    pub height: usize,
    pub port: Cell,
    pub obstacles: BTreeSet<Cell>,
    pub p_forward_each: f64,
    pub p_back: f64,
    pub t_diag: u32,
    pub t_forward: u32,
    pub t_back: u32,
}

impl Default for RiverConfig {
    fn default() -> Self {
        Self {
            width: 50,
            height: 10,
            // Estimated location; the port sits on the top bank with open
            // water on both sides of it.
            port: (0, 35),
            obstacles: BTreeSet::new(),
            p_forward_each: 0.3,
            p_back: 0.1,
            t_diag: 2,
            t_forward: 1,
            t_back: 5,
        }
    }
}

impl RiverConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::RiverConfig(msg));
        if self.width < 2 || self.height < 1 {
            return fail(format!(
                "grid must be at least 2 wide and 1 high, got {}x{}",
                self.width, self.height
            ));
        }
        let probs = [self.p_forward_each, self.p_back];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return fail("move probabilities must lie in [0, 1]".into());
        }
        let total = 3.0 * self.p_forward_each + self.p_back;
        if (total - 1.0).abs() > 1e-9 {
            return fail(format!("3 * p_forward_each + p_back = {total}, expected 1"));
        }
        if self.t_diag == 0 || self.t_forward == 0 || self.t_back == 0 {
            return fail("move times must be >= 1".into());
        }
        if !self.contains(self.port) {
            return fail(format!("port {:?} outside the grid", self.port));
        }
        if self.port.1 == self.width - 1 {
            return fail("port cannot be in the last column".into());
        }
        if let Some(cell) = self.obstacles.iter().find(|&&c| !self.contains(c)) {
            return fail(format!("obstacle {cell:?} outside the grid"));
        }
        if self.obstacles.contains(&self.port) {
            return fail("port cannot be an obstacle".into());
        }
        Ok(())
    }

    fn contains(&self, (row, col): Cell) -> bool {
        row < self.height && col < self.width
    }

    fn is_water(&self, row: isize, col: isize) -> bool {
        row >= 0
            && col >= 0
            && self.contains((row as usize, col as usize))
            && !self.obstacles.contains(&(row as usize, col as usize))
    }
}

/// Bidirectional map between chain states and grid cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    index: Vec<Option<StateId>>,
}

impl Layout {
    /// States are numbered row-major over the given cells, in order.
    pub fn new(width: usize, height: usize, cells: Vec<Cell>) -> Self {
        let mut index = vec![None; width * height];
        for (state, &(row, col)) in cells.iter().enumerate() {
            index[row * width + col] = Some(state);
        }
        Self {
            width,
            height,
            cells,
            index,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, state: StateId) -> Cell {
        self.cells[state]
    }

    pub fn state_at(&self, (row, col): Cell) -> Option<StateId> {
        if row < self.height && col < self.width {
            self.index[row * self.width + col]
        } else {
            None
        }
    }
}

/// Builds the drift chain and its layout. States are the water cells in
/// row-major order.
pub fn build_river(config: &RiverConfig) -> Result<(Chain, Layout)> {
    config.validate()?;
    let (width, height) = (config.width, config.height);

    let cells: Vec<Cell> = (0..height)
        .flat_map(|row| (0..width).map(move |col| (row, col)))
        .filter(|cell| !config.obstacles.contains(cell))
        .collect();
    let layout = Layout::new(width, height, cells);

    let moves = [
        (-1isize, 1isize, config.p_forward_each, config.t_diag),
        (0, 1, config.p_forward_each, config.t_forward),
        (1, 1, config.p_forward_each, config.t_diag),
        (0, -1, config.p_back, config.t_back),
    ];

    let goal = layout.state_at(config.port).expect("port is water");
    let fails: Vec<StateId> = (0..height)
        .filter_map(|row| layout.state_at((row, width - 1)))
        .collect();

    let mut edges = Vec::new();
    for (state, &(row, col)) in layout.cells().iter().enumerate() {
        if state == goal || col == width - 1 {
            continue;
        }
        let (r, c) = (row as isize, col as isize);
        let available: Vec<_> = moves
            .iter()
            .filter(|(dr, dc, _, _)| config.is_water(r + dr, c + dc))
            .collect();
        if available.is_empty() {
            return Err(Error::RiverConfig(format!(
                "cell {:?} has no available moves",
                (row, col)
            )));
        }
        let blocked: f64 =
            moves.iter().map(|m| m.2).sum::<f64>() - available.iter().map(|m| m.2).sum::<f64>();
        let share = blocked / available.len() as f64;
        for &&(dr, dc, prob, time) in &available {
            let target = ((r + dr) as usize, (c + dc) as usize);
            let prob = prob + share;
            if prob > 0.0 {
                let to = layout
                    .state_at(target)
                    .expect("available move targets water");
                edges.push(Edge::new(state, to, prob, time));
            }
        }
    }

    Ok((
        Chain::new(layout.cells().len(), edges, [goal], fails),
        layout,
    ))
}
