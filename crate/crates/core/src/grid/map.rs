use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(row, col)`, row 0 at the top.
pub type Cell = (usize, usize);

/// Rectangular obstacle grid. Anything outside the rectangle is treated as
/// an obstacle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridMap {
    height: usize,
    width: usize,
    obstacles: Vec<bool>,
    pub name: String,
}

impl GridMap {
    pub fn empty(height: usize, width: usize, name: impl Into<String>) -> Self {
        Self {
            height,
            width,
            obstacles: vec![false; height * width],
            name: name.into(),
        }
    }

    /// Builds a map from row-major obstacle flags.
    pub fn from_rows(rows: &[Vec<bool>], name: impl Into<String>) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if height == 0 || width == 0 {
            return Err(Error::InvalidInput("map must have at least one cell".into()));
        }
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidInput("ragged obstacle rows".into()));
        }
        Ok(Self {
            height,
            width,
            obstacles: rows.concat(),
            name: name.into(),
        })
    }

    /// Square map whose cells are obstacles independently with probability
    /// `density`.
    pub fn random<R: Rng + ?Sized>(size: usize, density: f64, rng: &mut R) -> Self {
        let obstacles = (0..size * size).map(|_| rng.random::<f64>() < density).collect();
        Self {
            height: size,
            width: size,
            obstacles,
            name: format!("procedural-{size}x{size}-{density}"),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_obstacle(&self, (r, c): Cell) -> bool {
        self.obstacles[r * self.width + c]
    }

    pub fn set_obstacle(&mut self, (r, c): Cell, obstacle: bool) {
        self.obstacles[r * self.width + c] = obstacle;
    }

    /// Signed lookup: out-of-bounds coordinates are obstacles.
    pub fn blocked_at(&self, r: i64, c: i64) -> bool {
        if r < 0 || c < 0 || r >= self.height as i64 || c >= self.width as i64 {
            return true;
        }
        self.is_obstacle((r as usize, c as usize))
    }

    pub fn free_cells(&self) -> Vec<Cell> {
        (0..self.height)
            .flat_map(|r| (0..self.width).map(move |c| (r, c)))
            .filter(|cell| !self.is_obstacle(*cell))
            .collect()
    }

    pub fn neighbors(&self, (r, c): Cell) -> impl Iterator<Item = Cell> + '_ {
        const STEPS: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
        STEPS.iter().filter_map(move |(dr, dc)| {
            let (nr, nc) = (r as i64 + dr, c as i64 + dc);
            (!self.blocked_at(nr, nc)).then_some((nr as usize, nc as usize))
        })
    }

    /// 4-connected BFS distances from `start` over free cells; `None` for
    /// unreachable cells.
    pub fn bfs_distances(&self, start: Cell) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.height * self.width];
        if self.is_obstacle(start) {
            return dist;
        }
        dist[start.0 * self.width + start.1] = Some(0);
        let mut queue = VecDeque::from([start]);
        while let Some(cell) = queue.pop_front() {
            let d = dist[cell.0 * self.width + cell.1].unwrap_or(0);
            for next in self.neighbors(cell) {
                let slot = &mut dist[next.0 * self.width + next.1];
                if slot.is_none() {
                    *slot = Some(d + 1);
                    queue.push_back(next);
                }
            }
        }
        dist
    }

    pub fn distance(&self, from: Cell, to: Cell) -> Option<usize> {
        self.bfs_distances(from)[to.0 * self.width + to.1]
    }

    /// Connected-component label per cell, `None` on obstacles.
    pub fn components(&self) -> Vec<Option<usize>> {
        let mut labels = vec![None; self.height * self.width];
        let mut next_label = 0;
        for start in self.free_cells() {
            if labels[start.0 * self.width + start.1].is_some() {
                continue;
            }
            labels[start.0 * self.width + start.1] = Some(next_label);
            let mut queue = VecDeque::from([start]);
            while let Some(cell) = queue.pop_front() {
                for n in self.neighbors(cell) {
                    let slot = &mut labels[n.0 * self.width + n.1];
                    if slot.is_none() {
                        *slot = Some(next_label);
                        queue.push_back(n);
                    }
                }
            }
            next_label += 1;
        }
        labels
    }

    /// Parses MovingAI `.map` content. `.` and `G` are free; `@`, `O`, `T`
    /// and `W` are obstacles. LF and CRLF endings are accepted and trailing
    /// whitespace is ignored.
    pub fn parse_movingai(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim_end).enumerate().map(|(i, l)| (i + 1, l));
        let mut kind = None;
        let mut height = None;
        let mut width = None;
        let mut last_line = 0;
        loop {
            let Some((no, line)) = lines.next() else {
                return Err(parse_err(last_line, "missing `map` header line"));
            };
            last_line = no;
            if line.is_empty() {
                continue;
            }
            if line == "map" {
                break;
            }
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or_default();
            let value = parts.next();
            let number = |v: Option<&str>| -> Result<usize> {
                v.and_then(|v| v.parse::<usize>().ok())
                    .filter(|n| *n > 0)
                    .ok_or_else(|| parse_err(no, format!("bad `{key}` value")))
            };
            match key {
                "type" => kind = Some(value.ok_or_else(|| parse_err(no, "missing map type"))?),
                "height" => height = Some(number(value)?),
                "width" => width = Some(number(value)?),
                _ => return Err(parse_err(no, format!("unknown header field `{key}`"))),
            }
        }
        let header_end = last_line;
        if kind.is_none() {
            return Err(parse_err(header_end, "missing `type` header field"));
        }
        let height = height.ok_or_else(|| parse_err(header_end, "missing `height` header field"))?;
        let width = width.ok_or_else(|| parse_err(header_end, "missing `width` header field"))?;

        let mut obstacles = Vec::with_capacity(height * width);
        let mut rows = 0;
        let mut last_body_line = header_end;
        for (no, line) in lines {
            if line.is_empty() {
                continue;
            }
            if rows == height {
                return Err(parse_err(no, "row count mismatch"));
            }
            if line.chars().count() != width {
                return Err(parse_err(no, "row width mismatch"));
            }
            for (col, ch) in line.chars().enumerate() {
                obstacles.push(match ch {
                    '.' | 'G' => false,
                    '@' | 'O' | 'T' | 'W' => true,
                    other => {
                        return Err(parse_err(
                            no,
                            format!("unknown map character `{other}` in column {}", col + 1),
                        ))
                    }
                });
            }
            rows += 1;
            last_body_line = no;
        }
        if rows != height {
            return Err(parse_err(last_body_line, "row count mismatch"));
        }
        Ok(Self {
            height,
            width,
            obstacles,
            name: String::new(),
        })
    }

    /// MovingAI serialization: `type octile` header, `.` free, `@` obstacle.
    pub fn to_movingai(&self) -> String {
        let mut out = format!("type octile\nheight {}\nwidth {}\nmap\n", self.height, self.width);
        for r in 0..self.height {
            for c in 0..self.width {
                out.push(if self.is_obstacle((r, c)) { '@' } else { '.' });
            }
            out.push('\n');
        }
        out
    }

    /// Debug text: `.` free, `#` obstacle, agent `i` as a lowercase letter
    /// and its goal as the matching uppercase letter.
    pub fn render(&self, agents: &[(Option<Cell>, Cell)]) -> String {
        let mut grid: Vec<Vec<char>> = (0..self.height)
            .map(|r| {
                (0..self.width)
                    .map(|c| if self.is_obstacle((r, c)) { '#' } else { '.' })
                    .collect()
            })
            .collect();
        for (i, (_, goal)) in agents.iter().enumerate() {
            grid[goal.0][goal.1] = (b'A' + (i % 26) as u8) as char;
        }
        for (i, (pos, _)) in agents.iter().enumerate() {
            if let Some(p) = pos {
                grid[p.0][p.1] = (b'a' + (i % 26) as u8) as char;
            }
        }
        let mut out = String::new();
        for row in grid {
            let _ = writeln!(out, "{}", row.into_iter().collect::<String>());
        }
        out
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::MapParse {
        line,
        message: message.into(),
    }
}
