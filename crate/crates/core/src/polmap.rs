//! Policy maps: query a frozen actor at every cell of a position grid with
//! a fixed received word and landmark layout, then render the preferred
//! move per cell as a color-coded image.
//!
//! Rendering targets binary PPM (P6) so golden files compare byte-for-byte
//! without an image codec. A CSV with one letter per cell carries the same
//! grid in plain text.

use crate::maddpg::{act_deterministic, action_dim};
use crate::net::{DenseNet, NetError};
use crate::world::{assemble_observation, Landmark, Move, TaskConfig, Vec2};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Pixels per grid cell in rendered images.
pub const CELL_PIXELS: usize = 4;

#[derive(Debug, Error)]
pub enum PolmapError {
    #[error("bad sweep input: {0}")]
    BadInput(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("malformed ppm data: {0}")]
    BadPpm(String),
}

/// A swept grid of preferred moves. Labels are stored row-major starting
/// from the top row (the y = +1 edge of the world).
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyMap {
    pub grid: usize,
    pub labels: Vec<Move>,
    pub landmarks: Vec<Landmark>,
    pub agent: usize,
    pub word: Vec<u8>,
    pub goal: Vec<f64>,
}

impl PolicyMap {
    pub fn label(&self, row: usize, col: usize) -> Move {
        self.labels[row * self.grid + col]
    }

    /// World coordinates of a cell center.
    pub fn cell_center(&self, row: usize, col: usize) -> Vec2 {
        let g = self.grid as f64;
        Vec2::new(
            -1.0 + (col as f64 + 0.5) * 2.0 / g,
            1.0 - (row as f64 + 0.5) * 2.0 / g,
        )
    }

    /// Fraction of cells carrying the given label.
    pub fn label_fraction(&self, mv: Move) -> f64 {
        self.labels.iter().filter(|&&l| l == mv).count() as f64 / self.labels.len() as f64
    }
}

/// Query the actor at every cell center of a `grid x grid` lattice over
/// [-1, 1]^2 with the word and goal held fixed.
pub fn sweep_policy_map(
    actor: &DenseNet,
    task: &TaskConfig,
    agent: usize,
    word: &[u8],
    landmarks: &[Landmark],
    goal: &[f64],
    grid: usize,
) -> Result<PolicyMap, PolmapError> {
    if grid < 2 {
        return Err(PolmapError::BadInput(format!("grid must be at least 2, got {grid}")));
    }
    if agent > 1 {
        return Err(PolmapError::BadInput(format!("agent index {agent} out of range")));
    }
    if word.len() != task.message_bits {
        return Err(PolmapError::BadInput(format!(
            "word has {} bits, checkpoint uses k = {}",
            word.len(),
            task.message_bits
        )));
    }
    if word.iter().any(|&b| b > 1) {
        return Err(PolmapError::BadInput("word bits must be 0 or 1".into()));
    }
    if landmarks.len() != task.landmarks {
        return Err(PolmapError::BadInput(format!(
            "{} landmarks given, task has {}",
            landmarks.len(),
            task.landmarks
        )));
    }
    if goal.len() != task.landmarks {
        return Err(PolmapError::BadInput(format!(
            "goal block has length {}, expected {}",
            goal.len(),
            task.landmarks
        )));
    }
    if actor.input_dim() != task.observation_len()
        || actor.output_dim() != action_dim(task.message_bits)
    {
        return Err(PolmapError::BadInput(format!(
            "actor dims {}x{} do not match task observation/action sizes {}x{}",
            actor.input_dim(),
            actor.output_dim(),
            task.observation_len(),
            action_dim(task.message_bits)
        )));
    }

    let mut map = PolicyMap {
        grid,
        labels: Vec::with_capacity(grid * grid),
        landmarks: landmarks.to_vec(),
        agent,
        word: word.to_vec(),
        goal: goal.to_vec(),
    };
    for row in 0..grid {
        for col in 0..grid {
            let pos = map.cell_center(row, col);
            let obs = assemble_observation(agent, pos, landmarks, word, goal);
            let sample = act_deterministic(actor, &obs.values)?;
            map.labels.push(sample.move_dir);
        }
    }
    Ok(map)
}

/// Label colors: blue up, green down, turquoise left, yellow right, grey stay.
pub fn move_color(mv: Move) -> [u8; 3] {
    match mv {
        Move::Up => [0, 0, 255],
        Move::Down => [0, 128, 0],
        Move::Left => [64, 224, 208],
        Move::Right => [255, 255, 0],
        Move::Stay => [128, 128, 128],
    }
}

fn color_move(rgb: [u8; 3]) -> Option<Move> {
    Move::ALL.into_iter().find(|&m| move_color(m) == rgb)
}

/// Render to a P6 PPM: one CELL_PIXELS-square block per cell, landmarks
/// overdrawn as 3x3 black squares.
pub fn ppm_bytes(map: &PolicyMap) -> Vec<u8> {
    let side = map.grid * CELL_PIXELS;
    let mut pixels = vec![0u8; side * side * 3];
    for row in 0..map.grid {
        for col in 0..map.grid {
            let rgb = move_color(map.label(row, col));
            for py in row * CELL_PIXELS..(row + 1) * CELL_PIXELS {
                for px in col * CELL_PIXELS..(col + 1) * CELL_PIXELS {
                    let at = (py * side + px) * 3;
                    pixels[at..at + 3].copy_from_slice(&rgb);
                }
            }
        }
    }
    for lm in &map.landmarks {
        let cx = ((lm.position.x + 1.0) / 2.0 * side as f64) as i64;
        let cy = ((1.0 - lm.position.y) / 2.0 * side as f64) as i64;
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                let (x, y) = (cx + dx, cy + dy);
                if x >= 0 && y >= 0 && (x as usize) < side && (y as usize) < side {
                    let at = (y as usize * side + x as usize) * 3;
                    pixels[at..at + 3].copy_from_slice(&[0, 0, 0]);
                }
            }
        }
    }
    let mut out = format!("P6\n{side} {side}\n255\n").into_bytes();
    out.extend_from_slice(&pixels);
    out
}

/// One letter per cell, rows as comma-separated lines, top row first.
pub fn csv_string(map: &PolicyMap) -> String {
    let mut out = String::with_capacity(map.grid * (2 * map.grid + 1));
    for row in 0..map.grid {
        for col in 0..map.grid {
            if col > 0 {
                out.push(',');
            }
            out.push(map.label(row, col).letter());
        }
        out.push('\n');
    }
    out
}

/// Write `<prefix>.ppm` and `<prefix>.csv`, returning the two paths.
pub fn render_map(map: &PolicyMap, out_prefix: &Path) -> Result<(PathBuf, PathBuf), PolmapError> {
    let mut ppm_path = out_prefix.as_os_str().to_owned();
    ppm_path.push(".ppm");
    let ppm_path = PathBuf::from(ppm_path);
    let mut csv_path = out_prefix.as_os_str().to_owned();
    csv_path.push(".csv");
    let csv_path = PathBuf::from(csv_path);

    let write = |path: &PathBuf, data: &[u8]| -> Result<(), PolmapError> {
        std::fs::write(path, data).map_err(|source| PolmapError::Io {
            path: path.display().to_string(),
            source,
        })
    };
    write(&ppm_path, &ppm_bytes(map))?;
    write(&csv_path, csv_string(map).as_bytes())?;
    Ok((ppm_path, csv_path))
}

/// Decode the label grid back out of PPM bytes produced by `ppm_bytes`.
/// Reads the top-left pixel of each cell block, so it only round-trips
/// exactly on maps rendered without landmark overlays.
pub fn decode_ppm_labels(bytes: &[u8], grid: usize) -> Result<Vec<Move>, PolmapError> {
    let header_end = bytes
        .windows(1)
        .enumerate()
        .filter(|(_, w)| w[0] == b'\n')
        .map(|(i, _)| i)
        .nth(2)
        .ok_or_else(|| PolmapError::BadPpm("missing header".into()))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| PolmapError::BadPpm("non-utf8 header".into()))?;
    let mut parts = header.split_ascii_whitespace();
    if parts.next() != Some("P6") {
        return Err(PolmapError::BadPpm("not a P6 file".into()));
    }
    let side: usize = parts
        .next()
        .and_then(|w| w.parse().ok())
        .ok_or_else(|| PolmapError::BadPpm("bad width".into()))?;
    if side != grid * CELL_PIXELS {
        return Err(PolmapError::BadPpm(format!(
            "image side {side} does not match grid {grid}"
        )));
    }
    let pixels = &bytes[header_end + 1..];
    if pixels.len() != side * side * 3 {
        return Err(PolmapError::BadPpm("truncated pixel data".into()));
    }
    let mut labels = Vec::with_capacity(grid * grid);
    for row in 0..grid {
        for col in 0..grid {
            let at = (row * CELL_PIXELS * side + col * CELL_PIXELS) * 3;
            let rgb = [pixels[at], pixels[at + 1], pixels[at + 2]];
            labels.push(color_move(rgb).ok_or_else(|| {
                PolmapError::BadPpm(format!("unknown color {rgb:?} at cell ({row}, {col})"))
            })?);
        }
    }
    Ok(labels)
}

/// Cells whose 4-neighborhood shows at least three distinct labels. These
/// are the meeting points of differently-colored regions, i.e. positions
/// the policy steers toward from several directions.
pub fn find_vertex_cells(map: &PolicyMap) -> Vec<(usize, usize)> {
    let g = map.grid;
    let mut cells = Vec::new();
    for row in 0..g {
        for col in 0..g {
            let mut seen = [false; Move::COUNT];
            let mut distinct = 0;
            let mut mark = |m: Move| {
                if !seen[m.index()] {
                    seen[m.index()] = true;
                    distinct += 1;
                }
            };
            if row > 0 {
                mark(map.label(row - 1, col));
            }
            if row + 1 < g {
                mark(map.label(row + 1, col));
            }
            if col > 0 {
                mark(map.label(row, col - 1));
            }
            if col + 1 < g {
                mark(map.label(row, col + 1));
            }
            if distinct >= 3 {
                cells.push((row, col));
            }
        }
    }
    cells
}

/// World-space centroid of all vertex cells, if any exist.
pub fn vertex_centroid(map: &PolicyMap) -> Option<Vec2> {
    let cells = find_vertex_cells(map);
    if cells.is_empty() {
        return None;
    }
    let n = cells.len() as f64;
    let (sx, sy) = cells.iter().fold((0.0, 0.0), |(sx, sy), &(r, c)| {
        let p = map.cell_center(r, c);
        (sx + p.x, sy + p.y)
    });
    Some(Vec2::new(sx / n, sy / n))
}

/// Index of the landmark closest to a point.
pub fn nearest_landmark(landmarks: &[Landmark], point: Vec2) -> Option<usize> {
    landmarks
        .iter()
        .enumerate()
        .min_by(|a, b| {
            a.1.position
                .dist(point)
                .partial_cmp(&b.1.position.dist(point))
                .expect("distances are finite")
        })
        .map(|(i, _)| i)
}
