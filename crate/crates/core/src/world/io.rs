//! Plain-text scene format.
//!
//! ```text
//! width 5
//! height 4
//! cell_size 0.1
//! seed 7
//! #####
//! #..##
//! #...#
//! #####
//! ```
//!
//! Grid rows follow the header from `j = 0` upward; `#` is an obstacle.
//! `cell_size` is written in shortest round-trip form, so a rendered scene
//! parses back bit-exact.

use super::Scene;
use crate::error::{Error, Result};

/// Maximum accepted side length in cells.
pub const MAX_SIDE: usize = 8192;

pub fn render_scene(scene: &Scene) -> String {
    let mut out = String::with_capacity((scene.width_cells() + 1) * scene.height_cells() + 64);
    out.push_str(&format!(
        "width {}\nheight {}\ncell_size {:?}\nseed {}\n",
        scene.width_cells(),
        scene.height_cells(),
        scene.cell_size(),
        scene.seed()
    ));
    for row in scene.occupancy().chunks(scene.width_cells()) {
        out.extend(row.iter().map(|&o| if o { '#' } else { '.' }));
        out.push('\n');
    }
    out
}

pub fn parse_scene(text: &str) -> Result<Scene> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim_end_matches('\r')));
    let mut header = |key: &str| -> Result<(usize, String)> {
        let (n, line) = lines
            .next()
            .ok_or_else(|| Error::parse(0, format!("missing `{key}` header")))?;
        let value = line
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| Error::parse(n, format!("expected `{key} <value>`")))?;
        Ok((n, value.trim().to_string()))
    };
    let (n, w) = header("width")?;
    let width: usize = w.parse().map_err(|_| Error::parse(n, "invalid width"))?;
    let (n, h) = header("height")?;
    let height: usize = h.parse().map_err(|_| Error::parse(n, "invalid height"))?;
    let (n, cs) = header("cell_size")?;
    let cell_size: f64 = cs.parse().map_err(|_| Error::parse(n, "invalid cell_size"))?;
    let (n, sd) = header("seed")?;
    let seed: u64 = sd.parse().map_err(|_| Error::parse(n, "invalid seed"))?;
    if width > MAX_SIDE || height > MAX_SIDE {
        return Err(Error::parse(1, format!("scene larger than {MAX_SIDE} cells per side")));
    }

    let mut occupancy = Vec::with_capacity(width * height);
    let mut rows = 0;
    for (n, line) in lines {
        if rows == height {
            if line.trim().is_empty() {
                continue;
            }
            return Err(Error::parse(n, "trailing data after grid"));
        }
        if line.len() != width {
            return Err(Error::parse(n, format!("row has {} cells, expected {width}", line.len())));
        }
        for ch in line.bytes() {
            occupancy.push(match ch {
                b'#' => true,
                b'.' => false,
                _ => return Err(Error::parse(n, format!("unexpected cell character {:?}", ch as char))),
            });
        }
        rows += 1;
    }
    if rows != height {
        return Err(Error::parse(0, format!("found {rows} rows, expected {height}")));
    }
    Scene::from_occupancy(width, height, cell_size, occupancy, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_example() {
        let text = "width 5\nheight 4\ncell_size 0.1\nseed 7\n#####\n#..##\n#...#\n#####\n";
        let scene = parse_scene(text).unwrap();
        assert_eq!(scene.width_cells(), 5);
        assert!(!scene.occupied((1, 1)));
        assert!(scene.occupied((3, 1)));
        assert_eq!(render_scene(&scene), text);
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "",
            "width 5\nheight 4\ncell_size 0.1\nseed 7\n",
            "width 3\nheight 3\ncell_size 0.1\nseed 1\n###\n#.#\n##\n",
            "width 3\nheight 3\ncell_size 0.1\nseed 1\n###\n#x#\n###\n",
            "width 3\nheight 3\ncell_size -1\nseed 1\n###\n#.#\n###\n",
            "width 3\nheight 3\ncell_size 0.1\nseed 1\n###\n...\n###\n",
            "width 99999999\nheight 99999999\ncell_size 0.1\nseed 1\n",
        ] {
            assert!(parse_scene(bad).is_err(), "{bad:?}");
        }
    }
}
