//! Grid-seeded dense motion fields.

use std::io::{Read, Write};

use super::lk::{track_pyramids, LkParams, Pyramid};
use crate::error::{Error, Result};
use crate::media::Frame;

pub const FLOW_MAGIC: &[u8; 4] = b"SKFL";
pub const FLOW_VERSION: u32 = 1;

/// Per-cell displacement (pixels) on a `width` x `height` grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f32>,
    pub v: Vec<f32>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
        }
    }

    pub fn uniform(width: usize, height: usize, u: f32, v: f32) -> Self {
        Self {
            width,
            height,
            u: vec![u; width * height],
            v: vec![v; width * height],
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn mean(&self) -> (f64, f64) {
        let n = self.len() as f64;
        (
            self.u.iter().map(|&x| x as f64).sum::<f64>() / n,
            self.v.iter().map(|&x| x as f64).sum::<f64>() / n,
        )
    }

    /// Binary form: 16-byte header (`SKFL`, version, width, height as LE u32)
    /// followed by the `u` plane and then the `v` plane as LE f32.
    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        out.write_all(FLOW_MAGIC)?;
        out.write_all(&FLOW_VERSION.to_le_bytes())?;
        out.write_all(&(self.width as u32).to_le_bytes())?;
        out.write_all(&(self.height as u32).to_le_bytes())?;
        for x in self.u.iter().chain(&self.v) {
            out.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut input: impl Read) -> Result<Self> {
        let mut header = [0u8; 16];
        input
            .read_exact(&mut header)
            .map_err(|_| Error::Parse("flow file shorter than its header".into()))?;
        if &header[..4] != FLOW_MAGIC {
            return Err(Error::Parse("bad flow magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
        if word(4) != FLOW_VERSION {
            return Err(Error::Parse(format!("unsupported flow version {}", word(4))));
        }
        let (width, height) = (word(8) as usize, word(12) as usize);
        let mut body = Vec::new();
        input
            .read_to_end(&mut body)
            .map_err(|e| Error::Parse(e.to_string()))?;
        let n = width * height;
        if body.len() != 8 * n {
            return Err(Error::Parse(format!(
                "flow body has {} bytes, expected {}",
                body.len(),
                8 * n
            )));
        }
        let vals: Vec<f32> = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            width,
            height,
            u: vals[..n].to_vec(),
            v: vals[n..].to_vec(),
        })
    }
}

pub fn grid_flow(prev: &Frame, next: &Frame, grid: usize) -> Result<FlowField> {
    if prev.width() != next.width() || prev.height() != next.height() {
        return Err(Error::dims(
            format!("{}x{}", prev.width(), prev.height()),
            format!("{}x{}", next.width(), next.height()),
        ));
    }
    let lk = LkParams::default();
    let a = Pyramid::new(&prev.to_luma(), lk.levels);
    let b = Pyramid::new(&next.to_luma(), lk.levels);
    grid_flow_pyramids(&a, &b, grid, &lk)
}

/// Track the centers of a `grid` x `grid` lattice of cells. Cells that cannot
/// be tracked take the value of the nearest tracked cell (ties: first in
/// row-major order).
pub fn grid_flow_pyramids(
    prev: &Pyramid,
    next: &Pyramid,
    grid: usize,
    lk: &LkParams,
) -> Result<FlowField> {
    if !(4..=32).contains(&grid) {
        return Err(Error::Config(format!("grid must be in [4, 32], got {grid}")));
    }
    let (w, h) = (prev.base().width() as f64, prev.base().height() as f64);
    let points: Vec<[f64; 2]> = (0..grid)
        .flat_map(|gy| {
            (0..grid).map(move |gx| {
                [
                    (gx as f64 + 0.5) * w / grid as f64 - 0.5,
                    (gy as f64 + 0.5) * h / grid as f64 - 0.5,
                ]
            })
        })
        .collect();
    let tracked = track_pyramids(prev, next, &points, lk);
    let ok: Vec<usize> = (0..tracked.len()).filter(|&i| tracked[i].is_some()).collect();
    if ok.is_empty() {
        return Err(Error::TrackingFailure(format!(
            "no cell of the {grid}x{grid} grid could be tracked"
        )));
    }
    let mut field = FlowField::zeros(grid, grid);
    for i in 0..tracked.len() {
        let src = match tracked[i] {
            Some(_) => i,
            None => *ok
                .iter()
                .min_by_key(|&&j| {
                    let (dx, dy) = ((i % grid) as i64 - (j % grid) as i64, (i / grid) as i64 - (j / grid) as i64);
                    (dx * dx + dy * dy, j)
                })
                .unwrap(),
        };
        let d = tracked[src].unwrap().displacement();
        field.u[i] = d[0] as f32;
        field.v[i] = d[1] as f32;
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: usize, h: usize, shift: impl Fn(usize, usize) -> (f64, f64)) -> Frame {
        Frame::from_fn(w, h, |x, y| {
            let (sx, sy) = shift(x, y);
            let (fx, fy) = (x as f64 - sx, y as f64 - sy);
            let v = 128.0
                + 45.0 * (fx * 0.23).sin() * (fy * 0.19).cos()
                + 35.0 * (fx * 0.09 + fy * 0.13).sin();
            [v.round() as u8; 3]
        })
        .unwrap()
    }

    #[test]
    fn identical_frames_give_zero_field() {
        let f = textured(128, 128, |_, _| (0.0, 0.0));
        let field = grid_flow(&f, &f, 8).unwrap();
        assert!(field.u.iter().chain(&field.v).all(|&x| x == 0.0));
    }

    #[test]
    fn global_shift_in_every_cell() {
        let a = textured(128, 128, |_, _| (0.0, 0.0));
        let b = textured(128, 128, |_, _| (3.0, 0.0));
        let field = grid_flow(&a, &b, 8).unwrap();
        for (u, v) in field.u.iter().zip(&field.v) {
            assert!((u - 3.0).abs() < 0.5 && v.abs() < 0.5, "{u} {v}");
        }
    }

    #[test]
    fn split_motion_separates_halves() {
        let a = textured(128, 128, |_, _| (0.0, 0.0));
        let b = textured(128, 128, |x, _| if x >= 64 { (4.0, 0.0) } else { (0.0, 0.0) });
        let field = grid_flow(&a, &b, 8).unwrap();
        let half = |right: bool| {
            let vals: Vec<f64> = (0..64)
                .filter(|i| ((i % 8) >= 4) == right)
                .map(|i| field.u[i] as f64)
                .collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        let diff = half(true) - half(false);
        assert!((diff - 4.0).abs() < 0.6, "diff {diff}");
    }

    #[test]
    fn grid_bounds_checked() {
        let f = textured(64, 64, |_, _| (0.0, 0.0));
        assert!(matches!(grid_flow(&f, &f, 3), Err(Error::Config(_))));
        assert!(matches!(grid_flow(&f, &f, 33), Err(Error::Config(_))));
    }

    #[test]
    fn flat_cells_borrow_from_neighbours() {
        // texture only in the left half; right cells get filled
        let a = Frame::from_fn(128, 128, |x, y| {
            if x < 64 {
                let v = 128.0 + 60.0 * (x as f64 * 0.3).sin() * (y as f64 * 0.25).cos();
                [v as u8; 3]
            } else {
                [90; 3]
            }
        })
        .unwrap();
        let field = grid_flow(&a, &a, 8).unwrap();
        assert!(field.u.iter().all(|&x| x == 0.0));
        let flat = Frame::from_fn(64, 64, |_, _| [7; 3]).unwrap();
        assert!(matches!(grid_flow(&flat, &flat, 4), Err(Error::TrackingFailure(_))));
    }

    #[test]
    fn binary_export_round_trip() {
        let mut f = FlowField::zeros(5, 4);
        f.u[3] = 1.5;
        f.v[19] = -2.25;
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 8 * 20);
        assert_eq!(&buf[..4], b"SKFL");
        assert_eq!(FlowField::read_from(&buf[..]).unwrap(), f);
        assert!(FlowField::read_from(&buf[..30]).is_err());
    }
}
