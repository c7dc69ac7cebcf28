use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use super::{Frame, FrameSequence, DEFAULT_FPS};
use crate::error::{Error, Result};

/// Parse a binary PPM (P6) or PGM (P5) image with maxval <= 255.
pub fn read_pnm(bytes: &[u8]) -> Result<Frame> {
    let mut pos = 0usize;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse("unexpected end of PNM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let channels = match magic.as_str() {
        "P6" => 3,
        "P5" => 1,
        other => return Err(Error::Parse(format!("unsupported PNM magic {other:?}"))),
    };
    let num = |s: String| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::Parse(format!("bad PNM header field {s:?}")))
    };
    let width = num(token()?)?;
    let height = num(token()?)?;
    let maxval = num(token()?)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Parse(format!("unsupported PNM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    let data = bytes
        .get(pos + 1..)
        .ok_or_else(|| Error::Parse("missing PNM raster".into()))?;
    let need = width * height * channels;
    if data.len() < need {
        return Err(Error::Parse(format!(
            "PNM raster has {} bytes, expected {need}",
            data.len()
        )));
    }
    let scale = |v: u8| -> u8 {
        if maxval == 255 {
            v
        } else {
            ((v as u32 * 255 + maxval as u32 / 2) / maxval as u32).min(255) as u8
        }
    };
    let rgb: Vec<u8> = if channels == 3 {
        data[..need].iter().map(|&v| scale(v)).collect()
    } else {
        data[..need]
            .iter()
            .flat_map(|&v| {
                let g = scale(v);
                [g, g, g]
            })
            .collect()
    };
    Frame::new(width, height, rgb)
}

pub fn write_pnm(frame: &Frame, mut out: impl Write) -> std::io::Result<()> {
    write!(out, "P6\n{} {}\n255\n", frame.width(), frame.height())?;
    out.write_all(frame.rgb())
}

#[derive(Deserialize)]
struct Sidecar {
    fps: f64,
}

/// Load every `.ppm`/`.pgm` in a directory, ordered by file name. The frame
/// rate comes from an optional `meta.json` (`{"fps": 25}`), else 30.
pub fn load_frame_dir(dir: &Path) -> Result<FrameSequence> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("ppm") || e.eq_ignore_ascii_case("pgm"))
        })
        .collect();
    if paths.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no PPM/PGM frames in {}",
            dir.display()
        )));
    }
    paths.sort();
    let frames = paths
        .iter()
        .map(|p| read_pnm(&fs::read(p).map_err(|e| Error::io(p, e))?))
        .collect::<Result<Vec<_>>>()?;

    let meta = dir.join("meta.json");
    let fps = if meta.exists() {
        let text = fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
        serde_json::from_str::<Sidecar>(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", meta.display())))?
            .fps
    } else {
        DEFAULT_FPS
    };
    FrameSequence::new(frames, fps)
}
