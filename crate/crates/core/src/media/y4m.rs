//! YUV4MPEG2 reader and writer.
//!
//! Reads 4:2:0 (any siting variant), 4:4:4 and mono streams, converting to RGB
//! with full-range BT.601. Writes 4:4:4. Frames decoded from a 4:4:4 stream
//! keep their source planes so that re-emitting them is lossless.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Frame, FrameSequence, DEFAULT_FPS};
use crate::error::{Error, Result};

const MAGIC: &[u8] = b"YUV4MPEG2";
const FRAME_MAGIC: &[u8] = b"FRAME";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chroma {
    C420,
    C444,
    Mono,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub chroma: Chroma,
}

impl Chroma {
    fn plane_dims(self, w: usize, h: usize) -> (usize, usize) {
        match self {
            Chroma::C420 => (w.div_ceil(2), h.div_ceil(2)),
            Chroma::C444 => (w, h),
            Chroma::Mono => (0, 0),
        }
    }
}

fn parse_header(line: &[u8]) -> Result<Header> {
    let text = std::str::from_utf8(line).map_err(|_| Error::Parse("non-ASCII Y4M header".into()))?;
    let mut tokens = text.split_ascii_whitespace();
    if tokens.next().map(str::as_bytes) != Some(MAGIC) {
        return Err(Error::Parse("missing YUV4MPEG2 magic".into()));
    }
    let (mut width, mut height, mut fps, mut chroma) = (None, None, None, Chroma::C420);
    for tok in tokens {
        let (tag, val) = tok.split_at(1);
        match tag {
            "W" => width = Some(parse_num(val, "width")?),
            "H" => height = Some(parse_num(val, "height")?),
            "F" => {
                let (n, d) = val
                    .split_once(':')
                    .ok_or_else(|| Error::Parse(format!("bad frame rate {val:?}")))?;
                let n: f64 = parse_num::<u64>(n, "frame rate")? as f64;
                let d: f64 = parse_num::<u64>(d, "frame rate")? as f64;
                if n > 0.0 && d > 0.0 {
                    fps = Some(n / d);
                }
            }
            "C" => {
                chroma = match val {
                    "420" | "420jpeg" | "420paldv" | "420mpeg2" => Chroma::C420,
                    "444" => Chroma::C444,
                    "mono" => Chroma::Mono,
                    other => return Err(Error::Parse(format!("unsupported colorspace C{other}"))),
                }
            }
            // interlacing, aspect ratio and extensions do not affect decoding
            "I" | "A" | "X" => {}
            _ => return Err(Error::Parse(format!("unknown header token {tok:?}"))),
        }
    }
    let width = width.ok_or_else(|| Error::Parse("header lacks W".into()))?;
    let height = height.ok_or_else(|| Error::Parse("header lacks H".into()))?;
    Ok(Header {
        width,
        height,
        fps: fps.unwrap_or(DEFAULT_FPS),
        chroma,
    })
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("bad {what} value {s:?}")))
}

#[inline]
fn clamp_u8(v: f32) -> u8 {
    // saturating cast: floor for positive values, 0 below
    (v + 0.5) as u8
}

#[inline]
pub fn yuv_to_rgb(y: u8, u: u8, v: u8) -> [u8; 3] {
    let (y, u, v) = (y as f32, u as f32 - 128.0, v as f32 - 128.0);
    [
        clamp_u8(y + 1.402 * v),
        clamp_u8(y - 0.344_136 * u - 0.714_136 * v),
        clamp_u8(y + 1.772 * u),
    ]
}

#[inline]
pub fn rgb_to_yuv(r: u8, g: u8, b: u8) -> [u8; 3] {
    let (r, g, b) = (r as f32, g as f32, b as f32);
    [
        clamp_u8(0.299 * r + 0.587 * g + 0.114 * b),
        clamp_u8(128.0 - 0.168_736 * r - 0.331_264 * g + 0.5 * b),
        clamp_u8(128.0 + 0.5 * r - 0.418_688 * g - 0.081_312 * b),
    ]
}

/// Decode an in-memory Y4M stream.
pub fn read_y4m(bytes: &[u8]) -> Result<FrameSequence> {
    let eol = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Parse("unterminated Y4M header".into()))?;
    let header = parse_header(&bytes[..eol])?;
    let (w, h) = (header.width, header.height);
    let (cw, ch) = header.chroma.plane_dims(w, h);
    let payload = w * h + 2 * cw * ch;

    let mut frames = Vec::new();
    let mut pos = eol + 1;
    while pos < bytes.len() {
        let index = frames.len();
        let rest = &bytes[pos..];
        let Some(line_end) = rest.iter().position(|&b| b == b'\n') else {
            return Err(if FRAME_MAGIC.starts_with(rest) || rest.starts_with(FRAME_MAGIC) {
                Error::Truncated { frame: index }
            } else {
                Error::Parse(format!("expected FRAME marker for frame {index}"))
            });
        };
        if !rest[..line_end].starts_with(FRAME_MAGIC) {
            return Err(Error::Parse(format!("expected FRAME marker for frame {index}")));
        }
        let start = pos + line_end + 1;
        let data = bytes
            .get(start..start + payload)
            .ok_or(Error::Truncated { frame: index })?;
        frames.push(decode_frame(data, &header)?);
        pos = start + payload;
    }
    if frames.is_empty() {
        return Err(Error::EmptyInput("Y4M stream contains no frames".into()));
    }
    FrameSequence::new(frames, header.fps)
}

fn decode_frame(data: &[u8], header: &Header) -> Result<Frame> {
    let (w, h) = (header.width, header.height);
    let (luma, chroma) = data.split_at(w * h);
    let mut rgb = Vec::with_capacity(w * h * 3);
    match header.chroma {
        Chroma::Mono => {
            for &y in luma {
                rgb.extend_from_slice(&yuv_to_rgb(y, 128, 128));
            }
            Frame::new(w, h, rgb)
        }
        Chroma::C444 => {
            let (u, v) = chroma.split_at(w * h);
            for i in 0..w * h {
                rgb.extend_from_slice(&yuv_to_rgb(luma[i], u[i], v[i]));
            }
            Ok(Frame::new(w, h, rgb)?.with_source_yuv(data.to_vec()))
        }
        Chroma::C420 => {
            let (cw, ch) = Chroma::C420.plane_dims(w, h);
            let (u, v) = chroma.split_at(cw * ch);
            for y in 0..h {
                for x in 0..w {
                    let c = (y / 2) * cw + x / 2;
                    rgb.extend_from_slice(&yuv_to_rgb(luma[y * w + x], u[c], v[c]));
                }
            }
            Frame::new(w, h, rgb)
        }
    }
}

pub fn load_y4m(path: &Path) -> Result<FrameSequence> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_y4m(&bytes)
}

/// Encode a sequence as a 4:4:4 Y4M stream.
pub fn write_y4m(seq: &FrameSequence, mut out: impl Write) -> std::io::Result<()> {
    let (num, den) = fps_ratio(seq.fps());
    writeln!(
        out,
        "YUV4MPEG2 W{} H{} F{num}:{den} Ip A1:1 C444",
        seq.width(),
        seq.height()
    )?;
    let n = seq.width() * seq.height();
    let mut planes = vec![0u8; 3 * n];
    for frame in seq.frames() {
        out.write_all(b"FRAME\n")?;
        if let Some(src) = frame.source_yuv() {
            out.write_all(src)?;
            continue;
        }
        for (i, p) in frame.rgb().chunks_exact(3).enumerate() {
            let [y, u, v] = rgb_to_yuv(p[0], p[1], p[2]);
            planes[i] = y;
            planes[n + i] = u;
            planes[2 * n + i] = v;
        }
        out.write_all(&planes)?;
    }
    Ok(())
}

fn fps_ratio(fps: f64) -> (u64, u64) {
    if (fps - fps.round()).abs() < 1e-9 {
        (fps.round() as u64, 1)
    } else {
        ((fps * 1000.0).round() as u64, 1000)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(header: &str, frames: usize, payload: impl Fn(usize) -> Vec<u8>) -> Vec<u8> {
        let mut b = format!("{header}\n").into_bytes();
        for i in 0..frames {
            b.extend_from_slice(b"FRAME\n");
            b.extend(payload(i));
        }
        b
    }

    #[test]
    fn neutral_gray_420() {
        let bytes = stream("YUV4MPEG2 W64 H48 F30:1 C420jpeg", 3, |_| {
            vec![128u8; 64 * 48 + 2 * 32 * 24]
        });
        let seq = read_y4m(&bytes).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq.fps(), 30.0);
        for f in seq.frames() {
            assert!(f.rgb().iter().all(|&c| (c as i32 - 128).abs() <= 1));
        }
    }

    #[test]
    fn fps_from_header_and_default() {
        let bytes = stream("YUV4MPEG2 W16 H16 F30000:1001 C444", 2, |_| vec![0; 16 * 16 * 3]);
        assert!((read_y4m(&bytes).unwrap().fps() - 29.97).abs() < 1e-3);
        let bytes = stream("YUV4MPEG2 W16 H16 C444", 2, |_| vec![0; 16 * 16 * 3]);
        assert_eq!(read_y4m(&bytes).unwrap().fps(), 30.0);
    }

    #[test]
    fn truncated_stream_names_frame() {
        let mut bytes = stream("YUV4MPEG2 W16 H16 F30:1 C444", 3, |_| vec![0; 16 * 16 * 3]);
        bytes.truncate(bytes.len() - 100);
        match read_y4m(&bytes) {
            Err(Error::Truncated { frame }) => assert_eq!(frame, 2),
            other => panic!("{other:?}"),
        }
        // cut inside the FRAME marker itself
        let mut bytes = stream("YUV4MPEG2 W16 H16 F30:1 C444", 2, |_| vec![0; 16 * 16 * 3]);
        bytes.extend_from_slice(b"FRA");
        assert!(matches!(read_y4m(&bytes), Err(Error::Truncated { frame: 2 })));
    }

    #[test]
    fn malformed_headers() {
        assert!(matches!(read_y4m(b"YUV4MPEG W16 H16\n"), Err(Error::Parse(_))));
        assert!(matches!(read_y4m(b"YUV4MPEG2 W16\n"), Err(Error::Parse(_))));
        assert!(matches!(read_y4m(b"YUV4MPEG2 W16 H16 C422\n"), Err(Error::Parse(_))));
        assert!(matches!(read_y4m(b"YUV4MPEG2 W16 H16 F30:1"), Err(Error::Parse(_))));
    }

    #[test]
    fn rgb_frames_survive_encode_decode_within_one_level() {
        let frames: Vec<Frame> = (0..2)
            .map(|k| Frame::from_fn(16, 16, |x, y| [(x * 16) as u8, (y * 16) as u8, (k * 90) as u8]).unwrap())
            .collect();
        let seq = FrameSequence::new(frames, 25.0).unwrap();
        let mut buf = Vec::new();
        write_y4m(&seq, &mut buf).unwrap();
        let back = read_y4m(&buf).unwrap();
        assert_eq!(back.fps(), 25.0);
        for (a, b) in seq.frames().iter().zip(back.frames()) {
            assert!(a.rgb().iter().zip(b.rgb()).all(|(&p, &q)| (p as i32 - q as i32).abs() <= 1));
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        // load -> emit of a 4:4:4 stream reproduces the input bytes exactly
        #[test]
        fn y444_stream_round_trip_is_lossless(
            planes in proptest::collection::vec(proptest::num::u8::ANY, 2 * 16 * 16 * 3)
        ) {
            let bytes = stream("YUV4MPEG2 W16 H16 F30:1 Ip A1:1 C444", 2, |i| {
                planes[i * 768..(i + 1) * 768].to_vec()
            });
            let seq = read_y4m(&bytes).unwrap();
            let mut out = Vec::new();
            write_y4m(&seq, &mut out).unwrap();
            proptest::prop_assert_eq!(out, bytes);
        }
    }
}
