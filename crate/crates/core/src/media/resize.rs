use super::Frame;
use crate::error::{Error, Result};

/// Bilinear resampling of an interleaved RGB buffer with half-pixel-centered
/// sample positions. Works for any size, including degenerate 1-pixel rows.
pub fn resize_rgb8(src: &[u8], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<u8> {
    assert_eq!(src.len(), sw * sh * 3, "rgb buffer size");
    if sw == dw && sh == dh {
        return src.to_vec();
    }
    let xs = axis_taps(sw, dw);
    let ys = axis_taps(sh, dh);
    let mut out = Vec::with_capacity(dw * dh * 3);
    for &(y0, y1, wy) in &ys {
        for &(x0, x1, wx) in &xs {
            for c in 0..3 {
                let p = |x: usize, y: usize| src[(y * sw + x) * 3 + c] as f32;
                let top = p(x0, y0) * (1.0 - wx) + p(x1, y0) * wx;
                let bot = p(x0, y1) * (1.0 - wx) + p(x1, y1) * wx;
                let v = top * (1.0 - wy) + bot * wy;
                // v lies in [0, 255]; the saturating cast rounds half up
                out.push((v + 0.5) as u8);
            }
        }
    }
    out
}

fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f32)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = s as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, (s - i0 as f64) as f32)
        })
        .collect()
}

pub fn resize_bilinear(frame: &Frame, w: usize, h: usize) -> Result<Frame> {
    if w < 8 || h < 8 {
        return Err(Error::InvalidValue(format!("resize target {w}x{h} below 8x8")));
    }
    if w == frame.width() && h == frame.height() {
        return Ok(frame.clone());
    }
    Frame::new(
        w,
        h,
        resize_rgb8(frame.rgb(), frame.width(), frame.height(), w, h),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_size_is_bitwise_equal() {
        let f = Frame::from_fn(20, 17, |x, y| [(x * 7) as u8, (y * 13) as u8, (x ^ y) as u8]).unwrap();
        let g = resize_bilinear(&f, 20, 17).unwrap();
        assert_eq!(f.rgb(), g.rgb());
        let raw = resize_rgb8(f.rgb(), 20, 17, 20, 17);
        assert_eq!(raw, f.rgb());
    }

    #[test]
    fn constant_color_survives_any_size() {
        let f = Frame::from_fn(33, 21, |_, _| [200, 13, 97]).unwrap();
        for (w, h) in [(224, 224), (16, 16), (57, 91)] {
            let g = resize_bilinear(&f, w, h).unwrap();
            assert!(g.rgb().chunks(3).all(|p| p == [200, 13, 97]));
        }
    }

    #[test]
    fn two_pixel_row_upsamples_monotonically() {
        // source positions for 2 -> 4: -0.25, 0.25, 0.75, 1.25 -> clamp -> 0, .25, .75, 1
        let out = resize_rgb8(&[0, 0, 0, 255, 255, 255], 2, 1, 4, 1);
        let row: Vec<u8> = out.chunks(3).map(|p| p[0]).collect();
        assert_eq!(row, vec![0, 64, 191, 255]);
        assert!(row.windows(2).all(|w| w[0] <= w[1]));
    }
}
