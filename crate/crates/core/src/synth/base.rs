use rand::Rng;

use crate::error::Result;
use crate::media::Frame;
use crate::plane::Plane;
use crate::rng::seeded;

fn value_noise(w: usize, h: usize, cell: usize, rng: &mut impl Rng) -> Plane {
    let gw = w / cell + 2;
    let gh = h / cell + 2;
    let lattice: Vec<f32> = (0..gw * gh).map(|_| rng.random::<f32>()).collect();
    let smooth = |t: f32| t * t * (3.0 - 2.0 * t);
    Plane::from_fn(w, h, |x, y| {
        let (gx, gy) = (x / cell, y / cell);
        let fx = smooth((x % cell) as f32 / cell as f32);
        let fy = smooth((y % cell) as f32 / cell as f32);
        let at = |i: usize, j: usize| lattice[j * gw + i];
        let top = at(gx, gy) * (1.0 - fx) + at(gx + 1, gy) * fx;
        let bot = at(gx, gy + 1) * (1.0 - fx) + at(gx + 1, gy + 1) * fx;
        top * (1.0 - fy) + bot * fy
    })
}

/// Seeded textured RGB image: multi-octave value noise per channel with
/// solid rectangles and discs on top, lightly smoothed.
pub fn procedural_base(width: usize, height: usize, seed: u64) -> Result<Frame> {
    let mut rng = seeded(seed);
    let mut channels: Vec<Plane> = (0..3)
        .map(|_| {
            let mut acc = Plane::filled(width, height, 0.0);
            let mut weight = 1.0f32;
            let mut total = 0.0f32;
            for cell in [32usize, 16, 8, 4] {
                let octave = value_noise(width, height, cell, &mut rng);
                for (a, o) in acc.data_mut().iter_mut().zip(octave.data()) {
                    *a += weight * o;
                }
                total += weight;
                weight *= 0.6;
            }
            for a in acc.data_mut() {
                *a = *a / total * 255.0;
            }
            acc
        })
        .collect();
    let shapes = (width * height / 900).max(6);
    for _ in 0..shapes {
        let color: [f32; 3] = [
            rng.random_range(0.0..255.0),
            rng.random_range(0.0..255.0),
            rng.random_range(0.0..255.0),
        ];
        let cx = rng.random_range(0.0..width as f64);
        let cy = rng.random_range(0.0..height as f64);
        let r = rng.random_range(3.0..12.0);
        let disc = rng.random_bool(0.5);
        for y in 0..height {
            for x in 0..width {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                let inside = if disc {
                    dx * dx + dy * dy <= r * r
                } else {
                    dx.abs() <= r && dy.abs() <= r * 0.7
                };
                if inside {
                    for (c, p) in channels.iter_mut().enumerate() {
                        p.set(x, y, color[c]);
                    }
                }
            }
        }
    }
    let blurred: Vec<Plane> = channels.iter().map(|p| p.binomial5().binomial5()).collect();
    Frame::from_fn(width, height, |x, y| {
        let px = |c: usize| blurred[c].get(x, y).round().clamp(0.0, 255.0) as u8;
        [px(0), px(1), px(2)]
    })
}
