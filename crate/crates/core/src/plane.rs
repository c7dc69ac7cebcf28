//! Single-channel floating point image planes and the small set of filters
//! shared by motion estimation and the feature extractors.

#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

/// `x.floor() as isize` without the libm call; `x` must be finite and well
/// inside the isize range.
#[inline]
pub(crate) fn floor_i(x: f64) -> isize {
    let t = x as isize;
    if (t as f64) > x {
        t - 1
    } else {
        t
    }
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width * height, "plane buffer size");
        Self {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    /// Pixel read with coordinates clamped to the border.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }

    /// Bilinear sample at pixel coordinates (integer = pixel center), border clamped.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let (xi, yi) = (floor_i(x), floor_i(y));
        let ax = x - xi as f64;
        let ay = y - yi as f64;
        let p00 = self.get_clamped(xi, yi) as f64;
        let p10 = self.get_clamped(xi + 1, yi) as f64;
        let p01 = self.get_clamped(xi, yi + 1) as f64;
        let p11 = self.get_clamped(xi + 1, yi + 1) as f64;
        (1.0 - ay) * ((1.0 - ax) * p00 + ax * p10) + ay * ((1.0 - ax) * p01 + ax * p11)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// Population standard deviation of all pixels.
    pub fn std(&self) -> f64 {
        let m = self.mean();
        let var = self
            .data
            .iter()
            .map(|&v| (v as f64 - m).powi(2))
            .sum::<f64>()
            / self.data.len() as f64;
        var.sqrt()
    }

    /// 3x3 correlation with clamped borders.
    pub fn filter3(&self, k: &[[f32; 3]; 3]) -> Plane {
        let (w, h) = (self.width, self.height);
        let mut out = vec![0.0f32; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0f32;
                for (dy, row) in k.iter().enumerate() {
                    for (dx, &kv) in row.iter().enumerate() {
                        if kv != 0.0 {
                            acc += kv
                                * self.get_clamped(x as isize + dx as isize - 1, y as isize + dy as isize - 1);
                        }
                    }
                }
                out[y * w + x] = acc;
            }
        }
        Plane::new(w, h, out)
    }

    /// Sobel derivatives (unnormalized).
    pub fn sobel(&self) -> (Plane, Plane) {
        const GX: [[f32; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
        const GY: [[f32; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
        (self.filter3(&GX), self.filter3(&GY))
    }

    /// Scharr derivatives normalized to units of intensity per pixel.
    pub fn scharr(&self) -> (Plane, Plane) {
        const GX: [[f32; 3]; 3] = [
            [-3.0 / 32.0, 0.0, 3.0 / 32.0],
            [-10.0 / 32.0, 0.0, 10.0 / 32.0],
            [-3.0 / 32.0, 0.0, 3.0 / 32.0],
        ];
        const GY: [[f32; 3]; 3] = [
            [-3.0 / 32.0, -10.0 / 32.0, -3.0 / 32.0],
            [0.0, 0.0, 0.0],
            [3.0 / 32.0, 10.0 / 32.0, 3.0 / 32.0],
        ];
        (self.filter3(&GX), self.filter3(&GY))
    }

    /// Separable box blur with the given odd kernel size, clamped borders.
    pub fn box_blur(&self, size: usize) -> Plane {
        assert!(size % 2 == 1, "box kernel must be odd");
        let r = (size / 2) as isize;
        let (w, h) = (self.width, self.height);
        let mut tmp = vec![0.0f32; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for d in -r..=r {
                    acc += self.get_clamped(x as isize + d, y as isize);
                }
                tmp[y * w + x] = acc / size as f32;
            }
        }
        let tmp = Plane::new(w, h, tmp);
        let mut out = vec![0.0f32; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for d in -r..=r {
                    acc += tmp.get_clamped(x as isize, y as isize + d);
                }
                out[y * w + x] = acc / size as f32;
            }
        }
        Plane::new(w, h, out)
    }

    /// Gaussian (1 4 6 4 1)/16 smoothing followed by 2x decimation.
    /// Separable 1-4-6-4-1 smoothing with clamped borders.
    pub fn binomial5(&self) -> Plane {
        const K: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
        let (w, h) = (self.width, self.height);
        let mut tmp = vec![0.0f32; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (i, &k) in K.iter().enumerate() {
                    acc += k * self.get_clamped(x as isize + i as isize - 2, y as isize);
                }
                tmp[y * w + x] = acc;
            }
        }
        let tmp = Plane::new(w, h, tmp);
        let mut out = vec![0.0f32; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (i, &k) in K.iter().enumerate() {
                    acc += k * tmp.get_clamped(x as isize, y as isize + i as isize - 2);
                }
                out[y * w + x] = acc;
            }
        }
        Plane::new(w, h, out)
    }

    pub fn pyr_down(&self) -> Plane {
        let smooth = self.binomial5();
        let (nw, nh) = (self.width.div_ceil(2), self.height.div_ceil(2));
        let out = (0..nh)
            .flat_map(|y| (0..nw).map(move |x| (x, y)))
            .map(|(x, y)| smooth.get(2 * x, 2 * y))
            .collect();
        Plane::new(nw, nh, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_sample_interpolates_between_pixels() {
        let p = Plane::new(2, 1, vec![0.0, 10.0]);
        assert_eq!(p.sample(0.25, 0.0), 2.5);
        assert_eq!(p.sample(1.0, 0.0), 10.0);
        // clamped beyond the border
        assert_eq!(p.sample(3.0, 0.0), 10.0);
    }

    #[test]
    fn scharr_of_ramp_is_unit_slope() {
        let p = Plane::from_fn(8, 8, |x, _| 3.0 * x as f32);
        let (gx, gy) = p.scharr();
        assert!((gx.get(4, 4) - 3.0).abs() < 1e-6);
        assert!(gy.get(4, 4).abs() < 1e-6);
    }

    #[test]
    fn pyr_down_preserves_constants() {
        let p = Plane::filled(9, 7, 42.0);
        let d = p.pyr_down();
        assert_eq!((d.width(), d.height()), (5, 4));
        assert!(d.data().iter().all(|&v| (v - 42.0).abs() < 1e-5));
    }

    #[test]
    fn box_blur_preserves_mean_of_constant() {
        let p = Plane::filled(10, 10, 7.0);
        assert!(p.box_blur(5).data().iter().all(|&v| (v - 7.0).abs() < 1e-5));
    }
}
