//! Grayscale raster primitives used by the classification data pipeline.
//!
//! Pixel values are ink intensities in `[0, 1]` (1 = stroke). Resampling
//! is bilinear with clamped borders.

#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel count");
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn blank(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.pixels[y * self.width + x] = v;
    }

    fn clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    /// Bilinear sample at pixel-center coordinates `(x, y)`.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let (fx, fy) = (x - x0, y - y0);
        let (xi, yi) = (x0 as isize, y0 as isize);
        let top = self.clamped(xi, yi) * (1.0 - fx) + self.clamped(xi + 1, yi) * fx;
        let bottom = self.clamped(xi, yi + 1) * (1.0 - fx) + self.clamped(xi + 1, yi + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Rotates by `angle` radians about the image center, then shifts by
/// `(dx, dy)` pixels; output has the input's size.
pub fn rotate_translate(img: &GrayImage, angle: f64, dx: f64, dy: f64) -> GrayImage {
    if angle == 0.0 && dx == 0.0 && dy == 0.0 {
        return img.clone();
    }
    let cx = (img.width as f64 - 1.0) / 2.0;
    let cy = (img.height as f64 - 1.0) / 2.0;
    let (sin, cos) = angle.sin_cos();
    let mut out = GrayImage::blank(img.width, img.height);
    for y in 0..img.height {
        for x in 0..img.width {
            // inverse map: undo the shift, then rotate back by -angle
            let u = x as f64 - dx - cx;
            let v = y as f64 - dy - cy;
            let sx = cos * u + sin * v + cx;
            let sy = -sin * u + cos * v + cy;
            out.set(x, y, img.sample(sx, sy));
        }
    }
    out
}

/// Triangle-filter weights for resampling `src` samples onto `dst`.
/// The filter widens with the reduction factor so thin strokes survive.
fn resample_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    let support = scale.max(1.0);
    (0..dst)
        .map(|i| {
            let center = (i as f64 + 0.5) * scale - 0.5;
            let lo = (center - support).floor() as isize;
            let hi = (center + support).ceil() as isize;
            let mut taps: Vec<(usize, f64)> = Vec::new();
            for s in lo..=hi {
                let w = 1.0 - ((s as f64 - center) / support).abs();
                if w > 0.0 {
                    let idx = s.clamp(0, src as isize - 1) as usize;
                    taps.push((idx, w));
                }
            }
            let total: f64 = taps.iter().map(|t| t.1).sum();
            taps.iter_mut().for_each(|t| t.1 /= total);
            taps
        })
        .collect()
}

/// Separable bilinear resize to `width × height`.
pub fn resize(img: &GrayImage, width: usize, height: usize) -> GrayImage {
    if img.width == width && img.height == height {
        return img.clone();
    }
    let wx = resample_weights(img.width, width);
    let wy = resample_weights(img.height, height);
    let mut horizontal = vec![0.0; width * img.height];
    for y in 0..img.height {
        for (x, taps) in wx.iter().enumerate() {
            horizontal[y * width + x] = taps.iter().map(|&(s, w)| w * img.get(s, y)).sum();
        }
    }
    let mut out = vec![0.0; width * height];
    for (y, taps) in wy.iter().enumerate() {
        for x in 0..width {
            out[y * width + x] = taps
                .iter()
                .map(|&(s, w)| w * horizontal[s * width + x])
                .sum();
        }
    }
    GrayImage::new(width, height, out)
}

/// Exact rotation by `quarters` × 90° counter-clockwise; square images only.
pub fn rotate_quarters(img: &GrayImage, quarters: u8) -> GrayImage {
    assert_eq!(
        img.width, img.height,
        "quarter rotation needs a square image"
    );
    let n = img.width;
    let mut out = img.clone();
    for _ in 0..quarters % 4 {
        let src = out.clone();
        for y in 0..n {
            for x in 0..n {
                // counter-clockwise: (x, y) <- (n-1-y, x)
                out.set(x, y, src.get(n - 1 - y, x));
            }
        }
    }
    out
}
