use crate::error::{Error, Result};
use crate::image::Image;

pub const DESCRIPTOR_LEN: usize = 8;
pub type Descriptor = [f64; DESCRIPTOR_LEN];

/// Geometry of a non-overlapping patch partition. Residual border pixels
/// belong to the last row/column of patches for lookup purposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchLayout {
    pub width: usize,
    pub height: usize,
    pub patch_size: usize,
    pub rows: usize,
    pub cols: usize,
}

impl PatchLayout {
    pub fn new(width: usize, height: usize, patch_size: usize) -> Result<Self> {
        if patch_size < 2 {
            return Err(Error::InvalidArgument(format!("patch_size {patch_size} < 2")));
        }
        if width < patch_size || height < patch_size {
            return Err(Error::InvalidArgument(format!(
                "{width}x{height} image is smaller than one {patch_size}px patch"
            )));
        }
        Ok(Self { width, height, patch_size, rows: height / patch_size, cols: width / patch_size })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self, index: usize) -> (usize, usize) {
        let (r, c) = (index / self.cols, index % self.cols);
        let half = self.patch_size / 2;
        (c * self.patch_size + half, r * self.patch_size + half)
    }

    pub fn patch_of(&self, x: usize, y: usize) -> usize {
        let r = (y / self.patch_size).min(self.rows - 1);
        let c = (x / self.patch_size).min(self.cols - 1);
        r * self.cols + c
    }
}

/// Patch partition of an image plus one handcrafted descriptor per patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    layout: PatchLayout,
    descriptors: Vec<Descriptor>,
}

impl PatchGrid {
    pub fn build(img: &Image, patch_size: usize) -> Result<Self> {
        let layout = PatchLayout::new(img.width(), img.height(), patch_size)?;
        let lum = luminance(img);
        let descriptors = (0..layout.len()).map(|i| describe_patch(img, &lum, &layout, i)).collect();
        Ok(Self { layout, descriptors })
    }

    pub fn from_descriptors(layout: PatchLayout, descriptors: Vec<Descriptor>) -> Result<Self> {
        if descriptors.len() != layout.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} descriptors for {} patches",
                descriptors.len(),
                layout.len()
            )));
        }
        if descriptors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite descriptor entry".into()));
        }
        Ok(Self { layout, descriptors })
    }

    pub fn layout(&self) -> &PatchLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.layout.rows
    }

    pub fn cols(&self) -> usize {
        self.layout.cols
    }

    pub fn patch_size(&self) -> usize {
        self.layout.patch_size
    }

    pub fn descriptors(&self) -> &[Descriptor] {
        &self.descriptors
    }

    pub fn center(&self, index: usize) -> (usize, usize) {
        self.layout.center(index)
    }

    pub fn centers(&self) -> Vec<(usize, usize)> {
        (0..self.len()).map(|i| self.layout.center(i)).collect()
    }
}

fn luminance(img: &Image) -> Vec<f64> {
    img.data()
        .chunks_exact(3)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect()
}

// [mean R, mean G, mean B, luminance std, 4-bin orientation histogram]
fn describe_patch(img: &Image, lum: &[f64], layout: &PatchLayout, index: usize) -> Descriptor {
    let ps = layout.patch_size;
    let (x0, y0) = ((index % layout.cols) * ps, (index / layout.cols) * ps);
    let (w, h) = (img.width(), img.height());
    let at = |x: usize, y: usize| lum[y * w + x];

    let mut rgb = [0.0f64; 3];
    let mut sum_l = 0.0;
    let mut hist = [0.0f64; 4];
    for y in y0..y0 + ps {
        for x in x0..x0 + ps {
            let p = img.pixel(x, y);
            for (acc, &v) in rgb.iter_mut().zip(&p) {
                *acc += v as f64;
            }
            let l = at(x, y);
            sum_l += l;

            let gx = (at((x + 1).min(w - 1), y) - at(x.saturating_sub(1), y)) / 2.0;
            let gy = (at(x, (y + 1).min(h - 1)) - at(x, y.saturating_sub(1))) / 2.0;
            let mag = gx.hypot(gy);
            if mag > 0.0 {
                let deg = gy.atan2(gx).to_degrees().rem_euclid(180.0);
                let bin = ((deg / 45.0).round() as usize) % 4;
                hist[bin] += mag;
            }
        }
    }
    let n = (ps * ps) as f64;
    let mean_l = sum_l / n;
    let var_l = (y0..y0 + ps)
        .flat_map(|y| (x0..x0 + ps).map(move |x| (x, y)))
        .map(|(x, y)| (at(x, y) - mean_l).powi(2))
        .sum::<f64>()
        / n;
    let std_l = var_l.sqrt();
    let mass: f64 = hist.iter().sum();
    if mass > 0.0 {
        hist.iter_mut().for_each(|v| *v /= mass);
    }
    [
        rgb[0] / n / 255.0,
        rgb[1] / n / 255.0,
        rgb[2] / n / 255.0,
        (std_l / 127.5).min(1.0),
        hist[0],
        hist[1],
        hist[2],
        hist[3],
    ]
}
