//! Promptable segmenter contract and the nearest-prompt proxy implementation.

use crate::error::{Error, Result};
use crate::graph_env::PromptPoint;
use crate::image::{Image, Mask};

/// Maps an image and a set of active point prompts to a binary mask.
///
/// Implementations must be pure functions of `(image, active prompts)`, and
/// adding a duplicate of an active prompt must not change the output.
pub trait Segmenter: Sync {
    /// `prompts` are all treated as active; callers filter by status.
    fn segment(&self, img: &Image, prompts: &[&PromptPoint]) -> Result<Mask>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmenterConfig {
    /// Weight of the spatial term against the color term.
    pub alpha: f64,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self { alpha: 0.5 }
    }
}

/// Labels each pixel with the polarity of its nearest prompt under a mix of
/// normalized spatial distance and RGB distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxySegmenter {
    alpha: f64,
}

impl ProxySegmenter {
    pub fn new(cfg: SegmenterConfig) -> Result<Self> {
        if !(0.0..=1.0).contains(&cfg.alpha) {
            return Err(Error::InvalidArgument(format!("alpha {} outside [0,1]", cfg.alpha)));
        }
        Ok(Self { alpha: cfg.alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for ProxySegmenter {
    fn default() -> Self {
        Self { alpha: 0.5 }
    }
}

struct Anchor {
    x: f64,
    y: f64,
    rgb: [f64; 3],
    positive: bool,
}

impl Segmenter for ProxySegmenter {
    fn segment(&self, img: &Image, prompts: &[&PromptPoint]) -> Result<Mask> {
        let (w, h) = (img.width(), img.height());
        let mut mask = Mask::zeros(w, h);
        if prompts.is_empty() {
            return Ok(mask);
        }
        // lowest id first so strict comparison keeps it on exact ties
        let mut sorted: Vec<&PromptPoint> = prompts.to_vec();
        sorted.sort_by_key(|p| p.id);
        let mut anchors = Vec::with_capacity(sorted.len());
        for p in sorted {
            if p.x >= w || p.y >= h {
                return Err(Error::InvalidArgument(format!(
                    "prompt {} at ({},{}) lies outside {w}x{h}",
                    p.id, p.x, p.y
                )));
            }
            let c = img.pixel(p.x, p.y);
            anchors.push(Anchor {
                x: p.x as f64,
                y: p.y as f64,
                rgb: c.map(|v| v as f64 / 255.0),
                positive: p.polarity.is_positive(),
            });
        }

        let ws = self.alpha / img.diagonal();
        let wc = (1.0 - self.alpha) / 3f64.sqrt();
        for y in 0..h {
            for x in 0..w {
                let q = img.pixel(x, y).map(|v| v as f64 / 255.0);
                let mut best = f64::INFINITY;
                let mut fg = false;
                for a in &anchors {
                    let sp = (x as f64 - a.x).hypot(y as f64 - a.y);
                    let dr = q[0] - a.rgb[0];
                    let dg = q[1] - a.rgb[1];
                    let db = q[2] - a.rgb[2];
                    let d = ws * sp + wc * (dr * dr + dg * dg + db * db).sqrt();
                    if d < best {
                        best = d;
                        fg = a.positive;
                    }
                }
                mask.set(x, y, fg);
            }
        }
        Ok(mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_env::{Polarity, Status};

    fn prompt(id: usize, x: usize, y: usize, polarity: Polarity) -> PromptPoint {
        PromptPoint { id, x, y, polarity, status: Status::Active, patch_index: 0 }
    }

    #[test]
    fn single_positive_gives_full_mask() {
        let img = Image::filled(10, 7, [5, 100, 200]);
        let p = prompt(0, 3, 3, Polarity::Positive);
        let m = ProxySegmenter::default().segment(&img, &[&p]).unwrap();
        assert_eq!(m.count(), 70);
    }

    #[test]
    fn empty_prompt_set_is_background() {
        let img = Image::filled(4, 4, [0, 0, 0]);
        assert_eq!(ProxySegmenter::default().segment(&img, &[]).unwrap().count(), 0);
    }

    #[test]
    fn exact_tie_goes_to_lowest_id() {
        let img = Image::filled(2, 2, [50, 50, 50]);
        let pos = prompt(0, 0, 0, Polarity::Positive);
        let neg = prompt(1, 1, 1, Polarity::Negative);
        let seg = ProxySegmenter::default();
        let m = seg.segment(&img, &[&neg, &pos]).unwrap();
        assert!(m.get(1, 0));
        assert!(m.get(0, 1));
        assert!(m.get(0, 0));
        assert!(!m.get(1, 1));
    }

    #[test]
    fn duplicate_prompt_does_not_change_output() {
        let mut img = Image::filled(16, 16, [0, 0, 0]);
        for x in 8..16 {
            for y in 0..16 {
                img.set_pixel(x, y, [200, 180, 20]);
            }
        }
        let a = prompt(0, 12, 4, Polarity::Positive);
        let b = prompt(1, 2, 9, Polarity::Negative);
        let dup = prompt(2, 12, 4, Polarity::Positive);
        let seg = ProxySegmenter::default();
        assert_eq!(seg.segment(&img, &[&a, &b]).unwrap(), seg.segment(&img, &[&a, &b, &dup]).unwrap());
    }

    #[test]
    fn out_of_image_prompt_is_error() {
        let img = Image::filled(4, 4, [0, 0, 0]);
        let p = prompt(0, 4, 0, Polarity::Positive);
        assert!(ProxySegmenter::default().segment(&img, &[&p]).is_err());
    }

    #[test]
    fn alpha_out_of_range() {
        assert!(ProxySegmenter::new(SegmenterConfig { alpha: 1.5 }).is_err());
    }
}
