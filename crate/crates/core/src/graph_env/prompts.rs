use serde::{Deserialize, Serialize};

use super::grid::{PatchGrid, PatchLayout};
use crate::error::{Error, Result};
use crate::image::{Image, Mask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    #[serde(rename = "pos")]
    Positive,
    #[serde(rename = "neg")]
    Negative,
}

impl Polarity {
    pub fn from_foreground(fg: bool) -> Self {
        if fg {
            Polarity::Positive
        } else {
            Polarity::Negative
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Polarity::Positive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Active,
    Inactive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPoint {
    pub id: usize,
    pub x: usize,
    pub y: usize,
    pub polarity: Polarity,
    pub status: Status,
    #[serde(skip)]
    pub patch_index: usize,
}

impl PromptPoint {
    pub fn is_active(&self) -> bool {
        self.status == Status::Active
    }
}

/// Candidate point prompts; ids are always `0..len`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPool {
    pub prompts: Vec<PromptPoint>,
}

impl PromptPool {
    /// Builds a pool from `(x, y, polarity, status)` tuples, assigning ids in
    /// order and patch indices from `layout`.
    pub fn from_points(
        layout: &PatchLayout,
        points: impl IntoIterator<Item = (usize, usize, Polarity, Status)>,
    ) -> Result<Self> {
        let mut prompts = Vec::new();
        for (id, (x, y, polarity, status)) in points.into_iter().enumerate() {
            if x >= layout.width || y >= layout.height {
                return Err(Error::InvalidArgument(format!(
                    "prompt {id} at ({x},{y}) lies outside {}x{}",
                    layout.width, layout.height
                )));
            }
            prompts.push(PromptPoint { id, x, y, polarity, status, patch_index: layout.patch_of(x, y) });
        }
        Ok(Self { prompts })
    }

    pub fn len(&self) -> usize {
        self.prompts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&PromptPoint> {
        self.prompts.get(id)
    }

    pub fn active(&self) -> impl Iterator<Item = &PromptPoint> {
        self.prompts.iter().filter(|p| p.is_active())
    }

    pub fn active_ids(&self) -> Vec<usize> {
        self.active().map(|p| p.id).collect()
    }

    pub fn active_count(&self) -> usize {
        self.active().count()
    }

    /// The active prompts renumbered as a pool of their own, with the
    /// original id of each new id.
    pub fn compact_active(&self) -> (PromptPool, Vec<usize>) {
        let origin = self.active_ids();
        let prompts = origin
            .iter()
            .enumerate()
            .map(|(id, &old)| PromptPoint { id, ..self.prompts[old].clone() })
            .collect();
        (PromptPool { prompts }, origin)
    }

    pub fn set_status(&mut self, id: usize, status: Status) {
        self.prompts[id].status = status;
    }

    pub fn set_all(&mut self, status: Status) {
        self.prompts.iter_mut().for_each(|p| p.status = status);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses pool JSON and recomputes patch indices for `layout`.
    pub fn from_json(s: &str, layout: &PatchLayout) -> Result<Self> {
        let raw: PromptPool = serde_json::from_str(s)?;
        for (i, p) in raw.prompts.iter().enumerate() {
            if p.id != i {
                return Err(Error::Format(format!("prompt ids must be 0..len, found {} at {i}", p.id)));
            }
        }
        Self::from_points(layout, raw.prompts.into_iter().map(|p| (p.x, p.y, p.polarity, p.status)))
    }
}

fn grid_points(width: usize, height: usize, interval: usize) -> Result<Vec<(usize, usize)>> {
    if interval == 0 {
        return Err(Error::InvalidArgument("prompt interval must be >= 1".into()));
    }
    let (cols, rows) = (width / interval, height / interval);
    if cols == 0 || rows == 0 {
        return Err(Error::InvalidArgument(format!(
            "no {interval}px sampling cell fits in {width}x{height}"
        )));
    }
    let half = interval / 2;
    Ok((0..rows)
        .flat_map(|r| (0..cols).map(move |c| (c * interval + half, r * interval + half)))
        .collect())
}

/// Samples one prompt per `interval`-sized cell, labeled by the mask at the
/// cell center. All prompts start with `status`.
pub fn init_ideal_prompts(
    mask: &Mask,
    interval: usize,
    layout: &PatchLayout,
    status: Status,
) -> Result<PromptPool> {
    check_layout(mask, layout)?;
    let pts = grid_points(mask.width(), mask.height(), interval)?;
    PromptPool::from_points(
        layout,
        pts.into_iter().map(|(x, y)| (x, y, Polarity::from_foreground(mask.get(x, y)), status)),
    )
}

/// Environment pool for adversarial training: the ideal prompts (active),
/// followed by one inactive decoy per cell at the cell's lower-right corner
/// with the polarity opposite to the mask there.
pub fn init_training_pool(mask: &Mask, interval: usize, layout: &PatchLayout) -> Result<PromptPool> {
    check_layout(mask, layout)?;
    let pts = grid_points(mask.width(), mask.height(), interval)?;
    let half = interval / 2;
    let ideal = pts
        .iter()
        .map(|&(x, y)| (x, y, Polarity::from_foreground(mask.get(x, y)), Status::Active));
    let decoys = pts.iter().map(|&(x, y)| {
        let dx = (x + half).min(mask.width() - 1);
        let dy = (y + half).min(mask.height() - 1);
        (dx, dy, Polarity::from_foreground(mask.get(dx, dy)).flipped(), Status::Inactive)
    });
    PromptPool::from_points(layout, ideal.chain(decoys).collect::<Vec<_>>())
}

fn check_layout(mask: &Mask, layout: &PatchLayout) -> Result<()> {
    if mask.width() != layout.width || mask.height() != layout.height {
        return Err(Error::ShapeMismatch("mask and patch layout dimensions differ".into()));
    }
    Ok(())
}

/// One active prompt per target patch, labeled by the reference mask at the
/// center of the nearest reference patch in descriptor space.
pub fn feature_match_grids(ref_grid: &PatchGrid, ref_mask: &Mask, target: &PatchGrid) -> Result<PromptPool> {
    let ref_layout = ref_grid.layout();
    if ref_mask.width() != ref_layout.width || ref_mask.height() != ref_layout.height {
        return Err(Error::ShapeMismatch("reference mask and image dimensions differ".into()));
    }
    let refs = ref_grid.descriptors();
    let points = target.descriptors().iter().enumerate().map(|(t, fd)| {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (r, rd) in refs.iter().enumerate() {
            let d: f64 = fd.iter().zip(rd).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d {
                best_d = d;
                best = r;
            }
        }
        let (rx, ry) = ref_grid.center(best);
        let (x, y) = target.center(t);
        (x, y, Polarity::from_foreground(ref_mask.get(rx, ry)), Status::Active)
    });
    PromptPool::from_points(target.layout(), points.collect::<Vec<_>>())
}

pub fn feature_match_prompts(
    ref_img: &Image,
    ref_mask: &Mask,
    target_img: &Image,
    patch_size: usize,
) -> Result<PromptPool> {
    let ref_grid = PatchGrid::build(ref_img, patch_size)?;
    let target = PatchGrid::build(target_img, patch_size)?;
    feature_match_grids(&ref_grid, ref_mask, &target)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadrant_mask() -> Mask {
        let mut m = Mask::zeros(8, 8);
        for y in 0..4 {
            for x in 0..4 {
                m.set(x, y, true);
            }
        }
        m
    }

    #[test]
    fn ideal_prompts_on_quadrant_mask() {
        let m = quadrant_mask();
        let layout = PatchLayout::new(8, 8, 4).unwrap();
        let pool = init_ideal_prompts(&m, 4, &layout, Status::Active).unwrap();
        let pts: Vec<_> = pool.prompts.iter().map(|p| (p.x, p.y, p.polarity)).collect();
        assert_eq!(
            pts,
            vec![
                (2, 2, Polarity::Positive),
                (6, 2, Polarity::Negative),
                (2, 6, Polarity::Negative),
                (6, 6, Polarity::Negative),
            ]
        );
        assert_eq!(pool.prompts.iter().map(|p| p.patch_index).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn all_foreground_gives_all_positive() {
        let m = Mask::ones(16, 16);
        let layout = PatchLayout::new(16, 16, 8).unwrap();
        let pool = init_ideal_prompts(&m, 4, &layout, Status::Active).unwrap();
        assert_eq!(pool.len(), 16);
        assert!(pool.prompts.iter().all(|p| p.polarity == Polarity::Positive));
    }

    #[test]
    fn interval_too_large_or_zero() {
        let m = Mask::zeros(8, 8);
        let layout = PatchLayout::new(8, 8, 4).unwrap();
        assert!(init_ideal_prompts(&m, 9, &layout, Status::Active).is_err());
        assert!(init_ideal_prompts(&m, 0, &layout, Status::Active).is_err());
    }

    #[test]
    fn training_pool_decoys_are_flipped_and_inactive() {
        let m = quadrant_mask();
        let layout = PatchLayout::new(8, 8, 4).unwrap();
        let pool = init_training_pool(&m, 4, &layout).unwrap();
        assert_eq!(pool.len(), 8);
        for p in &pool.prompts[..4] {
            assert!(p.is_active());
            assert_eq!(p.polarity.is_positive(), m.get(p.x, p.y));
        }
        for p in &pool.prompts[4..] {
            assert!(!p.is_active());
            assert_ne!(p.polarity.is_positive(), m.get(p.x, p.y));
        }
        assert_eq!((pool.prompts[7].x, pool.prompts[7].y), (7, 7));
    }

    #[test]
    fn json_round_trip_and_schema() {
        let layout = PatchLayout::new(8, 8, 4).unwrap();
        let pool = init_ideal_prompts(&quadrant_mask(), 4, &layout, Status::Active).unwrap();
        let s = pool.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(
            v["prompts"][0],
            serde_json::json!({"id":0,"x":2,"y":2,"polarity":"pos","status":"active"})
        );
        assert_eq!(PromptPool::from_json(&s, &layout).unwrap(), pool);
    }

    #[test]
    fn json_rejects_out_of_image_and_bad_ids() {
        let layout = PatchLayout::new(8, 8, 4).unwrap();
        let out = r#"{"prompts":[{"id":0,"x":9,"y":0,"polarity":"pos","status":"active"}]}"#;
        assert!(PromptPool::from_json(out, &layout).is_err());
        let ids = r#"{"prompts":[{"id":1,"x":0,"y":0,"polarity":"neg","status":"inactive"}]}"#;
        assert!(PromptPool::from_json(ids, &layout).is_err());
    }

    #[test]
    fn uniform_pair_matches_reference_patch_zero() {
        let img = Image::filled(32, 32, [90, 30, 200]);
        let mut mask = Mask::zeros(32, 32);
        mask.set(4, 4, true);
        let pool = feature_match_prompts(&img, &mask, &img, 8).unwrap();
        assert_eq!(pool.len(), 16);
        assert!(pool.prompts.iter().all(|p| p.polarity == Polarity::Positive && p.is_active()));
    }
}
