use super::env::FeatureContext;
use super::graph::DualSpaceGraph;
use super::grid::{PatchGrid, PatchLayout};
use crate::error::{Error, Result};
use crate::image::{Image, Mask};

/// An image prepared as an environment: its patch grid and dual-space graph,
/// plus the ground-truth mask when one is available.
#[derive(Debug, Clone)]
pub struct Scene {
    pub image: Image,
    pub mask: Option<Mask>,
    pub grid: PatchGrid,
    pub graph: DualSpaceGraph,
}

impl Scene {
    pub fn new(image: Image, mask: Option<Mask>, patch_size: usize) -> Result<Self> {
        if let Some(m) = &mask {
            if m.width() != image.width() || m.height() != image.height() {
                return Err(Error::ShapeMismatch("mask and image dimensions differ".into()));
            }
        }
        let grid = PatchGrid::build(&image, patch_size)?;
        let graph = DualSpaceGraph::build(&grid);
        Ok(Self { image, mask, grid, graph })
    }

    pub fn layout(&self) -> &PatchLayout {
        self.grid.layout()
    }

    pub fn features(&self) -> FeatureContext<'_> {
        FeatureContext::new(&self.graph, &self.image)
    }

    pub fn gt(&self) -> Result<&Mask> {
        self.mask.as_ref().ok_or(Error::MissingGroundTruth)
    }
}
