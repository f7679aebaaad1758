use super::grid::PatchGrid;

/// Dense patch graph with two edge-weight systems: descriptor (feature)
/// distance and patch-center (physical) distance in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSpaceGraph {
    n: usize,
    m_f: Vec<f64>,
    m_p: Vec<f64>,
}

impl DualSpaceGraph {
    pub fn build(grid: &PatchGrid) -> Self {
        Self { n: grid.len(), m_f: feature_distance_matrix(grid), m_p: physical_distance_matrix(grid) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn feature(&self, i: usize, j: usize) -> f64 {
        self.m_f[i * self.n + j]
    }

    pub fn physical(&self, i: usize, j: usize) -> f64 {
        self.m_p[i * self.n + j]
    }

    pub fn feature_matrix(&self) -> &[f64] {
        &self.m_f
    }

    pub fn physical_matrix(&self) -> &[f64] {
        &self.m_p
    }

    /// Largest feature distance, used to normalize agent inputs.
    pub fn f_max(&self) -> f64 {
        self.m_f.iter().copied().fold(0.0, f64::max)
    }
}

fn symmetric_fill(n: usize, dist: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = dist(i, j);
            m[i * n + j] = d;
            m[j * n + i] = d;
        }
    }
    m
}

/// Row-major `n×n` matrix of Euclidean distances between patch descriptors.
pub fn feature_distance_matrix(grid: &PatchGrid) -> Vec<f64> {
    let f = grid.descriptors();
    symmetric_fill(f.len(), |i, j| {
        f[i].iter().zip(&f[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    })
}

/// Row-major `n×n` matrix of Euclidean distances between patch centers.
pub fn physical_distance_matrix(grid: &PatchGrid) -> Vec<f64> {
    let c = grid.centers();
    symmetric_fill(c.len(), |i, j| {
        let dx = c[i].0 as f64 - c[j].0 as f64;
        let dy = c[i].1 as f64 - c[j].1 as f64;
        dx.hypot(dy)
    })
}
