//! Procedural ellipse-blob scenes with exact ground-truth masks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::rng::Rng;

const MIN_COLOR_SEPARATION: f64 = 60.0;
const MAX_TRIES: usize = 100;
const STRIPE_AMPLITUDE: f64 = 18.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub size: usize,
    pub blob_count: usize,
    pub fg_color: [u8; 3],
    pub bg_color: [u8; 3],
    /// Uniform per-channel noise amplitude in intensity units (0..=30).
    pub noise_amp: u8,
    /// Period in pixels of vertical luminance stripes on the background.
    pub stripe_period: Option<usize>,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            size: 64,
            blob_count: 2,
            fg_color: [150, 110, 100],
            bg_color: [100, 120, 140],
            noise_amp: 30,
            stripe_period: None,
            seed: 0,
        }
    }
}

fn color_distance(a: [u8; 3], b: [u8; 3]) -> f64 {
    a.iter().zip(&b).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum::<f64>().sqrt()
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.size < 32 {
            return bad(format!("scene size {} < 32", self.size));
        }
        if !(1..=3).contains(&self.blob_count) {
            return bad(format!("blob_count {} outside 1..=3", self.blob_count));
        }
        if self.noise_amp > 30 {
            return bad(format!("noise_amp {} > 30", self.noise_amp));
        }
        if self.stripe_period == Some(0) {
            return bad("stripe_period must be positive".into());
        }
        let sep = color_distance(self.fg_color, self.bg_color);
        if sep < MIN_COLOR_SEPARATION {
            return bad(format!("fg/bg color separation {sep:.1} < {MIN_COLOR_SEPARATION}"));
        }
        Ok(())
    }
}

struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    cos: f64,
    sin: f64,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = dx * self.cos + dy * self.sin;
        let v = -dx * self.sin + dy * self.cos;
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }
}

fn random_ellipse(size: f64, rng: &mut Rng) -> Ellipse {
    let (lo, hi) = (size / 8.0, size / 3.0);
    let a = rng.uniform(lo, hi);
    let b = rng.uniform(lo, hi);
    let theta = rng.uniform(0.0, std::f64::consts::PI);
    // bounding radius keeps the whole blob inside the image
    let r = a.max(b);
    let cx = rng.uniform(r, size - r);
    let cy = rng.uniform(r, size - r);
    Ellipse { cx, cy, a, b, cos: theta.cos(), sin: theta.sin() }
}

fn jitter(c: u8, amp: u8, rng: &mut Rng) -> u8 {
    if amp == 0 {
        return c;
    }
    let n = rng.next_int(2 * amp as usize + 1).unwrap() as i32 - amp as i32;
    (c as i32 + n).clamp(0, 255) as u8
}

/// Generates one scene. Pure function of `spec`.
pub fn gen_scene(spec: &SceneSpec) -> Result<(Image, Mask)> {
    spec.validate()?;
    let size = spec.size;
    let mut rng = Rng::new(spec.seed);
    let mut mask = None;
    for _ in 0..MAX_TRIES {
        let blobs: Vec<Ellipse> = (0..spec.blob_count).map(|_| random_ellipse(size as f64, &mut rng)).collect();
        let mut m = Mask::zeros(size, size);
        for y in 0..size {
            for x in 0..size {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                if blobs.iter().any(|e| e.contains(px, py)) {
                    m.set(x, y, true);
                }
            }
        }
        let frac = m.count() as f64 / (size * size) as f64;
        if (0.05..=0.60).contains(&frac) {
            mask = Some(m);
            break;
        }
    }
    let mask = mask.ok_or_else(|| {
        Error::Generation(format!("no blob layout with 5-60% foreground after {MAX_TRIES} tries"))
    })?;

    let mut img = Image::filled(size, size, spec.bg_color);
    for y in 0..size {
        for x in 0..size {
            let fg = mask.get(x, y);
            let base = if fg { spec.fg_color } else { spec.bg_color };
            let stripe = match spec.stripe_period {
                Some(p) if !fg => {
                    if (x % p) < p.div_ceil(2) {
                        STRIPE_AMPLITUDE
                    } else {
                        -STRIPE_AMPLITUDE
                    }
                }
                _ => 0.0,
            };
            let px = base.map(|c| {
                let c = (c as f64 + stripe).clamp(0.0, 255.0) as u8;
                jitter(c, spec.noise_amp, &mut rng)
            });
            img.set_pixel(x, y, px);
        }
    }
    Ok((img, mask))
}

/// Spec of scene `index`: seed `base_seed + index`, colors jittered around
/// the template's while keeping the fg/bg separation, blob count drawn from
/// `1..=template.blob_count`.
pub fn scene_spec(template: &SceneSpec, base_seed: u64, index: usize) -> Result<SceneSpec> {
    template.validate()?;
    let seed = base_seed.wrapping_add(index as u64);
    let mut rng = Rng::with_stream(seed, 2);
    for _ in 0..MAX_TRIES {
        let fg = template.fg_color.map(|c| jitter(c, 20, &mut rng));
        let bg = template.bg_color.map(|c| jitter(c, 20, &mut rng));
        if color_distance(fg, bg) >= MIN_COLOR_SEPARATION {
            let blob_count = 1 + rng.next_int(template.blob_count)?;
            return Ok(SceneSpec { fg_color: fg, bg_color: bg, blob_count, seed, ..template.clone() });
        }
    }
    Err(Error::Generation("could not draw separated scene colors".into()))
}

pub fn gen_dataset(count: usize, base_seed: u64, template: &SceneSpec) -> Result<Vec<(Image, Mask)>> {
    if count == 0 {
        return Err(Error::InvalidArgument("dataset count must be >= 1".into()));
    }
    (0..count).map(|i| gen_scene(&scene_spec(template, base_seed, i)?)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub image: String,
    pub mask: String,
    pub spec: SceneSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub base_seed: u64,
    pub count: usize,
    pub template: SceneSpec,
    pub scenes: Vec<ManifestEntry>,
}

/// Writes `{i}.ppm`, `{i}_mask.pgm` and `manifest.json` into `dir`.
pub fn write_dataset(dir: &Path, count: usize, base_seed: u64, template: &SceneSpec) -> Result<Manifest> {
    if count == 0 {
        return Err(Error::InvalidArgument("dataset count must be >= 1".into()));
    }
    std::fs::create_dir_all(dir)?;
    let mut scenes = Vec::with_capacity(count);
    for i in 0..count {
        let spec = scene_spec(template, base_seed, i)?;
        let (img, mask) = gen_scene(&spec)?;
        let entry = ManifestEntry { index: i, image: format!("{i}.ppm"), mask: format!("{i}_mask.pgm"), spec };
        img.write_ppm(dir.join(&entry.image))?;
        mask.write_pgm(dir.join(&entry.mask))?;
        scenes.push(entry);
    }
    let manifest = Manifest { base_seed, count, template: template.clone(), scenes };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Loads image/mask pairs listed in `dir/manifest.json`, or, without a
/// manifest, every `{i}.ppm` with a matching `{i}_mask.pgm` for i = 0, 1, ...
pub fn load_dataset(dir: &Path) -> Result<Vec<(Image, Mask)>> {
    let manifest_path = dir.join("manifest.json");
    let pairs: Vec<(String, String)> = if manifest_path.exists() {
        let m: Manifest = serde_json::from_str(&std::fs::read_to_string(manifest_path)?)?;
        m.scenes.into_iter().map(|e| (e.image, e.mask)).collect()
    } else {
        (0..)
            .map(|i| (format!("{i}.ppm"), format!("{i}_mask.pgm")))
            .take_while(|(img, mask)| dir.join(img).exists() && dir.join(mask).exists())
            .collect()
    };
    pairs
        .into_iter()
        .map(|(img, mask)| {
            let img = Image::read_ppm(dir.join(img))?;
            let mask = Mask::read_pgm(dir.join(mask))?;
            if !(img.width() == mask.width() && img.height() == mask.height()) {
                return Err(Error::ShapeMismatch("image and mask dimensions differ".into()));
            }
            Ok((img, mask))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let spec = SceneSpec { seed: 17, stripe_period: Some(8), ..Default::default() };
        assert_eq!(gen_scene(&spec).unwrap(), gen_scene(&spec).unwrap());
    }

    #[test]
    fn noiseless_foreground_is_exact() {
        let spec = SceneSpec { noise_amp: 0, seed: 4, ..Default::default() };
        let (img, mask) = gen_scene(&spec).unwrap();
        for y in 0..64 {
            for x in 0..64 {
                let expect = if mask.get(x, y) { spec.fg_color } else { spec.bg_color };
                assert_eq!(img.pixel(x, y), expect);
            }
        }
    }

    #[test]
    fn foreground_fraction_bounds() {
        for seed in 0..100 {
            let spec = scene_spec(&SceneSpec::default(), seed, 0).unwrap();
            let (_, mask) = gen_scene(&spec).unwrap();
            let f = mask.count() as f64 / 4096.0;
            assert!((0.05..=0.60).contains(&f), "seed {seed}: {f}");
        }
    }

    #[test]
    fn invalid_specs() {
        let close = SceneSpec { fg_color: [100, 100, 100], bg_color: [120, 120, 120], ..Default::default() };
        assert!(gen_scene(&close).is_err());
        assert!(gen_scene(&SceneSpec { size: 16, ..Default::default() }).is_err());
        assert!(gen_scene(&SceneSpec { blob_count: 4, ..Default::default() }).is_err());
        assert!(gen_dataset(0, 0, &SceneSpec::default()).is_err());
    }

    #[test]
    fn dataset_of_one_matches_scene() {
        let t = SceneSpec::default();
        let ds = gen_dataset(1, 9, &t).unwrap();
        assert_eq!(ds[0], gen_scene(&scene_spec(&t, 9, 0).unwrap()).unwrap());
    }

    #[test]
    fn jittered_colors_stay_separated() {
        for i in 0..200 {
            let s = scene_spec(&SceneSpec::default(), 0, i).unwrap();
            assert!(color_distance(s.fg_color, s.bg_color) >= MIN_COLOR_SEPARATION);
        }
    }
}
