//! Synthetic layered phantoms with known tumor masks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{parse_f64, parse_kv, parse_positive, parse_usize};
use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, GrayImage, MIN_SIDE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    /// Fraction of the image height.
    pub thickness: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tumor {
    /// Normalized `(x, y)`.
    pub center: (f64, f64),
    /// Normalized `(rx, ry)`.
    pub radii: (f64, f64),
    pub intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Noise {
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    /// Top to bottom.
    pub bands: Vec<Band>,
    pub tumor: Option<Tumor>,
    pub noise: Noise,
}

/// Skin, fat, mammary and muscle, top to bottom.
pub const DEFAULT_BANDS: [Band; 4] = [
    Band { thickness: 0.15, intensity: 0.8 },
    Band { thickness: 0.2, intensity: 0.25 },
    Band { thickness: 0.4, intensity: 0.55 },
    Band { thickness: 0.25, intensity: 0.4 },
];

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            bands: DEFAULT_BANDS.to_vec(),
            tumor: Some(Tumor {
                center: (0.5, 0.55),
                radii: (0.15, 0.1),
                intensity: 0.1,
            }),
            noise: Noise { sigma: 0.05, seed: 1 },
        }
    }
}

fn unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Spec(format!("{name} must lie in [0,1], got {v}")))
    }
}

impl PhantomSpec {
    /// `n` equal bands alternating between bright and dark levels.
    pub fn banded(n: usize, width: usize, height: usize, sigma: f64, seed: u64) -> Self {
        const LEVELS: [f64; 7] = [0.8, 0.25, 0.6, 0.35, 0.7, 0.2, 0.5];
        Self {
            width,
            height,
            bands: (0..n)
                .map(|i| Band {
                    thickness: 1.0 / n as f64,
                    intensity: LEVELS[i % LEVELS.len()],
                })
                .collect(),
            tumor: None,
            noise: Noise { sigma, seed },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < MIN_SIDE || self.height < MIN_SIDE {
            return Err(Error::Spec(format!("image must be at least {MIN_SIDE}x{MIN_SIDE}")));
        }
        if self.bands.is_empty() {
            return Err(Error::Spec("at least one band required".into()));
        }
        for b in &self.bands {
            unit("band intensity", b.intensity)?;
            if !(b.thickness > 0.0) {
                return Err(Error::Spec("band thickness must be positive".into()));
            }
        }
        let total: f64 = self.bands.iter().map(|b| b.thickness).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Spec(format!("band thicknesses sum to {total}, not 1")));
        }
        if !(self.noise.sigma >= 0.0 && self.noise.sigma.is_finite()) {
            return Err(Error::Spec("speckle sigma must be non-negative".into()));
        }
        if let Some(t) = &self.tumor {
            unit("tumor intensity", t.intensity)?;
            if !(t.radii.0 > 0.0 && t.radii.1 > 0.0) {
                return Err(Error::Spec("tumor radii must be positive".into()));
            }
            let (cx, cy) = t.center;
            let (rx, ry) = t.radii;
            if cx - rx <= 0.0 || cx + rx >= 1.0 || cy - ry <= 0.0 || cy + ry >= 1.0 {
                return Err(Error::Spec("tumor touches the image border".into()));
            }
        }
        Ok(())
    }

    /// Band index of each row (row centres against cumulative thickness).
    pub fn band_of_rows(&self) -> Vec<usize> {
        let mut bounds = Vec::with_capacity(self.bands.len());
        let mut acc = 0.0;
        for b in &self.bands {
            acc += b.thickness;
            bounds.push(acc);
        }
        (0..self.height)
            .map(|y| {
                let v = (y as f64 + 0.5) / self.height as f64;
                bounds.iter().position(|&e| v < e).unwrap_or(self.bands.len() - 1)
            })
            .collect()
    }

    /// Tumor interior by pixel-centre inclusion.
    pub fn tumor_mask(&self) -> BinaryMask {
        let (w, h) = (self.width, self.height);
        let Some(t) = &self.tumor else {
            return BinaryMask::empty(w, h);
        };
        let data = (0..w * h)
            .map(|p| {
                let x = ((p % w) as f64 + 0.5) / w as f64;
                let y = ((p / w) as f64 + 0.5) / h as f64;
                ((x - t.center.0) / t.radii.0).powi(2) + ((y - t.center.1) / t.radii.1).powi(2) <= 1.0
            })
            .collect();
        BinaryMask::new(w, h, data).expect("shape from the spec")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        let mut tumor = spec.tumor;
        let wrap = |line: usize, e: Error| Error::Spec(format!("line {line}: {}", e.root()));
        for (line, k, v) in parse_kv(text)? {
            let r: Result<()> = (|| {
                match k.as_str() {
                    "width" => spec.width = parse_usize(&k, &v)?,
                    "height" => spec.height = parse_usize(&k, &v)?,
                    "bands" => spec.bands = parse_bands(&v)?,
                    "tumor" => {
                        tumor = if v == "none" {
                            None
                        } else {
                            let x = parse_list(&k, &v, 5)?;
                            Some(Tumor {
                                center: (x[0], x[1]),
                                radii: (x[2], x[3]),
                                intensity: x[4],
                            })
                        }
                    }
                    "speckle_sigma" => spec.noise.sigma = parse_f64(&k, &v)?,
                    "seed" => {
                        spec.noise.seed = v
                            .parse()
                            .map_err(|_| Error::Spec(format!("seed: `{v}` is not an integer")))?
                    }
                    _ => return Err(Error::Spec(format!("unknown key `{k}`"))),
                }
                Ok(())
            })();
            r.map_err(|e| wrap(line, e))?;
        }
        spec.tumor = tumor;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let bands: Vec<String> = self
            .bands
            .iter()
            .map(|b| format!("{}:{}", b.thickness, b.intensity))
            .collect();
        let tumor = match &self.tumor {
            Some(t) => format!(
                "{}, {}, {}, {}, {}",
                t.center.0, t.center.1, t.radii.0, t.radii.1, t.intensity
            ),
            None => "none".into(),
        };
        format!(
            "width = {}\nheight = {}\nbands = {}\ntumor = {}\nspeckle_sigma = {}\nseed = {}\n",
            self.width,
            self.height,
            bands.join(", "),
            tumor,
            self.noise.sigma,
            self.noise.seed
        )
    }
}

fn parse_list(key: &str, v: &str, n: usize) -> Result<Vec<f64>> {
    let x: Vec<f64> = v
        .split(',')
        .map(|s| parse_f64(key, s.trim()))
        .collect::<Result<_>>()?;
    if x.len() != n {
        return Err(Error::Spec(format!("{key}: expected {n} values, got {}", x.len())));
    }
    Ok(x)
}

/// `thickness:intensity, ...`
fn parse_bands(v: &str) -> Result<Vec<Band>> {
    v.split(',')
        .map(|item| {
            let (t, i) = item
                .split_once(':')
                .ok_or_else(|| Error::Spec(format!("band `{}` is not thickness:intensity", item.trim())))?;
            Ok(Band {
                thickness: parse_positive("band thickness", t.trim())?,
                intensity: parse_f64("band intensity", i.trim())?,
            })
        })
        .collect()
}

/// Renders the phantom and its tumor mask.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<(GrayImage, BinaryMask)> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mask = spec.tumor_mask();
    let touches = (0..w * h).any(|p| {
        let (x, y) = (p % w, p / w);
        mask.data()[p] && (x == 0 || y == 0 || x == w - 1 || y == h - 1)
    });
    if touches {
        return Err(Error::Spec("tumor touches the image border".into()));
    }
    let rows = spec.band_of_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.noise.seed);
    let data = (0..w * h)
        .map(|p| {
            let base = match (&spec.tumor, mask.data()[p]) {
                (Some(t), true) => t.intensity,
                _ => spec.bands[rows[p / w]].intensity,
            };
            let z: f64 = rng.sample(StandardNormal);
            (base * (1.0 + spec.noise.sigma * z)).clamp(0.0, 1.0)
        })
        .collect();
    Ok((GrayImage::new(w, h, data)?, mask))
}

/// Deterministic family of phantoms; tumor position and size vary with the
/// index, the speckle seed is `base_seed + index`.
pub fn suite(count: usize, with_tumor: bool, base_seed: u64) -> Vec<PhantomSpec> {
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed ^ 0x5eed_0000 ^ i as u64);
            let tumor = with_tumor.then(|| Tumor {
                center: (rng.random_range(0.35..0.65), rng.random_range(0.5..0.6)),
                radii: (rng.random_range(0.1..0.18), rng.random_range(0.07..0.12)),
                intensity: rng.random_range(0.05..0.15),
            });
            PhantomSpec {
                tumor,
                noise: Noise {
                    sigma: 0.05,
                    seed: base_seed + i as u64,
                },
                ..PhantomSpec::default()
            }
        })
        .collect()
}
