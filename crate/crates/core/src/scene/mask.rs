use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MaskImage;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum MaskPerturbation {
    /// One erosion pass with the full 3×3 structuring element.
    Erode3,
    /// One dilation pass with the full 3×3 structuring element.
    Dilate3,
    /// Flips each boundary pixel independently with probability `p`.
    BoundaryNoise { p: f64 },
}

/// Values of the 3×3 neighborhood; pixels outside the image count as 0.
fn neighborhood(mask: &MaskImage, u: usize, v: usize) -> impl Iterator<Item = bool> + '_ {
    let (w, h) = (mask.width as i64, mask.height as i64);
    (-1i64..=1).flat_map(move |dv| {
        (-1i64..=1).map(move |du| {
            let (x, y) = (u as i64 + du, v as i64 + dv);
            x >= 0 && y >= 0 && x < w && y < h && mask.data[(y * w + x) as usize]
        })
    })
}

fn map_pixels(mask: &MaskImage, f: impl Fn(usize, usize) -> bool) -> MaskImage {
    let w = mask.width as usize;
    let data = (0..mask.data.len()).map(|k| f(k % w, k / w)).collect();
    MaskImage { width: mask.width, height: mask.height, data }
}

pub fn erode3(mask: &MaskImage) -> MaskImage {
    map_pixels(mask, |u, v| neighborhood(mask, u, v).all(|b| b))
}

pub fn dilate3(mask: &MaskImage) -> MaskImage {
    map_pixels(mask, |u, v| neighborhood(mask, u, v).any(|b| b))
}

/// Pixels whose 3×3 neighborhood holds both values.
pub fn boundary(mask: &MaskImage) -> MaskImage {
    map_pixels(mask, |u, v| {
        let (mut on, mut off) = (false, false);
        for b in neighborhood(mask, u, v) {
            on |= b;
            off |= !b;
        }
        on && off
    })
}

pub fn perturb_mask(mask: &MaskImage, mode: MaskPerturbation, seed: u64) -> Result<MaskImage> {
    match mode {
        MaskPerturbation::Erode3 => Ok(erode3(mask)),
        MaskPerturbation::Dilate3 => Ok(dilate3(mask)),
        MaskPerturbation::BoundaryNoise { p } => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid("flip probability must be in [0, 1]"));
            }
            let edge = boundary(mask);
            let mut rng = rng_from_seed(seed);
            let data: Vec<bool> = mask
                .data
                .iter()
                .zip(&edge.data)
                .map(|(&m, &e)| if e && rng.random::<f64>() < p { !m } else { m })
                .collect();
            MaskImage::new(mask.width, mask.height, data)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_fn(w: u32, h: u32, f: impl Fn(i64, i64) -> bool) -> MaskImage {
        let data = (0..(w * h) as i64).map(|k| f(k % w as i64, k / w as i64)).collect();
        MaskImage::new(w, h, data).unwrap()
    }

    #[test]
    fn thin_stripe_vanishes() {
        let m = from_fn(10, 10, |_, y| y == 4);
        assert_eq!(erode3(&m).count(), 0);
    }

    #[test]
    fn square_shrinks_by_one() {
        let m = from_fn(9, 9, |x, y| (2..7).contains(&x) && (2..7).contains(&y));
        assert_eq!(erode3(&m), from_fn(9, 9, |x, y| (3..6).contains(&x) && (3..6).contains(&y)));
        assert_eq!(dilate3(&m), from_fn(9, 9, |x, y| (1..8).contains(&x) && (1..8).contains(&y)));
    }

    #[test]
    fn closing_restores_disks() {
        for r in 3..12 {
            let c = 15i64;
            let m = from_fn(31, 31, |x, y| (x - c).pow(2) + (y - c).pow(2) <= r * r);
            assert_eq!(erode3(&dilate3(&m)), m, "radius {r}");
        }
    }

    #[test]
    fn boundary_noise_only_touches_the_boundary() {
        let m = from_fn(20, 20, |x, y| (5..15).contains(&x) && (5..15).contains(&y));
        let edge = boundary(&m);
        let noisy = perturb_mask(&m, MaskPerturbation::BoundaryNoise { p: 0.5 }, 3).unwrap();
        let mut flips = 0;
        for k in 0..400 {
            if noisy.data[k] != m.data[k] {
                assert!(edge.data[k]);
                flips += 1;
            }
        }
        assert!(flips > 0);
        assert_eq!(perturb_mask(&m, MaskPerturbation::BoundaryNoise { p: 0.0 }, 3).unwrap(), m);
        assert_eq!(noisy, perturb_mask(&m, MaskPerturbation::BoundaryNoise { p: 0.5 }, 3).unwrap());
        assert!(perturb_mask(&m, MaskPerturbation::BoundaryNoise { p: 1.5 }, 3).is_err());
    }
}
