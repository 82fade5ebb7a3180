use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{uniform_mask, Scenario, Truth};
use crate::error::{invalid, Error, Result};
use crate::lamat::{DenseMatrix, MaskedMatrix};
use crate::perm::Permutation;
use crate::rng::seeded;
use crate::solvers::{BlockPartition, BlockSlots, CostProvider};

/// Grayscale image with pixel values in `[0, 1]`, one matrix row per image row.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub pixels: DenseMatrix,
}

impl GrayImage {
    pub fn width(&self) -> usize {
        self.pixels.ncols()
    }

    pub fn height(&self) -> usize {
        self.pixels.nrows()
    }
}

fn header_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Parse {
            line: 1,
            msg: "truncated PGM header".into(),
        });
    }
    std::str::from_utf8(&bytes[start..*pos]).map_err(|_| Error::Parse {
        line: 1,
        msg: "non-ASCII PGM header".into(),
    })
}

/// Decodes a binary (P5) PGM with maxval 255.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0;
    let bad = |msg: String| Error::Parse { line: 1, msg };
    if header_token(bytes, &mut pos)? != "P5" {
        return Err(bad("only binary P5 PGM is supported".into()));
    }
    let mut num = |what: &str| -> Result<usize> {
        let t = header_token(bytes, &mut pos)?;
        t.parse().map_err(|_| bad(format!("bad {what} {t:?}")))
    };
    let w = num("width")?;
    let h = num("height")?;
    let maxval = num("maxval")?;
    if maxval != 255 {
        return Err(bad(format!("maxval must be 255, got {maxval}")));
    }
    pos += 1;
    let body = bytes.get(pos..pos + w * h).ok_or_else(|| bad("pixel data shorter than width*height".into()))?;
    Ok(GrayImage {
        pixels: DenseMatrix::from_fn(h, w, |i, j| body[i * w + j] as f64 / 255.0),
    })
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    parse_pgm(&fs::read(path)?)
}

/// Encodes as P5 with maxval 255, clamping to `[0, 1]` and rounding.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let (h, w) = (img.height(), img.width());
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    for i in 0..h {
        for j in 0..w {
            out.push((img.pixels[(i, j)].clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    out
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    fs::write(path, encode_pgm(img))?;
    Ok(())
}

/// Which tiles of the block grid get shuffled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockRegion {
    /// The first `k` tiles ordered by anti-diagonal `bi + bj`, then by `bi`.
    UpperLeft(usize),
    /// Explicit `(block_row, block_col)` grid coordinates.
    Blocks(Vec<(usize, usize)>),
}

impl BlockRegion {
    fn grid_cells(&self, rows: usize, cols: usize) -> Result<Vec<(usize, usize)>> {
        let cells = match self {
            BlockRegion::UpperLeft(k) => {
                let mut all: Vec<(usize, usize)> = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).collect();
                all.sort_by_key(|&(i, j)| (i + j, i));
                if *k > all.len() {
                    return Err(invalid(format!("region of {k} blocks exceeds the {rows}x{cols} grid")));
                }
                all.truncate(*k);
                all
            }
            BlockRegion::Blocks(b) => {
                if let Some(&(i, j)) = b.iter().find(|&&(i, j)| i >= rows || j >= cols) {
                    return Err(invalid(format!("block ({i}, {j}) outside the {rows}x{cols} grid")));
                }
                b.clone()
            }
        };
        if cells.len() < 2 {
            return Err(invalid("region needs at least two blocks"));
        }
        Ok(cells)
    }
}

#[derive(Clone, Debug)]
pub struct ImageScenario {
    pub scenario: Scenario,
    pub provider: BlockSlots,
    /// Top-left pixel of every shuffled tile, in slot order.
    pub tiles: Vec<(usize, usize)>,
}

/// Shuffles the tiles of `region` by a uniform permutation and hides
/// `missing_frac` of all pixels. True tile `i` lands on tile slot `π(i)`.
pub fn shuffle_image_blocks(
    image: &GrayImage,
    block: (usize, usize),
    region: &BlockRegion,
    missing_frac: f64,
    seed: u64,
) -> Result<ImageScenario> {
    let (h, w) = (image.height(), image.width());
    let (bh, bw) = block;
    if bh == 0 || bw == 0 || h % bh != 0 || w % bw != 0 {
        return Err(invalid(format!("{h}x{w} image does not split into {bh}x{bw} blocks")));
    }
    if !(0.0..1.0).contains(&missing_frac) {
        return Err(invalid(format!("missing_frac must lie in [0, 1), got {missing_frac}")));
    }
    let cells = region.grid_cells(h / bh, w / bw)?;
    let tiles: Vec<(usize, usize)> = cells.iter().map(|&(i, j)| (i * bh, j * bw)).collect();
    let provider = BlockSlots::tiles((h, w), bh, bw, &tiles)?;
    let mut rng = seeded(seed);
    let perm = Permutation::random(tiles.len(), &mut rng);
    let mut data = image.pixels.clone();
    provider.scatter(0, &perm.apply_rows(&provider.gather(0, &image.pixels))?, &mut data);
    let mask = uniform_mask(h, w, 1.0 - missing_frac, &mut rng);
    let mut train_mask = mask.clone();
    provider.scatter_mask(0, &provider.gather_mask(0, &mask).gather_rows(perm.as_slice()), &mut train_mask);
    Ok(ImageScenario {
        scenario: Scenario {
            observed: MaskedMatrix::new(data, mask)?,
            partition: BlockPartition::new(0, vec![w])?,
            truth: Some(Truth {
                matrix: image.pixels.clone(),
                perms: vec![perm],
                test_mask: train_mask.complement(),
                train_mask,
            }),
        },
        provider,
        tiles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn noise_image(h: usize, w: usize, seed: u64) -> GrayImage {
        let mut rng = seeded(seed);
        GrayImage {
            pixels: DenseMatrix::from_fn(h, w, |_, _| rng.random_range(0..=255u8) as f64 / 255.0),
        }
    }

    #[test]
    fn pgm_round_trip_is_exact() {
        let img = noise_image(7, 5, 1);
        let back = parse_pgm(&encode_pgm(&img)).unwrap();
        assert_eq!(back, img);
        let with_comment = b"P5\n# made by hand\n2 1\n255\n\x00\xff";
        let t = parse_pgm(with_comment).unwrap();
        assert_eq!(t.pixels[(0, 1)], 1.0);
    }

    #[test]
    fn pgm_rejects_other_formats() {
        assert!(parse_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(parse_pgm(b"P5\n1 1\n65535\n\x00\x00").is_err());
        assert!(parse_pgm(b"P5\n4 4\n255\n\x00").is_err());
    }

    #[test]
    fn upper_left_region_order() {
        let c = BlockRegion::UpperLeft(4).grid_cells(6, 6).unwrap();
        assert_eq!(c, vec![(0, 0), (0, 1), (1, 0), (0, 2)]);
        assert!(BlockRegion::UpperLeft(37).grid_cells(6, 6).is_err());
        assert!(BlockRegion::Blocks(vec![(0, 0), (6, 0)]).grid_cells(6, 6).is_err());
    }

    #[test]
    fn geometry_errors() {
        let img = noise_image(20, 20, 2);
        assert!(shuffle_image_blocks(&img, (3, 3), &BlockRegion::UpperLeft(3), 0.0, 0).is_err());
        assert!(shuffle_image_blocks(&img, (5, 5), &BlockRegion::UpperLeft(17), 0.0, 0).is_err());
        assert!(shuffle_image_blocks(&img, (5, 5), &BlockRegion::UpperLeft(3), 1.0, 0).is_err());
    }

    #[test]
    fn realigning_with_true_permutation_restores_image() {
        let img = noise_image(30, 30, 3);
        let s = shuffle_image_blocks(&img, (5, 5), &BlockRegion::UpperLeft(13), 0.0, 4).unwrap();
        let t = s.scenario.truth.as_ref().unwrap();
        let back = s.provider.realign(&s.scenario.observed, &t.perms).unwrap();
        assert_eq!(back.data, img.pixels);
        assert_eq!(s.provider.cost(0, &img.pixels, &s.scenario.observed).unwrap().n(), 13);
    }

    #[test]
    fn cost_matches_pixel_loop() {
        let img = noise_image(12, 12, 5);
        let s = shuffle_image_blocks(&img, (3, 3), &BlockRegion::UpperLeft(6), 0.3, 6).unwrap();
        let obs = &s.scenario.observed;
        let mhat = noise_image(12, 12, 7).pixels;
        let c = s.provider.cost(0, &mhat, obs).unwrap();
        for (i, &(ri, ci)) in s.tiles.iter().enumerate() {
            for (j, &(rj, cj)) in s.tiles.iter().enumerate() {
                let mut acc = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        if obs.mask.get(rj + a, cj + b) {
                            acc += (mhat[(ri + a, ci + b)] - obs.data[(rj + a, cj + b)]).powi(2);
                        }
                    }
                }
                assert!((c.get(i, j) - acc).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn identity_diagonal_cost_is_zero() {
        let img = noise_image(12, 12, 8);
        let s = shuffle_image_blocks(&img, (3, 3), &BlockRegion::UpperLeft(5), 0.0, 9).unwrap();
        let t = s.scenario.truth.as_ref().unwrap();
        // in observed coordinates slot π(i) holds true tile i, so C(i, π(i)) vanishes at M̂ = image
        let c = s.provider.cost(0, &img.pixels, &s.scenario.observed).unwrap();
        for i in 0..5 {
            assert!(c.get(i, t.perms[0].get(i)).abs() < 1e-24);
        }
    }
}
