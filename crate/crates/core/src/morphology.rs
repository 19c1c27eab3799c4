//! Grayscale dilation and erosion with a round (disk) structuring element.
//!
//! The disk of radius `r` is `{(dx, dy) : dx^2 + dy^2 <= r^2}`. Windows are
//! clipped at the raster border. The disk is split into horizontal runs: for
//! each distinct run half-width a 1-D sliding extremum is computed per row and
//! the rows are then combined. The result is exactly the brute-force patch
//! extremum, since max and min are associative.

use std::collections::VecDeque;

use crate::image::ScalarMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Extremum {
    Max,
    Min,
}

impl Extremum {
    fn pick(self, a: f64, b: f64) -> f64 {
        match self {
            Extremum::Max => a.max(b),
            Extremum::Min => a.min(b),
        }
    }

    fn identity(self) -> f64 {
        match self {
            Extremum::Max => f64::NEG_INFINITY,
            Extremum::Min => f64::INFINITY,
        }
    }

    /// `a` dominates `b` so `b` can leave the monotone deque.
    fn dominates(self, a: f64, b: f64) -> bool {
        match self {
            Extremum::Max => a >= b,
            Extremum::Min => a <= b,
        }
    }
}

/// Half-width of the disk's horizontal run at vertical offset `dy`.
pub fn disk_half_width(radius: usize, dy: usize) -> usize {
    let r2 = radius * radius;
    let rem = r2 - dy * dy;
    let mut h = (rem as f64).sqrt() as usize;
    while h * h > rem {
        h -= 1;
    }
    while (h + 1) * (h + 1) <= rem {
        h += 1;
    }
    h
}

/// All offsets `(dx, dy)` of the disk, row by row.
pub fn disk_offsets(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut out = Vec::new();
    for dy in -r..=r {
        let h = disk_half_width(radius, dy.unsigned_abs()) as isize;
        for dx in -h..=h {
            out.push((dx, dy));
        }
    }
    out
}

fn row_filter(
    src: &[f64],
    width: usize,
    height: usize,
    half: usize,
    op: Extremum,
    out: &mut [f64],
) {
    let mut deque: VecDeque<usize> = VecDeque::with_capacity(2 * half + 2);
    for y in 0..height {
        let row = &src[y * width..(y + 1) * width];
        let dst = &mut out[y * width..(y + 1) * width];
        deque.clear();
        // window for output x is [x - half, x + half] clipped to the row
        let mut next = 0usize;
        for (x, slot) in dst.iter_mut().enumerate() {
            let hi = (x + half).min(width - 1);
            while next <= hi {
                while let Some(&back) = deque.back() {
                    if op.dominates(row[next], row[back]) {
                        deque.pop_back();
                    } else {
                        break;
                    }
                }
                deque.push_back(next);
                next += 1;
            }
            let lo = x.saturating_sub(half);
            while let Some(&front) = deque.front() {
                if front < lo {
                    deque.pop_front();
                } else {
                    break;
                }
            }
            *slot = row[*deque.front().expect("window is never empty")];
        }
    }
}

fn disk_filter(map: &ScalarMap, radius: usize, op: Extremum) -> ScalarMap {
    let (width, height) = map.dims();
    let src = map.data();
    if radius == 0 {
        return map.clone();
    }
    let mut out = vec![op.identity(); src.len()];
    let mut rows = vec![0.0; src.len()];

    // vertical offsets grouped by run half-width
    let max_dy = radius.min(height - 1);
    let mut by_half: Vec<(usize, Vec<usize>)> = Vec::new();
    for dy in 0..=max_dy {
        let h = disk_half_width(radius, dy);
        match by_half.iter_mut().find(|(hw, _)| *hw == h) {
            Some((_, dys)) => dys.push(dy),
            None => by_half.push((h, vec![dy])),
        }
    }

    for (half, dys) in &by_half {
        row_filter(src, width, height, *half, op, &mut rows);
        for &dy in dys {
            for y in 0..height {
                let dst = &mut out[y * width..(y + 1) * width];
                if y + dy < height {
                    let srow = &rows[(y + dy) * width..(y + dy + 1) * width];
                    for (d, &s) in dst.iter_mut().zip(srow) {
                        *d = op.pick(*d, s);
                    }
                }
                if dy > 0 && y >= dy {
                    let srow = &rows[(y - dy) * width..(y - dy + 1) * width];
                    for (d, &s) in dst.iter_mut().zip(srow) {
                        *d = op.pick(*d, s);
                    }
                }
            }
        }
    }
    ScalarMap::from_parts_unchecked(width, height, out)
}

/// Patch maximum over the clipped disk around every pixel.
pub fn dilate(map: &ScalarMap, radius: usize) -> ScalarMap {
    disk_filter(map, radius, Extremum::Max)
}

/// Patch minimum over the clipped disk around every pixel.
pub fn erode(map: &ScalarMap, radius: usize) -> ScalarMap {
    disk_filter(map, radius, Extremum::Min)
}

/// Erosion followed by dilation.
pub fn open(map: &ScalarMap, radius: usize) -> ScalarMap {
    dilate(&erode(map, radius), radius)
}

/// Dilation followed by erosion.
pub fn close(map: &ScalarMap, radius: usize) -> ScalarMap {
    erode(&dilate(map, radius), radius)
}
