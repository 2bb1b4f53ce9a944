//! Grayscale binarization and connected-component boxes.

use image::GrayImage;

use crate::model::BBox;

/// Median gray level, taken as the background.
pub fn background_level(gray: &GrayImage) -> u8 {
    let mut hist = [0u64; 256];
    for p in gray.as_raw() {
        hist[*p as usize] += 1;
    }
    let half = (gray.as_raw().len() as u64).div_ceil(2);
    let mut seen = 0;
    for (v, n) in hist.iter().enumerate() {
        seen += n;
        if seen >= half {
            return v as u8;
        }
    }
    255
}

/// Foreground mask: a pixel is set when it is darker than the mean of its
/// `block x block` neighbourhood by more than `offset`. Pixels beyond the
/// image border read as the background level, so shapes touching the edge
/// keep their outline there.
pub fn adaptive_threshold(gray: &GrayImage, block: u32, offset: i32) -> Vec<bool> {
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let r = (block / 2) as usize;
    let full = ((2 * r + 1) * (2 * r + 1)) as i64;
    let pad = background_level(gray) as i64;
    // (w+1) x (h+1) summed-area table
    let stride = w + 1;
    let mut sat = vec![0u64; stride * (h + 1)];
    let px = gray.as_raw();
    for y in 0..h {
        let mut row = 0u64;
        for x in 0..w {
            row += px[y * w + x] as u64;
            sat[(y + 1) * stride + x + 1] = sat[y * stride + x + 1] + row;
        }
    }
    let mut mask = vec![false; w * h];
    for y in 0..h {
        let y0 = y.saturating_sub(r);
        let y1 = (y + r + 1).min(h);
        for x in 0..w {
            let x0 = x.saturating_sub(r);
            let x1 = (x + r + 1).min(w);
            let sum = sat[y1 * stride + x1] + sat[y0 * stride + x0]
                - sat[y0 * stride + x1]
                - sat[y1 * stride + x0];
            let inside = ((y1 - y0) * (x1 - x0)) as i64;
            let sum = sum as i64 + (full - inside) * pad;
            let p = px[y * w + x] as i64;
            // p < sum/full - offset, without division
            mask[y * w + x] = (p + offset as i64) * full < sum;
        }
    }
    mask
}

/// Bounding boxes of 8-connected foreground components, in scan order of
/// each component's first pixel.
pub fn component_boxes(mask: &[bool], width: u32, height: u32) -> Vec<BBox> {
    let (w, h) = (width as usize, height as usize);
    debug_assert_eq!(mask.len(), w * h);
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    for start in 0..w * h {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = ny * w + nx;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        out.push(BBox {
            x: x0 as u32,
            y: y0 as u32,
            w: (x1 - x0 + 1) as u32,
            h: (y1 - y0 + 1) as u32,
        });
    }
    out
}
