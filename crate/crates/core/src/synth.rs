//! Synthetic screenshots and icon samples with known ground truth.

use std::path::Path;

use image::{GrayImage, Luma};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::font;
use crate::model::BBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Shape {
    FilledCircle,
    Square,
    Cross,
    Ring,
    Crosshair,
}

impl Shape {
    pub const ALL: [Shape; 5] = [
        Shape::FilledCircle,
        Shape::Square,
        Shape::Cross,
        Shape::Ring,
        Shape::Crosshair,
    ];
}

fn in_circle(px: u32, py: u32, cx: f64, cy: f64, r: f64) -> bool {
    let dx = px as f64 + 0.5 - cx;
    let dy = py as f64 + 0.5 - cy;
    dx * dx + dy * dy <= r * r
}

/// Draw `shape` so that its ink spans exactly `b`.
pub fn draw_shape(img: &mut GrayImage, b: BBox, shape: Shape, ink: u8) {
    let s = b.w.min(b.h);
    let t = (s / 5).max(3);
    let (cx, cy) = (b.w as f64 / 2.0, b.h as f64 / 2.0);
    let r = b.w.min(b.h) as f64 / 2.0;
    for y in 0..b.h {
        for x in 0..b.w {
            let bar_v = x >= (b.w - t) / 2 && x < (b.w - t) / 2 + t;
            let bar_h = y >= (b.h - t) / 2 && y < (b.h - t) / 2 + t;
            let on = match shape {
                Shape::Square => true,
                Shape::FilledCircle => in_circle(x, y, cx, cy, r),
                Shape::Cross => bar_v || bar_h,
                Shape::Ring => in_circle(x, y, cx, cy, r) && !in_circle(x, y, cx, cy, r - t as f64),
                Shape::Crosshair => {
                    let ring = in_circle(x, y, cx, cy, r * 0.75)
                        && !in_circle(x, y, cx, cy, r * 0.75 - (t as f64 * 0.7).max(2.0));
                    let thin = (t / 2).max(2);
                    let tick_v = x >= (b.w - thin) / 2 && x < (b.w - thin) / 2 + thin;
                    let tick_h = y >= (b.h - thin) / 2 && y < (b.h - thin) / 2 + thin;
                    ring || tick_v || tick_h || in_circle(x, y, cx, cy, r * 0.2)
                }
            };
            if on {
                img.put_pixel(b.x + x, b.y + y, Luma([ink]));
            }
        }
    }
}

/// Incrementally drawn screen that remembers where things went.
pub struct ScreenBuilder {
    pub image: GrayImage,
    pub glyphs: Vec<(BBox, Shape)>,
    pub texts: Vec<(BBox, String)>,
}

impl ScreenBuilder {
    pub fn new(width: u32, height: u32) -> Self {
        ScreenBuilder {
            image: GrayImage::from_pixel(width, height, Luma([255])),
            glyphs: Vec::new(),
            texts: Vec::new(),
        }
    }

    pub fn glyph(&mut self, b: BBox, shape: Shape) -> &mut Self {
        draw_shape(&mut self.image, b, shape, 30);
        self.glyphs.push((b, shape));
        self
    }

    /// Draw a text label with a 4 px margin; the margin box is what an OCR system would report.
    pub fn text(&mut self, x: u32, y: u32, scale: u32, text: &str) -> BBox {
        let (tw, th) = font::text_size(text, scale);
        font::draw_text(&mut self.image, x as i64 + 4, y as i64 + 4, text, scale, Luma([40]));
        let b = BBox {
            x,
            y,
            w: tw + 8,
            h: th + 8,
        };
        self.texts.push((b, text.to_string()));
        b
    }

    pub fn fill(&mut self, b: BBox, value: u8) -> &mut Self {
        for y in b.y..b.y + b.h {
            for x in b.x..b.x + b.w {
                self.image.put_pixel(x, y, Luma([value]));
            }
        }
        self
    }

    /// OCR adapter response describing the drawn texts.
    pub fn ocr_response(&self) -> serde_json::Value {
        let regions: Vec<_> = self
            .texts
            .iter()
            .map(|(b, t)| serde_json::json!({"bbox": [b.x, b.y, b.w, b.h], "text": t, "confidence": 0.99}))
            .collect();
        serde_json::json!({ "regions": regions })
    }
}

/// A 1080x1920 screen with planted glyphs, one banner, and one elongated bar.
#[derive(Debug, Clone)]
pub struct SyntheticScreen {
    pub image: GrayImage,
    pub glyphs: Vec<(BBox, Shape)>,
    pub banner: BBox,
    pub bar: BBox,
}

fn separated(b: &BBox, placed: &[BBox], gap: u32) -> bool {
    placed.iter().all(|p| {
        b.x as u64 >= p.right() + gap as u64
            || p.x as u64 >= b.right() + gap as u64
            || b.y as u64 >= p.bottom() + gap as u64
            || p.y as u64 >= b.bottom() + gap as u64
    })
}

/// Deterministic for a given seed.
pub fn synthetic_screen(seed: u64) -> SyntheticScreen {
    const W: u32 = 1080;
    const H: u32 = 1920;
    const GAP: u32 = 40;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut image = GrayImage::new(W, H);
    for p in image.pixels_mut() {
        *p = Luma([rng.random_range(248..=255)]);
    }

    let bh = rng.random_range(200..=320);
    let banner = if rng.random_bool(0.5) {
        BBox { x: 0, y: 0, w: W, h: bh }
    } else {
        BBox { x: 0, y: H - bh, w: W, h: bh }
    };
    let mut placed = vec![banner];
    let bar = loop {
        let (long, short) = (rng.random_range(100..=300), rng.random_range(16..=40));
        let (w, h) = if rng.random_bool(0.5) { (short, long) } else { (long, short) };
        let b = BBox {
            x: rng.random_range(0..W - w),
            y: rng.random_range(0..H - h),
            w,
            h,
        };
        if separated(&b, &placed, GAP) {
            break b;
        }
    };
    placed.push(bar);

    let n = rng.random_range(1..=6);
    let mut glyphs = Vec::with_capacity(n);
    while glyphs.len() < n {
        let s = rng.random_range(20..=48);
        let b = BBox {
            x: rng.random_range(GAP..W - s - GAP),
            y: rng.random_range(GAP..H - s - GAP),
            w: s,
            h: s,
        };
        if separated(&b, &placed, GAP) {
            placed.push(b);
            glyphs.push((b, Shape::ALL[rng.random_range(0..Shape::ALL.len())]));
        }
    }

    let dark = |rng: &mut ChaCha8Rng| rng.random_range(0..=90u8);
    let v = dark(&mut rng);
    for b in [banner, bar] {
        for y in b.y..b.y + b.h {
            for x in b.x..b.x + b.w {
                image.put_pixel(x, y, Luma([v]));
            }
        }
    }
    for &(b, shape) in &glyphs {
        let ink = dark(&mut rng);
        draw_shape(&mut image, b, shape, ink);
    }
    SyntheticScreen {
        image,
        glyphs,
        banner,
        bar,
    }
}

/// One icon sample: `shape` on a light canvas with random size, offset, and noise.
pub fn icon_sample(shape: Shape, rng: &mut impl Rng) -> GrayImage {
    let side = rng.random_range(40..=56);
    let mut g = GrayImage::new(side, side);
    for p in g.pixels_mut() {
        *p = Luma([rng.random_range(225..=255)]);
    }
    let s = rng.random_range(side * 6 / 10..=side * 9 / 10);
    let x = rng.random_range(0..=side - s);
    let y = rng.random_range(0..=side - s);
    let ink = rng.random_range(0..=70);
    draw_shape(&mut g, BBox { x, y, w: s, h: s }, shape, ink);
    g
}

/// A glyph cropped to its own extent, as the localizer would hand it to the classifier.
pub fn tight_icon_sample(shape: Shape, rng: &mut impl Rng) -> GrayImage {
    let side = rng.random_range(24..=48);
    let mut g = GrayImage::from_pixel(side, side, Luma([255]));
    let ink = rng.random_range(0..=70);
    draw_shape(&mut g, BBox { x: 0, y: 0, w: side, h: side }, shape, ink);
    g
}

/// Labelled samples for each `(class name, shape)`, `per_class` each.
pub fn icon_set(classes: &[(&str, Shape)], per_class: usize, seed: u64) -> Vec<(GrayImage, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(classes.len() * per_class);
    for &(name, shape) in classes {
        for _ in 0..per_class {
            out.push((icon_sample(shape, &mut rng), name.to_string()));
        }
    }
    out
}

/// Lay samples out as `<root>/<class>/<nnn>.png`.
pub fn write_icon_dirs(root: &Path, samples: &[(GrayImage, String)]) -> image::ImageResult<()> {
    for (i, (img, class)) in samples.iter().enumerate() {
        let dir = root.join(class);
        std::fs::create_dir_all(&dir)?;
        img.save(dir.join(format!("{i:04}.png")))?;
    }
    Ok(())
}
