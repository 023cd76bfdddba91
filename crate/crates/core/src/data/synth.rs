//! Deterministic "StateShapes" generator.
//!
//! Every image shows one widget: a body rectangle carrying a panel, with an
//! optional knob on its right side and an optional hand-like occluding disc.
//! States are expressed through geometry only:
//! - body: upright (axis aligned) or tilted (rotated 20°–35° either way);
//! - panel: in use when the occluder covers part of it, idle otherwise (an
//!   idle panel may still have a distractor occluder elsewhere);
//! - knob: attached when it touches the body, detached when separated by a
//!   gap; absent knobs leave their bins at zero.
//!
//! Occluded pixels are labeled background, so an in-use panel loses the
//! covered area from its mask.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{PartLabelMap, PartStateSchema, PartStateVector, Sample};
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    pub image_size: usize,
    pub num_samples: usize,
    /// Chance of a distractor occluder on an idle panel.
    pub occluder_probability: f64,
    /// Chance that the knob is missing altogether.
    pub detach_probability: f64,
    pub noise_sigma: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            image_size: 32,
            num_samples: 1200,
            occluder_probability: 0.5,
            detach_probability: 0.2,
            noise_sigma: 0.03,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_size < 16 {
            return Err(Error::Config(format!(
                "image_size must be at least 16, got {}",
                self.image_size
            )));
        }
        for (name, p) in [
            ("occluder_probability", self.occluder_probability),
            ("detach_probability", self.detach_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!(
                "noise_sigma must be nonnegative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Oriented rectangle in pixel coordinates (pixel centers at +0.5).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub cx: f64,
    pub cy: f64,
    pub half_w: f64,
    pub half_h: f64,
    /// Radians; 0 is axis aligned.
    pub angle: f64,
}

impl Rect {
    fn to_local(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.angle.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        (dx * c + dy * s, -dx * s + dy * c)
    }

    fn to_world(&self, lx: f64, ly: f64) -> (f64, f64) {
        let (s, c) = self.angle.sin_cos();
        (self.cx + lx * c - ly * s, self.cy + lx * s + ly * c)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (lx, ly) = self.to_local(x, y);
        lx.abs() <= self.half_w && ly.abs() <= self.half_h
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disc {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

impl Disc {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.cx).powi(2) + (y - self.cy).powi(2) <= self.radius * self.radius
    }
}

/// Geometry the generator drew for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub size: usize,
    pub body: Rect,
    pub panel: Rect,
    pub knob: Option<Disc>,
    pub occluder: Option<Disc>,
    colors: [[f64; 3]; 5],
}

impl Scene {
    fn pixel_centers(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.size;
        (0..n * n).map(move |i| ((i % n) as f64 + 0.5, (i / n) as f64 + 0.5))
    }

    fn overlap(&self, a: impl Fn(f64, f64) -> bool, b: impl Fn(f64, f64) -> bool) -> usize {
        self.pixel_centers().filter(|&(x, y)| a(x, y) && b(x, y)).count()
    }

    /// Distance between the knob disc and the body's right edge, measured in
    /// the body frame; ≤ 0 means they touch.
    pub fn knob_gap(&self) -> Option<f64> {
        self.knob.map(|k| {
            let (lx, _) = self.body.to_local(k.cx, k.cy);
            lx - self.body.half_w - k.radius
        })
    }

    /// Per-pixel part ids, occluder on top.
    pub fn labels(&self) -> Vec<u8> {
        self.pixel_centers()
            .map(|(x, y)| self.label_at(x, y))
            .collect()
    }

    fn label_at(&self, x: f64, y: f64) -> u8 {
        if self.occluder.is_some_and(|o| o.contains(x, y)) {
            0
        } else if self.knob.is_some_and(|k| k.contains(x, y)) {
            3
        } else if self.panel.contains(x, y) {
            2
        } else if self.body.contains(x, y) {
            1
        } else {
            0
        }
    }

    fn color_at(&self, x: f64, y: f64) -> [f64; 3] {
        if self.occluder.is_some_and(|o| o.contains(x, y)) {
            self.colors[4]
        } else {
            self.colors[self.label_at(x, y) as usize]
        }
    }

    /// Re-derives the state vector from geometry alone: tilt angle, whether
    /// the occluder covers any panel pixel, and the knob gap.
    pub fn derive_states(&self, schema: &PartStateSchema) -> PartStateVector {
        let mut v = PartStateVector::zeros(schema.total_state_bins());
        let bin = |p: &str, s: &str| schema.bin(p, s).expect("widget schema");
        let tilted = self.body.angle.abs() > 1e-9;
        v.set(bin("body", if tilted { "tilted" } else { "upright" }), true);
        let in_use = self.occluder.is_some_and(|o| {
            self.overlap(|x, y| o.contains(x, y), |x, y| self.panel.contains(x, y)) > 0
        });
        v.set(bin("panel", if in_use { "in use" } else { "idle" }), true);
        if let Some(gap) = self.knob_gap() {
            v.set(bin("knob", if gap <= 0.0 { "attached" } else { "detached" }), true);
        }
        v
    }
}

fn hsv(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

struct Choices {
    tilted: bool,
    in_use: bool,
    knob: Option<bool>,
    distractor: bool,
}

fn draw_scene(rng: &mut ChaCha8Rng, size: usize, choice: &Choices) -> Scene {
    let sc = size as f64 / 32.0;
    let mid = size as f64 / 2.0;

    let angle = if choice.tilted {
        let a = rng.gen_range(20f64..35.0).to_radians();
        if rng.gen_bool(0.5) {
            a
        } else {
            -a
        }
    } else {
        0.0
    };
    let body = Rect {
        cx: mid - 4.0 * sc + rng.gen_range(-1.5..1.5) * sc,
        cy: mid + rng.gen_range(-1.5..1.5) * sc,
        half_w: rng.gen_range(8.0..9.5) * sc,
        half_h: rng.gen_range(6.0..7.5) * sc,
        angle,
    };
    let (pcx, pcy) = body.to_world(-0.15 * body.half_w, -0.25 * body.half_h);
    let panel = Rect {
        cx: pcx,
        cy: pcy,
        half_w: 0.6 * body.half_w,
        half_h: 0.5 * body.half_h,
        angle,
    };

    let knob = choice.knob.map(|attached| {
        let radius = rng.gen_range(2.3..3.0) * sc;
        let offset = if attached {
            0.5 * radius
        } else {
            radius + rng.gen_range(2.0..3.0) * sc
        };
        let ly = rng.gen_range(-0.3..0.5) * body.half_h;
        let (cx, cy) = body.to_world(body.half_w + offset, ly);
        Disc { cx, cy, radius }
    });

    let body_hue = rng.gen_range(0.0..360.0);
    let colors = [
        hsv(rng.gen_range(0.0..360.0), rng.gen_range(0.0..0.3), rng.gen_range(0.05..0.4)),
        hsv(body_hue, rng.gen_range(0.45..0.85), rng.gen_range(0.55..0.95)),
        hsv(body_hue + rng.gen_range(100.0..260.0), rng.gen_range(0.5..0.9), rng.gen_range(0.35..0.9)),
        hsv(rng.gen_range(60.0..330.0), rng.gen_range(0.6..1.0), rng.gen_range(0.7..1.0)),
        hsv(rng.gen_range(15.0..35.0), rng.gen_range(0.35..0.65), rng.gen_range(0.75..1.0)),
    ];

    let mut scene = Scene {
        size,
        body,
        panel,
        knob,
        occluder: None,
        colors,
    };
    scene.occluder = place_occluder(rng, &scene, choice, sc);
    scene
}

fn place_occluder(rng: &mut ChaCha8Rng, scene: &Scene, choice: &Choices, sc: f64) -> Option<Disc> {
    if !choice.in_use && !choice.distractor {
        return None;
    }
    let panel = scene.panel;
    let panel_px = scene.overlap(|x, y| panel.contains(x, y), |_, _| true);
    let knob_hit = |d: &Disc| {
        scene
            .knob
            .is_some_and(|k| scene.overlap(|x, y| k.contains(x, y), |x, y| d.contains(x, y)) > 0)
    };
    let n = scene.size as f64;
    let mut radius = rng.gen_range(3.2..4.2) * sc;
    for attempt in 0..200 {
        if attempt > 0 && attempt % 50 == 0 {
            radius *= 0.85;
        }
        let disc = if choice.in_use {
            // Centre on a random panel edge so the disc bites into it.
            let t = rng.gen_range(-0.6..0.6);
            let out = rng.gen_range(0.0..0.5) * radius;
            let (lx, ly) = match rng.gen_range(0..4) {
                0 => (panel.half_w + out, t * panel.half_h),
                1 => (-panel.half_w - out, t * panel.half_h),
                2 => (t * panel.half_w, panel.half_h + out),
                _ => (t * panel.half_w, -panel.half_h - out),
            };
            let (cx, cy) = panel.to_world(lx, ly);
            Disc { cx, cy, radius }
        } else {
            Disc {
                cx: rng.gen_range(radius..n - radius),
                cy: rng.gen_range(radius..n - radius),
                radius,
            }
        };
        let covered = scene.overlap(|x, y| panel.contains(x, y), |x, y| disc.contains(x, y));
        let ok = if choice.in_use {
            covered >= 3 && (panel_px - covered) * 5 >= panel_px * 2
        } else {
            covered == 0
        };
        if ok && !knob_hit(&disc) {
            return Some(disc);
        }
    }
    // An idle panel can always go without a distractor.
    assert!(!choice.in_use, "could not place an occluder on the panel");
    None
}

fn render(rng: &mut ChaCha8Rng, scene: &Scene, noise_sigma: f64) -> Vec<u8> {
    let noise = Normal::new(0.0, noise_sigma.max(0.0)).expect("valid sigma");
    let mut rgb = Vec::with_capacity(scene.size * scene.size * 3);
    for (x, y) in scene.pixel_centers() {
        for ch in scene.color_at(x, y) {
            let v = if noise_sigma > 0.0 {
                ch + noise.sample(rng)
            } else {
                ch
            };
            rgb.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    rgb
}

pub(crate) fn bytes_to_image(h: usize, w: usize, rgb: &[u8]) -> Tensor<f32> {
    Tensor::new(&[h, w, 3], rgb.iter().map(|&b| b as f32 / 255.0).collect())
        .expect("byte count matches")
}

/// Samples together with the scene records that produced them.
pub fn generate_scenes(cfg: &GenConfig, schema: &PartStateSchema) -> Result<Vec<(Sample, Scene)>> {
    cfg.validate()?;
    if schema.num_parts() != 3 || schema.total_state_bins() != 6 {
        return Err(Error::SchemaMismatch(
            "the synthetic generator renders the 3-part widget schema".into(),
        ));
    }
    let n = cfg.image_size;
    (0..cfg.num_samples)
        .map(|i| {
            let mut rng = substream(cfg.seed, "data", i as u64);
            let in_use = rng.gen_bool(0.5);
            let choice = Choices {
                tilted: rng.gen_bool(0.5),
                in_use,
                knob: (!rng.gen_bool(cfg.detach_probability)).then(|| rng.gen_bool(0.5)),
                distractor: !in_use && rng.gen_bool(cfg.occluder_probability),
            };
            let scene = draw_scene(&mut rng, n, &choice);
            let rgb = render(&mut rng, &scene, cfg.noise_sigma);
            let sample = Sample {
                id: format!("{i:06}"),
                category: schema.category.clone(),
                image: bytes_to_image(n, n, &rgb),
                labels: PartLabelMap::new(n, n, scene.labels())?,
                states: scene.derive_states(schema),
            };
            Ok((sample, scene))
        })
        .collect()
}

pub fn generate(cfg: &GenConfig, schema: &PartStateSchema) -> Result<Vec<Sample>> {
    Ok(generate_scenes(cfg, schema)?
        .into_iter()
        .map(|(s, _)| s)
        .collect())
}
