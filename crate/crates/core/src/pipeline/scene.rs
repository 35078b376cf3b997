//! Synthetic rooms and their JSON form.
//!
//! Two room types share one layout: a table in the middle of the room,
//! walls, a board or two on the walls, and a ring of small seats or stands
//! around the table. Dining rooms put cups on the table and stools in the
//! ring; lounges leave the table bare and put a cup on every side-table in
//! the ring. Stools and side-tables are drawn from the same size and
//! placement distributions, so only their surroundings tell them apart.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom3d::{iou3d, Aabb3};
use crate::relations::AnnotatedObject;

pub const WALL: usize = 0;
pub const TABLE: usize = 1;
pub const CUP: usize = 2;
pub const BOARD: usize = 3;
pub const STOOL: usize = 4;
pub const SIDE_TABLE: usize = 5;
pub const NUM_CLASSES: usize = 6;
/// Class index of the background output of the detector.
pub const BACKGROUND_CLASS: usize = NUM_CLASSES;

pub const CLASS_NAMES: [&str; NUM_CLASSES] = ["wall", "table", "cup", "board", "stool", "side_table"];

pub const WALL_THICKNESS: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub id: String,
    pub room: Aabb3<f64>,
    pub objects: Vec<AnnotatedObject<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Smallest and largest room side in meters.
    pub room_min: f64,
    pub room_max: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self { room_min: 4.0, room_max: 6.0 }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.room_min.is_finite() && self.room_max.is_finite()) {
            return Err(Error::Config("room sizes must be finite".into()));
        }
        if self.room_min < 3.8 {
            return Err(Error::Config(format!("room_min {} is too small to fit the furniture (>= 3.8 m)", self.room_min)));
        }
        if self.room_max < self.room_min || self.room_max > 50.0 {
            return Err(Error::Config(format!("room_max must lie in [room_min, 50], got {}", self.room_max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoomKind {
    Dining,
    Lounge,
}

fn boxed(min: [f64; 3], max: [f64; 3]) -> Aabb3<f64> {
    Aabb3::new(min, max).expect("generator emits valid boxes")
}

fn disjoint_with_clearance(b: &Aabb3<f64>, others: &[Aabb3<f64>], clearance: f64) -> bool {
    others.iter().all(|o| (0..2).any(|a| b.min()[a] >= o.max()[a] + clearance || o.min()[a] >= b.max()[a] + clearance))
}

/// One seeded room. The same seed gives the same scene.
pub fn generate_scene(seed: u64, cfg: &GeneratorConfig) -> Result<Scene> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = if rng.random_bool(0.5) { RoomKind::Dining } else { RoomKind::Lounge };
    Ok(build_room(&mut rng, cfg, kind, format!("scene_{seed:06}")))
}

/// As [`generate_scene`] with the room type fixed.
pub fn generate_scene_of_kind(seed: u64, cfg: &GeneratorConfig, kind: RoomKind) -> Result<Scene> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let _ = rng.random_bool(0.5);
    Ok(build_room(&mut rng, cfg, kind, format!("scene_{seed:06}")))
}

fn build_room(rng: &mut ChaCha8Rng, cfg: &GeneratorConfig, kind: RoomKind, id: String) -> Scene {
    let lx = rng.random_range(cfg.room_min..=cfg.room_max);
    let ly = rng.random_range(cfg.room_min..=cfg.room_max);
    let h = rng.random_range(2.5..3.0);
    let room = boxed([0.0; 3], [lx, ly, h]);
    let t = WALL_THICKNESS;
    let mut objects = Vec::new();
    let push = |objects: &mut Vec<AnnotatedObject<f64>>, bbox, class_id| {
        let instance_id = objects.len();
        objects.push(AnnotatedObject { bbox, class_id, instance_id });
    };

    let walls = [
        boxed([0.0, 0.0, 0.0], [t, ly, h]),
        boxed([lx - t, 0.0, 0.0], [lx, ly, h]),
        boxed([0.0, 0.0, 0.0], [lx, t, h]),
        boxed([0.0, ly - t, 0.0], [lx, ly, h]),
    ];
    for w in walls {
        push(&mut objects, w, WALL);
    }

    // Boards sit flush against the inner face of a wall, away from corners.
    let n_boards = rng.random_range(1..=2);
    let mut used_walls = Vec::new();
    for _ in 0..n_boards {
        let wall = loop {
            let w = rng.random_range(0..4usize);
            if !used_walls.contains(&w) {
                break w;
            }
        };
        used_walls.push(wall);
        let depth = rng.random_range(0.03..0.05);
        let width = rng.random_range(0.6..1.2);
        let tall = rng.random_range(0.5..0.9);
        let z0 = rng.random_range(1.0..1.4);
        let along = if wall < 2 { ly } else { lx };
        let s0 = rng.random_range(0.5..along - 0.5 - width);
        let bbox = match wall {
            0 => boxed([t, s0, z0], [t + depth, s0 + width, z0 + tall]),
            1 => boxed([lx - t - depth, s0, z0], [lx - t, s0 + width, z0 + tall]),
            2 => boxed([s0, t, z0], [s0 + width, t + depth, z0 + tall]),
            _ => boxed([s0, ly - t - depth, z0], [s0 + width, ly - t, z0 + tall]),
        };
        push(&mut objects, bbox, BOARD);
    }

    let (tw, td) = (rng.random_range(1.2..1.8), rng.random_range(0.8..1.1));
    let th = rng.random_range(0.72..0.78);
    let cx = lx / 2.0 + rng.random_range(-0.3..0.3);
    let cy = ly / 2.0 + rng.random_range(-0.3..0.3);
    let table = boxed([cx - tw / 2.0, cy - td / 2.0, 0.0], [cx + tw / 2.0, cy + td / 2.0, th]);
    push(&mut objects, table, TABLE);

    let cup = |rng: &mut ChaCha8Rng, base: &Aabb3<f64>, taken: &[Aabb3<f64>]| -> Option<Aabb3<f64>> {
        for _ in 0..50 {
            let s = rng.random_range(0.08..0.12);
            let ch = rng.random_range(0.1..0.15);
            let gap = rng.random_range(0.0..0.02);
            let margin = 0.02;
            let (lo, hi) = (base.min(), base.max());
            if hi[0] - lo[0] < s + 2.0 * margin || hi[1] - lo[1] < s + 2.0 * margin {
                return None;
            }
            let x = rng.random_range(lo[0] + margin..hi[0] - margin - s);
            let y = rng.random_range(lo[1] + margin..hi[1] - margin - s);
            let z = hi[2] + gap;
            let b = boxed([x, y, z], [x + s, y + s, z + ch]);
            if disjoint_with_clearance(&b, taken, 0.02) {
                return Some(b);
            }
        }
        None
    };

    if kind == RoomKind::Dining {
        let n_cups = rng.random_range(2..=4);
        let mut cups = Vec::new();
        for _ in 0..n_cups {
            if let Some(c) = cup(rng, &table, &cups) {
                cups.push(c);
                push(&mut objects, c, CUP);
            }
        }
    }

    // Ring around the table: stools in dining rooms, side-tables in lounges.
    let (class_id, count) = match kind {
        RoomKind::Dining => (STOOL, rng.random_range(3..=5)),
        RoomKind::Lounge => (SIDE_TABLE, rng.random_range(2..=3)),
    };
    let mut ring: Vec<Aabb3<f64>> = vec![table];
    for _ in 0..count {
        for _ in 0..100 {
            let s = rng.random_range(0.35..0.45);
            let sh = rng.random_range(0.42..0.55);
            let gap = rng.random_range(0.2..0.45);
            let side = rng.random_range(0..4usize);
            let (tl, th_) = (table.min(), table.max());
            let (x, y) = match side {
                0 => (tl[0] - gap - s, rng.random_range(tl[1] - 0.2..th_[1] + 0.2 - s)),
                1 => (th_[0] + gap, rng.random_range(tl[1] - 0.2..th_[1] + 0.2 - s)),
                2 => (rng.random_range(tl[0] - 0.2..th_[0] + 0.2 - s), tl[1] - gap - s),
                _ => (rng.random_range(tl[0] - 0.2..th_[0] + 0.2 - s), th_[1] + gap),
            };
            let b = boxed([x, y, 0.0], [x + s, y + s, sh]);
            let inside = x > t + 0.3 && y > t + 0.3 && x + s < lx - t - 0.3 && y + s < ly - t - 0.3;
            if inside && disjoint_with_clearance(&b, &ring, 0.1) {
                ring.push(b);
                push(&mut objects, b, class_id);
                if class_id == SIDE_TABLE {
                    if let Some(c) = cup(rng, &b, &[]) {
                        push(&mut objects, c, CUP);
                    }
                }
                break;
            }
        }
    }

    Scene { id, room, objects }
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        for (i, o) in self.objects.iter().enumerate() {
            if !self.room.contains(&o.bbox) {
                return Err(Error::invalid(format!("scene {}: object {i} lies outside the room", self.id)));
            }
            if o.class_id >= NUM_CLASSES {
                return Err(Error::invalid(format!("scene {}: object {i} has unknown class {}", self.id, o.class_id)));
            }
        }
        Ok(())
    }

    pub fn boxes(&self) -> Vec<Aabb3<f64>> {
        self.objects.iter().map(|o| o.bbox).collect()
    }

    /// Index of the object with best IoU to `b` when it reaches `min_iou`.
    pub fn best_match(&self, b: &Aabb3<f64>, min_iou: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, o) in self.objects.iter().enumerate() {
            let iou = iou3d(b, &o.bbox);
            if iou >= min_iou && best.is_none_or(|(_, v)| iou > v) {
                best = Some((i, iou));
            }
        }
        best
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxJson {
    min: [f64; 3],
    max: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectJson {
    id: usize,
    class_id: usize,
    instance_id: usize,
    #[serde(rename = "box")]
    bbox: BoxJson,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneJson {
    id: String,
    room: BoxJson,
    objects: Vec<ObjectJson>,
}

fn box_json(b: &Aabb3<f64>) -> BoxJson {
    BoxJson { min: b.min(), max: b.max() }
}

impl Scene {
    pub fn to_json(&self) -> String {
        let doc = SceneJson {
            id: self.id.clone(),
            room: box_json(&self.room),
            objects: self
                .objects
                .iter()
                .enumerate()
                .map(|(id, o)| ObjectJson { id, class_id: o.class_id, instance_id: o.instance_id, bbox: box_json(&o.bbox) })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("scene serializes");
        s.push('\n');
        s
    }

    /// Parses a scene file. Errors name `source` and the offending line.
    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse { source_name: source.to_string(), line, message };
        let doc: SceneJson = serde_json::from_str(text).map_err(|e| parse_err(e.line(), e.to_string()))?;
        // Line of the n-th object entry, for semantic errors after parsing.
        let object_line = |n: usize| text.match_indices("\"class_id\"").nth(n).map_or(1, |(at, _)| 1 + text[..at].matches('\n').count());
        let room = Aabb3::new(doc.room.min, doc.room.max).map_err(|e| parse_err(1, format!("room: {e}")))?;
        let mut objects = Vec::with_capacity(doc.objects.len());
        for (n, o) in doc.objects.into_iter().enumerate() {
            let bbox = Aabb3::new(o.bbox.min, o.bbox.max).map_err(|e| parse_err(object_line(n), format!("object {}: {e}", o.id)))?;
            if o.class_id >= NUM_CLASSES {
                return Err(parse_err(object_line(n), format!("object {}: unknown class_id {}", o.id, o.class_id)));
            }
            objects.push(AnnotatedObject { bbox, class_id: o.class_id, instance_id: o.instance_id });
        }
        let scene = Scene { id: doc.id, room, objects };
        scene.validate().map_err(|e| parse_err(1, e.to_string()))?;
        Ok(scene)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relations::{spatial_relations, RelationThresholds};

    #[test]
    fn deterministic_per_seed() {
        let cfg = GeneratorConfig::default();
        assert_eq!(generate_scene(3, &cfg).unwrap(), generate_scene(3, &cfg).unwrap());
        assert_ne!(generate_scene(3, &cfg).unwrap(), generate_scene(4, &cfg).unwrap());
    }

    #[test]
    fn objects_inside_room_with_both_kinds() {
        let cfg = GeneratorConfig::default();
        let mut stools = 0;
        let mut sides = 0;
        for seed in 0..60 {
            let s = generate_scene(seed, &cfg).unwrap();
            s.validate().unwrap();
            stools += s.objects.iter().filter(|o| o.class_id == STOOL).count();
            sides += s.objects.iter().filter(|o| o.class_id == SIDE_TABLE).count();
            let ring: Vec<_> = s.objects.iter().filter(|o| o.class_id == STOOL || o.class_id == SIDE_TABLE).collect();
            assert!(!ring.is_empty(), "seed {seed}");
            assert!(ring.windows(2).all(|w| w[0].class_id == w[1].class_id));
        }
        assert!(stools > 0 && sides > 0);
    }

    #[test]
    fn cups_supported_and_boards_hang() {
        let cfg = GeneratorConfig::default();
        let t = RelationThresholds::default();
        for seed in 0..60 {
            let s = generate_scene(seed, &cfg).unwrap();
            for o in &s.objects {
                match o.class_id {
                    CUP => {
                        let supported = s
                            .objects
                            .iter()
                            .filter(|b| b.class_id == TABLE || b.class_id == SIDE_TABLE)
                            .any(|b| spatial_relations(&o.bbox, &b.bbox, &t).0);
                        assert!(supported, "seed {seed}: unsupported cup");
                    }
                    BOARD => {
                        let hangs = s.objects.iter().filter(|w| w.class_id == WALL).any(|w| spatial_relations(&o.bbox, &w.bbox, &t).1);
                        assert!(hangs, "seed {seed}: board not on a wall");
                    }
                    _ => {}
                }
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let s = generate_scene(11, &GeneratorConfig::default()).unwrap();
        let back = Scene::from_json(&s.to_json(), "mem").unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let s = generate_scene(1, &GeneratorConfig::default()).unwrap();
        let text = s.to_json();
        let broken = text.replacen("\"class_id\"", "\"klass\"", 2);
        match Scene::from_json(&broken, "f.json").unwrap_err() {
            Error::Parse { source_name, line, .. } => {
                assert_eq!(source_name, "f.json");
                assert!(line > 1);
            }
            e => panic!("unexpected {e}"),
        }
        let bad_class = text.replacen("\"class_id\": 0", "\"class_id\": 9", 1);
        let err = Scene::from_json(&bad_class, "f.json").unwrap_err();
        let line = text.lines().position(|l| l.contains("\"class_id\": 0")).unwrap() + 1;
        assert!(err.to_string().contains(&format!("line {line}")), "{err}");
        assert!(Scene::from_json("{", "f.json").is_err());
    }

    #[test]
    fn tiny_rooms_rejected() {
        assert!(generate_scene(0, &GeneratorConfig { room_min: 2.0, room_max: 3.0 }).is_err());
        assert!(generate_scene(0, &GeneratorConfig { room_min: 5.0, room_max: 4.5 }).is_err());
    }
}
