//! Seeded random detection instances and a brute-force AP oracle.
//! Shared by the metric tests and the acceptance suite.

use pw2ss_core::metrics::{Detection, GroundTruth};
use pw2ss_core::{iou, BBox};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub struct Instance {
    pub dets: Vec<Detection>,
    pub gts: Vec<GroundTruth>,
}

fn random_box(rng: &mut StdRng) -> BBox {
    // coarse grid so that IoU and score ties actually occur
    let x = f64::from(rng.gen_range(0..6u8)) * 4.0;
    let y = f64::from(rng.gen_range(0..6u8)) * 4.0;
    let w = f64::from(rng.gen_range(1..5u8)) * 4.0;
    let h = f64::from(rng.gen_range(1..5u8)) * 4.0;
    BBox::new(x, y, x + w, y + h)
}

pub fn instance(seed: u64) -> Instance {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut dets = Vec::new();
    let mut gts = Vec::new();
    for img in 0..rng.gen_range(1..4) {
        let id = format!("img{img}");
        for _ in 0..rng.gen_range(0..=5) {
            gts.push(GroundTruth {
                image_id: id.clone(),
                bbox: random_box(&mut rng),
            });
        }
        for _ in 0..rng.gen_range(0..=5) {
            // half the detections jitter a ground truth, the rest are random
            let bbox = match gts.last() {
                Some(g) if rng.gen_bool(0.5) && g.image_id == id => {
                    let d = f64::from(rng.gen_range(0..3u8));
                    BBox::new(g.bbox.x_min + d, g.bbox.y_min, g.bbox.x_max + d, g.bbox.y_max)
                }
                _ => random_box(&mut rng),
            };
            dets.push(Detection {
                image_id: id.clone(),
                bbox,
                score: f64::from(rng.gen_range(0..10u8)) / 10.0,
            });
        }
    }
    Instance { dets, gts }
}

/// Prefix-by-prefix PR curve and exhaustive 101-point maximum.
pub fn oracle_ap(inst: &Instance, thr: f64) -> f64 {
    let n_gt = inst.gts.len();
    if n_gt == 0 {
        return if inst.dets.is_empty() { 1.0 } else { 0.0 };
    }
    let mut order: Vec<usize> = (0..inst.dets.len()).collect();
    order.sort_by(|&a, &b| {
        inst.dets[b]
            .score
            .partial_cmp(&inst.dets[a].score)
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut taken = vec![false; n_gt];
    let mut is_tp = Vec::new();
    for &d in &order {
        let det = &inst.dets[d];
        let mut best: Option<usize> = None;
        for (g, gt) in inst.gts.iter().enumerate() {
            if taken[g] || gt.image_id != det.image_id {
                continue;
            }
            let v = iou(&det.bbox, &gt.bbox);
            if v >= thr && best.map_or(true, |b| v > iou(&det.bbox, &inst.gts[b].bbox)) {
                best = Some(g);
            }
        }
        if let Some(g) = best {
            taken[g] = true;
        }
        is_tp.push(best.is_some());
    }
    let mut prefixes = Vec::new();
    for k in 1..=is_tp.len() {
        let tp = is_tp[..k].iter().filter(|&&t| t).count() as f64;
        prefixes.push((tp / n_gt as f64, tp / k as f64));
    }
    let mut total = 0.0;
    for r in 0..=100 {
        let level = r as f64 / 100.0;
        total += prefixes
            .iter()
            .filter(|(rec, _)| *rec >= level)
            .map(|(_, p)| *p)
            .fold(0.0, f64::max);
    }
    total / 101.0
}
