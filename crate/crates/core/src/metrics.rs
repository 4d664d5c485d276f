//! COCO-style single-class detection metrics, the center criterion, and
//! top-1 accuracy.
//!
//! Detections are ranked by descending score with ties kept in input order.
//! Per image, each detection in rank order claims the unmatched ground truth
//! that satisfies the criterion with the highest IoU (lowest index on ties).
//! AP is the 101-point interpolated area under the pooled PR curve.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{center_hit, iou};
use crate::BBox;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: String,
    pub bbox: BBox,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub image_id: String,
    pub bbox: BBox,
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("prediction and label lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("accuracy of an empty list is undefined")]
    Empty,
}

/// When a detection may claim a ground truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Criterion {
    /// IoU at least the threshold.
    Iou(f64),
    /// Detection center inside the ground truth, boundary included.
    Center,
}

impl Criterion {
    fn admits(self, det: &BBox, gt: &BBox) -> bool {
        match self {
            Criterion::Iou(t) => iou(det, gt) >= t,
            Criterion::Center => center_hit(det, gt),
        }
    }
}

/// COCO IoU thresholds `0.50, 0.55, ..., 0.95`.
pub fn coco_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    /// True-positive flag per detection, in input order.
    pub det_tp: Vec<bool>,
    /// Whether each ground truth was claimed, in input order.
    pub gt_matched: Vec<bool>,
}

/// Indices of `scores` by descending score, ties in input order.
fn rank(scores: impl Iterator<Item = f64>) -> Vec<usize> {
    let s: Vec<f64> = scores.collect();
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    idx
}

/// Greedy matching on one image.
pub fn match_with(dets: &[Detection], gts: &[GroundTruth], criterion: Criterion) -> MatchResult {
    let mut det_tp = vec![false; dets.len()];
    let mut gt_matched = vec![false; gts.len()];
    for d in rank(dets.iter().map(|d| d.score)) {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if gt_matched[g] || !criterion.admits(&dets[d].bbox, &gt.bbox) {
                continue;
            }
            let v = iou(&dets[d].bbox, &gt.bbox);
            if best.map_or(true, |(_, bv)| v > bv) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            gt_matched[g] = true;
            det_tp[d] = true;
        }
    }
    MatchResult { det_tp, gt_matched }
}

pub fn match_detections(dets: &[Detection], gts: &[GroundTruth], iou_thr: f64) -> MatchResult {
    match_with(dets, gts, Criterion::Iou(iou_thr))
}

struct Pooled {
    /// `(score, is_tp)` for every detection, in global input order.
    dets: Vec<(f64, bool)>,
    matched_gts: usize,
    total_gts: usize,
}

fn group<'a, T>(items: &'a [T], key: impl Fn(&T) -> &str) -> BTreeMap<&'a str, Vec<&'a T>> {
    let mut m: BTreeMap<&str, Vec<&T>> = BTreeMap::new();
    for it in items {
        m.entry(key(it)).or_default().push(it);
    }
    m
}

fn pool(dets: &[Detection], gts: &[GroundTruth], criterion: Criterion, max_dets: Option<usize>) -> Pooled {
    let mut order: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        order.entry(d.image_id.as_str()).or_default().push(i);
    }
    let gt_by_image = group(gts, |g| &g.image_id);
    let mut flags = vec![None; dets.len()];
    let mut matched_gts = 0;
    for (image, idx) in &order {
        let mut image_dets: Vec<Detection> = idx.iter().map(|&i| dets[i].clone()).collect();
        let mut kept = idx.clone();
        if let Some(m) = max_dets {
            let top: Vec<usize> = rank(image_dets.iter().map(|d| d.score)).into_iter().take(m).collect();
            let mut top_sorted = top.clone();
            top_sorted.sort_unstable();
            kept = top_sorted.iter().map(|&k| idx[k]).collect();
            image_dets = top_sorted.iter().map(|&k| image_dets[k].clone()).collect();
        }
        let image_gts: Vec<GroundTruth> = gt_by_image
            .get(image)
            .map(|v| v.iter().map(|g| (*g).clone()).collect())
            .unwrap_or_default();
        let r = match_with(&image_dets, &image_gts, criterion);
        matched_gts += r.gt_matched.iter().filter(|&&m| m).count();
        for (k, tp) in kept.into_iter().zip(r.det_tp) {
            flags[k] = Some(tp);
        }
    }
    Pooled {
        dets: dets
            .iter()
            .zip(flags)
            .filter_map(|(d, f)| f.map(|tp| (d.score, tp)))
            .collect(),
        matched_gts,
        total_gts: gts.len(),
    }
}

/// `(recall, precision)` after each detection in rank order.
fn pr_points(p: &Pooled) -> Vec<(f64, f64)> {
    let mut tp = 0usize;
    let mut out = Vec::with_capacity(p.dets.len());
    for (k, i) in rank(p.dets.iter().map(|d| d.0)).into_iter().enumerate() {
        if p.dets[i].1 {
            tp += 1;
        }
        out.push((tp as f64 / p.total_gts as f64, tp as f64 / (k + 1) as f64));
    }
    out
}

fn interpolated_ap(p: &Pooled) -> f64 {
    if p.total_gts == 0 {
        return if p.dets.is_empty() { 1.0 } else { 0.0 };
    }
    let pts = pr_points(p);
    // precision envelope: max precision at any recall >= r
    let mut env: Vec<f64> = pts.iter().map(|q| q.1).collect();
    for i in (0..env.len().saturating_sub(1)).rev() {
        env[i] = env[i].max(env[i + 1]);
    }
    let mut total = 0.0;
    let mut j = 0;
    for r in 0..=100 {
        let thr = r as f64 / 100.0;
        while j < pts.len() && pts[j].0 < thr {
            j += 1;
        }
        if j < pts.len() {
            total += env[j];
        }
    }
    total / 101.0
}

pub fn ap_with(dets: &[Detection], gts: &[GroundTruth], criterion: Criterion) -> f64 {
    interpolated_ap(&pool(dets, gts, criterion, None))
}

/// 101-point interpolated AP at one IoU threshold, pooled over images.
pub fn average_precision(dets: &[Detection], gts: &[GroundTruth], iou_thr: f64) -> f64 {
    ap_with(dets, gts, Criterion::Iou(iou_thr))
}

/// Pooled precision-recall curve at one IoU threshold.
pub fn pr_curve(dets: &[Detection], gts: &[GroundTruth], iou_thr: f64) -> Vec<(f64, f64)> {
    let p = pool(dets, gts, Criterion::Iou(iou_thr), None);
    if p.total_gts == 0 {
        return Vec::new();
    }
    pr_points(&p)
}

/// Mean AP over the ten COCO thresholds.
pub fn coco_ap(dets: &[Detection], gts: &[GroundTruth]) -> f64 {
    coco_thresholds().iter().map(|&t| average_precision(dets, gts, t)).sum::<f64>() / 10.0
}

pub fn ap50(dets: &[Detection], gts: &[GroundTruth]) -> f64 {
    average_precision(dets, gts, 0.5)
}

pub fn ap75(dets: &[Detection], gts: &[GroundTruth]) -> f64 {
    average_precision(dets, gts, 0.75)
}

fn recall(p: &Pooled) -> f64 {
    if p.total_gts == 0 {
        return if p.dets.is_empty() { 1.0 } else { 0.0 };
    }
    p.matched_gts as f64 / p.total_gts as f64
}

/// Recall of the top `max_dets` detections per image, averaged over the ten COCO thresholds.
pub fn average_recall(dets: &[Detection], gts: &[GroundTruth], max_dets: usize) -> f64 {
    coco_thresholds()
        .iter()
        .map(|&t| recall(&pool(dets, gts, Criterion::Iou(t), Some(max_dets))))
        .sum::<f64>()
        / 10.0
}

/// `(recall, ap)` under the center criterion.
pub fn center_metric(dets: &[Detection], gts: &[GroundTruth]) -> (f64, f64) {
    let p = pool(dets, gts, Criterion::Center, None);
    (recall(&p), interpolated_ap(&p))
}

pub fn top1_accuracy(preds: &[usize], gts: &[usize]) -> Result<f64, MetricsError> {
    if preds.len() != gts.len() {
        return Err(MetricsError::LengthMismatch(preds.len(), gts.len()));
    }
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hits = preds.iter().zip(gts).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / preds.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(rename = "AR")]
    pub ar: f64,
    #[serde(rename = "AP")]
    pub ap: f64,
    #[serde(rename = "AP50")]
    pub ap50: f64,
    #[serde(rename = "AP75")]
    pub ap75: f64,
    pub center_recall: f64,
    pub center_ap: f64,
    /// Fraction of detections that are true positives at IoU 0.5.
    pub precision50: f64,
    pub recall50: f64,
}

pub const DEFAULT_MAX_DETS: usize = 100;

pub fn evaluate(dets: &[Detection], gts: &[GroundTruth]) -> MetricReport {
    let (center_recall, center_ap) = center_metric(dets, gts);
    let p50 = pool(dets, gts, Criterion::Iou(0.5), None);
    let tp50 = p50.dets.iter().filter(|d| d.1).count();
    MetricReport {
        ar: average_recall(dets, gts, DEFAULT_MAX_DETS),
        ap: coco_ap(dets, gts),
        ap50: interpolated_ap(&p50),
        ap75: ap75(dets, gts),
        center_recall,
        center_ap,
        precision50: if dets.is_empty() { 0.0 } else { tp50 as f64 / dets.len() as f64 },
        recall50: recall(&p50),
    }
}
