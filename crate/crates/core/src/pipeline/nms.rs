use super::Detection;

fn by_score_desc(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    // stable: equal scores keep input order
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));
    order
}

/// Greedy NMS ignoring class labels: keep the best remaining detection and
/// drop every other one overlapping it with IoU above `iou_thr`.
pub fn nms_class_agnostic(dets: &[Detection], iou_thr: f32) -> Vec<Detection> {
    let order = by_score_desc(dets);
    let mut kept: Vec<Detection> = Vec::new();
    for idx in order {
        let cand = &dets[idx];
        if kept.iter().all(|k| k.bbox.iou(&cand.bbox) <= iou_thr) {
            kept.push(cand.clone());
        }
    }
    kept
}

/// Greedy NMS within each class; output sorted by score.
pub fn nms_per_class(dets: &[Detection], iou_thr: f32) -> Vec<Detection> {
    let order = by_score_desc(dets);
    let mut kept: Vec<Detection> = Vec::new();
    for idx in order {
        let cand = &dets[idx];
        if kept
            .iter()
            .filter(|k| k.class_id == cand.class_id)
            .all(|k| k.bbox.iou(&cand.bbox) <= iou_thr)
        {
            kept.push(cand.clone());
        }
    }
    kept
}

/// Keeps detections with `w * h >= min_area`, in order.
pub fn filter_small(dets: &[Detection], min_area: f32) -> Vec<Detection> {
    dets.iter().filter(|d| d.bbox.area() >= min_area).cloned().collect()
}
