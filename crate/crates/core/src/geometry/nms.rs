use std::cmp::Ordering;

use super::{polygon_iou, Polygon};

/// What non-maximum suppression needs to know about a detection.
pub trait Suppressible {
    fn polygon(&self) -> &Polygon;
    /// Only items with equal keys can suppress each other.
    fn class_key(&self) -> &str;
    fn confidence(&self) -> f64;
    /// Last-resort tie-break between items with identical score and geometry.
    fn tie_key(&self) -> &str;
}

fn geometry_order(a: &Polygon, b: &Polygon) -> Ordering {
    let (va, vb) = (a.vertices(), b.vertices());
    for (p, q) in va.iter().zip(vb) {
        let o = p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1]));
        if o != Ordering::Equal {
            return o;
        }
    }
    va.len().cmp(&vb.len())
}

/// Priority order: confidence descending, then vertex coordinates, then tie key.
fn priority<T: Suppressible>(a: &T, b: &T) -> Ordering {
    b.confidence()
        .total_cmp(&a.confidence())
        .then_with(|| geometry_order(a.polygon(), b.polygon()))
        .then_with(|| a.tie_key().cmp(b.tie_key()))
}

/// Greedy class-aware non-maximum suppression. An item is dropped when its
/// IoU with an already kept item of the same class reaches `iou_threshold`.
/// Survivors come back in priority order, so the result does not depend on
/// the input order and merging twice changes nothing.
pub fn merge_detections<T: Suppressible + Clone>(items: &[T], iou_threshold: f64) -> Vec<T> {
    let mut order: Vec<&T> = items.iter().collect();
    order.sort_by(|a, b| priority(*a, *b));
    let mut kept: Vec<&T> = Vec::new();
    for cand in order {
        let suppressed = kept
            .iter()
            .any(|k| k.class_key() == cand.class_key() && polygon_iou(k.polygon(), cand.polygon()) >= iou_threshold);
        if !suppressed {
            kept.push(cand);
        }
    }
    kept.into_iter().cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::OrientedRect;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[derive(Debug, Clone, PartialEq)]
    struct Item {
        id: String,
        class: String,
        conf: f64,
        poly: Polygon,
    }

    impl Suppressible for Item {
        fn polygon(&self) -> &Polygon {
            &self.poly
        }
        fn class_key(&self) -> &str {
            &self.class
        }
        fn confidence(&self) -> f64 {
            self.conf
        }
        fn tie_key(&self) -> &str {
            &self.id
        }
    }

    fn item(id: usize, class: &str, conf: f64, rect: OrientedRect) -> Item {
        Item { id: format!("D{id:03}"), class: class.into(), conf, poly: rect.to_polygon() }
    }

    /// Textbook O(n²) NMS: repeatedly take the best remaining box and delete
    /// everything of its class that overlaps it.
    fn oracle(items: &[Item], thr: f64) -> Vec<String> {
        let mut remaining: Vec<Item> = items.to_vec();
        let mut out = Vec::new();
        while !remaining.is_empty() {
            let mut best = 0;
            for i in 1..remaining.len() {
                let (a, b) = (&remaining[i], &remaining[best]);
                if a.conf > b.conf || (a.conf == b.conf && priority(a, b) == Ordering::Less) {
                    best = i;
                }
            }
            let b = remaining.remove(best);
            remaining.retain(|o| o.class != b.class || polygon_iou(&o.poly, &b.poly) < thr);
            out.push(b.id);
        }
        out.sort();
        out
    }

    fn random_items(rng: &mut ChaCha8Rng, n: usize) -> Vec<Item> {
        (0..n)
            .map(|i| {
                let r = OrientedRect::new(
                    [rng.random_range(0.0..8.0), rng.random_range(0.0..8.0)],
                    rng.random_range(0.5..3.0),
                    rng.random_range(0.5..3.0),
                    rng.random_range(-45.0..45.0),
                );
                let class = ["Hotspot", "DiodeBypass"][rng.random_range(0..2)];
                // coarse confidences force plenty of ties
                item(i, class, (rng.random_range(0..5) as f64) / 4.0, r)
            })
            .collect()
    }

    #[test]
    fn duplicates_and_partial_overlap() {
        let a = item(1, "Hotspot", 0.9, OrientedRect::new([0.5, 0.5], 1.0, 1.0, 0.0));
        let dup = Item { id: "D999".into(), ..a.clone() };
        assert_eq!(merge_detections(&[a.clone(), dup], 0.5).len(), 1);
        let b = item(2, "Hotspot", 0.8, OrientedRect::new([1.0, 0.5], 1.0, 1.0, 0.0));
        assert_eq!(merge_detections(&[a.clone(), b], 0.5).len(), 2);
        let other_class = Item { class: "StringOutage".into(), id: "D5".into(), ..a.clone() };
        assert_eq!(merge_detections(&[a, other_class], 0.5).len(), 2);
    }

    #[test]
    fn matches_brute_force_oracle() {
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let items = random_items(&mut rng, 50);
            let mut got: Vec<String> = merge_detections(&items, 0.5).into_iter().map(|d| d.id).collect();
            got.sort();
            assert_eq!(got, oracle(&items, 0.5), "seed {seed}");
        }
    }

    #[test]
    fn idempotent_and_order_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut items = random_items(&mut rng, 60);
        let once = merge_detections(&items, 0.5);
        assert_eq!(merge_detections(&once, 0.5), once);
        for _ in 0..5 {
            items.shuffle(&mut rng);
            assert_eq!(merge_detections(&items, 0.5), once);
        }
    }
}
