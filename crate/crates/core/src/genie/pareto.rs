//! Pareto dominance, fast nondominated sorting, crowding distance and
//! hypervolume over the (THP, JFI, PDR) triple.
//!
//! Orientation: THP and JFI are maximized, PDR is minimized.

use std::cmp::Ordering;

use crate::sim::Kpis;

/// `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: &Kpis, b: &Kpis) -> bool {
    let no_worse = a.thp >= b.thp && a.jfi >= b.jfi && a.pdr <= b.pdr;
    let better = a.thp > b.thp || a.jfi > b.jfi || a.pdr < b.pdr;
    no_worse && better
}

/// Partition into nondomination levels. Front 0 is the nondominated set;
/// indices inside each front are ascending.
pub fn fast_nondominated_sort(objs: &[Kpis]) -> Vec<Vec<usize>> {
    let n = objs.len();
    // n_p: how many dominate p; S_p: whom p dominates.
    let mut dominated_by = vec![0usize; n];
    let mut dominates_set: Vec<Vec<usize>> = vec![Vec::new(); n];
    for p in 0..n {
        for q in (p + 1)..n {
            if dominates(&objs[p], &objs[q]) {
                dominates_set[p].push(q);
                dominated_by[q] += 1;
            } else if dominates(&objs[q], &objs[p]) {
                dominates_set[q].push(p);
                dominated_by[p] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&p| dominated_by[p] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominates_set[p] {
                dominated_by[q] -= 1;
                if dominated_by[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

fn objective(k: &Kpis, m: usize) -> f64 {
    match m {
        0 => k.thp,
        1 => k.jfi,
        _ => k.pdr,
    }
}

/// Crowding distance of every member of one front.
///
/// Boundary members of each objective get +inf; an objective with zero
/// range contributes nothing.
pub fn crowding_distance(front: &[Kpis]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    for m in 0..3 {
        order.sort_by(|&a, &b| {
            objective(&front[a], m)
                .partial_cmp(&objective(&front[b], m))
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        let lo = objective(&front[order[0]], m);
        let hi = objective(&front[order[n - 1]], m);
        let range = hi - lo;
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        if range <= 0.0 {
            continue;
        }
        for w in 1..n - 1 {
            let gap = objective(&front[order[w + 1]], m) - objective(&front[order[w - 1]], m);
            dist[order[w]] += gap / range;
        }
    }
    dist
}

/// Keep `take` members of a front, largest crowding distance first
/// (ties by position). Returns positions into `front`.
pub fn crowding_truncate(front: &[Kpis], take: usize) -> Vec<usize> {
    let dist = crowding_distance(front);
    let mut order: Vec<usize> = (0..front.len()).collect();
    order.sort_by(|&a, &b| {
        dist[b]
            .partial_cmp(&dist[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(take);
    order
}

/// Indices of the members not dominated by any other member.
pub fn nondominated(objs: &[Kpis]) -> Vec<usize> {
    (0..objs.len())
        .filter(|&i| !objs.iter().any(|o| dominates(o, &objs[i])))
        .collect()
}

/// Volume dominated by `points` and bounded by `reference` (a point that is
/// worse than everything of interest, e.g. zero THP, zero JFI, PDR 1).
pub fn hypervolume(points: &[Kpis], reference: &Kpis) -> f64 {
    // Map to a maximize-all box corner relative to the reference.
    let mut boxes: Vec<[f64; 3]> = points
        .iter()
        .map(|p| {
            [
                p.thp - reference.thp,
                p.jfi - reference.jfi,
                reference.pdr - p.pdr,
            ]
        })
        .filter(|b| b.iter().all(|&v| v > 0.0))
        .collect();
    if boxes.is_empty() {
        return 0.0;
    }
    boxes.sort_by(|a, b| b[2].partial_cmp(&a[2]).unwrap_or(Ordering::Equal));
    let mut volume = 0.0;
    for i in 0..boxes.len() {
        let top = boxes[i][2];
        let bottom = boxes.get(i + 1).map_or(0.0, |b| b[2]);
        if top > bottom {
            volume += (top - bottom) * union_area(&boxes[..=i]);
        }
    }
    volume
}

fn union_area(boxes: &[[f64; 3]]) -> f64 {
    let mut xy: Vec<(f64, f64)> = boxes.iter().map(|b| (b[0], b[1])).collect();
    xy.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
    let mut area = 0.0;
    let mut max_y: f64 = 0.0;
    for i in 0..xy.len() {
        max_y = max_y.max(xy[i].1);
        let next_x = xy.get(i + 1).map_or(0.0, |p| p.0);
        area += (xy[i].0 - next_x) * max_y;
    }
    area
}
