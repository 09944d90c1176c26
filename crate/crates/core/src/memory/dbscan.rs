//! DBSCAN over cosine distance.

use std::collections::VecDeque;

use crate::embedding::{cosine, EmbeddingVector};

/// Cluster label per point; `None` is noise.
///
/// Points are visited in index order and each cluster is fully expanded
/// before the next one starts, so a border point reachable from two clusters
/// joins the one whose lowest-index core point comes first. A point's
/// neighborhood includes itself; `q` neighbors `p` iff `1 - cos(p, q) <= eps`.
pub fn dbscan(points: &[&EmbeddingVector], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| 1.0 - cosine(points[i], points[j]).unwrap_or(0.0) <= eps)
                .collect()
        })
        .collect();
    let is_core = |i: usize| neighbors[i].len() >= min_pts;

    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut next = 0;
    for start in 0..n {
        if visited[start] || !is_core(start) {
            continue;
        }
        let cluster = next;
        next += 1;
        visited[start] = true;
        labels[start] = Some(cluster);
        let mut queue: VecDeque<usize> = neighbors[start].iter().copied().collect();
        while let Some(p) = queue.pop_front() {
            if labels[p].is_none() {
                labels[p] = Some(cluster);
            }
            if visited[p] {
                continue;
            }
            visited[p] = true;
            if is_core(p) {
                queue.extend(neighbors[p].iter().copied().filter(|&q| !visited[q]));
            }
        }
    }
    labels
}

/// Groups point indices into clusters, promoting each noise point to its own
/// singleton. Clusters are ordered by their lowest member index.
pub fn partition(labels: &[Option<usize>]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot_of_label: Vec<Option<usize>> = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        match *label {
            Some(l) => {
                if slot_of_label.len() <= l {
                    slot_of_label.resize(l + 1, None);
                }
                match slot_of_label[l] {
                    Some(slot) => groups[slot].push(i),
                    None => {
                        slot_of_label[l] = Some(groups.len());
                        groups.push(vec![i]);
                    }
                }
            }
            None => groups.push(vec![i]),
        }
    }
    groups
}
