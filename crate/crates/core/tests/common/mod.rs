//! Reference implementations and generators shared by the integration tests.
//! Everything here is written from the definitions, not from the library code.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use aga_core::embedding::{Embedder, EmbeddingVector};
use aga_core::gateway::UsageRecord;
use aga_core::household::{
    ActionCommand, EnvironmentSnapshot, Item, ItemClass, ItemState, Property, Verb,
};
use aga_core::policy::{ExecCondition, ItemPredicate, PolicyRecord};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

// ---------------------------------------------------------------- tokens

/// Grand total recomputed from the raw per-call records.
pub fn fold_tokens(records: &[UsageRecord]) -> u64 {
    records
        .iter()
        .fold(0, |acc, r| acc + r.prompt_tokens + r.completion_tokens)
}

// ---------------------------------------------------------------- vectors

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (dot(a, a), dot(b, b));
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na.sqrt() * nb.sqrt())
    }
}

// ---------------------------------------------------------------- dbscan

/// Textbook DBSCAN as a canonical partition (noise as singletons, each group
/// sorted, groups ordered by first member).
///
/// Core components come from a transitive closure over core-core links.
/// A border point goes to the component with the smallest core index among
/// its core neighbors' components, ordered by each component's lowest core.
pub fn brute_dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    let near = |i: usize, j: usize| 1.0 - cos(&points[i], &points[j]) <= eps;
    let core: Vec<bool> = (0..n)
        .map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts)
        .collect();

    // Component id = lowest core index reachable through core links.
    let mut comp: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        if !core[i] || comp[i].is_some() {
            continue;
        }
        let mut stack = vec![i];
        comp[i] = Some(i);
        while let Some(p) = stack.pop() {
            for q in 0..n {
                if core[q] && comp[q].is_none() && near(p, q) {
                    comp[q] = Some(i);
                    stack.push(q);
                }
            }
        }
    }
    let mut label = comp.clone();
    for i in 0..n {
        if core[i] {
            continue;
        }
        label[i] = (0..n)
            .filter(|&j| core[j] && near(i, j))
            .filter_map(|j| comp[j])
            .min();
    }
    canonical_partition(&label)
}

pub fn canonical_partition(labels: &[Option<usize>]) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut out = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        match l {
            Some(l) => groups.entry(*l).or_default().push(i),
            None => out.push(vec![i]),
        }
    }
    out.extend(groups.into_values());
    out.sort();
    out
}

pub fn canonical(mut groups: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for g in &mut groups {
        g.sort_unstable();
    }
    groups.sort();
    groups
}

/// Points scattered around a few random centres in a low dimension so that
/// neighborhoods are non-trivial.
pub fn random_points(rng: &mut impl Rng, n: usize) -> Vec<Vec<f64>> {
    let dim = rng.gen_range(3..=6);
    let centres: Vec<Vec<f64>> = (0..rng.gen_range(1..=5))
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let spread = rng.gen_range(0.05..0.6);
    (0..n)
        .map(|_| {
            let c = centres.choose(rng).unwrap();
            c.iter()
                .map(|x| x + rng.gen_range(-spread..spread))
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------- mind wandering

/// `p(e) = 1 / (k |C|)` for an event in cluster `C` of `k` clusters.
pub fn analytic_p(cluster_sizes: &[usize]) -> Vec<f64> {
    let k = cluster_sizes.len() as f64;
    cluster_sizes
        .iter()
        .flat_map(|&s| std::iter::repeat_n(1.0 / (k * s as f64), s))
        .collect()
}

// ---------------------------------------------------------------- policy lookup

pub const CLASSES: [&str; 6] = ["cup", "lamp", "fridge", "chair", "book", "tv"];

fn class_def(name: &str) -> ItemClass {
    match name {
        "cup" | "book" => ItemClass::new(name, [Property::Grabbable]),
        "lamp" | "tv" => ItemClass::new(name, [Property::HasSwitch]).with_state(ItemState::Off),
        "fridge" => ItemClass::new(name, [Property::CanOpen, Property::Container])
            .with_state(ItemState::Closed),
        _ => ItemClass::new(name, [Property::Sittable]),
    }
}

fn states_for(class: &str) -> &'static [ItemState] {
    match class {
        "lamp" | "tv" => &[ItemState::On, ItemState::Off],
        "fridge" => &[ItemState::Open, ItemState::Closed],
        _ => &[],
    }
}

pub fn random_env(rng: &mut impl Rng) -> EnvironmentSnapshot {
    let catalog: BTreeMap<String, ItemClass> = CLASSES
        .iter()
        .map(|c| (c.to_string(), class_def(c)))
        .collect();
    let mut items = Vec::new();
    let mut id = 1;
    for class in CLASSES {
        for _ in 0..rng.gen_range(0..=3) {
            let state = states_for(class).choose(rng).copied();
            items.push(Item {
                id,
                class: class.to_string(),
                room: "home".into(),
                state,
            });
            id += 1;
        }
    }
    items.shuffle(rng);
    EnvironmentSnapshot {
        rooms: vec!["home".into()],
        catalog,
        items,
        agent_positions: [(0, "home".to_string())].into(),
        ..Default::default()
    }
}

pub fn random_condition(rng: &mut impl Rng) -> ExecCondition {
    let mut classes: Vec<&str> = CLASSES.to_vec();
    classes.shuffle(rng);
    let predicates = classes[..rng.gen_range(0..=3)]
        .iter()
        .map(|&class| {
            let mut props = BTreeSet::new();
            if rng.gen_bool(0.5) {
                props.extend(class_def(class).properties.iter().copied());
            }
            if rng.gen_bool(0.1) {
                props.insert(Property::Surface);
            }
            ItemPredicate {
                item_class: class.to_string(),
                min_count: rng.gen_range(0..=2),
                required_properties: props,
                required_state: if rng.gen_bool(0.5) {
                    states_for(class).choose(rng).copied()
                } else {
                    None
                },
            }
        })
        .collect();
    let actions = (0..rng.gen_range(1..=3))
        .map(|_| ActionCommand::new(0, Verb::Grab, "cup", rng.gen_range(1..20)))
        .collect();
    ExecCondition {
        predicates,
        actions,
    }
}

pub const WORDS: [&str; 8] = [
    "make", "coffee", "read", "book", "cook", "lunch", "watch", "tv",
];

pub fn random_text(rng: &mut impl Rng) -> String {
    let n = rng.gen_range(1..=4);
    (0..n)
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn random_records(rng: &mut impl Rng, embedder: &Embedder) -> Vec<PolicyRecord> {
    (0..rng.gen_range(0..=12))
        .map(|i| {
            let plan_text = random_text(rng);
            PolicyRecord {
                embedding: embedder.embed(&plan_text).unwrap(),
                plan_text,
                variants: (0..rng.gen_range(1..=3))
                    .map(|_| random_condition(rng))
                    .collect(),
                created_at: i,
                use_count: if rng.gen_bool(0.5) {
                    0
                } else {
                    rng.gen_range(1..5)
                },
            }
        })
        .collect()
}

fn admits(p: &ItemPredicate, item: &Item, env: &EnvironmentSnapshot) -> bool {
    if item.class != p.item_class {
        return false;
    }
    if let Some(s) = p.required_state {
        if item.state != Some(s) {
            return false;
        }
    }
    let Some(class) = env.catalog.get(&item.class) else {
        return false;
    };
    p.required_properties
        .iter()
        .all(|q| class.properties.contains(q))
}

pub fn satisfied(c: &ExecCondition, env: &EnvironmentSnapshot) -> bool {
    c.predicates
        .iter()
        .all(|p| env.items.iter().filter(|i| admits(p, i, env)).count() >= p.min_count as usize)
}

/// Reference lookup: (record index, variant index, similarity).
///
/// Candidates pass the similarity filter; higher similarity first, then
/// records that have been used (in store order, most recent first) before
/// unused ones (by plan text), then store order. The first candidate with a
/// satisfied variant wins, taking its first satisfied variant.
pub fn brute_lookup(
    records: &[PolicyRecord],
    threshold: f64,
    query: &EmbeddingVector,
    env: &EnvironmentSnapshot,
) -> Option<(usize, usize, f64)> {
    let mut cands: Vec<(usize, f64)> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (i, cos(query.values(), r.embedding.values())))
        .filter(|&(_, s)| s >= threshold)
        .collect();
    // Selection by repeated minimum keeps the rule explicit.
    let better = |a: (usize, f64), b: (usize, f64)| -> bool {
        let (ra, rb) = (&records[a.0], &records[b.0]);
        if a.1 != b.1 {
            return a.1 > b.1;
        }
        let (ua, ub) = (ra.use_count > 0, rb.use_count > 0);
        if ua != ub {
            return ua;
        }
        if !ua && ra.plan_text != rb.plan_text {
            return ra.plan_text < rb.plan_text;
        }
        a.0 < b.0
    };
    while !cands.is_empty() {
        let mut best = 0;
        for j in 1..cands.len() {
            if better(cands[j], cands[best]) {
                best = j;
            }
        }
        let (idx, sim) = cands.remove(best);
        if let Some(v) = records[idx].variants.iter().position(|c| satisfied(c, env)) {
            return Some((idx, v, sim));
        }
    }
    None
}
