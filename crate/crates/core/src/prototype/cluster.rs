//! Class-level and background prototypes from instance prototypes.
//!
//! Cluster mode runs online optimal-transport clustering: each step matches
//! the current centroids `C` (c x D) against a batch `Q` (q x D) of instance
//! prototypes with Sinkhorn on the cost `-C Q^T` and uniform marginals, then
//! moves the centroids by momentum `C <- (1 - beta) C + beta A Q`, where `A` is
//! the transport plan with each row rescaled to sum to one. Centroids start as
//! the means of a seeded random partition of the instances.

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::instance::InstancePrototype;
use super::sinkhorn::{sinkhorn, uniform_marginal, SinkhornConfig};
use crate::error::{Error, Result};
use crate::feature_io::normalize_in_place;

#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet {
    centroids: Vec<f32>,
    count: usize,
    dim: usize,
    pub class_id: usize,
}

impl CentroidSet {
    pub fn new(centroids: Vec<f32>, dim: usize, class_id: usize) -> Result<Self> {
        if dim == 0 || centroids.is_empty() || !centroids.len().is_multiple_of(dim) {
            return Err(Error::validation(format!(
                "centroid payload of {} values does not form rows of dim {dim}",
                centroids.len()
            )));
        }
        if centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite centroid"));
        }
        Ok(CentroidSet {
            count: centroids.len() / dim,
            centroids,
            dim,
            class_id,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.centroids
    }

    pub fn centroid(&self, k: usize) -> &[f32] {
        &self.centroids[k * self.dim..(k + 1) * self.dim]
    }

    pub fn mean(&self) -> Vec<f32> {
        mean_rows(self.centroids.chunks_exact(self.dim), self.dim)
    }

    pub fn into_data(self) -> Vec<f32> {
        self.centroids
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrototypeMode {
    #[default]
    Mean,
    Cluster,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterConfig {
    /// Centroids per class.
    pub centroids: usize,
    /// Momentum of the centroid update.
    pub beta: f32,
    pub steps: usize,
    /// Instances per step; `None` uses the whole (shuffled) list.
    pub batch_size: Option<usize>,
    pub sinkhorn: SinkhornConfig,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            centroids: 10,
            beta: 0.002,
            steps: 100,
            batch_size: None,
            sinkhorn: SinkhornConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BuildConfig {
    pub mode: PrototypeMode,
    pub cluster: ClusterConfig,
    pub normalize: bool,
}

impl BuildConfig {
    pub fn normalized(mode: PrototypeMode) -> Self {
        BuildConfig {
            mode,
            cluster: ClusterConfig::default(),
            normalize: true,
        }
    }
}

fn mean_rows<'a>(rows: impl Iterator<Item = &'a [f32]>, dim: usize) -> Vec<f32> {
    let mut acc = vec![0f64; dim];
    let mut n = 0usize;
    for row in rows {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += v as f64;
        }
        n += 1;
    }
    acc.into_iter().map(|a| (a / n.max(1) as f64) as f32).collect()
}

fn check_instances(instances: &[InstancePrototype]) -> Result<usize> {
    let first = instances
        .first()
        .ok_or_else(|| Error::validation("instance list is empty"))?;
    let dim = first.vector.len();
    if dim == 0 {
        return Err(Error::validation("instance prototype has zero dim"));
    }
    for inst in instances {
        if inst.vector.len() != dim {
            return Err(Error::validation(format!(
                "instance dim {} differs from {dim}",
                inst.vector.len()
            )));
        }
        if inst.class_id != first.class_id {
            return Err(Error::validation(format!(
                "mixed classes {} and {} in one instance group",
                first.class_id, inst.class_id
            )));
        }
        if inst.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite instance prototype"));
        }
    }
    Ok(dim)
}

/// One Sinkhorn matching plus momentum update of the centroids.
pub fn cluster_step(
    centroids: &CentroidSet,
    batch: &[InstancePrototype],
    beta: f32,
    sinkhorn_cfg: SinkhornConfig,
) -> Result<CentroidSet> {
    if batch.is_empty() {
        return Err(Error::validation("cluster step needs a nonempty batch"));
    }
    let dim = check_instances(batch)?;
    if dim != centroids.dim() {
        return Err(Error::validation(format!(
            "batch dim {dim} does not match centroid dim {}",
            centroids.dim()
        )));
    }
    if batch[0].class_id != centroids.class_id {
        return Err(Error::validation(format!(
            "batch class {} does not match centroid class {}",
            batch[0].class_id, centroids.class_id
        )));
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::validation(format!("beta must lie in [0, 1), got {beta}")));
    }
    let (c, q) = (centroids.count(), batch.len());
    let mut cost = vec![0f32; c * q];
    for i in 0..c {
        let ci = centroids.centroid(i);
        for (j, inst) in batch.iter().enumerate() {
            let dot: f64 = ci.iter().zip(&inst.vector).map(|(&x, &y)| x as f64 * y as f64).sum();
            cost[i * q + j] = -dot as f32;
        }
    }
    let plan = sinkhorn(
        &cost,
        &uniform_marginal(c),
        &uniform_marginal(q),
        sinkhorn_cfg.epsilon,
        sinkhorn_cfg.iters,
    )?;
    let assign = plan.row_normalized();
    let beta = beta as f64;
    let mut next = Vec::with_capacity(c * dim);
    for i in 0..c {
        let mut target = vec![0f64; dim];
        for (j, inst) in batch.iter().enumerate() {
            let w = assign[i * q + j];
            for (t, &v) in target.iter_mut().zip(&inst.vector) {
                *t += w * v as f64;
            }
        }
        for (&old, t) in centroids.centroid(i).iter().zip(target) {
            next.push(((1.0 - beta) * old as f64 + beta * t) as f32);
        }
    }
    CentroidSet::new(next, dim, centroids.class_id)
}

/// Seeded random-partition start: shuffle, deal instances round-robin into
/// `count` groups and take group means. With fewer instances than centroids
/// the shuffled instances are cycled.
fn initial_centroids<R: Rng + ?Sized>(
    instances: &[InstancePrototype],
    count: usize,
    rng: &mut R,
) -> Result<CentroidSet> {
    let dim = instances[0].vector.len();
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.shuffle(rng);
    let mut data = Vec::with_capacity(count * dim);
    if instances.len() >= count {
        for g in 0..count {
            let rows = order
                .iter()
                .skip(g)
                .step_by(count)
                .map(|&k| instances[k].vector.as_slice());
            data.extend(mean_rows(rows, dim));
        }
    } else {
        for g in 0..count {
            data.extend_from_slice(&instances[order[g % order.len()]].vector);
        }
    }
    CentroidSet::new(data, dim, instances[0].class_id)
}

/// Runs `steps` cluster steps over seeded shuffled batches of `instances`.
pub fn cluster_instances<R: Rng + ?Sized>(
    instances: &[InstancePrototype],
    cfg: &ClusterConfig,
    rng: &mut R,
) -> Result<CentroidSet> {
    check_instances(instances)?;
    if cfg.centroids == 0 {
        return Err(Error::validation("need at least one centroid"));
    }
    let mut centroids = initial_centroids(instances, cfg.centroids, rng)?;
    let batch_size = cfg
        .batch_size
        .unwrap_or(instances.len())
        .clamp(1, instances.len());
    let mut pool: Vec<InstancePrototype> = instances.to_vec();
    for _ in 0..cfg.steps {
        pool.shuffle(rng);
        centroids = cluster_step(&centroids, &pool[..batch_size], cfg.beta, cfg.sinkhorn)?;
    }
    Ok(centroids)
}

/// Class-level prototype: mean of the centroids (cluster mode) or of the
/// instances (mean mode).
pub fn build_class_prototype(
    instances: &[InstancePrototype],
    cfg: &BuildConfig,
) -> Result<Vec<f32>> {
    let dim = check_instances(instances)?;
    let mut proto = match cfg.mode {
        PrototypeMode::Mean => mean_rows(instances.iter().map(|i| i.vector.as_slice()), dim),
        PrototypeMode::Cluster => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.cluster.seed);
            cluster_instances(instances, &cfg.cluster, &mut rng)?.mean()
        }
    };
    if cfg.normalize {
        normalize_in_place(&mut proto).map_err(|e| {
            Error::validation(format!(
                "class {} prototype cannot be normalized: {e}",
                instances[0].class_id
            ))
        })?;
    }
    Ok(proto)
}

/// Background prototypes: every centroid of every nonempty group, in group
/// order then centroid order. Returns the flattened `B x D` payload.
pub fn build_background_prototypes(
    groups: &[Vec<InstancePrototype>],
    cfg: &BuildConfig,
) -> Result<Vec<f32>> {
    let mut out = Vec::new();
    let mut dim = None;
    for (g, group) in groups.iter().enumerate() {
        if group.is_empty() {
            warn!("background group {g} has no instances; skipped");
            continue;
        }
        let d = check_instances(group)?;
        if *dim.get_or_insert(d) != d {
            return Err(Error::validation(format!(
                "background group {g} has dim {d}, expected {}",
                dim.unwrap_or(d)
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.cluster.seed.wrapping_add(g as u64));
        let centroids = cluster_instances(group, &cfg.cluster, &mut rng)?;
        for k in 0..centroids.count() {
            let mut c = centroids.centroid(k).to_vec();
            if cfg.normalize {
                normalize_in_place(&mut c)?;
            }
            out.extend(c);
        }
    }
    if out.is_empty() {
        return Err(Error::validation("all background groups are empty"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(v: &[f32], class_id: usize) -> InstancePrototype {
        InstancePrototype {
            vector: v.to_vec(),
            class_id,
        }
    }

    #[test]
    fn single_centroid_single_instance_update() {
        let c = CentroidSet::new(vec![1.0, 2.0, -1.0], 3, 0).unwrap();
        let q = [inst(&[0.0, -4.0, 5.0], 0)];
        let next = cluster_step(&c, &q, 0.002, SinkhornConfig::default()).unwrap();
        let expect = [0.998 * 1.0, 0.998 * 2.0 + 0.002 * -4.0, 0.998 * -1.0 + 0.002 * 5.0];
        for (a, b) in next.data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_momentum_keeps_centroids() {
        let c = CentroidSet::new(vec![1.0, 0.0, 0.0, 1.0], 2, 1).unwrap();
        let q = [inst(&[0.3, 0.3], 1), inst(&[-1.0, 2.0], 1)];
        let next = cluster_step(&c, &q, 0.0, SinkhornConfig::default()).unwrap();
        assert_eq!(next, c);
    }

    #[test]
    fn identity_matching_is_a_fixed_point() {
        let basis = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let c = CentroidSet::new(basis.concat(), 3, 0).unwrap();
        let q: Vec<_> = basis.iter().rev().map(|b| inst(b, 0)).collect();
        let next = cluster_step(&c, &q, 0.5, SinkhornConfig::default()).unwrap();
        for (a, b) in next.data().iter().zip(c.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn cluster_step_validates() {
        let c = CentroidSet::new(vec![1.0, 0.0], 2, 0).unwrap();
        let cfg = SinkhornConfig::default();
        assert!(cluster_step(&c, &[], 0.1, cfg).is_err());
        assert!(cluster_step(&c, &[inst(&[1.0], 0)], 0.1, cfg).is_err());
        assert!(cluster_step(&c, &[inst(&[1.0, 0.0], 4)], 0.1, cfg).is_err());
        assert!(cluster_step(&c, &[inst(&[1.0, 0.0], 0)], 1.5, cfg).is_err());
    }

    #[test]
    fn mean_mode_singleton_and_symmetric_pair() {
        let cfg = BuildConfig::default();
        assert_eq!(
            build_class_prototype(&[inst(&[0.2, 0.4], 0)], &cfg).unwrap(),
            vec![0.2, 0.4]
        );
        let pair = [inst(&[1.0, -2.0], 0), inst(&[-1.0, 2.0], 0)];
        assert_eq!(build_class_prototype(&pair, &cfg).unwrap(), vec![0.0, 0.0]);
        let norm = BuildConfig::normalized(PrototypeMode::Mean);
        assert!(matches!(build_class_prototype(&pair, &norm), Err(Error::Validation(_))));
        assert!(build_class_prototype(&[], &cfg).is_err());
    }

    #[test]
    fn background_centroid_layout() {
        let mut cfg = BuildConfig::default();
        cfg.cluster.centroids = 3;
        cfg.cluster.steps = 5;
        let groups = vec![
            vec![inst(&[1.0, 0.0], 0), inst(&[0.9, 0.1], 0)],
            vec![],
            vec![inst(&[0.0, 1.0], 1); 4],
        ];
        let bg = build_background_prototypes(&groups, &cfg).unwrap();
        assert_eq!(bg.len(), 6 * 2);
        // Second group's centroids come last and all equal its (identical) instances.
        for c in bg[6..].chunks(2) {
            assert_eq!(c, &[0.0, 1.0]);
        }
        assert!(bg[..6].chunks(2).all(|c| c[0] > 0.85));
        assert!(build_background_prototypes(&[vec![]], &cfg).is_err());
    }

    #[test]
    fn ten_centroids_per_background_class() {
        let cfg = BuildConfig::normalized(PrototypeMode::Cluster);
        let group: Vec<_> = (0..7)
            .map(|k| inst(&[1.0, k as f32 * 0.1, 0.5], 0))
            .collect();
        let bg = build_background_prototypes(&[group], &cfg).unwrap();
        assert_eq!(bg.len() / 3, 10);
    }

    #[test]
    fn cluster_mode_is_seed_deterministic() {
        let cfg = BuildConfig::normalized(PrototypeMode::Cluster);
        let insts: Vec<_> = (0..12)
            .map(|k| inst(&[(k as f32).cos(), (k as f32).sin(), 1.0], 2))
            .collect();
        let a = build_class_prototype(&insts, &cfg).unwrap();
        let b = build_class_prototype(&insts, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
