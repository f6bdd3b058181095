//! Pruning and absorption of trajectory mixtures, shared by both filters.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::types::{ClutterComponent, GmTrajectoryComponent, TrackGaussian, TrajectoryComponent};

/// Thresholds for mixture reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneParams {
    /// Components lighter than this are dropped.
    pub weight_threshold: f64,
    /// Squared Mahalanobis distance below which a component is absorbed.
    pub absorb_threshold: f64,
    pub max_tracks: usize,
    pub max_clutter: usize,
}

impl Default for PruneParams {
    fn default() -> Self {
        Self {
            weight_threshold: 1e-5,
            absorb_threshold: 4.0,
            max_tracks: 100,
            max_clutter: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneStats {
    pub pruned: usize,
    pub absorbed: usize,
    pub capped: usize,
    /// Absorption leaders whose current covariance could not be inverted.
    pub singular: usize,
}

impl PruneStats {
    pub fn merge(&mut self, other: PruneStats) {
        self.pruned += other.pruned;
        self.absorbed += other.absorbed;
        self.capped += other.capped;
        self.singular += other.singular;
    }
}

/// Anything carrying a weight and a trajectory Gaussian.
pub trait WeightedTrack {
    fn weight(&self) -> f64;
    fn weight_mut(&mut self) -> &mut f64;
    fn track(&self) -> &TrackGaussian;
}

impl WeightedTrack for TrajectoryComponent {
    fn weight(&self) -> f64 {
        self.weight
    }
    fn weight_mut(&mut self) -> &mut f64 {
        &mut self.weight
    }
    fn track(&self) -> &TrackGaussian {
        &self.track
    }
}

impl WeightedTrack for GmTrajectoryComponent {
    fn weight(&self) -> f64 {
        self.weight
    }
    fn weight_mut(&mut self) -> &mut f64 {
        &mut self.weight
    }
    fn track(&self) -> &TrackGaussian {
        &self.track
    }
}

/// Indices sorted by descending weight, ties broken by position.
fn by_weight_desc<T: WeightedTrack>(items: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_unstable_by(|&a, &b| items[b].weight().total_cmp(&items[a].weight()).then(a.cmp(&b)));
    order
}

/// Drops light components, absorbs near-duplicates into the heaviest
/// component with the same birth time, and keeps at most `max_tracks`.
///
/// A leader keeps its own moments and Beta parameters and gains the weight of
/// everything it absorbs, so absorption conserves total weight. Pruned and
/// capped weight is discarded. Output is ordered by descending weight.
pub fn prune_and_absorb_tracks<T: WeightedTrack + Clone>(tracks: &[T], params: &PruneParams) -> (Vec<T>, PruneStats) {
    let mut stats = PruneStats::default();
    let order = by_weight_desc(tracks);
    let alive: Vec<usize> = order
        .into_iter()
        .filter(|&i| {
            let keep = tracks[i].weight() >= params.weight_threshold;
            if !keep {
                stats.pruned += 1;
            }
            keep
        })
        .collect();

    // Leaders are taken in weight order; a component absorbed by an earlier
    // leader is skipped.
    let mut taken = vec![false; tracks.len()];
    let mut out: Vec<T> = Vec::new();
    for (pos, &leader_idx) in alive.iter().enumerate() {
        if taken[leader_idx] {
            continue;
        }
        let mut leader = tracks[leader_idx].clone();
        let lt = tracks[leader_idx].track();
        let inverse = lt
            .current_marginal()
            .ok()
            .and_then(|(_, cov)| cov.cholesky().map(|c| c.inverse()));
        match (lt.current_mean(), inverse) {
            (Some(mean), Some(inv)) => {
                let n = mean.len();
                let mut d = vec![0.0; n];
                let mut absorbed = 0.0;
                for &i in &alive[pos + 1..] {
                    let t = tracks[i].track();
                    if taken[i] || t.birth_time != lt.birth_time || t.state_dim != lt.state_dim {
                        continue;
                    }
                    let Some(m_i) = t.current_mean() else {
                        continue;
                    };
                    for (k, dk) in d.iter_mut().enumerate() {
                        *dk = m_i[k] - mean[k];
                    }
                    let mut dist_sq = 0.0;
                    for (a, da) in d.iter().enumerate() {
                        for (b, db) in d.iter().enumerate() {
                            dist_sq += da * inv[(a, b)] * db;
                        }
                    }
                    if dist_sq <= params.absorb_threshold {
                        absorbed += tracks[i].weight();
                        stats.absorbed += 1;
                        taken[i] = true;
                    }
                }
                *leader.weight_mut() += absorbed;
            }
            _ => {
                log::debug!("skipping absorption around component {leader_idx}: singular current covariance");
                stats.singular += 1;
            }
        }
        out.push(leader);
    }

    // Absorption can reorder weights; the sort is stable, so ties keep leader order.
    out.sort_by(|a, b| b.weight().total_cmp(&a.weight()));
    if out.len() > params.max_tracks {
        stats.capped += out.len() - params.max_tracks;
        out.truncate(params.max_tracks);
    }
    (out, stats)
}

/// Merges clutter components with identical Beta parameters (exact, since the
/// mixture terms coincide), drops light ones and keeps the `max_clutter` heaviest.
pub fn prune_clutter(clutter: &[ClutterComponent], params: &PruneParams) -> (Vec<ClutterComponent>, PruneStats) {
    let mut stats = PruneStats::default();
    let mut merged: Vec<ClutterComponent> = Vec::with_capacity(clutter.len());
    let mut index: HashMap<(u64, u64), usize> = HashMap::with_capacity(clutter.len());
    for c in clutter {
        let key = (c.beta.u.to_bits(), c.beta.v.to_bits());
        match index.get(&key) {
            Some(&i) => {
                merged[i].weight += c.weight;
                stats.absorbed += 1;
            }
            None => {
                index.insert(key, merged.len());
                merged.push(*c);
            }
        }
    }
    let before = merged.len();
    merged.retain(|c| c.weight >= params.weight_threshold);
    stats.pruned += before - merged.len();
    merged.sort_by(|a, b| b.weight.total_cmp(&a.weight));
    if merged.len() > params.max_clutter {
        stats.capped += merged.len() - params.max_clutter;
        merged.truncate(params.max_clutter);
    }
    (merged, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beta::BetaParams;
    use nalgebra::{DMatrix, DVector};

    fn comp(weight: f64, x: f64, birth: usize) -> GmTrajectoryComponent {
        GmTrajectoryComponent {
            weight,
            track: TrackGaussian::born(birth, DVector::from_vec(vec![x, 0.0]), DMatrix::identity(2, 2)),
        }
    }

    #[test]
    fn light_components_are_dropped() {
        let (out, stats) = prune_and_absorb_tracks(&[comp(1e-6, 0.0, 1), comp(0.5, 100.0, 1)], &PruneParams::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].weight, 0.5);
        assert_eq!(stats.pruned, 1);
    }

    #[test]
    fn identical_components_absorb() {
        let (out, stats) = prune_and_absorb_tracks(&[comp(0.3, 1.0, 1), comp(0.3, 1.0, 1)], &PruneParams::default());
        assert_eq!(out.len(), 1);
        assert!((out[0].weight - 0.6).abs() < 1e-15);
        assert_eq!(stats.absorbed, 1);
    }

    #[test]
    fn different_birth_times_never_absorb() {
        let (out, _) = prune_and_absorb_tracks(&[comp(0.3, 1.0, 1), comp(0.3, 1.0, 2)], &PruneParams::default());
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn cap_keeps_heaviest() {
        let comps: Vec<_> = (0..150)
            .map(|i| comp(0.01 + i as f64 * 1e-4, 100.0 * i as f64, 1))
            .collect();
        let (out, stats) = prune_and_absorb_tracks(&comps, &PruneParams::default());
        assert_eq!(out.len(), 100);
        assert_eq!(stats.capped, 50);
        let min_kept = out.iter().map(|c| c.weight).fold(f64::INFINITY, f64::min);
        assert!((min_kept - (0.01 + 50.0 * 1e-4)).abs() < 1e-12);
    }

    #[test]
    fn singular_leader_skips_absorption() {
        let mut a = comp(0.5, 0.0, 1);
        a.track.cov = std::sync::Arc::new(DMatrix::zeros(2, 2));
        let (out, stats) = prune_and_absorb_tracks(&[a, comp(0.3, 0.0, 1)], &PruneParams::default());
        assert_eq!(out.len(), 2);
        assert_eq!(stats.singular, 1);
    }

    #[test]
    fn clutter_merges_equal_parameters() {
        let c = |w, u, v| ClutterComponent {
            weight: w,
            beta: BetaParams::new(u, v),
        };
        let (out, _) = prune_clutter(
            &[c(1.0, 2.0, 1.0), c(2.0, 2.0, 1.0), c(1e-7, 5.0, 1.0)],
            &PruneParams::default(),
        );
        assert_eq!(out, vec![c(3.0, 2.0, 1.0)]);
    }
}
