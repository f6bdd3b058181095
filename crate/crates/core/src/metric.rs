//! Trajectory metric (TM) between two finite sets of trajectories.
//!
//! At every time step truth trajectories are assigned to estimated
//! trajectories (or left unassigned). An assigned pair that coexists costs
//! `min(d, c)^p`; every existing trajectory without a partner costs `c^p / 2`;
//! changing an assignment between consecutive steps costs `gamma^p` (half of
//! that when one side of the change is "unassigned"). The metric is the
//! `p`-th root of the minimum total cost over assignment sequences.
//!
//! The minimum is computed exactly with dynamic programming over assignment
//! states. Only pairs that are ever closer than `c` can lower the cost, so
//! states are restricted to those pairs; this keeps scenario-size instances
//! small without changing the optimum.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TmParams {
    /// Order `p >= 1`.
    pub p: f64,
    /// Cutoff `c > 0`.
    pub c: f64,
    /// Track switch penalty `gamma >= 0`.
    pub gamma: f64,
}

impl Default for TmParams {
    fn default() -> Self {
        Self {
            p: 2.0,
            c: 10.0,
            gamma: 1.0,
        }
    }
}

impl TmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) || !(self.c > 0.0) || !(self.gamma >= 0.0) || !self.c.is_finite() || !self.p.is_finite() {
            return Err(Error::Config(format!(
                "metric parameters need p >= 1, c > 0, gamma >= 0 (got p = {}, c = {}, gamma = {})",
                self.p, self.c, self.gamma
            )));
        }
        Ok(())
    }
}

/// Metric value with its per-time decomposition (all terms in `p`-th power units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TmResult {
    pub distance: f64,
    pub localization: Vec<f64>,
    pub missed: Vec<f64>,
    pub false_tracks: Vec<f64>,
    /// Switching cost between step `t - 1` and `t`, zero at the first step.
    pub switches: Vec<f64>,
}

impl TmResult {
    /// Sum of all cost terms, equal to `distance^p`.
    pub fn total_cost(&self) -> f64 {
        self.localization.iter().sum::<f64>()
            + self.missed.iter().sum::<f64>()
            + self.false_tracks.iter().sum::<f64>()
            + self.switches.iter().sum::<f64>()
    }
}

/// Switch cost factor for one truth index: 0, 1/2 or 1.
pub fn switch_factor(before: usize, after: usize) -> f64 {
    if before == after {
        0.0
    } else if before != 0 && after != 0 {
        1.0
    } else {
        0.5
    }
}

fn check_horizon(sets: [&[Trajectory]; 2], horizon: usize) -> Result<()> {
    for t in sets.into_iter().flatten() {
        if t.is_empty() {
            continue;
        }
        if t.birth_time == 0 || t.end_time() > horizon {
            return Err(Error::Horizon {
                end: t.end_time(),
                horizon,
            });
        }
    }
    Ok(())
}

fn distance(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm()
}

/// Assignment states: `state[i]` is 0 for unassigned or `j + 1`.
fn enumerate_states(allowed: &[Vec<usize>], n_estimates: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, allowed: &[Vec<usize>], used: &mut Vec<bool>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == allowed.len() {
            out.push(cur.clone());
            return;
        }
        cur.push(0);
        rec(i + 1, allowed, used, cur, out);
        cur.pop();
        for &j in &allowed[i] {
            if !used[j] {
                used[j] = true;
                cur.push(j + 1);
                rec(i + 1, allowed, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(0, allowed, &mut vec![false; n_estimates], &mut Vec::new(), &mut out);
    out
}

/// Exact trajectory metric over times `1..=horizon`.
pub fn tm_distance(
    truth: &[Trajectory],
    estimate: &[Trajectory],
    params: &TmParams,
    horizon: usize,
) -> Result<TmResult> {
    params.validate()?;
    check_horizon([truth, estimate], horizon)?;
    let (nx, ny) = (truth.len(), estimate.len());
    let cp = params.c.powf(params.p);
    let half_cp = cp / 2.0;
    let gp = params.gamma.powf(params.p);

    // pair_cost[t][i][j] = Some(d^p) when both exist at t+1 and d < c.
    let mut pair_cost = vec![vec![vec![None; ny]; nx]; horizon];
    let mut allowed = vec![Vec::new(); nx];
    let mut count_x = vec![0usize; horizon];
    let mut count_y = vec![0usize; horizon];
    for t in 0..horizon {
        let time = t + 1;
        count_x[t] = truth.iter().filter(|x| x.exists_at(time)).count();
        count_y[t] = estimate.iter().filter(|y| y.exists_at(time)).count();
        for (i, x) in truth.iter().enumerate() {
            let Some(xs) = x.state_at(time) else { continue };
            for (j, y) in estimate.iter().enumerate() {
                let Some(ys) = y.state_at(time) else { continue };
                if xs.len() != ys.len() {
                    return Err(Error::Dimension(format!(
                        "truth state has dimension {}, estimate {}",
                        xs.len(),
                        ys.len()
                    )));
                }
                let d = distance(xs, ys);
                if d < params.c {
                    pair_cost[t][i][j] = Some(d.powf(params.p));
                    if !allowed[i].contains(&j) {
                        allowed[i].push(j);
                    }
                }
            }
        }
    }
    for a in &mut allowed {
        a.sort_unstable();
    }

    let states = enumerate_states(&allowed, ny);
    let n_states = states.len();
    let step_cost = |t: usize, s: &[usize]| -> (f64, usize) {
        let mut loc = 0.0;
        let mut matched = 0;
        for (i, &a) in s.iter().enumerate() {
            if a != 0 {
                if let Some(c) = pair_cost[t][i][a - 1] {
                    loc += c;
                    matched += 1;
                }
            }
        }
        (loc, matched)
    };
    let total_step = |t: usize, s: &[usize]| -> f64 {
        let (loc, matched) = step_cost(t, s);
        loc + half_cp * (count_x[t] + count_y[t] - 2 * matched) as f64
    };
    let switch_cost =
        |a: &[usize], b: &[usize]| -> f64 { gp * a.iter().zip(b).map(|(&x, &y)| switch_factor(x, y)).sum::<f64>() };

    if horizon == 0 {
        return Ok(TmResult {
            distance: 0.0,
            localization: vec![],
            missed: vec![],
            false_tracks: vec![],
            switches: vec![],
        });
    }

    let switch_table: Option<Vec<f64>> = (n_states <= 2048).then(|| {
        let mut table = vec![0.0; n_states * n_states];
        for a in 0..n_states {
            for b in 0..n_states {
                table[a * n_states + b] = switch_cost(&states[a], &states[b]);
            }
        }
        table
    });
    let sw = |a: usize, b: usize| match &switch_table {
        Some(tab) => tab[a * n_states + b],
        None => switch_cost(&states[a], &states[b]),
    };

    let mut value: Vec<f64> = states.iter().map(|s| total_step(0, s)).collect();
    let mut back = vec![vec![0usize; n_states]; horizon];
    let mut next = vec![0.0; n_states];
    for (t, back_t) in back.iter_mut().enumerate().skip(1) {
        for b in 0..n_states {
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for (a, &va) in value.iter().enumerate() {
                let v = va + sw(a, b);
                if v < best {
                    best = v;
                    arg = a;
                }
            }
            next[b] = best + total_step(t, &states[b]);
            back_t[b] = arg;
        }
        std::mem::swap(&mut value, &mut next);
    }

    let (mut cur, best) = value
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let mut path = vec![0usize; horizon];
    for t in (0..horizon).rev() {
        path[t] = cur;
        cur = back[t][cur];
    }

    let mut result = TmResult {
        distance: best.max(0.0).powf(1.0 / params.p),
        localization: Vec::with_capacity(horizon),
        missed: Vec::with_capacity(horizon),
        false_tracks: Vec::with_capacity(horizon),
        switches: Vec::with_capacity(horizon),
    };
    for t in 0..horizon {
        let s = &states[path[t]];
        let (loc, matched) = step_cost(t, s);
        result.localization.push(loc);
        result.missed.push(half_cp * (count_x[t] - matched) as f64);
        result.false_tracks.push(half_cp * (count_y[t] - matched) as f64);
        result.switches.push(if t == 0 {
            0.0
        } else {
            switch_cost(&states[path[t - 1]], s)
        });
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(birth: usize, xs: &[f64]) -> Trajectory {
        Trajectory::new(birth, xs.iter().map(|&x| DVector::from_vec(vec![x, 0.0])).collect())
    }

    #[test]
    fn identical_sets_are_at_zero() {
        let a = vec![traj(1, &[0.0, 1.0, 2.0]), traj(2, &[50.0, 51.0])];
        let r = tm_distance(&a, &a, &TmParams::default(), 3).unwrap();
        assert_eq!(r.distance, 0.0);
    }

    #[test]
    fn all_missed_penalty() {
        let a = vec![traj(2, &[0.0, 1.0, 2.0])];
        let r = tm_distance(&a, &[], &TmParams::default(), 5).unwrap();
        assert!((r.distance - (3.0 * 50.0f64).sqrt()).abs() < 1e-12);
        assert_eq!(r.missed.iter().filter(|&&m| m > 0.0).count(), 3);
    }

    #[test]
    fn horizon_is_checked() {
        let a = vec![traj(3, &[0.0, 1.0, 2.0])];
        assert!(matches!(
            tm_distance(&a, &[], &TmParams::default(), 4),
            Err(Error::Horizon { .. })
        ));
    }

    #[test]
    fn switch_factors() {
        assert_eq!(switch_factor(2, 2), 0.0);
        assert_eq!(switch_factor(1, 2), 1.0);
        assert_eq!(switch_factor(0, 2), 0.5);
        assert_eq!(switch_factor(3, 0), 0.5);
    }

    #[test]
    fn decomposition_sums_to_distance() {
        let x = vec![traj(1, &[0.0, 1.0, 2.0, 3.0]), traj(2, &[20.0, 21.0, 22.0])];
        let y = vec![traj(1, &[0.5, 1.5, 21.0, 22.5]), traj(3, &[2.5, 3.0])];
        let r = tm_distance(&x, &y, &TmParams::default(), 4).unwrap();
        assert!((r.total_cost() - r.distance.powi(2)).abs() < 1e-9);
    }
}
