use std::fmt::Write as _;

use rayon::prelude::*;

use super::embedding::{pearson_distance, ColorEmbedding};
use crate::error::{Error, Result};

pub const DEFAULT_GROUP_SIZE: usize = 5;
pub const DEFAULT_EPS_MIN: f64 = 0.01;
pub const DEFAULT_EPS_MAX: f64 = 0.4;
pub const DEFAULT_EPS_STEPS: usize = 40;

/// `steps` geometrically spaced values from `lo` to `hi` inclusive.
pub fn eps_schedule(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && steps >= 1) {
        return Err(Error::Parameter(format!(
            "bad eps schedule {lo}..{hi} in {steps} steps"
        )));
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    let ratio = (hi / lo).ln() / (steps - 1) as f64;
    let mut out: Vec<f64> = (0..steps).map(|i| lo * (ratio * i as f64).exp()).collect();
    out[steps - 1] = hi;
    Ok(out)
}

pub fn default_eps_schedule() -> Vec<f64> {
    eps_schedule(DEFAULT_EPS_MIN, DEFAULT_EPS_MAX, DEFAULT_EPS_STEPS).expect("valid defaults")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterAssignment {
    /// Complete-group index per clip, `None` when unassigned.
    pub labels: Vec<Option<usize>>,
    /// Member indices of each complete group, ascending.
    pub complete_groups: Vec<Vec<usize>>,
    /// The ε at which each group was frozen.
    pub frozen_at: Vec<f64>,
}

impl ClusterAssignment {
    pub fn unassigned(&self) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i].is_none())
            .collect()
    }
}

/// Pairwise Pearson distances. Pairs involving a zero-variance embedding are
/// infinitely far apart, so such clips can never join a cluster.
pub fn distance_matrix(embeddings: &[ColorEmbedding]) -> Result<Vec<Vec<f64>>> {
    embeddings
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            embeddings
                .iter()
                .enumerate()
                .map(|(j, b)| {
                    if i == j {
                        return Ok(0.0);
                    }
                    match pearson_distance(a, b) {
                        Ok(d) => Ok(d),
                        Err(Error::DegenerateEmbedding(_)) => Ok(f64::INFINITY),
                        Err(e) => Err(e),
                    }
                })
                .collect()
        })
        .collect()
}

/// Plain DBSCAN over the `active` subset. `min_pts` counts the point itself.
/// Points are visited in ascending order, so border points go to the first
/// cluster that reaches them.
pub fn dbscan(dist: &[Vec<f64>], active: &[usize], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let neighbours = |p: usize| -> Vec<usize> {
        active
            .iter()
            .copied()
            .filter(|&q| dist[p][q] <= eps)
            .collect()
    };
    let mut label: Vec<Option<usize>> = vec![None; dist.len()];
    let mut visited = vec![false; dist.len()];
    let mut next = 0;
    for &p in active {
        if visited[p] {
            continue;
        }
        visited[p] = true;
        let seeds = neighbours(p);
        if seeds.len() < min_pts {
            continue;
        }
        label[p] = Some(next);
        let mut queue = seeds;
        let mut k = 0;
        while k < queue.len() {
            let q = queue[k];
            k += 1;
            if label[q].is_none() {
                label[q] = Some(next);
            }
            if visited[q] {
                continue;
            }
            visited[q] = true;
            let more = neighbours(q);
            if more.len() >= min_pts {
                queue.extend(more.into_iter().filter(|r| !visited[*r]));
            }
        }
        next += 1;
    }
    label
}

/// Runs DBSCAN at each ε of the schedule on the clips not yet grouped and
/// freezes every cluster of exactly `group_size` members.
pub fn group_by_dbscan(
    embeddings: &[ColorEmbedding],
    group_size: usize,
    schedule: &[f64],
) -> Result<ClusterAssignment> {
    if group_size < 2 {
        return Err(Error::Parameter(format!(
            "group size {group_size} must be at least 2"
        )));
    }
    if schedule.is_empty() || schedule.windows(2).any(|w| !(w[1] > w[0])) || !(schedule[0] > 0.0) {
        return Err(Error::Parameter(
            "eps schedule must be positive and strictly ascending".into(),
        ));
    }
    let dist = distance_matrix(embeddings)?;
    let mut labels = vec![None; embeddings.len()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut frozen_at = Vec::new();
    for &eps in schedule {
        let active: Vec<usize> = (0..embeddings.len())
            .filter(|&i| labels[i].is_none())
            .collect();
        if active.len() < group_size {
            break;
        }
        let clusters = dbscan(&dist, &active, eps, group_size);
        let count = clusters.iter().flatten().max().map_or(0, |m| m + 1);
        for c in 0..count {
            let members: Vec<usize> = active
                .iter()
                .copied()
                .filter(|&i| clusters[i] == Some(c))
                .collect();
            if members.len() == group_size {
                for &m in &members {
                    labels[m] = Some(groups.len());
                }
                groups.push(members);
                frozen_at.push(eps);
            }
        }
    }
    Ok(ClusterAssignment {
        labels,
        complete_groups: groups,
        frozen_at,
    })
}

/// `sample_id,cluster_id,status` rows; unassigned clips have an empty cluster id.
pub fn format_grouping_report(
    sample_ids: &[String],
    assignment: &ClusterAssignment,
) -> Result<String> {
    if sample_ids.len() != assignment.labels.len() {
        return Err(Error::Parameter(format!(
            "{} ids for {} labels",
            sample_ids.len(),
            assignment.labels.len()
        )));
    }
    let mut out = String::from("sample_id,cluster_id,status\n");
    for (id, label) in sample_ids.iter().zip(&assignment.labels) {
        match label {
            Some(c) => writeln!(out, "{id},{c},grouped"),
            None => writeln!(out, "{id},,unassigned"),
        }
        .expect("writing to a String");
    }
    Ok(out)
}
