//! Weekday clustering of daily consumption totals.
//!
//! Level one runs 1-D k-means on the daily energy totals and picks `k` by the
//! mean silhouette score; level two maps each weekday to the cluster that
//! holds most of its historical instances.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ForecastError;
use crate::math;
use crate::model::HourlyTimeSeries;
use crate::time::Day;

pub const MIN_HISTORY_DAYS: usize = 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSettings {
    pub k_max: usize,
    pub restarts: usize,
    pub seed: u64,
    pub utc_offset_h: i32,
}

impl Default for ClusterSettings {
    fn default() -> Self {
        ClusterSettings { k_max: 7, restarts: 10, seed: 0, utc_offset_h: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    /// Daily totals in Wh, ascending; cluster ids index this list.
    pub centroids: Vec<f64>,
    /// Monday = 0 … Sunday = 6.
    pub weekday_to_cluster: [usize; 7],
    pub member_days: Vec<Vec<Day>>,
    pub silhouette: f64,
}

impl ClusterModel {
    /// The cluster a target day is forecast with.
    pub fn cluster_for(&self, day: Day) -> usize {
        self.weekday_to_cluster[day.weekday_index()]
    }

    /// A single cluster holding every weekday.
    pub fn single(centroid: f64, member_days: Vec<Day>) -> Self {
        ClusterModel { k: 1, centroids: vec![centroid], weekday_to_cluster: [0; 7], member_days: vec![member_days], silhouette: 0.0 }
    }
}

/// Local days fully covered by `series`, with their 24 hourly values.
pub(crate) fn complete_days(series: &HourlyTimeSeries, utc_offset_h: i32) -> Vec<(Day, &[f64])> {
    let mut out = Vec::new();
    if series.is_empty() {
        return out;
    }
    let mut day = series.start().local_day(utc_offset_h);
    if day.first_hour(utc_offset_h) < series.start() {
        day = day.next();
    }
    loop {
        let first = day.first_hour(utc_offset_h);
        if first + 24 > series.end() {
            break;
        }
        let a = (first - series.start()) as usize;
        out.push((day, &series.values()[a..a + 24]));
        day = day.next();
    }
    out
}

pub fn cluster_days(history: &HourlyTimeSeries, settings: &ClusterSettings) -> Result<ClusterModel, ForecastError> {
    let days = complete_days(history, settings.utc_offset_h);
    if days.len() < MIN_HISTORY_DAYS {
        return Err(ForecastError::InsufficientHistory { needed: MIN_HISTORY_DAYS, got: days.len() });
    }
    let totals: Vec<f64> = days.iter().map(|(_, v)| v.iter().sum()).collect();
    let all_days: Vec<Day> = days.iter().map(|(d, _)| *d).collect();

    let first = totals[0];
    if totals.iter().all(|&t| t == first) {
        return Ok(ClusterModel::single(first, all_days));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let k_hi = settings.k_max.min(7).min(totals.len() - 1);
    let mut best: Option<(f64, KMeans)> = None;
    for k in 2..=k_hi {
        let Some(fit) = kmeans_1d(&totals, k, settings.restarts.max(1), &mut rng) else {
            continue;
        };
        let score = silhouette(&totals, &fit.labels, k);
        // Strict improvement only, so ties stay with the smaller k.
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, fit));
        }
    }
    let Some((score, fit)) = best else {
        return Ok(ClusterModel::single(math::mean(&totals), all_days));
    };

    let k = fit.centroids.len();
    let mut member_days = vec![Vec::new(); k];
    let mut votes = [[0usize; 7]; 7];
    for ((day, _), &label) in days.iter().zip(&fit.labels) {
        member_days[label].push(*day);
        votes[day.weekday_index()][label] += 1;
    }
    let mut weekday_to_cluster = [0usize; 7];
    for (wd, slot) in weekday_to_cluster.iter_mut().enumerate() {
        let counts = &votes[wd][..k];
        let mut arg = 0;
        for c in 1..k {
            if counts[c] > counts[arg] {
                arg = c;
            }
        }
        if counts[arg] == 0 {
            // Weekday absent from history: nearest centroid to the overall mean.
            let m = math::mean(&totals);
            arg = nearest(&fit.centroids, m);
        }
        *slot = arg;
    }
    Ok(ClusterModel { k, centroids: fit.centroids, weekday_to_cluster, member_days, silhouette: score })
}

#[derive(Clone, Debug)]
pub(crate) struct KMeans {
    pub labels: Vec<usize>,
    pub centroids: Vec<f64>,
    pub inertia: f64,
}

fn nearest(centroids: &[f64], x: f64) -> usize {
    let mut arg = 0;
    for (i, c) in centroids.iter().enumerate() {
        if math::abs(x - c) < math::abs(x - centroids[arg]) {
            arg = i;
        }
    }
    arg
}

/// Lloyd's algorithm with k-means++ seeding, best of `restarts` by inertia.
/// Clusters are relabelled by ascending centroid. Returns `None` when every
/// restart ends with an empty cluster.
pub(crate) fn kmeans_1d(xs: &[f64], k: usize, restarts: usize, rng: &mut ChaCha8Rng) -> Option<KMeans> {
    let mut best: Option<KMeans> = None;
    for _ in 0..restarts {
        let mut centroids = Vec::with_capacity(k);
        centroids.push(xs[rng.random_range(0..xs.len())]);
        while centroids.len() < k {
            let d2: Vec<f64> = xs
                .iter()
                .map(|&x| {
                    let c = centroids[nearest(&centroids, x)];
                    (x - c) * (x - c)
                })
                .collect();
            let total: f64 = d2.iter().sum();
            if total <= 0.0 {
                break;
            }
            let mut target = rng.random::<f64>() * total;
            let mut pick = xs.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if target < *d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            centroids.push(xs[pick]);
        }
        if centroids.len() < k {
            continue;
        }
        let mut labels = vec![0usize; xs.len()];
        for _ in 0..300 {
            let mut changed = false;
            for (i, &x) in xs.iter().enumerate() {
                let l = nearest(&centroids, x);
                if l != labels[i] {
                    labels[i] = l;
                    changed = true;
                }
            }
            let mut sums = vec![0.0; k];
            let mut counts = vec![0usize; k];
            for (&x, &l) in xs.iter().zip(&labels) {
                sums[l] += x;
                counts[l] += 1;
            }
            for c in 0..k {
                if counts[c] > 0 {
                    centroids[c] = sums[c] / counts[c] as f64;
                }
            }
            if !changed {
                break;
            }
        }
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        if counts.contains(&0) {
            continue;
        }
        let inertia: f64 = xs.iter().zip(&labels).map(|(x, &l)| (x - centroids[l]) * (x - centroids[l])).sum();
        if best.as_ref().is_none_or(|b| inertia < b.inertia) {
            best = Some(KMeans { labels, centroids, inertia });
        }
    }
    best.map(|mut fit| {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| fit.centroids[a].total_cmp(&fit.centroids[b]));
        let mut rank = vec![0usize; k];
        for (new, &old) in order.iter().enumerate() {
            rank[old] = new;
        }
        fit.centroids = order.iter().map(|&o| fit.centroids[o]).collect();
        for l in fit.labels.iter_mut() {
            *l = rank[*l];
        }
        fit
    })
}

/// Mean silhouette coefficient; members of singleton clusters score 0.
pub(crate) fn silhouette(xs: &[f64], labels: &[usize], k: usize) -> f64 {
    let n = xs.len();
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            sums[labels[j]] += math::abs(xs[i] - xs[j]);
        }
        let own = labels[i];
        if counts[own] <= 1 {
            continue;
        }
        let a = sums[own] / (counts[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SeriesKind;
    use crate::time::Hour;

    /// Flat hourly profile whose daily total is `total(weekday, day_index)`.
    fn history(days: usize, total: impl Fn(usize, usize) -> f64) -> HourlyTimeSeries {
        // 2019-01-07 was a Monday.
        let start = Hour::from_ymdh(2019, 1, 7, 0).unwrap();
        let first = start.local_day(0);
        let mut values = Vec::new();
        for d in 0..days {
            let wd = Day(first.0 + d as i64).weekday_index();
            values.extend(std::iter::repeat_n(total(wd, d) / 24.0, 24));
        }
        HourlyTimeSeries::new(start, values, SeriesKind::EnergyWh).unwrap()
    }

    /// Independent oracle: exhaustive silhouette over every contiguous split
    /// of the sorted totals into k groups (optimal 1-D clusterings are
    /// contiguous), for k up to `k_max`.
    fn brute_force_best_k(totals: &[f64], k_max: usize) -> usize {
        let mut sorted = totals.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let score = |cuts: &[usize]| -> f64 {
            let mut labels = vec![0usize; n];
            let mut c = 0;
            for i in 0..n {
                while c < cuts.len() && i >= cuts[c] {
                    c += 1;
                }
                labels[i] = c;
            }
            let k = cuts.len() + 1;
            let mut s = 0.0;
            for i in 0..n {
                let own: Vec<f64> = (0..n).filter(|&j| labels[j] == labels[i] && j != i).map(|j| (sorted[i] - sorted[j]).abs()).collect();
                if own.is_empty() {
                    continue;
                }
                let a = own.iter().sum::<f64>() / own.len() as f64;
                let mut b = f64::INFINITY;
                for other in 0..k {
                    if other == labels[i] {
                        continue;
                    }
                    let d: Vec<f64> = (0..n).filter(|&j| labels[j] == other).map(|j| (sorted[i] - sorted[j]).abs()).collect();
                    b = b.min(d.iter().sum::<f64>() / d.len() as f64);
                }
                s += (b - a) / a.max(b);
            }
            s / n as f64
        };
        fn enumerate(n: usize, k: usize, from: usize, cuts: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
            if cuts.len() + 1 == k {
                f(cuts);
                return;
            }
            for c in from..n {
                cuts.push(c);
                enumerate(n, k, c + 1, cuts, f);
                cuts.pop();
            }
        }
        let mut best = (f64::NEG_INFINITY, 0);
        for k in 2..=k_max {
            enumerate(n, k, 1, &mut Vec::new(), &mut |cuts| {
                let s = score(cuts);
                if s > best.0 {
                    best = (s, k);
                }
            });
        }
        best.1
    }

    fn jitter(d: usize) -> f64 {
        // Deterministic ±150 Wh wobble.
        ((d * 37 % 11) as f64 - 5.0) * 30.0
    }

    #[test]
    fn sunday_is_isolated() {
        let h = history(30, |wd, d| if wd == 6 { 1000.0 } else { 6000.0 } + jitter(d));
        let model = cluster_days(&h, &ClusterSettings::default()).unwrap();
        let totals: Vec<f64> = complete_days(&h, 0).iter().map(|(_, v)| v.iter().sum()).collect();
        assert_eq!(brute_force_best_k(&totals, 4), 2);
        assert_eq!(model.k, 2);
        assert_eq!(model.weekday_to_cluster, [1, 1, 1, 1, 1, 1, 0]);
        assert!(model.member_days[0].iter().all(|d| d.weekday_index() == 6));
    }

    #[test]
    fn three_bands() {
        let h = history(35, |wd, d| match wd {
            0 | 1 => 2000.0,
            2..=4 => 5000.0,
            _ => 9000.0,
        } + jitter(d));
        let totals: Vec<f64> = complete_days(&h, 0).iter().map(|(_, v)| v.iter().sum()).collect();
        assert_eq!(brute_force_best_k(&totals, 4), 3);
        let model = cluster_days(&h, &ClusterSettings::default()).unwrap();
        assert_eq!(model.k, 3);
        assert_eq!(model.weekday_to_cluster, [0, 0, 1, 1, 1, 2, 2]);
    }

    #[test]
    fn constant_totals_fall_back_to_one_cluster() {
        let h = history(21, |_, _| 5000.0);
        let model = cluster_days(&h, &ClusterSettings::default()).unwrap();
        assert_eq!(model.k, 1);
        assert_eq!(model.member_days[0].len(), 21);
    }

    #[test]
    fn short_history_is_rejected() {
        let h = history(10, |_, _| 5000.0);
        assert_eq!(
            cluster_days(&h, &ClusterSettings::default()),
            Err(ForecastError::InsufficientHistory { needed: 14, got: 10 })
        );
    }

    #[test]
    fn every_day_in_exactly_one_cluster_and_deterministic() {
        let h = history(60, |wd, d| 3000.0 + 500.0 * wd as f64 + jitter(d) * 3.0);
        let s = ClusterSettings { seed: 7, ..Default::default() };
        let a = cluster_days(&h, &s).unwrap();
        let b = cluster_days(&h, &s).unwrap();
        assert_eq!(a, b);
        let total: usize = a.member_days.iter().map(Vec::len).sum();
        assert_eq!(total, 60);
        assert!(a.weekday_to_cluster.iter().all(|&c| c < a.k));
    }

    #[test]
    fn partial_days_are_skipped() {
        let start = Hour::from_ymdh(2019, 1, 7, 5).unwrap();
        let h = HourlyTimeSeries::new(start, vec![1.0; 24 * 3], SeriesKind::EnergyWh).unwrap();
        assert_eq!(complete_days(&h, 0).len(), 2);
    }
}
