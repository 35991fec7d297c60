//! Locating parameters where a matching matrix drops rank.
//!
//! The normalized singular values are sampled on a uniform grid. Local minima
//! of both the smallest one and of `Σ log σ_k = log|det|` are re-sampled more
//! finely, so that nearby crossings separate, and polished by golden-section
//! search on `log|det|`. The determinant is needed because a slowly rising
//! singular value from one crossing can hide a neighbouring crossing from
//! `σ_min`. A minimum counts as a crossing of multiplicity `m` when exactly `m`
//! singular values there are much smaller than at two probes a short distance
//! away.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;

/// One rank drop of the matching matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub at: f64,
    pub multiplicity: usize,
}

/// Crossings found on an interval, sorted by position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingSet {
    pub interval: (f64, f64),
    pub crossings: Vec<Crossing>,
    /// Positions are accurate to about this width.
    pub width: f64,
}

impl CrossingSet {
    pub fn empty(interval: (f64, f64)) -> Self {
        Self {
            interval,
            crossings: vec![],
            width: 0.0,
        }
    }

    /// Total multiplicity of crossings strictly inside `(lo, hi)`, ignoring
    /// crossings within `10·width` of either end.
    pub fn count_inside(&self, lo: f64, hi: f64) -> usize {
        let pad = 10.0 * self.width;
        self.crossings
            .iter()
            .filter(|c| c.at > lo + pad && c.at < hi - pad)
            .map(|c| c.multiplicity)
            .sum()
    }

    /// Total multiplicity within `10·width` of `at`.
    pub fn count_at(&self, at: f64) -> usize {
        let pad = 10.0 * self.width;
        self.crossings
            .iter()
            .filter(|c| (c.at - at).abs() <= pad)
            .map(|c| c.multiplicity)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanOptions {
    pub points: usize,
    /// Samples used to split each coarse bracket.
    pub sub_points: usize,
    /// Golden-section stopping width, relative to the interval length.
    pub width_rel: f64,
    /// Probe distance for the multiplicity test, relative to the interval length.
    pub probe_rel: f64,
    /// A singular value is "small" below this absolute level...
    pub small_abs: f64,
    /// ...and below this fraction of its value at both probes.
    pub small_ratio: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            points: 512,
            sub_points: 32,
            width_rel: 1e-9,
            probe_rel: 1e-5,
            small_abs: 1e-3,
            small_ratio: 1e-2,
        }
    }
}

fn log_det(v: &[f64]) -> f64 {
    v.iter().map(|x| x.max(1e-300).ln()).sum()
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn local_minima(vals: &[f64]) -> Vec<usize> {
    let n = vals.len();
    (0..n)
        .filter(|&k| {
            let left = k == 0 || vals[k] <= vals[k - 1];
            let right = k + 1 == n || vals[k] < vals[k + 1];
            left && right && n > 1
        })
        .collect()
}

fn golden<F: Fn(f64) -> Result<f64>>(f: &F, mut a: f64, mut b: f64, width: f64) -> Result<f64> {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > width {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    // Endpoints matter when the crossing sits exactly on the interval end.
    let (fa, fb) = (f(a)?, f(b)?);
    let mid = 0.5 * (a + b);
    let fm = f(mid)?;
    let best = [(fa, a), (fm, mid), (fb, b)]
        .into_iter()
        .fold((f64::INFINITY, mid), |acc, x| if x.0 < acc.0 { x } else { acc });
    Ok(best.1)
}

/// Scans `[a, b]` for rank drops of the matrix whose normalized singular
/// values (ascending) are returned by `sv`. The flag asks for full accuracy;
/// it is set only where ranks are decided.
pub fn find_crossings<F>(sv: F, a: f64, b: f64, opts: &ScanOptions) -> Result<CrossingSet>
where
    F: Fn(f64, bool) -> Result<Vec<f64>> + Sync,
{
    find_crossings_scaled(|s, precise| sv(s, precise).map(|v| (v, 1.0)), a, b, opts)
}

/// Like [`find_crossings`], with `sv` also returning the scale the values
/// were divided by. Candidates are seeded from both the normalized and the
/// raw values and located on the raw determinant, whose zeros keep their
/// width when the scale oscillates with the matrix.
pub fn find_crossings_scaled<F>(sv: F, a: f64, b: f64, opts: &ScanOptions) -> Result<CrossingSet>
where
    F: Fn(f64, bool) -> Result<(Vec<f64>, f64)> + Sync,
{
    let len = b - a;
    let width = opts.width_rel * len;
    if len <= 0.0 {
        return Ok(CrossingSet::empty((a, b)));
    }
    let raw_log_det = |(v, scale): &(Vec<f64>, f64)| log_det(v) + v.len() as f64 * scale.ln();
    let score = |s: f64| sv(s, false).map(|x| raw_log_det(&x));
    let points = opts.points.max(3);
    let xs = grid(a, b, points);
    let vals = xs.par_iter().map(|&s| sv(s, false)).collect::<Result<Vec<_>>>()?;
    let smin: Vec<f64> = vals.iter().map(|(v, _)| v.first().copied().unwrap_or(f64::INFINITY)).collect();
    let raw_min: Vec<f64> = vals
        .iter()
        .map(|(v, c)| v.first().map_or(f64::INFINITY, |x| x * c))
        .collect();
    let ldet: Vec<f64> = vals.iter().map(|(v, _)| log_det(v)).collect();
    let raw_ldet: Vec<f64> = vals.iter().map(raw_log_det).collect();
    let h = len / (points - 1) as f64;

    let delta = opts.probe_rel * len;
    // Zeros this close to a root are already counted by its multiplicity test.
    let merge = (opts.small_ratio * delta).max(10.0 * width);
    let multiplicity = |s: f64| -> Result<usize> {
        let here = sv(s, true)?.0;
        let mut probes = Vec::new();
        if s - delta >= a {
            probes.push(sv(s - delta, true)?.0);
        }
        if s + delta <= b {
            probes.push(sv(s + delta, true)?.0);
        }
        Ok((0..here.len())
            .take_while(|&k| {
                here[k] <= opts.small_abs
                    && probes
                        .iter()
                        .all(|p| here[k] <= opts.small_ratio * p.get(k).copied().unwrap_or(0.0))
            })
            .count())
    };

    let mut seeds: Vec<usize> = [&smin, &raw_min, &ldet, &raw_ldet]
        .into_iter()
        .flat_map(|v| local_minima(v))
        .collect();
    seeds.sort_unstable();
    seeds.dedup();
    let brackets: Vec<(f64, f64)> = seeds
        .into_iter()
        .map(|k| ((xs[k] - 2.0 * h).max(a), (xs[k] + 2.0 * h).min(b)))
        .collect();
    let rounds = vals.first().map_or(1, |v| v.0.len()) + 1;
    // Each bracket is searched repeatedly with the roots found so far divided
    // out of the determinant, so a close pair cannot hide behind one minimum.
    let found = brackets
        .par_iter()
        .map(|&(lo, hi)| -> Result<Vec<Crossing>> {
            let mut roots: Vec<Crossing> = Vec::new();
            let sub = grid(lo, hi, opts.sub_points.max(3));
            let hs = (hi - lo) / (sub.len() - 1) as f64;
            for _ in 0..rounds {
                let deflated = |s: f64| -> Result<f64> {
                    let d: f64 = roots
                        .iter()
                        .map(|r| r.multiplicity as f64 * (s - r.at).abs().max(1e-300).ln())
                        .sum();
                    score(s).map(|v| v - d)
                };
                let sc = sub.iter().map(|&s| deflated(s)).collect::<Result<Vec<f64>>>()?;
                let mut fresh: Vec<Crossing> = Vec::new();
                for k in local_minima(&sc) {
                    let s = golden(&deflated, (sub[k] - hs).max(lo), (sub[k] + hs).min(hi), width)?;
                    if roots.iter().chain(&fresh).any(|r| (r.at - s).abs() <= merge) {
                        continue;
                    }
                    let m = multiplicity(s)?;
                    if m > 0 {
                        fresh.push(Crossing { at: s, multiplicity: m });
                    }
                }
                if fresh.is_empty() {
                    break;
                }
                roots.extend(fresh);
            }
            Ok(roots)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut found: Vec<Crossing> = found.into_iter().flatten().collect();
    found.sort_by(|x, y| x.at.total_cmp(&y.at));

    let mut crossings: Vec<Crossing> = Vec::new();
    for c in found {
        match crossings.last_mut() {
            Some(last) if (c.at - last.at).abs() <= merge => {
                if c.multiplicity > last.multiplicity {
                    *last = c;
                }
            }
            _ => crossings.push(c),
        }
    }
    Ok(CrossingSet {
        interval: (a, b),
        crossings,
        width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_simple_and_double_zeros() {
        // Singular values |s - 0.3| and two copies of |s + 0.5|.
        let sv = |s: f64, _: bool| -> Result<Vec<f64>> {
            let mut v = vec![(s - 0.3).abs(), (s + 0.5).abs(), (s + 0.5).abs(), 1.0];
            v.sort_by(f64::total_cmp);
            Ok(v)
        };
        let set = find_crossings(sv, -1.0, 1.0, &ScanOptions::default()).unwrap();
        assert_eq!(set.crossings.len(), 2);
        assert!((set.crossings[0].at + 0.5).abs() < 1e-7);
        assert_eq!(set.crossings[0].multiplicity, 2);
        assert!((set.crossings[1].at - 0.3).abs() < 1e-7);
        assert_eq!(set.crossings[1].multiplicity, 1);
    }

    #[test]
    fn near_miss_is_not_a_crossing() {
        let sv = |s: f64, _: bool| -> Result<Vec<f64>> { Ok(vec![(s - 0.2).abs() + 1e-2]) };
        let set = find_crossings(sv, 0.0, 1.0, &ScanOptions::default()).unwrap();
        assert!(set.crossings.is_empty());
    }

    #[test]
    fn close_pair_is_split() {
        let sv = |s: f64, _: bool| -> Result<Vec<f64>> {
            let mut v = vec![(s - 0.5).abs(), (s - 0.5003).abs()];
            v.sort_by(f64::total_cmp);
            v[1] = v[1].max(0.5);
            Ok(v)
        };
        let set = find_crossings(sv, 0.0, 1.0, &ScanOptions::default()).unwrap();
        assert_eq!(set.crossings.len(), 2);
    }

    #[test]
    fn neighbour_inside_one_grid_step_is_found() {
        let sv = |s: f64, _: bool| -> Result<Vec<f64>> {
            let mut v = vec![(s - 0.023495).abs(), (s - 0.025641).abs(), 1.0];
            v.sort_by(f64::total_cmp);
            Ok(v)
        };
        let set = find_crossings(sv, 0.0, 1.0, &ScanOptions::default()).unwrap();
        assert_eq!(set.count_inside(0.0, 1.0), 2, "{:?}", set.crossings);
    }

    #[test]
    fn endpoint_crossing_is_reported() {
        let sv = |s: f64, _: bool| -> Result<Vec<f64>> { Ok(vec![s.abs()]) };
        let set = find_crossings(sv, -1.0, 0.0, &ScanOptions::default()).unwrap();
        assert_eq!(set.count_at(0.0), 1);
        assert_eq!(set.count_inside(-1.0, 0.0), 0);
    }
}
