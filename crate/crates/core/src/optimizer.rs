//! Deterministic refined-grid maximizer for low-dimensional box/simplex domains.
//!
//! Each round evaluates a uniform grid over the current window, keeps the best
//! point (ties go to the lexicographically smallest coordinates), then shrinks
//! the window around it. Windows that would leave the domain are shifted back
//! inside rather than truncated, since maximin optima often sit on a face.

use crate::error::{Error, Result};
use rayon::prelude::*;
use std::cmp::Ordering;

pub const MAX_DIMENSION: usize = 6;

/// Relative slack allowed on simplex budgets when filtering grid points.
const SIMPLEX_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coordinate {
    Interval { lo: f64, hi: f64 },
    /// Member of simplex group `group`; ranges over `[0, bound]` of that group.
    Simplex { group: usize },
}

#[derive(Debug, Clone, PartialEq)]
struct SimplexGroup {
    members: Vec<usize>,
    bound: f64,
}

/// Cartesian product of intervals and simplex groups `{x ≥ 0, Σx ≤ bound}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchDomain {
    coords: Vec<Coordinate>,
    groups: Vec<SimplexGroup>,
}

impl SearchDomain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn interval(mut self, lo: f64, hi: f64) -> Self {
        self.coords.push(Coordinate::Interval { lo, hi });
        self
    }

    /// Adds `members` coordinates constrained to `x ≥ 0, Σx ≤ bound`.
    pub fn simplex(mut self, members: usize, bound: f64) -> Self {
        let group = self.groups.len();
        let start = self.coords.len();
        self.coords
            .extend(std::iter::repeat_n(Coordinate::Simplex { group }, members));
        self.groups.push(SimplexGroup {
            members: (start..start + members).collect(),
            bound,
        });
        self
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    pub fn coordinates(&self) -> &[Coordinate] {
        &self.coords
    }

    fn validate(&self) -> Result<()> {
        if self.coords.is_empty() {
            return Err(Error::Domain("empty domain".into()));
        }
        if self.coords.len() > MAX_DIMENSION {
            return Err(Error::Unsupported(format!(
                "search dimension {} exceeds {MAX_DIMENSION}",
                self.coords.len()
            )));
        }
        for c in &self.coords {
            if let Coordinate::Interval { lo, hi } = *c {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::Domain(format!("bad interval [{lo}, {hi}]")));
                }
            }
        }
        for g in &self.groups {
            if !(g.bound.is_finite() && g.bound >= 0.0) {
                return Err(Error::Domain(format!("bad simplex bound {}", g.bound)));
            }
        }
        Ok(())
    }

    /// Outer bounds of coordinate `k`.
    fn range(&self, k: usize) -> (f64, f64) {
        match self.coords[k] {
            Coordinate::Interval { lo, hi } => (lo, hi),
            Coordinate::Simplex { group } => (0.0, self.groups[group].bound),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.coords.len() {
            return false;
        }
        let in_range = x.iter().enumerate().all(|(k, &v)| {
            let (lo, hi) = self.range(k);
            v >= lo && v <= hi
        });
        in_range
            && self.groups.iter().all(|g| {
                let sum: f64 = g.members.iter().map(|&k| x[k]).sum();
                sum <= g.bound + SIMPLEX_SLACK * g.bound
            })
    }
}

/// Grid size, number of refinement rounds and window shrink factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchProfile {
    pub points_per_dim: usize,
    pub rounds: usize,
    pub shrink: f64,
    /// A run is flagged `converged` when the last round gains at most this.
    pub tolerance: f64,
}

impl Default for SearchProfile {
    fn default() -> Self {
        Self {
            points_per_dim: 17,
            rounds: 5,
            shrink: 4.0,
            tolerance: 1e-6,
        }
    }
}

impl SearchProfile {
    /// Smallest round count whose final spacing is at most `rel_resolution`
    /// of each coordinate's range.
    pub fn with_resolution(points_per_dim: usize, shrink: f64, rel_resolution: f64, tolerance: f64) -> Self {
        let first = 1.0 / (points_per_dim - 1) as f64;
        let mut rounds = 1;
        let mut res = first;
        while res > rel_resolution && rounds < 40 {
            res /= shrink;
            rounds += 1;
        }
        Self {
            points_per_dim,
            rounds,
            shrink,
            tolerance,
        }
    }

    /// Final grid spacing as a fraction of the coordinate range.
    pub fn relative_resolution(&self) -> f64 {
        (1.0 / (self.points_per_dim - 1) as f64) * self.shrink.powi(1 - self.rounds as i32)
    }

    fn validate(&self) -> Result<()> {
        if self.points_per_dim < 3 {
            return Err(Error::Domain("need at least 3 points per dimension".into()));
        }
        if self.rounds < 1 {
            return Err(Error::Domain("need at least one round".into()));
        }
        if !(self.shrink > 1.0 && self.shrink.is_finite()) {
            return Err(Error::Domain(format!("shrink factor {} must exceed 1", self.shrink)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult<P = Vec<f64>> {
    pub value: f64,
    pub argmax: P,
    pub evaluations: usize,
    pub converged: bool,
    /// Final grid spacing per coordinate.
    pub resolution: Vec<f64>,
}

impl<P> SearchResult<P> {
    pub fn map_argmax<Q>(self, f: impl FnOnce(P) -> Q) -> SearchResult<Q> {
        SearchResult {
            value: self.value,
            argmax: f(self.argmax),
            evaluations: self.evaluations,
            converged: self.converged,
            resolution: self.resolution,
        }
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y).unwrap_or(Ordering::Equal) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Axis samples of one window, ascending. A degenerate window yields one point.
fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|k| if k + 1 == n { hi } else { lo + step * k as f64 })
        .collect()
}

enum Best {
    Found { value: f64, index: usize },
    Failed { value: f64, index: usize },
    Nothing,
}

impl Best {
    // Order-independent: failures win (smallest index), then larger value,
    // then smaller index, which is the lexicographically smaller point.
    fn merge(self, other: Best) -> Best {
        use Best::*;
        match (self, other) {
            (Failed { value, index }, Failed { value: v2, index: i2 }) => {
                if index <= i2 {
                    Failed { value, index }
                } else {
                    Failed { value: v2, index: i2 }
                }
            }
            (f @ Failed { .. }, _) | (_, f @ Failed { .. }) => f,
            (Nothing, b) | (b, Nothing) => b,
            (Found { value, index }, Found { value: v2, index: i2 }) => {
                if value > v2 || (value == v2 && index < i2) {
                    Found { value, index }
                } else {
                    Found { value: v2, index: i2 }
                }
            }
        }
    }
}

/// Maximizes `objective` over `domain`.
///
/// The returned value is always achieved by the returned (feasible) argmax,
/// so it is a valid lower bound on the true maximum even when the search
/// has not converged.
pub fn refine_grid_max<F>(objective: F, domain: &SearchDomain, profile: &SearchProfile) -> Result<SearchResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    domain.validate()?;
    profile.validate()?;
    let dim = domain.dimension();
    let n = profile.points_per_dim;

    let mut window: Vec<(f64, f64)> = (0..dim).map(|k| domain.range(k)).collect();
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut evaluations = 0usize;
    let mut last_gain = f64::INFINITY;
    let mut resolution = vec![0.0; dim];

    for round in 0..profile.rounds {
        let axes: Vec<Vec<f64>> = window.iter().map(|&(lo, hi)| axis(lo, hi, n)).collect();
        for (k, &(lo, hi)) in window.iter().enumerate() {
            resolution[k] = (hi - lo) / (n - 1) as f64;
        }
        let sizes: Vec<usize> = axes.iter().map(Vec::len).collect();
        let total: usize = sizes.iter().product();

        // Mixed-radix decode, first coordinate most significant, so index
        // order is lexicographic order of the points.
        let decode = |mut idx: usize, out: &mut [f64]| {
            for k in (0..dim).rev() {
                out[k] = axes[k][idx % sizes[k]];
                idx /= sizes[k];
            }
        };

        let (best, count) = (0..total)
            .into_par_iter()
            .with_min_len(512)
            .fold(
                || (Best::Nothing, 0usize, vec![0.0; dim]),
                |(acc, count, mut buf), idx| {
                    decode(idx, &mut buf);
                    if !domain.contains(&buf) {
                        return (acc, count, buf);
                    }
                    let value = objective(&buf);
                    let cand = if value.is_finite() {
                        Best::Found { value, index: idx }
                    } else {
                        Best::Failed { value, index: idx }
                    };
                    (acc.merge(cand), count + 1, buf)
                },
            )
            .map(|(b, c, _)| (b, c))
            .reduce(|| (Best::Nothing, 0), |(a, ca), (b, cb)| (a.merge(b), ca + cb));
        evaluations += count;

        let mut point = vec![0.0; dim];
        match best {
            Best::Failed { value, index } => {
                decode(index, &mut point);
                return Err(Error::NonFiniteObjective { point, value });
            }
            Best::Nothing => {
                if incumbent.is_none() {
                    return Err(Error::Domain(format!("round {round} produced no feasible grid point")));
                }
            }
            Best::Found { value, index } => {
                decode(index, &mut point);
                debug_assert!(domain.contains(&point));
                let replace = match &incumbent {
                    None => true,
                    Some((v, x)) => value > *v || (value == *v && lex_cmp(&point, x) == Ordering::Less),
                };
                last_gain = match &incumbent {
                    None => f64::INFINITY,
                    Some((v, _)) => (value - v).max(0.0),
                };
                if replace {
                    incumbent = Some((value, point));
                }
            }
        }

        let center = &incumbent.as_ref().expect("incumbent set").1;
        for k in 0..dim {
            let (lo_dom, hi_dom) = domain.range(k);
            let width = (window[k].1 - window[k].0) / profile.shrink;
            let mut lo = center[k] - 0.5 * width;
            let mut hi = center[k] + 0.5 * width;
            if lo < lo_dom {
                lo = lo_dom;
                hi = (lo_dom + width).min(hi_dom);
            } else if hi > hi_dom {
                hi = hi_dom;
                lo = (hi_dom - width).max(lo_dom);
            }
            window[k] = (lo, hi);
        }
    }

    let (value, argmax) = incumbent.expect("at least one round evaluated");
    Ok(SearchResult {
        value,
        argmax,
        evaluations,
        converged: profile.rounds >= 2 && last_gain <= profile.tolerance,
        resolution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::sync::Mutex;

    #[test]
    fn quadratic_on_unit_interval() {
        let dom = SearchDomain::new().interval(0.0, 1.0);
        let r = refine_grid_max(|x| -(x[0] - 0.3).powi(2), &dom, &SearchProfile::default()).unwrap();
        assert_abs_diff_eq!(r.argmax[0], 0.3, epsilon = 3e-4);
        assert_abs_diff_eq!(r.value, 0.0, epsilon = 1e-7);
        assert!(r.converged);
    }

    #[test]
    fn constant_objective_picks_smallest_point() {
        let dom = SearchDomain::new().interval(-1.0, 1.0).simplex(2, 3.0);
        let r = refine_grid_max(|_| 2.5, &dom, &SearchProfile::default()).unwrap();
        assert_eq!(r.value, 2.5);
        assert_eq!(r.argmax, vec![-1.0, 0.0, 0.0]);
    }

    #[test]
    fn harmonic_on_simplex() {
        let (a, b) = (3.329136, 0.850218);
        let dom = SearchDomain::new().simplex(2, 1.0);
        let r = refine_grid_max(|x| (x[0] * a).min(x[1] * b), &dom, &SearchProfile::default()).unwrap();
        assert_abs_diff_eq!(r.value, a * b / (a + b), epsilon = 1e-3);
        assert!(r.argmax[0] + r.argmax[1] <= 1.0 + 1e-12);
    }

    #[test]
    fn boundary_optimum_is_reached() {
        let dom = SearchDomain::new().interval(0.0, 2.0).interval(-3.0, 5.0);
        let r = refine_grid_max(|x| x[0] - (x[1] - 4.99).abs(), &dom, &SearchProfile::default()).unwrap();
        assert_eq!(r.argmax[0], 2.0);
        assert_abs_diff_eq!(r.argmax[1], 4.99, epsilon = 1e-3);
    }

    #[test]
    fn evaluations_stay_in_domain() {
        let dom = SearchDomain::new().interval(0.5, 0.75).simplex(3, 2.0);
        let seen = Mutex::new(Vec::new());
        let r = refine_grid_max(
            |x| {
                seen.lock().unwrap().push(x.to_vec());
                -(x[0] - 0.7).powi(2) + x[1] * x[2] * x[3]
            },
            &dom,
            &SearchProfile { points_per_dim: 7, ..Default::default() },
        )
        .unwrap();
        let seen = seen.into_inner().unwrap();
        assert_eq!(seen.len(), r.evaluations);
        assert!(seen.iter().all(|x| dom.contains(x)));
    }

    #[test]
    fn incumbent_never_worsens_with_more_rounds() {
        let dom = SearchDomain::new().interval(-2.0, 2.0).interval(-2.0, 2.0);
        let f = |x: &[f64]| -((x[0] - 0.123).abs() + 3.0 * (x[1] + 1.777).abs()).min(1.5 + x[0]);
        let mut prev = f64::NEG_INFINITY;
        for rounds in 1..8 {
            let r = refine_grid_max(f, &dom, &SearchProfile { rounds, ..Default::default() }).unwrap();
            assert!(r.value >= prev);
            assert_eq!(r.value, f(&r.argmax));
            prev = r.value;
        }
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let dom = SearchDomain::new().simplex(2, 1.0).interval(0.0, 3.0);
        let f = |x: &[f64]| (x[0] * 1.7).min(x[1] * 0.3 + x[2].sin());
        let a = refine_grid_max(f, &dom, &SearchProfile::default()).unwrap();
        let b = refine_grid_max(f, &dom, &SearchProfile::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn degenerate_interval() {
        let dom = SearchDomain::new().interval(1.0, 1.0).simplex(2, 0.0);
        let r = refine_grid_max(|x| x[0] + x[1], &dom, &SearchProfile::default()).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.argmax, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let too_big = SearchDomain::new().simplex(7, 1.0);
        assert!(matches!(
            refine_grid_max(|_| 0.0, &too_big, &SearchProfile::default()),
            Err(Error::Unsupported(_))
        ));
        let dom = SearchDomain::new().interval(0.0, 1.0);
        for bad in [
            SearchProfile { points_per_dim: 2, ..Default::default() },
            SearchProfile { rounds: 0, ..Default::default() },
            SearchProfile { shrink: 1.0, ..Default::default() },
        ] {
            assert!(matches!(refine_grid_max(|_| 0.0, &dom, &bad), Err(Error::Domain(_))));
        }
        assert!(refine_grid_max(|_| 0.0, &SearchDomain::new().interval(1.0, 0.0), &SearchProfile::default()).is_err());
    }

    #[test]
    fn non_finite_objective_reports_point() {
        let dom = SearchDomain::new().interval(0.0, 1.0);
        let err = refine_grid_max(|x| if x[0] > 0.5 { f64::NAN } else { x[0] }, &dom, &SearchProfile::default())
            .unwrap_err();
        match err {
            Error::NonFiniteObjective { point, value } => {
                assert!(value.is_nan());
                assert_abs_diff_eq!(point[0], 0.5625, epsilon = 1e-12);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn resolution_profile() {
        let p = SearchProfile::default();
        assert_abs_diff_eq!(p.relative_resolution(), 1.0 / 16.0 / 256.0, epsilon = 1e-15);
        let q = SearchProfile::with_resolution(9, 4.0, 1e-4, 1e-9);
        assert!(q.relative_resolution() <= 1e-4);
        assert!(q.relative_resolution() * 4.0 > 1e-4);
    }
}
