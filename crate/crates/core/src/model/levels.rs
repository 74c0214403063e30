use rayon::prelude::*;

use super::{manifold_eigensystem, to_center_frame, EigenSystem, GeometryConfig, ManifoldParams};
use crate::error::{invalid, Error, Result};

/// Minimum squared overlap accepted when following a label to the next grid point.
const TRACKING_MIN_WEIGHT: f64 = 0.6;
const COARSE_POINTS: usize = 401;

/// Eigensystems of one manifold along a field sweep, with continuous labels.
#[derive(Debug, Clone)]
pub struct LevelDiagram {
    pub field_values: Vec<f64>,
    /// Energy-sorted eigensystem per field value.
    pub systems: Vec<EigenSystem>,
    /// `tracks[k][label]` is the sorted index that carries `label` at point `k`.
    pub tracks: Vec<[usize; 4]>,
}

impl LevelDiagram {
    pub fn len(&self) -> usize {
        self.field_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.field_values.is_empty()
    }

    /// Gap between sorted levels `i` and `j` (1-based) at grid point `k`, GHz.
    pub fn gap(&self, k: usize, i: usize, j: usize) -> f64 {
        self.systems[k].gap(i - 1, j - 1)
    }

    /// Grid index whose field equals `b` to within 1e-9 T.
    pub fn index_of(&self, b: f64) -> Result<usize> {
        self.field_values
            .iter()
            .position(|&x| (x - b).abs() <= 1e-9)
            .ok_or(Error::NotOnGrid(b))
    }

    /// Energy of tracked label `label` (0-based) at point `k`.
    pub fn tracked_energy(&self, k: usize, label: usize) -> f64 {
        self.systems[k].energies[self.tracks[k][label]]
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("grids.field", "must not be empty"));
    }
    if grid.iter().any(|b| !b.is_finite() || *b < 0.0) {
        return Err(invalid("grids.field", "field magnitudes must be finite and >= 0"));
    }
    let increasing = grid.windows(2).all(|w| w[1] > w[0]);
    let decreasing = grid.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(invalid("grids.field", "must be strictly monotone"));
    }
    Ok(())
}

/// Groups sorted indices whose energies coincide.
fn degenerate_clusters(energies: &[f64; 4]) -> Vec<Vec<usize>> {
    let tol = 1e-9 * energies.iter().fold(1.0f64, |a, e| a.max(e.abs()));
    let mut clusters: Vec<Vec<usize>> = vec![vec![0]];
    for i in 1..4 {
        if energies[i] - energies[i - 1] <= tol {
            clusters.last_mut().unwrap().push(i);
        } else {
            clusters.push(vec![i]);
        }
    }
    clusters
}

/// Maps each label at the previous point onto a sorted index at the next one
/// by maximal eigenvector overlap. Degenerate subspaces on either side are
/// compared through their projectors; ties go to the lower index.
fn follow(prev: &EigenSystem, prev_track: &[usize; 4], next: &EigenSystem) -> std::result::Result<[usize; 4], f64> {
    let mut weight = [[0.0f64; 4]; 4];
    for (p, row) in weight.iter_mut().enumerate() {
        for (n, w) in row.iter_mut().enumerate() {
            *w = prev.states[p].dotc(&next.states[n]).norm_sqr();
        }
    }
    for cluster in degenerate_clusters(&next.energies) {
        if cluster.len() > 1 {
            for row in weight.iter_mut() {
                let total = cluster.iter().map(|&n| row[n]).sum::<f64>();
                for &n in &cluster {
                    row[n] = total;
                }
            }
        }
    }

    let mut sorted_to_label = [0usize; 4];
    for (label, &idx) in prev_track.iter().enumerate() {
        sorted_to_label[idx] = label;
    }
    let mut out = [usize::MAX; 4];
    let mut taken = [false; 4];
    for cluster in degenerate_clusters(&prev.energies) {
        let mut score = [0.0f64; 4];
        for &p in &cluster {
            for n in 0..4 {
                score[n] += weight[p][n];
            }
        }
        let mut candidates: Vec<usize> = (0..4).filter(|&n| !taken[n]).collect();
        candidates.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
        let mut chosen: Vec<usize> = candidates[..cluster.len()].to_vec();
        let worst = chosen.iter().map(|&n| score[n]).fold(f64::INFINITY, f64::min);
        if worst < TRACKING_MIN_WEIGHT - 1e-9 {
            return Err(worst.sqrt());
        }
        chosen.sort_unstable();
        for (&p, &n) in cluster.iter().zip(&chosen) {
            out[sorted_to_label[p]] = n;
            taken[n] = true;
        }
    }
    Ok(out)
}

/// Diagonalizes the manifold at every grid field and tracks labels by
/// eigenvector continuity. Grid points are evaluated in parallel; tracking is
/// a sequential pass.
pub fn level_sweep(params: &ManifoldParams, geometry: &GeometryConfig, grid: &[f64]) -> Result<LevelDiagram> {
    check_grid(grid)?;
    params.validate("params")?;
    let systems = grid
        .par_iter()
        .map(|&b| manifold_eigensystem(params, &to_center_frame(b, geometry)))
        .collect::<Result<Vec<_>>>()?;

    let mut tracks = Vec::with_capacity(grid.len());
    tracks.push([0, 1, 2, 3]);
    for k in 1..grid.len() {
        let next =
            follow(&systems[k - 1], &tracks[k - 1], &systems[k]).map_err(|overlap| Error::TrackingAmbiguity {
                field: grid[k],
                overlap,
                suggested_step: (grid[k] - grid[k - 1]).abs() / 4.0,
            })?;
        tracks.push(next);
    }
    Ok(LevelDiagram {
        field_values: grid.to_vec(),
        systems,
        tracks,
    })
}

/// Location and size of a minimum gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvoidedCrossing {
    pub field: f64,
    pub gap: f64,
}

fn check_pair(pair: (usize, usize)) -> Result<(usize, usize)> {
    let (a, b) = pair;
    if !(1..=4).contains(&a) || !(1..=4).contains(&b) || a == b {
        return Err(invalid("pair", "levels must be distinct and in 1..=4"));
    }
    Ok((a.min(b) - 1, a.max(b) - 1))
}

fn gap_at(params: &ManifoldParams, geometry: &GeometryConfig, i: usize, j: usize, b: f64) -> f64 {
    manifold_eigensystem(params, &to_center_frame(b, geometry))
        .map(|s| s.gap(i, j))
        .unwrap_or(f64::NAN)
}

enum GapMinimum {
    Interior(AvoidedCrossing),
    BelowRange,
    AboveRange,
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-12 * b.abs().max(1.0) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}

fn gap_minimum(params: &ManifoldParams, geometry: &GeometryConfig, i: usize, j: usize, lo: f64, hi: f64) -> GapMinimum {
    let step = (hi - lo) / (COARSE_POINTS - 1) as f64;
    let gaps: Vec<f64> = (0..COARSE_POINTS)
        .into_par_iter()
        .map(|k| gap_at(params, geometry, i, j, lo + step * k as f64))
        .collect();
    let k = gaps
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    if k == 0 {
        return GapMinimum::BelowRange;
    }
    if k == COARSE_POINTS - 1 || !(gaps[k] < gaps[k - 1] && gaps[k] <= gaps[k + 1]) {
        return GapMinimum::AboveRange;
    }
    let f = |b: f64| gap_at(params, geometry, i, j, b);
    let field = golden_section(f, lo + step * (k - 1) as f64, lo + step * (k + 1) as f64);
    GapMinimum::Interior(AvoidedCrossing { field, gap: f(field) })
}

/// Field in `search` where the gap between levels `pair` (1-based) is
/// smallest: coarse scan, then golden-section refinement.
pub fn find_avoided_crossing(
    params: &ManifoldParams,
    geometry: &GeometryConfig,
    pair: (usize, usize),
    search: (f64, f64),
) -> Result<AvoidedCrossing> {
    let (i, j) = check_pair(pair)?;
    let (lo, hi) = search;
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
        return Err(invalid("search", "need 0 <= B_lo < B_hi"));
    }
    params.validate("params")?;
    match gap_minimum(params, geometry, i, j, lo, hi) {
        GapMinimum::Interior(c) => Ok(c),
        _ => Err(Error::CrossingNotFound(pair.0, pair.1)),
    }
}

const LAMBDA_RANGE: (f64, f64) = (1.0, 500.0);

/// Adjusts the spin-orbit constant so the (2,3) crossing sits at `target_b`.
/// Every other parameter is returned unchanged.
pub fn calibrate_lambda_ground(
    target_b: f64,
    geometry: &GeometryConfig,
    initial: &ManifoldParams,
) -> Result<ManifoldParams> {
    if !(target_b.is_finite() && target_b > 0.0) {
        return Err(invalid("target_b", "must be > 0"));
    }
    let failed = Error::CalibrationFailed {
        target: target_b,
        lo: LAMBDA_RANGE.0,
        hi: LAMBDA_RANGE.1,
    };
    let (lo_b, hi_b) = (0.25 * target_b, 4.0 * target_b);
    // Signed distance of the crossing from the target; the sign is all the
    // bisection needs when the minimum falls outside the search window.
    let offset = |lambda: f64| -> f64 {
        match gap_minimum(&initial.with_lambda(lambda), geometry, 1, 2, lo_b, hi_b) {
            GapMinimum::Interior(c) => c.field - target_b,
            GapMinimum::BelowRange => -target_b,
            GapMinimum::AboveRange => target_b,
        }
    };
    let (mut a, mut b) = LAMBDA_RANGE;
    let (fa, fb) = (offset(a), offset(b));
    if fa == 0.0 {
        b = a;
    } else if fb == 0.0 {
        a = b;
    } else if fa.signum() == fb.signum() {
        return Err(failed);
    }
    for _ in 0..200 {
        if (b - a).abs() <= 1e-10 * b.abs() {
            break;
        }
        let mid = 0.5 * (a + b);
        let fm = offset(mid);
        if fm == 0.0 {
            a = mid;
            b = mid;
        } else if fm.signum() == fa.signum() {
            a = mid;
        } else {
            b = mid;
        }
    }
    let calibrated = initial.with_lambda(0.5 * (a + b));
    let check = find_avoided_crossing(&calibrated, geometry, (2, 3), (lo_b, hi_b)).map_err(|_| failed.clone())?;
    if (check.field - target_b).abs() > 0.01 {
        return Err(failed);
    }
    Ok(calibrated)
}
