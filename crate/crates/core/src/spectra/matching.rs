//! Multiplicity-aware pairing of computed eigenvalues with the base spectrum.

use crate::model::{expanded_base_spectrum, SpectralWindow, TorusSpec};
use crate::C64;

use super::EigenSet;

/// Window-boundary margin below which eigenvalues are left out of matching.
pub const DEFAULT_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPair {
    pub lambda_p: C64,
    pub lambda_base: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport {
    pub pairs: Vec<MatchPair>,
    pub unmatched_p: Vec<C64>,
    pub unmatched_base: Vec<f64>,
    /// Largest pair distance; an unmatched value contributes its distance to
    /// the nearest value of the other list (infinite if that list is empty).
    pub hausdorff: f64,
}

impl MatchReport {
    pub fn is_complete(&self) -> bool {
        self.unmatched_p.is_empty() && self.unmatched_base.is_empty()
    }
}

pub fn match_spectra(found: &EigenSet, spec: &TorusSpec, margin: f64) -> MatchReport {
    let values: Vec<C64> = found.items.iter().map(|it| it.lambda).collect();
    match_values(
        &values,
        &expanded_base_spectrum(spec, &found.window),
        &found.window,
        margin,
    )
}

/// Optimal assignment between `found` and the multiplicity-expanded `base`,
/// restricted to values farther than `margin` from the window boundary.
pub fn match_values(found: &[C64], base: &[f64], window: &SpectralWindow, margin: f64) -> MatchReport {
    let p: Vec<C64> = found
        .iter()
        .copied()
        .filter(|z| window.contains_with_margin(*z, margin))
        .collect();
    let b: Vec<f64> = base
        .iter()
        .copied()
        .filter(|&v| window.contains_with_margin(C64::new(v, 0.0), margin))
        .collect();
    let dist = |i: usize, j: usize| (p[i] - C64::new(b[j], 0.0)).norm();

    let mut pairs = Vec::new();
    let mut used_p = vec![false; p.len()];
    let mut used_b = vec![false; b.len()];
    if p.len() <= b.len() {
        let cost: Vec<Vec<f64>> = (0..p.len())
            .map(|i| (0..b.len()).map(|j| dist(i, j)).collect())
            .collect();
        for (i, j) in assignment(&cost).into_iter().enumerate() {
            used_p[i] = true;
            used_b[j] = true;
            pairs.push((i, j));
        }
    } else {
        let cost: Vec<Vec<f64>> = (0..b.len())
            .map(|j| (0..p.len()).map(|i| dist(i, j)).collect())
            .collect();
        for (j, i) in assignment(&cost).into_iter().enumerate() {
            used_p[i] = true;
            used_b[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_by(|x, y| {
        b[x.1]
            .total_cmp(&b[y.1])
            .then(p[x.0].re.total_cmp(&p[y.0].re))
            .then(p[x.0].im.total_cmp(&p[y.0].im))
    });

    let pairs: Vec<MatchPair> = pairs
        .into_iter()
        .map(|(i, j)| MatchPair {
            lambda_p: p[i],
            lambda_base: b[j],
            distance: dist(i, j),
        })
        .collect();
    let unmatched_p: Vec<C64> = (0..p.len()).filter(|&i| !used_p[i]).map(|i| p[i]).collect();
    let unmatched_base: Vec<f64> = (0..b.len()).filter(|&j| !used_b[j]).map(|j| b[j]).collect();

    let mut hausdorff = pairs.iter().map(|q| q.distance).fold(0.0, f64::max);
    for z in &unmatched_p {
        let d = b
            .iter()
            .map(|&v| (z - C64::new(v, 0.0)).norm())
            .fold(f64::INFINITY, f64::min);
        hausdorff = hausdorff.max(d);
    }
    for &v in &unmatched_base {
        let d = p
            .iter()
            .map(|z| (z - C64::new(v, 0.0)).norm())
            .fold(f64::INFINITY, f64::min);
        hausdorff = hausdorff.max(d);
    }
    MatchReport {
        pairs,
        unmatched_p,
        unmatched_base,
        hausdorff,
    }
}

/// Minimum-cost assignment of every row to a distinct column (rows <= cols),
/// by the Hungarian method with potentials. Returns the column of each row.
pub fn assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "assignment needs rows <= columns");
    // 1-based arrays; column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0usize; n];
    for j in 1..=m {
        if owner[j] != 0 {
            out[owner[j] - 1] = j - 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn window() -> SpectralWindow {
        SpectralWindow::new(-0.5, 4.5, -1.0, 1.0).unwrap()
    }

    fn brute_force(cost: &[Vec<f64>]) -> f64 {
        fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == cost.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..cost[0].len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row][j] + go(cost, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        go(cost, 0, &mut vec![false; cost[0].len()])
    }

    #[test]
    fn exact_base_spectrum_matches_with_zero_distance() {
        let spec = TorusSpec::default();
        let base = expanded_base_spectrum(&spec, &window());
        let found: Vec<C64> = base.iter().map(|&v| C64::new(v, 0.0)).collect();
        let r = match_values(&found, &base, &window(), DEFAULT_MARGIN);
        assert_eq!(r.pairs.len(), 13);
        assert!(r.is_complete());
        assert_eq!(r.hausdorff, 0.0);
    }

    #[test]
    fn spurious_value_is_unmatched() {
        let base = vec![0.0, 1.0, 1.0];
        let found = vec![
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(100.0, 0.0),
        ];
        let w = SpectralWindow::new(-0.5, 200.0, -1.0, 1.0).unwrap();
        let r = match_values(&found, &base, &w, DEFAULT_MARGIN);
        assert_eq!(r.unmatched_p, vec![C64::new(100.0, 0.0)]);
        assert!(r.unmatched_base.is_empty());
        assert_eq!(r.hausdorff, 99.0);
    }

    #[test]
    fn multiplicity_mismatch_is_visible() {
        let base = vec![1.0, 1.0, 1.0, 1.0];
        let found = vec![C64::new(1.01, 0.0), C64::new(0.99, 0.0)];
        let r = match_values(&found, &base, &window(), DEFAULT_MARGIN);
        assert_eq!(r.unmatched_base.len(), 2);
        assert!((r.hausdorff - 0.01).abs() < 1e-12);
    }

    #[test]
    fn boundary_values_are_excluded() {
        let r = match_values(&[C64::new(4.4995, 0.0)], &[], &window(), DEFAULT_MARGIN);
        assert!(r.is_complete());
    }

    proptest! {
        #[test]
        fn hungarian_is_optimal(seed in proptest::collection::vec(0.0f64..10.0, 30), n in 1usize..5, extra in 0usize..2) {
            let m = n + extra;
            let cost: Vec<Vec<f64>> = (0..n).map(|i| (0..m).map(|j| seed[(i * 6 + j) % 30]).collect()).collect();
            let cols = assignment(&cost);
            let mut seen = cols.clone();
            seen.sort();
            seen.dedup();
            prop_assert_eq!(seen.len(), n);
            let total: f64 = cols.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            prop_assert!((total - brute_force(&cost)).abs() < 1e-9);
        }
    }
}
