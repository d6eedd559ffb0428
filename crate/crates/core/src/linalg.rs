//! Sparse assembly target and a banded LU solver.
//!
//! Periodic 1-D stencils couple node `0` to node `M-1`. Visiting nodes in the
//! order `0, 1, M-1, 2, M-2, ...` puts every pair of neighbours at most two
//! positions apart, so the permuted matrix has a bandwidth of about two node
//! blocks and a partially pivoted band LU costs `O(M)`.

use crate::error::{FlowError, Result};

/// Node visiting order that makes a cyclic chain banded.
pub fn zigzag_order(m: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(m);
    if m == 0 {
        return order;
    }
    order.push(0);
    let (mut lo, mut hi) = (1, m - 1);
    while lo <= hi {
        order.push(lo);
        if hi != lo {
            order.push(hi);
        }
        lo += 1;
        hi -= 1;
    }
    order
}

/// Coordinate-format matrix and right-hand side. Duplicate entries add.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSystem {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
    /// `band_order[p]` is the original index placed at position `p` before
    /// factorization; empty means identity.
    pub band_order: Vec<usize>,
}

impl SparseSystem {
    pub fn new(n: usize) -> Self {
        SparseSystem {
            n,
            entries: Vec::new(),
            rhs: vec![0.0; n],
            band_order: Vec::new(),
        }
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    /// `y = A x`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    /// Entries merged per (row, col), sorted.
    pub fn compressed(&self) -> Vec<(usize, usize, f64)> {
        let mut e = self.entries.clone();
        e.sort_by_key(|&(i, j, _)| (i, j));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(e.len());
        for (i, j, v) in e {
            match out.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => out.push((i, j, v)),
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for &(i, j, v) in &self.entries {
            a[i][j] += v;
        }
        a
    }

    fn inf_norm(&self) -> f64 {
        let mut rows = vec![0.0; self.n];
        for &(i, _, v) in &self.entries {
            rows[i] += v.abs();
        }
        rows.into_iter().fold(0.0, f64::max)
    }
}

/// Partially pivoted LU of a band matrix (LAPACK `gbtrf` layout ideas, row
/// storage).
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    /// Row `i` holds columns `i - kl ..= i + kl + ku`.
    a: Vec<f64>,
    mult: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    /// Factorizes the `n x n` matrix given as (row, col, value) triplets.
    pub fn factor(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let (mut kl, mut ku) = (0usize, 0usize);
        for &(i, j, _) in entries {
            if i > j {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        let width = 2 * kl + ku + 1;
        let mut lu = BandLu {
            n,
            kl,
            ku,
            width,
            a: vec![0.0; n * width],
            mult: vec![0.0; n * kl.max(1)],
            piv: vec![0; n],
        };
        for &(i, j, v) in entries {
            let idx = lu.idx(i, j);
            lu.a[idx] += v;
        }
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn eliminate(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for i in 0..n {
            let last_row = (i + kl).min(n - 1);
            let last_col = (i + kl + ku).min(n - 1);
            let mut p = i;
            let mut best = self.a[self.idx(i, i)].abs();
            for r in i + 1..=last_row {
                let v = self.a[self.idx(r, i)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(FlowError::Singular { row: i });
            }
            self.piv[i] = p;
            if p != i {
                for j in i..=last_col {
                    let (x, y) = (self.idx(i, j), self.idx(p, j));
                    self.a.swap(x, y);
                }
            }
            let pivot = self.a[self.idx(i, i)];
            for r in i + 1..=last_row {
                let ri = self.idx(r, i);
                let m = self.a[ri] / pivot;
                self.mult[i * kl.max(1) + (r - i - 1)] = m;
                self.a[ri] = 0.0;
                if m != 0.0 {
                    for j in i + 1..=last_col {
                        let v = self.a[self.idx(i, j)];
                        let rj = self.idx(r, j);
                        self.a[rj] -= m * v;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for i in 0..n {
            let p = self.piv[i];
            if p != i {
                b.swap(i, p);
            }
            let bi = b[i];
            for r in i + 1..=(i + kl).min(n - 1) {
                b[r] -= self.mult[i * kl.max(1) + (r - i - 1)] * bi;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + kl + ku).min(n - 1) {
                s -= self.a[self.idx(i, j)] * b[j];
            }
            b[i] = s / self.a[self.idx(i, i)];
        }
    }

    /// Ratio of the largest to the smallest pivot magnitude.
    pub fn pivot_ratio(&self) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for i in 0..self.n {
            let v = self.a[self.idx(i, i)].abs();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hi / lo
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }
}

/// Backward error above which the solve is refined, and the level at which
/// it is rejected.
const REFINE_ABOVE: f64 = 1e-14;
const REJECT_ABOVE: f64 = 1e-10;

/// Direct solve of `system` with iterative refinement on the backward error
/// `|b - A x| / (|A| |x| + |b|)` (infinity norms).
pub fn linear_solve(system: &SparseSystem) -> Result<Vec<f64>> {
    let n = system.n;
    let identity: Vec<usize>;
    let order = if system.band_order.is_empty() {
        identity = (0..n).collect();
        &identity
    } else {
        &system.band_order
    };
    let mut pos = vec![0usize; n];
    for (p, &orig) in order.iter().enumerate() {
        pos[orig] = p;
    }
    let permuted: Vec<_> = system
        .entries
        .iter()
        .map(|&(i, j, v)| (pos[i], pos[j], v))
        .collect();
    let lu = BandLu::factor(n, &permuted)?;

    let solve = |rhs: &[f64]| -> Vec<f64> {
        let mut b: Vec<f64> = order.iter().map(|&o| rhs[o]).collect();
        lu.solve_in_place(&mut b);
        let mut x = vec![0.0; n];
        for (p, &o) in order.iter().enumerate() {
            x[o] = b[p];
        }
        x
    };

    let anorm = system.inf_norm();
    let bnorm = system.rhs.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let backward = |x: &[f64]| -> (Vec<f64>, f64) {
        let ax = system.apply(x);
        let r: Vec<f64> = system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let rn = r.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let xn = x.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let denom = anorm * xn + bnorm;
        (r, if denom > 0.0 { rn / denom } else { rn })
    };

    let mut x = solve(&system.rhs);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(FlowError::IllConditioned {
            backward_error: f64::INFINITY,
            condition_estimate: lu.pivot_ratio(),
        });
    }
    let (mut r, mut err) = backward(&x);
    for _ in 0..3 {
        if err <= REFINE_ABOVE {
            break;
        }
        let dx = solve(&r);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        (r, err) = backward(&x);
    }
    if !(err <= REJECT_ABOVE) {
        return Err(FlowError::IllConditioned {
            backward_error: err,
            condition_estimate: lu.pivot_ratio(),
        });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zigzag_neighbours_are_close() {
        for m in 3..40 {
            let order = zigzag_order(m);
            let mut sorted = order.clone();
            sorted.sort();
            assert_eq!(sorted, (0..m).collect::<Vec<_>>());
            let mut pos = vec![0; m];
            for (p, &k) in order.iter().enumerate() {
                pos[k] = p;
            }
            for k in 0..m {
                let d = pos[k].abs_diff(pos[(k + 1) % m]);
                assert!(d <= 2, "m={m} k={k} d={d}");
            }
        }
    }

    #[test]
    fn identity_solve() {
        let mut s = SparseSystem::new(5);
        for i in 0..5 {
            s.add(i, i, 1.0);
            s.rhs[i] = i as f64 - 2.5;
        }
        assert_eq!(linear_solve(&s).unwrap(), s.rhs);
    }

    #[test]
    fn pivoting_is_needed_and_done() {
        // [[0, 1], [1, 0]]
        let mut s = SparseSystem::new(2);
        s.add(0, 1, 1.0);
        s.add(1, 0, 1.0);
        s.rhs = vec![3.0, 4.0];
        assert_eq!(linear_solve(&s).unwrap(), vec![4.0, 3.0]);
    }

    #[test]
    fn singular_reported() {
        let mut s = SparseSystem::new(3);
        s.add(0, 0, 1.0);
        s.add(1, 1, 1.0);
        s.rhs = vec![1.0, 1.0, 1.0];
        assert!(matches!(
            linear_solve(&s),
            Err(FlowError::Singular { row: 2 })
        ));
    }

    #[test]
    fn compressed_merges_duplicates() {
        let mut s = SparseSystem::new(2);
        s.add(1, 0, 1.0);
        s.add(0, 0, 2.0);
        s.add(1, 0, 0.5);
        assert_eq!(s.compressed(), vec![(0, 0, 2.0), (1, 0, 1.5)]);
    }
}
