//! Reflection symmetry `v_a → -v_a` of the cell-centred velocity grid.
//!
//! With `n` even no node lies on a mirror plane, so every orbit of a group of
//! `g` reflections has exactly `g` nodes. Operators commuting with the group
//! split into parity sectors of size `n³/g`.

use ndarray::Array2;

use crate::grid::VelocityGrid;

/// Apply the reflections in the axes set in `eps` (bit `a` ↔ axis `a`).
#[inline]
pub fn flip(grid: &VelocityGrid, idx: usize, eps: u8) -> usize {
    let [mut i, mut j, mut k] = grid.unindex(idx);
    let m = grid.n - 1;
    if eps & 1 != 0 {
        i = m - i;
    }
    if eps & 2 != 0 {
        j = m - j;
    }
    if eps & 4 != 0 {
        k = m - k;
    }
    grid.index(i, j, k)
}

/// Representatives of the orbits under all reflections in `mask`: nodes with
/// coordinate index below `n/2` on every masked axis.
pub fn orbit_reps(grid: &VelocityGrid, mask: u8) -> Vec<usize> {
    let h = grid.n / 2;
    (0..grid.len())
        .filter(|&idx| {
            let c = grid.unindex(idx);
            (0..3).all(|a| mask & (1 << a) == 0 || c[a] < h)
        })
        .collect()
}

/// Decompose `idx = δ(rep)` with `δ ⊆ mask`.
#[inline]
pub fn split(grid: &VelocityGrid, idx: usize, mask: u8) -> (usize, u8) {
    let h = grid.n / 2;
    let c = grid.unindex(idx);
    let mut eps = 0u8;
    for a in 0..3 {
        if mask & (1 << a) != 0 && c[a] >= h {
            eps |= 1 << a;
        }
    }
    (flip(grid, idx, eps), eps)
}

/// One parity sector of the reflection group over `mask`.
#[derive(Debug, Clone)]
pub struct Sector {
    pub mask: u8,
    /// Bit `a` set: odd under reflection in axis `a`.
    pub parity: u8,
    pub reps: Vec<usize>,
    /// For each node: (sector row, character).
    slot: Vec<(usize, f64)>,
    norm: f64,
}

impl Sector {
    pub fn new(grid: &VelocityGrid, mask: u8, parity: u8) -> Self {
        assert_eq!(parity & !mask, 0, "parity outside the group");
        let reps = orbit_reps(grid, mask);
        let mut row_of = vec![usize::MAX; grid.len()];
        for (r, &k) in reps.iter().enumerate() {
            row_of[k] = r;
        }
        let slot = (0..grid.len())
            .map(|p| {
                let (rep, eps) = split(grid, p, mask);
                (row_of[rep], character(parity, eps))
            })
            .collect();
        let g = 1usize << mask.count_ones();
        Self { mask, parity, reps, slot, norm: (g as f64).sqrt() }
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    /// Coordinates of `f` in the orthonormal sector basis.
    pub fn restrict(&self, f: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.len()];
        for (p, &(r, chi)) in self.slot.iter().enumerate() {
            x[r] += chi * f[p];
        }
        x.iter_mut().for_each(|a| *a /= self.norm);
        x
    }

    /// Full field from sector coordinates.
    pub fn extend(&self, x: &[f64]) -> Vec<f64> {
        self.slot.iter().map(|&(r, chi)| chi * x[r] / self.norm).collect()
    }

    /// Sector block of an equivariant operator given its full columns:
    /// `M_s[r, q] = Σ_δ χ(δ) (M e_{k_q})[δ k_r]`.
    pub fn matrix_from_columns(&self, mut column: impl FnMut(usize) -> Vec<f64>) -> Array2<f64> {
        let n = self.len();
        let mut out = Array2::<f64>::zeros((n, n));
        for (q, &k) in self.reps.iter().enumerate() {
            let col = column(k);
            for (p, &(r, chi)) in self.slot.iter().enumerate() {
                out[[r, q]] += chi * col[p];
            }
        }
        out
    }
}

#[inline]
pub fn character(parity: u8, eps: u8) -> f64 {
    if (parity & eps).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Columns `M e_k` of an operator commuting with all eight reflections,
/// stored for one representative per orbit.
#[derive(Debug, Clone)]
pub struct OrbitColumns {
    grid: VelocityGrid,
    rep_row: Vec<usize>,
    /// `cols[[r, p]] = (M e_{rep_r})[p]`.
    cols: Array2<f64>,
}

impl OrbitColumns {
    pub fn new(grid: &VelocityGrid, mut column: impl FnMut(usize) -> Vec<f64>) -> Self {
        let reps = orbit_reps(grid, 7);
        let mut rep_row = vec![usize::MAX; grid.len()];
        let mut cols = Array2::<f64>::zeros((reps.len(), grid.len()));
        for (r, &k) in reps.iter().enumerate() {
            rep_row[k] = r;
            let c = column(k);
            cols.row_mut(r).assign(&ndarray::ArrayView1::from(&c[..]));
        }
        Self { grid: grid.clone(), rep_row, cols }
    }

    /// `M e_k` for any node, by equivariance `M ε = ε M`.
    pub fn column(&self, k: usize) -> Vec<f64> {
        let (rep, eps) = split(&self.grid, k, 7);
        let row = self.cols.row(self.rep_row[rep]);
        (0..self.grid.len()).map(|p| row[flip(&self.grid, p, eps)]).collect()
    }

    pub fn full(&self) -> Array2<f64> {
        let n = self.grid.len();
        let mut out = Array2::<f64>::zeros((n, n));
        for k in 0..n {
            let c = self.column(k);
            for (p, v) in c.into_iter().enumerate() {
                out[[p, k]] = v;
            }
        }
        out
    }

    pub fn sector(&self, sector: &Sector) -> Array2<f64> {
        let mut m = sector.matrix_from_columns(|k| self.column(k));
        symmetrize(&mut m);
        m
    }
}

pub fn symmetrize(m: &mut Array2<f64>) {
    let t = m.t().to_owned();
    *m += &t;
    *m *= 0.5;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sector_basis_is_orthonormal_and_complete() {
        let g = VelocityGrid::new(4, 1.0).unwrap();
        let mut total = 0;
        for parity in 0..8u8 {
            let s = Sector::new(&g, 7, parity);
            total += s.len();
            let x: Vec<f64> = (0..s.len()).map(|i| i as f64 - 1.5).collect();
            let f = s.extend(&x);
            let back = s.restrict(&f);
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() < 1e-14);
            }
            let nf: f64 = f.iter().map(|a| a * a).sum();
            let nx: f64 = x.iter().map(|a| a * a).sum();
            assert!((nf - nx).abs() < 1e-12);
        }
        assert_eq!(total, g.len());
    }

    #[test]
    fn sector_matrix_matches_projection_of_full_matrix() {
        let g = VelocityGrid::new(4, 1.0).unwrap();
        let n = g.len();
        // An equivariant operator: a function of |v_i - v_j|-type couplings.
        let full = Array2::from_shape_fn((n, n), |(p, q)| {
            let a = g.coord(p);
            let b = g.coord(q);
            let d = (a[0] - b[0]).powi(2) + 2.0 * (a[1] - b[1]).powi(2) + 3.0 * (a[2] - b[2]).powi(2);
            (-d).exp() + a[0] * a[0] * b[1] * b[1] + b[0] * b[0] * a[1] * a[1]
        });
        let oc = OrbitColumns::new(&g, |k| full.column(k).to_vec());
        assert_eq!(oc.full(), full);
        for mask in [7u8, 6u8] {
            for parity in 0..8u8 {
                if parity & !mask != 0 {
                    continue;
                }
                let s = Sector::new(&g, mask, parity);
                let ms = oc.sector(&s);
                for q in 0..s.len() {
                    let mut e = vec![0.0; s.len()];
                    e[q] = 1.0;
                    let u = s.extend(&e);
                    let mu = full.dot(&ndarray::Array1::from(u));
                    let back = s.restrict(mu.as_slice().unwrap());
                    for r in 0..s.len() {
                        assert!((ms[[r, q]] - back[r]).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
