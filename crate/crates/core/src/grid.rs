//! Uniform node raster on the belief triangle `{(s, a) : s, a >= 0, s + a <= 1}`
//! and the upwind jump stencil shared by the value and density solvers.

use crate::model::ModelParams;

/// Nodes `(i h, j h)` with `i + j <= n`, stored row by row in `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriGrid {
    n: usize,
}

impl TriGrid {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "grid resolution must be at least 2");
        Self { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn len(&self) -> usize {
        (self.n + 1) * (self.n + 2) / 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn offset(&self, i: usize) -> usize {
        i * (self.n + 1) - i * i.saturating_sub(1) / 2
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + j <= self.n);
        self.offset(i) + j
    }

    /// Inverse of [`TriGrid::index`].
    pub fn ij(&self, k: usize) -> (usize, usize) {
        let mut i = 0;
        while i < self.n && self.offset(i + 1) <= k {
            i += 1;
        }
        (i, k - self.offset(i))
    }

    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        let h = self.h();
        (i as f64 * h, j as f64 * h)
    }

    /// All `(k, i, j)` in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let n = self.n;
        (0..=n).flat_map(move |i| (0..=n - i).map(move |j| (i, j))).enumerate().map(|(k, (i, j))| (k, i, j))
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + j == self.n
    }

    /// Interior in the strict sense: off all three edges.
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        !self.is_boundary(i, j)
    }

    /// Nodes with `a <= r`, i.e. `2 j <= n - i`.
    pub fn in_lower_half(&self, i: usize, j: usize) -> bool {
        2 * j <= self.n - i
    }

    /// Mirror node `(i, n - i - j)` swapping `a` and `r`.
    pub fn mirror(&self, i: usize, j: usize) -> (usize, usize) {
        (i, self.n - i - j)
    }

    /// Lumped piecewise-linear quadrature weights. Each grid square is split by
    /// its anti-diagonal; every node receives `h^2 / 6` per adjacent triangle.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.n;
        let mut w = vec![0.0; self.len()];
        let third = self.h() * self.h() / 6.0;
        for i in 0..n {
            for j in 0..n - i {
                for (p, q) in [(i, j), (i + 1, j), (i, j + 1)] {
                    w[self.index(p, q)] += third;
                }
                if i + j + 2 <= n {
                    for (p, q) in [(i + 1, j), (i, j + 1), (i + 1, j + 1)] {
                        w[self.index(p, q)] += third;
                    }
                }
            }
        }
        w
    }

    /// 4-neighbours inside the triangle.
    pub fn neighbours(&self, i: usize, j: usize) -> impl Iterator<Item = (usize, usize)> {
        let n = self.n;
        let mut out = [(usize::MAX, usize::MAX); 4];
        let mut m = 0;
        if i > 0 {
            out[m] = (i - 1, j);
            m += 1;
        }
        if j > 0 {
            out[m] = (i, j - 1);
            m += 1;
        }
        if i + j < n {
            out[m] = (i + 1, j);
            m += 1;
            out[m] = (i, j + 1);
            m += 1;
        }
        out.into_iter().take(m)
    }
}

/// Belief drift with the control switched off:
/// `f_s = (a lambda_ai - eta) s`, `f_a = eta s + a (a lambda_ai - lambda_ai - lambda_ar)`.
/// Activity adds `lambda_sa beta u s` along `(-1, +1)`.
pub fn drift0(s: f64, a: f64, params: &ModelParams) -> (f64, f64) {
    (
        (a * params.lambda_ai - params.eta) * s,
        params.eta * s + a * (a * params.lambda_ai - params.lambda_ai - params.lambda_ar),
    )
}

/// Jump targets and rates approximating the drift `drift0` at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub targets: [usize; 3],
    pub rates: [f64; 3],
    pub len: usize,
}

impl Stencil {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.targets.iter().copied().zip(self.rates.iter().copied()).take(self.len)
    }

    pub fn total_rate(&self) -> f64 {
        self.rates[..self.len].iter().sum()
    }

    fn push(&mut self, target: usize, rate: f64) {
        if rate > 0.0 {
            self.targets[self.len] = target;
            self.rates[self.len] = rate;
            self.len += 1;
        }
    }
}

/// Upwind stencil of the uncontrolled drift at node `(i, j)`.
///
/// Away from the hypotenuse each component jumps to the axis neighbour in its
/// own direction. On the hypotenuse an outward component is redirected along
/// the edge, and the remainder `f_s + f_a = -a lambda_ar <= 0` points inward.
/// Both choices reproduce linear functions exactly.
pub fn drift_stencil(grid: &TriGrid, i: usize, j: usize, params: &ModelParams) -> Stencil {
    let n = grid.n();
    let h = grid.h();
    let (s, a) = grid.coords(i, j);
    let (fs, fa) = drift0(s, a, params);
    let mut st = Stencil { targets: [0; 3], rates: [0.0; 3], len: 0 };
    let on_edge = i + j == n;
    if on_edge && fs > 0.0 && j > 0 {
        st.push(grid.index(i + 1, j - 1), fs / h);
        st.push(grid.index(i, j - 1), -(fs + fa) / h);
    } else if on_edge && fa > 0.0 && i > 0 {
        st.push(grid.index(i - 1, j + 1), fa / h);
        st.push(grid.index(i - 1, j), -(fs + fa) / h);
    } else {
        if fs > 0.0 && i + j < n {
            st.push(grid.index(i + 1, j), fs / h);
        } else if fs < 0.0 && i > 0 {
            st.push(grid.index(i - 1, j), -fs / h);
        }
        if fa > 0.0 && i + j < n {
            st.push(grid.index(i, j + 1), fa / h);
        } else if fa < 0.0 && j > 0 {
            st.push(grid.index(i, j - 1), -fa / h);
        }
    }
    st
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn index_round_trip() {
        let g = TriGrid::new(7);
        assert_eq!(g.len(), 36);
        for (k, i, j) in g.nodes() {
            assert_eq!(g.index(i, j), k);
            assert_eq!(g.ij(k), (i, j));
        }
    }

    #[test]
    fn weights_integrate_linear_functions() {
        for n in [4, 9, 32] {
            let g = TriGrid::new(n);
            let w = g.weights();
            let area: f64 = w.iter().sum();
            assert!((area - 0.5).abs() < 1e-14);
            let int_a: f64 = g.nodes().map(|(k, i, j)| w[k] * g.coords(i, j).1).sum();
            assert!((int_a - 1.0 / 6.0).abs() < 1e-14);
            let int_s: f64 = g.nodes().map(|(k, i, j)| w[k] * g.coords(i, j).0).sum();
            assert!((int_s - 1.0 / 6.0).abs() < 1e-14);
        }
    }

    #[test]
    fn mirror_is_involution() {
        let g = TriGrid::new(10);
        for (_, i, j) in g.nodes() {
            let (p, q) = g.mirror(i, j);
            assert_eq!(g.mirror(p, q), (i, j));
            assert!(g.in_lower_half(i, j) || g.in_lower_half(p, q));
        }
    }

    proptest! {
        #[test]
        fn stencil_reproduces_linear_drift(n in 4usize..40, lai in 0.0..2.0f64, lar in 0.0..2.0f64,
                                           eta in 0.0..0.5f64, cs in -3.0..3.0f64, ca in -3.0..3.0f64) {
            let g = TriGrid::new(n);
            let p = ModelParams { lambda_ai: lai, lambda_ar: lar, eta, ..ModelParams::default() };
            let phi: Vec<f64> = g.nodes().map(|(_, i, j)| { let (s, a) = g.coords(i, j); cs * s + ca * a }).collect();
            for (k, i, j) in g.nodes() {
                let (s, a) = g.coords(i, j);
                let (fs, fa) = drift0(s, a, &p);
                let st = drift_stencil(&g, i, j, &p);
                let approx: f64 = st.iter().map(|(t, r)| r * (phi[t] - phi[k])).sum();
                prop_assert!((approx - (fs * cs + fa * ca)).abs() < 1e-9 * (1.0 + cs.abs() + ca.abs()),
                    "node ({i},{j}): {approx} vs {}", fs * cs + fa * ca);
                prop_assert!(st.iter().all(|(_, r)| r > 0.0));
            }
        }
    }
}
