use nalgebra::DVector;

/// Christoffel symbols of the second kind, `Γ^i_{jk}`, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.idx(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.idx(i, j, k);
        self.data[idx] = v;
    }

    /// `Γ^i_{jk} u^j w^k`.
    pub fn contract(&self, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |i, _| {
            let mut s = 0.0;
            for j in 0..n {
                let uj = u[j];
                if uj == 0.0 {
                    continue;
                }
                for k in 0..n {
                    s += self.get(i, j, k) * uj * w[k];
                }
            }
            s
        })
    }

    /// Enforce `Γ^i_{jk} = Γ^i_{kj}` exactly.
    pub fn symmetrize(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                for k in (j + 1)..n {
                    let avg = 0.5 * (self.get(i, j, k) + self.get(i, k, j));
                    self.set(i, j, k, avg);
                    self.set(i, k, j, avg);
                }
            }
        }
    }

    pub(crate) fn axpy(&mut self, a: f64, other: &Christoffel) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
