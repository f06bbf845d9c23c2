//! Product-form basis inverse: `B = E_1 E_2 … E_k` where each `E_t` is the
//! identity with one column replaced by an eta vector.

#[derive(Clone, Debug, Default)]
pub(crate) struct EtaFile {
    pos: Vec<u32>,
    pivot: Vec<f64>,
    start: Vec<usize>,
    idx: Vec<u32>,
    val: Vec<f64>,
}

/// Entries smaller than this fraction of the largest eta entry are dropped.
const DROP_TOL: f64 = 1e-14;

impl EtaFile {
    pub fn clear(&mut self) {
        self.pos.clear();
        self.pivot.clear();
        self.start.clear();
        self.idx.clear();
        self.val.clear();
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    /// Eta whose only entry is `pivot` at `pos`.
    pub fn push_diagonal(&mut self, pos: usize, pivot: f64) {
        self.pos.push(pos as u32);
        self.pivot.push(pivot);
        self.start.push(self.idx.len());
    }

    /// Eta from the dense transformed column `alpha` pivoting at `pos`.
    pub fn push_dense(&mut self, pos: usize, alpha: &[f64]) {
        let scale = alpha.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let cut = scale * DROP_TOL;
        self.pos.push(pos as u32);
        self.pivot.push(alpha[pos]);
        self.start.push(self.idx.len());
        for (i, &a) in alpha.iter().enumerate() {
            if i != pos && a.abs() > cut {
                self.idx.push(i as u32);
                self.val.push(a);
            }
        }
    }

    /// Overwrites `v` with `B⁻¹ v`.
    pub fn ftran(&self, v: &mut [f64]) {
        let k = self.pos.len();
        for t in 0..k {
            let p = self.pos[t] as usize;
            let vp = v[p];
            if vp == 0.0 {
                continue;
            }
            let vp = vp / self.pivot[t];
            v[p] = vp;
            let end = if t + 1 < k { self.start[t + 1] } else { self.idx.len() };
            for e in self.start[t]..end {
                v[self.idx[e] as usize] -= self.val[e] * vp;
            }
        }
    }

    /// Overwrites the row vector `y` with `y B⁻¹`.
    pub fn btran(&self, y: &mut [f64]) {
        let k = self.pos.len();
        for t in (0..k).rev() {
            let p = self.pos[t] as usize;
            let end = if t + 1 < k { self.start[t + 1] } else { self.idx.len() };
            let mut s = y[p];
            for e in self.start[t]..end {
                s -= self.val[e] * y[self.idx[e] as usize];
            }
            y[p] = s / self.pivot[t];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_vec(b: &[[f64; 3]; 3], x: &[f64]) -> Vec<f64> {
        (0..3).map(|i| (0..3).map(|j| b[i][j] * x[j]).sum()).collect()
    }

    #[test]
    fn ftran_and_btran_invert_a_pivoted_basis() {
        // Pivot the columns of B into the identity one at a time.
        let b = [[2.0, 1.0, 0.0], [0.0, 3.0, 1.0], [1.0, 0.0, 4.0]];
        let mut f = EtaFile::default();
        for col in 0..3 {
            let mut a: Vec<f64> = (0..3).map(|i| b[i][col]).collect();
            f.ftran(&mut a);
            f.push_dense(col, &a);
        }
        let rhs = [1.0, -2.0, 5.0];
        let mut x = rhs.to_vec();
        f.ftran(&mut x);
        let back = mat_vec(&b, &x);
        for i in 0..3 {
            assert!((back[i] - rhs[i]).abs() < 1e-12);
        }
        // y^T B = c^T
        let c = [3.0, 0.5, -1.0];
        let mut y = c.to_vec();
        f.btran(&mut y);
        for j in 0..3 {
            let s: f64 = (0..3).map(|i| y[i] * b[i][j]).sum();
            assert!((s - c[j]).abs() < 1e-12);
        }
    }
}
