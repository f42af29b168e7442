/// Square sparse matrix in compressed row storage, columns sorted per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from a generator of (row, col, value) contributions that is run
    /// twice: once to size the rows, once to fill them. Duplicates are summed
    /// in generation order, so the result is deterministic.
    pub fn from_generator(n: usize, generate: impl Fn(&mut dyn FnMut(usize, usize, f64))) -> Self {
        let mut counts = vec![0usize; n + 1];
        generate(&mut |r, _, _| counts[r + 1] += 1);
        for i in 1..=n {
            counts[i] += counts[i - 1];
        }
        let total = counts[n];
        let mut fill = counts.clone();
        let mut cols = vec![0usize; total];
        let mut vals = vec![0.0; total];
        generate(&mut |r, c, v| {
            let k = fill[r];
            cols[k] = c;
            vals[k] = v;
            fill[r] += 1;
        });

        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::with_capacity(total / 2);
        let mut val = Vec::with_capacity(total / 2);
        row_ptr.push(0);
        let mut perm: Vec<usize> = Vec::new();
        for r in 0..n {
            let (a, b) = (counts[r], counts[r + 1]);
            perm.clear();
            perm.extend(a..b);
            perm.sort_by_key(|&k| cols[k]);
            let mut last = usize::MAX;
            for &k in &perm {
                if cols[k] == last {
                    *val.last_mut().unwrap() += vals[k];
                } else {
                    col.push(cols[k]);
                    val.push(vals[k]);
                    last = cols[k];
                }
            }
            row_ptr.push(col.len());
        }
        CsrMatrix { n, row_ptr, col, val }
    }

    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        Self::from_generator(n, |emit| {
            for &(r, c, v) in triplets {
                emit(r, c, v);
            }
        })
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix { n, row_ptr: (0..=n).collect(), col: (0..n).collect(), val: vec![1.0; n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col
    }

    pub fn values(&self) -> &[f64] {
        &self.val
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col[a..b].iter().copied().zip(self.val[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col[a..b].binary_search(&j) {
            Ok(k) => self.val[a + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            y[i] = s;
        }
    }

    /// max |a_ij - a_ji| / max |a_ij|.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.val.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// Row-sorted (row, col, value) list.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n).flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v))).collect()
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let y = self.matvec(x);
        y.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}
