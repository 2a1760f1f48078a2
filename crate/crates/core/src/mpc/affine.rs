use crate::linalg::{DenseMatrix, DenseVector};

/// Matrix-valued affine function of the decision vector `X` and the input
/// `x_o`. Entries are stored column-major; entry `k` equals
/// `lin[k]·X + inp[k]·x_o + cst[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub rows: usize,
    pub cols: usize,
    pub lin: DenseMatrix,
    pub inp: DenseMatrix,
    pub cst: Vec<f64>,
}

impl Affine {
    pub fn constant(m: &DenseMatrix, n_x: usize, n_o: usize) -> Self {
        let (rows, cols) = m.shape();
        let cst = (0..rows * cols).map(|k| m.get(k % rows, k / rows)).collect();
        Self { rows, cols, lin: DenseMatrix::zeros(rows * cols, n_x), inp: DenseMatrix::zeros(rows * cols, n_o), cst }
    }

    pub fn scalar(x: f64, n_x: usize, n_o: usize) -> Self {
        Self { rows: 1, cols: 1, lin: DenseMatrix::zeros(1, n_x), inp: DenseMatrix::zeros(1, n_o), cst: vec![x] }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }

    pub fn n_x(&self) -> usize {
        self.lin.cols()
    }

    pub fn n_o(&self) -> usize {
        self.inp.cols()
    }

    pub fn is_constant(&self) -> bool {
        self.lin.max_abs() == 0.0 && self.inp.max_abs() == 0.0
    }

    pub fn to_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows, self.cols, |i, j| self.cst[i + j * self.rows])
    }

    /// Entries `idx` (column-major positions) as a `rows × cols` block.
    pub fn pick(&self, idx: &[usize], rows: usize, cols: usize) -> Self {
        debug_assert_eq!(idx.len(), rows * cols);
        Self {
            rows,
            cols,
            lin: self.lin.select_rows(idx),
            inp: self.inp.select_rows(idx),
            cst: idx.iter().map(|&k| self.cst[k]).collect(),
        }
    }

    /// Same entries reshaped to a column vector.
    pub fn flatten(mut self) -> Self {
        self.rows *= self.cols;
        self.cols = 1;
        self
    }

    pub fn broadcast(&self, rows: usize, cols: usize) -> Self {
        if self.shape() == (rows, cols) {
            return self.clone();
        }
        debug_assert!(self.is_scalar());
        self.pick(&vec![0; rows * cols], rows, cols)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            lin: self.lin.scaled(s),
            inp: self.inp.scaled(s),
            cst: self.cst.iter().map(|x| x * s).collect(),
        }
    }

    /// Entrywise sum; shapes must agree.
    pub fn add(&self, other: &Self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            lin: self.lin.add(&other.lin),
            inp: self.inp.add(&other.inp),
            cst: self.cst.iter().zip(&other.cst).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-1.0))
    }

    /// `C · self` for a constant matrix `C`.
    pub fn left_mul(&self, c: &DenseMatrix) -> Self {
        let (r, m) = c.shape();
        debug_assert_eq!(m, self.rows);
        let cols = self.cols;
        let mut lin = DenseMatrix::zeros(r * cols, self.n_x());
        let mut inp = DenseMatrix::zeros(r * cols, self.n_o());
        let mut cst = vec![0.0; r * cols];
        for j in 0..cols {
            for i in 0..r {
                let out = i + j * r;
                for l in 0..m {
                    let w = c.get(i, l);
                    if w == 0.0 {
                        continue;
                    }
                    let src = l + j * self.rows;
                    accumulate(&mut lin, out, &self.lin, src, w);
                    accumulate(&mut inp, out, &self.inp, src, w);
                    cst[out] += w * self.cst[src];
                }
            }
        }
        Self { rows: r, cols, lin, inp, cst }
    }

    /// `self · C` for a constant matrix `C`.
    pub fn right_mul(&self, c: &DenseMatrix) -> Self {
        let (m, q) = c.shape();
        debug_assert_eq!(m, self.cols);
        let r = self.rows;
        let mut lin = DenseMatrix::zeros(r * q, self.n_x());
        let mut inp = DenseMatrix::zeros(r * q, self.n_o());
        let mut cst = vec![0.0; r * q];
        for j in 0..q {
            for i in 0..r {
                let out = i + j * r;
                for l in 0..m {
                    let w = c.get(l, j);
                    if w == 0.0 {
                        continue;
                    }
                    let src = i + l * r;
                    accumulate(&mut lin, out, &self.lin, src, w);
                    accumulate(&mut inp, out, &self.inp, src, w);
                    cst[out] += w * self.cst[src];
                }
            }
        }
        Self { rows: r, cols: q, lin, inp, cst }
    }

    /// Horizontal concatenation; row counts must agree.
    pub fn hcat(blocks: &[Affine]) -> Self {
        let rows = blocks[0].rows;
        let mut lin = DenseMatrix::zeros(0, blocks[0].n_x());
        let mut inp = DenseMatrix::zeros(0, blocks[0].n_o());
        let mut cst = Vec::new();
        let mut cols = 0;
        for b in blocks {
            lin = lin.vstack(&b.lin);
            inp = inp.vstack(&b.inp);
            cst.extend_from_slice(&b.cst);
            cols += b.cols;
        }
        Self { rows, cols, lin, inp, cst }
    }

    /// Vertical concatenation; column counts must agree.
    pub fn vcat(blocks: &[Affine]) -> Self {
        let cols = blocks[0].cols;
        let rows: usize = blocks.iter().map(|b| b.rows).sum();
        let mut order = Vec::with_capacity(rows * cols);
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut acc = 0;
        for b in blocks {
            offsets.push(acc);
            acc += b.len();
        }
        let all = Affine {
            rows: acc,
            cols: 1,
            lin: blocks.iter().skip(1).fold(blocks[0].lin.clone(), |m, b| m.vstack(&b.lin)),
            inp: blocks.iter().skip(1).fold(blocks[0].inp.clone(), |m, b| m.vstack(&b.inp)),
            cst: blocks.iter().flat_map(|b| b.cst.iter().copied()).collect(),
        };
        for j in 0..cols {
            for (b, off) in blocks.iter().zip(&offsets) {
                for i in 0..b.rows {
                    order.push(off + i + j * b.rows);
                }
            }
        }
        all.pick(&order, rows, cols)
    }

    /// Value at `(X, x_o)`.
    pub fn eval(&self, x: &DenseVector, x_o: &DenseVector) -> DenseVector {
        let mut v = self.lin.mul_vec(x).add(&DenseVector::from_raw(self.cst.clone()));
        if self.n_o() > 0 {
            v = v.add(&self.inp.mul_vec(x_o));
        }
        v
    }
}

fn accumulate(dst: &mut DenseMatrix, out: usize, src: &DenseMatrix, row: usize, w: f64) {
    for k in 0..src.cols() {
        let v = src.get(row, k);
        if v != 0.0 {
            dst.set(out, k, dst.get(out, k) + w * v);
        }
    }
}
