//! Dense linear algebra over `F_{p^m}` and sigma-semilinear maps.

use std::fmt;

use super::field::{Fe, Field};
use super::AlgError;

#[derive(Clone, PartialEq, Eq)]
pub struct Mat {
    f: Field,
    rows: usize,
    cols: usize,
    d: Vec<Fe>,
}

impl Mat {
    pub fn zeros(f: Field, rows: usize, cols: usize) -> Mat {
        Mat {
            f,
            rows,
            cols,
            d: vec![f.zero(); rows * cols],
        }
    }

    pub fn identity(f: Field, n: usize) -> Mat {
        let mut m = Mat::zeros(f, n, n);
        for i in 0..n {
            m.set(i, i, f.one());
        }
        m
    }

    pub fn from_rows(f: Field, rows: &[Vec<Fe>], cols: usize) -> Mat {
        let mut m = Mat::zeros(f, rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols, "ragged matrix rows");
            for (j, &x) in r.iter().enumerate() {
                m.set(i, j, x);
            }
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_cols(f: Field, cols: &[Vec<Fe>], rows: usize) -> Mat {
        let mut m = Mat::zeros(f, rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), rows, "ragged matrix columns");
            for (i, &x) in c.iter().enumerate() {
                m.set(i, j, x);
            }
        }
        m
    }

    pub fn field(&self) -> Field {
        self.f
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Fe {
        self.d[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: Fe) {
        self.d[i * self.cols + j] = x;
    }

    pub fn row(&self, i: usize) -> Vec<Fe> {
        self.d[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn col(&self, j: usize) -> Vec<Fe> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.d.iter().all(|x| x.is_zero())
    }

    pub fn mul(&self, o: &Mat) -> Result<Mat, AlgError> {
        if self.cols != o.rows {
            return Err(AlgError::DimensionMismatch {
                expected: self.cols,
                got: o.rows,
            });
        }
        let mut m = Mat::zeros(self.f, self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let cur = m.get(i, j);
                    m.set(i, j, cur + a * o.get(k, j));
                }
            }
        }
        Ok(m)
    }

    pub fn apply(&self, v: &[Fe]) -> Result<Vec<Fe>, AlgError> {
        if v.len() != self.cols {
            return Err(AlgError::DimensionMismatch {
                expected: self.cols,
                got: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| (0..self.cols).fold(self.f.zero(), |acc, j| acc + self.get(i, j) * v[j]))
            .collect())
    }

    pub fn map_frob(&self, e: u32) -> Mat {
        Mat {
            f: self.f,
            rows: self.rows,
            cols: self.cols,
            d: self.d.iter().map(|x| x.frob(e)).collect(),
        }
    }

    /// Stacks `self` on top of `o`.
    pub fn vstack(&self, o: &Mat) -> Result<Mat, AlgError> {
        if self.cols != o.cols {
            return Err(AlgError::DimensionMismatch {
                expected: self.cols,
                got: o.cols,
            });
        }
        let mut d = self.d.clone();
        d.extend_from_slice(&o.d);
        Ok(Mat {
            f: self.f,
            rows: self.rows + o.rows,
            cols: self.cols,
            d,
        })
    }

    /// Reduced row echelon form in place; returns pivot columns.
    pub fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(pr) = (r..self.rows).find(|&i| !self.get(i, c).is_zero()) else {
                continue;
            };
            if pr != r {
                for j in 0..self.cols {
                    self.d.swap(pr * self.cols + j, r * self.cols + j);
                }
            }
            let inv = self.get(r, c).inv().expect("pivot nonzero");
            for j in c..self.cols {
                let x = self.get(r, j) * inv;
                self.set(r, j, x);
            }
            for i in 0..self.rows {
                if i == r {
                    continue;
                }
                let factor = self.get(i, c);
                if factor.is_zero() {
                    continue;
                }
                for j in c..self.cols {
                    let x = self.get(i, j) - factor * self.get(r, j);
                    self.set(i, j, x);
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.clone().rref().len()
    }

    /// Kernel basis read off the reduced echelon form: one vector per free
    /// column, with a 1 in that column.
    pub fn nullspace(&self) -> Vec<Vec<Fe>> {
        let mut m = self.clone();
        let pivots = m.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&fc| {
                let mut v = vec![self.f.zero(); self.cols];
                v[fc] = self.f.one();
                for (r, &pc) in pivots.iter().enumerate() {
                    v[pc] = -m.get(r, fc);
                }
                v
            })
            .collect()
    }

    /// Basis of the column space in reduced echelon form.
    pub fn column_space(&self) -> Vec<Vec<Fe>> {
        row_space(&self.transpose())
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.f, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Solves `self x = b`: a particular solution and a kernel basis.
    pub fn solve(&self, b: &[Fe]) -> Result<Option<(Vec<Fe>, Vec<Vec<Fe>>)>, AlgError> {
        if b.len() != self.rows {
            return Err(AlgError::DimensionMismatch {
                expected: self.rows,
                got: b.len(),
            });
        }
        let mut aug = Mat::zeros(self.f, self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                aug.set(i, j, self.get(i, j));
            }
            aug.set(i, self.cols, b[i]);
        }
        let pivots = aug.rref();
        if pivots.last() == Some(&self.cols) {
            return Ok(None);
        }
        let mut x = vec![self.f.zero(); self.cols];
        for (r, &pc) in pivots.iter().enumerate() {
            x[pc] = aug.get(r, self.cols);
        }
        Ok(Some((x, self.nullspace())))
    }
}

/// Reduced echelon basis of the span of `vecs`.
pub fn row_space(m: &Mat) -> Vec<Vec<Fe>> {
    let mut m = m.clone();
    let k = m.rref().len();
    (0..k).map(|i| m.row(i)).collect()
}

/// Reduced echelon basis of the span of vectors of length `n`.
pub fn span_basis(f: Field, vecs: &[Vec<Fe>], n: usize) -> Vec<Vec<Fe>> {
    if vecs.is_empty() {
        return Vec::new();
    }
    row_space(&Mat::from_rows(f, vecs, n))
}

/// Whether `v` lies in the span of `basis`.
pub fn in_span(f: Field, basis: &[Vec<Fe>], v: &[Fe]) -> bool {
    let n = v.len();
    let r0 = span_basis(f, basis, n).len();
    let mut all = basis.to_vec();
    all.push(v.to_vec());
    span_basis(f, &all, n).len() == r0
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            writeln!(f, "{:?}", self.row(i))?;
        }
        Ok(())
    }
}

/// An additive map `F_q^n -> F_q^k` with `f(c v) = sigma^e(c) f(v)`, acting as
/// `v -> A sigma^e(v)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemilinearMap {
    pub matrix: Mat,
    pub twist: u32,
}

/// Rank, kernel and image of a semilinear map. Dimensions are over `F_q`;
/// kernel and image are sigma-stable so their `F_p`-dimensions are `m` times
/// these.
#[derive(Clone, Debug)]
pub struct LinearSummary {
    pub rank: usize,
    pub kernel: Vec<Vec<Fe>>,
    pub image: Vec<Vec<Fe>>,
}

/// Affine solution set `particular + span(kernel)`.
#[derive(Clone, Debug)]
pub struct AffineSolution {
    pub particular: Vec<Fe>,
    pub kernel: Vec<Vec<Fe>>,
}

impl SemilinearMap {
    pub fn linear(matrix: Mat) -> SemilinearMap {
        SemilinearMap { matrix, twist: 0 }
    }

    pub fn new(matrix: Mat, twist: u32) -> SemilinearMap {
        SemilinearMap { matrix, twist }
    }

    pub fn field(&self) -> Field {
        self.matrix.field()
    }

    pub fn apply(&self, v: &[Fe]) -> Result<Vec<Fe>, AlgError> {
        let tv: Vec<Fe> = v.iter().map(|x| x.frob(self.twist)).collect();
        self.matrix.apply(&tv)
    }

    /// `self o other`: twists add.
    pub fn compose(&self, other: &SemilinearMap) -> Result<SemilinearMap, AlgError> {
        let m = self.matrix.mul(&other.matrix.map_frob(self.twist))?;
        Ok(SemilinearMap {
            matrix: m,
            twist: (self.twist + other.twist) % self.field().m(),
        })
    }

    /// The `F_p`-linear matrix of the map in the power bases, of size
    /// `(k m) x (n m)`. Entries live in the prime field.
    pub fn restrict_scalars(&self) -> Mat {
        let f = self.field();
        let m = f.m() as usize;
        let (k, n) = (self.matrix.rows(), self.matrix.cols());
        let mut out = Mat::zeros(f, k * m, n * m);
        let basis: Vec<Fe> = (0..m)
            .map(|i| {
                let mut d = vec![0u32; m];
                d[i] = 1;
                f.from_digits(&d).expect("basis digit")
            })
            .collect();
        for j in 0..n {
            for (bi, b) in basis.iter().enumerate() {
                let tb = b.frob(self.twist);
                for i in 0..k {
                    let img = self.matrix.get(i, j) * tb;
                    for (di, dv) in img.digits().into_iter().enumerate() {
                        out.set(i * m + di, j * m + bi, f.int(dv as i64));
                    }
                }
            }
        }
        out
    }

    fn to_prime_coords(f: Field, v: &[Fe]) -> Vec<Fe> {
        v.iter()
            .flat_map(|x| x.digits().into_iter().map(|d| f.int(d as i64)))
            .collect()
    }

    fn from_prime_coords(f: Field, c: &[Fe]) -> Vec<Fe> {
        let m = f.m() as usize;
        c.chunks(m)
            .map(|ch| {
                let d: Vec<u32> = ch
                    .iter()
                    .map(|x| x.prime_value().expect("prime coordinate"))
                    .collect();
                f.from_digits(&d).expect("digits in range")
            })
            .collect()
    }

    pub fn rank_kernel_image(&self) -> LinearSummary {
        let f = self.field();
        let n = self.matrix.cols();
        let k = self.matrix.rows();
        if self.twist == 0 {
            return LinearSummary {
                rank: self.matrix.rank(),
                kernel: self.matrix.nullspace(),
                image: self.matrix.column_space(),
            };
        }
        let r = self.restrict_scalars();
        let kern: Vec<Vec<Fe>> = r
            .nullspace()
            .iter()
            .map(|c| Self::from_prime_coords(f, c))
            .collect();
        let img: Vec<Vec<Fe>> = r
            .column_space()
            .iter()
            .map(|c| Self::from_prime_coords(f, c))
            .collect();
        let m = f.m() as usize;
        let rank_p = r.rank();
        debug_assert_eq!(rank_p % m, 0, "image of a semilinear map is F_q-stable");
        LinearSummary {
            rank: rank_p / m,
            kernel: span_basis(f, &kern, n),
            image: span_basis(f, &img, k),
        }
    }
}

/// All solutions of `map(x) = target`, or `None` when inconsistent.
pub fn solve_linear(
    map: &SemilinearMap,
    target: &[Fe],
) -> Result<Option<AffineSolution>, AlgError> {
    let f = map.field();
    if target.len() != map.matrix.rows() {
        return Err(AlgError::DimensionMismatch {
            expected: map.matrix.rows(),
            got: target.len(),
        });
    }
    if map.twist == 0 {
        return Ok(map
            .matrix
            .solve(target)?
            .map(|(particular, kernel)| AffineSolution { particular, kernel }));
    }
    let r = map.restrict_scalars();
    let b = SemilinearMap::to_prime_coords(f, target);
    Ok(r.solve(&b)?.map(|(x, ker)| {
        let kern: Vec<Vec<Fe>> = ker
            .iter()
            .map(|c| SemilinearMap::from_prime_coords(f, c))
            .collect();
        AffineSolution {
            particular: SemilinearMap::from_prime_coords(f, &x),
            kernel: span_basis(f, &kern, map.matrix.cols()),
        }
    }))
}

/// Convenience wrapper returning rank, kernel and image.
pub fn rank_kernel_image(map: &SemilinearMap) -> LinearSummary {
    map.rank_kernel_image()
}

#[cfg(test)]
mod tests {
    use super::super::field::field;
    use super::*;

    #[test]
    fn identity_and_zero_solves() {
        let f = field(5, 1).unwrap();
        let id = SemilinearMap::linear(Mat::identity(f, 3));
        let v = vec![f.int(1), f.int(2), f.int(3)];
        let s = solve_linear(&id, &v).unwrap().unwrap();
        assert_eq!(s.particular, v);
        assert!(s.kernel.is_empty());
        let z = SemilinearMap::linear(Mat::zeros(f, 3, 3));
        let s = solve_linear(&z, &[f.zero(); 3]).unwrap().unwrap();
        assert_eq!(s.kernel.len(), 3);
        assert!(solve_linear(&z, &v).unwrap().is_none());
        assert!(solve_linear(&z, &v[..2]).is_err());
    }

    #[test]
    fn frobenius_on_f9_by_enumeration() {
        let f = field(3, 2).unwrap();
        let map = SemilinearMap::new(Mat::identity(f, 1), 1);
        let s = solve_linear(&map, &[f.one()]).unwrap().unwrap();
        // brute force: the only x with x^3 = 1 in F_9 is 1
        let sols: Vec<Fe> = f
            .elements()
            .into_iter()
            .filter(|x| x.frob(1) == f.one())
            .collect();
        assert_eq!(sols, vec![f.one()]);
        assert_eq!(s.particular, vec![f.one()]);
        assert!(s.kernel.is_empty());
    }

    #[test]
    fn rank_nullity_for_semilinear_maps() {
        let f = field(5, 2).unwrap();
        let g = f.gen();
        let m = Mat::from_rows(
            f,
            &[vec![g, f.one(), f.zero()], vec![g * g, g, f.zero()]],
            3,
        );
        for tw in 0..2 {
            let s = SemilinearMap::new(m.clone(), tw);
            let sum = s.rank_kernel_image();
            assert_eq!(sum.rank + sum.kernel.len(), 3);
            assert_eq!(sum.image.len(), sum.rank);
            for v in &sum.kernel {
                assert!(s.apply(v).unwrap().iter().all(|x| x.is_zero()));
            }
        }
    }

    #[test]
    fn composition_adds_twists() {
        let f = field(3, 2).unwrap();
        let g = f.gen();
        let a = SemilinearMap::new(Mat::from_rows(f, &[vec![g, f.one()]], 2), 1);
        let b = SemilinearMap::new(Mat::from_rows(f, &[vec![f.one(), g], vec![g, g]], 2), 1);
        let c = a.compose(&b).unwrap();
        assert_eq!(c.twist, 0);
        let v = vec![g * g, f.int(2)];
        assert_eq!(
            c.apply(&v).unwrap(),
            a.apply(&b.apply(&v).unwrap()).unwrap()
        );
        assert!(
            c.rank_kernel_image().rank
                <= a.rank_kernel_image().rank.min(b.rank_kernel_image().rank)
        );
    }

    #[test]
    fn diagonal_and_zero_ranks() {
        let f = field(7, 1).unwrap();
        let z = SemilinearMap::linear(Mat::zeros(f, 4, 4));
        assert_eq!(z.rank_kernel_image().rank, 0);
        assert_eq!(z.rank_kernel_image().kernel.len(), 4);
        let mut d = Mat::zeros(f, 4, 4);
        for i in 0..4 {
            d.set(i, i, f.int(i as i64 + 1));
        }
        assert_eq!(SemilinearMap::linear(d).rank_kernel_image().rank, 4);
        let empty = SemilinearMap::new(Mat::zeros(f, 4, 0), 1);
        assert_eq!(empty.rank_kernel_image().rank, 0);
    }
}
