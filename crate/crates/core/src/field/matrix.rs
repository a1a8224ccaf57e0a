use std::fmt;

use itertools::Itertools;
use rand::Rng;

use super::{FieldElement, FieldError, PrimeField};

/// Dense row-major matrix over a prime field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FpMatrix {
    field: PrimeField,
    rows: usize,
    cols: usize,
    data: Vec<FieldElement>,
}

/// A square submatrix with zero determinant, given by its (0-based, sorted)
/// row and column index sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinorViolation {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl fmt::Display for MinorViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "singular minor rows {:?} cols {:?}", self.rows, self.cols)
    }
}

impl FpMatrix {
    pub fn new(
        field: PrimeField,
        rows: usize,
        cols: usize,
        data: Vec<FieldElement>,
    ) -> Result<Self, FieldError> {
        if rows == 0 || cols == 0 {
            return Err(FieldError::Dimension(format!("empty matrix {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(FieldError::Dimension(format!(
                "{} elements for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|e| e.modulus() != field.modulus()) {
            return Err(FieldError::ModulusMismatch {
                left: field.modulus(),
                right: bad.modulus(),
            });
        }
        Ok(Self {
            field,
            rows,
            cols,
            data,
        })
    }

    /// Builds from nested rows of raw integers (reduced mod q).
    pub fn from_rows<R: AsRef<[u64]>>(field: PrimeField, rows: &[R]) -> Result<Self, FieldError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(FieldError::Dimension("ragged rows".into()));
        }
        let data = rows
            .iter()
            .flat_map(|r| r.as_ref().iter().map(|&v| field.element(v)))
            .collect();
        Self::new(field, rows.len(), cols, data)
    }

    /// Builds from rows that are already field elements.
    pub fn from_element_rows(field: PrimeField, rows: &[Vec<FieldElement>]) -> Result<Self, FieldError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(FieldError::Dimension("ragged rows".into()));
        }
        Self::new(field, rows.len(), cols, rows.concat())
    }

    pub fn zeros(field: PrimeField, rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        Self {
            field,
            rows,
            cols,
            data: vec![field.zero(); rows * cols],
        }
    }

    pub fn identity(field: PrimeField, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.set(i, i, field.one());
        }
        m
    }

    /// Uniformly random entries.
    pub fn random<R: Rng + ?Sized>(field: PrimeField, rows: usize, cols: usize, rng: &mut R) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        Self {
            field,
            rows,
            cols,
            data: field.random_vector(rng, rows * cols),
        }
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> FieldElement {
        assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: FieldElement) {
        assert!(r < self.rows && c < self.cols);
        assert_eq!(v.modulus(), self.field.modulus());
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[FieldElement] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<FieldElement> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<FieldElement>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.field, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn select_rows(&self, sel: &[usize]) -> Self {
        let data = sel.iter().flat_map(|&r| self.row(r).iter().copied()).collect();
        Self::new(self.field, sel.len(), self.cols, data).expect("non-empty selection")
    }

    pub fn select_cols(&self, sel: &[usize]) -> Self {
        let data = (0..self.rows)
            .flat_map(|r| sel.iter().map(move |&c| self.get(r, c)))
            .collect();
        Self::new(self.field, self.rows, sel.len(), data).expect("non-empty selection")
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        self.select_rows(rows).select_cols(cols)
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(parts: &[&FpMatrix]) -> Result<Self, FieldError> {
        let first = parts
            .first()
            .ok_or_else(|| FieldError::Dimension("vstack of nothing".into()))?;
        if parts.iter().any(|p| p.cols != first.cols || p.field != first.field) {
            return Err(FieldError::Dimension("vstack of incompatible blocks".into()));
        }
        let rows = parts.iter().map(|p| p.rows).sum();
        let data = parts.iter().flat_map(|p| p.data.iter().copied()).collect();
        Self::new(first.field, rows, first.cols, data)
    }

    pub fn sub(&self, rhs: &FpMatrix) -> Result<Self, FieldError> {
        if self.shape() != rhs.shape() {
            return Err(FieldError::Dimension(format!(
                "{}x{} minus {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| a.checked_sub(b))
            .collect::<Result<_, _>>()?;
        Self::new(self.field, self.rows, self.cols, data)
    }

    pub fn mul(&self, rhs: &FpMatrix) -> Result<Self, FieldError> {
        if self.cols != rhs.rows {
            return Err(FieldError::Dimension(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        if self.field != rhs.field {
            return Err(FieldError::ModulusMismatch {
                left: self.field.modulus(),
                right: rhs.field.modulus(),
            });
        }
        let mut out = Self::zeros(self.field, self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a.is_zero() {
                    continue;
                }
                for c in 0..rhs.cols {
                    let idx = r * rhs.cols + c;
                    out.data[idx] += a * rhs.get(k, c);
                }
            }
        }
        Ok(out)
    }

    /// `self * v` for a column vector `v`.
    pub fn mul_vec(&self, v: &[FieldElement]) -> Result<Vec<FieldElement>, FieldError> {
        if v.len() != self.cols {
            return Err(FieldError::Dimension(format!(
                "{}x{} times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        (0..self.rows).map(|r| super::dot(self.row(r), v)).collect()
    }

    /// `vᵀ * self` for a row vector `v`.
    pub fn vec_mul(&self, v: &[FieldElement]) -> Result<Vec<FieldElement>, FieldError> {
        if v.len() != self.rows {
            return Err(FieldError::Dimension(format!(
                "vector of length {} times {}x{}",
                v.len(),
                self.rows,
                self.cols
            )));
        }
        let mut out = self.field.zeros(self.cols);
        if let Some(bad) = v.iter().find(|e| e.modulus() != self.field.modulus()) {
            return Err(FieldError::ModulusMismatch {
                left: self.field.modulus(),
                right: bad.modulus(),
            });
        }
        for (r, &a) in v.iter().enumerate() {
            for (c, o) in out.iter_mut().enumerate() {
                *o += a * self.get(r, c);
            }
        }
        Ok(out)
    }

    /// Reduced row echelon form in place; returns the pivot column of each
    /// non-zero row, in order.
    fn rref_in_place(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut pivot_row = 0;
        for col in 0..self.cols {
            if pivot_row == self.rows {
                break;
            }
            let Some(found) = (pivot_row..self.rows).find(|&r| !self.get(r, col).is_zero()) else {
                continue;
            };
            self.swap_rows(found, pivot_row);
            let inv = self.get(pivot_row, col).inv().expect("non-zero pivot");
            self.scale_row(pivot_row, inv);
            for r in 0..self.rows {
                if r != pivot_row {
                    let factor = self.get(r, col);
                    if !factor.is_zero() {
                        self.sub_scaled_row(r, pivot_row, factor);
                    }
                }
            }
            pivots.push(col);
            pivot_row += 1;
        }
        pivots
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for c in 0..self.cols {
                self.data.swap(a * self.cols + c, b * self.cols + c);
            }
        }
    }

    fn scale_row(&mut self, r: usize, by: FieldElement) {
        for c in 0..self.cols {
            self.data[r * self.cols + c] *= by;
        }
    }

    /// row[target] -= factor * row[source]
    fn sub_scaled_row(&mut self, target: usize, source: usize, factor: FieldElement) {
        for c in 0..self.cols {
            let s = self.data[source * self.cols + c];
            self.data[target * self.cols + c] -= factor * s;
        }
    }

    pub fn rank(&self) -> usize {
        self.clone().rref_in_place().len()
    }

    /// Columns holding the pivots of the reduced row echelon form. For a
    /// full-row-rank matrix the selected columns form a nonsingular square
    /// submatrix.
    pub fn pivot_columns(&self) -> Vec<usize> {
        self.clone().rref_in_place()
    }

    pub fn determinant(&self) -> Result<FieldElement, FieldError> {
        if self.rows != self.cols {
            return Err(FieldError::Dimension("determinant of a non-square matrix".into()));
        }
        let mut m = self.clone();
        let mut det = self.field.one();
        for col in 0..m.cols {
            let Some(found) = (col..m.rows).find(|&r| !m.get(r, col).is_zero()) else {
                return Ok(self.field.zero());
            };
            if found != col {
                m.swap_rows(found, col);
                det = -det;
            }
            let pivot = m.get(col, col);
            det *= pivot;
            let inv = pivot.inv()?;
            for r in col + 1..m.rows {
                let factor = m.get(r, col) * inv;
                if !factor.is_zero() {
                    m.sub_scaled_row(r, col, factor);
                }
            }
        }
        Ok(det)
    }

    /// Exact inverse by Gauss-Jordan elimination on `[M | I]`.
    pub fn inverse(&self) -> Result<Self, FieldError> {
        if self.rows != self.cols {
            return Err(FieldError::Dimension("inverse of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut aug = Self::zeros(self.field, n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                aug.set(r, c, self.get(r, c));
            }
            aug.set(r, n + r, self.field.one());
        }
        for col in 0..n {
            let Some(found) = (col..n).find(|&r| !aug.get(r, col).is_zero()) else {
                return Err(FieldError::Singular { pivot_col: col });
            };
            aug.swap_rows(found, col);
            let inv = aug.get(col, col).inv()?;
            aug.scale_row(col, inv);
            for r in 0..n {
                if r != col {
                    let factor = aug.get(r, col);
                    if !factor.is_zero() {
                        aug.sub_scaled_row(r, col, factor);
                    }
                }
            }
        }
        let cols: Vec<usize> = (n..2 * n).collect();
        Ok(aug.select_cols(&cols))
    }

    /// Solves `self * x = rhs` for square nonsingular `self`.
    pub fn solve(&self, rhs: &[FieldElement]) -> Result<Vec<FieldElement>, FieldError> {
        self.inverse()?.mul_vec(rhs)
    }

    /// Exhaustively tests every `r x r` submatrix for `r = 1..=size_cap`
    /// (capped at `min(rows, cols)`) and returns the first singular one.
    ///
    /// Cost is `sum_r C(rows, r) * C(cols, r)` determinants, so callers keep
    /// the dimensions small.
    pub fn all_square_submatrices_nonsingular(&self, size_cap: usize) -> Result<(), MinorViolation> {
        let cap = size_cap.min(self.rows).min(self.cols);
        for size in 1..=cap {
            for rows in (0..self.rows).combinations(size) {
                let strip = self.select_rows(&rows);
                for cols in (0..self.cols).combinations(size) {
                    let det = strip.select_cols(&cols).determinant().expect("square");
                    if det.is_zero() {
                        return Err(MinorViolation { rows, cols });
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for FpMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let row: Vec<String> = self.row(r).iter().map(|e| e.to_string()).collect();
            writeln!(f, "[{}]", row.join(" "))?;
        }
        Ok(())
    }
}

/// Cauchy matrix with entry `(i, j) = 1 / (x_i - y_j)` where
/// `x_i = i` for `i in 0..rows` and `y_j = rows + j` for `j in 0..cols`.
/// All points are distinct, so every square submatrix is nonsingular.
pub fn build_cauchy(rows: usize, cols: usize, q: u64) -> Result<FpMatrix, FieldError> {
    let needed = (rows + cols) as u64;
    if q < needed {
        return Err(FieldError::CauchyTooSmall { rows, cols, q, needed });
    }
    let field = PrimeField::new(q)?;
    let mut m = FpMatrix::zeros(field, rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let x = field.element(i as u64);
            let y = field.element((rows + j) as u64);
            m.set(i, j, (x - y).inv()?);
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_xoshiro::SplitMix64;

    fn field(q: u64) -> PrimeField {
        PrimeField::new(q).unwrap()
    }

    /// Leibniz expansion over all permutations; independent of elimination.
    fn leibniz_det(m: &FpMatrix) -> FieldElement {
        let n = m.rows();
        let f = m.field();
        let mut acc = f.zero();
        for perm in (0..n).permutations(n) {
            let inversions = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .filter(|&(i, j)| perm[i] > perm[j])
                .count();
            let mut term = f.one();
            for (r, &c) in perm.iter().enumerate() {
                term *= m.get(r, c);
            }
            if inversions % 2 == 1 {
                term = -term;
            }
            acc += term;
        }
        acc
    }

    #[test]
    fn inverse_examples() {
        let f = field(11);
        let id = FpMatrix::identity(f, 3);
        assert_eq!(id.inverse().unwrap(), id);

        let m = FpMatrix::from_rows(f, &[[1, 1], [1, 2]]).unwrap();
        let expected = FpMatrix::from_rows(f, &[[2, 10], [10, 1]]).unwrap();
        assert_eq!(m.inverse().unwrap(), expected);
        // hand oracle: the product is the identity
        assert_eq!(m.mul(&expected).unwrap(), FpMatrix::identity(f, 2));

        let singular = FpMatrix::from_rows(f, &[[1, 1], [2, 2]]).unwrap();
        assert_eq!(singular.inverse(), Err(FieldError::Singular { pivot_col: 1 }));
    }

    #[test]
    fn random_inverses_are_two_sided() {
        let mut rng = SplitMix64::seed_from_u64(42);
        for q in [2, 13, 257] {
            let f = field(q);
            for size in 1..=5 {
                let mut found = 0;
                while found < 200 {
                    let data = f.random_vector(&mut rng, size * size);
                    let m = FpMatrix::new(f, size, size, data).unwrap();
                    let Ok(inv) = m.inverse() else {
                        assert!(leibniz_det(&m).is_zero());
                        continue;
                    };
                    let id = FpMatrix::identity(f, size);
                    assert_eq!(m.mul(&inv).unwrap(), id);
                    assert_eq!(inv.mul(&m).unwrap(), id);
                    found += 1;
                }
            }
        }
    }

    #[test]
    fn determinant_matches_leibniz() {
        let mut rng = SplitMix64::seed_from_u64(3);
        let f = field(7);
        for size in 1..=4 {
            for _ in 0..100 {
                let m = FpMatrix::new(f, size, size, f.random_vector(&mut rng, size * size)).unwrap();
                assert_eq!(m.determinant().unwrap(), leibniz_det(&m));
            }
        }
    }

    #[test]
    fn minor_check_examples() {
        let f = field(13);
        let id = FpMatrix::identity(f, 2);
        assert_eq!(
            id.all_square_submatrices_nonsingular(2),
            Err(MinorViolation { rows: vec![0], cols: vec![1] })
        );

        let proportional = FpMatrix::from_rows(f, &[[1, 2, 5], [3, 6, 7]]).unwrap();
        let v = proportional.all_square_submatrices_nonsingular(2).unwrap_err();
        assert_eq!(v, MinorViolation { rows: vec![0, 1], cols: vec![0, 1] });
    }

    #[test]
    fn cauchy_3x3_all_minors_nonzero_by_brute_force() {
        let m = build_cauchy(3, 3, 13).unwrap();
        assert!(m.all_square_submatrices_nonsingular(3).is_ok());
        for size in 1..=3 {
            for rows in (0..3).combinations(size) {
                for cols in (0..3).combinations(size) {
                    assert!(!leibniz_det(&m.submatrix(&rows, &cols)).is_zero());
                }
            }
        }
    }

    #[test]
    fn cauchy_examples() {
        assert_eq!(build_cauchy(1, 1, 13).unwrap().get(0, 0).value(), 12);
        assert_eq!(build_cauchy(8, 4, 13).unwrap().get(0, 0).value(), 8);
        assert_eq!(
            build_cauchy(2, 2, 3),
            Err(FieldError::CauchyTooSmall { rows: 2, cols: 2, q: 3, needed: 4 })
        );
        for (r, c, q) in [(8, 4, 13), (4, 4, 11), (6, 3, 11), (12, 6, 19)] {
            let m = build_cauchy(r, c, q).unwrap();
            assert!(m.all_square_submatrices_nonsingular(r.min(c)).is_ok(), "{r}x{c} over {q}");
        }
    }

    #[test]
    fn pivots_select_a_nonsingular_block() {
        let f = field(5);
        let m = FpMatrix::from_rows(f, &[[0, 1, 2, 3], [0, 2, 4, 2]]).unwrap();
        let pivots = m.pivot_columns();
        assert_eq!(pivots, vec![1, 3]);
        assert!(!m.select_cols(&pivots).determinant().unwrap().is_zero());
        assert_eq!(m.rank(), 2);
    }

    #[test]
    fn vector_products() {
        let f = field(11);
        let m = FpMatrix::from_rows(f, &[[1, 2, 3], [4, 5, 6]]).unwrap();
        assert_eq!(m.mul_vec(&f.vector(&[1, 1, 1])).unwrap(), f.vector(&[6, 4]));
        assert_eq!(m.vec_mul(&f.vector(&[1, 2])).unwrap(), f.vector(&[9, 1, 4]));
        assert!(m.mul_vec(&f.vector(&[1, 1])).is_err());
        assert_eq!(m.transpose().transpose(), m);
    }

    #[test]
    fn construction_errors() {
        let f = field(11);
        assert!(FpMatrix::new(f, 0, 2, vec![]).is_err());
        assert!(FpMatrix::new(f, 1, 2, f.vector(&[1])).is_err());
        let g = field(13);
        assert!(matches!(
            FpMatrix::new(f, 1, 1, vec![g.one()]),
            Err(FieldError::ModulusMismatch { .. })
        ));
        assert!(FpMatrix::from_rows(f, &[vec![1u64, 2], vec![3]]).is_err());
    }
}
