use crate::LpError;

/// Sparse row: `(column, coefficient)` pairs. Duplicate columns are summed.
pub type Row = Vec<(usize, f64)>;

/// `minimize c·x` subject to `A_eq x = b_eq`, `A_ub x <= b_ub` and per-variable bounds.
///
/// Bounds default to `[0, +inf)`. Use `f64::NEG_INFINITY` / `f64::INFINITY` for
/// open sides.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub eq_rows: Vec<Row>,
    pub eq_rhs: Vec<f64>,
    pub ub_rows: Vec<Row>,
    pub ub_rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            objective: vec![0.0; num_vars],
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            ub_rows: Vec::new(),
            ub_rhs: Vec::new(),
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Appends a fresh variable with the given bounds and returns its index.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn set_free(&mut self, var: usize) {
        self.set_bounds(var, f64::NEG_INFINITY, f64::INFINITY);
    }

    pub fn add_eq(&mut self, row: Row, rhs: f64) -> usize {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
        self.eq_rows.len() - 1
    }

    pub fn add_le(&mut self, row: Row, rhs: f64) -> usize {
        self.ub_rows.push(row);
        self.ub_rhs.push(rhs);
        self.ub_rows.len() - 1
    }

    /// Adds `row·x >= rhs` as the negated `<=` row.
    pub fn add_ge(&mut self, row: Row, rhs: f64) -> usize {
        let neg = row.into_iter().map(|(j, v)| (j, -v)).collect();
        self.add_le(neg, -rhs)
    }

    pub fn add_eq_dense(&mut self, row: &[f64], rhs: f64) -> usize {
        self.add_eq(dense_to_sparse(row), rhs)
    }

    pub fn add_le_dense(&mut self, row: &[f64], rhs: f64) -> usize {
        self.add_le(dense_to_sparse(row), rhs)
    }

    /// Structural validation: dimensions, finiteness, bound ordering.
    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Dimension(format!(
                "{} variables but {} lower / {} upper bounds",
                n,
                self.lower.len(),
                self.upper.len()
            )));
        }
        if self.eq_rows.len() != self.eq_rhs.len() || self.ub_rows.len() != self.ub_rhs.len() {
            return Err(LpError::Dimension("row count differs from rhs length".into()));
        }
        if let Some(j) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(LpError::NonFinite(format!("objective coefficient {j}")));
        }
        for (kind, rows, rhs) in [
            ("equality", &self.eq_rows, &self.eq_rhs),
            ("inequality", &self.ub_rows, &self.ub_rhs),
        ] {
            for (i, (row, b)) in rows.iter().zip(rhs.iter()).enumerate() {
                if !b.is_finite() {
                    return Err(LpError::NonFinite(format!("{kind} rhs {i}")));
                }
                for &(j, v) in row {
                    if j >= n {
                        return Err(LpError::Dimension(format!(
                            "{kind} row {i} references column {j} of {n}"
                        )));
                    }
                    if !v.is_finite() {
                        return Err(LpError::NonFinite(format!("{kind} row {i}, column {j}")));
                    }
                }
            }
        }
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(LpError::NonFinite(format!("bounds of variable {j}")));
            }
            if lo > hi {
                return Err(LpError::Dimension(format!(
                    "variable {j} has lower bound {lo} above upper bound {hi}"
                )));
            }
        }
        Ok(())
    }

    /// Row activity `row·x`.
    pub fn row_value(row: &Row, x: &[f64]) -> f64 {
        row.iter().map(|&(j, v)| v * x[j]).sum()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of rows and bounds at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (row, b) in self.eq_rows.iter().zip(&self.eq_rhs) {
            worst = worst.max((Self::row_value(row, x) - b).abs());
        }
        for (row, b) in self.ub_rows.iter().zip(&self.ub_rhs) {
            worst = worst.max(Self::row_value(row, x) - b);
        }
        for j in 0..self.num_vars() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        worst
    }
}

fn dense_to_sparse(row: &[f64]) -> Row {
    row.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, v)| (j, *v))
        .collect()
}
