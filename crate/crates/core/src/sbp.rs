//! One-dimensional diagonal-norm summation-by-parts operators.
//!
//! `D = P⁻¹Q` with `P` diagonal positive and `Q + Qᵀ = B = diag(-1, 0, …, 0, 1)`.
//! Two classical families are provided: the second-order operator with the
//! trapezoidal norm, and the (4,2) operator whose boundary closure is second
//! order accurate and whose interior stencil is fourth order.

use std::io::Write;

use crate::error::{Error, Result};

/// Minimum number of nodes an operator of the given order can be built on.
pub fn min_width(order: usize) -> Result<usize> {
    match order {
        2 => Ok(3),
        4 => Ok(8),
        other => Err(Error::UnsupportedOrder(other)),
    }
}

#[derive(Debug, Clone)]
pub struct SbpOperator1D {
    pub order: usize,
    pub n: usize,
    pub h: f64,
    /// Diagonal of `P`, already scaled by `h`.
    pub p_weights: Vec<f64>,
    /// Row-major `n × n`.
    q_matrix: Vec<f64>,
    /// Row-major `n × n`, `D = P⁻¹Q`.
    d_matrix: Vec<f64>,
    /// Nonzeros of each row of `D` in ascending column order.
    rows: Vec<Vec<(usize, f64)>>,
}

/// Upper-triangle entries of the skew part of `Q` near the left boundary for
/// the (4,2) operator. Entries not listed take the interior value.
const SBP42_BOUNDARY_SKEW: [(usize, usize, f64); 6] = [
    (0, 1, 59.0 / 96.0),
    (0, 2, -1.0 / 12.0),
    (0, 3, -1.0 / 32.0),
    (1, 2, 59.0 / 96.0),
    (1, 3, 0.0),
    (2, 3, 59.0 / 96.0),
];

const SBP42_NORM: [f64; 4] = [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0];

/// Build the classical diagonal-norm operator of the requested order on `n`
/// equidistant nodes with spacing `h`.
pub fn build_sbp_1d(order: usize, n: usize, h: f64) -> Result<SbpOperator1D> {
    let min = min_width(order)?;
    if n < min {
        return Err(Error::TooFewNodes { order, n, min });
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidGrid(format!("grid spacing must be positive, got {h}")));
    }

    // Skew-symmetric part S (upper triangle), Q = S + B/2.
    let mut skew = vec![0.0; n * n];
    let mut norm = vec![1.0; n];
    match order {
        2 => {
            for i in 0..n - 1 {
                skew[i * n + i + 1] = 0.5;
            }
            norm[0] = 0.5;
            norm[n - 1] = 0.5;
        }
        4 => {
            for i in 0..n {
                if i + 1 < n {
                    skew[i * n + i + 1] = 2.0 / 3.0;
                }
                if i + 2 < n {
                    skew[i * n + i + 2] = -1.0 / 12.0;
                }
            }
            for &(a, b, v) in &SBP42_BOUNDARY_SKEW {
                skew[a * n + b] = v;
                // mirrored closure at the right end
                skew[(n - 1 - b) * n + (n - 1 - a)] = v;
            }
            for (k, &w) in SBP42_NORM.iter().enumerate() {
                norm[k] = w;
                norm[n - 1 - k] = w;
            }
        }
        _ => unreachable!(),
    }

    let mut q_matrix = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s = skew[i * n + j];
            q_matrix[i * n + j] = s;
            q_matrix[j * n + i] = -s;
        }
    }
    q_matrix[0] = -0.5;
    q_matrix[n * n - 1] = 0.5;

    let p_weights: Vec<f64> = norm.iter().map(|w| w * h).collect();
    let mut d_matrix = vec![0.0; n * n];
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::new();
        for j in 0..n {
            let q = q_matrix[i * n + j];
            if q != 0.0 {
                let d = q / p_weights[i];
                d_matrix[i * n + j] = d;
                row.push((j, d));
            }
        }
        rows.push(row);
    }

    Ok(SbpOperator1D {
        order,
        n,
        h,
        p_weights,
        q_matrix,
        d_matrix,
        rows,
    })
}

impl SbpOperator1D {
    pub fn q(&self, i: usize, j: usize) -> f64 {
        self.q_matrix[i * self.n + j]
    }

    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.d_matrix[i * self.n + j]
    }

    /// Diagonal entry of `B = diag(-1, 0, …, 0, 1)`.
    pub fn b(&self, i: usize) -> f64 {
        if i == 0 {
            -1.0
        } else if i == self.n - 1 {
            1.0
        } else {
            0.0
        }
    }

    /// Nonzeros of row `i` of `D`.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.n);
        let mut out = vec![0.0; self.n];
        self.apply_strided(f, 0, 1, &mut out, 0, 1);
        out
    }

    /// Apply `D` along one grid line: reads `src[start + k*stride]` and writes
    /// `dst[dst_start + k*dst_stride]` for `k = 0..n`.
    pub fn apply_strided(&self, src: &[f64], start: usize, stride: usize, dst: &mut [f64], dst_start: usize, dst_stride: usize) {
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(j, c) in row {
                acc += c * src[start + j * stride];
            }
            dst[dst_start + i * dst_stride] = acc;
        }
    }

    /// Largest entrywise deviation of `Q + Qᵀ` from `B`.
    pub fn sbp_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let b = if i == j { self.b(i) } else { 0.0 };
                worst = worst.max((self.q(i, j) + self.q(j, i) - b).abs());
            }
        }
        worst
    }

    /// Boundary rows are accurate to this polynomial degree.
    pub fn boundary_degree(&self) -> usize {
        self.order / 2
    }

    /// Number of rows at each end that use a boundary closure.
    pub fn closure_rows(&self) -> usize {
        match self.order {
            2 => 1,
            _ => 4,
        }
    }

    pub fn write_d_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_dense_csv(w, self.n, self.n, |i, j| self.d(i, j))
    }

    pub fn write_q_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_dense_csv(w, self.n, self.n, |i, j| self.q(i, j))
    }

    pub fn write_p_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_dense_csv(w, self.n, self.n, |i, j| if i == j { self.p_weights[i] } else { 0.0 })
    }
}

/// Write a dense matrix as comma separated rows with round-trip precision.
pub fn write_dense_csv<W: Write>(
    mut w: W,
    nrows: usize,
    ncols: usize,
    entry: impl Fn(usize, usize) -> f64,
) -> std::io::Result<()> {
    for i in 0..nrows {
        let line: Vec<String> = (0..ncols).map(|j| format!("{:e}", entry(i, j))).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Results of [`verify_operator`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorCheck {
    pub order: usize,
    pub n: usize,
    pub sbp_defect: f64,
    /// Worst `|uᵀPDv + (Du)ᵀPv − (u_N v_N − u_0 v_0)|` over the sample pairs.
    pub ibp_defect: f64,
    /// Worst error of `D` on monomials up to the boundary degree.
    pub accuracy_defect: f64,
}

/// Check an operator on `[0, 1]` against its defining identities using the given vector pairs.
pub fn verify_operator(order: usize, n: usize, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<OperatorCheck> {
    let op = build_sbp_1d(order, n, 1.0 / (n - 1) as f64)?;
    let mut ibp: f64 = 0.0;
    for (u, v) in pairs {
        if u.len() != n || v.len() != n {
            return Err(Error::SizeMismatch(format!(
                "vector pair of length {}, {} for n = {n}",
                u.len(),
                v.len()
            )));
        }
        let (du, dv) = (op.apply(u), op.apply(v));
        let lhs: f64 = (0..n).map(|i| op.p_weights[i] * (u[i] * dv[i] + du[i] * v[i])).sum();
        let rhs = u[n - 1] * v[n - 1] - u[0] * v[0];
        ibp = ibp.max((lhs - rhs).abs());
    }
    let x: Vec<f64> = (0..n).map(|i| i as f64 * op.h).collect();
    let mut acc: f64 = 0.0;
    for k in 0..=op.boundary_degree() {
        let f: Vec<f64> = x.iter().map(|x| x.powi(k as i32)).collect();
        let df = op.apply(&f);
        for i in 0..n {
            let exact = if k == 0 { 0.0 } else { k as f64 * x[i].powi(k as i32 - 1) };
            acc = acc.max((df[i] - exact).abs());
        }
    }
    Ok(OperatorCheck {
        order,
        n,
        sbp_defect: op.sbp_defect(),
        ibp_defect: ibp,
        accuracy_defect: acc,
    })
}
