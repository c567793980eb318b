//! Multivariate polynomials of bounded total degree and their weighted
//! least-squares fits.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{MmlsError, Result};
use crate::weights::{active_set, WeightFunction};
use crate::wpca::RANK_TOLERANCE;

/// `dim(Π_m^d) = C(m + d, d)`.
pub fn poly_dim(d: usize, m: usize) -> usize {
    // Multiplicative form keeps every intermediate an exact binomial.
    let mut acc = 1usize;
    for k in 1..=d {
        acc = acc * (m + k) / k;
    }
    acc
}

/// Exponent vectors of the monomials of `Π_m^d` in graded lexicographic
/// order: by total degree, then lexicographically descending within a degree
/// (`1, x, y, x², xy, y², …`).
pub fn monomial_exponents(d: usize, m: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::with_capacity(poly_dim(d, m));
    for degree in 0..=m as u32 {
        let mut current = vec![0u32; d];
        push_degree(&mut out, &mut current, 0, degree);
    }
    out
}

fn push_degree(out: &mut Vec<Vec<u32>>, current: &mut [u32], slot: usize, remaining: u32) {
    if current.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if slot + 1 == current.len() {
        current[slot] = remaining;
        out.push(current.to_vec());
        return;
    }
    for e in (0..=remaining).rev() {
        current[slot] = e;
        push_degree(out, current, slot + 1, remaining - e);
    }
    current[slot] = 0;
}

fn monomial_row(x: &[f64], exponents: &[Vec<u32>], row: &mut [f64]) {
    for (slot, exps) in row.iter_mut().zip(exponents) {
        *slot = exps
            .iter()
            .zip(x)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product();
    }
}

/// A map `R^d → R^n` whose components lie in `Π_m^d`.
///
/// Monomials are taken in the scaled variable `x / scale`; the coefficient
/// matrix has one row per monomial (graded-lex order) and one column per
/// output coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialMap {
    d: usize,
    m: usize,
    scale: f64,
    coefficients: DMatrix<f64>,
}

impl PolynomialMap {
    pub fn new(d: usize, m: usize, scale: f64, coefficients: DMatrix<f64>) -> Result<Self> {
        if coefficients.nrows() != poly_dim(d, m) {
            return Err(MmlsError::InvalidInput(format!(
                "degree-{m} polynomials in {d} variables need {} coefficient rows, got {}",
                poly_dim(d, m),
                coefficients.nrows()
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(MmlsError::InvalidInput(format!(
                "invalid coordinate scale {scale}"
            )));
        }
        Ok(Self {
            d,
            m,
            scale,
            coefficients,
        })
    }

    pub fn domain_dim(&self) -> usize {
        self.d
    }

    pub fn degree(&self) -> usize {
        self.m
    }

    pub fn codomain_dim(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    pub fn evaluate(&self, x: &[f64]) -> DVector<f64> {
        assert_eq!(x.len(), self.d, "evaluation point has the wrong dimension");
        let scaled: Vec<f64> = x.iter().map(|v| v / self.scale).collect();
        let exps = monomial_exponents(self.d, self.m);
        let mut row = vec![0.0; exps.len()];
        monomial_row(&scaled, &exps, &mut row);
        self.coefficients.tr_mul(&DVector::from_vec(row))
    }

    /// Value at the origin: the constant-monomial row.
    pub fn at_origin(&self) -> DVector<f64> {
        self.coefficients.row(0).transpose()
    }

    pub(crate) fn map_codomain(&self, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Self {
        // Coefficient rows are points of the codomain; map them as columns.
        let mapped = f(&self.coefficients.transpose()).transpose();
        Self {
            coefficients: mapped,
            ..self.clone()
        }
    }
}

/// Weighted least-squares fit of the `values` (columns, in R^n) sampled at
/// `coords` (columns, in R^d) by an `R^n`-valued polynomial of degree `m`.
///
/// The weighted design matrix is factorized once and the factorization is
/// applied to all `n` right-hand sides.
pub fn weighted_poly_fit(
    coords: &DMatrix<f64>,
    values: &DMatrix<f64>,
    weights: &[f64],
    m: usize,
) -> Result<PolynomialMap> {
    fit_scaled(coords, values, weights, m, 1.0)
}

pub(crate) fn fit_scaled(
    coords: &DMatrix<f64>,
    values: &DMatrix<f64>,
    weights: &[f64],
    m: usize,
    scale: f64,
) -> Result<PolynomialMap> {
    let d = coords.nrows();
    let count = coords.ncols();
    if values.ncols() != count || weights.len() != count {
        return Err(MmlsError::InvalidInput(format!(
            "{count} coordinates, {} values and {} weights",
            values.ncols(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(MmlsError::InvalidInput(
            "weights must be finite and non-negative".into(),
        ));
    }
    let exps = monomial_exponents(d, m);
    let unknowns = exps.len();
    let active = active_set(weights);
    if active.len() < unknowns {
        return Err(MmlsError::DegenerateNeighborhood {
            rank: active.len(),
            required: unknowns,
        });
    }

    let rows = active.len();
    let mut design = DMatrix::<f64>::zeros(rows, unknowns);
    // Weighted values, one column per active sample.
    let mut scaled_values = values.select_columns(&active);
    let mut x = vec![0.0; d];
    let mut row = vec![0.0; unknowns];
    for (k, &i) in active.iter().enumerate() {
        let sw = weights[i].sqrt();
        for (slot, v) in x.iter_mut().zip(coords.column(i).iter()) {
            *slot = v / scale;
        }
        monomial_row(&x, &exps, &mut row);
        for (j, v) in row.iter().enumerate() {
            design[(k, j)] = sw * v;
        }
        scaled_values.column_mut(k).scale_mut(sw);
    }

    let svd = SVD::new(design, true, true);
    let top = svd.singular_values.max();
    let rank = if top > 0.0 {
        svd.singular_values
            .iter()
            .filter(|&&s| s > RANK_TOLERANCE * top)
            .count()
    } else {
        0
    };
    if rank < unknowns {
        return Err(MmlsError::DegenerateNeighborhood {
            rank,
            required: unknowns,
        });
    }
    let u = svd.u.as_ref().expect("left vectors requested");
    let v_t = svd.v_t.as_ref().expect("right vectors requested");
    // Uᵀ (√W F) computed as (F √W U)ᵀ to stay column-major.
    let mut projected = (scaled_values * u).transpose();
    for (mut row, s) in projected.row_iter_mut().zip(svd.singular_values.iter()) {
        row /= *s;
    }
    let coefficients = v_t.tr_mul(&projected);
    PolynomialMap::new(d, m, scale, coefficients)
}

/// Classic moving least-squares approximation of a scalar function: the
/// value at `x` of the degree-`m` polynomial fitted with weights
/// `θ(‖x − x_i‖)`.
pub fn mls_function_approx(
    sites: &DMatrix<f64>,
    values: &[f64],
    x: &DVector<f64>,
    m: usize,
    theta: &WeightFunction,
) -> Result<f64> {
    if sites.ncols() != values.len() {
        return Err(MmlsError::InvalidInput(format!(
            "{} sites but {} values",
            sites.ncols(),
            values.len()
        )));
    }
    if sites.nrows() != x.len() {
        return Err(MmlsError::InvalidInput(
            "evaluation point dimension does not match the sites".into(),
        ));
    }
    let mut coords = sites.clone();
    for mut col in coords.column_iter_mut() {
        col -= x;
    }
    let weights: Vec<f64> = coords
        .column_iter()
        .map(|c| theta.eval_unchecked(c.norm()))
        .collect();
    let f = DMatrix::from_row_slice(1, values.len(), values);
    let fit = fit_scaled(&coords, &f, &weights, m, theta.scale())?;
    Ok(fit.at_origin()[0])
}
