//! Uniform interval mesh, grid functions, and composite trapezoid quadrature.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::util::fmt17;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    x_lo: f64,
    x_hi: f64,
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(x_lo: f64, x_hi: f64, n: usize) -> Result<Grid> {
        if !x_lo.is_finite() || !x_hi.is_finite() || x_lo >= x_hi {
            return Err(Error::Config(format!(
                "grid bounds must satisfy x_lo < x_hi, got [{x_lo}, {x_hi}]"
            )));
        }
        if n < 3 {
            return Err(Error::Config(format!(
                "grid needs n >= 3 nodes, got n = {n}"
            )));
        }
        let h = (x_hi - x_lo) / (n - 1) as f64;
        Ok(Grid { x_lo, x_hi, n, h })
    }

    pub fn x_lo(&self) -> f64 {
        self.x_lo
    }

    pub fn x_hi(&self) -> f64 {
        self.x_hi
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Node coordinate; the last node is pinned to `x_hi` so both endpoints
    /// are reproduced exactly.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        if i + 1 == self.n {
            self.x_hi
        } else {
            self.x_lo + i as f64 * self.h
        }
    }

    /// Composite trapezoid weights: h at interior nodes, h/2 at the endpoints.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let mut w = vec![self.h; self.n];
        w[0] = 0.5 * self.h;
        w[self.n - 1] = 0.5 * self.h;
        w
    }
}

#[derive(Clone, Debug)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Field {
        Field {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn zeros(grid: Grid) -> Field {
        Field::constant(grid, 0.0)
    }

    /// Pointwise evaluation of a coefficient expression at the nodes.
    pub fn sample(grid: Grid, e: &Expr) -> Result<Field> {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let x = grid.node(i);
            let v = e
                .eval(x)
                .map_err(|msg| Error::Domain(format!("at node {i} (x = {x}): {msg}")))?;
            values.push(v);
        }
        Ok(Field { grid, values })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Composite trapezoid value of ∫ f over the interval.
    pub fn integrate(&self) -> f64 {
        let n = self.len();
        let mut s = 0.5 * (self.values[0] + self.values[n - 1]);
        for v in &self.values[1..n - 1] {
            s += v;
        }
        s * self.grid.h()
    }

    /// Trapezoid inner product ∫ f g.
    pub fn inner(&self, other: &Field) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let n = self.len();
        let mut s =
            0.5 * (self.values[0] * other.values[0] + self.values[n - 1] * other.values[n - 1]);
        for i in 1..n - 1 {
            s += self.values[i] * other.values[i];
        }
        s * self.grid.h()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        crate::util::linf(&self.values)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// Piecewise-linear interpolation, clamped to the interval.
    pub fn interp(&self, x: f64) -> f64 {
        let g = self.grid;
        if x <= g.x_lo() {
            return self.values[0];
        }
        if x >= g.x_hi() {
            return self.values[g.len() - 1];
        }
        let t = (x - g.x_lo()) / g.h();
        let i = (t.floor() as usize).min(g.len() - 2);
        let frac = t - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// CSV serialization: `x,value` rows, 17 significant digits, Unix newlines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,value\n");
        for i in 0..self.len() {
            out.push_str(&fmt17(self.grid.node(i)));
            out.push(',');
            out.push_str(&fmt17(self.values[i]));
            out.push('\n');
        }
        out
    }
}

impl std::ops::Index<usize> for Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}
