//! Uniform staggered (MAC) grid on a rectangle and the discrete operators
//! built on it.
//!
//! Scalars live at cell centers, stored row-major with `y` as the outer
//! index. Vector fields keep their `x` component on the `(nx+1) x ny`
//! vertical faces and their `y` component on the `nx x (ny+1)` horizontal
//! faces.
//!
//! The face inner product weights interior faces with the full cell area and
//! boundary faces with half of it (the area of the dual cell). With that
//! weighting `<grad_d s, grad_d s>_faces = -<s, lap_d s>_cells` holds exactly,
//! and it coincides with averaging face quantities to cells arithmetically.

use crate::error::{EhdError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(EhdError::Contract(format!(
                "grid needs at least 3x3 cells, got {nx}x{ny}"
            )));
        }
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(EhdError::Contract(format!(
                "domain extents must be finite and positive, got {lx} x {ly}"
            )));
        }
        let g = Self { nx, ny, lx, ly };
        if !(g.hx().is_finite() && g.hx() > 0.0 && g.hy().is_finite() && g.hy() > 0.0) {
            return Err(EhdError::Contract("degenerate cell size".into()));
        }
        Ok(g)
    }

    /// Unit square with `n x n` cells.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }
    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }
    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }
    pub fn num_xfaces(&self) -> usize {
        (self.nx + 1) * self.ny
    }
    pub fn num_yfaces(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    /// Cell center of cell `(i, j)`.
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    #[inline]
    pub fn xface(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }
    #[inline]
    pub fn yface(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(EhdError::Contract(format!(
                "grid mismatch: {self:?} vs {other:?}"
            )));
        }
        Ok(())
    }
}

/// Cell-centered scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.num_cells()],
        }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.num_cells()],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(EhdError::Contract(format!(
                "scalar field needs {} values, got {}",
                grid.num_cells(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EhdError::Contract(
                "scalar field has non-finite values".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x, y)` at the cell centers.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.num_cells());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.center(i, j);
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
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
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.cell(i, j)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Midpoint-rule integral over the domain.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn dot(&self, other: &ScalarField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_area()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a - b)
    }
    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a + b)
    }
    pub fn scale(&self, s: f64) -> ScalarField {
        self.map(|v| s * v)
    }
    pub fn neg(&self) -> ScalarField {
        self.map(|v| -v)
    }
}

/// Face-centered vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    xcomp: Vec<f64>,
    ycomp: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            xcomp: vec![0.0; grid.num_xfaces()],
            ycomp: vec![0.0; grid.num_yfaces()],
        }
    }

    pub fn from_components(grid: GridSpec, xcomp: Vec<f64>, ycomp: Vec<f64>) -> Result<Self> {
        if xcomp.len() != grid.num_xfaces() || ycomp.len() != grid.num_yfaces() {
            return Err(EhdError::Contract(format!(
                "vector field shape mismatch: x {} (want {}), y {} (want {})",
                xcomp.len(),
                grid.num_xfaces(),
                ycomp.len(),
                grid.num_yfaces()
            )));
        }
        if xcomp.iter().chain(&ycomp).any(|v| !v.is_finite()) {
            return Err(EhdError::Contract(
                "vector field has non-finite values".into(),
            ));
        }
        Ok(Self { grid, xcomp, ycomp })
    }

    /// Samples the normal component of `(fx, fy)` at face midpoints.
    pub fn from_fn(
        grid: GridSpec,
        fx: impl Fn(f64, f64) -> f64,
        fy: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let (hx, hy) = (grid.hx(), grid.hy());
        let mut out = Self::zeros(grid);
        for j in 0..grid.ny() {
            for i in 0..=grid.nx() {
                out.xcomp[grid.xface(i, j)] = fx(i as f64 * hx, (j as f64 + 0.5) * hy);
            }
        }
        for j in 0..=grid.ny() {
            for i in 0..grid.nx() {
                out.ycomp[grid.yface(i, j)] = fy((i as f64 + 0.5) * hx, j as f64 * hy);
            }
        }
        out
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn xcomp(&self) -> &[f64] {
        &self.xcomp
    }
    pub fn ycomp(&self) -> &[f64] {
        &self.ycomp
    }
    pub fn xcomp_mut(&mut self) -> &mut [f64] {
        &mut self.xcomp
    }
    pub fn ycomp_mut(&mut self) -> &mut [f64] {
        &mut self.ycomp
    }
    pub fn components_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.xcomp, &mut self.ycomp)
    }

    pub fn max_abs(&self) -> f64 {
        self.xcomp
            .iter()
            .chain(&self.ycomp)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sets the wall-normal components (first/last x-face columns and
    /// first/last y-face rows) to zero.
    pub fn zero_boundary_normal(&mut self) {
        let g = self.grid;
        for j in 0..g.ny() {
            self.xcomp[g.xface(0, j)] = 0.0;
            self.xcomp[g.xface(g.nx(), j)] = 0.0;
        }
        for i in 0..g.nx() {
            self.ycomp[g.yface(i, 0)] = 0.0;
            self.ycomp[g.yface(i, g.ny())] = 0.0;
        }
    }

    pub fn boundary_normal_max_abs(&self) -> f64 {
        let g = self.grid;
        let mut m: f64 = 0.0;
        for j in 0..g.ny() {
            m = m
                .max(self.xcomp[g.xface(0, j)].abs())
                .max(self.xcomp[g.xface(g.nx(), j)].abs());
        }
        for i in 0..g.nx() {
            m = m
                .max(self.ycomp[g.yface(i, 0)].abs())
                .max(self.ycomp[g.yface(i, g.ny())].abs());
        }
        m
    }

    /// Face inner product with dual-cell weights (boundary faces count half).
    pub fn dot(&self, other: &VectorField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let g = self.grid;
        let mut sum = 0.0;
        for j in 0..g.ny() {
            for i in 0..=g.nx() {
                let k = g.xface(i, j);
                let w = if i == 0 || i == g.nx() { 0.5 } else { 1.0 };
                sum += w * self.xcomp[k] * other.xcomp[k];
            }
        }
        for j in 0..=g.ny() {
            for i in 0..g.nx() {
                let k = g.yface(i, j);
                let w = if j == 0 || j == g.ny() { 0.5 } else { 1.0 };
                sum += w * self.ycomp[k] * other.ycomp[k];
            }
        }
        sum * g.cell_area()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn axpy(&mut self, a: f64, x: &VectorField) {
        debug_assert_eq!(self.grid, x.grid);
        for (s, v) in self.xcomp.iter_mut().zip(&x.xcomp) {
            *s += a * v;
        }
        for (s, v) in self.ycomp.iter_mut().zip(&x.ycomp) {
            *s += a * v;
        }
    }

    pub fn scale(&self, s: f64) -> VectorField {
        Self {
            grid: self.grid,
            xcomp: self.xcomp.iter().map(|v| s * v).collect(),
            ycomp: self.ycomp.iter().map(|v| s * v).collect(),
        }
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(EhdError::Contract(format!("{what} has non-finite values")));
    }
    Ok(())
}

/// Face gradient with the homogeneous Dirichlet extension (ghost = -interior).
pub fn gradient_dirichlet0(s: &ScalarField) -> Result<VectorField> {
    check_finite(s.values(), "gradient input")?;
    let g = *s.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let (hx, hy) = (g.hx(), g.hy());
    let v = s.values();
    let mut out = VectorField::zeros(g);
    for j in 0..ny {
        for i in 0..=nx {
            let left = if i == 0 {
                -v[g.cell(0, j)]
            } else {
                v[g.cell(i - 1, j)]
            };
            let right = if i == nx {
                -v[g.cell(nx - 1, j)]
            } else {
                v[g.cell(i, j)]
            };
            out.xcomp[g.xface(i, j)] = (right - left) / hx;
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            let below = if j == 0 {
                -v[g.cell(i, 0)]
            } else {
                v[g.cell(i, j - 1)]
            };
            let above = if j == ny {
                -v[g.cell(i, ny - 1)]
            } else {
                v[g.cell(i, j)]
            };
            out.ycomp[g.yface(i, j)] = (above - below) / hy;
        }
    }
    Ok(out)
}

/// Face gradient on interior faces; wall-normal components are zero
/// (homogeneous Neumann).
pub fn gradient_neumann(s: &ScalarField) -> VectorField {
    let g = *s.grid();
    let (hx, hy) = (g.hx(), g.hy());
    let v = s.values();
    let mut out = VectorField::zeros(g);
    for j in 0..g.ny() {
        for i in 1..g.nx() {
            out.xcomp[g.xface(i, j)] = (v[g.cell(i, j)] - v[g.cell(i - 1, j)]) / hx;
        }
    }
    for j in 1..g.ny() {
        for i in 0..g.nx() {
            out.ycomp[g.yface(i, j)] = (v[g.cell(i, j)] - v[g.cell(i, j - 1)]) / hy;
        }
    }
    out
}

/// Net outflow per unit cell area.
pub fn divergence(f: &VectorField) -> Result<ScalarField> {
    check_finite(f.xcomp(), "divergence input")?;
    check_finite(f.ycomp(), "divergence input")?;
    let g = *f.grid();
    let (hx, hy) = (g.hx(), g.hy());
    let mut out = ScalarField::zeros(g);
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let dx = (f.xcomp[g.xface(i + 1, j)] - f.xcomp[g.xface(i, j)]) / hx;
            let dy = (f.ycomp[g.yface(i, j + 1)] - f.ycomp[g.yface(i, j)]) / hy;
            out.values[g.cell(i, j)] = dx + dy;
        }
    }
    Ok(out)
}

pub fn laplacian_dirichlet0(s: &ScalarField) -> Result<ScalarField> {
    divergence(&gradient_dirichlet0(s)?)
}

pub fn laplacian_neumann(s: &ScalarField) -> Result<ScalarField> {
    divergence(&gradient_neumann(s))
}

/// Checks that two fields live on the same grid.
pub fn same_grid(a: &GridSpec, b: &GridSpec) -> Result<()> {
    a.check_same(b)
}

/// Arithmetic average of a cell field onto the faces. Wall faces take the
/// adjacent cell value.
pub fn average_to_faces(s: &ScalarField) -> VectorField {
    let g = *s.grid();
    let v = s.values();
    let mut out = VectorField::zeros(g);
    for j in 0..g.ny() {
        for i in 0..=g.nx() {
            let l = v[g.cell(i.saturating_sub(1), j)];
            let r = v[g.cell(i.min(g.nx() - 1), j)];
            out.xcomp[g.xface(i, j)] = 0.5 * (l + r);
        }
    }
    for j in 0..=g.ny() {
        for i in 0..g.nx() {
            let b = v[g.cell(i, j.saturating_sub(1))];
            let a = v[g.cell(i, j.min(g.ny() - 1))];
            out.ycomp[g.yface(i, j)] = 0.5 * (b + a);
        }
    }
    out
}
