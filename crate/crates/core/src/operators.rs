//! Discrete operators on cell-centred states: the boundary functional
//! `K[p] = int q p`, the upwind transport operator `L`, the coagulation
//! operator `N` and its Fréchet derivative.
//!
//! All integrals use the midpoint rule on the state grid, so the pair
//! table behind `N` and `DN` lines up with the state values and the
//! bilinearity identity `DN(u)[u] = 2 N[u]` holds to rounding.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::CoefficientSet;
use crate::quad::Mesh;

/// Density samples at the cell centres of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    values: Vec<f64>,
    /// Set for vectors that may legitimately carry negative entries
    /// (differences, probes in linear-algebra checks).
    signed: bool,
}

impl StateVector {
    pub fn new(values: Vec<f64>) -> Self {
        StateVector {
            values,
            signed: false,
        }
    }

    pub fn signed(values: Vec<f64>) -> Self {
        StateVector {
            values,
            signed: true,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    /// Samples `f` at the cell centres.
    pub fn sample<F: FnMut(f64) -> f64>(mesh: &Mesh, f: F) -> Self {
        Self::new(mesh.centers().iter().copied().map(f).collect())
    }

    pub fn try_sample<F, E>(mesh: &Mesh, f: F) -> Result<Self, E>
    where
        F: FnMut(f64) -> Result<f64, E>,
    {
        Ok(Self::new(
            mesh.centers()
                .iter()
                .copied()
                .map(f)
                .collect::<Result<_, E>>()?,
        ))
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

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        StateVector {
            values: self.values.iter().map(|v| alpha * v).collect(),
            signed: self.signed,
        }
    }

    /// `self + alpha * other`
    pub fn axpy(&self, alpha: f64, other: &StateVector) -> Self {
        StateVector {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + alpha * b)
                .collect(),
            signed: self.signed || other.signed || alpha < 0.0,
        }
    }

    /// Piecewise-linear interpolant through the centre values, constant
    /// beyond the first and last centre.
    pub fn interpolate(&self, mesh: &Mesh, x: f64) -> f64 {
        let c = mesh.centers();
        let n = c.len();
        if x <= c[0] {
            return self.values[0];
        }
        if x >= c[n - 1] {
            return self.values[n - 1];
        }
        let k = c.partition_point(|&ck| ck <= x) - 1;
        let s = (x - c[k]) / (c[k + 1] - c[k]);
        self.values[k] + s * (self.values[k + 1] - self.values[k])
    }
}

/// Weighted L1 norm `sum |p_i| dx_i`.
pub fn l1_norm(mesh: &Mesh, p: &StateVector) -> f64 {
    p.values()
        .iter()
        .zip(mesh.widths())
        .map(|(v, w)| v.abs() * w)
        .sum()
}

/// `(int p, int x p)` by the midpoint rule.
pub fn moments(mesh: &Mesh, p: &StateVector) -> (f64, f64) {
    let mut number = 0.0;
    let mut mass = 0.0;
    for ((v, w), c) in p.values().iter().zip(mesh.widths()).zip(mesh.centers()) {
        number += v * w;
        mass += c * v * w;
    }
    (number, mass)
}

/// Gain and loss parts of the coagulation operator.
#[derive(Debug, Clone, PartialEq)]
pub struct CoagulationSplit {
    pub gain: StateVector,
    pub loss: StateVector,
}

impl CoagulationSplit {
    pub fn total(&self) -> StateVector {
        self.gain.axpy(-1.0, &self.loss)
    }
}

/// Truncated kernel on the centre grid and the nearest-cell deposition
/// table, grouped by target cell.
#[derive(Debug, Clone)]
struct KernelTable {
    n: usize,
    /// row-major `beta(c_i, c_j)`, already truncated and symmetrized
    beta: Vec<f64>,
    /// for row `i`, the columns `j < row_len[i]` may be non-zero
    row_len: Vec<usize>,
    /// CSR over target cells: pairs `(i, j)` with `i <= j` depositing there
    target_start: Vec<usize>,
    pairs: Vec<(u32, u32, f64)>,
    sup: f64,
}

impl KernelTable {
    fn build(cs: &CoefficientSet, mesh: &Mesh) -> Result<Self> {
        let n = mesh.n();
        let c = mesh.centers();
        let dx = mesh.widths();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| cs.beta_eval(c[i], c[j]).map_err(Error::from))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let mut beta = Vec::with_capacity(n * n);
        let mut row_len = Vec::with_capacity(n);
        let mut sup: f64 = 0.0;
        for row in &rows {
            let len = row.iter().rposition(|&b| b != 0.0).map_or(0, |j| j + 1);
            row_len.push(len);
            for &b in row {
                sup = sup.max(b.abs());
            }
            beta.extend_from_slice(row);
        }

        let mut buckets: Vec<Vec<(u32, u32, f64)>> = vec![Vec::new(); n];
        for i in 0..n {
            for j in i..row_len[i] {
                let b = beta[i * n + j];
                if b == 0.0 {
                    continue;
                }
                let k = mesh
                    .locate(c[i] + c[j])
                    .expect("untruncated pair lies inside the domain");
                let coef = 0.5 * b * dx[i] * dx[j] / dx[k];
                buckets[k].push((i as u32, j as u32, coef));
            }
        }
        let mut target_start = Vec::with_capacity(n + 1);
        let mut pairs = Vec::new();
        for bucket in buckets {
            target_start.push(pairs.len());
            pairs.extend(bucket);
        }
        target_start.push(pairs.len());
        Ok(KernelTable {
            n,
            beta,
            row_len,
            target_start,
            pairs,
            sup,
        })
    }

    /// Symmetric bilinear gain `G(a, b)`; `G(p, p)` is the gain term of `N[p]`.
    fn gain(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        (0..self.n)
            .into_par_iter()
            .map(|k| {
                let mut acc = 0.0;
                for &(i, j, coef) in &self.pairs[self.target_start[k]..self.target_start[k + 1]] {
                    let (i, j) = (i as usize, j as usize);
                    let prod = if i == j {
                        a[i] * b[i]
                    } else {
                        a[i] * b[j] + a[j] * b[i]
                    };
                    acc += coef * prod;
                }
                acc
            })
            .collect()
    }

    /// `sum_j beta_ij p_j dx_j` for every row `i`.
    fn loss_rate(&self, p: &[f64], dx: &[f64]) -> Vec<f64> {
        (0..self.n)
            .into_par_iter()
            .map(|i| {
                let row = &self.beta[i * self.n..i * self.n + self.row_len[i]];
                let mut acc = 0.0;
                for (j, &b) in row.iter().enumerate() {
                    acc += b * p[j] * dx[j];
                }
                acc
            })
            .collect()
    }
}

/// Coefficients sampled on a mesh plus the coagulation pair table.
#[derive(Debug, Clone)]
pub struct Discretization {
    mesh: Mesh,
    g: Vec<f64>,
    w: Vec<f64>,
    q: Vec<f64>,
    kernel: Option<KernelTable>,
}

impl Discretization {
    /// Samples the coefficients and builds the O(n^2) kernel table. A kernel
    /// written as the literal `0` skips the table.
    pub fn new(cs: &CoefficientSet, mesh: &Mesh) -> Result<Self> {
        let mut d = Self::linear(cs, mesh)?;
        if cs.beta_expr().as_constant() != Some(0.0) {
            d.kernel = Some(KernelTable::build(cs, mesh)?);
        }
        Ok(d)
    }

    /// Transport, removal and boundary only; coagulation acts as zero.
    pub fn linear(cs: &CoefficientSet, mesh: &Mesh) -> Result<Self> {
        let sample = |f: &dyn Fn(f64) -> Result<f64, crate::expr::EvalError>| {
            mesh.centers()
                .iter()
                .map(|&x| f(x))
                .collect::<Result<Vec<_>, _>>()
        };
        Ok(Discretization {
            mesh: mesh.clone(),
            g: sample(&|x| cs.g(x))?,
            w: sample(&|x| cs.w(x))?,
            q: sample(&|x| cs.q(x))?,
            kernel: None,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn growth(&self) -> &[f64] {
        &self.g
    }

    pub fn removal(&self) -> &[f64] {
        &self.w
    }

    pub fn fecundity(&self) -> &[f64] {
        &self.q
    }

    pub fn has_kernel(&self) -> bool {
        self.kernel.is_some()
    }

    /// Largest kernel value on the centre grid.
    pub fn kernel_sup(&self) -> f64 {
        self.kernel.as_ref().map_or(0.0, |k| k.sup)
    }

    fn check(&self, p: &StateVector) -> Result<()> {
        if p.len() != self.mesh.n() {
            return Err(Error::MeshMismatch {
                left: p.len(),
                right: self.mesh.n(),
            });
        }
        Ok(())
    }

    /// `K[p] = int q p`, the boundary flux `g(x0) p(x0)`.
    pub fn boundary_inflow(&self, p: &StateVector) -> Result<f64> {
        self.check(p)?;
        Ok(p.values()
            .iter()
            .zip(&self.q)
            .zip(self.mesh.widths())
            .map(|((v, q), w)| q * v * w)
            .sum())
    }

    /// Flux leaving through `x1`.
    pub fn outflow(&self, p: &StateVector) -> f64 {
        let n = self.mesh.n();
        self.g[n - 1] * p.values()[n - 1]
    }

    /// Upwind finite-volume `-(g p)' - w p`. Face fluxes carry the donor
    /// cell's `g p`; the inflow face carries `K[p]`.
    pub fn linear_apply(&self, p: &StateVector) -> Result<StateVector> {
        let inflow = self.boundary_inflow(p)?;
        let dx = self.mesh.widths();
        let v = p.values();
        let mut upstream = inflow;
        let out = (0..v.len())
            .map(|i| {
                let flux = self.g[i] * v[i];
                let r = -(flux - upstream) / dx[i] - self.w[i] * v[i];
                upstream = flux;
                r
            })
            .collect();
        Ok(StateVector {
            values: out,
            signed: true,
        })
    }

    pub fn coagulation_split(&self, p: &StateVector) -> Result<CoagulationSplit> {
        self.check(p)?;
        let n = self.mesh.n();
        let Some(kernel) = &self.kernel else {
            return Ok(CoagulationSplit {
                gain: StateVector::zeros(n),
                loss: StateVector::zeros(n),
            });
        };
        let v = p.values();
        let gain = kernel.gain(v, v);
        let rate = kernel.loss_rate(v, self.mesh.widths());
        let loss = v.iter().zip(&rate).map(|(a, r)| a * r).collect();
        Ok(CoagulationSplit {
            gain: StateVector::new(gain),
            loss: StateVector::new(loss),
        })
    }

    /// `N[p]`: nearest-cell deposition gain minus loss.
    pub fn coagulation(&self, p: &StateVector) -> Result<StateVector> {
        let split = self.coagulation_split(p)?;
        let mut out = split.total();
        out.signed = true;
        Ok(out)
    }

    /// `DN(u)[h] = 2 G(u, h) - h * loss_rate(u) - u * loss_rate(h)`.
    pub fn frechet_apply(&self, u: &StateVector, h: &StateVector) -> Result<StateVector> {
        self.check(u)?;
        self.check(h)?;
        let n = self.mesh.n();
        let Some(kernel) = &self.kernel else {
            return Ok(StateVector::signed(vec![0.0; n]));
        };
        let dx = self.mesh.widths();
        let gain = kernel.gain(u.values(), h.values());
        let ru = kernel.loss_rate(u.values(), dx);
        let rh = kernel.loss_rate(h.values(), dx);
        let out = (0..n)
            .map(|i| 2.0 * gain[i] - h.values()[i] * ru[i] - u.values()[i] * rh[i])
            .collect();
        Ok(StateVector::signed(out))
    }

    /// `1/2 sum_ij beta_ij p_i p_j dx_i dx_j`, the rate at which aggregation
    /// removes aggregates.
    pub fn pair_rate(&self, p: &StateVector) -> Result<f64> {
        self.check(p)?;
        let Some(kernel) = &self.kernel else {
            return Ok(0.0);
        };
        let dx = self.mesh.widths();
        let rate = kernel.loss_rate(p.values(), dx);
        Ok(0.5
            * p.values()
                .iter()
                .zip(&rate)
                .zip(dx)
                .map(|((v, r), w)| v * r * w)
                .sum::<f64>())
    }
}
