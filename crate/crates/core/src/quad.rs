//! Meshes on `[x0, x1]`, composite Gauss-Legendre quadrature and
//! cumulative integral tables with a monotone cubic interpolant.

use crate::error::{Error, Result};

/// Smallest accepted cell count.
pub const MIN_CELLS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grading {
    Uniform,
    Geometric,
}

impl std::str::FromStr for Grading {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Grading::Uniform),
            "geometric" => Ok(Grading::Geometric),
            _ => Err(Error::Argument(format!(
                "unknown grading `{s}` (expected uniform or geometric)"
            ))),
        }
    }
}

impl std::fmt::Display for Grading {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Grading::Uniform => "uniform",
            Grading::Geometric => "geometric",
        })
    }
}

/// A partition of `[x0, x1]` into `n` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<f64>,
    centers: Vec<f64>,
    widths: Vec<f64>,
    grading: Grading,
}

impl Mesh {
    pub fn new(x0: f64, x1: f64, n: usize, grading: Grading) -> Result<Self> {
        if n < MIN_CELLS {
            return Err(Error::MeshTooSmall { n, min: MIN_CELLS });
        }
        if !(x1 > x0 && x0.is_finite() && x1.is_finite()) {
            return Err(Error::Domain { x0, x1 });
        }
        let mut nodes: Vec<f64> = match grading {
            Grading::Uniform => {
                let h = (x1 - x0) / n as f64;
                (0..=n).map(|k| x0 + k as f64 * h).collect()
            }
            Grading::Geometric => {
                if x0 <= 0.0 {
                    return Err(Error::Domain { x0, x1 });
                }
                let log_ratio = (x1 / x0).ln() / n as f64;
                (0..=n).map(|k| x0 * (k as f64 * log_ratio).exp()).collect()
            }
        };
        nodes[0] = x0;
        nodes[n] = x1;
        Ok(Self::from_nodes_unchecked(nodes, grading))
    }

    fn from_nodes_unchecked(nodes: Vec<f64>, grading: Grading) -> Self {
        let centers = nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let widths = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        Mesh {
            nodes,
            centers,
            widths,
            grading,
        }
    }

    pub fn for_coefficients(
        cs: &crate::model::CoefficientSet,
        n: usize,
        grading: Grading,
    ) -> Result<Self> {
        Self::new(cs.x0(), cs.x1(), n, grading)
    }

    pub fn n(&self) -> usize {
        self.widths.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn grading(&self) -> Grading {
        self.grading
    }

    pub fn x0(&self) -> f64 {
        self.nodes[0]
    }

    pub fn x1(&self) -> f64 {
        self.nodes[self.n()]
    }

    pub fn min_width(&self) -> f64 {
        self.widths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_width(&self) -> f64 {
        self.widths.iter().copied().fold(0.0, f64::max)
    }

    /// Index of the cell containing `x` (right-closed on the last cell).
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !(x >= self.x0() && x <= self.x1()) {
            return None;
        }
        let k = self.nodes.partition_point(|&node| node <= x);
        Some(k.saturating_sub(1).min(self.n() - 1))
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    abscissae: Vec<f64>,
    weights: Vec<f64>,
}

pub const DEFAULT_ORDER: usize = 4;

impl GaussLegendre {
    /// Newton iteration on the Legendre three-term recurrence.
    pub fn new(order: usize) -> Result<Self> {
        if !(1..=64).contains(&order) {
            return Err(Error::Argument(format!(
                "quadrature order must be in 1..=64, got {order}"
            )));
        }
        let n = order;
        let mut abscissae = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, 0.0);
                for j in 0..n {
                    let p2 = p1;
                    p1 = p0;
                    p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
                }
                dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
                let dz = p0 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            abscissae[i] = -z;
            abscissae[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            abscissae[n / 2] = 0.0;
        }
        Ok(GaussLegendre { abscissae, weights })
    }

    pub fn order(&self) -> usize {
        self.weights.len()
    }

    /// Abscissae and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.abscissae
            .iter()
            .zip(&self.weights)
            .map(move |(&z, &w)| (mid + half * z, half * w))
    }

    pub fn try_integrate<F, E>(&self, a: f64, b: f64, mut f: F) -> Result<f64, E>
    where
        F: FnMut(f64) -> Result<f64, E>,
    {
        let mut sum = 0.0;
        for (x, w) in self.mapped(a, b) {
            sum += w * f(x)?;
        }
        Ok(sum)
    }
}

/// Pairwise (tree) summation; the reduction order depends only on the length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Composite Gauss-Legendre integral of `f` over the whole mesh.
pub fn try_integrate<F, E>(f: F, mesh: &Mesh, rule: &GaussLegendre) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let per_cell = cell_integrals(f, mesh, rule)?;
    Ok(pairwise_sum(&per_cell))
}

pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, mesh: &Mesh, rule: &GaussLegendre) -> f64 {
    try_integrate(|x| Ok::<_, std::convert::Infallible>(f(x)), mesh, rule)
        .unwrap_or_else(|e| match e {})
}

fn cell_integrals<F, E>(mut f: F, mesh: &Mesh, rule: &GaussLegendre) -> Result<Vec<f64>, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    mesh.nodes()
        .windows(2)
        .map(|w| rule.try_integrate(w[0], w[1], &mut f))
        .collect()
}

/// Running integral `F(x) = int_{x0}^{x} f` on the mesh nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeTable {
    nodes: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

/// Builds the cumulative table of `f`. Between nodes the table is a cubic
/// Hermite interpolant using `f` at the nodes as slopes, limited with the
/// Fritsch-Carlson rule when the data are monotone.
pub fn try_cumulative<F, E>(
    mut f: F,
    mesh: &Mesh,
    rule: &GaussLegendre,
) -> Result<CumulativeTable, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let per_cell = cell_integrals(&mut f, mesh, rule)?;
    let mut values = Vec::with_capacity(mesh.n() + 1);
    values.push(0.0);
    let mut acc = 0.0;
    for c in per_cell {
        acc += c;
        values.push(acc);
    }
    let slopes = mesh
        .nodes()
        .iter()
        .map(|&x| f(x))
        .collect::<Result<Vec<_>, E>>()?;
    Ok(CumulativeTable::from_parts(
        mesh.nodes().to_vec(),
        values,
        slopes,
    ))
}

pub fn cumulative<F: FnMut(f64) -> f64>(
    mut f: F,
    mesh: &Mesh,
    rule: &GaussLegendre,
) -> CumulativeTable {
    try_cumulative(|x| Ok::<_, std::convert::Infallible>(f(x)), mesh, rule)
        .unwrap_or_else(|e| match e {})
}

impl CumulativeTable {
    fn from_parts(nodes: Vec<f64>, values: Vec<f64>, mut slopes: Vec<f64>) -> Self {
        let increasing = values.windows(2).all(|v| v[1] >= v[0]);
        let decreasing = values.windows(2).all(|v| v[1] <= v[0]);
        if increasing || decreasing {
            for k in 0..nodes.len() - 1 {
                let h = nodes[k + 1] - nodes[k];
                let secant = (values[k + 1] - values[k]) / h;
                if secant == 0.0 {
                    slopes[k] = 0.0;
                    slopes[k + 1] = 0.0;
                    continue;
                }
                if slopes[k] * secant < 0.0 {
                    slopes[k] = 0.0;
                }
                if slopes[k + 1] * secant < 0.0 {
                    slopes[k + 1] = 0.0;
                }
                let a = slopes[k] / secant;
                let b = slopes[k + 1] / secant;
                let r = a * a + b * b;
                if r > 9.0 {
                    let tau = 3.0 / r.sqrt();
                    slopes[k] = tau * a * secant;
                    slopes[k + 1] = tau * b * secant;
                }
            }
        }
        CumulativeTable {
            nodes,
            values,
            slopes,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `F(x1)`.
    pub fn total(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    fn interval(&self, x: f64) -> usize {
        let k = self.nodes.partition_point(|&node| node <= x);
        k.saturating_sub(1).min(self.nodes.len() - 2)
    }

    fn hermite(&self, k: usize, x: f64) -> f64 {
        let h = self.nodes[k + 1] - self.nodes[k];
        let s = (x - self.nodes[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.values[k]
            + h10 * h * self.slopes[k]
            + h01 * self.values[k + 1]
            + h11 * h * self.slopes[k + 1]
    }

    /// Interpolated `F(x)`; `x` is clamped to the table range.
    pub fn eval(&self, x: f64) -> f64 {
        let lo = self.nodes[0];
        let hi = self.nodes[self.nodes.len() - 1];
        if x <= lo {
            return self.values[0];
        }
        if x >= hi {
            return self.total();
        }
        self.hermite(self.interval(x), x)
    }

    /// Solves `F(x) = tau` for a strictly increasing table by bisection on
    /// the interpolant.
    pub fn inverse(&self, tau: f64) -> Result<f64> {
        let last = self.values.len() - 1;
        let (lo, hi) = (self.values[0], self.values[last]);
        if !(tau >= lo && tau <= hi) {
            return Err(Error::OutOfRange { value: tau, lo, hi });
        }
        if tau == lo {
            return Ok(self.nodes[0]);
        }
        if tau == hi {
            return Ok(self.nodes[last]);
        }
        let k = self
            .values
            .partition_point(|&v| v <= tau)
            .saturating_sub(1)
            .min(last - 1);
        let (mut a, mut b) = (self.nodes[k], self.nodes[k + 1]);
        if self.values[k] == tau {
            return Ok(a);
        }
        loop {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let fm = self.hermite(k, m);
            if fm == tau {
                return Ok(m);
            }
            if fm < tau {
                a = m;
            } else {
                b = m;
            }
        }
        let (fa, fb) = (self.hermite(k, a), self.hermite(k, b));
        Ok(if (tau - fa).abs() <= (fb - tau).abs() {
            a
        } else {
            b
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_and_geometric_nodes() {
        let m = Mesh::new(1.0, 1000.0, 4, Grading::Uniform).unwrap();
        assert_eq!(m.nodes(), &[1.0, 250.75, 500.5, 750.25, 1000.0]);
        let g = Mesh::new(1.0, 1000.0, 3, Grading::Geometric).unwrap();
        for (a, b) in g.nodes().iter().zip([1.0, 10.0, 100.0, 1000.0]) {
            assert!((a - b).abs() <= 1e-12 * b, "{a} vs {b}");
        }
        for m in [m, g] {
            let total: f64 = m.widths().iter().sum();
            assert!((total - 999.0).abs() <= 1e-12 * 999.0);
            assert!(m.widths().iter().all(|&w| w > 0.0));
        }
        assert!(matches!(
            Mesh::new(1.0, 2.0, 2, Grading::Uniform),
            Err(Error::MeshTooSmall { n: 2, .. })
        ));
    }

    #[test]
    fn locate_cells() {
        let m = Mesh::new(0.0, 4.0, 4, Grading::Uniform).unwrap();
        assert_eq!(m.locate(0.0), Some(0));
        assert_eq!(m.locate(1.0), Some(1));
        assert_eq!(m.locate(3.5), Some(3));
        assert_eq!(m.locate(4.0), Some(3));
        assert_eq!(m.locate(4.5), None);
    }

    #[test]
    fn gauss_rule_exactness() {
        for order in 1..=8 {
            let rule = GaussLegendre::new(order).unwrap();
            let wsum: f64 = rule.weights.iter().sum();
            assert!((wsum - 2.0).abs() < 1e-14);
            for p in 0..(2 * order) {
                let exact = (2f64.powi(p as i32 + 1) - 1.0) / (p as f64 + 1.0);
                let got = rule
                    .try_integrate(1.0, 2.0, |x| Ok::<_, ()>(x.powi(p as i32)))
                    .unwrap();
                assert!((got - exact).abs() <= 1e-12 * exact, "order {order} p {p}");
            }
        }
    }

    #[test]
    fn simple_integrals() {
        let rule = GaussLegendre::new(DEFAULT_ORDER).unwrap();
        let m = Mesh::new(1.0, 1000.0, 10, Grading::Uniform).unwrap();
        assert!((integrate(|_| 1.0, &m, &rule) - 999.0).abs() <= 1e-12 * 999.0);
        let m = Mesh::new(1.0, 2.0, 4, Grading::Uniform).unwrap();
        assert!((integrate(|x| x, &m, &rule) - 1.5).abs() <= 1e-12 * 1.5);
    }

    #[test]
    fn cumulative_and_inverse_for_unit_growth() {
        let rule = GaussLegendre::new(DEFAULT_ORDER).unwrap();
        let m = Mesh::new(1.0, 2.0, 8, Grading::Uniform).unwrap();
        let gamma = cumulative(|_| 1.0, &m, &rule);
        assert_eq!(gamma.eval(1.0), 0.0);
        assert!((gamma.total() - 1.0).abs() < 1e-14);
        assert!((gamma.eval(1.3) - 0.3).abs() < 1e-14);
        assert!((gamma.inverse(0.5).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(gamma.inverse(0.0).unwrap(), 1.0);
        assert!(matches!(gamma.inverse(1.5), Err(Error::OutOfRange { .. })));
        assert!(gamma.inverse(-0.1).is_err());
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let v: Vec<f64> = (0..100).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&v), 4950.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
