use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RbfKernel {
    /// `exp(-(r/eps)^2)` with `eps` the median nearest-neighbour spacing.
    Gaussian,
    /// `r^2 ln r` augmented with a linear polynomial.
    ThinPlate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "kernel")]
pub enum InterpolationKind {
    /// Piecewise linear between neighbouring samples; end segments extend
    /// linearly when extrapolation is allowed.
    #[default]
    Linear,
    Rbf(RbfKernel),
}

impl InterpolationKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(InterpolationKind::Linear),
            "rbf" | "rbf-thin-plate" | "thin-plate" => {
                Some(InterpolationKind::Rbf(RbfKernel::ThinPlate))
            }
            "rbf-gaussian" | "gaussian" => Some(InterpolationKind::Rbf(RbfKernel::Gaussian)),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InterpolationKind::Linear => "linear",
            InterpolationKind::Rbf(RbfKernel::ThinPlate) => "rbf-thin-plate",
            InterpolationKind::Rbf(RbfKernel::Gaussian) => "rbf-gaussian",
        }
    }
}

/// One-dimensional interpolant through `(nodes[i], values[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolant {
    kind: InterpolationKind,
    nodes: Vec<f64>,
    values: Vec<f64>,
    rbf_weights: Vec<f64>,
    poly: [f64; 2],
    shape: f64,
}

fn kernel(k: RbfKernel, r: f64, shape: f64) -> f64 {
    match k {
        RbfKernel::Gaussian => (-(r / shape).powi(2)).exp(),
        RbfKernel::ThinPlate if r > 0.0 => r * r * r.ln(),
        RbfKernel::ThinPlate => 0.0,
    }
}

/// Median distance from each node to its nearest neighbour.
fn median_spacing(sorted: &[f64]) -> f64 {
    let mut d: Vec<f64> = (0..sorted.len())
        .map(|i| {
            let left = if i > 0 {
                sorted[i] - sorted[i - 1]
            } else {
                f64::INFINITY
            };
            let right = if i + 1 < sorted.len() {
                sorted[i + 1] - sorted[i]
            } else {
                f64::INFINITY
            };
            left.min(right)
        })
        .collect();
    d.sort_by(f64::total_cmp);
    let m = d.len();
    if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    }
}

impl Interpolant {
    pub fn new(kind: InterpolationKind, nodes: &[f64], values: &[f64]) -> Result<Self> {
        if nodes.len() != values.len() {
            return Err(Error::invalid(
                "interpolation nodes and values differ in length",
            ));
        }
        if nodes.len() < 2 {
            return Err(Error::invalid(format!(
                "{} interpolation needs at least two samples, got {}",
                kind.as_str(),
                nodes.len()
            )));
        }
        let mut pairs: Vec<(f64, f64)> =
            nodes.iter().copied().zip(values.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("interpolation nodes must be distinct"));
        }
        let nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let values: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let shape = median_spacing(&nodes);
        let mut out = Interpolant {
            kind,
            nodes,
            values,
            rbf_weights: Vec::new(),
            poly: [0.0; 2],
            shape,
        };
        if let InterpolationKind::Rbf(k) = kind {
            out.fit_rbf(k)?;
        }
        Ok(out)
    }

    fn fit_rbf(&mut self, k: RbfKernel) -> Result<()> {
        let n = self.nodes.len();
        let extra = if k == RbfKernel::ThinPlate { 2 } else { 0 };
        let mut a = DMatrix::zeros(n + extra, n + extra);
        let mut rhs = DVector::zeros(n + extra);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = kernel(k, (self.nodes[i] - self.nodes[j]).abs(), self.shape);
            }
            if extra > 0 {
                a[(i, n)] = 1.0;
                a[(i, n + 1)] = self.nodes[i];
                a[(n, i)] = 1.0;
                a[(n + 1, i)] = self.nodes[i];
            }
            rhs[i] = self.values[i];
        }
        let sol = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::DegenerateInput("singular RBF interpolation matrix".into()))?;
        self.rbf_weights = sol.rows(0, n).iter().copied().collect();
        if extra > 0 {
            self.poly = [sol[n], sol[n + 1]];
        }
        Ok(())
    }

    pub fn kind(&self) -> InterpolationKind {
        self.kind
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.kind {
            InterpolationKind::Linear => {
                let n = self.nodes.len();
                let i = self.nodes.partition_point(|&t| t <= x).clamp(1, n - 1);
                let (x0, x1) = (self.nodes[i - 1], self.nodes[i]);
                let t = (x - x0) / (x1 - x0);
                self.values[i - 1] + t * (self.values[i] - self.values[i - 1])
            }
            InterpolationKind::Rbf(k) => {
                let s: f64 = self
                    .nodes
                    .iter()
                    .zip(&self.rbf_weights)
                    .map(|(xi, w)| w * kernel(k, (x - xi).abs(), self.shape))
                    .sum();
                s + self.poly[0] + self.poly[1] * x
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KINDS: [InterpolationKind; 3] = [
        InterpolationKind::Linear,
        InterpolationKind::Rbf(RbfKernel::Gaussian),
        InterpolationKind::Rbf(RbfKernel::ThinPlate),
    ];

    #[test]
    fn passes_through_samples() {
        let x = [3.0, 3.4, 3.2, 4.1, 5.0];
        let y = [1.0, -2.0, 0.5, 7.0, 3.0];
        for kind in KINDS {
            let f = Interpolant::new(kind, &x, &y).unwrap();
            for (xi, yi) in x.iter().zip(&y) {
                assert!((f.eval(*xi) - yi).abs() < 1e-10, "{kind:?} at {xi}");
            }
        }
    }

    #[test]
    fn linear_and_thin_plate_reproduce_lines() {
        let x: Vec<f64> = (0..6).map(|i| 3.0 + 0.4 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|t| 2.0 * t - 1.0).collect();
        for kind in [KINDS[0], KINDS[2]] {
            let f = Interpolant::new(kind, &x, &y).unwrap();
            for t in [3.1, 3.77, 4.9] {
                assert!((f.eval(t) - (2.0 * t - 1.0)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shape_is_median_spacing() {
        assert_eq!(median_spacing(&[0.0, 1.0, 3.0, 6.0]), 1.5);
        assert_eq!(median_spacing(&[0.0, 0.5, 1.0]), 0.5);
    }

    #[test]
    fn needs_two_distinct_nodes() {
        for kind in KINDS {
            assert!(Interpolant::new(kind, &[1.0], &[2.0]).is_err());
            assert!(Interpolant::new(kind, &[1.0, 1.0], &[2.0, 3.0]).is_err());
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in KINDS {
            assert_eq!(InterpolationKind::parse(kind.as_str()), Some(kind));
        }
    }
}
