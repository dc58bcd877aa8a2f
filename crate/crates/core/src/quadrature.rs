//! Composite Gauss–Legendre rules.

use gauss_quad::legendre::GaussLegendre;
use std::num::NonZeroUsize;

/// Nodes per panel for every composite rule built here.
pub const PANEL_NODES: usize = 16;

/// A one-dimensional quadrature rule as parallel node/weight vectors.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

fn reference(n: usize) -> GaussLegendre {
    GaussLegendre::new(NonZeroUsize::new(n.max(1)).unwrap())
}

/// Composite rule on `[a, b]` with `panels` equal panels of `per_panel` nodes.
pub fn composite(a: f64, b: f64, panels: usize, per_panel: usize) -> Rule {
    let gl = reference(per_panel);
    let pairs = gl.as_node_weight_pairs();
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * pairs.len());
    let mut weights = Vec::with_capacity(panels * pairs.len());
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for &(t, w) in pairs {
            nodes.push(lo + 0.5 * h * (t + 1.0));
            weights.push(0.5 * h * w);
        }
    }
    Rule { nodes, weights }
}

/// Panel count that resolves `max_frequency` cycles over the interval with one
/// panel per cycle at least, rounded up to a multiple of `align` so panel edges
/// fall on every cell boundary of a piecewise-constant coefficient.
pub fn panels_for(max_frequency: f64, align: usize) -> usize {
    let align = align.max(1);
    let need = (max_frequency.max(0.0).ceil() as usize + 1).max(1);
    need.div_ceil(align) * align
}

/// Gauss–Legendre nodes and weights mapped onto `[0, 1]`.
pub fn unit_rule(n: usize) -> Rule {
    composite(0.0, 1.0, 1, n)
}
