//! Central finite-difference verification of analytic gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Var};
use super::matrix::Matrix;
use super::params::ParamStore;

/// Anything exposing a scalar loss over a list of tensors together with the
/// loss gradient for each tensor.
pub trait Differentiable {
    fn num_tensors(&self) -> usize;
    fn tensor(&self, i: usize) -> &Matrix;
    fn tensor_mut(&mut self, i: usize) -> &mut Matrix;
    fn loss(&self) -> f64;
    /// Analytic gradients, one per tensor, same shapes.
    fn gradients(&self) -> Vec<Matrix>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(tensor, flat element)` of the largest error.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    pub finite: bool,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.finite && self.max_rel_error <= self.tolerance
    }
}

/// Relative error `|a - n| / max(|a|, |n|, floor)`. The floor keeps
/// near-zero gradients from turning roundoff into large ratios.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    const FLOOR: f64 = 1e-3;
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Compares analytic gradients against central differences
/// `(f(x + eps) - f(x - eps)) / 2 eps` on every element (or on at most
/// `max_per_tensor` seeded-random elements of each tensor).
pub fn grad_check_sampled(
    module: &mut dyn Differentiable,
    epsilon: f64,
    tolerance: f64,
    max_per_tensor: Option<usize>,
) -> GradCheckReport {
    let analytic = module.gradients();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        finite: module.loss().is_finite() && analytic.iter().all(Matrix::all_finite),
        tolerance,
    };
    if !report.finite {
        report.max_rel_error = f64::INFINITY;
        return report;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37);
    for t in 0..module.num_tensors() {
        let n = module.tensor(t).len();
        let elems: Vec<usize> = match max_per_tensor {
            Some(k) if k < n => rand::seq::index::sample(&mut rng, n, k).into_vec(),
            _ => (0..n).collect(),
        };
        for e in elems {
            let orig = module.tensor(t).data()[e];
            module.tensor_mut(t).data_mut()[e] = orig + epsilon;
            let plus = module.loss();
            module.tensor_mut(t).data_mut()[e] = orig - epsilon;
            let minus = module.loss();
            module.tensor_mut(t).data_mut()[e] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            if !numeric.is_finite() {
                report.finite = false;
                report.max_rel_error = f64::INFINITY;
                report.worst = Some((t, e));
                return report;
            }
            let err = relative_error(analytic[t].data()[e], numeric);
            report.checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((t, e));
            }
        }
    }
    report
}

pub fn grad_check(module: &mut dyn Differentiable, epsilon: f64, tolerance: f64) -> GradCheckReport {
    grad_check_sampled(module, epsilon, tolerance, None)
}

type BuildFn = dyn Fn(&mut Graph, &[Var]) -> Var;

/// Adapts a graph-building closure into a [`Differentiable`]. The tensors
/// are the store's parameters followed by the inputs. A non-scalar output is
/// reduced to `sum(out * R)` with a fixed random `R`, so every output
/// element contributes a distinct weight to the checked gradient.
pub struct GraphModule {
    pub params: ParamStore,
    pub inputs: Vec<Matrix>,
    build: Box<BuildFn>,
    seed: u64,
}

impl GraphModule {
    pub fn new(
        params: ParamStore,
        inputs: Vec<Matrix>,
        build: impl Fn(&mut Graph, &[Var]) -> Var + 'static,
    ) -> Self {
        GraphModule {
            params,
            inputs,
            build: Box::new(build),
            seed: 17,
        }
    }

    fn run(&self, want_grads: bool) -> (f64, Vec<Matrix>) {
        let mut g = Graph::new(&self.params);
        let param_vars: Vec<Var> = self.params.iter().map(|(id, _)| g.param(id)).collect();
        let input_vars: Vec<Var> = self.inputs.iter().map(|m| g.leaf(m.clone())).collect();
        let out = (self.build)(&mut g, &input_vars);
        let (rows, cols) = g.shape(out);
        let loss = if (rows, cols) == (1, 1) {
            out
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let proj = g.leaf(Matrix::uniform(rows, cols, 1.0, &mut rng));
            let weighted = g.mul(out, proj);
            g.sum(weighted)
        };
        let value = g.scalar(loss);
        if !want_grads {
            return (value, Vec::new());
        }
        let grads = g.backward(loss);
        let mut all = Vec::new();
        for (v, (_, p)) in param_vars.iter().zip(self.params.iter()) {
            all.push(
                grads
                    .wrt(*v)
                    .cloned()
                    .unwrap_or_else(|| Matrix::zeros(p.value.rows(), p.value.cols())),
            );
        }
        for (v, m) in input_vars.iter().zip(&self.inputs) {
            all.push(
                grads
                    .wrt(*v)
                    .cloned()
                    .unwrap_or_else(|| Matrix::zeros(m.rows(), m.cols())),
            );
        }
        (value, all)
    }
}

impl Differentiable for GraphModule {
    fn num_tensors(&self) -> usize {
        self.params.len() + self.inputs.len()
    }

    fn tensor(&self, i: usize) -> &Matrix {
        let np = self.params.len();
        if i < np {
            self.params.value(super::params::ParamId(i))
        } else {
            &self.inputs[i - np]
        }
    }

    fn tensor_mut(&mut self, i: usize) -> &mut Matrix {
        let np = self.params.len();
        if i < np {
            self.params.value_mut(super::params::ParamId(i))
        } else {
            &mut self.inputs[i - np]
        }
    }

    fn loss(&self) -> f64 {
        self.run(false).0
    }

    fn gradients(&self) -> Vec<Matrix> {
        self.run(true).1
    }
}
