//! Weighted-average ensembles of component networks and the
//! error/ambiguity decomposition of their squared error.

use crate::clustering::ClusterAssignment;
use crate::data::{argmax, Dataset};
use crate::error::{check_len, Error, Result};
use crate::network::{forward_into, Topology};
use crate::swarm::{cluster_bests, Swarm};

/// Tolerance on the weight simplex constraint.
const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    topology: Topology,
    components: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl Ensemble {
    /// Equally weighted ensemble.
    pub fn uniform(topology: Topology, components: Vec<Vec<f64>>) -> Result<Self> {
        let k = components.len();
        Self::weighted(topology, components, vec![1.0 / k as f64; k])
    }

    /// Weights must be non-negative and sum to one.
    pub fn weighted(topology: Topology, components: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidConfig("an ensemble needs at least one component".into()));
        }
        check_len(components.len(), weights.len())?;
        for c in &components {
            check_len(topology.dimension(), c.len())?;
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) || (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "ensemble weights {weights:?} are not a convex combination"
            )));
        }
        Ok(Self {
            topology,
            components,
            weights,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Output vectors of every component on one input.
    fn component_outputs(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut hidden = vec![0.0; self.topology.n_hidden()];
        self.components
            .iter()
            .map(|c| {
                let mut out = vec![0.0; self.topology.n_outputs()];
                forward_into(c, &self.topology, input, &mut hidden, &mut out);
                out
            })
            .collect()
    }

    fn combine(&self, outputs: &[Vec<f64>]) -> Vec<f64> {
        let mut combined = vec![0.0; self.topology.n_outputs()];
        for (out, w) in outputs.iter().zip(&self.weights) {
            for (f, o) in combined.iter_mut().zip(out) {
                *f += w * o;
            }
        }
        combined
    }

    /// Weighted average of the component outputs.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_len(self.topology.n_inputs(), input.len())?;
        Ok(self.combine(&self.component_outputs(input)))
    }

    /// Class with the largest averaged output; ties go to the lower index.
    pub fn classify(&self, input: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict(input)?))
    }

    /// Fraction of examples whose predicted class differs from the label.
    pub fn error_rate(&self, data: &Dataset) -> Result<f64> {
        Ok(self.misclassified(data)? as f64 / data.len() as f64)
    }

    pub fn misclassified(&self, data: &Dataset) -> Result<usize> {
        self.check_data(data)?;
        let mut wrong = 0;
        for l in 0..data.len() {
            if self.classify(data.input(l))? != data.labels()[l] {
                wrong += 1;
            }
        }
        Ok(wrong)
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        check_len(self.topology.n_inputs(), data.n_inputs())?;
        check_len(self.topology.n_outputs(), data.n_outputs())
    }

    /// Empirical error decomposition over `data`: squared differences are
    /// summed over output coordinates and averaged over examples.
    pub fn decomposition(&self, data: &Dataset) -> Result<Decomposition> {
        self.check_data(data)?;
        let k = self.components.len();
        let mut component_error = vec![0.0; k];
        let mut ambiguity = vec![0.0; k];
        let mut ensemble_error = 0.0;
        for l in 0..data.len() {
            let target = data.target(l);
            let outputs = self.component_outputs(data.input(l));
            let combined = self.combine(&outputs);
            ensemble_error += squared_gap(&combined, target);
            for (i, out) in outputs.iter().enumerate() {
                component_error[i] += squared_gap(out, target);
                ambiguity[i] += squared_gap(out, &combined);
            }
        }
        let p = data.len() as f64;
        let per_component: Vec<ComponentTerms> = component_error
            .iter()
            .zip(&ambiguity)
            .map(|(e, d)| ComponentTerms {
                error: e / p,
                ambiguity: d / p,
            })
            .collect();
        let weighted = |f: fn(&ComponentTerms) -> f64| -> f64 {
            per_component.iter().zip(&self.weights).map(|(c, w)| w * f(c)).sum()
        };
        Ok(Decomposition {
            ensemble_error: ensemble_error / p,
            mean_component_error: weighted(|c| c.error),
            mean_ambiguity: weighted(|c| c.ambiguity),
            per_component,
        })
    }
}

fn squared_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentTerms {
    pub error: f64,
    pub ambiguity: f64,
}

/// Ensemble error `E`, weighted mean component error `Ē` and weighted mean
/// ambiguity `D̄`; `E = Ē - D̄` holds up to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub ensemble_error: f64,
    pub mean_component_error: f64,
    pub mean_ambiguity: f64,
    pub per_component: Vec<ComponentTerms>,
}

impl Decomposition {
    /// `|E - (Ē - D̄)|`.
    pub fn identity_gap(&self) -> f64 {
        (self.ensemble_error - (self.mean_component_error - self.mean_ambiguity)).abs()
    }
}

/// Takes the best personal best of each cluster as a component network,
/// equally weighted.
pub fn build_ensemble(swarm: &Swarm, clusters: &ClusterAssignment, topology: Topology) -> Result<Ensemble> {
    let bests = cluster_bests(&swarm.particles, clusters)?;
    let components = bests
        .iter()
        .map(|&i| swarm.particles[i].pbest_position.clone())
        .collect();
    Ensemble::uniform(topology, components)
}
