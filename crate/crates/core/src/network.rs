//! Three-layer sigmoid networks stored as flat parameter vectors.
//!
//! A position vector holds every weight and bias of one network in a fixed
//! order:
//!
//! ```text
//! [ input->hidden weights (q rows of n) | hidden biases (q)
//! | hidden->output weights (m rows of q) | output biases (m) ]
//! ```
//!
//! so a `(n, q, m)` topology occupies `n*q + q + q*m + m` reals.

use crate::data::Dataset;
use crate::error::{check_len, Error, Result};

/// Exponent arguments beyond this magnitude are clamped before `exp`.
const SIGMOID_LIMIT: f64 = 500.0;

/// Layer sizes of a network with one hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Topology {
    n_inputs: usize,
    n_hidden: usize,
    n_outputs: usize,
}

impl Topology {
    pub fn new(n_inputs: usize, n_hidden: usize, n_outputs: usize) -> Result<Self> {
        if n_inputs == 0 || n_hidden == 0 || n_outputs == 0 {
            return Err(Error::InvalidConfig(format!(
                "topology ({n_inputs}, {n_hidden}, {n_outputs}) needs at least one node per layer"
            )));
        }
        Ok(Self {
            n_inputs,
            n_hidden,
            n_outputs,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    /// Number of reals in a position vector for this topology.
    pub fn dimension(&self) -> usize {
        let (n, q, m) = (self.n_inputs, self.n_hidden, self.n_outputs);
        n * q + q + q * m + m
    }

    /// Index of the weight from input `i` into hidden node `j`.
    pub fn input_weight(&self, j: usize, i: usize) -> usize {
        j * self.n_inputs + i
    }

    pub fn hidden_bias(&self, j: usize) -> usize {
        self.n_hidden * self.n_inputs + j
    }

    /// Index of the weight from hidden node `j` into output `k`.
    pub fn output_weight(&self, k: usize, j: usize) -> usize {
        self.n_hidden * (self.n_inputs + 1) + k * self.n_hidden + j
    }

    pub fn output_bias(&self, k: usize) -> usize {
        self.n_hidden * (self.n_inputs + 1 + self.n_outputs) + k
    }
}

/// Logistic function, saturating to `[EPSILON, 1 - EPSILON]`.
pub fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-SIGMOID_LIMIT, SIGMOID_LIMIT);
    (1.0 / (1.0 + (-x).exp())).clamp(f64::EPSILON, 1.0 - f64::EPSILON)
}

/// Evaluates the network encoded by `position` on one input vector.
pub fn forward(position: &[f64], topology: &Topology, input: &[f64]) -> Result<Vec<f64>> {
    check_len(topology.dimension(), position.len())?;
    check_len(topology.n_inputs, input.len())?;
    let mut hidden = vec![0.0; topology.n_hidden];
    let mut output = vec![0.0; topology.n_outputs];
    forward_into(position, topology, input, &mut hidden, &mut output);
    Ok(output)
}

/// Unchecked forward pass writing into caller-owned buffers.
pub(crate) fn forward_into(
    position: &[f64],
    topology: &Topology,
    input: &[f64],
    hidden: &mut [f64],
    output: &mut [f64],
) {
    let (n, q) = (topology.n_inputs, topology.n_hidden);
    let (w_in, rest) = position.split_at(n * q);
    let (b_hidden, rest) = rest.split_at(q);
    let (w_out, b_out) = rest.split_at(q * topology.n_outputs);

    for ((h, row), b) in hidden.iter_mut().zip(w_in.chunks_exact(n)).zip(b_hidden) {
        let sum: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum();
        *h = sigmoid(sum + b);
    }
    for ((f, row), b) in output.iter_mut().zip(w_out.chunks_exact(q)).zip(b_out) {
        let sum: f64 = row.iter().zip(hidden.iter()).map(|(w, h)| w * h).sum();
        *f = sigmoid(sum + b);
    }
}

/// Mean squared error over every output coordinate of every example.
pub fn mse_fitness(position: &[f64], topology: &Topology, data: &Dataset) -> Result<f64> {
    check_len(topology.dimension(), position.len())?;
    check_len(topology.n_inputs, data.n_inputs())?;
    check_len(topology.n_outputs, data.n_outputs())?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(mse_unchecked(position, topology, data))
}

pub(crate) fn mse_unchecked(position: &[f64], topology: &Topology, data: &Dataset) -> f64 {
    let mut hidden = vec![0.0; topology.n_hidden];
    let mut output = vec![0.0; topology.n_outputs];
    let mut total = 0.0;
    for l in 0..data.len() {
        forward_into(position, topology, data.input(l), &mut hidden, &mut output);
        total += output
            .iter()
            .zip(data.target(l))
            .map(|(f, t)| (f - t) * (f - t))
            .sum::<f64>();
    }
    total / (topology.n_outputs * data.len()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_position(topology: &Topology, rng: &mut impl Rng) -> Vec<f64> {
        (0..topology.dimension())
            .map(|_| rng.gen_range(-5.0..=5.0))
            .collect()
    }

    /// Direct transcription of the two layer equations using explicit
    /// double-indexed weights.
    fn hand_forward(n: usize, q: usize, m: usize, p: &[f64], x: &[f64]) -> Vec<f64> {
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut h = vec![0.0; q];
        for j in 0..q {
            let mut acc = p[n * q + j];
            for i in 0..n {
                acc += p[j * n + i] * x[i];
            }
            h[j] = s(acc);
        }
        let base = n * q + q;
        (0..m)
            .map(|k| {
                let mut acc = p[base + q * m + k];
                for j in 0..q {
                    acc += p[base + k * q + j] * h[j];
                }
                s(acc)
            })
            .collect()
    }

    #[test]
    fn dimension_counts_every_weight_and_bias() {
        assert_eq!(Topology::new(14, 7, 2).unwrap().dimension(), 121);
        assert_eq!(Topology::new(1, 1, 1).unwrap().dimension(), 4);
        assert_eq!(Topology::new(8, 7, 2).unwrap().dimension(), 79);
    }

    #[test]
    fn zero_sized_layers_are_rejected() {
        assert!(Topology::new(0, 7, 2).is_err());
        assert!(Topology::new(3, 0, 2).is_err());
        assert!(Topology::new(3, 7, 0).is_err());
    }

    #[test]
    fn layout_offsets_tile_the_vector() {
        let t = Topology::new(3, 2, 2).unwrap();
        assert_eq!(t.input_weight(0, 0), 0);
        assert_eq!(t.input_weight(1, 2), 5);
        assert_eq!(t.hidden_bias(0), 6);
        assert_eq!(t.output_weight(0, 0), 8);
        assert_eq!(t.output_weight(1, 1), 11);
        assert_eq!(t.output_bias(1), t.dimension() - 1);
    }

    #[test]
    fn sigmoid_reference_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_abs_diff_eq!(sigmoid(3f64.ln()), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(sigmoid(-(3f64.ln())), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn sigmoid_saturates_without_overflow() {
        assert_eq!(sigmoid(1e6), 1.0 - f64::EPSILON);
        assert_eq!(sigmoid(-1e6), f64::EPSILON);
        assert!(sigmoid(f64::MAX).is_finite());
    }

    #[test]
    fn zero_position_outputs_one_half() {
        let t = Topology::new(4, 3, 2).unwrap();
        let out = forward(&vec![0.0; t.dimension()], &t, &[0.3, -2.0, 7.0, 1.0]).unwrap();
        assert_eq!(out, vec![0.5, 0.5]);
    }

    #[test]
    fn single_node_network_by_hand() {
        let t = Topology::new(1, 1, 1).unwrap();
        let ln3 = 3f64.ln();
        let p = [0.0, 0.0, 2.0 * ln3, -ln3];
        let out = forward(&p, &t, &[42.0]).unwrap();
        assert_abs_diff_eq!(out[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn forward_matches_hand_evaluation() {
        let t = Topology::new(2, 3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let p = random_position(&t, &mut rng);
            let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let got = forward(&p, &t, &x).unwrap();
            let want = hand_forward(2, 3, 2, &p, &x);
            for (g, w) in got.iter().zip(&want) {
                assert_abs_diff_eq!(g, w, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn forward_rejects_bad_lengths() {
        let t = Topology::new(2, 3, 2).unwrap();
        assert!(matches!(
            forward(&[0.0; 5], &t, &[0.0, 0.0]),
            Err(Error::DimensionMismatch { expected: 17, actual: 5 })
        ));
        assert!(forward(&[0.0; 17], &t, &[0.0]).is_err());
    }

    #[test]
    fn mse_of_half_outputs_against_ones() {
        let t = Topology::new(2, 2, 1).unwrap();
        let data = Dataset::new(vec![vec![0.1, 0.2]; 4], vec![vec![1.0]; 4]).unwrap();
        let mse = mse_fitness(&vec![0.0; t.dimension()], &t, &data).unwrap();
        assert_eq!(mse, 0.25);
    }

    #[test]
    fn mse_zero_when_outputs_hit_targets() {
        let t = Topology::new(1, 1, 1).unwrap();
        let data = Dataset::new(vec![vec![0.0], vec![1.0]], vec![vec![0.5], vec![0.5]]).unwrap();
        assert_eq!(mse_fitness(&[0.0; 4], &t, &data).unwrap(), 0.0);
    }

    #[test]
    fn mse_matches_double_loop_oracle() {
        let t = Topology::new(2, 3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_position(&t, &mut rng);
        let xs: Vec<Vec<f64>> = (0..5)
            .map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
            .collect();
        let ts: Vec<Vec<f64>> = (0..5)
            .map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
            .collect();
        let mut oracle = 0.0;
        for k in 0..2 {
            for l in 0..5 {
                let f = hand_forward(2, 3, 2, &p, &xs[l]);
                oracle += (f[k] - ts[l][k]).powi(2);
            }
        }
        oracle /= 10.0;
        let data = Dataset::new(xs, ts).unwrap();
        assert_abs_diff_eq!(mse_fitness(&p, &t, &data).unwrap(), oracle, epsilon = 1e-14);
    }

    #[test]
    fn output_bias_moves_only_its_output() {
        let t = Topology::new(3, 4, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_position(&t, &mut rng);
        let x = [0.2, 0.5, 0.9];
        let before = forward(&p, &t, &x).unwrap();
        let mut bumped = p.clone();
        bumped[t.output_bias(1)] += 0.5;
        let after = forward(&bumped, &t, &x).unwrap();
        assert_eq!(before[0], after[0]);
        assert!(after[1] > before[1]);
        assert_eq!(before[2], after[2]);
    }

    proptest! {
        #[test]
        fn outputs_stay_inside_open_unit_interval(
            seed in any::<u64>(),
            input in proptest::collection::vec(-1e3f64..1e3, 4),
        ) {
            let t = Topology::new(4, 5, 3).unwrap();
            let p = random_position(&t, &mut ChaCha8Rng::seed_from_u64(seed));
            for f in forward(&p, &t, &input).unwrap() {
                prop_assert!(f > 0.0 && f < 1.0);
            }
        }

        #[test]
        fn hidden_permutation_leaves_outputs_unchanged(seed in any::<u64>()) {
            let (n, q, m) = (3, 4, 2);
            let t = Topology::new(n, q, m).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_position(&t, &mut rng);
            let perm = [2usize, 0, 3, 1];
            let mut permuted = p.clone();
            for (new_j, &old_j) in perm.iter().enumerate() {
                for i in 0..n {
                    permuted[t.input_weight(new_j, i)] = p[t.input_weight(old_j, i)];
                }
                permuted[t.hidden_bias(new_j)] = p[t.hidden_bias(old_j)];
                for k in 0..m {
                    permuted[t.output_weight(k, new_j)] = p[t.output_weight(k, old_j)];
                }
            }
            let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let a = forward(&p, &t, &x).unwrap();
            let b = forward(&permuted, &t, &x).unwrap();
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - v).abs() < 1e-14);
            }
        }

        #[test]
        fn mse_ignores_example_order(seed in any::<u64>(), shift in 1usize..6) {
            let t = Topology::new(2, 3, 2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_position(&t, &mut rng);
            let xs: Vec<Vec<f64>> = (0..6).map(|_| vec![rng.gen(), rng.gen()]).collect();
            let ts: Vec<Vec<f64>> = (0..6).map(|_| vec![rng.gen(), rng.gen()]).collect();
            let a = mse_fitness(&p, &t, &Dataset::new(xs.clone(), ts.clone()).unwrap()).unwrap();
            let mut xr = xs;
            let mut tr = ts;
            xr.rotate_left(shift);
            tr.rotate_left(shift);
            let b = mse_fitness(&p, &t, &Dataset::new(xr, tr).unwrap()).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() < 1e-14);
        }
    }
}
